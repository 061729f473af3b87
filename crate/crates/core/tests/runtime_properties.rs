mod common;

use knot_core::backends::OracleBackend;
use knot_core::lwt::parse_script;
use knot_core::runtime::{execute_parallel, execute_script, ErrorPolicy, ExecOptions, ExecutionTrace};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parallel_matches_sequential(seed in any::<u64>(), workers in 1usize..9, memoize in any::<bool>()) {
        let (text, bindings) = common::random_oracle_script(seed);
        let script = parse_script(&text).unwrap();
        let options = ExecOptions { on_error: ErrorPolicy::Abort, memoize };
        let oracle = OracleBackend::new();
        let seq = execute_script(&script, &bindings, &oracle, options).unwrap();
        let par = execute_parallel(&script, &bindings, &oracle, options, workers).unwrap();
        prop_assert_eq!(&seq.outputs, &par.outputs);
        prop_assert_eq!(&seq.final_answer, &par.final_answer);
        prop_assert_eq!(seq.steps.len(), par.steps.len());
    }

    #[test]
    fn trace_jsonl_round_trip(seed in any::<u64>()) {
        let (text, bindings) = common::random_oracle_script(seed);
        let script = parse_script(&text).unwrap();
        let trace = execute_script(&script, &bindings, &OracleBackend::new(), ExecOptions::default()).unwrap();
        let back = ExecutionTrace::from_jsonl(&trace.to_jsonl()).unwrap();
        prop_assert_eq!(back.usage(), trace.usage());
        prop_assert_eq!(back.outputs, trace.outputs);
        prop_assert_eq!(back.final_answer, trace.final_answer);
    }
}

#[test]
fn recorded_failures_match_across_schedulers() {
    let script = parse_script(
        "(0)=LLM(\"Divide(4, 0). Only output number. If contains floating point, round to two decimal places.\")\n\
         (1)=LLM(\"Add(1, 2). Only output number. If contains floating point, round to two decimal places.\")\n",
    )
    .unwrap();
    let options = ExecOptions { on_error: ErrorPolicy::Record, memoize: false };
    let bindings = Default::default();
    let seq = execute_script(&script, &bindings, &OracleBackend::new(), options).unwrap();
    let par = execute_parallel(&script, &bindings, &OracleBackend::new(), options, 4).unwrap();
    assert_eq!(seq.outputs, par.outputs);
    assert_eq!(seq.failures(), 1);
    assert_eq!(par.failures(), 1);
}
