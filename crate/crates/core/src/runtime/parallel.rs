//! Dependency-ordered concurrent execution.

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::unbounded;

use super::{render_instruction, Bindings, ErrorPolicy, ExecError, ExecOptions, ExecutionTrace, StepError};
use crate::backends::{Backend, BackendError, Completion, Memoized};
use crate::lwt::LwtScript;

type Finished = (usize, String, Result<Completion, BackendError>, Duration);

/// Runs every instruction as soon as the outputs it reads exist, with at most
/// `max_in_flight` backend calls outstanding.
///
/// With a backend that is a pure function of the prompt, `outputs` equals
/// what [`execute_script`](super::execute_script) produces. `steps` are
/// recorded in completion order.
pub fn execute_parallel(
    script: &LwtScript,
    bindings: &Bindings,
    backend: &dyn Backend,
    options: ExecOptions,
    max_in_flight: usize,
) -> Result<ExecutionTrace, ExecError> {
    assert!(max_in_flight > 0, "max_in_flight must be positive");
    if options.memoize {
        let memo = Memoized::new(backend);
        return schedule(script, bindings, &memo, options.on_error, max_in_flight);
    }
    schedule(script, bindings, backend, options.on_error, max_in_flight)
}

fn schedule(
    script: &LwtScript,
    bindings: &Bindings,
    backend: &dyn Backend,
    on_error: ErrorPolicy,
    max_in_flight: usize,
) -> Result<ExecutionTrace, ExecError> {
    let n = script.len();
    let position: HashMap<u32, usize> = script.instructions.iter().enumerate().map(|(p, i)| (i.index, p)).collect();

    let mut remaining = vec![0usize; n];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (p, instr) in script.instructions.iter().enumerate() {
        // unknown or non-backward references are left to render_instruction to reject
        let deps: BTreeSet<usize> =
            instr.numbered_refs().filter(|k| *k < instr.index).filter_map(|k| position.get(&k).copied()).collect();
        remaining[p] = deps.len();
        for d in deps {
            dependents[d].push(p);
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|p| remaining[*p] == 0).collect();

    let mut trace = ExecutionTrace::default();
    let mut failure: Option<(u32, StepError)> = None;
    let workers = max_in_flight.min(n).max(1);

    thread::scope(|scope| {
        let (job_tx, job_rx) = unbounded::<(usize, String)>();
        let (done_tx, done_rx) = unbounded::<Finished>();
        for _ in 0..workers {
            let job_rx = job_rx.clone();
            let done_tx = done_tx.clone();
            scope.spawn(move || {
                for (p, prompt) in job_rx {
                    let started = Instant::now();
                    let result = catch_unwind(AssertUnwindSafe(|| backend.infer(&prompt)))
                        .unwrap_or_else(|_| Err(BackendError::Transport("backend panicked".into())));
                    if done_tx.send((p, prompt, result, started.elapsed())).is_err() {
                        break;
                    }
                }
            });
        }
        drop(done_tx);

        let mut release = |p: usize, ready: &mut BTreeSet<usize>| {
            for &d in &dependents[p] {
                remaining[d] -= 1;
                if remaining[d] == 0 {
                    ready.insert(d);
                }
            }
        };

        let mut in_flight = 0usize;
        loop {
            while failure.is_none() && in_flight < max_in_flight {
                let Some(p) = ready.pop_first() else { break };
                let instr = &script.instructions[p];
                match render_instruction(instr, &trace.outputs, bindings) {
                    Ok(prompt) => {
                        job_tx.send((p, prompt)).expect("workers outlive the dispatcher");
                        in_flight += 1;
                    }
                    Err(e) => match on_error {
                        ErrorPolicy::Abort => failure = Some((instr.index, e.into())),
                        ErrorPolicy::Record => {
                            trace.record_failure(instr.index, String::new(), e.into());
                            release(p, &mut ready);
                        }
                    },
                }
            }
            if in_flight == 0 {
                break;
            }
            let Ok((p, prompt, result, latency)) = done_rx.recv() else { break };
            in_flight -= 1;
            let index = script.instructions[p].index;
            match result {
                Ok(completion) => {
                    trace.record_success(index, prompt, completion, latency);
                    release(p, &mut ready);
                }
                Err(e) => match on_error {
                    ErrorPolicy::Abort => {
                        let cause = StepError::from(e);
                        trace.record_error(index, prompt, &cause);
                        failure.get_or_insert((index, cause));
                    }
                    ErrorPolicy::Record => {
                        trace.record_failure(index, prompt, e.into());
                        release(p, &mut ready);
                    }
                },
            }
        }
        drop(job_tx);
    });

    trace.outputs.sort_by_key(|o| o.index);
    if let Some((step, cause)) = failure {
        return Err(trace.into_error(step, cause));
    }
    trace.finish();
    Ok(trace)
}
