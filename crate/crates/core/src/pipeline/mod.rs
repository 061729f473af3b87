//! The three-stage kNoT pipeline: knowledge extraction, LWT translation and
//! script execution, plus the single-prompt baselines.
//!
//! Prompts are built from constant instruction fragments and two task-specific
//! parts: a context description C and an LWT example E. Each of the six
//! ablation switches removes exactly one fragment.

mod baselines;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{excerpt, Backend, BackendError, Completion};
use crate::lwt::{
    parse_script_with, validate_script, DuplicatePolicy, LwtScript, ParseError, ParseOptions, ValidationReport,
};
use crate::runtime::{execute_parallel, execute_script, Bindings, ExecError, ExecOptions, ExecutionTrace};

pub use baselines::{build_baseline_prompt, extract_final_answer, run_baseline, BaselineKind, BaselineOutcome};

pub const EXTRACTION_HEADER: &str = "Given the following question:\n";
pub const EXTRACTION_FRAMING: &str = "The Input section is the input query.\n\
The Context section is the goal we want to achieve.\n\
Please use your knowledge to create a solution by step-by-step manner without any numbers.\n";
pub const ELEMENTARY_COMMANDS: &str =
    "Every step need to be as easy as possible.\nUse Step0, Step1, Step2 to represent result.\n";
pub const RESTRICTION_COMMANDS: &str =
    "Don't use for loop to reduce step.\nDon't directly use any element in the input.\n";

pub const TRANSLATION_LEAD: &str = "Based on your expert knowledge\n";
pub const TRANSLATION_QUESTION: &str = "\nand the above example, create a script to solve the following question:\n";
pub const TRANSLATION_CONTEXT_FRAMING: &str =
    "The Input section is the input query. The Context section is the goal we want to achieve.\n";
pub const TRANSLATION_RULES: &str = "You have to follow the rules to create a script.\n\
This script should be numbered and contains several instruction to be called line-by-line in a sequential order.\n\
Use (number) to represent each line.\n\
The line numbering starts from 0.\n\
You can use LLM Inference: use LLM(\"Your Instruction\") to find the answer.\n\
Use {(index)} to represent the variable you want to replace with previous result.\n\
Use {(input)}, {(Set1)}, ... to represent input, not allow to directly use numbers.\n\
Use python indexing to get the element in the list (E.g. {(0)}[0], {(0)}[1]).\n\
Do not directly use numbers.\n";
pub const EXAMPLE_HEADER: &str = "Here is one example.\n";

/// The task-specific prompt parts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptParts {
    /// Context description C.
    pub context: String,
    /// LWT example E.
    pub example: String,
}

impl PromptParts {
    pub fn new(context: impl Into<String>, example: impl Into<String>) -> Self {
        Self { context: context.into(), example: example.into() }
    }
}

/// Constant part of the extraction prompt: everything except q and C.
pub fn extraction_instructions() -> String {
    build_extraction_prompt("", &PromptParts::default(), AblationConfig::full())
}

/// Constant part of the translation prompt: everything except q, the plan, C and E.
pub fn translation_instructions() -> String {
    build_translation_prompt(&SolutionPlan::default(), "", &PromptParts::default(), AblationConfig::full())
}

/// One ablatable prompt component, numbered 1 to 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    ContextInExtraction,
    ElementaryCommands,
    RestrictionCommands,
    ContextInTranslation,
    TranslationInstructions,
    LwtExample,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::ContextInExtraction,
        Component::ElementaryCommands,
        Component::RestrictionCommands,
        Component::ContextInTranslation,
        Component::TranslationInstructions,
        Component::LwtExample,
    ];

    pub fn number(self) -> usize {
        Component::ALL.iter().position(|c| *c == self).expect("listed") + 1
    }

    /// True for components of the extraction prompt, false for the translation prompt.
    pub fn in_extraction(self) -> bool {
        self.number() <= 3
    }

    /// The exact text this component contributes for the given parts.
    pub fn fragment(self, parts: &PromptParts) -> String {
        match self {
            Component::ContextInExtraction => format!("{}\n", parts.context),
            Component::ElementaryCommands => ELEMENTARY_COMMANDS.to_string(),
            Component::RestrictionCommands => RESTRICTION_COMMANDS.to_string(),
            Component::ContextInTranslation => format!("{}\n{TRANSLATION_CONTEXT_FRAMING}", parts.context),
            Component::TranslationInstructions => TRANSLATION_RULES.to_string(),
            Component::LwtExample => format!("{EXAMPLE_HEADER}{}", parts.example),
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Component::ContextInExtraction => "context in extraction",
            Component::ElementaryCommands => "elementary commands",
            Component::RestrictionCommands => "restriction commands",
            Component::ContextInTranslation => "context in translation",
            Component::TranslationInstructions => "translation instructions",
            Component::LwtExample => "LWT example",
        };
        write!(f, "({}) {name}", self.number())
    }
}

/// Which components are included; all on is full kNoT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationConfig {
    pub include_context_in_extraction: bool,
    pub include_elementary_commands: bool,
    pub include_restriction_commands: bool,
    pub include_context_in_translation: bool,
    pub include_translation_instructions: bool,
    pub include_lwt_example: bool,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl AblationConfig {
    pub fn full() -> Self {
        Self {
            include_context_in_extraction: true,
            include_elementary_commands: true,
            include_restriction_commands: true,
            include_context_in_translation: true,
            include_translation_instructions: true,
            include_lwt_example: true,
        }
    }

    pub fn includes(&self, component: Component) -> bool {
        match component {
            Component::ContextInExtraction => self.include_context_in_extraction,
            Component::ElementaryCommands => self.include_elementary_commands,
            Component::RestrictionCommands => self.include_restriction_commands,
            Component::ContextInTranslation => self.include_context_in_translation,
            Component::TranslationInstructions => self.include_translation_instructions,
            Component::LwtExample => self.include_lwt_example,
        }
    }

    pub fn set(&mut self, component: Component, on: bool) -> &mut Self {
        let flag = match component {
            Component::ContextInExtraction => &mut self.include_context_in_extraction,
            Component::ElementaryCommands => &mut self.include_elementary_commands,
            Component::RestrictionCommands => &mut self.include_restriction_commands,
            Component::ContextInTranslation => &mut self.include_context_in_translation,
            Component::TranslationInstructions => &mut self.include_translation_instructions,
            Component::LwtExample => &mut self.include_lwt_example,
        };
        *flag = on;
        self
    }

    pub fn without(mut self, component: Component) -> Self {
        self.set(component, false);
        self
    }

    pub fn is_full(&self) -> bool {
        *self == Self::full()
    }

    /// Six characters, `1` for included, in component order, e.g. `110111`.
    pub fn mask(&self) -> String {
        Component::ALL.iter().map(|c| if self.includes(*c) { '1' } else { '0' }).collect()
    }

    /// The full configuration and each single-component removal.
    pub fn single_removals() -> Vec<AblationConfig> {
        std::iter::once(Self::full()).chain(Component::ALL.iter().map(|c| Self::full().without(*c))).collect()
    }
}

impl fmt::Display for AblationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.mask())
    }
}

impl FromStr for AblationConfig {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits: Vec<char> = s.trim().chars().collect();
        if bits.len() != 6 || bits.iter().any(|c| *c != '0' && *c != '1') {
            return Err(PipelineError::BadMask(s.to_string()));
        }
        let mut config = Self::full();
        for (c, bit) in Component::ALL.iter().zip(bits) {
            config.set(*c, bit == '1');
        }
        Ok(config)
    }
}

/// Stage 1 output, passed verbatim into stage 2.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionPlan {
    pub text: String,
}

impl SolutionPlan {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }
}

/// Knowledge-extraction prompt for query `q`.
pub fn build_extraction_prompt(q: &str, parts: &PromptParts, ablation: AblationConfig) -> String {
    let mut p = String::from(EXTRACTION_HEADER);
    if ablation.include_context_in_extraction {
        p.push_str(&Component::ContextInExtraction.fragment(parts));
    }
    p.push_str("Input: ");
    p.push_str(q);
    p.push('\n');
    p.push_str(EXTRACTION_FRAMING);
    if ablation.include_elementary_commands {
        p.push_str(ELEMENTARY_COMMANDS);
    }
    if ablation.include_restriction_commands {
        p.push_str(RESTRICTION_COMMANDS);
    }
    p
}

/// LWT-translation prompt for query `q` and the stage 1 plan.
pub fn build_translation_prompt(plan: &SolutionPlan, q: &str, parts: &PromptParts, ablation: AblationConfig) -> String {
    let mut p = String::from(TRANSLATION_LEAD);
    p.push_str(&plan.text);
    p.push_str(TRANSLATION_QUESTION);
    p.push_str("Input: ");
    p.push_str(q);
    p.push('\n');
    for component in [Component::ContextInTranslation, Component::TranslationInstructions, Component::LwtExample] {
        if ablation.includes(component) {
            p.push_str(&component.fragment(parts));
        }
    }
    p
}

pub fn extract_plan(backend: &dyn Backend, prompt: &str) -> Result<(SolutionPlan, Completion), BackendError> {
    let completion = backend.infer(prompt)?;
    Ok((SolutionPlan::new(completion.text.clone()), completion))
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("ablation mask must be six 0/1 characters, got {0:?}")]
    BadMask(String),
    #[error("{0} baseline needs an example for this task")]
    MissingExample(BaselineKind),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Error)]
pub enum KnotError {
    #[error("knowledge extraction failed: {0}")]
    Extraction(BackendError),
    #[error("LWT translation failed: {0}")]
    Translation(BackendError),
    #[error("translation output is not a script: {source}")]
    Parse { source: ParseError, raw: String },
    #[error("generated script is invalid: {}", report.summary())]
    Invalid { report: ValidationReport, raw: String },
    #[error(transparent)]
    Execution(#[from] ExecError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnotOptions {
    pub ablation: AblationConfig,
    pub exec: ExecOptions,
    /// `None` runs instructions one at a time; `Some(n)` allows `n` concurrent calls.
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnotResult {
    pub plan: SolutionPlan,
    pub script_text: String,
    pub script: LwtScript,
    pub validation: ValidationReport,
    /// Usage of the two planning calls.
    pub planning_usage: crate::backends::TokenUsage,
    pub trace: ExecutionTrace,
    pub answer: String,
}

/// Runs all three stages. Stages 1 and 2 use `plan_backend`, stage 3 `exec_backend`.
pub fn run_knot(
    q: &str,
    bindings: &Bindings,
    parts: &PromptParts,
    options: KnotOptions,
    plan_backend: &dyn Backend,
    exec_backend: &dyn Backend,
) -> Result<KnotResult, KnotError> {
    let extraction = build_extraction_prompt(q, parts, options.ablation);
    let (plan, first) = extract_plan(plan_backend, &extraction).map_err(KnotError::Extraction)?;

    let translation = build_translation_prompt(&plan, q, parts, options.ablation);
    let second = plan_backend.infer(&translation).map_err(KnotError::Translation)?;
    let script_text = second.text;

    let parse_options = ParseOptions { duplicates: DuplicatePolicy::FirstBlock };
    let script = parse_script_with(&script_text, parse_options)
        .map_err(|source| KnotError::Parse { source, raw: script_text.clone() })?;
    let validation = validate_script(&script, &bindings.names());
    if !validation.is_ok() {
        return Err(KnotError::Invalid { report: validation, raw: script_text });
    }

    let trace = match options.max_in_flight {
        Some(n) => execute_parallel(&script, bindings, exec_backend, options.exec, n)?,
        None => execute_script(&script, bindings, exec_backend, options.exec)?,
    };
    let answer = trace.final_answer.clone();
    Ok(KnotResult { plan, script_text, script, validation, planning_usage: first.usage + second.usage, trace, answer })
}

/// Answers stage 1 with a fixed plan and stage 2 with a fixed script.
///
/// Stands in for the planning model when running offline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixturePlanner {
    pub plan: String,
    pub script: String,
}

impl FixturePlanner {
    pub fn new(plan: impl Into<String>, script: impl Into<String>) -> Self {
        Self { plan: plan.into(), script: script.into() }
    }
}

impl Backend for FixturePlanner {
    fn infer(&self, prompt: &str) -> Result<Completion, BackendError> {
        if prompt.starts_with(EXTRACTION_HEADER) {
            Ok(Completion::estimated(prompt, self.plan.clone()))
        } else if prompt.starts_with(TRANSLATION_LEAD) {
            Ok(Completion::estimated(prompt, self.script.clone()))
        } else {
            Err(BackendError::UnrecognizedPattern(excerpt(prompt)))
        }
    }

    fn label(&self) -> String {
        "fixture".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{FnBackend, OracleBackend};
    use crate::tasks::TaskKind;

    fn arithmetic_parts() -> PromptParts {
        TaskKind::Arithmetic.prompt_parts()
    }

    #[test]
    fn sorting_extraction_prompt() {
        let p = build_extraction_prompt("[2, 1]", &TaskKind::Sorting.prompt_parts(), AblationConfig::full());
        assert!(p.contains("You can use counting sort."));
        assert!(p.contains("Don't use for loop to reduce step."));
        assert!(p.contains("Input: [2, 1]\n"));
        assert!(p.starts_with(EXTRACTION_HEADER));
    }

    #[test]
    fn empty_query_is_well_formed() {
        let p = build_extraction_prompt("", &arithmetic_parts(), AblationConfig::full());
        assert!(p.contains("\nInput: \n"));
    }

    #[test]
    fn translation_prompt_contents() {
        let parts = arithmetic_parts();
        let plan = SolutionPlan::new("Step0: split");
        let p = build_translation_prompt(&plan, "1+2", &parts, AblationConfig::full());
        assert!(p.contains("Use {(input)}, {(Set1)}, ... to represent input"));
        assert!(p.ends_with(&parts.example));
        assert!(p.contains("Step0: split\nand the above example"));

        let no_example =
            build_translation_prompt(&plan, "1+2", &parts, AblationConfig::full().without(Component::LwtExample));
        assert!(!no_example.contains(EXAMPLE_HEADER));

        let bare: AblationConfig = "111000".parse().unwrap();
        let p = build_translation_prompt(&plan, "1+2", &parts, bare);
        assert_eq!(p, format!("{TRANSLATION_LEAD}Step0: split{TRANSLATION_QUESTION}Input: 1+2\n"));
    }

    #[test]
    fn each_flag_removes_exactly_its_fragment() {
        let parts = arithmetic_parts();
        let plan = SolutionPlan::new("Step0: a\nStep1: b");
        let q = "5*5/5*4+8-8+3*9";
        let full_e = build_extraction_prompt(q, &parts, AblationConfig::full());
        let full_t = build_translation_prompt(&plan, q, &parts, AblationConfig::full());
        for c in Component::ALL {
            let abl = AblationConfig::full().without(c);
            let e = build_extraction_prompt(q, &parts, abl);
            let t = build_translation_prompt(&plan, q, &parts, abl);
            let fragment = c.fragment(&parts);
            if c.in_extraction() {
                assert_eq!(full_e.replacen(&fragment, "", 1), e, "{c}");
                assert_eq!(t, full_t);
            } else {
                assert_eq!(full_t.replacen(&fragment, "", 1), t, "{c}");
                assert_eq!(e, full_e);
            }
        }
    }

    #[test]
    fn masks() {
        assert_eq!(AblationConfig::full().mask(), "111111");
        let a = AblationConfig::full().without(Component::RestrictionCommands);
        assert_eq!(a.mask(), "110111");
        assert_eq!(a.mask().parse::<AblationConfig>().unwrap(), a);
        assert!("11011".parse::<AblationConfig>().is_err());
        assert_eq!(AblationConfig::single_removals().len(), 7);
    }

    #[test]
    fn constants_are_task_independent() {
        let e = extraction_instructions();
        let t = translation_instructions();
        for task in TaskKind::ALL {
            let parts = task.prompt_parts();
            let full_e = build_extraction_prompt("", &parts, AblationConfig::full());
            let full_t = build_translation_prompt(&SolutionPlan::default(), "", &parts, AblationConfig::full());
            assert_eq!(full_e.replacen(&parts.context, "", 1), e);
            assert_eq!(full_t.replacen(&parts.context, "", 1).replacen(&parts.example, "", 1), t);
        }
    }

    #[test]
    fn knot_on_appendix_script() {
        let script = include_str!("../../assets/fixtures/arithmetic/appendix_5x5.lwt");
        let planner = FixturePlanner::new(TaskKind::Arithmetic.fixture_plan(), script);
        let q = "5*5/5*4+8-8+3*9";
        let result = run_knot(
            q,
            &Bindings::single("input", q),
            &arithmetic_parts(),
            KnotOptions::default(),
            &planner,
            &OracleBackend::new(),
        )
        .unwrap();
        assert_eq!(result.answer, "47");
        assert_eq!(result.script.len(), 8);
        assert_eq!(result.plan.text, TaskKind::Arithmetic.fixture_plan());
    }

    #[test]
    fn prose_translation_is_an_empty_script() {
        let planner = FixturePlanner::new("Step0", "Sure! First split the numbers, then add them.");
        let err = run_knot(
            "1+2",
            &Bindings::single("input", "1+2"),
            &arithmetic_parts(),
            KnotOptions::default(),
            &planner,
            &OracleBackend::new(),
        )
        .unwrap_err();
        match err {
            KnotError::Parse { source: ParseError::EmptyScript { .. }, raw } => assert!(raw.starts_with("Sure!")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chatty_output_keeps_first_block() {
        let text = "Here it is:\n(0)=LLM(\"Given {(input)}, Split the numbers without operators. Only output list.\")\n(1)=LLM(\"Add({(0)}[0], {(0)}[1]). Only output number. If contains floating point, round to two decimal places.\")\nOr alternatively:\n(0)=LLM(\"nonsense\")\n";
        let planner = FixturePlanner::new("Step0", text);
        let r = run_knot(
            "1+2",
            &Bindings::single("input", "1+2"),
            &arithmetic_parts(),
            KnotOptions::default(),
            &planner,
            &OracleBackend::new(),
        )
        .unwrap();
        assert_eq!(r.answer, "3");
    }

    #[test]
    fn forward_reference_is_rejected() {
        let planner = FixturePlanner::new("Step0", "(0)=LLM(\"{(1)}\")\n(1)=LLM(\"x\")\n");
        let err = run_knot(
            "q",
            &Bindings::single("input", "q"),
            &arithmetic_parts(),
            KnotOptions::default(),
            &planner,
            &OracleBackend::new(),
        )
        .unwrap_err();
        assert!(matches!(err, KnotError::Invalid { .. }));
    }

    #[test]
    fn stub_plan_is_verbatim() {
        let stub = FnBackend::new("stub", |_: &str| Ok("Step0: split".to_string()));
        let (plan, _) = extract_plan(&stub, "anything").unwrap();
        assert_eq!(plan, SolutionPlan::new("Step0: split"));
        assert!(matches!(
            extract_plan(&OracleBackend::new(), "Given the following question:\n"),
            Err(BackendError::UnrecognizedPattern(_))
        ));
    }

    #[test]
    fn parallel_execution_matches() {
        let script = include_str!("../../assets/fixtures/arithmetic/appendix_1p5.lwt");
        let planner = FixturePlanner::new("plan", script);
        let q = "1+5+7+8+2-8-7*7";
        let options = KnotOptions { max_in_flight: Some(4), ..KnotOptions::default() };
        let r =
            run_knot(q, &Bindings::single("input", q), &arithmetic_parts(), options, &planner, &OracleBackend::new())
                .unwrap();
        assert_eq!(r.answer, "-34");
    }
}
