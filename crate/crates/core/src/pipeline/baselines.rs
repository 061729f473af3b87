//! Single-inference prompting baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{PipelineError, EXAMPLE_HEADER};
use crate::backends::{Backend, TokenUsage};

pub const STEP_BY_STEP: &str = "Let's think step by step.";
const FINAL_ANSWER_HINT: &str = "End your response with \"The final answer is <answer>.\"\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    ZeroShot,
    FewShot,
    ZeroCot,
    Cot,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] =
        [BaselineKind::ZeroShot, BaselineKind::FewShot, BaselineKind::ZeroCot, BaselineKind::Cot];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::ZeroShot => "zero_shot",
            BaselineKind::FewShot => "few_shot",
            BaselineKind::ZeroCot => "zero_cot",
            BaselineKind::Cot => "cot",
        }
    }

    pub fn needs_example(self) -> bool {
        matches!(self, BaselineKind::FewShot | BaselineKind::Cot)
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        BaselineKind::ALL.into_iter().find(|k| k.name() == key).ok_or_else(|| format!("unknown baseline `{s}`"))
    }
}

/// Assembles the single prompt for a baseline. `example` is required for
/// few-shot and CoT and ignored otherwise.
pub fn build_baseline_prompt(
    kind: BaselineKind,
    q: &str,
    context: &str,
    example: Option<&str>,
) -> Result<String, PipelineError> {
    let mut p = format!("{context}\n");
    if kind.needs_example() {
        let example = example.ok_or(PipelineError::MissingExample(kind))?;
        p.push_str(EXAMPLE_HEADER);
        p.push_str(example.trim_end());
        p.push('\n');
    }
    p.push_str("Input: ");
    p.push_str(q);
    p.push('\n');
    match kind {
        BaselineKind::ZeroShot | BaselineKind::FewShot => p.push_str("Output:"),
        BaselineKind::ZeroCot => {
            p.push_str(FINAL_ANSWER_HINT);
            p.push_str(STEP_BY_STEP);
        }
        BaselineKind::Cot => p.push_str("Answer:"),
    }
    Ok(p)
}

/// The text after the last "The final answer is" or "Output:", else the whole response.
pub fn extract_final_answer(response: &str) -> String {
    let tail = ["The final answer is", "Output:"]
        .iter()
        .filter_map(|marker| response.rfind(marker).map(|i| &response[i + marker.len()..]))
        .next()
        .unwrap_or(response);
    let line = tail.trim().lines().next().unwrap_or("").trim();
    line.strip_suffix('.').unwrap_or(line).trim().to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub prompt: String,
    pub response: String,
    pub answer: String,
    pub usage: TokenUsage,
}

pub fn run_baseline(
    kind: BaselineKind,
    q: &str,
    context: &str,
    example: Option<&str>,
    backend: &dyn Backend,
) -> Result<BaselineOutcome, PipelineError> {
    let prompt = build_baseline_prompt(kind, q, context, example)?;
    let completion = backend.infer(&prompt)?;
    Ok(BaselineOutcome {
        answer: extract_final_answer(&completion.text),
        response: completion.text,
        usage: completion.usage,
        prompt,
    })
}
