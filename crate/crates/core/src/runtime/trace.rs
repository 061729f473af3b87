use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ExecError, StepError};
use crate::backends::{Completion, TokenUsage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: u32,
    pub prompt: String,
    /// Raw backend text, untrimmed.
    pub response: String,
    pub latency_ms: f64,
    pub usage: TokenUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One entry of the output list, addressed by instruction index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepOutput {
    pub index: u32,
    pub text: String,
}

/// Everything one script execution produced.
///
/// `steps` are in completion order; `outputs` are in script order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub steps: Vec<StepRecord>,
    pub outputs: Vec<StepOutput>,
    pub final_answer: String,
}

// f64 latency keeps the derive from giving Eq; equality of traces is only
// ever asserted through `outputs` and `final_answer`.
impl Eq for ExecutionTrace {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TraceLine {
    Step(StepRecord),
    Summary { final_answer: String, outputs: Vec<StepOutput>, usage: TokenUsage },
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("trace has no summary record")]
    MissingSummary,
}

impl ExecutionTrace {
    pub(crate) fn record_success(&mut self, index: u32, prompt: String, completion: Completion, latency: Duration) {
        self.outputs.push(StepOutput { index, text: completion.text.clone() });
        self.steps.push(StepRecord {
            index,
            prompt,
            response: completion.text,
            latency_ms: latency.as_secs_f64() * 1e3,
            usage: completion.usage,
            error: None,
        });
    }

    /// Logs a failed step without adding an output.
    pub(crate) fn record_error(&mut self, index: u32, prompt: String, error: &StepError) {
        self.steps.push(StepRecord {
            index,
            prompt,
            response: String::new(),
            latency_ms: 0.0,
            usage: TokenUsage::default(),
            error: Some(error.to_string()),
        });
    }

    /// Logs a failed step and stores an empty output in its place.
    pub(crate) fn record_failure(&mut self, index: u32, prompt: String, error: StepError) {
        self.record_error(index, prompt, &error);
        self.outputs.push(StepOutput { index, text: String::new() });
    }

    pub(crate) fn finish(&mut self) {
        self.final_answer = self.outputs.last().map(|o| o.text.clone()).unwrap_or_default();
    }

    pub(crate) fn into_error(mut self, step: u32, cause: StepError) -> ExecError {
        self.finish();
        ExecError { step, cause, trace: Box::new(self) }
    }

    pub fn output(&self, index: u32) -> Option<&str> {
        self.outputs.iter().find(|o| o.index == index).map(|o| o.text.as_str())
    }

    pub fn usage(&self) -> TokenUsage {
        self.steps.iter().map(|s| s.usage).sum()
    }

    pub fn failures(&self) -> usize {
        self.steps.iter().filter(|s| s.error.is_some()).count()
    }

    /// One JSON object per step, then a summary record.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&serde_json::to_string(&TraceLine::Step(step.clone())).expect("step serializes"));
            out.push('\n');
        }
        let summary = TraceLine::Summary {
            final_answer: self.final_answer.clone(),
            outputs: self.outputs.clone(),
            usage: self.usage(),
        };
        out.push_str(&serde_json::to_string(&summary).expect("summary serializes"));
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceParseError> {
        let mut trace = ExecutionTrace::default();
        let mut summarized = false;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            match serde_json::from_str(line).map_err(|source| TraceParseError::Json { line: i + 1, source })? {
                TraceLine::Step(step) => trace.steps.push(step),
                TraceLine::Summary { final_answer, outputs, .. } => {
                    trace.final_answer = final_answer;
                    trace.outputs = outputs;
                    summarized = true;
                }
            }
        }
        if !summarized {
            return Err(TraceParseError::MissingSummary);
        }
        Ok(trace)
    }
}
