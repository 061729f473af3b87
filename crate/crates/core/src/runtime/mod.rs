//! Script execution.
//!
//! The output list starts empty. For each instruction, every placeholder is
//! replaced by the referenced output (whole, or indexed), the rendered prompt
//! goes to the backend, and the response is appended. The last response is
//! the answer.

mod parallel;
mod trace;
mod values;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{Backend, BackendError, Memoized};
use crate::lwt::{LwtInstruction, LwtScript, PlaceholderSource, Segment};

pub use parallel::execute_parallel;
pub use trace::{ExecutionTrace, StepOutput, StepRecord, TraceParseError};
pub use values::{index_value, is_list, parse_list, IndexError};

/// Named inputs such as `input`, `Set1`, `Set2`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bindings(BTreeMap<String, String>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(name: impl Into<String>, value: impl Into<String>) -> Self {
        let mut b = Self::new();
        b.insert(name, value);
        b
    }

    pub fn insert(&mut self, name: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.0.insert(name.into(), value.into());
        self
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }

    pub fn names(&self) -> Vec<&str> {
        self.0.keys().map(String::as_str).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        Self(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum RenderError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("named input `{0}` is not bound")]
    MissingBinding(String),
    /// The referenced instruction has not produced output before this one.
    #[error("no output ({0}) available")]
    UnresolvedReference(u32),
}

/// Fills every placeholder of `instr` from earlier outputs and bindings.
///
/// Only outputs of instructions labeled below `instr.index` are visible.
/// Referenced values are trimmed before substitution.
pub fn render_instruction(
    instr: &LwtInstruction,
    outputs: &[StepOutput],
    bindings: &Bindings,
) -> Result<String, RenderError> {
    let mut prompt = String::new();
    for segment in &instr.segments {
        match segment {
            Segment::Literal(text) => prompt.push_str(text),
            Segment::Ref(placeholder) => {
                let source = match &placeholder.source {
                    PlaceholderSource::Numbered(k) if *k >= instr.index => {
                        return Err(RenderError::UnresolvedReference(*k))
                    }
                    PlaceholderSource::Numbered(k) => outputs
                        .iter()
                        .find(|o| o.index == *k)
                        .map(|o| o.text.as_str())
                        .ok_or(RenderError::UnresolvedReference(*k))?,
                    PlaceholderSource::Named(name) => {
                        bindings.get(name).ok_or_else(|| RenderError::MissingBinding(name.clone()))?
                    }
                };
                if placeholder.is_full() {
                    prompt.push_str(source.trim());
                } else {
                    prompt.push_str(&index_value(source, &placeholder.index_path)?);
                }
            }
        }
    }
    Ok(prompt)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorPolicy {
    /// Stop at the first failing step; the partial trace rides in the error.
    #[default]
    Abort,
    /// Record the failure on the step, store an empty output, and continue.
    Record,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecOptions {
    pub on_error: ErrorPolicy,
    /// Reuse responses for identical prompts within one run.
    pub memoize: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Failure of one instruction, with everything executed before it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("instruction ({step}) failed: {cause}")]
pub struct ExecError {
    pub step: u32,
    pub cause: StepError,
    pub trace: Box<ExecutionTrace>,
}

impl ExecError {
    pub fn is_index_out_of_range(&self) -> bool {
        matches!(self.cause, StepError::Render(RenderError::Index(_)))
    }
}

/// Runs the instructions one at a time in index order.
pub fn execute_script(
    script: &LwtScript,
    bindings: &Bindings,
    backend: &dyn Backend,
    options: ExecOptions,
) -> Result<ExecutionTrace, ExecError> {
    if options.memoize {
        let memo = Memoized::new(backend);
        return run_sequential(script, bindings, &memo, options.on_error);
    }
    run_sequential(script, bindings, backend, options.on_error)
}

fn run_sequential(
    script: &LwtScript,
    bindings: &Bindings,
    backend: &dyn Backend,
    on_error: ErrorPolicy,
) -> Result<ExecutionTrace, ExecError> {
    let mut trace = ExecutionTrace::default();
    for instr in &script.instructions {
        let prompt = match render_instruction(instr, &trace.outputs, bindings) {
            Ok(prompt) => prompt,
            Err(e) => match on_error {
                ErrorPolicy::Abort => return Err(trace.into_error(instr.index, e.into())),
                ErrorPolicy::Record => {
                    trace.record_failure(instr.index, String::new(), e.into());
                    continue;
                }
            },
        };
        let started = Instant::now();
        let result = backend.infer(&prompt);
        let latency = started.elapsed();
        match result {
            Ok(completion) => trace.record_success(instr.index, prompt, completion, latency),
            Err(e) => match on_error {
                ErrorPolicy::Abort => {
                    trace.record_error(instr.index, prompt, &e.clone().into());
                    return Err(trace.into_error(instr.index, e.into()));
                }
                ErrorPolicy::Record => trace.record_failure(instr.index, prompt, e.into()),
            },
        }
    }
    trace.finish();
    Ok(trace)
}
