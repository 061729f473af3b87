//! Benchmark driver: generates instances, runs a prompting scheme on each and
//! scores the answers.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{Backend, TokenUsage};
use crate::metrics::{score, BenchResult, MetricsError, RunLabel, SampleOutcome};
use crate::pipeline::{run_baseline, run_knot, AblationConfig, BaselineKind, FixturePlanner, KnotOptions};
use crate::runtime::ExecOptions;
use crate::tasks::{generate_with, GenerateOptions, Rounding, TaskError, TaskInstance, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Knot,
    Baseline(BaselineKind),
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Knot => f.write_str("knot"),
            Scheme::Baseline(kind) => write!(f, "{kind}"),
        }
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("knot") {
            return Ok(Scheme::Knot);
        }
        s.parse::<BaselineKind>().map(Scheme::Baseline).map_err(|_| format!("unknown scheme `{s}`"))
    }
}

/// Where the solution plan and script come from.
#[derive(Clone, Copy)]
pub enum PlanSource<'a> {
    /// The task's bundled plan and the instance's reference script.
    Fixture,
    Backend(&'a dyn Backend),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("sample count must be positive")]
    NoSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub task: TaskKind,
    pub size: usize,
    pub scheme: Scheme,
    pub n: usize,
    /// Sample `i` uses seed `base_seed + i`.
    pub base_seed: u64,
    pub ablation: AblationConfig,
    pub rounding: Rounding,
    /// Concurrent calls within one script; `None` executes sequentially.
    pub max_in_flight: Option<usize>,
    pub generate: GenerateOptions,
}

impl BenchSpec {
    pub fn new(task: TaskKind, size: usize, scheme: Scheme, n: usize) -> Self {
        Self {
            task,
            size,
            scheme,
            n,
            base_seed: 0,
            ablation: AblationConfig::full(),
            rounding: Rounding::PerStep,
            max_in_flight: None,
            generate: GenerateOptions::default(),
        }
    }

    pub fn label(&self) -> RunLabel {
        RunLabel {
            task: self.task,
            size: self.size,
            scheme: self.scheme.to_string(),
            ablation: self.ablation.mask(),
            rounding: self.rounding,
        }
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n as u64).map(|i| self.base_seed.wrapping_add(i))
    }
}

fn run_instance(
    spec: &BenchSpec,
    instance: &TaskInstance,
    plan: PlanSource<'_>,
    exec: &dyn Backend,
) -> Result<(String, TokenUsage), String> {
    let parts = spec.task.prompt_parts();
    match spec.scheme {
        Scheme::Knot => {
            let options = KnotOptions {
                ablation: spec.ablation,
                exec: ExecOptions::default(),
                max_in_flight: spec.max_in_flight,
            };
            let fixture;
            let planner: &dyn Backend = match plan {
                PlanSource::Fixture => {
                    fixture = FixturePlanner::new(spec.task.fixture_plan(), instance.reference_script());
                    &fixture
                }
                PlanSource::Backend(b) => b,
            };
            let result = run_knot(&instance.query(), &instance.bindings(), &parts, options, planner, exec)
                .map_err(|e| e.to_string())?;
            Ok((result.answer, result.planning_usage + result.trace.usage()))
        }
        Scheme::Baseline(kind) => {
            let example = match kind {
                BaselineKind::FewShot => Some(spec.task.few_shot_example(spec.size).map_err(|e| e.to_string())?),
                BaselineKind::Cot => spec.task.cot_example().map(String::from),
                _ => None,
            };
            let outcome = run_baseline(kind, &instance.query(), &parts.context, example.as_deref(), exec)
                .map_err(|e| e.to_string())?;
            Ok((outcome.answer, outcome.usage))
        }
    }
}

/// Runs one seed. Failures are recorded in the outcome, not returned.
pub fn run_sample(
    spec: &BenchSpec,
    seed: u64,
    plan: PlanSource<'_>,
    exec: &dyn Backend,
) -> Result<SampleOutcome, HarnessError> {
    let instance = generate_with(spec.task, spec.size, seed, spec.generate)?;
    let truth = instance.ground_truth_with(spec.rounding);
    let start = Instant::now();
    let result = run_instance(spec, &instance, plan, exec);
    let latency_ms = start.elapsed().as_secs_f64() * 1000.0;
    Ok(match result {
        Ok((answer, usage)) => SampleOutcome { seed, answer: Some(answer), truth, error: None, usage, latency_ms },
        Err(error) => {
            SampleOutcome { seed, answer: None, truth, error: Some(error), usage: TokenUsage::default(), latency_ms }
        }
    })
}

pub fn run_samples_sequential(
    spec: &BenchSpec,
    plan: PlanSource<'_>,
    exec: &dyn Backend,
) -> Result<Vec<SampleOutcome>, HarnessError> {
    spec.seeds().map(|seed| run_sample(spec, seed, plan, exec)).collect()
}

/// Samples run across the rayon pool when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn run_samples(
    spec: &BenchSpec,
    plan: PlanSource<'_>,
    exec: &dyn Backend,
) -> Result<Vec<SampleOutcome>, HarnessError> {
    use rayon::prelude::*;

    let seeds: Vec<u64> = spec.seeds().collect();
    seeds.into_par_iter().map(|seed| run_sample(spec, seed, plan, exec)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_samples(
    spec: &BenchSpec,
    plan: PlanSource<'_>,
    exec: &dyn Backend,
) -> Result<Vec<SampleOutcome>, HarnessError> {
    run_samples_sequential(spec, plan, exec)
}

pub fn run_bench(spec: &BenchSpec, plan: PlanSource<'_>, exec: &dyn Backend) -> Result<BenchResult, HarnessError> {
    if spec.n == 0 {
        return Err(HarnessError::NoSamples);
    }
    let outcomes = run_samples(spec, plan, exec)?;
    Ok(score(spec.label(), outcomes)?)
}

/// Runs `f` with sample execution limited to `workers` threads. Without the
/// `parallel` feature samples always run one at a time.
#[cfg(feature = "parallel")]
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<T: Send>(_workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    f()
}
