//! Accuracy aggregation, prompt-cost accounting and report output.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{estimate_tokens, TokenUsage};
use crate::pipeline::{extraction_instructions, translation_instructions, PromptParts};
use crate::tasks::{normalize, Answer, Rounding, TaskKind};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no samples to score")]
    EmptyRun,
    #[error("price must be non-negative, got {0}")]
    NegativePrice(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// What one sample produced, before scoring.
#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub seed: u64,
    /// Raw final answer; `None` when the run failed.
    pub answer: Option<String>,
    pub truth: Answer,
    pub error: Option<String>,
    pub usage: TokenUsage,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub seed: u64,
    pub answer: Option<String>,
    pub ground_truth: String,
    pub correct: bool,
    /// The answer did not normalize to the task's answer form.
    pub unparseable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub usage: TokenUsage,
    pub latency_ms: f64,
}

/// Identifies one cell of a benchmark grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLabel {
    pub task: TaskKind,
    pub size: usize,
    pub scheme: String,
    /// Ablation mask, `111111` for the full scheme.
    pub ablation: String,
    pub rounding: Rounding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    #[serde(flatten)]
    pub label: RunLabel,
    pub n_samples: usize,
    pub n_correct: usize,
    pub n_unparseable: usize,
    pub n_errors: usize,
    pub accuracy: f64,
    pub usage: TokenUsage,
    pub samples: Vec<SampleRecord>,
}

/// Exact-match scoring; samples are reported in seed order.
pub fn score(label: RunLabel, outcomes: Vec<SampleOutcome>) -> Result<BenchResult, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::EmptyRun);
    }
    let task = label.task;
    let mut samples: Vec<SampleRecord> = outcomes
        .into_iter()
        .map(|o| {
            let normalized = o.answer.as_deref().map(|a| normalize(task, a));
            let unparseable = matches!(normalized, Some(Err(_)));
            let correct = matches!(&normalized, Some(Ok(a)) if *a == o.truth);
            SampleRecord {
                seed: o.seed,
                answer: o.answer,
                ground_truth: o.truth.to_string(),
                correct,
                unparseable,
                error: o.error,
                usage: o.usage,
                latency_ms: o.latency_ms,
            }
        })
        .collect();
    samples.sort_by_key(|s| s.seed);
    let n_samples = samples.len();
    let n_correct = samples.iter().filter(|s| s.correct).count();
    Ok(BenchResult {
        label,
        n_samples,
        n_correct,
        n_unparseable: samples.iter().filter(|s| s.unparseable).count(),
        n_errors: samples.iter().filter(|s| s.error.is_some()).count(),
        accuracy: n_correct as f64 / n_samples as f64,
        usage: samples.iter().map(|s| s.usage).sum(),
        samples,
    })
}

/// Dollar prices per 1,000 tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub input_per_1k: f64,
    pub output_per_1k: f64,
}

impl PriceTable {
    pub fn new(input_per_1k: f64, output_per_1k: f64) -> Result<Self, MetricsError> {
        for p in [input_per_1k, output_per_1k] {
            if p.is_nan() || p < 0.0 {
                return Err(MetricsError::NegativePrice(p));
            }
        }
        Ok(Self { input_per_1k, output_per_1k })
    }
}

pub fn estimate_cost(usage: &TokenUsage, prices: &PriceTable) -> f64 {
    usage.prompt_tokens as f64 * prices.input_per_1k / 1000.0
        + usage.completion_tokens as f64 * prices.output_per_1k / 1000.0
}

/// Human labor split between constant and task-specific prompt text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskKind>,
    pub constant_chars: usize,
    pub task_specific_chars: usize,
    pub constant_tokens: u64,
    pub task_specific_tokens: u64,
    /// Token counts above come from the offline estimator.
    pub tokens_estimated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_cost: Option<f64>,
}

impl CostReport {
    pub fn with_usage(mut self, usage: TokenUsage, prices: Option<&PriceTable>) -> Self {
        self.estimated_cost = prices.map(|p| estimate_cost(&usage, p));
        self.usage = Some(usage);
        self
    }
}

/// Characters are Unicode scalar values.
pub fn count_prompt_cost(parts: &PromptParts) -> CostReport {
    let constant = extraction_instructions() + &translation_instructions();
    CostReport {
        task: None,
        constant_chars: constant.chars().count(),
        task_specific_chars: parts.context.chars().count() + parts.example.chars().count(),
        constant_tokens: estimate_tokens(&constant),
        task_specific_tokens: estimate_tokens(&parts.context) + estimate_tokens(&parts.example),
        tokens_estimated: true,
        usage: None,
        estimated_cost: None,
    }
}

pub fn task_prompt_cost(task: TaskKind) -> CostReport {
    CostReport { task: Some(task), ..count_prompt_cost(&task.prompt_parts()) }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub results: Vec<BenchResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub costs: Vec<CostReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<PriceTable>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per result, columns padded to align.
    pub fn to_table(&self) -> String {
        let header = ["task", "size", "scheme", "ablation", "correct", "accuracy", "errors", "tokens", "cost"];
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.results {
            let cost =
                self.prices.map(|p| format!("${:.4}", estimate_cost(&r.usage, &p))).unwrap_or_else(|| "-".into());
            rows.push(vec![
                r.label.task.to_string(),
                r.label.size.to_string(),
                r.label.scheme.clone(),
                r.label.ablation.clone(),
                format!("{}/{}", r.n_correct, r.n_samples),
                format!("{:.1}%", r.accuracy * 100.0),
                r.n_errors.to_string(),
                r.usage.total().to_string(),
                cost,
            ]);
        }
        let widths: Vec<usize> =
            (0..header.len()).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in rows {
            let cells: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).expect("writing to a String");
        }
        out
    }

    /// Accuracy grid: one row per scheme and ablation mask, one column per task and size.
    pub fn to_csv(&self) -> Result<String, MetricsError> {
        let mut columns: Vec<(TaskKind, usize)> = self.results.iter().map(|r| (r.label.task, r.label.size)).collect();
        columns.sort();
        columns.dedup();
        let mut grid: BTreeMap<(String, String), BTreeMap<(TaskKind, usize), f64>> = BTreeMap::new();
        for r in &self.results {
            grid.entry((r.label.scheme.clone(), r.label.ablation.clone()))
                .or_default()
                .insert((r.label.task, r.label.size), r.accuracy);
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["scheme".to_string(), "ablation".to_string()];
        header.extend(columns.iter().map(|(t, s)| format!("{t}-{s}")));
        writer.write_record(&header)?;
        for ((scheme, ablation), cells) in &grid {
            let mut row = vec![scheme.clone(), ablation.clone()];
            row.extend(columns.iter().map(|c| cells.get(c).map(|a| format!("{a:.4}")).unwrap_or_default()));
            writer.write_record(&row)?;
        }
        let bytes = writer.into_inner().map_err(|e| MetricsError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}
