//! The six benchmark tasks: seeded generators, ground truth, answer
//! normalization, reference LWT scripts and the bundled prompt parts.

mod corpus;
mod scripts;
mod truth;

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::PromptParts;
use crate::runtime::Bindings;

pub use corpus::{
    classify_sentiment, countries, extract_countries, load_reviews, split_sentences, yelp_corpus, CorpusBackend,
    CorpusError, Review, Sentiment,
};
pub use scripts::{arithmetic_script, keyword_script, large_digit_script, set_script, sorting_script, yelp_script};
pub use truth::{counting_sort, evaluate_arithmetic, normalize, render_rational, round2, Answer, Rounding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Yelp,
    Keyword,
    Sorting,
    SetIntersection,
    Arithmetic,
    LargeDigit,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Yelp,
        TaskKind::Keyword,
        TaskKind::Sorting,
        TaskKind::SetIntersection,
        TaskKind::Arithmetic,
        TaskKind::LargeDigit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Yelp => "yelp",
            TaskKind::Keyword => "keyword",
            TaskKind::Sorting => "sorting",
            TaskKind::SetIntersection => "set_intersection",
            TaskKind::Arithmetic => "arithmetic",
            TaskKind::LargeDigit => "large_digit",
        }
    }

    /// Problem sizes the generator accepts.
    pub fn sizes(self) -> &'static [usize] {
        match self {
            TaskKind::Yelp => &[10],
            TaskKind::Keyword => &[14, 15, 16, 17, 18, 19, 20],
            TaskKind::Sorting => &[16, 32, 64],
            TaskKind::SetIntersection => &[32, 64, 128],
            TaskKind::Arithmetic => &[8, 16, 32],
            TaskKind::LargeDigit => &[8, 16, 32],
        }
    }

    pub fn context(self) -> &'static str {
        match self {
            TaskKind::Yelp => include_str!("../../assets/tasks/yelp/context.txt"),
            TaskKind::Keyword => include_str!("../../assets/tasks/keyword/context.txt"),
            TaskKind::Sorting => include_str!("../../assets/tasks/sorting/context.txt"),
            TaskKind::SetIntersection => include_str!("../../assets/tasks/set_intersection/context.txt"),
            TaskKind::Arithmetic => include_str!("../../assets/tasks/arithmetic/context.txt"),
            TaskKind::LargeDigit => include_str!("../../assets/tasks/large_digit/context.txt"),
        }
    }

    pub fn example(self) -> &'static str {
        match self {
            TaskKind::Yelp => include_str!("../../assets/tasks/yelp/example.lwt"),
            TaskKind::Keyword => include_str!("../../assets/tasks/keyword/example.lwt"),
            TaskKind::Sorting => include_str!("../../assets/tasks/sorting/example.lwt"),
            TaskKind::SetIntersection => include_str!("../../assets/tasks/set_intersection/example.lwt"),
            TaskKind::Arithmetic => include_str!("../../assets/tasks/arithmetic/example.lwt"),
            TaskKind::LargeDigit => include_str!("../../assets/tasks/large_digit/example.lwt"),
        }
    }

    /// Bundled solution plan used when stage 1 is answered from fixtures.
    pub fn fixture_plan(self) -> &'static str {
        match self {
            TaskKind::Yelp => include_str!("../../assets/fixtures/yelp/plan.txt"),
            TaskKind::Keyword => include_str!("../../assets/fixtures/keyword/plan.txt"),
            TaskKind::Sorting => include_str!("../../assets/fixtures/sorting/plan.txt"),
            TaskKind::SetIntersection => include_str!("../../assets/fixtures/set_intersection/plan.txt"),
            TaskKind::Arithmetic => include_str!("../../assets/fixtures/arithmetic/plan.txt"),
            TaskKind::LargeDigit => include_str!("../../assets/fixtures/large_digit/plan.txt"),
        }
    }

    /// Context description C and LWT example E.
    pub fn prompt_parts(self) -> PromptParts {
        PromptParts::new(self.context(), self.example())
    }

    /// Worked example for the chain-of-thought baseline, where one is bundled.
    pub fn cot_example(self) -> Option<&'static str> {
        match self {
            TaskKind::Arithmetic => Some(include_str!("../../assets/baselines/arithmetic_cot.txt")),
            _ => None,
        }
    }

    /// An input/output pair for the few-shot baseline, drawn from a seed no
    /// benchmark run uses.
    pub fn few_shot_example(self, size: usize) -> Result<String, TaskError> {
        let instance = generate(self, size, FEW_SHOT_SEED)?;
        Ok(format!("Input: {}\nOutput: {}\n", instance.query(), instance.ground_truth()))
    }

    /// Named inputs the task's scripts may reference.
    pub fn input_names(self) -> &'static [&'static str] {
        match self {
            TaskKind::SetIntersection => &["Set1", "Set2"],
            _ => &["input"],
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let kind = match key.as_str() {
            "yelp" => TaskKind::Yelp,
            "keyword" | "keyword_counting" => TaskKind::Keyword,
            "sorting" | "sort" => TaskKind::Sorting,
            "set_intersection" | "set" => TaskKind::SetIntersection,
            "arithmetic" => TaskKind::Arithmetic,
            "large_digit" | "large_digit_addition" => TaskKind::LargeDigit,
            _ => return Err(TaskError::UnknownTask(s.to_string())),
        };
        Ok(kind)
    }
}

const FEW_SHOT_SEED: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("unknown task `{0}` (expected one of yelp, keyword, sorting, set_intersection, arithmetic, large_digit)")]
    UnknownTask(String),
    #[error("{task} does not support size {size} (supported: {supported:?})")]
    UnsupportedSize { task: TaskKind, size: usize, supported: Vec<usize> },
    #[error("cannot parse {task} answer from {raw:?}")]
    Unparseable { task: TaskKind, raw: String },
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "/")]
    Div,
}

impl Operator {
    pub const ALL: [Operator; 4] = [Operator::Add, Operator::Sub, Operator::Mul, Operator::Div];

    pub fn symbol(self) -> char {
        match self {
            Operator::Add => '+',
            Operator::Sub => '-',
            Operator::Mul => '*',
            Operator::Div => '/',
        }
    }

    pub fn is_multiplicative(self) -> bool {
        matches!(self, Operator::Mul | Operator::Div)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Sorting { values: Vec<u8> },
    SetIntersection { set1: Vec<u32>, set2: Vec<u32> },
    Arithmetic { operands: Vec<u32>, operators: Vec<Operator> },
    LargeDigit { left: String, right: String },
    Yelp { reviews: Vec<Review> },
    Keyword { sentences: Vec<String>, mentions: Vec<String> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateOptions {
    /// Arithmetic operands from 10..=99 instead of 1..=9.
    pub two_digit_operands: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub task: TaskKind,
    pub size: usize,
    pub seed: u64,
    pub payload: Payload,
}

fn render_list<T: fmt::Display>(items: &[T]) -> String {
    let parts: Vec<String> = items.iter().map(T::to_string).collect();
    format!("[{}]", parts.join(", "))
}

impl TaskInstance {
    /// The task query q as shown to the model.
    pub fn query(&self) -> String {
        match &self.payload {
            Payload::Sorting { values } => render_list(values),
            Payload::SetIntersection { set1, set2 } => {
                format!("Set1: {}\nSet2: {}", render_list(set1), render_list(set2))
            }
            Payload::Arithmetic { .. } | Payload::LargeDigit { .. } | Payload::Yelp { .. } => {
                self.bindings().get("input").unwrap_or_default().to_string()
            }
            Payload::Keyword { sentences, .. } => sentences.join(" "),
        }
    }

    /// Named inputs for script execution.
    pub fn bindings(&self) -> Bindings {
        match &self.payload {
            Payload::Sorting { values } => Bindings::single("input", render_list(values)),
            Payload::SetIntersection { set1, set2 } => {
                [("Set1", render_list(set1)), ("Set2", render_list(set2))].into_iter().collect()
            }
            Payload::Arithmetic { operands, operators } => {
                let mut expr = operands[0].to_string();
                for (op, x) in operators.iter().zip(&operands[1..]) {
                    expr.push(op.symbol());
                    expr.push_str(&x.to_string());
                }
                Bindings::single("input", expr)
            }
            Payload::LargeDigit { left, right } => Bindings::single("input", format!("{left}+{right}")),
            Payload::Yelp { reviews } => {
                let quoted: Vec<String> = reviews.iter().map(|r| format!("\"{}\"", r.text)).collect();
                Bindings::single("input", format!("[{}]", quoted.join(", ")))
            }
            Payload::Keyword { sentences, .. } => Bindings::single("input", sentences.join(" ")),
        }
    }

    /// Exact answer, computed without any model. Arithmetic rounds every step.
    pub fn ground_truth(&self) -> Answer {
        self.ground_truth_with(Rounding::PerStep)
    }

    pub fn ground_truth_with(&self, rounding: Rounding) -> Answer {
        truth::ground_truth(&self.payload, rounding)
    }

    /// LWT script that solves this instance with elementary steps only.
    pub fn reference_script(&self) -> String {
        match &self.payload {
            Payload::Sorting { values } => sorting_script(values.len()),
            Payload::SetIntersection { set1, .. } => set_script(set1.len()),
            Payload::Arithmetic { operators, .. } => arithmetic_script(operators),
            Payload::LargeDigit { left, .. } => large_digit_script(left.len()),
            Payload::Yelp { reviews } => yelp_script(reviews.len()),
            Payload::Keyword { sentences, .. } => keyword_script(sentences.len()),
        }
    }

    /// `{task, size, seed, payload, ground_truth}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "task": self.task,
            "size": self.size,
            "seed": self.seed,
            "payload": self.payload,
            "ground_truth": self.ground_truth().to_string(),
        })
    }
}

pub fn generate(task: TaskKind, size: usize, seed: u64) -> Result<TaskInstance, TaskError> {
    generate_with(task, size, seed, GenerateOptions::default())
}

/// Deterministic in `(task, size, seed, options)`.
pub fn generate_with(
    task: TaskKind,
    size: usize,
    seed: u64,
    options: GenerateOptions,
) -> Result<TaskInstance, TaskError> {
    if !task.sizes().contains(&size) {
        return Err(TaskError::UnsupportedSize { task, size, supported: task.sizes().to_vec() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let payload = match task {
        TaskKind::Sorting => Payload::Sorting { values: (0..size).map(|_| rng.random_range(0..10u8)).collect() },
        TaskKind::SetIntersection => {
            let universe = 2 * size;
            let mut draw = || sample(&mut rng, universe, size).into_iter().map(|v| v as u32).collect::<Vec<_>>();
            let set1 = draw();
            let set2 = draw();
            Payload::SetIntersection { set1, set2 }
        }
        TaskKind::Arithmetic => {
            let range = if options.two_digit_operands { 10..=99u32 } else { 1..=9u32 };
            let operands: Vec<u32> = (0..size).map(|_| rng.random_range(range.clone())).collect();
            let operators = (1..size).map(|_| Operator::ALL[rng.random_range(0..4)]).collect();
            Payload::Arithmetic { operands, operators }
        }
        TaskKind::LargeDigit => {
            let mut number = || {
                let mut s = String::with_capacity(size);
                s.push(char::from(b'0' + rng.random_range(1..10u8)));
                for _ in 1..size {
                    s.push(char::from(b'0' + rng.random_range(0..10u8)));
                }
                s
            };
            let left = number();
            let right = number();
            Payload::LargeDigit { left, right }
        }
        TaskKind::Yelp => {
            let corpus = yelp_corpus();
            let reviews = sample(&mut rng, corpus.len(), size).into_iter().map(|i| corpus[i].clone()).collect();
            Payload::Yelp { reviews }
        }
        TaskKind::Keyword => corpus::generate_article(&mut rng, size),
    };
    Ok(TaskInstance { task, size, seed, payload })
}
