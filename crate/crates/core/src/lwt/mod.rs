//! LWT (LLM Workflow Template) scripts.
//!
//! A script is a list of numbered instructions, one per line:
//!
//! ```text
//! (0)=LLM("Given {(input)}, Split the numbers without operators. Only output list.")
//! (1)=LLM("Multiply({(0)}[0], {(0)}[1]). Only output number.")
//! ```
//!
//! `{(n)}` receives the full output of instruction `n`, `{(n)}[m]` selects the
//! `m`th item of that output, and `{(name)}` reads a named input binding.
//! Index operators chain (`{(0)}[0][15]`) and may be negative (`{(1)}[-1]`).

mod dot;
mod parse;
mod validate;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use dot::to_dot;
pub use parse::{
    parse_placeholder, parse_script, parse_script_bytes, parse_script_with, DuplicatePolicy, ParseError, ParseOptions,
};
pub use validate::{
    validate_script, ValidationError, ValidationErrorKind, ValidationReport, ValidationWarning, WarningKind,
};

/// Where a placeholder reads its value from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaceholderSource {
    /// Output of the instruction labeled `(k)`.
    Numbered(u32),
    /// A named input binding such as `input` or `Set1`.
    Named(String),
}

impl fmt::Display for PlaceholderSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlaceholderSource::Numbered(k) => write!(f, "{k}"),
            PlaceholderSource::Named(name) => f.write_str(name),
        }
    }
}

/// One input field: a source plus zero or more index operators.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placeholder {
    pub source: PlaceholderSource,
    pub index_path: Vec<i64>,
}

impl Placeholder {
    pub fn numbered(index: u32, index_path: impl Into<Vec<i64>>) -> Self {
        Self { source: PlaceholderSource::Numbered(index), index_path: index_path.into() }
    }

    pub fn named(name: impl Into<String>, index_path: impl Into<Vec<i64>>) -> Self {
        Self { source: PlaceholderSource::Named(name.into()), index_path: index_path.into() }
    }

    /// True when the whole referenced output is substituted.
    pub fn is_full(&self) -> bool {
        self.index_path.is_empty()
    }

    /// The `[m][n]` suffix, empty for full message passing.
    pub fn path_label(&self) -> String {
        self.index_path.iter().map(|m| format!("[{m}]")).collect()
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{({})}}{}", self.source, self.path_label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Literal(String),
    Ref(Placeholder),
}

/// A single `(n)=LLM("...")` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LwtInstruction {
    pub index: u32,
    pub segments: Vec<Segment>,
}

impl LwtInstruction {
    /// The instruction body with placeholders written back in source form.
    pub fn body(&self) -> String {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Literal(text) => out.push_str(text),
                Segment::Ref(p) => out.push_str(&p.to_string()),
            }
        }
        out
    }

    pub fn refs(&self) -> impl Iterator<Item = &Placeholder> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Ref(p) => Some(p),
            Segment::Literal(_) => None,
        })
    }

    /// Indices of the numbered outputs this instruction reads, in reference order.
    pub fn numbered_refs(&self) -> impl Iterator<Item = u32> + '_ {
        self.refs().filter_map(|p| match p.source {
            PlaceholderSource::Numbered(k) => Some(k),
            PlaceholderSource::Named(_) => None,
        })
    }

    /// Canonical line form: `(n)=LLM("body")`.
    pub fn to_line(&self) -> String {
        format!("({})=LLM(\"{}\")", self.index, self.body())
    }
}

/// A line the parser did not treat as an instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedLine {
    /// 1-based line number in the source text.
    pub line: usize,
    pub text: String,
    pub reason: String,
}

/// Byte-exact layout of the text a script was parsed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SourceLayout {
    lines: Vec<LayoutLine>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum LayoutLine {
    Instruction { position: usize, head: String, tail: String },
    Verbatim(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LwtScript {
    pub instructions: Vec<LwtInstruction>,
    pub named_inputs: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedLine>,
    #[serde(skip)]
    layout: Option<SourceLayout>,
}

impl LwtScript {
    /// Builds a script from instructions, computing `named_inputs`.
    pub fn new(instructions: Vec<LwtInstruction>) -> Self {
        let named_inputs = collect_named(&instructions);
        Self { instructions, named_inputs, skipped: Vec::new(), layout: None }
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn last(&self) -> Option<&LwtInstruction> {
        self.instructions.last()
    }

    /// Position of the instruction labeled `index`.
    pub fn position_of(&self, index: u32) -> Option<usize> {
        self.instructions.binary_search_by_key(&index, |i| i.index).ok()
    }

    /// Canonical text: one `(n)=LLM("...")` line per instruction, newline-terminated.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for instr in &self.instructions {
            out.push_str(&instr.to_line());
            out.push('\n');
        }
        out
    }

    /// Reproduces the parsed source byte-for-byte, skipped lines included.
    /// Scripts not produced by the parser fall back to [`render`](Self::render).
    pub fn to_source(&self) -> String {
        let Some(layout) = &self.layout else {
            return self.render();
        };
        let mut parts = Vec::with_capacity(layout.lines.len());
        for line in &layout.lines {
            match line {
                LayoutLine::Verbatim(text) => parts.push(text.clone()),
                LayoutLine::Instruction { position, head, tail } => {
                    parts.push(format!("{head}{}{tail}", self.instructions[*position].body()));
                }
            }
        }
        parts.join("\n")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }
}

pub(crate) fn collect_named(instructions: &[LwtInstruction]) -> BTreeSet<String> {
    instructions
        .iter()
        .flat_map(|i| i.refs())
        .filter_map(|p| match &p.source {
            PlaceholderSource::Named(name) => Some(name.clone()),
            PlaceholderSource::Numbered(_) => None,
        })
        .collect()
}
