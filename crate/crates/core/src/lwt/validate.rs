use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{LwtScript, PlaceholderSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationErrorKind {
    /// `{(k)}` inside instruction `n` with `k > n`.
    ForwardReference,
    /// `{(n)}` inside instruction `n`.
    SelfReference,
    UndefinedNamedInput,
}

impl fmt::Display for ValidationErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ForwardReference => "ForwardReference",
            Self::SelfReference => "SelfReference",
            Self::UndefinedNamedInput => "UndefinedNamedInput",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationError {
    pub index: u32,
    pub kind: ValidationErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    /// The output is never referenced and the instruction is not the last one.
    UnusedOutput,
    /// Numbering does not start at 0.
    NonZeroStart,
    /// A backward reference to an index no instruction carries, e.g. the
    /// elided `...` lines of an abbreviated example.
    DanglingReference,
    /// A source line the parser skipped.
    SkippedLine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationWarning {
    pub index: Option<u32>,
    pub kind: WarningKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<ValidationError>,
    pub warnings: Vec<ValidationWarning>,
}

impl ValidationReport {
    /// No errors: every reference points backwards and every named input is bound.
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn summary(&self) -> String {
        format!("{} errors, {} warnings", self.errors.len(), self.warnings.len())
    }
}

/// Checks reference direction and named-input bindings.
pub fn validate_script<S: AsRef<str>>(script: &LwtScript, bindings: &[S]) -> ValidationReport {
    let bound: HashSet<&str> = bindings.iter().map(|s| s.as_ref()).collect();
    let defined: BTreeSet<u32> = script.instructions.iter().map(|i| i.index).collect();
    let mut referenced = BTreeSet::new();
    let mut report = ValidationReport::default();

    for skipped in &script.skipped {
        report.warnings.push(ValidationWarning {
            index: None,
            kind: WarningKind::SkippedLine,
            message: format!("line {} skipped ({}): {}", skipped.line, skipped.reason, excerpt(&skipped.text)),
        });
    }
    if let Some(first) = script.instructions.first() {
        if first.index != 0 {
            report.warnings.push(ValidationWarning {
                index: Some(first.index),
                kind: WarningKind::NonZeroStart,
                message: format!("numbering starts at ({}) instead of (0)", first.index),
            });
        }
    }

    for instr in &script.instructions {
        let n = instr.index;
        for placeholder in instr.refs() {
            match &placeholder.source {
                PlaceholderSource::Numbered(k) if *k == n => report.errors.push(ValidationError {
                    index: n,
                    kind: ValidationErrorKind::SelfReference,
                    message: format!("({n}) reads its own output via {placeholder}"),
                }),
                PlaceholderSource::Numbered(k) if *k > n => report.errors.push(ValidationError {
                    index: n,
                    kind: ValidationErrorKind::ForwardReference,
                    message: format!("({n}) reads {placeholder}, which runs later"),
                }),
                PlaceholderSource::Numbered(k) => {
                    referenced.insert(*k);
                    if !defined.contains(k) {
                        report.warnings.push(ValidationWarning {
                            index: Some(n),
                            kind: WarningKind::DanglingReference,
                            message: format!("({n}) reads {placeholder}, but no instruction ({k}) exists"),
                        });
                    }
                }
                PlaceholderSource::Named(name) if !bound.contains(name.as_str()) => {
                    report.errors.push(ValidationError {
                        index: n,
                        kind: ValidationErrorKind::UndefinedNamedInput,
                        message: format!("({n}) reads {placeholder}, but `{name}` is not bound"),
                    })
                }
                PlaceholderSource::Named(_) => {}
            }
        }
    }

    let last = script.last().map(|i| i.index);
    for instr in &script.instructions {
        if Some(instr.index) != last && !referenced.contains(&instr.index) {
            report.warnings.push(ValidationWarning {
                index: Some(instr.index),
                kind: WarningKind::UnusedOutput,
                message: format!("output of ({}) is never used", instr.index),
            });
        }
    }
    report
}

fn excerpt(text: &str) -> String {
    const MAX: usize = 60;
    if text.chars().count() <= MAX {
        text.to_string()
    } else {
        let cut: String = text.chars().take(MAX).collect();
        format!("{cut}...")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lwt::parse_script;

    #[test]
    fn forward_reference_is_an_error() {
        let script = parse_script("(0)=LLM(\"a\")\n(3)=LLM(\"b {(5)}\")\n(5)=LLM(\"c {(3)}\")").unwrap();
        let report = validate_script(&script, &["input"]);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].index, 3);
        assert_eq!(report.errors[0].kind, ValidationErrorKind::ForwardReference);
    }

    #[test]
    fn self_reference_is_an_error() {
        let script = parse_script("(0)=LLM(\"a {(0)}\")").unwrap();
        let report = validate_script(&script, &[] as &[&str]);
        assert_eq!(report.errors[0].kind, ValidationErrorKind::SelfReference);
    }

    #[test]
    fn unbound_named_input() {
        let script = parse_script("(0)=LLM(\"Find {(Set1)}[0]\")").unwrap();
        let report = validate_script(&script, &["input"]);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].kind, ValidationErrorKind::UndefinedNamedInput);
        assert!(validate_script(&script, &["Set1"]).is_ok());
    }

    #[test]
    fn warnings_for_unused_start_and_dangling() {
        let script = parse_script("(1)=LLM(\"a\")\n(2)=LLM(\"b\")\n(4)=LLM(\"c {(3)}\")").unwrap();
        let report = validate_script(&script, &[] as &[&str]);
        assert!(report.is_ok());
        let kinds: Vec<_> = report.warnings.iter().map(|w| (w.index, w.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (Some(1), WarningKind::NonZeroStart),
                (Some(4), WarningKind::DanglingReference),
                (Some(1), WarningKind::UnusedOutput),
                (Some(2), WarningKind::UnusedOutput),
            ]
        );
    }
}
