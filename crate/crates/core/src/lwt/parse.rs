use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::{
    collect_named, LayoutLine, LwtInstruction, LwtScript, Placeholder, PlaceholderSource, Segment, SkippedLine,
    SourceLayout,
};

static INSTRUCTION_HEAD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"^[ \t]*\(([0-9]{1,9})\)[ \t]*=[ \t]*LLM\(""#).unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: malformed placeholder: {reason}")]
    MalformedPlaceholder { line: usize, column: usize, reason: String },
    #[error("line {line}: duplicate instruction index ({index})")]
    DuplicateIndex { line: usize, index: u32 },
    #[error("line {line}: instruction index ({index}) follows ({previous})")]
    NonMonotoneIndex { line: usize, index: u32, previous: u32 },
    #[error("no `(k)=LLM(\"...\")` lines found ({skipped} lines skipped)")]
    EmptyScript { skipped: usize },
    #[error("input is not valid UTF-8 (at byte {0})")]
    InvalidUtf8(usize),
}

/// What to do when an instruction index repeats or goes backwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DuplicatePolicy {
    /// Fail with `DuplicateIndex` / `NonMonotoneIndex`.
    #[default]
    Reject,
    /// Keep the first increasing block and skip every later instruction line.
    /// Used for model output that contains several candidate scripts.
    FirstBlock,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub duplicates: DuplicatePolicy,
}

pub fn parse_script(text: &str) -> Result<LwtScript, ParseError> {
    parse_script_with(text, ParseOptions::default())
}

pub fn parse_script_bytes(bytes: &[u8]) -> Result<LwtScript, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::InvalidUtf8(e.valid_up_to()))?;
    parse_script(text)
}

pub fn parse_script_with(text: &str, options: ParseOptions) -> Result<LwtScript, ParseError> {
    let raw_lines: Vec<&str> = text.split('\n').collect();
    let last = raw_lines.len() - 1;

    let mut instructions: Vec<LwtInstruction> = Vec::new();
    let mut skipped = Vec::new();
    let mut layout = Vec::with_capacity(raw_lines.len());
    let mut block_closed = false;

    for (i, raw) in raw_lines.iter().enumerate() {
        let line_no = i + 1;
        let skip = |reason: &str, skipped: &mut Vec<SkippedLine>, layout: &mut Vec<LayoutLine>| {
            // the empty piece after a trailing newline is not a line
            if !(i == last && raw.is_empty()) {
                skipped.push(SkippedLine { line: line_no, text: raw.to_string(), reason: reason.to_string() });
            }
            layout.push(LayoutLine::Verbatim(raw.to_string()));
        };

        let Some((index, head_len, body_end)) = match_instruction(raw) else {
            skip("not an instruction line", &mut skipped, &mut layout);
            continue;
        };
        if block_closed {
            skip("outside the first numbering block", &mut skipped, &mut layout);
            continue;
        }
        if let Some(previous) = instructions.last().map(|p| p.index) {
            if index <= previous {
                match options.duplicates {
                    DuplicatePolicy::FirstBlock => {
                        block_closed = true;
                        skip("outside the first numbering block", &mut skipped, &mut layout);
                        continue;
                    }
                    DuplicatePolicy::Reject if instructions.iter().any(|p| p.index == index) => {
                        return Err(ParseError::DuplicateIndex { line: line_no, index });
                    }
                    DuplicatePolicy::Reject => {
                        return Err(ParseError::NonMonotoneIndex { line: line_no, index, previous });
                    }
                }
            }
        }

        let body = &raw[head_len..body_end];
        let segments = parse_body(body).map_err(|(offset, reason)| ParseError::MalformedPlaceholder {
            line: line_no,
            column: raw[..head_len + offset].chars().count() + 1,
            reason,
        })?;
        layout.push(LayoutLine::Instruction {
            position: instructions.len(),
            head: raw[..head_len].to_string(),
            tail: raw[body_end..].to_string(),
        });
        instructions.push(LwtInstruction { index, segments });
    }

    if instructions.is_empty() {
        return Err(ParseError::EmptyScript { skipped: skipped.len() });
    }
    let named_inputs = collect_named(&instructions);
    Ok(LwtScript { instructions, named_inputs, skipped, layout: Some(SourceLayout { lines: layout }) })
}

/// Returns `(index, body start, body end)` for a line shaped like `(k)=LLM("...")`.
/// The body runs from the first `LLM("` to the last `")` on the line.
fn match_instruction(line: &str) -> Option<(u32, usize, usize)> {
    let caps = INSTRUCTION_HEAD.captures(line)?;
    let head_len = caps.get(0)?.end();
    let index = caps[1].parse().ok()?;
    let body_len = line[head_len..].rfind("\")")?;
    Some((index, head_len, head_len + body_len))
}

/// Splits an instruction body into literal and placeholder segments.
/// Errors carry the byte offset of the offending `{(`.
fn parse_body(body: &str) -> Result<Vec<Segment>, (usize, String)> {
    let mut segments = Vec::new();
    let mut literal_start = 0;
    let mut cursor = 0;

    while let Some(found) = body[cursor..].find("{(") {
        let start = cursor + found;
        let inner_start = start + 2;
        let Some(close) = body[inner_start..].find(")}") else {
            return Err((start, "`{(` without a closing `)}`".to_string()));
        };
        let inner = &body[inner_start..inner_start + close];
        let source = parse_source(inner)
            .ok_or_else(|| (start, format!("`{{({inner})}}` is neither an instruction number nor an input name")))?;

        let mut end = inner_start + close + 2;
        let mut index_path = Vec::new();
        while let Some((value, consumed)) = parse_index_operator(&body[end..]) {
            index_path.push(value);
            end += consumed;
        }

        if literal_start < start {
            segments.push(Segment::Literal(body[literal_start..start].to_string()));
        }
        segments.push(Segment::Ref(Placeholder { source, index_path }));
        literal_start = end;
        cursor = end;
    }
    if literal_start < body.len() {
        segments.push(Segment::Literal(body[literal_start..].to_string()));
    }
    Ok(segments)
}

fn parse_source(inner: &str) -> Option<PlaceholderSource> {
    let first = inner.chars().next()?;
    if first.is_ascii_digit() {
        if !is_canonical_unsigned(inner) {
            return None;
        }
        inner.parse().ok().map(PlaceholderSource::Numbered)
    } else if first.is_ascii_alphabetic() && inner.chars().all(|c| c.is_ascii_alphanumeric()) {
        Some(PlaceholderSource::Named(inner.to_string()))
    } else {
        None
    }
}

/// Parses a leading `[m]` operator. Only canonical integers count, so that
/// re-serializing a placeholder reproduces its source text.
fn parse_index_operator(rest: &str) -> Option<(i64, usize)> {
    let inner = rest.strip_prefix('[')?;
    let close = inner.find(']')?;
    let token = &inner[..close];
    let digits = token.strip_prefix('-').unwrap_or(token);
    if !is_canonical_unsigned(digits) || token == "-0" {
        return None;
    }
    let value = token.parse().ok()?;
    Some((value, close + 2))
}

fn is_canonical_unsigned(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) && (s == "0" || !s.starts_with('0'))
}

/// Parses one placeholder token such as `{(0)}[2][-1]`; the whole string must be consumed.
pub fn parse_placeholder(text: &str) -> Option<Placeholder> {
    match parse_body(text).ok()?.as_slice() {
        [Segment::Ref(p)] => Some(p.clone()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divide_line_from_the_appendix() {
        let script = parse_script(r#"(2)=LLM("Divide({(1)}, {(0)}[2]). Only output number.")"#).unwrap();
        assert_eq!(script.len(), 1);
        let instr = &script.instructions[0];
        assert_eq!(instr.index, 2);
        let refs: Vec<_> = instr.refs().cloned().collect();
        assert_eq!(refs, vec![Placeholder::numbered(1, []), Placeholder::numbered(0, [2])]);
    }

    #[test]
    fn literal_only_instruction() {
        let script = parse_script(r#"(0)=LLM("hello")"#).unwrap();
        assert_eq!(script.instructions[0].segments, vec![Segment::Literal("hello".into())]);
        assert!(script.named_inputs.is_empty());
    }

    #[test]
    fn chained_and_negative_indices() {
        let script = parse_script(r#"(3)=LLM("Calculate {(2)}+{(0)}[0][14]+{(1)}[-1].")"#).unwrap();
        let refs: Vec<_> = script.instructions[0].refs().cloned().collect();
        assert_eq!(
            refs,
            vec![Placeholder::numbered(2, []), Placeholder::numbered(0, [0, 14]), Placeholder::numbered(1, [-1])]
        );
    }

    #[test]
    fn named_sources_are_collected() {
        let script = parse_script("(0)=LLM(\"Find [{(Set1)}[0]] and {(Set2)}.\")\n").unwrap();
        assert_eq!(script.named_inputs.iter().collect::<Vec<_>>(), ["Set1", "Set2"]);
        // `[{(Set1)}[0]]`: the outer brackets stay literal
        assert_eq!(script.instructions[0].segments[0], Segment::Literal("Find [".into()));
    }

    #[test]
    fn non_index_brackets_stay_literal() {
        let script = parse_script(r#"(1)=LLM("{(0)}[length-1] and {(0)}[01] and {(0)}[-0]")"#).unwrap();
        let refs: Vec<_> = script.instructions[0].refs().collect();
        assert!(refs.iter().all(|p| p.is_full()));
        assert_eq!(script.instructions[0].body(), "{(0)}[length-1] and {(0)}[01] and {(0)}[-0]");
    }

    #[test]
    fn body_spans_first_llm_to_last_quote_paren() {
        let line = r#"(0)=LLM("Split "{(input)}" by + and output (")") trailing"#;
        let script = parse_script(line).unwrap();
        assert_eq!(script.instructions[0].body(), r#"Split "{(input)}" by + and output (")"#);
        assert_eq!(script.to_source(), line);
    }

    #[test]
    fn prose_and_fences_are_skipped() {
        let text = "Here is the script:\n```\n(0)=LLM(\"a\")\n(1)=LLM(\"b {(0)}\")\n```\n";
        let script = parse_script(text).unwrap();
        assert_eq!(script.len(), 2);
        assert_eq!(script.skipped.iter().map(|s| s.line).collect::<Vec<_>>(), [1, 2, 5]);
        assert_eq!(script.to_source(), text);
    }

    #[test]
    fn unterminated_placeholder() {
        let err = parse_script(r#"(0)=LLM("x {(0 y")"#).unwrap_err();
        assert!(matches!(err, ParseError::MalformedPlaceholder { line: 1, column: 12, .. }), "{err:?}");
    }

    #[test]
    fn arithmetic_in_placeholder_is_malformed() {
        let err = parse_script(r#"(5)=LLM("Calculate {(2*length-1)} divide 10")"#).unwrap_err();
        assert!(matches!(err, ParseError::MalformedPlaceholder { .. }));
    }

    #[test]
    fn duplicate_and_non_monotone() {
        let dup = parse_script("(0)=LLM(\"a\")\n(0)=LLM(\"b\")").unwrap_err();
        assert_eq!(dup, ParseError::DuplicateIndex { line: 2, index: 0 });
        let back = parse_script("(0)=LLM(\"a\")\n(2)=LLM(\"b\")\n(1)=LLM(\"c\")").unwrap_err();
        assert_eq!(back, ParseError::NonMonotoneIndex { line: 3, index: 1, previous: 2 });
    }

    #[test]
    fn first_block_policy_keeps_the_first_candidate() {
        let text = "(0)=LLM(\"a\")\n(1)=LLM(\"b\")\nAlternatively:\n(0)=LLM(\"c\")\n(1)=LLM(\"d\")";
        let options = ParseOptions { duplicates: DuplicatePolicy::FirstBlock };
        let script = parse_script_with(text, options).unwrap();
        assert_eq!(script.render(), "(0)=LLM(\"a\")\n(1)=LLM(\"b\")\n");
        assert_eq!(script.skipped.len(), 3);
        assert_eq!(script.to_source(), text);
    }

    #[test]
    fn empty_script() {
        assert_eq!(parse_script("").unwrap_err(), ParseError::EmptyScript { skipped: 0 });
        assert_eq!(
            parse_script("Step0: split the input\nStep1: add").unwrap_err(),
            ParseError::EmptyScript { skipped: 2 }
        );
    }

    #[test]
    fn invalid_utf8() {
        assert_eq!(parse_script_bytes(b"(0)=LLM(\"\xff\")").unwrap_err(), ParseError::InvalidUtf8(9));
    }

    #[test]
    fn placeholder_token() {
        assert_eq!(parse_placeholder("{(0)}[2][-1]"), Some(Placeholder::numbered(0, [2, -1])));
        assert_eq!(parse_placeholder("{(input)}"), Some(Placeholder::named("input", [])));
        assert_eq!(parse_placeholder("x{(0)}"), None);
        assert_eq!(parse_placeholder("{(0)}{(1)}"), None);
    }
}
