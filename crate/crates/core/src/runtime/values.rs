//! Turning backend text into lists and indexing into it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum IndexError {
    /// `position` is the offset of the failing operator within the index path.
    #[error("index [{index}] out of range at path position {position} (length {length})")]
    OutOfRange { position: usize, index: i64, length: usize },
}

/// Splits backend output into list elements.
///
/// A bracketed value `[a, 'b', [c, d]]` splits at top-level commas, with each
/// element trimmed and stripped of one layer of matching quotes. Unbracketed
/// text containing a comma splits at its commas. Anything else is a
/// one-element list holding the trimmed text.
pub fn parse_list(text: &str) -> Vec<String> {
    let trimmed = text.trim();
    if let Some(interior) = bracket_interior(trimmed) {
        if interior.trim().is_empty() {
            return Vec::new();
        }
        return split_top_level(interior).into_iter().map(clean_element).collect();
    }
    if trimmed.contains(',') {
        return split_top_level(trimmed).into_iter().map(clean_element).collect();
    }
    vec![trimmed.to_string()]
}

/// True when `text` indexes as a list rather than as characters.
pub fn is_list(text: &str) -> bool {
    let trimmed = text.trim();
    bracket_interior(trimmed).is_some() || parse_list(trimmed).len() > 1
}

/// Applies index operators left to right with Python semantics.
///
/// At each step a list-shaped value is indexed by element, any other value by
/// Unicode scalar. Negative indices count from the end.
pub fn index_value(value: &str, path: &[i64]) -> Result<String, IndexError> {
    let mut current = value.trim().to_string();
    for (position, &index) in path.iter().enumerate() {
        let items: Vec<String> =
            if is_list(&current) { parse_list(&current) } else { current.chars().map(String::from).collect() };
        let length = items.len();
        let resolved = if index < 0 { length as i64 + index } else { index };
        if resolved < 0 || resolved >= length as i64 {
            return Err(IndexError::OutOfRange { position, index, length });
        }
        current = items[resolved as usize].trim().to_string();
    }
    Ok(current)
}

/// Returns the text between `[` and its matching `]` when they enclose the whole value.
fn bracket_interior(text: &str) -> Option<&str> {
    if !text.starts_with('[') || !text.ends_with(']') || text.len() < 2 {
        return None;
    }
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    let mut at_element_start = true;
    for (offset, c) in text.char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '[' => {
                depth += 1;
                at_element_start = true;
                continue;
            }
            ']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return (offset == text.len() - 1).then(|| &text[1..offset]);
                }
            }
            ',' => {
                at_element_start = true;
                continue;
            }
            '\'' | '"' if at_element_start => quote = Some(c),
            c if c.is_whitespace() => continue,
            _ => {}
        }
        at_element_start = false;
    }
    None
}

/// Splits at commas outside brackets and quoted elements.
///
/// A quote only opens a quoted element at the start of an element, so
/// apostrophes inside bare words do not swallow the rest of the list.
fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    let mut at_element_start = true;
    let mut start = 0;
    for (offset, c) in text.char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&text[start..offset]);
                start = offset + 1;
                at_element_start = true;
                continue;
            }
            '\'' | '"' if at_element_start && depth == 0 => quote = Some(c),
            c if c.is_whitespace() => continue,
            _ => {}
        }
        at_element_start = false;
    }
    parts.push(&text[start..]);
    parts
}

fn clean_element(raw: &str) -> String {
    let t = raw.trim();
    for q in ['\'', '"'] {
        if t.len() >= 2 && t.starts_with(q) && t.ends_with(q) {
            return t[1..t.len() - 1].to_string();
        }
    }
    t.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn flat_list() {
        assert_eq!(parse_list("[0, 0, 0, 1]"), list(&["0", "0", "0", "1"]));
    }

    #[test]
    fn quoted_strings() {
        assert_eq!(parse_list("['57247728', '67594862']"), list(&["57247728", "67594862"]));
        assert_eq!(parse_list(r#"["a, b", 'c']"#), list(&["a, b", "c"]));
    }

    #[test]
    fn non_list_fallback() {
        assert_eq!(parse_list("hello"), list(&["hello"]));
        assert_eq!(parse_list("  15\n"), list(&["15"]));
        assert!(!is_list("15"));
    }

    #[test]
    fn bare_commas_split() {
        assert_eq!(parse_list("a, b,c"), list(&["a", "b", "c"]));
    }

    #[test]
    fn nested_and_empty() {
        assert_eq!(parse_list("[[1, 2], [], 3]"), list(&["[1, 2]", "[]", "3"]));
        assert_eq!(parse_list("[]"), Vec::<String>::new());
        assert_eq!(parse_list("[ ]"), Vec::<String>::new());
        assert!(is_list("[]"));
    }

    #[test]
    fn two_lists_are_not_one_bracketed_value() {
        assert_eq!(parse_list("[1], [2]"), list(&["[1]", "[2]"]));
        assert_eq!(parse_list("[1] and [2]"), list(&["[1] and [2]"]));
    }

    #[test]
    fn apostrophes_inside_words() {
        assert_eq!(parse_list("[don't, it's fine]"), list(&["don't", "it's fine"]));
        assert_eq!(parse_list(r#"["I can't", "ok"]"#), list(&["I can't", "ok"]));
    }

    #[test]
    fn escaped_quotes() {
        assert_eq!(parse_list(r#"["say \"hi\", then", "x"]"#), list(&[r#"say \"hi\", then"#, "x"]));
    }

    #[test]
    fn indexing() {
        assert_eq!(index_value("[1, 2, 3]", &[1]).unwrap(), "2");
        assert_eq!(index_value("[1, 2, 3]", &[-1]).unwrap(), "3");
        assert_eq!(index_value("['57247728','67594862']", &[0, 1]).unwrap(), "7");
        assert_eq!(index_value("15", &[-1]).unwrap(), "5");
        assert_eq!(index_value("[1, 2, 3]", &[]).unwrap(), "[1, 2, 3]");
    }

    #[test]
    fn out_of_range() {
        assert_eq!(index_value("[1, 2, 3]", &[3]), Err(IndexError::OutOfRange { position: 0, index: 3, length: 3 }));
        assert_eq!(index_value("[12, 3]", &[1, -2]), Err(IndexError::OutOfRange { position: 1, index: -2, length: 1 }));
        assert!(index_value("[]", &[0]).is_err());
    }
}
