//! Reference LWT scripts built only from elementary instructions.
//!
//! They follow the shape of the bundled examples, expanded to a concrete size.

use std::fmt::Write;

use super::Operator;

const NUMBER_TAIL: &str = "Only output number. If contains floating point, round to two decimal places.";

fn line(out: &mut String, index: usize, body: &str) {
    writeln!(out, "({index})=LLM(\"{body}\")").expect("writing to a String");
}

fn joined_refs(range: std::ops::Range<usize>) -> String {
    range.map(|k| format!("{{({k})}}")).collect::<Vec<_>>().join(", ")
}

/// Counting sort over digits 0-9 for an input list of `n` digits.
pub fn sorting_script(n: usize) -> String {
    let mut s = String::new();
    line(&mut s, 0, "Initialize an array of size 10 to zero.");
    for i in 1..=n {
        line(
            &mut s,
            i,
            &format!(
                "Increment the count at index {{(input)}}[{}] in {{({})}} (index start from 0). Only output updated array.",
                i - 1,
                i - 1
            ),
        );
    }
    line(&mut s, n + 1, &format!("Convert {{({n})}} in English. Output an array."));
    for (offset, digits) in [(2, 0..5), (3, 5..10)] {
        let clauses: Vec<String> = digits.map(|d| format!("{{({})}}[{d}] {d}s", n + 1)).collect();
        line(&mut s, n + offset, &format!("The array should contain {}. Output in array format.", clauses.join(", ")));
    }
    line(&mut s, n + 4, &format!("Combine {{({})}} and {{({})}} in ascending order. Only output array.", n + 2, n + 3));
    s
}

/// Membership test for each element of `Set1`, then one combine.
pub fn set_script(n: usize) -> String {
    let mut s = String::new();
    for i in 0..n {
        line(
            &mut s,
            i,
            &format!("Find the intersection for [{{(Set1)}}[{i}]] and {{(Set2)}}. Output [] if mutually exclusive."),
        );
    }
    line(&mut s, n, &format!("Combine {} in one array.", joined_refs(0..n)));
    s
}

fn fold(s: &mut String, acc: &mut Option<String>, sign: Operator, term: &str, next: &mut usize) {
    match acc {
        None => *acc = Some(term.to_string()),
        Some(a) => {
            let name = if sign == Operator::Add { "Add" } else { "Minus" };
            line(s, *next, &format!("{name}({a}, {term}). {NUMBER_TAIL}"));
            *acc = Some(format!("{{({next})}}"));
            *next += 1;
        }
    }
}

/// Left to right: each multiplicative run is reduced as it is reached, then
/// folded into the running sum.
pub fn arithmetic_script(operators: &[Operator]) -> String {
    let mut s = String::new();
    line(&mut s, 0, "Given {(input)}, Split the numbers without operators. Only output list.");
    let mut next = 1;
    let mut acc: Option<String> = None;
    let mut sign = Operator::Add;
    let mut term = "{(0)}[0]".to_string();

    for (i, op) in operators.iter().enumerate() {
        let operand = format!("{{(0)}}[{}]", i + 1);
        if op.is_multiplicative() {
            let name = if *op == Operator::Mul { "Multiply" } else { "Divide" };
            line(&mut s, next, &format!("{name}({term}, {operand}). {NUMBER_TAIL}"));
            term = format!("{{({next})}}");
            next += 1;
        } else {
            fold(&mut s, &mut acc, sign, &term, &mut next);
            sign = *op;
            term = operand;
        }
    }
    fold(&mut s, &mut acc, sign, &term, &mut next);
    s
}

/// Digit-by-digit addition with carries for two `n`-digit operands.
pub fn large_digit_script(n: usize) -> String {
    let mut s = String::new();
    line(&mut s, 0, "Split \"{(input)}\" by + and output in string format in an array.");
    for j in 0..n {
        let pos = n - 1 - j;
        let sum = 2 * j + 1;
        let carry_in = if j == 0 { String::new() } else { format!("{{({})}}+", 2 * j) };
        line(&mut s, sum, &format!("Calculate {carry_in}{{(0)}}[0][{pos}]+{{(0)}}[1][{pos}]. Only output result."));
        line(&mut s, sum + 1, &format!("Calculate {{({sum})}} divide 10, Only output integer."));
    }
    let mut digits = format!("{{({})}}", 2 * n);
    for j in (0..n).rev() {
        write!(digits, "{{({})}}[-1]", 2 * j + 1).expect("writing to a String");
    }
    line(&mut s, 2 * n + 1, &format!("Convert into an integer: {digits}"));
    s
}

/// One sentiment check per review, then a count.
pub fn yelp_script(n: usize) -> String {
    let mut s = String::new();
    for i in 0..n {
        line(&mut s, i, &format!("Check the following review is Positive or Negative: {{(input)}}[{i}]."));
    }
    line(&mut s, n, &format!("[{}], output the number of Positive.", joined_refs(0..n)));
    s
}

/// Sentence split, one extraction per sentence, then a combine.
pub fn keyword_script(sentences: usize) -> String {
    let mut s = String::new();
    line(&mut s, 0, "Split the following article into sentences: '{(input)}'. Output an array.");
    for i in 0..sentences {
        line(
            &mut s,
            i + 1,
            &format!(
                "Extract all country names (no continents) in the order of their appearance from the following sentence (repeated is allowed): \"{{(0)}}[{i}]\"  Output [] if not exist any country."
            ),
        );
    }
    line(
        &mut s,
        sentences + 1,
        &format!("Combine {} in one array. Repeated is allowed.", joined_refs(1..sentences + 1)),
    );
    s
}
