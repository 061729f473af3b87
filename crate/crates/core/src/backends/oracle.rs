//! Deterministic interpreter for the elementary prompt patterns.
//!
//! Handlers are tried in a fixed order and the first match wins. Prompts are
//! whitespace-collapsed before matching; keywords are case-sensitive.

use std::sync::LazyLock;

use num_bigint::BigInt;
use regex::Regex;

use super::{excerpt, Backend, BackendError, Completion, Decimal};
use crate::runtime::parse_list;

/// Offline stand-in for a model that answers elementary prompts exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleBackend;

impl OracleBackend {
    pub fn new() -> Self {
        Self
    }

    /// Answers one prompt, or reports that it is outside the elementary set.
    pub fn answer(&self, prompt: &str) -> Result<String, BackendError> {
        let collapsed = prompt.split_whitespace().collect::<Vec<_>>().join(" ");
        for handler in HANDLERS {
            if let Some(result) = handler(&collapsed) {
                return result;
            }
        }
        Err(BackendError::UnrecognizedPattern(excerpt(prompt)))
    }
}

impl Backend for OracleBackend {
    fn infer(&self, prompt: &str) -> Result<Completion, BackendError> {
        self.answer(prompt).map(|text| Completion::estimated(prompt, text))
    }

    fn label(&self) -> String {
        "oracle".to_string()
    }
}

type Handler = fn(&str) -> Option<Result<String, BackendError>>;

const HANDLERS: &[Handler] = &[
    binary_op,
    split_numbers,
    split_plus,
    calculate,
    init_array,
    increment,
    to_english,
    expand_counts,
    combine,
    intersection,
    to_integer,
];

macro_rules! regex {
    ($re:literal) => {{
        static RE: LazyLock<Regex> = LazyLock::new(|| Regex::new($re).expect("valid oracle regex"));
        &*RE
    }};
}

fn malformed(prompt: &str) -> Option<Result<String, BackendError>> {
    Some(Err(BackendError::UnrecognizedPattern(excerpt(prompt))))
}

fn binary_op(p: &str) -> Option<Result<String, BackendError>> {
    let re = regex!(
        r"^(Add|Minus|Subtraction|Multiply|Divide) ?\( ?(-?\d+(?:\.\d+)?) ?, ?(-?\d+(?:\.\d+)?) ?\)\. Only output number\. If contains floating point, round to two decimal places\.$"
    );
    let caps = re.captures(p)?;
    let a: Decimal = caps[2].parse().ok()?;
    let b: Decimal = caps[3].parse().ok()?;
    let value = match &caps[1] {
        "Add" => a.add(&b),
        "Minus" | "Subtraction" => a.sub(&b),
        "Multiply" => a.mul(&b),
        _ => match a.div_rounded(&b, 2) {
            Some(q) => q,
            None => return Some(Err(BackendError::DivisionByZero)),
        },
    };
    Some(Ok(value.round(2).to_string()))
}

fn split_numbers(p: &str) -> Option<Result<String, BackendError>> {
    let caps = regex!(r"^Given (.+?), Split the numbers without operators\. Only output list\.$").captures(p)?;
    let operands = regex!(r"\d+(?:\.\d+)?");
    let items: Vec<&str> = operands.find_iter(&caps[1]).map(|m| m.as_str()).collect();
    Some(Ok(format!("[{}]", items.join(", "))))
}

fn split_plus(p: &str) -> Option<Result<String, BackendError>> {
    let caps = regex!(r#"^Split "(.*)" by \+ and output in string format in an array\.$"#).captures(p)?;
    let parts: Vec<String> = caps[1].split('+').map(|s| format!("'{}'", s.trim())).collect();
    Some(Ok(format!("[{}]", parts.join(", "))))
}

fn calculate(p: &str) -> Option<Result<String, BackendError>> {
    if let Some(caps) = regex!(r"^Calculate (-?\d+) divide 10, Only output integer\.$").captures(p) {
        let x: BigInt = caps[1].parse().ok()?;
        return Some(Ok(num_integer::Integer::div_floor(&x, &BigInt::from(10)).to_string()));
    }
    let caps = regex!(r"^Calculate (-?\d+(?: ?\+ ?-?\d+)+)\. Only output result\.$").captures(p)?;
    let mut sum = BigInt::from(0);
    for term in caps[1].split('+') {
        sum += term.trim().parse::<BigInt>().ok()?;
    }
    Some(Ok(sum.to_string()))
}

fn init_array(p: &str) -> Option<Result<String, BackendError>> {
    let caps = regex!(r"^Initialize an array of size (\d+) to zero\.$").captures(p)?;
    let n: usize = caps[1].parse().ok()?;
    Some(Ok(render_numbers(&vec![BigInt::from(0); n])))
}

fn increment(p: &str) -> Option<Result<String, BackendError>> {
    let caps = regex!(
        r"^Increment the count at index (-?\d+) (?:\(start from 0\) )?in (\[[^\]]*\])(?: \(index start from 0\))?\. Only output updated array\.$"
    )
    .captures(p)?;
    let Some(mut counts) = numbers(&caps[2]) else { return malformed(p) };
    let index: i64 = caps[1].parse().ok()?;
    let len = counts.len() as i64;
    let resolved = if index < 0 { len + index } else { index };
    if resolved < 0 || resolved >= len {
        return malformed(p);
    }
    counts[resolved as usize] += 1;
    Some(Ok(render_numbers(&counts)))
}

fn to_english(p: &str) -> Option<Result<String, BackendError>> {
    let caps = regex!(r"^Convert (\[.*\]) in English\. Output an array\.$").captures(p)?;
    let mut words = Vec::new();
    for item in parse_list(&caps[1]) {
        match item.parse::<u32>().ok().and_then(number_to_words) {
            Some(w) => words.push(format!("'{w}'")),
            None => return malformed(p),
        }
    }
    Some(Ok(format!("[{}]", words.join(", "))))
}

fn expand_counts(p: &str) -> Option<Result<String, BackendError>> {
    let caps = regex!(r"^The array should contain (.+)\. Output in array format\.$").captures(p)?;
    let part = regex!(r"^(.+) (-?\d+)s$");
    let mut out = Vec::new();
    for clause in caps[1].split(',') {
        let Some(c) = part.captures(clause.trim()) else { return malformed(p) };
        let count_text = c[1].trim().trim_matches(|ch| ch == '\'' || ch == '"');
        let Some(count) = count_text.parse::<u32>().ok().or_else(|| words_to_number(count_text)) else {
            return malformed(p);
        };
        out.extend(std::iter::repeat_n(c[2].to_string(), count as usize));
    }
    Some(Ok(format!("[{}]", out.join(", "))))
}

fn combine(p: &str) -> Option<Result<String, BackendError>> {
    if let Some(caps) = regex!(r"^Combine (\[.*\]) and (\[.*\]) in ascending order\. Only output array\.$").captures(p)
    {
        let (Some(mut a), Some(b)) = (decimals(&caps[1]), decimals(&caps[2])) else { return malformed(p) };
        a.extend(b);
        a.sort();
        let items: Vec<String> = a.iter().map(Decimal::to_string).collect();
        return Some(Ok(format!("[{}]", items.join(", "))));
    }
    let caps = regex!(r"^Combine (.*) in one array\.(?: ?\(? ?Repeated is allowed\.\)?)?$").captures(p)?;
    let mut items = Vec::new();
    for arg in parse_list(&caps[1]) {
        if arg.starts_with('[') {
            items.extend(parse_list(&arg));
        } else if !arg.is_empty() {
            items.push(arg);
        }
    }
    Some(Ok(render_items(&items)))
}

fn intersection(p: &str) -> Option<Result<String, BackendError>> {
    let caps = regex!(r"^Find the intersection for \[([^\]]*)\] and (\[.*\])\. Output \[\] if mutually exclusive\.$")
        .captures(p)?;
    let x = caps[1].trim().trim_matches(|ch| ch == '\'' || ch == '"');
    let member = parse_list(&caps[2]).iter().any(|e| same_element(x, e));
    Some(Ok(if member { format!("[{x}]") } else { "[]".to_string() }))
}

fn to_integer(p: &str) -> Option<Result<String, BackendError>> {
    let caps = regex!(r"^Convert into an integer: ?(.*)$").captures(p)?;
    let digits: String = caps[1].chars().filter(|c| !c.is_whitespace()).collect();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return malformed(p);
    }
    let stripped = digits.trim_start_matches('0');
    Some(Ok(if stripped.is_empty() { "0".to_string() } else { stripped.to_string() }))
}

fn same_element(a: &str, b: &str) -> bool {
    match (a.parse::<Decimal>(), b.parse::<Decimal>()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn numbers(list: &str) -> Option<Vec<BigInt>> {
    parse_list(list).iter().map(|s| s.parse().ok()).collect()
}

fn decimals(list: &str) -> Option<Vec<Decimal>> {
    parse_list(list).iter().map(|s| s.parse().ok()).collect()
}

fn render_numbers(values: &[BigInt]) -> String {
    let items: Vec<String> = values.iter().map(BigInt::to_string).collect();
    format!("[{}]", items.join(", "))
}

/// Numbers stay bare, anything else is single-quoted.
fn render_items(items: &[String]) -> String {
    let num = regex!(r"^-?\d+(?:\.\d+)?$");
    let rendered: Vec<String> =
        items.iter().map(|s| if num.is_match(s) { s.clone() } else { format!("'{s}'") }).collect();
    format!("[{}]", rendered.join(", "))
}

const ONES: [&str; 20] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
];
const TENS: [&str; 10] = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];

/// English words for 0..=999, e.g. "one hundred twenty-three".
pub fn number_to_words(n: u32) -> Option<String> {
    match n {
        0..=19 => Some(ONES[n as usize].to_string()),
        20..=99 => {
            let tens = TENS[(n / 10) as usize];
            Some(if n.is_multiple_of(10) { tens.to_string() } else { format!("{tens}-{}", ONES[(n % 10) as usize]) })
        }
        100..=999 => {
            let head = format!("{} hundred", ONES[(n / 100) as usize]);
            Some(if n.is_multiple_of(100) { head } else { format!("{head} {}", number_to_words(n % 100)?) })
        }
        _ => None,
    }
}

/// Inverse of [`number_to_words`]; case-insensitive, accepts "and" and spaces for hyphens.
pub fn words_to_number(text: &str) -> Option<u32> {
    let lower = text.to_lowercase().replace('-', " ");
    let mut total = 0u32;
    let mut current = 0u32;
    let mut seen = false;
    for word in lower.split_whitespace().filter(|w| *w != "and") {
        seen = true;
        if let Some(v) = ONES.iter().position(|w| *w == word) {
            current += v as u32;
        } else if let Some(v) = TENS.iter().position(|w| !w.is_empty() && *w == word) {
            current += 10 * v as u32;
        } else if word == "hundred" {
            current = current.max(1) * 100;
        } else {
            return None;
        }
    }
    total += current;
    seen.then_some(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::{Signed, Zero};

    const TAIL: &str = "Only output number. If contains floating point, round to two decimal places.";

    fn ask(p: &str) -> String {
        OracleBackend::new().answer(p).unwrap()
    }

    #[test]
    fn documented_examples() {
        assert_eq!(ask(&format!("Divide(1, 3). {TAIL}")), "0.33");
        assert_eq!(
            ask("Increment the count at index 3 in [0, 0, 0, 0, 0, 0, 0, 0, 0, 0] (index start from 0). Only output updated array."),
            "[0, 0, 0, 1, 0, 0, 0, 0, 0, 0]"
        );
        assert_eq!(ask("Find the intersection for [60] and [31, 11, 4, 63]. Output [] if mutually exclusive."), "[]");
        assert_eq!(ask("Find the intersection for [11] and [31, 11, 4, 63]. Output [] if mutually exclusive."), "[11]");
    }

    #[test]
    fn arithmetic_rendering() {
        assert_eq!(ask(&format!("Add(0.33, 0.67). {TAIL}")), "1");
        assert_eq!(ask(&format!("Minus(3, 8). {TAIL}")), "-5");
        assert_eq!(ask(&format!("Subtraction(3, 8). {TAIL}")), "-5");
        assert_eq!(ask(&format!("Multiply(2.67, 3). {TAIL}")), "8.01");
        assert_eq!(ask(&format!("Multiply(0.33, 0.33). {TAIL}")), "0.11");
        assert_eq!(ask(&format!("Divide(5, 2). {TAIL}")), "2.5");
        assert_eq!(OracleBackend::new().answer(&format!("Divide(5, 0). {TAIL}")), Err(BackendError::DivisionByZero));
    }

    #[test]
    fn whitespace_tolerant() {
        assert_eq!(ask(&format!("  Add( 3 ,\n 4 ).   {TAIL}\n")), "7");
    }

    #[test]
    fn split_patterns() {
        assert_eq!(
            ask("Given 5*5/5*4+8-8+3*9, Split the numbers without operators. Only output list."),
            "[5, 5, 5, 4, 8, 8, 3, 9]"
        );
        assert_eq!(
            ask(r#"Split "57247728+67594862" by + and output in string format in an array."#),
            "['57247728', '67594862']"
        );
    }

    #[test]
    fn large_digit_steps() {
        assert_eq!(ask("Calculate 8+2. Only output result."), "10");
        assert_eq!(ask("Calculate 1+7+9. Only output result."), "17");
        assert_eq!(ask("Calculate 17 divide 10, Only output integer."), "1");
        assert_eq!(ask("Calculate 7 divide 10, Only output integer."), "0");
        assert_eq!(ask("Convert into an integer: 0124842590"), "124842590");
        assert_eq!(ask("Convert into an integer: 000"), "0");
    }

    #[test]
    fn sorting_steps() {
        assert_eq!(ask("Initialize an array of size 3 to zero."), "[0, 0, 0]");
        assert_eq!(
            ask("Increment the count at index 2 (start from 0) in [0, 1, 0]. Only output updated array."),
            "[0, 1, 1]"
        );
        assert_eq!(ask("Convert [2, 0, 1, 13] in English. Output an array."), "['two', 'zero', 'one', 'thirteen']");
        assert_eq!(
            ask("The array should contain two 0s, zero 1s, one 2s, three 3s, zero 4s. Output in array format."),
            "[0, 0, 2, 3, 3, 3]"
        );
        assert_eq!(ask("The array should contain zero 5s, zero 6s. Output in array format."), "[]");
        assert_eq!(ask("Combine [0, 0, 2] and [5, 7] in ascending order. Only output array."), "[0, 0, 2, 5, 7]");
        assert_eq!(ask("Combine [] and [1] in ascending order. Only output array."), "[1]");
    }

    #[test]
    fn combine_in_one_array() {
        assert_eq!(ask("Combine [3], [], [12] in one array."), "[3, 12]");
        assert_eq!(ask("Combine [], [] in one array."), "[]");
        assert_eq!(
            ask("Combine ['France'], [], ['Peru', 'France'] in one array. Repeated is allowed."),
            "['France', 'Peru', 'France']"
        );
        assert_eq!(ask("Combine [1], [2] in one array.( Repeated is allowed.)"), "[1, 2]");
    }

    #[test]
    fn unrecognized() {
        let err = OracleBackend::new().answer("Check the following review is Positive or Negative: great food.");
        assert!(matches!(err, Err(BackendError::UnrecognizedPattern(_))));
        assert!(OracleBackend::new().answer("add(1, 2). Only output number.").is_err());
    }

    #[test]
    fn words_round_trip() {
        for n in 0..1000 {
            let w = number_to_words(n).unwrap();
            assert_eq!(words_to_number(&w), Some(n), "{w}");
        }
        assert_eq!(number_to_words(1000), None);
        assert_eq!(words_to_number("Twenty One"), Some(21));
        assert_eq!(words_to_number("banana"), None);
    }

    fn reference(op: char, a: i64, b: i64) -> Option<String> {
        let (a, b) = (BigRational::from_integer(a.into()), BigRational::from_integer(b.into()));
        let exact = match op {
            '+' => a + b,
            '-' => a - b,
            '*' => a * b,
            _ if b.is_zero() => return None,
            _ => a / b,
        };
        let scaled = exact * BigRational::from_integer(100.into());
        // half away from zero
        let half = BigRational::new(1.into(), 2.into());
        let cents = if scaled.is_negative() { -(-scaled + half).floor() } else { (scaled + half).floor() }.to_integer();
        let value: Decimal =
            format!("{}{}.{:02}", if cents.is_negative() { "-" } else { "" }, cents.abs() / 100, cents.abs() % 100)
                .parse()
                .unwrap();
        Some(value.to_string())
    }

    #[test]
    fn exhaustive_single_digit_grid() {
        for (op, name) in [('+', "Add"), ('-', "Minus"), ('*', "Multiply"), ('/', "Divide")] {
            for a in 0..10 {
                for b in 0..10 {
                    let got = OracleBackend::new().answer(&format!("{name}({a}, {b}). {TAIL}"));
                    match reference(op, a, b) {
                        Some(want) => assert_eq!(got.unwrap(), want, "{a} {op} {b}"),
                        None => assert_eq!(got, Err(BackendError::DivisionByZero)),
                    }
                }
            }
        }
    }
}
