#![allow(dead_code)]

use knot_core::runtime::Bindings;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OPS: [&str; 3] = ["Add", "Minus", "Multiply"];
const SUFFIX: &str = "Only output number. If contains floating point, round to two decimal places.";

/// A random script the elementary-op oracle answers completely: one split of
/// the input expression, then binary operations whose operands are literals,
/// indexed split items or earlier results.
pub fn random_oracle_script(seed: u64) -> (String, Bindings) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=6usize);
    let numbers: Vec<String> = (0..k).map(|_| rng.random_range(1..=9u32).to_string()).collect();
    let input = numbers.join("+");
    let len = rng.random_range(2..=14u32);

    let mut lines =
        vec!["(0)=LLM(\"Given {(input)}, Split the numbers without operators. Only output list.\")".to_string()];
    for i in 1..len {
        let operand = |rng: &mut ChaCha8Rng| match rng.random_range(0..3) {
            0 => rng.random_range(0..=9u32).to_string(),
            1 => {
                let j = rng.random_range(-(k as i64)..k as i64);
                format!("{{(0)}}[{j}]")
            }
            _ if i > 1 => format!("{{({})}}", rng.random_range(1..i)),
            _ => format!("{{(0)}}[{}]", rng.random_range(0..k)),
        };
        let a = operand(&mut rng);
        let b = operand(&mut rng);
        let op = OPS[rng.random_range(0..OPS.len())];
        lines.push(format!("({i})=LLM(\"{op}({a}, {b}). {SUFFIX}\")"));
    }
    (lines.join("\n") + "\n", Bindings::single("input", input))
}

/// Rational with exact decimal parsing, for comparing numeric answers.
pub fn parse_decimal(text: &str) -> Option<num_rational::BigRational> {
    use num_bigint::BigInt;
    let t = text.trim();
    let (neg, digits) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mantissa: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = BigInt::from(10).pow(frac.len() as u32);
    let value = num_rational::BigRational::new(mantissa, scale);
    Some(if neg { -value } else { value })
}
