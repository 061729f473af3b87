//! Ground truth and answer normalization.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{Operator, Payload, Sentiment, TaskError, TaskKind};
use crate::runtime::parse_list;

/// When arithmetic results are rounded to two decimals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// After every elementary operation, as the LWT scripts do.
    #[default]
    PerStep,
    /// Exact evaluation, rounded once at the end.
    FinalOnly,
}

/// A canonical answer that compares by value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Number(BigRational),
    Numbers(Vec<BigRational>),
    /// Lower-cased terms in order.
    Terms(Vec<String>),
}

/// Decimal rendering when the value has at most two decimals, `p/q` otherwise.
pub fn render_rational(value: &BigRational) -> String {
    if value.is_integer() {
        return value.to_integer().to_string();
    }
    let hundred = BigRational::from_integer(BigInt::from(100));
    let cents = value * &hundred;
    if !cents.is_integer() {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let cents = cents.to_integer();
    let sign = if cents.is_negative() { "-" } else { "" };
    let abs = cents.abs();
    let hundred = BigInt::from(100);
    let frac = format!("{:02}", &abs % &hundred).trim_end_matches('0').to_string();
    format!("{sign}{}.{frac}", &abs / &hundred)
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Number(v) => f.write_str(&render_rational(v)),
            Answer::Numbers(vs) => {
                let items: Vec<String> = vs.iter().map(render_rational).collect();
                write!(f, "[{}]", items.join(", "))
            }
            Answer::Terms(ts) => {
                let items: Vec<String> = ts.iter().map(|t| format!("'{t}'")).collect();
                write!(f, "[{}]", items.join(", "))
            }
        }
    }
}

/// Rounds to two decimals, ties away from zero.
pub fn round2(value: &BigRational) -> BigRational {
    let hundred = BigRational::from_integer(BigInt::from(100));
    (value * &hundred).round() / hundred
}

fn apply(op: Operator, a: &BigRational, b: &BigRational) -> Result<BigRational, TaskError> {
    Ok(match op {
        Operator::Add => a + b,
        Operator::Sub => a - b,
        Operator::Mul => a * b,
        Operator::Div if b.is_zero() => return Err(TaskError::DivisionByZero),
        Operator::Div => a / b,
    })
}

/// Multiplication and division first, then left to right.
pub fn evaluate_arithmetic(
    operands: &[u32],
    operators: &[Operator],
    rounding: Rounding,
) -> Result<BigRational, TaskError> {
    assert_eq!(operands.len(), operators.len() + 1, "one operator between each pair of operands");
    let step = |v: BigRational| if rounding == Rounding::PerStep { round2(&v) } else { v };
    let value = |x: u32| BigRational::from_integer(BigInt::from(x));

    let mut terms: Vec<(Operator, BigRational)> = Vec::new();
    let mut sign = Operator::Add;
    let mut term = value(operands[0]);
    for (op, x) in operators.iter().zip(&operands[1..]) {
        if op.is_multiplicative() {
            term = step(apply(*op, &term, &value(*x))?);
        } else {
            terms.push((sign, term));
            sign = *op;
            term = value(*x);
        }
    }
    terms.push((sign, term));

    let mut iter = terms.into_iter();
    let (_, mut acc) = iter.next().expect("at least one term");
    for (op, t) in iter {
        acc = step(apply(op, &acc, &t)?);
    }
    Ok(round2(&acc))
}

/// Counting sort over single digits; an independent check on the comparison sort.
pub fn counting_sort(values: &[u8]) -> Vec<u8> {
    let mut counts = [0usize; 10];
    for &v in values {
        counts[v as usize] += 1;
    }
    counts.iter().enumerate().flat_map(|(d, &c)| std::iter::repeat_n(d as u8, c)).collect()
}

fn int(v: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(v.into())
}

pub(super) fn ground_truth(payload: &Payload, rounding: Rounding) -> Answer {
    match payload {
        Payload::Sorting { values } => {
            let mut sorted = values.clone();
            sorted.sort_unstable();
            Answer::Numbers(sorted.into_iter().map(int).collect())
        }
        Payload::SetIntersection { set1, set2 } => {
            let second: HashSet<u32> = set2.iter().copied().collect();
            Answer::Numbers(set1.iter().filter(|v| second.contains(v)).map(|v| int(*v)).collect())
        }
        Payload::Arithmetic { operands, operators } => Answer::Number(
            evaluate_arithmetic(operands, operators, rounding).expect("generated expressions never divide by zero"),
        ),
        Payload::LargeDigit { left, right } => {
            let a: BigInt = left.parse().expect("digits");
            let b: BigInt = right.parse().expect("digits");
            Answer::Number(int(a + b))
        }
        Payload::Yelp { reviews } => {
            Answer::Number(int(reviews.iter().filter(|r| r.label == Sentiment::Positive).count() as u64))
        }
        Payload::Keyword { mentions, .. } => Answer::Terms(mentions.iter().map(|m| m.to_lowercase()).collect()),
    }
}

fn strip_decoration(raw: &str) -> &str {
    raw.trim().trim_matches(|c| c == '\'' || c == '"' || c == '[' || c == ']').trim().trim_end_matches('.')
}

fn parse_number(raw: &str) -> Option<BigRational> {
    let text = strip_decoration(raw);
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    if !digits(whole) || (body.contains('.') && !digits(frac)) {
        return None;
    }
    let mantissa: BigInt = format!("{whole}{frac}").parse().ok()?;
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    let value = BigRational::new(mantissa, scale);
    Some(if negative { -value } else { value })
}

/// Parses a raw final answer into the task's canonical form.
pub fn normalize(task: TaskKind, raw: &str) -> Result<Answer, TaskError> {
    let fail = || TaskError::Unparseable { task, raw: raw.to_string() };
    match task {
        TaskKind::Arithmetic | TaskKind::LargeDigit | TaskKind::Yelp => {
            parse_number(raw).map(Answer::Number).ok_or_else(fail)
        }
        TaskKind::Sorting | TaskKind::SetIntersection => {
            let items = parse_list(raw);
            if items.len() == 1 && items[0].is_empty() {
                return Ok(Answer::Numbers(Vec::new()));
            }
            items.iter().map(|s| parse_number(s)).collect::<Option<Vec<_>>>().map(Answer::Numbers).ok_or_else(fail)
        }
        TaskKind::Keyword => {
            let items = parse_list(raw);
            let terms: Vec<String> =
                items.iter().map(|s| strip_decoration(s).to_lowercase()).filter(|s| !s.is_empty()).collect();
            Ok(Answer::Terms(terms))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Operator::*;

    fn n(v: i64) -> BigRational {
        int(v)
    }

    #[test]
    fn appendix_expressions() {
        // 5*5/5*4+8-8+3*9
        let v = evaluate_arithmetic(&[5, 5, 5, 4, 8, 8, 3, 9], &[Mul, Div, Mul, Add, Sub, Add, Mul], Rounding::PerStep)
            .unwrap();
        assert_eq!(v, n(47));
        // 1+5+7+8+2-8-7*7
        let v = evaluate_arithmetic(&[1, 5, 7, 8, 2, 8, 7, 7], &[Add, Add, Add, Add, Sub, Sub, Mul], Rounding::PerStep)
            .unwrap();
        assert_eq!(v, n(-34));
    }

    #[test]
    fn rounding_modes_differ() {
        // 1/3*3: per step 0.33*3 = 0.99, exact 1
        let per = evaluate_arithmetic(&[1, 3, 3], &[Div, Mul], Rounding::PerStep).unwrap();
        let fin = evaluate_arithmetic(&[1, 3, 3], &[Div, Mul], Rounding::FinalOnly).unwrap();
        assert_eq!(render_rational(&per), "0.99");
        assert_eq!(render_rational(&fin), "1");
        assert_eq!(evaluate_arithmetic(&[1, 0], &[Div], Rounding::PerStep), Err(TaskError::DivisionByZero));
    }

    #[test]
    fn round2_half_away() {
        assert_eq!(render_rational(&round2(&BigRational::new(1.into(), 8.into()))), "0.13");
        assert_eq!(render_rational(&round2(&BigRational::new((-1).into(), 8.into()))), "-0.13");
        assert_eq!(render_rational(&BigRational::new(1.into(), 3.into())), "1/3");
    }

    #[test]
    fn sorting_and_set_truth() {
        assert_eq!(
            ground_truth(&Payload::Sorting { values: vec![2, 1, 1] }, Rounding::PerStep),
            Answer::Numbers(vec![n(1), n(1), n(2)])
        );
        let set = Payload::SetIntersection { set1: vec![5, 3, 9, 1], set2: vec![1, 9, 4] };
        assert_eq!(ground_truth(&set, Rounding::PerStep), Answer::Numbers(vec![n(9), n(1)]));
        assert_eq!(counting_sort(&[3, 0, 3, 1]), vec![0, 1, 3, 3]);
    }

    #[test]
    fn large_digit_truth() {
        let p = Payload::LargeDigit { left: "57247728".into(), right: "67594862".into() };
        assert_eq!(ground_truth(&p, Rounding::PerStep).to_string(), "124842590");
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize(TaskKind::Sorting, "  [1, 1, 2] ").unwrap(), Answer::Numbers(vec![n(1), n(1), n(2)]));
        assert_eq!(normalize(TaskKind::Arithmetic, "47.00").unwrap(), Answer::Number(n(47)));
        assert_eq!(
            normalize(TaskKind::Arithmetic, "-0.5").unwrap(),
            Answer::Number(BigRational::new((-1).into(), 2.into()))
        );
        assert!(matches!(normalize(TaskKind::Arithmetic, "forty-seven"), Err(TaskError::Unparseable { .. })));
        assert_eq!(normalize(TaskKind::SetIntersection, "[]").unwrap(), Answer::Numbers(vec![]));
        assert_eq!(
            normalize(TaskKind::Keyword, "['France', \"peru\"]").unwrap(),
            Answer::Terms(vec!["france".into(), "peru".into()])
        );
        assert!(normalize(TaskKind::Sorting, "[1, x]").is_err());
    }

    #[test]
    fn ground_truth_rendering_is_a_fixed_point() {
        for task in TaskKind::ALL {
            for &size in task.sizes() {
                for seed in 0..5 {
                    let inst = super::super::generate(task, size, seed).unwrap();
                    let truth = inst.ground_truth();
                    assert_eq!(normalize(task, &truth.to_string()).unwrap(), truth, "{task} {size} {seed}");
                }
            }
        }
    }
}
