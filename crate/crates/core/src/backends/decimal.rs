//! Exact base-10 numbers for the oracle backend.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{Signed, Zero};

/// `mantissa / 10^scale`.
#[derive(Debug, Clone)]
pub struct Decimal {
    mantissa: BigInt,
    scale: u32,
}

fn pow10(exp: u32) -> BigInt {
    num_traits::pow(BigInt::from(10), exp as usize)
}

/// `num / den` rounded to an integer, ties away from zero. `den` must be non-zero.
fn div_round_half_away(num: &BigInt, den: &BigInt) -> BigInt {
    let negative = (num.sign() == Sign::Minus) != (den.sign() == Sign::Minus);
    let (q, r) = num.abs().div_rem(&den.abs());
    let q = if r * 2u32 >= den.abs() { q + 1u32 } else { q };
    if negative {
        -q
    } else {
        q
    }
}

impl Decimal {
    pub fn from_int(value: impl Into<BigInt>) -> Self {
        Self { mantissa: value.into(), scale: 0 }
    }

    fn aligned(&self, other: &Self) -> (BigInt, BigInt, u32) {
        let scale = self.scale.max(other.scale);
        (&self.mantissa * pow10(scale - self.scale), &other.mantissa * pow10(scale - other.scale), scale)
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b, scale) = self.aligned(other);
        Self { mantissa: a + b, scale }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let (a, b, scale) = self.aligned(other);
        Self { mantissa: a - b, scale }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { mantissa: &self.mantissa * &other.mantissa, scale: self.scale + other.scale }
    }

    /// Quotient rounded to `places` decimals; `None` on division by zero.
    pub fn div_rounded(&self, other: &Self, places: u32) -> Option<Self> {
        if other.mantissa.is_zero() {
            return None;
        }
        // self/other = (a * 10^bs) / (b * 10^as)
        let num = &self.mantissa * pow10(other.scale + places);
        let den = &other.mantissa * pow10(self.scale);
        Some(Self { mantissa: div_round_half_away(&num, &den), scale: places })
    }

    /// Rounds to at most `places` decimals, ties away from zero.
    pub fn round(&self, places: u32) -> Self {
        if self.scale <= places {
            return self.clone();
        }
        let mantissa = div_round_half_away(&self.mantissa, &pow10(self.scale - places));
        Self { mantissa, scale: places }
    }

    pub fn is_integer(&self) -> bool {
        self.normalized().scale == 0
    }

    /// Integer part rounded toward negative infinity.
    pub fn floor(&self) -> BigInt {
        self.mantissa.div_floor(&pow10(self.scale))
    }

    fn normalized(&self) -> Self {
        let mut m = self.mantissa.clone();
        let mut scale = self.scale;
        let ten = BigInt::from(10);
        while scale > 0 && (&m % &ten).is_zero() {
            m /= &ten;
            scale -= 1;
        }
        Self { mantissa: m, scale }
    }
}

impl PartialEq for Decimal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Decimal {}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDecimalError;

impl FromStr for Decimal {
    type Err = ParseDecimalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        let digits_ok = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
        if int.is_empty() || !digits_ok(int) || !digits_ok(frac) || (body.contains('.') && frac.is_empty()) {
            return Err(ParseDecimalError);
        }
        let mut mantissa: BigInt = format!("{int}{frac}").parse().map_err(|_| ParseDecimalError)?;
        if negative {
            mantissa = -mantissa;
        }
        Ok(Self { mantissa, scale: frac.len() as u32 })
    }
}

/// Shortest form: integral values have no decimal point, trailing zeros dropped.
impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.normalized();
        if n.scale == 0 {
            return write!(f, "{}", n.mantissa);
        }
        let divisor = pow10(n.scale);
        let abs = n.mantissa.abs();
        let (int, frac) = abs.div_rem(&divisor);
        let sign = if n.mantissa.is_negative() { "-" } else { "" };
        write!(f, "{sign}{int}.{:0>width$}", frac.to_string(), width = n.scale as usize)
    }
}
