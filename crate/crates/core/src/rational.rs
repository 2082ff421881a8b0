//! Exact rational helpers shared by the parser, the verifier and the query writer.

use num::bigint::{BigInt, Sign};
use num::{BigRational, One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Parses an SMT-LIB numeral (`42`) or decimal (`3.125`) into an exact rational.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if text.contains('.') && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = num::pow(BigInt::from(10u32), frac_part.len());
    Some(Rational::new(numer, denom))
}

/// Exact rational value of a finite binary float.
pub fn from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

/// Parses the shortest round-trip decimal form of `x`, so `1e-3` becomes exactly `1/1000`.
pub fn from_f64_decimal(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let text = format!("{}", x.abs());
    let r = parse_decimal(&text)?;
    Some(if x < 0.0 { -r } else { r })
}

/// Nearest binary64 value. Large numerators and denominators are scaled down
/// before the division so the conversion never overflows to infinity spuriously.
pub fn to_f64(r: &Rational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            // Exact whenever both parts fit into 53 bits.
            if n.abs() < 9.007_199_254_740_992e15 && d < 9.007_199_254_740_992e15 {
                return n / d;
            }
        }
    }
    // Long division: 64 significant bits of the quotient.
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    let n = r.numer().abs();
    let d = r.denom().clone();
    let shift = n.bits() as i64 - d.bits() as i64 - 64;
    let q = if shift >= 0 {
        &n / (&d << shift as usize)
    } else {
        (&n << (-shift) as usize) / &d
    };
    let half = (shift / 2) as i32;
    let rest = shift as i32 - half;
    sign * q.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(half) * 2f64.powi(rest)
}

/// Exact decimal rendering when the denominator has only factors 2 and 5,
/// e.g. `249/1000` → `0.249`. Returns `None` for non-terminating expansions.
pub fn to_exact_decimal(r: &Rational) -> Option<String> {
    let mut denom = r.denom().clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&denom % &two).is_zero() {
        denom /= &two;
        twos += 1;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
        fives += 1;
    }
    if !denom.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let scale = num::pow(BigInt::from(10u32), places);
    let scaled = (r.numer().abs() * &scale) / r.denom();
    let digits = scaled.to_str_radix(10);
    let body = if places == 0 {
        digits
    } else {
        let padded = format!("{:0>width$}", digits, width = places + 1);
        let (i, f) = padded.split_at(padded.len() - places);
        format!("{i}.{f}")
    };
    Some(if r.numer().sign() == Sign::Minus {
        format!("-{body}")
    } else {
        body
    })
}

/// SMT-LIB literal for a rational: `0.5`, `(- 3.0)`, `(/ 1 3)`, `(- (/ 1 3))`.
pub fn smt_literal(r: &Rational) -> String {
    let abs = r.abs();
    let body = match to_exact_decimal(&abs) {
        Some(d) if d.contains('.') => d,
        Some(d) => format!("{d}.0"),
        None => format!("(/ {} {})", abs.numer(), abs.denom()),
    };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}
