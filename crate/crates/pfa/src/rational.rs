//! Helpers for exact rational probabilities.
//!
//! All semantics in this crate are computed over [`BigRational`]; floating
//! point never enters a probability computation. Decimal strings produced
//! here are for display only.

use num::{BigInt, BigRational, One, Signed, Zero};

/// Shorthand for a small rational constant.
pub fn rat(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Exact integer power by repeated squaring.
pub fn rat_pow(base: &BigRational, mut exp: u32) -> BigRational {
    let mut acc = BigRational::one();
    let mut sq = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= &sq;
        }
        sq = &sq * &sq;
        exp >>= 1;
    }
    acc
}

/// Parses `N/D` or a bare integer into a nonnegative rational.
pub fn parse_rational(token: &str) -> Result<BigRational, String> {
    let make = |n: &str, d: &str| -> Result<BigRational, String> {
        let numer: BigInt = n
            .parse()
            .map_err(|_| format!("invalid integer `{n}`"))?;
        let denom: BigInt = d
            .parse()
            .map_err(|_| format!("invalid integer `{d}`"))?;
        if denom.is_zero() {
            return Err(format!("zero denominator in `{token}`"));
        }
        Ok(BigRational::new(numer, denom))
    };
    let r = match token.split_once('/') {
        Some((n, d)) => make(n, d)?,
        None => make(token, "1")?,
    };
    if r.is_negative() {
        return Err(format!("negative probability `{token}`"));
    }
    Ok(r)
}

/// Renders a nonnegative rational as a plain decimal with `sig` significant
/// digits, rounding half away from zero. Display-only; never fed back into
/// any computation.
pub fn decimal(r: &BigRational, sig: u32) -> String {
    assert!(sig > 0);
    if r.is_zero() {
        return "0".to_string();
    }
    let negative = r.is_negative();
    let x = r.abs();
    // Decimal exponent e with 10^e <= x < 10^(e+1).
    let digits = |n: &BigInt| n.to_str_radix(10).len() as i64;
    let mut e = digits(x.numer()) - digits(x.denom());
    let pow10 = |k: i64| -> BigRational {
        let p = BigInt::from(10u32).pow(k.unsigned_abs() as u32);
        if k >= 0 {
            BigRational::from_integer(p)
        } else {
            BigRational::new(BigInt::one(), p)
        }
    };
    if x < pow10(e) {
        e -= 1;
    } else if x >= pow10(e + 1) {
        e += 1;
    }
    // Scale so the rounded mantissa has exactly `sig` digits.
    let shift = sig as i64 - 1 - e;
    let scaled = &x * pow10(shift);
    let (q, rem) = (
        scaled.numer() / scaled.denom(),
        scaled.numer() % scaled.denom(),
    );
    let mut mantissa = q;
    if &rem * BigInt::from(2u32) >= *scaled.denom() {
        mantissa += 1u32;
    }
    let mut digits_str = mantissa.to_str_radix(10);
    let mut point = e + 1; // digits before the decimal point
    if digits_str.len() as i64 > sig as i64 {
        // Rounding carried into a new leading digit (e.g. 0.9999.. -> 1.000..).
        digits_str.pop();
        point += 1;
    }
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if point <= 0 {
        out.push_str("0.");
        for _ in 0..(-point) {
            out.push('0');
        }
        out.push_str(&digits_str);
    } else if (point as usize) >= digits_str.len() {
        out.push_str(&digits_str);
        for _ in 0..(point as usize - digits_str.len()) {
            out.push('0');
        }
    } else {
        out.push_str(&digits_str[..point as usize]);
        out.push('.');
        out.push_str(&digits_str[point as usize..]);
    }
    out
}

/// Sign-aware check that a probability lies in `[0, 1]`.
pub fn in_unit_interval(r: &BigRational) -> bool {
    !r.is_negative() && *r <= BigRational::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rat_reduces_to_lowest_terms() {
        assert_eq!(rat(2, 4), rat(1, 2));
        assert_eq!(rat(3, 6).to_string(), "1/2");
    }

    #[test]
    fn pow_matches_repeated_multiplication() {
        let r = rat(5, 9);
        let mut by_hand = BigRational::one();
        for _ in 0..7 {
            by_hand *= &r;
        }
        assert_eq!(rat_pow(&r, 7), by_hand);
        assert_eq!(rat_pow(&r, 0), BigRational::one());
    }

    #[test]
    fn parse_accepts_fractions_and_integers() {
        assert_eq!(parse_rational("1/2").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("1").unwrap(), rat(1, 1));
        assert_eq!(parse_rational("0").unwrap(), rat(0, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("-1/2").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn decimal_six_significant_digits() {
        assert_eq!(decimal(&rat(3, 4), 6), "0.750000");
        assert_eq!(decimal(&rat(1, 3), 6), "0.333333");
        assert_eq!(decimal(&rat(1, 1), 6), "1.00000");
        assert_eq!(decimal(&rat(0, 1), 6), "0");
        // 1/1024 = 0.0009765625, sixth significant digit rounds half up
        assert_eq!(decimal(&rat(1, 1024), 6), "0.000976563");
        assert_eq!(decimal(&rat(2, 3), 6), "0.666667");
        assert_eq!(decimal(&rat(9_999_995, 10_000_000), 6), "1.00000");
    }
}
