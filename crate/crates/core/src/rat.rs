//! Exact rational arithmetic.
//!
//! All model quantities (periods, budgets, rates, window durations, event
//! instants) are exact rationals end to end. Several of the schedulability
//! checks hold only with equality, so floating point is confined to solver
//! internals; every value that crosses a module boundary is a [`Rat`].

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

/// An exact rational number in canonical reduced form, denominator > 0.
///
/// Decimal strings parse without rounding: `"0.571428"` is exactly
/// `571428/1000000`. Values whose reduced denominator has only factors 2
/// and 5 display as finite decimals; everything else displays as `p/q`,
/// and both forms parse back to the same value.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rat(BigRational);

/// Rounding direction used when snapping a float onto a decimal lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round {
    Nearest,
    Up,
    Down,
}

/// Error produced when a string is not a valid rational literal.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {input:?}: {reason}")]
pub struct ParseRatError {
    pub input: String,
    pub reason: String,
}

impl Rat {
    pub fn zero() -> Self {
        Rat(BigRational::zero())
    }

    pub fn one() -> Self {
        Rat(BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Rat(BigRational::from_integer(BigInt::from(n)))
    }

    /// Exact `numer / denom`. Panics if `denom == 0`.
    pub fn ratio(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Rat(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn abs(&self) -> Rat {
        Rat(self.0.abs())
    }

    pub fn min(self, other: Rat) -> Rat {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Rat) -> Rat {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn recip(&self) -> Rat {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rat(self.0.recip())
    }

    /// Lossy conversion for solver internals and plotting.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Snap a finite float onto the lattice of multiples of `10^-decimals`,
    /// rounding in the requested direction, and return the exact result.
    pub fn from_f64_decimals(value: f64, decimals: u32, round: Round) -> Rat {
        assert!(value.is_finite(), "cannot snap non-finite float");
        let scale = 10f64.powi(decimals as i32);
        let scaled = value * scale;
        let int = match round {
            Round::Nearest => scaled.round(),
            Round::Up => scaled.ceil(),
            Round::Down => scaled.floor(),
        };
        // Large magnitudes lose nothing here: f64 integers up to 2^53 are exact
        // and model values are tiny compared to that.
        let numer = BigInt::from(int as i128);
        let denom = BigInt::from(10u64).pow(decimals);
        Rat(BigRational::new(numer, denom))
    }

    fn decimal_digits(&self) -> Option<(BigInt, u32)> {
        // Finite decimal expansion exists iff the reduced denominator is 2^a 5^b.
        let mut den = self.0.denom().clone();
        let two = BigInt::from(2);
        let five = BigInt::from(5);
        let mut a = 0u32;
        let mut b = 0u32;
        while (&den % &two).is_zero() {
            den /= &two;
            a += 1;
        }
        while (&den % &five).is_zero() {
            den /= &five;
            b += 1;
        }
        if !den.is_one() {
            return None;
        }
        let k = a.max(b);
        let pow10 = BigInt::from(10u64).pow(k);
        let digits = self.0.numer() * &pow10 / self.0.denom();
        Some((digits, k))
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.decimal_digits() {
            Some((digits, 0)) => write!(f, "{digits}"),
            Some((digits, k)) => {
                let neg = digits.is_negative();
                let mut s = digits.abs().to_string();
                let k = k as usize;
                if s.len() <= k {
                    s = format!("{}{}", "0".repeat(k + 1 - s.len()), s);
                }
                let (int, frac) = s.split_at(s.len() - k);
                let frac = frac.trim_end_matches('0');
                let sign = if neg { "-" } else { "" };
                if frac.is_empty() {
                    write!(f, "{sign}{int}")
                } else {
                    write!(f, "{sign}{int}.{frac}")
                }
            }
            None => write!(f, "{}/{}", self.0.numer(), self.0.denom()),
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rat({self})")
    }
}

impl FromStr for Rat {
    type Err = ParseRatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| ParseRatError {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let t = s.trim();
        if t.is_empty() {
            return Err(err("empty string"));
        }
        let (neg, t) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let parse_uint = |digits: &str, what: &str| -> Result<BigInt, ParseRatError> {
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                Err(err(&format!("{what} must be decimal digits")))
            } else {
                Ok(BigInt::parse_bytes(digits.as_bytes(), 10).unwrap())
            }
        };
        let value = if let Some((n, d)) = t.split_once('/') {
            let numer = parse_uint(n, "numerator")?;
            let denom = parse_uint(d, "denominator")?;
            if denom.is_zero() {
                return Err(err("zero denominator"));
            }
            BigRational::new(numer, denom)
        } else if let Some((int, frac)) = t.split_once('.') {
            let int = if int.is_empty() {
                BigInt::zero()
            } else {
                parse_uint(int, "integer part")?
            };
            let frac_digits = parse_uint(frac, "fractional part")?;
            let k = frac.len() as u32;
            let pow10 = BigInt::from(10u64).pow(k);
            BigRational::new(int * &pow10 + frac_digits, pow10)
        } else {
            BigRational::from_integer(parse_uint(t, "integer")?)
        };
        Ok(Rat(if neg { -value } else { value }))
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat((self.0).$method(rhs.0))
            }
        }
        impl $trait for &Rat {
            type Output = Rat;
            fn $method(self, rhs: &Rat) -> Rat {
                Rat((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<&Rat> for Rat {
            type Output = Rat;
            fn $method(self, rhs: &Rat) -> Rat {
                Rat((self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rat> for &Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat((&self.0).$method(rhs.0))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);

impl Div for Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(self.0 / rhs.0)
    }
}

impl Div for &Rat {
    type Output = Rat;
    fn div(self, rhs: &Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(&self.0 / &rhs.0)
    }
}

impl Div<&Rat> for Rat {
    type Output = Rat;
    fn div(self, rhs: &Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(self.0 / &rhs.0)
    }
}

impl Div<Rat> for &Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(&self.0 / rhs.0)
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-&self.0)
    }
}

impl AddAssign<&Rat> for Rat {
    fn add_assign(&mut self, rhs: &Rat) {
        self.0 += &rhs.0;
    }
}

impl AddAssign for Rat {
    fn add_assign(&mut self, rhs: Rat) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&Rat> for Rat {
    fn sub_assign(&mut self, rhs: &Rat) {
        self.0 -= &rhs.0;
    }
}

impl MulAssign<&Rat> for Rat {
    fn mul_assign(&mut self, rhs: &Rat) {
        self.0 *= &rhs.0;
    }
}

impl Sum for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rat> for Rat {
    fn sum<I: Iterator<Item = &'a Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |acc, x| acc + x)
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Self {
        Rat::from_int(n)
    }
}

impl From<u32> for Rat {
    fn from(n: u32) -> Self {
        Rat::from_int(n as i64)
    }
}

/// Shorthand used pervasively in tests: `rat("2.8")`.
pub fn rat(s: &str) -> Rat {
    s.parse().unwrap_or_else(|e| panic!("{e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decimal_parse_is_exact() {
        let r = rat("0.571428");
        assert_eq!(r, Rat::ratio(571428, 1_000_000));
        assert_eq!(rat("2.8") / rat("7"), Rat::ratio(2, 5));
        assert_eq!(rat("0.1") + rat("0.2"), rat("0.3"));
    }

    #[test]
    fn fraction_form_parses() {
        assert_eq!(rat("4/7"), Rat::ratio(4, 7));
        assert_eq!(rat("-3/6"), Rat::ratio(-1, 2));
    }

    #[test]
    fn display_uses_decimal_when_finite() {
        assert_eq!(rat("2.80").to_string(), "2.8");
        assert_eq!(rat("0.45").to_string(), "0.45");
        assert_eq!(rat("35").to_string(), "35");
        assert_eq!(Rat::ratio(4, 7).to_string(), "4/7");
        assert_eq!(Rat::ratio(-1, 8).to_string(), "-0.125");
        assert_eq!(Rat::ratio(1, 1000).to_string(), "0.001");
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in ["", "1.2.3", "1/0", "a", "1e3", "--2", "1/ 2"] {
            assert!(bad.parse::<Rat>().is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn snapping_directions() {
        let x = 0.123456789444;
        assert_eq!(
            Rat::from_f64_decimals(x, 9, Round::Up),
            rat("0.123456790")
        );
        assert_eq!(
            Rat::from_f64_decimals(x, 9, Round::Down),
            rat("0.123456789")
        );
        assert_eq!(
            Rat::from_f64_decimals(x, 9, Round::Nearest),
            rat("0.123456789")
        );
    }

    proptest! {
        // parse(format(r)) = r for every constructed value.
        #[test]
        fn display_round_trips(n in -100_000i64..100_000, d in 1i64..100_000) {
            let r = Rat::ratio(n, d);
            prop_assert_eq!(r.to_string().parse::<Rat>().unwrap(), r);
        }

        #[test]
        fn arithmetic_matches_integers(a in -1000i64..1000, b in -1000i64..1000,
                                       c in 1i64..1000, d in 1i64..1000) {
            let x = Rat::ratio(a, c);
            let y = Rat::ratio(b, d);
            prop_assert_eq!(&x + &y, Rat::ratio(a * d + b * c, c * d));
            prop_assert_eq!(&x * &y, Rat::ratio(a * b, c * d));
        }
    }
}
