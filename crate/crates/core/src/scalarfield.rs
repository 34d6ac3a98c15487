//! Exact scalars `a + b·√d` with rational `a`, `b`.
//!
//! Every mask coefficient, measure weight, matrix entry and eigenvector
//! component in this crate is a [`QuadScalar`]. A value with `b = 0` is a
//! plain rational and mixes freely with any field; two irrational values
//! must share the same `d`.
//!
//! Text form (parsing is exact, printing is canonical):
//!
//! ```text
//! 1/2
//! 1/8+1/8*sqrt(3)
//! -3/4-1/2*sqrt(3)
//! ```

use std::cmp::Ordering;
use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Marker for "no square root part".
const RATIONAL_D: u32 = 1;

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn is_square_free(d: u32) -> bool {
    if d < 2 {
        return false;
    }
    let mut f = 2u32;
    while f.saturating_mul(f) <= d {
        if d.is_multiple_of(f * f) {
            return false;
        }
        f += 1;
    }
    true
}

fn rational_to_f64(r: &Rational) -> Result<f64> {
    let v = r
        .to_f64()
        .ok_or_else(|| Error::Overflow(r.to_string()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(r.to_string()))
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QuadScalar {
    a: Rational,
    b: Rational,
    d: u32,
}

impl QuadScalar {
    /// Builds `a + b·√d`. `d` is ignored when `b` is zero.
    pub fn new(a: Rational, b: Rational, d: u32) -> Result<Self> {
        if b.is_zero() {
            return Ok(Self::from_rational(a));
        }
        if !is_square_free(d) {
            return Err(Error::Parse(format!("sqrt({d}) is not a square-free radicand")));
        }
        Ok(QuadScalar { a, b, d })
    }

    pub fn from_rational(a: Rational) -> Self {
        QuadScalar {
            a,
            b: Rational::zero(),
            d: RATIONAL_D,
        }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(Rational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Self::from_rational(rational(num, den))
    }

    /// `(a_num + b_num·√d) / den` with small integer parts.
    pub fn small(a_num: i64, b_num: i64, den: i64, d: u32) -> Result<Self> {
        Self::new(rational(a_num, den), rational(b_num, den), d)
    }

    pub fn zero() -> Self {
        Self::from_int(0)
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn rational_part(&self) -> &Rational {
        &self.a
    }

    pub fn irrational_part(&self) -> &Rational {
        &self.b
    }

    /// The radicand, or `None` for a plain rational.
    pub fn radicand(&self) -> Option<u32> {
        (!self.is_rational()).then_some(self.d)
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.a.is_one() && self.b.is_zero()
    }

    /// True if the two values can be combined.
    pub fn compatible(&self, other: &Self) -> bool {
        self.is_rational() || other.is_rational() || self.d == other.d
    }

    fn common_d(&self, other: &Self) -> Result<u32> {
        match (self.is_rational(), other.is_rational()) {
            (true, true) => Ok(RATIONAL_D),
            (true, false) => Ok(other.d),
            (false, true) => Ok(self.d),
            (false, false) if self.d == other.d => Ok(self.d),
            _ => Err(Error::IncompatibleField(self.d, other.d)),
        }
    }

    fn build(a: Rational, b: Rational, d: u32) -> Self {
        if b.is_zero() {
            Self::from_rational(a)
        } else {
            QuadScalar { a, b, d }
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        let d = self.common_d(other)?;
        Ok(Self::build(&self.a + &other.a, &self.b + &other.b, d))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        let d = self.common_d(other)?;
        Ok(Self::build(&self.a - &other.a, &self.b - &other.b, d))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        let d = self.common_d(other)?;
        if self.is_rational() {
            return Ok(Self::build(&self.a * &other.a, &self.a * &other.b, d));
        }
        if other.is_rational() {
            return Ok(Self::build(&self.a * &other.a, &self.b * &other.a, d));
        }
        let dd = Rational::from_integer(BigInt::from(d));
        let a = &self.a * &other.a + &self.b * &other.b * dd;
        let b = &self.a * &other.b + &self.b * &other.a;
        Ok(Self::build(a, b, d))
    }

    /// `(a + b√d)⁻¹ = (a − b√d) / (a² − d·b²)`.
    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if self.is_rational() {
            return Ok(Self::from_rational(self.a.recip()));
        }
        let norm = self.norm();
        Ok(Self::build(&self.a / &norm, -(&self.b / &norm), self.d))
    }

    pub fn try_div(&self, other: &Self) -> Result<Self> {
        self.try_mul(&other.inv()?)
    }

    /// Field norm `a² − d·b²`; nonzero for nonzero values.
    pub fn norm(&self) -> Rational {
        let dd = Rational::from_integer(BigInt::from(self.d));
        &self.a * &self.a - &self.b * &self.b * dd
    }

    pub fn conjugate(&self) -> Self {
        Self::build(self.a.clone(), -self.b.clone(), self.d)
    }

    /// Exact sign: `-1`, `0` or `+1`.
    pub fn signum(&self) -> i8 {
        let sa = sign_of(&self.a);
        let sb = sign_of(&self.b);
        if sb == 0 {
            return sa;
        }
        if sa == 0 || sa == sb {
            return sb;
        }
        // Opposite signs: the larger square wins. Equality is impossible for
        // square-free d and b != 0.
        let a2 = &self.a * &self.a;
        let db2 = &self.b * &self.b * Rational::from_integer(BigInt::from(self.d));
        if a2 > db2 {
            sa
        } else {
            sb
        }
    }

    pub fn abs(&self) -> Self {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn cmp_exact(&self, other: &Self) -> Result<Ordering> {
        Ok(self.try_sub(other)?.signum().cmp(&0))
    }

    pub fn pow(&self, exp: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..exp {
            acc = &acc * self;
        }
        acc
    }

    /// Nearest-double approximation. Only for reporting and plotting.
    pub fn to_f64(&self) -> Result<f64> {
        let fa = rational_to_f64(&self.a)?;
        if self.is_rational() {
            return Ok(fa);
        }
        let fb = rational_to_f64(&self.b)? * f64::from(self.d).sqrt();
        if fa == 0.0 || fa.signum() == fb.signum() {
            return Ok(fa + fb);
        }
        // a and b·√d nearly cancel: use (a² − d b²) / (a − b√d).
        Ok(rational_to_f64(&self.norm())? / (fa - fb))
    }
}

fn sign_of(r: &Rational) -> i8 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

impl Default for QuadScalar {
    fn default() -> Self {
        Self::zero()
    }
}

impl From<i64> for QuadScalar {
    fn from(n: i64) -> Self {
        Self::from_int(n)
    }
}

impl From<Rational> for QuadScalar {
    fn from(r: Rational) -> Self {
        Self::from_rational(r)
    }
}

impl PartialOrd for QuadScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.cmp_exact(other).ok()
    }
}

// Operator impls panic on mixed radicands; use the `try_*` methods where that
// can happen. Inside one computation every value comes from the same mask.
macro_rules! binop {
    ($trait:ident, $method:ident, $try:ident) => {
        impl $trait<&QuadScalar> for &QuadScalar {
            type Output = QuadScalar;
            fn $method(self, rhs: &QuadScalar) -> QuadScalar {
                self.$try(rhs).expect(concat!("QuadScalar::", stringify!($method)))
            }
        }
        impl $trait<QuadScalar> for QuadScalar {
            type Output = QuadScalar;
            fn $method(self, rhs: QuadScalar) -> QuadScalar {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&QuadScalar> for QuadScalar {
            type Output = QuadScalar;
            fn $method(self, rhs: &QuadScalar) -> QuadScalar {
                (&self).$method(rhs)
            }
        }
        impl $trait<QuadScalar> for &QuadScalar {
            type Output = QuadScalar;
            fn $method(self, rhs: QuadScalar) -> QuadScalar {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);
binop!(Div, div, try_div);

impl AddAssign<&QuadScalar> for QuadScalar {
    fn add_assign(&mut self, rhs: &QuadScalar) {
        *self = &*self + rhs;
    }
}

impl AddAssign for QuadScalar {
    fn add_assign(&mut self, rhs: QuadScalar) {
        *self += &rhs;
    }
}

impl SubAssign<&QuadScalar> for QuadScalar {
    fn sub_assign(&mut self, rhs: &QuadScalar) {
        *self = &*self - rhs;
    }
}

impl MulAssign<&QuadScalar> for QuadScalar {
    fn mul_assign(&mut self, rhs: &QuadScalar) {
        *self = &*self * rhs;
    }
}

impl Neg for &QuadScalar {
    type Output = QuadScalar;
    fn neg(self) -> QuadScalar {
        QuadScalar::build(-self.a.clone(), -self.b.clone(), self.d)
    }
}

impl Neg for QuadScalar {
    type Output = QuadScalar;
    fn neg(self) -> QuadScalar {
        -&self
    }
}

impl Sum for QuadScalar {
    fn sum<I: Iterator<Item = QuadScalar>>(iter: I) -> Self {
        iter.fold(QuadScalar::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a QuadScalar> for QuadScalar {
    fn sum<I: Iterator<Item = &'a QuadScalar>>(iter: I) -> Self {
        iter.fold(QuadScalar::zero(), |acc, x| acc + x)
    }
}

impl Product for QuadScalar {
    fn product<I: Iterator<Item = QuadScalar>>(iter: I) -> Self {
        iter.fold(QuadScalar::one(), |acc, x| acc * x)
    }
}

fn write_rational(f: &mut fmt::Formatter<'_>, r: &Rational) -> fmt::Result {
    write!(f, "{}/{}", r.numer(), r.denom())
}

impl fmt::Display for QuadScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_rational(f, &self.a)?;
        if !self.b.is_zero() {
            if self.b.is_positive() {
                f.write_str("+")?;
            }
            write_rational(f, &self.b)?;
            write!(f, "*sqrt({})", self.d)?;
        }
        Ok(())
    }
}

impl fmt::Debug for QuadScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_int(s: &str, what: &str) -> Result<BigInt> {
    let digits = s.strip_prefix('+').unwrap_or(s);
    if digits.is_empty()
        || !digits
            .trim_start_matches('-')
            .bytes()
            .all(|c| c.is_ascii_digit())
        || digits.trim_start_matches('-').is_empty()
    {
        return Err(Error::Parse(format!("bad {what} `{s}`")));
    }
    digits
        .parse::<BigInt>()
        .map_err(|e| Error::Parse(format!("bad {what} `{s}`: {e}")))
}

/// Parses `INT` or `INT/POSINT`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        None => Ok(Rational::from_integer(parse_int(s, "integer")?)),
        Some((num, den)) => {
            if den.starts_with(['-', '+']) {
                return Err(Error::Parse(format!("denominator must be a plain positive integer in `{s}`")));
            }
            let num = parse_int(num, "numerator")?;
            let den = parse_int(den, "denominator")?;
            if !den.is_positive() {
                return Err(Error::Parse(format!("denominator must be positive in `{s}`")));
            }
            Ok(Rational::new(num, den))
        }
    }
}

/// Splits at top-level `+`/`-` that start a new term.
fn split_terms(s: &str) -> Vec<&str> {
    let bytes = s.as_bytes();
    let mut terms = Vec::new();
    let mut start = 0;
    let mut depth = 0i32;
    for (i, &c) in bytes.iter().enumerate() {
        match c {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'+' | b'-' if i > start && depth == 0 => {
                let prev = bytes[i - 1];
                if prev != b'/' && prev != b'*' && prev != b'(' {
                    terms.push(&s[start..i]);
                    start = i;
                }
            }
            _ => {}
        }
    }
    terms.push(&s[start..]);
    terms
}

impl FromStr for QuadScalar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Parse("empty scalar".into()));
        }
        let mut a = Rational::zero();
        let mut b = Rational::zero();
        let mut radicand: Option<u32> = None;
        for term in split_terms(&compact) {
            let Some(pos) = term.find("sqrt(") else {
                a += parse_rational(term)?;
                continue;
            };
            let inner = term[pos + 5..]
                .strip_suffix(')')
                .ok_or_else(|| Error::Parse(format!("unterminated sqrt in `{term}`")))?;
            let d: u32 = inner
                .parse()
                .map_err(|_| Error::Parse(format!("bad radicand `{inner}`")))?;
            if !is_square_free(d) {
                return Err(Error::Parse(format!("sqrt({d}) is not a square-free radicand")));
            }
            if radicand.is_some_and(|r| r != d) {
                return Err(Error::IncompatibleField(radicand.unwrap(), d));
            }
            radicand = Some(d);
            let coeff = &term[..pos];
            let coeff = match coeff {
                "" | "+" => Rational::one(),
                "-" => -Rational::one(),
                _ => {
                    let c = coeff
                        .strip_suffix('*')
                        .ok_or_else(|| Error::Parse(format!("expected `*` before sqrt in `{term}`")))?;
                    parse_rational(c)?
                }
            };
            b += coeff;
        }
        QuadScalar::new(a, b, radicand.unwrap_or(RATIONAL_D))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> QuadScalar {
        s.parse().unwrap()
    }

    #[test]
    fn add_examples() {
        assert_eq!(q("1/8+1/8*sqrt(3)") + q("3/8+1/8*sqrt(3)"), q("4/8+2/8*sqrt(3)"));
        let x = q("1/8+1/8*sqrt(3)");
        assert_eq!(&x + &QuadScalar::zero(), x);
        assert_eq!(q("1/8+1/8*sqrt(3)") + q("1/8-1/8*sqrt(3)"), q("1/4"));
        assert!((q("1/4")).is_rational());
    }

    #[test]
    fn mul_inv_examples() {
        let inv = q("1+sqrt(3)").inv().unwrap();
        assert_eq!(inv, q("-1/2+1/2*sqrt(3)"));
        // (1+√3)(3−√3) = 2√3
        assert_eq!(q("1/8+1/8*sqrt(3)") * q("3/8-1/8*sqrt(3)"), q("1/32*sqrt(3)"));
        let x = q("5/7-2/3*sqrt(3)");
        assert_eq!(&x * &QuadScalar::one(), x);
        assert!(matches!(QuadScalar::zero().inv(), Err(Error::DivisionByZero)));
    }

    #[test]
    fn sign_examples() {
        assert_eq!(q("1/8-1/8*sqrt(3)").signum(), -1);
        assert_eq!(QuadScalar::zero().signum(), 0);
        assert_eq!(q("5-3*sqrt(3)").signum(), -1);
        assert_eq!(q("-5+3*sqrt(3)").signum(), 1);
        assert_eq!(q("2-sqrt(3)").signum(), 1);
    }

    #[test]
    fn float_examples() {
        assert!((q("5/12+1/4*sqrt(3)").to_f64().unwrap() - 0.849_679_368_1).abs() < 1e-9);
        assert_eq!(q("1/2").to_f64().unwrap(), 0.5);
        assert!((q("1/8+1/8*sqrt(3)").to_f64().unwrap() - 0.341_506_350_9).abs() < 1e-9);
        // near-cancellation keeps relative accuracy
        let tiny = q("97/56-sqrt(3)").to_f64().unwrap();
        let expect = 97.0 / 56.0 - 3f64.sqrt();
        assert!((tiny - expect).abs() < 1e-15);
        assert!(tiny > 0.0);
    }

    #[test]
    fn overflow_is_reported() {
        let huge = QuadScalar::from_rational(Rational::from_integer(BigInt::from(10).pow(400)));
        assert!(matches!(huge.to_f64(), Err(Error::Overflow(_))));
    }

    #[test]
    fn mixing_fields_is_an_error() {
        let x = q("1+sqrt(3)");
        let y = q("1+sqrt(2)");
        assert!(matches!(x.try_add(&y), Err(Error::IncompatibleField(3, 2))));
        assert!(x.try_add(&q("1/2")).is_ok());
        assert!(!x.compatible(&y));
    }

    #[test]
    fn grammar_round_trip_and_canonical_form() {
        for s in ["0/1", "1/2", "-3/4", "1/8+1/8*sqrt(3)", "0/1-1/2*sqrt(3)", "7/1+5/6*sqrt(2)"] {
            assert_eq!(q(s).to_string(), s);
        }
        assert_eq!(q("2/4+2/16*sqrt(3)").to_string(), "1/2+1/8*sqrt(3)");
        assert_eq!(q("sqrt(3)").to_string(), "0/1+1/1*sqrt(3)");
        assert_eq!(q("-sqrt(3)+1").to_string(), "1/1-1/1*sqrt(3)");
        assert_eq!(q(" 3 ").to_string(), "3/1");
        assert_eq!(q("1/2*sqrt(3)-1/2*sqrt(3)").to_string(), "0/1");
    }

    #[test]
    fn grammar_rejects_garbage() {
        for s in ["", "1/0", "1/-2", "abc", "1/2*sqrt(4)", "sqrt(3", "1+sqrt(2)+sqrt(3)", "1//2", "2sqrt(3)"] {
            assert!(s.parse::<QuadScalar>().is_err(), "accepted `{s}`");
        }
    }

    #[test]
    fn square_free() {
        assert!(is_square_free(2));
        assert!(is_square_free(3));
        assert!(is_square_free(30));
        assert!(!is_square_free(1));
        assert!(!is_square_free(12));
        assert!(!is_square_free(49));
    }
}
