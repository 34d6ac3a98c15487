//! Lattices, the two dilations, and radix-{0,1} addressing.
//!
//! On the line the lattice is `ℤ` and `M` multiplies by 2; on the plane the
//! lattice is the Gaussian integers and `M` multiplies by `1+i`. Both are
//! stored as [`LatticeElem`] (line elements have `im == 0`), and every
//! operation that depends on `M` goes through [`Dilation`].
//!
//! A key `g` at scale `n` denotes the point `M⁻ⁿg` and the sub-tile
//! `M⁻ⁿ(g + T)`, where `T` is `[0,1]` or the twin dragon.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalarfield::{QuadScalar, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dilation {
    /// `ℤ`, multiplication by 2, tile `[0,1]`.
    Line,
    /// `ℤ[i]`, multiplication by `1+i`, tile the twin dragon.
    Plane,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Dilation {
    pub fn name(self) -> &'static str {
        match self {
            Dilation::Line => "line",
            Dilation::Plane => "plane",
        }
    }

    /// `|det M|`, the index of `MΓ` in `Γ`. Two in both cases.
    pub fn det_abs(self) -> u32 {
        2
    }

    /// `|M|²` as an integer: 4 on the line, 2 on the plane.
    pub fn norm_sqr(self) -> u32 {
        match self {
            Dilation::Line => 4,
            Dilation::Plane => 2,
        }
    }

    /// Euclidean modulus of `M` viewed as a number.
    pub fn norm(self) -> f64 {
        f64::from(self.norm_sqr()).sqrt()
    }

    pub fn contains(self, g: LatticeElem) -> bool {
        self == Dilation::Plane || g.im == 0
    }

    pub fn check(self, g: LatticeElem) -> Result<LatticeElem> {
        if self.contains(g) {
            Ok(g)
        } else {
            Err(Error::DilationMismatch(format!("{g} is not an integer on the line")))
        }
    }

    pub fn mul_m(self, g: LatticeElem) -> LatticeElem {
        match self {
            Dilation::Line => LatticeElem::new(2 * g.re, 2 * g.im),
            Dilation::Plane => LatticeElem::new(g.re - g.im, g.re + g.im),
        }
    }

    /// `Mᵏ·g`.
    pub fn mul_m_pow(self, g: LatticeElem, k: u32) -> LatticeElem {
        (0..k).fold(g, |acc, _| self.mul_m(acc))
    }

    /// `g / M` when `g ∈ MΓ`.
    pub fn div_m(self, g: LatticeElem) -> Option<LatticeElem> {
        match self {
            Dilation::Line => (g.re % 2 == 0 && g.im % 2 == 0).then(|| LatticeElem::new(g.re / 2, g.im / 2)),
            Dilation::Plane => {
                // g/(1+i) = g(1−i)/2
                let re = g.re + g.im;
                let im = g.im - g.re;
                (re % 2 == 0).then(|| LatticeElem::new(re / 2, im / 2))
            }
        }
    }

    pub fn parity(self, g: LatticeElem) -> Parity {
        let odd = match self {
            Dilation::Line => g.re.rem_euclid(2) == 1,
            Dilation::Plane => (g.re + g.im).rem_euclid(2) == 1,
        };
        if odd {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    /// Splits `g` at scale `n` into `(z, address)` with
    /// `M⁻ⁿg = z + Σⱼ M⁻ʲγⱼ`, peeling the least significant digit first.
    /// The address is the canonical one; boundary points of a tile land in
    /// exactly one translate.
    pub fn split_tile(self, g: LatticeElem, n: u32) -> (LatticeElem, RadixAddress) {
        let mut digits = Vec::with_capacity(n as usize);
        let mut rest = g;
        for _ in 0..n {
            let digit = match self.parity(rest) {
                Parity::Odd => 1u8,
                Parity::Even => 0u8,
            };
            rest = self
                .div_m(rest - LatticeElem::new(i64::from(digit), 0))
                .expect("even after removing the odd digit");
            digits.push(digit);
        }
        digits.reverse();
        (rest, RadixAddress { dilation: self, digits })
    }

    /// Canonical digits of `M⁻ⁿg` inside the base tile, or `None` when the
    /// greedy residue is not zero (the point lies in another translate, or
    /// on a boundary the canonical representatives miss).
    pub fn greedy_digits(self, g: LatticeElem, n: u32) -> Option<RadixAddress> {
        let (rest, addr) = self.split_tile(g, n);
        rest.is_zero().then_some(addr)
    }

    /// `M⁻ⁿ` applied to `g`, exactly.
    pub fn point_at_scale(self, g: LatticeElem, n: u32) -> (Rational, Rational) {
        let scale = Rational::from_integer(BigInt::one() << n);
        match self {
            Dilation::Line => (Rational::from_integer(BigInt::from(g.re)) / scale, Rational::zero()),
            Dilation::Plane => {
                // (1+i)⁻ⁿ = (1−i)ⁿ / 2ⁿ
                let (mut re, mut im) = (BigInt::from(g.re), BigInt::from(g.im));
                for _ in 0..n {
                    let (r, i) = (&re + &im, &im - &re);
                    re = r;
                    im = i;
                }
                (Rational::from_integer(re) / &scale, Rational::from_integer(im) / scale)
            }
        }
    }

    /// Floating version of [`Dilation::point_at_scale`].
    pub fn point_at_scale_f64(self, g: LatticeElem, n: u32) -> (f64, f64) {
        let s = 0.5f64.powi(n as i32);
        match self {
            Dilation::Line => (g.re as f64 * s, 0.0),
            Dilation::Plane => {
                let (mut re, mut im) = (g.re as f64, g.im as f64);
                for _ in 0..n {
                    let (r, i) = (re + im, im - re);
                    re = r;
                    im = i;
                }
                (re * s, im * s)
            }
        }
    }
}

impl fmt::Display for Dilation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dilation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(Dilation::Line),
            "plane" => Ok(Dilation::Plane),
            other => Err(Error::Parse(format!("unknown dilation `{other}` (expected line or plane)"))),
        }
    }
}

/// An element of `ℤ` (with `im == 0`) or of the Gaussian integers.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LatticeElem {
    pub re: i64,
    pub im: i64,
}

impl LatticeElem {
    pub const ZERO: LatticeElem = LatticeElem { re: 0, im: 0 };

    pub const fn new(re: i64, im: i64) -> Self {
        LatticeElem { re, im }
    }

    pub const fn int(re: i64) -> Self {
        LatticeElem { re, im: 0 }
    }

    pub fn is_zero(self) -> bool {
        self.re == 0 && self.im == 0
    }

    /// `|g|²`.
    pub fn norm_sqr(self) -> i128 {
        i128::from(self.re) * i128::from(self.re) + i128::from(self.im) * i128::from(self.im)
    }

    pub fn abs(self) -> f64 {
        (self.norm_sqr() as f64).sqrt()
    }
}

impl Add for LatticeElem {
    type Output = LatticeElem;
    fn add(self, rhs: LatticeElem) -> LatticeElem {
        LatticeElem::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for LatticeElem {
    type Output = LatticeElem;
    fn sub(self, rhs: LatticeElem) -> LatticeElem {
        LatticeElem::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Neg for LatticeElem {
    type Output = LatticeElem;
    fn neg(self) -> LatticeElem {
        LatticeElem::new(-self.re, -self.im)
    }
}

impl fmt::Display for LatticeElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let imag = match self.im {
            1 => "i".to_string(),
            -1 => "-i".to_string(),
            n => format!("{n}i"),
        };
        match (self.re, self.im) {
            (re, 0) => write!(f, "{re}"),
            (0, _) => f.write_str(&imag),
            (re, im) if im > 0 => write!(f, "{re}+{imag}"),
            (re, _) => write!(f, "{re}{imag}"),
        }
    }
}

impl fmt::Debug for LatticeElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_i64(s: &str, whole: &str) -> Result<i64> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad lattice element `{whole}`")))
}

impl FromStr for LatticeElem {
    type Err = Error;

    /// Accepts `3`, `-2`, `i`, `-i`, `2i`, `1-2i`, `-1+i`.
    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let Some(body) = t.strip_suffix('i') else {
            return Ok(LatticeElem::int(parse_i64(&t, s)?));
        };
        let split = body
            .char_indices()
            .rev()
            .find(|&(i, c)| i > 0 && (c == '+' || c == '-'))
            .map(|(i, _)| i);
        let (re, coeff) = match split {
            Some(i) => (parse_i64(&body[..i], s)?, &body[i..]),
            None => (0, body),
        };
        let im = match coeff {
            "" | "+" => 1,
            "-" => -1,
            c => parse_i64(c.strip_prefix('+').unwrap_or(c), s)?,
        };
        Ok(LatticeElem::new(re, im))
    }
}

/// A finite digit string `γ₁…γₙ` (γ₁ first), each digit 0 or 1.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct RadixAddress {
    pub dilation: Dilation,
    digits: Vec<u8>,
}

impl RadixAddress {
    pub fn new(dilation: Dilation, digits: Vec<u8>) -> Result<Self> {
        if let Some(bad) = digits.iter().find(|&&d| d > 1) {
            return Err(Error::Parse(format!("radix digit {bad} is not 0 or 1")));
        }
        Ok(RadixAddress { dilation, digits })
    }

    pub fn parse(dilation: Dilation, s: &str) -> Result<Self> {
        let digits = s
            .trim()
            .trim_start_matches('.')
            .bytes()
            .map(|c| match c {
                b'0' => Ok(0),
                b'1' => Ok(1),
                _ => Err(Error::Parse(format!("bad radix address `{s}`"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(RadixAddress { dilation, digits })
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn depth(&self) -> u32 {
        self.digits.len() as u32
    }

    /// The same digits read under the other dilation.
    pub fn reinterpret(&self, dilation: Dilation) -> RadixAddress {
        RadixAddress {
            dilation,
            digits: self.digits.clone(),
        }
    }

    /// `g = Σⱼ Mⁿ⁻ʲγⱼ`, the scale-`n` key of this sub-tile.
    pub fn lattice_key(&self) -> LatticeElem {
        self.digits.iter().fold(LatticeElem::ZERO, |acc, &d| {
            self.dilation.mul_m(acc) + LatticeElem::int(i64::from(d))
        })
    }

    /// The point `Σⱼ M⁻ʲγⱼ` as exact `(re, im)`.
    pub fn point(&self) -> (Rational, Rational) {
        self.dilation.point_at_scale(self.lattice_key(), self.depth())
    }
}

impl fmt::Display for RadixAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Finitely supported values `μ(M⁻ⁿ(g+T))` at one scale.
#[derive(Clone, Debug, PartialEq)]
pub struct TileValueMap {
    pub dilation: Dilation,
    pub scale: u32,
    pub values: BTreeMap<LatticeElem, QuadScalar>,
}

impl TileValueMap {
    pub fn new(dilation: Dilation, scale: u32) -> Self {
        TileValueMap {
            dilation,
            scale,
            values: BTreeMap::new(),
        }
    }

    pub fn get(&self, g: LatticeElem) -> QuadScalar {
        self.values.get(&g).cloned().unwrap_or_default()
    }

    pub fn total(&self) -> QuadScalar {
        self.values.values().sum()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalarfield::rational;
    use proptest::prelude::*;

    const L: Dilation = Dilation::Line;
    const P: Dilation = Dilation::Plane;

    fn g(s: &str) -> LatticeElem {
        s.parse().unwrap()
    }

    #[test]
    fn mul_and_div() {
        assert_eq!(P.mul_m(g("1")), g("1+i"));
        assert_eq!(P.div_m(g("2")), Some(g("1-i")));
        assert_eq!(L.div_m(g("3")), None);
        assert_eq!(L.div_m(g("-4")), Some(g("-2")));
        assert_eq!(P.div_m(g("i")), None);
    }

    #[test]
    fn parity_examples() {
        assert_eq!(L.parity(g("4")), Parity::Even);
        assert_eq!(L.parity(g("-3")), Parity::Odd);
        assert_eq!(P.parity(g("1+i")), Parity::Even);
        assert_eq!(P.parity(g("i")), Parity::Odd);
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(L.greedy_digits(g("3"), 2).unwrap().to_string(), "11");
        for n in 1..8 {
            assert!(L.greedy_digits(LatticeElem::int(1 << n), n).is_none());
        }
        assert_eq!(P.greedy_digits(g("1"), 1).unwrap().to_string(), "1");
        assert_eq!(L.greedy_digits(g("1"), 3).unwrap().to_string(), "001");
    }

    #[test]
    fn split_tile_finds_translate() {
        // 11/4 = 2 + .11
        let (z, addr) = L.split_tile(g("11"), 2);
        assert_eq!(z, g("2"));
        assert_eq!(addr.to_string(), "11");
        let (z, _) = L.split_tile(g("-1"), 3);
        assert_eq!(z, g("-1"));
    }

    #[test]
    fn address_points() {
        let r = |n, d| rational(n, d);
        let a = RadixAddress::parse(L, "01").unwrap();
        assert_eq!(a.point(), (r(1, 4), r(0, 1)));
        let a = RadixAddress::parse(P, "1").unwrap();
        assert_eq!(a.point(), (r(1, 2), r(-1, 2)));
        let a = RadixAddress::parse(P, "01").unwrap();
        assert_eq!(a.point(), (r(0, 1), r(-1, 2)));
        let (x, y) = P.point_at_scale_f64(a.lattice_key(), 2);
        assert_eq!((x, y), (0.0, -0.5));
    }

    #[test]
    fn text_forms() {
        for s in ["0", "3", "-7", "i", "-i", "2i", "-3i", "1+i", "1-2i", "-1+i", "-2-i", "5+12i"] {
            assert_eq!(g(s).to_string(), s);
        }
        assert_eq!(g("+1 - 2i"), LatticeElem::new(1, -2));
        assert_eq!(g("0+i"), LatticeElem::new(0, 1));
        assert!("1+".parse::<LatticeElem>().is_err());
        assert!("x".parse::<LatticeElem>().is_err());
        assert!(RadixAddress::parse(P, "012").is_err());
    }

    fn digit_strings() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..2, 0..20)
    }

    proptest! {
        #[test]
        fn greedy_round_trip(digits in digit_strings(), plane in any::<bool>()) {
            let dil = if plane { P } else { L };
            let addr = RadixAddress::new(dil, digits).unwrap();
            let back = dil.greedy_digits(addr.lattice_key(), addr.depth());
            prop_assert_eq!(back, Some(addr));
        }

        #[test]
        fn multiples_of_m_are_even(re in -1000i64..1000, im in -1000i64..1000) {
            let x = LatticeElem::new(re, im);
            prop_assert_eq!(P.parity(P.mul_m(x)), Parity::Even);
            prop_assert_eq!(P.div_m(P.mul_m(x)), Some(x));
            let y = LatticeElem::int(re);
            prop_assert_eq!(L.parity(L.mul_m(y)), Parity::Even);
            prop_assert_eq!(L.div_m(L.mul_m(y)), Some(y));
        }

        #[test]
        fn split_tile_reconstructs(re in -500i64..500, im in -500i64..500, n in 0u32..12) {
            let x = LatticeElem::new(re, im);
            let (z, addr) = P.split_tile(x, n);
            prop_assert_eq!(P.mul_m_pow(z, n) + addr.lattice_key(), x);
        }
    }

    #[test]
    fn distinct_strings_distinct_keys() {
        for dil in [L, P] {
            let n = 10u32;
            let keys: std::collections::BTreeSet<_> = (0u32..1 << n)
                .map(|bits| {
                    let digits = (0..n).map(|j| ((bits >> j) & 1) as u8).collect();
                    RadixAddress::new(dil, digits).unwrap().lattice_key()
                })
                .collect();
            assert_eq!(keys.len(), 1 << n);
        }
    }
}
