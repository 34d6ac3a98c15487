//! Binary expansions on `[0, 1)` read as `(1+i)`-radix expansions on the twin dragon.
//!
//! The digit string `.γ₁γ₂…` names `Σ γⱼ2⁻ʲ` on the line and `Σ γⱼ(1+i)⁻ʲ`
//! in the plane. Two binary expansions of the same dyadic, such as `.01000…`
//! and `.00111…`, can map to different plane points, and `.01` and `.10111…`
//! both land on `−i/2`; a continuous `φ` on the line can therefore lift to a
//! discontinuous function on the tile.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::One;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Dilation, LatticeElem, RadixAddress, TileValueMap};
use crate::linalg::Matrix;
use crate::measure::CoefficientMask;
use crate::scalarfield::{QuadScalar, Rational};
use crate::transfer::one_eigenvectors;

/// `Σ γⱼ(1+i)⁻ʲ` for a binary digit string such as `".01"`.
pub fn lift_dyadic(digits: &str) -> Result<(Rational, Rational)> {
    Ok(RadixAddress::parse(Dilation::Plane, digits)?.point())
}

/// Values indexed by plane addresses of a fixed depth.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedFunction {
    pub depth: u32,
    /// One entry per address, in increasing binary order.
    pub entries: Vec<(RadixAddress, QuadScalar)>,
}

/// Re-indexes scale-`n` line values on `[0, 1)` by the same digit strings read in the plane.
pub fn lift_step_function(values: &TileValueMap) -> Result<LiftedFunction> {
    if values.dilation != Dilation::Line {
        return Err(Error::DilationMismatch("step data must live on the line".into()));
    }
    let n = values.scale;
    if n > 30 {
        return Err(Error::ResourceLimit {
            what: "lift depth",
            needed: u64::from(n),
            limit: 30,
        });
    }
    let entries = (0..1i64 << n)
        .map(|j| {
            let g = LatticeElem::int(j);
            let addr = Dilation::Line.greedy_digits(g, n).expect("0 ≤ j < 2ⁿ lies in [0, 1)");
            (addr.reinterpret(Dilation::Plane), values.get(g))
        })
        .collect();
    Ok(LiftedFunction { depth: n, entries })
}

/// `φ` on the dyadics `m/2^depth` of its support interval.
#[derive(Clone, Debug, PartialEq)]
pub struct PointValues {
    pub depth: u32,
    /// Numerator of the first stored point.
    lo: i64,
    values: Vec<QuadScalar>,
}

impl PointValues {
    /// `φ(m/2^depth)`; zero outside the support.
    pub fn at_numerator(&self, m: i64) -> QuadScalar {
        usize::try_from(m - self.lo)
            .ok()
            .and_then(|i| self.values.get(i))
            .cloned()
            .unwrap_or_default()
    }

    /// `φ(x)` when `x` is a dyadic with denominator dividing `2^depth`.
    pub fn get(&self, x: &Rational) -> Option<QuadScalar> {
        let scaled = x * Rational::from_integer(BigInt::one() << self.depth);
        scaled
            .is_integer()
            .then(|| i64::try_from(scaled.to_integer()).ok())
            .flatten()
            .map(|m| self.at_numerator(m))
    }

    pub fn to_map(&self) -> BTreeMap<Rational, QuadScalar> {
        let den = BigInt::one() << self.depth;
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (Rational::new(BigInt::from(self.lo + i as i64), den.clone()), v.clone()))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The integer point-value system `φ(i) = Σⱼ 2p_{2i−j} φ(j)` on `a ≤ i, j < b`,
/// where `[a, b]` is the digit range and `φ(b) = 0`.
pub fn integer_system(mask: &CoefficientMask) -> Result<(i64, Matrix)> {
    if mask.dilation() != Dilation::Line {
        return Err(Error::NotApplicable("point values are computed on the line".into()));
    }
    let keys: Vec<i64> = mask.support().iter().map(|k| k.re).collect();
    let (a, b) = (keys[0], *keys.last().expect("mask is nonempty"));
    if a == b {
        return Err(Error::Degenerate("single-digit mask has no continuous solution".into()));
    }
    let n = (b - a) as usize;
    let mut m = Matrix::zeros(n, n);
    let two = QuadScalar::from_int(2);
    for i in a..b {
        for j in a..b {
            m[((i - a) as usize, (j - a) as usize)] = &two * mask.coeff(LatticeElem::int(2 * i - j));
        }
    }
    Ok((a, m))
}

/// Point values by the cascade `φ(x) = 2Σ_k p_k φ(2x − k)`, seeded by the
/// integer values normalized to `Σφ(j) = 1`.
pub fn point_values(mask: &CoefficientMask, depth: u32) -> Result<PointValues> {
    let (a, system) = integer_system(mask)?;
    let b = a + system.rows() as i64;
    let basis = one_eigenvectors(&system);
    let [v] = basis.as_slice() else {
        return Err(Error::Degenerate(format!(
            "integer point-value eigenspace has dimension {}",
            basis.len()
        )));
    };
    let sum: QuadScalar = v.iter().sum();
    if sum.is_zero() {
        return Err(Error::ZeroNormalizer);
    }
    let inv = sum.inv()?;
    let count = ((b - a) as u64) << depth.min(40);
    if depth > 24 || count > 1 << 24 {
        return Err(Error::ResourceLimit {
            what: "point-value grid",
            needed: count,
            limit: 1 << 24,
        });
    }
    let mut values: Vec<QuadScalar> = v.iter().map(|x| x * &inv).collect();
    values.push(QuadScalar::zero());
    let mut level = PointValues { depth: 0, lo: a, values };
    let coeffs: Vec<(i64, QuadScalar)> = mask.coeffs().iter().map(|(k, p)| (k.re, p * QuadScalar::from_int(2))).collect();
    for l in 1..=depth {
        let half = 1i64 << (l - 1);
        let lo = a << l;
        let hi = b << l;
        let next: Vec<QuadScalar> = (lo..=hi)
            .into_par_iter()
            .map(|m| {
                if m % 2 == 0 {
                    level.at_numerator(m / 2)
                } else {
                    coeffs.iter().map(|(k, p2)| p2 * level.at_numerator(m - k * half)).sum()
                }
            })
            .collect();
        level = PointValues { depth: l, lo, values: next };
    }
    Ok(level)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscontinuityReport {
    /// `φ(1/4)`: the corner `−i/2` approached through the sub-tile `.01`.
    pub limit_along_t01: QuadScalar,
    /// `φ(3/4)`: the same corner approached through `.10111…`.
    pub limit_along_t10: QuadScalar,
    /// `φ(3/4)/φ(1/4)` when the denominator is nonzero.
    pub ratio: Option<QuadScalar>,
    pub discontinuous: bool,
}

pub fn discontinuity_probe(mask: &CoefficientMask) -> Result<DiscontinuityReport> {
    let pv = point_values(mask, 2)?;
    let t01 = pv.at_numerator(1);
    let t10 = pv.at_numerator(3);
    let ratio = (!t01.is_zero()).then(|| &t10 / &t01);
    Ok(DiscontinuityReport {
        discontinuous: t01 != t10,
        limit_along_t01: t01,
        limit_along_t10: t10,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalarfield::rational;
    use num_traits::Signed;

    fn q(s: &str) -> QuadScalar {
        s.parse().unwrap()
    }

    fn mask(d: Option<u32>, entries: &[(i64, &str)]) -> CoefficientMask {
        CoefficientMask::new(Dilation::Line, d, entries.iter().map(|(k, p)| (LatticeElem::int(*k), q(p)))).unwrap()
    }

    fn d4() -> CoefficientMask {
        mask(
            Some(3),
            &[
                (0, "1/8+1/8*sqrt(3)"),
                (1, "3/8+1/8*sqrt(3)"),
                (2, "3/8-1/8*sqrt(3)"),
                (3, "1/8-1/8*sqrt(3)"),
            ],
        )
    }

    #[test]
    fn lifted_corner() {
        assert_eq!(lift_dyadic(".01").unwrap(), (rational(0, 1), rational(-1, 2)));
        assert_eq!(lift_dyadic(".0").unwrap(), (rational(0, 1), rational(0, 1)));
        let (re, im) = lift_dyadic(&format!(".10{}", "1".repeat(40))).unwrap();
        assert!(re.abs() < rational(1, 1 << 19));
        assert!((im + rational(1, 2)).abs() < rational(1, 1 << 19));
    }

    #[test]
    fn lift_round_trip() {
        let mut values = TileValueMap::new(Dilation::Line, 4);
        for j in 0..16 {
            values.values.insert(LatticeElem::int(j), QuadScalar::from_int(j));
        }
        let lifted = lift_step_function(&values).unwrap();
        assert_eq!(lifted.entries.len(), 16);
        for (j, (addr, v)) in lifted.entries.iter().enumerate() {
            assert_eq!(addr.dilation, Dilation::Plane);
            assert_eq!(addr.reinterpret(Dilation::Line).lattice_key(), LatticeElem::int(j as i64));
            assert_eq!(*v, QuadScalar::from_int(j as i64));
        }
        let mut whole = TileValueMap::new(Dilation::Line, 0);
        whole.values.insert(LatticeElem::ZERO, QuadScalar::one());
        let lifted = lift_step_function(&whole).unwrap();
        assert_eq!(lifted.entries, vec![(RadixAddress::new(Dilation::Plane, vec![]).unwrap(), QuadScalar::one())]);
    }

    #[test]
    fn d4_point_values() {
        let pv = point_values(&d4(), 3).unwrap();
        assert_eq!(pv.get(&rational(1, 1)).unwrap(), q("1/2+1/2*sqrt(3)"));
        assert_eq!(pv.get(&rational(2, 1)).unwrap(), q("1/2-1/2*sqrt(3)"));
        assert_eq!(pv.get(&rational(1, 2)).unwrap(), q("1/2+1/4*sqrt(3)"));
        assert_eq!(pv.get(&rational(3, 2)).unwrap(), QuadScalar::zero());
        assert_eq!(pv.get(&rational(1, 4)).unwrap(), q("5/16+3/16*sqrt(3)"));
        assert!(pv.get(&rational(1, 16)).is_none());
        assert!(pv.get(&rational(7, 1)).unwrap().is_zero());
    }

    #[test]
    fn dilation_identity_at_every_dyadic() {
        let m = d4();
        let pv = point_values(&m, 5).unwrap();
        let two = QuadScalar::from_int(2);
        for (x, v) in pv.to_map() {
            let rhs: QuadScalar = m
                .coeffs()
                .iter()
                .map(|(k, p)| {
                    let y = &x * rational(2, 1) - Rational::from_integer(k.re.into());
                    &two * p * pv.get(&y).unwrap_or_default()
                })
                .sum();
            assert_eq!(v, rhs, "x = {x}");
        }
    }

    #[test]
    fn probes() {
        let r = discontinuity_probe(&d4()).unwrap();
        assert_eq!(r.ratio, Some(q("0/1+1/1*sqrt(3)")));
        assert!(r.discontinuous);
        let haar = discontinuity_probe(&mask(None, &[(0, "1/2"), (1, "1/2")])).unwrap();
        assert_eq!(haar.limit_along_t01, QuadScalar::one());
        assert_eq!(haar.limit_along_t10, QuadScalar::one());
        assert!(!haar.discontinuous);
        assert!(matches!(discontinuity_probe(&mask(None, &[(0, "1")])), Err(Error::Degenerate(_))));
    }
}
