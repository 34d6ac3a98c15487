//! Tile values at finer scales: `μ(M⁻ⁿ(g+T))` for every `n`.
//!
//! Starting from the tile measures solved at scale 0, one step is
//! `value_{n+1}(g) = Σ_k p_k · value_n(g − Mⁿk)`. Keys are discovered by
//! pushing forward from the nonzero values, so nothing outside the support
//! is ever enumerated.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::cascade::FloatMeasure;
use crate::error::{Error, Result};
use crate::lattice::{Dilation, LatticeElem, TileValueMap};
use crate::measure::CoefficientMask;
use crate::scalarfield::QuadScalar;
use crate::transfer::{build_matrix, one_eigenvectors, TileSystem, TransferMatrix};

/// Scale-0 values from an eigenvector indexed by `tiles`.
pub fn base_values(tiles: &TileSystem, v: &[QuadScalar]) -> TileValueMap {
    let mut map = TileValueMap::new(tiles.dilation, 0);
    for (z, x) in tiles.translates().iter().zip(v) {
        if !x.is_zero() {
            map.values.insert(*z, x.clone());
        }
    }
    map
}

pub fn refine_step(mask: &CoefficientMask, values: &TileValueMap) -> Result<TileValueMap> {
    if values.dilation != mask.dilation() {
        return Err(Error::DilationMismatch(format!(
            "values on {}, mask on {}",
            values.dilation,
            mask.dilation()
        )));
    }
    let dil = values.dilation;
    let shifts: Vec<(LatticeElem, &QuadScalar)> = mask
        .coeffs()
        .iter()
        .map(|(k, p)| (dil.mul_m_pow(*k, values.scale), p))
        .collect();
    let prev: Vec<(&LatticeElem, &QuadScalar)> = values.values.iter().collect();
    let merged = prev
        .par_chunks(4096)
        .map(|chunk| {
            let mut acc: HashMap<LatticeElem, QuadScalar> = HashMap::new();
            for (h, v) in chunk {
                for (shift, p) in &shifts {
                    *acc.entry(**h + *shift).or_default() += *p * *v;
                }
            }
            acc
        })
        .reduce(HashMap::new, |a, b| {
            let (small, mut large) = if a.len() < b.len() { (a, b) } else { (b, a) };
            for (g, w) in small {
                *large.entry(g).or_default() += w;
            }
            large
        });
    let mut next = TileValueMap::new(dil, values.scale + 1);
    next.values = merged.into_iter().filter(|(_, v)| !v.is_zero()).collect();
    Ok(next)
}

/// Values at scales `base.scale + 1, …, base.scale + depth`.
pub fn refine_values(mask: &CoefficientMask, base: &TileValueMap, depth: u32) -> Result<Vec<TileValueMap>> {
    let mut out: Vec<TileValueMap> = Vec::with_capacity(depth as usize);
    for _ in 0..depth {
        let next = refine_step(mask, out.last().unwrap_or(base))?;
        out.push(next);
    }
    Ok(out)
}

/// `value · 2ⁿ`; every scale-`n` tile has Lebesgue measure `2⁻ⁿ`.
pub fn density_step(values: &TileValueMap) -> Result<BTreeMap<LatticeElem, f64>> {
    let area = 2f64.powi(values.scale as i32);
    values.values.iter().map(|(g, v)| Ok((*g, v.to_f64()? * area))).collect()
}

/// Sums the weights of a floating `μₙ` over scale-`scale` tiles, assigning
/// each point to the tile given by its canonical digits.
pub fn cascade_tile_masses(mu: &FloatMeasure, scale: u32) -> Result<BTreeMap<LatticeElem, f64>> {
    if scale > mu.scale {
        return Err(Error::NotApplicable(format!(
            "tile scale {scale} exceeds cascade depth {}",
            mu.scale
        )));
    }
    let mut out = BTreeMap::new();
    for (g, w) in &mu.weights {
        *out.entry(mu.dilation.split_tile(*g, mu.scale - scale).0).or_insert(0.0) += w;
    }
    Ok(out)
}

/// The line system on half-open tiles `(z, z+1]`, `z = −1, …, K−1`.
#[derive(Clone, Debug)]
pub struct HalfOpenReport {
    pub system: TransferMatrix,
    /// Dimension of the 1-eigenspace.
    pub dimension: usize,
    /// The sum-normalized solution when the eigenspace is a line with nonzero sum.
    pub vector: Option<Vec<QuadScalar>>,
    /// `μ(−1, 0]` from `vector`.
    pub extra: Option<QuadScalar>,
    /// Every 1-eigenvector vanishes on `(−1, 0]`.
    pub forced_zero: bool,
    /// A unique probability-normalized solution exists.
    pub consistent: bool,
}

/// For a line mask with digits in `{0, …, K}` the measure lives on `[0, K]`,
/// which the half-open tiles `(−1,0], (0,1], …, (K−1,K]` cover exactly.
pub fn halfopen_consistency(mask: &CoefficientMask) -> Result<HalfOpenReport> {
    if mask.dilation() != Dilation::Line {
        return Err(Error::NotApplicable("half-open tiles are defined on the line only".into()));
    }
    let support = mask.support();
    if support.iter().any(|k| k.re < 0) {
        return Err(Error::NotApplicable("mask has negative digits".into()));
    }
    let k_max = support.iter().map(|k| k.re).max().unwrap_or(0);
    let tiles = TileSystem::new(Dilation::Line, (-1..k_max.max(0)).map(LatticeElem::int).collect())?;
    let alive = tiles.as_set();
    let (system, warnings) = build_matrix(&tiles, mask, Some(&alive))?;
    debug_assert!(warnings.is_empty());
    let basis = one_eigenvectors(&system.matrix);
    let forced_zero = basis.iter().all(|v| v[0].is_zero());
    let vector = match basis.as_slice() {
        [v] => {
            let sum: QuadScalar = v.iter().sum();
            (!sum.is_zero())
                .then(|| sum.inv().map(|inv| v.iter().map(|x| x * &inv).collect::<Vec<_>>()))
                .transpose()?
        }
        _ => None,
    };
    Ok(HalfOpenReport {
        dimension: basis.len(),
        extra: vector.as_ref().map(|v| v[0].clone()),
        consistent: vector.is_some(),
        vector,
        forced_zero,
        system,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(s: &str) -> QuadScalar {
        s.parse().unwrap()
    }

    fn g(s: &str) -> LatticeElem {
        s.parse().unwrap()
    }

    fn mask(dil: Dilation, d: Option<u32>, entries: &[(&str, &str)]) -> CoefficientMask {
        CoefficientMask::new(dil, d, entries.iter().map(|(k, p)| (g(k), q(p)))).unwrap()
    }

    fn d4() -> CoefficientMask {
        mask(
            Dilation::Line,
            Some(3),
            &[
                ("0", "1/8+1/8*sqrt(3)"),
                ("1", "3/8+1/8*sqrt(3)"),
                ("2", "3/8-1/8*sqrt(3)"),
                ("3", "1/8-1/8*sqrt(3)"),
            ],
        )
    }

    fn d4_base() -> TileValueMap {
        let tiles = TileSystem::new(Dilation::Line, vec![g("0"), g("1"), g("2")]).unwrap();
        base_values(&tiles, &[q("5/12+1/4*sqrt(3)"), q("1/6"), q("5/12-1/4*sqrt(3)")])
    }

    #[test]
    fn d4_scale_one() {
        let scales = refine_values(&d4(), &d4_base(), 1).unwrap();
        let got: Vec<f64> = (0..6).map(|j| scales[0].get(LatticeElem::int(j)).to_f64().unwrap()).collect();
        let expected = [0.290170901, 0.559508468, 0.227670901, -0.061004234, -0.017841801, 0.001495766];
        for (a, b) in got.iter().zip(expected) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        let density = density_step(&scales[0]).unwrap();
        assert!((density[&g("0")] - 0.580341802).abs() < 1e-8);
    }

    #[test]
    fn haar_plane_halves() {
        let haar = mask(Dilation::Plane, None, &[("0", "1/2"), ("1", "1/2")]);
        let mut base = TileValueMap::new(Dilation::Plane, 0);
        base.values.insert(LatticeElem::ZERO, QuadScalar::one());
        for v in refine_values(&haar, &base, 6).unwrap() {
            assert_eq!(v.len(), 1 << v.scale);
            assert!(v.values.values().all(|x| *x == QuadScalar::ratio(1, 1 << v.scale)));
            assert!(density_step(&v).unwrap().values().all(|d| *d == 1.0));
        }
    }

    #[test]
    fn halfopen_examples() {
        let r = halfopen_consistency(&d4()).unwrap();
        assert!(r.forced_zero && r.consistent);
        assert_eq!(r.system.tiles.translates()[0], g("-1"));
        assert!(r.extra.unwrap().is_zero());

        let delta = mask(Dilation::Line, None, &[("0", "1")]);
        let r = halfopen_consistency(&delta).unwrap();
        assert_eq!(r.vector, Some(vec![QuadScalar::one()]));
        assert!(!r.forced_zero);

        let uniform = mask(Dilation::Line, None, &[("0", "1/2"), ("1", "1/2")]);
        let r = halfopen_consistency(&uniform).unwrap();
        assert_eq!(r.vector, Some(vec![QuadScalar::zero(), QuadScalar::one()]));

        let plane = mask(Dilation::Plane, None, &[("0", "1")]);
        assert!(matches!(halfopen_consistency(&plane), Err(Error::NotApplicable(_))));
    }

    proptest! {
        #[test]
        fn mass_is_conserved(p0 in -8i64..9, p1 in -8i64..9, depth in 1u32..7) {
            let p2 = 8 - p0 - p1;
            let m = CoefficientMask::new(
                Dilation::Line,
                None,
                [(0, p0), (1, p1), (2, p2)].map(|(k, p)| (LatticeElem::int(k), QuadScalar::ratio(p, 8))),
            );
            prop_assume!(m.is_ok());
            let m = m.unwrap();
            let base = d4_base();
            for v in refine_values(&m, &base, depth).unwrap() {
                prop_assert_eq!(v.total(), base.total());
            }
        }

        #[test]
        fn first_step_is_the_dilation_identity(j in -1i64..8) {
            // f = 2Σ p_k f(2x − k) on each half-interval
            let m = d4();
            let base = d4_base();
            let d1 = density_step(&refine_step(&m, &base).unwrap()).unwrap();
            let d0 = density_step(&base).unwrap();
            let rhs: f64 = m
                .coeffs_f64()
                .unwrap()
                .iter()
                .map(|(k, p)| 2.0 * p * d0.get(&(LatticeElem::int(j) - *k)).copied().unwrap_or(0.0))
                .sum();
            prop_assert!((d1.get(&LatticeElem::int(j)).copied().unwrap_or(0.0) - rhs).abs() < 1e-12);
        }
    }
}
