//! Coefficient masks and discrete signed measures on `M⁻ⁿΓ`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Dilation, LatticeElem, Parity};
use crate::scalarfield::QuadScalar;

/// A finitely supported mask `{p_k}` with `Σ p_k = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientMask {
    dilation: Dilation,
    field_d: Option<u32>,
    coeffs: BTreeMap<LatticeElem, QuadScalar>,
}

impl CoefficientMask {
    /// Zero coefficients are dropped; the remaining keys are the support.
    pub fn new(
        dilation: Dilation,
        field_d: Option<u32>,
        coeffs: impl IntoIterator<Item = (LatticeElem, QuadScalar)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, p) in coeffs {
            dilation.check(k)?;
            if let Some(r) = p.radicand() {
                match field_d {
                    Some(d) if d == r => {}
                    Some(d) => return Err(Error::IncompatibleField(d, r)),
                    None => {
                        return Err(Error::InvalidMask(format!(
                            "coefficient {p} needs field_d = {r}"
                        )))
                    }
                }
            }
            if map.insert(k, p).is_some() {
                return Err(Error::InvalidMask(format!("duplicate key {k}")));
            }
        }
        map.retain(|_, p: &mut QuadScalar| !p.is_zero());
        if map.is_empty() {
            return Err(Error::InvalidMask("empty support".into()));
        }
        let total: QuadScalar = map.values().sum();
        if !total.is_one() {
            return Err(Error::InvalidMask(format!("coefficients sum to {total}, not 1")));
        }
        Ok(CoefficientMask {
            dilation,
            field_d,
            coeffs: map,
        })
    }

    pub fn dilation(&self) -> Dilation {
        self.dilation
    }

    pub fn field_d(&self) -> Option<u32> {
        self.field_d
    }

    pub fn coeffs(&self) -> &BTreeMap<LatticeElem, QuadScalar> {
        &self.coeffs
    }

    pub fn coeff(&self, k: LatticeElem) -> QuadScalar {
        self.coeffs.get(&k).cloned().unwrap_or_default()
    }

    /// The support `Γ̃`, in key order.
    pub fn support(&self) -> Vec<LatticeElem> {
        self.coeffs.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Float copy of the coefficients, for diagnostics.
    pub fn coeffs_f64(&self) -> Result<Vec<(LatticeElem, f64)>> {
        self.coeffs
            .iter()
            .map(|(k, p)| Ok((*k, p.to_f64()?)))
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MaskFile = serde_json::from_str(text)?;
        file.into_mask()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let file = MaskFile {
            dilation: self.dilation,
            field_d: self.field_d,
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, p)| MaskEntry {
                    k: k.to_string(),
                    p: p.to_string(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("mask serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskFile {
    dilation: Dilation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field_d: Option<u32>,
    coeffs: Vec<MaskEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskEntry {
    k: String,
    p: String,
}

impl MaskFile {
    fn into_mask(self) -> Result<CoefficientMask> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|e| Ok((e.k.parse()?, e.p.parse()?)))
            .collect::<Result<Vec<_>>>()?;
        CoefficientMask::new(self.dilation, self.field_d, coeffs)
    }
}

/// `Σ w(g) δ_{M⁻ⁿg}`; stored weights are nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    pub dilation: Dilation,
    pub scale: u32,
    weights: BTreeMap<LatticeElem, QuadScalar>,
}

impl DiscreteMeasure {
    pub fn new(
        dilation: Dilation,
        scale: u32,
        weights: impl IntoIterator<Item = (LatticeElem, QuadScalar)>,
    ) -> Self {
        let mut map: BTreeMap<LatticeElem, QuadScalar> = BTreeMap::new();
        for (g, w) in weights {
            *map.entry(g).or_default() += w;
        }
        map.retain(|_, w| !w.is_zero());
        DiscreteMeasure {
            dilation,
            scale,
            weights: map,
        }
    }

    pub fn delta(dilation: Dilation, scale: u32) -> Self {
        Self::new(dilation, scale, [(LatticeElem::ZERO, QuadScalar::one())])
    }

    pub fn weights(&self) -> &BTreeMap<LatticeElem, QuadScalar> {
        &self.weights
    }

    pub fn into_weights(self) -> BTreeMap<LatticeElem, QuadScalar> {
        self.weights
    }

    pub fn weight(&self, g: LatticeElem) -> QuadScalar {
        self.weights.get(&g).cloned().unwrap_or_default()
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    pub fn total_mass(&self) -> QuadScalar {
        self.weights.values().sum()
    }

    pub fn tv_norm(&self) -> QuadScalar {
        self.weights.values().map(QuadScalar::abs).sum()
    }

    pub fn sum_of_squares(&self) -> QuadScalar {
        self.weights.values().map(|w| w * w).sum()
    }

    /// Same weights viewed at a finer scale: keys multiplied by `Mᵏ`.
    pub fn rescaled(&self, scale: u32) -> DiscreteMeasure {
        assert!(scale >= self.scale, "cannot coarsen a measure");
        let k = scale - self.scale;
        DiscreteMeasure {
            dilation: self.dilation,
            scale,
            weights: self
                .weights
                .iter()
                .map(|(g, w)| (self.dilation.mul_m_pow(*g, k), w.clone()))
                .collect(),
        }
    }
}

/// `μ₁ = Σ p_k δ_{M⁻¹k}`.
pub fn mask_mu1(mask: &CoefficientMask) -> DiscreteMeasure {
    DiscreteMeasure::new(mask.dilation, 1, mask.coeffs.clone())
}

/// `D⋆μ`: every point divided by `M`. Keys are unchanged, the scale goes up.
pub fn pushforward(mu: &DiscreteMeasure) -> DiscreteMeasure {
    DiscreteMeasure {
        dilation: mu.dilation,
        scale: mu.scale + 1,
        weights: mu.weights.clone(),
    }
}

pub fn convolve(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    if mu.dilation != nu.dilation {
        return Err(Error::DilationMismatch(format!(
            "cannot convolve {} with {} measure",
            mu.dilation, nu.dilation
        )));
    }
    let scale = mu.scale.max(nu.scale);
    let (a, b) = (mu.rescaled(scale), nu.rescaled(scale));
    let mut out: BTreeMap<LatticeElem, QuadScalar> = BTreeMap::new();
    for (x, wx) in &a.weights {
        for (y, wy) in &b.weights {
            *out.entry(*x + *y).or_default() += wx * wy;
        }
    }
    Ok(DiscreteMeasure::new(mu.dilation, scale, out))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityReport {
    pub all_nonneg: bool,
    pub even_sum: QuadScalar,
    pub odd_sum: QuadScalar,
    /// Nonnegative with even and odd sums both exactly 1/2.
    pub absolutely_continuous_criterion: bool,
}

pub fn check_probability(mask: &CoefficientMask) -> ProbabilityReport {
    let all_nonneg = mask.coeffs.values().all(|p| p.signum() >= 0);
    let (mut even_sum, mut odd_sum) = (QuadScalar::zero(), QuadScalar::zero());
    for (k, p) in &mask.coeffs {
        match mask.dilation.parity(*k) {
            Parity::Even => even_sum += p,
            Parity::Odd => odd_sum += p,
        }
    }
    let half = QuadScalar::ratio(1, 2);
    let absolutely_continuous_criterion = all_nonneg && even_sum == half && odd_sum == half;
    ProbabilityReport {
        all_nonneg,
        even_sum,
        odd_sum,
        absolutely_continuous_criterion,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalityReport {
    /// `(i, Σ_k p_k p_{k+Mi})` for every shift with `|Mi| ≤ diam Γ̃`.
    pub shifts: Vec<(LatticeElem, QuadScalar)>,
    pub pass: bool,
}

fn support_diameter_sqr(support: &[LatticeElem]) -> i128 {
    support
        .iter()
        .flat_map(|a| support.iter().map(move |b| (*a - *b).norm_sqr()))
        .max()
        .unwrap_or(0)
}

/// Checks `Σ_k p_k p_{k+Mi} = δ_{0i}/2` on every shift that can be nonzero.
pub fn check_orthonormality(mask: &CoefficientMask) -> OrthonormalityReport {
    let dil = mask.dilation;
    let support = mask.support();
    let diam_sqr = support_diameter_sqr(&support);
    let m_sqr = i128::from(dil.norm_sqr());
    let r = ((diam_sqr / m_sqr) as f64).sqrt().ceil() as i64 + 1;
    let mut shifts = BTreeSet::new();
    for re in -r..=r {
        let ims = if dil == Dilation::Plane { -r..=r } else { 0..=0 };
        for im in ims {
            let i = LatticeElem::new(re, im);
            if i.norm_sqr() * m_sqr <= diam_sqr {
                shifts.insert(i);
            }
        }
    }
    let half = QuadScalar::ratio(1, 2);
    let mut pass = true;
    let shifts = shifts
        .into_iter()
        .map(|i| {
            let step = dil.mul_m(i);
            let sum: QuadScalar = mask
                .coeffs
                .iter()
                .map(|(k, p)| p * mask.coeff(*k + step))
                .sum();
            let expected = if i.is_zero() { half.clone() } else { QuadScalar::zero() };
            pass &= sum == expected;
            (i, sum)
        })
        .collect();
    OrthonormalityReport { shifts, pass }
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

    fn d4() -> CoefficientMask {
        CoefficientMask::from_json(
            r#"{"dilation":"line","field_d":3,"coeffs":[
                {"k":"0","p":"1/8+1/8*sqrt(3)"},{"k":"1","p":"3/8+1/8*sqrt(3)"},
                {"k":"2","p":"3/8-1/8*sqrt(3)"},{"k":"3","p":"1/8-1/8*sqrt(3)"}]}"#,
        )
        .unwrap()
    }

    fn simple(dil: Dilation, entries: &[(&str, i64, i64)]) -> CoefficientMask {
        CoefficientMask::new(
            dil,
            None,
            entries.iter().map(|(k, n, d)| (g(k), QuadScalar::ratio(*n, *d))),
        )
        .unwrap()
    }

    #[test]
    fn mask_validation() {
        assert!(matches!(
            CoefficientMask::new(Dilation::Line, None, [(g("0"), q("1/2"))]),
            Err(Error::InvalidMask(_))
        ));
        assert!(CoefficientMask::new(Dilation::Line, None, []).is_err());
        assert!(CoefficientMask::new(Dilation::Line, None, [(g("i"), q("1"))]).is_err());
        assert!(CoefficientMask::new(Dilation::Line, None, [(g("0"), q("1/2+1/2*sqrt(3)")), (g("1"), q("1/2-1/2*sqrt(3)"))]).is_err());
        assert!(CoefficientMask::from_json(r#"{"dilation":"line","coeffs":[{"k":"0","p":"1"}],"extra":1}"#).is_err());
        let m = simple(Dilation::Line, &[("0", 1, 1), ("5", 0, 1)]);
        assert_eq!(m.support(), vec![g("0")]);
    }

    #[test]
    fn json_round_trip() {
        let m = d4();
        assert_eq!(CoefficientMask::from_json(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn mu1_examples() {
        let mu = mask_mu1(&d4());
        assert_eq!(mu.scale, 1);
        assert_eq!(mu.weight(g("0")), q("1/8+1/8*sqrt(3)"));
        assert_eq!(mu.weight(g("3")), q("1/8-1/8*sqrt(3)"));
        assert!(mu.total_mass().is_one());
        let delta = mask_mu1(&simple(Dilation::Line, &[("0", 1, 1)]));
        assert_eq!(delta, DiscreteMeasure::delta(Dilation::Line, 1));
        let haar = mask_mu1(&simple(Dilation::Line, &[("0", 1, 2), ("1", 1, 2)]));
        assert_eq!(haar.support_len(), 2);
    }

    #[test]
    fn pushforward_examples() {
        let d = DiscreteMeasure::delta(Dilation::Plane, 3);
        assert_eq!(pushforward(&d).weights(), d.weights());
        let mu = DiscreteMeasure::new(Dilation::Line, 1, [(g("2"), q("1"))]);
        let pushed = pushforward(&mu);
        assert_eq!(pushed.scale, 2);
        assert_eq!(pushed.weight(g("2")), q("1"));
        assert_eq!(pushed.total_mass(), mu.total_mass());
    }

    #[test]
    fn convolve_examples() {
        let haar = mask_mu1(&simple(Dilation::Line, &[("0", 1, 2), ("1", 1, 2)]));
        let id = DiscreteMeasure::delta(Dilation::Line, 0);
        assert_eq!(convolve(&haar, &id).unwrap(), haar);
        // points 0, 1/4, 1/2, 3/4 at scale 2, each 1/4
        let two = convolve(&haar, &pushforward(&haar)).unwrap();
        assert_eq!(two.scale, 2);
        let expect: BTreeMap<_, _> = (0..4).map(|k| (LatticeElem::int(k), q("1/4"))).collect();
        assert_eq!(two.weights(), &expect);
        let plane = DiscreteMeasure::delta(Dilation::Plane, 0);
        assert!(convolve(&haar, &plane).is_err());
    }

    #[test]
    fn norms() {
        let mu = mask_mu1(&d4());
        assert_eq!(mu.tv_norm(), q("3/4+1/4*sqrt(3)"));
        assert!(mu.total_mass().is_one());
        assert_eq!(mu.sum_of_squares(), q("1/2"));
        let probs = mask_mu1(&simple(Dilation::Plane, &[("0", 1, 2), ("1", 1, 4), ("i", 1, 4)]));
        assert!(probs.tv_norm().is_one());
    }

    #[test]
    fn probability_examples() {
        let r = check_probability(&simple(Dilation::Plane, &[("0", 1, 2), ("1", 1, 4), ("i", 1, 4)]));
        assert_eq!((r.even_sum.clone(), r.odd_sum.clone()), (q("1/2"), q("1/2")));
        assert!(r.absolutely_continuous_criterion);
        let r = check_probability(&simple(Dilation::Line, &[("0", 1, 1)]));
        assert_eq!((r.even_sum.clone(), r.odd_sum.clone()), (q("1"), q("0")));
        assert!(!r.absolutely_continuous_criterion);
        let r = check_probability(&d4());
        assert!(!r.all_nonneg);
        assert!(!r.absolutely_continuous_criterion);
    }

    #[test]
    fn orthonormality_examples() {
        let r = check_orthonormality(&d4());
        assert!(r.pass);
        assert!(r.shifts.contains(&(g("0"), q("1/2"))));
        assert!(r.shifts.contains(&(g("1"), q("0"))));
        let lift = CoefficientMask::new(
            Dilation::Plane,
            Some(3),
            [
                (g("0"), q("1/8+1/8*sqrt(3)")),
                (g("1"), q("3/8+1/8*sqrt(3)")),
                (g("1+i"), q("3/8-1/8*sqrt(3)")),
                (g("2+i"), q("1/8-1/8*sqrt(3)")),
            ],
        )
        .unwrap();
        assert!(check_orthonormality(&lift).pass);
        let haar = check_orthonormality(&simple(Dilation::Line, &[("0", 1, 2), ("1", 1, 2)]));
        assert!(haar.pass);
        assert_eq!(haar.shifts, vec![(g("0"), q("1/2"))]);
        let hat = check_orthonormality(&simple(Dilation::Line, &[("0", 1, 4), ("1", 1, 2), ("2", 1, 4)]));
        assert!(!hat.pass);
        assert!(hat.shifts.contains(&(g("0"), q("3/8"))));
    }

    fn small_measure(dil: Dilation) -> impl Strategy<Value = DiscreteMeasure> {
        let key = if dil == Dilation::Plane {
            (-3i64..4, -3i64..4).prop_map(|(a, b)| LatticeElem::new(a, b)).boxed()
        } else {
            (-3i64..4).prop_map(LatticeElem::int).boxed()
        };
        (
            0u32..3,
            prop::collection::vec((key, -4i64..5, -3i64..4, 1i64..5), 1..5),
        )
            .prop_map(move |(scale, entries)| {
                DiscreteMeasure::new(
                    dil,
                    scale,
                    entries
                        .into_iter()
                        .map(|(k, a, b, den)| (k, QuadScalar::small(a, b, den, 3).unwrap())),
                )
            })
    }

    proptest! {
        #[test]
        fn mass_is_multiplicative(mu in small_measure(Dilation::Plane), nu in small_measure(Dilation::Plane)) {
            let c = convolve(&mu, &nu).unwrap();
            prop_assert_eq!(c.total_mass(), mu.total_mass() * nu.total_mass());
            prop_assert_eq!(pushforward(&mu).total_mass(), mu.total_mass());
        }

        #[test]
        fn tv_is_submultiplicative(mu in small_measure(Dilation::Line), nu in small_measure(Dilation::Line)) {
            let c = convolve(&mu, &nu).unwrap();
            prop_assert!(c.tv_norm() <= mu.tv_norm() * nu.tv_norm());
        }
    }
}
