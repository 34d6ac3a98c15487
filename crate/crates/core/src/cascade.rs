//! Discrete approximants `μₙ = μ₁ ⋆ D⋆μ₁ ⋆ … ⋆ D⋆ⁿ⁻¹μ₁`.
//!
//! [`iterate`] uses the one-step recursion `μₙ[M·g + k] += p_k·μₙ₋₁[g]`,
//! which is linear in the support per level. [`enumerate_oracle`] instead
//! sums `∏ p_{γ̃ⱼ}` over every digit tuple and exists only to check it.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Dilation, LatticeElem};
use crate::measure::{check_orthonormality, check_probability, CoefficientMask, DiscreteMeasure};
use crate::scalarfield::{QuadScalar, Rational};

/// Caps on work; exceeding one is an error, never a silent truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Maximum number of support points in a single `μₙ` or `Sₙ`.
    pub max_support: usize,
    /// Maximum `|Γ̃|ⁿ` for the brute-force oracle.
    pub max_tuples: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_support: 4_000_000,
            max_tuples: 1_000_000,
        }
    }
}

impl Limits {
    fn check_support(&self, what: &'static str, needed: usize) -> Result<()> {
        if needed > self.max_support {
            return Err(Error::ResourceLimit {
                what,
                needed: needed as u64,
                limit: self.max_support as u64,
            });
        }
        Ok(())
    }
}

/// Steps through `μ₀ = δ₀, μ₁, μ₂, …`.
pub struct Cascade<'a> {
    mask: &'a CoefficientMask,
    limits: Limits,
    current: DiscreteMeasure,
}

impl<'a> Cascade<'a> {
    pub fn new(mask: &'a CoefficientMask, limits: Limits) -> Self {
        Cascade {
            mask,
            limits,
            current: DiscreteMeasure::delta(mask.dilation(), 0),
        }
    }

    pub fn current(&self) -> &DiscreteMeasure {
        &self.current
    }

    pub fn step(&mut self) -> Result<&DiscreteMeasure> {
        let dil = self.mask.dilation();
        let coeffs: Vec<(LatticeElem, QuadScalar)> =
            self.mask.coeffs().iter().map(|(k, p)| (*k, p.clone())).collect();
        let prev: Vec<(&LatticeElem, &QuadScalar)> = self.current.weights().iter().collect();
        // Each previous point spawns at most |Γ̃| new ones.
        let worst = prev.len().saturating_mul(coeffs.len());
        if worst > self.limits.max_support {
            let distinct = support_step(dil, prev.iter().map(|(g, _)| **g), &coeffs);
            self.limits.check_support("cascade support", distinct)?;
        }
        let merged = prev
            .par_chunks(4096)
            .map(|chunk| {
                let mut acc: HashMap<LatticeElem, QuadScalar> = HashMap::new();
                for (g, w) in chunk {
                    let base = dil.mul_m(**g);
                    for (k, p) in &coeffs {
                        *acc.entry(base + *k).or_default() += *w * p;
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
        self.limits.check_support("cascade support", merged.len())?;
        self.current = DiscreteMeasure::new(dil, self.current.scale + 1, merged);
        Ok(&self.current)
    }
}

fn support_step(
    dil: Dilation,
    prev: impl Iterator<Item = LatticeElem>,
    coeffs: &[(LatticeElem, QuadScalar)],
) -> usize {
    let mut seen = HashSet::new();
    for g in prev {
        let base = dil.mul_m(g);
        for (k, _) in coeffs {
            seen.insert(base + *k);
        }
    }
    seen.len()
}

/// `μₙ`, exactly. `n = 0` gives `δ₀`.
pub fn iterate(mask: &CoefficientMask, n: u32) -> Result<DiscreteMeasure> {
    iterate_with(mask, n, Limits::default())
}

pub fn iterate_with(mask: &CoefficientMask, n: u32, limits: Limits) -> Result<DiscreteMeasure> {
    let mut cascade = Cascade::new(mask, limits);
    for _ in 0..n {
        cascade.step()?;
    }
    Ok(cascade.current)
}

/// Floating-point `μₙ` for diagnostics that need large `n`.
#[derive(Clone, Debug)]
pub struct FloatMeasure {
    pub dilation: Dilation,
    pub scale: u32,
    pub weights: BTreeMap<LatticeElem, f64>,
}

impl FloatMeasure {
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.weights
            .iter()
            .map(|(g, w)| {
                let (x, y) = self.dilation.point_at_scale_f64(*g, self.scale);
                w * f(x, y)
            })
            .sum()
    }
}

/// Sequential so that sums happen in key order and results are reproducible.
pub fn iterate_f64(mask: &CoefficientMask, n: u32, limits: Limits) -> Result<FloatMeasure> {
    let dil = mask.dilation();
    let coeffs = mask.coeffs_f64()?;
    let mut weights: BTreeMap<LatticeElem, f64> = BTreeMap::from([(LatticeElem::ZERO, 1.0)]);
    for _ in 0..n {
        let mut next: BTreeMap<LatticeElem, f64> = BTreeMap::new();
        for (g, w) in &weights {
            let base = dil.mul_m(*g);
            for (k, p) in &coeffs {
                *next.entry(base + *k).or_insert(0.0) += w * p;
            }
        }
        limits.check_support("float cascade support", next.len())?;
        weights = next;
    }
    Ok(FloatMeasure {
        dilation: dil,
        scale: n,
        weights,
    })
}

/// `Sₙ = {Σⱼ Mⁿ⁻ʲγ̃ⱼ}` as scale-`n` keys, including points whose weight cancels.
pub fn support_points(mask: &CoefficientMask, n: u32) -> Result<BTreeSet<LatticeElem>> {
    support_points_with(mask, n, Limits::default())
}

pub fn support_points_with(mask: &CoefficientMask, n: u32, limits: Limits) -> Result<BTreeSet<LatticeElem>> {
    Ok(support_levels(mask, n, limits)?.pop().expect("level 0 is always present"))
}

/// `[S₀, S₁, …, Sₙ]`.
pub fn support_levels(mask: &CoefficientMask, n: u32, limits: Limits) -> Result<Vec<BTreeSet<LatticeElem>>> {
    let dil = mask.dilation();
    let digits = mask.support();
    let mut levels = vec![BTreeSet::from([LatticeElem::ZERO])];
    for _ in 0..n {
        let prev = levels.last().unwrap();
        let next: HashSet<LatticeElem> = prev
            .iter()
            .flat_map(|g| {
                let base = dil.mul_m(*g);
                digits.iter().map(move |k| base + *k)
            })
            .collect();
        limits.check_support("support set", next.len())?;
        levels.push(next.into_iter().collect());
    }
    Ok(levels)
}

/// `R = max|γ̃| / (|M| − 1)`; every `Sₙ` lies in the closed ball of radius `R`.
pub fn support_radius(mask: &CoefficientMask) -> f64 {
    let dil = mask.dilation();
    max_norm_sqr(mask).sqrt() / (dil.norm() - 1.0)
}

fn max_norm_sqr(mask: &CoefficientMask) -> f64 {
    mask.coeffs().keys().map(|k| k.norm_sqr()).max().unwrap_or(0) as f64
}

/// Exact test of `|M⁻ⁿg| ≤ R`.
pub fn within_support_radius(mask: &CoefficientMask, g: LatticeElem, n: u32) -> bool {
    let m2 = mask.coeffs().keys().map(|k| k.norm_sqr()).max().unwrap_or(0);
    match mask.dilation() {
        // |g|/2ⁿ ≤ m  ⇔  |g|² ≤ m²·4ⁿ
        Dilation::Line => g.norm_sqr() <= m2 << (2 * n),
        // |g|²/2ⁿ ≤ m²/(√2−1)² = m²(3+2√2)
        Dilation::Plane => {
            let lhs = QuadScalar::from_rational(Rational::new(g.norm_sqr().into(), num_bigint::BigInt::from(1) << n));
            let m2 = i64::try_from(m2).expect("mask keys are small");
            let rhs = QuadScalar::small(3 * m2, 2 * m2, 1, 2).expect("sqrt(2) is square-free");
            lhs <= rhs
        }
    }
}

/// Brute force: `wₙ(x) = Σ_{Λₙ(x)} ∏ⱼ p_{γ̃ⱼ}` over all `|Γ̃|ⁿ` digit tuples.
pub fn enumerate_oracle(mask: &CoefficientMask, n: u32) -> Result<DiscreteMeasure> {
    enumerate_oracle_with(mask, n, Limits::default())
}

pub fn enumerate_oracle_with(mask: &CoefficientMask, n: u32, limits: Limits) -> Result<DiscreteMeasure> {
    let dil = mask.dilation();
    let digits: Vec<(LatticeElem, QuadScalar)> = mask.coeffs().iter().map(|(k, p)| (*k, p.clone())).collect();
    let tuples = (digits.len() as u64).checked_pow(n).unwrap_or(u64::MAX);
    if tuples > limits.max_tuples {
        return Err(Error::ResourceLimit {
            what: "oracle digit tuples",
            needed: tuples,
            limit: limits.max_tuples,
        });
    }
    if n == 0 {
        return Ok(DiscreteMeasure::delta(dil, 0));
    }

    fn walk(
        dil: Dilation,
        digits: &[(LatticeElem, QuadScalar)],
        remaining: u32,
        key: LatticeElem,
        prod: &QuadScalar,
        out: &mut HashMap<LatticeElem, QuadScalar>,
    ) {
        if remaining == 0 {
            *out.entry(key).or_default() += prod;
            return;
        }
        for (k, p) in digits {
            walk(dil, digits, remaining - 1, dil.mul_m(key) + *k, &(prod * p), out);
        }
    }

    // Split on the first digit γ̃₁.
    let partials: Vec<HashMap<LatticeElem, QuadScalar>> = digits
        .par_iter()
        .map(|(k, p)| {
            let mut out = HashMap::new();
            walk(dil, &digits, n - 1, *k, p, &mut out);
            out
        })
        .collect();
    let mut merged: BTreeMap<LatticeElem, QuadScalar> = BTreeMap::new();
    for part in partials {
        for (g, w) in part {
            *merged.entry(g).or_default() += w;
        }
    }
    Ok(DiscreteMeasure::new(dil, n, merged))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundsCheck {
    pub n: u32,
    pub pass: bool,
    /// Key and weight of the largest weight, or of the first violation.
    pub worst: (LatticeElem, QuadScalar),
}

/// `0 ≤ wₙ(x) ≤ 2⁻ⁿ` for `n = 1..=n_max`; requires the probability criterion.
pub fn verify_prob_bounds(mask: &CoefficientMask, n_max: u32) -> Result<Vec<BoundsCheck>> {
    if !check_probability(mask).absolutely_continuous_criterion {
        return Err(Error::NotApplicable(
            "mask is not nonnegative with even and odd sums 1/2".into(),
        ));
    }
    let mut cascade = Cascade::new(mask, Limits::default());
    let mut out = Vec::new();
    for n in 1..=n_max {
        let mu = cascade.step()?;
        let cap = QuadScalar::from_rational(Rational::new(1.into(), num_bigint::BigInt::from(1) << n));
        let violation = mu
            .weights()
            .iter()
            .find(|(_, w)| w.signum() < 0 || **w > cap);
        let check = match violation {
            Some((g, w)) => BoundsCheck {
                n,
                pass: false,
                worst: (*g, w.clone()),
            },
            None => {
                let (g, w) = mu
                    .weights()
                    .iter()
                    .fold(None::<(&LatticeElem, &QuadScalar)>, |best, (g, w)| match best {
                        Some((_, bw)) if bw >= w => best,
                        _ => Some((g, w)),
                    })
                    .expect("μₙ has mass 1");
                BoundsCheck {
                    n,
                    pass: true,
                    worst: (*g, w.clone()),
                }
            }
        };
        out.push(check);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SumSquaresCheck {
    pub n: u32,
    pub sum: QuadScalar,
    pub pass: bool,
}

/// `Σₓ wₙ(x)² = 2⁻ⁿ` for `n = 1..=n_max`; requires the orthonormality conditions.
pub fn verify_sum_squares(mask: &CoefficientMask, n_max: u32) -> Result<Vec<SumSquaresCheck>> {
    if !check_orthonormality(mask).pass {
        return Err(Error::NotApplicable("mask fails the orthonormality conditions".into()));
    }
    let mut cascade = Cascade::new(mask, Limits::default());
    let mut out = Vec::new();
    for n in 1..=n_max {
        let sum = cascade.step()?.sum_of_squares();
        let expect = QuadScalar::from_rational(Rational::new(1.into(), num_bigint::BigInt::from(1) << n));
        out.push(SumSquaresCheck {
            n,
            pass: sum == expect,
            sum,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TvRow {
    pub n: u32,
    pub card_support: usize,
    pub tv: QuadScalar,
    /// `card(Sₙ)/2ⁿ`, the square of the Cauchy–Schwarz bound.
    pub bound_sqr: Rational,
    /// `TV(μₙ) ≤ √(card(Sₙ)/2ⁿ)`, decided exactly.
    pub within_bound: bool,
}

impl TvRow {
    pub fn bound(&self) -> f64 {
        QuadScalar::from_rational(self.bound_sqr.clone())
            .to_f64()
            .map(f64::sqrt)
            .unwrap_or(f64::INFINITY)
    }
}

pub fn tv_profile(mask: &CoefficientMask, n_max: u32) -> Result<Vec<TvRow>> {
    let limits = Limits::default();
    let levels = support_levels(mask, n_max, limits)?;
    let mut cascade = Cascade::new(mask, limits);
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let tv = cascade.step()?.tv_norm();
        let card = levels[n as usize].len();
        let bound_sqr = Rational::new(card.into(), num_bigint::BigInt::from(1) << n);
        let within_bound = &tv * &tv <= QuadScalar::from_rational(bound_sqr.clone());
        rows.push(TvRow {
            n,
            card_support: card,
            tv,
            bound_sqr,
            within_bound,
        });
    }
    Ok(rows)
}

/// A named test function for [`convergence_probe`].
pub struct TestFunction {
    pub name: String,
    f: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl TestFunction {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }
}

/// The probe family: the constant 1, the coordinates `x` and `y`, and
/// Gaussian bumps of width `R/2` centred at `0`, `R/2` and `i·R/2`.
pub fn probe_family(mask: &CoefficientMask) -> Vec<TestFunction> {
    let r = support_radius(mask).max(1.0);
    let width = r / 2.0;
    let mut fams: Vec<TestFunction> = vec![
        TestFunction {
            name: "one".into(),
            f: Box::new(|_, _| 1.0),
        },
        TestFunction {
            name: "x".into(),
            f: Box::new(|x, _| x),
        },
        TestFunction {
            name: "y".into(),
            f: Box::new(|_, y| y),
        },
    ];
    for (label, cx, cy) in [("bump(0)", 0.0, 0.0), ("bump(R/2)", r / 2.0, 0.0), ("bump(iR/2)", 0.0, r / 2.0)] {
        fams.push(TestFunction {
            name: label.into(),
            f: Box::new(move |x, y| {
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                (-d2 / (2.0 * width * width)).exp()
            }),
        });
    }
    fams
}

#[derive(Clone, Debug)]
pub struct ProbeRow {
    pub n: u32,
    /// `|∫f dμₙ − ∫f dμₙ₊₁|`, one per test function.
    pub gaps: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ProbeTable {
    pub functions: Vec<String>,
    pub rows: Vec<ProbeRow>,
}

/// Floating gaps `|∫f dμₙ − ∫f dμₙ₋₁|`; a diagnostic, nothing is asserted.
pub fn convergence_probe(mask: &CoefficientMask, n_max: u32, limits: Limits) -> Result<ProbeTable> {
    let family = probe_family(mask);
    let integrals = |mu: &FloatMeasure| -> Vec<f64> {
        family.iter().map(|t| mu.integrate(|x, y| t.eval(x, y))).collect()
    };
    let dil = mask.dilation();
    let coeffs = mask.coeffs_f64()?;
    let mut mu = iterate_f64(mask, 0, limits)?;
    let mut prev = integrals(&mu);
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let mut next: BTreeMap<LatticeElem, f64> = BTreeMap::new();
        for (g, w) in &mu.weights {
            let base = dil.mul_m(*g);
            for (k, p) in &coeffs {
                *next.entry(base + *k).or_insert(0.0) += w * p;
            }
        }
        limits.check_support("float cascade support", next.len())?;
        mu = FloatMeasure {
            dilation: dil,
            scale: n,
            weights: next,
        };
        let cur = integrals(&mu);
        rows.push(ProbeRow {
            n,
            gaps: prev.iter().zip(&cur).map(|(a, b)| (a - b).abs()).collect(),
        });
        prev = cur;
    }
    Ok(ProbeTable {
        functions: family.into_iter().map(|t| t.name).collect(),
        rows,
    })
}
