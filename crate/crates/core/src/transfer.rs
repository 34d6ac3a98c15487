//! Tile translates and the linear system they satisfy.
//!
//! Writing `μ` for the self-similar measure and `T` for the base tile, the
//! dilation equation gives
//! `μ(z+T) = Σ_k p_k [μ(Mz−k+T) + μ(Mz−k+1+T)]`. Restricted to the finitely
//! many translates that can carry mass, this is a square system `A·v = v`.
//!
//! The translate set is found in three passes:
//!
//! 1. [`candidate_translates`] bounds `|z|` from above,
//! 2. [`push_out`] discards translates whose dependencies are all known zero,
//! 3. [`observed_translates`] reads off tiles hit by a finite `Sₙ`.
//!
//! Survivors of (2) that are not observed in (3) are eliminated by
//! [`solve`] when the block they span decouples and has no eigenvalue 1.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cascade::{support_points_with, Limits};
use crate::error::{Error, Result};
use crate::lattice::{Dilation, LatticeElem};
use crate::linalg::Matrix;
use crate::measure::CoefficientMask;
use crate::scalarfield::{rational, QuadScalar};

/// An ordered list of translates; the order fixes matrix indexing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileSystem {
    pub dilation: Dilation,
    translates: Vec<LatticeElem>,
}

impl TileSystem {
    pub fn new(dilation: Dilation, translates: Vec<LatticeElem>) -> Result<Self> {
        let mut seen = HashSet::new();
        for z in &translates {
            dilation.check(*z)?;
            if !seen.insert(*z) {
                return Err(Error::Parse(format!("duplicate translate {z}")));
            }
        }
        Ok(TileSystem { dilation, translates })
    }

    pub fn from_set(dilation: Dilation, set: &BTreeSet<LatticeElem>) -> Self {
        TileSystem {
            dilation,
            translates: set.iter().copied().collect(),
        }
    }

    /// One translate per line; `#` starts a comment.
    pub fn parse(dilation: Dilation, text: &str) -> Result<Self> {
        let translates = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<LatticeElem>>>()?;
        Self::new(dilation, translates)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for z in &self.translates {
            let _ = writeln!(out, "{z}");
        }
        out
    }

    pub fn translates(&self) -> &[LatticeElem] {
        &self.translates
    }

    pub fn len(&self) -> usize {
        self.translates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.translates.is_empty()
    }

    pub fn index_of(&self, z: LatticeElem) -> Option<usize> {
        self.translates.iter().position(|t| *t == z)
    }

    pub fn as_set(&self) -> BTreeSet<LatticeElem> {
        self.translates.iter().copied().collect()
    }
}

/// Row `i` gives `μ(zᵢ+T) = Σⱼ A[i][j]·μ(zⱼ+T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    pub tiles: TileSystem,
    pub matrix: Matrix,
}

impl TransferMatrix {
    pub fn dim(&self) -> usize {
        self.tiles.len()
    }
}

/// A dependency of `row` that fell outside the tile list without a zero certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct DroppedDependency {
    pub row: LatticeElem,
    pub target: LatticeElem,
    pub coeff: QuadScalar,
}

fn max_digit_offset_sqr(mask: &CoefficientMask) -> i128 {
    let one = LatticeElem::int(1);
    mask.coeffs()
        .keys()
        .flat_map(|k| [k.norm_sqr(), (*k - one).norm_sqr()])
        .max()
        .unwrap_or(0)
}

/// `B = max_{γ̃, δ∈{0,1}} |γ̃−δ| · |M|/(|M|−1)`.
pub fn candidate_bound(mask: &CoefficientMask) -> f64 {
    let m = (max_digit_offset_sqr(mask) as f64).sqrt();
    let norm = mask.dilation().norm();
    m * norm / (norm - 1.0)
}

/// Exact `|z| ≤ B`.
fn within_candidate_bound(dil: Dilation, m2: i128, z: LatticeElem) -> bool {
    let z2 = z.norm_sqr();
    match dil {
        Dilation::Line => z2 <= 4 * m2,
        // B² = m²(2+√2)² = 6m² + 4√2·m²
        Dilation::Plane => {
            let excess = z2 - 6 * m2;
            excess <= 0 || excess * excess <= 32 * m2 * m2
        }
    }
}

pub fn candidate_translates(mask: &CoefficientMask) -> BTreeSet<LatticeElem> {
    let dil = mask.dilation();
    let m2 = max_digit_offset_sqr(mask);
    let r = candidate_bound(mask).ceil() as i64 + 1;
    let ims = |_: i64| if dil == Dilation::Plane { -r..=r } else { 0..=0 };
    (-r..=r)
        .flat_map(|re| ims(re).map(move |im| LatticeElem::new(re, im)))
        .filter(|z| within_candidate_bound(dil, m2, *z))
        .collect()
}

/// Translates `z` with some `x ∈ Sₙ` lying in `z+T` by its canonical digits.
pub fn observed_translates(mask: &CoefficientMask, n: u32, limits: Limits) -> Result<BTreeSet<LatticeElem>> {
    let dil = mask.dilation();
    let points = support_points_with(mask, n, limits)?;
    Ok(points.into_par_iter().map(|x| dil.split_tile(x, n).0).collect::<HashSet<_>>().into_iter().collect())
}

/// Coefficients of `μ(z+T)` in terms of other translates; exact zeros are dropped.
pub fn dependency_row(z: LatticeElem, mask: &CoefficientMask) -> BTreeMap<LatticeElem, QuadScalar> {
    let base = mask.dilation().mul_m(z);
    let mut row: BTreeMap<LatticeElem, QuadScalar> = BTreeMap::new();
    for (k, p) in mask.coeffs() {
        for delta in [0, 1] {
            *row.entry(base - *k + LatticeElem::int(delta)).or_default() += p;
        }
    }
    row.retain(|_, v| !v.is_zero());
    row
}

/// Iteratively removes every candidate whose dependencies all lie outside
/// the current survivors; removed translates carry zero mass.
pub fn push_out(mask: &CoefficientMask, candidates: &BTreeSet<LatticeElem>) -> BTreeSet<LatticeElem> {
    let rows: BTreeMap<LatticeElem, Vec<LatticeElem>> = candidates
        .iter()
        .map(|z| (*z, dependency_row(*z, mask).into_keys().collect()))
        .collect();
    let mut alive = candidates.clone();
    loop {
        let dead: Vec<LatticeElem> = alive
            .iter()
            .filter(|z| rows[z].iter().all(|t| !alive.contains(t)))
            .copied()
            .collect();
        if dead.is_empty() {
            return alive;
        }
        for z in dead {
            alive.remove(&z);
        }
    }
}

/// Assembles `A` on `tiles`. Dependencies outside the list are discarded.
/// A discarded target outside `alive` is certified zero; any other is
/// returned as a warning. `alive = None` certifies nothing.
pub fn build_matrix(
    tiles: &TileSystem,
    mask: &CoefficientMask,
    alive: Option<&BTreeSet<LatticeElem>>,
) -> Result<(TransferMatrix, Vec<DroppedDependency>)> {
    if tiles.dilation != mask.dilation() {
        return Err(Error::DilationMismatch(format!(
            "tiles on {}, mask on {}",
            tiles.dilation,
            mask.dilation()
        )));
    }
    let index: BTreeMap<LatticeElem, usize> = tiles.translates.iter().enumerate().map(|(i, z)| (*z, i)).collect();
    let rows: Vec<_> = tiles
        .translates
        .par_iter()
        .map(|&z| {
            let mut row = vec![QuadScalar::zero(); tiles.len()];
            let mut dropped = Vec::new();
            for (target, coeff) in dependency_row(z, mask) {
                match index.get(&target) {
                    Some(&j) => row[j] = coeff,
                    None if alive.is_some_and(|a| !a.contains(&target)) => {}
                    None => dropped.push(DroppedDependency { row: z, target, coeff }),
                }
            }
            (row, dropped)
        })
        .collect();
    let mut matrix_rows = Vec::with_capacity(rows.len());
    let mut warnings = Vec::new();
    for (row, dropped) in rows {
        matrix_rows.push(row);
        warnings.extend(dropped);
    }
    let matrix = if matrix_rows.is_empty() {
        Matrix::zeros(0, 0)
    } else {
        Matrix::from_rows(matrix_rows)?
    };
    Ok((
        TransferMatrix {
            tiles: tiles.clone(),
            matrix,
        },
        warnings,
    ))
}

/// Exact basis of `ker(A − I)`.
pub fn one_eigenvectors(a: &Matrix) -> Vec<Vec<QuadScalar>> {
    a.minus_identity().nullspace()
}

pub fn column_sum_check(a: &Matrix) -> Vec<QuadScalar> {
    a.column_sums()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    Sum1,
    First1,
    Unit,
}

impl std::str::FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum1" => Ok(Normalization::Sum1),
            "first1" => Ok(Normalization::First1),
            "unit" => Ok(Normalization::Unit),
            _ => Err(Error::Parse(format!("unknown normalization {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NormalizedVector {
    Exact(Vec<QuadScalar>),
    Float(Vec<f64>),
}

impl NormalizedVector {
    pub fn to_f64(&self) -> Result<Vec<f64>> {
        match self {
            NormalizedVector::Exact(v) => v.iter().map(QuadScalar::to_f64).collect(),
            NormalizedVector::Float(v) => Ok(v.clone()),
        }
    }
}

/// `Unit` scales to Euclidean length one with the largest-magnitude component positive.
pub fn normalize_eigenvector(v: &[QuadScalar], mode: Normalization) -> Result<NormalizedVector> {
    let scale_by = |s: QuadScalar| -> Result<NormalizedVector> {
        if s.is_zero() {
            return Err(Error::ZeroNormalizer);
        }
        let inv = s.inv()?;
        Ok(NormalizedVector::Exact(v.iter().map(|x| x * &inv).collect()))
    };
    match mode {
        Normalization::Sum1 => scale_by(v.iter().sum()),
        Normalization::First1 => scale_by(v.first().cloned().unwrap_or_default()),
        Normalization::Unit => {
            let f: Vec<f64> = v.iter().map(QuadScalar::to_f64).collect::<Result<_>>()?;
            let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroNormalizer);
            }
            let lead = f.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            let s = norm.copysign(lead);
            Ok(NormalizedVector::Float(f.iter().map(|x| x / s).collect()))
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Depth `n` of the `Sₙ` used for observed translates.
    pub probe_depth: u32,
    /// Preferred ordering; survivors missing from it are appended in sorted order.
    pub order: Option<TileSystem>,
    pub limits: Limits,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            probe_depth: 12,
            order: None,
            limits: Limits::default(),
        }
    }
}

/// The split of the survivor system into observed (`upper`) and the rest (`lower`).
#[derive(Clone, Debug)]
pub struct BlockCheck {
    pub upper: TileSystem,
    pub lower: TileSystem,
    /// Rows `lower`, columns `upper` of the survivor matrix are all zero.
    pub lower_left_zero: bool,
    pub det_lower_minus_identity: QuadScalar,
    /// Both of the above hold, so `μ` vanishes on every `lower` translate.
    pub certified: bool,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub candidate_bound: f64,
    pub candidates: BTreeSet<LatticeElem>,
    pub observed: BTreeSet<LatticeElem>,
    pub survivors: BTreeSet<LatticeElem>,
    /// The system on all survivors.
    pub full: TransferMatrix,
    pub block: Option<BlockCheck>,
    /// The system whose eigenvectors are reported.
    pub system: TransferMatrix,
    pub warnings: Vec<DroppedDependency>,
    pub column_sums: Vec<QuadScalar>,
    pub eigenspace: Vec<Vec<QuadScalar>>,
    /// `A·v = v` exactly for every basis vector.
    pub fixed_point_verified: bool,
}

fn ordered(dil: Dilation, set: &BTreeSet<LatticeElem>, order: Option<&TileSystem>) -> Vec<LatticeElem> {
    let mut out: Vec<LatticeElem> = order
        .map(|o| o.translates.iter().filter(|z| set.contains(z)).copied().collect())
        .unwrap_or_default();
    let placed: HashSet<LatticeElem> = out.iter().copied().collect();
    out.extend(set.iter().filter(|z| !placed.contains(z)));
    debug_assert!(out.iter().all(|z| dil.contains(*z)));
    out
}

pub fn solve(mask: &CoefficientMask, opts: &SolveOptions) -> Result<SolveReport> {
    let dil = mask.dilation();
    let candidates = candidate_translates(mask);
    let survivors = push_out(mask, &candidates);
    let observed = observed_translates(mask, opts.probe_depth, opts.limits)?;
    let order = ordered(dil, &survivors, opts.order.as_ref());
    let upper: Vec<LatticeElem> = order.iter().filter(|z| observed.contains(z)).copied().collect();
    let lower: Vec<LatticeElem> = order.iter().filter(|z| !observed.contains(z)).copied().collect();
    let full_tiles = TileSystem::new(dil, upper.iter().chain(&lower).copied().collect())?;
    let (full, full_warnings) = build_matrix(&full_tiles, mask, Some(&survivors))?;

    let mut block = None;
    let (system, warnings) = if lower.is_empty() || upper.is_empty() {
        (full.clone(), full_warnings)
    } else {
        let up: Vec<usize> = (0..upper.len()).collect();
        let low: Vec<usize> = (upper.len()..full_tiles.len()).collect();
        let lower_left_zero = full.matrix.select(&low, &up).is_zero();
        let det = full.matrix.select(&low, &low).minus_identity().determinant()?;
        let certified = lower_left_zero && !det.is_zero();
        block = Some(BlockCheck {
            upper: TileSystem::new(dil, upper.clone())?,
            lower: TileSystem::new(dil, lower.clone())?,
            lower_left_zero,
            det_lower_minus_identity: det,
            certified,
        });
        if certified {
            let alive: BTreeSet<LatticeElem> = upper.iter().copied().collect();
            build_matrix(&TileSystem::new(dil, upper)?, mask, Some(&alive))?
        } else {
            (full.clone(), full_warnings)
        }
    };

    let eigenspace = one_eigenvectors(&system.matrix);
    let fixed_point_verified = eigenspace.iter().all(|v| system.matrix.mul_vec(v) == *v);
    Ok(SolveReport {
        candidate_bound: candidate_bound(mask),
        candidates,
        observed,
        survivors,
        column_sums: column_sum_check(&system.matrix),
        full,
        block,
        system,
        warnings,
        eigenspace,
        fixed_point_verified,
    })
}

/// The four digits `{0, 1, 1+i, 2+i}` of the plane family checked by [`det_identity_check`].
pub const FOUR_DIGITS: [LatticeElem; 4] = [
    LatticeElem { re: 0, im: 0 },
    LatticeElem { re: 1, im: 0 },
    LatticeElem { re: 1, im: 1 },
    LatticeElem { re: 2, im: 1 },
];

#[derive(Clone, Debug)]
pub struct DetIdentityRow {
    pub label: String,
    pub coeffs: [QuadScalar; 4],
    pub det: QuadScalar,
    pub expected: QuadScalar,
    pub pass: bool,
}

/// `1 − p₀³·p₁·p_{1+i}·p_{2+i}³`.
pub fn det_identity_rhs(p: &[QuadScalar; 4]) -> QuadScalar {
    QuadScalar::one() - p[0].pow(3) * &p[1] * &p[2] * p[3].pow(3)
}

/// The unobserved survivors `S′` of the four-digit family, found from a
/// generic member; `A′` is assembled over them for every mask checked.
pub fn four_digit_lower_tiles(limits: Limits) -> Result<TileSystem> {
    let generic = four_digit_mask([rational(1, 2), rational(1, 3), rational(1, 5)])?;
    let survivors = push_out(&generic, &candidate_translates(&generic));
    let observed = observed_translates(&generic, 12, limits)?;
    Ok(TileSystem::from_set(Dilation::Plane, &survivors.difference(&observed).copied().collect()))
}

fn four_digit_mask(first_three: [crate::scalarfield::Rational; 3]) -> Result<CoefficientMask> {
    let last = rational(1, 1) - first_three.iter().sum::<crate::scalarfield::Rational>();
    let coeffs = first_three.into_iter().chain([last]).map(QuadScalar::from_rational);
    CoefficientMask::new(Dilation::Plane, None, FOUR_DIGITS.into_iter().zip(coeffs))
}

fn det_row(label: String, p: [QuadScalar; 4], lower: &TileSystem) -> Result<DetIdentityRow> {
    let mask = CoefficientMask::new(Dilation::Plane, p[0].radicand(), FOUR_DIGITS.into_iter().zip(p.iter().cloned()))?;
    let (a, _) = build_matrix(lower, &mask, None)?;
    let det = a.matrix.minus_identity().determinant()?;
    let expected = det_identity_rhs(&p);
    let pass = det == expected;
    Ok(DetIdentityRow {
        label,
        coeffs: p,
        det,
        expected,
        pass,
    })
}

/// Checks `det(A′−I) = 1 − p₀³p₁p_{1+i}p_{2+i}³` on `extra` named masks and
/// `sample_count` seeded random rational masks summing to one.
pub fn det_identity_check(
    sample_count: usize,
    seed: u64,
    extra: &[(String, [QuadScalar; 4])],
    lower: &TileSystem,
) -> Result<Vec<DetIdentityRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks: Vec<(String, [QuadScalar; 4])> = extra.to_vec();
    for s in 0..sample_count {
        let mut draw = || rational(rng.gen_range(-20..=20), rng.gen_range(1..=20));
        let p = [draw(), draw(), draw()];
        let last = rational(1, 1) - p.iter().sum::<crate::scalarfield::Rational>();
        let [a, b, c] = p;
        masks.push((
            format!("random#{s}"),
            [a, b, c, last].map(QuadScalar::from_rational),
        ));
    }
    masks
        .into_par_iter()
        .map(|(label, p)| det_row(label, p, lower))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn set(items: &[&str]) -> BTreeSet<LatticeElem> {
        items.iter().map(|s| g(s)).collect()
    }

    #[test]
    fn line_dependency_rows() {
        let m = d4();
        let p: Vec<QuadScalar> = (0..4).map(|k| m.coeff(LatticeElem::int(k))).collect();
        let row = dependency_row(g("0"), &m);
        assert_eq!(row[&g("0")], &p[0] + &p[1]);
        assert_eq!(row[&g("1")], p[0]);
        let row = dependency_row(g("2"), &m);
        assert_eq!(row[&g("1")], p[3]);
        assert_eq!(row[&g("2")], &p[2] + &p[3]);
    }

    #[test]
    fn line_candidates_and_push_out() {
        let m = d4();
        let c = candidate_translates(&m);
        assert_eq!(c, (-6..=6).map(LatticeElem::int).collect());
        let survivors = push_out(&m, &c);
        assert_eq!(survivors, set(&["-1", "0", "1", "2", "3"]));
        assert_eq!(observed_translates(&m, 8, Limits::default()).unwrap(), set(&["0", "1", "2"]));
    }

    #[test]
    fn plane_candidate_counts() {
        let four = mask(
            Dilation::Plane,
            None,
            &[("0", "1/2"), ("1", "1/4"), ("1+i", "1/8"), ("2+i", "1/8")],
        );
        assert!((candidate_bound(&four) - 7.6344).abs() < 1e-4);
        assert_eq!(candidate_translates(&four).len(), 185);
        let three = mask(Dilation::Plane, None, &[("0", "1/2"), ("1", "1/4"), ("i", "1/4")]);
        assert!((candidate_bound(&three) - 4.828).abs() < 1e-3);
    }

    #[test]
    fn d4_solve() {
        let r = solve(&d4(), &SolveOptions::default()).unwrap();
        let block = r.block.as_ref().unwrap();
        assert!(block.certified);
        assert_eq!(r.system.tiles.translates(), &[g("0"), g("1"), g("2")]);
        assert!(r.warnings.is_empty());
        assert!(r.column_sums.iter().all(QuadScalar::is_one));
        assert_eq!(r.eigenspace.len(), 1);
        assert!(r.fixed_point_verified);
        let NormalizedVector::Exact(v) = normalize_eigenvector(&r.eigenspace[0], Normalization::Sum1).unwrap() else {
            panic!("sum1 is exact");
        };
        assert_eq!(v, vec![q("5/12+1/4*sqrt(3)"), q("1/6"), q("5/12-1/4*sqrt(3)")]);
        assert_eq!(r.system.matrix[(0, 0)], q("1/2+1/4*sqrt(3)"));
        assert_eq!(r.system.matrix[(1, 1)], q("3/4"));
    }

    #[test]
    fn uncertified_drops_warn() {
        let tiles = TileSystem::new(Dilation::Line, vec![g("0"), g("1")]).unwrap();
        let (_, warnings) = build_matrix(&tiles, &d4(), None).unwrap();
        assert!(warnings.iter().any(|w| w.row == g("1") && w.target == g("2")));
    }

    #[test]
    fn haar_plane_is_trivial() {
        let haar = mask(Dilation::Plane, None, &[("0", "1/2"), ("1", "1/2")]);
        let r = solve(&haar, &SolveOptions::default()).unwrap();
        assert_eq!(r.system.tiles.translates(), &[g("0")]);
        assert!(r.system.matrix[(0, 0)].is_one());
        assert_eq!(r.eigenspace, vec![vec![QuadScalar::one()]]);
    }

    #[test]
    fn normalization_modes() {
        let v = vec![q("2"), q("-4"), q("0")];
        assert_eq!(
            normalize_eigenvector(&v, Normalization::First1).unwrap(),
            NormalizedVector::Exact(vec![q("1"), q("-2"), q("0")])
        );
        let NormalizedVector::Float(u) = normalize_eigenvector(&v, Normalization::Unit).unwrap() else {
            panic!();
        };
        assert!((u[1] - 4.0 / 20f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            normalize_eigenvector(&[q("1"), q("-1")], Normalization::Sum1),
            Err(Error::ZeroNormalizer)
        ));
    }

    #[test]
    fn tile_text_round_trip() {
        let t = TileSystem::new(Dilation::Plane, vec![g("0"), g("-i"), g("1-i")]).unwrap();
        let text = format!("# header\n{}\n", t.to_text());
        assert_eq!(TileSystem::parse(Dilation::Plane, &text).unwrap(), t);
        assert!(TileSystem::parse(Dilation::Plane, "0\n0\n").is_err());
        assert!(TileSystem::parse(Dilation::Line, "i\n").is_err());
    }
}
