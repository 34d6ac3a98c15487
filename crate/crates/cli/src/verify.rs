//! The invariant suite behind `dilation verify`.

use dilation_core::cascade;
use dilation_core::measure::{check_orthonormality, check_probability};
use dilation_core::refine::{halfopen_consistency, refine_values};
use dilation_core::transfer::{self, SolveOptions, FOUR_DIGITS};
use dilation_core::{correspond, CoefficientMask, Dilation, Error, QuadScalar, Result};

use crate::{base_from_solve, Ctx};

struct Suite {
    failures: usize,
}

impl Suite {
    fn record(&mut self, name: &str, pass: bool, detail: impl AsRef<str>) {
        if !pass {
            self.failures += 1;
        }
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag}  {name}: {}", detail.as_ref());
    }

    fn skip(&self, name: &str, why: &str) {
        println!("SKIP  {name}: {why}");
    }
}

pub(crate) fn run(ctx: &Ctx, mask: &CoefficientMask, n: u32, opts: &SolveOptions, det_samples: usize) -> Result<bool> {
    let mut s = Suite { failures: 0 };
    let dil = mask.dilation();

    let mu = cascade::iterate_with(mask, n, ctx.limits)?;
    s.record("mass", mu.total_mass().is_one(), format!("total mass of mu_{n} = {}", mu.total_mass()));

    let oracle_n = n.min(if dil == Dilation::Plane { 6 } else { 8 });
    let same = (1..=oracle_n).try_fold(true, |ok, k| -> Result<bool> {
        let fast = cascade::iterate_with(mask, k, ctx.limits)?;
        Ok(ok && fast == cascade::enumerate_oracle_with(mask, k, ctx.limits)?)
    })?;
    s.record("oracle", same, format!("recursion equals brute force for n <= {oracle_n}"));

    let tv = cascade::tv_profile(mask, n)?;
    if check_orthonormality(mask).pass {
        let sums = cascade::verify_sum_squares(mask, n)?;
        s.record("sum-of-squares", sums.iter().all(|c| c.pass), format!("sum of w^2 = 2^-n for n <= {n}"));
        s.record("tv-bound", tv.iter().all(|r| r.within_bound), format!("TV <= sqrt(card/2^n) for n <= {n}"));
    } else {
        s.skip("sum-of-squares", "orthonormality conditions fail");
    }
    if check_probability(mask).absolutely_continuous_criterion {
        let bounds = cascade::verify_prob_bounds(mask, n)?;
        s.record("weight-bounds", bounds.iter().all(|c| c.pass), format!("0 <= w <= 2^-n for n <= {n}"));
        s.record("tv-one", tv.iter().all(|r| r.tv.is_one()), "TV = 1 at every level");
    } else {
        s.skip("weight-bounds", "probability conditions fail");
    }

    let depth = opts.probe_depth.max(1);
    let coarse = transfer::observed_translates(mask, depth - 1, opts.limits)?;
    let fine = transfer::observed_translates(mask, depth, opts.limits)?;
    let survivors = transfer::push_out(mask, &transfer::candidate_translates(mask));
    s.record(
        "translate-nesting",
        coarse.is_subset(&fine) && fine.is_subset(&survivors),
        format!("observed {} within {} within {} survivors", coarse.len(), fine.len(), survivors.len()),
    );

    match base_from_solve(mask, opts) {
        Ok((report, base)) => {
            s.record(
                "eigenvector",
                report.fixed_point_verified && report.warnings.is_empty(),
                format!("{} tiles, A v = v exactly", report.system.dim()),
            );
            if let Some(b) = &report.block {
                s.record(
                    "block-elimination",
                    b.certified,
                    format!("{} unobserved survivors, det(A'-I) = {}", b.lower.len(), b.det_lower_minus_identity),
                );
            }
            s.record(
                "column-sums",
                report.column_sums.iter().all(QuadScalar::is_one),
                "every column of A sums to 1",
            );
            let scales = refine_values(mask, &base, n.min(8))?;
            s.record(
                "refine-mass",
                scales.iter().all(|v| v.total().is_one()),
                format!("tile values sum to 1 at scales 1..={}", n.min(8)),
            );
        }
        Err(Error::Degenerate(why)) => s.skip("eigenvector", &format!("closed-tile system is degenerate ({why})")),
        Err(e) => s.record("eigenvector", false, e.to_string()),
    }

    if dil == Dilation::Line {
        match halfopen_consistency(mask) {
            Ok(h) => {
                let extra = h.extra.as_ref().map_or("none".into(), ToString::to_string);
                s.record("half-open", h.consistent, format!("mu(-1,0] = {extra}, forced zero: {}", h.forced_zero));
            }
            Err(e) => s.skip("half-open", &e.to_string()),
        }
        match correspond::discontinuity_probe(mask) {
            Ok(p) => println!(
                "INFO  corner: phi(1/4) = {}, phi(3/4) = {}, discontinuous: {}",
                p.limit_along_t01, p.limit_along_t10, p.discontinuous
            ),
            Err(e) => s.skip("corner", &e.to_string()),
        }
    }

    if dil == Dilation::Plane && mask.support().iter().all(|k| FOUR_DIGITS.contains(k)) {
        let lower = transfer::four_digit_lower_tiles(opts.limits)?;
        let own = FOUR_DIGITS.map(|k| mask.coeff(k));
        let rows = transfer::det_identity_check(det_samples, ctx.seed, &[("mask".into(), own)], &lower)?;
        let passed = rows.iter().filter(|r| r.pass).count();
        s.record(
            "det-identity",
            passed == rows.len(),
            format!("{passed}/{} masks satisfy det(A'-I) = 1 - p0^3 p1 p(1+i) p(2+i)^3", rows.len()),
        );
    }

    println!("{} failure(s)", s.failures);
    Ok(s.failures == 0)
}
