use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dilation_core::cascade::{self, Limits};
use dilation_core::emit::{self, PlaneCells, RasterSpec};
use dilation_core::measure::{check_orthonormality, check_probability};
use dilation_core::refine::{base_values, density_step, refine_values};
use dilation_core::transfer::{self, NormalizedVector, Normalization, SolveOptions, SolveReport, TileSystem};
use dilation_core::{correspond, CoefficientMask, Dilation, Error, LatticeElem, QuadScalar, Result, TileValueMap};

mod verify;

const OUT_DIR_ENV: &str = "DILATION_OUT_DIR";

#[derive(Parser)]
#[command(name = "dilation", version, about = "Exact solutions of the dilation equation on the line and the twin dragon")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for sampled checks.
    #[arg(long, global = true, default_value_t = 20240601)]
    seed: u64,
    /// Directory for dataset files [default: $DILATION_OUT_DIR, else .]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Cap on support points of a single measure.
    #[arg(long, global = true, default_value_t = Limits::default().max_support)]
    max_support: usize,
    /// Cap on digit tuples for the brute-force oracle.
    #[arg(long, global = true, default_value_t = Limits::default().max_tuples)]
    max_tuples: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probability and orthonormality conditions of a mask.
    Check {
        mask: PathBuf,
        /// Fail unless this condition set holds.
        #[arg(long, value_parser = ["probability", "orthonormality"])]
        require: Vec<String>,
    },
    /// Discrete approximant μ_N, TV profile and weight identities.
    Cascade {
        mask: PathBuf,
        #[arg(long)]
        n: u32,
        /// Also compare against brute-force enumeration.
        #[arg(long)]
        oracle: bool,
    },
    /// Candidate, observed and push-out translate sets.
    Tiles {
        mask: PathBuf,
        #[arg(long, default_value_t = 12)]
        probe_depth: u32,
    },
    /// Transfer matrix and its exact 1-eigenvector.
    Solve {
        mask: PathBuf,
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, default_value = "sum1", value_parser = ["sum1", "first1", "unit"])]
        normalize: String,
    },
    /// Tile values at scales 1..=depth as step CSVs.
    Refine {
        mask: PathBuf,
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        depth: u32,
    },
    /// Lift line step data on [0,1) to the plane and probe the corner at -i/2.
    Correspond {
        mask: PathBuf,
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, default_value_t = 5)]
        depth: u32,
    },
    /// Render a lifted CSV or step CSV.
    Render {
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Image size as WIDTHxHEIGHT.
        #[arg(long, default_value = "512x512", value_parser = parse_px)]
        px: (u32, u32),
        /// Lattice depth used to locate pixel centers in plane data.
        #[arg(long, default_value_t = 16)]
        sample_depth: u32,
        /// Grayscale PGM instead of color PPM.
        #[arg(long)]
        gray: bool,
    },
    /// Run the invariant suite on a mask.
    Verify {
        mask: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: u32,
        #[command(flatten)]
        system: SystemArgs,
        /// Random masks for the determinant identity (four-digit plane masks only).
        #[arg(long, default_value_t = 20)]
        det_samples: usize,
    },
}

#[derive(Args, Clone)]
struct SystemArgs {
    /// Translate order, one per line.
    #[arg(long)]
    tiles: Option<PathBuf>,
    /// Depth of the support used to find observed translates.
    #[arg(long, default_value_t = 12)]
    probe_depth: u32,
}

fn parse_px(s: &str) -> std::result::Result<(u32, u32), String> {
    let (w, h) = s.split_once('x').ok_or("expected WIDTHxHEIGHT")?;
    let w = w.parse().map_err(|_| format!("bad width `{w}`"))?;
    let h = h.parse().map_err(|_| format!("bad height `{h}`"))?;
    Ok((w, h))
}

pub(crate) struct Ctx {
    pub seed: u64,
    pub limits: Limits,
    out_dir: Option<PathBuf>,
}

impl Ctx {
    fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let dir = self.out_dir();
        fs::create_dir_all(&dir)?;
        let path = dir.join(name);
        fs::write(&path, contents)?;
        Ok(path)
    }

    pub fn solve_options(&self, mask: &CoefficientMask, args: &SystemArgs) -> Result<SolveOptions> {
        let order = args
            .tiles
            .as_ref()
            .map(|p| TileSystem::parse(mask.dilation(), &fs::read_to_string(p)?))
            .transpose()?;
        Ok(SolveOptions {
            probe_depth: args.probe_depth,
            order,
            limits: self.limits,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = Ctx {
        seed: cli.seed,
        limits: Limits {
            max_support: cli.max_support,
            max_tuples: cli.max_tuples,
        },
        out_dir: cli.out_dir,
    };
    match run(&ctx, cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(ctx: &Ctx, command: Command) -> Result<bool> {
    match command {
        Command::Check { mask, require } => check(&load(&mask)?, &require),
        Command::Cascade { mask, n, oracle } => run_cascade(ctx, &load(&mask)?, &stem(&mask), n, oracle),
        Command::Tiles { mask, probe_depth } => tiles(ctx, &load(&mask)?, probe_depth),
        Command::Solve { mask, system, normalize } => {
            let m = load(&mask)?;
            let mode: Normalization = normalize.parse()?;
            solve(ctx, &m, &stem(&mask), &ctx.solve_options(&m, &system)?, mode)
        }
        Command::Refine { mask, system, depth } => {
            let m = load(&mask)?;
            refine(ctx, &m, &stem(&mask), &ctx.solve_options(&m, &system)?, depth)
        }
        Command::Correspond { mask, system, depth } => {
            let m = load(&mask)?;
            run_correspond(ctx, &m, &stem(&mask), &ctx.solve_options(&m, &system)?, depth)
        }
        Command::Render {
            dataset,
            out,
            px,
            sample_depth,
            gray,
        } => render(&dataset, &out, px, sample_depth, gray),
        Command::Verify {
            mask,
            n,
            system,
            det_samples,
        } => {
            let m = load(&mask)?;
            let opts = ctx.solve_options(&m, &system)?;
            verify::run(ctx, &m, n, &opts, det_samples)
        }
    }
}

fn load(path: &Path) -> Result<CoefficientMask> {
    CoefficientMask::load(path)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "mask".into(), |s| s.to_string_lossy().into_owned())
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn float(x: &QuadScalar) -> String {
    x.to_f64().map_or_else(|_| "overflow".into(), |f| format!("{f:.12}"))
}

fn describe(mask: &CoefficientMask) {
    println!("dilation: {}", mask.dilation());
    for (k, p) in mask.coeffs() {
        println!("  p[{k}] = {p}");
    }
}

fn check(mask: &CoefficientMask, require: &[String]) -> Result<bool> {
    describe(mask);
    let p = check_probability(mask);
    println!("probability conditions:");
    println!("  all coefficients nonnegative: {}", yes(p.all_nonneg));
    println!("  even sum: {}", p.even_sum);
    println!("  odd sum: {}", p.odd_sum);
    println!("  holds: {}", yes(p.absolutely_continuous_criterion));
    let o = check_orthonormality(mask);
    println!("orthonormality conditions:");
    for (i, s) in &o.shifts {
        println!("  shift {i}: {s}");
    }
    println!("  holds: {}", yes(o.pass));
    Ok(require.iter().all(|r| match r.as_str() {
        "probability" => p.absolutely_continuous_criterion,
        _ => o.pass,
    }))
}

fn run_cascade(ctx: &Ctx, mask: &CoefficientMask, name: &str, n: u32, oracle: bool) -> Result<bool> {
    let mu = cascade::iterate_with(mask, n, ctx.limits)?;
    let path = ctx.write(&format!("{name}_mu{n}.csv"), emit::measure_csv(&mu))?;
    println!("mu_{n}: {} points, mass {}, written to {}", mu.support_len(), mu.total_mass(), path.display());
    let mut ok = mu.total_mass().is_one();
    let rows = cascade::tv_profile(mask, n)?;
    ctx.write(&format!("{name}_tv.csv"), emit::tv_profile_csv(&rows)?)?;
    println!("n  card(S_n)  TV  bound  within");
    for r in &rows {
        println!("{}  {}  {}  {:.9}  {}", r.n, r.card_support, float(&r.tv), r.bound(), yes(r.within_bound));
    }
    if check_orthonormality(mask).pass {
        ok &= rows.iter().all(|r| r.within_bound);
        let checks = cascade::verify_sum_squares(mask, n)?;
        let pass = checks.iter().all(|c| c.pass);
        println!("sum of squared weights = 2^-n for n <= {n}: {}", yes(pass));
        ok &= pass;
    }
    if check_probability(mask).absolutely_continuous_criterion {
        let checks = cascade::verify_prob_bounds(mask, n)?;
        let pass = checks.iter().all(|c| c.pass);
        println!("0 <= weight <= 2^-n for n <= {n}: {}", yes(pass));
        ok &= pass;
    }
    if oracle {
        let brute = cascade::enumerate_oracle_with(mask, n, ctx.limits)?;
        let same = brute == mu;
        println!("brute-force enumeration agrees: {}", yes(same));
        ok &= same;
    }
    Ok(ok)
}

fn tiles(ctx: &Ctx, mask: &CoefficientMask, probe_depth: u32) -> Result<bool> {
    let candidates = transfer::candidate_translates(mask);
    let survivors = transfer::push_out(mask, &candidates);
    let observed = transfer::observed_translates(mask, probe_depth, ctx.limits)?;
    let list = |s: &std::collections::BTreeSet<LatticeElem>| s.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    println!("candidate bound: {:.6}", transfer::candidate_bound(mask));
    println!("candidates: {}", candidates.len());
    println!("observed at depth {probe_depth}: {} [{}]", observed.len(), list(&observed));
    println!("push-out survivors: {} [{}]", survivors.len(), list(&survivors));
    let nested = observed.is_subset(&survivors);
    println!("observed within survivors: {}", yes(nested));
    Ok(nested)
}

fn print_solve(report: &SolveReport) {
    println!("candidate bound: {:.6}", report.candidate_bound);
    println!("candidates: {}", report.candidates.len());
    println!("observed: {}", report.observed.len());
    println!("push-out survivors: {}", report.survivors.len());
    if let Some(b) = &report.block {
        println!("unobserved survivors: {}", b.lower.len());
        println!("  lower-left block zero: {}", yes(b.lower_left_zero));
        println!("  det(A'-I) = {}", b.det_lower_minus_identity);
        println!("  eliminated as zero: {}", yes(b.certified));
    }
    let tiles: Vec<String> = report.system.tiles.translates().iter().map(ToString::to_string).collect();
    println!("tiles ({}): {}", tiles.len(), tiles.join(" "));
    println!("matrix:");
    print!("{}", emit::matrix_csv(&report.system.matrix));
    let sums: Vec<String> = report.column_sums.iter().map(ToString::to_string).collect();
    println!("column sums: {}", sums.join(" "));
    for w in &report.warnings {
        println!("warning: row {} drops {} (coefficient {}) without a zero certificate", w.row, w.target, w.coeff);
    }
    println!("1-eigenspace dimension: {}", report.eigenspace.len());
    println!("A v = v verified: {}", yes(report.fixed_point_verified));
}

fn solve_passes(report: &SolveReport) -> bool {
    report.eigenspace.len() == 1 && report.fixed_point_verified && report.warnings.is_empty()
}

fn solve(ctx: &Ctx, mask: &CoefficientMask, name: &str, opts: &SolveOptions, mode: Normalization) -> Result<bool> {
    let report = transfer::solve(mask, opts)?;
    print_solve(&report);
    let Some(v) = report.eigenspace.first() else {
        return Ok(false);
    };
    let tiles = report.system.tiles.translates();
    match transfer::normalize_eigenvector(v, mode)? {
        NormalizedVector::Exact(x) => {
            println!("eigenvector:");
            for (z, c) in tiles.iter().zip(&x) {
                println!("  {z}: {c} = {}", float(c));
            }
            ctx.write(&format!("{name}_vector.txt"), emit::vector_text(&x))?;
        }
        NormalizedVector::Float(x) => {
            println!("eigenvector:");
            for (z, c) in tiles.iter().zip(&x) {
                println!("  {z}: {c:.12}");
            }
        }
    }
    ctx.write(&format!("{name}_matrix.csv"), emit::matrix_csv(&report.system.matrix))?;
    ctx.write(&format!("{name}.tiles"), report.system.tiles.to_text())?;
    Ok(solve_passes(&report))
}

/// Solves, normalizes to total mass one, and returns the scale-0 tile values.
pub(crate) fn base_from_solve(mask: &CoefficientMask, opts: &SolveOptions) -> Result<(SolveReport, TileValueMap)> {
    let report = transfer::solve(mask, opts)?;
    let [v] = report.eigenspace.as_slice() else {
        return Err(Error::Degenerate(format!(
            "1-eigenspace has dimension {}",
            report.eigenspace.len()
        )));
    };
    let NormalizedVector::Exact(x) = transfer::normalize_eigenvector(v, Normalization::Sum1)? else {
        unreachable!("sum1 is exact");
    };
    let base = base_values(&report.system.tiles, &x);
    Ok((report, base))
}

fn refine(ctx: &Ctx, mask: &CoefficientMask, name: &str, opts: &SolveOptions, depth: u32) -> Result<bool> {
    let (_, base) = base_from_solve(mask, opts)?;
    let mut ok = true;
    println!("scale  tiles  total");
    for values in std::iter::once(base.clone()).chain(refine_values(mask, &base, depth)?) {
        let total = values.total();
        ok &= total.is_one();
        let path = ctx.write(&format!("{name}_scale{}.csv", values.scale), emit::step_csv(&values)?)?;
        println!("{}  {}  {}  {}", values.scale, values.len(), total, path.display());
        if mask.dilation() == Dilation::Line && values.scale == depth {
            let plot = emit::step_plot(&density_step(&values)?, values.scale, 800, 300)?;
            ctx.write(&format!("{name}_scale{}.ppm", values.scale), plot.to_ppm())?;
        }
    }
    println!("mass conserved: {}", yes(ok));
    Ok(ok)
}

fn run_correspond(ctx: &Ctx, mask: &CoefficientMask, name: &str, opts: &SolveOptions, depth: u32) -> Result<bool> {
    let probe = correspond::discontinuity_probe(mask)?;
    println!("phi(1/4) = {} = {}", probe.limit_along_t01, float(&probe.limit_along_t01));
    println!("phi(3/4) = {} = {}", probe.limit_along_t10, float(&probe.limit_along_t10));
    match &probe.ratio {
        Some(r) => println!("ratio = {r}"),
        None => println!("ratio undefined"),
    }
    println!("discontinuous at -i/2: {}", yes(probe.discontinuous));
    let (_, base) = base_from_solve(mask, opts)?;
    let values = if depth == 0 {
        base.clone()
    } else {
        refine_values(mask, &base, depth)?.pop().expect("depth >= 1")
    };
    let lifted = correspond::lift_step_function(&values)?;
    let path = ctx.write(&format!("{name}_lifted{depth}.csv"), emit::lifted_csv(&lifted)?)?;
    println!("lifted {} cells to {}", lifted.entries.len(), path.display());
    Ok(true)
}

fn render(dataset: &Path, out: &Path, (w, h): (u32, u32), sample_depth: u32, gray: bool) -> Result<bool> {
    let text = fs::read_to_string(dataset)?;
    let header = text.lines().next().unwrap_or("");
    let img = if header == emit::LIFTED_HEADER {
        raster(&emit::parse_lifted_csv(&text)?, w, h, sample_depth)?
    } else if header == emit::STEP_HEADER {
        let second = text.lines().nth(1).ok_or_else(|| Error::EmptyData("step CSV has no rows".into()))?;
        let label = second.split(',').nth(1).unwrap_or("");
        if let Some((_, addr)) = label.split_once(":.") {
            let values = emit::parse_step_csv(Dilation::Plane, addr.len() as u32, &text)?;
            raster(&PlaneCells::from_tiles(&values)?, w, h, sample_depth)?
        } else {
            let scale = line_scale(label)?;
            let values = emit::parse_step_csv(Dilation::Line, scale, &text)?;
            emit::step_plot(&density_step(&values)?, scale, w, h)?
        }
    } else {
        return Err(Error::Parse(format!("unrecognized dataset header `{header}`")));
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, if gray { img.to_pgm() } else { img.to_ppm() })?;
    println!("wrote {}x{} image to {}", img.width, img.height, out.display());
    Ok(true)
}

fn raster(cells: &PlaneCells, w: u32, h: u32, sample_depth: u32) -> Result<emit::Image> {
    let spec = RasterSpec::new(w, h, emit::fit_cells(cells)?)?;
    emit::raster_tile_values(cells, &spec, sample_depth)
}

/// Scale from an interval label `a/2ⁿ..b/2ⁿ`.
fn line_scale(label: &str) -> Result<u32> {
    let bad = || Error::Parse(format!("bad interval `{label}`"));
    let (a, b) = label.split_once("..").ok_or_else(bad)?;
    let width = b.parse::<QuadScalar>()? - a.parse::<QuadScalar>()?;
    (0..62).find(|n| width == QuadScalar::ratio(1, 1 << n)).ok_or_else(bad)
}
