//! Images and text dumps.
//!
//! Rasters are binary PPM (P6) or PGM (P5). Tables are CSV with LF line
//! endings; exact values use the scalar grammar, floats use Rust's shortest
//! round-trip form. Every dump with a parser here round-trips exactly.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cascade::{ProbeTable, TvRow};
use crate::correspond::LiftedFunction;
use crate::error::{Error, Result};
use crate::lattice::{Dilation, LatticeElem, TileValueMap};
use crate::linalg::Matrix;
use crate::measure::DiscreteMeasure;
use crate::scalarfield::{parse_rational, QuadScalar, Rational};

/// A rectangle `[x0, x1] × [y0, y1]` in the plane.
#[derive(Clone, Debug, PartialEq)]
pub struct Viewport {
    pub x0: Rational,
    pub y0: Rational,
    pub x1: Rational,
    pub y1: Rational,
}

impl Viewport {
    pub fn new(x0: Rational, y0: Rational, x1: Rational, y1: Rational) -> Result<Self> {
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::EmptyData("viewport has no area".into()));
        }
        Ok(Viewport { x0, y0, x1, y1 })
    }

    /// The bounding box of `points` grown by 5% on each side.
    pub fn fit(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, y) in points {
            lo_x = lo_x.min(x);
            lo_y = lo_y.min(y);
            hi_x = hi_x.max(x);
            hi_y = hi_y.max(y);
        }
        if !lo_x.is_finite() {
            return Err(Error::EmptyData("no points to fit".into()));
        }
        let pad = 0.05 * (hi_x - lo_x).max(hi_y - lo_y).max(1e-3);
        let r = |v: f64| Rational::from_float(v).expect("finite");
        Viewport::new(r(lo_x - pad), r(lo_y - pad), r(hi_x + pad), r(hi_y + pad))
    }

    fn to_f64(&self) -> [f64; 4] {
        use num_traits::ToPrimitive;
        [&self.x0, &self.y0, &self.x1, &self.y1].map(|v| v.to_f64().unwrap_or(0.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RasterSpec {
    pub width: u32,
    pub height: u32,
    pub viewport: Viewport,
}

impl RasterSpec {
    pub fn new(width: u32, height: u32, viewport: Viewport) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyData(format!("{width}x{height} raster")));
        }
        Ok(RasterSpec { width, height, viewport })
    }
}

pub const BACKGROUND: [u8; 3] = [255, 255, 255];
const NEUTRAL: [u8; 3] = [220, 220, 220];
const NEGATIVE: [u8; 3] = [33, 102, 172];
const POSITIVE: [u8; 3] = [178, 24, 43];

/// Diverging map: `−scale` is blue, `0` is light gray, `+scale` is red.
pub fn diverging_color(v: f64, scale: f64) -> [u8; 3] {
    let t = if scale > 0.0 { (v / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let end = if t < 0.0 { NEGATIVE } else { POSITIVE };
    let t = t.abs();
    let mix = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8;
    [mix(NEUTRAL[0], end[0]), mix(NEUTRAL[1], end[1]), mix(NEUTRAL[2], end[2])]
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn blank(width: u32, height: u32) -> Self {
        Image {
            width,
            height,
            pixels: vec![BACKGROUND; (width * height) as usize],
        }
    }

    pub fn set(&mut self, x: u32, y: u32, c: [u8; 3]) {
        self.pixels[(y * self.width + x) as usize] = c;
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().flatten());
        out
    }

    /// Rec. 601 luma.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|[r, g, b]| {
            (0.299 * f64::from(*r) + 0.587 * f64::from(*g) + 0.114 * f64::from(*b)).round() as u8
        }));
        out
    }

    pub fn distinct_colors(&self) -> usize {
        self.pixels.iter().collect::<std::collections::BTreeSet<_>>().len()
    }
}

/// Plane cells `M⁻ⁿ(g + T)` with values, the common input of both raster entry points.
#[derive(Clone, Debug)]
pub struct PlaneCells {
    pub scale: u32,
    pub cells: Vec<(LatticeElem, f64)>,
}

impl PlaneCells {
    pub fn from_tiles(values: &TileValueMap) -> Result<Self> {
        if values.dilation != Dilation::Plane {
            return Err(Error::DilationMismatch("raster needs plane data".into()));
        }
        let cells = values.values.iter().map(|(g, v)| Ok((*g, v.to_f64()?))).collect::<Result<_>>()?;
        Ok(PlaneCells { scale: values.scale, cells })
    }

    pub fn from_lifted(lifted: &LiftedFunction) -> Result<Self> {
        let cells = lifted
            .entries
            .iter()
            .map(|(addr, v)| Ok((addr.reinterpret(Dilation::Plane).lattice_key(), v.to_f64()?)))
            .collect::<Result<_>>()?;
        Ok(PlaneCells { scale: lifted.depth, cells })
    }

    /// Sample points of each cell: all digit extensions by `extra` more digits.
    fn samples(&self, extra: u32) -> Vec<Vec<(f64, f64)>> {
        let dil = Dilation::Plane;
        let subs: Vec<LatticeElem> = (0..1i64 << extra)
            .map(|j| {
                (0..extra).rev().fold(LatticeElem::ZERO, |acc, bit| {
                    dil.mul_m(acc) + LatticeElem::int((j >> bit) & 1)
                })
            })
            .collect();
        self.cells
            .par_iter()
            .map(|(g, _)| {
                let base = dil.mul_m_pow(*g, extra);
                subs.iter()
                    .map(|s| dil.point_at_scale_f64(base + *s, self.scale + extra))
                    .collect()
            })
            .collect()
    }
}

/// Colors each pixel by the cell containing its center. The center is
/// located to depth `sample_depth` by rounding `Mᴺ·x` to the lattice, then
/// the cell is the residue after peeling `sample_depth − scale` digits.
pub fn raster_tile_values(cells: &PlaneCells, spec: &RasterSpec, sample_depth: u32) -> Result<Image> {
    if cells.cells.is_empty() {
        return Err(Error::EmptyData("no cells to render".into()));
    }
    if sample_depth > 48 {
        return Err(Error::ResourceLimit {
            what: "raster sample depth",
            needed: u64::from(sample_depth),
            limit: 48,
        });
    }
    let depth = sample_depth.max(cells.scale);
    let values: HashMap<LatticeElem, f64> = cells.cells.iter().copied().collect();
    let scale = cells.cells.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    let [x0, y0, x1, y1] = spec.viewport.to_f64();
    let dil = Dilation::Plane;
    let pixels = (0..spec.height)
        .into_par_iter()
        .flat_map_iter(|py| {
            let y = y1 - (f64::from(py) + 0.5) / f64::from(spec.height) * (y1 - y0);
            let values = &values;
            (0..spec.width).map(move |px| {
                let x = x0 + (f64::from(px) + 0.5) / f64::from(spec.width) * (x1 - x0);
                // T is centered at −i/2, so shift before rounding.
                let (mut re, mut im) = (x, y);
                for _ in 0..depth {
                    (re, im) = (re - im, re + im);
                }
                let g = LatticeElem::new(re.round() as i64, (im + 0.5).round() as i64);
                let key = dil.split_tile(g, depth - cells.scale).0;
                values.get(&key).map_or(BACKGROUND, |v| diverging_color(*v, scale))
            })
        })
        .collect();
    Ok(Image {
        width: spec.width,
        height: spec.height,
        pixels,
    })
}

/// Viewport fitted to a coarse sampling of the cells.
pub fn fit_cells(cells: &PlaneCells) -> Result<Viewport> {
    let extra = 8u32.saturating_sub(cells.scale);
    Viewport::fit(cells.samples(extra).into_iter().flatten())
}

/// A 1D step function as filled bars from zero, one color per sign.
pub fn step_plot(densities: &BTreeMap<LatticeElem, f64>, scale: u32, width: u32, height: u32) -> Result<Image> {
    if densities.is_empty() {
        return Err(Error::EmptyData("no step data".into()));
    }
    if width == 0 || height == 0 {
        return Err(Error::EmptyData(format!("{width}x{height} plot")));
    }
    let step = 0.5f64.powi(scale as i32);
    let lo = densities.keys().next().unwrap().re as f64 * step;
    let hi = (densities.keys().last().unwrap().re + 1) as f64 * step;
    let top = densities.values().fold(0.0f64, |a, v| a.max(*v)).max(0.0);
    let bottom = densities.values().fold(0.0f64, |a, v| a.min(*v)).min(0.0);
    let span = (top - bottom).max(1e-12);
    let row_of = |v: f64| (((top - v) / span) * f64::from(height - 1)).round() as u32;
    let zero_row = row_of(0.0);
    let mut img = Image::blank(width, height);
    for px in 0..width {
        let x = lo + (f64::from(px) + 0.5) / f64::from(width) * (hi - lo);
        let key = LatticeElem::int((x / step).floor() as i64);
        let v = densities.get(&key).copied().unwrap_or(0.0);
        let r = row_of(v);
        let color = if v < 0.0 { NEGATIVE } else { POSITIVE };
        for py in r.min(zero_row)..=r.max(zero_row) {
            img.set(px, py, color);
        }
        img.set(px, zero_row, [0, 0, 0]);
    }
    Ok(img)
}

pub const STEP_HEADER: &str = "tile_key,address_or_interval,value_exact,density_float";

/// Line tiles are labelled `a..b`; plane tiles `z:.digits` for the translate and sub-tile address.
pub fn step_csv(values: &TileValueMap) -> Result<String> {
    let mut out = format!("{STEP_HEADER}\n");
    let n = values.scale;
    let den = Rational::from_integer(num_bigint::BigInt::from(1) << n);
    let area = 2f64.powi(n as i32);
    for (g, v) in &values.values {
        let label = match values.dilation {
            Dilation::Line => {
                let end = |j: i64| QuadScalar::from_rational(Rational::from_integer(j.into()) / &den);
                format!("{}..{}", end(g.re), end(g.re + 1))
            }
            Dilation::Plane => {
                let (z, addr) = values.dilation.split_tile(*g, n);
                format!("{z}:.{addr}")
            }
        };
        let _ = writeln!(out, "{g},{label},{v},{}", v.to_f64()? * area);
    }
    Ok(out)
}

pub fn parse_step_csv(dilation: Dilation, scale: u32, text: &str) -> Result<TileValueMap> {
    let mut map = TileValueMap::new(dilation, scale);
    for fields in csv_rows(text, STEP_HEADER, 4)? {
        let g: LatticeElem = fields[0].parse()?;
        map.values.insert(dilation.check(g)?, fields[2].parse()?);
    }
    Ok(map)
}

pub const TV_HEADER: &str = "n,card_support,tv,tv_exact,bound";

pub fn tv_profile_csv(rows: &[TvRow]) -> Result<String> {
    let mut out = format!("{TV_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.n, r.card_support, r.tv.to_f64()?, r.tv, r.bound());
    }
    Ok(out)
}

pub fn probe_csv(table: &ProbeTable) -> String {
    let mut out = format!("n,{}\n", table.functions.join(","));
    for r in &table.rows {
        let gaps: Vec<String> = r.gaps.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{},{}", r.n, gaps.join(","));
    }
    out
}

pub const LIFTED_HEADER: &str = "address,re,im,value_float";

pub fn lifted_csv(lifted: &LiftedFunction) -> Result<String> {
    use num_traits::ToPrimitive;
    let mut out = format!("{LIFTED_HEADER}\n");
    for (addr, v) in &lifted.entries {
        let (re, im) = addr.point();
        let _ = writeln!(
            out,
            ".{addr},{},{},{}",
            re.to_f64().unwrap_or(f64::NAN),
            im.to_f64().unwrap_or(f64::NAN),
            v.to_f64()?
        );
    }
    Ok(out)
}

/// Reads a lifted dataset back as plane cells at the depth of its addresses.
pub fn parse_lifted_csv(text: &str) -> Result<PlaneCells> {
    let mut depth = None;
    let mut cells = Vec::new();
    for fields in csv_rows(text, LIFTED_HEADER, 4)? {
        let addr = crate::lattice::RadixAddress::parse(Dilation::Plane, fields[0])?;
        if *depth.get_or_insert(addr.depth()) != addr.depth() {
            return Err(Error::Parse("addresses of mixed depth".into()));
        }
        let v: f64 = fields[3]
            .parse()
            .map_err(|_| Error::Parse(format!("bad float `{}`", fields[3])))?;
        cells.push((addr.lattice_key(), v));
    }
    Ok(PlaneCells {
        scale: depth.unwrap_or(0),
        cells,
    })
}

/// Row-major, one matrix row per line.
pub fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let rows = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|s| s.trim().parse()).collect::<Result<Vec<QuadScalar>>>())
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, 0));
    }
    Matrix::from_rows(rows)
}

pub fn vector_text(v: &[QuadScalar]) -> String {
    v.iter().map(|x| format!("{x}\n")).collect()
}

pub fn parse_vector_text(text: &str) -> Result<Vec<QuadScalar>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| l.trim().parse()).collect()
}

pub const MEASURE_HEADER: &str = "key,weight";

/// `# dilation=… scale=…` followed by `key,weight` rows.
pub fn measure_csv(mu: &DiscreteMeasure) -> String {
    let mut out = format!("# dilation={} scale={}\n{MEASURE_HEADER}\n", mu.dilation, mu.scale);
    for (g, w) in mu.weights() {
        let _ = writeln!(out, "{g},{w}");
    }
    out
}

pub fn parse_measure_csv(text: &str) -> Result<DiscreteMeasure> {
    let first = text.lines().next().unwrap_or("");
    let meta = first
        .strip_prefix("# ")
        .ok_or_else(|| Error::Parse("missing measure metadata line".into()))?;
    let mut dilation = None;
    let mut scale = None;
    for kv in meta.split_whitespace() {
        match kv.split_once('=') {
            Some(("dilation", v)) => dilation = Some(v.parse::<Dilation>()?),
            Some(("scale", v)) => scale = Some(v.parse::<u32>().map_err(|_| Error::Parse(format!("bad scale `{v}`")))?),
            _ => return Err(Error::Parse(format!("unknown metadata `{kv}`"))),
        }
    }
    let (Some(dilation), Some(scale)) = (dilation, scale) else {
        return Err(Error::Parse("metadata needs dilation and scale".into()));
    };
    let body = text.split_once('\n').map_or("", |(_, rest)| rest);
    let weights = csv_rows(body, MEASURE_HEADER, 2)?
        .into_iter()
        .map(|f| Ok((dilation.check(f[0].parse()?)?, f[1].parse()?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscreteMeasure::new(dilation, scale, weights))
}

/// Exact `(re, im)` pair as `re,im` in rational form.
pub fn point_text((re, im): &(Rational, Rational)) -> String {
    let q = |r: &Rational| QuadScalar::from_rational(r.clone()).to_string();
    format!("{},{}", q(re), q(im))
}

pub fn parse_point_text(s: &str) -> Result<(Rational, Rational)> {
    let (a, b) = s.split_once(',').ok_or_else(|| Error::Parse(format!("bad point `{s}`")))?;
    Ok((parse_rational(a.trim())?, parse_rational(b.trim())?))
}

fn csv_rows<'a>(text: &'a str, header: &str, width: usize) -> Result<Vec<Vec<&'a str>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        other => return Err(Error::Parse(format!("expected header `{header}`, found {other:?}"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let fields: Vec<&str> = l.split(',').collect();
            if fields.len() == width {
                Ok(fields)
            } else {
                Err(Error::Parse(format!("expected {width} fields in `{l}`")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::RadixAddress;
    use proptest::prelude::*;

    fn q(s: &str) -> QuadScalar {
        s.parse().unwrap()
    }

    fn haar_half_tiles() -> PlaneCells {
        PlaneCells {
            scale: 1,
            cells: vec![(LatticeElem::int(0), 0.0), (LatticeElem::int(1), 1.0)],
        }
    }

    #[test]
    fn ppm_bytes() {
        let mut img = Image::blank(2, 1);
        img.set(1, 0, [1, 2, 3]);
        assert_eq!(img.to_ppm(), b"P6\n2 1\n255\n\xff\xff\xff\x01\x02\x03".to_vec());
        assert_eq!(&img.to_pgm()[..11], b"P5\n2 1\n255\n");
    }

    #[test]
    fn colormap_anchors_zero() {
        assert_eq!(diverging_color(0.0, 1.0), NEUTRAL);
        assert_eq!(diverging_color(-1.0, 1.0), NEGATIVE);
        assert_eq!(diverging_color(5.0, 1.0), POSITIVE);
    }

    #[test]
    fn half_tile_raster_is_deterministic() {
        let cells = haar_half_tiles();
        let spec = RasterSpec::new(64, 48, fit_cells(&cells).unwrap()).unwrap();
        let a = raster_tile_values(&cells, &spec, 12).unwrap();
        let b = raster_tile_values(&cells, &spec, 12).unwrap();
        assert_eq!(a.to_ppm(), b.to_ppm());
        assert!(a.pixels.contains(&NEUTRAL));
        assert!(a.pixels.contains(&POSITIVE));
        assert!(a.pixels.contains(&BACKGROUND));
    }

    #[test]
    fn constant_raster_is_monochrome() {
        let cells = PlaneCells {
            scale: 0,
            cells: vec![(LatticeElem::ZERO, 2.0)],
        };
        let spec = RasterSpec::new(32, 32, fit_cells(&cells).unwrap()).unwrap();
        let img = raster_tile_values(&cells, &spec, 10).unwrap();
        assert_eq!(img.distinct_colors(), 2);
        assert!(raster_tile_values(&PlaneCells { scale: 0, cells: vec![] }, &spec, 4).is_err());
    }

    #[test]
    fn step_csv_round_trip() {
        let mut v = TileValueMap::new(Dilation::Line, 2);
        v.values.insert(LatticeElem::int(0), q("1/8+1/8*sqrt(3)"));
        v.values.insert(LatticeElem::int(3), q("-1/4"));
        let text = step_csv(&v).unwrap();
        assert!(text.contains("0,0/1..1/4,1/8+1/8*sqrt(3),"));
        assert_eq!(parse_step_csv(Dilation::Line, 2, &text).unwrap(), v);
        let empty = TileValueMap::new(Dilation::Plane, 3);
        assert_eq!(step_csv(&empty).unwrap(), format!("{STEP_HEADER}\n"));
    }

    #[test]
    fn plane_step_labels() {
        let mut v = TileValueMap::new(Dilation::Plane, 2);
        v.values.insert(LatticeElem::int(3), q("1"));
        assert!(step_csv(&v).unwrap().contains("3,-i:.01,"));
    }

    #[test]
    fn measure_round_trip() {
        let mu = DiscreteMeasure::new(
            Dilation::Plane,
            3,
            vec![(LatticeElem::new(1, -2), q("1/3")), (LatticeElem::new(0, 1), q("2/3"))],
        );
        assert_eq!(parse_measure_csv(&measure_csv(&mu)).unwrap(), mu);
        let empty = DiscreteMeasure::new(Dilation::Line, 0, vec![]);
        assert_eq!(measure_csv(&empty).lines().count(), 2);
        assert_eq!(parse_measure_csv(&measure_csv(&empty)).unwrap(), empty);
    }

    #[test]
    fn lifted_round_trip() {
        let lifted = LiftedFunction {
            depth: 2,
            entries: (0..4u8)
                .map(|j| (RadixAddress::new(Dilation::Plane, vec![j >> 1, j & 1]).unwrap(), QuadScalar::from_int(j.into())))
                .collect(),
        };
        let text = lifted_csv(&lifted).unwrap();
        assert!(text.lines().nth(2).unwrap().starts_with(".01,0,-0.5,1"));
        let cells = parse_lifted_csv(&text).unwrap();
        assert_eq!(cells.scale, 2);
        assert_eq!(cells.cells[3], (LatticeElem::new(2, 1), 3.0));
    }

    fn scalar() -> impl Strategy<Value = QuadScalar> {
        (-50i64..50, -50i64..50, 1i64..40).prop_map(|(a, b, d)| QuadScalar::small(a, b, d, 3).unwrap())
    }

    proptest! {
        #[test]
        fn matrix_dump_round_trips(cells in prop::collection::vec(scalar(), 1..5).prop_flat_map(|row| {
            let n = row.len();
            prop::collection::vec(prop::collection::vec(scalar(), n), 1..5)
        })) {
            let m = Matrix::from_rows(cells).unwrap();
            prop_assert_eq!(parse_matrix_csv(&matrix_csv(&m)).unwrap(), m);
        }

        #[test]
        fn vector_dump_round_trips(v in prop::collection::vec(scalar(), 0..8)) {
            prop_assert_eq!(parse_vector_text(&vector_text(&v)).unwrap(), v);
        }
    }
}
