//! Rank-1 lattice rules with random shifts.
//!
//! Point `i` (for `i = 1..=n`) of the rule with generating vector `z` is
//! `t_i = {i z / n}`; the `n`-th point is the origin. Shifted points are mapped
//! to the parameter domain either by centring (`{t + D} - 1/2`) or through the
//! inverse normal CDF (`Phi^{-1}({t + D})`).

use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::CoefficientModel;
use crate::special::inverse_normal_cdf_unchecked;

/// Points summed sequentially before the pairwise reduction in [`qmc_estimate`].
pub const REDUCTION_CHUNK: usize = 64;

/// Replacement for a zero fractional part before the normal transform.
pub const NORMAL_CLAMP: f64 = 1.0 / 9_007_199_254_740_992.0; // 2^-53

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratingVector {
    z: Vec<u64>,
    n: u64,
}

impl GeneratingVector {
    /// Components are reduced modulo `n`, which must be a power of two.
    pub fn new(z: Vec<u64>, n: u64) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return invalid(format!(
                "number of lattice points must be a power of two, got {n}"
            ));
        }
        if z.is_empty() {
            return invalid("generating vector is empty");
        }
        Ok(Self {
            z: z.into_iter().map(|v| v % n).collect(),
            n,
        })
    }

    pub fn z(&self) -> &[u64] {
        &self.z
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    /// Coordinate `j` of point `i` (`1 <= i <= n`).
    #[inline]
    pub fn coordinate(&self, i: u64, j: usize) -> f64 {
        ((i as u128 * self.z[j] as u128) % self.n as u128) as f64 / self.n as f64
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for z in &self.z {
            writeln!(w, "{z}")?;
        }
        Ok(())
    }
}

/// Domain of the entries of a [`SampleMatrix`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleDomain {
    /// Unshifted lattice points in `[0, 1)`.
    Unit,
    /// `[-1/2, 1/2)`, for the affine model.
    CenteredUniform,
    /// The real line, for the lognormal model.
    Normal,
}

impl From<CoefficientModel> for SampleDomain {
    fn from(m: CoefficientModel) -> Self {
        match m {
            CoefficientModel::Affine => SampleDomain::CenteredUniform,
            CoefficientModel::Lognormal => SampleDomain::Normal,
        }
    }
}

/// `n x s` row-major sample points.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    s: usize,
    data: Vec<f64>,
    domain: SampleDomain,
}

impl SampleMatrix {
    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.s
    }

    pub fn domain(&self) -> SampleDomain {
        self.domain
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.s..(i + 1) * self.s]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Rows `i = 1..=n` of the lattice with the first `s` components of `z`.
pub fn lattice_points(gv: &GeneratingVector, s: usize) -> Result<SampleMatrix> {
    if s > gv.dim() {
        return invalid(format!(
            "requested dimension {s} exceeds generating vector length {}",
            gv.dim()
        ));
    }
    let n = gv.n() as usize;
    let mut data = Vec::with_capacity(n * s);
    for i in 1..=gv.n() {
        data.extend((0..s).map(|j| gv.coordinate(i, j)));
    }
    Ok(SampleMatrix {
        n,
        s,
        data,
        domain: SampleDomain::Unit,
    })
}

#[inline]
fn frac_shift(t: f64, delta: f64) -> f64 {
    let v = t + delta;
    let w = v - v.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// `{t + D} - 1/2`, in `[-1/2, 1/2)`.
#[inline]
pub fn center_uniform(t: f64, delta: f64) -> f64 {
    frac_shift(t, delta) - 0.5
}

/// `Phi^{-1}({t + D})` with a zero fractional part clamped to `2^-53`.
#[inline]
pub fn transform_normal(t: f64, delta: f64) -> f64 {
    let w = frac_shift(t, delta);
    inverse_normal_cdf_unchecked(if w == 0.0 { NORMAL_CLAMP } else { w })
}

fn map_points(points: &SampleMatrix, delta: &[f64], domain: SampleDomain) -> Result<SampleMatrix> {
    if points.domain != SampleDomain::Unit {
        return invalid("shifts apply to unshifted lattice points");
    }
    check_shift(delta, points.s)?;
    let f = match domain {
        SampleDomain::CenteredUniform => center_uniform,
        SampleDomain::Normal => transform_normal,
        SampleDomain::Unit => frac_shift,
    };
    let data = points
        .data
        .chunks(points.s.max(1))
        .flat_map(|row| row.iter().zip(delta).map(|(&t, &d)| f(t, d)))
        .collect();
    Ok(SampleMatrix {
        n: points.n,
        s: points.s,
        data,
        domain,
    })
}

pub fn shift_center_uniform(points: &SampleMatrix, delta: &[f64]) -> Result<SampleMatrix> {
    map_points(points, delta, SampleDomain::CenteredUniform)
}

pub fn shift_transform_normal(points: &SampleMatrix, delta: &[f64]) -> Result<SampleMatrix> {
    map_points(points, delta, SampleDomain::Normal)
}

fn check_shift(delta: &[f64], s: usize) -> Result<()> {
    if delta.len() != s {
        return invalid(format!("shift of length {} for dimension {s}", delta.len()));
    }
    if let Some(d) = delta.iter().find(|d| !(**d >= 0.0 && **d < 1.0)) {
        return invalid(format!("shift component {d} outside [0, 1)"));
    }
    Ok(())
}

/// `R` i.i.d. uniform shifts in `[0, 1)^s`.
///
/// Shift `r` is drawn from a ChaCha8 stream selected by `r` under the key
/// `seed`, so each shift is reproducible on its own.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftSet {
    shifts: Vec<Vec<f64>>,
    seed: Option<u64>,
}

impl ShiftSet {
    pub fn generate(count: usize, s: usize, seed: u64) -> Result<Self> {
        if count == 0 || s == 0 {
            return invalid("shift count and dimension must be positive");
        }
        let shifts = (0..count)
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                (0..s).map(|_| rng.random::<f64>()).collect()
            })
            .collect();
        Ok(Self {
            shifts,
            seed: Some(seed),
        })
    }

    /// Explicit shifts (for instance the zero shift when debugging).
    pub fn from_shifts(shifts: Vec<Vec<f64>>) -> Result<Self> {
        let s = shifts.first().map_or(0, Vec::len);
        if s == 0 {
            return invalid("at least one nonempty shift is required");
        }
        for d in &shifts {
            check_shift(d, s)?;
        }
        Ok(Self { shifts, seed: None })
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.shifts[0].len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn shift(&self, r: usize) -> &[f64] {
        &self.shifts[r]
    }

    /// Sample matrix of shift `r` mapped to `domain`.
    pub fn samples(&self, gv: &GeneratingVector, r: usize, domain: SampleDomain) -> Result<SampleMatrix> {
        let points = lattice_points(gv, self.dim())?;
        map_points(&points, &self.shifts[r], domain)
    }
}

/// Shift-averaged lattice estimate of a vector-valued integrand.
#[derive(Clone, Debug, PartialEq)]
pub struct QmcEstimate {
    /// `Q_r = (1/n) sum_i G(y_i^(r))`.
    pub shift_means: Vec<Vec<f64>>,
    /// `(1/R) sum_r Q_r`.
    pub mean: Vec<f64>,
}

/// Evaluates `eval` at every shifted lattice point and averages.
///
/// Points are evaluated in parallel, but the reduction tree (blocks of
/// [`REDUCTION_CHUNK`] points summed in order, then pairwise) depends only
/// on `n`, so the result is bitwise identical for any thread count.
pub fn qmc_estimate<F>(
    gv: &GeneratingVector,
    shifts: &ShiftSet,
    domain: SampleDomain,
    eval: F,
) -> Result<QmcEstimate>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let s = shifts.dim();
    if s > gv.dim() {
        return invalid(format!(
            "parameter dimension {s} exceeds generating vector length {}",
            gv.dim()
        ));
    }
    let n = gv.n();
    let map: fn(f64, f64) -> f64 = match domain {
        SampleDomain::CenteredUniform => center_uniform,
        SampleDomain::Normal => transform_normal,
        SampleDomain::Unit => frac_shift,
    };
    let shift_sums = (0..shifts.len())
        .into_par_iter()
        .map(|r| {
            let delta = shifts.shift(r);
            let point = |i: u64, y: &mut Vec<f64>| {
                y.clear();
                y.extend((0..s).map(|j| map(gv.coordinate(i, j), delta[j])));
            };
            let eval_at = |i: u64| -> Result<Vec<f64>> {
                let mut y = Vec::with_capacity(s);
                point(i, &mut y);
                eval(&y).map_err(|e| {
                    let head: Vec<String> = y.iter().take(4).map(|v| format!("{v:.6}")).collect();
                    let ell = if s > 4 { ", ..." } else { "" };
                    e.context(format!("shift {r}, point {i}, y = [{}{ell}]", head.join(", ")))
                })
            };
            sum_range(1, n + 1, &eval_at)
        })
        .collect::<Result<Vec<_>>>()?;
    let nf = n as f64;
    let shift_means: Vec<Vec<f64>> = shift_sums
        .into_iter()
        .map(|v| v.into_iter().map(|x| x / nf).collect())
        .collect();
    let len = shift_means[0].len();
    let rf = shift_means.len() as f64;
    let mean = (0..len)
        .map(|k| shift_means.iter().map(|q| q[k]).sum::<f64>() / rf)
        .collect();
    Ok(QmcEstimate { shift_means, mean })
}

fn sum_range<F>(lo: u64, hi: u64, eval: &F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    let chunk = REDUCTION_CHUNK as u64;
    let blocks = (hi - lo).div_ceil(chunk);
    if blocks <= 1 {
        let mut acc = eval(lo)?;
        for i in lo + 1..hi {
            let v = eval(i)?;
            if v.len() != acc.len() {
                return Err(Error::Validation("integrand changed its output length".into()));
            }
            acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        return Ok(acc);
    }
    let mid = lo + blocks.div_ceil(2) * chunk;
    let (a, b) = rayon::join(|| sum_range(lo, mid, eval), || sum_range(mid, hi, eval));
    let (mut a, b) = (a?, b?);
    if a.len() != b.len() {
        return Err(Error::Validation("integrand changed its output length".into()));
    }
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    Ok(a)
}

/// Reads the first `s` components of a generating vector for `n` points.
///
/// Accepts one integer per line or `index value` pairs per line; blank lines
/// and lines starting with `#` are skipped.
pub fn load_generating_vector(path: &Path, n: u64, s: usize) -> Result<GeneratingVector> {
    let file = std::fs::File::open(path).map_err(|e| Error::from(e).context(path.display()))?;
    parse_generating_vector(std::io::BufReader::new(file), n, s).map_err(|e| e.context(path.display()))
}

pub fn parse_generating_vector<R: BufRead>(reader: R, n: u64, s: usize) -> Result<GeneratingVector> {
    if s == 0 {
        return invalid("dimension must be positive");
    }
    let mut z = Vec::with_capacity(s);
    let mut layout: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        if z.len() == s {
            break;
        }
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() > 2 || layout.is_some_and(|l| l != fields.len()) {
            return Err(Error::Parse(format!(
                "line {}: expected one value or an index/value pair consistently",
                lineno + 1
            )));
        }
        layout = Some(fields.len());
        let raw = fields[fields.len() - 1];
        let v: u64 = raw.parse().map_err(|_| {
            Error::Parse(format!(
                "line {}: '{raw}' is not a nonnegative integer",
                lineno + 1
            ))
        })?;
        z.push(v);
    }
    if z.len() < s {
        return Err(Error::Parse(format!(
            "generating vector has {} components, {s} required",
            z.len()
        )));
    }
    GeneratingVector::new(z, n)
}
