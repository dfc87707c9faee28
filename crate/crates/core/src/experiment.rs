//! Convergence studies of the shift-averaged lattice estimate of the mean
//! solution.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dg::{
    assemble_load, assemble_operator, l2_norm_sq, penalty_for_sample, trace_constant_sq, CoefficientValues,
    ConformingP1, DgFunction, DgSpace, NodalFunction, PenaltyPolicy, Theta,
};
use crate::error::{invalid, Error, Result};
use crate::field::{CoefficientModel, FieldSampler, RandomFieldSpec};
use crate::lattice::{load_generating_vector, qmc_estimate, GeneratingVector, SampleDomain, ShiftSet};
use crate::linalg::solve_checked;
use crate::mesh::Mesh;
use crate::theory::{cbc_construct, weights_for_spec, CbcOptions, PodWeights, RegularityConstants};

/// Where generating vectors come from.
#[derive(Clone, Debug, PartialEq)]
pub enum VectorSource {
    /// Constructed for each `n` by the CBC algorithm with the model's POD weights.
    Cbc,
    /// A text file in one of the layouts accepted by [`load_generating_vector`].
    File(PathBuf),
}

impl Serialize for VectorSource {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            VectorSource::Cbc => s.serialize_str("cbc"),
            VectorSource::File(p) => s.serialize_str(&p.to_string_lossy()),
        }
    }
}

impl From<&str> for VectorSource {
    fn from(s: &str) -> Self {
        if s == "cbc" {
            VectorSource::Cbc
        } else {
            VectorSource::File(PathBuf::from(s))
        }
    }
}

impl<'de> Deserialize<'de> for VectorSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(VectorSource::from(String::deserialize(d)?.as_str()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    Dg,
    ConformingP1,
}

/// How the root mean squared error is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Spread of the `R` shift means.
    Spread,
    /// Distance of the grand mean to the grand mean at the largest `n`.
    Reference,
}

/// A convergence study. Field names are the configuration file keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: CoefficientModel,
    /// Constant mean field; defaults to 5 (affine) or 1 (lognormal).
    pub a0: Option<f64>,
    pub decay: f64,
    pub s: usize,
    pub mesh_m: usize,
    pub degree: usize,
    pub theta: Theta,
    pub eta: PenaltyPolicy,
    /// Slack in the coercivity threshold used for the penalty warning.
    pub tau: f64,
    pub n_list: Vec<u64>,
    pub shifts: usize,
    pub seed: u64,
    pub vector: VectorSource,
    pub out: PathBuf,
    pub discretization: Discretization,
    pub estimator: Estimator,
    /// `p = 1/decay + p_slack` determines `lambda` for the CBC weights.
    pub p_slack: f64,
    pub cbc: CbcOptions,
    pub constants: RegularityConstants,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: CoefficientModel::Affine,
            a0: None,
            decay: 1.3,
            s: 100,
            mesh_m: 16,
            degree: 1,
            theta: Theta::Symmetric,
            eta: PenaltyPolicy::Constant(100.0),
            tau: 1.0,
            n_list: (14..=19).map(|k| 1u64 << k).collect(),
            shifts: 16,
            seed: 1,
            vector: VectorSource::Cbc,
            out: PathBuf::from("rmse.txt"),
            discretization: Discretization::Dg,
            estimator: Estimator::Spread,
            p_slack: 0.01,
            cbc: CbcOptions::default(),
            constants: RegularityConstants::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn a0(&self) -> f64 {
        self.a0.unwrap_or(self.mode.default_a0())
    }

    /// Checks every constraint, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, msg: String| -> Result<()> { invalid(format!("{key}: {msg}")) };
        if let Some(a0) = self.a0 {
            if !(a0 > 0.0 && a0.is_finite()) {
                return fail("a0", format!("must be positive, got {a0}"));
            }
        }
        if !(self.decay > 1.0 && self.decay.is_finite()) {
            return fail("decay", format!("must exceed 1, got {}", self.decay));
        }
        if self.s == 0 {
            return fail("s", "must be positive".into());
        }
        if self.mesh_m == 0 {
            return fail("mesh_m", "must be positive".into());
        }
        if !(1..=2).contains(&self.degree) {
            return fail("degree", format!("must be 1 or 2, got {}", self.degree));
        }
        if let Err(e) = self.eta.validate() {
            return fail("eta", e.to_string());
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return fail("tau", format!("must be positive, got {}", self.tau));
        }
        if self.n_list.is_empty() {
            return fail("n_list", "must not be empty".into());
        }
        for (i, &n) in self.n_list.iter().enumerate() {
            if n == 0 || !n.is_power_of_two() {
                return fail(&format!("n_list[{i}]"), format!("{n} is not a power of two"));
            }
            if i > 0 && n <= self.n_list[i - 1] {
                return fail(
                    &format!("n_list[{i}]"),
                    "values must be strictly increasing".into(),
                );
            }
        }
        if self.shifts < 2 {
            return fail(
                "shifts",
                format!("at least 2 random shifts are required, got {}", self.shifts),
            );
        }
        if self.estimator == Estimator::Reference && self.n_list.len() < 2 {
            return fail(
                "n_list",
                "the reference estimator needs at least two values".into(),
            );
        }
        let p = 1.0 / self.decay + self.p_slack;
        if !(self.p_slack > 0.0 && p < 1.0) {
            return fail(
                "p_slack",
                format!("1/decay + p_slack must lie in (1/decay, 1), got {p}"),
            );
        }
        if self.cbc.max_order == 0 {
            return fail("cbc.max_order", "must be positive".into());
        }
        if let Err(e) = self.constants.validate() {
            return fail("constants", e.to_string());
        }
        Ok(())
    }

    pub fn field_spec(&self) -> Result<RandomFieldSpec> {
        RandomFieldSpec::new(self.mode, self.a0(), self.decay, self.s)
    }
}

/// Default right-hand side `f(x) = x_1`.
pub fn default_source(x: [f64; 2]) -> f64 {
    x[0]
}

/// A parameter-to-solution map with an `L^2(D)` structure on its outputs.
pub trait ParametricModel: Sync {
    fn dim(&self) -> usize;
    fn output_len(&self) -> usize;
    fn solve(&self, y: &[f64]) -> Result<Vec<f64>>;
    fn l2_norm_sq(&self, v: &[f64]) -> Result<f64>;
}

/// IPDG solves on the structured mesh.
pub struct DgModel {
    spec: RandomFieldSpec,
    space: DgSpace,
    sampler: FieldSampler,
    load: Vec<f64>,
    theta: Theta,
    policy: PenaltyPolicy,
    trace_sq: f64,
    tau: f64,
    below_threshold: AtomicUsize,
}

impl DgModel {
    pub fn new(
        spec: RandomFieldSpec,
        mesh_m: usize,
        degree: usize,
        theta: Theta,
        policy: PenaltyPolicy,
        tau: f64,
        f: impl Fn([f64; 2]) -> f64,
    ) -> Result<Self> {
        let space = DgSpace::new(Mesh::structured(mesh_m)?, degree)?;
        let sampler = spec.sampler(space.coefficient_points());
        let load = assemble_load(&space, f);
        let trace_sq = trace_constant_sq(space.mesh(), degree);
        Ok(Self {
            spec,
            space,
            sampler,
            load,
            theta,
            policy: policy.validate()?,
            trace_sq,
            tau,
            below_threshold: AtomicUsize::new(0),
        })
    }

    pub fn space(&self) -> &DgSpace {
        &self.space
    }

    /// Number of solves so far whose penalty was below the coercivity threshold.
    pub fn penalty_warnings(&self) -> usize {
        self.below_threshold.load(Ordering::Relaxed)
    }

    pub fn solve_function(&self, y: &[f64]) -> Result<DgFunction> {
        self.space.function(self.solve(y)?)
    }
}

impl ParametricModel for DgModel {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn output_len(&self) -> usize {
        self.space.num_dofs()
    }

    fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        let pen = penalty_for_sample(self.policy, &self.spec, y, self.theta, self.trace_sq, self.tau)?;
        if pen.below_threshold() {
            self.below_threshold.fetch_add(1, Ordering::Relaxed);
        }
        let coeff = CoefficientValues::new(&self.space, self.sampler.values(y)?)?;
        let a = assemble_operator(&self.space, &coeff, self.theta, pen.eta)?;
        solve_checked(&a, &self.load, crate::dg::SOLVE_TOLERANCE)
    }

    fn l2_norm_sq(&self, v: &[f64]) -> Result<f64> {
        l2_norm_sq(&self.space, &self.space.function(v.to_vec())?)
    }
}

/// Conforming P1 solves, the comparison discretization.
pub struct ConformingModel {
    spec: RandomFieldSpec,
    p1: ConformingP1,
    sampler: FieldSampler,
    load: Vec<f64>,
}

impl ConformingModel {
    pub fn new(spec: RandomFieldSpec, mesh_m: usize, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let p1 = ConformingP1::new(mesh_m)?;
        let sampler = spec.sampler(p1.coefficient_points());
        let load = p1.load(f);
        Ok(Self {
            spec,
            p1,
            sampler,
            load,
        })
    }
}

impl ParametricModel for ConformingModel {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn output_len(&self) -> usize {
        self.p1.mesh().vertices().len()
    }

    fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.p1.solve(&self.sampler.values(y)?, &self.load)?.values)
    }

    fn l2_norm_sq(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.output_len() {
            return invalid("nodal vector does not match the mesh");
        }
        Ok(self.p1.l2_norm_sq(&NodalFunction { values: v.to_vec() }))
    }
}

/// Least-squares fit `log e = log C + r log n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub c: f64,
    pub r: f64,
    /// Root mean square of the residuals in `log e`.
    pub residual: f64,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return invalid("a rate fit needs at least two points");
    }
    if let Some(&(n, e)) = points.iter().find(|(n, e)| !(*n > 0.0 && *e > 0.0)) {
        return invalid(format!("rate fit needs positive data, got ({n}, {e})"));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    if sxx == 0.0 {
        return invalid("rate fit needs at least two distinct n");
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let r = sxy / sxx;
    let lc = ym - r * xm;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - lc - r * x).powi(2)).sum();
    Ok(RateFit {
        c: lc.exp(),
        r,
        residual: (rss / m).sqrt(),
    })
}

/// `sqrt(1/(R(R-1)) sum_r ||Q_r - Q||^2)` with `Q` the mean of the `Q_r`.
pub fn rms_error_estimate(shift_means: &[Vec<f64>], norm_sq: impl Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    let r = shift_means.len();
    if r < 2 {
        return invalid(format!("the spread estimator needs at least 2 shifts, got {r}"));
    }
    let len = shift_means[0].len();
    if shift_means.iter().any(|q| q.len() != len) {
        return invalid("shift means differ in length");
    }
    let mean: Vec<f64> = (0..len)
        .map(|k| shift_means.iter().map(|q| q[k]).sum::<f64>() / r as f64)
        .collect();
    let mut total = 0.0;
    let mut diff = vec![0.0; len];
    for q in shift_means {
        for k in 0..len {
            diff[k] = q[k] - mean[k];
        }
        total += norm_sq(&diff)?;
    }
    Ok((total / (r * (r - 1)) as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `(n, rmse)` per lattice size.
    pub rows: Vec<(u64, f64)>,
    /// Absent when fewer than two positive errors are available.
    pub fit: Option<RateFit>,
    pub config: ExperimentConfig,
    pub wall_time_s: f64,
    pub solves: u64,
    pub penalty_warnings: u64,
}

/// Generating vector for `n` points according to the configured source.
pub fn generating_vector(
    config: &ExperimentConfig,
    weights: Option<&PodWeights>,
    n: u64,
) -> Result<GeneratingVector> {
    match &config.vector {
        VectorSource::File(p) => load_generating_vector(p, n, config.s),
        VectorSource::Cbc => {
            let w = weights.ok_or_else(|| Error::Validation("CBC construction needs weights".into()))?;
            Ok(cbc_construct(n, config.s, w, &config.cbc)?.vector)
        }
    }
}

/// Runs the study described by `config` on the current rayon pool.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let spec = config.field_spec()?;
    match config.discretization {
        Discretization::Dg => {
            let model = DgModel::new(
                spec,
                config.mesh_m,
                config.degree,
                config.theta,
                config.eta,
                config.tau,
                default_source,
            )?;
            let mut report = run_convergence_with(config, &model)?;
            report.penalty_warnings = model.penalty_warnings() as u64;
            if report.penalty_warnings > 0 {
                log::warn!(
                    "{} of {} solves used a penalty below the coercivity threshold",
                    report.penalty_warnings,
                    report.solves
                );
            }
            Ok(report)
        }
        Discretization::ConformingP1 => {
            let model = ConformingModel::new(spec, config.mesh_m, default_source)?;
            run_convergence_with(config, &model)
        }
    }
}

/// [`run_convergence`] on a dedicated pool of `threads` workers.
pub fn run_convergence_in_pool(config: &ExperimentConfig, threads: usize) -> Result<ConvergenceReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Validation(format!("cannot build a pool of {threads} threads: {e}")))?;
    pool.install(|| run_convergence(config))
}

/// Runs the study for an arbitrary parametric model.
pub fn run_convergence_with(
    config: &ExperimentConfig,
    model: &dyn ParametricModel,
) -> Result<ConvergenceReport> {
    config.validate()?;
    if model.dim() != config.s {
        return invalid(format!(
            "model dimension {} differs from s = {}",
            model.dim(),
            config.s
        ));
    }
    let start = Instant::now();
    let spec = config.field_spec()?;
    let weights = match config.vector {
        VectorSource::Cbc => Some(weights_for_spec(&spec, config.p_slack, &config.constants)?),
        VectorSource::File(_) => None,
    };
    let shifts = ShiftSet::generate(config.shifts, config.s, config.seed)?;
    let domain = SampleDomain::from(config.mode);
    let mut rows = Vec::with_capacity(config.n_list.len());
    let mut grand_means = Vec::with_capacity(config.n_list.len());
    let mut solves = 0u64;
    for &n in &config.n_list {
        let t = Instant::now();
        let gv = generating_vector(config, weights.as_ref(), n)?;
        let est = qmc_estimate(&gv, &shifts, domain, |y| model.solve(y))?;
        solves += n * config.shifts as u64;
        if config.estimator == Estimator::Spread {
            let e = rms_error_estimate(&est.shift_means, |v| model.l2_norm_sq(v))?;
            log::info!("n = {n}: rmse {e:e} ({:.1} s)", t.elapsed().as_secs_f64());
            rows.push((n, e));
        } else {
            log::info!(
                "n = {n}: grand mean computed ({:.1} s)",
                t.elapsed().as_secs_f64()
            );
        }
        grand_means.push(est.mean);
    }
    if config.estimator == Estimator::Reference {
        let reference = grand_means.last().expect("n_list is nonempty");
        for (&n, q) in config
            .n_list
            .iter()
            .zip(&grand_means)
            .take(config.n_list.len() - 1)
        {
            let d: Vec<f64> = q.iter().zip(reference).map(|(a, b)| a - b).collect();
            rows.push((n, model.l2_norm_sq(&d)?.sqrt()));
        }
    }
    let fit = fit_report_rows(&rows);
    Ok(ConvergenceReport {
        rows,
        fit,
        config: config.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        solves,
        penalty_warnings: 0,
    })
}

fn fit_report_rows(rows: &[(u64, f64)]) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(n, e)| (n as f64, e)).collect();
    match fit_rate(&pts) {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("no rate fitted: {e}");
            None
        }
    }
}

/// Path of the metadata file written next to a table.
pub fn meta_path(table: &Path) -> PathBuf {
    let mut s = table.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes `n rmse` rows without a header, plus `<path>.meta.json` with the
/// configuration and the fit.
pub fn emit_table(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::from(e).context(path.display()))?,
    );
    write_table(&report.rows, &mut w)?;
    w.flush()?;
    let meta = serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(meta_path(path), meta + "\n")?;
    Ok(())
}

pub fn write_table<W: Write>(rows: &[(u64, f64)], mut w: W) -> std::io::Result<()> {
    for (n, e) in rows {
        writeln!(w, "{n} {e:e}")?;
    }
    Ok(())
}

/// Parses a two-column `n error` table; blank lines and `#` comments are skipped.
pub fn read_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::from(e).context(path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Parse(format!("{}:{}: '{s}' is not a number", path.display(), i + 1)))
        };
        if fields.len() != 2 {
            return Err(Error::Parse(format!(
                "{}:{}: expected two columns, found {}",
                path.display(),
                i + 1,
                fields.len()
            )));
        }
        rows.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_exact_power_law() {
        let pts: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0].iter().map(|&n| (n, 7.0 / n)).collect();
        let f = fit_rate(&pts).unwrap();
        assert!((f.r + 1.0).abs() < 1e-12 && (f.c - 7.0).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        let two = fit_rate(&[(2.0, 3.0), (4.0, 1.0)]).unwrap();
        assert!((two.c * 4f64.powf(two.r) - 1.0).abs() < 1e-12);
        assert!(fit_rate(&[(2.0, 0.0), (4.0, 1.0)]).is_err());
        assert!(fit_rate(&[(2.0, 1.0)]).is_err());
    }

    #[test]
    fn spread_estimator_examples() {
        let sq = |v: &[f64]| Ok(v.iter().map(|x| x * x).sum());
        assert_eq!(rms_error_estimate(&[vec![0.0], vec![2.0]], sq).unwrap(), 1.0);
        assert_eq!(
            rms_error_estimate(&[vec![1.5], vec![1.5], vec![1.5]], sq).unwrap(),
            0.0
        );
        assert!(rms_error_estimate(&[vec![1.0]], sq).is_err());
        let base = rms_error_estimate(&[vec![0.1, 1.0], vec![0.4, -2.0], vec![0.0, 0.5]], sq).unwrap();
        let scaled = rms_error_estimate(&[vec![0.3, 3.0], vec![1.2, -6.0], vec![0.0, 1.5]], sq).unwrap();
        assert!((scaled - 3.0 * base).abs() < 1e-14);
    }

    #[test]
    fn config_validation_names_keys() {
        let mut c = ExperimentConfig {
            n_list: vec![16, 24],
            ..Default::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("n_list[1]"));
        c.n_list = vec![32, 16];
        assert!(c.validate().is_err());
        c.n_list = vec![16, 32];
        c.shifts = 1;
        assert!(c.validate().unwrap_err().to_string().contains("shifts"));
        c.shifts = 2;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn table_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        let rows = vec![
            (128u64, 1.0 / 3.0),
            (256, 2.2e-7),
            (512, std::f64::consts::PI * 1e-9),
        ];
        let mut buf = Vec::new();
        write_table(&rows, &mut buf).unwrap();
        std::fs::write(&path, &buf).unwrap();
        let back = read_table(&path).unwrap();
        assert_eq!(back.len(), 3);
        for ((n, e), (bn, be)) in rows.iter().zip(&back) {
            assert_eq!(*n as f64, *bn);
            assert_eq!(e.to_bits(), be.to_bits());
        }
        assert!(!String::from_utf8(buf).unwrap().starts_with('#'));
    }
}
