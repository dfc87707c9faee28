use std::io::Write;
use std::path::{Path, PathBuf};

use ipdg_qmc::dg::{dg_norm, l2_norm, penalty_value, trace_constant_sq, CoefficientValues};
use ipdg_qmc::experiment::{
    default_source, emit_table, fit_rate, meta_path, read_table, run_convergence, ConformingModel, DgModel,
    Discretization, ParametricModel, VectorSource,
};
use ipdg_qmc::lattice::load_generating_vector;
use ipdg_qmc::theory::{
    affine_factors, cbc_construct, weights_affine, weights_for_spec, weights_lognormal, PodWeights,
};
use ipdg_qmc::{CoefficientModel, Error, ExperimentConfig, Mesh, ParameterVector, Result};

use crate::config::parse_config;
use crate::manifest::{manifest_path, RunManifest};

/// Loads `path` if given, otherwise the default configuration.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => parse_config(p),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Writes a manifest before `work` starts and rewrites it when it ends.
fn with_manifest<F>(
    command: &str,
    config: &ExperimentConfig,
    inputs: &[&Path],
    manifest: &Path,
    work: F,
) -> Result<()>
where
    F: FnOnce() -> Result<Vec<PathBuf>>,
{
    let mut m = RunManifest::start(command, config, rayon::current_num_threads(), inputs)?;
    m.write(manifest)?;
    let outcome = work();
    m.finish(outcome.as_ref().map(Clone::clone).map_err(ToString::to_string))?;
    m.write(manifest)?;
    outcome.map(|_| ())
}

fn config_inputs<'a>(config_path: Option<&'a Path>, config: &'a ExperimentConfig) -> Vec<&'a Path> {
    let mut inputs: Vec<&Path> = config_path.into_iter().collect();
    if let VectorSource::File(p) = &config.vector {
        inputs.push(p);
    }
    inputs
}

/// Command-line values that take precedence over the configuration file.
#[derive(Clone, Debug, Default)]
pub struct RunOverrides {
    pub out: Option<PathBuf>,
    pub n_list: Option<Vec<u64>>,
    pub shifts: Option<usize>,
    pub seed: Option<u64>,
    pub vector: Option<VectorSource>,
}

impl RunOverrides {
    pub fn apply(self, config: &mut ExperimentConfig) -> Result<()> {
        if let Some(o) = self.out {
            config.out = o;
        }
        if let Some(n) = self.n_list {
            config.n_list = n;
        }
        if let Some(r) = self.shifts {
            config.shifts = r;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(v) = self.vector {
            config.vector = v;
        }
        config.validate()
    }
}

pub fn qmc_run(config_path: &Path, overrides: RunOverrides, stdout: &mut dyn Write) -> Result<()> {
    let mut config = parse_config(config_path)?;
    overrides.apply(&mut config)?;
    check_vector(&config)?;
    let out = config.out.clone();
    let inputs = config_inputs(Some(config_path), &config);
    with_manifest("qmc-run", &config, &inputs, &manifest_path(&out), || {
        let report = run_convergence(&config)?;
        emit_table(&report, &out)?;
        if let Some(fit) = report.fit {
            writeln!(
                stdout,
                "fit C {:e} r {} residual {:e}",
                fit.c, fit.r, fit.residual
            )?;
        }
        writeln!(stdout, "table {}", out.display())?;
        Ok(vec![out.clone(), meta_path(&out)])
    })
}

pub fn solve_one(
    config_path: Option<&Path>,
    y: Vec<f64>,
    dump: Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let config = load_config(config_path)?;
    let spec = config.field_spec()?;
    let y = if y.is_empty() { vec![0.0; config.s] } else { y };
    let y = ParameterVector::new(y, config.mode.parameter_domain())?;
    if y.len() != config.s {
        return Err(Error::Validation(format!(
            "--y has {} entries, s = {}",
            y.len(),
            config.s
        )));
    }
    let mut run = || -> Result<Vec<PathBuf>> {
        match config.discretization {
            Discretization::Dg => {
                let model = DgModel::new(
                    spec.clone(),
                    config.mesh_m,
                    config.degree,
                    config.theta,
                    config.eta,
                    config.tau,
                    default_source,
                )?;
                let space = model.space();
                let trace = trace_constant_sq(space.mesh(), config.degree);
                let pen = penalty_value(config.eta, &spec, y.values(), config.theta, trace, config.tau)?;
                let u = model.solve_function(y.values())?;
                let a = CoefficientValues::new(
                    space,
                    spec.sampler(space.coefficient_points()).values(y.values())?,
                )?;
                writeln!(stdout, "dofs {}", space.num_dofs())?;
                writeln!(stdout, "eta {}", pen.eta)?;
                writeln!(stdout, "dg_norm {:e}", dg_norm(space, &u, &a, pen.eta)?)?;
                writeln!(stdout, "l2_norm {:e}", l2_norm(space, &u)?)?;
                if let Some(p) = &dump {
                    u.write_dump(std::io::BufWriter::new(std::fs::File::create(p)?))?;
                }
            }
            Discretization::ConformingP1 => {
                let model = ConformingModel::new(spec.clone(), config.mesh_m, default_source)?;
                let values = model.solve(y.values())?;
                writeln!(stdout, "dofs {}", values.len())?;
                writeln!(stdout, "l2_norm {:e}", model.l2_norm_sq(&values)?.sqrt())?;
                if let Some(p) = &dump {
                    let mut w = std::io::BufWriter::new(std::fs::File::create(p)?);
                    for v in &values {
                        writeln!(w, "{v:e}")?;
                    }
                }
            }
        }
        Ok(dump.iter().cloned().collect())
    };
    match &dump {
        Some(p) => with_manifest(
            "solve-one",
            &config,
            &config_inputs(config_path, &config),
            &manifest_path(p),
            run,
        ),
        None => run().map(|_| ()),
    }
}

pub fn cbc(
    config_path: Option<&Path>,
    n: u64,
    s: Option<usize>,
    out: Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let mut config = load_config(config_path)?;
    if let Some(s) = s {
        config.s = s;
        config.validate()?;
    }
    let spec = config.field_spec()?;
    let mut run = || -> Result<Vec<PathBuf>> {
        let weights = weights_for_spec(&spec, config.p_slack, &config.constants)?;
        let result = cbc_construct(n, config.s, &weights, &config.cbc)?;
        log::info!(
            "worst-case error after {} components: {:e}",
            config.s,
            result.errors_sq.last().copied().unwrap_or(0.0).sqrt()
        );
        match &out {
            Some(p) => {
                result
                    .vector
                    .write(std::io::BufWriter::new(std::fs::File::create(p)?))?;
                Ok(vec![p.clone()])
            }
            None => {
                result.vector.write(&mut *stdout)?;
                Ok(Vec::new())
            }
        }
    };
    match &out {
        Some(p) => with_manifest(
            "cbc",
            &config,
            &config_inputs(config_path, &config),
            &manifest_path(p),
            run,
        ),
        None => run().map(|_| ()),
    }
}

/// Prints `gamma_u` for all nonempty `u` of size at most `max_order` among
/// the first `dims` dimensions (1-based in the output).
pub fn weights(
    config_path: Option<&Path>,
    max_order: usize,
    dims: usize,
    lambda: Option<f64>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let config = load_config(config_path)?;
    let spec = config.field_spec()?;
    let w: PodWeights = match (lambda, config.mode) {
        (None, _) => weights_for_spec(&spec, config.p_slack, &config.constants)?,
        (Some(l), CoefficientModel::Affine) => weights_affine(&affine_factors(&spec, &config.constants)?, l)?,
        (Some(l), CoefficientModel::Lognormal) => weights_lognormal(&spec.amplitudes(), l)?,
    };
    let dims = dims.min(w.dim());
    writeln!(stdout, "# lambda {}", w.lambda())?;
    let mut subset = Vec::new();
    for order in 1..=max_order.min(dims) {
        print_subsets(&w, dims, order, 0, &mut subset, stdout)?;
    }
    Ok(())
}

fn print_subsets(
    w: &PodWeights,
    dims: usize,
    order: usize,
    from: usize,
    subset: &mut Vec<usize>,
    out: &mut dyn Write,
) -> Result<()> {
    if subset.len() == order {
        let label: Vec<String> = subset.iter().map(|j| (j + 1).to_string()).collect();
        writeln!(out, "{} {:e}", label.join(","), w.gamma(subset)?)?;
        return Ok(());
    }
    for j in from..dims {
        subset.push(j);
        print_subsets(w, dims, order, j + 1, subset, out)?;
        subset.pop();
    }
    Ok(())
}

pub fn mesh_info(m: usize, dump: Option<PathBuf>, stdout: &mut dyn Write) -> Result<()> {
    let mesh = Mesh::structured(m)?;
    let q = mesh.quality_report();
    let boundary = mesh.faces().iter().filter(|f| f.is_boundary()).count();
    writeln!(stdout, "vertices {}", mesh.vertices().len())?;
    writeln!(stdout, "elements {}", mesh.num_elements())?;
    writeln!(
        stdout,
        "faces {} ({} boundary, {} interior)",
        mesh.num_faces(),
        boundary,
        mesh.num_faces() - boundary
    )?;
    writeln!(stdout, "mesh_size {}", mesh.mesh_size())?;
    writeln!(stdout, "min_angle_deg {}", q.min_angle_deg)?;
    writeln!(stdout, "max_diameter_ratio {}", q.max_diameter_ratio)?;
    writeln!(stdout, "degenerate {}", q.degenerate)?;
    if let Some(p) = dump {
        mesh.write_dump(std::io::BufWriter::new(std::fs::File::create(p)?))?;
    }
    Ok(())
}

pub fn rates(table: &Path, stdout: &mut dyn Write) -> Result<()> {
    let rows = read_table(table)?;
    let fit = fit_rate(&rows)?;
    writeln!(stdout, "C {:e}", fit.c)?;
    writeln!(stdout, "r {}", fit.r)?;
    writeln!(stdout, "residual {:e}", fit.residual)?;
    Ok(())
}

/// Checks that a file vector covers the configured `n_list` and `s`.
pub fn check_vector(config: &ExperimentConfig) -> Result<()> {
    if let VectorSource::File(p) = &config.vector {
        for &n in &config.n_list {
            load_generating_vector(p, n, config.s)?;
        }
    }
    Ok(())
}
