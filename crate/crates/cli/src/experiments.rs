//! Experiment runners. Each returns named pass/fail checks plus tables.

use kernelflows::flow::kernel_rows;
use kernelflows::generator::generator_check;
use kernelflows::measures::sign_patterns;
use kernelflows::motion::sample_npoint_at;
use kernelflows::paths::path_rows;
use kernelflows::rng::derive_seed;
use kernelflows::skewbm::{sign_product_measure, Construction};
use kernelflows::stats::{chi_square_gof, ks_one_sample, normal_cdf};
use kernelflows::suite::{self, Table};
use kernelflows::{generate_brownian, kernel_km, sample_npoint, stream, Domain, ExcursionRegistry, Measure, TimeGrid};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, ConstructionName, ExperimentConfig, ExperimentKind};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

/// Why a run stopped before producing a report.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Library(kernelflows::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Library(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<kernelflows::Error> for RunError {
    fn from(e: kernelflows::Error) -> Self {
        RunError::Library(e)
    }
}

type Result<T> = std::result::Result<T, RunError>;

fn s<T: ToString>(v: T) -> String {
    v.to_string()
}

fn ks_check(name: String, r: &kernelflows::stats::TestReport) -> Check {
    Check { name, pass: r.pass, detail: format!("D = {:.5}, p = {:.4}, n = {}", r.statistic, r.p_value, r.n_samples) }
}

/// Runs the configured experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let measure = cfg.measure()?;
    let (checks, tables) = match cfg.experiment {
        ExperimentKind::OnePoint | ExperimentKind::NPoint => motion(cfg, &measure)?,
        ExperimentKind::Classify => classify(cfg, &measure)?,
        ExperimentKind::Skew => skew(cfg)?,
        ExperimentKind::Generator => generator(cfg, &measure)?,
        ExperimentKind::Chaos => chaos(cfg)?,
    };
    Ok(Report { experiment: cfg.experiment.name().into(), seed: cfg.seed, checks, tables })
}

type Parts = (Vec<Check>, Vec<Table>);

/// Marginals of each coordinate at the horizon, the joint sign pattern of
/// the coordinates started at 0, and full dumps of the first replicas.
fn motion(cfg: &ExperimentConfig, m: &Measure) -> Result<Parts> {
    let grid = TimeGrid::covering(cfg.grid.horizon, cfg.grid.dt)?;
    let horizon = grid.horizon();
    let x0 = cfg.starts();
    let n = x0.len();
    let end = grid.steps();
    let seed = cfg.seed;
    let snaps: Vec<(Vec<f64>, Vec<i8>)> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let path = generate_brownian(grid, &mut stream(seed, Domain::Path, r));
            let snap = sample_npoint_at(&path, m, &x0, &[end], &mut stream(seed, Domain::Signs, r))?;
            let last = snap.into_iter().next().expect("one snapshot");
            Ok((last.positions, last.signs))
        })
        .collect::<std::result::Result<_, kernelflows::Error>>()?;

    let mut checks = Vec::new();
    let mut coord_names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut endpoints = Table::new("endpoints", &["replica"]);
    endpoints.header.append(&mut coord_names.clone());
    for (r, (pos, _)) in snaps.iter().enumerate() {
        endpoints.push(std::iter::once(s(r)).chain(pos.iter().map(s)));
    }
    for i in 0..n {
        let centred: Vec<f64> = snaps.iter().map(|(p, _)| p[i] - x0[i]).collect();
        if centred.len() >= kernelflows::stats::KS_MIN_SAMPLES {
            let report = ks_one_sample(&centred, normal_cdf(horizon))?;
            checks.push(ks_check(format!("coordinate {} ~ N({}, {horizon})", i + 1, x0[i]), &report));
        }
    }

    let mut tables = vec![endpoints];
    let origin: Vec<usize> = (0..n).filter(|&i| x0[i] == 0.0).collect();
    if !origin.is_empty() {
        let mut counts = vec![0u64; 1 << origin.len()];
        for (_, signs) in &snaps {
            let idx = origin.iter().fold(0, |acc, &i| (acc << 1) | usize::from(signs[i] > 0));
            counts[idx] += 1;
        }
        let probs: Vec<f64> = sign_patterns(origin.len()).map(|p| m.mixed_moment(&p)).collect();
        let mut t = Table::new("sign_patterns", &["coordinates", "pattern", "count", "frequency", "probability"]);
        let label: Vec<String> = origin.iter().map(|i| s(i + 1)).collect();
        for (k, p) in sign_patterns(origin.len()).enumerate() {
            let pattern: String = p.iter().map(|&v| if v > 0 { '+' } else { '-' }).collect();
            t.push([label.join(";"), pattern, s(counts[k]), s(counts[k] as f64 / snaps.len() as f64), s(probs[k])]);
        }
        tables.push(t);
        if origin.len() > 1 {
            let report = chi_square_gof(&counts, &probs);
            checks.push(Check {
                name: "sign patterns of coordinates started at 0".into(),
                pass: report.pass,
                detail: format!("chi2 = {:.3}, p = {:.4}", report.statistic, report.p_value),
            });
        }
    }

    let mut paths = Table::new("paths", &["replica", "index", "time", "w"]);
    let mut traj = Table::new("trajectories", &["replica", "t"]);
    traj.header.append(&mut coord_names);
    let mut kernels = Table::new("kernels", &["replica", "s", "t", "x", "atom_pos", "atom_weight"]);
    let checkpoints: Vec<usize> = (1..=10).map(|j| j * end / 10).filter(|&j| j > 0).collect();
    for r in 0..cfg.dump.min(cfg.replicas) as u64 {
        let path = generate_brownian(grid, &mut stream(seed, Domain::Path, r));
        let np = sample_npoint(&path, m, &x0, &mut stream(seed, Domain::Signs, r))?;
        for (j, t, w) in path_rows(&path) {
            paths.push([s(r), s(j), s(t), s(w)]);
        }
        for (t, xs) in np.trajectory_rows() {
            traj.push([s(r), s(t)].into_iter().chain(xs.iter().map(s)));
        }
        // The motion draws its registry seed first, so this is the kernel
        // the dumped trajectories were sampled from.
        let registry_seed: u64 = stream(seed, Domain::Signs, r).random();
        let mut registry = ExcursionRegistry::new(m, registry_seed);
        for &x in &x0 {
            for &t in &checkpoints {
                let k = kernel_km(&path, &mut registry, 0, t, x)?;
                for row in kernel_rows(&path, 0, t, x, &k) {
                    kernels.push([s(r), s(row.0), s(row.1), s(row.2), s(row.3), s(row.4)]);
                }
            }
        }
    }
    tables.extend([paths, traj, kernels]);
    Ok((checks, tables))
}

fn classify(cfg: &ExperimentConfig, m: &Measure) -> Result<Parts> {
    let points = cfg.points.unwrap_or(4);
    let rows = suite::classify_measure(m, points, cfg.grid.dt, cfg.grid.horizon, cfg.replicas, cfg.seed)?;
    let mut t = Table::new("classify", &["m", "k", "estimate", "ci_low", "ci_high", "stderr", "alpha", "pass"]);
    let mut checks = Vec::new();
    for r in &rows {
        let (lo, hi) = (r.estimate - 3.0 * r.stderr, r.estimate + 3.0 * r.stderr);
        t.push([r.measure.clone(), s(r.k), s(r.estimate), s(lo), s(hi), s(r.stderr), s(r.alpha), s(r.pass)]);
        checks.push(Check {
            name: format!("alpha_{} for {}", r.k, r.measure),
            pass: r.pass,
            detail: format!("estimate {:.5} in [{lo:.5}, {hi:.5}], alpha = {:.5}", r.estimate, r.alpha),
        });
    }
    Ok((checks, vec![t]))
}

fn skew(cfg: &ExperimentConfig) -> Result<Parts> {
    let alpha = cfg.alpha.expect("validated");
    let horizon = cfg.grid.horizon;
    let scale = cfg.walk_scale.unwrap_or(kernelflows::skewbm::DEFAULT_WALK_SCALE);
    let product_measure = match &cfg.measure {
        Some(spec) => Some(spec.build()?),
        None => sign_product_measure(alpha).ok(),
    };
    let chosen: Vec<Construction> = match &cfg.constructions {
        Some(list) => list.iter().map(|&c| c.into()).collect(),
        None => {
            let mut all = vec![ConstructionName::Flips, ConstructionName::Walk];
            if product_measure.is_some() {
                all.push(ConstructionName::SignProduct);
            }
            all.into_iter().map(Into::into).collect()
        }
    };
    let mut samples = Vec::new();
    let mut t = Table::new("skew_samples", &["construction", "alpha", "t", "z"]);
    let (mut lowest, mut highest) = (f64::INFINITY, f64::NEG_INFINITY);
    for (j, &c) in chosen.iter().enumerate() {
        let m = match (c, &product_measure) {
            (Construction::SignProduct, None) => {
                return Err(ConfigError(format!("no mean-1/2 measure gives a sign product with alpha = {alpha}")).into())
            }
            (_, Some(m)) => m.clone(),
            (_, None) => Measure::DiracHalf,
        };
        let sub = derive_seed(cfg.seed, Domain::Probe, j as u64);
        let zs = suite::skew_samples(c, alpha, &m, cfg.grid.dt, scale, horizon, cfg.replicas, sub).map_err(|e| match e {
            kernelflows::Error::InvalidArgument(msg) => RunError::Config(ConfigError(msg)),
            other => other.into(),
        })?;
        for z in &zs {
            t.push([c.name().into(), s(alpha), s(horizon), s(z.end)]);
            lowest = lowest.min(z.min);
            highest = highest.max(z.max);
        }
        samples.push((c, zs.iter().map(|z| z.end).collect::<Vec<f64>>()));
    }
    let mut checks = Vec::new();
    let rows = if cfg.replicas >= kernelflows::stats::KS_MIN_SAMPLES { suite::skew_ks_rows(alpha, horizon, &samples)? } else { Vec::new() };
    for r in &rows {
        checks.push(ks_check(r.label.clone(), &r.report));
    }
    if alpha == 1.0 {
        checks.push(Check { name: "min Z >= 0".into(), pass: lowest >= 0.0, detail: format!("min Z = {lowest}") });
    }
    if alpha == 0.0 {
        checks.push(Check { name: "max Z <= 0".into(), pass: highest <= 0.0, detail: format!("max Z = {highest}") });
    }
    Ok((checks, vec![t, suite::ks_table("skew_ks", &rows)]))
}

fn generator(cfg: &ExperimentConfig, m: &Measure) -> Result<Parts> {
    let x = cfg.x.clone().expect("validated");
    let t = cfg.time_parameter(kernelflows::suite::sizes::GENERATOR_TIME)?;
    let (one, two) = suite::generator_functions(m)?;
    let report = if x.len() == 1 {
        generator_check(&one, m, &x, t, cfg.replicas, cfg.seed)?
    } else {
        generator_check(&two, m, &x, t, cfg.replicas, cfg.seed)?
    };
    let check = Check {
        name: format!("A^{} f at {:?} for {}", report.n, report.x, report.measure),
        pass: report.pass,
        detail: format!(
            "extrapolated {:.5}, A f = {:.5}, gap {:.2e} <= {:.2e}",
            report.richardson, report.an_value, report.discrepancy, report.tolerance
        ),
    };
    Ok((vec![check], vec![suite::generator_table(&[report])]))
}

fn chaos(cfg: &ExperimentConfig) -> Result<Parts> {
    let x = cfg.x.as_ref().map_or(0.0, |v| v[0]);
    let t = cfg.time_parameter(suite::sizes::CHAOS_TIME)?;
    let r = suite::chaos_check(&suite::chaos_profile(), x, t, cfg.replicas, cfg.seed)?;
    let mut table = Table::new("chaos", &["order", "l2_error", "stderr"]);
    for o in 0..3 {
        table.push([s(o), s(r.errors[o]), s(r.stderrs[o])]);
    }
    let check = Check {
        name: "L2 error decreases with order".into(),
        pass: r.pass(),
        detail: format!("{:.3e} > {:.3e} > {:.3e}", r.errors[0], r.errors[1], r.errors[2]),
    };
    Ok((vec![check], vec![table]))
}

/// Runs the numbered checks in `ids` (all ten when empty).
pub fn verify(seed: u64, ids: &[u32]) -> Result<Report> {
    let ids: Vec<u32> = if ids.is_empty() { (1..=10).collect() } else { ids.to_vec() };
    let mut checks = Vec::new();
    let mut tables = Vec::new();
    for id in ids {
        if !(1..=10).contains(&id) {
            return Err(ConfigError(format!("no check numbered {id}")).into());
        }
        let o = suite::run_check(id, seed)?;
        checks.push(Check { name: format!("{:>2} {}", o.id, o.title), pass: o.pass, detail: o.summary });
        tables.extend(o.tables);
    }
    Ok(Report { experiment: "verify".into(), seed, checks, tables })
}
