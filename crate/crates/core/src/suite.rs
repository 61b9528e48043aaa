//! The verification suite behind `kernelflows verify`.
//!
//! Each check runs at pinned sizes and tolerances from a single 64-bit
//! seed. Replica `r` always reads the same streams, and results are
//! collected in replica order before any reduction, so every number is
//! independent of the thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::flow::kernel_wiener;
use crate::flow::{flow_compose, kernel_km, ExcursionRegistry};
use crate::generator::chaos::{GaussianProfile, Smooth1d};
use crate::generator::{generator_check, ChaosExpansion, DmBuilder, GeneratorReport, TestFunctionDm};
use crate::measures::Measure;
use crate::motion::{sample_npoint, sample_npoint_at, sign_product_process};
use crate::paths::{generate_brownian, BrownianPath, TimeGrid};
use crate::rng::{derive_seed, stream, Domain};
use crate::skewbm::{skew_from_flips, skew_from_walk, Construction, DEFAULT_WALK_SCALE};
use crate::stats::{
    correlation, half_normal_cdf, ks_one_sample, ks_two_sample, mean_se, normal_cdf, skew_marginal_cdf, variance_se, TestReport,
};

/// Pinned sizes.
pub mod sizes {
    /// Replicas for KS-based checks.
    pub const KS_REPLICAS: usize = 10_000;
    /// Replicas for sign and scalar statistics.
    pub const SCALAR_REPLICAS: usize = 100_000;
    /// Grid step for the one- and two-point KS checks.
    pub const FINE_DT: f64 = 1e-4;
    /// Grid step for sign statistics.
    pub const COARSE_DT: f64 = 1e-3;
    pub const FLOW_TUPLES: usize = 1_000;
    pub const FLOW_STEPS: usize = 1_000;
    pub const GENERATOR_TIME: f64 = 1e-3;
    pub const CHAOS_TIME: f64 = 0.1;
    pub const CHAOS_FINE_STEPS: usize = 2_000;
    pub const CHAOS_COARSE_STEPS: usize = 100;
    pub const REGISTRY_PAIRS: usize = 10_000;
    pub const DECOMPOSITION_PIECES: usize = 4;
    /// Grid step for the decomposition, where the grid-minimum bias in
    /// W⁺ and L shows up in the increment variance.
    pub const DECOMPOSITION_DT: f64 = 1e-5;
    /// Grid step for the grid-based skew constructions; at 1e-4 the
    /// grid-minimum bias in W⁺_1 is about 4 SE of the mean.
    pub const SKEW_DT: f64 = 1e-5;
}

/// Exact-equality tolerance for the flow property.
pub const FLOW_TOLERANCE: f64 = 1e-12;

/// A flat table of formatted cells, written as CSV by the runner.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }
}

/// Outcome of one numbered check.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    pub summary: String,
    pub tables: Vec<Table>,
}

fn s<T: ToString>(v: T) -> String {
    v.to_string()
}

fn seed_for(seed: u64, id: u32, part: u64) -> u64 {
    derive_seed(seed, Domain::Suite(id), part)
}

fn unit_grid(dt: f64) -> TimeGrid {
    TimeGrid::covering(1.0, dt).expect("positive step")
}

/// The four measures most checks run over.
pub fn bundled_measures() -> Vec<Measure> {
    vec![Measure::DiracHalf, Measure::FairBernoulli, Measure::Uniform, Measure::beta_symmetric(2.0).expect("valid shape")]
}

/// A labelled KS result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KsRow {
    pub label: String,
    pub report: TestReport,
}

pub fn ks_table(name: &str, rows: &[KsRow]) -> Table {
    let mut t = Table::new(name, &["check", "statistic", "p_value", "n_samples", "pass"]);
    for r in rows {
        t.push([r.label.clone(), s(r.report.statistic), s(r.report.p_value), s(r.report.n_samples), s(r.report.pass)]);
    }
    t
}

/// Endpoints of `replicas` n-point motions from the origin, one per stream.
fn motion_endpoints<T: Send, F: Fn(&crate::motion::NPointPath) -> T + Sync>(
    measure: &Measure,
    n: usize,
    dt: f64,
    replicas: usize,
    seed: u64,
    read: F,
) -> Result<Vec<T>> {
    let grid = unit_grid(dt);
    let x0 = vec![0.0; n];
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let path = generate_brownian(grid, &mut stream(seed, Domain::Path, r));
            let np = sample_npoint(&path, measure, &x0, &mut stream(seed, Domain::Signs, r))?;
            Ok(read(&np))
        })
        .collect()
}

// 1 ───────────────────────────────────────────────────────────────────────

/// X_1 from the origin against N(0, 1) for each bundled measure.
pub fn one_point_law(seed: u64) -> Result<Vec<KsRow>> {
    bundled_measures()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let ends = motion_endpoints(m, 1, sizes::FINE_DT, sizes::KS_REPLICAS, seed_for(seed, 1, i as u64), |np| {
                *np.positions[0].last().unwrap()
            })?;
            Ok(KsRow { label: m.name(), report: ks_one_sample(&ends, normal_cdf(1.0))? })
        })
        .collect()
}

// 2 ───────────────────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoPointReport {
    /// Smallest value of sgn(X¹)·X² over all coalescing paths.
    pub coalescing_min: f64,
    pub reflected: KsRow,
    pub standard: KsRow,
}

impl TwoPointReport {
    pub fn pass(&self) -> bool {
        self.coalescing_min >= 0.0 && self.reflected.report.pass && self.standard.report.pass
    }
}

fn two_point_paths(m: &Measure, seed: u64) -> Result<Vec<(f64, f64)>> {
    motion_endpoints(m, 2, sizes::FINE_DT, sizes::KS_REPLICAS, seed, |np| {
        let z = sign_product_process(np, &[0, 1]).expect("origin start");
        // Z = sgn(X¹) X² coincides with the sign product times W⁺.
        let direct = f64::from(np.signs[0][np.signs[0].len() - 1]) * np.positions[1].last().unwrap();
        debug_assert_eq!(direct, *z.z.last().unwrap());
        (z.z.iter().copied().fold(f64::INFINITY, f64::min), *z.z.last().unwrap())
    })
}

/// sgn(X¹)·X² from (0, 0): reflected under FairBernoulli, standard under DiracHalf.
pub fn two_point_dichotomy(seed: u64) -> Result<TwoPointReport> {
    let fair = two_point_paths(&Measure::FairBernoulli, seed_for(seed, 2, 0))?;
    let coalescing_min = fair.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let moduli: Vec<f64> = fair.iter().map(|p| p.1.abs()).collect();
    let half = two_point_paths(&Measure::DiracHalf, seed_for(seed, 2, 1))?;
    let ends: Vec<f64> = half.iter().map(|p| p.1).collect();
    Ok(TwoPointReport {
        coalescing_min,
        reflected: KsRow { label: "fair-bernoulli |Z_1| vs half-normal".into(), report: ks_one_sample(&moduli, half_normal_cdf(1.0))? },
        standard: KsRow { label: "dirac-half Z_1 vs N(0,1)".into(), report: ks_one_sample(&ends, normal_cdf(1.0))? },
    })
}

// 3 ───────────────────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationRow {
    pub measure: String,
    pub k: u32,
    pub estimate: f64,
    /// √(α_k(1 − α_k)/n) from the theoretical α_k.
    pub stderr: f64,
    pub alpha: f64,
    pub pass: bool,
}

/// Empirical P(∏_{i≤k} sgn X^i_1 = +1) against α_k for k = 1..=4.
pub fn classification(seed: u64) -> Result<Vec<ClassificationRow>> {
    classification_with(seed, sizes::SCALAR_REPLICAS, sizes::COARSE_DT)
}

fn classification_with(seed: u64, replicas: usize, dt: f64) -> Result<Vec<ClassificationRow>> {
    let mut rows = Vec::new();
    for (i, m) in bundled_measures().iter().enumerate() {
        rows.extend(classify_measure(m, 4, dt, 1.0, replicas, seed_for(seed, 3, i as u64))?);
    }
    Ok(rows)
}

/// Sign-product frequencies of a `points`-point motion from the origin at
/// `horizon`, for k = 1..=points.
pub fn classify_measure(m: &Measure, points: usize, dt: f64, horizon: f64, replicas: usize, seed: u64) -> Result<Vec<ClassificationRow>> {
    let grid = TimeGrid::covering(horizon, dt)?;
    let x0 = vec![0.0; points];
    let signs: Vec<Vec<i8>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let path = generate_brownian(grid, &mut stream(seed, Domain::Path, r));
            let snap = sample_npoint_at(&path, m, &x0, &[grid.steps()], &mut stream(seed, Domain::Signs, r))?;
            Ok(snap[0].signs.clone())
        })
        .collect::<Result<_>>()?;
    Ok((1..=points)
        .map(|k| {
            let hits = signs.iter().filter(|v| v[..k].iter().map(|&x| i32::from(x)).product::<i32>() > 0).count();
            let estimate = hits as f64 / replicas as f64;
            let alpha = m.alpha(k as u32);
            let stderr = (alpha * (1.0 - alpha) / replicas as f64).sqrt();
            ClassificationRow { measure: m.name(), k: k as u32, estimate, stderr, alpha, pass: (estimate - alpha).abs() <= 3.0 * stderr }
        })
        .collect())
}

// 4 ───────────────────────────────────────────────────────────────────────

/// Target skew parameters and a measure whose α_2 hits each of them.
pub fn skew_targets() -> Vec<(f64, Measure)> {
    vec![
        (0.5, Measure::DiracHalf),
        (2.0 / 3.0, Measure::Uniform),
        (0.7, Measure::beta_symmetric(0.75).expect("valid shape")),
        (1.0, Measure::FairBernoulli),
    ]
}

/// Endpoint, minimum and maximum of one skew path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SkewSample {
    pub end: f64,
    pub min: f64,
    pub max: f64,
}

/// Skew paths on [0, horizon] from one construction. Sign products use the
/// first two coordinates of a motion under `measure`, whose α_2 must equal
/// `alpha`; the walk ignores `dt` and uses `walk_scale`.
#[allow(clippy::too_many_arguments)]
pub fn skew_samples(
    construction: Construction,
    alpha: f64,
    measure: &Measure,
    dt: f64,
    walk_scale: u32,
    horizon: f64,
    replicas: usize,
    seed: u64,
) -> Result<Vec<SkewSample>> {
    if construction == Construction::SignProduct && (measure.alpha(2) - alpha).abs() > 1e-12 {
        return Err(crate::Error::InvalidArgument(format!("{} has alpha_2 = {}, not {alpha}", measure.name(), measure.alpha(2))));
    }
    let grid = TimeGrid::covering(horizon, dt)?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let z = match construction {
                Construction::FlippedExcursions => {
                    let p = generate_brownian(grid, &mut stream(seed, Domain::Path, r));
                    skew_from_flips(&p, alpha, &mut stream(seed, Domain::Flips, r))?
                }
                Construction::RescaledWalk => skew_from_walk(alpha, walk_scale, horizon, &mut stream(seed, Domain::Walk, r))?,
                Construction::SignProduct => {
                    let p = generate_brownian(grid, &mut stream(seed, Domain::Path, r));
                    let np = sample_npoint(&p, measure, &[0.0, 0.0], &mut stream(seed, Domain::Signs, r))?;
                    sign_product_process(&np, &[0, 1])?
                }
            };
            let (min, max) = z.z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            Ok(SkewSample { end: z.at_time(horizon), min, max })
        })
        .collect()
}

/// `Z_horizon` only, from the same draws as [`skew_samples`]. Sign
/// products stream the motion instead of storing it.
#[allow(clippy::too_many_arguments)]
pub fn skew_endpoints(
    construction: Construction,
    alpha: f64,
    measure: &Measure,
    dt: f64,
    walk_scale: u32,
    horizon: f64,
    replicas: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if construction != Construction::SignProduct {
        return Ok(skew_samples(construction, alpha, measure, dt, walk_scale, horizon, replicas, seed)?
            .into_iter()
            .map(|z| z.end)
            .collect());
    }
    if (measure.alpha(2) - alpha).abs() > 1e-12 {
        return Err(crate::Error::InvalidArgument(format!("{} has alpha_2 = {}, not {alpha}", measure.name(), measure.alpha(2))));
    }
    let grid = TimeGrid::covering(horizon, dt)?;
    let end = grid.index_of(horizon).min(grid.steps());
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let p = generate_brownian(grid, &mut stream(seed, Domain::Path, r));
            let snap = sample_npoint_at(&p, measure, &[0.0, 0.0], &[end], &mut stream(seed, Domain::Signs, r))?;
            let s = &snap[0];
            Ok(f64::from(s.signs[0] * s.signs[1]) * s.reflected + 0.0)
        })
        .collect()
}

/// Pairwise two-sample KS between constructions and one-sample KS of each
/// against the skew marginal law at `horizon`.
pub fn skew_ks_rows(alpha: f64, horizon: f64, samples: &[(Construction, Vec<f64>)]) -> Result<Vec<KsRow>> {
    let label = |what: String| format!("alpha={alpha:.4} {what}");
    let mut rows = Vec::new();
    for (i, (a, xa)) in samples.iter().enumerate() {
        for (b, xb) in &samples[i + 1..] {
            rows.push(KsRow { label: label(format!("{} vs {}", a.name(), b.name())), report: ks_two_sample(xa, xb)? });
        }
    }
    let cdf = skew_marginal_cdf(alpha, horizon);
    for (a, xa) in samples {
        rows.push(KsRow { label: label(format!("{} vs law", a.name())), report: ks_one_sample(xa, &cdf)? });
    }
    Ok(rows)
}

/// Flips, walk and sign-product marginals at t = 1: pairwise and against
/// the skew marginal law.
pub fn skew_cross_construction(seed: u64) -> Result<Vec<KsRow>> {
    let mut rows = Vec::new();
    for (i, (alpha, measure)) in skew_targets().into_iter().enumerate() {
        let mut samples = Vec::new();
        for (j, c) in [Construction::FlippedExcursions, Construction::RescaledWalk, Construction::SignProduct].into_iter().enumerate() {
            let sub = seed_for(seed, 4, (4 * i + j) as u64);
            samples.push((c, skew_endpoints(c, alpha, &measure, sizes::SKEW_DT, DEFAULT_WALK_SCALE, 1.0, sizes::KS_REPLICAS, sub)?));
        }
        rows.extend(skew_ks_rows(alpha, 1.0, &samples)?);
    }
    Ok(rows)
}

// 5 ───────────────────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementRow {
    pub start: f64,
    pub end: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub alpha: f64,
    pub replicas: usize,
    pub pieces: Vec<IncrementRow>,
    /// Correlation of increments over consecutive subintervals, pooled.
    pub lag_correlation: f64,
    pub correlation_bound: f64,
}

impl DecompositionReport {
    pub fn pass(&self) -> bool {
        self.pieces.iter().all(|p| p.pass) && self.lag_correlation.abs() <= self.correlation_bound
    }
}

/// V = Z − (2α − 1)L for the sign product of a Beta(3/4) flow (α = 0.7):
/// increments over four quarters of [0, 1].
pub fn decomposition(seed: u64) -> Result<DecompositionReport> {
    let measure = Measure::beta_symmetric(0.75).expect("valid shape");
    let pieces = sizes::DECOMPOSITION_PIECES;
    let grid = unit_grid(sizes::DECOMPOSITION_DT);
    let per = grid.steps() / pieces;
    let marks: Vec<usize> = (0..=pieces).map(|j| j * per).collect();
    let drift = 2.0 * measure.alpha(2) - 1.0;
    let base = seed_for(seed, 5, 0);
    let incs: Vec<Vec<f64>> = (0..sizes::SCALAR_REPLICAS as u64)
        .into_par_iter()
        .map(|r| {
            let path = generate_brownian(grid, &mut stream(base, Domain::Path, r));
            let snaps = sample_npoint_at(&path, &measure, &[0.0, 0.0], &marks, &mut stream(base, Domain::Signs, r))?;
            let v: Vec<f64> = snaps.iter().map(|s| f64::from(s.signs[0] * s.signs[1]) * s.reflected - drift * s.local_time).collect();
            Ok(v.windows(2).map(|p| p[1] - p[0]).collect())
        })
        .collect::<Result<_>>()?;
    let n = incs.len();
    let mut rows = Vec::new();
    for j in 0..pieces {
        let col: Vec<f64> = incs.iter().map(|r| r[j]).collect();
        let (mean, mse) = mean_se(&col);
        let (var, vse) = variance_se(&col);
        let dt = per as f64 * grid.dt();
        rows.push(IncrementRow {
            start: j as f64 * dt,
            end: (j + 1) as f64 * dt,
            mean,
            mean_se: mse,
            variance: var,
            variance_se: vse,
            pass: mean.abs() <= 3.0 * mse && (var - dt).abs() <= 3.0 * vse,
        });
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for r in &incs {
        for j in 0..pieces - 1 {
            a.push(r[j]);
            b.push(r[j + 1]);
        }
    }
    Ok(DecompositionReport {
        alpha: measure.alpha(2),
        replicas: n,
        pieces: rows,
        lag_correlation: correlation(&a, &b),
        correlation_bound: 3.0 / (a.len() as f64).sqrt(),
    })
}

// 6 ───────────────────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowRow {
    pub measure: String,
    pub tuples: usize,
    pub max_discrepancy: f64,
    pub support_mismatches: usize,
    pub pass: bool,
}

/// Random `(s, mid, t, x)`: x is 0 a quarter of the time, otherwise uniform
/// on [−0.5, 0.5].
pub fn flow_tuples(seed: u64, count: usize, steps: usize) -> Vec<(usize, usize, usize, f64)> {
    let mut rng = stream(seed, Domain::Probe, 0);
    (0..count)
        .map(|_| {
            let mut idx = [rng.random_range(0..=steps), rng.random_range(0..=steps), rng.random_range(0..=steps)];
            idx.sort_unstable();
            let x = if rng.random::<f64>() < 0.25 { 0.0 } else { rng.random_range(-0.5..0.5) };
            (idx[0], idx[1], idx[2], x)
        })
        .collect()
}

/// Composition through a random midpoint against the direct kernel.
pub fn flow_property(seed: u64) -> Result<Vec<FlowRow>> {
    let grid = TimeGrid::new(0.0, 1.0 / sizes::FLOW_STEPS as f64, sizes::FLOW_STEPS)?;
    bundled_measures()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let base = seed_for(seed, 6, i as u64);
            let path = generate_brownian(grid, &mut stream(base, Domain::Path, 0));
            let mut reg = ExcursionRegistry::new(m, derive_seed(base, Domain::Excursion, 0));
            let mut worst: f64 = 0.0;
            let mut mismatches = 0;
            let tuples = flow_tuples(base, sizes::FLOW_TUPLES, sizes::FLOW_STEPS);
            for &(s0, mid, t, x) in &tuples {
                let direct = kernel_km(&path, &mut reg, s0, t, x)?;
                let composed = flow_compose(&path, &mut reg, s0, mid, t, x)?;
                match composed.max_discrepancy(&direct) {
                    Some(d) => worst = worst.max(d),
                    None => mismatches += 1,
                }
            }
            Ok(FlowRow {
                measure: m.name(),
                tuples: tuples.len(),
                max_discrepancy: worst,
                support_mismatches: mismatches,
                pass: mismatches == 0 && worst <= FLOW_TOLERANCE,
            })
        })
        .collect()
}

// 7 ───────────────────────────────────────────────────────────────────────

/// Test functions for the generator checks: slopes with symmetric cubics,
/// plus a bilinear term in two dimensions.
pub fn generator_functions(measure: &Measure) -> Result<(TestFunctionDm, TestFunctionDm)> {
    let one = DmBuilder::new(1).slope(0, 0.4).cubic(0, 0.5, 0.5).build(measure)?;
    let two = DmBuilder::new(2).slope(0, 0.4).slope(1, -0.3).cubic(0, 0.5, 0.5).cubic(1, -0.4, -0.4).cross(0, 1, 0.8).build(measure)?;
    Ok((one, two))
}

/// Evaluation points: interior, one zero and all zeros.
pub fn generator_points() -> Vec<Vec<f64>> {
    vec![vec![0.5], vec![0.0], vec![0.5, -0.3], vec![0.0, 0.5], vec![0.0, 0.0]]
}

pub fn generator_measures() -> Vec<Measure> {
    vec![Measure::DiracHalf, Measure::FairBernoulli, Measure::beta_symmetric(2.0).expect("valid shape")]
}

/// Richardson-extrapolated finite differences against A^n f.
pub fn generator_suite(seed: u64) -> Result<Vec<GeneratorReport>> {
    let mut out = Vec::new();
    for (i, m) in generator_measures().iter().enumerate() {
        let (one, two) = generator_functions(m)?;
        for (j, x) in generator_points().iter().enumerate() {
            let sub = seed_for(seed, 7, (i * 16 + j) as u64);
            let report = if x.len() == 1 {
                generator_check(&one, m, x, sizes::GENERATOR_TIME, sizes::SCALAR_REPLICAS, sub)?
            } else {
                generator_check(&two, m, x, sizes::GENERATOR_TIME, sizes::SCALAR_REPLICAS, sub)?
            };
            out.push(report);
        }
    }
    Ok(out)
}

// 8 ───────────────────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChaosReport {
    pub x: f64,
    pub t: f64,
    pub replicas: usize,
    /// Mean squared error of orders 0, 1 and 2 against K_{0,t} f(x).
    pub errors: [f64; 3],
    pub stderrs: [f64; 3],
}

impl ChaosReport {
    pub fn pass(&self) -> bool {
        self.errors[0] > self.errors[1] && self.errors[1] > self.errors[2]
    }
}

/// The test profile for the chaos check.
pub fn chaos_profile() -> GaussianProfile {
    GaussianProfile { amplitude: 1.0, center: 0.12, width: 0.25 }
}

/// L² error of the truncated expansion against the Wiener kernel at x = 0.
pub fn chaos_truncation(seed: u64) -> Result<ChaosReport> {
    chaos_check(&chaos_profile(), 0.0, sizes::CHAOS_TIME, sizes::KS_REPLICAS, seed_for(seed, 8, 0))
}

/// Mean squared error of orders 0, 1 and 2 against `K^{δ½}_{0,t} f(x)`
/// on a fine grid of `CHAOS_FINE_STEPS` steps.
pub fn chaos_check<F: Smooth1d + Sync>(f: &F, x: f64, t: f64, replicas: usize, seed: u64) -> Result<ChaosReport> {
    let expansion = ChaosExpansion::new(f, x, t, sizes::CHAOS_COARSE_STEPS)?;
    let grid = TimeGrid::new(0.0, t / sizes::CHAOS_FINE_STEPS as f64, sizes::CHAOS_FINE_STEPS)?;
    let sq: Vec<[f64; 3]> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let p = generate_brownian(grid, &mut stream(seed, Domain::Path, r));
            let k = kernel_wiener(&p, 0, grid.steps(), x)?.expect(|y| f.value(y));
            let mut e = [0.0; 3];
            for (order, slot) in e.iter_mut().enumerate() {
                *slot = (expansion.evaluate_path(&p, order)? - k).powi(2);
            }
            Ok(e)
        })
        .collect::<Result<_>>()?;
    let mut errors = [0.0; 3];
    let mut stderrs = [0.0; 3];
    for o in 0..3 {
        let col: Vec<f64> = sq.iter().map(|e| e[o]).collect();
        (errors[o], stderrs[o]) = mean_se(&col);
    }
    Ok(ChaosReport { x, t, replicas: sq.len(), errors, stderrs })
}

// 9 ───────────────────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegistryReport {
    pub nested_windows: usize,
    pub nested_mismatches: usize,
    pub pairs: usize,
    pub correlation: f64,
    pub bound: f64,
}

impl RegistryReport {
    pub fn pass(&self) -> bool {
        self.nested_windows > 0 && self.nested_mismatches == 0 && self.correlation.abs() <= self.bound
    }
}

/// Weight attached by the kernel at 0 to window `[s, t]`: the mass on the
/// positive atom, read back through `kernel_km`.
fn window_weight(path: &BrownianPath, reg: &mut ExcursionRegistry<'_>, s0: usize, t: usize) -> Result<Option<f64>> {
    let k = kernel_km(path, reg, s0, t, 0.0)?;
    Ok(k.atoms().iter().find(|a| a.position > 0.0).map(|a| a.weight).or_else(|| (k.len() == 2).then_some(0.0)))
}

/// Nested windows with equal argmin share `u` bit for bit; windows with
/// distinct argmins carry uncorrelated weights.
pub fn registry_consistency(seed: u64) -> Result<RegistryReport> {
    let m = Measure::Uniform;
    let base = seed_for(seed, 9, 0);
    let grid = TimeGrid::new(0.0, 1e-3, 1000)?;
    // (nested windows, mismatches, weights of two distinct excursions)
    type Draw = (usize, usize, Option<(f64, f64)>);
    let results: Vec<Draw> = (0..sizes::REGISTRY_PAIRS as u64)
        .into_par_iter()
        .map(|r| {
            let p = generate_brownian(grid, &mut stream(base, Domain::Path, r));
            let mut reg = ExcursionRegistry::new(&m, derive_seed(base, Domain::Excursion, r));
            let mut rng = stream(base, Domain::Probe, r);
            let (mut nested, mut bad) = (0, 0);
            // Nested windows [s', t'] ⊂ ... ⊃ [s, t] sharing the argmin.
            let s0 = rng.random_range(0..500);
            let t = rng.random_range(s0 + 1..=1000);
            let (_, key) = p.window_min(s0, t);
            let t2 = (t..=1000).take_while(|&j| p.window_min(s0, j).1 == key).last().unwrap_or(t);
            let s2 = (0..=s0).rev().take_while(|&j| p.window_min(j, t2).1 == key).last().unwrap_or(s0);
            if (s2, t2) != (s0, t) && p.reflected_at(s0, t) > 0.0 {
                nested += 1;
                let a = window_weight(&p, &mut reg, s0, t)?;
                let mut fresh = ExcursionRegistry::new(&m, derive_seed(base, Domain::Excursion, r));
                let b = window_weight(&p, &mut fresh, s2, t2)?;
                if a.map(f64::to_bits) != b.map(f64::to_bits) || reg.lookup(key).to_bits() != fresh.lookup(key).to_bits() {
                    bad += 1;
                }
            }
            // Two disjoint windows have distinct argmins.
            let mid = rng.random_range(100..900);
            let (_, k1) = p.window_min(0, mid);
            let (_, k2) = p.window_min(mid + 1, 1000);
            let pair = (k1 != k2).then(|| (reg.lookup(k1), reg.lookup(k2)));
            Ok((nested, bad, pair))
        })
        .collect::<Result<_>>()?;
    let nested_windows = results.iter().map(|r| r.0).sum();
    let nested_mismatches = results.iter().map(|r| r.1).sum();
    let (a, b): (Vec<f64>, Vec<f64>) = results.iter().filter_map(|r| r.2).unzip();
    Ok(RegistryReport {
        nested_windows,
        nested_mismatches,
        pairs: a.len(),
        correlation: correlation(&a, &b),
        bound: 3.0 / (a.len() as f64).sqrt(),
    })
}

// 10 ──────────────────────────────────────────────────────────────────────

/// Reruns a reduced classification and generator check on one thread and
/// on `threads` threads and compares every table cell.
pub fn thread_independence(seed: u64, threads: usize) -> Result<bool> {
    let run = |k: usize| -> Result<Vec<Table>> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(k).build().map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
        pool.install(|| {
            let rows = classification_with(seed_for(seed, 10, 0), 5_000, sizes::COARSE_DT)?;
            let (one, _) = generator_functions(&Measure::Uniform)?;
            let g = generator_check(&one, &Measure::Uniform, &[0.0], sizes::GENERATOR_TIME, 5_000, seed_for(seed, 10, 1))?;
            Ok(vec![classification_table(&rows), generator_table(&[g])])
        })
    };
    Ok(run(1)? == run(threads.max(2))?)
}

// Tables ──────────────────────────────────────────────────────────────────

pub fn classification_table(rows: &[ClassificationRow]) -> Table {
    let mut t = Table::new("classification", &["measure", "k", "estimate", "stderr", "alpha", "pass"]);
    for r in rows {
        t.push([r.measure.clone(), s(r.k), s(r.estimate), s(r.stderr), s(r.alpha), s(r.pass)]);
    }
    t
}

/// `fd_value` is the Richardson extrapolation that is compared with
/// `an_value`; the raw quotients at `t` and `t/2` follow.
pub fn generator_table(rows: &[GeneratorReport]) -> Table {
    let mut t = Table::new("generator", &["n", "m", "x", "t", "fd_value", "an_value", "stderr", "pass", "fd_t", "fd_half_t", "tolerance"]);
    for r in rows {
        let x: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
        t.push([
            s(r.n),
            r.measure.clone(),
            x.join(";"),
            s(r.t),
            s(r.richardson),
            s(r.an_value),
            s(r.stderr),
            s(r.pass),
            s(r.fd_value),
            s(r.fd_half),
            s(r.tolerance),
        ]);
    }
    t
}

/// Titles of the numbered checks.
pub const TITLES: [&str; 10] = [
    "one-point motion is Brownian",
    "two-point dichotomy",
    "classification formula",
    "skew cross-construction",
    "local-time decomposition",
    "flow property",
    "generator",
    "chaos truncation",
    "registry consistency",
    "thread-count independence",
];

/// Pool size compared against a single thread in check 10.
pub const COMPARISON_THREADS: usize = 4;

/// Runs check `id` (1..=10) and packages it for reporting.
pub fn run_check(id: u32, seed: u64) -> Result<Outcome> {
    let title = TITLES[(id - 1) as usize];
    let outcome = |pass: bool, summary: String, tables: Vec<Table>| Outcome { id, title, pass, summary, tables };
    Ok(match id {
        1 => {
            let rows = one_point_law(seed)?;
            let worst = rows.iter().map(|r| r.report.p_value).fold(1.0, f64::min);
            outcome(rows.iter().all(|r| r.report.pass), format!("min p = {worst:.4}"), vec![ks_table("one_point", &rows)])
        }
        2 => {
            let r = two_point_dichotomy(seed)?;
            let mut t = ks_table("two_point", &[r.reflected.clone(), r.standard.clone()]);
            t.push(["fair-bernoulli min Z".into(), s(r.coalescing_min), String::new(), s(sizes::KS_REPLICAS), s(r.coalescing_min >= 0.0)]);
            let summary = format!("min Z = {}, p = {:.4} / {:.4}", r.coalescing_min, r.reflected.report.p_value, r.standard.report.p_value);
            outcome(r.pass(), summary, vec![t])
        }
        3 => {
            let rows = classification(seed)?;
            let worst = rows.iter().map(|r| (r.estimate - r.alpha).abs() / r.stderr).fold(0.0, f64::max);
            outcome(rows.iter().all(|r| r.pass), format!("max |z| = {worst:.2}"), vec![classification_table(&rows)])
        }
        4 => {
            let rows = skew_cross_construction(seed)?;
            let worst = rows.iter().map(|r| r.report.p_value).fold(1.0, f64::min);
            outcome(rows.iter().all(|r| r.report.pass), format!("{} tests, min p = {worst:.4}", rows.len()), vec![ks_table("skew", &rows)])
        }
        5 => {
            let r = decomposition(seed)?;
            let mut t = Table::new("decomposition", &["start", "end", "mean", "mean_se", "variance", "variance_se", "pass"]);
            for p in &r.pieces {
                t.push([s(p.start), s(p.end), s(p.mean), s(p.mean_se), s(p.variance), s(p.variance_se), s(p.pass)]);
            }
            let mut c = Table::new("decomposition_correlation", &["alpha", "replicas", "lag_correlation", "bound", "pass"]);
            c.push([
                s(r.alpha),
                s(r.replicas),
                s(r.lag_correlation),
                s(r.correlation_bound),
                s(r.lag_correlation.abs() <= r.correlation_bound),
            ]);
            outcome(r.pass(), format!("lag corr = {:.5} (bound {:.5})", r.lag_correlation, r.correlation_bound), vec![t, c])
        }
        6 => {
            let rows = flow_property(seed)?;
            let mut t = Table::new("flow", &["measure", "tuples", "max_discrepancy", "support_mismatches", "pass"]);
            for r in &rows {
                t.push([r.measure.clone(), s(r.tuples), s(r.max_discrepancy), s(r.support_mismatches), s(r.pass)]);
            }
            let worst = rows.iter().map(|r| r.max_discrepancy).fold(0.0, f64::max);
            outcome(rows.iter().all(|r| r.pass), format!("max discrepancy = {worst:e}"), vec![t])
        }
        7 => {
            let rows = generator_suite(seed)?;
            let passed = rows.iter().filter(|r| r.pass).count();
            outcome(passed == rows.len(), format!("{passed}/{} within tolerance", rows.len()), vec![generator_table(&rows)])
        }
        8 => {
            let r = chaos_truncation(seed)?;
            let mut t = Table::new("chaos", &["order", "l2_error", "stderr"]);
            for o in 0..3 {
                t.push([s(o), s(r.errors[o]), s(r.stderrs[o])]);
            }
            outcome(r.pass(), format!("errors {:.3e} > {:.3e} > {:.3e}", r.errors[0], r.errors[1], r.errors[2]), vec![t])
        }
        9 => {
            let r = registry_consistency(seed)?;
            let mut t = Table::new("registry", &["nested_windows", "nested_mismatches", "pairs", "correlation", "bound", "pass"]);
            t.push([s(r.nested_windows), s(r.nested_mismatches), s(r.pairs), s(r.correlation), s(r.bound), s(r.pass())]);
            outcome(r.pass(), format!("{} nested, corr = {:.4}", r.nested_windows, r.correlation), vec![t])
        }
        10 => {
            let same = thread_independence(seed, COMPARISON_THREADS)?;
            let mut t = Table::new("determinism", &["threads", "identical"]);
            t.push([s(COMPARISON_THREADS), s(same)]);
            outcome(same, format!("1 vs {COMPARISON_THREADS} threads identical: {same}"), vec![t])
        }
        _ => return Err(crate::Error::InvalidArgument(format!("no check numbered {id}"))),
    })
}
