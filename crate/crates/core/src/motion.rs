//! n-point motions of K^m driven by a single path.
//!
//! Every coordinate follows `x + sgn(x) W` until it first reaches 0. From
//! then on it sits at `±W⁺`, and at each new minimum of the path (the start
//! of a new excursion) it takes a fresh sign drawn as Bernoulli(u), where
//! `u` is the excursion's registry weight. Given `u`, the coordinates draw
//! their signs independently.

use rand::Rng;

use crate::error::{Error, Result};
use crate::flow::{sgn, ExcursionRegistry};
use crate::measures::{sign_patterns, Measure};
use crate::paths::BrownianPath;
use crate::skewbm::{Construction, SkewPath};
use crate::stats::{chi_square_gof, chi_square_homogeneity, chi_square_independence, TestReport};

/// Joint trajectory of n coordinates on one driving path.
#[derive(Clone, Debug)]
pub struct NPointPath {
    pub x0: Vec<f64>,
    pub path: BrownianPath,
    pub measure: Measure,
    /// `positions[i][t]`.
    pub positions: Vec<Vec<f64>>,
    /// `signs[i][t]` ∈ {−1, +1}.
    pub signs: Vec<Vec<i8>>,
    /// First grid index at which coordinate `i` reaches 0.
    pub tau: Vec<Option<usize>>,
    /// W⁺_{0,t}.
    pub reflected: Vec<f64>,
    /// Excursion key (leftmost argmin of W over [0, t]).
    pub excursion: Vec<usize>,
}

impl NPointPath {
    pub fn n(&self) -> usize {
        self.x0.len()
    }

    /// Rows `(t, X¹_t, …, Xⁿ_t)`.
    pub fn trajectory_rows(&self) -> impl Iterator<Item = (f64, Vec<f64>)> + '_ {
        (0..self.reflected.len()).map(|j| (self.path.grid().time(j), self.positions.iter().map(|p| p[j]).collect()))
    }

    fn check_origin(&self, subset: &[usize]) -> Result<()> {
        if subset.is_empty() {
            return Err(Error::InvalidArgument("empty coordinate subset".into()));
        }
        for &i in subset {
            match self.x0.get(i) {
                None => return Err(Error::InvalidArgument(format!("coordinate {i} out of range"))),
                Some(&x) if x != 0.0 => return Err(Error::NonzeroStart(i)),
                _ => {}
            }
        }
        Ok(())
    }

    /// Index of the joint sign pattern of `subset` at step `t`, in the order
    /// of [`sign_patterns`].
    pub fn pattern_index(&self, subset: &[usize], t: usize) -> usize {
        subset.iter().fold(0, |acc, &i| (acc << 1) | usize::from(self.signs[i][t] > 0))
    }
}

/// One step of an n-point motion as seen by a visitor.
struct Step<'a> {
    index: usize,
    w: f64,
    reflected: f64,
    key: usize,
    signs: &'a [i8],
    tau: &'a [Option<usize>],
}

fn drive<R: Rng + ?Sized>(path: &BrownianPath, measure: &Measure, x0: &[f64], rng: &mut R, mut visit: impl FnMut(Step<'_>)) -> Result<()> {
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteSample);
    }
    let mut registry = ExcursionRegistry::new(measure, rng.random());
    let w = path.values();
    let n = x0.len();
    let mut tau = vec![None; n];
    let mut current: Vec<i8> = x0.iter().map(|&x| sgn(x) as i8).collect();
    let mut min = w[0];
    let mut key = 0;
    let mut pending = n;
    for (j, &wj) in w.iter().enumerate() {
        let fresh = j == 0 || wj < min;
        if fresh {
            min = wj.min(min);
            key = j;
        }
        if !fresh && pending == 0 {
            visit(Step { index: j, w: wj, reflected: wj - min, key, signs: &current, tau: &tau });
            continue;
        }
        let mut u = None;
        for i in 0..n {
            let active = match tau[i] {
                Some(_) => true,
                None if x0[i] == 0.0 || wj <= -x0[i].abs() => {
                    tau[i] = Some(j);
                    pending -= 1;
                    true
                }
                None => false,
            };
            if active && (fresh || tau[i] == Some(j)) {
                let u = *u.get_or_insert_with(|| registry.lookup(key));
                current[i] = if rng.random::<f64>() < u { 1 } else { -1 };
            }
        }
        visit(Step { index: j, w: wj, reflected: wj - min, key, signs: &current, tau: &tau });
    }
    Ok(())
}

fn position(x0: f64, step: &Step<'_>, i: usize) -> f64 {
    let s = f64::from(step.signs[i]);
    if step.tau[i].is_some() {
        s * step.reflected + 0.0
    } else {
        x0 + s * step.w
    }
}

/// Samples the n-point motion started from `x0`. The registry seed and the
/// coordinate signs are drawn from `rng`.
pub fn sample_npoint<R: Rng + ?Sized>(path: &BrownianPath, measure: &Measure, x0: &[f64], rng: &mut R) -> Result<NPointPath> {
    let len = path.values().len();
    let n = x0.len();
    let mut positions = vec![Vec::with_capacity(len); n];
    let mut signs = vec![Vec::with_capacity(len); n];
    let mut reflected = Vec::with_capacity(len);
    let mut excursion = Vec::with_capacity(len);
    let mut tau = vec![None; n];
    drive(path, measure, x0, rng, |step| {
        for i in 0..n {
            positions[i].push(position(x0[i], &step, i));
            signs[i].push(step.signs[i]);
        }
        reflected.push(step.reflected);
        excursion.push(step.key);
        if step.index + 1 == len {
            tau.copy_from_slice(step.tau);
        }
    })?;
    Ok(NPointPath { x0: x0.to_vec(), path: path.clone(), measure: measure.clone(), positions, signs, tau, reflected, excursion })
}

/// The state of an n-point motion at selected grid indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub index: usize,
    pub positions: Vec<f64>,
    pub signs: Vec<i8>,
    /// W⁺_{0,t}.
    pub reflected: f64,
    /// −min_{[0,t]} W.
    pub local_time: f64,
}

/// Same motion as [`sample_npoint`] with the same draws from `rng`, keeping
/// only the states at `indices` (in increasing order).
pub fn sample_npoint_at<R: Rng + ?Sized>(
    path: &BrownianPath,
    measure: &Measure,
    x0: &[f64],
    indices: &[usize],
    rng: &mut R,
) -> Result<Vec<Snapshot>> {
    if indices.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::InvalidArgument("snapshot indices must increase".into()));
    }
    if let Some(&last) = indices.last() {
        path.check_index(last)?;
    }
    let mut out = Vec::with_capacity(indices.len());
    let mut next = indices.iter().peekable();
    drive(path, measure, x0, rng, |step| {
        if next.peek() == Some(&&step.index) {
            next.next();
            out.push(Snapshot {
                index: step.index,
                positions: (0..x0.len()).map(|i| position(x0[i], &step, i)).collect(),
                signs: step.signs.to_vec(),
                reflected: step.reflected,
                local_time: step.reflected - step.w + 0.0,
            });
        }
    })?;
    Ok(out)
}

/// Z_t = (∏_{i ∈ subset} sgn X^i_t) · W⁺_{0,t}, tagged with α_k for k = |subset|.
pub fn sign_product_process(np: &NPointPath, subset: &[usize]) -> Result<SkewPath> {
    np.check_origin(subset)?;
    let z = (0..np.reflected.len())
        .map(|j| {
            let s: i32 = subset.iter().map(|&i| i32::from(np.signs[i][j])).product();
            f64::from(s) * np.reflected[j] + 0.0
        })
        .collect();
    Ok(SkewPath { grid: *np.path.grid(), z, alpha: np.measure.alpha(subset.len() as u32), construction: Construction::SignProduct })
}

/// Joint sign patterns of `subset` at the successive times `σ^ε_l` at which
/// W⁺ first reaches `epsilon` after having returned to 0.
pub fn excursion_sign_sequence(np: &NPointPath, subset: &[usize], epsilon: f64) -> Result<Vec<usize>> {
    np.check_origin(subset)?;
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidArgument(format!("level {epsilon} must be positive")));
    }
    let mut out = Vec::new();
    let mut armed = true;
    for (j, &r) in np.reflected.iter().enumerate() {
        if r == 0.0 {
            armed = true;
        } else if armed && r >= epsilon {
            out.push(np.pattern_index(subset, j));
            armed = false;
        }
    }
    Ok(out)
}

/// Result of [`iid_excursion_signs_check`].
#[derive(Clone, Debug, PartialEq)]
pub enum ExcursionSignCheck {
    /// Fewer than the required number of excursions reached the level.
    InsufficientData { found: usize, needed: usize },
    Report {
        /// Pooled patterns against the mixed moments M_ε.
        law: TestReport,
        /// Consecutive patterns (l, l + 1) within a path.
        independence: TestReport,
        /// Patterns at σ^ε_l for l ≥ 1 against patterns at σ^{ε'}_0.
        homogeneity: TestReport,
        counts: Vec<u64>,
    },
}

impl ExcursionSignCheck {
    pub const MIN_EXCURSIONS: usize = 30;

    pub fn pass(&self) -> Option<bool> {
        match self {
            ExcursionSignCheck::InsufficientData { .. } => None,
            ExcursionSignCheck::Report { law, independence, homogeneity, .. } => Some(law.pass && independence.pass && homogeneity.pass),
        }
    }
}

/// Tests that the sign vectors seen at successive excursions reaching
/// `epsilon` are i.i.d. with law M, pooling over independent paths.
pub fn iid_excursion_signs_check(paths: &[NPointPath], subset: &[usize], epsilon: f64, epsilon_prime: f64) -> Result<ExcursionSignCheck> {
    let k = subset.len();
    let cells = 1usize << k;
    let mut counts = vec![0u64; cells];
    let mut pairs = vec![vec![0u64; cells]; cells];
    let mut later = vec![0u64; cells];
    let mut first_prime = vec![0u64; cells];
    let mut found = 0;
    for np in paths {
        let seq = excursion_sign_sequence(np, subset, epsilon)?;
        found += seq.len();
        for &p in &seq {
            counts[p] += 1;
        }
        for w in seq.windows(2) {
            pairs[w[0]][w[1]] += 1;
        }
        for &p in seq.iter().skip(1) {
            later[p] += 1;
        }
        if let Some(&p) = excursion_sign_sequence(np, subset, epsilon_prime)?.first() {
            first_prime[p] += 1;
        }
    }
    let needed = ExcursionSignCheck::MIN_EXCURSIONS;
    if found < needed {
        return Ok(ExcursionSignCheck::InsufficientData { found, needed });
    }
    let probs: Vec<f64> = sign_patterns(k).map(|eps| paths[0].measure.mixed_moment(&eps)).collect();
    Ok(ExcursionSignCheck::Report {
        law: chi_square_gof(&counts, &probs),
        independence: chi_square_independence(&pairs),
        homogeneity: chi_square_homogeneity(&later, &first_prime),
        counts,
    })
}

/// Counts of joint sign patterns of `subset` at step `t` across paths.
pub fn sign_pattern_counts(paths: &[NPointPath], subset: &[usize], t: usize) -> Vec<u64> {
    let mut counts = vec![0u64; 1 << subset.len()];
    for np in paths {
        counts[np.pattern_index(subset, t)] += 1;
    }
    counts
}
