//! Skew Brownian motion built three ways, its local time, and the
//! semimartingale decomposition `Z = V + (2α − 1) L`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::paths::{BrownianPath, TimeGrid};

/// Default walk scale: grid 2^-8, 2^16 steps per unit time.
pub const DEFAULT_WALK_SCALE: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Construction {
    FlippedExcursions,
    RescaledWalk,
    SignProduct,
}

impl Construction {
    pub fn name(self) -> &'static str {
        match self {
            Construction::FlippedExcursions => "flips",
            Construction::RescaledWalk => "walk",
            Construction::SignProduct => "sign-product",
        }
    }
}

/// A skew Brownian path on a grid, tagged with its parameter and origin.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewPath {
    pub grid: TimeGrid,
    pub z: Vec<f64>,
    pub alpha: f64,
    pub construction: Construction,
}

impl SkewPath {
    /// Value at the grid point nearest to time `t`.
    pub fn at_time(&self, t: f64) -> f64 {
        self.z[self.grid.index_of(t).min(self.z.len() - 1)]
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("skew parameter {alpha} outside [0, 1]")))
    }
}

/// A mean-½ measure whose two-point sign product is skew Brownian motion
/// with parameter `alpha`: δ_{1/2} at ½, ½(δ_0 + δ_1) at 1, and otherwise
/// two equal atoms at ½ ± √(2α − 1)/2.
pub fn sign_product_measure(alpha: f64) -> Result<Measure> {
    check_alpha(alpha)?;
    if alpha < 0.5 {
        return Err(Error::InvalidArgument(format!("no mean-1/2 measure has alpha_2 = {alpha} < 1/2")));
    }
    if alpha == 0.5 {
        return Ok(Measure::DiracHalf);
    }
    if alpha == 1.0 {
        return Ok(Measure::FairBernoulli);
    }
    let d = 0.5 * (2.0 * alpha - 1.0).sqrt();
    Measure::atomic(&[(0.5, 0.5 - d), (0.5, 0.5 + d)])
}

/// Z = ξ_e W⁺ with one sign ξ_e per excursion of the reflected path,
/// `P(ξ = +1) = alpha`.
pub fn skew_from_flips<R: Rng + ?Sized>(path: &BrownianPath, alpha: f64, rng: &mut R) -> Result<SkewPath> {
    check_alpha(alpha)?;
    let w = path.values();
    let mut z = Vec::with_capacity(w.len());
    let mut min = w[0];
    let mut xi = 1.0;
    for (j, &wj) in w.iter().enumerate() {
        if j == 0 || wj < min {
            min = wj.min(min);
            xi = if rng.random::<f64>() < alpha { 1.0 } else { -1.0 };
        }
        z.push(xi * (wj - min) + 0.0);
    }
    Ok(SkewPath { grid: *path.grid(), z, alpha, construction: Construction::FlippedExcursions })
}

/// The chain with `Q(0, 1) = alpha`, `Q(0, −1) = 1 − alpha` and fair steps
/// elsewhere, run for ⌊4^scale · horizon⌋ steps and rescaled by 2^-scale.
pub fn skew_from_walk<R: Rng + ?Sized>(alpha: f64, scale: u32, horizon: f64, rng: &mut R) -> Result<SkewPath> {
    check_alpha(alpha)?;
    if scale == 0 || scale > 15 {
        return Err(Error::InvalidArgument(format!("walk scale {scale} outside 1..=15")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive")));
    }
    let per_unit = (1u64 << (2 * scale)) as f64;
    let steps = (per_unit * horizon).floor() as usize;
    let grid = TimeGrid::new(0.0, 1.0 / per_unit, steps.max(1))?;
    let h = (-(scale as f64)).exp2();
    let mut z = Vec::with_capacity(steps + 1);
    let mut s: i64 = 0;
    z.push(0.0);
    let (mut bits, mut left) = (0u64, 0u32);
    for _ in 0..grid.steps() {
        if s == 0 {
            s = if rng.random::<f64>() < alpha { 1 } else { -1 };
        } else {
            if left == 0 {
                bits = rng.random();
                left = 64;
            }
            s += if bits & 1 == 1 { 1 } else { -1 };
            bits >>= 1;
            left -= 1;
        }
        z.push(h * s as f64);
    }
    Ok(SkewPath { grid, z, alpha, construction: Construction::RescaledWalk })
}

/// Symmetric local time at 0 of any process with modulus W⁺: by Lévy's
/// identity it is `−min_{[0,t]} W`.
pub fn local_time(path: &BrownianPath) -> Vec<f64> {
    let mut min: f64 = 0.0;
    path.values()
        .iter()
        .map(|&w| {
            min = min.min(w);
            -min + 0.0
        })
        .collect()
}

/// Occupation estimate `(1/2ε) · dt · #{j ≥ 1 : |z_j| ≤ ε}` of the local
/// time at the end of the path.
pub fn occupation_local_time(z: &SkewPath, epsilon: f64) -> f64 {
    let hits = z.z[1..].iter().filter(|v| v.abs() <= epsilon).count();
    hits as f64 * z.grid.dt() / (2.0 * epsilon)
}

/// V = Z − (2α − 1) L.
pub fn decompose_v(z: &SkewPath, local: &[f64]) -> Result<Vec<f64>> {
    if local.len() != z.z.len() {
        return Err(Error::InvalidArgument(format!("local time has {} points, path has {}", local.len(), z.z.len())));
    }
    let drift = 2.0 * z.alpha - 1.0;
    Ok(z.z.iter().zip(local).map(|(z, l)| z - drift * l).collect())
}

/// Inverse of [`decompose_v`]: Z = V + (2α − 1) L.
pub fn recompose_z(v: &[f64], alpha: f64, local: &[f64]) -> Vec<f64> {
    let drift = 2.0 * alpha - 1.0;
    v.iter().zip(local).map(|(v, l)| v + drift * l).collect()
}
