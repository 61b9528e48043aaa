//! The n-point generator on its test class, Monte-Carlo semigroup
//! estimates, and the truncated Wiener chaos of the Wiener solution.

pub mod chaos;
pub mod testfn;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::sgn;
use crate::measures::{sign_patterns, Measure};
use crate::rng::{stream, Domain};
use crate::stats::mean_se;

pub use chaos::{chaos_truncated, ChaosExpansion, Smooth1d};
pub use testfn::{boundary_probes, DmBuilder, SmoothFunction, TestFunction, TestFunctionDm};

/// Largest number of crossed coordinates whose signs are enumerated.
pub const MAX_ENUMERATED: usize = 20;
/// Smallest replica count accepted by [`semigroup_estimate`].
pub const MIN_REPLICAS: usize = 1000;

/// `A^n f(x)` split into its three blocks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeneratorValue {
    pub value: f64,
    /// Second derivatives in two zero coordinates.
    pub zero_block: f64,
    /// Second derivatives in two nonzero coordinates.
    pub off_block: f64,
    /// Mixed derivatives, one zero and one nonzero coordinate.
    pub cross_block: f64,
}

/// Evaluates `A^n f(x)`.
///
/// With zero set `Z`, every block is averaged over the sign patterns `ε` of
/// `Z` with weights `M_ε`, and second derivatives are one-sided limits from
/// the orthant selected by `ε`.
pub fn generator_an<F: TestFunction + ?Sized>(f: &F, measure: &Measure, x: &[f64]) -> Result<GeneratorValue> {
    let n = f.dim();
    if x.len() != n {
        return Err(Error::InvalidArgument(format!("point has {} coordinates, function has {n}", x.len())));
    }
    let zeros: Vec<usize> = (0..n).filter(|&k| x[k] == 0.0).collect();
    let nonzero: Vec<usize> = (0..n).filter(|&k| x[k] != 0.0).collect();
    let mut out = GeneratorValue { value: 0.0, zero_block: 0.0, off_block: 0.0, cross_block: 0.0 };
    for eps in sign_patterns(zeros.len()) {
        let weight = measure.mixed_moment(&eps);
        let mut sides: Vec<i8> = x.iter().map(|&v| sgn(v) as i8).collect();
        for (&k, &e) in zeros.iter().zip(&eps) {
            sides[k] = e;
        }
        let hess = f.hessian(x, &sides).ok_or(Error::MissingOneSidedLimits)?;
        let s = |k: usize| f64::from(sides[k]);
        let mut zz = 0.0;
        for &h in &zeros {
            for &k in &zeros {
                zz += s(h) * s(k) * hess[h][k];
            }
        }
        let mut nn = 0.0;
        for &h in &nonzero {
            for &k in &nonzero {
                nn += s(h) * s(k) * hess[h][k];
            }
        }
        let mut zn = 0.0;
        for &h in &zeros {
            for &k in &nonzero {
                zn += s(h) * s(k) * hess[h][k];
            }
        }
        out.zero_block += 0.5 * weight * zz;
        out.off_block += 0.5 * weight * nn;
        out.cross_block += weight * zn;
    }
    out.value = out.zero_block + out.off_block + out.cross_block;
    Ok(out)
}

/// How [`semigroup_estimate`] reduces variance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    /// Plain average of `K^{⊗n}_{0,t} f(x)`.
    Plain,
    /// Subtracts the first-order term `∇f · ΔX`, whose mean is known.
    ControlVariate,
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// One replica's draws, expressed at unit time: `w`, `low = min_{[0,1]} W`,
/// the excursion weight, and a stream for sign sampling.
struct Draw {
    w: f64,
    low: f64,
    u: f64,
    seed: u64,
}

impl Draw {
    fn sample(measure: &Measure, seed: u64, r: u64) -> Self {
        let mut rng = stream(seed, Domain::Path, r);
        let w: f64 = rng.sample(StandardNormal);
        let e: f64 = 1.0 - rng.random::<f64>();
        // Minimum of a Brownian bridge from 0 to w on [0, 1].
        let low = 0.5 * (w - (w * w - 2.0 * e.ln()).sqrt());
        let u = measure.sample(&mut rng);
        Self { w, low, u, seed: rng.random() }
    }
}

struct Prepared<'a, F: ?Sized> {
    f: &'a F,
    x: &'a [f64],
    fx: f64,
    /// `∂_k f(x)` for nonzero coordinates; `(minus, plus)` slopes at zeros.
    interior_grad: Vec<f64>,
    zero_slopes: Vec<[f64; 2]>,
    estimator: Estimator,
}

impl<'a, F: TestFunction + ?Sized> Prepared<'a, F> {
    fn new(f: &'a F, x: &'a [f64], estimator: Estimator) -> Result<Self> {
        let n = x.len();
        let base: Vec<i8> = x.iter().map(|&v| sgn(v) as i8).collect();
        let (mut interior_grad, mut zero_slopes) = (vec![0.0; n], vec![[0.0; 2]; n]);
        if estimator == Estimator::ControlVariate {
            let plus = f.gradient(x, &vec![1; n]).ok_or(Error::MissingOneSidedLimits)?;
            let minus = f.gradient(x, &vec![-1; n]).ok_or(Error::MissingOneSidedLimits)?;
            let at = f.gradient(x, &base).ok_or(Error::MissingOneSidedLimits)?;
            for k in 0..n {
                if x[k] == 0.0 {
                    zero_slopes[k] = [minus[k], plus[k]];
                } else {
                    interior_grad[k] = at[k];
                }
            }
        }
        Ok(Self { f, x, fx: f.value(x), interior_grad, zero_slopes, estimator })
    }

    /// E[K^{⊗n}_{0,t} f(x) | W_t, min, u] minus the centred control variate.
    fn replica(&self, d: &Draw, t: f64) -> f64 {
        let n = self.x.len();
        let sd = t.sqrt();
        let (w, low) = (sd * d.w, sd * d.low);
        let reflected = w - low;
        let mut pos = vec![0.0; n];
        let mut crossed = Vec::new();
        for (k, &xk) in self.x.iter().enumerate() {
            if xk != 0.0 && low > -xk.abs() {
                pos[k] = xk + sgn(xk) * w;
            } else {
                crossed.push(k);
            }
        }
        let u = d.u;
        let value = if crossed.len() <= MAX_ENUMERATED {
            let mut total = 0.0;
            for bits in 0..1usize << crossed.len() {
                let mut weight = 1.0;
                for (i, &k) in crossed.iter().enumerate() {
                    if bits >> i & 1 == 1 {
                        pos[k] = reflected;
                        weight *= u;
                    } else {
                        pos[k] = -reflected;
                        weight *= 1.0 - u;
                    }
                }
                if weight != 0.0 {
                    total += weight * self.f.value(&pos);
                }
            }
            total
        } else {
            let mut rng = stream(d.seed, Domain::Signs, 0);
            for &k in &crossed {
                pos[k] = if rng.random::<f64>() < u { reflected } else { -reflected };
            }
            self.f.value(&pos)
        };
        match self.estimator {
            Estimator::Plain => value,
            Estimator::ControlVariate => {
                let mut cv = 0.0;
                let mut mean = 0.0;
                let mean_reflected = (2.0 * t / std::f64::consts::PI).sqrt();
                for k in 0..n {
                    if self.x[k] == 0.0 {
                        let [lo, hi] = self.zero_slopes[k];
                        cv += reflected * (u * hi - (1.0 - u) * lo);
                        mean += mean_reflected * 0.5 * (hi - lo);
                    } else {
                        cv += self.interior_grad[k] * sgn(self.x[k]) * w;
                    }
                }
                value - (cv - mean)
            }
        }
    }
}

fn validate(n: usize, x: &[f64], t: f64, replicas: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::InvalidArgument(format!("point has {} coordinates, function has {n}", x.len())));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time {t} must be positive")));
    }
    if replicas < MIN_REPLICAS {
        return Err(Error::TooFewSamples { needed: MIN_REPLICAS, got: replicas });
    }
    Ok(())
}

/// Estimates `P^n_t f(x) = E[K^{⊗n}_{0,t} f(x)]`.
///
/// Each replica samples `(W_t, min_{[0,t]} W)` exactly and one excursion
/// weight `u`, then averages `f` over every sign pattern of the crossed
/// coordinates. Replica `r` uses stream `r` of `seed`.
pub fn semigroup_estimate<F: TestFunction + ?Sized>(
    f: &F,
    measure: &Measure,
    x: &[f64],
    t: f64,
    replicas: usize,
    seed: u64,
    estimator: Estimator,
) -> Result<Estimate> {
    validate(f.dim(), x, t, replicas)?;
    let prep = Prepared::new(f, x, estimator)?;
    let vals: Vec<f64> = (0..replicas as u64).into_par_iter().map(|r| prep.replica(&Draw::sample(measure, seed, r), t)).collect();
    let (estimate, stderr) = mean_se(&vals);
    Ok(Estimate { estimate, stderr })
}

/// Finite-difference check of the generator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratorReport {
    pub n: usize,
    pub measure: String,
    pub x: Vec<f64>,
    pub t: f64,
    /// `(P_t f(x) − f(x)) / t`.
    pub fd_value: f64,
    /// Same at `t / 2`.
    pub fd_half: f64,
    /// `2 · fd_half − fd_value`.
    pub richardson: f64,
    pub an_value: f64,
    pub stderr: f64,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Relative tolerance on the extrapolated finite difference.
pub const GENERATOR_RELATIVE_TOLERANCE: f64 = 0.05;
/// Floor on `|A^n f|` when scaling the relative tolerance.
pub const GENERATOR_ABSOLUTE_FLOOR: f64 = 0.1;

/// Compares the Richardson extrapolation of `(P_t f − f)/t` from `t` and
/// `t/2` with `A^n f(x)`; passes if the gap is at most
/// `5% · max(|A^n f|, 0.1) + 3 · stderr`.
///
/// Both times reuse each replica's draws, so the extrapolation is formed
/// replica by replica and its standard error is exact.
pub fn generator_check<F: TestFunction + ?Sized>(
    f: &F,
    measure: &Measure,
    x: &[f64],
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<GeneratorReport> {
    validate(f.dim(), x, t, replicas)?;
    let an = generator_an(f, measure, x)?.value;
    let prep = Prepared::new(f, x, Estimator::ControlVariate)?;
    let pairs: Vec<(f64, f64)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let d = Draw::sample(measure, seed, r);
            ((prep.replica(&d, t) - prep.fx) / t, (prep.replica(&d, 0.5 * t) - prep.fx) / (0.5 * t))
        })
        .collect();
    let full: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let half: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let extrap: Vec<f64> = pairs.iter().map(|p| 2.0 * p.1 - p.0).collect();
    let (richardson, stderr) = mean_se(&extrap);
    let discrepancy = (richardson - an).abs();
    let tolerance = GENERATOR_RELATIVE_TOLERANCE * an.abs().max(GENERATOR_ABSOLUTE_FLOOR) + 3.0 * stderr;
    Ok(GeneratorReport {
        n: x.len(),
        measure: measure.name(),
        x: x.to_vec(),
        t,
        fd_value: mean_se(&full).0,
        fd_half: mean_se(&half).0,
        richardson,
        an_value: an,
        stderr,
        discrepancy,
        tolerance,
        pass: discrepancy <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor_smooth() -> TestFunctionDm {
        // g ⊗ h with g = 1 + y² − y³/2 and h = 1 − y² + y³ near the origin.
        DmBuilder::new(2).tensor(1.0, &[(1.0, -0.5), (-1.0, 1.0)]).build(&Measure::Uniform).unwrap()
    }

    #[test]
    fn interior_formula_for_products() {
        let f = tensor_smooth();
        let (a, b) = (0.3, 0.6);
        let g = |y: f64| 1.0 + y * y - 0.5 * y * y * y;
        let g1 = |y: f64| 2.0 * y - 1.5 * y * y;
        let g2 = |y: f64| 2.0 - 3.0 * y;
        let h = |y: f64| 1.0 - y * y + y * y * y;
        let h1 = |y: f64| -2.0 * y + 3.0 * y * y;
        let h2 = |y: f64| -2.0 + 6.0 * y;
        let expected = 0.5 * (g2(a) * h(b) + g(a) * h2(b)) + g1(a) * h1(b);
        let got = generator_an(&f, &Measure::DiracHalf, &[a, b]).unwrap();
        assert!((got.value - expected).abs() < 1e-12);
        assert_eq!(got.zero_block, 0.0);
        assert_eq!(got.cross_block, 0.0);
    }

    #[test]
    fn interior_agrees_with_difference_hessian() {
        let f = DmBuilder::new(2)
            .slope(0, 0.3)
            .cubic(0, 0.4, 0.4)
            .cubic(1, -1.0, 1.0)
            .cross(0, 1, 0.7)
            .tensor(0.5, &[(0.2, 0.1), (0.3, -0.2)])
            .build(&Measure::Uniform)
            .unwrap();
        let s = SmoothFunction::new(2, |p: &[f64]| f.value(p));
        for x in [[0.4, -0.3], [-0.2, -0.7], [1.3, 0.2]] {
            let a = generator_an(&f, &Measure::Uniform, &x).unwrap().value;
            let b = generator_an(&s, &Measure::Uniform, &x).unwrap().value;
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{x:?}: {a} vs {b}");
        }
    }

    #[test]
    fn vanishes_at_origin_in_one_dimension() {
        let f = DmBuilder::new(1).slope(0, 0.8).cubic(0, -0.5, 0.9).build(&Measure::Uniform).unwrap();
        for m in [Measure::Uniform, Measure::FairBernoulli] {
            assert_eq!(generator_an(&f, &m, &[0.0]).unwrap().value, 0.0);
        }
    }

    #[test]
    fn cross_block_cancels_for_symmetric_mixed_derivatives() {
        let f = DmBuilder::new(2).cross(0, 1, 1.3).slope(1, 0.4).build(&Measure::DiracHalf).unwrap();
        let g = generator_an(&f, &Measure::DiracHalf, &[0.0, 0.4]).unwrap();
        assert!(g.cross_block.abs() < 1e-15);
    }

    #[test]
    fn cross_term_at_origin_sees_the_measure() {
        let f = DmBuilder::new(2).cross(0, 1, 1.0).build(&Measure::Uniform).unwrap();
        for (m, expected) in [(Measure::Uniform, 1.0 / 3.0), (Measure::DiracHalf, 0.0), (Measure::FairBernoulli, 1.0)] {
            let g = generator_an(&f, &m, &[0.0, 0.0]).unwrap();
            assert!((g.value - expected).abs() < 1e-12, "{}: {}", m.name(), g.value);
        }
    }

    #[test]
    fn continuous_across_hyperplane_for_c1_functions() {
        let m = Measure::DiracHalf;
        let f =
            DmBuilder::new(2).slope(0, 0.5).cubic(0, 0.3, 0.3).cubic(1, 0.2, 0.2).tensor(0.4, &[(0.0, 1.0), (0.5, 0.0)]).build(&m).unwrap();
        let at = generator_an(&f, &m, &[0.0, 0.5]).unwrap().value;
        for d in [1e-7, -1e-7] {
            let near = generator_an(&f, &m, &[d, 0.5]).unwrap().value;
            assert!((near - at).abs() < 1e-5, "{d}: {near} vs {at}");
        }
        // A mixed derivative that survives on the hyperplane makes the two
        // sides differ by twice its value; the boundary value is their mean.
        let g = DmBuilder::new(2).cross(0, 1, 0.6).build(&m).unwrap();
        let at = generator_an(&g, &m, &[0.0, 0.5]).unwrap().value;
        let right = generator_an(&g, &m, &[1e-7, 0.5]).unwrap().value;
        let left = generator_an(&g, &m, &[-1e-7, 0.5]).unwrap().value;
        assert!((right - left - 1.2).abs() < 1e-9);
        assert!((0.5 * (right + left) - at).abs() < 1e-9);
    }

    #[test]
    fn closure_functions_need_limits_at_zero() {
        let s = SmoothFunction::new(2, |p: &[f64]| p[0] * p[1]);
        assert_eq!(generator_an(&s, &Measure::Uniform, &[0.0, 0.3]), Err(Error::MissingOneSidedLimits));
    }

    #[test]
    fn locally_constant_gives_exact_value() {
        let f = DmBuilder::new(2).constant(0.7).build(&Measure::Uniform).unwrap();
        let e = semigroup_estimate(&f, &Measure::Uniform, &[0.5, -0.2], 1e-8, 2000, 1, Estimator::Plain).unwrap();
        assert!((e.estimate - 0.7).abs() < 1e-12);
        assert!(e.stderr < 1e-12);
    }

    #[test]
    fn square_at_origin_grows_like_t() {
        let f = DmBuilder::new(1).quadratic(0, 1.0, 1.0).build(&Measure::Uniform).unwrap();
        let t = 1e-3;
        let e = semigroup_estimate(&f, &Measure::Uniform, &[0.0], t, 100_000, 2, Estimator::Plain).unwrap();
        assert!((e.estimate / t - 1.0).abs() <= 3.0 * e.stderr / t, "{}", e.estimate / t);
    }

    #[test]
    fn product_at_origin_sees_sign_covariance() {
        let f = DmBuilder::new(2).cross(0, 1, 1.0).build(&Measure::Uniform).unwrap();
        let t = 1e-3;
        let e = semigroup_estimate(&f, &Measure::Uniform, &[0.0, 0.0], t, 100_000, 3, Estimator::Plain).unwrap();
        assert!((e.estimate / t - 1.0 / 3.0).abs() <= 3.0 * e.stderr / t, "{}", e.estimate / t);
    }

    #[test]
    fn half_samples_agree() {
        let f = DmBuilder::new(2).slope(0, 0.4).cubic(1, 0.5, -0.5).cross(0, 1, 0.9).build(&Measure::Uniform).unwrap();
        let m = Measure::beta_symmetric(2.0).unwrap();
        let a = semigroup_estimate(&f, &m, &[0.0, 0.2], 0.01, 20_000, 4, Estimator::Plain).unwrap();
        let b = semigroup_estimate(&f, &m, &[0.0, 0.2], 0.01, 20_000, 5, Estimator::Plain).unwrap();
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.estimate - b.estimate).abs() <= 3.0 * se);
        let c = semigroup_estimate(&f, &m, &[0.0, 0.2], 0.01, 20_000, 4, Estimator::ControlVariate).unwrap();
        assert!((a.estimate - c.estimate).abs() <= 3.0 * (a.stderr.powi(2) + c.stderr.powi(2)).sqrt());
        assert!(c.stderr < a.stderr);
    }

    #[test]
    fn sampled_signs_agree_with_enumeration() {
        let n = 22;
        let mut b = DmBuilder::new(n);
        for k in 0..n - 1 {
            b = b.cross(k, k + 1, 0.5);
        }
        let f = b.build(&Measure::Uniform);
        assert!(f.is_err(), "dimension above the builder limit");
        let s = SmoothFunction::new(n, |p: &[f64]| p.windows(2).map(|w| w[0] * w[1]).sum::<f64>());
        let x = vec![0.0; n];
        let e = semigroup_estimate(&s, &Measure::Uniform, &x, 0.01, 20_000, 6, Estimator::Plain).unwrap();
        // Each adjacent pair contributes E[(W⁺)²] E[(2U − 1)²] = t/3.
        let expected = (n - 1) as f64 * 0.01 / 3.0;
        assert!((e.estimate - expected).abs() <= 3.0 * e.stderr, "{} vs {expected}", e.estimate);
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let f = DmBuilder::new(1).slope(0, 0.3).cubic(0, 0.2, 0.2).build(&Measure::Uniform).unwrap();
        let a = generator_check(&f, &Measure::Uniform, &[0.5], 1e-3, 2000, 9).unwrap();
        let b = generator_check(&f, &Measure::Uniform, &[0.5], 1e-3, 2000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validates_inputs() {
        let f = DmBuilder::new(1).build(&Measure::Uniform).unwrap();
        assert!(semigroup_estimate(&f, &Measure::Uniform, &[0.0], 0.0, 5000, 1, Estimator::Plain).is_err());
        assert!(semigroup_estimate(&f, &Measure::Uniform, &[0.0], 0.1, 10, 1, Estimator::Plain).is_err());
        assert!(semigroup_estimate(&f, &Measure::Uniform, &[0.0, 0.0], 0.1, 5000, 1, Estimator::Plain).is_err());
    }
}
