//! Chaos expansion of the Wiener solution, truncated at order 2.
//!
//! Iterating `K_{0,t} f(x) = p_t f(x) + ∫_0^t K_{0,u}((p_{t−u} f)' sgn)(x) dW_u`
//! and replacing the innermost kernel by its mean `p_u` gives
//!
//! ```text
//! p_t f(x) + ∫ h₁(u) dW_u + ∫∫_{v<u} h₂(v, u) dW_v dW_u
//! ```
//!
//! with `F_u = p_{t−u} f'`, `h₁(u) = p_u(F_u sgn)(x)` and
//! `h₂(v, u) = p_v(G sgn)(x)`, `G = p_{u−v}(F_u' sgn) + 2 F_u(0) φ_{u−v}`.
//! Both reduce to one-dimensional integrals by conditioning the Gaussian
//! variable at the earlier time on the one at the later time.

use crate::error::{Error, Result};
use crate::paths::BrownianPath;
use crate::quadrature::{heat, integrate};
use crate::stats::{standard_normal_cdf, standard_normal_pdf};

/// A smooth function on ℝ with its first two derivatives.
pub trait Smooth1d: Sync {
    fn value(&self, y: f64) -> f64;
    fn d1(&self, y: f64) -> f64;
    fn d2(&self, y: f64) -> f64;
}

/// `amplitude · exp(−(y − center)² / (2 width²))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianProfile {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Smooth1d for GaussianProfile {
    fn value(&self, y: f64) -> f64 {
        let z = (y - self.center) / self.width;
        self.amplitude * (-0.5 * z * z).exp()
    }

    fn d1(&self, y: f64) -> f64 {
        -(y - self.center) / (self.width * self.width) * self.value(y)
    }

    fn d2(&self, y: f64) -> f64 {
        let w2 = self.width * self.width;
        let d = y - self.center;
        (d * d / w2 - 1.0) / w2 * self.value(y)
    }
}

/// Highest supported order.
pub const MAX_ORDER: usize = 2;
const TOL: f64 = 1e-10;
const SPAN: f64 = 10.0;

/// `E[sgn(Y)]` for `Y ~ N(mean, sd²)`, 0 in the degenerate symmetric case.
fn mean_sign(mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        if mean == 0.0 {
            0.0
        } else {
            mean.signum()
        }
    } else {
        2.0 * standard_normal_cdf(mean / sd) - 1.0
    }
}

/// Integrates `g` against the N(mean, var) density, splitting at `breaks`.
fn gaussian_integral<G: Fn(f64) -> f64>(g: G, mean: f64, var: f64, breaks: &[f64]) -> f64 {
    let sd = var.sqrt();
    let (lo, hi) = (mean - SPAN * sd, mean + SPAN * sd);
    let mut cuts = vec![lo];
    cuts.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    let dens = |r: f64| standard_normal_pdf((r - mean) / sd) / sd;
    cuts.windows(2).map(|w| integrate(|r| g(r) * dens(r), w[0], w[1], TOL)).sum()
}

/// Deterministic coefficients of the truncated expansion at `(x, t)` on a
/// uniform grid of `steps` intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosExpansion {
    pub x: f64,
    pub t: f64,
    pub mean: f64,
    /// `h₁(u_j)` at left endpoints `u_j = j t / steps`.
    pub first: Vec<f64>,
    /// `h₂(u_i, u_j)` for `i < j`, row-major in `j`.
    pub second: Vec<Vec<f64>>,
}

impl ChaosExpansion {
    pub fn new<F: Smooth1d + ?Sized>(f: &F, x: f64, t: f64, steps: usize) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) || steps == 0 {
            return Err(Error::InvalidArgument("chaos needs t > 0 and at least one step".into()));
        }
        let times: Vec<f64> = (0..steps).map(|j| t * j as f64 / steps as f64).collect();
        let mean = heat(|y| f.value(y), t, x);
        let first = times.iter().map(|&u| first_kernel(f, x, t, u)).collect();
        let second = (0..steps).map(|j| (0..j).map(|i| second_kernel(f, x, t, times[i], times[j])).collect()).collect();
        Ok(Self { x, t, mean, first, second })
    }

    pub fn steps(&self) -> usize {
        self.first.len()
    }

    /// Evaluates orders `0..=order` on increments over the coarse grid.
    pub fn evaluate(&self, increments: &[f64], order: usize) -> Result<f64> {
        if order > MAX_ORDER {
            return Err(Error::UnsupportedChaosOrder(order));
        }
        if increments.len() != self.steps() {
            return Err(Error::InvalidArgument(format!("{} increments for {} steps", increments.len(), self.steps())));
        }
        let mut total = self.mean;
        if order >= 1 {
            total += self.first.iter().zip(increments).map(|(h, dw)| h * dw).sum::<f64>();
        }
        if order >= 2 {
            let mut acc = 0.0;
            for (j, row) in self.second.iter().enumerate() {
                let inner: f64 = row.iter().zip(increments).map(|(h, dw)| h * dw).sum();
                acc += inner * increments[j];
            }
            total += acc;
        }
        Ok(total)
    }

    /// Aggregates a path on `[0, t]` to the coarse grid and evaluates it.
    pub fn evaluate_path(&self, path: &BrownianPath, order: usize) -> Result<f64> {
        let steps = path.steps();
        let coarse = self.steps();
        if !steps.is_multiple_of(coarse) {
            return Err(Error::InvalidGrid(format!("{steps} path steps do not refine {coarse} chaos steps")));
        }
        if (path.grid().horizon() - self.t).abs() > 1e-9 * self.t || path.grid().t0() != 0.0 {
            return Err(Error::InvalidGrid("path must cover exactly [0, t]".into()));
        }
        let q = steps / coarse;
        let w = path.values();
        let incs: Vec<f64> = (0..coarse).map(|j| w[(j + 1) * q] - w[j * q]).collect();
        self.evaluate(&incs, order)
    }
}

/// h₁(u) = E[f'(R) E[sgn Y | R]] with R ~ N(x, t) and Y the value at u.
fn first_kernel<F: Smooth1d + ?Sized>(f: &F, x: f64, t: f64, u: f64) -> f64 {
    let sd = (u * (t - u) / t).sqrt();
    let cond_mean = |r: f64| x + (r - x) * u / t;
    let root = if u > 0.0 { x - x * t / u } else { x };
    gaussian_integral(|r| f.d1(r) * mean_sign(cond_mean(r), sd), x, t, &[root])
}

/// h₂(v, u) for v < u.
fn second_kernel<F: Smooth1d + ?Sized>(f: &F, x: f64, t: f64, v: f64, u: f64) -> f64 {
    let lag = u - v;
    let rest = t - u;
    // F_u(y) = p_{t−u} f'(y) and F_u'(y) = p_{t−u} f''(y).
    let fu_prime = |y: f64| heat(|z| f.d2(z), rest, y);
    let fu_zero = heat(|z| f.d1(z), rest, 0.0);
    let sd = (v * lag / u).sqrt();
    let cond_mean = |r: f64| x + (r - x) * v / u;
    let root = if v > 0.0 { x - x * u / v } else { x };
    let part_a = gaussian_integral(
        |r| {
            let s = if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            };
            fu_prime(r) * s * mean_sign(cond_mean(r), sd)
        },
        x,
        u,
        &[0.0, root],
    );
    let phi_u = standard_normal_pdf(x / u.sqrt()) / u.sqrt();
    let part_b = 2.0 * fu_zero * phi_u * mean_sign(x * lag / u, sd);
    part_a + part_b
}

/// Truncated expansion of `K_{0,t} f(x)` for the Wiener solution, with the
/// stochastic integrals taken as left-point sums over at most 100 coarse
/// intervals of `path`, which must cover `[0, t]`.
pub fn chaos_truncated<F: Smooth1d + ?Sized>(f: &F, x: f64, t: f64, order: usize, path: &BrownianPath) -> Result<f64> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedChaosOrder(order));
    }
    let steps = path.steps();
    let coarse = (1..=steps.min(100)).rev().find(|c| steps.is_multiple_of(*c)).unwrap_or(1);
    ChaosExpansion::new(f, x, t, coarse)?.evaluate_path(path, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::kernel_wiener;
    use crate::paths::{generate_brownian, TimeGrid};
    use crate::rng::{stream, Domain};
    use rayon::prelude::*;

    fn profile() -> GaussianProfile {
        GaussianProfile { amplitude: 1.0, center: 0.12, width: 0.25 }
    }

    #[test]
    fn profile_derivatives() {
        let f = profile();
        for y in [-0.4, 0.0, 0.3] {
            let h = 1e-5;
            assert!(((f.value(y + h) - f.value(y - h)) / (2.0 * h) - f.d1(y)).abs() < 1e-8);
            assert!(((f.d1(y + h) - f.d1(y - h)) / (2.0 * h) - f.d2(y)).abs() < 1e-7);
        }
    }

    #[test]
    fn order_zero_is_heat_semigroup() {
        let f = profile();
        let t: f64 = 0.1;
        let w2 = f.width * f.width;
        let exact = f.width / (w2 + t).sqrt() * (-(f.center * f.center) / (2.0 * (w2 + t))).exp();
        let g = TimeGrid::new(0.0, t / 100.0, 100).unwrap();
        let p = generate_brownian(g, &mut stream(1, Domain::Path, 0));
        let c0 = chaos_truncated(&f, 0.0, t, 0, &p).unwrap();
        assert!((c0 - exact).abs() < 1e-12);
        let odd = GaussianProfile { amplitude: 1.0, center: 0.0, width: 0.3 };
        struct Odd(GaussianProfile);
        impl Smooth1d for Odd {
            fn value(&self, y: f64) -> f64 {
                y * self.0.value(y)
            }
            fn d1(&self, y: f64) -> f64 {
                self.0.value(y) + y * self.0.d1(y)
            }
            fn d2(&self, y: f64) -> f64 {
                2.0 * self.0.d1(y) + y * self.0.d2(y)
            }
        }
        assert!(chaos_truncated(&Odd(odd), 0.0, t, 0, &p).unwrap().abs() < 1e-15);
        assert_eq!(chaos_truncated(&f, 0.0, t, 3, &p), Err(Error::UnsupportedChaosOrder(3)));
    }

    #[test]
    fn first_kernel_matches_direct_double_integral() {
        let f = profile();
        let (x, t, u) = (0.05, 0.1, 0.04);
        // p_u(F_u sgn)(x) with F_u = p_{t−u} f' by nested quadrature.
        let direct = gaussian_integral(|y| heat(|z| f.d1(z), t - u, y) * y.signum(), x, u, &[0.0]);
        assert!((first_kernel(&f, x, t, u) - direct).abs() < 1e-9);
    }

    #[test]
    fn l2_error_decreases_with_order() {
        let f = profile();
        let t = 0.1;
        let exp = ChaosExpansion::new(&f, 0.0, t, 100).unwrap();
        let grid = TimeGrid::new(0.0, t / 2000.0, 2000).unwrap();
        let errs: Vec<[f64; 3]> = (0..2000u64)
            .into_par_iter()
            .map(|r| {
                let p = generate_brownian(grid, &mut stream(2, Domain::Path, r));
                let k = kernel_wiener(&p, 0, 2000, 0.0).unwrap().expect(|y| f.value(y));
                let mut e = [0.0; 3];
                for (order, slot) in e.iter_mut().enumerate() {
                    *slot = (exp.evaluate_path(&p, order).unwrap() - k).powi(2);
                }
                e
            })
            .collect();
        let mean = |i: usize| errs.iter().map(|e| e[i]).sum::<f64>() / errs.len() as f64;
        let (e0, e1, e2) = (mean(0), mean(1), mean(2));
        assert!(e0 > e1 && e1 > e2, "{e0} {e1} {e2}");
    }
}
