//! Test functions for the n-point generator.
//!
//! A [`TestFunctionDm`] is `χ(y) · G(y)`, where `χ` is a product of C²
//! cutoffs equal to 1 on `|y_k| ≤ inner` and 0 beyond `outer`, and
//!
//! ```text
//! G(y) = b + Σ_k φ_k(y_k) + Σ_{h<k} r_hk y_h y_k + Σ_j c_j Π_k p_jk(y_k)
//! ```
//!
//! Each `φ_k(y) = a y + q y² + c y³` takes its coefficients from the side of
//! 0 that `y` lies on, and each tensor factor `p(y) = 1 + q y² + c y³` does
//! the same. One-sided derivatives at zero coordinates are therefore exact.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measures::{sign_patterns, Measure};

/// Coefficients `(linear, quadratic, cubic)` on each side of 0.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SidedPoly {
    pub minus: [f64; 3],
    pub plus: [f64; 3],
}

impl SidedPoly {
    fn side(&self, y: f64, side: i8) -> &[f64; 3] {
        if y > 0.0 || (y == 0.0 && side > 0) {
            &self.plus
        } else {
            &self.minus
        }
    }

    /// Value, first and second derivative; `side` decides the branch at 0.
    fn eval(&self, y: f64, side: i8) -> [f64; 3] {
        let [a, q, c] = *self.side(y, side);
        [y * (a + y * (q + y * c)), a + y * (2.0 * q + 3.0 * c * y), 2.0 * q + 6.0 * c * y]
    }
}

/// `Π_k (1 + q_k y_k² + c_k y_k³)` with per-side `(q, c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorTerm {
    pub coef: f64,
    pub factors: Vec<SidedPoly>,
}

/// C² cutoff: 1 on `|y| ≤ inner`, quintic smoothstep down to 0 at `outer`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    fn eval(&self, y: f64) -> [f64; 3] {
        let a = y.abs();
        if a <= self.inner {
            return [1.0, 0.0, 0.0];
        }
        if a >= self.outer {
            return [0.0, 0.0, 0.0];
        }
        let w = self.outer - self.inner;
        let u = (a - self.inner) / w;
        let s = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
        let ds = 30.0 * u * u * (1.0 - u) * (1.0 - u) / w;
        let d2s = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / (w * w);
        let sg = y.signum();
        [1.0 - s, -ds * sg, -d2s]
    }
}

/// Anything the generator can be evaluated on.
pub trait TestFunction: Sync {
    fn dim(&self) -> usize;
    fn value(&self, y: &[f64]) -> f64;
    /// Gradient at `y`; at zero coordinates the limit from side `sides[k]`.
    /// `None` if one-sided limits are not available there.
    fn gradient(&self, y: &[f64], sides: &[i8]) -> Option<Vec<f64>>;
    /// Hessian at `y` with the same conventions as [`TestFunction::gradient`].
    fn hessian(&self, y: &[f64], sides: &[i8]) -> Option<Vec<Vec<f64>>>;
}

/// A member of the test class, with the record of its construction.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunctionDm {
    n: usize,
    constant: f64,
    coords: Vec<SidedPoly>,
    cross: Vec<(usize, usize, f64)>,
    tensors: Vec<TensorTerm>,
    cutoff: Cutoff,
    /// Change applied to the one-sided slopes `(minus, plus)` per coordinate.
    pub slope_correction: Vec<[f64; 2]>,
    /// Largest violation of the first-order boundary condition after projection.
    pub boundary_residual: f64,
}

impl TestFunctionDm {
    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    /// One-sided slopes `(minus, plus)` of coordinate `k` at 0.
    pub fn slopes(&self, k: usize) -> [f64; 2] {
        [self.coords[k].minus[0], self.coords[k].plus[0]]
    }

    fn side_of(y: f64, side: i8) -> i8 {
        if y > 0.0 {
            1
        } else if y < 0.0 {
            -1
        } else {
            side
        }
    }

    /// G, ∇G, ∇²G without the cutoff.
    fn inner_parts(&self, y: &[f64], sides: &[i8]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let mut g = self.constant;
        let mut grad = vec![0.0; n];
        let mut hess = vec![vec![0.0; n]; n];
        for k in 0..n {
            let [v, d1, d2] = self.coords[k].eval(y[k], sides[k]);
            g += v;
            grad[k] += d1;
            hess[k][k] += d2;
        }
        for &(h, k, r) in &self.cross {
            g += r * y[h] * y[k];
            grad[h] += r * y[k];
            grad[k] += r * y[h];
            hess[h][k] += r;
            hess[k][h] += r;
        }
        for term in &self.tensors {
            let parts: Vec<[f64; 3]> = term
                .factors
                .iter()
                .zip(y)
                .zip(sides)
                .map(|((p, &yk), &s)| {
                    let [a, q, c] = *p.side(yk, s);
                    debug_assert_eq!(a, 0.0);
                    [1.0 + yk * yk * (q + c * yk), yk * (2.0 * q + 3.0 * c * yk), 2.0 * q + 6.0 * c * yk]
                })
                .collect();
            let prod_except =
                |skip: &[usize]| -> f64 { parts.iter().enumerate().filter(|(i, _)| !skip.contains(i)).map(|(_, p)| p[0]).product() };
            g += term.coef * prod_except(&[]);
            for k in 0..n {
                grad[k] += term.coef * parts[k][1] * prod_except(&[k]);
                hess[k][k] += term.coef * parts[k][2] * prod_except(&[k]);
                for h in 0..k {
                    let v = term.coef * parts[h][1] * parts[k][1] * prod_except(&[h, k]);
                    hess[h][k] += v;
                    hess[k][h] += v;
                }
            }
        }
        (g, grad, hess)
    }

    fn full(&self, y: &[f64], sides: &[i8]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let sides: Vec<i8> = y.iter().zip(sides).map(|(&v, &s)| Self::side_of(v, s)).collect();
        let (g, gg, gh) = self.inner_parts(y, &sides);
        let cut: Vec<[f64; 3]> = y.iter().map(|&v| self.cutoff.eval(v)).collect();
        let chi: f64 = cut.iter().map(|c| c[0]).product();
        if chi == 1.0 && cut.iter().all(|c| c[1] == 0.0 && c[2] == 0.0) {
            return (g, gg, gh);
        }
        let except = |skip: &[usize]| -> f64 { cut.iter().enumerate().filter(|(i, _)| !skip.contains(i)).map(|(_, c)| c[0]).product() };
        let dchi: Vec<f64> = (0..n).map(|k| cut[k][1] * except(&[k])).collect();
        let mut hchi = vec![vec![0.0; n]; n];
        for k in 0..n {
            hchi[k][k] = cut[k][2] * except(&[k]);
            for h in 0..k {
                let v = cut[h][1] * cut[k][1] * except(&[h, k]);
                hchi[h][k] = v;
                hchi[k][h] = v;
            }
        }
        let value = g * chi;
        let grad: Vec<f64> = (0..n).map(|k| gg[k] * chi + g * dchi[k]).collect();
        let hess = (0..n).map(|h| (0..n).map(|k| gh[h][k] * chi + gg[h] * dchi[k] + gg[k] * dchi[h] + g * hchi[h][k]).collect()).collect();
        (value, grad, hess)
    }

    /// Largest one-sided second derivative normal to the zero hyperplanes
    /// (indices `i, j` both in the zero set of a probe point), over `probes`.
    pub fn second_order_residual(&self, probes: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for x in probes {
            let zeros: Vec<usize> = (0..self.n).filter(|&k| x[k] == 0.0).collect();
            if zeros.is_empty() {
                continue;
            }
            for eps in sign_patterns(self.n) {
                let (_, _, h) = self.full(x, &eps);
                for &i in &zeros {
                    for &j in &zeros {
                        worst = worst.max(h[i][j].abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest violation, over `probes`, of
    /// `Σ_ε M_ε Σ_{k ∈ Z} ε_k ∂_k f(x^ε) = 0` with `Z` the zero set of `x`.
    pub fn first_order_residual(&self, measure: &Measure, probes: &[Vec<f64>]) -> f64 {
        probes.iter().map(|x| boundary_sum(self, measure, x).abs()).fold(0.0, f64::max)
    }
}

fn boundary_sum<F: TestFunction + ?Sized>(f: &F, measure: &Measure, x: &[f64]) -> f64 {
    let zeros: Vec<usize> = (0..x.len()).filter(|&k| x[k] == 0.0).collect();
    if zeros.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for eps in sign_patterns(zeros.len()) {
        let mut sides = vec![1i8; x.len()];
        for (&k, &e) in zeros.iter().zip(&eps) {
            sides[k] = e;
        }
        let Some(grad) = f.gradient(x, &sides) else { return f64::NAN };
        let inner: f64 = zeros.iter().map(|&k| f64::from(sides[k]) * grad[k]).sum();
        total += measure.mixed_moment(&eps) * inner;
    }
    total
}

impl TestFunction for TestFunctionDm {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.full(y, &vec![1; self.n]).0
    }

    fn gradient(&self, y: &[f64], sides: &[i8]) -> Option<Vec<f64>> {
        Some(self.full(y, sides).1)
    }

    fn hessian(&self, y: &[f64], sides: &[i8]) -> Option<Vec<Vec<f64>>> {
        Some(self.full(y, sides).2)
    }
}

/// Builds a [`TestFunctionDm`] for a given measure.
#[derive(Clone, Debug)]
pub struct DmBuilder {
    n: usize,
    constant: f64,
    coords: Vec<SidedPoly>,
    cross: Vec<(usize, usize, f64)>,
    tensors: Vec<TensorTerm>,
    cutoff: Cutoff,
}

/// Largest dimension for which the boundary constraint is assembled.
pub const MAX_BUILD_DIM: usize = 12;

impl DmBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            constant: 0.0,
            coords: vec![SidedPoly::default(); n],
            cross: Vec::new(),
            tensors: Vec::new(),
            cutoff: Cutoff { inner: 1.0, outer: 2.0 },
        }
    }

    pub fn constant(mut self, b: f64) -> Self {
        self.constant = b;
        self
    }

    /// One-sided slopes of coordinate `k` at 0.
    pub fn slopes(mut self, k: usize, minus: f64, plus: f64) -> Self {
        self.coords[k].minus[0] = minus;
        self.coords[k].plus[0] = plus;
        self
    }

    /// Same slope on both sides.
    pub fn slope(self, k: usize, a: f64) -> Self {
        self.slopes(k, a, a)
    }

    pub fn quadratic(mut self, k: usize, minus: f64, plus: f64) -> Self {
        self.coords[k].minus[1] = minus;
        self.coords[k].plus[1] = plus;
        self
    }

    pub fn cubic(mut self, k: usize, minus: f64, plus: f64) -> Self {
        self.coords[k].minus[2] = minus;
        self.coords[k].plus[2] = plus;
        self
    }

    /// Adds `r · y_h · y_k`.
    pub fn cross(mut self, h: usize, k: usize, r: f64) -> Self {
        self.cross.push((h, k, r));
        self
    }

    /// Adds `coef · Π_k (1 + q_k y_k² + c_k y_k³)` with `(q, c)` per coordinate.
    pub fn tensor(mut self, coef: f64, factors: &[(f64, f64)]) -> Self {
        let factors = factors.iter().map(|&(q, c)| SidedPoly { minus: [0.0, q, c], plus: [0.0, q, c] }).collect();
        self.tensors.push(TensorTerm { coef, factors });
        self
    }

    pub fn cutoff(mut self, inner: f64, outer: f64) -> Self {
        self.cutoff = Cutoff { inner, outer };
        self
    }

    /// Projects the slopes onto the boundary constraint for `measure` by the
    /// least-norm correction and returns the function.
    pub fn build(self, measure: &Measure) -> Result<TestFunctionDm> {
        let n = self.n;
        if n == 0 || n > MAX_BUILD_DIM {
            return Err(Error::InvalidArgument(format!("dimension {n} outside 1..={MAX_BUILD_DIM}")));
        }
        if !(self.cutoff.inner > 0.0 && self.cutoff.outer > self.cutoff.inner) {
            return Err(Error::InvalidArgument("cutoff needs 0 < inner < outer".into()));
        }
        if self.cross.iter().any(|&(h, k, _)| h >= n || k >= n || h == k) {
            return Err(Error::InvalidArgument("cross term needs two distinct coordinates".into()));
        }
        if self.tensors.iter().any(|t| t.factors.len() != n) {
            return Err(Error::InvalidArgument("tensor term has the wrong number of factors".into()));
        }
        // One row per nonempty zero set Z, one column per slope (k, side):
        // Σ_{ε} M_ε ε_k [ε_k = side].
        let subsets: Vec<Vec<usize>> = (1..1usize << n).map(|bits| (0..n).filter(|k| bits >> k & 1 == 1).collect()).collect();
        let mut c = DMatrix::<f64>::zeros(subsets.len(), 2 * n);
        for (row, z) in subsets.iter().enumerate() {
            for eps in sign_patterns(z.len()) {
                let w = measure.mixed_moment(&eps);
                for (&k, &e) in z.iter().zip(&eps) {
                    let col = 2 * k + usize::from(e > 0);
                    c[(row, col)] += w * f64::from(e);
                }
            }
        }
        let a = DVector::from_iterator(2 * n, self.coords.iter().flat_map(|p| [p.minus[0], p.plus[0]]));
        let pinv = c.clone().pseudo_inverse(1e-12).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let delta = -(&pinv * (&c * &a));
        let mut coords = self.coords;
        let mut slope_correction = vec![[0.0; 2]; n];
        for k in 0..n {
            slope_correction[k] = [delta[2 * k], delta[2 * k + 1]];
            coords[k].minus[0] += delta[2 * k];
            coords[k].plus[0] += delta[2 * k + 1];
        }
        let mut f = TestFunctionDm {
            n,
            constant: self.constant,
            coords,
            cross: self.cross,
            tensors: self.tensors,
            cutoff: self.cutoff,
            slope_correction,
            boundary_residual: 0.0,
        };
        f.boundary_residual = f.first_order_residual(measure, &boundary_probes(n, self.cutoff.inner));
        Ok(f)
    }
}

/// Points with every nonempty zero set and nonzero coordinates spread over
/// the region where the cutoff is flat.
pub fn boundary_probes(n: usize, radius: f64) -> Vec<Vec<f64>> {
    let levels = [-0.7, -0.2, 0.35, 0.9];
    let mut out = Vec::new();
    for bits in 1..1usize << n {
        for (i, _) in levels.iter().enumerate() {
            out.push((0..n).map(|k| if bits >> k & 1 == 1 { 0.0 } else { radius * levels[(i + k) % levels.len()] }).collect());
        }
    }
    out
}

/// A smooth function given by a closure, with central-difference
/// derivatives. It has no one-sided limits, so it can only be used away
/// from the zero hyperplanes.
pub struct SmoothFunction<F> {
    n: usize,
    f: F,
    step: f64,
}

impl<F: Fn(&[f64]) -> f64 + Sync> SmoothFunction<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f, step: 1e-4 }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> TestFunction for SmoothFunction<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, y: &[f64]) -> f64 {
        (self.f)(y)
    }

    fn gradient(&self, y: &[f64], _sides: &[i8]) -> Option<Vec<f64>> {
        if y.contains(&0.0) {
            return None;
        }
        let h = self.step;
        let mut p = y.to_vec();
        Some(
            (0..self.n)
                .map(|k| {
                    p[k] = y[k] + h;
                    let up = (self.f)(&p);
                    p[k] = y[k] - h;
                    let down = (self.f)(&p);
                    p[k] = y[k];
                    (up - down) / (2.0 * h)
                })
                .collect(),
        )
    }

    fn hessian(&self, y: &[f64], _sides: &[i8]) -> Option<Vec<Vec<f64>>> {
        if y.contains(&0.0) {
            return None;
        }
        Some(central_hessian(&self.f, y, self.step))
    }
}

/// Central-difference Hessian.
pub fn central_hessian<F: Fn(&[f64]) -> f64>(f: &F, y: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = y.len();
    let mut p = y.to_vec();
    let at = |p: &mut Vec<f64>, dh: (usize, f64), dk: (usize, f64)| {
        p[dh.0] += dh.1;
        p[dk.0] += dk.1;
        let v = f(p);
        p[dh.0] -= dh.1;
        p[dk.0] -= dk.1;
        v
    };
    let mut out = vec![vec![0.0; n]; n];
    for (hh, row) in out.iter_mut().enumerate() {
        for (kk, slot) in row.iter_mut().enumerate() {
            *slot = (at(&mut p, (hh, h), (kk, h)) - at(&mut p, (hh, h), (kk, -h)) - at(&mut p, (hh, -h), (kk, h))
                + at(&mut p, (hh, -h), (kk, -h)))
                / (4.0 * h * h);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_fn(m: &Measure) -> TestFunctionDm {
        DmBuilder::new(2)
            .constant(0.4)
            .slopes(0, 0.3, 0.7)
            .slope(1, -0.2)
            .quadratic(0, 0.5, -0.1)
            .cubic(0, 0.2, 0.6)
            .cubic(1, -0.3, 0.4)
            .cross(0, 1, 0.8)
            .tensor(0.25, &[(0.0, 1.0), (0.0, -0.5)])
            .cutoff(0.8, 1.6)
            .build(m)
            .unwrap()
    }

    #[test]
    fn analytic_hessian_matches_differences() {
        let f = sample_fn(&Measure::Uniform);
        for y in [[0.3, -0.4], [-0.5, 0.2], [1.1, 0.3], [-1.2, -1.3], [0.05, 1.5]] {
            let h = f.hessian(&y, &[1, 1]).unwrap();
            let fd = central_hessian(&|p: &[f64]| f.value(p), &y, 1e-4);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((h[i][j] - fd[i][j]).abs() <= 1e-6 * h[i][j].abs().max(1.0), "{y:?} {i}{j}: {} vs {}", h[i][j], fd[i][j]);
                }
            }
            let g = f.gradient(&y, &[1, 1]).unwrap();
            let gs = SmoothFunction::new(2, |p: &[f64]| f.value(p)).gradient(&y, &[1, 1]).unwrap();
            for k in 0..2 {
                assert!((g[k] - gs[k]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn one_sided_limits_match_interior_values() {
        let f = sample_fn(&Measure::DiracHalf);
        for side in [-1i8, 1] {
            let at_zero = f.hessian(&[0.0, 0.3], &[side, 1]).unwrap();
            let near = f.hessian(&[f64::from(side) * 1e-9, 0.3], &[1, 1]).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((at_zero[i][j] - near[i][j]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn projection_equalizes_slopes() {
        for m in [Measure::DiracHalf, Measure::FairBernoulli, Measure::beta_symmetric(2.0).unwrap()] {
            let f = sample_fn(&m);
            let [lo, hi] = f.slopes(0);
            assert!((lo - 0.5).abs() < 1e-12 && (hi - 0.5).abs() < 1e-12, "{lo} {hi}");
            assert_eq!(f.slope_correction[1], [0.0, 0.0]);
            assert!(f.boundary_residual <= 1e-10);
        }
    }

    #[test]
    fn tensor_of_flat_factors_needs_no_correction() {
        let m = Measure::Uniform;
        let f = DmBuilder::new(2).tensor(1.0, &[(0.0, 0.5), (0.0, -1.0)]).build(&m).unwrap();
        assert!(f.slope_correction.iter().flatten().all(|&d| d == 0.0));
        assert!(f.boundary_residual <= 1e-10);
        let probes = boundary_probes(2, 1.0);
        assert_eq!(f.second_order_residual(&probes), 0.0);
        let q = DmBuilder::new(1).quadratic(0, 1.0, 1.0).build(&m).unwrap();
        assert_eq!(q.second_order_residual(&boundary_probes(1, 1.0)), 2.0);
    }

    #[test]
    fn closure_function_has_no_boundary_limits() {
        let s = SmoothFunction::new(2, |p: &[f64]| p[0] * p[1]);
        assert!(s.hessian(&[0.0, 1.0], &[1, 1]).is_none());
        assert!(s.hessian(&[0.5, 1.0], &[1, 1]).is_some());
    }

    #[test]
    fn cutoff_is_c2_and_compact() {
        let c = Cutoff { inner: 1.0, outer: 2.0 };
        for y in [1.0, 2.0, -1.0, -2.0] {
            let below = c.eval(y * (1.0 - 1e-9));
            let above = c.eval(y * (1.0 + 1e-9));
            for i in 0..3 {
                assert!((below[i] - above[i]).abs() < 1e-6);
            }
        }
        assert_eq!(c.eval(2.5), [0.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn built_functions_satisfy_boundary_condition(
            slopes in proptest::collection::vec(-2.0f64..2.0, 6),
            alpha in 0.2f64..3.0,
        ) {
            let m = Measure::beta_symmetric(alpha).unwrap();
            let f = DmBuilder::new(3)
                .slopes(0, slopes[0], slopes[1])
                .slopes(1, slopes[2], slopes[3])
                .slopes(2, slopes[4], slopes[5])
                .cross(0, 2, slopes[0])
                .build(&m)
                .unwrap();
            prop_assert!(f.boundary_residual <= 1e-10);
        }
    }
}
