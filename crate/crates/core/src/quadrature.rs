//! Gauss–Legendre and Gauss–Hermite rules.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of an n-point rule.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// n-point Gauss–Legendre rule on [-1, 1] (Newton iteration on P_n).
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp;
        loop {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

/// n-point Gauss–Hermite rule for the weight exp(-x²).
pub fn gauss_hermite(n: usize) -> Rule {
    assert!(n >= 1);
    let pim4 = PI.powf(-0.25);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    Rule { nodes, weights }
}

fn gl20() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

fn gh64() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(64))
}

/// Fixed-order Gauss–Legendre on [a, b].
pub fn legendre_on<F: Fn(f64) -> f64>(rule: &Rule, f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Adaptive bisection with a 20-point Gauss–Legendre rule per panel.
///
/// A panel is accepted when the whole-panel value and the sum over its two
/// halves agree to `tol`; the tolerance is split between children.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let rule = gl20();
    let whole = legendre_on(rule, &f, a, b);
    adapt(rule, &f, a, b, whole, tol, 0)
}

fn adapt<F: Fn(f64) -> f64>(rule: &Rule, f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let left = legendre_on(rule, f, a, mid);
    let right = legendre_on(rule, f, mid, b);
    let refined = left + right;
    if (refined - whole).abs() <= tol || depth >= 48 {
        return refined;
    }
    adapt(rule, f, a, mid, left, 0.5 * tol, depth + 1) + adapt(rule, f, mid, b, right, 0.5 * tol, depth + 1)
}

/// E[f(Z)] for Z ~ N(0, 1) by 64-point Gauss–Hermite.
pub fn expect_standard_normal<F: Fn(f64) -> f64>(f: F) -> f64 {
    let rule = gh64();
    let s2 = std::f64::consts::SQRT_2;
    rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * f(s2 * x)).sum::<f64>() / PI.sqrt()
}

/// Heat semigroup p_s f(x) = E[f(x + √s Z)].
pub fn heat<F: Fn(f64) -> f64>(f: F, s: f64, x: f64) -> f64 {
    if s <= 0.0 {
        return f(x);
    }
    let sd = s.sqrt();
    expect_standard_normal(|z| f(x + sd * z))
}
