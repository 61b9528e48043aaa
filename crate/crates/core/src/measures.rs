//! Probability measures on [0, 1] with mean 1/2.
//!
//! A measure `m` classifies a flow: given the driving noise, each excursion
//! of the reflected path carries an independent weight `u ~ m` that splits
//! mass between the positive and negative copies of the excursion.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::quadrature;

/// Tolerance on the mean-1/2 constraint at construction time.
pub const MEAN_TOLERANCE: f64 = 1e-12;
/// Absolute tolerance used when integrating against a density.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;

/// A validated finitely supported measure.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    weights: Vec<f64>,
    locations: Vec<f64>,
    cumulative: Vec<f64>,
}

impl AtomicMeasure {
    /// Builds from `(weight, location)` pairs.
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        for &(w, x) in atoms {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidMeasure(format!("weight {w} is not a probability")));
            }
            if !(x.is_finite() && (0.0..=1.0).contains(&x)) {
                return Err(Error::InvalidMeasure(format!("location {x} outside [0, 1]")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.0).sum();
        if (total - 1.0).abs() > MEAN_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        let mean: f64 = atoms.iter().map(|&(w, x)| w * x).sum();
        if (mean - 0.5).abs() > MEAN_TOLERANCE {
            return Err(Error::MeanNotHalf { mean });
        }
        let weights: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let locations: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Ok(Self { weights, locations, cumulative })
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.weights.iter().copied().zip(self.locations.iter().copied())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= v).min(self.locations.len() - 1);
        self.locations[i]
    }
}

/// Shape parameter of a symmetric Beta(a, a) law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaShape(f64);

impl BetaShape {
    pub fn new(a: f64) -> Result<Self> {
        if a.is_finite() && a > 0.0 {
            Ok(Self(a))
        } else {
            Err(Error::InvalidMeasure(format!("beta shape {a} must be positive")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// The classifying measure `m`.
#[derive(Clone, Debug, PartialEq)]
pub enum Measure {
    Atomic(AtomicMeasure),
    Uniform,
    BetaSymmetric(BetaShape),
    /// δ_{1/2}: the Wiener flow.
    DiracHalf,
    /// ½(δ_0 + δ_1): the coalescing flow of maps.
    FairBernoulli,
}

impl Measure {
    pub fn atomic(atoms: &[(f64, f64)]) -> Result<Self> {
        AtomicMeasure::new(atoms).map(Measure::Atomic)
    }

    pub fn beta_symmetric(a: f64) -> Result<Self> {
        BetaShape::new(a).map(Measure::BetaSymmetric)
    }

    /// Short human-readable name, also accepted by [`Measure::parse`].
    pub fn name(&self) -> String {
        match self {
            Measure::Atomic(a) => {
                let parts: Vec<String> = a.atoms().map(|(w, x)| format!("{w}@{x}")).collect();
                format!("atomic:{}", parts.join(","))
            }
            Measure::Uniform => "uniform".into(),
            Measure::BetaSymmetric(a) => format!("beta:{}", a.get()),
            Measure::DiracHalf => "dirac-half".into(),
            Measure::FairBernoulli => "fair-bernoulli".into(),
        }
    }

    /// Parses `uniform`, `dirac-half`, `fair-bernoulli`, `beta:<a>` or
    /// `atomic:<w>@<x>,<w>@<x>,...`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
        match kind.to_ascii_lowercase().replace('_', "-").as_str() {
            "uniform" => Ok(Measure::Uniform),
            "dirac-half" | "dirac" | "wiener" => Ok(Measure::DiracHalf),
            "fair-bernoulli" | "bernoulli" | "coalescing" => Ok(Measure::FairBernoulli),
            "beta" => {
                let a = rest.parse::<f64>().map_err(|_| Error::InvalidMeasure(format!("bad beta shape {rest:?}")))?;
                Measure::beta_symmetric(a)
            }
            "atomic" => {
                let atoms = rest
                    .split(',')
                    .map(|part| {
                        let (w, x) = part.split_once('@').ok_or_else(|| Error::InvalidMeasure(format!("bad atom {part:?}")))?;
                        let w = w.trim().parse::<f64>();
                        let x = x.trim().parse::<f64>();
                        match (w, x) {
                            (Ok(w), Ok(x)) => Ok((w, x)),
                            _ => Err(Error::InvalidMeasure(format!("bad atom {part:?}"))),
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Measure::atomic(&atoms)
            }
            other => Err(Error::InvalidMeasure(format!("unknown measure {other:?}"))),
        }
    }

    /// ∫ x dm(x).
    pub fn mean(&self) -> f64 {
        match self {
            Measure::Atomic(a) => a.atoms().map(|(w, x)| w * x).sum(),
            _ => 0.5,
        }
    }

    /// ∫ (2x − 1)^k dm(x).
    pub fn signed_moment(&self, k: u32) -> f64 {
        let even = k.is_multiple_of(2);
        match self {
            Measure::Atomic(a) => a.atoms().map(|(w, x)| w * (2.0 * x - 1.0).powi(k as i32)).sum(),
            Measure::DiracHalf => {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Measure::FairBernoulli => {
                if even {
                    1.0
                } else {
                    0.0
                }
            }
            // y = 2x − 1 has density ∝ (1 − y²)^{a−1} and y² ~ Beta(1/2, a).
            Measure::Uniform => {
                if even {
                    1.0 / (k as f64 + 1.0)
                } else {
                    0.0
                }
            }
            Measure::BetaSymmetric(a) => {
                if !even {
                    return 0.0;
                }
                let a = a.get();
                (0..k / 2).map(|r| (0.5 + r as f64) / (a + 0.5 + r as f64)).product()
            }
        }
    }

    /// P(product of k conditionally independent Bernoulli(u) signs is +1).
    pub fn alpha(&self, k: u32) -> f64 {
        0.5 * (1.0 + self.signed_moment(k))
    }

    /// M_ε = ∫ α^I (1 − α)^{i−I} dm(α) with I the number of `+1` entries.
    pub fn mixed_moment(&self, signs: &[i8]) -> f64 {
        let plus = signs.iter().filter(|&&s| s > 0).count() as u32;
        self.beta_moment(plus, signs.len() as u32 - plus)
    }

    /// ∫ α^p (1 − α)^q dm(α).
    pub fn beta_moment(&self, p: u32, q: u32) -> f64 {
        let pow = |x: f64, e: u32| if e == 0 { 1.0 } else { x.powi(e as i32) };
        match self {
            Measure::Atomic(a) => a.atoms().map(|(w, x)| w * pow(x, p) * pow(1.0 - x, q)).sum(),
            Measure::DiracHalf => 0.5f64.powi((p + q) as i32),
            Measure::FairBernoulli => {
                let at_one = if q == 0 { 1.0 } else { 0.0 };
                let at_zero = if p == 0 { 1.0 } else { 0.0 };
                0.5 * (at_one + at_zero)
            }
            Measure::Uniform => beta_ratio(1.0, p, q),
            Measure::BetaSymmetric(a) => beta_ratio(a.get(), p, q),
        }
    }

    /// Density on (0, 1) for the absolutely continuous variants.
    pub fn density(&self, x: f64) -> Option<f64> {
        if !(0.0..=1.0).contains(&x) {
            return match self {
                Measure::Uniform | Measure::BetaSymmetric(_) => Some(0.0),
                _ => None,
            };
        }
        match self {
            Measure::Uniform => Some(1.0),
            Measure::BetaSymmetric(a) => {
                let a = a.get();
                Some(((a - 1.0) * (x * (1.0 - x)).ln() - ln_beta(a, a)).exp())
            }
            _ => None,
        }
    }

    /// ∫ f dm. Exact for atomic variants; adaptive Gauss–Legendre otherwise.
    ///
    /// For Beta(a, a) each half of [0, 1] is mapped by x = y^{1/a} so the
    /// endpoint singularity of the density disappears.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        match self {
            Measure::Atomic(a) => a.atoms().map(|(w, x)| w * f(x)).sum(),
            Measure::DiracHalf => f(0.5),
            Measure::FairBernoulli => 0.5 * (f(0.0) + f(1.0)),
            Measure::Uniform => quadrature::integrate(&f, 0.0, 1.0, QUADRATURE_TOLERANCE),
            Measure::BetaSymmetric(a) => {
                let a = a.get();
                let norm = (-ln_beta(a, a)).exp() / a;
                let upper = 0.5f64.powf(a);
                let half = |g: &dyn Fn(f64) -> f64| {
                    quadrature::integrate(
                        |y: f64| {
                            let x = y.powf(1.0 / a);
                            g(x) * (1.0 - x).powf(a - 1.0)
                        },
                        0.0,
                        upper,
                        0.25 * QUADRATURE_TOLERANCE / norm,
                    )
                };
                norm * (half(&|x| f(x)) + half(&|x| f(1.0 - x)))
            }
        }
    }

    /// One draw u ~ m.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Measure::Atomic(a) => a.sample(rng),
            Measure::Uniform => rng.random::<f64>(),
            Measure::BetaSymmetric(a) => Beta::new(a.get(), a.get()).expect("validated shape").sample(rng),
            Measure::DiracHalf => 0.5,
            Measure::FairBernoulli => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// True when every draw is 0 or 1, i.e. the flow is a flow of maps.
    pub fn is_coalescing(&self) -> bool {
        match self {
            Measure::FairBernoulli => true,
            Measure::Atomic(a) => a.atoms().all(|(w, x)| w == 0.0 || x == 0.0 || x == 1.0),
            _ => false,
        }
    }
}

/// B(a + p, a + q) / B(a, a) as a finite product.
fn beta_ratio(a: f64, p: u32, q: u32) -> f64 {
    let num: f64 = (0..p).map(|r| a + r as f64).product::<f64>() * (0..q).map(|r| a + r as f64).product::<f64>();
    let den: f64 = (0..p + q).map(|r| 2.0 * a + r as f64).product();
    num / den
}

/// Sign patterns {−1, +1}^n in lexicographic order (−1 first).
pub fn sign_patterns(n: usize) -> impl Iterator<Item = Vec<i8>> {
    (0..1usize << n).map(move |bits| (0..n).map(|i| if bits >> (n - 1 - i) & 1 == 1 { 1 } else { -1 }).collect())
}
