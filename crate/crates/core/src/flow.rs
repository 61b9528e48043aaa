//! The kernels K^m_{s,t}(x) evaluated on a grid path.
//!
//! For `t` before the first crossing `τ_s(x)` of the level `w[s] − |x|` the
//! kernel transports `x` deterministically to `x + sgn(x) W_{s,t}`. From the
//! crossing on it splits mass `u`, `1 − u` between `±W⁺_{s,t}`, where `u` is
//! the weight of the excursion straddling `t`. Weights live in an
//! [`ExcursionRegistry`] keyed by the argmin index that names the
//! excursion, so windows with the same minimum share the same `u`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::paths::BrownianPath;
use crate::rng::{stream, Domain};

/// sgn with sgn(0) = +1.
pub fn sgn(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Lazily sampled excursion weights for one path replica.
///
/// The weight for key `k` is drawn from stream `k` of the registry seed, so
/// the value attached to a key does not depend on the order of lookups.
#[derive(Clone, Debug)]
pub struct ExcursionRegistry<'m> {
    measure: &'m Measure,
    seed: u64,
    cache: HashMap<usize, f64>,
}

impl<'m> ExcursionRegistry<'m> {
    pub fn new(measure: &'m Measure, seed: u64) -> Self {
        Self { measure, seed, cache: HashMap::new() }
    }

    pub fn measure(&self) -> &'m Measure {
        self.measure
    }

    /// The weight of excursion `key`, sampled on first access.
    pub fn lookup(&mut self, key: usize) -> f64 {
        let (measure, seed) = (self.measure, self.seed);
        *self.cache.entry(key).or_insert_with(|| measure.sample(&mut stream(seed, Domain::Excursion, key as u64)))
    }

    /// Number of distinct excursions sampled so far.
    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

/// A probability measure on ℝ with finitely many atoms, sorted by position.
///
/// Zero-weight atoms are dropped and atoms at bit-equal positions merged
/// (−0 and +0 count as equal).
#[derive(Clone, Debug, PartialEq)]
pub struct KernelAtoms {
    atoms: Vec<Atom>,
}

impl KernelAtoms {
    pub fn dirac(position: f64) -> Self {
        Self { atoms: vec![Atom { position: position + 0.0, weight: 1.0 }] }
    }

    /// `u δ_r + (1 − u) δ_{−r}`.
    pub fn split(r: f64, u: f64) -> Self {
        Self::from_weighted([(r, u), (-r, 1.0 - u)])
    }

    pub fn from_weighted<I: IntoIterator<Item = (f64, f64)>>(items: I) -> Self {
        let mut atoms: Vec<Atom> = Vec::with_capacity(4);
        for (position, weight) in items {
            if weight == 0.0 {
                continue;
            }
            match atoms.iter_mut().find(|a| a.position == position) {
                Some(a) => a.weight += weight,
                None => atoms.push(Atom { position: position + 0.0, weight }),
            }
        }
        atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
        Self { atoms }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// ∫ f dK.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(a.position)).sum()
    }

    /// Largest position or weight difference, or `None` if the supports
    /// have different sizes.
    pub fn max_discrepancy(&self, other: &KernelAtoms) -> Option<f64> {
        if self.len() != other.len() {
            return None;
        }
        Some(
            self.atoms
                .iter()
                .zip(&other.atoms)
                .map(|(a, b)| (a.position - b.position).abs().max((a.weight - b.weight).abs()))
                .fold(0.0, f64::max),
        )
    }
}

fn check_window(path: &BrownianPath, s: usize, t: usize) -> Result<()> {
    path.check_index(t)?;
    if s > t {
        return Err(Error::InvalidArgument(format!("window start {s} after end {t}")));
    }
    Ok(())
}

/// Shared evaluation; `weight` maps an excursion key to its `u`.
///
/// The split branch is taken for `t ≥ τ_s(x)`. At `t = τ_s(x)` the grid
/// value `w[τ]` is a fresh minimum, so `W⁺ = 0` and the kernel sits at 0,
/// which is where the continuous-time transport ends. Using the transport
/// value there would carry the grid overshoot past 0 and break the flow
/// property.
fn kernel_with<F: FnMut(usize) -> f64>(path: &BrownianPath, s: usize, t: usize, x: f64, mut weight: F) -> KernelAtoms {
    if x != 0.0 {
        let crossed = matches!(path.hitting_time(s, x), Some(tau) if tau <= t);
        if !crossed {
            return KernelAtoms::dirac(x + sgn(x) * path.increment(s, t));
        }
    }
    let (min, key) = path.window_min(s, t);
    let r = path.values()[t] - min;
    KernelAtoms::split(r, weight(key))
}

/// K^m_{s,t}(x).
pub fn kernel_km(path: &BrownianPath, registry: &mut ExcursionRegistry<'_>, s: usize, t: usize, x: f64) -> Result<KernelAtoms> {
    check_window(path, s, t)?;
    Ok(kernel_with(path, s, t, x, |key| registry.lookup(key)))
}

/// The Wiener kernel: K^m with every weight equal to 1/2.
pub fn kernel_wiener(path: &BrownianPath, s: usize, t: usize, x: f64) -> Result<KernelAtoms> {
    check_window(path, s, t)?;
    Ok(kernel_with(path, s, t, x, |_| 0.5))
}

/// φ^c_{s,t}(x), the coalescing flow of maps.
pub fn coalescing_map(path: &BrownianPath, registry: &mut ExcursionRegistry<'_>, s: usize, t: usize, x: f64) -> Result<f64> {
    if !registry.measure().is_coalescing() {
        return Err(Error::NotCoalescing);
    }
    let k = kernel_km(path, registry, s, t, x)?;
    Ok(k.atoms()[0].position)
}

/// K_{s,mid} K_{mid,t} applied at `x`: every atom of `K_{s,mid}(x)` is
/// pushed through `K_{mid,t}` and atoms landing on equal positions merged.
pub fn flow_compose(
    path: &BrownianPath,
    registry: &mut ExcursionRegistry<'_>,
    s: usize,
    mid: usize,
    t: usize,
    x: f64,
) -> Result<KernelAtoms> {
    check_window(path, s, mid)?;
    check_window(path, mid, t)?;
    let first = kernel_km(path, registry, s, mid, x)?;
    let mut pushed = Vec::with_capacity(4);
    for a in first.atoms() {
        let second = kernel_km(path, registry, mid, t, a.position)?;
        pushed.extend(second.atoms().iter().map(|b| (b.position, a.weight * b.weight)));
    }
    Ok(KernelAtoms::from_weighted(pushed))
}

/// CSV rows `(s, t, x, atom_pos, atom_weight)` for one kernel value.
pub fn kernel_rows(path: &BrownianPath, s: usize, t: usize, x: f64, k: &KernelAtoms) -> Vec<(f64, f64, f64, f64, f64)> {
    let (ts, tt) = (path.grid().time(s), path.grid().time(t));
    k.atoms().iter().map(|a| (ts, tt, x, a.position, a.weight)).collect()
}
