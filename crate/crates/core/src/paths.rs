//! Brownian paths on a uniform grid and their running-minimum structure.
//!
//! Every object the flow construction needs is read off one path `w`:
//! increments `W_{s,t} = w[t] − w[s]`, window minima and their leftmost
//! argmin, the reflected path `W⁺_{s,t} = w[t] − min_{[s,t]} w`, and first
//! grid crossings of the level `w[s] − |x|`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt = {dt} must be positive")));
        }
        if steps == 0 {
            return Err(Error::InvalidGrid("need at least one step".into()));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidGrid("t0 must be finite".into()));
        }
        Ok(Self { t0, dt, steps })
    }

    /// Grid on `[0, horizon]` with step as close to `dt` as divides evenly.
    pub fn covering(horizon: f64, dt: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon = {horizon} must be positive")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt = {dt} must be positive")));
        }
        let steps = (horizon / dt).round().max(1.0) as usize;
        Self::new(0.0, horizon / steps as f64, steps)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.steps)
    }

    /// Nearest grid index to time `t`, clamped to the grid.
    pub fn index_of(&self, t: f64) -> usize {
        (((t - self.t0) / self.dt).round().max(0.0) as usize).min(self.steps)
    }
}

/// A driving path sampled at grid times, with `w[0] = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    grid: TimeGrid,
    w: Vec<f64>,
}

/// Samples a path with independent N(0, dt) increments.
pub fn generate_brownian<R: Rng + ?Sized>(grid: TimeGrid, rng: &mut R) -> BrownianPath {
    let sd = grid.dt().sqrt();
    let mut w = Vec::with_capacity(grid.len());
    w.push(0.0);
    let mut acc = 0.0;
    for _ in 0..grid.steps() {
        let z: f64 = rng.sample(StandardNormal);
        acc += sd * z;
        w.push(acc);
    }
    BrownianPath { grid, w }
}

impl BrownianPath {
    /// Wraps explicit values; `w[0]` must be 0 and the length must match the grid.
    pub fn from_values(grid: TimeGrid, w: Vec<f64>) -> Result<Self> {
        if w.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("{} values for {} grid points", w.len(), grid.len())));
        }
        if w[0] != 0.0 {
            return Err(Error::InvalidGrid("path must start at 0".into()));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample);
        }
        Ok(Self { grid, w })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index > self.steps() {
            Err(Error::IndexOutOfRange { index, steps: self.steps() })
        } else {
            Ok(())
        }
    }

    /// W_{s,t} = w[t] − w[s].
    pub fn increment(&self, s: usize, t: usize) -> f64 {
        self.w[t] - self.w[s]
    }

    /// Minimum and leftmost argmin of `w` over `[s, t]`.
    pub fn window_min(&self, s: usize, t: usize) -> (f64, usize) {
        debug_assert!(s <= t);
        let mut best = (self.w[s], s);
        for j in s + 1..=t {
            if self.w[j] < best.0 {
                best = (self.w[j], j);
            }
        }
        best
    }

    /// Running minimum from `s` to the end of the grid.
    pub fn running_min(&self, s: usize) -> MinStructure {
        let n = self.steps() + 1 - s;
        let mut min = Vec::with_capacity(n);
        let mut argmin = Vec::with_capacity(n);
        let mut best = (self.w[s], s);
        for j in s..=self.steps() {
            if self.w[j] < best.0 {
                best = (self.w[j], j);
            }
            min.push(best.0);
            argmin.push(best.1);
        }
        MinStructure { start: s, min, argmin }
    }

    /// W⁺_{s,t} for every t ≥ s (entry 0 is t = s).
    pub fn reflected(&self, s: usize) -> Vec<f64> {
        let ms = self.running_min(s);
        self.w[s..].iter().zip(&ms.min).map(|(w, m)| w - m).collect()
    }

    /// W⁺_{s,t} for one window.
    pub fn reflected_at(&self, s: usize, t: usize) -> f64 {
        self.w[t] - self.window_min(s, t).0
    }

    /// First grid index r ≥ s with W_{s,r} ≤ −|x|, if the grid reaches it.
    ///
    /// The crossing is detected at grid resolution, so the level can be
    /// overshot by O(√dt).
    pub fn hitting_time(&self, s: usize, x: f64) -> Option<usize> {
        let level = -x.abs();
        let ws = self.w[s];
        (s..=self.steps()).find(|&r| self.w[r] - ws <= level)
    }
}

/// Running minima of `w` over `[start, t]` for every `t ≥ start`.
#[derive(Clone, Debug, PartialEq)]
pub struct MinStructure {
    start: usize,
    min: Vec<f64>,
    argmin: Vec<usize>,
}

impl MinStructure {
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.start + self.min.len() - 1
    }

    pub fn min_at(&self, t: usize) -> f64 {
        self.min[t - self.start]
    }

    /// Leftmost argmin over `[start, t]`.
    pub fn argmin_at(&self, t: usize) -> usize {
        self.argmin[t - self.start]
    }

    /// The excursion straddling `t`, named by the index where it started.
    ///
    /// Two windows share an excursion exactly when they share this id, which
    /// is how coincidence of window minima is detected.
    pub fn excursion_id(&self, t: usize) -> usize {
        self.argmin_at(t)
    }

    pub fn minima(&self) -> &[f64] {
        &self.min
    }

    pub fn argmins(&self) -> &[usize] {
        &self.argmin
    }
}

/// CSV rows `(index, time, w)`.
pub fn path_rows(path: &BrownianPath) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
    path.values().iter().enumerate().map(|(j, &w)| (j, path.grid().time(j), w))
}
