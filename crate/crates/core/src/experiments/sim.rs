//! Monte Carlo orbits of a nonstationary composition.
//!
//! `S_n = Σ_{k<n} (v_k(x_k) − E v_k(x_k))` with `x_k = T_k ∘ ⋯ ∘ T_1(x_0)`
//! and `x_0 ~ μ`. The expectations are the same-sample means: a first pass
//! averages `v_k(x_k)` over all samples, and a second pass replays the same
//! streams to accumulate the centered sums.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{GridDensity, Sampler};
use crate::error::{Error, Result};
use crate::map::{LsvMap, ParameterSequence};
use crate::rng::{par_blocks, StreamRng};

/// Base functions `v: [0, 1] → ℝ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFunction {
    Zero,
    Identity,
    #[serde(rename = "cos2pi")]
    Cos2Pi,
    /// `|x − 1/2|`
    DistHalf,
}

impl BaseFunction {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            BaseFunction::Zero => 0.0,
            BaseFunction::Identity => x,
            BaseFunction::Cos2Pi => (2.0 * std::f64::consts::PI * x).cos(),
            BaseFunction::DistHalf => (x - 0.5).abs(),
        }
    }

    pub fn lipschitz(self) -> f64 {
        match self {
            BaseFunction::Zero => 0.0,
            BaseFunction::Identity | BaseFunction::DistHalf => 1.0,
            BaseFunction::Cos2Pi => 2.0 * std::f64::consts::PI,
        }
    }

    pub fn sup_abs(self) -> f64 {
        match self {
            BaseFunction::Zero => 0.0,
            BaseFunction::Identity | BaseFunction::Cos2Pi => 1.0,
            BaseFunction::DistHalf => 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// `|S_n|`
    Birkhoff,
    /// `S_n* = max_{k≤n} |S_k|`
    RunningMax,
    /// `|S_n|` with `v_k = w_k v`.
    WeightedBirkhoff,
}

/// `v_k = w_k v` with `w_k = 1` unless the kind is weighted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub kind: ObservableKind,
    pub base: BaseFunction,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<f64>,
}

impl ObservableSpec {
    pub fn new(kind: ObservableKind, base: BaseFunction) -> Self {
        Self {
            kind,
            base,
            weights: Vec::new(),
        }
    }

    pub fn weighted(base: BaseFunction, weights: Vec<f64>) -> Self {
        Self {
            kind: ObservableKind::WeightedBirkhoff,
            base,
            weights,
        }
    }

    pub fn validate(&self, n_max: usize) -> Result<()> {
        if self.kind == ObservableKind::WeightedBirkhoff {
            if self.weights.len() < n_max {
                return Err(Error::param(format!(
                    "{} weights for {n_max} steps",
                    self.weights.len()
                )));
            }
            if self.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::param("weights must be finite"));
            }
        }
        Ok(())
    }

    /// `sup_k Lip(v_k)`.
    pub fn lipschitz(&self) -> f64 {
        let w = match self.kind {
            ObservableKind::WeightedBirkhoff => self.weights.iter().fold(0.0f64, |m, w| m.max(w.abs())),
            _ => 1.0,
        };
        w * self.base.lipschitz()
    }

    #[inline]
    fn weight(&self, k: usize) -> f64 {
        match self.kind {
            ObservableKind::WeightedBirkhoff => self.weights[k],
            _ => 1.0,
        }
    }

    /// The statistic reported for a path: `|S_n|` or `S_n*`.
    pub fn statistic<'p>(&self, paths: &'p Paths) -> &'p [Vec<f64>] {
        match self.kind {
            ObservableKind::RunningMax => &paths.running_max,
            _ => &paths.abs_sum,
        }
    }
}

/// Centered sums observed at selected times, `[time index][sample]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Paths {
    pub n: Vec<usize>,
    pub sum: Vec<Vec<f64>>,
    pub abs_sum: Vec<Vec<f64>>,
    pub running_max: Vec<Vec<f64>>,
    pub samples: usize,
}

pub(crate) struct OrbitSimulator<'a> {
    maps: Vec<LsvMap>,
    sampler: Sampler,
    obs: &'a ObservableSpec,
    n_max: usize,
}

impl<'a> OrbitSimulator<'a> {
    /// Orbits long enough to observe `S_n` for `n ≤ n_max`.
    pub(crate) fn new(seq: &ParameterSequence, mu: &GridDensity, obs: &'a ObservableSpec, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::param("need at least one step"));
        }
        let steps = n_max - 1;
        if seq.len() < steps {
            return Err(Error::Index {
                index: steps,
                len: seq.len(),
            });
        }
        obs.validate(n_max)?;
        Ok(Self {
            maps: seq.maps()[..steps].to_vec(),
            sampler: Sampler::new(mu)?,
            obs,
            n_max,
        })
    }

    /// Calls `visit(k, v_k(x_k))` for `k = 0, …, n_max − 1` along one orbit.
    #[inline]
    fn orbit(&self, rng: &mut StreamRng, mut visit: impl FnMut(usize, f64)) {
        let mut x = self.sampler.sample(rng.gen::<f64>());
        let base = self.obs.base;
        visit(0, self.obs.weight(0) * base.eval(x));
        for (k, m) in self.maps.iter().enumerate() {
            x = m.step(x);
            visit(k + 1, self.obs.weight(k + 1) * base.eval(x));
        }
    }

    /// Same-sample means of `v_k(x_k)`.
    pub(crate) fn means(&self, samples: usize, seed: u64) -> Vec<f64> {
        let blocks = par_blocks(seed, samples, |rng, count| {
            let mut acc = vec![0.0; self.n_max];
            for _ in 0..count {
                self.orbit(rng, |k, v| acc[k] += v);
            }
            acc
        });
        let mut total = vec![0.0; self.n_max];
        for b in &blocks {
            for (t, v) in total.iter_mut().zip(b) {
                *t += v;
            }
        }
        total.iter().map(|t| t / samples as f64).collect()
    }

    /// Centered sums at each `n` in `n_grid` (strictly increasing, `≤ n_max`).
    pub(crate) fn paths(&self, n_grid: &[usize], samples: usize, seed: u64) -> Result<Paths> {
        if samples == 0 {
            return Err(Error::param("need at least one sample"));
        }
        check_grid(n_grid, self.n_max)?;
        let means = self.means(samples, seed);
        let blocks = par_blocks(seed, samples, |rng, count| {
            let mut out = vec![(0.0f64, 0.0f64); count * n_grid.len()];
            for i in 0..count {
                let (mut s, mut best, mut next) = (0.0f64, 0.0f64, 0usize);
                let row = &mut out[i * n_grid.len()..(i + 1) * n_grid.len()];
                self.orbit(rng, |k, v| {
                    s += v - means[k];
                    best = best.max(s.abs());
                    // S_n includes v_0 … v_{n−1}.
                    while next < n_grid.len() && n_grid[next] == k + 1 {
                        row[next] = (s, best);
                        next += 1;
                    }
                });
            }
            out
        });
        let w = n_grid.len();
        let mut sum = vec![Vec::with_capacity(samples); w];
        let mut running_max = vec![Vec::with_capacity(samples); w];
        for b in &blocks {
            for row in b.chunks(w) {
                for (j, &(s, m)) in row.iter().enumerate() {
                    sum[j].push(s);
                    running_max[j].push(m);
                }
            }
        }
        let abs_sum = sum.iter().map(|col| col.iter().map(|s| s.abs()).collect()).collect();
        Ok(Paths {
            n: n_grid.to_vec(),
            sum,
            abs_sum,
            running_max,
            samples,
        })
    }
}

pub(crate) fn check_grid(n_grid: &[usize], n_max: usize) -> Result<()> {
    if n_grid.is_empty() {
        return Err(Error::param("empty n grid"));
    }
    if n_grid[0] == 0 || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("n grid must be positive and strictly increasing"));
    }
    if *n_grid.last().unwrap() > n_max {
        return Err(Error::param("n grid exceeds the simulated horizon"));
    }
    Ok(())
}

/// Simulates orbits and returns the centered sums at the times in `n_grid`.
pub fn simulate_paths(
    seq: &ParameterSequence,
    mu: &GridDensity,
    obs: &ObservableSpec,
    n_grid: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Paths> {
    let n_max = *n_grid.last().ok_or_else(|| Error::param("empty n grid"))?;
    OrbitSimulator::new(seq, mu, obs, n_max)?.paths(n_grid, samples, seed)
}
