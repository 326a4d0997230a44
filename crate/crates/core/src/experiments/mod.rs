//! Empirical rate experiments: memory loss of the transfer operators,
//! moment growth, tails and deviations of centered sums, and the periodic
//! Markov chain on which concentration fails.

pub mod fit;
pub mod sim;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{Evolver, GridDensity};
use crate::error::{Error, Result};
use crate::map::ParameterSequence;
use crate::rng::par_blocks;

pub use fit::{linear_fit, slope_fit, Fit};
pub use sim::{simulate_paths, BaseFunction, ObservableKind, ObservableSpec, Paths};

/// One named curve `(x, y)` with an optional power-law fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<Fit>,
    /// Slope the fit is compared against, when there is one.
    pub reference_slope: Option<f64>,
}

impl Series {
    fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            fit: None,
            reference_slope: None,
        }
    }

    /// Log-log fit over `x ∈ [lo, hi]`.
    fn fit_window(&mut self, (lo, hi): (f64, f64)) -> Result<()> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self.points.iter().filter(|(x, _)| *x >= lo && *x <= hi).copied().unzip();
        self.fit = Some(slope_fit(&xs, &ys)?);
        Ok(())
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Name of the abscissa, `n` or `t`.
    pub x_label: String,
    pub series: Vec<Series>,
    pub window: Option<(f64, f64)>,
    /// Set by the caller that knows the configuration.
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl ExperimentReport {
    fn new(experiment: &str, x_label: &str, series: Vec<Series>, window: Option<(f64, f64)>, seed: Option<u64>) -> Self {
        Self {
            experiment: experiment.into(),
            x_label: x_label.into(),
            series,
            window,
            config_hash: String::new(),
            seed,
        }
    }

    pub fn series(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }

    /// Fit of the first series.
    pub fn fit(&self) -> Option<&Fit> {
        self.series.first().and_then(|s| s.fit.as_ref())
    }
}

fn check_window(window: (f64, f64), xs: &[f64]) -> Result<()> {
    let (lo, hi) = window;
    let (first, last) = (xs[0], xs[xs.len() - 1]);
    if !(lo <= hi && lo >= first && hi <= last) {
        return Err(Error::param(format!("fit window [{lo}, {hi}] outside [{first}, {last}]")));
    }
    Ok(())
}

/// `∫|P_n f − P_n g|` at each `n` in `n_grid`, with a log-log fit over
/// `fit_window`. The fit is absent when every distance vanishes.
pub fn memory_loss_experiment(
    seq: &ParameterSequence,
    f: &GridDensity,
    g: &GridDensity,
    n_grid: &[usize],
    fit_window: (f64, f64),
) -> Result<ExperimentReport> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    let n_max = *n_grid.last().ok_or_else(|| Error::param("empty n grid"))?;
    sim::check_grid(n_grid, n_max)?;
    let xs: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    check_window(fit_window, &xs)?;
    let mut ev = Evolver::new(f.grid().clone());
    let plans = ev.plans_for(seq, n_max)?;
    let (mut a, mut b) = (f.masses(), g.masses());
    let mut scratch = vec![0.0; a.len()];
    let mut points = Vec::with_capacity(n_grid.len());
    let mut next = 0;
    for (k, plan) in plans.iter().enumerate() {
        plan.apply_masses(&a, &mut scratch);
        std::mem::swap(&mut a, &mut scratch);
        plan.apply_masses(&b, &mut scratch);
        std::mem::swap(&mut b, &mut scratch);
        if n_grid[next] == k + 1 {
            let tv: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
            points.push(((k + 1) as f64, tv));
            next += 1;
        }
    }
    let mut series = Series::new("tv", points);
    if series.points.iter().any(|p| p.1 > 0.0) {
        series.fit_window(fit_window)?;
    }
    Ok(ExperimentReport::new("memory_loss", "n", vec![series], Some(fit_window), None))
}

/// `E(S_n*)^p` (or `E|S_n|^p`, by observable kind) for each `p`, with
/// log-log growth fits over `fit_window`.
#[allow(clippy::too_many_arguments)]
pub fn moments_experiment(
    seq: &ParameterSequence,
    mu: &GridDensity,
    obs: &ObservableSpec,
    p_list: &[f64],
    n_grid: &[usize],
    samples: usize,
    seed: u64,
    fit_window: (f64, f64),
) -> Result<ExperimentReport> {
    require_cone(mu, seq.gamma_star())?;
    if p_list.is_empty() || p_list.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::param("moment orders must be positive"));
    }
    let paths = simulate_paths(seq, mu, obs, n_grid, samples, seed)?;
    let xs: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    check_window(fit_window, &xs)?;
    let stat = obs.statistic(&paths);
    let name = match obs.kind {
        ObservableKind::RunningMax => "S*",
        _ => "|S|",
    };
    let mut series = Vec::with_capacity(p_list.len() + 1);
    for &p in p_list {
        let points = xs
            .iter()
            .zip(stat)
            .map(|(&n, col)| (n, col.iter().map(|s| s.powf(p)).sum::<f64>() / samples as f64))
            .collect();
        let mut s = Series::new(format!("E{name}^{p}"), points);
        if s.points.iter().any(|q| q.1 > 0.0) {
            s.fit_window(fit_window)?;
        }
        s.reference_slope = moment_reference_slope(seq.gamma_star(), p);
        series.push(s);
    }
    series.push(centering_series(&paths, &xs));
    Ok(ExperimentReport::new("moments", "n", series, Some(fit_window), Some(seed)))
}

/// Growth exponent allowed for `E(S_n*)^p`: `p − 1` for `p > 2` at
/// `γ* = 1/2`, otherwise `p/2` for `p ≤ 2(1/γ* − 1)`. `None` beyond that.
pub fn moment_reference_slope(gamma_star: f64, p: f64) -> Option<f64> {
    if gamma_star == 0.5 && p > 2.0 {
        Some(p - 1.0)
    } else if p <= 2.0 || p <= 2.0 * (1.0 / gamma_star - 1.0) + 1e-12 {
        Some(p / 2.0)
    } else {
        None
    }
}

/// `|mean S_n| / standard error` per `n`; below 4 when centering works.
fn centering_series(paths: &Paths, xs: &[f64]) -> Series {
    let points = xs
        .iter()
        .zip(&paths.sum)
        .map(|(&n, col)| {
            let m = col.len() as f64;
            let mean = col.iter().sum::<f64>() / m;
            let var = col.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
            let se = (var / m).sqrt();
            (n, if se > 0.0 { mean.abs() / se } else { 0.0 })
        })
        .collect();
    Series::new("centering_z", points)
}

fn require_cone(mu: &GridDensity, gamma_star: f64) -> Result<()> {
    use crate::density::{cone_check, default_cone_parameter};
    let d = cone_check(mu, gamma_star, default_cone_parameter(gamma_star))?;
    if !d.all_hold() {
        return Err(Error::param(format!(
            "initial density is outside the cone (worst violation {:.3e})",
            d.max_violation()
        )));
    }
    Ok(())
}

/// Points of a tail grid used for the fit: the decade centred (in log scale)
/// on the geometric midpoint of the grid.
pub fn central_decade(t_grid: &[f64]) -> (f64, f64) {
    let mid = (t_grid[0] * t_grid[t_grid.len() - 1]).sqrt();
    let half = 10f64.sqrt();
    (mid / half, mid * half)
}

/// Log-spaced grid over the range of the positive samples.
pub fn default_t_grid(samples: &[f64], points: usize) -> Result<Vec<f64>> {
    let (lo, hi) = samples
        .iter()
        .filter(|s| **s > 0.0)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if !(hi > lo) || points < 2 {
        return Err(Error::DegenerateFit { usable: 0 });
    }
    Ok((0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect())
}

/// `P(S_n* ≥ t)` (or `P(|S_n| ≥ t)`) over `t_grid`, fitted in log-log scale
/// over `window`, by default the central decade of the grid. Without a grid
/// the range of the simulated values is covered with 41 log-spaced points.
#[allow(clippy::too_many_arguments)]
pub fn tail_experiment(
    seq: &ParameterSequence,
    mu: &GridDensity,
    obs: &ObservableSpec,
    n: usize,
    t_grid: Option<&[f64]>,
    samples: usize,
    seed: u64,
    window: Option<(f64, f64)>,
) -> Result<ExperimentReport> {
    let gs = seq.gamma_star();
    if !(gs > 0.5 && gs < 1.0) {
        return Err(Error::param(format!("tail experiment needs gamma_star in (1/2, 1), got {gs}")));
    }
    require_cone(mu, gs)?;
    let paths = simulate_paths(seq, mu, obs, &[n], samples, seed)?;
    let mut values = obs.statistic(&paths)[0].clone();
    values.sort_by(f64::total_cmp);
    let t_grid = match t_grid {
        Some(t) => {
            if t.len() < 2 || t[0] <= 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::param("t grid must be positive and strictly increasing"));
            }
            t.to_vec()
        }
        None => default_t_grid(&values, 41)?,
    };
    let window = window.unwrap_or_else(|| central_decade(&t_grid));
    let m = values.len() as f64;
    let points = t_grid
        .iter()
        .map(|&t| (t, (values.len() - values.partition_point(|&v| v < t)) as f64 / m))
        .collect();
    let mut s = Series::new("tail", points);
    s.fit_window(window)?;
    s.reference_slope = Some(-1.0 / gs);
    Ok(ExperimentReport::new("tails", "t", vec![s], Some(window), Some(seed)))
}

/// Decay exponents of the large deviation bound `μ{|S_n/n| ≥ ε}` and the
/// moderate deviation bound `μ{|S_n/n^τ| ≥ ε}`, logarithms dropped.
pub fn deviation_reference_slopes(gamma_star: f64, tau: f64) -> (f64, f64) {
    let q = 1.0 / gamma_star - 1.0;
    if gamma_star < 0.5 {
        (-q, -(2.0 * tau - 1.0) * q)
    } else if gamma_star == 0.5 {
        (-1.0, -(2.0 * tau - 1.0))
    } else {
        (-q, -(tau / gamma_star - 1.0))
    }
}

/// Empirical `μ{|S_n/n| ≥ ε}` and `μ{|S_n/n^τ| ≥ ε}` with log-log fits
/// over `fit_window` and the reference exponents.
#[allow(clippy::too_many_arguments)]
pub fn deviation_check(
    seq: &ParameterSequence,
    mu: &GridDensity,
    obs: &ObservableSpec,
    n_grid: &[usize],
    samples: usize,
    seed: u64,
    epsilon: f64,
    tau_exponent: f64,
    fit_window: (f64, f64),
) -> Result<ExperimentReport> {
    if !(epsilon > 0.0) || !(tau_exponent > 0.0) {
        return Err(Error::param("epsilon and tau must be positive"));
    }
    require_cone(mu, seq.gamma_star())?;
    let paths = simulate_paths(seq, mu, obs, n_grid, samples, seed)?;
    let xs: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    check_window(fit_window, &xs)?;
    let (ld_ref, md_ref) = deviation_reference_slopes(seq.gamma_star(), tau_exponent);
    let prob = |scale: &dyn Fn(f64) -> f64| -> Vec<(f64, f64)> {
        xs.iter()
            .zip(&paths.abs_sum)
            .map(|(&n, col)| {
                let hits = col.iter().filter(|&&s| s / scale(n) >= epsilon).count();
                (n, hits as f64 / samples as f64)
            })
            .collect()
    };
    let mut series = Vec::with_capacity(2);
    for (label, points, reference) in [
        ("large", prob(&|n| n), ld_ref),
        ("moderate", prob(&|n| n.powf(tau_exponent)), md_ref),
    ] {
        let mut s = Series::new(label, points);
        let usable = s
            .points
            .iter()
            .filter(|(x, y)| *y > 0.0 && *x >= fit_window.0 && *x <= fit_window.1)
            .count();
        if usable >= 3 {
            s.fit_window(fit_window)?;
        }
        s.reference_slope = Some(reference);
        series.push(s);
    }
    Ok(ExperimentReport::new("deviations", "n", series, Some(fit_window), Some(seed)))
}

/// States of the three-state periodic chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkovState {
    A,
    B,
    C,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkovObservable {
    /// `v_n(A) = (−1)^{n+1}`, `v_n(B) = v_n(C) = (−1)^n`.
    Alternating,
    /// `v_n ≡ 1`.
    Constant,
}

/// Sums along simulated chain paths.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovTrace {
    pub steps: usize,
    pub starts: Vec<MarkovState>,
    /// `sums[i * steps + (n − 1)]` is `S_n` on path `i`.
    pub sums: Vec<i64>,
}

impl MarkovTrace {
    pub fn path(&self, i: usize) -> &[i64] {
        &self.sums[i * self.steps..(i + 1) * self.steps]
    }

    /// Paths where `S_n` differs from `−n` (start `A`) or `n` (start `B`,
    /// `C`) for some `n`; under the constant observable every path must
    /// have `S_n = n`.
    pub fn violations(&self, observable: MarkovObservable) -> usize {
        (0..self.starts.len())
            .filter(|&i| {
                let sign = match (observable, self.starts[i]) {
                    (MarkovObservable::Alternating, MarkovState::A) => -1,
                    _ => 1,
                };
                self.path(i).iter().enumerate().any(|(k, &s)| s != sign * (k as i64 + 1))
            })
            .count()
    }
}

/// Runs `paths` independent chains for `steps` steps, the initial state
/// drawn from `initial` (weights of `A`, `B`, `C`).
pub fn markov_counterexample(
    steps: usize,
    initial: [f64; 3],
    observable: MarkovObservable,
    paths: usize,
    seed: u64,
) -> Result<MarkovTrace> {
    if steps == 0 {
        return Err(Error::param("need at least one step"));
    }
    let total: f64 = initial.iter().sum();
    if initial.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
        return Err(Error::param("initial weights must be nonnegative with positive sum"));
    }
    let v = |n: usize, g: MarkovState| -> i64 {
        match observable {
            MarkovObservable::Constant => 1,
            MarkovObservable::Alternating => {
                let even = n.is_multiple_of(2);
                match (g, even) {
                    (MarkovState::A, true) | (MarkovState::B | MarkovState::C, false) => -1,
                    _ => 1,
                }
            }
        }
    };
    let blocks = par_blocks(seed, paths, |rng, count| {
        let mut starts = Vec::with_capacity(count);
        let mut sums = Vec::with_capacity(count * steps);
        for _ in 0..count {
            let u = rng.gen::<f64>() * total;
            let mut g = if u < initial[0] {
                MarkovState::A
            } else if u < initial[0] + initial[1] {
                MarkovState::B
            } else {
                MarkovState::C
            };
            starts.push(g);
            let mut s = 0i64;
            for n in 0..steps {
                s += v(n, g);
                sums.push(s);
                g = match g {
                    MarkovState::A => {
                        if rng.gen::<bool>() {
                            MarkovState::B
                        } else {
                            MarkovState::C
                        }
                    }
                    MarkovState::B | MarkovState::C => MarkovState::A,
                };
            }
        }
        (starts, sums)
    });
    let mut trace = MarkovTrace {
        steps,
        starts: Vec::with_capacity(paths),
        sums: Vec::with_capacity(paths * steps),
    };
    for (s, v) in blocks {
        trace.starts.extend(s);
        trace.sums.extend(v);
    }
    Ok(trace)
}
