//! Densities on `[0, 1]` discretized on a grid that resolves the `x^{-γ}`
//! singularity at the neutral fixed point, and the transfer operator acting
//! on them.

mod grid;
mod tail;
mod transfer;

use std::io::{BufRead, Write};
use std::sync::Arc;

pub use grid::{
    Grid, DEFAULT_CELLS, DEFAULT_GEOMETRIC_CELLS, GEOMETRIC_FLOOR, GEOMETRIC_SPLIT,
};
pub use tail::{tail_sum, Extrapolation, TailFunction};
pub use transfer::{evolve, invariant_density, transfer_step, Evolver, TransferPlan};

use crate::error::{Error, Result};

/// Relative slack absorbing floating-point roundoff in [`cone_check`].
pub const CONE_ROUNDOFF: f64 = 1e-9;

/// Piecewise-constant density: `values[i]` is the average of the density
/// over cell `i`.
#[derive(Clone, Debug)]
pub struct GridDensity {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PartialEq for GridDensity {
    fn eq(&self, other: &Self) -> bool {
        self.same_grid(other) && self.values == other.values
    }
}

impl GridDensity {
    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::param(format!(
                "{} values for {} cells",
                values.len(),
                grid.cells()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("density values must be finite"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_masses(grid: Arc<Grid>, masses: &[f64]) -> Result<Self> {
        if masses.len() != grid.cells() {
            return Err(Error::param(format!(
                "{} masses for {} cells",
                masses.len(),
                grid.cells()
            )));
        }
        let values = masses
            .iter()
            .enumerate()
            .map(|(i, m)| m / grid.width(i))
            .collect();
        Self::from_values(grid, values)
    }

    /// Exact cell averages of the density whose distribution function is `cdf`.
    pub fn from_cdf(grid: Arc<Grid>, cdf: impl Fn(f64) -> f64) -> Result<Self> {
        let masses: Vec<f64> = grid.edges().windows(2).map(|w| cdf(w[1]) - cdf(w[0])).collect();
        Self::from_masses(grid, &masses)
    }

    /// Cell averages of `f` by five-point Gauss–Legendre quadrature per cell.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.cells())
            .map(|i| {
                let (a, b) = (grid.edges()[i], grid.edges()[i + 1]);
                gauss5(a, b, &f) / (b - a)
            })
            .collect();
        Self::from_values(grid, values)
    }

    pub fn uniform(grid: Arc<Grid>) -> Self {
        let n = grid.cells();
        Self {
            grid,
            values: vec![1.0; n],
        }
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        let n = grid.cells();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn masses(&self) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.grid.width(i))
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.grid.width(i))
            .sum()
    }

    /// Rescaled to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        let m = self.total_mass();
        if !(m > 0.0) {
            return Err(Error::param("cannot normalize a density without mass"));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v / m).collect(),
        })
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid
    }

    /// Mass of `[0, x]`, with the density constant inside each cell.
    pub fn mass_below(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let x = x.min(1.0);
        let i = self.grid.locate(x);
        let below: f64 = (0..i).map(|j| self.values[j] * self.grid.width(j)).sum();
        below + self.values[i] * (x - self.grid.edges()[i])
    }

    /// Mass of `(a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            0.0
        } else {
            self.mass_below(b) - self.mass_below(a)
        }
    }

    /// `∫ g f dx`, three-point Gauss per cell.
    pub fn expectation(&self, g: impl Fn(f64) -> f64) -> f64 {
        (0..self.grid.cells())
            .map(|i| {
                let (a, b) = (self.grid.edges()[i], self.grid.edges()[i + 1]);
                self.values[i] * gauss3(a, b, &g)
            })
            .sum()
    }

    /// CSV with header `edge,value`: one row per cell (left edge, value) and a
    /// closing row holding the right edge `1` with an empty value.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "edge,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", crate::io::real(self.grid.edges()[i]), crate::io::real(*v))?;
        }
        writeln!(w, "{},", crate::io::real(1.0))
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut edges = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<density csv>", e))?;
            if lineno == 0 {
                if line.trim() != "edge,value" {
                    return Err(Error::param("density csv must start with `edge,value`"));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (e, v) = line
                .split_once(',')
                .ok_or_else(|| Error::param(format!("line {}: expected two columns", lineno + 1)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|err| Error::param(format!("line {}: {err}", lineno + 1)))
            };
            edges.push(parse(e)?);
            if !v.trim().is_empty() {
                values.push(parse(v)?);
            }
        }
        let grid = Grid::from_edges(edges)?.shared();
        Self::from_values(grid, values)
    }
}

fn gauss3(a: f64, b: f64, g: &impl Fn(f64) -> f64) -> f64 {
    const X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    X.iter().zip(W).map(|(x, w)| w * g(c + h * x)).sum::<f64>() * h
}

fn gauss5(a: f64, b: f64, g: &impl Fn(f64) -> f64) -> f64 {
    const X: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    X.iter().zip(W).map(|(x, w)| w * g(c + h * x)).sum::<f64>() * h
}

/// `∫ |f − g| dx`.
pub fn tv_distance(f: &GridDensity, g: &GridDensity) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    Ok(f.values
        .iter()
        .zip(&g.values)
        .enumerate()
        .map(|(i, (a, b))| (a - b).abs() * f.grid.width(i))
        .sum())
}

/// One condition of the cone with its worst relative violation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeCondition {
    pub holds: bool,
    pub worst: f64,
}

impl ConeCondition {
    fn from_worst(worst: f64) -> Self {
        Self {
            holds: worst <= CONE_ROUNDOFF,
            worst,
        }
    }
}

/// Membership diagnostics for the cone of decreasing densities with
/// `x^{γ*+1} f(x)` increasing and `f(x) ≤ a x^{-γ*} ∫ f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeDiagnostics {
    /// Worst value is `max(−f)` relative to `max |f|`.
    pub nonnegative: ConeCondition,
    /// Worst value is the largest relative increase between adjacent cells.
    pub nonincreasing: ConeCondition,
    /// Worst value is the largest relative decrease of `x^{γ*+1} f(x)` at
    /// adjacent midpoints.
    pub weighted_increasing: ConeCondition,
    /// Worst value is the largest relative excess over `a x^{-γ*} ∫ f`.
    pub bounded: ConeCondition,
}

impl ConeDiagnostics {
    pub fn all_hold(&self) -> bool {
        self.conditions().iter().all(|c| c.holds)
    }

    /// All worst violations at most `tol`.
    pub fn within(&self, tol: f64) -> bool {
        self.conditions().iter().all(|c| c.worst <= tol)
    }

    pub fn max_violation(&self) -> f64 {
        self.conditions()
            .iter()
            .map(|c| c.worst)
            .fold(0.0, f64::max)
    }

    fn conditions(&self) -> [ConeCondition; 4] {
        [
            self.nonnegative,
            self.nonincreasing,
            self.weighted_increasing,
            self.bounded,
        ]
    }
}

/// Smallest admissible cone parameter is `2^{γ*}(γ*+2)`; this adds one.
pub fn default_cone_parameter(gamma_star: f64) -> f64 {
    2f64.powf(gamma_star) * (gamma_star + 2.0) + 1.0
}

pub fn cone_check(f: &GridDensity, gamma_star: f64, a: f64) -> Result<ConeDiagnostics> {
    if !(gamma_star > 0.0 && gamma_star < 1.0) {
        return Err(Error::param(format!("gamma_star {gamma_star} outside (0, 1)")));
    }
    let a_min = 2f64.powf(gamma_star) * (gamma_star + 2.0);
    if !(a > a_min) {
        return Err(Error::param(format!(
            "cone parameter a = {a} must exceed 2^γ*(γ*+2) = {a_min}"
        )));
    }
    let v = &f.values;
    let grid = &f.grid;
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mass = f.total_mass();

    let nonneg = if scale > 0.0 {
        v.iter().fold(0.0f64, |m, &x| m.max(-x)) / scale
    } else {
        0.0
    };

    let rel = |num: f64, den: f64| {
        if num <= 0.0 {
            0.0
        } else if den > 0.0 {
            num / den
        } else {
            f64::INFINITY
        }
    };

    let mut dec = 0.0f64;
    let mut weighted = 0.0f64;
    let mut bound = 0.0f64;
    let mut prev_weighted = None;
    for i in 0..v.len() {
        if i + 1 < v.len() {
            dec = dec.max(rel(v[i + 1] - v[i], v[i].abs()));
        }
        let m = grid.midpoint(i);
        // A cell average on [0, e_1] says nothing about f at its midpoint;
        // x^{γ*+1} f → 0 there for anything below a x^{-γ*}.
        let w = if i == 0 { 0.0 } else { m.powf(gamma_star + 1.0) * v[i] };
        if let Some(p) = prev_weighted {
            weighted = weighted.max(rel(p - w, f64::abs(p)));
        }
        prev_weighted = Some(w);
        let cap = a * m.powf(-gamma_star) * mass;
        bound = bound.max(rel(v[i] - cap, cap.abs()));
    }

    Ok(ConeDiagnostics {
        nonnegative: ConeCondition::from_worst(nonneg),
        nonincreasing: ConeCondition::from_worst(dec),
        weighted_increasing: ConeCondition::from_worst(weighted),
        bounded: ConeCondition::from_worst(bound),
    })
}

/// Lipschitz seminorm of `log f` over the cells whose midpoints lie in
/// `[lo, hi]`, measured between adjacent midpoints, with `log 0 − log 0 = 0`.
pub fn log_lipschitz(f: &GridDensity, lo: f64, hi: f64) -> f64 {
    let grid = &f.grid;
    let cells: Vec<usize> = (0..grid.cells())
        .filter(|&i| {
            let m = grid.midpoint(i);
            m >= lo && m <= hi
        })
        .collect();
    let mut worst = 0.0f64;
    for w in cells.windows(2) {
        let (i, j) = (w[0], w[1]);
        let (a, b) = (f.values[i], f.values[j]);
        let q = match (a > 0.0, b > 0.0) {
            (false, false) => 0.0,
            (true, true) => (a.ln() - b.ln()).abs() / (grid.midpoint(j) - grid.midpoint(i)),
            _ => return f64::INFINITY,
        };
        worst = worst.max(q);
    }
    worst
}

/// Inverse-CDF sampler over a probability density on a grid.
#[derive(Clone, Debug)]
pub struct Sampler {
    edges: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Sampler {
    pub fn new(f: &GridDensity) -> Result<Self> {
        if f.values.iter().any(|&v| v < 0.0) {
            return Err(Error::param("cannot sample a density with negative cells"));
        }
        let masses = f.masses();
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::param("cannot sample a density without mass"));
        }
        let mut cumulative = Vec::with_capacity(masses.len() + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for m in masses {
            acc += m;
            cumulative.push(acc / total);
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self {
            edges: f.grid.edges().to_vec(),
            cumulative,
        })
    }

    /// Point with distribution-function value `u ∈ [0, 1)`.
    #[inline]
    pub fn sample(&self, u: f64) -> f64 {
        let k = self.cumulative.partition_point(|&c| c <= u);
        let i = k.saturating_sub(1).min(self.edges.len() - 2);
        let (c0, c1) = (self.cumulative[i], self.cumulative[i + 1]);
        let (a, b) = (self.edges[i], self.edges[i + 1]);
        if c1 > c0 {
            (a + (u - c0) / (c1 - c0) * (b - a)).clamp(a, b)
        } else {
            a
        }
    }

    /// Distribution function at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let k = self.edges.partition_point(|&e| e < x);
        let i = k.saturating_sub(1);
        let (a, b) = (self.edges[i], self.edges[i + 1]);
        self.cumulative[i] + (x - a) / (b - a) * (self.cumulative[i + 1] - self.cumulative[i])
    }
}

/// Single inverse-CDF draw; build a [`Sampler`] for repeated use.
pub fn sample(f: &GridDensity, u: f64) -> Result<f64> {
    Ok(Sampler::new(f)?.sample(u))
}
