//! Run configuration: one JSON document per run.
//!
//! ```json
//! {
//!   "experiment": {
//!     "kind": "memory_loss",
//!     "sequence": { "kind": "constant", "gamma": 0.5, "gamma_star": 0.5, "length": 4096 },
//!     "g": { "kind": "cos_perturbation", "amplitude": 0.5 },
//!     "n_grid": { "dyadic": [6, 12] },
//!     "fit_window": [64, 4096]
//!   },
//!   "seed": 1,
//!   "output": "out/memory",
//!   "assertions": [{ "metric": "slope", "series": "tv", "min": -2.25, "max": -1.75 }]
//! }
//! ```
//!
//! Omitted fields take the defaults documented on each field. Unknown keys
//! are rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{invariant_density, Grid, GridDensity, TailFunction, DEFAULT_CELLS};
use crate::error::{Error, Result};
use crate::experiments::{MarkovObservable, ObservableSpec};
use crate::map::{quasistatic_sequence, Curve, Fnv, ParameterSequence};
use crate::renewal::{BlockTails, QvFamily, RenewalSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Master seed of every random stream; default `0`.
    #[serde(default)]
    pub seed: u64,
    /// Output directory; default `out`.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Checks on the results; the run fails when one does not hold.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assertions: Vec<Assertion>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_grid() -> GridSpec {
    GridSpec::default()
}

fn default_samples() -> usize {
    100_000
}

fn default_uniform() -> DensitySpec {
    DensitySpec::Uniform
}

fn default_observable() -> ObservableSpec {
    use crate::experiments::{BaseFunction, ObservableKind};
    ObservableSpec::new(ObservableKind::RunningMax, BaseFunction::Cos2Pi)
}

fn default_dyadic() -> NGrid {
    NGrid::Dyadic { dyadic: (6, 12) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Entry and return partition points `x_n`, `y_n` for `n ≤ count`.
    Partition { sequence: SequenceSpec, count: usize },
    /// Pushes `initial` forward and writes the density after `steps` maps.
    Density {
        sequence: SequenceSpec,
        #[serde(default = "default_grid")]
        grid: GridSpec,
        #[serde(default = "default_uniform")]
        initial: DensitySpec,
        steps: usize,
    },
    MemoryLoss {
        sequence: SequenceSpec,
        #[serde(default = "default_grid")]
        grid: GridSpec,
        /// Default: uniform.
        #[serde(default = "default_uniform")]
        f: DensitySpec,
        g: DensitySpec,
        /// Default: `2^6, …, 2^12`.
        #[serde(default = "default_dyadic")]
        n_grid: NGrid,
        /// Default: from ten times the first `n` to the last.
        #[serde(default)]
        fit_window: Option<(f64, f64)>,
    },
    Moments {
        sequence: SequenceSpec,
        #[serde(default = "default_grid")]
        grid: GridSpec,
        #[serde(default = "default_uniform")]
        mu: DensitySpec,
        /// Default: running maximum of `cos 2πx` sums.
        #[serde(default = "default_observable")]
        observable: ObservableSpec,
        p: Vec<f64>,
        #[serde(default = "default_dyadic")]
        n_grid: NGrid,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        fit_window: Option<(f64, f64)>,
    },
    Tails {
        sequence: SequenceSpec,
        #[serde(default = "default_grid")]
        grid: GridSpec,
        #[serde(default = "default_uniform")]
        mu: DensitySpec,
        #[serde(default = "default_observable")]
        observable: ObservableSpec,
        n: usize,
        /// Default: 41 log-spaced points over the range of the samples.
        #[serde(default)]
        t_grid: Option<Vec<f64>>,
        #[serde(default = "default_samples")]
        samples: usize,
        /// Default: the decade centred on the middle of `t_grid`.
        #[serde(default)]
        window: Option<(f64, f64)>,
    },
    Deviations {
        sequence: SequenceSpec,
        #[serde(default = "default_grid")]
        grid: GridSpec,
        #[serde(default = "default_uniform")]
        mu: DensitySpec,
        #[serde(default = "default_observable")]
        observable: ObservableSpec,
        #[serde(default = "default_dyadic")]
        n_grid: NGrid,
        #[serde(default = "default_samples")]
        samples: usize,
        epsilon: f64,
        tau: f64,
        #[serde(default)]
        fit_window: Option<(f64, f64)>,
    },
    Counterexample {
        steps: usize,
        paths: usize,
        /// Weights of `A`, `B`, `C`; default uniform.
        #[serde(default = "default_initial")]
        initial: [f64; 3],
        #[serde(default = "default_markov")]
        observable: MarkovObservable,
    },
    RenewalTails {
        renewal: RenewalSpecConfig,
        n_max: usize,
        check: TailCheck,
        /// Monte Carlo draws of `S`; `0` skips the comparison.
        #[serde(default)]
        mc_samples: usize,
        /// Points where Monte Carlo is compared; default `1, 2, 5, 10, …`.
        #[serde(default)]
        report_n: Option<Vec<usize>>,
    },
    QvCheck {
        beta: f64,
        #[serde(default = "default_c_tau")]
        c_tau: f64,
        #[serde(default = "default_family")]
        family: QvFamily,
        /// Default: `2^5, …, 2^12`.
        #[serde(default = "default_qv_lengths")]
        lengths: NGrid,
        #[serde(default = "default_qv_samples")]
        samples: usize,
    },
}

fn default_initial() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

fn default_markov() -> MarkovObservable {
    MarkovObservable::Alternating
}

fn default_c_tau() -> f64 {
    1.0
}

fn default_family() -> QvFamily {
    QvFamily::Ones
}

fn default_qv_lengths() -> NGrid {
    NGrid::Dyadic { dyadic: (5, 12) }
}

fn default_qv_samples() -> usize {
    10_000
}

impl Experiment {
    /// Name used for subcommands and file names.
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Partition { .. } => "partition",
            Experiment::Density { .. } => "density",
            Experiment::MemoryLoss { .. } => "memory-loss",
            Experiment::Moments { .. } => "moments",
            Experiment::Tails { .. } => "tails",
            Experiment::Deviations { .. } => "deviations",
            Experiment::Counterexample { .. } => "counterexample",
            Experiment::RenewalTails { .. } => "renewal-tails",
            Experiment::QvCheck { .. } => "qv-check",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceSpec {
    Constant { gamma: f64, gamma_star: f64, length: usize },
    /// Parameters listed inline or in a file of whitespace-separated reals.
    Explicit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gammas: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        gamma_star: f64,
    },
    /// Level `level` of the quasistatic array built from `curve`.
    Quasistatic { curve: Curve, level: usize, gamma_star: f64 },
}

impl SequenceSpec {
    pub fn gamma_star(&self) -> f64 {
        match self {
            SequenceSpec::Constant { gamma_star, .. }
            | SequenceSpec::Explicit { gamma_star, .. }
            | SequenceSpec::Quasistatic { gamma_star, .. } => *gamma_star,
        }
    }

    fn validate(&self) -> Result<()> {
        let gs = self.gamma_star();
        if !(gs > 0.0 && gs < 1.0) {
            return Err(range("gamma_star", format!("{gs} is outside (0, 1)")));
        }
        match self {
            SequenceSpec::Constant { gamma, length, .. } => {
                if !(*gamma > 0.0 && *gamma <= gs) {
                    return Err(range("gamma", format!("{gamma} is outside (0, gamma_star]")));
                }
                if *length == 0 {
                    return Err(range("length", "must be positive"));
                }
            }
            SequenceSpec::Explicit { gammas, path, .. } => {
                if gammas.is_some() == path.is_some() {
                    return Err(range("gammas", "give exactly one of `gammas` and `path`"));
                }
            }
            SequenceSpec::Quasistatic { level, .. } => {
                if *level == 0 {
                    return Err(range("level", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// The sequence, reading `path` relative to `base`.
    pub fn build(&self, base: &Path) -> Result<ParameterSequence> {
        match self {
            SequenceSpec::Constant {
                gamma,
                gamma_star,
                length,
            } => ParameterSequence::constant(*gamma, *gamma_star, *length),
            SequenceSpec::Explicit {
                gammas,
                path,
                gamma_star,
            } => {
                let values = match (gammas, path) {
                    (Some(g), _) => g.clone(),
                    (None, Some(p)) => read_reals(&base.join(p))?,
                    (None, None) => return Err(range("gammas", "missing")),
                };
                ParameterSequence::explicit(values, *gamma_star)
            }
            SequenceSpec::Quasistatic {
                curve,
                level,
                gamma_star,
            } => quasistatic_sequence(&|t| curve.eval(t), *level, *gamma_star),
        }
    }
}

fn read_reals(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|e| Error::param(format!("{}: `{tok}`: {e}", path.display())))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridLayout {
    /// Graded cells near `0`, uniform beyond.
    Graded,
    /// Geometrically refined cells near `0`, uniform beyond.
    Singular,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub cells: usize,
    pub layout: GridLayout,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            cells: DEFAULT_CELLS,
            layout: GridLayout::Graded,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<Grid>> {
        let g = match self.layout {
            GridLayout::Graded => Grid::graded(self.cells),
            GridLayout::Singular => Grid::singular(self.cells),
            GridLayout::Uniform => Grid::uniform(self.cells),
        };
        g.map(Arc::new).map_err(|e| range("grid.cells", e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform,
    /// Normalized `1 + amplitude · x · cos 2πx`.
    CosPerturbation { amplitude: f64 },
    /// Invariant density of the map with parameter `gamma`.
    Invariant {
        gamma: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    /// Cell values from a CSV written by the `density` experiment.
    Csv { path: PathBuf },
}

fn default_tol() -> f64 {
    1e-8
}

impl DensitySpec {
    pub fn build(&self, grid: &Arc<Grid>, base: &Path) -> Result<GridDensity> {
        match self {
            DensitySpec::Uniform => Ok(GridDensity::uniform(grid.clone())),
            DensitySpec::CosPerturbation { amplitude } => {
                if !(amplitude.abs() < 1.0) {
                    return Err(range("amplitude", "must lie in (-1, 1) to keep the density positive"));
                }
                GridDensity::from_fn(grid.clone(), |x| 1.0 + amplitude * x * (2.0 * std::f64::consts::PI * x).cos())?
                    .normalized()
            }
            DensitySpec::Invariant { gamma, tol } => invariant_density(grid, *gamma, *tol),
            DensitySpec::Csv { path } => {
                let p = base.join(path);
                let file = std::fs::File::open(&p).map_err(|e| Error::io(&p, e))?;
                let f = GridDensity::read_csv(std::io::BufReader::new(file))?;
                if f.grid().edges() != grid.edges() {
                    return Err(Error::GridMismatch);
                }
                GridDensity::from_values(grid.clone(), f.values().to_vec())
            }
        }
    }
}

/// Increasing times, listed or as `2^a, …, 2^b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NGrid {
    List(Vec<usize>),
    Dyadic { dyadic: (u32, u32) },
}

impl NGrid {
    pub fn points(&self) -> Vec<usize> {
        match self {
            NGrid::List(v) => v.clone(),
            NGrid::Dyadic { dyadic: (a, b) } => (*a..=*b).map(|k| 1usize << k).collect(),
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        if let NGrid::Dyadic { dyadic: (a, b) } = self {
            if a > b || *b >= 40 {
                return Err(range(field, format!("dyadic exponents [{a}, {b}] must increase and stay below 40")));
            }
        }
        let p = self.points();
        if p.is_empty() || p[0] == 0 || p.windows(2).any(|w| w[1] <= w[0]) {
            return Err(range(field, "must be positive and strictly increasing"));
        }
        Ok(())
    }
}

/// Tail law choices for the renewal experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailSpec {
    /// `min(1, c ℓ^{−exponent})`
    Power {
        exponent: f64,
        #[serde(default = "one")]
        c: f64,
    },
    /// `min(1, a exp(−c ℓ^β))`
    StretchedExp {
        beta: f64,
        #[serde(default = "one")]
        c: f64,
        #[serde(default = "one")]
        a: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl TailSpec {
    fn build(&self, len: usize) -> Result<TailFunction> {
        match *self {
            TailSpec::Power { exponent, c } => TailFunction::power(c, exponent, len),
            TailSpec::StretchedExp { beta, c, a } => TailFunction::stretched_exp(a, c, beta, len),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalSpecConfig {
    pub theta: f64,
    #[serde(default = "one_usize")]
    pub n0: usize,
    /// First-block tail `r̂`.
    pub first: TailSpec,
    /// `h` entering the conditional tails `min(1, C_h Σ_{j≤k} h(j + ℓ))`.
    pub h: TailSpec,
    #[serde(default = "one")]
    pub c_h: f64,
    /// Default: `n_max`.
    #[serde(default)]
    pub value_cap: Option<usize>,
}

fn one_usize() -> usize {
    1
}

impl RenewalSpecConfig {
    pub fn build(&self, n_max: usize) -> Result<RenewalSpec> {
        let cap = self.value_cap.unwrap_or(n_max);
        let len = cap.max(1);
        let spec = RenewalSpec {
            theta: self.theta,
            n0: self.n0,
            r_hat: self.first.build(len)?,
            h_family: BlockTails::TailSum {
                h: self.h.build(len)?,
                c_h: self.c_h,
            },
            value_cap: cap,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Which tail statement to verify.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailCheck {
    /// `n^{β'} P(S ≥ n)` levels off.
    Power { beta: f64, beta_prime: f64 },
    /// Bound through the first-block tail for summable `r̂`.
    Summable { beta: f64 },
    /// `log P(S ≥ n)` is linear in `n^β`.
    StretchedExp { beta: f64 },
}

/// A check on one number extracted from the results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub metric: Metric,
    /// Series label; default the first series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Fitted slope.
    Slope,
    RSquared,
    /// Largest value of the series.
    MaxValue,
    /// `1` when the experiment's own check passed, else `0`.
    Passed,
}

fn range(field: &str, message: impl Into<String>) -> Error {
    Error::Range {
        field: field.into(),
        message: message.into(),
    }
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(range(field, format!("{x} must be positive")))
    }
}

fn nonzero(field: &str, n: usize) -> Result<()> {
    if n == 0 {
        Err(range(field, "must be positive"))
    } else {
        Ok(())
    }
}

fn window(field: &str, w: &Option<(f64, f64)>) -> Result<()> {
    if let Some((lo, hi)) = w {
        if !(*lo > 0.0 && lo <= hi) {
            return Err(range(field, format!("[{lo}, {hi}] must be positive and ordered")));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        match &self.experiment {
            Experiment::Partition { sequence, count } => {
                sequence.validate()?;
                nonzero("count", *count)?;
            }
            Experiment::Density { sequence, grid, steps, .. } => {
                sequence.validate()?;
                nonzero("grid.cells", grid.cells)?;
                let _ = steps;
            }
            Experiment::MemoryLoss {
                sequence,
                grid,
                n_grid,
                fit_window,
                ..
            } => {
                sequence.validate()?;
                nonzero("grid.cells", grid.cells)?;
                n_grid.validate("n_grid")?;
                window("fit_window", fit_window)?;
            }
            Experiment::Moments {
                sequence,
                p,
                n_grid,
                samples,
                fit_window,
                ..
            } => {
                sequence.validate()?;
                if p.is_empty() {
                    return Err(range("p", "needs at least one moment order"));
                }
                for &q in p {
                    positive("p", q)?;
                }
                n_grid.validate("n_grid")?;
                nonzero("samples", *samples)?;
                window("fit_window", fit_window)?;
            }
            Experiment::Tails {
                sequence,
                n,
                samples,
                window: w,
                ..
            } => {
                sequence.validate()?;
                let gs = sequence.gamma_star();
                if !(gs > 0.5) {
                    return Err(range("gamma_star", format!("{gs} must exceed 1/2 for the tail experiment")));
                }
                nonzero("n", *n)?;
                nonzero("samples", *samples)?;
                window("window", w)?;
            }
            Experiment::Deviations {
                sequence,
                n_grid,
                samples,
                epsilon,
                tau,
                fit_window,
                ..
            } => {
                sequence.validate()?;
                n_grid.validate("n_grid")?;
                nonzero("samples", *samples)?;
                positive("epsilon", *epsilon)?;
                positive("tau", *tau)?;
                window("fit_window", fit_window)?;
            }
            Experiment::Counterexample {
                steps, paths, initial, ..
            } => {
                nonzero("steps", *steps)?;
                nonzero("paths", *paths)?;
                if initial.iter().any(|w| !(*w >= 0.0)) || initial.iter().sum::<f64>() <= 0.0 {
                    return Err(range("initial", "weights must be nonnegative with positive sum"));
                }
            }
            Experiment::RenewalTails { renewal, n_max, .. } => {
                if !(renewal.theta > 0.0 && renewal.theta <= 1.0) {
                    return Err(range("theta", format!("{} is outside (0, 1]", renewal.theta)));
                }
                nonzero("n0", renewal.n0)?;
                nonzero("n_max", *n_max)?;
                if let Some(cap) = renewal.value_cap {
                    if cap < *n_max {
                        return Err(range("value_cap", "must be at least n_max"));
                    }
                }
            }
            Experiment::QvCheck {
                beta,
                c_tau,
                lengths,
                samples,
                ..
            } => {
                if !(*beta > 1.0) {
                    return Err(range("beta", format!("{beta} must exceed 1")));
                }
                positive("c_tau", *c_tau)?;
                lengths.validate("lengths")?;
                nonzero("samples", *samples)?;
            }
        }
        for a in &self.assertions {
            if a.min.is_none() && a.max.is_none() {
                return Err(range("assertions", "each assertion needs `min` or `max`"));
            }
        }
        Ok(())
    }

    /// Short hex digest of the canonical serialization.
    pub fn hash(&self) -> String {
        let mut h = Fnv::new();
        h.write(to_string(self).as_bytes());
        format!("{:016x}", h.finish())
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
        let (line, column) = unknown_key_position(text, &e).unwrap_or((e.line(), e.column()));
        Error::ConfigParse {
            line,
            column,
            message: e.to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Tagged sections are buffered before they are checked, so serde reports
/// unknown keys at the end of the section; point at the key itself.
fn unknown_key_position(text: &str, e: &serde_json::Error) -> Option<(usize, usize)> {
    let msg = e.to_string();
    let key = msg.strip_prefix("unknown field `")?.split('`').next()?;
    let quoted = format!("\"{key}\"");
    let at = text
        .match_indices(&quoted)
        .map(|(i, _)| i)
        .find(|&i| text[i + quoted.len()..].trim_start().starts_with(':'))?;
    let before = &text[..at];
    let line = before.matches('\n').count() + 1;
    let column = at - before.rfind('\n').map_or(0, |n| n + 1) + 1;
    Some((line, column))
}

pub fn to_string(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("configs always serialize")
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "experiment": {
            "kind": "memory_loss",
            "sequence": { "kind": "constant", "gamma": 0.5, "gamma_star": 0.5, "length": 4096 },
            "g": { "kind": "cos_perturbation", "amplitude": 0.5 }
        }
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.output, PathBuf::from("out"));
        match &c.experiment {
            Experiment::MemoryLoss {
                grid, f, n_grid, fit_window, ..
            } => {
                assert_eq!(*grid, GridSpec::default());
                assert_eq!(*f, DensitySpec::Uniform);
                assert_eq!(n_grid.points(), vec![64, 128, 256, 512, 1024, 2048, 4096]);
                assert!(fit_window.is_none());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn range_error_names_the_field() {
        let bad = MINIMAL.replace("\"gamma_star\": 0.5", "\"gamma_star\": 1.2");
        match parse_config(&bad) {
            Err(Error::Range { field, .. }) => assert_eq!(field, "gamma_star"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_syntax_errors_have_positions() {
        let unknown = MINIMAL.replace("\"length\": 4096", "\"length\": 4096, \"colour\": 1");
        match parse_config(&unknown) {
            Err(Error::ConfigParse { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let broken = "{\n  \"seed\": 1,\n  \"experiment\": [\n}";
        match parse_config(broken) {
            Err(Error::ConfigParse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let docs = [
            MINIMAL.to_string(),
            r#"{"experiment": {"kind": "renewal_tails", "renewal": {"theta": 0.3, "first": {"kind": "power", "exponent": 2}, "h": {"kind": "power", "exponent": 3}}, "n_max": 100, "check": {"kind": "power", "beta": 3, "beta_prime": 2}, "mc_samples": 1000},
                "seed": 9, "output": "o", "assertions": [{"metric": "passed", "min": 1}]}"#
                .to_string(),
            r#"{"experiment": {"kind": "qv_check", "beta": 1.5, "family": {"family": "decaying", "exponent": 0.3}, "lengths": [4, 8, 16]}}"#.to_string(),
            r#"{"experiment": {"kind": "moments", "sequence": {"kind": "quasistatic", "curve": {"curve": "sine", "mid": 0.3, "amplitude": 0.02, "periods": 1}, "level": 100, "gamma_star": 0.4}, "p": [2, 4], "observable": {"kind": "weighted_birkhoff", "base": "identity", "weights": [1, 2]}}}"#.to_string(),
        ];
        for d in docs {
            let c = parse_config(&d).unwrap();
            let again = parse_config(&to_string(&c)).unwrap();
            assert_eq!(c, again);
            assert_eq!(c.hash(), again.hash());
        }
    }

    #[test]
    fn explicit_sequence_from_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.txt"), "0.1 0.2\n0.3\n").unwrap();
        let s = SequenceSpec::Explicit {
            gammas: None,
            path: Some("g.txt".into()),
            gamma_star: 0.3,
        };
        assert_eq!(s.build(dir.path()).unwrap().gammas(), &[0.1, 0.2, 0.3]);
        let missing = SequenceSpec::Explicit {
            gammas: None,
            path: Some("nope.txt".into()),
            gamma_star: 0.3,
        };
        assert!(matches!(missing.build(dir.path()), Err(Error::Io { .. })));
    }
}
