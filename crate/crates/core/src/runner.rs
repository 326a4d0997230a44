//! Executes a [`RunConfig`]: runs the experiment, writes
//! `<output>/<experiment>.csv` and `<output>/summary.json`, and evaluates
//! the assertions.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Assertion, Experiment, Metric, RunConfig, TailCheck};
use crate::density::{cone_check, default_cone_parameter, evolve};
use crate::error::{Error, Result};
use crate::experiments::{
    deviation_check, markov_counterexample, memory_loss_experiment, moments_experiment, tail_experiment,
    ExperimentReport, MarkovObservable, MarkovState, Series,
};
use crate::io::{real, write_csv};
use crate::partition::{entry_partition, return_partition};
use crate::renewal::{compare_tails, exact_tail_dp, qv_moment_check, verify_stail, verify_stail_b, verify_stail_exp};

/// Exit status for a run whose assertions all hold.
pub const EXIT_PASS: i32 = 0;
/// Exit status when an assertion or the experiment's own check fails.
pub const EXIT_FAIL: i32 = 1;
/// Exit status for configuration, IO and experiment errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub assertion: Assertion,
    pub value: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    /// Verdict of the experiment's built-in check, when it has one.
    pub verdict: Option<bool>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    pub csv: PathBuf,
    pub summary: PathBuf,
    #[serde(skip)]
    notes: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    /// Human-readable account of fits and checks.
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let r = &self.report;
        let _ = writeln!(s, "{} (config {}, seed {:?})", r.experiment, r.config_hash, r.seed);
        if let Some((lo, hi)) = r.window {
            let _ = writeln!(s, "  fit window: {} in [{lo}, {hi}]", r.x_label);
        }
        for series in &r.series {
            match &series.fit {
                Some(f) => {
                    let _ = write!(
                        s,
                        "  {}: slope {:.4}, r² {:.4} ({} points",
                        series.label, f.slope, f.r_squared, f.used
                    );
                    if f.excluded > 0 {
                        let _ = write!(s, ", {} excluded", f.excluded);
                    }
                    let _ = write!(s, ")");
                    if let Some(rs) = series.reference_slope {
                        let _ = write!(s, ", reference {rs:.4}");
                    }
                    let _ = writeln!(s);
                }
                None => {
                    let _ = writeln!(s, "  {}: no fit", series.label);
                }
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "  {n}");
        }
        if let Some(v) = self.verdict {
            let _ = writeln!(s, "  built-in check: {}", if v { "pass" } else { "FAIL" });
        }
        for c in &self.checks {
            let a = &c.assertion;
            let _ = writeln!(
                s,
                "  assert {:?}{} in [{}, {}]: {} -> {}",
                a.metric,
                a.series.as_deref().map(|l| format!(" of {l}")).unwrap_or_default(),
                a.min.map_or("-inf".into(), |v| v.to_string()),
                a.max.map_or("inf".into(), |v| v.to_string()),
                c.value,
                if c.passed { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(s, "  {}", if self.passed { "PASS" } else { "FAIL" });
        s
    }
}

/// Everything an experiment produces before it is written out.
struct Produced {
    report: ExperimentReport,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    verdict: Option<bool>,
    notes: Vec<String>,
}

impl Produced {
    fn new(report: ExperimentReport, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        Self {
            report,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows,
            verdict: None,
            notes: Vec::new(),
        }
    }
}

/// Ten times the first point up to the last, or the whole grid when that
/// leaves fewer than three points.
pub fn default_fit_window(n_grid: &[usize]) -> (f64, f64) {
    let (first, last) = (n_grid[0] as f64, *n_grid.last().unwrap() as f64);
    let lo = 10.0 * first;
    if n_grid.iter().filter(|&&n| n as f64 >= lo).count() >= 3 {
        (lo, last)
    } else {
        (first, last)
    }
}

fn table(report: &ExperimentReport) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec![report.x_label.clone()];
    header.extend(report.series.iter().map(|s| s.label.clone()));
    let len = report.series.first().map_or(0, |s| s.points.len());
    let rows = (0..len)
        .map(|i| {
            let mut row = vec![fmt_x(report.series[0].points[i].0)];
            row.extend(report.series.iter().map(|s| real(s.points[i].1)));
            row
        })
        .collect();
    (header, rows)
}

/// Integral abscissas print without an exponent.
fn fmt_x(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        real(x)
    }
}

fn from_report(report: ExperimentReport) -> Produced {
    let (header, rows) = table(&report);
    Produced {
        report,
        header,
        rows,
        verdict: None,
        notes: Vec::new(),
    }
}

fn series(label: &str, points: Vec<(f64, f64)>) -> Series {
    Series {
        label: label.into(),
        points,
        fit: None,
        reference_slope: None,
    }
}

fn report(name: &str, x_label: &str, series: Vec<Series>, seed: Option<u64>) -> ExperimentReport {
    ExperimentReport {
        experiment: name.into(),
        x_label: x_label.into(),
        series,
        window: None,
        config_hash: String::new(),
        seed,
    }
}

fn produce(cfg: &RunConfig, base: &Path) -> Result<Produced> {
    let seed = cfg.seed;
    Ok(match &cfg.experiment {
        Experiment::Partition { sequence, count } => {
            let seq = sequence.build(base)?;
            let x = entry_partition(&seq, *count)?;
            let y = return_partition(&seq, *count)?;
            let idx = |i: usize| (i + 1) as f64;
            let xs = x.points().iter().enumerate().map(|(i, &v)| (idx(i), v)).collect();
            let ys = y.points().iter().enumerate().map(|(i, &v)| (idx(i), v)).collect();
            let mut p = from_report(report("partition", "n", vec![series("x", xs), series("y", ys)], None));
            let (gx, gy) = (x.worst_gap_excess(), y.worst_gap_excess());
            p.notes.push(format!("worst gap excess: entry {gx:.3e}, return {gy:.3e}"));
            p.verdict = Some(gx <= 1e-12 && gy <= 1e-12 && x.is_strictly_decreasing() && y.is_strictly_decreasing());
            p
        }
        Experiment::Density {
            sequence,
            grid,
            initial,
            steps,
        } => {
            let seq = sequence.build(base)?;
            let g = grid.build()?;
            let f0 = initial.build(&g, base)?;
            let f = evolve(&seq, &f0, *steps)?;
            let gs = seq.gamma_star();
            let cone = cone_check(&f, gs, default_cone_parameter(gs))?;
            let e = g.edges();
            let rows = f
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| vec![real(e[i]), real(e[i + 1]), real(v)])
                .collect();
            let pts = f.values().iter().enumerate().map(|(i, &v)| (g.midpoint(i), v)).collect();
            let mut p = Produced::new(
                report("density", "x", vec![series("density", pts)], None),
                &["left", "right", "value"],
                rows,
            );
            p.notes.push(format!(
                "mass {:.15}, cone {} (worst violation {:.3e})",
                f.total_mass(),
                if cone.all_hold() { "holds" } else { "violated" },
                cone.max_violation()
            ));
            p.verdict = Some(cone.all_hold());
            p
        }
        Experiment::MemoryLoss {
            sequence,
            grid,
            f,
            g,
            n_grid,
            fit_window,
        } => {
            let seq = sequence.build(base)?;
            let gr = grid.build()?;
            let (f, g) = (f.build(&gr, base)?, g.build(&gr, base)?);
            let ns = n_grid.points();
            let w = fit_window.unwrap_or_else(|| default_fit_window(&ns));
            from_report(memory_loss_experiment(&seq, &f, &g, &ns, w)?)
        }
        Experiment::Moments {
            sequence,
            grid,
            mu,
            observable,
            p,
            n_grid,
            samples,
            fit_window,
        } => {
            let seq = sequence.build(base)?;
            let gr = grid.build()?;
            let mu = mu.build(&gr, base)?;
            let ns = n_grid.points();
            let w = fit_window.unwrap_or_else(|| default_fit_window(&ns));
            from_report(moments_experiment(&seq, &mu, observable, p, &ns, *samples, seed, w)?)
        }
        Experiment::Tails {
            sequence,
            grid,
            mu,
            observable,
            n,
            t_grid,
            samples,
            window,
        } => {
            let seq = sequence.build(base)?;
            let gr = grid.build()?;
            let mu = mu.build(&gr, base)?;
            from_report(tail_experiment(
                &seq,
                &mu,
                observable,
                *n,
                t_grid.as_deref(),
                *samples,
                seed,
                *window,
            )?)
        }
        Experiment::Deviations {
            sequence,
            grid,
            mu,
            observable,
            n_grid,
            samples,
            epsilon,
            tau,
            fit_window,
        } => {
            let seq = sequence.build(base)?;
            let gr = grid.build()?;
            let mu = mu.build(&gr, base)?;
            let ns = n_grid.points();
            let w = fit_window.unwrap_or_else(|| default_fit_window(&ns));
            from_report(deviation_check(&seq, &mu, observable, &ns, *samples, seed, *epsilon, *tau, w)?)
        }
        Experiment::Counterexample {
            steps,
            paths,
            initial,
            observable,
        } => counterexample(*steps, *paths, *initial, *observable, seed)?,
        Experiment::RenewalTails {
            renewal,
            n_max,
            check,
            mc_samples,
            report_n,
        } => renewal_tails(renewal, *n_max, check, *mc_samples, report_n.as_deref(), seed)?,
        Experiment::QvCheck {
            beta,
            c_tau,
            family,
            lengths,
            samples,
        } => {
            let lens = lengths.points();
            let q = qv_moment_check(*beta, *c_tau, family, &lens, *samples, seed)?;
            let x = |f: &dyn Fn(&crate::renewal::QvPoint) -> f64| -> Vec<(f64, f64)> {
                q.points.iter().map(|p| (p.len as f64, f(p))).collect()
            };
            let all = vec![
                series("sigma_norm", x(&|p| p.sigma_norm)),
                series("sigma_rhs", x(&|p| p.sigma_rhs)),
                series("sigma_ratio", x(&|p| p.sigma_ratio)),
                series("omega_norm", x(&|p| p.omega_norm)),
                series("omega_rhs", x(&|p| p.omega_rhs)),
                series("omega_ratio", x(&|p| p.omega_ratio)),
            ];
            let mut p = from_report(report("qv_check", "len", all, Some(seed)));
            p.notes.push(format!(
                "sigma ratio: late max {:.4} vs earlier max {:.4}; omega ratio: late max {:.4} vs earlier max {:.4}",
                q.sigma.late_max, q.sigma.early_max, q.omega.late_max, q.omega.early_max
            ));
            p.verdict = Some(q.passed);
            p
        }
    })
}

fn counterexample(steps: usize, paths: usize, initial: [f64; 3], obs: MarkovObservable, seed: u64) -> Result<Produced> {
    let t = markov_counterexample(steps, initial, obs, paths, seed)?;
    let mut lo_a = vec![i64::MAX; steps];
    let mut hi_a = vec![i64::MIN; steps];
    let mut lo_bc = vec![i64::MAX; steps];
    let mut hi_bc = vec![i64::MIN; steps];
    for i in 0..paths {
        let (lo, hi) = match t.starts[i] {
            MarkovState::A => (&mut lo_a, &mut hi_a),
            _ => (&mut lo_bc, &mut hi_bc),
        };
        for (k, &s) in t.path(i).iter().enumerate() {
            lo[k] = lo[k].min(s);
            hi[k] = hi[k].max(s);
        }
    }
    let cell = |v: i64| {
        if v == i64::MAX || v == i64::MIN {
            String::new()
        } else {
            v.to_string()
        }
    };
    let rows = (0..steps)
        .map(|k| {
            vec![
                (k + 1).to_string(),
                cell(lo_a[k]),
                cell(hi_a[k]),
                cell(lo_bc[k]),
                cell(hi_bc[k]),
            ]
        })
        .collect();
    let violations = t.violations(obs);
    let worst: Vec<(f64, f64)> = (0..steps)
        .map(|k| {
            let n = (k + 1) as f64;
            let dev = [lo_a[k], hi_a[k]]
                .iter()
                .filter(|v| **v != i64::MAX && **v != i64::MIN)
                .map(|&v| {
                    let want = if obs == MarkovObservable::Alternating { -n } else { n };
                    (v as f64 - want).abs()
                })
                .chain(
                    [lo_bc[k], hi_bc[k]]
                        .iter()
                        .filter(|v| **v != i64::MAX && **v != i64::MIN)
                        .map(|&v| (v as f64 - n).abs()),
                )
                .fold(0.0, f64::max);
            (n, dev)
        })
        .collect();
    let mut p = Produced::new(
        report("counterexample", "n", vec![series("max_deviation", worst)], Some(seed)),
        &["n", "min_s_start_a", "max_s_start_a", "min_s_start_bc", "max_s_start_bc"],
        rows,
    );
    let a = t.starts.iter().filter(|s| **s == MarkovState::A).count();
    p.notes
        .push(format!("{paths} paths ({a} from A), {violations} violate the closed form"));
    p.verdict = Some(violations == 0);
    Ok(p)
}

fn renewal_tails(
    renewal: &crate::config::RenewalSpecConfig,
    n_max: usize,
    check: &TailCheck,
    mc_samples: usize,
    report_n: Option<&[usize]>,
    seed: u64,
) -> Result<Produced> {
    let spec = renewal.build(n_max)?;
    let r = match check {
        TailCheck::Power { beta, beta_prime } => verify_stail(&spec, *beta, *beta_prime, (1, n_max))?,
        TailCheck::Summable { beta } => verify_stail_b(&spec, *beta, (1, n_max))?,
        TailCheck::StretchedExp { beta } => verify_stail_exp(&spec, *beta, (1, n_max))?,
    };
    let mut notes = Vec::new();
    let mut mc = vec![None; r.n.len()];
    let mut mc_ok = true;
    if mc_samples > 0 {
        let ns: Vec<usize> = match report_n {
            Some(v) => v.to_vec(),
            None => decades(n_max),
        };
        if ns.iter().any(|&n| n == 0 || n > n_max) {
            return Err(Error::Range {
                field: "report_n".into(),
                message: format!("points must lie in [1, {n_max}]"),
            });
        }
        let exact = exact_tail_dp(&spec, n_max)?;
        let c = compare_tails(&exact, &ns, &spec, mc_samples, seed)?;
        for (i, &n) in c.n.iter().enumerate() {
            if let Some(j) = r.n.iter().position(|&k| k == n) {
                mc[j] = Some(c.mc[i]);
            }
        }
        let z = c.max_z();
        mc_ok = z < 4.0;
        notes.push(format!("Monte Carlo, {mc_samples} draws: max |z| = {z:.3} at {} points", ns.len()));
    }
    let ratio: Vec<f64> = match check {
        TailCheck::StretchedExp { .. } => r
            .tail
            .iter()
            .zip(&r.bound)
            .map(|(t, b)| if *b > 0.0 { t / b } else { 0.0 })
            .collect(),
        _ => r.statistic.clone(),
    };
    let xs: Vec<f64> = r.n.iter().map(|&n| n as f64).collect();
    let rows = (0..r.n.len())
        .map(|i| {
            vec![
                r.n[i].to_string(),
                real(r.tail[i]),
                mc[i].map(real).unwrap_or_default(),
                real(r.bound[i]),
                real(ratio[i]),
            ]
        })
        .collect();
    let mut tail = series("tail_exact", xs.iter().copied().zip(r.tail.iter().copied()).collect());
    tail.fit = r.fit;
    let all = vec![
        tail,
        series("bound_value", xs.iter().copied().zip(r.bound.iter().copied()).collect()),
        series("ratio", xs.iter().copied().zip(ratio).collect()),
    ];
    if let Some(s) = r.stabilization {
        notes.push(format!(
            "stabilization: late max {:.6} vs earlier max {:.6} (slack {})",
            s.late_max, s.early_max, s.slack
        ));
    }
    let mut p = Produced::new(
        report("renewal_tails", "n", all, Some(seed)),
        &["n", "tail_exact", "tail_mc", "bound_value", "ratio"],
        rows,
    );
    p.verdict = Some(r.passed && mc_ok);
    p.notes = notes;
    Ok(p)
}

/// `1, 2, 5, 10, 20, 50, …` up to `n_max`, then `n_max`.
fn decades(n_max: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut scale = 1;
    'outer: loop {
        for m in [1, 2, 5] {
            let n = m * scale;
            if n > n_max {
                break 'outer;
            }
            v.push(n);
        }
        scale *= 10;
    }
    if v.last() != Some(&n_max) {
        v.push(n_max);
    }
    v
}

fn metric_value(p: &Produced, a: &Assertion) -> f64 {
    if a.metric == Metric::Passed {
        return match p.verdict {
            Some(true) => 1.0,
            Some(false) => 0.0,
            None => f64::NAN,
        };
    }
    let s = match &a.series {
        Some(label) => p.report.series(label),
        None => p.report.series.first(),
    };
    let Some(s) = s else { return f64::NAN };
    match a.metric {
        Metric::Slope => s.fit.as_ref().map_or(f64::NAN, |f| f.slope),
        Metric::RSquared => s.fit.as_ref().map_or(f64::NAN, |f| f.r_squared),
        Metric::MaxValue => s.points.iter().map(|q| q.1).fold(f64::NAN, f64::max),
        Metric::Passed => unreachable!(),
    }
}

/// Runs `cfg`, resolving relative input paths against `base`.
pub fn run(cfg: &RunConfig, base: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut p = produce(cfg, base)?;
    p.report.config_hash = cfg.hash();
    if p.report.seed.is_some() {
        p.report.seed = Some(cfg.seed);
    }
    let checks: Vec<CheckResult> = cfg
        .assertions
        .iter()
        .map(|a| {
            let value = metric_value(&p, a);
            let passed = !value.is_nan() && a.min.is_none_or(|m| value >= m) && a.max.is_none_or(|m| value <= m);
            CheckResult {
                assertion: a.clone(),
                value,
                passed,
            }
        })
        .collect();
    let passed = checks.iter().all(|c| c.passed) && p.verdict != Some(false);

    let out = base.join(&cfg.output);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let csv = out.join(format!("{}.csv", cfg.experiment.name()));
    let header: Vec<&str> = p.header.iter().map(String::as_str).collect();
    write_csv(&csv, &header, &p.rows)?;
    let summary = out.join("summary.json");
    let outcome = RunOutcome {
        report: p.report,
        verdict: p.verdict,
        checks,
        passed,
        csv,
        summary: summary.clone(),
        notes: p.notes,
    };
    let json = serde_json::to_string_pretty(&outcome).expect("outcomes always serialize");
    std::fs::write(&summary, json).map_err(|e| Error::io(&summary, e))?;
    Ok(outcome)
}

/// Exit status of a run: pass, failed check, or error.
pub fn exit_code(result: &Result<RunOutcome>) -> i32 {
    match result {
        Ok(o) => o.exit_code(),
        Err(_) => EXIT_ERROR,
    }
}
