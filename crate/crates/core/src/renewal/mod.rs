//! The renewal variable `S = X_1 + ⋯ + X_τ`: a geometric number of blocks,
//! each block's law depending on the previous block's value, with exact
//! tails by dynamic programming and Monte Carlo draws.

mod qv;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::TailFunction;
use crate::error::{Error, Result};
use crate::experiments::fit::{linear_fit, Fit};
use crate::rng::{par_blocks, StreamRng};

pub use qv::{
    lemma_fun2_oracle, lemma_fun_oracle, qv_moment_check, sample_tau_sequence, sigma_omega, weak_norm,
    QvFamily, QvPoint, QvReport, TauSampler, TauSequence,
};

/// Default bound on `n_max · value_cap` for [`exact_tail_dp`].
pub const DEFAULT_STATE_BUDGET: usize = 50_000_000;

/// Conditional tails `ℓ ↦ ĥ_k(ℓ)` of a block given the previous value `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BlockTails {
    /// `ĥ_k(ℓ) = min(1, C_h Σ_{j=0}^{k} h(j + ℓ))`.
    TailSum { h: TailFunction, c_h: f64 },
    /// The same tail after every value.
    Independent { tail: TailFunction },
}

/// Law of `S`: `P(τ = ℓ) = (1−θ)^{ℓ−1} θ`, `P(X_1 ≥ n_0 + ℓ) = r̂(ℓ)` and
/// `P(X_j ≥ n_0 + ℓ | X_{j−1} = k) = ĥ_k(ℓ)`, with `r̂(0) = ĥ_k(0) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalSpec {
    pub theta: f64,
    pub n0: usize,
    pub r_hat: TailFunction,
    pub h_family: BlockTails,
    /// Largest block value represented individually; larger values are
    /// lumped together, which leaves `P(S ≥ n)` exact for `n ≤ value_cap + 1`.
    pub value_cap: usize,
}

impl RenewalSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::param(format!("theta = {} outside (0, 1]", self.theta)));
        }
        if self.n0 == 0 {
            return Err(Error::param("n0 must be at least 1"));
        }
        if self.value_cap < self.n0 {
            return Err(Error::param("value_cap must be at least n0"));
        }
        // Rebuilding runs the tail validation that deserialization skips.
        let check = |t: &TailFunction| TailFunction::new(t.values().to_vec(), t.extrapolation()).map(|_| ());
        check(&self.r_hat)?;
        match &self.h_family {
            BlockTails::TailSum { h, c_h } => {
                check(h)?;
                if !(*c_h > 0.0 && c_h.is_finite()) {
                    return Err(Error::param("C_h must be positive"));
                }
            }
            BlockTails::Independent { tail } => check(tail)?,
        }
        Ok(())
    }

    /// `h(ℓ) = min(1, ℓ^{-β})` composed through tail sums with `C_h`, and
    /// `r̂(ℓ) = min(1, ℓ^{-β'})`.
    pub fn power(theta: f64, n0: usize, beta: f64, beta_prime: f64, c_h: f64, value_cap: usize) -> Result<Self> {
        let table = value_cap.max(1);
        let spec = Self {
            theta,
            n0,
            r_hat: TailFunction::power(1.0, beta_prime, table)?,
            h_family: BlockTails::TailSum {
                h: TailFunction::power(1.0, beta, table)?,
                c_h,
            },
            value_cap,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `h(ℓ) = r̂(ℓ) = min(1, exp(−c ℓ^β))` with tail sums for `ĥ`.
    pub fn stretched_exp(theta: f64, n0: usize, c: f64, beta: f64, c_h: f64, value_cap: usize) -> Result<Self> {
        let table = value_cap.max(1);
        let tail = TailFunction::stretched_exp(1.0, c, beta, table)?;
        let spec = Self {
            theta,
            n0,
            r_hat: tail.clone(),
            h_family: BlockTails::TailSum { h: tail, c_h },
            value_cap,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Block laws of a spec, on values up to `value_cap + 1`.
struct Kernel<'a> {
    spec: &'a RenewalSpec,
    // suffix[i] = Σ_{m=i}^{len} h(m); only differences are used.
    suffix: Vec<f64>,
}

impl<'a> Kernel<'a> {
    fn new(spec: &'a RenewalSpec) -> Self {
        let suffix = match &spec.h_family {
            BlockTails::TailSum { h, .. } => {
                let len = 2 * (spec.value_cap + 2);
                let mut s = vec![0.0; len + 2];
                for m in (1..=len).rev() {
                    s[m] = s[m + 1] + h.value(m);
                }
                s
            }
            BlockTails::Independent { .. } => Vec::new(),
        };
        Self { spec, suffix }
    }

    fn n0(&self) -> usize {
        self.spec.n0
    }

    /// `P(X_1 ≥ m)`.
    fn first_tail(&self, m: usize) -> f64 {
        if m <= self.n0() {
            1.0
        } else {
            self.spec.r_hat.value(m - self.n0())
        }
    }

    fn first_pmf(&self, v: usize) -> f64 {
        if v < self.n0() {
            return 0.0;
        }
        let l = v - self.n0();
        (self.spec.r_hat.value(l) - self.spec.r_hat.value(l + 1)).max(0.0)
    }

    /// `ĥ_k(ℓ)`.
    fn h_hat(&self, k: usize, l: usize) -> f64 {
        if l == 0 {
            return 1.0;
        }
        match &self.spec.h_family {
            BlockTails::TailSum { c_h, .. } => {
                let hi = (l + k + 1).min(self.suffix.len() - 1);
                (c_h * (self.suffix[l] - self.suffix[hi])).min(1.0)
            }
            BlockTails::Independent { tail } => tail.value(l),
        }
    }

    /// `P(X_j ≥ m | X_{j−1} = k)`.
    fn cond_tail(&self, k: usize, m: usize) -> f64 {
        if m <= self.n0() {
            1.0
        } else {
            self.h_hat(k, m - self.n0())
        }
    }

    /// `P(X_j = v | X_{j−1} = k)`, exact where `ĥ_k` is not capped.
    fn cond_pmf(&self, k: usize, v: usize) -> f64 {
        if v < self.n0() {
            return 0.0;
        }
        let l = v - self.n0();
        let upper = self.h_hat(k, l);
        if l >= 1 && upper < 1.0 {
            if let BlockTails::TailSum { h, c_h } = &self.spec.h_family {
                return (c_h * (h.value(l) - h.value(l + k + 1))).max(0.0);
            }
        }
        (upper - self.h_hat(k, l + 1)).max(0.0)
    }
}

/// Exact law of `S` on `1, …, n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactTails {
    /// `tails[n − 1] = P(S ≥ n)`.
    pub tails: Vec<f64>,
    /// `point[n − 1] = P(S = n)`.
    pub point: Vec<f64>,
    /// `P(S > n_max)`.
    pub beyond: f64,
    /// Largest gap between the tails computed from first crossings and
    /// `1 − Σ_{s<n} P(S = s)`: a certificate of the arithmetic.
    pub residual: f64,
}

impl ExactTails {
    /// `P(S ≥ n)`; `1` for `n ≤ 1`.
    pub fn tail(&self, n: usize) -> f64 {
        if n <= 1 {
            1.0
        } else {
            self.tails[n - 1]
        }
    }

    pub fn n_max(&self) -> usize {
        self.tails.len()
    }
}

/// `P(S ≥ n)` for `n = 1, …, n_max`.
///
/// `A(k, s)` is the probability that some block ends at partial sum `s` with
/// value `k` (before the stopping coin). Tails are summed over the block
/// that first crosses `n`, so small tails carry no cancellation.
pub fn exact_tail_dp(spec: &RenewalSpec, n_max: usize) -> Result<ExactTails> {
    exact_tail_dp_with_budget(spec, n_max, DEFAULT_STATE_BUDGET)
}

pub fn exact_tail_dp_with_budget(spec: &RenewalSpec, n_max: usize, budget: usize) -> Result<ExactTails> {
    spec.validate()?;
    if n_max == 0 {
        return Err(Error::param("n_max must be at least 1"));
    }
    if spec.value_cap < n_max {
        return Err(Error::param(format!(
            "value_cap {} is below n_max {n_max}",
            spec.value_cap
        )));
    }
    let states = n_max.saturating_mul(spec.value_cap);
    if states > budget {
        return Err(Error::Resource { states, budget });
    }
    let kernel = Kernel::new(spec);
    let n0 = spec.n0;
    let go_on = 1.0 - spec.theta;
    let width = n_max + 1;

    // trans[v * width + k] = P(X = v | prev k); cross[m * width + k] = P(X ≥ m | prev k).
    let mut trans = vec![0.0; width * width];
    let mut cross = vec![0.0; (width + 1) * width];
    for k in n0..width {
        for v in n0..width {
            trans[v * width + k] = kernel.cond_pmf(k, v);
        }
        for m in 1..=width {
            cross[m * width + k] = kernel.cond_tail(k, m);
        }
    }

    let mut a: Vec<Vec<f64>> = Vec::with_capacity(width);
    a.push(Vec::new());
    let mut point = Vec::with_capacity(n_max);
    for s in 1..width {
        let mut row = vec![0.0; s + 1];
        for k in n0..=s {
            let prev = &a[s - k];
            let t = &trans[k * width..(k + 1) * width];
            let carried: f64 = prev.iter().zip(t).map(|(x, y)| x * y).sum();
            row[k] = go_on * carried + if k == s { kernel.first_pmf(k) } else { 0.0 };
        }
        point.push(spec.theta * row.iter().sum::<f64>());
        a.push(row);
    }

    let crossing_tail = |n: usize| -> f64 {
        let mut t = kernel.first_tail(n);
        for (s, row) in a.iter().enumerate().take(n).skip(1) {
            let c = &cross[(n - s) * width..(n - s + 1) * width];
            t += go_on * row.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
        }
        t.min(1.0)
    };
    let tails: Vec<f64> = (1..=n_max).map(crossing_tail).collect();
    let beyond = crossing_tail(n_max + 1);

    let mut residual = 0.0f64;
    let mut below = 0.0;
    for n in 1..=n_max {
        residual = residual.max((tails[n - 1] - (1.0 - below)).abs());
        below += point[n - 1];
    }
    residual = residual.max((beyond - (1.0 - below)).abs());

    Ok(ExactTails {
        tails,
        point,
        beyond,
        residual,
    })
}

/// Draws of `S` with block values above `value_cap` recorded as
/// `value_cap + 1`; the events `{S ≥ n}` for `n ≤ value_cap + 1` keep their
/// exact probabilities.
pub struct RenewalSampler<'a> {
    kernel: Kernel<'a>,
}

impl<'a> RenewalSampler<'a> {
    pub fn new(spec: &'a RenewalSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            kernel: Kernel::new(spec),
        })
    }

    // n0 + #{ℓ ∈ [1, top] : tail(ℓ) > u}, the inverse of the tail at u.
    fn invert(&self, u: f64, tail: impl Fn(usize) -> f64) -> usize {
        let n0 = self.kernel.n0();
        let top = self.kernel.spec.value_cap + 1 - n0;
        let (mut lo, mut hi) = (0usize, top);
        if tail(top) > u {
            return n0 + top;
        }
        // tail(lo) > u ≥ tail(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if tail(mid) > u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        n0 + lo
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        let k = &self.kernel;
        let n0 = k.n0();
        let mut x = self.invert(rng.gen(), |l| k.spec.r_hat.value(l));
        let mut s = x as u64;
        while rng.gen::<f64>() >= k.spec.theta {
            let prev = x;
            x = self.invert(rng.gen(), |l| k.h_hat(prev, l));
            s += x as u64;
            debug_assert!(x >= n0);
        }
        s
    }
}

/// One draw of `S`.
pub fn sample_s(spec: &RenewalSpec, rng: &mut StreamRng) -> Result<u64> {
    Ok(RenewalSampler::new(spec)?.sample(rng))
}

/// Empirical `P(S ≥ n)` at each `n` from `samples` draws.
pub fn mc_tails(spec: &RenewalSpec, ns: &[usize], samples: usize, seed: u64) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(Error::param("need at least one sample"));
    }
    let sampler = RenewalSampler::new(spec)?;
    let counts = par_blocks(seed, samples, |rng, len| {
        let mut c = vec![0u64; ns.len()];
        for _ in 0..len {
            let s = sampler.sample(rng);
            for (ci, &n) in c.iter_mut().zip(ns) {
                if s >= n as u64 {
                    *ci += 1;
                }
            }
        }
        c
    });
    let mut total = vec![0u64; ns.len()];
    for c in counts {
        for (t, x) in total.iter_mut().zip(c) {
            *t += x;
        }
    }
    Ok(total.into_iter().map(|c| c as f64 / samples as f64).collect())
}

/// Exact and Monte Carlo tails at the same points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailComparison {
    pub n: Vec<usize>,
    pub exact: Vec<f64>,
    pub mc: Vec<f64>,
    /// `|mc − exact| / se`, with `se = sqrt(p(1−p)/samples)` at the exact `p`.
    pub z: Vec<f64>,
    pub samples: usize,
}

impl TailComparison {
    pub fn max_z(&self) -> f64 {
        self.z.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn compare_tails(exact: &ExactTails, ns: &[usize], spec: &RenewalSpec, samples: usize, seed: u64) -> Result<TailComparison> {
    if let Some(&n) = ns.iter().find(|&&n| n == 0 || n > exact.n_max()) {
        return Err(Error::Index {
            index: n,
            len: exact.n_max(),
        });
    }
    let mc = mc_tails(spec, ns, samples, seed)?;
    let ex: Vec<f64> = ns.iter().map(|&n| exact.tail(n)).collect();
    let z = ex
        .iter()
        .zip(&mc)
        .map(|(&p, &q)| {
            let se = (p * (1.0 - p) / samples as f64).sqrt();
            if se > 0.0 {
                (q - p).abs() / se
            } else if q == p {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(TailComparison {
        n: ns.to_vec(),
        exact: ex,
        mc,
        z,
        samples,
    })
}

/// Whether a positive series has levelled off: the maximum over its last
/// `1 − split` fraction stays within `slack` of the maximum before it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stabilization {
    pub early_max: f64,
    pub late_max: f64,
    pub overall_max: f64,
    pub slack: f64,
    pub passed: bool,
}

impl Stabilization {
    /// `late` selects the entries that form the final stretch.
    pub fn assess(values: &[f64], late: impl Fn(usize) -> bool, slack: f64) -> Self {
        let (mut early_max, mut late_max) = (0.0f64, 0.0f64);
        for (i, &v) in values.iter().enumerate() {
            if late(i) {
                late_max = late_max.max(v);
            } else {
                early_max = early_max.max(v);
            }
        }
        let overall_max = early_max.max(late_max);
        let passed = overall_max.is_finite() && early_max > 0.0 && late_max <= slack * early_max;
        Self {
            early_max,
            late_max,
            overall_max,
            slack,
            passed,
        }
    }
}

/// Outcome of a renewal tail verification.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub n: Vec<usize>,
    pub tail: Vec<f64>,
    /// Normalized tail or fitted-constant series, depending on the check.
    pub statistic: Vec<f64>,
    pub stabilization: Option<Stabilization>,
    pub fit: Option<Fit>,
    /// The bound evaluated at each `n` (with the fitted constant), when the
    /// check has one.
    pub bound: Vec<f64>,
    pub passed: bool,
}

fn range_points(n_range: (usize, usize), n_max: usize) -> Result<Vec<usize>> {
    let (lo, hi) = n_range;
    if lo == 0 || hi < lo || hi > n_max {
        return Err(Error::param(format!("bad n range [{lo}, {hi}] for n_max {n_max}")));
    }
    Ok((lo..=hi).collect())
}

/// Last quarter of the range against the first three quarters.
fn last_quarter(len: usize) -> impl Fn(usize) -> bool {
    let start = len - len / 4;
    move |i| i >= start
}

/// Power tails: `n^{β'} P(S ≥ n)` over `n_range` must level off (last
/// quarter within 5% of the earlier maximum).
pub fn verify_stail(spec: &RenewalSpec, beta: f64, beta_prime: f64, n_range: (usize, usize)) -> Result<TailReport> {
    if !(beta > 1.0 && beta_prime > 0.0 && beta_prime <= beta) {
        return Err(Error::param("need beta > 1 and beta' in (0, beta]"));
    }
    let exact = exact_tail_dp(spec, n_range.1)?;
    let n = range_points(n_range, exact.n_max())?;
    let tail: Vec<f64> = n.iter().map(|&k| exact.tail(k)).collect();
    let statistic: Vec<f64> = n.iter().zip(&tail).map(|(&k, t)| t * (k as f64).powf(beta_prime)).collect();
    let stab = Stabilization::assess(&statistic, last_quarter(n.len()), 1.05);
    let bound = n.iter().map(|&k| stab.overall_max * (k as f64).powf(-beta_prime)).collect();
    Ok(TailReport {
        n,
        tail,
        statistic,
        stabilization: Some(stab),
        fit: None,
        bound,
        passed: stab.passed,
    })
}

/// `Σ_{j≥1} r̂(j)`, or an error when the tail is not summable.
fn tail_total(r: &TailFunction) -> Result<f64> {
    use crate::density::Extrapolation;
    let len = r.values().len();
    let tabulated: f64 = r.values().iter().sum();
    let last = r.values().last().copied().unwrap_or(0.0);
    let rest = match r.extrapolation() {
        Extrapolation::Zero => 0.0,
        Extrapolation::Power { exponent } => {
            if exponent <= 1.0 {
                return Err(Error::param("tail with exponent ≤ 1 is not summable"));
            }
            // Direct terms, then the integral with a midpoint correction.
            let stop = (len * 64).max(1 << 16);
            let direct: f64 = (len + 1..=stop).rev().map(|j| r.value(j)).sum();
            let far = last * (len as f64).powf(exponent) * (stop as f64 + 0.5).powf(1.0 - exponent) / (exponent - 1.0);
            direct + far
        }
        Extrapolation::StretchedExp { .. } => {
            let mut acc = 0.0;
            let mut j = len + 1;
            loop {
                let v = r.value(j);
                acc += v;
                if v < 1e-18 * acc.max(f64::MIN_POSITIVE) || v == 0.0 {
                    break;
                }
                j += 1;
            }
            acc
        }
    };
    Ok(tabulated + rest)
}

/// Summable first-block tails: for `n ≥ 2 n_0` the constant
/// `Ĉ_n = (P(S ≥ n) − r̂(⌊n/2⌋ − n_0))_+ n^β / Σ r̂(j)` must level off, and
/// the bound is evaluated with `Ĉ = max Ĉ_n`.
pub fn verify_stail_b(spec: &RenewalSpec, beta: f64, n_range: (usize, usize)) -> Result<TailReport> {
    if !(beta > 1.0) {
        return Err(Error::param("need beta > 1"));
    }
    let total = tail_total(&spec.r_hat)?;
    let lo = n_range.0.max(2 * spec.n0);
    let exact = exact_tail_dp(spec, n_range.1)?;
    let n = range_points((lo, n_range.1), exact.n_max())?;
    let tail: Vec<f64> = n.iter().map(|&k| exact.tail(k)).collect();
    let first = |k: usize| spec.r_hat.value((k / 2).saturating_sub(spec.n0));
    let statistic: Vec<f64> = n
        .iter()
        .zip(&tail)
        .map(|(&k, &t)| {
            if total > 0.0 {
                (t - first(k)).max(0.0) * (k as f64).powf(beta) / total
            } else {
                0.0
            }
        })
        .collect();
    let stab = Stabilization::assess(&statistic, last_quarter(n.len()), 1.05);
    let c = stab.overall_max;
    let bound: Vec<f64> = n.iter().map(|&k| first(k) + c * (k as f64).powf(-beta) * total).collect();
    let holds = tail.iter().zip(&bound).all(|(t, b)| *t <= b * (1.0 + 1e-12));
    // A tail that never exceeds the first-block term needs no constant.
    let passed = holds && (stab.passed || stab.overall_max == 0.0);
    Ok(TailReport {
        n,
        tail,
        statistic,
        stabilization: Some(stab),
        fit: None,
        bound,
        passed,
    })
}

/// Stretched-exponential tails: `log P(S ≥ n)` against `n^β` must be a line
/// with negative slope and `r² ≥ 0.98`.
pub fn verify_stail_exp(spec: &RenewalSpec, beta: f64, n_range: (usize, usize)) -> Result<TailReport> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::param("need beta in (0, 1]"));
    }
    let exact = exact_tail_dp(spec, n_range.1)?;
    let n = range_points(n_range, exact.n_max())?;
    let tail: Vec<f64> = n.iter().map(|&k| exact.tail(k)).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = n
        .iter()
        .zip(&tail)
        .filter(|(_, &t)| t > 0.0)
        .map(|(&k, &t)| ((k as f64).powf(beta), t.ln()))
        .unzip();
    let fit = linear_fit(&xs, &ys)?;
    let statistic = n.iter().map(|&k| (k as f64).powf(beta)).collect();
    let bound = n
        .iter()
        .map(|&k| (fit.intercept + fit.slope * (k as f64).powf(beta)).exp())
        .collect();
    Ok(TailReport {
        passed: fit.slope < 0.0 && fit.r_squared >= 0.98,
        n,
        tail,
        statistic,
        stabilization: None,
        fit: Some(fit),
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Extrapolation;
    use crate::rng::seed_stream;

    fn deterministic(theta: f64, n0: usize, cap: usize) -> RenewalSpec {
        RenewalSpec {
            theta,
            n0,
            r_hat: TailFunction::zero(),
            h_family: BlockTails::Independent {
                tail: TailFunction::zero(),
            },
            value_cap: cap,
        }
    }

    #[test]
    fn unit_blocks_give_geometric_sum() {
        let spec = deterministic(0.5, 1, 10);
        let t = exact_tail_dp(&spec, 10).unwrap();
        for n in 1..=10 {
            let want = 0.5f64.powi(n as i32 - 1);
            assert!((t.tail(n) - want).abs() < 1e-15, "{n}: {}", t.tail(n));
        }
        assert!(t.residual < 1e-15);
    }

    #[test]
    fn single_block_when_theta_is_one() {
        let spec = RenewalSpec::power(1.0, 2, 3.0, 2.0, 1.0, 100).unwrap();
        let t = exact_tail_dp(&spec, 100).unwrap();
        for n in 1..=100usize {
            let want = spec.r_hat.value(n.saturating_sub(2));
            assert!((t.tail(n) - want).abs() < 1e-15, "{n}");
        }
        let mut rng = seed_stream(5, 0);
        let spec = deterministic(1.0, 3, 10);
        let s = RenewalSampler::new(&spec).unwrap();
        assert!((0..100).all(|_| s.sample(&mut rng) == 3));
    }

    #[test]
    fn dp_tails_start_at_one_and_decrease() {
        let spec = RenewalSpec::power(0.3, 2, 3.0, 2.0, 1.0, 300).unwrap();
        let t = exact_tail_dp(&spec, 300).unwrap();
        assert_eq!(t.tail(1), 1.0);
        assert!((t.tail(2) - 1.0).abs() < 1e-15);
        assert!(t.tails.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-14)));
        assert!(t.residual < 1e-12, "{}", t.residual);
        let mass: f64 = t.point.iter().sum::<f64>() + t.beyond;
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let spec = RenewalSpec::power(0.3, 1, 3.0, 2.0, 1.0, 1000).unwrap();
        assert!(matches!(
            exact_tail_dp_with_budget(&spec, 1000, 10_000),
            Err(Error::Resource { .. })
        ));
        assert!(exact_tail_dp(&spec, 1001).is_err());
    }

    #[test]
    fn pmf_matches_tail_differences() {
        let spec = RenewalSpec::power(0.3, 1, 3.0, 2.0, 1.0, 200).unwrap();
        let k = Kernel::new(&spec);
        for prev in [1, 5, 50, 200] {
            let total: f64 = (1..=200).map(|v| k.cond_pmf(prev, v)).sum::<f64>() + k.cond_tail(prev, 201);
            assert!((total - 1.0).abs() < 1e-12, "{prev}: {total}");
            for v in 2..100 {
                let diff = k.cond_tail(prev, v) - k.cond_tail(prev, v + 1);
                assert!((k.cond_pmf(prev, v) - diff).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mc_matches_dp_on_small_spec() {
        let spec = RenewalSpec::power(0.5, 1, 3.0, 2.0, 1.0, 200).unwrap();
        let exact = exact_tail_dp(&spec, 200).unwrap();
        let ns = [1, 2, 3, 5, 10, 20, 50, 100, 200];
        let cmp = compare_tails(&exact, &ns, &spec, 100_000, 11).unwrap();
        assert!(cmp.max_z() < 4.0, "{cmp:?}");
    }

    #[test]
    fn stretched_exponential_is_linear_in_root() {
        let spec = RenewalSpec::stretched_exp(0.5, 1, 1.0, 0.5, 1.0, 600).unwrap();
        let r = verify_stail_exp(&spec, 0.5, (20, 600)).unwrap();
        assert!(r.passed, "{:?}", r.fit);
        let fit = r.fit.unwrap();
        assert!(fit.slope < -0.3, "{fit:?}");
    }

    #[test]
    fn power_tails_level_off() {
        for bp in [3.0, 0.5] {
            let spec = RenewalSpec::power(0.5, 1, 3.0, bp, 1.0, 800).unwrap();
            let r = verify_stail(&spec, 3.0, bp, (10, 800)).unwrap();
            assert!(r.passed, "{bp}: {:?}", r.stabilization);
        }
    }

    #[test]
    fn finite_first_block_is_dominated_by_power_term() {
        let spec = RenewalSpec {
            theta: 0.4,
            n0: 1,
            r_hat: TailFunction::new(vec![1.0, 0.5, 0.25], Extrapolation::Zero).unwrap(),
            h_family: BlockTails::TailSum {
                h: TailFunction::power(1.0, 3.0, 600).unwrap(),
                c_h: 1.0,
            },
            value_cap: 600,
        };
        let r = verify_stail_b(&spec, 3.0, (1, 600)).unwrap();
        assert_eq!(r.n[0], 2);
        assert!(r.passed, "{:?}", r.stabilization);
        assert!(tail_total(&TailFunction::power(1.0, 1.0, 10).unwrap()).is_err());
    }

    #[test]
    fn power_tail_total() {
        let t = tail_total(&TailFunction::power(1.0, 2.0, 50).unwrap()).unwrap();
        assert!((t - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-9, "{t}");
    }
}
