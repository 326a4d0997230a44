//! Quadratic variation along renewal-like block sequences
//!
//! ```text
//! σ = Σ_{n≥0} (a_{r_{n−1}} + ⋯ + a_{r_n − 1})²
//! ω = Σ_{n≥0} (Σ_{j≥1} a_{r_n + j − 1} min{τ_n j^{−β}, j^{−β+1}})²
//! ```
//!
//! with `r_{−1} = 0` and `r_n = τ_0 + ⋯ + τ_n`, and two deterministic
//! inequalities used to bound them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::renewal::Stabilization;
use crate::rng::{par_blocks, seed_stream};

/// Inverse-CDF draws of block lengths with exact tails
/// `P(τ_0 ≥ ℓ) = min(1, c_τ ℓ^{−β+1})` and `P(τ_n ≥ ℓ) = min(1, c_τ ℓ^{−β})`
/// for `ℓ ≥ 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauSampler {
    beta: f64,
    c_tau: f64,
}

impl TauSampler {
    pub fn new(beta: f64, c_tau: f64) -> Result<Self> {
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::param(format!("beta = {beta} must exceed 1")));
        }
        if !(c_tau > 0.0 && c_tau.is_finite()) {
            return Err(Error::param("c_tau must be positive"));
        }
        Ok(Self { beta, c_tau })
    }

    /// Largest `ℓ ≥ 1` with `c_τ ℓ^{−p} > u`, so `P(τ ≥ ℓ) = min(1, c_τ ℓ^{−p})`.
    #[inline]
    pub fn invert(&self, u: f64, p: f64) -> u64 {
        if u <= 0.0 {
            return u64::MAX;
        }
        let t = (self.c_tau / u).powf(1.0 / p);
        // Saturates for astronomically long blocks.
        ((t.ceil() - 1.0).max(1.0)) as u64
    }

    pub fn draw_first(&self, rng: &mut impl Rng) -> u64 {
        self.invert(1.0 - rng.gen::<f64>(), self.beta - 1.0)
    }

    pub fn draw(&self, rng: &mut impl Rng) -> u64 {
        self.invert(1.0 - rng.gen::<f64>(), self.beta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TauSequence {
    pub taus: Vec<u64>,
    pub beta: f64,
    pub c_tau: f64,
}

impl TauSequence {
    /// Partial sums `r_0, r_1, …`.
    pub fn renewals(&self) -> Vec<u64> {
        self.taus
            .iter()
            .scan(0u64, |r, &t| {
                *r = r.saturating_add(t);
                Some(*r)
            })
            .collect()
    }
}

/// `τ_0, …, τ_{length−1}` from stream 0 of `seed`.
pub fn sample_tau_sequence(beta: f64, c_tau: f64, length: usize, seed: u64) -> Result<TauSequence> {
    let s = TauSampler::new(beta, c_tau)?;
    let mut rng = seed_stream(seed, 0);
    let taus = (0..length)
        .map(|i| if i == 0 { s.draw_first(&mut rng) } else { s.draw(&mut rng) })
        .collect();
    Ok(TauSequence { taus, beta, c_tau })
}

/// `(σ, ω)` for a finitely supported `a`; `taus` must cover the support.
pub fn sigma_omega(a: &[f64], taus: &TauSequence, beta: f64) -> Result<(f64, f64)> {
    let eval = QvEvaluator::new(a, beta)?;
    let mut it = taus.taus.iter().copied();
    eval.evaluate(|| it.next())
        .ok_or_else(|| Error::param("tau sequence ends before the support of a"))
}

/// `σ` and `ω` for one weight sequence, reusable across τ draws.
struct QvEvaluator<'a> {
    a: &'a [f64],
    beta: f64,
    prefix: Vec<f64>,
    // Set when `a` is constant on its support: partial sums of j^{1−β} and
    // j^{−β} give ω in O(1) per block.
    constant: Option<(f64, Vec<f64>, Vec<f64>)>,
}

impl<'a> QvEvaluator<'a> {
    fn new(a: &'a [f64], beta: f64) -> Result<Self> {
        if !(beta > 1.0) {
            return Err(Error::param("beta must exceed 1"));
        }
        if a.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::param("a must be nonnegative and finite"));
        }
        let mut prefix = Vec::with_capacity(a.len() + 1);
        prefix.push(0.0);
        for &x in a {
            prefix.push(prefix.last().unwrap() + x);
        }
        let constant = match a.first() {
            Some(&c) if a.iter().all(|&x| x == c) => {
                let partial = |p: f64| {
                    let mut z = vec![0.0; a.len() + 1];
                    for j in 1..=a.len() {
                        z[j] = z[j - 1] + (j as f64).powf(-p);
                    }
                    z
                };
                Some((c, partial(beta - 1.0), partial(beta)))
            }
            _ => None,
        };
        Ok(Self {
            a,
            beta,
            prefix,
            constant,
        })
    }

    /// `Σ_{j≥1} a_{r+j−1} min{τ j^{−β}, j^{−β+1}}`.
    fn omega_block(&self, r: usize, tau: u64) -> f64 {
        let len = self.a.len();
        if r >= len {
            return 0.0;
        }
        let reach = len - r;
        if let Some((c, z1, z0)) = &self.constant {
            let m = (tau.min(reach as u64)) as usize;
            return c * (z1[m] + tau as f64 * (z0[reach] - z0[m]));
        }
        let t = tau as f64;
        (1..=reach)
            .map(|j| {
                let jf = j as f64;
                self.a[r + j - 1] * (t * jf.powf(-self.beta)).min(jf.powf(1.0 - self.beta))
            })
            .sum()
    }

    /// Pulls block lengths until the support is covered; `None` if they run
    /// out first.
    fn evaluate(&self, mut next_tau: impl FnMut() -> Option<u64>) -> Option<(f64, f64)> {
        let len = self.a.len() as u64;
        let (mut sigma, mut omega) = (0.0, 0.0);
        let mut start = 0u64;
        while start < len {
            let tau = next_tau()?;
            let end = start.saturating_add(tau);
            let block = self.prefix[end.min(len) as usize] - self.prefix[start as usize];
            sigma += block * block;
            let w = self.omega_block(end.min(len) as usize, tau);
            omega += w * w;
            start = end;
        }
        Some((sigma, omega))
    }
}

/// Weight sequences for [`qv_moment_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum QvFamily {
    /// `a ≡ 1` on `0, …, N − 1`.
    Ones,
    /// `a_n = (n + 1)^{−exponent}` on `0, …, N − 1`.
    Decaying { exponent: f64 },
}

impl QvFamily {
    pub fn weights(&self, len: usize) -> Vec<f64> {
        match self {
            QvFamily::Ones => vec![1.0; len],
            QvFamily::Decaying { exponent } => (0..len).map(|n| ((n + 1) as f64).powf(-exponent)).collect(),
        }
    }
}

/// Ratios of the moment to its bound at one length.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QvPoint {
    pub len: usize,
    pub sigma_norm: f64,
    pub sigma_rhs: f64,
    pub sigma_ratio: f64,
    pub omega_norm: f64,
    pub omega_rhs: f64,
    pub omega_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QvReport {
    pub beta: f64,
    pub points: Vec<QvPoint>,
    pub sigma: Stabilization,
    pub omega: Stabilization,
    pub passed: bool,
}

/// Fewest samples above `t` for `t` to enter the supremum in [`weak_norm`];
/// the top order statistics alone would dominate it.
pub const WEAK_NORM_MIN_COUNT: usize = 16;

/// `(sup_t t^p P(X > t))^{1/p}` over a log-spaced grid of `t`.
pub fn weak_norm(samples: &[f64], p: f64) -> f64 {
    let mut xs: Vec<f64> = samples.iter().copied().filter(|x| *x > 0.0).collect();
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    const POINTS: usize = 400;
    let mut best = 0.0f64;
    for i in 0..POINTS {
        // Just below each grid point, so the top sample still counts.
        let t = lo * (hi / lo).powf(i as f64 / (POINTS - 1) as f64) * (1.0 - 1e-12);
        let above = xs.len() - xs.partition_point(|&x| x <= t);
        if above < WEAK_NORM_MIN_COUNT.min(xs.len()) {
            break;
        }
        best = best.max(t.powf(p) * above as f64 / n);
    }
    best.powf(1.0 / p)
}

fn moment_norm(samples: &[f64], p: f64) -> f64 {
    let m = samples.iter().map(|x| x.abs().powf(p)).sum::<f64>() / samples.len() as f64;
    m.powf(1.0 / p)
}

/// Monte Carlo check that `σ^{1/2}` and `ω^{1/2}` stay within a constant of
/// their bounds as the weight sequence grows:
///
/// * `β < 2`: `‖σ^{1/2}‖_{β,∞}` and `‖ω^{1/2}‖_β` against `(Σ a_n^β)^{1/β}`;
/// * `β = 2`: `‖σ^{1/2}‖_2` against `(Σ a_n²(1 + log(n+1)))^{1/2}` and
///   `‖ω^{1/2}‖_2` against `(Σ a_n²)^{1/2}`;
/// * `β > 2`: `‖σ^{1/2}‖_{2(β−1)}` against `(Σ a_n²)^{1/2}` and `max ω^{1/2}`
///   against `(Σ_{n≥1} a_n²)^{1/2}`.
///
/// Passes when for both ratio series the maximum over lengths within the
/// last decade stays below `1.1 ×` the maximum over shorter lengths.
pub fn qv_moment_check(
    beta: f64,
    c_tau: f64,
    family: &QvFamily,
    lens: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<QvReport> {
    let sampler = TauSampler::new(beta, c_tau)?;
    if lens.is_empty() || lens.contains(&0) {
        return Err(Error::param("need positive sequence lengths"));
    }
    if n_samples == 0 {
        return Err(Error::param("need at least one sample"));
    }
    let mut points = Vec::with_capacity(lens.len());
    for (li, &len) in lens.iter().enumerate() {
        let a = family.weights(len);
        let eval = QvEvaluator::new(&a, beta)?;
        let stream_seed = seed ^ ((li as u64 + 1) << 40);
        let blocks = par_blocks(stream_seed, n_samples, |rng, count| {
            (0..count)
                .map(|_| {
                    let mut first = true;
                    eval.evaluate(|| {
                        let t = if first { sampler.draw_first(rng) } else { sampler.draw(rng) };
                        first = false;
                        Some(t)
                    })
                    .expect("draws never run out")
                })
                .collect::<Vec<_>>()
        });
        let (sig, om): (Vec<f64>, Vec<f64>) = blocks.into_iter().flatten().map(|(s, o)| (s.sqrt(), o.sqrt())).unzip();

        let sum_pow = |p: f64, from: usize| a.iter().skip(from).map(|x| x.powf(p)).sum::<f64>();
        let (sigma_norm, sigma_rhs, omega_norm, omega_rhs) = if beta < 2.0 {
            (
                weak_norm(&sig, beta),
                sum_pow(beta, 0).powf(1.0 / beta),
                moment_norm(&om, beta),
                sum_pow(beta, 1).powf(1.0 / beta),
            )
        } else if beta == 2.0 {
            let logw: f64 = a.iter().enumerate().map(|(n, x)| x * x * (1.0 + ((n + 1) as f64).ln())).sum();
            (moment_norm(&sig, 2.0), logw.sqrt(), moment_norm(&om, 2.0), sum_pow(2.0, 1).sqrt())
        } else {
            let sup = om.iter().cloned().fold(0.0, f64::max);
            (
                moment_norm(&sig, 2.0 * (beta - 1.0)),
                sum_pow(2.0, 0).sqrt(),
                sup,
                sum_pow(2.0, 1).sqrt(),
            )
        };
        let ratio = |x: f64, y: f64| if y > 0.0 { x / y } else { 0.0 };
        points.push(QvPoint {
            len,
            sigma_norm,
            sigma_rhs,
            sigma_ratio: ratio(sigma_norm, sigma_rhs),
            omega_norm,
            omega_rhs,
            omega_ratio: ratio(omega_norm, omega_rhs),
        });
    }
    let longest = *lens.iter().max().unwrap() as f64;
    let late = |i: usize| lens[i] as f64 >= longest / 10.0;
    let s: Vec<f64> = points.iter().map(|p| p.sigma_ratio).collect();
    let o: Vec<f64> = points.iter().map(|p| p.omega_ratio).collect();
    let sigma = Stabilization::assess(&s, late, 1.1);
    let omega = Stabilization::assess(&o, late, 1.1);
    Ok(QvReport {
        beta,
        passed: sigma.passed && omega.passed,
        points,
        sigma,
        omega,
    })
}

/// `Σ_{n∈ℤ} Σ_{k≥0} w_k (Σ_{j=n−k}^{n+k} a_j)^{2(β−1)}` and
/// `(Σ a_n²)^{β−1}`, with `a` indexed from `0` and zero elsewhere. The
/// weights must satisfy `Σ_{k≥n} w_k ≤ n^{−β}` for `n ≥ 1`.
pub fn lemma_fun_oracle(a: &[f64], w: &[f64], beta: f64) -> Result<(f64, f64)> {
    if !(beta > 2.0) {
        return Err(Error::param("lemma needs beta > 2"));
    }
    if w.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::param("weights must be nonnegative"));
    }
    let mut tail = 0.0;
    for n in (1..w.len()).rev() {
        tail += w[n];
        if tail > (n as f64).powf(-beta) * (1.0 + 1e-12) {
            return Err(Error::param(format!("Σ_(k≥{n}) w_k = {tail} exceeds n^(-β)")));
        }
    }
    let q = 2.0 * (beta - 1.0);
    let len = a.len() as i64;
    let mut prefix = vec![0.0; a.len() + 1];
    for (i, &x) in a.iter().enumerate() {
        prefix[i + 1] = prefix[i] + x;
    }
    let window = |lo: i64, hi: i64| {
        let lo = lo.clamp(0, len) as usize;
        let hi = (hi + 1).clamp(0, len) as usize;
        if hi > lo {
            prefix[hi] - prefix[lo]
        } else {
            0.0
        }
    };
    let k_max = w.len() as i64 - 1;
    let mut lhs = 0.0;
    for (k, &wk) in w.iter().enumerate() {
        if wk == 0.0 {
            continue;
        }
        let k = k as i64;
        let inner: f64 = (-k_max..len + k_max).map(|n| window(n - k, n + k).powf(q)).sum();
        lhs += wk * inner;
    }
    let rhs = a.iter().map(|x| x * x).sum::<f64>().powf(beta - 1.0);
    Ok((lhs, rhs))
}

/// `ζ(3, m) = Σ_{k≥m} k^{−3}` by Euler–Maclaurin from `m ≥ 20`.
fn zeta3_tail(m: usize) -> f64 {
    const START: usize = 20;
    let mut direct = 0.0;
    let mut m = m.max(1);
    while m < START {
        direct += (m as f64).powi(-3);
        m += 1;
    }
    let x = m as f64;
    direct + 0.5 / (x * x) + 0.5 / x.powi(3) + 0.25 / x.powi(4) - 1.0 / (12.0 * x.powi(6)) + 1.0 / (12.0 * x.powi(8))
        - 0.15 / x.powi(10)
}

/// `Σ_{n≥1} Σ_{k≥1} k^{−3} (a_n + ⋯ + a_{n+k−1})²` and
/// `Σ_{n≥1} a_n² (1 + log n)`, where `a[0]` is `a_1`; windows running past
/// the support are summed in closed form.
pub fn lemma_fun2_oracle(a: &[f64]) -> Result<(f64, f64)> {
    if a.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::param("a must be nonnegative and finite"));
    }
    let len = a.len();
    let mut lhs = 0.0;
    for n in 0..len {
        let mut s = 0.0;
        let mut inner = 0.0;
        for k in 1..=len - n {
            s += a[n + k - 1];
            inner += s * s / (k as f64).powi(3);
        }
        lhs += inner + s * s * zeta3_tail(len - n + 1);
    }
    let rhs = a
        .iter()
        .enumerate()
        .map(|(i, x)| x * x * (1.0 + ((i + 1) as f64).ln()))
        .sum();
    Ok((lhs, rhs))
}
