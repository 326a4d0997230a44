//! The intermittent map family
//!
//! ```text
//! T(x) = x (1 + 2^γ x^γ)   for x ≤ 1/2
//! T(x) = 2x − 1            for x > 1/2
//! ```
//!
//! together with its branch inverses, finite nonstationary compositions and
//! generators for parameter sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance of the left-branch inversion.
pub const INVERSE_TOL: f64 = 1e-14;

const INVERSE_MAX_ITER: usize = 200;

/// `x^γ` with `0^γ = 0`, computed as `exp(γ ln x)`.
#[inline]
pub(crate) fn pow_gamma(x: f64, gamma: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (gamma * x.ln()).exp()
    }
}

/// One map of the family, fixed by its intermittency parameter `γ ∈ (0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LsvMap {
    gamma: f64,
    two_pow_gamma: f64,
}

/// The two monotone branches of a map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// `[0, 1/2] → [0, 1]`, the branch with the neutral fixed point.
    Left,
    /// `(1/2, 1] → (0, 1]`, affine.
    Right,
}

impl LsvMap {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::domain(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        Ok(Self {
            gamma,
            two_pow_gamma: 2f64.powf(gamma),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Evaluates the map, rejecting points outside `[0, 1]`.
    pub fn apply(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.step(x))
    }

    /// Evaluates the map without validating `x`.
    #[inline]
    pub fn step(&self, x: f64) -> f64 {
        if x <= 0.5 {
            x * (1.0 + self.two_pow_gamma * pow_gamma(x, self.gamma))
        } else {
            2.0 * x - 1.0
        }
    }

    /// Analytic derivative; `1/2` belongs to the left branch.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.derivative_unchecked(x))
    }

    #[inline]
    pub(crate) fn derivative_unchecked(&self, x: f64) -> f64 {
        if x <= 0.5 {
            1.0 + self.two_pow_gamma * (1.0 + self.gamma) * pow_gamma(x, self.gamma)
        } else {
            2.0
        }
    }

    /// Preimage of `y` under the chosen branch.
    pub fn inverse_branch(&self, branch: Branch, y: f64) -> Result<f64> {
        check_unit(y)?;
        Ok(match branch {
            Branch::Right => 0.5 * (y + 1.0),
            Branch::Left => self.left_inverse(y),
        })
    }

    /// Inverse of the left branch by Newton's method safeguarded with
    /// bisection on the bracket `[0, 1/2]`.
    pub(crate) fn left_inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 0.5;
        }
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        // x(1 + c x^γ) = y; the fixed-point guess is already close for small y.
        let mut x = (y / (1.0 + self.two_pow_gamma * pow_gamma(y, self.gamma))).clamp(lo, hi);
        for _ in 0..INVERSE_MAX_ITER {
            let xg = pow_gamma(x, self.gamma);
            let f = x * (1.0 + self.two_pow_gamma * xg) - y;
            if f == 0.0 {
                return x;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let df = 1.0 + self.two_pow_gamma * (1.0 + self.gamma) * xg;
            let mut next = x - f / df;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - x).abs();
            x = next;
            if step <= INVERSE_TOL * x || hi - lo <= INVERSE_TOL * lo.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        x
    }
}

fn check_unit(x: f64) -> Result<()> {
    if x.is_finite() && (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("point {x} outside [0, 1]")))
    }
}

/// How a parameter sequence was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Constant,
    Explicit,
    Quasistatic,
}

/// Parameters `γ_1, γ_2, …` selecting the map at each step, all bounded by
/// a declared `γ*`. Position `k` (1-based) holds the parameter of `T_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSequence {
    gammas: Vec<f64>,
    gamma_star: f64,
    kind: SequenceKind,
}

impl ParameterSequence {
    pub fn new(gammas: Vec<f64>, gamma_star: f64, kind: SequenceKind) -> Result<Self> {
        if !(gamma_star > 0.0 && gamma_star < 1.0) {
            return Err(Error::domain(format!(
                "gamma_star must lie in (0, 1), got {gamma_star}"
            )));
        }
        if let Some((i, g)) = gammas
            .iter()
            .enumerate()
            .find(|(_, &g)| !(g > 0.0 && g <= gamma_star))
        {
            return Err(Error::domain(format!(
                "entry {} = {g} outside (0, {gamma_star}]",
                i + 1
            )));
        }
        Ok(Self {
            gammas,
            gamma_star,
            kind,
        })
    }

    pub fn constant(gamma: f64, gamma_star: f64, len: usize) -> Result<Self> {
        Self::new(vec![gamma; len], gamma_star, SequenceKind::Constant)
    }

    pub fn explicit(gammas: Vec<f64>, gamma_star: f64) -> Result<Self> {
        Self::new(gammas, gamma_star, SequenceKind::Explicit)
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn gamma_star(&self) -> f64 {
        self.gamma_star
    }

    /// Rate exponent `β = 1/γ*`.
    pub fn beta(&self) -> f64 {
        1.0 / self.gamma_star
    }

    pub fn kind(&self) -> &SequenceKind {
        &self.kind
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// Parameter of `T_k`, `k ≥ 1`.
    pub fn gamma(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.len() {
            return Err(Error::Index {
                index: k,
                len: self.len(),
            });
        }
        Ok(self.gammas[k - 1])
    }

    /// The map `T_k`, `k ≥ 1`.
    pub fn map(&self, k: usize) -> Result<LsvMap> {
        LsvMap::new(self.gamma(k)?)
    }

    /// All maps in order, `T_1, T_2, …`.
    pub fn maps(&self) -> Vec<LsvMap> {
        self.gammas
            .iter()
            .map(|&g| LsvMap::new(g).expect("validated on construction"))
            .collect()
    }

    /// The sequence `T_{s+1}, T_{s+2}, …`.
    pub fn shifted(&self, s: usize) -> Self {
        Self {
            gammas: self.gammas[s.min(self.len())..].to_vec(),
            gamma_star: self.gamma_star,
            kind: self.kind.clone(),
        }
    }

    /// Stable identifier of the entries and bound, used to match derived
    /// objects (partitions) to the sequence they came from.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write(&self.gamma_star.to_bits().to_le_bytes());
        for g in &self.gammas {
            h.write(&g.to_bits().to_le_bytes());
        }
        h.finish()
    }
}

/// `T_l ∘ ⋯ ∘ T_k (x)`; the identity when `k > l`.
pub fn compose_apply(seq: &ParameterSequence, k: usize, l: usize, x: f64) -> Result<f64> {
    check_unit(x)?;
    if k > l {
        return Ok(x);
    }
    if k == 0 || l > seq.len() {
        return Err(Error::Index {
            index: if k == 0 { 0 } else { l },
            len: seq.len(),
        });
    }
    let maps = seq.maps();
    Ok(maps[k - 1..l].iter().fold(x, |y, m| m.step(y)))
}

/// Level `n` of a quasistatic array: `γ_{n,k} = Γ(k/n)` for `k = 0, …, n`.
///
/// The returned sequence lists the entries in order of `k`, so its first map
/// uses `Γ(0)`.
pub fn quasistatic_sequence(
    curve: &dyn Fn(f64) -> f64,
    n: usize,
    gamma_star: f64,
) -> Result<ParameterSequence> {
    if n == 0 {
        return Err(Error::domain("quasistatic level n must be at least 1"));
    }
    let gammas: Vec<f64> = (0..=n).map(|k| curve(k as f64 / n as f64)).collect();
    ParameterSequence::new(gammas, gamma_star, SequenceKind::Quasistatic)
}

/// Catalog of named parameter curves `Γ: [0, 1] → (0, γ*]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "curve", rename_all = "snake_case", deny_unknown_fields)]
pub enum Curve {
    Constant { value: f64 },
    Linear { start: f64, end: f64 },
    /// `mid + amplitude · sin(2π · periods · t)`
    Sine { mid: f64, amplitude: f64, periods: f64 },
}

impl Curve {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Curve::Constant { value } => value,
            Curve::Linear { start, end } => start + (end - start) * t,
            Curve::Sine {
                mid,
                amplitude,
                periods,
            } => mid + amplitude * (2.0 * std::f64::consts::PI * periods * t).sin(),
        }
    }
}

/// FNV-1a, enough for fingerprints.
pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}
