use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuation of a [`TailFunction`] past its last tabulated index `L`,
/// joined continuously to `r(L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Extrapolation {
    /// `r(ℓ) = r(L) (ℓ/L)^{-exponent}`.
    Power { exponent: f64 },
    /// `r(ℓ) = r(L) exp(-c (ℓ^beta - L^beta))`.
    StretchedExp { c: f64, beta: f64 },
    Zero,
}

/// A nonincreasing tail bound `ℓ ↦ r(ℓ) ∈ [0, 1]` for `ℓ ≥ 1`, with the
/// convention `r(0) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFunction {
    values: Vec<f64>,
    extrapolation: Extrapolation,
}

impl TailFunction {
    /// `values[i]` is `r(i + 1)`.
    pub fn new(values: Vec<f64>, extrapolation: Extrapolation) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param("tail values must lie in [0, 1]"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::param("tail values must be nonincreasing"));
        }
        match extrapolation {
            Extrapolation::Zero => {}
            Extrapolation::Power { exponent } => {
                if !(exponent > 0.0 && exponent.is_finite()) {
                    return Err(Error::param("power extrapolation needs a positive exponent"));
                }
            }
            Extrapolation::StretchedExp { c, beta } => {
                if !(c > 0.0 && c.is_finite() && beta > 0.0 && beta <= 1.0) {
                    return Err(Error::param("stretched exponential needs c > 0 and beta in (0, 1]"));
                }
            }
        }
        if values.is_empty() && extrapolation != Extrapolation::Zero {
            return Err(Error::param("extrapolation needs at least one tabulated value"));
        }
        Ok(Self { values, extrapolation })
    }

    /// `r ≡ 0` on `ℓ ≥ 1`.
    pub fn zero() -> Self {
        Self {
            values: Vec::new(),
            extrapolation: Extrapolation::Zero,
        }
    }

    /// `min(1, c ℓ^{-exponent})`, tabulated up to `len`.
    pub fn power(c: f64, exponent: f64, len: usize) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::param("scale must be nonnegative"));
        }
        let len = len.max(1);
        let values = (1..=len).map(|l| (c * (l as f64).powf(-exponent)).min(1.0)).collect();
        Self::new(values, Extrapolation::Power { exponent })
    }

    /// `min(1, a exp(-c ℓ^beta))`, tabulated up to `len`.
    pub fn stretched_exp(a: f64, c: f64, beta: f64, len: usize) -> Result<Self> {
        if !(a >= 0.0) {
            return Err(Error::param("scale must be nonnegative"));
        }
        let len = len.max(1);
        let values = (1..=len)
            .map(|l| (a * (-c * (l as f64).powf(beta)).exp()).min(1.0))
            .collect();
        Self::new(values, Extrapolation::StretchedExp { c, beta })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn extrapolation(&self) -> Extrapolation {
        self.extrapolation
    }

    pub fn value(&self, l: usize) -> f64 {
        if l == 0 {
            return 1.0;
        }
        let len = self.values.len();
        if l <= len {
            return self.values[l - 1];
        }
        let last = match self.values.last() {
            Some(&v) => v,
            None => return 0.0,
        };
        let (lf, lenf) = (l as f64, len as f64);
        match self.extrapolation {
            Extrapolation::Zero => 0.0,
            Extrapolation::Power { exponent } => last * (lf / lenf).powf(-exponent),
            Extrapolation::StretchedExp { c, beta } => {
                last * (-c * (lf.powf(beta) - lenf.powf(beta))).exp()
            }
        }
    }

    /// `[r(0), r(1), …, r(len)]`.
    pub fn table(&self, len: usize) -> Vec<f64> {
        (0..=len).map(|l| self.value(l)).collect()
    }
}

const DIRECT_SUM_MAX: usize = 64;

/// `ℓ ↦ min(1, C_h Σ_{j=0}^{n} h(j + ℓ))`, tabulated on the same range as `h`
/// and continued with the same rule.
pub fn tail_sum(h: &TailFunction, n: usize, c_h: f64) -> Result<TailFunction> {
    if !(c_h > 0.0 && c_h.is_finite()) {
        return Err(Error::param("C_h must be positive"));
    }
    let len = h.values().len().max(1);
    let mut values: Vec<f64> = if n < DIRECT_SUM_MAX {
        (1..=len)
            .map(|l| (c_h * (0..=n).map(|j| h.value(j + l)).sum::<f64>()).min(1.0))
            .collect()
    } else {
        // suffix[i] = Σ_{m=i+1}^{len+n} h(m), accumulated from the small end.
        let mut suffix = vec![0.0; len + n + 1];
        for m in (1..=len + n).rev() {
            suffix[m - 1] = suffix[m] + h.value(m);
        }
        (1..=len)
            .map(|l| {
                let upper = suffix.get(l + n).copied().unwrap_or(0.0);
                (c_h * (suffix[l - 1] - upper)).min(1.0)
            })
            .collect()
    };
    // Rounding in the suffix differences can break monotonicity by an ulp.
    for i in 1..values.len() {
        if values[i] > values[i - 1] {
            values[i] = values[i - 1];
        }
    }
    TailFunction::new(values, h.extrapolation())
}
