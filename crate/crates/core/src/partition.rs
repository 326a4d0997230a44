//! First-entry partition of `(0, 1/2]` and first-return partition of
//! `Y = (1/2, 1]` for a nonstationary composition.
//!
//! Both are computed backwards through left-branch inverses, which contract
//! toward the neutral fixed point; forward iteration would lose the points
//! near `0` to cancellation.

use crate::density::GridDensity;
use crate::error::{Error, Result};
use crate::map::ParameterSequence;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionKind {
    /// `(x_{n+1}, x_n]` is the set of `x ∈ (0, 1/2]` entering `Y` at time `n`.
    Entry,
    /// `(y_{n+1}, y_n]` is the set of `y ∈ Y` returning to `Y` at time `n`.
    Return,
}

/// Strictly decreasing partition points with the sequence they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionPoints {
    points: Vec<f64>,
    kind: PartitionKind,
    fingerprint: u64,
}

impl PartitionPoints {
    /// `points()[n - 1]` is `x_n` (or `y_n`).
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn kind(&self) -> PartitionKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fingerprint of the parameter sequence used.
    pub fn sequence_fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Largest violation of the gap inequality: `x_n − x_{n+1} ≤ x_{n+1}`
    /// for entry points, `y_n − y_{n+1} ≤ y_{n+1} − 1/2` for return points.
    /// Nonpositive when the inequality holds everywhere.
    pub fn worst_gap_excess(&self) -> f64 {
        let base = match self.kind {
            PartitionKind::Entry => 0.0,
            PartitionKind::Return => 0.5,
        };
        self.points
            .windows(2)
            .map(|w| (w[0] - w[1]) - (w[1] - base))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether the points strictly decrease.
    pub fn is_strictly_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1] < w[0])
    }
}

fn need(seq: &ParameterSequence, count: usize) -> Result<()> {
    let required = count.saturating_sub(1);
    if seq.len() < required {
        return Err(Error::Index {
            index: required,
            len: seq.len(),
        });
    }
    Ok(())
}

/// Entry points `x_n = g_1 ∘ ⋯ ∘ g_{n−1}(1/2)`, `n = 1, …, count`, where
/// `g_k` is the left-branch inverse of `T_k`.
pub fn entry_partition(seq: &ParameterSequence, count: usize) -> Result<PartitionPoints> {
    need(seq, count)?;
    let maps = seq.maps();
    let points = (1..=count)
        .map(|n| maps[..n - 1].iter().rev().fold(0.5, |x, m| m.left_inverse(x)))
        .collect();
    Ok(PartitionPoints {
        points,
        kind: PartitionKind::Entry,
        fingerprint: seq.fingerprint(),
    })
}

/// Return points `y_1 = 1` and `y_n = (x'_{n−1} + 1)/2`, where `x'` is the
/// entry partition of `T_2, T_3, …`.
pub fn return_partition(seq: &ParameterSequence, count: usize) -> Result<PartitionPoints> {
    need(seq, count)?;
    let mut points = Vec::with_capacity(count);
    if count >= 1 {
        points.push(1.0);
    }
    if count >= 2 {
        let shifted = entry_partition(&seq.shifted(1), count - 1)?;
        points.extend(shifted.points.iter().map(|x| 0.5 * (x + 1.0)));
    }
    Ok(PartitionPoints {
        points,
        kind: PartitionKind::Return,
        fingerprint: seq.fingerprint(),
    })
}

/// `t_n = μ((0, x_n] ∪ (1/2, y_n])` for `n = 1, …, count`: the mass that has
/// not yet reached `Y` (or returned to it) before time `n`.
pub fn cone_tail(
    density: &GridDensity,
    entry: &PartitionPoints,
    ret: &PartitionPoints,
    count: usize,
) -> Result<Vec<f64>> {
    if entry.kind != PartitionKind::Entry || ret.kind != PartitionKind::Return {
        return Err(Error::param("cone_tail needs an entry and a return partition"));
    }
    if entry.fingerprint != ret.fingerprint {
        return Err(Error::SequenceMismatch);
    }
    let available = entry.len().min(ret.len());
    if count > available {
        return Err(Error::Index {
            index: count,
            len: available,
        });
    }
    let cdf = CellCdf::new(density);
    let half = cdf.at(0.5);
    let mut tails: Vec<f64> = (0..count)
        .map(|i| cdf.at(entry.points[i]) + (cdf.at(ret.points[i]) - half))
        .collect();
    // Differences of the distribution function can wiggle by an ulp.
    for i in 1..tails.len() {
        tails[i] = tails[i].min(tails[i - 1]);
    }
    Ok(tails)
}

/// Distribution function of a piecewise-constant density.
struct CellCdf<'a> {
    density: &'a GridDensity,
    below: Vec<f64>,
}

impl<'a> CellCdf<'a> {
    fn new(density: &'a GridDensity) -> Self {
        let mut below = Vec::with_capacity(density.values().len() + 1);
        below.push(0.0);
        let mut acc = 0.0;
        for m in density.masses() {
            acc += m;
            below.push(acc);
        }
        Self { density, below }
    }

    fn at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let grid = self.density.grid();
        let i = grid.locate(x.min(1.0));
        self.below[i] + self.density.values()[i] * (x.min(1.0) - grid.edges()[i])
    }
}
