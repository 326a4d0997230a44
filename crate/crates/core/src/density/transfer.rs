use std::collections::HashMap;
use std::sync::Arc;

use crate::density::{Grid, GridDensity};
use crate::error::{Error, Result};
use crate::map::{LsvMap, ParameterSequence};

/// Iteration cap for [`invariant_density`].
pub const INVARIANT_MAX_ITER: usize = 100_000;

const HEAD_EXPONENT_MAX: f64 = 0.999;

/// Sparse column-stochastic matrix of the discretized pushforward of one map:
/// the mass of source cell `i` is spread over the cells overlapping the image
/// of `i`, proportionally to the overlap length.
#[derive(Clone, Debug)]
pub struct TransferPlan {
    grid: Arc<Grid>,
    gamma: f64,
    offsets: Vec<usize>,
    dest: Vec<u32>,
    weight: Vec<f64>,
    // Source cell 0 under the left branch: destination cells and the
    // preimage of each destination's right end, as a fraction of e_1.
    head: Vec<(u32, f64)>,
}

impl TransferPlan {
    pub fn new(map: &LsvMap, grid: Arc<Grid>) -> Self {
        let edges = grid.edges();
        let cells = grid.cells();
        let half = grid.left_cells();
        let mut offsets = Vec::with_capacity(cells + 1);
        let mut dest = Vec::with_capacity(cells * 4);
        let mut weight = Vec::with_capacity(cells * 4);
        offsets.push(0);

        let image = |x: f64, left: bool| -> f64 {
            if left {
                map.step(x).min(1.0)
            } else {
                (2.0 * x - 1.0).max(0.0)
            }
        };

        // ramp[i]: half-width of the crossover at e_i. On the left branch
        // only where the ramp's image clears cell i, which keeps the left
        // block triangular; never next to cell 0 or across 1/2.
        let mut ramp = vec![0.0; cells + 1];
        for i in 2..cells {
            let d = 0.5 * grid.width(i - 1).min(grid.width(i));
            let ok = if i < half { map.step(edges[i] - d) >= edges[i] } else { i > half };
            if ok {
                ramp[i] = d;
            }
        }
        let preimage: Vec<f64> = if ramp[..half].iter().any(|&d| d > 0.0) {
            edges.iter().map(|&e| map.left_inverse(e)).collect()
        } else {
            Vec::new()
        };

        for i in 0..cells {
            let start = dest.len();
            let left = i < half;
            if left && ramp[i] == 0.0 && ramp[i + 1] == 0.0 {
                let lo = image(edges[i], true);
                let hi = image(edges[i + 1], true);
                let len = hi - lo;
                let mut j = edges.partition_point(|&e| e <= lo).saturating_sub(1);
                while j < cells && edges[j] < hi {
                    let overlap = edges[j + 1].min(hi) - edges[j].max(lo);
                    if overlap > 0.0 {
                        dest.push(j as u32);
                        weight.push(overlap / len);
                    }
                    j += 1;
                }
            } else {
                let mut p = Profile::new(&grid, i, ramp[i], ramp[i + 1]);
                if !left {
                    // Work in image coordinates: (e + 1)/2 would cancel
                    // away the width of destination cells near 0.
                    p = p.affine_image();
                }
                let lo = if left { image(p.start(), true) } else { p.start() };
                let hi = if left { image(p.end(), true) } else { p.end() };
                let mut j = edges.partition_point(|&e| e <= lo).saturating_sub(1);
                while j < cells && edges[j] < hi {
                    let (a, b) = if left {
                        (preimage[j].max(p.start()), preimage[j + 1].min(p.end()))
                    } else {
                        (edges[j].max(lo), edges[j + 1].min(hi))
                    };
                    let m = p.mass(a, b);
                    if m > 0.0 {
                        dest.push(j as u32);
                        weight.push(m);
                    }
                    j += 1;
                }
            }
            // Renormalize so each column sums to one up to a single rounding.
            let s: f64 = weight[start..].iter().sum();
            for w in &mut weight[start..] {
                *w /= s;
            }
            offsets.push(dest.len());
        }

        let e1 = edges[1];
        let top = image(e1, true);
        let mut head = Vec::new();
        if half > 1 {
            let mut j = 0;
            while j < cells && edges[j] < top {
                let right = edges[j + 1].min(top);
                let u = if right >= top { 1.0 } else { (map.left_inverse(right) / e1).min(1.0) };
                head.push((j as u32, u));
                j += 1;
            }
        }
        Self {
            head,
            grid,
            gamma: map.gamma(),
            offsets,
            dest,
            weight,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Number of stored nonzeros.
    pub fn nonzeros(&self) -> usize {
        self.dest.len()
    }

    fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.dest[a..b], &self.weight[a..b])
    }

    /// Pushes cell masses forward; `out` is overwritten.
    pub fn apply_masses(&self, masses: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let skip_head = !self.head.is_empty();
        if skip_head && masses[0] > 0.0 {
            for (j, w) in self.head_weights(self.head_exponent(masses)) {
                out[j] += masses[0] * w;
            }
        }
        for (i, &m) in masses.iter().enumerate() {
            if m == 0.0 || (i == 0 && skip_head) {
                continue;
            }
            let (d, w) = self.row(i);
            for (&j, &wij) in d.iter().zip(w) {
                out[j as usize] += m * wij;
            }
        }
    }

    // Cell [0, e_1] sits at the neutral fixed point, where a flat profile
    // badly misplaces the mass it hands to cell 1 once γ is small. Its
    // content is instead spread as c x^{-s}, with s read off cells 1 and 2
    // (exact for power laws on geometric cells).
    fn head_exponent(&self, masses: &[f64]) -> f64 {
        let g = &self.grid;
        let (v1, v2) = (masses[1] / g.width(1), masses[2] / g.width(2));
        if !(v1 > 0.0 && v2 > 0.0) {
            return 0.0;
        }
        let s = (v1 / v2).ln() / (g.midpoint(2) / g.midpoint(1)).ln();
        s.clamp(0.0, HEAD_EXPONENT_MAX)
    }

    fn head_weights(&self, s: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        let mut prev = 0.0;
        self.head.iter().map(move |&(j, u)| {
            let c = u.powf(1.0 - s);
            let w = c - prev;
            prev = c;
            (j as usize, w)
        })
    }

    pub fn apply(&self, f: &GridDensity) -> Result<GridDensity> {
        if !(Arc::ptr_eq(&self.grid, f.grid()) || *self.grid == **f.grid()) {
            return Err(Error::GridMismatch);
        }
        let masses = f.masses();
        let mut out = vec![0.0; masses.len()];
        self.apply_masses(&masses, &mut out);
        GridDensity::from_masses(f.grid().clone(), &out)
    }
}

/// One application of the transfer operator of `map`.
pub fn transfer_step(map: &LsvMap, f: &GridDensity) -> Result<GridDensity> {
    TransferPlan::new(map, f.grid().clone()).apply(f)
}

/// Piecewise-linear mass profile of one source cell, normalized to unit
/// mass. Across a smooth edge `e` the profiles of the two adjacent cells
/// cross linearly on `[e − δ, e + δ]`; elsewhere a profile is flat. The
/// profiles form a partition of unity that keeps each cell's own mass, so
/// `Σ v_i φ_i` is a continuous reconstruction of the cell averages.
#[derive(Clone, Copy, Debug)]
struct Profile {
    x: [f64; 4],
    y: f64,
}

impl Profile {
    fn new(grid: &Grid, i: usize, left_ramp: f64, right_ramp: f64) -> Self {
        let e = grid.edges();
        Self {
            x: [
                e[i] - left_ramp,
                e[i] + left_ramp,
                e[i + 1] - right_ramp,
                e[i + 1] + right_ramp,
            ],
            y: 1.0 / grid.width(i),
        }
    }

    /// The same profile pushed through `x ↦ 2x − 1`.
    fn affine_image(self) -> Self {
        Self {
            x: self.x.map(|x| (2.0 * x - 1.0).clamp(0.0, 1.0)),
            y: 0.5 * self.y,
        }
    }

    fn start(&self) -> f64 {
        self.x[0]
    }

    fn end(&self) -> f64 {
        self.x[3]
    }

    fn cdf(&self, t: f64) -> f64 {
        let [x0, x1, x2, x3] = self.x;
        let ramp_up = if x1 > x0 {
            let u = t.clamp(x0, x1) - x0;
            0.5 * u * u / (x1 - x0)
        } else {
            0.0
        };
        let flat = t.clamp(x1, x2) - x1;
        let ramp_down = if x3 > x2 {
            let u = t.clamp(x2, x3) - x2;
            u - 0.5 * u * u / (x3 - x2)
        } else {
            0.0
        };
        self.y * (ramp_up + flat + ramp_down)
    }

    fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }
}

/// Transfer plans for a fixed grid, built once per distinct parameter.
#[derive(Debug)]
pub struct Evolver {
    grid: Arc<Grid>,
    plans: HashMap<u64, Arc<TransferPlan>>,
}

impl Evolver {
    pub fn new(grid: Arc<Grid>) -> Self {
        Self {
            grid,
            plans: HashMap::new(),
        }
    }

    pub fn plan(&mut self, map: &LsvMap) -> Arc<TransferPlan> {
        let grid = self.grid.clone();
        self.plans
            .entry(map.gamma().to_bits())
            .or_insert_with(|| Arc::new(TransferPlan::new(map, grid)))
            .clone()
    }

    /// Plans for `T_1, …, T_n`.
    pub fn plans_for(&mut self, seq: &ParameterSequence, n: usize) -> Result<Vec<Arc<TransferPlan>>> {
        if n > seq.len() {
            return Err(Error::Index {
                index: n,
                len: seq.len(),
            });
        }
        Ok(seq.maps()[..n].iter().map(|m| self.plan(m)).collect())
    }

    /// Evolves `f` for `n` steps and calls `observe(k, masses)` after every
    /// step `k = 1, …, n`.
    pub fn evolve_observed(
        &mut self,
        seq: &ParameterSequence,
        f: &GridDensity,
        n: usize,
        mut observe: impl FnMut(usize, &[f64]),
    ) -> Result<GridDensity> {
        if !f.same_grid(&GridDensity::zero(self.grid.clone())) {
            return Err(Error::GridMismatch);
        }
        let plans = self.plans_for(seq, n)?;
        let mut cur = f.masses();
        let mut next = vec![0.0; cur.len()];
        for (k, plan) in plans.iter().enumerate() {
            plan.apply_masses(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
            observe(k + 1, &cur);
        }
        GridDensity::from_masses(f.grid().clone(), &cur)
    }

    pub fn evolve(&mut self, seq: &ParameterSequence, f: &GridDensity, n: usize) -> Result<GridDensity> {
        self.evolve_observed(seq, f, n, |_, _| {})
    }
}

/// `(T_{1,n})_* f`.
pub fn evolve(seq: &ParameterSequence, f: &GridDensity, n: usize) -> Result<GridDensity> {
    Evolver::new(f.grid().clone()).evolve(seq, f, n)
}

/// Fixed point of the discretized transfer operator of `T_γ` on `grid`.
///
/// Mass leaving `(1/2, 1]` is carried through the cells of `[0, 1/2]` by
/// forward substitution (the left branch only moves mass to the right, so
/// that block is triangular), which turns each iteration into one step of
/// the induced first-return operator on `(1/2, 1]`. That operator is
/// uniformly expanding, so the iteration contracts geometrically instead of
/// at the polynomial rate of the plain power iteration. Iteration stops once
/// successive return densities differ by less than `tol` in `L¹`.
pub fn invariant_density(grid: &Arc<Grid>, gamma: f64, tol: f64) -> Result<GridDensity> {
    if !(tol > 0.0) {
        return Err(Error::param("tolerance must be positive"));
    }
    let map = LsvMap::new(gamma)?;
    let plan = TransferPlan::new(&map, grid.clone());
    let cells = grid.cells();
    let half = grid.left_cells();

    let mut ret: Vec<f64> = vec![0.0; cells];
    for (i, r) in ret.iter_mut().enumerate().skip(half) {
        *r = grid.width(i);
    }
    let s: f64 = ret.iter().sum();
    ret.iter_mut().for_each(|r| *r /= s);

    let mut left = vec![0.0; half];
    let mut next = vec![0.0; cells];
    let mut head_s = 0.0;
    let mut last_change = f64::INFINITY;
    for _ in 0..INVARIANT_MAX_ITER {
        induced_step(&plan, head_s, &ret, &mut left, &mut next);
        let total: f64 = next[half..].iter().sum();
        next[half..].iter_mut().for_each(|x| *x /= total);
        let ret_change: f64 = next[half..]
            .iter()
            .zip(&ret[half..])
            .map(|(a, b)| (a - b).abs())
            .sum();
        let new_s = if plan.head.is_empty() { 0.0 } else { plan.head_exponent(&left) };
        last_change = ret_change.max((new_s - head_s).abs());
        head_s = new_s;
        std::mem::swap(&mut ret, &mut next);
        if last_change < tol {
            induced_step(&plan, head_s, &ret, &mut left, &mut next);
            let mut masses = ret.clone();
            masses[..half].copy_from_slice(&left);
            let total: f64 = masses.iter().sum();
            masses.iter_mut().for_each(|m| *m /= total);
            return GridDensity::from_masses(grid.clone(), &masses);
        }
    }
    Err(Error::Convergence {
        iterations: INVARIANT_MAX_ITER,
        last_change,
    })
}

/// One first-return step: `ret` holds masses on the right cells; on exit
/// `left` holds the accumulated occupation of the left cells and `out` the
/// masses returning to the right cells. Cell 0 uses the power profile with
/// exponent `head_s`.
fn induced_step(plan: &TransferPlan, head_s: f64, ret: &[f64], left: &mut [f64], out: &mut [f64]) {
    let half = left.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    left.iter_mut().for_each(|l| *l = 0.0);
    for (i, &m) in ret.iter().enumerate().skip(half) {
        if m == 0.0 {
            continue;
        }
        let (d, w) = plan.row(i);
        for (&j, &wij) in d.iter().zip(w) {
            let j = j as usize;
            if j < half {
                left[j] += m * wij;
            } else {
                out[j] += m * wij;
            }
        }
    }
    // left[i] holds the inflow into cell i; resolve the sojourn in order.
    let push = |i: usize, left: &mut [f64], out: &mut [f64], targets: &mut dyn Iterator<Item = (usize, f64)>| {
        let targets: Vec<(usize, f64)> = targets.filter(|&(j, _)| j != i).collect();
        let escape: f64 = targets.iter().map(|&(_, w)| w).sum();
        let occupation = left[i] / escape;
        left[i] = occupation;
        if occupation == 0.0 {
            return;
        }
        for (j, w) in targets {
            if j < half {
                left[j] += occupation * w;
            } else {
                out[j] += occupation * w;
            }
        }
    };
    for i in 0..half {
        if i == 0 && !plan.head.is_empty() {
            push(0, left, out, &mut plan.head_weights(head_s));
        } else {
            let (d, w) = plan.row(i);
            push(i, left, out, &mut d.iter().zip(w).map(|(&j, &x)| (j as usize, x)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{cone_check, default_cone_parameter, tv_distance};

    fn small_grid() -> Arc<Grid> {
        Arc::new(Grid::graded(2048).unwrap())
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = small_grid();
        let t = LsvMap::new(0.5).unwrap();
        let z = GridDensity::zero(g);
        let out = transfer_step(&t, &z).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mass_is_preserved_and_positive() {
        let g = small_grid();
        let f = GridDensity::from_fn(g, |x| 1.0 + 0.5 * x * (2.0 * std::f64::consts::PI * x).cos())
            .unwrap()
            .normalized()
            .unwrap();
        for gamma in [0.1, 0.5, 0.9] {
            let t = LsvMap::new(gamma).unwrap();
            let out = transfer_step(&t, &f).unwrap();
            assert!((out.total_mass() - 1.0).abs() < 1e-12);
            assert!(out.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn columns_are_stochastic() {
        let g = small_grid();
        let plan = TransferPlan::new(&LsvMap::new(0.3).unwrap(), g.clone());
        for i in 0..g.cells() {
            let (_, w) = plan.row(i);
            let s: f64 = w.iter().sum();
            assert!((s - 1.0).abs() < 1e-15, "cell {i}: {s}");
            assert!(w.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn left_block_is_triangular() {
        let g = small_grid();
        let plan = TransferPlan::new(&LsvMap::new(0.7).unwrap(), g.clone());
        for i in 0..g.left_cells() {
            let (d, _) = plan.row(i);
            assert!(d.iter().all(|&j| j as usize >= i));
        }
    }

    #[test]
    fn evolve_zero_and_one_steps() {
        let g = small_grid();
        let seq = ParameterSequence::explicit(vec![0.3, 0.5, 0.4], 0.5).unwrap();
        let f = GridDensity::from_fn(g, |x| 2.0 - 2.0 * x).unwrap();
        assert_eq!(evolve(&seq, &f, 0).unwrap(), f);
        let one = evolve(&seq, &f, 1).unwrap();
        let direct = transfer_step(&seq.map(1).unwrap(), &f).unwrap();
        assert_eq!(one, direct);
        assert!(matches!(evolve(&seq, &f, 4), Err(Error::Index { .. })));
    }

    #[test]
    fn invariant_density_is_a_fixed_point() {
        let g = small_grid();
        let tol = 1e-10;
        let h = invariant_density(&g, 0.5, tol).unwrap();
        assert!((h.total_mass() - 1.0).abs() < 1e-12);
        let th = transfer_step(&LsvMap::new(0.5).unwrap(), &h).unwrap();
        assert!(tv_distance(&th, &h).unwrap() < 10.0 * tol);
        let d = cone_check(&h, 0.5, default_cone_parameter(0.5)).unwrap();
        assert!(d.within(1e-6), "{d:?}");
    }

    #[test]
    fn invariant_density_scales_like_power() {
        let g = small_grid();
        let h = invariant_density(&g, 0.5, 1e-10).unwrap();
        // h(x) x^γ stays bounded and away from zero near the fixed point.
        let probe: Vec<f64> = [1e-10, 1e-8, 1e-6, 1e-4]
            .iter()
            .map(|&x| h.values()[g.locate(x)] * f64::sqrt(x))
            .collect();
        let (lo, hi) = probe
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &p| (a.min(p), b.max(p)));
        assert!(hi / lo < 1.2, "{probe:?}");
    }

    #[test]
    fn weak_intermittency_is_bounded() {
        let g = small_grid();
        let h = invariant_density(&g, 0.02, 1e-10).unwrap();
        let max = h.values().iter().cloned().fold(0.0, f64::max);
        assert!(max < 2.0, "max {max}");
    }
}
