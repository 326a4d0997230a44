use std::sync::Arc;

use crate::error::{Error, Result};

/// Default number of cells.
pub const DEFAULT_CELLS: usize = 32768;
/// Left edge of the geometric part; `[0, GEOMETRIC_FLOOR]` is one cell.
pub const GEOMETRIC_FLOOR: f64 = 1e-12;
/// Upper end of the geometric part in [`Grid::singular`]; together with
/// [`DEFAULT_GEOMETRIC_CELLS`] it fixes the geometric ratio of both layouts.
pub const GEOMETRIC_SPLIT: f64 = 0.1;
/// Geometric cells spanning `[GEOMETRIC_FLOOR, GEOMETRIC_SPLIT]`.
pub const DEFAULT_GEOMETRIC_CELLS: usize = 600;

/// Breakpoints `0 = e_0 < e_1 < … < e_M = 1`.
///
/// `1/2` is always an edge so that no cell straddles the discontinuity.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    edges: Vec<f64>,
    half_index: usize,
}

impl Grid {
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 3 || edges[0] != 0.0 || *edges.last().unwrap() != 1.0 {
            return Err(Error::param("grid edges must run from 0 to 1 with at least two cells"));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("grid edges must be strictly increasing"));
        }
        let half_index = edges
            .iter()
            .position(|&e| e == 0.5)
            .ok_or_else(|| Error::param("1/2 must be a grid edge"))?;
        Ok(Self { edges, half_index })
    }

    /// `cells` uniform cells; `cells` must be even.
    pub fn uniform(cells: usize) -> Result<Self> {
        if cells < 2 || !cells.is_multiple_of(2) {
            return Err(Error::param("uniform grid needs an even number of cells"));
        }
        let mut edges: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
        edges[cells / 2] = 0.5;
        Self::from_edges(edges)
    }

    /// Geometric cells on `[1e-12, 0.1]`, uniform cells above, `cells` total.
    pub fn singular(cells: usize) -> Result<Self> {
        let geometric = DEFAULT_GEOMETRIC_CELLS.min(cells / 4);
        Self::singular_with(cells, geometric)
    }

    pub fn singular_with(cells: usize, geometric: usize) -> Result<Self> {
        if geometric == 0 || cells < geometric + 3 {
            return Err(Error::param(format!(
                "{cells} cells cannot hold {geometric} geometric cells plus the uniform part"
            )));
        }
        let uniform = cells - 1 - geometric;
        let lower = ((uniform as f64) * 0.4 / 0.9).round() as usize;
        let lower = lower.clamp(1, uniform - 1);
        let upper = uniform - lower;

        let mut edges = Vec::with_capacity(cells + 1);
        edges.push(0.0);
        let ratio = (GEOMETRIC_SPLIT / GEOMETRIC_FLOOR).ln() / geometric as f64;
        for i in 0..geometric {
            edges.push(GEOMETRIC_FLOOR * (ratio * i as f64).exp());
        }
        for i in 0..lower {
            edges.push(GEOMETRIC_SPLIT + (0.5 - GEOMETRIC_SPLIT) * i as f64 / lower as f64);
        }
        for i in 0..upper {
            edges.push(0.5 + 0.5 * i as f64 / upper as f64);
        }
        edges.push(1.0);
        Self::from_edges(edges)
    }

    /// Geometric cells from `1e-12` with the ratio of the [`Grid::singular`]
    /// layout, switching to uniform cells once a geometric cell would be
    /// wider than the uniform spacing. Cell widths then vary continuously,
    /// which keeps the discretized transfer operator from printing a
    /// staircase where coarse cells map onto fine ones.
    pub fn graded(cells: usize) -> Result<Self> {
        let geometric = DEFAULT_GEOMETRIC_CELLS.min(cells / 4);
        if geometric == 0 || cells < 8 {
            return Err(Error::param(format!("{cells} cells are too few for a graded grid")));
        }
        let c = (GEOMETRIC_SPLIT / GEOMETRIC_FLOOR).ln() / geometric as f64;
        let growth = c.exp() - 1.0;
        // Fixed point of: uniform width w ↔ number of geometric cells below w/growth.
        let mut geo = 0usize;
        let mut w = 1.0 / cells as f64;
        for _ in 0..50 {
            let split = (w / growth).max(GEOMETRIC_FLOOR);
            geo = ((split / GEOMETRIC_FLOOR).ln() / c).ceil() as usize;
            let start = GEOMETRIC_FLOOR * (c * geo as f64).exp();
            let next = (1.0 - start) / (cells - 1 - geo) as f64;
            if (next - w).abs() < 1e-15 {
                break;
            }
            w = next;
        }
        let start = GEOMETRIC_FLOOR * (c * geo as f64).exp();
        if start >= 0.25 {
            return Err(Error::param(format!("{cells} cells are too few for a graded grid")));
        }
        let lower = (((0.5 - start) / w).round() as usize).max(1);
        let upper = cells - 1 - geo - lower;
        let mut edges = Vec::with_capacity(cells + 1);
        edges.push(0.0);
        for i in 0..geo {
            edges.push(GEOMETRIC_FLOOR * (c * i as f64).exp());
        }
        for i in 0..lower {
            edges.push(start + (0.5 - start) * i as f64 / lower as f64);
        }
        for i in 0..upper {
            edges.push(0.5 + 0.5 * i as f64 / upper as f64);
        }
        edges.push(1.0);
        Self::from_edges(edges)
    }

    /// [`Grid::graded`] with [`DEFAULT_CELLS`] cells.
    pub fn standard() -> Self {
        Self::graded(DEFAULT_CELLS).expect("default layout is valid")
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn cells(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    /// Number of cells in `[0, 1/2]`.
    pub fn left_cells(&self) -> usize {
        self.half_index
    }

    /// Index of the cell `(e_i, e_{i+1}]` containing `x`; `0` holds `x = 0`.
    pub fn locate(&self, x: f64) -> usize {
        let i = self.edges.partition_point(|&e| e < x);
        i.saturating_sub(1).min(self.cells() - 1)
    }

    pub(crate) fn shared(self) -> Arc<Grid> {
        Arc::new(self)
    }
}
