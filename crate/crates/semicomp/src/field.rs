//! Structured rectangular grid and cell-centered discrete fields.
//!
//! Fields store one ghost layer on every side: an `nx x ny` grid is backed by
//! an `(nx+2) x (ny+2)` array with interior cells at indices `1..=nx` and
//! `1..=ny`. Ghost values are derived data; they are recomputed by the
//! boundary fills before any stencil touches them.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Uniform cell-centered grid on the rectangle `(0,lx) x (0,ly)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl GridSpec {
    /// Panics if the cell counts or extents are unusable; configuration-level
    /// validation reports these gracefully before a grid is ever built.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        assert!(nx >= 4 && ny >= 4, "grid needs at least 4 cells per axis");
        assert!(lx > 0.0 && ly > 0.0, "domain extents must be positive");
        Self { nx, ny, lx, ly }
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Cell area used by the midpoint quadrature.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// Center coordinate of interior cell `(i, j)`, both 1-based.
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 - 0.5) * self.dx(), (j as f64 - 0.5) * self.dy())
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }
}

/// Scalar field with one ghost layer per side.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Array2<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: Array2::zeros((grid.nx + 2, grid.ny + 2)),
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            values: Array2::from_elem((grid.nx + 2, grid.ny + 2), c),
        }
    }

    /// Sample `f(x, y)` at interior cell centers; ghosts are left at zero.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for i in 1..=grid.nx {
            for j in 1..=grid.ny {
                let (x, y) = grid.center(i, j);
                out.values[[i, j]] = f(x, y);
            }
        }
        out
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.grid.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.grid.ny
    }

    /// Apply `f` to every interior value.
    pub fn map_interior_inplace(&mut self, mut f: impl FnMut(f64) -> f64) {
        for i in 1..=self.grid.nx {
            for j in 1..=self.grid.ny {
                self.values[[i, j]] = f(self.values[[i, j]]);
            }
        }
    }

    /// self += a * other, interior only.
    pub fn add_scaled(&mut self, a: f64, other: &ScalarField) {
        debug_assert_eq!(self.grid, other.grid);
        for i in 1..=self.grid.nx {
            for j in 1..=self.grid.ny {
                self.values[[i, j]] += a * other.values[[i, j]];
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.map_interior_inplace(|v| a * v);
    }

    pub fn interior_is_finite(&self) -> bool {
        for i in 1..=self.grid.nx {
            for j in 1..=self.grid.ny {
                if !self.values[[i, j]].is_finite() {
                    return false;
                }
            }
        }
        true
    }

    /// Largest interior magnitude.
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 1..=self.grid.nx {
            for j in 1..=self.grid.ny {
                m = m.max(self.values[[i, j]].abs());
            }
        }
        m
    }
}

/// Collocated vector field: two cell-centered scalar components on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut out = Self::zeros(grid);
        for i in 1..=grid.nx {
            for j in 1..=grid.ny {
                let (x, y) = grid.center(i, j);
                let (vx, vy) = f(x, y);
                out.x.values[[i, j]] = vx;
                out.y.values[[i, j]] = vy;
            }
        }
        out
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.x.grid
    }

    pub fn add_scaled(&mut self, a: f64, other: &VectorField) {
        self.x.add_scaled(a, &other.x);
        self.y.add_scaled(a, &other.y);
    }

    pub fn scale(&mut self, a: f64) {
        self.x.scale(a);
        self.y.scale(a);
    }

    pub fn interior_is_finite(&self) -> bool {
        self.x.interior_is_finite() && self.y.interior_is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }
}

/// Symmetric 2x2 tensor field, cell-centered (used for the strain rate).
#[derive(Debug, Clone)]
pub struct SymTensorField {
    pub xx: ScalarField,
    pub xy: ScalarField,
    pub yy: ScalarField,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacings_and_centers() {
        let g = GridSpec::new(4, 8, 2.0, 4.0);
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.dy(), 0.5);
        assert_eq!(g.center(1, 1), (0.25, 0.25));
        assert_eq!(g.center(4, 8), (1.75, 3.75));
        assert_eq!(g.n_cells(), 32);
    }

    #[test]
    #[should_panic]
    fn grid_rejects_tiny_axis() {
        GridSpec::new(3, 8, 1.0, 1.0);
    }

    #[test]
    fn sampling_hits_cell_centers() {
        let g = GridSpec::new(4, 4, 1.0, 1.0);
        let f = ScalarField::from_fn(g, |x, y| x + 10.0 * y);
        assert!((f.values[[1, 1]] - (0.125 + 1.25)).abs() < 1e-15);
        assert_eq!(f.values[[0, 0]], 0.0); // ghost untouched
    }
}
