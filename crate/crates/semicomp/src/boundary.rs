//! Ghost-cell realization of the wall conditions.
//!
//! On each flat edge the fills encode, to second order,
//!
//! * `n . v = 0` — odd reflection of the normal velocity component,
//! * `(nu/2) dv_t/dn + b v_t = 0` — Robin fill of the tangential component,
//! * `n . grad p = 0` — even reflection of the pressure.
//!
//! Every ghost cell takes `coef * value(source interior cell)`, where the
//! source is the adjacent interior cell (diagonal neighbor at corners, with
//! the product of both edge coefficients; the normal-direction fill is
//! applied last, which for these single-source fills commutes). Because the
//! maps are linear and homogeneous, they have exact algebraic transposes,
//! which the adjoint sweep relies on.

use crate::field::{ScalarField, VectorField};

/// Wall model of the momentum and pressure closures.
#[derive(Debug, Clone, Copy)]
pub struct BoundarySpec {
    /// Slip coefficient `b >= 0` of the tangential Robin condition.
    pub slip: f64,
    /// Impermeable walls: odd reflection of the normal velocity component.
    /// When disabled the component falls back to an even reflection.
    pub normal_no_penetration: bool,
    /// Tangential Robin condition; disabled means free slip (even fill).
    pub tangential_robin: bool,
    /// Homogeneous Neumann pressure closure (even reflection).
    pub pressure_neumann: bool,
}

impl BoundarySpec {
    pub fn navier(slip: f64) -> Self {
        assert!(slip >= 0.0, "slip coefficient must be nonnegative");
        Self {
            slip,
            normal_no_penetration: true,
            tangential_robin: true,
            pressure_neumann: true,
        }
    }
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self::navier(0.0)
    }
}

/// Reflection coefficients of one field component: ghost = coef * interior.
#[derive(Debug, Clone, Copy)]
pub struct FillCoefs {
    /// Left/right edges (normal direction x).
    pub cx: f64,
    /// Bottom/top edges (normal direction y).
    pub cy: f64,
}

/// Robin fill coefficient across a wall with normal spacing `h`:
/// `(nu/2)(g - i)/h + (b/2)(g + i) = 0  =>  g = i (nu - b h)/(nu + b h)`.
fn robin_coef(nu: f64, b: f64, h: f64) -> f64 {
    (nu - b * h) / (nu + b * h)
}

/// Fill coefficients for the three state components.
#[derive(Debug, Clone, Copy)]
pub struct GhostFills {
    pub vx: FillCoefs,
    pub vy: FillCoefs,
    pub pressure: FillCoefs,
}

impl GhostFills {
    pub fn new(bc: &BoundarySpec, nu: f64, dx: f64, dy: f64) -> Self {
        assert!(nu > 0.0, "viscosity must be positive");
        let odd = if bc.normal_no_penetration { -1.0 } else { 1.0 };
        let robin_x = if bc.tangential_robin {
            robin_coef(nu, bc.slip, dx)
        } else {
            1.0
        };
        let robin_y = if bc.tangential_robin {
            robin_coef(nu, bc.slip, dy)
        } else {
            1.0
        };
        Self {
            // vx is normal on x-edges, tangential on y-edges.
            vx: FillCoefs { cx: odd, cy: robin_y },
            vy: FillCoefs { cx: robin_x, cy: odd },
            pressure: FillCoefs { cx: 1.0, cy: 1.0 },
        }
    }
}

/// Recompute the ghost layer of `f` from its interior values.
pub fn fill_scalar(f: &mut ScalarField, c: FillCoefs) {
    let (nx, ny) = (f.grid.nx, f.grid.ny);
    let a = &mut f.values;
    for j in 1..=ny {
        a[[0, j]] = c.cx * a[[1, j]];
        a[[nx + 1, j]] = c.cx * a[[nx, j]];
    }
    for i in 1..=nx {
        a[[i, 0]] = c.cy * a[[i, 1]];
        a[[i, ny + 1]] = c.cy * a[[i, ny]];
    }
    let cc = c.cx * c.cy;
    a[[0, 0]] = cc * a[[1, 1]];
    a[[nx + 1, 0]] = cc * a[[nx, 1]];
    a[[0, ny + 1]] = cc * a[[1, ny]];
    a[[nx + 1, ny + 1]] = cc * a[[nx, ny]];
}

/// Exact transpose of [`fill_scalar`] viewed as the linear map
/// interior -> padded. Ghost entries of `f` are folded back onto their
/// source interior cells and zeroed.
pub fn fill_scalar_transpose(f: &mut ScalarField, c: FillCoefs) {
    let (nx, ny) = (f.grid.nx, f.grid.ny);
    let a = &mut f.values;
    let cc = c.cx * c.cy;
    a[[1, 1]] += cc * a[[0, 0]];
    a[[nx, 1]] += cc * a[[nx + 1, 0]];
    a[[1, ny]] += cc * a[[0, ny + 1]];
    a[[nx, ny]] += cc * a[[nx + 1, ny + 1]];
    a[[0, 0]] = 0.0;
    a[[nx + 1, 0]] = 0.0;
    a[[0, ny + 1]] = 0.0;
    a[[nx + 1, ny + 1]] = 0.0;
    for j in 1..=ny {
        a[[1, j]] += c.cx * a[[0, j]];
        a[[nx, j]] += c.cx * a[[nx + 1, j]];
        a[[0, j]] = 0.0;
        a[[nx + 1, j]] = 0.0;
    }
    for i in 1..=nx {
        a[[i, 1]] += c.cy * a[[i, 0]];
        a[[i, ny]] += c.cy * a[[i, ny + 1]];
        a[[i, 0]] = 0.0;
        a[[i, ny + 1]] = 0.0;
    }
}

/// Fill the ghost layers of a state pair `(v, p)` consistently with the
/// Navier conditions; `nu > 0` is required by the Robin fill.
pub fn fill_ghosts_state(v: &mut VectorField, p: &mut ScalarField, bc: &BoundarySpec, nu: f64) {
    let g = p.grid;
    let fills = GhostFills::new(bc, nu, g.dx(), g.dy());
    fill_scalar(&mut v.x, fills.vx);
    fill_scalar(&mut v.y, fills.vy);
    fill_scalar(p, fills.pressure);
}

/// Values of a scalar quantity on the boundary faces of the four edges.
///
/// `bottom`/`top` hold `nx` faces (indexed along x), `left`/`right` hold
/// `ny` faces (indexed along y).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl BoundaryTrace {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            bottom: vec![0.0; nx],
            top: vec![0.0; nx],
            left: vec![0.0; ny],
            right: vec![0.0; ny],
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            bottom: self.bottom.iter().map(|&v| f(v)).collect(),
            top: self.top.iter().map(|&v| f(v)).collect(),
            left: self.left.iter().map(|&v| f(v)).collect(),
            right: self.right.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let z = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect();
        Self {
            bottom: z(&self.bottom, &other.bottom),
            top: z(&self.top, &other.top),
            left: z(&self.left, &other.left),
            right: z(&self.right, &other.right),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bottom
            .iter()
            .chain(&self.top)
            .chain(&self.left)
            .chain(&self.right)
            .all(|v| v.is_finite())
    }
}

/// Wall value of a padded scalar: the midpoint `(interior + ghost)/2`, which
/// through the fill equals `(1 + coef)/2 * interior`.
pub fn trace_scalar(f: &ScalarField, c: FillCoefs) -> BoundaryTrace {
    let (nx, ny) = (f.grid.nx, f.grid.ny);
    let tb = 0.5 * (1.0 + c.cy);
    let lr = 0.5 * (1.0 + c.cx);
    let mut tr = BoundaryTrace::zeros(nx, ny);
    for i in 1..=nx {
        tr.bottom[i - 1] = tb * f.values[[i, 1]];
        tr.top[i - 1] = tb * f.values[[i, ny]];
    }
    for j in 1..=ny {
        tr.left[j - 1] = lr * f.values[[1, j]];
        tr.right[j - 1] = lr * f.values[[nx, j]];
    }
    tr
}

/// Transpose of [`trace_scalar`]: scatter face weights back onto the
/// adjacent interior cells. Accumulates into `out`.
pub fn trace_scalar_transpose(w: &BoundaryTrace, c: FillCoefs, out: &mut ScalarField) {
    let (nx, ny) = (out.grid.nx, out.grid.ny);
    let tb = 0.5 * (1.0 + c.cy);
    let lr = 0.5 * (1.0 + c.cx);
    for i in 1..=nx {
        out.values[[i, 1]] += tb * w.bottom[i - 1];
        out.values[[i, ny]] += tb * w.top[i - 1];
    }
    for j in 1..=ny {
        out.values[[1, j]] += lr * w.left[j - 1];
        out.values[[nx, j]] += lr * w.right[j - 1];
    }
}

/// Traces of both components of a padded vector field.
pub fn trace_vector(v: &VectorField, fills: &GhostFills) -> (BoundaryTrace, BoundaryTrace) {
    (trace_scalar(&v.x, fills.vx), trace_scalar(&v.y, fills.vy))
}
