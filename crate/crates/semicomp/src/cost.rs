//! Quadratic tracking cost
//!
//! ```text
//! Phi = int_I int_O  k1/2 |v - v_d|^2 + k2/2 |p - p_d|^2 + k3/2 |u|^2
//!     + int_I int_G  x1/2 |v - v_d1|^2 + x2/2 |p - p_d1|^2
//!     + int_O        l1/2 |v(T) - v_dT|^2 + l2/2 |p(T) - p_dT|^2
//! ```
//!
//! Space integrals use the grid quadratures; time integrals use the
//! right-endpoint rectangle rule aligned with the implicit stepping, with
//! the control-energy term summed over the piecewise-constant slabs.

use crate::boundary::{trace_scalar, trace_scalar_transpose, BoundaryTrace};
use crate::field::{GridSpec, ScalarField, VectorField};
use crate::forward::{Scheme, Trajectory};
use crate::ops;

/// Nonnegative cost weights; `kappa3 > 0` is additionally required by every
/// operation that forms the reduced gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub varkappa1: f64,
    pub varkappa2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl CostWeights {
    pub fn control_only(kappa3: f64) -> Self {
        Self {
            kappa1: 0.0,
            kappa2: 0.0,
            kappa3,
            varkappa1: 0.0,
            varkappa2: 0.0,
            lambda1: 0.0,
            lambda2: 0.0,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("kappa3", self.kappa3),
            ("varkappa1", self.varkappa1),
            ("varkappa2", self.varkappa2),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
        ] {
            if !(v >= 0.0) {
                errs.push(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            kappa1: s * self.kappa1,
            kappa2: s * self.kappa2,
            kappa3: s * self.kappa3,
            varkappa1: s * self.varkappa1,
            varkappa2: s * self.varkappa2,
            lambda1: s * self.lambda1,
            lambda2: s * self.lambda2,
        }
    }
}

/// Boundary trace of a vector quantity, one scalar trace per component.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryVectorTrace {
    pub x: BoundaryTrace,
    pub y: BoundaryTrace,
}

/// Tracking data. `None` stands for a zero target of the right shape, so a
/// plain regularization-to-rest cost needs no allocations.
#[derive(Debug, Clone, Default)]
pub struct Targets {
    /// Bulk targets indexed by time level `0..=n`; level 0 is never used by
    /// the right-endpoint rule but kept for alignment.
    pub v_bulk: Option<Vec<VectorField>>,
    pub p_bulk: Option<Vec<ScalarField>>,
    pub v_trace: Option<Vec<BoundaryVectorTrace>>,
    pub p_trace: Option<Vec<BoundaryTrace>>,
    pub v_terminal: Option<VectorField>,
    pub p_terminal: Option<ScalarField>,
}

impl Targets {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Targets generated by an existing trajectory: its bulk states, wall
    /// traces and terminal state. A control that reproduces the trajectory
    /// zeroes every tracking term.
    pub fn from_trajectory(scheme: &Scheme, traj: &Trajectory) -> Self {
        let mut v_trace = Vec::with_capacity(traj.len());
        let mut p_trace = Vec::with_capacity(traj.len());
        for k in 0..traj.len() {
            v_trace.push(BoundaryVectorTrace {
                x: trace_scalar(&traj.v[k].x, scheme.fills.vx),
                y: trace_scalar(&traj.v[k].y, scheme.fills.vy),
            });
            p_trace.push(trace_scalar(&traj.p[k], scheme.fills.pressure));
        }
        Self {
            v_bulk: Some(traj.v.clone()),
            p_bulk: Some(traj.p.clone()),
            v_trace: Some(v_trace),
            p_trace: Some(p_trace),
            v_terminal: Some(traj.v.last().unwrap().clone()),
            p_terminal: Some(traj.p.last().unwrap().clone()),
        }
    }
}

fn diff_scalar(a: &ScalarField, target: Option<&ScalarField>) -> ScalarField {
    let mut d = a.clone();
    if let Some(t) = target {
        d.add_scaled(-1.0, t);
    }
    d
}

fn diff_vector(a: &VectorField, target: Option<&VectorField>) -> VectorField {
    VectorField {
        x: diff_scalar(&a.x, target.map(|t| &t.x)),
        y: diff_scalar(&a.y, target.map(|t| &t.y)),
    }
}

fn diff_trace(a: &BoundaryTrace, target: Option<&BoundaryTrace>) -> BoundaryTrace {
    match target {
        Some(t) => a.zip(t, |x, y| x - y),
        None => a.clone(),
    }
}

fn trace_norm_sq(tr: &BoundaryTrace, dx: f64, dy: f64) -> f64 {
    let sq = tr.map(|v| v * v);
    ops::integrate_boundary(&sq, dx, dy)
}

/// Evaluate the full cost for a trajectory/control pair.
pub fn cost_evaluate(
    scheme: &Scheme,
    traj: &Trajectory,
    control: &[VectorField],
    w: &CostWeights,
    tg: &Targets,
) -> f64 {
    let dt = scheme.dt();
    let (dx, dy) = (scheme.grid.dx(), scheme.grid.dy());
    let n = traj.len() - 1;
    let mut j = 0.0;
    for k in 1..=n {
        let mut level = 0.0;
        if w.kappa1 != 0.0 {
            let d = diff_vector(&traj.v[k], tg.v_bulk.as_ref().map(|t| &t[k]));
            level += 0.5 * w.kappa1 * ops::inner_vec(&d, &d);
        }
        if w.kappa2 != 0.0 {
            let d = diff_scalar(&traj.p[k], tg.p_bulk.as_ref().map(|t| &t[k]));
            level += 0.5 * w.kappa2 * ops::inner(&d, &d);
        }
        if w.varkappa1 != 0.0 {
            let tx = trace_scalar(&traj.v[k].x, scheme.fills.vx);
            let ty = trace_scalar(&traj.v[k].y, scheme.fills.vy);
            let tgt = tg.v_trace.as_ref().map(|t| &t[k]);
            let dxm = diff_trace(&tx, tgt.map(|t| &t.x));
            let dym = diff_trace(&ty, tgt.map(|t| &t.y));
            level += 0.5
                * w.varkappa1
                * (trace_norm_sq(&dxm, dx, dy) + trace_norm_sq(&dym, dx, dy));
        }
        if w.varkappa2 != 0.0 {
            let tp = trace_scalar(&traj.p[k], scheme.fills.pressure);
            let d = diff_trace(&tp, tg.p_trace.as_ref().map(|t| &t[k]));
            level += 0.5 * w.varkappa2 * trace_norm_sq(&d, dx, dy);
        }
        j += dt * level;
    }
    if w.kappa3 != 0.0 {
        for u in control {
            j += dt * 0.5 * w.kappa3 * ops::inner_vec(u, u);
        }
    }
    if w.lambda1 != 0.0 {
        let d = diff_vector(&traj.v[n], tg.v_terminal.as_ref());
        j += 0.5 * w.lambda1 * ops::inner_vec(&d, &d);
    }
    if w.lambda2 != 0.0 {
        let d = diff_scalar(&traj.p[n], tg.p_terminal.as_ref());
        j += 0.5 * w.lambda2 * ops::inner(&d, &d);
    }
    j
}

/// Tracking mismatch source densities at time level `k`, scaled as L2
/// densities of the backward sweep: bulk terms enter as `kappa (s - s_d)`,
/// boundary terms through the transposed trace map with the face/cell
/// measure ratio, and at `k = n` the terminal terms divided by `dt`.
pub fn scaled_tracking_source(
    scheme: &Scheme,
    traj: &Trajectory,
    w: &CostWeights,
    tg: &Targets,
    k: usize,
) -> (VectorField, ScalarField) {
    let grid: GridSpec = scheme.grid;
    let n = traj.len() - 1;
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut sv = VectorField::zeros(grid);
    let mut sp = ScalarField::zeros(grid);
    if w.kappa1 != 0.0 {
        let d = diff_vector(&traj.v[k], tg.v_bulk.as_ref().map(|t| &t[k]));
        sv.add_scaled(w.kappa1, &d);
    }
    if w.kappa2 != 0.0 {
        let d = diff_scalar(&traj.p[k], tg.p_bulk.as_ref().map(|t| &t[k]));
        sp.add_scaled(w.kappa2, &d);
    }
    if w.varkappa1 != 0.0 {
        let tx = trace_scalar(&traj.v[k].x, scheme.fills.vx);
        let ty = trace_scalar(&traj.v[k].y, scheme.fills.vy);
        let tgt = tg.v_trace.as_ref().map(|t| &t[k]);
        let dxm = scale_face_measure(&diff_trace(&tx, tgt.map(|t| &t.x)), w.varkappa1, dx, dy);
        let dym = scale_face_measure(&diff_trace(&ty, tgt.map(|t| &t.y)), w.varkappa1, dx, dy);
        trace_scalar_transpose(&dxm, scheme.fills.vx, &mut sv.x);
        trace_scalar_transpose(&dym, scheme.fills.vy, &mut sv.y);
    }
    if w.varkappa2 != 0.0 {
        let tp = trace_scalar(&traj.p[k], scheme.fills.pressure);
        let d = scale_face_measure(
            &diff_trace(&tp, tg.p_trace.as_ref().map(|t| &t[k])),
            w.varkappa2,
            dx,
            dy,
        );
        trace_scalar_transpose(&d, scheme.fills.pressure, &mut sp);
    }
    if k == n {
        let dt = scheme.dt();
        if w.lambda1 != 0.0 {
            let d = diff_vector(&traj.v[n], tg.v_terminal.as_ref());
            sv.add_scaled(w.lambda1 / dt, &d);
        }
        if w.lambda2 != 0.0 {
            let d = diff_scalar(&traj.p[n], tg.p_terminal.as_ref());
            sp.add_scaled(w.lambda2 / dt, &d);
        }
    }
    (sv, sp)
}

/// Weight boundary faces by `weight * ds / (dx dy)`: the discrete image of a
/// surface density as a volume density in the wall-adjacent cells.
fn scale_face_measure(tr: &BoundaryTrace, weight: f64, dx: f64, dy: f64) -> BoundaryTrace {
    let horiz = weight / dy; // bottom/top faces have ds = dx
    let vert = weight / dx; // left/right faces have ds = dy
    BoundaryTrace {
        bottom: tr.bottom.iter().map(|v| v * horiz).collect(),
        top: tr.top.iter().map(|v| v * horiz).collect(),
        left: tr.left.iter().map(|v| v * vert).collect(),
        right: tr.right.iter().map(|v| v * vert).collect(),
    }
}
