//! Semi-implicit time integration of the coupled momentum/pressure system
//!
//! ```text
//! rho v_t + rho (v.grad)v - div(nu E(v)) + (rho/2)(div v)v
//!                         + grad(p + (beta/2) p^2) = u
//! beta (p_t + v.grad p) + div v = gamma lap p
//! ```
//!
//! One step solves a single coupled sparse system over the interior
//! unknowns: the linear core (time derivative, viscous stress, pressure
//! gradient, velocity divergence, pressure diffusion) is implicit; the
//! bilinear terms (convection, the divergence correction force, the
//! quadratic pressure contribution, pressure transport) are lagged at the
//! known level. The step matrix is time-independent and factored once.
//!
//! With `quasi_incompressible` set, the pressure transport `beta v.grad p`
//! and the quadratic pressure force `grad((beta/2) p^2)` are disabled while
//! `beta p_t` is kept.

use crate::band::{BandMatrix, FactoredBand};
use crate::boundary::{fill_scalar, trace_scalar, BoundarySpec, GhostFills};
use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, VectorField};
use crate::ops;

/// Relative residual required from every implicit solve.
pub const SOLVE_TOL: f64 = 1e-10;

/// Model coefficients of the state system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    /// Mass density, constant and positive.
    pub rho: f64,
    /// Viscosity, positive.
    pub nu: f64,
    /// Impressibility `beta = 1/K` (inverse bulk modulus), nonnegative.
    pub beta: f64,
    /// Pressure-diffusion coefficient, nonnegative.
    pub gamma: f64,
    /// Boundary slip coefficient, nonnegative.
    pub slip: f64,
    /// Drop pressure transport and the quadratic pressure force.
    pub quasi_incompressible: bool,
}

impl PhysParams {
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if !(self.rho > 0.0) {
            errs.push(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.nu > 0.0) {
            errs.push(format!("nu must be positive, got {}", self.nu));
        }
        if !(self.beta >= 0.0) {
            errs.push(format!("beta must be nonnegative (beta >= 0), got {}", self.beta));
        }
        if !(self.gamma >= 0.0) {
            errs.push(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        if !(self.slip >= 0.0) {
            errs.push(format!("slip coefficient b must be nonnegative, got {}", self.slip));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Pressure-wave speed `sqrt(1/(rho beta))`; infinite as beta -> 0.
    pub fn wave_speed(&self) -> f64 {
        if self.beta > 0.0 {
            (1.0 / (self.rho * self.beta)).sqrt()
        } else {
            f64::INFINITY
        }
    }
}

/// Uniform partition of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub t_final: f64,
    pub n_steps: usize,
}

impl TimeSpec {
    pub fn new(t_final: f64, n_steps: usize) -> Self {
        assert!(t_final > 0.0 && n_steps > 0);
        Self { t_final, n_steps }
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }
}

/// Full state history at `t_k = k dt`, `k = 0..=n_steps`. Entries carry
/// consistently filled ghost layers.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub time: TimeSpec,
    pub v: Vec<VectorField>,
    pub p: Vec<ScalarField>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Additional per-step source fields (used by manufactured solutions).
#[derive(Debug, Clone)]
pub struct StepSources {
    pub momentum: VectorField,
    pub pressure: ScalarField,
}

/// Per-step energy bookkeeping; dissipation, power and residual entries are
/// cumulative over `[0, t_k]`.
#[derive(Debug, Clone, Default)]
pub struct EnergyReport {
    pub time: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub elastic: Vec<f64>,
    pub bulk_dissipation: Vec<f64>,
    pub boundary_dissipation: Vec<f64>,
    pub control_power: Vec<f64>,
    pub residual: Vec<f64>,
}

impl EnergyReport {
    pub fn max_abs_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn initial_energy(&self) -> f64 {
        self.kinetic.first().copied().unwrap_or(0.0) + self.elastic.first().copied().unwrap_or(0.0)
    }
}

/// Interleaved unknown layout: three unknowns per cell, cells ordered with
/// the shorter grid axis varying fastest to minimize bandwidth.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    nx: usize,
    ny: usize,
    i_fast: bool,
}

pub const COMP_VX: usize = 0;
pub const COMP_VY: usize = 1;
pub const COMP_P: usize = 2;

impl Layout {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            i_fast: grid.nx <= grid.ny,
        }
    }

    #[inline]
    pub fn n_unknowns(&self) -> usize {
        3 * self.nx * self.ny
    }

    /// Unknown index of component `comp` at interior cell `(i, j)` (1-based).
    #[inline]
    pub fn idx(&self, comp: usize, i: usize, j: usize) -> usize {
        let cell = if self.i_fast {
            (j - 1) * self.nx + (i - 1)
        } else {
            (i - 1) * self.ny + (j - 1)
        };
        3 * cell + comp
    }

    /// Half bandwidth of the coupled step matrix under this ordering.
    pub fn half_bandwidth(&self) -> usize {
        3 * self.nx.min(self.ny) + 5
    }

    pub fn pack(&self, v: &VectorField, p: &ScalarField, out: &mut [f64]) {
        for i in 1..=self.nx {
            for j in 1..=self.ny {
                out[self.idx(COMP_VX, i, j)] = v.x.values[[i, j]];
                out[self.idx(COMP_VY, i, j)] = v.y.values[[i, j]];
                out[self.idx(COMP_P, i, j)] = p.values[[i, j]];
            }
        }
    }

    pub fn unpack(&self, x: &[f64], v: &mut VectorField, p: &mut ScalarField) {
        for i in 1..=self.nx {
            for j in 1..=self.ny {
                v.x.values[[i, j]] = x[self.idx(COMP_VX, i, j)];
                v.y.values[[i, j]] = x[self.idx(COMP_VY, i, j)];
                p.values[[i, j]] = x[self.idx(COMP_P, i, j)];
            }
        }
    }
}

/// Assembled and factored semi-implicit scheme for one grid/parameter/step
/// combination. Shared by the forward sweep and (transposed) by the adjoint.
pub struct Scheme {
    pub grid: GridSpec,
    pub params: PhysParams,
    pub bc: BoundarySpec,
    pub fills: GhostFills,
    pub time: TimeSpec,
    pub layout: Layout,
    pub solver: FactoredBand,
}

impl Scheme {
    pub fn new(grid: GridSpec, params: PhysParams, time: TimeSpec) -> Result<Self> {
        if let Err(errs) = params.validate() {
            return Err(Error::ConfigInvalid(errs));
        }
        if params.gamma == 0.0 {
            log::warn!("gamma = 0 disables pressure diffusion; outside the analysed regime");
        }
        if params.beta == 0.0 {
            log::warn!("beta = 0 leaves the pressure level unconstrained; solves may fail");
        }
        let bc = BoundarySpec::navier(params.slip);
        let fills = GhostFills::new(&bc, params.nu, grid.dx(), grid.dy());
        let layout = Layout::new(grid);
        let matrix = assemble_step_matrix(grid, &params, &fills, layout, time.dt());
        let solver =
            FactoredBand::new(matrix).map_err(|column| Error::SingularMatrix { column })?;
        Ok(Self {
            grid,
            params,
            bc,
            fills,
            time,
            layout,
            solver,
        })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.time.dt()
    }

    /// Fill the ghost layers of a state pair with this scheme's fills.
    pub fn fill_state(&self, v: &mut VectorField, p: &mut ScalarField) {
        fill_scalar(&mut v.x, self.fills.vx);
        fill_scalar(&mut v.y, self.fills.vy);
        fill_scalar(p, self.fills.pressure);
    }

    /// Lagged bilinear terms evaluated on a padded state: the right-hand-side
    /// contributions `(-rho (v.grad)v - (rho/2)(div v)v - grad((beta/2)p^2),
    /// -beta v.grad p)`, with the beta-coupled pieces dropped in the
    /// quasi-incompressible model.
    pub fn explicit_terms(&self, v: &VectorField, p: &ScalarField) -> (VectorField, ScalarField) {
        let g = self.grid;
        let rho = self.params.rho;
        let beta = self.params.beta;
        let conv = ops::convect_vector(v, v);
        let dv = ops::div(v);
        let mut nv = VectorField::zeros(g);
        for i in 1..=g.nx {
            for j in 1..=g.ny {
                let temam = 0.5 * rho * dv.values[[i, j]];
                nv.x.values[[i, j]] =
                    -rho * conv.x.values[[i, j]] - temam * v.x.values[[i, j]];
                nv.y.values[[i, j]] =
                    -rho * conv.y.values[[i, j]] - temam * v.y.values[[i, j]];
            }
        }
        let mut np = ScalarField::zeros(g);
        if !self.params.quasi_incompressible {
            // grad((beta/2) p^2): squaring commutes with the even fill, so the
            // padded square is ghost-consistent.
            let mut q = p.clone();
            for val in q.values.iter_mut() {
                *val = 0.5 * beta * *val * *val;
            }
            let gq = ops::grad(&q);
            nv.add_scaled(-1.0, &gq);
            let pc = ops::convect_scalar(v, p);
            np.add_scaled(-beta, &pc);
        }
        (nv, np)
    }

    /// Matrix-free application of the implicit operator to a padded state;
    /// used to cross-check the assembled matrix.
    pub fn apply_implicit(&self, v: &VectorField, p: &ScalarField) -> (VectorField, ScalarField) {
        let dt = self.dt();
        let pr = &self.params;
        let visc = ops::viscous(v, pr.nu);
        let gp = ops::grad(p);
        let mut out_v = v.clone();
        out_v.scale(pr.rho / dt);
        out_v.add_scaled(-1.0, &visc);
        out_v.add_scaled(1.0, &gp);
        let mut out_p = p.clone();
        out_p.scale(pr.beta / dt);
        let dv = ops::div(v);
        out_p.add_scaled(1.0, &dv);
        let lp = ops::laplacian(p);
        out_p.add_scaled(-pr.gamma, &lp);
        // results are interior-only
        zero_ghosts(&mut out_v.x);
        zero_ghosts(&mut out_v.y);
        zero_ghosts(&mut out_p);
        (out_v, out_p)
    }

    /// One semi-implicit step from a padded state `(v, p)`; `u` is the
    /// control slab acting over the step and `extra` carries manufactured
    /// sources. Returns the padded new state.
    pub fn step_state(
        &self,
        v: &VectorField,
        p: &ScalarField,
        u: Option<&VectorField>,
        extra: Option<&StepSources>,
        step: usize,
    ) -> Result<(VectorField, ScalarField)> {
        let g = self.grid;
        let dt = self.dt();
        let (nv, np) = self.explicit_terms(v, p);
        let mut rhs_v = v.clone();
        rhs_v.scale(self.params.rho / dt);
        rhs_v.add_scaled(1.0, &nv);
        let mut rhs_p = p.clone();
        rhs_p.scale(self.params.beta / dt);
        rhs_p.add_scaled(1.0, &np);
        if let Some(u) = u {
            rhs_v.add_scaled(1.0, u);
        }
        if let Some(src) = extra {
            rhs_v.add_scaled(1.0, &src.momentum);
            rhs_p.add_scaled(1.0, &src.pressure);
        }
        let n = self.layout.n_unknowns();
        let mut b = vec![0.0; n];
        self.layout.pack(&rhs_v, &rhs_p, &mut b);
        let mut x = vec![0.0; n];
        let quality = self.solver.solve(&b, &mut x);
        if !(quality.rel_residual <= SOLVE_TOL) {
            return Err(Error::SolverFailure {
                step,
                residual: quality.rel_residual,
                tolerance: SOLVE_TOL,
            });
        }
        let mut v_new = VectorField::zeros(g);
        let mut p_new = ScalarField::zeros(g);
        self.layout.unpack(&x, &mut v_new, &mut p_new);
        if !v_new.interior_is_finite() {
            return Err(Error::NonFinite {
                step,
                field: "velocity",
            });
        }
        if !p_new.interior_is_finite() {
            return Err(Error::NonFinite {
                step,
                field: "pressure",
            });
        }
        self.fill_state(&mut v_new, &mut p_new);
        Ok((v_new, p_new))
    }

    /// Integrate the full trajectory. `control` holds one slab per step
    /// (empty or shorter slices are treated as zero forcing); `sources`
    /// evaluates manufactured source fields at the step's target time.
    pub fn forward_solve_with(
        &self,
        v0: &VectorField,
        p0: &ScalarField,
        control: Option<&[VectorField]>,
        mut sources: Option<&mut dyn FnMut(f64) -> StepSources>,
    ) -> Result<Trajectory> {
        if !v0.interior_is_finite() || !p0.interior_is_finite() {
            return Err(Error::NonFinite {
                step: 0,
                field: "initial data",
            });
        }
        let mut v = v0.clone();
        let mut p = p0.clone();
        self.fill_state(&mut v, &mut p);
        self.cfl_advisory(&v);
        let n = self.time.n_steps;
        let mut traj = Trajectory {
            time: self.time,
            v: Vec::with_capacity(n + 1),
            p: Vec::with_capacity(n + 1),
        };
        traj.v.push(v.clone());
        traj.p.push(p.clone());
        for k in 0..n {
            let u = control.and_then(|c| c.get(k));
            let extra = sources.as_mut().map(|f| f((k + 1) as f64 * self.dt()));
            let (v_new, p_new) = self.step_state(&v, &p, u, extra.as_ref(), k + 1)?;
            v = v_new;
            p = p_new;
            traj.v.push(v.clone());
            traj.p.push(p.clone());
        }
        Ok(traj)
    }

    pub fn forward_solve(
        &self,
        v0: &VectorField,
        p0: &ScalarField,
        control: &[VectorField],
    ) -> Result<Trajectory> {
        self.forward_solve_with(v0, p0, Some(control), None)
    }

    /// Advisory stability bound `dt <= 0.5 min(dx,dy)/(|v|_inf + c)`;
    /// warned, never enforced.
    fn cfl_advisory(&self, v0: &VectorField) {
        let c = self.params.wave_speed();
        if !c.is_finite() {
            return;
        }
        let h = self.grid.dx().min(self.grid.dy());
        let bound = 0.5 * h / (v0.max_abs() + c);
        if self.dt() > bound {
            log::warn!(
                "dt = {:.3e} exceeds the advisory bound {:.3e} (wave speed {:.3})",
                self.dt(),
                bound,
                c
            );
        }
    }

    /// Evaluate every term of the energy balance with the scheme's
    /// quadratures. The residual compares stored plus dissipated energy
    /// against control power plus initial energy.
    pub fn energy_audit(&self, traj: &Trajectory, control: Option<&[VectorField]>) -> EnergyReport {
        let pr = &self.params;
        let dt = self.dt();
        let (dx, dy) = (self.grid.dx(), self.grid.dy());
        let mut report = EnergyReport::default();
        let mut bulk = 0.0;
        let mut bdry = 0.0;
        let mut power = 0.0;
        for k in 0..traj.len() {
            let v = &traj.v[k];
            let p = &traj.p[k];
            let kinetic = 0.5 * pr.rho * ops::inner_vec(v, v);
            let elastic = 0.5 * pr.beta * ops::inner(p, p);
            if k > 0 {
                let e = ops::strain(v);
                let e2 = ops::inner(&e.xx, &e.xx)
                    + 2.0 * ops::inner(&e.xy, &e.xy)
                    + ops::inner(&e.yy, &e.yy);
                let gp = ops::grad(p);
                bulk += dt * (pr.nu * e2 + pr.gamma * ops::inner_vec(&gp, &gp));
                let tx = trace_scalar(&v.x, self.fills.vx);
                let ty = trace_scalar(&v.y, self.fills.vy);
                // tangential component: vx along bottom/top, vy along left/right
                let mut tang = 0.0;
                tang += tx.bottom.iter().chain(&tx.top).map(|t| t * t).sum::<f64>() * dx;
                tang += ty.left.iter().chain(&ty.right).map(|t| t * t).sum::<f64>() * dy;
                bdry += dt * pr.slip * tang;
                if let Some(c) = control {
                    if let Some(u) = c.get(k - 1) {
                        power += dt * ops::inner_vec(u, v);
                    }
                }
            }
            report.time.push(k as f64 * dt);
            report.kinetic.push(kinetic);
            report.elastic.push(elastic);
            report.bulk_dissipation.push(bulk);
            report.boundary_dissipation.push(bdry);
            report.control_power.push(power);
        }
        let e0 = report.kinetic[0] + report.elastic[0];
        for k in 0..report.time.len() {
            report.residual.push(
                report.kinetic[k] + report.elastic[k] + report.bulk_dissipation[k]
                    + report.boundary_dissipation[k]
                    - report.control_power[k]
                    - e0,
            );
        }
        report
    }
}

/// Convenience wrapper matching the in-memory module contract.
pub fn energy_audit(
    traj: &Trajectory,
    control: Option<&[VectorField]>,
    grid: GridSpec,
    params: &PhysParams,
) -> Result<EnergyReport> {
    let scheme = Scheme::new(grid, *params, traj.time)?;
    Ok(scheme.energy_audit(traj, control))
}

fn zero_ghosts(f: &mut ScalarField) {
    let (nx, ny) = (f.grid.nx, f.grid.ny);
    for i in 0..nx + 2 {
        f.values[[i, 0]] = 0.0;
        f.values[[i, ny + 1]] = 0.0;
    }
    for j in 0..ny + 2 {
        f.values[[0, j]] = 0.0;
        f.values[[nx + 1, j]] = 0.0;
    }
}

/// Resolve a stencil tap at padded coordinates onto its interior source cell
/// through the ghost fill coefficients.
#[inline]
fn resolve_tap(
    grid: GridSpec,
    coefs: crate::boundary::FillCoefs,
    pi: usize,
    pj: usize,
) -> (usize, usize, f64) {
    let (nx, ny) = (grid.nx, grid.ny);
    let (si, ci) = if pi == 0 {
        (1, coefs.cx)
    } else if pi == nx + 1 {
        (nx, coefs.cx)
    } else {
        (pi, 1.0)
    };
    let (sj, cj) = if pj == 0 {
        (1, coefs.cy)
    } else if pj == ny + 1 {
        (ny, coefs.cy)
    } else {
        (pj, 1.0)
    };
    (si, sj, ci * cj)
}

/// Assemble the implicit step operator as a band matrix. All boundary
/// conditions are folded in through the ghost-fill coefficients, so the
/// matrix action on interior unknowns equals pad-then-stencil exactly.
fn assemble_step_matrix(
    grid: GridSpec,
    params: &PhysParams,
    fills: &GhostFills,
    layout: Layout,
    dt: f64,
) -> BandMatrix {
    let n = layout.n_unknowns();
    let kb = layout.half_bandwidth();
    let mut m = BandMatrix::zeros(n, kb, kb);
    let (dx, dy) = (grid.dx(), grid.dy());
    let (dx2, dy2) = (dx * dx, dy * dy);
    let dxy4 = 4.0 * dx * dy;
    let comp_fills = [fills.vx, fills.vy, fills.pressure];
    let mut add = |row: usize, comp: usize, pi: usize, pj: usize, w: f64| {
        let (si, sj, c) = resolve_tap(grid, comp_fills[comp], pi, pj);
        m.add(row, layout.idx(comp, si, sj), w * c);
    };
    let nu = params.nu;
    for i in 1..=grid.nx {
        for j in 1..=grid.ny {
            // --- x momentum row ---
            let row = layout.idx(COMP_VX, i, j);
            add(row, COMP_VX, i, j, params.rho / dt);
            // -nu * vx_xx
            add(row, COMP_VX, i - 1, j, -nu / dx2);
            add(row, COMP_VX, i, j, 2.0 * nu / dx2);
            add(row, COMP_VX, i + 1, j, -nu / dx2);
            // -nu/2 * vx_yy
            add(row, COMP_VX, i, j - 1, -0.5 * nu / dy2);
            add(row, COMP_VX, i, j, nu / dy2);
            add(row, COMP_VX, i, j + 1, -0.5 * nu / dy2);
            // -nu/2 * vy_xy
            add(row, COMP_VY, i + 1, j + 1, -0.5 * nu / dxy4);
            add(row, COMP_VY, i + 1, j - 1, 0.5 * nu / dxy4);
            add(row, COMP_VY, i - 1, j + 1, 0.5 * nu / dxy4);
            add(row, COMP_VY, i - 1, j - 1, -0.5 * nu / dxy4);
            // + p_x
            add(row, COMP_P, i + 1, j, 0.5 / dx);
            add(row, COMP_P, i - 1, j, -0.5 / dx);

            // --- y momentum row ---
            let row = layout.idx(COMP_VY, i, j);
            add(row, COMP_VY, i, j, params.rho / dt);
            add(row, COMP_VY, i, j - 1, -nu / dy2);
            add(row, COMP_VY, i, j, 2.0 * nu / dy2);
            add(row, COMP_VY, i, j + 1, -nu / dy2);
            add(row, COMP_VY, i - 1, j, -0.5 * nu / dx2);
            add(row, COMP_VY, i, j, nu / dx2);
            add(row, COMP_VY, i + 1, j, -0.5 * nu / dx2);
            add(row, COMP_VX, i + 1, j + 1, -0.5 * nu / dxy4);
            add(row, COMP_VX, i + 1, j - 1, 0.5 * nu / dxy4);
            add(row, COMP_VX, i - 1, j + 1, 0.5 * nu / dxy4);
            add(row, COMP_VX, i - 1, j - 1, -0.5 * nu / dxy4);
            add(row, COMP_P, i, j + 1, 0.5 / dy);
            add(row, COMP_P, i, j - 1, -0.5 / dy);

            // --- pressure row ---
            let row = layout.idx(COMP_P, i, j);
            add(row, COMP_P, i, j, params.beta / dt);
            // + div v
            add(row, COMP_VX, i + 1, j, 0.5 / dx);
            add(row, COMP_VX, i - 1, j, -0.5 / dx);
            add(row, COMP_VY, i, j + 1, 0.5 / dy);
            add(row, COMP_VY, i, j - 1, -0.5 / dy);
            // - gamma lap p
            add(row, COMP_P, i - 1, j, -params.gamma / dx2);
            add(row, COMP_P, i + 1, j, -params.gamma / dx2);
            add(row, COMP_P, i, j - 1, -params.gamma / dy2);
            add(row, COMP_P, i, j + 1, -params.gamma / dy2);
            add(row, COMP_P, i, j, 2.0 * params.gamma / dx2 + 2.0 * params.gamma / dy2);
        }
    }
    m
}
