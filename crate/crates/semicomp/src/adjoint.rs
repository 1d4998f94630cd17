//! Backward sweep: exact transpose of the linearized forward step.
//!
//! Everything here is the algebraic transpose of what the forward solver
//! actually computes — implicit solves reuse the step factorization in
//! transposed form, the lagged bilinear terms contribute the transposed
//! Jacobians with respect to the known level, and the ghost fills and wall
//! traces enter through their exact adjoint maps. In the continuum limit the
//! swept multipliers solve the linear backward system with seven bilinear
//! state/adjoint couplings; discretely the transpose identity holds to
//! rounding, which is what makes finite-difference gradient checks land at
//! 1e-6 and better.
//!
//! Normalization: the stored multipliers `(chi, lam)` are scaled so the
//! reduced gradient of the tracking cost is plainly `g = kappa3 u - chi` per
//! control slab. In that convention a stationary control satisfies
//! `u = chi / kappa3`; against the classical PDE multiplier normalization
//! the fields absorb the mass factors (rho, beta) and a sign through the
//! transposition.

use crate::boundary::{fill_scalar, fill_scalar_transpose};
use crate::cost::{scaled_tracking_source, CostWeights, Targets};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::forward::{Scheme, Trajectory, SOLVE_TOL};
use crate::ops;

/// Slab-indexed adjoint history: entry `k` pairs with the control slab
/// acting on `(t_k, t_{k+1}]`, so there are `n_steps` entries and the last
/// one realizes the discrete terminal condition.
#[derive(Debug, Clone)]
pub struct AdjointTrajectory {
    pub chi: Vec<VectorField>,
    pub lam: Vec<ScalarField>,
}

impl AdjointTrajectory {
    pub fn len(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }
}

/// Interior pointwise product `a ⊙ b`.
fn prod(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let g = a.grid;
    let mut out = ScalarField::zeros(g);
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            out.values[[i, j]] = a.values[[i, j]] * b.values[[i, j]];
        }
    }
    out
}

/// Directional derivative of the lagged bilinear terms at padded state
/// `(v, p)` in padded direction `(dv, dp)`.
pub fn linearized_explicit_terms(
    scheme: &Scheme,
    v: &VectorField,
    p: &ScalarField,
    dv: &VectorField,
    dp: &ScalarField,
) -> (VectorField, ScalarField) {
    let g = scheme.grid;
    let rho = scheme.params.rho;
    let beta = scheme.params.beta;
    let conv_a = ops::convect_vector(dv, v);
    let conv_b = ops::convect_vector(v, dv);
    let div_v = ops::div(v);
    let div_dv = ops::div(dv);
    let mut nv = VectorField::zeros(g);
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            let t = 0.5
                * rho
                * (div_dv.values[[i, j]] * v.x.values[[i, j]]
                    + div_v.values[[i, j]] * dv.x.values[[i, j]]);
            nv.x.values[[i, j]] =
                -rho * (conv_a.x.values[[i, j]] + conv_b.x.values[[i, j]]) - t;
            let t = 0.5
                * rho
                * (div_dv.values[[i, j]] * v.y.values[[i, j]]
                    + div_v.values[[i, j]] * dv.y.values[[i, j]]);
            nv.y.values[[i, j]] =
                -rho * (conv_a.y.values[[i, j]] + conv_b.y.values[[i, j]]) - t;
        }
    }
    let mut np = ScalarField::zeros(g);
    if !scheme.params.quasi_incompressible {
        // grad(beta p dp): the product of even-filled arrays is
        // ghost-consistent, multiply the padded arrays directly.
        let mut q = p.clone();
        for (qv, dpv) in q.values.iter_mut().zip(dp.values.iter()) {
            *qv = beta * *qv * *dpv;
        }
        let gq = ops::grad(&q);
        nv.add_scaled(-1.0, &gq);
        let ca = ops::convect_scalar(dv, p);
        let cb = ops::convect_scalar(v, dp);
        np.add_scaled(-beta, &ca);
        np.add_scaled(-beta, &cb);
    }
    (nv, np)
}

/// Exact transpose of [`linearized_explicit_terms`] in the unweighted
/// (algebraic) pairing: given interior weights `(wv, wp)`, produce the
/// interior fields `J_N(v,p)^T (wv, wp)`.
///
/// The seven couplings transposed here are the discrete images of
/// `rho (grad v)^T chi`, `-rho div(v ⊗ chi)`, `(rho/2)(div v) chi`,
/// `-(rho/2) grad(v . chi)`, `beta lam grad p`, `-beta div(lam v)` and
/// `-beta p div chi` (the remaining `-div chi` lives in the implicit block).
pub fn adjoint_explicit_terms(
    scheme: &Scheme,
    v: &VectorField,
    p: &ScalarField,
    wv: &VectorField,
    wp: &ScalarField,
) -> (VectorField, ScalarField) {
    let g = scheme.grid;
    let rho = scheme.params.rho;
    let beta = scheme.params.beta;
    let quasi = scheme.params.quasi_incompressible;
    let fills = &scheme.fills;

    let dxv1 = ops::ddx(&v.x);
    let dyv1 = ops::ddy(&v.x);
    let dxv2 = ops::ddx(&v.y);
    let dyv2 = ops::ddy(&v.y);
    let div_v = ops::div(v);
    let dxp = ops::ddx(p);
    let dyp = ops::ddy(p);

    let mut out_v = VectorField::zeros(g);
    let mut out_p = ScalarField::zeros(g);

    // Pointwise couplings: velocity-gradient transpose, divergence
    // correction, and the pressure-gradient weight on the pressure adjoint.
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            let w1 = wv.x.values[[i, j]];
            let w2 = wv.y.values[[i, j]];
            let mut ax = -rho * (dxv1.values[[i, j]] * w1 + dxv2.values[[i, j]] * w2)
                - 0.5 * rho * div_v.values[[i, j]] * w1;
            let mut ay = -rho * (dyv1.values[[i, j]] * w1 + dyv2.values[[i, j]] * w2)
                - 0.5 * rho * div_v.values[[i, j]] * w2;
            if !quasi {
                let wpv = wp.values[[i, j]];
                ax -= beta * dxp.values[[i, j]] * wpv;
                ay -= beta * dyp.values[[i, j]] * wpv;
            }
            out_v.x.values[[i, j]] = ax;
            out_v.y.values[[i, j]] = ay;
        }
    }

    // Transposed convection of the unknown: scatter v_i ⊙ w_j through the
    // derivative transposes, then fold ghosts with the component's fill.
    let vw = |a: &ScalarField, w: &ScalarField| prod(a, w);
    {
        let mut acc = ScalarField::zeros(g);
        ops::ddx_transpose(&vw(&v.x, &wv.x), &mut acc);
        ops::ddy_transpose(&vw(&v.y, &wv.x), &mut acc);
        fill_scalar_transpose(&mut acc, fills.vx);
        out_v.x.add_scaled(-rho, &acc);
    }
    {
        let mut acc = ScalarField::zeros(g);
        ops::ddx_transpose(&vw(&v.x, &wv.y), &mut acc);
        ops::ddy_transpose(&vw(&v.y, &wv.y), &mut acc);
        fill_scalar_transpose(&mut acc, fills.vy);
        out_v.y.add_scaled(-rho, &acc);
    }

    // Transposed divergence correction: -(rho/2) L^T D_i^T (v . w).
    {
        let mut vdotw = prod(&v.x, &wv.x);
        let p2 = prod(&v.y, &wv.y);
        vdotw.add_scaled(1.0, &p2);
        let mut accx = ScalarField::zeros(g);
        ops::ddx_transpose(&vdotw, &mut accx);
        fill_scalar_transpose(&mut accx, fills.vx);
        out_v.x.add_scaled(-0.5 * rho, &accx);
        let mut accy = ScalarField::zeros(g);
        ops::ddy_transpose(&vdotw, &mut accy);
        fill_scalar_transpose(&mut accy, fills.vy);
        out_v.y.add_scaled(-0.5 * rho, &accy);
    }

    if !quasi {
        // Transposed quadratic pressure force: -beta p ⊙ L_p^T sum_j D_j^T w_j.
        {
            let mut acc = ScalarField::zeros(g);
            ops::ddx_transpose(&wv.x, &mut acc);
            ops::ddy_transpose(&wv.y, &mut acc);
            fill_scalar_transpose(&mut acc, fills.pressure);
            let pa = prod(p, &acc);
            out_p.add_scaled(-beta, &pa);
        }
        // Transposed pressure transport: -beta L_p^T sum_i D_i^T (v_i ⊙ wp).
        {
            let mut acc = ScalarField::zeros(g);
            ops::ddx_transpose(&vw(&v.x, wp), &mut acc);
            ops::ddy_transpose(&vw(&v.y, wp), &mut acc);
            fill_scalar_transpose(&mut acc, fills.pressure);
            out_p.add_scaled(-beta, &acc);
        }
    }

    (out_v, out_p)
}

/// Solve `A^T mu = rhs` for interior fields, residual-checked like the
/// forward solves.
fn solve_transposed(
    scheme: &Scheme,
    rhs_v: &VectorField,
    rhs_p: &ScalarField,
    step: usize,
) -> Result<(VectorField, ScalarField)> {
    let n = scheme.layout.n_unknowns();
    let mut b = vec![0.0; n];
    scheme.layout.pack(rhs_v, rhs_p, &mut b);
    let mut x = vec![0.0; n];
    let quality = scheme.solver.solve_transpose(&b, &mut x);
    if !(quality.rel_residual <= SOLVE_TOL) {
        return Err(Error::SolverFailure {
            step,
            residual: quality.rel_residual,
            tolerance: SOLVE_TOL,
        });
    }
    let mut mv = VectorField::zeros(scheme.grid);
    let mut mp = ScalarField::zeros(scheme.grid);
    scheme.layout.unpack(&x, &mut mv, &mut mp);
    Ok((mv, mp))
}

/// Discrete terminal condition: the transposed-step image of the terminal
/// mismatch alone. With zero terminal weights the result is exactly zero;
/// the continuum limit carries `lambda (state(T) - target)` divided by the
/// mass factors (and the transposition's sign).
pub fn terminal_conditions(
    scheme: &Scheme,
    traj: &Trajectory,
    w: &CostWeights,
    tg: &Targets,
) -> Result<(VectorField, ScalarField)> {
    let terminal_only = CostWeights {
        kappa1: 0.0,
        kappa2: 0.0,
        kappa3: w.kappa3,
        varkappa1: 0.0,
        varkappa2: 0.0,
        lambda1: w.lambda1,
        lambda2: w.lambda2,
    };
    if w.lambda1 == 0.0 && w.lambda2 == 0.0 {
        return Ok((VectorField::zeros(scheme.grid), ScalarField::zeros(scheme.grid)));
    }
    let n = traj.len() - 1;
    let (mut sv, mut sp) = scaled_tracking_source(scheme, traj, &terminal_only, tg, n);
    sv.scale(-1.0);
    sp.scale(-1.0);
    solve_transposed(scheme, &sv, &sp, n)
}

/// One backward step: from the slab-`k` multipliers and the state at level
/// `k` (padded), produce the slab-`k-1` multipliers. The tracking mismatch
/// at level `k` enters as a source.
pub fn step_adjoint(
    scheme: &Scheme,
    chi_next: &VectorField,
    lam_next: &ScalarField,
    traj: &Trajectory,
    w: &CostWeights,
    tg: &Targets,
    k: usize,
) -> Result<(VectorField, ScalarField)> {
    let dt = scheme.dt();
    let (jv, jp) = adjoint_explicit_terms(scheme, &traj.v[k], &traj.p[k], chi_next, lam_next);
    let (sv, sp) = scaled_tracking_source(scheme, traj, w, tg, k);
    let mut rhs_v = chi_next.clone();
    rhs_v.scale(scheme.params.rho / dt);
    rhs_v.add_scaled(1.0, &jv);
    rhs_v.add_scaled(-1.0, &sv);
    let mut rhs_p = lam_next.clone();
    rhs_p.scale(scheme.params.beta / dt);
    rhs_p.add_scaled(1.0, &jp);
    rhs_p.add_scaled(-1.0, &sp);
    solve_transposed(scheme, &rhs_v, &rhs_p, k)
}

/// Backward sweep over the whole trajectory.
pub fn adjoint_solve(
    scheme: &Scheme,
    traj: &Trajectory,
    w: &CostWeights,
    tg: &Targets,
) -> Result<AdjointTrajectory> {
    let n = traj.len() - 1;
    let mut chi: Vec<VectorField> = Vec::with_capacity(n);
    let mut lam: Vec<ScalarField> = Vec::with_capacity(n);
    // Terminal solve: level-n tracking plus terminal mismatch.
    let (mut sv, mut sp) = scaled_tracking_source(scheme, traj, w, tg, n);
    sv.scale(-1.0);
    sp.scale(-1.0);
    let (cv, cp) = solve_transposed(scheme, &sv, &sp, n)?;
    chi.push(cv);
    lam.push(cp);
    // chi/lam are built back-to-front; index 0 of the temporary vec is slab n-1.
    for k in (1..n).rev() {
        let (cv, cp) = {
            let last_v = chi.last().unwrap();
            let last_p = lam.last().unwrap();
            step_adjoint(scheme, last_v, last_p, traj, w, tg, k)?
        };
        chi.push(cv);
        lam.push(cp);
    }
    chi.reverse();
    lam.reverse();
    Ok(AdjointTrajectory { chi, lam })
}

/// Reduced gradient per control slab: `g_k = kappa3 u_k - chi_k`, an L2
/// density whose pairing with a perturbation matches the directional
/// derivative of the reduced cost.
pub fn reduced_gradient(
    adj: &AdjointTrajectory,
    control: &[VectorField],
    w: &CostWeights,
) -> Vec<VectorField> {
    assert!(w.kappa3 > 0.0, "reduced gradient requires kappa3 > 0");
    assert_eq!(adj.len(), control.len());
    control
        .iter()
        .zip(&adj.chi)
        .map(|(u, chi)| {
            let mut g = u.clone();
            g.scale(w.kappa3);
            g.add_scaled(-1.0, chi);
            g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::forward::{PhysParams, TimeSpec};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn params() -> PhysParams {
        PhysParams {
            rho: 1.2,
            nu: 0.03,
            beta: 0.6,
            gamma: 0.004,
            slip: 0.5,
            quasi_incompressible: false,
        }
    }

    fn rand_state(grid: GridSpec, seed: u64, amp: f64) -> (VectorField, ScalarField) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut v = VectorField::zeros(grid);
        let mut p = ScalarField::zeros(grid);
        for i in 1..=grid.nx {
            for j in 1..=grid.ny {
                v.x.values[[i, j]] = amp * rng.random_range(-1.0..1.0);
                v.y.values[[i, j]] = amp * rng.random_range(-1.0..1.0);
                p.values[[i, j]] = amp * rng.random_range(-1.0..1.0);
            }
        }
        (v, p)
    }

    fn pack(scheme: &Scheme, v: &VectorField, p: &ScalarField) -> Vec<f64> {
        let mut out = vec![0.0; scheme.layout.n_unknowns()];
        scheme.layout.pack(v, p, &mut out);
        out
    }

    /// <linearized_step(a), b> == <a, adjoint_operator(b)> to 1e-12 relative,
    /// with the implicit solves included on both sides.
    #[test]
    fn transpose_identity_for_full_linearized_step() {
        for quasi in [false, true] {
            let grid = GridSpec::new(7, 6, 1.1, 0.9);
            let mut pr = params();
            pr.quasi_incompressible = quasi;
            let scheme = Scheme::new(grid, pr, TimeSpec::new(0.08, 4)).unwrap();
            let (mut v, mut p) = rand_state(grid, 21, 0.8);
            scheme.fill_state(&mut v, &mut p);

            let (mut da, mut dpa) = rand_state(grid, 22, 1.0);
            let (wb, wpb) = rand_state(grid, 23, 1.0);

            // forward: x = A^{-1} (M + J_N) a
            let dt = scheme.dt();
            scheme.fill_state(&mut da, &mut dpa);
            let (nv, np) = linearized_explicit_terms(&scheme, &v, &p, &da, &dpa);
            let mut rv = da.clone();
            rv.scale(pr.rho / dt);
            rv.add_scaled(1.0, &nv);
            let mut rp = dpa.clone();
            rp.scale(pr.beta / dt);
            rp.add_scaled(1.0, &np);
            let b = pack(&scheme, &rv, &rp);
            let mut x = vec![0.0; b.len()];
            scheme.solver.solve(&b, &mut x);

            // adjoint: y = (M + J_N)^T A^{-T} b
            let wbp = pack(&scheme, &wb, &wpb);
            let mut mu = vec![0.0; wbp.len()];
            scheme.solver.solve_transpose(&wbp, &mut mu);
            let mut muv = VectorField::zeros(grid);
            let mut mup = ScalarField::zeros(grid);
            scheme.layout.unpack(&mu, &mut muv, &mut mup);
            let (jv, jp) = adjoint_explicit_terms(&scheme, &v, &p, &muv, &mup);
            let mut yv = muv.clone();
            yv.scale(pr.rho / dt);
            yv.add_scaled(1.0, &jv);
            let mut yp = mup.clone();
            yp.scale(pr.beta / dt);
            yp.add_scaled(1.0, &jp);
            let y = pack(&scheme, &yv, &yp);

            let a = pack(&scheme, &da, &dpa);
            let lhs: f64 = x.iter().zip(&wbp).map(|(s, t)| s * t).sum();
            let rhs: f64 = a.iter().zip(&y).map(|(s, t)| s * t).sum();
            assert!(
                (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
                "quasi={quasi}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn zero_cost_weights_give_zero_adjoint() {
        let grid = GridSpec::new(6, 6, 1.0, 1.0);
        let scheme = Scheme::new(grid, params(), TimeSpec::new(0.1, 5)).unwrap();
        let (v0, p0) = rand_state(grid, 31, 0.3);
        let traj = scheme.forward_solve(&v0, &p0, &[]).unwrap();
        let w = CostWeights::control_only(1.0);
        let adj = adjoint_solve(&scheme, &traj, &w, &Targets::zero()).unwrap();
        for k in 0..adj.len() {
            assert!(adj.chi[k].max_abs() == 0.0);
            assert!(adj.lam[k].max_abs() == 0.0);
        }
    }

    #[test]
    fn adjoint_solve_is_deterministic() {
        let grid = GridSpec::new(6, 5, 1.0, 1.0);
        let scheme = Scheme::new(grid, params(), TimeSpec::new(0.1, 5)).unwrap();
        let (v0, p0) = rand_state(grid, 41, 0.4);
        let traj = scheme.forward_solve(&v0, &p0, &[]).unwrap();
        let mut w = CostWeights::control_only(1.0);
        w.kappa1 = 1.0;
        w.lambda2 = 0.5;
        let a1 = adjoint_solve(&scheme, &traj, &w, &Targets::zero()).unwrap();
        let a2 = adjoint_solve(&scheme, &traj, &w, &Targets::zero()).unwrap();
        for k in 0..a1.len() {
            assert_eq!(a1.chi[k], a2.chi[k]);
            assert_eq!(a1.lam[k], a2.lam[k]);
        }
    }

    /// On a zero trajectory with pure bulk pressure tracking the pressure
    /// multiplier is spatially constant and follows the scalar backward
    /// recursion `lam_k = lam_{k+1} - dt kappa2 (p - p_d)/beta` from zero.
    #[test]
    fn constant_source_adjoint_matches_scalar_recursion() {
        let grid = GridSpec::new(8, 7, 1.0, 1.3);
        let pr = params();
        let n = 6usize;
        let scheme = Scheme::new(grid, pr, TimeSpec::new(0.3, n)).unwrap();
        let traj = scheme
            .forward_solve(&VectorField::zeros(grid), &ScalarField::zeros(grid), &[])
            .unwrap();
        let mut w = CostWeights::control_only(1.0);
        w.kappa2 = 1.0;
        let tg = Targets {
            p_bulk: Some(vec![ScalarField::constant(grid, -1.0); n + 1]),
            ..Targets::zero()
        };
        let adj = adjoint_solve(&scheme, &traj, &w, &tg).unwrap();
        // independent scalar oracle: beta/dt * mu_k = beta/dt * mu_{k+1} - kappa2*(0-(-1))
        let dt = scheme.dt();
        let mut expect = vec![0.0f64; n];
        let mut mu = 0.0;
        for k in (0..n).rev() {
            mu -= dt / pr.beta * w.kappa2 * 1.0;
            expect[k] = mu;
        }
        for k in 0..n {
            assert!(adj.chi[k].max_abs() < 1e-11, "velocity multiplier leaks");
            for i in 1..=grid.nx {
                for j in 1..=grid.ny {
                    let got = adj.lam[k].values[[i, j]];
                    assert!(
                        (got - expect[k]).abs() < 1e-10 * expect[k].abs().max(1e-3),
                        "slab {k}: {got} vs {}",
                        expect[k]
                    );
                }
            }
        }
    }

    #[test]
    fn terminal_conditions_zero_cases() {
        let grid = GridSpec::new(6, 6, 1.0, 1.0);
        let scheme = Scheme::new(grid, params(), TimeSpec::new(0.1, 4)).unwrap();
        let (v0, p0) = rand_state(grid, 51, 0.4);
        let traj = scheme.forward_solve(&v0, &p0, &[]).unwrap();
        // zero terminal weights
        let w = CostWeights::control_only(1.0);
        let (cv, cp) = terminal_conditions(&scheme, &traj, &w, &Targets::zero()).unwrap();
        assert!(cv.max_abs() == 0.0 && cp.max_abs() == 0.0);
        // matching terminal targets
        let mut w2 = CostWeights::control_only(1.0);
        w2.lambda1 = 1.0;
        w2.lambda2 = 1.0;
        let tg = Targets {
            v_terminal: Some(traj.v.last().unwrap().clone()),
            p_terminal: Some(traj.p.last().unwrap().clone()),
            ..Targets::zero()
        };
        let (cv, cp) = terminal_conditions(&scheme, &traj, &w2, &tg).unwrap();
        assert!(cv.max_abs() == 0.0 && cp.max_abs() == 0.0);
    }

    #[test]
    fn reduced_gradient_identities() {
        let grid = GridSpec::new(5, 5, 1.0, 1.0);
        let n = 3;
        let adj = AdjointTrajectory {
            chi: vec![VectorField::zeros(grid); n],
            lam: vec![ScalarField::zeros(grid); n],
        };
        let control: Vec<VectorField> =
            (0..n).map(|_| VectorField::from_fn(grid, |x, y| (x, -y))).collect();
        let w = CostWeights::control_only(2.5);
        // chi = 0 -> g = kappa3 u
        let g = reduced_gradient(&adj, &control, &w);
        for k in 0..n {
            let mut expect = control[k].clone();
            expect.scale(2.5);
            assert_eq!(g[k], expect);
        }
        // u = chi/kappa3 -> g = 0
        let mut adj2 = adj;
        for k in 0..n {
            adj2.chi[k] = control[k].clone();
            adj2.chi[k].scale(2.5);
        }
        let g = reduced_gradient(&adj2, &control, &w);
        for gk in g {
            assert!(gk.max_abs() == 0.0);
        }
    }
}
