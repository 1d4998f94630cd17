//! Reduced-cost evaluation and iterative minimization over the distributed
//! bulk control.
//!
//! The control is piecewise constant per time step, discretized exactly like
//! the state. Descent directions come from steepest descent or a limited-
//! memory quasi-Newton recursion; an Armijo backtracking line search
//! guarantees monotone decrease of the accepted iterates. With gradients
//! assembled by the transposed discrete step, a stationary iterate satisfies
//! `u = chi / kappa3` up to the gradient tolerance.

use crate::adjoint::{adjoint_solve, reduced_gradient};
use crate::cost::{cost_evaluate, CostWeights, Targets};
use crate::error::Result;
use crate::field::{GridSpec, ScalarField, VectorField};
use crate::forward::{Scheme, Trajectory};
use crate::ops;

/// Piecewise-constant control history, one vector field per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    pub slabs: Vec<VectorField>,
}

impl Control {
    pub fn zeros(grid: GridSpec, n_steps: usize) -> Self {
        Self {
            slabs: vec![VectorField::zeros(grid); n_steps],
        }
    }

    pub fn from_fn(grid: GridSpec, n_steps: usize, dt: f64, f: impl Fn(f64, f64, f64) -> (f64, f64)) -> Self {
        let slabs = (0..n_steps)
            .map(|k| {
                let t = (k as f64 + 0.5) * dt;
                VectorField::from_fn(grid, |x, y| f(x, y, t))
            })
            .collect();
        Self { slabs }
    }

    pub fn len(&self) -> usize {
        self.slabs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slabs.is_empty()
    }

    /// L2(I x Omega) inner product with the slab rectangle rule.
    pub fn dot(&self, other: &Control, dt: f64) -> f64 {
        self.slabs
            .iter()
            .zip(&other.slabs)
            .map(|(a, b)| ops::inner_vec(a, b))
            .sum::<f64>()
            * dt
    }

    pub fn norm(&self, dt: f64) -> f64 {
        self.dot(self, dt).sqrt()
    }

    pub fn add_scaled(&mut self, a: f64, other: &Control) {
        for (s, o) in self.slabs.iter_mut().zip(&other.slabs) {
            s.add_scaled(a, o);
        }
    }

    pub fn scale(&mut self, a: f64) {
        for s in self.slabs.iter_mut() {
            s.scale(a);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slabs.iter().all(|s| s.interior_is_finite())
    }
}

/// One optimal-control instance: scheme, initial data, weights and targets.
pub struct ControlProblem<'a> {
    pub scheme: &'a Scheme,
    pub v0: VectorField,
    pub p0: ScalarField,
    pub weights: CostWeights,
    pub targets: Targets,
}

impl<'a> ControlProblem<'a> {
    /// Cost of a control (one forward sweep), returning the trajectory so an
    /// accepted line-search point can reuse it for the gradient.
    pub fn cost_with_trajectory(&self, control: &Control) -> Result<(f64, Trajectory)> {
        let traj = self
            .scheme
            .forward_solve(&self.v0, &self.p0, &control.slabs)?;
        let j = cost_evaluate(self.scheme, &traj, &control.slabs, &self.weights, &self.targets);
        Ok((j, traj))
    }

    pub fn cost(&self, control: &Control) -> Result<f64> {
        Ok(self.cost_with_trajectory(control)?.0)
    }

    /// Gradient by one backward sweep over an existing trajectory.
    pub fn gradient_from_trajectory(
        &self,
        traj: &Trajectory,
        control: &Control,
    ) -> Result<Control> {
        let adj = adjoint_solve(self.scheme, traj, &self.weights, &self.targets)?;
        Ok(Control {
            slabs: reduced_gradient(&adj, &control.slabs, &self.weights),
        })
    }

    /// Cost and gradient: exactly one forward and one backward sweep.
    pub fn evaluate(&self, control: &Control) -> Result<(f64, Control)> {
        let (j, traj) = self.cost_with_trajectory(control)?;
        let g = self.gradient_from_trajectory(&traj, control)?;
        Ok((j, g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    SteepestDescent,
    Lbfgs,
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizeOpts {
    pub method: Method,
    pub max_iters: usize,
    /// Stop when `||g|| <= grad_tol * max(1, ||g0||)`.
    pub grad_tol: f64,
    /// Optional absolute stationarity stop: `||g|| <= tol * (1 + ||chi||)`,
    /// the discrete check of `u = chi / kappa3`.
    pub optimality_tol: Option<f64>,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub ls_max: usize,
    pub memory: usize,
}

impl Default for OptimizeOpts {
    fn default() -> Self {
        Self {
            method: Method::Lbfgs,
            max_iters: 200,
            grad_tol: 1e-6,
            optimality_tol: None,
            armijo_c: 1e-4,
            backtrack: 0.5,
            ls_max: 30,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Gradient tolerance reached.
    Converged,
    /// The initial iterate already satisfied the tolerance.
    StationaryStart,
    MaxIterations,
    /// No Armijo decrease within the trial cap; diagnostic, not an abort.
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    pub j: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub ls_trials: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    pub final_j: f64,
    pub final_grad_norm: f64,
    /// `||kappa3 u - chi|| / max(1, ||chi||)` at the returned iterate.
    pub final_optimality_residual: f64,
}

struct LbfgsPair {
    s: Control,
    y: Control,
    rho: f64,
}

/// Two-loop recursion; `h0_scale` multiplies the identity seed.
fn lbfgs_direction(g: &Control, history: &[LbfgsPair], h0_scale: f64, dt: f64) -> Control {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.iter().rev() {
        let a = pair.rho * pair.s.dot(&q, dt);
        q.add_scaled(-a, &pair.y);
        alphas.push(a);
    }
    q.scale(h0_scale);
    for (pair, &a) in history.iter().zip(alphas.iter().rev()) {
        let b = pair.rho * pair.y.dot(&q, dt);
        q.add_scaled(a - b, &pair.s);
    }
    q.scale(-1.0);
    q
}

/// Minimize the reduced cost from `u0`. Returns the final iterate with a
/// full per-iteration report; a failed line search terminates with the last
/// accepted iterate rather than an error.
pub fn optimize(
    problem: &ControlProblem,
    u0: &Control,
    opts: &OptimizeOpts,
) -> Result<(Control, OptimizeReport)> {
    assert!(
        problem.weights.kappa3 > 0.0,
        "optimization requires kappa3 > 0"
    );
    let dt = problem.scheme.dt();
    let kappa3 = problem.weights.kappa3;
    let mut u = u0.clone();
    let (mut j, mut g) = problem.evaluate(&u)?;
    let mut grad_norm = g.norm(dt);
    let g0_norm = grad_norm;
    let tol = opts.grad_tol * g0_norm.max(1.0);

    let optimality_residual = |u: &Control, g: &Control, gn: f64| -> f64 {
        // chi = kappa3 u - g
        let mut chi = u.clone();
        chi.scale(kappa3);
        chi.add_scaled(-1.0, g);
        gn / chi.norm(dt).max(1.0)
    };
    let stationarity_ok = |u: &Control, g: &Control, gn: f64| -> bool {
        match opts.optimality_tol {
            Some(t) => {
                let mut chi = u.clone();
                chi.scale(kappa3);
                chi.add_scaled(-1.0, g);
                gn <= t * (1.0 + chi.norm(dt))
            }
            None => false,
        }
    };

    let mut report = OptimizeReport {
        iterations: vec![IterationRecord {
            iter: 0,
            j,
            grad_norm,
            step: 0.0,
            ls_trials: 0,
            accepted: true,
        }],
        termination: Termination::MaxIterations,
        final_j: j,
        final_grad_norm: grad_norm,
        final_optimality_residual: optimality_residual(&u, &g, grad_norm),
    };

    if grad_norm <= tol || stationarity_ok(&u, &g, grad_norm) {
        report.termination = Termination::StationaryStart;
        return Ok((u, report));
    }

    let mut history: Vec<LbfgsPair> = Vec::new();
    for iter in 1..=opts.max_iters {
        let mut d = match opts.method {
            Method::SteepestDescent => {
                let mut d = g.clone();
                d.scale(-1.0 / kappa3);
                d
            }
            Method::Lbfgs => {
                let h0 = match history.last() {
                    Some(pair) => pair.s.dot(&pair.y, dt) / pair.y.dot(&pair.y, dt),
                    None => 1.0 / kappa3,
                };
                lbfgs_direction(&g, &history, h0, dt)
            }
        };
        let mut gd = g.dot(&d, dt);
        if !(gd < 0.0) {
            // quasi-Newton direction lost descent to rounding: restart
            history.clear();
            d = g.clone();
            d.scale(-1.0 / kappa3);
            gd = g.dot(&d, dt);
        }

        let mut alpha = 1.0;
        let mut trials = 0usize;
        let mut accepted = None;
        while trials < opts.ls_max {
            trials += 1;
            let mut u_trial = u.clone();
            u_trial.add_scaled(alpha, &d);
            let (j_trial, traj_trial) = problem.cost_with_trajectory(&u_trial)?;
            if j_trial <= j + opts.armijo_c * alpha * gd {
                accepted = Some((u_trial, j_trial, traj_trial, alpha));
                break;
            }
            alpha *= opts.backtrack;
        }
        let Some((u_new, j_new, traj_new, step)) = accepted else {
            report.termination = Termination::LineSearchFailed;
            report.iterations.push(IterationRecord {
                iter,
                j,
                grad_norm,
                step: 0.0,
                ls_trials: trials,
                accepted: false,
            });
            break;
        };
        let g_new = problem.gradient_from_trajectory(&traj_new, &u_new)?;
        let gn_new = g_new.norm(dt);
        report.iterations.push(IterationRecord {
            iter,
            j: j_new,
            grad_norm: gn_new,
            step,
            ls_trials: trials,
            accepted: true,
        });

        if opts.method == Method::Lbfgs {
            let mut s = d;
            s.scale(step);
            let mut y = g_new.clone();
            y.add_scaled(-1.0, &g);
            let sy = s.dot(&y, dt);
            if sy > 1e-12 * s.norm(dt) * y.norm(dt) {
                history.push(LbfgsPair {
                    rho: 1.0 / sy,
                    s,
                    y,
                });
                if history.len() > opts.memory {
                    history.remove(0);
                }
            }
        }

        u = u_new;
        j = j_new;
        g = g_new;
        grad_norm = gn_new;
        if grad_norm <= tol || stationarity_ok(&u, &g, grad_norm) {
            report.termination = Termination::Converged;
            break;
        }
    }

    report.final_j = j;
    report.final_grad_norm = grad_norm;
    report.final_optimality_residual = optimality_residual(&u, &g, grad_norm);
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{PhysParams, TimeSpec};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn params() -> PhysParams {
        PhysParams {
            rho: 1.0,
            nu: 0.04,
            beta: 0.5,
            gamma: 0.005,
            slip: 0.2,
            quasi_incompressible: false,
        }
    }

    fn full_weights() -> CostWeights {
        CostWeights {
            kappa1: 1.0,
            kappa2: 0.7,
            kappa3: 0.5,
            varkappa1: 0.3,
            varkappa2: 0.2,
            lambda1: 0.8,
            lambda2: 0.6,
        }
    }

    fn random_control(grid: GridSpec, n: usize, seed: u64, amp: f64) -> Control {
        let mut rng = StdRng::seed_from_u64(seed);
        let slabs = (0..n)
            .map(|_| {
                let mut u = VectorField::zeros(grid);
                for i in 1..=grid.nx {
                    for j in 1..=grid.ny {
                        u.x.values[[i, j]] = amp * rng.random_range(-1.0..1.0);
                        u.y.values[[i, j]] = amp * rng.random_range(-1.0..1.0);
                    }
                }
                u
            })
            .collect();
        Control { slabs }
    }

    #[test]
    fn pure_control_energy_cost_and_gradient() {
        let grid = GridSpec::new(6, 6, 1.0, 1.0);
        let scheme = Scheme::new(grid, params(), TimeSpec::new(0.2, 5)).unwrap();
        let problem = ControlProblem {
            scheme: &scheme,
            v0: VectorField::zeros(grid),
            p0: ScalarField::zeros(grid),
            weights: CostWeights::control_only(2.0),
            targets: Targets::zero(),
        };
        let u = random_control(grid, 5, 9, 0.5);
        let (j, g) = problem.evaluate(&u).unwrap();
        let dt = scheme.dt();
        let expect_j = 0.5 * 2.0 * u.dot(&u, dt);
        assert!((j - expect_j).abs() < 1e-12 * expect_j);
        // g = kappa3 u exactly (adjoint vanishes)
        let mut expect_g = u.clone();
        expect_g.scale(2.0);
        for k in 0..u.len() {
            assert_eq!(g.slabs[k], expect_g.slabs[k]);
        }
    }

    /// Quick directional finite-difference check of the full nonlinear
    /// gradient; the systematic sweep lives in the verification module.
    #[test]
    fn gradient_matches_central_difference() {
        let grid = GridSpec::new(5, 5, 1.0, 1.0);
        let scheme = Scheme::new(grid, params(), TimeSpec::new(0.15, 3)).unwrap();
        let v0 = VectorField::from_fn(grid, |x, y| {
            (0.3 * (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).cos(),
             -0.3 * (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).sin())
        });
        let p0 = ScalarField::from_fn(grid, |x, _| 0.2 * (std::f64::consts::PI * x).cos());
        let problem = ControlProblem {
            scheme: &scheme,
            v0,
            p0,
            weights: full_weights(),
            targets: Targets::zero(),
        };
        let u = random_control(grid, 3, 17, 0.4);
        let delta = random_control(grid, 3, 18, 1.0);
        let (_, g) = problem.evaluate(&u).unwrap();
        let dt = scheme.dt();
        let analytic = g.dot(&delta, dt);
        let eps = 1e-5;
        let mut up = u.clone();
        up.add_scaled(eps, &delta);
        let mut um = u.clone();
        um.add_scaled(-eps, &delta);
        let fd = (problem.cost(&up).unwrap() - problem.cost(&um).unwrap()) / (2.0 * eps);
        assert!(
            (analytic - fd).abs() <= 1e-7 * fd.abs().max(1e-10),
            "analytic {analytic} vs fd {fd}"
        );
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let grid = GridSpec::new(5, 5, 1.0, 1.0);
        let scheme = Scheme::new(grid, params(), TimeSpec::new(0.1, 3)).unwrap();
        let problem = ControlProblem {
            scheme: &scheme,
            v0: VectorField::zeros(grid),
            p0: ScalarField::zeros(grid),
            weights: CostWeights::control_only(1.0),
            targets: Targets::zero(),
        };
        let u0 = Control::zeros(grid, 3);
        let (u, report) = optimize(&problem, &u0, &OptimizeOpts::default()).unwrap();
        assert_eq!(report.termination, Termination::StationaryStart);
        assert_eq!(report.iterations.len(), 1);
        assert_eq!(u, u0);
    }

    #[test]
    fn pure_quadratic_converges_to_zero_control() {
        let grid = GridSpec::new(5, 5, 1.0, 1.0);
        let scheme = Scheme::new(grid, params(), TimeSpec::new(0.1, 4)).unwrap();
        let problem = ControlProblem {
            scheme: &scheme,
            v0: VectorField::zeros(grid),
            p0: ScalarField::zeros(grid),
            weights: CostWeights::control_only(3.0),
            targets: Targets::zero(),
        };
        let u0 = random_control(grid, 4, 23, 1.0);
        let j0 = problem.cost(&u0).unwrap();
        for method in [Method::SteepestDescent, Method::Lbfgs] {
            let opts = OptimizeOpts {
                method,
                grad_tol: 1e-10,
                max_iters: 50,
                ..OptimizeOpts::default()
            };
            let (u, report) = optimize(&problem, &u0, &opts).unwrap();
            assert_eq!(report.termination, Termination::Converged);
            assert!(report.final_j < 1e-12 * j0);
            assert!(u.norm(scheme.dt()) < 1e-5);
            // accepted cost values strictly decrease
            let accepted: Vec<f64> = report
                .iterations
                .iter()
                .filter(|r| r.accepted)
                .map(|r| r.j)
                .collect();
            for w in accepted.windows(2) {
                assert!(w[1] < w[0]);
            }
        }
    }

    /// Scaling all weights by a power of two scales J and g exactly and
    /// leaves the iterate sequence unchanged.
    #[test]
    fn weight_scaling_invariance() {
        let grid = GridSpec::new(5, 5, 1.0, 1.0);
        let scheme = Scheme::new(grid, params(), TimeSpec::new(0.12, 3)).unwrap();
        let v0 = VectorField::from_fn(grid, |x, y| (0.2 * x * (1.0 - x), -0.1 * y));
        let p0 = ScalarField::constant(grid, 0.1);
        let mk = |s: f64| ControlProblem {
            scheme: &scheme,
            v0: v0.clone(),
            p0: p0.clone(),
            weights: full_weights().scaled(s),
            targets: Targets::zero(),
        };
        let p1 = mk(1.0);
        let p4 = mk(4.0);
        let u0 = random_control(grid, 3, 29, 0.3);
        let opts = OptimizeOpts {
            max_iters: 12,
            grad_tol: 1e-14,
            ..OptimizeOpts::default()
        };
        let (u1, r1) = optimize(&p1, &u0, &opts).unwrap();
        let (u4, r4) = optimize(&p4, &u0, &opts).unwrap();
        assert_eq!(r1.iterations.len(), r4.iterations.len());
        for (a, b) in r1.iterations.iter().zip(&r4.iterations) {
            assert!((b.j - 4.0 * a.j).abs() <= 1e-12 * a.j.abs().max(1e-12));
            assert_eq!(a.step, b.step);
            assert_eq!(a.ls_trials, b.ls_trials);
        }
        let dt = scheme.dt();
        let mut diff = u1.clone();
        diff.add_scaled(-1.0, &u4);
        assert!(diff.norm(dt) <= 1e-12 * u1.norm(dt).max(1e-12));
    }
}
