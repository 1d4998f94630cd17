use semicomp::control::{optimize, Control, ControlProblem, Method, OptimizeOpts};
use semicomp::cost::{CostWeights, Targets};
use semicomp::field::{GridSpec, ScalarField, VectorField};
use semicomp::forward::{PhysParams, Scheme, TimeSpec};
use semicomp::verify::lipschitz_probe;
use std::time::Instant;

fn main() {
    let pi = std::f64::consts::PI;
    // --- Lipschitz probe on 32x32 ---
    let grid = GridSpec::new(32, 32, 1.0, 1.0);
    let pr = PhysParams { rho: 1.0, nu: 0.02, beta: 0.5, gamma: 1e-3, slip: 0.1, quasi_incompressible: false };
    let time = TimeSpec::new(0.5, 25);
    let scheme = Scheme::new(grid, pr, time).unwrap();
    let v0 = VectorField::from_fn(grid, |x, y| (0.5*(pi*x).sin()*(pi*y).cos(), -0.5*(pi*x).cos()*(pi*y).sin()));
    let p0 = ScalarField::from_fn(grid, |x, y| 0.3*(pi*x).cos()*(pi*y).cos());
    let u = Control::from_fn(grid, 25, time.dt(), |x, y, t| (0.3*(pi*y).sin()*(t).cos(), -0.3*(pi*x).sin()));
    let du = Control::from_fn(grid, 25, time.dt(), |x, y, _| (0.2*(2.0*pi*x).cos()*(pi*y).sin(), 0.1*(pi*x).sin()*(pi*y).cos()));
    let t0 = Instant::now();
    let entries = lipschitz_probe(&scheme, &v0, &p0, &u, &du, &[1e-2, 1e-3, 1e-4]).unwrap();
    for e in &entries { println!("eps={:.0e} ratio={:.6}", e.epsilon, e.ratio); }
    let rmin = entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    let rmax = entries.iter().map(|e| e.ratio).fold(0.0f64, f64::max);
    println!("lipschitz variation factor: {:.4}  ({:.1?})", rmax/rmin, t0.elapsed());

    // --- recoverable-target optimization on 32x32, 50 steps ---
    let time = TimeSpec::new(0.5, 50);
    let scheme = Scheme::new(grid, pr, time).unwrap();
    let u_star = Control::from_fn(grid, 50, time.dt(), |x, y, t| {
        (0.8*(pi*x).sin()*(pi*y).cos()*(2.0*t).cos(), -0.6*(pi*x).cos()*(pi*y).sin())
    });
    let t0 = Instant::now();
    let traj_star = scheme.forward_solve(&v0, &p0, &u_star.slabs).unwrap();
    let targets = Targets::from_trajectory(&scheme, &traj_star);
    let weights = CostWeights { kappa1: 1.0, kappa2: 1.0, kappa3: 1e-3, varkappa1: 0.1, varkappa2: 0.1, lambda1: 1.0, lambda2: 1.0 };
    let problem = ControlProblem { scheme: &scheme, v0: v0.clone(), p0: p0.clone(), weights, targets };
    let ustar_j = problem.cost(&u_star).unwrap();
    let dt = time.dt();
    println!("J(u*)={:.6e} vs (k3/2)||u*||^2={:.6e}", ustar_j, 0.5*1e-3*u_star.dot(&u_star, dt));
    let u0 = Control::zeros(grid, 50);
    let j0 = problem.cost(&u0).unwrap();
    let opts = OptimizeOpts { method: Method::Lbfgs, max_iters: 150, grad_tol: 1e-10, optimality_tol: Some(1e-4), ..OptimizeOpts::default() };
    let (u_opt, report) = optimize(&problem, &u0, &opts).unwrap();
    println!("J0={:.4e} Jfinal={:.4e} ratio={:.4} iters={} term={:?} opt_resid={:.3e} ({:.1?})",
        j0, report.final_j, report.final_j / j0, report.iterations.len()-1, report.termination,
        report.final_optimality_residual, t0.elapsed());
    let mut du = u_opt.clone(); du.add_scaled(-1.0, &u_star);
    println!("||u_opt - u*||/||u*|| = {:.3}", du.norm(dt)/u_star.norm(dt));
}
