use semicomp::field::{GridSpec, ScalarField, VectorField};
use semicomp::forward::{PhysParams, Scheme, TimeSpec};

fn main() {
    // --- energy audit dt study: decaying Taylor-Green shear on 64x64 ---
    let grid = GridSpec::new(64, 64, 1.0, 1.0);
    let pi = std::f64::consts::PI;
    let pr = PhysParams { rho: 1.0, nu: 0.05, beta: 0.25, gamma: 1e-3, slip: 0.0, quasi_incompressible: false };
    let v0 = VectorField::from_fn(grid, |x, y| {
        ((pi * x).sin() * (pi * y).cos(), -(pi * x).cos() * (pi * y).sin())
    });
    let p0 = ScalarField::zeros(grid);
    let mut prev: Option<f64> = None;
    for n_steps in [20usize, 40, 80, 160] {
        let time = TimeSpec::new(0.25, n_steps);
        let scheme = Scheme::new(grid, pr, time).unwrap();
        let traj = scheme.forward_solve(&v0, &p0, &[]).unwrap();
        let rep = scheme.energy_audit(&traj, None);
        let r = rep.max_abs_residual() / rep.initial_energy();
        let ratio = prev.map(|p| p / r).unwrap_or(0.0);
        println!("dt={:.5} residual/E0={:.5e} ratio_prev={:.3}", time.dt(), r, ratio);
        prev = Some(r);
    }

    // --- wave speed: pseudo-1D pulse, rho=1 beta=0.25 => c=2 ---
    let grid = GridSpec::new(256, 8, 10.0, 0.3125);
    let pr = PhysParams { rho: 1.0, nu: 1e-3, beta: 0.25, gamma: 1e-4, slip: 0.0, quasi_incompressible: false };
    let x0 = 2.5;
    let sigma = 0.15f64;
    let p0 = ScalarField::from_fn(grid, |x, _| 0.01 * (-((x - x0) * (x - x0)) / (2.0 * sigma * sigma)).exp());
    let v0 = VectorField::zeros(grid);
    let time = TimeSpec::new(3.0, 750);
    let scheme = Scheme::new(grid, pr, time).unwrap();
    let traj = scheme.forward_solve(&v0, &p0, &[]).unwrap();
    // probes at x=5.0 and x=7.5, mid row
    let probe = |x: f64| -> usize { (x / grid.dx()).round() as usize }; // cell i with center ~ x
    let (i1, i2) = (probe(5.0), probe(7.5));
    let jmid = 4;
    let mut t1 = 0.0; let mut m1 = f64::MIN;
    let mut t2 = 0.0; let mut m2 = f64::MIN;
    for k in 0..traj.len() {
        let a = traj.p[k].values[[i1, jmid]];
        let b = traj.p[k].values[[i2, jmid]];
        let t = k as f64 * time.dt();
        if a > m1 { m1 = a; t1 = t; }
        if b > m2 { m2 = b; t2 = t; }
    }
    let speed = (7.5 - 5.0) / (t2 - t1);
    println!("wave: t1={t1:.4} t2={t2:.4} speed={speed:.4} (target 2, err {:.2}%)", 100.0 * (speed - 2.0f64).abs() / 2.0);
}
