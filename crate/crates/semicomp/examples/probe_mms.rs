use semicomp::forward::PhysParams;
use semicomp::verify::{run_mms, MmsCase, MmsRung};

fn main() {
    let pr = PhysParams { rho: 1.0, nu: 0.05, beta: 1.0, gamma: 0.01, slip: 0.0, quasi_incompressible: false };
    // spatial-only: steady case, fixed small dt
    let case = MmsCase::SteadyTrig { amp_v: 0.5, amp_p: 0.3 };
    let ladder = [
        MmsRung { nx: 16, ny: 16, n_steps: 10 },
        MmsRung { nx: 32, ny: 32, n_steps: 10 },
        MmsRung { nx: 64, ny: 64, n_steps: 10 },
    ];
    let rep = run_mms(&case, &pr, 1.0, 1.0, 0.02, &ladder).unwrap();
    for e in &rep.entries { println!("steady  h={:.4} dt={:.4} ev={:.4e} ep={:.4e}", e.h, e.dt, e.err_v, e.err_p); }
    let (sv, sp) = rep.slopes_vs_h();
    println!("steady spatial slopes: v={sv:.3} p={sp:.3}");

    // temporal-only
    let case = MmsCase::TimePressure { base: 1.0, amp: 0.5, omega: 3.0 };
    let ladder = [
        MmsRung { nx: 8, ny: 8, n_steps: 8 },
        MmsRung { nx: 8, ny: 8, n_steps: 16 },
        MmsRung { nx: 8, ny: 8, n_steps: 32 },
        MmsRung { nx: 8, ny: 8, n_steps: 64 },
    ];
    let rep = run_mms(&case, &pr, 1.0, 1.0, 1.0, &ladder).unwrap();
    for e in &rep.entries { println!("time    dt={:.4} ev={:.4e} ep={:.4e}", e.dt, e.err_v, e.err_p); }
    println!("temporal slope p: {:.3}", rep.pressure_slope_vs_dt());

    // full space-time, dt ~ h^2
    let case = MmsCase::SpaceTime { amp_v: 0.4, amp_p: 0.3, omega: 2.0 };
    let ladder = [
        MmsRung { nx: 16, ny: 16, n_steps: 4 },
        MmsRung { nx: 32, ny: 32, n_steps: 16 },
        MmsRung { nx: 64, ny: 64, n_steps: 64 },
    ];
    let rep = run_mms(&case, &pr, 1.0, 1.0, 0.2, &ladder).unwrap();
    for e in &rep.entries { println!("spacetime h={:.4} dt={:.5} ev={:.4e} ep={:.4e}", e.h, e.dt, e.err_v, e.err_p); }
    let (sv, sp) = rep.slopes_vs_h();
    println!("spacetime slopes vs h: v={sv:.3} p={sp:.3}");
}
