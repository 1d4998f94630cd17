//! Second-order central-difference operators and midpoint quadratures.
//!
//! All stencils read the one-cell ghost layer, so callers must have filled
//! ghosts consistently with the operator's boundary condition. Results are
//! returned out of place with the same grid; ghost entries of results are
//! left at zero.

use crate::boundary::BoundaryTrace;
use crate::field::{ScalarField, SymTensorField, VectorField};

/// d/dx by central differences on the interior.
pub fn ddx(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let h2 = 2.0 * g.dx();
    let mut out = ScalarField::zeros(g);
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            out.values[[i, j]] = (f.values[[i + 1, j]] - f.values[[i - 1, j]]) / h2;
        }
    }
    out
}

/// d/dy by central differences on the interior.
pub fn ddy(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let h2 = 2.0 * g.dy();
    let mut out = ScalarField::zeros(g);
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            out.values[[i, j]] = (f.values[[i, j + 1]] - f.values[[i, j - 1]]) / h2;
        }
    }
    out
}

/// Exact transpose of [`ddx`]: scatter interior weights into a padded array.
/// Accumulates into `out`, which is indexed like a padded field.
pub fn ddx_transpose(w: &ScalarField, out: &mut ScalarField) {
    let g = w.grid;
    let h2 = 2.0 * g.dx();
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            let v = w.values[[i, j]] / h2;
            out.values[[i + 1, j]] += v;
            out.values[[i - 1, j]] -= v;
        }
    }
}

/// Exact transpose of [`ddy`].
pub fn ddy_transpose(w: &ScalarField, out: &mut ScalarField) {
    let g = w.grid;
    let h2 = 2.0 * g.dy();
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            let v = w.values[[i, j]] / h2;
            out.values[[i, j + 1]] += v;
            out.values[[i, j - 1]] -= v;
        }
    }
}

/// d2/dx2 on the interior.
pub fn d2dx2(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let dx2 = g.dx() * g.dx();
    let mut out = ScalarField::zeros(g);
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            out.values[[i, j]] =
                (f.values[[i + 1, j]] - 2.0 * f.values[[i, j]] + f.values[[i - 1, j]]) / dx2;
        }
    }
    out
}

/// d2/dy2 on the interior.
pub fn d2dy2(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let dy2 = g.dy() * g.dy();
    let mut out = ScalarField::zeros(g);
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            out.values[[i, j]] =
                (f.values[[i, j + 1]] - 2.0 * f.values[[i, j]] + f.values[[i, j - 1]]) / dy2;
        }
    }
    out
}

/// Mixed derivative d2/dxdy on the interior.
pub fn d2dxdy(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let q = 4.0 * g.dx() * g.dy();
    let mut out = ScalarField::zeros(g);
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            out.values[[i, j]] = (f.values[[i + 1, j + 1]] - f.values[[i + 1, j - 1]]
                - f.values[[i - 1, j + 1]]
                + f.values[[i - 1, j - 1]])
                / q;
        }
    }
    out
}

/// Divergence of the viscous stress, `div(nu E(v))`, for constant viscosity:
/// component x gets `nu (vx_xx + (vx_yy + vy_xy)/2)` and symmetrically for y.
pub fn viscous(v: &VectorField, nu: f64) -> VectorField {
    let g = v.grid();
    let mut out = VectorField::zeros(g);
    let xx = d2dx2(&v.x);
    let xyy = d2dy2(&v.x);
    let yxy = d2dxdy(&v.y);
    let yy = d2dy2(&v.y);
    let yxx = d2dx2(&v.y);
    let xxy = d2dxdy(&v.x);
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            out.x.values[[i, j]] = nu
                * (xx.values[[i, j]] + 0.5 * (xyy.values[[i, j]] + yxy.values[[i, j]]));
            out.y.values[[i, j]] = nu
                * (yy.values[[i, j]] + 0.5 * (yxx.values[[i, j]] + xxy.values[[i, j]]));
        }
    }
    out
}

/// Pressure gradient.
pub fn grad(p: &ScalarField) -> VectorField {
    VectorField {
        x: ddx(p),
        y: ddy(p),
    }
}

/// Velocity divergence.
pub fn div(v: &VectorField) -> ScalarField {
    let mut out = ddx(&v.x);
    let dy = ddy(&v.y);
    out.add_scaled(1.0, &dy);
    out
}

/// Five-point Laplacian.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let (dx2, dy2) = (g.dx() * g.dx(), g.dy() * g.dy());
    let mut out = ScalarField::zeros(g);
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            out.values[[i, j]] = (f.values[[i + 1, j]] - 2.0 * f.values[[i, j]]
                + f.values[[i - 1, j]])
                / dx2
                + (f.values[[i, j + 1]] - 2.0 * f.values[[i, j]] + f.values[[i, j - 1]]) / dy2;
        }
    }
    out
}

/// Symmetric velocity gradient `E(v) = (grad v + grad v^T)/2`.
pub fn strain(v: &VectorField) -> SymTensorField {
    let xx = ddx(&v.x);
    let yy = ddy(&v.y);
    let mut xy = ddy(&v.x);
    let dxvy = ddx(&v.y);
    xy.add_scaled(1.0, &dxvy);
    xy.scale(0.5);
    SymTensorField { xx, xy, yy }
}

/// Convective derivative `(w . grad) f` of a scalar.
pub fn convect_scalar(w: &VectorField, f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let fx = ddx(f);
    let fy = ddy(f);
    let mut out = ScalarField::zeros(g);
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            out.values[[i, j]] = w.x.values[[i, j]] * fx.values[[i, j]]
                + w.y.values[[i, j]] * fy.values[[i, j]];
        }
    }
    out
}

/// Convective derivative `(w . grad) f` of a vector, componentwise.
pub fn convect_vector(w: &VectorField, f: &VectorField) -> VectorField {
    VectorField {
        x: convect_scalar(w, &f.x),
        y: convect_scalar(w, &f.y),
    }
}

/// Midpoint-rule volume integral over the interior cells.
pub fn integrate_volume(f: &ScalarField) -> f64 {
    let g = f.grid;
    let mut s = 0.0;
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            s += f.values[[i, j]];
        }
    }
    s * g.cell_area()
}

/// Midpoint-rule boundary integral: face values times face lengths.
pub fn integrate_boundary(tr: &BoundaryTrace, dx: f64, dy: f64) -> f64 {
    let horiz: f64 = tr.bottom.iter().chain(&tr.top).sum::<f64>() * dx;
    let vert: f64 = tr.left.iter().chain(&tr.right).sum::<f64>() * dy;
    horiz + vert
}

/// L2 inner product of interior values under the midpoint quadrature.
pub fn inner(a: &ScalarField, b: &ScalarField) -> f64 {
    debug_assert_eq!(a.grid, b.grid);
    let g = a.grid;
    let mut s = 0.0;
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            s += a.values[[i, j]] * b.values[[i, j]];
        }
    }
    s * g.cell_area()
}

pub fn inner_vec(a: &VectorField, b: &VectorField) -> f64 {
    inner(&a.x, &b.x) + inner(&a.y, &b.y)
}

pub fn norm_l2(a: &ScalarField) -> f64 {
    inner(a, a).sqrt()
}

pub fn norm_l2_vec(a: &VectorField) -> f64 {
    inner_vec(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{fill_scalar, trace_scalar, FillCoefs};
    use crate::field::GridSpec;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const EVEN: FillCoefs = FillCoefs { cx: 1.0, cy: 1.0 };

    /// Pad with an even reflection so linear/quadratic exactness holds away
    /// from walls; assertions below only look at cells with full interior
    /// stencils where padding does not matter.
    fn padded(g: GridSpec, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let mut s = ScalarField::from_fn(g, f);
        fill_scalar(&mut s, EVEN);
        s
    }

    #[test]
    fn gradient_exact_on_linears() {
        let g = GridSpec::new(8, 6, 2.0, 1.5);
        let p = padded(g, |x, y| 3.0 * x - 2.0 * y + 1.0);
        let gr = grad(&p);
        for i in 2..g.nx {
            for j in 2..g.ny {
                assert!((gr.x.values[[i, j]] - 3.0).abs() < 1e-12);
                assert!((gr.y.values[[i, j]] + 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn strain_of_simple_shear() {
        let g = GridSpec::new(8, 8, 1.0, 1.0);
        let mut v = VectorField::from_fn(g, |_, y| (y, 0.0));
        fill_scalar(&mut v.x, EVEN);
        fill_scalar(&mut v.y, EVEN);
        let e = strain(&v);
        for i in 2..g.nx {
            for j in 2..g.ny {
                assert!(e.xx.values[[i, j]].abs() < 1e-12);
                assert!(e.yy.values[[i, j]].abs() < 1e-12);
                assert!((e.xy.values[[i, j]] - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        let g = GridSpec::new(10, 10, 1.0, 1.0);
        let f = padded(g, |x, y| x * x + y * y);
        let l = laplacian(&f);
        for i in 2..g.nx {
            for j in 2..g.ny {
                assert!((l.values[[i, j]] - 4.0).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn integrals_of_constants_and_linears() {
        let g = GridSpec::new(20, 30, 2.0, 3.0);
        let one = ScalarField::constant(g, 1.0);
        assert!((integrate_volume(&one) - 6.0).abs() < 1e-12);
        let tr = trace_scalar(&one, EVEN);
        assert!((integrate_boundary(&tr, g.dx(), g.dy()) - 10.0).abs() < 1e-12);
        // Midpoint rule is exact for linears on uniform grids.
        let gu = GridSpec::new(16, 16, 1.0, 1.0);
        let fx = ScalarField::from_fn(gu, |x, _| x);
        assert!((integrate_volume(&fx) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn stencils_are_linear() {
        let g = GridSpec::new(7, 9, 1.0, 2.0);
        let mut rng = StdRng::seed_from_u64(11);
        let mut f1 = ScalarField::zeros(g);
        let mut f2 = ScalarField::zeros(g);
        for v in f1.values.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        for v in f2.values.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let (a, b) = (1.7, -0.3);
        let mut comb = f1.clone();
        comb.scale(a);
        comb.add_scaled(b, &f2);
        // combine ghosts as well so the stencil sees the combination
        for i in 0..g.nx + 2 {
            for j in 0..g.ny + 2 {
                comb.values[[i, j]] = a * f1.values[[i, j]] + b * f2.values[[i, j]];
            }
        }
        for op in [ddx, ddy, laplacian] {
            let lhs = op(&comb);
            let r1 = op(&f1);
            let r2 = op(&f2);
            for i in 1..=g.nx {
                for j in 1..=g.ny {
                    let rhs = a * r1.values[[i, j]] + b * r2.values[[i, j]];
                    assert!((lhs.values[[i, j]] - rhs).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn derivative_transposes_are_exact() {
        let g = GridSpec::new(6, 5, 1.0, 1.0);
        let mut rng = StdRng::seed_from_u64(3);
        let mut a = ScalarField::zeros(g); // padded input
        for v in a.values.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let mut w = ScalarField::zeros(g); // interior weights
        for i in 1..=g.nx {
            for j in 1..=g.ny {
                w.values[[i, j]] = rng.random_range(-1.0..1.0);
            }
        }
        for (op, opt) in [
            (ddx as fn(&ScalarField) -> ScalarField, ddx_transpose as fn(&ScalarField, &mut ScalarField)),
            (ddy, ddy_transpose),
        ] {
            let da = op(&a);
            let mut wt = ScalarField::zeros(g);
            opt(&w, &mut wt);
            let lhs: f64 = da
                .values
                .iter()
                .zip(w.values.iter())
                .map(|(x, y)| x * y)
                .sum();
            let rhs: f64 = a
                .values
                .iter()
                .zip(wt.values.iter())
                .map(|(x, y)| x * y)
                .sum();
            assert!((lhs - rhs).abs() < 1e-13 * lhs.abs().max(1.0));
        }
    }
}
