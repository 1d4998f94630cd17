//! Banded LU factorization with partial pivoting and transposed solves.
//!
//! The implicit step matrix on a structured grid couples only the 3x3
//! unknown blocks of Chebyshev-distance-one cells, so with cells ordered
//! along the shorter axis it has a fixed small bandwidth. One factorization
//! serves the whole run: the forward sweep solves `A x = b` and the adjoint
//! sweep solves `A^T x = b` with the same factors, which keeps the two
//! directions transposes of each other to rounding.
//!
//! Storage follows the LAPACK general-band convention: entry `(i, j)` lives
//! at `ab[kl + ku + i - j + ldab*j]` with `ldab = 2*kl + ku + 1`; the extra
//! `kl` rows hold fill created by row interchanges.

/// General band matrix with `kl` subdiagonals and `ku` superdiagonals.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    ab: Vec<f64>,
    ldab: usize,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ab: vec![0.0; ldab * n],
            ldab,
        }
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(i + self.ku >= j && j + self.kl >= i, "entry outside band");
        self.ku + i - j + self.ldab * j
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let o = self.offset(i, j);
        self.ab[o] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.ku < j || j + self.kl < i {
            0.0
        } else {
            self.ab[self.offset(i, j)]
        }
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += self.ab[self.ku + i - j + self.ldab * j] * xj;
            }
        }
    }

    /// y = A^T x.
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let mut s = 0.0;
            for i in lo..=hi {
                s += self.ab[self.ku + i - j + self.ldab * j] * x[i];
            }
            y[j] = s;
        }
    }

    /// LU-factor with partial pivoting.
    pub fn factor(&self) -> Result<BandLu, usize> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let ldab = 2 * kl + ku + 1;
        let kv = kl + ku; // row index of the diagonal in working storage
        let mut ab = vec![0.0; ldab * n];
        for j in 0..n {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl).min(n - 1);
            for i in lo..=hi {
                ab[kv + i - j + ldab * j] = self.ab[ku + i - j + self.ldab * j];
            }
        }
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search
            let mut jp = 0usize;
            let mut mx = ab[kv + ldab * j].abs();
            for i in 1..=km {
                let v = ab[kv + i + ldab * j].abs();
                if v > mx {
                    mx = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if mx == 0.0 {
                return Err(j);
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for jj in j..=ju {
                    let a = kv + j - jj + ldab * jj;
                    let b = kv + j + jp - jj + ldab * jj;
                    ab.swap(a, b);
                }
            }
            if km > 0 {
                let piv = ab[kv + ldab * j];
                for i in 1..=km {
                    ab[kv + i + ldab * j] /= piv;
                }
                for jj in (j + 1)..=ju {
                    let f = ab[kv + j - jj + ldab * jj];
                    if f != 0.0 {
                        for i in 1..=km {
                            ab[kv + j + i - jj + ldab * jj] -= ab[kv + i + ldab * j] * f;
                        }
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv,
        })
    }
}

/// Factored band matrix; solves overwrite the right-hand side.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Solve `A x = b` in place.
    pub fn solve(&self, x: &mut [f64]) {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        for j in 0..n.saturating_sub(1) {
            let ip = self.ipiv[j];
            if ip != j {
                x.swap(ip, j);
            }
            let km = kl.min(n - 1 - j);
            let xj = x[j];
            if xj != 0.0 {
                for i in 1..=km {
                    x[j + i] -= self.ab[kv + i + ldab * j] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.ab[kv + ldab * j];
            let xj = x[j];
            if xj != 0.0 {
                let lo = j.saturating_sub(kv);
                for i in lo..j {
                    x[i] -= self.ab[kv + i - j + ldab * j] * xj;
                }
            }
        }
    }

    /// Solve `A^T x = b` in place, reusing the same factors.
    pub fn solve_transpose(&self, x: &mut [f64]) {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        // U^T is lower triangular with bandwidth kl+ku.
        for j in 0..n {
            let lo = j.saturating_sub(kv);
            let mut s = x[j];
            for i in lo..j {
                s -= self.ab[kv + i - j + ldab * j] * x[i];
            }
            x[j] = s / self.ab[kv + ldab * j];
        }
        // L^T with the row interchanges applied in reverse order.
        for j in (0..n.saturating_sub(1)).rev() {
            let km = kl.min(n - 1 - j);
            let mut s = x[j];
            for i in 1..=km {
                s -= self.ab[kv + i + ldab * j] * x[j + i];
            }
            x[j] = s;
            let ip = self.ipiv[j];
            if ip != j {
                x.swap(ip, j);
            }
        }
    }
}

/// Band matrix together with its factorization; solves are residual-checked
/// and polished by iterative refinement when needed.
#[derive(Debug, Clone)]
pub struct FactoredBand {
    pub matrix: BandMatrix,
    lu: BandLu,
}

/// Outcome of a refined solve: solution is in the caller's buffer.
pub struct SolveQuality {
    pub rel_residual: f64,
}

impl FactoredBand {
    pub fn new(matrix: BandMatrix) -> Result<Self, usize> {
        let lu = matrix.factor()?;
        Ok(Self { matrix, lu })
    }

    fn refine(&self, b: &[f64], x: &mut [f64], transpose: bool) -> SolveQuality {
        let n = self.matrix.n;
        let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_b == 0.0 {
            x.fill(0.0);
            return SolveQuality { rel_residual: 0.0 };
        }
        let mut r = vec![0.0; n];
        let mut rel = f64::INFINITY;
        for pass in 0..3 {
            if transpose {
                self.matrix.matvec_transpose(x, &mut r);
            } else {
                self.matrix.matvec(x, &mut r);
            }
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
            rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / norm_b;
            if rel <= 1e-13 || pass == 2 {
                break;
            }
            let mut d = r.clone();
            if transpose {
                self.lu.solve_transpose(&mut d);
            } else {
                self.lu.solve(&mut d);
            }
            for i in 0..n {
                x[i] += d[i];
            }
        }
        SolveQuality { rel_residual: rel }
    }

    /// Solve `A x = b`; returns the achieved relative residual.
    pub fn solve(&self, b: &[f64], x: &mut [f64]) -> SolveQuality {
        x.copy_from_slice(b);
        self.lu.solve(x);
        self.refine(b, x, false)
    }

    /// Solve `A^T x = b`; returns the achieved relative residual.
    pub fn solve_transpose(&self, b: &[f64], x: &mut [f64]) -> SolveQuality {
        x.copy_from_slice(b);
        self.lu.solve_transpose(x);
        self.refine(b, x, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Independent dense Gaussian elimination with partial pivoting.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, p);
            x.swap(k, p);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            for j in k + 1..n {
                x[k] -= m[k][j] * x[j];
            }
            x[k] /= m[k][k];
        }
        x
    }

    fn random_band(n: usize, kl: usize, ku: usize, rng: &mut StdRng) -> (BandMatrix, Vec<Vec<f64>>) {
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        for j in 0..n {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl).min(n - 1);
            for i in lo..=hi {
                let mut v: f64 = rng.random_range(-1.0..1.0);
                if i == j {
                    v += 4.0; // keep comfortably nonsingular
                }
                band.add(i, j, v);
                dense[i][j] = v;
            }
        }
        (band, dense)
    }

    #[test]
    fn banded_solve_matches_dense_oracle() {
        let mut rng = StdRng::seed_from_u64(42);
        for &(n, kl, ku) in &[(1usize, 0usize, 0usize), (7, 2, 1), (25, 4, 6), (60, 9, 9)] {
            let (band, dense) = random_band(n, kl, ku, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = FactoredBand::new(band).unwrap();
            let mut x = vec![0.0; n];
            let q = f.solve(&b, &mut x);
            assert!(q.rel_residual < 1e-12);
            let xd = dense_solve(&dense, &b);
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-9, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn transposed_solve_matches_dense_transpose() {
        let mut rng = StdRng::seed_from_u64(43);
        for &(n, kl, ku) in &[(6usize, 1usize, 2usize), (30, 5, 3), (64, 8, 8)] {
            let (band, dense) = random_band(n, kl, ku, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = FactoredBand::new(band).unwrap();
            let mut x = vec![0.0; n];
            let q = f.solve_transpose(&b, &mut x);
            assert!(q.rel_residual < 1e-12);
            let mut dense_t = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    dense_t[i][j] = dense[j][i];
                }
            }
            let xd = dense_solve(&dense_t, &b);
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-9, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn solver_transpose_pair_is_adjoint() {
        // <A^{-1} a, b> == <a, A^{-T} b> to rounding with shared factors.
        let mut rng = StdRng::seed_from_u64(44);
        let (band, _) = random_band(40, 6, 6, &mut rng);
        let f = FactoredBand::new(band).unwrap();
        let a: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut xa = vec![0.0; 40];
        let mut xb = vec![0.0; 40];
        f.solve(&a, &mut xa);
        f.solve_transpose(&b, &mut xb);
        let lhs: f64 = xa.iter().zip(&b).map(|(x, y)| x * y).sum();
        let rhs: f64 = a.iter().zip(&xb).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn zero_rhs_gives_exact_zero() {
        let mut rng = StdRng::seed_from_u64(45);
        let (band, _) = random_band(20, 3, 3, &mut rng);
        let f = FactoredBand::new(band).unwrap();
        let b = vec![0.0; 20];
        let mut x = vec![1.0; 20];
        let q = f.solve(&b, &mut x);
        assert!(x.iter().all(|&v| v == 0.0));
        assert_eq!(q.rel_residual, 0.0);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut band = BandMatrix::zeros(3, 1, 1);
        band.add(0, 0, 1.0);
        band.add(2, 2, 1.0); // column 1 left entirely zero
        assert!(matches!(band.factor(), Err(1)));
    }
}
