use super::{MatError, Matrix};

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct LuFactor {
    n: usize,
    lu: Matrix,
    perm: Vec<usize>,
    pivot_ratio: f64,
}

impl LuFactor {
    /// Factors `a`. Fails with [`MatError::Singular`] when the smallest pivot
    /// is below `n * eps` relative to the largest; the reported ratio is a
    /// cheap reciprocal-condition indicator.
    pub fn new(a: &Matrix) -> Result<Self, MatError> {
        let n = a.require_square()?;
        a.check_finite()?;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 {
                return Err(MatError::Singular { pivot_ratio: 0.0 });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] -= f * v;
                    }
                }
            }
        }

        let (pmin, pmax) =
            (0..n).map(|k| lu[(k, k)].abs()).fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let pivot_ratio = if n == 0 { 1.0 } else { pmin / pmax };
        if !(pivot_ratio > n as f64 * f64::EPSILON) {
            return Err(MatError::Singular { pivot_ratio });
        }
        Ok(Self { n, lu, perm, pivot_ratio })
    }

    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "rhs length");
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col: Vec<f64> = (0..b.rows()).map(|i| b[(i, j)]).collect();
            for (i, v) in self.solve(&col).into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Solves `L x = b` with a pivoted LU factorization.
pub fn solve_linear(l: &Matrix, b: &[f64]) -> Result<Vec<f64>, MatError> {
    if b.len() != l.rows() {
        return Err(MatError::DimensionMismatch {
            expected: format!("rhs of length {}", l.rows()),
            got: format!("{}", b.len()),
        });
    }
    if let Some(k) = b.iter().position(|v| !v.is_finite()) {
        return Err(MatError::NonFinite { row: k, col: 0 });
    }
    Ok(LuFactor::new(l)?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_returns_rhs() {
        let b = vec![0.5, -3.0, 7.25];
        assert_eq!(solve_linear(&Matrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn diagonal_system() {
        let x = solve_linear(&Matrix::diag(&[2.0, 4.0]), &[2.0, 4.0]).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn random_well_conditioned_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut l = Matrix::zeros(8, 8);
            for i in 0..8 {
                for j in 0..8 {
                    l[(i, j)] = rng.random_range(-1.0..1.0);
                }
                l[(i, i)] += 4.0;
            }
            let b: Vec<f64> = (0..8).map(|_| rng.random_range(-5.0..5.0)).collect();
            let x = solve_linear(&l, &b).unwrap();
            let r: Vec<f64> = l.mul_vec(&x).iter().zip(&b).map(|(a, c)| a - c).collect();
            assert!(norm(&r) <= 1e-9 * (l.frobenius_norm() * norm(&x) + norm(&b)));
        }
    }

    #[test]
    fn singular_is_reported() {
        let l = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        match solve_linear(&l, &[1.0, 1.0]) {
            Err(MatError::Singular { pivot_ratio }) => assert!(pivot_ratio < 1e-15),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn needs_pivoting() {
        let l = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(solve_linear(&l, &[3.0, 5.0]).unwrap(), vec![5.0, 3.0]);
    }
}
