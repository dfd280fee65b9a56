use super::{expm, MatError, Matrix, SymmetricMatrix};

// Above this value of ||A||_1 * T the block exponential is taken over a
// shorter step and doubled up, since the [[-A^T, I], [0, A]] blocks grow in
// opposite directions and a single exponential loses the small block.
const DIRECT_LIMIT: f64 = 1.0;

/// Cost Gramian `W(T) = ∫_0^T e^{A^T τ} e^{A τ} dτ`, so that
/// `x^T W(T) x = ∫_0^T ||e^{Aτ} x||^2 dτ`.
///
/// The base step uses the block exponential of `[[-A^T, I], [0, A]]`, reading
/// `W = F22^T F12`. Longer horizons are assembled with
/// `W(2h) = W(h) + e^{A^T h} W(h) e^{A h}`.
pub fn cost_gramian(a: &Matrix, t: f64) -> Result<SymmetricMatrix, MatError> {
    cost_gramian_with_flow(a, t).map(|(w, _)| w)
}

/// [`cost_gramian`] together with the flow `e^{A T}`, which falls out of the
/// same block exponential.
pub fn cost_gramian_with_flow(a: &Matrix, t: f64) -> Result<(SymmetricMatrix, Matrix), MatError> {
    let n = a.require_square()?;
    a.check_finite()?;
    if t < 0.0 {
        return Err(MatError::NegativeDuration(t));
    }
    if !t.is_finite() {
        return Err(MatError::NonFinite { row: 0, col: 0 });
    }

    let reach = a.norm1() * t;
    let doublings = if reach > DIRECT_LIMIT { (reach / DIRECT_LIMIT).log2().ceil() as i32 } else { 0 };
    let h = t * 2f64.powi(-doublings);

    let (mut w, mut e) = block_step(a, n, h)?;
    for _ in 0..doublings {
        let mut next = e.transpose().matmul(&w).matmul(&e);
        next.axpy(1.0, &w);
        w = next;
        e = &e * &e;
    }
    Ok((SymmetricMatrix::symmetrize(&w), e))
}

fn block_step(a: &Matrix, n: usize, h: f64) -> Result<(Matrix, Matrix), MatError> {
    let mut block = Matrix::zeros(2 * n, 2 * n);
    block.set_block(0, 0, &a.transpose().scale(-1.0));
    block.set_block(0, n, &Matrix::identity(n));
    block.set_block(n, n, a);
    let f = expm(&block, h)?;
    let f12 = f.sub_block(0, n, n, n);
    let f22 = f.sub_block(n, n, n, n);
    Ok((f22.transpose().matmul(&f12), f22))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dynamics_gives_scaled_identity() {
        let w = cost_gramian(&Matrix::zeros(2, 2), 3.0).unwrap();
        let d = w.as_matrix() - &Matrix::identity(2).scale(3.0);
        assert!(d.max_abs() < 1e-14);
    }

    #[test]
    fn scalar_closed_form() {
        for &(a, t) in &[(-1.0f64, 2.0f64), (0.4, 3.0), (-2.5, 0.1), (0.3, 40.0), (-1.0, 60.0)] {
            let w = cost_gramian(&Matrix::diag(&[a]), t).unwrap();
            let want = ((2.0 * a * t).exp() - 1.0) / (2.0 * a);
            let got = w.as_matrix()[(0, 0)];
            assert!(((got - want) / want).abs() < 1e-12, "a={a} t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn zero_duration() {
        let a = Matrix::from_rows(&[[0.3, 1.0], [-2.0, 0.1]]).unwrap();
        assert_eq!(cost_gramian(&a, 0.0).unwrap().as_matrix().max_abs(), 0.0);
    }

    #[test]
    fn negative_duration_rejected() {
        assert_eq!(cost_gramian(&Matrix::identity(2), -1.0).unwrap_err(), MatError::NegativeDuration(-1.0));
    }
}
