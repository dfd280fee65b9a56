//! Two scalar facts used when bounding the quadratic cost along a path:
//! a lower growth bound for `||e^{At}x||²` and the expected integral of an
//! exponential over an exponentially distributed window.

use rand::Rng;
use thiserror::Error;

use crate::matlib::{min_eig_sym, MatError, Matrix, SymmetricMatrix};
use crate::sim::{replica_rng, sample_exponential};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LemmaError {
    #[error("exponent {a} must be below the rate {lambda}")]
    ExponentTooLarge { lambda: f64, a: f64 },
    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// `||e^{At}x||² ≥ e^{c0 t}||x||²` for all `t ≥ 0`, with `c0 = λ_min(A + A^T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthBound {
    pub c0: f64,
}

impl GrowthBound {
    /// Lower bound on `||e^{At}x||²` given `||x||²`.
    pub fn lower_bound(&self, t: f64, norm_sq: f64) -> f64 {
        (self.c0 * t).exp() * norm_sq
    }
}

pub fn growth_constant(a: &Matrix) -> Result<GrowthBound, MatError> {
    a.require_square()?;
    a.check_finite()?;
    let sym = SymmetricMatrix::symmetrize(&(a + &a.transpose()));
    Ok(GrowthBound { c0: min_eig_sym(&sym) })
}

fn check_params(lambda: f64, a: f64) -> Result<(), LemmaError> {
    if !(lambda > 0.0) {
        return Err(LemmaError::NonPositiveRate(lambda));
    }
    if !(a < lambda) {
        return Err(LemmaError::ExponentTooLarge { lambda, a });
    }
    Ok(())
}

/// `E{∫_b^{b+X} e^{at} dt} = e^{ab} / (λ - a)` for `X ~ Exp(λ)`, `a < λ`.
pub fn exp_integral_expectation(lambda: f64, a: f64, b: f64) -> Result<f64, LemmaError> {
    check_params(lambda, a)?;
    Ok((a * b).exp() / (lambda - a))
}

/// The form `e^{λb} / (λ - a)`, which differs from
/// [`exp_integral_expectation`] by the factor `e^{(λ-a)b}`. Kept only so the
/// two can be compared against sampling.
pub fn exp_integral_rate_shifted(lambda: f64, a: f64, b: f64) -> Result<f64, LemmaError> {
    check_params(lambda, a)?;
    Ok((lambda * b).exp() / (lambda - a))
}

/// `∫_b^{b+x} e^{at} dt` in closed form.
pub fn exp_integral(a: f64, b: f64, x: f64) -> f64 {
    if a == 0.0 {
        x
    } else {
        (a * b).exp() * (a * x).exp_m1() / a
    }
}

/// Sample mean and standard error of `∫_b^{b+X} e^{at} dt` over `samples`
/// draws of `X ~ Exp(λ)`.
pub fn exp_integral_monte_carlo(lambda: f64, a: f64, b: f64, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = replica_rng(seed, 0);
    monte_carlo_with(&mut rng, lambda, a, b, samples)
}

fn monte_carlo_with<R: Rng>(rng: &mut R, lambda: f64, a: f64, b: f64, samples: usize) -> (f64, f64) {
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 1..=samples {
        let v = exp_integral(a, b, sample_exponential(rng, lambda));
        let delta = v - mean;
        mean += delta / k as f64;
        m2 += delta * (v - mean);
    }
    let n = samples as f64;
    (mean, (m2 / (n - 1.0) / n).sqrt())
}
