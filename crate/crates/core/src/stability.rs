//! Stochastic stability test via coupled Lyapunov equations.
//!
//! The system is stochastically stable iff there are positive definite `P_i`
//! with
//!
//! ```text
//! R_i = A_i^T P_i + P_i A_i + π_ii P_i + Σ_{j≠i} π_ij E_j^T P_j E_j  < 0,
//! ```
//!
//! where `E_j = e^{A_j d_j}`. Since `{P_i} ↦ {R_i}` is linear, the decision
//! reduces to solving `R_i = -Q_i` for a fixed `Q_i ≻ 0` and checking that
//! the solution is positive definite.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matlib::{kron, max_eig_sym, min_eig_sym, sym_eigenvalues, LuFactor, MatError, Matrix, SymmetricMatrix};
use crate::model::ValidatedSystem;

/// Relative asymmetry tolerated in a raw coupled solution before it is
/// symmetrized.
pub const ASYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("coupled operator is singular to working precision (pivot ratio {pivot_ratio:e})")]
    SingularOperator { pivot_ratio: f64 },
    #[error("solution for mode {mode} is not symmetric (relative asymmetry {asymmetry:e})")]
    AsymmetricSolution { mode: usize, asymmetry: f64 },
    #[error("right-hand side for mode {0} is not positive definite")]
    RhsNotPositiveDefinite(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// Tolerances of the definiteness decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityOptions {
    /// `P_i` counts as positive definite when `λ_min(P_i) > pd_rel_tol·||P_i||_F`
    /// (floored at `pd_abs_floor`).
    pub pd_rel_tol: f64,
    pub pd_abs_floor: f64,
    /// Quantities within this factor of their tolerance are flagged marginal.
    pub marginal_factor: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self { pd_rel_tol: 1e-9, pd_abs_floor: 1e-12, marginal_factor: 10.0 }
    }
}

impl StabilityOptions {
    pub fn pd_tolerance(&self, p: &SymmetricMatrix) -> f64 {
        (self.pd_rel_tol * p.frobenius_norm()).max(self.pd_abs_floor)
    }
}

/// The matrix `L` of order `m·n²` acting on `[vec(P_1); …; vec(P_m)]`.
///
/// Block `(i, i)` is `I⊗A_i^T + A_i^T⊗I + π_ii I`, block `(i, j)` is
/// `π_ij (E_j^T ⊗ E_j^T)`.
#[derive(Debug, Clone)]
pub struct CoupledOperator {
    n: usize,
    m: usize,
    matrix: Matrix,
}

impl CoupledOperator {
    pub fn assemble(sys: &ValidatedSystem) -> Self {
        let (n, m) = (sys.n(), sys.m());
        let nn = n * n;
        let ident = Matrix::identity(n);
        let mut matrix = Matrix::zeros(m * nn, m * nn);
        for i in 0..m {
            let at = sys.a(i).transpose();
            let mut diag = kron(&ident, &at).expect("finite");
            diag.axpy(1.0, &kron(&at, &ident).expect("finite"));
            diag.axpy(sys.rate(i, i), &Matrix::identity(nn));
            matrix.set_block(i * nn, i * nn, &diag);
            for j in (0..m).filter(|&j| j != i) {
                let rate = sys.rate(i, j);
                if rate == 0.0 {
                    continue;
                }
                let et = sys.jump_map(j).transpose();
                let coupling = kron(&et, &et).expect("finite").scale(rate);
                matrix.set_block(i * nn, j * nn, &coupling);
            }
        }
        Self { n, m, matrix }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    /// `L` applied to the stacked `vec(P_j)`, unstacked into `R_i`.
    pub fn apply(&self, p: &[Matrix]) -> Vec<Matrix> {
        assert_eq!(p.len(), self.m, "one matrix per mode");
        let stacked: Vec<f64> = p.iter().flat_map(Matrix::vec_cols).collect();
        let out = self.matrix.mul_vec(&stacked);
        out.chunks(self.n * self.n).map(|c| Matrix::from_vec_cols(self.n, self.n, c)).collect()
    }
}

/// `R_i` evaluated directly from the matrices, without the vectorized
/// operator.
pub fn lyapunov_residuals(sys: &ValidatedSystem, p: &[Matrix]) -> Result<Vec<Matrix>, StabilityError> {
    let (n, m) = (sys.n(), sys.m());
    if p.len() != m || p.iter().any(|pi| pi.rows() != n || pi.cols() != n) {
        return Err(StabilityError::DimensionMismatch(format!("expected {m} matrices of order {n}")));
    }
    let pulled: Vec<Matrix> = (0..m)
        .map(|j| {
            let e = sys.jump_map(j);
            e.transpose().matmul(&p[j]).matmul(e)
        })
        .collect();
    Ok((0..m)
        .map(|i| {
            let a = sys.a(i);
            let mut r = a.transpose().matmul(&p[i]);
            r.axpy(1.0, &p[i].matmul(a));
            r.axpy(sys.rate(i, i), &p[i]);
            for j in (0..m).filter(|&j| j != i) {
                r.axpy(sys.rate(i, j), &pulled[j]);
            }
            r
        })
        .collect())
}

/// Solution of the coupled equations `R_i = -Q_i`.
#[derive(Debug, Clone)]
pub struct CoupledSolution {
    pub p: Vec<SymmetricMatrix>,
    /// `||L p + q|| / (||L||_F ||p|| + ||q||)` before symmetrization.
    pub relative_residual: f64,
    /// Largest `|P_ij - P_ji| / ||P||_F` before symmetrization.
    pub max_asymmetry: f64,
    pub pivot_ratio: f64,
}

pub fn solve_coupled_lyapunov(sys: &ValidatedSystem, q: &[SymmetricMatrix]) -> Result<CoupledSolution, StabilityError> {
    let (n, m) = (sys.n(), sys.m());
    if q.len() != m || q.iter().any(|qi| qi.order() != n) {
        return Err(StabilityError::DimensionMismatch(format!("expected {m} right-hand sides of order {n}")));
    }
    for (i, qi) in q.iter().enumerate() {
        if !(min_eig_sym(qi) > 0.0) {
            return Err(StabilityError::RhsNotPositiveDefinite(i));
        }
    }

    let op = CoupledOperator::assemble(sys);
    let rhs: Vec<f64> = q.iter().flat_map(|qi| qi.as_matrix().vec_cols()).map(|v| -v).collect();
    let lu = LuFactor::new(op.matrix()).map_err(|e| match e {
        MatError::Singular { pivot_ratio } => StabilityError::SingularOperator { pivot_ratio },
        other => StabilityError::Matrix(other),
    })?;
    let x = lu.solve(&rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StabilityError::SingularOperator { pivot_ratio: lu.pivot_ratio() });
    }

    let lx = op.matrix().mul_vec(&x);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let diff: Vec<f64> = lx.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let relative_residual = norm(&diff) / (op.matrix().frobenius_norm() * norm(&x) + norm(&rhs)).max(f64::MIN_POSITIVE);

    let mut p = Vec::with_capacity(m);
    let mut max_asymmetry = 0.0f64;
    for (i, chunk) in x.chunks(n * n).enumerate() {
        let raw = Matrix::from_vec_cols(n, n, chunk);
        let asymmetry = raw.asymmetry() / raw.frobenius_norm().max(f64::MIN_POSITIVE);
        if asymmetry > ASYMMETRY_TOL {
            return Err(StabilityError::AsymmetricSolution { mode: i, asymmetry });
        }
        max_asymmetry = max_asymmetry.max(asymmetry);
        p.push(SymmetricMatrix::symmetrize(&raw));
    }
    Ok(CoupledSolution { p, relative_residual, max_asymmetry, pivot_ratio: lu.pivot_ratio() })
}

/// `{P_i}` satisfying the strict inequalities, with the right-hand sides
/// that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityCertificate {
    #[serde(rename = "P")]
    pub p: Vec<SymmetricMatrix>,
    #[serde(rename = "Q")]
    pub q: Vec<SymmetricMatrix>,
    /// `max_i λ_max(R_i)`.
    pub margin: f64,
    pub marginal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnstableReason {
    NonPositiveDefinite(usize),
    SingularOperator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstabilityWitness {
    pub reason: UnstableReason,
    /// `λ_min(P_i)` per mode; empty when the operator is singular.
    pub min_eigenvalues: Vec<f64>,
    /// `-min_i λ_min(P_i) / max_i ρ(P_i)`, in `(0, 1]`; zero when singular.
    pub deficit: f64,
    pub marginal: bool,
}

#[derive(Debug, Clone)]
pub enum StabilityVerdict {
    Stable(StabilityCertificate),
    Unstable(InstabilityWitness),
}

impl StabilityVerdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, StabilityVerdict::Stable(_))
    }

    pub fn is_marginal(&self) -> bool {
        match self {
            StabilityVerdict::Stable(c) => c.marginal,
            StabilityVerdict::Unstable(w) => w.marginal,
        }
    }

    pub fn certificate(&self) -> Option<&StabilityCertificate> {
        match self {
            StabilityVerdict::Stable(c) => Some(c),
            StabilityVerdict::Unstable(_) => None,
        }
    }

    /// Scale-free signed distance indicator: negative for stable verdicts
    /// (`margin / max_i λ_max(P_i)`, tending to zero as the `P_i` blow up
    /// near the boundary) and non-negative for unstable ones (the
    /// definiteness deficit).
    pub fn normalized_margin(&self) -> f64 {
        match self {
            StabilityVerdict::Stable(c) => {
                let scale = c.p.iter().map(max_eig_sym).fold(0.0, f64::max);
                c.margin / scale
            }
            StabilityVerdict::Unstable(w) => w.deficit,
        }
    }
}

/// Decides stochastic stability with `Q_i = I`.
pub fn check_stochastic_stability(sys: &ValidatedSystem) -> StabilityVerdict {
    check_with(sys, &StabilityOptions::default())
}

pub fn check_with(sys: &ValidatedSystem, opts: &StabilityOptions) -> StabilityVerdict {
    let q = vec![SymmetricMatrix::identity(sys.n()); sys.m()];
    check_with_rhs(sys, q, opts)
}

/// Decision with caller-chosen positive definite right-hand sides.
pub fn check_with_rhs(sys: &ValidatedSystem, q: Vec<SymmetricMatrix>, opts: &StabilityOptions) -> StabilityVerdict {
    let singular = || {
        StabilityVerdict::Unstable(InstabilityWitness {
            reason: UnstableReason::SingularOperator,
            min_eigenvalues: Vec::new(),
            deficit: 0.0,
            marginal: true,
        })
    };
    let sol = match solve_coupled_lyapunov(sys, &q) {
        Ok(sol) => sol,
        Err(StabilityError::SingularOperator { .. } | StabilityError::AsymmetricSolution { .. }) => return singular(),
        Err(e) => panic!("check on a validated system: {e}"),
    };

    let spectra: Vec<Vec<f64>> = sol.p.iter().map(sym_eigenvalues).collect();
    let tolerances: Vec<f64> = sol.p.iter().map(|p| opts.pd_tolerance(p)).collect();
    let min_eigs: Vec<f64> = spectra.iter().map(|e| e[0]).collect();
    let near_pd_boundary = min_eigs.iter().zip(&tolerances).any(|(&ev, &tol)| ev.abs() <= opts.marginal_factor * tol);

    let failing = min_eigs.iter().zip(&tolerances).position(|(&ev, &tol)| !(ev > tol));
    match failing {
        None => {
            let residuals = lyapunov_residuals(sys, &sol.p.iter().map(|p| p.as_matrix().clone()).collect::<Vec<_>>())
                .expect("dimensions checked");
            let margin = residual_margin(&residuals);
            let margin_tol =
                residuals.iter().map(|r| opts.pd_rel_tol * r.frobenius_norm()).fold(opts.pd_abs_floor, f64::max);
            let marginal = near_pd_boundary || margin.abs() <= opts.marginal_factor * margin_tol;
            StabilityVerdict::Stable(StabilityCertificate { p: sol.p, q, margin, marginal })
        }
        Some(mode) => {
            let radius = spectra.iter().map(|e| e[0].abs().max(e[e.len() - 1].abs())).fold(0.0, f64::max);
            let worst = min_eigs.iter().copied().fold(f64::INFINITY, f64::min);
            StabilityVerdict::Unstable(InstabilityWitness {
                reason: UnstableReason::NonPositiveDefinite(mode),
                deficit: if radius > 0.0 { (-worst / radius).max(0.0) } else { 0.0 },
                min_eigenvalues: min_eigs,
                marginal: near_pd_boundary,
            })
        }
    }
}

fn residual_margin(residuals: &[Matrix]) -> f64 {
    residuals.iter().map(|r| max_eig_sym(&SymmetricMatrix::symmetrize(r))).fold(f64::NEG_INFINITY, f64::max)
}

/// `max_i λ_max(R_i)` for candidate matrices `{P_i}`; negative iff they
/// satisfy the strict inequalities.
pub fn certificate_margin(sys: &ValidatedSystem, p: &[SymmetricMatrix]) -> Result<f64, StabilityError> {
    let raw: Vec<Matrix> = p.iter().map(|pi| pi.as_matrix().clone()).collect();
    Ok(residual_margin(&lyapunov_residuals(sys, &raw)?))
}

pub fn verify_certificate(sys: &ValidatedSystem, cert: &StabilityCertificate) -> Result<f64, StabilityError> {
    certificate_margin(sys, &cert.p)
}

impl StabilityCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Whether every `P_i` is positive definite under `opts`.
    pub fn all_positive_definite(&self, opts: &StabilityOptions) -> bool {
        self.p.iter().all(|p| min_eig_sym(p) > opts.pd_tolerance(p))
    }
}
