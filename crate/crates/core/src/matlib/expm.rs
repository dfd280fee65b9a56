use super::{MatError, Matrix};

// Degree-13 Padé coefficients (Higham 2005, "The scaling and squaring method
// for the matrix exponential revisited").
const B: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the [13/13] approximant is accurate to unit roundoff.
const THETA_13: f64 = 5.371_920_351_148_152;

/// `e^{A t}` by scaling and squaring with a fixed degree-13 Padé approximant.
pub fn expm(a: &Matrix, t: f64) -> Result<Matrix, MatError> {
    let n = a.require_square()?;
    a.check_finite()?;
    if !t.is_finite() {
        return Err(MatError::NonFinite { row: 0, col: 0 });
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }

    let at = a.scale(t);
    let norm = at.norm1();
    let squarings = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let scaled = at.scale(2f64.powi(-squarings));

    let ident = Matrix::identity(n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let mut u_inner = a6.scale(B[13]);
    u_inner.axpy(B[11], &a4);
    u_inner.axpy(B[9], &a2);
    let mut u_poly = &a6 * &u_inner;
    u_poly.axpy(B[7], &a6);
    u_poly.axpy(B[5], &a4);
    u_poly.axpy(B[3], &a2);
    u_poly.axpy(B[1], &ident);
    let u = &scaled * &u_poly;

    let mut v_inner = a6.scale(B[12]);
    v_inner.axpy(B[10], &a4);
    v_inner.axpy(B[8], &a2);
    let mut v = &a6 * &v_inner;
    v.axpy(B[6], &a6);
    v.axpy(B[4], &a4);
    v.axpy(B[2], &a2);
    v.axpy(B[0], &ident);

    // r = (V - U)^{-1} (V + U)
    let numer = &v + &u;
    let denom = &v - &u;
    let lu = super::LuFactor::new(&denom)?;
    let mut r = lu.solve_matrix(&numer);

    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}
