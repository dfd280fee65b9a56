//! The growth bound `||e^{At}x||² ≥ e^{λ_min(A+A^T) t}||x||²` on a few
//! matrices, and the expected integral of `e^{at}` over an exponential
//! window compared with sampling.
//!
//! ```bash
//! cargo run --release -p switchstab --example lemma_spot_checks
//! ```

use switchstab::lemmas::{
    exp_integral_expectation, exp_integral_monte_carlo, exp_integral_rate_shifted, growth_constant,
};
use switchstab::matlib::{expm, Matrix};

fn main() {
    let x = [0.6, 0.8];
    for rows in [[[-1.2, 5.0], [0.0, -1.0]], [[0.3, 0.1], [0.0, 0.2]], [[0.0, 1.0], [-1.0, 0.0]]] {
        let a = Matrix::from_rows(&rows).expect("finite");
        let bound = growth_constant(&a).expect("square");
        println!("A = {rows:?}, c0 = {:+.4}", bound.c0);
        for t in [0.5, 1.0, 2.0] {
            let y = expm(&a, t).expect("finite").mul_vec(&x);
            let actual: f64 = y.iter().map(|v| v * v).sum();
            println!("  t = {t}: ||e^(At)x||^2 = {actual:.6e} >= {:.6e}", bound.lower_bound(t, 1.0));
        }
    }

    println!();
    println!("lambda     a     b   closed form   e^(lambda b) form   sampled (1e5)");
    for (lambda, a, b) in [(2.0, 1.0, 1.0), (1.0, 0.0, 2.0), (0.5, -1.0, 1.0), (2.0, 0.8, 2.0)] {
        let closed = exp_integral_expectation(lambda, a, b).expect("a < lambda");
        let shifted = exp_integral_rate_shifted(lambda, a, b).expect("a < lambda");
        let (mean, se) = exp_integral_monte_carlo(lambda, a, b, 100_000, 3);
        println!("{lambda:>6} {a:>5} {b:>5} {closed:>13.6} {shifted:>19.6} {mean:>11.6} +- {se:.1e}");
    }
}
