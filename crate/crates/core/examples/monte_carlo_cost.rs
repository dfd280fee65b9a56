//! Estimates `E ∫_0^T ||x||² dt` by simulation on both sides of the
//! stability boundary and compares the half- and full-horizon means.
//!
//! ```bash
//! cargo run --release -p switchstab --example monte_carlo_cost
//! ```

use switchstab::fixtures;
use switchstab::sim::estimate_cost;
use switchstab::stability::check_stochastic_stability;

fn main() {
    let points = [(2, [5.0, 0.0]), (2, [0.0, 3.0]), (3, [1.8, 0.6]), (3, [3.0, 0.0])];
    let runs = 2000;
    let horizon = 100.0;
    for (case, d) in points {
        let sys = fixtures::case(case).with_dwell(&d).validate().expect("valid");
        let verdict = if check_stochastic_stability(&sys).is_stable() { "Stable" } else { "Unstable" };
        let est = estimate_cost(&sys, &[1.0, 0.0], 0, runs, horizon, 1).expect("state matches order");
        println!(
            "case {case} d = {d:?} ({verdict}): cost(T/2) = {:.4e}, cost(T) = {:.4e} +- {:.1e}, ratio {:.3}",
            est.half_horizon_mean,
            est.mean,
            est.std_error,
            est.growth_ratio()
        );
    }
}
