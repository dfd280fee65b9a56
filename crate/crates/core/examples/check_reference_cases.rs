//! Runs the stability test on the three reference systems at a few dwell
//! pairs and prints verdicts, margins, and the smallest eigenvalue of each
//! `P_i`.
//!
//! ```bash
//! cargo run -p switchstab --example check_reference_cases
//! ```

use switchstab::fixtures;
use switchstab::matlib::min_eig_sym;
use switchstab::stability::{check_stochastic_stability, StabilityVerdict};

fn main() {
    let points = [[0.0, 0.0], [0.5, 0.5], [1.8, 0.6], [3.0, 3.0], [5.0, 0.0], [0.0, 3.0]];
    for case in 1..=3 {
        println!("case {case}");
        for d in points {
            let sys = fixtures::case(case).with_dwell(&d).validate().expect("valid");
            let verdict = check_stochastic_stability(&sys);
            let detail = match &verdict {
                StabilityVerdict::Stable(cert) => {
                    let eigs: Vec<String> = cert.p.iter().map(|p| format!("{:.3e}", min_eig_sym(p))).collect();
                    format!("Stable    margin {:+.4e}  min eig P [{}]", cert.margin, eigs.join(", "))
                }
                StabilityVerdict::Unstable(w) => {
                    let eigs: Vec<String> = w.min_eigenvalues.iter().map(|v| format!("{v:.3e}")).collect();
                    format!("Unstable  {:?}  min eig P [{}]", w.reason, eigs.join(", "))
                }
            };
            let flag = if verdict.is_marginal() { "  (marginal)" } else { "" };
            println!("  d = ({:.1}, {:.1})  {detail}{flag}", d[0], d[1]);
        }
    }
}
