//! Sweeps the fixed dwell times of a reference case over `[0, 5]²` and
//! prints the stability region as text (`#` stable, `.` unstable, `?`
//! marginal). Pass an output prefix to also write CSV and SVG.
//!
//! ```bash
//! cargo run -p switchstab --example stability_region -- 2 /tmp/case2
//! ```

use switchstab::fixtures;
use switchstab::region::{render_region, sweep, SweepConfig, Verdict};

fn main() {
    let mut args = std::env::args().skip(1);
    let case: usize = args.next().map_or(1, |s| s.parse().expect("case number 1..3"));
    let prefix = args.next();

    let config = SweepConfig::default_square(fixtures::case(case)).threads(4);
    let grid = sweep(&config).expect("valid sweep");

    println!("case {case}: {} of {} cells stable", grid.stable_count(), grid.cells.len());
    println!("d2 ^");
    for i2 in (0..grid.d2.len()).rev().step_by(2) {
        let row: String = (0..grid.d1.len())
            .map(|i1| {
                let c = grid.cell(i1, i2);
                match (c.marginal, c.verdict) {
                    (true, _) => '?',
                    (false, Verdict::Stable) => '#',
                    (false, Verdict::Unstable) => '.',
                }
            })
            .collect();
        println!("{:4.1} |{row}", grid.d2[i2]);
    }
    println!("      {}> d1 (0 .. 5)", "-".repeat(grid.d1.len()));

    if let Some(prefix) = prefix {
        let (csv, svg) = render_region(&grid, &prefix).expect("writable prefix");
        println!("wrote {} and {}", csv.display(), svg.display());
    }
}
