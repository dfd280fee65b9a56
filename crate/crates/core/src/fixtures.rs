//! The three two-mode reference systems (stable/stable, stable/unstable,
//! unstable/unstable), all with unit switching rates between the modes.
//!
//! The same data ships as JSON under `crates/core/fixtures/`.

use crate::matlib::Matrix;
use crate::model::SwitchedLinearSystem;

/// Default fixed dwell times written to the fixture files.
pub const DEFAULT_DWELL: [f64; 2] = [0.5, 0.5];

fn mat(rows: [[f64; 2]; 2]) -> Matrix {
    Matrix::from_rows(&rows).expect("finite literal")
}

/// Reference case `1..=3` with the default dwell times. Panics on any other
/// index.
pub fn case(index: usize) -> SwitchedLinearSystem {
    let (a1, a2) = match index {
        1 => ([[-1.2, 5.0], [0.0, -1.0]], [[-0.6, 0.0], [1.0, -0.6]]),
        2 => ([[-1.0, 0.0], [1.0, -1.0]], [[0.3, 0.1], [0.0, 0.2]]),
        3 => ([[-0.5, 0.0], [0.1, 0.4]], [[0.3, 1.5], [0.0, -3.0]]),
        _ => panic!("no reference case {index}"),
    };
    SwitchedLinearSystem::new(
        vec![(mat(a1), DEFAULT_DWELL[0]), (mat(a2), DEFAULT_DWELL[1])],
        mat([[-1.0, 1.0], [1.0, -1.0]]),
    )
}

pub fn all_cases() -> [SwitchedLinearSystem; 3] {
    [case(1), case(2), case(3)]
}
