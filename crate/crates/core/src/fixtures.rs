//! Reference instances with known solutions, shared by tests and the CLI.
//!
//! The same instances ship as JSON under `fixtures/` at the repository root.

use alloc::vec;

use crate::instance::{PenalizedInstance, ProblemInstance};
use crate::linalg::Matrix;

fn m<const C: usize>(rows: &[[f64; C]]) -> Matrix {
    Matrix::from_rows(rows).expect("rectangular literal")
}

/// 2x2 congestion instance whose optimum `[[4, 6], [2, 8]]` is interior.
pub fn example_3_1() -> ProblemInstance {
    ProblemInstance::congestion(
        m(&[[12.0, 24.0], [8.0, 12.0]]),
        m(&[[1.0, 1.0], [1.0, 1.0]]),
        vec![10.0, 10.0],
        vec![6.0, 14.0],
    )
}

/// 2x2 congestion instance whose optimum `[[0, 5], [5, 0]]` is a corner.
pub fn example_3_2() -> ProblemInstance {
    ProblemInstance::congestion(
        m(&[[100.0, 1.0], [1.0, 100.0]]),
        m(&[[100.0, 1.0], [1.0, 100.0]]),
        vec![5.0, 5.0],
        vec![5.0, 5.0],
    )
}

/// 4x4 linear instance, all marginals 50.
pub fn appendix_a_linear() -> ProblemInstance {
    let mut p = ProblemInstance::linear(
        m(&[
            [76.0, 77.0, 83.0, 6.0],
            [74.0, 98.0, 7.0, 41.0],
            [6.0, 86.0, 8.0, 70.0],
            [88.0, 17.0, 40.0, 96.0],
        ]),
        vec![50.0; 4],
        vec![50.0; 4],
    );
    p.fixed_cost = m(&[
        [32.0, 83.0, 82.0, 37.0],
        [47.0, 75.0, 56.0, 45.0],
        [87.0, 74.0, 79.0, 4.0],
        [40.0, 55.0, 94.0, 14.0],
    ]);
    p
}

/// Known optimum of [`appendix_a_linear`].
pub fn appendix_a_linear_plan() -> Matrix {
    m(&[
        [0.0, 0.0, 0.0, 50.0],
        [0.0, 0.0, 50.0, 0.0],
        [50.0, 0.0, 0.0, 0.0],
        [0.0, 50.0, 0.0, 0.0],
    ])
}

/// 4x4 congestion instance, all marginals 20.
pub fn appendix_a_quadratic() -> ProblemInstance {
    let mut p = ProblemInstance::congestion(
        m(&[
            [989.0, 24.0, 975.0, 941.0],
            [673.0, 612.0, 684.0, 9.0],
            [20.0, 352.0, 387.0, 380.0],
            [675.0, 687.0, 44.0, 697.0],
        ]),
        m(&[
            [9.0, 3.0, 8.0, 9.0],
            [6.0, 8.0, 3.0, 2.0],
            [1.0, 7.0, 8.0, 3.0],
            [9.0, 5.0, 2.0, 6.0],
        ]),
        vec![20.0; 4],
        vec![20.0; 4],
    );
    p.fixed_cost = m(&[
        [88.0, 88.0, 100.0, 91.0],
        [19.0, 42.0, 37.0, 69.0],
        [81.0, 87.0, 9.0, 50.0],
        [66.0, 18.0, 77.0, 91.0],
    ]);
    p
}

/// Known optimum of [`appendix_a_quadratic`].
pub fn appendix_a_quadratic_plan() -> Matrix {
    m(&[
        [0.0, 20.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 20.0],
        [20.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 20.0, 0.0],
    ])
}

/// 3x2 penalized instance with `a ≡ 2`, `δ = 0`.
///
/// Only `a`, `ε` and `δ` carry over from the original example; costs and
/// marginals (`c ≡ 1`, `d = 0`, `μ ≡ 20`, `ν ≡ 30`) are filled in so the
/// instance is complete.
pub fn appendix_b() -> PenalizedInstance {
    let base = ProblemInstance::congestion(
        Matrix::filled(3, 2, 1.0),
        Matrix::filled(3, 2, 2.0),
        vec![20.0; 3],
        vec![30.0; 2],
    );
    PenalizedInstance::new(base, vec![0.107014, 0.163166, 0.102569], vec![0.0, 0.0])
}

/// 3x2 penalized instance with an interior optimum.
pub fn appendix_c() -> PenalizedInstance {
    let mut base = ProblemInstance::congestion(
        m(&[[1.30436, 1.72858], [1.5623, 1.20598], [1.10019, 1.2187]]),
        m(&[[1.02308, 1.45588], [1.36407, 1.1021], [1.16638, 1.22178]]),
        vec![26.0, 27.0, 47.0],
        vec![61.0, 39.0],
    );
    base.fixed_cost = m(&[[3.0, 4.0], [2.0, 5.0], [5.0, 5.0]]);
    PenalizedInstance::new(base, vec![0.130457, 0.132428, 0.191539], vec![0.196703, 0.158533])
}

/// Printed optimum of [`appendix_c`] (six significant digits).
pub fn appendix_c_plan() -> Matrix {
    m(&[[8.17174, 3.29304], [6.19868, 4.79052], [10.4517, 7.18412]])
}
