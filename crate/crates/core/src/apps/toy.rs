//! The two-dimensional demo: `C` is the unit disk and `Q` a unit ball around
//! `(0, 1.8, 3)` in the range of `h(x) = (x₁, x₂, 3(x₁² + x₂²))`.

use crate::linalg::Vector;
use crate::mappings::SmoothMap;
use crate::proximity::SplitProblem;
use crate::sets::ConstraintSet;

/// Starting points for the demo runs.
pub const TOY_STARTS: [[f64; 2]; 6] = [
    [0.0, 0.0],
    [-1.5, 0.5],
    [1.5, 0.5],
    [-2.0, -1.0],
    [2.0, -1.0],
    [1.5, 1.5],
];

pub fn toy_problem() -> SplitProblem {
    SplitProblem::builder(SmoothMap::toy())
        .domain(ConstraintSet::ball(Vector::zeros(2), 1.0).expect("radius is positive"), 0.5)
        .range(
            ConstraintSet::ball(Vector::from_vec(vec![0.0, 1.8, 3.0]), 1.0).expect("radius is positive"),
            0.5,
        )
        .build()
        .expect("toy problem is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{accelerated_solve, solve, SolverConfig};

    #[test]
    fn every_start_reaches_a_feasible_point() {
        let p = toy_problem();
        let config = SolverConfig::default();
        for s in TOY_STARTS {
            let x0 = Vector::from_row_slice(&s);
            let plain = solve(&p, &x0, &config).unwrap();
            let fast = accelerated_solve(&p, &x0, &config).unwrap();
            assert!(plain.final_value() <= 1e-10, "{s:?}: {}", plain.final_value());
            assert!(fast.final_value() <= 1e-10, "{s:?}: {}", fast.final_value());
            assert!(p.is_feasible(&fast.solution, 1e-4).unwrap());
        }
    }
}
