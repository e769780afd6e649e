//! The two-dimensional demo: unit disk in the domain, a unit ball in the
//! range of `h(x) = (x₁, x₂, 3‖x‖²)`. Each start is solved with and without
//! secant acceleration.

use sfp_core::apps::{toy_problem, TOY_STARTS};
use sfp_core::linalg::Vector;
use sfp_core::solver::{accelerated_solve, solve, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = toy_problem();
    let config = SolverConfig::default();
    println!("{:>14} {:>6} {:>6} {:>12}  solution", "start", "plain", "accel", "final f");
    for start in TOY_STARTS {
        let x0 = Vector::from_row_slice(&start);
        let plain = solve(&problem, &x0, &config)?;
        let fast = accelerated_solve(&problem, &x0, &config)?;
        println!(
            "{:>14} {:>6} {:>6} {:>12.3e}  ({:.4}, {:.4})",
            format!("({}, {})", start[0], start[1]),
            plain.iterations,
            fast.iterations,
            fast.final_value(),
            fast.solution[0],
            fast.solution[1],
        );
    }
    Ok(())
}
