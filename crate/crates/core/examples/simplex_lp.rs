//! The bundled revised simplex on a small production-planning LP.

use bell_efficiency::simplex::{Constraint, LinearProgram, Sense};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // maximize 3x + 5y subject to x <= 4, 2y <= 12, 3x + 2y <= 18, x + y >= 1
    let row = |coefficients: Vec<f64>, sense, rhs| Constraint { coefficients, sense, rhs };
    let lp = LinearProgram {
        objective: vec![3.0, 5.0],
        constraints: vec![
            row(vec![1.0, 0.0], Sense::Le, 4.0),
            row(vec![0.0, 2.0], Sense::Le, 12.0),
            row(vec![3.0, 2.0], Sense::Le, 18.0),
            row(vec![1.0, 1.0], Sense::Ge, 1.0),
        ],
    };
    let s = lp.solve()?;
    println!("optimum {} at x = {:?}", s.value, s.x);
    Ok(())
}
