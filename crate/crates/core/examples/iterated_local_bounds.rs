//! Local and quantum values of the iterated CHSH game.

use std::time::Instant;

use bell_efficiency::chshn::{self, MAX_COPIES, MAX_EXACT_COPIES};
use bell_efficiency::local::OracleMode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>2} {:>8} {:>10} {:>12} {:>12}", "n", "L", "how", "(1+sqrt5)^n", "Q");
    for n in 1..=MAX_COPIES {
        let start = Instant::now();
        let mode = if n <= MAX_EXACT_COPIES {
            OracleMode::Exact
        } else {
            OracleMode::Heuristic { restarts: 1000, seed: 0 }
        };
        let bound = chshn::local_bound(n, mode)?;
        println!(
            "{n:>2} {:>8} {:>10} {:>12.3} {:>12.3}   ({:.2} s)",
            bound.value,
            format!("{:?}", bound.provenance).to_lowercase(),
            chshn::ambainis_bound(n),
            chshn::quantum_value(n)?,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
