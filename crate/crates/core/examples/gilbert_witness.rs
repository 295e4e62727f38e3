//! Gilbert's algorithm on the deflated two-copy point, followed by rounding
//! the witness to integers and computing its thresholds with an exact local
//! bound.
//!
//! Usage: `gilbert_witness [n] [eta] [iterations]`

use bell_efficiency::distribution::{chsh_optimal_single_copy, tensor_power};
use bell_efficiency::efficiency::{deflate, EfficiencyModel, Policy};
use bell_efficiency::gilbert::{gilbert_distance, GilbertConfig};
use bell_efficiency::local::OracleMode;
use bell_efficiency::separation::rationalize;
use bell_efficiency::thresholds::profile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(2), |s| s.parse())?;
    let eta: f64 = args.next().map_or(Ok(0.82), |s| s.parse())?;
    let iterations: usize = args.next().map_or(Ok(2000), |s| s.parse())?;

    let dist = tensor_power(&chsh_optimal_single_copy(), n)?;
    let target = deflate(&dist, EfficiencyModel::symmetric(eta, Policy::LastOutcome)?).into_table();
    let config = GilbertConfig::new(1e-6, 50, iterations, OracleMode::Heuristic { restarts: 200, seed: 1 })?
        .with_symmetrization(true, false);
    let run = gilbert_distance(&target, &config)?;
    println!("{:?} after {} iterations, distance {:.6e}", run.status, run.iterations, run.witness.distance);
    for rec in run.log.iter().step_by((run.log.len() / 8).max(1)) {
        println!("    iteration {:>6}: distance {:.6e}, gap {:.3e}", rec.iteration, rec.distance, rec.gap);
    }

    let witness = run.witness.functional(dist.inputs(), dist.outputs());
    for den in [100, 300, 1000] {
        let r = profile(&rationalize(&witness, den)?, &dist, Policy::LastOutcome)?.with_thresholds();
        println!(
            "denominator {den:>4}: Q = {:.2}, M = {:.2}, X = {}, L = {} ({:?}) -> eta_sym {:.5}",
            r.q,
            r.m_a,
            r.x,
            r.l,
            r.l_provenance,
            r.eta_sym.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
