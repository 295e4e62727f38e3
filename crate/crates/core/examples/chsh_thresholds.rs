//! Detection-efficiency thresholds of the CHSH functional on the optimal
//! single-copy behavior, and of correlation-type functionals from Q/L.

use bell_efficiency::chshn::IteratedChsh;
use bell_efficiency::distribution::{chsh_optimal_single_copy, tensor_power};
use bell_efficiency::efficiency::Policy;
use bell_efficiency::thresholds::{correlation_thresholds, eta_asym, profile, LossyParty};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let chsh = IteratedChsh::build(1)?.to_functional()?;
    let dist = tensor_power(&chsh_optimal_single_copy(), 1)?;
    let r = profile(&chsh, &dist, Policy::LastOutcome)?.with_thresholds();
    println!("Q = {:.6}, L = {}, M_A = {}, M_B = {}, X = {}", r.q, r.l, r.m_a, r.m_b, r.x);
    println!("eta_sym  = {:.6}", r.eta_sym.unwrap());
    println!("eta_asym = {:.6}", eta_asym(&r, LossyParty::Alice)?);

    for ratio in [2f64.sqrt(), 1.4359, 1.4644] {
        let (sym, asym) = correlation_thresholds(ratio)?;
        println!("Q/L = {ratio:.4}: eta_sym = {sym:.4}, eta_asym = {asym:.4}");
    }
    Ok(())
}
