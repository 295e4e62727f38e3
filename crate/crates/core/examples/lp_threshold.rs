//! Bisects the two-copy efficiency threshold with the LP membership test,
//! then rounds the separating functional and recomputes the threshold from
//! its profile.
//!
//! Usage: `lp_threshold [sym|asym] [last|extra]`

use bell_efficiency::distribution::{chsh_optimal_single_copy, tensor_power};
use bell_efficiency::efficiency::Policy;
use bell_efficiency::functional::Layout;
use bell_efficiency::separation::{
    deflated_target, rationalize_separating, threshold_by_bisection, BisectionConfig, Coordinates, EfficiencyMode,
};
use bell_efficiency::thresholds::{eta_asym, profile, LossyParty};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mode: EfficiencyMode = args.next().as_deref().unwrap_or("sym").parse()?;
    let policy: Policy = args.next().as_deref().unwrap_or("last").parse()?;
    let dist = tensor_power(&chsh_optimal_single_copy(), 2)?;

    let b = threshold_by_bisection(&dist, policy, mode, Coordinates::CollinsGisin, BisectionConfig::for_mode(mode))?;
    println!("{mode}/{policy}: threshold in ({:.6}, {:.6}] after {} steps, {} vertices", b.eta_below, b.eta, b.steps, b.vertex_pool);

    let target = deflated_target(&dist, policy, mode, b.eta)?;
    let rounded = rationalize_separating(&b.at_eta.functional, &target, 64)?;
    let layout = if rounded.is_reduced() { Layout::Reduced } else { Layout::Full };
    println!("{}", rounded.to_block_text(layout)?);
    let r = profile(&rounded, &dist, policy)?.with_thresholds();
    println!("Q = {:.9}, M_A = {}, M_B = {}, X = {}, L = {}", r.q, r.m_a, r.m_b, r.x, r.l);
    match mode {
        EfficiencyMode::Symmetric => println!("threshold of the rounded functional: {:.12}", r.eta_sym.unwrap_or(f64::NAN)),
        EfficiencyMode::Asymmetric => println!("threshold of the rounded functional: {:.12}", eta_asym(&r, LossyParty::Alice)?),
    }
    Ok(())
}
