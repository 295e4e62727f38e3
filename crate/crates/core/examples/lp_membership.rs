//! One LP membership test per efficiency: inside points come with a convex
//! decomposition into deterministic strategies, outside points with a
//! separating functional.

use bell_efficiency::distribution::{chsh_optimal_single_copy, tensor_power};
use bell_efficiency::efficiency::Policy;
use bell_efficiency::separation::{deflated_target, EfficiencyMode, SeparationProblem, SeparationStatus, Separator};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dist = tensor_power(&chsh_optimal_single_copy(), 1)?;
    let mut separator = Separator::new();
    for eta in [0.75, 0.82, 0.84, 1.0] {
        let target = deflated_target(&dist, Policy::LastOutcome, EfficiencyMode::Symmetric, eta)?;
        let r = separator.separate(&SeparationProblem::new(target))?;
        println!("eta = {eta}: {:?}, Q* = {:.3e}, {} rounds, {} pivots", r.status, r.q_star, r.iterations, r.pivots);
        if r.status == SeparationStatus::Inside {
            for (w, s) in r.decomposition.iter().filter(|(w, _)| *w > 1e-9) {
                println!("    {w:.4} x alice {:?} bob {:?}", s.alice, s.bob);
            }
        } else {
            println!("    separating functional, joint block: {:?}", r.functional.joint());
        }
    }
    Ok(())
}
