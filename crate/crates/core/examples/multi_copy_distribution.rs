//! Builds the n-copy behavior, deflates it for lossy detectors and shows
//! its Collins-Gisin form.

use bell_efficiency::distribution::{chsh_optimal_single_copy, tensor_power};
use bell_efficiency::efficiency::{deflate, to_collins_gisin, EfficiencyModel, Policy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map_or(Ok(2), |s| s.parse())?;
    let dist = tensor_power(&chsh_optimal_single_copy(), n)?;
    println!("{n} copies: m = o = {}", dist.inputs());
    println!("normalization deviation {:.1e}", dist.table().normalization_deviation());
    println!("no-signaling deviation  {:.1e}", dist.table().signaling_deviation());
    println!("factorization deviation {:.1e}", dist.factorization_deviation());

    for policy in [Policy::LastOutcome, Policy::ExtraOutcome] {
        let point = deflate(&dist, EfficiencyModel::new(0.9, 0.8, policy)?);
        let cg = to_collins_gisin(&point)?;
        println!(
            "policy {policy}: {} outcomes, reduced matrix of side {}, P^A(0|0) = {:.6}",
            point.outputs(),
            cg.side(),
            cg.get(1, 0)
        );
    }
    if n == 1 {
        let point = deflate(&dist, EfficiencyModel::symmetric(0.9, Policy::LastOutcome)?);
        print!("{}", to_collins_gisin(&point)?.to_text());
    }
    Ok(())
}
