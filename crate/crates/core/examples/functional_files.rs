//! Reads a functional in block text, prints its canonical form and local
//! bound, and profiles it against the n-copy behavior.
//!
//! Usage: `functional_files <path> [n]`

use bell_efficiency::distribution::{chsh_optimal_single_copy, tensor_power};
use bell_efficiency::efficiency::Policy;
use bell_efficiency::functional::{BellFunctional, Layout};
use bell_efficiency::local::local_bound_exact;
use bell_efficiency::thresholds::profile_with_local;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/sym_n2.txt").into());
    let n: usize = args.next().map_or(Ok(2), |s| s.parse())?;
    let f = BellFunctional::parse_block_text(&std::fs::read_to_string(&path)?)?;
    print!("{}", f.to_block_text(if f.is_reduced() { Layout::Reduced } else { Layout::Full })?);

    let local = local_bound_exact(&f)?;
    println!("local bound {} at alice {:?}, bob {:?}", local.value, local.witness.alice, local.witness.bob);
    let dist = tensor_power(&chsh_optimal_single_copy(), n)?;
    let r = profile_with_local(&f, &dist, Policy::LastOutcome, &local)?.with_thresholds();
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(())
}
