//! Runs one pinned reproduction target and prints its checks.
//!
//! Usage: `reproduce_target [target] [seed]`, e.g. `reproduce_target lp-n2-asym`.

use bell_efficiency::report::{reproduce, RunConfig, Target, DEFAULT_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let target: Target = args.next().as_deref().unwrap_or("chsh").parse()?;
    let seed: u64 = args.next().map_or(Ok(DEFAULT_SEED), |s| s.parse())?;
    let bundle = reproduce(target, &RunConfig::new(format!("example {target}"), seed))?;
    for check in &bundle.report.checks {
        println!("{}", check.line());
    }
    println!("{}", if bundle.report.passed() { "all gated checks passed" } else { "some checks failed" });
    Ok(())
}
