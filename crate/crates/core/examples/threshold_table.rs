//! Upper bounds on the thresholds of the iterated CHSH game, from exact,
//! empirical and asymptotic local values.

use bell_efficiency::chshn::table1;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ns = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 20, 50, 100];
    println!("{:>3}  {:>8}  {:>8}  {:>18}", "n", "eta_sym", "eta_asym", "empirical L");
    for row in table1(&ns)? {
        let p = row.primary;
        let empirical = row
            .empirical
            .map(|e| format!("{} -> ({:.4}, {:.4})", e.l, e.eta_sym, e.eta_asym))
            .unwrap_or_default();
        println!("{:>3}  {:>8.4}  {:>8.4}  {empirical}", row.n, p.eta_sym, p.eta_asym);
    }
    Ok(())
}
