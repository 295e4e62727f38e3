use bell_efficiency::chshn::{self, IteratedChsh, EMPIRICAL_LOCAL_BOUNDS};
use bell_efficiency::local::{OracleMode, Payoff, Provenance};

#[test]
fn unique_game_rows_sum_to_one() {
    for n in 1..=3 {
        let c = IteratedChsh::build(n).unwrap().to_functional().unwrap();
        let d = 1 << n;
        for x in 0..d {
            for y in 0..d {
                for a in 0..d {
                    let row: f64 = (0..d).map(|b| c.joint_at(x, y, a, b)).sum();
                    assert_eq!(row, 1.0);
                }
            }
        }
    }
    let two = IteratedChsh::build(2).unwrap().to_functional().unwrap();
    assert_eq!(two.joint().iter().filter(|&&v| v == 1.0).count(), 64);
}

#[test]
fn see_saw_reaches_the_empirical_values() {
    for (n, l) in EMPIRICAL_LOCAL_BOUNDS {
        let bound = chshn::local_bound(n, OracleMode::Heuristic { restarts: 1000, seed: 0 }).unwrap();
        assert_eq!(bound.provenance, Provenance::Heuristic);
        assert_eq!(bound.value, l, "n = {n}");
        let game = IteratedChsh::build(n).unwrap();
        assert_eq!(game.value(&bound.witness.alice, &bound.witness.bob), l);
        assert!(l <= chshn::ambainis_bound(n));
    }
}

#[test]
fn exact_mode_refuses_large_games() {
    assert!(chshn::local_bound(4, OracleMode::Exact).is_err());
}

#[test]
fn ambainis_substitution_never_lowers_thresholds() {
    let known = [(1, 3.0), (2, 10.0), (3, 31.0), (4, 100.0), (5, 310.0), (6, 1000.0)];
    for (n, l) in known {
        let (sym, asym) = chshn::threshold_bounds(n, l).unwrap();
        let (sym_a, asym_a) = chshn::threshold_bounds(n, chshn::ambainis_bound(n)).unwrap();
        assert!(sym_a >= sym && asym_a >= asym, "n = {n}");
    }
}

#[test]
fn table_rows() {
    let rows = chshn::table1(&[2, 4, 13]).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-4;
    assert!(close(rows[0].primary.eta_sym, 0.8787) && close(rows[0].primary.eta_asym, 0.7836));
    assert!(close(rows[1].primary.eta_sym, 0.8772) && close(rows[1].primary.eta_asym, 0.7813));
    let e = rows[1].empirical.unwrap();
    assert!(close(e.eta_sym, 0.8240) && close(e.eta_asym, 0.7007));
    assert!(close(rows[2].primary.eta_sym, 0.6647) && close(rows[2].primary.eta_asym, 0.4978));
    assert!(rows[2].primary.eta_sym < 2.0 / 3.0);
}
