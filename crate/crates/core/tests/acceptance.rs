//! Acceptance run: one line per criterion.
//!
//! Criterion 7 is a known miss (see the README); it is reported as FAIL
//! with the measured value and does not fail the run. Any other failure does.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bell_efficiency::behavior::Behavior;
use bell_efficiency::chshn::{self, IteratedChsh};
use bell_efficiency::distribution::{
    chsh_optimal_single_copy, single_copy_from_bloch, tensor_power, BlochVector, MeasurementFamily, Party,
};
use bell_efficiency::efficiency::{collins_gisin_of, deflate, table_from_collins_gisin, EfficiencyModel, Policy};
use bell_efficiency::functional::BellFunctional;
use bell_efficiency::gilbert::{gilbert_distance, symmetrize, GilbertConfig, GilbertStatus};
use bell_efficiency::local::{local_bound_exact, local_bound_heuristic, OracleMode};
use bell_efficiency::report::{reproduce, Check, RunConfig, Target, DEFAULT_SEED};
use bell_efficiency::separation::{separate, SeparationProblem, SeparationStatus};
use bell_efficiency::thresholds::{eta_asym, profile, LossyParty};

const KNOWN_MISSES: &[usize] = &[7];

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn from_checks(checks: &[Check], extra: &[(bool, String)]) -> Self {
        let mut passed = checks.iter().all(|c| c.passed || !c.gated);
        let mut parts: Vec<String> =
            checks.iter().filter(|c| c.gated).map(|c| format!("{} = {:.10}", c.name, c.measured)).collect();
        for (ok, text) in extra {
            passed &= ok;
            parts.push(text.clone());
        }
        Outcome { passed, detail: parts.join("; ") }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn config(target: Target) -> RunConfig {
    RunConfig::new(format!("acceptance {target}"), DEFAULT_SEED)
}

fn reproduce_checks(target: Target) -> Vec<Check> {
    reproduce(target, &config(target)).expect("target runs").report.checks
}

fn chsh_closed_forms() -> Outcome {
    let (checks, t) = timed(|| reproduce_checks(Target::Chsh));
    Outcome::from_checks(&checks, &[(t < Duration::from_secs(1), format!("{:.3} s", t.as_secs_f64()))])
}

fn iterated_local_bounds() -> Outcome {
    let (small, t_small) = timed(|| {
        [1, 2].map(|n| chshn::local_bound(n, OracleMode::Exact).expect("exact").value)
    });
    let (three, t_three) = timed(|| chshn::local_bound(3, OracleMode::Exact).expect("exact").value);
    Outcome {
        passed: small == [3.0, 10.0] && three == 31.0 && t_small < Duration::from_secs(1) && t_three < Duration::from_secs(600),
        detail: format!(
            "L1 = {}, L2 = {} ({:.3} s); L3 = {three} ({:.2} s over 8^8 Alice maps)",
            small[0],
            small[1],
            t_small.as_secs_f64(),
            t_three.as_secs_f64()
        ),
    }
}

fn quantum_values() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for n in 1..=4 {
        let q = chshn::quantum_value(n).expect("tensor evaluation agrees with the closed form");
        let err = (q - (2.0 + 2f64.sqrt()).powi(n as i32)).abs();
        passed &= err <= 1e-9;
        parts.push(format!("n={n}: {q:.9} (err {err:.1e})"));
    }
    Outcome { passed, detail: parts.join(", ") }
}

fn table_one() -> Outcome {
    let checks = reproduce_checks(Target::Table1);
    let gated = checks.iter().filter(|c| c.gated).count();
    let flagged: Vec<String> =
        checks.iter().filter(|c| !c.gated).map(|c| format!("{}={:.4}", c.name, c.measured)).collect();
    let passed = checks.iter().all(|c| c.passed || !c.gated);
    Outcome { passed, detail: format!("{gated} printed values matched to 1e-4; excluded: {}", flagged.join(", ")) }
}

fn lp_symmetric() -> Outcome {
    let (checks, t) = timed(|| reproduce_checks(Target::LpN2Sym));
    Outcome::from_checks(&checks, &[(t < Duration::from_secs(300), format!("{:.1} s including full enumeration", t.as_secs_f64()))])
}

fn lp_asymmetric() -> Outcome {
    Outcome::from_checks(&reproduce_checks(Target::LpN2Asym), &[])
}

fn lp_extra_outcome() -> Outcome {
    Outcome::from_checks(&reproduce_checks(Target::LpN2Extra), &[])
}

fn printed_matrix() -> Outcome {
    let text = include_str!("data/sym_n2.txt");
    let f = BellFunctional::parse_block_text(text).expect("data file parses");
    let dist = tensor_power(&chsh_optimal_single_copy(), 2).unwrap();
    let r = profile(&f, &dist, Policy::LastOutcome).unwrap();
    let q = 4.0 * (2f64.sqrt() - 1.0);
    let passed = (r.q - q).abs() <= 1e-9 && r.m_a == -3.5 && r.m_b == -3.5 && r.l == 0.0 && r.x == 0.0;
    Outcome {
        passed,
        detail: format!("Q = {:.12}, M_A = {}, M_B = {}, L = {} ({:?}), X = {}", r.q, r.m_a, r.m_b, r.l, r.l_provenance, r.x),
    }
}

fn gilbert_two() -> Outcome {
    Outcome::from_checks(&reproduce_checks(Target::GilbertN2), &[])
}

fn gilbert_three_and_four() -> Outcome {
    let (three, t3) = timed(|| reproduce_checks(Target::GilbertN3));
    let (four, t4) = timed(|| reproduce_checks(Target::GilbertN4));
    let mut checks = three;
    checks.extend(four);
    Outcome::from_checks(&checks, &[(true, format!("n=3 {:.0} s, n=4 {:.0} s", t3.as_secs_f64(), t4.as_secs_f64()))])
}

fn random_bloch(rng: &mut ChaCha8Rng) -> BlochVector {
    loop {
        let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.1 {
            return BlochVector::new(v[0] / norm, v[1] / norm, v[2] / norm).unwrap();
        }
    }
}

fn random_integer_functional(rng: &mut ChaCha8Rng, m: usize, o: usize) -> BellFunctional {
    let joint = (0..m * m * o * o).map(|_| rng.gen_range(-3..=3) as f64).collect();
    BellFunctional::from_joint(m, o, joint).unwrap()
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut parts = Vec::new();
    let mut passed = true;

    // distributions, deflated points and the reduced representation
    let mut worst_dist: f64 = 0.0;
    let mut worst_cg: f64 = 0.0;
    for trial in 0..20 {
        let alice = MeasurementFamily::new(Party::Alice, vec![random_bloch(&mut rng), random_bloch(&mut rng)]).unwrap();
        let bob = MeasurementFamily::new(Party::Bob, vec![random_bloch(&mut rng), random_bloch(&mut rng)]).unwrap();
        let base = single_copy_from_bloch(&alice, &bob).unwrap();
        let n = 1 + trial % 3;
        let dist = tensor_power(&base, n).unwrap();
        let policy = if trial % 2 == 0 { Policy::LastOutcome } else { Policy::ExtraOutcome };
        let model = EfficiencyModel::new(rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0), policy).unwrap();
        let deflated: Behavior = deflate(&dist, model).into_table();
        for t in [dist.table(), &deflated] {
            worst_dist = worst_dist.max(t.normalization_deviation()).max(t.signaling_deviation());
        }
        let cg = collins_gisin_of(&deflated, 1e-12).unwrap();
        let back = table_from_collins_gisin(&cg, deflated.inputs(), deflated.outputs()).unwrap();
        let diff = back.entries().iter().zip(deflated.entries()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_cg = worst_cg.max(diff);
    }
    passed &= worst_dist <= 1e-12 && worst_cg <= 1e-12;
    parts.push(format!("normalization/no-signaling {worst_dist:.1e}, CG roundtrip {worst_cg:.1e}"));

    // symmetrized Gilbert output
    let dist = tensor_power(&chsh_optimal_single_copy(), 2).unwrap();
    let target = deflate(&dist, EfficiencyModel::symmetric(0.9, Policy::LastOutcome).unwrap()).into_table();
    let cfg = GilbertConfig::new(1e-6, 50, 200, OracleMode::Heuristic { restarts: 50, seed: DEFAULT_SEED })
        .unwrap()
        .with_symmetrization(true, false);
    let c = gilbert_distance(&target, &cfg).unwrap().witness.c;
    let once = symmetrize(&c, 2).unwrap();
    let symmetric = once == c && symmetrize(&once, 2).unwrap() == once;
    passed &= symmetric;
    parts.push(format!("C = sym(C) and idempotence: {symmetric}"));

    // heuristic never exceeds exact
    let mut heuristic_ok = 0;
    for trial in 0..50 {
        let (m, o) = if trial % 2 == 0 { (2, 2) } else { (4, 4) };
        let f = random_integer_functional(&mut rng, m, o);
        let exact = local_bound_exact(&f).unwrap().value;
        let heuristic = local_bound_heuristic(&f, 20, trial as u64).value;
        heuristic_ok += usize::from(heuristic <= exact);
    }
    passed &= heuristic_ok == 50;
    parts.push(format!("heuristic <= exact on {heuristic_ok}/50"));

    // LP and exact-oracle Gilbert agree on membership at one copy
    let one = tensor_power(&chsh_optimal_single_copy(), 1).unwrap();
    let mut agree = Vec::new();
    for eta in [0.75, 0.8184, 0.8384, 0.9] {
        let target = deflate(&one, EfficiencyModel::symmetric(eta, Policy::LastOutcome).unwrap()).into_table();
        let lp_outside = separate(&SeparationProblem::new(target.clone())).unwrap().status == SeparationStatus::Separated;
        let cfg = GilbertConfig::new(1e-7, 50, 10_000, OracleMode::Exact).unwrap();
        let run = gilbert_distance(&target, &cfg).unwrap();
        let gilbert_outside = run.status == GilbertStatus::GapClosed && run.witness.distance > 1e-7;
        let expected_outside = eta > 2.0 * (2f64.sqrt() - 1.0);
        passed &= lp_outside == gilbert_outside && lp_outside == expected_outside;
        agree.push(format!("{eta}: {}", if lp_outside { "outside" } else { "inside" }));
    }
    parts.push(format!("LP = Gilbert at {}", agree.join(", ")));

    // the one-sided values of the iterated game are 2^n
    for n in 1..=4 {
        let game = IteratedChsh::build(n).unwrap().to_functional().unwrap();
        let dist = tensor_power(&chsh_optimal_single_copy(), n).unwrap();
        let local = if n <= 3 {
            chshn::local_bound(n, OracleMode::Exact).unwrap()
        } else {
            chshn::local_bound(n, OracleMode::Heuristic { restarts: 200, seed: DEFAULT_SEED }).unwrap()
        };
        let r = bell_efficiency::thresholds::profile_with_local(&game, &dist, Policy::LastOutcome, &local).unwrap();
        let m = 2f64.powi(n as i32);
        passed &= (r.m_a - m).abs() < 1e-9 && (r.m_b - m).abs() < 1e-9;
        passed &= eta_asym(&r, LossyParty::Alice).is_ok();
    }
    parts.push("M_A = M_B = 2^n for n = 1..4".into());

    Outcome { passed, detail: parts.join("; ") }
}

fn main() -> ExitCode {
    let criteria: [(usize, &str, fn() -> Outcome); 11] = [
        (1, "CHSH closed forms", chsh_closed_forms),
        (2, "iterated local bounds", iterated_local_bounds),
        (3, "quantum values", quantum_values),
        (4, "threshold table", table_one),
        (5, "LP two copies, symmetric", lp_symmetric),
        (6, "LP two copies, asymmetric", lp_asymmetric),
        (7, "LP two copies, extra outcome", lp_extra_outcome),
        (8, "printed functional", printed_matrix),
        (9, "Gilbert two copies", gilbert_two),
        (10, "Gilbert three and four copies", gilbert_three_and_four),
        (11, "property suites", property_suites),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        if filter.is_some_and(|f| f != id) {
            continue;
        }
        let (outcome, t) = timed(run);
        let verdict = if outcome.passed { "PASS" } else { "FAIL" };
        let known = if !outcome.passed && KNOWN_MISSES.contains(&id) { " (known miss)" } else { "" };
        println!("criterion {id:>2} {verdict}{known} [{name}, {:.1} s] {}", t.as_secs_f64(), outcome.detail);
        if !outcome.passed && !KNOWN_MISSES.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
