use bell_efficiency::error::Error;
use bell_efficiency::simplex::{Constraint, LinearProgram, Sense};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Brute force over every basis of tight constraints (rows of `a x <= b`).
fn vertex_enumeration(objective: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let n = objective.len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = -1.0;
        rows.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let m = DMatrix::from_fn(n, n, |r, c| rows[pick[r]].0[c]);
        let rhs = DVector::from_fn(n, |r, _| rows[pick[r]].1);
        if let Some(x) = m.lu().solve(&rhs) {
            let feasible = rows.iter().all(|(row, bound)| row.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= bound + 1e-9);
            if feasible && x.iter().all(|v| v.is_finite()) {
                let v: f64 = objective.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        // next n-subset in lexicographic order
        let total = rows.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < total - n + i {
                pick[i] += 1;
                for k in i + 1..n {
                    pick[k] = pick[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn program(objective: &[f64], a: &[Vec<f64>], b: &[f64], flip: &[bool]) -> LinearProgram {
    LinearProgram {
        objective: objective.to_vec(),
        constraints: a
            .iter()
            .zip(b)
            .zip(flip)
            .map(|((row, &rhs), &f)| {
                if f {
                    Constraint { coefficients: row.iter().map(|v| -v).collect(), sense: Sense::Ge, rhs: -rhs }
                } else {
                    Constraint { coefficients: row.clone(), sense: Sense::Le, rhs }
                }
            })
            .collect(),
    }
}

fn instance(max_vars: usize, max_rows: usize) -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>, Vec<bool>)> {
    (1..=max_vars, 1..=max_rows).prop_flat_map(|(n, rows)| {
        (
            prop::collection::vec(-5i32..=5, n),
            prop::collection::vec(prop::collection::vec(-5i32..=5, n), rows),
            prop::collection::vec(-4i32..=10, rows),
            prop::collection::vec(any::<bool>(), rows),
        )
            .prop_map(move |(c, a, b, flip)| {
                let mut a: Vec<Vec<f64>> = a.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
                let mut b: Vec<f64> = b.into_iter().map(f64::from).collect();
                let mut flip = flip;
                // box keeps every instance bounded
                for i in 0..n {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    a.push(e);
                    b.push(7.0);
                    flip.push(false);
                }
                (c.into_iter().map(f64::from).collect(), a, b, flip)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn agrees_with_vertex_enumeration((c, a, b, flip) in instance(5, 9)) {
        let expected = vertex_enumeration(&c, &a, &b);
        match (program(&c, &a, &b, &flip).solve(), expected) {
            (Ok(s), Some(v)) => prop_assert!((s.value - v).abs() < 1e-9, "{} vs {}", s.value, v),
            (Err(Error::Infeasible), None) => {}
            (got, want) => prop_assert!(false, "solver {:?}, enumeration {:?}", got.map(|s| s.value), want),
        }
    }

    /// Up to 10 variables and 50 rows: primal and dual solutions from the
    /// solver are checked for feasibility directly and must close the gap.
    #[test]
    fn duality_certificate((c, a, b, flip) in instance(10, 40)) {
        let primal = program(&c, &a, &b, &flip).solve();
        let n = c.len();
        // min b.y s.t. A^T y >= c, y >= 0  <=>  max -b.y s.t. -A^T y <= -c
        let dual = LinearProgram {
            objective: b.iter().map(|v| -v).collect(),
            constraints: (0..n)
                .map(|j| Constraint { coefficients: a.iter().map(|row| -row[j]).collect(), sense: Sense::Le, rhs: -c[j] })
                .collect(),
        };
        match primal {
            Ok(p) => {
                let d = dual.solve().expect("bounded feasible primal has an optimal dual");
                for (row, &bound) in a.iter().zip(&b) {
                    prop_assert!(row.iter().zip(&p.x).map(|(u, v)| u * v).sum::<f64>() <= bound + 1e-9);
                }
                prop_assert!(p.x.iter().all(|&v| v >= -1e-12));
                for j in 0..n {
                    prop_assert!(a.iter().zip(&d.x).map(|(row, y)| row[j] * y).sum::<f64>() >= c[j] - 1e-9);
                }
                let cx: f64 = c.iter().zip(&p.x).map(|(u, v)| u * v).sum();
                let by: f64 = b.iter().zip(&d.x).map(|(u, v)| u * v).sum();
                prop_assert!((cx - p.value).abs() < 1e-9);
                prop_assert!((cx - by).abs() < 1e-9, "gap {} vs {}", cx, by);
            }
            Err(Error::Infeasible) => {
                prop_assert!(!matches!(dual.solve(), Ok(_)), "infeasible primal with bounded dual");
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }
}
