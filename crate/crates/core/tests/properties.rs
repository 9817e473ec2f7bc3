use nalgebra::DMatrix;
use proptest::prelude::*;

use netqubo::analysis::{summarize, time_to_solution, Grouping, Outcome};
use netqubo::ilp::{IlpInstance, RowLabel, SlackBound, VarLabel};
use netqubo::qubo::{build_encoding, build_qubo, to_ising, triangular_reduce, QuboProblem};
use netqubo::sampler::{pack_bits, unpack_bits, ScheduleSpec};

/// Random small ILP: rows of integer coefficients (scaled), optional slacks.
fn ilp_strategy() -> impl Strategy<Value = IlpInstance> {
    (1usize..5, 1usize..5, 0u32..3).prop_flat_map(|(k, m, scale_bits)| {
        (
            proptest::collection::vec(proptest::collection::vec(-8i64..8, m), k),
            proptest::collection::vec(-20i64..20, k),
            proptest::collection::vec(0i64..4, m),
            proptest::collection::vec(1u64..6, m),
            proptest::collection::vec(proptest::option::of((1u64..8, 0u32..=scale_bits)), k),
        )
            .prop_map(move |(a, b, c, upper, slack)| {
                let rows = a
                    .into_iter()
                    .map(|r| r.into_iter().enumerate().filter(|&(_, v)| v != 0).collect())
                    .collect();
                IlpInstance::new(
                    scale_bits,
                    rows,
                    b,
                    c,
                    upper,
                    (0..m).map(VarLabel::Generic).collect(),
                    (0..k).map(RowLabel::Generic).collect(),
                    slack.into_iter().map(|s| s.map(|(int_max, frac_bits)| SlackBound { int_max, frac_bits })).collect(),
                )
                .unwrap()
            })
    })
}

fn symmetric(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-5.0f64..5.0, n * n).prop_map(move |v| {
        let mut m = DMatrix::from_vec(n, n, v);
        for i in 0..n {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        m
    })
}

fn bits(n: usize) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0u8..2, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn master_identity(inst in ilp_strategy(), p in 1.0f64..50.0, seed in any::<u64>()) {
        let enc = build_encoding(&inst);
        let qp = build_qubo(&inst, &enc, p).unwrap();
        prop_assert_eq!(qp.n(), enc.n_bits());
        let n = qp.n();
        let q: Vec<u8> = (0..n).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
        let x = enc.decode_x(&q);
        let s = enc.decode_slack_scaled(&q);
        let scale = inst.scale();
        let res: f64 = inst.residual_scaled(&x).iter().zip(&s).map(|(&r, &s)| ((r + s) as f64 / scale).powi(2)).sum();
        let rhs = inst.objective(&x) as f64 + p * res;
        prop_assert!((qp.energy(&q) - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn encode_decode_inverse(inst in ilp_strategy(), seed in any::<u64>()) {
        let enc = build_encoding(&inst);
        let q: Vec<u8> = (0..enc.n_bits()).map(|i| ((seed.rotate_left(i as u32 * 7)) & 1) as u8).collect();
        let x = enc.decode_x(&q);
        let s = enc.decode_slack_scaled(&q);
        prop_assert_eq!(enc.encode(&x, &s).unwrap(), q);
        for (v, &u) in x.iter().zip(&inst.var_upper) {
            prop_assert!(*v >= 0 && (*v as u64) < 2 * u.max(1) );
        }
    }

    #[test]
    fn ising_identity(m in (1usize..9).prop_flat_map(symmetric), seed in any::<u64>()) {
        let n = m.nrows();
        let qp = QuboProblem::from_dense(&m, 0.0).unwrap();
        let ising = to_ising(&qp);
        let q: Vec<u8> = (0..n).map(|i| ((seed >> i) & 1) as u8).collect();
        let sigma: Vec<i8> = q.iter().map(|&b| if b == 1 { 1 } else { -1 }).collect();
        prop_assert!((ising.energy(&sigma) - qp.quadratic_energy(&q)).abs() < 1e-9);
        let j = ising.j_dense();
        prop_assert!((0..n).all(|i| j[(i, i)] == 0.0));
    }

    #[test]
    fn triangular_preserves_energy(m in (1usize..9).prop_flat_map(symmetric), q in bits(8)) {
        let n = m.nrows();
        let q = &q[..n];
        let tri = triangular_reduce(&m);
        let e = |a: &DMatrix<f64>| -> f64 {
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a[(i, j)] * f64::from(q[i] * q[j])).sum()
        };
        prop_assert!((e(&m) - e(&tri)).abs() < 1e-9);
        prop_assert!((0..n).all(|i| (0..i).all(|j| tri[(i, j)] == 0.0)));
        let qp = QuboProblem::from_dense(&m, 0.0).unwrap();
        prop_assert!((qp.quadratic_energy(q) - e(&m)).abs() < 1e-9);
    }

    #[test]
    fn qubo_text_round_trip(m in (1usize..9).prop_flat_map(symmetric), offset in -100.0f64..100.0) {
        let qp = QuboProblem::from_dense(&m, offset).unwrap();
        prop_assert_eq!(QuboProblem::from_text(&qp.to_text()).unwrap(), qp);
    }

    #[test]
    fn schedule_round_trip(t_ps in 0.0f64..2000.0, pause in proptest::option::of((0.0f64..=1.0, 0.0f64..100.0))) {
        let spec = match pause {
            None => ScheduleSpec::plain(t_ps),
            Some((s_p, t_p)) => ScheduleSpec { t_ps, s_p: Some(s_p), t_p },
        };
        prop_assert_eq!(spec.to_string().parse::<ScheduleSpec>().unwrap(), spec);
    }

    #[test]
    fn bit_packing(q in proptest::collection::vec(0u8..2, 0..200)) {
        prop_assert_eq!(unpack_bits(&pack_bits(&q), q.len()).unwrap(), q);
    }

    #[test]
    fn time_model_is_affine(t in 0.0f64..5000.0, n in 0u64..1_000_000) {
        let a = time_to_solution(t, 0.0, n).unwrap();
        let b = time_to_solution(0.0, t, n).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((a.per_sample_ms - (0.58 + 5.75 * t / 1000.0)).abs() < 1e-12);
        prop_assert!((a.total_s - n as f64 * a.per_sample_ms / 1000.0).abs() < 1e-9);
    }

    #[test]
    fn feasible_rate_permutation_invariant(
        items in proptest::collection::vec((any::<bool>(), 0i64..10, -50.0f64..50.0), 1..60),
        shift in any::<usize>(),
    ) {
        let outcomes: Vec<Outcome> = items
            .iter()
            .map(|&(feasible, cost, energy)| Outcome { schedule: "1".into(), penalty: Some(4.0), accuracy: Some(1), energy, feasible, cost })
            .collect();
        let mut rotated = outcomes.clone();
        let len = rotated.len();
        rotated.rotate_left(shift % len);
        let a = summarize(&outcomes, Grouping::CELL, 10).unwrap();
        let b = summarize(&rotated, Grouping::CELL, 10).unwrap();
        prop_assert_eq!(a[0].feasible_per_million, b[0].feasible_per_million);
        prop_assert_eq!(&a[0].cost_counts, &b[0].cost_counts);
        let expect = items.iter().filter(|i| i.0).count() as f64 * 1e6 / len as f64;
        prop_assert_eq!(a[0].feasible_per_million, expect);
    }
}
