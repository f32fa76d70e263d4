use std::collections::BTreeSet;

use embsurr_core::analysis::{monotonicity, pdp, CalibratedModel};
use embsurr_core::calib::apply_temperature;
use embsurr_core::data::{make_splits, EmbeddingDataset, Split, ZScoreStats};
use embsurr_core::gp::{point_mutate, random_tree, softmax_in_place, subtree_crossover, GpConfig, SurrogateModel, TreeMethod};
use embsurr_core::metrics::auc_binary;
use embsurr_core::select::{canonical, RunRecord};
use embsurr_core::spfp::{partition, SpfpConfig, ViewPartition};
use embsurr_core::{BinOp, Expr, Matrix, Program};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-6;
const WIDTH: u32 = 6;

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(0..WIDTH).prop_map(Expr::Dim), (-10.0..10.0f64).prop_map(Expr::Const)];
    leaf.prop_recursive(8, 64, 2, |inner| {
        (prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)], inner.clone(), inner)
            .prop_map(|(op, a, b)| Expr::bin(op, a, b))
    })
}

fn row() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, WIDTH as usize)
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-5.0..5.0f64, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn size_and_depth(e: &Expr) -> (usize, usize) {
    match e {
        Expr::Bin(_, a, b) => {
            let (na, da) = size_and_depth(a);
            let (nb, db) = size_and_depth(b);
            (1 + na + nb, 1 + da.max(db))
        }
        _ => (1, 0),
    }
}

fn argmax(row: &[f64]) -> usize {
    (0..row.len()).fold(0, |b, i| if row[i] > row[b] { i } else { b })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eval_is_finite_on_finite_rows(e in expr(), r in row()) {
        prop_assert!(Program::new(e).eval(&r, EPS).unwrap().is_finite());
    }

    #[test]
    fn print_then_parse_is_identity(e in expr()) {
        let p = Program::new(e);
        prop_assert_eq!(Program::parse(&p.serialize()).unwrap(), p);
    }

    #[test]
    fn simplify_is_idempotent(e in expr()) {
        let once = Program::new(e).simplify(EPS);
        prop_assert_eq!(once.simplify(EPS), once);
    }

    #[test]
    fn stats_match_direct_recursion(e in expr()) {
        let (n, d) = size_and_depth(&e);
        let s = Program::new(e).stats();
        prop_assert_eq!(s.node_count, n);
        prop_assert_eq!(s.depth, d);
        prop_assert_eq!(2 * s.op_counts.total() + 1, n);
        prop_assert!(s.visitation_length >= n);
    }

    #[test]
    fn eval_matrix_agrees_with_rowwise_eval(e in expr(), x in matrix(7, WIDTH as usize)) {
        let p = Program::new(e);
        let all = p.eval_matrix(&x, EPS).unwrap();
        for (i, r) in x.rows_iter().enumerate() {
            prop_assert_eq!(all[i].to_bits(), p.eval(r, EPS).unwrap().to_bits());
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(mut z in prop::collection::vec(-800.0..800.0f64, 2..8)) {
        softmax_in_place(&mut z);
        prop_assert!((z.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn temperature_never_changes_argmax(z in matrix(10, 4), t in 0.05..20.0f64) {
        let p = apply_temperature(&z, t).unwrap();
        for i in 0..10 {
            prop_assert_eq!(argmax(p.row(i)), argmax(z.row(i)));
        }
    }

    #[test]
    fn auc_ignores_monotone_transforms(
        scores in prop::collection::vec(-3.0..3.0f64, 4..40),
        seed in any::<u64>(),
    ) {
        let positive: Vec<bool> = scores.iter().enumerate().map(|(i, _)| (seed >> (i % 64)) & 1 == 1).collect();
        let squashed: Vec<f64> = scores.iter().map(|s| s.exp() / (1.0 + s.exp()) * 7.0 - 2.0).collect();
        let a = auc_binary(&scores, &positive);
        let b = auc_binary(&squashed, &positive);
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12),
            (a, b) => prop_assert_eq!(a.is_none(), b.is_none()),
        }
    }

    #[test]
    fn larger_budget_never_adds_views(x in matrix(30, 12), budget in 1usize..12) {
        let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let small = partition(&x, &y, 3, &SpfpConfig::with_budget(budget)).unwrap();
        let large = partition(&x, &y, 3, &SpfpConfig::with_budget(budget + 1)).unwrap();
        prop_assert!(large.len() <= small.len());
    }

    #[test]
    fn selection_ignores_run_order(
        specs in prop::collection::vec((80u32..100, 2usize..6, 0u32..3), 1..10),
        shift in any::<prop::sample::Index>(),
    ) {
        let part = ViewPartition::from_views(vec![vec![0, 1, 2]], 3).unwrap();
        let runs: Vec<RunRecord> = specs
            .iter()
            .enumerate()
            .map(|(i, &(f1, consts, dim))| {
                let genes = vec![
                    Program::new((0..consts).fold(Expr::Dim(dim), |acc, c| Expr::bin(BinOp::Add, acc, Expr::Const(c as f64)))),
                    Program::dim(0),
                ];
                let model = SurrogateModel::new(part.clone(), vec![genes], EPS).unwrap();
                RunRecord::new(i as u64, f64::from(f1) / 100.0, 1, 0, model)
            })
            .collect();
        let mut rotated = runs.clone();
        rotated.rotate_left(shift.index(runs.len()));
        rotated.reverse();
        let a = canonical(&runs).unwrap();
        let b = canonical(&rotated).unwrap();
        prop_assert_eq!(runs[a.chosen].key(), rotated[b.chosen].key());
        prop_assert_eq!(a.threshold.to_bits(), b.threshold.to_bits());
    }

    #[test]
    fn monotonicity_lies_in_unit_interval(e in expr(), x in matrix(40, WIDTH as usize), dim in 0..WIDTH as usize) {
        let model = CalibratedModel::new(vec![Program::new(e), Program::constant(0.0)], 1.0, EPS).unwrap();
        let m = monotonicity(&pdp(&model, &x, dim, 0, 0, 0).unwrap());
        prop_assert!((0.0..=1.0).contains(&m));
    }
}

#[test]
fn offspring_respect_depth_and_view() {
    let config = GpConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let view = [3usize, 8, 9, 20];
    let allowed: BTreeSet<u32> = view.iter().map(|&j| j as u32).collect();
    let mut a = random_tree(&mut rng, &view, 6, TreeMethod::Full, &config);
    let mut b = random_tree(&mut rng, &view, 4, TreeMethod::Grow, &config);
    for i in 0..10_000 {
        if i % 3 == 0 {
            a = point_mutate(&a, &mut rng, &view, &config);
        } else {
            (a, b) = subtree_crossover(&a, &b, &mut rng, config.max_depth);
        }
        for e in [&a, &b] {
            let p = Program::new(e.clone());
            assert!(p.depth() <= config.max_depth, "depth {} at step {i}", p.depth());
            assert!(p.uses_only(&allowed), "{p} leaves the view at step {i}");
        }
        if a.node_count() == 1 && b.node_count() == 1 {
            a = random_tree(&mut rng, &view, 5, TreeMethod::Full, &config);
        }
    }
}

#[test]
fn mutated_constants_stay_in_range() {
    let config = GpConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..2000 {
        let e = point_mutate(&Expr::Const(0.5), &mut rng, &[0], &config);
        match e {
            Expr::Const(c) => assert!((-10.0..=10.0).contains(&c)),
            other => panic!("constant mutated into {other:?}"),
        }
    }
}

fn poisoned(ds: &EmbeddingDataset) -> EmbeddingDataset {
    let mut out = ds.clone();
    for i in 0..out.n() {
        if out.split[i] != Split::Train {
            out.x.row_mut(i).fill(f64::NAN);
        }
    }
    out
}

#[test]
fn train_only_statistics_ignore_val_and_test_rows() {
    let synth = embsurr_core::synth::generate(&embsurr_core::synth::SynthConfig { n: 300, d: 20, test: 60, ..Default::default() }).unwrap();
    let clean = make_splits(&synth.dataset, 0.1, 4).unwrap();
    let dirty = poisoned(&clean);
    let stats = ZScoreStats::fit(&clean).unwrap();
    assert_eq!(ZScoreStats::fit(&dirty).unwrap(), stats);
    assert!(stats.mu.iter().chain(&stats.sigma).all(|v| v.is_finite()));
    let train = clean.indices(Split::Train);
    let y: Vec<usize> = train.iter().map(|&i| clean.y[i]).collect();
    let p_clean = partition(&stats.apply(&clean.x).unwrap().select_rows(&train), &y, 3, &SpfpConfig::default()).unwrap();
    let p_dirty = partition(&stats.apply(&dirty.x).unwrap().select_rows(&train), &y, 3, &SpfpConfig::default()).unwrap();
    assert_eq!(p_clean, p_dirty);
}
