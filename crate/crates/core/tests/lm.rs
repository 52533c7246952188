mod common;

use common::{naive_lm, random_orthogonal};
use grouphet::lm::EvalScratch;
use grouphet::{
    estimate_pca, lm_aggregate, lm_pair, stat_a, GroupStructure, LmEvaluator, LoadingMatrix64, Matrix64,
    RngStream,
};
use grouphet::dgp::simulate;
use grouphet::{DgpConfig, DgpKind};
use proptest::prelude::*;

fn random_loadings(n: usize, r: usize, rng: &mut RngStream) -> LoadingMatrix64 {
    LoadingMatrix64::new(Matrix64::from_fn(n, r, |_, _| 1.0 + rng.std_normal())).unwrap()
}

fn split(n: usize, s: usize, rng: &mut RngStream) -> Vec<usize> {
    // random composition of n into s parts, each at least 2
    let mut sizes = vec![2; s];
    for _ in 0..n - 2 * s {
        sizes[rng.below(s as u64) as usize] += 1;
    }
    sizes
}

#[test]
fn brute_force_oracle_small_instances() {
    let mut rng = RngStream::new(31337);
    let mut checked = 0;
    for _ in 0..200 {
        let r = 1 + rng.below(2) as usize;
        let s = 2 + rng.below(3) as usize;
        let d = r * (r + 1) / 2;
        let n_min = (2 * s).max(d + 2);
        if n_min > 12 {
            continue;
        }
        let n = n_min + rng.below((13 - n_min) as u64) as usize;
        let sizes = split(n, s, &mut rng);
        let groups = GroupStructure::from_sizes(&sizes).unwrap();
        let l = random_loadings(n, r, &mut rng);
        let stats = lm_aggregate(&l, &groups).unwrap();
        let oracle = naive_lm(&l.values().to_rows(), &sizes);
        assert_eq!(stats.pairs.len(), oracle.len());
        for (p, ((j, k), lm)) in stats.pairs.iter().zip(&oracle) {
            assert_eq!((p.j, p.k), (*j, *k));
            assert!((p.lm - lm).abs() <= 1e-9 * lm.abs().max(1.0), "{} vs {lm}", p.lm);
        }
        let ev = LmEvaluator::new(&l, &groups).unwrap().evaluate(None);
        assert!((ev.lm1 - stats.lm1).abs() <= 1e-9 * stats.lm1.max(1.0));
        assert!((ev.lm2 - stats.lm2).abs() <= 1e-9 * stats.lm2.max(1.0));
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn oracle_with_three_factors() {
    let mut rng = RngStream::new(12);
    let sizes = [4, 4, 4];
    let groups = GroupStructure::from_sizes(&sizes).unwrap();
    let l = random_loadings(12, 3, &mut rng);
    let stats = lm_aggregate(&l, &groups).unwrap();
    for (p, (_, lm)) in stats.pairs.iter().zip(naive_lm(&l.values().to_rows(), &sizes)) {
        assert!((p.lm - lm).abs() <= 1e-9 * lm.max(1.0));
    }
}

#[test]
fn rotation_invariance_on_estimated_loadings() {
    let cfg = DgpConfig::new(DgpKind::OneB, 80, 50);
    let sample = simulate(&cfg, &RngStream::new(8)).unwrap();
    let (l, _) = estimate_pca(&sample.panel, 5, true).unwrap();
    let base = lm_aggregate(&l, &sample.groups).unwrap();
    let mut rng = RngStream::new(99);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = random_orthogonal(5, &mut rng);
        let rotated = LoadingMatrix64::new(l.values().matmul(&q.transpose()).unwrap()).unwrap();
        let stats = lm_aggregate(&rotated, &sample.groups).unwrap();
        for (a, b) in base.pairs.iter().zip(&stats.pairs) {
            worst = worst.max((a.lm - b.lm).abs() / a.lm.max(1.0));
        }
    }
    assert!(worst <= 1e-8, "max relative drift {worst}");
}

#[test]
fn pair_value_examples() {
    let l = LoadingMatrix64::new(Matrix64::from_vec(2, 1, vec![2f64.sqrt(), 0.0]).unwrap()).unwrap();
    let g = GroupStructure::from_sizes(&[1, 1]).unwrap();
    let a = stat_a(0, 1, &l, &g).unwrap();
    assert!((a.entries()[0] - 2.0 * 2f64.sqrt()).abs() < 1e-14);
    assert!((lm_pair(0, 1, &l, &g).unwrap().lm - 2.0).abs() < 1e-12);
    let agg = lm_aggregate(&l, &g).unwrap();
    assert_eq!(agg.lm1, agg.lm2);
}

#[test]
fn four_groups_give_six_pairs() {
    let mut rng = RngStream::new(4);
    let l = random_loadings(16, 2, &mut rng);
    let g = GroupStructure::from_sizes(&[4, 4, 4, 4]).unwrap();
    let stats = lm_aggregate(&l, &g).unwrap();
    assert_eq!(stats.pairs.len(), 6);
    let max = stats.pairs.iter().map(|p| p.lm).fold(f64::MIN, f64::max);
    let min = stats.pairs.iter().map(|p| p.lm).fold(f64::MAX, f64::min);
    assert_eq!((stats.lm1, stats.lm2), (max, min));
}

#[test]
fn single_precision_matches_double() {
    let mut rng = RngStream::new(10);
    let l = random_loadings(40, 2, &mut rng);
    let g = GroupStructure::from_sizes(&[10, 15, 15]).unwrap();
    let l32 = grouphet::LoadingMatrix32::new(l.values().cast()).unwrap();
    let a = lm_aggregate(&l, &g).unwrap();
    let b = lm_aggregate(&l32, &g).unwrap();
    assert!((a.lm1 - b.lm1 as f64).abs() < 1e-3 * a.lm1.max(1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nonnegative_and_evaluator_consistent(seed in any::<u64>(), r in 1usize..4) {
        let mut rng = RngStream::new(seed);
        let sizes = split(30, 3, &mut rng);
        let g = GroupStructure::from_sizes(&sizes).unwrap();
        let l = random_loadings(30, r, &mut rng);
        let stats = lm_aggregate(&l, &g).unwrap();
        let ev = LmEvaluator::new(&l, &g).unwrap();
        let mut scratch = EvalScratch::default();
        ev.evaluate_into(None, &mut scratch);
        for (p, v) in stats.pairs.iter().zip(ev.last_pair_values(&scratch)) {
            prop_assert!(p.lm >= 0.0);
            prop_assert!((p.lm - v).abs() <= 1e-9 * p.lm.max(1.0));
        }
        let perm = rng.random_permutation(30).unwrap();
        let permuted = lm_aggregate(&l.permuted(&perm).unwrap(), &g).unwrap();
        let via_order = ev.evaluate(Some(&perm));
        prop_assert!((permuted.lm1 - via_order.lm1).abs() <= 1e-9 * permuted.lm1.max(1.0));
        prop_assert!((permuted.lm2 - via_order.lm2).abs() <= 1e-9 * permuted.lm2.max(1.0));
    }
}
