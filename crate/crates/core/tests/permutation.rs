use grouphet::dgp::simulate;
use grouphet::{
    estimate_pca, permutation_test, permute_loadings, DgpConfig, DgpKind, GroupStructure, LoadingMatrix64,
    Matrix64, RngStream,
};

fn loadings(n: usize, r: usize, seed: u64) -> LoadingMatrix64 {
    let mut rng = RngStream::new(seed);
    LoadingMatrix64::new(Matrix64::from_fn(n, r, |_, _| 1.0 + rng.std_normal())).unwrap()
}

fn on_grid(p: f64, b: usize) -> bool {
    let m = p * (b + 1) as f64;
    (m - m.round()).abs() < 1e-9 && m.round() >= 1.0 && m.round() <= (b + 1) as f64
}

#[test]
fn identity_and_involution() {
    let l = loadings(6, 2, 1);
    let id: Vec<usize> = (0..6).collect();
    assert_eq!(permute_loadings(&l, &id).unwrap(), l);
    let swap = vec![1, 0, 2, 3, 4, 5];
    let twice = permute_loadings(&permute_loadings(&l, &swap).unwrap(), &swap).unwrap();
    assert_eq!(twice, l);
    assert!(permute_loadings(&l, &[0, 0, 1, 2, 3, 4]).is_err());
    assert!(permute_loadings(&l, &[0, 1]).is_err());
}

#[test]
fn gram_matrix_is_permutation_invariant() {
    let l = loadings(40, 3, 2);
    let perm = RngStream::new(3).random_permutation(40).unwrap();
    let p = permute_loadings(&l, &perm).unwrap();
    assert!(l.values().inner_gram().max_abs_diff(&p.values().inner_gram()) <= 1e-12);
}

#[test]
fn p_values_on_grid() {
    let l = loadings(30, 2, 4);
    let g = GroupStructure::from_sizes(&[10, 8, 12]).unwrap();
    for b in [1, 19, 99, 999] {
        let res = permutation_test(&l, &g, b, 11).unwrap();
        assert!(on_grid(res.p1, b) && on_grid(res.p2, b), "B={b}: {} {}", res.p1, res.p2);
        assert_eq!(res.permuted_lm1.len(), b);
    }
}

#[test]
fn strongly_separated_groups_get_minimal_pvalue() {
    let mut rng = RngStream::new(5);
    let vals: Vec<f64> = (0..40)
        .map(|i| if i < 20 { 0.2 } else { 3.0 } + 0.01 * rng.std_normal())
        .collect();
    let l = LoadingMatrix64::new(Matrix64::from_vec(40, 1, vals).unwrap()).unwrap();
    let g = GroupStructure::from_sizes(&[20, 20]).unwrap();
    let res = permutation_test(&l, &g, 199, 6).unwrap();
    assert!(res.permuted_lm1.iter().all(|&x| x < res.observed_lm1));
    assert_eq!(res.p1, 1.0 / 200.0);
}

#[test]
fn two_equal_groups_have_identical_distributions() {
    let l = loadings(24, 2, 7);
    let g = GroupStructure::from_sizes(&[12, 12]).unwrap();
    let res = permutation_test(&l, &g, 199, 8).unwrap();
    assert_eq!(res.permuted_lm1, res.permuted_lm2);
    assert_eq!(res.p1, res.p2);
}

#[test]
fn identical_across_runs_and_thread_counts() {
    let l = loadings(60, 3, 9);
    let g = GroupStructure::from_sizes(&[15, 20, 25]).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| permutation_test(&l, &g, 499, 21).unwrap())
    };
    let a = run(1);
    assert_eq!(a, run(4));
    assert_eq!(a, run(3));
}

/// A fixed relabelling of the rows before testing leaves the p-value
/// distribution unchanged: compare rejection counts at 10% over many seeds.
#[test]
fn exchangeability_under_pre_permutation() {
    let g = GroupStructure::from_sizes(&[20, 20, 20]).unwrap();
    let fixed = RngStream::new(1234).random_permutation(60).unwrap();
    let reps = 300;
    let (mut plain, mut shuffled) = (0usize, 0usize);
    for s in 0..reps {
        let l = loadings(60, 1, 10_000 + s);
        let a = permutation_test(&l, &g, 99, s).unwrap();
        let b = permutation_test(&permute_loadings(&l, &fixed).unwrap(), &g, 99, s).unwrap();
        plain += usize::from(a.p1 <= 0.10);
        shuffled += usize::from(b.p1 <= 0.10);
    }
    let (p1, p2) = (plain as f64 / reps as f64, shuffled as f64 / reps as f64);
    let pooled = (p1 + p2) / 2.0;
    let se = (pooled * (1.0 - pooled) * 2.0 / reps as f64).sqrt();
    let z = (p1 - p2).abs() / se.max(1e-12);
    assert!(z < 2.576, "two-proportion z = {z} ({p1} vs {p2})");
}

#[test]
fn estimated_loadings_under_null() {
    let cfg = DgpConfig::new(DgpKind::OneA, 80, 50);
    let sample = simulate(&cfg, &RngStream::new(17)).unwrap();
    let (l, _) = estimate_pca(&sample.panel, 1, true).unwrap();
    let res = permutation_test(&l, &sample.groups, 199, 3).unwrap();
    assert!(on_grid(res.p1, 199) && on_grid(res.p2, 199));
    assert!(res.observed_lm2 <= res.observed_lm1);
}
