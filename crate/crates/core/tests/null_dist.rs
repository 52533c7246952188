mod common;

use common::{chi2_cdf, chi2_quantile, ks_distance};
use grouphet::null_dist::{write_critical_values_csv, DEFAULT_NULL_DRAWS};
use grouphet::{
    asymptotic_pvalue, critical_value, simulate_null, GroupStructure, NullDistribution, NullSimulationConfig,
    Statistic,
};

fn two_group(shares: [f64; 2], d: usize, draws: usize, seed: u64) -> NullSimulationConfig {
    NullSimulationConfig::new(shares.to_vec(), d, draws, seed).unwrap()
}

#[test]
fn two_groups_reduce_to_chi_square() {
    for (d, analytic) in [(1usize, 3.8415), (3, 7.8147), (6, 12.5916)] {
        let oracle = chi2_quantile(0.95, d as f64);
        assert!((oracle - analytic).abs() < 1e-4);
        let sample = simulate_null(&two_group([0.3, 0.7], d, 200_000, 50 + d as u64)).unwrap();
        assert_eq!(sample.max_draws, sample.min_draws);
        let ks = ks_distance(&sample.max_draws, |x| chi2_cdf(x, d as f64));
        assert!(ks <= 0.005, "d={d}: KS {ks}");
        let q = critical_value(&sample.max_draws, 0.05).unwrap();
        assert!((q / oracle - 1.0).abs() < 0.02, "d={d}: {q} vs {oracle}");
    }
}

#[test]
fn equal_shares_d1() {
    let sample = simulate_null(&two_group([0.5, 0.5], 1, DEFAULT_NULL_DRAWS, 1)).unwrap();
    let q = critical_value(&sample.max_draws, 0.05).unwrap();
    assert!((q / 3.8415 - 1.0).abs() < 0.02);
}

#[test]
fn pvalue_quantile_duality() {
    let sample = simulate_null(&two_group([0.5, 0.5], 2, 10_000, 9)).unwrap();
    let q = critical_value(&sample.max_draws, 0.05).unwrap();
    let p = asymptotic_pvalue(&sample.max_draws, q);
    assert!(p <= 0.05 + 1.0 / 10_000.0 + 1e-12);
    assert_eq!(asymptotic_pvalue(&sample.max_draws, 0.0), 1.0);
    let top = sample.max_draws.iter().copied().fold(f64::MIN, f64::max);
    assert_eq!(asymptotic_pvalue(&sample.max_draws, top + 1.0), 0.0);
}

#[test]
fn max_dominates_min_with_many_groups() {
    let g = GroupStructure::from_sizes(&[5, 10, 20, 40, 25]).unwrap();
    let cfg = NullSimulationConfig::for_groups(&g, 3, 20_000, 4).unwrap();
    let dist = NullDistribution::simulate(&cfg).unwrap();
    for alpha in [0.01, 0.05, 0.1] {
        let hi = dist.critical_value(Statistic::Lm1, alpha).unwrap();
        let lo = dist.critical_value(Statistic::Lm2, alpha).unwrap();
        assert!(hi > lo && lo > 0.0);
    }
    // each pair is chi-square(6), so the max law sits above and the min law below
    let q = chi2_quantile(0.95, 6.0);
    assert!(dist.critical_value(Statistic::Lm1, 0.05).unwrap() > q);
    assert!(dist.critical_value(Statistic::Lm2, 0.05).unwrap() < q);
}

#[test]
fn identical_across_thread_counts() {
    let cfg = NullSimulationConfig::new(vec![0.1, 0.2, 0.3, 0.4], 6, 30_000, 77).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_null(&cfg).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    assert_ne!(a, simulate_null(&NullSimulationConfig { seed: 78, ..cfg.clone() }).unwrap());
}

/// Industry-group classification: nine groups, twelve factors.
#[test]
fn industry_group_critical_values() {
    let g = GroupStructure::from_sizes(&[237, 67, 30, 51, 39, 36, 2045, 48, 201]).unwrap();
    let cfg = NullSimulationConfig::for_groups(&g, 12, DEFAULT_NULL_DRAWS, 2020).unwrap();
    let dist = NullDistribution::simulate(&cfg).unwrap();
    let lm1 = dist.critical_value(Statistic::Lm1, 0.05).unwrap();
    let lm2 = dist.critical_value(Statistic::Lm2, 0.05).unwrap();
    assert!((lm1 / 119.11 - 1.0).abs() < 0.03, "LM1 {lm1}");
    assert!((lm2 / 65.44 - 1.0).abs() < 0.03, "LM2 {lm2}");
}

#[test]
fn csv_export() {
    let cfg = NullSimulationConfig::new(vec![0.5, 0.5], 3, 5000, 1).unwrap();
    let dist = NullDistribution::simulate(&cfg).unwrap();
    let rows = dist.table(&[0.01, 0.05, 0.1]).unwrap();
    let mut buf = Vec::new();
    write_critical_values_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "statistic,alpha,value,n_draws,seed");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("LM1,0.01,"));
    assert!(lines[6].starts_with("LM2,0.1,"));
}
