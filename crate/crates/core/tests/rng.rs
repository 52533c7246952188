mod common;

use std::collections::HashMap;

use common::{chi2_cdf, chi2_quantile};
use grouphet::RngStream;

#[test]
fn normal_moments() {
    let mut rng = RngStream::new(100);
    let n = 1_000_000;
    let mut buf = vec![0.0; n];
    rng.fill_std_normal(&mut buf);
    let mean = buf.iter().sum::<f64>() / n as f64;
    let var = buf.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 0.005, "mean {mean}");
    assert!((var - 1.0).abs() < 0.01, "variance {var}");
}

#[test]
fn normal_tail_frequencies() {
    let mut rng = RngStream::new(101);
    let n = 400_000;
    let beyond = (0..n).filter(|_| rng.std_normal().abs() > 1.959964).count() as f64 / n as f64;
    assert!((beyond - 0.05).abs() < 0.002, "{beyond}");
}

#[test]
fn uniform_range_and_mean() {
    let mut rng = RngStream::new(102);
    let n = 1_000_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let x = rng.uniform(0.5, 1.5).unwrap();
        assert!((0.5..1.5).contains(&x));
        sum += x;
    }
    assert!((sum / n as f64 - 1.0).abs() < 0.001);
}

#[test]
fn permutations_of_three_are_uniform() {
    let mut rng = RngStream::new(103);
    let n = 60_000;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..n {
        *counts.entry(rng.random_permutation(3).unwrap()).or_default() += 1;
    }
    assert_eq!(counts.len(), 6);
    let expected = n as f64 / 6.0;
    let mut chi2 = 0.0;
    for &c in counts.values() {
        assert!((c as f64 / n as f64 - 1.0 / 6.0).abs() < 0.006);
        chi2 += (c as f64 - expected).powi(2) / expected;
    }
    assert!(chi2 < chi2_quantile(0.999, 5.0), "chi-square {chi2}");
}

#[test]
fn fixed_points_follow_poisson_one() {
    let mut rng = RngStream::new(104);
    let draws = 50_000;
    // bins 0, 1, 2, 3, >= 4
    let mut counts = [0usize; 5];
    for _ in 0..draws {
        let p = rng.random_permutation(52).unwrap();
        let fixed = p.iter().enumerate().filter(|(i, &v)| *i == v).count();
        counts[fixed.min(4)] += 1;
    }
    let e = (-1f64).exp();
    let probs = [e, e, e / 2.0, e / 6.0, 1.0 - e * (1.0 + 1.0 + 0.5 + 1.0 / 6.0)];
    let chi2: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, p)| (c as f64 - draws as f64 * p).powi(2) / (draws as f64 * p))
        .sum();
    assert!(1.0 - chi2_cdf(chi2, 4.0) > 0.001, "chi-square {chi2}");
}

#[test]
fn substreams_are_uncorrelated() {
    let root = RngStream::new(105);
    let mut a = root.substream(1);
    let mut b = root.substream(2);
    let n = 1_000_000;
    let xs: Vec<f64> = (0..n).map(|_| a.next_f64() - 0.5).collect();
    let ys: Vec<f64> = (0..n).map(|_| b.next_f64() - 0.5).collect();
    let corr = |u: &[f64], v: &[f64]| {
        let num: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
        let du: f64 = u.iter().map(|x| x * x).sum();
        let dv: f64 = v.iter().map(|x| x * x).sum();
        num / (du * dv).sqrt()
    };
    assert!(corr(&xs, &ys).abs() < 0.01);
    assert!(corr(&xs[1..], &ys[..n - 1]).abs() < 0.01);
    assert!(corr(&xs[1..], &xs[..n - 1]).abs() < 0.01);
}
