use chaoslab_core::distance::{energy_distance, sliced_w1, w1_1d, Marginal1d, MarginalNd};
use proptest::prelude::*;

/// Minimum-cost assignment by enumerating every permutation (Heap's algorithm).
fn brute_force_w1(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).abs()).sum::<f64>();
    let mut best = cost(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best / n as f64
}

fn repeat_each(v: &[f64], k: usize) -> Vec<f64> {
    v.iter().flat_map(|x| std::iter::repeat_n(*x, k)).collect()
}

fn sample_vec(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #[test]
    fn w1_matches_assignment_lp(a in sample_vec(1..=8), b in sample_vec(8..=8)) {
        let b = &b[..a.len()];
        let fast = w1_1d(&Marginal1d::samples(a.clone()).unwrap(), &Marginal1d::samples(b.to_vec()).unwrap());
        let lp = brute_force_w1(&a, b);
        prop_assert!((fast - lp).abs() <= 1e-9 * (1.0 + lp), "fast {fast} lp {lp}");
    }

    #[test]
    fn w1_unequal_sizes_match_lp(a in sample_vec(1..=3), b in sample_vec(1..=2)) {
        // an n-point and an m-point empirical measure are both uniform on n*m
        // atoms after repeating each sample, so the assignment LP applies
        let (n, m) = (a.len(), b.len());
        let fast = w1_1d(&Marginal1d::samples(a.clone()).unwrap(), &Marginal1d::samples(b.clone()).unwrap());
        let lp = brute_force_w1(&repeat_each(&a, m), &repeat_each(&b, n));
        prop_assert!((fast - lp).abs() <= 1e-9 * (1.0 + lp), "fast {fast} lp {lp}");
    }

    #[test]
    fn w1_is_a_metric_on_samples(a in sample_vec(1..=12), b in sample_vec(1..=12), c in sample_vec(1..=12)) {
        let m = |v: &Vec<f64>| Marginal1d::samples(v.clone()).unwrap();
        let (ab, ba) = (w1_1d(&m(&a), &m(&b)), w1_1d(&m(&b), &m(&a)));
        prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab));
        prop_assert!(w1_1d(&m(&a), &m(&a)).abs() <= 1e-12);
        let via = w1_1d(&m(&a), &m(&c)) + w1_1d(&m(&c), &m(&b));
        prop_assert!(ab <= via + 1e-9);
    }

    #[test]
    fn w1_shift_equals_offset(a in sample_vec(1..=12), shift in -5.0f64..5.0) {
        let moved: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let w = w1_1d(&Marginal1d::samples(a).unwrap(), &Marginal1d::samples(moved).unwrap());
        prop_assert!((w - shift.abs()).abs() <= 1e-9);
    }

    #[test]
    fn sliced_and_energy_vanish_on_identical(points in prop::collection::vec(-3.0f64..3.0, 2..40), seed in any::<u64>()) {
        let pts = if points.len() % 2 == 1 { points[1..].to_vec() } else { points };
        prop_assume!(!pts.is_empty());
        let a = MarginalNd::Samples { points: pts.clone(), dim: 2 };
        prop_assert!(sliced_w1(&a, &a, 8, seed).unwrap().abs() <= 1e-12);
        prop_assert!(energy_distance(&pts, &pts, 2).unwrap().abs() <= 1e-9);
    }
}

#[test]
fn w1_between_gaussians_is_mean_gap_for_equal_sd() {
    let a = Marginal1d::Gaussian { mean: 0.3, sd: 1.7 };
    let b = Marginal1d::Gaussian { mean: -1.1, sd: 1.7 };
    assert!((w1_1d(&a, &b) - 1.4).abs() < 1e-6);
}
