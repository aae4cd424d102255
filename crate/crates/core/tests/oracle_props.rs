use chaoslab_core::gauss_oracle::{heat_kernel_lp_norm, lemma1_integral};
use chaoslab_core::{KernelParams, KernelSpec};
use proptest::prelude::*;

fn spec(name: &str, d: usize, pairs: &[(&str, f64)]) -> KernelSpec {
    let mut p: KernelParams = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    p.insert("d".into(), d as f64);
    KernelSpec::builtin(name, &p).unwrap()
}

/// `(int g_t^p dx)^{1/p}` on the line by a midpoint sum over +-12 sd.
fn lp_norm_by_sum(t: f64, p: f64) -> f64 {
    let sd = t.sqrt();
    let n = 200_000;
    let (lo, hi) = (-12.0 * sd, 12.0 * sd);
    let dx = (hi - lo) / n as f64;
    let sum: f64 = (0..n)
        .map(|k| {
            let x = lo + (k as f64 + 0.5) * dx;
            let g = (-x * x / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt();
            g.powf(p)
        })
        .sum();
    (sum * dx).powf(1.0 / p)
}

#[test]
fn heat_norm_matches_direct_sum() {
    for &t in &[0.01, 0.3, 2.0] {
        for &p in &[1.0, 2.0, 3.5, 8.0] {
            let want = lp_norm_by_sum(t, p);
            let got = heat_kernel_lp_norm(t, p, 1).unwrap();
            assert!((got - want).abs() <= 1e-8 * want, "t={t} p={p}: {got} vs {want}");
        }
    }
}

#[test]
fn heat_norm_factorises_over_coordinates() {
    for &p in &[1.5, 2.0, 6.0] {
        let one = heat_kernel_lp_norm(0.7, p, 1).unwrap();
        let three = heat_kernel_lp_norm(0.7, p, 3).unwrap();
        assert!((three - one.powi(3)).abs() <= 1e-12 * three);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constant_dominator_integral(c in 0.1f64..5.0, t1 in 0.0f64..2.0, w in 1e-3f64..2.0) {
        let k = spec("bounded-lipschitz", 1, &[("c", c)]);
        let got = lemma1_integral(&k, t1, t1 + w, &[0.4]).unwrap().integral_value;
        let want = c * c * w;
        prop_assert!((got - want).abs() <= 1e-4 * want, "{got} vs {want}");
    }

}

proptest! {
    // shifted integrals in d >= 2 carry an angular quadrature per node and
    // cost about two seconds each
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn linear_dominator_integral(d in 1usize..4, s in 0.0f64..3.0, t1 in 0.0f64..1.0, w in 1e-3f64..2.0) {
        // h(z) = |z| gives E|s + Z_u|^2 = |s|^2 + d u, integrated over u in (0, w)
        let k = spec("linear-ou", d, &[]);
        let mut shift = vec![0.0; d];
        shift[0] = s;
        let got = lemma1_integral(&k, t1, t1 + w, &shift).unwrap().integral_value;
        let want = s * s * w + d as f64 * w * w / 2.0;
        prop_assert!((got - want).abs() <= 2e-4 * want, "{got} vs {want}");
    }
}

/// `E|Z|^-2a = 2^-a Gamma(1/2 - a) / Gamma(1/2)` for a standard normal `Z`.
fn inverse_moment(a: f64) -> f64 {
    2f64.powf(-a) * libm::tgamma(0.5 - a) / libm::tgamma(0.5)
}

#[test]
fn riesz_window_matches_closed_form() {
    // for windows with 12 sd << 1 the truncation at |z| = 1 is invisible and
    // I(0, w; 0) = E|Z|^-2a w^(1-a) / (1-a)
    for &alpha in &[0.1, 0.25, 0.4] {
        let k = spec("riesz-truncated", 1, &[("alpha", alpha)]);
        let m = inverse_moment(alpha);
        for &w in &[1e-4, 1e-3, 4e-3] {
            let got = lemma1_integral(&k, 0.0, w, &[0.0]).unwrap().integral_value;
            let want = m * w.powf(1.0 - alpha) / (1.0 - alpha);
            assert!((got - want).abs() <= 2e-4 * want, "alpha={alpha} w={w}: {got} vs {want}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn integral_grows_with_window(alpha in 0.05f64..0.35, s in 0.0f64..1.0, w in 1e-3f64..0.5, extra in 1e-3f64..0.5) {
        let k = spec("riesz-truncated", 1, &[("alpha", alpha)]);
        let short = lemma1_integral(&k, 0.0, w, &[s]).unwrap().integral_value;
        let long = lemma1_integral(&k, 0.0, w + extra, &[s]).unwrap().integral_value;
        prop_assert!(long >= short * (1.0 - 1e-4), "{short} then {long}");
    }
}
