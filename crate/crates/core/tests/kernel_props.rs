use chaoslab_core::kernels::classify;
use chaoslab_core::{ExponentPair, KernelParams, KernelSpec};
use proptest::prelude::*;

fn spec(name: &str, d: usize, pairs: &[(&str, f64)]) -> KernelSpec {
    let mut p: KernelParams = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    p.insert("d".into(), d as f64);
    KernelSpec::builtin(name, &p).unwrap()
}

fn catalogue(d: usize, alpha: f64) -> Vec<KernelSpec> {
    vec![
        spec("zero", d, &[]),
        spec("linear-ou", d, &[]),
        spec("bounded-lipschitz", d, &[("c", -2.0), ("omega", 1.5)]),
        spec("riesz", d, &[("alpha", alpha)]),
        spec("riesz-truncated", d, &[("alpha", alpha), ("s", -1.0)]),
        spec("paper-h2-example", d, &[("alpha", 1.0 + alpha / 2.0), ("kappa", 0.7)]),
    ]
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, d)
}

fn diff(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

proptest! {
    #[test]
    fn drift_is_dominated(d in 1usize..4, alpha in 0.05f64..1.9, t in 0.0f64..3.0,
                          x in point(3), y in point(3)) {
        let (x, y) = (&x[..d], &y[..d]);
        let z = diff(x, y);
        prop_assume!(z.iter().map(|v| v * v).sum::<f64>() > 1e-12);
        for k in catalogue(d, alpha) {
            let mut b = vec![0.0; d];
            k.drift(t, x, y, &mut b);
            let size = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let h = k.dominator(t, &z);
            prop_assert!(size <= h * (1.0 + 1e-12) + 1e-15, "{}: |b| = {size} > h = {h}", k.name());
        }
    }

    #[test]
    fn antisymmetric_kernels_flip_sign(d in 1usize..4, alpha in 0.05f64..1.9,
                                       x in point(3), y in point(3)) {
        let (x, y) = (&x[..d], &y[..d]);
        prop_assume!(diff(x, y).iter().any(|v| v.abs() > 1e-9));
        for k in catalogue(d, alpha).into_iter().filter(|k| k.is_antisymmetric()) {
            let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
            k.drift(0.5, x, y, &mut a);
            k.drift(0.5, y, x, &mut b);
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u + v).abs() <= 1e-12 * (1.0 + u.abs()), "{}", k.name());
            }
        }
    }

    #[test]
    fn exponent_test_is_monotone(d in 1usize..4, p in 2.0f64..40.0, q in 2.0f64..40.0,
                                 dp in 0.0f64..10.0, dq in 0.0f64..10.0) {
        let small = ExponentPair::new(p, q, d).unwrap();
        let large = ExponentPair::new(p + dp, q + dq, d).unwrap();
        prop_assert!(large.sum() <= small.sum() + 1e-15);
        if small.passes() {
            prop_assert!(large.passes());
        }
    }

    #[test]
    fn dominators_are_radial(d in 2usize..4, alpha in 0.05f64..1.9, z in point(3), angle in 0.0f64..std::f64::consts::TAU) {
        let z = &z[..d];
        let mut rotated = z.to_vec();
        let (c, s) = (angle.cos(), angle.sin());
        rotated[0] = c * z[0] - s * z[1];
        rotated[1] = s * z[0] + c * z[1];
        for k in catalogue(d, alpha) {
            let (a, b) = (k.dominator(1.0, z), k.dominator(1.0, &rotated));
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{}", k.name());
        }
    }
}

#[test]
fn riesz_below_threshold_is_h1() {
    // alpha = 0.25 in d = 1 leaves room for a valid (p, q)
    let c = classify(&spec("riesz", 1, &[("alpha", 0.25)]), 1.0).unwrap();
    assert!(c.exponent_test);
    assert!(c.local.finite && c.local.integral > 0.0);
}

#[test]
fn classifier_rejects_nothing_in_catalogue() {
    for d in 1..=3 {
        for k in catalogue(d, 0.3) {
            classify(&k, 1.0).unwrap_or_else(|err| panic!("{} d={d}: {err}", k.name()));
        }
    }
}
