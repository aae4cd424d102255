//! Gaussian heat-kernel oracles.
//!
//! `g_t(x) = (2 pi t)^{-d/2} exp(-|x|^2 / 2t)` has the closed-form norm
//! `||g_t||_p = C_p t^{-(d/2)(1 - 1/p)}`. The convolution integral
//!
//! ```text
//! I(t1, t2; s) = int_{t1}^{t2} int h_t(y + s)^2 g_{t - t1}(y) dy dt
//! ```
//!
//! bounds the conditional drift energy of a Brownian particle against a
//! frozen partner at offset `s` over the window `[t1, t2]`; it is evaluated by
//! graded Gauss–Legendre quadrature and swept over windows to estimate its
//! power law in the window width.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{ExponentPair, KernelSpec};
use crate::math::{abs, exp, floor, norm, pow, sphere_area, sqrt, PI};
use crate::par;
use crate::quadrature::GaussLegendre;
use crate::stats;

/// `C_p = (2 pi)^{-(d/2)(1 - 1/p)} p^{-d/(2p)}`.
pub fn lp_constant(p: f64, d: usize) -> Result<f64> {
    if !(p >= 1.0) || d == 0 {
        return Err(Error::domain("need p >= 1 and d >= 1"));
    }
    let d = d as f64;
    Ok(pow(2.0 * PI, -(d / 2.0) * (1.0 - 1.0 / p)) * pow(p, -d / (2.0 * p)))
}

/// `||g_t||_{L^p(R^d)}`.
pub fn heat_kernel_lp_norm(t: f64, p: f64, d: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain("heat kernel norm needs t > 0"));
    }
    let c = lp_constant(p, d)?;
    Ok(c / pow(t, (d as f64 / 2.0) * (1.0 - 1.0 / p)))
}

/// One evaluated window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowIntegral {
    pub t1: f64,
    pub t2: f64,
    pub shift: Vec<f64>,
    pub integral: f64,
}

impl WindowIntegral {
    pub fn width(&self) -> f64 {
        self.t2 - self.t1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBoundReport {
    /// Window of the reported integral (the widest window for a sweep).
    pub t1: f64,
    pub t2: f64,
    pub integral_value: f64,
    /// `(q-2)/q - d/p`.
    pub exponent: f64,
    /// Log-log slope of the worst-shift integral against the window width.
    pub fitted_slope: Option<f64>,
    /// `max I / (t2 - t1)^exponent` over the evaluated windows.
    pub c0_estimate: f64,
    pub windows: Vec<WindowIntegral>,
}

impl GaussianBoundReport {
    /// `c0_estimate * width^exponent`.
    pub fn bound(&self, width: f64) -> f64 {
        self.c0_estimate * pow(width, self.exponent)
    }
}

const REL_TOL: f64 = 1e-4;
const MAX_LEVEL: usize = 6;
/// Gaussian support in standard deviations.
const SPREAD: f64 = 12.0;

struct Level {
    gl: GaussLegendre,
    time_depth: usize,
    space_depth: usize,
    piece: f64,
}

impl Level {
    fn new(l: usize) -> Self {
        Self {
            gl: GaussLegendre::new(6 + 4 * l),
            time_depth: 30 + 10 * l,
            space_depth: 30 + 10 * l,
            piece: 1.0 / (2.0 + l as f64),
        }
    }
}

/// Integrates `f` over `[a, b]` split into pieces no longer than `max_len`.
fn composite<F: FnMut(f64) -> f64>(gl: &GaussLegendre, a: f64, b: f64, max_len: f64, f: &mut F) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let n = ((b - a) / max_len).max(1.0);
    let n = floor(n) as usize + 1;
    let h = (b - a) / n as f64;
    (0..n)
        .map(|k| {
            let lo = a + k as f64 * h;
            gl.integrate(lo, lo + h, &mut *f)
        })
        .sum()
}

/// Integrates over `[a, b]` with geometric grading towards the endpoint `a`.
///
/// Near an integrable power singularity `|x - a|^-k` the dyadic pieces shrink
/// by the constant ratio `2^(k-1)`, so the innermost remainder is summed as a
/// geometric tail instead of being handed to a single Gauss rule (which would
/// miss most of the mass when `k` is close to 1).
fn graded_from<F: FnMut(f64) -> f64>(gl: &GaussLegendre, a: f64, b: f64, depth: usize, f: &mut F) -> f64 {
    let len = b - a;
    let mut total = 0.0;
    let mut hi = len;
    let (mut prev, mut last) = (0.0, 0.0);
    for _ in 0..depth {
        let lo = 0.5 * hi;
        prev = last;
        last = gl.integrate(a + lo, a + hi, &mut *f);
        total += last;
        hi = lo;
    }
    if depth >= 2 && prev > 0.0 && last > 0.0 {
        let ratio = last / prev;
        if ratio > 0.0 && ratio < 0.99 {
            return total + last * ratio / (1.0 - ratio);
        }
    }
    total + gl.integrate(a, a + hi, &mut *f)
}

/// Integrates over `[a, b]` with geometric grading towards `b`.
fn graded_to<F: FnMut(f64) -> f64>(gl: &GaussLegendre, a: f64, b: f64, depth: usize, f: &mut F) -> f64 {
    graded_from(gl, 0.0, b - a, depth, &mut |u| f(b - u))
}

/// `int h_t(z)^2 g_u(z - s) dz` for `d = 1`, integrating along the line with
/// grading around the singular point `z = 0`.
fn space_integral_1d(spec: &KernelSpec, lv: &Level, t: f64, u: f64, s: f64) -> f64 {
    let su = sqrt(u);
    let g = |z: f64| {
        let y = z - s;
        exp(-y * y / (2.0 * u)) / sqrt(2.0 * PI * u)
    };
    let mut f = |z: f64| {
        let gz = g(z);
        if gz == 0.0 {
            return 0.0;
        }
        let h = spec.dominator(t, &[z]);
        if h == 0.0 {
            0.0
        } else {
            h * h * gz
        }
    };
    let lo = s - SPREAD * su;
    let hi = s + SPREAD * su;
    let mut cuts = alloc::vec![lo, hi, s, s - su, s + su, s - 3.0 * su, s + 3.0 * su];
    for b in spec.profile_breakpoints() {
        cuts.push(b);
        cuts.push(-b);
    }
    let singular_inside = lo < 0.0 && hi > 0.0;
    if singular_inside {
        cuts.push(0.0);
    }
    cuts.retain(|c| *c >= lo && *c <= hi);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let max_len = lv.piece * su;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        total += if singular_inside && a == 0.0 {
            graded_from(&lv.gl, a, b, lv.space_depth, &mut f)
        } else if singular_inside && b == 0.0 {
            graded_to(&lv.gl, a, b, lv.space_depth, &mut f)
        } else {
            composite(&lv.gl, a, b, max_len, &mut f)
        };
    }
    total
}

/// Spherical average factor `int_{S^{d-1}} exp(-r a (1 - cos psi) / u) dsigma`
/// for `d >= 2`, graded towards `psi = 0` where it concentrates.
fn angular_factor(lv: &Level, d: usize, kappa: f64) -> f64 {
    let lower_area = sphere_area(d - 1);
    let weight = |psi: f64| {
        let w = pow(crate::math::sin(psi), (d - 2) as f64);
        w * exp(-kappa * (1.0 - crate::math::cos(psi)))
    };
    let mut f = weight;
    let integral = if kappa < 1.0 {
        composite(&lv.gl, 0.0, PI, PI / 4.0, &mut f)
    } else {
        let scale = 1.0 / sqrt(kappa);
        let mut total = 0.0;
        let mut hi = PI;
        while hi > scale * 1e-3 {
            let lo = 0.5 * hi;
            total += lv.gl.integrate(lo, hi, &mut f);
            hi = lo;
        }
        total + lv.gl.integrate(0.0, hi, &mut f)
    };
    lower_area * integral
}

/// `int h_t(z)^2 g_u(z - s) dz` in radial coordinates about the origin.
fn space_integral_radial(spec: &KernelSpec, lv: &Level, t: f64, u: f64, a: f64) -> f64 {
    let d = spec.dim();
    let su = sqrt(u);
    let norm_c = pow(2.0 * PI * u, -(d as f64) / 2.0);
    let full_area = sphere_area(d);
    let mut f = |r: f64| {
        let h = spec.radial_profile(t, r).unwrap_or(f64::NAN);
        if h == 0.0 {
            return 0.0;
        }
        let radial_gauss = norm_c * exp(-(r - a) * (r - a) / (2.0 * u));
        if radial_gauss == 0.0 {
            return 0.0;
        }
        let ang = if a == 0.0 {
            full_area
        } else {
            angular_factor(lv, d, r * a / u)
        };
        h * h * pow(r, (d - 1) as f64) * radial_gauss * ang
    };
    let lo = (a - SPREAD * su).max(0.0);
    let hi = a + SPREAD * su;
    let mut cuts = alloc::vec![lo, hi, a, a - su, a + su, a - 3.0 * su, a + 3.0 * su];
    cuts.extend(spec.profile_breakpoints());
    cuts.retain(|c| *c >= lo && *c <= hi);
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    let max_len = lv.piece * su;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += if w[0] == 0.0 {
            graded_from(&lv.gl, w[0], w[1], lv.space_depth, &mut f)
        } else {
            composite(&lv.gl, w[0], w[1], max_len, &mut f)
        };
    }
    total
}

fn window_integral_at_level(
    spec: &KernelSpec,
    lv: &Level,
    t1: f64,
    width: f64,
    shift: &[f64],
) -> f64 {
    let d = spec.dim();
    let a = norm(shift);
    let mut inner = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let t = t1 + u;
        if d == 1 {
            space_integral_1d(spec, lv, t, u, shift[0])
        } else {
            space_integral_radial(spec, lv, t, u, a)
        }
    };
    graded_from(&lv.gl, 0.0, width, lv.time_depth, &mut inner)
}

fn window_integral(spec: &KernelSpec, t1: f64, t2: f64, shift: &[f64]) -> Result<f64> {
    if spec.is_zero() {
        return Ok(0.0);
    }
    let width = t2 - t1;
    let mut prev = window_integral_at_level(spec, &Level::new(0), t1, width, shift);
    for l in 1..=MAX_LEVEL {
        let cur = window_integral_at_level(spec, &Level::new(l), t1, width, shift);
        let agree = (cur == 0.0 && prev == 0.0) || abs(cur - prev) <= REL_TOL * abs(cur);
        if agree && cur.is_finite() {
            return Ok(cur);
        }
        prev = cur;
    }
    let last = window_integral_at_level(spec, &Level::new(MAX_LEVEL + 1), t1, width, shift);
    Err(Error::NumericalFailure { previous: prev, last })
}

fn check_window(spec: &KernelSpec, t1: f64, t2: f64, shift: &[f64]) -> Result<()> {
    if !(t1 >= 0.0) || !(t2 > t1) || !t2.is_finite() {
        return Err(Error::domain("window needs 0 <= t1 < t2 < inf"));
    }
    if shift.len() != spec.dim() {
        return Err(Error::usage("shift dimension does not match the kernel"));
    }
    if spec.dim() > 1 && spec.radial_profile(t1, 1.0).is_none() {
        return Err(Error::usage(
            "the convolution integral in d > 1 needs a radially symmetric dominator",
        ));
    }
    Ok(())
}

/// Evaluates `I(t1, t2; shift)` to relative accuracy `1e-4`.
pub fn lemma1_integral(spec: &KernelSpec, t1: f64, t2: f64, shift: &[f64]) -> Result<GaussianBoundReport> {
    check_window(spec, t1, t2, shift)?;
    let integral = window_integral(spec, t1, t2, shift)?;
    let exponent = spec.exponents().window_exponent();
    Ok(GaussianBoundReport {
        t1,
        t2,
        integral_value: integral,
        exponent,
        fitted_slope: None,
        c0_estimate: integral / pow(t2 - t1, exponent),
        windows: alloc::vec![WindowIntegral {
            t1,
            t2,
            shift: shift.to_vec(),
            integral,
        }],
    })
}

/// Evaluates every `(window, shift)` pair, keeps the worst shift per window
/// and fits `ln I` against `ln (t2 - t1)`.
pub fn lemma1_sweep(
    spec: &KernelSpec,
    windows: &[(f64, f64)],
    shifts: &[Vec<f64>],
) -> Result<GaussianBoundReport> {
    if windows.len() < 4 {
        return Err(Error::usage("the sweep needs at least 4 windows"));
    }
    if shifts.is_empty() {
        return Err(Error::usage("the sweep needs at least one shift"));
    }
    let first = windows[0].1 - windows[0].0;
    if windows.iter().all(|(a, b)| abs((b - a) - first) <= 1e-12 * first.abs()) {
        return Err(Error::usage("all windows have the same width; the slope fit is degenerate"));
    }
    for &(t1, t2) in windows {
        for s in shifts {
            check_window(spec, t1, t2, s)?;
        }
    }
    let cells = windows.len() * shifts.len();
    let results = par::map_range(cells, |k| {
        let (t1, t2) = windows[k / shifts.len()];
        let s = &shifts[k % shifts.len()];
        window_integral(spec, t1, t2, s).map(|integral| WindowIntegral {
            t1,
            t2,
            shift: s.clone(),
            integral,
        })
    });
    let all: Vec<WindowIntegral> = results.into_iter().collect::<Result<_>>()?;
    let exponent = spec.exponents().window_exponent();

    let mut widths = Vec::with_capacity(windows.len());
    let mut worst = Vec::with_capacity(windows.len());
    for chunk in all.chunks(shifts.len()) {
        widths.push(chunk[0].width());
        worst.push(chunk.iter().map(|w| w.integral).fold(0.0, f64::max));
    }
    let fitted_slope = stats::log_log_slope(&widths, &worst);
    let c0_estimate = widths
        .iter()
        .zip(&worst)
        .map(|(w, i)| i / pow(*w, exponent))
        .fold(0.0, f64::max);
    let (widest, _) = widths
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    Ok(GaussianBoundReport {
        t1: windows[widest].0,
        t2: windows[widest].1,
        integral_value: worst[widest],
        exponent,
        fitted_slope,
        c0_estimate,
        windows: all,
    })
}

/// Window lengths used when chaining conditional exponential bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditioningWindows {
    /// `(c0 kappa)^{-1/e}`.
    pub lemma3_window: f64,
    /// `min(1 / (2 c0^2 T alpha^2), T)`.
    pub est1_delta: f64,
    /// `floor(T / est1_delta)`.
    pub n_windows: u64,
}

pub fn conditioning_windows(
    c0: f64,
    kappa: f64,
    horizon: f64,
    exponents: ExponentPair,
    alpha: f64,
) -> Result<ConditioningWindows> {
    let e = exponents.window_exponent();
    if !(e > 0.0) {
        return Err(Error::InadmissibleExponent(e));
    }
    if !(c0 > 0.0) || !(kappa > 0.0) || !(horizon > 0.0) || !(alpha > 0.0) {
        return Err(Error::domain("c0, kappa, T and alpha must be positive"));
    }
    let lemma3_window = pow(c0 * kappa, -1.0 / e);
    let est1_delta = (1.0 / (2.0 * c0 * c0 * horizon * alpha * alpha)).min(horizon);
    let n_windows = floor(horizon / est1_delta) as u64;
    Ok(ConditioningWindows {
        lemma3_window,
        est1_delta,
        n_windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelParams;

    fn kernel(name: &str, pairs: &[(&str, f64)]) -> KernelSpec {
        let p: KernelParams = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        KernelSpec::builtin(name, &p).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert!((heat_kernel_lp_norm(1.0, 1.0, 3).unwrap() - 1.0).abs() < 1e-15);
        // (4 pi)^{-1/4}
        let v = heat_kernel_lp_norm(1.0, 2.0, 1).unwrap();
        assert!((v - 0.531_125_966_013_598_4).abs() < 1e-12);
        let v4 = heat_kernel_lp_norm(4.0, 2.0, 1).unwrap();
        assert!((v4 - v / 4f64.powf(0.25)).abs() < 1e-15);
        assert!(heat_kernel_lp_norm(0.0, 2.0, 1).is_err());
        assert!(heat_kernel_lp_norm(1.0, 0.5, 1).is_err());
    }

    #[test]
    fn zero_and_constant_dominators() {
        let z = kernel("zero", &[]);
        assert_eq!(lemma1_integral(&z, 0.2, 0.7, &[0.3]).unwrap().integral_value, 0.0);
        for d in 1..=2 {
            let b = kernel("bounded-lipschitz", &[("c", 1.5), ("d", d as f64)]);
            let shift = alloc::vec![0.4; d];
            let r = lemma1_integral(&b, 0.1, 0.35, &shift).unwrap();
            assert!((r.integral_value - 1.5 * 1.5 * 0.25).abs() < 1e-9, "{d}: {}", r.integral_value);
        }
    }

    #[test]
    fn window_examples() {
        let e = ExponentPair::new(8.0, 8.0, 1).unwrap();
        let w = conditioning_windows(1.0, 1.0, 1.0, e, 1.0).unwrap();
        assert_eq!(w.lemma3_window, 1.0);
        assert_eq!(w.est1_delta, 0.5);
        assert_eq!(w.n_windows, 2);
        let w = conditioning_windows(2.0, 2.0, 1.0, e, 1.0).unwrap();
        // 4^{-1.6} = 2^{-3.2}
        assert!((w.lemma3_window - 2f64.powf(-3.2)).abs() < 1e-15);
        assert!((w.lemma3_window - 0.108_818_820_412_141_8).abs() < 1e-12);
        let bad = ExponentPair::new(4.0, 8.0, 3).unwrap();
        assert!(matches!(
            conditioning_windows(1.0, 1.0, 1.0, bad, 1.0),
            Err(Error::InadmissibleExponent(_))
        ));
    }

    #[test]
    fn sweep_rejects_degenerate_input() {
        let b = kernel("bounded-lipschitz", &[]);
        let same = [(0.0, 0.1); 4];
        assert!(matches!(lemma1_sweep(&b, &same, &[alloc::vec![0.0]]), Err(Error::Usage(_))));
        assert!(matches!(
            lemma1_sweep(&b, &same[..3], &[alloc::vec![0.0]]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn bounded_sweep_is_linear() {
        let b = kernel("bounded-lipschitz", &[("c", 2.0)]);
        let windows: Vec<(f64, f64)> = (1..=5).map(|k| (0.0, 0.5f64.powi(k))).collect();
        let r = lemma1_sweep(&b, &windows, &[alloc::vec![0.0], alloc::vec![0.7]]).unwrap();
        assert!((r.fitted_slope.unwrap() - 1.0).abs() < 1e-6);
    }

    /// Reference values from an independent double-quadrature of the same
    /// integral (scipy `dblquad`, truncated Riesz kernel, `d = 1`, `alpha = 1/4`,
    /// zero shift, windows `(0, 2^-k)`).
    #[test]
    fn truncated_riesz_matches_reference_quadrature() {
        let k = kernel("riesz-truncated", &[("alpha", 0.25), ("d", 1.0)]);
        let reference = [0.1013567, 0.1704609, 0.2866796, 0.4820446, 0.8081580, 1.3380704];
        let windows: Vec<(f64, f64)> = (1..=6).rev().map(|j| (0.0, 0.5f64.powi(j))).collect();
        for (w, want) in windows.iter().zip(reference) {
            let got = lemma1_integral(&k, w.0, w.1, &[0.0]).unwrap().integral_value;
            assert!((got - want).abs() <= 2e-4 * want, "{w:?}: {got} vs {want}");
        }
        let r = lemma1_sweep(&k, &windows, &[alloc::vec![0.0]]).unwrap();
        let slope = r.fitted_slope.unwrap();
        assert!((slope - 0.745_672).abs() < 2e-3, "{slope}");
    }
}
