//! Interaction kernels `b(t, x, y)`, their dominating functions `h_t` and
//! singular sets, and the admissibility classifier.
//!
//! Built-in catalogue (names are part of the configuration grammar):
//!
//! | name                | drift `b(t,x,y)`                        | dominator `h_t(z)`     |
//! |---------------------|-----------------------------------------|------------------------|
//! | `zero`              | `0`                                     | `0`                    |
//! | `linear-ou`         | `-(x - y)`                              | `|z|`                  |
//! | `bounded-lipschitz` | `c cos(omega (x_1 - y_1)) e_1`          | `|c|`                  |
//! | `riesz`             | `s (x - y) / |x - y|^(alpha + 1)`       | `|z|^-alpha`           |
//! | `riesz-truncated`   | as `riesz` on `|x - y| <= 1`, else `0`  | `|z|^-alpha 1{|z|<=1}` |
//! | `paper-h2-example`  | `-kappa (x - y) / |x - y|^alpha`        | `kappa |z|^(1-alpha)`  |
//!
//! Every kernel takes `d` (dimension, default 1) and the integrability
//! exponents `p`, `q`.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::math::{abs, cos, norm, pow, round, sphere_area};
use crate::quadrature::GaussLegendre;

/// Named real parameters of a built-in kernel.
pub type KernelParams = BTreeMap<String, f64>;

/// Integrability exponents `(p, q)` of the dominating function and the space
/// dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentPair {
    pub p: f64,
    pub q: f64,
    pub d: usize,
}

impl ExponentPair {
    pub fn new(p: f64, q: f64, d: usize) -> Result<Self> {
        let e = Self { p, q, d };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 2.0) || !self.p.is_finite() {
            return Err(Error::constraint(format!("p must lie in (2, inf), got {}", self.p)));
        }
        if !(self.q > 2.0) || !self.q.is_finite() {
            return Err(Error::constraint(format!("q must lie in (2, inf), got {}", self.q)));
        }
        if self.d == 0 {
            return Err(Error::constraint("d must be at least 1"));
        }
        Ok(())
    }

    /// `d/p + 2/q`.
    pub fn sum(&self) -> f64 {
        self.d as f64 / self.p + 2.0 / self.q
    }

    /// `(q-2)/q - d/p`, the power of the window width in the convolution bound.
    pub fn window_exponent(&self) -> f64 {
        (self.q - 2.0) / self.q - self.d as f64 / self.p
    }

    /// Strict test `d/p + 2/q < 1`. Exact in integer arithmetic when `p` and
    /// `q` are ratios of integers with denominators up to 1000, otherwise a
    /// floating comparison with a `1e-12` margin.
    pub fn passes(&self) -> bool {
        match (small_ratio(self.p), small_ratio(self.q)) {
            (Some((a, b)), Some((c, e))) => {
                // p = a/b, q = c/e:  d b / a + 2 e / c < 1  <=>  d b c + 2 e a < a c
                let d = self.d as i128;
                d * b * c + 2 * e * a < a * c
            }
            _ => self.sum() < 1.0 - 1e-12,
        }
    }
}

fn small_ratio(x: f64) -> Option<(i128, i128)> {
    if !x.is_finite() || x <= 0.0 || x > 1e12 {
        return None;
    }
    (1..=1000i128).find_map(|den| {
        let num = round(x * den as f64);
        let back = num / den as f64;
        (abs(back - x) <= 1e-12 * x.max(1.0)).then_some((num as i128, den))
    })
}

/// User-supplied kernel. Built-ins do not go through this trait.
pub trait InteractionKernel: Send + Sync {
    /// Writes `b(t, x, y)` into `out`.
    fn drift(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]);

    /// `h_t(z)`, with `|b(t, x, y)| <= h_t(x - y)` off the singular set.
    fn dominator(&self, t: f64, z: &[f64]) -> f64;

    fn singular_at(&self, _t: f64, _x: &[f64], _y: &[f64]) -> bool {
        false
    }

    /// `H(T) = int_0^T sup_{|x|>1} h_t(x)^2 dt`, when known.
    fn h2_tail(&self, _horizon: f64) -> Option<f64> {
        None
    }

    /// `h_t` as a function of `|z|`, for radially symmetric dominators.
    fn radial_profile(&self, _t: f64, _r: f64) -> Option<f64> {
        None
    }

    /// True when `b(t, x, y)` depends on `x - y` only.
    fn is_convolution(&self) -> bool {
        false
    }
}

/// Concrete kernel family.
#[derive(Clone)]
pub enum KernelKind {
    Zero,
    LinearOu,
    BoundedLipschitz { c: f64, omega: f64 },
    Riesz { alpha: f64, sign: f64, truncated: bool },
    LocalizedSingular { alpha: f64, kappa: f64 },
    Custom { kernel: Arc<dyn InteractionKernel>, h2_claimed: bool },
}

impl fmt::Debug for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::Zero => write!(f, "Zero"),
            KernelKind::LinearOu => write!(f, "LinearOu"),
            KernelKind::BoundedLipschitz { c, omega } => {
                write!(f, "BoundedLipschitz {{ c: {c}, omega: {omega} }}")
            }
            KernelKind::Riesz { alpha, sign, truncated } => write!(
                f,
                "Riesz {{ alpha: {alpha}, sign: {sign}, truncated: {truncated} }}"
            ),
            KernelKind::LocalizedSingular { alpha, kappa } => {
                write!(f, "LocalizedSingular {{ alpha: {alpha}, kappa: {kappa} }}")
            }
            KernelKind::Custom { h2_claimed, .. } => {
                write!(f, "Custom {{ h2_claimed: {h2_claimed} }}")
            }
        }
    }
}

/// A fully specified interaction kernel. Immutable and cheap to clone.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    name: String,
    kind: KernelKind,
    exponents: ExponentPair,
    params: KernelParams,
}

/// Names accepted by [`KernelSpec::builtin`].
pub const BUILTIN_NAMES: [&str; 6] = [
    "zero",
    "linear-ou",
    "bounded-lipschitz",
    "riesz",
    "riesz-truncated",
    "paper-h2-example",
];

struct ParamReader<'a> {
    kernel: &'a str,
    params: &'a KernelParams,
    allowed: &'a [&'a str],
}

impl ParamReader<'_> {
    fn check_keys(&self) -> Result<()> {
        for key in self.params.keys() {
            if !self.allowed.contains(&key.as_str()) {
                return Err(Error::UnknownParameter {
                    kernel: self.kernel.to_owned(),
                    param: key.clone(),
                });
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.get(key).ok_or_else(|| Error::MissingParameter {
            kernel: self.kernel.to_owned(),
            param: key.to_owned(),
        })
    }

    fn out_of_range(&self, key: &str, detail: &str) -> Error {
        Error::ParameterOutOfRange {
            kernel: self.kernel.to_owned(),
            param: key.to_owned(),
            detail: detail.to_owned(),
        }
    }
}

/// Default `p` for a dominator behaving like `|z|^-order` near the origin:
/// the midpoint of the admissible window `(max(2, d q/(q-2)), d/order)` when
/// it is non-empty, otherwise `4d`.
fn default_p(d: usize, q: f64, order: f64) -> f64 {
    let d = d as f64;
    let lo = (d * q / (q - 2.0)).max(2.0);
    if order <= 0.0 {
        return (4.0 * d).max(lo * 1.5);
    }
    let hi = d / order;
    if hi > lo {
        (0.5 * (lo + hi)).min(4.0 * d)
    } else {
        4.0 * d
    }
}

impl KernelSpec {
    /// Builds a catalogue kernel from its name and parameters.
    pub fn builtin(name: &str, params: &KernelParams) -> Result<Self> {
        let allowed: &[&str] = match name {
            "zero" | "linear-ou" => &["d", "p", "q"],
            "bounded-lipschitz" => &["d", "p", "q", "c", "omega"],
            "riesz" | "riesz-truncated" => &["d", "p", "q", "alpha", "s"],
            "paper-h2-example" => &["d", "p", "q", "alpha", "kappa"],
            other => return Err(Error::UnknownKernel(other.to_owned())),
        };
        let r = ParamReader {
            kernel: name,
            params,
            allowed,
        };
        r.check_keys()?;

        let d_raw = r.get("d").unwrap_or(1.0);
        if !(d_raw >= 1.0) || d_raw != round(d_raw) || d_raw > 64.0 {
            return Err(r.out_of_range("d", "must be an integer in [1, 64]"));
        }
        let d = d_raw as usize;
        let q = r.get("q").unwrap_or(8.0);

        let (kind, order) = match name {
            "zero" => (KernelKind::Zero, 0.0),
            "linear-ou" => (KernelKind::LinearOu, 0.0),
            "bounded-lipschitz" => {
                let c = r.get("c").unwrap_or(1.0);
                let omega = r.get("omega").unwrap_or(0.0);
                if !c.is_finite() {
                    return Err(r.out_of_range("c", "must be finite"));
                }
                if !(omega >= 0.0) || !omega.is_finite() {
                    return Err(r.out_of_range("omega", "must be finite and >= 0"));
                }
                (KernelKind::BoundedLipschitz { c, omega }, 0.0)
            }
            "riesz" | "riesz-truncated" => {
                let alpha = r.required("alpha")?;
                if !(0.0..2.0).contains(&alpha) {
                    return Err(r.out_of_range("alpha", "must lie in [0, 2)"));
                }
                let sign = r.get("s").unwrap_or(1.0);
                if sign != 1.0 && sign != -1.0 {
                    return Err(r.out_of_range("s", "must be +1 or -1"));
                }
                let truncated = name == "riesz-truncated";
                (KernelKind::Riesz { alpha, sign, truncated }, alpha)
            }
            "paper-h2-example" => {
                let alpha = r.required("alpha")?;
                if !(1.0..2.0).contains(&alpha) {
                    return Err(r.out_of_range("alpha", "must lie in [1, 2)"));
                }
                let kappa = r.get("kappa").unwrap_or(1.0);
                if !(kappa > 0.0) || !kappa.is_finite() {
                    return Err(r.out_of_range("kappa", "must be positive"));
                }
                (KernelKind::LocalizedSingular { alpha, kappa }, alpha - 1.0)
            }
            _ => unreachable!(),
        };
        if !(q > 2.0) || !q.is_finite() {
            return Err(r.out_of_range("q", "must lie in (2, inf)"));
        }
        let p = r.get("p").unwrap_or_else(|| default_p(d, q, order));
        if !(p > 2.0) || !p.is_finite() {
            return Err(r.out_of_range("p", "must lie in (2, inf)"));
        }
        Ok(Self {
            name: name.to_owned(),
            kind,
            exponents: ExponentPair { p, q, d },
            params: params.clone(),
        })
    }

    /// Wraps a user kernel. `h2_claimed` declares that the kernel relies on
    /// the localized condition, which requires [`InteractionKernel::h2_tail`].
    pub fn custom(
        name: &str,
        exponents: ExponentPair,
        kernel: Arc<dyn InteractionKernel>,
        h2_claimed: bool,
    ) -> Self {
        Self {
            name: name.to_owned(),
            kind: KernelKind::Custom { kernel, h2_claimed },
            exponents,
            params: KernelParams::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn exponents(&self) -> ExponentPair {
        self.exponents
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.exponents.d
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, KernelKind::Custom { .. })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, KernelKind::Zero)
    }

    /// Writes `b(t, x, y)` into `out`, unmasked.
    pub fn drift(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        match &self.kind {
            KernelKind::Zero => out.fill(0.0),
            KernelKind::LinearOu => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o = b - a;
                }
            }
            KernelKind::BoundedLipschitz { c, omega } => {
                out.fill(0.0);
                out[0] = c * cos(omega * (x[0] - y[0]));
            }
            KernelKind::Riesz { alpha, sign, truncated } => {
                riesz_into(*alpha, *sign, *truncated, x, y, out);
            }
            KernelKind::LocalizedSingular { alpha, kappa } => {
                localized_into(*alpha, *kappa, x, y, out)
            }
            KernelKind::Custom { kernel, .. } => kernel.drift(t, x, y, out),
        }
    }

    pub fn dominator(&self, t: f64, z: &[f64]) -> f64 {
        match &self.kind {
            KernelKind::Custom { kernel, .. } => kernel.dominator(t, z),
            _ => self
                .radial_profile(t, norm(z))
                .expect("built-in dominators are radial"),
        }
    }

    /// The dominator as a function of `r = |z|`, when radially symmetric.
    pub fn radial_profile(&self, t: f64, r: f64) -> Option<f64> {
        Some(match &self.kind {
            KernelKind::Zero => 0.0,
            KernelKind::LinearOu => r,
            KernelKind::BoundedLipschitz { c, .. } => abs(*c),
            KernelKind::Riesz { alpha, truncated, .. } => {
                if *truncated && r > 1.0 {
                    0.0
                } else {
                    pow(r, -alpha)
                }
            }
            KernelKind::LocalizedSingular { alpha, kappa } => kappa * pow(r, 1.0 - alpha),
            KernelKind::Custom { kernel, .. } => return kernel.radial_profile(t, r),
        })
    }

    /// Radii other than 0 where the radial profile is not smooth.
    pub fn profile_breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            KernelKind::Riesz { truncated: true, .. } => alloc::vec![1.0],
            _ => Vec::new(),
        }
    }

    /// Closed-form realization of the singular set.
    pub fn singular_at(&self, t: f64, x: &[f64], y: &[f64]) -> bool {
        match &self.kind {
            KernelKind::Zero | KernelKind::LinearOu | KernelKind::BoundedLipschitz { .. } => false,
            KernelKind::Riesz { truncated, .. } => {
                x == y || (*truncated && crate::math::dist_sq(x, y) == 1.0)
            }
            KernelKind::LocalizedSingular { .. } => x == y,
            KernelKind::Custom { kernel, .. } => kernel.singular_at(t, x, y),
        }
    }

    /// `H(T) = int_0^T sup_{|x|>1} h_t(x)^2 dt`.
    pub fn h2_tail(&self, horizon: f64) -> Option<f64> {
        match &self.kind {
            KernelKind::Zero => Some(0.0),
            KernelKind::LinearOu => None,
            KernelKind::BoundedLipschitz { c, .. } => Some(c * c * horizon),
            KernelKind::Riesz { truncated, .. } => Some(if *truncated { 0.0 } else { horizon }),
            KernelKind::LocalizedSingular { kappa, .. } => Some(kappa * kappa * horizon),
            KernelKind::Custom { kernel, .. } => kernel.h2_tail(horizon),
        }
    }

    pub fn h2_claimed(&self) -> bool {
        match &self.kind {
            KernelKind::Custom { h2_claimed, .. } => *h2_claimed,
            _ => self.h2_tail(1.0).is_some(),
        }
    }

    pub fn is_convolution(&self) -> bool {
        match &self.kind {
            KernelKind::Custom { kernel, .. } => kernel.is_convolution(),
            _ => true,
        }
    }

    /// True when `b(t, x, y) = -b(t, y, x)` by construction.
    pub fn is_antisymmetric(&self) -> bool {
        matches!(
            self.kind,
            KernelKind::Zero
                | KernelKind::LinearOu
                | KernelKind::Riesz { .. }
                | KernelKind::LocalizedSingular { .. }
        )
    }

    /// Closed-form value of `int_{|z| > radius} h^p dz` for built-ins
    /// (`INFINITY` when divergent); `None` for user kernels.
    pub fn analytic_lp_tail(&self, p: f64, radius: f64) -> Option<f64> {
        let d = self.dim() as f64;
        let area = sphere_area(self.dim());
        // int_R^inf r^(d-1) r^(-s) dr for s > d
        let power_tail = |coef: f64, s: f64| {
            if s > d {
                coef * area * pow(radius, d - s) / (s - d)
            } else {
                f64::INFINITY
            }
        };
        Some(match &self.kind {
            KernelKind::Zero => 0.0,
            KernelKind::LinearOu => f64::INFINITY,
            KernelKind::BoundedLipschitz { c, .. } => {
                if *c == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            KernelKind::Riesz { alpha, truncated, .. } => {
                if *truncated && radius >= 1.0 {
                    0.0
                } else if *truncated {
                    area * (if alpha * p == d {
                        -crate::math::log(radius)
                    } else {
                        (1.0 - pow(radius, d - alpha * p)) / (d - alpha * p)
                    })
                } else {
                    power_tail(1.0, alpha * p)
                }
            }
            KernelKind::LocalizedSingular { alpha, kappa } => {
                power_tail(pow(*kappa, p), (alpha - 1.0) * p)
            }
            KernelKind::Custom { .. } => return None,
        })
    }

    /// Adds `(1/n_total)`-unscaled sums `sum_{j in range, j != skip} b(t, x, y_j)`
    /// into `acc`, dropping summands on the singular set or with non-finite
    /// components. `positions` is the flat `N x d` array.
    pub fn accumulate_pairs(
        &self,
        t: f64,
        x: &[f64],
        positions: &[f64],
        range: Range<usize>,
        skip: Option<usize>,
        acc: &mut [f64],
    ) {
        let d = x.len();
        match &self.kind {
            KernelKind::Zero => {}
            KernelKind::LinearOu => {
                for j in range {
                    if Some(j) == skip {
                        continue;
                    }
                    let y = &positions[j * d..(j + 1) * d];
                    for k in 0..d {
                        acc[k] += y[k] - x[k];
                    }
                }
            }
            KernelKind::BoundedLipschitz { c, omega } => {
                for j in range {
                    if Some(j) == skip {
                        continue;
                    }
                    acc[0] += c * cos(omega * (x[0] - positions[j * d]));
                }
            }
            KernelKind::Riesz { alpha, sign, truncated } => {
                let mut tmp = [0.0f64; 8];
                let mut heap;
                let buf: &mut [f64] = if d <= 8 {
                    &mut tmp[..d]
                } else {
                    heap = alloc::vec![0.0; d];
                    &mut heap
                };
                for j in range {
                    if Some(j) == skip {
                        continue;
                    }
                    let y = &positions[j * d..(j + 1) * d];
                    if x == y {
                        continue;
                    }
                    if riesz_into(*alpha, *sign, *truncated, x, y, buf) {
                        add_if_finite(acc, buf);
                    }
                }
            }
            _ => {
                let mut buf = alloc::vec![0.0; d];
                for j in range {
                    if Some(j) == skip {
                        continue;
                    }
                    let y = &positions[j * d..(j + 1) * d];
                    if self.singular_at(t, x, y) {
                        continue;
                    }
                    self.drift(t, x, y, &mut buf);
                    add_if_finite(acc, &buf);
                }
            }
        }
    }
}

#[inline]
fn add_if_finite(acc: &mut [f64], v: &[f64]) {
    if v.iter().all(|a| a.is_finite()) {
        for (a, b) in acc.iter_mut().zip(v) {
            *a += b;
        }
    }
}

/// Returns false when the pair lies on the singular set of the kernel.
#[inline]
fn riesz_into(alpha: f64, sign: f64, truncated: bool, x: &[f64], y: &[f64], out: &mut [f64]) -> bool {
    let mut r2 = 0.0;
    for k in 0..x.len() {
        let z = x[k] - y[k];
        out[k] = z;
        r2 += z * z;
    }
    if truncated && r2 > 1.0 {
        out.fill(0.0);
        return true;
    }
    let r = crate::math::sqrt(r2);
    // |b| = r^-alpha exactly up to rounding: z * (r^-alpha / r)
    let scale = sign * pow(r, -alpha) / r;
    for o in out.iter_mut() {
        *o *= scale;
    }
    !(truncated && r2 == 1.0)
}

#[inline]
fn localized_into(alpha: f64, kappa: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
    let mut r2 = 0.0;
    for k in 0..x.len() {
        let z = x[k] - y[k];
        out[k] = z;
        r2 += z * z;
    }
    let r = crate::math::sqrt(r2);
    let scale = -kappa * pow(r, 1.0 - alpha) / r;
    for o in out.iter_mut() {
        *o *= scale;
    }
}

/// Outcome of the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admissibility {
    /// Global `L^q_t L^p_x` condition.
    H1,
    /// Only the localized condition with a nondecreasing tail function.
    H2Only,
    Inadmissible,
}

impl Admissibility {
    pub fn label(&self) -> &'static str {
        match self {
            Admissibility::H1 => "H1",
            Admissibility::H2Only => "H2-only",
            Admissibility::Inadmissible => "inadmissible",
        }
    }
}

impl fmt::Display for Admissibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Numerical verdict on `int h^p` over a region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrability {
    /// Estimate of `int h^p`, `INFINITY` when judged divergent.
    pub integral: f64,
    pub finite: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub verdict: Admissibility,
    /// `d/p + 2/q`.
    pub exponent_sum: f64,
    pub exponent_test: bool,
    /// `int_{|z| <= radius} h^p`.
    pub local: Integrability,
    /// `int_{R^d} h^p`.
    pub global: Integrability,
    pub h2_tail_ok: bool,
    /// Set for user kernels without a radial profile: the verdict comes from
    /// cube quadrature without an analytic tail bound.
    pub best_effort: bool,
}

const PROBE_TIMES: [f64; 2] = [0.5, 1.0];
const H2_HORIZONS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
const INNER_SHELLS: usize = 200;
const OUTER_SHELLS: usize = 120;
/// A shell sequence is judged convergent when its last shell carries less than
/// this fraction of the accumulated total.
const SHELL_TOLERANCE: f64 = 1e-7;

/// Classifies a kernel against the global and localized integrability
/// conditions. `radius` is the ball used for the local probe.
pub fn classify(spec: &KernelSpec, radius: f64) -> Result<Classification> {
    let e = spec.exponents();
    e.validate()?;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::domain("locality radius must be positive"));
    }
    if spec.h2_claimed() && spec.h2_tail(1.0).is_none() {
        return Err(Error::MissingH2Tail(spec.name().to_string()));
    }
    let exponent_test = e.passes();
    let radial = spec.radial_profile(1.0, 1.0).is_some();
    let best_effort = !radial;

    let mut local = Integrability { integral: 0.0, finite: true };
    let mut global = Integrability { integral: 0.0, finite: true };
    for &t in &PROBE_TIMES {
        let (l, g) = if radial {
            radial_integrability(spec, t, e.p, radius)
        } else {
            cube_integrability(spec, t, e.p, radius)
        };
        local = worse(local, l);
        global = worse(global, g);
    }

    let h2_tail_ok = {
        let values: Option<Vec<f64>> = H2_HORIZONS.iter().map(|&h| spec.h2_tail(h)).collect();
        match values {
            Some(v) => {
                v.iter().all(|x| x.is_finite() && *x >= 0.0) && v.windows(2).all(|w| w[1] >= w[0])
            }
            None => false,
        }
    };

    let verdict = if !exponent_test || !local.finite {
        Admissibility::Inadmissible
    } else if global.finite {
        Admissibility::H1
    } else if h2_tail_ok {
        Admissibility::H2Only
    } else {
        Admissibility::Inadmissible
    };
    Ok(Classification {
        verdict,
        exponent_sum: e.sum(),
        exponent_test,
        local,
        global,
        h2_tail_ok,
        best_effort,
    })
}

fn worse(a: Integrability, b: Integrability) -> Integrability {
    Integrability {
        integral: a.integral.max(b.integral),
        finite: a.finite && b.finite,
    }
}

fn shell_verdict(increments: &[f64]) -> Integrability {
    let total: f64 = increments.iter().sum();
    let last = *increments.last().unwrap_or(&0.0);
    let finite = total.is_finite() && (total == 0.0 || last <= SHELL_TOLERANCE * total);
    Integrability {
        integral: if finite { total } else { f64::INFINITY },
        finite,
    }
}

/// `int_a^b |S^{d-1}| r^(d-1) phi(r)^p dr`, split at profile breakpoints.
fn radial_shell(spec: &KernelSpec, gl: &GaussLegendre, t: f64, p: f64, a: f64, b: f64) -> f64 {
    let d = spec.dim();
    let area = sphere_area(d);
    let mut cuts = alloc::vec![a];
    cuts.extend(spec.profile_breakpoints().into_iter().filter(|&r| r > a && r < b));
    cuts.push(b);
    let mut sum = 0.0;
    for w in cuts.windows(2) {
        sum += gl.integrate(w[0], w[1], |r| {
            let h = spec.radial_profile(t, r).unwrap_or(f64::NAN);
            if h == 0.0 {
                0.0
            } else {
                area * pow(r, (d - 1) as f64) * pow(h, p)
            }
        });
    }
    sum
}

fn radial_integrability(
    spec: &KernelSpec,
    t: f64,
    p: f64,
    radius: f64,
) -> (Integrability, Integrability) {
    let gl = GaussLegendre::new(24);
    let inner: Vec<f64> = (0..INNER_SHELLS)
        .map(|k| {
            let hi = radius * pow(0.5, k as f64);
            radial_shell(spec, &gl, t, p, 0.5 * hi, hi)
        })
        .collect();
    let local = shell_verdict(&inner);
    let outer: Vec<f64> = (0..OUTER_SHELLS)
        .map(|k| {
            let lo = radius * pow(2.0, k as f64);
            radial_shell(spec, &gl, t, p, lo, 2.0 * lo)
        })
        .collect();
    let outer_v = shell_verdict(&outer);
    let far = radius * pow(2.0, OUTER_SHELLS as f64);
    let analytic = spec.analytic_lp_tail(p, far);
    let global_finite =
        local.finite && outer_v.finite && analytic.is_none_or(|v| v.is_finite());
    let global = Integrability {
        integral: if global_finite {
            local.integral + outer_v.integral + analytic.unwrap_or(0.0)
        } else {
            f64::INFINITY
        },
        finite: global_finite,
    };
    (local, global)
}

/// Tensor Gauss–Legendre over `[-outer, outer]^d \ [-inner, inner]^d`.
fn cube_shell<F: Fn(&[f64]) -> f64>(f: &F, d: usize, inner: f64, outer: f64, gl: &GaussLegendre) -> f64 {
    let segments = [(-outer, -inner), (-inner, inner), (inner, outer)];
    let nodes_per_seg: Vec<Vec<(f64, f64)>> = segments
        .iter()
        .map(|&(a, b)| gl.mapped(a, b).collect())
        .collect();
    let m = gl.len();
    let mut total = 0.0;
    let boxes = 3usize.pow(d as u32);
    let mut z = alloc::vec![0.0; d];
    for b in 0..boxes {
        let mut code = b;
        let mut segs = [0usize; 3];
        let mut all_middle = true;
        for s in segs.iter_mut().take(d) {
            *s = code % 3;
            code /= 3;
            all_middle &= *s == 1;
        }
        if all_middle {
            continue;
        }
        let points = m.pow(d as u32);
        for idx in 0..points {
            let mut c = idx;
            let mut w = 1.0;
            for k in 0..d {
                let (x, wk) = nodes_per_seg[segs[k]][c % m];
                z[k] = x;
                w *= wk;
                c /= m;
            }
            total += w * f(&z);
        }
    }
    total
}

fn cube_integrability(
    spec: &KernelSpec,
    t: f64,
    p: f64,
    radius: f64,
) -> (Integrability, Integrability) {
    let d = spec.dim();
    let unknown = Integrability { integral: f64::INFINITY, finite: false };
    if d > 3 {
        return (unknown, unknown);
    }
    let gl = GaussLegendre::new(8);
    let f = |z: &[f64]| {
        let h = spec.dominator(t, z);
        if h == 0.0 {
            0.0
        } else {
            pow(h, p)
        }
    };
    let inner: Vec<f64> = (0..60)
        .map(|k| {
            let hi = radius * pow(0.5, k as f64);
            cube_shell(&f, d, 0.5 * hi, hi, &gl)
        })
        .collect();
    let local = shell_verdict(&inner);
    let outer: Vec<f64> = (0..40)
        .map(|k| {
            let lo = radius * pow(2.0, k as f64);
            cube_shell(&f, d, lo, 2.0 * lo, &gl)
        })
        .collect();
    let outer_v = shell_verdict(&outer);
    let finite = local.finite && outer_v.finite;
    let global = Integrability {
        integral: if finite { local.integral + outer_v.integral } else { f64::INFINITY },
        finite,
    };
    (local, global)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> KernelParams {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn exponent_sums() {
        let a = ExponentPair::new(5.0, 5.0, 2).unwrap();
        assert!((a.sum() - 0.8).abs() < 1e-15);
        assert!(a.passes());
        let b = ExponentPair::new(4.0, 8.0, 3).unwrap();
        assert_eq!(b.sum(), 1.0);
        assert!(!b.passes());
        // boundary hit through non-dyadic rationals: 3/(9/2) + 2/6 = 1
        let c = ExponentPair::new(4.5, 6.0, 3).unwrap();
        assert!(!c.passes());
    }

    #[test]
    fn exponent_validation() {
        assert!(matches!(
            ExponentPair::new(2.0, 5.0, 1),
            Err(Error::ConstraintViolation { .. })
        ));
        assert!(matches!(
            ExponentPair::new(5.0, 1.5, 1),
            Err(Error::ConstraintViolation { .. })
        ));
    }

    #[test]
    fn zero_and_linear_drifts() {
        let z = KernelSpec::builtin("zero", &params(&[("d", 3.0)])).unwrap();
        let mut out = [1.0; 3];
        z.drift(0.5, &[1.0, 2.0, 3.0], &[-4.0, 0.0, 9.0], &mut out);
        assert_eq!(out, [0.0; 3]);

        let ou = KernelSpec::builtin("linear-ou", &params(&[("d", 2.0)])).unwrap();
        let mut out = [0.0; 2];
        ou.drift(0.0, &[1.0, 0.0], &[0.0, 0.0], &mut out);
        assert_eq!(out, [-1.0, 0.0]);
    }

    #[test]
    fn riesz_hand_value() {
        let k = KernelSpec::builtin("riesz", &params(&[("alpha", 0.5), ("s", -1.0)])).unwrap();
        let mut out = [0.0];
        k.drift(0.0, &[2.0], &[1.0], &mut out);
        // independent scalar evaluation of s (x-y) / |x-y|^(alpha+1)
        let (x, y, a, s) = (2.0f64, 1.0f64, 0.5f64, -1.0f64);
        let expected = s * (x - y) / (x - y).abs().powf(a + 1.0);
        assert_eq!(expected, -1.0);
        assert!((out[0] - expected).abs() < 1e-15);
        assert!(k.singular_at(0.0, &[1.0], &[1.0]));
    }

    #[test]
    fn builtin_errors() {
        assert!(matches!(
            KernelSpec::builtin("gravity", &KernelParams::new()),
            Err(Error::UnknownKernel(_))
        ));
        assert!(matches!(
            KernelSpec::builtin("riesz", &KernelParams::new()),
            Err(Error::MissingParameter { .. })
        ));
        assert!(matches!(
            KernelSpec::builtin("riesz", &params(&[("alpha", 2.0)])),
            Err(Error::ParameterOutOfRange { .. })
        ));
        assert!(matches!(
            KernelSpec::builtin("zero", &params(&[("alpha", 1.0)])),
            Err(Error::UnknownParameter { .. })
        ));
        assert!(matches!(
            KernelSpec::builtin("riesz", &params(&[("alpha", 0.5), ("s", 0.5)])),
            Err(Error::ParameterOutOfRange { .. })
        ));
        assert!(KernelSpec::builtin("paper-h2-example", &params(&[("alpha", 0.5)])).is_err());
    }

    #[test]
    fn default_exponents_are_valid() {
        for name in BUILTIN_NAMES {
            for d in 1..=3 {
                let mut pm = params(&[("d", d as f64)]);
                if name.starts_with("riesz") {
                    pm.insert("alpha".into(), 0.3);
                }
                if name == "paper-h2-example" {
                    pm.insert("alpha".into(), 1.2);
                }
                let k = KernelSpec::builtin(name, &pm).unwrap();
                k.exponents().validate().unwrap();
                assert_eq!(k.dim(), d);
            }
        }
    }

    #[test]
    fn classification_table() {
        // truncated, d = 2, alpha = 0.3, p = 5, q = 5
        let tr = KernelSpec::builtin(
            "riesz-truncated",
            &params(&[("d", 2.0), ("alpha", 0.3), ("p", 5.0), ("q", 5.0)]),
        )
        .unwrap();
        let c = classify(&tr, 1.0).unwrap();
        assert_eq!(c.verdict, Admissibility::H1);
        // int_{|x|<=1} |x|^-1.5 dx = 2 pi / (2 - 1.5) = 4 pi
        assert!((c.local.integral - 4.0 * core::f64::consts::PI).abs() < 1e-6);

        let gl = KernelSpec::builtin(
            "riesz",
            &params(&[("d", 2.0), ("alpha", 0.3), ("p", 5.0), ("q", 5.0)]),
        )
        .unwrap();
        let c = classify(&gl, 1.0).unwrap();
        assert_eq!(c.verdict, Admissibility::H2Only);
        assert!(c.local.finite && !c.global.finite && c.h2_tail_ok);

        let bad = KernelSpec::builtin("zero", &params(&[("d", 3.0), ("p", 4.0), ("q", 8.0)])).unwrap();
        let c = classify(&bad, 1.0).unwrap();
        assert_eq!(c.verdict, Admissibility::Inadmissible);
        assert_eq!(c.exponent_sum, 1.0);
    }

    #[test]
    fn other_builtins_classify() {
        let z = KernelSpec::builtin("zero", &params(&[("d", 2.0)])).unwrap();
        assert_eq!(classify(&z, 1.0).unwrap().verdict, Admissibility::H1);
        let b = KernelSpec::builtin("bounded-lipschitz", &params(&[("c", 2.0)])).unwrap();
        assert_eq!(classify(&b, 1.0).unwrap().verdict, Admissibility::H2Only);
        let ou = KernelSpec::builtin("linear-ou", &KernelParams::new()).unwrap();
        assert_eq!(classify(&ou, 1.0).unwrap().verdict, Admissibility::Inadmissible);
        let h2 = KernelSpec::builtin("paper-h2-example", &params(&[("alpha", 1.5), ("d", 2.0)])).unwrap();
        assert_eq!(classify(&h2, 1.0).unwrap().verdict, Admissibility::H2Only);
        // alpha p >= d: not locally integrable
        let sing = KernelSpec::builtin(
            "riesz-truncated",
            &params(&[("alpha", 0.25), ("p", 8.0), ("q", 8.0)]),
        )
        .unwrap();
        assert_eq!(classify(&sing, 1.0).unwrap().verdict, Admissibility::Inadmissible);
    }

    struct NoTail;
    impl InteractionKernel for NoTail {
        fn drift(&self, _t: f64, _x: &[f64], _y: &[f64], out: &mut [f64]) {
            out.fill(1.0);
        }
        fn dominator(&self, _t: f64, _z: &[f64]) -> f64 {
            1.0
        }
    }

    struct Bump;
    impl InteractionKernel for Bump {
        fn drift(&self, _t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
            let z = x[0] - y[0];
            out[0] = crate::math::exp(-z * z);
        }
        fn dominator(&self, _t: f64, z: &[f64]) -> f64 {
            crate::math::exp(-z[0] * z[0])
        }
    }

    #[test]
    fn custom_kernels() {
        let e = ExponentPair::new(4.0, 8.0, 1).unwrap();
        let k = KernelSpec::custom("no-tail", e, Arc::new(NoTail), true);
        assert!(matches!(classify(&k, 1.0), Err(Error::MissingH2Tail(_))));
        let bump = KernelSpec::custom("bump", e, Arc::new(Bump), false);
        let c = classify(&bump, 1.0).unwrap();
        assert!(c.best_effort);
        assert_eq!(c.verdict, Admissibility::H1);
        // int exp(-4 z^2) dz = sqrt(pi)/2
        assert!((c.global.integral - core::f64::consts::PI.sqrt() / 2.0).abs() < 1e-8);
    }

    #[test]
    fn radius_must_be_positive() {
        let z = KernelSpec::builtin("zero", &KernelParams::new()).unwrap();
        assert!(matches!(classify(&z, 0.0), Err(Error::Domain(_))));
    }
}
