//! Propagation-of-chaos diagnostics on simulated ensembles.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::distance::{energy_distance, sliced_w1, w1_1d, Marginal1d, MarginalNd};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::math::{cos, dot, norm_sq, sin, sqrt};
use crate::meanfield::{DensityEstimate, DensityRepr};
use crate::rng::{Domain, StreamRng};
use crate::sde::TrajectoryBlock;
use crate::stats;

/// One row of a report. `ci_low <= value <= ci_high` always holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub x: f64,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SeriesPoint {
    pub fn new(x: f64, value: f64, ci: (f64, f64)) -> Self {
        Self {
            x,
            value,
            ci_low: ci.0.min(value),
            ci_high: ci.1.max(value),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.ci_low <= v && v <= self.ci_high
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub name: String,
    pub series: Vec<SeriesPoint>,
    /// Least-squares slope of `ln value` against `ln x` over positive values.
    pub fitted_slope: Option<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl DiagnosticsReport {
    fn new(name: &str, series: Vec<SeriesPoint>, fit: bool) -> Self {
        let fitted_slope = if fit {
            let (xs, ys): (Vec<f64>, Vec<f64>) = series
                .iter()
                .filter(|p| p.value > 0.0 && p.x > 0.0)
                .map(|p| (p.x, p.value))
                .unzip();
            stats::log_log_slope(&xs, &ys)
        } else {
            None
        };
        Self {
            name: name.to_string(),
            series,
            fitted_slope,
            metadata: BTreeMap::new(),
        }
    }

    fn note(&mut self, key: &str, value: impl Into<String>) {
        self.metadata.insert(key.to_string(), value.into());
    }
}

/// Independent runs of one system size.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    pub n: usize,
    pub runs: Vec<TrajectoryBlock>,
}

fn list(v: impl Iterator<Item = String>) -> String {
    v.collect::<Vec<_>>().join(",")
}

/// Mean with a normal 95% interval; degenerate for a single value.
fn mean_ci(values: &[f64]) -> (f64, (f64, f64)) {
    let m = stats::mean(values);
    if values.len() < 2 {
        return (m, (m, m));
    }
    let h = 1.96 * stats::std_err(values);
    (m, (m - h, m + h))
}

fn snapshot_at(traj: &TrajectoryBlock, t: f64) -> Result<&[f64]> {
    traj.index_of_time(t)
        .map(|k| traj.snapshot(k))
        .ok_or_else(|| Error::usage(format!("time {t} was not recorded; use a denser record_every")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceMethod {
    /// Exact one-dimensional W1 (quantile coupling).
    ExactW1,
    SlicedW1 { n_slices: usize },
    EnergyDistance,
}

/// Distance between the empirical time-`t` marginal of each run and the
/// reference, averaged over runs, with a slope fit against `N`.
pub fn marginal_distance(
    sets: &[RunSet],
    reference: &DensityEstimate,
    t: f64,
    method: DistanceMethod,
    seed: u64,
) -> Result<DiagnosticsReport> {
    if (reference.time - t).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::usage(format!("reference is not available at t = {t}")));
    }
    let d = reference.dim();
    let ref_energy_samples = || -> Vec<f64> {
        match &reference.repr {
            DensityRepr::Samples { points, .. } => points.clone(),
            _ => {
                // seeded draw from the reference marginal
                let (mean, var) = reference.moments();
                let mut rng = StreamRng::new(seed, Domain::Reference, 0);
                (0..2000 * d).map(|k| mean[k % d] + sqrt(var[k % d]) * rng.next_normal()).collect()
            }
        }
    };
    let energy_ref = matches!(method, DistanceMethod::EnergyDistance).then(ref_energy_samples);
    let mut series = Vec::new();
    let mut single = false;
    for set in sets {
        let mut values = Vec::with_capacity(set.runs.len());
        for traj in &set.runs {
            if traj.dim != d {
                return Err(Error::usage("trajectory and reference dimensions differ"));
            }
            let x = snapshot_at(traj, t)?.to_vec();
            let v = match method {
                DistanceMethod::ExactW1 => {
                    if d != 1 {
                        return Err(Error::usage("exact W1 is one-dimensional; use sliced W1"));
                    }
                    let r = match &reference.repr {
                        DensityRepr::Gaussian { mean, var } => Marginal1d::Gaussian {
                            mean: mean[0],
                            sd: sqrt(var[0]),
                        },
                        DensityRepr::Grid1d { lo, dx, values } => Marginal1d::Grid {
                            lo: *lo,
                            dx: *dx,
                            masses: values.iter().map(|v| v * dx).collect(),
                        },
                        DensityRepr::Samples { points, .. } => Marginal1d::samples(points.clone())?,
                    };
                    w1_1d(&Marginal1d::samples(x)?, &r)
                }
                DistanceMethod::SlicedW1 { n_slices } => {
                    if let DensityRepr::Grid1d { .. } = reference.repr {
                        let s = DensityEstimate::samples(t, x, 1, crate::meanfield::Bandwidth::Fixed(1.0), "particles");
                        crate::meanfield::estimate_distance(&s, reference, n_slices, seed)?
                    } else {
                        let a = MarginalNd::Samples { points: x, dim: d };
                        sliced_w1(&a, &reference.marginal(), n_slices, seed)?
                    }
                }
                DistanceMethod::EnergyDistance => {
                    energy_distance(&x, energy_ref.as_ref().expect("drawn above"), d)?
                }
            };
            values.push(v);
        }
        single |= values.len() < 2;
        let (m, ci) = mean_ci(&values);
        series.push(SeriesPoint::new(set.n as f64, m, ci));
    }
    let mut rep = DiagnosticsReport::new("marginal_distance", series, true);
    rep.note("n_list", list(sets.iter().map(|s| s.n.to_string())));
    rep.note("t", t.to_string());
    rep.note(
        "method",
        match method {
            DistanceMethod::ExactW1 => "exact-w1-1d".to_string(),
            DistanceMethod::SlicedW1 { n_slices } => format!("sliced-w1({n_slices})"),
            DistanceMethod::EnergyDistance => "energy-distance".to_string(),
        },
    );
    rep.note("slope_expectation", "-1/2 from the empirical-measure rate in d = 1, not a proven rate");
    if single {
        rep.note("ci", "single run for some N: interval degenerate");
    }
    Ok(rep)
}

/// `E|X_t - X_s|^4 / (t - s)^2` for each requested pair, averaged over
/// particles and runs. With ten or more runs the interval treats run means
/// as independent; otherwise particles are treated as independent.
pub fn tightness_moment(runs: &[TrajectoryBlock], pairs: &[(f64, f64)]) -> Result<DiagnosticsReport> {
    if runs.is_empty() {
        return Err(Error::usage("need at least one run"));
    }
    let mut series = Vec::new();
    let mut skipped = Vec::new();
    for &(s, t) in pairs {
        if s == t {
            skipped.push(format!("{s}"));
            continue;
        }
        let (s, t) = if s < t { (s, t) } else { (t, s) };
        let gap = t - s;
        let mut run_means = Vec::with_capacity(runs.len());
        let mut all = Vec::new();
        for traj in runs {
            let a = snapshot_at(traj, s)?;
            let b = snapshot_at(traj, t)?;
            let d = traj.dim;
            let vals: Vec<f64> = a
                .chunks(d)
                .zip(b.chunks(d))
                .map(|(x, y)| {
                    let r2 = crate::math::dist_sq(x, y);
                    r2 * r2 / (gap * gap)
                })
                .collect();
            run_means.push(stats::mean(&vals));
            all.extend(vals);
        }
        let (m, ci) = if runs.len() >= 10 { mean_ci(&run_means) } else { mean_ci(&all) };
        series.push(SeriesPoint::new(gap, m, ci));
    }
    let mut rep = DiagnosticsReport::new("tightness_moment", series, true);
    rep.note("pairs", list(pairs.iter().map(|(s, t)| format!("{s}:{t}"))));
    if !skipped.is_empty() {
        rep.note("skipped", format!("s = t at {}", skipped.join(",")));
    }
    Ok(rep)
}

/// Test functions with closed-form gradient and Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `cos(a . x)`.
    Cos(Vec<f64>),
    /// `1 / (1 + |x|^2)`.
    InverseQuadratic,
}

impl TestFunction {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Cos(a) => cos(dot(a, x)),
            TestFunction::InverseQuadratic => 1.0 / (1.0 + norm_sq(x)),
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            TestFunction::Cos(a) => {
                let s = -sin(dot(a, x));
                for (o, ak) in out.iter_mut().zip(a) {
                    *o = s * ak;
                }
            }
            TestFunction::InverseQuadratic => {
                let q = 1.0 + norm_sq(x);
                for (o, xk) in out.iter_mut().zip(x) {
                    *o = -2.0 * xk / (q * q);
                }
            }
        }
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Cos(a) => -norm_sq(a) * cos(dot(a, x)),
            TestFunction::InverseQuadratic => {
                let r2 = norm_sq(x);
                let q = 1.0 + r2;
                -2.0 * x.len() as f64 / (q * q) + 8.0 * r2 / (q * q * q)
            }
        }
    }
}

/// Bounded path weight `phi(X_{t_1}, ..., X_{t_a})` with `t_a <= s`.
#[derive(Debug, Clone, PartialEq)]
pub enum PathWeight {
    Constant(f64),
    /// `prod_k cos(a . X_{t_k})`.
    CosProduct { a: Vec<f64>, times: Vec<f64> },
}

/// Bounded observables for the independence test.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    Constant(f64),
    /// `tanh` of one coordinate.
    Tanh(usize),
    /// `cos(a . x)`.
    Cos(Vec<f64>),
}

impl Observable {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Observable::Constant(c) => *c,
            Observable::Tanh(k) => libm::tanh(x[*k]),
            Observable::Cos(a) => cos(dot(a, x)),
        }
    }
}

/// `G(mu^N)` for one run: the weighted empirical Dynkin residual of `f`
/// between `s` and `t`, with left Riemann sums on the recorded grid. The
/// interaction uses the empirical measure `(1/N) sum_j b(u, X^i, X^j)`
/// (self term included, singular pairs masked); `with_drift = false`
/// drops it.
#[allow(clippy::too_many_arguments)]
pub fn g_functional_run(
    traj: &TrajectoryBlock,
    kernel: &KernelSpec,
    diffusion: f64,
    f: &TestFunction,
    phi: &PathWeight,
    s: f64,
    t: f64,
    with_drift: bool,
) -> Result<f64> {
    if !(s < t) {
        return Err(Error::usage("the residual needs s < t"));
    }
    let ks = traj
        .index_of_time(s)
        .ok_or_else(|| Error::usage(format!("time {s} was not recorded; use a denser record_every")))?;
    let kt = traj
        .index_of_time(t)
        .ok_or_else(|| Error::usage(format!("time {t} was not recorded; use a denser record_every")))?;
    let n = traj.n_particles;
    let d = traj.dim;
    if let TestFunction::Cos(a) = f {
        if a.len() != d {
            return Err(Error::usage("test function frequency has the wrong dimension"));
        }
    }
    let weights: Vec<f64> = match phi {
        PathWeight::Constant(c) => alloc::vec![*c; n],
        PathWeight::CosProduct { a, times } => {
            if a.len() != d {
                return Err(Error::usage("path weight frequency has the wrong dimension"));
            }
            let mut w = alloc::vec![1.0; n];
            for &tk in times {
                if tk > s {
                    return Err(Error::usage("path weight times must not exceed s"));
                }
                let snap = snapshot_at(traj, tk)?;
                for (wi, x) in w.iter_mut().zip(snap.chunks(d)) {
                    *wi *= cos(dot(a, x));
                }
            }
            w
        }
    };
    if weights.iter().all(|w| *w == 0.0) {
        return Ok(0.0);
    }
    let half = 0.5 * diffusion * diffusion;
    let mut residual: Vec<f64> = (0..n)
        .map(|i| f.value(traj.position(kt, i)) - f.value(traj.position(ks, i)))
        .collect();
    let mut grad = alloc::vec![0.0; d];
    let mut field = alloc::vec![0.0; d];
    for k in ks..kt {
        let du = traj.times[k + 1] - traj.times[k];
        let u = traj.times[k];
        let snap = traj.snapshot(k);
        for (i, r) in residual.iter_mut().enumerate() {
            let x = &snap[i * d..(i + 1) * d];
            let mut gen = half * f.laplacian(x);
            if with_drift && !kernel.is_zero() {
                field.fill(0.0);
                kernel.accumulate_pairs(u, x, snap, 0..n, None, &mut field);
                f.gradient(x, &mut grad);
                gen += dot(&grad, &field) / n as f64;
            }
            *r -= gen * du;
        }
    }
    Ok(weights.iter().zip(&residual).map(|(w, r)| w * r).sum::<f64>() / n as f64)
}

/// `E[G(mu^N)^2]` over runs for each `N`.
#[allow(clippy::too_many_arguments)]
pub fn g_functional(
    sets: &[RunSet],
    kernel: &KernelSpec,
    diffusion: f64,
    f: &TestFunction,
    phi: &PathWeight,
    s: f64,
    t: f64,
) -> Result<DiagnosticsReport> {
    let mut series = Vec::new();
    for set in sets {
        let g2 = crate::par::map_range(set.runs.len(), |k| {
            g_functional_run(&set.runs[k], kernel, diffusion, f, phi, s, t, true).map(|g| g * g)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        let (m, (lo, hi)) = mean_ci(&g2);
        series.push(SeriesPoint::new(set.n as f64, m, (lo.max(0.0), hi)));
    }
    let mut rep = DiagnosticsReport::new("g_functional", series, true);
    rep.note("n_list", list(sets.iter().map(|s| s.n.to_string())));
    rep.note("runs", list(sets.iter().map(|s| s.runs.len().to_string())));
    rep.note("test_function", format!("{f:?}"));
    rep.note("path_weight", format!("{phi:?}"));
    rep.note("window", format!("{s}:{t}"));
    rep.note("slope_expectation", "-1 from the estimator structure, not a proven rate");
    Ok(rep)
}

/// `|Cov(g(X^1_t), h(X^2_t))|` per `N`, estimated from all ordered pairs of
/// distinct particles within each run (exchangeability) and the across-run
/// means; bootstrap over runs for the interval.
pub fn independence_test(
    sets: &[RunSet],
    g: &Observable,
    h: &Observable,
    t: f64,
    seed: u64,
) -> Result<DiagnosticsReport> {
    let mut series = Vec::new();
    let mut single = false;
    for set in sets {
        if set.n < 2 {
            return Err(Error::usage("the independence test needs at least two particles"));
        }
        // per run: (pair mean of g_i h_j, mean g, mean h)
        let mut cells = Vec::with_capacity(set.runs.len() * 3);
        for traj in &set.runs {
            let snap = snapshot_at(traj, t)?;
            let d = traj.dim;
            let gv: Vec<f64> = snap.chunks(d).map(|x| g.value(x)).collect();
            let hv: Vec<f64> = snap.chunks(d).map(|x| h.value(x)).collect();
            let n = gv.len() as f64;
            let sg: f64 = gv.iter().sum();
            let sh: f64 = hv.iter().sum();
            let diag: f64 = gv.iter().zip(&hv).map(|(a, b)| a * b).sum();
            cells.push((sg * sh - diag) / (n * (n - 1.0)));
            cells.push(sg / n);
            cells.push(sh / n);
        }
        let stat = |c: &[f64]| {
            let r = (c.len() / 3) as f64;
            let (mut a, mut b, mut cc) = (0.0, 0.0, 0.0);
            for w in c.chunks(3) {
                a += w[0];
                b += w[1];
                cc += w[2];
            }
            a / r - (b / r) * (cc / r)
        };
        let cov = stat(&cells);
        let value = cov.abs();
        let ci = if set.runs.len() < 2 {
            single = true;
            (value, value)
        } else {
            let (lo, hi) = bootstrap_runs(&cells, 3, &stat, seed ^ set.n as u64);
            if lo <= 0.0 && hi >= 0.0 {
                (0.0, lo.abs().max(hi.abs()))
            } else {
                let (a, b) = (lo.abs(), hi.abs());
                (a.min(b), a.max(b))
            }
        };
        series.push(SeriesPoint::new(set.n as f64, value, ci));
    }
    let mut rep = DiagnosticsReport::new("independence_test", series, true);
    rep.note("n_list", list(sets.iter().map(|s| s.n.to_string())));
    rep.note("t", t.to_string());
    rep.note("g", format!("{g:?}"));
    rep.note("h", format!("{h:?}"));
    if single {
        rep.note("ci", "single run for some N: interval unavailable");
    }
    Ok(rep)
}

/// Percentile bootstrap resampling whole records of `width` values.
fn bootstrap_runs(cells: &[f64], width: usize, stat: &dyn Fn(&[f64]) -> f64, seed: u64) -> (f64, f64) {
    let r = cells.len() / width;
    let mut rng = StreamRng::new(seed, Domain::Bootstrap, 1);
    let mut buf = alloc::vec![0.0; cells.len()];
    let mut out: Vec<f64> = (0..1000)
        .map(|_| {
            for dst in buf.chunks_mut(width) {
                let k = rng.below(r);
                dst.copy_from_slice(&cells[k * width..(k + 1) * width]);
            }
            stat(&buf)
        })
        .collect();
    out.sort_by(|a, b| a.total_cmp(b));
    (stats::quantile_sorted(&out, 0.025), stats::quantile_sorted(&out, 0.975))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelParams;
    use crate::meanfield::heat_density;
    use crate::sde::{run, InitialLaw, SimConfig};

    fn kernel(name: &str, pairs: &[(&str, f64)]) -> KernelSpec {
        let p: KernelParams = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        KernelSpec::builtin(name, &p).unwrap()
    }

    #[test]
    fn laplacians_match_finite_differences() {
        let x = [0.3, -0.7, 1.1];
        for f in [TestFunction::Cos(alloc::vec![0.5, 1.0, -2.0]), TestFunction::InverseQuadratic] {
            let h = 1e-4;
            let mut lap = 0.0;
            let mut grad = [0.0; 3];
            f.gradient(&x, &mut grad);
            for k in 0..3 {
                let mut p = x;
                let mut m = x;
                p[k] += h;
                m[k] -= h;
                lap += (f.value(&p) - 2.0 * f.value(&x) + f.value(&m)) / (h * h);
                assert!((grad[k] - (f.value(&p) - f.value(&m)) / (2.0 * h)).abs() < 1e-7);
            }
            assert!((lap - f.laplacian(&x)).abs() < 1e-5, "{f:?}");
        }
    }

    #[test]
    fn zero_weight_and_constant_observables() {
        let c = SimConfig::new(kernel("linear-ou", &[]), 6, 0.5, 0.05, InitialLaw::PointMass(alloc::vec![0.0]), 3);
        let traj = run(&c, 1, false).unwrap();
        let g = g_functional_run(&traj, &c.kernel, c.diffusion, &TestFunction::InverseQuadratic, &PathWeight::Constant(0.0), 0.1, 0.5, true).unwrap();
        assert_eq!(g, 0.0);
        assert!(g_functional_run(&traj, &c.kernel, c.diffusion, &TestFunction::InverseQuadratic, &PathWeight::Constant(1.0), 0.125, 0.5, true).is_err());
        let sets = [RunSet { n: 6, runs: alloc::vec![traj.clone(), traj] }];
        let rep = independence_test(&sets, &Observable::Constant(1.0), &Observable::Tanh(0), 0.5, 1).unwrap();
        assert!(rep.series[0].value.abs() < 1e-15);
    }

    #[test]
    fn distance_to_itself_is_zero() {
        let c = SimConfig::new(kernel("zero", &[]), 50, 1.0, 0.1, InitialLaw::PointMass(alloc::vec![0.0]), 5);
        let traj = run(&c, 1, false).unwrap();
        let reference = DensityEstimate::samples(1.0, traj.last().to_vec(), 1, crate::meanfield::Bandwidth::Silverman, "self");
        let sets = [RunSet { n: 50, runs: alloc::vec![traj] }];
        for m in [DistanceMethod::ExactW1, DistanceMethod::SlicedW1 { n_slices: 4 }, DistanceMethod::EnergyDistance] {
            let rep = marginal_distance(&sets, &reference, 1.0, m, 0).unwrap();
            assert_eq!(rep.series[0].value, 0.0);
        }
        let heat = heat_density(0.5, &[0.0], &[0.0], c.diffusion).unwrap();
        assert!(marginal_distance(&sets, &heat, 1.0, DistanceMethod::ExactW1, 0).is_err());
    }

    #[test]
    fn tightness_skips_equal_times() {
        let c = SimConfig::new(kernel("zero", &[]), 20, 1.0, 0.125, InitialLaw::PointMass(alloc::vec![0.0]), 5);
        let traj = run(&c, 1, false).unwrap();
        let rep = tightness_moment(&[traj], &[(0.5, 0.5), (0.5, 1.0)]).unwrap();
        assert_eq!(rep.series.len(), 1);
        assert!(rep.metadata.contains_key("skipped"));
    }
}
