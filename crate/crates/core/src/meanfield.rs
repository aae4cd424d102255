//! Reference solutions of the nonlinear (mean-field) equation
//! `dX = (b(t, X, .) * rho_t)(X) dt + sigma dW`, `rho_t = law(X_t)`.
//!
//! Three independent constructions: the closed-form Gaussian flow for the
//! linear kernel, a Picard iteration on particle samples with common random
//! numbers, and a finite-volume Fokker–Planck solver on the line.

use alloc::string::String;
use alloc::vec::Vec;

use crate::distance::{sliced_w1, Marginal1d, MarginalNd};
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::math::{abs, exp, norm_cdf, pow, round, sqrt, PI};
use crate::sde::{run_linear, InitialLaw, SimConfig};
use crate::stats;

/// Representation of a density at one time.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityRepr {
    /// Independent Gaussian coordinates.
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
    /// Cell averages on `[lo + k dx, lo + (k+1) dx)`, `d = 1`.
    Grid1d { lo: f64, dx: f64, values: Vec<f64> },
    /// Particle samples (`n x d`) with per-coordinate KDE bandwidths.
    Samples { points: Vec<f64>, dim: usize, bandwidth: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub time: f64,
    pub repr: DensityRepr,
    /// Producing method (`exact`, `picard`, `fokker-planck`, `heat`).
    pub method: &'static str,
}

/// Kernel density bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// `h_j = sd_j (4 / ((d + 2) n))^(1 / (d + 4))`.
    Silverman,
    Fixed(f64),
}

impl Bandwidth {
    pub fn select(&self, points: &[f64], dim: usize) -> Vec<f64> {
        match self {
            Bandwidth::Fixed(h) => alloc::vec![*h; dim],
            Bandwidth::Silverman => {
                let n = points.len() / dim;
                let factor = pow(4.0 / ((dim as f64 + 2.0) * n as f64), 1.0 / (dim as f64 + 4.0));
                (0..dim)
                    .map(|k| {
                        let col: Vec<f64> = points.iter().skip(k).step_by(dim).copied().collect();
                        let sd = sqrt(stats::variance(&col));
                        let sd = if sd > 0.0 { sd } else { 1e-3 };
                        sd * factor
                    })
                    .collect()
            }
        }
    }
}

fn gauss1(z: f64, h: f64) -> f64 {
    exp(-0.5 * z * z / (h * h)) / (sqrt(2.0 * PI) * h)
}

impl DensityEstimate {
    pub fn samples(time: f64, points: Vec<f64>, dim: usize, rule: Bandwidth, method: &'static str) -> Self {
        let bandwidth = rule.select(&points, dim);
        Self {
            time,
            repr: DensityRepr::Samples { points, dim, bandwidth },
            method,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            DensityRepr::Gaussian { mean, .. } => mean.len(),
            DensityRepr::Grid1d { .. } => 1,
            DensityRepr::Samples { dim, .. } => *dim,
        }
    }

    /// Total mass (midpoint rule on grids; exactly one otherwise).
    pub fn mass(&self) -> f64 {
        match &self.repr {
            DensityRepr::Grid1d { dx, values, .. } => values.iter().sum::<f64>() * dx,
            _ => 1.0,
        }
    }

    /// Pointwise density (the KDE for samples).
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.repr {
            DensityRepr::Gaussian { mean, var } => mean
                .iter()
                .zip(var)
                .zip(x)
                .map(|((m, v), y)| gauss1(y - m, sqrt(*v)))
                .product(),
            DensityRepr::Grid1d { lo, dx, values } => {
                let pos = (x[0] - lo) / dx;
                if pos < 0.0 || pos >= values.len() as f64 {
                    0.0
                } else {
                    values[pos as usize]
                }
            }
            DensityRepr::Samples { points, dim, bandwidth } => {
                let n = points.len() / dim;
                points
                    .chunks(*dim)
                    .map(|p| (0..*dim).map(|k| gauss1(x[k] - p[k], bandwidth[k])).product::<f64>())
                    .sum::<f64>()
                    / n as f64
            }
        }
    }

    /// Mean and per-coordinate variance.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.repr {
            DensityRepr::Gaussian { mean, var } => (mean.clone(), var.clone()),
            DensityRepr::Grid1d { lo, dx, values } => {
                let m0: f64 = values.iter().sum();
                let c = |k: usize| lo + dx * (k as f64 + 0.5);
                let m1: f64 = values.iter().enumerate().map(|(k, v)| v * c(k)).sum::<f64>() / m0;
                let m2: f64 = values.iter().enumerate().map(|(k, v)| v * (c(k) - m1) * (c(k) - m1)).sum::<f64>() / m0;
                (alloc::vec![m1], alloc::vec![m2])
            }
            DensityRepr::Samples { points, dim, .. } => (0..*dim)
                .map(|k| {
                    let col: Vec<f64> = points.iter().skip(k).step_by(*dim).copied().collect();
                    (stats::mean(&col), stats::variance(&col))
                })
                .unzip(),
        }
    }

    /// The law used by distance computations. Sample-based estimates enter
    /// through their empirical measure, not the smoothed KDE.
    pub fn marginal(&self) -> MarginalNd {
        match &self.repr {
            DensityRepr::Gaussian { mean, var } => MarginalNd::Gaussian {
                mean: mean.clone(),
                var: var.clone(),
            },
            DensityRepr::Samples { points, dim, .. } => MarginalNd::Samples {
                points: points.clone(),
                dim: *dim,
            },
            DensityRepr::Grid1d { .. } => unreachable!("grids are handled on the line"),
        }
    }

    fn marginal_1d(&self) -> Result<Marginal1d> {
        Ok(match &self.repr {
            DensityRepr::Grid1d { lo, dx, values } => Marginal1d::Grid {
                lo: *lo,
                dx: *dx,
                masses: values.iter().map(|v| v * dx).collect(),
            },
            DensityRepr::Gaussian { mean, var } => Marginal1d::Gaussian {
                mean: mean[0],
                sd: sqrt(var[0]),
            },
            DensityRepr::Samples { points, .. } => Marginal1d::samples(points.clone())?,
        })
    }

    /// `||rho||_{L^r}`; `warning` is set when the value comes from a biased
    /// plug-in estimator.
    pub fn lr_norm(&self, r: f64) -> Result<NormValue> {
        if !(r >= 1.0) || !r.is_finite() {
            return Err(Error::domain("the norm exponent must be a finite r >= 1"));
        }
        let value = match &self.repr {
            DensityRepr::Gaussian { var, .. } => {
                let c1 = pow(2.0 * PI, -0.5 * (1.0 - 1.0 / r)) * pow(r, -0.5 / r);
                var.iter()
                    .map(|v| if r == 1.0 { 1.0 } else { c1 * pow(*v, -0.5 * (1.0 - 1.0 / r)) })
                    .product()
            }
            DensityRepr::Grid1d { dx, values, .. } => {
                pow(values.iter().map(|v| pow(abs(*v), r)).sum::<f64>() * dx, 1.0 / r)
            }
            DensityRepr::Samples { points, dim, bandwidth } => {
                if r == 1.0 {
                    1.0
                } else if *dim <= 2 {
                    pow(kde_grid_power_integral(points, *dim, bandwidth, r), 1.0 / r)
                } else {
                    let n = points.len() / dim;
                    let loo = |i: usize| {
                        let x = &points[i * dim..(i + 1) * dim];
                        let s: f64 = points
                            .chunks(*dim)
                            .enumerate()
                            .filter(|(j, _)| *j != i)
                            .map(|(_, p)| (0..*dim).map(|k| gauss1(x[k] - p[k], bandwidth[k])).product::<f64>())
                            .sum();
                        s / (n - 1) as f64
                    };
                    let m = (0..n).map(|i| pow(loo(i), r - 1.0)).sum::<f64>() / n as f64;
                    return Ok(NormValue {
                        value: pow(m, 1.0 / r),
                        warning: Some("plug-in L^r estimate from a leave-one-out KDE; biased in d > 2".into()),
                    });
                }
            }
        };
        Ok(NormValue { value, warning: None })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormValue {
    pub value: f64,
    pub warning: Option<String>,
}

/// `int kde^r` by evaluating the KDE on a grid (d = 1 or 2).
fn kde_grid_power_integral(points: &[f64], dim: usize, h: &[f64], r: f64) -> f64 {
    let cells = if dim == 1 { 400 } else { 100 };
    let mut lo = alloc::vec![0.0; dim];
    let mut step = alloc::vec![0.0; dim];
    for k in 0..dim {
        let col = points.iter().skip(k).step_by(dim);
        let (a, b) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        lo[k] = a - 5.0 * h[k];
        step[k] = (b - a + 10.0 * h[k]) / cells as f64;
    }
    let n = (points.len() / dim) as f64;
    let eval = |x: &[f64]| {
        points
            .chunks(dim)
            .map(|p| (0..dim).map(|k| gauss1(x[k] - p[k], h[k])).product::<f64>())
            .sum::<f64>()
            / n
    };
    let total = crate::par::map_range(pow(cells as f64, dim as f64) as usize, |idx| {
        let mut x = [0.0; 2];
        let mut rest = idx;
        for k in 0..dim {
            x[k] = lo[k] + step[k] * ((rest % cells) as f64 + 0.5);
            rest /= cells;
        }
        pow(eval(&x[..dim]), r)
    });
    total.iter().sum::<f64>() * step.iter().product::<f64>()
}

/// Gaussian flow of the linear kernel `b(x, y) = y - x`: mean fixed,
/// `v_t = sigma^2/2 + (v0 - sigma^2/2) e^{-2t}` per coordinate.
pub fn exact_ou_density(t: f64, mean0: &[f64], var0: f64, sigma: f64) -> Result<DensityEstimate> {
    if !(t >= 0.0) || !(var0 >= 0.0) || !(sigma > 0.0) || mean0.is_empty() {
        return Err(Error::domain("need t >= 0, var0 >= 0, sigma > 0 and a non-empty mean"));
    }
    let half = 0.5 * sigma * sigma;
    let v = if t == 0.0 { var0 } else { half + (var0 - half) * exp(-2.0 * t) };
    Ok(DensityEstimate {
        time: t,
        repr: DensityRepr::Gaussian {
            mean: mean0.to_vec(),
            var: alloc::vec![v; mean0.len()],
        },
        method: "exact",
    })
}

/// Law of `X_0 + sigma W_t` for a Gaussian or point-mass `X_0`.
pub fn heat_density(t: f64, mean0: &[f64], var0: &[f64], sigma: f64) -> Result<DensityEstimate> {
    if !(t >= 0.0) || !(sigma > 0.0) || mean0.len() != var0.len() || mean0.is_empty() {
        return Err(Error::domain("need t >= 0, sigma > 0 and matching mean/variance"));
    }
    Ok(DensityEstimate {
        time: t,
        repr: DensityRepr::Gaussian {
            mean: mean0.to_vec(),
            var: var0.iter().map(|v| v + sigma * sigma * t).collect(),
        },
        method: "heat",
    })
}

/// Outcome of [`picard_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct PicardResult {
    /// Last iterate at the recorded times.
    pub estimates: Vec<DensityEstimate>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest sliced-W1 change between successive iterates, per iteration.
    pub changes: Vec<f64>,
}

pub const PICARD_TOLERANCE: f64 = 1e-3;
const PICARD_SLICES: usize = 32;

/// Fixed-point iteration on the law: iterate `k + 1` integrates the linear
/// SDE whose drift averages `b(t, x, .)` over `n_ref` samples of iterate `k`
/// at the same grid time. Every iterate reuses the config seed.
pub fn picard_solve(
    config: &SimConfig,
    iterations: usize,
    n_ref: usize,
    bandwidth: Bandwidth,
    record_every: u64,
) -> Result<PicardResult> {
    config.validate()?;
    if iterations < 1 {
        return Err(Error::usage("need at least one iteration"));
    }
    if n_ref < 1000 {
        return Err(Error::usage("n_ref must be at least 1000"));
    }
    if n_ref > config.n_particles {
        return Err(Error::usage("n_ref cannot exceed n_particles"));
    }
    if record_every < 1 {
        return Err(Error::usage("record_every must be >= 1"));
    }
    let d = config.dim;
    let n_steps = config.n_steps() as usize;
    let kernel = &config.kernel;

    // iterate 0: the initial law at every time
    let mut init = alloc::vec![0.0; n_ref * d];
    for (i, x) in init.chunks_mut(d).enumerate() {
        config.initial_law.sample_into(config.seed ^ 0x9E37, i as u32, x);
    }
    let mut reference: Vec<Vec<f64>> = alloc::vec![init; n_steps + 1];
    let mut previous: Option<Vec<Vec<f64>>> = None;
    let mut changes = Vec::new();
    let mut converged = false;
    let mut last_snapshots = Vec::new();
    let mut done = 0;

    for _ in 0..iterations {
        done += 1;
        let means: Vec<Vec<f64>> = match kernel.kind() {
            KernelKind::LinearOu => reference
                .iter()
                .map(|s| (0..d).map(|k| s.iter().skip(k).step_by(d).sum::<f64>() / n_ref as f64).collect())
                .collect(),
            _ => Vec::new(),
        };
        let dt = config.dt;
        let refs = &reference;
        let traj = run_linear(config, 1, |t, x, out| {
            let k = (round(t / dt) as usize).min(n_steps);
            if let Some(m) = means.get(k) {
                for c in 0..d {
                    out[c] = m[c] - x[c];
                }
                return;
            }
            out.fill(0.0);
            kernel.accumulate_pairs(t, x, &refs[k], 0..n_ref, None, out);
            for v in out.iter_mut() {
                *v /= n_ref as f64;
            }
        })?;
        let snapshots: Vec<Vec<f64>> = (0..traj.len()).map(|k| traj.snapshot(k).to_vec()).collect();
        reference = snapshots.iter().map(|s| s[..n_ref * d].to_vec()).collect();

        if kernel.is_zero() {
            converged = true;
            changes.push(0.0);
            last_snapshots = snapshots;
            break;
        }
        if let Some(prev) = &previous {
            let mut worst: f64 = 0.0;
            for (k, (a, b)) in snapshots.iter().zip(prev).enumerate() {
                if k % record_every as usize != 0 && k != n_steps {
                    continue;
                }
                let ma = MarginalNd::Samples { points: a.clone(), dim: d };
                let mb = MarginalNd::Samples { points: b.clone(), dim: d };
                worst = worst.max(sliced_w1(&ma, &mb, PICARD_SLICES, config.seed)?);
            }
            changes.push(worst);
            if worst < PICARD_TOLERANCE {
                converged = true;
                last_snapshots = snapshots;
                break;
            }
        }
        previous = Some(snapshots.clone());
        last_snapshots = snapshots;
    }

    let estimates = last_snapshots
        .into_iter()
        .enumerate()
        .filter(|(k, _)| k % record_every as usize == 0 || *k == n_steps)
        .map(|(k, s)| DensityEstimate::samples(k as f64 * config.dt, s, d, bandwidth, "picard"))
        .collect();
    Ok(PicardResult {
        estimates,
        converged,
        iterations: done,
        changes,
    })
}

/// Uniform cell grid on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpGrid {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl FpGrid {
    pub fn dx(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lo + self.dx() * (k as f64 + 0.5)
    }

    /// Cell averages of a Gaussian density (exact cell masses over `dx`).
    pub fn gaussian(&self, mean: f64, var: f64) -> Vec<f64> {
        let dx = self.dx();
        let sd = sqrt(var);
        (0..self.cells)
            .map(|k| {
                let a = self.lo + dx * k as f64;
                (norm_cdf((a + dx - mean) / sd) - norm_cdf((a - mean) / sd)) / dx
            })
            .collect()
    }

    /// Cell averages of an initial law (point masses fall in one cell).
    pub fn from_law(&self, law: &InitialLaw) -> Result<Vec<f64>> {
        if law.dim() != 1 {
            return Err(Error::usage("the grid solver is one-dimensional"));
        }
        let dx = self.dx();
        Ok(match law {
            InitialLaw::PointMass(x) => {
                let k = ((x[0] - self.lo) / dx) as usize;
                if x[0] < self.lo || k >= self.cells {
                    return Err(Error::usage("point mass outside the grid"));
                }
                let mut v = alloc::vec![0.0; self.cells];
                v[k] = 1.0 / dx;
                v
            }
            InitialLaw::Gaussian { mean, var } => self.gaussian(mean[0], var[0]),
            InitialLaw::UniformBox { lo, hi } => (0..self.cells)
                .map(|k| {
                    let a = (self.lo + dx * k as f64).max(lo[0]);
                    let b = (self.lo + dx * (k + 1) as f64).min(hi[0]);
                    (b - a).max(0.0) / ((hi[0] - lo[0]) * dx)
                })
                .collect(),
        })
    }
}

pub const FP_MAX_REFINEMENTS: u32 = 30;

/// Explicit finite-volume solver for
/// `d rho/dt = (sigma^2/2) rho'' - (v rho)'`, `v = (b * rho)`, with
/// upwinded advective fluxes, zero-flux walls and the self cell excluded
/// from the convolution. Returns the density at each of `record_times`.
pub fn fokker_planck_1d(
    kernel: &KernelSpec,
    grid: FpGrid,
    initial: &[f64],
    sigma: f64,
    dt_pde: f64,
    record_times: &[f64],
) -> Result<Vec<DensityEstimate>> {
    if kernel.dim() != 1 {
        return Err(Error::usage("the grid solver needs a one-dimensional kernel"));
    }
    if !kernel.is_convolution() {
        return Err(Error::usage("the grid solver needs a convolution kernel"));
    }
    if grid.cells < 3 || !(grid.hi > grid.lo) {
        return Err(Error::usage("grid needs lo < hi and at least 3 cells"));
    }
    if initial.len() != grid.cells || initial.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::usage("initial density must be finite and nonnegative on every cell"));
    }
    if !(sigma > 0.0) || !(dt_pde > 0.0) {
        return Err(Error::domain("sigma and dt_pde must be positive"));
    }
    if record_times.windows(2).any(|w| !(w[0] < w[1])) || record_times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::usage("record times must be increasing and nonnegative"));
    }
    let m = grid.cells;
    let dx = grid.dx();
    let mass: f64 = initial.iter().sum::<f64>() * dx;
    if !(mass > 0.0) {
        return Err(Error::usage("initial density has no mass"));
    }
    let mut rho: Vec<f64> = initial.iter().map(|v| v / mass).collect();
    let diff = 0.5 * sigma * sigma;

    // K[m - 1 + o] = k(o dx), offset o = i - j
    let table = |t: f64| -> Vec<f64> {
        let mut out = [0.0];
        (0..2 * m - 1)
            .map(|idx| {
                let o = idx as f64 - (m - 1) as f64;
                if idx == m - 1 {
                    return 0.0;
                }
                let x = [o * dx];
                if kernel.singular_at(t, &x, &[0.0]) {
                    return 0.0;
                }
                kernel.drift(t, &x, &[0.0], &mut out);
                if out[0].is_finite() {
                    out[0]
                } else {
                    0.0
                }
            })
            .collect()
    };
    let time_dependent = matches!(kernel.kind(), KernelKind::Custom { .. });
    let mut ktab = table(0.0);
    let zero = kernel.is_zero();

    let mut v = alloc::vec![0.0; m];
    let mut flux = alloc::vec![0.0; m + 1];
    let mut t = 0.0;
    let mut dt = dt_pde;
    let mut refinements = 0u32;
    let mut out = Vec::with_capacity(record_times.len());
    let snapshot = |t: f64, rho: &[f64]| DensityEstimate {
        time: t,
        repr: DensityRepr::Grid1d {
            lo: grid.lo,
            dx,
            values: rho.to_vec(),
        },
        method: "fokker-planck",
    };
    for &target in record_times {
        while target - t > 1e-12 * target.max(1.0) {
            if time_dependent {
                ktab = table(t);
            }
            let mut vmax: f64 = 0.0;
            if !zero {
                for i in 0..m {
                    let row = &ktab[i..i + m];
                    // row[m - 1 - j] = k((i - j) dx)
                    let mut s = 0.0;
                    for j in 0..m {
                        s += row[m - 1 - j] * rho[j];
                    }
                    v[i] = s * dx;
                    vmax = vmax.max(abs(v[i]));
                }
            }
            let bound = 0.4 * (dx * dx / (sigma * sigma)).min(if vmax > 0.0 { dx / vmax } else { f64::INFINITY });
            while dt > bound {
                dt *= 0.5;
                refinements += 1;
                if refinements > FP_MAX_REFINEMENTS {
                    return Err(Error::Cfl { refinements, dt });
                }
            }
            let h = dt.min(target - t);
            flux[0] = 0.0;
            flux[m] = 0.0;
            for f in 1..m {
                let vf = 0.5 * (v[f - 1] + v[f]);
                let adv = if vf >= 0.0 { vf * rho[f - 1] } else { vf * rho[f] };
                flux[f] = adv - diff * (rho[f] - rho[f - 1]) / dx;
            }
            for i in 0..m {
                rho[i] -= h / dx * (flux[i + 1] - flux[i]);
            }
            t += h;
        }
        t = target;
        out.push(snapshot(t, &rho));
    }
    Ok(out)
}

/// Sliced-W1 distance between two estimates of the same dimension. On the
/// line grids are compared exactly through their piecewise-linear CDFs.
pub fn estimate_distance(a: &DensityEstimate, b: &DensityEstimate, n_slices: usize, seed: u64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::usage("estimates live in different dimensions"));
    }
    if a.dim() == 1 {
        return Ok(crate::distance::w1_1d(&a.marginal_1d()?, &b.marginal_1d()?));
    }
    sliced_w1(&a.marginal(), &b.marginal(), n_slices, seed)
}

/// Normalized decay series `(t, ||rho_t||_r t^{(d/2)(1 - 1/r)})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySeries {
    pub r: f64,
    pub points: Vec<(f64, f64)>,
    pub warning: Option<String>,
}

impl DecaySeries {
    /// `max / min` of the normalized values.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .points
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), (_, v)| (a.min(*v), b.max(*v)));
        hi / lo
    }
}

/// Evaluates the normalized `L^r` norms; needs at least four positive
/// times spanning a factor of ten.
pub fn density_decay_check(estimates: &[DensityEstimate], r: f64) -> Result<DecaySeries> {
    let times: Vec<f64> = estimates.iter().map(|e| e.time).filter(|t| *t > 0.0).collect();
    if times.len() < 4 {
        return Err(Error::usage("the decay check needs estimates at four or more positive times"));
    }
    let (tmin, tmax) = times.iter().fold((f64::INFINITY, 0.0f64), |(a, b), t| (a.min(*t), b.max(*t)));
    if tmax < 10.0 * tmin {
        return Err(Error::usage("the decay check needs times spanning a decade"));
    }
    let mut warning = None;
    let mut points = Vec::new();
    for e in estimates.iter().filter(|e| e.time > 0.0) {
        let nv = e.lr_norm(r)?;
        if nv.warning.is_some() {
            warning = nv.warning;
        }
        let scale = pow(e.time, 0.5 * e.dim() as f64 * (1.0 - 1.0 / r));
        points.push((e.time, nv.value * scale));
    }
    Ok(DecaySeries { r, points, warning })
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
    fn ou_flow_examples() {
        let s = core::f64::consts::SQRT_2;
        let stat = exact_ou_density(3.0, &[0.5], 1.0, s).unwrap();
        assert!((stat.moments().1[0] - 1.0).abs() < 1e-15);
        let late = exact_ou_density(40.0, &[0.0], 0.0, s).unwrap();
        assert!((late.moments().1[0] - 1.0).abs() < 1e-15);
        let start = exact_ou_density(0.0, &[0.0], 0.3, 1.0).unwrap();
        assert_eq!(start.moments().1, [0.3]);
        assert!(exact_ou_density(-1.0, &[0.0], 0.3, 1.0).is_err());
    }

    #[test]
    fn ou_variance_matches_ode_integration() {
        // RK4 on v' = -2 v + sigma^2
        let (sigma, v0, t_end) = (0.8, 2.0, 1.3);
        let f = |v: f64| -2.0 * v + sigma * sigma;
        let mut v = v0;
        let h = t_end / 2000.0;
        for _ in 0..2000 {
            let k1 = f(v);
            let k2 = f(v + 0.5 * h * k1);
            let k3 = f(v + 0.5 * h * k2);
            let k4 = f(v + h * k3);
            v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let e = exact_ou_density(t_end, &[0.0], v0, sigma).unwrap();
        assert!((e.moments().1[0] - v).abs() < 1e-12);
    }

    #[test]
    fn gaussian_norms_decay_at_the_heat_rate() {
        let s = core::f64::consts::SQRT_2;
        let est: Vec<DensityEstimate> = [0.01, 0.03, 0.1, 0.3, 1.0]
            .iter()
            .map(|t| heat_density(*t, &[0.0, 0.0], &[0.0, 0.0], s).unwrap())
            .collect();
        for r in [1.0, 1.5, 2.0, 4.0] {
            let series = density_decay_check(&est, r).unwrap();
            // C_r sigma^{-d(1 - 1/r)}
            let d = 2.0;
            let c = crate::gauss_oracle::lp_constant(r, 2).unwrap() * s.powf(-d * (1.0 - 1.0 / r));
            for (_, v) in &series.points {
                assert!((v - c).abs() < 1e-12 * c, "{r}: {v} vs {c}");
            }
        }
        assert!(density_decay_check(&est[..3], 2.0).is_err());
    }

    #[test]
    fn grid_solver_conserves_mass_and_matches_heat_flow() {
        let grid = FpGrid { lo: -8.0, hi: 8.0, cells: 512 };
        let init = grid.gaussian(0.0, 0.5);
        let out = fokker_planck_1d(&kernel("zero", &[]), grid, &init, 1.0, 1e-3, &[0.5, 1.0]).unwrap();
        let last = out.last().unwrap();
        assert!((last.mass() - 1.0).abs() < 1e-6);
        let var = last.moments().1[0];
        assert!((var - 1.5).abs() < 0.015, "{var}");
    }

    #[test]
    fn grid_solver_rejects_bad_input() {
        let grid = FpGrid { lo: -1.0, hi: 1.0, cells: 8 };
        let init = alloc::vec![0.5; 8];
        let k2 = kernel("zero", &[("d", 2.0)]);
        assert!(fokker_planck_1d(&k2, grid, &init, 1.0, 0.01, &[1.0]).is_err());
        let k = kernel("zero", &[]);
        assert!(fokker_planck_1d(&k, grid, &init[..7], 1.0, 0.01, &[1.0]).is_err());
        assert!(fokker_planck_1d(&k, grid, &init, 1.0, 0.01, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn picard_guards_and_zero_kernel() {
        let law = InitialLaw::PointMass(alloc::vec![0.0]);
        let c = SimConfig::new(kernel("zero", &[]), 1000, 0.5, 0.05, law, 2);
        assert!(picard_solve(&c, 3, 999, Bandwidth::Silverman, 1).is_err());
        let r = picard_solve(&c, 3, 1000, Bandwidth::Silverman, 5).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.estimates.len(), 3);
        let var = r.estimates[2].moments().1[0];
        // sigma^2 T = 1 with 1000 samples
        assert!((var - 1.0).abs() < 0.15, "{var}");
    }
}
