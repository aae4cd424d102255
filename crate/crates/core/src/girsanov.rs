//! Drift energies, Girsanov log-weights and exponential-moment estimators.
//!
//! The drift removed by the partial transform is
//!
//! ```text
//! beta^(r)_i = (1/N) sum_{j != i} b(t, x^i, x^j)     for i < r,
//! beta^(r)_i = (1/N) sum_{j < r}  b(t, x^i, x^j)     for i >= r,
//! ```
//!
//! and `r = 0` stands for the full drift of every particle. Path functionals
//! use left-endpoint evaluation on the Euler–Maruyama grid.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::math::{dot, norm_sq, sqrt};
use crate::par;
use crate::rng::{derive_seed, CounterRng, Domain};
use crate::sde::{pair_sums, run_replicas, SimConfig, TrajectoryBlock};
use crate::stats;

/// Writes `beta^(r)` (`N x d`) for one snapshot.
pub fn beta(kernel: &KernelSpec, t: f64, positions: &[f64], d: usize, r: usize, out: &mut [f64]) {
    let n = positions.len() / d;
    if r == 0 {
        pair_sums(kernel, t, positions, d, 0..n, 0..n, out);
    } else {
        pair_sums(kernel, t, positions, d, 0..r, 0..n, out);
        pair_sums(kernel, t, positions, d, r..n, 0..r, out);
    }
    let inv = 1.0 / n as f64;
    for v in out.iter_mut() {
        *v *= inv;
    }
}

/// Running sums along one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathFunctionalAccumulator {
    /// `sum |beta|^2 dt`.
    pub drift_energy: f64,
    /// `sum beta . dW` with standard Brownian increments; `None` when the
    /// trajectory carried no increments.
    pub ito_sum: Option<f64>,
    pub r: usize,
    /// Diffusion coefficient of the path, used to normalize the weight.
    pub diffusion: f64,
}

impl PathFunctionalAccumulator {
    pub fn new(r: usize, diffusion: f64, with_ito: bool) -> Self {
        Self {
            drift_energy: 0.0,
            ito_sum: with_ito.then_some(0.0),
            r,
            diffusion,
        }
    }

    pub fn add(&mut self, beta: &[f64], dw: Option<&[f64]>, dt: f64) {
        self.drift_energy += norm_sq(beta) * dt;
        if let (Some(s), Some(dw)) = (self.ito_sum.as_mut(), dw) {
            *s += dot(beta, dw);
        }
    }

    /// `log Z = -(1/sigma) sum beta . dW - (1/(2 sigma^2)) sum |beta|^2 dt`,
    /// the density that removes the drift `beta` from `dX = ... + sigma dW`.
    pub fn log_weight(&self) -> Option<f64> {
        let s = self.diffusion;
        self.ito_sum
            .map(|ito| -ito / s - self.drift_energy / (2.0 * s * s))
    }
}

fn check_grid(traj: &TrajectoryBlock, config: &SimConfig, r: usize) -> Result<u64> {
    let n_steps = config.n_steps();
    if traj.n_particles != config.n_particles || traj.dim != config.dim {
        return Err(Error::usage("trajectory shape does not match the config"));
    }
    if traj.dt != config.dt || traj.record_every != 1 || traj.len() as u64 != n_steps + 1 {
        return Err(Error::usage(
            "path functionals need every grid step recorded (record_every = 1) on the config's grid",
        ));
    }
    if r >= config.n_particles {
        return Err(Error::usage("r must be smaller than the number of particles"));
    }
    Ok(n_steps)
}

/// Left-Riemann drift energy and Itô sum of `beta^(r)` along `traj`.
pub fn drift_energy(traj: &TrajectoryBlock, config: &SimConfig, r: usize) -> Result<PathFunctionalAccumulator> {
    let n_steps = check_grid(traj, config, r)?;
    let d = config.dim;
    let mut acc = PathFunctionalAccumulator::new(r, config.diffusion, traj.increments.is_some());
    if config.kernel.is_zero() {
        return Ok(acc);
    }
    let mut b = alloc::vec![0.0; config.n_particles * d];
    for k in 0..n_steps as usize {
        beta(&config.kernel, traj.times[k], traj.snapshot(k), d, r, &mut b);
        acc.add(&b, traj.increment(k), config.dt);
    }
    Ok(acc)
}

/// `log Z_T^(r)` along `traj`.
pub fn weight(traj: &TrajectoryBlock, config: &SimConfig, r: usize) -> Result<f64> {
    if traj.increments.is_none() {
        return Err(Error::usage("the log-weight needs stored Brownian increments"));
    }
    drift_energy(traj, config, r)?
        .log_weight()
        .ok_or_else(|| Error::usage("the log-weight needs stored Brownian increments"))
}

/// Monte Carlo estimate of `ln E exp(alpha F)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpMomentEstimate {
    pub alpha: f64,
    pub log_mean_exp: f64,
    /// 95% percentile-bootstrap interval, widened if needed to contain the
    /// point estimate.
    pub bootstrap_ci: (f64, f64),
    pub n_paths: usize,
    pub diverged_fraction: f64,
}

impl ExpMomentEstimate {
    pub fn overlaps(&self, other: &Self) -> bool {
        self.bootstrap_ci.0 <= other.bootstrap_ci.1 && other.bootstrap_ci.0 <= self.bootstrap_ci.1
    }

    pub fn contains(&self, v: f64) -> bool {
        self.bootstrap_ci.0 <= v && v <= self.bootstrap_ci.1
    }
}

pub const MIN_PATHS: usize = 100;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// `ln mean exp(alpha F_i)` over per-path functionals `F_i` with a
/// bootstrap interval. Non-finite `alpha F_i` count as diverged and are
/// left out of the estimate.
pub fn exp_moment(functionals: &[f64], alpha: f64, seed: u64) -> Result<ExpMomentEstimate> {
    if functionals.len() < MIN_PATHS {
        return Err(Error::usage("exponential moments need at least 100 paths"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain("alpha must be positive"));
    }
    let scaled: Vec<f64> = functionals.iter().map(|f| alpha * f).filter(|v| v.is_finite()).collect();
    let diverged_fraction = 1.0 - scaled.len() as f64 / functionals.len() as f64;
    if scaled.is_empty() {
        return Err(Error::EstimationFailure("every path functional diverged".into()));
    }
    let point = stats::log_mean_exp(&scaled);
    let (lo, hi) = stats::bootstrap_ci(&scaled, stats::log_mean_exp, BOOTSTRAP_RESAMPLES, seed, 0.95);
    Ok(ExpMomentEstimate {
        alpha,
        log_mean_exp: point,
        bootstrap_ci: (lo.min(point), hi.max(point)),
        n_paths: functionals.len(),
        diverged_fraction,
    })
}

/// The second argument of the kernel along a single-pair path functional.
#[derive(Debug, Clone, PartialEq)]
pub enum Partner {
    /// Independent Brownian motion (same diffusion) started at the point.
    Brownian(Vec<f64>),
    /// Deterministic frozen point.
    Frozen(Vec<f64>),
}

/// Samples `int_0^T |b(t, w_t, Y_t)|^2 dt` for a Brownian `w` started at
/// `w0` and the given partner, one value per path. Singular evaluations
/// contribute zero.
#[allow(clippy::too_many_arguments)]
pub fn pair_energy(
    kernel: &KernelSpec,
    horizon: f64,
    dt: f64,
    diffusion: f64,
    w0: &[f64],
    partner: &Partner,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = kernel.dim();
    let y0 = match partner {
        Partner::Brownian(y) | Partner::Frozen(y) => y,
    };
    if w0.len() != d || y0.len() != d {
        return Err(Error::usage("starting points must match the kernel dimension"));
    }
    if !(horizon > 0.0) || !(dt > 0.0) || !(diffusion > 0.0) {
        return Err(Error::domain("horizon, dt and diffusion must be positive"));
    }
    let n_steps = crate::math::round(horizon / dt) as u64;
    let sq = diffusion * sqrt(dt);
    Ok(par::map_range(n_paths, |p| {
        let rng = CounterRng::new(derive_seed(seed, p as u64), Domain::Increments);
        let mut w = w0.to_vec();
        let mut y = y0.clone();
        let mut b = alloc::vec![0.0; d];
        let mut xi = alloc::vec![0.0; d];
        let mut energy = 0.0;
        for k in 0..n_steps {
            let t = k as f64 * dt;
            if !kernel.singular_at(t, &w, &y) {
                kernel.drift(t, &w, &y, &mut b);
                let e = norm_sq(&b);
                if e.is_finite() {
                    energy += e * dt;
                }
            }
            rng.normals(0, k, &mut xi);
            for (a, z) in w.iter_mut().zip(&xi) {
                *a += sq * z;
            }
            if let Partner::Brownian(_) = partner {
                rng.normals(1, k, &mut xi);
                for (a, z) in y.iter_mut().zip(&xi) {
                    *a += sq * z;
                }
            }
        }
        energy
    }))
}

/// One line of the scaling study.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    /// Mean and standard error of the full drift energy under independent
    /// Brownian motions.
    pub full_energy_mean: f64,
    pub full_energy_se: f64,
    /// Mean and standard error of the `r = 1` energy under the partial system.
    pub partial_energy_mean: f64,
    pub partial_energy_se: f64,
    /// Per requested alpha.
    pub exp_moment_full: Vec<Result<ExpMomentEstimate>>,
    pub exp_moment_partial: Vec<Result<ExpMomentEstimate>>,
}

/// For each `N`, simulates `n_paths` driftless systems (reference of the
/// full transform) and `n_paths` partial systems with `r = 1` (reference of
/// the partial transform), reports mean energies and exponential moments.
/// Path `p` uses replica seed `p` for every `N`, so noise is shared across
/// system sizes.
pub fn novikov_scaling_study(
    base: &SimConfig,
    n_list: &[usize],
    n_paths: usize,
    alphas: &[f64],
) -> Result<Vec<ScalingRow>> {
    if n_list.is_empty() || n_list.iter().any(|n| *n < 2) || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("N list must be increasing with every N >= 2"));
    }
    if alphas.is_empty() {
        return Err(Error::usage("need at least one alpha"));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut with_kernel = base.clone();
        with_kernel.n_particles = n;
        with_kernel.partial_r = None;
        let mut driftless = with_kernel.clone();
        driftless.kernel = KernelSpec::builtin(
            "zero",
            &[("d".into(), base.dim as f64)].into_iter().collect(),
        )?;
        let mut partial = with_kernel.clone();
        partial.partial_r = Some(1);

        let full = run_replicas(&driftless, n_paths, 1, false, |_, traj| {
            drift_energy(&traj, &with_kernel, 0).map(|a| a.drift_energy)
        })?;
        let part = run_replicas(&partial, n_paths, 1, false, |_, traj| {
            drift_energy(&traj, &with_kernel, 1).map(|a| a.drift_energy)
        })?;
        let boot = derive_seed(base.seed, n as u64);
        rows.push(ScalingRow {
            n,
            full_energy_mean: stats::mean(&full),
            full_energy_se: stats::std_err(&full),
            partial_energy_mean: stats::mean(&part),
            partial_energy_se: stats::std_err(&part),
            exp_moment_full: alphas.iter().map(|a| exp_moment(&full, *a, boot)).collect(),
            exp_moment_partial: alphas.iter().map(|a| exp_moment(&part, *a, boot ^ 1)).collect(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelParams;
    use crate::sde::{run, InitialLaw};

    fn kernel(name: &str, pairs: &[(&str, f64)]) -> KernelSpec {
        let p: KernelParams = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        KernelSpec::builtin(name, &p).unwrap()
    }

    fn frozen(config: &SimConfig, x: &[f64]) -> TrajectoryBlock {
        let n = config.n_steps() as usize;
        TrajectoryBlock {
            n_particles: config.n_particles,
            dim: config.dim,
            dt: config.dt,
            record_every: 1,
            times: (0..=n).map(|k| k as f64 * config.dt).collect(),
            step_indices: (0..=n as u64).collect(),
            snapshots: x.iter().copied().cycle().take(x.len() * (n + 1)).collect(),
            increments: Some(alloc::vec![0.0; x.len() * n]),
        }
    }

    #[test]
    fn frozen_pair_energy_by_hand() {
        let c = SimConfig::new(kernel("linear-ou", &[]), 2, 1.0, 0.01, InitialLaw::PointMass(alloc::vec![0.0]), 1);
        let traj = frozen(&c, &[1.0, -1.0]);
        let acc = drift_energy(&traj, &c, 1).unwrap();
        assert!((acc.drift_energy - 2.0).abs() < 1e-12);
        assert_eq!(acc.ito_sum, Some(0.0));
        // full drifts are -1 and +1
        assert!((drift_energy(&traj, &c, 0).unwrap().drift_energy - 2.0).abs() < 1e-12);
        assert!((weight(&traj, &c, 1).unwrap() + 2.0 / (2.0 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_kernel_has_no_energy_and_unit_weight() {
        let c = SimConfig::new(kernel("zero", &[]), 5, 1.0, 0.01, InitialLaw::PointMass(alloc::vec![0.0]), 1);
        let traj = run(&c, 1, true).unwrap();
        for r in 0..5 {
            let acc = drift_energy(&traj, &c, r).unwrap();
            assert_eq!(acc.drift_energy, 0.0);
            assert_eq!(weight(&traj, &c, r).unwrap(), 0.0);
        }
        let e = exp_moment(&[0.0; 150], 0.7, 3).unwrap();
        assert_eq!(e.log_mean_exp, 0.0);
        assert_eq!(e.bootstrap_ci, (0.0, 0.0));
    }

    #[test]
    fn partial_rows_match_full_drift_rows() {
        let c = SimConfig::new(
            kernel("riesz", &[("alpha", 0.4)]),
            6,
            0.1,
            0.01,
            InitialLaw::Gaussian {
                mean: alloc::vec![0.0],
                var: alloc::vec![1.0],
            },
            9,
        );
        let traj = run(&c, 1, false).unwrap();
        let (mut full, mut part) = ([0.0; 6], [0.0; 6]);
        beta(&c.kernel, 0.0, traj.snapshot(3), 1, 0, &mut full);
        beta(&c.kernel, 0.0, traj.snapshot(3), 1, 2, &mut part);
        assert_eq!(full[..2], part[..2]);
    }

    #[test]
    fn grid_and_increment_errors() {
        let c = SimConfig::new(kernel("linear-ou", &[]), 3, 1.0, 0.01, InitialLaw::PointMass(alloc::vec![0.0]), 1);
        let sparse = run(&c, 2, true).unwrap();
        assert!(matches!(drift_energy(&sparse, &c, 0), Err(Error::Usage(_))));
        let bare = run(&c, 1, false).unwrap();
        assert!(matches!(weight(&bare, &c, 1), Err(Error::Usage(_))));
        assert!(drift_energy(&bare, &c, 3).is_err());
    }

    #[test]
    fn exp_moment_guards() {
        assert!(matches!(exp_moment(&[1.0; 99], 1.0, 0), Err(Error::Usage(_))));
        let mut v = alloc::vec![f64::INFINITY; 100];
        assert!(matches!(exp_moment(&v, 1.0, 0), Err(Error::EstimationFailure(_))));
        v[0] = 2.0;
        let e = exp_moment(&v, 0.5, 0).unwrap();
        assert_eq!(e.log_mean_exp, 1.0);
        assert!((e.diverged_fraction - 0.99).abs() < 1e-12);
    }

    #[test]
    fn bounded_pair_functional_is_capped() {
        let k = kernel("bounded-lipschitz", &[("c", 1.0), ("omega", 3.0)]);
        let v = pair_energy(&k, 1.0, 0.01, 1.0, &[0.0], &Partner::Brownian(alloc::vec![0.0]), 200, 4).unwrap();
        assert!(v.iter().all(|e| *e <= 1.0 + 1e-12 && *e >= 0.0));
        let e = exp_moment(&v, 0.1, 1).unwrap();
        assert!(e.log_mean_exp <= 0.1);
        let f = pair_energy(&k, 1.0, 0.01, 1.0, &[0.0], &Partner::Frozen(alloc::vec![0.0]), 100, 4).unwrap();
        assert_eq!(f.len(), 100);
    }
}
