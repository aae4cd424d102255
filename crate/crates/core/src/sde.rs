//! Euler–Maruyama integration of the interacting particle system.
//!
//! One step maps `X^i` to `X^i + drift^i dt + sigma sqrt(dt) xi^i`, where
//! `xi^i` is read from particle `i`'s counter stream at the current step
//! index. Positions are stored flat (`N x d`, row-major).

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::math::{norm, round, sqrt};
use crate::par;
use crate::rng::{derive_seed, CounterRng, Domain};

/// Law of the i.i.d. initial positions.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    PointMass(Vec<f64>),
    /// Independent coordinates with the given means and variances.
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
}

impl InitialLaw {
    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::PointMass(x) => x.len(),
            InitialLaw::Gaussian { mean, .. } => mean.len(),
            InitialLaw::UniformBox { lo, .. } => lo.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        match self {
            InitialLaw::PointMass(x) => {
                if x.is_empty() || !finite(x) {
                    return Err(Error::constraint("point mass location must be finite"));
                }
            }
            InitialLaw::Gaussian { mean, var } => {
                if mean.is_empty() || mean.len() != var.len() {
                    return Err(Error::constraint("gaussian mean and variance lengths differ"));
                }
                if !finite(mean) || !var.iter().all(|v| v.is_finite() && *v >= 0.0) {
                    return Err(Error::constraint("gaussian variance must be finite and >= 0"));
                }
            }
            InitialLaw::UniformBox { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::constraint("uniform box bounds lengths differ"));
                }
                if !finite(lo) || !finite(hi) || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::constraint("uniform box needs finite lo < hi"));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            InitialLaw::PointMass(x) => x.clone(),
            InitialLaw::Gaussian { mean, .. } => mean.clone(),
            InitialLaw::UniformBox { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
        }
    }

    /// Per-coordinate variance.
    pub fn variance(&self) -> Vec<f64> {
        match self {
            InitialLaw::PointMass(x) => alloc::vec![0.0; x.len()],
            InitialLaw::Gaussian { var, .. } => var.clone(),
            InitialLaw::UniformBox { lo, hi } => {
                lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a) / 12.0).collect()
            }
        }
    }

    /// Draws the initial position of the particle owning `stream`.
    pub fn sample_into(&self, seed: u64, stream: u32, out: &mut [f64]) {
        let rng = CounterRng::new(seed, Domain::Initial);
        match self {
            InitialLaw::PointMass(x) => out.copy_from_slice(x),
            InitialLaw::Gaussian { mean, var } => {
                rng.normals(stream, 0, out);
                for k in 0..out.len() {
                    out[k] = mean[k] + sqrt(var[k]) * out[k];
                }
            }
            InitialLaw::UniformBox { lo, hi } => {
                rng.uniforms(stream, 0, out);
                for k in 0..out.len() {
                    out[k] = lo[k] + (hi[k] - lo[k]) * out[k];
                }
            }
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_particles: usize,
    pub dim: usize,
    pub horizon: f64,
    pub dt: f64,
    /// Coefficient of `dW`; the generator is `(sigma^2 / 2) Laplacian`.
    pub diffusion: f64,
    pub kernel: KernelSpec,
    pub initial_law: InitialLaw,
    pub seed: u64,
    /// Caps `|drift|` at `taming / sqrt(dt)`.
    pub taming: Option<f64>,
    /// Number of leading particles with the interaction removed (0 = full system).
    pub partial_r: Option<usize>,
}

/// The diffusion coefficient matching a generator `Laplacian` (unit-variance
/// rate two) rather than `Laplacian / 2`.
pub const DEFAULT_DIFFUSION: f64 = core::f64::consts::SQRT_2;

impl SimConfig {
    /// A config with `sigma = sqrt 2`, no taming and the full system.
    pub fn new(
        kernel: KernelSpec,
        n_particles: usize,
        horizon: f64,
        dt: f64,
        initial_law: InitialLaw,
        seed: u64,
    ) -> Self {
        Self {
            n_particles,
            dim: kernel.dim(),
            horizon,
            dt,
            diffusion: DEFAULT_DIFFUSION,
            kernel,
            initial_law,
            seed,
            taming: None,
            partial_r: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 1 {
            return Err(Error::constraint("n_particles >= 1"));
        }
        if u32::try_from(self.n_particles).is_err() {
            return Err(Error::constraint("n_particles < 2^32"));
        }
        if self.dim < 1 {
            return Err(Error::constraint("dim >= 1"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::constraint("horizon > 0"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::constraint("dt > 0"));
        }
        let steps = self.horizon / self.dt;
        if steps < 0.5 || (steps - round(steps)).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::constraint("dt divides horizon (to 1e-9 relative)"));
        }
        if !(self.diffusion > 0.0) || !self.diffusion.is_finite() {
            return Err(Error::constraint("diffusion > 0"));
        }
        if self.kernel.dim() != self.dim {
            return Err(Error::constraint("kernel dimension equals dim"));
        }
        self.initial_law.validate()?;
        if self.initial_law.dim() != self.dim {
            return Err(Error::constraint("initial law dimension equals dim"));
        }
        if let Some(t) = self.taming {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::constraint("taming > 0"));
            }
        }
        if let Some(r) = self.partial_r {
            if r >= self.n_particles {
                return Err(Error::constraint("partial_r < n_particles"));
            }
        }
        Ok(())
    }

    /// `round(T / dt)`.
    pub fn n_steps(&self) -> u64 {
        round(self.horizon / self.dt) as u64
    }

    pub fn r(&self) -> usize {
        self.partial_r.unwrap_or(0)
    }

    /// Copy with the seed of the `index`-th independent replica.
    pub fn replica(&self, index: u64) -> Self {
        let mut c = self.clone();
        c.seed = derive_seed(self.seed, index);
        c
    }
}

/// Positions of all particles at one grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub time: f64,
    pub step_index: u64,
    pub dim: usize,
    /// Flat `N x d`, row-major.
    pub positions: Vec<f64>,
    /// Noise stream of each particle.
    pub streams: Vec<u32>,
}

impl ParticleEnsemble {
    /// Samples the initial law, particle `i` reading stream `i`.
    pub fn initial(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let mut positions = alloc::vec![0.0; config.n_particles * d];
        for (i, x) in positions.chunks_mut(d).enumerate() {
            config.initial_law.sample_into(config.seed, i as u32, x);
        }
        Ok(Self {
            time: 0.0,
            step_index: 0,
            dim: d,
            positions,
            streams: (0..config.n_particles as u32).collect(),
        })
    }

    /// Ensemble with explicit positions and streams.
    pub fn from_positions(positions: Vec<f64>, dim: usize, streams: Vec<u32>) -> Result<Self> {
        if dim == 0 || positions.len() != dim * streams.len() {
            return Err(Error::usage("positions must hold one row of length dim per stream"));
        }
        Ok(Self {
            time: 0.0,
            step_index: 0,
            dim,
            positions,
            streams,
        })
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }
}

/// Recorded snapshots, and optionally every Brownian increment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBlock {
    pub n_particles: usize,
    pub dim: usize,
    pub dt: f64,
    pub record_every: u64,
    pub times: Vec<f64>,
    pub step_indices: Vec<u64>,
    /// Concatenated flat snapshots.
    pub snapshots: Vec<f64>,
    /// Standard Brownian increments `W_{t+dt} - W_t` for every step,
    /// concatenated (`n_steps x N x d`).
    pub increments: Option<Vec<f64>>,
}

impl TrajectoryBlock {
    fn new(n: usize, d: usize, dt: f64, record_every: u64, keep_increments: bool) -> Self {
        Self {
            n_particles: n,
            dim: d,
            dt,
            record_every,
            times: Vec::new(),
            step_indices: Vec::new(),
            snapshots: Vec::new(),
            increments: keep_increments.then(Vec::new),
        }
    }

    fn push(&mut self, e: &ParticleEnsemble) {
        self.times.push(e.time);
        self.step_indices.push(e.step_index);
        self.snapshots.extend_from_slice(&e.positions);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn row(&self) -> usize {
        self.n_particles * self.dim
    }

    pub fn snapshot(&self, k: usize) -> &[f64] {
        &self.snapshots[k * self.row()..(k + 1) * self.row()]
    }

    pub fn position(&self, k: usize, i: usize) -> &[f64] {
        let s = self.snapshot(k);
        &s[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.snapshot(self.len() - 1)
    }

    pub fn n_increment_steps(&self) -> usize {
        self.increments.as_ref().map_or(0, |v| v.len() / self.row())
    }

    /// Brownian increments of step `k` (from `t_k` to `t_{k+1}`).
    pub fn increment(&self, k: usize) -> Option<&[f64]> {
        let row = self.row();
        self.increments.as_ref().map(|v| &v[k * row..(k + 1) * row])
    }

    /// Index of the snapshot recorded at `t` (up to rounding of the grid).
    pub fn index_of_time(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.dt.max(t.abs() * 1e-3);
        let i = self.times.partition_point(|s| *s < t - tol);
        (i < self.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    /// Keeps only the coordinates of particles in `keep` (increments included).
    pub fn select_particles(&self, keep: Range<usize>) -> Self {
        let d = self.dim;
        let pick = |flat: &[f64]| -> Vec<f64> {
            flat.chunks(self.row())
                .flat_map(|s| s[keep.start * d..keep.end * d].iter().copied())
                .collect()
        };
        Self {
            n_particles: keep.len(),
            dim: d,
            dt: self.dt,
            record_every: self.record_every,
            times: self.times.clone(),
            step_indices: self.step_indices.clone(),
            snapshots: pick(&self.snapshots),
            increments: self.increments.as_ref().map(|v| pick(v)),
        }
    }
}

/// `sum_{j in range, j != i} b(t, x^i, x^j)` for every `i`, unscaled and
/// masked, written into `out` (`N x d`). Rows of particles outside `rows`
/// are left untouched.
pub(crate) fn pair_sums(
    kernel: &KernelSpec,
    t: f64,
    positions: &[f64],
    d: usize,
    rows: Range<usize>,
    range: Range<usize>,
    out: &mut [f64],
) {
    match kernel.kind() {
        KernelKind::Zero => {
            out[rows.start * d..rows.end * d].fill(0.0);
        }
        KernelKind::LinearOu => {
            // sum_j (x^j - x^i) collapses to one pass over the range.
            let mut total = alloc::vec![0.0; d];
            for j in range.clone() {
                for k in 0..d {
                    total[k] += positions[j * d + k];
                }
            }
            for i in rows {
                let x = &positions[i * d..(i + 1) * d];
                let inside = range.contains(&i);
                let count = (range.len() - usize::from(inside)) as f64;
                for k in 0..d {
                    let own = if inside { x[k] } else { 0.0 };
                    out[i * d + k] = (total[k] - own) - count * x[k];
                }
            }
        }
        _ => {
            let block = &mut out[rows.start * d..rows.end * d];
            par::for_each_chunk(block, d, |local, acc| {
                let i = rows.start + local;
                acc.fill(0.0);
                let x = &positions[i * d..(i + 1) * d];
                kernel.accumulate_pairs(t, x, positions, range.clone(), Some(i), acc);
            });
        }
    }
}

/// Interaction drift of the (partial) system: rows `< r` are zero, the
/// others carry `(1/N) sum_{j >= r, j != i} b(t, x^i, x^j)`.
pub fn system_drift(kernel: &KernelSpec, t: f64, positions: &[f64], d: usize, r: usize, out: &mut [f64]) {
    let n = positions.len() / d;
    out[..r * d].fill(0.0);
    pair_sums(kernel, t, positions, d, r..n, r..n, out);
    let inv = 1.0 / n as f64;
    for v in &mut out[r * d..] {
        *v *= inv;
    }
}

fn tame(drift: &mut [f64], cap: f64) {
    let m = norm(drift);
    if m > cap {
        let s = cap / m;
        for v in drift {
            *v *= s;
        }
    }
}

/// Applies the Euler–Maruyama update given the drift array and writes the
/// standard increments `sqrt(dt) xi` into `dw` when provided.
fn advance(
    config: &SimConfig,
    state: &ParticleEnsemble,
    drift: &mut [f64],
    dw: Option<&mut [f64]>,
) -> Result<ParticleEnsemble> {
    let d = state.dim;
    let dt = config.dt;
    let sqdt = sqrt(dt);
    let sigma = config.diffusion;
    let rng = CounterRng::new(config.seed, Domain::Increments);
    if let Some(cap) = config.taming {
        for row in drift.chunks_mut(d) {
            tame(row, cap / sqdt);
        }
    }
    let mut next = state.positions.clone();
    let step = state.step_index;
    par::for_each_chunk(&mut next, d, |i, x| {
        let mut xi = [0.0f64; 16];
        let mut heap = Vec::new();
        let noise: &mut [f64] = if d <= 16 {
            &mut xi[..d]
        } else {
            heap.resize(d, 0.0);
            &mut heap
        };
        rng.normals(state.streams[i], step, noise);
        for k in 0..d {
            x[k] += drift[i * d + k] * dt + sigma * sqdt * noise[k];
        }
    });
    let time = (step + 1) as f64 * dt;
    if let Some(bad) = next.iter().position(|v| !v.is_finite()) {
        return Err(Error::BlowUp {
            particle: bad / d,
            time,
        });
    }
    if let Some(dw) = dw {
        // x_new - x_old - drift dt = sigma dW; recomputing from the stream
        // keeps dW exact instead of differencing rounded positions.
        for (i, row) in dw.chunks_mut(d).enumerate() {
            rng.normals(state.streams[i], step, row);
            for v in row.iter_mut() {
                *v *= sqdt;
            }
        }
    }
    Ok(ParticleEnsemble {
        time,
        step_index: step + 1,
        dim: d,
        positions: next,
        streams: state.streams.clone(),
    })
}

fn check_step(config: &SimConfig, state: &ParticleEnsemble) -> Result<()> {
    if state.dim != config.dim || state.len() != config.n_particles {
        return Err(Error::usage("ensemble shape does not match the config"));
    }
    if state.time + config.dt > config.horizon + 0.5 * config.dt {
        return Err(Error::usage("step would pass the horizon"));
    }
    Ok(())
}

/// One Euler–Maruyama step of the particle system.
pub fn step(config: &SimConfig, state: &ParticleEnsemble) -> Result<ParticleEnsemble> {
    config.validate()?;
    check_step(config, state)?;
    step_unchecked(config, state, None)
}

fn step_unchecked(config: &SimConfig, state: &ParticleEnsemble, dw: Option<&mut [f64]>) -> Result<ParticleEnsemble> {
    let mut drift = alloc::vec![0.0; state.positions.len()];
    system_drift(&config.kernel, state.time, &state.positions, state.dim, config.r(), &mut drift);
    advance(config, state, &mut drift, dw)
}

fn integrate<F>(
    config: &SimConfig,
    start: ParticleEnsemble,
    record_every: u64,
    keep_increments: bool,
    mut one_step: F,
) -> Result<TrajectoryBlock>
where
    F: FnMut(&ParticleEnsemble, Option<&mut [f64]>) -> Result<ParticleEnsemble>,
{
    if record_every < 1 {
        return Err(Error::usage("record_every must be >= 1"));
    }
    let n_steps = config.n_steps();
    let row = start.positions.len();
    let mut block = TrajectoryBlock::new(start.len(), start.dim, config.dt, record_every, keep_increments);
    if let Some(inc) = block.increments.as_mut() {
        inc.reserve(n_steps as usize * row);
    }
    block.push(&start);
    let mut state = start;
    let mut dw = alloc::vec![0.0; if keep_increments { row } else { 0 }];
    for k in 1..=n_steps {
        state = one_step(&state, keep_increments.then_some(&mut dw[..]))?;
        if let Some(inc) = block.increments.as_mut() {
            inc.extend_from_slice(&dw);
        }
        if k % record_every == 0 || k == n_steps {
            block.push(&state);
        }
    }
    Ok(block)
}

/// Integrates from a sample of the initial law to the horizon.
///
/// Snapshot `k` is kept when `k % record_every == 0`; the terminal state is
/// always kept. The result is a pure function of the config.
pub fn run(config: &SimConfig, record_every: u64, keep_increments: bool) -> Result<TrajectoryBlock> {
    let start = ParticleEnsemble::initial(config)?;
    run_from(config, start, record_every, keep_increments)
}

/// Like [`run`] but from given positions and streams.
pub fn run_from(
    config: &SimConfig,
    start: ParticleEnsemble,
    record_every: u64,
    keep_increments: bool,
) -> Result<TrajectoryBlock> {
    config.validate()?;
    if start.dim != config.dim || start.len() != config.n_particles {
        return Err(Error::usage("ensemble shape does not match the config"));
    }
    integrate(config, start, record_every, keep_increments, |s, dw| {
        step_unchecked(config, s, dw)
    })
}

/// Integrates `dX = v(t, X) dt + sigma dW` for an externally supplied
/// mean-field drift `v`; `config.kernel` and `partial_r` are ignored.
pub fn run_linear<F>(config: &SimConfig, record_every: u64, density_drift: F) -> Result<TrajectoryBlock>
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync + Send,
{
    let start = ParticleEnsemble::initial(config)?;
    let d = config.dim;
    integrate(config, start, record_every, false, |s, dw| {
        let mut drift = alloc::vec![0.0; s.positions.len()];
        par::for_each_chunk(&mut drift, d, |i, out| {
            density_drift(s.time, s.particle(i), out);
        });
        if let Some(bad) = drift.iter().position(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                particle: bad / d,
                time: s.time,
            });
        }
        advance(config, s, &mut drift, dw)
    })
}

/// Runs `runs` independent replicas (seeds from [`SimConfig::replica`]) and
/// maps each trajectory through `f`, keeping replica order.
pub fn run_replicas<T, F>(
    config: &SimConfig,
    runs: usize,
    record_every: u64,
    keep_increments: bool,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, TrajectoryBlock) -> Result<T> + Sync + Send,
{
    config.validate()?;
    par::map_range(runs, |k| {
        let c = config.replica(k as u64);
        run(&c, record_every, keep_increments).and_then(|traj| f(k, traj))
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelParams;

    fn kernel(name: &str, pairs: &[(&str, f64)]) -> KernelSpec {
        let p: KernelParams = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        KernelSpec::builtin(name, &p).unwrap()
    }

    fn config(k: KernelSpec, n: usize, law: InitialLaw) -> SimConfig {
        SimConfig::new(k, n, 1.0, 0.01, law, 7)
    }

    #[test]
    fn linear_ou_hand_drift() {
        let k = kernel("linear-ou", &[]);
        let mut out = [0.0; 2];
        system_drift(&k, 0.0, &[1.0, -1.0], 1, 0, &mut out);
        assert_eq!(out, [-1.0, 1.0]);
        let gen = kernel("riesz", &[("alpha", 0.5)]);
        let mut out = [0.0; 2];
        // riesz with coincident particles
        system_drift(&gen, 0.0, &[0.3, 0.3], 1, 0, &mut out);
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn linear_fast_path_matches_pairwise_sum() {
        let k = kernel("linear-ou", &[("d", 2.0)]);
        let pos = [0.3, -1.0, 2.0, 0.5, -0.7, 0.1, 1.1, 1.2];
        for r in 0..4 {
            let mut fast = [0.0; 8];
            system_drift(&k, 0.0, &pos, 2, r, &mut fast);
            for i in 0..4 {
                for c in 0..2 {
                    let want: f64 = if i < r {
                        0.0
                    } else {
                        (r..4).filter(|&j| j != i).map(|j| pos[j * 2 + c] - pos[i * 2 + c]).sum::<f64>() / 4.0
                    };
                    assert!((fast[i * 2 + c] - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let k = kernel("zero", &[]);
        let law = InitialLaw::PointMass(alloc::vec![0.0]);
        let mut c = config(k.clone(), 10, law.clone());
        assert!(c.validate().is_ok());
        assert_eq!(c.n_steps(), 100);
        c.dt = 0.03;
        assert!(matches!(c.validate(), Err(Error::ConstraintViolation { .. })));
        c.dt = 0.01;
        c.partial_r = Some(10);
        assert!(c.validate().is_err());
        c.partial_r = Some(9);
        assert!(c.validate().is_ok());
        c.n_particles = 0;
        assert!(c.validate().is_err());
        let mut c = config(k, 3, InitialLaw::PointMass(alloc::vec![0.0, 1.0]));
        assert!(c.validate().is_err());
        c.initial_law = InitialLaw::UniformBox {
            lo: alloc::vec![1.0],
            hi: alloc::vec![1.0],
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_particle_is_driftless() {
        let law = InitialLaw::PointMass(alloc::vec![0.5]);
        let free = run(&config(kernel("zero", &[]), 1, law.clone()), 1, false).unwrap();
        for name in ["linear-ou", "bounded-lipschitz"] {
            let t = run(&config(kernel(name, &[]), 1, law.clone()), 1, false).unwrap();
            assert_eq!(t, free);
        }
    }

    #[test]
    fn runs_are_reproducible_and_record_as_asked() {
        let law = InitialLaw::Gaussian {
            mean: alloc::vec![0.0],
            var: alloc::vec![1.0],
        };
        let c = config(kernel("riesz", &[("alpha", 0.3)]), 20, law);
        let a = run(&c, 7, true).unwrap();
        let b = run(&c, 7, true).unwrap();
        assert_eq!(a, b);
        // 0, 7, ..., 98 and the terminal 100
        assert_eq!(a.len(), 16);
        assert_eq!(a.step_indices.last(), Some(&100));
        assert_eq!(a.n_increment_steps(), 100);
        assert!((a.times[1] - 0.07).abs() < 1e-15);
        assert!(run(&c, 0, false).is_err());
    }

    #[test]
    fn increments_reconstruct_driftless_paths() {
        let c = config(kernel("zero", &[("d", 2.0)]), 5, InitialLaw::PointMass(alloc::vec![0.0, 0.0]));
        let t = run(&c, 1, true).unwrap();
        let mut x = t.snapshot(0).to_vec();
        for k in 0..100 {
            for (a, w) in x.iter_mut().zip(t.increment(k).unwrap()) {
                *a += c.diffusion * w;
            }
        }
        for (a, b) in x.iter().zip(t.last()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn step_guards_horizon_and_detects_blow_up() {
        let c = config(kernel("zero", &[]), 2, InitialLaw::PointMass(alloc::vec![0.0]));
        let mut s = ParticleEnsemble::initial(&c).unwrap();
        s.time = 1.0;
        assert!(matches!(step(&c, &s), Err(Error::Usage(_))));
        let err = run_linear(&c, 1, |_, x, out| out[0] = if x[0] > 1e9 { 1.0 } else { f64::NAN });
        assert!(matches!(err, Err(Error::BlowUp { particle: 0, .. })));
    }

    #[test]
    fn taming_caps_drift() {
        let mut c = config(kernel("zero", &[]), 1, InitialLaw::PointMass(alloc::vec![0.0]));
        c.diffusion = 1e-12;
        c.taming = Some(0.5);
        let t = run_linear(&c, 100, |_, _, out| out[0] = 1e6).unwrap();
        // |drift| dt <= 0.5 sqrt(dt) per step, 100 steps
        assert!((t.last()[0] - 100.0 * 0.5 * 0.1).abs() < 1e-6);
    }
}
