//! Subcommand dispatch: runs one study end to end, writes its CSV and
//! binary outputs and returns the manifest.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chaoslab_core::chaos::{self, DiagnosticsReport, DistanceMethod, Observable, PathWeight, RunSet, TestFunction};
use chaoslab_core::gauss_oracle::{conditioning_windows, lemma1_sweep};
use chaoslab_core::girsanov::{self, novikov_scaling_study};
use chaoslab_core::kernels::{classify, KernelKind};
use chaoslab_core::meanfield::{
    density_decay_check, estimate_distance, exact_ou_density, fokker_planck_1d, heat_density, picard_solve,
    Bandwidth, DensityEstimate, DensityRepr, FpGrid,
};
use chaoslab_core::sde::{self, InitialLaw, SimConfig, TrajectoryBlock};
use chaoslab_core::stats;

use crate::config::{render, ResolvedConfig};
use crate::manifest::{config_hash, now_rfc3339, OutputRecord, RunManifest};
use crate::traj_io::{write_marginals_csv, write_trajectory, TrajError, TrajectoryHeader};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    CheckKernel,
    Simulate,
    Meanfield,
    Girsanov,
    Chaos,
    BoundOracle,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::CheckKernel => "check-kernel",
            Subcommand::Simulate => "simulate",
            Subcommand::Meanfield => "meanfield",
            Subcommand::Girsanov => "girsanov",
            Subcommand::Chaos => "chaos",
            Subcommand::BoundOracle => "bound-oracle",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DispatchError {
    #[error(transparent)]
    Core(#[from] chaoslab_core::Error),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Traj(#[from] TrajError),
    #[error("{0}")]
    Usage(String),
}

impl DispatchError {
    /// Module that raised the error.
    pub fn origin(&self) -> &'static str {
        match self {
            DispatchError::Core(e) | DispatchError::Config(crate::config::ConfigError::Core(e)) => e.origin(),
            _ => "cli_io",
        }
    }
}

type Result<T> = std::result::Result<T, DispatchError>;

/// Collects output records while a study runs.
struct Outputs {
    dir: PathBuf,
    records: Vec<OutputRecord>,
}

impl Outputs {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.records.push(OutputRecord {
            path: name.to_string(),
            kind: "csv".into(),
            rows: rows.len() as u64,
        });
        Ok(())
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, value: &[T]) -> Result<()> {
        let file = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(file, value)?;
        self.records.push(OutputRecord {
            path: name.to_string(),
            kind: "json".into(),
            rows: value.len() as u64,
        });
        Ok(())
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Runs `sub` on `cfg`, writing into `out` (created if missing).
pub fn dispatch(sub: Subcommand, cfg: &ResolvedConfig, out: &Path) -> Result<RunManifest> {
    let started = now_rfc3339();
    fs::create_dir_all(out)?;
    let rendered = render(cfg);
    let mut outputs = Outputs {
        dir: out.to_path_buf(),
        records: Vec::new(),
    };
    let config_name = format!("{}.config", sub.name());
    fs::write(outputs.path(&config_name), &rendered)?;
    outputs.records.push(OutputRecord {
        path: config_name,
        kind: "config".into(),
        rows: rendered.lines().count() as u64,
    });
    match sub {
        Subcommand::CheckKernel => check_kernel(cfg, &mut outputs)?,
        Subcommand::BoundOracle => bound_oracle(cfg, &mut outputs)?,
        Subcommand::Simulate => simulate(cfg, &mut outputs)?,
        Subcommand::Meanfield => meanfield(cfg, &mut outputs)?,
        Subcommand::Girsanov => girsanov_study(cfg, &mut outputs)?,
        Subcommand::Chaos => chaos_study(cfg, &mut outputs)?,
    }
    let manifest = RunManifest {
        config_hash: config_hash(&rendered),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.sim.seed,
        subcommand: sub.name().to_string(),
        started,
        finished: now_rfc3339(),
        outputs: outputs.records,
    };
    let file = File::create(out.join(manifest_name(sub)))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &manifest)?;
    Ok(manifest)
}

/// One manifest per subcommand, so studies can share an output directory.
pub fn manifest_name(sub: Subcommand) -> String {
    format!("{}.manifest.json", sub.name())
}

fn check_kernel(cfg: &ResolvedConfig, out: &mut Outputs) -> Result<()> {
    let spec = cfg.kernel()?;
    let c = classify(&spec, cfg.plan.radius)?;
    let e = spec.exponents();
    println!(
        "{}: {} (d/p + 2/q = {:.6}, local integral {}, global integral {}{})",
        spec.name(),
        c.verdict,
        c.exponent_sum,
        c.local.integral,
        c.global.integral,
        if c.best_effort { ", best effort" } else { "" }
    );
    out.csv(
        "check_kernel.csv",
        &[
            "kernel", "d", "p", "q", "exponent_sum", "exponent_test", "local_integral", "local_finite",
            "global_integral", "global_finite", "h2_tail_ok", "best_effort", "verdict",
        ],
        &[vec![
            spec.name().to_string(),
            e.d.to_string(),
            num(e.p),
            num(e.q),
            num(c.exponent_sum),
            c.exponent_test.to_string(),
            num(c.local.integral),
            c.local.finite.to_string(),
            num(c.global.integral),
            c.global.finite.to_string(),
            c.h2_tail_ok.to_string(),
            c.best_effort.to_string(),
            c.verdict.label().to_string(),
        ]],
    )
}

fn bound_oracle(cfg: &ResolvedConfig, out: &mut Outputs) -> Result<()> {
    let spec = cfg.kernel()?;
    let p = &cfg.plan;
    let t1 = p.window_start;
    let windows: Vec<(f64, f64)> = p.window_widths.iter().map(|w| (t1, t1 + w)).collect();
    let shifts: Vec<Vec<f64>> = p.shifts.iter().map(|s| vec![*s; cfg.sim.dim]).collect();
    let rep = lemma1_sweep(&spec, &windows, &shifts)?;
    let slope = opt(rep.fitted_slope);
    let rows: Vec<Vec<String>> = rep
        .windows
        .iter()
        .map(|w| {
            vec![
                num(w.t1),
                num(w.t2),
                num(w.width()),
                num(w.shift[0]),
                num(w.integral),
                num(rep.bound(w.width())),
                slope.clone(),
            ]
        })
        .collect();
    out.csv(
        "bound_windows.csv",
        &["t1", "t2", "window_width", "shift", "integral", "bound", "slope"],
        &rows,
    )?;
    let alpha = p.alphas.first().copied().unwrap_or(1.0);
    let cw = conditioning_windows(rep.c0_estimate, p.kappa, cfg.sim.horizon, spec.exponents(), alpha)?;
    println!(
        "exponent {:.6}, fitted slope {}, c0 {:.6}",
        rep.exponent,
        opt(rep.fitted_slope),
        rep.c0_estimate
    );
    out.csv(
        "bound_summary.csv",
        &["exponent", "fitted_slope", "c0_estimate", "kappa", "alpha", "lemma3_window", "est1_delta", "n_windows"],
        &[vec![
            num(rep.exponent),
            opt(rep.fitted_slope),
            num(rep.c0_estimate),
            num(p.kappa),
            num(alpha),
            num(cw.lemma3_window),
            num(cw.est1_delta),
            cw.n_windows.to_string(),
        ]],
    )
}

/// Config for system size `n`, replica `k`. A single run keeps the config
/// seed; several runs use derived replica seeds.
fn cell_config(base: &SimConfig, n: usize, k: usize, runs: usize) -> SimConfig {
    let mut c = base.clone();
    c.n_particles = n;
    if runs > 1 {
        c = c.replica(k as u64);
    }
    c
}

fn header(cfg: &ResolvedConfig, c: &SimConfig) -> TrajectoryHeader {
    TrajectoryHeader {
        diffusion: c.diffusion,
        seed: c.seed,
        kernel: cfg.kernel_name.clone(),
    }
}

fn simulate(cfg: &ResolvedConfig, out: &mut Outputs) -> Result<()> {
    let base = cfg.sim_config()?;
    let runs = cfg.plan.runs;
    for n in cfg.n_list() {
        let mut check = base.clone();
        check.n_particles = n;
        check.validate()?;
        // trajectories are written as they finish; records keep run order
        let records = par_map(runs, |k| -> Result<Vec<OutputRecord>> {
            let c = cell_config(&base, n, k, runs);
            let traj = sde::run(&c, cfg.sim.record_every, cfg.plan.keep_increments)?;
            let mut recs = Vec::new();
            let name = format!("trajectory_N{n}_run{k}.bin");
            let mut w = BufWriter::new(File::create(out.path(&name))?);
            write_trajectory(&mut w, &traj, &header(cfg, &c))?;
            recs.push(OutputRecord {
                path: name,
                kind: "trajectory".into(),
                rows: traj.len() as u64,
            });
            if k == 0 {
                let name = format!("marginals_N{n}.csv");
                let rows = write_marginals_csv(File::create(out.path(&name))?, &traj, cfg.plan.csv_particles)?;
                recs.push(OutputRecord {
                    path: name,
                    kind: "csv".into(),
                    rows: rows as u64,
                });
            }
            Ok(recs)
        })?;
        out.records.extend(records.into_iter().flatten());
    }
    Ok(())
}

/// Ordered parallel map over `0..n` on the current rayon pool.
fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

fn isotropic_var(law: &InitialLaw) -> Option<(Vec<f64>, f64)> {
    match law {
        InitialLaw::PointMass(x) => Some((x.clone(), 0.0)),
        InitialLaw::Gaussian { mean, var } if var.iter().all(|v| *v == var[0]) => Some((mean.clone(), var[0])),
        _ => None,
    }
}

/// Closed-form law at `t` for the solvable kernels, `None` otherwise.
fn exact_law(c: &SimConfig, t: f64) -> Result<Option<DensityEstimate>> {
    match c.kernel.kind() {
        KernelKind::LinearOu => match isotropic_var(&c.initial_law) {
            Some((m, v)) => Ok(Some(exact_ou_density(t, &m, v, c.diffusion)?)),
            None => Ok(None),
        },
        KernelKind::Zero => match &c.initial_law {
            InitialLaw::UniformBox { .. } => Ok(None),
            law => Ok(Some(heat_density(t, &law.mean(), &law.variance(), c.diffusion)?)),
        },
        _ => Ok(None),
    }
}

fn bandwidth(cfg: &ResolvedConfig) -> Bandwidth {
    match cfg.plan.bandwidth.parse::<f64>() {
        Ok(h) => Bandwidth::Fixed(h),
        Err(_) => Bandwidth::Silverman,
    }
}

fn meanfield(cfg: &ResolvedConfig, out: &mut Outputs) -> Result<()> {
    let base = cfg.sim_config()?;
    let p = &cfg.plan;
    let times = cfg.times();
    let want = |m: &str| p.method == "all" || p.method == m;
    let mut methods: Vec<(&'static str, Vec<DensityEstimate>)> = Vec::new();

    if want("exact") {
        let est: Option<Vec<DensityEstimate>> =
            times.iter().map(|&t| exact_law(&base, t)).collect::<Result<Option<Vec<_>>>>()?;
        match est {
            Some(v) => methods.push(("exact", v)),
            None if p.method == "exact" => {
                return Err(DispatchError::Usage(
                    "no closed form for this kernel and initial law (exact needs zero or linear-ou with isotropic start)"
                        .into(),
                ))
            }
            None => {}
        }
    }
    let mut picard_rows = Vec::new();
    if want("picard") {
        let res = picard_solve(&base, p.iterations, p.n_ref, bandwidth(cfg), cfg.sim.record_every)?;
        let mut picked = Vec::new();
        for &t in &times {
            let e = res
                .estimates
                .iter()
                .find(|e| (e.time - t).abs() <= 1e-9 * t.abs().max(1.0))
                .ok_or_else(|| DispatchError::Usage(format!("time {t} is not on the recorded grid")))?;
            picked.push(e.clone());
        }
        for (k, ch) in res.changes.iter().enumerate() {
            picard_rows.push(vec![(k + 1).to_string(), num(*ch), res.converged.to_string()]);
        }
        methods.push(("picard", picked));
    }
    if want("fokker-planck") {
        if cfg.sim.dim != 1 || !base.kernel.is_convolution() {
            if p.method == "fokker-planck" {
                return Err(DispatchError::Usage("the grid solver needs d = 1 and a convolution kernel".into()));
            }
        } else {
            let grid = FpGrid {
                lo: p.grid_lo,
                hi: p.grid_hi,
                cells: p.grid_cells,
            };
            let init = grid.from_law(&base.initial_law)?;
            let est = fokker_planck_1d(&base.kernel, grid, &init, base.diffusion, p.dt_pde, &times)?;
            methods.push(("fokker-planck", est));
        }
    }
    if !picard_rows.is_empty() {
        out.csv("picard_iterations.csv", &["iteration", "sliced_w1_change", "converged"], &picard_rows)?;
    }

    let mut moment_rows = Vec::new();
    for (m, ests) in &methods {
        for e in ests {
            let (mean, var) = e.moments();
            for j in 0..mean.len() {
                moment_rows.push(vec![m.to_string(), num(e.time), j.to_string(), num(mean[j]), num(var[j]), num(e.mass())]);
            }
        }
    }
    out.csv("meanfield_moments.csv", &["method", "time", "coord", "mean", "var", "mass"], &moment_rows)?;

    let mut dist_rows = Vec::new();
    for a in 0..methods.len() {
        for b in a + 1..methods.len() {
            for (k, t) in times.iter().enumerate() {
                let dist = estimate_distance(&methods[a].1[k], &methods[b].1[k], p.n_slices, cfg.sim.seed)?;
                dist_rows.push(vec![num(*t), methods[a].0.into(), methods[b].0.into(), num(dist)]);
            }
        }
    }
    out.csv("meanfield_distances.csv", &["time", "method_a", "method_b", "sliced_w1"], &dist_rows)?;

    if cfg.sim.dim == 1 {
        let grid = FpGrid {
            lo: p.grid_lo,
            hi: p.grid_hi,
            cells: p.grid_cells,
        };
        let mut rows = Vec::new();
        for (m, ests) in &methods {
            for e in ests {
                for k in 0..grid.cells {
                    let x = grid.center(k);
                    rows.push(vec![m.to_string(), num(e.time), num(x), num(e.eval(&[x]))]);
                }
            }
        }
        out.csv("meanfield_density.csv", &["method", "time", "x", "density"], &rows)?;
        out.json("meanfield_density.json", &density_sidecar(&methods))?;
    }

    let positive = times.iter().filter(|t| **t > 0.0).count();
    if positive >= 4 {
        let mut rows = Vec::new();
        for (m, ests) in &methods {
            for &r in &p.decay_r {
                let series = density_decay_check(ests, r)?;
                for (t, v) in &series.points {
                    rows.push(vec![
                        m.to_string(),
                        num(r),
                        num(*t),
                        num(*v),
                        num(series.spread()),
                        series.warning.clone().unwrap_or_default(),
                    ]);
                }
            }
        }
        out.csv("meanfield_decay.csv", &["method", "r", "time", "scaled_norm", "spread", "warning"], &rows)?;
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct SnapshotInfo {
    method: &'static str,
    time: f64,
    /// KDE bandwidth per coordinate; absent for closed-form and grid densities.
    bandwidth: Option<Vec<f64>>,
}

fn density_sidecar(methods: &[(&'static str, Vec<DensityEstimate>)]) -> Vec<SnapshotInfo> {
    let mut v = Vec::new();
    for (m, ests) in methods {
        for e in ests {
            let bandwidth = match &e.repr {
                DensityRepr::Samples { bandwidth, .. } => Some(bandwidth.clone()),
                _ => None,
            };
            v.push(SnapshotInfo {
                method: m,
                time: e.time,
                bandwidth,
            });
        }
    }
    v
}

fn girsanov_study(cfg: &ResolvedConfig, out: &mut Outputs) -> Result<()> {
    let base = cfg.sim_config()?;
    let p = &cfg.plan;
    if p.r_list.iter().any(|r| *r > 1) {
        return Err(DispatchError::Usage("the scaling study covers r = 0 (full) and r = 1 (partial)".into()));
    }
    let mut n_list = cfg.n_list();
    n_list.sort_unstable();
    n_list.dedup();
    let rows = novikov_scaling_study(&base, &n_list, p.paths, &p.alphas)?;
    let mut csv_rows = Vec::new();
    for row in &rows {
        for &r in &p.r_list {
            let (mean, se, moments) = if r == 0 {
                (row.full_energy_mean, row.full_energy_se, &row.exp_moment_full)
            } else {
                (row.partial_energy_mean, row.partial_energy_se, &row.exp_moment_partial)
            };
            for (alpha, m) in p.alphas.iter().zip(moments) {
                let mut rec = vec![row.n.to_string(), r.to_string(), num(*alpha), num(mean), num(se)];
                match m {
                    Ok(e) => {
                        rec.extend([
                            num(e.log_mean_exp),
                            num(e.bootstrap_ci.0),
                            num(e.bootstrap_ci.1),
                            num(e.diverged_fraction),
                            "ok".into(),
                        ]);
                    }
                    Err(err) => {
                        rec.extend([String::new(), String::new(), String::new(), String::new(), err.to_string()]);
                    }
                }
                csv_rows.push(rec);
            }
        }
    }
    out.csv(
        "girsanov.csv",
        &[
            "N", "r", "alpha", "energy_mean", "energy_se", "log_mean_exp", "ci_low", "ci_high", "diverged_fraction",
            "status",
        ],
        &csv_rows,
    )?;

    // E[Z_T^(1)] under the partial system, which should be 1
    let mut mart = Vec::new();
    for &n in &n_list {
        let mut c = base.clone();
        c.n_particles = n;
        c.partial_r = Some(1);
        let z = par_map(p.paths, |k| -> Result<f64> {
            let ck = c.replica(k as u64);
            let traj = sde::run(&ck, 1, true)?;
            Ok(girsanov::weight(&traj, &ck, 1)?.exp())
        })?;
        let m = stats::mean(&z);
        let (lo, hi) = stats::bootstrap_ci(&z, stats::mean, girsanov::BOOTSTRAP_RESAMPLES, cfg.sim.seed, 0.95);
        mart.push(vec![n.to_string(), "1".into(), num(m), num(lo), num(hi), p.paths.to_string()]);
    }
    out.csv("girsanov_martingale.csv", &["N", "r", "mean_weight", "ci_low", "ci_high", "paths"], &mart)
}

fn write_report(rows: &mut Vec<Vec<String>>, summary: &mut Vec<Vec<String>>, rep: &DiagnosticsReport) {
    for s in &rep.series {
        rows.push(vec![rep.name.clone(), num(s.x), num(s.value), num(s.ci_low), num(s.ci_high)]);
    }
    let notes: Vec<String> = rep.metadata.iter().map(|(k, v)| format!("{k}={v}")).collect();
    summary.push(vec![rep.name.clone(), opt(rep.fitted_slope), notes.join("; ")]);
}

/// Concatenates per-`N` reports of one diagnostic and refits the slope.
fn merge(mut parts: Vec<DiagnosticsReport>) -> Option<DiagnosticsReport> {
    let mut first = parts.drain(..1).next()?;
    for p in parts {
        first.series.extend(p.series);
        for (k, v) in p.metadata {
            first.metadata.entry(k).and_modify(|e| {
                if *e != v {
                    e.push(',');
                    e.push_str(&v);
                }
            }).or_insert(v);
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        first.series.iter().filter(|p| p.x > 0.0 && p.value > 0.0).map(|p| (p.x, p.value)).unzip();
    first.fitted_slope = if first.name == "tightness_moment" { first.fitted_slope } else { stats::log_log_slope(&xs, &ys) };
    Some(first)
}

fn chaos_study(cfg: &ResolvedConfig, out: &mut Outputs) -> Result<()> {
    let base = cfg.sim_config()?;
    let p = &cfg.plan;
    let d = cfg.sim.dim;
    let t_end = cfg.sim.horizon;
    let wants = |s: &str| p.diagnostics.iter().any(|x| x == s);
    let method = match p.distance.as_str() {
        "sliced-w1" => DistanceMethod::SlicedW1 { n_slices: p.n_slices },
        "energy" => DistanceMethod::EnergyDistance,
        _ => DistanceMethod::ExactW1,
    };
    let f = match p.test_function.as_str() {
        "inverse-quadratic" => TestFunction::InverseQuadratic,
        _ => TestFunction::Cos(vec![p.frequency; d]),
    };
    let (gs, gt) = cfg.g_window();
    let reference = exact_law(&base, t_end)?;

    let mut dist = Vec::new();
    let mut tight = Vec::new();
    let mut gfun = Vec::new();
    let mut indep = Vec::new();
    let mut notes = Vec::new();
    for n in cfg.n_list() {
        // one system size at a time keeps memory at runs x N x snapshots
        let runs: Vec<TrajectoryBlock> = par_map(p.runs, |k| {
            Ok(sde::run(&cell_config(&base, n, k, p.runs), cfg.sim.record_every, false)?)
        })?;
        let set = [RunSet { n, runs }];
        if wants("distance") {
            match &reference {
                Some(r) => dist.push(chaos::marginal_distance(&set, r, t_end, method, cfg.sim.seed)?),
                None => notes.push("distance skipped: no closed-form reference law for this kernel".to_string()),
            }
        }
        if wants("tightness") {
            let pairs: Vec<(f64, f64)> =
                p.gaps.iter().filter(|g| **g <= t_end).map(|g| (t_end - g, t_end)).collect();
            let mut rep = chaos::tightness_moment(&set[0].runs, &pairs)?;
            rep.metadata.insert("n".into(), n.to_string());
            tight.push(rep);
        }
        if wants("g") {
            gfun.push(chaos::g_functional(&set, &base.kernel, base.diffusion, &f, &PathWeight::Constant(1.0), gs, gt)?);
        }
        if wants("independence") {
            if p.runs < 2 {
                notes.push("independence skipped: needs runs >= 2".to_string());
            } else {
                indep.push(chaos::independence_test(
                    &set,
                    &Observable::Tanh(0),
                    &Observable::Cos(vec![p.frequency; d]),
                    t_end,
                    cfg.sim.seed,
                )?);
            }
        }
    }
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for rep in [merge(dist), merge(gfun), merge(indep)].into_iter().flatten() {
        write_report(&mut rows, &mut summary, &rep);
    }
    let mut tight_rows = Vec::new();
    for rep in &tight {
        let n = rep.metadata.get("n").cloned().unwrap_or_default();
        for s in &rep.series {
            tight_rows.push(vec![n.clone(), num(s.x), num(s.value), num(s.ci_low), num(s.ci_high)]);
        }
    }
    let notes: Vec<String> = notes.into_iter().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    for n in notes {
        summary.push(vec!["note".into(), String::new(), n]);
    }
    out.csv("chaos.csv", &["diagnostic", "n", "value", "ci_low", "ci_high"], &rows)?;
    if wants("tightness") {
        out.csv("chaos_tightness.csv", &["n", "gap", "ratio", "ci_low", "ci_high"], &tight_rows)?;
    }
    out.csv("chaos_summary.csv", &["diagnostic", "fitted_slope", "notes"], &summary)
}
