//! Key-value experiment configuration.
//!
//! Grammar (one item per line, `#` starts a comment):
//!
//! ```text
//! file    := { blank | comment | section | entry }
//! section := "[" ("kernel" | "sim" | "experiment") "]"
//! entry   := key "=" value
//! key     := [a-z][a-z0-9_]*
//! value   := item { "," item }      (lists are comma-separated)
//! item    := decimal number | word       (word: [a-z0-9._+-]+)
//! ```
//!
//! Every key belongs to a section, may appear once, and must be known.
//! Parsing resolves every default, so `render` writes a complete file and
//! `parse(render(c)) == c`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chaoslab_core::kernels::{KernelParams, KernelSpec};
use chaoslab_core::sde::{InitialLaw, SimConfig, DEFAULT_DIFFUSION};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    Duplicate { key: String, line: usize, first: usize },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey {
        key: String,
        section: String,
        line: usize,
    },
    #[error("missing required key `{key}` in [{section}]")]
    Missing { key: String, section: String },
    #[error("constraint violated: {rule}")]
    Constraint { rule: String },
    #[error(transparent)]
    Core(#[from] chaoslab_core::Error),
}

type Result<T> = std::result::Result<T, ConfigError>;

fn constraint(rule: impl Into<String>) -> ConfigError {
    ConfigError::Constraint { rule: rule.into() }
}

/// Initial-law family and its per-coordinate parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSection {
    Point { at: Vec<f64> },
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
}

impl InitialSection {
    pub fn law(&self) -> InitialLaw {
        match self {
            InitialSection::Point { at } => InitialLaw::PointMass(at.clone()),
            InitialSection::Gaussian { mean, var } => InitialLaw::Gaussian {
                mean: mean.clone(),
                var: var.clone(),
            },
            InitialSection::Uniform { lo, hi } => InitialLaw::UniformBox {
                lo: lo.clone(),
                hi: hi.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSection {
    pub n_particles: usize,
    pub dim: usize,
    pub horizon: f64,
    pub dt: f64,
    pub diffusion: f64,
    pub seed: u64,
    pub taming: Option<f64>,
    pub partial_r: Option<usize>,
    pub record_every: u64,
    pub initial: InitialSection,
}

/// Study parameters for the subcommands. Lists left empty fall back to the
/// simulation values (`n_list` to `[n_particles]`, `times` to `[horizon]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub n_list: Vec<usize>,
    pub runs: usize,
    pub times: Vec<f64>,
    pub keep_increments: bool,
    pub csv_particles: usize,
    // check-kernel
    pub radius: f64,
    // bound-oracle
    pub window_start: f64,
    pub window_widths: Vec<f64>,
    pub shifts: Vec<f64>,
    pub kappa: f64,
    // girsanov
    pub alphas: Vec<f64>,
    pub r_list: Vec<usize>,
    pub paths: usize,
    // meanfield
    pub method: String,
    pub iterations: usize,
    pub n_ref: usize,
    pub bandwidth: String,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_cells: usize,
    pub dt_pde: f64,
    pub decay_r: Vec<f64>,
    // chaos
    pub diagnostics: Vec<String>,
    pub distance: String,
    pub n_slices: usize,
    pub gaps: Vec<f64>,
    pub test_function: String,
    pub frequency: f64,
    pub g_window: Vec<f64>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        let dyadic: Vec<f64> = (1..=6).rev().map(|k| 0.5f64.powi(k)).collect();
        Self {
            n_list: Vec::new(),
            runs: 1,
            times: Vec::new(),
            keep_increments: false,
            csv_particles: 16,
            radius: 1.0,
            window_start: 0.0,
            window_widths: dyadic.clone(),
            shifts: vec![0.0],
            kappa: 1.0,
            alphas: vec![0.5],
            r_list: vec![0, 1],
            paths: 200,
            method: "all".into(),
            iterations: 10,
            n_ref: 1000,
            bandwidth: "silverman".into(),
            grid_lo: -8.0,
            grid_hi: 8.0,
            grid_cells: 512,
            dt_pde: 1e-3,
            decay_r: vec![1.5, 2.0, 4.0],
            diagnostics: vec!["distance".into(), "tightness".into(), "g".into(), "independence".into()],
            distance: "exact-w1".into(),
            n_slices: 32,
            gaps: dyadic,
            test_function: "cos".into(),
            frequency: 1.0,
            g_window: Vec::new(),
        }
    }
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub kernel_name: String,
    /// Kernel parameters including the resolved exponents `p` and `q`
    /// (the dimension comes from `[sim] dim`).
    pub kernel_params: BTreeMap<String, f64>,
    pub sim: SimSection,
    pub plan: ExperimentPlan,
}

impl ResolvedConfig {
    pub fn kernel(&self) -> chaoslab_core::Result<KernelSpec> {
        let mut p: KernelParams = self.kernel_params.clone();
        p.insert("d".into(), self.sim.dim as f64);
        KernelSpec::builtin(&self.kernel_name, &p)
    }

    pub fn sim_config(&self) -> chaoslab_core::Result<SimConfig> {
        let s = &self.sim;
        let c = SimConfig {
            n_particles: s.n_particles,
            dim: s.dim,
            horizon: s.horizon,
            dt: s.dt,
            diffusion: s.diffusion,
            kernel: self.kernel()?,
            initial_law: s.initial.law(),
            seed: s.seed,
            taming: s.taming,
            partial_r: s.partial_r,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn n_list(&self) -> Vec<usize> {
        if self.plan.n_list.is_empty() {
            vec![self.sim.n_particles]
        } else {
            self.plan.n_list.clone()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        if self.plan.times.is_empty() {
            vec![self.sim.horizon]
        } else {
            self.plan.times.clone()
        }
    }

    /// `(s, t)` of the martingale residual; defaults to `(T/2, T)`.
    pub fn g_window(&self) -> (f64, f64) {
        match self.plan.g_window.as_slice() {
            [s, t] => (*s, *t),
            _ => (0.5 * self.sim.horizon, self.sim.horizon),
        }
    }
}

struct Entry {
    line: usize,
    value_col: usize,
    raw: String,
}

type Section = BTreeMap<String, Entry>;

struct Reader {
    sections: BTreeMap<String, Section>,
    used: BTreeMap<(String, String), ()>,
}

impl Reader {
    fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("");
            let trimmed = content.trim();
            if trimmed.is_empty() {
                continue;
            }
            let lead = content.len() - content.trim_start().len();
            if let Some(rest) = trimmed.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line,
                    column: lead + trimmed.len(),
                    message: "section header must end with `]`".into(),
                })?;
                let name = name.trim();
                if !["kernel", "sim", "experiment"].contains(&name) {
                    return Err(ConfigError::Syntax {
                        line,
                        column: lead + 2,
                        message: format!("unknown section `{name}` (expected kernel, sim or experiment)"),
                    });
                }
                if sections.contains_key(name) {
                    return Err(ConfigError::Syntax {
                        line,
                        column: lead + 1,
                        message: format!("section [{name}] appears twice"),
                    });
                }
                sections.insert(name.to_string(), Section::new());
                current = Some(name.to_string());
                continue;
            }
            let eq = content.find('=').ok_or_else(|| ConfigError::Syntax {
                line,
                column: lead + 1,
                message: "expected `key = value`".into(),
            })?;
            let key = content[..eq].trim();
            let valid_key = key.chars().next().is_some_and(|c| c.is_ascii_lowercase())
                && key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
            if !valid_key {
                return Err(ConfigError::Syntax {
                    line,
                    column: lead + 1,
                    message: format!("invalid key `{key}` (lowercase letters, digits and `_`)"),
                });
            }
            let value = content[eq + 1..].trim();
            let value_col = eq + 2 + (content[eq + 1..].len() - content[eq + 1..].trim_start().len());
            if value.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    column: eq + 2,
                    message: format!("key `{key}` has no value"),
                });
            }
            let section = current.clone().ok_or_else(|| ConfigError::Syntax {
                line,
                column: lead + 1,
                message: "key outside of any section".into(),
            })?;
            let map = sections.get_mut(&section).expect("inserted above");
            if let Some(prev) = map.get(key) {
                return Err(ConfigError::Duplicate {
                    key: key.to_string(),
                    line,
                    first: prev.line,
                });
            }
            map.insert(
                key.to_string(),
                Entry {
                    line,
                    value_col,
                    raw: value.to_string(),
                },
            );
        }
        Ok(Self {
            sections,
            used: BTreeMap::new(),
        })
    }

    fn entry(&mut self, section: &str, key: &str) -> Option<&Entry> {
        let e = self.sections.get(section)?.get(key)?;
        self.used.insert((section.to_string(), key.to_string()), ());
        Some(e)
    }

    fn items(e: &Entry) -> Vec<(usize, &str)> {
        let mut out = Vec::new();
        let mut offset = 0;
        for part in e.raw.split(',') {
            let lead = part.len() - part.trim_start().len();
            out.push((e.value_col + offset + lead, part.trim()));
            offset += part.len() + 1;
        }
        out
    }

    fn f64_list(&mut self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        let mut out = Vec::new();
        for (col, item) in Self::items(e) {
            let v: f64 = item.parse().map_err(|_| ConfigError::Syntax {
                line: e.line,
                column: col,
                message: format!("`{item}` is not a decimal number"),
            })?;
            if !v.is_finite() {
                return Err(ConfigError::Syntax {
                    line: e.line,
                    column: col,
                    message: format!("`{item}` is not finite"),
                });
            }
            out.push(v);
        }
        Ok(Some(out))
    }

    fn u64_list(&mut self, section: &str, key: &str) -> Result<Option<Vec<u64>>> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        let mut out = Vec::new();
        for (col, item) in Self::items(e) {
            out.push(item.parse().map_err(|_| ConfigError::Syntax {
                line: e.line,
                column: col,
                message: format!("`{item}` is not a nonnegative integer"),
            })?);
        }
        Ok(Some(out))
    }

    fn scalar<T: Copy>(list: Option<Vec<T>>, e: Option<(usize, usize)>, key: &str) -> Result<Option<T>> {
        match list {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(Some(v[0])),
            Some(_) => {
                let (line, column) = e.unwrap_or((0, 0));
                Err(ConfigError::Syntax {
                    line,
                    column,
                    message: format!("`{key}` takes a single value"),
                })
            }
        }
    }

    fn pos(&self, section: &str, key: &str) -> Option<(usize, usize)> {
        self.sections.get(section)?.get(key).map(|e| (e.line, e.value_col))
    }

    fn f64(&mut self, section: &str, key: &str) -> Result<Option<f64>> {
        let l = self.f64_list(section, key)?;
        Self::scalar(l, self.pos(section, key), key)
    }

    fn u64(&mut self, section: &str, key: &str) -> Result<Option<u64>> {
        let l = self.u64_list(section, key)?;
        Self::scalar(l, self.pos(section, key), key)
    }

    fn usize(&mut self, section: &str, key: &str) -> Result<Option<usize>> {
        Ok(self.u64(section, key)?.map(|v| v as usize))
    }

    fn words(&mut self, section: &str, key: &str) -> Result<Option<Vec<String>>> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        let mut out = Vec::new();
        for (col, item) in Self::items(e) {
            let ok = !item.is_empty()
                && item.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '-' | '_' | '.' | '+'));
            if !ok {
                return Err(ConfigError::Syntax {
                    line: e.line,
                    column: col,
                    message: format!("`{item}` is not a bare lowercase word"),
                });
            }
            out.push(item.to_string());
        }
        Ok(Some(out))
    }

    fn word(&mut self, section: &str, key: &str) -> Result<Option<String>> {
        let pos = self.pos(section, key);
        match self.words(section, key)? {
            None => Ok(None),
            Some(mut v) if v.len() == 1 => Ok(v.pop()),
            Some(_) => {
                let (line, column) = pos.unwrap_or((0, 0));
                Err(ConfigError::Syntax {
                    line,
                    column,
                    message: format!("`{key}` takes a single word"),
                })
            }
        }
    }

    fn bool(&mut self, section: &str, key: &str) -> Result<Option<bool>> {
        let pos = self.pos(section, key);
        match self.word(section, key)?.as_deref() {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(other) => {
                let (line, column) = pos.unwrap_or((0, 0));
                Err(ConfigError::Syntax {
                    line,
                    column,
                    message: format!("`{other}` is not `true` or `false`"),
                })
            }
        }
    }

    fn required<T>(v: Option<T>, section: &str, key: &str) -> Result<T> {
        v.ok_or_else(|| ConfigError::Missing {
            key: key.into(),
            section: section.into(),
        })
    }

    fn finish(&self) -> Result<()> {
        for (section, map) in &self.sections {
            for (key, e) in map {
                if !self.used.contains_key(&(section.clone(), key.clone())) {
                    return Err(ConfigError::UnknownKey {
                        key: key.clone(),
                        section: section.clone(),
                        line: e.line,
                    });
                }
            }
        }
        Ok(())
    }
}

fn broadcast(v: Vec<f64>, dim: usize, key: &str) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; dim]),
        n if n == dim => Ok(v),
        n => Err(constraint(format!("`{key}` has {n} entries; expected 1 or dim = {dim}"))),
    }
}

const KERNEL_KEYS: [&str; 7] = ["p", "q", "alpha", "s", "c", "omega", "kappa"];

/// Parses and fully resolves a configuration file.
pub fn parse_config(text: &str) -> Result<ResolvedConfig> {
    let mut r = Reader::parse(text)?;

    // [kernel]
    let kernel_name = Reader::required(r.word("kernel", "name")?, "kernel", "name")?;
    let mut kernel_params = BTreeMap::new();
    for key in KERNEL_KEYS {
        if let Some(v) = r.f64("kernel", key)? {
            kernel_params.insert(key.to_string(), v);
        }
    }

    // [sim]
    let n_particles = Reader::required(r.usize("sim", "n_particles")?, "sim", "n_particles")?;
    let dim = Reader::required(r.usize("sim", "dim")?, "sim", "dim")?;
    let horizon = Reader::required(r.f64("sim", "horizon")?, "sim", "horizon")?;
    let dt = Reader::required(r.f64("sim", "dt")?, "sim", "dt")?;
    let seed = Reader::required(r.u64("sim", "seed")?, "sim", "seed")?;
    let diffusion = r.f64("sim", "diffusion")?.unwrap_or(DEFAULT_DIFFUSION);
    let taming = r.f64("sim", "taming")?;
    let partial_r = r.usize("sim", "partial_r")?;
    let record_every = r.u64("sim", "record_every")?.unwrap_or(1);
    if n_particles < 1 {
        return Err(constraint("n_particles >= 1"));
    }
    if dim < 1 {
        return Err(constraint("dim >= 1"));
    }
    if record_every < 1 {
        return Err(constraint("record_every >= 1"));
    }
    let family = r.word("sim", "initial")?.unwrap_or_else(|| "point".into());
    let mean = r.f64_list("sim", "initial_mean")?;
    let var = r.f64_list("sim", "initial_var")?;
    let lo = r.f64_list("sim", "initial_lo")?;
    let hi = r.f64_list("sim", "initial_hi")?;
    let unused = |v: &Option<Vec<f64>>, key: &str| -> Result<()> {
        if v.is_some() {
            Err(constraint(format!("`{key}` does not apply to initial = {family}")))
        } else {
            Ok(())
        }
    };
    let initial = match family.as_str() {
        "point" => {
            unused(&var, "initial_var")?;
            unused(&lo, "initial_lo")?;
            unused(&hi, "initial_hi")?;
            InitialSection::Point {
                at: broadcast(mean.unwrap_or(vec![0.0]), dim, "initial_mean")?,
            }
        }
        "gaussian" => {
            unused(&lo, "initial_lo")?;
            unused(&hi, "initial_hi")?;
            InitialSection::Gaussian {
                mean: broadcast(mean.unwrap_or(vec![0.0]), dim, "initial_mean")?,
                var: broadcast(var.unwrap_or(vec![1.0]), dim, "initial_var")?,
            }
        }
        "uniform" => {
            unused(&mean, "initial_mean")?;
            unused(&var, "initial_var")?;
            InitialSection::Uniform {
                lo: broadcast(lo.unwrap_or(vec![-1.0]), dim, "initial_lo")?,
                hi: broadcast(hi.unwrap_or(vec![1.0]), dim, "initial_hi")?,
            }
        }
        other => return Err(constraint(format!("initial must be point, gaussian or uniform, not `{other}`"))),
    };

    // [experiment]
    let d = ExperimentPlan::default();
    let e = "experiment";
    let usizes = |v: Option<Vec<u64>>| v.map(|v| v.into_iter().map(|x| x as usize).collect());
    let plan = ExperimentPlan {
        n_list: usizes(r.u64_list(e, "n_list")?).unwrap_or(d.n_list),
        runs: r.usize(e, "runs")?.unwrap_or(d.runs),
        times: r.f64_list(e, "times")?.unwrap_or(d.times),
        keep_increments: r.bool(e, "keep_increments")?.unwrap_or(d.keep_increments),
        csv_particles: r.usize(e, "csv_particles")?.unwrap_or(d.csv_particles),
        radius: r.f64(e, "radius")?.unwrap_or(d.radius),
        window_start: r.f64(e, "window_start")?.unwrap_or(d.window_start),
        window_widths: r.f64_list(e, "window_widths")?.unwrap_or(d.window_widths),
        shifts: r.f64_list(e, "shifts")?.unwrap_or(d.shifts),
        kappa: r.f64(e, "kappa")?.unwrap_or(d.kappa),
        alphas: r.f64_list(e, "alphas")?.unwrap_or(d.alphas),
        r_list: usizes(r.u64_list(e, "r_list")?).unwrap_or(d.r_list),
        paths: r.usize(e, "paths")?.unwrap_or(d.paths),
        method: r.word(e, "method")?.unwrap_or(d.method),
        iterations: r.usize(e, "iterations")?.unwrap_or(d.iterations),
        n_ref: r.usize(e, "n_ref")?.unwrap_or(d.n_ref),
        bandwidth: r.word(e, "bandwidth")?.unwrap_or(d.bandwidth),
        grid_lo: r.f64(e, "grid_lo")?.unwrap_or(d.grid_lo),
        grid_hi: r.f64(e, "grid_hi")?.unwrap_or(d.grid_hi),
        grid_cells: r.usize(e, "grid_cells")?.unwrap_or(d.grid_cells),
        dt_pde: r.f64(e, "dt_pde")?.unwrap_or(d.dt_pde),
        decay_r: r.f64_list(e, "decay_r")?.unwrap_or(d.decay_r),
        diagnostics: r.words(e, "diagnostics")?.unwrap_or(d.diagnostics),
        distance: r.word(e, "distance")?.unwrap_or(d.distance),
        n_slices: r.usize(e, "n_slices")?.unwrap_or(d.n_slices),
        gaps: r.f64_list(e, "gaps")?.unwrap_or(d.gaps),
        test_function: r.word(e, "test_function")?.unwrap_or(d.test_function),
        frequency: r.f64(e, "frequency")?.unwrap_or(d.frequency),
        g_window: r.f64_list(e, "g_window")?.unwrap_or(d.g_window),
    };
    r.finish()?;
    validate_plan(&plan)?;

    let mut cfg = ResolvedConfig {
        kernel_name,
        kernel_params,
        sim: SimSection {
            n_particles,
            dim,
            horizon,
            dt,
            diffusion,
            seed,
            taming,
            partial_r,
            record_every,
            initial,
        },
        plan,
    };
    // materialize the kernel's exponent defaults and validate everything
    let spec = cfg.kernel()?;
    let ex = spec.exponents();
    if !(ex.p > 2.0) {
        return Err(constraint("p > 2"));
    }
    cfg.kernel_params.insert("p".into(), ex.p);
    cfg.kernel_params.insert("q".into(), ex.q);
    cfg.sim_config()?;
    Ok(cfg)
}

fn validate_plan(p: &ExperimentPlan) -> Result<()> {
    if p.runs < 1 {
        return Err(constraint("runs >= 1"));
    }
    if p.n_list.contains(&0) {
        return Err(constraint("every n_list entry >= 1"));
    }
    if !["all", "exact", "picard", "fokker-planck"].contains(&p.method.as_str()) {
        return Err(constraint("method is one of all, exact, picard, fokker-planck"));
    }
    if p.bandwidth != "silverman" && !p.bandwidth.parse::<f64>().is_ok_and(|h| h > 0.0 && h.is_finite()) {
        return Err(constraint("bandwidth is `silverman` or a positive number"));
    }
    if !["exact-w1", "sliced-w1", "energy"].contains(&p.distance.as_str()) {
        return Err(constraint("distance is one of exact-w1, sliced-w1, energy"));
    }
    if !["cos", "inverse-quadratic"].contains(&p.test_function.as_str()) {
        return Err(constraint("test_function is cos or inverse-quadratic"));
    }
    for dgn in &p.diagnostics {
        if !["distance", "tightness", "g", "independence"].contains(&dgn.as_str()) {
            return Err(constraint(format!("unknown diagnostic `{dgn}`")));
        }
    }
    if !(p.g_window.is_empty() || p.g_window.len() == 2 && p.g_window[0] < p.g_window[1]) {
        return Err(constraint("g_window is `s, t` with s < t"));
    }
    if !(p.grid_hi > p.grid_lo) || p.grid_cells < 3 || !(p.dt_pde > 0.0) {
        return Err(constraint("grid_lo < grid_hi, grid_cells >= 3, dt_pde > 0"));
    }
    if p.alphas.iter().any(|a| !(*a > 0.0)) {
        return Err(constraint("alphas > 0"));
    }
    Ok(())
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Writes a complete configuration file; floats use the shortest text that
/// reads back to the same value.
pub fn render(c: &ResolvedConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[kernel]\nname = {}", c.kernel_name);
    for (k, v) in &c.kernel_params {
        let _ = writeln!(s, "{k} = {v:?}");
    }
    let m = &c.sim;
    let _ = writeln!(s, "\n[sim]");
    let _ = writeln!(s, "n_particles = {}", m.n_particles);
    let _ = writeln!(s, "dim = {}", m.dim);
    let _ = writeln!(s, "horizon = {:?}", m.horizon);
    let _ = writeln!(s, "dt = {:?}", m.dt);
    let _ = writeln!(s, "diffusion = {:?}", m.diffusion);
    let _ = writeln!(s, "seed = {}", m.seed);
    if let Some(t) = m.taming {
        let _ = writeln!(s, "taming = {t:?}");
    }
    if let Some(r) = m.partial_r {
        let _ = writeln!(s, "partial_r = {r}");
    }
    let _ = writeln!(s, "record_every = {}", m.record_every);
    match &m.initial {
        InitialSection::Point { at } => {
            let _ = writeln!(s, "initial = point\ninitial_mean = {}", join_f64(at));
        }
        InitialSection::Gaussian { mean, var } => {
            let _ = writeln!(
                s,
                "initial = gaussian\ninitial_mean = {}\ninitial_var = {}",
                join_f64(mean),
                join_f64(var)
            );
        }
        InitialSection::Uniform { lo, hi } => {
            let _ = writeln!(s, "initial = uniform\ninitial_lo = {}\ninitial_hi = {}", join_f64(lo), join_f64(hi));
        }
    }
    let p = &c.plan;
    let _ = writeln!(s, "\n[experiment]");
    let mut kv = |k: &str, v: String| {
        if !v.is_empty() {
            let _ = writeln!(s, "{k} = {v}");
        }
    };
    kv("n_list", join(&p.n_list));
    kv("runs", p.runs.to_string());
    kv("times", join_f64(&p.times));
    kv("keep_increments", p.keep_increments.to_string());
    kv("csv_particles", p.csv_particles.to_string());
    kv("radius", format!("{:?}", p.radius));
    kv("window_start", format!("{:?}", p.window_start));
    kv("window_widths", join_f64(&p.window_widths));
    kv("shifts", join_f64(&p.shifts));
    kv("kappa", format!("{:?}", p.kappa));
    kv("alphas", join_f64(&p.alphas));
    kv("r_list", join(&p.r_list));
    kv("paths", p.paths.to_string());
    kv("method", p.method.clone());
    kv("iterations", p.iterations.to_string());
    kv("n_ref", p.n_ref.to_string());
    kv("bandwidth", p.bandwidth.clone());
    kv("grid_lo", format!("{:?}", p.grid_lo));
    kv("grid_hi", format!("{:?}", p.grid_hi));
    kv("grid_cells", p.grid_cells.to_string());
    kv("dt_pde", format!("{:?}", p.dt_pde));
    kv("decay_r", join_f64(&p.decay_r));
    kv("diagnostics", p.diagnostics.join(", "));
    kv("distance", p.distance.clone());
    kv("n_slices", p.n_slices.to_string());
    kv("gaps", join_f64(&p.gaps));
    kv("test_function", p.test_function.clone());
    kv("frequency", format!("{:?}", p.frequency));
    kv("g_window", join_f64(&p.g_window));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[kernel]\nname = zero\n[sim]\nn_particles = 10\ndim = 1\nhorizon = 1\ndt = 0.01\nseed = 7\n";

    #[test]
    fn minimal_config_resolves_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.sim.diffusion, std::f64::consts::SQRT_2);
        assert_eq!(c.sim.record_every, 1);
        assert_eq!(c.sim.taming, None);
        assert!(c.kernel_params.contains_key("p"));
        assert_eq!(parse_config(&render(&c)).unwrap(), c);
    }

    #[test]
    fn missing_kernel_parameter_is_named() {
        let text = MINIMAL.replace("name = zero", "name = riesz");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
    }

    #[test]
    fn duplicate_key_cites_both_lines() {
        let text = format!("{MINIMAL}seed = 8\n");
        match parse_config(&text).unwrap_err() {
            ConfigError::Duplicate { key, line, first } => {
                assert_eq!((key.as_str(), line, first), ("seed", 9, 8));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn errors_carry_positions_and_rules() {
        let err = parse_config(&MINIMAL.replace("dt = 0.01", "dt = 0.0x")).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 7, column: 6, .. }), "{err:?}");
        let err = parse_config(&format!("{MINIMAL}bogus = 1\n")).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 9, .. }), "{err:?}");
        let err = parse_config(&MINIMAL.replace("dt = 0.01", "dt = -0.01")).unwrap_err();
        assert!(err.to_string().contains("dt > 0"), "{err}");
        let err = parse_config(&MINIMAL.replace("n_particles = 10", "n_particles = 0")).unwrap_err();
        assert!(err.to_string().contains("n_particles >= 1"), "{err}");
        let err = parse_config(&MINIMAL.replace("name = zero", "name = zero\np = 2")).unwrap_err();
        assert!(err.to_string().contains("p"), "{err}");
        let err = parse_config(&MINIMAL.replace("[sim]", "[simulation]")).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 3, .. }));
    }
}
