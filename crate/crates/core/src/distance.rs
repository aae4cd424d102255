//! Distances between probability measures on the line and in `R^d`.
//!
//! One-dimensional Wasserstein-1 is computed as `int |F - G| dx`. Empirical
//! against Gaussian is evaluated in closed form; piecewise-linear grid CDFs
//! are integrated exactly between breakpoints; smooth mixtures fall back to
//! composite Gauss–Legendre on a fine partition.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, norm_cdf, norm_pdf, norm_quantile, sqrt};
use crate::quadrature::GaussLegendre;
use crate::rng::{Domain, StreamRng};

/// A probability law on the real line.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal1d {
    /// Empirical measure of sorted samples.
    Samples(Vec<f64>),
    Gaussian { mean: f64, sd: f64 },
    /// Piecewise-constant density with `masses[k]` on `[lo + k dx, lo + (k+1) dx)`.
    Grid { lo: f64, dx: f64, masses: Vec<f64> },
    /// Gaussian kernel density estimate over sorted samples.
    Kde { samples: Vec<f64>, bandwidth: f64 },
}

impl Marginal1d {
    /// Sorts the samples; non-finite samples are rejected.
    pub fn samples(mut v: Vec<f64>) -> Result<Self> {
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::usage("samples must be non-empty and finite"));
        }
        v.sort_by(|a, b| a.total_cmp(b));
        Ok(Marginal1d::Samples(v))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Marginal1d::Samples(s) => s.partition_point(|v| *v <= x) as f64 / s.len() as f64,
            Marginal1d::Gaussian { mean, sd } => {
                if *sd == 0.0 {
                    f64::from(u8::from(x >= *mean))
                } else {
                    norm_cdf((x - mean) / sd)
                }
            }
            Marginal1d::Grid { lo, dx, masses } => {
                let total: f64 = masses.iter().sum();
                let pos = (x - lo) / dx;
                if pos <= 0.0 {
                    return 0.0;
                }
                let k = crate::math::floor(pos) as usize;
                if k >= masses.len() {
                    return 1.0;
                }
                let below: f64 = masses[..k].iter().sum();
                (below + masses[k] * (pos - k as f64)) / total
            }
            Marginal1d::Kde { samples, bandwidth } => {
                samples.iter().map(|s| norm_cdf((x - s) / bandwidth)).sum::<f64>() / samples.len() as f64
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            Marginal1d::Samples(s) => (s[0], s[s.len() - 1]),
            Marginal1d::Gaussian { mean, sd } => (mean - 40.0 * sd, mean + 40.0 * sd),
            Marginal1d::Grid { lo, dx, masses } => (*lo, lo + dx * masses.len() as f64),
            Marginal1d::Kde { samples, bandwidth } => {
                (samples[0] - 40.0 * bandwidth, samples[samples.len() - 1] + 40.0 * bandwidth)
            }
        }
    }

    fn breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            Marginal1d::Samples(s) => out.extend_from_slice(s),
            Marginal1d::Gaussian { mean, sd } => {
                out.extend((-80..=80).map(|k| mean + 0.25 * k as f64 * sd));
            }
            Marginal1d::Grid { lo, dx, masses } => {
                out.extend((0..=masses.len()).map(|k| lo + dx * k as f64));
            }
            Marginal1d::Kde { samples, bandwidth } => {
                let (a, b) = (samples[0] - 8.0 * bandwidth, samples[samples.len() - 1] + 8.0 * bandwidth);
                let n = ((b - a) / (0.25 * bandwidth)).min(20_000.0) as usize + 1;
                out.extend((0..=n).map(|k| a + (b - a) * k as f64 / n as f64));
            }
        }
    }

    fn is_piecewise_linear(&self) -> bool {
        matches!(self, Marginal1d::Samples(_) | Marginal1d::Grid { .. })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Marginal1d::Samples(s) | Marginal1d::Kde { samples: s, .. } => {
                s.iter().sum::<f64>() / s.len() as f64
            }
            Marginal1d::Gaussian { mean, .. } => *mean,
            Marginal1d::Grid { lo, dx, masses } => {
                let total: f64 = masses.iter().sum();
                masses
                    .iter()
                    .enumerate()
                    .map(|(k, m)| m * (lo + dx * (k as f64 + 0.5)))
                    .sum::<f64>()
                    / total
            }
        }
    }
}

/// `int_{x0}^{x1} |a + b (x - x0)| dx`.
fn abs_linear(x0: f64, x1: f64, a: f64, b: f64) -> f64 {
    let h = x1 - x0;
    let end = a + b * h;
    if (a >= 0.0) == (end >= 0.0) {
        0.5 * h * abs(a + end)
    } else {
        // sign change at x0 + root
        let root = -a / b;
        0.5 * (root * abs(a) + (h - root) * abs(end))
    }
}

/// `int z Phi + phi`: antiderivative of the normal CDF.
fn psi(z: f64) -> f64 {
    z * norm_cdf(z) + norm_pdf(z)
}

/// `int_{z0}^{z1} |c - Phi(z)| dz` for a constant `c` in `[0, 1]`.
fn abs_const_minus_phi(c: f64, z0: f64, z1: f64) -> f64 {
    let plain = |a: f64, b: f64| c * (b - a) - (psi(b) - psi(a));
    let zs = norm_quantile(c);
    if zs <= z0 {
        -plain(z0, z1)
    } else if zs >= z1 {
        plain(z0, z1)
    } else {
        plain(z0, zs) - plain(zs, z1)
    }
}

fn w1_samples_gaussian(s: &[f64], mean: f64, sd: f64) -> f64 {
    let n = s.len() as f64;
    if sd == 0.0 {
        return s.iter().map(|x| abs(x - mean)).sum::<f64>() / n;
    }
    let z: Vec<f64> = s.iter().map(|x| (x - mean) / sd).collect();
    // F_n = 0 left of the first sample, 1 right of the last
    let mut total = psi(z[0]) + psi(-z[z.len() - 1]);
    for k in 1..z.len() {
        if z[k] > z[k - 1] {
            total += abs_const_minus_phi(k as f64 / n, z[k - 1], z[k]);
        }
    }
    sd * total
}

/// Exact W1 between equal-size empirical measures: matched sorted samples.
fn w1_matched(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| abs(x - y)).sum::<f64>() / a.len() as f64
}

/// Wasserstein-1 distance between two laws on the line.
pub fn w1_1d(a: &Marginal1d, b: &Marginal1d) -> f64 {
    use Marginal1d::*;
    match (a, b) {
        (Samples(x), Samples(y)) if x.len() == y.len() => return w1_matched(x, y),
        (Samples(s), Gaussian { mean, sd }) | (Gaussian { mean, sd }, Samples(s)) => {
            return w1_samples_gaussian(s, *mean, *sd)
        }
        (Gaussian { mean: m1, sd: s1 }, Gaussian { mean: m2, sd: s2 }) if s1 == s2 => {
            return abs(m1 - m2)
        }
        _ => {}
    }
    let mut cuts = Vec::new();
    a.breakpoints(&mut cuts);
    b.breakpoints(&mut cuts);
    let (a0, a1) = a.support();
    let (b0, b1) = b.support();
    let lo = a0.min(b0);
    let hi = a1.max(b1);
    cuts.push(lo);
    cuts.push(hi);
    cuts.retain(|c| *c >= lo && *c <= hi);
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    if a.is_piecewise_linear() && b.is_piecewise_linear() {
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            // both CDFs are linear on (x0, x1): evaluate just inside
            let eps = 1e-9 * (x1 - x0);
            let (f0, f1) = (a.cdf(x0 + eps), a.cdf(x1 - eps));
            let (g0, g1) = (b.cdf(x0 + eps), b.cdf(x1 - eps));
            let h = x1 - x0 - 2.0 * eps;
            let slope = if h > 0.0 { ((f1 - g1) - (f0 - g0)) / h } else { 0.0 };
            let start = (f0 - g0) - slope * eps;
            total += abs_linear(x0, x1, start, slope);
        }
        return total;
    }
    let gl = GaussLegendre::new(8);
    cuts.windows(2)
        .map(|w| gl.integrate(w[0], w[1], |x| abs(a.cdf(x) - b.cdf(x))))
        .sum()
}

/// A law on `R^d` that can be projected onto a direction.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalNd {
    /// Flat `n x d` samples.
    Samples { points: Vec<f64>, dim: usize },
    /// Independent coordinates.
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
}

impl MarginalNd {
    pub fn dim(&self) -> usize {
        match self {
            MarginalNd::Samples { dim, .. } => *dim,
            MarginalNd::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn project(&self, theta: &[f64]) -> Result<Marginal1d> {
        match self {
            MarginalNd::Samples { points, dim } => Marginal1d::samples(
                points
                    .chunks(*dim)
                    .map(|x| x.iter().zip(theta).map(|(a, b)| a * b).sum())
                    .collect(),
            ),
            MarginalNd::Gaussian { mean, var } => Ok(Marginal1d::Gaussian {
                mean: mean.iter().zip(theta).map(|(a, b)| a * b).sum(),
                sd: sqrt(var.iter().zip(theta).map(|(v, b)| v * b * b).sum()),
            }),
        }
    }
}

/// Seeded unit directions in `R^d`; in one dimension the single direction `+1`.
pub fn directions(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    if dim == 1 {
        return alloc::vec![alloc::vec![1.0]];
    }
    let mut rng = StreamRng::new(seed, Domain::Directions, dim as u32);
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
            let r = crate::math::norm(&v);
            if r > 1e-12 {
                break v.into_iter().map(|x| x / r).collect();
            }
        })
        .collect()
}

/// Mean of one-dimensional W1 over seeded projection directions.
pub fn sliced_w1(a: &MarginalNd, b: &MarginalNd, n_slices: usize, seed: u64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::usage("sliced W1 needs laws of the same dimension"));
    }
    if n_slices == 0 {
        return Err(Error::usage("need at least one slice"));
    }
    let dirs = directions(a.dim(), n_slices, seed);
    let mut total = 0.0;
    for th in &dirs {
        total += w1_1d(&a.project(th)?, &b.project(th)?);
    }
    Ok(total / dirs.len() as f64)
}

/// Energy distance `2 E|X - Y| - E|X - X'| - E|Y - Y'|` between two
/// empirical measures (V-statistic form, `O(n m)`).
pub fn energy_distance(a: &[f64], b: &[f64], dim: usize) -> Result<f64> {
    if dim == 0 || a.is_empty() || b.is_empty() || !a.len().is_multiple_of(dim) || !b.len().is_multiple_of(dim) {
        return Err(Error::usage("energy distance needs non-empty n x d sample arrays"));
    }
    let mean_dist = |x: &[f64], y: &[f64]| {
        let mut total = 0.0;
        for p in x.chunks(dim) {
            for q in y.chunks(dim) {
                total += sqrt(crate::math::dist_sq(p, q));
            }
        }
        total / ((x.len() / dim) * (y.len() / dim)) as f64
    };
    let e = 2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b);
    Ok(e.max(0.0))
}
