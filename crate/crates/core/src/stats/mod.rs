//! Binned conditional statistics, velocity estimates, and KS tests.

mod ks;
mod sweep;

pub use ks::{ks_critical_1pct, ks_statistic, normal_cdf};
pub use sweep::{convergence_sweep, reference_velocities, SweepCell, SweepPlan};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::weak::WeakRunRecord;

/// Bins with `n` below this count do not make reliable estimates.
pub const DEFAULT_N_MIN: usize = 200;

/// Uniform, non-overlapping bins on a lattice anchored at the grid origin.
///
/// The lattice depends only on the grid and the width, never on drift time
/// or pointer spread, so estimates from different sweep cells land on
/// comparable centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    first_edge: f64,
    width: f64,
    n_bins: usize,
}

impl BinSpec {
    /// Bins of `width` covering the whole grid domain, anchored at `x_min`.
    pub fn lattice(grid: GridSpec, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::NonPositiveParameter { what: "bin width", value: width });
        }
        let n_bins = (grid.length() / width).floor() as usize;
        if n_bins < 1 {
            return Err(Error::TooFew { what: "bins", min: 1, got: 0 });
        }
        Ok(Self { first_edge: grid.x_min(), width, n_bins })
    }

    /// Default width: four grid cells.
    pub fn default_lattice(grid: GridSpec) -> Result<Self> {
        Self::lattice(grid, 4.0 * grid.dx())
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn center(&self, k: usize) -> f64 {
        debug_assert!(k < self.n_bins);
        self.first_edge + (k as f64 + 0.5) * self.width
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_bins).map(|k| self.center(k)).collect()
    }

    pub fn index_of(&self, x: f64) -> Option<usize> {
        if !x.is_finite() {
            return None;
        }
        let u = (x - self.first_edge) / self.width;
        if u < 0.0 {
            return None;
        }
        let k = u.floor() as usize;
        (k < self.n_bins).then_some(k)
    }
}

/// Per-bin counts and pointer-reading means over uncensored runs.
#[derive(Debug, Clone)]
pub struct ConditionalEstimate {
    pub bins: BinSpec,
    pub n: Vec<usize>,
    pub mean_y: Vec<f64>,
    pub stderr_y: Vec<f64>,
    pub censored_fraction: f64,
    pub n_min: usize,
}

impl ConditionalEstimate {
    pub fn reliable(&self, k: usize) -> bool {
        self.n[k] >= self.n_min
    }
}

/// Groups records by final position and averages the pointer readings.
///
/// Censored records count toward `censored_fraction` but enter no bin.
/// `stderr_y` is the sample standard deviation over `sqrt(n)`; bins with
/// fewer than two entries get a NaN stderr.
pub fn conditional_mean_by_bin(
    records: &[WeakRunRecord],
    bins: BinSpec,
    n_min: usize,
) -> ConditionalEstimate {
    let nb = bins.n_bins();
    let mut n = vec![0usize; nb];
    let mut mean = vec![0.0f64; nb];
    let mut m2 = vec![0.0f64; nb];
    let mut censored = 0usize;
    for rec in records {
        let Some(x) = rec.x_tau else {
            censored += 1;
            continue;
        };
        let Some(k) = bins.index_of(x) else {
            // off-lattice finisher: treat like a censored run for statistics
            censored += 1;
            continue;
        };
        // Welford, in fixed record order
        n[k] += 1;
        let d = rec.y - mean[k];
        mean[k] += d / n[k] as f64;
        m2[k] += d * (rec.y - mean[k]);
    }
    let stderr = (0..nb)
        .map(|k| {
            if n[k] >= 2 {
                (m2[k] / (n[k] as f64 - 1.0)).sqrt() / (n[k] as f64).sqrt()
            } else {
                f64::NAN
            }
        })
        .collect();
    ConditionalEstimate {
        bins,
        n,
        mean_y: mean,
        stderr_y: stderr,
        censored_fraction: censored as f64 / records.len().max(1) as f64,
        n_min,
    }
}

/// Velocity read off the binned pointer means: `v = (x_k - mean Y_k) / tau`.
#[derive(Debug, Clone)]
pub struct VelocityEstimate {
    pub bins: BinSpec,
    pub tau: f64,
    pub n: Vec<usize>,
    pub mean_y: Vec<f64>,
    pub stderr_y: Vec<f64>,
    pub v_hat: Vec<f64>,
    /// `stderr_y / tau`: the error magnification that makes the small-tau
    /// limit expensive.
    pub stderr_v: Vec<f64>,
    pub censored_fraction: f64,
    pub n_min: usize,
}

impl VelocityEstimate {
    pub fn reliable(&self, k: usize) -> bool {
        self.n[k] >= self.n_min
    }

    pub fn reliable_indices(&self) -> Vec<usize> {
        (0..self.bins.n_bins()).filter(|&k| self.reliable(k)).collect()
    }
}

pub fn weak_velocity_estimate(est: &ConditionalEstimate, tau: f64) -> Result<VelocityEstimate> {
    if !(tau > 0.0) {
        return Err(Error::NonPositiveTau { tau });
    }
    let v_hat = (0..est.bins.n_bins())
        .map(|k| (est.bins.center(k) - est.mean_y[k]) / tau)
        .collect();
    let stderr_v = est.stderr_y.iter().map(|s| s / tau).collect();
    Ok(VelocityEstimate {
        bins: est.bins,
        tau,
        n: est.n.clone(),
        mean_y: est.mean_y.clone(),
        stderr_y: est.stderr_y.clone(),
        v_hat,
        stderr_v,
        censored_fraction: est.censored_fraction,
        n_min: est.n_min,
    })
}
