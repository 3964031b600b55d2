//! Normalized states on the grid, their probability flux, and Born sampling.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::spectral::Spectral;
use crate::Units;

/// Fraction of the peak amplitude allowed at the domain edge; constructors
/// reject states whose tails touch the periodic boundary harder than this.
pub const EDGE_DECAY_LIMIT: f64 = 1e-10;

/// Norms below this are treated as zero when normalizing.
const NORM_FLOOR: f64 = 1e-280;

/// A single-particle state sampled on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: GridSpec,
    amp: Vec<C64>,
}

/// One Gaussian component of a superposition: weight, center, width,
/// carrier wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketSpec {
    pub weight: f64,
    pub x0: f64,
    pub s0: f64,
    pub k0: f64,
}

impl WaveFunction {
    /// Wraps raw amplitudes without normalizing; lengths must match.
    pub fn from_amplitudes(grid: GridSpec, amp: Vec<C64>) -> Result<Self> {
        if amp.len() != grid.n() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, amp })
    }

    /// Normalized Gaussian packet `exp(-(x - x0)^2 / (4 s0^2) + i k0 x)`.
    ///
    /// `s0` is the position standard deviation of `|psi|^2`. Fails if the
    /// packet does not decay to [`EDGE_DECAY_LIMIT`] of its peak at the
    /// domain edge, since the periodic propagator would wrap its tails.
    pub fn gaussian(grid: GridSpec, x0: f64, s0: f64, k0: f64) -> Result<Self> {
        Self::superposition(grid, &[PacketSpec { weight: 1.0, x0, s0, k0 }])
    }

    /// Normalized weighted sum of Gaussian packets.
    pub fn superposition(grid: GridSpec, packets: &[PacketSpec]) -> Result<Self> {
        if packets.is_empty() {
            return Err(Error::TooFew { what: "packets", min: 1, got: 0 });
        }
        for p in packets {
            if !(p.s0 > 0.0) {
                return Err(Error::NonPositiveWidth { s0: p.s0 });
            }
        }
        let amp: Vec<C64> = grid
            .xs()
            .iter()
            .map(|&x| {
                packets
                    .iter()
                    .map(|p| {
                        let norm = (std::f64::consts::TAU * p.s0 * p.s0).powf(-0.25);
                        let arg = -(x - p.x0).powi(2) / (4.0 * p.s0 * p.s0);
                        p.weight * norm * arg.exp() * C64::new(0.0, p.k0 * x).exp()
                    })
                    .sum()
            })
            .collect();
        let mut psi = Self { grid, amp };
        psi.check_edge_decay()?;
        psi.normalize()?;
        Ok(psi)
    }

    fn check_edge_decay(&self) -> Result<()> {
        let peak = self.amp.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let edge = self.amp[0].norm().max(self.amp[self.grid.n() - 1].norm());
        let edge_frac = edge / peak;
        if edge_frac >= EDGE_DECAY_LIMIT {
            return Err(Error::EdgeSupport { edge_frac, limit: EDGE_DECAY_LIMIT });
        }
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn amp(&self) -> &[C64] {
        &self.amp
    }

    pub fn amp_mut(&mut self) -> &mut [C64] {
        &mut self.amp
    }

    /// `integral of |psi|^2 dx` by the periodic rectangle rule.
    pub fn norm_sq(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// Rescales to unit norm; rejects zero-norm input. Idempotent to
    /// rounding.
    pub fn normalize(&mut self) -> Result<()> {
        let n2 = self.norm_sq();
        if !(n2 > NORM_FLOOR) {
            return Err(Error::ZeroNorm);
        }
        let inv = 1.0 / n2.sqrt();
        for a in &mut self.amp {
            *a *= inv;
        }
        Ok(())
    }

    /// `|psi|^2` at every grid point.
    pub fn rho(&self) -> Vec<f64> {
        self.amp.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Complex conjugate (time-reversed) state.
    pub fn conjugate(&self) -> Self {
        Self {
            grid: self.grid,
            amp: self.amp.iter().map(|a| a.conj()).collect(),
        }
    }

    /// Pointwise product with a real profile, renormalized.
    ///
    /// Fails with [`Error::VanishingOverlap`] when the profile annihilates
    /// the state.
    pub fn modulated(&self, profile: impl Fn(f64) -> f64) -> Result<Self> {
        let amp: Vec<C64> = self
            .grid
            .xs()
            .iter()
            .zip(&self.amp)
            .map(|(&x, a)| a * profile(x))
            .collect();
        let mut out = Self { grid: self.grid, amp };
        let n2 = out.norm_sq();
        if !(n2 > NORM_FLOOR) {
            return Err(Error::VanishingOverlap { norm_sq: n2 });
        }
        out.normalize()?;
        Ok(out)
    }
}

/// Probability density and probability current of one state.
#[derive(Debug, Clone)]
pub struct FluxField {
    grid: GridSpec,
    pub rho: Vec<f64>,
    pub j: Vec<f64>,
}

impl FluxField {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }
}

/// Quantum flux `j = (hbar/m) Im(conj(psi) d psi/dx)` with the derivative
/// taken spectrally, alongside `rho = |psi|^2`.
///
/// The conjugate goes on the left factor; that is the convention under which
/// `d rho/dt + d j/dx = 0` holds for Schroedinger evolution.
pub fn quantum_flux(psi: &WaveFunction, units: Units) -> FluxField {
    let grid = psi.grid();
    let mut sp = Spectral::new(grid);
    let mut dpsi = vec![C64::ZERO; grid.n()];
    sp.derivative(psi.amp(), &mut dpsi);
    flux_from_derivative(psi, &dpsi, units)
}

/// Flux from a precomputed spatial derivative (hot paths keep `dpsi` around).
pub fn flux_from_derivative(psi: &WaveFunction, dpsi: &[C64], units: Units) -> FluxField {
    let pref = units.hbar_over_m();
    let rho = psi.rho();
    let j = psi
        .amp()
        .iter()
        .zip(dpsi)
        .map(|(a, d)| pref * (a.conj() * d).im)
        .collect();
    FluxField { grid: psi.grid(), rho, j }
}

/// Draws positions from `|psi|^2` by inverting the node-wise CDF, linearly
/// within cells.
#[derive(Debug, Clone)]
pub struct BornSampler {
    grid: GridSpec,
    /// CDF at cell edges `x_min + j dx`, `j = 0..=n`; `cdf[n]` is the total.
    cdf: Vec<f64>,
}

impl BornSampler {
    pub fn new(psi: &WaveFunction) -> Self {
        let grid = psi.grid();
        let rho = psi.rho();
        let dx = grid.dx();
        let n = grid.n();
        let mut cdf = Vec::with_capacity(n + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for j in 0..n {
            // trapezoid over the periodic cell (j, j+1)
            let next = rho[(j + 1) % n];
            acc += 0.5 * (rho[j] + next) * dx;
            cdf.push(acc);
        }
        Self { grid, cdf }
    }

    /// Maps a uniform variate in `[0, 1)` to a position.
    pub fn position(&self, u: f64) -> f64 {
        let total = self.cdf[self.grid.n()];
        let target = u.clamp(0.0, 1.0) * total;
        let hi = self.cdf.partition_point(|&c| c <= target).min(self.grid.n());
        let j = hi - 1;
        let lo = self.cdf[j];
        let seg = self.cdf[hi] - lo;
        let frac = if seg > 0.0 { (target - lo) / seg } else { 0.0 };
        self.grid.x_min() + (j as f64 + frac) * self.grid.dx()
    }

    pub fn sample_with(&self, rng: &mut impl Rng) -> f64 {
        self.position(rng.random::<f64>())
    }
}

/// `n_samples` independent draws from `|psi|^2`, reproducible from `seed`.
pub fn sample_positions(psi: &WaveFunction, n_samples: usize, seed: u64) -> Vec<f64> {
    let sampler = BornSampler::new(psi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples).map(|_| sampler.sample_with(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_critical_1pct, ks_statistic, normal_cdf};

    fn grid() -> GridSpec {
        GridSpec::new(-20.0, 20.0, 1024).unwrap()
    }

    #[test]
    fn gaussian_is_normalized() {
        let psi = WaveFunction::gaussian(grid(), 0.0, 1.0, 0.0).unwrap();
        assert!((psi.norm_sq() - 1.0).abs() < 1e-12);
        // peak density of a unit-width packet
        let rho0 = psi.rho()[512];
        assert!((rho0 - (std::f64::consts::TAU).powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn rejects_packet_touching_edge() {
        assert!(matches!(
            WaveFunction::gaussian(grid(), 15.0, 3.0, 0.0),
            Err(Error::EdgeSupport { .. })
        ));
        assert!(matches!(
            WaveFunction::gaussian(grid(), 0.0, -1.0, 0.0),
            Err(Error::NonPositiveWidth { .. })
        ));
    }

    #[test]
    fn normalize_is_idempotent_and_rejects_zero() {
        let mut psi = WaveFunction::gaussian(grid(), 0.0, 1.0, 0.5).unwrap();
        let before = psi.amp().to_vec();
        psi.normalize().unwrap();
        for (a, b) in psi.amp().iter().zip(&before) {
            assert!((a - b).norm() < 1e-15);
        }
        let mut zero =
            WaveFunction::from_amplitudes(grid(), vec![C64::ZERO; 1024]).unwrap();
        assert!(matches!(zero.normalize(), Err(Error::ZeroNorm)));
    }

    #[test]
    fn real_state_has_zero_flux() {
        let psi = WaveFunction::gaussian(grid(), 0.0, 1.0, 0.0).unwrap();
        let flux = quantum_flux(&psi, Units::default());
        let max_j = flux.j.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(max_j < 1e-12, "max |j| = {max_j:.3e}");
        let total: f64 = flux.rho.iter().sum::<f64>() * 0.0390625;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn carrier_packet_flux_is_k0_rho() {
        let psi = WaveFunction::gaussian(grid(), 0.0, 1.0, 2.0).unwrap();
        let flux = quantum_flux(&psi, Units::default());
        // bulk: where the density is appreciable
        for (j, (&jv, &rv)) in flux.j.iter().zip(&flux.rho).enumerate() {
            if rv > 1e-6 {
                assert!(
                    (jv - 2.0 * rv).abs() < 1e-10,
                    "at index {j}: j = {jv}, 2 rho = {}",
                    2.0 * rv
                );
            }
        }
    }

    #[test]
    fn flux_matches_finite_difference_oracle() {
        // independent route: 4th-order centered finite differences
        let grid = grid();
        let psi = WaveFunction::superposition(
            grid,
            &[
                PacketSpec { weight: 0.6, x0: -2.0, s0: 1.0, k0: 1.0 },
                PacketSpec { weight: 0.8, x0: 2.0, s0: 1.0, k0: -1.0 },
            ],
        )
        .unwrap();
        let flux = quantum_flux(&psi, Units::default());
        let amp = psi.amp();
        let n = grid.n();
        let dx = grid.dx();
        for j in 0..n {
            let a = |o: isize| amp[grid.wrap(j as isize + o)];
            let d = (a(-2) - a(2) * 1.0 + (a(1) - a(-1)) * 8.0) / (12.0 * dx);
            let oracle = (amp[j].conj() * d).im;
            assert!(
                (flux.j[j] - oracle).abs() < 1e-6,
                "at index {j}: spectral {} vs fd {}",
                flux.j[j],
                oracle
            );
        }
    }

    #[test]
    fn global_phase_leaves_flux_invariant() {
        let psi = WaveFunction::gaussian(grid(), 1.0, 1.5, 0.7).unwrap();
        let phase = C64::new(0.0, 1.234).exp();
        let rotated = WaveFunction::from_amplitudes(
            grid(),
            psi.amp().iter().map(|a| a * phase).collect(),
        )
        .unwrap();
        let f1 = quantum_flux(&psi, Units::default());
        let f2 = quantum_flux(&rotated, Units::default());
        for (a, b) in f1.j.iter().zip(&f2.j) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn born_samples_pass_ks_against_exact_gaussian() {
        let psi = WaveFunction::gaussian(grid(), 0.0, 1.0, 0.0).unwrap();
        let n = 100_000;
        let mut xs = sample_positions(&psi, n, 42);
        xs.sort_by(f64::total_cmp);
        let d = ks_statistic(&xs, |x| normal_cdf(x, 0.0, 1.0));
        assert!(d < ks_critical_1pct(n), "KS = {d:.5}");
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let psi = WaveFunction::gaussian(grid(), 0.0, 1.0, 0.0).unwrap();
        assert_eq!(sample_positions(&psi, 1000, 7), sample_positions(&psi, 1000, 7));
        assert_ne!(sample_positions(&psi, 1000, 7), sample_positions(&psi, 1000, 8));
    }
}
