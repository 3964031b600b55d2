//! Continuity diagnostic: checks that a law's current actually transports
//! the density.
//!
//! The residual is `d_t rho + d_x j + div(offset)`. The time derivative is a
//! centered difference of the propagated density, the flux divergence is
//! spectral, and the offset divergence is analytic; differentiating the
//! offset numerically would ring on the non-periodic diagnostic offsets.

use crate::dynamics::split_op::SplitOperator;
use crate::dynamics::velocity::VelocityLaw;
use crate::error::Result;
use crate::potential::Potential;
use crate::spectral::Spectral;
use crate::wavefunction::{quantum_flux, WaveFunction};
use crate::Units;

/// Nodes below this fraction of the peak density are excluded from the max.
const SUPPORT_FLOOR_REL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct ContinuityReport {
    /// `max |d_t rho + d_x j + div offset|` over supported nodes.
    pub max_residual: f64,
    /// `max |d_x j|`, the natural scale to compare the residual against.
    pub flux_scale: f64,
}

impl ContinuityReport {
    pub fn relative(&self) -> f64 {
        self.max_residual / self.flux_scale.max(f64::MIN_POSITIVE)
    }
}

pub fn continuity_residual(
    psi: &WaveFunction,
    potential: &Potential,
    units: Units,
    law: VelocityLaw,
    dt: f64,
) -> Result<ContinuityReport> {
    let grid = psi.grid();
    let mut op = SplitOperator::new(grid, potential, units, dt)?;

    let mut fwd = psi.clone();
    op.step(&mut fwd);
    // backward step by time reversal: conjugate, march forward, conjugate
    let mut bwd = psi.conjugate();
    op.step(&mut bwd);
    let (rho_p, rho_m) = (fwd.rho(), bwd.rho());

    let flux = quantum_flux(psi, units);
    let mut spectral = Spectral::new(grid);
    let mut djdx = vec![0.0; grid.n()];
    spectral.derivative_real(&flux.j, &mut djdx);

    let rho = psi.rho();
    let floor = SUPPORT_FLOOR_REL * rho.iter().cloned().fold(0.0f64, f64::max);
    let div_offset = law.offset_divergence();
    let mut max_residual: f64 = 0.0;
    let mut flux_scale: f64 = 0.0;
    for j in 0..grid.n() {
        flux_scale = flux_scale.max(djdx[j].abs());
        if rho[j] > floor {
            let dtrho = (rho_p[j] - rho_m[j]) / (2.0 * dt);
            max_residual = max_residual.max((dtrho + djdx[j] + div_offset).abs());
        }
    }
    Ok(ContinuityReport { max_residual, flux_scale })
}
