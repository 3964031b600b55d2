//! Multiplier families and the uniqueness footprint of the flux velocity.
//!
//! The operative question: which laws keep their velocity when the state is
//! multiplied by a real profile? A real multiplier leaves the phase alone,
//! so the flux velocity cannot move; a law that divides an added current by
//! the density does move, by an amount set by the profile. Families whose
//! gradients vanish nowhere also separate any two distinct
//! continuity-compatible currents, which is what the witness field measures.

use rayon::prelude::*;

use crate::dynamics::continuity::continuity_residual;
use crate::dynamics::velocity::{velocity_field_with_floor, VelocityLaw};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::potential::Potential;
use crate::wavefunction::{quantum_flux, WaveFunction};
use crate::Units;

/// A member counts toward spanning at a point when its derivative clears
/// this.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;

/// Currents entering a [`CurrentPair`] must close the continuity balance to
/// this residual.
pub const CONTINUITY_BOUND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    /// `exp(-(y - x)^2 / 4 spread^2)`, the pointer profile translated to `y`.
    Gaussian { spread: f64 },
    /// Identically one; the degenerate family every theorem hypothesis
    /// excludes.
    Constant,
}

/// Translated copies of one real profile, `phi_y(x) = profile(y - x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierFamily {
    shape: Shape,
    offsets: Vec<f64>,
}

impl MultiplierFamily {
    pub fn gaussian(spread: f64, offsets: Vec<f64>) -> Result<Self> {
        if !(spread > 0.0 && spread.is_finite()) {
            return Err(Error::NonPositiveSpread { value: spread });
        }
        if offsets.is_empty() {
            return Err(Error::TooFew { what: "family members", min: 1, got: 0 });
        }
        Ok(Self { shape: Shape::Gaussian { spread }, offsets })
    }

    pub fn constant() -> Self {
        Self { shape: Shape::Constant, offsets: vec![0.0] }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `phi_y(x)` for member `i`.
    pub fn value(&self, i: usize, x: f64) -> f64 {
        let u = self.offsets[i] - x;
        match self.shape {
            Shape::Gaussian { spread } => (-u * u / (4.0 * spread * spread)).exp(),
            Shape::Constant => 1.0,
        }
    }

    /// `phi_y'(x)`, in closed form.
    pub fn derivative(&self, i: usize, x: f64) -> f64 {
        let u = self.offsets[i] - x;
        match self.shape {
            Shape::Gaussian { spread } => {
                u / (2.0 * spread * spread) * (-u * u / (4.0 * spread * spread)).exp()
            }
            Shape::Constant => 0.0,
        }
    }

    /// `(phi_y^2)'(x)`, in closed form; the witness contracts currents
    /// against this.
    pub fn sq_derivative(&self, i: usize, x: f64) -> f64 {
        let u = self.offsets[i] - x;
        match self.shape {
            Shape::Gaussian { spread } => {
                u / (spread * spread) * (-u * u / (2.0 * spread * spread)).exp()
            }
            Shape::Constant => 0.0,
        }
    }

    pub fn is_gradient_total(&self, grid: GridSpec) -> bool {
        gradient_total_check(self, grid).iter().all(|&b| b)
    }
}

/// Span verdict per grid point: does some member's gradient survive there?
pub fn gradient_total_check(family: &MultiplierFamily, grid: GridSpec) -> Vec<bool> {
    (0..grid.n())
        .map(|j| {
            let x = grid.x(j);
            (0..family.len()).any(|i| family.derivative(i, x).abs() > GRADIENT_TOLERANCE)
        })
        .collect()
}

/// Largest velocity change any family member can induce:
/// `max_y max_x |v[psi phi_y](x) - v[psi](x)]` over the joint valid mask.
///
/// Exactly zero (to rounding) for the flux law; for a law with an added
/// current `eps` it is `eps |1/rho' - 1/rho|` maximized, which shrinks like
/// one power of the profile spread when the offsets scale with it.
pub fn multiplication_deviation(
    law: VelocityLaw,
    psi: &WaveFunction,
    units: Units,
    family: &MultiplierFamily,
    rho_floor_rel: f64,
) -> Result<f64> {
    let base = velocity_field_with_floor(psi, units, law, rho_floor_rel);
    let grid = psi.grid();
    let per_member: Vec<f64> = (0..family.len())
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let modulated = psi.modulated(|x| family.value(i, x))?;
            let shifted = velocity_field_with_floor(&modulated, units, law, rho_floor_rel);
            let mut worst: f64 = 0.0;
            for j in 0..grid.n() {
                if base.valid_at(j) && shifted.valid_at(j) {
                    worst = worst.max((shifted.node(j) - base.node(j)).abs());
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_member.into_iter().fold(0.0, f64::max))
}

/// Velocity change under the complex multiplier `exp(i a x)`.
///
/// This sits outside the real-multiplier hypothesis on purpose: the phase
/// shift moves every law's velocity by exactly `a hbar / m`, showing the
/// hypothesis is doing real work.
pub fn complex_phase_deviation(
    psi: &WaveFunction,
    units: Units,
    a: f64,
    rho_floor_rel: f64,
) -> Result<f64> {
    use num_complex::Complex64 as C64;
    let grid = psi.grid();
    let amp: Vec<C64> = psi
        .amp()
        .iter()
        .enumerate()
        .map(|(j, amp)| amp * C64::new(0.0, a * grid.x(j)).exp())
        .collect();
    let shifted_state = WaveFunction::from_amplitudes(grid, amp)?;
    let base = velocity_field_with_floor(psi, units, VelocityLaw::Bohmian, rho_floor_rel);
    let shifted = velocity_field_with_floor(&shifted_state, units, VelocityLaw::Bohmian, rho_floor_rel);
    let mut worst: f64 = 0.0;
    for j in 0..grid.n() {
        if base.valid_at(j) && shifted.valid_at(j) {
            worst = worst.max((shifted.node(j) - base.node(j)).abs());
        }
    }
    Ok(worst)
}

/// Two currents read off the same state by different laws, with the mask
/// they are comparable on.
///
/// Construction fails unless both laws close the continuity balance on this
/// state; a current that does not transport the density has no business in a
/// uniqueness comparison.
#[derive(Debug, Clone)]
pub struct CurrentPair {
    grid: GridSpec,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
    pub valid: Vec<bool>,
}

impl CurrentPair {
    pub fn from_laws(
        psi: &WaveFunction,
        potential: &Potential,
        units: Units,
        law1: VelocityLaw,
        law2: VelocityLaw,
        fd_dt: f64,
        rho_floor_rel: f64,
    ) -> Result<Self> {
        for law in [law1, law2] {
            let rep = continuity_residual(psi, potential, units, law, fd_dt)?;
            if rep.max_residual > CONTINUITY_BOUND {
                return Err(Error::DiagnosticLawRejected { law: law.label() });
            }
        }
        let flux = quantum_flux(psi, units);
        let grid = psi.grid();
        let floor = rho_floor_rel * flux.rho.iter().cloned().fold(0.0f64, f64::max);
        let j1 = (0..grid.n())
            .map(|j| flux.j[j] + law1.offset_current(grid.x(j)))
            .collect();
        let j2 = (0..grid.n())
            .map(|j| flux.j[j] + law2.offset_current(grid.x(j)))
            .collect();
        let valid = flux.rho.iter().map(|&r| r > floor).collect();
        Ok(Self { grid, j1, j2, valid })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }
}

/// Witness field `W(x) = max_y |(phi_y^2)'(x) (j1 - j2)(x)|`, NaN off the
/// mask.
///
/// On a family whose gradients vanish nowhere, `W` is positive wherever the
/// currents differ; on the constant family it is identically zero no matter
/// how different they are, which is why the spanning hypothesis matters.
pub fn uniqueness_witness(pair: &CurrentPair, family: &MultiplierFamily) -> Vec<f64> {
    (0..pair.grid.n())
        .map(|j| {
            if !pair.valid[j] {
                return f64::NAN;
            }
            let x = pair.grid.x(j);
            let dj = pair.j1[j] - pair.j2[j];
            (0..family.len())
                .map(|i| (family.sq_derivative(i, x) * dj).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}
