//! The measurement pointer and the conditional state it leaves behind.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::wavefunction::WaveFunction;

/// Pointer wave `(2 pi sigma^2)^{-1/4} exp(-y^2 / 4 sigma^2)`.
///
/// Its position density is normal with sd `sigma`; a large `sigma` is what
/// makes the measurement weak.
#[derive(Debug, Clone, Copy)]
pub struct PointerModel {
    sigma: f64,
}

impl PointerModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::NonPositiveSigma { sigma });
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Unnormalized profile shape; normalization washes out in the
    /// conditional state anyway.
    pub fn amplitude(&self, y: f64) -> f64 {
        (-y * y / (4.0 * self.sigma * self.sigma)).exp()
    }

    /// One reading for a particle at `x`: the pointer lands at
    /// `x + sigma * z`.
    pub fn draw_reading(&self, x: f64, rng: &mut impl Rng) -> f64 {
        x + self.sigma * rng.sample::<f64, _>(StandardNormal)
    }
}

/// State conditioned on the reading `y`: the original amplitude reweighted
/// by the displaced pointer profile, then renormalized.
///
/// The profile is real, so the phase, and with it the flow, survives the
/// conditioning untouched; only the envelope narrows toward `y`.
pub fn conditional_wavefunction(
    psi: &WaveFunction,
    pointer: &PointerModel,
    y: f64,
) -> Result<WaveFunction> {
    psi.modulated(|x| pointer.amplitude(y - x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::oracles::{density_product, Gaussian1d};
    use crate::Units;

    fn grid() -> GridSpec {
        GridSpec::new(-20.0, 20.0, 1024).unwrap()
    }

    #[test]
    fn rejects_bad_sigma() {
        assert!(PointerModel::new(0.0).is_err());
        assert!(PointerModel::new(-1.0).is_err());
        assert!(PointerModel::new(f64::NAN).is_err());
    }

    // Conditioning a Gaussian packet on a reading is exactly the normal
    // product rule: precision-weighted mean, combined width.
    #[test]
    fn conditional_density_is_the_product_gaussian() {
        let grid = grid();
        let psi = WaveFunction::gaussian(grid, -1.0, 1.5, 0.7).unwrap();
        let pointer = PointerModel::new(2.0).unwrap();
        let y = 1.2;
        let cond = conditional_wavefunction(&psi, &pointer, y).unwrap();
        let oracle = density_product(
            Gaussian1d { mean: -1.0, sd: 1.5 },
            Gaussian1d { mean: y, sd: pointer.sigma() },
        );
        let rho = cond.rho();
        let mut worst: f64 = 0.0;
        for j in 0..grid.n() {
            worst = worst.max((rho[j] - oracle.density(grid.x(j))).abs());
        }
        assert!(worst < 1e-12, "worst density error {worst}");
    }

    // The pointer profile is real, so conditioning must not touch the flow.
    #[test]
    fn conditioning_preserves_the_velocity_field() {
        use crate::dynamics::velocity::{velocity_field, VelocityLaw};
        let grid = grid();
        let units = Units::default();
        let psi = WaveFunction::superposition(
            grid,
            &[
                crate::wavefunction::PacketSpec { weight: 0.8, x0: -2.0, s0: 1.0, k0: 1.0 },
                crate::wavefunction::PacketSpec { weight: 0.6, x0: 2.0, s0: 1.0, k0: -1.0 },
            ],
        )
        .unwrap();
        let pointer = PointerModel::new(3.0).unwrap();
        let cond = conditional_wavefunction(&psi, &pointer, 0.8).unwrap();
        let v_before = velocity_field(&psi, units, VelocityLaw::Bohmian);
        let v_after = velocity_field(&cond, units, VelocityLaw::Bohmian);
        for x in [-4.0, -2.0, -0.3, 0.0, 1.7, 3.9] {
            let (a, b) = (v_before.eval(x).unwrap(), v_after.eval(x).unwrap());
            assert!((a - b).abs() < 1e-9, "x = {x}: {a} vs {b}");
        }
    }

    #[test]
    fn vanishing_overlap_is_an_error() {
        let grid = grid();
        let psi = WaveFunction::gaussian(grid, 0.0, 0.5, 0.0).unwrap();
        let pointer = PointerModel::new(0.05).unwrap();
        // reading so far out that the reweighted amplitude underflows
        let err = conditional_wavefunction(&psi, &pointer, 19.0);
        assert!(matches!(err, Err(Error::VanishingOverlap { .. })));
    }
}
