//! Velocity from post-selected weak values of position.
//!
//! Both matrix elements are ordinary propagated states: the position-weighted
//! state `x psi(x)` and `psi` itself are evolved for `tau`, and their
//! pointwise ratio is the weak value of position conditioned on arriving at
//! `x`. The velocity estimate is `(x - Re ratio) / tau`; extrapolating a
//! ladder of `tau` values to zero removes the finite-`tau` bias.

use num_complex::Complex64 as C64;

use crate::dynamics::split_op::SplitOperator;
use crate::dynamics::velocity::{VelocityField, DENSITY_FLOOR_REL};
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::wavefunction::WaveFunction;
use crate::Units;

/// Weak-value velocity at one drift time `tau`.
///
/// Valid where the arrival density `|U(tau) psi|^2` clears the relative
/// floor; elsewhere the ratio would divide by noise.
pub fn weak_value_velocity(
    psi: &WaveFunction,
    potential: &Potential,
    units: Units,
    tau: f64,
    n_steps: usize,
) -> Result<VelocityField> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::NonPositiveTau { tau });
    }
    if n_steps == 0 {
        return Err(Error::TooFew { what: "propagation steps", min: 1, got: 0 });
    }
    let grid = psi.grid();
    let weighted: Vec<C64> = psi
        .amp()
        .iter()
        .enumerate()
        .map(|(j, a)| a * grid.x(j))
        .collect();
    let mut num = WaveFunction::from_amplitudes(grid, weighted)?;
    let mut den = psi.clone();
    let mut op = SplitOperator::new(grid, potential, units, tau / n_steps as f64)?;
    op.evolve(&mut num, n_steps);
    op.evolve(&mut den, n_steps);

    let rho = den.rho();
    let floor = DENSITY_FLOOR_REL * rho.iter().cloned().fold(0.0f64, f64::max);
    let n = grid.n();
    let mut v = vec![f64::NAN; n];
    let mut valid = vec![false; n];
    for j in 0..n {
        if rho[j] > floor {
            let ratio = num.amp()[j] / den.amp()[j];
            v[j] = (grid.x(j) - ratio.re) / tau;
            valid[j] = true;
        }
    }
    Ok(VelocityField::from_nodes(grid, v, valid))
}

/// Lagrange weights for evaluating at zero a polynomial known at `taus`.
fn weights_at_zero(taus: &[f64]) -> Result<Vec<f64>> {
    if taus.len() < 2 {
        return Err(Error::BadTauLadder { detail: format!("{taus:?}") });
    }
    for w in taus.windows(2) {
        if !(w[0] > 0.0 && w[1] > w[0] && w[1].is_finite()) {
            return Err(Error::BadTauLadder { detail: format!("{taus:?}") });
        }
    }
    Ok((0..taus.len())
        .map(|i| {
            (0..taus.len())
                .filter(|&j| j != i)
                .map(|j| taus[j] / (taus[j] - taus[i]))
                .product()
        })
        .collect())
}

/// Polynomial extrapolation of `(tau, value)` pairs to `tau = 0`.
///
/// A ladder of `m` taus cancels bias terms through order `tau^(m-1)`.
pub fn extrapolate_to_zero(taus: &[f64], values: &[f64]) -> Result<f64> {
    if taus.len() != values.len() {
        return Err(Error::BadTauLadder {
            detail: format!("{} taus vs {} values", taus.len(), values.len()),
        });
    }
    let w = weights_at_zero(taus)?;
    Ok(w.iter().zip(values).map(|(w, v)| w * v).sum())
}

/// Weak-value velocity extrapolated to zero drift time, node by node.
///
/// Each ladder member is propagated with the same step count, so its step
/// size shrinks with `tau` and the splitting error stays higher order than
/// anything the ladder is meant to cancel.
pub fn weak_velocity_limit(
    psi: &WaveFunction,
    potential: &Potential,
    units: Units,
    taus: &[f64],
    n_steps: usize,
) -> Result<VelocityField> {
    let w = weights_at_zero(taus)?;
    let fields = taus
        .iter()
        .map(|&tau| weak_value_velocity(psi, potential, units, tau, n_steps))
        .collect::<Result<Vec<_>>>()?;
    let grid = psi.grid();
    let n = grid.n();
    let mut v = vec![f64::NAN; n];
    let mut valid = vec![false; n];
    for j in 0..n {
        if fields.iter().all(|f| f.valid_at(j)) {
            v[j] = fields.iter().zip(&w).map(|(f, w)| w * f.node(j)).sum();
            valid[j] = true;
        }
    }
    Ok(VelocityField::from_nodes(grid, v, valid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::velocity::{velocity_field, VelocityLaw};
    use crate::grid::GridSpec;
    use crate::wavefunction::PacketSpec;

    fn grid() -> GridSpec {
        GridSpec::new(-20.0, 20.0, 1024).unwrap()
    }

    const LADDER: [f64; 3] = [1e-4, 2e-4, 4e-4];

    #[test]
    fn extrapolation_is_exact_on_quadratics() {
        let f = |t: f64| 3.0 - 2.0 * t + 5.0 * t * t;
        let values: Vec<f64> = LADDER.iter().map(|&t| f(t)).collect();
        let v0 = extrapolate_to_zero(&LADDER, &values).unwrap();
        assert!((v0 - 3.0).abs() < 1e-12, "v0 = {v0}");
    }

    #[test]
    fn ladder_validation() {
        assert!(matches!(
            extrapolate_to_zero(&[1e-4], &[1.0]),
            Err(Error::BadTauLadder { .. })
        ));
        assert!(matches!(
            extrapolate_to_zero(&[2e-4, 1e-4], &[1.0, 1.0]),
            Err(Error::BadTauLadder { .. })
        ));
        assert!(matches!(
            extrapolate_to_zero(&[0.0, 1e-4], &[1.0, 1.0]),
            Err(Error::BadTauLadder { .. })
        ));
        assert!(matches!(
            extrapolate_to_zero(&LADDER, &[1.0, 1.0]),
            Err(Error::BadTauLadder { .. })
        ));
    }

    // A packet with carrier k0 moves at hbar k0 / m everywhere at t = 0;
    // the extrapolated weak value must land on that constant.
    #[test]
    fn boosted_packet_gives_uniform_velocity() {
        let psi = WaveFunction::gaussian(grid(), 0.0, 1.0, 2.0).unwrap();
        let field =
            weak_velocity_limit(&psi, &Potential::Free, Units::default(), &LADDER, 4).unwrap();
        for x in [-3.0, -1.2, 0.0, 0.9, 2.7] {
            let v = field.eval(x).unwrap();
            assert!((v - 2.0).abs() < 1e-7, "x = {x}: v = {v}");
        }
    }

    // Two routes to the same velocity: the weak-value limit against the flux
    // ratio of the bare state. They share no intermediate code beyond the
    // propagator, and the flux route does not propagate at all.
    #[test]
    fn weak_value_limit_matches_flux_velocity() {
        let units = Units::default();
        let psi = WaveFunction::superposition(
            grid(),
            &[
                PacketSpec { weight: 0.8, x0: -3.0, s0: 1.1, k0: 1.5 },
                PacketSpec { weight: 0.6, x0: 2.0, s0: 0.9, k0: -0.7 },
            ],
        )
        .unwrap();
        let pot = Potential::GaussianBarrier { height: 0.8, width: 1.2, center: 0.0 };
        let wv = weak_velocity_limit(&psi, &pot, units, &LADDER, 4).unwrap();
        let flux = velocity_field(&psi, units, VelocityLaw::Bohmian);
        for x in [-4.5, -3.0, -1.8, -0.4, 0.6, 2.0, 3.4] {
            let a = wv.eval(x).unwrap();
            let b = flux.eval(x).unwrap();
            assert!((a - b).abs() < 1e-6, "x = {x}: weak value {a}, flux {b}");
        }
    }

    // The harmonic force enters the weak value only at O(tau^2), so even one
    // ladder member is close; the extrapolation sharpens it further.
    #[test]
    fn potential_does_not_shift_the_limit() {
        let units = Units::default();
        let psi = WaveFunction::gaussian(grid(), 1.0, 0.8, 0.5).unwrap();
        let free =
            weak_velocity_limit(&psi, &Potential::Free, units, &LADDER, 4).unwrap();
        let trapped = weak_velocity_limit(
            &psi,
            &Potential::Harmonic { omega: 1.0 },
            units,
            &LADDER,
            4,
        )
        .unwrap();
        for x in [-0.5, 0.4, 1.0, 1.9] {
            let (a, b) = (free.eval(x).unwrap(), trapped.eval(x).unwrap());
            assert!((a - b).abs() < 1e-7, "x = {x}: free {a}, trapped {b}");
        }
    }
}
