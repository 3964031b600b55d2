//! Trajectory transport: integrating ensembles along a law's flow while the
//! state itself evolves.

use crate::dynamics::split_op::SplitOperator;
use crate::dynamics::velocity::{velocity_field_from_derivative, VelocityField, VelocityLaw};
use crate::error::Result;
use crate::potential::Potential;
use crate::spectral;
use crate::wavefunction::WaveFunction;
use crate::Units;

/// Classic RK4 for `dx/dt = v(x, t)` given the field at `t`, `t + dt/2`,
/// and `t + dt`. `None` when any stage lands outside the field's support:
/// the trajectory is censored, not extrapolated.
pub fn rk4_step(
    x: f64,
    f0: &VelocityField,
    fh: &VelocityField,
    f1: &VelocityField,
    dt: f64,
) -> Option<f64> {
    let k1 = f0.eval(x)?;
    let k2 = fh.eval(x + 0.5 * dt * k1)?;
    let k3 = fh.eval(x + 0.5 * dt * k2)?;
    let k4 = f1.eval(x + dt * k3)?;
    Some(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Advances every live position through `n_steps` RK4 steps while marching
/// `psi` forward in half-steps.
///
/// `op` must be configured with half the trajectory step so the midpoint
/// field is available to RK4. Censored entries stay `None`; a trajectory
/// that leaves the supported region becomes `None` and never comes back.
pub fn transport(
    psi: &mut WaveFunction,
    op: &mut SplitOperator,
    units: Units,
    law: VelocityLaw,
    positions: &mut [Option<f64>],
    n_steps: usize,
) {
    let dt = 2.0 * op.dt();
    let dpsi0 = spectral::derivative(psi.grid(), psi.amp());
    let mut f0 = velocity_field_from_derivative(psi, &dpsi0, units, law);
    let mut dpsi = dpsi0;
    for _ in 0..n_steps {
        op.step_with_derivative(psi, &mut dpsi);
        let fh = velocity_field_from_derivative(psi, &dpsi, units, law);
        op.step_with_derivative(psi, &mut dpsi);
        let f1 = velocity_field_from_derivative(psi, &dpsi, units, law);
        for p in positions.iter_mut() {
            if let Some(x) = *p {
                *p = rk4_step(x, &f0, &fh, &f1, dt);
            }
        }
        f0 = f1;
    }
}

/// Convenience wrapper: fresh propagator, owned output.
pub fn transport_ensemble(
    psi0: &WaveFunction,
    potential: &Potential,
    units: Units,
    law: VelocityLaw,
    starts: &[f64],
    t_final: f64,
    n_steps: usize,
) -> Result<Vec<Option<f64>>> {
    let dt_half = t_final / n_steps as f64 / 2.0;
    let mut op = SplitOperator::new(psi0.grid(), potential, units, dt_half)?;
    let mut psi = psi0.clone();
    let mut positions: Vec<Option<f64>> = starts.iter().map(|&x| Some(x)).collect();
    transport(&mut psi, &mut op, units, law, &mut positions, n_steps);
    Ok(positions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::oracles::{FreeGaussian, TrappedCoherent};
    use crate::stats::{ks_critical_1pct, ks_statistic, normal_cdf};
    use crate::wavefunction::sample_positions;

    fn grid() -> GridSpec {
        GridSpec::new(-20.0, 20.0, 1024).unwrap()
    }

    #[test]
    fn free_trajectories_follow_characteristics() {
        let grid = grid();
        let units = Units::default();
        let f = FreeGaussian { x0: 0.0, s0: 1.0, k0: 0.5, units };
        let psi = WaveFunction::gaussian(grid, f.x0, f.s0, f.k0).unwrap();
        let starts = [-2.0, -0.5, 0.0, 1.0, 2.5];
        let t = 1.5;
        let ends =
            transport_ensemble(&psi, &Potential::Free, units, VelocityLaw::Bohmian, &starts, t, 60)
                .unwrap();
        for (s, e) in starts.iter().zip(&ends) {
            let want = f.characteristic(*s, t);
            let got = e.expect("trajectory stayed in support");
            assert!((got - want).abs() < 1e-7, "start {s}: got {got}, want {want}");
        }
    }

    #[test]
    fn trapped_trajectories_translate_rigidly() {
        let grid = grid();
        let units = Units::default();
        let c = TrappedCoherent { omega: 1.0, x0: 2.0, k0: 0.0, units };
        let psi = WaveFunction::gaussian(grid, c.x0, c.width(), 0.0).unwrap();
        let pot = Potential::Harmonic { omega: c.omega };
        let starts = [1.0, 2.0, 3.0];
        let t = 0.5 * c.period();
        let ends =
            transport_ensemble(&psi, &pot, units, VelocityLaw::Bohmian, &starts, t, 800).unwrap();
        let shift = c.center(t) - c.x0;
        for (s, e) in starts.iter().zip(&ends) {
            let got = e.unwrap();
            assert!((got - (s + shift)).abs() < 1e-5, "start {s}: got {got}");
        }
    }

    // Transported Born samples must still look like the evolved density.
    #[test]
    fn transported_samples_match_evolved_density() {
        let grid = grid();
        let units = Units::default();
        let f = FreeGaussian { x0: 0.0, s0: 1.0, k0: 0.0, units };
        let psi = WaveFunction::gaussian(grid, f.x0, f.s0, f.k0).unwrap();
        let starts = sample_positions(&psi, 20_000, 4242);
        let t = 1.0;
        let ends =
            transport_ensemble(&psi, &Potential::Free, units, VelocityLaw::Bohmian, &starts, t, 50)
                .unwrap();
        let finals: Vec<f64> = ends.iter().map(|e| e.unwrap()).collect();
        let oracle = f.density(t);
        let d = ks_statistic(&finals, |x| normal_cdf(x, oracle.mean, oracle.sd));
        assert!(d < ks_critical_1pct(finals.len()), "KS = {d}");
    }

    // Under a constant current offset the transported quantile level rises
    // linearly: F_t(X_t) = F_0(X_0) + eps * t, exactly.
    #[test]
    fn constant_offset_drifts_quantiles_linearly() {
        let grid = grid();
        let units = Units::default();
        let eps = 0.05;
        let f = FreeGaussian { x0: 0.0, s0: 1.0, k0: 0.0, units };
        let psi = WaveFunction::gaussian(grid, f.x0, f.s0, f.k0).unwrap();
        let t = 1.0;
        let ends = transport_ensemble(
            &psi,
            &Potential::Free,
            units,
            VelocityLaw::ConstantOffset { epsilon: eps },
            &[0.0],
            t,
            100,
        )
        .unwrap();
        let x_end = ends[0].unwrap();
        let oracle = f.density(t);
        let level = normal_cdf(x_end, oracle.mean, oracle.sd);
        assert!((level - (0.5 + eps * t)).abs() < 1e-5, "quantile level {level}");
    }

    #[test]
    fn censoring_is_sticky() {
        let grid = grid();
        let units = Units::default();
        let psi = WaveFunction::gaussian(grid, 0.0, 1.0, 0.0).unwrap();
        let mut op = SplitOperator::new(grid, &Potential::Free, units, 0.005).unwrap();
        let mut psi = psi;
        // one live start deep in the masked tail, one already censored
        let mut positions = vec![Some(-19.5), None];
        transport(&mut psi, &mut op, units, VelocityLaw::Bohmian, &mut positions, 10);
        assert_eq!(positions, vec![None, None]);
    }
}
