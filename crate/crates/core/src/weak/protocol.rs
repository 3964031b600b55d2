//! The measurement protocol, run to run: sample, couple, condition,
//! transport, record.
//!
//! Each run draws a particle from the Born density, draws the pointer
//! reading it implies, then lets the conditional state carry the particle
//! for the drift time. Runs are embarrassingly parallel; determinism comes
//! from giving run `i` stream `i` of one counter RNG, so the output is
//! byte-identical for a fixed master seed no matter how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::split_op::SplitOperator;
use crate::dynamics::trajectory::transport;
use crate::dynamics::velocity::VelocityLaw;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::wavefunction::{BornSampler, WaveFunction};
use crate::weak::pointer::{conditional_wavefunction, PointerModel};
use crate::Units;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    /// Pointer spread; larger is weaker.
    pub sigma: f64,
    /// Time between coupling and post-selection.
    pub tau: f64,
    pub n_runs: usize,
    /// Trajectory steps across `[0, tau]`.
    pub n_steps: usize,
    /// Largest tolerated censored fraction before the whole batch errors.
    pub censor_bound: f64,
    pub master_seed: u64,
}

impl ProtocolConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::NonPositiveTau { tau: self.tau });
        }
        if self.n_runs == 0 {
            return Err(Error::TooFew { what: "runs", min: 1, got: 0 });
        }
        if self.n_steps == 0 {
            return Err(Error::TooFew { what: "trajectory steps", min: 1, got: 0 });
        }
        if !(self.censor_bound >= 0.0) {
            return Err(Error::NonPositiveParameter {
                what: "censor bound",
                value: self.censor_bound,
            });
        }
        Ok(())
    }
}

/// One run. `x_tau` is `None` when the trajectory left the supported region
/// or the reading had no overlap with the state; such runs fail
/// post-selection and enter no bin, but their `x0` and `y` still count for
/// unconditional averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakRunRecord {
    pub x0: f64,
    pub y: f64,
    pub x_tau: Option<f64>,
    /// RNG stream this run consumed; with the master seed it replays the run.
    pub stream: u64,
}

#[derive(Debug, Clone)]
pub struct ProtocolOutput {
    pub records: Vec<WeakRunRecord>,
    pub censored_fraction: f64,
}

impl ProtocolOutput {
    /// Mean initial position over all runs, censored included.
    pub fn x0_mean(&self) -> f64 {
        self.records.iter().map(|r| r.x0).sum::<f64>() / self.records.len() as f64
    }

    /// Mean pointer reading over all runs, censored included.
    pub fn y_mean(&self) -> f64 {
        self.records.iter().map(|r| r.y).sum::<f64>() / self.records.len() as f64
    }
}

pub fn run_protocol(
    psi0: &WaveFunction,
    potential: &Potential,
    units: Units,
    law: VelocityLaw,
    cfg: &ProtocolConfig,
) -> Result<ProtocolOutput> {
    cfg.validate()?;
    if let VelocityLaw::LinearOffset { .. } = law {
        // it does not transport the Born density, so its records would
        // answer no question the protocol asks
        return Err(Error::DiagnosticLawRejected { law: law.label() });
    }
    let pointer = PointerModel::new(cfg.sigma)?;
    let sampler = BornSampler::new(psi0);
    let dt_half = cfg.tau / cfg.n_steps as f64 / 2.0;

    let records: Vec<WeakRunRecord> = (0..cfg.n_runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
            rng.set_stream(i as u64);
            let x0 = sampler.sample_with(&mut rng);
            let y = pointer.draw_reading(x0, &mut rng);
            let x_tau = conditional_wavefunction(psi0, &pointer, y).ok().and_then(|mut psi| {
                let mut op = SplitOperator::new(psi0.grid(), potential, units, dt_half).ok()?;
                let mut pos = [Some(x0)];
                transport(&mut psi, &mut op, units, law, &mut pos, cfg.n_steps);
                pos[0]
            });
            WeakRunRecord { x0, y, x_tau, stream: i as u64 }
        })
        .collect();

    let censored = records.iter().filter(|r| r.x_tau.is_none()).count();
    let censored_fraction = censored as f64 / cfg.n_runs as f64;
    if censored_fraction > cfg.censor_bound {
        return Err(Error::ExcessCensoring {
            fraction: censored_fraction,
            bound: cfg.censor_bound,
        });
    }
    Ok(ProtocolOutput { records, censored_fraction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::stats::{ks_critical_1pct, ks_statistic, normal_cdf};

    fn grid() -> GridSpec {
        GridSpec::new(-20.0, 20.0, 1024).unwrap()
    }

    fn base_config() -> ProtocolConfig {
        ProtocolConfig {
            sigma: 5.0,
            tau: 0.05,
            n_runs: 1000,
            n_steps: 10,
            censor_bound: 0.0,
            master_seed: 11,
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let psi = WaveFunction::gaussian(grid(), 0.0, 1.0, 0.0).unwrap();
        let cfg = ProtocolConfig { n_runs: 64, ..base_config() };
        let a = run_protocol(&psi, &Potential::Free, Units::default(), VelocityLaw::Bohmian, &cfg)
            .unwrap();
        let b = run_protocol(&psi, &Potential::Free, Units::default(), VelocityLaw::Bohmian, &cfg)
            .unwrap();
        assert_eq!(a.records, b.records);
        let cfg2 = ProtocolConfig { master_seed: 12, ..cfg };
        let c = run_protocol(&psi, &Potential::Free, Units::default(), VelocityLaw::Bohmian, &cfg2)
            .unwrap();
        assert_ne!(a.records, c.records);
    }

    // The reading is the particle position plus sigma times a standard
    // normal, so the paired differences are exactly that normal.
    #[test]
    fn readings_straddle_positions_by_the_pointer_spread() {
        let psi = WaveFunction::gaussian(grid(), 0.0, 1.0, 0.0).unwrap();
        let cfg = base_config();
        let out =
            run_protocol(&psi, &Potential::Free, Units::default(), VelocityLaw::Bohmian, &cfg)
                .unwrap();
        assert_eq!(out.censored_fraction, 0.0);
        let z: Vec<f64> = out.records.iter().map(|r| (r.y - r.x0) / cfg.sigma).collect();
        let d = ks_statistic(&z, |x| normal_cdf(x, 0.0, 1.0));
        assert!(d < ks_critical_1pct(z.len()), "KS = {d}");
        // unconditional means pair up: E[Y] = E[X0] plus noise of known size
        let diff = out.y_mean() - out.x0_mean();
        let bound = 4.0 * cfg.sigma / (cfg.n_runs as f64).sqrt();
        assert!(diff.abs() < bound, "diff = {diff}, bound = {bound}");
    }

    // A constant current offset this large drives every quantile past the
    // edge within tau, so the batch must fail its censor bound loudly.
    #[test]
    fn runaway_offset_law_trips_the_censor_bound() {
        let psi = WaveFunction::gaussian(grid(), 0.0, 1.0, 0.0).unwrap();
        let cfg = ProtocolConfig {
            sigma: 5.0,
            tau: 0.5,
            n_runs: 64,
            n_steps: 25,
            censor_bound: 0.5,
            master_seed: 3,
        };
        let err = run_protocol(
            &psi,
            &Potential::Free,
            Units::default(),
            VelocityLaw::ConstantOffset { epsilon: 2.0 },
            &cfg,
        );
        assert!(matches!(err, Err(Error::ExcessCensoring { .. })), "{err:?}");
    }

    #[test]
    fn diagnostic_law_is_refused() {
        let psi = WaveFunction::gaussian(grid(), 0.0, 1.0, 0.0).unwrap();
        let err = run_protocol(
            &psi,
            &Potential::Free,
            Units::default(),
            VelocityLaw::LinearOffset { slope: 0.1 },
            &base_config(),
        );
        assert!(matches!(err, Err(Error::DiagnosticLawRejected { .. })));
    }

    #[test]
    fn config_validation_catches_nonsense() {
        let bad_tau = ProtocolConfig { tau: 0.0, ..base_config() };
        assert!(bad_tau.validate().is_err());
        let no_runs = ProtocolConfig { n_runs: 0, ..base_config() };
        assert!(no_runs.validate().is_err());
        let bad_bound = ProtocolConfig { censor_bound: -0.1, ..base_config() };
        assert!(bad_bound.validate().is_err());
    }
}
