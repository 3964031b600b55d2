//! Runs a parsed config into estimates, pass/fail checks, and notes.
//!
//! Every check lands in the bundle as `(check_id, measured, tolerance, op)`
//! so the summary file carries the numbers behind each verdict, not just a
//! boolean. Execution errors abort the run; a failed check does not.

use std::time::Instant;

use serde::Serialize;
use weakflow::characterization::{
    complex_phase_deviation, gradient_total_check, multiplication_deviation, uniqueness_witness,
    CurrentPair, MultiplierFamily,
};
use weakflow::dynamics::{
    continuity_residual, transport_ensemble, velocity_field_with_floor, SplitOperator, VelocityLaw,
};
use weakflow::stats::{
    conditional_mean_by_bin, ks_critical_1pct, ks_statistic, normal_cdf, weak_velocity_estimate,
    BinSpec, SweepCell, VelocityEstimate,
};
use weakflow::wavefunction::sample_positions;
use weakflow::weak::{run_protocol, ProtocolConfig, WeakRunRecord};
use weakflow::{Error, GridSpec, Potential, Result, Units, WaveFunction};

use crate::config::{ParsedConfig, StateSpec};
use crate::output::config_hash;

#[derive(Debug, Clone, Serialize)]
pub struct CheckVerdict {
    pub check_id: String,
    pub measured: f64,
    pub tolerance: f64,
    /// How `measured` relates to `tolerance` when the check passes.
    pub op: &'static str,
    pub pass: bool,
}

impl CheckVerdict {
    /// Passes when the measured value stays at or below the bound.
    fn below(check_id: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            check_id: check_id.into(),
            measured,
            tolerance,
            op: "<=",
            pass: measured <= tolerance,
        }
    }

    /// Passes when the measured value clears the bound from above.
    fn above(check_id: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            check_id: check_id.into(),
            measured,
            tolerance,
            op: ">=",
            pass: measured >= tolerance,
        }
    }
}

/// One bin of a velocity estimate next to its reference values.
#[derive(Debug, Clone, Copy)]
pub struct BinRow {
    pub bin_center: f64,
    pub n: usize,
    pub mean_y: f64,
    pub stderr_y: f64,
    pub v_hat: f64,
    pub stderr_v: f64,
    /// Flux-law velocity at the bin center, NaN off the density support.
    pub v_bohmian_ref: f64,
    /// Configured law's velocity at the bin center; equals the flux value
    /// when the law is the flux law.
    pub v_law_ref: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub sigma: f64,
    pub tau: f64,
    pub delta: f64,
    pub row: BinRow,
}

#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub experiment: String,
    pub config_hash: String,
    pub code_version: String,
    pub master_seed: u64,
    pub wall_time_s: f64,
    pub estimates: Vec<BinRow>,
    pub sweep_rows: Vec<SweepRow>,
    pub checks: Vec<CheckVerdict>,
    pub notes: Vec<String>,
    pub raw_config: String,
}

impl ResultBundle {
    fn new(cfg: &ParsedConfig) -> Self {
        Self {
            experiment: cfg.experiment.label().to_string(),
            config_hash: config_hash(&cfg.raw),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: cfg.run.master_seed,
            wall_time_s: 0.0,
            estimates: Vec::new(),
            sweep_rows: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            raw_config: cfg.raw.clone(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn run_experiment(cfg: &ParsedConfig) -> Result<ResultBundle> {
    let t0 = Instant::now();
    let units = Units::default();
    let mut bundle = ResultBundle::new(cfg);
    match cfg.experiment {
        crate::config::ExperimentKind::WeakVelocity => {
            run_weak_velocity(cfg, units, &mut bundle)?
        }
        crate::config::ExperimentKind::AnalyticWv => run_analytic(cfg, units, &mut bundle)?,
        crate::config::ExperimentKind::Sweep => run_sweep(cfg, units, &mut bundle)?,
        crate::config::ExperimentKind::Characterize => run_characterize(cfg, units, &mut bundle)?,
        crate::config::ExperimentKind::Equivariance => run_equivariance(cfg, units, &mut bundle)?,
    }
    bundle.wall_time_s = t0.elapsed().as_secs_f64();
    Ok(bundle)
}

/// Builds the packet and, when asked, lets it evolve under the potential
/// before anything is measured.
fn prepare_state(
    grid: GridSpec,
    state: &StateSpec,
    potential: &Potential,
    units: Units,
    dt: f64,
) -> Result<WaveFunction> {
    let mut psi = WaveFunction::superposition(grid, &state.packets)?;
    if state.prep_time > 0.0 {
        // hit prep_time exactly with a step no larger than the configured dt
        let n = (state.prep_time / dt).ceil().max(1.0) as usize;
        let mut op = SplitOperator::new(grid, potential, units, state.prep_time / n as f64)?;
        op.evolve(&mut psi, n);
    }
    Ok(psi)
}

fn bin_rows(
    est: &VelocityEstimate,
    v_bohm: &weakflow::dynamics::VelocityField,
    v_law: &weakflow::dynamics::VelocityField,
) -> Vec<BinRow> {
    (0..est.bins.n_bins())
        .map(|k| {
            let c = est.bins.center(k);
            BinRow {
                bin_center: c,
                n: est.n[k],
                mean_y: est.mean_y[k],
                stderr_y: est.stderr_y[k],
                v_hat: est.v_hat[k],
                stderr_v: est.stderr_v[k],
                v_bohmian_ref: v_bohm.eval(c).unwrap_or(f64::NAN),
                v_law_ref: v_law.eval(c).unwrap_or(f64::NAN),
                reliable: est.reliable(k),
            }
        })
        .collect()
}

fn run_weak_velocity(cfg: &ParsedConfig, units: Units, bundle: &mut ResultBundle) -> Result<()> {
    let p = cfg.protocol.as_ref().expect("validated");
    let checks = &cfg.checks;
    let psi = prepare_state(cfg.grid, &cfg.state, &cfg.potential, units, cfg.run.dt)?;

    let pcfg = ProtocolConfig {
        sigma: p.sigma,
        tau: p.tau,
        n_runs: p.n_runs,
        n_steps: p.n_steps,
        censor_bound: p.censor_bound,
        master_seed: cfg.run.master_seed,
    };
    let out = match run_protocol(&psi, &cfg.potential, units, cfg.law, &pcfg) {
        Ok(out) => out,
        // a censoring blowout is a verdict about the configuration, not a
        // crash: report it as the failed check it is
        Err(Error::ExcessCensoring { fraction, bound }) => {
            bundle.checks.push(CheckVerdict::below("censored_fraction", fraction, bound));
            bundle
                .notes
                .push("run aborted: too many trajectories left the support; no estimates".into());
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    bundle.checks.push(CheckVerdict::below(
        "censored_fraction",
        out.censored_fraction,
        p.censor_bound,
    ));

    let bins = BinSpec::lattice(cfg.grid, p.bin_width)?;
    let cond = conditional_mean_by_bin(&out.records, bins, p.n_min);
    let est = weak_velocity_estimate(&cond, p.tau)?;
    let v_bohm = velocity_field_with_floor(&psi, units, VelocityLaw::Bohmian, p.rho_min);
    let v_law = velocity_field_with_floor(&psi, units, cfg.law, p.rho_min);
    bundle.estimates = bin_rows(&est, &v_bohm, &v_law);

    let reliable = est.reliable_indices();
    bundle.checks.push(CheckVerdict::above(
        "reliable_bins",
        reliable.len() as f64,
        checks.min_reliable_bins as f64,
    ));

    // The law checks range over the claim window. Far outside the packet the
    // drift during the coupling outruns the field's own variation scale and
    // the readout crosses over to the plain transport velocity, so no
    // order-tau claim is made there.
    let window = claim_window(&psi, checks.claim_region);
    let claimed: Vec<usize> = reliable
        .iter()
        .copied()
        .filter(|&k| window.contains(est.bins.center(k)))
        .collect();
    if let Some((lo, hi)) = window.edges {
        bundle
            .notes
            .push(format!("claim window [{lo:.4}, {hi:.4}]: {} of {} reliable bins", claimed.len(), reliable.len()));
    }

    // the estimate must track the flux-law field bin by bin, within the
    // larger of its own noise band and a small fraction of the field scale
    let scale = claimed
        .iter()
        .map(|&k| bundle.estimates[k].v_bohmian_ref.abs())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let mut worst_ratio: f64 = 0.0;
    let mut worst_center = f64::NAN;
    for &k in &claimed {
        let row = &bundle.estimates[k];
        if !row.v_bohmian_ref.is_finite() {
            continue;
        }
        let allowance = (4.0 * row.stderr_v).max(checks.agreement_frac * scale);
        let ratio = (row.v_hat - row.v_bohmian_ref).abs() / allowance;
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_center = row.bin_center;
        }
    }
    bundle.checks.push(CheckVerdict::below("bin_agreement", worst_ratio, 1.0));
    bundle.notes.push(format!(
        "bin_agreement: worst bin at x = {worst_center}, field scale {scale}"
    ));

    // unconditionally, a reading is its particle's position plus pointer
    // noise, so mean(Y - X0) is a zero-mean Gaussian with sd sigma/sqrt(N)
    let shift = out
        .records
        .iter()
        .map(|r| r.y - r.x0)
        .sum::<f64>()
        / out.records.len() as f64;
    bundle.checks.push(CheckVerdict::below(
        "pointer_mean_shift",
        shift.abs(),
        4.0 * p.sigma / (out.records.len() as f64).sqrt(),
    ));

    pointer_distribution_check(bundle, &out.records, &est, &window, p.sigma, p.tau, checks.ks_min_n);

    if cfg.law != VelocityLaw::Bohmian {
        separation_check(bundle, &claimed, checks.separation_threshold);
    }
    Ok(())
}

/// Claim window for the law checks: `region` spreads either side of the
/// state's position mean, in units of its position sd. `None` claims the
/// whole line.
struct ClaimWindow {
    edges: Option<(f64, f64)>,
}

impl ClaimWindow {
    fn contains(&self, x: f64) -> bool {
        match self.edges {
            Some((lo, hi)) => lo <= x && x <= hi,
            None => true,
        }
    }
}

fn claim_window(psi: &WaveFunction, region: Option<f64>) -> ClaimWindow {
    let Some(r) = region else {
        return ClaimWindow { edges: None };
    };
    let grid = psi.grid();
    let rho = psi.rho();
    let norm: f64 = rho.iter().sum();
    let mean = (0..grid.n()).map(|j| grid.x(j) * rho[j]).sum::<f64>() / norm;
    let var =
        (0..grid.n()).map(|j| (grid.x(j) - mean).powi(2) * rho[j]).sum::<f64>() / norm;
    let sd = var.sqrt();
    ClaimWindow { edges: Some((mean - r * sd, mean + r * sd)) }
}

/// Within each well-populated arrival bin the readings should look like a
/// Gaussian of spread sigma centered a drift below the bin, no matter which
/// law moved the particles. The identity under test is the same order-tau
/// statement as the law checks, so the claim window applies here too.
fn pointer_distribution_check(
    bundle: &mut ResultBundle,
    records: &[WeakRunRecord],
    est: &VelocityEstimate,
    window: &ClaimWindow,
    sigma: f64,
    tau: f64,
    ks_min_n: usize,
) {
    let nb = est.bins.n_bins();
    let mut per_bin: Vec<Vec<f64>> = vec![Vec::new(); nb];
    for rec in records {
        if let Some(k) = rec.x_tau.and_then(|x| est.bins.index_of(x)) {
            per_bin[k].push(rec.y);
        }
    }
    let mut worst: f64 = 0.0;
    let mut tested = 0usize;
    for k in 0..nb {
        let ys = &per_bin[k];
        if ys.len() < ks_min_n || !window.contains(est.bins.center(k)) {
            continue;
        }
        let row_ref = bundle.estimates[k].v_bohmian_ref;
        if !row_ref.is_finite() {
            continue;
        }
        let mean = est.bins.center(k) - row_ref * tau;
        let d = ks_statistic(ys, |y| normal_cdf(y, mean, sigma));
        worst = worst.max(d / ks_critical_1pct(ys.len()));
        tested += 1;
    }
    // with no bin populated enough to test, the claim was not examined;
    // omitting the check (instead of passing it) keeps the summary honest
    if tested == 0 {
        bundle.notes.push("pointer_law_ks: no bin reached ks_min_n, check not performed".into());
        return;
    }
    bundle.checks.push(CheckVerdict::below("pointer_law_ks", worst, 1.0));
    bundle.notes.push(format!("pointer_law_ks: {tested} bins tested at the 1% level"));
}

/// Where the configured law predicts a velocity visibly different from the
/// flux law's, the data must exclude the configured law's own prediction.
fn separation_check(bundle: &mut ResultBundle, claimed: &[usize], threshold: f64) {
    let mut margin = f64::INFINITY;
    let mut n_sep = 0usize;
    for &k in claimed {
        let row = &bundle.estimates[k];
        if !(row.v_bohmian_ref.is_finite() && row.v_law_ref.is_finite()) {
            continue;
        }
        if (row.v_law_ref - row.v_bohmian_ref).abs() <= threshold {
            continue;
        }
        n_sep += 1;
        margin = margin.min((row.v_hat - row.v_law_ref).abs() / (4.0 * row.stderr_v));
    }
    if n_sep == 0 {
        bundle.checks.push(CheckVerdict::above("law_separation", 0.0, 1.0));
        bundle
            .notes
            .push("law_separation: no claimed bin separates the laws at this threshold".into());
        return;
    }
    bundle.checks.push(CheckVerdict::above("law_separation", margin, 1.0));
    bundle.notes.push(format!(
        "law_separation: {n_sep} bins where the laws differ beyond the threshold"
    ));
}

/// Extrapolated weak-value velocity against the directly computed field, one
/// check per case. The two routes share nothing past the state itself.
fn run_analytic(cfg: &ParsedConfig, units: Units, bundle: &mut ResultBundle) -> Result<()> {
    let a = cfg.analytic.as_ref().expect("validated");
    for case in &a.cases {
        let psi = prepare_state(cfg.grid, &case.state, &case.potential, units, cfg.run.dt)?;
        let limit = weakflow::weak::weak_velocity_limit(&psi, &case.potential, units, &a.taus, a.n_steps)?;
        let direct = velocity_field_with_floor(&psi, units, VelocityLaw::Bohmian, a.rho_min);
        let mut worst: f64 = 0.0;
        let mut compared = 0usize;
        for j in 0..cfg.grid.n() {
            if limit.valid_at(j) && direct.valid_at(j) {
                worst = worst.max((limit.node(j) - direct.node(j)).abs());
                compared += 1;
            }
        }
        bundle.checks.push(CheckVerdict::below(
            format!("wv_identity_{}", case.label),
            worst,
            a.tolerance,
        ));
        bundle.notes.push(format!("wv_identity_{}: {compared} nodes compared", case.label));
    }
    Ok(())
}

fn run_sweep(cfg: &ParsedConfig, units: Units, bundle: &mut ResultBundle) -> Result<()> {
    let s = cfg.sweep.as_ref().expect("validated");
    let psi = prepare_state(cfg.grid, &cfg.state, &cfg.potential, units, cfg.run.dt)?;
    let v_bohm = velocity_field_with_floor(&psi, units, VelocityLaw::Bohmian, s.rho_min);
    let v_law = velocity_field_with_floor(&psi, units, cfg.law, s.rho_min);

    // the loop lives here rather than in the library sweep so one censored
    // cell flags itself instead of voiding the rest of the grid
    let mut cells: Vec<Option<SweepCell>> = Vec::new();
    for &sigma in &s.sigmas {
        for &tau in &s.taus {
            let pcfg = ProtocolConfig {
                sigma,
                tau,
                n_runs: s.n_runs,
                n_steps: s.n_steps,
                censor_bound: s.censor_bound,
                master_seed: cfg.run.master_seed,
            };
            let out = match run_protocol(&psi, &cfg.potential, units, cfg.law, &pcfg) {
                Ok(out) => Some(out),
                Err(Error::ExcessCensoring { fraction, .. }) => {
                    bundle.notes.push(format!(
                        "cell sigma = {sigma}, tau = {tau}: censored fraction {fraction} over bound, cell skipped"
                    ));
                    None
                }
                Err(e) => return Err(e),
            };
            for &delta in &s.deltas {
                let Some(out) = &out else {
                    cells.push(None);
                    continue;
                };
                let bins = BinSpec::lattice(cfg.grid, delta)?;
                let cond = conditional_mean_by_bin(&out.records, bins, s.n_min);
                let est = weak_velocity_estimate(&cond, tau)?;
                let reference: Vec<f64> =
                    bins.centers().iter().map(|&c| v_law.eval(c).unwrap_or(f64::NAN)).collect();
                for row in bin_rows(&est, &v_bohm, &v_law) {
                    bundle.sweep_rows.push(SweepRow { sigma, tau, delta, row });
                }
                cells.push(Some(SweepCell { sigma, tau, delta, estimate: est, reference }));
            }
        }
    }

    // tightening tau must not grow the unexplained deviation: for each
    // (sigma, delta) lane, walk taus largest to smallest
    let nd = s.deltas.len();
    let nt = s.taus.len();
    let mut worst_growth = f64::NEG_INFINITY;
    let mut lanes = 0usize;
    for (si, &sigma) in s.sigmas.iter().enumerate() {
        for di in 0..nd {
            let lane: Vec<Option<f64>> = (0..nt)
                .map(|ti| cells[(si * nt + ti) * nd + di].as_ref().map(SweepCell::noise_excess))
                .collect();
            if lane.iter().any(Option::is_none) {
                bundle.notes.push(format!(
                    "tau lane at sigma = {sigma}, delta index {di} has skipped cells; not checked"
                ));
                continue;
            }
            lanes += 1;
            for w in lane.windows(2) {
                worst_growth = worst_growth.max(w[1].unwrap() - w[0].unwrap());
            }
        }
    }
    if lanes > 0 {
        bundle.checks.push(CheckVerdict::below("tau_excess_monotone", worst_growth, 0.0));
    } else {
        bundle.checks.push(CheckVerdict::below("tau_excess_monotone", f64::INFINITY, 0.0));
        bundle.notes.push("tau_excess_monotone: no complete lane to check".into());
    }
    let excesses: Vec<String> = cells
        .iter()
        .map(|c| match c {
            Some(c) => format!(
                "(sigma {}, tau {}, delta {}) excess {}",
                c.sigma,
                c.tau,
                c.delta,
                c.noise_excess()
            ),
            None => "(skipped)".into(),
        })
        .collect();
    bundle.notes.push(format!("noise excess by cell: {}", excesses.join("; ")));
    Ok(())
}

fn run_characterize(cfg: &ParsedConfig, units: Units, bundle: &mut ResultBundle) -> Result<()> {
    let c = cfg.characterize.as_ref().expect("validated");
    let VelocityLaw::ConstantOffset { epsilon } = cfg.law else {
        unreachable!("config enforces an offset law here")
    };
    let psi = prepare_state(cfg.grid, &cfg.state, &cfg.potential, units, cfg.run.dt)?;

    // sweep the multiplier spread: the flux law must not move at all, the
    // offset law must fade like one power of the spread
    let mut flux_worst: f64 = 0.0;
    let mut ln_sigma = Vec::with_capacity(c.sigmas.len());
    let mut ln_dev = Vec::with_capacity(c.sigmas.len());
    for &sigma in &c.sigmas {
        let offsets: Vec<f64> = c.offset_scales.iter().map(|a| a * sigma).collect();
        let family = MultiplierFamily::gaussian(sigma, offsets)?;
        let dev_flux =
            multiplication_deviation(VelocityLaw::Bohmian, &psi, units, &family, c.rho_min)?;
        let dev_law = multiplication_deviation(cfg.law, &psi, units, &family, c.rho_min)?;
        flux_worst = flux_worst.max(dev_flux);
        bundle.notes.push(format!(
            "multiplier spread {sigma}: flux-law deviation {dev_flux}, offset-law deviation {dev_law}"
        ));
        if dev_law > 0.0 {
            ln_sigma.push(sigma.ln());
            ln_dev.push(dev_law.ln());
        }
    }
    bundle.checks.push(CheckVerdict::below("multiplier_invariance", flux_worst, 1e-10));

    let exponent_gap = if ln_sigma.len() == c.sigmas.len() {
        let p = -fit_slope(&ln_sigma, &ln_dev);
        bundle.notes.push(format!("offset-law deviation scales like spread^-{p}"));
        (p - 1.0).abs()
    } else {
        f64::INFINITY
    };
    bundle.checks.push(CheckVerdict::below("variant_exponent_gap", exponent_gap, c.exponent_band));

    // a pure phase is outside the real-multiplier hypothesis and shifts the
    // field by exactly its wavenumber (in velocity units)
    let a = 8.0 * std::f64::consts::TAU / cfg.grid.length();
    let dev = complex_phase_deviation(&psi, units, a, c.rho_min)?;
    let expected = a * units.hbar_over_m();
    bundle.checks.push(CheckVerdict::below(
        "complex_phase_gap",
        (dev - expected).abs(),
        1e-10,
    ));
    bundle.notes.push(format!("complex multiplier moved the field by {dev} (wavenumber {a})"));

    witness_checks(cfg, units, &psi, epsilon, bundle)?;
    Ok(())
}

/// The witness pairs the flux current with the offset current and asks a
/// multiplier family to tell them apart.
fn witness_checks(
    cfg: &ParsedConfig,
    units: Units,
    psi: &WaveFunction,
    epsilon: f64,
    bundle: &mut ResultBundle,
) -> Result<()> {
    let c = cfg.characterize.as_ref().expect("validated");
    let pair = CurrentPair::from_laws(
        psi,
        &cfg.potential,
        units,
        VelocityLaw::Bohmian,
        cfg.law,
        c.fd_dt,
        c.rho_min,
    )?;

    // offsets cover the valid region with margin, spaced as a fraction of
    // the witness spread so some member peaks near every masked node
    let grid = pair.grid();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 0..grid.n() {
        if pair.valid[j] {
            lo = lo.min(grid.x(j));
            hi = hi.max(grid.x(j));
        }
    }
    let spread = c.witness_spread;
    let step = c.witness_spacing * spread;
    let mut offsets = Vec::new();
    // half-cell shift keeps member peaks off the nodes, where a peak would
    // read as a vanishing gradient
    let mut y = lo - 2.0 * spread + 0.5 * grid.dx();
    while y <= hi + 2.0 * spread {
        offsets.push(y);
        y += step;
    }
    let family = MultiplierFamily::gaussian(spread, offsets)?;

    // node-by-node: somewhere in the family a gradient survives at every
    // grid point, or the family cannot claim to span anything
    let total = gradient_total_check(&family, grid);
    let frac_total = total.iter().filter(|t| **t).count() as f64 / total.len() as f64;
    bundle.checks.push(CheckVerdict::above("witness_family_total", frac_total, 1.0));

    let w = uniqueness_witness(&pair, &family);
    let w_max = w.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, &v| m.max(v));
    // one member's squared profile has derivative peak exp(-1/2)/spread, so
    // this is the most any family can see of a current gap epsilon
    let ceiling = epsilon.abs() * (-0.5f64).exp() / spread;
    bundle.checks.push(CheckVerdict::above("witness_strength", w_max / ceiling, 0.9));
    bundle.notes.push(format!(
        "witness: {} members over [{lo}, {hi}], peak {w_max} against ceiling {ceiling}"
    , family.len()));

    let flat = uniqueness_witness(&pair, &MultiplierFamily::constant());
    let flat_max = flat.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, &v| m.max(v));
    bundle.checks.push(CheckVerdict::below("witness_constant_null", flat_max, 1e-12));
    Ok(())
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

/// Both catalog laws must close the continuity balance and carry a Born
/// ensemble onto the evolved density.
fn run_equivariance(cfg: &ParsedConfig, units: Units, bundle: &mut ResultBundle) -> Result<()> {
    let e = cfg.equivariance.as_ref().expect("validated");
    let psi0 = prepare_state(cfg.grid, &cfg.state, &cfg.potential, units, cfg.run.dt)?;

    let mut laws = vec![VelocityLaw::Bohmian];
    if cfg.law != VelocityLaw::Bohmian {
        laws.push(cfg.law);
    }

    // the target density at t_final, as a CDF the sample can be held against
    let n_ev = (e.t_final / cfg.run.dt).ceil().max(1.0) as usize;
    let mut psi_t = psi0.clone();
    let mut op = SplitOperator::new(cfg.grid, &cfg.potential, units, e.t_final / n_ev as f64)?;
    op.evolve(&mut psi_t, n_ev);
    let cdf = density_cdf(&psi_t);
    let starts = sample_positions(&psi0, e.n_particles, cfg.run.master_seed);

    for law in laws {
        let label = law.label();
        let rep = continuity_residual(&psi0, &cfg.potential, units, law, e.fd_dt)?;
        bundle.checks.push(CheckVerdict::below(
            format!("continuity_residual_{label}"),
            rep.max_residual,
            e.residual_bound,
        ));

        let finals =
            transport_ensemble(&psi0, &cfg.potential, units, law, &starts, e.t_final, e.n_steps)?;
        let mut survivors: Vec<f64> = finals.iter().filter_map(|p| *p).collect();
        survivors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let escaped = e.n_particles - survivors.len();
        if escaped > 0 {
            bundle.notes.push(format!(
                "transport under {label}: {escaped} of {} trajectories left the support",
                e.n_particles
            ));
        }
        let d = ks_statistic(&survivors, &cdf);
        bundle.checks.push(CheckVerdict::below(
            format!("transport_ks_{label}"),
            d / ks_critical_1pct(survivors.len()),
            1.0,
        ));
    }
    Ok(())
}

/// CDF of the state's density: trapezoid cumulative at the nodes with the
/// density linear inside each cell.
///
/// A flat-in-cell rule would bias the CDF by rho dx / 2, which at this grid
/// is the size of the KS resolution for a 1e5 sample; the linear rule's
/// error is two orders below that.
fn density_cdf(psi: &WaveFunction) -> impl Fn(f64) -> f64 {
    let grid = psi.grid();
    let rho = psi.rho();
    let dx = grid.dx();
    let n = grid.n();
    let mut cum = vec![0.0; n];
    for j in 1..n {
        cum[j] = cum[j - 1] + 0.5 * (rho[j - 1] + rho[j]) * dx;
    }
    let total = cum[n - 1];
    let x_min = grid.x_min();
    move |x: f64| {
        let u = (x - x_min) / dx;
        if u <= 0.0 {
            return 0.0;
        }
        if u >= (n - 1) as f64 {
            return 1.0;
        }
        let j = u.floor() as usize;
        let frac = u - j as f64;
        let partial = (rho[j] + 0.5 * frac * (rho[j + 1] - rho[j])) * frac * dx;
        ((cum[j] + partial) / total).clamp(0.0, 1.0)
    }
}
