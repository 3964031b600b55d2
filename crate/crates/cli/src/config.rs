//! Experiment configs: TOML-syntax `.cfg` files checked against a fixed
//! schema.
//!
//! Validation is all-at-once: every violation in the file is reported, not
//! just the first, and unknown keys come back with a nearest-key suggestion.
//! Physics preconditions that are checkable without running anything (packet
//! edge decay, grid sanity) are checked here too, so a config that parses is
//! a config that runs.

use std::fmt;
use std::path::{Path, PathBuf};

use toml::value::{Table, Value};
use weakflow::dynamics::VelocityLaw;
use weakflow::wavefunction::{PacketSpec, WaveFunction};
use weakflow::{GridSpec, Potential};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_RHO_MIN: f64 = 1e-8;
pub const DEFAULT_N_STEPS: usize = 50;
pub const DEFAULT_CENSOR_BOUND: f64 = 0.01;
pub const DEFAULT_N_MIN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    WeakVelocity,
    AnalyticWv,
    Sweep,
    Characterize,
    Equivariance,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::WeakVelocity => "weak_velocity",
            Self::AnalyticWv => "analytic_wv",
            Self::Sweep => "sweep",
            Self::Characterize => "characterize",
            Self::Equivariance => "equivariance",
        }
    }
}

const EXPERIMENTS: [&str; 5] =
    ["weak_velocity", "analytic_wv", "sweep", "characterize", "equivariance"];

#[derive(Debug, Clone)]
pub struct StateSpec {
    pub packets: Vec<PacketSpec>,
    /// Evolve the packet under the configured potential for this long before
    /// the measurement; zero means measure the freshly prepared state.
    pub prep_time: f64,
}

impl Default for StateSpec {
    fn default() -> Self {
        Self {
            packets: vec![PacketSpec { weight: 1.0, x0: 0.0, s0: 1.0, k0: 0.0 }],
            prep_time: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseSpec {
    pub label: String,
    pub state: StateSpec,
    pub potential: Potential,
}

#[derive(Debug, Clone, Copy)]
pub struct ProtocolSection {
    pub sigma: f64,
    pub tau: f64,
    pub n_runs: usize,
    pub n_steps: usize,
    pub censor_bound: f64,
    pub bin_width: f64,
    pub n_min: usize,
    pub rho_min: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ChecksSection {
    pub min_reliable_bins: usize,
    /// Agreement allowance as a fraction of the largest reference speed.
    pub agreement_frac: f64,
    /// A bin enters the separation check when the law's own velocity differs
    /// from the flux velocity by more than this.
    pub separation_threshold: f64,
    /// Per-bin pointer-law distribution checks need at least this many runs.
    pub ks_min_n: usize,
    /// Half-width of the claim window for the order-tau checks (agreement,
    /// separation, pointer law), in units of the state's position spread,
    /// centered on its mean. Outside such a window the coupling-time drift
    /// is no longer small against the field's own variation scale, so the
    /// order-tau identity carries no claim there. Absent means the claim
    /// covers every reliable bin.
    pub claim_region: Option<f64>,
}

impl Default for ChecksSection {
    fn default() -> Self {
        Self {
            min_reliable_bins: 10,
            agreement_frac: 0.05,
            separation_threshold: 0.15,
            ks_min_n: 1000,
            claim_region: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalyticSection {
    pub cases: Vec<CaseSpec>,
    pub taus: Vec<f64>,
    pub n_steps: usize,
    pub tolerance: f64,
    pub rho_min: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSection {
    pub sigmas: Vec<f64>,
    pub taus: Vec<f64>,
    pub deltas: Vec<f64>,
    pub n_runs: usize,
    pub n_steps: usize,
    pub censor_bound: f64,
    pub n_min: usize,
    pub rho_min: f64,
}

#[derive(Debug, Clone)]
pub struct CharacterizeSection {
    pub sigmas: Vec<f64>,
    /// Member offsets in units of the multiplier spread, so the family keeps
    /// its shape as the spread is swept.
    pub offset_scales: Vec<f64>,
    pub rho_min: f64,
    pub witness_spread: f64,
    /// Witness offset spacing in units of the witness spread.
    pub witness_spacing: f64,
    pub exponent_band: f64,
    pub fd_dt: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EquivarianceSection {
    pub t_final: f64,
    pub n_particles: usize,
    pub n_steps: usize,
    pub fd_dt: f64,
    pub residual_bound: f64,
}

#[derive(Debug, Clone)]
pub struct RunSection {
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub experiment: ExperimentKind,
    pub grid: GridSpec,
    pub state: StateSpec,
    pub potential: Potential,
    pub law: VelocityLaw,
    pub protocol: Option<ProtocolSection>,
    pub checks: ChecksSection,
    pub analytic: Option<AnalyticSection>,
    pub sweep: Option<SweepSection>,
    pub characterize: Option<CharacterizeSection>,
    pub equivariance: Option<EquivarianceSection>,
    pub run: RunSection,
    /// Original file bytes, echoed into the output directory and hashed.
    pub raw: String,
}

#[derive(Debug)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "config invalid ({} problem(s)):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

pub fn parse_config(path: &Path) -> Result<ParsedConfig, ConfigError> {
    let raw = std::fs::read_to_string(path).map_err(|e| ConfigError {
        violations: vec![format!("{}: {e}", path.display())],
    })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    parse_config_str(&raw, stem)
}

/// Collects the config's violations against the path-independent part of the
/// schema; `stem` names the default output directory.
pub fn parse_config_str(raw: &str, stem: &str) -> Result<ParsedConfig, ConfigError> {
    let root: Table = toml::from_str(raw)
        .map_err(|e| ConfigError { violations: vec![format!("TOML syntax: {}", terse(&e))] })?;
    let mut ctx = Ctx::default();

    let experiment = match ctx.string(&root, "", "experiment") {
        Some(s) => match s.as_str() {
            "weak_velocity" => Some(ExperimentKind::WeakVelocity),
            "analytic_wv" => Some(ExperimentKind::AnalyticWv),
            "sweep" => Some(ExperimentKind::Sweep),
            "characterize" => Some(ExperimentKind::Characterize),
            "equivariance" => Some(ExperimentKind::Equivariance),
            other => {
                ctx.bad(
                    "",
                    "experiment",
                    format!("must be one of {EXPERIMENTS:?}{}", suggest(other, &EXPERIMENTS)),
                );
                None
            }
        },
        None => {
            ctx.miss("", "experiment");
            None
        }
    };

    ctx.check_keys(
        &root,
        "",
        &[
            "experiment",
            "grid",
            "state",
            "potential",
            "law",
            "protocol",
            "checks",
            "analytic",
            "cases",
            "sweep",
            "characterize",
            "equivariance",
            "run",
        ],
    );
    if let Some(kind) = experiment {
        for (name, allowed) in [
            ("state", &[ExperimentKind::WeakVelocity, ExperimentKind::Sweep, ExperimentKind::Characterize, ExperimentKind::Equivariance][..]),
            ("potential", &[ExperimentKind::WeakVelocity, ExperimentKind::Sweep, ExperimentKind::Characterize, ExperimentKind::Equivariance]),
            ("law", &[ExperimentKind::WeakVelocity, ExperimentKind::Sweep, ExperimentKind::Characterize, ExperimentKind::Equivariance]),
            ("protocol", &[ExperimentKind::WeakVelocity]),
            ("checks", &[ExperimentKind::WeakVelocity]),
            ("analytic", &[ExperimentKind::AnalyticWv]),
            ("cases", &[ExperimentKind::AnalyticWv]),
            ("sweep", &[ExperimentKind::Sweep]),
            ("characterize", &[ExperimentKind::Characterize]),
            ("equivariance", &[ExperimentKind::Equivariance]),
        ] {
            if root.contains_key(name) && !allowed.contains(&kind) {
                ctx.bad("", name, format!("not used by experiment `{}`", kind.label()));
            }
        }
    }

    let grid = parse_grid(&mut ctx, &root);
    let potential = parse_potential_section(&mut ctx, &root);
    let law = parse_law(&mut ctx, &root, experiment);
    let state = parse_state_section(&mut ctx, &root, grid, potential, experiment);
    let run = parse_run(&mut ctx, &root, stem);

    let protocol = parse_protocol(&mut ctx, &root, grid, experiment);
    let checks = parse_checks(&mut ctx, &root);
    let analytic = parse_analytic(&mut ctx, &root, grid, experiment);
    let sweep = parse_sweep(&mut ctx, &root, grid, experiment);
    let characterize = parse_characterize(&mut ctx, &root, experiment);
    let equivariance = parse_equivariance(&mut ctx, &root, experiment);

    if !ctx.violations.is_empty() {
        return Err(ConfigError { violations: ctx.violations });
    }
    let (experiment, grid) = (experiment.unwrap(), grid.unwrap());
    Ok(ParsedConfig {
        experiment,
        grid,
        state: state.unwrap_or_default(),
        potential: potential.unwrap_or(Potential::Free),
        law: law.unwrap_or(VelocityLaw::Bohmian),
        protocol,
        checks,
        analytic,
        sweep,
        characterize,
        equivariance,
        run: run.unwrap(),
        raw: raw.to_string(),
    })
}

/// toml's errors quote the offending span over several lines; the first line
/// is the message.
fn terse(e: &toml::de::Error) -> String {
    e.message().to_string()
}

fn suggest(got: &str, known: &[&str]) -> String {
    known
        .iter()
        .map(|k| (strsim::levenshtein(got, k), k))
        .filter(|(d, k)| *d <= 2.max(k.len() / 2))
        .min_by_key(|(d, _)| *d)
        .map(|(_, k)| format!(" (did you mean `{k}`?)"))
        .unwrap_or_default()
}

#[derive(Default)]
struct Ctx {
    violations: Vec<String>,
}

fn at(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else if key.is_empty() {
        section.to_string()
    } else {
        format!("{section}.{key}")
    }
}

impl Ctx {
    fn bad(&mut self, section: &str, key: &str, msg: impl fmt::Display) {
        self.violations.push(format!("{}: {msg}", at(section, key)));
    }

    fn miss(&mut self, section: &str, key: &str) {
        self.bad(section, key, "missing required key");
    }

    fn check_keys(&mut self, t: &Table, section: &str, known: &[&str]) {
        for key in t.keys() {
            if !known.contains(&key.as_str()) {
                self.bad(
                    section,
                    "",
                    format!("unknown key `{key}`{}", suggest(key, known)),
                );
            }
        }
    }

    fn table<'a>(&mut self, root: &'a Table, name: &str) -> Option<&'a Table> {
        match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.bad(name, "", "must be a [section]");
                None
            }
            None => None,
        }
    }

    fn num(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        match t.get(key) {
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(_) => {
                self.bad(section, key, "must be a number");
                None
            }
            None => None,
        }
    }

    fn num_or(&mut self, t: &Table, section: &str, key: &str, default: f64) -> f64 {
        self.num(t, section, key).unwrap_or(default)
    }

    fn req_num(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        if t.contains_key(key) {
            self.num(t, section, key)
        } else {
            self.miss(section, key);
            None
        }
    }

    fn positive(&mut self, section: &str, key: &str, x: f64) -> Option<f64> {
        if x > 0.0 && x.is_finite() {
            Some(x)
        } else {
            self.bad(section, key, format!("must be positive (got {x})"));
            None
        }
    }

    fn finite(&mut self, section: &str, key: &str, x: f64) -> Option<f64> {
        if x.is_finite() {
            Some(x)
        } else {
            self.bad(section, key, format!("must be finite (got {x})"));
            None
        }
    }

    fn count(&mut self, t: &Table, section: &str, key: &str, min: usize) -> Option<usize> {
        match t.get(key) {
            Some(Value::Integer(i)) if *i >= min as i64 => Some(*i as usize),
            Some(Value::Integer(i)) => {
                self.bad(section, key, format!("must be at least {min} (got {i})"));
                None
            }
            Some(_) => {
                self.bad(section, key, "must be an integer");
                None
            }
            None => None,
        }
    }

    fn count_or(&mut self, t: &Table, section: &str, key: &str, min: usize, default: usize) -> usize {
        if t.contains_key(key) {
            self.count(t, section, key, min).unwrap_or(default)
        } else {
            default
        }
    }

    fn string(&mut self, t: &Table, section: &str, key: &str) -> Option<String> {
        match t.get(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.bad(section, key, "must be a string");
                None
            }
            None => None,
        }
    }

    fn num_array(&mut self, t: &Table, section: &str, key: &str) -> Option<Vec<f64>> {
        match t.get(key) {
            Some(Value::Array(xs)) => {
                let mut out = Vec::with_capacity(xs.len());
                for v in xs {
                    match v {
                        Value::Float(x) => out.push(*x),
                        Value::Integer(i) => out.push(*i as f64),
                        _ => {
                            self.bad(section, key, "must be an array of numbers");
                            return None;
                        }
                    }
                }
                if out.is_empty() {
                    self.bad(section, key, "must not be empty");
                    return None;
                }
                Some(out)
            }
            Some(_) => {
                self.bad(section, key, "must be an array of numbers");
                None
            }
            None => None,
        }
    }

    fn positive_array(&mut self, t: &Table, section: &str, key: &str) -> Option<Vec<f64>> {
        let xs = self.num_array(t, section, key)?;
        if let Some(x) = xs.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            self.bad(section, key, format!("entries must be positive (got {x})"));
            return None;
        }
        Some(xs)
    }
}

fn parse_grid(ctx: &mut Ctx, root: &Table) -> Option<GridSpec> {
    let (mut x_min, mut x_max, mut n) = (-20.0, 20.0, 1024usize);
    if let Some(t) = ctx.table(root, "grid") {
        ctx.check_keys(t, "grid", &["x_min", "x_max", "n"]);
        if let Some(x) = ctx.num(t, "grid", "x_min") {
            x_min = x;
        }
        if let Some(x) = ctx.num(t, "grid", "x_max") {
            x_max = x;
        }
        if let Some(m) = t.get("n") {
            match m {
                Value::Integer(i) if *i > 0 => n = *i as usize,
                _ => ctx.bad("grid", "n", "must be a positive integer"),
            }
        }
    }
    match GridSpec::new(x_min, x_max, n) {
        Ok(g) => Some(g),
        Err(e) => {
            ctx.bad("grid", "", e);
            None
        }
    }
}

/// The keys a table's chosen preset brings with it; used by case tables,
/// which mix potential keys with state keys in one flat table.
fn preset_keys(t: &Table) -> &'static [&'static str] {
    match t.get("preset").and_then(Value::as_str) {
        Some("harmonic") => &["preset", "omega"],
        Some("gaussian_barrier") => &["preset", "height", "width", "center"],
        _ => &["preset"],
    }
}

/// `strict` makes this the sole owner of the table's key check; case tables
/// pass false and check the union of state and potential keys themselves.
fn parse_potential_from(ctx: &mut Ctx, t: &Table, section: &str, strict: bool) -> Option<Potential> {
    if strict {
        ctx.check_keys(t, section, preset_keys(t));
    }
    let preset = match ctx.string(t, section, "preset") {
        Some(p) => p,
        None if t.contains_key("preset") => return None,
        None => "free".to_string(),
    };
    match preset.as_str() {
        "free" => Some(Potential::Free),
        "harmonic" => {
            let omega = ctx.req_num(t, section, "omega")?;
            let omega = ctx.positive(section, "omega", omega)?;
            Some(Potential::Harmonic { omega })
        }
        "gaussian_barrier" => {
            let height = ctx.req_num(t, section, "height")?;
            let height = ctx.finite(section, "height", height)?;
            let width = ctx.req_num(t, section, "width")?;
            let width = ctx.positive(section, "width", width)?;
            let center = ctx.num_or(t, section, "center", 0.0);
            let center = ctx.finite(section, "center", center)?;
            Some(Potential::GaussianBarrier { height, width, center })
        }
        other => {
            ctx.bad(
                section,
                "preset",
                format!(
                    "must be one of [\"free\", \"harmonic\", \"gaussian_barrier\"]{}",
                    suggest(other, &["free", "harmonic", "gaussian_barrier"])
                ),
            );
            None
        }
    }
}

fn parse_potential_section(ctx: &mut Ctx, root: &Table) -> Option<Potential> {
    let t = ctx.table(root, "potential")?;
    parse_potential_from(ctx, t, "potential", true)
}

fn parse_law(ctx: &mut Ctx, root: &Table, experiment: Option<ExperimentKind>) -> Option<VelocityLaw> {
    let t = match ctx.table(root, "law") {
        Some(t) => t,
        None => {
            if experiment == Some(ExperimentKind::Characterize) {
                ctx.bad("law", "", "characterize needs kind = \"constant_offset\" with an epsilon");
            }
            return None;
        }
    };
    ctx.check_keys(t, "law", &["kind", "epsilon"]);
    let kind = match ctx.string(t, "law", "kind") {
        Some(k) => k,
        None => {
            if !t.contains_key("kind") {
                ctx.miss("law", "kind");
            }
            return None;
        }
    };
    match kind.as_str() {
        "bohmian" => {
            if t.contains_key("epsilon") {
                ctx.bad("law", "epsilon", "only meaningful for kind = \"constant_offset\"");
            }
            if experiment == Some(ExperimentKind::Characterize) {
                ctx.bad("law", "kind", "characterize needs \"constant_offset\" (the flux law is always in the catalog)");
            }
            Some(VelocityLaw::Bohmian)
        }
        "constant_offset" => {
            let epsilon = ctx.req_num(t, "law", "epsilon")?;
            let epsilon = ctx.finite("law", "epsilon", epsilon)?;
            if epsilon == 0.0 {
                ctx.bad("law", "epsilon", "must be nonzero (zero is the flux law)");
                return None;
            }
            Some(VelocityLaw::ConstantOffset { epsilon })
        }
        other => {
            ctx.bad(
                "law",
                "kind",
                format!(
                    "must be \"bohmian\" or \"constant_offset\"{}",
                    suggest(other, &["bohmian", "constant_offset"])
                ),
            );
            None
        }
    }
}

fn parse_packets(ctx: &mut Ctx, t: &Table, section: &str) -> Option<Vec<PacketSpec>> {
    let singles = ["x0", "s0", "k0"];
    if t.contains_key("packets") {
        for key in singles {
            if t.contains_key(key) {
                ctx.bad(section, key, "cannot combine single-packet keys with `packets`");
            }
        }
        let packets = match t.get("packets") {
            Some(Value::Array(entries)) if !entries.is_empty() => {
                let mut out = Vec::with_capacity(entries.len());
                for (i, entry) in entries.iter().enumerate() {
                    let sub = format!("{section}.packets[{i}]");
                    let Value::Table(p) = entry else {
                        ctx.bad(&sub, "", "must be a table { weight, x0, s0, k0 }");
                        continue;
                    };
                    ctx.check_keys(p, &sub, &["weight", "x0", "s0", "k0"]);
                    let weight = ctx.req_num(p, &sub, "weight").and_then(|w| {
                        if w != 0.0 && w.is_finite() {
                            Some(w)
                        } else {
                            ctx.bad(&sub, "weight", format!("must be finite and nonzero (got {w})"));
                            None
                        }
                    });
                    let x0 = ctx.req_num(p, &sub, "x0").and_then(|x| ctx.finite(&sub, "x0", x));
                    let s0 = ctx.req_num(p, &sub, "s0").and_then(|x| ctx.positive(&sub, "s0", x));
                    let k0 = ctx.req_num(p, &sub, "k0").and_then(|x| ctx.finite(&sub, "k0", x));
                    if let (Some(weight), Some(x0), Some(s0), Some(k0)) = (weight, x0, s0, k0) {
                        out.push(PacketSpec { weight, x0, s0, k0 });
                    }
                }
                out
            }
            _ => {
                ctx.bad(section, "packets", "must be a non-empty array of packet tables");
                return None;
            }
        };
        return Some(packets);
    }
    let x0 = ctx.num_or(t, section, "x0", 0.0);
    let x0 = ctx.finite(section, "x0", x0)?;
    let s0 = ctx.num_or(t, section, "s0", 1.0);
    let s0 = ctx.positive(section, "s0", s0)?;
    let k0 = ctx.num_or(t, section, "k0", 0.0);
    let k0 = ctx.finite(section, "k0", k0)?;
    Some(vec![PacketSpec { weight: 1.0, x0, s0, k0 }])
}

fn parse_state_from(
    ctx: &mut Ctx,
    t: &Table,
    section: &str,
    extra_keys: &[&str],
) -> Option<StateSpec> {
    let mut known = vec!["packets", "x0", "s0", "k0", "prep_time"];
    known.extend_from_slice(extra_keys);
    ctx.check_keys(t, section, &known);
    let packets = parse_packets(ctx, t, section)?;
    let prep_time = ctx.num_or(t, section, "prep_time", 0.0);
    if !(prep_time >= 0.0 && prep_time.is_finite()) {
        ctx.bad(section, "prep_time", format!("must be >= 0 (got {prep_time})"));
        return None;
    }
    Some(StateSpec { packets, prep_time })
}

/// The state must actually be a valid initial condition on the grid; surface
/// edge-decay and normalization problems at parse time.
fn preflight_state(
    ctx: &mut Ctx,
    section: &str,
    grid: Option<GridSpec>,
    state: &StateSpec,
) {
    if let Some(grid) = grid {
        if let Err(e) = WaveFunction::superposition(grid, &state.packets) {
            ctx.bad(section, "", e);
        }
    }
}

fn parse_state_section(
    ctx: &mut Ctx,
    root: &Table,
    grid: Option<GridSpec>,
    _potential: Option<Potential>,
    experiment: Option<ExperimentKind>,
) -> Option<StateSpec> {
    let uses_state = !matches!(experiment, Some(ExperimentKind::AnalyticWv));
    let state = match ctx.table(root, "state") {
        Some(t) => parse_state_from(ctx, t, "state", &[])?,
        None => StateSpec::default(),
    };
    if uses_state {
        preflight_state(ctx, "state", grid, &state);
    }
    Some(state)
}

fn parse_run(ctx: &mut Ctx, root: &Table, stem: &str) -> Option<RunSection> {
    let mut run = RunSection {
        master_seed: 1,
        out_dir: PathBuf::from("results").join(stem),
        dt: DEFAULT_DT,
    };
    if let Some(t) = ctx.table(root, "run") {
        ctx.check_keys(t, "run", &["master_seed", "out_dir", "dt"]);
        if let Some(v) = t.get("master_seed") {
            match v {
                Value::Integer(i) if *i >= 0 => run.master_seed = *i as u64,
                _ => ctx.bad("run", "master_seed", "must be a non-negative integer"),
            }
        }
        if let Some(s) = ctx.string(t, "run", "out_dir") {
            run.out_dir = PathBuf::from(s);
        }
        let dt = ctx.num_or(t, "run", "dt", DEFAULT_DT);
        run.dt = ctx.positive("run", "dt", dt)?;
    }
    Some(run)
}

fn parse_protocol(
    ctx: &mut Ctx,
    root: &Table,
    grid: Option<GridSpec>,
    experiment: Option<ExperimentKind>,
) -> Option<ProtocolSection> {
    let t = match ctx.table(root, "protocol") {
        Some(t) => t,
        None => {
            if experiment == Some(ExperimentKind::WeakVelocity) {
                ctx.bad("protocol", "", "required for experiment `weak_velocity`");
            }
            return None;
        }
    };
    ctx.check_keys(
        t,
        "protocol",
        &["sigma", "tau", "n_runs", "n_steps", "censor_bound", "bin_width", "n_min", "rho_min"],
    );
    let sigma = ctx.req_num(t, "protocol", "sigma").and_then(|x| ctx.positive("protocol", "sigma", x));
    let tau = ctx.req_num(t, "protocol", "tau").and_then(|x| ctx.positive("protocol", "tau", x));
    let n_runs = if t.contains_key("n_runs") {
        ctx.count(t, "protocol", "n_runs", 1)
    } else {
        ctx.miss("protocol", "n_runs");
        None
    };
    let n_steps = ctx.count_or(t, "protocol", "n_steps", 1, DEFAULT_N_STEPS);
    let censor_bound = ctx.num_or(t, "protocol", "censor_bound", DEFAULT_CENSOR_BOUND);
    if !(0.0..=1.0).contains(&censor_bound) {
        ctx.bad("protocol", "censor_bound", format!("must lie in [0, 1] (got {censor_bound})"));
    }
    let default_width = grid.map(|g| 4.0 * g.dx()).unwrap_or(0.15625);
    let bin_width = ctx.num_or(t, "protocol", "bin_width", default_width);
    let bin_width = ctx.positive("protocol", "bin_width", bin_width)?;
    let n_min = ctx.count_or(t, "protocol", "n_min", 2, DEFAULT_N_MIN);
    let rho_min = ctx.num_or(t, "protocol", "rho_min", DEFAULT_RHO_MIN);
    let rho_min = ctx.positive("protocol", "rho_min", rho_min)?;
    Some(ProtocolSection {
        sigma: sigma?,
        tau: tau?,
        n_runs: n_runs?,
        n_steps,
        censor_bound,
        bin_width,
        n_min,
        rho_min,
    })
}

fn parse_checks(ctx: &mut Ctx, root: &Table) -> ChecksSection {
    let mut checks = ChecksSection::default();
    if let Some(t) = ctx.table(root, "checks") {
        ctx.check_keys(
            t,
            "checks",
            &[
                "min_reliable_bins",
                "agreement_frac",
                "separation_threshold",
                "ks_min_n",
                "claim_region",
            ],
        );
        checks.min_reliable_bins =
            ctx.count_or(t, "checks", "min_reliable_bins", 1, checks.min_reliable_bins);
        let frac = ctx.num_or(t, "checks", "agreement_frac", checks.agreement_frac);
        if let Some(f) = ctx.positive("checks", "agreement_frac", frac) {
            checks.agreement_frac = f;
        }
        let thr = ctx.num_or(t, "checks", "separation_threshold", checks.separation_threshold);
        if let Some(v) = ctx.positive("checks", "separation_threshold", thr) {
            checks.separation_threshold = v;
        }
        checks.ks_min_n = ctx.count_or(t, "checks", "ks_min_n", 10, checks.ks_min_n);
        if t.contains_key("claim_region") {
            if let Some(r) = ctx.num(t, "checks", "claim_region") {
                checks.claim_region = ctx.positive("checks", "claim_region", r);
            }
        }
    }
    checks
}

fn parse_analytic(
    ctx: &mut Ctx,
    root: &Table,
    grid: Option<GridSpec>,
    experiment: Option<ExperimentKind>,
) -> Option<AnalyticSection> {
    let is_analytic = experiment == Some(ExperimentKind::AnalyticWv);
    let mut taus = vec![4e-4, 2e-4, 1e-4];
    let mut n_steps = 4;
    let mut tolerance = 1e-4;
    let mut rho_min = DEFAULT_RHO_MIN;
    if let Some(t) = ctx.table(root, "analytic") {
        ctx.check_keys(t, "analytic", &["taus", "n_steps", "tolerance", "rho_min"]);
        if t.contains_key("taus") {
            if let Some(ts) = ctx.positive_array(t, "analytic", "taus") {
                if ts.len() < 2 {
                    ctx.bad("analytic", "taus", "extrapolation needs at least two drift times");
                } else {
                    taus = ts;
                }
            }
        }
        n_steps = ctx.count_or(t, "analytic", "n_steps", 1, n_steps);
        let tol = ctx.num_or(t, "analytic", "tolerance", tolerance);
        if let Some(v) = ctx.positive("analytic", "tolerance", tol) {
            tolerance = v;
        }
        let rm = ctx.num_or(t, "analytic", "rho_min", rho_min);
        if let Some(v) = ctx.positive("analytic", "rho_min", rm) {
            rho_min = v;
        }
    }

    let cases = match root.get("cases") {
        Some(Value::Array(entries)) => {
            if entries.is_empty() {
                ctx.bad("cases", "", "must list at least one case");
                return None;
            }
            let mut cases: Vec<CaseSpec> = Vec::with_capacity(entries.len());
            for (i, entry) in entries.iter().enumerate() {
                let sec = format!("cases[{i}]");
                let Value::Table(c) = entry else {
                    ctx.bad(&sec, "", "must be a [[cases]] table");
                    continue;
                };
                let label = match ctx.string(c, &sec, "label") {
                    Some(l) => l,
                    None => {
                        ctx.miss(&sec, "label");
                        continue;
                    }
                };
                if cases.iter().any(|p| p.label == label) {
                    ctx.bad(&sec, "label", format!("duplicate label `{label}`"));
                }
                let mut extra = vec!["label"];
                extra.extend_from_slice(preset_keys(c));
                let state = parse_state_from(ctx, c, &sec, &extra);
                let potential = parse_potential_from(ctx, c, &sec, false).unwrap_or(Potential::Free);
                if let Some(state) = state {
                    preflight_state(ctx, &sec, grid, &state);
                    cases.push(CaseSpec { label, state, potential });
                }
            }
            cases
        }
        Some(_) => {
            ctx.bad("cases", "", "must be [[cases]] tables");
            return None;
        }
        None => {
            if is_analytic {
                ctx.bad("cases", "", "experiment `analytic_wv` needs at least one [[cases]] entry");
            }
            return None;
        }
    };

    // the ladder is consumed in increasing order; accept any listing order
    let mut taus = taus;
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus.dedup();
    if taus.len() < 2 {
        ctx.bad("analytic", "taus", "drift times must be distinct");
    }
    Some(AnalyticSection { cases, taus, n_steps, tolerance, rho_min })
}

fn parse_sweep(
    ctx: &mut Ctx,
    root: &Table,
    grid: Option<GridSpec>,
    experiment: Option<ExperimentKind>,
) -> Option<SweepSection> {
    let t = match ctx.table(root, "sweep") {
        Some(t) => t,
        None => {
            if experiment == Some(ExperimentKind::Sweep) {
                ctx.bad("sweep", "", "required for experiment `sweep`");
            }
            return None;
        }
    };
    ctx.check_keys(
        t,
        "sweep",
        &["sigmas", "taus", "deltas", "n_runs", "n_steps", "censor_bound", "n_min", "rho_min"],
    );
    let sigmas = if t.contains_key("sigmas") {
        ctx.positive_array(t, "sweep", "sigmas")
    } else {
        ctx.miss("sweep", "sigmas");
        None
    };
    let taus = if t.contains_key("taus") {
        ctx.positive_array(t, "sweep", "taus")
    } else {
        ctx.miss("sweep", "taus");
        None
    };
    let deltas = if t.contains_key("deltas") {
        ctx.positive_array(t, "sweep", "deltas")?
    } else {
        vec![grid.map(|g| 4.0 * g.dx()).unwrap_or(0.15625)]
    };
    let n_runs = if t.contains_key("n_runs") {
        ctx.count(t, "sweep", "n_runs", 1)
    } else {
        ctx.miss("sweep", "n_runs");
        None
    };
    let n_steps = ctx.count_or(t, "sweep", "n_steps", 1, DEFAULT_N_STEPS);
    let censor_bound = ctx.num_or(t, "sweep", "censor_bound", DEFAULT_CENSOR_BOUND);
    let n_min = ctx.count_or(t, "sweep", "n_min", 2, DEFAULT_N_MIN);
    let rho_min = ctx.num_or(t, "sweep", "rho_min", DEFAULT_RHO_MIN);
    let rho_min = ctx.positive("sweep", "rho_min", rho_min)?;
    // monotonicity checks read the drift times largest-first
    let mut taus = taus?;
    taus.sort_by(|a, b| b.partial_cmp(a).unwrap());
    taus.dedup();
    Some(SweepSection {
        sigmas: sigmas?,
        taus,
        deltas,
        n_runs: n_runs?,
        n_steps,
        censor_bound,
        n_min,
        rho_min,
    })
}

fn parse_characterize(
    ctx: &mut Ctx,
    root: &Table,
    experiment: Option<ExperimentKind>,
) -> Option<CharacterizeSection> {
    let mut sec = CharacterizeSection {
        sigmas: vec![5.0, 10.0, 20.0],
        offset_scales: vec![-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0],
        rho_min: DEFAULT_RHO_MIN,
        witness_spread: 5.0,
        witness_spacing: 0.25,
        exponent_band: 0.3,
        fd_dt: 1e-4,
    };
    let t = match ctx.table(root, "characterize") {
        Some(t) => t,
        None => {
            return (experiment == Some(ExperimentKind::Characterize)).then_some(sec);
        }
    };
    ctx.check_keys(
        t,
        "characterize",
        &[
            "sigmas",
            "offset_scales",
            "rho_min",
            "witness_spread",
            "witness_spacing",
            "exponent_band",
            "fd_dt",
        ],
    );
    if t.contains_key("sigmas") {
        if let Some(s) = ctx.positive_array(t, "characterize", "sigmas") {
            if s.len() < 2 {
                ctx.bad("characterize", "sigmas", "the spread sweep needs at least two values");
            } else {
                sec.sigmas = s;
            }
        }
    }
    if t.contains_key("offset_scales") {
        if let Some(o) = ctx.num_array(t, "characterize", "offset_scales") {
            sec.offset_scales = o;
        }
    }
    let rm = ctx.num_or(t, "characterize", "rho_min", sec.rho_min);
    sec.rho_min = ctx.positive("characterize", "rho_min", rm)?;
    let ws = ctx.num_or(t, "characterize", "witness_spread", sec.witness_spread);
    sec.witness_spread = ctx.positive("characterize", "witness_spread", ws)?;
    let sp = ctx.num_or(t, "characterize", "witness_spacing", sec.witness_spacing);
    sec.witness_spacing = ctx.positive("characterize", "witness_spacing", sp)?;
    let band = ctx.num_or(t, "characterize", "exponent_band", sec.exponent_band);
    sec.exponent_band = ctx.positive("characterize", "exponent_band", band)?;
    let fd = ctx.num_or(t, "characterize", "fd_dt", sec.fd_dt);
    sec.fd_dt = ctx.positive("characterize", "fd_dt", fd)?;
    Some(sec)
}

fn parse_equivariance(
    ctx: &mut Ctx,
    root: &Table,
    experiment: Option<ExperimentKind>,
) -> Option<EquivarianceSection> {
    let mut sec = EquivarianceSection {
        t_final: 1.0,
        n_particles: 100_000,
        n_steps: 500,
        fd_dt: 1e-4,
        residual_bound: 1e-6,
    };
    let t = match ctx.table(root, "equivariance") {
        Some(t) => t,
        None => {
            return (experiment == Some(ExperimentKind::Equivariance)).then_some(sec);
        }
    };
    ctx.check_keys(
        t,
        "equivariance",
        &["t_final", "n_particles", "n_steps", "fd_dt", "residual_bound"],
    );
    let tf = ctx.num_or(t, "equivariance", "t_final", sec.t_final);
    sec.t_final = ctx.positive("equivariance", "t_final", tf)?;
    sec.n_particles = ctx.count_or(t, "equivariance", "n_particles", 100, sec.n_particles);
    sec.n_steps = ctx.count_or(t, "equivariance", "n_steps", 1, sec.n_steps);
    let fd = ctx.num_or(t, "equivariance", "fd_dt", sec.fd_dt);
    sec.fd_dt = ctx.positive("equivariance", "fd_dt", fd)?;
    let rb = ctx.num_or(t, "equivariance", "residual_bound", sec.residual_bound);
    sec.residual_bound = ctx.positive("equivariance", "residual_bound", rb)?;
    Some(sec)
}
