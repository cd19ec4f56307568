//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a numerical invariant or a reproduction
//! check fails, 2 for configuration errors.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::distribution::{
    distribute_pair, distribute_quad, pair_fidelity_closed_form, success_probability_closed_form, BellDiagonalPair,
    DistributionParams,
};
use crate::effective::{self, EffectiveScenario, PropagatorKind, ValidationReport};
use crate::field::LossChannel;
use crate::planner::{self, Check, Dataset, OutputFormat, RepeaterParams};
use crate::purification::{purified_fidelity_closed_form, purify, TripletEvolutionSpec};
use crate::qmat::BellState;
use crate::swapping::{self, chain_compose_pairs, ChainSpec, SwapMethod, DYNAMICAL_WEIGHT_ORDER};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "qrepeater", version, about = "Quantum repeater simulation and rate planning")]
pub struct Cli {
    /// JSON file with flat parameter keys; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for datasets.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Heralded pair distribution over one segment.
    Distribute(Overrides),
    /// One purification round on a freshly distributed pair.
    Purify(Overrides),
    /// Three-pair swap of identical rank-2 pairs.
    Swap(Overrides),
    /// N-segment chain fidelity, and the rate when a segment length is known.
    Chain(Overrides),
    /// Regenerate a reference dataset and compare with expected values.
    Reproduce {
        target: ReproduceTarget,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "lower")]
pub enum ReproduceTarget {
    Fig2,
    Fig4,
    Fig5,
    Table3,
    Table4,
    Table5,
    Appendix,
}

/// Flags mirroring the config keys.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "ell", alias = "ell-km")]
    pub ell_km: Option<f64>,
    #[arg(long = "attenuation", alias = "attenuation-km")]
    pub attenuation_km: Option<f64>,
    #[arg(long = "N", alias = "n-segments")]
    pub n_segments: Option<u32>,
    #[arg(long)]
    pub p_swap: Option<f64>,
    #[arg(long = "fiber-speed")]
    pub fiber_speed_mps: Option<f64>,
    #[arg(long)]
    pub j2_angle: Option<f64>,
    #[arg(long)]
    pub method: Option<SwapMethod>,
    #[arg(long)]
    pub fock_cutoff: Option<usize>,
    /// Per-segment fidelity for swap/chain; derived from alpha and ell if absent.
    #[arg(long = "F")]
    pub fidelity: Option<f64>,
}

/// Flat JSON configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub ell_km: Option<f64>,
    pub attenuation_km: Option<f64>,
    pub n_segments: Option<u32>,
    pub p_swap: Option<f64>,
    pub fiber_speed_mps: Option<f64>,
    pub j2_angle: Option<f64>,
    pub method: Option<SwapMethod>,
    pub fock_cutoff: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if o.$f.is_some() { self.$f = o.$f; } )* };
        }
        take!(alpha, beta, ell_km, attenuation_km, n_segments, p_swap, fiber_speed_mps, j2_angle, method, fock_cutoff);
    }
}

/// Fully resolved parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolved {
    pub alpha: f64,
    pub beta: f64,
    pub ell_km: f64,
    pub attenuation_km: f64,
    pub n_segments: u32,
    pub p_swap: f64,
    pub fiber_speed_mps: f64,
    pub j2_angle: f64,
    pub method: SwapMethod,
    pub fock_cutoff: Option<usize>,
    pub fidelity: Option<f64>,
}

impl Resolved {
    /// Built-in defaults with no config file or flags.
    pub fn defaults() -> Self {
        Self::from(&RunConfig::default(), None)
    }

    fn from(cfg: &RunConfig, fidelity: Option<f64>) -> Self {
        let d = RepeaterParams::default();
        Self {
            alpha: cfg.alpha.unwrap_or(d.alpha_mag),
            beta: cfg.beta.unwrap_or(1.0),
            ell_km: cfg.ell_km.unwrap_or(d.ell_km),
            attenuation_km: cfg.attenuation_km.unwrap_or(LossChannel::DEFAULT_ATTENUATION_KM),
            n_segments: cfg.n_segments.unwrap_or(3),
            p_swap: cfg.p_swap.unwrap_or(d.p_swap),
            fiber_speed_mps: cfg.fiber_speed_mps.unwrap_or(d.fiber_speed_mps),
            j2_angle: cfg.j2_angle.unwrap_or(TripletEvolutionSpec::ANGLE),
            method: cfg.method.unwrap_or(d.method),
            fock_cutoff: cfg.fock_cutoff,
            fidelity,
        }
    }

    fn distribution(&self) -> Result<DistributionParams> {
        DistributionParams::new(self.alpha, LossChannel::new(self.ell_km, self.attenuation_km)?, self.beta)
    }

    fn repeater(&self) -> Result<RepeaterParams> {
        let p = RepeaterParams {
            alpha_mag: self.alpha,
            ell_km: self.ell_km,
            n_segments: self.n_segments,
            attenuation_km: self.attenuation_km,
            p_swap: self.p_swap,
            fiber_speed_mps: self.fiber_speed_mps,
            method: self.method,
        };
        p.validate()?;
        Ok(p)
    }

    fn segment_fidelity(&self) -> Result<f64> {
        match self.fidelity {
            Some(f) if (0.0..=1.0).contains(&f) => Ok(f),
            Some(f) => Err(Error::InvalidParameter(format!("fidelity {f} outside [0, 1]"))),
            None => Ok(planner::segment_fidelities(&self.repeater()?).1),
        }
    }
}

/// Result of one command: summary line, written files and checks.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub summary: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl Outcome {
    fn kv(&mut self, key: &str, value: impl Into<String>) {
        self.summary.push((key.to_string(), value.into()));
    }

    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }

    pub fn summary_line(&self) -> String {
        self.summary.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
    }
}

/// Up to six decimals with trailing zeros removed.
pub fn fmt_short(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn invariant(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Invariant(what()))
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let overrides = match &cli.command {
        Command::Distribute(o) | Command::Purify(o) | Command::Swap(o) | Command::Chain(o) => o,
        Command::Reproduce { overrides, .. } => overrides,
    };
    cfg.apply(overrides);
    let r = Resolved::from(&cfg, overrides.fidelity);
    let format = OutputFormat::from(cli.format);
    match &cli.command {
        Command::Distribute(_) => cmd_distribute(&r, &cli.out, format),
        Command::Purify(_) => cmd_purify(&r, &cli.out, format),
        Command::Swap(_) => cmd_swap(&r, &cli.out, format),
        Command::Chain(_) => cmd_chain(&r, &cli.out, format),
        Command::Reproduce { target, .. } => reproduce(*target, &r, &cli.out, format),
    }
}

fn cmd_distribute(r: &Resolved, out: &Path, format: OutputFormat) -> Result<Outcome> {
    let p = r.distribution()?;
    let pair = distribute_pair(&p)?;
    let f = pair.state.weight(BellState::PsiPlus);
    let (fc, pc) = (pair_fidelity_closed_form(p.alpha_mag, p.eta()), success_probability_closed_form(p.alpha_mag, p.eta()));
    invariant((f - fc).abs() <= 1e-10, || format!("pair fidelity {f} departs from closed form {fc}"))?;
    invariant((pair.success_prob - pc).abs() <= 1e-10, || format!("success probability {} departs from {pc}", pair.success_prob))?;
    let mut d = Dataset { name: "distribute".into(), columns: cols(&["alpha", "ell_km", "f", "p_succ"]), rows: Vec::new() };
    d.rows.push(vec![p.alpha_mag, r.ell_km, f, pair.success_prob]);
    let mut o = Outcome::default();
    o.kv("f", fmt_short(f));
    o.kv("p", fmt_short(pair.success_prob));
    o.files.push(d.write(out, format)?);
    Ok(o)
}

fn cmd_purify(r: &Resolved, out: &Path, format: OutputFormat) -> Result<Outcome> {
    let p = r.distribution()?;
    let pair = distribute_pair(&p)?;
    let quad = distribute_quad(&p)?;
    let spec = TripletEvolutionSpec::with_angle(1.0, r.j2_angle)?;
    let res = purify(&pair, &quad, &spec)?;
    invariant(res.outcome_spread <= 1e-10, || format!("accepted outcomes differ by {}", res.outcome_spread))?;
    let f_in = pair.state.weight(BellState::PsiPlus);
    let big_f = res.fidelity();
    let closed = purified_fidelity_closed_form(f_in, p.alpha_mag, p.eta());
    let mut d = Dataset {
        name: "purify".into(),
        columns: cols(&["alpha", "ell_km", "f_in", "F_out", "p_succ", "F_closed_form"]),
        rows: Vec::new(),
    };
    d.rows.push(vec![p.alpha_mag, r.ell_km, f_in, big_f, res.total_success_prob, closed]);
    let mut o = Outcome::default();
    o.kv("f_in", fmt_short(f_in));
    o.kv("F", fmt_short(big_f));
    o.kv("p_succ", fmt_short(res.total_success_prob));
    o.kv("F_closed_form", fmt_short(closed));
    o.files.push(d.write(out, format)?);
    Ok(o)
}

/// Weights in the (S₁, S₂, S₃, S₄) order of the dynamical swap.
fn ordered_weights(p: &BellDiagonalPair) -> [f64; 4] {
    DYNAMICAL_WEIGHT_ORDER.map(|b| p.weight(b))
}

fn cmd_swap(r: &Resolved, out: &Path, format: OutputFormat) -> Result<Outcome> {
    let f = r.segment_fidelity()?;
    let seg = ChainSpec::new(3, f, r.method)?.segment();
    let rep = swapping::swap(&seg, &seg, &seg, r.method)?;
    invariant(rep.outcome_spread <= 1e-12, || format!("swap outcomes differ by {}", rep.outcome_spread))?;
    let w = ordered_weights(&rep.corrected());
    let mut d = Dataset {
        name: format!("swap_{}", r.method.label()),
        columns: cols(&["N", "F_in", "F_final", "S1", "S2", "S3", "S4"]),
        rows: Vec::new(),
    };
    d.rows.push(vec![3.0, f, w[0], w[0], w[1], w[2], w[3]]);
    let mut o = Outcome::default();
    o.kv("method", r.method.label());
    o.kv("F", fmt_short(f));
    for (k, v) in w.iter().enumerate() {
        o.kv(&format!("S{}", k + 1), fmt_short(*v));
    }
    if r.method == SwapMethod::Dynamical {
        o.kv("ordered_above", fmt_short(swapping::weight_ordering_threshold()));
    }
    o.files.push(d.write(out, format)?);
    Ok(o)
}

fn cmd_chain(r: &Resolved, out: &Path, format: OutputFormat) -> Result<Outcome> {
    let f = r.segment_fidelity()?;
    let spec = ChainSpec::new(r.n_segments, f, r.method)?;
    let res = chain_compose_pairs(&spec.segment(), spec.n_segments, spec.method)?;
    if let Some(c) = res.closed_form {
        invariant((c - res.f_final).abs() <= 1e-12, || format!("chain fidelity {} departs from closed form {c}", res.f_final))?;
    }
    let seg = BellDiagonalPair::new(res.final_weights)?;
    let w = ordered_weights(&seg);
    let mut d = Dataset {
        name: format!("chain_{}", r.method.label()),
        columns: cols(&["N", "F_in", "F_final", "S1", "S2", "S3", "S4"]),
        rows: Vec::new(),
    };
    d.rows.push(vec![r.n_segments as f64, f, res.f_final, w[0], w[1], w[2], w[3]]);
    let mut o = Outcome::default();
    o.kv("method", r.method.label());
    o.kv("N", r.n_segments.to_string());
    o.kv("F", fmt_short(f));
    o.kv("F_final", fmt_short(res.f_final));
    if r.fidelity.is_none() {
        o.kv("R_pps", fmt_short(planner::rate(&r.repeater()?)?));
    }
    o.files.push(d.write(out, format)?);
    Ok(o)
}

fn cols(c: &[&str]) -> Vec<String> {
    c.iter().map(|s| s.to_string()).collect()
}

/// Regenerates `target` into `out` and evaluates its checks.
pub fn reproduce(target: ReproduceTarget, r: &Resolved, out: &Path, format: OutputFormat) -> Result<Outcome> {
    let mut o = Outcome::default();
    o.kv("target", format!("{target:?}").to_lowercase());
    let base = r.repeater()?;
    match target {
        ReproduceTarget::Fig2 => {
            for alpha in planner::FIG_ALPHAS {
                let d = planner::fig2(alpha)?;
                o.checks.extend(planner::fig2_checks(&d));
                o.files.push(d.write(out, format)?);
            }
        }
        ReproduceTarget::Fig4 => {
            let d = planner::fig4();
            o.checks.extend(planner::fig4_checks(&d));
            o.files.push(d.write(out, format)?);
        }
        ReproduceTarget::Fig5 => {
            for alpha in planner::FIG_ALPHAS {
                let d = planner::fig5(&RepeaterParams { alpha_mag: alpha, ..base })?;
                o.checks.extend(planner::fig5_checks(&d));
                o.files.push(d.write(out, format)?);
            }
            let ell = planner::solve_segment_length(&RepeaterParams { alpha_mag: 1.0, n_segments: 15, ..base }, 0.8)?;
            o.checks.push(Check::abs("solve ell(alpha=1, F=0.8, N=15)", ell, 5.25, 0.75));
        }
        ReproduceTarget::Table3 | ReproduceTarget::Table4 | ReproduceTarget::Table5 => {
            let no = match target {
                ReproduceTarget::Table3 => 3,
                ReproduceTarget::Table4 => 4,
                _ => 5,
            };
            let t = planner::table(no)?;
            let disc = planner::table_discrepancy(no)?;
            o.checks.extend(planner::table_checks(&disc));
            if no == 3 {
                o.checks.push(Check::rel("worked example R(alpha=1, ell=11, N=3)", planner::worked_example_rate()?, 18.0, 0.1));
            }
            o.files.push(t.write(out, format)?);
            o.files.push(disc.write(out, format)?);
        }
        ReproduceTarget::Appendix => {
            let mut s = EffectiveScenario::default_displacement();
            if let Some(c) = r.fock_cutoff {
                s.fock_cutoff = c;
            }
            let app = appendix(&s)?;
            o.checks.extend(app.checks);
            let path = out.join("appendix.json");
            std::fs::create_dir_all(out).map_err(|source| Error::Io { path: out.display().to_string(), source })?;
            let body = serde_json::to_string_pretty(&app.reports).map_err(|e| Error::Invariant(e.to_string()))? + "\n";
            std::fs::write(&path, body).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            o.files.push(path);
        }
    }
    o.kv("files", o.files.len().to_string());
    o.kv("checks", o.checks.len().to_string());
    o.kv("failed", o.failed().to_string());
    Ok(o)
}

#[derive(Debug, Clone, Serialize)]
pub struct AppendixReports {
    pub displacement_ladder: Vec<ValidationReport>,
    pub xy: ValidationReport,
    /// Reported without a pass/fail threshold.
    pub xx: ValidationReport,
}

pub struct Appendix {
    pub reports: AppendixReports,
    pub checks: Vec<Check>,
}

pub const LADDER: [f64; 3] = [1.0, 2.0, 4.0];

/// Displacement validation with its hierarchy ladder, plus the XY scenario.
pub fn appendix(s: &EffectiveScenario) -> Result<Appendix> {
    let base = effective::validate(s)?;
    let mut ladder = vec![base];
    for &k in &LADDER[1..] {
        let rung = EffectiveScenario { propagator: PropagatorKind::RotatingFrame, ..s.with_hierarchy_scaled(k) };
        ladder.push(effective::validate(&rung)?);
    }
    let b = &ladder[0];
    let mut checks = vec![
        Check::at_least("displacement fidelity at |alpha|=0.25", b.final_state_fidelity, 0.99),
        Check::at_most("max excited population", b.max_excited_population, 1e-2),
        Check::at_most("midpoint tolerance doubling |dF|", b.convergence.delta, 1e-7),
        Check::at_most("midpoint vs exact residual", b.convergence.oracle_residual, 1e-6),
        Check::at_most("norm drift", b.convergence.norm_drift, 1e-9),
    ];
    if let Some(fit) = &b.fitted_displacement {
        checks.push(Check::at_most("fitted conditional displacement rel. error", fit.relative_error, 0.05));
    }
    let fids: Vec<f64> = ladder.iter().map(|r| r.final_state_fidelity).collect();
    checks.push(Check::holds("fidelity non-decreasing over hierarchy x1, x2, x4", fids.windows(2).all(|w| w[1] >= w[0])));
    for (k, r) in LADDER.iter().zip(&ladder) {
        let ratio = r.max_excited_population / r.excited_population_estimate;
        checks.push(Check::holds(format!("excited population within x4 of estimate (x{k}), ratio {ratio:.3}"), (0.25..=4.0).contains(&ratio)));
    }
    let xy = effective::validate(&EffectiveScenario::default_xy())?;
    checks.push(Check::at_least("XY fidelity, sign-corrected coupling", xy.final_state_fidelity, 0.99));
    let xx = effective::validate(&EffectiveScenario::default_xx())?;
    Ok(Appendix { reports: AppendixReports { displacement_ladder: ladder, xy, xx }, checks })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::NonImaginaryDisplacement { .. } | Error::HierarchyViolated(_) => 2,
        _ => 1,
    }
}

/// Parses `args`, runs, prints, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    match run(&cli) {
        Ok(o) => {
            for c in &o.checks {
                let _ = writeln!(w, "{c}");
            }
            let _ = writeln!(w, "{}", o.summary_line());
            if o.failed() > 0 {
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
