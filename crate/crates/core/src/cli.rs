//! Command-line front end: `run`, `montecarlo` and `verify`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{scenario_report, MIN_TRIALS};
use crate::dynamics::FormationMode;
use crate::error::Error;
use crate::scenarios::{monitor, run_trials, Hooks, Scenario, ScenarioConfig, ScenarioRun, Snapshot};
use crate::state::BrainState;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_STATISTICAL: i32 = 3;

/// Column order of `trajectory.csv`.
pub const TRAJECTORY_COLUMNS: [&str; 12] = [
    "step",
    "t",
    "term",
    "apparatus",
    "factor",
    "kind",
    "phantom",
    "coefficient_re",
    "coefficient_im",
    "factor_norm",
    "square_modulus",
    "current",
];

/// Scenario configs compiled into the binary and checked by `verify`.
pub const BUNDLE: &[(&str, &str)] = &[
    ("interaction.toml", include_str!("../configs/interaction.toml")),
    ("interaction_partial.toml", include_str!("../configs/interaction_partial.toml")),
    ("unresolvable_overlap.toml", include_str!("../configs/unresolvable_overlap.toml")),
    ("unresolvable_asymmetric.toml", include_str!("../configs/unresolvable_asymmetric.toml")),
    ("unresolvable_disjoint.toml", include_str!("../configs/unresolvable_disjoint.toml")),
    ("unresolvable_single_x.toml", include_str!("../configs/unresolvable_single_x.toml")),
    ("turn_off_overlap.toml", include_str!("../configs/turn_off_overlap.toml")),
    ("turn_off_disjoint.toml", include_str!("../configs/turn_off_disjoint.toml")),
    ("disengage.toml", include_str!("../configs/disengage.toml")),
    ("pulse_drift.toml", include_str!("../configs/pulse_drift.toml")),
    ("fade_in.toml", include_str!("../configs/fade_in.toml")),
];

#[derive(Debug, Parser)]
#[command(name = "pulse-reduction", version, about = "Stochastic brain-pulse reduction simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trajectory and write trajectory.csv, events.json and summary.json.
    Run(RunArgs),
    /// Run many trials in parallel and compare against the closed forms.
    Montecarlo(RunArgs),
    /// Run the invariant suite over the bundled configs (or --config).
    Verify(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormationArg {
    Instant,
    Staged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hook {
    BiasSiteSelection,
    TamperPhantom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Trajectory,
    Events,
    Summary,
}

/// Every flag can also be set through the matching `PULSE_*` variable.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario config (TOML).
    #[arg(long, env = "PULSE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, env = "PULSE_SEED")]
    pub seed: Option<u64>,
    /// Monte Carlo trial count.
    #[arg(long, env = "PULSE_TRIALS", default_value_t = 100_000)]
    pub trials: usize,
    /// Output directory; created if missing, must otherwise be empty unless
    /// --overwrite is given.
    #[arg(long, env = "PULSE_OUT", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, env = "PULSE_OVERWRITE")]
    pub overwrite: bool,
    /// Overrides the config's Rule (4) guard.
    #[arg(long, env = "PULSE_GUARD")]
    pub guard: Option<Toggle>,
    /// Overrides the config's formation mode.
    #[arg(long, env = "PULSE_FORMATION")]
    pub formation: Option<FormationArg>,
    /// Outputs to skip.
    #[arg(long, value_delimiter = ',')]
    pub skip: Vec<Output>,
    #[arg(long, hide = true, value_delimiter = ',')]
    pub hook: Vec<Hook>,
}

impl RunArgs {
    fn hooks(&self) -> Hooks {
        Hooks {
            bias_site_selection: self.hook.contains(&Hook::BiasSiteSelection),
            tamper_phantom: self.hook.contains(&Hook::TamperPhantom),
        }
    }

    fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(g) = self.guard {
            cfg.guard = g == Toggle::On;
        }
        if let Some(f) = self.formation {
            cfg.formation.mode = match f {
                FormationArg::Instant => FormationMode::Instantaneous,
                FormationArg::Staged => FormationMode::Staged,
            };
        }
    }

    fn load(&self) -> Result<(PathBuf, ScenarioConfig), Failure> {
        let path = self
            .config
            .clone()
            .ok_or_else(|| Failure::config("--config is required"))?;
        let mut cfg = ScenarioConfig::from_path(&path)?;
        self.apply(&mut cfg);
        Ok((path, cfg))
    }
}

/// A failed command: exit code plus message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: msg.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_runtime() {
            Self {
                code: EXIT_RUNTIME,
                message: format!("runtime invariant breach: {e}"),
            }
        } else {
            Self::config(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::config(format!("i/o error: {e}"))
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config_path: String,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub n_trials: usize,
    pub out_dir: String,
    pub emit: Vec<Output>,
    pub hooks: Vec<Hook>,
    pub version: &'static str,
    /// Seconds since the Unix epoch. The only nondeterministic output field.
    pub created_unix: u64,
}

fn manifest(command: &'static str, args: &RunArgs, path: &Path, cfg: &ScenarioConfig, n_trials: usize) -> RunManifest {
    RunManifest {
        command,
        config_path: path.display().to_string(),
        config: cfg.clone(),
        seed: cfg.seed,
        n_trials,
        out_dir: args.out.display().to_string(),
        emit: [Output::Trajectory, Output::Events, Output::Summary]
            .into_iter()
            .filter(|o| !args.skip.contains(o))
            .collect(),
        hooks: args.hook.clone(),
        version: env!("CARGO_PKG_VERSION"),
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    }
}

fn prepare_out(args: &RunArgs) -> Result<(), Failure> {
    let out = &args.out;
    if out.exists() && !args.overwrite && std::fs::read_dir(out)?.next().is_some() {
        return Err(Failure::config(format!(
            "output directory {} is not empty (pass --overwrite)",
            out.display()
        )));
    }
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn kind_label(state: &BrainState) -> &'static str {
    match state {
        BrainState::Pulse(p) => match p.kind() {
            crate::state::BrainKind::Conscious => "conscious",
            crate::state::BrainKind::Ready => "ready",
        },
        BrainState::Single { kind, .. } => match kind {
            crate::state::BrainKind::Conscious => "conscious",
            crate::state::BrainKind::Ready => "ready",
        },
        BrainState::Disengaged(_) => "disengaged",
    }
}

/// Long-format CSV, one row per (snapshot, term), floats to 17 significant
/// digits.
pub fn trajectory_csv(snapshots: &[Snapshot]) -> String {
    let mut out = TRAJECTORY_COLUMNS.join(",");
    out.push('\n');
    for snap in snapshots {
        for (i, term) in snap.terms.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{:.16e},{},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                snap.step,
                snap.t,
                i,
                term.apparatus.0,
                term.brain.label(),
                kind_label(&term.brain.state),
                term.phantom,
                term.coefficient.re,
                term.coefficient.im,
                term.brain.norm(),
                term.square_modulus(),
                snap.currents.get(i).copied().unwrap_or(0.0),
            );
        }
    }
    out
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let (path, cfg) = args.load()?;
    let scenario = Scenario::new(cfg.clone())?.with_hooks(args.hooks());
    let run = scenario.run()?;
    prepare_out(args)?;
    if !args.skip.contains(&Output::Trajectory) {
        std::fs::write(args.out.join("trajectory.csv"), trajectory_csv(&run.trajectory))?;
    }
    if !args.skip.contains(&Output::Events) {
        write_json(&args.out.join("events.json"), &run.events)?;
    }
    if !args.skip.contains(&Output::Summary) {
        write_json(&args.out.join("summary.json"), &run_summary(&run))?;
    }
    write_json(&args.out.join("manifest.json"), &manifest("run", args, &path, &cfg, 1))?;
    println!(
        "{}: {} snapshots, {} events -> {}",
        cfg.name.as_str(),
        run.trajectory.len(),
        run.events.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    #[serde(flatten)]
    summary: &'a crate::scenarios::Summary,
    invariants: &'a crate::scenarios::MonitorSummary,
}

fn run_summary(run: &ScenarioRun) -> RunSummary<'_> {
    RunSummary {
        summary: &run.summary,
        invariants: &run.monitor,
    }
}

fn cmd_montecarlo(args: &RunArgs) -> Result<(), Failure> {
    let (path, cfg) = args.load()?;
    if args.trials < MIN_TRIALS {
        return Err(Error::TooFewTrials {
            n: args.trials,
            min: MIN_TRIALS,
        }
        .into());
    }
    let scenario = Scenario::new(cfg.clone())?.with_hooks(args.hooks());
    let outcomes = run_trials(&scenario, args.trials)?;
    let report = scenario_report(&scenario, &outcomes)?;
    prepare_out(args)?;
    write_json(&args.out.join("report.json"), &report)?;
    write_json(
        &args.out.join("manifest.json"),
        &manifest("montecarlo", args, &path, &cfg, args.trials),
    )?;
    for c in &report.comparisons {
        println!(
            "{:<28} closed {:.6} empirical {:.6} se {:.2e} z {:+.3} {}",
            c.name,
            c.report.closed_form,
            c.report.empirical,
            c.report.std_error,
            c.report.z_score,
            if c.report.pass { "PASS" } else { "FAIL" }
        );
    }
    if let Some(h) = &report.histogram {
        println!(
            "{:<28} chi2 {:.3} dof {} p {:.4} {}",
            "hit_histogram",
            h.chi_square,
            h.dof,
            h.p_value,
            if h.pass { "PASS" } else { "FAIL" }
        );
    }
    if report.pass {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_STATISTICAL,
            message: "statistical comparison failed".into(),
        })
    }
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigVerdict {
    pub config: String,
    pub invariants: BTreeMap<&'static str, Verdict>,
    pub pass: bool,
}

const DETERMINISM: &str = "determinism";
const SETUP: &str = "setup";
const INVARIANTS: [&str; 5] = [
    monitor::NORMALIZATION,
    monitor::CONSERVATION,
    monitor::PHANTOM_FREEZE,
    monitor::RULE4_GUARD,
    monitor::REDUCTION_ZEROING,
];

fn verdict(status: Status, detail: impl Into<String>) -> Verdict {
    Verdict {
        status,
        detail: detail.into(),
    }
}

fn fingerprint(run: &ScenarioRun) -> String {
    serde_json::to_string(&(&run.events, &run.summary)).expect("run serializes")
}

/// Invariant suite for one config.
pub fn verify_config(name: &str, cfg: &ScenarioConfig, hooks: Hooks) -> ConfigVerdict {
    let mut inv: BTreeMap<&'static str, Verdict> = BTreeMap::new();
    let scenario = match Scenario::new(cfg.clone()) {
        Ok(s) => s.with_hooks(hooks),
        Err(e) => {
            inv.insert(SETUP, verdict(Status::Fail, e.to_string()));
            return ConfigVerdict {
                config: name.into(),
                invariants: inv,
                pass: false,
            };
        }
    };
    match scenario.run() {
        Ok(run) => {
            for name in INVARIANTS {
                let n = run.monitor.checks.get(name).copied().unwrap_or(0);
                let v = if n > 0 {
                    verdict(Status::Pass, format!("{n} checks"))
                } else {
                    verdict(Status::Skipped, "not exercised by this scenario")
                };
                inv.insert(name, v);
            }
            let again = scenario.run().map(|r| fingerprint(&r));
            inv.insert(
                DETERMINISM,
                match again {
                    Ok(f) if f == fingerprint(&run) => verdict(Status::Pass, "identical events and summary on rerun"),
                    Ok(_) => verdict(Status::Fail, "rerun with the same seed diverged"),
                    Err(e) => verdict(Status::Fail, e.to_string()),
                },
            );
        }
        Err(e) => {
            let (name, status) = match &e {
                Error::InvariantBreach { invariant, .. } => (*invariant, Status::Fail),
                Error::Rule4Violation(_) => (monitor::RULE4_GUARD, Status::Fail),
                _ => (SETUP, Status::Fail),
            };
            inv.insert(name, verdict(status, e.to_string()));
        }
    }

    // Guard probe: a trailing-to-leading ready transfer must be refused with
    // the guard on and caught by the monitor with it off.
    if cfg.name == crate::scenarios::ScenarioName::PulseDrift && cfg.drift.shadow_ready && !cfg.drift.intra_ready_transfer {
        let mut outcomes = Vec::new();
        for guard in [true, false] {
            let mut probe = cfg.clone();
            probe.guard = guard;
            probe.drift.intra_ready_transfer = true;
            let res = Scenario::new(probe).and_then(|s| s.run());
            outcomes.push(matches!(res, Err(Error::Rule4Violation(_))));
        }
        if inv.get(monitor::RULE4_GUARD).is_none_or(|v| v.status != Status::Fail) {
            inv.insert(
                monitor::RULE4_GUARD,
                if outcomes.iter().all(|x| *x) {
                    verdict(Status::Pass, "ready-to-ready transfer rejected with guard on and off")
                } else {
                    verdict(Status::Fail, format!("probe not rejected (guard on, off) = {outcomes:?}"))
                },
            );
        }
    }
    let pass = inv.values().all(|v| v.status != Status::Fail);
    ConfigVerdict {
        config: name.into(),
        invariants: inv,
        pass,
    }
}

fn cmd_verify(args: &RunArgs) -> Result<(), Failure> {
    let mut configs: Vec<(String, Result<ScenarioConfig, Error>)> = Vec::new();
    match &args.config {
        Some(path) => configs.push((path.display().to_string(), ScenarioConfig::from_path(path))),
        None => {
            for (name, text) in BUNDLE {
                configs.push((name.to_string(), ScenarioConfig::from_toml(text)));
            }
        }
    }
    let mut verdicts = Vec::new();
    for (name, cfg) in configs {
        let v = match cfg {
            Ok(mut cfg) => {
                args.apply(&mut cfg);
                verify_config(&name, &cfg, args.hooks())
            }
            Err(e) => ConfigVerdict {
                config: name,
                invariants: BTreeMap::from([(SETUP, verdict(Status::Fail, e.to_string()))]),
                pass: false,
            },
        };
        for (inv, verdict) in &v.invariants {
            println!(
                "{:<32} {:<18} {:<7} {}",
                v.config,
                inv,
                match verdict.status {
                    Status::Pass => "PASS",
                    Status::Fail => "FAIL",
                    Status::Skipped => "SKIP",
                },
                verdict.detail
            );
        }
        verdicts.push(v);
    }
    let pass = verdicts.iter().all(|v| v.pass);
    #[derive(Serialize)]
    struct VerifyReport {
        pass: bool,
        configs: Vec<ConfigVerdict>,
    }
    prepare_out(args)?;
    write_json(&args.out.join("report.json"), &VerifyReport { pass, configs: verdicts.clone() })?;
    if pass {
        Ok(())
    } else {
        let failed: Vec<String> = verdicts
            .iter()
            .flat_map(|v| {
                v.invariants
                    .iter()
                    .filter(|(_, x)| x.status == Status::Fail)
                    .map(move |(inv, x)| format!("{}: {inv}: {}", v.config, x.detail))
            })
            .collect();
        Err(Failure {
            code: EXIT_RUNTIME,
            message: format!("invariant suite failed:\n  {}", failed.join("\n  ")),
        })
    }
}

pub fn execute(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
