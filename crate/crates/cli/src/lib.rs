//! Argument parsing and command dispatch for the `biphoton` binary.
//!
//! Simulation settings resolve as flags, then `--config FILE`, then the
//! built-in defaults. The output directory additionally falls back to
//! `$BIPHOTON_OUT_DIR` before the default `biphoton-out`.
//!
//! Config files hold one `key = value` per line; `#` starts a comment.
//! Keys: `modes dz c kappa steps snapshot_every envelope mask input out_dir`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};

use biphoton_core::analytic::{self, PhysicalParams};
use biphoton_core::config::{EnvelopeSpec, InputKind, MaskSpec, SimConfig};
use biphoton_core::harness::Registry;
use biphoton_core::io::{self, PlotFiles};
use biphoton_core::mode_oracle::{KineticConvention, ModeOdeSystem};
use biphoton_core::observables::intensities;
use biphoton_core::propagator::{self, rotation_angle_accumulated};

pub const OUT_DIR_ENV: &str = "BIPHOTON_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "biphoton-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// `--help` or `--version`; the text goes to stdout and the exit is 0.
    #[error("{0}")]
    Info(String),
    #[error(transparent)]
    Core(#[from] biphoton_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => EXIT_OK,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(biphoton_core::Error::Spec { .. })
            | CliError::Core(biphoton_core::Error::UnknownScenario(_))
            | CliError::Core(biphoton_core::Error::InvalidParameter(_))
            | CliError::Core(biphoton_core::Error::InvalidLattice(_))
            | CliError::Core(biphoton_core::Error::StepTooLarge { .. }) => EXIT_USAGE,
            _ => EXIT_VALIDATION,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "biphoton", version, about = "Two-photon four-wave-mixing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Propagate one configuration and write CSVs.
    Run(SimArgs),
    /// Run registered validation scenarios.
    Validate(ValidateArgs),
    /// Repeat a run over several coupling strengths.
    Sweep(SweepArgs),
    /// Convert atomic parameters into the coupling per unit length.
    Params(ParamsArgs),
}

#[derive(Debug, Clone, Default, Args)]
struct SimArgs {
    /// key = value settings, overridden by flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lattice cells M.
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    dz: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    /// Whole-cell steps; defaults to one full cycle, round(pi / (kappa c dt)).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// gaussian:CENTER,WIDTH or point:CELL
    #[arg(long)]
    envelope: Option<String>,
    /// full or window:START,END
    #[arg(long)]
    mask: Option<String>,
    /// separable, diagonal or generated
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("target").required(true).args(["all", "scenario", "list"])))]
struct ValidateArgs {
    #[arg(long)]
    all: bool,
    /// May be repeated.
    #[arg(long)]
    scenario: Vec<String>,
    #[arg(long)]
    list: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Comma-separated coupling strengths.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    kappas: Vec<f64>,
    /// Adds an RK4 mode-space column with dt = dz / (c * DIVISOR).
    #[arg(long)]
    dt_divisor: Option<u32>,
}

#[derive(Debug, Args)]
struct ParamsArgs {
    /// Atoms per unit volume.
    #[arg(long)]
    density: f64,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    delta: f64,
    /// Speed of light in the same units (SI by default).
    #[arg(long, default_value_t = 299_792_458.0)]
    c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidateTarget {
    All,
    Scenarios(Vec<String>),
    List,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Run,
    Validate(ValidateTarget),
    Sweep { kappas: Vec<f64>, dt_divisor: Option<u32> },
    Params { params: PhysicalParams, c: f64 },
}

/// Fully resolved invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub command: Command,
    pub sim: SimConfig,
    pub out_dir: PathBuf,
}

/// Settings read from a config file, keyed by name.
fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{}:{}: expected `key = value`, got `{line}`", path.display(), i + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        const KEYS: [&str; 10] = [
            "modes", "dz", "c", "kappa", "steps", "snapshot_every", "envelope", "mask", "input", "out_dir",
        ];
        if !KEYS.contains(&k) {
            return Err(CliError::Usage(format!("{}:{}: unknown key `{k}`", path.display(), i + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(CliError::Usage(format!("{}:{}: duplicate key `{k}`", path.display(), i + 1)));
        }
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("config value for `{key}` is malformed: `{v}`")))
}

fn spec<T>(v: &str) -> Result<T>
where
    T: std::str::FromStr<Err = biphoton_core::Error>,
{
    v.parse::<T>().map_err(|e| CliError::Usage(e.to_string()))
}

/// Applies config file, then flags, over the defaults.
fn resolve_sim(args: &SimArgs, env_out_dir: Option<PathBuf>) -> Result<(SimConfig, PathBuf)> {
    let file = match &args.config {
        Some(p) => read_config_file(p)?,
        None => BTreeMap::new(),
    };
    let pick = |flag: Option<String>, key: &str| flag.or_else(|| file.get(key).cloned());
    let mut sim = SimConfig::default();
    if let Some(v) = pick(args.modes.map(|v| v.to_string()), "modes") {
        sim.cells = parse_value("modes", &v)?;
    }
    if let Some(v) = pick(args.dz.map(|v| v.to_string()), "dz") {
        sim.dz = parse_value("dz", &v)?;
    }
    if let Some(v) = pick(args.c.map(|v| v.to_string()), "c") {
        sim.c = parse_value("c", &v)?;
    }
    let kappa = pick(args.kappa.map(|v| v.to_string()), "kappa");
    if let Some(v) = &kappa {
        sim.kappa = parse_value("kappa", v)?;
    }
    if let Some(v) = pick(args.snapshot_every.map(|v| v.to_string()), "snapshot_every") {
        sim.snapshot_every = parse_value("snapshot_every", &v)?;
    }
    if let Some(v) = pick(args.envelope.clone(), "envelope") {
        sim.envelope = spec::<EnvelopeSpec>(&v)?;
    }
    if let Some(v) = pick(args.mask.clone(), "mask") {
        sim.mask = spec::<MaskSpec>(&v)?;
    }
    if let Some(v) = pick(args.input.clone(), "input") {
        sim.input = spec::<InputKind>(&v)?;
    }
    sim.steps = match pick(args.steps.map(|v| v.to_string()), "steps") {
        Some(v) => parse_value("steps", &v)?,
        None => full_cycle_steps(&sim)?,
    };
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| file.get("out_dir").map(PathBuf::from))
        .or(env_out_dir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    sim.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((sim, out_dir))
}

/// Whole-cell steps in one conversion cycle `pi / (kappa c)`.
fn full_cycle_steps(sim: &SimConfig) -> Result<usize> {
    if sim.kappa == 0.0 || !sim.kappa.is_finite() || sim.dz.is_nan() || sim.dz <= 0.0 || sim.c.is_nan() || sim.c <= 0.0 {
        return Err(CliError::Usage(
            "--steps is required when kappa is zero (no conversion cycle)".into(),
        ));
    }
    let steps = analytic::cycle_time(sim.kappa.abs(), sim.c) / (sim.dz / sim.c);
    Ok(steps.round() as usize)
}

/// Parses `argv` (including the program name) with an explicit value for
/// the output-directory environment variable.
pub fn parse_args_with_env<I, T>(argv: I, env_out_dir: Option<PathBuf>) -> Result<CliConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    })?;
    match cli.command {
        Sub::Run(args) => {
            let (sim, out_dir) = resolve_sim(&args, env_out_dir)?;
            Ok(CliConfig {
                command: Command::Run,
                sim,
                out_dir,
            })
        }
        Sub::Validate(args) => {
            let target = if args.all {
                ValidateTarget::All
            } else if args.list {
                ValidateTarget::List
            } else {
                ValidateTarget::Scenarios(args.scenario)
            };
            let out_dir = args
                .out_dir
                .or(env_out_dir)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            Ok(CliConfig {
                command: Command::Validate(target),
                sim: SimConfig::default(),
                out_dir,
            })
        }
        Sub::Sweep(args) => {
            if args.sim.kappa.is_some() {
                return Err(CliError::Usage("--kappa conflicts with --kappas; a sweep takes its couplings from --kappas".into()));
            }
            if args.dt_divisor == Some(0) {
                return Err(CliError::Usage("--dt-divisor must be at least 1".into()));
            }
            let mut base = args.sim.clone();
            // steps are fixed across the sweep; default to one cycle of the first kappa
            base.kappa = args.kappas.first().copied();
            let (sim, out_dir) = resolve_sim(&base, env_out_dir)?;
            if args.dt_divisor.is_some() && !matches!(sim.mask, MaskSpec::Full) {
                return Err(CliError::Usage("--dt-divisor needs a full-ring mask".into()));
            }
            Ok(CliConfig {
                command: Command::Sweep {
                    kappas: args.kappas,
                    dt_divisor: args.dt_divisor,
                },
                sim,
                out_dir,
            })
        }
        Sub::Params(args) => {
            let params = PhysicalParams::new(args.density, args.lambda, args.gamma, args.delta)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            if args.c.is_nan() || args.c <= 0.0 {
                return Err(CliError::Usage(format!("--c must be positive, got {}", args.c)));
            }
            Ok(CliConfig {
                command: Command::Params { params, c: args.c },
                sim: SimConfig::default(),
                out_dir: env_out_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            })
        }
    }
}

/// [`parse_args_with_env`] reading `$BIPHOTON_OUT_DIR`.
pub fn parse_args<I, T>(argv: I) -> Result<CliConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    parse_args_with_env(argv, std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Worst coincident-amplitude deviation from `psi0(source) cos(angle)` over
/// `snapshots`, with the angle counted cell by cell through the mask.
fn diagonal_deviation(sim: &SimConfig, snapshots: &[biphoton_core::TwoPhotonState]) -> Result<f64> {
    let start = snapshots.first().expect("run keeps the initial state");
    let lattice = start.lattice();
    let mask = sim.medium()?;
    let mut worst = 0.0f64;
    for s in snapshots {
        let n = lattice.cells_travelled(s.t() - start.t()).expect("cell aligned") as usize;
        for l in 0..lattice.cells() {
            let src = lattice.wrap_cell(l as i64 - n as i64);
            let angle = rotation_angle_accumulated(&mask, sim.kappa, lattice.dz(), src, n);
            let (o0, e0) = (start.psi_omega()[[src, src]], start.psi_e()[[src, src]]);
            let mis = biphoton_core::C64::new(0.0, -angle.sin());
            let o = o0 * angle.cos() + e0 * mis;
            let e = o0 * mis + e0 * angle.cos();
            worst = worst.max((s.psi_omega()[[l, l]] - o).norm()).max((s.psi_e()[[l, l]] - e).norm());
        }
    }
    Ok(worst)
}

fn execute_run(cfg: &CliConfig, out: &mut dyn Write) -> Result<i32> {
    let sim = &cfg.sim;
    let traj = propagator::run(&sim.initial_state()?, &sim.plan()?, sim.snapshot_every)?;
    create_dir(&cfg.out_dir)?;
    let dir = &cfg.out_dir;
    io::write_diagonal_series(dir.join("run_diagonal.csv"), &traj.snapshots)?;
    io::write_intensity_series(dir.join("run_intensity.csv"), &traj.snapshots)?;
    let last = traj.last().expect("run keeps the final state");
    io::write_grid(dir.join("run_grid.csv"), last)?;
    io::write_gnuplot_script(
        dir.join("run.gp"),
        "run",
        &PlotFiles {
            diagonal: Some("run_diagonal.csv"),
            intensity: Some("run_intensity.csv"),
            grid: Some("run_grid.csv"),
        },
    )?;
    let first = traj.initial().expect("run keeps the initial state");
    let p = intensities(last);
    let dz = sim.dz;
    let pump: f64 = p.omega1.iter().sum::<f64>() * dz;
    let generated: f64 = p.e1.iter().sum::<f64>() * dz;
    let mut s = String::new();
    let _ = writeln!(s, "cells {} dz {} c {} kappa {} steps {}", sim.cells, sim.dz, sim.c, sim.kappa, sim.steps);
    let _ = writeln!(s, "envelope {} mask {} input {}", sim.envelope, sim.mask, sim.input);
    let _ = writeln!(s, "final t {:.6}", last.t());
    let _ = writeln!(s, "pump photons {pump:.12} generated photons {generated:.12}");
    let _ = writeln!(s, "norm drift {:.3e}", (last.norm() - first.norm()).abs());
    let _ = writeln!(s, "coincident deviation from closed form {:.3e}", diagonal_deviation(sim, &traj.snapshots)?);
    let _ = writeln!(s, "wrote {} snapshots to {}", traj.len(), dir.display());
    out.write_all(s.as_bytes()).ok();
    Ok(EXIT_OK)
}

fn execute_validate(cfg: &CliConfig, target: &ValidateTarget, out: &mut dyn Write) -> Result<i32> {
    let registry = Registry::standard();
    let report = match target {
        ValidateTarget::List => {
            let mut s = String::new();
            for name in registry.names() {
                let _ = writeln!(s, "{name:<16} {}", registry.get(name)?.summary);
            }
            out.write_all(s.as_bytes()).ok();
            return Ok(EXIT_OK);
        }
        ValidateTarget::All => registry.run_all(Some(&cfg.out_dir))?,
        ValidateTarget::Scenarios(names) => {
            // resolve every name before running anything
            for n in names {
                registry.get(n)?;
            }
            let mut all = biphoton_core::harness::ValidationReport::default();
            for n in names {
                all.extend(registry.run(n, Some(&cfg.out_dir))?);
            }
            all
        }
    };
    let text = format!("{report}\n");
    write_text(&cfg.out_dir.join("report.txt"), &text)?;
    out.write_all(text.as_bytes()).ok();
    Ok(if report.passed() { EXIT_OK } else { EXIT_VALIDATION })
}

fn execute_sweep(cfg: &CliConfig, kappas: &[f64], dt_divisor: Option<u32>, out: &mut dyn Write) -> Result<i32> {
    let mut table = String::from("kappa,steps,pump_photons,generated_photons,coincident_deviation");
    if dt_divisor.is_some() {
        table.push_str(",oracle_l2");
    }
    table.push('\n');
    for &kappa in kappas {
        let sim = SimConfig {
            kappa,
            ..cfg.sim.clone()
        };
        let start = sim.initial_state()?;
        let traj = propagator::run(&start, &sim.plan()?, sim.snapshot_every)?;
        let last = traj.last().expect("run keeps the final state");
        let p = intensities(last);
        let pump: f64 = p.omega1.iter().sum::<f64>() * sim.dz;
        let generated: f64 = p.e1.iter().sum::<f64>() * sim.dz;
        let dev = diagonal_deviation(&sim, &traj.snapshots)?;
        let _ = write!(table, "{kappa:.16e},{},{pump:.16e},{generated:.16e},{dev:.16e}", sim.steps);
        if let Some(div) = dt_divisor {
            let lattice = sim.lattice()?;
            let system = ModeOdeSystem::new(lattice, kappa, KineticConvention::PairSector);
            let rk = system.integrate(&start.to_modes(), last.t(), lattice.cell_time() / div as f64)?;
            let _ = write!(table, ",{:.16e}", rk.modes.to_state().l2_distance(last));
        }
        table.push('\n');
    }
    create_dir(&cfg.out_dir)?;
    write_text(&cfg.out_dir.join("sweep.csv"), &table)?;
    out.write_all(table.as_bytes()).ok();
    Ok(EXIT_OK)
}

fn execute_params(params: &PhysicalParams, c: f64, out: &mut dyn Write) -> Result<i32> {
    let kappa = params.kappa();
    let s = format!(
        "g = {:.9e}\nkappa = {kappa:.9e}\nconversion_length = {:.9e}\nfull_cycle_length = {:.9e}\ncycle_time = {:.9e}\n",
        params.coupling(),
        analytic::conversion_length(kappa),
        analytic::full_cycle_length(kappa),
        analytic::cycle_time(kappa, c),
    );
    out.write_all(s.as_bytes()).ok();
    Ok(EXIT_OK)
}

/// Runs a parsed command, writing human-readable output to `out`.
pub fn execute(cfg: &CliConfig, out: &mut dyn Write) -> Result<i32> {
    match &cfg.command {
        Command::Run => execute_run(cfg, out),
        Command::Validate(target) => execute_validate(cfg, target, out),
        Command::Sweep { kappas, dt_divisor } => execute_sweep(cfg, kappas, *dt_divisor, out),
        Command::Params { params, c } => execute_params(params, *c, out),
    }
}

/// Parse, execute and map every outcome to an exit code. Errors go to `err`.
pub fn main_with<I, T>(argv: I, env_out_dir: Option<PathBuf>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_args_with_env(argv, env_out_dir).and_then(|cfg| execute(&cfg, out));
    match result {
        Ok(code) => code,
        Err(CliError::Info(text)) => {
            let _ = write!(out, "{text}");
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.to_string().trim_start_matches("error: ").trim_end());
            e.exit_code()
        }
    }
}
