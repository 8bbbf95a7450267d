//! Scenario registry and validation runner.
//!
//! Each scenario builds its inputs, runs the propagator (and an oracle where
//! one applies), compares against closed forms and records one [`Check`] per
//! comparison. With an output directory it also writes CSVs and a gnuplot
//! script; the CSVs depend only on the scenario, never on timing.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::analytic::{self, Geometry};
use crate::config::{EnvelopeSpec, InputKind, MaskSpec, SimConfig};
use crate::error::{Error, Result};
use crate::fock;
use crate::io::{self, PlotFiles};
use crate::lattice::{Envelope, TwoPhotonState, C64};
use crate::mode_oracle::{KineticConvention, ModeOdeSystem};
use crate::observables::{intensities, sign_flip_metric, xicondition_residual, ConservationTracker};
use crate::propagator::{self, Trajectory};

/// One comparison: `residual` must be strictly below `tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Wall time of the scenario that produced the check.
    pub runtime_seconds: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            // NaN fails
            passed: residual < tolerance,
            runtime_seconds: 0.0,
        }
    }

    /// Passes when `lo <= value <= hi`; the residual is the distance outside the band.
    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        let outside = if value < lo {
            lo - value
        } else if value > hi {
            value - hi
        } else if value.is_nan() {
            f64::NAN
        } else {
            0.0
        };
        let mut c = Self::new(name, value, hi);
        c.passed = outside == 0.0;
        c
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<36} residual={:<11.3e} tolerance={:<9.1e} {} ({:.3}s)",
            self.name,
            self.residual,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" },
            self.runtime_seconds
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// Files written, in order.
    pub artifacts: Vec<PathBuf>,
}

impl ValidationReport {
    /// Conjunction of all checks; an empty report does not pass.
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
        self.artifacts.extend(other.artifacts);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.failures().count();
        write!(
            f,
            "{}: {} checks, {} failed",
            if self.passed() { "PASS" } else { "FAIL" },
            self.checks.len(),
            failed
        )
    }
}

type Runner = fn(&Scenario, &mut Context) -> Result<()>;

pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    pub config: SimConfig,
    /// File names written into the output directory.
    pub artifacts: &'static [&'static str],
    runner: Runner,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

/// Collects checks and writes artifacts for one scenario run.
struct Context<'a> {
    prefix: &'static str,
    out_dir: Option<&'a Path>,
    report: ValidationReport,
}

impl Context<'_> {
    fn check(&mut self, name: &str, residual: f64, tolerance: f64) {
        self.report.checks.push(Check::new(format!("{}.{name}", self.prefix), residual, tolerance));
    }

    fn band(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        self.report.checks.push(Check::within(format!("{}.{name}", self.prefix), value, lo, hi));
    }

    fn path(&mut self, file: &str) -> Option<PathBuf> {
        let p = self.out_dir?.join(file);
        self.report.artifacts.push(p.clone());
        Some(p)
    }

    /// Writes the standard trio (diagonal and intensity series, final grid)
    /// plus a plotting script.
    fn emit_trajectory(&mut self, traj: &Trajectory) -> Result<()> {
        let Some(_) = self.out_dir else { return Ok(()) };
        let name = self.prefix;
        let (d, i, g) = (format!("{name}_diagonal.csv"), format!("{name}_intensity.csv"), format!("{name}_grid.csv"));
        if let Some(p) = self.path(&d) {
            io::write_diagonal_series(p, &traj.snapshots)?;
        }
        if let Some(p) = self.path(&i) {
            io::write_intensity_series(p, &traj.snapshots)?;
        }
        if let (Some(p), Some(last)) = (self.path(&g), traj.last()) {
            io::write_grid(p, last)?;
        }
        if let Some(p) = self.path(&format!("{name}.gp")) {
            let files = PlotFiles {
                diagonal: Some(&d),
                intensity: Some(&i),
                grid: Some(&g),
            };
            io::write_gnuplot_script(p, name, &files)?;
        }
        Ok(())
    }
}

/// Ordered set of uniquely named scenarios.
#[derive(Debug)]
pub struct Registry {
    scenarios: Vec<Scenario>,
}

impl Registry {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self> {
        for (i, s) in scenarios.iter().enumerate() {
            if scenarios[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::InvalidParameter(format!("duplicate scenario `{}`", s.name)));
            }
        }
        Ok(Self { scenarios })
    }

    pub fn standard() -> Self {
        Self::new(standard_scenarios()).expect("built-in names are unique")
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.scenarios.iter().map(|s| s.name).collect()
    }

    pub fn get(&self, name: &str) -> Result<&Scenario> {
        self.scenarios
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::UnknownScenario(name.to_string()))
    }

    /// Runs one scenario. Failed comparisons land in the report; only setup
    /// and I/O problems are errors.
    pub fn run(&self, name: &str, out_dir: Option<&Path>) -> Result<ValidationReport> {
        let scenario = self.get(name)?;
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let started = Instant::now();
        let mut ctx = Context {
            prefix: scenario.name,
            out_dir,
            report: ValidationReport::default(),
        };
        (scenario.runner)(scenario, &mut ctx)?;
        let elapsed = started.elapsed().as_secs_f64();
        for c in &mut ctx.report.checks {
            c.runtime_seconds = elapsed;
        }
        log::info!("scenario {} finished in {elapsed:.3}s", scenario.name);
        Ok(ctx.report)
    }

    pub fn run_all(&self, out_dir: Option<&Path>) -> Result<ValidationReport> {
        if self.scenarios.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        let mut all = ValidationReport::default();
        for s in &self.scenarios {
            all.extend(self.run(s.name, out_dir)?);
        }
        Ok(all)
    }
}

pub fn list_scenarios() -> Vec<&'static str> {
    Registry::standard().names()
}

pub fn run_scenario(name: &str, out_dir: Option<&Path>) -> Result<ValidationReport> {
    Registry::standard().run(name, out_dir)
}

pub fn run_all(out_dir: Option<&Path>) -> Result<ValidationReport> {
    Registry::standard().run_all(out_dir)
}

fn ring45() -> SimConfig {
    SimConfig::default()
}

fn standard_scenarios() -> Vec<Scenario> {
    let tight = ring45().tolerances;
    vec![
        Scenario {
            name: "fig1",
            summary: "45-cell ring, separable Gaussian pair, one cycle: coincident pump amplitude and off-diagonal transport",
            config: ring45(),
            artifacts: &["fig1_diagonal.csv", "fig1_intensity.csv", "fig1_grid.csv", "fig1.gp"],
            runner: run_fig1,
        },
        Scenario {
            name: "conversion",
            summary: "diagonal entangled Gaussian, one cycle: pump intensity follows cos^2 exactly; separable intensity follows the discrete law",
            config: SimConfig {
                input: InputKind::Diagonal,
                ..ring45()
            },
            artifacts: &["conversion_diagonal.csv", "conversion_intensity.csv", "conversion_grid.csv", "conversion.gp"],
            runner: run_conversion,
        },
        Scenario {
            name: "fig2",
            summary: "generated fields over one cycle from a separable pump pair",
            config: ring45(),
            artifacts: &["fig2_diagonal.csv", "fig2_intensity.csv", "fig2_grid.csv", "fig2.gp"],
            runner: run_fig2,
        },
        Scenario {
            name: "fig2d",
            summary: "pump grid after one full cycle: coincident sign flip, off-diagonal shifted unchanged",
            config: ring45(),
            artifacts: &["fig2d_grid_tau.csv", "fig2d.gp"],
            runner: run_fig2d,
        },
        Scenario {
            name: "xicondition",
            summary: "mode coefficients after one cycle against the anti-diagonal mixing map, M = 9 and 45",
            config: ring45(),
            artifacts: &[],
            runner: run_xicondition,
        },
        Scenario {
            name: "soliton",
            summary: "diagonal entangled input over three cycles: soliton profile is form-stable",
            config: SimConfig {
                input: InputKind::Diagonal,
                steps: 135,
                ..ring45()
            },
            artifacts: &["soliton_diagonal.csv", "soliton_intensity.csv", "soliton_grid.csv", "soliton.gp"],
            runner: run_soliton,
        },
        Scenario {
            name: "window_bvp",
            summary: "narrow pulse entering a medium window: coincident amplitude carries cos(kappa z) in depth",
            config: SimConfig {
                kappa: PI / 20.0,
                steps: 33,
                envelope: EnvelopeSpec::Gaussian {
                    center: 7.0,
                    width: 1.0,
                },
                mask: MaskSpec::Window { start: 15, end: 35 },
                ..ring45()
            },
            artifacts: &["window_bvp_diagonal.csv", "window_bvp_intensity.csv", "window_bvp_grid.csv", "window_bvp.gp"],
            runner: run_window_bvp,
        },
        Scenario {
            name: "fock_crosscheck",
            summary: "3-cell truncated Fock space against the propagator, kappa = 0.2, 30 steps",
            config: SimConfig {
                cells: 3,
                kappa: 0.2,
                steps: 30,
                envelope: EnvelopeSpec::Gaussian {
                    center: 1.0,
                    width: 1.0,
                },
                ..ring45()
            },
            artifacts: &[],
            runner: run_fock_crosscheck,
        },
        Scenario {
            name: "conservation",
            summary: "ten thousand steps on the 45-cell ring: norm and the four transported invariants",
            config: SimConfig {
                steps: 10_000,
                ..ring45()
            },
            artifacts: &[],
            runner: run_conservation,
        },
        Scenario {
            name: "mode_oracle",
            summary: "RK4 in mode space against the propagator over one cycle, with dt halving",
            config: ring45(),
            artifacts: &[],
            runner: run_mode_oracle,
        },
    ]
    .into_iter()
    .map(|mut s| {
        s.config.tolerances = tight;
        s
    })
    .collect()
}

/// `f0(l - n) f0(l - n)` for the cell reached after `n` steps.
fn retarded_pair(env: &Envelope, l: usize, n: i64) -> C64 {
    let f = env.amplitudes()[env.lattice().wrap_cell(l as i64 - n)];
    f * f
}

fn steps_at(state: &TwoPhotonState) -> i64 {
    state
        .lattice()
        .cells_travelled(state.t())
        .expect("propagator snapshots are cell aligned")
}

fn run_config(s: &Scenario) -> Result<(Envelope, Trajectory)> {
    let cfg = &s.config;
    let traj = propagator::run(&cfg.initial_state()?, &cfg.plan()?, cfg.snapshot_every)?;
    Ok((cfg.envelope()?, traj))
}

/// Worst deviation of both coincident amplitudes from the ring closed forms,
/// for a separable input.
fn diagonal_residuals(env: &Envelope, kappa: f64, traj: &Trajectory) -> (f64, f64) {
    let (mut omega, mut e) = (0.0f64, 0.0f64);
    for s in &traj.snapshots {
        let lat = s.lattice();
        let n = steps_at(s);
        let angle = Geometry::Ring.angle(kappa, lat.c(), 0.0, s.t());
        for l in 0..lat.cells() {
            let f2 = retarded_pair(env, l, n);
            omega = omega.max((s.psi_omega()[[l, l]] - analytic::diag_psi_omega(f2, angle)).norm());
            e = e.max((s.psi_e()[[l, l]] - analytic::diag_psi_e(f2, angle)).norm());
        }
    }
    (omega, e)
}

fn run_fig1(s: &Scenario, ctx: &mut Context) -> Result<()> {
    let tol = s.config.tolerances.analytic;
    let (env, traj) = run_config(s)?;
    let mut abs_res = 0.0f64;
    let mut off = 0.0f64;
    for snap in &traj.snapshots {
        let lat = snap.lattice();
        let n = steps_at(snap);
        let angle = Geometry::Ring.angle(s.config.kappa, lat.c(), 0.0, snap.t());
        let f = |l: usize| env.amplitudes()[lat.wrap_cell(l as i64 - n)];
        for ((l, lp), v) in snap.psi_omega().indexed_iter() {
            if l == lp {
                abs_res = abs_res.max((v.norm() - (f(l) * f(l) * angle.cos()).norm()).abs());
            } else {
                off = off.max((v - f(l) * f(lp)).norm());
            }
        }
    }
    let (omega, e) = diagonal_residuals(&env, s.config.kappa, &traj);
    ctx.check("abs_diag_omega", abs_res, tol);
    ctx.check("diag_omega", omega, tol);
    ctx.check("diag_e", e, tol);
    ctx.check("offdiag_transport", off, tol);
    ctx.emit_trajectory(&traj)
}

fn run_conversion(s: &Scenario, ctx: &mut Context) -> Result<()> {
    let tol = s.config.tolerances.analytic;
    let (env, traj) = run_config(s)?;
    let mut res = 0.0f64;
    let mut res_e = 0.0f64;
    for snap in &traj.snapshots {
        let lat = snap.lattice();
        let n = steps_at(snap);
        let angle = Geometry::Ring.angle(s.config.kappa, lat.c(), 0.0, snap.t());
        let p = intensities(snap);
        for l in 0..lat.cells() {
            let f2 = retarded_pair(&env, l, n).norm();
            let (i_omega, i_e) = analytic::intensity_omega(f2, angle);
            res = res.max((p.omega1[l] - i_omega).abs());
            res_e = res_e.max((p.e1[l] - i_e).abs());
        }
    }
    ctx.check("intensity_omega1", res, tol);
    ctx.check("intensity_e1", res_e, tol);

    // Independent photons: only the coincident cell of each row converts, so
    // I_omega1 = f0^2 (1 - dz f0^2 sin^2).
    let separable = SimConfig {
        input: InputKind::Separable,
        ..s.config.clone()
    };
    let traj_sep = propagator::run(&separable.initial_state()?, &separable.plan()?, 1)?;
    let mut res_sep = 0.0f64;
    for snap in &traj_sep.snapshots {
        let lat = snap.lattice();
        let n = steps_at(snap);
        let sin = Geometry::Ring.angle(s.config.kappa, lat.c(), 0.0, snap.t()).sin();
        let p = intensities(snap);
        for l in 0..lat.cells() {
            let f2 = retarded_pair(&env, l, n).norm();
            res_sep = res_sep.max((p.omega1[l] - f2 * (1.0 - lat.dz() * f2 * sin * sin)).abs());
        }
    }
    ctx.check("separable_discrete", res_sep, tol);
    ctx.emit_trajectory(&traj)
}

fn run_fig2(s: &Scenario, ctx: &mut Context) -> Result<()> {
    let tol = s.config.tolerances.analytic;
    let (env, traj) = run_config(s)?;
    let (_, e) = diagonal_residuals(&env, s.config.kappa, &traj);
    ctx.check("diag_e", e, tol);
    // generated pair lives on the diagonal only
    let mut stray = 0.0f64;
    let mut intensity = 0.0f64;
    for snap in &traj.snapshots {
        let lat = snap.lattice();
        let n = steps_at(snap);
        let sin = Geometry::Ring.angle(s.config.kappa, lat.c(), 0.0, snap.t()).sin();
        for ((l, lp), v) in snap.psi_e().indexed_iter() {
            if l != lp {
                stray = stray.max(v.norm());
            }
        }
        let p = intensities(snap);
        for l in 0..lat.cells() {
            let f2 = retarded_pair(&env, l, n).norm();
            intensity = intensity.max((p.e1[l] - lat.dz() * f2 * f2 * sin * sin).abs());
            intensity = intensity.max((p.e2[l] - p.e1[l]).abs());
        }
    }
    ctx.check("offdiag_e_zero", stray, tol);
    ctx.check("intensity_e", intensity, tol);
    ctx.emit_trajectory(&traj)
}

fn run_fig2d(s: &Scenario, ctx: &mut Context) -> Result<()> {
    let tol = s.config.tolerances.analytic;
    let cfg = &s.config;
    let lat = cfg.lattice()?;
    let steps = (analytic::cycle_time(cfg.kappa, lat.c()) / lat.cell_time()).round() as usize;
    let start = cfg.initial_state()?;
    let plan = propagator::StepPlan::new(lat, cfg.kappa, steps, cfg.medium()?)?;
    let tau = propagator::evolve(&start, &plan)?;
    let (diag, off) = sign_flip_metric(&tau, &start)?;
    ctx.check("diag_sign_flip", diag, tol);
    ctx.check("offdiag_unchanged", off, tol);
    ctx.check("e_returns_to_zero", tau.psi_e().iter().map(|v| v.norm()).fold(0.0, f64::max), tol);
    if let Some(p) = ctx.path("fig2d_grid_tau.csv") {
        io::write_grid(p, &tau)?;
    }
    if let Some(p) = ctx.path("fig2d.gp") {
        let files = PlotFiles {
            grid: Some("fig2d_grid_tau.csv"),
            ..PlotFiles::default()
        };
        io::write_gnuplot_script(p, "fig2d", &files)?;
    }
    Ok(())
}

fn run_xicondition(s: &Scenario, ctx: &mut Context) -> Result<()> {
    let tol = s.config.tolerances.mode_mixing;
    for (cells, center, width) in [(9usize, 4.0, 1.5), (45, 22.0, 4.0)] {
        let cfg = SimConfig {
            cells,
            kappa: PI / cells as f64,
            steps: cells,
            envelope: EnvelopeSpec::Gaussian { center, width },
            ..s.config.clone()
        };
        let start = cfg.initial_state()?;
        let end = propagator::evolve(&start, &cfg.plan()?)?;
        let xi0 = start.to_modes();
        let xi_tau = end.to_modes().comoving(steps_at(&end));
        ctx.check(&format!("m{cells}"), xicondition_residual(&xi0, &xi_tau), tol);
    }
    Ok(())
}

fn run_soliton(s: &Scenario, ctx: &mut Context) -> Result<()> {
    let tol = s.config.tolerances.analytic;
    let (env, traj) = run_config(s)?;
    let mut profile = 0.0f64;
    let mut complement = 0.0f64;
    for snap in &traj.snapshots {
        let lat = snap.lattice();
        let n = steps_at(snap);
        let angle = Geometry::Ring.angle(s.config.kappa, lat.c(), 0.0, snap.t());
        let scale = lat.dz().sqrt().recip();
        let phi = analytic::soliton_superposition(snap, angle);
        let rest = analytic::soliton_complement(snap, &vec![angle; lat.cells()]);
        for l in 0..lat.cells() {
            let expected = env.amplitudes()[lat.wrap_cell(l as i64 - n)] * scale;
            profile = profile.max((phi[l] - expected).norm());
            complement = complement.max(rest[l].norm());
        }
    }
    let cycles = traj.last().map_or(0.0, |l| l.t() / analytic::cycle_time(s.config.kappa, l.lattice().c()));
    ctx.band("cycles_covered", cycles, 3.0 - 1e-9, f64::INFINITY);
    ctx.check("profile_form_stable", profile, tol);
    ctx.check("complement_zero", complement, tol);
    ctx.emit_trajectory(&traj)
}

fn run_window_bvp(s: &Scenario, ctx: &mut Context) -> Result<()> {
    let tol = s.config.tolerances.analytic;
    let cfg = &s.config;
    let mask = cfg.medium()?;
    let (start, end) = mask
        .window_bounds()
        .ok_or_else(|| Error::InvalidParameter("window_bvp needs a window mask".into()))?;
    let (env, traj) = run_config(s)?;
    let lat = cfg.lattice()?;
    let geometry = Geometry::Medium {
        entrance: start as f64 * lat.dz(),
        length: (end - start) as f64 * lat.dz(),
    };
    // the boundary-value reading needs the pulse to start outside the medium
    let initial = traj.initial().expect("run keeps the initial state");
    let inside = (start..end).map(|l| initial.psi_omega()[[l, l]].norm()).fold(0.0, f64::max);
    ctx.check("starts_outside_medium", inside, 1e-20);
    let (mut omega, mut e) = (0.0f64, 0.0f64);
    let mut deepest = 0.0f64;
    let center = match cfg.envelope {
        EnvelopeSpec::Gaussian { center, .. } => center.round() as i64,
        EnvelopeSpec::Point { cell } => cell as i64,
    };
    let m = lat.cells() as i64;
    for snap in &traj.snapshots {
        let n = steps_at(snap);
        for l in 0..lat.cells() {
            // unwrapped start of the pair now in cell l, taken within half a
            // ring of the pulse centre; depth is measured at the far face
            let offset = (lat.wrap_cell(l as i64 - n) as i64 - center + m / 2).rem_euclid(m) - m / 2;
            let z = (center + offset + n + 1) as f64 * lat.dz();
            let angle = geometry.angle(cfg.kappa, lat.c(), z, snap.t());
            let f2 = retarded_pair(&env, l, n);
            omega = omega.max((snap.psi_omega()[[l, l]] - analytic::diag_psi_omega(f2, angle)).norm());
            e = e.max((snap.psi_e()[[l, l]] - analytic::diag_psi_e(f2, angle)).norm());
            if f2.norm() > 1e-3 {
                deepest = deepest.max(angle);
            }
        }
    }
    ctx.check("diag_omega_cos_depth", omega, tol);
    ctx.check("diag_e_sin_depth", e, tol);
    // the pulse must actually cross the window for the check to mean anything
    ctx.band("pulse_crossed_window", deepest, cfg.kappa * (end - start) as f64 * lat.dz(), f64::INFINITY);
    ctx.emit_trajectory(&traj)
}

fn run_fock_crosscheck(s: &Scenario, ctx: &mut Context) -> Result<()> {
    let tol = s.config.tolerances;
    let r = fock::crosscheck(&s.config)?;
    ctx.check("max_deviation", r.max_deviation, tol.fock_deviation);
    ctx.check("mixed_sector_leakage", r.max_leakage, tol.fock_leakage);
    ctx.check("lambda_identity", r.lambda_residual, tol.lambda_identity);
    ctx.check("invariant_transport", r.invariant_residual, tol.conservation);
    ctx.check("kinetic_is_shift", r.kinetic_shift_error, tol.fock_deviation);
    ctx.check("norm_drift", r.max_norm_drift, tol.conservation);
    // the diagonal entangled input exercises the coincident sector alone
    let diag = fock::crosscheck(&SimConfig {
        input: InputKind::Diagonal,
        ..s.config.clone()
    })?;
    ctx.check("diagonal_input_deviation", diag.max_deviation, tol.fock_deviation);
    ctx.check("diagonal_input_leakage", diag.max_leakage, tol.fock_leakage);
    Ok(())
}

fn run_conservation(s: &Scenario, ctx: &mut Context) -> Result<()> {
    let tol = s.config.tolerances.conservation;
    let cfg = &s.config;
    let mut tracker = ConservationTracker::new();
    let mut err = None;
    propagator::run_with(&cfg.initial_state()?, &cfg.plan()?, 1, |st| {
        if let Err(e) = tracker.push(st) {
            err.get_or_insert(e);
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let r = tracker.finish();
    ctx.check("norm_drift", r.norm_drift, tol);
    for (name, res) in crate::observables::INVARIANT_NAMES.iter().zip(r.residuals) {
        ctx.check(name, res, tol);
    }
    ctx.band("snapshots", r.snapshots as f64, (cfg.steps + 1) as f64, (cfg.steps + 1) as f64);
    Ok(())
}

/// L2 distance between the RK4 result at step `dt` and the propagator, one
/// full cycle.
pub fn mode_oracle_error(cfg: &SimConfig, dt: f64) -> Result<f64> {
    let lat = cfg.lattice()?;
    let steps = (analytic::cycle_time(cfg.kappa, lat.c()) / lat.cell_time()).round() as usize;
    let start = cfg.initial_state()?;
    let plan = propagator::StepPlan::new(lat, cfg.kappa, steps, cfg.medium()?)?;
    if !plan.mask.is_full() {
        return Err(Error::InvalidParameter("the mode-space oracle needs a full ring".into()));
    }
    let exact = propagator::evolve(&start, &plan)?;
    let system = ModeOdeSystem::new(lat, cfg.kappa, KineticConvention::PairSector);
    let out = system.integrate(&start.to_modes(), exact.t(), dt)?;
    Ok(out.modes.to_state().l2_distance(&exact))
}

fn run_mode_oracle(s: &Scenario, ctx: &mut Context) -> Result<()> {
    let cell_time = s.config.lattice()?.cell_time();
    let fine = mode_oracle_error(&s.config, cell_time / 100.0)?;
    let coarse = mode_oracle_error(&s.config, cell_time / 50.0)?;
    ctx.check("l2_dt_1_100", fine, s.config.tolerances.oracle_l2);
    ctx.band("halving_ratio", coarse / fine, 12.0, 20.0);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_contract() {
        let names = list_scenarios();
        for required in ["fig1", "fig2", "fig2d", "xicondition", "soliton", "window_bvp", "fock_crosscheck"] {
            assert!(names.contains(&required), "{required}");
        }
        assert!(matches!(run_scenario("fig9", None), Err(Error::UnknownScenario(n)) if n == "fig9"));
        assert!(matches!(Registry::new(vec![]).unwrap().run_all(None), Err(Error::EmptyRegistry)));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut v = standard_scenarios();
        let first = v.remove(0);
        let again = Scenario {
            name: first.name,
            summary: first.summary,
            config: first.config.clone(),
            artifacts: first.artifacts,
            runner: first.runner,
        };
        assert!(Registry::new(vec![first, again]).is_err());
    }

    #[test]
    fn check_semantics() {
        assert!(Check::new("a", 1e-13, 1e-12).passed);
        assert!(!Check::new("a", 1e-12, 1e-12).passed);
        assert!(!Check::new("a", f64::NAN, 1.0).passed);
        assert!(Check::within("r", 16.0, 12.0, 20.0).passed);
        assert!(!Check::within("r", 21.0, 12.0, 20.0).passed);
        assert!(!Check::within("r", f64::NAN, 12.0, 20.0).passed);
        let line = Check::new("x.y", 2e-16, 1e-12).to_string();
        assert!(line.starts_with("x.y") && line.contains("PASS"), "{line}");
    }

    #[test]
    fn report_aggregation() {
        let mut r = ValidationReport::default();
        assert!(!r.passed());
        r.checks.push(Check::new("a", 0.0, 1.0));
        assert!(r.passed());
        r.checks.push(Check::new("b", 2.0, 1.0));
        assert!(!r.passed());
        assert_eq!(r.failures().count(), 1);
        assert!(r.to_string().ends_with("FAIL: 2 checks, 1 failed"));
    }

    #[test]
    fn fig2d_passes() {
        let r = run_scenario("fig2d", None).unwrap();
        assert!(r.passed(), "{r}");
    }
}
