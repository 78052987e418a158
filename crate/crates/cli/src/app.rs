//! Argument parsing and subcommand dispatch.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use epde_core::{gauss_jacobi_grid, ml};

use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::experiment::{
    region_spec, run_convergence, run_mconvergence, run_region, run_solve, ConvergeConfig, MConvergeConfig, SolveConfig,
};
use crate::report::{self, num};

#[derive(Debug, Parser)]
#[command(name = "epde", version, about = "Caputo fractional ODEs by theta collocation and BDF-k")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// March one problem and write its trajectory.
    Solve(Flags),
    /// Endpoint errors over a sequence of halved steps.
    Converge(Flags),
    /// Errors over a list of collocation sizes at a fixed step.
    Mconverge(Flags),
    /// Spectral radius of the amplification operator over a grid of σ = -Δtλ.
    Region(Flags),
    /// Evaluate the Mittag-Leffler function E_α(z).
    Ml(Flags),
    /// Write the collocation nodes and weights.
    GridDump(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Converge(_) => "converge",
            Command::Mconverge(_) => "mconverge",
            Command::Region(_) => "region",
            Command::Ml(_) => "ml",
            Command::GridDump(_) => "grid-dump",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Solve(f)
            | Command::Converge(f)
            | Command::Mconverge(f)
            | Command::Region(f)
            | Command::Ml(f)
            | Command::GridDump(f) => f,
        }
    }
}

/// Every setting can also come from `--config`; flags take precedence.
/// Lists are comma separated and steps may be written as ratios (`1/40`).
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// key = value file read before the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (standard output when absent)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Built-in problem: I, II, III, IV or V
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    /// Initial value of an inline problem
    #[arg(long, allow_hyphen_values = true)]
    pub phi0: Option<String>,
    /// Horizon
    #[arg(long = "T", visible_alias = "horizon")]
    pub horizon: Option<String>,
    /// Forcing of an inline problem: zero, sin, cos, const:<c>, power:<p>
    #[arg(long)]
    pub forcing: Option<String>,
    /// BDF order
    #[arg(long)]
    pub k: Option<String>,
    /// Highest collocation index (the grid has M+1 nodes); a list for mconverge
    #[arg(long = "M")]
    pub m: Option<String>,
    /// Step count or list of step counts
    #[arg(long = "N")]
    pub n: Option<String>,
    /// Step size or list of step sizes
    #[arg(long)]
    pub dt: Option<String>,
    /// auto, cascade, refined:<R>, exact or collocated
    #[arg(long)]
    pub startup: Option<String>,
    /// Measure errors against a run at dt_min/16 with M+10
    #[arg(long)]
    pub self_reference: bool,
    /// endpoint or max
    #[arg(long)]
    pub norm: Option<String>,
    /// Also write the collocation states to this file
    #[arg(long)]
    pub states: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_max: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub y_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub y_max: Option<String>,
    #[arg(long)]
    pub nx: Option<String>,
    #[arg(long)]
    pub ny: Option<String>,
    /// reduced or companion
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
}

impl Flags {
    pub fn settings(&self) -> Settings {
        let mut s = Settings::new();
        let text = [
            ("case", &self.case),
            ("alpha", &self.alpha),
            ("lambda", &self.lambda),
            ("phi0", &self.phi0),
            ("horizon", &self.horizon),
            ("forcing", &self.forcing),
            ("k", &self.k),
            ("m", &self.m),
            ("n", &self.n),
            ("dt", &self.dt),
            ("startup", &self.startup),
            ("norm", &self.norm),
            ("x-min", &self.x_min),
            ("x-max", &self.x_max),
            ("y-min", &self.y_min),
            ("y-max", &self.y_max),
            ("nx", &self.nx),
            ("ny", &self.ny),
            ("method", &self.method),
            ("z", &self.z),
        ];
        for (key, value) in text {
            if let Some(v) = value {
                s.set(key, v.as_str());
            }
        }
        for (key, path) in [("output", &self.output), ("states", &self.states)] {
            if let Some(p) = path {
                s.set(key, p.display().to_string());
            }
        }
        if self.self_reference {
            s.set("self-reference", "true");
        }
        s
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &str, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn io_err(source: std::io::Error) -> CliError {
    CliError::Io {
        path: "<stdout>".into(),
        source,
    }
}

/// Writes `body` to the configured output or to `out`. With a file output
/// the trailing `#` summary line is echoed to `out`.
fn emit(settings: &Settings, body: &str, out: &mut dyn Write) -> Result<()> {
    match settings.get("output") {
        Some(path) => {
            write_file(path, body)?;
            if let Some(summary) = body.lines().last().filter(|l| l.starts_with('#')) {
                writeln!(out, "{summary}").map_err(io_err)?;
            }
            Ok(())
        }
        None => out.write_all(body.as_bytes()).map_err(io_err),
    }
}

/// Merged settings for `command`: the config file first, then the flags.
pub fn settings_for(command: &Command) -> Result<Settings> {
    let flags = command.flags();
    let mut settings = match &flags.config {
        Some(path) => Settings::parse(&read(path)?)?,
        None => Settings::new(),
    };
    settings.merge(flags.settings());
    Ok(settings)
}

/// Runs one command. Data goes to `out`; run summaries that are not part of
/// a deterministic file go to `diag`.
pub fn run(cli: &Cli, out: &mut dyn Write, diag: &mut dyn Write) -> Result<()> {
    let settings = settings_for(&cli.command)?;
    execute(cli.command.name(), &settings, out, diag)
}

pub fn execute(command: &str, settings: &Settings, out: &mut dyn Write, diag: &mut dyn Write) -> Result<()> {
    let head = report::provenance(command, settings);
    match command {
        "solve" => {
            let cfg = SolveConfig::from_settings(settings)?;
            let run = run_solve(&cfg)?;
            emit(settings, &report::trajectory_csv(&head, &run.trajectory), out)?;
            if let Some(path) = settings.get("states") {
                write_file(path, &report::states_csv(&head, &run.trajectory))?;
            }
            let summary: &mut dyn Write = if settings.contains("output") { out } else { diag };
            let traj = &run.trajectory;
            let mut lines = vec![format!("final_phi={}", num(traj.final_phi()))];
            if let Some(exact) = run.exact_final {
                lines.push(format!("exact={}", num(exact)));
                lines.push(format!("error={}", num((traj.final_phi() - exact).abs())));
            }
            lines.push(format!("wall_time_s={:.6}", run.elapsed.as_secs_f64()));
            lines.push(format!("peak_state_len={}", traj.stats.peak_state_len));
            lines.push(format!("factorization={}", traj.stats.factorization));
            if traj.stats.picard_iterations_total > 0 {
                lines.push(format!("picard_iterations_max={}", traj.stats.picard_iterations_max));
            }
            for line in lines {
                writeln!(summary, "# {line}").map_err(io_err)?;
            }
            Ok(())
        }
        "converge" => {
            let table = run_convergence(&ConvergeConfig::from_settings(settings)?)?;
            emit(settings, &report::convergence_csv(&head, &table), out)
        }
        "mconverge" => {
            let table = run_mconvergence(&MConvergeConfig::from_settings(settings)?)?;
            emit(settings, &report::mconvergence_csv(&head, &table), out)
        }
        "region" => {
            let field = run_region(&region_spec(settings)?)?;
            emit(settings, &report::region_csv(&head, &field), out)
        }
        "ml" => {
            settings.check_allowed("ml", &["alpha", "z"])?;
            let alpha = settings.real("alpha")?.ok_or_else(|| CliError::field("alpha", "required"))?;
            let z = settings.real("z")?.ok_or_else(|| CliError::field("z", "required"))?;
            let value = ml(alpha, z)?;
            writeln!(out, "{}", num(value)).map_err(io_err)
        }
        "grid-dump" => {
            settings.check_allowed("grid-dump", &["alpha", "m"])?;
            let alpha = settings.real("alpha")?.ok_or_else(|| CliError::field("alpha", "required"))?;
            let m = settings.parsed("m")?.unwrap_or(30);
            emit(settings, &report::grid_csv(&head, &gauss_jacobi_grid(m, alpha)?), out)
        }
        other => Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
}
