//! Command-line front end.
//!
//! Exit status: 0 on success, 2 on usage errors (diagnostic on stderr),
//! 1 on domain errors (JSON object on stderr).

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Error;
use crate::model::{gains_from_gamma, FotdPlant, PiGains};
use crate::simulator::{aligned_step, simulate, LoopForm, SimConfig, StepResponse};
use crate::tuner::{self, TunerOptions};
use crate::SCHEMA_VERSION;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (output schema ", "1", ")");

#[derive(Debug, Parser)]
#[command(name = "fotd-lambert", version = VERSION, about = "Lambert W PI tuning for FOTD plants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tune PI gains for a plant and report the simulated response.
    Tune(TuneArgs),
    /// Simulate the closed-loop step response.
    Simulate(SimulateArgs),
    /// Overshoot and settling time over a gamma grid.
    Sweep(SweepArgs),
    /// CHR rules against the Lambert W tunings.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Form {
    General,
    Reduced,
}

#[derive(Debug, Args)]
struct PlantArgs {
    /// Process gain K
    #[arg(short = 'K', allow_negative_numbers = true)]
    k: f64,
    /// Time constant T (seconds)
    #[arg(short = 'T', allow_negative_numbers = true)]
    t: f64,
    /// Dead time L (seconds)
    #[arg(short = 'L', allow_negative_numbers = true)]
    l: f64,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; stdout when omitted
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Settling band in percent
    #[arg(long, default_value_t = 2.0)]
    band: f64,
    /// Minimum simulation horizon in dead times
    #[arg(long, default_value_t = 40.0)]
    horizon: f64,
    /// Integration step in seconds (snapped to divide L)
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["no_overshoot", "overshoot"]))]
struct TuneArgs {
    #[command(flatten)]
    plant: PlantArgs,
    /// Critically damped tuning (gamma = 1)
    #[arg(long)]
    no_overshoot: bool,
    /// Target peak overshoot in percent
    #[arg(long, allow_negative_numbers = true)]
    overshoot: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("controller").required(true).args(["gamma", "kp"]))]
struct SimulateArgs {
    #[command(flatten)]
    plant: PlantArgs,
    /// Tune with this gamma = K ki e L
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, requires = "ki", allow_negative_numbers = true)]
    kp: Option<f64>,
    #[arg(long, requires = "kp", allow_negative_numbers = true)]
    ki: Option<f64>,
    #[arg(long, value_enum, default_value_t = Form::General)]
    form: Form,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 0.1)]
    gamma_min: f64,
    #[arg(long, default_value_t = 2.0)]
    gamma_max: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    plant: PlantArgs,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    sim: SimArgs,
}

enum Failure {
    Usage(String),
    Domain(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    message: String,
}

/// Runs the CLI with the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut io::stdout().lock(), &mut io::stderr().lock())
}

pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return e.exit_code();
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            let body = ErrorJson {
                error: e.kind(),
                message: e.to_string(),
            };
            let _ = writeln!(
                stderr,
                "{}",
                serde_json::to_string(&body).expect("error serializes")
            );
            1
        }
        // a closed downstream pipe (`| head`) is not an error
        Err(Failure::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => 0,
        Err(Failure::Io(e)) => {
            let body = ErrorJson {
                error: "io",
                message: e.to_string(),
            };
            let _ = writeln!(
                stderr,
                "{}",
                serde_json::to_string(&body).expect("error serializes")
            );
            1
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Tune(args) => tune(args, stdout),
        Command::Simulate(args) => simulate_cmd(args, stdout),
        Command::Sweep(args) => sweep_cmd(args, stdout),
        Command::Compare(args) => compare(args, stdout),
    }
}

fn plant_of(args: &PlantArgs) -> Result<FotdPlant, Failure> {
    for (name, v) in [("-K", args.k), ("-T", args.t), ("-L", args.l)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Failure::Usage(format!(
                "{name} must be a positive number, got {v}"
            )));
        }
    }
    FotdPlant::new(args.k, args.t, args.l).map_err(|e| Failure::Usage(e.to_string()))
}

fn check_sim(args: &SimArgs) -> Result<(), Failure> {
    if !(args.band > 0.0) {
        return Err(Failure::Usage(format!(
            "--band must be positive, got {}",
            args.band
        )));
    }
    if !(args.horizon >= 10.0) {
        return Err(Failure::Usage(format!(
            "--horizon must be at least 10 dead times, got {}",
            args.horizon
        )));
    }
    if let Some(dt) = args.dt {
        if !(dt > 0.0) {
            return Err(Failure::Usage(format!("--dt must be positive, got {dt}")));
        }
    }
    Ok(())
}

/// `reference` is the length the default step count divides.
fn options(args: &SimArgs, reference: f64) -> TunerOptions {
    let mut opts = TunerOptions {
        band_pct: args.band,
        horizon_delays: args.horizon,
        ..TunerOptions::default()
    };
    if let Some(dt) = args.dt {
        opts.steps_per_delay = reference / dt;
    }
    opts
}

fn emit(out: &OutputArgs, body: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match &out.output {
        Some(path) => fs::write(path, body)?,
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn tune(args: TuneArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let plant = plant_of(&args.plant)?;
    check_sim(&args.sim)?;
    if args.out.format == Some(Format::Csv) {
        return Err(Failure::Usage("tune reports are JSON only".into()));
    }
    let opts = options(&args.sim, plant.time_constant().min(plant.delay()));
    let report = match args.overshoot {
        Some(pct) => tuner::tune_target_overshoot_with(&plant, pct, &opts)?,
        None => tuner::tune_no_overshoot_with(&plant, &opts)?,
    };
    emit(&args.out, &to_json(&report), stdout)
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    schema_version: &'a str,
    t: &'a [f64],
    y: &'a [f64],
    u: &'a [f64],
}

fn simulate_cmd(args: SimulateArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let plant = plant_of(&args.plant)?;
    check_sim(&args.sim)?;
    let gains = match (args.gamma, args.kp, args.ki) {
        (Some(g), _, _) => gains_from_gamma(&plant, g)?,
        (None, Some(kp), Some(ki)) => PiGains::new(kp, ki)?,
        _ => {
            return Err(Failure::Usage(
                "either --gamma or both --kp and --ki are required".into(),
            ))
        }
    };
    let l = plant.delay();
    let mut cfg = SimConfig::for_plant(&plant).with_horizon(args.sim.horizon * l);
    if let Some(dt) = args.sim.dt {
        cfg = cfg.with_step(aligned_step(l, dt));
    }
    cfg = cfg.with_form(match args.form {
        Form::General => LoopForm::General,
        Form::Reduced => LoopForm::Reduced,
    });
    let resp: StepResponse = simulate(&plant, &gains, &cfg)?;
    let body = match args.out.format.unwrap_or(Format::Csv) {
        Format::Csv => resp.to_csv_string(),
        Format::Json => to_json(&TrajectoryJson {
            schema_version: SCHEMA_VERSION,
            t: &resp.times,
            y: &resp.output_y,
            u: &resp.control_u,
        }),
    };
    emit(&args.out, &body, stdout)
}

fn sweep_cmd(args: SweepArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    check_sim(&args.sim)?;
    if !(args.gamma_min > 0.0 && args.gamma_max > args.gamma_min && args.step > 0.0) {
        return Err(Failure::Usage(format!(
            "need 0 < --gamma-min < --gamma-max and --step > 0, got {} {} {}",
            args.gamma_min, args.gamma_max, args.step
        )));
    }
    let opts = options(&args.sim, 1.0);
    let rows = tuner::sweep_with(args.gamma_min, args.gamma_max, args.step, &opts)?;
    let body = match args.out.format.unwrap_or(Format::Csv) {
        Format::Csv => tuner::sweep_to_csv(&rows),
        Format::Json => to_json(&rows),
    };
    emit(&args.out, &body, stdout)
}

fn compare(args: CompareArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let plant = plant_of(&args.plant)?;
    check_sim(&args.sim)?;
    let opts = options(&args.sim, plant.time_constant().min(plant.delay()));
    let table = tuner::chr_compare_with(&plant, &opts)?;
    let body = match args.out.format {
        None => table.to_string(),
        Some(Format::Json) => to_json(&table),
        Some(Format::Csv) => {
            let mut s = String::from(
                "method,target,kp_coeff,ki_coeff,gamma,kp,ki,overshoot_pct,settling_time\n",
            );
            for r in &table.rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.method,
                    r.target,
                    r.kp_coeff,
                    r.ki_coeff,
                    r.gamma,
                    r.gains.kp,
                    r.gains.ki,
                    r.metrics.overshoot_pct,
                    r.metrics
                        .settling_time
                        .map_or(String::new(), |t| t.to_string())
                ));
            }
            s
        }
    };
    emit(&args.out, &body, stdout)
}
