//! `microgrid` command-line front end.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use microgrid_ems::config::MicrogridConfig;
use microgrid_ems::dispatch::{self, SimulationError};
use microgrid_ems::electrical::{
    pll_lock_time, run_tracking_sim, second_order_overshoot, simulate_pll, step_metrics, tune_pi,
    FilterParams, GridParams, PllGains, PowerStep, TrackingConfig,
};
use microgrid_ems::profiles::{parse_scenario, Scenario};

#[derive(Parser)]
#[command(name = "microgrid", version, about = "Rule-based microgrid EMS simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the EMS over a scenario and write the trace and summary.
    Simulate(SimulateArgs),
    /// Check a scenario file and list every problem found.
    Validate(ValidateArgs),
    /// Tune the current controller and check the closed-loop response.
    ControllerCheck(ControllerArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// `key = value` overrides of the default configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Report::Both)]
    report: Report,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Report {
    Trace,
    Summary,
    Both,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long = "scenario", value_name = "PATH")]
    scenario_flag: Option<PathBuf>,
    #[arg(value_name = "SCENARIO", conflicts_with = "scenario_flag")]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct ControllerArgs {
    /// Damping ratio of the current loop.
    #[arg(long, default_value_t = 0.707)]
    xi: f64,
    /// Natural frequency of the current loop in rad/s.
    #[arg(long = "omega-n", default_value_t = 2.0 * std::f64::consts::PI * 300.0)]
    omega_n: f64,
    /// Filter inductance in H.
    #[arg(long, default_value_t = 0.007)]
    lf: f64,
    /// Filter resistance in ohm.
    #[arg(long, default_value_t = 0.1)]
    rf: f64,
    /// Integration step in s.
    #[arg(long, default_value_t = 20e-6)]
    dt: f64,
    /// Directory for `waveform.csv`.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Report threshold violations without failing.
    #[arg(long)]
    relaxed: bool,
}

/// A failed command: exit status 1 for bad input, 2 for I/O.
enum Failure {
    Invalid(String),
    Io(String),
}

impl Failure {
    fn io(path: &Path, err: std::io::Error) -> Self {
        Failure::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Validate(args) => cmd_validate(&args),
        Command::ControllerCheck(args) => cmd_controller_check(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{failure}");
            match failure {
                Failure::Invalid(_) => ExitCode::from(1),
                Failure::Io(_) => ExitCode::from(2),
            }
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

/// Prefixes every diagnostic line with the file it came from.
fn located(path: &Path, message: &str) -> String {
    message
        .lines()
        .map(|l| format!("{}: {l}", path.display()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = read(path)?;
    parse_scenario(&text).map_err(|e| Failure::Invalid(located(path, &e.to_string())))
}

fn load_config(path: Option<&Path>) -> Result<MicrogridConfig, Failure> {
    match path {
        None => Ok(MicrogridConfig::default()),
        Some(p) => {
            let text = read(p)?;
            MicrogridConfig::parse(&text).map_err(|e| Failure::Invalid(located(p, &e.to_string())))
        }
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let scenario = load_scenario(&args.scenario)?;
    let config = load_config(args.config.as_deref())?;
    let invalid = |e: SimulationError| Failure::Invalid(e.to_string());
    let trace = dispatch::simulate(&scenario, &config).map_err(invalid)?;
    let baseline = dispatch::baseline_bill(&scenario, &config).map_err(invalid)?;

    fs::create_dir_all(&args.out).map_err(|e| Failure::io(&args.out, e))?;
    if args.report != Report::Summary {
        write(&args.out.join("trace.csv"), &trace.to_csv())?;
    }
    if args.report != Report::Trace {
        write(&args.out.join("summary.txt"), &trace.summary(baseline))?;
    }

    println!("total bill:    {:.4}", trace.total_bill);
    println!("baseline bill: {baseline:.4}");
    for (mode, count) in trace.mode_counts() {
        println!("{mode}: {count}");
    }
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), Failure> {
    let Some(path) = args.scenario_flag.as_ref().or(args.scenario.as_ref()) else {
        return Err(Failure::Invalid("no scenario given".into()));
    };
    load_scenario(path)?;
    println!("OK");
    Ok(())
}

const RATED_POWER_W: f64 = 10_000.0;
const MAX_OVERSHOOT: f64 = 0.10;
const MAX_SETTLING_S: f64 = 6e-3;
const MAX_STEADY_ERROR: f64 = 1e-3;
const MAX_PLL_LOCK_S: f64 = 0.2;
const PLL_TOLERANCE: f64 = 0.5;
const MAX_Q_FRACTION: f64 = 0.01;

fn cmd_controller_check(args: &ControllerArgs) -> Result<(), Failure> {
    let filter = FilterParams {
        l_f: args.lf,
        r_f: args.rf,
    };
    let gains = tune_pi(&filter, args.xi, args.omega_n);
    let mut config = TrackingConfig::with_steps(vec![PowerStep {
        t_s: 0.0,
        p_w: RATED_POWER_W,
    }]);
    config.filter = filter;
    config.gains = gains;
    config.dt = args.dt;

    let trace = run_tracking_sim(&config).map_err(|e| Failure::Invalid(e.to_string()))?;
    let m = step_metrics(&trace.power_series(), 0.0, 0.0, RATED_POWER_W, 0.02);
    let q_peak = trace.samples.iter().map(|s| s.q_var.abs()).fold(0.0, f64::max);

    let grid = GridParams::default();
    let pll = PllGains::default();
    let pll_dt = args.dt.min(1e-4);
    let samples = simulate_pll(&pll, grid.v_d_nominal(), |_| grid.frequency_hz, 0.5, 0.5, pll_dt);
    let lock = pll_lock_time(&samples, grid.omega(), PLL_TOLERANCE);

    println!("kp = {:.4}", gains.kp);
    println!("ki = {:.1}", gains.ki);
    println!("overshoot = {:.2} %", 100.0 * m.overshoot);
    println!("overshoot (second order) = {:.2} %", 100.0 * second_order_overshoot(args.xi));
    println!("settling = {:.3} ms", 1e3 * m.settling_time);
    println!("steady_state_error = {:.4} %", 100.0 * m.steady_state_error);
    println!("q_peak = {q_peak:.1} var");
    match lock {
        Some(t) => println!("pll_lock = {:.4} s", t),
        None => println!("pll_lock = never"),
    }

    fs::create_dir_all(&args.out).map_err(|e| Failure::io(&args.out, e))?;
    write(&args.out.join("waveform.csv"), &trace.to_csv())?;

    let checks = [
        ("overshoot", m.overshoot <= MAX_OVERSHOOT),
        ("settling", m.settling_time <= MAX_SETTLING_S),
        ("steady_state_error", m.steady_state_error < MAX_STEADY_ERROR),
        ("reactive_power", q_peak <= MAX_Q_FRACTION * RATED_POWER_W),
        ("pll_lock", lock.is_some_and(|t| t <= MAX_PLL_LOCK_S)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    if failed.is_empty() {
        return Ok(());
    }
    let msg = format!("threshold failed: {}", failed.join(", "));
    if args.relaxed {
        eprintln!("{msg} (relaxed)");
        Ok(())
    } else {
        Err(Failure::Invalid(msg))
    }
}
