//! Command-line verbs of `uttg`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use teleop_otg_core::harness::{compare_baseline, ActuatorMode, ActuatorModel};
use teleop_otg_core::robot::{generate_config, RobotConfig};
use teleop_otg_core::servo::{run_servo, RunOptions, ServoMode, ServoRun, ServoSettings};
use teleop_otg_core::TimedWaypoint;

use crate::config::{load_config, save_config, scale_acceleration, ConfigFile};
use crate::csvio::{load_waypoints, save, write_commands};
use crate::error::{BridgeError, Result};
use crate::report::Report;
use crate::server::{Server, ServerOptions, DEFAULT_UI_RATE_HZ};
use crate::urdf::load_urdf;

#[derive(Debug, Parser)]
#[command(name = "uttg", version, about = "Teleoperation trajectory generation: config, servo, compare, serve")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Generate a config JSON from a URDF.
    GenConfig(GenConfigArgs),
    /// Turn a waypoint CSV into a command CSV on the simulated clock.
    Servo(ServoArgs),
    /// Compare against a zero-order-hold baseline and write a JSON report.
    Compare(CompareArgs),
    /// Run the live WebSocket service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenConfigArgs {
    pub urdf: PathBuf,
    /// Base link; the URDF root by default.
    #[arg(long)]
    pub base: Option<String>,
    /// Tip link; the only leaf by default.
    #[arg(long)]
    pub tip: Option<String>,
    /// Config JSON to write.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub accel_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Precise,
    Rapid,
}

impl From<ModeArg> for ServoMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Precise => ServoMode::Precise,
            ModeArg::Rapid => ServoMode::Rapid,
        }
    }
}

/// Engine tuning shared by the servo verbs.
#[derive(Debug, Clone, Args)]
pub struct Tuning {
    #[arg(long, value_enum, default_value_t = ModeArg::Precise)]
    pub mode: ModeArg,
    /// Smoothing weight of the selected mode (0.999 precise, 0.9 rapid by default).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Assistant-point split ratio, in (0, 1).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Command rate in Hz.
    #[arg(long)]
    pub output_rate: Option<f64>,
    /// Replanning period in seconds.
    #[arg(long)]
    pub servo_dt: Option<f64>,
    /// Input filter cutoff in Hz; 0 disables the filter.
    #[arg(long)]
    pub filter_cutoff: Option<f64>,
    /// Smallest max-norm change, in rad, forwarded by the filter.
    #[arg(long)]
    pub deadband: Option<f64>,
    /// Multiplies the configured acceleration limits.
    #[arg(long)]
    pub accel_scale: Option<f64>,
}

impl Tuning {
    pub fn settings(&self) -> Result<ServoSettings> {
        let mut s = ServoSettings::for_mode(self.mode.into());
        if let Some(mu) = self.mu {
            s.set_mu(mu);
        }
        if let Some(b) = self.beta {
            s.beta = b;
        }
        if let Some(rate) = self.output_rate {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(BridgeError::Config(format!("output rate must be positive, got {rate}")));
            }
            s.dt_output = 1.0 / rate;
        }
        if let Some(dt) = self.servo_dt {
            s.dt_servo = dt;
        }
        match self.filter_cutoff {
            Some(0.0) => s.filter.enabled = false,
            Some(fc) => s.filter.cutoff_hz = fc,
            None => {}
        }
        if let Some(d) = self.deadband {
            s.filter.deadband = d;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load_config(&self, path: &Path) -> Result<RobotConfig> {
        let mut config = load_config(path)?;
        if let Some(scale) = self.accel_scale {
            scale_acceleration(&mut config, scale)?;
        }
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct ServoArgs {
    /// Config JSON from gen-config.
    #[arg(long)]
    pub config: PathBuf,
    /// Waypoint CSV: t,q_0,...,q_{n-1}.
    #[arg(long)]
    pub input: PathBuf,
    /// Command CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub tuning: Tuning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActuatorArg {
    Perfect,
    Lag,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Report JSON to write.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value_t = ActuatorArg::Perfect)]
    pub actuator: ActuatorArg,
    /// Time constant of the lag actuator in seconds.
    #[arg(long, default_value_t = 0.03)]
    pub tau: f64,
    #[command(flatten)]
    pub tuning: Tuning,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    /// State broadcast rate in Hz.
    #[arg(long, default_value_t = DEFAULT_UI_RATE_HZ)]
    pub ui_rate: f64,
    #[command(flatten)]
    pub tuning: Tuning,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Verb::GenConfig(a) => gen_config(&a, out),
        Verb::Servo(a) => servo(&a, out).map(|_| ()),
        Verb::Compare(a) => compare(&a, out).map(|_| ()),
        Verb::Serve(a) => serve(&a, out),
    }
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| BridgeError::io("stdout", e))
}

pub fn gen_config(a: &GenConfigArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_urdf(&a.urdf)?;
    let (root, leaf) = match (&a.base, &a.tip) {
        (Some(b), Some(t)) => (b.clone(), t.clone()),
        _ => {
            let (b, t) = model.default_chain()?;
            (a.base.clone().unwrap_or(b), a.tip.clone().unwrap_or(t))
        }
    };
    let config = generate_config(&model, &root, &leaf, a.accel_scale)?;
    save_config(&config, &a.output)?;
    let file = ConfigFile::from_config(&config);
    say(out, format_args!("robot {}: dof {} ({} -> {})", config.robot_name, config.dof(), root, leaf))?;
    for j in file.joints.iter().filter(|j| j.velocity_limit.is_some()) {
        let [lo, hi] = j.position_limits.unwrap_or([None, None]);
        let bound = |x: Option<f64>, inf: &str| x.map_or(inf.to_string(), |v| format!("{v}"));
        say(
            out,
            format_args!(
                "  {:<16} [{}, {}]  v {}  a {}",
                j.name,
                bound(lo, "-inf"),
                bound(hi, "inf"),
                j.velocity_limit.unwrap_or_default(),
                j.acceleration_limit.unwrap_or_default()
            ),
        )?;
    }
    say(out, format_args!("wrote {}", a.output.display()))
}

fn load_inputs(path: &Path, config: &RobotConfig) -> Result<Vec<TimedWaypoint>> {
    let inputs = load_waypoints(path)?;
    if let Some(w) = inputs.first() {
        if w.q.len() != config.dof() {
            return Err(BridgeError::DofMismatch { expected: config.dof(), found: w.q.len() });
        }
    }
    Ok(inputs)
}

pub fn servo(a: &ServoArgs, out: &mut dyn Write) -> Result<ServoRun> {
    let config = a.tuning.load_config(&a.config)?;
    let settings = a.tuning.settings()?;
    let inputs = load_inputs(&a.input, &config)?;
    let run = run_servo(&inputs, &config, &settings, &RunOptions::default())?;
    save(&a.output, |w| write_commands(w, &run.commands, config.dof()))?;
    let d = &run.diagnostics;
    info!("{} inputs, {} commands", inputs.len(), run.commands.len());
    say(out, format_args!("mode {}: {} commands at {} Hz", settings.mode.as_str(), run.commands.len(), 1.0 / settings.dt_output))?;
    say(out, format_args!("replans {}  knots {}  dilations {}", d.replans, d.plan_knots, d.dilations))?;
    say(out, format_args!("max |v| {:?}", d.max_velocity))?;
    say(out, format_args!("max |a| {:?}", d.max_acceleration))?;
    say(
        out,
        format_args!(
            "waypoints dropped {} (skipped {}, stale {}, overflow {})",
            d.dropped_inputs(),
            d.skipped_waypoints,
            d.stale_inputs,
            d.overflow_drops
        ),
    )?;
    if let Some(e) = d.errors.first() {
        say(out, format_args!("planner fault, held position: {e}"))?;
    }
    Ok(run)
}

pub fn compare(a: &CompareArgs, out: &mut dyn Write) -> Result<Report> {
    let config = a.tuning.load_config(&a.config)?;
    let settings = a.tuning.settings()?;
    let inputs = load_inputs(&a.input, &config)?;
    let model = ActuatorModel {
        mode: match a.actuator {
            ActuatorArg::Perfect => ActuatorMode::Perfect,
            ActuatorArg::Lag => ActuatorMode::FirstOrderLag { time_constant: a.tau },
        },
        rate_hz: 1.0 / settings.dt_output,
    };
    let cmp = compare_baseline(&inputs, &config, &settings, &model)?;
    let report = Report::new(settings.mode, &cmp);
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&a.report, text).map_err(|e| BridgeError::io(a.report.display().to_string(), e))?;
    match report.reduction_percent.percent() {
        Some(p) => say(out, format_args!("MAV reduction {p:.1}% over {} commands", report.commands))?,
        None => say(out, format_args!("MAV reduction not applicable (baseline is still)"))?,
    }
    say(out, format_args!("wrote {}", a.report.display()))?;
    Ok(report)
}

pub fn serve(a: &ServeArgs, out: &mut dyn Write) -> Result<()> {
    let config = a.tuning.load_config(&a.config)?;
    let options = ServerOptions { settings: a.tuning.settings()?, ui_rate_hz: a.ui_rate, ..ServerOptions::default() };
    let server = Server::bind((a.host.as_str(), a.port), config, options)?;
    say(out, format_args!("serving on ws://{}", server.local_addr()?))?;
    server.run()
}
