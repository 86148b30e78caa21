//! The `strobosq` command line.
//!
//! Every subcommand reads an optional `key = value` file (`--config`) and
//! any number of `--set key=value` overrides. Precedence, lowest first:
//! the file, the `STROBO_SEED` environment variable (seed only), `--set`.
//!
//! Exit codes: 0 success, 1 a validation check or fit failed, 2 bad
//! configuration or any other error.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::analytic::{
    light_spectrum, sideband_squeezing, spin_variance, to_db, wineland_factor, FitModel, LightSpectrumInputs,
    SidebandAxis, SpinSqueezingInputs, SHOT_NOISE,
};
use crate::config::KeyValues;
use crate::dynamics::{
    ensemble_variance_with, final_moments, trajectory_seed, GaussianSpinState, NoiseMode, SimulationOptions, Simulator,
    TimeGrid, MIN_SAMPLES_PER_LARMOR,
};
use crate::error::{Error, Result};
use crate::fitlab::{fit, FitProblem, FitResult};
use crate::params::{a_coefficients, derive_couplings, InteractionRates, PhysicalParams};
use crate::spectral::{
    estimate_spectrum, headline_squeezing, shot_noise_reference, sideband_frequency_grid, simulate_spectrum,
    squeezing_ratio, HEADLINE_WINDOW,
};
use crate::strobe::{default_n_max, StroboConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "STROBO_SEED";

#[derive(Debug, Parser)]
#[command(name = "strobosq", version, about = "Stroboscopic spin and light squeezing")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interaction coefficients a0, a1, a2 and zeta^2 over a detuning sweep.
    Coeffs(CommonArgs),
    /// Spin squeezing along a time, duty, angle or detuning sweep.
    Spin(CommonArgs),
    /// Output-light spectrum, or sideband squeezing over duty or order.
    Spectrum(CommonArgs),
    /// Runs the invariant checks and reports each one.
    Validate(CommonArgs),
    /// Fits a model family to x,y[,weight] CSV data.
    Fit(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Parses `args` and runs the command, writing results to `out` (or the
/// configured `output` file) and diagnostics to `err`. Returns the exit
/// code.
pub fn run<I, T>(args: I, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker pool: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut out_buf = Vec::new();
    let mut err_buf = Vec::new();
    let result = pool.install(|| dispatch(&cli.command, env_seed, &mut out_buf, &mut err_buf));
    let _ = out.write_all(&out_buf);
    let _ = err.write_all(&err_buf);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_CONFIG
        }
    }
}

fn dispatch(cmd: &Command, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let (args, kind) = match cmd {
        Command::Coeffs(a) => (a, Kind::Coeffs),
        Command::Spin(a) => (a, Kind::Spin),
        Command::Spectrum(a) => (a, Kind::Spectrum),
        Command::Validate(a) => (a, Kind::Validate),
        Command::Fit(a) => (a, Kind::Fit),
    };
    let kv = layered_config(args, env_seed)?;
    let cfg = RunConfig::from_key_values(&kv, args.config.as_deref())?;
    let mut buf = Vec::new();
    let code = match kind {
        Kind::Coeffs => cmd_coeffs(&cfg, &mut buf, err)?,
        Kind::Spin => cmd_spin(&cfg, &mut buf)?,
        Kind::Spectrum => cmd_spectrum(&cfg, &mut buf, err)?,
        Kind::Validate => cmd_validate(&cfg, &mut buf)?,
        Kind::Fit => cmd_fit(&cfg, &mut buf, err)?,
    };
    match &cfg.output {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
            f.write_all(&buf)
                .and_then(|_| f.flush())
                .map_err(|e| Error::io(path, e))?;
        }
        None => out.write_all(&buf).map_err(|e| Error::io("<stdout>", e))?,
    }
    Ok(code)
}

#[derive(Clone, Copy)]
enum Kind {
    Coeffs,
    Spin,
    Spectrum,
    Validate,
    Fit,
}

/// File, then `STROBO_SEED`, then `--set`.
pub fn layered_config(args: &CommonArgs, env_seed: Option<&str>) -> Result<KeyValues> {
    let mut kv = match &args.config {
        Some(p) => KeyValues::from_file(p)?,
        None => KeyValues::new(),
    };
    if let Some(seed) = env_seed {
        kv.set("seed", seed.trim(), SEED_ENV);
    }
    for s in &args.set {
        let (k, v) = KeyValues::parse_override(s)?;
        kv.set(&k, &v, "--set");
    }
    Ok(kv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Analytic,
    Moments,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Time,
    Duty,
    Angle,
    Detuning,
    SidebandIndex,
}

impl Axis {
    fn name(&self) -> &'static str {
        match self {
            Axis::Time => "time",
            Axis::Duty => "duty",
            Axis::Angle => "angle",
            Axis::Detuning => "detuning",
            Axis::SidebandIndex => "sideband_index",
        }
    }
}

/// Where the couplings come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Physics {
    /// Dimensioned parameters; `gamma` and `epsilon` follow from the duty
    /// cycle.
    Physical(PhysicalParams),
    /// `gamma` and `epsilon` given directly and held fixed when the duty
    /// cycle changes.
    Reduced {
        zeta2: f64,
        epsilon: f64,
        gamma_total: f64,
        larmor: f64,
        t1: Option<f64>,
    },
}

/// Couplings at one duty cycle.
#[derive(Debug, Clone, Copy)]
pub struct Operating {
    pub rates: InteractionRates,
    pub gamma_total: f64,
    pub epsilon: f64,
    pub zeta2: f64,
    pub t1: Option<f64>,
}

impl Physics {
    pub fn larmor(&self) -> f64 {
        match self {
            Physics::Physical(p) => p.larmor,
            Physics::Reduced { larmor, .. } => *larmor,
        }
    }

    pub fn at(&self, duty: f64) -> Result<Operating> {
        match self {
            Physics::Physical(p) => {
                let c = derive_couplings(p, duty)?;
                Ok(Operating {
                    rates: InteractionRates::from_couplings(&c, p),
                    gamma_total: c.gamma_total,
                    epsilon: c.epsilon,
                    zeta2: c.zeta2,
                    t1: Some(p.t1),
                })
            }
            &Physics::Reduced {
                zeta2,
                epsilon,
                gamma_total,
                larmor,
                t1,
            } => {
                let rates = InteractionRates::from_reduced(zeta2, gamma_total, epsilon, duty, larmor)?;
                Ok(Operating {
                    rates,
                    gamma_total,
                    epsilon,
                    zeta2,
                    t1,
                })
            }
        }
    }

    fn with_detuning_hz(&self, hz: f64) -> Result<Physics> {
        match self {
            Physics::Physical(p) => {
                let mut p = *p;
                p.detuning = 2.0 * PI * hz;
                Ok(Physics::Physical(p))
            }
            Physics::Reduced { .. } => Err(Error::config(
                "axis",
                "the detuning axis needs physical parameters (`params = <file>`)",
            )),
        }
    }
}

/// Everything a subcommand may need, parsed and checked up front.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub physics: Physics,
    pub duty: f64,
    /// Window-center offset (rad of the stroboscopic cycle).
    pub phase: f64,
    pub n_max: Option<usize>,
    pub samples_per_period: Option<usize>,
    /// Interaction time (s).
    pub time: f64,
    /// Quadrature angle (rad).
    pub angle: f64,
    pub axis: Option<Axis>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: usize,
    pub engine: Engine,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub trajectories: usize,
    pub initial_scale: f64,
    pub sidebands: Vec<u32>,
    /// Reference-fit exclusion half-width in units of `gamma`.
    pub exclusion: f64,
    pub input: Option<PathBuf>,
    pub model: Option<String>,
    pub initial: Option<Vec<f64>>,
    pub tol: f64,
    pub max_iter: usize,
    pub order: u32,
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "params",
        "zeta2",
        "epsilon",
        "gamma_total",
        "larmor_hz",
        "t1",
        "duty",
        "phase",
        "n_max",
        "samples_per_period",
        "time",
        "gamma_t",
        "angle",
        "axis",
        "start",
        "stop",
        "points",
        "engine",
        "output",
        "seed",
        "trajectories",
        "initial_scale",
        "sidebands",
        "exclusion",
        "input",
        "model",
        "initial",
        "tol",
        "max_iter",
        "order",
    ];

    /// Reads a layered table. Relative paths in a config file resolve
    /// against the file's directory.
    pub fn from_key_values(kv: &KeyValues, config_path: Option<&Path>) -> Result<Self> {
        kv.reject_unknown(Self::KEYS)?;
        let base = config_path.and_then(Path::parent).map(Path::to_path_buf);
        let path_of = |key: &str| -> Option<PathBuf> {
            let raw = PathBuf::from(kv.get_str(key)?);
            let from_file = kv.location(key).is_some_and(|l| l != "--set");
            match (&base, raw.is_relative() && from_file) {
                (Some(b), true) => Some(b.join(raw)),
                _ => Some(raw),
            }
        };
        let loc = |key: &str| kv.location(key).unwrap_or(key).to_string();

        let reduced_keys = ["zeta2", "epsilon", "gamma_total", "larmor_hz"];
        let physics = if let Some(p) = path_of("params") {
            if let Some(k) = reduced_keys.iter().find(|k| kv.contains(k)) {
                return Err(Error::config(loc(k), format!("`{k}` cannot be combined with `params`")));
            }
            let mut params = PhysicalParams::from_file(&p)?;
            if let Some(t1) = kv.get_f64("t1")? {
                params.t1 = t1;
            }
            Physics::Physical(params)
        } else {
            let larmor = 2.0 * PI * kv.get_f64("larmor_hz")?.unwrap_or(500e3);
            Physics::Reduced {
                zeta2: kv.get_f64("zeta2")?.unwrap_or(0.1),
                epsilon: kv.get_f64("epsilon")?.unwrap_or(1.0),
                gamma_total: kv.get_f64("gamma_total")?.unwrap_or(larmor / 100.0),
                larmor,
                t1: kv.get_f64("t1")?,
            }
        };

        let duty = kv.get_f64("duty")?.unwrap_or(0.08);
        let op = physics
            .at(duty)
            .map_err(|e| Error::config(loc("duty"), e.to_string()))?;
        let time = match (kv.get_f64("time")?, kv.get_f64("gamma_t")?) {
            (Some(_), Some(_)) => return Err(Error::config(loc("gamma_t"), "give either `time` or `gamma_t`")),
            (Some(t), None) => t,
            (None, g) => g.unwrap_or(1.0) / op.gamma_total,
        };
        if !(time >= 0.0 && time.is_finite()) {
            return Err(Error::config(
                loc("time"),
                format!("interaction time must be >= 0, got {time}"),
            ));
        }

        let axis = match kv.get_str("axis") {
            None => None,
            Some("time") => Some(Axis::Time),
            Some("duty") => Some(Axis::Duty),
            Some("angle") => Some(Axis::Angle),
            Some("detuning") => Some(Axis::Detuning),
            Some("sideband_index") => Some(Axis::SidebandIndex),
            Some(o) => {
                return Err(Error::config(
                    loc("axis"),
                    format!("unknown axis `{o}` (time, duty, angle, detuning, sideband_index)"),
                ))
            }
        };
        let engine = match kv.get_str("engine").unwrap_or("analytic") {
            "analytic" => Engine::Analytic,
            "moments" => Engine::Moments,
            "montecarlo" => Engine::MonteCarlo,
            o => {
                return Err(Error::config(
                    loc("engine"),
                    format!("unknown engine `{o}` (analytic, moments, montecarlo)"),
                ))
            }
        };
        let points = kv.get_u64("points")?.unwrap_or(51) as usize;
        if points < 2 {
            return Err(Error::config(loc("points"), "need at least 2 points"));
        }
        let (start, stop) = (kv.get_f64("start")?, kv.get_f64("stop")?);
        if let (Some(a), Some(b)) = (start, stop) {
            if !(a.is_finite() && b.is_finite()) || a == b {
                return Err(Error::config(
                    loc("stop"),
                    "sweep range must be finite and nondegenerate",
                ));
            }
        }
        let sidebands = match kv.get_str("sidebands") {
            None => vec![0],
            Some(s) => s
                .split(',')
                .map(|t| t.trim().parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::config(loc("sidebands"), format!("expected a list like 0,1,2, got `{s}`")))?,
        };
        let initial = match kv.get_str("initial") {
            None => None,
            Some(s) => Some(
                s.split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| {
                        Error::config(
                            loc("initial"),
                            format!("expected numbers separated by commas, got `{s}`"),
                        )
                    })?,
            ),
        };
        let trajectories = kv.get_u64("trajectories")?.unwrap_or(1000) as usize;
        let initial_scale = kv.get_f64("initial_scale")?.unwrap_or(1.0);
        if !(initial_scale >= 1.0) {
            return Err(Error::config(loc("initial_scale"), "must be >= 1 (Heisenberg bound)"));
        }
        let exclusion = kv.get_f64("exclusion")?.unwrap_or(crate::spectral::DEFAULT_EXCLUSION);
        let tol = kv.get_f64("tol")?.unwrap_or(crate::fitlab::DEFAULT_TOL);
        if !(tol > 0.0) {
            return Err(Error::config(loc("tol"), "must be > 0"));
        }

        let cfg = Self {
            physics,
            duty,
            phase: kv.get_f64("phase")?.unwrap_or(0.0),
            n_max: kv.get_u64("n_max")?.map(|v| v as usize),
            samples_per_period: kv.get_u64("samples_per_period")?.map(|v| v as usize),
            time,
            angle: kv.get_f64("angle")?.unwrap_or(0.0) * PI,
            axis,
            start,
            stop,
            points,
            engine,
            output: path_of("output"),
            seed: kv.get_u64("seed")?.unwrap_or(1),
            trajectories,
            initial_scale,
            sidebands,
            exclusion,
            input: path_of("input"),
            model: kv.get_str("model").map(str::to_string),
            initial,
            tol,
            max_iter: kv
                .get_u64("max_iter")?
                .unwrap_or(crate::fitlab::DEFAULT_MAX_ITER as u64) as usize,
            order: kv.get_u64("order")?.unwrap_or(0) as u32,
        };
        cfg.strobo(duty)
            .map_err(|e| Error::config(loc("duty"), e.to_string()))?;
        Ok(cfg)
    }

    pub fn strobo(&self, duty: f64) -> Result<StroboConfig> {
        StroboConfig::new(
            duty,
            2.0 * self.physics.larmor(),
            self.phase,
            self.n_max.unwrap_or_else(|| default_n_max(duty)),
        )
    }

    pub fn grid(&self, strobo: &StroboConfig, time: f64) -> Result<TimeGrid> {
        let larmor = self.physics.larmor();
        match self.samples_per_period {
            Some(m) => TimeGrid::new(strobo, larmor, time, m),
            None => TimeGrid::auto(strobo, larmor, time),
        }
    }

    fn sweep(&self, axis: Axis, default: (f64, f64)) -> Vec<f64> {
        let a = self.start.unwrap_or(default.0);
        let b = self.stop.unwrap_or(default.1);
        let n = self.points;
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .map(|v| if axis == Axis::SidebandIndex { v.round() } else { v })
            .collect()
    }

    fn initial_state(&self) -> GaussianSpinState {
        GaussianSpinState::coherent_scaled(self.initial_scale)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_row(w: &mut dyn Write, cells: &[String]) -> Result<()> {
    writeln!(w, "{}", cells.join(",")).map_err(|e| Error::io("<output>", e))
}

fn cmd_coeffs(cfg: &RunConfig, w: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let axis = cfg.axis.unwrap_or(Axis::Detuning);
    if axis != Axis::Detuning {
        return Err(Error::config("axis", "coeffs only sweeps the detuning axis"));
    }
    let base = match &cfg.physics {
        Physics::Physical(p) => *p,
        Physics::Reduced { .. } => PhysicalParams::reference(),
    };
    write_row(
        w,
        &["delta_hz", "a0", "a1", "a2", "ratio_a2_a1", "zeta2"].map(String::from),
    )?;
    for hz in cfg.sweep(axis, (0.5e9, 5e9)) {
        match a_coefficients(2.0 * PI * hz, base.delta13, base.delta23) {
            Ok(a) => {
                let ratio = a.a2 / a.a1;
                write_row(
                    w,
                    &[fmt(hz), fmt(a.a0), fmt(a.a1), fmt(a.a2), fmt(ratio), fmt(-6.0 * ratio)],
                )?;
            }
            Err(e) => {
                let _ = writeln!(err, "skipping delta = {hz} Hz: {e}");
            }
        }
    }
    Ok(EXIT_OK)
}

struct SpinPoint {
    xi_a2: f64,
    wineland: f64,
    stderr: Option<f64>,
}

fn spin_point(cfg: &RunConfig, physics: &Physics, duty: f64, time: f64, angle: f64, seed: u64) -> Result<SpinPoint> {
    let op = physics.at(duty)?;
    let wineland = wineland_factor(time, op.t1);
    match cfg.engine {
        Engine::Analytic => {
            let inputs = SpinSqueezingInputs {
                gamma_total: op.gamma_total,
                epsilon: op.epsilon,
                duty,
                zeta2: op.zeta2,
                time,
                t1: None,
                quad_angle: angle,
            };
            Ok(SpinPoint {
                xi_a2: 2.0 * spin_variance(&inputs)?,
                wineland,
                stderr: None,
            })
        }
        Engine::Moments => {
            let strobo = cfg.strobo(duty)?;
            let grid = cfg.grid(&strobo, time)?;
            let fin = final_moments(&op.rates, &strobo, &grid, &cfg.initial_state())?;
            Ok(SpinPoint {
                xi_a2: 2.0 * fin.variance_along(angle),
                wineland,
                stderr: None,
            })
        }
        Engine::MonteCarlo => {
            let strobo = cfg.strobo(duty)?;
            let grid = cfg.grid(&strobo, time)?;
            let opts = SimulationOptions {
                initial: cfg.initial_state(),
                noise: NoiseMode::Full,
            };
            let sim = Simulator::new(&op.rates, &strobo, &grid, opts)?;
            let ev = ensemble_variance_with(&sim, cfg.trajectories, seed, angle)?;
            Ok(SpinPoint {
                xi_a2: 2.0 * ev.variance,
                wineland,
                stderr: Some(2.0 * ev.std_error),
            })
        }
    }
}

fn cmd_spin(cfg: &RunConfig, w: &mut dyn Write) -> Result<i32> {
    let axis = cfg.axis.unwrap_or(Axis::Time);
    let values = match axis {
        Axis::Time => cfg.sweep(axis, (0.0, 5.0 * cfg.time)),
        Axis::Duty => cfg.sweep(axis, (0.01, 1.0)),
        Axis::Angle => cfg.sweep(axis, (0.0, 2.0)),
        Axis::Detuning => cfg.sweep(axis, (0.5e9, 5e9)),
        Axis::SidebandIndex => return Err(Error::config("axis", "spin sweeps time, duty, angle or detuning")),
    };
    let rows: Vec<SpinPoint> = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let seed = trajectory_seed(cfg.seed, i as u64);
            let (mut duty, mut time, mut angle) = (cfg.duty, cfg.time, cfg.angle);
            let physics = match axis {
                Axis::Time => {
                    time = v;
                    cfg.physics.clone()
                }
                Axis::Duty => {
                    duty = v;
                    cfg.physics.clone()
                }
                Axis::Angle => {
                    angle = v * PI;
                    cfg.physics.clone()
                }
                _ => cfg.physics.with_detuning_hz(v)?,
            };
            spin_point(cfg, &physics, duty, time, angle, seed)
        })
        .collect::<Result<_>>()?;
    let mc = cfg.engine == Engine::MonteCarlo;
    let mut header = vec![axis.name().to_string(), "xi_a2".into(), "xi_aw2_db".into()];
    if mc {
        header.push("stderr".into());
    }
    write_row(w, &header)?;
    for (v, p) in values.iter().zip(rows) {
        let mut cells = vec![fmt(*v), fmt(p.xi_a2), fmt(to_db(p.xi_a2 * p.wineland))];
        if let Some(se) = p.stderr {
            cells.push(fmt(se));
        }
        if mc {
            write_row(w, &cells)?;
        } else {
            write_row(w, &cells[..3])?;
        }
    }
    Ok(EXIT_OK)
}

fn light_inputs(cfg: &RunConfig, op: &Operating, duty: f64) -> LightSpectrumInputs {
    LightSpectrumInputs {
        gamma_total: op.gamma_total,
        epsilon: op.epsilon,
        zeta2: op.zeta2,
        duty,
        time: cfg.time,
        larmor: cfg.physics.larmor(),
        n_max: cfg.n_max.unwrap_or_else(|| default_n_max(duty)),
        t1: op.t1,
    }
}

fn cmd_spectrum(cfg: &RunConfig, w: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let larmor = cfg.physics.larmor();
    match cfg.axis {
        Some(Axis::Duty) => {
            if cfg.engine != Engine::Analytic {
                return Err(Error::config(
                    "engine",
                    "duty sweeps of the spectrum use engine = analytic",
                ));
            }
            let mut header = vec!["duty".to_string()];
            header.extend(cfg.sidebands.iter().map(|n| format!("xi_l2_n{n}")));
            write_row(w, &header)?;
            for d in cfg.sweep(Axis::Duty, (0.01, 1.0)) {
                let op = cfg.physics.at(d)?;
                let inputs = light_inputs(cfg, &op, d);
                let mut cells = vec![fmt(d)];
                for &n in &cfg.sidebands {
                    cells.push(fmt(sideband_squeezing(n, &inputs)?));
                }
                write_row(w, &cells)?;
            }
            Ok(EXIT_OK)
        }
        Some(Axis::SidebandIndex) => {
            if cfg.engine != Engine::Analytic {
                return Err(Error::config("engine", "sideband sweeps use engine = analytic"));
            }
            let op = cfg.physics.at(cfg.duty)?;
            let inputs = light_inputs(cfg, &op, cfg.duty);
            write_row(w, &["sideband_index".to_string(), "xi_l2".to_string()])?;
            for n in cfg.sweep(Axis::SidebandIndex, (0.0, 5.0)) {
                if n < 0.0 {
                    return Err(Error::config("start", "sideband indices must be >= 0"));
                }
                write_row(w, &[fmt(n), fmt(sideband_squeezing(n as u32, &inputs)?)])?;
            }
            Ok(EXIT_OK)
        }
        Some(other) => Err(Error::config(
            "axis",
            format!(
                "spectrum sweeps duty or sideband_index, or omit `axis` for a spectrum; got {}",
                other.name()
            ),
        )),
        None => {
            let op = cfg.physics.at(cfg.duty)?;
            let freqs = sideband_frequency_grid(larmor, op.gamma_total, &cfg.sidebands);
            let centers: Vec<f64> = cfg.sidebands.iter().map(|&n| (2 * n + 1) as f64 * larmor).collect();
            let result = match cfg.engine {
                Engine::Analytic => {
                    let inputs = light_inputs(cfg, &op, cfg.duty);
                    let pts = freqs
                        .iter()
                        .map(|&f| light_spectrum(f, &inputs))
                        .collect::<Result<Vec<_>>>()?;
                    crate::spectral::SpectrumResult {
                        freqs: freqs.clone(),
                        s_est: pts.iter().map(|p| p.s_lss).collect(),
                        s_shot: vec![SHOT_NOISE; freqs.len()],
                        xi_l2: pts.iter().map(|p| p.xi_l2).collect(),
                        stderr: vec![0.0; freqs.len()],
                        n_ensemble: 0,
                    }
                }
                Engine::Moments => {
                    return Err(Error::config(
                        "engine",
                        "the spectrum needs engine = analytic or montecarlo",
                    ))
                }
                Engine::MonteCarlo => {
                    let strobo = cfg.strobo(cfg.duty)?;
                    let grid = cfg.grid(&strobo, cfg.time)?;
                    let opts = SimulationOptions {
                        initial: cfg.initial_state(),
                        noise: NoiseMode::Full,
                    };
                    let sim = Simulator::new(&op.rates, &strobo, &grid, opts)?;
                    let signal = simulate_spectrum(&sim, &freqs, cfg.trajectories, trajectory_seed(cfg.seed, 0))?;
                    let (reference, _) = shot_noise_reference(
                        &op.rates,
                        &strobo,
                        &grid,
                        &freqs,
                        cfg.trajectories,
                        trajectory_seed(cfg.seed, 1),
                        &centers,
                        cfg.exclusion * op.gamma_total,
                    )?;
                    squeezing_ratio(&signal, &reference)?
                }
            };
            for &c in &centers {
                if let Some(h) = headline_squeezing(&result, c, HEADLINE_WINDOW * op.gamma_total) {
                    let _ = writeln!(
                        err,
                        "minimum xi_L^2 near {c:.6e} rad/s: {:.6} +- {:.6} at {:.6e} rad/s",
                        h.xi_l2, h.stderr, h.omega
                    );
                }
            }
            result.write_csv(w).map_err(|e| Error::io("<output>", e))?;
            Ok(EXIT_OK)
        }
    }
}

/// Outcome of one validation check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Human-readable acceptance bound, e.g. `<= 1e-12`.
    pub tolerance: String,
    pub measured: String,
    pub pass: bool,
}

impl Check {
    fn le(name: &'static str, measured: f64, tol: f64) -> Self {
        Self {
            name,
            tolerance: format!("<= {tol:e}"),
            measured: format!("{measured:.6e}"),
            pass: measured <= tol,
        }
    }

    fn failed(name: &'static str, tolerance: String, e: &Error) -> Self {
        Self {
            name,
            tolerance,
            measured: format!("error: {e}"),
            pass: false,
        }
    }
}

/// The invariant suite behind `validate`.
pub fn validation_checks(cfg: &RunConfig) -> Vec<Check> {
    let mut checks = Vec::new();
    let larmor = cfg.physics.larmor();
    let op = cfg.physics.at(cfg.duty);

    // grid resolution
    let grid = cfg
        .strobo(cfg.duty)
        .and_then(|s| cfg.grid(&s, cfg.time).map(|g| (s, g)));
    match &grid {
        Ok((_, g)) => checks.push(Check {
            name: "grid_resolution",
            tolerance: format!(">= {MIN_SAMPLES_PER_LARMOR} samples per Larmor period, aligned edges"),
            measured: format!("{:.3} samples per Larmor period", 2.0 * PI / (g.dt * larmor)),
            pass: true,
        }),
        Err(e) => checks.push(Check::failed(
            "grid_resolution",
            format!(">= {MIN_SAMPLES_PER_LARMOR} samples per Larmor period, aligned edges"),
            e,
        )),
    }

    // QND point: no squeezing and no antisqueezing
    let mut worst: f64 = 0.0;
    for &gt in &[0.1, 1.0, 10.0] {
        for &d in &[0.08, 0.5, 1.0] {
            for &th in &[0.0, 0.5 * PI, PI] {
                let inputs = SpinSqueezingInputs {
                    gamma_total: 1.0,
                    epsilon: 1.0,
                    duty: d,
                    zeta2: 1.0,
                    time: gt,
                    t1: None,
                    quad_angle: th,
                };
                let xi = 2.0 * spin_variance(&inputs).unwrap_or(f64::NAN);
                worst = worst.max((xi - 1.0).abs());
            }
        }
    }
    checks.push(Check::le("qnd_neutrality |xi_A^2 - 1|", worst, 1e-12));

    let op = match op {
        Ok(op) => op,
        Err(e) => {
            checks.push(Check::failed("couplings", "valid operating point".into(), &e));
            return checks;
        }
    };
    let Ok((strobo, grid)) = grid else {
        for name in [
            "oracle analytic-moments",
            "oracle moments-montecarlo",
            "mean_decay_direction",
            "spectrum_parseval",
            "estimator_unbiasedness",
        ] {
            checks.push(Check {
                name,
                tolerance: "-".into(),
                measured: "skipped: no valid grid".into(),
                pass: false,
            });
        }
        return checks;
    };

    // analytic vs moments vs Monte Carlo at the configured point
    let inputs = SpinSqueezingInputs {
        gamma_total: op.gamma_total,
        epsilon: op.epsilon,
        duty: cfg.duty,
        zeta2: op.zeta2,
        time: grid.total_time,
        t1: None,
        quad_angle: cfg.angle,
    };
    let coherent = GaussianSpinState::coherent();
    let moments = final_moments(&op.rates, &strobo, &grid, &coherent).map(|s| s.variance_along(cfg.angle));
    match (spin_variance(&inputs), &moments) {
        (Ok(a), Ok(m)) => checks.push(Check::le("oracle analytic-moments (rel)", (m / a - 1.0).abs(), 1e-2)),
        (Err(e), _) => checks.push(Check::failed("oracle analytic-moments (rel)", "<= 1e-2".into(), &e)),
        (_, Err(e)) => checks.push(Check::failed("oracle analytic-moments (rel)", "<= 1e-2".into(), e)),
    }
    let mc = Simulator::new(&op.rates, &strobo, &grid, SimulationOptions::default())
        .and_then(|sim| ensemble_variance_with(&sim, cfg.trajectories, cfg.seed, cfg.angle));
    match (&moments, mc) {
        (Ok(m), Ok(ev)) => checks.push(Check::le(
            "oracle moments-montecarlo (sigma)",
            (ev.variance - m).abs() / ev.std_error,
            3.0,
        )),
        (Err(e), _) => checks.push(Check::failed("oracle moments-montecarlo (sigma)", "<= 3".into(), e)),
        (_, Err(e)) => checks.push(Check::failed("oracle moments-montecarlo (sigma)", "<= 3".into(), &e)),
    }

    // mean decay keeps its direction
    let opts = SimulationOptions {
        initial: GaussianSpinState::coherent().with_mean(0.3, 0.7),
        noise: NoiseMode::Suppressed,
    };
    match Simulator::new(&op.rates, &strobo, &grid, opts) {
        Ok(sim) => {
            let [x, p] = sim.final_state(0);
            checks.push(Check::le(
                "mean_decay_direction (rad)",
                (p.atan2(x) - 0.7f64.atan2(0.3)).abs(),
                1e-10,
            ));
        }
        Err(e) => checks.push(Check::failed("mean_decay_direction (rad)", "<= 1e-10".into(), &e)),
    }

    // periodogram: band integral equals record energy
    let vacuum = Simulator::new(&op.rates.without_atoms(), &strobo, &grid, SimulationOptions::default());
    match &vacuum {
        Ok(sim) => {
            let rec = sim.record(cfg.seed);
            let n = grid.n_steps;
            let freqs: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / (n as f64 * grid.dt)).collect();
            match estimate_spectrum(std::slice::from_ref(&rec), &strobo, &grid, larmor, &freqs) {
                Ok(s) => {
                    let band = s.s_est.iter().sum::<f64>() / (n as f64 * grid.dt);
                    let norm = cfg.duty * grid.total_time;
                    let energy: f64 = (0..n)
                        .map(|k| {
                            let phi = strobo.profile((k as f64 + 0.5) * grid.dt);
                            (phi * rec.light_out_series[k][1]).powi(2) / norm * grid.dt
                        })
                        .sum();
                    checks.push(Check::le("spectrum_parseval (rel)", (band / energy - 1.0).abs(), 1e-2));
                }
                Err(e) => checks.push(Check::failed("spectrum_parseval (rel)", "<= 1e-2".into(), &e)),
            }
            let coarse: Vec<f64> = (-20..=20).map(|j| larmor + j as f64 * op.gamma_total).collect();
            match simulate_spectrum(sim, &coarse, cfg.trajectories.max(2), trajectory_seed(cfg.seed, 7)) {
                Ok(s) => {
                    let se = s.s_est_stderr();
                    let worst = (0..coarse.len())
                        .map(|i| (s.s_est[i] - SHOT_NOISE).abs() / se[i])
                        .fold(0.0, f64::max);
                    checks.push(Check::le("estimator_unbiasedness (sigma, max bin)", worst, 3.0));
                }
                Err(e) => checks.push(Check::failed(
                    "estimator_unbiasedness (sigma, max bin)",
                    "<= 3".into(),
                    &e,
                )),
            }
        }
        Err(e) => {
            checks.push(Check::failed("spectrum_parseval (rel)", "<= 1e-2".into(), e));
            checks.push(Check::failed(
                "estimator_unbiasedness (sigma, max bin)",
                "<= 3".into(),
                e,
            ));
        }
    }
    checks
}

fn cmd_validate(cfg: &RunConfig, w: &mut dyn Write) -> Result<i32> {
    let checks = validation_checks(cfg);
    let io = |e| Error::io("<output>", e);
    writeln!(w, "{:<40} {:<58} {:<28} status", "check", "tolerance", "measured").map_err(io)?;
    for c in &checks {
        writeln!(
            w,
            "{:<40} {:<58} {:<28} {}",
            c.name,
            c.tolerance,
            c.measured,
            if c.pass { "PASS" } else { "FAIL" }
        )
        .map_err(io)?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    writeln!(w, "{} checks, {failed} failed", checks.len()).map_err(io)?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VALIDATION })
}

/// Abscissae, ordinates and optional weights.
pub type XyData = (Vec<f64>, Vec<f64>, Option<Vec<f64>>);

/// Reads `x,y[,weight]` rows; a first line that does not parse is taken as
/// a header.
pub fn read_xy_csv(path: &Path) -> Result<XyData> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    let mut width = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let location = format!("{}:{}", path.display(), i + 1);
        let cells = match cells {
            Ok(c) => c,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::config(location, format!("cannot parse `{line}`"))),
        };
        if !(2..=3).contains(&cells.len()) || width.is_some_and(|wd| wd != cells.len()) {
            return Err(Error::config(
                location,
                "expected a consistent x,y or x,y,weight layout",
            ));
        }
        width = Some(cells.len());
        x.push(cells[0]);
        y.push(cells[1]);
        if cells.len() == 3 {
            w.push(cells[2]);
        }
    }
    Ok((x, y, (width == Some(3)).then_some(w)))
}

fn cmd_fit(cfg: &RunConfig, w: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::config("input", "fit needs `input = <csv>`"))?;
    let id = cfg
        .model
        .as_deref()
        .ok_or_else(|| Error::config("model", "fit needs `model = <id>`"))?;
    let t1 = match &cfg.physics {
        Physics::Reduced { t1, .. } => *t1,
        Physics::Physical(p) => Some(p.t1),
    };
    let model = match id.parse::<FitModel>()? {
        FitModel::TimeExp { .. } => FitModel::TimeExp { t1 },
        FitModel::TimeF1f2 { .. } => FitModel::TimeF1f2 { t1 },
        FitModel::SidebandAb(_) => FitModel::SidebandAb(SidebandAxis::Duty { order: cfg.order }),
        m => m,
    };
    let (mut x, y, weights) = read_xy_csv(input)?;
    if model == FitModel::AngleCos {
        // same angle units as the `spin` angle axis
        x.iter_mut().for_each(|v| *v *= PI);
    }
    let initial = cfg
        .initial
        .clone()
        .ok_or_else(|| Error::config("initial", "fit needs `initial = p1,p2,...`"))?;
    let mut problem = FitProblem::new(model, x, y, initial);
    problem.weights = weights;
    let res: FitResult = fit(&problem, cfg.tol, cfg.max_iter)?;
    write_row(w, &["parameter", "value", "stderr"].map(String::from))?;
    for ((name, v), se) in model.param_names().iter().zip(&res.params).zip(res.std_errors()) {
        write_row(w, &[name.to_string(), fmt(*v), fmt(se)])?;
    }
    let _ = writeln!(
        err,
        "model {id}: converged = {}, iterations = {}, rss = {:e}",
        res.converged, res.iterations, res.rss
    );
    Ok(if res.converged { EXIT_OK } else { EXIT_VALIDATION })
}
