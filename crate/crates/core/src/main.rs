use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use oscmech::classifier::{self, ClassifierConfig, Decision};
use oscmech::fitting::{self, FitConfig, Regime, SpectrumModel};
use oscmech::io::{self, OutputFormat};
use oscmech::series::{MultiSeries, TimeGrid, TimeSeries};
use oscmech::sim::{self, ForcedConfig, HopfConfig, LinearSdeConfig};
use oscmech::spectral::{self, DetrendMode, ModelParams};
use oscmech::{Error, Result};

const EXIT_LIMIT_CYCLE: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_FORCED: u8 = 2;
const EXIT_REVIEW: u8 = 3;

/// Distinguish forced oscillations from limit cycles in sampled signals.
#[derive(Parser, Debug)]
#[command(name = "oscmech", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a stochastic normal form and write `time,<channels>` CSV.
    Simulate(SimulateArgs),
    /// Sample periodogram of one channel.
    Psd(PsdArgs),
    /// Fit the oscillator model under one constraint regime.
    Fit(FitArgs),
    /// Full pipeline: periodogram, both fits, V_PS and decision.
    Classify(ClassifyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mechanism {
    Forced,
    Hopf,
    Unified,
    #[value(name = "vector_ou", alias = "vector-ou")]
    VectorOu,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum RegimeArg {
    #[value(name = "limit_cycle", alias = "limit-cycle")]
    LimitCycle,
    Forced,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    mechanism: Option<Mechanism>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long)]
    omega0: Option<f64>,
    /// Forcing frequency, rad/s.
    #[arg(long = "forcing-omega", alias = "Omega")]
    forcing_omega: Option<f64>,
    /// Forcing amplitude.
    #[arg(long = "forcing-amplitude", alias = "F")]
    forcing_amplitude: Option<f64>,
    #[arg(long = "omega-h")]
    omega_h: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma1: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    /// Drift matrix, rows separated by `;`, entries by `,`.
    #[arg(long = "drift-matrix", allow_hyphen_values = true)]
    drift_matrix: Option<String>,
    /// Noise input matrix, same layout as the drift matrix.
    #[arg(long = "input-matrix", allow_hyphen_values = true)]
    input_matrix: Option<String>,
    /// Initial state, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    initial: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated span in seconds (`duration / dt + 1` samples).
    #[arg(long)]
    duration: Option<f64>,
    /// Number of integration steps; overrides `--duration`.
    #[arg(long = "n-steps")]
    n_steps: Option<usize>,
    #[arg(long)]
    discard: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    t0: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; the configuration goes to `<out>.json`. Without it the
    /// CSV is printed and the configuration goes to stderr.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    channel: Option<String>,
    #[arg(long = "window-start", allow_negative_numbers = true)]
    window_start: Option<f64>,
    #[arg(long = "window-end", allow_negative_numbers = true)]
    window_end: Option<f64>,
    #[arg(long)]
    detrend: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Destination file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct FitFlags {
    #[arg(long = "omega-c")]
    omega_c: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "big-m")]
    big_m: Option<f64>,
    #[arg(long = "n-starts")]
    n_starts: Option<usize>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    #[arg(long = "x-tol")]
    x_tol: Option<f64>,
    #[arg(long = "f-tol")]
    f_tol: Option<f64>,
    #[arg(long = "n-dc")]
    n_dc: Option<usize>,
    /// `expected_periodogram` (default) or `density`.
    #[arg(long = "spectrum-model")]
    spectrum_model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct PsdArgs {
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitFlags,
    #[arg(long, value_enum)]
    regime: RegimeArg,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitFlags,
    /// V_PS above this is reported as a forced oscillation.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long = "plot-data")]
    plot_data: Option<PathBuf>,
}

/// Flag values layered over a configuration file.
struct Layers {
    file: BTreeMap<String, String>,
}

impl Layers {
    fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self> {
        let file = match path {
            Some(p) => io::load_config(p)?,
            None => BTreeMap::new(),
        };
        if let Some(bad) = file.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Parse(format!("unknown configuration key `{bad}`")));
        }
        Ok(Self { file })
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("configuration `{key}`: cannot parse `{raw}`"))),
            None => Ok(None),
        }
    }

    fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T> {
        self.get(flag, key)?
            .ok_or_else(|| Error::invalid(format!("missing required parameter `{key}`")))
    }
}

const INPUT_KEYS: [&str; 6] = ["input", "channel", "window_start", "window_end", "detrend", "output"];
const FIT_KEYS: [&str; 10] = [
    "omega_c",
    "epsilon",
    "big_m",
    "n_starts",
    "max_iters",
    "x_tol",
    "f_tol",
    "n_dc",
    "spectrum_model",
    "seed",
];
const SIM_KEYS: [&str; 21] = [
    "mechanism",
    "gamma",
    "omega0",
    "forcing_omega",
    "Omega",
    "forcing_amplitude",
    "F",
    "omega_h",
    "sigma",
    "beta",
    "lambda",
    "alpha",
    "sigma1",
    "sigma2",
    "drift_matrix",
    "input_matrix",
    "initial",
    "dt",
    "duration",
    "n_steps",
    "discard",
];
const SIM_EXTRA_KEYS: [&str; 2] = ["t0", "seed"];

struct Input {
    series: TimeSeries,
    path: PathBuf,
    detrend: DetrendMode,
    output: OutputFormat,
    window: Option<(f64, f64)>,
}

fn resolve_input(args: &InputArgs, layers: &Layers) -> Result<Input> {
    let path: PathBuf = layers.require(args.input.clone(), "input")?;
    let channel: Option<String> = layers.get(args.channel.clone(), "channel")?;
    let start: Option<f64> = layers.get(args.window_start, "window_start")?;
    let end: Option<f64> = layers.get(args.window_end, "window_end")?;
    let window = match (start, end) {
        (None, None) => None,
        (s, e) => Some((s.unwrap_or(f64::NEG_INFINITY), e.unwrap_or(f64::INFINITY))),
    };
    let detrend: DetrendMode = layers
        .get(args.detrend.clone(), "detrend")?
        .map(|s: String| s.parse())
        .transpose()?
        .unwrap_or_default();
    let output: OutputFormat = layers
        .get(args.output.clone(), "output")?
        .map(|s: String| s.parse())
        .transpose()?
        .unwrap_or_default();
    let series = io::load_csv(&path, channel.as_deref(), window)?;
    Ok(Input {
        series,
        path,
        detrend,
        output,
        window,
    })
}

fn resolve_fit(flags: &FitFlags, layers: &Layers) -> Result<FitConfig> {
    let d = FitConfig::default();
    let spectrum_model = match layers.get(flags.spectrum_model.clone(), "spectrum_model")? {
        Some(s) => SpectrumModel::from_str(&s)?,
        None => d.spectrum_model,
    };
    let cfg = FitConfig {
        omega_c: layers.get(flags.omega_c, "omega_c")?,
        epsilon: layers.get(flags.epsilon, "epsilon")?.unwrap_or(d.epsilon),
        big_m: layers.get(flags.big_m, "big_m")?.unwrap_or(d.big_m),
        n_starts: layers.get(flags.n_starts, "n_starts")?.unwrap_or(d.n_starts),
        max_iters: layers.get(flags.max_iters, "max_iters")?.unwrap_or(d.max_iters),
        x_tol: layers.get(flags.x_tol, "x_tol")?.unwrap_or(d.x_tol),
        f_tol: layers.get(flags.f_tol, "f_tol")?.unwrap_or(d.f_tol),
        seed: layers.get(flags.seed, "seed")?.unwrap_or(d.seed),
        n_dc: layers.get(flags.n_dc, "n_dc")?.unwrap_or(d.n_dc),
        spectrum_model,
        ..d
    };
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => io::write_text(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| if text.ends_with('\n') { Ok(()) } else { stdout.write_all(b"\n") })
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn parse_vector(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{v}` is not a number")))
        })
        .collect()
}

fn parse_matrix(raw: &str) -> Result<Vec<Vec<f64>>> {
    raw.split(';').map(parse_vector).collect()
}

fn run_simulate(args: SimulateArgs) -> Result<u8> {
    let allowed: Vec<&str> = SIM_KEYS.iter().chain(&SIM_EXTRA_KEYS).copied().collect();
    let layers = Layers::load(args.config.as_deref(), &allowed)?;
    let mechanism = match args.mechanism {
        Some(m) => m,
        None => {
            let raw: String = layers.require(None, "mechanism")?;
            Mechanism::from_str(&raw, true).map_err(|_| Error::invalid(format!("unknown mechanism `{raw}`")))?
        }
    };
    let dt: f64 = layers.require(args.dt, "dt")?;
    let discard = layers.get(args.discard, "discard")?.unwrap_or(0);
    let t0 = layers.get(args.t0, "t0")?.unwrap_or(0.0);
    let seed = layers.get(args.seed, "seed")?.unwrap_or(0);
    let n_steps = match layers.get(args.n_steps, "n_steps")? {
        Some(n) => n,
        None => TimeGrid::from_duration(dt, layers.require(args.duration, "duration")?, 0)?.n_steps,
    };
    let grid = TimeGrid::new(t0, dt, n_steps, discard)?;
    let initial = layers
        .get(args.initial.clone(), "initial")?
        .map(|s: String| parse_vector(&s))
        .transpose()?;
    let pair = |v: &Option<Vec<f64>>| -> Result<Option<[f64; 2]>> {
        match v {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some([v[0], v[1]])),
            Some(v) => Err(Error::DimensionMismatch(format!(
                "initial state has {} entries, expected 2",
                v.len()
            ))),
        }
    };

    let (series, params): (MultiSeries, serde_json::Value) = match mechanism {
        Mechanism::Forced => {
            let cfg = ForcedConfig {
                gamma: layers.require(args.gamma, "gamma")?,
                omega0: layers.require(args.omega0, "omega0")?,
                forcing_omega: match layers.get(args.forcing_omega, "forcing_omega")? {
                    Some(v) => v,
                    None => layers.require(None, "Omega")?,
                },
                forcing_amplitude: match layers.get(args.forcing_amplitude, "forcing_amplitude")? {
                    Some(v) => v,
                    None => layers.require(None, "F")?,
                },
                sigma: layers.require(args.sigma, "sigma")?,
            };
            let out = sim::simulate_forced_from(&cfg, &grid, seed, pair(&initial)?)?;
            (out, serde_json::to_value(cfg)?)
        }
        Mechanism::Hopf => {
            let cfg = HopfConfig {
                gamma: layers.require(args.gamma, "gamma")?,
                omega_h: layers.require(args.omega_h, "omega_h")?,
                sigma: layers.require(args.sigma, "sigma")?,
            };
            let out = sim::simulate_hopf_from(&cfg, &grid, seed, pair(&initial)?)?;
            (out, serde_json::to_value(cfg)?)
        }
        Mechanism::Unified => {
            let p = ModelParams {
                beta: layers.require(args.beta, "beta")?,
                lambda: layers.require(args.lambda, "lambda")?,
                alpha: layers.require(args.alpha, "alpha")?,
                sigma1: layers.require(args.sigma1, "sigma1")?,
                sigma2: layers.require(args.sigma2, "sigma2")?,
            };
            if initial.is_some() {
                return Err(Error::invalid("the unified process starts on its attractor; --initial is not supported"));
            }
            let out = sim::simulate_unified(&p, &grid, seed)?;
            (out.into(), serde_json::to_value(p)?)
        }
        Mechanism::VectorOu => {
            let drift: String = layers.require(args.drift_matrix.clone(), "drift_matrix")?;
            let input: String = layers.require(args.input_matrix.clone(), "input_matrix")?;
            let cfg = LinearSdeConfig::from_rows(
                &parse_matrix(&drift)?,
                &parse_matrix(&input)?,
                layers.require(args.sigma, "sigma")?,
            )?;
            let out = sim::simulate_vector_ou_from(&cfg, &grid, seed, initial.as_deref())?;
            let params = json!({
                "drift_matrix": parse_matrix(&drift)?,
                "input_matrix": parse_matrix(&input)?,
                "sigma": cfg.sigma,
            });
            (out, params)
        }
    };

    let mechanism_name = mechanism
        .to_possible_value()
        .map(|v| v.get_name().to_string())
        .unwrap_or_default();
    let sidecar = serde_json::to_string_pretty(&json!({
        "mechanism": mechanism_name,
        "params": params,
        "grid": grid,
        "initial": initial,
        "seed": seed,
    }))?;
    match &args.out {
        Some(path) => {
            let mut f = io::create_file(path)?;
            io::write_series_csv(&mut f, &series)?;
            f.flush().map_err(|e| Error::io(path, e))?;
            let mut side = path.clone().into_os_string();
            side.push(".json");
            io::write_text(PathBuf::from(side), &(sidecar + "\n"))?;
        }
        None => {
            io::write_series_csv(std::io::stdout().lock(), &series)?;
            eprintln!("{sidecar}");
        }
    }
    Ok(EXIT_LIMIT_CYCLE)
}

fn input_keys_with(extra: &[&'static str]) -> Vec<&'static str> {
    INPUT_KEYS.iter().chain(&FIT_KEYS).chain(extra).copied().collect()
}

fn run_psd(args: PsdArgs) -> Result<u8> {
    let layers = Layers::load(args.input.config.as_deref(), &INPUT_KEYS)?;
    let input = resolve_input(&args.input, &layers)?;
    let pg = spectral::periodogram(&input.series, input.detrend)?;
    let text = match input.output {
        OutputFormat::Json => io::periodogram_json(&pg)?,
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            io::write_periodogram_csv(&mut buf, &pg)?;
            String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))?
        }
    };
    emit(args.input.out.as_deref(), &text)?;
    Ok(EXIT_LIMIT_CYCLE)
}

fn run_fit(args: FitArgs) -> Result<u8> {
    let layers = Layers::load(args.input.config.as_deref(), &input_keys_with(&[]))?;
    let input = resolve_input(&args.input, &layers)?;
    let cfg = resolve_fit(&args.fit, &layers)?;
    let pg = spectral::periodogram(&input.series, input.detrend)?;
    let regime = match args.regime {
        RegimeArg::LimitCycle => Regime::LimitCycle,
        RegimeArg::Forced => Regime::Forced,
    };
    let result = fitting::fit(&pg, regime, &cfg)?;
    emit(args.input.out.as_deref(), &io::write_fit(&result, input.output)?)?;
    Ok(if result.converged { EXIT_LIMIT_CYCLE } else { EXIT_REVIEW })
}

fn run_classify(args: ClassifyArgs) -> Result<u8> {
    let layers = Layers::load(args.input.config.as_deref(), &input_keys_with(&["threshold"]))?;
    let input = resolve_input(&args.input, &layers)?;
    let fit = resolve_fit(&args.fit, &layers)?;
    let cfg = ClassifierConfig {
        fit,
        detrend: input.detrend,
        threshold: layers.get(args.threshold, "threshold")?.unwrap_or(0.5),
        ..ClassifierConfig::default()
    };
    let mut report = classifier::classify_with(&input.series, &cfg)?;
    report.config_echo = json!({
        "input": input.path,
        "channel": input.series.label,
        "window_start": input.window.map(|w| w.0).filter(|v| v.is_finite()),
        "window_end": input.window.map(|w| w.1).filter(|v| v.is_finite()),
        "detrend": input.detrend,
        "output": input.output,
        "threshold": cfg.threshold,
        "kurtosis_band": cfg.kurtosis_band,
        "fit": cfg.fit,
        "seed": cfg.fit.seed,
    });
    emit(args.input.out.as_deref(), &io::write_report(&report, input.output)?)?;

    if let Some(path) = &args.plot_data {
        let pg = spectral::periodogram(&input.series, input.detrend)?;
        let mut f = io::create_file(path)?;
        io::write_plot_data(
            &mut f,
            &pg,
            &report.lc_fit,
            &report.forced_fit,
            report.omega_c,
            cfg.fit.spectrum_model,
        )?;
        f.flush().map_err(|e| Error::io(path, e))?;
    }

    Ok(if report.needs_review() {
        EXIT_REVIEW
    } else if report.decision == Decision::ForcedOscillation {
        EXIT_FORCED
    } else {
        EXIT_LIMIT_CYCLE
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Psd(a) => run_psd(a),
        Command::Fit(a) => run_fit(a),
        Command::Classify(a) => run_classify(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
