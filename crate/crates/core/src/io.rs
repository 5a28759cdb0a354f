//! CSV ingestion and emission, report serialization and `key = value`
//! configuration files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::ClassificationReport;
use crate::error::{Error, Result};
use crate::fitting::{self, FitResult, SpectrumModel};
use crate::series::{MultiSeries, TimeSeries};
use crate::spectral::Periodogram;

/// Relative deviation from the inferred `dt` tolerated between consecutive rows.
pub const SAMPLING_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::Parse(format!("unknown output format `{other}` (expected json or csv)"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        })
    }
}

fn parse_number(field: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("row {row}, column `{column}`: `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("row {row}, column `{column}`: value is not finite")));
    }
    Ok(v)
}

/// Reads every channel of a `time,<ch>...` file.
pub fn read_csv(path: impl AsRef<Path>) -> Result<MultiSeries> {
    read_csv_window(path.as_ref(), None)
}

fn read_csv_window(path: &Path, window: Option<(f64, f64)>) -> Result<MultiSeries> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("time") {
        return Err(Error::Parse(format!(
            "{}: expected a header `time,<channel>,...`",
            path.display()
        )));
    }
    if let Some((start, end)) = window {
        if !(start < end) {
            return Err(Error::invalid(format!("window start {start} must precede end {end}")));
        }
    }

    let names = header[1..].to_vec();
    let mut times = Vec::new();
    let mut channels = vec![Vec::new(); names.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        if record.len() != header.len() {
            return Err(Error::Parse(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        times.push(parse_number(&record[0], row, "time")?);
        for (c, (field, name)) in record.iter().skip(1).zip(&names).enumerate() {
            channels[c].push(parse_number(field, row, name)?);
        }
    }
    if times.len() < 2 {
        return Err(Error::TooShort {
            len: times.len(),
            min: 2,
        });
    }

    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::Parse("time column must be strictly increasing".into()));
    }
    for (i, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - dt).abs() > SAMPLING_JITTER * dt {
            return Err(Error::NonUniformSampling { row: i + 3, step, dt });
        }
    }

    let (lo, hi) = match window {
        Some((start, end)) => {
            let tol = SAMPLING_JITTER * dt;
            let lo = times.partition_point(|t| *t < start - tol);
            let hi = times.partition_point(|t| *t <= end + tol);
            if hi < lo + 2 {
                return Err(Error::EmptyWindow { start, end });
            }
            (lo, hi)
        }
        None => (0, times.len()),
    };
    let channels = channels.into_iter().map(|c| c[lo..hi].to_vec()).collect();
    MultiSeries::new(times[lo], dt, names, channels)
}

/// Loads one channel (the first when `channel` is `None`) restricted to the
/// inclusive time window.
pub fn load_csv(
    path: impl AsRef<Path>,
    channel: Option<&str>,
    window: Option<(f64, f64)>,
) -> Result<TimeSeries> {
    let all = read_csv_window(path.as_ref(), window)?;
    match channel {
        Some(name) => all.channel_by_name(name),
        None => all.channel(0),
    }
}

/// Writes `time,<channels>` rows with round-trip float formatting.
pub fn write_series_csv<W: Write>(out: W, series: &MultiSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    header.extend(series.names.iter().cloned());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..series.len() {
        row.clear();
        row.push(series.time(i).to_string());
        row.extend(series.channels.iter().map(|c| c[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn write_periodogram_csv<W: Write>(out: W, pg: &Periodogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["omega_rad_s", "freq_hz", "power"])?;
    for ((omega, hz), p) in pg.omega.iter().zip(pg.freq_hz()).zip(&pg.power) {
        w.write_record([omega.to_string(), hz.to_string(), p.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

#[derive(Serialize)]
struct PeriodogramDoc<'a> {
    omega_rad_s: &'a [f64],
    freq_hz: Vec<f64>,
    power: &'a [f64],
    n_samples: usize,
    dt: f64,
    detrend_mode: crate::spectral::DetrendMode,
}

pub fn periodogram_json(pg: &Periodogram) -> Result<String> {
    Ok(serde_json::to_string_pretty(&PeriodogramDoc {
        omega_rad_s: &pg.omega,
        freq_hz: pg.freq_hz(),
        power: &pg.power,
        n_samples: pg.n_samples,
        dt: pg.dt,
        detrend_mode: pg.detrend_mode,
    })?)
}

const FIT_COLUMNS: [&str; 9] = [
    "regime",
    "loss",
    "beta",
    "lambda",
    "alpha",
    "sigma1",
    "sigma2",
    "converged",
    "start_index",
];

fn fit_fields(f: &FitResult) -> [String; 9] {
    [
        f.regime.to_string(),
        f.loss.to_string(),
        f.params.beta.to_string(),
        f.params.lambda.to_string(),
        f.params.alpha.to_string(),
        f.params.sigma1.to_string(),
        f.params.sigma2.to_string(),
        f.converged.to_string(),
        f.start_index.to_string(),
    ]
}

pub fn write_fit(fit: &FitResult, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(fit)?),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(FIT_COLUMNS)?;
            w.write_record(fit_fields(fit))?;
            csv_string(w)
        }
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Parse(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Serializes a report. JSON output is parsed back and compared before it is
/// returned.
pub fn write_report(report: &ClassificationReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(report)?;
            let back = parse_report(&text)?;
            if &back != report {
                return Err(Error::Parse("report does not survive a JSON round trip".into()));
            }
            Ok(text)
        }
        OutputFormat::Csv => {
            let mut header: Vec<String> = [
                "channel",
                "window_start",
                "window_end",
                "omega_c",
                "v_ps",
                "decision",
                "selected_regime",
                "kurtosis",
                "kurtosis_flag",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            for prefix in ["lc", "forced"] {
                header.extend(FIT_COLUMNS[1..].iter().map(|c| format!("{prefix}_{c}")));
            }
            let mut row = vec![
                report.channel.clone(),
                report.window.0.to_string(),
                report.window.1.to_string(),
                report.omega_c.to_string(),
                report.v_ps.to_string(),
                report.decision.as_str().to_string(),
                report.selected_regime.to_string(),
                report.kurtosis.map(|k| k.to_string()).unwrap_or_default(),
                match report.kurtosis_flag {
                    Some(crate::classifier::KurtosisFlag::Pass) => "pass".into(),
                    Some(crate::classifier::KurtosisFlag::Suspect) => "suspect".into(),
                    None => String::new(),
                },
            ];
            for fit in [&report.lc_fit, &report.forced_fit] {
                row.extend(fit_fields(fit).into_iter().skip(1));
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header)?;
            w.write_record(&row)?;
            csv_string(w)
        }
    }
}

/// Parses a JSON report and checks its internal consistency.
pub fn parse_report(text: &str) -> Result<ClassificationReport> {
    let report: ClassificationReport = serde_json::from_str(text)?;
    let threshold = report
        .config_echo
        .get("threshold")
        .and_then(serde_json::Value::as_f64)
        .unwrap_or(0.5);
    report.validate(threshold)?;
    Ok(report)
}

/// Periodogram and both fitted model spectra on the bins with `omega <= omega_c`.
pub fn write_plot_data<W: Write>(
    out: W,
    pg: &Periodogram,
    lc: &FitResult,
    forced: &FitResult,
    omega_c: f64,
    model: SpectrumModel,
) -> Result<usize> {
    let k_max = pg.last_bin_at_or_below(omega_c);
    let lc_power = fitting::model_power(pg, &lc.params, model, k_max)?;
    let forced_power = fitting::model_power(pg, &forced.params, model, k_max)?;
    let hz = pg.freq_hz();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["omega_rad_s", "freq_hz", "ps_estimated", "ps_fit_lc", "ps_fit_forced"])?;
    for k in 0..=k_max {
        w.write_record([
            pg.omega[k].to_string(),
            hz[k].to_string(),
            pg.power[k].to_string(),
            lc_power[k].to_string(),
            forced_power[k].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<plot data>", e))?;
    Ok(k_max + 1)
}

/// Parses `key = value` lines. `#` starts a comment; dashes in keys become
/// underscores.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('-', "_");
        if key.is_empty() {
            return Err(Error::Parse(format!("config line {}: empty key", i + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn create_file(path: impl AsRef<Path>) -> Result<std::io::BufWriter<fs::File>> {
    let path = path.as_ref();
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}
