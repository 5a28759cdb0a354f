use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Shortest series accepted by the periodogram.
pub const MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetrendMode {
    None,
    #[default]
    Mean,
    Linear,
}

impl DetrendMode {
    /// Whether the mode zeroes the `omega = 0` bin.
    pub fn removes_mean(self) -> bool {
        !matches!(self, DetrendMode::None)
    }
}

impl fmt::Display for DetrendMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetrendMode::None => "none",
            DetrendMode::Mean => "mean",
            DetrendMode::Linear => "linear",
        })
    }
}

impl FromStr for DetrendMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(DetrendMode::None),
            "mean" => Ok(DetrendMode::Mean),
            "linear" => Ok(DetrendMode::Linear),
            other => Err(Error::Parse(format!(
                "unknown detrend mode `{other}` (expected none, mean or linear)"
            ))),
        }
    }
}

/// One-sided periodogram on `omega_k = 2 pi k / (N dt)`, `k = 0..=N/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    pub omega: Vec<f64>,
    pub power: Vec<f64>,
    pub n_samples: usize,
    pub dt: f64,
    pub detrend_mode: DetrendMode,
}

impl Periodogram {
    /// Wraps externally computed power values, e.g. a model spectrum sampled on the grid.
    pub fn from_power(
        n_samples: usize,
        dt: f64,
        detrend_mode: DetrendMode,
        power: Vec<f64>,
    ) -> Result<Self> {
        if n_samples < MIN_SAMPLES {
            return Err(Error::TooShort {
                len: n_samples,
                min: MIN_SAMPLES,
            });
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if power.len() != n_samples / 2 + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} power values for {} samples",
                power.len(),
                n_samples
            )));
        }
        if let Some(k) = power.iter().position(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid(format!("power at bin {k} is negative or not finite")));
        }
        let d_omega = 2.0 * PI / (n_samples as f64 * dt);
        let omega = (0..power.len()).map(|k| k as f64 * d_omega).collect();
        Ok(Self {
            omega,
            power,
            n_samples,
            dt,
            detrend_mode,
        })
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// Bin spacing in rad/s.
    pub fn delta_omega(&self) -> f64 {
        2.0 * PI / (self.n_samples as f64 * self.dt)
    }

    /// Highest grid frequency in rad/s.
    pub fn nyquist(&self) -> f64 {
        *self.omega.last().expect("periodogram is never empty")
    }

    /// Largest bin index with `omega_k <= omega_c`.
    pub fn last_bin_at_or_below(&self, omega_c: f64) -> usize {
        let k = (omega_c / self.delta_omega() * (1.0 + 1e-12)).floor();
        (k.max(0.0) as usize).min(self.len() - 1)
    }

    /// How many times bin `k` appears in the full two-sided DFT.
    pub fn multiplicity(&self, k: usize) -> f64 {
        if k == 0 || (self.n_samples % 2 == 0 && k == self.n_samples / 2) {
            1.0
        } else {
            2.0
        }
    }

    pub fn freq_hz(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w / (2.0 * PI)).collect()
    }
}

/// Removes the mean or the least-squares line. `None` returns an identical copy.
pub fn detrend(ts: &TimeSeries, mode: DetrendMode) -> Result<TimeSeries> {
    ts.validate()?;
    let mut out = ts.clone();
    detrend_in_place(&mut out.values, mode);
    Ok(out)
}

fn detrend_in_place(x: &mut [f64], mode: DetrendMode) {
    let n = x.len() as f64;
    match mode {
        DetrendMode::None => {}
        DetrendMode::Mean => {
            let mean = x.iter().sum::<f64>() / n;
            x.iter_mut().for_each(|v| *v -= mean);
        }
        DetrendMode::Linear => {
            // regress on the centered sample index; the time axis is uniform
            let c = (n - 1.0) / 2.0;
            let mean = x.iter().sum::<f64>() / n;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                let u = i as f64 - c;
                sxy += u * (v - mean);
                sxx += u * u;
            }
            let slope = sxy / sxx;
            for (i, v) in x.iter_mut().enumerate() {
                *v -= mean + slope * (i as f64 - c);
            }
        }
    }
}

/// `power_k = (dt / N) |sum_n x_n e^{-i omega_k n dt}|^2` after detrending, via FFT.
pub fn periodogram(ts: &TimeSeries, mode: DetrendMode) -> Result<Periodogram> {
    ts.validate()?;
    let n = ts.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooShort {
            len: n,
            min: MIN_SAMPLES,
        });
    }
    let mut x = ts.values.clone();
    detrend_in_place(&mut x, mode);

    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let scale = ts.dt / n as f64;
    let power = buf[..n / 2 + 1].iter().map(|c| c.norm_sqr() * scale).collect();
    Periodogram::from_power(n, ts.dt, mode, power)
}

/// O(N^2) direct summation of the same estimator, for cross-checking.
pub fn direct_periodogram(ts: &TimeSeries, mode: DetrendMode) -> Result<Periodogram> {
    ts.validate()?;
    let n = ts.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooShort {
            len: n,
            min: MIN_SAMPLES,
        });
    }
    let mut x = ts.values.clone();
    detrend_in_place(&mut x, mode);
    let power = (0..=n / 2)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                // omega_k * n * dt = 2 pi k n / N, reduced mod N to keep the angle small
                let m = (k * (i + 1)) % n;
                acc += Complex64::from_polar(*v, -2.0 * PI * m as f64 / n as f64);
            }
            acc.norm_sqr() * ts.dt / n as f64
        })
        .collect();
    Periodogram::from_power(n, ts.dt, mode, power)
}
