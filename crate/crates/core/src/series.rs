//! Uniformly sampled signals and the integration grid used to produce them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integration grid: `n_steps` samples spaced `dt` apart starting at `t0`,
/// of which the first `discard` are dropped from simulator output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub discard: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize, discard: usize) -> Result<Self> {
        let grid = Self {
            t0,
            dt,
            n_steps,
            discard,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid covering `[0, duration]` inclusive, i.e. `duration / dt + 1` samples.
    pub fn from_duration(dt: f64, duration: f64, discard: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::invalid(format!(
                "duration must be positive, got {duration}"
            )));
        }
        let n_steps = (duration / dt).round() as usize + 1;
        Self::new(0.0, dt, n_steps, discard)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t0.is_finite() {
            return Err(Error::invalid("t0 must be finite"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_steps < 2 {
            return Err(Error::invalid(format!(
                "n_steps must be at least 2, got {}",
                self.n_steps
            )));
        }
        if self.discard >= self.n_steps {
            return Err(Error::invalid(format!(
                "discard ({}) must be smaller than n_steps ({})",
                self.discard, self.n_steps
            )));
        }
        Ok(())
    }

    /// Number of samples that survive the discard.
    pub fn output_len(&self) -> usize {
        self.n_steps - self.discard
    }

    pub fn time(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.dt
    }
}

/// A single uniformly sampled real channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    /// Channel name, carried through to reports.
    #[serde(default = "default_label")]
    pub label: String,
}

fn default_label() -> String {
    "x".to_string()
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        Self::with_label(t0, dt, values, default_label())
    }

    pub fn with_label(t0: f64, dt: f64, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let ts = Self {
            t0,
            dt,
            values,
            label: label.into(),
        };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t0.is_finite() {
            return Err(Error::invalid("t0 must be finite"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.values.len() < 2 {
            return Err(Error::TooShort {
                len: self.values.len(),
                min: 2,
            });
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }
}

/// Several channels sharing one time base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeries {
    pub t0: f64,
    pub dt: f64,
    pub names: Vec<String>,
    pub channels: Vec<Vec<f64>>,
}

impl MultiSeries {
    pub fn new(t0: f64, dt: f64, names: Vec<String>, channels: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != channels.len() || channels.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} channels",
                names.len(),
                channels.len()
            )));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::DimensionMismatch("channels differ in length".into()));
        }
        let ms = Self {
            t0,
            dt,
            names,
            channels,
        };
        for i in 0..ms.n_channels() {
            ms.channel(i)?;
        }
        Ok(ms)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn channel(&self, index: usize) -> Result<TimeSeries> {
        let values = self
            .channels
            .get(index)
            .ok_or_else(|| Error::MissingChannel(index.to_string()))?;
        TimeSeries::with_label(self.t0, self.dt, values.clone(), self.names[index].clone())
    }

    pub fn channel_by_name(&self, name: &str) -> Result<TimeSeries> {
        let idx = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))?;
        self.channel(idx)
    }
}

impl From<TimeSeries> for MultiSeries {
    fn from(ts: TimeSeries) -> Self {
        Self {
            t0: ts.t0,
            dt: ts.dt,
            names: vec![ts.label],
            channels: vec![ts.values],
        }
    }
}
