//! Tell forced oscillations from self-sustained (limit-cycle) oscillations in a
//! measured signal.
//!
//! The sample periodogram of the signal is fitted twice with a five-parameter
//! oscillator model, once under limit-cycle constraints and once under
//! forced-oscillation constraints. The better fit decides which parameter set
//! is used to compute `V_PS`, the share of low-frequency power that comes from
//! filtered white noise rather than from a decohering oscillation.

pub mod classifier;
pub mod error;
pub mod fitting;
pub mod io;
pub mod optim;
pub mod series;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
pub use series::{MultiSeries, TimeGrid, TimeSeries};
pub use spectral::{DetrendMode, ModelParams, Periodogram};
pub use fitting::{FitConfig, FitResult, Regime, SpectrumModel};
pub use classifier::{classify, classify_with, v_ps, ClassificationReport, ClassifierConfig, Decision};
