//! Sample power spectra and the analytic spectrum of the unified oscillation
//! model.
//!
//! All spectra use the two-sided convention `S(w) = int R(tau) e^{-i w tau} dtau`
//! and angular frequency in rad/s.

mod expected;
mod periodogram;

pub use expected::{autocovariance, expected_periodogram, PeriodogramModel};
pub use periodogram::{detrend, direct_periodogram, periodogram, DetrendMode, Periodogram};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of `x' = -beta (x - Q) + sigma2 xi`, where `Q` oscillates with
/// amplitude `lambda`, frequency `alpha` and phase/amplitude noise `sigma1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite, got {v}")));
            }
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        for (name, v) in &fields[1..] {
            if *v < 0.0 {
                return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    fn check_phase_noise(&self) -> Result<()> {
        if self.lambda == 0.0 && self.sigma1 > 0.0 {
            return Err(Error::invalid(
                "lambda = 0 with sigma1 > 0: phase diffusion sigma1/lambda is undefined",
            ));
        }
        Ok(())
    }

    /// Widths `s` of the two Lorentzian pairs making up the spectrum of `Q`.
    pub(crate) fn widths(&self) -> (f64, f64) {
        let s1 = if self.sigma1 == 0.0 {
            0.0
        } else {
            (self.sigma1 / self.lambda).powi(2)
        };
        (s1, s1 + 4.0 * self.lambda * self.lambda)
    }

    /// Weights multiplying `kernel_f` for the two pairs.
    pub(crate) fn weights(&self) -> (f64, f64) {
        let w2 = if self.sigma1 == 0.0 {
            0.0
        } else {
            (self.sigma1 / self.lambda).powi(2) / 4.0
        };
        (self.lambda * self.lambda, w2)
    }
}

/// `F(s, alpha, omega) = 2s (4(alpha^2 + omega^2) + s^2) / ([4(alpha-omega)^2 + s^2][4(alpha+omega)^2 + s^2])`.
pub fn kernel_f(s: f64, alpha: f64, omega: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::invalid(format!("kernel width must be positive, got {s}")));
    }
    Ok(kernel_f_unchecked(s, alpha, omega))
}

#[inline]
pub(crate) fn kernel_f_unchecked(s: f64, alpha: f64, omega: f64) -> f64 {
    let s2 = s * s;
    let dm = alpha - omega;
    let dp = alpha + omega;
    2.0 * s * (4.0 * (alpha * alpha + omega * omega) + s2)
        / ((4.0 * dm * dm + s2) * (4.0 * dp * dp + s2))
}

/// Spectral density of `Q`. Zero when `sigma1 = 0`: the noiseless oscillation
/// is a pure line, which has no density.
pub fn psd_q(params: &ModelParams, omega: f64) -> Result<f64> {
    params.validate()?;
    params.check_phase_noise()?;
    Ok(psd_q_unchecked(params, omega))
}

#[inline]
pub(crate) fn psd_q_unchecked(p: &ModelParams, omega: f64) -> f64 {
    if p.sigma1 == 0.0 {
        return 0.0;
    }
    let (s1, s2) = p.widths();
    let (w1, w2) = p.weights();
    w1 * kernel_f_unchecked(s1, p.alpha, omega) + w2 * kernel_f_unchecked(s2, p.alpha, omega)
}

/// Spectral density of the observed `x`.
pub fn psd_x(params: &ModelParams, omega: f64) -> Result<f64> {
    params.validate()?;
    params.check_phase_noise()?;
    Ok(psd_x_unchecked(params, omega))
}

#[inline]
pub(crate) fn psd_x_unchecked(p: &ModelParams, omega: f64) -> f64 {
    let b2 = p.beta * p.beta;
    let den = b2 + omega * omega;
    b2 / den * psd_q_unchecked(p, omega) + p.sigma2 * p.sigma2 / den
}

/// Checks the parameter set can be evaluated by the spectrum functions.
pub fn check_params(params: &ModelParams) -> Result<()> {
    params.validate()?;
    params.check_phase_noise()
}
