//! The `V_PS` statistic and the end-to-end decision pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{self, FitConfig, FitResult, Regime};
use crate::series::TimeSeries;
use crate::spectral::{self, DetrendMode, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    LimitCycle,
    ForcedOscillation,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::LimitCycle => "limit_cycle",
            Decision::ForcedOscillation => "forced_oscillation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KurtosisFlag {
    Pass,
    Suspect,
}

/// Share of the model's zero-frequency power contributed by the filtered
/// white noise: `(sigma2/beta)^2 / (psd_q(0) + (sigma2/beta)^2)`.
pub fn v_ps(params: &ModelParams) -> Result<f64> {
    let q0 = spectral::psd_q(params, 0.0)?;
    let white = (params.sigma2 / params.beta).powi(2);
    let total = q0 + white;
    if total == 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    Ok(white / total)
}

pub const DEFAULT_KURTOSIS_BAND: (f64, f64) = (-1.7, 1.0);
pub const KURTOSIS_MIN_LEN: usize = 100;

/// Sample excess kurtosis of the mean-removed series.
pub fn excess_kurtosis(ts: &TimeSeries) -> Result<f64> {
    ts.validate()?;
    if ts.len() < KURTOSIS_MIN_LEN {
        return Err(Error::TooShort {
            len: ts.len(),
            min: KURTOSIS_MIN_LEN,
        });
    }
    let n = ts.len() as f64;
    let mean = ts.values.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in &ts.values {
        let d2 = (v - mean).powi(2);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if !(m2 > f64::EPSILON * f64::EPSILON * mean * mean) || m2 == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(m4 / (m2 * m2) - 3.0)
}

/// Flags series whose excess kurtosis falls outside `band` as suspect.
pub fn kurtosis_screen_with(ts: &TimeSeries, band: (f64, f64)) -> Result<(f64, KurtosisFlag)> {
    let k = excess_kurtosis(ts)?;
    let flag = if k >= band.0 && k <= band.1 {
        KurtosisFlag::Pass
    } else {
        KurtosisFlag::Suspect
    };
    Ok((k, flag))
}

pub fn kurtosis_screen(ts: &TimeSeries) -> Result<(f64, KurtosisFlag)> {
    kurtosis_screen_with(ts, DEFAULT_KURTOSIS_BAND)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub fit: FitConfig,
    pub detrend: DetrendMode,
    /// `V_PS` above this means forced oscillation.
    pub threshold: f64,
    pub kurtosis_band: (f64, f64),
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            detrend: DetrendMode::Mean,
            threshold: 0.5,
            kurtosis_band: DEFAULT_KURTOSIS_BAND,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        if !(self.threshold >= 0.0 && self.threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        let (lo, hi) = self.kurtosis_band;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("kurtosis band [{lo}, {hi}] is empty")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationReport {
    pub v_ps: f64,
    pub decision: Decision,
    pub selected_regime: Regime,
    pub lc_fit: FitResult,
    pub forced_fit: FitResult,
    pub kurtosis: Option<f64>,
    pub kurtosis_flag: Option<KurtosisFlag>,
    /// First and last sample time of the analysed series, seconds.
    pub window: (f64, f64),
    pub channel: String,
    pub omega_c: f64,
    /// Effective configuration of the run.
    pub config_echo: serde_json::Value,
}

impl ClassificationReport {
    pub fn selected_fit(&self) -> &FitResult {
        match self.selected_regime {
            Regime::LimitCycle => &self.lc_fit,
            Regime::Forced => &self.forced_fit,
        }
    }

    /// True when the selected fit did not converge or the kurtosis screen
    /// flagged the series.
    pub fn needs_review(&self) -> bool {
        !self.selected_fit().converged || self.kurtosis_flag == Some(KurtosisFlag::Suspect)
    }

    /// Checks the internal consistency of a (possibly deserialized) report.
    pub fn validate(&self, threshold: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&self.v_ps) {
            return Err(Error::invalid(format!("v_ps {} outside [0, 1]", self.v_ps)));
        }
        if decide(self.v_ps, threshold) != self.decision {
            return Err(Error::invalid("decision disagrees with v_ps"));
        }
        if self.lc_fit.regime != Regime::LimitCycle || self.forced_fit.regime != Regime::Forced {
            return Err(Error::invalid("fit regimes are swapped"));
        }
        Ok(())
    }
}

fn decide(v: f64, threshold: f64) -> Decision {
    if v > threshold {
        Decision::ForcedOscillation
    } else {
        Decision::LimitCycle
    }
}

/// Lower-loss regime; near-ties go to the forced fit.
pub fn select_regime(lc: &FitResult, forced: &FitResult, tie_tolerance: f64) -> Regime {
    let scale = lc.loss.max(forced.loss);
    if (lc.loss - forced.loss).abs() <= tie_tolerance * scale || forced.loss < lc.loss {
        Regime::Forced
    } else {
        Regime::LimitCycle
    }
}

pub fn classify(ts: &TimeSeries, cfg: &FitConfig, detrend: DetrendMode) -> Result<ClassificationReport> {
    classify_with(
        ts,
        &ClassifierConfig {
            fit: *cfg,
            detrend,
            ..ClassifierConfig::default()
        },
    )
}

pub fn classify_with(ts: &TimeSeries, cfg: &ClassifierConfig) -> Result<ClassificationReport> {
    cfg.validate()?;
    let pg = spectral::periodogram(ts, cfg.detrend)?;
    let omega_c = fitting::resolve_omega_c(&pg, &cfg.fit)?;
    let fit_cfg = FitConfig {
        omega_c: Some(omega_c),
        ..cfg.fit
    };
    let lc_fit = fitting::fit_limit_cycle(&pg, &fit_cfg)?;
    let forced_fit = fitting::fit_forced(&pg, &fit_cfg)?;
    let selected_regime = select_regime(&lc_fit, &forced_fit, cfg.fit.tie_tolerance);
    let selected = match selected_regime {
        Regime::LimitCycle => &lc_fit,
        Regime::Forced => &forced_fit,
    };
    let v = v_ps(&selected.params)?;

    let (kurtosis, kurtosis_flag) = match kurtosis_screen_with(ts, cfg.kurtosis_band) {
        Ok((k, flag)) => (Some(k), Some(flag)),
        Err(Error::TooShort { .. }) => (None, None),
        Err(e) => return Err(e),
    };

    Ok(ClassificationReport {
        v_ps: v,
        decision: decide(v, cfg.threshold),
        selected_regime,
        lc_fit,
        forced_fit,
        kurtosis,
        kurtosis_flag,
        window: (ts.t0, ts.t_end()),
        channel: ts.label.clone(),
        omega_c,
        config_echo: serde_json::to_value(cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vps_limit_cases() {
        let p = ModelParams {
            beta: 1.0,
            lambda: 0.5,
            alpha: 1.0,
            sigma1: 0.1,
            sigma2: 0.0,
        };
        assert_eq!(v_ps(&p).unwrap(), 0.0);
        let degenerate = ModelParams { sigma1: 0.0, ..p };
        assert!(matches!(v_ps(&degenerate), Err(Error::DegenerateSpectrum)));
        let line = ModelParams { sigma1: 0.0, sigma2: 0.1, ..p };
        assert_eq!(v_ps(&line).unwrap(), 1.0);
    }

    #[test]
    fn kurtosis_anchors() {
        let n = 10_000;
        let sine = TimeSeries::new(
            0.0,
            0.1,
            (0..n)
                .map(|i| (2.0 * std::f64::consts::PI * 25.0 * i as f64 / n as f64).sin())
                .collect(),
        )
        .unwrap();
        let (k, flag) = kurtosis_screen(&sine).unwrap();
        assert!((k + 1.5).abs() < 0.05, "{k}");
        assert_eq!(flag, KurtosisFlag::Pass);

        let constant = TimeSeries::new(0.0, 0.1, vec![2.5; 500]).unwrap();
        assert!(matches!(kurtosis_screen(&constant), Err(Error::ZeroVariance)));
        let short = TimeSeries::new(0.0, 0.1, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(kurtosis_screen(&short).is_err());
    }

    #[test]
    fn ties_go_to_forced() {
        let fit = |regime, loss| FitResult {
            params: ModelParams {
                beta: 1.0,
                lambda: 1.0,
                alpha: 1.0,
                sigma1: 0.1,
                sigma2: 0.1,
            },
            loss,
            regime,
            converged: true,
            start_index: 0,
        };
        let lc = fit(Regime::LimitCycle, 1.0);
        assert_eq!(select_regime(&lc, &fit(Regime::Forced, 1.0), 1e-12), Regime::Forced);
        assert_eq!(
            select_regime(&lc, &fit(Regime::Forced, 1.0 + 1e-13), 1e-12),
            Regime::Forced
        );
        assert_eq!(
            select_regime(&lc, &fit(Regime::Forced, 1.1), 1e-12),
            Regime::LimitCycle
        );
    }

    fn params() -> impl Strategy<Value = ModelParams> {
        (1e-2..1e4f64, 1e-2..3.0f64, 0.0..5.0f64, 1e-6..1.0f64, 0.0..1.0f64).prop_map(
            |(beta, lambda, alpha, sigma1, sigma2)| ModelParams {
                beta,
                lambda,
                alpha,
                sigma1,
                sigma2,
            },
        )
    }

    proptest! {
        #[test]
        fn vps_in_unit_interval(p in params()) {
            let v = v_ps(&p).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn vps_increases_with_white_noise(p in params(), f in 1.01..10.0f64) {
            let more_white = ModelParams { sigma2: p.sigma2 * f + 1e-9, ..p };
            prop_assert!(v_ps(&more_white).unwrap() >= v_ps(&p).unwrap());
        }

        // while the linewidth sigma1^2/lambda^2 stays below 2 alpha, i.e. the
        // spectrum still has a peak away from zero
        #[test]
        fn vps_decreases_with_phase_noise(
            p in params(),
            alpha in 0.05..5.0f64,
            r in 1e-3..1.0f64,
            f in 1.01..10.0f64,
        ) {
            let top = p.lambda * (2.0 * alpha).sqrt() * r;
            let base = ModelParams { alpha, sigma1: top / f, ..p };
            let more_phase = ModelParams { sigma1: top, ..base };
            prop_assert!(v_ps(&more_phase).unwrap() <= v_ps(&base).unwrap());
        }
    }
}
