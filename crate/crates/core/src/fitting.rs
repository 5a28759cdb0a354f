//! Constrained fits of the unified model to a sample periodogram.
//!
//! Two constraint regimes are fitted. The limit-cycle regime pins the white
//! noise `sigma2` at `epsilon` and keeps `beta` above `big_m`, leaving the
//! oscillation free to decohere. The forced regime pins the phase noise
//! `sigma1` at `epsilon` and ties `sigma2 / beta` to the low-frequency level of
//! the periodogram. Each fit is a Nelder–Mead search in log coordinates,
//! repeated from perturbed starting points.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::spectral::{self, ModelParams, Periodogram, PeriodogramModel};

/// Which spectrum of the model is compared against the periodogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumModel {
    /// The spectral density `psd_x` sampled at the bin frequencies.
    Density,
    /// The mean of the periodogram of a record of the same length and sampling,
    /// which also represents noiseless spectral lines.
    #[default]
    ExpectedPeriodogram,
}

impl FromStr for SpectrumModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "density" => Ok(SpectrumModel::Density),
            "expected_periodogram" | "expected" => Ok(SpectrumModel::ExpectedPeriodogram),
            other => Err(Error::Parse(format!(
                "unknown spectrum model `{other}` (expected density or expected_periodogram)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LimitCycle,
    Forced,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::LimitCycle => "limit_cycle",
            Regime::Forced => "forced",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Upper end of the fitted band in rad/s. `None` picks four times the
    /// peak frequency, capped at Nyquist.
    pub omega_c: Option<f64>,
    pub epsilon: f64,
    pub big_m: f64,
    pub n_starts: usize,
    pub max_iters: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    pub seed: u64,
    /// Positive-frequency bins averaged for the low-frequency level.
    pub n_dc: usize,
    /// Relative loss difference below which the two regimes count as tied.
    pub tie_tolerance: f64,
    pub spectrum_model: SpectrumModel,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            omega_c: None,
            epsilon: 1e-5,
            big_m: 1000.0,
            n_starts: 16,
            max_iters: 2000,
            x_tol: 1e-8,
            f_tol: 1e-10,
            seed: 0,
            n_dc: 3,
            tie_tolerance: 1e-12,
            spectrum_model: SpectrumModel::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.omega_c {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::invalid(format!("omega_c must be positive, got {w}")));
            }
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.big_m > 0.0) || !self.big_m.is_finite() {
            return Err(Error::invalid(format!("big_m must be positive, got {}", self.big_m)));
        }
        if self.n_starts == 0 {
            return Err(Error::invalid("n_starts must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if self.n_dc == 0 {
            return Err(Error::invalid("n_dc must be at least 1"));
        }
        for (name, v) in [
            ("x_tol", self.x_tol),
            ("f_tol", self.f_tol),
            ("tie_tolerance", self.tie_tolerance),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "FitRecord", try_from = "FitRecord")]
pub struct FitResult {
    pub params: ModelParams,
    pub loss: f64,
    pub regime: Regime,
    pub converged: bool,
    pub start_index: usize,
}

/// Flat wire form of [`FitResult`].
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitRecord {
    regime: Regime,
    loss: f64,
    beta: f64,
    lambda: f64,
    alpha: f64,
    sigma1: f64,
    sigma2: f64,
    converged: bool,
    start_index: usize,
}

impl From<FitResult> for FitRecord {
    fn from(r: FitResult) -> Self {
        Self {
            regime: r.regime,
            loss: r.loss,
            beta: r.params.beta,
            lambda: r.params.lambda,
            alpha: r.params.alpha,
            sigma1: r.params.sigma1,
            sigma2: r.params.sigma2,
            converged: r.converged,
            start_index: r.start_index,
        }
    }
}

impl TryFrom<FitRecord> for FitResult {
    type Error = Error;

    fn try_from(r: FitRecord) -> Result<Self> {
        let params = ModelParams {
            beta: r.beta,
            lambda: r.lambda,
            alpha: r.alpha,
            sigma1: r.sigma1,
            sigma2: r.sigma2,
        };
        params.validate()?;
        if !(r.loss >= 0.0) {
            return Err(Error::invalid(format!("loss must be non-negative, got {}", r.loss)));
        }
        Ok(Self {
            params,
            loss: r.loss,
            regime: r.regime,
            converged: r.converged,
            start_index: r.start_index,
        })
    }
}

/// Model power at bins `0..=k_max` of the periodogram's grid.
pub fn model_power(
    pg: &Periodogram,
    params: &ModelParams,
    model: SpectrumModel,
    k_max: usize,
) -> Result<Vec<f64>> {
    spectral::check_params(params)?;
    if k_max >= pg.len() {
        return Err(Error::invalid(format!("bin {k_max} is outside the periodogram")));
    }
    Ok(match model {
        SpectrumModel::Density => pg.omega[..=k_max]
            .iter()
            .map(|&w| spectral::psd_x_unchecked(params, w))
            .collect(),
        SpectrumModel::ExpectedPeriodogram => {
            PeriodogramModel::new(pg.n_samples, pg.dt, k_max)?.evaluate(params)
        }
    })
}

fn check_omega_c(pg: &Periodogram, omega_c: f64) -> Result<usize> {
    if !(omega_c > 0.0) || !omega_c.is_finite() {
        return Err(Error::invalid(format!("omega_c must be positive, got {omega_c}")));
    }
    let nyquist = pg.nyquist();
    if omega_c > nyquist * (1.0 + 1e-9) {
        return Err(Error::OmegaCExceedsGrid { omega_c, nyquist });
    }
    let k_max = pg.last_bin_at_or_below(omega_c);
    if k_max < first_bin(pg) + 1 {
        return Err(Error::invalid(format!(
            "omega_c = {omega_c} leaves fewer than two bins to fit"
        )));
    }
    Ok(k_max)
}

fn first_bin(pg: &Periodogram) -> usize {
    usize::from(pg.detrend_mode.removes_mean())
}

/// Trapezoid rule for `int (P(w) - model(w))^2 dw` over the grid bins in
/// `[0, omega_c]`, skipping the zero-frequency bin when detrending emptied it.
pub fn loss(pg: &Periodogram, params: &ModelParams, omega_c: f64, model: SpectrumModel) -> Result<f64> {
    let k_max = check_omega_c(pg, omega_c)?;
    let m = model_power(pg, params, model, k_max)?;
    Ok(trapezoid_sq(&pg.power, &m, first_bin(pg), k_max, pg.delta_omega()))
}

fn trapezoid_sq(data: &[f64], model: &[f64], k0: usize, k_max: usize, d_omega: f64) -> f64 {
    let sq = |k: usize| {
        let d = data[k] - model[k];
        d * d
    };
    let interior: f64 = (k0..=k_max).map(sq).sum();
    d_omega * (interior - 0.5 * (sq(k0) + sq(k_max)))
}

/// Upper end of the fitted band actually used for `cfg`.
pub fn resolve_omega_c(pg: &Periodogram, cfg: &FitConfig) -> Result<f64> {
    match cfg.omega_c {
        Some(w) => {
            check_omega_c(pg, w)?;
            Ok(w)
        }
        None => {
            let peak = find_peak(pg)?;
            let w = (4.0 * peak.omega).min(pg.nyquist());
            check_omega_c(pg, w)?;
            Ok(w)
        }
    }
}

/// Mean of the first `n_dc` positive-frequency bins.
pub fn dc_level(pg: &Periodogram, n_dc: usize) -> Result<f64> {
    let n = n_dc.min(pg.len() - 1);
    if n == 0 {
        return Err(Error::invalid("periodogram has no positive-frequency bins"));
    }
    let level = pg.power[1..=n].iter().sum::<f64>() / n as f64;
    if !(level > 0.0) {
        return Err(Error::NonPositiveDc(level));
    }
    Ok(level)
}

/// Dominant interior peak of a periodogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub bin: usize,
    pub omega: f64,
    pub power: f64,
    /// Half width at half maximum in rad/s, at least half a bin.
    pub half_width: f64,
}

/// Locates the highest interior bin. Fails with "no oscillatory peak" when
/// the locally averaged spectrum never rises to twice its median.
pub fn find_peak(pg: &Periodogram) -> Result<Peak> {
    let n = pg.len();
    if n < 3 {
        return Err(Error::NoOscillatoryPeak);
    }
    let positive = &pg.power[1..];
    let h = (positive.len() / 100).max(8);
    let smooth = moving_average(positive, h);
    let mut sorted = smooth.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let top = sorted[sorted.len() - 1];
    if !(top >= 2.0 * median) || top <= 0.0 {
        return Err(Error::NoOscillatoryPeak);
    }

    // interior bins 1..n-1; first maximum wins, so ties go to the lower frequency
    let mut bin = 1;
    for k in 2..n - 1 {
        if pg.power[k] > pg.power[bin] {
            bin = k;
        }
    }
    let power = pg.power[bin];
    let half = 0.5 * power;
    let mut lo = bin;
    while lo > 1 && pg.power[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = bin;
    while hi + 1 < n && pg.power[hi + 1] >= half {
        hi += 1;
    }
    let d_omega = pg.delta_omega();
    let half_width = ((hi - lo + 1) as f64 * 0.5 * d_omega).max(0.5 * d_omega);
    Ok(Peak {
        bin,
        omega: pg.omega[bin],
        power,
        half_width,
    })
}

fn moving_average(x: &[f64], h: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Quantities that shape a regime's search space.
#[derive(Debug, Clone, Copy)]
struct Frame {
    regime: Regime,
    epsilon: f64,
    big_m: f64,
    /// Narrowest resolvable linewidth (one bin).
    width_floor: f64,
    /// Low-frequency periodogram level.
    dc: f64,
}

const U_BOUND: f64 = 30.0;

impl Frame {
    fn new(pg: &Periodogram, regime: Regime, cfg: &FitConfig) -> Result<Self> {
        Ok(Self {
            regime,
            epsilon: cfg.epsilon,
            big_m: cfg.big_m,
            width_floor: pg.delta_omega(),
            dc: match regime {
                Regime::Forced => dc_level(pg, cfg.n_dc)?,
                Regime::LimitCycle => 0.0,
            },
        })
    }

    fn dim(&self) -> usize {
        match self.regime {
            Regime::LimitCycle => 4,
            Regime::Forced => 3,
        }
    }

    fn params(&self, u: &[f64]) -> ModelParams {
        let e = |i: usize| u[i].clamp(-U_BOUND, U_BOUND).exp();
        let lambda = e(0);
        let alpha = e(1);
        match self.regime {
            Regime::LimitCycle => {
                let s = self.width_floor + e(2);
                ModelParams {
                    beta: self.big_m * (1.0 + e(3)),
                    lambda,
                    alpha,
                    sigma1: lambda * s.sqrt(),
                    sigma2: self.epsilon,
                }
            }
            Regime::Forced => {
                // coordinate 0 is the amplitude after the low-pass filter
                let beta = e(2);
                ModelParams {
                    beta,
                    lambda: lambda * (1.0 + (alpha / beta).powi(2)).sqrt(),
                    alpha,
                    sigma1: self.epsilon,
                    sigma2: beta * self.dc.sqrt(),
                }
            }
        }
    }

    fn coords(&self, p: &ModelParams) -> Vec<f64> {
        let ln = |v: f64| v.max(f64::MIN_POSITIVE).ln().clamp(-U_BOUND, U_BOUND);
        let mut u = vec![ln(p.lambda), ln(p.alpha)];
        if self.regime == Regime::Forced {
            u[0] = ln(p.lambda / (1.0 + (p.alpha / p.beta).powi(2)).sqrt());
        }
        match self.regime {
            Regime::LimitCycle => {
                let s = (p.sigma1 / p.lambda).powi(2);
                u.push(ln((s - self.width_floor).max(1e-3 * self.width_floor)));
                u.push(ln((p.beta / self.big_m - 1.0).max(1e-3)));
            }
            Regime::Forced => u.push(ln(p.beta)),
        }
        u
    }
}

/// Starting parameters for a regime, read off the dominant peak.
pub fn init_params(pg: &Periodogram, regime: Regime, cfg: &FitConfig) -> Result<ModelParams> {
    cfg.validate()?;
    let peak = find_peak(pg)?;
    let frame = Frame::new(pg, regime, cfg)?;
    Ok(initial_guess(pg, &peak, &frame))
}

fn initial_guess(pg: &Periodogram, peak: &Peak, frame: &Frame) -> ModelParams {
    let alpha = peak.omega;
    match frame.regime {
        Regime::LimitCycle => {
            // peak height of a Lorentzian line of width s is about lambda^2 / s
            let s = (2.0 * peak.half_width).max(2.0 * frame.width_floor);
            let lambda = (peak.power * s).sqrt();
            ModelParams {
                beta: 2.0 * frame.big_m,
                lambda,
                alpha,
                sigma1: lambda * s.sqrt(),
                sigma2: frame.epsilon,
            }
        }
        Regime::Forced => {
            // a line of amplitude lambda filtered by beta puts about
            // (N dt / 4) lambda^2 beta^2 / (beta^2 + alpha^2) into its bin
            let beta = 0.3 * alpha;
            let gain = beta * beta / (beta * beta + alpha * alpha);
            let record = pg.n_samples as f64 * pg.dt;
            let lambda = (4.0 * peak.power / (record * gain)).sqrt();
            ModelParams {
                beta,
                lambda,
                alpha,
                sigma1: frame.epsilon,
                sigma2: beta * frame.dc.sqrt(),
            }
        }
    }
}

struct Objective<'a> {
    data: &'a [f64],
    k0: usize,
    k_max: usize,
    d_omega: f64,
    omega: &'a [f64],
    expected: Option<&'a PeriodogramModel>,
    buf: Vec<f64>,
}

impl Objective<'_> {
    fn value(&mut self, p: &ModelParams) -> f64 {
        if p.validate().is_err() {
            return f64::INFINITY;
        }
        match self.expected {
            Some(model) => model.evaluate_into(p, &mut self.buf),
            None => {
                for (slot, &w) in self.buf.iter_mut().zip(self.omega) {
                    *slot = spectral::psd_x_unchecked(p, w);
                }
            }
        }
        trapezoid_sq(self.data, &self.buf, self.k0, self.k_max, self.d_omega)
    }
}

const PERTURB: f64 = 3.0;

/// Start 0 is the initial guess; start `i` draws from its own stream of `cfg.seed`.
/// `alpha` moves by up to three peak half-widths, the other coordinates by up to
/// a factor of three.
fn start_coords(frame: &Frame, peak: &Peak, u_base: &[f64], cfg: &FitConfig) -> Vec<Vec<f64>> {
    let stream_offset = match frame.regime {
        Regime::LimitCycle => 0,
        Regime::Forced => 1,
    };
    (0..cfg.n_starts)
        .map(|i| {
            let mut u0 = u_base.to_vec();
            if i > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(2 * i as u64 + stream_offset);
                let spread = PERTURB.ln();
                for (j, u) in u0.iter_mut().enumerate() {
                    if j == 1 {
                        let shift = rng.random_range(-3.0..=3.0) * peak.half_width;
                        *u = (peak.omega + shift).max(0.5 * peak.half_width).ln();
                    } else {
                        *u += rng.random_range(-spread..=spread);
                    }
                }
            }
            u0
        })
        .collect()
}

/// Parameters at each multistart starting point, in start order.
pub fn start_params(pg: &Periodogram, regime: Regime, cfg: &FitConfig) -> Result<Vec<ModelParams>> {
    cfg.validate()?;
    let peak = find_peak(pg)?;
    let frame = Frame::new(pg, regime, cfg)?;
    let u_base = frame.coords(&initial_guess(pg, &peak, &frame));
    Ok(start_coords(&frame, &peak, &u_base, cfg)
        .iter()
        .map(|u| frame.params(u))
        .collect())
}

/// Fits `regime` to the periodogram.
pub fn fit(pg: &Periodogram, regime: Regime, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let omega_c = resolve_omega_c(pg, cfg)?;
    let k_max = check_omega_c(pg, omega_c)?;
    let k0 = first_bin(pg);
    let peak = find_peak(pg)?;
    let frame = Frame::new(pg, regime, cfg)?;
    let base = initial_guess(pg, &peak, &frame);
    let u_base = frame.coords(&base);

    let expected = match cfg.spectrum_model {
        SpectrumModel::ExpectedPeriodogram => Some(PeriodogramModel::new(pg.n_samples, pg.dt, k_max)?),
        SpectrumModel::Density => None,
    };
    let new_objective = || Objective {
        data: &pg.power,
        k0,
        k_max,
        d_omega: pg.delta_omega(),
        omega: &pg.omega[..=k_max],
        expected: expected.as_ref(),
        buf: vec![0.0; k_max + 1],
    };

    // alpha moves by a few peak widths, everything else by a factor of ~1.6
    let alpha_step = (1.0 + 3.0 * peak.half_width / peak.omega).ln();
    let mut steps = vec![0.5; frame.dim()];
    steps[1] = alpha_step;
    let opts = NelderMeadOptions {
        max_iters: cfg.max_iters,
        x_tol: cfg.x_tol,
        f_tol: cfg.f_tol,
        restarts: 1,
    };
    let starts = start_coords(&frame, &peak, &u_base, cfg);
    let runs: Vec<(usize, f64, Vec<f64>, bool)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, u0)| {
            let mut objective = new_objective();
            let m = nelder_mead(|u| objective.value(&frame.params(u)), &u0, &steps, &opts);
            (i, m.f, m.x, m.converged)
        })
        .collect();

    let any_converged = runs.iter().any(|r| r.3);
    let (start_index, loss, u, _) = runs
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("at least one start");
    if !loss.is_finite() {
        return Err(Error::invalid(format!("{regime} fit produced no finite loss")));
    }
    Ok(FitResult {
        params: frame.params(&u),
        loss,
        regime,
        converged: any_converged,
        start_index,
    })
}

pub fn fit_limit_cycle(pg: &Periodogram, cfg: &FitConfig) -> Result<FitResult> {
    fit(pg, Regime::LimitCycle, cfg)
}

pub fn fit_forced(pg: &Periodogram, cfg: &FitConfig) -> Result<FitResult> {
    fit(pg, Regime::Forced, cfg)
}
