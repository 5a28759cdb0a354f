//! Euler–Maruyama integrators for the stochastic normal forms that generate
//! labeled synthetic data: a damped mode driven by a periodic force, a
//! supercritical Hopf oscillator, the one-dimensional unified process that
//! covers both, and a generic linear (vector Ornstein–Uhlenbeck) system.
//!
//! Every simulator is a pure function of `(config, grid, seed)`. Noise is drawn
//! from ChaCha8 streams keyed by the seed, so identical inputs give
//! bit-identical output.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{MultiSeries, TimeGrid, TimeSeries};
use crate::spectral::ModelParams;

/// `coefficient * dt` must stay below this for every explicit step.
pub const STEP_GUARD: f64 = 0.5;

/// Target `rate * h` used when the unified process picks its internal substep.
const UNIFIED_SUBSTEP_TARGET: f64 = 0.25;
const MAX_SUBSTEPS: usize = 100_000;

/// Damped planar mode `q' = [[g, -w0], [w0, g]] q + F (cos Wt, sin Wt) + sigma xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcedConfig {
    /// Damping, strictly negative.
    pub gamma: f64,
    /// Natural frequency of the mode, rad/s.
    pub omega0: f64,
    /// Forcing frequency, rad/s.
    #[serde(rename = "Omega")]
    pub forcing_omega: f64,
    /// Forcing amplitude.
    #[serde(rename = "F")]
    pub forcing_amplitude: f64,
    pub sigma: f64,
}

impl ForcedConfig {
    pub fn validate(&self) -> Result<()> {
        finite(&[
            ("gamma", self.gamma),
            ("omega0", self.omega0),
            ("Omega", self.forcing_omega),
            ("F", self.forcing_amplitude),
            ("sigma", self.sigma),
        ])?;
        if !(self.gamma < 0.0) {
            return Err(Error::invalid(format!(
                "forced mode requires gamma < 0, got {}",
                self.gamma
            )));
        }
        if !(self.omega0 > 0.0) {
            return Err(Error::invalid("omega0 must be positive"));
        }
        if self.forcing_omega < 0.0 || self.forcing_amplitude < 0.0 || self.sigma < 0.0 {
            return Err(Error::invalid("Omega, F and sigma must be non-negative"));
        }
        Ok(())
    }

    /// Steady-state amplitude of the first coordinate under noiseless forcing.
    pub fn response_amplitude(&self) -> f64 {
        let detune = self.forcing_omega - self.omega0;
        self.forcing_amplitude / (self.gamma * self.gamma + detune * detune).sqrt()
    }

    /// Unified-model parameters for this mechanism, with the decay rate taken as |gamma|.
    pub fn unified_params(&self) -> ModelParams {
        let g = self.gamma.abs();
        let w = self.forcing_omega;
        let detune = w - self.omega0;
        let lambda =
            self.forcing_amplitude / g * ((g * g + w * w) / (g * g + detune * detune)).sqrt();
        ModelParams {
            beta: g,
            lambda,
            alpha: w,
            sigma1: 0.0,
            sigma2: self.sigma,
        }
    }

    fn particular_solution(&self, t: f64) -> [f64; 2] {
        // z_p = F e^{i W t} / (-g + i (W - w0))
        let (re_d, im_d) = (-self.gamma, self.forcing_omega - self.omega0);
        let den = re_d * re_d + im_d * im_d;
        if den == 0.0 {
            return [0.0, 0.0];
        }
        let (c, s) = ((self.forcing_omega * t).cos(), (self.forcing_omega * t).sin());
        let f = self.forcing_amplitude;
        // (c + i s) * (re_d - i im_d) / den
        [f * (c * re_d + s * im_d) / den, f * (s * re_d - c * im_d) / den]
    }
}

/// Hopf normal form `q' = [[g, -wh], [wh, g]] q - |q|^2 q + sigma xi` with `g > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfConfig {
    pub gamma: f64,
    pub omega_h: f64,
    pub sigma: f64,
}

impl HopfConfig {
    pub fn validate(&self) -> Result<()> {
        finite(&[
            ("gamma", self.gamma),
            ("omega_h", self.omega_h),
            ("sigma", self.sigma),
        ])?;
        if !(self.gamma > 0.0) {
            return Err(Error::invalid(format!(
                "Hopf oscillator requires gamma > 0, got {}",
                self.gamma
            )));
        }
        if !(self.omega_h > 0.0) {
            return Err(Error::invalid("omega_h must be positive"));
        }
        if self.sigma < 0.0 {
            return Err(Error::invalid("sigma must be non-negative"));
        }
        Ok(())
    }

    /// Unified-model parameters with the (ideally infinite) tracking rate set to `beta`.
    pub fn unified_params(&self, beta: f64) -> ModelParams {
        ModelParams {
            beta,
            lambda: self.gamma.sqrt(),
            alpha: self.omega_h,
            sigma1: self.sigma,
            sigma2: 0.0,
        }
    }
}

/// Linear system `q' = A q + sigma B xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSdeConfig {
    pub drift_matrix: DMatrix<f64>,
    pub input_matrix: DMatrix<f64>,
    pub sigma: f64,
}

impl LinearSdeConfig {
    pub fn from_rows(drift: &[Vec<f64>], input: &[Vec<f64>], sigma: f64) -> Result<Self> {
        Ok(Self {
            drift_matrix: matrix_from_rows(drift, "drift matrix")?,
            input_matrix: matrix_from_rows(input, "input matrix")?,
            sigma,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.drift_matrix;
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "drift matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if self.input_matrix.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "input matrix has {} rows, drift dimension is {}",
                self.input_matrix.nrows(),
                a.nrows()
            )));
        }
        if a.iter().chain(self.input_matrix.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::invalid("sigma must be finite and non-negative"));
        }
        Ok(())
    }

    fn row_sum_bound(&self) -> f64 {
        self.drift_matrix
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!("{what} rows are ragged or empty")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn finite(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !v.is_finite() {
            return Err(Error::invalid(format!("{name} must be finite, got {v}")));
        }
    }
    Ok(())
}

fn guard(coefficient: f64, dt: f64) -> Result<()> {
    let product = coefficient.abs() * dt;
    if product >= STEP_GUARD {
        return Err(Error::StepTooLarge {
            coefficient: coefficient.abs(),
            product,
        });
    }
    Ok(())
}

/// The Euler map of `gamma + i*omega` scales the state by `|1 + (gamma + i*omega) dt|`,
/// which exceeds one for weak damping unless `dt < 2|gamma| / (gamma^2 + omega^2)`.
fn contraction_guard(gamma: f64, omega: f64, dt: f64) -> Result<()> {
    let limit = 2.0 * gamma.abs() / (gamma * gamma + omega * omega);
    if dt >= limit {
        return Err(Error::UnstableStep { dt, limit });
    }
    Ok(())
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[inline]
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn planar_output(grid: &TimeGrid, x: Vec<f64>, y: Vec<f64>) -> Result<MultiSeries> {
    MultiSeries::new(
        grid.time(grid.discard),
        grid.dt,
        vec!["x".into(), "y".into()],
        vec![x, y],
    )
}

/// Forced mode starting on the noiseless steady-state orbit.
pub fn simulate_forced(cfg: &ForcedConfig, grid: &TimeGrid, seed: u64) -> Result<MultiSeries> {
    simulate_forced_from(cfg, grid, seed, None)
}

pub fn simulate_forced_from(
    cfg: &ForcedConfig,
    grid: &TimeGrid,
    seed: u64,
    initial: Option<[f64; 2]>,
) -> Result<MultiSeries> {
    cfg.validate()?;
    grid.validate()?;
    guard(cfg.gamma, grid.dt)?;
    guard(cfg.omega0.max(cfg.forcing_omega), grid.dt)?;
    contraction_guard(cfg.gamma, cfg.omega0, grid.dt)?;

    let dt = grid.dt;
    let noise = cfg.sigma * dt.sqrt();
    let mut rng = stream(seed, 0);
    let [mut x, mut y] = initial.unwrap_or_else(|| cfg.particular_solution(grid.t0));
    let mut xs = Vec::with_capacity(grid.output_len());
    let mut ys = Vec::with_capacity(grid.output_len());

    for step in 0..grid.n_steps {
        if step >= grid.discard {
            xs.push(x);
            ys.push(y);
        }
        if step + 1 == grid.n_steps {
            break;
        }
        let t = grid.time(step);
        let (c, s) = ((cfg.forcing_omega * t).cos(), (cfg.forcing_omega * t).sin());
        let dx = cfg.gamma * x - cfg.omega0 * y + cfg.forcing_amplitude * c;
        let dy = cfg.omega0 * x + cfg.gamma * y + cfg.forcing_amplitude * s;
        let (n1, n2) = (normal(&mut rng), normal(&mut rng));
        x += dt * dx + noise * n1;
        y += dt * dy + noise * n2;
    }
    planar_output(grid, xs, ys)
}

/// Hopf oscillator starting on the deterministic limit cycle `(sqrt(gamma), 0)`.
pub fn simulate_hopf(cfg: &HopfConfig, grid: &TimeGrid, seed: u64) -> Result<MultiSeries> {
    simulate_hopf_from(cfg, grid, seed, None)
}

pub fn simulate_hopf_from(
    cfg: &HopfConfig,
    grid: &TimeGrid,
    seed: u64,
    initial: Option<[f64; 2]>,
) -> Result<MultiSeries> {
    cfg.validate()?;
    grid.validate()?;
    guard(cfg.gamma, grid.dt)?;
    guard(cfg.omega_h, grid.dt)?;

    let dt = grid.dt;
    let noise = cfg.sigma * dt.sqrt();
    let mut rng = stream(seed, 0);
    let [mut x, mut y] = initial.unwrap_or([cfg.gamma.sqrt(), 0.0]);
    let mut xs = Vec::with_capacity(grid.output_len());
    let mut ys = Vec::with_capacity(grid.output_len());

    for step in 0..grid.n_steps {
        if step >= grid.discard {
            xs.push(x);
            ys.push(y);
        }
        if step + 1 == grid.n_steps {
            break;
        }
        let r2 = x * x + y * y;
        let dx = (cfg.gamma - r2) * x - cfg.omega_h * y;
        let dy = cfg.omega_h * x + (cfg.gamma - r2) * y;
        let (n1, n2) = (normal(&mut rng), normal(&mut rng));
        x += dt * dx + noise * n1;
        y += dt * dy + noise * n2;
    }
    if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("Hopf trajectory diverged"));
    }
    planar_output(grid, xs, ys)
}

/// Number of internal Euler substeps per output sample for the unified process.
pub fn unified_substeps(params: &ModelParams, dt: f64) -> usize {
    let rate = params
        .beta
        .max(2.0 * params.lambda * params.lambda)
        .max(params.alpha);
    ((rate * dt / UNIFIED_SUBSTEP_TARGET).ceil() as usize).max(1)
}

/// Unified process `x' = -beta (x - Q) + sigma2 xi` with
/// `Q = (lambda + p) cos(phi)`, `p' = -2 lambda^2 p + sigma1 xi_p`,
/// `phi' = alpha + (sigma1 / lambda) xi_phi`.
///
/// `grid.dt` is the output sampling period. The integrator refines it
/// internally so that every rate times the substep stays at or below 0.25;
/// amplitude, phase and observation noise use three independent streams.
pub fn simulate_unified(params: &ModelParams, grid: &TimeGrid, seed: u64) -> Result<TimeSeries> {
    params.validate()?;
    grid.validate()?;
    if params.lambda == 0.0 && params.sigma1 > 0.0 {
        return Err(Error::invalid(
            "lambda = 0 with sigma1 > 0 leaves the phase diffusion undefined",
        ));
    }
    let n_sub = unified_substeps(params, grid.dt);
    if n_sub > MAX_SUBSTEPS {
        return Err(Error::StepTooLarge {
            coefficient: params.beta,
            product: params.beta * grid.dt,
        });
    }

    let h = grid.dt / n_sub as f64;
    let sqrt_h = h.sqrt();
    let amp_decay = 2.0 * params.lambda * params.lambda;
    let phase_noise = if params.sigma1 > 0.0 {
        params.sigma1 / params.lambda * sqrt_h
    } else {
        0.0
    };
    let amp_noise = params.sigma1 * sqrt_h;
    let obs_noise = params.sigma2 * sqrt_h;

    let mut amp_rng = stream(seed, 0);
    let mut phase_rng = stream(seed, 1);
    let mut obs_rng = stream(seed, 2);

    let mut p = 0.0;
    let mut phi = params.alpha * grid.t0;
    let mut x = params.lambda * phi.cos();
    let mut out = Vec::with_capacity(grid.output_len());

    for step in 0..grid.n_steps {
        if step >= grid.discard {
            out.push(x);
        }
        if step + 1 == grid.n_steps {
            break;
        }
        for _ in 0..n_sub {
            let q = (params.lambda + p) * phi.cos();
            let mut dx = -params.beta * (x - q) * h;
            if obs_noise > 0.0 {
                dx += obs_noise * normal(&mut obs_rng);
            }
            let mut dp = -amp_decay * p * h;
            let mut dphi = params.alpha * h;
            if params.sigma1 > 0.0 {
                dp += amp_noise * normal(&mut amp_rng);
                dphi += phase_noise * normal(&mut phase_rng);
            }
            x += dx;
            p += dp;
            phi += dphi;
        }
    }
    TimeSeries::new(grid.time(grid.discard), grid.dt, out)
}

/// Vector Ornstein–Uhlenbeck process from the origin.
pub fn simulate_vector_ou(cfg: &LinearSdeConfig, grid: &TimeGrid, seed: u64) -> Result<MultiSeries> {
    simulate_vector_ou_from(cfg, grid, seed, None)
}

pub fn simulate_vector_ou_from(
    cfg: &LinearSdeConfig,
    grid: &TimeGrid,
    seed: u64,
    initial: Option<&[f64]>,
) -> Result<MultiSeries> {
    cfg.validate()?;
    grid.validate()?;
    guard(cfg.row_sum_bound(), grid.dt)?;

    let n = cfg.drift_matrix.nrows();
    let m = cfg.input_matrix.ncols();
    let mut q = match initial {
        Some(init) if init.len() != n => {
            return Err(Error::DimensionMismatch(format!(
                "initial state has {} entries, system dimension is {n}",
                init.len()
            )))
        }
        Some(init) => DVector::from_column_slice(init),
        None => DVector::zeros(n),
    };

    let dt = grid.dt;
    let noise = cfg.sigma * dt.sqrt();
    let mut rng = stream(seed, 0);
    let mut xi = DVector::zeros(m);
    let mut channels = vec![Vec::with_capacity(grid.output_len()); n];

    for step in 0..grid.n_steps {
        if step >= grid.discard {
            for (c, v) in channels.iter_mut().zip(q.iter()) {
                c.push(*v);
            }
        }
        if step + 1 == grid.n_steps {
            break;
        }
        for v in xi.iter_mut() {
            *v = normal(&mut rng);
        }
        let drift = &cfg.drift_matrix * &q;
        let kick = &cfg.input_matrix * &xi;
        q += drift * dt + kick * noise;
    }
    if channels.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("linear SDE trajectory diverged"));
    }
    let names = (1..=n).map(|i| format!("q{i}")).collect();
    MultiSeries::new(grid.time(grid.discard), dt, names, channels)
}
