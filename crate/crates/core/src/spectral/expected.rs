//! Mean of the finite-record periodogram under the unified model.
//!
//! The autocovariance of `x` is a short sum of (complex) exponentials, so
//! `E[I_k] = dt * sum_{|m|<N} (1 - |m|/N) R(m dt) e^{-i theta_k m}` has a closed
//! form per exponential. Unlike the spectral density itself, this stays finite
//! and informative when the oscillation is a pure line (`sigma1 = 0`): the line
//! shows up as its Fejér pattern on the grid, exactly as in a sample
//! periodogram.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::ModelParams;
use crate::error::{Error, Result};

const SMALL_GAP: f64 = 1e-3;

/// One exponential `Re[coef * e^{rate |tau|}]` of the autocovariance.
#[derive(Debug, Clone, Copy)]
struct Pole {
    coef: Complex64,
    rate: Complex64,
}

/// Exponential expansion of the autocovariance of `x`.
fn poles(p: &ModelParams) -> (Vec<Pole>, f64) {
    let (s1, s2) = p.widths();
    let (w1, w2) = p.weights();
    // (amplitude of cos(alpha tau) e^{-a|tau|}, a) per Lorentzian pair
    let terms = [(w1 / 2.0, s1 / 2.0), (w2 / 2.0, s2 / 2.0)];

    let mut beta = p.beta;
    let near_resonant = |b: f64| {
        terms.iter().any(|&(c, a)| {
            c != 0.0 && p.alpha.abs() <= 1e-9 * b && (a - b).abs() <= 1e-9 * b
        })
    };
    if near_resonant(beta) {
        beta *= 1.0 + 1e-7;
    }

    let b2 = beta * beta;
    let mut real_coef = p.sigma2 * p.sigma2 / (2.0 * beta);
    let mut out = Vec::with_capacity(3);
    for (c, a) in terms {
        if c == 0.0 {
            continue;
        }
        let w = Complex64::new(-a, p.alpha);
        let den = b2 - w * w;
        out.push(Pole {
            coef: c * b2 / den,
            rate: w,
        });
        real_coef += c * (beta * w / den).re;
    }
    out.push(Pole {
        coef: Complex64::new(real_coef, 0.0),
        rate: Complex64::new(-beta, 0.0),
    });
    (out, beta)
}

/// Autocovariance `E[x(t) x(t + tau)]` of the stationary model.
pub fn autocovariance(params: &ModelParams, tau: f64) -> Result<f64> {
    super::check_params(params)?;
    let (poles, _) = poles(params);
    let t = tau.abs();
    Ok(poles.iter().map(|p| (p.coef * (p.rate * t).exp()).re).sum())
}

/// `e^v - 1` without cancellation near `v = 0`.
fn expm1c(v: Complex64) -> Complex64 {
    let (s, c) = v.im.sin_cos();
    let half = (0.5 * v.im).sin();
    Complex64::new(v.re.exp_m1() * c - 2.0 * half * half, v.re.exp() * s)
}

fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Closed-form evaluator of the expected periodogram on a fixed grid
/// (`n_samples`, `dt`, bins `0..=k_max`).
#[derive(Debug, Clone)]
pub struct PeriodogramModel {
    n: usize,
    dt: f64,
    phasors: Vec<Complex64>,
    // (N+1)/2, (N^2-1)/6, N(N^2-1)/12: moments of the Fejér weights
    m: [f64; 3],
}

impl PeriodogramModel {
    pub fn new(n_samples: usize, dt: f64, k_max: usize) -> Result<Self> {
        if n_samples < 2 {
            return Err(Error::TooShort {
                len: n_samples,
                min: 2,
            });
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if k_max > n_samples / 2 {
            return Err(Error::invalid(format!(
                "bin {k_max} lies beyond Nyquist for {n_samples} samples"
            )));
        }
        let phasors = (0..=k_max)
            .map(|k| {
                let (s, c) = (2.0 * PI * k as f64 / n_samples as f64).sin_cos();
                Complex64::new(c, s)
            })
            .collect();
        let nf = n_samples as f64;
        Ok(Self {
            n: n_samples,
            dt,
            phasors,
            m: [
                (nf + 1.0) / 2.0,
                (nf * nf - 1.0) / 6.0,
                nf * (nf * nf - 1.0) / 12.0,
            ],
        })
    }

    pub fn n_bins(&self) -> usize {
        self.phasors.len()
    }

    /// `sum_{m=0}^{N-1} (1 - m/N) u^m` for `u = z e^{i theta}`.
    #[inline]
    fn fejer_sum(&self, z: Complex64, log_z: Complex64, one_minus_zn: Complex64, ph: Complex64, theta: f64) -> Complex64 {
        let nf = self.n as f64;
        let u = z * ph;
        let mut omu = Complex64::new(1.0, 0.0) - u;
        if omu.norm_sqr() < SMALL_GAP * SMALL_GAP {
            let v = Complex64::new(log_z.re, wrap_phase(log_z.im + theta));
            if nf * v.norm() < SMALL_GAP {
                return self.m[0] + self.m[1] * v + self.m[2] * v * v * 0.5;
            }
            omu = -expm1c(v);
        }
        let inv = omu.inv();
        inv - u * one_minus_zn * inv * inv / nf
    }

    /// Writes `E[I_k]` for every bin of the grid into `out`.
    pub fn evaluate_into(&self, params: &ModelParams, out: &mut [f64]) {
        assert_eq!(out.len(), self.n_bins(), "output buffer does not match the grid");
        let (poles, _) = poles(params);
        let nf = self.n as f64;
        out.iter_mut().for_each(|v| *v = 0.0);
        for pole in &poles {
            let log_z = pole.rate * self.dt;
            let z = log_z.exp();
            let one_minus_zn = -expm1c(log_z * nf);
            let is_real = pole.coef.im == 0.0 && pole.rate.im == 0.0;
            for (k, (slot, ph)) in out.iter_mut().zip(&self.phasors).enumerate() {
                let theta = 2.0 * PI * k as f64 / nf;
                let g_plus = self.fejer_sum(z, log_z, one_minus_zn, *ph, theta);
                *slot += if is_real {
                    pole.coef.re * (2.0 * g_plus.re - 1.0)
                } else {
                    let g_minus = self.fejer_sum(z, log_z, one_minus_zn, ph.conj(), -theta);
                    (pole.coef * (g_plus + g_minus - 1.0)).re
                };
            }
        }
        out.iter_mut().for_each(|v| *v = (*v * self.dt).max(0.0));
    }

    pub fn evaluate(&self, params: &ModelParams) -> Vec<f64> {
        let mut out = vec![0.0; self.n_bins()];
        self.evaluate_into(params, &mut out);
        out
    }
}

/// Expected periodogram of an `n_samples`-long record at bins `0..=n_samples/2`.
pub fn expected_periodogram(params: &ModelParams, n_samples: usize, dt: f64) -> Result<Vec<f64>> {
    super::check_params(params)?;
    Ok(PeriodogramModel::new(n_samples, dt, n_samples / 2)?.evaluate(params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::psd_x;

    fn brute_force(p: &ModelParams, n: usize, dt: f64) -> Vec<f64> {
        (0..=n / 2)
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / n as f64;
                let mut acc = autocovariance(p, 0.0).unwrap();
                for m in 1..n {
                    let w = 1.0 - m as f64 / n as f64;
                    acc += 2.0 * w * autocovariance(p, m as f64 * dt).unwrap() * (theta * m as f64).cos();
                }
                acc * dt
            })
            .collect()
    }

    fn cases() -> Vec<ModelParams> {
        vec![
            ModelParams { beta: 1e4, lambda: 0.27, alpha: 0.75, sigma1: 0.15, sigma2: 0.0 },
            ModelParams { beta: 0.3, lambda: 0.6, alpha: 0.9, sigma1: 0.0, sigma2: 0.2 },
            ModelParams { beta: 0.28, lambda: 0.61, alpha: 0.94, sigma1: 1e-5, sigma2: 0.19 },
            ModelParams { beta: 2.0, lambda: 1.0, alpha: 0.0, sigma1: 0.5, sigma2: 0.1 },
            ModelParams { beta: 1.3, lambda: 0.4, alpha: 2.0, sigma1: 0.3, sigma2: 0.05 },
        ]
    }

    #[test]
    fn variance_matches_integrated_density() {
        for p in cases().into_iter().filter(|p| p.sigma1 > 1e-3) {
            // integrate psd_x over the real line after the substitution w = tan(u)
            let n = 2_000_000;
            let h = PI / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let u = -PI / 2.0 + (i as f64 + 0.5) * h;
                let w = u.tan();
                acc += psd_x(&p, w).unwrap() * (1.0 + w * w) * h;
            }
            let var = acc / (2.0 * PI);
            let r0 = autocovariance(&p, 0.0).unwrap();
            assert!((r0 / var - 1.0).abs() < 1e-6, "{p:?}: {r0} vs {var}");
        }
    }

    #[test]
    fn line_only_variance() {
        let p = ModelParams { beta: 0.3, lambda: 0.6, alpha: 0.9, sigma1: 0.0, sigma2: 0.0 };
        let gain = 0.09 / (0.09 + 0.81);
        let r0 = autocovariance(&p, 0.0).unwrap();
        assert!((r0 - 0.36 / 2.0 * gain).abs() < 1e-14);
        // the filtered line keeps oscillating forever
        let r = autocovariance(&p, 1000.0).unwrap();
        assert!((r - r0 * (0.9f64 * 1000.0).cos()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_direct_sum() {
        for p in cases() {
            for (n, dt) in [(64, 0.1), (101, 0.25), (256, 0.05)] {
                let fast = expected_periodogram(&p, n, dt).unwrap();
                let slow = brute_force(&p, n, dt);
                let scale = slow.iter().cloned().fold(0.0, f64::max);
                for (k, (a, b)) in fast.iter().zip(&slow).enumerate() {
                    assert!((a - b).abs() <= 1e-9 * scale, "{p:?} n={n} k={k}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn on_grid_line_concentrates_in_one_bin() {
        let (n, dt) = (1000, 0.1);
        let k0 = 50;
        let alpha = 2.0 * PI * k0 as f64 / (n as f64 * dt);
        let p = ModelParams { beta: 1e4, lambda: 1.0, alpha, sigma1: 0.0, sigma2: 0.0 };
        let e = expected_periodogram(&p, n, dt).unwrap();
        let peak = dt * n as f64 / 4.0;
        assert!((e[k0] / peak - 1.0).abs() < 1e-3, "{}", e[k0]);
        let off: f64 = e.iter().enumerate().filter(|(k, _)| *k != k0).map(|(_, v)| v).sum();
        assert!(off < 1e-3 * peak);
    }

    #[test]
    fn long_records_approach_the_density() {
        let p = ModelParams { beta: 1e4, lambda: 0.5, alpha: 0.75, sigma1: 0.2, sigma2: 0.0 };
        let (n, dt) = (40_000, 0.05);
        let e = expected_periodogram(&p, n, dt).unwrap();
        let dw = 2.0 * PI / (n as f64 * dt);
        for k in (1..n / 20).step_by(97) {
            let s = psd_x(&p, k as f64 * dw).unwrap();
            assert!((e[k] / s - 1.0).abs() < 0.02, "k={k}: {} vs {s}", e[k]);
        }
    }
}
