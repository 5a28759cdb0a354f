#![allow(dead_code)]

use oscmech::classifier::Decision;
use oscmech::sim::{simulate_forced, simulate_hopf, ForcedConfig, HopfConfig};
use oscmech::{TimeGrid, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CORPUS_SIZE: usize = 100;
pub const NEAR_RESONANCE: std::ops::Range<usize> = 50..65;

/// Observation grid of every corpus series.
pub const OBS_DT: f64 = 0.1;
pub const DURATION: f64 = 5000.0;
/// Integration runs this many substeps per observation.
pub const OVERSAMPLE: usize = 10;

#[derive(Debug, Clone, Copy)]
pub enum Mechanism {
    Hopf(HopfConfig),
    Forced(ForcedConfig),
}

#[derive(Debug, Clone, Copy)]
pub struct Case {
    pub index: usize,
    pub mechanism: Mechanism,
    pub seed: u64,
}

impl Case {
    pub fn truth(&self) -> Decision {
        match self.mechanism {
            Mechanism::Hopf(_) => Decision::LimitCycle,
            Mechanism::Forced(_) => Decision::ForcedOscillation,
        }
    }

    /// First channel, integrated finely and sampled on the observation grid.
    pub fn series(&self) -> TimeSeries {
        let grid = TimeGrid::from_duration(OBS_DT / OVERSAMPLE as f64, DURATION, 0).unwrap();
        let fine = match &self.mechanism {
            Mechanism::Hopf(c) => simulate_hopf(c, &grid, self.seed),
            Mechanism::Forced(c) => simulate_forced(c, &grid, self.seed),
        }
        .unwrap()
        .channel(0)
        .unwrap();
        let coarse = fine.values.iter().step_by(OVERSAMPLE).copied().collect();
        TimeSeries::new(fine.t0, OBS_DT, coarse).unwrap()
    }
}

/// 50 Hopf then 50 forced cases, parameters log-uniform within a factor of two of
/// the reference values; cases 50..65 force within 25% of the natural frequency.
pub fn corpus() -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let around = |c: f64, rng: &mut ChaCha8Rng| c * 2f64.powf(rng.random_range(-1.0..=1.0));
    (0..CORPUS_SIZE)
        .map(|i| {
            let mechanism = if i < 50 {
                Mechanism::Hopf(HopfConfig {
                    gamma: around(0.25, &mut rng),
                    omega_h: around(0.75, &mut rng),
                    sigma: around(0.05, &mut rng),
                })
            } else {
                let gamma = -around(0.15, &mut rng);
                let omega0 = around(0.75, &mut rng);
                let forcing_omega = if NEAR_RESONANCE.contains(&i) {
                    omega0 * (1.0 + rng.random_range(-0.25..=0.25))
                } else {
                    around(0.94, &mut rng)
                };
                Mechanism::Forced(ForcedConfig {
                    gamma,
                    omega0,
                    forcing_omega,
                    forcing_amplitude: around(0.05, &mut rng),
                    sigma: around(0.02, &mut rng),
                })
            };
            Case {
                index: i,
                mechanism,
                seed: 1000 + i as u64,
            }
        })
        .collect()
}
