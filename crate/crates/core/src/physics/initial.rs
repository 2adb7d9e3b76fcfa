use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Which concentration a field refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    U,
    V,
}

/// Smooth perturbation of the homogeneous state `(U, V) = (1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConditionConfig {
    /// Standard deviation of each perturbation field.
    pub sigma_init: f64,
    /// Highest spatial frequency of the noise, in cycles per unit length.
    pub cutoff: f64,
    /// Random Fourier modes per species.
    pub n_modes: usize,
    pub seed: u64,
    /// Overlay a square patch with `U = 0.5, V = 0.25`.
    pub seed_square: bool,
    pub square_center: [f64; 2],
    pub square_size: f64,
    /// Width of the tanh ramp at the patch edges.
    pub square_edge: f64,
}

impl Default for InitialConditionConfig {
    fn default() -> Self {
        Self {
            sigma_init: 0.01,
            cutoff: 16.0,
            n_modes: 256,
            seed: 7,
            seed_square: true,
            square_center: [0.5, 0.5],
            square_size: 0.1,
            square_edge: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Mode {
    k: [f64; 2],
    phase: f64,
}

/// A realized initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    config: InitialConditionConfig,
    modes_u: Vec<Mode>,
    modes_v: Vec<Mode>,
}

fn draw_modes(rng: &mut ChaCha8Rng, n: usize, cutoff: f64) -> Vec<Mode> {
    (0..n)
        .map(|_| {
            let f = loop {
                let f = [rng.random_range(-cutoff..=cutoff), rng.random_range(-cutoff..=cutoff)];
                if f[0] * f[0] + f[1] * f[1] <= cutoff * cutoff {
                    break f;
                }
            };
            Mode {
                k: [2.0 * PI * f[0], 2.0 * PI * f[1]],
                phase: rng.random_range(0.0..2.0 * PI),
            }
        })
        .collect()
}

impl InitialCondition {
    pub fn new(config: InitialConditionConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let modes_u = draw_modes(&mut rng, config.n_modes, config.cutoff);
        let modes_v = draw_modes(&mut rng, config.n_modes, config.cutoff);
        Self {
            config,
            modes_u,
            modes_v,
        }
    }

    pub fn config(&self) -> &InitialConditionConfig {
        &self.config
    }

    fn noise(&self, modes: &[Mode], u: f64, v: f64) -> f64 {
        if modes.is_empty() || self.config.sigma_init == 0.0 {
            return 0.0;
        }
        let amp = self.config.sigma_init * (2.0 / modes.len() as f64).sqrt();
        amp * modes
            .iter()
            .map(|m| (m.k[0] * u + m.k[1] * v + m.phase).cos())
            .sum::<f64>()
    }

    /// Indicator of the seed patch, smoothed by tanh ramps.
    pub fn square_mask(&self, u: f64, v: f64) -> f64 {
        if !self.config.seed_square {
            return 0.0;
        }
        let c = &self.config;
        let half = 0.5 * c.square_size;
        let w = c.square_edge.max(1e-12);
        let bump = |d: f64| 0.5 * (((d + half) / w).tanh() - ((d - half) / w).tanh());
        bump(u - c.square_center[0]) * bump(v - c.square_center[1])
    }

    /// `U(ξ,0) = 1 − U_pert` in `[0.5, 1]` and `V(ξ,0) = V_pert` in `[0, 0.5]`.
    pub fn value(&self, species: Species, u: f64, v: f64) -> f64 {
        let mask = self.square_mask(u, v);
        match species {
            Species::U => {
                let base = 1.0 - self.noise(&self.modes_u, u, v);
                ((1.0 - mask) * base + mask * 0.5).clamp(0.5, 1.0)
            }
            Species::V => {
                let base = self.noise(&self.modes_v, u, v);
                ((1.0 - mask) * base + mask * 0.25).clamp(0.0, 0.5)
            }
        }
    }

    pub fn pair(&self, u: f64, v: f64) -> (f64, f64) {
        (self.value(Species::U, u, v), self.value(Species::V, u, v))
    }
}

/// One-shot evaluation; prefer [`InitialCondition`] for many points.
pub fn initial_field(species: Species, u: f64, v: f64, config: &InitialConditionConfig) -> f64 {
    InitialCondition::new(*config).value(species, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_square() -> InitialConditionConfig {
        InitialConditionConfig {
            seed_square: false,
            ..InitialConditionConfig::default()
        }
    }

    #[test]
    fn zero_sigma_is_steady_state() {
        let ic = InitialCondition::new(InitialConditionConfig {
            sigma_init: 0.0,
            ..no_square()
        });
        for (u, v) in [(0.1, 0.2), (0.5, 0.5), (1.0, 0.0)] {
            assert_eq!(ic.pair(u, v), (1.0, 0.0));
        }
    }

    #[test]
    fn deterministic() {
        let cfg = InitialConditionConfig::default();
        assert_eq!(
            initial_field(Species::V, 0.3, 0.8, &cfg),
            initial_field(Species::V, 0.3, 0.8, &cfg)
        );
    }

    #[test]
    fn noise_statistics() {
        let ic = InitialCondition::new(no_square());
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 10_000;
        let vals: Vec<f64> = (0..n)
            .map(|_| ic.value(Species::U, rng.random(), rng.random()))
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let std = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
        assert!((std / 0.01 - 1.0).abs() < 0.5, "std {std}");
        assert!(vals.iter().all(|&x| (0.5..=1.0).contains(&x)));
    }

    #[test]
    fn seed_square_sets_patch_values() {
        let ic = InitialCondition::new(InitialConditionConfig {
            sigma_init: 0.0,
            ..InitialConditionConfig::default()
        });
        let (u, v) = ic.pair(0.5, 0.5);
        assert!((u - 0.5).abs() < 1e-3 && (v - 0.25).abs() < 1e-3);
        assert_eq!(ic.pair(0.1, 0.1), (1.0, 0.0));
    }
}
