use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub(crate) const TWO_PI: f64 = 2.0 * PI;

/// Fixed random Fourier features `γ(x) = [cos 2πBx, sin 2πBx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierEmbedding {
    b: Vec<[f64; 3]>,
    sigma_scale: f64,
    seed: u64,
}

impl FourierEmbedding {
    /// Draw an `m × 3` frequency matrix with entries `N(0, sigma_scale²)`.
    pub fn new(m: usize, sigma_scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = if sigma_scale > 0.0 {
            let normal = Normal::new(0.0, sigma_scale).expect("finite scale");
            (0..m)
                .map(|_| std::array::from_fn(|_| normal.sample(&mut rng)))
                .collect()
        } else {
            vec![[0.0; 3]; m]
        };
        Self {
            b,
            sigma_scale,
            seed,
        }
    }

    /// Wrap an explicit frequency matrix.
    pub fn from_matrix(b: Vec<[f64; 3]>, sigma_scale: f64, seed: u64) -> Self {
        Self {
            b,
            sigma_scale,
            seed,
        }
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// Output dimension `2m`.
    pub fn dim(&self) -> usize {
        2 * self.b.len()
    }

    pub fn matrix(&self) -> &[[f64; 3]] {
        &self.b
    }

    pub fn sigma_scale(&self) -> f64 {
        self.sigma_scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Phase `2π B_k·x` of feature `k`.
    #[inline]
    pub(crate) fn phase(&self, k: usize, x: &[f64; 3]) -> f64 {
        let b = &self.b[k];
        TWO_PI * (b[0] * x[0] + b[1] * x[1] + b[2] * x[2])
    }

    pub fn embed(&self, x: [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.embed_into(&x, &mut out);
        out
    }

    /// Write `γ(x)` into `out[..2m]`.
    ///
    /// Kept out of line so that every caller sees the same instruction
    /// sequence and therefore bitwise identical features.
    #[inline(never)]
    pub fn embed_into(&self, x: &[f64; 3], out: &mut [f64]) {
        let m = self.m();
        for k in 0..m {
            let z = self.phase(k, x);
            out[k] = z.cos();
            out[m + k] = z.sin();
        }
    }
}
