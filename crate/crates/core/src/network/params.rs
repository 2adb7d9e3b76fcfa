use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::NetworkError;

/// Number of trainable parameters of a dense stack with the given widths.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Trainable weights of the MLP, stored as one flat vector.
///
/// Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs. Its weight
/// matrix is stored row-major (`n_out × n_in`) followed by its bias. A
/// transposed copy of every weight matrix is cached for the forward kernels
/// and refreshed by [`NetworkParams::update`].
#[derive(Debug, Clone)]
pub struct NetworkParams {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    flat: Vec<f64>,
    wt: Vec<Vec<f64>>,
}

impl PartialEq for NetworkParams {
    fn eq(&self, o: &Self) -> bool {
        self.sizes == o.sizes && self.flat == o.flat
    }
}

impl NetworkParams {
    pub fn zeros(sizes: &[usize]) -> Self {
        Self::from_flat(sizes, vec![0.0; param_count(sizes)]).expect("length matches")
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier(sizes: &[usize], seed: u64) -> Self {
        let mut p = Self::zeros(sizes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..p.n_layers() {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let a = (6.0 / (n_in + n_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-a, a).expect("finite bounds");
            let w = p.weight_range(l);
            for x in &mut p.flat[w] {
                *x = dist.sample(&mut rng);
            }
        }
        p.refresh();
        p
    }

    pub fn from_flat(sizes: &[usize], flat: Vec<f64>) -> Result<Self, NetworkError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NetworkError::InvalidConfig(format!(
                "layer sizes {sizes:?} must have at least two non-zero entries"
            )));
        }
        if flat.len() != param_count(sizes) {
            return Err(NetworkError::Corrupt(format!(
                "expected {} parameters, got {}",
                param_count(sizes),
                flat.len()
            )));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut off = 0;
        for w in sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut p = Self {
            sizes: sizes.to_vec(),
            offsets,
            flat,
            wt: Vec::new(),
        };
        p.refresh();
        Ok(p)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.flat
    }

    pub fn weight_range(&self, l: usize) -> Range<usize> {
        let o = self.offsets[l];
        o..o + self.sizes[l] * self.sizes[l + 1]
    }

    pub fn bias_range(&self, l: usize) -> Range<usize> {
        let w = self.weight_range(l);
        w.end..w.end + self.sizes[l + 1]
    }

    /// Row-major `n_out × n_in` weight matrix of layer `l`.
    pub fn weights(&self, l: usize) -> &[f64] {
        &self.flat[self.weight_range(l)]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        &self.flat[self.bias_range(l)]
    }

    /// Column-major (`n_in × n_out`) copy of the layer `l` weights.
    pub fn weights_t(&self, l: usize) -> &[f64] {
        &self.wt[l]
    }

    /// Mutate the flat parameter vector in place.
    pub fn update<R>(&mut self, f: impl FnOnce(&mut [f64]) -> R) -> R {
        let r = f(&mut self.flat);
        self.refresh();
        r
    }

    pub fn is_finite(&self) -> bool {
        self.flat.iter().all(|x| x.is_finite())
    }

    fn refresh(&mut self) {
        self.wt = (0..self.n_layers())
            .map(|l| {
                let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let w = &self.flat[self.weight_range(l)];
                let mut t = vec![0.0; n_in * n_out];
                for o in 0..n_out {
                    for k in 0..n_in {
                        t[k * n_out + o] = w[o * n_in + k];
                    }
                }
                t
            })
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_for_hand_computed_stacks() {
        assert_eq!(param_count(&[256, 128, 128, 128, 128, 2]), 82_690);
        assert_eq!(param_count(&[128, 64, 64, 64, 2]), 16_706);
        assert_eq!(param_count(&[2, 3, 1]), 2 * 3 + 3 + 3 + 1);
        assert_eq!(param_count(&[10, 1]), 11);
    }

    #[test]
    fn layout_and_transpose() {
        let sizes = [3, 2, 1];
        let flat: Vec<f64> = (0..param_count(&sizes)).map(|i| i as f64).collect();
        let p = NetworkParams::from_flat(&sizes, flat).unwrap();
        assert_eq!(p.weights(0), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(p.bias(0), &[6.0, 7.0]);
        assert_eq!(p.weights(1), &[8.0, 9.0]);
        assert_eq!(p.bias(1), &[10.0]);
        assert_eq!(p.weights_t(0), &[0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
    }

    #[test]
    fn xavier_is_deterministic_with_zero_bias() {
        let sizes = [16, 8, 2];
        let a = NetworkParams::xavier(&sizes, 7);
        let b = NetworkParams::xavier(&sizes, 7);
        assert_eq!(a.as_slice(), b.as_slice());
        assert!(a.bias(0).iter().chain(a.bias(1)).all(|&x| x == 0.0));
        let bound = (6.0f64 / 24.0).sqrt();
        assert!(a.weights(0).iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(NetworkParams::from_flat(&[2, 2], vec![0.0; 5]).is_err());
    }
}
