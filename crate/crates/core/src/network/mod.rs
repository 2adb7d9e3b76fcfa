//! Coordinate neural field `(u, v, t/T) ↦ (Û, V̂)`.
//!
//! Inputs pass through a fixed Fourier feature embedding, then a tanh MLP,
//! then a softplus head on both channels. The network is evaluated either
//! one point at a time ([`forward`], [`forward_jet`]) or in sharded batches
//! ([`FieldModel::evaluate`]) that also support the parameter backward pass.

mod batch;
mod checkpoint;
mod embedding;
mod params;

pub use batch::{backward_shard, forward_shard, trace_bytes, JetOrder, ShardTrace};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use embedding::FourierEmbedding;
pub use params::{param_count, NetworkParams};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Jet2, Scalar};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a network checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
}

/// Architecture and seeds of the field network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Number of Fourier frequencies `m`; the embedding has `2m` outputs.
    pub fourier_features: usize,
    /// Standard deviation of the embedding frequencies.
    pub sigma_scale: f64,
    /// Number of hidden layers.
    pub depth: usize,
    /// Neurons per hidden layer.
    pub width: usize,
    pub embedding_seed: u64,
    pub init_seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            fourier_features: 128,
            sigma_scale: 10.0,
            depth: 4,
            width: 128,
            embedding_seed: 1,
            init_seed: 2,
        }
    }
}

impl NetworkConfig {
    /// Layer widths `[2m, width × depth, 2]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![2 * self.fourier_features];
        s.extend(std::iter::repeat(self.width).take(self.depth));
        s.push(2);
        s
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.layer_sizes())
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: &str| Err(NetworkError::InvalidConfig(m.to_string()));
        if self.fourier_features == 0 {
            return bad("fourier_features must be at least 1");
        }
        if self.width == 0 {
            return bad("width must be at least 1");
        }
        if !(self.sigma_scale.is_finite() && self.sigma_scale >= 0.0) {
            return bad("sigma_scale must be finite and non-negative");
        }
        Ok(())
    }
}

/// Xavier-initialized parameters for `config`, seeded by `seed`.
pub fn init_params(config: &NetworkConfig, seed: u64) -> NetworkParams {
    NetworkParams::xavier(&config.layer_sizes(), seed)
}

/// Concentrations predicted at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOutput {
    pub u: f64,
    pub v: f64,
}

/// Jets of both output channels at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldJets<S = f64> {
    pub u: Jet2<S>,
    pub v: Jet2<S>,
}

/// Plain forward pass at a normalized input `(u, v, t/T)`.
pub fn forward(params: &NetworkParams, emb: &FourierEmbedding, x: [f64; 3]) -> FieldOutput {
    let (out, _) = forward_shard(emb, params, &[x], JetOrder::Value, false);
    FieldOutput {
        u: out[0],
        v: out[1],
    }
}

/// Forward pass carrying full second-order jets in the normalized inputs.
pub fn forward_jet(params: &NetworkParams, emb: &FourierEmbedding, x: [f64; 3]) -> FieldJets {
    let order = JetOrder::Full;
    let (out, _) = forward_shard(emb, params, &[x], order, false);
    let r = order.rows();
    let ch = |c: usize| (0..r).map(|i| out[2 * i + c]).collect::<Vec<_>>();
    FieldJets {
        u: order.jet(&ch(0)),
        v: order.jet(&ch(1)),
    }
}

/// Reference implementation of [`forward_jet`] over any [`Scalar`].
///
/// With `S = Var` every output coefficient is recorded on a tape as a
/// function of the parameters. It is slow and meant for small networks in
/// tests.
pub fn forward_generic<S: Scalar>(
    emb: &FourierEmbedding,
    sizes: &[usize],
    flat: &[S],
    x: [f64; 3],
) -> FieldJets<S> {
    let m = emb.m();
    let vars: [Jet2; 3] = std::array::from_fn(|i| Jet2::variable(i, x[i]));
    let mut feats: Vec<Jet2<S>> = vec![Jet2::constant(S::zero()); 2 * m];
    for (k, b) in emb.matrix().iter().enumerate() {
        let z = vars[0].scale(embedding::TWO_PI * b[0])
            + vars[1].scale(embedding::TWO_PI * b[1])
            + vars[2].scale(embedding::TWO_PI * b[2]);
        feats[k] = z.cos().lift();
        feats[m + k] = z.sin().lift();
    }
    let mut off = 0;
    let n_layers = sizes.len() - 1;
    for l in 0..n_layers {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = &flat[off..off + n_in * n_out];
        let b = &flat[off + n_in * n_out..off + n_in * n_out + n_out];
        off += n_in * n_out + n_out;
        feats = (0..n_out)
            .map(|o| {
                let mut a = Jet2::constant(b[o]);
                for k in 0..n_in {
                    a = a + feats[k].mul_scalar(w[o * n_in + k]);
                }
                if l + 1 == n_layers {
                    a.softplus()
                } else {
                    a.tanh()
                }
            })
            .collect();
    }
    FieldJets {
        u: feats[0],
        v: feats[1],
    }
}

/// Convert jets taken with respect to `t/T` into jets in physical time.
pub fn rescale_time(j: &Jet2, horizon: f64) -> Jet2 {
    let s = 1.0 / horizon;
    let mut out = *j;
    out.grad[2] *= s;
    out.hess[2] *= s;
    out.hess[4] *= s;
    out.hess[5] *= s * s;
    out
}

/// Points per shard in batched evaluation.
pub const SHARD_POINTS: usize = 128;
const SHARDS_PER_WAVE: usize = 16;

/// Outputs of a batched forward pass, optionally with backward traces.
#[derive(Debug, Clone)]
pub struct BatchEval {
    pub order: JetOrder,
    /// `[point][row][channel]`, rows per [`JetOrder::rows`].
    pub outputs: Vec<f64>,
    traces: Option<Vec<ShardTrace>>,
}

impl BatchEval {
    pub fn n_points(&self) -> usize {
        self.outputs.len() / (2 * self.order.rows())
    }

    /// Output rows of channel `c` at point `p`.
    pub fn rows(&self, p: usize, c: usize) -> impl Iterator<Item = f64> + '_ {
        let r = self.order.rows();
        (0..r).map(move |i| self.outputs[(p * r + i) * 2 + c])
    }

    pub fn jets(&self, p: usize) -> FieldJets {
        let r = self.order.rows();
        let blk = &self.outputs[p * r * 2..(p + 1) * r * 2];
        let ch = |c: usize| (0..r).map(|i| blk[2 * i + c]).collect::<Vec<_>>();
        FieldJets {
            u: self.order.jet(&ch(0)),
            v: self.order.jet(&ch(1)),
        }
    }

    pub fn has_traces(&self) -> bool {
        self.traces.is_some()
    }
}

/// A network together with its embedding and time horizon `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel {
    pub embedding: FourierEmbedding,
    pub params: NetworkParams,
    pub horizon: f64,
}

impl FieldModel {
    pub fn new(config: &NetworkConfig, horizon: f64) -> Self {
        Self {
            embedding: FourierEmbedding::new(
                config.fourier_features,
                config.sigma_scale,
                config.embedding_seed,
            ),
            params: init_params(config, config.init_seed),
            horizon,
        }
    }

    /// Network input for a physical point.
    #[inline]
    pub fn input(&self, u: f64, v: f64, t: f64) -> [f64; 3] {
        [u, v, t / self.horizon]
    }

    pub fn at(&self, u: f64, v: f64, t: f64) -> FieldOutput {
        forward(&self.params, &self.embedding, self.input(u, v, t))
    }

    /// Full jets with the time derivatives in physical units.
    pub fn jets_at(&self, u: f64, v: f64, t: f64) -> FieldJets {
        let j = forward_jet(&self.params, &self.embedding, self.input(u, v, t));
        FieldJets {
            u: rescale_time(&j.u, self.horizon),
            v: rescale_time(&j.v, self.horizon),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Sharded batch forward over normalized inputs.
    pub fn evaluate(&self, points: &[[f64; 3]], order: JetOrder, keep_traces: bool) -> BatchEval {
        let shards: Vec<(Vec<f64>, Option<ShardTrace>)> = points
            .par_chunks(SHARD_POINTS)
            .map(|c| forward_shard(&self.embedding, &self.params, c, order, keep_traces))
            .collect();
        let mut outputs = Vec::with_capacity(points.len() * order.rows() * 2);
        let mut traces = keep_traces.then(Vec::new);
        for (o, t) in shards {
            outputs.extend_from_slice(&o);
            if let (Some(ts), Some(t)) = (traces.as_mut(), t) {
                ts.push(t);
            }
        }
        BatchEval {
            order,
            outputs,
            traces,
        }
    }

    /// Add `Σ_p ∂(out_adj · outputs_p)/∂θ` to `grad`.
    ///
    /// Uses the traces in `eval` when present and recomputes each shard's
    /// forward pass otherwise. Shard gradients are summed in shard order, so
    /// the result does not depend on the thread count.
    pub fn accumulate_gradient(
        &self,
        points: &[[f64; 3]],
        eval: &BatchEval,
        out_adj: &[f64],
        grad: &mut [f64],
    ) {
        let order = eval.order;
        let stride = SHARD_POINTS * order.rows() * 2;
        assert_eq!(out_adj.len(), eval.outputs.len());
        assert_eq!(grad.len(), self.params.len());
        let shards: Vec<&[[f64; 3]]> = points.chunks(SHARD_POINTS).collect();
        let idx: Vec<usize> = (0..shards.len()).collect();
        for wave in idx.chunks(SHARDS_PER_WAVE) {
            let parts: Vec<Vec<f64>> = wave
                .par_iter()
                .map(|&s| {
                    let adj = &out_adj[s * stride..(s * stride + stride).min(out_adj.len())];
                    let mut g = vec![0.0; self.params.len()];
                    match eval.traces.as_ref() {
                        Some(ts) => backward_shard(&self.params, order, &ts[s], adj, &mut g),
                        None => {
                            let (_, t) = forward_shard(
                                &self.embedding,
                                &self.params,
                                shards[s],
                                order,
                                true,
                            );
                            backward_shard(&self.params, order, &t.expect("trace"), adj, &mut g);
                        }
                    }
                    g
                })
                .collect();
            for g in parts {
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> FieldModel {
        let cfg = NetworkConfig {
            fourier_features: 3,
            sigma_scale: 1.0,
            depth: 2,
            width: 5,
            embedding_seed: 11,
            init_seed: 12,
        };
        FieldModel::new(&cfg, 1.0)
    }

    #[test]
    fn paper_architecture_count() {
        assert_eq!(NetworkConfig::default().param_count(), 82_690);
        assert_eq!(init_params(&NetworkConfig::default(), 0).len(), 82_690);
    }

    #[test]
    fn dead_network_outputs_ln2() {
        let cfg = NetworkConfig::default();
        let p = NetworkParams::zeros(&cfg.layer_sizes());
        let e = FourierEmbedding::new(128, 10.0, 1);
        let out = forward(&p, &e, [0.3, 0.4, 0.5]);
        assert_eq!(out.u, std::f64::consts::LN_2);
        assert_eq!(out.v, std::f64::consts::LN_2);
        let j = forward_jet(&p, &e, [0.3, 0.4, 0.5]);
        assert_eq!(j.u.grad, [0.0; 3]);
        assert_eq!(j.v.hess, [0.0; 6]);
    }

    #[test]
    fn batch_kernel_matches_generic_jets() {
        let model = tiny();
        let x = [0.21, 0.67, 0.4];
        let fast = forward_jet(&model.params, &model.embedding, x);
        let slow = forward_generic(&model.embedding, model.params.sizes(), model.params.as_slice(), x);
        for (a, b) in [(fast.u, slow.u), (fast.v, slow.v)] {
            for (p, q) in a.to_array().iter().zip(b.to_array()) {
                assert!((p - q).abs() < 1e-13 * (1.0 + q.abs()), "{p} vs {q}");
            }
        }
    }

    #[test]
    fn value_channel_is_bitwise_shared() {
        let model = FieldModel::new(&NetworkConfig::default(), 2000.0);
        let pts: Vec<[f64; 3]> = (0..37).map(|i| [i as f64 / 37.0, 0.3, 0.9 - i as f64 / 50.0]).collect();
        let val = model.evaluate(&pts, JetOrder::Value, false);
        for order in [JetOrder::Gradient, JetOrder::Spatial, JetOrder::Full] {
            let e = model.evaluate(&pts, order, false);
            for p in 0..pts.len() {
                assert_eq!(e.jets(p).u.value.to_bits(), val.jets(p).u.value.to_bits());
                assert_eq!(e.jets(p).v.value.to_bits(), val.jets(p).v.value.to_bits());
            }
        }
    }

    #[test]
    fn rescale_time_chain_rule() {
        let mut j = Jet2::constant(1.0);
        j.grad = [1.0, 1.0, 4.0];
        j.hess = [1.0, 1.0, 4.0, 1.0, 4.0, 16.0];
        let r = rescale_time(&j, 2.0);
        assert_eq!(r.grad, [1.0, 1.0, 2.0]);
        assert_eq!(r.hess, [1.0, 1.0, 2.0, 1.0, 2.0, 4.0]);
    }
}
