//! Batched forward and backward passes over second-order input jets.
//!
//! A batch of `P` points evaluated at [`JetOrder`] `o` is laid out as
//! `P · o.rows()` activation rows. Row 0 of each point holds values, rows
//! 1..=3 the input gradient, and the remaining rows the requested Hessian
//! entries. The dense layers act on every row identically (the bias only
//! enters value rows), so a layer over jets is one matrix product plus a
//! per-neuron Taylor update.
//!
//! Every output element is accumulated in a fixed order independent of
//! blocking, which makes a value-only pass bitwise equal to the value channel
//! of any jet pass.

use crate::autodiff::{softplus_f64, sigmoid_f64, Jet2, HESS_PAIRS};

use super::embedding::{FourierEmbedding, TWO_PI};
use super::params::NetworkParams;

/// Which input derivatives a batch carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JetOrder {
    /// Values only.
    Value,
    /// Values and first derivatives in `(u, v, t)`.
    Gradient,
    /// Gradient plus the spatial Hessian block `uu, uv, vv`.
    Spatial,
    /// Gradient plus the full 3×3 Hessian.
    Full,
}

const SPATIAL_SLOTS: [usize; 3] = [0, 1, 3];
const FULL_SLOTS: [usize; 6] = [0, 1, 2, 3, 4, 5];

impl JetOrder {
    pub const fn rows(self) -> usize {
        match self {
            JetOrder::Value => 1,
            JetOrder::Gradient => 4,
            JetOrder::Spatial => 7,
            JetOrder::Full => 10,
        }
    }

    pub const fn has_grad(self) -> bool {
        !matches!(self, JetOrder::Value)
    }

    /// Hessian storage slots (see [`HESS_PAIRS`]) carried, in row order.
    pub fn hess_slots(self) -> &'static [usize] {
        match self {
            JetOrder::Value | JetOrder::Gradient => &[],
            JetOrder::Spatial => &SPATIAL_SLOTS,
            JetOrder::Full => &FULL_SLOTS,
        }
    }

    /// Assemble a jet from one point's rows; entries not carried are zero.
    pub fn jet(self, rows: &[f64]) -> Jet2 {
        let mut j = Jet2::constant(rows[0]);
        if self.has_grad() {
            j.grad = [rows[1], rows[2], rows[3]];
        }
        for (s, &slot) in self.hess_slots().iter().enumerate() {
            j.hess[slot] = rows[4 + s];
        }
        j
    }

    /// Scatter a jet into row form, dropping entries not carried.
    pub fn rows_of(self, j: &Jet2, out: &mut [f64]) {
        out[0] = j.value;
        if self.has_grad() {
            out[1..4].copy_from_slice(&j.grad);
        }
        for (s, &slot) in self.hess_slots().iter().enumerate() {
            out[4 + s] = j.hess[slot];
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Activation {
    Tanh,
    Softplus,
}

impl Activation {
    #[inline]
    fn eval2(self, x: f64) -> (f64, f64, f64) {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                let d1 = 1.0 - t * t;
                (t, d1, (t * d1) * -2.0)
            }
            Activation::Softplus => {
                let s = sigmoid_f64(x);
                (softplus_f64(x), s, s * (1.0 - s))
            }
        }
    }

    /// First three derivatives.
    #[inline]
    fn derivs3(self, x: f64) -> (f64, f64, f64) {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                let d1 = 1.0 - t * t;
                (d1, (t * d1) * -2.0, -2.0 * d1 * d1 + 4.0 * t * t * d1)
            }
            Activation::Softplus => {
                let s = sigmoid_f64(x);
                let d2 = s * (1.0 - s);
                (s, d2, d2 * (1.0 - 2.0 * s))
            }
        }
    }
}

/// Per-layer activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ShardTrace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ShardTrace {
    pub fn bytes(&self) -> usize {
        8 * self
            .inputs
            .iter()
            .chain(&self.pre)
            .map(Vec::len)
            .sum::<usize>()
    }
}

/// Bytes a trace of `n_points` at `order` would occupy.
pub fn trace_bytes(sizes: &[usize], n_points: usize, order: JetOrder) -> usize {
    let per_row: usize = sizes.windows(2).map(|w| w[0] + w[1]).sum();
    8 * per_row * n_points * order.rows()
}

fn features(emb: &FourierEmbedding, points: &[[f64; 3]], order: JetOrder, out: &mut [f64]) {
    let m = emb.m();
    let w = 2 * m;
    let r = order.rows();
    let slots = order.hess_slots();
    for (x, blk) in points.iter().zip(out.chunks_exact_mut(r * w)) {
        emb.embed_into(x, &mut blk[..w]);
        if !order.has_grad() {
            continue;
        }
        for k in 0..m {
            let (c, s) = (blk[k], blk[m + k]);
            let b = emb.matrix()[k];
            let ci = [TWO_PI * b[0], TWO_PI * b[1], TWO_PI * b[2]];
            for i in 0..3 {
                blk[(1 + i) * w + k] = -s * ci[i];
                blk[(1 + i) * w + m + k] = c * ci[i];
            }
            for (q, &slot) in slots.iter().enumerate() {
                let (i, j) = HESS_PAIRS[slot];
                let cij = ci[i] * ci[j];
                blk[(4 + q) * w + k] = -c * cij;
                blk[(4 + q) * w + m + k] = -s * cij;
            }
        }
    }
}

const TILE_ROWS: usize = 4;
const TILE_COLS: usize = 16;

/// `y[r][o] = init_r[o] + Σ_k x[r][k] · w[k][o]` with `k` ascending.
///
/// `init_r` is `bias` on rows whose index is a multiple of `bias_every`,
/// zero otherwise (and everywhere if `bias` is `None`).
fn gemm_rows(
    x: &[f64],
    inner: usize,
    w: &[f64],
    outer: usize,
    bias: Option<(&[f64], usize)>,
    y: &mut [f64],
) {
    let rows = y.len() / outer;
    debug_assert_eq!(x.len(), rows * inner);
    debug_assert_eq!(w.len(), inner * outer);
    for (ri, yr) in y.chunks_exact_mut(outer).enumerate() {
        match bias {
            Some((b, every)) if ri % every == 0 => yr.copy_from_slice(b),
            _ => yr.fill(0.0),
        }
    }
    let mut r0 = 0;
    while r0 < rows {
        let nb = (rows - r0).min(TILE_ROWS);
        let mut o0 = 0;
        while o0 < outer {
            let to = (outer - o0).min(TILE_COLS);
            if nb == TILE_ROWS && to == TILE_COLS {
                let mut acc = [[0.0f64; TILE_COLS]; TILE_ROWS];
                for (b, a) in acc.iter_mut().enumerate() {
                    a.copy_from_slice(&y[(r0 + b) * outer + o0..][..TILE_COLS]);
                }
                for k in 0..inner {
                    let wk: &[f64; TILE_COLS] =
                        w[k * outer + o0..][..TILE_COLS].try_into().expect("tile");
                    for (b, a) in acc.iter_mut().enumerate() {
                        let xk = x[(r0 + b) * inner + k];
                        for t in 0..TILE_COLS {
                            a[t] += xk * wk[t];
                        }
                    }
                }
                for (b, a) in acc.iter().enumerate() {
                    y[(r0 + b) * outer + o0..][..TILE_COLS].copy_from_slice(a);
                }
            } else {
                for k in 0..inner {
                    let wk = &w[k * outer + o0..][..to];
                    for b in 0..nb {
                        let xk = x[(r0 + b) * inner + k];
                        let yr = &mut y[(r0 + b) * outer + o0..][..to];
                        for (yo, &wo) in yr.iter_mut().zip(wk) {
                            *yo += xk * wo;
                        }
                    }
                }
            }
            o0 += to;
        }
        r0 += nb;
    }
}

/// `gw[o][k] += Σ_r a[r][o] · x[r][k]` (rows ascending) and
/// `gb[o] += Σ a[r][o]` over rows that carry the bias.
fn accumulate_weight_grad(
    x: &[f64],
    n_in: usize,
    a: &[f64],
    n_out: usize,
    bias_every: usize,
    gw: &mut [f64],
    gb: &mut [f64],
) {
    let rows = a.len() / n_out;
    const TO: usize = 4;
    let mut o0 = 0;
    while o0 < n_out {
        let no = (n_out - o0).min(TO);
        let mut k0 = 0;
        while k0 < n_in {
            let nk = (n_in - k0).min(TILE_COLS);
            if no == TO && nk == TILE_COLS {
                let mut acc = [[0.0f64; TILE_COLS]; TO];
                for (ob, accr) in acc.iter_mut().enumerate() {
                    accr.copy_from_slice(&gw[(o0 + ob) * n_in + k0..][..TILE_COLS]);
                }
                for r in 0..rows {
                    let xr: &[f64; TILE_COLS] =
                        x[r * n_in + k0..][..TILE_COLS].try_into().expect("tile");
                    let ar = &a[r * n_out + o0..][..TO];
                    for (ob, accr) in acc.iter_mut().enumerate() {
                        let ao = ar[ob];
                        for t in 0..TILE_COLS {
                            accr[t] += ao * xr[t];
                        }
                    }
                }
                for (ob, accr) in acc.iter().enumerate() {
                    gw[(o0 + ob) * n_in + k0..][..TILE_COLS].copy_from_slice(accr);
                }
            } else {
                for r in 0..rows {
                    let xr = &x[r * n_in + k0..][..nk];
                    for ob in 0..no {
                        let ao = a[r * n_out + o0 + ob];
                        let g = &mut gw[(o0 + ob) * n_in + k0..][..nk];
                        for (gk, &xk) in g.iter_mut().zip(xr) {
                            *gk += ao * xk;
                        }
                    }
                }
            }
            k0 += nk;
        }
        o0 += no;
    }
    for ar in a.chunks_exact(n_out).step_by(bias_every) {
        for (g, &ao) in gb.iter_mut().zip(ar) {
            *g += ao;
        }
    }
}

fn act_forward(act: Activation, order: JetOrder, n: usize, a: &[f64], h: &mut [f64]) {
    let r = order.rows();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for (ap, hp) in a.chunks_exact(r * n).zip(h.chunks_exact_mut(r * n)) {
        for j in 0..n {
            let (f0, f1, f2) = act.eval2(ap[j]);
            hp[j] = f0;
            d1[j] = f1;
            d2[j] = f2;
        }
        if order.has_grad() {
            for i in 1..4 {
                let (ai, hi) = (&ap[i * n..(i + 1) * n], &mut hp[i * n..(i + 1) * n]);
                for j in 0..n {
                    hi[j] = d1[j] * ai[j];
                }
            }
        }
        for (q, &slot) in order.hess_slots().iter().enumerate() {
            let (pi, pj) = HESS_PAIRS[slot];
            let row = 4 + q;
            for j in 0..n {
                let gi = ap[(1 + pi) * n + j];
                let gj = ap[(1 + pj) * n + j];
                hp[row * n + j] = d1[j] * ap[row * n + j] + d2[j] * gi * gj;
            }
        }
    }
}

fn act_backward(act: Activation, order: JetOrder, n: usize, a: &[f64], hbar: &[f64], abar: &mut [f64]) {
    let r = order.rows();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let mut d3 = vec![0.0; n];
    for ((ap, gp), bp) in a
        .chunks_exact(r * n)
        .zip(hbar.chunks_exact(r * n))
        .zip(abar.chunks_exact_mut(r * n))
    {
        for j in 0..n {
            let (f1, f2, f3) = act.derivs3(ap[j]);
            d1[j] = f1;
            d2[j] = f2;
            d3[j] = f3;
            bp[j] = f1 * gp[j];
        }
        if order.has_grad() {
            for i in 1..4 {
                for j in 0..n {
                    let g = gp[i * n + j];
                    bp[i * n + j] = d1[j] * g;
                    bp[j] += d2[j] * ap[i * n + j] * g;
                }
            }
        }
        for (q, &slot) in order.hess_slots().iter().enumerate() {
            let (pi, pj) = HESS_PAIRS[slot];
            let (ri, rj, rq) = (1 + pi, 1 + pj, 4 + q);
            for j in 0..n {
                let g = gp[rq * n + j];
                let ai = ap[ri * n + j];
                let aj = ap[rj * n + j];
                bp[rq * n + j] = d1[j] * g;
                bp[j] += (d2[j] * ap[rq * n + j] + d3[j] * ai * aj) * g;
                bp[ri * n + j] += d2[j] * aj * g;
                bp[rj * n + j] += d2[j] * ai * g;
            }
        }
    }
}

/// Forward pass of one shard. Returns output rows (`[P][rows][2]`) and, if
/// requested, the trace for [`backward_shard`].
pub fn forward_shard(
    emb: &FourierEmbedding,
    params: &NetworkParams,
    points: &[[f64; 3]],
    order: JetOrder,
    keep_trace: bool,
) -> (Vec<f64>, Option<ShardTrace>) {
    let r = order.rows();
    let rows = points.len() * r;
    let sizes = params.sizes();
    let n_layers = params.n_layers();
    debug_assert_eq!(sizes[0], emb.dim());
    let mut x = vec![0.0; rows * sizes[0]];
    features(emb, points, order, &mut x);
    let mut inputs = Vec::new();
    let mut pre = Vec::new();
    for l in 0..n_layers {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let mut a = vec![0.0; rows * n_out];
        gemm_rows(&x, n_in, params.weights_t(l), n_out, Some((params.bias(l), r)), &mut a);
        let mut h = vec![0.0; rows * n_out];
        let act = if l + 1 == n_layers {
            Activation::Softplus
        } else {
            Activation::Tanh
        };
        act_forward(act, order, n_out, &a, &mut h);
        if keep_trace {
            inputs.push(std::mem::take(&mut x));
            pre.push(a);
        }
        x = h;
    }
    (x, keep_trace.then_some(ShardTrace { inputs, pre }))
}

/// Accumulate `∂L/∂θ` into `grad` given output-row adjoints `out_adj`.
pub fn backward_shard(
    params: &NetworkParams,
    order: JetOrder,
    trace: &ShardTrace,
    out_adj: &[f64],
    grad: &mut [f64],
) {
    let r = order.rows();
    let sizes = params.sizes();
    let n_layers = params.n_layers();
    let mut g = out_adj.to_vec();
    for l in (0..n_layers).rev() {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let act = if l + 1 == n_layers {
            Activation::Softplus
        } else {
            Activation::Tanh
        };
        let a = &trace.pre[l];
        let mut abar = vec![0.0; a.len()];
        act_backward(act, order, n_out, a, &g, &mut abar);
        let (wr, br) = (params.weight_range(l), params.bias_range(l));
        let (gw, gb) = grad[wr.start..br.end].split_at_mut(wr.len());
        accumulate_weight_grad(&trace.inputs[l], n_in, &abar, n_out, r, gw, gb);
        if l > 0 {
            g = vec![0.0; (a.len() / n_out) * n_in];
            gemm_rows(&abar, n_out, params.weights(l), n_in, None, &mut g);
        }
    }
}
