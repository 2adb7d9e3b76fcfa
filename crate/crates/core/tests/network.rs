use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfrd_core::autodiff::{param_grad, Scalar, HESS_PAIRS};
use surfrd_core::network::{
    forward, forward_generic, forward_jet, init_params, FieldModel, FourierEmbedding, JetOrder,
    NetworkConfig, NetworkParams,
};

fn small_config() -> NetworkConfig {
    NetworkConfig {
        fourier_features: 4,
        sigma_scale: 2.0,
        depth: 2,
        width: 6,
        embedding_seed: 3,
        init_seed: 4,
    }
}

fn random_points(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| std::array::from_fn(|_| rng.random::<f64>())).collect()
}

// The layer-level backward pass against the generic jet network recorded on
// the scalar tape, for random output adjoints at every jet order.
#[test]
fn batched_backward_matches_tape_oracle() {
    let model = FieldModel::new(&small_config(), 1.0);
    let sizes = model.params.sizes().to_vec();
    let pts = random_points(300, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for order in [JetOrder::Value, JetOrder::Gradient, JetOrder::Spatial, JetOrder::Full] {
        let eval = model.evaluate(&pts, order, order == JetOrder::Spatial);
        let adj: Vec<f64> = (0..eval.outputs.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut fast = vec![0.0; model.param_count()];
        model.accumulate_gradient(&pts, &eval, &adj, &mut fast);

        let r = order.rows();
        let (_, slow) = param_grad(model.params.as_slice(), |tape, p| {
            let mut terms = Vec::new();
            for (i, x) in pts.iter().enumerate() {
                let j = forward_generic(&model.embedding, &sizes, p, *x);
                for (c, jet) in [j.u, j.v].iter().enumerate() {
                    let mut coeffs = vec![jet.value];
                    if order.has_grad() {
                        coeffs.extend_from_slice(&jet.grad);
                    }
                    for &s in order.hess_slots() {
                        coeffs.push(jet.hess[s]);
                    }
                    for (row, val) in coeffs.into_iter().enumerate() {
                        terms.push(val.scale(adj[(i * r + row) * 2 + c]));
                    }
                }
            }
            tape.sum(&terms)
        })
        .unwrap();
        for (k, (a, b)) in fast.iter().zip(&slow).enumerate() {
            assert!(
                (a - b).abs() <= 1e-10 * (1.0 + b.abs()),
                "{order:?} param {k}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn traced_and_recomputed_gradients_are_identical() {
    let model = FieldModel::new(&small_config(), 1.0);
    let pts = random_points(401, 5);
    let a = model.evaluate(&pts, JetOrder::Spatial, true);
    let b = model.evaluate(&pts, JetOrder::Spatial, false);
    assert_eq!(a.outputs, b.outputs);
    let adj: Vec<f64> = (0..a.outputs.len()).map(|i| (i as f64).sin()).collect();
    let mut ga = vec![0.0; model.param_count()];
    let mut gb = vec![0.0; model.param_count()];
    model.accumulate_gradient(&pts, &a, &adj, &mut ga);
    model.accumulate_gradient(&pts, &b, &adj, &mut gb);
    assert_eq!(ga, gb);
}

#[test]
fn time_derivative_matches_central_difference() {
    let cfg = NetworkConfig::default();
    let p = init_params(&cfg, 7);
    let e = FourierEmbedding::new(cfg.fourier_features, cfg.sigma_scale, 8);
    let eps = 1e-4;
    let central = |x: [f64; 3], h: f64| {
        let up = forward(&p, &e, [x[0], x[1], x[2] + h]);
        let dn = forward(&p, &e, [x[0], x[1], x[2] - h]);
        [(up.u - dn.u) / (2.0 * h), (up.v - dn.v) / (2.0 * h)]
    };
    for x in random_points(100, 9) {
        let j = forward_jet(&p, &e, x);
        // Richardson extrapolation removes the O(ε²) term, which is not
        // small at these embedding frequencies.
        let (a, b) = (central(x, eps), central(x, eps / 2.0));
        let fd = [(4.0 * b[0] - a[0]) / 3.0, (4.0 * b[1] - a[1]) / 3.0];
        for (jet, fd) in [(j.u, fd[0]), (j.v, fd[1])] {
            let rel = (jet.grad[2] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel < 1e-5, "∂/∂t {} vs {fd} (rel {rel:e})", jet.grad[2]);
        }
    }
}

#[test]
fn hessian_matches_second_differences() {
    let cfg = NetworkConfig::default();
    let p = init_params(&cfg, 17);
    let e = FourierEmbedding::new(cfg.fourier_features, cfg.sigma_scale, 18);
    let h = 4e-4;
    let f = |x: [f64; 3]| {
        let o = forward(&p, &e, x);
        [o.u, o.v]
    };
    let shifted = |x: [f64; 3], i: usize, a: f64, j: usize, b: f64| {
        let mut y = x;
        y[i] += a;
        y[j] += b;
        f(y)
    };
    // fourth-order stencils, then one Richardson step
    let w = [(-2.0, -1.0 / 12.0), (-1.0, 4.0 / 3.0), (1.0, 4.0 / 3.0), (2.0, -1.0 / 12.0)];
    let d1 = [(-2.0, 1.0 / 12.0), (-1.0, -2.0 / 3.0), (1.0, 2.0 / 3.0), (2.0, -1.0 / 12.0)];
    let mut checked = 0;
    for x in random_points(100, 19) {
        let jet = forward_jet(&p, &e, x);
        let f0 = f(x);
        for &(i, j) in HESS_PAIRS.iter() {
            let stencil = |h: f64, c: usize| {
                if i == j {
                    let mut s = -2.5 * f0[c];
                    for &(k, wk) in &w {
                        s += wk * shifted(x, i, k * h, j, 0.0)[c];
                    }
                    s / (h * h)
                } else {
                    let mut s = 0.0;
                    for &(a, wa) in &d1 {
                        for &(b, wb) in &d1 {
                            s += wa * wb * shifted(x, i, a * h, j, b * h)[c];
                        }
                    }
                    s / (h * h)
                }
            };
            let fd: [f64; 2] =
                std::array::from_fn(|c| (16.0 * stencil(h / 2.0, c) - stencil(h, c)) / 15.0);
            for (c, jc) in [jet.u, jet.v].iter().enumerate() {
                let exact = jc.hess_at(i, j);
                if exact.abs() > 1e-8 {
                    let rel = (exact - fd[c]).abs() / exact.abs();
                    assert!(rel < 1e-4, "h[{i}{j}] {exact} vs {} (rel {rel:e})", fd[c]);
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 1000);
}

fn spectral_norm(w: &[f64], n_out: usize, n_in: usize) -> f64 {
    let mut v = vec![1.0; n_in];
    let mut s = 0.0;
    for _ in 0..200 {
        let u: Vec<f64> = (0..n_out).map(|o| (0..n_in).map(|k| w[o * n_in + k] * v[k]).sum()).collect();
        let nv: Vec<f64> = (0..n_in).map(|k| (0..n_out).map(|o| w[o * n_in + k] * u[o]).sum()).collect();
        let norm = nv.iter().map(|x| x * x).sum::<f64>().sqrt();
        s = norm.sqrt();
        v = nv.iter().map(|x| x / norm).collect();
    }
    s * 1.001
}

#[test]
fn lipschitz_bound_from_layer_norms() {
    let cfg = NetworkConfig::default();
    let p = init_params(&cfg, 21);
    let e = FourierEmbedding::new(cfg.fourier_features, cfg.sigma_scale, 22);
    let b: Vec<f64> = e.matrix().iter().flatten().copied().collect();
    // γ is 2π‖B‖-Lipschitz; tanh and softplus are 1-Lipschitz.
    let mut lip = 2.0 * std::f64::consts::PI * spectral_norm(&b, e.m(), 3);
    let sizes = p.sizes();
    for l in 0..p.n_layers() {
        lip *= spectral_norm(p.weights(l), sizes[l + 1], sizes[l]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for x in random_points(100, 24) {
        let d: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1e-3..1e-3));
        let y = [x[0] + d[0], x[1] + d[1], x[2] + d[2]];
        let (a, c) = (forward(&p, &e, x), forward(&p, &e, y));
        let dout = ((a.u - c.u).powi(2) + (a.v - c.v).powi(2)).sqrt();
        let din = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        assert!(dout <= lip * din, "{dout} > {lip} · {din}");
    }
}

#[test]
fn xavier_first_layer_variance() {
    let cfg = NetworkConfig::default();
    let p = init_params(&cfg, 31);
    let w = p.weights(0);
    assert_eq!(w.len(), 32_768);
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / w.len() as f64;
    let expected = 6.0 / (256.0 + 128.0) / 3.0;
    assert!((var / expected - 1.0).abs() < 0.2, "variance {var} vs {expected}");
}

#[test]
fn same_seeds_same_model() {
    let a = FieldModel::new(&NetworkConfig::default(), 2000.0);
    let b = FieldModel::new(&NetworkConfig::default(), 2000.0);
    assert_eq!(a, b);
    let x = [0.2, 0.4, 0.6];
    let (oa, ob) = (forward(&a.params, &a.embedding, x), forward(&b.params, &b.embedding, x));
    assert_eq!(oa.u.to_bits(), ob.u.to_bits());
    assert_eq!(oa.v.to_bits(), ob.v.to_bits());
}

#[test]
fn zero_params_have_zero_input_derivatives() {
    let p = NetworkParams::zeros(&[8, 5, 2]);
    let e = FourierEmbedding::new(4, 3.0, 1);
    let j = forward_jet(&p, &e, [0.1, 0.2, 0.3]);
    assert_eq!(j.u.grad, [0.0; 3]);
    assert_eq!(j.v.hess, [0.0; 6]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outputs_are_positive(seed in 0u64..10_000, x in proptest::array::uniform3(-2.0f64..2.0)) {
        let cfg = small_config();
        let p = init_params(&cfg, seed);
        let e = FourierEmbedding::new(cfg.fourier_features, 5.0, seed + 1);
        let o = forward(&p, &e, x);
        prop_assert!(o.u > 0.0 && o.v > 0.0);
    }

    #[test]
    fn param_count_formula(m in 1usize..40, depth in 0usize..5, width in 1usize..50) {
        let cfg = NetworkConfig { fourier_features: m, depth, width, ..NetworkConfig::default() };
        let hidden = if depth == 0 { 0 } else { 2 * m * width + width + (depth - 1) * (width * width + width) };
        let head = if depth == 0 { 2 * m * 2 + 2 } else { width * 2 + 2 };
        prop_assert_eq!(cfg.param_count(), hidden + head);
        prop_assert_eq!(init_params(&cfg, 0).len(), hidden + head);
    }
}
