use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfrd_core::geometry::{curvature_at, metric_at, HeightField, HeightJet, ManifoldConfig, Surface};

fn interior_points(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.random_range(0.01..0.99), rng.random_range(0.01..0.99)))
        .collect()
}

// Each entry of order k+1 against central differences of order k, relative
// to the larger of its own size and the RMS of that entry over the sample.
#[test]
fn analytic_derivatives_match_central_differences() {
    let s = HeightField::default();
    let h = 1e-5;
    let pts = interior_points(1000, 1);
    type Pick = fn(&HeightJet) -> f64;
    // (derivative, lower-order entry, direction)
    let cases: [(Pick, Pick, usize); 9] = [
        (|j| j.zu, |j| j.z, 0),
        (|j| j.zv, |j| j.z, 1),
        (|j| j.zuu, |j| j.zu, 0),
        (|j| j.zuv, |j| j.zu, 1),
        (|j| j.zvv, |j| j.zv, 1),
        (|j| j.zuuu, |j| j.zuu, 0),
        (|j| j.zuuv, |j| j.zuu, 1),
        (|j| j.zuvv, |j| j.zuv, 1),
        (|j| j.zvvv, |j| j.zvv, 1),
    ];
    for (k, (exact, lower, dir)) in cases.iter().enumerate() {
        let values: Vec<(f64, f64)> = pts
            .iter()
            .map(|&(u, v)| {
                let (du, dv) = if *dir == 0 { (h, 0.0) } else { (0.0, h) };
                let fd = (lower(&s.height(u + du, v + dv, 3)) - lower(&s.height(u - du, v - dv, 3))) / (2.0 * h);
                (exact(&s.height(u, v, 3)), fd)
            })
            .collect();
        let rms = (values.iter().map(|(e, _)| e * e).sum::<f64>() / values.len() as f64).sqrt();
        for (e, fd) in values {
            let rel = (e - fd).abs() / e.abs().max(rms);
            assert!(rel < 1e-6, "case {k}: {e} vs {fd} (rel {rel:e})");
        }
    }
}

fn monge(h: &HeightJet) -> (f64, f64) {
    let d = 1.0 + h.zu * h.zu + h.zv * h.zv;
    let k = (h.zuu * h.zvv - h.zuv * h.zuv) / (d * d);
    let m = ((1.0 + h.zv * h.zv) * h.zuu - 2.0 * h.zu * h.zv * h.zuv + (1.0 + h.zu * h.zu) * h.zvv)
        / (2.0 * d.powf(1.5));
    (k, m)
}

// Monge formulas fed with derivatives from a fourth-order stencil on z alone.
#[test]
fn curvature_matches_finite_difference_monge_formulas() {
    let s = HeightField::default();
    let z = |u: f64, v: f64| s.height(u, v, 0).z;
    let h = 2e-4;
    let mut checked = 0;
    for (u, v) in interior_points(500, 2) {
        let d1 = |f: &dyn Fn(f64) -> f64| (f(-2.0) - 8.0 * f(-1.0) + 8.0 * f(1.0) - f(2.0)) / (12.0 * h);
        let d2 = |f: &dyn Fn(f64) -> f64| {
            (-f(-2.0) + 16.0 * f(-1.0) - 30.0 * f(0.0) + 16.0 * f(1.0) - f(2.0)) / (12.0 * h * h)
        };
        let zu = d1(&|k| z(u + k * h, v));
        let zv = d1(&|k| z(u, v + k * h));
        let zuu = d2(&|k| z(u + k * h, v));
        let zvv = d2(&|k| z(u, v + k * h));
        let zuv = d1(&|a| d1(&|b| z(u + a * h, v + b * h)));
        let fd = HeightJet {
            zu,
            zv,
            zuu,
            zuv,
            zvv,
            ..HeightJet::default()
        };
        let (k_fd, h_fd) = monge(&fd);
        let c = curvature_at(&s, u, v);
        if c.gaussian_k.abs() > 1.0 {
            let rel = (c.gaussian_k - k_fd).abs() / c.gaussian_k.abs();
            assert!(rel < 1e-4, "K {} vs {k_fd} at ({u}, {v})", c.gaussian_k);
            checked += 1;
        }
        if c.mean_h.abs() > 1.0 {
            let rel = (c.mean_h - h_fd).abs() / c.mean_h.abs();
            assert!(rel < 1e-4, "H {} vs {h_fd} at ({u}, {v})", c.mean_h);
        }
    }
    assert!(checked > 400);
}

#[test]
fn default_manifold_config_is_valid() {
    assert!(ManifoldConfig::default().validate().is_ok());
    let mut bad = ManifoldConfig::default();
    bad.grf.correlation_length = 0.0;
    let err = bad.validate().unwrap_err();
    assert_eq!(err.field, "grf.correlation_length");
}

proptest! {
    #[test]
    fn metric_is_spd_with_unit_floor(u in 0.0f64..=1.0, v in 0.0f64..=1.0, seed in 0u64..50) {
        let mut cfg = ManifoldConfig::default();
        cfg.grf.seed = seed;
        let s = HeightField::new(cfg);
        let m = metric_at(&s, u, v);
        prop_assert!(m.det_g >= 1.0);
        prop_assert!(m.g[0][0] > 0.0 && m.g[0][0] * m.g[1][1] - m.g[0][1] * m.g[1][0] > 0.0);
        for i in 0..2 {
            for j in 0..2 {
                let p: f64 = (0..2).map(|k| m.g[i][k] * m.g_inv[k][j]).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                prop_assert!((p - id).abs() < 1e-12);
            }
        }
    }
}
