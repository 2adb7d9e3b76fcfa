use proptest::prelude::*;
use surfrd_core::autodiff::Jet2;
use surfrd_core::geometry::{curvature_at, grid_nodes, metric_at, HeightField, ManifoldConfig, MetricSample};
use surfrd_core::metrics::{curvature_stats, intrinsic_grad_norm, relative_l2};

fn weighted_norm(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn relative_l2_obeys_the_triangle_bound(
        data in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.01f64..1.0), 2..40)
    ) {
        let a: Vec<f64> = data.iter().map(|d| d.0).collect();
        let b: Vec<f64> = data.iter().map(|d| d.1).collect();
        let c: Vec<f64> = data.iter().map(|d| d.2 + 2.0).collect();
        let w: Vec<f64> = data.iter().map(|d| d.3).collect();
        let diff = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(x, y)| x - y).collect() };
        let bound = (weighted_norm(&diff(&a, &b), &w) + weighted_norm(&diff(&b, &c), &w)) / weighted_norm(&c, &w);
        let rel = relative_l2(&a, &c, &w).unwrap();
        prop_assert!(rel <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn grad_norm_is_euclidean_for_identity_metric(g in proptest::array::uniform3(-10.0f64..10.0)) {
        let mut jet = Jet2::constant(0.3);
        jet.grad = g;
        let n = intrinsic_grad_norm(&jet, &MetricSample::flat());
        prop_assert!((n - (g[0] * g[0] + g[1] * g[1]).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn curvature_stats_bracket_every_sample(seed in 0u64..20, n in 3usize..25) {
        let mut cfg = ManifoldConfig::default();
        cfg.grf.seed = seed;
        let s = HeightField::new(cfg);
        let st = curvature_stats(&s, n);
        for (u, v) in grid_nodes(n) {
            let c = curvature_at(&s, u, v);
            let d = metric_at(&s, u, v).det_g;
            prop_assert!(st.gaussian_k.min <= c.gaussian_k && c.gaussian_k <= st.gaussian_k.max);
            prop_assert!(st.mean_h.min <= c.mean_h && c.mean_h <= st.mean_h.max);
            prop_assert!(st.det_g.min <= d && d <= st.det_g.max);
        }
        prop_assert!(st.det_g.min >= 1.0);
    }
}
