use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfrd_core::geometry::{ClosedForm, HeightField};
use surfrd_core::network::{FieldModel, NetworkConfig};
use surfrd_core::physics::{GrayScottParams, InitialCondition, InitialConditionConfig, LossWeights};
use surfrd_core::trainer::{evaluate_loss, loss_and_grad, train, Problem, TrainConfig};

fn small_net() -> NetworkConfig {
    NetworkConfig {
        fourier_features: 8,
        sigma_scale: 2.0,
        depth: 2,
        width: 12,
        embedding_seed: 5,
        init_seed: 6,
    }
}

fn small_train() -> TrainConfig {
    TrainConfig {
        n_epochs: 60,
        collocation_batch: 200,
        bc_batch: 64,
        ic_batch: 64,
        anneal_epochs: 30,
        mass_points: 128,
        mass_slices: 3,
        lr: 5e-3,
        checkpoint_every: 0,
        ..TrainConfig::default()
    }
}

#[test]
fn component_gradients_match_directional_differences() {
    let surface = HeightField::default();
    let physics = GrayScottParams::default();
    let ic = InitialCondition::new(InitialConditionConfig::default());
    let problem = Problem {
        surface: &surface,
        physics: &physics,
        ic: &ic,
    };
    let cfg = TrainConfig {
        mass_include_v: true,
        ..small_train()
    };
    let model = FieldModel::new(&small_net(), 50.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let batches = problem.sample(&cfg, model.horizon, &mut rng);
    let quad = problem.quadrature(&cfg);
    let one_hot = [
        LossWeights { pde: 1.0, bc: 0.0, ic: 0.0, mass: 0.0 },
        LossWeights { pde: 0.0, bc: 1.0, ic: 0.0, mass: 0.0 },
        LossWeights { pde: 0.0, bc: 0.0, ic: 1.0, mass: 0.0 },
        LossWeights { pde: 0.0, bc: 0.0, ic: 0.0, mass: 1.0 },
    ];
    let eps = 1e-5;
    for w in one_hot {
        let (_, g) = loss_and_grad(&model, &batches, &quad, &physics, &w).unwrap();
        for _ in 0..10 {
            let d: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            let shifted = |sign: f64| {
                let mut m = model.clone();
                m.params.update(|p| {
                    for (x, dx) in p.iter_mut().zip(&d) {
                        *x += sign * eps * dx / norm;
                    }
                });
                evaluate_loss(&m, &batches, &quad, &physics, &w).total
            };
            let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * eps);
            let ad = g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() / norm;
            let rel = (ad - fd).abs() / fd.abs().max(1e-12);
            assert!(rel < 1e-4, "{w:?}: {ad} vs {fd} (rel {rel:e})");
        }
    }
}

#[test]
fn zero_epochs_leave_model_untouched() {
    let surface = ClosedForm::Flat;
    let physics = GrayScottParams::default();
    let ic = InitialCondition::new(InitialConditionConfig::default());
    let problem = Problem { surface: &surface, physics: &physics, ic: &ic };
    let model = FieldModel::new(&small_net(), 10.0);
    let out = train(model.clone(), &problem, &TrainConfig { n_epochs: 0, anneal_epochs: 0, ..small_train() }, &mut ()).unwrap();
    assert_eq!(out.model, model);
    assert!(out.history.is_empty());
}

#[test]
fn short_run_is_deterministic_and_descends() {
    let surface = ClosedForm::Flat;
    let physics = GrayScottParams::default();
    let ic = InitialCondition::new(InitialConditionConfig::default());
    let problem = Problem { surface: &surface, physics: &physics, ic: &ic };
    let run = || train(FieldModel::new(&small_net(), 10.0), &problem, &small_train(), &mut ()).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.model, b.model);
    let totals = |o: &surfrd_core::trainer::TrainOutcome| -> Vec<f64> {
        o.history.records.iter().map(|r| r.total).collect()
    };
    assert_eq!(totals(&a), totals(&b));
    let h = totals(&a);
    let head = h[..10].iter().sum::<f64>() / 10.0;
    let tail = h[h.len() - 10..].iter().sum::<f64>() / 10.0;
    assert!(tail < head, "{head} -> {tail}");
    let lambdas: Vec<f64> = a.history.records.iter().map(|r| r.lambda_mass).collect();
    assert!(lambdas.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*lambdas.last().unwrap(), 1.0);
}
