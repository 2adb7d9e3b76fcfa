use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfrd_core::geometry::{ClosedForm, HeightField};
use surfrd_core::metrics::sfem_mass_violation;
use surfrd_core::physics::{GrayScottParams, InitialCondition, InitialConditionConfig};
use surfrd_core::sfem::{
    assemble_stiffness, run_reference, smallest_nonzero_eigenvalue, FieldSnapshot, Kinetics, SfemConfig,
    SfemSolver, TriMesh,
};

#[test]
fn stiffness_is_positive_semidefinite_with_zero_row_sums() {
    let mesh = TriMesh::build(&HeightField::default(), 24).unwrap();
    let a = assemble_stiffness(&mesh);
    assert!(a.is_symmetric());
    let ones = vec![1.0; a.n];
    assert!(a.mul(&ones).iter().all(|r| r.abs() < 1e-10));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let x: Vec<f64> = (0..a.n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q: f64 = a.mul(&x).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!(q >= -1e-10, "xᵀAx = {q}");
    }
}

fn heat_decay_error(n: usize, dt: f64) -> f64 {
    let mesh = TriMesh::build(&ClosedForm::Flat, n).unwrap();
    let cos: Vec<f64> = mesh.params.iter().map(|p| (PI * p[0]).cos()).collect();
    let params = GrayScottParams {
        d_u: 1.0,
        d_v: 1.0,
        ..GrayScottParams::default()
    };
    let solver = SfemSolver::new(mesh, params, dt, Kinetics::Off).unwrap();
    let init = FieldSnapshot {
        time: 0.0,
        u: cos.clone(),
        v: cos.clone(),
    };
    let cfg = SfemConfig {
        n,
        dt,
        t_end: 0.1,
        checkpoints: vec![],
        kinetics: Kinetics::Off,
    };
    let out = run_reference(&solver, init, &cfg).unwrap();
    let last = out.snapshots.last().unwrap();
    let m = &solver.mesh.lumped_area;
    let proj = |x: &[f64]| x.iter().zip(&cos).zip(m).map(|((x, c), w)| x * c * w).sum::<f64>();
    let amp = proj(&last.u) / proj(&cos);
    let exact = (-PI * PI * 0.1).exp();
    (amp - exact).abs() / exact
}

#[test]
fn heat_mode_decays_exponentially() {
    let coarse = heat_decay_error(16, 1e-4);
    let fine = heat_decay_error(64, 1e-4);
    assert!(fine < coarse, "refinement did not help: {coarse} -> {fine}");
    let e = heat_decay_error(128, 1e-3);
    assert!(e < 0.01, "relative amplitude error {e}");
}

#[test]
fn flat_spectrum_converges_to_pi_squared() {
    let mut last = f64::INFINITY;
    for n in [8, 16, 32] {
        let mesh = TriMesh::build(&ClosedForm::Flat, n).unwrap();
        let a = assemble_stiffness(&mesh);
        let l = smallest_nonzero_eigenvalue(&a, &mesh.lumped_area, 500).unwrap();
        let err = (l - PI * PI).abs();
        assert!(err < last, "n = {n}: error {err} after {last}");
        last = err;
    }
    assert!(last / (PI * PI) < 0.01);
}

fn cloth_run(n: usize, kinetics: Kinetics, t_end: f64) -> (SfemSolver, Vec<FieldSnapshot>, f64) {
    let mesh = TriMesh::build(&HeightField::default(), n).unwrap();
    let ic = InitialCondition::new(InitialConditionConfig::default());
    let init = FieldSnapshot::initial(&mesh, &ic);
    let solver = SfemSolver::new(mesh, GrayScottParams::default(), 1.0, kinetics).unwrap();
    let cfg = SfemConfig {
        n,
        dt: 1.0,
        t_end,
        checkpoints: (1..10).map(|k| k as f64 * t_end / 10.0).collect(),
        kinetics,
    };
    let out = run_reference(&solver, init, &cfg).unwrap();
    let unexplained = out.audit.unexplained() / out.audit.initial_mass_u;
    (solver, out.snapshots, unexplained)
}

#[test]
fn mass_audit_balances_with_kinetics_on() {
    let (_, snaps, unexplained) = cloth_run(32, Kinetics::GrayScott, 100.0);
    assert!(unexplained.abs() < 1e-8, "unexplained relative mass change {unexplained}");
    assert!(snaps.iter().all(FieldSnapshot::is_finite));
}

#[test]
fn pure_diffusion_has_no_mass_violation() {
    let (solver, snaps, unexplained) = cloth_run(32, Kinetics::Off, 100.0);
    assert!(unexplained.abs() < 1e-8, "unexplained {unexplained}");
    let e = sfem_mass_violation(&solver, &snaps).unwrap();
    assert!(e < 1e-6, "mass violation {e}");
}

// Spatial mean of V at the end of the default run on two fine meshes.
#[test]
fn v_mean_is_mesh_independent() {
    let mean_v = |n: usize| {
        let (solver, snaps, _) = cloth_run(n, Kinetics::GrayScott, 2000.0);
        let last = snaps.last().unwrap();
        let m = &solver.mesh.lumped_area;
        last.v.iter().zip(m).map(|(v, w)| v * w).sum::<f64>() / m.iter().sum::<f64>()
    };
    let (a, b) = (mean_v(160), mean_v(200));
    let rel = (a - b).abs() / b.abs();
    assert!(rel < 0.02, "mean V {a} (n=160) vs {b} (n=200)");
}
