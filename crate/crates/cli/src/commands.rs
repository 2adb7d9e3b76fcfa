use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use surfrd_core::geometry::{chemical_potential, curvature_at, grid_nodes, metric_at, HeightField, Surface};
use surfrd_core::metrics::{
    compare as compare_runs, curvature_stats, intrinsic_grad_norm, rank_correlation, reaction_rate,
    resource_report, write_ppm, ComparisonReport, Ramp, VertexGeometry,
};
use surfrd_core::network::{Checkpoint, FieldModel};
use surfrd_core::physics::InitialCondition;
use surfrd_core::sfem::{
    run_reference, write_snapshot_csv, write_snapshot_vtk, write_vtk_polydata, FieldSnapshot, ReferenceRun,
    SfemSolver, TriMesh,
};
use surfrd_core::trainer::{train, LossRecord, Problem, TrainError, TrainObserver};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::rundir::RunDir;

fn surface(cfg: &RunConfig) -> HeightField {
    HeightField::new(cfg.manifold.clone())
}

/// `gen-manifold`: grid samples, statistics and the embedded mesh.
pub fn gen_manifold(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let s = surface(cfg);
    let n = cfg.output.grid;
    let nodes: Vec<(f64, f64)> = grid_nodes(n).collect();
    let rows: Vec<String> = nodes
        .par_iter()
        .map(|&(u, v)| {
            let z = s.height(u, v, 0).z;
            let m = metric_at(&s, u, v);
            let c = curvature_at(&s, u, v);
            format!(
                "{u},{v},{z},{},{},{},{}",
                m.det_g,
                c.gaussian_k,
                c.mean_h,
                chemical_potential(u, v)
            )
        })
        .collect();
    run.write("manifold.csv", |w| {
        writeln!(w, "u,v,z,det_g,K,H,phi")?;
        rows.iter().try_for_each(|r| writeln!(w, "{r}"))
    })?;

    let stats = curvature_stats(&s, n);
    run.write("manifold_stats.csv", |w| stats.write_csv(w))?;
    run.log(format!(
        "grid {n}x{n}: area {:.6}, det g mean {:.4} range [{:.4}, {:.4}], z range [{:.4}, {:.4}]",
        stats.area, stats.det_g.mean, stats.det_g.min, stats.det_g.max, stats.elevation.min, stats.elevation.max
    ));

    if cfg.output.vtk {
        let mesh = TriMesh::build(&s, cfg.sfem.n)?;
        let mut cols: [Vec<f64>; 4] = Default::default();
        for p in &mesh.params {
            let c = curvature_at(&s, p[0], p[1]);
            cols[0].push(s.height(p[0], p[1], 0).z);
            cols[1].push(c.gaussian_k);
            cols[2].push(c.mean_h);
            cols[3].push(chemical_potential(p[0], p[1]));
        }
        run.write("manifold.vtk", |w| {
            write_vtk_polydata(
                w,
                "stochastic cloth manifold",
                &mesh,
                &[("z", &cols[0]), ("K", &cols[1]), ("H", &cols[2]), ("phi", &cols[3])],
            )
        })?;
    }
    Ok(())
}

struct Progress<'a> {
    run: &'a mut RunDir,
    echo: &'a str,
    every: usize,
    error: Option<CliError>,
}

impl TrainObserver for Progress<'_> {
    fn on_epoch(&mut self, r: &LossRecord) {
        if r.epoch % self.every == 0 {
            self.run.log(format!(
                "epoch {:>6}  total {:.4e}  pde {:.3e}  bc {:.3e}  ic {:.3e}  mass {:.3e}  lambda {:.3}",
                r.epoch, r.total, r.l_pde, r.l_bc, r.l_ic, r.l_mass, r.lambda_mass
            ));
        }
    }

    fn on_checkpoint(&mut self, epochs: usize, model: &FieldModel) -> Result<(), String> {
        let ckpt = Checkpoint {
            config_echo: self.echo.to_string(),
            model: model.clone(),
        };
        let path = self.run.file(&format!("checkpoint-{epochs:06}.bin"));
        ckpt.save(&path).map_err(|e| {
            let msg = format!("{}: {e}", path.display());
            self.error = Some(CliError::Network(e));
            msg
        })
    }
}

/// Train a fresh network and write its history and final checkpoint.
pub fn train_model(cfg: &RunConfig, run: &mut RunDir) -> Result<FieldModel, CliError> {
    let s = surface(cfg);
    let params = cfg.physics.params();
    let ic = InitialCondition::new(cfg.physics.ic.clone());
    let problem = Problem {
        surface: &s,
        physics: &params,
        ic: &ic,
    };
    let model = FieldModel::new(&cfg.network, cfg.physics.horizon);
    run.log(format!(
        "training {} parameters for {} epochs",
        model.param_count(),
        cfg.train.n_epochs
    ));
    let echo = cfg.echo();
    let mut progress = Progress {
        run,
        echo: &echo,
        every: (cfg.train.n_epochs / 20).max(1),
        error: None,
    };
    let result = train(model, &problem, &cfg.train, &mut progress);
    let pending = progress.error.take();
    let wall = cfg.output.wall_time;
    match result {
        Ok(out) => {
            run.write("loss_history.csv", |w| out.history.write_csv(w, wall))?;
            let ckpt = Checkpoint {
                config_echo: echo,
                model: out.model,
            };
            let path = run.file("model.bin");
            ckpt.save(&path)?;
            if let Some(last) = out.history.last() {
                run.log(format!("final total loss {:.6e}, boundary loss {:.6e}", last.total, last.l_bc));
            }
            Ok(ckpt.model)
        }
        Err(TrainError::Divergence {
            epoch,
            last_good,
            history,
        }) => {
            run.write("loss_history.csv", |w| history.write_csv(w, wall))?;
            let ckpt = Checkpoint {
                config_echo: echo,
                model: *last_good,
            };
            ckpt.save(&run.file("model-last-good.bin"))?;
            run.log(format!("diverged at epoch {epoch}; last good model saved"));
            Err(CliError::Train(TrainError::Divergence {
                epoch,
                last_good: Box::new(ckpt.model),
                history,
            }))
        }
        Err(e) => Err(pending.unwrap_or(CliError::Train(e))),
    }
}

fn time_label(t: f64) -> String {
    format!("{t}").replace('.', "p")
}

/// Run the reference solver and write its snapshots and mass audit.
pub fn solve_reference(cfg: &RunConfig, run: &mut RunDir) -> Result<(SfemSolver, ReferenceRun), CliError> {
    let s = surface(cfg);
    let mesh = TriMesh::build(&s, cfg.sfem.n)?;
    let ic = InitialCondition::new(cfg.physics.ic.clone());
    let initial = FieldSnapshot::initial(&mesh, &ic);
    let solver = SfemSolver::new(mesh, cfg.physics.params(), cfg.sfem.dt, cfg.sfem.kinetics)?;
    run.log(format!(
        "reference mesh: {} vertices, {} triangles, area {:.6}",
        solver.mesh.n_vertices(),
        solver.mesh.triangles.len(),
        solver.mesh.area()
    ));
    let result = run_reference(&solver, initial, &cfg.sfem)?;
    run.log(format!(
        "{} steps, {:.2} ms per step",
        result.steps, result.mean_step_ms
    ));
    for snap in &result.snapshots {
        let label = time_label(snap.time);
        run.write(&format!("sfem-t{label}.csv"), |w| write_snapshot_csv(w, &solver.mesh, snap))?;
        if cfg.output.vtk {
            run.write(&format!("sfem-t{label}.vtk"), |w| write_snapshot_vtk(w, &solver, snap))?;
        }
    }
    run.write("sfem_mass.csv", |w| {
        writeln!(w, "time,mass_u,mass_v,net_source_u")?;
        for snap in &result.snapshots {
            writeln!(
                w,
                "{},{:.15e},{:.15e},{:.15e}",
                snap.time,
                snap.mass_u(&solver.mesh),
                snap.mass_v(&solver.mesh),
                solver.net_source_u(snap)
            )?;
        }
        Ok(())
    })?;
    let a = result.audit;
    run.write("sfem_audit.csv", |w| {
        writeln!(w, "metric,value")?;
        writeln!(w, "initial_mass_u,{:.15e}", a.initial_mass_u)?;
        writeln!(w, "final_mass_u,{:.15e}", a.final_mass_u)?;
        writeln!(w, "integrated_source_u,{:.15e}", a.integrated_source_u)?;
        writeln!(w, "unexplained_u,{:.15e}", a.unexplained())?;
        writeln!(w, "max_step_mismatch,{:.15e}", a.max_step_mismatch)
    })?;
    Ok((solver, result))
}

/// Load a checkpoint, or train one into this run directory.
pub fn obtain_model(cfg: &RunConfig, run: &mut RunDir, model: Option<&Path>) -> Result<FieldModel, CliError> {
    match model {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            run.log(format!("loaded model from {}", path.display()));
            if (ckpt.model.horizon - cfg.physics.horizon).abs() > 0.0 {
                return Err(CliError::Validation {
                    field: "physics.horizon".into(),
                    reason: format!(
                        "model was trained with horizon {}, configuration has {}",
                        ckpt.model.horizon, cfg.physics.horizon
                    ),
                });
            }
            Ok(ckpt.model)
        }
        None => train_model(cfg, run),
    }
}

/// `compare`: network against the reference solver.
pub fn compare(cfg: &RunConfig, run: &mut RunDir, model: Option<&Path>) -> Result<ComparisonReport, CliError> {
    if cfg.sfem.t_end > cfg.physics.horizon {
        return Err(CliError::Validation {
            field: "sfem.t_end".into(),
            reason: "must not exceed physics.horizon when comparing".into(),
        });
    }
    let model = obtain_model(cfg, run, model)?;
    let (solver, reference) = solve_reference(cfg, run)?;
    let s = surface(cfg);
    let geom = VertexGeometry::new(&s, &solver.mesh, &solver.params);
    let res = resource_report(&model.params, Some(&solver));
    let report = compare_runs(
        &model,
        &solver,
        &geom,
        &reference.snapshots,
        cfg.output.early_window,
        res.param_bytes,
    )?;
    run.write("comparison.csv", |w| report.write_csv(w))?;
    run.write("comparison.txt", |w| report.write_text(w))?;
    run.write("resources.csv", |w| {
        writeln!(w, "metric,value")?;
        writeln!(w, "param_count,{}", res.param_count)?;
        writeln!(w, "param_bytes,{}", res.param_bytes)?;
        writeln!(w, "mesh_vertices,{}", res.mesh_vertices)?;
        writeln!(w, "mesh_dof,{}", res.mesh_dof)?;
        writeln!(w, "stiffness_nnz,{}", res.stiffness_nnz)
    })?;
    run.log(format!(
        "early rel L2 U {:.4e}, mass violation network {:.4e}, reference {:.4e}",
        report.rel_l2_u, report.mass_violation_pinn, report.mass_violation_sfem
    ));
    Ok(report)
}

/// Network fields sampled on the output grid at one time.
pub struct FieldMaps {
    pub n: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub grad_u: Vec<f64>,
    pub reaction: Vec<f64>,
    pub phi: Vec<f64>,
}

pub fn field_maps<S: Surface + ?Sized>(model: &FieldModel, surface: &S, n: usize, t: f64) -> FieldMaps {
    let nodes: Vec<(f64, f64)> = grid_nodes(n).collect();
    let samples: Vec<[f64; 5]> = nodes
        .par_iter()
        .map(|&(x, y)| {
            let j = model.jets_at(x, y, t);
            let m = metric_at(surface, x, y);
            [
                j.u.value,
                j.v.value,
                intrinsic_grad_norm(&j.u, &m),
                reaction_rate(j.u.value, j.v.value),
                chemical_potential(x, y),
            ]
        })
        .collect();
    let col = |k: usize| samples.iter().map(|s| s[k]).collect();
    FieldMaps {
        n: n.max(2),
        u: col(0),
        v: col(1),
        grad_u: col(2),
        reaction: col(3),
        phi: col(4),
    }
}

/// `export`: field table and heat maps of the network solution.
pub fn export(cfg: &RunConfig, run: &mut RunDir, model: Option<&Path>) -> Result<(), CliError> {
    let model = obtain_model(cfg, run, model)?;
    let s = surface(cfg);
    let t = cfg.output.export_time.min(cfg.physics.horizon);
    let maps = field_maps(&model, &s, cfg.output.grid, t);
    let nodes: Vec<(f64, f64)> = grid_nodes(cfg.output.grid).collect();
    run.write("fields.csv", |w| {
        writeln!(w, "u,v,U,V,grad_U,UV2,phi")?;
        for (i, (x, y)) in nodes.iter().enumerate() {
            writeln!(
                w,
                "{x},{y},{},{},{},{},{}",
                maps.u[i], maps.v[i], maps.grad_u[i], maps.reaction[i], maps.phi[i]
            )?;
        }
        Ok(())
    })?;
    let rho = rank_correlation(&maps.grad_u, &maps.reaction);
    run.log(format!("t = {t}: rank correlation of |grad U| and UV^2 is {rho:.4}"));
    if cfg.output.ppm {
        for (name, values) in [
            ("U", &maps.u),
            ("V", &maps.v),
            ("grad_U", &maps.grad_u),
            ("UV2", &maps.reaction),
            ("phi", &maps.phi),
        ] {
            run.write(&format!("{name}.ppm"), |w| write_ppm(w, maps.n, maps.n, values, Ramp::Viridis))?;
        }
    }
    Ok(())
}
