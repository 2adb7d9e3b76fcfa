//! Surface finite element baseline: piecewise linear elements on the
//! triangulated patch, cotangent stiffness, lumped mass, and semi-implicit
//! Euler stepping with implicit diffusion and explicit kinetics.

mod export;
mod mesh;
mod sparse;

pub use export::{write_snapshot_csv, write_snapshot_vtk, write_vtk_polydata};
pub use mesh::{cot_at, triangle_area, TriMesh};
pub use sparse::{pcg, CgReport, SparseOperator};

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{modulated_feed, GrayScottParams, InitialCondition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SfemError {
    #[error("invalid solver configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("triangle {index} is degenerate (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },
    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {relative_residual:e})")]
    CgNoConvergence {
        iterations: usize,
        relative_residual: f64,
    },
    #[error("field length {got} does not match {expected} mesh vertices")]
    LengthMismatch { expected: usize, got: usize },
}

/// Relative residual target of every linear solve.
pub const CG_TOLERANCE: f64 = 1e-10;

/// `A_ij = −(cot α_ij + cot β_ij)/2` off the diagonal and
/// `A_ii = −Σ_j A_ij`.
pub fn assemble_stiffness(mesh: &TriMesh) -> SparseOperator {
    let mut triplets = Vec::with_capacity(mesh.triangles.len() * 12);
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, i, j) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let w = 0.5 * cot_at(mesh.vertices[a], mesh.vertices[i], mesh.vertices[j]);
            triplets.push((i, j, -w));
            triplets.push((j, i, -w));
            triplets.push((i, i, w));
            triplets.push((j, j, w));
        }
    }
    SparseOperator::from_triplets(mesh.n_vertices(), triplets)
}

/// Concentrations at mesh vertices at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub time: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FieldSnapshot {
    /// Sample an initial condition at the mesh vertices.
    pub fn initial(mesh: &TriMesh, ic: &InitialCondition) -> Self {
        let (u, v) = mesh.params.iter().map(|p| ic.pair(p[0], p[1])).unzip();
        Self { time: 0.0, u, v }
    }

    pub fn uniform(mesh: &TriMesh, u: f64, v: f64) -> Self {
        Self {
            time: 0.0,
            u: vec![u; mesh.n_vertices()],
            v: vec![v; mesh.n_vertices()],
        }
    }

    /// Lumped integral `Σ_i M_ii U_i`.
    pub fn mass_u(&self, mesh: &TriMesh) -> f64 {
        mesh.lumped_area.iter().zip(&self.u).map(|(m, u)| m * u).sum()
    }

    pub fn mass_v(&self, mesh: &TriMesh) -> f64 {
        mesh.lumped_area.iter().zip(&self.v).map(|(m, v)| m * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }
}

/// Whether the reaction terms are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Kinetics {
    #[default]
    GrayScott,
    /// Pure diffusion.
    Off,
}

/// Reference solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SfemConfig {
    /// Grid cells per side.
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Snapshot times; `0` and `t_end` are always included.
    pub checkpoints: Vec<f64>,
    pub kinetics: Kinetics,
}

impl Default for SfemConfig {
    fn default() -> Self {
        Self {
            n: 200,
            dt: 1.0,
            t_end: 2000.0,
            checkpoints: vec![10.0, 50.0, 100.0, 500.0, 1000.0, 2000.0],
            kinetics: Kinetics::GrayScott,
        }
    }
}

impl SfemConfig {
    pub fn validate(&self) -> Result<(), SfemError> {
        let err = |field, reason: &str| {
            Err(SfemError::Config {
                field,
                reason: reason.to_string(),
            })
        };
        if self.n < 1 {
            return err("n", "grid size must be at least 1");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return err("dt", "time step must be positive");
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return err("t_end", "end time must be non-negative");
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return err("t_end", "end time must be a multiple of dt");
        }
        if self.checkpoints.iter().any(|&t| !(0.0..=self.t_end).contains(&t)) {
            return err("checkpoints", "checkpoint times must lie in [0, t_end]");
        }
        Ok(())
    }

    /// Step indices at which snapshots are taken, ascending and unique.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let total = (self.t_end / self.dt).round() as usize;
        let mut s: Vec<usize> = self
            .checkpoints
            .iter()
            .map(|&t| (t / self.dt).round() as usize)
            .chain([0, total])
            .filter(|&k| k <= total)
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Mesh, operators and kinetics of one reference computation.
#[derive(Debug, Clone)]
pub struct SfemSolver {
    pub mesh: TriMesh,
    pub stiffness: SparseOperator,
    pub params: GrayScottParams,
    /// Feed rate at each vertex.
    pub feed: Vec<f64>,
    pub dt: f64,
    pub kinetics: Kinetics,
    system_u: SparseOperator,
    system_v: SparseOperator,
    max_iter: usize,
}

impl SfemSolver {
    pub fn new(
        mesh: TriMesh,
        params: GrayScottParams,
        dt: f64,
        kinetics: Kinetics,
    ) -> Result<Self, SfemError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SfemError::Config {
                field: "dt",
                reason: "time step must be positive".into(),
            });
        }
        let stiffness = assemble_stiffness(&mesh);
        let feed = mesh
            .params
            .iter()
            .map(|p| modulated_feed(&params, p[0], p[1]))
            .collect();
        let m_dt: Vec<f64> = mesh.lumped_area.iter().map(|m| m / dt).collect();
        let system_u = stiffness.scaled_plus_diagonal(params.d_u, &m_dt);
        let system_v = stiffness.scaled_plus_diagonal(params.d_v, &m_dt);
        let max_iter = (10.0 * (mesh.n_vertices() as f64).sqrt()).ceil() as usize;
        Ok(Self {
            mesh,
            stiffness,
            params,
            feed,
            dt,
            kinetics,
            system_u,
            system_v,
            max_iter,
        })
    }

    /// Vertex-wise reaction terms `(R_U, R_V)`.
    pub fn reaction(&self, state: &FieldSnapshot) -> (Vec<f64>, Vec<f64>) {
        if self.kinetics == Kinetics::Off {
            let z = vec![0.0; self.mesh.n_vertices()];
            return (z.clone(), z);
        }
        let k = self.params.k;
        state
            .u
            .iter()
            .zip(&state.v)
            .zip(&self.feed)
            .map(|((&u, &v), &f)| {
                let uv2 = u * v * v;
                (-uv2 + f * (1.0 - u), uv2 - (f + k) * v)
            })
            .unzip()
    }

    /// Solve `(M/dt + D A) ψ⁺ = (M/dt) ψ + M R` for both species.
    pub fn step(&self, state: &FieldSnapshot) -> Result<FieldSnapshot, SfemError> {
        let n = self.mesh.n_vertices();
        if state.u.len() != n || state.v.len() != n {
            return Err(SfemError::LengthMismatch {
                expected: n,
                got: state.u.len().min(state.v.len()),
            });
        }
        let (ru, rv) = self.reaction(state);
        let rhs = |psi: &[f64], r: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| self.mesh.lumped_area[i] * (psi[i] / self.dt + r[i]))
                .collect()
        };
        let mut u = state.u.clone();
        let mut v = state.v.clone();
        pcg(&self.system_u, &rhs(&state.u, &ru), &mut u, CG_TOLERANCE, self.max_iter)?;
        pcg(&self.system_v, &rhs(&state.v, &rv), &mut v, CG_TOLERANCE, self.max_iter)?;
        Ok(FieldSnapshot {
            time: state.time + self.dt,
            u,
            v,
        })
    }

    /// `∫ (−UV² + F(1−U)) dM` with lumped quadrature; the diffusion part
    /// integrates to zero because the stiffness rows sum to zero.
    pub fn net_source_u(&self, state: &FieldSnapshot) -> f64 {
        let (ru, _) = self.reaction(state);
        self.mesh.lumped_area.iter().zip(&ru).map(|(m, r)| m * r).sum::<f64>()
            - self.params.d_u * self.stiffness.mul(&state.u).iter().sum::<f64>()
    }
}

/// Discrete mass bookkeeping of a reference run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MassAudit {
    pub initial_mass_u: f64,
    pub final_mass_u: f64,
    /// `Σ_n dt ∫ R_U(ψⁿ) dM`.
    pub integrated_source_u: f64,
    /// Largest per-step `|ΔM_U − dt ∫R_U dM|`.
    pub max_step_mismatch: f64,
}

impl MassAudit {
    /// Mass change not explained by the discrete source terms.
    pub fn unexplained(&self) -> f64 {
        self.final_mass_u - self.initial_mass_u - self.integrated_source_u
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub snapshots: Vec<FieldSnapshot>,
    pub audit: MassAudit,
    pub steps: usize,
    pub mean_step_ms: f64,
}

/// March from `initial` to `config.t_end`, keeping snapshots at the
/// configured times.
pub fn run_reference(
    solver: &SfemSolver,
    initial: FieldSnapshot,
    config: &SfemConfig,
) -> Result<ReferenceRun, SfemError> {
    config.validate()?;
    let keep = config.snapshot_steps();
    let total = *keep.last().expect("t_end always kept");
    let mut snapshots = Vec::with_capacity(keep.len());
    let mut next = 0;
    let mut state = initial;
    let m0 = state.mass_u(&solver.mesh);
    let mut audit = MassAudit {
        initial_mass_u: m0,
        final_mass_u: m0,
        ..MassAudit::default()
    };
    let start = Instant::now();
    for k in 0..=total {
        if keep.get(next) == Some(&k) {
            let mut snap = state.clone();
            snap.time = k as f64 * solver.dt;
            snapshots.push(snap);
            next += 1;
        }
        if k == total {
            break;
        }
        let before = state.mass_u(&solver.mesh);
        let (ru, _) = solver.reaction(&state);
        let source = solver.dt
            * solver
                .mesh
                .lumped_area
                .iter()
                .zip(&ru)
                .map(|(m, r)| m * r)
                .sum::<f64>();
        state = solver.step(&state)?;
        let after = state.mass_u(&solver.mesh);
        audit.integrated_source_u += source;
        audit.max_step_mismatch = audit.max_step_mismatch.max((after - before - source).abs());
        audit.final_mass_u = after;
    }
    let mean_step_ms = if total > 0 {
        start.elapsed().as_secs_f64() * 1e3 / total as f64
    } else {
        0.0
    };
    Ok(ReferenceRun {
        snapshots,
        audit,
        steps: total,
        mean_step_ms,
    })
}

/// Smallest nonzero eigenvalue of `A x = λ M x` by shifted inverse
/// iteration in the `M`-orthogonal complement of the constants.
pub fn smallest_nonzero_eigenvalue(
    stiffness: &SparseOperator,
    lumped: &[f64],
    iterations: usize,
) -> Result<f64, SfemError> {
    let n = stiffness.n;
    let shift = 1.0;
    let system = stiffness.scaled_plus_diagonal(1.0, &lumped.iter().map(|m| shift * m).collect::<Vec<_>>());
    let total: f64 = lumped.iter().sum();
    let project = |x: &mut Vec<f64>| {
        let c = x.iter().zip(lumped).map(|(x, m)| x * m).sum::<f64>() / total;
        x.iter_mut().for_each(|v| *v -= c);
        let nrm = x.iter().zip(lumped).map(|(x, m)| m * x * x).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= nrm);
    };
    let mut x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1013) as f64 / 1013.0 - 0.5).collect();
    project(&mut x);
    let rayleigh = |x: &[f64]| {
        let ax = stiffness.mul(x);
        let num: f64 = ax.iter().zip(x).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().zip(lumped).map(|(x, m)| m * x * x).sum();
        num / den
    };
    let mut lambda = rayleigh(&x);
    let cap = 50 * (n as f64).sqrt() as usize + 100;
    for _ in 0..iterations {
        let b: Vec<f64> = x.iter().zip(lumped).map(|(x, m)| x * m).collect();
        let mut y = x.clone();
        pcg(&system, &b, &mut y, 1e-12, cap)?;
        project(&mut y);
        x = y;
        let next = rayleigh(&x);
        let done = (next - lambda).abs() <= 1e-12 * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    Ok(lambda)
}
