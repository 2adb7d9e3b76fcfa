//! Error norms, conservation scores, geometry statistics, field maps and
//! resource accounting.

use std::io::{self, Write};

use thiserror::Error;

use crate::autodiff::Jet2;
use crate::geometry::{curvature_at, grid_nodes, metric_at, surface_area, MetricSample, Surface};
use crate::network::{FieldModel, JetOrder, NetworkParams};
use crate::physics::{laplace_beltrami, modulated_feed, GrayScottParams};
use crate::sfem::{FieldSnapshot, SfemSolver, TriMesh};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("reference field has zero norm")]
    ZeroReference,
    #[error("need at least {needed} checkpoints, got {got}")]
    TooFewCheckpoints { needed: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// `√(Σ wᵢ(predᵢ − refᵢ)²) / √(Σ wᵢ refᵢ²)`.
pub fn relative_l2(pred: &[f64], reference: &[f64], weights: &[f64]) -> Result<f64, MetricsError> {
    if pred.len() != reference.len() || weights.len() != reference.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), reference.len()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((p, r), w) in pred.iter().zip(reference).zip(weights) {
        num += w * (p - r) * (p - r);
        den += w * r * r;
    }
    if den.sqrt() < 1e-14 {
        return Err(MetricsError::ZeroReference);
    }
    Ok(num.sqrt() / den.sqrt())
}

/// Network fields sampled at the mesh vertices at time `t`.
pub fn pinn_snapshot(model: &FieldModel, mesh: &TriMesh, t: f64) -> FieldSnapshot {
    let inputs: Vec<[f64; 3]> = mesh.params.iter().map(|p| model.input(p[0], p[1], t)).collect();
    let eval = model.evaluate(&inputs, JetOrder::Value, false);
    let (u, v) = (0..eval.n_points())
        .map(|p| (eval.outputs[2 * p], eval.outputs[2 * p + 1]))
        .unzip();
    FieldSnapshot { time: t, u, v }
}

/// Mean of `|dM/dt − Φ| / (F₀ · area)` over checkpoints.
pub fn mass_violation_from_rates(rates: &[(f64, f64)], f0: f64, area: f64) -> f64 {
    let scale = f0 * area;
    rates.iter().map(|(d, phi)| (d - phi).abs() / scale).sum::<f64>() / rates.len() as f64
}

/// Finite-difference mass rates of a snapshot series: central in the
/// interior, one-sided at the ends.
pub fn series_mass_rates(times: &[f64], masses: &[f64]) -> Result<Vec<f64>, MetricsError> {
    let n = times.len();
    if n < 2 {
        return Err(MetricsError::TooFewCheckpoints { needed: 2, got: n });
    }
    if masses.len() != n {
        return Err(MetricsError::LengthMismatch(n, masses.len()));
    }
    Ok((0..n)
        .map(|k| {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            (masses[b] - masses[a]) / (times[b] - times[a])
        })
        .collect())
}

/// Conservation score of a reference run, with `dM/dt` from differences
/// between checkpoints and the net source from each snapshot.
pub fn sfem_mass_violation(solver: &SfemSolver, snapshots: &[FieldSnapshot]) -> Result<f64, MetricsError> {
    let times: Vec<f64> = snapshots.iter().map(|s| s.time).collect();
    let masses: Vec<f64> = snapshots.iter().map(|s| s.mass_u(&solver.mesh)).collect();
    let rates = series_mass_rates(&times, &masses)?;
    let pairs: Vec<(f64, f64)> = rates
        .into_iter()
        .zip(snapshots)
        .map(|(d, s)| (d, solver.net_source_u(s)))
        .collect();
    Ok(mass_violation_from_rates(&pairs, solver.params.f0, solver.mesh.area()))
}

/// Per-vertex geometry shared by all network evaluations on one mesh.
#[derive(Debug, Clone)]
pub struct VertexGeometry {
    pub metric: Vec<MetricSample>,
    pub feed: Vec<f64>,
}

impl VertexGeometry {
    pub fn new<S: Surface + ?Sized>(surface: &S, mesh: &TriMesh, params: &GrayScottParams) -> Self {
        Self {
            metric: mesh.params.iter().map(|p| metric_at(surface, p[0], p[1])).collect(),
            feed: mesh.params.iter().map(|p| modulated_feed(params, p[0], p[1])).collect(),
        }
    }
}

/// `(dM/dt, Φ)` of the network at time `t`, integrated with the lumped
/// vertex areas; `dM/dt` from the jet time derivative.
pub fn pinn_mass_rates(
    model: &FieldModel,
    mesh: &TriMesh,
    geom: &VertexGeometry,
    params: &GrayScottParams,
    t: f64,
) -> (f64, f64) {
    let inputs: Vec<[f64; 3]> = mesh.params.iter().map(|p| model.input(p[0], p[1], t)).collect();
    let eval = model.evaluate(&inputs, JetOrder::Spatial, false);
    let mut dm = 0.0;
    let mut phi = 0.0;
    for p in 0..eval.n_points() {
        let j = eval.jets(p);
        let w = mesh.lumped_area[p];
        let (u, v) = (j.u.value, j.v.value);
        dm += w * j.u.grad[2] / model.horizon;
        let lap = laplace_beltrami(&j.u, &geom.metric[p]);
        phi += w * (params.d_u * lap - u * v * v + geom.feed[p] * (1.0 - u));
    }
    (dm, phi)
}

pub fn pinn_mass_violation(
    model: &FieldModel,
    mesh: &TriMesh,
    geom: &VertexGeometry,
    params: &GrayScottParams,
    times: &[f64],
) -> Result<f64, MetricsError> {
    if times.is_empty() {
        return Err(MetricsError::TooFewCheckpoints { needed: 1, got: 0 });
    }
    let rates: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| pinn_mass_rates(model, mesh, geom, params, t))
        .collect();
    Ok(mass_violation_from_rates(&rates, params.f0, mesh.area()))
}

/// `|∇_M ψ| = √(g^{ij} ψ_{,i} ψ_{,j})`.
pub fn intrinsic_grad_norm(jet: &Jet2, metric: &MetricSample) -> f64 {
    let (a, b) = (jet.grad[0], jet.grad[1]);
    let gi = &metric.g_inv;
    (gi[0][0] * a * a + 2.0 * gi[0][1] * a * b + gi[1][1] * b * b)
        .max(0.0)
        .sqrt()
}

/// Autocatalytic rate `UV²`.
pub fn reaction_rate(u: f64, v: f64) -> f64 {
    u * v * v
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va * vb).sqrt()
}

/// Sample statistics of one quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Grid statistics of the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureStats {
    pub elevation: Stat,
    pub gaussian_k: Stat,
    pub mean_h: Stat,
    pub det_g: Stat,
    pub area: f64,
    pub grid: usize,
}

/// Statistics over an `n × n` node grid; area by the trapezoid rule on
/// the same grid.
pub fn curvature_stats<S: Surface + ?Sized>(surface: &S, n: usize) -> CurvatureStats {
    let mut z = Vec::new();
    let mut k = Vec::new();
    let mut h = Vec::new();
    let mut d = Vec::new();
    for (u, v) in grid_nodes(n) {
        let jet = surface.height(u, v, 2);
        let c = curvature_at(surface, u, v);
        z.push(jet.z);
        k.push(c.gaussian_k);
        h.push(c.mean_h);
        d.push(1.0 + jet.zu * jet.zu + jet.zv * jet.zv);
    }
    CurvatureStats {
        elevation: Stat::of(&z),
        gaussian_k: Stat::of(&k),
        mean_h: Stat::of(&h),
        det_g: Stat::of(&d),
        area: surface_area(surface, n),
        grid: n.max(2),
    }
}

impl CurvatureStats {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "quantity,mean,std,min,max")?;
        for (name, s) in [
            ("elevation_z", self.elevation),
            ("gaussian_curvature_K", self.gaussian_k),
            ("mean_curvature_H", self.mean_h),
            ("metric_determinant", self.det_g),
        ] {
            writeln!(w, "{name},{},{},{},{}", s.mean, s.std, s.min, s.max)?;
        }
        writeln!(w, "surface_area,{},,,", self.area)
    }
}

/// Storage and size accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceReport {
    pub param_count: usize,
    /// Bytes of the raw parameter tensors.
    pub param_bytes: usize,
    pub mesh_vertices: usize,
    /// Unknowns of the reference solver, two per vertex.
    pub mesh_dof: usize,
    pub stiffness_nnz: usize,
}

pub fn resource_report(params: &NetworkParams, solver: Option<&SfemSolver>) -> ResourceReport {
    let (mesh_vertices, stiffness_nnz) = solver.map_or((0, 0), |s| (s.mesh.n_vertices(), s.stiffness.nnz()));
    ResourceReport {
        param_count: params.len(),
        param_bytes: params.len() * std::mem::size_of::<f64>(),
        mesh_vertices,
        mesh_dof: 2 * mesh_vertices,
        stiffness_nnz,
    }
}

/// Errors at one comparison time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub time: f64,
    pub rel_l2_u: f64,
    pub rel_l2_v: f64,
}

/// Network versus reference solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Mean over rows with `0 < t < early_window`.
    pub rel_l2_u: f64,
    pub rel_l2_v: f64,
    pub mass_violation_pinn: f64,
    pub mass_violation_sfem: f64,
    pub param_count: usize,
    pub model_bytes: usize,
    pub mesh_dof: usize,
}

impl ComparisonReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,rel_l2_u,rel_l2_v")?;
        for r in &self.rows {
            writeln!(w, "{},{:.8e},{:.8e}", r.time, r.rel_l2_u, r.rel_l2_v)?;
        }
        writeln!(w)?;
        writeln!(w, "metric,value")?;
        writeln!(w, "rel_l2_u,{:.8e}", self.rel_l2_u)?;
        writeln!(w, "rel_l2_v,{:.8e}", self.rel_l2_v)?;
        writeln!(w, "mass_violation_pinn,{:.8e}", self.mass_violation_pinn)?;
        writeln!(w, "mass_violation_sfem,{:.8e}", self.mass_violation_sfem)?;
        writeln!(w, "param_count,{}", self.param_count)?;
        writeln!(w, "model_bytes,{}", self.model_bytes)?;
        writeln!(w, "mesh_dof,{}", self.mesh_dof)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{:>10}  {:>14}  {:>14}", "time", "rel L2 (U)", "rel L2 (V)")?;
        for r in &self.rows {
            writeln!(w, "{:>10}  {:>14.4e}  {:>14.4e}", r.time, r.rel_l2_u, r.rel_l2_v)?;
        }
        writeln!(w)?;
        let lines = [
            ("early rel L2 (U)", format!("{:.4e}", self.rel_l2_u)),
            ("early rel L2 (V)", format!("{:.4e}", self.rel_l2_v)),
            ("mass violation, network", format!("{:.4e}", self.mass_violation_pinn)),
            ("mass violation, SFEM", format!("{:.4e}", self.mass_violation_sfem)),
            ("trainable parameters", self.param_count.to_string()),
            ("model bytes", self.model_bytes.to_string()),
            ("mesh degrees of freedom", self.mesh_dof.to_string()),
        ];
        for (k, v) in lines {
            writeln!(w, "{k:<26}{v:>14}")?;
        }
        Ok(())
    }
}

/// Build the comparison from a reference run and a trained model.
pub fn compare(
    model: &FieldModel,
    solver: &SfemSolver,
    geom: &VertexGeometry,
    snapshots: &[FieldSnapshot],
    early_window: f64,
    model_bytes: usize,
) -> Result<ComparisonReport, MetricsError> {
    let w = &solver.mesh.lumped_area;
    let mut rows = Vec::new();
    for s in snapshots.iter().filter(|s| s.time > 0.0) {
        let p = pinn_snapshot(model, &solver.mesh, s.time);
        rows.push(ComparisonRow {
            time: s.time,
            rel_l2_u: relative_l2(&p.u, &s.u, w)?,
            rel_l2_v: relative_l2(&p.v, &s.v, w).unwrap_or(f64::NAN),
        });
    }
    let early: Vec<&ComparisonRow> = rows.iter().filter(|r| r.time < early_window).collect();
    let avg = |f: fn(&ComparisonRow) -> f64| {
        if early.is_empty() {
            f64::NAN
        } else {
            early.iter().map(|r| f(r)).sum::<f64>() / early.len() as f64
        }
    };
    let times: Vec<f64> = snapshots.iter().map(|s| s.time).collect();
    Ok(ComparisonReport {
        rel_l2_u: avg(|r| r.rel_l2_u),
        rel_l2_v: avg(|r| r.rel_l2_v),
        mass_violation_pinn: pinn_mass_violation(model, &solver.mesh, geom, &solver.params, &times)?,
        mass_violation_sfem: sfem_mass_violation(solver, snapshots)?,
        param_count: model.param_count(),
        model_bytes,
        mesh_dof: 2 * solver.mesh.n_vertices(),
        rows,
    })
}

/// Colour ramp of a heat map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ramp {
    Grayscale,
    Viridis,
}

const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

fn colour(s: f64, ramp: Ramp) -> [u8; 3] {
    let s = if s.is_finite() { s.clamp(0.0, 1.0) } else { 0.0 };
    match ramp {
        Ramp::Grayscale => {
            let g = (s * 255.0).round() as u8;
            [g, g, g]
        }
        Ramp::Viridis => {
            let x = s * (VIRIDIS.len() - 1) as f64;
            let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
            let f = x - i as f64;
            let c = |k: usize| (VIRIDIS[i][k] * (1.0 - f) + VIRIDIS[i + 1][k] * f).round() as u8;
            [c(0), c(1), c(2)]
        }
    }
}

/// Binary PPM (P6), one pixel per sample, row-major from the top row,
/// values scaled linearly from their min to max.
pub fn write_ppm<W: Write>(mut w: W, width: usize, height: usize, values: &[f64], ramp: Ramp) -> io::Result<()> {
    assert_eq!(values.len(), width * height);
    let lo = values.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    write!(w, "P6\n{width} {height}\n255\n")?;
    let mut buf = Vec::with_capacity(3 * values.len());
    for row in (0..height).rev() {
        for x in &values[row * width..(row + 1) * width] {
            buf.extend_from_slice(&colour((x - lo) / span, ramp));
        }
    }
    w.write_all(&buf)
}
