//! Analytic Monge-patch geometry for the "stochastic cloth" surface.
//!
//! The surface is the graph `r(u,v) = (u, v, z(u,v))` over the unit square,
//! with `z` a sum of sinusoidal wrinkles, a random-Fourier-feature Gaussian
//! random field, and a smooth sag term. Every piece has closed-form partial
//! derivatives up to third order, so the metric, its inverse, and the
//! coefficients of the Laplace-Beltrami operator are all exact.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

const TWO_PI: f64 = 2.0 * PI;

/// Partial derivatives of the height function at one point.
///
/// Entries above the requested order are left at zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeightJet {
    pub z: f64,
    pub zu: f64,
    pub zv: f64,
    pub zuu: f64,
    pub zuv: f64,
    pub zvv: f64,
    pub zuuu: f64,
    pub zuuv: f64,
    pub zuvv: f64,
    pub zvvv: f64,
}

impl std::ops::AddAssign for HeightJet {
    fn add_assign(&mut self, o: Self) {
        self.z += o.z;
        self.zu += o.zu;
        self.zv += o.zv;
        self.zuu += o.zuu;
        self.zuv += o.zuv;
        self.zvv += o.zvv;
        self.zuuu += o.zuuu;
        self.zuuv += o.zuuv;
        self.zuvv += o.zuvv;
        self.zvvv += o.zvvv;
    }
}

impl HeightJet {
    fn truncate(mut self, order: u8) -> Self {
        if order < 1 {
            self.zu = 0.0;
            self.zv = 0.0;
        }
        if order < 2 {
            self.zuu = 0.0;
            self.zuv = 0.0;
            self.zvv = 0.0;
        }
        if order < 3 {
            self.zuuu = 0.0;
            self.zuuv = 0.0;
            self.zuvv = 0.0;
            self.zvvv = 0.0;
        }
        self
    }
}

/// A height function over the unit square with analytic derivatives.
///
/// `HeightField` is the production implementation. Any other closed form can
/// be plugged in by implementing this trait, which is how the exact oracle
/// tests substitute ramps, saddles, and paraboloids.
pub trait Surface: Send + Sync {
    /// Height and its partials up to `order` (clamped to 3).
    fn height(&self, u: f64, v: f64, order: u8) -> HeightJet;
}

impl<S: Surface + ?Sized> Surface for &S {
    fn height(&self, u: f64, v: f64, order: u8) -> HeightJet {
        (**self).height(u, v, order)
    }
}

impl<S: Surface + ?Sized> Surface for std::sync::Arc<S> {
    fn height(&self, u: f64, v: f64, order: u8) -> HeightJet {
        (**self).height(u, v, order)
    }
}

/// One sinusoidal wrinkle `A sin(2π ω_u u + φ) cos(2π ω_v v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrinkleMode {
    pub amplitude: f64,
    pub freq_u: f64,
    pub freq_v: f64,
    pub phase: f64,
}

impl WrinkleMode {
    fn jet(&self, u: f64, v: f64) -> HeightJet {
        let a = TWO_PI * self.freq_u;
        let b = TWO_PI * self.freq_v;
        let amp = self.amplitude;
        let (s, c) = (a * u + self.phase).sin_cos();
        let (q, p) = (b * v).sin_cos();
        HeightJet {
            z: amp * s * p,
            zu: amp * a * c * p,
            zv: -amp * b * s * q,
            zuu: -amp * a * a * s * p,
            zuv: -amp * a * b * c * q,
            zvv: -amp * b * b * s * p,
            zuuu: -amp * a * a * a * c * p,
            zuuv: amp * a * a * b * s * q,
            zuvv: -amp * a * b * b * c * p,
            zvvv: amp * b * b * b * s * q,
        }
    }
}

/// Parameters of the random-Fourier-feature Gaussian random field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrfSpec {
    /// Marginal standard deviation (height units).
    pub sigma: f64,
    /// Correlation length of the squared-exponential kernel.
    pub correlation_length: f64,
    pub n_modes: usize,
    pub seed: u64,
}

impl Default for GrfSpec {
    fn default() -> Self {
        Self {
            sigma: 0.02,
            correlation_length: 0.08,
            n_modes: 256,
            seed: 20_240_917,
        }
    }
}

/// A realized GRF: `σ √(2/n) Σ cos(k_m·x + ψ_m)` with `k_m ~ N(0, ℓ⁻² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrfRealization {
    spec: GrfSpec,
    amp: f64,
    // (k_u, k_v, phase) per mode
    modes: Vec<[f64; 3]>,
}

impl GrfRealization {
    pub fn new(spec: GrfSpec) -> Self {
        let n = spec.n_modes.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let std = 1.0 / spec.correlation_length;
        let normal = Normal::new(0.0, std).expect("correlation length must be positive and finite");
        let modes = (0..n)
            .map(|_| {
                let ku = normal.sample(&mut rng);
                let kv = normal.sample(&mut rng);
                let phase = rng.random::<f64>() * TWO_PI;
                [ku, kv, phase]
            })
            .collect();
        Self {
            spec,
            amp: spec.sigma * (2.0 / n as f64).sqrt(),
            modes,
        }
    }

    pub fn spec(&self) -> &GrfSpec {
        &self.spec
    }

    /// Field value and partials up to `order`.
    pub fn realize(&self, u: f64, v: f64, order: u8) -> HeightJet {
        let mut out = HeightJet::default();
        if self.spec.sigma == 0.0 {
            return out;
        }
        for &[ku, kv, phase] in &self.modes {
            let (s, c) = (ku * u + kv * v + phase).sin_cos();
            out.z += c;
            if order >= 1 {
                out.zu -= ku * s;
                out.zv -= kv * s;
            }
            if order >= 2 {
                out.zuu -= ku * ku * c;
                out.zuv -= ku * kv * c;
                out.zvv -= kv * kv * c;
            }
            if order >= 3 {
                out.zuuu += ku * ku * ku * s;
                out.zuuv += ku * ku * kv * s;
                out.zuvv += ku * kv * kv * s;
                out.zvvv += kv * kv * kv * s;
            }
        }
        let a = self.amp;
        HeightJet {
            z: a * out.z,
            zu: a * out.zu,
            zv: a * out.zv,
            zuu: a * out.zuu,
            zuv: a * out.zuv,
            zvv: a * out.zvv,
            zuuu: a * out.zuuu,
            zuuv: a * out.zuuv,
            zuvv: a * out.zuvv,
            zvvv: a * out.zvvv,
        }
    }
}

/// Evaluate a GRF spec directly. Rebuilds the realization; prefer
/// [`GrfRealization`] for repeated evaluation.
pub fn grf_realize(spec: &GrfSpec, u: f64, v: f64, order: u8) -> HeightJet {
    GrfRealization::new(*spec).realize(u, v, order)
}

/// Serializable description of the height field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldConfig {
    pub wrinkles: Vec<WrinkleMode>,
    pub grf: GrfSpec,
    /// Depth `a` of the sag term `-a sin(πu) sin(πv)`.
    pub sag_amplitude: f64,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        let amps = [0.05, 0.03, 0.02];
        let fu = [2.0, 5.0, 9.0];
        let fv = [3.0, 7.0, 11.0];
        let ph = [0.0, 1.3, 2.1];
        Self {
            wrinkles: (0..3)
                .map(|k| WrinkleMode {
                    amplitude: amps[k],
                    freq_u: fu[k],
                    freq_v: fv[k],
                    phase: ph[k],
                })
                .collect(),
            grf: GrfSpec::default(),
            sag_amplitude: 0.05,
        }
    }
}

/// A manifold parameter outside its admissible range.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid manifold configuration: {field}: {reason}")]
pub struct GeometryError {
    pub field: &'static str,
    pub reason: &'static str,
}

impl ManifoldConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let err = |field, reason| Err(GeometryError { field, reason });
        for w in &self.wrinkles {
            if !w.amplitude.is_finite() || !w.phase.is_finite() {
                return err("wrinkles", "amplitude and phase must be finite");
            }
            if !(w.freq_u.is_finite() && w.freq_u >= 0.0 && w.freq_v.is_finite() && w.freq_v >= 0.0) {
                return err("wrinkles", "frequencies must be finite and non-negative");
            }
        }
        let g = &self.grf;
        if !(g.sigma.is_finite() && g.sigma >= 0.0) {
            return err("grf.sigma", "must be finite and non-negative");
        }
        if !(g.correlation_length.is_finite() && g.correlation_length > 0.0) {
            return err("grf.correlation_length", "must be positive");
        }
        if g.n_modes == 0 {
            return err("grf.n_modes", "must be at least 1");
        }
        if !self.sag_amplitude.is_finite() {
            return err("sag_amplitude", "must be finite");
        }
        Ok(())
    }

    /// A surface with no wrinkles, no roughness, and no sag.
    pub fn flat() -> Self {
        Self {
            wrinkles: Vec::new(),
            grf: GrfSpec {
                sigma: 0.0,
                ..GrfSpec::default()
            },
            sag_amplitude: 0.0,
        }
    }
}

/// Wrinkles + GRF + sag.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    config: ManifoldConfig,
    grf: GrfRealization,
}

impl HeightField {
    pub fn new(config: ManifoldConfig) -> Self {
        let grf = GrfRealization::new(config.grf);
        Self { config, grf }
    }

    pub fn config(&self) -> &ManifoldConfig {
        &self.config
    }

    fn sag(&self, u: f64, v: f64) -> HeightJet {
        let a = self.config.sag_amplitude;
        if a == 0.0 {
            return HeightJet::default();
        }
        let (su, cu) = (PI * u).sin_cos();
        let (sv, cv) = (PI * v).sin_cos();
        let p2 = PI * PI;
        let p3 = p2 * PI;
        HeightJet {
            z: -a * su * sv,
            zu: -a * PI * cu * sv,
            zv: -a * PI * su * cv,
            zuu: a * p2 * su * sv,
            zuv: -a * p2 * cu * cv,
            zvv: a * p2 * su * sv,
            zuuu: a * p3 * cu * sv,
            zuuv: a * p3 * su * cv,
            zuvv: a * p3 * cu * sv,
            zvvv: a * p3 * su * cv,
        }
    }
}

impl Default for HeightField {
    fn default() -> Self {
        Self::new(ManifoldConfig::default())
    }
}

impl Surface for HeightField {
    fn height(&self, u: f64, v: f64, order: u8) -> HeightJet {
        let order = order.min(3);
        let mut out = HeightJet::default();
        for w in &self.config.wrinkles {
            out += w.jet(u, v);
        }
        out += self.grf.realize(u, v, order);
        out += self.sag(u, v);
        out.truncate(order)
    }
}

/// `height_at` in free-function form.
pub fn height_at<S: Surface + ?Sized>(surface: &S, u: f64, v: f64, order: u8) -> HeightJet {
    surface.height(u, v, order)
}

/// Closed-form surfaces used as exact oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    /// z = 0
    Flat,
    /// z = u
    RampU,
    /// z = u v
    Saddle,
    /// z = (u² + v²) / 2
    Paraboloid,
    /// z = u² / 2
    Cylinder,
}

impl Surface for ClosedForm {
    fn height(&self, u: f64, v: f64, order: u8) -> HeightJet {
        let j = match self {
            ClosedForm::Flat => HeightJet::default(),
            ClosedForm::RampU => HeightJet {
                z: u,
                zu: 1.0,
                ..HeightJet::default()
            },
            ClosedForm::Saddle => HeightJet {
                z: u * v,
                zu: v,
                zv: u,
                zuv: 1.0,
                ..HeightJet::default()
            },
            ClosedForm::Paraboloid => HeightJet {
                z: 0.5 * (u * u + v * v),
                zu: u,
                zv: v,
                zuu: 1.0,
                zvv: 1.0,
                ..HeightJet::default()
            },
            ClosedForm::Cylinder => HeightJet {
                z: 0.5 * u * u,
                zu: u,
                zuu: 1.0,
                ..HeightJet::default()
            },
        };
        j.truncate(order.min(3))
    }
}

/// Adapter turning any closure into a [`Surface`].
pub struct FnSurface<F>(pub F);

impl<F> Surface for FnSurface<F>
where
    F: Fn(f64, f64) -> HeightJet + Send + Sync,
{
    fn height(&self, u: f64, v: f64, order: u8) -> HeightJet {
        (self.0)(u, v).truncate(order.min(3))
    }
}

/// First fundamental form and the coefficients of the Laplace-Beltrami
/// operator at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub g: [[f64; 2]; 2],
    pub g_inv: [[f64; 2]; 2],
    pub det_g: f64,
    pub sqrt_det_g: f64,
    /// `d_sqrtg_ginv[i][j] = ∂_i (√|g| g^{ij})`.
    pub d_sqrtg_ginv: [[f64; 2]; 2],
}

impl MetricSample {
    /// The Euclidean metric.
    pub fn flat() -> Self {
        Self::from_height(&HeightJet::default())
    }

    pub fn from_height(h: &HeightJet) -> Self {
        let (zu, zv) = (h.zu, h.zv);
        let det = 1.0 + zu * zu + zv * zv;
        let sqrt_det = det.sqrt();
        let adj = [[1.0 + zv * zv, -zu * zv], [-zu * zv, 1.0 + zu * zu]];
        let g_inv = [
            [adj[0][0] / det, adj[0][1] / det],
            [adj[1][0] / det, adj[1][1] / det],
        ];
        // ∂_k of z_u and z_v along k ∈ {u, v}
        let zu_k = [h.zuu, h.zuv];
        let zv_k = [h.zuv, h.zvv];
        let s = 1.0 / sqrt_det;
        let s3 = s * s * s;
        let mut d = [[0.0; 2]; 2];
        for (i, row) in d.iter_mut().enumerate() {
            let ddet = 2.0 * (zu * zu_k[i] + zv * zv_k[i]);
            let dadj = [
                [2.0 * zv * zv_k[i], -(zu_k[i] * zv + zu * zv_k[i])],
                [-(zu_k[i] * zv + zu * zv_k[i]), 2.0 * zu * zu_k[i]],
            ];
            for (j, e) in row.iter_mut().enumerate() {
                *e = -0.5 * s3 * ddet * adj[i][j] + s * dadj[i][j];
            }
        }
        Self {
            g: [[1.0 + zu * zu, zu * zv], [zu * zv, 1.0 + zv * zv]],
            g_inv,
            det_g: det,
            sqrt_det_g: sqrt_det,
            d_sqrtg_ginv: d,
        }
    }

    /// First-order coefficient `b_j = |g|^{-1/2} Σ_i ∂_i(√|g| g^{ij})` of the
    /// expanded Laplace-Beltrami operator.
    pub fn drift(&self) -> [f64; 2] {
        let inv = 1.0 / self.sqrt_det_g;
        [
            inv * (self.d_sqrtg_ginv[0][0] + self.d_sqrtg_ginv[1][0]),
            inv * (self.d_sqrtg_ginv[0][1] + self.d_sqrtg_ginv[1][1]),
        ]
    }
}

pub fn metric_at<S: Surface + ?Sized>(surface: &S, u: f64, v: f64) -> MetricSample {
    MetricSample::from_height(&surface.height(u, v, 2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSample {
    pub gaussian_k: f64,
    pub mean_h: f64,
}

impl CurvatureSample {
    pub fn from_height(h: &HeightJet) -> Self {
        let det = 1.0 + h.zu * h.zu + h.zv * h.zv;
        let k = (h.zuu * h.zvv - h.zuv * h.zuv) / (det * det);
        let num = (1.0 + h.zv * h.zv) * h.zuu - 2.0 * h.zu * h.zv * h.zuv
            + (1.0 + h.zu * h.zu) * h.zvv;
        Self {
            gaussian_k: k,
            mean_h: num / (2.0 * det * det.sqrt()),
        }
    }
}

/// Gaussian and mean curvature from the Monge-patch formulas.
pub fn curvature_at<S: Surface + ?Sized>(surface: &S, u: f64, v: f64) -> CurvatureSample {
    CurvatureSample::from_height(&surface.height(u, v, 2))
}

/// `φ(u,v) = cos(4πu) sin(4πv)`, the feed-rate modulation field.
pub fn chemical_potential(u: f64, v: f64) -> f64 {
    (4.0 * PI * u).cos() * (4.0 * PI * v).sin()
}

/// `∫∫ √det g du dv` by the composite trapezoid rule on a
/// `resolution × resolution` node grid (resolution ≥ 2).
pub fn surface_area<S: Surface + ?Sized>(surface: &S, resolution: usize) -> f64 {
    let n = resolution.max(2);
    let h = 1.0 / (n - 1) as f64;
    let mut total = 0.0;
    for i in 0..n {
        let wu = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let u = i as f64 * h;
        let mut row = 0.0;
        for j in 0..n {
            let wv = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            let v = j as f64 * h;
            let hj = surface.height(u, v, 1);
            row += wv * (1.0 + hj.zu * hj.zu + hj.zv * hj.zv).sqrt();
        }
        total += wu * row;
    }
    total * h * h
}

/// Uniform node grid over the unit square, `n` nodes per side, row-major in v.
pub fn grid_nodes(n: usize) -> impl Iterator<Item = (f64, f64)> {
    let n = n.max(2);
    let h = 1.0 / (n - 1) as f64;
    (0..n).flat_map(move |j| (0..n).map(move |i| (i as f64 * h, j as f64 * h)))
}
