//! Gray-Scott kinetics on the manifold: the Laplace-Beltrami operator, PDE
//! and boundary residuals, the initial condition, and the composite loss.
//!
//! Everything that enters the training loss is generic over
//! [`Scalar`](crate::autodiff::Scalar), so the same code evaluates plain
//! numbers and records on the parameter tape.

mod initial;
mod loss;

pub use initial::{initial_field, InitialCondition, InitialConditionConfig, Species};
pub use loss::{
    bc_loss, ic_loss, mass_balance, mass_loss, mass_loss_at, pde_loss, total_loss, BoundaryPoint,
    CollocationPoint, InitialPoint, LossBatches, LossBreakdown, LossJets, LossWeights,
    MassQuadrature, QuadPoint,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Jet2, Scalar};
use crate::geometry::{chemical_potential, MetricSample};
use crate::network::FieldJets;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhysicsError {
    #[error("invalid physics configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Diffusivities and kinetic rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrayScottParams {
    pub d_u: f64,
    pub d_v: f64,
    /// Base feed rate `F₀`.
    pub f0: f64,
    /// Removal rate `k`.
    pub k: f64,
    /// Modulation depth `ε` of the feed rate.
    pub epsilon: f64,
}

impl Default for GrayScottParams {
    fn default() -> Self {
        Self {
            d_u: 2e-5,
            d_v: 1e-5,
            f0: 0.04,
            k: 0.06,
            epsilon: 0.25,
        }
    }
}

impl GrayScottParams {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let err = |field, reason: &str| {
            Err(PhysicsError::Config {
                field,
                reason: reason.to_string(),
            })
        };
        for (name, x) in [("d_u", self.d_u), ("d_v", self.d_v)] {
            if !(x.is_finite() && x > 0.0) {
                return err(name, "diffusivity must be positive and finite");
            }
        }
        if self.d_v >= self.d_u {
            return err("d_v", "Turing configuration requires d_v < d_u");
        }
        if !(self.f0.is_finite() && self.f0 >= 0.0) {
            return err("f0", "feed rate must be non-negative and finite");
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return err("k", "removal rate must be non-negative and finite");
        }
        if !(self.epsilon.is_finite() && self.epsilon.abs() < 1.0) {
            return err("epsilon", "modulation depth must satisfy |epsilon| < 1");
        }
        Ok(())
    }

    /// Same kinetics with both rates and the feed switched off.
    pub fn diffusion_only(&self) -> Self {
        Self {
            f0: 0.0,
            k: 0.0,
            ..*self
        }
    }
}

/// `F(u,v) = F₀ (1 + ε φ(u,v))`.
pub fn modulated_feed(params: &GrayScottParams, u: f64, v: f64) -> f64 {
    params.f0 * (1.0 + params.epsilon * chemical_potential(u, v))
}

/// `Δ_M ψ = Σ g^{ij} ψ_{,ij} + |g|^{-1/2} Σ ∂_i(√|g| g^{ij}) ψ_{,j}`, using
/// the spatial part of the jet.
pub fn laplace_beltrami<S: Scalar>(psi: &Jet2<S>, metric: &MetricSample) -> S {
    let gi = &metric.g_inv;
    let b = metric.drift();
    psi.hess_at(0, 0).scale(gi[0][0])
        + psi.hess_at(0, 1).scale(2.0 * gi[0][1])
        + psi.hess_at(1, 1).scale(gi[1][1])
        + psi.grad[0].scale(b[0])
        + psi.grad[1].scale(b[1])
}

/// Residuals of the two Gray-Scott equations at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualPair<S = f64> {
    pub r_u: S,
    pub r_v: S,
}

/// Residuals given the local feed rate `feed`.
pub fn gray_scott_residual_with_feed<S: Scalar>(
    jets: &FieldJets<S>,
    metric: &MetricSample,
    params: &GrayScottParams,
    feed: f64,
) -> ResidualPair<S> {
    let (u, v) = (jets.u.value, jets.v.value);
    let uv2 = u * v * v;
    let lap_u = laplace_beltrami(&jets.u, metric);
    let lap_v = laplace_beltrami(&jets.v, metric);
    let r_u = jets.u.grad[2] - lap_u.scale(params.d_u) + uv2 - (-u).add_const(1.0).scale(feed);
    let r_v = jets.v.grad[2] - lap_v.scale(params.d_v) - uv2 + v.scale(feed + params.k);
    ResidualPair { r_u, r_v }
}

/// `r_U = U_t − D_u Δ_M U + UV² − F(1−U)`,
/// `r_V = V_t − D_v Δ_M V − UV² + (F+k)V`, with jets in physical time.
pub fn gray_scott_residual<S: Scalar>(
    jets: &FieldJets<S>,
    metric: &MetricSample,
    params: &GrayScottParams,
    u: f64,
    v: f64,
) -> ResidualPair<S> {
    gray_scott_residual_with_feed(jets, metric, params, modulated_feed(params, u, v))
}

/// One of the four edges of the parameter square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundarySide {
    /// `u = 0`
    Left,
    /// `u = 1`
    Right,
    /// `v = 0`
    Bottom,
    /// `v = 1`
    Top,
}

impl BoundarySide {
    pub const ALL: [BoundarySide; 4] = [
        BoundarySide::Left,
        BoundarySide::Right,
        BoundarySide::Bottom,
        BoundarySide::Top,
    ];

    /// Outward unit normal in parameter space.
    pub fn normal(self) -> [f64; 2] {
        match self {
            BoundarySide::Left => [-1.0, 0.0],
            BoundarySide::Right => [1.0, 0.0],
            BoundarySide::Bottom => [0.0, -1.0],
            BoundarySide::Top => [0.0, 1.0],
        }
    }

    /// Point on this edge at arclength parameter `s ∈ [0,1]`.
    pub fn point(self, s: f64) -> (f64, f64) {
        match self {
            BoundarySide::Left => (0.0, s),
            BoundarySide::Right => (1.0, s),
            BoundarySide::Bottom => (s, 0.0),
            BoundarySide::Top => (s, 1.0),
        }
    }
}

/// Contravariant normal flux `n_i g^{ij} ∂_j ψ` of one field.
pub fn normal_flux<S: Scalar>(psi: &Jet2<S>, metric: &MetricSample, side: BoundarySide) -> S {
    let n = side.normal();
    let gi = &metric.g_inv;
    let c0 = n[0] * gi[0][0] + n[1] * gi[1][0];
    let c1 = n[0] * gi[0][1] + n[1] * gi[1][1];
    psi.grad[0].scale(c0) + psi.grad[1].scale(c1)
}

/// Neumann residuals `(flux U, flux V)` on `side`.
pub fn bc_residual<S: Scalar>(
    jets: &FieldJets<S>,
    metric: &MetricSample,
    side: BoundarySide,
) -> (S, S) {
    (
        normal_flux(&jets.u, metric, side),
        normal_flux(&jets.v, metric, side),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{metric_at, ClosedForm};

    fn jets(u: Jet2, v: Jet2) -> FieldJets {
        FieldJets { u, v }
    }

    #[test]
    fn flat_laplacian_is_euclidean() {
        let mut psi = Jet2::constant(0.3);
        psi.grad = [0.4, -1.0, 2.0];
        psi.hess = [1.5, 0.7, 9.0, -2.25, 9.0, 9.0];
        assert_eq!(laplace_beltrami(&psi, &MetricSample::flat()), 1.5 - 2.25);
    }

    #[test]
    fn constants_are_harmonic() {
        let m = metric_at(&crate::geometry::HeightField::default(), 0.31, 0.77);
        assert_eq!(laplace_beltrami(&Jet2::constant(4.0), &m), 0.0);
    }

    // z = uv, ψ = u². With |g| = 1 + u² + v² the divergence form gives
    // Δψ = |g|^{-1}[2(1+3u²) − 2u²(1+u²)/|g| − 2u² + 2u²v²/|g|] = 16/9 at (½, ½).
    #[test]
    fn saddle_matches_hand_derivation() {
        let (u0, v0) = (0.5, 0.5);
        let mut psi = Jet2::constant(u0 * u0);
        psi.grad = [2.0 * u0, 0.0, 0.0];
        psi.hess[0] = 2.0;
        let lb = laplace_beltrami(&psi, &metric_at(&ClosedForm::Saddle, u0, v0));
        assert!((lb - 16.0 / 9.0).abs() < 1e-14, "{lb}");
    }

    #[test]
    fn feed_rate_examples() {
        let mut p = GrayScottParams::default();
        assert!((modulated_feed(&p, 0.0, 0.125) - 0.05).abs() < 1e-15);
        assert_eq!(modulated_feed(&p, 0.0, 0.0), p.f0);
        p.epsilon = 0.0;
        assert_eq!(modulated_feed(&p, 0.3, 0.2), 0.04);
        p.epsilon = 1.5;
        assert!(matches!(p.validate(), Err(PhysicsError::Config { field: "epsilon", .. })));
        let swapped = GrayScottParams {
            d_u: 1e-5,
            d_v: 2e-5,
            ..GrayScottParams::default()
        };
        assert!(swapped.validate().is_err());
    }

    #[test]
    fn steady_state_and_time_passthrough() {
        let p = GrayScottParams::default();
        let m = MetricSample::flat();
        let r = gray_scott_residual(&jets(Jet2::constant(1.0), Jet2::constant(0.0)), &m, &p, 0.3, 0.4);
        assert_eq!((r.r_u, r.r_v), (0.0, 0.0));
        let mut ut = Jet2::constant(1.0);
        ut.grad[2] = 0.7;
        let r = gray_scott_residual(&jets(ut, Jet2::constant(0.0)), &m, &p, 0.3, 0.4);
        assert_eq!((r.r_u, r.r_v), (0.7, 0.0));
    }

    #[test]
    fn manufactured_planar_fields() {
        // U = 1 + 0.1 sin(2πu), V = 0.05
        let p = GrayScottParams::default();
        let (x, y) = (0.13, 0.61);
        let w = 2.0 * std::f64::consts::PI;
        let mut uj = Jet2::constant(1.0 + 0.1 * (w * x).sin());
        uj.grad[0] = 0.1 * w * (w * x).cos();
        uj.hess[0] = -0.1 * w * w * (w * x).sin();
        let vj = Jet2::constant(0.05);
        let r = gray_scott_residual(&jets(uj, vj), &MetricSample::flat(), &p, x, y);
        let (uu, vv) = (uj.value, 0.05);
        let f = modulated_feed(&p, x, y);
        let ru = -p.d_u * uj.hess[0] + uu * vv * vv - f * (1.0 - uu);
        let rv = -uu * vv * vv + (f + p.k) * vv;
        assert!((r.r_u - ru).abs() < 1e-15);
        assert!((r.r_v - rv).abs() < 1e-15);
    }

    #[test]
    fn boundary_flux_examples() {
        let mut j = Jet2::constant(2.0);
        j.grad = [3.0, 0.0, 0.0];
        let flat = MetricSample::flat();
        assert_eq!(normal_flux(&j, &flat, BoundarySide::Left), -3.0);
        assert_eq!(normal_flux(&Jet2::constant(1.0), &flat, BoundarySide::Top), 0.0);
        let ramp = metric_at(&ClosedForm::RampU, 0.0, 0.4);
        j.grad = [1.0, 0.0, 0.0];
        assert!((normal_flux(&j, &ramp, BoundarySide::Left) + 0.5).abs() < 1e-15);
    }
}
