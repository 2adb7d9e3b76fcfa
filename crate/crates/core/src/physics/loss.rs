use serde::{Deserialize, Serialize};

use super::{
    bc_residual, gray_scott_residual_with_feed, laplace_beltrami, modulated_feed, BoundarySide,
    GrayScottParams, InitialCondition, PhysicsError,
};
use crate::autodiff::Scalar;
use crate::geometry::{metric_at, MetricSample, Surface};
use crate::network::FieldJets;

/// Interior point with its precomputed geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollocationPoint {
    pub u: f64,
    pub v: f64,
    pub t: f64,
    pub metric: MetricSample,
    pub feed: f64,
}

impl CollocationPoint {
    pub fn new<M: Surface + ?Sized>(
        surface: &M,
        params: &GrayScottParams,
        u: f64,
        v: f64,
        t: f64,
    ) -> Self {
        Self {
            u,
            v,
            t,
            metric: metric_at(surface, u, v),
            feed: modulated_feed(params, u, v),
        }
    }
}

/// Point on the edge of the parameter square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub u: f64,
    pub v: f64,
    pub t: f64,
    pub side: BoundarySide,
    pub metric: MetricSample,
}

impl BoundaryPoint {
    /// Point at arclength `s` on `side`.
    pub fn new<M: Surface + ?Sized>(surface: &M, side: BoundarySide, s: f64, t: f64) -> Self {
        let (u, v) = side.point(s);
        Self {
            u,
            v,
            t,
            side,
            metric: metric_at(surface, u, v),
        }
    }
}

/// Point at `t = 0` with its target concentrations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialPoint {
    pub u: f64,
    pub v: f64,
    pub target_u: f64,
    pub target_v: f64,
}

impl InitialPoint {
    pub fn new(ic: &InitialCondition, u: f64, v: f64) -> Self {
        let (target_u, target_v) = ic.pair(u, v);
        Self {
            u,
            v,
            target_u,
            target_v,
        }
    }
}

/// Spatial quadrature node of the mass balance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub u: f64,
    pub v: f64,
    pub metric: MetricSample,
    pub feed: f64,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Fixed low-discrepancy quadrature for the global balance.
#[derive(Debug, Clone, PartialEq)]
pub struct MassQuadrature {
    pub points: Vec<QuadPoint>,
    /// Also penalize the balance of `V`.
    pub include_v: bool,
}

impl MassQuadrature {
    /// Halton points in bases 2 and 3, skipping the origin.
    pub fn halton<M: Surface + ?Sized>(
        surface: &M,
        params: &GrayScottParams,
        n: usize,
        include_v: bool,
    ) -> Self {
        let points = (1..=n as u64)
            .map(|i| {
                let (u, v) = (radical_inverse(i, 2), radical_inverse(i, 3));
                QuadPoint {
                    u,
                    v,
                    metric: metric_at(surface, u, v),
                    feed: modulated_feed(params, u, v),
                }
            })
            .collect();
        Self { points, include_v }
    }

    pub fn from_points(points: Vec<QuadPoint>, include_v: bool) -> Self {
        Self { points, include_v }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Monte Carlo estimate of the surface area.
    pub fn area(&self) -> f64 {
        self.points.iter().map(|q| q.metric.sqrt_det_g).sum::<f64>() / self.len() as f64
    }
}

/// Weights of the four loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub pde: f64,
    pub bc: f64,
    pub ic: f64,
    pub mass: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            pde: 1.0,
            bc: 10.0,
            ic: 10.0,
            mass: 1.0,
        }
    }
}

impl LossWeights {
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            pde: c * self.pde,
            bc: c * self.bc,
            ic: c * self.ic,
            mass: c * self.mass,
        }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        for (field, w) in [("pde", self.pde), ("bc", self.bc), ("ic", self.ic), ("mass", self.mass)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(PhysicsError::Config {
                    field,
                    reason: "loss weights must be finite and non-negative".into(),
                });
            }
        }
        Ok(())
    }
}

/// Loss components, their weights, and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<S = f64> {
    pub l_pde: S,
    pub l_bc: S,
    pub l_ic: S,
    pub l_mass: S,
    pub weights: LossWeights,
    pub total: S,
}

impl<S: Scalar> LossBreakdown<S> {
    pub fn from_components(l_pde: S, l_bc: S, l_ic: S, l_mass: S, weights: LossWeights) -> Self {
        let total = l_pde.scale(weights.pde)
            + l_bc.scale(weights.bc)
            + l_ic.scale(weights.ic)
            + l_mass.scale(weights.mass);
        Self {
            l_pde,
            l_bc,
            l_ic,
            l_mass,
            weights,
            total,
        }
    }

    pub fn values(&self) -> LossBreakdown<f64> {
        LossBreakdown {
            l_pde: self.l_pde.value(),
            l_bc: self.l_bc.value(),
            l_ic: self.l_ic.value(),
            l_mass: self.l_mass.value(),
            weights: self.weights,
            total: self.total.value(),
        }
    }
}

impl LossBreakdown<f64> {
    pub fn is_finite(&self) -> bool {
        [self.l_pde, self.l_bc, self.l_ic, self.l_mass, self.total]
            .iter()
            .all(|x| x.is_finite())
    }
}

/// The points of one loss evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossBatches {
    pub collocation: Vec<CollocationPoint>,
    pub boundary: Vec<BoundaryPoint>,
    pub initial: Vec<InitialPoint>,
    /// Times at which the mass balance is enforced.
    pub mass_times: Vec<f64>,
}

/// Network jets at the batch points, time derivatives in physical units.
///
/// Initial points only need values; `mass[s][q]` is quadrature node `q` at
/// time slice `s`.
#[derive(Debug, Clone)]
pub struct LossJets<S = f64> {
    pub collocation: Vec<FieldJets<S>>,
    pub boundary: Vec<FieldJets<S>>,
    pub initial: Vec<FieldJets<S>>,
    pub mass: Vec<Vec<FieldJets<S>>>,
}

fn mean<S: Scalar>(terms: &[S]) -> S {
    if terms.is_empty() {
        S::zero()
    } else {
        S::sum(terms).scale(1.0 / terms.len() as f64)
    }
}

/// Mean of `r_U² + r_V²`.
pub fn pde_loss<S: Scalar>(
    points: &[CollocationPoint],
    jets: &[FieldJets<S>],
    params: &GrayScottParams,
) -> S {
    let terms: Vec<S> = points
        .iter()
        .zip(jets)
        .map(|(p, j)| {
            let r = gray_scott_residual_with_feed(j, &p.metric, params, p.feed);
            r.r_u.square() + r.r_v.square()
        })
        .collect();
    mean(&terms)
}

/// Mean squared normal flux of both species.
pub fn bc_loss<S: Scalar>(points: &[BoundaryPoint], jets: &[FieldJets<S>]) -> S {
    let terms: Vec<S> = points
        .iter()
        .zip(jets)
        .map(|(p, j)| {
            let (fu, fv) = bc_residual(j, &p.metric, p.side);
            fu.square() + fv.square()
        })
        .collect();
    mean(&terms)
}

/// Mean squared deviation from the initial condition.
pub fn ic_loss<S: Scalar>(points: &[InitialPoint], jets: &[FieldJets<S>]) -> S {
    let terms: Vec<S> = points
        .iter()
        .zip(jets)
        .map(|(p, j)| {
            j.u.value.add_const(-p.target_u).square() + j.v.value.add_const(-p.target_v).square()
        })
        .collect();
    mean(&terms)
}

/// Signed global balances `(U, V)` at one time slice: the quadrature
/// estimate of `d/dt ∫ψ dM` minus that of the integrated right-hand side.
pub fn mass_balance<S: Scalar>(
    quad: &MassQuadrature,
    jets: &[FieldJets<S>],
    params: &GrayScottParams,
) -> (S, S) {
    let n = quad.len();
    let mut bu = Vec::with_capacity(n);
    let mut bv = Vec::with_capacity(if quad.include_v { n } else { 0 });
    for (q, j) in quad.points.iter().zip(jets) {
        let w = q.metric.sqrt_det_g;
        let (u, v) = (j.u.value, j.v.value);
        let uv2 = u * v * v;
        let rhs_u = laplace_beltrami(&j.u, &q.metric).scale(params.d_u) - uv2
            + (-u).add_const(1.0).scale(q.feed);
        bu.push((j.u.grad[2] - rhs_u).scale(w));
        if quad.include_v {
            let rhs_v = laplace_beltrami(&j.v, &q.metric).scale(params.d_v) + uv2
                - v.scale(q.feed + params.k);
            bv.push((j.v.grad[2] - rhs_v).scale(w));
        }
    }
    (mean(&bu), mean(&bv))
}

/// Squared balance violation at one time slice.
pub fn mass_loss_at<S: Scalar>(
    quad: &MassQuadrature,
    jets: &[FieldJets<S>],
    params: &GrayScottParams,
) -> S {
    let (bu, bv) = mass_balance(quad, jets, params);
    if quad.include_v {
        bu.square() + bv.square()
    } else {
        bu.square()
    }
}

/// Mean of [`mass_loss_at`] over time slices.
pub fn mass_loss<S: Scalar>(
    quad: &MassQuadrature,
    slices: &[Vec<FieldJets<S>>],
    params: &GrayScottParams,
) -> S {
    let terms: Vec<S> = slices
        .iter()
        .map(|jets| mass_loss_at(quad, jets, params))
        .collect();
    mean(&terms)
}

/// All four components and the weighted total.
pub fn total_loss<S: Scalar>(
    batches: &LossBatches,
    quad: &MassQuadrature,
    jets: &LossJets<S>,
    params: &GrayScottParams,
    weights: &LossWeights,
) -> LossBreakdown<S> {
    LossBreakdown::from_components(
        pde_loss(&batches.collocation, &jets.collocation, params),
        bc_loss(&batches.boundary, &jets.boundary),
        ic_loss(&batches.initial, &jets.initial),
        mass_loss(quad, &jets.mass, params),
        *weights,
    )
}
