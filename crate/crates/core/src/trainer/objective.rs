use crate::autodiff::{Jet2, Scalar, Tape, Var};
use crate::network::{rescale_time, trace_bytes, BatchEval, FieldJets, FieldModel, JetOrder};
use crate::physics::{total_loss, GrayScottParams, LossBatches, LossBreakdown, LossJets, LossWeights, MassQuadrature};

use super::TrainError;

/// Keep forward traces for a group only below this size.
const TRACE_BUDGET: usize = 256 << 20;

struct Group {
    inputs: Vec<[f64; 3]>,
    order: JetOrder,
}

fn groups(model: &FieldModel, batches: &LossBatches, quad: &MassQuadrature) -> [Group; 4] {
    let colloc = batches
        .collocation
        .iter()
        .map(|p| model.input(p.u, p.v, p.t))
        .collect();
    let boundary = batches
        .boundary
        .iter()
        .map(|p| model.input(p.u, p.v, p.t))
        .collect();
    let initial = batches
        .initial
        .iter()
        .map(|p| model.input(p.u, p.v, 0.0))
        .collect();
    let mass = batches
        .mass_times
        .iter()
        .flat_map(|&t| quad.points.iter().map(move |q| model.input(q.u, q.v, t)))
        .collect();
    [
        Group {
            inputs: colloc,
            order: JetOrder::Spatial,
        },
        Group {
            inputs: boundary,
            order: JetOrder::Gradient,
        },
        Group {
            inputs: initial,
            order: JetOrder::Value,
        },
        Group {
            inputs: mass,
            order: JetOrder::Spatial,
        },
    ]
}

/// Split `items` into `times` consecutive runs of `per` entries.
fn slices<T: Clone>(items: Vec<T>, per: usize) -> Vec<Vec<T>> {
    if per == 0 {
        return Vec::new();
    }
    items.chunks(per).map(|c| c.to_vec()).collect()
}

fn f64_jets(model: &FieldModel, eval: &BatchEval) -> Vec<FieldJets> {
    (0..eval.n_points())
        .map(|p| {
            let j = eval.jets(p);
            FieldJets {
                u: rescale_time(&j.u, model.horizon),
                v: rescale_time(&j.v, model.horizon),
            }
        })
        .collect()
}

/// Jet of channel `c` at point `p` built from tape leaves, in physical time.
fn var_jet<'t>(leaves: &[Var<'t>], order: JetOrder, p: usize, c: usize, inv_t: f64) -> Jet2<Var<'t>> {
    let r = order.rows();
    let at = |row: usize| leaves[(p * r + row) * 2 + c];
    let mut j = Jet2::constant(at(0));
    if order.has_grad() {
        j.grad = [at(1), at(2), at(3).scale(inv_t)];
    }
    for (s, &slot) in order.hess_slots().iter().enumerate() {
        let f = match slot {
            2 | 4 => inv_t,
            5 => inv_t * inv_t,
            _ => 1.0,
        };
        let x = at(4 + s);
        j.hess[slot] = if f == 1.0 { x } else { x.scale(f) };
    }
    j
}

fn var_jets<'t>(leaves: &[Var<'t>], order: JetOrder, n: usize, inv_t: f64) -> Vec<FieldJets<Var<'t>>> {
    (0..n)
        .map(|p| FieldJets {
            u: var_jet(leaves, order, p, 0, inv_t),
            v: var_jet(leaves, order, p, 1, inv_t),
        })
        .collect()
}

/// Loss at the current parameters, without gradients.
pub fn evaluate_loss(
    model: &FieldModel,
    batches: &LossBatches,
    quad: &MassQuadrature,
    physics: &GrayScottParams,
    weights: &LossWeights,
) -> LossBreakdown {
    let [c, b, i, m] = groups(model, batches, quad).map(|g| {
        let e = model.evaluate(&g.inputs, g.order, false);
        f64_jets(model, &e)
    });
    let jets = LossJets {
        collocation: c,
        boundary: b,
        initial: i,
        mass: slices(m, quad.len()),
    };
    total_loss(batches, quad, &jets, physics, weights)
}

/// Loss and its gradient with respect to all network parameters.
///
/// The network is run once per batch group with jet truncation matched to
/// the terms that read it. The loss is assembled on a scalar tape whose
/// leaves are the network outputs; their adjoints then seed the batched
/// layer backward pass. Groups whose adjoints are all zero are skipped.
pub fn loss_and_grad(
    model: &FieldModel,
    batches: &LossBatches,
    quad: &MassQuadrature,
    physics: &GrayScottParams,
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<f64>), TrainError> {
    let groups = groups(model, batches, quad);
    let evals: Vec<BatchEval> = groups
        .iter()
        .map(|g| {
            let keep = trace_bytes(model.params.sizes(), g.inputs.len(), g.order) <= TRACE_BUDGET;
            model.evaluate(&g.inputs, g.order, keep)
        })
        .collect();

    let inv_t = 1.0 / model.horizon;
    let tape = Tape::new();
    let leaves: Vec<Vec<Var>> = evals.iter().map(|e| tape.vars(&e.outputs)).collect();
    let n = |k: usize| evals[k].n_points();
    let jets = LossJets {
        collocation: var_jets(&leaves[0], JetOrder::Spatial, n(0), inv_t),
        boundary: var_jets(&leaves[1], JetOrder::Gradient, n(1), inv_t),
        initial: var_jets(&leaves[2], JetOrder::Value, n(2), inv_t),
        mass: slices(var_jets(&leaves[3], JetOrder::Spatial, n(3), inv_t), quad.len()),
    };
    let loss = total_loss(batches, quad, &jets, physics, weights);
    let values = loss.values();
    if !values.total.is_finite() {
        return Err(TrainError::NonFiniteLoss(values.total));
    }
    let adjoints = tape.gradient(loss.total);
    drop(jets);

    let mut grad = vec![0.0; model.param_count()];
    for ((g, e), l) in groups.iter().zip(&evals).zip(&leaves) {
        let adj: Vec<f64> = l.iter().map(|&x| adjoints.wrt(x)).collect();
        if adj.iter().any(|&a| a != 0.0) {
            model.accumulate_gradient(&g.inputs, e, &adj, &mut grad);
        }
    }
    Ok((values, grad))
}
