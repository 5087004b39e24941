//! The composite batch objective: every sample carries a role decided by
//! selection, and the role decides which loss terms it feeds.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::losses::{
    clean_term, consistency_term, loss_total, noisy_term, to_score_grad, ConsistencyScope,
    LossBreakdown, LossWeights,
};
use crate::model::{Gradients, Mlp, Trace};

#[derive(Debug, Clone, PartialEq)]
pub enum Role {
    /// Trained toward the given (smoothed) annotated target on the weak view.
    Clean(Vec<f64>),
    /// Trained toward the given pseudo-label through the two-view mean.
    IdHigh(Vec<f64>),
    IdRest,
    Ood,
}

impl Role {
    pub fn is_retained(&self) -> bool {
        matches!(self, Role::Clean(_) | Role::IdHigh(_))
    }
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossSelector {
    Clean,
    Noisy,
    Consistency,
    Total,
}

/// Two fixed input views and a role.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveItem {
    pub weak: Vec<f64>,
    pub strong: Vec<f64>,
    pub role: Role,
}

fn add_into(acc: &mut [f64], g: &[f64], scale: f64) {
    acc.iter_mut().zip(g).for_each(|(a, b)| *a += scale * b);
}

/// Loss breakdown for one batch, and if `grads` is given, the gradient of the
/// selected loss accumulated into it in batch order.
pub fn evaluate_traces(
    model: &Mlp,
    traces: &[(Trace, Trace)],
    roles: &[Role],
    weights: &LossWeights,
    selector: LossSelector,
    mut grads: Option<&mut Gradients>,
) -> Result<LossBreakdown> {
    if traces.len() != roles.len() {
        return Err(Error::shape("objective roles", traces.len(), roles.len()));
    }
    let (c_scale, n_scale, k_scale) = match selector {
        LossSelector::Total => (1.0, weights.lambda1, weights.lambda2),
        LossSelector::Clean => (1.0, 0.0, 0.0),
        LossSelector::Noisy => (0.0, 1.0, 0.0),
        LossSelector::Consistency => (0.0, 0.0, 1.0),
    };
    let classes = model.classes();
    let (mut clean, mut noisy, mut cons) = (0.0, 0.0, 0.0);
    let (mut clean_count, mut noisy_count, mut cons_count) = (0, 0, 0);
    for ((weak, strong), role) in traces.iter().zip(roles) {
        let mut dw = alloc::vec![0.0; classes];
        let mut ds = alloc::vec![0.0; classes];
        match role {
            Role::Clean(target) => {
                let (v, g) = clean_term(target, &weak.probs, weights.clean_mode);
                clean += v;
                clean_count += 1;
                add_into(&mut dw, &g, c_scale);
            }
            Role::IdHigh(target) => {
                let (v, gw, gs) = noisy_term(target, &weak.probs, &strong.probs, weights.entropy_weight);
                noisy += v;
                noisy_count += 1;
                add_into(&mut dw, &gw, n_scale);
                add_into(&mut ds, &gs, n_scale);
            }
            Role::IdRest | Role::Ood => {}
        }
        if weights.consistency_scope == ConsistencyScope::All || role.is_retained() {
            let (v, gw, gs) = consistency_term(&weak.probs, &strong.probs);
            cons += v;
            cons_count += 1;
            add_into(&mut dw, &gw, k_scale);
            add_into(&mut ds, &gs, k_scale);
        }
        if let Some(g) = grads.as_deref_mut() {
            if dw.iter().any(|&x| x != 0.0) {
                model.backward(weak, &to_score_grad(&weak.probs, &dw), g);
            }
            if ds.iter().any(|&x| x != 0.0) {
                model.backward(strong, &to_score_grad(&strong.probs, &ds), g);
            }
        }
    }
    let mut breakdown = loss_total(clean, noisy, cons, weights)?;
    breakdown.clean_count = clean_count;
    breakdown.noisy_count = noisy_count;
    breakdown.consistency_count = cons_count;
    Ok(breakdown)
}

pub fn trace_items(model: &Mlp, items: &[ObjectiveItem]) -> Result<Vec<(Trace, Trace)>> {
    items
        .iter()
        .map(|it| Ok((model.trace(&it.weak)?, model.trace(&it.strong)?)))
        .collect()
}

fn selected_value(b: &LossBreakdown, selector: LossSelector) -> f64 {
    match selector {
        LossSelector::Clean => b.clean,
        LossSelector::Noisy => b.noisy,
        LossSelector::Consistency => b.consistency,
        LossSelector::Total => b.total,
    }
}

/// Value of the selected loss and its parameter gradient.
pub fn loss_and_gradient(
    model: &Mlp,
    items: &[ObjectiveItem],
    weights: &LossWeights,
    selector: LossSelector,
) -> Result<(f64, Gradients)> {
    let traces = trace_items(model, items)?;
    let roles: Vec<Role> = items.iter().map(|it| it.role.clone()).collect();
    let mut grads = Gradients::zeros_like(model);
    let b = evaluate_traces(model, &traces, &roles, weights, selector, Some(&mut grads))?;
    Ok((selected_value(&b, selector), grads))
}

pub fn loss_value(
    model: &Mlp,
    items: &[ObjectiveItem],
    weights: &LossWeights,
    selector: LossSelector,
) -> Result<f64> {
    let traces = trace_items(model, items)?;
    let roles: Vec<Role> = items.iter().map(|it| it.role.clone()).collect();
    let b = evaluate_traces(model, &traces, &roles, weights, selector, None)?;
    Ok(selected_value(&b, selector))
}

pub const GRADIENT_CHECK_STEP: f64 = 1e-5;

/// Largest relative error between the analytic gradient and central
/// differences with step `1e-5`, over every parameter.
pub fn gradient_check(
    model: &Mlp,
    items: &[ObjectiveItem],
    weights: &LossWeights,
    selector: LossSelector,
) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::invalid("gradient check needs a nonempty batch"));
    }
    let (_, grads) = loss_and_gradient(model, items, weights, selector)?;
    let analytic = grads.flat();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let original = probe.param(i);
        probe.set_param(i, original + GRADIENT_CHECK_STEP);
        let up = loss_value(&probe, items, weights, selector)?;
        probe.set_param(i, original - GRADIENT_CHECK_STEP);
        let down = loss_value(&probe, items, weights, selector)?;
        probe.set_param(i, original);
        let numeric = (up - down) / (2.0 * GRADIENT_CHECK_STEP);
        let scale = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::CleanEntropyMode;
    use alloc::vec;

    fn toy_items() -> Vec<ObjectiveItem> {
        vec![
            ObjectiveItem {
                weak: vec![0.5, -0.3],
                strong: vec![0.1, -0.6],
                role: Role::Clean(vec![0.9, 0.05, 0.05]),
            },
            ObjectiveItem {
                weak: vec![-0.4, 0.8],
                strong: vec![-0.2, 0.0],
                role: Role::IdHigh(vec![0.1, 0.7, 0.2]),
            },
            ObjectiveItem {
                weak: vec![1.2, 0.3],
                strong: vec![0.0, 0.3],
                role: Role::Ood,
            },
        ]
    }

    #[test]
    fn total_gradient_matches_differences_on_toy_batch() {
        let model = Mlp::new(&[2, 4, 3], 17).unwrap();
        let err = gradient_check(&model, &toy_items(), &LossWeights::default(), LossSelector::Total).unwrap();
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn exact_fit_is_stationary() {
        let model = Mlp::zeros(&[2, 3, 3]).unwrap();
        let uniform = vec![1.0 / 3.0; 3];
        let items = vec![ObjectiveItem {
            weak: vec![0.2, 0.4],
            strong: vec![0.2, 0.4],
            role: Role::Clean(uniform),
        }];
        let weights = LossWeights {
            clean_mode: CleanEntropyMode::CeOnly,
            ..LossWeights::default()
        };
        let (_, g) = loss_and_gradient(&model, &items, &weights, LossSelector::Clean).unwrap();
        assert!(g.norm() <= 1e-6);
    }

    #[test]
    fn identical_views_give_zero_consistency_gradient() {
        let model = Mlp::new(&[2, 4, 3], 3).unwrap();
        let items: Vec<ObjectiveItem> = toy_items()
            .into_iter()
            .map(|mut it| {
                it.strong = it.weak.clone();
                it
            })
            .collect();
        let (v, g) = loss_and_gradient(&model, &items, &LossWeights::default(), LossSelector::Consistency).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.flat().iter().all(|x| x.abs() <= 1e-8));
    }

    #[test]
    fn counts_follow_roles_and_scope() {
        let model = Mlp::new(&[2, 4, 3], 3).unwrap();
        let items = toy_items();
        let traces = trace_items(&model, &items).unwrap();
        let roles: Vec<Role> = items.iter().map(|i| i.role.clone()).collect();
        let all = evaluate_traces(&model, &traces, &roles, &LossWeights::default(), LossSelector::Total, None).unwrap();
        assert_eq!((all.clean_count, all.noisy_count, all.consistency_count), (1, 1, 3));
        let retained = LossWeights {
            consistency_scope: ConsistencyScope::Retained,
            ..LossWeights::default()
        };
        let r = evaluate_traces(&model, &traces, &roles, &retained, LossSelector::Total, None).unwrap();
        assert_eq!(r.consistency_count, 2);
    }

    #[test]
    fn empty_batch_is_rejected_by_gradient_check() {
        let model = Mlp::new(&[2, 3], 1).unwrap();
        assert!(gradient_check(&model, &[], &LossWeights::default(), LossSelector::Total).is_err());
    }
}
