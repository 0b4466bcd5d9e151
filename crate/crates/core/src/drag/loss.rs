//! Drag, mask and total losses, with their feature-space gradients.

use crate::error::{DragError, Result};
use crate::field::{FeatureMap, Mask};
use crate::sampling::{aggregate, aggregate_vjp_into};
use crate::scalar::Scalar;

use super::{DragPoint, PointStatus};

/// `Σ_i ‖F_r(h_i) − T_i‖₁` over active points.
pub fn drag_loss<S: Scalar>(points: &[DragPoint<S>], f: &FeatureMap<S>, r: i64) -> Result<S> {
    let mut total = S::zero();
    for pt in points.iter().filter(|p| p.status == PointStatus::Active) {
        total += aggregate(f, pt.current, r)?.l1_dist(&pt.template);
    }
    Ok(total)
}

fn check_mask<S: Scalar>(f: &FeatureMap<S>, m: &Mask) -> Result<()> {
    if (m.height(), m.width()) != (f.height(), f.width()) {
        return Err(DragError::contract(format!(
            "mask shape {}x{} does not match feature map {}x{}",
            m.height(),
            m.width(),
            f.height(),
            f.width()
        )));
    }
    Ok(())
}

/// `‖(F₀ − F) ⊙ (1 − M)‖₁`; cells marked editable in `M` are free.
pub fn mask_loss<S: Scalar>(f: &FeatureMap<S>, f0: &FeatureMap<S>, mask: &Mask) -> Result<S> {
    f0.check_same_shape(f, "mask_loss")?;
    check_mask(f, mask)?;
    let c = f.channels();
    let mut total = S::zero();
    for (i, (a, b)) in f.as_slice().iter().zip(f0.as_slice()).enumerate() {
        let cell = i / c;
        if !mask.cells()[cell] {
            total += (*b - *a).abs();
        }
    }
    Ok(total)
}

/// Inputs shared by the total loss and its gradient.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms<'a, S> {
    pub points: &'a [DragPoint<S>],
    pub f0: &'a FeatureMap<S>,
    pub mask: Option<&'a Mask>,
    pub gamma: S,
    pub r: i64,
}

/// `L_drag + γ·L_mask`, the mask term vanishing without a mask.
pub fn total_loss<S: Scalar>(terms: &LossTerms<'_, S>, f: &FeatureMap<S>) -> Result<S> {
    let mut loss = drag_loss(terms.points, f, terms.r)?;
    if let Some(m) = terms.mask {
        if terms.gamma != S::zero() {
            loss += terms.gamma * mask_loss(f, terms.f0, m)?;
        }
    }
    Ok(loss)
}

/// Total loss and its (sub)gradient with respect to the feature map, using
/// `sign(0) = 0` at the L1 kinks.
pub fn total_loss_with_grad<S: Scalar>(
    terms: &LossTerms<'_, S>,
    f: &FeatureMap<S>,
) -> Result<(S, FeatureMap<S>)> {
    let mut grad = FeatureMap::zeros(f.height(), f.width(), f.channels());
    let mut loss = S::zero();
    let mut u = vec![S::zero(); f.channels()];
    for pt in terms
        .points
        .iter()
        .filter(|p| p.status == PointStatus::Active)
    {
        let agg = aggregate(f, pt.current, terms.r)?;
        for ((uc, a), t) in u.iter_mut().zip(agg.as_slice()).zip(pt.template.as_slice()) {
            let res = *a - *t;
            loss += res.abs();
            *uc = res.sign0();
        }
        aggregate_vjp_into(&mut grad, pt.current, terms.r, &u)?;
    }
    if let Some(m) = terms.mask {
        if terms.gamma != S::zero() {
            terms.f0.check_same_shape(f, "total_loss")?;
            check_mask(f, m)?;
            let c = f.channels();
            let mut ml = S::zero();
            let g = grad.as_mut_slice();
            for (i, (a, b)) in f.as_slice().iter().zip(terms.f0.as_slice()).enumerate() {
                if !m.cells()[i / c] {
                    let res = *a - *b;
                    ml += res.abs();
                    g[i] += terms.gamma * res.sign0();
                }
            }
            loss += terms.gamma * ml;
        }
    }
    Ok((loss, grad))
}
