//! Line search along the handle→target segment, with backtracking.

use crate::error::Result;
use crate::field::{FeatureMap, FeatureVector, Point2};
use crate::sampling::aggregate;
use crate::scalar::Scalar;
use crate::trace::Case;

use super::{DragConfig, DragPoint};

const CANDIDATES: usize = 10;

/// Points `h + j·(t − h)/‖t − h‖` for `j = 0.1d, 0.2d, …, d`, with `j`
/// clamped to `‖t − h‖` and repeated clamped entries dropped. Empty when
/// `h == t`.
pub fn candidate_set<S: Scalar>(h: Point2<S>, t: Point2<S>, d: S) -> Vec<Point2<S>> {
    let delta = t.sub(h);
    let dist = delta.norm();
    if dist == S::zero() {
        return Vec::new();
    }
    let unit = delta.scale(S::one() / dist);
    let mut out = Vec::with_capacity(CANDIDATES);
    for i in 1..=CANDIDATES {
        let j = d * S::lit(i as f64) / S::lit(CANDIDATES as f64);
        if j >= dist {
            out.push(t);
            break;
        }
        out.push(h.add(unit.scale(j)));
    }
    out
}

/// Index of the smallest score; equal scores resolve to the lowest index,
/// whatever order the pairs arrive in.
pub fn argmin_by_index<S: Scalar>(scored: impl IntoIterator<Item = (usize, S)>) -> Option<usize> {
    scored
        .into_iter()
        .fold(None, |best: Option<(usize, S)>, (i, s)| match best {
            Some((bi, bs)) if bs < s || (bs == s && bi < i) => Some((bi, bs)),
            _ => Some((i, s)),
        })
        .map(|(i, _)| i)
}

/// Candidate whose aggregate-to-template L1 distance is closest to `l`.
/// `None` when the candidate set is empty.
#[allow(clippy::too_many_arguments)]
pub fn localize<S: Scalar>(
    h: Point2<S>,
    t: Point2<S>,
    template: &FeatureVector<S>,
    d: S,
    l: S,
    f: &FeatureMap<S>,
    r: i64,
) -> Result<Option<Point2<S>>> {
    let cands = candidate_set(h, t, d);
    let mut scored = Vec::with_capacity(cands.len());
    for (i, q) in cands.iter().enumerate() {
        let disc = aggregate(f, *q, r)?.l1_dist(template);
        scored.push((i, (disc - l).abs()));
    }
    Ok(argmin_by_index(scored).map(|i| cands[i]))
}

/// Backtracking case for a drag with the given start/end discrepancies.
pub fn select_case<S: Scalar>(l_in: S, l_en: S, l: S) -> Case {
    if l_en <= S::lit(0.5) * l {
        Case::Advance
    } else if l_en <= l_in {
        Case::Freeze
    } else {
        Case::Fallback
    }
}

/// Projects `p` onto the segment `[origin, target]`.
pub fn clamp_to_segment<S: Scalar>(
    p: Point2<S>,
    origin: Point2<S>,
    target: Point2<S>,
) -> Point2<S> {
    let v = target.sub(origin);
    let len2 = v.x * v.x + v.y * v.y;
    if len2 == S::zero() {
        return origin;
    }
    let s = (p.sub(origin).x * v.x + p.sub(origin).y * v.y) / len2;
    if s <= S::zero() {
        origin
    } else if s >= S::one() {
        target
    } else {
        origin.add(v.scale(s))
    }
}

/// Next handle position for an active point given the freshly updated
/// template. With backtracking disabled every drag advances.
pub fn next_position<S: Scalar>(
    point: &DragPoint<S>,
    next_template: &FeatureVector<S>,
    cfg: &DragConfig<S>,
    f: &FeatureMap<S>,
) -> Result<(Point2<S>, Case)> {
    let h = point.current;
    let t = point.target;
    let case = if cfg.backtracking {
        select_case(point.l_in, point.l_en, cfg.l)
    } else {
        Case::Advance
    };
    let next = match case {
        Case::Freeze => Some(h),
        Case::Fallback => {
            let dist = t.dist(h);
            if dist == S::zero() {
                Some(h)
            } else {
                let back = h.sub(t.sub(h).scale(cfg.d / dist));
                let start = clamp_to_segment(back, point.origin, t);
                localize(start, t, next_template, cfg.d + cfg.d, S::zero(), f, cfg.r)?
            }
        }
        _ => localize(h, t, next_template, cfg.d, cfg.l, f, cfg.r)?,
    };
    Ok((next.unwrap_or(h), case))
}
