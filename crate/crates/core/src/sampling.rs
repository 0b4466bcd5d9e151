//! Continuous-coordinate access to feature maps: bilinear sampling and the
//! square-patch feature aggregate, with their reverse-mode derivatives.
//!
//! Coordinates outside `[0, W−1]×[0, H−1]` are clamped to the border, so the
//! derivative with respect to a clamped coordinate is zero.

use crate::error::{DragError, Result};
use crate::field::{FeatureMap, FeatureVector, Point2};
use crate::scalar::Scalar;

/// The four bilinear taps `(y, x, weight)` of `p` after border clamping.
#[derive(Debug, Clone, Copy)]
struct Taps<S> {
    cells: [(usize, usize, S); 4],
    /// Whether x / y fell strictly inside the grid (non-zero derivative).
    free: (bool, bool),
    frac: (S, S),
    base: (usize, usize),
    next: (usize, usize),
}

fn axis<S: Scalar>(v: S, len: usize) -> (usize, usize, S, bool) {
    if len == 1 {
        return (0, 0, S::zero(), false);
    }
    let hi = S::lit((len - 1) as f64);
    let free = v > S::zero() && v < hi;
    let c = v.max(S::zero()).min(hi);
    let i0 = c.floor().to_usize().unwrap_or(0).min(len - 2);
    let f = c - S::lit(i0 as f64);
    (i0, i0 + 1, f, free)
}

fn taps<S: Scalar>(f: &FeatureMap<S>, p: Point2<S>) -> Result<Taps<S>> {
    if !p.is_finite() {
        return Err(DragError::contract(format!(
            "non-finite sample coordinates ({}, {})",
            p.x, p.y
        )));
    }
    let (x0, x1, fx, free_x) = axis(p.x, f.width());
    let (y0, y1, fy, free_y) = axis(p.y, f.height());
    let one = S::one();
    Ok(Taps {
        cells: [
            (y0, x0, (one - fx) * (one - fy)),
            (y0, x1, fx * (one - fy)),
            (y1, x0, (one - fx) * fy),
            (y1, x1, fx * fy),
        ],
        free: (free_x, free_y),
        frac: (fx, fy),
        base: (y0, x0),
        next: (y1, x1),
    })
}

/// Bilinear interpolation of every channel at `p`.
pub fn sample<S: Scalar>(f: &FeatureMap<S>, p: Point2<S>) -> Result<FeatureVector<S>> {
    let mut out = vec![S::zero(); f.channels()];
    sample_into(f, p, &mut out)?;
    Ok(FeatureVector(out))
}

fn sample_into<S: Scalar>(f: &FeatureMap<S>, p: Point2<S>, acc: &mut [S]) -> Result<()> {
    let t = taps(f, p)?;
    for (y, x, w) in t.cells {
        if w == S::zero() {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(f.cell(y, x)) {
            *a += w * *v;
        }
    }
    Ok(())
}

/// Derivative of [`sample`] with respect to the sample position, as the pair
/// `(∂/∂x, ∂/∂y)` of per-channel vectors.
pub fn sample_position_grad<S: Scalar>(
    f: &FeatureMap<S>,
    p: Point2<S>,
) -> Result<(FeatureVector<S>, FeatureVector<S>)> {
    let t = taps(f, p)?;
    let c = f.channels();
    let (mut gx, mut gy) = (vec![S::zero(); c], vec![S::zero(); c]);
    let (y0, x0) = t.base;
    let (y1, x1) = t.next;
    let (fx, fy) = t.frac;
    let one = S::one();
    for ch in 0..c {
        let (a, b) = (f.get(y0, x0, ch), f.get(y0, x1, ch));
        let (d, e) = (f.get(y1, x0, ch), f.get(y1, x1, ch));
        if t.free.0 {
            gx[ch] = (one - fy) * (b - a) + fy * (e - d);
        }
        if t.free.1 {
            gy[ch] = (one - fx) * (d - a) + fx * (e - b);
        }
    }
    Ok((FeatureVector(gx), FeatureVector(gy)))
}

fn check_radius(r: i64) -> Result<()> {
    if r < 0 {
        return Err(DragError::contract(format!(
            "patch radius must be >= 0, got {r}"
        )));
    }
    Ok(())
}

/// Unit-spaced `(2r+1)²` offsets around the center, row-major.
fn offsets<S: Scalar>(r: i64) -> impl Iterator<Item = Point2<S>> {
    (-r..=r).flat_map(move |dy| {
        (-r..=r).map(move |dx| Point2::new(S::lit(dx as f64), S::lit(dy as f64)))
    })
}

/// Feature aggregate: sum of bilinear samples over the `(2r+1)×(2r+1)`
/// unit grid centered at `h`.
pub fn aggregate<S: Scalar>(f: &FeatureMap<S>, h: Point2<S>, r: i64) -> Result<FeatureVector<S>> {
    check_radius(r)?;
    let mut acc = vec![S::zero(); f.channels()];
    for o in offsets::<S>(r) {
        sample_into(f, h.add(o), &mut acc)?;
    }
    Ok(FeatureVector(acc))
}

/// Accumulates the pullback of `u` through [`aggregate`] into `cotangent`.
pub fn aggregate_vjp_into<S: Scalar>(
    cotangent: &mut FeatureMap<S>,
    h: Point2<S>,
    r: i64,
    u: &[S],
) -> Result<()> {
    check_radius(r)?;
    if u.len() != cotangent.channels() {
        return Err(DragError::contract(format!(
            "cotangent vector length {} does not match channel count {}",
            u.len(),
            cotangent.channels()
        )));
    }
    for o in offsets::<S>(r) {
        let t = taps(cotangent, h.add(o))?;
        for (y, x, w) in t.cells {
            if w == S::zero() {
                continue;
            }
            for (c, uc) in cotangent.cell_mut(y, x).iter_mut().zip(u) {
                *c += w * *uc;
            }
        }
    }
    Ok(())
}

/// Pullback of `u` through [`aggregate`]: a map shaped like `f`.
pub fn aggregate_vjp<S: Scalar>(
    f: &FeatureMap<S>,
    h: Point2<S>,
    r: i64,
    u: &FeatureVector<S>,
) -> Result<FeatureMap<S>> {
    let mut out = FeatureMap::zeros(f.height(), f.width(), f.channels());
    aggregate_vjp_into(&mut out, h, r, u.as_slice())?;
    Ok(out)
}

/// Derivative of [`aggregate`] with respect to the patch center.
pub fn aggregate_position_grad<S: Scalar>(
    f: &FeatureMap<S>,
    h: Point2<S>,
    r: i64,
) -> Result<(FeatureVector<S>, FeatureVector<S>)> {
    check_radius(r)?;
    let c = f.channels();
    let (mut gx, mut gy) = (vec![S::zero(); c], vec![S::zero(); c]);
    for o in offsets::<S>(r) {
        let (sx, sy) = sample_position_grad(f, h.add(o))?;
        for ch in 0..c {
            gx[ch] += sx.0[ch];
            gy[ch] += sy.0[ch];
        }
    }
    Ok((FeatureVector(gx), FeatureVector(gy)))
}
