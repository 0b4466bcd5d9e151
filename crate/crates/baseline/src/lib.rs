//! Point-dragging baseline: alternate motion supervision and nearest-feature
//! point tracking, as in tracking-based drag editors.
//!
//! Motion supervision pulls the features one `motion_step` ahead of each
//! handle (toward its target) toward the detached features at the handle.
//! Tracking then relocates the handle to the integer cell, within a square
//! window around its previous position, whose feature best matches the
//! handle's original feature.

use serde::{Deserialize, Serialize};

use freedrag_core::drag::loss::mask_loss;
use freedrag_core::drag::{RunStatus, DIRECT_LEARNING_RATE};
use freedrag_core::instruction::ConfigOverrides;
use freedrag_core::sampling::{aggregate_vjp_into, sample};
use freedrag_core::{
    Case, DragError, DragMethod, DragRecord, DragTrace, FeatureMap, FeatureVector,
    GeneratorBackend, Instruction, LatentCode, Mask, Point2, Result, Scalar,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackConfig<S> {
    /// Half-size of the square tracking window, px.
    pub search_radius: S,
    /// Distance ahead of the handle that supervision pulls toward, px.
    pub motion_step: S,
    pub lr: S,
    pub max_steps: usize,
    /// Supervision patch radius.
    pub patch_radius: i64,
    pub gamma: S,
    pub stop_dist: S,
}

/// Default baseline learning rate on the blob backend.
pub const TRACK_LEARNING_RATE: f64 = 2.0;

impl<S: Scalar> Default for TrackConfig<S> {
    fn default() -> Self {
        TrackConfig {
            search_radius: S::lit(3.0),
            motion_step: S::lit(1.0),
            lr: S::lit(TRACK_LEARNING_RATE),
            max_steps: 300,
            patch_radius: 3,
            gamma: S::lit(10.0),
            stop_dist: S::lit(2.0),
        }
    }
}

impl<S: Scalar> TrackConfig<S> {
    /// Baseline config for an instruction: defaults, then the instruction's
    /// overrides, then `extra`.
    pub fn for_instruction(inst: &Instruction, extra: &ConfigOverrides) -> Result<Self> {
        let o = inst.config.merged(extra);
        let mut c = Self::default();
        if !inst.backend.is_blob() {
            c.lr = S::lit(DIRECT_LEARNING_RATE);
        }
        if let Some(v) = o.learning_rate {
            c.lr = S::lit(v);
        }
        if let Some(v) = o.max_total_steps {
            c.max_steps = v;
        }
        if let Some(v) = o.r {
            c.patch_radius = v;
        }
        if let Some(v) = o.gamma {
            c.gamma = S::lit(v);
        }
        if let Some(v) = o.terminate_dist {
            c.stop_dist = S::lit(v);
        }
        if let Some(v) = o.search_radius {
            c.search_radius = S::lit(v);
        }
        if let Some(v) = o.motion_step {
            c.motion_step = S::lit(v);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: S| v.is_finite() && v > S::zero();
        if !pos(self.search_radius) || !pos(self.motion_step) || !pos(self.stop_dist) {
            return Err(DragError::contract(
                "search_radius, motion_step and stop_dist must be > 0",
            ));
        }
        if self.patch_radius < 0 || !(self.lr >= S::zero()) || !(self.gamma >= S::zero()) {
            return Err(DragError::contract("invalid track config"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedPoint<S> {
    pub origin: Point2<S>,
    pub target: Point2<S>,
    pub current: Point2<S>,
    /// Feature of the original handle in the initial map.
    pub reference: FeatureVector<S>,
    pub active: bool,
}

impl<S: Scalar> TrackedPoint<S> {
    fn direction(&self) -> Point2<S> {
        let delta = self.target.sub(self.current);
        let n = delta.norm();
        if n == S::zero() {
            Point2::new(S::zero(), S::zero())
        } else {
            delta.scale(S::one() / n)
        }
    }
}

/// Nearest-feature search over the integer cells of `[prev ± radius]`
/// (clipped to the grid). Ties resolve to the first cell in row-major order.
pub fn track<S: Scalar>(
    reference: &FeatureVector<S>,
    f: &FeatureMap<S>,
    prev: Point2<S>,
    radius: S,
) -> Result<Point2<S>> {
    if !(radius > S::zero()) || !prev.is_finite() {
        return Err(DragError::contract(
            "tracking needs radius > 0 and a finite position",
        ));
    }
    let span = |c: S, len: usize| {
        let hi = S::lit((len - 1) as f64);
        let lo = (c - radius).ceil().max(S::zero()).min(hi);
        let up = (c + radius).floor().max(S::zero()).min(hi);
        (lo.to_usize().unwrap_or(0), up.to_usize().unwrap_or(0))
    };
    let (x0, x1) = span(prev.x, f.width());
    let (y0, y1) = span(prev.y, f.height());
    let mut best: Option<(S, usize, usize)> = None;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d: S = f
                .cell(y, x)
                .iter()
                .zip(reference.as_slice())
                .map(|(a, b)| (*a - *b).abs())
                .sum();
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, y, x));
            }
        }
    }
    let (_, y, x) = best.expect("window holds at least one cell");
    Ok(Point2::new(S::lit(x as f64), S::lit(y as f64)))
}

/// Per-point motion-supervision losses and the feature-space gradient of
/// their sum (plus the optional mask term).
fn motion_loss<S: Scalar>(
    points: &[TrackedPoint<S>],
    f: &FeatureMap<S>,
    f0: &FeatureMap<S>,
    mask: Option<&Mask>,
    cfg: &TrackConfig<S>,
    want_grad: bool,
) -> Result<(Vec<S>, S, Option<FeatureMap<S>>)> {
    let mut grad = want_grad.then(|| FeatureMap::zeros(f.height(), f.width(), f.channels()));
    let mut per_point = Vec::with_capacity(points.len());
    let r = cfg.patch_radius;
    for p in points {
        let mut lp = S::zero();
        if p.active {
            let shift = p.direction().scale(cfg.motion_step);
            if shift.norm() > S::zero() {
                for dy in -r..=r {
                    for dx in -r..=r {
                        let q = p
                            .current
                            .add(Point2::new(S::lit(dx as f64), S::lit(dy as f64)));
                        let ahead = sample(f, q.add(shift))?;
                        let here = sample(f, q)?;
                        let u: Vec<S> = ahead
                            .as_slice()
                            .iter()
                            .zip(here.as_slice())
                            .map(|(a, b)| {
                                lp += (*a - *b).abs();
                                (*a - *b).sign0()
                            })
                            .collect();
                        if let Some(g) = grad.as_mut() {
                            // the feature at the handle is detached
                            aggregate_vjp_into(g, q.add(shift), 0, &u)?;
                        }
                    }
                }
            }
        }
        per_point.push(lp);
    }
    let mut total: S = per_point.iter().copied().sum();
    if let Some(m) = mask {
        if cfg.gamma != S::zero() {
            total += cfg.gamma * mask_loss(f, f0, m)?;
            if let Some(g) = grad.as_mut() {
                let c = f.channels();
                let gs = g.as_mut_slice();
                for (i, (a, b)) in f.as_slice().iter().zip(f0.as_slice()).enumerate() {
                    if !m.cells()[i / c] {
                        gs[i] += cfg.gamma * (*a - *b).sign0();
                    }
                }
            }
        }
    }
    Ok((per_point, total, grad))
}

/// Tracking-based drag engine.
#[derive(Debug, Clone)]
pub struct PointDrag<S, B> {
    backend: B,
    cfg: TrackConfig<S>,
    latent: LatentCode<S>,
    f0: FeatureMap<S>,
    mask: Option<Mask>,
    points: Vec<TrackedPoint<S>>,
    steps: usize,
    status: RunStatus,
    trace: DragTrace<S>,
}

/// Resumable baseline state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackState<S> {
    pub latent: LatentCode<S>,
    pub f0: FeatureMap<S>,
    pub mask: Option<Mask>,
    pub points: Vec<TrackedPoint<S>>,
    pub steps: usize,
    pub status: RunStatus,
    pub trace: DragTrace<S>,
}

impl<S: Scalar, B: GeneratorBackend<S>> PointDrag<S, B> {
    pub fn new(
        backend: B,
        cfg: TrackConfig<S>,
        latent: LatentCode<S>,
        pairs: &[(Point2<S>, Point2<S>)],
        mask: Option<Mask>,
    ) -> Result<Self> {
        cfg.validate()?;
        let f0 = backend.generate(&latent)?;
        if let Some(m) = &mask {
            if (m.height(), m.width()) != (f0.height(), f0.width()) {
                return Err(DragError::contract(
                    "mask shape does not match the feature map",
                ));
            }
        }
        let mut points = Vec::with_capacity(pairs.len());
        for (p, t) in pairs {
            if !p.is_finite() || !t.is_finite() {
                return Err(DragError::contract("non-finite handle or target"));
            }
            points.push(TrackedPoint {
                origin: *p,
                target: *t,
                current: *p,
                reference: sample(&f0, *p)?,
                active: p.dist(*t) > cfg.stop_dist,
            });
        }
        let status = if points.iter().any(|p| p.active) {
            RunStatus::Running
        } else {
            RunStatus::Converged
        };
        Ok(PointDrag {
            backend,
            cfg,
            latent,
            f0,
            mask,
            points,
            steps: 0,
            status,
            trace: DragTrace::new(),
        })
    }

    pub fn from_state(backend: B, cfg: TrackConfig<S>, state: TrackState<S>) -> Result<Self> {
        cfg.validate()?;
        backend.check_latent(&state.latent)?;
        Ok(PointDrag {
            backend,
            cfg,
            latent: state.latent,
            f0: state.f0,
            mask: state.mask,
            points: state.points,
            steps: state.steps,
            status: state.status,
            trace: state.trace,
        })
    }

    pub fn state(&self) -> TrackState<S> {
        TrackState {
            latent: self.latent.clone(),
            f0: self.f0.clone(),
            mask: self.mask.clone(),
            points: self.points.clone(),
            steps: self.steps,
            status: self.status,
            trace: self.trace.clone(),
        }
    }

    pub fn points(&self) -> &[TrackedPoint<S>] {
        &self.points
    }

    pub fn config(&self) -> &TrackConfig<S> {
        &self.cfg
    }

    /// Motion-supervision loss at the current latent.
    pub fn motion_objective(&self) -> Result<S> {
        let f = self.backend.generate(&self.latent)?;
        Ok(motion_loss(
            &self.points,
            &f,
            &self.f0,
            self.mask.as_ref(),
            &self.cfg,
            false,
        )?
        .1)
    }

    /// Latent gradient of the motion-supervision loss (handle features
    /// detached), and the loss.
    pub fn motion_gradient(&self) -> Result<(S, Vec<S>)> {
        let f = self.backend.generate(&self.latent)?;
        let (_, loss, grad) = motion_loss(
            &self.points,
            &f,
            &self.f0,
            self.mask.as_ref(),
            &self.cfg,
            true,
        )?;
        let g = self
            .backend
            .vjp(&self.latent, &grad.expect("gradient requested"))?;
        Ok((loss, g))
    }

    /// One gradient step on the motion-supervision loss. Returns per-point
    /// losses before the step and the total.
    pub fn motion_supervision_step(&mut self) -> Result<(Vec<S>, S)> {
        let f = self.backend.generate(&self.latent)?;
        let (per_point, loss, grad) = motion_loss(
            &self.points,
            &f,
            &self.f0,
            self.mask.as_ref(),
            &self.cfg,
            true,
        )?;
        let g = self
            .backend
            .vjp(&self.latent, &grad.expect("gradient requested"))?;
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            self.status = RunStatus::Diverged;
            return Err(DragError::Diverged {
                substep: self.steps,
                trace: Box::new(self.trace.to_f64()),
            });
        }
        for (w, gv) in self.latent.0.iter_mut().zip(&g) {
            *w -= self.cfg.lr * *gv;
        }
        self.steps += 1;
        self.trace.substep_losses.push(loss);
        Ok((per_point, loss))
    }

    fn cycle(&mut self) -> Result<RunStatus> {
        if self.status.is_finished() {
            return Ok(self.status);
        }
        if self.steps >= self.cfg.max_steps {
            self.status = RunStatus::StepBudgetExhausted;
            return Ok(self.status);
        }
        let was_active: Vec<bool> = self.points.iter().map(|p| p.active).collect();
        let (before, _) = self.motion_supervision_step()?;
        let f = self.backend.generate(&self.latent)?;
        let k = self.steps;
        for p in self.points.iter_mut().filter(|p| p.active) {
            p.current = track(&p.reference, &f, p.current, self.cfg.search_radius)?;
            if p.current.dist(p.target) <= self.cfg.stop_dist {
                p.active = false;
            }
        }
        let (after, total, _) = motion_loss(
            &self.points,
            &f,
            &self.f0,
            self.mask.as_ref(),
            &self.cfg,
            false,
        )?;
        for (i, p) in self.points.iter().enumerate() {
            if !was_active[i] {
                continue;
            }
            self.trace.push(DragRecord {
                k,
                point_index: i,
                h: p.current,
                l_in: before[i],
                l_en: after[i],
                lambda: S::zero(),
                case: if p.active {
                    Case::Track
                } else {
                    Case::Terminated
                },
                loss: total,
                substeps: 1,
            });
        }
        self.status = if self.points.iter().all(|p| !p.active) {
            RunStatus::Converged
        } else if self.steps >= self.cfg.max_steps {
            RunStatus::StepBudgetExhausted
        } else {
            RunStatus::Running
        };
        Ok(self.status)
    }
}

impl<S: Scalar, B: GeneratorBackend<S>> DragMethod<S> for PointDrag<S, B> {
    fn step(&mut self) -> Result<RunStatus> {
        self.cycle()
    }

    fn status(&self) -> RunStatus {
        self.status
    }

    fn trace(&self) -> &DragTrace<S> {
        &self.trace
    }

    fn latent(&self) -> &LatentCode<S> {
        &self.latent
    }

    fn handles(&self) -> Vec<Point2<S>> {
        self.points.iter().map(|p| p.current).collect()
    }

    fn substeps_used(&self) -> usize {
        self.steps
    }
}

pub type TrackConfigF64 = TrackConfig<f64>;
pub type PointDragF64 = PointDrag<f64, freedrag_core::AnyBackend<f64>>;
