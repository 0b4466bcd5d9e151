use serde::{Deserialize, Serialize};

use crate::backend::GeneratorBackend;
use crate::error::{DragError, Result};
use crate::field::{FeatureMap, LatentCode, Mask, Point2};
use crate::method::DragMethod;
use crate::sampling::aggregate;
use crate::scalar::Scalar;
use crate::trace::{Case, DragRecord, DragTrace};

use super::loss::{total_loss, total_loss_with_grad, LossTerms};
use super::search::{localize, next_position};
use super::template::{calibrate, lambda_coeff, update_template};
use super::{DragConfig, DragPoint, PointStatus, RunStatus};

/// Everything needed to resume a run. `f0` is fixed at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DragState<S> {
    pub latent: LatentCode<S>,
    pub points: Vec<DragPoint<S>>,
    pub mask: Option<Mask>,
    pub f0: FeatureMap<S>,
    /// Index of the next drag to run (the first drag is 1).
    pub drag_index: usize,
    /// Gradient substeps spent so far across all drags.
    pub substep: usize,
    /// Whether the first handle positions have been placed.
    pub started: bool,
    pub status: RunStatus,
    pub trace: DragTrace<S>,
}

/// Feature-dragging engine over a generator backend.
#[derive(Debug, Clone)]
pub struct FreeDrag<S, B> {
    backend: B,
    cfg: DragConfig<S>,
    alpha: S,
    beta: S,
    state: DragState<S>,
}

impl<S: Scalar, B: GeneratorBackend<S>> FreeDrag<S, B> {
    /// Sets up a run from `latent` for the given `(handle, target)` pairs.
    pub fn new(
        backend: B,
        cfg: DragConfig<S>,
        latent: LatentCode<S>,
        pairs: &[(Point2<S>, Point2<S>)],
        mask: Option<Mask>,
    ) -> Result<Self> {
        cfg.validate()?;
        if !latent.is_finite() {
            return Err(DragError::contract("latent contains non-finite entries"));
        }
        let f0 = backend.generate(&latent)?;
        let (h, w, _) = f0.shape();
        if let Some(m) = &mask {
            if (m.height(), m.width()) != (h, w) {
                return Err(DragError::contract(
                    "mask shape does not match the feature map",
                ));
            }
        }
        let mut points = Vec::with_capacity(pairs.len());
        for (i, (p, t)) in pairs.iter().enumerate() {
            check_in_grid(*p, h, w, i, "handle")?;
            check_in_grid(*t, h, w, i, "target")?;
            let status = if p.dist(*t) <= cfg.terminate_dist {
                PointStatus::Terminated
            } else {
                PointStatus::Active
            };
            points.push(DragPoint {
                origin: *p,
                target: *t,
                current: *p,
                template: aggregate(&f0, *p, cfg.r)?,
                l_in: S::zero(),
                l_en: S::zero(),
                lambda: S::zero(),
                status,
            });
        }
        let status = if points.iter().all(|p| p.status == PointStatus::Terminated) {
            RunStatus::Converged
        } else {
            RunStatus::Running
        };
        let state = DragState {
            latent,
            points,
            mask,
            f0,
            drag_index: 1,
            substep: 0,
            started: false,
            status,
            trace: DragTrace::new(),
        };
        Self::from_state(backend, cfg, state)
    }

    /// Resumes from a saved state.
    pub fn from_state(backend: B, cfg: DragConfig<S>, state: DragState<S>) -> Result<Self> {
        cfg.validate()?;
        backend.check_latent(&state.latent)?;
        let (alpha, beta) = calibrate(cfg.l)?;
        Ok(FreeDrag {
            backend,
            cfg,
            alpha,
            beta,
            state,
        })
    }

    pub fn state(&self) -> &DragState<S> {
        &self.state
    }

    pub fn into_state(self) -> DragState<S> {
        self.state
    }

    pub fn config(&self) -> &DragConfig<S> {
        &self.cfg
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    fn terms(&self) -> LossTerms<'_, S> {
        LossTerms {
            points: &self.state.points,
            f0: &self.state.f0,
            mask: self.state.mask.as_ref(),
            gamma: self.cfg.gamma,
            r: self.cfg.r,
        }
    }

    /// Total loss at the current latent.
    pub fn loss(&self) -> Result<S> {
        let f = self.backend.generate(&self.state.latent)?;
        total_loss(&self.terms(), &f)
    }

    /// Gradient of the total loss with respect to the latent, and the loss.
    pub fn loss_gradient(&self) -> Result<(S, Vec<S>)> {
        let f = self.backend.generate(&self.state.latent)?;
        self.gradient_at(&f)
    }

    fn gradient_at(&self, f: &FeatureMap<S>) -> Result<(S, Vec<S>)> {
        let (loss, cot) = total_loss_with_grad(&self.terms(), f)?;
        let grad = self.backend.vjp(&self.state.latent, &cot)?;
        Ok((loss, grad))
    }

    fn diverged(&mut self) -> DragError {
        self.state.status = RunStatus::Diverged;
        DragError::Diverged {
            substep: self.state.substep,
            trace: Box::new(self.state.trace.to_f64()),
        }
    }

    fn descend(&mut self, f: &FeatureMap<S>) -> Result<S> {
        let (loss, grad) = self.gradient_at(f)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(self.diverged());
        }
        let lr = self.cfg.learning_rate;
        for (w, g) in self.state.latent.0.iter_mut().zip(&grad) {
            *w -= lr * *g;
        }
        if !self.state.latent.is_finite() {
            return Err(self.diverged());
        }
        self.state.substep += 1;
        self.state.trace.substep_losses.push(loss);
        Ok(loss)
    }

    /// One plain gradient-descent step on the latent. Returns the loss
    /// before the step.
    pub fn optimize_substep(&mut self) -> Result<S> {
        let f = self.backend.generate(&self.state.latent)?;
        self.descend(&f)
    }

    fn discrepancies(&self, f: &FeatureMap<S>) -> Result<Vec<Option<S>>> {
        self.state
            .points
            .iter()
            .map(|p| match p.status {
                PointStatus::Active => Ok(Some(
                    aggregate(f, p.current, self.cfg.r)?.l1_dist(&p.template),
                )),
                PointStatus::Terminated => Ok(None),
            })
            .collect()
    }

    /// Places the first handle positions: `T¹ = T⁰`, then a line search
    /// from the original handle on the initial features.
    fn start(&mut self) -> Result<()> {
        let cfg = &self.cfg;
        for p in self.state.points.iter_mut() {
            if p.status != PointStatus::Active {
                continue;
            }
            let h = localize(
                p.origin,
                p.target,
                &p.template,
                cfg.d,
                cfg.l,
                &self.state.f0,
                cfg.r,
            )?
            .unwrap_or(p.origin);
            p.current = h;
            p.l_in = aggregate(&self.state.f0, h, cfg.r)?.l1_dist(&p.template);
        }
        self.state.started = true;
        Ok(())
    }

    fn budget_left(&self) -> bool {
        self.state.substep < self.cfg.max_total_steps
    }

    /// Runs drag `k`: substeps toward the templates, then template update,
    /// termination and backtracking line search for every active point.
    pub fn step_drag(&mut self) -> Result<RunStatus> {
        if self.state.status.is_finished() {
            return Ok(self.state.status);
        }
        if !self.budget_left() {
            self.state.status = RunStatus::StepBudgetExhausted;
            return Ok(self.state.status);
        }
        if !self.state.started {
            self.start()?;
        }
        let half_l = S::lit(0.5) * self.cfg.l;
        let mut substeps = 0;
        let mut f = self.backend.generate(&self.state.latent)?;
        while substeps < self.cfg.steps_per_drag && self.budget_left() {
            let disc = self.discrepancies(&f)?;
            if disc.iter().flatten().all(|v| *v < half_l) {
                break;
            }
            self.descend(&f)?;
            substeps += 1;
            f = self.backend.generate(&self.state.latent)?;
        }

        let loss = total_loss(&self.terms(), &f)?;
        if !loss.is_finite() {
            return Err(self.diverged());
        }
        let k = self.state.drag_index;
        for i in 0..self.state.points.len() {
            if self.state.points[i].status != PointStatus::Active {
                continue;
            }
            let current = aggregate(&f, self.state.points[i].current, self.cfg.r)?;
            let l_en = current.l1_dist(&self.state.points[i].template);
            let lambda = if self.cfg.update_template {
                lambda_coeff(l_en, self.alpha, self.beta, self.cfg.lambda_cap)
            } else {
                S::zero()
            };
            let pt = &mut self.state.points[i];
            pt.l_en = l_en;
            pt.lambda = lambda;
            let optimized_at = pt.current;
            let l_in = pt.l_in;
            let next_template = update_template(&pt.template, &current, lambda)?;

            let case = if optimized_at.dist(pt.target) <= self.cfg.terminate_dist {
                pt.status = PointStatus::Terminated;
                Case::Terminated
            } else {
                let (next, case) = next_position(pt, &next_template, &self.cfg, &f)?;
                let pt = &mut self.state.points[i];
                pt.current = next;
                pt.l_in = aggregate(&f, next, self.cfg.r)?.l1_dist(&next_template);
                case
            };
            self.state.points[i].template = next_template;
            self.state.trace.push(DragRecord {
                k,
                point_index: i,
                h: optimized_at,
                l_in,
                l_en,
                lambda,
                case,
                loss,
                substeps,
            });
        }
        self.state.drag_index += 1;

        self.state.status = if self
            .state
            .points
            .iter()
            .all(|p| p.status == PointStatus::Terminated)
        {
            RunStatus::Converged
        } else if !self.budget_left() {
            RunStatus::StepBudgetExhausted
        } else {
            RunStatus::Running
        };
        Ok(self.state.status)
    }
}

fn check_in_grid<S: Scalar>(p: Point2<S>, h: usize, w: usize, i: usize, role: &str) -> Result<()> {
    let inside = p.is_finite()
        && p.x >= S::zero()
        && p.y >= S::zero()
        && p.x <= S::lit((w - 1) as f64)
        && p.y <= S::lit((h - 1) as f64);
    if !inside {
        return Err(DragError::contract(format!(
            "{role} of point {i} at ({}, {}) lies outside the {w}x{h} grid",
            p.x, p.y
        )));
    }
    Ok(())
}

impl<S: Scalar, B: GeneratorBackend<S>> DragMethod<S> for FreeDrag<S, B> {
    fn step(&mut self) -> Result<RunStatus> {
        self.step_drag()
    }

    fn status(&self) -> RunStatus {
        self.state.status
    }

    fn trace(&self) -> &DragTrace<S> {
        &self.state.trace
    }

    fn latent(&self) -> &LatentCode<S> {
        &self.state.latent
    }

    fn handles(&self) -> Vec<Point2<S>> {
        self.state.points.iter().map(|p| p.current).collect()
    }

    fn substeps_used(&self) -> usize {
        self.state.substep
    }
}
