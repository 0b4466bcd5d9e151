//! Editing metrics: content consistency under a forward/reverse instruction
//! pair, the blob-center distance oracle, and the suite runner.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use freedrag_baseline::{PointDrag, TrackConfig};
use freedrag_core::instruction::PointPair;
use freedrag_core::{
    AnyBackend, Case, ConfigOverrides, DragError, DragMethod, DragTrace, FeatureMap, FreeDrag,
    GeneratorBackend, Instruction, LatentCode, Method, Point2, Result, RunStatus, Scalar,
};

use crate::method::AnyMethod;

/// Name of the similarity kernel used by [`ccsd`].
pub const CCSD_KERNEL: &str = "range_normalized_l1";

/// Builds the instruction's method, starting from `latent`.
pub fn start_method<S: Scalar>(
    inst: &Instruction,
    latent: LatentCode<S>,
    extra: &ConfigOverrides,
) -> Result<AnyMethod<S>> {
    inst.validate()?;
    let backend: AnyBackend<S> = inst.backend.build()?;
    let pairs = inst.pairs::<S>();
    let mask = inst.mask()?;
    Ok(match inst.method {
        Method::FreeDrag => AnyMethod::FreeDrag(FreeDrag::new(
            backend,
            inst.drag_config(extra)?,
            latent,
            &pairs,
            mask,
        )?),
        Method::PointDrag => AnyMethod::PointDrag(PointDrag::new(
            backend,
            TrackConfig::for_instruction(inst, extra)?,
            latent,
            &pairs,
            mask,
        )?),
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome<S> {
    pub status: RunStatus,
    pub latent: LatentCode<S>,
    pub handles: Vec<Point2<S>>,
    pub trace: DragTrace<S>,
    pub substeps: usize,
}

/// Runs the instruction to completion from `latent`.
pub fn run_instruction<S: Scalar>(
    inst: &Instruction,
    latent: LatentCode<S>,
    extra: &ConfigOverrides,
) -> Result<RunOutcome<S>> {
    let mut m = start_method(inst, latent, extra)?;
    let status = m.run()?;
    Ok(RunOutcome {
        status,
        latent: m.latent().clone(),
        handles: m.handles(),
        trace: m.trace().clone(),
        substeps: m.substeps_used(),
    })
}

/// Reverse instruction: each achieved handle position is dragged back to
/// the original handle.
pub fn reverse_instruction<S: Scalar>(
    inst: &Instruction,
    achieved: &[Point2<S>],
) -> Result<Instruction> {
    if achieved.len() != inst.points.len() {
        return Err(DragError::contract(format!(
            "{} achieved positions for {} points",
            achieved.len(),
            inst.points.len()
        )));
    }
    let mut rev = inst.clone();
    rev.points = inst
        .points
        .iter()
        .zip(achieved)
        .map(|(p, a)| PointPair {
            handle: [a.x.as_f64(), a.y.as_f64()],
            target: p.handle,
        })
        .collect();
    Ok(rev)
}

/// Channel-averaged grayscale projection used for metric renders.
pub fn render<S: Scalar>(f: &FeatureMap<S>) -> Vec<S> {
    f.channel_mean()
}

fn range<S: Scalar>(v: &[S]) -> S {
    let (lo, hi) = v
        .iter()
        .fold((S::infinity(), S::neg_infinity()), |(lo, hi), x| {
            (lo.min(*x), hi.max(*x))
        });
    if v.is_empty() {
        S::zero()
    } else {
        hi - lo
    }
}

/// Mean absolute difference between two renders, divided by the larger of
/// their dynamic ranges (1 when both are flat).
pub fn ccsd_render<S: Scalar>(a: &[S], b: &[S]) -> Result<S> {
    if a.len() != b.len() {
        return Err(DragError::contract("ccsd renders differ in size"));
    }
    if a.is_empty() {
        return Ok(S::zero());
    }
    let mut scale = range(a).max(range(b));
    if scale == S::zero() {
        scale = S::one();
    }
    let mad = a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).sum::<S>() / S::lit(a.len() as f64);
    Ok(mad / scale)
}

/// Content consistency between an original field and its round trip.
pub fn ccsd<S: Scalar>(original: &FeatureMap<S>, roundtrip: &FeatureMap<S>) -> Result<S> {
    original.check_same_shape(roundtrip, "ccsd")?;
    ccsd_render(&render(original), &render(roundtrip))
}

/// Blob slot each instruction point drags: the blob whose initial center is
/// nearest the handle.
pub fn dragged_slots<S: Scalar>(inst: &Instruction, backend: &AnyBackend<S>) -> Result<Vec<usize>> {
    let centers = backend.object_centers(&inst.backend.initial_latent()?)?;
    Ok(inst
        .pairs::<S>()
        .iter()
        .map(|(h, _)| {
            (0..centers.len())
                .min_by(|&a, &b| {
                    centers[a]
                        .dist(*h)
                        .partial_cmp(&centers[b].dist(*h))
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(0)
        })
        .collect())
}

/// Mean over points of the distance between the dragged blob's final center
/// and the intended target.
pub fn mean_distance_oracle<S: Scalar>(
    inst: &Instruction,
    final_latent: &LatentCode<S>,
    backend: &AnyBackend<S>,
) -> Result<S> {
    let slots = dragged_slots(inst, backend)?;
    let centers = backend.object_centers(final_latent)?;
    let pairs = inst.pairs::<S>();
    let total: S = slots
        .iter()
        .zip(&pairs)
        .map(|(s, (_, t))| centers[*s].dist(*t))
        .sum();
    Ok(total / S::lit(pairs.len() as f64))
}

/// Forward run, reverse run, and the fields needed to score them.
#[derive(Debug, Clone)]
pub struct RoundTrip<S> {
    pub forward: RunOutcome<S>,
    pub reverse: RunOutcome<S>,
    pub original: FeatureMap<S>,
    pub edited: FeatureMap<S>,
    pub restored: FeatureMap<S>,
}

pub fn round_trip<S: Scalar>(inst: &Instruction, extra: &ConfigOverrides) -> Result<RoundTrip<S>> {
    let backend: AnyBackend<S> = inst.backend.build()?;
    let w0: LatentCode<S> = inst.backend.initial_latent()?;
    let original = backend.generate(&w0)?;
    let forward = run_instruction(inst, w0, extra)?;
    let edited = backend.generate(&forward.latent)?;
    let rev = reverse_instruction(inst, &forward.handles)?;
    let reverse = run_instruction(&rev, forward.latent.clone(), extra)?;
    let restored = backend.generate(&reverse.latent)?;
    Ok(RoundTrip {
        forward,
        reverse,
        original,
        edited,
        restored,
    })
}

/// One suite entry's metrics. Everything except `wall_time` is a pure
/// function of the instruction and options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub index: usize,
    pub method: Method,
    pub kernel: String,
    pub ccsd: Option<f64>,
    pub mean_distance: Option<f64>,
    pub steps_used: usize,
    pub forward_status: Option<RunStatus>,
    pub reverse_status: Option<RunStatus>,
    pub freeze_count: usize,
    pub fallback_count: usize,
    pub advance_count: usize,
    /// Forward trace rows, all cases.
    pub record_count: usize,
    /// Mean handle displacement between consecutive forward rows of a point.
    pub mean_move: Option<f64>,
    pub wall_time: f64,
    pub error: Option<String>,
}

impl MetricReport {
    /// Report with `wall_time` zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> MetricReport {
        MetricReport {
            wall_time: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub overrides: ConfigOverrides,
    /// Runs every instruction with this method instead of its own.
    pub method: Option<Method>,
}

/// Mean distance between consecutive recorded handle positions, over all
/// points; `None` with fewer than two rows for every point.
pub fn mean_move<S: Scalar>(trace: &DragTrace<S>, points: usize) -> Option<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for i in 0..points {
        let traj = trace.trajectory(i);
        for w in traj.windows(2) {
            total += w[0].dist(w[1]).as_f64();
            n += 1;
        }
    }
    (n > 0).then(|| total / n as f64)
}

fn evaluate_one<S: Scalar>(index: usize, inst: &Instruction, opts: &SuiteOptions) -> MetricReport {
    let started = Instant::now();
    let mut inst = inst.clone();
    if let Some(m) = opts.method {
        inst.method = m;
    }
    let mut report = MetricReport {
        index,
        method: inst.method,
        kernel: CCSD_KERNEL.to_string(),
        ccsd: None,
        mean_distance: None,
        steps_used: 0,
        forward_status: None,
        reverse_status: None,
        freeze_count: 0,
        fallback_count: 0,
        advance_count: 0,
        record_count: 0,
        mean_move: None,
        wall_time: 0.0,
        error: None,
    };
    let result = (|| -> Result<()> {
        let rt = round_trip::<S>(&inst, &opts.overrides)?;
        let backend: AnyBackend<S> = inst.backend.build()?;
        report.ccsd = Some(ccsd(&rt.original, &rt.restored)?.as_f64());
        if inst.backend.is_blob() {
            report.mean_distance =
                Some(mean_distance_oracle(&inst, &rt.forward.latent, &backend)?.as_f64());
        }
        report.steps_used = rt.forward.substeps + rt.reverse.substeps;
        report.forward_status = Some(rt.forward.status);
        report.reverse_status = Some(rt.reverse.status);
        report.freeze_count = rt.forward.trace.count_case(Case::Freeze);
        report.fallback_count = rt.forward.trace.count_case(Case::Fallback);
        report.advance_count = rt.forward.trace.count_case(Case::Advance);
        report.record_count = rt.forward.trace.len();
        report.mean_move = mean_move(&rt.forward.trace, inst.points.len());
        Ok(())
    })();
    if let Err(e) = result {
        report.error = Some(e.to_string());
    }
    report.wall_time = started.elapsed().as_secs_f64();
    report
}

/// Runs every instruction forward then reversed and scores it. Failures are
/// recorded per entry. Entries run in parallel; output order matches input.
pub fn run_suite<S: Scalar>(
    instructions: &[Instruction],
    opts: &SuiteOptions,
) -> Vec<MetricReport> {
    instructions
        .par_iter()
        .enumerate()
        .map(|(i, inst)| evaluate_one::<S>(i, inst, opts))
        .collect()
}

/// Mean of the `Some` values; `None` when there are none.
pub fn mean_of(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}
