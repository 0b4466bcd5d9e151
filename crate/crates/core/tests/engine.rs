use freedrag_core::backend::BlobParams;
use freedrag_core::drag::loss::{total_loss, LossTerms};
use freedrag_core::instruction::{
    BlobBackendParams, ConfigOverrides, DirectBackendParams, DirectInit, PointPair,
};
use freedrag_core::sampling::aggregate;
use freedrag_core::{
    BackendSpec, Case, DragConfig, DragError, DragMethod, FreeDrag, GeneratorBackend, Instruction,
    LatentCode, Point2, PointStatus, RunStatus,
};

fn blob_instruction(handle: [f64; 2], target: [f64; 2], blobs: Vec<BlobParams>) -> Instruction {
    Instruction::new(
        BackendSpec::Blob {
            params: BlobBackendParams {
                blobs: Some(blobs),
                ..Default::default()
            },
            seed: 7,
        },
        vec![PointPair { handle, target }],
    )
}

fn single_blob(handle: [f64; 2], target: [f64; 2]) -> Instruction {
    blob_instruction(
        handle,
        target,
        vec![BlobParams {
            center: handle,
            amplitude: 0.8,
            width: 3.0,
        }],
    )
}

fn engine(
    inst: &Instruction,
    extra: &ConfigOverrides,
) -> FreeDrag<f64, freedrag_core::AnyBackend<f64>> {
    FreeDrag::new(
        inst.backend.build().unwrap(),
        inst.drag_config(extra).unwrap(),
        inst.backend.initial_latent().unwrap(),
        &inst.pairs(),
        inst.mask().unwrap(),
    )
    .unwrap()
}

fn on_segment(p: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let t = (((p.x - a.x) * vx + (p.y - a.y) * vy) / (vx * vx + vy * vy)).clamp(0.0, 1.0);
    ((p.x - a.x - t * vx).powi(2) + (p.y - a.y - t * vy).powi(2)).sqrt()
}

#[test]
fn zero_length_drag_converges_without_substeps() {
    let inst = single_blob([30.0, 30.0], [30.0, 30.0]);
    let mut e = engine(&inst, &ConfigOverrides::default());
    assert_eq!(e.status(), RunStatus::Converged);
    assert_eq!(e.run().unwrap(), RunStatus::Converged);
    assert_eq!(e.substeps_used(), 0);
    assert!(e.trace().records.is_empty());
    assert_eq!(e.latent(), &inst.backend.initial_latent::<f64>().unwrap());
}

#[test]
fn handle_within_stop_radius_is_terminated_at_start() {
    let inst = single_blob([30.0, 30.0], [31.5, 30.0]);
    let e = engine(&inst, &ConfigOverrides::default());
    assert_eq!(e.state().points[0].status, PointStatus::Terminated);
    assert_eq!(e.status(), RunStatus::Converged);
}

#[test]
fn empty_budget_exhausts_without_touching_state() {
    let inst = single_blob([20.0, 32.0], [44.0, 32.0]);
    let mut e = engine(
        &inst,
        &ConfigOverrides {
            max_total_steps: Some(0),
            ..Default::default()
        },
    );
    let before = e.state().clone();
    assert_eq!(e.step().unwrap(), RunStatus::StepBudgetExhausted);
    assert_eq!(e.state().latent, before.latent);
    assert_eq!(e.state().points, before.points);
    assert!(e.trace().records.is_empty());
}

#[test]
fn horizontal_blob_drag_reaches_target() {
    let inst = single_blob([20.0, 32.0], [44.0, 32.0]);
    let mut e = engine(&inst, &ConfigOverrides::default());
    assert_eq!(e.run().unwrap(), RunStatus::Converged);
    let center = e.backend().object_centers(e.latent()).unwrap()[0];
    let err = center.dist(Point2::new(44.0, 32.0));
    assert!(
        err <= 2.0,
        "blob center {center:?} is {err} px from the target"
    );
    assert!(e.substeps_used() <= 300);
}

#[test]
fn handles_stay_on_the_segment() {
    for (i, (h, t)) in [
        ([12.0, 15.0], [40.0, 44.0]),
        ([50.0, 20.0], [22.0, 30.0]),
        ([32.0, 50.0], [32.0, 14.0]),
    ]
    .into_iter()
    .enumerate()
    {
        let inst = single_blob(h, t);
        let mut e = engine(&inst, &ConfigOverrides::default());
        e.run().unwrap();
        let (a, b) = (Point2::new(h[0], h[1]), Point2::new(t[0], t[1]));
        for rec in &e.trace().records {
            let off = on_segment(rec.h, a, b);
            assert!(
                off < 1e-6,
                "run {i}, drag {}: {off} px off the segment",
                rec.k
            );
        }
    }
}

#[test]
fn trace_rows_are_well_formed() {
    let inst = single_blob([14.0, 20.0], [44.0, 36.0]);
    let mut e = engine(&inst, &ConfigOverrides::default());
    e.run().unwrap();
    let recs = &e.trace().records;
    assert!(!recs.is_empty());
    for (i, rec) in recs.iter().enumerate() {
        assert_eq!(rec.k, i + 1);
        assert_eq!(rec.point_index, 0);
        assert!((0.0..=0.8).contains(&rec.lambda), "lambda {}", rec.lambda);
        assert!(rec.substeps <= 5);
        assert!(rec.l_in >= 0.0 && rec.l_en >= 0.0);
    }
    let substeps: usize = recs.iter().map(|r| r.substeps).sum();
    assert_eq!(substeps, e.substeps_used());
    assert_eq!(e.trace().substep_losses.len(), e.substeps_used());
}

#[test]
fn no_update_pins_lambda_and_template() {
    let inst = single_blob([16.0, 16.0], [40.0, 40.0]);
    let mut e = engine(
        &inst,
        &ConfigOverrides {
            update_template: Some(false),
            ..Default::default()
        },
    );
    let t0 = e.state().points[0].template.clone();
    for _ in 0..6 {
        e.step().unwrap();
    }
    assert!(e.trace().records.iter().all(|r| r.lambda == 0.0));
    assert_eq!(e.state().points[0].template, t0);
}

#[test]
fn no_backtracking_only_advances() {
    let inst = single_blob([16.0, 16.0], [44.0, 40.0]);
    let mut e = engine(
        &inst,
        &ConfigOverrides {
            backtracking: Some(false),
            ..Default::default()
        },
    );
    e.run().unwrap();
    assert_eq!(e.trace().count_case(Case::Freeze), 0);
    assert_eq!(e.trace().count_case(Case::Fallback), 0);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let inst = single_blob([18.0, 40.0], [46.0, 22.0]);
    let mut full = engine(&inst, &ConfigOverrides::default());
    full.run().unwrap();

    let mut part = engine(&inst, &ConfigOverrides::default());
    for _ in 0..4 {
        part.step().unwrap();
    }
    let json = serde_json::to_string(part.state()).unwrap();
    let state = serde_json::from_str(&json).unwrap();
    let mut resumed = FreeDrag::from_state(
        inst.backend.build::<f64>().unwrap(),
        inst.drag_config(&ConfigOverrides::default()).unwrap(),
        state,
    )
    .unwrap();
    resumed.run().unwrap();
    assert_eq!(resumed.state(), full.state());
}

#[test]
fn runs_are_deterministic() {
    let inst = single_blob([10.0, 10.0], [40.0, 30.0]);
    let mut a = engine(&inst, &ConfigOverrides::default());
    let mut b = engine(&inst, &ConfigOverrides::default());
    a.run().unwrap();
    b.run().unwrap();
    assert_eq!(a.state(), b.state());
}

#[test]
fn f32_engine_runs() {
    let inst = single_blob([20.0, 32.0], [44.0, 32.0]);
    let mut e = FreeDrag::<f32, _>::new(
        inst.backend.build().unwrap(),
        inst.drag_config(&ConfigOverrides::default()).unwrap(),
        inst.backend.initial_latent().unwrap(),
        &inst.pairs(),
        None,
    )
    .unwrap();
    assert_eq!(e.run().unwrap(), RunStatus::Converged);
    let c = e.backend().object_centers(e.latent()).unwrap()[0];
    assert!(c.dist(Point2::new(44.0, 32.0)) <= 2.5);
}

fn direct_instruction(init: DirectInit) -> Instruction {
    Instruction::new(
        BackendSpec::Direct {
            params: DirectBackendParams {
                height: 16,
                width: 16,
                channels: 2,
                init,
            },
            seed: 3,
        },
        vec![PointPair {
            handle: [4.0, 8.0],
            target: [12.0, 8.0],
        }],
    )
}

#[test]
fn satisfied_templates_leave_the_latent_alone() {
    let inst = direct_instruction(DirectInit::Noise { amplitude: 1.0 });
    let mut e = engine(&inst, &ConfigOverrides::default());
    let (loss, grad) = e.loss_gradient().unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|g| *g == 0.0));
    let before = e.latent().clone();
    e.optimize_substep().unwrap();
    assert_eq!(e.latent(), &before);
}

#[test]
fn small_steps_do_not_increase_the_loss() {
    for seed in 0..10u64 {
        let mut inst = single_blob([20.0, 20.0], [40.0, 36.0]);
        if let BackendSpec::Blob { params, .. } = &mut inst.backend {
            params.blobs = None;
            params.blob_count = Some(2);
        }
        inst.backend = match inst.backend {
            BackendSpec::Blob { params, .. } => BackendSpec::Blob { params, seed },
            other => other,
        };
        let backend = inst.backend.build::<f64>().unwrap();
        let w0 = inst.backend.initial_latent::<f64>().unwrap();
        let handle = backend.object_centers(&w0).unwrap()[0];
        let f0 = backend.generate(&w0).unwrap();
        let mut pt = freedrag_core::DragPoint {
            origin: handle,
            target: Point2::new(40.0, 36.0),
            current: handle,
            template: aggregate(&f0, handle, 3).unwrap(),
            l_in: 0.0,
            l_en: 0.0,
            lambda: 0.0,
            status: PointStatus::Active,
        };
        // Move the supervision point one step along the drag.
        let dir = pt.target.sub(handle).scale(1.0 / pt.target.dist(handle));
        pt.current = handle.add(dir.scale(1.5));
        let cfg = DragConfig::<f64>::preset_a().with_learning_rate(1e-3);
        let mut e = FreeDrag::from_state(
            backend.clone(),
            cfg,
            freedrag_core::DragState {
                latent: w0.clone(),
                points: vec![pt],
                mask: None,
                f0: f0.clone(),
                drag_index: 1,
                substep: 0,
                started: true,
                status: RunStatus::Running,
                trace: Default::default(),
            },
        )
        .unwrap();
        let before = e.loss().unwrap();
        e.optimize_substep().unwrap();
        let after = e.loss().unwrap();
        assert!(after <= before, "seed {seed}: {before} -> {after}");
    }
}

#[test]
fn runaway_learning_rate_reports_divergence() {
    let inst = direct_instruction(DirectInit::Noise { amplitude: 1.0 });
    let mut e = engine(
        &inst,
        &ConfigOverrides {
            learning_rate: Some(1e308),
            ..Default::default()
        },
    );
    let err = e.run().unwrap_err();
    assert!(matches!(err, DragError::Diverged { .. }), "{err}");
    assert_eq!(e.status(), RunStatus::Diverged);
}

#[test]
fn direct_backend_moves_content() {
    let inst = direct_instruction(DirectInit::Blobs { count: 2 });
    let mut e = engine(&inst, &ConfigOverrides::default());
    let before = total_loss(
        &LossTerms {
            points: &e.state().points,
            f0: &e.state().f0,
            mask: None,
            gamma: 10.0,
            r: 3,
        },
        &e.state().f0,
    )
    .unwrap();
    assert_eq!(before, 0.0);
    for _ in 0..5 {
        e.step().unwrap();
    }
    assert!(e.latent() != &LatentCode(inst.backend.initial_latent::<f64>().unwrap().0));
    assert!(e.handles()[0].x > 4.0);
}

#[test]
fn out_of_grid_points_are_rejected() {
    let inst = single_blob([20.0, 32.0], [70.0, 32.0]);
    let r = FreeDrag::<f64, _>::new(
        inst.backend.build().unwrap(),
        DragConfig::preset_a(),
        inst.backend.initial_latent().unwrap(),
        &inst.pairs(),
        None,
    );
    assert!(r.is_err());
    assert!(inst.validate().is_err());
}
