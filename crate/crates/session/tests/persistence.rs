use freedrag_core::backend::BlobParams;
use freedrag_core::instruction::{BlobBackendParams, ConfigOverrides, PointPair};
use freedrag_core::{BackendSpec, Instruction, Method};
use freedrag_session::{Registry, Session, SessionRecord};

fn instruction(method: Method) -> Instruction {
    let mut inst = Instruction::new(
        BackendSpec::Blob {
            params: BlobBackendParams {
                blobs: Some(vec![BlobParams {
                    center: [24.0, 30.0],
                    amplitude: 0.9,
                    width: 3.5,
                }]),
                ..Default::default()
            },
            seed: 8,
        },
        vec![PointPair {
            handle: [24.0, 30.0],
            target: [38.0, 36.0],
        }],
    );
    inst.method = method;
    inst
}

fn untimed(rec: SessionRecord) -> SessionRecord {
    SessionRecord {
        created_at: 0.0,
        updated_at: 0.0,
        ..rec
    }
}

#[test]
fn saved_session_takes_the_same_next_step() {
    for method in [Method::FreeDrag, Method::PointDrag] {
        let mut live =
            Session::create("s1".into(), instruction(method), ConfigOverrides::default()).unwrap();
        for _ in 0..3 {
            live.step().unwrap();
        }
        let saved = serde_json::to_string(&live.record()).unwrap();
        let rec: SessionRecord = serde_json::from_str(&saved).unwrap();
        assert_eq!(rec, live.record());
        let mut resumed = Session::from_record(rec).unwrap();
        assert_eq!(resumed.version(), live.version());
        for _ in 0..3 {
            assert_eq!(resumed.step().unwrap(), live.step().unwrap());
        }
        assert_eq!(untimed(resumed.record()), untimed(live.record()));
    }
}

#[test]
fn record_with_a_newer_schema_is_rejected() {
    let live = Session::create(
        "s2".into(),
        instruction(Method::FreeDrag),
        ConfigOverrides::default(),
    )
    .unwrap();
    let mut rec = live.record();
    rec.instruction.schema_version += 1;
    assert!(Session::from_record(rec).is_err());
}

#[test]
fn set_points_keeps_earlier_edits() {
    let mut s = Session::create(
        "s3".into(),
        instruction(Method::FreeDrag),
        ConfigOverrides::default(),
    )
    .unwrap();
    let w0 = s.latent().clone();
    s.step().unwrap();
    s.step().unwrap();
    let edited = s.latent().clone();
    assert_ne!(edited, w0);
    s.set_points(
        vec![PointPair {
            handle: [10.0, 10.0],
            target: [16.0, 10.0],
        }],
        None,
    )
    .unwrap();
    assert_eq!(s.latent(), &edited);
    assert!(s.trace().is_empty());
    s.reset().unwrap();
    assert_eq!(s.latent(), &w0);
}

#[test]
fn rejected_points_leave_the_session_untouched() {
    let mut s = Session::create(
        "s4".into(),
        instruction(Method::FreeDrag),
        ConfigOverrides::default(),
    )
    .unwrap();
    s.step().unwrap();
    let before = s.record();
    let bad = vec![PointPair {
        handle: [10.0, 10.0],
        target: [10.0, 90.0],
    }];
    assert!(s.set_points(bad, None).is_err());
    assert_eq!(untimed(s.record()), untimed(before));
}

#[tokio::test]
async fn registry_restores_under_the_saved_id() {
    let reg = Registry::default();
    let (id, handle) = reg.create(instruction(Method::FreeDrag)).unwrap();
    handle.step().await.unwrap();
    let rec = handle.snapshot().await.unwrap();
    reg.remove(&id).unwrap();
    assert!(reg.is_empty());

    let other = Registry::default();
    let restored = other.restore(rec.clone()).unwrap();
    assert_eq!(restored.snapshot().await.unwrap(), rec);
    assert_eq!(
        other.get(&id).unwrap().snapshot().await.unwrap().session_id,
        id
    );
}
