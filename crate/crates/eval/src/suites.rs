//! Fixed, seeded instruction suites on the blob backend.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use freedrag_core::backend::{BlobParams, RampBackground};
use freedrag_core::instruction::{BackendSpec, BlobBackendParams, Instruction, PointPair};

pub const SUITE_SIZE: usize = 20;
const GRID: f64 = 64.0;
const MARGIN: f64 = 6.0;

fn inside(p: [f64; 2]) -> bool {
    p.iter().all(|v| *v >= MARGIN && *v <= GRID - 1.0 - MARGIN)
}

fn blob(rng: &mut ChaCha8Rng, center: [f64; 2]) -> BlobParams {
    BlobParams {
        center,
        amplitude: rng.gen_range(0.7..1.0),
        width: rng.gen_range(3.0..4.0),
    }
}

/// Drag of `length` px from a random in-grid start in a random direction.
fn random_drag(rng: &mut ChaCha8Rng, length: f64) -> ([f64; 2], [f64; 2]) {
    loop {
        let start = [
            rng.gen_range(MARGIN..GRID - 1.0 - MARGIN),
            rng.gen_range(MARGIN..GRID - 1.0 - MARGIN),
        ];
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let end = [
            start[0] + length * angle.cos(),
            start[1] + length * angle.sin(),
        ];
        if inside(end) {
            return (start, end);
        }
    }
}

fn blob_instruction(seed: u64, blobs: Vec<BlobParams>, points: Vec<PointPair>) -> Instruction {
    Instruction::new(
        BackendSpec::Blob {
            params: BlobBackendParams {
                blobs: Some(blobs),
                ..Default::default()
            },
            seed,
        },
        points,
    )
}

/// Single-blob drags of 10–40 px, handle on the blob center.
pub fn convergence_suite() -> Vec<Instruction> {
    convergence_suite_from(1000)
}

pub fn convergence_suite_from(base_seed: u64) -> Vec<Instruction> {
    (0..SUITE_SIZE as u64)
        .map(|i| {
            let seed = base_seed + i;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let length = 10.0 + 30.0 * i as f64 / (SUITE_SIZE - 1) as f64;
            let (start, end) = random_drag(&mut rng, length);
            let b = blob(&mut rng, start);
            blob_instruction(
                seed,
                vec![b],
                vec![PointPair {
                    handle: start,
                    target: end,
                }],
            )
        })
        .collect()
}

/// Two identical blobs: the handle sits on one and the drag path passes
/// beside its twin, so nearest-feature tracking can latch onto the wrong one.
pub fn adversarial_suite() -> Vec<Instruction> {
    adversarial_suite_from(3000)
}

pub fn adversarial_suite_from(base_seed: u64) -> Vec<Instruction> {
    (0..SUITE_SIZE as u64)
        .map(|i| {
            let seed = base_seed + i;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            loop {
                let length = rng.gen_range(16.0..28.0);
                let (start, end) = random_drag(&mut rng, length);
                let (ux, uy) = ((end[0] - start[0]) / length, (end[1] - start[1]) / length);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                // Twin beside the middle of the path, about one blob width off it.
                let along = length * rng.gen_range(0.4..0.6);
                let off = sign * rng.gen_range(3.5..4.5);
                let twin_c = [
                    start[0] + ux * along - uy * off,
                    start[1] + uy * along + ux * off,
                ];
                if !inside(twin_c) {
                    continue;
                }
                let a = blob(&mut rng, start);
                let b = BlobParams {
                    center: twin_c,
                    ..a
                };
                let row: Vec<f64> = (0..4).map(|_| rng.gen_range(0.25..1.0)).collect();
                let mut inst = blob_instruction(
                    seed,
                    vec![a, b],
                    vec![PointPair {
                        handle: start,
                        target: end,
                    }],
                );
                if let BackendSpec::Blob { params, .. } = &mut inst.backend {
                    params.channel_weights = Some(vec![row.clone(), row]);
                }
                return inst;
            }
        })
        .collect()
}

const STANDARD_SHAPE_GAIN: f64 = 0.03;

/// Three blobs on a linear ramp background; one is dragged 12–30 px. The
/// ramp means a patch's surroundings change along the path, so a template
/// frozen at the start point can no longer be matched exactly.
pub fn standard_suite() -> Vec<Instruction> {
    standard_suite_from(5000)
}

pub fn standard_suite_from(base_seed: u64) -> Vec<Instruction> {
    (0..SUITE_SIZE as u64)
        .map(|i| {
            let seed = base_seed + i;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let length = rng.gen_range(12.0..30.0);
            let (start, end) = random_drag(&mut rng, length);
            let mut blobs = vec![blob(&mut rng, start)];
            while blobs.len() < 3 {
                let c = [
                    rng.gen_range(MARGIN..GRID - 1.0 - MARGIN),
                    rng.gen_range(MARGIN..GRID - 1.0 - MARGIN),
                ];
                if segment_dist(c, start, end) > 10.0 {
                    blobs.push(blob(&mut rng, c));
                }
            }
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let slope: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0005..0.001)).collect();
            let mut inst = blob_instruction(
                seed,
                blobs,
                vec![PointPair {
                    handle: start,
                    target: end,
                }],
            );
            if let BackendSpec::Blob { params, .. } = &mut inst.backend {
                // Softer shape coordinates than the default, so a stale
                // template can pull amplitude and width as well as position.
                params.shape_gain = Some(STANDARD_SHAPE_GAIN);
                params.background = Some(RampBackground {
                    direction: [angle.cos(), angle.sin()],
                    slope,
                    offset: vec![],
                });
            }
            inst
        })
        .collect()
}

fn segment_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((p[0] - a[0] - t * dx).powi(2) + (p[1] - a[1] - t * dy).powi(2)).sqrt()
}
