use approx::assert_relative_eq;
use freedrag_core::drag::loss::{
    drag_loss, mask_loss, total_loss, total_loss_with_grad, LossTerms,
};
use freedrag_core::sampling::aggregate;
use freedrag_core::{DragPoint, FeatureMap, FeatureVector, Mask, Point2, PointStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point(at: (f64, f64), template: Vec<f64>) -> DragPoint<f64> {
    let p = Point2::new(at.0, at.1);
    DragPoint {
        origin: p,
        target: Point2::new(at.0 + 10.0, at.1),
        current: p,
        template: FeatureVector(template),
        l_in: 0.0,
        l_en: 0.0,
        lambda: 0.0,
        status: PointStatus::Active,
    }
}

fn random_map(seed: u64, h: usize, w: usize, c: usize) -> FeatureMap<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMap::from_fn(h, w, c, |_, _, _| rng.gen_range(-1.0..1.0))
}

#[test]
fn matching_templates_give_zero() {
    let f = random_map(1, 10, 10, 3);
    let pts: Vec<_> = [(3.2, 4.4), (6.0, 6.5)]
        .into_iter()
        .map(|at| point(at, aggregate(&f, Point2::new(at.0, at.1), 2).unwrap().0))
        .collect();
    assert_eq!(drag_loss(&pts, &f, 2).unwrap(), 0.0);
}

#[test]
fn constant_field_against_zero_template() {
    let f = FeatureMap::from_fn(6, 6, 4, |_, _, _| -0.75);
    let pts = [point((2.5, 2.5), vec![0.0; 4])];
    assert_relative_eq!(drag_loss(&pts, &f, 0).unwrap(), 4.0 * 0.75, epsilon = 1e-15);
}

#[test]
fn drag_loss_is_additive_and_skips_terminated_points() {
    let f = random_map(2, 12, 12, 2);
    let a = point((3.0, 4.5), vec![0.1, 0.2]);
    let mut b = point((8.3, 7.1), vec![-0.4, 1.0]);
    let la = drag_loss(std::slice::from_ref(&a), &f, 1).unwrap();
    let lb = drag_loss(std::slice::from_ref(&b), &f, 1).unwrap();
    assert_relative_eq!(
        drag_loss(&[a.clone(), b.clone()], &f, 1).unwrap(),
        la + lb,
        epsilon = 1e-12
    );
    b.status = PointStatus::Terminated;
    assert_relative_eq!(drag_loss(&[a, b], &f, 1).unwrap(), la, epsilon = 1e-12);
}

#[test]
fn mask_loss_cases() {
    let f0 = random_map(3, 5, 6, 2);
    let shifted = FeatureMap::from_fn(5, 6, 2, |y, x, c| f0.get(y, x, c) + 1.0);
    let frozen = Mask::filled(5, 6, false);
    let free = Mask::filled(5, 6, true);
    assert_eq!(mask_loss(&f0, &f0, &frozen).unwrap(), 0.0);
    assert_eq!(mask_loss(&shifted, &f0, &free).unwrap(), 0.0);
    assert_relative_eq!(
        mask_loss(&shifted, &f0, &frozen).unwrap(),
        60.0,
        epsilon = 1e-12
    );
    let mut half = Mask::filled(5, 6, false);
    for y in 0..5 {
        for x in 0..3 {
            half.set(y, x, true);
        }
    }
    assert_relative_eq!(
        mask_loss(&shifted, &f0, &half).unwrap(),
        30.0,
        epsilon = 1e-12
    );
    assert!(mask_loss(&shifted, &f0, &Mask::filled(4, 6, false)).is_err());
}

#[test]
fn total_loss_combines_terms() {
    // drag = 2 (two channels, residual 1 each), mask = 0.5 (one cell), γ = 10 → 7.
    let f0 = FeatureMap::from_fn(4, 4, 2, |_, _, _| 0.0);
    let mut f = f0.clone();
    f.cell_mut(0, 0)[0] = 0.5;
    let mut m = Mask::filled(4, 4, true);
    m.set(0, 0, false);
    let pts = [point((2.0, 2.0), vec![1.0, -1.0])];
    let terms = LossTerms {
        points: &pts,
        f0: &f0,
        mask: Some(&m),
        gamma: 10.0,
        r: 0,
    };
    assert_relative_eq!(total_loss(&terms, &f).unwrap(), 7.0, epsilon = 1e-12);
    let drag = drag_loss(&pts, &f, 0).unwrap();
    assert_eq!(
        total_loss(
            &LossTerms {
                mask: None,
                ..terms
            },
            &f
        )
        .unwrap(),
        drag
    );
    assert_eq!(
        total_loss(
            &LossTerms {
                gamma: 0.0,
                ..terms
            },
            &f
        )
        .unwrap(),
        drag
    );
}

#[test]
fn feature_gradient_matches_finite_differences() {
    let f0 = random_map(4, 10, 10, 3);
    let f = random_map(5, 10, 10, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mask = Mask::filled(10, 10, false);
    for y in 2..7 {
        for x in 3..8 {
            mask.set(y, x, true);
        }
    }
    let pts: Vec<_> = [(4.3, 4.7), (5.5, 3.1)]
        .into_iter()
        .map(|at| point(at, (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect()))
        .collect();
    let terms = LossTerms {
        points: &pts,
        f0: &f0,
        mask: Some(&mask),
        gamma: 10.0,
        r: 1,
    };
    let (loss, g) = total_loss_with_grad(&terms, &f).unwrap();
    assert_relative_eq!(loss, total_loss(&terms, &f).unwrap(), epsilon = 1e-12);
    let eps = 1e-7;
    for i in 0..f.as_slice().len() {
        let (mut fp, mut fm) = (f.clone(), f.clone());
        fp.as_mut_slice()[i] += eps;
        fm.as_mut_slice()[i] -= eps;
        let fd =
            (total_loss(&terms, &fp).unwrap() - total_loss(&terms, &fm).unwrap()) / (2.0 * eps);
        assert_relative_eq!(fd, g.as_slice()[i], epsilon = 1e-5);
    }
}
