//! Adaptive template updating.

use crate::error::{DragError, Result};
use crate::field::FeatureVector;
use crate::scalar::Scalar;

/// Sigmoid constants `(α, β)` that put `λ = 0.5` at `L_en = 0.2·l` and
/// `λ = 0.1` at `L_en = 0.8·l`.
pub fn calibrate<S: Scalar>(l: S) -> Result<(S, S)> {
    if !(l.is_finite() && l > S::zero()) {
        return Err(DragError::contract(format!("l must be > 0, got {l}")));
    }
    let alpha = S::lit(9.0).ln() / (S::lit(0.6) * l);
    let beta = S::lit(0.2) * l;
    Ok((alpha, beta))
}

/// Update coefficient `min(cap, 1 / (1 + exp(α·(L_en − β))))`.
pub fn lambda_coeff<S: Scalar>(l_en: S, alpha: S, beta: S, cap: S) -> S {
    let raw = S::one() / (S::one() + (alpha * (l_en - beta)).exp());
    raw.min(cap)
}

/// `λ·Fr + (1 − λ)·T`.
pub fn update_template<S: Scalar>(
    template: &FeatureVector<S>,
    current: &FeatureVector<S>,
    lambda: S,
) -> Result<FeatureVector<S>> {
    if template.len() != current.len() {
        return Err(DragError::contract(format!(
            "template length {} does not match aggregate length {}",
            template.len(),
            current.len()
        )));
    }
    let keep = S::one() - lambda;
    Ok(FeatureVector(
        template
            .as_slice()
            .iter()
            .zip(current.as_slice())
            .map(|(t, f)| lambda * *f + keep * *t)
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn calibrate_closed_form() {
        let (a, b) = calibrate(0.3_f64).unwrap();
        assert_relative_eq!(a, 9f64.ln() / 0.18, epsilon = 1e-12);
        assert_relative_eq!(a, 12.206_803_207_423_443, epsilon = 1e-9);
        assert_relative_eq!(b, 0.06, epsilon = 1e-15);

        let (a, b) = calibrate(1.0_f64).unwrap();
        assert_relative_eq!(a, 3.662_040_962_227_033, epsilon = 1e-12);
        assert_relative_eq!(b, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn calibrate_rejects_nonpositive() {
        assert!(calibrate(0.0_f64).is_err());
        assert!(calibrate(-1.0_f64).is_err());
        assert!(calibrate(f64::NAN).is_err());
    }

    #[test]
    fn lambda_examples() {
        let l = 0.3_f64;
        let (a, b) = calibrate(l).unwrap();
        assert_relative_eq!(lambda_coeff(b, a, b, 1.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(lambda_coeff(0.8 * l, a, b, 1.0), 0.1, epsilon = 1e-12);
        // sigmoid at L_en = 0: 1 / (1 + exp(-ln9/3)) = 1 / (1 + 9^(-1/3))
        let oracle = 1.0 / (1.0 + 9f64.powf(-1.0 / 3.0));
        let got = lambda_coeff(0.0, a, b, 0.8);
        assert_relative_eq!(got, oracle, epsilon = 1e-12);
        assert_relative_eq!(got, 0.675_333_511_212_968, epsilon = 1e-9);
        assert!(got < 0.8);
        // cap binds once the raw value exceeds it
        assert_eq!(lambda_coeff(-1.0, a, b, 0.8), 0.8);
    }

    #[test]
    fn lambda_saturates_without_nan() {
        let (a, b) = calibrate(0.01_f64).unwrap();
        assert_eq!(lambda_coeff(1e6, a, b, 1.0), 0.0);
        assert_eq!(lambda_coeff(-1e6, a, b, 1.0), 1.0);
    }

    #[test]
    fn update_template_examples() {
        let t = FeatureVector(vec![0.0_f64, 0.0]);
        let f = FeatureVector(vec![2.0_f64, 4.0]);
        assert_eq!(update_template(&t, &f, 0.0).unwrap(), t);
        assert_eq!(update_template(&t, &f, 1.0).unwrap(), f);
        assert_eq!(update_template(&t, &f, 0.5).unwrap().0, vec![1.0, 2.0]);
        assert!(update_template(&t, &FeatureVector(vec![1.0]), 0.5).is_err());
    }

    proptest! {
        #[test]
        fn calibration_identities(l in 1e-3_f64..10.0) {
            let (a, b) = calibrate(l).unwrap();
            prop_assert!((lambda_coeff(0.2 * l, a, b, 1.0) - 0.5).abs() < 1e-9);
            prop_assert!((lambda_coeff(0.8 * l, a, b, 1.0) - 0.1).abs() < 1e-9);
        }

        #[test]
        fn lambda_strictly_decreasing(l in 0.05_f64..2.0, x in 0.0_f64..1.0, dx in 1e-3_f64..0.5) {
            let (a, b) = calibrate(l).unwrap();
            let lo = lambda_coeff(x * l, a, b, 1.0);
            let hi = lambda_coeff((x + dx) * l, a, b, 1.0);
            prop_assert!(hi < lo);
        }

        #[test]
        fn update_is_convex(
            pairs in proptest::collection::vec((-10.0_f64..10.0, -10.0_f64..10.0), 1..8),
            lambda in 0.0_f64..=1.0,
        ) {
            let t = FeatureVector(pairs.iter().map(|p| p.0).collect());
            let f = FeatureVector(pairs.iter().map(|p| p.1).collect());
            let out = update_template(&t, &f, lambda).unwrap();
            for ((o, a), b) in out.0.iter().zip(&t.0).zip(&f.0) {
                prop_assert!(*o >= a.min(*b) - 1e-12 && *o <= a.max(*b) + 1e-12);
            }
        }
    }
}
