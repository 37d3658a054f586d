//! Sum-of-squared-differences distance and its force term.

use crate::error::Result;
use crate::field::{sample_warped, warped_gradient, ScalarField, VectorField2};

/// Per-node Gauss–Newton blocks `σ_lm = (∂_l T)(∂_m T)` at the warped
/// positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceLinearization {
    pub sigma11: ScalarField,
    pub sigma12: ScalarField,
    pub sigma21: ScalarField,
    pub sigma22: ScalarField,
}

fn check_inputs(template: &ScalarField, reference: &ScalarField, u: &VectorField2) -> Result<()> {
    template.check_same_shape(reference)?;
    u.check_shape(template)
}

/// `½ h² Σ (T(x + u) - R)²`.
pub fn ssd(template: &ScalarField, reference: &ScalarField, u: &VectorField2) -> Result<f64> {
    check_inputs(template, reference, u)?;
    let warped = sample_warped(template, u)?;
    Ok(ssd_of_warped(&warped, reference))
}

pub(crate) fn ssd_of_warped(warped: &ScalarField, reference: &ScalarField) -> f64 {
    let h = reference.spacing();
    let sq: f64 = warped
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    0.5 * h * h * sq
}

/// `(T(x + u) - R) ∇T(x + u)`.
pub fn force(
    template: &ScalarField,
    reference: &ScalarField,
    u: &VectorField2,
) -> Result<VectorField2> {
    check_inputs(template, reference, u)?;
    let warped = sample_warped(template, u)?;
    let g = warped_gradient(template, u)?;
    Ok(force_from_parts(&warped, reference, &g))
}

pub(crate) fn force_from_parts(
    warped: &ScalarField,
    reference: &ScalarField,
    warped_grad: &VectorField2,
) -> VectorField2 {
    let residual = warped.sub(reference);
    VectorField2 {
        x: residual.mul(&warped_grad.x),
        y: residual.mul(&warped_grad.y),
    }
}

pub fn linearize_force(template: &ScalarField, u: &VectorField2) -> Result<ForceLinearization> {
    let g = warped_gradient(template, u)?;
    Ok(linearization_from_gradient(&g))
}

pub(crate) fn linearization_from_gradient(g: &VectorField2) -> ForceLinearization {
    let s12 = g.x.mul(&g.y);
    ForceLinearization {
        sigma11: g.x.mul(&g.x),
        sigma12: s12.clone(),
        sigma21: s12,
        sigma22: g.y.mul(&g.y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(w: usize, cx: f64, cy: f64, s: f64) -> ScalarField {
        ScalarField::from_fn(w, w, 1.0, |x, y| {
            200.0 * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp()
        })
        .unwrap()
    }

    #[test]
    fn ssd_basic_values() {
        let t = ScalarField::constant(3, 3, 1.0).unwrap();
        let r = ScalarField::zeros(3, 3).unwrap();
        let u = VectorField2::zeros_like(&t);
        assert_eq!(ssd(&t, &r, &u).unwrap(), 4.5);
        assert_eq!(ssd(&t, &t, &u).unwrap(), 0.0);
        let a = blob(12, 5.0, 6.0, 2.0);
        let b = blob(12, 6.0, 6.0, 2.5);
        assert_eq!(
            ssd(&a, &b, &u_zero(&a)).unwrap(),
            ssd(&a.scale(-1.0), &b.scale(-1.0), &u_zero(&a)).unwrap()
        );
    }

    fn u_zero(f: &ScalarField) -> VectorField2 {
        VectorField2::zeros_like(f)
    }

    #[test]
    fn force_vanishes_on_agreement_or_flat_template() {
        let t = blob(10, 4.0, 5.0, 2.0);
        assert_eq!(force(&t, &t, &u_zero(&t)).unwrap().max_abs(), 0.0);
        let c = ScalarField::constant(10, 10, 9.0).unwrap();
        assert_eq!(force(&c, &t, &u_zero(&t)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn ssd_zero_at_integer_alignment() {
        // narrow enough that border clamping of the warp does not matter
        let t = blob(32, 15.0, 16.0, 2.5);
        let r = blob(32, 17.0, 16.0, 2.5);
        let u = VectorField2::constant_like(&t, -2.0, 0.0);
        let before = ssd(&t, &r, &u_zero(&t)).unwrap();
        let after = ssd(&t, &r, &u).unwrap();
        assert!(before > 1.0);
        assert!(after < 1e-6 * before);
    }

    #[test]
    fn linearization_is_rank_one_psd() {
        let t = blob(12, 5.0, 6.0, 2.0);
        let u = VectorField2::constant_like(&t, 0.3, -0.7);
        let s = linearize_force(&t, &u).unwrap();
        for k in 0..t.len() {
            let (a, b, c, d) = (
                s.sigma11.data()[k],
                s.sigma12.data()[k],
                s.sigma21.data()[k],
                s.sigma22.data()[k],
            );
            assert_eq!(b, c);
            assert!(a >= 0.0 && d >= 0.0);
            assert!(a * d - b * c >= -1e-12 * (1.0 + a * d));
        }
        let ramp = ScalarField::from_fn(8, 8, 1.0, |x, _| x).unwrap();
        let s = linearize_force(&ramp, &u_zero(&ramp)).unwrap();
        assert!((s.sigma11.get(3, 3) - 1.0).abs() < 1e-14);
        assert_eq!(s.sigma12.max_abs() + s.sigma22.max_abs(), 0.0);
        let c = ScalarField::constant(8, 8, 2.0).unwrap();
        let s = linearize_force(&c, &u_zero(&c)).unwrap();
        assert_eq!(
            s.sigma11.max_abs() + s.sigma12.max_abs() + s.sigma22.max_abs(),
            0.0
        );
    }
}
