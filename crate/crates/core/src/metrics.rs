//! Registration quality: relative SSD reduction and Jacobian folding.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{grad, ScalarField, VectorField2};
use crate::similarity::ssd;

/// SSD values at or below this are treated as "images already identical".
pub const IDENTICAL_SSD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub epsilon: f64,
    pub min_jac: f64,
    pub negative_jac_count: usize,
    pub ssd_before: f64,
    pub ssd_after: f64,
}

/// `det ∇(x + u) = (1 + ∂x u₁)(1 + ∂y u₂) - ∂y u₁ ∂x u₂` at every node.
pub fn jacobian_det_field(u: &VectorField2) -> ScalarField {
    let g1 = grad(&u.x);
    let g2 = grad(&u.y);
    let values = (0..u.x.len())
        .map(|k| {
            let (a, b) = (g1.x.data()[k], g1.y.data()[k]);
            let (c, d) = (g2.x.data()[k], g2.y.data()[k]);
            (1.0 + a) * (1.0 + d) - b * c
        })
        .collect();
    u.x.like(values)
}

pub fn quality(
    template: &ScalarField,
    reference: &ScalarField,
    u: &VectorField2,
) -> Result<QualityReport> {
    let zero = VectorField2::zeros_like(template);
    let ssd_before = ssd(template, reference, &zero)?;
    let ssd_after = ssd(template, reference, u)?;
    let jac = jacobian_det_field(u);
    Ok(QualityReport {
        epsilon: relative_reduction(ssd_before, ssd_after),
        min_jac: jac.min(),
        negative_jac_count: jac.data().iter().filter(|&&d| d <= 0.0).count(),
        ssd_before,
        ssd_after,
    })
}

/// `after / before`, defined as 0 when the images already agree.
pub fn relative_reduction(before: f64, after: f64) -> f64 {
    if before <= IDENTICAL_SSD {
        0.0
    } else {
        after / before
    }
}
