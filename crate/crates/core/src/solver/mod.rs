//! Registration drivers: the augmented Lagrangian Gaussian-curvature solver
//! and the three comparison models.

pub mod baselines;
pub mod gc;

use std::time::Instant;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField2};
use crate::metrics::{quality, QualityReport, IDENTICAL_SSD};
use crate::similarity::ssd;

pub use baselines::{
    demon_step, register_demon, register_lc, register_mc, DemonConfig, TimeMarchConfig,
};
pub use gc::{register_gc, AlmState, RegistrationConfig};

/// Outcome of one registration run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub u: VectorField2,
    pub quality: QualityReport,
    pub iterations: usize,
    /// One entry per outer iteration; its meaning is solver specific (the
    /// relative Euler–Lagrange residual for the GC solver, the relative
    /// update size for the marching schemes, the relative SSD change for
    /// the demon method).
    pub residual_history: Vec<f64>,
    /// SSD after each outer iteration, in the solver's normalized intensity
    /// units (see [`normalized_pair`]).
    pub ssd_history: Vec<f64>,
    /// `‖q - ∇u‖` after each outer iteration (GC solver only; empty
    /// otherwise).
    pub constraint_history: Vec<f64>,
    /// Nodes at which the dual denominator was clamped, summed over all
    /// iterations (GC solver only).
    pub clamped_nodes: usize,
    pub wall_time_s: f64,
    /// True when the input images already agreed and no iteration ran.
    pub identical_inputs: bool,
}

impl RegistrationResult {
    pub fn epsilon(&self) -> f64 {
        self.quality.epsilon
    }

    pub fn min_jac(&self) -> f64 {
        self.quality.min_jac
    }
}

pub(crate) fn check_pair(template: &ScalarField, reference: &ScalarField) -> Result<()> {
    template.check_same_shape(reference)
}

pub(crate) fn ensure_finite(
    field: &VectorField2,
    iteration: usize,
    what: &'static str,
) -> Result<()> {
    if field.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { iteration, what })
    }
}

pub(crate) fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive, got {v}"),
        })
    }
}

/// Rescales both images by the reciprocal of their joint intensity range so
/// the solvers always see data in a unit range; regularization weights then
/// mean the same thing whatever the input bit depth. Offsets are left alone
/// since every model only sees differences and gradients.
pub fn normalized_pair(
    template: &ScalarField,
    reference: &ScalarField,
) -> (ScalarField, ScalarField) {
    let lo = template.min().min(reference.min());
    let hi = template.max().max(reference.max());
    let range = hi - lo;
    if range > 0.0 {
        (template.scale(1.0 / range), reference.scale(1.0 / range))
    } else {
        (template.clone(), reference.clone())
    }
}

/// Returns the trivial result when `template` and `reference` already agree.
pub(crate) fn identical_shortcut(
    template: &ScalarField,
    reference: &ScalarField,
    started: Instant,
) -> Result<Option<RegistrationResult>> {
    let zero = VectorField2::zeros_like(template);
    if ssd(template, reference, &zero)? >= IDENTICAL_SSD {
        return Ok(None);
    }
    let quality = quality(template, reference, &zero)?;
    Ok(Some(RegistrationResult {
        u: zero,
        quality,
        iterations: 0,
        residual_history: Vec::new(),
        ssd_history: Vec::new(),
        constraint_history: Vec::new(),
        clamped_nodes: 0,
        wall_time_s: started.elapsed().as_secs_f64(),
        identical_inputs: true,
    }))
}

pub(crate) fn finish(
    template: &ScalarField,
    reference: &ScalarField,
    u: VectorField2,
    residual_history: Vec<f64>,
    ssd_history: Vec<f64>,
    started: Instant,
) -> Result<RegistrationResult> {
    let quality = quality(template, reference, &u)?;
    Ok(RegistrationResult {
        u,
        quality,
        iterations: residual_history.len(),
        residual_history,
        ssd_history,
        constraint_history: Vec::new(),
        clamped_nodes: 0,
        wall_time_s: started.elapsed().as_secs_f64(),
        identical_inputs: false,
    })
}
