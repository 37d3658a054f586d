//! Finite-difference gradient checks for the analytic optimality operators.
//!
//! Every check perturbs one node at a time and compares the central
//! difference of a discrete energy with the operator the solvers actually
//! use. Errors are reported relative to the largest numeric gradient
//! magnitude over the checked nodes, so nodes where the gradient is tiny do
//! not dominate the report.

use crate::curvature::{gc_energy_component, gc_energy_gradient_with};
use crate::error::{Error, Result};
use crate::field::{Operators, ScalarField, VectorField2};
use crate::solver::gc::{step1_objective, step1_residual};

/// Largest grid edge accepted by the brute-force checks.
pub const MAX_ORACLE_EXTENT: usize = 32;

pub const STEP1_DEFAULT_STEP: f64 = 1e-6;
pub const ENERGY_DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    pub nodes_checked: usize,
    /// Nodes left out because the energy is not smooth near them.
    pub nodes_skipped: usize,
    pub step: f64,
}

/// Central-difference gradient `(E(u + s eₙ) - E(u - s eₙ)) / 2s` at every node.
pub fn numeric_gradient(
    energy: impl Fn(&ScalarField) -> f64,
    u: &ScalarField,
    step: f64,
) -> Result<ScalarField> {
    if u.width() > MAX_ORACLE_EXTENT || u.height() > MAX_ORACLE_EXTENT {
        return Err(Error::InvalidParameter {
            name: "u",
            reason: format!(
                "oracle grids are limited to {MAX_ORACLE_EXTENT}x{MAX_ORACLE_EXTENT}, got {}x{}",
                u.width(),
                u.height()
            ),
        });
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "step",
            reason: format!("must be positive, got {step}"),
        });
    }
    let mut probe = u.clone();
    let mut out = Vec::with_capacity(u.len());
    for k in 0..u.len() {
        let base = probe.data()[k];
        probe.data_mut()[k] = base + step;
        let plus = energy(&probe);
        probe.data_mut()[k] = base - step;
        let minus = energy(&probe);
        probe.data_mut()[k] = base;
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(u.like(out))
}

/// Accumulates per-node comparisons into a report.
struct Comparison {
    diffs: Vec<f64>,
    scale: f64,
    skipped: usize,
}

impl Comparison {
    fn new() -> Self {
        Self {
            diffs: Vec::new(),
            scale: 0.0,
            skipped: 0,
        }
    }

    fn add(&mut self, analytic: &ScalarField, numeric: &ScalarField, keep: &[bool]) {
        for ((a, n), &kept) in analytic.data().iter().zip(numeric.data()).zip(keep) {
            if kept {
                self.diffs.push((a - n).abs());
                self.scale = self.scale.max(n.abs());
            } else {
                self.skipped += 1;
            }
        }
    }

    fn report(self, step: f64) -> GradCheckReport {
        let scale = if self.scale > 0.0 { self.scale } else { 1.0 };
        let n = self.diffs.len();
        let max = self.diffs.iter().fold(0.0_f64, |m, d| m.max(*d)) / scale;
        let mean = if n == 0 {
            0.0
        } else {
            self.diffs.iter().sum::<f64>() / (n as f64 * scale)
        };
        GradCheckReport {
            max_rel_err: max,
            mean_rel_err: mean,
            nodes_checked: n,
            nodes_skipped: self.skipped,
            step,
        }
    }
}

/// Marks nodes whose `radius` neighbourhood keeps `|values|` above `threshold`.
fn smooth_mask(values: &ScalarField, radius: usize, threshold: f64) -> Vec<bool> {
    let (w, h) = (values.width(), values.height());
    let mut keep = vec![true; w * h];
    for j in 0..h {
        for i in 0..w {
            let (j0, j1) = (j.saturating_sub(radius), (j + radius).min(h - 1));
            let (i0, i1) = (i.saturating_sub(radius), (i + radius).min(w - 1));
            'scan: for jj in j0..=j1 {
                for ii in i0..=i1 {
                    if values.get(ii, jj).abs() < threshold {
                        keep[j * w + i] = false;
                        break 'scan;
                    }
                }
            }
        }
    }
    keep
}

fn dual_determinant(ops: &Operators, q: &VectorField2) -> ScalarField {
    let ax = ops.dx.apply_x(&q.x);
    let ay = ops.dy.apply_y(&q.x);
    let bx = ops.dx.apply_x(&q.y);
    let by = ops.dy.apply_y(&q.y);
    ax.mul(&by).sub(&ay.mul(&bx))
}

/// Compares the Step-1 stationarity operator with the numeric gradient of the
/// Step-1 objective for one displacement component `u` and its dual `q`.
pub fn verify_step1_el(
    u: &ScalarField,
    q: &VectorField2,
    mu: &VectorField2,
    gamma: f64,
    r: f64,
    step: f64,
) -> Result<GradCheckReport> {
    q.check_shape(u)?;
    mu.check_shape(u)?;
    let ops = Operators::for_field(u);
    let h2 = u.spacing() * u.spacing();
    let analytic = step1_residual(u, q, mu, gamma, r);
    let keep = if gamma == 0.0 {
        vec![true; u.len()]
    } else {
        smooth_mask(&dual_determinant(&ops, q), 1, 10.0 * step)
    };

    let num_a = numeric_gradient(
        |qa| {
            let trial = VectorField2 {
                x: qa.clone(),
                y: q.y.clone(),
            };
            step1_objective(u, &trial, mu, gamma, r)
        },
        &q.x,
        step,
    )?
    .scale(1.0 / h2);
    let num_b = numeric_gradient(
        |qb| {
            let trial = VectorField2 {
                x: q.x.clone(),
                y: qb.clone(),
            };
            step1_objective(u, &trial, mu, gamma, r)
        },
        &q.y,
        step,
    )?
    .scale(1.0 / h2);

    let mut cmp = Comparison::new();
    cmp.add(&analytic.x, &num_a, &keep);
    cmp.add(&analytic.y, &num_b, &keep);
    Ok(cmp.report(step))
}

/// Compares the analytic Gaussian-curvature regularizer operator (scaled by
/// `gamma`) with the numeric gradient of `γ · gc_energy`, for both
/// displacement components.
pub fn verify_el17(u: &VectorField2, gamma: f64, step: f64) -> Result<GradCheckReport> {
    let ops = Operators::for_field(&u.x);
    let h2 = u.spacing() * u.spacing();
    let mut cmp = Comparison::new();
    for l in 0..2 {
        let ul = u.component(l);
        let analytic = gc_energy_gradient_with(&ops, ul).scale(gamma);
        let numeric =
            numeric_gradient(|v| gamma * gc_energy_component(&ops, v), ul, step)?.scale(1.0 / h2);
        let hs = ops.hessian(ul);
        let num = hs.fxx.mul(&hs.fyy).sub(&hs.fxy.mul(&hs.fxy));
        let keep = smooth_mask(&num, 2, 10.0 * step);
        cmp.add(&analytic, &numeric, &keep);
    }
    Ok(cmp.report(step))
}

/// The analytic operator alone, `γ ∂(h⁻² gc_energy)/∂u_l`, for inspection.
pub fn el17_operator(u: &VectorField2, gamma: f64) -> VectorField2 {
    let ops = Operators::for_field(&u.x);
    VectorField2 {
        x: gc_energy_gradient_with(&ops, &u.x).scale(gamma),
        y: gc_energy_gradient_with(&ops, &u.y).scale(gamma),
    }
}
