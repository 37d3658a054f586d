//! Curvature of displacement-component surfaces `(x, y) ↦ (x, y, u(x, y))`,
//! the associated regularization energies, and two explicit diffusion flows.
//!
//! Gaussian curvature is stored with the level-set sign convention
//!
//! ```text
//! K(u) = (u_xx u_yy - u_xy²) / (1 + u_x² + u_y²)²
//! ```
//!
//! so a bowl has `K > 0` and a saddle `K < 0`. Every energy uses `|K|`, which
//! makes the sign convention irrelevant there.
//!
//! Mean curvature `ι(u) = ∇·(∇u / sqrt(1 + |∇u|²))` is evaluated in its
//! expanded non-divergence form
//!
//! ```text
//! ι(u) = ((1 + u_y²) u_xx - 2 u_x u_y u_xy + (1 + u_x²) u_yy) / (1 + |∇u|²)^(3/2)
//! ```
//!
//! which keeps the compact second-difference stencils (exact on quadratics).

use crate::error::{Error, Result};
use crate::field::{Operators, ScalarField, VectorField2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureKind {
    Gaussian,
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    pub value: ScalarField,
    pub kind: CurvatureKind,
}

/// Numerator and denominator pieces of the Gaussian curvature at each node.
struct GaussianParts {
    fx: ScalarField,
    fy: ScalarField,
    fxx: ScalarField,
    fyy: ScalarField,
    fxy: ScalarField,
    /// `fxx fyy - fxy²`
    numerator: Vec<f64>,
    /// `1 + fx² + fy²`
    metric: Vec<f64>,
}

impl GaussianParts {
    fn new(ops: &Operators, u: &ScalarField) -> Self {
        let g = ops.grad(u);
        let hs = ops.hessian(u);
        let numerator = (0..u.len())
            .map(|k| {
                let (a, b, c) = (hs.fxx.data()[k], hs.fyy.data()[k], hs.fxy.data()[k]);
                a * b - c * c
            })
            .collect();
        let metric =
            g.x.data()
                .iter()
                .zip(g.y.data())
                .map(|(px, py)| 1.0 + px * px + py * py)
                .collect();
        Self {
            fx: g.x,
            fy: g.y,
            fxx: hs.fxx,
            fyy: hs.fyy,
            fxy: hs.fxy,
            numerator,
            metric,
        }
    }

    fn curvature(&self, k: usize) -> f64 {
        let m = self.metric[k];
        self.numerator[k] / (m * m)
    }
}

pub fn gaussian_curvature(u: &ScalarField) -> CurvatureField {
    let ops = Operators::for_field(u);
    gaussian_curvature_with(&ops, u)
}

pub(crate) fn gaussian_curvature_with(ops: &Operators, u: &ScalarField) -> CurvatureField {
    let parts = GaussianParts::new(ops, u);
    CurvatureField {
        value: u.like((0..u.len()).map(|k| parts.curvature(k)).collect()),
        kind: CurvatureKind::Gaussian,
    }
}

pub fn mean_curvature(u: &ScalarField) -> CurvatureField {
    let ops = Operators::for_field(u);
    CurvatureField {
        value: mean_curvature_with(&ops, u),
        kind: CurvatureKind::Mean,
    }
}

pub(crate) fn mean_curvature_with(ops: &Operators, u: &ScalarField) -> ScalarField {
    let g = ops.grad(u);
    let hs = ops.hessian(u);
    let values = (0..u.len())
        .map(|k| {
            let (px, py) = (g.x.data()[k], g.y.data()[k]);
            let (a, b, c) = (hs.fxx.data()[k], hs.fyy.data()[k], hs.fxy.data()[k]);
            let m = 1.0 + px * px + py * py;
            ((1.0 + py * py) * a - 2.0 * px * py * c + (1.0 + px * px) * b) / (m * m.sqrt())
        })
        .collect();
    u.like(values)
}

/// `h² Σ (|K(u₁)| + |K(u₂)|)` over all nodes.
pub fn gc_energy(u: &VectorField2) -> f64 {
    let ops = Operators::for_field(&u.x);
    gc_energy_component(&ops, &u.x) + gc_energy_component(&ops, &u.y)
}

pub(crate) fn gc_energy_component(ops: &Operators, u: &ScalarField) -> f64 {
    let h = u.spacing();
    let k = gaussian_curvature_with(ops, u).value;
    h * h * k.data().iter().map(|v| v.abs()).sum::<f64>()
}

/// Exact gradient of the discrete single-component Gaussian-curvature
/// energy `h² Σ |K(u)|` with respect to the node values of `u`, divided by
/// `h²` (i.e. the `L²` gradient).
///
/// Writing `N = u_xx u_yy - u_xy²`, `W = 1 + |∇u|²`, `S = sign(N)` and
/// `w = S / W²`, the operator is
///
/// ```text
/// Dxxᵀ(w u_yy) + Dyyᵀ(w u_xx) - 2 Dxyᵀ(w u_xy)        (second-order terms)
///   - Dxᵀ(4|N| u_x / W³) - Dyᵀ(4|N| u_y / W³)          (anisotropic diffusion)
/// ```
///
/// where `-Dᵀ` is the discrete divergence. It is the discrete counterpart of
/// the curvature terms of the Euler–Lagrange system of the model.
pub fn gc_energy_gradient(u: &ScalarField) -> ScalarField {
    let ops = Operators::for_field(u);
    gc_energy_gradient_with(&ops, u)
}

pub(crate) fn gc_energy_gradient_with(ops: &Operators, u: &ScalarField) -> ScalarField {
    let p = GaussianParts::new(ops, u);
    let n = u.len();
    let mut a_xx = vec![0.0; n];
    let mut a_yy = vec![0.0; n];
    let mut a_xy = vec![0.0; n];
    let mut flux_x = vec![0.0; n];
    let mut flux_y = vec![0.0; n];
    for k in 0..n {
        let num = p.numerator[k];
        let s = sign(num);
        let m = p.metric[k];
        let w = s / (m * m);
        a_xx[k] = w * p.fyy.data()[k];
        a_yy[k] = w * p.fxx.data()[k];
        a_xy[k] = -2.0 * w * p.fxy.data()[k];
        let d = 4.0 * num.abs() / (m * m * m);
        flux_x[k] = -d * p.fx.data()[k];
        flux_y[k] = -d * p.fy.data()[k];
    }
    let t_xx = ops.dxx_t.apply_x(&u.like(a_xx));
    let t_yy = ops.dyy_t.apply_y(&u.like(a_yy));
    // Dxy = Dy ∘ Dx, so Dxyᵀ = Dxᵀ ∘ Dyᵀ
    let t_xy = ops.dx_t.apply_x(&ops.dy_t.apply_y(&u.like(a_xy)));
    let t_fx = ops.dx_t.apply_x(&u.like(flux_x));
    let t_fy = ops.dy_t.apply_y(&u.like(flux_y));
    let out = (0..n)
        .map(|k| t_xx.data()[k] + t_yy.data()[k] + t_xy.data()[k] + t_fx.data()[k] + t_fy.data()[k])
        .collect();
    u.like(out)
}

/// Nodes this far from the edge see a Laplacian untouched by the boundary
/// closure.
pub const LAPLACIAN_MARGIN: usize = 2;

/// `h² Σ ((Δu₁)² + (Δu₂)²)` over the nodes whose Laplacian stencil does not
/// reach the boundary closure, so affine fields lie in the kernel.
pub fn lc_energy(u: &VectorField2) -> f64 {
    let ops = Operators::for_field(&u.x);
    let h = u.spacing();
    let l1 = ops.laplacian(&u.x);
    let l2 = ops.laplacian(&u.y);
    h * h
        * (l1.mul(&l1).interior_sum(LAPLACIAN_MARGIN) + l2.mul(&l2).interior_sum(LAPLACIAN_MARGIN))
}

/// `h² Σ ½(ι(u₁)² + ι(u₂)²)` over all nodes.
pub fn mc_energy(u: &VectorField2) -> f64 {
    let ops = Operators::for_field(&u.x);
    let h = u.spacing();
    let m1 = mean_curvature_with(&ops, &u.x);
    let m2 = mean_curvature_with(&ops, &u.y);
    h * h * 0.5 * (m1.dot(&m1) + m2.dot(&m2))
}

/// One explicit Euler step of `∂u/∂t = ∇·(|K(u)| ∇u)`.
pub fn gc_flow_step(u: &ScalarField, dt: f64) -> Result<ScalarField> {
    check_dt(dt)?;
    let ops = Operators::for_field(u);
    let k = gaussian_curvature_with(&ops, u).value;
    let g = ops.grad(u);
    let flux = VectorField2 {
        x: g.x.zip_map(&k, |a, c| a * c.abs()),
        y: g.y.zip_map(&k, |a, c| a * c.abs()),
    };
    finish_step(u, &ops.div(&flux), dt)
}

/// One explicit Euler step of `∂u/∂t = ∇·(∇u / sqrt(|∇u|² + eps²))`.
pub fn tv_flow_step(u: &ScalarField, dt: f64, eps: f64) -> Result<ScalarField> {
    check_dt(dt)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("must be positive, got {eps}"),
        });
    }
    let ops = Operators::for_field(u);
    let g = ops.grad(u);
    let inv: Vec<f64> =
        g.x.data()
            .iter()
            .zip(g.y.data())
            .map(|(a, b)| 1.0 / (a * a + b * b + eps * eps).sqrt())
            .collect();
    let inv = u.like(inv);
    let flux = VectorField2 {
        x: g.x.mul(&inv),
        y: g.y.mul(&inv),
    };
    finish_step(u, &ops.div(&flux), dt)
}

/// The regularized total variation `h² Σ sqrt(|∇u|² + eps²)` that
/// [`tv_flow_step`] descends.
pub fn tv_energy(u: &ScalarField, eps: f64) -> f64 {
    let g = crate::field::grad(u);
    let h = u.spacing();
    h * h
        * g.x
            .data()
            .iter()
            .zip(g.y.data())
            .map(|(a, b)| (a * a + b * b + eps * eps).sqrt())
            .sum::<f64>()
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        })
    }
}

fn finish_step(u: &ScalarField, rate: &ScalarField, dt: f64) -> Result<ScalarField> {
    let next = u.zip_map(rate, |a, b| a + dt * b);
    match next.data().iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            what: "flow step",
            index,
        }),
        None => Ok(next),
    }
}

/// `sign` with `sign(0) = 0`.
#[inline]
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
