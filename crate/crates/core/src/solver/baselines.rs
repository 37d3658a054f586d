//! Comparison models: linear curvature, mean curvature and demons.

use std::time::Instant;

use crate::curvature::mean_curvature_with;
use crate::error::{Error, Result};
use crate::field::{grad, sample_warped, warped_gradient, Operators, ScalarField, VectorField2};
use crate::similarity::{force_from_parts, ssd_of_warped};

use super::{
    check_pair, ensure_finite, finish, identical_shortcut, normalized_pair, positive,
    RegistrationResult,
};

/// Parameters for the time-marching solvers of the linear and mean
/// curvature models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeMarchConfig {
    pub gamma: f64,
    pub dt: f64,
    pub max_iter: usize,
    /// Stop once `‖u^{k+1} - u^k‖∞ < tol`.
    pub tol: f64,
    /// Damped Jacobi sweeps for the implicit biharmonic solve (LC only).
    pub inner_sweeps: usize,
}

impl TimeMarchConfig {
    // Both tuned on the 64x64 Gaussian-shift fixture (examples/tune.rs).
    pub fn lc_default() -> Self {
        Self {
            gamma: 0.01,
            dt: 10.0,
            max_iter: 500,
            tol: 1e-4,
            inner_sweeps: 2,
        }
    }

    pub fn mc_default() -> Self {
        Self {
            gamma: 0.01,
            dt: 10.0,
            max_iter: 500,
            tol: 1e-4,
            inner_sweeps: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("gamma", self.gamma)?;
        positive("dt", self.dt)?;
        positive("tol", self.tol)?;
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemonConfig {
    /// `σᵢ² / σₓ²`, the regularizing term in the update denominator.
    pub noise_ratio: f64,
    /// Standard deviation (pixels) of the Gaussian applied to each update.
    pub smooth_sigma: f64,
    pub diffeomorphic: bool,
    /// Number of squarings in the scaling-and-squaring exponential.
    pub squaring_steps: usize,
    pub max_iter: usize,
    /// Stop once the relative SSD change drops below this.
    pub tol: f64,
}

impl Default for DemonConfig {
    fn default() -> Self {
        Self {
            noise_ratio: 0.01,
            smooth_sigma: 1.5,
            diffeomorphic: true,
            squaring_steps: 6,
            max_iter: 100,
            tol: 1e-5,
        }
    }
}

impl DemonConfig {
    pub fn validate(&self) -> Result<()> {
        positive("noise_ratio", self.noise_ratio)?;
        positive("smooth_sigma", self.smooth_sigma)?;
        positive("tol", self.tol)?;
        if self.diffeomorphic && self.squaring_steps < 4 {
            return Err(Error::InvalidParameter {
                name: "squaring_steps",
                reason: format!(
                    "need at least 4 in diffeomorphic mode, got {}",
                    self.squaring_steps
                ),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// `Δ²u` with both Laplacians under the natural boundary closure.
pub fn biharmonic(u: &ScalarField) -> ScalarField {
    let ops = Operators::for_field(u);
    ops.laplacian(&ops.laplacian(u))
}

/// Diagonal of `(-Δ)²` at every node.
fn biharmonic_diagonal(ops: &Operators, w: usize, h: usize) -> Vec<f64> {
    let mxx2 = ops.mxx.compose(&ops.mxx);
    let myy2 = ops.myy.compose(&ops.myy);
    let mut d = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            d.push(
                mxx2.diagonal(i)
                    + 2.0 * ops.mxx.diagonal(i) * ops.myy.diagonal(j)
                    + myy2.diagonal(j),
            );
        }
    }
    d
}

/// Semi-implicit marching for `γ Δ²u + f(u) = 0`:
/// `(I + dt γ Δ²) u^{k+1} = u^k - dt f(u^k)`, the linear solve done by a few
/// damped Jacobi sweeps warm-started from `u^k`.
pub fn register_lc(
    template: &ScalarField,
    reference: &ScalarField,
    cfg: &TimeMarchConfig,
) -> Result<RegistrationResult> {
    let started = Instant::now();
    check_pair(template, reference)?;
    cfg.validate()?;
    if let Some(done) = identical_shortcut(template, reference, started)? {
        return Ok(done);
    }
    let original = (template, reference);
    let (t, r) = normalized_pair(template, reference);
    let (template, reference) = (&t, &r);
    let ops = Operators::for_field(template);
    let diag: Vec<f64> = biharmonic_diagonal(&ops, template.width(), template.height())
        .into_iter()
        .map(|d| 1.0 + cfg.dt * cfg.gamma * d)
        .collect();
    let sweeps = cfg.inner_sweeps.max(1);
    const JACOBI_DAMPING: f64 = 0.8;

    let mut u = VectorField2::zeros_like(template);
    let mut updates = Vec::new();
    let mut ssds = Vec::new();
    for k in 0..cfg.max_iter {
        let f = data_force(template, reference, &u)?;
        let mut next = u.clone();
        for l in 0..2 {
            let rhs = u.component(l).sub(&f.component(l).scale(cfg.dt));
            let x = next.component_mut(l);
            for _ in 0..sweeps {
                let ax = x.add(&ops.laplacian(&ops.laplacian(x)).scale(cfg.dt * cfg.gamma));
                let corr: Vec<f64> = (0..x.len())
                    .map(|n| JACOBI_DAMPING * (rhs.data()[n] - ax.data()[n]) / diag[n])
                    .collect();
                for (v, c) in x.data_mut().iter_mut().zip(corr) {
                    *v += c;
                }
            }
        }
        ensure_finite(&next, k + 1, "u")?;
        let change = next.sub(&u).max_abs();
        u = next;
        updates.push(change);
        ssds.push(ssd_of_warped(&sample_warped(template, &u)?, reference));
        if change < cfg.tol {
            break;
        }
    }
    finish(original.0, original.1, u, updates, ssds, started)
}

/// The mean-curvature regularizer gradient
/// `∇·( ∇ι / W - (∇u·∇ι) ∇u / W³ )`, `W = sqrt(1 + |∇u|²)`, for one component.
pub fn mc_regularizer(u: &ScalarField) -> ScalarField {
    let ops = Operators::for_field(u);
    mc_regularizer_with(&ops, u)
}

fn mc_regularizer_with(ops: &Operators, u: &ScalarField) -> ScalarField {
    let iota = mean_curvature_with(ops, u);
    let gi = ops.grad(&iota);
    let gu = ops.grad(u);
    let n = u.len();
    let mut fx = Vec::with_capacity(n);
    let mut fy = Vec::with_capacity(n);
    for k in 0..n {
        let (ux, uy) = (gu.x.data()[k], gu.y.data()[k]);
        let (ix, iy) = (gi.x.data()[k], gi.y.data()[k]);
        let w2 = 1.0 + ux * ux + uy * uy;
        let w = w2.sqrt();
        let proj = (ux * ix + uy * iy) / (w2 * w);
        fx.push(ix / w - proj * ux);
        fy.push(iy / w - proj * uy);
    }
    ops.div(&VectorField2 {
        x: u.like(fx),
        y: u.like(fy),
    })
}

/// Residual of the mean-curvature Euler–Lagrange system,
/// `γ ∇·(…) + f(u)`, per component.
pub fn mc_residual(
    template: &ScalarField,
    reference: &ScalarField,
    u: &VectorField2,
    gamma: f64,
) -> Result<VectorField2> {
    let ops = Operators::for_field(template);
    let f = data_force(template, reference, u)?;
    Ok(VectorField2 {
        x: mc_regularizer_with(&ops, &u.x).scale(gamma).add(&f.x),
        y: mc_regularizer_with(&ops, &u.y).scale(gamma).add(&f.y),
    })
}

/// Explicit gradient-descent marching `u ← u - dt (γ ∇·(…) + f(u))`.
pub fn register_mc(
    template: &ScalarField,
    reference: &ScalarField,
    cfg: &TimeMarchConfig,
) -> Result<RegistrationResult> {
    let started = Instant::now();
    check_pair(template, reference)?;
    cfg.validate()?;
    if let Some(done) = identical_shortcut(template, reference, started)? {
        return Ok(done);
    }
    let original = (template, reference);
    let (t, r) = normalized_pair(template, reference);
    let (template, reference) = (&t, &r);
    let mut u = VectorField2::zeros_like(template);
    let mut updates = Vec::new();
    let mut ssds = Vec::new();
    for k in 0..cfg.max_iter {
        let res = mc_residual(template, reference, &u, cfg.gamma)?;
        let step = res.scale(cfg.dt);
        u = u.sub(&step);
        ensure_finite(&u, k + 1, "u")?;
        let change = step.max_abs();
        updates.push(change);
        ssds.push(ssd_of_warped(&sample_warped(template, &u)?, reference));
        if change < cfg.tol {
            break;
        }
    }
    finish(original.0, original.1, u, updates, ssds, started)
}

fn data_force(
    template: &ScalarField,
    reference: &ScalarField,
    u: &VectorField2,
) -> Result<VectorField2> {
    let warped = sample_warped(template, u)?;
    let g = warped_gradient(template, u)?;
    Ok(force_from_parts(&warped, reference, &g))
}

/// The raw (unsmoothed) demon force
/// `-(R - T(x+ũ)) J / (‖J‖² + σᵢ²/σₓ²)`, `J = -(∇R + ∇T(x+ũ)) / 2`.
pub fn demon_force(
    template: &ScalarField,
    reference: &ScalarField,
    u_tilde: &VectorField2,
    noise_ratio: f64,
) -> Result<VectorField2> {
    check_pair(template, reference)?;
    u_tilde.check_shape(template)?;
    let warped = sample_warped(template, u_tilde)?;
    let gt = warped_gradient(template, u_tilde)?;
    let gr = grad(reference);
    let n = template.len();
    let mut vx = Vec::with_capacity(n);
    let mut vy = Vec::with_capacity(n);
    for k in 0..n {
        let jx = -0.5 * (gr.x.data()[k] + gt.x.data()[k]);
        let jy = -0.5 * (gr.y.data()[k] + gt.y.data()[k]);
        let diff = reference.data()[k] - warped.data()[k];
        let scale = -diff / (jx * jx + jy * jy + noise_ratio);
        vx.push(scale * jx);
        vy.push(scale * jy);
    }
    Ok(VectorField2 {
        x: template.like(vx),
        y: template.like(vy),
    })
}

/// One additive demon iteration: `ũ + G_σ * update(ũ)`.
pub fn demon_step(
    template: &ScalarField,
    reference: &ScalarField,
    u_tilde: &VectorField2,
    cfg: &DemonConfig,
) -> Result<VectorField2> {
    cfg.validate()?;
    let upd = demon_force(template, reference, u_tilde, cfg.noise_ratio)?;
    Ok(u_tilde.add(&gaussian_smooth_vector(&upd, cfg.smooth_sigma)))
}

/// `exp(v)` of a stationary velocity field by scaling and squaring:
/// `e = v / 2ⁿ`, then `n` times `e ← e + e∘(id + e)`.
pub fn exp_field(v: &VectorField2, squaring_steps: usize) -> Result<VectorField2> {
    let mut e = v.scale(1.0 / (1u64 << squaring_steps) as f64);
    for _ in 0..squaring_steps {
        e = compose(&e, &e)?;
    }
    Ok(e)
}

/// Displacement of `(id + a) ∘ (id + b)`: `b + a∘(id + b)`.
pub fn compose(a: &VectorField2, b: &VectorField2) -> Result<VectorField2> {
    Ok(VectorField2 {
        x: b.x.add(&sample_warped(&a.x, b)?),
        y: b.y.add(&sample_warped(&a.y, b)?),
    })
}

/// Iterates the demon update. In diffeomorphic mode each smoothed update is
/// treated as a velocity, exponentiated, and composed with the current
/// transform `φ ← φ ∘ exp(v)`; otherwise updates are added.
pub fn register_demon(
    template: &ScalarField,
    reference: &ScalarField,
    cfg: &DemonConfig,
) -> Result<RegistrationResult> {
    let started = Instant::now();
    check_pair(template, reference)?;
    cfg.validate()?;
    if let Some(done) = identical_shortcut(template, reference, started)? {
        return Ok(done);
    }
    let original = (template, reference);
    let (t, r) = normalized_pair(template, reference);
    let (template, reference) = (&t, &r);
    let mut u = VectorField2::zeros_like(template);
    let mut prev = ssd_of_warped(template, reference);
    let mut changes = Vec::new();
    let mut ssds = Vec::new();
    for k in 0..cfg.max_iter {
        let upd = gaussian_smooth_vector(
            &demon_force(template, reference, &u, cfg.noise_ratio)?,
            cfg.smooth_sigma,
        );
        u = if cfg.diffeomorphic {
            compose(&u, &exp_field(&upd, cfg.squaring_steps)?)?
        } else {
            u.add(&upd)
        };
        ensure_finite(&u, k + 1, "u")?;
        let cur = ssd_of_warped(&sample_warped(template, &u)?, reference);
        let change = (prev - cur).abs() / prev.max(f64::MIN_POSITIVE);
        changes.push(change);
        ssds.push(cur);
        prev = cur;
        if change < cfg.tol {
            break;
        }
    }
    finish(original.0, original.1, u, changes, ssds, started)
}

/// Separable Gaussian filter with replicated borders, truncated at 3σ.
pub fn gaussian_smooth(f: &ScalarField, sigma: f64) -> ScalarField {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|t| (-((t * t) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|c| *c /= norm);
    let (w, h) = (f.width() as isize, f.height() as isize);
    let src = f.data();
    let mut tmp = vec![0.0; src.len()];
    for j in 0..h {
        for i in 0..w {
            let mut acc = 0.0;
            for (t, c) in (-radius..=radius).zip(&kernel) {
                let ii = (i + t).clamp(0, w - 1);
                acc += c * src[(j * w + ii) as usize];
            }
            tmp[(j * w + i) as usize] = acc;
        }
    }
    let mut out = vec![0.0; src.len()];
    for j in 0..h {
        for i in 0..w {
            let mut acc = 0.0;
            for (t, c) in (-radius..=radius).zip(&kernel) {
                let jj = (j + t).clamp(0, h - 1);
                acc += c * tmp[(jj * w + i) as usize];
            }
            out[(j * w + i) as usize] = acc;
        }
    }
    f.like(out)
}

fn gaussian_smooth_vector(v: &VectorField2, sigma: f64) -> VectorField2 {
    VectorField2 {
        x: gaussian_smooth(&v.x, sigma),
        y: gaussian_smooth(&v.y, sigma),
    }
}
