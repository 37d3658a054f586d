//! Augmented Lagrangian solver for Gaussian-curvature regularized
//! registration.
//!
//! The displacement gradients are split off as dual fields `q_l ≈ ∇u_l`:
//!
//! ```text
//! L(u, q, μ) = ½‖T(x+u) - R‖² + γ Σ_l S(q_l) + Σ_l ⟨μ_l, q_l - ∇u_l⟩ + (r/2) Σ_l ‖q_l - ∇u_l‖²
//! S(q)      = Σ_nodes |det ∇q| / (1 + |q|²)²
//! ```
//!
//! Each outer iteration performs
//!
//! 1. a closed-form alternating update of the two components of each `q_l`,
//! 2. weighted pointwise Gauss–Seidel sweeps on the Gauss–Newton linearized
//!    optimality system for `u`,
//! 3. multiplier ascent `μ_l += r (q_l - ∇u_l)`.
//!
//! All sums carry the cell area `h²`; the residual operators below are the
//! corresponding `L²` gradients (divided by `h²`).

use std::time::Instant;

use crate::curvature::sign;
use crate::error::{Error, Result};
use crate::field::{sample_warped, warped_gradient, Operators, ScalarField, VectorField2};
use crate::similarity::{force_from_parts, linearization_from_gradient, ssd_of_warped};

use super::{
    check_pair, ensure_finite, finish, identical_shortcut, normalized_pair, positive,
    RegistrationResult,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationConfig {
    pub gamma: f64,
    pub r: f64,
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest magnitude allowed for the closed-form dual denominator.
    pub denom_guard: f64,
    /// Gauss–Seidel sweeps per outer iteration.
    pub inner_sweeps: usize,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-4,
            r: 0.1,
            omega: 0.9725,
            tol: 1e-3,
            max_iter: 30,
            denom_guard: 1e-9,
            inner_sweeps: 3,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must be non-negative, got {}", self.gamma),
            });
        }
        positive("r", self.r)?;
        positive("tol", self.tol)?;
        positive("denom_guard", self.denom_guard)?;
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: format!("must lie in (0, 2), got {}", self.omega),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "must be at least 1".into(),
            });
        }
        if self.inner_sweeps == 0 {
            return Err(Error::InvalidParameter {
                name: "inner_sweeps",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Primal, dual and multiplier fields of the splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmState {
    pub u: VectorField2,
    pub q1: VectorField2,
    pub q2: VectorField2,
    pub mu1: VectorField2,
    pub mu2: VectorField2,
    pub iteration: usize,
}

impl AlmState {
    /// All fields zero, shaped like `like`.
    pub fn zeros(like: &ScalarField) -> Self {
        let z = VectorField2::zeros_like(like);
        Self {
            u: z.clone(),
            q1: z.clone(),
            q2: z.clone(),
            mu1: z.clone(),
            mu2: z,
            iteration: 0,
        }
    }

    pub fn q(&self, l: usize) -> &VectorField2 {
        if l == 0 {
            &self.q1
        } else {
            &self.q2
        }
    }

    pub fn mu(&self, l: usize) -> &VectorField2 {
        if l == 0 {
            &self.mu1
        } else {
            &self.mu2
        }
    }

    fn check(&self) -> Result<()> {
        let like = &self.u.x;
        for f in [&self.u, &self.q1, &self.q2, &self.mu1, &self.mu2] {
            f.check_shape(like)?;
            f.y.check_same_shape(like)?;
        }
        Ok(())
    }

    /// `(‖q₁ - ∇u₁‖² + ‖q₂ - ∇u₂‖²)^½`.
    pub fn constraint_violation(&self) -> f64 {
        let ops = Operators::for_field(&self.u.x);
        let a = self.q1.sub(&ops.grad(&self.u.x));
        let b = self.q2.sub(&ops.grad(&self.u.y));
        (a.dot(&a) + b.dot(&b)).sqrt()
    }
}

/// Result of the dual update.
#[derive(Debug, Clone, PartialEq)]
pub struct DualUpdate {
    pub q1: VectorField2,
    pub q2: VectorField2,
    /// Nodes at which the closed-form denominator had to be clamped.
    pub clamped: usize,
}

/// Per-node `D = det ∇q`, `S = sign D`, `W = 1 + |q|²`.
struct DualGeometry {
    det: Vec<f64>,
    metric: Vec<f64>,
    /// `S / W²`
    weight: Vec<f64>,
    qa_x: ScalarField,
    qa_y: ScalarField,
    qb_x: ScalarField,
    qb_y: ScalarField,
}

impl DualGeometry {
    fn new(ops: &Operators, q: &VectorField2) -> Self {
        let qa_x = ops.dx.apply_x(&q.x);
        let qa_y = ops.dy.apply_y(&q.x);
        let qb_x = ops.dx.apply_x(&q.y);
        let qb_y = ops.dy.apply_y(&q.y);
        let n = q.x.len();
        let mut det = Vec::with_capacity(n);
        let mut metric = Vec::with_capacity(n);
        let mut weight = Vec::with_capacity(n);
        for k in 0..n {
            let d = qa_x.data()[k] * qb_y.data()[k] - qa_y.data()[k] * qb_x.data()[k];
            let (a, b) = (q.x.data()[k], q.y.data()[k]);
            let m = 1.0 + a * a + b * b;
            det.push(d);
            metric.push(m);
            weight.push(sign(d) / (m * m));
        }
        Self {
            det,
            metric,
            weight,
            qa_x,
            qa_y,
            qb_x,
            qb_y,
        }
    }

    /// Variation of `Σ S D / W²` (W frozen) with respect to the first
    /// component: `Dxᵀ(w ∂y q_b) - Dyᵀ(w ∂x q_b)`.
    fn coupling_a(&self, ops: &Operators, like: &ScalarField) -> ScalarField {
        let p = weighted(like, &self.weight, &self.qb_y);
        let m = weighted(like, &self.weight, &self.qb_x);
        ops.dx_t.apply_x(&p).sub(&ops.dy_t.apply_y(&m))
    }

    /// Same for the second component: `Dyᵀ(w ∂x q_a) - Dxᵀ(w ∂y q_a)`.
    fn coupling_b(&self, ops: &Operators, like: &ScalarField) -> ScalarField {
        let p = weighted(like, &self.weight, &self.qa_x);
        let m = weighted(like, &self.weight, &self.qa_y);
        ops.dy_t.apply_y(&p).sub(&ops.dx_t.apply_x(&m))
    }
}

fn weighted(like: &ScalarField, w: &[f64], f: &ScalarField) -> ScalarField {
    like.like(w.iter().zip(f.data()).map(|(a, b)| a * b).collect())
}

/// Step 1: closed-form alternating update of the dual fields.
///
/// For each displacement component the first dual component is solved from
/// its stationarity equation with the partner and the curvature factors
/// lagged, then the second component using the fresh first one:
///
/// ```text
/// q_a = W³ (γ A_a(q_b) + μ_a - r ∂x u) / (-r W³ + 4γ S D)
/// q_b = W³ (γ A_b(q_a) + μ_b - r ∂y u) / (-r W³ + 4γ S D)
/// ```
pub fn q_update(state: &AlmState, gamma: f64, r: f64, denom_guard: f64) -> Result<DualUpdate> {
    state.check()?;
    positive("r", r)?;
    let ops = Operators::for_field(&state.u.x);
    Ok(q_update_with(&ops, state, gamma, r, denom_guard))
}

fn q_update_with(ops: &Operators, state: &AlmState, gamma: f64, r: f64, guard: f64) -> DualUpdate {
    let mut clamped = 0;
    let mut out = [state.q1.clone(), state.q2.clone()];
    for (l, q) in out.iter_mut().enumerate() {
        let u = state.u.component(l);
        let mu = state.mu(l);
        let gu = ops.grad(u);

        let geo = DualGeometry::new(ops, q);
        let a = geo.coupling_a(ops, u);
        q.x = solve_component(&geo, &a, &mu.x, &gu.x, gamma, r, guard, &mut clamped);

        let geo = DualGeometry::new(ops, q);
        let b = geo.coupling_b(ops, u);
        q.y = solve_component(&geo, &b, &mu.y, &gu.y, gamma, r, guard, &mut clamped);
    }
    let [q1, q2] = out;
    DualUpdate { q1, q2, clamped }
}

#[allow(clippy::too_many_arguments)]
fn solve_component(
    geo: &DualGeometry,
    coupling: &ScalarField,
    mu: &ScalarField,
    du: &ScalarField,
    gamma: f64,
    r: f64,
    guard: f64,
    clamped: &mut usize,
) -> ScalarField {
    let values = (0..mu.len())
        .map(|k| {
            let d = geo.det[k];
            let w = geo.metric[k];
            let w3 = w * w * w;
            let mut den = -r * w3 + 4.0 * gamma * sign(d) * d;
            if den.abs() < guard {
                *clamped += 1;
                den = if den < 0.0 { -guard } else { guard };
            }
            w3 * (gamma * coupling.data()[k] + mu.data()[k] - r * du.data()[k]) / den
        })
        .collect();
    mu.like(values)
}

/// `L²` gradient of the Step-1 objective with respect to `q` for one
/// displacement component:
///
/// ```text
/// γ A(q) - 4γ |D| q / W³ + μ + r (q - ∇u)
/// ```
pub fn step1_residual(
    u: &ScalarField,
    q: &VectorField2,
    mu: &VectorField2,
    gamma: f64,
    r: f64,
) -> VectorField2 {
    let ops = Operators::for_field(u);
    step1_residual_with(&ops, u, q, mu, gamma, r)
}

fn step1_residual_with(
    ops: &Operators,
    u: &ScalarField,
    q: &VectorField2,
    mu: &VectorField2,
    gamma: f64,
    r: f64,
) -> VectorField2 {
    let geo = DualGeometry::new(ops, q);
    let gu = ops.grad(u);
    let a = geo.coupling_a(ops, u);
    let b = geo.coupling_b(ops, u);
    let comp = |coupling: &ScalarField, qc: &ScalarField, m: &ScalarField, d: &ScalarField| {
        let values = (0..qc.len())
            .map(|k| {
                let w = geo.metric[k];
                let qk = qc.data()[k];
                gamma * coupling.data()[k] - 4.0 * gamma * geo.det[k].abs() * qk / (w * w * w)
                    + m.data()[k]
                    + r * (qk - d.data()[k])
            })
            .collect();
        qc.like(values)
    };
    VectorField2 {
        x: comp(&a, &q.x, &mu.x, &gu.x),
        y: comp(&b, &q.y, &mu.y, &gu.y),
    }
}

/// The Step-1 objective for one displacement component,
/// `h² Σ [γ |D|/W² + μ·q + (r/2)|q - ∇u|²]`.
pub fn step1_objective(
    u: &ScalarField,
    q: &VectorField2,
    mu: &VectorField2,
    gamma: f64,
    r: f64,
) -> f64 {
    let ops = Operators::for_field(u);
    let geo = DualGeometry::new(&ops, q);
    let gu = ops.grad(u);
    let h = u.spacing();
    let mut acc = 0.0;
    for k in 0..u.len() {
        let (qa, qb) = (q.x.data()[k], q.y.data()[k]);
        let w = geo.metric[k];
        let (ea, eb) = (qa - gu.x.data()[k], qb - gu.y.data()[k]);
        acc += gamma * geo.det[k].abs() / (w * w)
            + mu.x.data()[k] * qa
            + mu.y.data()[k] * qb
            + 0.5 * r * (ea * ea + eb * eb);
    }
    h * h * acc
}

/// Step 2: weighted pointwise Gauss–Seidel on
///
/// ```text
/// -r Δu_l + σ_l1 u₁ + σ_l2 u₂ = σ_l1 u₁ᵏ + σ_l2 u₂ᵏ - f_l(uᵏ) - G_l,
/// G_l = ∇·μ_l + r ∇·q_l
/// ```
///
/// where `-Δ = gradᵀ grad` carries the natural Neumann closure. At each node
/// the 2x2 block coupling `(u₁, u₂)` is inverted and the result relaxed
/// with `omega`.
pub fn u_update(
    template: &ScalarField,
    reference: &ScalarField,
    state: &AlmState,
    r: f64,
    omega: f64,
    sweeps: usize,
    denom_guard: f64,
) -> Result<VectorField2> {
    check_pair(template, reference)?;
    state.check()?;
    state.u.check_shape(template)?;
    positive("r", r)?;
    let ops = Operators::for_field(template);
    u_update_with(
        &ops,
        template,
        reference,
        state,
        r,
        omega,
        sweeps,
        denom_guard,
    )
}

#[allow(clippy::too_many_arguments)]
fn u_update_with(
    ops: &Operators,
    template: &ScalarField,
    reference: &ScalarField,
    state: &AlmState,
    r: f64,
    omega: f64,
    sweeps: usize,
    guard: f64,
) -> Result<VectorField2> {
    let warped = sample_warped(template, &state.u)?;
    let wg = warped_gradient(template, &state.u)?;
    let f = force_from_parts(&warped, reference, &wg);
    let sigma = linearization_from_gradient(&wg);
    let g1 = ops.div(&state.mu1.add(&state.q1.scale(r)));
    let g2 = ops.div(&state.mu2.add(&state.q2.scale(r)));

    let (u1, u2) = (state.u.x.data(), state.u.y.data());
    let (s11, s12, s21, s22) = (
        sigma.sigma11.data(),
        sigma.sigma12.data(),
        sigma.sigma21.data(),
        sigma.sigma22.data(),
    );
    let n = u1.len();
    let mut rhs1 = Vec::with_capacity(n);
    let mut rhs2 = Vec::with_capacity(n);
    for k in 0..n {
        rhs1.push(s11[k] * u1[k] + s12[k] * u2[k] - f.x.data()[k] - g1.data()[k]);
        rhs2.push(s21[k] * u1[k] + s22[k] * u2[k] - f.y.data()[k] - g2.data()[k]);
    }
    let blocks = NodalBlocks {
        s11,
        s12,
        s21,
        s22,
        rhs1: &rhs1,
        rhs2: &rhs2,
    };
    let mut v1 = u1.to_vec();
    let mut v2 = u2.to_vec();
    for _ in 0..sweeps {
        gauss_seidel_sweep(
            ops,
            template.width(),
            template.height(),
            r,
            omega,
            guard,
            &blocks,
            &mut v1,
            &mut v2,
        )?;
    }
    Ok(VectorField2 {
        x: template.like(v1),
        y: template.like(v2),
    })
}

struct NodalBlocks<'a> {
    s11: &'a [f64],
    s12: &'a [f64],
    s21: &'a [f64],
    s22: &'a [f64],
    rhs1: &'a [f64],
    rhs2: &'a [f64],
}

/// Off-diagonal part of `(-Δ v)` at node `(i, j)`.
#[inline]
fn neg_laplacian_offdiag(ops: &Operators, w: usize, i: usize, j: usize, v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &(k, c) in ops.mxx.row(i) {
        if k != i {
            acc += c * v[j * w + k];
        }
    }
    for &(k, c) in ops.myy.row(j) {
        if k != j {
            acc += c * v[k * w + i];
        }
    }
    acc
}

#[allow(clippy::too_many_arguments)]
fn gauss_seidel_sweep(
    ops: &Operators,
    w: usize,
    h: usize,
    r: f64,
    omega: f64,
    guard: f64,
    b: &NodalBlocks<'_>,
    v1: &mut [f64],
    v2: &mut [f64],
) -> Result<()> {
    for j in 0..h {
        for i in 0..w {
            let k = j * w + i;
            let diag = r * ops.neg_laplacian_diagonal(i, j);
            let a11 = diag + b.s11[k];
            let a12 = b.s12[k];
            let a21 = b.s21[k];
            let a22 = diag + b.s22[k];
            let det = a11 * a22 - a12 * a21;
            // also rejects NaN
            if det.abs().partial_cmp(&guard).is_none_or(|o| o.is_lt()) {
                return Err(Error::SingularBlock { i, j, det });
            }
            let c1 = b.rhs1[k] - r * neg_laplacian_offdiag(ops, w, i, j, v1);
            let c2 = b.rhs2[k] - r * neg_laplacian_offdiag(ops, w, i, j, v2);
            let x1 = (a22 * c1 - a12 * c2) / det;
            let x2 = (a11 * c2 - a21 * c1) / det;
            v1[k] = (1.0 - omega) * v1[k] + omega * x1;
            v2[k] = (1.0 - omega) * v2[k] + omega * x2;
        }
    }
    Ok(())
}

/// Step 3: `μ_l ← μ_l + r (q_l - ∇u_l)`.
pub fn multiplier_update(state: &AlmState, r: f64) -> Result<(VectorField2, VectorField2)> {
    state.check()?;
    let ops = Operators::for_field(&state.u.x);
    Ok(multiplier_update_with(&ops, state, r))
}

fn multiplier_update_with(
    ops: &Operators,
    state: &AlmState,
    r: f64,
) -> (VectorField2, VectorField2) {
    let step = |mu: &VectorField2, q: &VectorField2, u: &ScalarField| {
        let g = ops.grad(u);
        VectorField2 {
            x: mu.x.add(&q.x.sub(&g.x).scale(r)),
            y: mu.y.add(&q.y.sub(&g.y).scale(r)),
        }
    };
    (
        step(&state.mu1, &state.q1, &state.u.x),
        step(&state.mu2, &state.q2, &state.u.y),
    )
}

/// Relative `ℓ²` norm of the stacked optimality residuals: both Step-1
/// systems and the displacement equations
/// `-r Δu_l + f_l + ∇·μ_l + r ∇·q_l`, divided by one plus the norm of the
/// stacked data terms (`f_l`, `G_l`, `μ_l`, `r ∇u_l`).
pub fn el_residual(
    template: &ScalarField,
    reference: &ScalarField,
    state: &AlmState,
    gamma: f64,
    r: f64,
) -> Result<f64> {
    check_pair(template, reference)?;
    state.check()?;
    let ops = Operators::for_field(template);
    el_residual_with(&ops, template, reference, state, gamma, r)
}

fn el_residual_with(
    ops: &Operators,
    template: &ScalarField,
    reference: &ScalarField,
    state: &AlmState,
    gamma: f64,
    r: f64,
) -> Result<f64> {
    let warped = sample_warped(template, &state.u)?;
    let wg = warped_gradient(template, &state.u)?;
    let f = force_from_parts(&warped, reference, &wg);
    let mut res = 0.0;
    let mut data = 0.0;
    for l in 0..2 {
        let u = state.u.component(l);
        let q = state.q(l);
        let mu = state.mu(l);
        let s1 = step1_residual_with(ops, u, q, mu, gamma, r);
        res += s1.dot(&s1);

        let g = ops.div(&mu.add(&q.scale(r)));
        let fl = f.component(l);
        let lap = ops.laplacian(u);
        let eq = lap.scale(-r).add(fl).add(&g);
        res += eq.dot(&eq);

        let gu = ops.grad(u).scale(r);
        data += fl.dot(fl) + g.dot(&g) + mu.dot(mu) + gu.dot(&gu);
    }
    Ok(res.sqrt() / (1.0 + data.sqrt()))
}

/// Runs the full splitting from `u = q = μ = 0` until the relative residual
/// drops below `config.tol` or `config.max_iter` iterations have run.
pub fn register_gc(
    template: &ScalarField,
    reference: &ScalarField,
    config: &RegistrationConfig,
) -> Result<RegistrationResult> {
    let started = Instant::now();
    check_pair(template, reference)?;
    config.validate()?;
    if let Some(done) = identical_shortcut(template, reference, started)? {
        return Ok(done);
    }
    let original = (template, reference);
    let (t, r) = normalized_pair(template, reference);
    let (template, reference) = (&t, &r);
    let ops = Operators::for_field(template);
    let mut state = AlmState::zeros(template);
    let mut residuals = Vec::new();
    let mut ssds = Vec::new();
    let mut constraint = Vec::new();
    let mut clamped = 0;
    for k in 0..config.max_iter {
        let iteration = k + 1;
        let duals = q_update_with(&ops, &state, config.gamma, config.r, config.denom_guard);
        clamped += duals.clamped;
        state.q1 = duals.q1;
        state.q2 = duals.q2;
        ensure_finite(&state.q1, iteration, "q1")?;
        ensure_finite(&state.q2, iteration, "q2")?;

        state.u = u_update_with(
            &ops,
            template,
            reference,
            &state,
            config.r,
            config.omega,
            config.inner_sweeps,
            config.denom_guard,
        )?;
        ensure_finite(&state.u, iteration, "u")?;

        let (mu1, mu2) = multiplier_update_with(&ops, &state, config.r);
        state.mu1 = mu1;
        state.mu2 = mu2;
        ensure_finite(&state.mu1, iteration, "mu1")?;
        ensure_finite(&state.mu2, iteration, "mu2")?;
        state.iteration = iteration;

        let residual = el_residual_with(&ops, template, reference, &state, config.gamma, config.r)?;
        residuals.push(residual);
        ssds.push(ssd_of_warped(
            &sample_warped(template, &state.u)?,
            reference,
        ));
        constraint.push(state.constraint_violation());
        if residual < config.tol {
            break;
        }
    }
    let mut result = finish(original.0, original.1, state.u, residuals, ssds, started)?;
    result.constraint_history = constraint;
    result.clamped_nodes = clamped;
    Ok(result)
}
