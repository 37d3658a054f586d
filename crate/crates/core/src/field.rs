//! Grid functions on a uniform vertex grid and the finite-difference
//! operators shared by every model.
//!
//! Fields are stored row-major: node `(i, j)` (column `i`, row `j`) lives at
//! `data[j * width + i]`, with physical coordinates `(i h, j h)`.
//!
//! Difference operators are assembled from one-dimensional banded stencils
//! ([`Stencil1d`]) applied along an axis. First derivatives are central in
//! the interior and one-sided on the first/last node, so they are exact on
//! linear data everywhere. The divergence is the negative adjoint of the
//! gradient, which gives the natural (zero-flux) boundary condition for the
//! variational problems, and the Laplacian is defined as `div ∘ grad`.

use crate::error::{Error, Result};

/// Smallest admissible extent along either axis.
pub const MIN_EXTENT: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    spacing: f64,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::from_vec(width, height, vec![0.0; width * height])
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_vec(width, height, vec![value; width * height])
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width < MIN_EXTENT || height < MIN_EXTENT {
            return Err(Error::GridTooSmall { width, height });
        }
        if data.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "field data",
                index,
            });
        }
        Ok(Self {
            width,
            height,
            spacing: 1.0,
            data,
        })
    }

    /// Samples `f(x, y)` at the physical node coordinates `(i h, j h)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        spacing: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                data.push(f(i as f64 * spacing, j as f64 * spacing));
            }
        }
        Self::from_vec(width, height, data)?.with_spacing(spacing)
    }

    pub fn with_spacing(mut self, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidParameter {
                name: "spacing",
                reason: format!("must be positive and finite, got {spacing}"),
            });
        }
        self.spacing = spacing;
        Ok(self)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.width + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let w = self.width;
        self.data[j * w + i] = value;
    }

    pub fn same_shape(&self, other: &ScalarField) -> bool {
        self.width == other.width && self.height == other.height && self.spacing == other.spacing
    }

    pub fn check_same_shape(&self, other: &ScalarField) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left: (self.width, self.height),
                right: (other.width, other.height),
            })
        }
    }

    /// A zero field with the same dimensions and spacing.
    pub fn zeros_like(&self) -> ScalarField {
        ScalarField {
            width: self.width,
            height: self.height,
            spacing: self.spacing,
            data: vec![0.0; self.data.len()],
        }
    }

    /// Builds a field of the same shape from raw node values.
    pub(crate) fn like(&self, data: Vec<f64>) -> ScalarField {
        debug_assert_eq!(data.len(), self.data.len());
        ScalarField {
            width: self.width,
            height: self.height,
            spacing: self.spacing,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        self.like(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        debug_assert!(self.same_shape(other));
        self.like(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, factor: f64) -> ScalarField {
        self.map(|v| v * factor)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a * b)
    }

    /// Unweighted node sum `Σ a·b`.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sum over nodes at least `margin` nodes away from every edge.
    pub fn interior_sum(&self, margin: usize) -> f64 {
        let mut acc = 0.0;
        for j in margin..self.height.saturating_sub(margin) {
            for i in margin..self.width.saturating_sub(margin) {
                acc += self.get(i, j);
            }
        }
        acc
    }

    /// Bilinear interpolation at fractional node coordinates, clamped to
    /// the grid.
    #[inline]
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let xmax = (self.width - 1) as f64;
        let ymax = (self.height - 1) as f64;
        let x = x.clamp(0.0, xmax);
        let y = y.clamp(0.0, ymax);
        let x0 = x.floor();
        let y0 = y.floor();
        let tx = x - x0;
        let ty = y - y0;
        let i0 = x0 as usize;
        let j0 = y0 as usize;
        let i1 = (i0 + 1).min(self.width - 1);
        let j1 = (j0 + 1).min(self.height - 1);
        let top = self.get(i0, j0) * (1.0 - tx) + self.get(i1, j0) * tx;
        let bottom = self.get(i0, j1) * (1.0 - tx) + self.get(i1, j1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// A pair of scalar fields on the same grid: displacements, duals,
/// multipliers and forces.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField2 {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        x.check_same_shape(&y)?;
        Ok(Self { x, y })
    }

    pub fn zeros_like(f: &ScalarField) -> Self {
        Self {
            x: f.zeros_like(),
            y: f.zeros_like(),
        }
    }

    pub fn constant_like(f: &ScalarField, vx: f64, vy: f64) -> Self {
        Self {
            x: f.map(|_| vx),
            y: f.map(|_| vy),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.x.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.x.height()
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.x.spacing()
    }

    pub fn component(&self, l: usize) -> &ScalarField {
        match l {
            0 => &self.x,
            _ => &self.y,
        }
    }

    pub fn component_mut(&mut self, l: usize) -> &mut ScalarField {
        match l {
            0 => &mut self.x,
            _ => &mut self.y,
        }
    }

    pub fn add(&self, other: &VectorField2) -> VectorField2 {
        Self {
            x: self.x.add(&other.x),
            y: self.y.add(&other.y),
        }
    }

    pub fn sub(&self, other: &VectorField2) -> VectorField2 {
        Self {
            x: self.x.sub(&other.x),
            y: self.y.sub(&other.y),
        }
    }

    pub fn scale(&self, factor: f64) -> VectorField2 {
        Self {
            x: self.x.scale(factor),
            y: self.y.scale(factor),
        }
    }

    pub fn dot(&self, other: &VectorField2) -> f64 {
        self.x.dot(&other.x) + self.y.dot(&other.y)
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn check_shape(&self, f: &ScalarField) -> Result<()> {
        self.x.check_same_shape(f)
    }
}

/// A banded linear operator on one grid line of length `n`, stored as
/// per-row `(column, coefficient)` lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil1d {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Stencil1d {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let rows = rows
            .into_iter()
            .map(|mut row| {
                row.sort_by_key(|&(k, _)| k);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
                for (k, c) in row {
                    match merged.last_mut() {
                        Some(last) if last.0 == k => last.1 += c,
                        _ => merged.push((k, c)),
                    }
                }
                merged.retain(|&(_, c)| c != 0.0);
                merged
            })
            .collect();
        Self { rows }
    }

    /// First derivative: central inside, one-sided on the end nodes.
    pub fn first_derivative(n: usize, h: f64) -> Self {
        let c = 1.0 / (2.0 * h);
        let rows = (0..n)
            .map(|i| {
                if i == 0 {
                    vec![(0, -1.0 / h), (1, 1.0 / h)]
                } else if i == n - 1 {
                    vec![(n - 2, -1.0 / h), (n - 1, 1.0 / h)]
                } else {
                    vec![(i - 1, -c), (i + 1, c)]
                }
            })
            .collect();
        Self::from_rows(rows)
    }

    /// Second derivative: the 3-point central stencil inside, the
    /// shifted 3-point stencil on the end nodes (exact on quadratics).
    pub fn second_derivative(n: usize, h: f64) -> Self {
        let c = 1.0 / (h * h);
        let rows = (0..n)
            .map(|i| {
                let m = i.clamp(1, n - 2);
                vec![(m - 1, c), (m, -2.0 * c), (m + 1, c)]
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn transpose(&self) -> Self {
        let n = self.rows.len();
        let mut rows = vec![Vec::new(); n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, c) in row {
                rows[k].push((i, c));
            }
        }
        Self::from_rows(rows)
    }

    /// The product `self · other`.
    pub fn compose(&self, other: &Stencil1d) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut out = Vec::new();
                for &(k, a) in row {
                    for &(m, b) in &other.rows[k] {
                        out.push((m, a * b));
                    }
                }
                out
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|&&(k, _)| k == i)
            .map_or(0.0, |&(_, c)| c)
    }

    /// Applies the stencil along the x axis (within each row).
    pub fn apply_x(&self, f: &ScalarField) -> ScalarField {
        debug_assert_eq!(self.rows.len(), f.width());
        let (w, h) = (f.width(), f.height());
        let src = f.data();
        let mut out = vec![0.0; w * h];
        for j in 0..h {
            let line = &src[j * w..(j + 1) * w];
            for (i, row) in self.rows.iter().enumerate() {
                out[j * w + i] = row.iter().map(|&(k, c)| c * line[k]).sum();
            }
        }
        f.like(out)
    }

    /// Applies the stencil along the y axis (within each column).
    pub fn apply_y(&self, f: &ScalarField) -> ScalarField {
        debug_assert_eq!(self.rows.len(), f.height());
        let w = f.width();
        let src = f.data();
        let mut out = vec![0.0; src.len()];
        for (j, row) in self.rows.iter().enumerate() {
            for i in 0..w {
                out[j * w + i] = row.iter().map(|&(k, c)| c * src[k * w + i]).sum();
            }
        }
        f.like(out)
    }
}

/// The difference operators for one grid shape, built once and reused.
#[derive(Debug, Clone)]
pub struct Operators {
    pub dx: Stencil1d,
    pub dy: Stencil1d,
    pub dx_t: Stencil1d,
    pub dy_t: Stencil1d,
    pub dxx: Stencil1d,
    pub dyy: Stencil1d,
    pub dxx_t: Stencil1d,
    pub dyy_t: Stencil1d,
    /// `dxᵀ dx`, so that `-laplacian = mxx ⊗ I + I ⊗ myy`.
    pub mxx: Stencil1d,
    pub myy: Stencil1d,
}

impl Operators {
    pub fn new(width: usize, height: usize, h: f64) -> Self {
        let dx = Stencil1d::first_derivative(width, h);
        let dy = Stencil1d::first_derivative(height, h);
        let dx_t = dx.transpose();
        let dy_t = dy.transpose();
        let mxx = dx_t.compose(&dx);
        let myy = dy_t.compose(&dy);
        let dxx = Stencil1d::second_derivative(width, h);
        let dyy = Stencil1d::second_derivative(height, h);
        Self {
            dxx_t: dxx.transpose(),
            dyy_t: dyy.transpose(),
            dxx,
            dyy,
            dx,
            dy,
            dx_t,
            dy_t,
            mxx,
            myy,
        }
    }

    pub fn for_field(f: &ScalarField) -> Self {
        Self::new(f.width(), f.height(), f.spacing())
    }

    pub fn grad(&self, f: &ScalarField) -> VectorField2 {
        VectorField2 {
            x: self.dx.apply_x(f),
            y: self.dy.apply_y(f),
        }
    }

    /// `-(dxᵀ vx + dyᵀ vy)`.
    pub fn div(&self, v: &VectorField2) -> ScalarField {
        let ax = self.dx_t.apply_x(&v.x);
        let ay = self.dy_t.apply_y(&v.y);
        ax.zip_map(&ay, |a, b| -(a + b))
    }

    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        let ax = self.mxx.apply_x(f);
        let ay = self.myy.apply_y(f);
        ax.zip_map(&ay, |a, b| -(a + b))
    }

    /// Diagonal coefficient of `-laplacian` at node `(i, j)`.
    pub fn neg_laplacian_diagonal(&self, i: usize, j: usize) -> f64 {
        self.mxx.diagonal(i) + self.myy.diagonal(j)
    }

    pub fn hessian(&self, f: &ScalarField) -> Hessian {
        let fx = self.dx.apply_x(f);
        Hessian {
            fxx: self.dxx.apply_x(f),
            fyy: self.dyy.apply_y(f),
            fxy: self.dy.apply_y(&fx),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hessian {
    pub fxx: ScalarField,
    pub fyy: ScalarField,
    pub fxy: ScalarField,
}

pub fn grad(f: &ScalarField) -> VectorField2 {
    Operators::for_field(f).grad(f)
}

pub fn div(v: &VectorField2) -> ScalarField {
    Operators::for_field(&v.x).div(v)
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    Operators::for_field(f).laplacian(f)
}

/// Second derivatives; `fxy` is the iterated first difference, so the
/// mixed partials agree by construction.
pub fn hessian(f: &ScalarField) -> Hessian {
    Operators::for_field(f).hessian(f)
}

/// Samples `field` at `x + u(x)` for every node by bilinear interpolation.
/// Displacements are in physical units; sample points outside the grid
/// are clamped to its boundary.
pub fn sample_warped(field: &ScalarField, u: &VectorField2) -> Result<ScalarField> {
    u.check_shape(field)?;
    let (w, h) = (field.width(), field.height());
    let inv_h = 1.0 / field.spacing();
    let (ux, uy) = (u.x.data(), u.y.data());
    let mut out = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            let k = j * w + i;
            out.push(field.bilinear(i as f64 + ux[k] * inv_h, j as f64 + uy[k] * inv_h));
        }
    }
    Ok(field.like(out))
}

/// `∇T` evaluated at the warped positions: the gradient is taken on the
/// grid first, then interpolated.
pub fn warped_gradient(field: &ScalarField, u: &VectorField2) -> Result<VectorField2> {
    u.check_shape(field)?;
    let g = grad(field);
    Ok(VectorField2 {
        x: sample_warped(&g.x, u)?,
        y: sample_warped(&g.y, u)?,
    })
}
