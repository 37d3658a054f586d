//! Raster views of registration results.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField2};

const SAMPLES_PER_PIXEL: f64 = 4.0;

/// White canvas with black polylines tracing `x + u(x)` along every
/// `stride`-th grid row and column.
pub fn render_deformed_grid(u: &VectorField2, stride: usize) -> Result<ScalarField> {
    if stride < 2 {
        return Err(Error::InvalidParameter {
            name: "stride",
            reason: format!("must be at least 2, got {stride}"),
        });
    }
    let (w, h) = (u.width(), u.height());
    let inv_h = 1.0 / u.spacing();
    let mut canvas = ScalarField::constant(w, h, 255.0)?.with_spacing(u.spacing())?;
    let point = |i: usize, j: usize| {
        let k = j * w + i;
        (
            i as f64 + u.x.data()[k] * inv_h,
            j as f64 + u.y.data()[k] * inv_h,
        )
    };
    for j in (0..h).step_by(stride) {
        let pts: Vec<_> = (0..w).map(|i| point(i, j)).collect();
        draw_polyline(&mut canvas, &pts);
    }
    for i in (0..w).step_by(stride) {
        let pts: Vec<_> = (0..h).map(|j| point(i, j)).collect();
        draw_polyline(&mut canvas, &pts);
    }
    Ok(canvas)
}

fn draw_polyline(canvas: &mut ScalarField, pts: &[(f64, f64)]) {
    for seg in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (seg[0], seg[1]);
        let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
        let n = (len * SAMPLES_PER_PIXEL).ceil().max(1.0) as usize;
        for s in 0..=n {
            let t = s as f64 / n as f64;
            plot(canvas, x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        }
    }
}

fn plot(canvas: &mut ScalarField, x: f64, y: f64) {
    let (xi, yi) = (x.round(), y.round());
    if xi >= 0.0 && yi >= 0.0 && (xi as usize) < canvas.width() && (yi as usize) < canvas.height() {
        canvas.set(xi as usize, yi as usize, 0.0);
    }
}

/// `|a - b|` clamped to the displayable range.
pub fn abs_difference(a: &ScalarField, b: &ScalarField) -> ScalarField {
    a.zip_map(b, |x, y| (x - y).abs().min(255.0))
}
