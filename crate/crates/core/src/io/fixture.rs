//! Synthetic image pairs with known ground truth.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField2};
use crate::solver::baselines::gaussian_smooth;

pub const MIN_FIXTURE_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    #[value(name = "gaussian_shift")]
    GaussianShift,
    #[value(name = "square_rotate")]
    SquareRotate,
    #[value(name = "smooth_warp")]
    SmoothWarp,
}

impl FixtureKind {
    pub fn name(self) -> &'static str {
        match self {
            FixtureKind::GaussianShift => "gaussian_shift",
            FixtureKind::SquareRotate => "square_rotate",
            FixtureKind::SmoothWarp => "smooth_warp",
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixtureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_shift" => Ok(FixtureKind::GaussianShift),
            "square_rotate" => Ok(FixtureKind::SquareRotate),
            "smooth_warp" => Ok(FixtureKind::SmoothWarp),
            other => Err(Error::InvalidParameter {
                name: "fixture",
                reason: format!("unknown fixture `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureParams {
    /// Translation of the reference blob, pixels.
    pub shift: (f64, f64),
    /// Blob standard deviation, pixels.
    pub sigma: f64,
    /// Peak intensity.
    pub amplitude: f64,
    /// Rotation of the reference square, degrees.
    pub angle_deg: f64,
    /// Peak displacement of the smooth warp, pixels.
    pub warp_amplitude: f64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self {
            shift: (4.0, 0.0),
            sigma: 6.0,
            amplitude: 200.0,
            angle_deg: 10.0,
            warp_amplitude: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub template: ScalarField,
    pub reference: ScalarField,
    /// Displacement `u` with `T(x + u(x)) ≈ R(x)`.
    pub true_displacement: VectorField2,
}

pub fn make_fixture(kind: FixtureKind, size: usize, params: &FixtureParams) -> Result<Fixture> {
    if size < MIN_FIXTURE_SIZE {
        return Err(Error::InvalidParameter {
            name: "size",
            reason: format!("fixtures need at least {MIN_FIXTURE_SIZE} pixels, got {size}"),
        });
    }
    match kind {
        FixtureKind::GaussianShift => gaussian_shift(size, params),
        FixtureKind::SquareRotate => square_rotate(size, params),
        FixtureKind::SmoothWarp => smooth_warp(size, params),
    }
}

fn blob(p: &FixtureParams, cx: f64, cy: f64) -> impl Fn(f64, f64) -> f64 + '_ {
    let s2 = 2.0 * p.sigma * p.sigma;
    move |x, y| p.amplitude * (-((x - cx).powi(2) + (y - cy).powi(2)) / s2).exp()
}

fn gaussian_shift(size: usize, p: &FixtureParams) -> Result<Fixture> {
    let c = size as f64 / 2.0;
    let template = ScalarField::from_fn(size, size, 1.0, blob(p, c, c))?;
    let reference = ScalarField::from_fn(size, size, 1.0, blob(p, c + p.shift.0, c + p.shift.1))?;
    let true_displacement = VectorField2::constant_like(&template, -p.shift.0, -p.shift.1);
    Ok(Fixture {
        template,
        reference,
        true_displacement,
    })
}

/// Coverage of an axis-aligned square, 4x4 supersampled, lightly blurred.
fn square_image(size: usize, p: &FixtureParams, rotate: f64) -> Result<ScalarField> {
    let c = size as f64 / 2.0;
    let half = size as f64 / 6.0;
    let (sn, cs) = rotate.sin_cos();
    let sub = 4;
    let img = ScalarField::from_fn(size, size, 1.0, |x, y| {
        let mut hits = 0;
        for a in 0..sub {
            for b in 0..sub {
                let sx = x - 0.5 + (a as f64 + 0.5) / sub as f64 - c;
                let sy = y - 0.5 + (b as f64 + 0.5) / sub as f64 - c;
                // rotate the sample back into the square's frame
                let rx = cs * sx + sn * sy;
                let ry = -sn * sx + cs * sy;
                if rx.abs() <= half && ry.abs() <= half {
                    hits += 1;
                }
            }
        }
        p.amplitude * hits as f64 / (sub * sub) as f64
    })?;
    Ok(gaussian_smooth(&img, 1.0))
}

fn square_rotate(size: usize, p: &FixtureParams) -> Result<Fixture> {
    let angle = p.angle_deg.to_radians();
    let template = square_image(size, p, 0.0)?;
    let reference = square_image(size, p, angle)?;
    let c = size as f64 / 2.0;
    let (sn, cs) = angle.sin_cos();
    // R(x) = T(Q⁻¹(x - c) + c) with Q the rotation by `angle`
    let ux = ScalarField::from_fn(size, size, 1.0, |x, y| {
        let (dx, dy) = (x - c, y - c);
        cs * dx + sn * dy - dx
    })?;
    let uy = ScalarField::from_fn(size, size, 1.0, |x, y| {
        let (dx, dy) = (x - c, y - c);
        -sn * dx + cs * dy - dy
    })?;
    Ok(Fixture {
        template,
        reference,
        true_displacement: VectorField2::new(ux, uy)?,
    })
}

fn smooth_warp(size: usize, p: &FixtureParams) -> Result<Fixture> {
    let c = size as f64 / 2.0;
    let span = (size - 1) as f64;
    let a = p.warp_amplitude;
    let disp_x = move |x: f64, y: f64| a * (PI * x / span).sin() * (PI * y / span).sin();
    let disp_y =
        move |x: f64, y: f64| 0.5 * a * (2.0 * PI * x / span).sin() * (PI * y / span).sin();
    let wide = FixtureParams {
        sigma: p.sigma * 1.5,
        ..*p
    };
    let t = blob(&wide, c, c);
    let template = ScalarField::from_fn(size, size, 1.0, &t)?;
    let reference = ScalarField::from_fn(size, size, 1.0, |x, y| {
        t(x + disp_x(x, y), y + disp_y(x, y))
    })?;
    let true_displacement = VectorField2::new(
        ScalarField::from_fn(size, size, 1.0, disp_x)?,
        ScalarField::from_fn(size, size, 1.0, disp_y)?,
    )?;
    Ok(Fixture {
        template,
        reference,
        true_displacement,
    })
}
