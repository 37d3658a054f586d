//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gcreg::field::{Operators, ScalarField, VectorField2};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const MODELS: [&str; 4] = ["gc", "lc", "mc", "demon"];

/// Set to regenerate the committed golden files instead of comparing.
pub const BLESS_VAR: &str = "GCREG_BLESS";

pub fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

pub fn check_golden(name: &str, actual: &[u8]) -> Result<(), String> {
    let path = golden_path(name);
    if std::env::var_os(BLESS_VAR).is_some() {
        std::fs::write(&path, actual).map_err(|e| format!("{}: {e}", path.display()))?;
        return Ok(());
    }
    let expected = std::fs::read(&path)
        .map_err(|e| format!("{}: {e} (run with {BLESS_VAR}=1)", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        let first = expected
            .iter()
            .zip(actual)
            .position(|(a, b)| a != b)
            .unwrap_or(expected.len().min(actual.len()));
        Err(format!(
            "{name}: differs from golden at byte {first} ({} vs {} bytes)",
            expected.len(),
            actual.len()
        ))
    }
}

/// The report with its wall-clock field removed, pretty printed.
pub fn strip_time(report: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(report).expect("report is JSON");
    v.as_object_mut()
        .expect("report is an object")
        .remove("time_s");
    let mut s = serde_json::to_string_pretty(&v).unwrap();
    s.push('\n');
    s
}

pub fn gcreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcreg"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub struct FixtureRun {
    pub code: i32,
    pub report: String,
    pub grid: Vec<u8>,
    pub deformed: Vec<u8>,
}

/// Runs the CLI on the 64x64 Gaussian-shift fixture with default settings.
pub fn fixture_run(model: &str, dir: &Path) -> FixtureRun {
    let out = dir.join(model);
    let o = gcreg(&[
        "--fixture",
        "gaussian_shift",
        "--size",
        "64",
        "--model",
        model,
        "--out",
        out.to_str().unwrap(),
    ]);
    let read = |n: &str| std::fs::read(out.join(n)).unwrap_or_default();
    FixtureRun {
        code: o.status.code().unwrap_or(-1),
        report: String::from_utf8(read("report.json")).unwrap(),
        grid: read("grid.pgm"),
        deformed: read("deformed.pgm"),
    }
}

/// A displacement that folds the grid around the image centre.
pub fn fold_field(size: usize) -> VectorField2 {
    let c = size as f64 / 2.0;
    let s2 = 2.0 * 8.0 * 8.0;
    let bump = |x: f64, y: f64| (-((x - c).powi(2) + (y - c).powi(2)) / s2).exp();
    let ux = ScalarField::from_fn(size, size, 1.0, |x, y| -2.0 * (x - c) * bump(x, y)).unwrap();
    let uy = ScalarField::zeros(size, size).unwrap();
    VectorField2::new(ux, uy).unwrap()
}

/// Smooth random field: a handful of low-frequency Fourier modes.
pub fn smooth_random(w: usize, rng: &mut StdRng, amp: f64) -> ScalarField {
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.05..0.4),
                rng.gen_range(0.05..0.4),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    ScalarField::from_fn(w, w, 1.0, |x, y| {
        amp * modes
            .iter()
            .map(|(a, kx, ky, p)| a * (kx * x + ky * y + p).sin())
            .sum::<f64>()
    })
    .unwrap()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Dense `r gradᵀgrad` on a `w × h` grid, assembled column by column.
pub fn dense_neg_laplacian(w: usize, h: usize, r: f64) -> DMatrix<f64> {
    let ops = Operators::new(w, h, 1.0);
    let n = w * h;
    let mut m = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let col = ops
            .laplacian(&ScalarField::from_vec(w, h, e).unwrap())
            .scale(-r);
        for (row, v) in col.data().iter().enumerate() {
            m[(row, c)] = *v;
        }
    }
    m
}

/// Minimum-norm solution of `m x = b` by SVD.
pub fn dense_solve(m: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let rhs = DVector::from_column_slice(b);
    m.clone()
        .svd(true, true)
        .solve(&rhs, 1e-10)
        .unwrap()
        .as_slice()
        .to_vec()
}

/// `‖a - b‖ / ‖b‖` after removing each vector's mean.
pub fn relative_error_mod_constants(a: &[f64], b: &[f64]) -> f64 {
    let centred = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| x - m).collect::<Vec<_>>()
    };
    let (a, b) = (centred(a), centred(b));
    let err: f64 = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    err / norm
}
