//! The `gcreg` command-line driver.
//!
//! Exit codes: 0 success, 1 output could not be written, 2 bad arguments or
//! unreadable input, 3 the solver aborted (divergence or a singular block).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser};
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::field::{sample_warped, ScalarField};
use crate::io::{
    abs_difference, load_image, make_fixture, render_deformed_grid, report, write_pgm, FixtureKind,
    FixtureParams, Model, Report, ReportFormat, ReportRow, RunConfigFile,
};
use crate::solver::{
    register_demon, register_gc, register_lc, register_mc, DemonConfig, RegistrationConfig,
    RegistrationResult, TimeMarchConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OUTPUT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "gcreg",
    version,
    about = "Register a template image onto a reference image"
)]
struct Args {
    /// Regularization model.
    #[arg(long, value_enum)]
    model: Option<Model>,
    /// Template (moving) image, PGM or PNG.
    #[arg(long, conflicts_with = "fixture")]
    template: Option<PathBuf>,
    /// Reference (fixed) image, PGM or PNG.
    #[arg(long, conflicts_with = "fixture")]
    reference: Option<PathBuf>,
    /// Use a synthetic image pair instead of files.
    #[arg(long, value_enum)]
    fixture: Option<FixtureKind>,
    /// Edge length of the synthetic pair.
    #[arg(long, default_value_t = 64, requires = "fixture")]
    size: usize,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Augmented Lagrangian penalty (gc).
    #[arg(long)]
    r: Option<f64>,
    /// Gauss–Seidel relaxation factor (gc).
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Inner relaxation sweeps per outer iteration (gc, lc).
    #[arg(long)]
    inner_sweeps: Option<usize>,
    /// Time step (lc, mc).
    #[arg(long)]
    dt: Option<f64>,
    /// Demon denominator regularization.
    #[arg(long)]
    noise_ratio: Option<f64>,
    /// Demon update smoothing, pixels.
    #[arg(long)]
    smooth_sigma: Option<f64>,
    #[arg(long)]
    squaring_steps: Option<usize>,
    /// Additive demon updates instead of compositive ones.
    #[arg(long)]
    no_diffeomorphic: bool,
    /// Stride of the rendered deformation grid.
    #[arg(long)]
    grid_spacing: Option<usize>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    report: ReportFormat,
    /// JSON file with default settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Solver(Error),
    Output(Error),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Solver(_) => EXIT_SOLVER,
            Failure::Output(_) => EXIT_OUTPUT,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn solver_failure(e: Error) -> Failure {
    match e {
        Error::Diverged { .. } | Error::SingularBlock { .. } => Failure::Solver(e),
        other => usage(other),
    }
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&args) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(f) => {
            match &f {
                Failure::Usage(msg) => {
                    eprintln!("error: {msg}\n\n{}", Args::command().render_usage());
                }
                Failure::Solver(e) => eprintln!("error: solver aborted: {e}"),
                Failure::Output(e) => eprintln!("error: {e}"),
            }
            f.code()
        }
    }
}

/// Fully resolved settings for one run.
struct Plan {
    model: Model,
    out: PathBuf,
    gc: RegistrationConfig,
    march: TimeMarchConfig,
    demon: DemonConfig,
    grid_spacing: usize,
}

fn plan(args: &Args, file: &RunConfigFile) -> Result<Plan, Failure> {
    let model = args.model.or(file.model).unwrap_or(Model::Gc);
    let out = args
        .out
        .clone()
        .or_else(|| file.output_dir.clone())
        .ok_or_else(|| usage("--out is required"))?;
    let pick =
        |flag: Option<f64>, conf: Option<f64>, default: f64| flag.or(conf).unwrap_or(default);
    let pick_n =
        |flag: Option<usize>, conf: Option<usize>, default: usize| flag.or(conf).unwrap_or(default);

    let g = RegistrationConfig::default();
    let gc = RegistrationConfig {
        gamma: pick(args.gamma, file.gamma, g.gamma),
        r: pick(args.r, file.r, g.r),
        omega: pick(args.omega, file.omega, g.omega),
        tol: pick(args.tol, file.tol, g.tol),
        max_iter: pick_n(args.max_iter, file.max_iter, g.max_iter),
        denom_guard: file.denom_guard.unwrap_or(g.denom_guard),
        inner_sweeps: pick_n(args.inner_sweeps, file.inner_sweeps, g.inner_sweeps),
    };
    let m = if model == Model::Mc {
        TimeMarchConfig::mc_default()
    } else {
        TimeMarchConfig::lc_default()
    };
    let march = TimeMarchConfig {
        gamma: pick(args.gamma, file.gamma, m.gamma),
        dt: pick(args.dt, file.dt, m.dt),
        max_iter: pick_n(args.max_iter, file.max_iter, m.max_iter),
        tol: pick(args.tol, file.tol, m.tol),
        inner_sweeps: pick_n(args.inner_sweeps, file.inner_sweeps, m.inner_sweeps),
    };
    let d = DemonConfig::default();
    let demon = DemonConfig {
        noise_ratio: pick(args.noise_ratio, file.noise_ratio, d.noise_ratio),
        smooth_sigma: pick(args.smooth_sigma, file.smooth_sigma, d.smooth_sigma),
        diffeomorphic: if args.no_diffeomorphic {
            false
        } else {
            file.diffeomorphic.unwrap_or(d.diffeomorphic)
        },
        squaring_steps: pick_n(args.squaring_steps, file.squaring_steps, d.squaring_steps),
        max_iter: pick_n(args.max_iter, file.max_iter, d.max_iter),
        tol: pick(args.tol, file.tol, d.tol),
    };
    let grid_spacing = pick_n(args.grid_spacing, file.grid_spacing, 8);
    if grid_spacing < 2 {
        return Err(usage(format!(
            "--grid-spacing must be at least 2, got {grid_spacing}"
        )));
    }
    match model {
        Model::Gc => gc.validate(),
        Model::Lc | Model::Mc => march.validate(),
        Model::Demon => demon.validate(),
    }
    .map_err(usage)?;
    Ok(Plan {
        model,
        out,
        gc,
        march,
        demon,
        grid_spacing,
    })
}

fn inputs(
    args: &Args,
    file: &RunConfigFile,
) -> Result<(ScalarField, ScalarField, Option<String>), Failure> {
    if let Some(kind) = args.fixture {
        let fx = make_fixture(kind, args.size, &FixtureParams::default()).map_err(usage)?;
        return Ok((fx.template, fx.reference, Some(kind.name().to_string())));
    }
    let template = args
        .template
        .as_ref()
        .or(file.template_path.as_ref())
        .ok_or_else(|| usage("--template is required unless --fixture is given"))?;
    let reference = args
        .reference
        .as_ref()
        .or(file.reference_path.as_ref())
        .ok_or_else(|| usage("--reference is required unless --fixture is given"))?;
    let t = load_image(template).map_err(usage)?;
    let r = load_image(reference).map_err(usage)?;
    t.check_same_shape(&r).map_err(usage)?;
    Ok((t, r, None))
}

fn settings(plan: &Plan) -> Map<String, Value> {
    let v = match plan.model {
        Model::Gc => json!({
            "gamma": plan.gc.gamma,
            "r": plan.gc.r,
            "omega": plan.gc.omega,
            "tol": plan.gc.tol,
            "max_iter": plan.gc.max_iter,
            "denom_guard": plan.gc.denom_guard,
            "inner_sweeps": plan.gc.inner_sweeps,
        }),
        Model::Lc | Model::Mc => json!({
            "gamma": plan.march.gamma,
            "dt": plan.march.dt,
            "tol": plan.march.tol,
            "max_iter": plan.march.max_iter,
            "inner_sweeps": plan.march.inner_sweeps,
        }),
        Model::Demon => json!({
            "noise_ratio": plan.demon.noise_ratio,
            "smooth_sigma": plan.demon.smooth_sigma,
            "diffeomorphic": plan.demon.diffeomorphic,
            "squaring_steps": plan.demon.squaring_steps,
            "tol": plan.demon.tol,
            "max_iter": plan.demon.max_iter,
        }),
    };
    let mut map = match v {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    map.insert("grid_spacing".into(), json!(plan.grid_spacing));
    map
}

fn register(plan: &Plan, t: &ScalarField, r: &ScalarField) -> Result<RegistrationResult, Failure> {
    match plan.model {
        Model::Gc => register_gc(t, r, &plan.gc),
        Model::Lc => register_lc(t, r, &plan.march),
        Model::Mc => register_mc(t, r, &plan.march),
        Model::Demon => register_demon(t, r, &plan.demon),
    }
    .map_err(solver_failure)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Output(Error::io(path, e)))
}

fn execute(args: &Args) -> Result<String, Failure> {
    let file = match &args.config {
        Some(p) => RunConfigFile::load(p).map_err(usage)?,
        None => RunConfigFile::default(),
    };
    let plan = plan(args, &file)?;
    let (template, reference, fixture) = inputs(args, &file)?;
    let res = register(&plan, &template, &reference)?;

    let out = &plan.out;
    fs::create_dir_all(out).map_err(|e| Failure::Output(Error::io(out, e)))?;
    let deformed = sample_warped(&template, &res.u).map_err(Failure::Output)?;
    let grid = render_deformed_grid(&res.u, plan.grid_spacing).map_err(usage)?;
    for (name, img) in [
        ("deformed.pgm", &deformed),
        ("diff_before.pgm", &abs_difference(&template, &reference)),
        ("diff_after.pgm", &abs_difference(&deformed, &reference)),
        ("grid.pgm", &grid),
    ] {
        write_pgm(&out.join(name), img, true).map_err(Failure::Output)?;
    }

    let row = ReportRow {
        model: plan.model,
        gamma: match plan.model {
            Model::Gc => plan.gc.gamma,
            Model::Lc | Model::Mc => plan.march.gamma,
            Model::Demon => 0.0,
        },
        r: (plan.model == Model::Gc).then_some(plan.gc.r),
        time_s: res.wall_time_s,
        epsilon: res.quality.epsilon,
        min_jac: res.quality.min_jac,
        iterations: res.iterations,
    };
    match args.report {
        ReportFormat::Json => {
            let rep = Report {
                schema: report::REPORT_SCHEMA,
                row: row.clone(),
                quality: res.quality,
                settings: settings(&plan),
                fixture,
                width: template.width(),
                height: template.height(),
                identical_inputs: res.identical_inputs,
            };
            write_text(&out.join("report.json"), &rep.to_json())?;
        }
        ReportFormat::Csv => write_text(
            &out.join("report.csv"),
            &report::to_csv(std::slice::from_ref(&row)),
        )?,
    }
    Ok(format!(
        "{}: epsilon {:.6}  min det J {:.6}  iterations {}  time {:.3}s",
        row.model, row.epsilon, row.min_jac, row.iterations, row.time_s
    ))
}
