//! Acceptance suite. Prints one PASS/FAIL line per criterion; run with
//! `cargo test -p gcreg --test acceptance -- --nocapture` to see them.

use std::time::{Duration, Instant};

use gcreg::curvature::{
    gaussian_curvature, gc_energy, gc_flow_step, lc_energy, mean_curvature, tv_flow_step,
};
use gcreg::field::{div, grad, laplacian, Operators, ScalarField, VectorField2};
use gcreg::io::{encode_pgm, make_fixture, render_deformed_grid, FixtureKind, FixtureParams};
use gcreg::metrics::{jacobian_det_field, quality};
use gcreg::oracle::{verify_el17, verify_step1_el, ENERGY_DEFAULT_STEP, STEP1_DEFAULT_STEP};
use gcreg::solver::gc::{multiplier_update, q_update, u_update};
use gcreg::solver::{
    register_demon, register_gc, register_lc, register_mc, AlmState, DemonConfig,
    RegistrationConfig, RegistrationResult, TimeMarchConfig,
};

mod common;
use common::{
    check_golden, dense_neg_laplacian, dense_solve, fixture_run, fold_field,
    relative_error_mod_constants, rng, smooth_random, strip_time, MODELS,
};

type Check = Result<String, String>;
type Surface = Box<dyn Fn(f64, f64) -> f64>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < limit_s,
        format!("took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()),
    )
}

fn centred(f: impl Fn(f64, f64) -> f64) -> ScalarField {
    ScalarField::from_fn(33, 33, 1.0, |x, y| f(x - 16.0, y - 16.0)).unwrap()
}

fn curvature_oracle() -> Check {
    let started = Instant::now();
    let cases: [(&str, Surface, f64, f64); 3] = [
        ("z1", Box::new(|x, y| x * x + 2.0 * y * y), 8.0, 6.0),
        ("z2", Box::new(|x, y| -0.5 * (x * x + y * y)), 1.0, -2.0),
        ("z3", Box::new(|x, y| -0.5 * (x * x - y * y)), 1.0, 0.0),
    ];
    let mut worst = 0.0_f64;
    for (name, f, gc_abs, mc) in cases {
        let u = centred(f);
        let g = gaussian_curvature(&u).value.get(16, 16).abs();
        let m = mean_curvature(&u).value.get(16, 16);
        let err = (g - gc_abs).abs().max((m - mc).abs());
        worst = worst.max(err);
        ensure(err <= 1e-10, format!("{name}: |GC| {g}, MC {m}"))?;
    }
    within(started.elapsed(), 1.0)?;
    Ok(format!("max error {worst:.1e}"))
}

fn el_validation() -> Check {
    let w = 16;
    let mut r = rng(7);
    let c = (w - 1) as f64 / 2.0;
    // convex bowls plus smooth noise keep the curvature numerator signed
    let bowl = |a: f64, b: f64| {
        ScalarField::from_fn(w, w, 1.0, |x, y| a * (x - c).powi(2) + b * (y - c).powi(2)).unwrap()
    };
    let u = VectorField2::new(
        bowl(0.05, 0.03).add(&smooth_random(w, &mut r, 0.02)),
        bowl(-0.04, -0.06).add(&smooth_random(w, &mut r, 0.02)),
    )
    .unwrap();
    let started = Instant::now();
    let el = verify_el17(&u, 1.0, ENERGY_DEFAULT_STEP).map_err(|e| e.to_string())?;
    within(started.elapsed(), 60.0)?;
    ensure(
        el.max_rel_err <= 1e-2,
        format!("regularizer operator rel err {:.2e}", el.max_rel_err),
    )?;

    // duals with det ∇q bounded away from zero
    let ramp =
        |a: f64, b: f64| ScalarField::from_fn(w, w, 1.0, |x, y| a * (x - c) + b * (y - c)).unwrap();
    let ux = smooth_random(w, &mut r, 0.5);
    let q = VectorField2::new(
        ramp(0.6, 0.1).add(&smooth_random(w, &mut r, 0.05)),
        ramp(-0.1, 0.5).add(&smooth_random(w, &mut r, 0.05)),
    )
    .unwrap();
    let mu =
        VectorField2::new(smooth_random(w, &mut r, 0.1), smooth_random(w, &mut r, 0.1)).unwrap();
    let started = Instant::now();
    let s1 =
        verify_step1_el(&ux, &q, &mu, 0.5, 0.3, STEP1_DEFAULT_STEP).map_err(|e| e.to_string())?;
    within(started.elapsed(), 60.0)?;
    ensure(
        s1.max_rel_err <= 1e-3,
        format!("dual stationarity rel err {:.2e}", s1.max_rel_err),
    )?;
    Ok(format!(
        "regularizer {:.1e} ({} nodes, {} skipped), dual {:.1e} ({} nodes, {} skipped)",
        el.max_rel_err,
        el.nodes_checked,
        el.nodes_skipped,
        s1.max_rel_err,
        s1.nodes_checked,
        s1.nodes_skipped
    ))
}

fn alm_gates() -> Check {
    let started = Instant::now();
    let w = 8;
    let mut rg = rng(11);
    let field = |rg: &mut _, a| smooth_random(w, rg, a);
    let mut s = AlmState::zeros(&ScalarField::zeros(w, w).unwrap());
    s.u = VectorField2::new(field(&mut rg, 1.0), field(&mut rg, 1.0)).unwrap();
    s.q1 = VectorField2::new(field(&mut rg, 0.5), field(&mut rg, 0.5)).unwrap();
    s.q2 = VectorField2::new(field(&mut rg, 0.5), field(&mut rg, 0.5)).unwrap();
    s.mu1 = VectorField2::new(field(&mut rg, 0.3), field(&mut rg, 0.3)).unwrap();
    s.mu2 = VectorField2::new(field(&mut rg, 0.3), field(&mut rg, 0.3)).unwrap();
    let r = 0.4;

    let d = q_update(&s, 0.0, r, 1e-9).map_err(|e| e.to_string())?;
    let mut q_err = 0.0_f64;
    for (l, q) in [&d.q1, &d.q2].into_iter().enumerate() {
        let expect = grad(s.u.component(l)).sub(&s.mu(l).scale(1.0 / r));
        q_err = q_err.max(q.sub(&expect).max_abs());
    }
    ensure(
        q_err <= 1e-12,
        format!("penalty-only duals off by {q_err:e}"),
    )?;

    let flat = ScalarField::constant(w, w, 3.0).unwrap();
    let reference = field(&mut rg, 2.0);
    let got = u_update(&flat, &reference, &s, r, 1.0, 4000, 1e-12).map_err(|e| e.to_string())?;
    let a = dense_neg_laplacian(w, w, r);
    let ops = Operators::new(w, w, 1.0);
    let mut u_err = 0.0_f64;
    for l in 0..2 {
        let g = ops.div(&s.mu(l).add(&s.q(l).scale(r)));
        let b: Vec<f64> = g.data().iter().map(|v| -v).collect();
        u_err = u_err.max(relative_error_mod_constants(
            got.component(l).data(),
            &dense_solve(&a, &b),
        ));
    }
    ensure(
        u_err <= 1e-6,
        format!("flat-template update vs dense solve {u_err:e}"),
    )?;

    let mut fixed = s.clone();
    fixed.q1 = grad(&s.u.x);
    fixed.q2 = grad(&s.u.y);
    let (m1, m2) = multiplier_update(&fixed, r).map_err(|e| e.to_string())?;
    ensure(m1 == s.mu1 && m2 == s.mu2, "multipliers moved at q = ∇u")?;
    within(started.elapsed(), 10.0)?;
    Ok(format!(
        "dual {q_err:.1e}, dense {u_err:.1e}, multipliers exact"
    ))
}

fn shift_fixture() -> (ScalarField, ScalarField) {
    let fx = make_fixture(FixtureKind::GaussianShift, 64, &FixtureParams::default()).unwrap();
    (fx.template, fx.reference)
}

fn registration_fixture() -> Check {
    let (t, r) = shift_fixture();
    let cfg = RegistrationConfig::default();
    println!(
        "    gc settings: gamma {} tol {} omega {} max_iter {} r {} sweeps {}",
        cfg.gamma, cfg.tol, cfg.omega, cfg.max_iter, cfg.r, cfg.inner_sweeps
    );
    let started = Instant::now();
    let gc = register_gc(&t, &r, &cfg).map_err(|e| e.to_string())?;
    within(started.elapsed(), 30.0)?;
    ensure(gc.epsilon() <= 0.1, format!("gc epsilon {}", gc.epsilon()))?;
    ensure(gc.min_jac() > 0.0, format!("gc min_jac {}", gc.min_jac()))?;
    ensure(
        gc.iterations <= 30,
        format!("gc iterations {}", gc.iterations),
    )?;

    let demon = register_demon(&t, &r, &DemonConfig::default()).map_err(|e| e.to_string())?;
    ensure(
        demon.epsilon() <= 0.2 && demon.min_jac() > 0.0,
        format!("demon {:?}", demon.quality),
    )?;
    let lc = register_lc(&t, &r, &TimeMarchConfig::lc_default()).map_err(|e| e.to_string())?;
    ensure(
        lc.epsilon() <= 0.2 && lc.min_jac() > 0.0,
        format!("lc {:?}", lc.quality),
    )?;
    let mc = register_mc(&t, &r, &TimeMarchConfig::mc_default()).map_err(|e| e.to_string())?;
    ensure(
        mc.epsilon() <= 0.25 && mc.min_jac() > 0.0,
        format!("mc {:?}", mc.quality),
    )?;
    Ok(format!(
        "gc eps {:.4} F {:.3} in {} its / {:.2}s; demon {:.4}; lc {:.4}; mc {:.4}",
        gc.epsilon(),
        gc.min_jac(),
        gc.iterations,
        gc.wall_time_s,
        demon.epsilon(),
        lc.epsilon(),
        mc.epsilon()
    ))
}

fn run_all(
    t: &ScalarField,
    r: &ScalarField,
) -> Vec<(&'static str, gcreg::Result<RegistrationResult>)> {
    vec![
        ("gc", register_gc(t, r, &RegistrationConfig::default())),
        ("lc", register_lc(t, r, &TimeMarchConfig::lc_default())),
        ("mc", register_mc(t, r, &TimeMarchConfig::mc_default())),
        ("demon", register_demon(t, r, &DemonConfig::default())),
    ]
}

fn fold_detection() -> Check {
    let z = ScalarField::zeros(16, 16).unwrap();
    let u = VectorField2::new(
        ScalarField::from_fn(16, 16, 1.0, |x, _| -2.0 * x).unwrap(),
        z.clone(),
    )
    .unwrap();
    let q = quality(&z, &z.map(|v| v + 1.0), &u).map_err(|e| e.to_string())?;
    ensure(
        q.min_jac < 0.0 && q.negative_jac_count > 0,
        format!("fold missed: {q:?}"),
    )?;
    let mut worst = f64::INFINITY;
    for kind in [
        FixtureKind::GaussianShift,
        FixtureKind::SquareRotate,
        FixtureKind::SmoothWarp,
    ] {
        let fx = make_fixture(kind, 64, &FixtureParams::default()).unwrap();
        for (model, res) in run_all(&fx.template, &fx.reference) {
            let res = res.map_err(|e| format!("{kind} {model}: {e}"))?;
            ensure(
                res.min_jac() > 0.0,
                format!("{kind} {model}: min_jac {}", res.min_jac()),
            )?;
            worst = worst.min(res.min_jac());
        }
    }
    Ok(format!(
        "u1=-2x min_jac {}, {} folded nodes; smallest fixture min_jac {worst:.3}",
        q.min_jac, q.negative_jac_count
    ))
}

fn structural_invariants() -> Check {
    let started = Instant::now();
    let mut r = rng(3);
    let w = 16;
    let mut worst_adj = 0.0_f64;
    let mut worst_lap = 0.0_f64;
    for _ in 0..20 {
        let f = smooth_random(w, &mut r, 1.0);
        let v = VectorField2::new(smooth_random(w, &mut r, 1.0), smooth_random(w, &mut r, 1.0))
            .unwrap();
        worst_adj = worst_adj.max((grad(&f).dot(&v) + f.dot(&div(&v))).abs());
        worst_lap = worst_lap.max(laplacian(&f).sub(&div(&grad(&f))).max_abs());
    }
    ensure(worst_adj <= 1e-12, format!("adjointness {worst_adj:e}"))?;
    ensure(
        worst_lap <= 1e-14,
        format!("laplacian vs div grad {worst_lap:e}"),
    )?;

    let aff = |a: f64, b: f64, c: f64| {
        ScalarField::from_fn(w, w, 1.0, move |x, y| a * x + b * y + c).unwrap()
    };
    let u = VectorField2::new(aff(0.7, -0.3, 2.0), aff(-1.2, 0.4, -5.0)).unwrap();
    let (ge, le) = (gc_energy(&u), lc_energy(&u));
    ensure(
        ge <= 1e-12 && le <= 1e-12,
        format!("affine energies gc {ge:e} lc {le:e}"),
    )?;

    let v =
        VectorField2::new(smooth_random(w, &mut r, 2.0), smooth_random(w, &mut r, 2.0)).unwrap();
    ensure(
        gc_energy(&v) == gc_energy(&v.scale(-1.0)),
        "gc_energy not even",
    )?;

    let f = smooth_random(w, &mut r, 1.0);
    let m = f.mean();
    let d1 = (gc_flow_step(&f, 0.05).map_err(|e| e.to_string())?.mean() - m).abs();
    let d2 = (tv_flow_step(&f, 0.05, 0.1)
        .map_err(|e| e.to_string())?
        .mean()
        - m)
        .abs();
    ensure(
        d1 <= 1e-12 && d2 <= 1e-12,
        format!("flow mean drift {d1:e} / {d2:e}"),
    )?;
    within(started.elapsed(), 5.0)?;
    Ok(format!(
        "adjointness {worst_adj:.1e}, laplacian {worst_lap:.1e}, flow drift {:.1e}",
        d1.max(d2)
    ))
}

fn determinism_and_goldens() -> Check {
    let (t, r) = shift_fixture();
    for ((model, a), (_, b)) in run_all(&t, &r).into_iter().zip(run_all(&t, &r)) {
        let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
        ensure(
            a.u == b.u && a.quality == b.quality && a.residual_history == b.residual_history,
            format!("{model} not reproducible"),
        )?;
    }
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    for model in MODELS {
        let first = fixture_run(model, &tmp.path().join("a"));
        let second = fixture_run(model, &tmp.path().join("b"));
        ensure(first.code == 0, format!("{model} cli exit {}", first.code))?;
        ensure(
            first.grid == second.grid
                && first.deformed == second.deformed
                && strip_time(&first.report) == strip_time(&second.report),
            format!("{model} cli outputs differ between runs"),
        )?;
        check_golden(
            &format!("gaussian_shift_{model}_report.json"),
            strip_time(&first.report).as_bytes(),
        )?;
        check_golden(&format!("gaussian_shift_{model}_grid.pgm"), &first.grid)?;
    }
    let fold = render_deformed_grid(&fold_field(64), 4).map_err(|e| e.to_string())?;
    check_golden("fold_grid.pgm", &encode_pgm(&fold, false))?;
    ensure(
        jacobian_det_field(&fold_field(64)).min() < 0.0,
        "fold golden field does not fold",
    )?;
    Ok("solver and cli outputs bit-identical; 9 goldens match".into())
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 7] = [
        ("analytic curvature oracle", curvature_oracle),
        ("optimality system validation", el_validation),
        ("ALM correctness gates", alm_gates),
        ("registration fixture", registration_fixture),
        ("fold detection", fold_detection),
        ("structural invariants", structural_invariants),
        ("determinism and golden files", determinism_and_goldens),
    ];
    let mut failed = Vec::new();
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", n + 1),
            Err(why) => {
                println!("FAIL {} {name}: {why}", n + 1);
                failed.push(n + 1);
            }
        }
    }
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
