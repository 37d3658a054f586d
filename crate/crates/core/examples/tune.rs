//! Settings sweeps on the synthetic fixtures; one line per run. The output of
//! this program is recorded in `docs/tuning.md`.
//!
//! `cargo run --release --example tune -p gcreg`

use gcreg::io::{make_fixture, FixtureKind, FixtureParams};
use gcreg::solver::{
    register_demon, register_gc, register_lc, register_mc, DemonConfig, RegistrationConfig,
    RegistrationResult, TimeMarchConfig,
};

fn line(label: &str, res: gcreg::Result<RegistrationResult>) {
    match res {
        Ok(r) => println!(
            "{label:<46} eps {:.4}  min_jac {:>8.4}  iters {:>4}",
            r.epsilon(),
            r.min_jac(),
            r.iterations,
        ),
        Err(e) => println!("{label:<46} error: {e}"),
    }
}

fn main() {
    let params = FixtureParams::default();
    let fx = make_fixture(FixtureKind::GaussianShift, 64, &params).unwrap();
    let (t, r) = (&fx.template, &fx.reference);

    println!("## gaussian_shift 64, gc, gamma 1e-4, tol 1e-3, omega 0.9725, 30 iterations");
    for rr in [0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0] {
        for sweeps in [1, 3, 10] {
            let cfg = RegistrationConfig {
                r: rr,
                inner_sweeps: sweeps,
                ..RegistrationConfig::default()
            };
            line(
                &format!("gc r={rr} sweeps={sweeps}"),
                register_gc(t, r, &cfg),
            );
        }
    }
    for gamma in [1e-3, 1e-2, 1e-1] {
        let cfg = RegistrationConfig {
            gamma,
            ..RegistrationConfig::default()
        };
        line(&format!("gc gamma={gamma} r=0.1"), register_gc(t, r, &cfg));
    }

    println!("\n## gaussian_shift 64, lc / mc (500 steps, tol 1e-4)");
    for gamma in [1e-3, 1e-2, 1e-1] {
        for dt in [1.0, 10.0] {
            let lc = TimeMarchConfig {
                gamma,
                dt,
                ..TimeMarchConfig::lc_default()
            };
            line(&format!("lc gamma={gamma} dt={dt}"), register_lc(t, r, &lc));
            let mc = TimeMarchConfig {
                gamma,
                dt,
                ..TimeMarchConfig::mc_default()
            };
            line(&format!("mc gamma={gamma} dt={dt}"), register_mc(t, r, &mc));
        }
    }

    println!("\n## gaussian_shift 64, demon");
    for noise_ratio in [1e-3, 1e-2, 1e-1] {
        for smooth_sigma in [1.0, 1.5, 2.0] {
            let cfg = DemonConfig {
                noise_ratio,
                smooth_sigma,
                ..DemonConfig::default()
            };
            line(
                &format!("demon noise={noise_ratio} sigma={smooth_sigma}"),
                register_demon(t, r, &cfg),
            );
        }
    }
    let additive = DemonConfig {
        diffeomorphic: false,
        ..DemonConfig::default()
    };
    line("demon additive", register_demon(t, r, &additive));

    println!("\n## every fixture, default settings");
    for kind in [
        FixtureKind::GaussianShift,
        FixtureKind::SquareRotate,
        FixtureKind::SmoothWarp,
    ] {
        let fx = make_fixture(kind, 64, &params).unwrap();
        let (t, r) = (&fx.template, &fx.reference);
        line(
            &format!("{kind} gc"),
            register_gc(t, r, &RegistrationConfig::default()),
        );
        line(
            &format!("{kind} lc"),
            register_lc(t, r, &TimeMarchConfig::lc_default()),
        );
        line(
            &format!("{kind} mc"),
            register_mc(t, r, &TimeMarchConfig::mc_default()),
        );
        line(
            &format!("{kind} demon"),
            register_demon(t, r, &DemonConfig::default()),
        );
    }
}
