//! Byte-exact comparisons against `tests/golden/`. Regenerate with
//! `GCREG_BLESS=1 cargo test -p gcreg --test golden` and review the diff.

use gcreg::io::{encode_pgm, render_deformed_grid};

mod common;
use common::{check_golden, fixture_run, fold_field, strip_time, MODELS};

#[test]
fn fixture_reports_and_grids_match() {
    let tmp = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    for model in MODELS {
        let run = fixture_run(model, tmp.path());
        assert_eq!(run.code, 0, "{model}");
        for (name, bytes) in [
            (
                format!("gaussian_shift_{model}_report.json"),
                strip_time(&run.report).into_bytes(),
            ),
            (format!("gaussian_shift_{model}_grid.pgm"), run.grid),
        ] {
            if let Err(e) = check_golden(&name, &bytes) {
                failures.push(e);
            }
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn fold_render_matches() {
    let grid = render_deformed_grid(&fold_field(64), 4).unwrap();
    check_golden("fold_grid.pgm", &encode_pgm(&grid, false)).unwrap();
}
