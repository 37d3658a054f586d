use gcreg::curvature::{gc_energy, gc_flow_step, lc_energy, tv_flow_step};
use gcreg::field::{div, grad, laplacian, sample_warped, ScalarField, VectorField2};
use gcreg::io::{decode_pgm, encode_pgm};
use gcreg::solver::baselines::demon_force;
use proptest::prelude::*;

const W: usize = 16;

fn field(lo: f64, hi: f64) -> impl Strategy<Value = ScalarField> {
    prop::collection::vec(lo..hi, W * W).prop_map(|v| ScalarField::from_vec(W, W, v).unwrap())
}

fn vector(lo: f64, hi: f64) -> impl Strategy<Value = VectorField2> {
    (field(lo, hi), field(lo, hi)).prop_map(|(x, y)| VectorField2::new(x, y).unwrap())
}

fn affine(a: f64, b: f64, c: f64) -> ScalarField {
    ScalarField::from_fn(W, W, 1.0, |x, y| a * x + b * y + c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn div_is_minus_grad_adjoint(f in field(-1.0, 1.0), v in vector(-1.0, 1.0)) {
        let lhs = grad(&f).dot(&v);
        let rhs = f.dot(&div(&v));
        prop_assert!((lhs + rhs).abs() <= 1e-12, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn laplacian_is_div_of_grad(f in field(0.0, 1.0)) {
        let d = laplacian(&f).sub(&div(&grad(&f))).max_abs();
        prop_assert!(d <= 1e-14, "{}", d);
    }

    #[test]
    fn warp_stays_in_template_range(t in field(-50.0, 200.0), u in vector(-20.0, 20.0)) {
        let out = sample_warped(&t, &u).unwrap();
        prop_assert!(out.min() >= t.min() && out.max() <= t.max());
    }

    #[test]
    fn zero_warp_is_identity(t in field(-50.0, 200.0)) {
        let zero = VectorField2::zeros_like(&t);
        prop_assert_eq!(sample_warped(&t, &zero).unwrap(), t);
    }

    #[test]
    fn demon_update_obeys_am_gm_bound(
        t in field(0.0, 255.0),
        r in field(0.0, 255.0),
        u in vector(-3.0, 3.0),
        c in 1e-3f64..10.0,
    ) {
        // |Δ(R - T)| |J| / (|J|² + c) ≤ |R - T| / (2 √c)
        let upd = demon_force(&t, &r, &u, c).unwrap();
        let warped = sample_warped(&t, &u).unwrap();
        for k in 0..t.len() {
            let mag = upd.x.data()[k].hypot(upd.y.data()[k]);
            let bound = (r.data()[k] - warped.data()[k]).abs() / (2.0 * c.sqrt());
            prop_assert!(mag <= bound * (1.0 + 1e-12), "node {}: {} > {}", k, mag, bound);
        }
    }

    #[test]
    fn gc_energy_is_even(u in vector(-3.0, 3.0)) {
        prop_assert_eq!(gc_energy(&u), gc_energy(&u.scale(-1.0)));
    }

    #[test]
    fn regularizers_vanish_on_affine_maps(
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -10.0f64..10.0,
        d in -2.0f64..2.0, e in -2.0f64..2.0,
    ) {
        let u = VectorField2::new(affine(a, b, c), affine(d, e, -c)).unwrap();
        prop_assert!(gc_energy(&u) <= 1e-12);
        prop_assert!(lc_energy(&u) <= 1e-12);
    }

    #[test]
    fn flows_preserve_the_mean(u in field(-1.0, 1.0)) {
        let m = u.mean();
        let g = gc_flow_step(&u, 0.01).unwrap();
        let t = tv_flow_step(&u, 0.01, 0.1).unwrap();
        prop_assert!((g.mean() - m).abs() <= 1e-12);
        prop_assert!((t.mean() - m).abs() <= 1e-12);
    }

    #[test]
    fn pgm_round_trip_is_exact(v in prop::collection::vec(0u8..=255, 7 * 5), binary in any::<bool>()) {
        let f = ScalarField::from_vec(7, 5, v.iter().map(|&b| b as f64).collect()).unwrap();
        let back = decode_pgm(&encode_pgm(&f, binary)).unwrap().into_field().unwrap();
        prop_assert_eq!(back, f);
    }
}
