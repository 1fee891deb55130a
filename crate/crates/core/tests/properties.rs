use std::sync::Arc;

use proptest::prelude::*;
use wkbdiff::linalg::{vnorm, ScaledVec2};
use wkbdiff::momentum::MomentumBranch;
use wkbdiff::oracle::{eigen_closed_form, propagate};
use wkbdiff::phase::{eigen_pair, omega_sum_at};
use wkbdiff::scenario::fmt_float;
use wkbdiff::{MatrixModel, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn float_text_roundtrips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = fmt_float(x);
        let back: f64 = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn closed_form_eigenvalues_multiply_to_one(x in -0.5f64..0.5, y in -1.5f64..1.5) {
        let m = MatrixModel::harper(0.5, 0.3).eval(c(x, y));
        if let Ok([a, b]) = eigen_closed_form(&m) {
            prop_assert!((a.value * b.value - 1.0).norm() < 1e-10);
            prop_assert!(a.value.norm() >= b.value.norm());
        }
    }

    #[test]
    fn eigen_identities_hold_on_the_real_line(x in 0.05f64..0.45) {
        let b = MomentumBranch::new(Arc::new(MatrixModel::harper(0.5, 0.0)), c(0.25, 0.0)).unwrap();
        let z = c(x, 0.0);
        let m = b.model().eval(z);
        let e = eigen_pair(&b, z).unwrap();
        prop_assert!(e.identity_defect(&m) < 1e-10);
    }

    #[test]
    fn omega_sum_rule(x in 0.05f64..0.45, y in 0.3f64..2.0) {
        let model = MatrixModel::harper(0.5, 0.2);
        let z = c(x, y);
        let t = model.eval(z).trace();
        let p = (t * 0.5).acos();
        let s = omega_sum_at(&model, z, p).unwrap();
        prop_assert!(s.norm() < 1e-9 * (1.0 + p.norm()), "{}", s);
    }

    #[test]
    fn lattice_round_trip(x in -0.5f64..0.5, a in -2.0f64..2.0, b in -2.0f64..2.0, steps in 1i64..80) {
        let m = MatrixModel::harper(0.5, 0.0);
        let init = ScaledVec2::new(c(0.0, 0.0), [c(a, 1.0), c(1.0, b)]);
        let fwd = propagate(&m, c(x, 0.0), init, 0.01, steps).unwrap();
        let back = propagate(&m, fwd.z(steps as usize), fwd.terminal(), 0.01, -steps).unwrap();
        let u = back.terminal().to_vec().unwrap();
        let v = init.to_vec().unwrap();
        prop_assert!(vnorm([u[0] - v[0], u[1] - v[1]]) / vnorm(v) < 1e-10);
    }
}
