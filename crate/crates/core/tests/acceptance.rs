//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always reach the terminal.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wkbdiff::geometry::{canonicity_check, find_canonical_vertical_lines, ScanOptions, VerticalCurve};
use wkbdiff::linalg::{vnorm, Mat2, ScaledVec2, C64, I, ZERO};
use wkbdiff::matrix::{FourierMatrix, Poly, PolynomialMatrix, TrigPoly};
use wkbdiff::momentum::{default_momentum, infinity_momentum, MomentumBranch};
use wkbdiff::oracle::{propagate, scalar_recurrence};
use wkbdiff::phase::{
    normalized_eigenvector, omega_infinity_limit, omega_sum_at, residue_at, scalar_bridge, EigenPair, ResidueOptions,
    Sign,
};
use wkbdiff::wkb::{default_h_grid, frame, global_residual_profile, order_report, Diagnostics};
use wkbdiff::{MatrixModel, Result, Side};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn harper(mu: f64) -> Arc<MatrixModel> {
    Arc::new(MatrixModel::harper(0.5, mu))
}

fn quadratic_poly() -> Arc<MatrixModel> {
    Arc::new(MatrixModel::Polynomial(
        PolynomialMatrix::new([
            [Poly::real(&[1.0, 1.0, 1.0]), Poly::real(&[0.0, 1.0])],
            [Poly::real(&[1.0, 1.0]), Poly::real(&[1.0])],
        ])
        .expect("unimodular"),
    ))
}

fn linear_poly() -> Arc<MatrixModel> {
    Arc::new(MatrixModel::Polynomial(
        PolynomialMatrix::new([
            [Poly::real(&[2.0, 1.0]), Poly::real(&[0.0, 1.0])],
            [Poly::real(&[2.5, 1.0]), Poly::real(&[0.5, 1.0])],
        ])
        .expect("unimodular"),
    ))
}

fn constant() -> Arc<MatrixModel> {
    Arc::new(MatrixModel::Fourier(
        FourierMatrix::constant(Mat2::real(2.0, 1.0, 1.0, 1.0)).expect("unimodular"),
    ))
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

/// Random regular points with a locally chosen root `p`.
fn regular_points(model: &MatrixModel, rng: &mut ChaCha8Rng, n: usize, bx: [f64; 4]) -> Vec<(C64, C64)> {
    let mut out = Vec::new();
    while out.len() < n {
        let z = c(rng.gen_range(bx[0]..bx[1]), rng.gen_range(bx[2]..bx[3]));
        let m = model.eval(z);
        let p = default_momentum(m.trace());
        if p.sin().norm() > 1e-2 && m.get(0, 1).norm() > 1e-2 {
            out.push((z, p));
        }
    }
    out
}

fn test_models() -> [(&'static str, Arc<MatrixModel>, [f64; 4]); 2] {
    [
        ("harper", harper(0.0), [0.0, 1.0, -0.6, 0.6]),
        ("poly", quadratic_poly(), [-2.0, 2.0, -1.5, 1.5]),
    ]
}

fn eigen_identities() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for (_, model, bx) in test_models() {
        for (z, p) in regular_points(&model, &mut rng, 100, bx) {
            let m = model.eval(z);
            worst = worst.max(EigenPair::from_matrix(&m, z, p).identity_defect(&m));
        }
    }
    verdict(worst < 1e-10, format!("max relative defect {worst:.3e} (< 1e-10) over 2x100 points"))
}

fn sum_rule() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for (_, model, bx) in test_models() {
        for (z, p) in regular_points(&model, &mut rng, 100, bx) {
            worst = worst.max(omega_sum_at(&model, z, p)?.norm());
        }
    }
    verdict(worst < 1e-9, format!("max |w+ + w- + (ln(-2i M12 sin p))'| = {worst:.3e} (< 1e-9)"))
}

fn determinant_conservation() -> Result<Outcome> {
    let z0 = c(0.25, 0.0);
    let b = MomentumBranch::new(harper(0.0), z0)?;
    let path: Vec<C64> = (0..20)
        .map(|k| {
            let s = k as f64 / 19.0;
            c(0.25 + 0.12 * (2.0 * PI * s).sin(), 0.9 * s - 0.1 * (3.0 * PI * s).sin())
        })
        .collect();
    let r0 = wkbdiff::phase::eigen_pair(&b, z0)?;
    let d0 = r0.det();
    let mut worst: f64 = 0.0;
    for k in 0..path.len() {
        let z = path[k];
        let via = &path[..k];
        let vp: ScaledVec2 = normalized_eigenvector(&b, z0, z, Sign::Plus, via, 1e-13)?;
        let vm: ScaledVec2 = normalized_eigenvector(&b, z0, z, Sign::Minus, via, 1e-13)?;
        let det = (vp.log_scale + vm.log_scale).exp() * Mat2::from_cols(vp.v, vm.v).det();
        worst = worst.max((det - d0).norm() / d0.norm());
    }
    verdict(worst < 1e-8, format!("max relative deviation of det(V+ V-) {worst:.3e} (< 1e-8) on 20 nodes"))
}

fn turning_point_residues() -> Result<Outcome> {
    let opts = ResidueOptions::default();
    let zt = c(0.0, 2f64.acosh() / (2.0 * PI));
    let hb = MomentumBranch::new(harper(0.0), c(0.25, 0.0))?;
    let pb = MomentumBranch::new(quadratic_poly(), c(0.5, 0.5))?;
    let cases = [
        ("harper 0.2096i", &hb, zt, -0.5),
        ("poly z=0", &pb, ZERO, -1.5),
        ("poly z=-1", &pb, c(-1.0, 0.0), -0.5),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, b, z, want) in cases {
        let mut worst: f64 = 0.0;
        for s in [Sign::Plus, Sign::Minus] {
            let r = residue_at(b, z, s, &opts)?;
            worst = worst.max((r.value - want).norm());
        }
        ok &= worst < 1e-6;
        parts.push(format!("{name}: {want} err {worst:.1e}"));
    }
    verdict(ok, format!("{} (tol 1e-6, both signs)", parts.join("; ")))
}

fn regular_m12_poles() -> Result<Outcome> {
    let b = MomentumBranch::with_value(linear_poly(), ZERO, -I * 2f64.ln())?;
    let opts = ResidueOptions::default();
    let rp = residue_at(&b, ZERO, Sign::Plus, &opts)?;
    let rm = residue_at(&b, ZERO, Sign::Minus, &opts)?;
    let ep = (rp.value + 1.0).norm();
    let em = rm.value.norm();
    verdict(
        ep < 1e-6 && em < 1e-6,
        format!(
            "res W+ = {:.10} (err {ep:.1e}), |res W-| = {em:.1e} (tol 1e-6)",
            rp.value.re
        ),
    )
}

fn scalar_bridge_and_recurrence() -> Result<Outcome> {
    let b = MomentumBranch::new(harper(0.0), c(0.25, 0.0))?;
    let path = [c(0.25, 0.0), c(0.35, 0.15), c(0.3, 0.6), c(0.15, 0.4), c(0.2, -0.3)];
    let (lhs, rhs) = scalar_bridge(&b, &path, 1e-13)?;
    let bridge = (lhs - rhs).norm() / rhs.norm();

    let v = TrigPoly::cosine(0.5, 0.0);
    let model = harper(0.0);
    let (z, h, n) = (c(0.05, 0.1), 0.01, 200usize);
    let (psi0, psim) = (c(1.0, 0.2), c(0.3, -0.4));
    let scal = scalar_recurrence(|z| v.eval(z), z, psi0, psim, h, n);
    let tr = propagate(&model, z, ScaledVec2::new(ZERO, [psi0, psim]), h, n as i64)?;
    let mut rec: f64 = 0.0;
    for k in 0..=n {
        let got = tr.values[k].to_vec().expect("finite");
        let want = [scal[k + 1], scal[k]];
        rec = rec.max(vnorm([got[0] - want[0], got[1] - want[1]]) / vnorm(want));
    }
    verdict(
        bridge < 1e-8 && rec < 1e-12,
        format!("exp(int W+) vs sqrt(sin p0/sin p): {bridge:.2e} (< 1e-8); propagate vs recurrence: {rec:.2e} (< 1e-12)"),
    )
}

fn infinity_asymptotics() -> Result<Outcome> {
    let b = MomentumBranch::new(harper(0.3), c(0.25, 0.0))?;
    let mut ok = true;
    let mut worst_res: f64 = 0.0;
    let mut rates = Vec::new();
    for side in [Side::Up, Side::Down] {
        for sign in [Sign::Plus, Sign::Minus] {
            let lim = omega_infinity_limit(&b, side, sign, 3.0)?;
            let k = lim.decay_exponent / (2.0 * PI);
            ok &= (k - 1.0).abs() < 0.1 && lim.residuals[0] < 1e-6;
            worst_res = worst_res.max(lim.residuals[0]);
            rates.push(format!("{side}{sign}:{k:.4}"));
        }
    }
    // Period shift on the s = +1 normalized branch.
    let fit = infinity_momentum(&b, Side::Up, 3.0)?;
    let nb = if fit.s == -1 { b.negated() } else { b.clone() };
    let z = c(0.25, 3.0);
    let shift = nb.momentum_along(&[z], z + 1.0)? - nb.momentum_at(z)?;
    let per = (shift - 2.0 * PI * fit.n_t as f64).norm();
    ok &= per < 1e-8;
    verdict(
        ok,
        format!(
            "decay/2pi [{}] (1 +- 0.1), max residual at y=3 {worst_res:.1e}; |p(z+1)-p(z)-2pi n_u| = {per:.1e} (< 1e-8)",
            rates.join(" ")
        ),
    )
}

fn order_certification() -> Result<Outcome> {
    let b = MomentumBranch::new(harper(0.0), c(0.25, 0.0))?;
    let rep = order_report(&b, c(0.3, 0.2), c(0.25, 0.0), &default_h_grid())?;
    let asserted = ["t11", "t22", "w11", "t12_stripped", "t21_stripped", "residual_plus", "residual_minus"];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, fit) in &rep.fits {
        if !asserted.contains(&name.as_str()) {
            continue;
        }
        let want = Diagnostics::expected_order(name);
        ok &= (fit.slope - want).abs() <= 0.2 && fit.r_squared > 0.99;
        parts.push(format!("{name} {:.3} (r2 {:.4})", fit.slope, fit.r_squared));
    }
    verdict(ok, parts.join(", "))
}

fn canonical_lines() -> Result<Outcome> {
    let hb = MomentumBranch::new(harper(0.0), c(0.25, 0.0))?;
    let line = VerticalCurve::line(0.25, -5.0, 5.0)?.unbounded();
    let rep = canonicity_check(&hb, &line, 20, 1e-3)?;
    let near_half_pi = rep
        .samples
        .iter()
        .all(|s| (s.m1 - PI / 2.0).abs() < 1e-6 && (s.m2 - PI / 2.0).abs() < 1e-6);
    let cb = MomentumBranch::new(constant(), ZERO)?;
    let mut const_margin: f64 = 0.0;
    let mut const_rejected = true;
    for x in [0.0, 0.3, -1.2] {
        let r = canonicity_check(&cb.rebased(c(x, 0.0))?, &VerticalCurve::line(x, -3.0, 3.0)?, 20, 1e-3)?;
        const_rejected &= !r.strictly;
        const_margin = const_margin.max(r.min_margin.abs());
    }
    let scan = find_canonical_vertical_lines(&hb, (0.0, 0.5), (-3.0, 3.0), &ScanOptions::default())?;
    let hit = scan.intervals.iter().find(|i| i.x0 <= 0.25 && 0.25 <= i.x1);
    let ok = rep.strictly && near_half_pi && const_rejected && const_margin < 1e-12 && hit.is_some();
    verdict(
        ok,
        format!(
            "x=0.25 strictly canonical, min margin {:.12} (pi/2 = {:.12}); constant lines rejected, |margin| {const_margin:.1e}; scan interval {}",
            rep.min_margin,
            PI / 2.0,
            hit.map(|i| format!("[{:.2}, {:.2}]", i.x0, i.x1)).unwrap_or_else(|| "none".into())
        ),
    )
}

fn global_profile() -> Result<Outcome> {
    let b = MomentumBranch::new(harper(0.0), c(0.25, 0.0))?;
    let curve = VerticalCurve::line(0.25, -4.0, 4.0)?;
    let a = global_residual_profile(&b, Sign::Plus, &curve, 1e-2, 4)?;
    let bb = global_residual_profile(&b, Sign::Plus, &curve, 5e-3, 4)?;
    let ratio = a.max_residual / bb.max_residual;
    let decays = [a.decay_up, a.decay_down, bb.decay_up, bb.decay_down];
    let decaying = decays.iter().all(|d| d.is_some_and(|k| k > 0.0));
    verdict(
        (1.5..=2.5).contains(&ratio) && decaying,
        format!(
            "max residual {:.3e} -> {:.3e}, ratio {ratio:.3} (in [1.5, 2.5]); tail rates {:?}",
            a.max_residual,
            bb.max_residual,
            decays.map(|d| d.map(|k| (k * 100.0).round() / 100.0))
        ),
    )
}

fn exactness_floor() -> Result<Outcome> {
    let b = MomentumBranch::new(constant(), ZERO)?;
    let mut worst: f64 = 0.0;
    let mut full: f64 = 0.0;
    let mut full_cases = 0;
    for z in [c(0.4, 0.3), c(-1.0, 2.0), c(3.0, -0.5), c(0.0, 0.7)] {
        for h in [0.1, 0.01, 1e-3] {
            let f = frame(&b, ZERO, &[], z, h)?;
            let d = f.diagnostics()?;
            worst = worst
                .max(d.residual_plus)
                .max(d.residual_minus)
                .max((f.w_matrix()? - Mat2::identity()).max_abs())
                .max((f.t_stripped()? - Mat2::identity()).max_abs());
            // Full T only where the e^{2iθ/h} prefactor is O(1); elsewhere it
            // multiplies rounding in analytically zero entries.
            let factor = (I * f.theta * (2.0 / h)).exp().norm().ln().abs();
            if factor < 3.0 {
                if let Some(t) = f.t_matrix()? {
                    full = full.max((t - Mat2::identity()).max_abs());
                    full_cases += 1;
                }
            }
        }
    }
    verdict(
        worst < 1e-12 && full < 1e-12 && full_cases > 0,
        format!(
            "max of residuals, |W-I|, |T-I| (stripped) = {worst:.2e}; full |T-I| = {full:.2e} on {full_cases} cases with O(1) prefactor (< 1e-12)"
        ),
    )
}

type Criterion = (&'static str, fn() -> Result<Outcome>, Option<f64>);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("eigen identities", eigen_identities, Some(1.0)),
        ("geometric-phase sum rule", sum_rule, Some(1.0)),
        ("normalization determinant", determinant_conservation, Some(5.0)),
        ("turning-point residues", turning_point_residues, Some(5.0)),
        ("regular M12-zero poles", regular_m12_poles, Some(2.0)),
        ("scalar bridge", scalar_bridge_and_recurrence, None),
        ("infinity asymptotics", infinity_asymptotics, None),
        ("order certification", order_certification, Some(30.0)),
        ("canonical lines", canonical_lines, None),
        ("global profile", global_profile, Some(60.0)),
        ("exactness floor", exactness_floor, None),
    ];
    let mut failures = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = run();
        let secs = t.elapsed().as_secs_f64();
        let (passed, detail) = match out {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = budget.is_none_or(|b| secs < b);
        let passed = passed && in_time;
        let timing = match budget {
            Some(b) => format!("{secs:.2}s, budget {b}s"),
            None => format!("{secs:.2}s"),
        };
        println!("criterion {:>2} {} {name}: {detail} [{timing}]", k + 1, if passed { "PASS" } else { "FAIL" });
        failures += usize::from(!passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
