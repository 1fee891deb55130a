//! Brute-force references: lattice propagation, the scalar three-term
//! recurrence, a closed-form 2×2 eigensolver and trapezoid contour quadrature.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::error::{Result, WkbError};
use crate::linalg::{projective_distance, vnorm, vscale, Mat2, ScaledVec2, Vec2, C64, I};
use crate::matrix::MatrixModel;
use crate::momentum::MomentumBranch;
use crate::phase::Sign;
use crate::wkb::WkbCandidate;

/// Lattice solution `Ψ(start + k·h)` for `k = 0..=|steps|`, stepping backward
/// when `steps < 0`. Each value keeps a vector of norm near one and the
/// accumulated log-scale in `log_scale.re`.
#[derive(Debug, Clone)]
pub struct LatticeTrajectory {
    pub start: C64,
    pub h: f64,
    pub steps: i64,
    pub values: Vec<ScaledVec2>,
}

impl LatticeTrajectory {
    fn direction_sign(&self) -> f64 {
        if self.steps < 0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn z(&self, k: usize) -> C64 {
        self.start + self.direction_sign() * self.h * k as f64
    }

    pub fn terminal(&self) -> ScaledVec2 {
        *self.values.last().expect("trajectory holds at least the initial value")
    }

    pub fn log_magnitude(&self, k: usize) -> f64 {
        self.values[k].log_norm()
    }

    pub fn direction(&self, k: usize) -> Vec2 {
        self.values[k].direction()
    }
}

/// Rescales by a power of two so the rounding of the raw product is preserved.
fn rescale(v: Vec2, exp2: &mut i64) -> Vec2 {
    let e = vnorm(v).log2().round() as i32;
    *exp2 += e as i64;
    let f = 2f64.powi(-e);
    [v[0] * f, v[1] * f]
}

/// Steps `Ψ(z+h) = M(z)Ψ(z)` from `init`, renormalizing after every step.
/// Negative `steps` run `Ψ(z−h) = M(z−h)⁻¹Ψ(z)` with the adjugate as inverse.
pub fn propagate(model: &MatrixModel, start: C64, init: ScaledVec2, h: f64, steps: i64) -> Result<LatticeTrajectory> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(WkbError::InvalidInput(format!("h must be positive, got {h}")));
    }
    let n0 = vnorm(init.v);
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(WkbError::InvalidInput("initial vector must be nonzero and finite".into()));
    }
    let base = init.log_scale.re;
    let phase = init.log_scale.im;
    let mut cur = if phase == 0.0 { init.v } else { vscale(init.v, C64::from_polar(1.0, phase)) };
    let mut exp2 = 0i64;
    let scaled = |v: Vec2, e: i64| ScaledVec2::new(C64::new(base + e as f64 * LN_2, 0.0), v);
    let mut values = Vec::with_capacity(steps.unsigned_abs() as usize + 1);
    values.push(scaled(cur, exp2));
    let dir = if steps < 0 { -1.0 } else { 1.0 };
    for k in 0..steps.unsigned_abs() {
        let z = start + dir * h * k as f64;
        let next = if steps < 0 {
            model.try_eval(z - h)?.adjugate().mul_vec(cur)
        } else {
            model.try_eval(z)?.mul_vec(cur)
        };
        let nn = vnorm(next);
        if !(nn > 0.0) || !nn.is_finite() {
            return Err(WkbError::Range { z });
        }
        cur = rescale(next, &mut exp2);
        values.push(scaled(cur, exp2));
    }
    Ok(LatticeTrajectory {
        start,
        h,
        steps,
        values,
    })
}

/// `ψ(start + k·h)` for `k = −1..=steps` from `ψ(z+h) + ψ(z−h) + v(z)ψ(z) = 0`.
/// The returned list starts with `psi_minus1`, then `psi0`.
pub fn scalar_recurrence<V>(v: V, z_start: C64, psi0: C64, psi_minus1: C64, h: f64, steps: usize) -> Vec<C64>
where
    V: Fn(C64) -> C64,
{
    let mut out = Vec::with_capacity(steps + 2);
    out.push(psi_minus1);
    out.push(psi0);
    for k in 0..steps {
        let z = z_start + h * k as f64;
        let next = -out[k] - v(z) * out[k + 1];
        out.push(next);
    }
    out
}

/// Angle between the lattice solution started at `Ψ₀(start)` and `Ψ₀(start + L)`
/// after `n` steps of size `L/n`.
pub fn propagation_vs_wkb(branch: &MomentumBranch, sign: Sign, start: C64, length: f64, n: usize) -> Result<f64> {
    let h = length / n as f64;
    let cand = WkbCandidate::new(branch.clone(), sign, start)?;
    let init = cand.psi0(start, h)?;
    let traj = propagate(branch.model(), start, init, h, n as i64)?;
    let end = cand.psi0(start + length, h)?;
    Ok(projective_distance(traj.terminal().v, end.v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenSolution {
    pub value: C64,
    pub vector: Vec2,
}

/// Eigenvalues by the quadratic formula and unit eigenvectors, larger
/// modulus first.
pub fn eigen_closed_form(m: &Mat2) -> Result<[EigenSolution; 2]> {
    let t = m.trace();
    let det = m.det();
    let disc = (t * t - det * 4.0).sqrt();
    let scale = m.max_abs().max(1.0);
    if disc.norm() < 1e-12 * scale {
        return Err(WkbError::Defective);
    }
    let a = (t + disc) * 0.5;
    let b = (t - disc) * 0.5;
    let big = if a.norm() >= b.norm() { a } else { b };
    let small = if big.norm() > 0.0 { det / big } else { t - big };
    let vec = |l: C64| -> Vec2 {
        let u = [m.get(0, 1), l - m.get(0, 0)];
        let w = [l - m.get(1, 1), m.get(1, 0)];
        let v = if vnorm(u) >= vnorm(w) { u } else { w };
        vscale(v, C64::new(1.0 / vnorm(v), 0.0))
    };
    Ok([
        EigenSolution {
            value: big,
            vector: vec(big),
        },
        EigenSolution {
            value: small,
            vector: vec(small),
        },
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourEstimate {
    pub value: C64,
    pub nodes: usize,
    /// Change between the last two estimates.
    pub error: f64,
    /// Estimates at 16, 32, ... nodes per turn.
    pub history: Vec<C64>,
}

pub const CONTOUR_MAX_NODES: usize = 1 << 16;

/// Nodes `center + r·e^{2πik/n}` for `k = 0..n·turns`, in traversal order.
pub fn circle_nodes(center: C64, radius: f64, n: usize, turns: u32) -> Vec<C64> {
    (0..n * turns as usize)
        .map(|k| center + C64::from_polar(radius, 2.0 * PI * k as f64 / n as f64))
        .collect()
}

/// `∮ f dz` over a circle traversed `turns` times with the periodic trapezoid
/// rule. `sample` receives the loop nodes in order, so it can continue a
/// multivalued integrand across the cut.
pub fn contour_integral<F>(mut sample: F, center: C64, radius: f64, turns: u32, tol: f64) -> Result<ContourEstimate>
where
    F: FnMut(&[C64]) -> Result<Vec<C64>>,
{
    if !(radius > 0.0) || turns == 0 {
        return Err(WkbError::InvalidInput(format!(
            "contour needs positive radius and turns, got {radius} and {turns}"
        )));
    }
    let mut estimate = |n: usize| -> Result<C64> {
        let nodes = circle_nodes(center, radius, n, turns);
        let vals = sample(&nodes)?;
        if vals.len() != nodes.len() {
            return Err(WkbError::InvalidInput("sampler returned the wrong number of values".into()));
        }
        let sum: C64 = nodes.iter().zip(&vals).map(|(z, f)| f * I * (z - center)).sum();
        Ok(sum * (2.0 * PI / n as f64))
    };
    let mut n = 16;
    let mut history = vec![estimate(n)?];
    loop {
        n *= 2;
        let cur = estimate(n)?;
        let err = (cur - history[history.len() - 1]).norm();
        history.push(cur);
        if err < tol {
            return Ok(ContourEstimate {
                value: cur,
                nodes: n * turns as usize,
                error: err,
                history,
            });
        }
        if n >= CONTOUR_MAX_NODES {
            return Err(WkbError::Quadrature(format!(
                "contour integral did not converge with {n} nodes per turn (last change {err:e})"
            )));
        }
    }
}

/// [`contour_integral`] for a single-valued integrand.
pub fn contour_integral_fn<F>(f: F, center: C64, radius: f64, turns: u32, tol: f64) -> Result<ContourEstimate>
where
    F: Fn(C64) -> C64,
{
    contour_integral(|zs: &[C64]| Ok(zs.iter().map(|&z| f(z)).collect()), center, radius, turns, tol)
}

/// `∮ ω_sign dz` with the momentum continued node to node from the branch.
pub fn omega_contour(branch: &MomentumBranch, sign: Sign, center: C64, radius: f64, turns: u32, tol: f64) -> Result<ContourEstimate> {
    let model = branch.model().clone();
    contour_integral(
        |zs: &[C64]| {
            let ps = branch.momentum_through(zs)?;
            zs.iter()
                .zip(&ps)
                .map(|(&z, &p)| crate::phase::omega_at(&model, z, p, sign))
                .collect()
        },
        center,
        radius,
        turns,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{wedge, ONE, ZERO};
    use crate::matrix::{FourierMatrix, TrigPoly};
    use crate::phase::eigen_pair;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn constant_eigenvector_propagates_by_eigenvalue() {
        let m = MatrixModel::Fourier(FourierMatrix::constant(Mat2::real(2.0, 1.0, 1.0, 1.0)).unwrap());
        let [big, _] = eigen_closed_form(&m.eval(ZERO)).unwrap();
        let init = ScaledVec2::new(ZERO, big.vector);
        let tr = propagate(&m, ZERO, init, 0.1, 20).unwrap();
        for k in 0..=20 {
            assert!(projective_distance(tr.direction(k), big.vector) < 1e-14);
            assert!((tr.log_magnitude(k) - k as f64 * big.value.norm().ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_backward_roundtrip() {
        let m = MatrixModel::harper(0.5, 0.0);
        let init = ScaledVec2::new(c(0.3, 0.2), [c(1.0, 0.5), c(-0.2, 2.0)]);
        let start = c(0.1, 0.0);
        let fwd = propagate(&m, start, init, 0.01, 150).unwrap();
        let back = propagate(&m, fwd.z(150), fwd.terminal(), 0.01, -150).unwrap();
        assert!((back.z(150) - start).norm() < 1e-12);
        let a = back.terminal().to_vec().unwrap();
        let b = init.to_vec().unwrap();
        let rel = vnorm([a[0] - b[0], a[1] - b[1]]) / vnorm(b);
        assert!(rel < 1e-10, "{rel}");
    }

    #[test]
    fn zero_potential_has_period_four() {
        let vals = scalar_recurrence(|_| ZERO, ZERO, ONE, c(2.0, 0.0), 0.1, 8);
        for k in 0..vals.len() - 4 {
            assert_eq!(vals[k], vals[k + 4]);
        }
        assert_eq!(vals[3], -vals[1]);
    }

    #[test]
    fn recurrence_matches_companion_propagation() {
        let v = TrigPoly::cosine(0.5, 0.0);
        let m = MatrixModel::harper(0.5, 0.0);
        let (z, h, n) = (c(0.05, 0.1), 0.01, 100);
        let (psi0, psim) = (c(1.0, 0.0), c(0.3, -0.4));
        let scal = scalar_recurrence(|z| v.eval(z), z, psi0, psim, h, n);
        let tr = propagate(&m, z, ScaledVec2::new(ZERO, [psi0, psim]), h, n as i64).unwrap();
        for k in 0..=n {
            let got = tr.values[k].to_vec().unwrap();
            let want = [scal[k + 1], scal[k]];
            let rel = vnorm([got[0] - want[0], got[1] - want[1]]) / vnorm(want);
            assert!(rel < 1e-12, "{k} {rel}");
        }
    }

    #[test]
    fn closed_form_examples() {
        let [a, b] = eigen_closed_form(&Mat2::real(2.0, 1.0, 1.0, 1.0)).unwrap();
        assert!((a.value.re - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((b.value.re - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-14);
        let [a, b] = eigen_closed_form(&Mat2::real(0.0, -1.0, 1.0, 0.0)).unwrap();
        assert!((a.value - I).norm() < 1e-14 && (b.value + I).norm() < 1e-14);
        assert_eq!(eigen_closed_form(&Mat2::real(1.0, 1.0, 0.0, 1.0)), Err(WkbError::Defective));
    }

    #[test]
    fn closed_form_matches_eigen_pair() {
        let model = Arc::new(MatrixModel::harper(0.5, 0.0));
        let b = MomentumBranch::new(model.clone(), c(0.25, 0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let z = c(rng.gen_range(0.05..0.45), rng.gen_range(-0.15..0.15));
            let m = model.eval(z);
            let sols = eigen_closed_form(&m).unwrap();
            assert!((sols[0].value * sols[1].value - 1.0).norm() < 1e-12);
            let e = eigen_pair(&b, z).unwrap();
            for sign in [Sign::Plus, Sign::Minus] {
                let lam = (I * e.p * sign.value()).exp();
                let s = sols.iter().min_by(|x, y| (x.value - lam).norm().total_cmp(&(y.value - lam).norm())).unwrap();
                assert!((s.value - lam).norm() < 1e-10);
                let r = e.r(sign);
                assert!(wedge(s.vector, r).norm() / vnorm(r) < 1e-10);
            }
        }
    }

    #[test]
    fn contour_basics() {
        let cc = c(0.3, -0.2);
        let r = contour_integral_fn(|z| (z - cc).inv(), cc, 0.5, 1, 1e-12).unwrap();
        assert!((r.value - 2.0 * PI * I).norm() < 1e-12);
        let r = contour_integral_fn(|z| (z * 3.0).exp(), cc, 0.5, 1, 1e-12).unwrap();
        assert!(r.value.norm() < 1e-12);
        // spectral convergence once resolved
        let errs: Vec<f64> = r.history.iter().map(|v| v.norm()).collect();
        assert!(errs[1] > 0.0 && errs[0] / errs[1] > 10.0);
    }

    #[test]
    fn harper_turning_point_contour() {
        let b = MomentumBranch::new(Arc::new(MatrixModel::harper(0.5, 0.0)), c(0.25, 0.0)).unwrap();
        let zt = c(0.0, 2f64.acosh() / (2.0 * PI));
        let r = omega_contour(&b, Sign::Plus, zt, 0.05, 2, 1e-10).unwrap();
        assert!((r.value + PI * I).norm() < 1e-8, "{}", r.value);
    }

    #[test]
    fn lattice_tracks_wkb_direction_at_first_order() {
        let b = MomentumBranch::new(Arc::new(MatrixModel::harper(0.5, 0.0)), c(0.25, 0.0)).unwrap();
        let start = c(0.1, 0.3);
        let ns = [50usize, 100, 200];
        let errs: Vec<f64> = ns.iter().map(|&n| propagation_vs_wkb(&b, Sign::Plus, start, 0.5, n).unwrap()).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.6..2.4).contains(&ratio), "{errs:?}");
        }
    }
}
