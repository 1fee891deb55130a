//! Eigenvector fields `r±`, `l±`, the differentials `Ω± = ω± dz`, their
//! integrals and residues, normalized eigenvectors `V±` and the limits of
//! `ω±` as `Im z → ±∞`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WkbError};
use crate::linalg::{dot, Mat2, ScaledVec2, Vec2, C64, I};
use crate::matrix::{MatrixModel, Side};
use crate::momentum::{infinity_momentum, MomentumBranch, DEFAULT_Y};
use crate::roots::{find_zeros, Rect, ZeroSearch};

/// Selects `Ω₊` / `V⁺` / `e^{+ip}` or their minus counterparts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl FromStr for Sign {
    type Err = WkbError;
    fn from_str(s: &str) -> Result<Sign> {
        match s {
            "+" | "plus" | "p" => Ok(Sign::Plus),
            "-" | "minus" | "m" => Ok(Sign::Minus),
            other => Err(WkbError::InvalidInput(format!("unknown sign {other:?} (expected + or -)"))),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// `r±` (columns) and `l±` (rows) at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub z: C64,
    pub p: C64,
    pub r_plus: Vec2,
    pub r_minus: Vec2,
    pub l_plus: Vec2,
    pub l_minus: Vec2,
}

impl EigenPair {
    /// `r± = (M₁₂, e^{±ip} − M₁₁)`, `l± = (e^{∓ip} − M₁₁, −M₁₂)`.
    pub fn from_matrix(m: &Mat2, z: C64, p: C64) -> Self {
        let (m12, a_plus, a_minus) = (m.get(0, 1), shifted(m, p, Sign::Plus), shifted(m, p, Sign::Minus));
        EigenPair {
            z,
            p,
            r_plus: [m12, a_plus],
            r_minus: [m12, a_minus],
            l_plus: [a_minus, -m12],
            l_minus: [a_plus, -m12],
        }
    }

    pub fn r(&self, sign: Sign) -> Vec2 {
        match sign {
            Sign::Plus => self.r_plus,
            Sign::Minus => self.r_minus,
        }
    }

    pub fn l(&self, sign: Sign) -> Vec2 {
        match sign {
            Sign::Plus => self.l_plus,
            Sign::Minus => self.l_minus,
        }
    }

    /// `det(r⁺ r⁻)`.
    pub fn det(&self) -> C64 {
        Mat2::from_cols(self.r_plus, self.r_minus).det()
    }

    /// Largest relative defect among the eigen-relations and the pairing identities.
    pub fn identity_defect(&self, m: &Mat2) -> f64 {
        let e = (I * self.p).exp();
        let ei = (-I * self.p).exp();
        let scale = m.norm().max(1.0) * (1.0 + e.norm() + ei.norm());
        let vrel = |a: Vec2, b: Vec2, s: f64| {
            let d = [a[0] - b[0], a[1] - b[1]];
            (d[0].norm() + d[1].norm()) / s
        };
        let rp = self.r_plus;
        let rm = self.r_minus;
        let lp = self.l_plus;
        let lm = self.l_minus;
        let nr = |v: Vec2| (v[0].norm() + v[1].norm()).max(f64::MIN_POSITIVE);
        let det = self.det();
        let det_scale = nr(rp) * nr(rm);
        let pairing = Mat2::from_rows(lp, [-lm[0], -lm[1]]) * Mat2::from_cols(rp, rm);
        [
            vrel(m.mul_vec(rp), [rp[0] * e, rp[1] * e], scale * nr(rp)),
            vrel(m.mul_vec(rm), [rm[0] * ei, rm[1] * ei], scale * nr(rm)),
            vrel(m.left_mul(lp), [lp[0] * e, lp[1] * e], scale * nr(lp)),
            vrel(m.left_mul(lm), [lm[0] * ei, lm[1] * ei], scale * nr(lm)),
            dot(lp, rm).norm() / det_scale,
            dot(lm, rp).norm() / det_scale,
            (dot(lp, rp) - det).norm() / det_scale,
            (dot(lm, rm) + det).norm() / det_scale,
            (pairing - Mat2::identity().scale(det)).max_abs() / det_scale,
            (det + I * 2.0 * m.get(0, 1) * self.p.sin()).norm() / det_scale,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// `e^{±ip} − M₁₁`, or the equal `M₂₂ − e^{∓ip}` when `e^{±ip}` is the larger
/// exponential (the first form then cancels catastrophically).
fn shifted(m: &Mat2, p: C64, sign: Sign) -> C64 {
    let e = (I * p * sign.value()).exp();
    let ei = (-I * p * sign.value()).exp();
    if e.norm() > ei.norm() {
        m.get(1, 1) - ei
    } else {
        e - m.get(0, 0)
    }
}

/// Derivative of [`shifted`] in the matching form.
fn shifted_deriv(dm: &Mat2, p: C64, dp: C64, sign: Sign) -> C64 {
    let sg = sign.value();
    let e = (I * p * sg).exp();
    let ei = (-I * p * sg).exp();
    if e.norm() > ei.norm() {
        dm.get(1, 1) + I * dp * ei * sg
    } else {
        I * dp * e * sg - dm.get(0, 0)
    }
}

pub fn eigen_pair(branch: &MomentumBranch, z: C64) -> Result<EigenPair> {
    let p = branch.momentum_at(z)?;
    let m = branch.model().try_eval(z)?;
    Ok(EigenPair::from_matrix(&m, z, p))
}

/// `ω_sign(z)` from the closed form, given `p(z)` on the branch.
pub fn omega_at(model: &MatrixModel, z: C64, p: C64, sign: Sign) -> Result<C64> {
    let m = model.try_eval(z)?;
    let dm = model.deriv(z);
    let s = p.sin();
    let m12 = m.get(0, 1);
    if s.norm() < 1e-13 {
        return Err(WkbError::PoleProximity { z });
    }
    if m12.norm() < 1e-14 * m.max_abs().max(1.0) {
        return Err(WkbError::PoleProximity { z });
    }
    let dp = -dm.trace() / (s * 2.0);
    let sg = sign.value();
    let bracket = shifted(&m, p, sign.flip()) * dm.get(0, 1) / m12 - shifted_deriv(&dm, p, dp, sign);
    Ok(-I * dp * (sg * 0.5) + bracket * sg / (I * s * 2.0))
}

pub fn omega_density(branch: &MomentumBranch, z: C64, sign: Sign) -> Result<C64> {
    let p = branch.momentum_at(z)?;
    omega_at(branch.model(), z, p, sign)
}

/// `ω₊ + ω₋ + (ln(−2i M₁₂ sin p))′`; vanishes identically.
pub fn omega_sum_at(model: &MatrixModel, z: C64, p: C64) -> Result<C64> {
    let wp = omega_at(model, z, p, Sign::Plus)?;
    let wm = omega_at(model, z, p, Sign::Minus)?;
    let m = model.eval(z);
    let dm = model.deriv(z);
    let dp = -dm.trace() / (p.sin() * 2.0);
    Ok(wp + wm + dm.get(0, 1) / m.get(0, 1) + dp * p.cos() / p.sin())
}

pub fn omega_sum_check(branch: &MomentumBranch, z: C64) -> Result<C64> {
    let p = branch.momentum_at(z)?;
    omega_sum_at(branch.model(), z, p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseIntegral {
    pub sign: Sign,
    pub path: Vec<C64>,
    pub value: C64,
    pub error_estimate: f64,
}

/// `∫ Ω_sign` along `path`, with `p` continued from the branch base point to `path[0]` first.
pub fn phase_integral(branch: &MomentumBranch, path: &[C64], sign: Sign, tol: f64) -> Result<PhaseIntegral> {
    if path.is_empty() {
        return Err(WkbError::InvalidInput("phase integral needs at least one path node".into()));
    }
    let track = branch.track(path)?;
    let start = track.index_of(path[0], 0).expect("track passes through path start");
    let model = branch.model().clone();
    let f = |z: C64, p: C64| Ok([omega_at(&model, z, p, sign)?]);
    let (_, q) = track
        .integrate_cumulative(start, &f, tol)
        .map_err(|e| e.context("phase integral"))?;
    Ok(PhaseIntegral {
        sign,
        path: path.to_vec(),
        value: q.value[0],
        error_estimate: q.error,
    })
}

/// Companion-matrix check: `Ω₊ = −½ d ln sin p` there, so `exp(∫Ω₊)` along
/// `path` should equal `√(sin p(z₀)/sin p(z))` with the square root continued
/// along the path. Returns both sides.
pub fn scalar_bridge(branch: &MomentumBranch, path: &[C64], tol: f64) -> Result<(C64, C64)> {
    let lhs = phase_integral(branch, path, Sign::Plus, tol)?.value.exp();
    let track = branch.track(path)?;
    let start = track.index_of(path[0], 0).expect("track passes through path start");
    let s0 = track.nodes[start].p.sin();
    let mut root = C64::new(1.0, 0.0);
    for node in &track.nodes[start..] {
        let cand = (s0 / node.p.sin()).sqrt();
        root = if (cand - root).norm() <= (cand + root).norm() { cand } else { -cand };
    }
    Ok((lhs, root))
}

/// `V(z) = exp(∫_{z0}^{z} Ω) r(z)` kept as `exp(log_scale) · r`.
pub fn normalized_eigenvector(
    branch: &MomentumBranch,
    z0: C64,
    z: C64,
    sign: Sign,
    path: &[C64],
    tol: f64,
) -> Result<ScaledVec2> {
    let r0 = eigen_pair(branch, z0)?.r(sign);
    if r0[0].norm() + r0[1].norm() < 1e-13 {
        return Err(WkbError::InvalidNormalization { z: z0 });
    }
    let mut nodes = vec![z0];
    nodes.extend_from_slice(path);
    nodes.push(z);
    let track = branch.track(&nodes)?;
    let start = track.index_of(z0, 0).expect("track passes through z0");
    let model = branch.model().clone();
    let f = |z: C64, p: C64| Ok([omega_at(&model, z, p, sign)?]);
    let (_, q) = track.integrate_cumulative(start, &f, tol)?;
    let end = track.end();
    let m = model.try_eval(z)?;
    let r = EigenPair::from_matrix(&m, z, end.p).r(sign);
    Ok(ScaledVec2::new(q.value[0], r))
}

/// What kind of point a residue was taken at, and the value it should have.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleKind {
    /// Simple turning point with `M₁₂ ≠ 0`.
    TurningPoint,
    /// Turning point where `M₁₂` also vanishes.
    TurningPointM12Zero,
    /// Zero of `M₁₂` of the given order, `r_sign` vanishing or not.
    M12Zero { order: usize, r_vanishes: bool },
    Regular,
}

impl PoleKind {
    pub fn expected(self) -> f64 {
        match self {
            PoleKind::TurningPoint => -0.5,
            PoleKind::TurningPointM12Zero => -1.5,
            PoleKind::M12Zero { order, r_vanishes } => {
                if r_vanishes {
                    -(order as f64)
                } else {
                    0.0
                }
            }
            PoleKind::Regular => 0.0,
        }
    }

    /// Values for higher-order zeros extrapolate the simple-zero statement.
    pub fn experimental(self) -> bool {
        matches!(self, PoleKind::M12Zero { order, .. } if order > 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidueResult {
    pub center: C64,
    pub sign: Sign,
    pub loop_radius: f64,
    pub turns: u32,
    pub value: C64,
    pub kind: PoleKind,
    pub expected: f64,
    pub experimental: bool,
    /// `|p| mismatch` after one loop; large at turning points.
    pub closure_defect: f64,
    pub nodes: usize,
    /// Difference between the last two trapezoid estimates.
    pub error_estimate: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ResidueOptions {
    pub radius: Option<f64>,
    pub turns: Option<u32>,
    pub tol: f64,
    pub max_nodes: usize,
}

impl Default for ResidueOptions {
    fn default() -> Self {
        ResidueOptions {
            radius: None,
            turns: None,
            tol: 1e-10,
            max_nodes: 1 << 16,
        }
    }
}

const NEAR_CENTER: f64 = 1e-3;

fn m12_zeros(model: &MatrixModel, rect: &Rect) -> Result<Vec<(C64, usize)>> {
    if model.m12_is_zero() {
        return Ok(Vec::new());
    }
    let f = |z: C64| (model.eval(z).get(0, 1), model.deriv(z).get(0, 1));
    let zs = find_zeros(&f, rect, &ZeroSearch { cells: 20, ..Default::default() })?;
    Ok(zs.into_iter().map(|z| (z.z, z.multiplicity)).collect())
}

fn turning_zeros(model: &MatrixModel, rect: &Rect) -> Result<Vec<(C64, usize)>> {
    let f = |z: C64| {
        let t = model.trace(z);
        (t * t - 4.0, t * model.trace_deriv(z) * 2.0)
    };
    let zs = find_zeros(&f, rect, &ZeroSearch { cells: 20, ..Default::default() })?;
    Ok(zs.into_iter().map(|z| (z.z, z.multiplicity)).collect())
}

/// Classifies `center` and returns the distance to the nearest other singular point.
fn classify(branch: &MomentumBranch, center: C64, sign: Sign) -> Result<(PoleKind, f64)> {
    let model = branch.model();
    let rect = Rect::around(center, 0.5);
    let tps = turning_zeros(model, &rect)?;
    let m12s = m12_zeros(model, &rect)?;
    let near = |z: &C64| (z - center).norm() < NEAR_CENTER;
    let nearest_other = tps
        .iter()
        .chain(m12s.iter())
        .map(|(z, _)| *z)
        .filter(|z| !near(z))
        .map(|z| (z - center).norm())
        .fold(0.5, f64::min);
    let at_tp = tps.iter().any(|(z, _)| near(z));
    let m12_order: usize = m12s.iter().filter(|(z, _)| near(z)).map(|(_, m)| m).sum();
    let kind = if at_tp {
        if m12_order > 0 || model.m12_is_zero() {
            PoleKind::TurningPointM12Zero
        } else {
            PoleKind::TurningPoint
        }
    } else if m12_order > 0 {
        let m = model.try_eval(center)?;
        let p = branch.momentum_at(center)?;
        let e = (I * p * sign.value()).exp();
        let r_vanishes = (e - m.get(0, 0)).norm() < 1e-8 * (1.0 + e.norm());
        PoleKind::M12Zero {
            order: m12_order,
            r_vanishes,
        }
    } else {
        PoleKind::Regular
    };
    Ok((kind, nearest_other))
}

/// `(1/2πi) ∮ Ω_sign` on a circle around `center`, traversed twice when `p`
/// does not return to itself after one loop.
pub fn residue_at(branch: &MomentumBranch, center: C64, sign: Sign, opts: &ResidueOptions) -> Result<ResidueResult> {
    let (kind, nearest) = classify(branch, center, sign).map_err(|e| e.context("residue classification"))?;
    let radius = match opts.radius {
        Some(r) if r > 0.0 && r.is_finite() => r,
        Some(r) => return Err(WkbError::InvalidInput(format!("loop radius must be positive, got {r}"))),
        None => (0.5 * nearest).min(0.1),
    };
    let model = branch.model().clone();
    let start = center + radius;

    // Single loop closure test.
    let circle = |n: usize, turns: u32| -> Vec<C64> {
        (1..=n * turns as usize)
            .map(|k| center + C64::from_polar(radius, 2.0 * PI * k as f64 / n as f64))
            .collect()
    };
    let probe = circle(256, 1);
    let mut path = vec![start];
    path.extend_from_slice(&probe);
    let p_loop = branch.momentum_through(&path)?;
    let closure_defect = (p_loop[p_loop.len() - 1] - p_loop[0]).norm();
    let detected = if closure_defect < 1e-6 { 1 } else { 2 };
    let turns = match opts.turns {
        Some(t) if t != detected => {
            return Err(WkbError::TurnMismatch(format!(
                "requested {t} turn(s) but the single-loop closure defect is {closure_defect:e}"
            )))
        }
        _ => detected,
    };

    let estimate = |n: usize| -> Result<C64> {
        let mut nodes = vec![start];
        nodes.extend(circle(n, turns));
        nodes.pop();
        let ps = branch.momentum_through(&nodes)?;
        let mut sum = C64::new(0.0, 0.0);
        for (z, p) in nodes.iter().zip(&ps) {
            let dz = I * (z - center);
            sum += omega_at(&model, *z, *p, sign)? * dz;
        }
        Ok(sum * (2.0 * PI / n as f64) / (2.0 * PI * I))
    };

    let mut n = 64;
    let mut prev = estimate(n)?;
    loop {
        n *= 2;
        let cur = estimate(n)?;
        let diff = (cur - prev).norm();
        if diff < opts.tol {
            return Ok(ResidueResult {
                center,
                sign,
                loop_radius: radius,
                turns,
                value: cur,
                kind,
                expected: kind.expected(),
                experimental: kind.experimental(),
                closure_defect,
                nodes: n * turns as usize,
                error_estimate: diff,
            });
        }
        if n >= opts.max_nodes {
            return Err(WkbError::Quadrature(format!(
                "residue loop did not converge with {n} nodes (last change {diff:e})"
            )));
        }
        prev = cur;
    }
}

/// Measured `ω` at large `|Im z|` against its predicted limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaLimit {
    pub side: Side,
    pub sign: Sign,
    pub expected: C64,
    /// `|y|` sample heights and `ω` there.
    pub heights: Vec<f64>,
    pub values: Vec<C64>,
    pub residuals: Vec<f64>,
    /// `ln(r(Y)/r(Y+1))` from the first two heights.
    pub decay_exponent: f64,
    /// Whether the branch was negated to reach `s = +1`.
    pub negated: bool,
}

/// Predicted limit of `ω_sign` on `side` for an `s = +1` branch.
pub fn expected_omega_limit(model: &MatrixModel, side: Side, sign: Sign) -> Result<C64> {
    let fm = model
        .as_fourier()
        .ok_or_else(|| WkbError::InvalidInput("limits at infinity need a trigonometric matrix".into()))?;
    let n12 = fm.entry(0, 1).index_data(side)?.n as f64;
    let base = match side {
        Side::Up => PI * fm.trace_poly().index_data(side)?.n as f64,
        Side::Down => -PI * fm.entry(0, 0).index_data(side)?.n as f64,
    };
    let extra = match sign {
        Sign::Plus => 0.0,
        Sign::Minus => 2.0 * PI * n12 * side.orientation(),
    };
    Ok(I * (base + extra))
}

pub fn omega_infinity_limit(branch: &MomentumBranch, side: Side, sign: Sign, y: f64) -> Result<OmegaLimit> {
    let fit = infinity_momentum(branch, side, y)?;
    let negated = fit.s == -1;
    let b = if negated { branch.negated() } else { branch.clone() };
    let expected = expected_omega_limit(b.model(), side, sign)?;
    let heights = vec![y, y + 1.0, y + 2.0];
    let x = b.z_ref().re;
    let points: Vec<C64> = heights.iter().map(|h| C64::new(x, side.orientation() * h)).collect();
    let ps = b.momentum_through(&points)?;
    let values = points
        .iter()
        .zip(&ps)
        .map(|(z, p)| omega_at(b.model(), *z, *p, sign))
        .collect::<Result<Vec<_>>>()?;
    let residuals: Vec<f64> = values.iter().map(|w| (w - expected).norm()).collect();
    if !(residuals[0] < 1e-3) {
        return Err(WkbError::InsufficientHeight { y });
    }
    Ok(OmegaLimit {
        side,
        sign,
        expected,
        decay_exponent: (residuals[0] / residuals[1]).ln(),
        heights,
        values,
        residuals,
        negated,
    })
}

/// Default height for the limit measurement.
pub const LIMIT_Y: f64 = DEFAULT_Y;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vnorm;
    use crate::matrix::{FourierMatrix, Poly, PolynomialMatrix};
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn harper(mu: f64) -> MomentumBranch {
        MomentumBranch::new(Arc::new(MatrixModel::harper(0.5, mu)), c(0.25, 0.0)).unwrap()
    }

    fn constant() -> MomentumBranch {
        let m = FourierMatrix::constant(Mat2::real(2.0, 1.0, 1.0, 1.0)).unwrap();
        MomentumBranch::new(Arc::new(MatrixModel::Fourier(m)), c(0.0, 0.0)).unwrap()
    }

    fn linear_poly() -> Arc<MatrixModel> {
        Arc::new(MatrixModel::Polynomial(
            PolynomialMatrix::new([
                [Poly::real(&[2.0, 1.0]), Poly::real(&[0.0, 1.0])],
                [Poly::real(&[2.5, 1.0]), Poly::real(&[0.5, 1.0])],
            ])
            .unwrap(),
        ))
    }

    fn tp() -> C64 {
        c(0.0, (2.0f64).acosh() / (2.0 * PI))
    }

    #[test]
    fn constant_eigenvectors() {
        let b = constant();
        let e = eigen_pair(&b, c(0.3, 0.1)).unwrap();
        let lam = (3.0 - 5f64.sqrt()) / 2.0;
        assert!((e.r_plus[0] - 1.0).norm() < 1e-15);
        assert!((e.r_plus[1] - (lam - 2.0)).norm() < 1e-12);
        assert!(e.identity_defect(&b.model().eval(e.z)) < 1e-14);
        for s in [Sign::Plus, Sign::Minus] {
            assert!(omega_density(&b, c(0.7, -0.2), s).unwrap().norm() < 1e-15);
        }
    }

    #[test]
    fn vanishing_r_plus_at_m12_zero() {
        let model = linear_poly();
        let b = MomentumBranch::with_value(model, c(0.0, 0.0), -I * 2f64.ln()).unwrap();
        assert!(((I * b.p_ref()).exp() - 2.0).norm() < 1e-14);
        let e = eigen_pair(&b, c(0.0, 0.0)).unwrap();
        assert!(vnorm(e.r_plus) < 1e-15);
        assert!((e.r_minus[1] + 1.5).norm() < 1e-15 && e.r_minus[0].norm() < 1e-15);
    }

    #[test]
    fn harper_omega_matches_scalar_form() {
        let b = harper(0.0);
        for z in [c(0.3, 0.2), c(0.2, -0.4), c(0.27, 1.3)] {
            let p = b.momentum_at(z).unwrap();
            let dp = b.momentum_derivative_at(z, p).unwrap();
            let expect = -dp * p.cos() / (p.sin() * 2.0);
            for s in [Sign::Plus, Sign::Minus] {
                let w = omega_at(b.model(), z, p, s).unwrap();
                assert!((w - expect).norm() < 1e-12 * expect.norm().max(1.0));
            }
        }
    }

    #[test]
    fn sum_rule_and_pole_errors() {
        let b = harper(0.0);
        assert!(omega_sum_check(&b, c(0.31, 0.17)).unwrap().norm() < 1e-12);
        let lb = MomentumBranch::new(linear_poly(), c(1.0, 0.3)).unwrap();
        assert!(omega_sum_check(&lb, c(1.0, 0.3)).unwrap().norm() < 1e-12);
        let zb = MomentumBranch::new(linear_poly(), c(0.0, 0.0)).unwrap();
        assert!(matches!(
            omega_density(&zb, c(0.0, 0.0), Sign::Plus),
            Err(WkbError::PoleProximity { .. })
        ));
    }

    #[test]
    fn harper_phase_integral_is_log_sqrt_sin() {
        let b = harper(0.0);
        let path = [c(0.25, 0.0), c(0.35, 0.1), c(0.3, 0.6)];
        let q = phase_integral(&b, &path, Sign::Plus, 1e-12).unwrap();
        let p0 = b.p_ref();
        let p1 = b.momentum_along(&path[..2], path[2]).unwrap();
        // sin p stays away from zero on this path, so the principal root is continuous.
        let expect = (p0.sin() / p1.sin()).sqrt();
        assert!((q.value.exp() - expect).norm() < 1e-10, "{} vs {}", q.value.exp(), expect);
    }

    #[test]
    fn closed_loop_integral_vanishes() {
        let b = harper(0.0);
        let path = [c(0.25, 0.0), c(0.4, 0.0), c(0.4, 0.1), c(0.1, 0.1), c(0.25, 0.0)];
        let q = phase_integral(&b, &path, Sign::Minus, 1e-12).unwrap();
        assert!(q.value.norm() < 1e-11);
    }

    #[test]
    fn harper_turning_point_residue() {
        let b = harper(0.0);
        for s in [Sign::Plus, Sign::Minus] {
            let r = residue_at(&b, tp(), s, &ResidueOptions::default()).unwrap();
            assert_eq!(r.turns, 2);
            assert_eq!(r.kind, PoleKind::TurningPoint);
            assert!((r.value - r.expected).norm() < 1e-8, "{r:?}");
            assert!(r.closure_defect > 1e-3);
        }
        let r = residue_at(&b, tp(), Sign::Plus, &ResidueOptions { turns: Some(1), ..Default::default() });
        assert!(matches!(r, Err(WkbError::TurnMismatch(_))));
    }

    #[test]
    fn regular_m12_zero_residues() {
        let b = MomentumBranch::with_value(linear_poly(), c(0.0, 0.0), -I * 2f64.ln()).unwrap();
        let rp = residue_at(&b, c(0.0, 0.0), Sign::Plus, &ResidueOptions::default()).unwrap();
        let rm = residue_at(&b, c(0.0, 0.0), Sign::Minus, &ResidueOptions::default()).unwrap();
        assert_eq!(rp.turns, 1);
        assert!((rp.value + 1.0).norm() < 1e-8, "{rp:?}");
        assert!(rm.value.norm() < 1e-8, "{rm:?}");
        assert_eq!(rp.kind, PoleKind::M12Zero { order: 1, r_vanishes: true });
    }

    #[test]
    fn normalized_eigenvector_at_base_is_r() {
        let b = harper(0.0);
        let z0 = c(0.3, 0.1);
        let v = normalized_eigenvector(&b, z0, z0, Sign::Plus, &[], 1e-12).unwrap();
        let r = eigen_pair(&b, z0).unwrap().r_plus;
        let v = v.to_vec().unwrap();
        assert!((v[0] - r[0]).norm() + (v[1] - r[1]).norm() < 1e-15);
    }

    #[test]
    fn harper_limits_at_infinity() {
        let b = harper(0.3);
        let cases = [
            (Side::Up, Sign::Plus, c(0.0, PI)),
            (Side::Up, Sign::Minus, c(0.0, PI)),
            (Side::Down, Sign::Plus, c(0.0, -PI)),
            (Side::Down, Sign::Minus, c(0.0, -PI)),
        ];
        for (side, sign, expect) in cases {
            let lim = omega_infinity_limit(&b, side, sign, LIMIT_Y).unwrap();
            assert!((lim.expected - expect).norm() < 1e-15);
            assert!(lim.residuals[1] < 1e-9, "{lim:?}");
            let k = lim.decay_exponent / (2.0 * PI);
            assert!((k - 1.0).abs() < 0.1, "{side} {sign}: {k}");
        }
    }

    #[test]
    fn omega_periodic_at_height() {
        let b = harper(0.3).negated();
        let z = c(0.25, 3.5);
        let p0 = b.momentum_at(z).unwrap();
        let p1 = b.momentum_along(&[z], z + 1.0).unwrap();
        for s in [Sign::Plus, Sign::Minus] {
            let w0 = omega_at(b.model(), z, p0, s).unwrap();
            let w1 = omega_at(b.model(), z + 1.0, p1, s).unwrap();
            assert!((w0 - w1).norm() < 1e-8);
        }
    }
}
