//! WKB candidates `Ψ₀±(z) = e^{±iθ(z)/h} V±(z)` and the diagnostics that
//! certify their order: residuals, `W = V⁻¹(z+h)V(z)`, `T = Ψ₀⁻¹(z+h)MΨ₀(z)`
//! and log-log slope fits.
//!
//! Exponentials are never formed globally. Everything that is compared
//! across `z` and `z+h` uses the local increments `Δθ = ∫_z^{z+h} p` and
//! `ΔG± = ∫_z^{z+h} ω±`, so large `|Im θ|/h` cannot overflow.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, WkbError};
use crate::geometry::VerticalCurve;
use crate::linalg::{vnorm, vscale, vsub, Mat2, ScaledVec2, Vec2, C64, I};
use crate::momentum::MomentumBranch;
use crate::phase::{omega_at, EigenPair, Sign};

/// Quadrature tolerance used for global integrals from `z0`.
pub const GLOBAL_TOL: f64 = 1e-12;

/// Everything about `z` and `z + h` that the diagnostics need.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub z: C64,
    pub h: f64,
    pub m: Mat2,
    pub p: C64,
    pub dp: C64,
    pub p_next: C64,
    pub at_z: EigenPair,
    pub at_next: EigenPair,
    /// `θ(z)` and `G±(z)` from `z0`.
    pub theta: C64,
    pub g: [C64; 2],
    /// Increments over `[z, z+h]`.
    pub dtheta: C64,
    pub dg: [C64; 2],
}

fn idx(sign: Sign) -> usize {
    match sign {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

/// Builds a frame. `p`, `θ` and `G±` are continued from the branch base
/// point to `z0`, then through `waypoints` to `z`.
pub fn frame(branch: &MomentumBranch, z0: C64, waypoints: &[C64], z: C64, h: f64) -> Result<Frame> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(WkbError::InvalidInput(format!("h must be positive, got {h}")));
    }
    let model = branch.model().clone();
    let mut nodes = vec![z0];
    nodes.extend_from_slice(waypoints);
    nodes.push(z);
    let track = branch.track(&nodes)?;
    let start = track.index_of(z0, 0).expect("track passes through z0");
    let f = |z: C64, p: C64| {
        Ok([
            p,
            omega_at(&model, z, p, Sign::Plus)?,
            omega_at(&model, z, p, Sign::Minus)?,
        ])
    };
    let (_, global) = track.integrate_cumulative(start, &f, GLOBAL_TOL)?;
    let p = track.end().p;

    let local_branch = MomentumBranch::with_value(model.clone(), z, p)?;
    let local = local_branch.track(&[z + h])?;
    let (_, inc) = local.integrate_cumulative(0, &f, 1e-15 * h)?;
    let p_next = local.end().p;

    let m = model.try_eval(z)?;
    let m_next = model.try_eval(z + h)?;
    Ok(Frame {
        z,
        h,
        m,
        p,
        dp: local.nodes[0].dp,
        p_next,
        at_z: EigenPair::from_matrix(&m, z, p),
        at_next: EigenPair::from_matrix(&m_next, z + h, p_next),
        theta: global.value[0],
        g: [global.value[1], global.value[2]],
        dtheta: inc.value[0],
        dg: [inc.value[1], inc.value[2]],
    })
}

impl Frame {
    fn r_mat(e: &EigenPair) -> Mat2 {
        Mat2::from_cols(e.r_plus, e.r_minus)
    }

    /// `Ψ₀_sign(z)` as `exp(±iθ/h + G) · r(z)`.
    pub fn psi0(&self, sign: Sign) -> ScaledVec2 {
        let s = sign.value();
        ScaledVec2::new(I * self.theta * (s / self.h) + self.g[idx(sign)], self.at_z.r(sign))
    }

    /// `‖Ψ₀(z+h) − M(z)Ψ₀(z)‖ / ‖M(z)Ψ₀(z)‖` with the common factor removed.
    pub fn relative_residual(&self, sign: Sign) -> f64 {
        let s = sign.value();
        let step = (I * self.dtheta * (s / self.h) + self.dg[idx(sign)]).exp();
        let lhs = vscale(self.at_next.r(sign), step);
        let rhs = self.m.mul_vec(self.at_z.r(sign));
        vnorm(vsub(lhs, rhs)) / vnorm(rhs)
    }

    /// `R(z+h)⁻¹ X` for `R = (r⁺ r⁻)`.
    fn solve_next(&self, x: Mat2) -> Result<Mat2> {
        let r = Self::r_mat(&self.at_next);
        let det = r.det();
        if !(det.norm() > 0.0) {
            return Err(WkbError::Degenerate(format!(
                "eigenvector matrix is singular at z = {}",
                self.z + self.h
            )));
        }
        Ok(r.adjugate().scale(det.inv()) * x)
    }

    /// `W = V(z+h)⁻¹ V(z)` with `V = (V⁺ V⁻)`.
    pub fn w_matrix(&self) -> Result<Mat2> {
        let k = self.solve_next(Self::r_mat(&self.at_z))?;
        let mut w = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                w.0[i][j] = k.0[i][j] * (self.g[j] - self.g[i] - self.dg[i]).exp();
            }
        }
        Ok(w)
    }

    /// `T` with the off-diagonal factors `e^{∓2iθ(z)/h}` removed analytically.
    /// Route A builds it from `R(z+h)⁻¹ M R(z)`.
    pub fn t_stripped(&self) -> Result<Mat2> {
        let k = self.solve_next(self.m * Self::r_mat(&self.at_z))?;
        let e = [
            I * self.dtheta / self.h + self.dg[0],
            -I * self.dtheta / self.h + self.dg[1],
        ];
        let mut t = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                t.0[i][j] = k.0[i][j] * (self.g[j] - self.g[i] - e[i]).exp();
            }
        }
        Ok(t)
    }

    /// Route B: the same stripped `T` from `W`.
    pub fn t_stripped_from_w(&self) -> Result<Mat2> {
        let w = self.w_matrix()?;
        let ph = [I * self.p, -I * self.p];
        let th = [-I * self.dtheta / self.h, I * self.dtheta / self.h];
        let mut t = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                t.0[i][j] = w.0[i][j] * (th[i] + ph[j]).exp();
            }
        }
        Ok(t)
    }

    /// Full `T`, when the exponentials fit in a double.
    pub fn t_matrix(&self) -> Result<Option<Mat2>> {
        let mut t = self.t_stripped()?;
        let f = (-I * self.theta * (2.0 / self.h)).exp();
        t.0[0][1] *= f;
        t.0[1][0] /= f;
        Ok(t.is_finite().then_some(t))
    }

    pub fn diagnostics(&self) -> Result<Diagnostics> {
        let w = self.w_matrix()?;
        let t = self.t_stripped()?;
        let tb = self.t_stripped_from_w()?;
        let half = I * self.h * self.dp * 0.5;
        Ok(Diagnostics {
            t11: (t.get(0, 0) - 1.0).norm(),
            t22: (t.get(1, 1) - 1.0).norm(),
            t12_stripped: t.get(0, 1).norm(),
            t21_stripped: t.get(1, 0).norm(),
            w11: (w.get(0, 0) * (-half).exp() - 1.0).norm(),
            w22: (w.get(1, 1) * half.exp() - 1.0).norm(),
            w12: w.get(0, 1).norm(),
            w21: w.get(1, 0).norm(),
            residual_plus: self.relative_residual(Sign::Plus),
            residual_minus: self.relative_residual(Sign::Minus),
            route_mismatch: (t - tb).max_abs(),
        })
    }
}

/// Magnitudes whose `h`-scaling certifies the asymptotic orders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub t11: f64,
    pub t22: f64,
    pub t12_stripped: f64,
    pub t21_stripped: f64,
    pub w11: f64,
    pub w22: f64,
    pub w12: f64,
    pub w21: f64,
    pub residual_plus: f64,
    pub residual_minus: f64,
    pub route_mismatch: f64,
}

impl Diagnostics {
    pub const NAMES: [&'static str; 10] = [
        "t11",
        "t22",
        "t12_stripped",
        "t21_stripped",
        "w11",
        "w22",
        "w12",
        "w21",
        "residual_plus",
        "residual_minus",
    ];

    /// Expected power of `h`, keyed like [`Diagnostics::NAMES`].
    pub fn expected_order(name: &str) -> f64 {
        match name {
            "t11" | "t22" | "w11" | "w22" => 2.0,
            _ => 1.0,
        }
    }

    pub fn get(&self, name: &str) -> f64 {
        match name {
            "t11" => self.t11,
            "t22" => self.t22,
            "t12_stripped" => self.t12_stripped,
            "t21_stripped" => self.t21_stripped,
            "w11" => self.w11,
            "w22" => self.w22,
            "w12" => self.w12,
            "w21" => self.w21,
            "residual_plus" => self.residual_plus,
            "residual_minus" => self.residual_minus,
            _ => f64::NAN,
        }
    }
}

/// A WKB candidate: branch, sign, normalization point and path policy.
#[derive(Debug, Clone)]
pub struct WkbCandidate {
    pub branch: MomentumBranch,
    pub sign: Sign,
    pub z0: C64,
    /// Intermediate nodes between `z0` and the evaluation point.
    pub waypoints: Vec<C64>,
}

impl WkbCandidate {
    pub fn new(branch: MomentumBranch, sign: Sign, z0: C64) -> Result<Self> {
        let r0 = crate::phase::eigen_pair(&branch, z0)?.r(sign);
        if vnorm(r0) < 1e-13 {
            return Err(WkbError::InvalidNormalization { z: z0 });
        }
        Ok(WkbCandidate {
            branch,
            sign,
            z0,
            waypoints: Vec::new(),
        })
    }

    pub fn frame(&self, z: C64, h: f64) -> Result<Frame> {
        frame(&self.branch, self.z0, &self.waypoints, z, h)
    }

    pub fn psi0(&self, z: C64, h: f64) -> Result<ScaledVec2> {
        Ok(self.frame(z, h)?.psi0(self.sign))
    }

    pub fn relative_residual(&self, z: C64, h: f64) -> Result<f64> {
        Ok(self.frame(z, h)?.relative_residual(self.sign))
    }
}

/// `det(Ψ₀⁺ Ψ₀⁻)`; the `θ` factors cancel, leaving `e^{G₊+G₋} det(r⁺ r⁻)`.
pub fn psi0_det(f: &Frame) -> C64 {
    (f.g[0] + f.g[1]).exp() * f.at_z.det()
}

pub fn w_matrix(branch: &MomentumBranch, z: C64, h: f64, z0: C64) -> Result<Mat2> {
    frame(branch, z0, &[], z, h)?.w_matrix()
}

/// `T`, or an overflow error when `e^{±2iθ/h}` does not fit; use
/// [`Frame::t_stripped`] in that case.
pub fn t_matrix(branch: &MomentumBranch, z: C64, h: f64, z0: C64) -> Result<Mat2> {
    frame(branch, z0, &[], z, h)?
        .t_matrix()?
        .ok_or(WkbError::Range { z })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub h_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Geometric grid of `n` step sizes from `10^{hi_exp}` down to `10^{lo_exp}`.
pub fn geometric_h_grid(hi_exp: f64, lo_exp: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 10f64.powf(hi_exp + (lo_exp - hi_exp) * k as f64 / (n - 1) as f64))
        .collect()
}

/// Eight points from `10^{−1.5}` to `10^{−3}`.
pub fn default_h_grid() -> Vec<f64> {
    geometric_h_grid(-1.5, -3.0, 8)
}

/// Least-squares line through `(ln h, ln value)`; non-positive or non-finite values are dropped.
pub fn scaling_fit(h_grid: &[f64], values: &[f64]) -> Result<ScalingReport> {
    if h_grid.len() != values.len() {
        return Err(WkbError::InvalidInput("h grid and values differ in length".into()));
    }
    if h_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(WkbError::InvalidInput("h grid must be strictly decreasing".into()));
    }
    let pts: Vec<(f64, f64, f64, f64)> = h_grid
        .iter()
        .zip(values)
        .filter(|(h, v)| **h > 0.0 && **v > 0.0 && v.is_finite())
        .map(|(&h, &v)| (h, v, h.ln(), v.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(WkbError::InvalidInput(format!(
            "scaling fit needs at least 4 usable points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.2).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.3).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.2 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.2 - mx) * (p.3 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.3 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(ScalingReport {
        h_grid: pts.iter().map(|p| p.0).collect(),
        values: pts.iter().map(|p| p.1).collect(),
        slope,
        intercept,
        r_squared,
    })
}

/// Evaluates `measure` on the grid (in parallel) and fits the slope.
pub fn scaling_fit_with<F>(measure: F, h_grid: &[f64]) -> Result<ScalingReport>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let values = h_grid.par_iter().map(|&h| measure(h)).collect::<Result<Vec<_>>>()?;
    scaling_fit(h_grid, &values)
}

/// One fitted slope per diagnostic at a fixed point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    pub z: C64,
    pub z0: C64,
    pub fits: Vec<(String, ScalingReport)>,
    pub max_route_mismatch: f64,
}

/// Fits every diagnostic against `h` at `z`.
pub fn order_report(branch: &MomentumBranch, z: C64, z0: C64, h_grid: &[f64]) -> Result<OrderReport> {
    let diags = h_grid
        .par_iter()
        .map(|&h| frame(branch, z0, &[], z, h)?.diagnostics())
        .collect::<Result<Vec<_>>>()?;
    let mut fits = Vec::new();
    for name in Diagnostics::NAMES {
        let values: Vec<f64> = diags.iter().map(|d| d.get(name)).collect();
        fits.push((name.to_string(), scaling_fit(h_grid, &values)?));
    }
    Ok(OrderReport {
        z,
        z0,
        fits,
        max_route_mismatch: diags.iter().map(|d| d.route_mismatch).fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSample {
    pub y: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    pub h: f64,
    pub samples: Vec<ProfileSample>,
    pub max_residual: f64,
    /// `max_residual / (h · max(1 + |z|))`.
    pub c_fit: f64,
    /// Fitted rates `κ` in `residual ∝ e^{−κ|y|}` on the upper and lower tails.
    pub decay_up: Option<f64>,
    pub decay_down: Option<f64>,
}

fn tail_rate(samples: &[ProfileSample], upper: bool, from: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| if upper { s.y >= from } else { s.y <= -from })
        .filter(|s| s.residual > 0.0)
        .map(|s| (s.y.abs(), s.residual.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(-sxy / sxx)
}

/// Relative residual of `Ψ₀_sign` sampled along `curve`.
///
/// Only local quantities enter the residual, so each sample continues `p`
/// from the branch base point independently.
pub fn global_residual_profile(
    branch: &MomentumBranch,
    sign: Sign,
    curve: &VerticalCurve,
    h: f64,
    samples_per_unit: usize,
) -> Result<ProfileReport> {
    let points: Vec<C64> = curve.samples(samples_per_unit).into_iter().map(|s| s.0).collect();
    let ps = branch.momentum_through(&points)?;
    let samples = points
        .par_iter()
        .zip(ps.par_iter())
        .map(|(&z, &p)| {
            let b = MomentumBranch::with_value(branch.model().clone(), z, p)?;
            let f = frame(&b, z, &[], z, h)?;
            Ok(ProfileSample {
                y: z.im,
                residual: f.relative_residual(sign),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_residual = samples.iter().map(|s| s.residual).fold(0.0, f64::max);
    let weight = points.iter().map(|z| 1.0 + z.norm()).fold(1.0, f64::max);
    let top = samples.iter().map(|s| s.y).fold(f64::NEG_INFINITY, f64::max);
    let bottom = samples.iter().map(|s| s.y).fold(f64::INFINITY, f64::min);
    Ok(ProfileReport {
        h,
        max_residual,
        c_fit: max_residual / (h * weight),
        decay_up: tail_rate(&samples, true, 0.5 * top.max(0.0)),
        decay_down: tail_rate(&samples, false, 0.5 * (-bottom).max(0.0)),
        samples,
    })
}

/// `Ψ₀` components in a form that can be compared with a propagated solution: unit direction and log-norm.
pub fn psi0_direction(f: &Frame, sign: Sign) -> (Vec2, f64) {
    let s = f.psi0(sign);
    (s.direction(), s.log_norm())
}
