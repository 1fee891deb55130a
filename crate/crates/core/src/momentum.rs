//! Complex momentum `p(z)` with `2 cos p = tr M(z)`: root selection,
//! continuation along polylines, turning points and behavior at infinity.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Result, WkbError};
use crate::linalg::{C64, I};
use crate::matrix::{MatrixModel, Side};
use crate::quad::{integrate_segment, Quadrature};
use crate::roots::{find_zeros, Rect, ZeroSearch};

/// Relative distance of `tr M` from `±2` below which a point counts as a turning point.
pub const TURNING_TOL: f64 = 1e-9;
/// Default bound on the continuation step length.
pub const MAX_STEP: f64 = 0.05;
const MIN_STEP: f64 = 1e-12;
const MAX_DP: f64 = 0.1;
const TWO_PI: f64 = 2.0 * PI;

/// Larger-modulus root `w` of `w² − t w + 1 = 0`; the eigenvalues of `M` are `w` and `1/w`.
fn big_eigenvalue(t: C64) -> C64 {
    let s = (t * t - 4.0).sqrt();
    let a = (t + s) * 0.5;
    let b = (t - s) * 0.5;
    if a.norm() >= b.norm() {
        a
    } else {
        b
    }
}

/// The solutions of `2 cos p = t` are `±q + 2πk`.
pub fn momentum_base(t: C64) -> C64 {
    -I * big_eigenvalue(t).ln()
}

fn wrap_re(p: C64) -> C64 {
    let mut re = p.re.rem_euclid(TWO_PI);
    if re > PI {
        re -= TWO_PI;
    }
    C64::new(re, p.im)
}

/// Default root: `Im p ≥ 0`, `Re p ∈ (−π, π]`; among real roots the one with `Re p ∈ [0, π]`.
pub fn default_momentum(t: C64) -> C64 {
    let p = wrap_re(-momentum_base(t));
    if p.im.abs() <= 1e-15 * p.norm().max(1.0) {
        let p = C64::new(p.re, 0.0);
        if p.re < 0.0 {
            return wrap_re(-p);
        }
        return p;
    }
    p
}

/// Root of `2 cos p = t` nearest to `target`, and its distance to the next-nearest root.
pub fn nearest_momentum(t: C64, target: C64) -> (C64, f64) {
    let q = momentum_base(t);
    let mut cands = [C64::new(0.0, 0.0); 6];
    let mut n = 0;
    for base in [q, -q] {
        let k0 = ((target - base).re / TWO_PI).round();
        for dk in [-1.0, 0.0, 1.0] {
            cands[n] = base + TWO_PI * (k0 + dk);
            n += 1;
        }
    }
    cands.sort_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()));
    (cands[0], (cands[1] - cands[0]).norm())
}

fn is_turning(t: C64) -> bool {
    let scale = TURNING_TOL * t.norm().max(1.0);
    (t - 2.0).norm() < scale || (t + 2.0).norm() < scale
}

/// A node of a continuation track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackNode {
    pub z: C64,
    pub p: C64,
    pub dp: C64,
}

/// Momentum continued along a polyline; consecutive nodes are close enough
/// that `p` between them is the root nearest the linear prediction.
#[derive(Debug, Clone)]
pub struct Track {
    pub nodes: Vec<TrackNode>,
    model: Arc<MatrixModel>,
}

impl Track {
    pub fn end(&self) -> TrackNode {
        *self.nodes.last().expect("track has a node")
    }

    /// `p(z)` for `z` in the stretch between nodes `i` and `i + 1`.
    pub fn p_near(&self, i: usize, z: C64) -> Result<C64> {
        let n = self.nodes[i];
        let t = self.model.try_eval(z)?.trace();
        Ok(nearest_momentum(t, n.p + n.dp * (z - n.z)).0)
    }

    pub fn model(&self) -> &Arc<MatrixModel> {
        &self.model
    }

    /// Index of the first node at `z`, at or after `from`.
    pub fn index_of(&self, z: C64, from: usize) -> Option<usize> {
        (from..self.nodes.len()).find(|&i| self.nodes[i].z == z)
    }

    /// Running integrals of `f(z, p)` from node `start`, one entry per node
    /// from `start` on. The tolerance is shared out by segment length.
    pub fn integrate_cumulative<const N: usize, F>(
        &self,
        start: usize,
        f: &F,
        tol: f64,
    ) -> Result<(Vec<[C64; N]>, Quadrature<N>)>
    where
        F: Fn(C64, C64) -> Result<[C64; N]>,
    {
        let nodes = &self.nodes[start..];
        let total: f64 = nodes.windows(2).map(|w| (w[1].z - w[0].z).norm()).sum();
        let mut acc = Quadrature {
            value: [C64::new(0.0, 0.0); N],
            error: 0.0,
            evaluations: 0,
        };
        let mut running = vec![acc.value];
        for (k, w) in nodes.windows(2).enumerate() {
            let i = start + k;
            let g = |z: C64| f(z, self.p_near(i, z)?);
            let share = if total > 0.0 { tol * (w[1].z - w[0].z).norm() / total } else { tol };
            let q = integrate_segment(&g, w[0].z, w[1].z, share)?;
            for j in 0..N {
                acc.value[j] += q.value[j];
            }
            acc.error += q.error;
            acc.evaluations += q.evaluations;
            running.push(acc.value);
        }
        Ok((running, acc))
    }
}

/// An analytic branch of `p`, defined by a regular base point and the value there.
#[derive(Debug, Clone)]
pub struct MomentumBranch {
    model: Arc<MatrixModel>,
    z_ref: C64,
    p_ref: C64,
    max_step: f64,
}

impl MomentumBranch {
    /// Branch through `z_ref` with the default root there.
    pub fn new(model: Arc<MatrixModel>, z_ref: C64) -> Result<Self> {
        let t = model.try_eval(z_ref)?.trace();
        Self::with_value(model, z_ref, default_momentum(t))
    }

    pub fn with_value(model: Arc<MatrixModel>, z_ref: C64, p_ref: C64) -> Result<Self> {
        if !z_ref.is_finite() || !p_ref.is_finite() {
            return Err(WkbError::InvalidInput("branch base point and value must be finite".into()));
        }
        let t = model.try_eval(z_ref)?.trace();
        if is_turning(t) {
            return Err(WkbError::BranchAmbiguity { z: z_ref });
        }
        let defect = (p_ref.cos() * 2.0 - t).norm();
        if defect > 1e-12 * t.norm().max(1.0) {
            // Snap a slightly-off value to the exact root it designates.
            let (p, _) = nearest_momentum(t, p_ref);
            if (p - p_ref).norm() > 1e-6 {
                return Err(WkbError::InvalidInput(format!(
                    "p_ref = {p_ref} does not solve 2 cos p = tr M(z_ref) = {t}"
                )));
            }
            return Self::with_value(model, z_ref, p);
        }
        Ok(MomentumBranch {
            model,
            z_ref,
            p_ref,
            max_step: MAX_STEP,
        })
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step.clamp(1e-6, 1.0);
        self
    }

    pub fn model(&self) -> &Arc<MatrixModel> {
        &self.model
    }

    pub fn z_ref(&self) -> C64 {
        self.z_ref
    }

    pub fn p_ref(&self) -> C64 {
        self.p_ref
    }

    /// The companion branch `−p`.
    pub fn negated(&self) -> Self {
        MomentumBranch {
            p_ref: -self.p_ref,
            ..self.clone()
        }
    }

    /// Same branch re-anchored at `z`, reached along the straight segment.
    pub fn rebased(&self, z: C64) -> Result<Self> {
        let p = self.momentum_at(z)?;
        Ok(MomentumBranch {
            z_ref: z,
            p_ref: p,
            ..self.clone()
        })
    }

    /// Branch re-anchored at `z`, reached through `path` then a straight segment.
    pub fn rebased_along(&self, path: &[C64], z: C64) -> Result<Self> {
        let p = self.momentum_along(path, z)?;
        Ok(MomentumBranch {
            z_ref: z,
            p_ref: p,
            ..self.clone()
        })
    }

    pub fn max_step(&self) -> f64 {
        self.max_step
    }

    fn derivative_from(&self, z: C64, p: C64) -> Result<C64> {
        let dt = self.model.deriv(z).trace();
        let s = p.sin();
        if s.norm() < 1e-13 {
            return Err(WkbError::Singularity { z });
        }
        Ok(-dt / (s * 2.0))
    }

    /// Continues from `z_ref` along `z_ref → path[0] → path[1] → …`.
    pub fn track(&self, path: &[C64]) -> Result<Track> {
        let mut node = TrackNode {
            z: self.z_ref,
            p: self.p_ref,
            dp: self.derivative_from(self.z_ref, self.p_ref)?,
        };
        let mut nodes = vec![node];
        let mut dz_len = self.max_step;
        for &target in path {
            if !target.is_finite() {
                return Err(WkbError::InvalidInput(format!("non-finite path node {target}")));
            }
            while node.z != target {
                let remaining = (target - node.z).norm();
                let len = dz_len.min(remaining);
                let next_z = if len >= remaining {
                    target
                } else {
                    node.z + (target - node.z) * (len / remaining)
                };
                let t = self.model.try_eval(next_z)?.trace();
                if is_turning(t) {
                    return Err(WkbError::BranchAmbiguity { z: next_z });
                }
                let pred = node.p + node.dp * (next_z - node.z);
                let (cand, gap) = nearest_momentum(t, pred);
                if (cand - node.p).norm() < MAX_DP && (cand - pred).norm() < 0.25 * gap {
                    node = TrackNode {
                        z: next_z,
                        p: cand,
                        dp: self.derivative_from(next_z, cand)?,
                    };
                    nodes.push(node);
                    dz_len = (len * 2.0).min(self.max_step);
                } else {
                    dz_len = len * 0.5;
                    if dz_len < MIN_STEP {
                        return Err(WkbError::StepFailure { z: node.z });
                    }
                }
            }
        }
        Ok(Track {
            nodes,
            model: self.model.clone(),
        })
    }

    /// `p(z)` continued along the straight segment from `z_ref`.
    pub fn momentum_at(&self, z: C64) -> Result<C64> {
        Ok(self.track(&[z])?.end().p)
    }

    /// `p(z)` continued along `z_ref → path… → z`.
    pub fn momentum_along(&self, path: &[C64], z: C64) -> Result<C64> {
        let mut nodes = path.to_vec();
        nodes.push(z);
        Ok(self.track(&nodes)?.end().p)
    }

    /// Values of `p` at each point of `points`, continued through them in order.
    pub fn momentum_through(&self, points: &[C64]) -> Result<Vec<C64>> {
        let track = self.track(points)?;
        let mut out = Vec::with_capacity(points.len());
        let mut it = track.nodes.iter();
        for &z in points {
            let node = it.find(|n| n.z == z).expect("track visits every path node");
            out.push(node.p);
        }
        Ok(out)
    }

    /// `p′ = −(tr M)′ / (2 sin p)`.
    pub fn momentum_derivative(&self, z: C64) -> Result<C64> {
        let p = self.momentum_at(z)?;
        self.derivative_from(z, p)
    }

    pub fn momentum_derivative_at(&self, z: C64, p: C64) -> Result<C64> {
        self.derivative_from(z, p)
    }
}

/// A zero of `tr M ∓ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurningPoint {
    pub location: C64,
    /// `+2` or `−2`.
    pub trace_sign: i32,
    pub simple: bool,
    /// Coefficient in `p = p(z₀) + p₁ √(z − z₀) + …`; zero when not simple.
    pub p1: C64,
}

pub fn classify_turning_point(model: &MatrixModel, z: C64) -> TurningPoint {
    let t = model.trace(z);
    let dt = model.trace_deriv(z);
    let trace_sign = if t.re >= 0.0 { 2 } else { -2 };
    let simple = dt.norm() > 1e-8;
    let p1 = if !simple {
        C64::new(0.0, 0.0)
    } else if trace_sign == 2 {
        (-dt).sqrt()
    } else {
        dt.sqrt()
    };
    TurningPoint {
        location: z,
        trace_sign,
        simple,
        p1,
    }
}

/// Turning points in `region`, ordered by real then imaginary part.
pub fn find_turning_points(model: &MatrixModel, region: &Rect) -> Result<Vec<TurningPoint>> {
    find_turning_points_with(model, region, &ZeroSearch::default())
}

pub fn find_turning_points_with(model: &MatrixModel, region: &Rect, opts: &ZeroSearch) -> Result<Vec<TurningPoint>> {
    let f = |z: C64| {
        let t = model.trace(z);
        (t * t - 4.0, t * model.trace_deriv(z) * 2.0)
    };
    let zeros = find_zeros(&f, region, opts).map_err(|e| e.context("turning-point search"))?;
    Ok(zeros
        .into_iter()
        .map(|z| {
            let mut tp = classify_turning_point(model, z.z);
            tp.simple = tp.simple && z.multiplicity == 1;
            tp
        })
        .collect())
}

/// Fitted linear asymptote of a branch as `Im z → ±∞`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfinityMomentumData {
    pub side: Side,
    /// `s_u` or `s_d`.
    pub s: i32,
    pub n_t: i32,
    /// Branch of `i ln t_u` (or `i ln t_d`) the continuation lands on.
    pub log_leading: C64,
    /// Sample heights `|y|` and `|p − asymptote|` there.
    pub heights: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl InfinityMomentumData {
    /// `s (σ 2π n z + log_leading)` with `σ = ±1` for side u/d.
    pub fn asymptote(&self, z: C64) -> C64 {
        let sigma = self.side.orientation();
        (z * (sigma * TWO_PI * self.n_t as f64) + self.log_leading) * self.s as f64
    }
}

/// Default height for asymptotic fits.
pub const DEFAULT_Y: f64 = 3.0;

/// Fits `s` and the logarithm branch from `p` at heights `Y, Y+1, Y+2` above
/// (or below) `Re z_ref`.
pub fn infinity_momentum(branch: &MomentumBranch, side: Side, y: f64) -> Result<InfinityMomentumData> {
    let fm = branch
        .model()
        .as_fourier()
        .ok_or_else(|| WkbError::InvalidInput("asymptotics at infinity need a trigonometric matrix".into()))?;
    let idx = fm.trace_poly().index_data(side)?;
    if idx.n <= 0 {
        return Err(WkbError::Degenerate(format!("n_{side}(t) = {} is not positive", idx.n)));
    }
    let sigma = side.orientation();
    let x = branch.z_ref().re;
    let heights = [y, y + 1.0, y + 2.0];
    let points: Vec<C64> = heights.iter().map(|&h| C64::new(x, sigma * h)).collect();
    let ps = branch.momentum_through(&points)?;

    let fit = |s: f64| -> (f64, C64) {
        let mut worst: f64 = 0.0;
        let mut a_last = C64::new(0.0, 0.0);
        for (z, p) in points.iter().zip(&ps) {
            let a = p / s - z * (sigma * TWO_PI * idx.n as f64);
            let r = ((I * a).exp() * idx.leading - 1.0).norm();
            worst = worst.max(if r.is_finite() { r } else { f64::INFINITY });
            a_last = a;
        }
        (worst, a_last)
    };
    let (rp, ap) = fit(1.0);
    let (rm, am) = fit(-1.0);
    let (s, a, r) = if rp <= rm { (1, ap, rp) } else { (-1, am, rm) };
    if !(r < 1e-3) {
        return Err(WkbError::InsufficientHeight { y });
    }
    // Snap to the exact 2π-branch of i ln t_s.
    let exact = I * idx.leading.ln();
    let k = ((a - exact).re / TWO_PI).round();
    let log_leading = exact + TWO_PI * k;

    let mut data = InfinityMomentumData {
        side,
        s,
        n_t: idx.n,
        log_leading,
        heights: heights.to_vec(),
        residuals: Vec::new(),
    };
    data.residuals = points
        .iter()
        .zip(&ps)
        .map(|(z, p)| (p - data.asymptote(*z)).norm())
        .collect();
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat2;
    use crate::matrix::{FourierMatrix, Poly, PolynomialMatrix};

    fn harper() -> Arc<MatrixModel> {
        Arc::new(MatrixModel::harper(0.5, 0.0))
    }

    fn constant() -> Arc<MatrixModel> {
        Arc::new(MatrixModel::Fourier(
            FourierMatrix::constant(Mat2::real(2.0, 1.0, 1.0, 1.0)).unwrap(),
        ))
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn default_roots() {
        let p = default_momentum(c(3.0, 0.0));
        assert!((p - c(0.0, 0.962_423_650_119_206_9)).norm() < 1e-12, "{p}");
        let p = default_momentum(c(0.0, 0.0));
        assert!((p - c(PI / 2.0, 0.0)).norm() < 1e-15);
        for t in [c(0.3, -1.2), c(-5.0, 0.1), c(1.0, 0.0), c(-1.5, 0.0)] {
            let p = default_momentum(t);
            assert!((p.cos() * 2.0 - t).norm() < 1e-13);
            assert!(p.im >= 0.0 && p.re > -PI && p.re <= PI);
        }
    }

    #[test]
    fn constant_branch_is_constant() {
        let b = MomentumBranch::new(constant(), c(0.0, 0.0)).unwrap();
        for z in [c(1.0, 1.0), c(-3.0, 0.5), c(0.2, -2.0)] {
            assert!((b.momentum_at(z).unwrap() - c(0.0, 0.962_423_650_119_206_9)).norm() < 1e-12);
            assert_eq!(b.momentum_derivative(z).unwrap(), c(0.0, 0.0));
        }
    }

    #[test]
    fn harper_vertical_line_has_constant_real_part() {
        let b = MomentumBranch::new(harper(), c(0.25, 0.0)).unwrap();
        assert!((b.p_ref() - PI / 2.0).norm() < 1e-15);
        for y in [-4.0, -1.0, -0.3, 0.4, 2.0, 5.0] {
            let p = b.momentum_at(c(0.25, y)).unwrap();
            assert!((p.re - PI / 2.0).abs() < 1e-10, "y = {y}: {p}");
        }
        let dp = b.momentum_derivative(c(0.25, 0.0)).unwrap();
        assert!((dp + PI).norm() < 1e-12);
    }

    #[test]
    fn other_branch_is_negative() {
        let b = MomentumBranch::new(harper(), c(0.25, 0.0)).unwrap();
        let n = b.negated();
        for z in [c(0.3, 0.2), c(0.1, -0.7)] {
            let d = b.momentum_at(z).unwrap() + n.momentum_at(z).unwrap();
            assert!(d.norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let b = MomentumBranch::new(harper(), c(0.25, 0.0)).unwrap();
        let h = 1e-5;
        for z in [c(0.3, 0.25), c(0.2, -0.4), c(0.35, 1.1)] {
            let fd = (b.momentum_at(z + h).unwrap() - b.momentum_at(z - h).unwrap()) / (2.0 * h);
            let dp = b.momentum_derivative(z).unwrap();
            assert!((fd - dp).norm() / dp.norm() < 1e-6);
        }
    }

    #[test]
    fn loop_without_turning_point_closes() {
        let b = MomentumBranch::new(harper(), c(0.25, 0.0)).unwrap();
        let z0 = c(0.25, 0.0);
        let square = [c(0.4, 0.0), c(0.4, 0.15), c(0.1, 0.15), c(0.1, 0.0), z0];
        let p = b.momentum_along(&square[..4], z0).unwrap();
        assert!((p - b.p_ref()).norm() < 1e-9);
    }

    #[test]
    fn loop_around_turning_point_exchanges_sheets() {
        let tp = c(0.0, (2.0f64).acosh() / TWO_PI);
        let start = tp + 0.1;
        let b = MomentumBranch::new(harper(), start).unwrap();
        let loop_nodes: Vec<C64> = (1..=64)
            .map(|k| tp + C64::from_polar(0.1, TWO_PI * k as f64 / 64.0))
            .collect();
        let p = b.track(&loop_nodes).unwrap().end().p;
        let t = harper().trace(start);
        assert!((p.cos() * 2.0 - t).norm() < 1e-10);
        assert!((p - b.p_ref()).norm() > 1e-3);
        // tr = −2 there, so p(z0) = π and the loop maps p to 2π − p (mod 2π).
        let sum = p + b.p_ref();
        assert!((sum - TWO_PI * (sum.re / TWO_PI).round()).norm() < 1e-9, "{p} {}", b.p_ref());
    }

    #[test]
    fn turning_point_near_path_is_rejected() {
        let tp = c(0.0, (2.0f64).acosh() / TWO_PI);
        let b = MomentumBranch::new(harper(), c(-0.3, tp.im)).unwrap();
        let err = b.momentum_at(c(0.3, tp.im)).unwrap_err();
        assert!(matches!(err, WkbError::BranchAmbiguity { .. } | WkbError::StepFailure { .. }), "{err}");
    }

    #[test]
    fn harper_turning_points() {
        let region = Rect::new(-0.25, 0.75, -0.5, 0.5).unwrap();
        let tps = find_turning_points(&harper(), &region).unwrap();
        let a = (2.0f64).acosh() / TWO_PI;
        let expect = [(c(0.0, -a), -2), (c(0.0, a), -2), (c(0.5, -a), 2), (c(0.5, a), 2)];
        assert_eq!(tps.len(), 4, "{tps:?}");
        for (tp, (z, sign)) in tps.iter().zip(expect) {
            assert!((tp.location - z).norm() < 1e-12, "{tp:?}");
            assert_eq!(tp.trace_sign, sign);
            assert!(tp.simple);
            let dt = harper().trace_deriv(tp.location);
            assert!((tp.p1 * tp.p1 + dt * (sign / 2) as f64).norm() < 1e-12);
        }
        for tp in &tps {
            assert!(tps.iter().any(|o| (o.location - tp.location.conj()).norm() < 1e-8));
        }
    }

    #[test]
    fn harper_grid_line_roots_are_found() {
        let region = Rect::new(-0.5, 1.5, -0.5, 0.5).unwrap();
        let tps = find_turning_points(&harper(), &region).unwrap();
        // x ∈ {−0.5, 0, 0.5, 1, 1.5}, two heights each.
        assert_eq!(tps.len(), 10);
        assert!(tps.iter().all(|t| t.simple));
    }

    #[test]
    fn polynomial_turning_points() {
        let m = MatrixModel::Polynomial(
            PolynomialMatrix::new([
                [Poly::real(&[1.0, 1.0, 1.0]), Poly::real(&[0.0, 1.0])],
                [Poly::real(&[1.0, 1.0]), Poly::real(&[1.0])],
            ])
            .unwrap(),
        );
        // tr + 2 vanishes at −1/2 ± i√15/2, outside this box.
        let tps = find_turning_points(&m, &Rect::new(-2.0, 2.0, -1.0, 1.0).unwrap()).unwrap();
        assert_eq!(tps.len(), 2);
        assert!((tps[0].location + 1.0).norm() < 1e-12 && tps[1].location.norm() < 1e-12);
        assert!(tps.iter().all(|t| t.simple && t.trace_sign == 2));
    }

    #[test]
    fn constant_has_no_turning_points() {
        let tps = find_turning_points(&constant(), &Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap()).unwrap();
        assert!(tps.is_empty());
    }

    #[test]
    fn harper_infinity_fit() {
        let b = MomentumBranch::new(harper(), c(0.25, 0.0)).unwrap();
        let up = infinity_momentum(&b, Side::Up, DEFAULT_Y).unwrap();
        assert_eq!((up.s, up.n_t), (-1, 1));
        let up = infinity_momentum(&b.negated(), Side::Up, DEFAULT_Y).unwrap();
        assert_eq!((up.s, up.n_t), (1, 1));
        let down = infinity_momentum(&b, Side::Down, DEFAULT_Y).unwrap();
        assert_eq!((down.s, down.n_t), (1, 1));
        // residual ~ e^{-4πy} for μ = 0
        assert!(up.residuals.iter().all(|r| *r < 1e-12));
    }

    #[test]
    fn harper_momentum_derivative_at_height() {
        let b = MomentumBranch::new(harper(), c(0.25, 0.0)).unwrap().negated();
        let dp = b.momentum_derivative(c(0.25, 4.0)).unwrap();
        assert!((dp - TWO_PI).norm() < 1e-8);
        let z = c(0.25, 4.0);
        let p0 = b.momentum_at(z).unwrap();
        let p1 = b.momentum_along(&[z], z + 1.0).unwrap();
        assert!((p1 - p0 - TWO_PI).norm() < 1e-8);
    }

    #[test]
    fn branch_validation() {
        assert!(MomentumBranch::with_value(harper(), c(0.25, 0.0), c(0.3, 0.0)).is_err());
        let tp = c(0.0, (2.0f64).acosh() / TWO_PI);
        assert!(matches!(
            MomentumBranch::new(harper(), tp),
            Err(WkbError::BranchAmbiguity { .. })
        ));
    }
}
