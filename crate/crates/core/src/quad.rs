//! Adaptive Gauss–Kronrod (7/15) quadrature along straight complex segments.
//!
//! Integrands return a fixed-size array so several related quantities
//! (for example the action and both phase densities) can share node
//! evaluations.

use crate::error::{Result, WkbError};
use crate::linalg::C64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 40;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature<const N: usize> {
    pub value: [C64; N],
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<const N: usize, F>(f: &F, a: C64, b: C64) -> Result<([C64; N], f64)>
where
    F: Fn(C64) -> Result<[C64; N]>,
{
    let center = (a + b) * 0.5;
    let half = (b - a) * 0.5;
    let mut kronrod = [C64::new(0.0, 0.0); N];
    let mut gauss = [C64::new(0.0, 0.0); N];

    let fc = f(center)?;
    for k in 0..N {
        kronrod[k] = fc[k] * WGK[7];
        gauss[k] = fc[k] * WG[3];
    }
    for (i, &x) in XGK.iter().take(7).enumerate() {
        let f1 = f(center - half * x)?;
        let f2 = f(center + half * x)?;
        for k in 0..N {
            let s = f1[k] + f2[k];
            kronrod[k] += s * WGK[i];
            if i % 2 == 1 {
                gauss[k] += s * WG[i / 2];
            }
        }
    }
    let mut err = 0.0;
    for k in 0..N {
        kronrod[k] *= half;
        gauss[k] *= half;
        err += (kronrod[k] - gauss[k]).norm();
    }
    Ok((kronrod, err))
}

/// Integrates `f` along the segment `a → b` to absolute tolerance `tol`.
pub fn integrate_segment<const N: usize, F>(f: &F, a: C64, b: C64, tol: f64) -> Result<Quadrature<N>>
where
    F: Fn(C64) -> Result<[C64; N]>,
{
    let mut out = Quadrature {
        value: [C64::new(0.0, 0.0); N],
        error: 0.0,
        evaluations: 0,
    };
    if a == b {
        return Ok(out);
    }
    // Explicit stack keeps deep refinements off the call stack.
    let (v, e) = gk15(f, a, b)?;
    out.evaluations += 15;
    let mut stack = vec![(a, b, v, e, tol, 0u32)];
    while let Some((lo, hi, value, err, local_tol, depth)) = stack.pop() {
        let floor = 1e-15 * value.iter().map(|v| v.norm()).sum::<f64>();
        if err <= local_tol.max(floor) {
            for k in 0..N {
                out.value[k] += value[k];
            }
            out.error += err;
            continue;
        }
        if depth >= MAX_DEPTH {
            return Err(WkbError::Quadrature(format!(
                "no convergence on segment {lo} -> {hi} (error {err:e}, target {local_tol:e})"
            )));
        }
        let mid = (lo + hi) * 0.5;
        let (v1, e1) = gk15(f, lo, mid)?;
        let (v2, e2) = gk15(f, mid, hi)?;
        out.evaluations += 30;
        stack.push((lo, mid, v1, e1, local_tol * 0.5, depth + 1));
        stack.push((mid, hi, v2, e2, local_tol * 0.5, depth + 1));
    }
    Ok(out)
}

/// Composite rule over a polyline; the tolerance is distributed by length.
pub fn integrate_polyline<const N: usize, F>(f: &F, nodes: &[C64], tol: f64) -> Result<Quadrature<N>>
where
    F: Fn(C64) -> Result<[C64; N]>,
{
    let total: f64 = nodes.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let mut out = Quadrature {
        value: [C64::new(0.0, 0.0); N],
        error: 0.0,
        evaluations: 0,
    };
    if total == 0.0 {
        return Ok(out);
    }
    for w in nodes.windows(2) {
        let share = tol * (w[1] - w[0]).norm() / total;
        let q = integrate_segment(f, w[0], w[1], share)?;
        for k in 0..N {
            out.value[k] += q.value[k];
        }
        out.error += q.error;
        out.evaluations += q.evaluations;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let f = |z: C64| Ok([z * z * z - z + 1.0]);
        let a = C64::new(0.0, 0.0);
        let b = C64::new(1.0, 2.0);
        let q = integrate_segment(&f, a, b, 1e-14).unwrap();
        let antiderivative = |z: C64| z.powi(4) / 4.0 - z * z / 2.0 + z;
        assert!((q.value[0] - (antiderivative(b) - antiderivative(a))).norm() < 1e-13);
    }

    #[test]
    fn exponential_along_polyline() {
        let f = |z: C64| Ok([z.exp(), (2.0 * z).sin()]);
        let nodes = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 3.0)];
        let q = integrate_polyline(&f, &nodes, 1e-12).unwrap();
        let end = nodes[2];
        assert!((q.value[0] - (end.exp() - 1.0)).norm() < 1e-11);
        assert!((q.value[1] - (1.0 - (2.0 * end).cos()) / 2.0).norm() < 1e-10);
        assert!(q.error < 1e-11);
    }

    #[test]
    fn near_singular_integrand_refines() {
        // 1/(z - c) with c close to the segment.
        let c = C64::new(0.5, 1e-3);
        let f = |z: C64| Ok([(z - c).inv()]);
        let a = C64::new(0.0, 0.0);
        let b = C64::new(1.0, 0.0);
        let q = integrate_segment(&f, a, b, 1e-10).unwrap();
        let exact = (b - c).ln() - (a - c).ln();
        assert!((q.value[0] - exact).norm() < 1e-9);
    }
}
