//! Vertical curves, the action `θ(z) = ∫ p dz`, and the canonical-curve
//! sign conditions `Im(p z′) > 0`, `Im((p − π) z′) < 0`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, WkbError};
use crate::linalg::C64;
use crate::matrix::Side;
use crate::momentum::{infinity_momentum, MomentumBranch, DEFAULT_Y};

/// Default margin for "strictly canonical".
pub const DEFAULT_EPS: f64 = 1e-3;

/// Piecewise-linear curve `x(y)` with strictly increasing `Im` along its nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerticalCurve {
    nodes: Vec<C64>,
    /// Whether the ends continue vertically to `Im z = ±∞`.
    pub infinite: bool,
}

impl VerticalCurve {
    pub fn new(nodes: Vec<C64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(WkbError::InvalidInput("a vertical curve needs at least two nodes".into()));
        }
        if nodes.iter().any(|z| !z.is_finite()) {
            return Err(WkbError::InvalidInput("curve nodes must be finite".into()));
        }
        if nodes.windows(2).any(|w| w[1].im <= w[0].im) {
            return Err(WkbError::InvalidInput("curve nodes must have strictly increasing Im".into()));
        }
        Ok(VerticalCurve { nodes, infinite: false })
    }

    /// The vertical segment `Re z = x`, `y0 ≤ Im z ≤ y1`.
    pub fn line(x: f64, y0: f64, y1: f64) -> Result<Self> {
        Self::new(vec![C64::new(x, y0), C64::new(x, y1)])
    }

    /// Marks the curve as continuing vertically to infinity at both ends.
    pub fn unbounded(mut self) -> Self {
        self.infinite = true;
        self
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    /// Sample points with their one-sided `z′(y) = x′(y) + i`; corners
    /// appear twice, once per adjacent segment.
    pub fn samples(&self, per_unit: usize) -> Vec<(C64, C64)> {
        let mut out = Vec::new();
        for w in self.nodes.windows(2) {
            let dy = w[1].im - w[0].im;
            let dz = C64::new((w[1].re - w[0].re) / dy, 1.0);
            let n = ((dy * per_unit as f64).ceil() as usize).max(1);
            for k in 0..=n {
                out.push((w[0] + (w[1] - w[0]) * (k as f64 / n as f64), dz));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionSample {
    pub z: C64,
    pub theta: C64,
}

/// `θ(z) = ∫_{z0}^{z} p dz` at `z0` and at each node of `path`.
pub fn action_theta(branch: &MomentumBranch, z0: C64, path: &[C64], tol: f64) -> Result<Vec<ActionSample>> {
    let mut nodes = vec![z0];
    nodes.extend_from_slice(path);
    let track = branch.track(&nodes)?;
    let start = track.index_of(z0, 0).expect("track passes through z0");
    let f = |_z: C64, p: C64| Ok([p]);
    let (running, _) = track.integrate_cumulative(start, &f, tol).map_err(|e| e.context("action"))?;
    let mut out = Vec::with_capacity(nodes.len());
    let mut from = start;
    for z in nodes {
        let i = track.index_of(z, from).expect("track visits every path node");
        out.push(ActionSample {
            z,
            theta: running[i - start][0],
        });
        from = i;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginSample {
    pub y: f64,
    pub x: f64,
    pub m1: f64,
    pub m2: f64,
}

/// Limiting margins on an unbounded end, from the fitted asymptote of `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticMargin {
    pub side: Side,
    pub s: i32,
    pub m1: f64,
    pub m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicityReport {
    pub curve: VerticalCurve,
    pub samples: Vec<MarginSample>,
    pub min_margin: f64,
    pub canonical: bool,
    pub strictly: bool,
    pub eps: f64,
    pub asymptotic: Vec<AsymptoticMargin>,
}

/// Margins of the two canonicity inequalities at samples along `curve`.
pub fn canonicity_check(
    branch: &MomentumBranch,
    curve: &VerticalCurve,
    samples_per_unit: usize,
    eps: f64,
) -> Result<CanonicityReport> {
    let samples = curve.samples(samples_per_unit.max(1));
    let points: Vec<C64> = samples.iter().map(|s| s.0).collect();
    let ps = branch.momentum_through(&points)?;
    let margins: Vec<MarginSample> = samples
        .iter()
        .zip(&ps)
        .map(|(&(z, dz), &p)| MarginSample {
            y: z.im,
            x: z.re,
            m1: (p * dz).im,
            m2: -((p - PI) * dz).im,
        })
        .collect();

    let mut asymptotic = Vec::new();
    if curve.infinite {
        for (side, end) in [(Side::Up, *curve.nodes.last().unwrap()), (Side::Down, curve.nodes[0])] {
            let b = branch.rebased_along(&points, end)?;
            let y = DEFAULT_Y.max(end.im.abs());
            let fit = infinity_momentum(&b, side, y)?;
            // Vertical ends: z′ = i, so m₁ = Re p and m₂ = π − Re p, with Re p constant in the limit.
            let re = fit.asymptote(C64::new(end.re, side.orientation() * y)).re;
            asymptotic.push(AsymptoticMargin {
                side,
                s: fit.s,
                m1: re,
                m2: PI - re,
            });
        }
    }

    let min_margin = margins
        .iter()
        .flat_map(|m| [m.m1, m.m2])
        .chain(asymptotic.iter().flat_map(|a| [a.m1, a.m2]))
        .fold(f64::INFINITY, f64::min);
    Ok(CanonicityReport {
        curve: curve.clone(),
        samples: margins,
        min_margin,
        canonical: min_margin > 0.0,
        strictly: min_margin >= eps,
        eps,
        asymptotic,
    })
}

/// A run of adjacent canonical lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CanonicalInterval {
    pub x0: f64,
    pub x1: f64,
    pub min_margin: f64,
}

/// Per-line scan outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineScan {
    pub x: f64,
    pub min_margin: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub lines: Vec<LineScan>,
    pub intervals: Vec<CanonicalInterval>,
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub columns: usize,
    pub samples_per_unit: usize,
    pub eps: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            columns: 51,
            samples_per_unit: 20,
            eps: DEFAULT_EPS,
        }
    }
}

/// Checks vertical lines `x = const` across `x_range` and merges strictly
/// canonical neighbours into intervals. The branch is carried horizontally
/// at `Im z_ref` to each line; a line whose continuation fails is not canonical.
pub fn find_canonical_vertical_lines(
    branch: &MomentumBranch,
    x_range: (f64, f64),
    y_range: (f64, f64),
    opts: &ScanOptions,
) -> Result<ScanReport> {
    let (x0, x1) = x_range;
    let (y0, y1) = y_range;
    if !(x0 <= x1) || !(y0 < y1) || opts.columns == 0 {
        return Err(WkbError::InvalidInput("scan needs x0 <= x1, y0 < y1 and at least one column".into()));
    }
    let n = opts.columns;
    let xs: Vec<f64> = (0..n)
        .map(|k| if n == 1 { x0 } else { x0 + (x1 - x0) * k as f64 / (n - 1) as f64 })
        .collect();
    let y_ref = branch.z_ref().im;
    let lines: Vec<LineScan> = xs
        .par_iter()
        .map(|&x| {
            let run = || -> Result<f64> {
                let b = branch.rebased(C64::new(x, y_ref))?;
                let curve = VerticalCurve::line(x, y0, y1)?;
                Ok(canonicity_check(&b, &curve, opts.samples_per_unit, opts.eps)?.min_margin)
            };
            match run() {
                Ok(m) => LineScan {
                    x,
                    min_margin: Some(m),
                    error: None,
                },
                Err(e) => LineScan {
                    x,
                    min_margin: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut intervals: Vec<CanonicalInterval> = Vec::new();
    let mut open: Option<CanonicalInterval> = None;
    for l in &lines {
        match l.min_margin {
            Some(m) if m >= opts.eps => {
                open = Some(match open {
                    Some(iv) => CanonicalInterval {
                        x1: l.x,
                        min_margin: iv.min_margin.min(m),
                        ..iv
                    },
                    None => CanonicalInterval {
                        x0: l.x,
                        x1: l.x,
                        min_margin: m,
                    },
                });
            }
            _ => intervals.extend(open.take()),
        }
    }
    intervals.extend(open);
    Ok(ScanReport { lines, intervals })
}
