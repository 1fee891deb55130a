//! Zeros of analytic functions in a rectangle: per-cell argument principle
//! on a grid, then Newton polishing with cell subdivision.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WkbError};
use crate::linalg::C64;

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        let ok = [x0, x1, y0, y1].iter().all(|v| v.is_finite()) && x0 < x1 && y0 < y1;
        if !ok {
            return Err(WkbError::InvalidInput(format!(
                "region must be bounded with x0 < x1 and y0 < y1, got [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Rect { x0, x1, y0, y1 })
    }

    pub fn around(c: C64, half: f64) -> Self {
        Rect {
            x0: c.re - half,
            x1: c.re + half,
            y0: c.im - half,
            y1: c.im + half,
        }
    }

    pub fn contains(&self, z: C64, slack: f64) -> bool {
        z.re >= self.x0 - slack && z.re <= self.x1 + slack && z.im >= self.y0 - slack && z.im <= self.y1 + slack
    }

    fn padded(&self, pad: f64) -> Rect {
        Rect {
            x0: self.x0 - pad,
            x1: self.x1 + pad,
            y0: self.y0 - pad,
            y1: self.y1 + pad,
        }
    }

    fn size(&self) -> f64 {
        (self.x1 - self.x0).max(self.y1 - self.y0)
    }
}

/// A located zero with its multiplicity from the argument principle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zero {
    pub z: C64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroSearch {
    pub cells: usize,
    /// Extra grid resolutions tried when a zero sits on a grid line.
    pub regrid_attempts: usize,
    pub max_depth: u32,
}

impl Default for ZeroSearch {
    fn default() -> Self {
        ZeroSearch {
            cells: 50,
            regrid_attempts: 4,
            max_depth: 14,
        }
    }
}

enum Trace {
    Winding(f64),
    OnEdge,
}

/// Argument change of `f` along `a → b`, tracked adaptively.
fn arg_change<F: Fn(C64) -> (C64, C64)>(f: &F, a: C64, b: C64) -> Trace {
    let mut fa = f(a).0;
    if !(fa.norm() > 0.0) || !fa.is_finite() {
        return Trace::OnEdge;
    }
    let mut s = 0.0;
    let mut ds: f64 = 0.25;
    let mut total = 0.0;
    while s < 1.0 {
        let step = ds.min(1.0 - s);
        let fb = f(a + (b - a) * (s + step)).0;
        if !(fb.norm() > 0.0) || !fb.is_finite() {
            return Trace::OnEdge;
        }
        let d = (fb / fa).arg();
        if d.abs() > 0.4 {
            ds = step * 0.5;
            if ds < 1e-9 {
                return Trace::OnEdge;
            }
            continue;
        }
        total += d;
        s += step;
        fa = fb;
        if d.abs() < 0.1 {
            ds = (step * 2.0).min(0.25);
        }
    }
    Trace::Winding(total)
}

fn winding<F: Fn(C64) -> (C64, C64)>(f: &F, r: &Rect) -> Option<usize> {
    let corners = [
        C64::new(r.x0, r.y0),
        C64::new(r.x1, r.y0),
        C64::new(r.x1, r.y1),
        C64::new(r.x0, r.y1),
    ];
    let mut total = 0.0;
    for k in 0..4 {
        match arg_change(f, corners[k], corners[(k + 1) % 4]) {
            Trace::Winding(w) => total += w,
            Trace::OnEdge => return None,
        }
    }
    integer_count(total)
}

fn integer_count(total: f64) -> Option<usize> {
    let n = total / (2.0 * PI);
    let r = n.round();
    ((n - r).abs() < 0.05 && r >= 0.0).then_some(r as usize)
}

fn newton<F: Fn(C64) -> (C64, C64)>(f: &F, start: C64, m: usize, scale: f64) -> Option<C64> {
    let mut z = start;
    for _ in 0..80 {
        let (v, dv) = f(z);
        if v == C64::new(0.0, 0.0) {
            return Some(z);
        }
        if !(dv.norm() > 0.0) {
            return None;
        }
        let dz = v / dv * m as f64;
        z -= dz;
        if !z.is_finite() {
            return None;
        }
        if dz.norm() < 1e-15 * scale.max(z.norm()) {
            return Some(z);
        }
    }
    // Multiple roots converge slowly in floating point; accept a tiny final step.
    let (v, dv) = f(z);
    (dv.norm() > 0.0 && (v / dv).norm() < 1e-10 * scale.max(1.0)).then_some(z)
}

fn refine_cell<F: Fn(C64) -> (C64, C64)>(
    f: &F,
    cell: Rect,
    count: usize,
    depth: u32,
    opts: &ZeroSearch,
    out: &mut Vec<Zero>,
) -> Option<()> {
    let center = C64::new((cell.x0 + cell.x1) / 2.0, (cell.y0 + cell.y1) / 2.0);
    let slack = 1e-9 * cell.size().max(1.0);
    if count == 1 || depth >= opts.max_depth {
        if let Some(z) = newton(f, center, count, cell.size()) {
            if cell.contains(z, slack) {
                out.push(Zero { z, multiplicity: count });
                return Some(());
            }
        }
        if depth >= opts.max_depth {
            return None;
        }
    }
    let xm = (cell.x0 + cell.x1) / 2.0;
    let ym = (cell.y0 + cell.y1) / 2.0;
    let quads = [
        Rect { x0: cell.x0, x1: xm, y0: cell.y0, y1: ym },
        Rect { x0: xm, x1: cell.x1, y0: cell.y0, y1: ym },
        Rect { x0: cell.x0, x1: xm, y0: ym, y1: cell.y1 },
        Rect { x0: xm, x1: cell.x1, y0: ym, y1: cell.y1 },
    ];
    let mut found = 0;
    for q in quads {
        let c = winding(f, &q)?;
        if c > 0 {
            refine_cell(f, q, c, depth + 1, opts, out)?;
            found += c;
        }
    }
    (found == count).then_some(())
}

fn scan<F: Fn(C64) -> (C64, C64)>(f: &F, rect: &Rect, n: usize, opts: &ZeroSearch) -> Result<Option<Vec<Zero>>> {
    let dx = (rect.x1 - rect.x0) / n as f64;
    let dy = (rect.y1 - rect.y0) / n as f64;
    let node = |i: usize, j: usize| C64::new(rect.x0 + dx * i as f64, rect.y0 + dy * j as f64);

    // Shared edges: horizontal h[i][j] = node(i,j) → node(i+1,j), vertical v[i][j] = node(i,j) → node(i,j+1).
    let mut h = vec![vec![0.0; n + 1]; n];
    let mut v = vec![vec![0.0; n]; n + 1];
    for i in 0..n {
        for j in 0..=n {
            match arg_change(f, node(i, j), node(i + 1, j)) {
                Trace::Winding(w) => h[i][j] = w,
                Trace::OnEdge => return Ok(None),
            }
        }
    }
    for i in 0..=n {
        for j in 0..n {
            match arg_change(f, node(i, j), node(i, j + 1)) {
                Trace::Winding(w) => v[i][j] = w,
                Trace::OnEdge => return Ok(None),
            }
        }
    }

    let mut expected = 0;
    let mut zeros = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let total = h[i][j] + v[i + 1][j] - h[i][j + 1] - v[i][j];
            let count = integer_count(total).ok_or(WkbError::IncompleteSearch {
                expected: 0,
                found: 0,
            })?;
            if count == 0 {
                continue;
            }
            expected += count;
            let cell = Rect {
                x0: rect.x0 + dx * i as f64,
                x1: rect.x0 + dx * (i + 1) as f64,
                y0: rect.y0 + dy * j as f64,
                y1: rect.y0 + dy * (j + 1) as f64,
            };
            if refine_cell(f, cell, count, 0, opts, &mut zeros).is_none() {
                return Ok(None);
            }
        }
    }
    let found = dedup(&mut zeros, 1e-8 * rect.size().max(1.0));
    if found != expected {
        return Err(WkbError::IncompleteSearch { expected, found });
    }
    Ok(Some(zeros))
}

fn dedup(zeros: &mut Vec<Zero>, tol: f64) -> usize {
    let mut kept: Vec<Zero> = Vec::with_capacity(zeros.len());
    for z in zeros.drain(..) {
        if !kept.iter().any(|k| (k.z - z.z).norm() < tol) {
            kept.push(z);
        }
    }
    *zeros = kept;
    zeros.iter().map(|z| z.multiplicity).sum()
}

/// All zeros of `f` in the closed rectangle. `f` returns `(value, derivative)`.
///
/// The scan runs on a slightly padded rectangle so zeros on the boundary are
/// caught, and the grid is re-drawn with one more cell per side when a zero
/// lands on an interior grid line.
pub fn find_zeros<F>(f: &F, rect: &Rect, opts: &ZeroSearch) -> Result<Vec<Zero>>
where
    F: Fn(C64) -> (C64, C64),
{
    let pad = 1e-3 * rect.size() / opts.cells as f64;
    let padded = rect.padded(pad);
    for extra in 0..=opts.regrid_attempts {
        if let Some(mut zeros) = scan(f, &padded, opts.cells + extra, opts)? {
            zeros.retain(|z| rect.contains(z.z, 1e-9 * rect.size().max(1.0)));
            zeros.sort_by(|a, b| (a.z.re, a.z.im).partial_cmp(&(b.z.re, b.z.im)).unwrap());
            return Ok(zeros);
        }
    }
    Err(WkbError::IncompleteSearch {
        expected: 0,
        found: 0,
    }
    .context("a zero stays on the scan grid after re-gridding"))
}
