//! Fixed-size 2×2 complex linear algebra.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;
pub type Vec2 = [C64; 2];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// A 2×2 complex matrix stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2::new(a.into(), b.into(), c.into(), d.into())
    }

    pub const fn zero() -> Self {
        Mat2([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn diag(a: C64, d: C64) -> Self {
        Mat2::new(a, ZERO, ZERO, d)
    }

    /// Matrix with columns `u` and `v`.
    pub fn from_cols(u: Vec2, v: Vec2) -> Self {
        Mat2::new(u[0], v[0], u[1], v[1])
    }

    /// Matrix with rows `u` and `v`.
    pub fn from_rows(u: Vec2, v: Vec2) -> Self {
        Mat2([u, v])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn col(&self, j: usize) -> Vec2 {
        [self.0[0][j], self.0[1][j]]
    }

    pub fn row(&self, i: usize) -> Vec2 {
        self.0[i]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Adjugate; equals the inverse when `det == 1`.
    pub fn adjugate(&self) -> Self {
        let [[a, b], [c, d]] = self.0;
        Mat2::new(d, -b, -c, a)
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == ZERO || !det.is_finite() {
            return None;
        }
        Some(self.adjugate().scale(det.inv()))
    }

    pub fn scale(&self, s: C64) -> Self {
        let [[a, b], [c, d]] = self.0;
        Mat2::new(a * s, b * s, c * s, d * s)
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// Row vector times matrix.
    pub fn left_mul(&self, l: Vec2) -> Vec2 {
        [
            l[0] * self.0[0][0] + l[1] * self.0[1][0],
            l[0] * self.0[0][1] + l[1] * self.0[1][1],
        ]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|x| x.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += o.0[i][j];
            }
        }
        out
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] -= o.0[i][j];
            }
        }
        out
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let a = self.0;
        let b = o.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

pub fn vnorm(v: Vec2) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

pub fn vsub(u: Vec2, v: Vec2) -> Vec2 {
    [u[0] - v[0], u[1] - v[1]]
}

pub fn vscale(v: Vec2, s: C64) -> Vec2 {
    [v[0] * s, v[1] * s]
}

/// Bilinear pairing of a row vector with a column vector (no conjugation).
pub fn dot(l: Vec2, r: Vec2) -> C64 {
    l[0] * r[0] + l[1] * r[1]
}

/// `det(u v)` for two column vectors.
pub fn wedge(u: Vec2, v: Vec2) -> C64 {
    u[0] * v[1] - u[1] * v[0]
}

/// Sine of the angle between the complex lines spanned by `u` and `v`.
pub fn projective_distance(u: Vec2, v: Vec2) -> f64 {
    let nu = vnorm(u);
    let nv = vnorm(v);
    if nu == 0.0 || nv == 0.0 {
        return 1.0;
    }
    (wedge(u, v).norm() / (nu * nv)).min(1.0)
}

/// A vector stored as `exp(log_scale) * v`, used wherever exponentially
/// large or small factors would overflow a plain `Vec2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledVec2 {
    pub log_scale: C64,
    pub v: Vec2,
}

impl ScaledVec2 {
    pub fn new(log_scale: C64, v: Vec2) -> Self {
        ScaledVec2 { log_scale, v }
    }

    /// Natural log of the Euclidean norm.
    pub fn log_norm(&self) -> f64 {
        self.log_scale.re + vnorm(self.v).ln()
    }

    /// Unit vector carrying the full phase of the represented value.
    pub fn direction(&self) -> Vec2 {
        let n = vnorm(self.v);
        let phase = C64::from_polar(1.0, self.log_scale.im);
        vscale(self.v, phase / n)
    }

    /// Plain vector, or `None` when the scale over- or underflows.
    pub fn to_vec(&self) -> Option<Vec2> {
        let s = self.log_scale.exp();
        let out = vscale(self.v, s);
        (out[0].is_finite() && out[1].is_finite() && s.norm() > 0.0).then_some(out)
    }
}
