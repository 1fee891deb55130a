//! The coefficient matrix `M(z)` of `Ψ(z+h) = M(z)Ψ(z)`.
//!
//! Two representations are supported: trigonometric polynomials
//! `M(z) = Σ_j M_j e^{2πijz}` (unbounded mode) and ordinary polynomials in
//! `z` (bounded mode). Both are immutable once built and unimodular by
//! construction-time validation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WkbError};
use crate::linalg::{Mat2, C64, ONE, ZERO};

const TWO_PI_I: C64 = C64::new(0.0, 2.0 * PI);

/// Default tolerance for the sampled unimodularity check.
pub const UNIMODULAR_TOL: f64 = 1e-10;

/// Scalar trigonometric polynomial `P(z) = Σ_j c_j e^{2πijz}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigPoly {
    coeffs: BTreeMap<i32, C64>,
}

impl TrigPoly {
    pub fn new(coeffs: impl IntoIterator<Item = (i32, C64)>) -> Self {
        let mut map = BTreeMap::new();
        for (j, c) in coeffs {
            *map.entry(j).or_insert(ZERO) += c;
        }
        map.retain(|_, c| *c != ZERO);
        TrigPoly { coeffs: map }
    }

    pub fn constant(c: C64) -> Self {
        TrigPoly::new([(0, c)])
    }

    /// `2λ cos(2πz) + μ`.
    pub fn cosine(lambda: f64, mu: f64) -> Self {
        TrigPoly::new([
            (-1, C64::from(lambda)),
            (0, C64::from(mu)),
            (1, C64::from(lambda)),
        ])
    }

    pub fn coeffs(&self) -> &BTreeMap<i32, C64> {
        &self.coeffs
    }

    pub fn coeff(&self, j: i32) -> C64 {
        self.coeffs.get(&j).copied().unwrap_or(ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn min_index(&self) -> Option<i32> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_index(&self) -> Option<i32> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn eval(&self, z: C64) -> C64 {
        // Each harmonic is exponentiated directly rather than by powers of e^{2πiz}.
        self.coeffs
            .iter()
            .map(|(&j, &c)| if j == 0 { c } else { c * (TWO_PI_I * z * j as f64).exp() })
            .fold(ZERO, |acc, t| acc + t)
    }

    pub fn deriv(&self) -> TrigPoly {
        TrigPoly::new(
            self.coeffs
                .iter()
                .map(|(&j, &c)| (j, c * TWO_PI_I * j as f64)),
        )
    }

    pub fn scale(&self, s: C64) -> TrigPoly {
        TrigPoly::new(self.coeffs.iter().map(|(&j, &c)| (j, c * s)))
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        TrigPoly::new(self.coeffs.iter().chain(other.coeffs.iter()).map(|(&j, &c)| (j, c)))
    }

    pub fn mul(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = Vec::new();
        for (&j, &a) in &self.coeffs {
            for (&k, &b) in &other.coeffs {
                out.push((j + k, a * b));
            }
        }
        TrigPoly::new(out)
    }

    /// Fourier index and leading coefficient on one side.
    ///
    /// Upward (`Im z → +∞`) the dominant harmonic is the most negative one,
    /// so `n_u = −min j` with `P_u = P_{min j}`; downward `n_d = max j` with
    /// `P_d = P_{max j}`.
    pub fn index_data(&self, side: Side) -> Result<IndexData> {
        let (j, n) = match side {
            Side::Up => {
                let j = self
                    .min_index()
                    .ok_or_else(|| WkbError::Degenerate("all-zero trigonometric polynomial".into()))?;
                (j, -j)
            }
            Side::Down => {
                let j = self
                    .max_index()
                    .ok_or_else(|| WkbError::Degenerate("all-zero trigonometric polynomial".into()))?;
                (j, j)
            }
        };
        Ok(IndexData {
            side,
            n,
            leading: self.coeff(j),
        })
    }
}

/// Ordinary polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    coeffs: Vec<C64>,
}

impl Poly {
    pub fn new(coeffs: impl Into<Vec<C64>>) -> Self {
        let mut coeffs = coeffs.into();
        while coeffs.last() == Some(&ZERO) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn real(coeffs: &[f64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| C64::from(c)).collect::<Vec<_>>())
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    pub fn deriv(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect::<Vec<_>>(),
        )
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Poly::default();
        }
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Poly, k: usize| p.coeffs.get(k).copied().unwrap_or(ZERO);
        Poly::new((0..n).map(|k| get(self, k) - get(other, k)).collect::<Vec<_>>())
    }

    pub fn scale(&self, s: C64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * s).collect::<Vec<_>>())
    }
}

/// Half-plane selector for asymptotics: `Up` is `Im z → +∞`, `Down` is `Im z → −∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "u")]
    Up,
    #[serde(rename = "d")]
    Down,
}

impl Side {
    pub fn parse(s: &str) -> Result<Side> {
        match s {
            "u" | "up" => Ok(Side::Up),
            "d" | "down" => Ok(Side::Down),
            other => Err(WkbError::InvalidInput(format!("unknown side {other:?} (expected u or d)"))),
        }
    }

    /// +1 for up, −1 for down.
    pub fn orientation(self) -> f64 {
        match self {
            Side::Up => 1.0,
            Side::Down => -1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Up => "u",
            Side::Down => "d",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexData {
    pub side: Side,
    pub n: i32,
    pub leading: C64,
}

/// Trigonometric-polynomial matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMatrix {
    entries: [[TrigPoly; 2]; 2],
}

impl FourierMatrix {
    /// Builds from harmonics `j ↦ M_j` and checks unimodularity on the sample grid.
    pub fn new(harmonics: impl IntoIterator<Item = (i32, Mat2)>) -> Result<Self> {
        let harmonics: Vec<(i32, Mat2)> = harmonics.into_iter().collect();
        let entry = |a: usize, b: usize| TrigPoly::new(harmonics.iter().map(|(j, m)| (*j, m.get(a, b))));
        Self::from_entries([[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]])
    }

    pub fn from_entries(entries: [[TrigPoly; 2]; 2]) -> Result<Self> {
        let m = FourierMatrix { entries };
        let defect = m.unimodularity_defect();
        if !(defect < UNIMODULAR_TOL) {
            return Err(WkbError::NotUnimodular { defect });
        }
        Ok(m)
    }

    pub fn constant(m: Mat2) -> Result<Self> {
        Self::new([(0, m)])
    }

    pub fn entry(&self, i: usize, j: usize) -> &TrigPoly {
        &self.entries[i][j]
    }

    pub fn harmonics(&self) -> BTreeMap<i32, Mat2> {
        let mut out: BTreeMap<i32, Mat2> = BTreeMap::new();
        for a in 0..2 {
            for b in 0..2 {
                for (&j, &c) in self.entries[a][b].coeffs() {
                    out.entry(j).or_insert_with(Mat2::zero).0[a][b] = c;
                }
            }
        }
        out
    }

    /// `k` and `l` with harmonics supported in `[−k, l]`.
    pub fn index_range(&self) -> (i32, i32) {
        let h = self.harmonics();
        let lo = h.keys().next().copied().unwrap_or(0);
        let hi = h.keys().next_back().copied().unwrap_or(0);
        ((-lo).max(0), hi.max(0))
    }

    pub fn trace_poly(&self) -> TrigPoly {
        self.entries[0][0].add(&self.entries[1][1])
    }

    pub fn eval(&self, z: C64) -> Mat2 {
        Mat2::new(
            self.entries[0][0].eval(z),
            self.entries[0][1].eval(z),
            self.entries[1][0].eval(z),
            self.entries[1][1].eval(z),
        )
    }

    pub fn deriv(&self, z: C64) -> Mat2 {
        Mat2::new(
            self.entries[0][0].deriv().eval(z),
            self.entries[0][1].deriv().eval(z),
            self.entries[1][0].deriv().eval(z),
            self.entries[1][1].deriv().eval(z),
        )
    }

    /// Max of `|det M(z) − 1|` over the 10×10 grid `x ∈ [0,1)`, `|Im z| ≤ 2`,
    /// scaled by the size of the determinant terms.
    pub fn unimodularity_defect(&self) -> f64 {
        sample_grid()
            .map(|z| det_defect(&self.eval(z)))
            .fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
    }

    /// Pointwise product, used to build richer unimodular examples.
    pub fn product(&self, other: &FourierMatrix) -> Result<FourierMatrix> {
        let a = &self.entries;
        let b = &other.entries;
        let e = |i: usize, j: usize| a[i][0].mul(&b[0][j]).add(&a[i][1].mul(&b[1][j]));
        FourierMatrix::from_entries([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }
}

fn sample_grid() -> impl Iterator<Item = C64> {
    (0..10).flat_map(|a| {
        (0..10).map(move |b| C64::new(0.05 + 0.1 * a as f64, -2.0 + 4.0 * b as f64 / 9.0))
    })
}

fn det_defect(m: &Mat2) -> f64 {
    let [[a, b], [c, d]] = m.0;
    let scale = 1.0f64.max((a * d).norm() + (b * c).norm());
    (m.det() - ONE).norm() / scale
}

/// Polynomial matrix for the bounded-domain mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMatrix {
    entries: [[Poly; 2]; 2],
}

impl PolynomialMatrix {
    /// Builds the matrix and checks `det ≡ 1` coefficient by coefficient.
    pub fn new(entries: [[Poly; 2]; 2]) -> Result<Self> {
        let det = entries[0][0]
            .mul(&entries[1][1])
            .sub(&entries[0][1].mul(&entries[1][0]))
            .sub(&Poly::real(&[1.0]));
        let defect = det.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        if defect > 1e-12 {
            return Err(WkbError::NotUnimodular { defect });
        }
        Ok(PolynomialMatrix { entries })
    }

    pub fn entry(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i][j]
    }

    pub fn eval(&self, z: C64) -> Mat2 {
        Mat2::new(
            self.entries[0][0].eval(z),
            self.entries[0][1].eval(z),
            self.entries[1][0].eval(z),
            self.entries[1][1].eval(z),
        )
    }

    pub fn deriv(&self, z: C64) -> Mat2 {
        Mat2::new(
            self.entries[0][0].deriv().eval(z),
            self.entries[0][1].deriv().eval(z),
            self.entries[1][0].deriv().eval(z),
            self.entries[1][1].deriv().eval(z),
        )
    }
}

/// Either representation of `M(z)`.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixModel {
    Fourier(FourierMatrix),
    Polynomial(PolynomialMatrix),
}

impl MatrixModel {
    /// Harper / almost-Mathieu companion matrix for `v(z) = 2λ cos(2πz) + μ`.
    pub fn harper(lambda: f64, mu: f64) -> Self {
        MatrixModel::Fourier(companion_trig(&TrigPoly::cosine(lambda, mu)))
    }

    pub fn eval(&self, z: C64) -> Mat2 {
        match self {
            MatrixModel::Fourier(m) => m.eval(z),
            MatrixModel::Polynomial(m) => m.eval(z),
        }
    }

    /// Like [`MatrixModel::eval`] but signals overflow.
    pub fn try_eval(&self, z: C64) -> Result<Mat2> {
        let m = self.eval(z);
        if m.is_finite() {
            Ok(m)
        } else {
            Err(WkbError::Range { z })
        }
    }

    /// Exact term-wise derivative.
    pub fn deriv(&self, z: C64) -> Mat2 {
        match self {
            MatrixModel::Fourier(m) => m.deriv(z),
            MatrixModel::Polynomial(m) => m.deriv(z),
        }
    }

    pub fn trace(&self, z: C64) -> C64 {
        self.eval(z).trace()
    }

    pub fn trace_deriv(&self, z: C64) -> C64 {
        self.deriv(z).trace()
    }

    pub fn as_fourier(&self) -> Option<&FourierMatrix> {
        match self {
            MatrixModel::Fourier(m) => Some(m),
            MatrixModel::Polynomial(_) => None,
        }
    }

    /// Whether `M₁₂` vanishes identically.
    pub fn m12_is_zero(&self) -> bool {
        match self {
            MatrixModel::Fourier(m) => m.entry(0, 1).is_zero(),
            MatrixModel::Polynomial(m) => m.entry(0, 1).coeffs().is_empty(),
        }
    }
}

/// `[[−v, −1], [1, 0]]` for a trigonometric `v`.
pub fn companion_trig(v: &TrigPoly) -> FourierMatrix {
    FourierMatrix::from_entries([
        [v.scale(-ONE), TrigPoly::constant(-ONE)],
        [TrigPoly::constant(ONE), TrigPoly::default()],
    ])
    .expect("companion matrices are unimodular")
}

/// `[[−v, −1], [1, 0]]` for a polynomial `v`.
pub fn companion_poly(v: &Poly) -> PolynomialMatrix {
    PolynomialMatrix::new([
        [v.scale(-ONE), Poly::real(&[-1.0])],
        [Poly::real(&[1.0]), Poly::default()],
    ])
    .expect("companion matrices are unimodular")
}

/// Scalar potential for [`companion_from_scalar`].
#[derive(Debug, Clone)]
pub enum Scalar {
    Trig(TrigPoly),
    Poly(Poly),
}

impl Scalar {
    pub fn eval(&self, z: C64) -> C64 {
        match self {
            Scalar::Trig(v) => v.eval(z),
            Scalar::Poly(v) => v.eval(z),
        }
    }
}

pub fn companion_from_scalar(v: &Scalar) -> MatrixModel {
    match v {
        Scalar::Trig(v) => MatrixModel::Fourier(companion_trig(v)),
        Scalar::Poly(v) => MatrixModel::Polynomial(companion_poly(v)),
    }
}

/// Per-side Fourier indices of the entries and the trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideIndices {
    pub side: Side,
    pub m11: Option<i32>,
    pub m12: Option<i32>,
    pub m21: Option<i32>,
    pub m22: Option<i32>,
    pub trace: Option<i32>,
    /// `n(M₁₂), n(M₂₁), n(M₂₂) ≤ n(M₁₁) = n(t) > 0`.
    pub chain_holds: bool,
}

/// Outcome of checking the standing assumptions on a trigonometric `M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub k: i32,
    pub l: i32,
    pub k_positive: bool,
    pub l_positive: bool,
    /// `tr M_{−k} · tr M_l ≠ 0`.
    pub extreme_traces_nonzero: bool,
    /// `M₁₂ M₂₁ ≢ 0`.
    pub offdiagonal_nondegenerate: bool,
    /// `M₂₂/M₁₁` bounded as `|Im z| → ∞`, via `n_s(M₂₂) ≤ n_s(M₁₁)`.
    pub ratio_bounded: bool,
    pub unimodularity_defect: f64,
    pub indices: Vec<SideIndices>,
}

impl AssumptionReport {
    /// Every flag required for the unbounded-domain analysis.
    pub fn all_hold(&self) -> bool {
        self.k_positive
            && self.l_positive
            && self.extreme_traces_nonzero
            && self.offdiagonal_nondegenerate
            && self.ratio_bounded
            && self.indices.iter().all(|s| s.chain_holds)
            && self.unimodularity_defect < UNIMODULAR_TOL
    }

    pub fn flags(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("k_positive", self.k_positive),
            ("l_positive", self.l_positive),
            ("extreme_traces_nonzero", self.extreme_traces_nonzero),
            ("offdiagonal_nondegenerate", self.offdiagonal_nondegenerate),
            ("ratio_bounded", self.ratio_bounded),
            ("index_chain_up", self.indices[0].chain_holds),
            ("index_chain_down", self.indices[1].chain_holds),
            ("unimodular", self.unimodularity_defect < UNIMODULAR_TOL),
        ]
    }
}

pub fn validate_assumptions(m: &FourierMatrix) -> AssumptionReport {
    let (k, l) = m.index_range();
    let h = m.harmonics();
    let tr_at = |j: i32| h.get(&j).map(|m| m.trace()).unwrap_or(ZERO);
    let trace = m.trace_poly();
    let n = |p: &TrigPoly, side: Side| p.index_data(side).ok().map(|d| d.n);

    let indices: Vec<SideIndices> = [Side::Up, Side::Down]
        .into_iter()
        .map(|side| {
            let m11 = n(m.entry(0, 0), side);
            let m12 = n(m.entry(0, 1), side);
            let m21 = n(m.entry(1, 0), side);
            let m22 = n(m.entry(1, 1), side);
            let t = n(&trace, side);
            let le = |x: Option<i32>| match (x, m11) {
                (None, _) => true,
                (Some(a), Some(b)) => a <= b,
                (Some(_), None) => false,
            };
            let chain_holds = le(m12) && le(m21) && le(m22) && m11.is_some() && m11 == t && t.unwrap_or(0) > 0;
            SideIndices {
                side,
                m11,
                m12,
                m21,
                m22,
                trace: t,
                chain_holds,
            }
        })
        .collect();

    let ratio_bounded = indices.iter().all(|s| match (s.m22, s.m11) {
        (None, _) => true,
        (Some(a), Some(b)) => a <= b,
        (Some(_), None) => false,
    });

    AssumptionReport {
        k,
        l,
        k_positive: k > 0,
        l_positive: l > 0,
        extreme_traces_nonzero: tr_at(-k) * tr_at(l) != ZERO,
        offdiagonal_nondegenerate: !m.entry(0, 1).is_zero() && !m.entry(1, 0).is_zero(),
        ratio_bounded,
        unimodularity_defect: m.unimodularity_defect(),
        indices,
    }
}

/// A complex number in JSON: either a bare real or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonComplex {
    Real(f64),
    Pair([f64; 2]),
}

impl From<JsonComplex> for C64 {
    fn from(c: JsonComplex) -> C64 {
        match c {
            JsonComplex::Real(x) => C64::new(x, 0.0),
            JsonComplex::Pair([re, im]) => C64::new(re, im),
        }
    }
}

impl From<C64> for JsonComplex {
    fn from(c: C64) -> Self {
        JsonComplex::Pair([c.re, c.im])
    }
}

/// Harmonic block: either 8 numbers row-major `re, im` or 4 `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonBlock {
    Flat([f64; 8]),
    Pairs([[f64; 2]; 4]),
}

impl JsonBlock {
    fn to_mat(&self) -> Mat2 {
        let c = |re: f64, im: f64| C64::new(re, im);
        match self {
            JsonBlock::Flat(v) => Mat2::new(c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7])),
            JsonBlock::Pairs(p) => Mat2::new(
                c(p[0][0], p[0][1]),
                c(p[1][0], p[1][1]),
                c(p[2][0], p[2][1]),
                c(p[3][0], p[3][1]),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonHarmonic {
    pub j: i32,
    pub m: JsonBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonScalarHarmonic {
    pub j: i32,
    pub c: JsonComplex,
}

/// JSON description of a matrix, as accepted by the CLI and the C API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixDescription {
    Fourier { harmonics: Vec<JsonHarmonic> },
    CompanionHarper { lambda: f64, mu: f64 },
    Polynomial { entries: [[Vec<JsonComplex>; 2]; 2] },
    CompanionFourier { v: Vec<JsonScalarHarmonic> },
    CompanionPolynomial { v: Vec<JsonComplex> },
}

impl MatrixDescription {
    pub fn build(&self) -> Result<MatrixModel> {
        let poly = |c: &[JsonComplex]| Poly::new(c.iter().map(|&x| C64::from(x)).collect::<Vec<_>>());
        let check = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(WkbError::InvalidInput(format!("{what} must be finite")))
            }
        };
        match self {
            MatrixDescription::Fourier { harmonics } => {
                if harmonics.is_empty() {
                    return Err(WkbError::InvalidInput("fourier matrix needs at least one harmonic".into()));
                }
                FourierMatrix::new(harmonics.iter().map(|h| (h.j, h.m.to_mat()))).map(MatrixModel::Fourier)
            }
            MatrixDescription::CompanionHarper { lambda, mu } => {
                check(*lambda, "lambda")?;
                check(*mu, "mu")?;
                Ok(MatrixModel::harper(*lambda, *mu))
            }
            MatrixDescription::Polynomial { entries } => PolynomialMatrix::new([
                [poly(&entries[0][0]), poly(&entries[0][1])],
                [poly(&entries[1][0]), poly(&entries[1][1])],
            ])
            .map(MatrixModel::Polynomial),
            MatrixDescription::CompanionFourier { v } => Ok(companion_from_scalar(&Scalar::Trig(TrigPoly::new(
                v.iter().map(|h| (h.j, C64::from(h.c))),
            )))),
            MatrixDescription::CompanionPolynomial { v } => {
                Ok(companion_from_scalar(&Scalar::Poly(poly(v))))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn constant_matrix_evaluates_to_itself() {
        let m = MatrixModel::Fourier(FourierMatrix::constant(Mat2::real(2.0, 1.0, 1.0, 1.0)).unwrap());
        for z in [c(0.0, 0.0), c(0.3, -1.7), c(-4.0, 2.0)] {
            assert_eq!(m.eval(z), Mat2::real(2.0, 1.0, 1.0, 1.0));
            assert_eq!(m.deriv(z), Mat2::zero());
        }
    }

    #[test]
    fn harper_trace_values() {
        let m = MatrixModel::harper(0.5, 0.0);
        assert!(m.trace(c(0.25, 0.0)).norm() < 1e-15);
        let expected = C64::new(0.0, PI.sinh());
        assert!((m.trace(c(0.25, 0.5)) - expected).norm() < 1e-12);
        // (tr M)' = 2π sin(2πz)
        let z = c(0.13, 0.21);
        let expected = (2.0 * PI * z).sin() * 2.0 * PI;
        assert!((m.trace_deriv(z) - expected).norm() < 1e-12);
    }

    #[test]
    fn polynomial_derivative_linear_entries() {
        let m = PolynomialMatrix::new([
            [Poly::real(&[2.0, 1.0]), Poly::real(&[0.0, 1.0])],
            [Poly::real(&[2.5, 1.0]), Poly::real(&[0.5, 1.0])],
        ])
        .unwrap();
        assert_eq!(m.deriv(c(0.0, 0.0)), Mat2::real(1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn polynomial_determinant_checked_exactly() {
        let bad = PolynomialMatrix::new([
            [Poly::real(&[2.0, 1.0]), Poly::real(&[0.0, 1.0])],
            [Poly::real(&[2.5, 1.0]), Poly::real(&[0.5, 1.1])],
        ]);
        assert!(matches!(bad, Err(WkbError::NotUnimodular { .. })));
    }

    #[test]
    fn fourier_rejects_non_unimodular() {
        let r = FourierMatrix::constant(Mat2::real(2.0, 0.0, 0.0, 2.0));
        assert!(matches!(r, Err(WkbError::NotUnimodular { .. })));
    }

    #[test]
    fn index_data_conventions() {
        let t = TrigPoly::cosine(0.5, 0.0).scale(-ONE);
        let up = t.index_data(Side::Up).unwrap();
        assert_eq!(up.n, 1);
        assert_eq!(up.leading, c(-0.5, 0.0));

        let m12 = TrigPoly::constant(-ONE);
        let d = m12.index_data(Side::Up).unwrap();
        assert_eq!((d.n, d.leading), (0, c(-1.0, 0.0)));

        let p = TrigPoly::new([(2, c(3.0, 0.0))]);
        let d = p.index_data(Side::Down).unwrap();
        assert_eq!((d.n, d.leading), (2, c(3.0, 0.0)));

        assert!(matches!(
            TrigPoly::default().index_data(Side::Up),
            Err(WkbError::Degenerate(_))
        ));
    }

    #[test]
    fn leading_asymptotic_reconstructs_eval() {
        let t = TrigPoly::cosine(0.5, 0.3).scale(-ONE);
        let up = t.index_data(Side::Up).unwrap();
        for y in [3.0, 4.0, 5.0] {
            let z = c(0.17, y);
            let approx = up.leading * (-TWO_PI_I * up.n as f64 * z).exp();
            let rel = (approx - t.eval(z)).norm() / t.eval(z).norm();
            // next harmonic is one step away: relative error ~ e^{-2πy}
            assert!(rel < 2.0 * (-2.0 * PI * y).exp(), "y = {y}: {rel:e}");
        }
    }

    #[test]
    fn harper_assumptions_hold() {
        let MatrixModel::Fourier(m) = MatrixModel::harper(0.5, 0.0) else {
            unreachable!()
        };
        let r = validate_assumptions(&m);
        assert!(r.all_hold(), "{r:?}");
        assert_eq!(r.indices[0].trace, Some(1));
        assert_eq!(r.indices[1].trace, Some(1));
    }

    #[test]
    fn zero_m12_fails_nondegeneracy() {
        let m = FourierMatrix::new([
            (-1, Mat2::real(1.0, 0.0, 0.0, 0.0)),
            (0, Mat2::real(0.0, 0.0, 1.0, 1.0)),
        ]);
        // [[e^{-2πiz}, 0], [1, 1]] has det e^{-2πiz}: not unimodular, so use an upper shear instead.
        assert!(m.is_err());
        let m = FourierMatrix::new([
            (0, Mat2::real(1.0, 0.0, 0.0, 1.0)),
            (1, Mat2::real(0.0, 0.0, 1.0, 0.0)),
        ])
        .unwrap();
        let r = validate_assumptions(&m);
        assert!(!r.offdiagonal_nondegenerate);
        assert!(!r.all_hold());
    }

    #[test]
    fn constant_matrix_fails_unbounded_flags() {
        let m = FourierMatrix::constant(Mat2::real(2.0, 1.0, 1.0, 1.0)).unwrap();
        let r = validate_assumptions(&m);
        assert_eq!((r.k, r.l), (0, 0));
        assert!(!r.k_positive && !r.l_positive);
        assert!(r.offdiagonal_nondegenerate);
        assert!(!r.all_hold());
    }

    #[test]
    fn companion_structure() {
        let m = companion_trig(&TrigPoly::default());
        assert_eq!(m.eval(c(0.4, 0.2)), Mat2::real(0.0, -1.0, 1.0, 0.0));

        let m = companion_trig(&TrigPoly::cosine(0.5, 0.0));
        assert_eq!(m.entry(0, 0).coeff(1), c(-0.5, 0.0));
        assert_eq!(m.entry(0, 0).coeff(-1), c(-0.5, 0.0));
        assert_eq!(m.entry(0, 1), &TrigPoly::constant(-ONE));
        assert_eq!(m.entry(1, 0), &TrigPoly::constant(ONE));
        assert!(m.entry(1, 1).is_zero());
    }

    #[test]
    fn description_round_trip_and_errors() {
        let json = r#"{"type":"companion_harper","lambda":0.5,"mu":0.0}"#;
        let d: MatrixDescription = serde_json::from_str(json).unwrap();
        assert_eq!(d.build().unwrap(), MatrixModel::harper(0.5, 0.0));

        let json = r#"{"type":"fourier","harmonics":[{"j":0,"m":[2,0,1,0,1,0,1,0]}]}"#;
        let d: MatrixDescription = serde_json::from_str(json).unwrap();
        assert_eq!(d.build().unwrap().eval(c(0.1, 0.1)), Mat2::real(2.0, 1.0, 1.0, 1.0));

        let json = r#"{"type":"polynomial","entries":[[[1,1,1],[0,1]],[[1,1],[1]]]}"#;
        let d: MatrixDescription = serde_json::from_str(json).unwrap();
        let m = d.build().unwrap();
        assert_eq!(m.trace(c(1.0, 0.0)), c(4.0, 0.0));

        let bad = r#"{"type":"fourier","harmonics":[{"j":0,"m":[2,0,0,0,0,0,2,0]}]}"#;
        let d: MatrixDescription = serde_json::from_str(bad).unwrap();
        assert!(d.build().is_err());
        assert!(serde_json::from_str::<MatrixDescription>(r#"{"type":"nope"}"#).is_err());
    }
}
