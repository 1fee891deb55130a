//! JSON scenarios: one task on one matrix, producing a canonical JSON report
//! and optional CSV sidecars.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Result, WkbError};
use crate::geometry::{self, canonicity_check, find_canonical_vertical_lines, ScanOptions, VerticalCurve};
use crate::linalg::{ScaledVec2, C64, ZERO};
use crate::matrix::{validate_assumptions, MatrixDescription, MatrixModel, Side, UNIMODULAR_TOL};
use crate::momentum::{default_momentum, find_turning_points, infinity_momentum, MomentumBranch};
use crate::oracle::propagate;
use crate::phase::{
    omega_infinity_limit, omega_sum_at, phase_integral, residue_at, scalar_bridge, EigenPair, ResidueOptions, Sign,
};
use crate::roots::Rect;
use crate::wkb::{default_h_grid, global_residual_profile, order_report, Diagnostics, WkbCandidate};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

type Pt = [f64; 2];

const ROUNDING_FLOOR: f64 = 1e-12;

fn cz(p: Pt) -> C64 {
    C64::new(p[0], p[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Validate,
    TurningPoints,
    MomentumTrace,
    PhaseIntegral,
    Residue,
    OmegaLimit,
    CanonicalCheck,
    CanonicalScan,
    WkbVerify,
    WkbProfile,
    Propagate,
}

impl Task {
    pub const ALL: [Task; 11] = [
        Task::Validate,
        Task::TurningPoints,
        Task::MomentumTrace,
        Task::PhaseIntegral,
        Task::Residue,
        Task::OmegaLimit,
        Task::CanonicalCheck,
        Task::CanonicalScan,
        Task::WkbVerify,
        Task::WkbProfile,
        Task::Propagate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Validate => "validate",
            Task::TurningPoints => "turning-points",
            Task::MomentumTrace => "momentum-trace",
            Task::PhaseIntegral => "phase-integral",
            Task::Residue => "residue",
            Task::OmegaLimit => "omega-limit",
            Task::CanonicalCheck => "canonical-check",
            Task::CanonicalScan => "canonical-scan",
            Task::WkbVerify => "wkb-verify",
            Task::WkbProfile => "wkb-profile",
            Task::Propagate => "propagate",
        }
    }

    /// Default tolerances; any other key is rejected.
    pub fn default_tolerances(self) -> BTreeMap<String, f64> {
        let t: &[(&str, f64)] = match self {
            Task::Validate => &[("identities", 1e-10), ("sum_rule", 1e-9), ("unimodularity", UNIMODULAR_TOL)],
            Task::TurningPoints => &[],
            Task::MomentumTrace => &[("trace", 1e-10)],
            Task::PhaseIntegral => &[("quadrature", 1e-12), ("bridge", 1e-8), ("sum_rule", 1e-9)],
            Task::Residue => &[("residue", 1e-6), ("quadrature", 1e-10)],
            Task::OmegaLimit => &[("limit", 1e-6), ("decay_rel", 0.1), ("period", 1e-8)],
            Task::CanonicalCheck | Task::CanonicalScan => &[],
            Task::WkbVerify => &[("slope_band", 0.2), ("r_squared", 0.99)],
            Task::WkbProfile => &[("halving_band", 0.25)],
            Task::Propagate => &[],
        };
        t.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

fn default_matrix() -> MatrixDescription {
    MatrixDescription::CompanionHarper { lambda: 0.5, mu: 0.0 }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_matrix")]
    pub matrix: MatrixDescription,
    pub task: Task,
    #[serde(default)]
    pub parameters: Map<String, Value>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub record_timing: bool,
}

impl Scenario {
    pub fn new(task: Task) -> Self {
        Scenario {
            matrix: default_matrix(),
            task,
            parameters: Map::new(),
            tolerances: BTreeMap::new(),
            seed: None,
            record_timing: false,
        }
    }

    /// Parses a scenario, naming the offending field and position on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            WkbError::InvalidInput(format!("scenario field `{path}`: {}", e.into_inner()))
        })
    }
}

// Task parameters. Every field has a default; unknown fields are rejected.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ValidateParams {
    samples: usize,
    #[serde(rename = "box")]
    region: [f64; 4],
}

impl Default for ValidateParams {
    fn default() -> Self {
        ValidateParams {
            samples: 100,
            region: [-1.0, 1.0, -1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TurningParams {
    region: [f64; 4],
    expected_count: Option<usize>,
}

impl Default for TurningParams {
    fn default() -> Self {
        TurningParams {
            region: [-0.25, 0.75, -0.5, 0.5],
            expected_count: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TraceParams {
    z_ref: Pt,
    p_ref: Option<Pt>,
    path: Vec<Pt>,
    samples_per_unit: usize,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams {
            z_ref: [0.25, 0.0],
            p_ref: None,
            path: vec![[0.25, 0.0], [0.25, 1.0]],
            samples_per_unit: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PhaseParams {
    z_ref: Pt,
    p_ref: Option<Pt>,
    path: Vec<Pt>,
    sign: Sign,
}

impl Default for PhaseParams {
    fn default() -> Self {
        PhaseParams {
            z_ref: [0.25, 0.0],
            p_ref: None,
            path: vec![[0.25, 0.0], [0.4, 0.1], [0.3, -0.1]],
            sign: Sign::Plus,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ResidueParams {
    z_ref: Pt,
    p_ref: Option<Pt>,
    at: Pt,
    sign: Sign,
    radius: Option<f64>,
    turns: Option<u32>,
}

impl Default for ResidueParams {
    fn default() -> Self {
        ResidueParams {
            z_ref: [0.25, 0.0],
            p_ref: None,
            at: [0.0, 0.20960035913949135],
            sign: Sign::Plus,
            radius: None,
            turns: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LimitParams {
    z_ref: Pt,
    p_ref: Option<Pt>,
    side: Side,
    sign: Sign,
    y: f64,
}

impl Default for LimitParams {
    fn default() -> Self {
        LimitParams {
            z_ref: [0.25, 0.0],
            p_ref: None,
            side: Side::Up,
            sign: Sign::Plus,
            y: crate::phase::LIMIT_Y,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CheckParams {
    z_ref: Pt,
    p_ref: Option<Pt>,
    line: f64,
    y: [f64; 2],
    /// Explicit curve nodes; overrides `line` and `y`.
    nodes: Option<Vec<Pt>>,
    unbounded: bool,
    samples_per_unit: usize,
    eps: f64,
    expect_canonical: bool,
}

impl Default for CheckParams {
    fn default() -> Self {
        CheckParams {
            z_ref: [0.25, 0.0],
            p_ref: None,
            line: 0.25,
            y: [-5.0, 5.0],
            nodes: None,
            unbounded: false,
            samples_per_unit: 20,
            eps: geometry::DEFAULT_EPS,
            expect_canonical: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScanParams {
    z_ref: Pt,
    p_ref: Option<Pt>,
    x: [f64; 2],
    y: [f64; 2],
    columns: usize,
    samples_per_unit: usize,
    eps: f64,
    expect_nonempty: bool,
    contains: Option<f64>,
}

impl Default for ScanParams {
    fn default() -> Self {
        ScanParams {
            z_ref: [0.25, 0.0],
            p_ref: None,
            x: [0.0, 0.5],
            y: [-3.0, 3.0],
            columns: 51,
            samples_per_unit: 20,
            eps: geometry::DEFAULT_EPS,
            expect_nonempty: true,
            contains: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum HGrid {
    Named(String),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct VerifyParams {
    z_ref: Pt,
    p_ref: Option<Pt>,
    at: Pt,
    z0: Option<Pt>,
    h_grid: HGrid,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            z_ref: [0.25, 0.0],
            p_ref: None,
            at: [0.3, 0.2],
            z0: None,
            h_grid: HGrid::Named("auto".into()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ProfileParams {
    z_ref: Pt,
    p_ref: Option<Pt>,
    line: f64,
    y: [f64; 2],
    h: Vec<f64>,
    sign: Sign,
    samples_per_unit: usize,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams {
            z_ref: [0.25, 0.0],
            p_ref: None,
            line: 0.25,
            y: [-4.0, 4.0],
            h: vec![1e-2, 5e-3],
            sign: Sign::Plus,
            samples_per_unit: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum InitSpec {
    Named(String),
    Vector([Pt; 2]),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PropagateParams {
    z_ref: Pt,
    p_ref: Option<Pt>,
    from: Pt,
    h: f64,
    steps: i64,
    init: InitSpec,
}

impl Default for PropagateParams {
    fn default() -> Self {
        PropagateParams {
            z_ref: [0.25, 0.0],
            p_ref: None,
            from: [0.25, 0.0],
            h: 0.01,
            steps: 100,
            init: InitSpec::Named("wkb+".into()),
        }
    }
}

fn parse_params<T: DeserializeOwned + Serialize>(map: &Map<String, Value>) -> Result<(T, Value)> {
    let params: T = serde_path_to_error::deserialize(Value::Object(map.clone())).map_err(|e| {
        let path = e.path().to_string();
        WkbError::InvalidInput(format!("parameters field `{path}`: {}", e.into_inner()))
    })?;
    let echo = serde_json::to_value(&params).map_err(|e| WkbError::InvalidInput(e.to_string()))?;
    Ok((params, echo))
}

fn branch(model: &Arc<MatrixModel>, z_ref: Pt, p_ref: Option<Pt>) -> Result<MomentumBranch> {
    match p_ref {
        Some(p) => MomentumBranch::with_value(model.clone(), cz(z_ref), cz(p)),
        None => MomentumBranch::new(model.clone(), cz(z_ref)),
    }
}

// Reports

/// One asserted invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub passed: bool,
    pub measured: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Check {
    pub fn flag(passed: bool) -> Self {
        Check {
            passed,
            measured: None,
            lower: None,
            upper: None,
        }
    }

    pub fn below(measured: f64, upper: f64) -> Self {
        Check {
            passed: measured < upper,
            measured: Some(measured),
            lower: None,
            upper: Some(upper),
        }
    }

    pub fn above(measured: f64, lower: f64) -> Self {
        Check {
            passed: measured > lower,
            measured: Some(measured),
            lower: Some(lower),
            upper: None,
        }
    }

    pub fn within(measured: f64, lower: f64, upper: f64) -> Self {
        Check {
            passed: (lower..=upper).contains(&measured),
            measured: Some(measured),
            lower: Some(lower),
            upper: Some(upper),
        }
    }
}

/// A CSV sidecar: header row, comma separated, LF line endings.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvFile {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvFile {
    fn new(name: &str, header: &[&str]) -> Self {
        CsvFile {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push_nums(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|x| fmt_float(*x)).collect());
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    pub csv: Vec<CsvFile>,
    pub passed: bool,
}

impl Outcome {
    pub fn json(&self) -> String {
        canonical_json(&self.report)
    }
}

struct TaskOutput {
    results: Value,
    checks: Vec<(String, Check)>,
    csv: Vec<CsvFile>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Parses, validates and runs `scenario`. Input problems are reported before
/// any computation starts.
pub fn run(scenario: &Scenario) -> Result<Outcome> {
    let started = Instant::now();
    let task = scenario.task;

    let mut tolerances = task.default_tolerances();
    for (k, v) in &scenario.tolerances {
        match tolerances.get_mut(k) {
            Some(slot) if v.is_finite() && *v > 0.0 => *slot = *v,
            Some(_) => return Err(WkbError::InvalidInput(format!("tolerance `{k}` must be positive and finite"))),
            None => {
                return Err(WkbError::InvalidInput(format!(
                    "unknown tolerance `{k}` for task {} (known: {})",
                    task.name(),
                    task.default_tolerances().keys().cloned().collect::<Vec<_>>().join(", ")
                )))
            }
        }
    }
    let model = Arc::new(scenario.matrix.build().map_err(|e| e.context("matrix"))?);
    let tol = |k: &str| tolerances[k];
    let p = &scenario.parameters;
    let ctx = |e: WkbError| e.context(task.name());

    let (echo, out) = match task {
        Task::Validate => {
            let (q, echo) = parse_params::<ValidateParams>(p)?;
            (echo, run_validate(&model, &q, scenario.seed, &tol).map_err(ctx)?)
        }
        Task::TurningPoints => {
            let (q, echo) = parse_params::<TurningParams>(p)?;
            (echo, run_turning(&model, &q).map_err(ctx)?)
        }
        Task::MomentumTrace => {
            let (q, echo) = parse_params::<TraceParams>(p)?;
            (echo, run_trace(&model, &q, &tol).map_err(ctx)?)
        }
        Task::PhaseIntegral => {
            let (q, echo) = parse_params::<PhaseParams>(p)?;
            (echo, run_phase(&model, &q, &tol).map_err(ctx)?)
        }
        Task::Residue => {
            let (q, echo) = parse_params::<ResidueParams>(p)?;
            (echo, run_residue(&model, &q, &tol).map_err(ctx)?)
        }
        Task::OmegaLimit => {
            let (q, echo) = parse_params::<LimitParams>(p)?;
            (echo, run_limit(&model, &q, &tol).map_err(ctx)?)
        }
        Task::CanonicalCheck => {
            let (q, echo) = parse_params::<CheckParams>(p)?;
            (echo, run_check(&model, &q).map_err(ctx)?)
        }
        Task::CanonicalScan => {
            let (q, echo) = parse_params::<ScanParams>(p)?;
            (echo, run_scan(&model, &q).map_err(ctx)?)
        }
        Task::WkbVerify => {
            let (q, echo) = parse_params::<VerifyParams>(p)?;
            (echo, run_verify(&model, &q, &tol).map_err(ctx)?)
        }
        Task::WkbProfile => {
            let (q, echo) = parse_params::<ProfileParams>(p)?;
            (echo, run_profile(&model, &q, &tol).map_err(ctx)?)
        }
        Task::Propagate => {
            let (q, echo) = parse_params::<PropagateParams>(p)?;
            (echo, run_propagate(&model, &q).map_err(ctx)?)
        }
    };

    let echo_scenario = Scenario {
        matrix: scenario.matrix.clone(),
        task,
        parameters: match echo {
            Value::Object(m) => m,
            _ => Map::new(),
        },
        tolerances: tolerances.clone(),
        seed: scenario.seed,
        record_timing: scenario.record_timing,
    };
    let passed = out.checks.iter().all(|(_, c)| c.passed);
    let checks: Map<String, Value> = out.checks.iter().map(|(k, c)| (k.clone(), to_value(c))).collect();
    let mut report = json!({
        "scenario": to_value(&echo_scenario),
        "results": out.results,
        "checks": checks,
        "passed": passed,
        "version": VERSION,
    });
    if scenario.record_timing {
        report["timing"] = json!({ "seconds": started.elapsed().as_secs_f64() });
    }
    Ok(Outcome {
        report,
        csv: out.csv,
        passed,
    })
}

// Task runners

fn sample_points(n: usize, r: [f64; 4], seed: Option<u64>) -> Vec<C64> {
    let [x0, x1, y0, y1] = r;
    match seed {
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (0..n)
                .map(|_| C64::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1)))
                .collect()
        }
        None => {
            // Additive recurrence with the plastic-number constants.
            let g = 1.324_717_957_244_746_f64;
            let (a1, a2) = (1.0 / g, 1.0 / (g * g));
            (1..=n)
                .map(|k| {
                    let u = (0.5 + a1 * k as f64).fract();
                    let v = (0.5 + a2 * k as f64).fract();
                    C64::new(x0 + (x1 - x0) * u, y0 + (y1 - y0) * v)
                })
                .collect()
        }
    }
}

fn run_validate(model: &Arc<MatrixModel>, q: &ValidateParams, seed: Option<u64>, tol: &dyn Fn(&str) -> f64) -> Result<TaskOutput> {
    let mut checks = Vec::new();
    let assumptions = match model.as_fourier() {
        Some(fm) => {
            let rep = validate_assumptions(fm);
            for (name, ok) in rep.flags() {
                if name != "unimodular" {
                    checks.push((name.to_string(), Check::flag(ok)));
                }
            }
            checks.push(("unimodular".into(), Check::below(rep.unimodularity_defect, tol("unimodularity"))));
            to_value(&rep)
        }
        None => {
            // Polynomial determinants are checked exactly on construction.
            checks.push(("unimodular".into(), Check::flag(true)));
            Value::Null
        }
    };

    let mut identity: f64 = 0.0;
    let mut sum_rule: f64 = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for z in sample_points(q.samples, q.region, seed) {
        let m = match model.try_eval(z) {
            Ok(m) => m,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let t = m.trace();
        let p = default_momentum(t);
        let regular = p.sin().norm() > 1e-3 && m.get(0, 1).norm() > 1e-3 * m.max_abs().max(1.0);
        if !regular {
            skipped += 1;
            continue;
        }
        identity = identity.max(EigenPair::from_matrix(&m, z, p).identity_defect(&m));
        sum_rule = sum_rule.max(omega_sum_at(model, z, p)?.norm());
        used += 1;
    }
    checks.push(("eigen_identities".into(), Check::below(identity, tol("identities"))));
    checks.push(("sum_rule".into(), Check::below(sum_rule, tol("sum_rule"))));
    checks.push(("regular_samples".into(), Check::flag(used > 0)));
    Ok(TaskOutput {
        results: json!({
            "assumptions": assumptions,
            "identity_max_defect": identity,
            "sum_rule_max_defect": sum_rule,
            "samples_used": used,
            "samples_skipped": skipped,
        }),
        checks,
        csv: Vec::new(),
    })
}

fn run_turning(model: &Arc<MatrixModel>, q: &TurningParams) -> Result<TaskOutput> {
    let [x0, x1, y0, y1] = q.region;
    let tps = find_turning_points(model, &Rect::new(x0, x1, y0, y1)?)?;
    let mut csv = CsvFile::new("turning_points.csv", &["re", "im", "trace_sign", "simple", "p1_re", "p1_im"]);
    let list: Vec<Value> = tps
        .iter()
        .map(|tp| {
            csv.rows.push(vec![
                fmt_float(tp.location.re),
                fmt_float(tp.location.im),
                tp.trace_sign.to_string(),
                tp.simple.to_string(),
                fmt_float(tp.p1.re),
                fmt_float(tp.p1.im),
            ]);
            json!({
                "re": tp.location.re,
                "im": tp.location.im,
                "trace_sign": tp.trace_sign,
                "simple": tp.simple,
                "p1": tp.p1,
            })
        })
        .collect();
    let mut checks = vec![("all_simple".to_string(), Check::flag(tps.iter().all(|t| t.simple)))];
    if let Some(n) = q.expected_count {
        checks.push(("count".into(), Check::flag(tps.len() == n)));
    }
    Ok(TaskOutput {
        results: json!({ "count": tps.len(), "turning_points": list }),
        checks,
        csv: vec![csv],
    })
}

fn run_trace(model: &Arc<MatrixModel>, q: &TraceParams, tol: &dyn Fn(&str) -> f64) -> Result<TaskOutput> {
    if q.path.is_empty() {
        return Err(WkbError::InvalidInput("path needs at least one node".into()));
    }
    let b = branch(model, q.z_ref, q.p_ref)?;
    let nodes: Vec<C64> = q.path.iter().map(|&p| cz(p)).collect();
    let mut points = vec![nodes[0]];
    for w in nodes.windows(2) {
        let n = (((w[1] - w[0]).norm() * q.samples_per_unit as f64).ceil() as usize).max(1);
        points.extend((1..=n).map(|k| w[0] + (w[1] - w[0]) * (k as f64 / n as f64)));
    }
    let ps = b.momentum_through(&points)?;
    let mut csv = CsvFile::new("momentum.csv", &["re", "im", "p_re", "p_im", "dp_re", "dp_im"]);
    let mut worst: f64 = 0.0;
    let mut samples = Vec::new();
    for (z, p) in points.iter().zip(&ps) {
        let t = model.trace(*z);
        worst = worst.max((p.cos() * 2.0 - t).norm() / t.norm().max(1.0));
        let dp = b.momentum_derivative_at(*z, *p)?;
        csv.push_nums(&[z.re, z.im, p.re, p.im, dp.re, dp.im]);
        samples.push(json!({ "z": z, "p": p, "dp": dp }));
    }
    Ok(TaskOutput {
        results: json!({ "samples": samples, "trace_max_defect": worst }),
        checks: vec![("trace_identity".into(), Check::below(worst, tol("trace")))],
        csv: vec![csv],
    })
}

fn run_phase(model: &Arc<MatrixModel>, q: &PhaseParams, tol: &dyn Fn(&str) -> f64) -> Result<TaskOutput> {
    let b = branch(model, q.z_ref, q.p_ref)?;
    let path: Vec<C64> = q.path.iter().map(|&p| cz(p)).collect();
    let pi = phase_integral(&b, &path, q.sign, tol("quadrature"))?;
    let ps = b.momentum_through(&path)?;
    let mut sum_rule: f64 = 0.0;
    for (z, p) in path.iter().zip(&ps) {
        sum_rule = sum_rule.max(omega_sum_at(model, *z, *p)?.norm());
    }
    let mut checks = vec![
        ("quadrature".to_string(), Check::below(pi.error_estimate, tol("quadrature").max(1e-12) * 100.0)),
        ("sum_rule".to_string(), Check::below(sum_rule, tol("sum_rule"))),
    ];
    let companion = is_companion(model);
    let bridge = if companion && path.len() > 1 {
        let (lhs, rhs) = scalar_bridge(&b, &path, tol("quadrature"))?;
        let dev = (lhs - rhs).norm() / rhs.norm();
        checks.push(("scalar_bridge".into(), Check::below(dev, tol("bridge"))));
        json!({ "exp_integral": lhs, "sqrt_sin_ratio": rhs, "relative_deviation": dev })
    } else {
        Value::Null
    };
    Ok(TaskOutput {
        results: json!({
            "value": pi.value,
            "error": pi.error_estimate,
            "meta": { "sign": pi.sign, "path": pi.path, "sum_rule_max_defect": sum_rule },
            "scalar_bridge": bridge,
        }),
        checks,
        csv: Vec::new(),
    })
}

/// `M = [[−v, −1], [1, 0]]` identically.
fn is_companion(model: &MatrixModel) -> bool {
    let probes = [C64::new(0.1, 0.2), C64::new(-0.3, 0.05), C64::new(0.7, -0.4)];
    probes.iter().all(|&z| {
        let m = model.eval(z);
        (m.get(0, 1) + 1.0).norm() < 1e-14 && (m.get(1, 0) - 1.0).norm() < 1e-14 && m.get(1, 1).norm() < 1e-14
    })
}

fn run_residue(model: &Arc<MatrixModel>, q: &ResidueParams, tol: &dyn Fn(&str) -> f64) -> Result<TaskOutput> {
    let b = branch(model, q.z_ref, q.p_ref)?;
    let opts = ResidueOptions {
        radius: q.radius,
        turns: q.turns,
        tol: tol("quadrature"),
        ..Default::default()
    };
    let r = residue_at(&b, cz(q.at), q.sign, &opts)?;
    let dev = (r.value - r.expected).norm();
    Ok(TaskOutput {
        checks: vec![("residue".into(), Check::below(dev, tol("residue")))],
        results: to_value(&r),
        csv: Vec::new(),
    })
}

fn run_limit(model: &Arc<MatrixModel>, q: &LimitParams, tol: &dyn Fn(&str) -> f64) -> Result<TaskOutput> {
    let b = branch(model, q.z_ref, q.p_ref)?;
    let lim = omega_infinity_limit(&b, q.side, q.sign, q.y)?;
    let fit = infinity_momentum(&b, q.side, q.y)?;
    let sigma = q.side.orientation();
    let z = C64::new(b.z_ref().re, sigma * q.y);
    let pz = b.momentum_at(z)?;
    let pz1 = b.momentum_along(&[z], z + 1.0)?;
    let period = pz1 - pz;
    let expected_period = 2.0 * PI * fit.n_t as f64 * fit.s as f64 * sigma;
    let period_dev = (period - expected_period).norm();
    let two_pi = 2.0 * PI;
    let mut csv = CsvFile::new("omega_limit.csv", &["y", "omega_re", "omega_im", "residual"]);
    for ((h, w), r) in lim.heights.iter().zip(&lim.values).zip(&lim.residuals) {
        csv.push_nums(&[sigma * h, w.re, w.im, *r]);
    }
    let last = *lim.residuals.last().expect("three heights");
    Ok(TaskOutput {
        checks: vec![
            ("limit".into(), Check::below(last, tol("limit"))),
            ("decay".into(), {
                // Already at rounding level: no decay left to measure.
                let mut c = Check::above(lim.decay_exponent, two_pi * (1.0 - tol("decay_rel")));
                c.passed |= lim.residuals[0] < ROUNDING_FLOOR * (1.0 + lim.expected.norm());
                c
            }),
            ("momentum_period".into(), Check::below(period_dev, tol("period"))),
        ],
        results: json!({
            "limit": lim,
            "asymptote": fit,
            "momentum_period": period,
            "expected_period": expected_period,
        }),
        csv: vec![csv],
    })
}

fn run_check(model: &Arc<MatrixModel>, q: &CheckParams) -> Result<TaskOutput> {
    let b = branch(model, q.z_ref, q.p_ref)?;
    let mut curve = match &q.nodes {
        Some(n) => VerticalCurve::new(n.iter().map(|&p| cz(p)).collect())?,
        None => VerticalCurve::line(q.line, q.y[0], q.y[1])?,
    };
    if q.unbounded {
        curve = curve.unbounded();
    }
    let rep = canonicity_check(&b, &curve, q.samples_per_unit, q.eps)?;
    let mut csv = CsvFile::new("margins.csv", &["y", "m1", "m2"]);
    for s in &rep.samples {
        csv.push_nums(&[s.y, s.m1, s.m2]);
    }
    Ok(TaskOutput {
        checks: vec![("canonical".into(), Check::flag(rep.strictly == q.expect_canonical))],
        results: to_value(&rep),
        csv: vec![csv],
    })
}

fn run_scan(model: &Arc<MatrixModel>, q: &ScanParams) -> Result<TaskOutput> {
    let b = branch(model, q.z_ref, q.p_ref)?;
    let opts = ScanOptions {
        columns: q.columns,
        samples_per_unit: q.samples_per_unit,
        eps: q.eps,
    };
    let rep = find_canonical_vertical_lines(&b, (q.x[0], q.x[1]), (q.y[0], q.y[1]), &opts)?;
    let mut csv = CsvFile::new("scan.csv", &["x", "canonical", "min_margin"]);
    for l in &rep.lines {
        csv.rows.push(vec![
            fmt_float(l.x),
            l.min_margin.is_some_and(|m| m >= q.eps).to_string(),
            l.min_margin.map(fmt_float).unwrap_or_default(),
        ]);
    }
    let mut checks = vec![("nonempty".to_string(), Check::flag(rep.intervals.is_empty() != q.expect_nonempty))];
    if let Some(x) = q.contains {
        let hit = rep.intervals.iter().any(|i| i.x0 <= x && x <= i.x1);
        checks.push(("contains".into(), Check::flag(hit)));
    }
    Ok(TaskOutput {
        checks,
        results: to_value(&rep),
        csv: vec![csv],
    })
}

fn run_verify(model: &Arc<MatrixModel>, q: &VerifyParams, tol: &dyn Fn(&str) -> f64) -> Result<TaskOutput> {
    let b = branch(model, q.z_ref, q.p_ref)?;
    let grid = match &q.h_grid {
        HGrid::Named(s) if s == "auto" => default_h_grid(),
        HGrid::Named(s) => return Err(WkbError::InvalidInput(format!("h_grid must be \"auto\" or a list, got {s:?}"))),
        HGrid::List(v) => v.clone(),
    };
    let z0 = q.z0.map(cz).unwrap_or(b.z_ref());
    let rep = order_report(&b, cz(q.at), z0, &grid)?;
    let band = tol("slope_band");
    let mut checks = Vec::new();
    let mut csv = CsvFile::new("wkb_verify.csv", &["diagnostic", "h", "value"]);
    let mut fits = Map::new();
    for (name, fit) in &rep.fits {
        let want = Diagnostics::expected_order(name);
        checks.push((format!("slope_{name}"), Check::within(fit.slope, want - band, want + band)));
        checks.push((format!("r_squared_{name}"), Check::above(fit.r_squared, tol("r_squared"))));
        for (h, v) in fit.h_grid.iter().zip(&fit.values) {
            csv.rows.push(vec![name.clone(), fmt_float(*h), fmt_float(*v)]);
        }
        let mut f = to_value(fit);
        f["expected_order"] = json!(want);
        fits.insert(name.clone(), f);
    }
    Ok(TaskOutput {
        checks,
        results: json!({
            "z": rep.z,
            "z0": rep.z0,
            "fits": fits,
            "max_route_mismatch": rep.max_route_mismatch,
        }),
        csv: vec![csv],
    })
}

fn run_profile(model: &Arc<MatrixModel>, q: &ProfileParams, tol: &dyn Fn(&str) -> f64) -> Result<TaskOutput> {
    if q.h.is_empty() {
        return Err(WkbError::InvalidInput("profile needs at least one h".into()));
    }
    let b = branch(model, q.z_ref, q.p_ref)?;
    let curve = VerticalCurve::line(q.line, q.y[0], q.y[1])?;
    let reports = q
        .h
        .iter()
        .map(|&h| global_residual_profile(&b, q.sign, &curve, h, q.samples_per_unit))
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let mut csv = CsvFile::new("profile.csv", &["h", "y", "residual"]);
    for r in &reports {
        for s in &r.samples {
            csv.push_nums(&[r.h, s.y, s.residual]);
        }
        let tag = fmt_short(r.h);
        checks.push((format!("decay_up_h{tag}"), Check::above(r.decay_up.unwrap_or(f64::NAN), 0.0)));
        checks.push((format!("decay_down_h{tag}"), Check::above(r.decay_down.unwrap_or(f64::NAN), 0.0)));
    }
    let band = tol("halving_band");
    let mut ratios = Vec::new();
    for w in reports.windows(2) {
        let step = w[0].h / w[1].h;
        let ratio = w[0].max_residual / w[1].max_residual;
        ratios.push(json!({ "h": [w[0].h, w[1].h], "ratio": ratio }));
        checks.push((
            format!("scaling_h{}_h{}", fmt_short(w[0].h), fmt_short(w[1].h)),
            Check::within(ratio, step * (1.0 - band), step * (1.0 + band)),
        ));
    }
    Ok(TaskOutput {
        checks,
        results: json!({ "profiles": reports, "ratios": ratios }),
        csv: vec![csv],
    })
}

fn run_propagate(model: &Arc<MatrixModel>, q: &PropagateParams) -> Result<TaskOutput> {
    let start = cz(q.from);
    let wkb = |sign: Sign| -> Result<(ScaledVec2, Option<(MomentumBranch, Sign)>)> {
        let b = branch(model, q.z_ref, q.p_ref)?;
        let cand = WkbCandidate::new(b.clone(), sign, start)?;
        Ok((cand.psi0(start, q.h)?, Some((b, sign))))
    };
    let (init, cand) = match &q.init {
        InitSpec::Named(s) if s == "wkb+" => wkb(Sign::Plus)?,
        InitSpec::Named(s) if s == "wkb-" => wkb(Sign::Minus)?,
        InitSpec::Named(s) => {
            return Err(WkbError::InvalidInput(format!(
                "init must be \"wkb+\", \"wkb-\" or [[re, im], [re, im]], got {s:?}"
            )))
        }
        InitSpec::Vector(v) => (ScaledVec2::new(ZERO, [cz(v[0]), cz(v[1])]), None),
    };
    let tr = propagate(model, start, init, q.h, q.steps)?;
    let mut csv = CsvFile::new("propagate.csv", &["n", "re_dir1", "im_dir1", "re_dir2", "im_dir2", "logmag"]);
    let mut finite = true;
    for k in 0..tr.values.len() {
        let d = tr.direction(k);
        let lm = tr.log_magnitude(k);
        finite &= lm.is_finite() && d.iter().all(|c| c.is_finite());
        csv.rows.push(vec![
            k.to_string(),
            fmt_float(d[0].re),
            fmt_float(d[0].im),
            fmt_float(d[1].re),
            fmt_float(d[1].im),
            fmt_float(lm),
        ]);
    }
    let last = tr.values.len() - 1;
    let end = tr.z(last);
    let wkb_angle = match cand {
        Some((b, sign)) if q.steps > 0 => {
            let c = WkbCandidate::new(b, sign, start)?;
            Some(crate::linalg::projective_distance(tr.terminal().v, c.psi0(end, q.h)?.v))
        }
        _ => None,
    };
    Ok(TaskOutput {
        checks: vec![("finite".into(), Check::flag(finite))],
        results: json!({
            "end": end,
            "terminal_direction": tr.direction(last),
            "terminal_log_magnitude": tr.log_magnitude(last),
            "wkb_angle": wkb_angle,
        }),
        csv: vec![csv],
    })
}

// Canonical JSON

/// 17 significant digits; round-trips every finite double.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn fmt_short(x: f64) -> String {
    format!("{x:e}")
}

/// Sorted keys, two-space indentation, floats via [`fmt_float`].
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fmt_float(n.as_f64().expect("f64 number")));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) => {
            let flat = a.iter().all(|x| !x.is_array() && !x.is_object());
            if flat {
                out.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, indent);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (i, x) in a.iter().enumerate() {
                    pad(out, indent + 2);
                    write_value(out, x, indent + 2);
                    out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
                }
                pad(out, indent);
                out.push(']');
            }
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(out, &m[*k], indent + 2);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected_with_a_path() {
        let e = Scenario::from_json(r#"{"task":"residue","matrx":{}}"#).unwrap_err();
        assert!(e.to_string().contains("matrx"), "{e}");
        let e = Scenario::from_json(r#"{"task":"no-such-task"}"#).unwrap_err();
        assert!(e.to_string().contains("task"), "{e}");
        let s = Scenario::from_json(r#"{"task":"residue","parameters":{"att":[0,0.2]}}"#).unwrap();
        let e = run(&s).unwrap_err();
        assert!(e.to_string().contains("att"), "{e}");
        let s = Scenario::from_json(r#"{"task":"residue","tolerances":{"nope":1e-3}}"#).unwrap();
        assert!(run(&s).is_err());
    }

    #[test]
    fn malformed_matrix_fails_before_computation() {
        let s = Scenario::from_json(
            r#"{"matrix":{"type":"polynomial","entries":[[[1],[1]],[[1],[1]]]},"task":"turning-points"}"#,
        )
        .unwrap();
        let e = run(&s).unwrap_err();
        assert!(matches!(e.root(), WkbError::NotUnimodular { .. }), "{e}");
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -2.5e-300, 1.0 / 3.0, 0.0, 6.02e23] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let v: Value = serde_json::from_str(&s).unwrap();
            assert_eq!(v.as_f64().unwrap(), x);
        }
    }

    #[test]
    fn canonical_json_sorts_keys() {
        let v = json!({"b": 1, "a": [1.5, 2], "c": {"z": null, "y": true}});
        let s = canonical_json(&v);
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.contains("1.5000000000000000e0, 2"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
