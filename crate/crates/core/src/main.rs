use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use wkbdiff::scenario::{run, Scenario, Task};
use wkbdiff::WkbError;

/// Complex WKB toolkit for Ψ(z+h) = M(z)Ψ(z).
#[derive(Parser)]
#[command(name = "wkbdiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON scenario file ("-" reads standard input).
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check matrix assumptions and pointwise eigen identities.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long = "box", value_name = "X0,X1,Y0,Y1")]
        region: Option<String>,
    },
    /// Locate turning points (tr M = ±2).
    TurningPoints {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "X0,X1,Y0,Y1")]
        region: Option<String>,
        #[arg(long)]
        expect: Option<usize>,
    },
    /// Continue the momentum along a path.
    MomentumTrace {
        #[command(flatten)]
        common: Common,
        /// Complex nodes, e.g. `0.25,0.25+1i`.
        #[arg(long, allow_hyphen_values = true)]
        path: Option<String>,
        #[arg(long)]
        samples_per_unit: Option<usize>,
    },
    /// Integrate Ω± along a path.
    PhaseIntegral {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        path: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        sign: Option<String>,
    },
    /// Residue of Ω± at a point.
    Residue {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "RE,IM", allow_hyphen_values = true)]
        at: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        sign: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        turns: Option<u32>,
    },
    /// Limit of ω± as Im z → ±∞.
    OmegaLimit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        side: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        sign: Option<String>,
        #[arg(long)]
        y: Option<f64>,
    },
    /// Canonicity margins along a vertical line.
    CanonicalCheck {
        #[command(flatten)]
        common: Common,
        /// `x=0.25` or `0.25`.
        #[arg(long)]
        line: Option<String>,
        #[arg(long, value_name = "Y0,Y1", allow_hyphen_values = true)]
        y: Option<String>,
        #[arg(long)]
        unbounded: bool,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        expect_canonical: Option<bool>,
    },
    /// Scan vertical lines for canonicity.
    CanonicalScan {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "X0,X1", allow_hyphen_values = true)]
        x: Option<String>,
        #[arg(long, value_name = "Y0,Y1", allow_hyphen_values = true)]
        y: Option<String>,
        #[arg(long)]
        columns: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Fit the h-scaling of the local WKB diagnostics.
    WkbVerify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "RE,IM", allow_hyphen_values = true)]
        at: Option<String>,
        #[arg(long, value_name = "RE,IM", allow_hyphen_values = true)]
        z0: Option<String>,
        /// `auto` or a comma-separated list.
        #[arg(long)]
        h_grid: Option<String>,
    },
    /// Relative residual of Ψ₀ along a vertical line.
    WkbProfile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        line: Option<String>,
        #[arg(long, value_name = "Y0,Y1", allow_hyphen_values = true)]
        y: Option<String>,
        /// One or more step sizes, comma separated.
        #[arg(long)]
        h: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        sign: Option<String>,
    },
    /// Exact lattice propagation.
    Propagate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "RE,IM", allow_hyphen_values = true)]
        from: Option<String>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        steps: Option<i64>,
        /// `wkb+`, `wkb-` or `re,im,re,im`.
        #[arg(long, allow_hyphen_values = true)]
        init: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Matrix description: inline JSON or a path to a JSON file.
    #[arg(long)]
    matrix: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_name = "RE,IM", allow_hyphen_values = true)]
    z_ref: Option<String>,
    #[arg(long, value_name = "RE,IM", allow_hyphen_values = true)]
    p_ref: Option<String>,
    /// Extra parameter as KEY=JSON; repeatable.
    #[arg(long = "set", value_name = "KEY=JSON")]
    set: Vec<String>,
    /// Tolerance override as KEY=VALUE; repeatable.
    #[arg(long = "tol", value_name = "KEY=VALUE")]
    tol: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    record_timing: bool,
    /// Print the scenario that this command runs and exit.
    #[arg(long)]
    print_scenario: bool,
}

fn bad(msg: impl Into<String>) -> WkbError {
    WkbError::InvalidInput(msg.into())
}

fn reals(s: &str, n: Option<usize>, what: &str) -> Result<Vec<f64>, WkbError> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad(format!("{what}: cannot parse {t:?} as a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    match n {
        Some(n) if v.len() != n => Err(bad(format!("{what}: expected {n} numbers, got {}", v.len()))),
        _ => Ok(v),
    }
}

/// `a`, `bi`, `a+bi`, `a-bi` (also with `j`).
fn complex(s: &str) -> Result<[f64; 2], WkbError> {
    let t = s.trim().replace(' ', "");
    let err = || bad(format!("cannot parse {s:?} as a complex number"));
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return Ok([t.parse().map_err(|_| err())?, 0.0]);
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let im = |x: &str| -> Result<f64, WkbError> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => x.parse().map_err(|_| err()),
        }
    };
    match split {
        Some(k) => Ok([body[..k].parse().map_err(|_| err())?, im(&body[k..])?]),
        None => Ok([0.0, im(body)?]),
    }
}

fn complex_list(s: &str) -> Result<Value, WkbError> {
    let pts = s.split(',').map(complex).collect::<Result<Vec<_>, _>>()?;
    Ok(json!(pts))
}

fn line_x(s: &str) -> Result<f64, WkbError> {
    let v = s.trim().strip_prefix("x=").unwrap_or(s.trim());
    v.parse().map_err(|_| bad(format!("--line: cannot parse {s:?}")))
}

fn matrix_arg(s: &str) -> Result<Value, WkbError> {
    let text = if s.trim_start().starts_with('{') {
        s.to_string()
    } else {
        fs::read_to_string(s).map_err(|e| bad(format!("cannot read matrix file {s}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| bad(format!("matrix JSON: {e}")))
}

/// Builds a scenario from shorthand flags; flags map one-to-one onto parameters.
fn shorthand(task: Task, common: Common, mut params: Map<String, Value>) -> Result<(Scenario, Common), WkbError> {
    let mut put = |k: &str, v: Value| {
        params.insert(k.to_string(), v);
    };
    if let Some(z) = &common.z_ref {
        put("z_ref", json!(reals(z, Some(2), "--z-ref")?));
    }
    if let Some(p) = &common.p_ref {
        put("p_ref", json!(reals(p, Some(2), "--p-ref")?));
    }
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("--set expects KEY=JSON, got {kv:?}")))?;
        let v: Value = serde_json::from_str(v)
            .or_else(|_| serde_json::from_str(&format!("\"{v}\"")))
            .map_err(|e| bad(format!("--set {k}: {e}")))?;
        put(k, v);
    }
    let mut scen = json!({ "task": task, "parameters": params });
    if let Some(m) = &common.matrix {
        scen["matrix"] = matrix_arg(m)?;
    }
    let mut tols = Map::new();
    for kv in &common.tol {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("--tol expects KEY=VALUE, got {kv:?}")))?;
        let v: f64 = v.parse().map_err(|_| bad(format!("--tol {k}: not a number")))?;
        tols.insert(k.to_string(), json!(v));
    }
    scen["tolerances"] = Value::Object(tols);
    if let Some(s) = common.seed {
        scen["seed"] = json!(s);
    }
    if common.record_timing {
        scen["record_timing"] = json!(true);
    }
    let scenario = Scenario::from_json(&scen.to_string())?;
    Ok((scenario, common))
}

fn sign_value(s: &str) -> Result<Value, WkbError> {
    let sign: wkbdiff::phase::Sign = s.parse()?;
    Ok(json!(sign))
}

fn build(cmd: Command) -> Result<(Scenario, Option<PathBuf>, bool), WkbError> {
    let mut p = Map::new();
    let mut put = |k: &str, v: Value| {
        p.insert(k.to_string(), v);
    };
    let (task, common) = match cmd {
        Command::Run { scenario, out } => {
            let text = if scenario.as_os_str() == "-" {
                std::io::read_to_string(std::io::stdin()).map_err(|e| bad(format!("stdin: {e}")))?
            } else {
                fs::read_to_string(&scenario).map_err(|e| bad(format!("cannot read {}: {e}", scenario.display())))?
            };
            return Ok((Scenario::from_json(&text)?, out, false));
        }
        Command::Validate { common, samples, region } => {
            if let Some(n) = samples {
                put("samples", json!(n));
            }
            if let Some(r) = region {
                put("box", json!(reals(&r, Some(4), "--box")?));
            }
            (Task::Validate, common)
        }
        Command::TurningPoints { common, region, expect } => {
            if let Some(r) = region {
                put("region", json!(reals(&r, Some(4), "--region")?));
            }
            if let Some(n) = expect {
                put("expected_count", json!(n));
            }
            (Task::TurningPoints, common)
        }
        Command::MomentumTrace {
            common,
            path,
            samples_per_unit,
        } => {
            if let Some(s) = path {
                put("path", complex_list(&s)?);
            }
            if let Some(n) = samples_per_unit {
                put("samples_per_unit", json!(n));
            }
            (Task::MomentumTrace, common)
        }
        Command::PhaseIntegral { common, path, sign } => {
            if let Some(s) = path {
                put("path", complex_list(&s)?);
            }
            if let Some(s) = sign {
                put("sign", sign_value(&s)?);
            }
            (Task::PhaseIntegral, common)
        }
        Command::Residue {
            common,
            at,
            sign,
            radius,
            turns,
        } => {
            if let Some(a) = at {
                put("at", json!(reals(&a, Some(2), "--at")?));
            }
            if let Some(s) = sign {
                put("sign", sign_value(&s)?);
            }
            if let Some(r) = radius {
                put("radius", json!(r));
            }
            if let Some(t) = turns {
                put("turns", json!(t));
            }
            (Task::Residue, common)
        }
        Command::OmegaLimit { common, side, sign, y } => {
            if let Some(s) = side {
                put("side", json!(wkbdiff::Side::parse(&s)?));
            }
            if let Some(s) = sign {
                put("sign", sign_value(&s)?);
            }
            if let Some(y) = y {
                put("y", json!(y));
            }
            (Task::OmegaLimit, common)
        }
        Command::CanonicalCheck {
            common,
            line,
            y,
            unbounded,
            eps,
            expect_canonical,
        } => {
            if let Some(l) = line {
                put("line", json!(line_x(&l)?));
            }
            if let Some(y) = y {
                put("y", json!(reals(&y, Some(2), "--y")?));
            }
            if unbounded {
                put("unbounded", json!(true));
            }
            if let Some(e) = eps {
                put("eps", json!(e));
            }
            if let Some(b) = expect_canonical {
                put("expect_canonical", json!(b));
            }
            (Task::CanonicalCheck, common)
        }
        Command::CanonicalScan {
            common,
            x,
            y,
            columns,
            eps,
        } => {
            if let Some(x) = x {
                put("x", json!(reals(&x, Some(2), "--x")?));
            }
            if let Some(y) = y {
                put("y", json!(reals(&y, Some(2), "--y")?));
            }
            if let Some(c) = columns {
                put("columns", json!(c));
            }
            if let Some(e) = eps {
                put("eps", json!(e));
            }
            (Task::CanonicalScan, common)
        }
        Command::WkbVerify { common, at, z0, h_grid } => {
            if let Some(a) = at {
                put("at", json!(reals(&a, Some(2), "--at")?));
            }
            if let Some(z) = z0 {
                put("z0", json!(reals(&z, Some(2), "--z0")?));
            }
            if let Some(g) = h_grid {
                if g == "auto" {
                    put("h_grid", json!("auto"));
                } else {
                    put("h_grid", json!(reals(&g, None, "--h-grid")?));
                }
            }
            (Task::WkbVerify, common)
        }
        Command::WkbProfile {
            common,
            line,
            y,
            h,
            sign,
        } => {
            if let Some(l) = line {
                put("line", json!(line_x(&l)?));
            }
            if let Some(y) = y {
                put("y", json!(reals(&y, Some(2), "--y")?));
            }
            if let Some(h) = h {
                put("h", json!(reals(&h, None, "--h")?));
            }
            if let Some(s) = sign {
                put("sign", sign_value(&s)?);
            }
            (Task::WkbProfile, common)
        }
        Command::Propagate {
            common,
            from,
            h,
            steps,
            init,
        } => {
            if let Some(f) = from {
                put("from", json!(reals(&f, Some(2), "--from")?));
            }
            if let Some(h) = h {
                put("h", json!(h));
            }
            if let Some(n) = steps {
                put("steps", json!(n));
            }
            if let Some(i) = init {
                if i.starts_with("wkb") {
                    put("init", json!(i));
                } else {
                    let v = reals(&i, Some(4), "--init")?;
                    put("init", json!([[v[0], v[1]], [v[2], v[3]]]));
                }
            }
            (Task::Propagate, common)
        }
    };
    let print = common.print_scenario;
    let (scenario, common) = shorthand(task, common, p)?;
    Ok((scenario, common.out, print))
}

fn write_sidecars(dir: &Path, files: &[wkbdiff::scenario::CsvFile]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for f in files {
        fs::write(dir.join(&f.name), f.render())?;
    }
    Ok(())
}

fn configure_threads() {
    if let Ok(v) = std::env::var("WKBDIFF_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("wkbdiff: ignoring WKBDIFF_THREADS={v:?} (expected a positive integer)"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = build(cli.command).and_then(|(scenario, out, print)| {
        if print {
            let v = serde_json::to_value(&scenario).map_err(|e| bad(e.to_string()))?;
            print!("{}", wkbdiff::scenario::canonical_json(&v));
            return Ok(true);
        }
        let outcome = run(&scenario)?;
        print!("{}", outcome.json());
        if let Some(dir) = out {
            write_sidecars(&dir, &outcome.csv).map_err(|e| bad(format!("writing CSV to {}: {e}", dir.display())))?;
        }
        Ok(outcome.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("wkbdiff: {e}");
            ExitCode::from(2)
        }
    }
}
