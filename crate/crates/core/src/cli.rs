//! Subcommands over chart files and their JSON reports.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::chart::{Chart, ChartFile};
use crate::connection::{metric_compatibility_residual, ContravariantConnection, Metric};
use crate::frobenius::{leaf_block_inverse, reconstruct, riemannian_a, FlatFrame, ReconstructOptions};
use crate::hawkins::{
    check_dt_equals_m, display_frame_form, frame_labels, hawkins_conditions, metacurvature_coords,
    metacurvature_def_frame, tensor_t, tensor_t_def_frame, FrameTensor, Hawkins, HawkinsInput,
};
use crate::poisson::{build_pi_r, probe_points, PoissonStructure};
use crate::symexpr::Scalar;
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

/// Tolerance of the symbolic-or-sampled zero tests.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Validate,
    Connection,
    Hawkins,
    Metacurvature,
    TensorT,
    Reconstruct,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Connection => "connection",
            Command::Hawkins => "hawkins",
            Command::Metacurvature => "metacurvature",
            Command::TensorT => "tensor-t",
            Command::Reconstruct => "reconstruct",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Options {
    pub tol: Option<f64>,
    pub grid: Option<usize>,
    pub step: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub report: Value,
    pub exit: i32,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.exit == EXIT_OK
    }

    pub fn json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("reports serialize")
    }
}

/// Exit code for a library error raised while a command runs.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotIntegrable { .. } => EXIT_CHECK_FAILED,
        Error::Residual { stage, .. } if *stage != "f_connection" => EXIT_CHECK_FAILED,
        _ => EXIT_PRECONDITION,
    }
}

fn envelope(cmd: Command, chart: &str, tol: f64, opts: &Options) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(cmd.name()));
    m.insert("chart".into(), json!(chart));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("seed".into(), json!(opts.seed));
    m.insert("tol".into(), json!(tol));
    m
}

fn finish(mut m: Map<String, Value>, body: Value, passed: bool) -> Outcome {
    if let Value::Object(b) = body {
        m.extend(b);
    }
    m.insert("passed".into(), json!(passed));
    Outcome {
        report: Value::Object(m),
        exit: if passed { EXIT_OK } else { EXIT_CHECK_FAILED },
    }
}

fn failure(mut m: Map<String, Value>, e: &Error) -> Outcome {
    m.insert("passed".into(), json!(false));
    m.insert("error".into(), json!(e.to_string()));
    Outcome {
        report: Value::Object(m),
        exit: exit_code(e),
    }
}

fn default_tol(cmd: Command, opts: &Options) -> f64 {
    opts.tol.unwrap_or(match cmd {
        Command::Reconstruct => 1e-6,
        _ => DEFAULT_ZERO_TOL,
    })
}

/// Runs one subcommand on a chart file.
pub fn run(cmd: Command, file: ChartFile, opts: &Options) -> Outcome {
    let tol = default_tol(cmd, opts);
    let env = envelope(cmd, &file.name, tol, opts);
    if !(tol > 0.0) || !tol.is_finite() {
        return failure(env, &Error::Expr(crate::ExprError::BadTolerance(tol)));
    }
    if cmd == Command::Validate {
        return match validate(&file, tol) {
            Ok((body, passed)) => finish(env, body, passed),
            Err(e) => failure(env, &e),
        };
    }
    let chart = match Chart::new(file) {
        Ok(c) => c,
        Err(e) => return failure(env, &e),
    };
    let res = match cmd {
        Command::Validate => unreachable!(),
        Command::Connection => connection(&chart),
        Command::Hawkins => hawkins(&chart, tol, opts.seed),
        Command::Metacurvature => metacurvature(&chart, tol, opts.seed),
        Command::TensorT => tensor(&chart, tol, opts.seed),
        Command::Reconstruct => reconstruction(&chart, tol, opts),
    };
    match res {
        Ok((body, passed)) => finish(env, body, passed),
        Err(e) => failure(env, &e),
    }
}

type Body = crate::Result<(Value, bool)>;

fn validate(file: &ChartFile, tol: f64) -> Body {
    let d = file.dim();
    let m = file.poisson_matrix()?;
    let names = &file.coordinates;
    let mut checks = Map::new();
    let mut passed = true;
    let bad = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).find(|&(i, j)| m[i][j] != -&m[j][i]);
    checks.insert(
        "antisymmetry".into(),
        json!({ "passed": bad.is_none(), "at": bad.map(|(i, j)| [i + 1, j + 1]) }),
    );
    if bad.is_some() {
        return Ok((json!({ "checks": checks }), false));
    }
    let pi = PoissonStructure::from_matrix(m)?;
    let jac = pi.jacobi_residual();
    passed &= jac.is_zero();
    checks.insert(
        "jacobi".into(),
        json!({ "passed": jac.is_zero(), "method": "symbolic", "residual": jac.display(names).to_string() }),
    );
    let base = &file.base_point;
    if base.len() != d {
        return Err(Error::InvalidChart(format!("base point has {} entries for {d} coordinates", base.len())));
    }
    if let Some(g) = file.metric_matrix()? {
        let ok = match Metric::new(g, base, false) {
            Ok(_) => true,
            Err(Error::DegenerateMetric) => false,
            Err(e) => return Err(e),
        };
        passed &= ok;
        checks.insert("metric_definite".into(), json!({ "passed": ok }));
    }
    if let Some(leaf) = file.leaf_count {
        let split = leaf_block_inverse(&pi, leaf);
        let ok = split.is_ok();
        passed &= ok;
        let constant = (0..leaf).all(|i| (0..leaf).all(|j| pi.entry(i, j).as_rat().is_some()));
        checks.insert(
            "split_form".into(),
            json!({ "passed": ok, "detail": split.err().map(|e| e.to_string()) }),
        );
        checks.insert("darboux_constant_block".into(), json!(constant));
    }
    let rank = pi.rank_at(base, tol)?;
    checks.insert("rank_at_base".into(), json!({ "rank": rank.rank, "regular": rank.regular }));
    if file.action.is_some() {
        let chart = Chart::new(file.clone())?;
        let action = chart.action.as_ref().expect("action present");
        let cybe = action.satisfies_cybe();
        let matches = build_pi_r(action)?.matrix() == pi.matrix();
        passed &= cybe && matches;
        checks.insert("action".into(), json!({ "cybe": cybe, "pi_matches": matches }));
    }
    Ok((json!({ "checks": checks }), passed))
}

fn connection(chart: &Chart) -> Body {
    let (dc, source) = chart.connection()?;
    let n = &chart.names;
    let d = dc.dim();
    let mut gammas = Vec::new();
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let g = dc.gamma(i, j, k);
                if !g.is_zero() {
                    gammas.push(json!({ "index": [i + 1, j + 1, k + 1], "value": g.display(n).to_string() }));
                }
            }
        }
    }
    let torsion = dc.first_torsion();
    let curvature = dc.first_curvature();
    let mut region = probe_points(&chart.base);
    region.push(chart.base.clone());
    let f = match dc.is_f_connection(&region, DEFAULT_ZERO_TOL) {
        Ok(r) => json!({ "regular": true, "is_f": r.is_f, "max_residual": r.max_residual }),
        Err(Error::NotRegular { point }) => json!({ "regular": false, "point": point }),
        Err(e) => return Err(e),
    };
    let is_f = f["is_f"].as_bool().unwrap_or(true);
    let compatible = chart.metric.as_ref().map(|g| {
        metric_compatibility_residual(&dc, g).iter().flatten().flatten().all(Scalar::is_zero)
    });
    let passed = torsion.is_none() && curvature.is_none() && is_f;
    Ok((
        json!({
            "source": source,
            "christoffel": gammas,
            "torsion_free": torsion.is_none(),
            "first_torsion": torsion.map(|(i, j, k)| [i + 1, j + 1, k + 1]),
            "flat": curvature.is_none(),
            "first_curvature": curvature.map(|(i, j, k, l)| [i + 1, j + 1, k + 1, l + 1]),
            "f_connection": f,
            "metric_compatible": compatible,
        }),
        passed,
    ))
}

fn hawkins(chart: &Chart, tol: f64, seed: u64) -> Body {
    let (dc, _) = chart.connection()?;
    let r = hawkins_conditions(HawkinsInput {
        dc,
        metric: chart.metric.as_ref(),
        leaf: chart.leaf()?,
        declared_flat: chart.file.declared_flat,
        base: &chart.base,
        names: &chart.names,
        domain: &chart.domain,
        tol,
        seed,
    })?;
    let passed = r.h1_flat && r.h2_metacurvature_zero && r.h3_volume_compatible.unwrap_or(true);
    Ok((serde_json::to_value(r).expect("serializable"), passed))
}

/// Flat frame of a chart declared flat: `A` from the metric when there are
/// transverse coordinates, zero otherwise.
pub fn chart_flat_frame(chart: &Chart, dc: ContravariantConnection) -> crate::Result<FlatFrame> {
    if !chart.file.declared_flat {
        return Err(Error::UnverifiedFrame("chart is not declared flat".into()));
    }
    let d = chart.dim();
    let leaf = chart.leaf()?;
    let a = match &chart.metric {
        Some(g) if leaf < d => riemannian_a(g, leaf, &chart.base)?,
        _ => vec![vec![Scalar::zero(); d - leaf]; leaf],
    };
    FlatFrame::new(dc, leaf, a)
}

fn table(t: &FrameTensor, labels: &[String]) -> Value {
    Value::Array(
        t.nonzero()
            .into_iter()
            .map(|(idx, w)| {
                json!({
                    "slots": idx.iter().map(|&i| labels[i].clone()).collect::<Vec<_>>(),
                    "value": display_frame_form(w, labels),
                })
            })
            .collect(),
    )
}

fn metacurvature(chart: &Chart, tol: f64, seed: u64) -> Body {
    let (dc, _) = chart.connection()?;
    let h = Hawkins::new(dc.clone())?;
    let ff = chart_flat_frame(chart, dc)?;
    let labels = frame_labels(&chart.names, ff.leaf(), ff.dim());
    let m = metacurvature_coords(&ff);
    let def = metacurvature_def_frame(&h, &ff)?;
    let agrees = crate::hawkins::tensor_zero(
        &FrameTensor {
            components: m.components.iter().zip(&def.components).map(|(a, b)| a - b).collect(),
            ..m.clone()
        },
        tol,
        &chart.domain,
        seed,
    )?;
    let symmetric = m.symmetry_violation();
    let transverse = m.transverse_slots_vanish();
    let passed = agrees.is_zero && symmetric.is_none() && transverse;
    Ok((
        json!({
            "components": table(&m, &labels),
            "zero": m.is_zero(),
            "method": "symbolic",
            "definition_agrees": agrees.is_zero,
            "definition_method": agrees.method,
            "symmetric": symmetric.is_none(),
            "transverse_slots_vanish": transverse,
        }),
        passed,
    ))
}

fn tensor(chart: &Chart, tol: f64, seed: u64) -> Body {
    let (dc, _) = chart.connection()?;
    let h = Hawkins::new(dc.clone())?;
    let ff = chart_flat_frame(chart, dc)?;
    let labels = frame_labels(&chart.names, ff.leaf(), ff.dim());
    let t = tensor_t(&ff);
    let def = tensor_t_def_frame(&h, &ff)?;
    let diff = FrameTensor {
        components: t.components.iter().zip(&def.components).map(|(a, b)| a - b).collect(),
        ..t.clone()
    };
    let agrees = crate::hawkins::tensor_zero(&diff, tol, &chart.domain, seed)?;
    let dtm = check_dt_equals_m(&ff, tol, &chart.domain, seed)?;
    let passed = agrees.is_zero && dtm.zero;
    Ok((
        json!({
            "components": table(&t, &labels),
            "zero": t.is_zero(),
            "method": "symbolic",
            "definition_agrees": agrees.is_zero,
            "dt_equals_m": dtm,
        }),
        passed,
    ))
}

fn reconstruction(chart: &Chart, tol: f64, opts: &Options) -> Body {
    let (dc, source) = chart.connection()?;
    let ff = chart_flat_frame(chart, dc)?;
    let mut ro = ReconstructOptions {
        tol,
        ..ReconstructOptions::default()
    };
    if let Some(n) = opts.grid {
        ro.nodes = n;
    }
    if let Some(h) = opts.step {
        ro.step = h;
    }
    let res = reconstruct(&ff, chart.metric.as_ref(), &chart.base, &chart.names, &ro)?;
    let base_node = res.grid.node_of(&chart.base)?;
    let z_at_base: Vec<Vec<f64>> = res.z.iter().map(|f| f.iter().map(|c| c.at(&base_node)).collect()).collect();
    let z_variation = res
        .z
        .iter()
        .flatten()
        .fold(0.0f64, |a, c| a.max(c.spread_from(&base_node)));
    let failed = res.residuals.first_failure(tol);
    Ok((
        json!({
            "source": source,
            "grid": { "nodes": res.grid.nodes(), "half_width": ro.half_width, "step": res.step },
            "method": "grid",
            "a": res.a,
            "c": res.c,
            "z_at_base": z_at_base,
            "z_max_variation": z_variation,
            "residuals": res.residuals,
            "failed_stage": failed.map(|(s, r)| json!({ "stage": s, "residual": r })),
        }),
        failed.is_none(),
    ))
}

/// Plain-text rendering of a report.
pub fn render_text(v: &Value) -> String {
    let mut out = String::new();
    render(v, 0, &mut out);
    out
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(a) if a.iter().all(|x| !x.is_object()) => {
            let parts: Option<Vec<String>> = a.iter().map(scalar_text).collect();
            parts.map(|p| format!("[{}]", p.join(", ")))
        }
        _ => None,
    }
}

fn render(v: &Value, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                match scalar_text(x) {
                    Some(s) => writeln!(out, "{pad}{k}: {s}").expect("write to string"),
                    None => {
                        writeln!(out, "{pad}{k}:").expect("write to string");
                        render(x, depth + 1, out);
                    }
                }
            }
        }
        Value::Array(a) => {
            for x in a {
                writeln!(out, "{pad}-").expect("write to string");
                render(x, depth + 1, out);
            }
        }
        x => writeln!(out, "{pad}{}", scalar_text(x).unwrap_or_default()).expect("write to string"),
    }
}
