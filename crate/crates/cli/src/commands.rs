//! Subcommand implementations. Each returns the rendered output so the
//! binary only decides where it goes.

use qutrit_otto::cycle::run_cycle;
use qutrit_otto::dyson::{compare_draws, DrawBath, DrawComparison, OracleDraw, DEFAULT_LAMBDA};
use qutrit_otto::pwc::{pwc_report, region_grid, RegionGridSpec};
use qutrit_otto::response::stage_response_set;
use qutrit_otto::{CycleConfig, CycleReport, QuadConfig, ResponseSet, SignTriple, Stage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{Param, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{render_rows, to_json, Format};

/// Relative tolerance of the oracle comparison.
pub const ORACLE_REL_TOL: f64 = 0.01;

fn stage_sets(cfg: &CycleConfig) -> Result<(ResponseSet, ResponseSet)> {
    let (a, b) = rayon::join(
        || stage_response_set(&cfg.correlator_i, &cfg.switching_i, &cfg.gaps.stage_i, Stage::I, &cfg.quad),
        || stage_response_set(&cfg.correlator_ii, &cfg.switching_ii, &cfg.gaps.stage_ii, Stage::II, &cfg.quad),
    );
    Ok((a?, b?))
}

fn response_row(rs: &ResponseSet) -> Value {
    let warnings: Vec<String> = rs.warnings.iter().map(|w| serde_json::to_value(w).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()).collect();
    json!({
        "stage": if rs.stage == Stage::I { "I" } else { "II" },
        "f_plus_01": rs.f_plus_01,
        "f_minus_01": rs.f_minus_01,
        "f_plus_12": rs.f_plus_12,
        "f_minus_12": rs.f_minus_12,
        "x_re": rs.x_int.re,
        "x_im": rs.x_int.im,
        "y_re": rs.y_int.re,
        "y_im": rs.y_int.im,
        "z_re": rs.z_int.re,
        "z_im": rs.z_int.im,
        "quad_error": rs.quad_error,
        "warnings": warnings.join(";"),
    })
}

/// `response compute`: the response sets of both stages.
pub fn response_compute(cfg: &RunConfig, format: Format) -> Result<String> {
    let (a, b) = stage_sets(&cfg.cycle)?;
    match format {
        Format::Json => to_json(&json!({ "stage_i": a, "stage_ii": b })),
        Format::Csv => render_rows(&[response_row(&a), response_row(&b)], format),
    }
}

const CYCLE_COLUMNS: [&str; 22] = [
    "w_ext",
    "closed_form_w_ext",
    "w1",
    "q2",
    "w3",
    "q4",
    "p1",
    "p2",
    "delta_p1_i",
    "delta_p2_i",
    "closure_residual",
    "first_law_residual",
    "coherence_i_abs",
    "coherence_flagged",
    "sign_triple",
    "pwc_satisfied",
    "lhs",
    "s_01",
    "s_21",
    "theta",
    "quadrant",
    "pwc_error",
];

fn cycle_values(r: &CycleReport) -> [Value; 22] {
    let l = &r.ledger;
    let p = r.pwc.as_ref();
    [
        json!(l.w_ext),
        json!(r.closed_form_w_ext),
        json!(l.w1),
        json!(l.q2),
        json!(l.w3),
        json!(l.q4),
        json!(r.closure.p1),
        json!(r.closure.p2),
        json!(l.delta_p1_i),
        json!(l.delta_p2_i),
        json!(r.closure_residual),
        json!(r.first_law_residual),
        json!(l.c_i.norm()),
        json!(r.coherence_flagged),
        json!(p.map(|p| p.sign_triple.to_string())),
        json!(p.map(|p| p.pwc_satisfied)),
        json!(p.map(|p| p.lhs)),
        json!(p.map(|p| p.s_01)),
        json!(p.map(|p| p.s_21)),
        json!(p.map(|p| p.theta)),
        json!(p.map(|p| p.quadrant)),
        json!(r.pwc_error),
    ]
}

fn cycle_columns(row: &mut Map<String, Value>, r: Option<&CycleReport>) {
    match r {
        Some(r) => {
            for (name, v) in CYCLE_COLUMNS.iter().zip(cycle_values(r)) {
                row.insert((*name).into(), v);
            }
        }
        None => {
            for name in CYCLE_COLUMNS {
                row.insert(name.into(), Value::Null);
            }
        }
    }
}

/// `cycle run`: the full report as JSON, or one summary row as CSV.
pub fn cycle_run(cfg: &RunConfig, format: Format) -> Result<String> {
    let report = run_cycle(&cfg.cycle)?;
    match format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut row = Map::new();
            cycle_columns(&mut row, Some(&report));
            render_rows(&[Value::Object(row)], format)
        }
    }
}

/// `cycle sweep`: one row per grid point in grid order. Points that fail to
/// validate or evaluate keep their row and report the failure in `error`.
pub fn cycle_sweep(cfg: &RunConfig, format: Format) -> Result<String> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::Usage("configuration has no [sweep] section".into()))?;
    let params: Vec<Param> = sweep.axes.iter().map(|a| a.param).collect();
    let names: Vec<String> = params.iter().map(|p| p.name()).collect();
    let rows: Vec<Value> = sweep
        .points()
        .into_par_iter()
        .enumerate()
        .map(|(index, point)| {
            let outcome = cfg.at_point(&params, &point).and_then(|c| run_cycle(&c).map_err(CliError::from));
            let mut row = Map::new();
            row.insert("index".into(), json!(index));
            for (name, v) in names.iter().zip(&point) {
                row.insert(name.clone(), json!(v));
            }
            cycle_columns(&mut row, outcome.as_ref().ok());
            row.insert("error".into(), json!(outcome.err().map(|e| e.to_string())));
            Value::Object(row)
        })
        .collect();
    render_rows(&rows, format)
}

/// `pwc evaluate`: the PWC report of the configured cycle.
pub fn pwc_evaluate(cfg: &RunConfig, format: Format) -> Result<String> {
    let c = &cfg.cycle;
    let (a, b) = stage_sets(c)?;
    let report = pwc_report(&a, &b, c.switching_i.sigma(), c.switching_ii.sigma(), &c.gaps)?;
    match format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let v = serde_json::to_value(&report).map_err(|e| CliError::Usage(e.to_string()))?;
            render_rows(&[v], format)
        }
    }
}

/// `pwc region`: the satisfied set of a sign triple on the S-plane.
pub fn pwc_region(case: SignTriple, theta: f64, n: usize, format: Format) -> Result<String> {
    let grid = RegionGridSpec { n_s21: n, n_s01: n, ..RegionGridSpec::default() };
    let points = region_grid(case, theta, &grid)?;
    let rows: Vec<Value> = points.iter().map(|p| json!({ "s21": p.s21, "s01": p.s01, "satisfied": p.satisfied })).collect();
    render_rows(&rows, format)
}

/// Result of `oracle compare`; the caller turns failures into a nonzero exit.
#[derive(Debug, Clone)]
pub struct OracleOutput {
    pub text: String,
    pub failed: usize,
    pub total: usize,
}

impl OracleOutput {
    /// [`CliError::OracleMismatch`] when any draw failed.
    pub fn check(&self) -> Result<()> {
        if self.failed > 0 {
            Err(CliError::OracleMismatch { failed: self.failed, total: self.total })
        } else {
            Ok(())
        }
    }
}

fn compared_columns(row: &mut Map<String, Value>, name: &str, c: Option<&qutrit_otto::dyson::Compared>) {
    row.insert(format!("{name}_closed_form"), json!(c.map(|c| c.closed_form)));
    row.insert(format!("{name}_oracle"), json!(c.map(|c| c.oracle)));
    row.insert(format!("{name}_rel_error"), json!(c.map(|c| c.rel_error)));
    row.insert(format!("{name}_passed"), json!(c.map(|c| c.passed)));
}

fn oracle_row(index: usize, draw: &OracleDraw, outcome: &qutrit_otto::Result<DrawComparison>) -> Value {
    let (bath, bath_parameter) = match draw.bath {
        DrawBath::Thermal { temperature } => ("thermal", temperature),
        DrawBath::Accelerated { acceleration } => ("accelerated", acceleration),
    };
    let mut row = Map::new();
    row.insert("index".into(), json!(index));
    row.insert("omega01".into(), json!(draw.omega01));
    row.insert("omega12".into(), json!(draw.omega12));
    row.insert("p1".into(), json!(draw.p1));
    row.insert("p2".into(), json!(draw.p2));
    row.insert("sigma".into(), json!(draw.sigma));
    row.insert("epsilon".into(), json!(draw.epsilon()));
    row.insert("bath".into(), json!(bath));
    row.insert("bath_parameter".into(), json!(bath_parameter));
    let ok = outcome.as_ref().ok();
    compared_columns(&mut row, "delta_p1", ok.map(|c| &c.delta_p1));
    compared_columns(&mut row, "delta_p2", ok.map(|c| &c.delta_p2));
    compared_columns(&mut row, "re_c", ok.map(|c| &c.re_c));
    compared_columns(&mut row, "im_c", ok.map(|c| &c.im_c));
    row.insert("forbidden_coherence".into(), json!(ok.map(|c| c.forbidden_coherence)));
    row.insert("passed".into(), json!(ok.is_some_and(|c| c.passed())));
    row.insert("error".into(), json!(outcome.as_ref().err().map(|e| e.to_string())));
    Value::Object(row)
}

/// `oracle compare`: randomized draws of closed form against the oracle.
pub fn oracle_compare(draws: usize, seed: u64, grid: usize, format: Format) -> Result<OracleOutput> {
    if draws == 0 {
        return Err(CliError::Usage("--draws must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample: Vec<OracleDraw> = (0..draws).map(|_| OracleDraw::sample(&mut rng)).collect();
    let results = compare_draws(&sample, grid, DEFAULT_LAMBDA, &QuadConfig::default(), ORACLE_REL_TOL);
    let failed = results.iter().filter(|r| !r.as_ref().is_ok_and(|c| c.passed())).count();
    let rows: Vec<Value> = sample.iter().zip(&results).enumerate().map(|(k, (d, r))| oracle_row(k, d, r)).collect();
    Ok(OracleOutput { text: render_rows(&rows, format)?, failed, total: draws })
}
