//! TOML run configuration.
//!
//! Every field is optional at the parsing stage so that validation can report
//! all missing or invalid entries at once, each with its dotted field path.

use std::path::{Path, PathBuf};

use qutrit_otto::correlator::default_epsilon;
use qutrit_otto::detector::supports_disjoint;
use qutrit_otto::response::QuadPath;
use qutrit_otto::{CorrelatorKind, CorrelatorSpec, CycleConfig, GapConfig, GapSchedule, QuadConfig, SwitchingProfile, SwitchingShape, TabulatedCorrelator};
use serde::Deserialize;

use crate::error::{CliError, Result, Violation};
use crate::output::Format;

/// Coupling used when the configuration gives none.
pub const DEFAULT_LAMBDA: f64 = 1e-2;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub lambda: Option<f64>,
    pub gaps: Option<RawGaps>,
    pub correlator_i: Option<RawCorrelator>,
    pub correlator_ii: Option<RawCorrelator>,
    pub switching_i: Option<RawSwitching>,
    pub switching_ii: Option<RawSwitching>,
    pub quad: Option<RawQuad>,
    pub output: Option<RawOutput>,
    pub sweep: Option<RawSweep>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGaps {
    pub stage_i: Option<RawGap>,
    pub stage_ii: Option<RawGap>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGap {
    pub omega01: Option<f64>,
    pub omega12: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCorrelator {
    pub kind: Option<String>,
    pub temperature: Option<f64>,
    pub acceleration: Option<f64>,
    pub epsilon: Option<f64>,
    /// CSV table for `kind = "tabulated"`, relative to the config file.
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSwitching {
    pub shape: Option<String>,
    pub sigma: Option<f64>,
    pub center: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawQuad {
    pub rel_tol: Option<f64>,
    pub max_depth: Option<u32>,
    pub path: Option<QuadPath>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    #[serde(default)]
    pub axis: Vec<RawAxis>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAxis {
    pub param: String,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub n: Option<usize>,
}

/// A sweepable scalar of the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Lambda,
    Temperature(Side),
    Acceleration(Side),
    Epsilon(Side),
    Omega01(Side),
    Omega12(Side),
    Sigma(Side),
    Center(Side),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    I,
    II,
}

impl Side {
    fn suffix(self) -> &'static str {
        match self {
            Side::I => "i",
            Side::II => "ii",
        }
    }
}

impl Param {
    pub const NAMES: [&'static str; 15] = [
        "lambda",
        "correlator_i.temperature",
        "correlator_ii.temperature",
        "correlator_i.acceleration",
        "correlator_ii.acceleration",
        "correlator_i.epsilon",
        "correlator_ii.epsilon",
        "gaps.stage_i.omega01",
        "gaps.stage_ii.omega01",
        "gaps.stage_i.omega12",
        "gaps.stage_ii.omega12",
        "switching_i.sigma",
        "switching_ii.sigma",
        "switching_i.center",
        "switching_ii.center",
    ];

    pub fn parse(name: &str) -> Option<Param> {
        if name == "lambda" {
            return Some(Param::Lambda);
        }
        let (head, field) = name.rsplit_once('.')?;
        let side = |prefix: &str| match head.strip_prefix(prefix)? {
            "i" => Some(Side::I),
            "ii" => Some(Side::II),
            _ => None,
        };
        match field {
            "temperature" => side("correlator_").map(Param::Temperature),
            "acceleration" => side("correlator_").map(Param::Acceleration),
            "epsilon" => side("correlator_").map(Param::Epsilon),
            "omega01" => side("gaps.stage_").map(Param::Omega01),
            "omega12" => side("gaps.stage_").map(Param::Omega12),
            "sigma" => side("switching_").map(Param::Sigma),
            "center" => side("switching_").map(Param::Center),
            _ => None,
        }
    }

    pub fn name(self) -> String {
        match self {
            Param::Lambda => "lambda".into(),
            Param::Temperature(s) => format!("correlator_{}.temperature", s.suffix()),
            Param::Acceleration(s) => format!("correlator_{}.acceleration", s.suffix()),
            Param::Epsilon(s) => format!("correlator_{}.epsilon", s.suffix()),
            Param::Omega01(s) => format!("gaps.stage_{}.omega01", s.suffix()),
            Param::Omega12(s) => format!("gaps.stage_{}.omega12", s.suffix()),
            Param::Sigma(s) => format!("switching_{}.sigma", s.suffix()),
            Param::Center(s) => format!("switching_{}.center", s.suffix()),
        }
    }

    /// Overwrite this parameter in `raw`, creating missing sections.
    pub fn apply(self, raw: &mut RawConfig, value: f64) {
        match self {
            Param::Lambda => raw.lambda = Some(value),
            Param::Temperature(s) => correlator(raw, s).temperature = Some(value),
            Param::Acceleration(s) => correlator(raw, s).acceleration = Some(value),
            Param::Epsilon(s) => correlator(raw, s).epsilon = Some(value),
            Param::Omega01(s) => gap(raw, s).omega01 = Some(value),
            Param::Omega12(s) => gap(raw, s).omega12 = Some(value),
            Param::Sigma(s) => switching(raw, s).sigma = Some(value),
            Param::Center(s) => switching(raw, s).center = Some(value),
        }
    }
}

fn correlator(raw: &mut RawConfig, side: Side) -> &mut RawCorrelator {
    match side {
        Side::I => raw.correlator_i.get_or_insert_with(Default::default),
        Side::II => raw.correlator_ii.get_or_insert_with(Default::default),
    }
}

fn gap(raw: &mut RawConfig, side: Side) -> &mut RawGap {
    let gaps = raw.gaps.get_or_insert_with(Default::default);
    match side {
        Side::I => gaps.stage_i.get_or_insert_with(Default::default),
        Side::II => gaps.stage_ii.get_or_insert_with(Default::default),
    }
}

fn switching(raw: &mut RawConfig, side: Side) -> &mut RawSwitching {
    match side {
        Side::I => raw.switching_i.get_or_insert_with(Default::default),
        Side::II => raw.switching_ii.get_or_insert_with(Default::default),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
}

impl SweepSpec {
    /// Grid points in row-major order, first axis outermost.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut points = vec![Vec::new()];
        for axis in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSettings {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

/// A validated configuration. The raw form and base directory are kept so
/// sweeps can rebuild it point by point.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub cycle: CycleConfig,
    pub output: OutputSettings,
    pub sweep: Option<SweepSpec>,
    raw: RawConfig,
    base_dir: PathBuf,
}

impl RunConfig {
    /// Rebuild with `values` assigned to the sweep parameters.
    pub fn at_point(&self, params: &[Param], values: &[f64]) -> Result<CycleConfig> {
        let mut raw = self.raw.clone();
        for (p, &v) in params.iter().zip(values) {
            p.apply(&mut raw, v);
        }
        build_cycle(&raw, &self.base_dir).map_err(CliError::Validation)
    }
}

/// Parse and validate configuration text. Relative table paths resolve
/// against the working directory.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_in(text, Path::new("."))
}

/// Parse configuration text whose relative paths resolve against `base_dir`.
pub fn parse_config_in(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut violations = Vec::new();
    let cycle = match build_cycle(&raw, base_dir) {
        Ok(c) => Some(c),
        Err(v) => {
            violations.extend(v);
            None
        }
    };
    let sweep = match raw.sweep.as_ref().map(build_sweep).transpose() {
        Ok(s) => s,
        Err(v) => {
            violations.extend(v);
            None
        }
    };
    match cycle {
        Some(cycle) if violations.is_empty() => {
            let output = raw.output.as_ref().map(|o| OutputSettings { path: o.path.clone(), format: o.format }).unwrap_or_default();
            Ok(RunConfig { cycle, output, sweep, raw, base_dir: base_dir.to_path_buf() })
        }
        _ => Err(CliError::Validation(violations)),
    }
}

/// Read and validate a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    parse_config_in(&text, path.parent().unwrap_or(Path::new(".")))
}

fn reason(e: qutrit_otto::Error) -> String {
    match e {
        qutrit_otto::Error::InvalidParameter { reason, .. } => reason,
        other => other.to_string(),
    }
}

fn required<T: Copy>(v: Option<T>, field: &str, out: &mut Vec<Violation>) -> Option<T> {
    if v.is_none() {
        out.push(Violation::new(field, "missing"));
    }
    v
}

fn positive(v: Option<f64>, field: &str, out: &mut Vec<Violation>) -> Option<f64> {
    let v = required(v, field, out)?;
    if v > 0.0 && v.is_finite() {
        Some(v)
    } else {
        out.push(Violation::new(field, format!("must be positive and finite, got {v}")));
        None
    }
}

fn build_gap(raw: Option<&RawGap>, field: &str, out: &mut Vec<Violation>) -> Option<GapConfig> {
    let Some(raw) = raw else {
        out.push(Violation::new(field, "missing"));
        return None;
    };
    let a = positive(raw.omega01, &format!("{field}.omega01"), out);
    let b = positive(raw.omega12, &format!("{field}.omega12"), out);
    GapConfig::new(a?, b?).map_err(|e| out.push(Violation::new(field, reason(e)))).ok()
}

fn build_switching(raw: Option<&RawSwitching>, field: &str, out: &mut Vec<Violation>) -> Option<(SwitchingShape, f64, Option<f64>)> {
    let Some(raw) = raw else {
        out.push(Violation::new(field, "missing"));
        return None;
    };
    let shape = match raw.shape.as_deref().unwrap_or("gaussian").parse::<SwitchingShape>() {
        Ok(s) => Some(s),
        Err(e) => {
            out.push(Violation::new(format!("{field}.shape"), reason(e)));
            None
        }
    };
    let sigma = positive(raw.sigma, &format!("{field}.sigma"), out);
    let center = match raw.center {
        Some(c) if !c.is_finite() => {
            out.push(Violation::new(format!("{field}.center"), "must be finite"));
            return None;
        }
        c => c,
    };
    Some((shape?, sigma?, center))
}

/// Correlator kind with its parameters checked; ε is attached later.
fn build_kind(raw: Option<&RawCorrelator>, field: &str, base_dir: &Path, out: &mut Vec<Violation>) -> Option<CorrelatorKind> {
    let Some(raw) = raw else {
        out.push(Violation::new(field, "missing"));
        return None;
    };
    let Some(kind) = raw.kind.as_deref() else {
        out.push(Violation::new(format!("{field}.kind"), "missing"));
        return None;
    };
    let unexpected = |name: &str, present: bool, out: &mut Vec<Violation>| {
        if present {
            out.push(Violation::new(format!("{field}.{name}"), format!("not used by kind `{kind}`")));
        }
    };
    match kind {
        "inertial_vacuum" => {
            unexpected("temperature", raw.temperature.is_some(), out);
            unexpected("acceleration", raw.acceleration.is_some(), out);
            unexpected("table", raw.table.is_some(), out);
            Some(CorrelatorKind::InertialVacuum)
        }
        "accelerated_vacuum" => {
            unexpected("temperature", raw.temperature.is_some(), out);
            unexpected("table", raw.table.is_some(), out);
            positive(raw.acceleration, &format!("{field}.acceleration"), out).map(|acceleration| CorrelatorKind::AcceleratedVacuum { acceleration })
        }
        "inertial_thermal" => {
            unexpected("acceleration", raw.acceleration.is_some(), out);
            unexpected("table", raw.table.is_some(), out);
            positive(raw.temperature, &format!("{field}.temperature"), out).map(|temperature| CorrelatorKind::InertialThermal { temperature })
        }
        "tabulated" => {
            unexpected("temperature", raw.temperature.is_some(), out);
            unexpected("acceleration", raw.acceleration.is_some(), out);
            let Some(path) = raw.table.as_ref() else {
                out.push(Violation::new(format!("{field}.table"), "missing"));
                return None;
            };
            match TabulatedCorrelator::from_path(base_dir.join(path)) {
                Ok(t) => Some(CorrelatorKind::UserTabulated(t.into())),
                Err(e) => {
                    out.push(Violation::new(format!("{field}.table"), reason(e)));
                    None
                }
            }
        }
        other => {
            out.push(Violation::new(
                format!("{field}.kind"),
                format!("unknown kind `{other}` (expected inertial_vacuum, accelerated_vacuum, inertial_thermal or tabulated)"),
            ));
            None
        }
    }
}

fn build_quad(raw: Option<&RawQuad>, out: &mut Vec<Violation>) -> Option<QuadConfig> {
    let d = QuadConfig::default();
    let q = match raw {
        Some(r) => QuadConfig { rel_tol: r.rel_tol.unwrap_or(d.rel_tol), max_depth: r.max_depth.unwrap_or(d.max_depth), path: r.path.unwrap_or(d.path) },
        None => d,
    };
    match q.validate() {
        Ok(()) => Some(q),
        Err(qutrit_otto::Error::InvalidParameter { field, reason }) => {
            out.push(Violation::new(field, reason));
            None
        }
        Err(e) => {
            out.push(Violation::new("quad", e.to_string()));
            None
        }
    }
}

fn build_cycle(raw: &RawConfig, base_dir: &Path) -> std::result::Result<CycleConfig, Vec<Violation>> {
    let mut v = Vec::new();
    let lambda = match raw.lambda {
        None => Some(DEFAULT_LAMBDA),
        Some(l) if l > 0.0 && l.is_finite() => Some(l),
        Some(l) => {
            v.push(Violation::new("lambda", format!("must be positive and finite, got {l}")));
            None
        }
    };
    let gaps_raw = raw.gaps.as_ref();
    let stage_i = build_gap(gaps_raw.and_then(|g| g.stage_i.as_ref()), "gaps.stage_i", &mut v);
    let stage_ii = build_gap(gaps_raw.and_then(|g| g.stage_ii.as_ref()), "gaps.stage_ii", &mut v);
    let sw_i = build_switching(raw.switching_i.as_ref(), "switching_i", &mut v);
    let sw_ii = build_switching(raw.switching_ii.as_ref(), "switching_ii", &mut v);
    let kind_i = build_kind(raw.correlator_i.as_ref(), "correlator_i", base_dir, &mut v);
    let kind_ii = build_kind(raw.correlator_ii.as_ref(), "correlator_ii", base_dir, &mut v);
    let quad = build_quad(raw.quad.as_ref(), &mut v);

    let mut switching = |s: Option<(SwitchingShape, f64, Option<f64>)>, field: &str| {
        let (shape, sigma, center) = s?;
        SwitchingProfile::new(shape, center.unwrap_or(0.0), sigma).map_err(|e| v.push(Violation::new(field, reason(e)))).ok().map(|p| (p, center))
    };
    let chi_i = switching(sw_i, "switching_i").map(|(p, _)| p);
    let chi_ii = switching(sw_ii, "switching_ii").map(|(p, center)| match (center, &chi_i) {
        // Default placement: stage II starts half a window after stage I ends.
        (None, Some(first)) => p.with_center(first.center() + 1.5 * (first.half_window() + p.half_window())),
        _ => p,
    });
    if let (Some(a), Some(b)) = (&chi_i, &chi_ii) {
        if !supports_disjoint(a, b) {
            v.push(Violation::new(
                "switching_ii.center",
                format!(
                    "switching supports must be strictly disjoint: stage I window {:?} overlaps stage II window {:?}",
                    a.window(),
                    b.window()
                ),
            ));
        }
    }

    let omega_max = match (stage_i, stage_ii) {
        (Some(a), Some(b)) => Some(a.max_frequency().max(b.max_frequency())),
        _ => None,
    };
    let mut correlator = |kind: Option<CorrelatorKind>, chi: &Option<SwitchingProfile>, raw: Option<&RawCorrelator>, field: &str| {
        let kind = kind?;
        let eps = match raw.and_then(|r| r.epsilon) {
            Some(e) => e,
            None => default_epsilon(chi.as_ref()?.sigma(), omega_max?),
        };
        CorrelatorSpec::new(kind, eps).map_err(|e| v.push(Violation::new(format!("{field}.epsilon"), reason(e)))).ok()
    };
    let corr_i = correlator(kind_i, &chi_i, raw.correlator_i.as_ref(), "correlator_i");
    let corr_ii = correlator(kind_ii, &chi_ii, raw.correlator_ii.as_ref(), "correlator_ii");

    if !v.is_empty() {
        return Err(v);
    }
    let (Some(lambda), Some(a), Some(b), Some(chi_i), Some(chi_ii), Some(corr_i), Some(corr_ii), Some(quad)) =
        (lambda, stage_i, stage_ii, chi_i, chi_ii, corr_i, corr_ii, quad)
    else {
        return Err(vec![Violation::new("config", "incomplete configuration")]);
    };
    let cycle = CycleConfig {
        gaps: GapSchedule::new(a, b),
        correlator_i: corr_i,
        correlator_ii: corr_ii,
        switching_i: chi_i,
        switching_ii: chi_ii,
        lambda,
        quad,
    };
    cycle.validate().map_err(|e| match e {
        qutrit_otto::Error::InvalidParameter { field, reason } => vec![Violation::new(field, reason)],
        other => vec![Violation::new("config", other.to_string())],
    })?;
    Ok(cycle)
}

fn build_sweep(raw: &RawSweep) -> std::result::Result<SweepSpec, Vec<Violation>> {
    let mut v = Vec::new();
    if raw.axis.is_empty() || raw.axis.len() > 2 {
        v.push(Violation::new("sweep.axis", format!("need one or two axes, got {}", raw.axis.len())));
    }
    let mut axes = Vec::new();
    for (k, a) in raw.axis.iter().enumerate() {
        let field = format!("sweep.axis[{k}]");
        let param = Param::parse(&a.param);
        if param.is_none() {
            v.push(Violation::new(format!("{field}.param"), format!("unknown parameter `{}` (expected one of {})", a.param, Param::NAMES.join(", "))));
        }
        let values = match (&a.values, a.start, a.stop, a.n) {
            (Some(vals), None, None, None) if !vals.is_empty() && vals.iter().all(|x| x.is_finite()) => Some(vals.clone()),
            (Some(_), None, None, None) => {
                v.push(Violation::new(format!("{field}.values"), "must be a non-empty list of finite numbers"));
                None
            }
            (None, Some(start), Some(stop), Some(n)) if n >= 2 && start.is_finite() && stop.is_finite() => {
                Some((0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect())
            }
            (None, Some(_), Some(_), Some(1)) => Some(vec![a.start.unwrap_or_default()]),
            _ => {
                v.push(Violation::new(field.clone(), "give either `values` or all of `start`, `stop` and `n` (n ≥ 1)"));
                None
            }
        };
        if let (Some(param), Some(values)) = (param, values) {
            if axes.iter().any(|x: &Axis| x.param == param) {
                v.push(Violation::new(format!("{field}.param"), format!("parameter `{}` is swept twice", a.param)));
            }
            axes.push(Axis { param, values });
        }
    }
    if v.is_empty() {
        Ok(SweepSpec { axes })
    } else {
        Err(v)
    }
}
