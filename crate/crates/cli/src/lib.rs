//! `hmflow` command implementations: hypothesis checks, single runs and
//! parameter sweeps driven by a JSON configuration file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use hmflow_core::exec::{self, Execution};
use hmflow_core::flow::{
    run, DomainSpec, FlowConfig, FlowError, FlowParams, InitialMapSpec, InitialReport, MapField,
    MapState, RunOutcome, RunVerdict, Tolerances, WeightSpec,
};
use hmflow_core::geometry::{HypothesisReport, ManifoldModel};
use hmflow_core::monitors::{RigidityVerdict, TimeSeries, SERIES_HEADER};

pub mod exit {
    pub const OK: i32 = 0;
    pub const WEAK_ONLY: i32 = 2;
    pub const HYPOTHESES_FAIL: i32 = 3;
    pub const TIMED_OUT: i32 = 4;
    pub const BLOWUP: i32 = 5;
    pub const CONFIG: i32 = 64;
    pub const INTERNAL: i32 = 70;
    pub const IO: i32 = 74;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Invariant(_) => exit::INTERNAL,
            CliError::Io(_) => exit::IO,
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::InvariantViolation { .. } | FlowError::Monitor(_) => {
                CliError::Invariant(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_prefix() -> String {
    "run".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Artifacts go to `<dir>/<prefix>/`.
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            prefix: default_prefix(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParameter {
    /// Dotted path into the configuration, e.g. `initial_map.epsilon`.
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameters: Vec<SweepParameter>,
}

/// The configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub domain: DomainSpec,
    pub target: ManifoldModel,
    #[serde(default)]
    pub weight: WeightSpec,
    pub initial_map: InitialMapSpec,
    #[serde(default)]
    pub flow: FlowParams,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl RunConfigFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            domain: self.domain.clone(),
            target: self.target.clone(),
            weight: self.weight.clone(),
            initial_map: self.initial_map.clone(),
            flow: self.flow.clone(),
            tolerances: self.tolerances.clone(),
            seed: self.seed,
        }
    }

    /// Validated copy with every default written out.
    pub fn resolve(&self) -> Result<Self, CliError> {
        let fc = self.flow_config().resolve()?;
        if self.output.prefix.is_empty() || self.output.prefix.contains(['/', '\\']) {
            return Err(CliError::Config(format!(
                "output prefix must be a plain name, got {:?}",
                self.output.prefix
            )));
        }
        Ok(Self {
            domain: fc.domain,
            target: fc.target,
            weight: fc.weight,
            initial_map: fc.initial_map,
            flow: fc.flow,
            tolerances: fc.tolerances,
            seed: fc.seed,
            output: self.output.clone(),
            sweep: self.sweep.clone(),
        })
    }

    pub fn artifact_dir(&self) -> PathBuf {
        self.output.dir.join(&self.output.prefix)
    }
}

/// Strict/weak hypothesis check with its exit code.
pub fn cmd_check(cfg: &RunConfigFile) -> Result<(HypothesisReport, i32), CliError> {
    let cfg = cfg.resolve()?;
    let report = cfg.flow_config().hypotheses(true)?;
    let code = if report.strict_hypotheses_hold {
        exit::OK
    } else if report.weak_hypotheses_hold {
        exit::WEAK_ONLY
    } else {
        exit::HYPOTHESES_FAIL
    };
    Ok((report, code))
}

pub fn verdict_exit_code(v: RunVerdict) -> i32 {
    match v {
        RunVerdict::Converged => exit::OK,
        RunVerdict::TimedOut => exit::TIMED_OUT,
        RunVerdict::Blowup => exit::BLOWUP,
    }
}

#[derive(Debug, Serialize)]
struct VerdictFile<'a> {
    verdict: RunVerdict,
    steps: u64,
    final_time: f64,
    rigidity: &'a Option<RigidityVerdict>,
    hypotheses: &'a HypothesisReport,
    /// Strict curvature conditions hold and the initial data is 2-nonnegative;
    /// false marks exploration runs that the monitored contracts do not cover.
    within_hypotheses: bool,
    initial: &'a InitialReport,
    blowup: &'a Option<String>,
    tolerances: &'a Tolerances,
    config: &'a RunConfigFile,
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

/// Series CSV with full round-trip precision.
pub fn series_csv(series: &TimeSeries) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for r in &series.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f(r.t),
            fmt_f(r.energy_phi),
            fmt_f(r.min_margin),
            fmt_f(r.max_lambda),
            fmt_f(r.sup_tension),
            fmt_opt(r.bochner_residual_max),
            fmt_opt(r.alpha_residual_max),
            fmt_f(r.grad_df_sup),
        );
    }
    out
}

/// Per-node values and pull-back report fields.
pub fn final_state_csv(state: &MapState) -> Result<String, CliError> {
    let reports = state.node_reports()?;
    let n = reports.first().map_or(0, |r| r.lambdas.len());
    let mut out = String::from("node");
    let coords: Vec<Vec<f64>>;
    let values: Vec<Vec<f64>>;
    match &state.field {
        MapField::Radial { psi, .. } => {
            let g = state.radial_grid().expect("radial");
            out.push_str(",r,psi");
            coords = (1..g.intervals).map(|j| vec![g.angle(j)]).collect();
            values = psi.iter().map(|p| vec![*p]).collect();
        }
        MapField::Ambient { dim, points } => {
            let g = state.grid.as_periodic().expect("periodic");
            for a in 0..g.dim() {
                let _ = write!(out, ",x{a}");
            }
            for i in 0..*dim {
                let _ = write!(out, ",F{i}");
            }
            coords = (0..g.len()).map(|i| g.coords(i)).collect();
            values = points.chunks(*dim).map(|c| c.to_vec()).collect();
        }
    }
    for i in 0..n {
        let _ = write!(out, ",lambda{}", i + 1);
    }
    for i in 0..n {
        let _ = write!(out, ",alpha{}", i + 1);
    }
    out.push_str(
        ",two_nonneg_margin,energy_density,distance_nonincreasing,two_nonnegative,area_nonincreasing\n",
    );
    for (i, r) in reports.iter().enumerate() {
        let _ = write!(out, "{i}");
        for v in coords[i]
            .iter()
            .chain(&values[i])
            .chain(&r.lambdas)
            .chain(&r.alpha_eigs)
        {
            let _ = write!(out, ",{}", fmt_f(*v));
        }
        let _ = writeln!(
            out,
            ",{},{},{},{},{}",
            fmt_f(r.two_nonneg_margin),
            fmt_f(r.energy_density),
            r.distance_nonincreasing,
            r.two_nonnegative,
            r.area_nonincreasing
        );
    }
    Ok(out)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Runs one configuration and writes its artifacts to `dir`.
pub fn execute_run(
    cfg: &RunConfigFile,
    dir: &Path,
    exec: Execution,
) -> Result<RunOutcome, CliError> {
    let cfg = cfg.resolve()?;
    let outcome = run(&cfg.flow_config(), exec)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut echoed = cfg.clone();
    echoed.sweep = None;
    write(
        &dir.join("config.resolved.json"),
        &serde_json::to_string_pretty(&echoed).context("serializing config")?,
    )?;
    write(&dir.join("series.csv"), &series_csv(&outcome.series))?;
    write(
        &dir.join("final_state.csv"),
        &final_state_csv(&outcome.final_state)?,
    )?;
    let verdict = VerdictFile {
        verdict: outcome.verdict,
        steps: outcome.steps,
        final_time: outcome.final_state.time,
        rigidity: &outcome.rigidity,
        hypotheses: &outcome.hypotheses,
        within_hypotheses: outcome.hypotheses.holds()
            && outcome.initial.min_margin >= -hmflow_core::pullback::ALGEBRA_TOL,
        initial: &outcome.initial,
        blowup: &outcome.blowup,
        tolerances: &echoed.tolerances,
        config: &echoed,
    };
    write(
        &dir.join("verdict.json"),
        &serde_json::to_string_pretty(&verdict).context("serializing verdict")?,
    )?;
    Ok(outcome)
}

pub fn cmd_run(cfg: &RunConfigFile, exec: Execution) -> Result<(RunOutcome, i32), CliError> {
    let outcome = execute_run(cfg, &cfg.artifact_dir(), exec)?;
    let code = verdict_exit_code(outcome.verdict);
    Ok((outcome, code))
}

fn set_path(root: &mut Value, path: &str, v: Value) -> Result<(), CliError> {
    let bad = || CliError::Config(format!("sweep path {path:?} does not name a config field"));
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) || parts[0] == "sweep" || parts[0] == "output" {
        return Err(bad());
    }
    for (i, p) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(bad)?;
        if i + 1 == parts.len() {
            obj.insert((*p).to_string(), v);
            return Ok(());
        }
        cur = obj.get_mut(*p).ok_or_else(bad)?;
    }
    unreachable!()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub indices: Vec<usize>,
    pub values: Vec<Value>,
    pub verdict: String,
    pub classification: String,
    pub final_min_margin: Option<f64>,
    pub final_energy: Option<f64>,
    pub exit_code: i32,
}

/// Expands the sweep grid in lexicographic index order.
pub fn sweep_points(spec: &SweepSpec) -> Result<Vec<Vec<usize>>, CliError> {
    if spec.parameters.is_empty() || spec.parameters.len() > 2 {
        return Err(CliError::Config(format!(
            "a sweep takes one or two parameters, got {}",
            spec.parameters.len()
        )));
    }
    if let Some(p) = spec.parameters.iter().find(|p| p.values.is_empty()) {
        return Err(CliError::Config(format!(
            "empty value range for {:?}",
            p.path
        )));
    }
    let mut pts: Vec<Vec<usize>> = vec![vec![]];
    for p in &spec.parameters {
        pts = pts
            .into_iter()
            .flat_map(|pre| {
                (0..p.values.len()).map(move |i| {
                    let mut v = pre.clone();
                    v.push(i);
                    v
                })
            })
            .collect();
    }
    Ok(pts)
}

pub fn cmd_sweep(cfg: &RunConfigFile, exec: Execution) -> Result<(Vec<SweepRow>, i32), CliError> {
    let spec = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs a \"sweep\" section".into()))?;
    let points = sweep_points(&spec)?;
    let mut base = serde_json::to_value(cfg).context("serializing config")?;
    base.as_object_mut().expect("object").remove("sweep");
    // every point must at least parse before anything runs
    let mut configs = Vec::with_capacity(points.len());
    for idx in &points {
        let mut v = base.clone();
        for (p, &i) in spec.parameters.iter().zip(idx) {
            set_path(&mut v, &p.path, p.values[i].clone())?;
        }
        let c: RunConfigFile = serde_json::from_value(v)
            .map_err(|e| CliError::Config(format!("sweep point {idx:?}: {e}")))?;
        configs.push(c);
    }
    let root = cfg.artifact_dir();
    let rows: Vec<Result<SweepRow, CliError>> = exec::map_range(exec, points.len(), |k| {
        let idx = &points[k];
        let name = idx
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("_");
        let dir = root.join(format!("{}_{name}", cfg.output.prefix));
        let values = spec
            .parameters
            .iter()
            .zip(idx)
            .map(|(p, &i)| p.values[i].clone())
            .collect();
        let mut row = SweepRow {
            indices: idx.clone(),
            values,
            verdict: String::new(),
            classification: String::new(),
            final_min_margin: None,
            final_energy: None,
            exit_code: exit::OK,
        };
        match execute_run(&configs[k], &dir, Execution::Serial) {
            Ok(o) => {
                row.verdict = format!("{:?}", o.verdict);
                row.classification = o
                    .rigidity
                    .as_ref()
                    .map(|r| format!("{:?}", r.classification))
                    .unwrap_or_default();
                if let Some(last) = o.series.rows.last() {
                    row.final_min_margin = Some(last.min_margin);
                    row.final_energy = Some(last.energy_phi);
                }
                row.exit_code = verdict_exit_code(o.verdict);
            }
            Err(CliError::Io(e)) => return Err(CliError::Io(e)),
            Err(e) => {
                row.verdict = "Error".into();
                row.classification = e.to_string().replace([',', '\n'], ";");
                row.exit_code = e.exit_code();
            }
        }
        Ok(row)
    });
    let rows: Vec<SweepRow> = rows.into_iter().collect::<Result<_, _>>()?;
    fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    write(&root.join("sweep_summary.csv"), &sweep_csv(&spec, &rows))?;
    let code = if rows.iter().any(|r| r.exit_code == exit::INTERNAL) {
        exit::INTERNAL
    } else {
        exit::OK
    };
    Ok((rows, code))
}

fn csv_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.replace(',', ";"),
        Value::Number(n) => n.to_string(),
        other => other.to_string().replace(',', ";"),
    }
}

pub fn sweep_csv(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    for k in 0..spec.parameters.len() {
        let _ = write!(out, "index{k},");
    }
    for p in &spec.parameters {
        let _ = write!(out, "{},", p.path);
    }
    out.push_str("verdict,classification,final_min_margin,final_energy,exit_code\n");
    for r in rows {
        for i in &r.indices {
            let _ = write!(out, "{i},");
        }
        for v in &r.values {
            let _ = write!(out, "{},", csv_value(v));
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.verdict,
            r.classification,
            fmt_opt(r.final_min_margin),
            fmt_opt(r.final_energy),
            r.exit_code
        );
    }
    out
}
