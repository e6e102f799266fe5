use std::f64::consts::PI;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::{
    check_hypotheses_with, CheckOptions, HypothesisReport, ManifoldModel, SampleLayout,
    WeightFunction,
};
use crate::grid::{DomainGrid, PeriodicGrid, RadialGrid};

use super::operator::Scheme;
use super::state::{initial_map, InitialMapSpec, InitialReport, MapState};
use super::FlowError;

fn one() -> f64 {
    1.0
}

fn default_intervals() -> usize {
    400
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    /// Discretized by the equivariant radial grid.
    RoundSphere {
        dim: usize,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "default_intervals")]
        intervals: usize,
    },
    /// CP¹ is flowed as `S²(1/√c)`; higher dimensions support `check` only.
    FubiniStudy {
        complex_dim: usize,
        holo_sec: f64,
        #[serde(default = "default_intervals")]
        intervals: usize,
    },
    FlatTorus {
        dim: usize,
        /// Defaults to 2π on every axis.
        #[serde(default)]
        periods: Option<Vec<f64>>,
        resolution: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant {
        #[serde(default)]
        value: f64,
    },
    /// `A·cos(f·r)` on radial grids, `A·cos(f·x_axis)` on periodic grids.
    Cosine {
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        axis: usize,
    },
    /// Radial: `J + 1` values including the poles. Periodic: one per node.
    Nodal { values: Vec<f64> },
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Constant { value: 0.0 }
    }
}

/// `"auto"` or a fixed positive step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum TimeStep {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for TimeStep {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TimeStep::Auto => s.serialize_str("auto"),
            TimeStep::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for TimeStep {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(TimeStep::Fixed(v)),
            Raw::Text(t) if t == "auto" => Ok(TimeStep::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "dt must be a number or \"auto\", got {t:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    pub scheme: Scheme,
    pub dt: TimeStep,
    pub t_max: f64,
    /// Threshold on the sup-norm of the tension.
    pub convergence_tol: f64,
    /// Abort threshold on the nodal energy density.
    pub blowup_guard: f64,
    pub monitor_stride: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            scheme: Scheme::ExplicitEuler,
            dt: TimeStep::Auto,
            t_max: 10.0,
            convergence_tol: 1e-6,
            blowup_guard: 1e6,
            monitor_stride: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub trivial_tol: f64,
    pub iso_tol: f64,
    /// Allowed distance of periodic-grid values from the target.
    pub manifold_tol: f64,
    /// Random planes for the sectional-curvature check.
    pub check_samples: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            trivial_tol: 1e-3,
            iso_tol: 1e-3,
            manifold_tol: 1e-12,
            check_samples: 1000,
        }
    }
}

/// Everything that determines a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
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
    pub seed: u64,
}

/// A validated configuration turned into concrete objects.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub domain: ManifoldModel,
    pub grid: DomainGrid,
    pub initial: MapState,
    pub initial_report: InitialReport,
}

fn cfg_err(msg: impl Into<String>) -> FlowError {
    FlowError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), FlowError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(cfg_err(format!(
            "{name} must be a positive number, got {v}"
        )))
    }
}

impl FlowConfig {
    /// Fills defaults that depend on other fields and validates every parameter.
    pub fn resolve(&self) -> Result<FlowConfig, FlowError> {
        let mut c = self.clone();
        if let DomainSpec::FlatTorus { dim, periods, .. } = &mut c.domain {
            if periods.is_none() {
                *periods = Some(vec![2.0 * PI; *dim]);
            }
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), FlowError> {
        self.domain_model().validate()?;
        self.target.validate()?;
        match &self.domain {
            DomainSpec::RoundSphere { intervals, .. }
            | DomainSpec::FubiniStudy { intervals, .. } => {
                if *intervals < 8 {
                    return Err(cfg_err("intervals must be at least 8"));
                }
            }
            DomainSpec::FlatTorus {
                dim, resolution, ..
            } => {
                if resolution.len() != *dim {
                    return Err(cfg_err(format!(
                        "resolution needs {dim} entries, got {}",
                        resolution.len()
                    )));
                }
                if resolution.iter().any(|r| *r < 3) {
                    return Err(cfg_err("every resolution entry must be at least 3"));
                }
            }
        }
        let f = &self.flow;
        positive("t_max", f.t_max)?;
        positive("convergence_tol", f.convergence_tol)?;
        positive("blowup_guard", f.blowup_guard)?;
        if let TimeStep::Fixed(dt) = f.dt {
            positive("dt", dt)?;
        }
        if f.monitor_stride == 0 {
            return Err(cfg_err("monitor_stride must be at least 1"));
        }
        let t = &self.tolerances;
        positive("trivial_tol", t.trivial_tol)?;
        positive("iso_tol", t.iso_tol)?;
        positive("manifold_tol", t.manifold_tol)?;
        if t.check_samples == 0 {
            return Err(cfg_err("check_samples must be at least 1"));
        }
        match &self.weight {
            WeightSpec::Constant { value } if !value.is_finite() => {
                Err(cfg_err("weight value must be finite"))
            }
            WeightSpec::Cosine {
                amplitude,
                frequency,
                axis,
            } => {
                if !(amplitude.is_finite() && frequency.is_finite()) {
                    return Err(cfg_err("cosine weight parameters must be finite"));
                }
                if *axis >= self.domain_model().real_dim() {
                    return Err(cfg_err(format!("weight axis {axis} out of range")));
                }
                Ok(())
            }
            WeightSpec::Nodal { values } if values.iter().any(|v| !v.is_finite()) => {
                Err(cfg_err("weight values must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn domain_model(&self) -> ManifoldModel {
        match &self.domain {
            DomainSpec::RoundSphere { dim, radius, .. } => ManifoldModel::sphere(*dim, *radius),
            DomainSpec::FubiniStudy {
                complex_dim,
                holo_sec,
                ..
            } => ManifoldModel::fubini_study(*complex_dim, *holo_sec),
            DomainSpec::FlatTorus { dim, periods, .. } => ManifoldModel::FlatTorus {
                dim: *dim,
                periods: periods.clone().unwrap_or_else(|| vec![2.0 * PI; *dim]),
            },
        }
    }

    pub fn grid(&self) -> Result<DomainGrid, FlowError> {
        match &self.domain {
            DomainSpec::RoundSphere {
                dim,
                radius,
                intervals,
            } => {
                if *dim < 2 {
                    return Err(cfg_err("sphere domains need dim ≥ 2"));
                }
                Ok(DomainGrid::Equivariant1D(RadialGrid::new(
                    *dim, *radius, *intervals,
                )))
            }
            DomainSpec::FubiniStudy {
                complex_dim,
                holo_sec,
                intervals,
            } => {
                if *complex_dim != 1 {
                    return Err(cfg_err(
                        "flow runs on Fubini–Study domains need complex_dim = 1",
                    ));
                }
                Ok(DomainGrid::Equivariant1D(RadialGrid::new(
                    2,
                    1.0 / holo_sec.sqrt(),
                    *intervals,
                )))
            }
            DomainSpec::FlatTorus {
                dim,
                periods,
                resolution,
            } => {
                if !(1..=2).contains(dim) {
                    return Err(cfg_err("periodic grids support dim 1 or 2"));
                }
                Ok(DomainGrid::Periodic(PeriodicGrid::new(
                    periods.clone().unwrap_or_else(|| vec![2.0 * PI; *dim]),
                    resolution.clone(),
                )))
            }
        }
    }

    /// Weight function; a grid is needed for anything but constants.
    pub fn weight_function(&self, grid: Option<&DomainGrid>) -> Result<WeightFunction, FlowError> {
        let need_grid = || cfg_err("non-constant weights need a discretizable domain");
        match &self.weight {
            WeightSpec::Constant { value } => Ok(WeightFunction::constant(*value)),
            WeightSpec::Cosine {
                amplitude,
                frequency,
                axis,
            } => {
                let (a, f, ax) = (*amplitude, *frequency, *axis);
                match grid.ok_or_else(need_grid)? {
                    DomainGrid::Equivariant1D(g) => {
                        Ok(WeightFunction::sample_radial(g, |r| a * (f * r).cos()))
                    }
                    DomainGrid::Periodic(g) => Ok(WeightFunction::sample_periodic(g, |x| {
                        a * (f * x[ax]).cos()
                    })),
                }
            }
            WeightSpec::Nodal { values } => {
                let layout = match grid.ok_or_else(need_grid)? {
                    DomainGrid::Equivariant1D(g) => SampleLayout::Radial {
                        intervals: g.intervals,
                    },
                    DomainGrid::Periodic(g) => SampleLayout::Periodic {
                        resolution: g.resolution.clone(),
                    },
                };
                let phi = WeightFunction::GridSampled {
                    layout,
                    values: values.clone(),
                };
                phi.check_compatible(grid.expect("checked above"))?;
                Ok(phi)
            }
        }
    }

    /// Hypothesis report; uses the grid only when the weight needs one.
    pub fn hypotheses(&self, strict: bool) -> Result<HypothesisReport, FlowError> {
        let grid = match self.weight {
            WeightSpec::Constant { .. } => None,
            _ => Some(self.grid()?),
        };
        let phi = self.weight_function(grid.as_ref())?;
        Ok(check_hypotheses_with(
            &self.domain_model(),
            &self.target,
            &phi,
            grid.as_ref(),
            strict,
            CheckOptions {
                num_samples: self.tolerances.check_samples,
                seed: self.seed,
                ..CheckOptions::default()
            },
        )?)
    }

    pub fn build(&self) -> Result<Problem, FlowError> {
        let grid = self.grid()?;
        let phi = self.weight_function(Some(&grid))?;
        let (initial, initial_report) = initial_map(&self.initial_map, &grid, &self.target, &phi)?;
        Ok(Problem {
            domain: self.domain_model(),
            grid,
            initial,
            initial_report,
        })
    }
}
