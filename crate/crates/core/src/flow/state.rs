use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::equivariant::{RadialJet, SphereToSphere};
use crate::geometry::{embedding_data, EmbeddingDescriptor, ManifoldModel, WeightFunction};
use crate::grid::{DomainGrid, PeriodicGrid, RadialGrid};
use crate::pullback::{analyze_differential, DifferentialSample, PullbackReport};

use super::FlowError;

/// Pole values of an equivariant map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleCondition {
    /// ψ(0) = 0, ψ(π) = π.
    Degree1,
    /// ψ(0) = ψ(π) = 0.
    Degree0,
}

impl PoleCondition {
    pub fn values(self) -> (f64, f64) {
        match self {
            PoleCondition::Degree1 => (0.0, PI),
            PoleCondition::Degree0 => (0.0, 0.0),
        }
    }
}

/// Nodal values of a discretized map.
#[derive(Clone, Debug, PartialEq)]
pub enum MapField {
    /// Target angle ψ at the interior radial nodes.
    Radial { psi: Vec<f64>, poles: PoleCondition },
    /// Ambient coordinates, `dim` per node, node-major.
    Ambient { dim: usize, points: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapState {
    pub grid: DomainGrid,
    pub target: ManifoldModel,
    pub phi: WeightFunction,
    pub field: MapField,
    pub time: f64,
}

/// Built-in initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialMapSpec {
    Identity,
    Constant,
    /// ψ₀(r) = r + ε·sin(k r).
    Degree1Perturbed {
        epsilon: f64,
        mode: u32,
        #[serde(default)]
        require_two_nonnegative: bool,
    },
    /// ψ₀(r) = a·sin r.
    Degree0Bump {
        amplitude: f64,
        #[serde(default)]
        require_two_nonnegative: bool,
    },
    /// `F(x) = M x` between tori.
    TorusLinear {
        matrix: Vec<Vec<f64>>,
    },
    /// `F = ρ·normalize(a sin x₀, …, a sin x_{d−1}, 1)` into a sphere.
    TorusToSphereBump {
        amplitude: f64,
    },
    /// Radial: interior ψ values plus pole condition. Periodic: ambient points, node-major.
    Nodal {
        values: Vec<f64>,
        #[serde(default)]
        boundary: Option<PoleCondition>,
    },
}

/// Extremes of the initial pull-back profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialReport {
    pub min_margin: f64,
    /// Node index (interior numbering) of the minimum.
    pub argmin_node: usize,
    pub max_lambda: f64,
}

fn spec_err(msg: impl Into<String>) -> FlowError {
    FlowError::Spec(msg.into())
}

impl MapState {
    pub fn radial_grid(&self) -> Option<&RadialGrid> {
        self.grid.as_radial()
    }

    /// Geometry of the equivariant reduction, when the state is radial.
    pub fn sphere_pair(&self) -> Option<SphereToSphere> {
        let g = self.grid.as_radial()?;
        let (_, rho_n) = self.target.as_round_sphere()?;
        Some(SphereToSphere::new(g.sphere_dim, g.domain_radius, rho_n))
    }

    /// ψ at extended node `j ∈ 0..=J` (poles from the boundary condition).
    pub fn psi_extended(&self, j: usize) -> f64 {
        let MapField::Radial { psi, poles } = &self.field else {
            panic!("psi_extended on a non-radial state");
        };
        let (lo, hi) = poles.values();
        if j == 0 {
            lo
        } else if j == psi.len() + 1 {
            hi
        } else {
            psi[j - 1]
        }
    }

    /// Centered jet at extended node `j ∈ 1..J`.
    pub fn radial_jet(&self, j: usize) -> RadialJet {
        let g = self.grid.as_radial().expect("radial state");
        let h = g.spacing();
        let (m, c, p) = (
            self.psi_extended(j - 1),
            self.psi_extended(j),
            self.psi_extended(j + 1),
        );
        RadialJet {
            r: g.angle(j),
            psi: c,
            dpsi: (p - m) / (2.0 * h),
            ddpsi: (p - 2.0 * c + m) / (h * h),
        }
    }

    pub fn embedding(&self) -> Result<EmbeddingDescriptor, FlowError> {
        Ok(embedding_data(&self.target)?)
    }

    /// Centered first differences `∂_a F` at periodic node `idx`, projected
    /// to the tangent space of the target, as an ambient×d matrix.
    pub fn periodic_differential(&self, emb: &EmbeddingDescriptor, idx: usize) -> DMatrix<f64> {
        let g = self.grid.as_periodic().expect("periodic state");
        let MapField::Ambient { dim, points } = &self.field else {
            panic!("periodic state without ambient field");
        };
        let k = *dim;
        let q = &points[idx * k..(idx + 1) * k];
        let mut df = DMatrix::zeros(k, g.dim());
        let mut col = vec![0.0; k];
        for a in 0..g.dim() {
            let p = g.neighbor(idx, a, 1);
            let m = g.neighbor(idx, a, -1);
            emb.difference(
                &points[p * k..(p + 1) * k],
                &points[m * k..(m + 1) * k],
                &mut col,
            );
            let inv = 1.0 / (2.0 * g.spacing(a));
            col.iter_mut().for_each(|v| *v *= inv);
            emb.tangent_project(q, &mut col);
            for (i, v) in col.iter().enumerate() {
                df[(i, a)] = *v;
            }
        }
        df
    }

    /// Pull-back report at every interior node.
    pub fn node_reports(&self) -> Result<Vec<PullbackReport>, FlowError> {
        match &self.grid {
            DomainGrid::Equivariant1D(g) => {
                let pair = self
                    .sphere_pair()
                    .ok_or_else(|| spec_err("equivariant grid requires a round-sphere target"))?;
                Ok((1..g.intervals)
                    .map(|j| {
                        let jet = self.radial_jet(j);
                        let (a, b) = pair.stretches(&jet);
                        let mut l = vec![a];
                        l.extend(std::iter::repeat_n(b, g.sphere_dim - 1));
                        PullbackReport::from_singular_values(l, g.sphere_dim)
                    })
                    .collect())
            }
            DomainGrid::Periodic(g) => {
                let emb = self.embedding()?;
                Ok((0..g.len())
                    .map(|idx| {
                        analyze_differential(&DifferentialSample::orthonormal(
                            self.periodic_differential(&emb, idx),
                        ))
                    })
                    .collect())
            }
        }
    }

    /// Largest distance of a nodal value from the target (0 for radial states).
    pub fn manifold_defect(&self) -> Result<f64, FlowError> {
        match &self.field {
            MapField::Radial { .. } => Ok(0.0),
            MapField::Ambient { dim, points } => {
                let emb = self.embedding()?;
                Ok(points
                    .chunks(*dim)
                    .map(|p| emb.distance_to_manifold(p))
                    .fold(0.0, f64::max))
            }
        }
    }
}

fn initial_report(state: &MapState) -> Result<InitialReport, FlowError> {
    let reports = state.node_reports()?;
    let mut out = InitialReport {
        min_margin: f64::INFINITY,
        argmin_node: 0,
        max_lambda: 0.0,
    };
    for (i, r) in reports.iter().enumerate() {
        if r.two_nonneg_margin < out.min_margin {
            out.min_margin = r.two_nonneg_margin;
            out.argmin_node = i;
        }
        out.max_lambda = out.max_lambda.max(r.max_lambda());
    }
    Ok(out)
}

fn radial_state(
    g: &RadialGrid,
    target: &ManifoldModel,
    phi: &WeightFunction,
    poles: PoleCondition,
    f: impl Fn(f64) -> f64,
) -> MapState {
    MapState {
        grid: DomainGrid::Equivariant1D(g.clone()),
        target: target.clone(),
        phi: phi.clone(),
        field: MapField::Radial {
            psi: g.nodes().into_iter().map(f).collect(),
            poles,
        },
        time: 0.0,
    }
}

fn periodic_state(
    g: &PeriodicGrid,
    target: &ManifoldModel,
    phi: &WeightFunction,
    emb: &EmbeddingDescriptor,
    f: impl Fn(&[f64], &mut [f64]),
) -> MapState {
    let k = emb.ambient_dim();
    let mut points = vec![0.0; g.len() * k];
    for (idx, p) in points.chunks_mut(k).enumerate() {
        f(&g.coords(idx), p);
        emb.project(p);
    }
    MapState {
        grid: DomainGrid::Periodic(g.clone()),
        target: target.clone(),
        phi: phi.clone(),
        field: MapField::Ambient { dim: k, points },
        time: 0.0,
    }
}

fn check_cone(required: bool, report: &InitialReport) -> Result<(), FlowError> {
    if required && report.min_margin < -crate::pullback::ALGEBRA_TOL {
        return Err(spec_err(format!(
            "initial data is not 2-nonnegative: min margin {} at node {}",
            report.min_margin, report.argmin_node
        )));
    }
    Ok(())
}

/// Builds the initial state for a scenario and reports its pull-back extremes.
pub fn initial_map(
    spec: &InitialMapSpec,
    grid: &DomainGrid,
    target: &ManifoldModel,
    phi: &WeightFunction,
) -> Result<(MapState, InitialReport), FlowError> {
    target.validate()?;
    let mut required = false;
    let state = match grid {
        DomainGrid::Equivariant1D(g) => {
            let (dim, _) = target
                .as_round_sphere()
                .ok_or_else(|| spec_err("equivariant grids need a round-sphere (or CP¹) target"))?;
            if dim != g.sphere_dim {
                return Err(spec_err(format!(
                    "equivariant maps need equal dimensions, got S^{} → S^{dim}",
                    g.sphere_dim
                )));
            }
            if g.intervals < 4 {
                return Err(spec_err("radial grid needs at least 4 intervals"));
            }
            match spec {
                InitialMapSpec::Identity => {
                    radial_state(g, target, phi, PoleCondition::Degree1, |r| r)
                }
                InitialMapSpec::Constant => {
                    radial_state(g, target, phi, PoleCondition::Degree0, |_| 0.0)
                }
                InitialMapSpec::Degree1Perturbed {
                    epsilon,
                    mode,
                    require_two_nonnegative,
                } => {
                    if !epsilon.is_finite() || *mode == 0 {
                        return Err(spec_err(
                            "degree-1 perturbation needs finite ε and mode ≥ 1",
                        ));
                    }
                    required = *require_two_nonnegative;
                    let (e, k) = (*epsilon, *mode as f64);
                    radial_state(g, target, phi, PoleCondition::Degree1, |r| {
                        r + e * (k * r).sin()
                    })
                }
                InitialMapSpec::Degree0Bump {
                    amplitude,
                    require_two_nonnegative,
                } => {
                    if !amplitude.is_finite() {
                        return Err(spec_err("bump amplitude must be finite"));
                    }
                    required = *require_two_nonnegative;
                    let a = *amplitude;
                    radial_state(g, target, phi, PoleCondition::Degree0, |r| a * r.sin())
                }
                InitialMapSpec::Nodal { values, boundary } => {
                    if values.len() != g.len() {
                        return Err(spec_err(format!(
                            "expected {} interior values, got {}",
                            g.len(),
                            values.len()
                        )));
                    }
                    if values.iter().any(|v| !v.is_finite()) {
                        return Err(spec_err("nodal values must be finite"));
                    }
                    MapState {
                        grid: grid.clone(),
                        target: target.clone(),
                        phi: phi.clone(),
                        field: MapField::Radial {
                            psi: values.clone(),
                            poles: boundary.unwrap_or(PoleCondition::Degree1),
                        },
                        time: 0.0,
                    }
                }
                other => {
                    return Err(spec_err(format!(
                        "scenario {other:?} is not available on an equivariant grid"
                    )))
                }
            }
        }
        DomainGrid::Periodic(g) => {
            let emb = embedding_data(target)?;
            let k = emb.ambient_dim();
            let d = g.dim();
            match spec {
                InitialMapSpec::Constant => {
                    periodic_state(g, target, phi, &emb, |_, p| match &emb {
                        EmbeddingDescriptor::Sphere { radius, .. } => {
                            p.fill(0.0);
                            p[k - 1] = *radius;
                        }
                        EmbeddingDescriptor::Torus { .. } => p.fill(0.0),
                    })
                }
                InitialMapSpec::Identity => match &emb {
                    EmbeddingDescriptor::Torus { periods } => {
                        if *periods != g.periods {
                            return Err(spec_err("identity needs equal domain and target periods"));
                        }
                        periodic_state(g, target, phi, &emb, |x, p| p.copy_from_slice(x))
                    }
                    EmbeddingDescriptor::Sphere { dim: 1, radius } if d == 1 => {
                        let (l, rho) = (g.periods[0], *radius);
                        periodic_state(g, target, phi, &emb, |x, p| {
                            let th = 2.0 * PI * x[0] / l;
                            p[0] = rho * th.cos();
                            p[1] = rho * th.sin();
                        })
                    }
                    _ => return Err(spec_err("identity is defined for T→T and T¹→S¹")),
                },
                InitialMapSpec::TorusLinear { matrix } => {
                    let EmbeddingDescriptor::Torus { periods } = &emb else {
                        return Err(spec_err("torus_linear needs a flat torus target"));
                    };
                    if matrix.len() != k || matrix.iter().any(|row| row.len() != d) {
                        return Err(spec_err(format!("torus_linear matrix must be {k}×{d}")));
                    }
                    // M must carry the domain lattice into the target lattice.
                    for (a, row) in matrix.iter().enumerate() {
                        for (b, m) in row.iter().enumerate() {
                            let w = m * g.periods[b] / periods[a];
                            if !m.is_finite() || (w - w.round()).abs() > 1e-9 {
                                return Err(spec_err(format!(
                                    "torus_linear entry ({a},{b}) does not descend to the quotient"
                                )));
                            }
                        }
                    }
                    let m = matrix.clone();
                    periodic_state(g, target, phi, &emb, |x, p| {
                        for (a, row) in m.iter().enumerate() {
                            p[a] = row.iter().zip(x).map(|(mi, xi)| mi * xi).sum();
                        }
                    })
                }
                InitialMapSpec::TorusToSphereBump { amplitude } => {
                    let EmbeddingDescriptor::Sphere { dim, .. } = &emb else {
                        return Err(spec_err("torus_to_sphere_bump needs a sphere target"));
                    };
                    if *dim != d {
                        return Err(spec_err(
                            "torus_to_sphere_bump needs dim target = dim domain",
                        ));
                    }
                    if !amplitude.is_finite() {
                        return Err(spec_err("bump amplitude must be finite"));
                    }
                    let (a, periods) = (*amplitude, g.periods.clone());
                    periodic_state(g, target, phi, &emb, |x, p| {
                        for i in 0..d {
                            p[i] = a * (2.0 * PI * x[i] / periods[i]).sin();
                        }
                        p[d] = 1.0;
                    })
                }
                InitialMapSpec::Nodal { values, .. } => {
                    if values.len() != g.len() * k {
                        return Err(spec_err(format!(
                            "expected {} ambient coordinates, got {}",
                            g.len() * k,
                            values.len()
                        )));
                    }
                    if values.iter().any(|v| !v.is_finite()) {
                        return Err(spec_err("nodal values must be finite"));
                    }
                    periodic_state(g, target, phi, &emb, |x, p| {
                        let idx = node_of(g, x);
                        p.copy_from_slice(&values[idx * k..(idx + 1) * k]);
                    })
                }
                other => {
                    return Err(spec_err(format!(
                        "scenario {other:?} is not available on a periodic grid"
                    )))
                }
            }
        }
    };
    let report = initial_report(&state)?;
    check_cone(required, &report)?;
    Ok((state, report))
}

fn node_of(g: &PeriodicGrid, x: &[f64]) -> usize {
    let mut idx = 0;
    let mut stride = 1;
    for (a, xa) in x.iter().enumerate() {
        let i = (xa / g.spacing(a)).round() as usize % g.resolution[a];
        idx += i * stride;
        stride *= g.resolution[a];
    }
    idx
}
