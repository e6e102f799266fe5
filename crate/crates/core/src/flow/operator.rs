//! Method-of-lines right-hand side and time integrators.

use serde::{Deserialize, Serialize};

use crate::exec::{self, Execution};
use crate::geometry::{EmbeddingDescriptor, WeightFunction};
use crate::grid::{DomainGrid, PeriodicGrid};

use super::state::{MapField, MapState};
use super::FlowError;

pub const CFL_SAFETY: f64 = 0.2;
/// Fixed steps may exceed the automatic bound by at most this factor.
pub const CFL_SLACK: f64 = 10.0;
pub const DEFAULT_BLOWUP_GUARD: f64 = 1e6;

/// Periodic grids below this size are stepped serially.
const PAR_MIN_NODES: usize = 4096;
const CHUNK_NODES: usize = 1024;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ExplicitEuler,
    Rk4,
}

/// Sup-norms gathered while evaluating the right-hand side.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NodeStats {
    /// `sup |dF|²`.
    pub sup_energy_density: f64,
    /// Sup of the (weighted) tension magnitude.
    pub sup_tension: f64,
}

impl NodeStats {
    fn merge(self, o: NodeStats) -> NodeStats {
        NodeStats {
            sup_energy_density: nan_max(self.sup_energy_density, o.sup_energy_density),
            sup_tension: nan_max(self.sup_tension, o.sup_tension),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.sup_energy_density.is_finite() && self.sup_tension.is_finite()
    }
}

/// Max that propagates NaN.
#[inline]
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

struct RadialKernel {
    h: f64,
    lo: f64,
    hi: f64,
    cot: Vec<f64>,
    inv_sin2: Vec<f64>,
    dphi: Vec<f64>,
    inv_rho2: f64,
    ratio2: f64,
    target_radius: f64,
    n1: f64,
}

struct PeriodicKernel {
    grid: PeriodicGrid,
    emb: EmbeddingDescriptor,
    k: usize,
    /// ∂_a φ per node, node-major; empty for constant weights.
    grad_phi: Vec<f64>,
}

enum Kernel {
    Radial(RadialKernel),
    Periodic(PeriodicKernel),
}

impl RadialKernel {
    fn rates(&self, psi: &[f64], out: &mut [f64]) -> NodeStats {
        let m = psi.len();
        let inv_2h = 0.5 / self.h;
        let inv_h2 = 1.0 / (self.h * self.h);
        let mut sup_u = 0.0f64;
        let mut sup_v = 0.0f64;
        let mut bad = false;
        for i in 0..m {
            let pm = if i == 0 { self.lo } else { psi[i - 1] };
            let pp = if i + 1 == m { self.hi } else { psi[i + 1] };
            let p = psi[i];
            let d1 = (pp - pm) * inv_2h;
            let d2 = (pp - 2.0 * p + pm) * inv_h2;
            let (s, c) = p.sin_cos();
            let v = self.inv_rho2
                * (d2 + self.n1 * (self.cot[i] * d1 - s * c * self.inv_sin2[i])
                    - self.dphi[i] * d1);
            out[i] = v;
            let u = self.ratio2 * (d1 * d1 + self.n1 * s * s * self.inv_sin2[i]);
            bad |= !(v.is_finite() && u.is_finite());
            sup_u = sup_u.max(u);
            sup_v = sup_v.max(v.abs());
        }
        if bad {
            return NodeStats {
                sup_energy_density: f64::NAN,
                sup_tension: f64::NAN,
            };
        }
        NodeStats {
            sup_energy_density: sup_u,
            sup_tension: self.target_radius * sup_v,
        }
    }
}

impl PeriodicKernel {
    fn node_rate(
        &self,
        points: &[f64],
        idx: usize,
        out: &mut [f64],
        scratch: &mut [f64],
    ) -> (f64, f64) {
        let k = self.k;
        let g = &self.grid;
        let q = &points[idx * k..(idx + 1) * k];
        out.fill(0.0);
        let mut energy = 0.0;
        for a in 0..g.dim() {
            let h = g.spacing(a);
            let p = g.neighbor(idx, a, 1);
            let m = g.neighbor(idx, a, -1);
            let fp = &points[p * k..(p + 1) * k];
            let fm = &points[m * k..(m + 1) * k];
            // second difference
            self.emb.difference(fp, q, scratch);
            for i in 0..k {
                out[i] += scratch[i] / (h * h);
            }
            self.emb.difference(fm, q, scratch);
            for i in 0..k {
                out[i] += scratch[i] / (h * h);
            }
            // first difference, drift and energy
            self.emb.difference(fp, fm, scratch);
            scratch.iter_mut().for_each(|v| *v /= 2.0 * h);
            if !self.grad_phi.is_empty() {
                let dphi = self.grad_phi[idx * g.dim() + a];
                for i in 0..k {
                    out[i] -= dphi * scratch[i];
                }
            }
            self.emb.tangent_project(q, scratch);
            energy += scratch.iter().map(|v| v * v).sum::<f64>();
        }
        self.emb.tangent_project(q, out);
        let speed = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        (energy, speed)
    }

    fn rates(&self, points: &[f64], out: &mut [f64], exec: Execution) -> NodeStats {
        let k = self.k;
        let n = self.grid.len();
        let exec = if n >= PAR_MIN_NODES {
            exec
        } else {
            Execution::Serial
        };
        let partial = exec::map_chunks_mut(exec, out, CHUNK_NODES * k, |c, chunk| {
            let mut scratch = vec![0.0; k];
            let mut st = NodeStats::default();
            for (local, o) in chunk.chunks_mut(k).enumerate() {
                let idx = c * CHUNK_NODES + local;
                let (e, v) = self.node_rate(points, idx, o, &mut scratch);
                let e = if e.is_finite() && v.is_finite() {
                    e
                } else {
                    f64::NAN
                };
                st = st.merge(NodeStats {
                    sup_energy_density: e,
                    sup_tension: v,
                });
            }
            st
        });
        partial
            .into_iter()
            .fold(NodeStats::default(), NodeStats::merge)
    }
}

impl Kernel {
    fn new(state: &MapState) -> Result<Self, FlowError> {
        match (&state.grid, &state.field) {
            (DomainGrid::Equivariant1D(g), MapField::Radial { poles, psi }) => {
                let pair = state.sphere_pair().ok_or_else(|| {
                    FlowError::Spec("radial state needs a round-sphere target".into())
                })?;
                if psi.len() != g.len() {
                    return Err(FlowError::Spec(
                        "radial field length does not match the grid".into(),
                    ));
                }
                state
                    .phi
                    .check_compatible(&state.grid)
                    .map_err(FlowError::from)?;
                let (lo, hi) = poles.values();
                let nodes = 1..g.intervals;
                Ok(Kernel::Radial(RadialKernel {
                    h: g.spacing(),
                    lo,
                    hi,
                    cot: nodes.clone().map(|j| 1.0 / g.angle(j).tan()).collect(),
                    inv_sin2: nodes
                        .clone()
                        .map(|j| 1.0 / g.angle(j).sin().powi(2))
                        .collect(),
                    dphi: nodes
                        .map(|j| state.phi.radial_derivatives(g, j).0)
                        .collect(),
                    inv_rho2: 1.0 / (g.domain_radius * g.domain_radius),
                    ratio2: (pair.target_radius / pair.domain_radius).powi(2),
                    target_radius: pair.target_radius,
                    n1: g.sphere_dim as f64 - 1.0,
                }))
            }
            (DomainGrid::Periodic(g), MapField::Ambient { dim, points }) => {
                let emb = state.embedding()?;
                if *dim != emb.ambient_dim() || points.len() != g.len() * dim {
                    return Err(FlowError::Spec(
                        "ambient field does not match grid and target".into(),
                    ));
                }
                state
                    .phi
                    .check_compatible(&state.grid)
                    .map_err(FlowError::from)?;
                let grad_phi = match &state.phi {
                    WeightFunction::Constant { .. } => Vec::new(),
                    phi => (0..g.len())
                        .flat_map(|i| phi.periodic_gradient(g, i))
                        .collect(),
                };
                Ok(Kernel::Periodic(PeriodicKernel {
                    grid: g.clone(),
                    k: emb.ambient_dim(),
                    emb,
                    grad_phi,
                }))
            }
            _ => Err(FlowError::Spec(
                "map field does not match the grid kind".into(),
            )),
        }
    }

    fn rates(&self, values: &[f64], out: &mut [f64], exec: Execution) -> NodeStats {
        match self {
            Kernel::Radial(k) => k.rates(values, out),
            Kernel::Periodic(k) => k.rates(values, out, exec),
        }
    }

    fn project(&self, values: &mut [f64]) {
        if let Kernel::Periodic(k) = self {
            if let EmbeddingDescriptor::Sphere { .. } = k.emb {
                values.chunks_mut(k.k).for_each(|p| k.emb.project(p));
            }
        }
    }
}

fn field_values(state: &MapState) -> &[f64] {
    match &state.field {
        MapField::Radial { psi, .. } => psi,
        MapField::Ambient { points, .. } => points,
    }
}

fn field_values_mut(state: &mut MapState) -> &mut Vec<f64> {
    match &mut state.field {
        MapField::Radial { psi, .. } => psi,
        MapField::Ambient { points, .. } => points,
    }
}

/// `∂_t F` at every node: the angular velocity `ψ_t` on radial grids, the
/// ambient tangent vector on periodic grids.
#[derive(Clone, Debug, PartialEq)]
pub struct TensionField {
    /// Components per node.
    pub components: usize,
    pub values: Vec<f64>,
    pub stats: NodeStats,
}

impl TensionField {
    /// Sup over nodes of the tension magnitude in the target metric.
    pub fn sup_norm(&self) -> f64 {
        self.stats.sup_tension
    }
}

/// Weighted tension `ΔF − dF(∇φ)`.
pub fn tension_field(state: &MapState, blowup_guard: f64) -> Result<TensionField, FlowError> {
    let kernel = Kernel::new(state)?;
    let vals = field_values(state);
    let mut out = vec![0.0; vals.len()];
    let stats = kernel.rates(vals, &mut out, Execution::Serial);
    check_guard(stats, blowup_guard, state.time)?;
    Ok(TensionField {
        components: match &state.field {
            MapField::Radial { .. } => 1,
            MapField::Ambient { dim, .. } => *dim,
        },
        values: out,
        stats,
    })
}

fn check_guard(stats: NodeStats, guard: f64, time: f64) -> Result<(), FlowError> {
    if !stats.is_finite() || stats.sup_energy_density > guard {
        return Err(FlowError::BlowupDetected {
            time,
            energy_density: stats.sup_energy_density,
        });
    }
    Ok(())
}

/// Explicit integrator with reusable stage buffers.
pub struct Integrator {
    kernel: Kernel,
    exec: Execution,
    stencil_dim: usize,
    min_spacing: f64,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
    evaluated_at: Option<f64>,
}

impl Integrator {
    pub fn new(state: &MapState, exec: Execution) -> Result<Self, FlowError> {
        let n = field_values(state).len();
        Ok(Self {
            kernel: Kernel::new(state)?,
            exec,
            stencil_dim: state.grid.stencil_dim(),
            min_spacing: state.grid.min_spacing(),
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            stage: vec![0.0; n],
            evaluated_at: None,
        })
    }

    /// Evaluates the right-hand side at `state`, caching it for the next
    /// [`advance`](Self::advance).
    pub fn evaluate(&mut self, state: &MapState) -> NodeStats {
        let stats = self
            .kernel
            .rates(field_values(state), &mut self.k1, self.exec);
        self.evaluated_at = Some(state.time);
        stats
    }

    /// `cfl_safety·h²/(2·d·sup|dF|² + 1)`.
    pub fn auto_dt(&self, stats: &NodeStats) -> f64 {
        CFL_SAFETY * self.min_spacing * self.min_spacing
            / (2.0 * self.stencil_dim as f64 * stats.sup_energy_density + 1.0)
    }

    pub fn check_cfl(&self, dt: f64, stats: &NodeStats) -> Result<(), FlowError> {
        let bound = self.auto_dt(stats);
        if !(dt > 0.0) || dt > CFL_SLACK * bound {
            return Err(FlowError::CflViolation { dt, bound });
        }
        Ok(())
    }

    /// Advances `state` by `dt`; requires a prior [`evaluate`](Self::evaluate) at the same state.
    pub fn advance(
        &mut self,
        state: &mut MapState,
        dt: f64,
        scheme: Scheme,
        blowup_guard: f64,
    ) -> Result<(), FlowError> {
        if self.evaluated_at != Some(state.time) {
            let stats = self.evaluate(state);
            check_guard(stats, blowup_guard, state.time)?;
        }
        self.evaluated_at = None;
        let t0 = state.time;
        let exec = self.exec;
        let y = field_values_mut(state);
        match scheme {
            Scheme::ExplicitEuler => {
                for (v, k) in y.iter_mut().zip(&self.k1) {
                    *v += dt * k;
                }
                self.kernel.project(y);
            }
            Scheme::Rk4 => {
                let stages: [(f64, usize); 3] = [(0.5, 2), (0.5, 3), (1.0, 4)];
                for (c, target) in stages {
                    let prev = match target {
                        2 => &self.k1,
                        3 => &self.k2,
                        _ => &self.k3,
                    };
                    for ((s, v), k) in self.stage.iter_mut().zip(y.iter()).zip(prev) {
                        *s = v + c * dt * k;
                    }
                    self.kernel.project(&mut self.stage);
                    let out = match target {
                        2 => &mut self.k2,
                        3 => &mut self.k3,
                        _ => &mut self.k4,
                    };
                    let stats = self.kernel.rates(&self.stage, out, exec);
                    check_guard(stats, blowup_guard, t0)?;
                }
                let w = dt / 6.0;
                for i in 0..y.len() {
                    y[i] += w * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
                }
                self.kernel.project(y);
            }
        }
        state.time = t0 + dt;
        Ok(())
    }
}

/// One step of the flow, checking the step size against the automatic bound.
pub fn step(state: &MapState, dt: f64, scheme: Scheme) -> Result<MapState, FlowError> {
    step_with(state, dt, scheme, DEFAULT_BLOWUP_GUARD, Execution::Serial)
}

pub fn step_with(
    state: &MapState,
    dt: f64,
    scheme: Scheme,
    blowup_guard: f64,
    exec: Execution,
) -> Result<MapState, FlowError> {
    let mut integ = Integrator::new(state, exec)?;
    let stats = integ.evaluate(state);
    check_guard(stats, blowup_guard, state.time)?;
    integ.check_cfl(dt, &stats)?;
    let mut next = state.clone();
    integ.advance(&mut next, dt, scheme, blowup_guard)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::equivariant::{RadialJet, SphereToSphere};
    use crate::flow::state::{initial_map, InitialMapSpec};
    use crate::geometry::ManifoldModel;
    use crate::grid::RadialGrid;

    fn radial(spec: InitialMapSpec, j: usize) -> MapState {
        initial_map(
            &spec,
            &DomainGrid::Equivariant1D(RadialGrid::new(2, 1.0, j)),
            &ManifoldModel::sphere(2, 1.0),
            &WeightFunction::default(),
        )
        .unwrap()
        .0
    }

    #[test]
    fn identity_tension_vanishes() {
        let s = radial(InitialMapSpec::Identity, 400);
        let t = tension_field(&s, 1e6).unwrap();
        let h = PI / 400.0;
        assert!(t.sup_norm() <= 10.0 * h * h);
    }

    #[test]
    fn perturbed_tension_is_second_order() {
        // ψ = r + 0.1 sin 2r against the closed-form velocity, away from the
        // poles where cot r amplifies the O(h²) difference error to O(h)
        let pair = SphereToSphere::new(2, 1.0, 1.0);
        let errs: Vec<f64> = [50usize, 100, 200]
            .iter()
            .map(|&j| {
                let s = radial(
                    InitialMapSpec::Degree1Perturbed {
                        epsilon: 0.1,
                        mode: 2,
                        require_two_nonnegative: false,
                    },
                    j,
                );
                let g = s.radial_grid().unwrap().clone();
                let t = tension_field(&s, 1e6).unwrap();
                (j / 10..=9 * j / 10)
                    .map(|i| {
                        let r = g.angle(i);
                        let jet = RadialJet {
                            r,
                            psi: r + 0.1 * (2.0 * r).sin(),
                            dpsi: 1.0 + 0.2 * (2.0 * r).cos(),
                            ddpsi: -0.4 * (2.0 * r).sin(),
                        };
                        (t.values[i - 1] - pair.angular_velocity(&jet, 0.0)).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.9, "{errs:?}");
        }
    }

    #[test]
    fn constant_sphere_map_is_stationary() {
        let g = DomainGrid::Periodic(PeriodicGrid::new(vec![2.0 * PI; 2], vec![16, 16]));
        let (s, _) = initial_map(
            &InitialMapSpec::Constant,
            &g,
            &ManifoldModel::sphere(2, 1.0),
            &WeightFunction::default(),
        )
        .unwrap();
        let t = tension_field(&s, 1e6).unwrap();
        assert!(t.values.iter().all(|v| *v == 0.0));
        let next = step(&s, 1e-3, Scheme::Rk4).unwrap();
        assert_eq!(next.field, s.field);
        assert_eq!(next.time, 1e-3);
    }

    #[test]
    fn circle_map_tension_is_second_order() {
        let errs: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&n| {
                let g = DomainGrid::Periodic(PeriodicGrid::new(vec![2.0 * PI], vec![n]));
                let (s, _) = initial_map(
                    &InitialMapSpec::Identity,
                    &g,
                    &ManifoldModel::sphere(1, 1.0),
                    &WeightFunction::default(),
                )
                .unwrap();
                tension_field(&s, 1e6).unwrap().sup_norm()
            })
            .collect();
        assert!(errs[2] < 1e-12, "{errs:?}");
    }

    #[test]
    fn identity_step_is_stationary() {
        let s = radial(InitialMapSpec::Identity, 400);
        let next = step(&s, 2e-5, Scheme::ExplicitEuler).unwrap();
        let (MapField::Radial { psi: a, .. }, MapField::Radial { psi: b, .. }) =
            (&s.field, &next.field)
        else {
            unreachable!()
        };
        let d = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(d <= 1e-7);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let s = radial(InitialMapSpec::Identity, 400);
        assert!(matches!(
            step(&s, 1e-4, Scheme::ExplicitEuler),
            Err(FlowError::CflViolation { .. })
        ));
    }
}
