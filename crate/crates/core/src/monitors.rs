//! Quantities monitored along a run: weighted energy, cone margin, evolution
//! residuals on the equivariant grid, smoothing rate, and the classification
//! of the limit map.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equivariant::{RadialJet, SphereToSphere};
use crate::flow::{MapField, MapState, NodeStats, RunVerdict, Tolerances};
use crate::geometry::{curvature_tensor, unit_sphere_volume, CurvatureFrameData, ManifoldModel};
use crate::grid::{DomainGrid, PeriodicGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonitorError {
    #[error("trajectory window is incomplete: {0}")]
    InsufficientHistory(String),
    #[error("fit window holds {0} samples, at least 3 are needed")]
    WindowTooShort(usize),
    #[error("limit classification requested for a run that did not converge ({0:?})")]
    NotConverged(RunVerdict),
}

/// Column header of the series CSV.
pub const SERIES_HEADER: &str =
    "t,energy_phi,min_margin,max_lambda,sup_tension,bochner_residual_max,alpha_residual_max,grad_df_sup";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub energy_phi: f64,
    pub min_margin: f64,
    pub max_lambda: f64,
    pub sup_tension: f64,
    pub bochner_residual_max: Option<f64>,
    pub alpha_residual_max: Option<f64>,
    /// `sup |∇dF|²`.
    pub grad_df_sup: f64,
}

impl SeriesRow {
    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.energy_phi,
            self.min_margin,
            self.max_lambda,
            self.sup_tension,
            self.grad_df_sup,
        ]
        .iter()
        .chain(self.bochner_residual_max.iter())
        .chain(self.alpha_residual_max.iter())
        .all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub rows: Vec<SeriesRow>,
}

impl TimeSeries {
    pub fn column(&self, f: impl Fn(&SeriesRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }
}

fn radial_pair(state: &MapState) -> SphereToSphere {
    state
        .sphere_pair()
        .expect("radial state with a round-sphere target")
}

/// `∫ |dF|² e^{−φ} dvol` by nodal quadrature.
pub fn weighted_energy(state: &MapState) -> f64 {
    match &state.grid {
        DomainGrid::Equivariant1D(g) => {
            let pair = radial_pair(state);
            let n = g.sphere_dim;
            let w = unit_sphere_volume(n - 1) * g.domain_radius.powi(n as i32) * g.spacing();
            (1..g.intervals)
                .map(|j| {
                    let jet = state.radial_jet(j);
                    pair.energy_density(&jet)
                        * (-state.phi.value(j)).exp()
                        * jet.r.sin().powi(n as i32 - 1)
                })
                .sum::<f64>()
                * w
        }
        DomainGrid::Periodic(g) => {
            let emb = state
                .embedding()
                .expect("periodic state with embedded target");
            (0..g.len())
                .map(|idx| {
                    let df = state.periodic_differential(&emb, idx);
                    df.norm_squared() * (-state.phi.value(idx)).exp()
                })
                .sum::<f64>()
                * g.cell_volume()
        }
    }
}

/// Minimum over nodes of the 2-nonnegativity margin.
pub fn min_margin(state: &MapState) -> f64 {
    state
        .node_reports()
        .expect("valid state")
        .iter()
        .map(|r| r.two_nonneg_margin)
        .fold(f64::INFINITY, f64::min)
}

pub fn max_lambda(state: &MapState) -> f64 {
    state
        .node_reports()
        .expect("valid state")
        .iter()
        .map(|r| r.max_lambda())
        .fold(0.0, f64::max)
}

fn periodic_hessian_sq(state: &MapState, g: &PeriodicGrid, idx: usize) -> f64 {
    let emb = state.embedding().expect("embedded target");
    let MapField::Ambient { dim: k, points } = &state.field else {
        unreachable!()
    };
    let k = *k;
    let at = |i: usize| &points[i * k..(i + 1) * k];
    let q = at(idx);
    let mut total = 0.0;
    let mut d1 = vec![0.0; k];
    let mut d2 = vec![0.0; k];
    let mut v = vec![0.0; k];
    for a in 0..g.dim() {
        for b in 0..g.dim() {
            let (ha, hb) = (g.spacing(a), g.spacing(b));
            if a == b {
                emb.difference(at(g.neighbor(idx, a, 1)), q, &mut d1);
                emb.difference(at(g.neighbor(idx, a, -1)), q, &mut d2);
                for i in 0..k {
                    v[i] = (d1[i] + d2[i]) / (ha * ha);
                }
            } else {
                let pa = g.neighbor(idx, a, 1);
                let ma = g.neighbor(idx, a, -1);
                emb.difference(at(g.neighbor(pa, b, 1)), at(g.neighbor(pa, b, -1)), &mut d1);
                emb.difference(at(g.neighbor(ma, b, 1)), at(g.neighbor(ma, b, -1)), &mut d2);
                for i in 0..k {
                    v[i] = (d1[i] - d2[i]) / (4.0 * ha * hb);
                }
            }
            emb.tangent_project(q, &mut v);
            total += v.iter().map(|x| x * x).sum::<f64>();
        }
    }
    total
}

/// `sup |∇dF|²` over nodes (closed form on radial grids, projected second
/// differences on periodic grids).
pub fn grad_df_sup(state: &MapState) -> f64 {
    match &state.grid {
        DomainGrid::Equivariant1D(g) => {
            let pair = radial_pair(state);
            (1..g.intervals)
                .map(|j| pair.hessian_norm_sq(&state.radial_jet(j)))
                .fold(0.0, f64::max)
        }
        DomainGrid::Periodic(g) => (0..g.len())
            .map(|idx| periodic_hessian_sq(state, g, idx))
            .fold(0.0, f64::max),
    }
}

/// One series row; residual columns are left empty.
pub fn sample_row(state: &MapState, stats: &NodeStats) -> SeriesRow {
    let reports = state.node_reports().expect("valid state");
    SeriesRow {
        t: state.time,
        energy_phi: weighted_energy(state),
        min_margin: reports
            .iter()
            .map(|r| r.two_nonneg_margin)
            .fold(f64::INFINITY, f64::min),
        max_lambda: reports.iter().map(|r| r.max_lambda()).fold(0.0, f64::max),
        sup_tension: stats.sup_tension,
        bochner_residual_max: None,
        alpha_residual_max: None,
        grad_df_sup: grad_df_sup(state),
    }
}

/// Largest forward difference of `energy_phi` between consecutive rows.
pub fn energy_supersolution_check(series: &TimeSeries) -> f64 {
    series
        .rows
        .windows(2)
        .map(|w| w[1].energy_phi - w[0].energy_phi)
        .fold(0.0, f64::max)
}

/// Three consecutive radial time slices.
#[derive(Clone, Debug)]
pub struct TrajectoryWindow {
    slices: [MapState; 3],
}

impl TrajectoryWindow {
    pub fn new(prev: MapState, mid: MapState, next: MapState) -> Result<Self, MonitorError> {
        let insufficient = |m: &str| Err(MonitorError::InsufficientHistory(m.into()));
        for s in [&prev, &mid, &next] {
            if !matches!(s.field, MapField::Radial { .. }) || s.sphere_pair().is_none() {
                return insufficient("residuals need equivariant sphere states");
            }
        }
        if prev.grid != mid.grid || mid.grid != next.grid {
            return insufficient("slices live on different grids");
        }
        if !(prev.time < mid.time && mid.time < next.time) {
            return insufficient("slice times must increase strictly");
        }
        Ok(Self {
            slices: [prev, mid, next],
        })
    }

    pub fn time(&self) -> f64 {
        self.slices[1].time
    }

    pub fn mid(&self) -> &MapState {
        &self.slices[1]
    }
}

/// Which sign the quadratic `∇dF ⊗ ∇dF` term carries in the α equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadraticSign {
    Plus,
    Minus,
}

impl QuadraticSign {
    fn value(self) -> f64 {
        match self {
            QuadraticSign::Plus => 1.0,
            QuadraticSign::Minus => -1.0,
        }
    }
}

/// Sign that makes the α equation consistent (selected by refinement).
pub const ALPHA_QUADRATIC_SIGN: QuadraticSign = QuadraticSign::Plus;

/// Nodes where residuals are evaluated: at least three cells from either pole.
pub fn residual_nodes(state: &MapState) -> RangeInclusive<usize> {
    let j = state.radial_grid().map_or(0, |g| g.intervals);
    3..=j.saturating_sub(3)
}

struct Evolution {
    /// `(∂_t − Δ)` applied to `|dF|²`, `α₁₁`, `α_aa` (rough Laplacian for α).
    heat: [f64; 3],
    /// Radial derivatives of the same three scalars.
    grad: [f64; 3],
    jet: RadialJet,
    dphi: f64,
    ddphi: f64,
}

fn time_weights(t: [f64; 3]) -> [f64; 3] {
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    [
        -h2 / (h1 * (h1 + h2)),
        (h2 - h1) / (h1 * h2),
        h1 / (h2 * (h1 + h2)),
    ]
}

fn evolution(w: &TrajectoryWindow, j: usize) -> Result<Evolution, MonitorError> {
    let mid = w.mid();
    let g = mid.radial_grid().expect("radial window");
    if !residual_nodes(mid).contains(&j) {
        return Err(MonitorError::InsufficientHistory(format!(
            "node {j} is too close to a pole"
        )));
    }
    let pair = radial_pair(mid);
    let n1 = g.sphere_dim as f64 - 1.0;
    let h = g.spacing();
    // |dF|², a = 1 − A², b = 1 − B² at node jj of slice s
    let fields = |s: &MapState, jj: usize| {
        let jet = s.radial_jet(jj);
        let (a, b) = pair.stretches(&jet);
        [a * a + n1 * b * b, 1.0 - a * a, 1.0 - b * b]
    };
    let tw = time_weights([w.slices[0].time, w.slices[1].time, w.slices[2].time]);
    let now: Vec<[f64; 3]> = (j - 1..=j + 1).map(|jj| fields(mid, jj)).collect();
    let before = fields(&w.slices[0], j);
    let after = fields(&w.slices[2], j);
    let r = g.angle(j);
    let rho2 = g.domain_radius * g.domain_radius;
    let cot2 = (r.cos() / r.sin()).powi(2);
    let mut heat = [0.0; 3];
    let mut grad = [0.0; 3];
    for c in 0..3 {
        let dt = tw[0] * before[c] + tw[1] * now[1][c] + tw[2] * after[c];
        let d1 = (now[2][c] - now[0][c]) / (2.0 * h);
        let d2 = (now[2][c] - 2.0 * now[1][c] + now[0][c]) / (h * h);
        grad[c] = d1;
        heat[c] = dt - pair.laplacian(r, d1, d2);
    }
    // rough-Laplacian coupling of the α eigenvalues
    let gap = now[1][1] - now[1][2];
    heat[1] += 2.0 * n1 * gap * cot2 / rho2;
    heat[2] -= 2.0 * gap * cot2 / rho2;
    let (dphi, ddphi) = mid.phi.radial_derivatives(g, j);
    Ok(Evolution {
        heat,
        grad,
        jet: mid.radial_jet(j),
        dphi,
        ddphi,
    })
}

struct CurvatureTerms {
    /// `Ric^φ` on the radial and tangential eigenvectors.
    ric_phi: [f64; 2],
    /// `Σ_k λ_i² λ_k² R̃_{ikki}` for i radial and tangential.
    target: [f64; 2],
    stretch_sq: [f64; 2],
}

fn curvature_terms(state: &MapState, ev: &Evolution) -> CurvatureTerms {
    let g = state.radial_grid().expect("radial");
    let pair = radial_pair(state);
    let n = g.sphere_dim;
    let domain = curvature_tensor(&ManifoldModel::sphere(n, g.domain_radius));
    let target: CurvatureFrameData = curvature_tensor(&state.target);
    let rho2 = g.domain_radius * g.domain_radius;
    let r = ev.jet.r;
    let ric = domain.ricci(0, 0);
    let (a, b) = pair.stretches(&ev.jet);
    let lam2: Vec<f64> = (0..n).map(|i| if i == 0 { a * a } else { b * b }).collect();
    let contract = |i: usize| -> f64 {
        (0..n)
            .map(|k| lam2[i] * lam2[k] * target.riemann(i, k, k, i))
            .sum()
    };
    CurvatureTerms {
        ric_phi: [
            ric + ev.ddphi / rho2,
            ric + ev.dphi * r.cos() / r.sin() / rho2,
        ],
        target: [contract(0), if n > 1 { contract(1) } else { 0.0 }],
        stretch_sq: [a * a, b * b],
    }
}

/// `|LHS − RHS|` of the Bochner identity for `|dF|²` at interior node `j`
/// (extended numbering) and the middle time of the window:
/// `(∂_t − Δ)|dF|² = −2|∇dF|² − 2Ric^φ(F*h) + 2Σ λᵢ²λ_k² R̃_{ikki} − ⟨∇φ, ∇|dF|²⟩`.
pub fn bochner_residual(w: &TrajectoryWindow, j: usize) -> Result<f64, MonitorError> {
    let ev = evolution(w, j)?;
    let state = w.mid();
    let pair = radial_pair(state);
    let c = curvature_terms(state, &ev);
    let n1 = pair.n as f64 - 1.0;
    let rho2 = pair.domain_radius * pair.domain_radius;
    let ric_h = c.ric_phi[0] * c.stretch_sq[0] + n1 * c.ric_phi[1] * c.stretch_sq[1];
    let target = c.target[0] + n1 * c.target[1];
    let rhs = -2.0 * pair.hessian_norm_sq(&ev.jet) - 2.0 * ric_h + 2.0 * target
        - ev.dphi * ev.grad[0] / rho2;
    Ok((ev.heat[0] - rhs).abs())
}

/// Residuals of the α evolution on the radial and tangential eigenvectors.
pub fn alpha_evolution_components(
    w: &TrajectoryWindow,
    j: usize,
    sign: QuadraticSign,
) -> Result<[f64; 2], MonitorError> {
    let ev = evolution(w, j)?;
    let state = w.mid();
    let pair = radial_pair(state);
    let c = curvature_terms(state, &ev);
    let h = pair.second_fundamental_form(&ev.jet);
    let n1 = pair.n as f64 - 1.0;
    let rho2 = pair.domain_radius * pair.domain_radius;
    let s = sign.value();
    let quad = [
        h.radial * h.radial + n1 * h.mixed * h.mixed,
        h.mixed * h.mixed + h.tangential * h.tangential,
    ];
    let mut out = [0.0; 2];
    for i in 0..2 {
        let rhs = 2.0 * c.ric_phi[i] * c.stretch_sq[i] - 2.0 * c.target[i] + s * 2.0 * quad[i]
            - ev.dphi * ev.grad[i + 1] / rho2;
        out[i] = (ev.heat[i + 1] - rhs).abs();
    }
    Ok(out)
}

/// Max over the two eigendirections of the α-evolution residual.
pub fn alpha_evolution_residual(
    w: &TrajectoryWindow,
    j: usize,
    sign: QuadraticSign,
) -> Result<f64, MonitorError> {
    let [a, b] = alpha_evolution_components(w, j, sign)?;
    Ok(a.max(b))
}

/// Max over [`residual_nodes`] of the Bochner and α residuals.
pub fn residual_maxima(w: &TrajectoryWindow) -> Result<(f64, f64), MonitorError> {
    let mut b = 0.0f64;
    let mut a = 0.0f64;
    for j in residual_nodes(w.mid()) {
        b = b.max(bochner_residual(w, j)?);
        a = a.max(alpha_evolution_residual(w, j, ALPHA_QUADRATIC_SIGN)?);
    }
    Ok((b, a))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingFit {
    /// Least-squares slope of `ln sup|∇dF|²` against `ln t`.
    pub slope: f64,
    /// `t·sup|∇dF|²` at the first sample of the window.
    pub scaled_start: f64,
    /// Max of `t·sup|∇dF|²` over the window.
    pub scaled_max: f64,
    pub samples: usize,
}

/// Fits the early-time decay of `sup|∇dF|²` over `t ∈ [10·dt, t_end]`.
pub fn smoothing_rate(
    series: &TimeSeries,
    dt: f64,
    t_end: f64,
) -> Result<SmoothingFit, MonitorError> {
    let rows: Vec<&SeriesRow> = series
        .rows
        .iter()
        .filter(|r| r.t >= 10.0 * dt && r.t <= t_end)
        .collect();
    if rows.len() < 3 {
        return Err(MonitorError::WindowTooShort(rows.len()));
    }
    let scaled: Vec<f64> = rows.iter().map(|r| r.t * r.grad_df_sup).collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.grad_df_sup > 0.0)
        .map(|r| (r.t.ln(), r.grad_df_sup.ln()))
        .collect();
    let slope = if pts.len() < 2 {
        0.0
    } else {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    Ok(SmoothingFit {
        slope,
        scaled_start: scaled[0],
        scaled_max: scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        samples: rows.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitClass {
    ConstantMap,
    Isometry,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityVerdict {
    pub classification: LimitClass,
    /// `sup_nodes max_i |λᵢ − 1|`.
    pub sup_lambda_deviation: f64,
    pub sup_lambda: f64,
    /// Range of φ, reported for isometries.
    pub phi_constancy_gap: Option<f64>,
}

/// Classifies a converged limit by its singular-value profile.
pub fn classify_limit(
    state: &MapState,
    verdict: RunVerdict,
    tol: &Tolerances,
) -> Result<RigidityVerdict, MonitorError> {
    if verdict != RunVerdict::Converged {
        return Err(MonitorError::NotConverged(verdict));
    }
    let reports = state.node_reports().expect("valid state");
    let sup_lambda = reports.iter().map(|r| r.max_lambda()).fold(0.0, f64::max);
    let sup_dev = reports
        .iter()
        .flat_map(|r| r.lambdas.iter().map(|l| (l - 1.0).abs()))
        .fold(0.0, f64::max);
    let domain_dim = match &state.grid {
        DomainGrid::Equivariant1D(g) => g.sphere_dim,
        DomainGrid::Periodic(g) => g.dim(),
    };
    let classification = if sup_lambda < tol.trivial_tol {
        LimitClass::ConstantMap
    } else if domain_dim == state.target.real_dim() && sup_dev < tol.iso_tol {
        LimitClass::Isometry
    } else {
        LimitClass::Undetermined
    };
    Ok(RigidityVerdict {
        classification,
        sup_lambda_deviation: sup_dev,
        sup_lambda,
        phi_constancy_gap: (classification == LimitClass::Isometry).then(|| state.phi.range()),
    })
}
