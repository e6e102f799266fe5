//! Model manifolds, their curvature in an adapted orthonormal frame, weight
//! functions, and the curvature hypothesis checks.
//!
//! Curvature sign convention: `R_{ikki}` is the sectional curvature of the
//! plane spanned by orthonormal `e_i, e_k`, and `Ric_{ij} = Σ_k R_{ikkj}`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::grid::{DomainGrid, PeriodicGrid, RadialGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("weight function is not compatible with the domain grid: {0}")]
    IncompatibleWeight(String),
    #[error("no supported Euclidean embedding for {0}")]
    UnsupportedEmbedding(String),
    #[error("invalid manifold model: {0}")]
    InvalidModel(String),
}

/// Homogeneous model space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldModel {
    RoundSphere {
        dim: usize,
        radius: f64,
    },
    FlatTorus {
        dim: usize,
        periods: Vec<f64>,
    },
    /// Complex projective space with constant holomorphic sectional curvature
    /// `holo_sec` (4 for the unit-scale convention).
    FubiniStudy {
        complex_dim: usize,
        holo_sec: f64,
    },
}

impl ManifoldModel {
    pub fn sphere(dim: usize, radius: f64) -> Self {
        ManifoldModel::RoundSphere { dim, radius }
    }

    pub fn torus(periods: Vec<f64>) -> Self {
        ManifoldModel::FlatTorus {
            dim: periods.len(),
            periods,
        }
    }

    pub fn fubini_study(complex_dim: usize, holo_sec: f64) -> Self {
        ManifoldModel::FubiniStudy {
            complex_dim,
            holo_sec,
        }
    }

    pub fn real_dim(&self) -> usize {
        match *self {
            ManifoldModel::RoundSphere { dim, .. } => dim,
            ManifoldModel::FlatTorus { dim, .. } => dim,
            ManifoldModel::FubiniStudy { complex_dim, .. } => 2 * complex_dim,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidModel(m));
        match self {
            ManifoldModel::RoundSphere { dim, radius } => {
                if *dim < 1 {
                    return bad("sphere dimension must be at least 1".into());
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad(format!("sphere radius must be positive, got {radius}"));
                }
            }
            ManifoldModel::FlatTorus { dim, periods } => {
                if *dim < 1 {
                    return bad("torus dimension must be at least 1".into());
                }
                if periods.len() != *dim {
                    return bad(format!(
                        "torus of dimension {dim} needs {dim} periods, got {}",
                        periods.len()
                    ));
                }
                if periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
                    return bad("torus periods must be positive".into());
                }
            }
            ManifoldModel::FubiniStudy {
                complex_dim,
                holo_sec,
            } => {
                if *complex_dim < 1 {
                    return bad("complex dimension must be at least 1".into());
                }
                if !(holo_sec.is_finite() && *holo_sec > 0.0) {
                    return bad(format!(
                        "holomorphic sectional curvature must be positive, got {holo_sec}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Round-sphere view of the model when it is one: spheres themselves and
    /// CP¹, which is `S²(1/√c)`.
    pub fn as_round_sphere(&self) -> Option<(usize, f64)> {
        match *self {
            ManifoldModel::RoundSphere { dim, radius } => Some((dim, radius)),
            ManifoldModel::FubiniStudy {
                complex_dim: 1,
                holo_sec,
            } => Some((2, 1.0 / holo_sec.sqrt())),
            _ => None,
        }
    }
}

/// Full Riemann tensor and Ricci form in an orthonormal frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureFrameData {
    pub frame_dim: usize,
    riemann: Vec<f64>,
    ricci: Vec<f64>,
}

/// Largest violations of the algebraic curvature identities.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymmetryDefects {
    pub antisym_first_pair: f64,
    pub antisym_last_pair: f64,
    pub pair_exchange: f64,
    pub first_bianchi: f64,
    pub ricci_trace: f64,
    pub ricci_symmetry: f64,
}

impl SymmetryDefects {
    pub fn max(&self) -> f64 {
        [
            self.antisym_first_pair,
            self.antisym_last_pair,
            self.pair_exchange,
            self.first_bianchi,
            self.ricci_trace,
            self.ricci_symmetry,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl CurvatureFrameData {
    /// Builds the tensor from a component function and derives Ricci by tracing.
    pub fn from_fn(frame_dim: usize, f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let d = frame_dim;
        let mut riemann = vec![0.0; d * d * d * d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        riemann[((i * d + j) * d + k) * d + l] = f(i, j, k, l);
                    }
                }
            }
        }
        let mut data = Self {
            frame_dim,
            riemann,
            ricci: vec![0.0; d * d],
        };
        for i in 0..d {
            for j in 0..d {
                data.ricci[i * d + j] = (0..d).map(|k| data.riemann(i, k, k, j)).sum();
            }
        }
        data
    }

    #[inline]
    pub fn riemann(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = self.frame_dim;
        self.riemann[((i * d + j) * d + k) * d + l]
    }

    #[inline]
    pub fn ricci(&self, i: usize, j: usize) -> f64 {
        self.ricci[i * self.frame_dim + j]
    }

    pub fn ricci_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.frame_dim, self.frame_dim, &self.ricci)
    }

    /// `R(X, Y, Z, W)` for arbitrary frame-coordinate vectors.
    pub fn contract(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let d = self.frame_dim;
        let mut acc = 0.0;
        for i in 0..d {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                let xy = x[i] * y[j];
                if xy == 0.0 {
                    continue;
                }
                for k in 0..d {
                    let xyz = xy * z[k];
                    if xyz == 0.0 {
                        continue;
                    }
                    for l in 0..d {
                        acc += xyz * w[l] * self.riemann(i, j, k, l);
                    }
                }
            }
        }
        acc
    }

    /// Sectional curvature of span{x, y}; `x`, `y` need not be orthonormal.
    pub fn sectional(&self, x: &[f64], y: &[f64]) -> f64 {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        let area2 = dot(x, x) * dot(y, y) - dot(x, y).powi(2);
        self.contract(x, y, y, x) / area2
    }

    pub fn symmetry_defects(&self) -> SymmetryDefects {
        let d = self.frame_dim;
        let mut s = SymmetryDefects::default();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let r = self.riemann(i, j, k, l);
                        s.antisym_first_pair = s
                            .antisym_first_pair
                            .max((r + self.riemann(j, i, k, l)).abs());
                        s.antisym_last_pair = s
                            .antisym_last_pair
                            .max((r + self.riemann(i, j, l, k)).abs());
                        s.pair_exchange = s.pair_exchange.max((r - self.riemann(k, l, i, j)).abs());
                        let b = r + self.riemann(j, k, i, l) + self.riemann(k, i, j, l);
                        s.first_bianchi = s.first_bianchi.max(b.abs());
                    }
                }
                let trace: f64 = (0..d).map(|k| self.riemann(i, k, k, j)).sum();
                s.ricci_trace = s.ricci_trace.max((trace - self.ricci(i, j)).abs());
                s.ricci_symmetry = s
                    .ricci_symmetry
                    .max((self.ricci(i, j) - self.ricci(j, i)).abs());
            }
        }
        s
    }
}

#[inline]
fn kron(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// `⟨J e_b, e_a⟩` for the standard complex structure `J e_{2p} = e_{2p+1}`.
#[inline]
fn complex_structure(a: usize, b: usize) -> f64 {
    if b.is_multiple_of(2) && a == b + 1 {
        1.0
    } else if b % 2 == 1 && a + 1 == b {
        -1.0
    } else {
        0.0
    }
}

/// Curvature tensor of a model in its adapted orthonormal frame.
pub fn curvature_tensor(model: &ManifoldModel) -> CurvatureFrameData {
    let d = model.real_dim();
    match *model {
        ManifoldModel::RoundSphere { radius, .. } => {
            let k = 1.0 / (radius * radius);
            CurvatureFrameData::from_fn(d, |i, j, kk, l| {
                k * (kron(i, l) * kron(j, kk) - kron(i, kk) * kron(j, l))
            })
        }
        ManifoldModel::FlatTorus { .. } => CurvatureFrameData::from_fn(d, |_, _, _, _| 0.0),
        ManifoldModel::FubiniStudy { holo_sec, .. } => {
            let q = holo_sec / 4.0;
            let j = complex_structure;
            CurvatureFrameData::from_fn(d, |x, y, z, w| {
                q * (kron(x, w) * kron(y, z) - kron(x, z) * kron(y, w) + j(w, x) * j(z, y)
                    - j(z, x) * j(w, y)
                    - 2.0 * j(y, x) * j(w, z))
            })
        }
    }
}

const SAMPLE_CHUNK: usize = 4096;

fn unit_frame_pair(rng: &mut ChaCha8Rng, d: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut y: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx < 1e-8 {
            continue;
        }
        let x: Vec<f64> = x.iter().map(|v| v / nx).collect();
        let p: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        y.iter_mut().zip(&x).for_each(|(b, a)| *b -= p * a);
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ny < 1e-8 {
            continue;
        }
        y.iter_mut().for_each(|v| *v /= ny);
        return (x, y);
    }
}

fn basis(d: usize, i: usize) -> Vec<f64> {
    (0..d).map(|k| kron(k, i)).collect()
}

/// Planes on which each model attains its extreme sectional curvatures.
fn extremal_planes(model: &ManifoldModel) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = model.real_dim();
    if d < 2 {
        return Vec::new();
    }
    let mut planes = vec![(basis(d, 0), basis(d, 1))];
    if let ManifoldModel::FubiniStudy { complex_dim, .. } = model {
        if *complex_dim >= 2 {
            // totally real plane
            planes.push((basis(d, 0), basis(d, 2)));
        }
    }
    planes
}

fn has_constant_curvature(model: &ManifoldModel) -> bool {
    match model {
        ManifoldModel::RoundSphere { .. } | ManifoldModel::FlatTorus { .. } => true,
        ManifoldModel::FubiniStudy { complex_dim, .. } => *complex_dim == 1,
    }
}

/// Min/max sectional curvature over `num_samples` seeded random 2-planes,
/// unioned with the known extremal planes. One-dimensional models are flat.
pub fn sectional_range(model: &ManifoldModel, num_samples: usize, seed: u64) -> (f64, f64) {
    sectional_range_with(model, num_samples, seed, Execution::default())
}

pub fn sectional_range_with(
    model: &ManifoldModel,
    num_samples: usize,
    seed: u64,
    exec: Execution,
) -> (f64, f64) {
    let d = model.real_dim();
    if d < 2 {
        return (0.0, 0.0);
    }
    let curv = curvature_tensor(model);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (x, y) in extremal_planes(model) {
        let s = curv.sectional(&x, &y);
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if has_constant_curvature(model) {
        // every plane is extremal
        return (lo, hi);
    }
    let chunks = num_samples.div_ceil(SAMPLE_CHUNK);
    // Each chunk owns an independent stream, so the result does not depend on
    // the execution mode.
    let partial = exec::map_range(exec, chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let count = SAMPLE_CHUNK.min(num_samples - c * SAMPLE_CHUNK);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..count {
            let (x, y) = unit_frame_pair(&mut rng, d);
            let s = curv.contract(&x, &y, &y, &x);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (lo, hi)
    });
    for (a, b) in partial {
        lo = lo.min(a);
        hi = hi.max(b);
    }
    (lo, hi)
}

fn sym_eig_extremes(m: DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(m);
    let lo = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Extreme eigenvalues of the Ricci form on unit vectors.
pub fn ricci_extremes(model: &ManifoldModel) -> (f64, f64) {
    sym_eig_extremes(curvature_tensor(model).ricci_matrix())
}

/// Sample layout of a grid-sampled weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleLayout {
    /// `J + 1` values at `r_j = jπ/J`, `j = 0..=J`, poles included.
    Radial { intervals: usize },
    /// One value per periodic grid node, axis 0 fastest.
    Periodic { resolution: Vec<usize> },
}

/// The weight `φ` of the weighted flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightFunction {
    Constant {
        value: f64,
    },
    GridSampled {
        layout: SampleLayout,
        values: Vec<f64>,
    },
}

impl Default for WeightFunction {
    fn default() -> Self {
        WeightFunction::Constant { value: 0.0 }
    }
}

impl WeightFunction {
    pub fn constant(value: f64) -> Self {
        WeightFunction::Constant { value }
    }

    /// Samples a radial weight `φ(r)` at every node including the poles.
    pub fn sample_radial(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        WeightFunction::GridSampled {
            layout: SampleLayout::Radial {
                intervals: grid.intervals,
            },
            values: (0..=grid.intervals).map(|j| f(grid.angle(j))).collect(),
        }
    }

    pub fn sample_periodic(grid: &PeriodicGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        WeightFunction::GridSampled {
            layout: SampleLayout::Periodic {
                resolution: grid.resolution.clone(),
            },
            values: (0..grid.len()).map(|i| f(&grid.coords(i))).collect(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            WeightFunction::Constant { .. } => true,
            WeightFunction::GridSampled { values, .. } => values.iter().all(|v| *v == values[0]),
        }
    }

    /// max φ − min φ.
    pub fn range(&self) -> f64 {
        match self {
            WeightFunction::Constant { .. } => 0.0,
            WeightFunction::GridSampled { values, .. } => {
                let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            }
        }
    }

    pub fn check_compatible(&self, grid: &DomainGrid) -> Result<(), GeometryError> {
        let WeightFunction::GridSampled { layout, values } = self else {
            return Ok(());
        };
        let ok = match (layout, grid) {
            (SampleLayout::Radial { intervals }, DomainGrid::Equivariant1D(g)) => {
                *intervals == g.intervals && values.len() == g.intervals + 1
            }
            (SampleLayout::Periodic { resolution }, DomainGrid::Periodic(g)) => {
                *resolution == g.resolution && values.len() == g.len()
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(GeometryError::IncompatibleWeight(format!(
                "sampled on {layout:?} with {} values",
                values.len()
            )))
        }
    }

    /// φ at extended radial node `j` (or periodic node `j`).
    #[inline]
    pub fn value(&self, j: usize) -> f64 {
        match self {
            WeightFunction::Constant { value } => *value,
            WeightFunction::GridSampled { values, .. } => values[j],
        }
    }

    /// Centered `(φ', φ'')` in the angular variable at interior radial node `j`.
    pub fn radial_derivatives(&self, grid: &RadialGrid, j: usize) -> (f64, f64) {
        match self {
            WeightFunction::Constant { .. } => (0.0, 0.0),
            WeightFunction::GridSampled { values, .. } => {
                let h = grid.spacing();
                let (m, c, p) = (values[j - 1], values[j], values[j + 1]);
                ((p - m) / (2.0 * h), (p - 2.0 * c + m) / (h * h))
            }
        }
    }

    /// Centered gradient at a periodic node.
    pub fn periodic_gradient(&self, grid: &PeriodicGrid, idx: usize) -> Vec<f64> {
        match self {
            WeightFunction::Constant { .. } => vec![0.0; grid.dim()],
            WeightFunction::GridSampled { values, .. } => (0..grid.dim())
                .map(|a| {
                    let p = values[grid.neighbor(idx, a, 1)];
                    let m = values[grid.neighbor(idx, a, -1)];
                    (p - m) / (2.0 * grid.spacing(a))
                })
                .collect(),
        }
    }

    /// Centered Hessian at a periodic node (mixed terms by the four-point cross stencil).
    pub fn periodic_hessian(&self, grid: &PeriodicGrid, idx: usize) -> DMatrix<f64> {
        let d = grid.dim();
        let mut hess = DMatrix::zeros(d, d);
        let WeightFunction::GridSampled { values, .. } = self else {
            return hess;
        };
        for a in 0..d {
            let ha = grid.spacing(a);
            let p = values[grid.neighbor(idx, a, 1)];
            let m = values[grid.neighbor(idx, a, -1)];
            hess[(a, a)] = (p - 2.0 * values[idx] + m) / (ha * ha);
            for b in (a + 1)..d {
                let hb = grid.spacing(b);
                let pp = values[grid.neighbor(grid.neighbor(idx, a, 1), b, 1)];
                let pm = values[grid.neighbor(grid.neighbor(idx, a, 1), b, -1)];
                let mp = values[grid.neighbor(grid.neighbor(idx, a, -1), b, 1)];
                let mm = values[grid.neighbor(grid.neighbor(idx, a, -1), b, -1)];
                let v = (pp - pm - mp + mm) / (4.0 * ha * hb);
                hess[(a, b)] = v;
                hess[(b, a)] = v;
            }
        }
        hess
    }
}

fn grid_matches_model(model: &ManifoldModel, grid: &DomainGrid) -> bool {
    match (grid, model) {
        (DomainGrid::Equivariant1D(g), m) => m
            .as_round_sphere()
            .is_some_and(|(dim, r)| dim == g.sphere_dim && (r - g.domain_radius).abs() < 1e-12),
        (DomainGrid::Periodic(g), ManifoldModel::FlatTorus { periods, .. }) => {
            periods.len() == g.periods.len()
                && periods
                    .iter()
                    .zip(&g.periods)
                    .all(|(a, b)| (a - b).abs() < 1e-12)
        }
        _ => false,
    }
}

/// Minimum of `(Ric + ∇²φ)(u, u)` over grid nodes and unit vectors.
///
/// Radial weights on the sphere use the Hessian eigenvalues `φ''/ρ²`
/// (radial) and `φ'·cot r/ρ²` (tangential); periodic weights use centered
/// second differences. A constant weight needs no grid.
pub fn weighted_ricci_min(
    model: &ManifoldModel,
    grid: Option<&DomainGrid>,
    phi: &WeightFunction,
) -> Result<f64, GeometryError> {
    let (ric_min, _) = ricci_extremes(model);
    if let WeightFunction::Constant { .. } = phi {
        return Ok(ric_min);
    }
    let grid = grid.ok_or_else(|| {
        GeometryError::IncompatibleWeight("grid-sampled weight without a domain grid".into())
    })?;
    if !grid_matches_model(model, grid) {
        return Err(GeometryError::IncompatibleWeight(format!(
            "grid {grid:?} does not discretize {model:?}"
        )));
    }
    phi.check_compatible(grid)?;
    match grid {
        DomainGrid::Equivariant1D(g) => {
            let rho2 = g.domain_radius * g.domain_radius;
            let mut lo = f64::INFINITY;
            for j in 1..g.intervals {
                let (d1, d2) = phi.radial_derivatives(g, j);
                let r = g.angle(j);
                let radial = d2 / rho2;
                let tangential = d1 * r.cos() / r.sin() / rho2;
                lo = lo.min(ric_min + radial.min(tangential));
            }
            Ok(lo)
        }
        DomainGrid::Periodic(g) => {
            let mut lo = f64::INFINITY;
            for idx in 0..g.len() {
                let (h_min, _) = sym_eig_extremes(phi.periodic_hessian(g, idx));
                lo = lo.min(ric_min + h_min);
            }
            Ok(lo)
        }
    }
}

/// Outcome of the curvature hypothesis checks on a (domain, target, φ) triple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// Whether the strict (sec > 0) or weak (sec ≥ 0) form was requested.
    pub strict: bool,
    pub target_sec_min: f64,
    pub target_sec_max: f64,
    pub target_sec_positive: bool,
    pub target_sec_nonnegative: bool,
    pub domain_weighted_ricci_min: f64,
    pub target_ricci_max: f64,
    /// `domain_weighted_ricci_min − target_ricci_max`.
    pub ricci_margin: f64,
    pub ricci_comparison_holds: bool,
    /// sec(h) > 0 and the Ricci comparison.
    pub strict_hypotheses_hold: bool,
    /// sec(h) ≥ 0 and the Ricci comparison.
    pub weak_hypotheses_hold: bool,
}

impl HypothesisReport {
    /// Verdict for the requested form.
    pub fn holds(&self) -> bool {
        if self.strict {
            self.strict_hypotheses_hold
        } else {
            self.weak_hypotheses_hold
        }
    }
}

/// Sampling controls for the sectional-curvature part of the checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckOptions {
    pub num_samples: usize,
    pub seed: u64,
    /// Slack on the sign tests; the comparisons are exact for model spaces.
    pub tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            num_samples: 1000,
            seed: 0,
            tol: 1e-12,
        }
    }
}

pub fn check_hypotheses(
    domain: &ManifoldModel,
    target: &ManifoldModel,
    phi: &WeightFunction,
    grid: Option<&DomainGrid>,
    strict: bool,
) -> Result<HypothesisReport, GeometryError> {
    check_hypotheses_with(domain, target, phi, grid, strict, CheckOptions::default())
}

pub fn check_hypotheses_with(
    domain: &ManifoldModel,
    target: &ManifoldModel,
    phi: &WeightFunction,
    grid: Option<&DomainGrid>,
    strict: bool,
    opts: CheckOptions,
) -> Result<HypothesisReport, GeometryError> {
    domain.validate()?;
    target.validate()?;
    let (sec_min, sec_max) = sectional_range(target, opts.num_samples, opts.seed);
    let weighted = weighted_ricci_min(domain, grid, phi)?;
    let (_, target_ric_max) = ricci_extremes(target);
    let margin = weighted - target_ric_max;
    let sec_pos = sec_min > opts.tol;
    let sec_nonneg = sec_min >= -opts.tol;
    let ricci_ok = margin >= -opts.tol;
    Ok(HypothesisReport {
        strict,
        target_sec_min: sec_min,
        target_sec_max: sec_max,
        target_sec_positive: sec_pos,
        target_sec_nonnegative: sec_nonneg,
        domain_weighted_ricci_min: weighted,
        target_ricci_max: target_ric_max,
        ricci_margin: margin,
        ricci_comparison_holds: ricci_ok,
        strict_hypotheses_hold: sec_pos && ricci_ok,
        weak_hypotheses_hold: sec_nonneg && ricci_ok,
    })
}

/// Extrinsic description of a model used by the periodic-grid flow.
#[derive(Clone, Debug, PartialEq)]
pub enum EmbeddingDescriptor {
    /// `S^m(ρ) ⊂ R^{m+1}`.
    Sphere { dim: usize, radius: f64 },
    /// `T^m = R^m / (periods)`, stored as wrapped coordinates.
    Torus { periods: Vec<f64> },
}

impl EmbeddingDescriptor {
    pub fn ambient_dim(&self) -> usize {
        match self {
            EmbeddingDescriptor::Sphere { dim, .. } => dim + 1,
            EmbeddingDescriptor::Torus { periods } => periods.len(),
        }
    }

    /// Closest-point projection onto the manifold, in place.
    pub fn project(&self, p: &mut [f64]) {
        match self {
            EmbeddingDescriptor::Sphere { radius, .. } => {
                let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                p.iter_mut().for_each(|v| *v *= radius / n);
            }
            EmbeddingDescriptor::Torus { periods } => {
                p.iter_mut()
                    .zip(periods)
                    .for_each(|(v, l)| *v = v.rem_euclid(*l));
            }
        }
    }

    /// Orthogonal projection of `v` onto `T_q N`, in place.
    pub fn tangent_project(&self, q: &[f64], v: &mut [f64]) {
        if let EmbeddingDescriptor::Sphere { radius, .. } = self {
            let s = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() / (radius * radius);
            v.iter_mut().zip(q).for_each(|(b, a)| *b -= s * a);
        }
    }

    /// Second fundamental form `A_q(X, Y)`.
    pub fn second_fundamental_form(&self, q: &[f64], x: &[f64], y: &[f64]) -> Vec<f64> {
        match self {
            EmbeddingDescriptor::Sphere { radius, .. } => {
                let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                q.iter().map(|v| -xy / (radius * radius) * v).collect()
            }
            EmbeddingDescriptor::Torus { periods } => vec![0.0; periods.len()],
        }
    }

    /// `p − q`, with torus coordinates reduced to the nearest image.
    #[inline]
    pub fn difference(&self, p: &[f64], q: &[f64], out: &mut [f64]) {
        match self {
            EmbeddingDescriptor::Sphere { .. } => {
                for ((o, a), b) in out.iter_mut().zip(p).zip(q) {
                    *o = a - b;
                }
            }
            EmbeddingDescriptor::Torus { periods } => {
                for (((o, a), b), l) in out.iter_mut().zip(p).zip(q).zip(periods) {
                    let d = a - b;
                    *o = d - l * (d / l).round();
                }
            }
        }
    }

    /// Distance from an ambient point to the manifold.
    pub fn distance_to_manifold(&self, p: &[f64]) -> f64 {
        match self {
            EmbeddingDescriptor::Sphere { radius, .. } => {
                (p.iter().map(|v| v * v).sum::<f64>().sqrt() - radius).abs()
            }
            EmbeddingDescriptor::Torus { .. } => 0.0,
        }
    }
}

pub fn embedding_data(model: &ManifoldModel) -> Result<EmbeddingDescriptor, GeometryError> {
    match model {
        ManifoldModel::FlatTorus { periods, .. } => Ok(EmbeddingDescriptor::Torus {
            periods: periods.clone(),
        }),
        m => match m.as_round_sphere() {
            Some((dim, radius)) => Ok(EmbeddingDescriptor::Sphere { dim, radius }),
            None => Err(GeometryError::UnsupportedEmbedding(format!("{m:?}"))),
        },
    }
}

/// Volume of the unit `k`-sphere in `R^{k+1}`.
pub fn unit_sphere_volume(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * unit_sphere_volume(k - 2),
    }
}
