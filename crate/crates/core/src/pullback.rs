//! Pointwise linear algebra of a map differential: singular values, the
//! spectrum of `α = g − F*h`, and the contraction-class flags.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack on the exact-arithmetic flag tests.
pub const ALGEBRA_TOL: f64 = 1e-12;

const MIN_GRAM_EIG: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PullbackError {
    #[error(
        "{which} Gram matrix is not symmetric positive definite (smallest eigenvalue {min_eig:e})"
    )]
    DegenerateGram { which: &'static str, min_eig: f64 },
    #[error("shape mismatch: dF is {rows}×{cols}, g is {g}×{g}, h is {h}×{h}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        g: usize,
        h: usize,
    },
    #[error("equivariant differential evaluated at r = {0}, outside (0, π)")]
    PoleEvaluation(f64),
}

/// Differential `dF: (R^n, g) → (R^m, h)` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferentialSample {
    df: DMatrix<f64>,
    g_gram: DMatrix<f64>,
    h_gram: DMatrix<f64>,
}

fn check_spd(m: &DMatrix<f64>, which: &'static str) -> Result<(), PullbackError> {
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    let min_eig = if m.nrows() == 0 {
        f64::INFINITY
    } else {
        SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    };
    if asym > 1e-12 * scale || !(min_eig > MIN_GRAM_EIG) {
        return Err(PullbackError::DegenerateGram { which, min_eig });
    }
    Ok(())
}

impl DifferentialSample {
    pub fn new(
        df: DMatrix<f64>,
        g_gram: DMatrix<f64>,
        h_gram: DMatrix<f64>,
    ) -> Result<Self, PullbackError> {
        let (rows, cols) = df.shape();
        if !g_gram.is_square()
            || !h_gram.is_square()
            || g_gram.nrows() != cols
            || h_gram.nrows() != rows
        {
            return Err(PullbackError::ShapeMismatch {
                rows,
                cols,
                g: g_gram.nrows(),
                h: h_gram.nrows(),
            });
        }
        check_spd(&g_gram, "domain")?;
        check_spd(&h_gram, "target")?;
        Ok(Self { df, g_gram, h_gram })
    }

    /// Differential expressed in orthonormal frames on both sides.
    pub fn orthonormal(df: DMatrix<f64>) -> Self {
        let (m, n) = df.shape();
        Self {
            df,
            g_gram: DMatrix::identity(n, n),
            h_gram: DMatrix::identity(m, m),
        }
    }

    pub fn df(&self) -> &DMatrix<f64> {
        &self.df
    }

    pub fn g_gram(&self) -> &DMatrix<f64> {
        &self.g_gram
    }

    pub fn h_gram(&self) -> &DMatrix<f64> {
        &self.h_gram
    }

    pub fn domain_dim(&self) -> usize {
        self.df.ncols()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackReport {
    /// Singular values, descending, zero-padded to the domain dimension.
    pub lambdas: Vec<f64>,
    /// Eigenvalues of `α` relative to `g`, ascending.
    pub alpha_eigs: Vec<f64>,
    /// Sum of the two smallest `alpha_eigs` (`1 + alpha_eigs[0]` when n = 1).
    pub two_nonneg_margin: f64,
    pub distance_nonincreasing: bool,
    pub two_nonnegative: bool,
    pub area_nonincreasing: bool,
    /// `Σ λᵢ²`.
    pub energy_density: f64,
}

impl PullbackReport {
    /// Builds the report from any list of singular values of an n-dimensional domain.
    pub fn from_singular_values(mut lambdas: Vec<f64>, n: usize) -> Self {
        lambdas.iter_mut().for_each(|l| *l = l.abs());
        lambdas.resize(n.max(lambdas.len()), 0.0);
        lambdas.sort_by(|a, b| b.total_cmp(a));
        lambdas.truncate(n);
        let alpha_eigs: Vec<f64> = lambdas.iter().map(|l| 1.0 - l * l).collect();
        let two_nonneg_margin = match n {
            0 => 2.0,
            1 => 1.0 + alpha_eigs[0],
            _ => alpha_eigs[0] + alpha_eigs[1],
        };
        let l1 = lambdas.first().copied().unwrap_or(0.0);
        let l2 = lambdas.get(1).copied().unwrap_or(0.0);
        Self {
            energy_density: lambdas.iter().map(|l| l * l).sum(),
            distance_nonincreasing: l1 <= 1.0 + ALGEBRA_TOL,
            two_nonnegative: two_nonneg_margin >= -ALGEBRA_TOL,
            area_nonincreasing: l1 * l2 <= 1.0 + ALGEBRA_TOL,
            lambdas,
            alpha_eigs,
            two_nonneg_margin,
        }
    }

    pub fn max_lambda(&self) -> f64 {
        self.lambdas.first().copied().unwrap_or(0.0)
    }
}

/// Singular values of `dF` with respect to `g` and `h`.
///
/// With `g = L_g L_gᵀ`, `h = L_h L_hᵀ`, these are the ordinary singular values
/// of `L_hᵀ · dF · L_g⁻ᵀ`.
pub fn analyze_differential(sample: &DifferentialSample) -> PullbackReport {
    let n = sample.domain_dim();
    let lg = sample
        .g_gram
        .clone()
        .cholesky()
        .expect("checked positive definite")
        .l();
    let lh = sample
        .h_gram
        .clone()
        .cholesky()
        .expect("checked positive definite")
        .l();
    let x_t = lg
        .solve_lower_triangular(&sample.df.transpose())
        .expect("nonsingular triangular factor");
    let m = lh.transpose() * x_t.transpose();
    let sv = if m.nrows() == 0 || m.ncols() == 0 {
        Vec::new()
    } else {
        m.singular_values().iter().cloned().collect()
    };
    PullbackReport::from_singular_values(sv, n)
}

/// Closed-form report for `F(r, ω) = (ψ(r), ω)` between round spheres `S^n(ρ_M) → S^n(ρ_N)`.
pub fn analyze_equivariant(
    psi: f64,
    dpsi: f64,
    r: f64,
    n: usize,
    target_radius: f64,
    domain_radius: f64,
) -> Result<PullbackReport, PullbackError> {
    if !(r > 0.0 && r < PI) {
        return Err(PullbackError::PoleEvaluation(r));
    }
    let scale = target_radius / domain_radius;
    let radial = dpsi.abs() * scale;
    let tangential = (scale * psi.sin() / r.sin()).abs();
    let mut lambdas = Vec::with_capacity(n);
    lambdas.push(radial);
    lambdas.extend(std::iter::repeat_n(tangential, n.saturating_sub(1)));
    Ok(PullbackReport::from_singular_values(lambdas, n))
}

/// Jacobian of the equivariant map in orthonormal frames `(∂_r, ∂_ω…)`.
pub fn equivariant_jacobian(
    psi: f64,
    dpsi: f64,
    r: f64,
    n: usize,
    target_radius: f64,
    domain_radius: f64,
) -> DMatrix<f64> {
    let scale = target_radius / domain_radius;
    let mut j = DMatrix::zeros(n, n);
    j[(0, 0)] = dpsi * scale;
    for a in 1..n {
        j[(a, a)] = scale * psi.sin() / r.sin();
    }
    j
}
