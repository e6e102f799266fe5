//! Brute-force reference computations shared by integration tests. Nothing
//! here calls into the library's linear algebra.
#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use hmflow_core::pullback::{DifferentialSample, PullbackReport};

type Mat = Vec<Vec<f64>>;

fn to_rows(m: &DMatrix<f64>) -> Mat {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn cholesky(a: &Mat) -> Mat {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                assert!(d > 0.0, "not positive definite");
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Cyclic Jacobi rotations; eigenvalues ascending.
pub fn jacobi_eigenvalues(a: &Mat) -> Vec<f64> {
    let n = a.len();
    let mut a = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-36 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues (ascending) of `g⁻¹ · dFᵀ h dF`: the squared singular values.
pub fn pullback_eigenvalues(df: &DMatrix<f64>, g: &DMatrix<f64>, h: &DMatrix<f64>) -> Vec<f64> {
    let (m, n) = df.shape();
    let (f, g, h) = (to_rows(df), to_rows(g), to_rows(h));
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..m {
                for q in 0..m {
                    s += f[p][i] * h[p][q] * f[q][j];
                }
            }
            a[i][j] = s;
        }
    }
    let l = cholesky(&g);
    // y = L⁻¹ a, then c = y L⁻ᵀ, by forward substitution
    let solve = |b: &Mat| -> Mat {
        let mut y = vec![vec![0.0; n]; n];
        for col in 0..n {
            for i in 0..n {
                let s: f64 = (0..i).map(|k| l[i][k] * y[k][col]).sum();
                y[i][col] = (b[i][col] - s) / l[i][i];
            }
        }
        y
    };
    let y = solve(&a);
    let yt: Mat = (0..n).map(|i| (0..n).map(|j| y[j][i]).collect()).collect();
    let c = solve(&yt);
    let sym: Mat = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (c[i][j] + c[j][i])).collect())
        .collect();
    jacobi_eigenvalues(&sym)
}

/// Largest disagreement between a report and the oracle, measured on the
/// squared singular values and scaled by their magnitude.
pub fn oracle_error(report: &PullbackReport, mu: &[f64]) -> f64 {
    let n = mu.len();
    let scale = mu.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let mut err = 0.0f64;
    for k in 0..n {
        let want = mu[n - 1 - k];
        let l = report.lambdas[k];
        err = err.max((l * l - want).abs() / scale);
        err = err.max((report.alpha_eigs[k] - (1.0 - want)).abs() / scale);
    }
    err
}

fn random_spd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    DMatrix::identity(n, n) * 0.5 + &b * b.transpose() * (0.5 / n as f64)
}

/// Random differential with random well-conditioned inner products, in
/// dimensions 1..=5 on each side.
pub fn random_sample<R: Rng>(rng: &mut R) -> DifferentialSample {
    let n = rng.random_range(1..=5);
    let m = rng.random_range(1..=5);
    let scale = rng.random_range(0.1..2.0);
    let df = DMatrix::from_fn(m, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let g = random_spd(rng, n);
    let h = random_spd(rng, m);
    DifferentialSample::new(df, g, h).expect("random grams are positive definite")
}

pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    a.qr().q()
}
