//! Generalized symmetric eigensolver for the interior pencil (K, M).
//!
//! Below `DENSE_DOF_LIMIT` interior DOFs the pencil is reduced through the
//! Cholesky factor of M and handed to the dense symmetric eigensolver. Above
//! it, shift-invert Lanczos (shift 0) with a sparse Cholesky factorization of
//! K and full reorthogonalization extracts the smallest eigenpairs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::CscMatrix;

use crate::error::{Error, Result};

use super::assembly::FemSystem;

/// Interior DOF count up to which the dense reduction is used.
pub const DENSE_DOF_LIMIT: usize = 3000;

const LANCZOS_TOL: f64 = 1e-12;

/// One discrete eigenpair: eigenvalue, M-normalized interior coefficients,
/// semiclassical h = lambda^{-1/2}, and the pencil residual
/// ||K x - lambda M x|| / ||M x||.
#[derive(Debug, Clone)]
pub struct FemEigenpair {
    pub eigenvalue: f64,
    pub h: f64,
    pub coefficients: DVector<f64>,
    pub residual: f64,
}

/// Compute the `k` smallest eigenpairs of K x = lambda M x, M-orthonormal,
/// ascending.
pub fn solve_eigenpairs(sys: &FemSystem, k: usize) -> Result<Vec<FemEigenpair>> {
    let n = sys.n_interior();
    if k == 0 || k > n {
        return Err(Error::TooManyEigenpairs {
            requested: k,
            available: n,
        });
    }
    let pairs = if n <= DENSE_DOF_LIMIT {
        solve_dense(sys, k)?
    } else {
        solve_lanczos(sys, k)?
    };
    Ok(pairs)
}

fn to_dense(m: &CscMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplet_iter() {
        out[(i, j)] += v;
    }
    out
}

fn finalize(sys: &FemSystem, eigenvalue: f64, x: DVector<f64>) -> FemEigenpair {
    let m = sys.mass();
    let k = sys.stiffness();
    let mx = spmv(m, &x);
    let norm = x.dot(&mx).sqrt();
    let mut x = x / norm;
    // Deterministic sign: largest-magnitude entry positive.
    let pivot = x
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if x[pivot] < 0.0 {
        x.neg_mut();
    }
    let mx = spmv(m, &x);
    let kx = spmv(k, &x);
    let residual = (&kx - &mx * eigenvalue).norm() / mx.norm();
    FemEigenpair {
        eigenvalue,
        h: 1.0 / eigenvalue.sqrt(),
        coefficients: x,
        residual,
    }
}

fn solve_dense(sys: &FemSystem, k: usize) -> Result<Vec<FemEigenpair>> {
    let kd = to_dense(sys.stiffness());
    let md = to_dense(sys.mass());
    let chol = md
        .cholesky()
        .ok_or_else(|| Error::NumericalBreakdown("mass matrix not SPD".into()))?;
    let l = chol.l();
    // A = L^{-1} K L^{-T}, symmetrized to kill last-ulp drift.
    let linv_k = l
        .solve_lower_triangular(&kd)
        .ok_or_else(|| Error::NumericalBreakdown("singular mass Cholesky factor".into()))?;
    let a = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or_else(|| Error::NumericalBreakdown("singular mass Cholesky factor".into()))?;
    let a = (&a + a.transpose()) * 0.5;

    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let lt = l.transpose();
    let mut pairs = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let y = eig.eigenvectors.column(idx).into_owned();
        let x = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::NumericalBreakdown("singular mass Cholesky factor".into()))?;
        pairs.push(finalize(sys, eig.eigenvalues[idx], x));
    }
    Ok(pairs)
}

pub(crate) fn spmv(m: &CscMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(m.nrows());
    for j in 0..m.ncols() {
        let col = m.col(j);
        let xj = x[j];
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            y[i] += v * xj;
        }
    }
    y
}

/// Shift-invert Lanczos at shift 0: largest eigenvalues of K^{-1} M in the
/// M-inner product are the reciprocals of the smallest pencil eigenvalues.
fn solve_lanczos(sys: &FemSystem, k: usize) -> Result<Vec<FemEigenpair>> {
    let n = sys.n_interior();
    let kc = sys.stiffness();
    let mc = sys.mass();
    let factor = CscCholesky::factor(kc)
        .map_err(|e| Error::NumericalBreakdown(format!("sparse Cholesky failed: {e:?}")))?;

    let max_iter = (6 * k + 60).min(n);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_iter);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    // Deterministic start vector.
    let mut v = DVector::from_element(n, 1.0);
    let mv = spmv(mc, &v);
    v /= v.dot(&mv).sqrt();
    basis.push(v);

    let mut converged: Option<(Vec<f64>, DMatrix<f64>)> = None;
    for j in 0..max_iter {
        let vj = basis[j].clone();
        let mvj = spmv(mc, &vj);
        let rhs = DMatrix::from_column_slice(n, 1, mvj.as_slice());
        let sol = factor.solve(&rhs);
        let mut w = DVector::from_iterator(n, sol.column(0).iter().copied());
        let alpha = w.dot(&spmv(mc, &vj));
        alphas.push(alpha);
        // Full reorthogonalization in the M-inner product, applied twice.
        for _ in 0..2 {
            for b in &basis {
                let c = w.dot(&spmv(mc, b));
                w.axpy(-c, b, 1.0);
            }
        }
        let beta = w.dot(&spmv(mc, &w)).sqrt();

        let m_dim = alphas.len();
        if m_dim >= k {
            let mut t = DMatrix::zeros(m_dim, m_dim);
            for i in 0..m_dim {
                t[(i, i)] = alphas[i];
                if i + 1 < m_dim {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let te = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m_dim).collect();
            // Largest theta first (smallest lambda).
            order.sort_by(|&a, &b| te.eigenvalues[b].total_cmp(&te.eigenvalues[a]));
            let ok = order.iter().take(k).all(|&i| {
                let theta = te.eigenvalues[i];
                let bound = beta * te.eigenvectors[(m_dim - 1, i)].abs();
                theta > 0.0 && bound <= LANCZOS_TOL * theta.max(1e-300)
            });
            if ok || beta < 1e-14 || j + 1 == max_iter {
                let thetas: Vec<f64> = order.iter().take(k).map(|&i| te.eigenvalues[i]).collect();
                let mut vecs = DMatrix::zeros(m_dim, k);
                for (c, &i) in order.iter().take(k).enumerate() {
                    vecs.set_column(c, &te.eigenvectors.column(i));
                }
                converged = Some((thetas, vecs));
                break;
            }
        }
        if beta < 1e-14 {
            break;
        }
        betas.push(beta);
        basis.push(w / beta);
    }

    let (thetas, vecs) = converged.ok_or_else(|| {
        Error::NumericalBreakdown("Lanczos did not converge within the iteration cap".into())
    })?;

    let mut pairs: Vec<FemEigenpair> = (0..thetas.len())
        .map(|c| {
            let mut x = DVector::zeros(n);
            for (j, b) in basis.iter().enumerate().take(vecs.nrows()) {
                x.axpy(vecs[(j, c)], b, 1.0);
            }
            finalize(sys, 1.0 / thetas[c], x)
        })
        .collect();
    pairs.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue));
    Ok(pairs)
}
