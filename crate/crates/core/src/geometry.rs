//! Exact simplex geometry: volumes, faces, outward normals, affine maps to the
//! standard simplex, and the predicted Neumann mass per face.
//!
//! Conventions: vertex 0 is the affine base point and face `j` is the face
//! opposite vertex `j`. For the standard simplex (origin, e_1, ..., e_n) face 0
//! is therefore the slanted face and faces 1..=n are the coordinate faces.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative cutoff for |det A| below which a simplex counts as degenerate.
const DEGENERACY_FACTOR: f64 = 1e-14;

/// Dimensions the geometry layer supports.
pub const SUPPORTED_DIMENSIONS: std::ops::RangeInclusive<usize> = 2..=4;

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Measure of the (m-1)-simplex spanned by `vertices` (m points in any ambient
/// dimension), via the Gram determinant sqrt(det(E^T E)) / (m-1)!.
pub(crate) fn gram_measure(vertices: &[DVector<f64>]) -> f64 {
    let m = vertices.len();
    assert!(m >= 2, "need at least an edge");
    let dim = vertices[0].len();
    let mut edges = DMatrix::zeros(dim, m - 1);
    for (c, v) in vertices[1..].iter().enumerate() {
        edges.set_column(c, &(v - &vertices[0]));
    }
    let gram = edges.transpose() * &edges;
    gram.determinant().max(0.0).sqrt() / factorial(m - 1)
}

/// A non-degenerate n-simplex given by n+1 vertices in R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    vertices: Vec<DVector<f64>>,
    dim: usize,
}

/// One face of a simplex: index, spanning vertices, unit outward normal and
/// (n-1)-dimensional measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub index: usize,
    pub vertex_indices: Vec<usize>,
    pub normal: DVector<f64>,
    pub measure: f64,
}

/// JSON form of a simplex: `{"dimension": n, "vertices": [[x, ...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplexJson {
    pub dimension: usize,
    pub vertices: Vec<Vec<f64>>,
}

impl From<&Simplex> for SimplexJson {
    fn from(s: &Simplex) -> Self {
        SimplexJson {
            dimension: s.dim,
            vertices: s
                .vertices
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect(),
        }
    }
}

impl TryFrom<SimplexJson> for Simplex {
    type Error = Error;

    fn try_from(json: SimplexJson) -> Result<Self> {
        for row in &json.vertices {
            if row.len() != json.dimension {
                return Err(Error::UnsupportedDimension {
                    dim: row.len(),
                    supported: "vertex coordinates must match \"dimension\"",
                });
            }
        }
        Simplex::from_rows(&json.vertices)
    }
}

impl Simplex {
    /// Build a simplex from n+1 vertices in R^n, checking non-degeneracy.
    pub fn new(vertices: Vec<DVector<f64>>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::UnsupportedDimension {
                dim: 0,
                supported: "2..=4",
            });
        }
        let dim = vertices[0].len();
        if !SUPPORTED_DIMENSIONS.contains(&dim) {
            return Err(Error::UnsupportedDimension {
                dim,
                supported: "2..=4",
            });
        }
        if vertices.len() != dim + 1 || vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::UnsupportedDimension {
                dim,
                supported: "n+1 vertices of length n",
            });
        }
        let s = Simplex { vertices, dim };
        let det = s.edge_matrix().determinant();
        let cutoff = DEGENERACY_FACTOR * s.vertex_scale().powi(dim as i32);
        if det.abs() <= cutoff {
            return Err(Error::DegenerateSimplex {
                det: det.abs(),
                cutoff,
            });
        }
        Ok(s)
    }

    /// Convenience constructor from plain coordinate rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows.iter().map(|r| DVector::from_row_slice(r)).collect())
    }

    /// Standard simplex: origin plus the canonical basis vectors.
    pub fn standard(dim: usize) -> Result<Self> {
        let mut rows = vec![vec![0.0; dim]];
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            rows.push(e);
        }
        Self::from_rows(&rows)
    }

    /// Order simplex ("alcove") {1 >= x_1 >= ... >= x_n >= 0}: the vertex list
    /// is the prefix-of-ones sequence (0,...,0), (1,0,...), (1,1,0,...), ...
    pub fn alcove(dim: usize) -> Result<Self> {
        let mut rows = Vec::with_capacity(dim + 1);
        for j in 0..=dim {
            let mut v = vec![0.0; dim];
            for x in v.iter_mut().take(j) {
                *x = 1.0;
            }
            rows.push(v);
        }
        Self::from_rows(&rows)
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    /// Largest vertex Euclidean norm; the scale used in degeneracy cutoffs.
    pub fn vertex_scale(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
            .max(1.0)
    }

    /// Matrix A with columns p_j - p_0, j = 1..=n.
    pub fn edge_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for j in 1..=self.dim {
            a.set_column(j - 1, &(&self.vertices[j] - &self.vertices[0]));
        }
        a
    }

    /// Volume |det A| / n!.
    pub fn volume(&self) -> f64 {
        self.edge_matrix().determinant().abs() / factorial(self.dim)
    }

    pub fn centroid(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.dim);
        for v in &self.vertices {
            c += v;
        }
        c / (self.dim as f64 + 1.0)
    }

    /// All n+1 faces; face j is opposite vertex j.
    pub fn faces(&self) -> Vec<Face> {
        (0..=self.dim)
            .map(|j| self.face(j).expect("index in range"))
            .collect()
    }

    /// Face j (opposite vertex j) with unit outward normal and exact measure.
    pub fn face(&self, j: usize) -> Result<Face> {
        if j > self.dim {
            return Err(Error::FaceIndexOutOfRange {
                index: j,
                dim: self.dim,
            });
        }
        let vertex_indices: Vec<usize> = (0..=self.dim).filter(|&i| i != j).collect();
        let pts: Vec<DVector<f64>> = vertex_indices
            .iter()
            .map(|&i| self.vertices[i].clone())
            .collect();
        let measure = gram_measure(&pts);

        // Normal direction from the generalized cross product: component i is
        // the signed cofactor of the edge matrix with row i removed.
        let n = self.dim;
        let mut edges = DMatrix::zeros(n, n - 1);
        for (c, p) in pts[1..].iter().enumerate() {
            edges.set_column(c, &(p - &pts[0]));
        }
        let mut normal = DVector::zeros(n);
        let mut sign = 1.0;
        for i in 0..n {
            let minor = edges.clone().remove_row(i);
            normal[i] = sign * minor.determinant();
            sign = -sign;
        }
        normal /= normal.norm();
        // Outward: away from the opposite vertex.
        if normal.dot(&(&self.vertices[j] - &pts[0])) > 0.0 {
            normal = -normal;
        }

        Ok(Face {
            index: j,
            vertex_indices,
            normal,
            measure,
        })
    }

    /// Coordinates of the vertices spanning `face`.
    pub fn face_vertices(&self, face: &Face) -> Vec<DVector<f64>> {
        face.vertex_indices
            .iter()
            .map(|&i| self.vertices[i].clone())
            .collect()
    }

    pub fn face_centroid(&self, face: &Face) -> DVector<f64> {
        let pts = self.face_vertices(face);
        let mut c = DVector::zeros(self.dim);
        for p in &pts {
            c += p;
        }
        c / pts.len() as f64
    }

    /// Affine change of variables to the standard simplex: y = B (x - p_0),
    /// with A = B^{-1} and Gamma = B B^T the pulled-back coefficient matrix.
    pub fn affine_maps(&self) -> AffineMaps {
        let a = self.edge_matrix();
        let b = a
            .clone()
            .try_inverse()
            .expect("non-degenerate by construction");
        let gamma =
            EllipticCoefficients::from_factor(b.clone()).expect("B B^T of an invertible B is SPD");
        AffineMaps {
            a,
            b,
            gamma,
            base: self.vertices[0].clone(),
        }
    }

    /// Predicted semiclassical Neumann mass on face j:
    /// 2 Vol_{n-1}(G_j) / (n Vol_n(T)).
    pub fn predicted_neumann_mass(&self, j: usize) -> Result<f64> {
        let face = self.face(j)?;
        Ok(2.0 * face.measure / (self.dim as f64 * self.volume()))
    }

    /// Predicted masses for all faces, indexed by face.
    pub fn predicted_neumann_masses(&self) -> Vec<f64> {
        (0..=self.dim)
            .map(|j| self.predicted_neumann_mass(j).expect("index in range"))
            .collect()
    }
}

/// The affine data of a simplex: A (columns p_j - p_0), B = A^{-1}, and
/// Gamma = B B^T, together with the base point p_0.
#[derive(Debug, Clone)]
pub struct AffineMaps {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub gamma: EllipticCoefficients,
    pub base: DVector<f64>,
}

impl AffineMaps {
    /// y = B (x - p_0): maps the simplex onto the standard simplex.
    pub fn to_reference(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.b * (x - &self.base)
    }

    /// x = A y + p_0.
    pub fn from_reference(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.a * y + &self.base
    }
}

/// Symmetric positive definite coefficient matrix Gamma of the operator
/// P = -Gamma_ij (h d_i)(h d_j), optionally remembering a factor B with
/// Gamma = B B^T.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticCoefficients {
    gamma: DMatrix<f64>,
    factor: Option<DMatrix<f64>>,
}

impl EllipticCoefficients {
    /// Validate symmetry and positive definiteness (by Cholesky success).
    /// Symmetry slack below 1e-12 of the largest entry is repaired by
    /// mirroring the upper triangle so the stored matrix is exactly symmetric.
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        if !gamma.is_square() {
            return Err(Error::InvalidCoefficients("matrix is not square".into()));
        }
        let n = gamma.nrows();
        let scale = gamma.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        let mut sym = gamma;
        for i in 0..n {
            for j in (i + 1)..n {
                let diff = (sym[(i, j)] - sym[(j, i)]).abs();
                if diff > 1e-12 * scale {
                    return Err(Error::InvalidCoefficients(format!(
                        "asymmetry {:.3e} at ({i},{j})",
                        diff
                    )));
                }
                sym[(j, i)] = sym[(i, j)];
            }
        }
        if sym.clone().cholesky().is_none() {
            return Err(Error::InvalidCoefficients(
                "Cholesky factorization failed (not positive definite)".into(),
            ));
        }
        Ok(EllipticCoefficients {
            gamma: sym,
            factor: None,
        })
    }

    /// Gamma = B B^T from an invertible factor B.
    pub fn from_factor(b: DMatrix<f64>) -> Result<Self> {
        let gamma = &b * b.transpose();
        let mut c = Self::new(gamma)?;
        c.factor = Some(b);
        Ok(c)
    }

    pub fn identity(dim: usize) -> Self {
        EllipticCoefficients {
            gamma: DMatrix::identity(dim, dim),
            factor: Some(DMatrix::identity(dim, dim)),
        }
    }

    /// Accepts a matrix whose smallest eigenvalue may be a roundoff-negative
    /// (above -tol * largest); in that case the diagonal is shifted just enough
    /// to restore definiteness. Genuinely indefinite input is an error.
    pub(crate) fn new_clamped(gamma: DMatrix<f64>, context: &str) -> Result<Self> {
        let eig = gamma.clone().symmetric_eigenvalues();
        let max = eig.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if min <= -1e-12 * max {
            return Err(Error::InconsistentData(format!(
                "{context}: eigenvalues reach {min:.3e} (not positive definite)"
            )));
        }
        if min > 1e-12 * max {
            return Self::new(gamma);
        }
        let n = gamma.nrows();
        let shift = 2.0 * (1e-12 * max - min).max(0.0);
        Self::new(gamma + DMatrix::identity(n, n) * shift)
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn factor(&self) -> Option<&DMatrix<f64>> {
        self.factor.as_ref()
    }

    /// Quadratic form v^T Gamma v.
    pub fn quadratic_form(&self, v: &DVector<f64>) -> f64 {
        (v.transpose() * &self.gamma * v)[(0, 0)]
    }
}
