//! Inverse problems from Neumann data norms: triangle recovery, closed-form
//! recovery of a 2D constant-coefficient operator, and the 3D counterexample
//! family showing the norms do not determine the coefficients in higher
//! dimension.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::EllipticCoefficients;

/// Neumann masses on the three sides of a triangle (units 1/length).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleNeumannData {
    pub n_a: f64,
    pub n_b: f64,
    pub n_c: f64,
}

impl TriangleNeumannData {
    pub fn new(n_a: f64, n_b: f64, n_c: f64) -> Result<Self> {
        if !(n_a > 0.0 && n_b > 0.0 && n_c > 0.0) {
            return Err(Error::InconsistentData(format!(
                "Neumann masses must be positive, got ({n_a}, {n_b}, {n_c})"
            )));
        }
        Ok(TriangleNeumannData { n_a, n_b, n_c })
    }
}

/// Side lengths (in the order of the input masses) and area of the recovered
/// triangle. Reflection ambiguity is resolved by reporting lengths only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveredTriangle {
    pub sides: [f64; 3],
    pub area: f64,
}

impl RecoveredTriangle {
    /// Sides sorted descending (the canonical congruence-class form).
    pub fn sorted_sides(&self) -> [f64; 3] {
        let mut s = self.sides;
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// The Neumann masses this triangle would produce: side / area.
    pub fn forward(&self) -> TriangleNeumannData {
        TriangleNeumannData {
            n_a: self.sides[0] / self.area,
            n_b: self.sides[1] / self.area,
            n_c: self.sides[2] / self.area,
        }
    }
}

/// Heron's area in Kahan's numerically stable ordering; `None` when the sides
/// violate the triangle inequality or the area vanishes.
fn heron_stable(a: f64, b: f64, c: f64) -> Option<f64> {
    let mut s = [a, b, c];
    s.sort_by(|p, q| q.total_cmp(p));
    let [x, y, z] = s;
    let t = z - (x - y);
    if t <= 0.0 {
        return None;
    }
    let area = 0.25 * ((x + (y + z)) * t * (z + (x - y)) * (x + (y - z))).sqrt();
    (area > 0.0).then_some(area)
}

/// Recover the triangle from its Neumann masses. The mass of a side of length
/// `l` is l / Area, so the masses form a triangle similar to the original
/// scaled by 1/Area; Heron's formula on the masses gives H = 1/Area, and the
/// sides follow by rescaling.
pub fn recover_triangle(data: &TriangleNeumannData) -> Result<RecoveredTriangle> {
    let h = heron_stable(data.n_a, data.n_b, data.n_c)
        .ok_or(Error::NoSuchTriangle(data.n_a, data.n_b, data.n_c))?;
    Ok(RecoveredTriangle {
        sides: [data.n_a / h, data.n_b / h, data.n_c / h],
        area: 1.0 / h,
    })
}

/// Neumann masses of any eigenfunction of P = -Gamma_ij (h d_i)(h d_j) on the
/// standard simplex: J_j for the coordinate faces {x_j = 0} and J_0 for the
/// slanted face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardSimplexNeumannData {
    pub dimension: usize,
    /// J_1, ..., J_n on the coordinate faces.
    pub coordinate: Vec<f64>,
    /// J_0 on the slanted face.
    pub slanted: f64,
}

impl StandardSimplexNeumannData {
    pub fn new(coordinate: Vec<f64>, slanted: f64) -> Result<Self> {
        if coordinate.iter().any(|&j| j <= 0.0) || slanted <= 0.0 {
            return Err(Error::InconsistentData(
                "Neumann masses must be positive".into(),
            ));
        }
        Ok(StandardSimplexNeumannData {
            dimension: coordinate.len(),
            coordinate,
            slanted,
        })
    }

    /// Masses indexed by face of the standard simplex (face 0 slanted).
    pub fn by_face(&self) -> Vec<f64> {
        let mut v = vec![self.slanted];
        v.extend_from_slice(&self.coordinate);
        v
    }
}

/// Forward map: masses produced by Gamma on the standard simplex. On the
/// coordinate faces J_j = 2 / (nu_j^T Gamma nu_j); on the slanted face
/// J_0 = 2 sqrt(n) / (nu_0^T Gamma nu_0). (The slanted constant follows from
/// the boundary identity I_0 = 2 sqrt(n) |v|^2; the n = 2 value 2 sqrt(2) is
/// its special case.)
pub fn gamma_forward(coeffs: &EllipticCoefficients) -> Result<StandardSimplexNeumannData> {
    let n = coeffs.dim();
    if !(2..=3).contains(&n) {
        return Err(Error::UnsupportedDimension {
            dim: n,
            supported: "2..=3",
        });
    }
    let coordinate: Vec<f64> = (0..n)
        .map(|j| {
            let mut nu = DVector::zeros(n);
            nu[j] = -1.0;
            2.0 / coeffs.quadratic_form(&nu)
        })
        .collect();
    let nu0 = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let slanted = 2.0 * (n as f64).sqrt() / coeffs.quadratic_form(&nu0);
    StandardSimplexNeumannData::new(coordinate, slanted)
}

/// Closed-form recovery of Gamma on the standard triangle:
/// Gamma_11 = 2/J_1, Gamma_22 = 2/J_2,
/// Gamma_12 = 2 sqrt(2)/J_0 - 1/J_1 - 1/J_2.
pub fn recover_gamma_2d(data: &StandardSimplexNeumannData) -> Result<EllipticCoefficients> {
    if data.dimension != 2 || data.coordinate.len() != 2 {
        return Err(Error::UnsupportedDimension {
            dim: data.dimension,
            supported: "2",
        });
    }
    if data.coordinate.iter().any(|&j| j <= 0.0) || data.slanted <= 0.0 {
        return Err(Error::InconsistentData(
            "Neumann masses must be positive".into(),
        ));
    }
    let (j1, j2, j0) = (data.coordinate[0], data.coordinate[1], data.slanted);
    let g11 = 2.0 / j1;
    let g22 = 2.0 / j2;
    let g12 = 2.0 * 2.0f64.sqrt() / j0 - 1.0 / j1 - 1.0 / j2;
    let gamma = DMatrix::from_row_slice(2, 2, &[g11, g12, g12, g22]);
    EllipticCoefficients::new_clamped(gamma, "recovered Gamma")
}

/// The 3D counterexample family: an explicit B(eps) with Gamma = B B^T far
/// from the identity while all four quadratic forms nu^T Gamma nu match those
/// of the identity, so the four Neumann masses cannot determine Gamma.
///
/// B^T has rows (a, 0, 0), (d, s, eps), (eps, eps, s) with s = sqrt(1-eps^2),
/// d = (-3 eps s - eps^2) / (s + eps) and a = sqrt(1 - d^2 - eps^2).
pub fn counterexample_3d(eps: f64) -> Result<(DMatrix<f64>, EllipticCoefficients)> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::EpsilonTooLarge(eps));
    }
    let s = (1.0 - eps * eps).sqrt();
    let d = (-3.0 * eps * s - eps * eps) / (s + eps);
    let a_sq = 1.0 - d * d - eps * eps;
    // The paper states 0 < eps < 1, but a stays real only on a smaller range;
    // detect the boundary at runtime.
    if a_sq <= 0.0 {
        return Err(Error::EpsilonTooLarge(eps));
    }
    let a = a_sq.sqrt();
    let bt = DMatrix::from_row_slice(3, 3, &[a, 0.0, 0.0, d, s, eps, eps, eps, s]);
    let b = bt.transpose();
    let gamma = EllipticCoefficients::from_factor(b.clone())?;
    Ok((b, gamma))
}

/// The four quadratic forms |B^T e_1|^2, |B^T e_2|^2, |B^T e_3|^2 and
/// |B^T (1,1,1)|^2 that the counterexample keeps at (1, 1, 1, 3).
pub fn counterexample_invariants(b: &DMatrix<f64>) -> [f64; 4] {
    let bt = b.transpose();
    let col = |j: usize| bt.column(j).norm_squared();
    let ones = DVector::from_element(3, 1.0);
    [col(0), col(1), col(2), (&bt * ones).norm_squared()]
}
