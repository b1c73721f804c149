//! Closed-form Dirichlet eigenfunctions on the 2D and 3D order simplices
//! ("alcoves"), with high-order quadrature for their face Neumann masses.
//!
//! On the alcove {1 >= x_1 >= ... >= x_n >= 0} the antisymmetrized sine
//! products
//!
//!   u(x) = c * sum_{sigma in S_n} sgn(sigma) prod_i sin(k_{sigma(i)} pi x_i)
//!
//! vanish on every face and satisfy -Delta u = pi^2 (sum k_i^2) u, so they are
//! exact Dirichlet eigenfunctions. They serve as the trusted oracle against
//! which the face-mass prediction and the FEM pipeline are checked.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Face, Simplex};
use crate::quadrature::{points_for_wavenumber, QuadratureRule};

const PERMS_2: [([usize; 2], f64); 2] = [([0, 1], 1.0), ([1, 0], -1.0)];
const PERMS_3: [([usize; 3], f64); 6] = [
    ([0, 1, 2], 1.0),
    ([1, 2, 0], 1.0),
    ([2, 0, 1], 1.0),
    ([0, 2, 1], -1.0),
    ([1, 0, 2], -1.0),
    ([2, 1, 0], -1.0),
];

/// A normalized Dirichlet eigenfunction on the alcove.
#[derive(Debug, Clone)]
pub struct AlcoveMode {
    dim: usize,
    wavenumbers: Vec<u32>,
    lambda: f64,
    h: f64,
    normalization: f64,
}

/// Build the mode for strictly decreasing positive integer wavenumbers,
/// normalizing by volume quadrature so that the L^2 norm over the alcove is 1.
pub fn make_mode(dim: usize, wavenumbers: &[u32]) -> Result<AlcoveMode> {
    let k_max = wavenumbers.iter().copied().max().unwrap_or(0);
    make_mode_with_points(dim, wavenumbers, points_for_wavenumber(k_max))
}

/// As [`make_mode`] but with an explicit number of quadrature points per
/// direction for the normalization integral.
pub fn make_mode_with_points(dim: usize, wavenumbers: &[u32], points: usize) -> Result<AlcoveMode> {
    if !(2..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension {
            dim,
            supported: "2..=3",
        });
    }
    if wavenumbers.len() != dim
        || wavenumbers.iter().any(|&k| k == 0)
        || wavenumbers.windows(2).any(|w| w[0] <= w[1])
    {
        return Err(Error::IdenticallyZeroMode(wavenumbers.to_vec()));
    }
    let lambda = PI * PI * wavenumbers.iter().map(|&k| (k * k) as f64).sum::<f64>();
    let mut mode = AlcoveMode {
        dim,
        wavenumbers: wavenumbers.to_vec(),
        lambda,
        h: 1.0 / lambda.sqrt(),
        normalization: 1.0,
    };
    let rule = QuadratureRule::simplex(dim, points)?;
    let norm_sq = rule.integrate(|x| {
        let u = mode.eval(x);
        u * u
    });
    mode.normalization = 1.0 / norm_sq.sqrt();
    Ok(mode)
}

impl AlcoveMode {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn wavenumbers(&self) -> &[u32] {
        &self.wavenumbers
    }

    /// Laplace eigenvalue pi^2 sum k_i^2.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Semiclassical parameter h = lambda^{-1/2}.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// The multiplier applied to the raw antisymmetrized sum.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// The domain of the mode.
    pub fn alcove(&self) -> Simplex {
        Simplex::alcove(self.dim).expect("alcove is non-degenerate")
    }

    fn for_each_term<F: FnMut(&[usize], f64)>(&self, mut f: F) {
        match self.dim {
            2 => {
                for (perm, sign) in &PERMS_2 {
                    f(perm, *sign);
                }
            }
            3 => {
                for (perm, sign) in &PERMS_3 {
                    f(perm, *sign);
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let mut sum = 0.0;
        self.for_each_term(|perm, sign| {
            let mut term = sign;
            for (i, &p) in perm.iter().enumerate() {
                term *= (self.wavenumbers[p] as f64 * PI * x[i]).sin();
            }
            sum += term;
        });
        self.normalization * sum
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut grad = DVector::zeros(self.dim);
        self.for_each_term(|perm, sign| {
            for j in 0..self.dim {
                let mut term = sign;
                for (i, &p) in perm.iter().enumerate() {
                    let kpi = self.wavenumbers[p] as f64 * PI;
                    term *= if i == j {
                        kpi * (kpi * x[i]).cos()
                    } else {
                        (kpi * x[i]).sin()
                    };
                }
                grad[j] += term;
            }
        });
        grad * self.normalization
    }

    /// Laplacian from the termwise analytic second derivatives (equals
    /// -lambda u up to roundoff; kept as a consistency check on the
    /// derivative code paths).
    pub fn laplacian(&self, x: &DVector<f64>) -> f64 {
        let mut sum = 0.0;
        self.for_each_term(|perm, sign| {
            for j in 0..self.dim {
                let mut term = sign;
                for (i, &p) in perm.iter().enumerate() {
                    let kpi = self.wavenumbers[p] as f64 * PI;
                    let s = (kpi * x[i]).sin();
                    term *= if i == j { -kpi * kpi * s } else { s };
                }
                sum += term;
            }
        });
        self.normalization * sum
    }

    /// Default face rule for this mode's frequency content.
    pub fn default_face_rule(&self) -> QuadratureRule {
        let k_max = self.wavenumbers.iter().copied().max().unwrap();
        QuadratureRule::simplex(self.dim - 1, points_for_wavenumber(k_max))
            .expect("face dimension is 1 or 2")
    }
}

/// Semiclassical Neumann mass h^2 int_F |nu . grad u|^2 dS on one face of the
/// alcove, by quadrature.
pub fn neumann_mass_exact(mode: &AlcoveMode, face: &Face, rule: &QuadratureRule) -> Result<f64> {
    if rule.dim() != mode.dim - 1 {
        return Err(Error::QuadratureDimensionMismatch {
            rule: rule.dim(),
            domain: mode.dim - 1,
        });
    }
    let alcove = mode.alcove();
    let pts = alcove.face_vertices(face);
    let integral = rule.integrate_over(&pts, |x| {
        let d = face.normal.dot(&mode.gradient(x));
        d * d
    })?;
    Ok(mode.h * mode.h * integral)
}

/// Neumann masses on all faces of the alcove, indexed by face.
pub fn all_face_masses(mode: &AlcoveMode, rule: &QuadratureRule) -> Result<Vec<f64>> {
    let alcove = mode.alcove();
    alcove
        .faces()
        .iter()
        .map(|f| neumann_mass_exact(mode, f, rule))
        .collect()
}

/// Residual of the commutator boundary identity for the shift vector `m`:
/// pairing the eigenfunction equation with X = sum (x_i + m_i) d_i yields
///
///   2 = sum_faces ((x_F + m) . nu_F) * mass_F,
///
/// where (x + m) . nu is constant on each face. Returns |sum - 2|.
pub fn rellich_identity_check(mode: &AlcoveMode, shift: &DVector<f64>) -> Result<f64> {
    let rule = mode.default_face_rule();
    let alcove = mode.alcove();
    let mut total = 0.0;
    for face in alcove.faces() {
        let mass = neumann_mass_exact(mode, &face, &rule)?;
        let coeff = (alcove.face_centroid(&face) + shift).dot(&face.normal);
        total += coeff * mass;
    }
    Ok((total - 2.0).abs())
}

/// Recover the face masses from the boundary identity alone: each shift `m`
/// contributes one linear equation sum_j c_j(m) J_j = 2 with geometric
/// coefficients c_j(m) = (x_Fj + m) . nu_j. Requires at least n + 1 shifts;
/// overdetermined systems are solved in the least-squares sense.
pub fn masses_from_shift_system(mode: &AlcoveMode, shifts: &[DVector<f64>]) -> Result<Vec<f64>> {
    let alcove = mode.alcove();
    let faces = alcove.faces();
    let n_faces = faces.len();
    if shifts.len() < n_faces {
        return Err(Error::NumericalBreakdown(format!(
            "need at least {n_faces} shifts, got {}",
            shifts.len()
        )));
    }
    let mut a = DMatrix::zeros(shifts.len(), n_faces);
    for (r, m) in shifts.iter().enumerate() {
        for (c, face) in faces.iter().enumerate() {
            a[(r, c)] = (alcove.face_centroid(face) + m).dot(&face.normal);
        }
    }
    let rhs = DVector::from_element(shifts.len(), 2.0);
    let solution = if shifts.len() == n_faces {
        a.lu().solve(&rhs)
    } else {
        (a.transpose() * &a).lu().solve(&(a.transpose() * rhs))
    };
    solution
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::NumericalBreakdown("shift system is singular".into()))
}
