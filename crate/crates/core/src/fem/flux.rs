//! Boundary Neumann mass of discrete eigenfunctions.
//!
//! P1 gradients are constant per cell, so the flux integral over a boundary
//! facet is exactly the facet measure times the squared normal component.

use crate::error::{Error, Result};

use super::assembly::{cell_gradients, FemSystem};
use super::eigen::FemEigenpair;

/// Neumann mass of a discrete eigenfunction on one parent face: the raw
/// semiclassical mass h^2 int |nu . grad u_h|^2 dS and the
/// coefficient-weighted pairing h^2 int (nu . grad u_h)(nu^T Gamma grad u_h)
/// dS. For Gamma = B B^T the two are related by |B^T nu|^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceMass {
    pub raw: f64,
    pub weighted: f64,
}

/// Measure Neumann mass of `pair` on parent face `j`.
pub fn neumann_mass_fem(pair: &FemEigenpair, sys: &FemSystem, j: usize) -> Result<FaceMass> {
    let mesh = sys.mesh();
    let dim = mesh.dim();
    if j > dim {
        return Err(Error::FaceIndexOutOfRange { index: j, dim });
    }
    let face = mesh.parent().face(j)?;
    let nu = &face.normal;
    let gamma_nu = sys.coeffs().gamma() * nu;
    let full = sys.full_values(&pair.coefficients);

    let mut raw = 0.0;
    let mut weighted = 0.0;
    for bf in mesh.boundary_facets() {
        if bf.parent_face != j {
            continue;
        }
        let (grads, _) = cell_gradients(mesh, bf.cell);
        let verts = &mesh.cells()[bf.cell];
        let mut grad_u = nalgebra::DVector::zeros(dim);
        for (a, &v) in verts.iter().enumerate() {
            grad_u.axpy(full[v], &grads.column(a).into_owned(), 1.0);
        }
        let measure = mesh.facet_measure(bf.cell, bf.local_face);
        let normal_flux = nu.dot(&grad_u);
        raw += measure * normal_flux * normal_flux;
        weighted += measure * normal_flux * gamma_nu.dot(&grad_u);
    }
    let h2 = pair.h * pair.h;
    Ok(FaceMass {
        raw: h2 * raw,
        weighted: h2 * weighted,
    })
}

/// Masses on all parent faces, indexed by face.
pub fn all_face_masses_fem(pair: &FemEigenpair, sys: &FemSystem) -> Result<Vec<FaceMass>> {
    (0..=sys.mesh().dim())
        .map(|j| neumann_mass_fem(pair, sys, j))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::assemble;
    use crate::fem::eigen::solve_eigenpairs;
    use crate::fem::mesh::refine;
    use crate::geometry::{EllipticCoefficients, Simplex};
    use nalgebra::DVector;

    #[test]
    fn face_masses_converge_to_prediction_2d() {
        // Ground mode on the standard triangle; coordinate faces predict 2,
        // the hypotenuse 2 sqrt(2).
        let s = Simplex::standard(2).unwrap();
        let mesh = refine(&s, 6).unwrap();
        let sys = assemble(&mesh, &EllipticCoefficients::identity(2)).unwrap();
        let pair = solve_eigenpairs(&sys, 1).unwrap().remove(0);
        let hyp = neumann_mass_fem(&pair, &sys, 0).unwrap();
        let leg = neumann_mass_fem(&pair, &sys, 1).unwrap();
        assert!(
            (hyp.raw / (2.0 * 2.0f64.sqrt()) - 1.0).abs() < 0.03,
            "hypotenuse mass {}",
            hyp.raw
        );
        assert!((leg.raw / 2.0 - 1.0).abs() < 0.03, "leg mass {}", leg.raw);
    }

    #[test]
    fn weighted_mass_equals_bt_nu_scaling() {
        // Lemma: int (h d_nu u)(nu^T Gamma h grad u) = |B^T nu|^2 J on every
        // face, for the discrete gradient identically (it is an algebraic
        // identity of the constant per-cell gradient).
        let s = Simplex::standard(2).unwrap();
        let b = nalgebra::DMatrix::from_row_slice(2, 2, &[1.3, 0.4, -0.2, 0.9]);
        let gamma = EllipticCoefficients::from_factor(b.clone()).unwrap();
        let mesh = refine(&s, 4).unwrap();
        let sys = assemble(&mesh, &gamma).unwrap();
        let pair = solve_eigenpairs(&sys, 1).unwrap().remove(0);
        for (j, face) in s.faces().iter().enumerate() {
            let m = neumann_mass_fem(&pair, &sys, j).unwrap();
            let bt_nu = (b.transpose() * &face.normal).norm_squared();
            // The discrete gradient is exactly normal on boundary cells (the
            // facet values vanish), so the identity holds to roundoff.
            assert!(
                (m.weighted - bt_nu * m.raw).abs() < 1e-10 * m.raw.max(1e-12),
                "face {j}: weighted {} vs |B^T nu|^2 raw {}",
                m.weighted,
                bt_nu * m.raw
            );
        }
    }

    #[test]
    fn invalid_face_index() {
        let s = Simplex::standard(2).unwrap();
        let mesh = refine(&s, 2).unwrap();
        let sys = assemble(&mesh, &EllipticCoefficients::identity(2)).unwrap();
        let pair = solve_eigenpairs(&sys, 1).unwrap().remove(0);
        assert!(neumann_mass_fem(&pair, &sys, 5).is_err());
    }

    #[test]
    fn boundary_mass_never_negative() {
        let s = Simplex::from_rows(&[vec![0.1, 0.0], vec![1.3, 0.2], vec![0.4, 1.1]]).unwrap();
        let mesh = refine(&s, 4).unwrap();
        let sys = assemble(&mesh, &EllipticCoefficients::identity(2)).unwrap();
        let pair = solve_eigenpairs(&sys, 1).unwrap().remove(0);
        for j in 0..=2 {
            assert!(neumann_mass_fem(&pair, &sys, j).unwrap().raw >= 0.0);
        }
    }

    #[test]
    fn gradient_reconstruction_is_exact_for_linears() {
        // Interpolate a linear function and check the per-cell gradient.
        let s = Simplex::standard(2).unwrap();
        let mesh = refine(&s, 2).unwrap();
        for c in 0..mesh.n_cells() {
            let (grads, _) = cell_gradients(&mesh, c);
            let verts = &mesh.cells()[c];
            let mut g = DVector::zeros(2);
            for (a, &v) in verts.iter().enumerate() {
                let val = 3.0 * mesh.vertices()[v][0] - 2.0 * mesh.vertices()[v][1] + 0.7;
                g.axpy(val, &grads.column(a).into_owned(), 1.0);
            }
            assert!((g[0] - 3.0).abs() < 1e-12 && (g[1] + 2.0).abs() < 1e-12);
        }
    }
}
