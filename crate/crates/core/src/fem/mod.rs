//! P1 finite elements on uniformly refined simplex meshes: refinement,
//! assembly of the pencil (K, M), eigensolves, and boundary flux extraction.

mod assembly;
mod eigen;
mod flux;
mod mesh;

pub use assembly::{assemble, FemSystem};
pub use eigen::{solve_eigenpairs, FemEigenpair, DENSE_DOF_LIMIT};
pub use flux::{all_face_masses_fem, neumann_mass_fem, FaceMass};
pub use mesh::{refine, BoundaryFacet, SimplexMesh, MAX_LEVEL_2D, MAX_LEVEL_3D};
