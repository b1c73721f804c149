//! Uniform simplicial refinement: red refinement of triangles and
//! octasection of tetrahedra with a fixed interior-diagonal choice.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{gram_measure, Simplex};

/// Refinement caps; beyond these the cell count stops being desk-scale.
pub const MAX_LEVEL_2D: usize = 9;
pub const MAX_LEVEL_3D: usize = 6;

/// One boundary facet of the mesh, tagged with the parent simplex face whose
/// hyperplane contains it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub cell: usize,
    pub local_face: usize,
    pub parent_face: usize,
}

/// A uniformly refined mesh of a simplex.
#[derive(Debug, Clone)]
pub struct SimplexMesh {
    dim: usize,
    level: usize,
    parent: Simplex,
    vertices: Vec<DVector<f64>>,
    cells: Vec<Vec<usize>>,
    boundary_facets: Vec<BoundaryFacet>,
}

/// Midpoint pairs that can serve as the octahedron diagonal.
const DIAGONAL_PAIRS: [((usize, usize), (usize, usize)); 3] =
    [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))];

/// Uniformly refine `s` to the requested level: 4^L triangles or 8^L
/// tetrahedra.
pub fn refine(s: &Simplex, level: usize) -> Result<SimplexMesh> {
    let dim = s.dimension();
    let cap = match dim {
        2 => MAX_LEVEL_2D,
        3 => MAX_LEVEL_3D,
        _ => {
            return Err(Error::UnsupportedDimension {
                dim,
                supported: "2..=3",
            })
        }
    };
    if level > cap {
        return Err(Error::ResourceLimit {
            requested: level,
            cap,
            dim,
        });
    }

    let mut vertices: Vec<DVector<f64>> = s.vertices().to_vec();
    let mut root: Vec<usize> = (0..=dim).collect();
    if orientation_det(&vertices, &root) < 0.0 {
        root.swap(dim - 1, dim);
    }
    if dim == 3 {
        // Relabel so the shortest interior diagonal occupies the positional
        // pair ((0,2), (1,3)) that the refinement rule below always splits;
        // descendants inherit the choice through the canonical child
        // orderings. The relabelings are even permutations, preserving
        // orientation.
        match shortest_diagonal(&vertices, &root) {
            0 => {
                root.swap(1, 2);
                root.swap(1, 3);
            }
            2 => {
                root.swap(2, 3);
                root.swap(0, 2);
            }
            _ => {}
        }
    }
    let mut cells = vec![root];

    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(cells.len() * (1 << dim));
        for cell in &cells {
            let mut mid = |a: usize, b: usize, vertices: &mut Vec<DVector<f64>>| {
                let key = (cell[a].min(cell[b]), cell[a].max(cell[b]));
                *midpoints.entry(key).or_insert_with(|| {
                    let p = (&vertices[key.0] + &vertices[key.1]) * 0.5;
                    vertices.push(p);
                    vertices.len() - 1
                })
            };
            match dim {
                2 => {
                    let m01 = mid(0, 1, &mut vertices);
                    let m02 = mid(0, 2, &mut vertices);
                    let m12 = mid(1, 2, &mut vertices);
                    next.push(vec![cell[0], m01, m02]);
                    next.push(vec![cell[1], m12, m01]);
                    next.push(vec![cell[2], m02, m12]);
                    next.push(vec![m01, m12, m02]);
                }
                3 => {
                    // Red refinement in the canonical child orderings
                    // (corner tetrahedra plus the octahedron split along the
                    // (m02, m13) diagonal); every descendant keeps splitting
                    // the positional (0,2)-(1,3) pair.
                    let mut m = [[0usize; 4]; 4];
                    for a in 0..4 {
                        for b in (a + 1)..4 {
                            m[a][b] = mid(a, b, &mut vertices);
                        }
                    }
                    next.push(vec![cell[0], m[0][1], m[0][2], m[0][3]]);
                    next.push(vec![m[0][1], cell[1], m[1][2], m[1][3]]);
                    next.push(vec![m[0][2], m[1][2], cell[2], m[2][3]]);
                    next.push(vec![m[0][3], m[1][3], m[2][3], cell[3]]);
                    next.push(vec![m[0][1], m[0][2], m[0][3], m[1][3]]);
                    next.push(vec![m[0][1], m[0][2], m[1][2], m[1][3]]);
                    next.push(vec![m[0][2], m[0][3], m[1][3], m[2][3]]);
                    next.push(vec![m[0][2], m[1][2], m[1][3], m[2][3]]);
                }
                _ => unreachable!(),
            }
        }
        for cell in &mut next {
            if orientation_det(&vertices, cell) < 0.0 {
                // Swapping positions 0 and 2 flips orientation while leaving
                // the positional diagonal pair {(0,2), (1,3)} unchanged.
                cell.swap(0, 2);
            }
        }
        cells = next;
    }

    let boundary_facets = tag_boundary_facets(s, &vertices, &cells)?;

    Ok(SimplexMesh {
        dim,
        level,
        parent: s.clone(),
        vertices,
        cells,
        boundary_facets,
    })
}

fn orientation_det(vertices: &[DVector<f64>], cell: &[usize]) -> f64 {
    let dim = cell.len() - 1;
    let mut d = DMatrix::zeros(dim, dim);
    for j in 1..=dim {
        d.set_column(j - 1, &(&vertices[cell[j]] - &vertices[cell[0]]));
    }
    d.determinant()
}

fn shortest_diagonal(vertices: &[DVector<f64>], cell: &[usize]) -> usize {
    let mid = |a: usize, b: usize| (&vertices[cell[a]] + &vertices[cell[b]]) * 0.5;
    DIAGONAL_PAIRS
        .iter()
        .enumerate()
        .map(|(i, &((a1, a2), (b1, b2)))| (i, (mid(a1, a2) - mid(b1, b2)).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap()
}

/// Find facets that belong to exactly one cell and match each to the unique
/// parent face hyperplane that contains it.
fn tag_boundary_facets(
    parent: &Simplex,
    vertices: &[DVector<f64>],
    cells: &[Vec<usize>],
) -> Result<Vec<BoundaryFacet>> {
    let dim = parent.dimension();
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for cell in cells {
        for local in 0..=dim {
            counts
                .entry(facet_key(cell, local))
                .and_modify(|c| *c += 1)
                .or_insert(1);
        }
    }

    let faces = parent.faces();
    let offsets: Vec<f64> = faces
        .iter()
        .map(|f| f.normal.dot(&parent.vertices()[f.vertex_indices[0]]))
        .collect();
    let tol = 1e-12 * parent.vertex_scale();

    let mut result = Vec::new();
    // Iterate cells in order so that the facet list (and later flux sums) is
    // deterministic.
    for (ci, cell) in cells.iter().enumerate() {
        for local in 0..=dim {
            if counts[&facet_key(cell, local)] != 1 {
                continue;
            }
            let facet: Vec<usize> = cell
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != local)
                .map(|(_, &v)| v)
                .collect();
            let mut parent_face = None;
            for (j, face) in faces.iter().enumerate() {
                let on_plane = facet
                    .iter()
                    .all(|&v| (face.normal.dot(&vertices[v]) - offsets[j]).abs() < tol);
                if on_plane {
                    if parent_face.is_some() {
                        return Err(Error::NumericalBreakdown(format!(
                            "boundary facet of cell {ci} lies in two parent hyperplanes"
                        )));
                    }
                    parent_face = Some(j);
                }
            }
            let parent_face = parent_face.ok_or_else(|| {
                Error::NumericalBreakdown(format!(
                    "boundary facet of cell {ci} matches no parent hyperplane"
                ))
            })?;
            result.push(BoundaryFacet {
                cell: ci,
                local_face: local,
                parent_face,
            });
        }
    }
    Ok(result)
}

fn facet_key(cell: &[usize], local: usize) -> Vec<usize> {
    let mut key: Vec<usize> = cell
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != local)
        .map(|(_, &v)| v)
        .collect();
    key.sort_unstable();
    key
}

impl SimplexMesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn parent(&self) -> &Simplex {
        &self.parent
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_volume(&self, cell: usize) -> f64 {
        orientation_det(&self.vertices, &self.cells[cell]).abs()
            / crate::geometry::factorial(self.dim)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_volume(c)).sum()
    }

    /// Vertex indices of a cell facet (the cell's vertices minus the local
    /// one).
    pub fn facet_vertices(&self, cell: usize, local_face: usize) -> Vec<usize> {
        self.cells[cell]
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != local_face)
            .map(|(_, &v)| v)
            .collect()
    }

    /// Measure of a cell facet.
    pub fn facet_measure(&self, cell: usize, local_face: usize) -> f64 {
        let pts: Vec<DVector<f64>> = self
            .facet_vertices(cell, local_face)
            .iter()
            .map(|&v| self.vertices[v].clone())
            .collect();
        gram_measure(&pts)
    }

    /// True for vertices that lie on the boundary of the parent simplex.
    pub fn boundary_vertex_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for bf in &self.boundary_facets {
            for &v in &self.facet_vertices(bf.cell, bf.local_face) {
                flags[v] = true;
            }
        }
        flags
    }

    /// Image of the mesh under x -> A x + shift. Combinatorics (cells,
    /// boundary tags) are preserved; cell orientation follows sign(det A).
    pub fn map_affine(&self, a: &DMatrix<f64>, shift: &DVector<f64>) -> Result<SimplexMesh> {
        let vertices: Vec<DVector<f64>> = self.vertices.iter().map(|v| a * v + shift).collect();
        let parent = Simplex::new(
            self.parent
                .vertices()
                .iter()
                .map(|v| a * v + shift)
                .collect(),
        )?;
        Ok(SimplexMesh {
            dim: self.dim,
            level: self.level,
            parent,
            vertices,
            cells: self.cells.clone(),
            boundary_facets: self.boundary_facets.clone(),
        })
    }

    /// Mesh dump for external visualization.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "vertices": self.vertices.iter()
                .map(|v| v.iter().copied().collect::<Vec<f64>>())
                .collect::<Vec<_>>(),
            "cells": self.cells,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn level_zero_is_the_simplex_itself() {
        let s = Simplex::standard(2).unwrap();
        let mesh = refine(&s, 0).unwrap();
        assert_eq!(mesh.n_cells(), 1);
        assert_relative_eq!(mesh.total_volume(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn triangle_level_two_counts_and_area() {
        let mesh = refine(&Simplex::standard(2).unwrap(), 2).unwrap();
        assert_eq!(mesh.n_cells(), 16);
        assert_relative_eq!(mesh.total_volume(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn tetrahedron_octasection_conserves_volume() {
        let mesh = refine(&Simplex::standard(3).unwrap(), 1).unwrap();
        assert_eq!(mesh.n_cells(), 8);
        assert!((mesh.total_volume() - 1.0 / 6.0).abs() < 1e-14);
        for c in 0..8 {
            // Octasection splits volume equally.
            assert_relative_eq!(mesh.cell_volume(c), 1.0 / 48.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn cells_positively_oriented() {
        for s in [Simplex::standard(3).unwrap(), Simplex::alcove(3).unwrap()] {
            let mesh = refine(&s, 2).unwrap();
            for cell in mesh.cells() {
                assert!(orientation_det(mesh.vertices(), cell) > 0.0);
            }
        }
        // A root with negative orientation still yields positive cells.
        let flipped =
            Simplex::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let mesh = refine(&flipped, 1).unwrap();
        for cell in mesh.cells() {
            assert!(orientation_det(mesh.vertices(), cell) > 0.0);
        }
    }

    #[test]
    fn boundary_facets_lie_on_parent_hyperplanes() {
        let s = Simplex::alcove(3).unwrap();
        let mesh = refine(&s, 2).unwrap();
        let faces = s.faces();
        // 4 parent faces, each refined into 4^2 facets.
        assert_eq!(mesh.boundary_facets().len(), 4 * 16);
        for bf in mesh.boundary_facets() {
            let face = &faces[bf.parent_face];
            let offset = face.normal.dot(&s.vertices()[face.vertex_indices[0]]);
            for &v in &mesh.facet_vertices(bf.cell, bf.local_face) {
                assert!((face.normal.dot(&mesh.vertices()[v]) - offset).abs() < 1e-12);
            }
        }
        // Per-face boundary measures add up to the parent face measures.
        for (j, face) in faces.iter().enumerate() {
            let total: f64 = mesh
                .boundary_facets()
                .iter()
                .filter(|bf| bf.parent_face == j)
                .map(|bf| mesh.facet_measure(bf.cell, bf.local_face))
                .sum();
            assert_relative_eq!(total, face.measure, max_relative = 1e-12);
        }
    }

    #[test]
    fn refinement_cap_is_enforced() {
        let s = Simplex::standard(3).unwrap();
        assert!(matches!(
            refine(&s, MAX_LEVEL_3D + 1),
            Err(Error::ResourceLimit { .. })
        ));
    }

    /// Shape quality (volume over longest-edge^dim) must not collapse under
    /// repeated refinement; this guards the inherited-diagonal choice.
    #[test]
    fn mesh_quality_stays_bounded() {
        for s in [Simplex::standard(3).unwrap(), Simplex::alcove(3).unwrap()] {
            let quality = |mesh: &SimplexMesh| -> f64 {
                (0..mesh.n_cells())
                    .map(|c| {
                        let cell = &mesh.cells()[c];
                        let mut hmax = 0.0f64;
                        for a in 0..cell.len() {
                            for b in (a + 1)..cell.len() {
                                hmax = hmax.max(
                                    (&mesh.vertices()[cell[a]] - &mesh.vertices()[cell[b]]).norm(),
                                );
                            }
                        }
                        mesh.cell_volume(c) / hmax.powi(3)
                    })
                    .fold(f64::INFINITY, f64::min)
            };
            let q1 = quality(&refine(&s, 1).unwrap());
            let q4 = quality(&refine(&s, 4).unwrap());
            assert!(q4 > 0.9 * q1, "quality degraded from {q1:.4} to {q4:.4}");
        }
    }

    /// Refining the order simplex reproduces order-simplex children: all
    /// eight cells are congruent to the parent scaled by 1/2.
    #[test]
    fn alcove_refinement_is_self_similar() {
        let s = Simplex::alcove(3).unwrap();
        let mesh = refine(&s, 1).unwrap();
        let edge_multiset = |pts: &[DVector<f64>], cell: &[usize]| -> Vec<f64> {
            let mut edges = Vec::new();
            for a in 0..cell.len() {
                for b in (a + 1)..cell.len() {
                    edges.push((&pts[cell[a]] - &pts[cell[b]]).norm());
                }
            }
            edges.sort_by(|x, y| x.total_cmp(y));
            edges
        };
        let root: Vec<usize> = (0..=3).collect();
        let parent_edges = edge_multiset(s.vertices(), &root);
        for cell in mesh.cells() {
            let child_edges = edge_multiset(mesh.vertices(), cell);
            for (c, p) in child_edges.iter().zip(&parent_edges) {
                assert!(
                    (c - 0.5 * p).abs() < 1e-14,
                    "child edges {child_edges:?} vs parent {parent_edges:?}"
                );
            }
        }
    }

    #[test]
    fn mapped_mesh_keeps_combinatorics() {
        let mesh = refine(&Simplex::standard(2).unwrap(), 3).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]);
        let shift = DVector::from_vec(vec![0.25, -1.0]);
        let mapped = mesh.map_affine(&a, &shift).unwrap();
        assert_eq!(mapped.cells(), mesh.cells());
        assert_eq!(mapped.boundary_facets(), mesh.boundary_facets());
        assert_relative_eq!(mapped.total_volume(), 0.25, epsilon = 1e-14);
    }
}
