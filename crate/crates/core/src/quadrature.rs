//! Gauss-Legendre quadrature, collapsed onto reference simplices with the
//! Duffy transform. The reference domains are the order simplices ("alcoves")
//! {1 >= x_1 >= ... >= x_d >= 0}, which are exactly the image of the unit
//! cube under the Duffy map (a, b, c) -> (a, ab, abc).

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{factorial, gram_measure};

/// Quadrature nodes and weights on a reference domain.
///
/// `dim` 1 is the unit interval, `dim` 2 and 3 are the reference alcoves with
/// measures 1/2 and 1/6. `order` is the guaranteed total polynomial exactness
/// degree.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    dim: usize,
    nodes: Vec<DVector<f64>>,
    weights: Vec<f64>,
    order: usize,
}

/// Gauss-Legendre nodes and weights on [0, 1], by Newton iteration on the
/// Legendre polynomial with Chebyshev initial guesses.
pub fn gauss_legendre_unit(points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(points >= 1);
    let m = points;
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        // Newton on P_m(x); the three-term recurrence also yields P'_m.
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, d2) = legendre(m, x);
                dp = d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1, 1] -> [0, 1]; cos() puts node m-1-i in ascending position.
        nodes[m - 1 - i] = 0.5 * (x + 1.0);
        weights[m - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Legendre polynomial P_m and its derivative at x.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

impl QuadratureRule {
    /// 1D Gauss-Legendre rule on [0, 1]; exact for degree 2m - 1.
    pub fn interval(points: usize) -> Self {
        let (x, w) = gauss_legendre_unit(points);
        QuadratureRule {
            dim: 1,
            nodes: x.into_iter().map(|t| DVector::from_vec(vec![t])).collect(),
            weights: w,
            order: 2 * points - 1,
        }
    }

    /// Duffy-collapsed tensor rule on the reference triangle (2D alcove)
    /// with `points` Gauss points per direction; exact for total degree
    /// 2m - 2.
    pub fn triangle(points: usize) -> Self {
        let (x, w) = gauss_legendre_unit(points);
        let mut nodes = Vec::with_capacity(points * points);
        let mut weights = Vec::with_capacity(points * points);
        for i in 0..points {
            for j in 0..points {
                let a = x[i];
                let b = x[j];
                nodes.push(DVector::from_vec(vec![a, a * b]));
                weights.push(w[i] * w[j] * a);
            }
        }
        QuadratureRule {
            dim: 2,
            nodes,
            weights,
            order: 2 * points - 2,
        }
    }

    /// Duffy-collapsed tensor rule on the reference tetrahedron (3D alcove);
    /// exact for total degree 2m - 3.
    pub fn tetrahedron(points: usize) -> Self {
        let (x, w) = gauss_legendre_unit(points);
        let mut nodes = Vec::with_capacity(points.pow(3));
        let mut weights = Vec::with_capacity(points.pow(3));
        for i in 0..points {
            for j in 0..points {
                for k in 0..points {
                    let (a, b, c) = (x[i], x[j], x[k]);
                    nodes.push(DVector::from_vec(vec![a, a * b, a * b * c]));
                    weights.push(w[i] * w[j] * w[k] * a * a * b);
                }
            }
        }
        QuadratureRule {
            dim: 3,
            nodes,
            weights,
            order: (2 * points).saturating_sub(3),
        }
    }

    /// Rule on the reference simplex of the given dimension.
    pub fn simplex(dim: usize, points: usize) -> Result<Self> {
        match dim {
            1 => Ok(Self::interval(points)),
            2 => Ok(Self::triangle(points)),
            3 => Ok(Self::tetrahedron(points)),
            _ => Err(Error::UnsupportedDimension {
                dim,
                supported: "1..=3",
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[DVector<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Measure of the reference domain (1, 1/2 or 1/6).
    pub fn reference_measure(&self) -> f64 {
        1.0 / factorial(self.dim)
    }

    /// Integrate `f` over the reference domain.
    pub fn integrate<F: FnMut(&DVector<f64>) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }

    /// Barycentric coordinates of a reference node: the alcove vertices are
    /// the prefix-of-ones points, so lambda is the sequence of coordinate
    /// decrements (1 - x_1, x_1 - x_2, ..., x_d).
    fn barycentric(&self, node: &DVector<f64>) -> Vec<f64> {
        let d = self.dim;
        let mut lambda = Vec::with_capacity(d + 1);
        lambda.push(1.0 - node[0]);
        for i in 1..d {
            lambda.push(node[i - 1] - node[i]);
        }
        lambda.push(node[d - 1]);
        lambda
    }

    /// Integrate `f` over the simplex spanned by `vertices` (dim + 1 points in
    /// any ambient dimension >= dim). The rule is mapped affinely; `f`
    /// receives points in the ambient space.
    pub fn integrate_over<F: FnMut(&DVector<f64>) -> f64>(
        &self,
        vertices: &[DVector<f64>],
        mut f: F,
    ) -> Result<f64> {
        if vertices.len() != self.dim + 1 {
            return Err(Error::QuadratureDimensionMismatch {
                rule: self.dim,
                domain: vertices.len().saturating_sub(1),
            });
        }
        let scale = gram_measure(vertices) / self.reference_measure();
        let ambient = vertices[0].len();
        let mut sum = 0.0;
        let mut point = DVector::zeros(ambient);
        for (node, w) in self.nodes.iter().zip(&self.weights) {
            point.fill(0.0);
            for (lam, v) in self.barycentric(node).iter().zip(vertices) {
                point.axpy(*lam, v, 1.0);
            }
            sum += w * scale * f(&point);
        }
        Ok(sum)
    }
}

/// Points per direction for integrands built from sine products of maximal
/// wavenumber `k_max`: 4 k_max + 10.
pub fn points_for_wavenumber(k_max: u32) -> usize {
    (4 * k_max + 10) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Simplex;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_reference_measure() {
        for m in [3, 8, 20, 40] {
            let r1 = QuadratureRule::interval(m);
            assert!((r1.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let r2 = QuadratureRule::triangle(m);
            assert!((r2.weights().iter().sum::<f64>() - 0.5).abs() < 1e-14);
            let r3 = QuadratureRule::tetrahedron(m);
            assert!((r3.weights().iter().sum::<f64>() - 1.0 / 6.0).abs() < 1e-14);
        }
    }

    /// Exact integral of x^p y^q z^r over the alcove {1 >= x >= y >= z >= 0}:
    /// iterated integration gives
    /// 1 / ((r+1) (q+r+2) (p+q+r+3)) in 3D and 1 / ((q+1)(p+q+2)) in 2D.
    fn alcove_monomial_2d(p: u32, q: u32) -> f64 {
        1.0 / ((q as f64 + 1.0) * (p as f64 + q as f64 + 2.0))
    }

    fn alcove_monomial_3d(p: u32, q: u32, r: u32) -> f64 {
        let (p, q, r) = (p as f64, q as f64, r as f64);
        1.0 / ((r + 1.0) * (q + r + 2.0) * (p + q + r + 3.0))
    }

    #[test]
    fn monomial_exactness() {
        let m = 8;
        let r1 = QuadratureRule::interval(m);
        for p in 0..=r1.order() as u32 {
            let val = r1.integrate(|x| x[0].powi(p as i32));
            assert_relative_eq!(val, 1.0 / (p as f64 + 1.0), epsilon = 1e-12);
        }
        let r2 = QuadratureRule::triangle(m);
        for p in 0..=r2.order() as u32 {
            for q in 0..=(r2.order() as u32 - p) {
                let val = r2.integrate(|x| x[0].powi(p as i32) * x[1].powi(q as i32));
                assert_relative_eq!(val, alcove_monomial_2d(p, q), epsilon = 1e-12);
            }
        }
        let r3 = QuadratureRule::tetrahedron(m);
        for p in 0..=r3.order() as u32 {
            for q in 0..=(r3.order() as u32 - p) {
                for r in 0..=(r3.order() as u32 - p - q) {
                    let val = r3.integrate(|x| {
                        x[0].powi(p as i32) * x[1].powi(q as i32) * x[2].powi(r as i32)
                    });
                    assert_relative_eq!(val, alcove_monomial_3d(p, q, r), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn mapped_rule_integrates_measure_and_linears() {
        // Map the edge rule onto a 3D segment and the triangle rule onto a
        // tilted face; constants integrate to the measure.
        let a = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let c = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let edge = QuadratureRule::interval(6);
        let len = edge
            .integrate_over(&[a.clone(), c.clone()], |_| 1.0)
            .unwrap();
        assert_relative_eq!(len, 2.0f64.sqrt(), epsilon = 1e-13);

        let tri = QuadratureRule::triangle(6);
        let area = tri
            .integrate_over(&[a.clone(), b.clone(), c.clone()], |_| 1.0)
            .unwrap();
        assert_relative_eq!(area, 0.5, epsilon = 1e-13);
        // x is identically 1 on this face.
        let xint = tri.integrate_over(&[a, b, c], |p| p[0]).unwrap();
        assert_relative_eq!(xint, 0.5, epsilon = 1e-13);
    }

    #[test]
    fn mapped_volume_matches_simplex_volume() {
        let s = Simplex::from_rows(&[
            vec![0.2, -0.1, 0.3],
            vec![1.1, 0.2, 0.0],
            vec![0.4, 0.9, -0.2],
            vec![0.1, 0.3, 1.2],
        ])
        .unwrap();
        let rule = QuadratureRule::tetrahedron(4);
        let vol = rule.integrate_over(s.vertices(), |_| 1.0).unwrap();
        assert_relative_eq!(vol, s.volume(), epsilon = 1e-13);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let rule = QuadratureRule::triangle(3);
        let a = DVector::from_vec(vec![0.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        assert!(rule.integrate_over(&[a, b], |_| 1.0).is_err());
    }

    #[test]
    fn gauss_nodes_match_reference_values() {
        // 5-point Gauss-Legendre on [-1,1], mapped to [0,1].
        let (x, w) = gauss_legendre_unit(5);
        let xref = [-0.906179845938664, -0.538469310105683, 0.0];
        let wref = [0.236926885056189, 0.478628670499366, 0.568888888888889];
        for i in 0..3 {
            assert_relative_eq!(x[i], 0.5 * (xref[i] + 1.0), epsilon = 1e-14);
            assert_relative_eq!(w[i], 0.5 * wref[i], epsilon = 1e-14);
        }
    }
}
