//! Lagrange finite element spaces on a curved surface mesh.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use super::basis::LagrangeBasis;
use super::dofmap::DofMap;
use crate::error::{Error, Result};
use crate::geometry::{self, PROJECTION_TOL};
use crate::mesh::{MappedPoint, SurfaceMesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Scalar,
    /// Three ambient components per node, interleaved as `3·node + c`.
    Vector,
}

impl Arity {
    pub fn components(self) -> usize {
        match self {
            Arity::Scalar => 1,
            Arity::Vector => 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FESpace {
    mesh: Arc<SurfaceMesh>,
    arity: Arity,
    basis: LagrangeBasis,
    dofs: DofMap,
}

impl FESpace {
    pub fn new(mesh: Arc<SurfaceMesh>, degree: usize, arity: Arity) -> Self {
        let dofs = DofMap::new(mesh.triangles(), degree);
        FESpace { mesh, arity, basis: LagrangeBasis::new(degree), dofs }
    }

    pub fn scalar(mesh: Arc<SurfaceMesh>, degree: usize) -> Self {
        FESpace::new(mesh, degree, Arity::Scalar)
    }

    pub fn vector(mesh: Arc<SurfaceMesh>, degree: usize) -> Self {
        FESpace::new(mesh, degree, Arity::Vector)
    }

    pub fn mesh(&self) -> &Arc<SurfaceMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn dof_map(&self) -> &DofMap {
        &self.dofs
    }

    pub fn n_nodes(&self) -> usize {
        self.dofs.n_nodes()
    }

    /// Total number of scalar unknowns.
    pub fn n_dofs(&self) -> usize {
        self.dofs.n_nodes() * self.arity.components()
    }

    #[inline]
    pub fn element_nodes(&self, e: usize) -> &[usize] {
        self.dofs.element(e)
    }

    /// Position of every global node on the discrete surface.
    pub fn node_points(&self) -> Result<Vec<Vector3<f64>>> {
        (0..self.n_nodes())
            .map(|node| {
                let (e, m) = self.dofs.owner(node);
                Ok(self.mesh.map_reference(e, self.basis.node(m))?.x)
            })
            .collect()
    }

    /// Nodal interpolant of a scalar function evaluated at the lifted nodes.
    pub fn interpolate_scalar(&self, f: impl Fn(&Vector3<f64>) -> f64) -> Result<Vec<f64>> {
        self.check_arity(Arity::Scalar)?;
        self.lifted_nodes()?.iter().map(|y| Ok(f(y))).collect()
    }

    /// Nodal interpolant of an ambient vector function evaluated at the lifted nodes.
    pub fn interpolate_vector(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> Result<Vec<f64>> {
        self.check_arity(Arity::Vector)?;
        let mut out = Vec::with_capacity(self.n_dofs());
        for y in self.lifted_nodes()? {
            out.extend_from_slice(f(&y).as_slice());
        }
        Ok(out)
    }

    fn lifted_nodes(&self) -> Result<Vec<Vector3<f64>>> {
        self.node_points()?
            .iter()
            .map(|x| geometry::closest_point(self.mesh.surface(), x, PROJECTION_TOL))
            .collect()
    }

    fn check_arity(&self, arity: Arity) -> Result<()> {
        if self.arity == arity {
            Ok(())
        } else {
            Err(Error::SpaceMismatch(format!("expected {arity:?} space, got {:?}", self.arity)))
        }
    }

    /// Value of a scalar field at a point with tabulated basis `values`.
    pub fn scalar_value(&self, e: usize, coeffs: &[f64], values: &[f64]) -> f64 {
        self.element_nodes(e).iter().zip(values).map(|(&n, v)| coeffs[n] * v).sum()
    }

    /// Value of a vector field at a point with tabulated basis `values`.
    pub fn vector_value(&self, e: usize, coeffs: &[f64], values: &[f64]) -> Vector3<f64> {
        let mut w = Vector3::zeros();
        for (&n, v) in self.element_nodes(e).iter().zip(values) {
            w += Vector3::new(coeffs[3 * n], coeffs[3 * n + 1], coeffs[3 * n + 2]) * *v;
        }
        w
    }

    /// Discrete tangential gradient `J g⁻¹ ∇̂v` of a scalar field.
    pub fn scalar_gradient(&self, e: usize, coeffs: &[f64], map: &MappedPoint, grads: &[[f64; 2]]) -> Vector3<f64> {
        let mut g = [0.0; 2];
        for (&n, d) in self.element_nodes(e).iter().zip(grads) {
            g[0] += coeffs[n] * d[0];
            g[1] += coeffs[n] * d[1];
        }
        map.surface_gradient(g)
    }

    /// Row-wise discrete gradient of a vector field: row `i` is `∇_{Γh} wᵢ`.
    pub fn vector_gradient(&self, e: usize, coeffs: &[f64], map: &MappedPoint, grads: &[[f64; 2]]) -> Matrix3<f64> {
        let mut g = [[0.0; 2]; 3];
        for (&n, d) in self.element_nodes(e).iter().zip(grads) {
            for (c, row) in g.iter_mut().enumerate() {
                row[0] += coeffs[3 * n + c] * d[0];
                row[1] += coeffs[3 * n + c] * d[1];
            }
        }
        let mut out = Matrix3::zeros();
        for c in 0..3 {
            out.set_row(c, &map.surface_gradient(g[c]).transpose());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::QuadratureRule;
    use crate::geometry::LevelSetSurface;
    use crate::mesh::build_mesh;

    #[test]
    fn vector_space_has_three_dofs_per_node() {
        let mesh = Arc::new(build_mesh(&LevelSetSurface::unit_sphere(), 1, 2).unwrap());
        let s = FESpace::scalar(mesh.clone(), 2);
        let v = FESpace::vector(mesh.clone(), 2);
        assert_eq!(v.n_dofs(), 3 * s.n_dofs());
        // closed sphere mesh: V + E nodes for P2
        assert_eq!(s.n_nodes(), mesh.vertices().len() + mesh.n_edges());
        assert!(s.interpolate_vector(|y| *y).is_err());
    }

    #[test]
    fn coordinate_gradient_on_unit_sphere() {
        let mesh = Arc::new(build_mesh(&LevelSetSurface::unit_sphere(), 3, 5).unwrap());
        let space = FESpace::scalar(mesh.clone(), 4);
        let coeffs = space.interpolate_scalar(|y| y[0]).unwrap();
        let rule = QuadratureRule::with_exactness(8);
        let tab_u = space.basis().tabulate(&rule);
        let tab_g = mesh.geom_basis().tabulate(&rule);
        let mut worst: f64 = 0.0;
        for e in (0..mesh.n_elements()).step_by(37) {
            for q in 0..rule.len() {
                let map = mesh.map_point(e, tab_g.values(q), tab_g.grads(q)).unwrap();
                let g = space.scalar_gradient(e, &coeffs, &map, tab_u.grads(q));
                let y = map.x.normalize();
                let exact = Vector3::x() - y * y[0];
                worst = worst.max((g - exact).norm());
            }
        }
        assert!(worst <= 1e-6, "{worst}");
    }

    #[test]
    fn constants_have_zero_gradient() {
        let mesh = Arc::new(build_mesh(&LevelSetSurface::torus(2.0, 1.0), 1, 3).unwrap());
        let space = FESpace::vector(mesh.clone(), 3);
        let coeffs = space.interpolate_vector(|_| Vector3::new(1.0, -2.0, 0.5)).unwrap();
        let rule = QuadratureRule::with_exactness(6);
        let tab_u = space.basis().tabulate(&rule);
        let tab_g = mesh.geom_basis().tabulate(&rule);
        for e in 0..mesh.n_elements() {
            let map = mesh.map_point(e, tab_g.values(0), tab_g.grads(0)).unwrap();
            assert!(space.vector_gradient(e, &coeffs, &map, tab_u.grads(0)).norm() < 1e-12);
        }
    }
}
