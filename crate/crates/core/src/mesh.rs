//! Curved triangulations of the test surfaces.
//!
//! A [`SurfaceMesh`] stores the vertex triangulation together with a
//! degree-`k_geo` lattice of geometric nodes per element, every one of them
//! lifted onto the exact surface. The element map is the Lagrange
//! interpolant through those nodes.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3x2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::basis::{LagrangeBasis, Tabulation};
use crate::fem::dofmap::DofMap;
use crate::fem::quadrature::QuadratureRule;
use crate::geometry::{self, LevelSetSurface, PROJECTION_TOL};

/// Torus parametric grid at level 1 (`n_u` around the axis, `n_v` around the tube).
pub const TORUS_BASE_GRID: (usize, usize) = (16, 8);

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    surface: LevelSetSurface,
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[usize; 3]>,
    level: usize,
    geom_basis: LagrangeBasis,
    geom_map: DofMap,
    geom_nodes: Vec<Vector3<f64>>,
    h: f64,
}

/// Element map `F: T̂ → R³` evaluated at one reference point.
#[derive(Clone, Copy, Debug)]
pub struct MappedPoint {
    pub x: Vector3<f64>,
    pub jacobian: Matrix3x2<f64>,
    pub metric_inv: Matrix2<f64>,
    /// `√det g`
    pub measure: f64,
}

impl MappedPoint {
    /// Tangential gradient `J g⁻¹ ∇̂v` of a function with reference gradient `grad`.
    #[inline]
    pub fn surface_gradient(&self, grad: [f64; 2]) -> Vector3<f64> {
        let g = self.metric_inv * nalgebra::Vector2::new(grad[0], grad[1]);
        self.jacobian * g
    }

    /// Unit normal of the discrete element, oriented by the vertex order.
    pub fn discrete_normal(&self) -> Vector3<f64> {
        self.jacobian.column(0).cross(&self.jacobian.column(1)).normalize()
    }
}

fn project(surface: &LevelSetSurface, x: &Vector3<f64>) -> Result<Vector3<f64>> {
    geometry::closest_point(surface, x, PROJECTION_TOL).map_err(|e| Error::ProjectionFailure(Box::new(e)))
}

/// Build the level-`level` mesh of `surface` with geometric degree `k_geo`.
///
/// The torus starts from a 16 × 8 parametric grid. The sphere and the Dziuk
/// surface start from an icosahedron refined three times on the unit sphere
/// and then carried onto the surface, where the Dziuk seed is relaxed
/// towards equal edge lengths. Each further level is one uniform
/// midpoint refinement.
pub fn build_mesh(surface: &LevelSetSurface, level: usize, k_geo: usize) -> Result<SurfaceMesh> {
    if level == 0 {
        return Err(Error::Config("mesh level must be ≥ 1".into()));
    }
    let (mut vertices, mut triangles) = match *surface {
        LevelSetSurface::Torus { major, minor } => {
            let (v, t) = torus_grid(major, minor, TORUS_BASE_GRID.0, TORUS_BASE_GRID.1);
            (v, t)
        }
        LevelSetSurface::Sphere { .. } | LevelSetSurface::Dziuk => {
            // refine on the unit sphere first so the seed lands on the surface
            // with edges short relative to its curvature
            let (mut v, mut t) = icosahedron();
            let sphere = LevelSetSurface::unit_sphere();
            for _ in 0..3 {
                (v, t) = split(&sphere, &v, &t)?;
            }
            let mut v = v.iter().map(|p| seed_onto(surface, p)).collect::<Result<Vec<_>>>()?;
            if matches!(surface, LevelSetSurface::Dziuk) {
                smooth(surface, &mut v, &t, SEED_SMOOTHING_SWEEPS)?;
            }
            (v, t)
        }
    };
    orient(surface, &vertices, &mut triangles);
    for _ in 1..level {
        (vertices, triangles) = split(surface, &vertices, &triangles)?;
    }
    SurfaceMesh::from_parts(*surface, vertices, triangles, level, k_geo)
}

impl SurfaceMesh {
    fn from_parts(
        surface: LevelSetSurface,
        vertices: Vec<Vector3<f64>>,
        triangles: Vec<[usize; 3]>,
        level: usize,
        k_geo: usize,
    ) -> Result<Self> {
        let geom_basis = LagrangeBasis::new(k_geo);
        let geom_map = DofMap::new(&triangles, k_geo);
        let k = k_geo as f64;
        let geom_nodes = (0..geom_map.n_nodes())
            .map(|node| {
                let (e, m) = geom_map.owner(node);
                let tri = triangles[e];
                let a = geom_basis.lattice()[m];
                if let Some(c) = (0..3).find(|&c| a[c] == k_geo) {
                    return Ok(vertices[tri[c]]);
                }
                let flat = (0..3).fold(Vector3::zeros(), |acc, c| acc + vertices[tri[c]] * (a[c] as f64 / k));
                project(&surface, &flat)
            })
            .collect::<Result<Vec<_>>>()?;
        let h = triangles
            .iter()
            .map(|t| diameter(&vertices, t))
            .fold(0.0, f64::max);
        Ok(SurfaceMesh { surface, vertices, triangles, level, geom_basis, geom_map, geom_nodes, h })
    }

    /// Split every triangle 1 → 4 through projected edge midpoints.
    pub fn refine(&self) -> Result<SurfaceMesh> {
        let (v, t) = split(&self.surface, &self.vertices, &self.triangles)?;
        SurfaceMesh::from_parts(self.surface, v, t, self.level + 1, self.geom_degree())
    }

    /// Same triangulation with a different geometric degree.
    pub fn with_geom_degree(&self, k_geo: usize) -> Result<SurfaceMesh> {
        SurfaceMesh::from_parts(self.surface, self.vertices.clone(), self.triangles.clone(), self.level, k_geo)
    }

    pub fn surface(&self) -> &LevelSetSurface {
        &self.surface
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Maximum flat element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn h_min(&self) -> f64 {
        self.triangles.iter().map(|t| diameter(&self.vertices, t)).fold(f64::INFINITY, f64::min)
    }

    pub fn geom_degree(&self) -> usize {
        self.geom_basis.degree()
    }

    pub fn geom_basis(&self) -> &LagrangeBasis {
        &self.geom_basis
    }

    pub fn geom_nodes(&self) -> &[Vector3<f64>] {
        &self.geom_nodes
    }

    pub fn element_geom_nodes(&self, e: usize) -> &[usize] {
        self.geom_map.element(e)
    }

    /// Evaluate the element map from tabulated geometric basis data.
    #[inline]
    pub fn map_point(&self, e: usize, values: &[f64], grads: &[[f64; 2]]) -> Result<MappedPoint> {
        let nodes = self.geom_map.element(e);
        let mut x = Vector3::zeros();
        let mut jac = Matrix3x2::zeros();
        for (m, &node) in nodes.iter().enumerate() {
            let p = &self.geom_nodes[node];
            x += p * values[m];
            for d in 0..3 {
                jac[(d, 0)] += p[d] * grads[m][0];
                jac[(d, 1)] += p[d] * grads[m][1];
            }
        }
        let g = jac.transpose() * jac;
        let det = g.determinant();
        if !(det > 0.0) {
            return Err(Error::SingularMetric { element: e, det });
        }
        let metric_inv = Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]) / det;
        Ok(MappedPoint { x, jacobian: jac, metric_inv, measure: det.sqrt() })
    }

    /// Evaluate the element map at an arbitrary reference point.
    pub fn map_reference(&self, e: usize, p: [f64; 2]) -> Result<MappedPoint> {
        let n = self.geom_basis.len();
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        self.geom_basis.eval(p, &mut v, &mut g);
        self.map_point(e, &v, &g)
    }

    /// Number of distinct undirected edges.
    pub fn n_edges(&self) -> usize {
        self.edge_counts().len()
    }

    fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// `V − E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.n_edges() as i64 + self.triangles.len() as i64
    }

    /// Every edge is shared by exactly two triangles, traversed once in each direction.
    pub fn is_closed_oriented_manifold(&self) -> bool {
        let mut directed = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if directed.insert((a, b), ()).is_some() {
                    return false;
                }
            }
        }
        directed.keys().all(|&(a, b)| directed.contains_key(&(b, a)))
    }

    /// Smallest interior angle (degrees) over all flat vertex triangles.
    pub fn min_angle_degrees(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in &self.triangles {
            for c in 0..3 {
                let p = self.vertices[t[c]];
                let u = self.vertices[t[(c + 1) % 3]] - p;
                let v = self.vertices[t[(c + 2) % 3]] - p;
                let ang = (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
                min = min.min(ang.to_degrees());
            }
        }
        min
    }
}

/// Quadrature point of a curved element together with its closest point on Γ.
#[derive(Clone, Copy, Debug)]
pub struct LiftedPoint {
    pub element: usize,
    /// Index into the quadrature rule.
    pub q: usize,
    pub map: MappedPoint,
    /// Closest point on the exact surface; exact fields are evaluated here.
    pub y: Vector3<f64>,
    /// Rule weight times the discrete surface measure.
    pub weight: f64,
}

impl SurfaceMesh {
    /// Lifted quadrature points of element `e`.
    pub fn lifted_points(&self, e: usize, rule: &QuadratureRule, tab: &Tabulation) -> Result<Vec<LiftedPoint>> {
        (0..rule.len())
            .map(|q| {
                let map = self.map_point(e, tab.values(q), tab.grads(q))?;
                let y = project(&self.surface, &map.x)?;
                Ok(LiftedPoint { element: e, q, map, y, weight: rule.weights[q] * map.measure })
            })
            .collect()
    }

    /// `Σ_T Σ_q w_q f(point)` for vector-valued integrands.
    ///
    /// Elements are processed in parallel; the per-element sums are added in
    /// element order, so the result does not depend on the thread count.
    pub fn integrate<const N: usize>(
        &self,
        rule: &QuadratureRule,
        f: impl Fn(&LiftedPoint) -> Result<[f64; N]> + Sync,
    ) -> Result<[f64; N]> {
        let tab = self.geom_basis.tabulate(rule);
        let partial: Vec<[f64; N]> = (0..self.n_elements())
            .into_par_iter()
            .map(|e| {
                let mut acc = [0.0; N];
                for pt in self.lifted_points(e, rule, &tab)? {
                    let v = f(&pt)?;
                    for i in 0..N {
                        acc[i] += pt.weight * v[i];
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut total = [0.0; N];
        for p in partial {
            for i in 0..N {
                total[i] += p[i];
            }
        }
        Ok(total)
    }
}

fn diameter(vertices: &[Vector3<f64>], t: &[usize; 3]) -> f64 {
    let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    (a - b).norm().max((b - c).norm()).max((c - a).norm())
}

fn split(
    surface: &LevelSetSurface,
    vertices: &[Vector3<f64>],
    triangles: &[[usize; 3]],
) -> Result<(Vec<Vector3<f64>>, Vec<[usize; 3]>)> {
    let mut verts = vertices.to_vec();
    let mut mid: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 3 / 2);
    let mut tris = Vec::with_capacity(triangles.len() * 4);
    for t in triangles {
        let mut m = [0usize; 3];
        for (i, (a, b)) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])].into_iter().enumerate() {
            let key = (a.min(b), a.max(b));
            m[i] = match mid.get(&key) {
                Some(&id) => id,
                None => {
                    let p = project(surface, &((vertices[key.0] + vertices[key.1]) * 0.5))?;
                    verts.push(p);
                    mid.insert(key, verts.len() - 1);
                    verts.len() - 1
                }
            };
        }
        let [m01, m12, m20] = m;
        tris.push([t[0], m01, m20]);
        tris.push([m01, t[1], m12]);
        tris.push([m20, m12, t[2]]);
        tris.push([m01, m12, m20]);
    }
    Ok((verts, tris))
}

fn orient(surface: &LevelSetSurface, vertices: &[Vector3<f64>], triangles: &mut [[usize; 3]]) {
    for t in triangles.iter_mut() {
        let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
        let centroid = (a + b + c) / 3.0;
        let (_, g) = crate::ad::gradient(surface, &[centroid[0], centroid[1], centroid[2]]);
        if (b - a).cross(&(c - a)).dot(&Vector3::from(g)) < 0.0 {
            t.swap(1, 2);
        }
    }
}

fn torus_grid(major: f64, minor: f64, nu: usize, nv: usize) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let rho = major + minor * v.cos();
            vertices.push(Vector3::new(rho * u.cos(), rho * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    (vertices, triangles)
}

fn icosahedron() -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let vertices = raw.iter().map(|p| Vector3::from(*p).normalize()).collect();
    let triangles = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, triangles)
}

const SEED_SMOOTHING_SWEEPS: usize = 50;
const SPRING_STEP: f64 = 0.1;

/// Spring relaxation towards equal edge lengths, projected back onto the surface after every sweep.
fn smooth(surface: &LevelSetSurface, v: &mut [Vector3<f64>], t: &[[usize; 3]], sweeps: usize) -> Result<()> {
    let mut neighbours = vec![Vec::new(); v.len()];
    for tri in t {
        for c in 0..3 {
            let (a, b) = (tri[c], tri[(c + 1) % 3]);
            neighbours[a].push(b);
            neighbours[b].push(a);
        }
    }
    for _ in 0..sweeps {
        let (sum, count) = neighbours
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().map(move |&j| (i, j)))
            .fold((0.0, 0usize), |(s, c), (i, j)| (s + (v[j] - v[i]).norm(), c + 1));
        let rest = sum / count as f64;
        let next = neighbours
            .iter()
            .enumerate()
            .map(|(i, nb)| {
                let pull = nb.iter().fold(Vector3::zeros(), |acc, &j| {
                    let e = v[j] - v[i];
                    acc + e * ((e.norm() - rest) / e.norm())
                });
                project(surface, &(v[i] + pull * SPRING_STEP))
            })
            .collect::<Result<Vec<_>>>()?;
        v.copy_from_slice(&next);
    }
    Ok(())
}

/// Place a unit-sphere point onto the surface before projecting it.
///
/// The shear `(x + z², y, z)` maps the unit sphere onto the Dziuk surface.
fn seed_onto(surface: &LevelSetSurface, p: &Vector3<f64>) -> Result<Vector3<f64>> {
    let guess = match *surface {
        LevelSetSurface::Sphere { radius } => p * radius,
        LevelSetSurface::Dziuk => Vector3::new(p[0] + p[2] * p[2], p[1], p[2]),
        LevelSetSurface::Torus { .. } => *p,
    };
    project(surface, &guess)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area(mesh: &SurfaceMesh, q: usize) -> f64 {
        let rule = QuadratureRule::with_exactness(q);
        let tab = mesh.geom_basis().tabulate(&rule);
        (0..mesh.n_elements())
            .map(|e| {
                (0..rule.len())
                    .map(|k| rule.weights[k] * mesh.map_point(e, tab.values(k), tab.grads(k)).unwrap().measure)
                    .sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn torus_level_one_topology() {
        let mesh = build_mesh(&LevelSetSurface::torus(2.0, 1.0), 1, 2).unwrap();
        assert_eq!(mesh.vertices().len(), 128);
        assert_eq!(mesh.n_elements(), 256);
        assert_eq!(mesh.euler_characteristic(), 0);
        assert!(mesh.is_closed_oriented_manifold());
    }

    #[test]
    fn sphere_and_dziuk_topology() {
        for s in [LevelSetSurface::unit_sphere(), LevelSetSurface::Dziuk] {
            let mesh = build_mesh(&s, 1, 2).unwrap();
            assert_eq!(mesh.n_elements(), 20 * 64);
            assert_eq!(mesh.euler_characteristic(), 2);
            assert!(mesh.is_closed_oriented_manifold());
        }
    }

    #[test]
    fn refinement_quadruples_and_stays_on_surface() {
        let torus = LevelSetSurface::torus(2.0, 1.0);
        let mesh = build_mesh(&torus, 1, 3).unwrap();
        let fine = mesh.refine().unwrap();
        assert_eq!(fine.n_elements(), 4 * mesh.n_elements());
        assert_eq!(fine.level(), 2);
        for p in fine.geom_nodes() {
            assert!(torus.phi(&[p[0], p[1], p[2]]).abs() <= 1e-10);
        }
        let ratio = mesh.h() / fine.h();
        assert!((ratio - 2.0).abs() < 2.0 * 0.2, "h ratio {ratio}");
    }

    #[test]
    fn element_map_interpolates_vertices() {
        let mesh = build_mesh(&LevelSetSurface::Dziuk, 1, 4).unwrap();
        for e in [0, 17, 400] {
            let t = mesh.triangles()[e];
            for (c, p) in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
                let x = mesh.map_reference(e, p).unwrap().x;
                assert!((x - mesh.vertices()[t[c]]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn sphere_area_converges() {
        let exact = 4.0 * PI;
        let mut prev = f64::NAN;
        for level in 1..=2 {
            let mesh = build_mesh(&LevelSetSurface::unit_sphere(), level, 2).unwrap();
            let err = (area(&mesh, 8) - exact).abs();
            if level > 1 {
                assert!(prev / err > 2f64.powi(3) * 0.8, "{prev} -> {err}");
            }
            prev = err;
        }
    }

    #[test]
    fn level_zero_rejected() {
        assert!(build_mesh(&LevelSetSurface::unit_sphere(), 0, 1).is_err());
    }
}
