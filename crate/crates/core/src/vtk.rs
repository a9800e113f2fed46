//! Legacy ASCII VTK export of the mesh with vertex fields.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::space::{Arity, FESpace};

/// Velocity and pressure sampled at the mesh vertices.
pub struct VertexFields {
    pub velocity: Vec<[f64; 3]>,
    pub pressure: Vec<f64>,
}

pub fn vertex_fields(v_u: &FESpace, v_p: &FESpace, w: &[f64], p: &[f64]) -> Result<VertexFields> {
    if v_u.arity() != Arity::Vector || v_p.arity() != Arity::Scalar || w.len() != v_u.n_dofs() || p.len() != v_p.n_dofs() {
        return Err(Error::SpaceMismatch("vertex export needs matching vector/scalar coefficients".into()));
    }
    let mesh = v_u.mesh();
    let nv = mesh.vertices().len();
    let mut velocity = vec![[0.0; 3]; nv];
    let mut pressure = vec![0.0; nv];
    for (e, tri) in mesh.triangles().iter().enumerate() {
        for (c, &v) in tri.iter().enumerate() {
            let nu = v_u.element_nodes(e)[v_u.basis().vertex_node(c)];
            let np = v_p.element_nodes(e)[v_p.basis().vertex_node(c)];
            velocity[v] = [w[3 * nu], w[3 * nu + 1], w[3 * nu + 2]];
            pressure[v] = p[np];
        }
    }
    Ok(VertexFields { velocity, pressure })
}

/// POLYDATA document with `velocity` (vector), `velocity_magnitude` and `pressure` point data.
pub fn to_vtk_string(v_u: &FESpace, v_p: &FESpace, w: &[f64], p: &[f64], title: &str) -> Result<String> {
    let fields = vertex_fields(v_u, v_p, w, p)?;
    let mesh = v_u.mesh();
    let mut s = String::new();
    let nv = mesh.vertices().len();
    let nt = mesh.n_elements();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET POLYDATA");
    let _ = writeln!(s, "POINTS {nv} double");
    for x in mesh.vertices() {
        let _ = writeln!(s, "{:.12e} {:.12e} {:.12e}", x[0], x[1], x[2]);
    }
    let _ = writeln!(s, "POLYGONS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "POINT_DATA {nv}");
    let _ = writeln!(s, "VECTORS velocity double");
    for u in &fields.velocity {
        let _ = writeln!(s, "{:.12e} {:.12e} {:.12e}", u[0], u[1], u[2]);
    }
    let _ = writeln!(s, "SCALARS velocity_magnitude double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for u in &fields.velocity {
        let _ = writeln!(s, "{:.12e}", (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt());
    }
    let _ = writeln!(s, "SCALARS pressure double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for p in &fields.pressure {
        let _ = writeln!(s, "{p:.12e}");
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, v_u: &FESpace, v_p: &FESpace, w: &[f64], p: &[f64], title: &str) -> Result<()> {
    std::fs::write(path, to_vtk_string(v_u, v_p, w, p, title)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LevelSetSurface;
    use crate::mesh::build_mesh;
    use std::sync::Arc;

    #[test]
    fn zero_solution_exports_zero_fields() {
        let mesh = Arc::new(build_mesh(&LevelSetSurface::unit_sphere(), 1, 2).unwrap());
        let (vu, vp) = (FESpace::vector(mesh.clone(), 2), FESpace::scalar(mesh.clone(), 1));
        let text = to_vtk_string(&vu, &vp, &vec![0.0; vu.n_dofs()], &vec![0.0; vp.n_dofs()], "zero").unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains(&format!("POINTS {} double", mesh.vertices().len())));
        assert!(text.contains(&format!("POLYGONS {} {}", mesh.n_elements(), 4 * mesh.n_elements())));
        let data = text.split("POINT_DATA").nth(1).unwrap();
        for line in data.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit() || c == '-')) {
            assert!(line.split_whitespace().all(|v| v.parse::<f64>().unwrap() == 0.0), "{line}");
        }
    }

    #[test]
    fn vertex_values_follow_interpolant() {
        let mesh = Arc::new(build_mesh(&LevelSetSurface::torus(2.0, 1.0), 1, 2).unwrap());
        let (vu, vp) = (FESpace::vector(mesh.clone(), 2), FESpace::scalar(mesh.clone(), 2));
        let w = vu.interpolate_vector(|y| *y).unwrap();
        let p = vp.interpolate_scalar(|y| y[2]).unwrap();
        let f = vertex_fields(&vu, &vp, &w, &p).unwrap();
        for (x, (u, q)) in mesh.vertices().iter().zip(f.velocity.iter().zip(&f.pressure)) {
            assert!((x[0] - u[0]).abs() < 1e-10 && (x[2] - q).abs() < 1e-10);
        }
    }
}
