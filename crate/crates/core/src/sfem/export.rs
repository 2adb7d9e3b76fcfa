use std::io::{self, Write};

use super::{FieldSnapshot, SfemSolver, TriMesh};
use crate::geometry::chemical_potential;

/// Legacy ASCII VTK polydata with per-point scalar arrays.
pub fn write_vtk_polydata<W: Write>(
    mut w: W,
    title: &str,
    mesh: &TriMesh,
    scalars: &[(&str, &[f64])],
) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for p in &mesh.vertices {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    let nt = mesh.triangles.len();
    writeln!(w, "POLYGONS {} {}", nt, 4 * nt)?;
    for t in &mesh.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    if !scalars.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
        for (name, values) in scalars {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for x in *values {
                writeln!(w, "{x}")?;
            }
        }
    }
    Ok(())
}

/// Snapshot as VTK with point data `U, V, F, phi`.
pub fn write_snapshot_vtk<W: Write>(w: W, solver: &SfemSolver, snap: &FieldSnapshot) -> io::Result<()> {
    let phi: Vec<f64> = solver
        .mesh
        .params
        .iter()
        .map(|p| chemical_potential(p[0], p[1]))
        .collect();
    write_vtk_polydata(
        w,
        &format!("gray-scott reference t={}", snap.time),
        &solver.mesh,
        &[("U", &snap.u), ("V", &snap.v), ("F", &solver.feed), ("phi", &phi)],
    )
}

/// Snapshot as CSV with columns `u,v,x,y,z,U,V`.
pub fn write_snapshot_csv<W: Write>(mut w: W, mesh: &TriMesh, snap: &FieldSnapshot) -> io::Result<()> {
    writeln!(w, "u,v,x,y,z,U,V")?;
    for i in 0..mesh.n_vertices() {
        let (p, x) = (mesh.params[i], mesh.vertices[i]);
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            p[0], p[1], x[0], x[1], x[2], snap.u[i], snap.v[i]
        )?;
    }
    Ok(())
}
