//! Legacy VTK output.
//!
//! Layout: `UNSTRUCTURED_GRID` of `VOXEL` cells (type 11) in `BINARY` mode,
//! i.e. big-endian `double` / `int`. Points are the distinct cell corners,
//! numbered in order of first use while walking cells in mesh order; every
//! binary block is followed by one newline. Cell data, in order: `pressure`
//! (double), `velocity` (double vectors), `kind` (int: 0 fluid, 1 solid,
//! 2 disk). The output depends only on the mesh and field, so re-emitting a
//! field gives identical bytes.

use std::collections::HashMap;
use std::io::Write;

use crate::mesh::Mesh;
use crate::solver::FlowField;

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_be_bytes());
}

fn put_i32(buf: &mut Vec<u8>, v: i32) {
    buf.extend_from_slice(&v.to_be_bytes());
}

/// Serializes the field into a byte buffer.
pub fn field_vtk_bytes(mesh: &Mesh, field: &FlowField) -> Vec<u8> {
    let max_level = mesh.max_level as u32;
    let unit = mesh.edge / ((mesh.base_cells as f64) * f64::from(1u32 << max_level));
    let mut ids: HashMap<[u32; 3], u32> = HashMap::new();
    let mut points: Vec<[u32; 3]> = Vec::new();
    let mut conn: Vec<[u32; 8]> = Vec::with_capacity(mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let shift = max_level - mesh.levels[c] as u32;
        let lo = mesh.coords[c].map(|v| v << shift);
        let s = 1u32 << shift;
        let mut cell = [0u32; 8];
        for (k, slot) in cell.iter_mut().enumerate() {
            let p = [
                lo[0] + s * (k as u32 & 1),
                lo[1] + s * ((k as u32 >> 1) & 1),
                lo[2] + s * ((k as u32 >> 2) & 1),
            ];
            *slot = *ids.entry(p).or_insert_with(|| {
                points.push(p);
                points.len() as u32 - 1
            });
        }
        conn.push(cell);
    }

    let n = mesh.n_cells();
    let mut out = Vec::with_capacity(points.len() * 24 + n * 80);
    out.extend_from_slice(b"# vtk DataFile Version 3.0\nwakevec field\nBINARY\nDATASET UNSTRUCTURED_GRID\n");
    out.extend_from_slice(format!("POINTS {} double\n", points.len()).as_bytes());
    for p in &points {
        for v in p {
            put_f64(&mut out, f64::from(*v) * unit);
        }
    }
    out.extend_from_slice(format!("\nCELLS {} {}\n", n, n * 9).as_bytes());
    for cell in &conn {
        put_i32(&mut out, 8);
        for &id in cell {
            put_i32(&mut out, id as i32);
        }
    }
    out.extend_from_slice(format!("\nCELL_TYPES {n}\n").as_bytes());
    for _ in 0..n {
        put_i32(&mut out, 11);
    }
    out.extend_from_slice(format!("\nCELL_DATA {n}\nSCALARS pressure double 1\nLOOKUP_TABLE default\n").as_bytes());
    for &p in &field.pressure {
        put_f64(&mut out, p);
    }
    out.extend_from_slice(b"\nVECTORS velocity double\n");
    for u in &field.velocity {
        put_f64(&mut out, u.x);
        put_f64(&mut out, u.y);
        put_f64(&mut out, u.z);
    }
    out.extend_from_slice(b"\nSCALARS kind int 1\nLOOKUP_TABLE default\n");
    for k in &mesh.kinds {
        put_i32(&mut out, i32::from(k.code()));
    }
    out.push(b'\n');
    out
}

pub fn write_field_vtk<W: Write>(mesh: &Mesh, field: &FlowField, mut out: W) -> std::io::Result<()> {
    out.write_all(&field_vtk_bytes(mesh, field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::mesh::build_mesh_with_boxes;

    #[test]
    fn uniform_grid_layout() {
        let mesh = build_mesh_with_boxes(1.0, 2, &[]).unwrap();
        let field = FlowField {
            velocity: vec![Vec3::ZERO; 8],
            pressure: vec![0.0; 8],
            flux: vec![0.0; mesh.faces.len()],
            nu_eff: vec![1.0; 8],
            density: 1.0,
        };
        let bytes = field_vtk_bytes(&mesh, &field);
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("POINTS 27 double\n"));
        assert!(text.contains("CELLS 8 72\n"));
        assert!(text.contains("CELL_DATA 8\n"));
        assert_eq!(bytes, field_vtk_bytes(&mesh, &field));
    }
}
