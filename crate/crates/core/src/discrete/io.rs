use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::real::Real;

/// Renders a field as CSV with header `x,y,value`, row-major, 17 significant digits.
pub fn field_csv<T: Real>(mesh: &Mesh<T>, values: &[T]) -> String {
    let mut out = String::with_capacity(mesh.len() * 72 + 16);
    out.push_str("x,y,value\n");
    for (p, v) in values.iter().enumerate().take(mesh.len()) {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e}",
            mesh.x(p).to_f64_lossy(),
            mesh.y(p).to_f64_lossy(),
            v.to_f64_lossy()
        );
    }
    out
}

pub fn write_field_csv<T: Real>(path: &Path, mesh: &Mesh<T>, values: &[T]) -> Result<()> {
    fs::write(path, field_csv(mesh, values)).map_err(|source| Error::Io { path: path.display().to_string(), source })
}
