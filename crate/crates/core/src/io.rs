//! File formats: legacy-VTK snapshots, the CSV trace and EOC tables.
//!
//! Snapshot layout (LF line endings, floats with 17 significant digits):
//!
//! ```text
//! # vtk DataFile Version 3.0
//! esfem-ch snapshot step=<n> time=<t>
//! ASCII
//! DATASET UNSTRUCTURED_GRID
//! POINTS <N> double
//! <x> <y> <z>                 (N lines)
//! CELLS <T> <4T>
//! 3 <a> <b> <c>               (T lines)
//! CELL_TYPES <T>
//! 5                           (T lines)
//! POINT_DATA <N>
//! SCALARS u double 1
//! LOOKUP_TABLE default
//! <u_i>                       (N lines)
//! SCALARS w double 1
//! LOOKUP_TABLE default
//! <w_i>                       (N lines)
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::mesh::SurfaceMesh;

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("snap_{step}.vtk"))
}

/// Writes one snapshot with nodal scalars `u` and `w`.
pub fn write_vtk(path: &Path, mesh: &SurfaceMesh, step: usize, u: &[f64], w: &[f64]) -> Result<()> {
    if u.len() != mesh.vertex_count() || w.len() != mesh.vertex_count() {
        return Err(Error::Input("nodal arrays do not match the mesh".into()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "esfem-ch snapshot step={step} time={}", sci(mesh.time()))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.vertex_count())?;
    for p in mesh.vertices() {
        writeln!(out, "{} {} {}", sci(p.x), sci(p.y), sci(p.z))?;
    }
    let t = mesh.triangle_count();
    writeln!(out, "CELLS {t} {}", 4 * t)?;
    for tri in mesh.triangles() {
        writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2])?;
    }
    writeln!(out, "CELL_TYPES {t}")?;
    for _ in 0..t {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", mesh.vertex_count())?;
    for (name, data) in [("u", u), ("w", w)] {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in data {
            writeln!(out, "{}", sci(*v))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Parsed snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkSnapshot {
    pub step: usize,
    pub time: f64,
    pub points: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

/// Reads a snapshot written by [`write_vtk`].
pub fn read_vtk(path: &Path) -> Result<VtkSnapshot> {
    let text = std::fs::read_to_string(path)?;
    let bad = |msg: &str| Error::Input(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    let mut next = || lines.next().ok_or_else(|| bad("unexpected end of file"));
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
    let int = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad integer `{s}`")));
    let expect_prefix = |line: &str, prefix: &str| {
        line.strip_prefix(prefix)
            .map(str::to_string)
            .ok_or_else(|| bad(&format!("expected `{prefix}`, got `{line}`")))
    };

    if next()? != "# vtk DataFile Version 3.0" {
        return Err(bad("not a legacy VTK file"));
    }
    let title = next()?;
    let (mut step, mut time) = (0, 0.0);
    for field in title.split_whitespace() {
        if let Some(v) = field.strip_prefix("step=") {
            step = int(v)?;
        } else if let Some(v) = field.strip_prefix("time=") {
            time = num(v)?;
        }
    }
    if next()? != "ASCII" || next()? != "DATASET UNSTRUCTURED_GRID" {
        return Err(bad("expected an ASCII unstructured grid"));
    }
    let header = expect_prefix(next()?, "POINTS ")?;
    let n = int(header.split_whitespace().next().unwrap_or(""))?;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let c: Vec<f64> = next()?.split_whitespace().map(num).collect::<Result<_>>()?;
        if c.len() != 3 {
            return Err(bad("point needs three coordinates"));
        }
        points.push(Point3::new(c[0], c[1], c[2]));
    }
    let header = expect_prefix(next()?, "CELLS ")?;
    let t = int(header.split_whitespace().next().unwrap_or(""))?;
    let mut triangles = Vec::with_capacity(t);
    for _ in 0..t {
        let c: Vec<usize> = next()?.split_whitespace().map(int).collect::<Result<_>>()?;
        if c.len() != 4 || c[0] != 3 || c[1..].iter().any(|&i| i >= n) {
            return Err(bad("cell is not a valid triangle"));
        }
        triangles.push([c[1], c[2], c[3]]);
    }
    expect_prefix(next()?, "CELL_TYPES ")?;
    for _ in 0..t {
        if next()? != "5" {
            return Err(bad("cell type is not a triangle"));
        }
    }
    expect_prefix(next()?, "POINT_DATA ")?;
    let mut fields = Vec::new();
    for name in ["u", "w"] {
        if next()? != format!("SCALARS {name} double 1") || next()? != "LOOKUP_TABLE default" {
            return Err(bad(&format!("expected scalar field {name}")));
        }
        let values = (0..n).map(|_| num(next()?)).collect::<Result<Vec<_>>>()?;
        fields.push(values);
    }
    let w = fields.pop().unwrap_or_default();
    let u = fields.pop().unwrap_or_default();
    Ok(VtkSnapshot { step, time, points, triangles, u, w })
}

/// Streams diagnostics rows to `trace.csv`, flushing after each row so a
/// failed run keeps everything accepted so far.
pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", DiagnosticsRecord::CSV_HEADER)?;
        Ok(TraceWriter { out })
    }

    pub fn push(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.out, "{}", record.csv_row())?;
        self.out.flush()?;
        Ok(())
    }
}

/// Reads a trace back into records.
pub fn read_trace(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let text = std::fs::read_to_string(path)?;
    let bad = |msg: String| Error::Input(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    if lines.next() != Some(DiagnosticsRecord::CSV_HEADER) {
        return Err(bad("missing trace header".into()));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(bad(format!("expected 9 fields in `{line}`")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad integer `{s}`")));
            Ok(DiagnosticsRecord {
                step: int(f[0])?,
                time: num(f[1])?,
                mass: num(f[2])?,
                energy: num(f[3])?,
                max_abs_u: num(f[4])?,
                min_gap: num(f[5])?,
                newton_iters: int(f[6])?,
                mesh_is_acute: f[7].parse().map_err(|_| bad(format!("bad flag `{}`", f[7])))?,
                min_div_v: num(f[8])?,
            })
        })
        .collect()
}

/// One level of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct EocRow {
    pub label: String,
    pub h: f64,
    pub tau: f64,
    pub error: f64,
    /// Order against the next finer row; absent for the last row or when undefined.
    pub eoc: Option<f64>,
}

pub const EOC_HEADER: &str = "level,h,tau,error,eoc";

pub fn format_eoc_table(rows: &[EocRow]) -> String {
    let mut s = format!("{EOC_HEADER}\n");
    for r in rows {
        let eoc = r.eoc.map(|v| format!("{v:?}")).unwrap_or_default();
        s += &format!("{},{:?},{:?},{:?},{}\n", r.label, r.h, r.tau, r.error, eoc);
    }
    s
}

pub fn write_eoc_table(path: &Path, rows: &[EocRow]) -> Result<()> {
    std::fs::write(path, format_eoc_table(rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceFamily;
    use crate::mesh::make_torus_mesh;

    #[test]
    fn vtk_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = make_torus_mesh(12, 8, SurfaceFamily::ExpandingTorus).unwrap();
        let mesh = crate::mesh::advect_mesh(&mesh, SurfaceFamily::ExpandingTorus, 0.1 + 1e-17).unwrap();
        let u: Vec<f64> = mesh.vertices().iter().map(|p| (p.x * 7.3).sin() / 3.0).collect();
        let w: Vec<f64> = u.iter().map(|v| v * 1e-300 + std::f64::consts::PI).collect();
        let path = snapshot_path(dir.path(), 7);
        write_vtk(&path, &mesh, 7, &u, &w).unwrap();
        let snap = read_vtk(&path).unwrap();
        assert_eq!(snap.step, 7);
        assert_eq!(snap.time, mesh.time());
        assert_eq!(snap.points, mesh.vertices());
        assert_eq!(snap.triangles, mesh.triangles());
        assert_eq!(snap.u, u);
        assert_eq!(snap.w, w);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.contains("CELL_TYPES 192\n5\n"));
    }

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let rec = DiagnosticsRecord {
            step: 0,
            time: 0.0,
            mass: 1.0 / 3.0,
            energy: 2.5,
            max_abs_u: 0.9,
            min_gap: 0.1,
            newton_iters: 0,
            mesh_is_acute: false,
            min_div_v: -0.25,
        };
        let mut w = TraceWriter::create(&path).unwrap();
        w.push(&rec).unwrap();
        w.push(&DiagnosticsRecord { step: 1, ..rec.clone() }).unwrap();
        drop(w);
        let back = read_trace(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], rec);
    }

    #[test]
    fn eoc_table_marks_missing_values() {
        let rows = vec![
            EocRow { label: "2".into(), h: 0.2, tau: 0.01, error: 1.0, eoc: Some(1.0) },
            EocRow { label: "3".into(), h: 0.1, tau: 0.0025, error: 0.5, eoc: None },
        ];
        assert_eq!(format_eoc_table(&rows), "level,h,tau,error,eoc\n2,0.2,0.01,1.0,1.0\n3,0.1,0.0025,0.5,\n");
    }
}
