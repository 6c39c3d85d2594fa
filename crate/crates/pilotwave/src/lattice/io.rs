//! Flat-CSV field serialization with a JSON sidecar manifest.
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! write/read cycle reproduces every f64 bit-exactly.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ComplexField, Grid, ScalarField, VectorField};
use crate::error::{Error, Result};

/// Sidecar manifest describing one exported field file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldManifest {
    pub grid: Grid,
    pub field: String,
    /// Snapshot index within a trajectory, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_index: Option<usize>,
}

impl FieldManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn coord_header(grid: &Grid) -> &'static str {
    if grid.ndim() == 2 {
        "x,y"
    } else {
        "x"
    }
}

fn write_rows(
    path: &Path,
    grid: &Grid,
    value_header: &str,
    mut row: impl FnMut(usize) -> String,
) -> Result<()> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "{},{}", coord_header(grid), value_header)?;
    for idx in 0..grid.len() {
        let c = grid.site_coords(idx);
        if grid.ndim() == 2 {
            writeln!(out, "{},{},{}", c[0], c[1], row(idx))?;
        } else {
            writeln!(out, "{},{}", c[0], row(idx))?;
        }
    }
    Ok(())
}

pub fn write_scalar_csv(path: &Path, f: &ScalarField) -> Result<()> {
    write_rows(path, f.grid(), "value", |idx| format!("{}", f.get(idx)))
}

pub fn write_complex_csv(path: &Path, f: &ComplexField) -> Result<()> {
    write_rows(path, f.grid(), "re,im", |idx| {
        let v = f.get(idx);
        format!("{},{}", v.re, v.im)
    })
}

pub fn write_vector_csv(path: &Path, f: &VectorField) -> Result<()> {
    let header = if f.ncomp() == 2 { "vx,vy" } else { "vx" };
    write_rows(path, f.grid(), header, |idx| {
        let v = f.get(idx);
        if f.ncomp() == 2 {
            format!("{},{}", v[0], v[1])
        } else {
            format!("{}", v[0])
        }
    })
}

/// Parse the trailing `n` value columns of each data row.
fn read_value_columns(path: &Path, grid: &Grid, n: usize) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut columns = vec![Vec::with_capacity(grid.len()); n];
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            continue; // header
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < grid.ndim() + n {
            return Err(Error::Io2(format!(
                "{}: malformed row {lineno}",
                path.display()
            )));
        }
        for (slot, field) in columns.iter_mut().zip(&fields[fields.len() - n..]) {
            slot.push(
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Io2(format!("{}: row {lineno}: {e}", path.display())))?,
            );
        }
    }
    if columns[0].len() != grid.len() {
        return Err(Error::Io2(format!(
            "{}: expected {} rows, found {}",
            path.display(),
            grid.len(),
            columns[0].len()
        )));
    }
    Ok(columns)
}

/// Read a scalar field written by [`write_scalar_csv`]; the grid comes from the manifest.
pub fn read_scalar_csv(path: &Path, grid: &Grid) -> Result<ScalarField> {
    let mut columns = read_value_columns(path, grid, 1)?;
    Ok(ScalarField::from_values(grid, columns.pop().unwrap()))
}

/// Read a complex field written by [`write_complex_csv`].
pub fn read_complex_csv(path: &Path, grid: &Grid) -> Result<ComplexField> {
    let columns = read_value_columns(path, grid, 2)?;
    let values = columns[0]
        .iter()
        .zip(&columns[1])
        .map(|(&re, &im)| num_complex::Complex64::new(re, im))
        .collect();
    Ok(ComplexField::from_values(grid, values))
}

/// Read a vector field written by [`write_vector_csv`].
pub fn read_vector_csv(path: &Path, grid: &Grid) -> Result<VectorField> {
    let columns = read_value_columns(path, grid, grid.ndim())?;
    Ok(VectorField::from_components(grid, columns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;

    #[test]
    fn scalar_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::centered_1d(64, 11.0, Boundary::Clamped).unwrap();
        let f = ScalarField::from_fn(&g, |x, _| (x * 1.7).sin() / 3.0 + 1e-17 * x);
        let path = dir.path().join("f.csv");
        write_scalar_csv(&path, &f).unwrap();
        let back = read_scalar_csv(&path, &g).unwrap();
        for idx in 0..g.len() {
            assert_eq!(f.get(idx).to_bits(), back.get(idx).to_bits());
        }
    }

    #[test]
    fn complex_and_vector_round_trips_are_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::centered_2d(12, 3.0, Boundary::Periodic).unwrap();
        let psi = ComplexField::from_fn(&g, |x, y| {
            num_complex::Complex64::new((x * 1.3).sin() / 7.0, (y - x).cos() * 1e-13)
        });
        let pc = dir.path().join("psi.csv");
        write_complex_csv(&pc, &psi).unwrap();
        let back = read_complex_csv(&pc, &g).unwrap();
        for (a, b) in psi.values().iter().zip(back.values()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        let v = crate::lattice::gradient(&psi.re());
        let pv = dir.path().join("v.csv");
        write_vector_csv(&pv, &v).unwrap();
        let back = read_vector_csv(&pv, &g).unwrap();
        for axis in 0..2 {
            for (a, b) in v.component(axis).iter().zip(back.component(axis)) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::centered_2d(16, 2.0, Boundary::Periodic).unwrap();
        let m = FieldManifest {
            grid: g.clone(),
            field: "rho".into(),
            timestamp_index: Some(3),
        };
        let path = dir.path().join("f.json");
        m.write(&path).unwrap();
        let back = FieldManifest::read(&path).unwrap();
        assert_eq!(back.grid, g);
        assert_eq!(back.field, "rho");
        assert_eq!(back.timestamp_index, Some(3));
    }
}
