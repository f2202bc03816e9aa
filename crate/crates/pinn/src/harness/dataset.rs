//! Dataset CSV formats: `t,x,u` triples for space-time data and `x,u` pairs
//! for snapshots. Import validates the header, column count and finiteness.

use std::path::Path;

use crate::error::{Error, Result};
use crate::oracle::GridSolution;
use crate::pde::LabeledPoint;

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    /// `(t, x, u)` rows.
    SpaceTime(Vec<LabeledPoint>),
    /// `(x, u)` rows.
    Snapshot(Vec<(f64, f64)>),
}

pub fn export_points(points: &[LabeledPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["t", "x", "u"]).map_err(csv_err)?;
    for p in points {
        w.write_record([fmt(p.t), fmt(p.x), fmt(p.u)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Flattened grid export, row-major in time.
pub fn export_grid(grid: &GridSolution, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["t", "x", "u"]).map_err(csv_err)?;
    for (i, &t) in grid.t_values.iter().enumerate() {
        for (j, &x) in grid.x_values.iter().enumerate() {
            w.write_record([fmt(t), fmt(x), fmt(grid.value(i, j))])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn export_snapshot(points: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["x", "u"]).map_err(csv_err)?;
    for &(x, u) in points {
        w.write_record([fmt(x), fmt(u)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn import_dataset(path: &Path) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    let kind = match cols.as_slice() {
        ["t", "x", "u"] => 3usize,
        ["x", "u"] => 2usize,
        other => {
            return Err(Error::structural(format!(
                "unrecognized dataset header {other:?}"
            )))
        }
    };
    let mut triples = Vec::new();
    let mut pairs = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != kind {
            return Err(Error::structural(format!(
                "row {} has {} columns, expected {kind}",
                line + 2,
                rec.len()
            )));
        }
        let vals: Vec<f64> = rec
            .iter()
            .map(|v| {
                let x: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::structural(format!("bad value {v:?} on row {}", line + 2)))?;
                if !x.is_finite() {
                    return Err(Error::structural(format!(
                        "non-finite value on row {}",
                        line + 2
                    )));
                }
                Ok(x)
            })
            .collect::<Result<_>>()?;
        if kind == 3 {
            triples.push(LabeledPoint { t: vals[0], x: vals[1], u: vals[2] });
        } else {
            pairs.push((vals[0], vals[1]));
        }
    }
    Ok(if kind == 3 {
        Dataset::SpaceTime(triples)
    } else {
        Dataset::Snapshot(pairs)
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::structural(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("pinn-dataset-test");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn points_round_trip() {
        let path = tmp("pts.csv");
        let pts = vec![
            LabeledPoint { t: 0.0, x: 0.125, u: -0.3826834323650898 },
            LabeledPoint { t: 0.5, x: -1.0, u: 0.0 },
        ];
        export_points(&pts, &path).unwrap();
        match import_dataset(&path).unwrap() {
            Dataset::SpaceTime(got) => assert_eq!(got, pts),
            _ => panic!("wrong dataset kind"),
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let path = tmp("snap.csv");
        let pts = vec![(0.1, 0.99), (-0.25, 1.0 / 3.0)];
        export_snapshot(&pts, &path).unwrap();
        match import_dataset(&path).unwrap() {
            Dataset::Snapshot(got) => assert_eq!(got, pts),
            _ => panic!("wrong dataset kind"),
        }
    }

    #[test]
    fn exported_grid_starts_with_the_initial_condition() {
        let path = tmp("grid.csv");
        let grid = crate::oracle::burgers_grid(3, 5, crate::pde::BURGERS_NU).unwrap();
        export_grid(&grid, &path).unwrap();
        match import_dataset(&path).unwrap() {
            Dataset::SpaceTime(rows) => {
                assert_eq!(rows.len(), 15);
                let first = rows[1]; // second column of the t=0 row
                assert_eq!(first.t, 0.0);
                assert_eq!(first.u, -(std::f64::consts::PI * first.x).sin());
            }
            _ => panic!("wrong dataset kind"),
        }
    }

    #[test]
    fn bad_headers_and_values_are_rejected() {
        let path = tmp("bad.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        assert!(import_dataset(&path).is_err());
        std::fs::write(&path, "x,u\n1.0\n").unwrap();
        assert!(import_dataset(&path).is_err());
        std::fs::write(&path, "x,u\n1.0,nan\n").unwrap();
        assert!(import_dataset(&path).is_err());
        std::fs::write(&path, "x,u\n1.0,zebra\n").unwrap();
        assert!(import_dataset(&path).is_err());
    }
}
