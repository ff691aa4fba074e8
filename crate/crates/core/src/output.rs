//! CSV and JSON writers. Floats are written in shortest round-trip form so
//! that re-reading a file reproduces every value bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value as Json;

use crate::error::{Error, Result};
use crate::measures::SweepTable;
use crate::oracle::OracleReport;
use crate::stability::DispersionResult;
use crate::stepper::{Attractor, Trajectory};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: one row per snapshot and cell, one column per field.
pub fn write_fields_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut header = vec!["t".to_string(), "x".to_string()];
    header.extend(traj.field_names.iter().cloned());
    let centers = traj.grid.centers();
    let rows = traj.snapshots.iter().flat_map(|s| {
        centers.iter().enumerate().map(move |(i, x)| {
            let mut row = vec![fmt_f64(s.t), fmt_f64(*x)];
            row.extend(s.fields.iter().map(|f| fmt_f64(f.values()[i])));
            row
        })
    });
    write_csv(path, &header, rows)
}

/// Per-step diagnostics: mass, minimum, reaction and outflow per field.
pub fn write_steps_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut header = vec!["t".to_string(), "dt".to_string()];
    for what in ["mass", "min", "reaction", "outflow"] {
        header.extend(traj.field_names.iter().map(|n| format!("{what}_{n}")));
    }
    let rows = traj.steps.iter().map(|s| {
        let mut row = vec![fmt_f64(s.t), fmt_f64(s.dt)];
        for col in [&s.mass, &s.min, &s.reaction, &s.outflow] {
            row.extend(col.iter().map(|v| fmt_f64(*v)));
        }
        row
    });
    write_csv(path, &header, rows)
}

/// Leading growth rate per mode.
pub fn write_dispersion_csv(path: &Path, d: &DispersionResult) -> Result<()> {
    let header = ["j", "k", "re", "im"].map(String::from);
    let rows = d
        .wavenumbers
        .iter()
        .zip(&d.growth)
        .enumerate()
        .map(|(j, (k, g))| vec![j.to_string(), fmt_f64(*k), fmt_f64(g.re), fmt_f64(g.im)]);
    write_csv(path, &header, rows)
}

fn attractor_cells(a: &Attractor) -> [String; 2] {
    match a {
        Attractor::Steady => ["steady".into(), String::new()],
        Attractor::Periodic { period } => ["periodic".into(), fmt_f64(*period)],
        Attractor::Undetermined => ["undetermined".into(), String::new()],
    }
}

/// One row per plan cell, in plan order.
pub fn write_sweep_csv(path: &Path, table: &SweepTable, measure: &str) -> Result<()> {
    let mut header = vec!["index".to_string()];
    header.extend(table.keys.iter().cloned());
    header.extend([measure, "attractor", "period", "interior_max", "error"].map(String::from));
    let rows = table.rows.iter().map(|r| {
        let mut row = vec![r.index.to_string()];
        row.extend(r.params.iter().map(|(_, v)| v.to_string()));
        match &r.outcome {
            Ok(o) => {
                row.push(fmt_f64(o.value));
                row.extend(attractor_cells(&o.attractor));
                row.push(r.interior_max.join(";"));
                row.push(String::new());
            }
            Err(e) => {
                row.extend([
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.clone(),
                ]);
            }
        }
        row
    });
    write_csv(path, &header, rows)
}

pub fn write_oracle_csv(path: &Path, report: &OracleReport) -> Result<()> {
    let header = ["x", "c_hat", "d_hat", "predicted", "rel_dev"].map(String::from);
    let rows = report.rows.iter().map(|r| {
        vec![
            fmt_f64(r.x),
            fmt_f64(r.c_hat),
            fmt_f64(r.d_hat),
            fmt_f64(r.predicted),
            fmt_f64(r.rel_dev),
        ]
    });
    write_csv(path, &header, rows)
}

pub fn write_json(path: &Path, value: &Json) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
