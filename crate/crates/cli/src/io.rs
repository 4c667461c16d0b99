//! CSV run tables: header `x1,...,xd[,y][,run_id]`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use stochdiag_core::data::ReplicatedDataset;

use crate::error::{io_err, CliError, CliResult};

/// Parsed run table. `outputs` is `None` for a design file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTable {
    pub inputs: DMatrix<f64>,
    pub outputs: Option<Vec<f64>>,
    pub run_ids: Option<Vec<String>>,
}

impl RunTable {
    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn n_runs(&self) -> usize {
        self.inputs.nrows()
    }
}

fn header_layout(path: &Path, header: &csv::StringRecord) -> CliResult<(usize, bool, bool)> {
    let err = |column: usize, message: String| CliError::Csv {
        path: path.to_path_buf(),
        line: 1,
        column,
        message,
    };
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let mut d = 0;
    while d < names.len() && names[d] == format!("x{}", d + 1) {
        d += 1;
    }
    if d == 0 {
        return Err(err(
            1,
            format!(
                "expected column `x1`, found {:?}",
                names.first().unwrap_or(&"")
            ),
        ));
    }
    let mut rest = &names[d..];
    let has_y = rest.first() == Some(&"y");
    if has_y {
        rest = &rest[1..];
    }
    let has_id = rest.first() == Some(&"run_id");
    if has_id {
        rest = &rest[1..];
    }
    if let Some(extra) = rest.first() {
        return Err(err(
            names.len() - rest.len() + 1,
            format!("unexpected column {extra:?}"),
        ));
    }
    Ok((d, has_y, has_id))
}

/// Reads a run table from CSV text. `path` is used in error messages only.
pub fn parse_run_table(text: &str, path: &Path) -> CliResult<RunTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| CliError::Csv {
        path: path.to_path_buf(),
        line: 1,
        column: 0,
        message: e.to_string(),
    })?;
    if header.iter().all(|h| h.is_empty()) {
        return Err(CliError::Csv {
            path: path.to_path_buf(),
            line: 1,
            column: 0,
            message: "file is empty".into(),
        });
    }
    let (d, has_y, has_id) = header_layout(path, header)?;
    let width = d + has_y as usize + has_id as usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ids = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::Csv {
            path: path.to_path_buf(),
            line,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.len() != width {
            return Err(CliError::Csv {
                path: path.to_path_buf(),
                line,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (c, cell) in rec.iter().take(d + has_y as usize).enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| CliError::Csv {
                    path: path.to_path_buf(),
                    line,
                    column: c + 1,
                    message: format!("{cell:?} is not a finite number"),
                })?;
            if c < d {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
        if has_id {
            ids.push(rec[width - 1].to_string());
        }
    }
    if xs.is_empty() {
        return Err(CliError::Csv {
            path: path.to_path_buf(),
            line: 2,
            column: 0,
            message: "no data rows".into(),
        });
    }
    let n = xs.len() / d;
    Ok(RunTable {
        inputs: DMatrix::from_row_slice(n, d, &xs),
        outputs: has_y.then_some(ys),
        run_ids: has_id.then_some(ids),
    })
}

pub fn read_run_table(path: &Path) -> CliResult<RunTable> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_run_table(&text, path)
}

/// Runs table with outputs, pooled into replicates.
pub fn ingest_runs(path: &Path, grouping_tolerance: f64) -> CliResult<ReplicatedDataset> {
    let table = read_run_table(path)?;
    let y = table.outputs.ok_or_else(|| CliError::Csv {
        path: path.to_path_buf(),
        line: 1,
        column: table.inputs.ncols() + 1,
        message: "missing output column `y`".into(),
    })?;
    Ok(ReplicatedDataset::from_runs(
        &table.inputs,
        &y,
        grouping_tolerance,
    )?)
}

fn header(d: usize, with_y: bool) -> String {
    let mut cols: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    if with_y {
        cols.push("y".into());
    }
    cols.join(",")
}

/// Shortest round-trip formatting, so export then ingest is lossless.
pub fn format_runs_csv(inputs: &DMatrix<f64>, outputs: Option<&[f64]>) -> String {
    let mut s = header(inputs.ncols(), outputs.is_some());
    s.push('\n');
    for i in 0..inputs.nrows() {
        let mut row: Vec<String> = inputs.row(i).iter().map(|v| format!("{v}")).collect();
        if let Some(y) = outputs {
            row.push(format!("{}", y[i]));
        }
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

pub fn export_dataset(data: &ReplicatedDataset) -> String {
    let (x, y) = data.to_runs();
    format_runs_csv(&x, Some(&y))
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    std::fs::write(path, contents).map_err(io_err(path))
}
