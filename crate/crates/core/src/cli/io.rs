//! CSV ingestion and output.
//!
//! Dialect: comma separated, mandatory header, `.` decimal point, LF or CRLF
//! line endings on input, LF on output.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{FeatureMatrix, Matrix};
use crate::tuples::{ChunkletAssignment, LabeledDataset, Targets, TupleSet};

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::Format(format!("{}: missing header row", path.display())));
    }
    if header.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(Error::Format(format!(
            "{}: missing header row (first line is numeric)",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: row {}: {e}", path.display(), r + 1)))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { header, rows })
}

fn column_index(table: &Table, name: &str, path: &Path) -> Result<usize> {
    table.header.iter().position(|h| h == name).ok_or_else(|| {
        Error::Validation(format!(
            "{}: no column {name:?}; available columns: {}",
            path.display(),
            table.header.join(", ")
        ))
    })
}

fn parse_cell(table: &Table, row: usize, col: usize, path: &Path) -> Result<f64> {
    let cell = &table.rows[row][col];
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Format(format!(
            "{}: cannot parse {cell:?} at row {}, column {}",
            path.display(),
            row + 1,
            table.header[col]
        ))),
    }
}

/// Columns of a feature file, split into features and named extra columns.
pub struct FeatureFile {
    pub x: FeatureMatrix,
    pub columns: Vec<String>,
    pub targets: Option<Targets>,
    pub chunks: Option<ChunkletAssignment>,
}

/// Reads features (every column except `label_col` and `chunk_col`).
pub fn read_feature_file(path: &Path, label_col: Option<&str>, chunk_col: Option<&str>) -> Result<FeatureFile> {
    let table = read_table(path)?;
    let label = label_col.map(|c| column_index(&table, c, path)).transpose()?;
    let chunk = chunk_col.map(|c| column_index(&table, c, path)).transpose()?;
    let feature_cols: Vec<usize> = (0..table.header.len())
        .filter(|&c| Some(c) != label && Some(c) != chunk)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::Validation(format!("{}: no feature columns", path.display())));
    }
    let mut data = Vec::with_capacity(table.rows.len() * feature_cols.len());
    for r in 0..table.rows.len() {
        if table.rows[r].len() != table.header.len() {
            return Err(Error::Format(format!(
                "{}: row {} has {} cells, header has {}",
                path.display(),
                r + 1,
                table.rows[r].len(),
                table.header.len()
            )));
        }
        for &c in &feature_cols {
            data.push(parse_cell(&table, r, c, path)?);
        }
    }
    let x = Matrix::new(table.rows.len(), feature_cols.len(), data)?;

    let targets = match label {
        None => None,
        Some(c) => {
            let vals = (0..table.rows.len())
                .map(|r| parse_cell(&table, r, c, path))
                .collect::<Result<Vec<f64>>>()?;
            let integral = vals.iter().all(|v| v.fract() == 0.0 && v.abs() < 9.0e15);
            Some(if integral {
                Targets::Classes(vals.iter().map(|&v| v as i64).collect())
            } else {
                Targets::Continuous(vals)
            })
        }
    };
    let chunks = match chunk {
        None => None,
        Some(c) => {
            let vals = (0..table.rows.len())
                .map(|r| {
                    table.rows[r][c].parse::<i64>().map_err(|_| {
                        Error::Format(format!(
                            "{}: chunk id {:?} at row {} is not an integer",
                            path.display(),
                            table.rows[r][c],
                            r + 1
                        ))
                    })
                })
                .collect::<Result<Vec<i64>>>()?;
            Some(ChunkletAssignment::new(vals)?)
        }
    };
    Ok(FeatureFile {
        x,
        columns: feature_cols.iter().map(|&c| table.header[c].clone()).collect(),
        targets,
        chunks,
    })
}

pub enum Features {
    Plain(FeatureMatrix),
    Labeled(LabeledDataset),
}

/// Features, plus labels when `label_col` is given.
pub fn load_features(path: &Path, label_col: Option<&str>) -> Result<Features> {
    let file = read_feature_file(path, label_col, None)?;
    Ok(match file.targets {
        Some(y) => Features::Labeled(LabeledDataset::new(file.x, y)?),
        None => Features::Plain(file.x),
    })
}

/// Index tuples over `base` (columns `i,j[,k,l]`, optional `label` for pairs).
pub fn load_tuples(path: &Path, base: &FeatureMatrix, arity: usize) -> Result<TupleSet> {
    let names = ["i", "j", "k", "l"];
    if !(2..=4).contains(&arity) {
        return Err(Error::Validation(format!("tuple arity must be 2, 3 or 4, got {arity}")));
    }
    let table = read_table(path)?;
    let cols = names[..arity]
        .iter()
        .map(|n| column_index(&table, n, path))
        .collect::<Result<Vec<_>>>()?;
    let label_col = if arity == 2 {
        table.header.iter().position(|h| h == "label")
    } else {
        None
    };
    let mut idx = Vec::with_capacity(table.rows.len() * arity);
    let mut labels = Vec::new();
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != table.header.len() {
            return Err(Error::Format(format!(
                "{}: tuple row {} has {} cells, header has {}",
                path.display(),
                r + 1,
                row.len(),
                table.header.len()
            )));
        }
        for &c in &cols {
            let v: usize = row[c].parse().map_err(|_| {
                Error::Format(format!(
                    "{}: tuple row {}: {:?} is not a row index",
                    path.display(),
                    r + 1,
                    row[c]
                ))
            })?;
            if v >= base.rows() {
                return Err(Error::Validation(format!(
                    "{}: tuple row {}: index {v} out of range for {} data rows",
                    path.display(),
                    r + 1,
                    base.rows()
                )));
            }
            idx.push(v);
        }
        if let Some(c) = label_col {
            match row[c].as_str() {
                "1" | "+1" => labels.push(1),
                "-1" => labels.push(-1),
                other => {
                    return Err(Error::BadLabel(format!(
                        "{}: tuple row {}: pair label must be 1 or -1, got {other:?}",
                        path.display(),
                        r + 1
                    )))
                }
            }
        }
    }
    TupleSet::from_indices(base, arity, &idx, label_col.map(|_| labels))
}

/// Writes `x` as CSV with header `c0..c{m-1}`; numbers round-trip exactly.
pub fn write_matrix(out: &mut dyn Write, x: &Matrix) -> Result<()> {
    let header: Vec<String> = (0..x.cols()).map(|c| format!("c{c}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for row in x.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}
