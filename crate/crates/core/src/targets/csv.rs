use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Feature matrix with optional integer labels as read from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub features: Tensor,
    pub labels: Option<Vec<i64>>,
}

/// Read a headered numeric CSV. With `label_column`, that column (by header
/// name) is split off as integer labels and every other column is a feature.
pub fn read_table(path: &Path, label_column: Option<&str>) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(File::open(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?);
    let headers = rdr.headers()?.clone();
    let label_idx = match label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::invalid(format!("{}: no column named `{name}`", path.display())))?,
        ),
        None => None,
    };
    let width = headers.len() - usize::from(label_idx.is_some());
    if width == 0 {
        return Err(Error::EmptyInput("csv feature columns"));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (j, field) in rec.iter().enumerate() {
            let bad = || Error::invalid(format!("{}: row {}: cannot parse `{field}`", path.display(), line + 2));
            if Some(j) == label_idx {
                let v: f64 = field.parse().map_err(|_| bad())?;
                if v.fract() != 0.0 {
                    return Err(bad());
                }
                labels.push(v as i64);
            } else {
                let v: f64 = field.parse().map_err(|_| bad())?;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("{}: row {}", path.display(), line + 2)));
                }
                data.push(v);
            }
        }
    }
    let rows = data.len() / width;
    if rows == 0 {
        return Err(Error::EmptyInput("csv rows"));
    }
    Ok(Table { features: Tensor::matrix(rows, width, data), labels: label_idx.map(|_| labels) })
}

/// Write points as `x1,…,xd[,class]`; classes are written 1-based.
pub fn write_points(path: &Path, points: &Tensor, classes: Option<&[usize]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = points.cols();
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    if classes.is_some() {
        header.push("class".into());
    }
    w.write_record(&header)?;
    for (i, row) in points.row_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(c) = classes {
            rec.push((c[i] + 1).to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read points written by [`write_points`]; classes come back 0-based.
pub fn read_points(path: &Path) -> Result<(Tensor, Option<Vec<usize>>)> {
    let has_class = csv::Reader::from_path(path)?.headers()?.iter().any(|h| h.trim() == "class");
    let t = read_table(path, has_class.then_some("class"))?;
    let classes = match t.labels {
        Some(l) => Some(
            l.into_iter()
                .map(|c| usize::try_from(c - 1).map_err(|_| Error::invalid(format!("class labels start at 1, got {c}"))))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok((t.features, classes))
}
