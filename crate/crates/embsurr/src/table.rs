//! CSV embeddings with header `y,split,x0,...,x{d-1}`.
//!
//! Split cells may be `train`/`val`/`test` or the EMBD codes 0/1/2. The
//! class count is one more than the largest label. CSV carries no tower
//! boundary.

use std::path::Path;

use embsurr_core::data::{EmbeddingDataset, Split};
use embsurr_core::Matrix;

use crate::embd::dataset_name;
use crate::{Error, Result};

fn parse_split(cell: &str) -> Option<Split> {
    Split::from_name(cell).or_else(|| cell.parse::<u8>().ok().and_then(Split::from_code))
}

pub fn load(path: &Path) -> Result<EmbeddingDataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let d = header.len().saturating_sub(2);
    let expected: Vec<String> = ["y".to_string(), "split".to_string()].into_iter().chain((0..d).map(|j| format!("x{j}"))).collect();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::format(path, format!("header must be y,split,x0..x{{d-1}}, found {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let (mut x, mut y, mut split) = (Vec::new(), Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        let label: usize = record[0].parse().map_err(|_| Error::format(path, format!("line {line}: label {:?} is not a class index", &record[0])))?;
        let tag = parse_split(&record[1]).ok_or_else(|| Error::format(path, format!("line {line}: unknown split {:?}", &record[1])))?;
        for cell in record.iter().skip(2) {
            x.push(cell.parse::<f64>().map_err(|_| Error::format(path, format!("line {line}: {cell:?} is not a number")))?);
        }
        y.push(label);
        split.push(tag);
    }
    let classes = y.iter().max().map_or(0, |m| m + 1);
    let x = Matrix::from_vec(y.len(), d, x)?;
    Ok(EmbeddingDataset::new(dataset_name(path), x, y, split, classes, None)?)
}

pub fn save(ds: &EmbeddingDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = ["y".to_string(), "split".to_string()].into_iter().chain((0..ds.d()).map(|j| format!("x{j}")));
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for i in 0..ds.n() {
        let row = [ds.y[i].to_string(), ds.split[i].name().to_string()].into_iter().chain(ds.x.row(i).iter().map(|v| v.to_string()));
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        Error::format(path, e.to_string())
    }
}

/// Load by extension: `.csv` as CSV, anything else as EMBD.
pub fn load_any(path: &Path) -> Result<EmbeddingDataset> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        load(path)
    } else {
        crate::embd::load(path)
    }
}
