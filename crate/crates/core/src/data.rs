//! Datasets and CSV ingestion.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// An immutable, non-empty collection of data records indexed `0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    items: Vec<T>,
}

impl<T> Dataset<T> {
    pub fn new(items: Vec<T>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::invalid("a dataset needs at least one datum"));
        }
        Ok(Dataset { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> &T {
        &self.items[i]
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.items.iter()
    }
}

/// Numeric CSV rows, one datum per row.
///
/// A header is assumed when the first cell of the first row does not parse as
/// a number. Every row must have the same number of columns.
pub fn read_numeric_csv<R: Read>(reader: R) -> Result<Dataset<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut width = None;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if line == 0 && record.get(0).is_some_and(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "row {}, column {}: `{cell}` is not a finite number",
                            line + 1,
                            col + 1
                        ))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::invalid(format!(
                    "row {} has {} columns, expected {w}",
                    line + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    Dataset::new(rows)
}

pub fn read_numeric_csv_file(path: &Path) -> Result<Dataset<Vec<f64>>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_numeric_csv(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dataset_rejected() {
        assert!(Dataset::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn header_is_auto_detected() {
        let with = read_numeric_csv("a,b,label\n1,2,0\n3,4,1\n".as_bytes()).unwrap();
        let without = read_numeric_csv("1,2,0\n3,4,1\n".as_bytes()).unwrap();
        assert_eq!(with, without);
        assert_eq!(with.len(), 2);
        assert_eq!(with.get(1), &vec![3.0, 4.0, 1.0]);
    }

    #[test]
    fn ragged_and_non_numeric_rows_rejected() {
        assert!(read_numeric_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(read_numeric_csv("1,2\n3,x\n".as_bytes()).is_err());
        assert!(read_numeric_csv("1,nan\n".as_bytes()).is_err());
        assert!(read_numeric_csv("h1,h2\n".as_bytes()).is_err());
    }
}
