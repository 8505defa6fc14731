use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffcore::Tensor;
use crate::error::{Error, Result};

/// Feature matrix with ground-truth labels kept for evaluation only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Tensor,
    /// Zero-based classes; never read by training.
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(features: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::invalid("feature rows and label count differ"));
        }
        if labels.iter().any(|&y| y >= classes) {
            return Err(Error::invalid("label outside class range"));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("dataset features".into()));
        }
        Ok(Self {
            features,
            labels,
            classes,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }
}

/// CSV with header `x_0,…,x_{d-1},label`.
pub fn write_dataset_csv<W: Write>(d: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..d.dim()).map(|j| format!("x_{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..d.n() {
        let mut row: Vec<String> = d
            .features
            .row_slice(i)
            .iter()
            .map(|v| v.to_string())
            .collect();
        row.push(d.labels[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads [`write_dataset_csv`] output. With `classes` unset the class
/// count is one more than the largest label.
pub fn read_dataset_csv<R: Read>(input: R, classes: Option<usize>) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let cols = headers.len();
    if cols < 2 || &headers[cols - 1] != "label" {
        return Err(Error::invalid(
            "dataset CSV needs feature columns followed by `label`",
        ));
    }
    let dim = cols - 1;
    let (mut data, mut labels) = (Vec::new(), Vec::new());
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != cols {
            return Err(Error::invalid(format!(
                "row {n} has {} cells, expected {cols}",
                rec.len()
            )));
        }
        for cell in rec.iter().take(dim) {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("row {n}: bad feature {cell:?}")))?;
            data.push(v);
        }
        let y: usize = rec[dim]
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("row {n}: bad label {:?}", &rec[dim])))?;
        labels.push(y);
    }
    let classes = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    let features = Tensor::matrix(labels.len(), dim, data);
    Dataset::new(features, labels, classes)
}

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    write_dataset_csv(d, File::create(path)?)
}

pub fn load_dataset(path: &Path, classes: Option<usize>) -> Result<Dataset> {
    read_dataset_csv(File::open(path)?, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let d = Dataset::new(
            Tensor::matrix(3, 2, vec![0.1, -2.0, 1e-17, 3.5, 0.0, 1.0 / 3.0]),
            vec![2, 0, 1],
            4,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&d, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("x_0,x_1,label\n"));
        assert_eq!(read_dataset_csv(&buf[..], Some(4)).unwrap(), d);
        assert_eq!(read_dataset_csv(&buf[..], None).unwrap().classes, 3);
    }

    #[test]
    fn bad_csv_rejected() {
        assert!(read_dataset_csv("a,b\n1,2\n".as_bytes(), None).is_err());
        assert!(read_dataset_csv("x_0,label\n1,z\n".as_bytes(), None).is_err());
        assert!(read_dataset_csv("x_0,label\n1,3\n".as_bytes(), Some(2)).is_err());
    }
}
