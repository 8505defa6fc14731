use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrix::LabelMatrix;
use super::synth::LfSpec;
use crate::error::{Error, Result};

/// JSON sidecar written next to a label-matrix CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMatrixMeta {
    pub classes: usize,
    pub m: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lf_specs: Option<Vec<LfSpec>>,
}

/// CSV with header `lf_0,…,lf_{m-1}` and one integer row per sample.
pub fn write_label_csv<W: Write>(l: &LabelMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..l.m()).map(|j| format!("lf_{j}")))?;
    for i in 0..l.n() {
        w.write_record(l.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_label_csv<R: Read>(input: R, classes: usize) -> Result<LabelMatrix> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    for (j, h) in headers.iter().enumerate() {
        if h != format!("lf_{j}") {
            return Err(Error::invalid(format!(
                "unexpected CSV header {h:?} in column {j}"
            )));
        }
    }
    let m = headers.len();
    let mut votes = Vec::new();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != m {
            return Err(Error::invalid(format!(
                "row {n} has {} cells, expected {m}",
                rec.len()
            )));
        }
        for cell in rec.iter() {
            let v: u8 = cell
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("row {n}: bad vote {cell:?}")))?;
            votes.push(v);
        }
        n += 1;
    }
    LabelMatrix::new(n, m, classes, votes)
}

pub fn save_label_matrix(l: &LabelMatrix, specs: Option<&[LfSpec]>, csv_path: &Path) -> Result<()> {
    write_label_csv(l, File::create(csv_path)?)?;
    let meta = LabelMatrixMeta {
        classes: l.classes(),
        m: l.m(),
        n: l.n(),
        lf_specs: specs.map(<[LfSpec]>::to_vec),
    };
    let f = File::create(sidecar_path(csv_path))?;
    serde_json::to_writer_pretty(f, &meta)?;
    Ok(())
}

pub fn load_label_matrix(csv_path: &Path) -> Result<(LabelMatrix, LabelMatrixMeta)> {
    let meta: LabelMatrixMeta = serde_json::from_reader(File::open(sidecar_path(csv_path))?)?;
    let l = read_label_csv(File::open(csv_path)?, meta.classes)?;
    if l.n() != meta.n || l.m() != meta.m {
        return Err(Error::invalid("label CSV does not match its sidecar"));
    }
    Ok((l, meta))
}

/// `votes.csv` → `votes.json`.
pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let l = LabelMatrix::from_rows(&[vec![0, 2, 1], vec![3, 0, 0]], 3).unwrap();
        let mut buf = Vec::new();
        write_label_csv(&l, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "lf_0,lf_1,lf_2\n0,2,1\n3,0,0\n"
        );
        assert_eq!(read_label_csv(buf.as_slice(), 3).unwrap(), l);
    }

    #[test]
    fn bad_header_rejected() {
        let text = "a,b\n1,2\n";
        assert!(read_label_csv(text.as_bytes(), 2).is_err());
    }

    #[test]
    fn file_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("votes.csv");
        let l = LabelMatrix::from_rows(&[vec![1, 0], vec![0, 2]], 2).unwrap();
        save_label_matrix(&l, None, &path).unwrap();
        let (back, meta) = load_label_matrix(&path).unwrap();
        assert_eq!(back, l);
        assert_eq!((meta.n, meta.m, meta.classes), (2, 2, 2));
    }
}
