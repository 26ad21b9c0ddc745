//! File formats: instances and Gram matrices as JSON, matrices as headerless
//! CSV.
//!
//! Gram rows are hex strings of `ceil(m/4)` nibbles read as one big-endian
//! number whose bit `j` is entry `(a, j)`, so column 0 is the lowest bit of
//! the last character.

use std::fmt::Display;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::bits::BitMatrix;
use crate::error::{Error, Result};
use crate::instance::{GramMatrix, SelectionMatrix};
use crate::seed::Seed;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub m: usize,
    pub r: usize,
    pub k: usize,
    pub rows: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<Seed>,
}

impl InstanceFile {
    pub fn new(w: &SelectionMatrix, seed: Option<Seed>) -> Self {
        InstanceFile {
            m: w.m(),
            r: w.r(),
            k: w.k(),
            rows: w.supports().to_vec(),
            seed,
        }
    }

    pub fn to_selection(&self) -> Result<SelectionMatrix> {
        if self.rows.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: self.rows.len(),
            });
        }
        SelectionMatrix::from_supports(self.r, self.k, self.rows.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GramFile {
    pub m: usize,
    pub hex_rows: Vec<String>,
    /// Intersection sizes, when known.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counts: Option<Vec<Vec<u8>>>,
}

pub fn row_to_hex(row: &[u64], m: usize) -> String {
    let nibbles = m.div_ceil(4);
    (0..nibbles)
        .rev()
        .map(|i| {
            let v = (row[i / 16] >> (4 * (i % 16))) & 0xF;
            char::from_digit(v as u32, 16).expect("nibble")
        })
        .collect()
}

pub fn row_from_hex(hex: &str, m: usize) -> Result<Vec<bool>> {
    let nibbles = m.div_ceil(4);
    if hex.len() != nibbles {
        return Err(Error::Format(format!(
            "hex row has {} digits, expected {nibbles}",
            hex.len()
        )));
    }
    let mut out = vec![false; m];
    for (pos, ch) in hex.chars().enumerate() {
        let v = ch
            .to_digit(16)
            .ok_or_else(|| Error::Format(format!("invalid hex digit {ch:?}")))?;
        let i = nibbles - 1 - pos;
        for b in 0..4 {
            let j = 4 * i + b;
            let set = v >> b & 1 == 1;
            if j < m {
                out[j] = set;
            } else if set {
                return Err(Error::Format(format!("bit {j} set beyond m = {m}")));
            }
        }
    }
    Ok(out)
}

impl GramFile {
    pub fn new(g: &GramMatrix) -> Self {
        let m = g.m();
        GramFile {
            m,
            hex_rows: (0..m).map(|a| row_to_hex(g.row(a), m)).collect(),
            counts: g
                .has_counts()
                .then(|| (0..m).map(|a| (0..m).map(|b| g.count(a, b).unwrap_or(0)).collect()).collect()),
        }
    }

    pub fn to_gram(&self) -> Result<GramMatrix> {
        if let Some(counts) = &self.counts {
            if counts.len() != self.m {
                return Err(Error::DimensionMismatch {
                    expected: self.m,
                    found: counts.len(),
                });
            }
            let g = GramMatrix::from_counts(counts)?;
            if GramFile::new(&g).hex_rows != self.hex_rows {
                return Err(Error::Format("hex rows disagree with counts".into()));
            }
            return Ok(g);
        }
        if self.hex_rows.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: self.hex_rows.len(),
            });
        }
        let rows = self
            .hex_rows
            .iter()
            .map(|h| row_from_hex(h, self.m))
            .collect::<Result<Vec<_>>>()?;
        GramMatrix::from_bits(BitMatrix::from_fn(self.m, self.m, |a, b| rows[a][b]))
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json(&std::fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    Ok(std::fs::write(path, to_json(value)?)?)
}

pub fn read_instance(path: &Path) -> Result<(SelectionMatrix, Option<Seed>)> {
    let file: InstanceFile = read_json(path)?;
    Ok((file.to_selection()?, file.seed))
}

pub fn read_gram(path: &Path) -> Result<GramMatrix> {
    read_json::<GramFile>(path)?.to_gram()
}

/// Headerless CSV, one record per row.
pub fn write_csv<W: Write, T: Display>(out: W, rows: impl IntoIterator<Item = Vec<T>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string<T: Display>(rows: impl IntoIterator<Item = Vec<T>>) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

/// Rectangular headerless CSV of numbers.
pub fn read_csv_matrix<R: Read>(input: R) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad number {cell:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch {
            expected: cols,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn matrix_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}

pub fn write_csv_matrix(path: &Path, x: &DMatrix<f64>) -> Result<()> {
    Ok(std::fs::write(path, csv_string(matrix_rows(x))?)?)
}

pub fn read_csv_matrix_file(path: &Path) -> Result<DMatrix<f64>> {
    read_csv_matrix(std::fs::File::open(path)?)
}

/// 0/1 rows of a selection matrix.
pub fn selection_csv(w: &SelectionMatrix) -> Result<String> {
    csv_string((0..w.m()).map(|i| (0..w.r()).map(|j| u8::from(w.get(i, j))).collect::<Vec<_>>()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gen_selection_matrix, gram, Arithmetic};

    #[test]
    fn hex_layout() {
        // m = 6: two nibbles, column 0 is the lowest bit of the last digit.
        let mut row = vec![0u64];
        row[0] |= 1 << 0;
        row[0] |= 1 << 5;
        assert_eq!(row_to_hex(&row, 6), "21");
        assert_eq!(row_from_hex("21", 6).unwrap(), vec![true, false, false, false, false, true]);
        assert!(row_from_hex("41", 6).is_err());
        assert!(row_from_hex("1", 6).is_err());
        assert!(row_from_hex("g1", 6).is_err());
    }

    #[test]
    fn gram_round_trip() {
        let w = gen_selection_matrix(70, 9, 2, Seed(4)).unwrap();
        for arithmetic in [Arithmetic::Boolean, Arithmetic::Integer] {
            let g = gram(&w, arithmetic);
            let text = to_json(&GramFile::new(&g)).unwrap();
            let back = from_json::<GramFile>(&text).unwrap().to_gram().unwrap();
            assert_eq!(back, g);
        }
    }

    #[test]
    fn instance_round_trip() {
        let w = gen_selection_matrix(12, 6, 3, Seed(8)).unwrap();
        let text = to_json(&InstanceFile::new(&w, Some(Seed(8)))).unwrap();
        assert!(text.contains("\"seed\": 8"));
        let back: InstanceFile = from_json(&text).unwrap();
        assert_eq!(back.to_selection().unwrap(), w);
        let mut bad = back.clone();
        bad.rows[0] = vec![0];
        assert!(bad.to_selection().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let x = DMatrix::from_row_slice(2, 3, &[1.5, -2.0, 0.0, 1e-9, 3.25, 7.0]);
        let text = csv_string(matrix_rows(&x)).unwrap();
        assert_eq!(text, "1.5,-2,0\n0.000000001,3.25,7\n");
        assert_eq!(read_csv_matrix(text.as_bytes()).unwrap(), x);
        assert!(read_csv_matrix("1,2\n3\n".as_bytes()).is_err());
    }
}
