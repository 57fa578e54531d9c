//! Dense node-feature matrices and their on-disk formats.
//!
//! Two formats are supported:
//!
//! * TSV: a header line `node_id<TAB><d>`, then one line per node holding the
//!   node id followed by `d` decimal values.
//! * Binary: magic `EMB1`, `u32` row count, `u32` column count, then `n*d`
//!   little-endian `f32` values in row-major order.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    Llm(String),
    DeepWalk,
    Line,
    Node2Vec,
    TimeDecay,
    Merged,
    Other(String),
}

impl fmt::Display for EmbeddingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingSource::Llm(id) => write!(f, "llm:{id}"),
            EmbeddingSource::DeepWalk => f.write_str("deepwalk"),
            EmbeddingSource::Line => f.write_str("line"),
            EmbeddingSource::Node2Vec => f.write_str("node2vec"),
            EmbeddingSource::TimeDecay => f.write_str("timedecay"),
            EmbeddingSource::Merged => f.write_str("merged"),
            EmbeddingSource::Other(s) => f.write_str(s),
        }
    }
}

/// Row-major `n x d` matrix of node features; row `i` belongs to node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
    pub source: EmbeddingSource,
}

impl EmbeddingMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>, source: EmbeddingSource) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        Ok(Self { n, d, data, source })
    }

    pub fn zeros(n: usize, d: usize, source: EmbeddingSource) -> Self {
        Self {
            n,
            d,
            data: vec![0.0; n * d],
            source,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], source: EmbeddingSource) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            n: rows.len(),
            d,
            data,
            source,
        })
    }

    pub fn from_array(a: &Array2<f64>, source: EmbeddingSource) -> Self {
        let (n, d) = a.dim();
        Self {
            n,
            d,
            data: a.iter().copied().collect(),
            source,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.n, self.d), self.data.clone()).expect("shape matches data length")
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Row-wise concatenation `[self | other]`; the result is tagged `merged`.
    pub fn concat(&self, other: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let d = self.d + other.d;
        let mut data = Vec::with_capacity(self.n * d);
        for i in 0..self.n {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(EmbeddingMatrix {
            n: self.n,
            d,
            data,
            source: EmbeddingSource::Merged,
        })
    }

    /// Scale every row to unit L2 norm; all-zero rows are left untouched.
    pub fn l2_normalize_rows(&mut self) {
        for i in 0..self.n {
            let row = self.row_mut(i);
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|x| *x /= norm);
            }
        }
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_tsv_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_tsv_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "node_id\t{}", self.d)?;
        for i in 0..self.n {
            write!(w, "{i}")?;
            for x in self.row(i) {
                write!(w, "\t{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_tsv(path: &Path, source: EmbeddingSource) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = match lines.next() {
            Some(h) => h.map_err(|e| Error::io(path, e))?,
            None => return Err(Error::Format(format!("{}: empty file", path.display()))),
        };
        let d: usize = header
            .strip_prefix("node_id\t")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Format(format!("bad header {header:?}")))?;
        let mut data = Vec::new();
        let mut n = 0;
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let id: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Malformed {
                    line: k + 2,
                    msg: "bad node id".into(),
                })?;
            if id != n {
                return Err(Error::Malformed {
                    line: k + 2,
                    msg: format!("expected node id {n}, found {id}"),
                });
            }
            let before = data.len();
            for f in fields {
                let x: f64 = f.parse().map_err(|_| Error::Malformed {
                    line: k + 2,
                    msg: format!("bad value {f:?}"),
                })?;
                data.push(x);
            }
            if data.len() - before != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: data.len() - before,
                });
            }
            n += 1;
        }
        Self::new(n, d, data, source)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let res: std::io::Result<()> = (|| {
            w.write_all(MAGIC)?;
            w.write_all(&(self.n as u32).to_le_bytes())?;
            w.write_all(&(self.d as u32).to_le_bytes())?;
            for x in &self.data {
                w.write_all(&(*x as f32).to_le_bytes())?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }

    pub fn read_binary(path: &Path, source: EmbeddingSource) -> Result<Self> {
        let mut buf = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        if buf.len() < 12 || &buf[..4] != MAGIC {
            return Err(Error::Format("missing EMB1 magic".into()));
        }
        let n = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
        let body = &buf[12..];
        if body.len() != n * d * 4 {
            return Err(Error::Format(format!(
                "expected {} payload bytes, found {}",
                n * d * 4,
                body.len()
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Self::new(n, d, data, source)
    }

    /// Read either format, sniffing the binary magic.
    pub fn read_any(path: &Path, source: EmbeddingSource) -> Result<Self> {
        let mut magic = [0u8; 4];
        let is_binary = File::open(path)
            .and_then(|mut f| f.read_exact(&mut magic))
            .map(|_| &magic == MAGIC)
            .unwrap_or(false);
        if is_binary {
            Self::read_binary(path, source)
        } else {
            Self::read_tsv(path, source)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(
            &[vec![0.5, -1.25, 3.0], vec![1e-7, 0.1, -0.0]],
            EmbeddingSource::DeepWalk,
        )
        .unwrap()
    }

    #[test]
    fn tsv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsv");
        let e = sample();
        e.write_tsv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("node_id\t3\n0\t0.5\t-1.25\t3\n"));
        let back = EmbeddingMatrix::read_any(&p, EmbeddingSource::DeepWalk).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn binary_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.bin");
        let e = sample();
        e.write_binary(&p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"EMB1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 12 + 6 * 4);
        let back = EmbeddingMatrix::read_any(&p, EmbeddingSource::DeepWalk).unwrap();
        for (a, b) in back.as_slice().iter().zip(e.as_slice()) {
            assert_eq!(*a as f32, *b as f32);
        }
    }

    #[test]
    fn concat_shapes() {
        let a = EmbeddingMatrix::zeros(4, 768, EmbeddingSource::Llm("m".into()));
        let b = EmbeddingMatrix::zeros(4, 768, EmbeddingSource::TimeDecay);
        let c = a.concat(&b).unwrap();
        assert_eq!((c.n(), c.dim()), (4, 1536));
        assert_eq!(c.source, EmbeddingSource::Merged);

        let e = sample();
        let empty = EmbeddingMatrix::zeros(2, 0, EmbeddingSource::TimeDecay);
        let same = e.concat(&empty).unwrap();
        assert_eq!(same.as_slice(), e.as_slice());
        assert_eq!(same.row(1), e.row(1));

        let wrong = EmbeddingMatrix::zeros(3, 1, EmbeddingSource::TimeDecay);
        assert!(e.concat(&wrong).is_err());
    }
}
