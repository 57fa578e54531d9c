//! Time-decayed PPMI node embeddings.
//!
//! Yearly co-occurrence counts are converted to PPMI matrices, each year's
//! matrix is weighted by `exp(-lambda * (ref_year - year))`, the weighted
//! matrices are summed, and the sum is factorized by truncated SVD into
//! `E = U_d * sqrt(S_d)`. The result is only meant to be concatenated onto
//! another feature matrix.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingMatrix, EmbeddingSource};
use crate::error::{Error, Result};
use crate::graph::{Edge, TemporalGraph};

/// Sparse symmetric `n x n` matrix with zero diagonal; only `u < v` stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    pub n: usize,
    pub year: Option<i32>,
    entries: BTreeMap<Edge, f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize, year: Option<i32>) -> Self {
        Self {
            n,
            year,
            entries: BTreeMap::new(),
        }
    }

    /// Build from a dense symmetric matrix given as rows; the diagonal must be zero.
    pub fn from_dense(rows: &[Vec<f64>], year: Option<i32>) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n, year);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            if r[i] != 0.0 {
                return Err(Error::InvalidConfig(format!("nonzero diagonal at {i}")));
            }
            for j in i + 1..n {
                if r[j] != rows[j][i] {
                    return Err(Error::InvalidConfig(format!("asymmetric entry ({i}, {j})")));
                }
                m.set(i, j, r[j]);
            }
        }
        Ok(m)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.entries.get(&Edge::new(i, j)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let e = Edge::new(i, j);
        if value == 0.0 {
            self.entries.remove(&e);
        } else {
            self.entries.insert(e, value);
        }
    }

    /// Stored upper-triangle entries.
    pub fn entries(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        self.entries.iter().map(|(e, v)| (*e, *v))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (e, v) in self.entries() {
            m[(e.u, e.v)] = v;
            m[(e.v, e.u)] = v;
        }
        m
    }

    /// Coordinate-format dump of the upper triangle: header `i<TAB>j<TAB>value`.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i\tj\tvalue")?;
        for (e, v) in self.entries() {
            writeln!(w, "{}\t{}\t{}", e.u, e.v, v)?;
        }
        Ok(())
    }
}

/// One count matrix per year in `years`; years without data give zero matrices.
pub fn yearly_cooccurrence(g: &TemporalGraph, years: RangeInclusive<i32>) -> Vec<SymMatrix> {
    years
        .map(|y| {
            let mut m = SymMatrix::zeros(g.n(), Some(y));
            if let Some(counts) = g.yearly_counts().get(&y) {
                for (e, c) in counts {
                    m.entries.insert(*e, f64::from(*c));
                }
            }
            m
        })
        .collect()
}

/// Positive PMI of a symmetric count matrix.
///
/// With `S` the total of all (both-orientation) counts, `P(i,j) = c_ij / S`
/// and `P(i) = sum_j c_ij / S`; the entry is `max(0, ln(P(i,j) / (P(i) P(j))))`.
/// `alpha` smooths the marginals as `P(i) ∝ (sum_j c_ij)^alpha`; `1.0`
/// disables smoothing. Smoothing is applied to both marginals so the
/// output stays symmetric.
pub fn ppmi_smoothed(counts: &SymMatrix, alpha: f64) -> SymMatrix {
    let mut out = SymMatrix::zeros(counts.n, counts.year);
    let mut row = vec![0.0; counts.n];
    for (e, c) in counts.entries() {
        row[e.u] += c;
        row[e.v] += c;
    }
    let total: f64 = row.iter().sum();
    if total <= 0.0 {
        return out;
    }
    let marg: Vec<f64> = if alpha == 1.0 {
        row.iter().map(|r| r / total).collect()
    } else {
        let z: f64 = row.iter().map(|r| r.powf(alpha)).sum();
        row.iter().map(|r| r.powf(alpha) / z).collect()
    };
    for (e, c) in counts.entries() {
        if c <= 0.0 {
            continue;
        }
        let pmi = ((c / total) / (marg[e.u] * marg[e.v])).ln();
        if pmi > 0.0 {
            out.entries.insert(e, pmi);
        }
    }
    out
}

pub fn ppmi(counts: &SymMatrix) -> SymMatrix {
    ppmi_smoothed(counts, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDecayConfig {
    /// Decay constant per year.
    pub lambda: f64,
    /// Elapsed time for a matrix from year `y` is `ref_year - y`.
    pub ref_year: i32,
    pub d_td: usize,
    pub first_year: i32,
    pub last_year: i32,
    /// PPMI marginal smoothing exponent; 1.0 means none.
    pub alpha: f64,
}

impl TimeDecayConfig {
    /// Decay over `first_year..=train_end` with `ref_year = train_end`.
    pub fn for_training_window(first_year: i32, train_end: i32, lambda: f64, d_td: usize) -> Self {
        Self {
            lambda,
            ref_year: train_end,
            d_td,
            first_year,
            last_year: train_end,
            alpha: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.d_td == 0 {
            return Err(Error::InvalidConfig("d_td must be >= 1".into()));
        }
        if self.first_year > self.last_year {
            return Err(Error::InvalidConfig("empty year range".into()));
        }
        if self.last_year > self.ref_year {
            return Err(Error::FutureYear {
                year: self.last_year,
                ref_year: self.ref_year,
            });
        }
        Ok(())
    }

    pub fn weight(&self, year: i32) -> f64 {
        (-self.lambda * f64::from(self.ref_year - year)).exp()
    }
}

/// `sum_t exp(-lambda * (ref_year - t)) * PPMI_t`. Every input must carry a
/// year no later than `ref_year`.
pub fn decay_aggregate(ppmis: &[SymMatrix], cfg: &TimeDecayConfig) -> Result<SymMatrix> {
    let n = ppmis.first().map_or(0, |m| m.n);
    let mut out = SymMatrix::zeros(n, Some(cfg.ref_year));
    for m in ppmis {
        if m.n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.n,
            });
        }
        let year = m
            .year
            .ok_or_else(|| Error::InvalidConfig("PPMI matrix without a year".into()))?;
        if year > cfg.ref_year {
            return Err(Error::FutureYear {
                year,
                ref_year: cfg.ref_year,
            });
        }
        let w = cfg.weight(year);
        for (e, v) in m.entries() {
            *out.entries.entry(e).or_insert(0.0) += w * v;
        }
    }
    Ok(out)
}

/// Top-`d` factorization `E = U_d * sqrt(S_d)` with singular values in
/// descending order. Each column is signed so its largest-magnitude entry
/// (first one on ties) is positive.
///
/// `m` must be symmetric. Its singular triples are then `(|lambda|, u, ±u)`
/// for each eigenpair, so a symmetric eigendecomposition gives them directly;
/// it is also more robust than a general SVD on rank-deficient input.
pub fn truncated_svd(m: &DMatrix<f64>, d: usize) -> Result<EmbeddingMatrix> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    if d > n {
        return Err(Error::InvalidConfig(format!("d_td = {d} exceeds matrix size {n}")));
    }
    if n == 0 || d == 0 {
        return Ok(EmbeddingMatrix::zeros(n, d, EmbeddingSource::TimeDecay));
    }
    let scale_ref = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-10 * scale_ref {
        return Err(Error::InvalidConfig("truncated_svd needs a symmetric matrix".into()));
    }
    let eig = m.clone().symmetric_eigen();
    let sigma: Vec<f64> = eig.eigenvalues.iter().map(|l| l.abs()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));

    let mut data = vec![0.0; n * d];
    for (k, &col) in order.iter().take(d).enumerate() {
        let scale = sigma[col].sqrt();
        let column = eig.eigenvectors.column(col);
        let mut pivot = 0;
        for i in 1..n {
            if column[i].abs() > column[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if column[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            data[i * d + k] = sign * scale * column[i];
        }
    }
    EmbeddingMatrix::new(n, d, data, EmbeddingSource::TimeDecay)
}

/// The full pipeline over `g`'s yearly counts.
pub fn time_decay_embedding(g: &TemporalGraph, cfg: &TimeDecayConfig) -> Result<EmbeddingMatrix> {
    let aggregated = aggregate_for(g, cfg)?;
    truncated_svd(&aggregated.to_dense(), cfg.d_td)
}

pub fn aggregate_for(g: &TemporalGraph, cfg: &TimeDecayConfig) -> Result<SymMatrix> {
    cfg.validate()?;
    if cfg.d_td > g.n() {
        return Err(Error::InvalidConfig(format!(
            "d_td = {} exceeds node count {}",
            cfg.d_td,
            g.n()
        )));
    }
    let ppmis: Vec<SymMatrix> = yearly_cooccurrence(g, cfg.first_year..=cfg.last_year)
        .iter()
        .map(|c| ppmi_smoothed(c, cfg.alpha))
        .collect();
    decay_aggregate(&ppmis, cfg)
}
