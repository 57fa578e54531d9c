use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingMatrix, EmbeddingSource};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMethod {
    MeanPool,
    MaxPool,
    Summarize,
    ConcatTd,
}

fn check_dims(vectors: &[&[f64]]) -> Result<usize> {
    let d = vectors
        .first()
        .map(|v| v.len())
        .ok_or_else(|| Error::EmptyInput("nothing to pool".into()))?;
    for v in vectors {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
    }
    Ok(d)
}

pub fn mean_pool(vectors: &[&[f64]]) -> Result<Vec<f64>> {
    let d = check_dims(vectors)?;
    let k = vectors.len() as f64;
    Ok((0..d).map(|i| vectors.iter().map(|v| v[i]).sum::<f64>() / k).collect())
}

pub fn max_pool(vectors: &[&[f64]]) -> Result<Vec<f64>> {
    let d = check_dims(vectors)?;
    Ok((0..d)
        .map(|i| vectors.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

/// Row-wise pooling of several same-shaped matrices.
pub fn pool_matrices(mats: &[&EmbeddingMatrix], method: MergeMethod) -> Result<EmbeddingMatrix> {
    let first = mats
        .first()
        .ok_or_else(|| Error::EmptyInput("no matrices to merge".into()))?;
    let pool: fn(&[&[f64]]) -> Result<Vec<f64>> = match method {
        MergeMethod::MeanPool => mean_pool,
        MergeMethod::MaxPool => max_pool,
        other => return Err(Error::InvalidConfig(format!("{other:?} is not a pooling method"))),
    };
    let mut rows = Vec::with_capacity(first.n());
    for i in 0..first.n() {
        let vs: Vec<&[f64]> = mats
            .iter()
            .map(|m| {
                if m.n() != first.n() {
                    Err(Error::DimensionMismatch {
                        expected: first.n(),
                        found: m.n(),
                    })
                } else {
                    Ok(m.row(i))
                }
            })
            .collect::<Result<_>>()?;
        rows.push(pool(&vs)?);
    }
    EmbeddingMatrix::from_rows(&rows, EmbeddingSource::Merged)
}

/// Replay an external per-concept model choice: row `i` is copied from the
/// matrix of model `choices[i]`.
pub fn select_per_concept(choices: &[String], sources: &BTreeMap<String, EmbeddingMatrix>) -> Result<EmbeddingMatrix> {
    let rows = choices
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let src = sources
                .get(m)
                .ok_or_else(|| Error::InvalidConfig(format!("selection names unknown model {m:?}")))?;
            if i >= src.n() {
                return Err(Error::NodeOutOfRange { node: i, n: src.n() });
            }
            Ok(src.row(i).to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingMatrix::from_rows(&rows, EmbeddingSource::Merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pooling_examples() {
        let (a, b) = ([1.0, 3.0], [3.0, 1.0]);
        assert_eq!(mean_pool(&[&a, &b]).unwrap(), vec![2.0, 2.0]);
        assert_eq!(max_pool(&[&a, &b]).unwrap(), vec![3.0, 3.0]);
        let same = [0.5, -2.0, 7.0];
        assert_eq!(mean_pool(&[&same, &same, &same]).unwrap(), same.to_vec());
        assert_eq!(max_pool(&[&same, &same, &same]).unwrap(), same.to_vec());
        assert!(mean_pool(&[&a, &same]).is_err());
        assert!(max_pool(&[]).is_err());
    }

    #[test]
    fn selection_replays_choices() {
        let a = EmbeddingMatrix::from_rows(&[vec![1.0], vec![2.0]], EmbeddingSource::Llm("a".into())).unwrap();
        let b = EmbeddingMatrix::from_rows(&[vec![10.0], vec![20.0]], EmbeddingSource::Llm("b".into())).unwrap();
        let sources = BTreeMap::from([("a".to_string(), a), ("b".to_string(), b)]);
        let m = select_per_concept(&["b".into(), "a".into()], &sources).unwrap();
        assert_eq!(m.as_slice(), &[10.0, 2.0]);
        assert!(select_per_concept(&["c".into()], &sources).is_err());
    }

    proptest! {
        #[test]
        fn pooling_order_and_bounds(rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 4), 1..6)) {
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            let mean = mean_pool(&refs).unwrap();
            let max = max_pool(&refs).unwrap();
            let mut rev = refs.clone();
            rev.reverse();
            prop_assert_eq!(&max, &max_pool(&rev).unwrap());
            let mean_rev = mean_pool(&rev).unwrap();
            for i in 0..4 {
                prop_assert!((mean[i] - mean_rev[i]).abs() <= 1e-9 * (1.0 + mean[i].abs()));
                let lo = refs.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min);
                prop_assert!(lo - 1e-9 <= mean[i] && mean[i] <= max[i] + 1e-9);
            }
        }
    }
}
