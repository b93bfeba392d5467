use crate::error::{Error, Result};

/// Per-chunk encoder outputs for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkedEmbeddingRecord {
    pub doc_id: String,
    pub chunk_vectors: Vec<Vec<f64>>,
    /// Non-pad tokens in each chunk.
    pub token_counts: Vec<u32>,
}

impl ChunkedEmbeddingRecord {
    /// Checks shape consistency and, if given, the `max_context` bound on
    /// token counts.
    pub fn validate(&self, max_context: Option<u32>) -> Result<()> {
        if self.chunk_vectors.is_empty() {
            return Err(Error::Empty(format!(
                "document {} has no chunks",
                self.doc_id
            )));
        }
        if self.chunk_vectors.len() != self.token_counts.len() {
            return Err(Error::LengthMismatch {
                what: "chunk vectors vs token counts",
                left: self.chunk_vectors.len(),
                right: self.token_counts.len(),
            });
        }
        let d = self.chunk_vectors[0].len();
        for v in &self.chunk_vectors {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
        }
        for &c in &self.token_counts {
            if c == 0 || max_context.is_some_and(|max| c > max) {
                return Err(Error::InvalidArgument(format!(
                    "document {}: token count {c} outside [1, {}]",
                    self.doc_id,
                    max_context.map_or("inf".to_string(), |m| m.to_string())
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolMode {
    /// Mean over all real tokens: chunks weighted by their token count.
    #[default]
    TokenWeighted,
    /// Unweighted mean of chunk vectors.
    Flat,
}

pub fn pool_chunks(rec: &ChunkedEmbeddingRecord, mode: PoolMode) -> Result<Vec<f64>> {
    rec.validate(None)?;
    let d = rec.chunk_vectors[0].len();
    let mut acc = vec![0.0; d];
    let mut total = 0.0;
    for (v, &count) in rec.chunk_vectors.iter().zip(&rec.token_counts) {
        let w = match mode {
            PoolMode::TokenWeighted => f64::from(count),
            PoolMode::Flat => 1.0,
        };
        total += w;
        for (a, x) in acc.iter_mut().zip(v) {
            *a += w * x;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(acc)
}

/// Pools every record, returning doc ids and a row-major matrix.
pub fn pool_records(
    records: &[ChunkedEmbeddingRecord],
    mode: PoolMode,
) -> Result<(Vec<String>, ndarray::Array2<f64>)> {
    let first = records
        .first()
        .ok_or_else(|| Error::Empty("no chunked records".into()))?;
    let d = first
        .chunk_vectors
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Empty(format!("document {} has no chunks", first.doc_id)))?;
    let mut out = ndarray::Array2::zeros((records.len(), d));
    let mut ids = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let v = pool_chunks(rec, mode)?;
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
        out.row_mut(i).assign(&ndarray::ArrayView1::from(&v));
        ids.push(rec.doc_id.clone());
    }
    Ok((ids, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(vs: Vec<Vec<f64>>, counts: Vec<u32>) -> ChunkedEmbeddingRecord {
        ChunkedEmbeddingRecord {
            doc_id: "d".into(),
            chunk_vectors: vs,
            token_counts: counts,
        }
    }

    #[test]
    fn pooling_examples() {
        let one = rec(vec![vec![0.25, -3.0]], vec![17]);
        assert_eq!(
            pool_chunks(&one, PoolMode::TokenWeighted).unwrap(),
            vec![0.25, -3.0]
        );

        let sym = rec(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1, 1]);
        assert_eq!(
            pool_chunks(&sym, PoolMode::TokenWeighted).unwrap(),
            vec![0.5, 0.5]
        );

        let weighted = rec(vec![vec![2.0, 2.0], vec![0.0, 0.0]], vec![3, 1]);
        assert_eq!(
            pool_chunks(&weighted, PoolMode::TokenWeighted).unwrap(),
            vec![1.5, 1.5]
        );
        assert_eq!(
            pool_chunks(&weighted, PoolMode::Flat).unwrap(),
            vec![1.0, 1.0]
        );
    }

    #[test]
    fn pooling_errors() {
        assert!(pool_chunks(&rec(vec![], vec![]), PoolMode::TokenWeighted).is_err());
        let bad = rec(vec![vec![1.0, 2.0], vec![1.0]], vec![1, 1]);
        assert!(matches!(
            pool_chunks(&bad, PoolMode::TokenWeighted),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
        assert!(pool_chunks(&rec(vec![vec![1.0]], vec![0]), PoolMode::TokenWeighted).is_err());
        let r = rec(vec![vec![1.0]], vec![600]);
        assert!(r.validate(Some(512)).is_err());
        assert!(r.validate(Some(600)).is_ok());
    }

    fn chunks() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u32>)> {
        (1usize..6, 1usize..5).prop_flat_map(|(m, d)| {
            (
                prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), m),
                prop::collection::vec(1u32..512, m),
            )
        })
    }

    proptest! {
        #[test]
        fn permutation_invariant((vs, counts) in chunks(), rot in 0usize..6) {
            let a = pool_chunks(&rec(vs.clone(), counts.clone()), PoolMode::TokenWeighted).unwrap();
            let k = rot % vs.len();
            let mut vs2 = vs.clone();
            let mut c2 = counts.clone();
            vs2.rotate_left(k);
            c2.rotate_left(k);
            vs2.reverse();
            c2.reverse();
            let b = pool_chunks(&rec(vs2, c2), PoolMode::TokenWeighted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn equal_counts_give_flat_mean((vs, counts) in chunks()) {
            let c = vec![counts[0]; vs.len()];
            let a = pool_chunks(&rec(vs.clone(), c.clone()), PoolMode::TokenWeighted).unwrap();
            let b = pool_chunks(&rec(vs, c), PoolMode::Flat).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
