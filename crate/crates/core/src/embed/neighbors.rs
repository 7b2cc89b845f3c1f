use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub term: String,
    pub similarity: f64,
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch(a.len(), b.len()));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((d / (na * nb)).clamp(-1.0, 1.0))
}

/// Higher similarity first, then lexical order.
fn rank_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.similarity.total_cmp(&a.similarity).then_with(|| a.term.cmp(&b.term))
}

impl EmbeddingModel {
    /// The `k` vocabulary terms closest to `term` by cosine of input
    /// vectors, excluding `term` itself and anything in `exclude`.
    /// An out-of-vocabulary term yields no neighbours; zero vectors are
    /// never returned.
    pub fn nearest_neighbors(&self, term: &str, k: usize, exclude: &BTreeSet<String>) -> Vec<Neighbor> {
        let Some(qi) = self.index_of(term) else {
            return Vec::new();
        };
        let qn = self.norms[qi];
        if k == 0 || qn == 0.0 {
            return Vec::new();
        }
        let q = self.row(qi);
        let mut all: Vec<Neighbor> = self
            .vocab
            .iter()
            .enumerate()
            .filter(|&(i, v)| i != qi && self.norms[i] > 0.0 && !exclude.contains(&v.term))
            .map(|(i, v)| {
                let d: f64 = q.iter().zip(self.row(i)).map(|(x, y)| x * y).sum();
                Neighbor {
                    term: v.term.clone(),
                    similarity: (d / (qn * self.norms[i])).clamp(-1.0, 1.0),
                }
            })
            .collect();
        if all.len() > k {
            all.select_nth_unstable_by(k - 1, rank_order);
            all.truncate(k);
        }
        all.sort_by(rank_order);
        all
    }

    /// Cosine similarity between two vocabulary terms.
    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        cosine(self.vector(a)?, self.vector(b)?).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        let v = [0.3, -1.2, 4.0];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(EmbedError::ZeroVector)));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(EmbedError::DimensionMismatch(1, 2))
        ));
    }

    fn toy() -> EmbeddingModel {
        EmbeddingModel::from_vectors(vec![
            ("book", vec![1.0, 0.0, 0.0]),
            ("books", vec![0.95, 0.1, 0.0]),
            ("novel", vec![0.8, 0.3, 0.1]),
            ("tome", vec![0.8, 0.3, 0.1]),
            ("zero", vec![0.0, 0.0, 0.0]),
            ("far", vec![-1.0, 0.2, 0.0]),
        ])
    }

    #[test]
    fn ranking_ties_and_exclusions() {
        let m = toy();
        let n = m.nearest_neighbors("book", 10, &BTreeSet::new());
        let terms: Vec<_> = n.iter().map(|x| x.term.as_str()).collect();
        assert_eq!(terms, ["books", "novel", "tome", "far"]);
        assert_eq!(n[1].similarity, n[2].similarity);

        let ex: BTreeSet<String> = ["books".to_string()].into();
        let n = m.nearest_neighbors("book", 2, &ex);
        assert_eq!(n.iter().map(|x| x.term.as_str()).collect::<Vec<_>>(), ["novel", "tome"]);

        assert!(m.nearest_neighbors("missing", 3, &BTreeSet::new()).is_empty());
        assert!(m.nearest_neighbors("zero", 3, &BTreeSet::new()).is_empty());
        assert!(m.nearest_neighbors("book", 0, &BTreeSet::new()).is_empty());
    }
}
