//! Similarity functions over embeddings.

use crate::error::{Error, Result};
use crate::types::{Embedding, SimilarityMetric};

fn check_dims(q: &Embedding, n: &Embedding) -> Result<()> {
    if q.dim() != n.dim() {
        return Err(Error::Dimension {
            expected: q.dim(),
            actual: n.dim(),
        });
    }
    Ok(())
}

/// Cosine of the angle between two non-zero vectors: `(q·n)/(‖q‖‖n‖)`.
///
/// Lies in [-1, 1] up to rounding and is symmetric in its arguments.
/// Undefined (and rejected) when either vector has zero norm.
pub fn cosine_similarity(q: &Embedding, n: &Embedding) -> Result<f64> {
    check_dims(q, n)?;
    let mut dot = 0.0;
    let mut qq = 0.0;
    let mut nn = 0.0;
    for (a, b) in q.values().iter().zip(n.values()) {
        dot += a * b;
        qq += a * a;
        nn += b * b;
    }
    if qq == 0.0 || nn == 0.0 {
        return Err(Error::DegenerateVector(
            "cosine similarity undefined for zero-norm vector".into(),
        ));
    }
    Ok(dot / (qq.sqrt() * nn.sqrt()))
}

/// Similarity under the chosen metric, on a shared "higher is more similar"
/// scale: cosine as-is, Euclidean and Manhattan distances negated.
///
/// Zero-norm vectors are fine for the distance kinds; only cosine rejects
/// them.
pub fn similarity(metric: SimilarityMetric, q: &Embedding, n: &Embedding) -> Result<f64> {
    match metric {
        SimilarityMetric::Cosine => cosine_similarity(q, n),
        SimilarityMetric::NegEuclidean => {
            check_dims(q, n)?;
            let sq: f64 = q
                .values()
                .iter()
                .zip(n.values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            Ok(-sq.sqrt())
        }
        SimilarityMetric::NegManhattan => {
            check_dims(q, n)?;
            let sum: f64 = q
                .values()
                .iter()
                .zip(n.values())
                .map(|(a, b)| (a - b).abs())
                .sum();
            Ok(-sum)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(values: &[f64]) -> Embedding {
        Embedding::new(values.to_vec()).unwrap()
    }

    #[test]
    fn cosine_identical_unit_vectors() {
        assert_eq!(
            cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[1.0, 0.0])).unwrap(),
            1.0
        );
    }

    #[test]
    fn cosine_orthogonal_vectors() {
        assert_eq!(
            cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[0.0, 1.0])).unwrap(),
            0.0
        );
    }

    #[test]
    fn cosine_45_degrees() {
        // (1,0)·(1,1) / (1·√2) = 1/√2
        let got = cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[1.0, 1.0])).unwrap();
        assert!((got - 0.70710678).abs() < 1e-8, "got {got}");
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[1.0])),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            cosine_similarity(&emb(&[0.0, 0.0]), &emb(&[1.0, 0.0])),
            Err(Error::DegenerateVector(_))
        ));
    }

    #[test]
    fn neg_euclidean_identical_is_zero() {
        let v = emb(&[0.3, -0.4, 0.5]);
        assert_eq!(
            similarity(SimilarityMetric::NegEuclidean, &v, &v).unwrap(),
            0.0
        );
    }

    #[test]
    fn neg_manhattan_unit_axes() {
        assert_eq!(
            similarity(
                SimilarityMetric::NegManhattan,
                &emb(&[1.0, 0.0]),
                &emb(&[0.0, 1.0])
            )
            .unwrap(),
            -2.0
        );
    }

    #[test]
    fn neg_euclidean_unit_axes() {
        let got = similarity(
            SimilarityMetric::NegEuclidean,
            &emb(&[1.0, 0.0]),
            &emb(&[0.0, 1.0]),
        )
        .unwrap();
        assert!((got - (-1.41421356)).abs() < 1e-8, "got {got}");
    }

    #[test]
    fn distance_metrics_allow_zero_norm() {
        let z = emb(&[0.0, 0.0]);
        let v = emb(&[3.0, 4.0]);
        assert_eq!(
            similarity(SimilarityMetric::NegEuclidean, &z, &v).unwrap(),
            -5.0
        );
        assert_eq!(
            similarity(SimilarityMetric::NegManhattan, &z, &v).unwrap(),
            -7.0
        );
    }
}
