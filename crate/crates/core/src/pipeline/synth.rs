//! Synthetic benchmark: Gaussian clusters of embedding sequences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sampling::standard_normal;
use crate::types::{Dataset, EmbeddingSequence, Example, Provenance, SoftLabel};
use crate::Scalar;

/// Shape of the generated benchmark.
///
/// Every example of cluster `k` is `rows` noisy copies of that cluster's
/// center with one-hot label `k`. When `centers` is `None` the centers are
/// placed on scaled coordinate axes so that all pairwise center distances
/// equal `overlap * spread`; this needs `clusters <= dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub clusters: usize,
    pub per_cluster: usize,
    pub dims: usize,
    pub rows: usize,
    pub centers: Option<Vec<Vec<f64>>>,
    pub spread: f64,
    pub overlap: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// The standard overlap benchmark: two clusters, 8 dims, 4 rows,
    /// 100 examples per cluster, centers 2 spreads apart.
    fn default() -> Self {
        Self {
            clusters: 2,
            per_cluster: 100,
            dims: 8,
            rows: 4,
            centers: None,
            spread: 1.0,
            overlap: 2.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.dims == 0 || self.rows == 0 {
            return Err(Error::config(
                "clusters, dims, and rows must all be positive",
            ));
        }
        if self.per_cluster < 2 {
            return Err(Error::config("per_cluster must be at least 2"));
        }
        if !(self.spread.is_finite() && self.spread > 0.0) {
            return Err(Error::config(format!(
                "spread = {} must be > 0",
                self.spread
            )));
        }
        if !(self.overlap.is_finite() && self.overlap >= 0.0) {
            return Err(Error::config(format!(
                "overlap = {} must be >= 0",
                self.overlap
            )));
        }
        if let Some(centers) = &self.centers {
            if centers.len() != self.clusters {
                return Err(Error::config(format!(
                    "{} centers given for {} clusters",
                    centers.len(),
                    self.clusters
                )));
            }
            for (k, center) in centers.iter().enumerate() {
                if center.len() != self.dims {
                    return Err(Error::config(format!(
                        "center {k} has {} dims, expected {}",
                        center.len(),
                        self.dims
                    )));
                }
                if center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config(format!("center {k} has non-finite values")));
                }
            }
        } else if self.clusters > self.dims {
            return Err(Error::config(format!(
                "axis-placed centers need clusters <= dims, got {} > {}",
                self.clusters, self.dims
            )));
        }
        Ok(())
    }

    fn resolved_centers(&self) -> Vec<Vec<f64>> {
        if let Some(centers) = &self.centers {
            return centers.clone();
        }
        // Points t * e_k are pairwise t * sqrt(2) apart.
        let t = self.overlap * self.spread / std::f64::consts::SQRT_2;
        (0..self.clusters)
            .map(|k| {
                let mut center = vec![0.0; self.dims];
                center[k] = t;
                center
            })
            .collect()
    }
}

/// Generate the benchmark dataset; deterministic under the spec seed.
pub fn synth<F: Scalar>(spec: &SyntheticSpec) -> Result<Dataset<F>> {
    spec.validate()?;
    let centers = spec.resolved_centers();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut examples = Vec::with_capacity(spec.clusters * spec.per_cluster);
    for (k, center) in centers.iter().enumerate() {
        for _ in 0..spec.per_cluster {
            let mut data = Vec::with_capacity(spec.rows * spec.dims);
            for _ in 0..spec.rows {
                for &c in center {
                    data.push(F::of(c + spec.spread * standard_normal(&mut rng)));
                }
            }
            let seq = EmbeddingSequence::new(spec.rows, spec.dims, data, None)?;
            let label = SoftLabel::one_hot(k, spec.clusters)?;
            examples.push(Example::new(seq, label, Provenance::Original));
        }
    }
    Dataset::new(examples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_labels_per_cluster() {
        let spec = SyntheticSpec {
            per_cluster: 50,
            ..SyntheticSpec::default()
        };
        let ds: Dataset<f64> = synth(&spec).unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!((ds.rows(), ds.dims(), ds.classes()), (4, 8, 2));
        for k in 0..2 {
            let count = ds
                .examples()
                .iter()
                .filter(|e| e.label.argmax() == k)
                .count();
            assert_eq!(count, 50);
        }
    }

    #[test]
    fn vanishing_spread_collapses_onto_the_centers() {
        let spec = SyntheticSpec {
            clusters: 2,
            per_cluster: 3,
            dims: 2,
            rows: 2,
            centers: Some(vec![vec![1.0, 2.0], vec![-3.0, 4.0]]),
            spread: 1e-300,
            overlap: 0.0,
            seed: 5,
        };
        let ds: Dataset<f64> = synth(&spec).unwrap();
        for (i, ex) in ds.examples().iter().enumerate() {
            let center = if i < 3 {
                [1.0, 2.0]
            } else {
                [-3.0, 4.0]
            };
            for row in 0..2 {
                assert_eq!(ex.seq.row(row), &center, "example {i} row {row}");
            }
        }
    }

    #[test]
    fn axis_centers_sit_at_the_requested_distance() {
        let spec = SyntheticSpec {
            clusters: 3,
            dims: 5,
            overlap: 4.0,
            spread: 0.5,
            ..SyntheticSpec::default()
        };
        let centers = spec.resolved_centers();
        for a in 0..3 {
            for b in (a + 1)..3 {
                let dist: f64 = centers[a]
                    .iter()
                    .zip(&centers[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                assert!((dist - 2.0).abs() < 1e-12, "pair ({a}, {b}): {dist}");
            }
        }
    }

    #[test]
    fn seed_determinism_and_divergence() {
        let spec = SyntheticSpec::default();
        let a: Dataset<f64> = synth(&spec).unwrap();
        let b: Dataset<f64> = synth(&spec).unwrap();
        assert_eq!(a.examples(), b.examples());
        let c: Dataset<f64> = synth(&SyntheticSpec {
            seed: 1,
            ..spec
        })
        .unwrap();
        assert_ne!(a.examples(), c.examples());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = SyntheticSpec::default();
        assert!(synth::<f64>(&SyntheticSpec {
            per_cluster: 1,
            ..base.clone()
        })
        .is_err());
        assert!(synth::<f64>(&SyntheticSpec {
            spread: 0.0,
            ..base.clone()
        })
        .is_err());
        assert!(synth::<f64>(&SyntheticSpec {
            clusters: 9,
            ..base.clone()
        })
        .is_err());
        assert!(synth::<f64>(&SyntheticSpec {
            centers: Some(vec![vec![0.0; 8]]),
            ..base
        })
        .is_err());
    }
}
