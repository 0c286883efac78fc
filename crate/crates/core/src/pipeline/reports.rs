//! Report analyses: label disagreement across coincident virtual samples,
//! and label extremity before and after relabeling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixer::mix_pair;
use crate::relabeler::relabel_refs;
use crate::types::{AugmentConfig, Dataset, EmbeddingSequence, Example, Provenance, SoftLabel};
use crate::Scalar;

/// Controls for the ambiguity analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityOptions {
    /// How many coincident pair-of-pairs constructions to attempt.
    pub pairs: usize,
    /// Largest matrix distance at which two virtuals count as coincident.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for AmbiguityOptions {
    fn default() -> Self {
        Self {
            pairs: 100,
            tolerance: 1e-9,
            seed: 0,
        }
    }
}

/// Mean label disagreement over coincident virtual pairs, under pair-based
/// labeling and under relabeling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbiguityReport {
    pub requested_pairs: usize,
    pub pairs_found: usize,
    /// Mean L1 distance between the two pair-derived labels.
    pub vanilla_disagreement: f64,
    /// Mean L1 distance between the two relabeled labels.
    pub global_disagreement: f64,
    /// Set when fewer coincident constructions were found than requested.
    pub warning: bool,
}

/// Snap onto the dyadic grid used by the coincidence construction.
///
/// Values on this grid with moderate magnitude keep every interpolation
/// step exact in double precision, so the two constructed pairs mix onto
/// bit-identical virtual matrices. Values too large for that are returned
/// unchanged and the tolerance check decides whether the pair counts.
fn quantize(v: f64) -> f64 {
    const GRID: f64 = (1u64 << 20) as f64;
    if !(v.abs() < 4096.0) {
        return v;
    }
    (v * GRID).round() / GRID
}

/// Dyadic coefficient away from both endpoints: k/1024, k in [52, 972].
fn dyadic_lambda<R: Rng>(rng: &mut R) -> f64 {
    rng.gen_range(52..=972) as f64 / 1024.0
}

/// Entrywise dyadic offsets in [-1/2, 1/2].
fn dyadic_offsets<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    const GRID: f64 = (1u64 << 20) as f64;
    (0..len)
        .map(|_| rng.gen_range(-(1i64 << 19)..=(1i64 << 19)) as f64 / GRID)
        .collect()
}

/// Parents straddling `target` so that mixing them at `lambda` lands
/// exactly back on `target`.
fn straddling_pair<F: Scalar>(
    target: &[f64],
    offsets: &[f64],
    lambda: f64,
    label_first: SoftLabel<F>,
    label_second: SoftLabel<F>,
    rows: usize,
    dims: usize,
) -> Result<(Example<F>, Example<F>)> {
    let mu = 1.0 - lambda;
    let first: Vec<F> = target
        .iter()
        .zip(offsets)
        .map(|(&m, &u)| F::of(m + mu * u))
        .collect();
    let second: Vec<F> = target
        .iter()
        .zip(offsets)
        .map(|(&m, &u)| F::of(m - lambda * u))
        .collect();
    Ok((
        Example::new(
            EmbeddingSequence::new(rows, dims, first, None)?,
            label_first,
            Provenance::Original,
        ),
        Example::new(
            EmbeddingSequence::new(rows, dims, second, None)?,
            label_second,
            Provenance::Original,
        ),
    ))
}

fn sample_distinct<R: Rng>(n: usize, take: usize, rng: &mut R) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..take {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    indices.truncate(take);
    indices
}

fn matrix_distance<F: Scalar>(a: &EmbeddingSequence<F>, b: &EmbeddingSequence<F>) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            (x.to_f64().expect("finite") - y.to_f64().expect("finite")).abs()
        })
        .fold(0.0, f64::max)
}

/// Build pair-of-pairs constructions with coincident virtual samples and
/// measure how far apart their labels end up.
///
/// Each construction picks two dataset examples with different argmax
/// classes, takes their quantized midpoint as the shared virtual target,
/// and builds two parent pairs around it with opposite label assignments
/// and independently drawn coefficients. Both pairs mix exactly onto the
/// target matrix, which then gets one pair-derived label per pair and one
/// relabeled label per pair against a shared pool drawn from the dataset.
pub fn ambiguity_report<F: Scalar>(
    dataset: &Dataset<F>,
    config: &AugmentConfig<F>,
    options: &AmbiguityOptions,
) -> Result<AmbiguityReport> {
    config.validate(dataset.classes())?;
    if config.t_ref > dataset.len() {
        return Err(Error::config(format!(
            "t_ref = {} exceeds dataset size {}",
            config.t_ref,
            dataset.len()
        )));
    }
    if options.pairs == 0 {
        return Err(Error::config("ambiguity report needs at least one pair"));
    }
    if !(options.tolerance.is_finite() && options.tolerance >= 0.0) {
        return Err(Error::config(format!(
            "tolerance = {} must be >= 0",
            options.tolerance
        )));
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.classes()];
    for (i, ex) in dataset.examples().iter().enumerate() {
        by_class[ex.label.argmax()].push(i);
    }
    let populated: Vec<usize> = (0..dataset.classes())
        .filter(|&k| !by_class[k].is_empty())
        .collect();
    if populated.len() < 2 {
        // No opposite-label parents exist; report what was found.
        return Ok(AmbiguityReport {
            requested_pairs: options.pairs,
            pairs_found: 0,
            vanilla_disagreement: 0.0,
            global_disagreement: 0.0,
            warning: true,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let (rows, dims) = (dataset.rows(), dataset.dims());
    let mut vanilla_sum = 0.0;
    let mut global_sum = 0.0;
    let mut found = 0usize;

    for _ in 0..options.pairs {
        let class_a = populated[rng.gen_range(0..populated.len())];
        let class_b = loop {
            let c = populated[rng.gen_range(0..populated.len())];
            if c != class_a {
                break c;
            }
        };
        let base_a = dataset.get(by_class[class_a][rng.gen_range(0..by_class[class_a].len())]);
        let base_b = dataset.get(by_class[class_b][rng.gen_range(0..by_class[class_b].len())]);

        let target: Vec<f64> = base_a
            .seq
            .data()
            .iter()
            .zip(base_b.seq.data())
            .map(|(&x, &y)| {
                quantize(0.5 * (x.to_f64().expect("finite") + y.to_f64().expect("finite")))
            })
            .collect();

        let lambda_one = dyadic_lambda(&mut rng);
        let lambda_two = dyadic_lambda(&mut rng);
        let offsets_one = dyadic_offsets(target.len(), &mut rng);
        let offsets_two = dyadic_offsets(target.len(), &mut rng);

        let (a1, b1) = straddling_pair(
            &target,
            &offsets_one,
            lambda_one,
            base_a.label.clone(),
            base_b.label.clone(),
            rows,
            dims,
        )?;
        // The second pair assigns the labels the other way around.
        let (a2, b2) = straddling_pair(
            &target,
            &offsets_two,
            lambda_two,
            base_b.label.clone(),
            base_a.label.clone(),
            rows,
            dims,
        )?;
        let virtual_one = mix_pair(&a1, &b1, F::of(lambda_one))?;
        let virtual_two = mix_pair(&a2, &b2, F::of(lambda_two))?;

        if matrix_distance(&virtual_one.seq, &virtual_two.seq) > options.tolerance {
            continue;
        }
        found += 1;

        vanilla_sum += virtual_one
            .label
            .l1_distance(&virtual_two.label)
            .to_f64()
            .expect("finite");

        // One pool per construction, shared by both relabel calls.
        let pool_indices = sample_distinct(dataset.len(), config.t_ref, &mut rng);
        let pool: Vec<&Example<F>> = pool_indices.iter().map(|&i| dataset.get(i)).collect();
        let (label_one, _) = relabel_refs(&virtual_one.seq, &pool, config)?;
        let (label_two, _) = relabel_refs(&virtual_two.seq, &pool, config)?;
        global_sum += label_one.l1_distance(&label_two).to_f64().expect("finite");
    }

    Ok(AmbiguityReport {
        requested_pairs: options.pairs,
        pairs_found: found,
        vanilla_disagreement: if found > 0 {
            vanilla_sum / found as f64
        } else {
            0.0
        },
        global_disagreement: if found > 0 {
            global_sum / found as f64
        } else {
            0.0
        },
        warning: found < options.pairs,
    })
}

/// Mean max label component and its 10-bin histogram per population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremityReport {
    pub mean_max_vanilla: f64,
    pub mean_max_global: f64,
    pub vanilla_histogram: [usize; 10],
    pub global_histogram: [usize; 10],
}

fn summarize<F: Scalar>(examples: &[Example<F>]) -> (f64, [usize; 10]) {
    let mut histogram = [0usize; 10];
    let mut sum = 0.0;
    for ex in examples {
        let max = ex.label.max_component().to_f64().expect("finite");
        sum += max;
        let bin = ((max * 10.0).floor() as usize).min(9);
        histogram[bin] += 1;
    }
    (sum / examples.len() as f64, histogram)
}

/// Compare label extremity between the vanilla and global populations.
pub fn extremity_report<F: Scalar>(
    vanilla: &[Example<F>],
    global: &[Example<F>],
) -> Result<ExtremityReport> {
    if vanilla.is_empty() || global.is_empty() {
        return Err(Error::config(
            "extremity report needs nonempty vanilla and global populations",
        ));
    }
    let (mean_max_vanilla, vanilla_histogram) = summarize(vanilla);
    let (mean_max_global, global_histogram) = summarize(global);
    Ok(ExtremityReport {
        mean_max_vanilla,
        mean_max_global,
        vanilla_histogram,
        global_histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(values: Vec<f64>, label: Vec<f64>, provenance: Provenance) -> Example<f64> {
        Example::new(
            EmbeddingSequence::new(1, values.len(), values, None).unwrap(),
            SoftLabel::new(label).unwrap(),
            provenance,
        )
    }

    fn two_class_dataset() -> Dataset<f64> {
        let examples: Vec<Example<f64>> = (0..8)
            .map(|i| {
                let x = 0.125 * i as f64;
                if i % 2 == 0 {
                    example(vec![1.0 + x, 0.0, 0.5], vec![1.0, 0.0], Provenance::Original)
                } else {
                    example(vec![0.0, 1.0 + x, 0.5], vec![0.0, 1.0], Provenance::Original)
                }
            })
            .collect();
        Dataset::new(examples).unwrap()
    }

    fn report_config() -> AugmentConfig<f64> {
        AugmentConfig {
            t_ref: 6,
            s: 3,
            ..AugmentConfig::default()
        }
    }

    #[test]
    fn coincident_constructions_relabel_identically() {
        let report = ambiguity_report(
            &two_class_dataset(),
            &report_config(),
            &AmbiguityOptions {
                pairs: 50,
                ..AmbiguityOptions::default()
            },
        )
        .unwrap();
        assert_eq!(report.pairs_found, 50);
        assert!(!report.warning);
        assert_eq!(report.global_disagreement, 0.0);
        assert!(
            report.vanilla_disagreement > 0.0,
            "vanilla disagreement {}",
            report.vanilla_disagreement
        );
    }

    #[test]
    fn single_class_dataset_reports_a_warning() {
        let examples: Vec<Example<f64>> = (0..6)
            .map(|i| example(vec![i as f64, 1.0], vec![1.0, 0.0], Provenance::Original))
            .collect();
        let dataset = Dataset::new(examples).unwrap();
        let config = AugmentConfig {
            t_ref: 4,
            s: 2,
            ..AugmentConfig::default()
        };
        let report =
            ambiguity_report(&dataset, &config, &AmbiguityOptions::default()).unwrap();
        assert_eq!(report.pairs_found, 0);
        assert!(report.warning);
    }

    #[test]
    fn ambiguity_report_is_deterministic_under_seed() {
        let dataset = two_class_dataset();
        let options = AmbiguityOptions {
            pairs: 20,
            seed: 9,
            ..AmbiguityOptions::default()
        };
        let a = ambiguity_report(&dataset, &report_config(), &options).unwrap();
        let b = ambiguity_report(&dataset, &report_config(), &options).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn extremity_of_identical_pool_labels_is_one() {
        let global: Vec<Example<f64>> = (0..4)
            .map(|i| example(vec![i as f64], vec![1.0, 0.0], Provenance::Global))
            .collect();
        let vanilla = vec![example(vec![0.5], vec![0.5, 0.5], Provenance::Vanilla)];
        let report = extremity_report(&vanilla, &global).unwrap();
        assert_eq!(report.mean_max_global, 1.0);
        assert_eq!(report.global_histogram[9], 4);
    }

    #[test]
    fn extremity_of_midpoint_labels_is_a_half() {
        let vanilla: Vec<Example<f64>> = (0..3)
            .map(|i| example(vec![i as f64], vec![0.5, 0.5], Provenance::Vanilla))
            .collect();
        let global = vec![example(vec![0.0], vec![0.6, 0.4], Provenance::Global)];
        let report = extremity_report(&vanilla, &global).unwrap();
        assert_eq!(report.mean_max_vanilla, 0.5);
        assert_eq!(report.vanilla_histogram[5], 3);
    }

    #[test]
    fn empty_populations_are_rejected() {
        let some = vec![example(vec![0.0], vec![1.0, 0.0], Provenance::Vanilla)];
        assert!(extremity_report::<f64>(&[], &some).is_err());
        assert!(extremity_report::<f64>(&some, &[]).is_err());
    }
}
