//! Stage one: pair selection and linear-interpolation virtual examples.
//!
//! Pairs are selected by shuffling the dataset and chunking the shuffled
//! order into disjoint pairs, reshuffling for another pass when more pairs
//! are requested than one pass provides. Each selected pair emits `t_gen`
//! virtual examples with independent coefficient draws.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::sampling::LambdaSampler;
use crate::types::{AugmentConfig, Dataset, EmbeddingSequence, Example, Provenance, SoftLabel};
use crate::Scalar;

/// A vanilla virtual example plus the dataset indices of its parents.
///
/// The parent indices let the relabeling stage pin both generators into
/// the reference pool.
#[derive(Debug, Clone)]
pub struct VanillaSample<F> {
    pub example: Example<F>,
    pub parents: (usize, usize),
}

/// Interpolate two examples: `lambda * a + (1 - lambda) * b` on the
/// embedding matrix and on the label.
///
/// The label coefficients are clamped to [0, 1] and renormalized, which is
/// the identity whenever `lambda` lies in [0, 1]; coefficients outside that
/// interval (extended-uniform draws) are projected back onto the simplex.
/// Masks combine by elementwise OR.
pub fn mix_pair<F: Scalar>(a: &Example<F>, b: &Example<F>, lambda: F) -> Result<Example<F>> {
    if a.seq.shape() != b.seq.shape() {
        return Err(Error::Dimension(format!(
            "cannot mix a {}x{} sequence with a {}x{} sequence",
            a.seq.rows(),
            a.seq.dims(),
            b.seq.rows(),
            b.seq.dims()
        )));
    }
    if a.label.classes() != b.label.classes() {
        return Err(Error::Dimension(format!(
            "cannot mix a {}-class label with a {}-class label",
            a.label.classes(),
            b.label.classes()
        )));
    }
    if !lambda.is_finite() {
        return Err(Error::config(format!("lambda = {lambda} must be finite")));
    }

    let mu = F::one() - lambda;
    let data: Vec<F> = a
        .seq
        .data()
        .iter()
        .zip(b.seq.data())
        .map(|(&x, &y)| lambda * x + mu * y)
        .collect();
    let mask: Vec<u8> = a
        .seq
        .mask()
        .iter()
        .zip(b.seq.mask())
        .map(|(&x, &y)| x | y)
        .collect();
    let (rows, dims) = a.seq.shape();
    let seq = EmbeddingSequence::new(rows, dims, data, Some(mask))?;

    let mut probs: Vec<F> = a
        .label
        .probs()
        .iter()
        .zip(b.label.probs())
        .map(|(&x, &y)| lambda * x + mu * y)
        .collect();
    let mut clamped = false;
    for p in probs.iter_mut() {
        let c = p.max(F::zero()).min(F::one());
        if c != *p {
            *p = c;
            clamped = true;
        }
    }
    if clamped {
        // The raw coefficients always sum to 1, so the clamped sum is
        // strictly positive.
        let sum: F = probs.iter().sum();
        for p in probs.iter_mut() {
            *p = *p / sum;
        }
    }
    let label = SoftLabel::new(probs)?;

    Ok(Example::new(seq, label, Provenance::Vanilla))
}

/// Run the pair-selection and interpolation pass, keeping parent indices.
///
/// Output order is deterministic under the sampler's seed: pairs in
/// selection order, then draws in order within each pair.
pub fn generate_vanilla_detailed<F: Scalar>(
    dataset: &Dataset<F>,
    config: &AugmentConfig<F>,
    sampler: &mut LambdaSampler<F>,
) -> Result<Vec<VanillaSample<F>>> {
    config.validate(dataset.classes())?;
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: n,
        });
    }

    let pairs_per_pass = n / 2;
    let fraction = config
        .pair_fraction
        .to_f64()
        .expect("pair_fraction validated finite");
    let target_pairs = ((pairs_per_pass as f64 * fraction).round() as usize).max(1);

    let mut out = Vec::with_capacity(target_pairs * config.t_gen);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut selected = 0usize;
    while selected < target_pairs {
        indices.shuffle(sampler.rng_mut());
        for chunk in indices.chunks_exact(2) {
            if selected == target_pairs {
                break;
            }
            let (i, j) = (chunk[0], chunk[1]);
            for _ in 0..config.t_gen {
                let lambda = sampler.sample();
                let example = mix_pair(dataset.get(i), dataset.get(j), lambda)?;
                out.push(VanillaSample {
                    example,
                    parents: (i, j),
                });
            }
            selected += 1;
        }
    }
    Ok(out)
}

/// Same pass as [`generate_vanilla_detailed`], returning bare examples.
pub fn generate_vanilla<F: Scalar>(
    dataset: &Dataset<F>,
    config: &AugmentConfig<F>,
    sampler: &mut LambdaSampler<F>,
) -> Result<Vec<Example<F>>> {
    Ok(generate_vanilla_detailed(dataset, config, sampler)?
        .into_iter()
        .map(|v| v.example)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(rows: Vec<Vec<f64>>, label: Vec<f64>) -> Example<f64> {
        Example::new(
            EmbeddingSequence::from_rows(rows, None).unwrap(),
            SoftLabel::new(label).unwrap(),
            Provenance::Original,
        )
    }

    fn two_point_dataset() -> Dataset<f64> {
        Dataset::new(vec![
            example(vec![vec![1.0, 0.0]], vec![1.0, 0.0]),
            example(vec![vec![0.0, 1.0]], vec![0.0, 1.0]),
        ])
        .unwrap()
    }

    #[test]
    fn endpoint_lambda_one_returns_a() {
        let a = example(vec![vec![1.5, -2.25]], vec![0.75, 0.25]);
        let b = example(vec![vec![3.0, 4.0]], vec![0.0, 1.0]);
        let mixed = mix_pair(&a, &b, 1.0).unwrap();
        assert_eq!(mixed.seq.data(), a.seq.data());
        assert_eq!(mixed.label.probs(), a.label.probs());
        assert_eq!(mixed.provenance, Provenance::Vanilla);
    }

    #[test]
    fn endpoint_lambda_zero_returns_b() {
        let a = example(vec![vec![1.5, -2.25]], vec![0.75, 0.25]);
        let b = example(vec![vec![3.0, 4.0]], vec![0.0, 1.0]);
        let mixed = mix_pair(&a, &b, 0.0).unwrap();
        assert_eq!(mixed.seq.data(), b.seq.data());
        assert_eq!(mixed.label.probs(), b.label.probs());
    }

    #[test]
    fn midpoint_mixes_matrix_and_label() {
        let a = example(vec![vec![1.0, 0.0]], vec![1.0, 0.0]);
        let b = example(vec![vec![0.0, 1.0]], vec![0.0, 1.0]);
        let mixed = mix_pair(&a, &b, 0.5).unwrap();
        assert_eq!(mixed.seq.data(), &[0.5, 0.5]);
        assert_eq!(mixed.label.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn shape_mismatch_is_a_dimension_error() {
        let a = example(vec![vec![1.0, 0.0]], vec![1.0, 0.0]);
        let b = example(vec![vec![1.0, 0.0, 2.0]], vec![1.0, 0.0]);
        assert!(matches!(
            mix_pair(&a, &b, 0.5),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn extended_lambda_projects_label_back_onto_simplex() {
        let a = example(vec![vec![1.0, 0.0]], vec![1.0, 0.0]);
        let b = example(vec![vec![0.0, 1.0]], vec![0.0, 1.0]);
        let mixed = mix_pair(&a, &b, 1.2).unwrap();
        // The matrix extrapolates but the label clamps at the endpoint.
        assert_eq!(mixed.seq.data(), &[1.2, -0.19999999999999996]);
        assert_eq!(mixed.label.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn masks_combine_by_or() {
        let a = Example::new(
            EmbeddingSequence::new(2, 1, vec![1.0, 2.0], Some(vec![1, 0])).unwrap(),
            SoftLabel::new(vec![1.0, 0.0]).unwrap(),
            Provenance::Original,
        );
        let b = Example::new(
            EmbeddingSequence::new(2, 1, vec![3.0, 4.0], Some(vec![0, 1])).unwrap(),
            SoftLabel::new(vec![0.0, 1.0]).unwrap(),
            Provenance::Original,
        );
        let mixed = mix_pair(&a, &b, 0.5).unwrap();
        assert_eq!(mixed.seq.mask(), &[1, 1]);
    }

    #[test]
    fn pair_of_examples_yields_t_gen_segment_points() {
        let dataset = two_point_dataset();
        let mut config = AugmentConfig::<f64>::default();
        config.t_gen = 4;
        config.t_ref = 2;
        config.s = 2;
        let mut sampler = LambdaSampler::from_config(&config).unwrap();
        let out = generate_vanilla_detailed(&dataset, &config, &mut sampler).unwrap();
        assert_eq!(out.len(), 4);
        for v in &out {
            let (lo, hi) = (0.0f64, 1.0f64);
            for (k, &x) in v.example.seq.data().iter().enumerate() {
                assert!(
                    (lo..=hi).contains(&x),
                    "entry {k} = {x} escapes the parent segment"
                );
            }
            assert!(v.parents == (0, 1) || v.parents == (1, 0));
        }
    }

    #[test]
    fn pass_over_ten_examples_yields_five_pairs() {
        let examples: Vec<Example<f64>> = (0..10)
            .map(|i| example(vec![vec![i as f64, 1.0]], vec![1.0, 0.0]))
            .collect();
        let dataset = Dataset::new(examples).unwrap();
        let mut config = AugmentConfig::<f64>::default();
        config.t_gen = 8;
        config.t_ref = 10;
        config.s = 4;
        let mut sampler = LambdaSampler::from_config(&config).unwrap();
        let out = generate_vanilla(&dataset, &config, &mut sampler).unwrap();
        assert_eq!(out.len(), 40);
    }

    #[test]
    fn pair_fraction_scales_the_pair_count() {
        let examples: Vec<Example<f64>> = (0..10)
            .map(|i| example(vec![vec![i as f64, 1.0]], vec![1.0, 0.0]))
            .collect();
        let dataset = Dataset::new(examples).unwrap();
        let mut config = AugmentConfig::<f64>::default();
        config.t_gen = 2;
        config.t_ref = 10;
        config.s = 4;
        config.pair_fraction = 0.4; // 2 of 5 pairs
        let mut sampler = LambdaSampler::from_config(&config).unwrap();
        assert_eq!(
            generate_vanilla(&dataset, &config, &mut sampler)
                .unwrap()
                .len(),
            4
        );
        // Above 1.0 the pass reshuffles and keeps pairing.
        config.pair_fraction = 2.0;
        let mut sampler = LambdaSampler::from_config(&config).unwrap();
        assert_eq!(
            generate_vanilla(&dataset, &config, &mut sampler)
                .unwrap()
                .len(),
            20
        );
    }

    #[test]
    fn fixed_seed_reproduces_the_output_bit_exactly() {
        let examples: Vec<Example<f64>> = (0..9)
            .map(|i| {
                example(
                    vec![vec![(i as f64).sin(), (i as f64).cos()]; 3],
                    vec![1.0, 0.0],
                )
            })
            .collect();
        let dataset = Dataset::new(examples).unwrap();
        let mut config = AugmentConfig::<f64>::default();
        config.t_gen = 3;
        config.t_ref = 9;
        config.s = 4;
        config.seed = 77;
        let run = |config: &AugmentConfig<f64>| {
            let mut sampler = LambdaSampler::from_config(config).unwrap();
            generate_vanilla_detailed(&dataset, config, &mut sampler).unwrap()
        };
        let a = run(&config);
        let b = run(&config);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.parents, y.parents);
            assert_eq!(x.example.seq.data(), y.example.seq.data());
            assert_eq!(x.example.label.probs(), y.example.label.probs());
        }
    }

    #[test]
    fn single_example_dataset_is_rejected() {
        let dataset = Dataset::new(vec![example(vec![vec![1.0]], vec![1.0])]).unwrap();
        let config = AugmentConfig::<f64> {
            t_ref: 2,
            s: 2,
            theta: 1.0,
            ..AugmentConfig::default()
        };
        let mut sampler = LambdaSampler::from_config(&config).unwrap();
        assert!(matches!(
            generate_vanilla(&dataset, &config, &mut sampler),
            Err(Error::InsufficientData { needed: 2, found: 1 })
        ));
    }

    #[test]
    fn degenerate_pair_returns_the_shared_example() {
        let a = example(vec![vec![0.3, -0.7], vec![2.0, 5.0]], vec![0.25, 0.75]);
        for lambda in [-0.3, 0.0, 0.37, 0.5, 1.0, 1.3] {
            let mixed = mix_pair(&a, &a, lambda).unwrap();
            for (x, y) in mixed.seq.data().iter().zip(a.seq.data()) {
                assert!((x - y).abs() <= 1e-15 * y.abs(), "lambda {lambda}");
            }
            for (p, q) in mixed.label.probs().iter().zip(a.label.probs()) {
                assert!((p - q).abs() < 1e-15, "lambda {lambda}");
            }
        }
    }
}
