//! Stage two: gating overconfident virtual labels and recomputing them from
//! global similarity to a reference pool.
//!
//! A virtual example whose label clears the gate threshold gets a new label
//! `y* = sum_t P_t * y_t` over a pool of training examples, where `P` is a
//! softmax over the top-`s` scaled cosine similarities between the virtual
//! matrix and each pool matrix. The similarity ignores labels entirely, so
//! identical virtual matrices receive identical new labels no matter which
//! pair generated them.

use std::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mixer::VanillaSample;
use crate::types::{AugmentConfig, Dataset, EmbeddingSequence, Example, Provenance, SoftLabel};
use crate::Scalar;

/// Similarities, kept indices, and softmax weights for one relabeled sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport<F> {
    sims: Vec<F>,
    kept: Vec<usize>,
    weights: Vec<F>,
}

impl<F: Scalar> SimilarityReport<F> {
    /// Select the top-`s` similarities (ties toward the lower index) and
    /// softmax them, stabilized by subtracting the kept maximum. Weights
    /// off the kept set are exactly zero.
    pub fn from_sims(sims: Vec<F>, s: usize) -> Result<Self> {
        if s < 2 {
            return Err(Error::config(format!("s = {s} must be at least 2")));
        }
        if s > sims.len() {
            return Err(Error::config(format!(
                "s = {s} exceeds pool size {}",
                sims.len()
            )));
        }
        if sims.iter().any(|d| !d.is_finite()) {
            return Err(Error::config("similarities must be finite"));
        }

        let mut order: Vec<usize> = (0..sims.len()).collect();
        order.sort_by(|&i, &j| {
            sims[j]
                .partial_cmp(&sims[i])
                .unwrap_or(Ordering::Equal)
                .then(i.cmp(&j))
        });
        let mut kept = order[..s].to_vec();
        kept.sort_unstable();

        let top = kept
            .iter()
            .map(|&i| sims[i])
            .fold(F::neg_infinity(), F::max);
        let mut weights = vec![F::zero(); sims.len()];
        let mut total = F::zero();
        for &i in &kept {
            let e = (sims[i] - top).exp();
            weights[i] = e;
            total = total + e;
        }
        for &i in &kept {
            weights[i] = weights[i] / total;
        }

        Ok(Self {
            sims,
            kept,
            weights,
        })
    }

    /// Similarity of each pool item to the virtual sample.
    pub fn sims(&self) -> &[F] {
        &self.sims
    }

    /// Indices of the kept (top-`s`) pool items, ascending.
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// Softmax weights over the pool; zero exactly off the kept set.
    pub fn weights(&self) -> &[F] {
        &self.weights
    }
}

fn scaled_cosine<F: Scalar>(a: &[F], b: &[F], gamma: F, epsilon: F) -> F {
    let mut dot = F::zero();
    let mut norm_a = F::zero();
    let mut norm_b = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        norm_a = norm_a + x * x;
        norm_b = norm_b + y * y;
    }
    let denom = norm_a.sqrt() * norm_b.sqrt() + epsilon;
    if denom == F::zero() {
        // Only reachable with epsilon = 0 and a zero matrix, where the dot
        // product is zero as well.
        return F::zero();
    }
    gamma * dot / denom
}

/// Scaled cosine similarity between the row-major flattenings of two
/// equal-shape matrices: `gamma * <a, b> / (|a| * |b| + epsilon)`.
pub fn similarity<F: Scalar>(
    pool_item: &EmbeddingSequence<F>,
    virtual_item: &EmbeddingSequence<F>,
    gamma: F,
    epsilon: F,
) -> Result<F> {
    if pool_item.shape() != virtual_item.shape() {
        return Err(Error::Dimension(format!(
            "similarity needs equal shapes, got {:?} and {:?}",
            pool_item.shape(),
            virtual_item.shape()
        )));
    }
    Ok(scaled_cosine(
        pool_item.flatten(),
        virtual_item.flatten(),
        gamma,
        epsilon,
    ))
}

/// Mask-weighted similarity: each matrix is collapsed to the sum of its
/// unmasked rows before the scaled cosine is taken.
pub fn masked_similarity<F: Scalar>(
    pool_item: &EmbeddingSequence<F>,
    virtual_item: &EmbeddingSequence<F>,
    gamma: F,
    epsilon: F,
) -> Result<F> {
    if pool_item.dims() != virtual_item.dims() {
        return Err(Error::Dimension(format!(
            "masked similarity needs equal widths, got {} and {}",
            pool_item.dims(),
            virtual_item.dims()
        )));
    }
    let u = pool_item.masked_row_sum();
    let v = virtual_item.masked_row_sum();
    Ok(scaled_cosine(&u, &v, gamma, epsilon))
}

/// Softmax weights over the top-`s` similarities; zero elsewhere.
pub fn weights<F: Scalar>(sims: &[F], s: usize) -> Result<Vec<F>> {
    Ok(SimilarityReport::from_sims(sims.to_vec(), s)?
        .weights()
        .to_vec())
}

/// True when the label is confident enough to be relabeled.
pub fn gate<F: Scalar>(label: &SoftLabel<F>, theta: F) -> bool {
    label.max_component() >= theta
}

/// Recompute a label for `virtual_seq` as the weighted sum of pool labels.
pub fn relabel<F: Scalar>(
    virtual_seq: &EmbeddingSequence<F>,
    pool: &[Example<F>],
    config: &AugmentConfig<F>,
) -> Result<(SoftLabel<F>, SimilarityReport<F>)> {
    let refs: Vec<&Example<F>> = pool.iter().collect();
    relabel_refs(virtual_seq, &refs, config)
}

pub(crate) fn relabel_refs<F: Scalar>(
    virtual_seq: &EmbeddingSequence<F>,
    pool: &[&Example<F>],
    config: &AugmentConfig<F>,
) -> Result<(SoftLabel<F>, SimilarityReport<F>)> {
    if pool.is_empty() {
        return Err(Error::config("relabel pool is empty"));
    }
    let mut sims = Vec::with_capacity(pool.len());
    for item in pool {
        let d = if config.masked {
            masked_similarity(&item.seq, virtual_seq, config.gamma, config.epsilon)?
        } else {
            similarity(&item.seq, virtual_seq, config.gamma, config.epsilon)?
        };
        sims.push(d);
    }
    let report = SimilarityReport::from_sims(sims, config.s)?;

    let classes = pool[0].label.classes();
    let mut probs = vec![F::zero(); classes];
    for &i in report.kept() {
        let w = report.weights()[i];
        for (acc, &p) in probs.iter_mut().zip(pool[i].label.probs()) {
            *acc = *acc + w * p;
        }
    }
    // Rounding in the softmax normalization can push a component a few ulps
    // past 1; project back so the simplex invariant holds exactly.
    for p in probs.iter_mut() {
        *p = p.max(F::zero()).min(F::one());
    }
    let label = SoftLabel::new(probs)?;
    Ok((label, report))
}

/// One relabeled sample with everything needed to audit the decision.
#[derive(Debug, Clone)]
pub struct RelabelTrace<F> {
    /// Position in the vanilla input list.
    pub vanilla_index: usize,
    /// Dataset indices of the reference pool, in pool order.
    pub pool_indices: Vec<usize>,
    pub report: SimilarityReport<F>,
    /// The recomputed label.
    pub label: SoftLabel<F>,
}

/// Output of the relabeling stage.
#[derive(Debug, Clone)]
pub struct GlobalAugmentation<F> {
    pub examples: Vec<Example<F>>,
    pub traces: Vec<RelabelTrace<F>>,
}

/// Relabel every vanilla example that clears the gate.
///
/// Each gated example gets a fresh pool: its two parents followed by
/// `t_ref - 2` further dataset examples drawn uniformly without
/// replacement. Gated-out examples are not re-emitted; they stay in the
/// vanilla population. Output order follows the input order.
pub fn augment_global_traced<F: Scalar, R: Rng>(
    dataset: &Dataset<F>,
    vanilla: &[VanillaSample<F>],
    config: &AugmentConfig<F>,
    pool_rng: &mut R,
) -> Result<GlobalAugmentation<F>> {
    config.validate(dataset.classes())?;
    let n = dataset.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if config.t_ref > n {
        return Err(Error::config(format!(
            "t_ref = {} exceeds dataset size {n}",
            config.t_ref
        )));
    }

    let mut examples = Vec::new();
    let mut traces = Vec::new();
    for (vanilla_index, v) in vanilla.iter().enumerate() {
        if !gate(&v.example.label, config.theta) {
            continue;
        }
        let pool_indices = draw_pool(n, config.t_ref, v.parents, pool_rng);
        let pool: Vec<&Example<F>> = pool_indices.iter().map(|&i| dataset.get(i)).collect();
        let (label, report) = relabel_refs(&v.example.seq, &pool, config)?;
        examples.push(Example::new(
            v.example.seq.clone(),
            label.clone(),
            Provenance::Global,
        ));
        traces.push(RelabelTrace {
            vanilla_index,
            pool_indices,
            report,
            label,
        });
    }
    Ok(GlobalAugmentation { examples, traces })
}

/// Relabel every vanilla example that clears the gate, dropping the traces.
pub fn augment_global<F: Scalar, R: Rng>(
    dataset: &Dataset<F>,
    vanilla: &[VanillaSample<F>],
    config: &AugmentConfig<F>,
    pool_rng: &mut R,
) -> Result<Vec<Example<F>>> {
    Ok(augment_global_traced(dataset, vanilla, config, pool_rng)?.examples)
}

/// Pool = both parents, then a uniform draw without replacement from the
/// remaining dataset indices.
fn draw_pool<R: Rng>(
    n: usize,
    t_ref: usize,
    parents: (usize, usize),
    rng: &mut R,
) -> Vec<usize> {
    let mut pool = Vec::with_capacity(t_ref);
    pool.push(parents.0);
    if parents.1 != parents.0 {
        pool.push(parents.1);
    }

    let mut others: Vec<usize> = (0..n).filter(|i| !pool.contains(i)).collect();
    while pool.len() < t_ref {
        let pick = rng.gen_range(0..others.len());
        pool.push(others.swap_remove(pick));
    }
    pool
}
