//! Validated data model shared by every stage: embedding sequences, soft
//! labels, provenance-tagged examples, and the hyperparameter bundles.
//!
//! All types are immutable after construction; constructors enforce the
//! invariants so downstream code never re-checks them.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::Scalar;

/// Which stage produced an example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Ground-truth training example (one-hot label).
    Original,
    /// Virtual example from stage one (pair-interpolated label).
    Vanilla,
    /// Virtual example re-labeled from pool similarity in stage two.
    Global,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Vanilla => "vanilla",
            Provenance::Global => "global",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Provenance::Original),
            "vanilla" => Ok(Provenance::Vanilla),
            "global" => Ok(Provenance::Global),
            other => Err(Error::Label(format!("unknown provenance {other:?}"))),
        }
    }
}

/// How the mixing coefficient is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LambdaMode {
    /// Beta(alpha, alpha) on [0, 1].
    Beta,
    /// Uniform on the extended interval [-0.3, 1.3].
    ExtendedUniform,
}

impl fmt::Display for LambdaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LambdaMode::Beta => "beta",
            LambdaMode::ExtendedUniform => "extended-uniform",
        })
    }
}

impl FromStr for LambdaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(LambdaMode::Beta),
            "extended-uniform" | "extended_uniform" => Ok(LambdaMode::ExtendedUniform),
            other => Err(Error::config(format!("unknown lambda mode {other:?}"))),
        }
    }
}

/// A padded token-embedding matrix with an attention mask.
///
/// Storage is row-major: token `i` occupies `data[i*dims .. (i+1)*dims]`.
/// The mask marks real tokens (1) versus padding (0); a sequence always
/// carries at least one real token. When no mask is supplied, every token
/// counts as real.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence<F> {
    rows: usize,
    dims: usize,
    data: Vec<F>,
    mask: Vec<u8>,
}

impl<F: Scalar> EmbeddingSequence<F> {
    /// Build from row-major data. `mask` defaults to all-ones.
    pub fn new(rows: usize, dims: usize, data: Vec<F>, mask: Option<Vec<u8>>) -> Result<Self> {
        if rows == 0 || dims == 0 {
            return Err(Error::Dimension(format!(
                "sequence shape {rows}x{dims} must have at least one row and one column"
            )));
        }
        if data.len() != rows * dims {
            return Err(Error::Dimension(format!(
                "sequence shape {rows}x{dims} needs {} values, got {}",
                rows * dims,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!(
                "non-finite value at flat position {bad}"
            )));
        }
        let mask = match mask {
            Some(mask) => {
                if mask.len() != rows {
                    return Err(Error::Dimension(format!(
                        "mask length {} does not match {rows} rows",
                        mask.len()
                    )));
                }
                if mask.iter().any(|&m| m > 1) {
                    return Err(Error::Dimension("mask entries must be 0 or 1".into()));
                }
                if mask.iter().all(|&m| m == 0) {
                    return Err(Error::Dimension("mask must keep at least one token".into()));
                }
                mask
            }
            None => vec![1; rows],
        };
        Ok(Self {
            rows,
            dims,
            data,
            mask,
        })
    }

    /// Build from nested rows, e.g. parsed JSON.
    pub fn from_rows(rows_data: Vec<Vec<F>>, mask: Option<Vec<u8>>) -> Result<Self> {
        let rows = rows_data.len();
        if rows == 0 {
            return Err(Error::Dimension("sequence needs at least one row".into()));
        }
        let dims = rows_data[0].len();
        for (i, row) in rows_data.iter().enumerate() {
            if row.len() != dims {
                return Err(Error::Dimension(format!(
                    "row {i} has {} values, expected {dims}",
                    row.len()
                )));
            }
        }
        let data = rows_data.into_iter().flatten().collect();
        Self::new(rows, dims, data, mask)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.dims)
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    /// Row-major vectorization of the matrix; length `rows * dims`.
    ///
    /// Entry `k` equals `data[k / dims][k % dims]`, and the original matrix
    /// is recoverable exactly via [`EmbeddingSequence::new`].
    pub fn flatten(&self) -> &[F] {
        &self.data
    }

    /// Sum of the rows whose mask bit is set, as a length-`dims` vector.
    pub fn masked_row_sum(&self) -> Vec<F> {
        let mut sum = vec![F::zero(); self.dims];
        for (i, &m) in self.mask.iter().enumerate() {
            if m == 1 {
                for (acc, &v) in sum.iter_mut().zip(self.row(i)) {
                    *acc = *acc + v;
                }
            }
        }
        sum
    }

    /// Number of unmasked (real) tokens; always at least 1.
    pub fn active_tokens(&self) -> usize {
        self.mask.iter().filter(|&&m| m == 1).count()
    }
}

/// A probability vector over the classes (entries in [0, 1], summing to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabel<F> {
    probs: Vec<F>,
}

impl<F: Scalar> SoftLabel<F> {
    pub fn new(probs: Vec<F>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Label("label needs at least one class".into()));
        }
        for (k, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < F::zero() || p > F::one() {
                return Err(Error::Label(format!(
                    "entry {k} = {p} is outside [0, 1]"
                )));
            }
        }
        let sum: F = probs.iter().sum();
        if (sum - F::one()).abs() > F::simplex_tolerance() {
            return Err(Error::Label(format!("entries sum to {sum}, expected 1")));
        }
        Ok(Self { probs })
    }

    pub fn one_hot(class: usize, classes: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::Label(format!(
                "class {class} out of range for {classes} classes"
            )));
        }
        let mut probs = vec![F::zero(); classes];
        probs[class] = F::one();
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }

    /// Largest probability in the label.
    pub fn max_component(&self) -> F {
        self.probs
            .iter()
            .copied()
            .fold(F::neg_infinity(), |a, b| if b > a { b } else { a })
    }

    /// Index of the largest probability; ties break toward the lower index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = k;
            }
        }
        best
    }

    pub fn l1_distance(&self, other: &Self) -> F {
        self.probs
            .iter()
            .zip(other.probs.iter())
            .map(|(&a, &b)| (a - b).abs())
            .sum()
    }
}

/// An embedding sequence plus its label and the stage that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<F> {
    pub seq: EmbeddingSequence<F>,
    pub label: SoftLabel<F>,
    pub provenance: Provenance,
}

impl<F: Scalar> Example<F> {
    pub fn new(seq: EmbeddingSequence<F>, label: SoftLabel<F>, provenance: Provenance) -> Self {
        Self {
            seq,
            label,
            provenance,
        }
    }
}

/// A nonempty collection of examples sharing one shape (rows, dims, classes).
#[derive(Debug, Clone)]
pub struct Dataset<F> {
    examples: Vec<Example<F>>,
    rows: usize,
    dims: usize,
    classes: usize,
}

impl<F: Scalar> Dataset<F> {
    /// Validate shape consistency across all examples and record (N, d, c).
    ///
    /// Per-example invariants (finite data, simplex labels) already hold by
    /// construction of the element types.
    pub fn new(examples: Vec<Example<F>>) -> Result<Self> {
        let first = examples.first().ok_or(Error::EmptyDataset)?;
        let (rows, dims) = first.seq.shape();
        let classes = first.label.classes();
        for (index, ex) in examples.iter().enumerate() {
            if ex.seq.shape() != (rows, dims) {
                return Err(Error::dimension_at(
                    index,
                    format!(
                        "sequence is {}x{}, dataset is {rows}x{dims}",
                        ex.seq.rows(),
                        ex.seq.dims()
                    ),
                ));
            }
            if ex.label.classes() != classes {
                return Err(Error::label_at(
                    index,
                    format!("has {} classes, dataset has {classes}", ex.label.classes()),
                ));
            }
        }
        Ok(Self {
            examples,
            rows,
            dims,
            classes,
        })
    }

    pub fn examples(&self) -> &[Example<F>] {
        &self.examples
    }

    pub fn get(&self, index: usize) -> &Example<F> {
        &self.examples[index]
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn into_examples(self) -> Vec<Example<F>> {
        self.examples
    }
}

/// Hyperparameters of the two augmentation stages.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig<F> {
    /// Beta shape parameter for the mixing coefficient.
    pub alpha: F,
    /// Distribution the mixing coefficient is drawn from.
    pub lambda_mode: LambdaMode,
    /// Virtual samples generated per selected pair.
    pub t_gen: usize,
    /// Size of the reference pool used for relabeling.
    pub t_ref: usize,
    /// Number of top similarities kept when weighting pool labels.
    pub s: usize,
    /// Gate threshold on the max label component; in [1/c, 1].
    pub theta: F,
    /// Similarity scale applied to the cosine.
    pub gamma: F,
    /// Guard added to similarity denominators.
    pub epsilon: F,
    /// Fraction of available pairs mixed per pass; 1.0 uses them all.
    pub pair_fraction: F,
    /// Use the mask-weighted similarity instead of the flattened one.
    pub masked: bool,
    /// Seed for pair shuffling, coefficient draws, and pool selection.
    pub seed: u64,
}

impl<F: Scalar> Default for AugmentConfig<F> {
    fn default() -> Self {
        Self {
            alpha: F::one(),
            lambda_mode: LambdaMode::Beta,
            t_gen: 8,
            t_ref: 32,
            s: 8,
            theta: F::of(0.5),
            gamma: F::one(),
            epsilon: F::of(1e-5),
            pair_fraction: F::one(),
            masked: false,
            seed: 0,
        }
    }
}

impl<F: Scalar> AugmentConfig<F> {
    /// Check every hyperparameter range against the dataset's class count.
    pub fn validate(&self, classes: usize) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > F::zero()) {
            return Err(Error::config(format!("alpha = {} must be > 0", self.alpha)));
        }
        if self.t_gen == 0 {
            return Err(Error::config("t_gen must be at least 1"));
        }
        if self.s < 2 || self.s > self.t_ref {
            return Err(Error::config(format!(
                "s = {} must satisfy 2 <= s <= t_ref = {}",
                self.s, self.t_ref
            )));
        }
        let floor = F::one() / F::of(classes as f64);
        if !(self.theta >= floor && self.theta <= F::one()) {
            return Err(Error::config(format!(
                "theta = {} must lie in [1/{classes}, 1]",
                self.theta
            )));
        }
        if !(self.gamma.is_finite() && self.gamma > F::zero()) {
            return Err(Error::config(format!("gamma = {} must be > 0", self.gamma)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > F::zero()) {
            return Err(Error::config(format!(
                "epsilon = {} must be > 0",
                self.epsilon
            )));
        }
        if !(self.pair_fraction.is_finite() && self.pair_fraction > F::zero()) {
            return Err(Error::config(format!(
                "pair_fraction = {} must be > 0",
                self.pair_fraction
            )));
        }
        Ok(())
    }
}

/// Weights of the original, vanilla, and global loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights<F> {
    pub delta: F,
    pub tau: F,
    pub eta: F,
}

impl<F: Scalar> LossWeights<F> {
    pub fn new(delta: F, tau: F, eta: F) -> Result<Self> {
        for (name, w) in [("delta", delta), ("tau", tau), ("eta", eta)] {
            if !(w.is_finite() && w >= F::zero()) {
                return Err(Error::config(format!("{name} = {w} must be >= 0")));
            }
        }
        if delta == F::zero() && tau == F::zero() && eta == F::zero() {
            return Err(Error::config("at least one loss weight must be > 0"));
        }
        Ok(Self { delta, tau, eta })
    }
}

impl<F: Scalar> Default for LossWeights<F> {
    /// delta = 1 with tau = eta = 1/8, matching the default of eight
    /// virtual samples per pair.
    fn default() -> Self {
        Self {
            delta: F::one(),
            tau: F::of(0.125),
            eta: F::of(0.125),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rows: Vec<Vec<f64>>) -> EmbeddingSequence<f64> {
        EmbeddingSequence::from_rows(rows, None).unwrap()
    }

    fn one_hot(class: usize, classes: usize) -> SoftLabel<f64> {
        SoftLabel::one_hot(class, classes).unwrap()
    }

    #[test]
    fn dataset_records_shape() {
        let examples: Vec<Example<f64>> = (0..3)
            .map(|i| {
                Example::new(
                    seq(vec![vec![i as f64, 1.0]; 4]),
                    one_hot(i % 2, 2),
                    Provenance::Original,
                )
            })
            .collect();
        let ds = Dataset::new(examples).unwrap();
        assert_eq!((ds.rows(), ds.dims(), ds.classes()), (4, 2, 2));
        assert_eq!(ds.len(), 3);
    }

    #[test]
    fn dataset_rejects_mixed_dims() {
        let examples = vec![
            Example::new(seq(vec![vec![1.0, 2.0]]), one_hot(0, 2), Provenance::Original),
            Example::new(
                seq(vec![vec![1.0, 2.0, 3.0]]),
                one_hot(1, 2),
                Provenance::Original,
            ),
        ];
        match Dataset::new(examples) {
            Err(Error::DimensionAt { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn dataset_rejects_mixed_classes() {
        let examples = vec![
            Example::new(seq(vec![vec![1.0]]), one_hot(0, 2), Provenance::Original),
            Example::new(seq(vec![vec![2.0]]), one_hot(0, 3), Provenance::Original),
        ];
        match Dataset::new(examples) {
            Err(Error::LabelAt { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected label error, got {other:?}"),
        }
    }

    #[test]
    fn label_rejects_bad_sum() {
        let err = SoftLabel::<f64>::new(vec![0.6, 0.6]).unwrap_err();
        assert!(matches!(err, Error::Label(_)), "got {err:?}");
    }

    #[test]
    fn label_rejects_out_of_range_entry() {
        assert!(SoftLabel::<f64>::new(vec![1.2, -0.2]).is_err());
        assert!(SoftLabel::<f64>::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn label_argmax_breaks_ties_low() {
        let label = SoftLabel::<f64>::new(vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        assert_eq!(label.argmax(), 0);
        assert_eq!(label.max_component(), 0.25);
    }

    #[test]
    fn flatten_is_row_major() {
        let s = seq(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(s.flatten(), &[1.0, 2.0, 3.0, 4.0]);
        let single = seq(vec![vec![5.0]]);
        assert_eq!(single.flatten(), &[5.0]);
    }

    #[test]
    fn flatten_matches_index_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let s = EmbeddingSequence::from_rows(rows.clone(), None).unwrap();
        let flat = s.flatten();
        assert_eq!(flat.len(), 12);
        for k in 0..flat.len() {
            assert_eq!(flat[k], rows[k / 4][k % 4], "mismatch at k = {k}");
        }
    }

    #[test]
    fn flatten_round_trips() {
        let s = seq(vec![vec![0.5, -1.5, 2.25], vec![9.0, 0.0, -3.0]]);
        let rebuilt =
            EmbeddingSequence::new(2, 3, s.flatten().to_vec(), Some(s.mask().to_vec())).unwrap();
        assert_eq!(rebuilt, s);
    }

    #[test]
    fn sequence_rejects_bad_masks() {
        assert!(EmbeddingSequence::new(2, 1, vec![1.0, 2.0], Some(vec![0, 0])).is_err());
        assert!(EmbeddingSequence::new(2, 1, vec![1.0, 2.0], Some(vec![1])).is_err());
        assert!(EmbeddingSequence::new(2, 1, vec![1.0, 2.0], Some(vec![2, 0])).is_err());
    }

    #[test]
    fn sequence_rejects_non_finite() {
        assert!(EmbeddingSequence::new(1, 2, vec![1.0, f64::INFINITY], None).is_err());
    }

    #[test]
    fn masked_row_sum_skips_padding() {
        let s = EmbeddingSequence::new(
            3,
            2,
            vec![1.0, 2.0, 10.0, 20.0, 100.0, 200.0],
            Some(vec![1, 0, 1]),
        )
        .unwrap();
        assert_eq!(s.masked_row_sum(), vec![101.0, 202.0]);
        assert_eq!(s.active_tokens(), 2);
    }

    #[test]
    fn config_validation_covers_ranges() {
        let mut cfg = AugmentConfig::<f64>::default();
        assert!(cfg.validate(2).is_ok());
        cfg.s = 1;
        assert!(cfg.validate(2).is_err());
        cfg.s = 40;
        assert!(cfg.validate(2).is_err());
        cfg = AugmentConfig::default();
        cfg.theta = 0.4; // below 1/c for c = 2
        assert!(cfg.validate(2).is_err());
        assert!(cfg.validate(3).is_ok());
        cfg = AugmentConfig::default();
        cfg.alpha = 0.0;
        assert!(cfg.validate(2).is_err());
        cfg = AugmentConfig::default();
        cfg.epsilon = 0.0;
        assert!(cfg.validate(2).is_err());
    }

    #[test]
    fn loss_weights_need_one_positive() {
        assert!(LossWeights::<f64>::new(0.0, 0.0, 0.0).is_err());
        assert!(LossWeights::<f64>::new(0.0, 0.0, 0.5).is_ok());
        assert!(LossWeights::<f64>::new(-1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn provenance_round_trips_as_text() {
        for p in [Provenance::Original, Provenance::Vanilla, Provenance::Global] {
            assert_eq!(p.as_str().parse::<Provenance>().unwrap(), p);
        }
        assert!("augmented".parse::<Provenance>().is_err());
    }
}
