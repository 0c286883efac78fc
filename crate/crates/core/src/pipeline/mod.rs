//! Dataset I/O, the synthetic benchmark, augmentation orchestration, and
//! the ambiguity/extremity analyses.

mod config;
mod io;
mod reports;
mod synth;

pub use config::ConfigFile;
pub use io::{load_jsonl, save_jsonl, write_jsonl, write_traces};
pub use reports::{
    ambiguity_report, extremity_report, AmbiguityOptions, AmbiguityReport, ExtremityReport,
};
pub use synth::{synth, SyntheticSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::mixer::{generate_vanilla_detailed, VanillaSample};
use crate::relabeler::{augment_global_traced, RelabelTrace};
use crate::sampling::LambdaSampler;
use crate::types::{AugmentConfig, Dataset, Example};
use crate::Scalar;

/// ChaCha stream of the pool-selection generator. Pair shuffling and
/// coefficient draws live on the sampler's default stream, so disabling
/// the relabeling stage never perturbs the vanilla output.
const POOL_STREAM: u64 = 1;

/// Everything one augmentation run produces.
#[derive(Debug, Clone)]
pub struct AugmentOutcome<F> {
    pub vanilla: Vec<VanillaSample<F>>,
    pub global: Vec<Example<F>>,
    pub traces: Vec<RelabelTrace<F>>,
}

impl<F: Scalar> AugmentOutcome<F> {
    pub fn vanilla_examples(&self) -> Vec<Example<F>> {
        self.vanilla.iter().map(|v| v.example.clone()).collect()
    }

    /// Originals, then vanilla, then global: the training population for
    /// the three-term loss.
    pub fn combined(&self, dataset: &Dataset<F>) -> Vec<Example<F>> {
        let mut all = dataset.examples().to_vec();
        all.extend(self.vanilla.iter().map(|v| v.example.clone()));
        all.extend(self.global.iter().cloned());
        all
    }
}

/// Run both augmentation stages (or only the first) under the config seed.
pub fn run_augment<F: Scalar>(
    dataset: &Dataset<F>,
    config: &AugmentConfig<F>,
    enable_global: bool,
) -> Result<AugmentOutcome<F>> {
    let mut sampler = LambdaSampler::from_config(config)?;
    let vanilla = generate_vanilla_detailed(dataset, config, &mut sampler)?;
    if !enable_global {
        return Ok(AugmentOutcome {
            vanilla,
            global: Vec::new(),
            traces: Vec::new(),
        });
    }
    let mut pool_rng = ChaCha8Rng::seed_from_u64(config.seed);
    pool_rng.set_stream(POOL_STREAM);
    let stage_two = augment_global_traced(dataset, &vanilla, config, &mut pool_rng)?;
    Ok(AugmentOutcome {
        vanilla,
        global: stage_two.examples,
        traces: stage_two.traces,
    })
}
