//! Mixing-coefficient sampling.
//!
//! Beta(alpha, alpha) draws are built from two independent Gamma(alpha, 1)
//! draws as `g1 / (g1 + g2)`, with Gamma sampled by the Marsaglia-Tsang
//! rejection method (shape boost below 1). The extended regime draws the
//! coefficient uniformly on [-0.3, 1.3] instead. All arithmetic runs in
//! `f64` regardless of the output scalar, so the draw sequence for a given
//! seed is identical across instantiations.

use std::marker::PhantomData;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{AugmentConfig, LambdaMode};
use crate::Scalar;

/// Seeded generator for mixing coefficients.
///
/// Samplers are not shared between workers: each worker owns a clone with a
/// derived stream (see [`LambdaSampler::derive`]).
#[derive(Debug, Clone)]
pub struct LambdaSampler<F> {
    mode: LambdaMode,
    alpha: f64,
    seed: u64,
    rng: ChaCha8Rng,
    _scalar: PhantomData<F>,
}

impl<F: Scalar> LambdaSampler<F> {
    pub fn new(mode: LambdaMode, alpha: F, seed: u64) -> Result<Self> {
        let alpha = alpha
            .to_f64()
            .filter(|a| a.is_finite() && *a > 0.0)
            .ok_or_else(|| Error::config(format!("alpha = {alpha} must be > 0")))?;
        Ok(Self {
            mode,
            alpha,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            _scalar: PhantomData,
        })
    }

    pub fn from_config(config: &AugmentConfig<F>) -> Result<Self> {
        Self::new(config.lambda_mode, config.alpha, config.seed)
    }

    pub fn mode(&self) -> LambdaMode {
        self.mode
    }

    /// Clone with an independent draw stream for parallel workers.
    pub fn derive(&self, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        Self {
            mode: self.mode,
            alpha: self.alpha,
            seed: self.seed,
            rng,
            _scalar: PhantomData,
        }
    }

    /// Draw one mixing coefficient from the configured distribution.
    pub fn sample(&mut self) -> F {
        let lambda = match self.mode {
            LambdaMode::Beta => beta_symmetric(&mut self.rng, self.alpha),
            LambdaMode::ExtendedUniform => -0.3 + 1.6 * self.rng.gen::<f64>(),
        };
        F::of(lambda)
    }

    pub(crate) fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Uniform draw on the open interval (0, 1).
fn uniform_open01<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Standard normal draw via Box-Muller.
pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1 = 1.0 - rng.gen::<f64>(); // (0, 1], keeps the log finite
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Gamma(shape, 1) draw via Marsaglia-Tsang rejection.
///
/// For shape below 1 a Gamma(shape + 1) draw is boosted by
/// `u^(1/shape)`.
fn gamma<R: Rng>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        let boost = uniform_open01(rng).powf(1.0 / shape);
        return gamma(rng, shape + 1.0) * boost;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let cube_root = 1.0 + c * x;
        if cube_root <= 0.0 {
            continue;
        }
        let v = cube_root * cube_root * cube_root;
        let u = uniform_open01(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Beta(alpha, alpha) draw as a ratio of two Gamma(alpha, 1) draws.
fn beta_symmetric<R: Rng>(rng: &mut R, alpha: f64) -> f64 {
    let g1 = gamma(rng, alpha);
    let g2 = gamma(rng, alpha);
    let sum = g1 + g2;
    if sum == 0.0 {
        // Both draws underflowed; the symmetric center is the only
        // defensible value.
        return 0.5;
    }
    g1 / sum
}
