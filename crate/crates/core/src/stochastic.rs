//! Reproducible randomness: gradient-noise and sampling-time models, plus
//! per-(thread, purpose) RNG substreams that make traces independent of event
//! interleaving.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};

/// Additive gradient noise; i.i.d. N(0, sigma^2) in every dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl NoiseModel {
    pub fn gaussian_iid(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::Parameter(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(NoiseModel { sigma })
    }

    /// Fills `out` with m i.i.d. N(0, sigma^2) draws.
    pub fn draw_into(&self, out: &mut [f64], rng: &mut ChaCha8Rng) {
        let normal = Normal::new(0.0, self.sigma).expect("sigma validated at construction");
        for o in out.iter_mut() {
            *o = normal.sample(rng);
        }
    }

    pub fn draw(&self, m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut v = vec![0.0; m];
        self.draw_into(&mut v, rng);
        v
    }
}

/// Distribution family for per-sample durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingKind {
    Constant,
    Exponential,
    Lognormal,
}

/// Sampling-time model: positive i.i.d. durations with the given mean.
/// `dispersion` is the coefficient of variation, used by the lognormal kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingTimeModel {
    pub kind: TimingKind,
    pub mean: f64,
    #[serde(default)]
    pub dispersion: f64,
}

impl SamplingTimeModel {
    pub fn constant(mean: f64) -> Result<Self> {
        Self::new(TimingKind::Constant, mean, 0.0)
    }

    pub fn new(kind: TimingKind, mean: f64, dispersion: f64) -> Result<Self> {
        if !(mean > 0.0) {
            return Err(Error::Parameter(format!("sampling-time mean must be > 0, got {mean}")));
        }
        if dispersion < 0.0 {
            return Err(Error::Parameter(format!(
                "sampling-time dispersion must be >= 0, got {dispersion}"
            )));
        }
        Ok(SamplingTimeModel { kind, mean, dispersion })
    }

    /// Draws one strictly positive duration; the constant kind returns the
    /// mean exactly and consumes no randomness.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let raw = match self.kind {
            TimingKind::Constant => self.mean,
            TimingKind::Exponential => {
                let exp = Exp::new(1.0 / self.mean).expect("mean validated");
                exp.sample(rng)
            }
            TimingKind::Lognormal => {
                // Parameterized so the mean is exact and CV = dispersion.
                let s2 = (1.0 + self.dispersion * self.dispersion).ln();
                let mu = self.mean.ln() - 0.5 * s2;
                let ln = LogNormal::new(mu, s2.sqrt()).expect("parameters validated");
                ln.sample(rng)
            }
        };
        raw.max(self.mean * 1e-12)
    }
}

/// Sampling-time model for the centralized scheme with synchronization
/// overhead: mean scaled to N^(1/beta) times the single-sample mean.
pub fn overhead_sampling_time(base: &SamplingTimeModel, n: usize, beta: f64) -> Result<SamplingTimeModel> {
    if !(beta > 1.0) {
        return Err(Error::Parameter(format!("overhead exponent beta must be > 1, got {beta}")));
    }
    SamplingTimeModel::new(base.kind, (n as f64).powf(1.0 / beta) * base.mean, base.dispersion)
}

/// RNG purpose tag; each (thread, purpose) pair owns an independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Noise,
    Timing,
    Init,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Noise => 0x4e4f495345,
            Purpose::Timing => 0x54494d494e47,
            Purpose::Init => 0x494e4954,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic per-(thread, purpose) substreams derived from a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    master_seed: u64,
}

impl RngStreams {
    pub fn new(master_seed: u64) -> Self {
        RngStreams { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Streams for the r-th replicate of an ensemble.
    pub fn replicate(&self, r: usize) -> RngStreams {
        RngStreams {
            master_seed: splitmix64(self.master_seed ^ (r as u64).wrapping_mul(0xa076_1d64_78bd_642f)),
        }
    }

    /// The counter-based substream owned by (thread, purpose).
    pub fn stream(&self, thread: usize, purpose: Purpose) -> ChaCha8Rng {
        let a = splitmix64(self.master_seed ^ (thread as u64 + 1).wrapping_mul(0xe703_7ed1_a0b4_28db));
        let seed = splitmix64(a ^ purpose.tag().wrapping_mul(0x8ebc_6af0_9c88_c6e3));
        ChaCha8Rng::seed_from_u64(seed)
    }
}
