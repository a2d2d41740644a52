//! Reproducible random streams and the laws used by the simulator and the
//! randomised test.
//!
//! Every draw comes from a ChaCha8 block cipher keyed by `seed`, with
//! `stream_id` selecting one of 2^64 disjoint keystreams. Streams are plain
//! values: two workers holding the same [`RngStream`] produce the same
//! numbers, and streams with different ids never share output, so a
//! replication's result never depends on which thread ran it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Descriptor of an independent random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// A child stream keyed by `tag`. Children of the same parent with
    /// different tags, and children of different parents, get distinct ids
    /// (up to 64-bit hash collisions).
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: mix64(mix64(self.stream_id) ^ tag.wrapping_mul(0xd6e8_feb8_6659_fd93)),
        }
    }

    /// Child stream keyed by a pair of indices, e.g. (scenario, replication).
    pub fn derive2(&self, a: u64, b: u64) -> Self {
        self.derive(a).derive(b)
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// The laws needed for `b_t`, `e_t`, the randomisation draws `xi_j` and the
/// two-point measure of `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Dist {
    Gaussian { variance: f64 },
    /// Student t with `df` degrees of freedom; `df = 1` is the Cauchy law.
    StudentT { df: f64 },
    /// `+magnitude` or `-magnitude` with probability one half each.
    TwoPoint { magnitude: f64 },
    Degenerate { value: f64 },
}

impl Dist {
    pub fn standard_normal() -> Self {
        Dist::Gaussian { variance: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Dist::Gaussian { variance } if !(variance > 0.0 && variance.is_finite()) => {
                Err(Error::param(format!("Gaussian variance must be positive, got {variance}")))
            }
            Dist::StudentT { df } if !(df > 0.0 && df.is_finite()) => {
                Err(Error::param(format!("Student t degrees of freedom must be positive, got {df}")))
            }
            Dist::TwoPoint { magnitude } if !(magnitude > 0.0 && magnitude.is_finite()) => {
                Err(Error::param(format!("two-point magnitude must be positive, got {magnitude}")))
            }
            Dist::Degenerate { value } if !value.is_finite() => {
                Err(Error::param("degenerate value must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Symmetric about zero. `Degenerate(0)` counts as symmetric.
    pub fn is_symmetric(&self) -> bool {
        match *self {
            Dist::Degenerate { value } => value == 0.0,
            _ => true,
        }
    }

    /// Support points and weights, for discrete laws only.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match *self {
            Dist::TwoPoint { magnitude } => Some(vec![(magnitude, 0.5), (-magnitude, 0.5)]),
            Dist::Degenerate { value } => Some(vec![(value, 1.0)]),
            _ => None,
        }
    }

    /// `P(X <= 0)`.
    pub fn cdf_at_zero(&self) -> f64 {
        match *self {
            Dist::Degenerate { value } => {
                if value <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => 0.5,
        }
    }

    /// Validated sampler for this law.
    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        Ok(match *self {
            Dist::Gaussian { variance } => Sampler::Gaussian(
                Normal::new(0.0, variance.sqrt()).map_err(|e| Error::param(e.to_string()))?,
            ),
            // rand_distr draws N(0,1) / sqrt(chi2_df / df): exact in law.
            Dist::StudentT { df } => {
                Sampler::StudentT(StudentT::new(df).map_err(|e| Error::param(e.to_string()))?)
            }
            Dist::TwoPoint { magnitude } => Sampler::TwoPoint(magnitude),
            Dist::Degenerate { value } => Sampler::Degenerate(value),
        })
    }
}

/// A [`Dist`] whose parameters have been checked, ready to draw from.
#[derive(Debug, Clone, Copy)]
pub enum Sampler {
    Gaussian(Normal<f64>),
    StudentT(StudentT<f64>),
    TwoPoint(f64),
    Degenerate(f64),
}

impl Sampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Gaussian(d) => d.sample(rng),
            Sampler::StudentT(d) => d.sample(rng),
            Sampler::TwoPoint(m) => {
                if rng.random::<bool>() {
                    *m
                } else {
                    -*m
                }
            }
            Sampler::Degenerate(v) => *v,
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.sample(rng);
        }
    }
}

/// `n` i.i.d. draws of `dist` from the start of `stream`.
pub fn draw(stream: RngStream, dist: Dist, n: usize) -> Result<Vec<f64>> {
    let sampler = dist.sampler()?;
    let mut rng = stream.rng();
    let mut out = vec![0.0; n];
    sampler.fill(&mut rng, &mut out);
    Ok(out)
}
