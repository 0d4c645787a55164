//! Federated SGD: the client-side full-batch gradient step, sample-weighted
//! aggregation on the server, subset selection, and the equivalent
//! centralized step used as an oracle.

use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::RngCore;

use crate::ann::{gradient, ModelWeights, Sample};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FedError {
    EmptyPartition,
    EmptyUpdateSet,
    ZeroSampleCount { index: usize },
    SubsetOutOfRange { k: usize, available: usize },
    InvalidLearningRate(f64),
}

impl fmt::Display for FedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FedError::EmptyPartition => f.write_str("partition has no samples"),
            FedError::EmptyUpdateSet => f.write_str("no client updates to aggregate"),
            FedError::ZeroSampleCount { index } => {
                write!(f, "client update {index} reports zero samples")
            }
            FedError::SubsetOutOfRange { k, available } => {
                write!(f, "cannot select {k} of {available} clients")
            }
            FedError::InvalidLearningRate(eta) => {
                write!(f, "learning rate {eta} outside (0, 1]")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FedError {}

/// Step size η in `(0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LearningRate(f64);

impl LearningRate {
    pub const ONE: LearningRate = LearningRate(1.0);

    pub fn new(eta: f64) -> Result<Self, FedError> {
        if eta > 0.0 && eta <= 1.0 {
            Ok(LearningRate(eta))
        } else {
            Err(FedError::InvalidLearningRate(eta))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for LearningRate {
    fn default() -> Self {
        Self::ONE
    }
}

/// One client's local dataset. Never empty.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition(Vec<Sample>);

impl Partition {
    pub fn new(samples: Vec<Sample>) -> Result<Self, FedError> {
        if samples.is_empty() {
            Err(FedError::EmptyPartition)
        } else {
            Ok(Partition(samples))
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.0
    }
}

/// A locally trained model and the number of samples behind it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClientUpdate {
    pub weights: ModelWeights,
    pub sample_count: u32,
}

fn summed_gradient(w: &ModelWeights, samples: &[Sample]) -> ModelWeights {
    samples.iter().fold(ModelWeights::zeros(), |acc, s| {
        acc.zip_map(&gradient(w, s).0, |a, g| a + g)
    })
}

fn descend(w: &ModelWeights, samples: &[Sample], eta: LearningRate) -> ModelWeights {
    let scale = eta.get() / samples.len() as f64;
    w.zip_map(&summed_gradient(w, samples), |w, g| w - scale * g)
}

/// `w − (η/|P|) Σ_{i∈P} ∇F_i(w)`: every gradient is taken at the incoming
/// `w`. This is one full-batch step, not the sequential pass of
/// [`crate::ann::train_batch`].
pub fn local_gradient_step(w: &ModelWeights, p: &Partition, eta: LearningRate) -> ModelWeights {
    descend(w, p.samples(), eta)
}

/// `w − (η/n) Σ_i ∇F_i(w)` over the whole dataset.
pub fn central_step(
    w: &ModelWeights,
    all_samples: &[Sample],
    eta: LearningRate,
) -> Result<ModelWeights, FedError> {
    if all_samples.is_empty() {
        return Err(FedError::EmptyPartition);
    }
    Ok(descend(w, all_samples, eta))
}

/// Sample-count-weighted mean `(1/n) Σ_j |P_j| w_j`, summed in slice order.
///
/// Each entry is clamped to the range spanned by the clients' entries, so
/// rounding never pushes the mean outside its convex hull and identical
/// updates aggregate to themselves exactly.
pub fn aggregate(updates: &[ClientUpdate]) -> Result<ModelWeights, FedError> {
    let first = updates.first().ok_or(FedError::EmptyUpdateSet)?;
    if let Some(index) = updates.iter().position(|u| u.sample_count == 0) {
        return Err(FedError::ZeroSampleCount { index });
    }
    let n: u64 = updates.iter().map(|u| u64::from(u.sample_count)).sum();

    let mut sum = ModelWeights::zeros();
    let mut lo = first.weights;
    let mut hi = first.weights;
    for u in updates {
        let count = f64::from(u.sample_count);
        sum = sum.zip_map(&u.weights, |acc, w| acc + count * w);
        lo = lo.zip_map(&u.weights, f64::min);
        hi = hi.zip_map(&u.weights, f64::max);
    }
    let n = n as f64;
    let mut out = sum.map(|s| s / n);
    for ((o, l), h) in out.iter_mut().zip(lo.iter()).zip(hi.iter()) {
        *o = o.clamp(l, h);
    }
    Ok(out)
}

/// Uniform random `k`-subset without replacement (partial Fisher–Yates).
/// The output order is a deterministic function of the generator state.
pub fn select_subset<T: Clone, R: RngCore + ?Sized>(
    client_ids: &[T],
    k: usize,
    rng: &mut R,
) -> Result<Vec<T>, FedError> {
    if k > client_ids.len() {
        return Err(FedError::SubsetOutOfRange {
            k,
            available: client_ids.len(),
        });
    }
    let mut pool: Vec<T> = client_ids.to_vec();
    let (chosen, _) = pool.partial_shuffle(rng, k);
    Ok(chosen.to_vec())
}
