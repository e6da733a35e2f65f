//! Bayesian stochastic block model with a Markov random field label prior.
//!
//! Edges of G are Bernoulli with a probability set by the communities of their
//! endpoints, block probabilities carry independent beta priors, and labels
//! follow a Potts-type prior over the taxonomy graph Q:
//!
//! ```text
//! log p(z | Q) = sum_j e[z_j] + f * #{ {j, j'} in Q : z_j = z_j' } + const
//! ```
//!
//! whose per-site conditional is `e[k] + f * (Q-neighbours of j labelled k)`.
//! With `f = 0` and `e[k] = log(1/K)` this is the uniform label prior of the
//! standard SBM.
//!
//! Labels are 0-based in memory and 1-based in every serialized form.

mod counts;
mod density;
mod sampler;

pub use counts::{edge_counts, BlockCounts};
pub use density::{
    log_joint, log_likelihood, log_likelihood_from_counts, log_mrf_prior, log_omega_prior, mrf_log_prior_term,
};
pub use sampler::{chain_rng, gibbs_run, sample_omega, sample_z, ChainRng, GibbsState};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Community label per node.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "AssignmentRepr", try_from = "AssignmentRepr")]
pub struct CommunityAssignment {
    labels: Vec<usize>,
    k: usize,
}

#[derive(Serialize, Deserialize)]
struct AssignmentRepr {
    k: usize,
    labels: Vec<usize>,
}

impl From<CommunityAssignment> for AssignmentRepr {
    fn from(z: CommunityAssignment) -> Self {
        AssignmentRepr {
            k: z.k,
            labels: z.labels.iter().map(|l| l + 1).collect(),
        }
    }
}

impl TryFrom<AssignmentRepr> for CommunityAssignment {
    type Error = Error;

    fn try_from(r: AssignmentRepr) -> Result<Self> {
        if r.labels.contains(&0) {
            return Err(Error::Validation("serialized labels are 1-based".into()));
        }
        CommunityAssignment::new(r.labels.into_iter().map(|l| l - 1).collect(), r.k)
    }
}

impl CommunityAssignment {
    /// `labels` are 0-based and must be below `k`.
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Validation("community count must be positive".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Domain(format!("label {bad} out of range for K = {k}")));
        }
        Ok(Self { labels, k })
    }

    /// Builds from 1-based labels as written in files and tables.
    pub fn from_one_based(labels: &[usize], k: usize) -> Result<Self> {
        Self::try_from(AssignmentRepr {
            k,
            labels: labels.to_vec(),
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, j: usize) -> usize {
        self.labels[j]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Members of community `k`, ascending.
    pub fn members(&self, k: usize) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.labels[j] == k).collect()
    }
}

/// Symmetric K x K matrix of block edge probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", into = "Vec<Vec<S>>", try_from = "Vec<Vec<S>>")]
pub struct EdgeProbabilityMatrix<S> {
    values: Array2<S>,
}

impl<S: Scalar> EdgeProbabilityMatrix<S> {
    pub fn new(values: Array2<S>) -> Result<Self> {
        let (r, c) = values.dim();
        if r != c || r == 0 {
            return Err(Error::Validation(format!(
                "edge probabilities must be square, got {r}x{c}"
            )));
        }
        for a in 0..r {
            for b in 0..r {
                let v = values[[a, b]];
                if !(v >= S::zero() && v <= S::one()) {
                    return Err(Error::Validation(format!("probability {v} at ({a},{b}) outside [0,1]")));
                }
                if v != values[[b, a]] {
                    return Err(Error::Validation(format!("asymmetric entry ({a},{b})")));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn constant(k: usize, value: S) -> Result<Self> {
        Self::new(Array2::from_elem((k, k), value))
    }

    /// Builds from the upper triangle listed row by row (`k <= k'`).
    pub fn from_upper_triangle(k: usize, upper: &[S]) -> Result<Self> {
        if upper.len() != k * (k + 1) / 2 {
            return Err(Error::Validation(format!(
                "upper triangle of a {k}x{k} matrix has {} entries, got {}",
                k * (k + 1) / 2,
                upper.len()
            )));
        }
        let mut values = Array2::zeros((k, k));
        let mut it = upper.iter();
        for a in 0..k {
            for b in a..k {
                let v = *it.next().expect("length checked");
                values[[a, b]] = v;
                values[[b, a]] = v;
            }
        }
        Self::new(values)
    }

    pub fn k(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, a: usize, b: usize) -> S {
        self.values[[a, b]]
    }

    pub fn values(&self) -> &Array2<S> {
        &self.values
    }

    pub fn upper_triangle(&self) -> Vec<S> {
        let k = self.k();
        (0..k)
            .flat_map(|a| (a..k).map(move |b| (a, b)))
            .map(|(a, b)| self.values[[a, b]])
            .collect()
    }

    /// Same matrix with communities renamed: new index `perm[old]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.k();
        let mut values = Array2::zeros((k, k));
        for a in 0..k {
            for b in 0..k {
                values[[perm[a], perm[b]]] = self.values[[a, b]];
            }
        }
        Self { values }
    }
}

impl<S: Scalar> From<EdgeProbabilityMatrix<S>> for Vec<Vec<S>> {
    fn from(m: EdgeProbabilityMatrix<S>) -> Self {
        m.values.rows().into_iter().map(|r| r.to_vec()).collect()
    }
}

impl<S: Scalar> TryFrom<Vec<Vec<S>>> for EdgeProbabilityMatrix<S> {
    type Error = Error;

    fn try_from(rows: Vec<Vec<S>>) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Validation("edge probability rows must have length K".into()));
        }
        let flat: Vec<S> = rows.into_iter().flatten().collect();
        Self::new(Array2::from_shape_vec((k, k), flat).expect("shape checked"))
    }
}

/// Hyperparameters and run length of one Gibbs chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SamplerConfig<S> {
    /// Number of communities K.
    pub k: usize,
    /// MRF coupling f.
    pub f: S,
    /// Per-community log base rates e_k.
    pub log_base_rates: Vec<S>,
    pub a_omega: S,
    pub b_omega: S,
    /// Total iterations T; the first T/2 are burn-in.
    pub iterations: usize,
    pub seed: u64,
    /// ChaCha stream index, used to split independent chains off one seed.
    pub stream: u64,
}

impl<S: Scalar> SamplerConfig<S> {
    /// Defaults: f = 1, e_k = log(1/K), a = b = 1, T = 1000, seed 0.
    pub fn new(k: usize) -> Self {
        Self {
            k,
            f: S::one(),
            log_base_rates: uniform_log_rates(k),
            a_omega: S::one(),
            b_omega: S::one(),
            iterations: 1000,
            seed: 0,
            stream: 0,
        }
    }

    /// Changes K, resetting the base rates to log(1/K).
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self.log_base_rates = uniform_log_rates(k);
        self
    }

    pub fn with_f(mut self, f: S) -> Self {
        self.f = f;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_beta_prior(mut self, a: S, b: S) -> Self {
        self.a_omega = a;
        self.b_omega = b;
        self
    }

    pub fn burn_in(&self) -> usize {
        self.iterations / 2
    }

    pub fn retained(&self) -> usize {
        self.iterations - self.burn_in()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Validation("K must be at least 1".into()));
        }
        if !(self.f >= S::zero()) || !self.f.is_finite() {
            return Err(Error::Validation(format!(
                "coupling f = {} must be finite and >= 0",
                self.f
            )));
        }
        if self.log_base_rates.len() != self.k {
            return Err(Error::Validation(format!(
                "{} base rates given for K = {}",
                self.log_base_rates.len(),
                self.k
            )));
        }
        if self.log_base_rates.iter().any(|e| !e.is_finite()) {
            return Err(Error::Validation("base rates must be finite".into()));
        }
        for (name, v) in [("a_omega", self.a_omega), ("b_omega", self.b_omega)] {
            if !(v > S::zero()) || !v.is_finite() {
                return Err(Error::Validation(format!("{name} = {v} must be positive")));
            }
        }
        if self.iterations < 2 || !self.iterations.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "iterations = {} must be even and at least 2",
                self.iterations
            )));
        }
        Ok(())
    }
}

fn uniform_log_rates<S: Scalar>(k: usize) -> Vec<S> {
    let e = if k == 0 {
        S::zero()
    } else {
        -S::from_count(k as u64).ln()
    };
    vec![e; k]
}

/// Post burn-in samples of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ChainTrace<S> {
    pub z_samples: Vec<CommunityAssignment>,
    pub omega_samples: Vec<EdgeProbabilityMatrix<S>>,
    /// Unnormalized log joint posterior of each retained (z, omega).
    pub log_joint: Vec<S>,
    pub config: SamplerConfig<S>,
}

impl<S> ChainTrace<S> {
    pub fn len(&self) -> usize {
        self.log_joint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_joint.is_empty()
    }
}
