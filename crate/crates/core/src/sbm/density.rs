use statrs::function::beta::ln_beta;

use super::{edge_counts, BlockCounts, CommunityAssignment, EdgeProbabilityMatrix, SamplerConfig};
use crate::error::{Error, Result};
use crate::ingest::BinaryNetwork;
use crate::scalar::Scalar;

/// `m ln(w) + (n - m) ln(1 - w)`, taking `0 * ln 0 = 0`.
fn bernoulli_block<S: Scalar>(m: u64, n: u64, w: S) -> S {
    let mut acc = S::zero();
    if m > 0 {
        acc = acc + S::from_count(m) * w.ln();
    }
    if n > m {
        acc = acc + S::from_count(n - m) * (S::one() - w).ln();
    }
    acc
}

/// Block log-likelihood of G summed over `k <= k'`.
///
/// A block with probability exactly 0 or 1 contributes 0 when its counts
/// agree with that certainty and negative infinity otherwise.
pub fn log_likelihood_from_counts<S: Scalar>(counts: &BlockCounts, omega: &EdgeProbabilityMatrix<S>) -> S {
    let k = counts.k();
    let mut total = S::zero();
    for a in 0..k {
        for b in a..k {
            total = total + bernoulli_block(counts.observed[[a, b]], counts.possible[[a, b]], omega.get(a, b));
        }
    }
    total
}

pub fn log_likelihood<S: Scalar>(
    g: &BinaryNetwork,
    z: &CommunityAssignment,
    omega: &EdgeProbabilityMatrix<S>,
) -> Result<S> {
    if omega.k() != z.k() {
        return Err(Error::Domain(format!("omega is {0}x{0} but K = {1}", omega.k(), z.k())));
    }
    Ok(log_likelihood_from_counts(&edge_counts(g, z)?, omega))
}

/// Unnormalized log prior weight of putting node `j` in community `k`
/// given everyone else: `e_k + f * (Q-neighbours of j labelled k)`.
pub fn mrf_log_prior_term<S: Scalar>(
    j: usize,
    k: usize,
    z: &CommunityAssignment,
    q: &BinaryNetwork,
    cfg: &SamplerConfig<S>,
) -> S {
    let agree = q.neighbors(j).filter(|&n| z.get(n) == k).count();
    cfg.log_base_rates[k] + cfg.f * S::from_count(agree as u64)
}

/// Log MRF prior of a whole labelling, up to its normalizing constant.
/// Each same-label Q pair is counted once.
pub fn log_mrf_prior<S: Scalar>(z: &CommunityAssignment, q: &BinaryNetwork, cfg: &SamplerConfig<S>) -> S {
    log_mrf_prior_over(z, &q.edges(), cfg)
}

pub(crate) fn log_mrf_prior_over<S: Scalar>(
    z: &CommunityAssignment,
    q_edges: &[(usize, usize)],
    cfg: &SamplerConfig<S>,
) -> S {
    let base: S = z.labels().iter().map(|&l| cfg.log_base_rates[l]).sum();
    if cfg.f == S::zero() {
        return base;
    }
    let agree = q_edges.iter().filter(|&&(a, b)| z.get(a) == z.get(b)).count();
    base + cfg.f * S::from_count(agree as u64)
}

/// Independent Beta(a, b) log densities over the upper triangle of omega.
pub fn log_omega_prior<S: Scalar>(omega: &EdgeProbabilityMatrix<S>, a: S, b: S) -> S {
    let norm = S::lit(ln_beta(a.as_f64(), b.as_f64()));
    let one = S::one();
    omega
        .upper_triangle()
        .into_iter()
        .map(|w| {
            let mut v = -norm;
            if a != one {
                v = v + (a - one) * w.ln();
            }
            if b != one {
                v = v + (b - one) * (one - w).ln();
            }
            v
        })
        .sum()
}

/// Unnormalized log joint posterior of `(z, omega)` given G and Q.
pub fn log_joint<S: Scalar>(
    g: &BinaryNetwork,
    q: &BinaryNetwork,
    z: &CommunityAssignment,
    omega: &EdgeProbabilityMatrix<S>,
    cfg: &SamplerConfig<S>,
) -> Result<S> {
    Ok(log_likelihood(g, z, omega)? + log_mrf_prior(z, q, cfg) + log_omega_prior(omega, cfg.a_omega, cfg.b_omega))
}
