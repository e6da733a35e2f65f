//! Two-block Gibbs sampler: omega | z, G from conjugate betas, then a fixed
//! ascending sweep of z_j | z_-j, omega, G, Q.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)` and set to
//! stream `stream`; independent chains share a seed and differ in stream.
//! Per iteration the chain draws K(K+1)/2 betas (row-major upper triangle)
//! followed by one uniform per node.

use log::debug;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use super::{
    density::log_mrf_prior_over, log_likelihood_from_counts, log_omega_prior, BlockCounts, ChainTrace,
    CommunityAssignment, EdgeProbabilityMatrix, SamplerConfig,
};
use crate::error::{Error, Result};
use crate::ingest::BinaryNetwork;
use crate::scalar::Scalar;

pub type ChainRng = ChaCha8Rng;

pub fn chain_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws every block probability from its beta full conditional.
pub fn sample_omega<S: Scalar, R: Rng + ?Sized>(
    counts: &BlockCounts,
    cfg: &SamplerConfig<S>,
    rng: &mut R,
) -> EdgeProbabilityMatrix<S> {
    let k = counts.k();
    let (a, b) = (cfg.a_omega.as_f64(), cfg.b_omega.as_f64());
    // Clamp into the open unit interval.
    let lo = S::min_positive_value();
    let hi = S::one() - S::epsilon();
    let mut values = Array2::zeros((k, k));
    for r in 0..k {
        for c in r..k {
            let m = counts.observed[[r, c]] as f64;
            let n = counts.possible[[r, c]] as f64;
            let dist = Beta::new(m + a, n - m + b).expect("positive beta shapes");
            let w = S::lit(dist.sample(rng)).max(lo).min(hi);
            values[[r, c]] = w;
            values[[c, r]] = w;
        }
    }
    EdgeProbabilityMatrix::new(values).expect("beta draws are valid probabilities")
}

/// Mutable sampler state with incrementally maintained block counts.
pub struct GibbsState<S> {
    g_adj: Vec<Vec<usize>>,
    q_adj: Vec<Vec<usize>>,
    z: Vec<usize>,
    counts: BlockCounts,
    f: S,
    log_base_rates: Vec<S>,
    ln_w: Array2<S>,
    ln_1mw: Array2<S>,
    g_in: Vec<u64>,
    q_in: Vec<u64>,
    log_cond: Vec<S>,
}

impl<S: Scalar> GibbsState<S> {
    pub fn new(g: &BinaryNetwork, q: &BinaryNetwork, z: &CommunityAssignment, cfg: &SamplerConfig<S>) -> Result<Self> {
        if g.len() != z.len() || q.len() != z.len() {
            return Err(Error::Validation(format!(
                "G has {} nodes, Q has {}, z has {}",
                g.len(),
                q.len(),
                z.len()
            )));
        }
        if z.k() != cfg.k {
            return Err(Error::Validation(format!(
                "assignment K = {} but config K = {}",
                z.k(),
                cfg.k
            )));
        }
        let k = cfg.k;
        Ok(Self {
            g_adj: g.adjacency_lists(),
            q_adj: q.adjacency_lists(),
            z: z.labels().to_vec(),
            counts: super::edge_counts(g, z)?,
            f: cfg.f,
            log_base_rates: cfg.log_base_rates.clone(),
            ln_w: Array2::zeros((k, k)),
            ln_1mw: Array2::zeros((k, k)),
            g_in: vec![0; k],
            q_in: vec![0; k],
            log_cond: vec![S::zero(); k],
        })
    }

    pub fn counts(&self) -> &BlockCounts {
        &self.counts
    }

    pub fn assignment(&self) -> CommunityAssignment {
        CommunityAssignment::new(self.z.clone(), self.counts.k()).expect("labels stay in range")
    }

    pub fn set_omega(&mut self, omega: &EdgeProbabilityMatrix<S>) {
        self.ln_w = omega.values().mapv(|w| w.floored_ln());
        self.ln_1mw = omega.values().mapv(|w| (S::one() - w).floored_ln());
    }

    /// Fills `log_cond` with the unnormalized log full conditional of node
    /// `j` over communities. Terms not involving `j` are dropped.
    fn fill_log_conditional(&mut self, j: usize) -> Result<()> {
        let k = self.counts.k();
        let current = self.z[j];
        self.g_in.iter_mut().for_each(|c| *c = 0);
        for &n in &self.g_adj[j] {
            self.g_in[self.z[n]] += 1;
        }
        let use_q = self.f != S::zero();
        if use_q {
            self.q_in.iter_mut().for_each(|c| *c = 0);
            for &n in &self.q_adj[j] {
                self.q_in[self.z[n]] += 1;
            }
        }
        for cand in 0..k {
            let mut lp = self.log_base_rates[cand];
            if use_q {
                lp = lp + self.f * S::from_count(self.q_in[cand]);
            }
            for other in 0..k {
                let linked = self.g_in[other];
                let size = self.counts.sizes[other] - u64::from(other == current);
                let unlinked = size - linked;
                if linked > 0 {
                    lp = lp + S::from_count(linked) * self.ln_w[[cand, other]];
                }
                if unlinked > 0 {
                    lp = lp + S::from_count(unlinked) * self.ln_1mw[[cand, other]];
                }
            }
            if !lp.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite log conditional for node {j}, community {cand}"
                )));
            }
            self.log_cond[cand] = lp;
        }
        Ok(())
    }

    /// Normalized full conditional of node `j` given the current state.
    pub fn full_conditional(&mut self, j: usize) -> Result<Vec<S>> {
        self.fill_log_conditional(j)?;
        let norm = crate::scalar::log_sum_exp(&self.log_cond);
        Ok(self.log_cond.iter().map(|&l| (l - norm).exp()).collect())
    }

    /// One ascending sweep over all nodes.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        for j in 0..self.z.len() {
            self.fill_log_conditional(j)?;
            let norm = crate::scalar::log_sum_exp(&self.log_cond);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = self.log_cond.len() - 1;
            for (k, &lp) in self.log_cond.iter().enumerate() {
                acc += (lp - norm).exp().as_f64();
                if u < acc {
                    chosen = k;
                    break;
                }
            }
            let from = self.z[j];
            if chosen != from {
                self.counts.move_node(from, chosen, &self.g_in);
                self.z[j] = chosen;
            }
        }
        Ok(())
    }
}

/// One sweep of label updates from `z`, returning the new labelling.
pub fn sample_z<S: Scalar, R: Rng + ?Sized>(
    g: &BinaryNetwork,
    q: &BinaryNetwork,
    omega: &EdgeProbabilityMatrix<S>,
    z: &CommunityAssignment,
    cfg: &SamplerConfig<S>,
    rng: &mut R,
) -> Result<CommunityAssignment> {
    if omega.k() != cfg.k {
        return Err(Error::Validation(format!(
            "omega is {0}x{0} but K = {1}",
            omega.k(),
            cfg.k
        )));
    }
    let mut state = GibbsState::new(g, q, z, cfg)?;
    state.set_omega(omega);
    state.sweep(rng)?;
    Ok(state.assignment())
}

/// Runs a full chain of `cfg.iterations` and keeps the second half.
pub fn gibbs_run<S: Scalar>(g: &BinaryNetwork, q: &BinaryNetwork, cfg: &SamplerConfig<S>) -> Result<ChainTrace<S>> {
    cfg.validate()?;
    if g.labels() != q.labels() {
        return Err(Error::Validation(
            "G and Q must share the same node labels in the same order".into(),
        ));
    }
    let mut rng = chain_rng(cfg.seed, cfg.stream);
    let p = g.len();
    let init: Vec<usize> = (0..p).map(|_| rng.random_range(0..cfg.k)).collect();
    let init = CommunityAssignment::new(init, cfg.k)?;
    let mut state = GibbsState::new(g, q, &init, cfg)?;

    let q_edges = q.edges();
    let burn_in = cfg.burn_in();
    let retained = cfg.retained();
    let mut trace = ChainTrace {
        z_samples: Vec::with_capacity(retained),
        omega_samples: Vec::with_capacity(retained),
        log_joint: Vec::with_capacity(retained),
        config: cfg.clone(),
    };
    for t in 0..cfg.iterations {
        let omega = sample_omega(state.counts(), cfg, &mut rng);
        state.set_omega(&omega);
        state.sweep(&mut rng)?;
        if t >= burn_in {
            let z = state.assignment();
            let lj = log_likelihood_from_counts(state.counts(), &omega)
                + log_mrf_prior_over(&z, &q_edges, cfg)
                + log_omega_prior(&omega, cfg.a_omega, cfg.b_omega);
            if !lj.is_finite() {
                return Err(Error::Numerical(format!("non-finite log joint at iteration {t}")));
            }
            trace.z_samples.push(z);
            trace.omega_samples.push(omega);
            trace.log_joint.push(lj);
        }
        if (t + 1) % 250 == 0 {
            debug!("K={} f={} iteration {}/{}", cfg.k, cfg.f, t + 1, cfg.iterations);
        }
    }
    Ok(trace)
}
