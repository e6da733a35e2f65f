//! Synthetic networks with planted communities and genus labels of a chosen
//! informativeness.
//!
//! Each replicate uses ChaCha8 seeded with the scenario seed and set to the
//! replicate index as its stream. Draw order: community labels, genus labels
//! (with retries), between-block probabilities, then edges.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::BinaryNetwork;
use crate::metrics::ari;
use crate::sbm::{chain_rng, CommunityAssignment, EdgeProbabilityMatrix};
use crate::scalar::Scalar;

/// Attempts at drawing genus labels before giving up on a band.
pub const MAX_LABEL_ATTEMPTS: usize = 100;

/// How well genus labels predict communities, measured by ARI(z, tau).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    /// ARI <= 0.3
    Weak,
    /// 0.3 < ARI <= 0.7
    Moderate,
    /// ARI > 0.7
    Strong,
}

impl Strength {
    pub const ALL: [Strength; 3] = [Strength::Weak, Strength::Moderate, Strength::Strong];

    pub fn contains(self, ari: f64) -> bool {
        match self {
            Strength::Weak => ari <= 0.3,
            Strength::Moderate => ari > 0.3 && ari <= 0.7,
            Strength::Strong => ari > 0.7 && ari <= 1.0,
        }
    }

    /// Distance from `ari` to the band, 0 inside it.
    fn miss(self, ari: f64) -> f64 {
        let (lo, hi) = match self {
            Strength::Weak => (f64::NEG_INFINITY, 0.3),
            Strength::Moderate => (0.3, 0.7),
            Strength::Strong => (0.7, 1.0),
        };
        if self.contains(ari) {
            0.0
        } else if ari <= lo {
            lo - ari
        } else {
            ari - hi
        }
    }

    /// Probability that a taxon takes its community's home genus. Home
    /// genera are exclusive to their community; other taxa draw uniformly
    /// from the remaining genera.
    pub fn aligned_fraction(self) -> f64 {
        match self {
            Strength::Weak => 0.0,
            Strength::Moderate => 0.6,
            Strength::Strong => 0.95,
        }
    }
}

impl fmt::Display for Strength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strength::Weak => "weak",
            Strength::Moderate => "moderate",
            Strength::Strong => "strong",
        })
    }
}

impl FromStr for Strength {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weak" => Ok(Strength::Weak),
            "moderate" => Ok(Strength::Moderate),
            "strong" => Ok(Strength::Strong),
            other => Err(Error::Validation(format!("unknown strength `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ScenarioSpec<S> {
    pub name: String,
    pub p: usize,
    pub k: usize,
    /// Number of genera R.
    pub r: usize,
    pub strength: Strength,
    pub within_probs: Vec<S>,
    /// Between-block probabilities are Uniform(lo, hi).
    pub between: (S, S),
    pub replicates: usize,
    pub seed: u64,
}

impl<S: Scalar> ScenarioSpec<S> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(format!("scenario {}: {m}", self.name)));
        if self.p < 2 {
            return bad(format!("p = {} must be at least 2", self.p));
        }
        if self.k == 0 || self.k > self.p {
            return bad(format!("K = {} outside 1..={}", self.k, self.p));
        }
        if self.r == 0 {
            return bad("R must be positive".into());
        }
        if self.strength != Strength::Weak && self.r < self.k {
            return bad(format!("{} strength needs R >= K, got R = {}", self.strength, self.r));
        }
        if self.within_probs.len() != self.k {
            return bad(format!(
                "{} within probabilities for K = {}",
                self.within_probs.len(),
                self.k
            ));
        }
        if self.within_probs.iter().any(|&w| !(w > S::zero() && w < S::one())) {
            return bad("within probabilities must lie in (0, 1)".into());
        }
        let (lo, hi) = self.between;
        if !(lo >= S::zero() && lo < hi && hi <= S::one()) {
            return bad(format!("between range ({lo}, {hi}) invalid"));
        }
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        Ok(())
    }
}

/// The nine default scenarios: K in {3, 6, 9} crossed with the three
/// strengths, p = 180, R = 30, between ~ Uniform(0, 0.1). Scenario `i` (K
/// major, strength minor) gets seed `seed + i`.
pub fn default_suite<S: Scalar>(replicates: usize, seed: u64) -> Vec<ScenarioSpec<S>> {
    let within: [&[f64]; 3] = [
        &[0.3, 0.6, 0.95],
        &[0.1, 0.3, 0.5, 0.7, 0.9, 0.97],
        &[0.12, 0.2, 0.3, 0.4, 0.5, 0.7, 0.8, 0.9, 0.99],
    ];
    let mut specs = Vec::with_capacity(9);
    for probs in within {
        for strength in Strength::ALL {
            let k = probs.len();
            specs.push(ScenarioSpec {
                name: format!("K{k}-{strength}"),
                p: 180,
                k,
                r: 30,
                strength,
                within_probs: probs.iter().map(|&w| S::lit(w)).collect(),
                between: (S::zero(), S::lit(0.1)),
                replicates,
                seed: seed + specs.len() as u64,
            });
        }
    }
    specs
}

/// Draws communities uniformly, then genus labels until ARI(z, tau) lands in
/// the scenario's band. Returns `(z, tau, achieved ARI)`.
pub fn assign_labels<S: Scalar, R: Rng + ?Sized>(
    spec: &ScenarioSpec<S>,
    rng: &mut R,
) -> Result<(CommunityAssignment, Vec<usize>, f64)> {
    spec.validate()?;
    let z: Vec<usize> = (0..spec.p).map(|_| rng.random_range(0..spec.k)).collect();
    let mut best = f64::NAN;
    for _ in 0..MAX_LABEL_ATTEMPTS {
        let tau = draw_genera(spec, &z, rng);
        let score = ari(&z, &tau)?;
        if spec.strength.contains(score) {
            return Ok((CommunityAssignment::new(z, spec.k)?, tau, score));
        }
        if best.is_nan() || spec.strength.miss(score) < spec.strength.miss(best) {
            best = score;
        }
    }
    Err(Error::Generation {
        message: format!(
            "scenario {}: no {} labelling in {MAX_LABEL_ATTEMPTS} attempts",
            spec.name, spec.strength
        ),
        best_ari: best,
    })
}

fn draw_genera<S, R: Rng + ?Sized>(spec: &ScenarioSpec<S>, z: &[usize], rng: &mut R) -> Vec<usize> {
    let aligned = spec.strength.aligned_fraction();
    if aligned == 0.0 {
        return z.iter().map(|_| rng.random_range(0..spec.r)).collect();
    }
    let homes = sample_indices(rng, spec.r, spec.k).into_vec();
    let mut background: Vec<usize> = (0..spec.r).filter(|g| !homes.contains(g)).collect();
    if background.is_empty() {
        background = (0..spec.r).collect();
    }
    z.iter()
        .map(|&k| {
            if rng.random::<f64>() < aligned {
                homes[k]
            } else {
                background[rng.random_range(0..background.len())]
            }
        })
        .collect()
}

/// Within-block probabilities on the diagonal, between-block ones drawn
/// uniformly per pair (row-major upper triangle).
pub fn draw_omega<S: Scalar, R: Rng + ?Sized>(spec: &ScenarioSpec<S>, rng: &mut R) -> Result<EdgeProbabilityMatrix<S>> {
    let k = spec.k;
    let (lo, hi) = (spec.between.0.as_f64(), spec.between.1.as_f64());
    let mut values = Array2::zeros((k, k));
    for a in 0..k {
        values[[a, a]] = spec.within_probs[a];
        for b in a + 1..k {
            let w = S::lit(rng.random_range(lo..hi));
            values[[a, b]] = w;
            values[[b, a]] = w;
        }
    }
    EdgeProbabilityMatrix::new(values)
}

/// Node names used for synthetic taxa.
pub fn taxon_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("t{j}")).collect()
}

/// Independent Bernoulli edge per unordered pair, row-major over `a < b`.
pub fn sample_network<S: Scalar, R: Rng + ?Sized>(
    z: &CommunityAssignment,
    omega: &EdgeProbabilityMatrix<S>,
    rng: &mut R,
) -> Result<BinaryNetwork> {
    if omega.k() != z.k() {
        return Err(Error::Domain(format!("omega is {0}x{0} but K = {1}", omega.k(), z.k())));
    }
    let p = z.len();
    let mut g = BinaryNetwork::empty(taxon_names(p));
    for a in 0..p {
        for b in a + 1..p {
            let w = omega.get(z.get(a), z.get(b)).as_f64();
            if rng.random::<f64>() < w {
                g.set_edge(a, b, true);
            }
        }
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset<S> {
    pub scenario: ScenarioSpec<S>,
    pub replicate: usize,
    pub g: BinaryNetwork,
    pub z_true: CommunityAssignment,
    /// 0-based genus index per taxon.
    pub tau: Vec<usize>,
    pub omega_spec: EdgeProbabilityMatrix<S>,
    pub achieved_strength_ari: f64,
}

pub fn generate_replicate<S: Scalar>(spec: &ScenarioSpec<S>, replicate: usize) -> Result<SyntheticDataset<S>> {
    let mut rng = chain_rng(spec.seed, replicate as u64);
    let (z_true, tau, achieved) = assign_labels(spec, &mut rng)?;
    let omega_spec = draw_omega(spec, &mut rng)?;
    let g = sample_network(&z_true, &omega_spec, &mut rng)?;
    Ok(SyntheticDataset {
        scenario: spec.clone(),
        replicate,
        g,
        z_true,
        tau,
        omega_spec,
        achieved_strength_ari: achieved,
    })
}

/// All replicates of all scenarios, scenario-major, generated in parallel.
pub fn generate_suite<S: Scalar>(specs: &[ScenarioSpec<S>]) -> Result<Vec<SyntheticDataset<S>>> {
    for s in specs {
        s.validate()?;
    }
    let jobs: Vec<(usize, usize)> = specs
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.replicates).map(move |r| (i, r)))
        .collect();
    jobs.par_iter()
        .map(|&(i, r)| generate_replicate(&specs[i], r))
        .collect()
}
