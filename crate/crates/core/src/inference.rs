//! Posterior summaries and selection of the number of communities.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::BinaryNetwork;
use crate::sbm::{gibbs_run, ChainTrace, CommunityAssignment, EdgeProbabilityMatrix, SamplerConfig};
use crate::scalar::Scalar;

/// Elementwise mean of the retained omega samples.
pub fn posterior_mean_omega<S: Scalar>(trace: &ChainTrace<S>) -> Result<EdgeProbabilityMatrix<S>> {
    let first = trace
        .omega_samples
        .first()
        .ok_or_else(|| Error::Domain("trace has no omega samples".into()))?;
    let k = first.k();
    let mut offset = Array2::<S>::zeros((k, k));
    for m in &trace.omega_samples[1..] {
        offset = offset + (m.values() - first.values());
    }
    let n = S::from_count(trace.omega_samples.len() as u64);
    let mut mean = (first.values() + &offset.mapv(|v| v / n)).mapv(|v| v.max(S::zero()).min(S::one()));
    for a in 0..k {
        for b in 0..a {
            mean[[a, b]] = mean[[b, a]];
        }
    }
    EdgeProbabilityMatrix::new(mean)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct MapEstimate<S> {
    pub z: CommunityAssignment,
    pub log_joint: S,
    /// Position within the retained samples (0-based).
    pub index: usize,
}

/// Retained sample with the largest stored log joint; the earliest wins ties.
pub fn map_labels<S: Scalar>(trace: &ChainTrace<S>) -> Result<MapEstimate<S>> {
    if trace.z_samples.is_empty() || trace.log_joint.len() != trace.z_samples.len() {
        return Err(Error::Domain(
            "trace has no retained samples with log joint values".into(),
        ));
    }
    let mut best = 0;
    for (i, &v) in trace.log_joint.iter().enumerate().skip(1) {
        if v > trace.log_joint[best] {
            best = i;
        }
    }
    Ok(MapEstimate {
        z: trace.z_samples[best].clone(),
        log_joint: trace.log_joint[best],
        index: best,
    })
}

/// One label parameter plus K(K+1)/2 block probabilities.
pub fn parameter_count(k: usize) -> usize {
    1 + k * (k + 1) / 2
}

pub fn bic<S: Scalar>(map_log_joint: S, k: usize, p: usize) -> S {
    S::from_count(parameter_count(k) as u64) * S::from_count(p as u64).ln() - S::lit(2.0) * map_log_joint
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct FitSummary<S> {
    pub k: usize,
    pub p: usize,
    pub nu: usize,
    pub omega_hat: EdgeProbabilityMatrix<S>,
    pub z_map: CommunityAssignment,
    pub map_log_joint: S,
    pub map_index: usize,
    pub bic: S,
    pub config: SamplerConfig<S>,
}

impl<S: Scalar> FitSummary<S> {
    pub fn from_trace(trace: &ChainTrace<S>) -> Result<Self> {
        let map = map_labels(trace)?;
        let k = trace.config.k;
        let p = map.z.len();
        Ok(Self {
            k,
            p,
            nu: parameter_count(k),
            omega_hat: posterior_mean_omega(trace)?,
            bic: bic(map.log_joint, k, p),
            z_map: map.z,
            map_log_joint: map.log_joint,
            map_index: map.index,
            config: trace.config.clone(),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMethod {
    #[default]
    MinBic,
    /// Largest positive second difference of the BIC curve.
    Elbow,
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMethod::MinBic => "min-bic",
            SelectionMethod::Elbow => "elbow",
        })
    }
}

impl FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-bic" | "min_bic" => Ok(SelectionMethod::MinBic),
            "elbow" => Ok(SelectionMethod::Elbow),
            other => Err(Error::Validation(format!("unknown selection method `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct KSelection<S> {
    pub grid: Vec<usize>,
    pub bic_curve: Vec<(usize, S)>,
    pub chosen_k: usize,
    pub method: SelectionMethod,
    pub fits: Vec<FitSummary<S>>,
}

/// Picks K from a BIC curve over an ascending grid.
///
/// The elbow rule needs at least three points and a positive curvature;
/// otherwise it falls back to the minimum.
pub fn choose_k<S: Scalar>(curve: &[(usize, S)], method: SelectionMethod) -> Result<usize> {
    if curve.is_empty() {
        return Err(Error::Domain("empty BIC curve".into()));
    }
    let min_bic = || {
        let mut best = 0;
        for (i, &(_, b)) in curve.iter().enumerate() {
            if b < curve[best].1 {
                best = i;
            }
        }
        curve[best].0
    };
    match method {
        SelectionMethod::MinBic => Ok(min_bic()),
        SelectionMethod::Elbow => {
            let mut best: Option<(usize, S)> = None;
            for i in 1..curve.len().saturating_sub(1) {
                let d2 = curve[i - 1].1 - S::lit(2.0) * curve[i].1 + curve[i + 1].1;
                if d2 > S::zero() && best.is_none_or(|(_, b)| d2 > b) {
                    best = Some((curve[i].0, d2));
                }
            }
            Ok(best.map_or_else(min_bic, |(k, _)| k))
        }
    }
}

/// Fits every K in `grid` and picks one by BIC.
///
/// Each K runs on the base seed with ChaCha stream `K`, so the fit for a given
/// K does not depend on the rest of the grid. Base rates are reset to
/// log(1/K) per fit.
pub fn select_k<S: Scalar>(
    g: &BinaryNetwork,
    q: &BinaryNetwork,
    base_cfg: &SamplerConfig<S>,
    grid: &[usize],
    method: SelectionMethod,
) -> Result<KSelection<S>> {
    if grid.is_empty() {
        return Err(Error::Validation("K grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("K grid must be strictly ascending".into()));
    }
    if let Some(&bad) = grid.iter().find(|&&k| k == 0 || k > g.len()) {
        return Err(Error::Validation(format!("K = {bad} outside 1..={}", g.len())));
    }
    let fits: Vec<FitSummary<S>> = grid
        .par_iter()
        .map(|&k| {
            let cfg = base_cfg.clone().with_k(k).with_stream(k as u64);
            FitSummary::from_trace(&gibbs_run(g, q, &cfg)?)
        })
        .collect::<Result<_>>()?;
    let bic_curve: Vec<(usize, S)> = fits.iter().map(|f| (f.k, f.bic)).collect();
    Ok(KSelection {
        grid: grid.to_vec(),
        chosen_k: choose_k(&bic_curve, method)?,
        bic_curve,
        method,
        fits,
    })
}
