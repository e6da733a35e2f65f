//! Co-occurrence network estimation and taxonomy adjacency.
//!
//! An edge joins two taxa when the Spearman correlation of their transformed
//! abundances is significant after Benjamini-Hochberg adjustment. Pairs whose
//! correlation is undefined (a constant column) are left out of the multiple
//! testing family and never produce an edge.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::ingest::{BinaryNetwork, TaxonomyMap};
use crate::scalar::Scalar;
use crate::transform::TransformedMatrix;

/// Mid-ranks (1-based, ties share their average rank).
pub fn mid_ranks<S: Scalar>(values: &[S]) -> Vec<S> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![S::zero(); values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = S::from_count((start + 1 + end) as u64) / S::lit(2.0);
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Deviations from the mean and their norm; `None` for a constant vector.
fn centred(ranks: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = ranks.len() as f64;
    let mean = ranks.iter().sum::<f64>() / n;
    let dev: Vec<f64> = ranks.iter().map(|r| r - mean).collect();
    let ss: f64 = dev.iter().map(|d| d * d).sum();
    (ss > 0.0).then(|| (dev, ss.sqrt()))
}

fn pearson_centred(a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)) -> f64 {
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    (dot / (a.1 * b.1)).clamp(-1.0, 1.0)
}

/// Spearman rank correlation: Pearson correlation of mid-ranks.
pub fn spearman_rho<S: Scalar>(a: &[S], b: &[S]) -> Result<S> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!("lengths differ ({} vs {})", a.len(), b.len())));
    }
    if a.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 observations, got {}", a.len())));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite observation".into()));
    }
    let ra = as_f64(&mid_ranks(a));
    let rb = as_f64(&mid_ranks(b));
    match (centred(&ra), centred(&rb)) {
        (Some(ca), Some(cb)) => Ok(S::lit(pearson_centred(&ca, &cb))),
        _ => Err(Error::UndefinedCorrelation("constant vector".into())),
    }
}

fn as_f64<S: Scalar>(xs: &[S]) -> Vec<f64> {
    xs.iter().map(|x| x.as_f64()).collect()
}

/// Two-sided p-value for `H0: rho = 0` from the t approximation with
/// `n - 2` degrees of freedom.
///
/// The t tail is evaluated as a regularized incomplete beta function,
/// `P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)`, and `df/(df+t^2) = 1 - rho^2`.
pub fn spearman_pvalue<S: Scalar>(rho: S, n: usize) -> Result<S> {
    if n < 3 {
        return Err(Error::Domain(format!("need at least 3 observations, got {n}")));
    }
    let r = rho.as_f64();
    if !(r.abs() <= 1.0) {
        return Err(Error::Domain(format!("correlation {r} outside [-1, 1]")));
    }
    if r.abs() == 1.0 {
        return Ok(S::zero());
    }
    let df = (n - 2) as f64;
    let p = beta_reg(df / 2.0, 0.5, 1.0 - r * r);
    Ok(S::lit(p.clamp(0.0, 1.0)))
}

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
pub fn bh_adjust<S: Scalar>(p_values: &[S]) -> Vec<S> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).expect("finite p-values"));
    let mut adjusted = vec![S::zero(); m];
    let mut running = S::one();
    let m_s = S::from_count(m as u64);
    for (rank0, &i) in order.iter().enumerate().rev() {
        let candidate = p_values[i] * (m_s / S::from_count(rank0 as u64 + 1));
        running = running.min(candidate);
        adjusted[i] = running;
    }
    adjusted
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairStat<S> {
    pub a: usize,
    pub b: usize,
    /// `None` when the correlation is undefined.
    pub rho: Option<S>,
    pub p_value: Option<S>,
    pub adjusted_p: Option<S>,
    pub edge: bool,
}

/// Pairwise correlation tests, one entry per `a < b` in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationResult<S> {
    pub taxa: Vec<String>,
    pub pairs: Vec<PairStat<S>>,
}

/// Estimates the co-occurrence network G from transformed abundances.
///
/// `g[a][b] = 1` iff the BH-adjusted p-value of the pair is strictly below
/// `alpha`.
pub fn build_cooccurrence<S: Scalar>(
    v: &TransformedMatrix<S>,
    alpha: S,
) -> Result<(BinaryNetwork, CorrelationResult<S>)> {
    let (n, p) = v.values.dim();
    if p < 2 {
        return Err(Error::Domain(format!("need at least 2 taxa, got {p}")));
    }
    if n < 3 {
        return Err(Error::Domain(format!("need at least 3 samples, got {n}")));
    }
    if !(alpha >= S::zero() && alpha <= S::one()) {
        return Err(Error::Validation(format!("alpha {alpha} outside [0, 1]")));
    }
    let columns: Vec<Option<(Vec<f64>, f64)>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let col: Vec<S> = v.values.column(j).to_vec();
            centred(&as_f64(&mid_ranks(&col)))
        })
        .collect();
    let index: Vec<(usize, usize)> = (0..p).flat_map(|a| (a + 1..p).map(move |b| (a, b))).collect();
    let tested: Vec<(Option<S>, Option<S>)> = index
        .par_iter()
        .map(|&(a, b)| match (&columns[a], &columns[b]) {
            (Some(ca), Some(cb)) => {
                let rho = S::lit(pearson_centred(ca, cb));
                let p = spearman_pvalue(rho, n).expect("rho in range and n >= 3");
                (Some(rho), Some(p))
            }
            _ => (None, None),
        })
        .collect();

    let family: Vec<S> = tested.iter().filter_map(|t| t.1).collect();
    let mut adjusted = bh_adjust(&family).into_iter();

    let mut g = BinaryNetwork::empty(v.taxa.clone());
    let mut pairs = Vec::with_capacity(index.len());
    for (&(a, b), (rho, p_value)) in index.iter().zip(tested) {
        let adjusted_p = p_value.map(|_| adjusted.next().expect("one adjusted value per test"));
        let edge = adjusted_p.is_some_and(|q| q < alpha);
        if edge {
            g.set_edge(a, b, true);
        }
        pairs.push(PairStat {
            a,
            b,
            rho,
            p_value,
            adjusted_p,
            edge,
        });
    }
    Ok((
        g,
        CorrelationResult {
            taxa: v.taxa.clone(),
            pairs,
        },
    ))
}

/// Tree adjacency Q: taxa sharing a parent are linked.
pub fn build_tree_adjacency(tax: &TaxonomyMap, taxa: &[String]) -> Result<BinaryNetwork> {
    let parents = tax.parents_of(taxa)?;
    Ok(same_label_network(taxa.to_vec(), &parents))
}

/// Links every pair of nodes carrying equal labels.
pub fn same_label_network<L: PartialEq>(names: Vec<String>, labels: &[L]) -> BinaryNetwork {
    let mut q = BinaryNetwork::empty(names);
    for a in 0..labels.len() {
        for b in a + 1..labels.len() {
            if labels[a] == labels[b] {
                q.set_edge(a, b, true);
            }
        }
    }
    q
}
