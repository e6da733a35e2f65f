use ndarray::Array2;

use super::CommunityAssignment;
use crate::error::{Error, Result};
use crate::ingest::BinaryNetwork;

/// Observed (`M`) and possible (`N`) edge counts per block pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockCounts {
    pub observed: Array2<u64>,
    pub possible: Array2<u64>,
    pub sizes: Vec<u64>,
}

impl BlockCounts {
    fn from_sizes(sizes: Vec<u64>, observed: Array2<u64>) -> Self {
        let k = sizes.len();
        let mut counts = Self {
            observed,
            possible: Array2::zeros((k, k)),
            sizes,
        };
        for a in 0..k {
            counts.refresh_possible(a);
        }
        counts
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    fn refresh_possible(&mut self, a: usize) {
        let na = self.sizes[a];
        for b in 0..self.k() {
            let n = if a == b {
                na * na.saturating_sub(1) / 2
            } else {
                na * self.sizes[b]
            };
            self.possible[[a, b]] = n;
            self.possible[[b, a]] = n;
        }
    }

    /// Moves one node between communities. `neighbors_in[k]` is the number of
    /// the node's G-neighbours currently labelled `k`.
    pub fn move_node(&mut self, from: usize, to: usize, neighbors_in: &[u64]) {
        if from == to {
            return;
        }
        for (b, &m) in neighbors_in.iter().enumerate() {
            self.observed[[from, b]] -= m;
            if b != from {
                self.observed[[b, from]] -= m;
            }
            self.observed[[to, b]] += m;
            if b != to {
                self.observed[[b, to]] += m;
            }
        }
        self.sizes[from] -= 1;
        self.sizes[to] += 1;
        self.refresh_possible(from);
        self.refresh_possible(to);
    }
}

/// Counts M and N from scratch.
pub fn edge_counts(g: &BinaryNetwork, z: &CommunityAssignment) -> Result<BlockCounts> {
    if g.len() != z.len() {
        return Err(Error::Domain(format!(
            "network has {} nodes but {} labels",
            g.len(),
            z.len()
        )));
    }
    let k = z.k();
    let mut observed = Array2::zeros((k, k));
    for (a, b) in g.edges() {
        let (ka, kb) = (z.get(a), z.get(b));
        observed[[ka, kb]] += 1;
        if ka != kb {
            observed[[kb, ka]] += 1;
        }
    }
    let sizes = z.sizes().into_iter().map(|s| s as u64).collect();
    Ok(BlockCounts::from_sizes(sizes, observed))
}
