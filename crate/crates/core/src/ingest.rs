//! Readers for count matrices, taxonomy maps and networks.
//!
//! All inputs are headered CSV files:
//!
//! * abundance: `sample_id,<taxon>,<taxon>,...` with one integer row per sample;
//! * taxonomy: `taxon,parent`;
//! * weighted edge list: `source,target,weight`, one row per undirected pair;
//! * dense adjacency: `node,<label>,...` followed by one `label,0,1,...` row
//!   per node.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use log::warn;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_reader<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(rdr)
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Validation(format!("duplicate {what} identifier `{id}`")));
        }
    }
    Ok(())
}

/// Samples-by-taxa integer count matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AbundanceMatrix {
    pub samples: Vec<String>,
    pub taxa: Vec<String>,
    /// `counts[[i, j]]` is the count of taxon `j` in sample `i`.
    pub counts: Array2<u64>,
}

impl AbundanceMatrix {
    pub fn new(samples: Vec<String>, taxa: Vec<String>, counts: Array2<u64>) -> Result<Self> {
        if counts.dim() != (samples.len(), taxa.len()) {
            return Err(Error::Validation(format!(
                "count matrix is {:?} but there are {} samples and {} taxa",
                counts.dim(),
                samples.len(),
                taxa.len()
            )));
        }
        check_unique(&samples, "sample")?;
        check_unique(&taxa, "taxon")?;
        for (i, row) in counts.rows().into_iter().enumerate() {
            if row.iter().all(|&c| c == 0) {
                return Err(Error::Validation(format!(
                    "sample `{}` has no positive counts",
                    samples[i]
                )));
            }
        }
        Ok(Self { samples, taxa, counts })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn n_taxa(&self) -> usize {
        self.taxa.len()
    }

    /// Number of samples in which each taxon has a non-zero count.
    pub fn nonzero_per_taxon(&self) -> Vec<usize> {
        self.counts
            .columns()
            .into_iter()
            .map(|c| c.iter().filter(|&&v| v > 0).count())
            .collect()
    }

    /// Keeps taxa observed in at least `min_nonzero` samples, preserving
    /// column order. Samples left without any positive count are dropped.
    pub fn filter_min_nonzero(&self, min_nonzero: usize) -> Result<Self> {
        let keep: Vec<usize> = self
            .nonzero_per_taxon()
            .into_iter()
            .enumerate()
            .filter(|&(_, nz)| nz >= min_nonzero)
            .map(|(j, _)| j)
            .collect();
        if keep.is_empty() {
            return Err(Error::Empty(format!(
                "no taxon has at least {min_nonzero} non-zero counts"
            )));
        }
        let rows: Vec<usize> = (0..self.n_samples())
            .filter(|&i| keep.iter().any(|&j| self.counts[[i, j]] > 0))
            .collect();
        if rows.len() < self.n_samples() {
            warn!(
                "dropping {} samples with no counts among retained taxa",
                self.n_samples() - rows.len()
            );
        }
        let counts = Array2::from_shape_fn((rows.len(), keep.len()), |(i, j)| self.counts[[rows[i], keep[j]]]);
        Ok(Self {
            samples: rows.iter().map(|&i| self.samples[i].clone()).collect(),
            taxa: keep.iter().map(|&j| self.taxa[j].clone()).collect(),
            counts,
        })
    }
}

/// Parses an abundance CSV and applies the non-zero filter.
pub fn parse_abundance<R: Read>(rdr: R, min_nonzero: usize) -> Result<AbundanceMatrix> {
    let mut rdr = csv_reader(rdr);
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::Parse {
            row: 0,
            message: "header needs `sample_id` plus at least one taxon column".into(),
        });
    }
    let taxa: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut samples = Vec::new();
    let mut flat = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        samples.push(record[0].to_owned());
        for (col, cell) in record.iter().skip(1).enumerate() {
            let v: u64 = cell.parse().map_err(|_| {
                Error::Validation(format!(
                    "row {row}, taxon `{}`: `{cell}` is not a nonnegative integer count",
                    taxa[col]
                ))
            })?;
            flat.push(v);
        }
    }
    let counts = Array2::from_shape_vec((samples.len(), taxa.len()), flat).expect("row lengths checked above");
    AbundanceMatrix::new(samples, taxa, counts)?.filter_min_nonzero(min_nonzero)
}

pub fn load_abundance(path: impl AsRef<Path>, min_nonzero: usize) -> Result<AbundanceMatrix> {
    parse_abundance(open(path.as_ref())?, min_nonzero)
}

/// Taxon to parent (genus or family) labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyMap {
    pub entries: BTreeMap<String, String>,
}

impl TaxonomyMap {
    pub fn parent(&self, taxon: &str) -> Option<&str> {
        self.entries.get(taxon).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_parents(&self) -> usize {
        self.entries.values().collect::<BTreeSet<_>>().len()
    }

    /// Parent labels in the order of `taxa`.
    pub fn parents_of(&self, taxa: &[String]) -> Result<Vec<String>> {
        let missing: Vec<String> = taxa
            .iter()
            .filter(|t| !self.entries.contains_key(*t))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::Coverage(missing));
        }
        Ok(taxa.iter().map(|t| self.entries[t].clone()).collect())
    }
}

/// Parses a taxonomy CSV, keeping only rows for `taxa`.
pub fn parse_taxonomy<R: Read>(rdr: R, taxa: &[String]) -> Result<TaxonomyMap> {
    let mut rdr = csv_reader(rdr);
    let wanted: HashSet<&str> = taxa.iter().map(String::as_str).collect();
    let mut seen = HashSet::new();
    let mut entries = BTreeMap::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Parse {
                row: idx + 1,
                message: format!("expected `taxon,parent`, found {} fields", record.len()),
            });
        }
        let taxon = &record[0];
        if !seen.insert(taxon.to_owned()) {
            return Err(Error::Validation(format!("duplicate taxonomy row for `{taxon}`")));
        }
        if wanted.contains(taxon) {
            entries.insert(taxon.to_owned(), record[1].to_owned());
        }
    }
    let map = TaxonomyMap { entries };
    map.parents_of(taxa)?;
    Ok(map)
}

pub fn load_taxonomy(path: impl AsRef<Path>, taxa: &[String]) -> Result<TaxonomyMap> {
    parse_taxonomy(open(path.as_ref())?, taxa)
}

/// Undirected simple graph over labelled nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryNetwork {
    labels: Vec<String>,
    adjacency: Array2<u8>,
}

impl BinaryNetwork {
    pub fn empty(labels: Vec<String>) -> Self {
        let p = labels.len();
        Self {
            labels,
            adjacency: Array2::zeros((p, p)),
        }
    }

    /// Builds a network from a dense 0/1 matrix, checking symmetry and the
    /// zero diagonal.
    pub fn from_dense(labels: Vec<String>, adjacency: Array2<u8>) -> Result<Self> {
        let p = labels.len();
        if adjacency.dim() != (p, p) {
            return Err(Error::Validation(format!(
                "adjacency is {:?} for {p} labels",
                adjacency.dim()
            )));
        }
        check_unique(&labels, "node")?;
        for i in 0..p {
            if adjacency[[i, i]] != 0 {
                return Err(Error::Validation(format!("self-loop on `{}`", labels[i])));
            }
            for j in 0..p {
                let v = adjacency[[i, j]];
                if v > 1 {
                    return Err(Error::Validation(format!("entry ({i},{j}) is {v}, not 0/1")));
                }
                if v != adjacency[[j, i]] {
                    return Err(Error::Validation(format!("asymmetric entry ({i},{j})")));
                }
            }
        }
        Ok(Self { labels, adjacency })
    }

    pub fn from_edges(labels: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut net = Self::empty(labels);
        let p = net.len();
        for &(a, b) in edges {
            if a >= p || b >= p || a == b {
                return Err(Error::Validation(format!("invalid edge ({a},{b}) for {p} nodes")));
            }
            net.set_edge(a, b, true);
        }
        Ok(net)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn adjacency(&self) -> &Array2<u8> {
        &self.adjacency
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[[a, b]] == 1
    }

    pub fn set_edge(&mut self, a: usize, b: usize, present: bool) {
        assert_ne!(a, b, "self-loops are not representable");
        let v = u8::from(present);
        self.adjacency[[a, b]] = v;
        self.adjacency[[b, a]] = v;
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&v| v == 1).count() / 2
    }

    pub fn degree(&self, j: usize) -> usize {
        self.adjacency.row(j).iter().filter(|&&v| v == 1).count()
    }

    pub fn neighbors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency
            .row(j)
            .into_iter()
            .enumerate()
            .filter(|&(_, &v)| v == 1)
            .map(|(i, _)| i)
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        (0..self.len()).map(|j| self.neighbors(j).collect()).collect()
    }

    /// Unordered edges `(a, b)` with `a < b`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let p = self.len();
        let mut out = Vec::new();
        for a in 0..p {
            for b in a + 1..p {
                if self.has_edge(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Networks read from a weighted edge list.
#[derive(Clone, Debug)]
pub struct EdgeListNetworks {
    /// Edge wherever any listed weight is positive.
    pub unweighted: BinaryNetwork,
    /// Edge wherever a listed weight is strictly above the threshold.
    pub thresholded: BinaryNetwork,
    pub self_loops_skipped: usize,
}

/// Parses a `source,target,weight` edge list.
///
/// Without `universe`, nodes are numbered in order of first appearance.
/// With `universe`, the node order is fixed and unknown nodes are rejected.
pub fn parse_network<R: Read>(rdr: R, threshold: f64, universe: Option<&[String]>) -> Result<EdgeListNetworks> {
    if !(threshold >= 0.0) {
        return Err(Error::Validation(format!("threshold {threshold} must be >= 0")));
    }
    let mut rdr = csv_reader(rdr);
    let mut labels: Vec<String> = universe.map(<[String]>::to_vec).unwrap_or_default();
    check_unique(&labels, "node")?;
    let mut index: HashMap<String, usize> = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
    let mut rows = Vec::new();
    let mut self_loops = 0;
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Parse {
                row,
                message: format!("expected `source,target,weight`, found {} fields", record.len()),
            });
        }
        let weight: f64 = record[2].parse().map_err(|_| Error::Parse {
            row,
            message: format!("weight `{}` is not a number", &record[2]),
        })?;
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::Validation(format!(
                "row {row}: weight {weight} must be finite and >= 0"
            )));
        }
        if record[0] == record[1] {
            self_loops += 1;
            continue;
        }
        let mut node = |name: &str| -> Result<usize> {
            if let Some(&i) = index.get(name) {
                return Ok(i);
            }
            if universe.is_some() {
                return Err(Error::Validation(format!("row {row}: unknown node `{name}`")));
            }
            labels.push(name.to_owned());
            index.insert(name.to_owned(), labels.len() - 1);
            Ok(labels.len() - 1)
        };
        let a = node(&record[0])?;
        let b = node(&record[1])?;
        rows.push((a, b, weight));
    }
    if self_loops > 0 {
        warn!("skipped {self_loops} self-loop rows in edge list");
    }
    let mut unweighted = BinaryNetwork::empty(labels.clone());
    let mut thresholded = BinaryNetwork::empty(labels);
    for (a, b, w) in rows {
        if w > 0.0 {
            unweighted.set_edge(a, b, true);
        }
        if w > threshold {
            thresholded.set_edge(a, b, true);
        }
    }
    Ok(EdgeListNetworks {
        unweighted,
        thresholded,
        self_loops_skipped: self_loops,
    })
}

pub fn load_network(path: impl AsRef<Path>, threshold: f64, universe: Option<&[String]>) -> Result<EdgeListNetworks> {
    parse_network(open(path.as_ref())?, threshold, universe)
}

/// Parses a dense adjacency CSV as written by [`crate::export::write_adjacency`].
pub fn parse_adjacency<R: Read>(rdr: R) -> Result<BinaryNetwork> {
    let mut rdr = csv_reader(rdr);
    let header = rdr.headers()?.clone();
    let labels: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let p = labels.len();
    let mut adjacency = Array2::zeros((p, p));
    let mut n_rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if i >= p || record.len() != p + 1 {
            return Err(Error::Parse {
                row,
                message: format!("expected {} rows of {} fields", p, p + 1),
            });
        }
        if record[0] != labels[i] {
            return Err(Error::Parse {
                row,
                message: format!("row label `{}` does not match column `{}`", &record[0], labels[i]),
            });
        }
        for j in 0..p {
            adjacency[[i, j]] = match &record[j + 1] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse {
                        row,
                        message: format!("cell `{other}` is not 0 or 1"),
                    })
                }
            };
        }
        n_rows += 1;
    }
    if n_rows != p {
        return Err(Error::Parse {
            row: n_rows,
            message: format!("expected {p} rows, found {n_rows}"),
        });
    }
    BinaryNetwork::from_dense(labels, adjacency)
}

pub fn load_adjacency(path: impl AsRef<Path>) -> Result<BinaryNetwork> {
    parse_adjacency(open(path.as_ref())?)
}
