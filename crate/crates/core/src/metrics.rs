//! Partition agreement, nodal strength and within-community diversity.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::BinaryNetwork;
use crate::sbm::CommunityAssignment;

fn pairs(n: u64) -> i128 {
    i128::from(n) * (i128::from(n) - 1) / 2
}

/// Adjusted Rand index between two labellings of the same items.
///
/// Computed from pair counts: `a` pairs together in both, `b` together only
/// in the first, `c` only in the second, `d` apart in both. When the
/// denominator vanishes (e.g. both inputs a single cluster) the result is 1.
pub fn ari<L1: Hash + Eq, L2: Hash + Eq>(x: &[L1], y: &[L2]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!(
            "label vectors differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Domain("ARI needs at least two items".into()));
    }
    let mut cells: HashMap<(&L1, &L2), u64> = HashMap::new();
    let mut rows: HashMap<&L1, u64> = HashMap::new();
    let mut cols: HashMap<&L2, u64> = HashMap::new();
    for (a, b) in x.iter().zip(y) {
        *cells.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let both: i128 = cells.values().map(|&n| pairs(n)).sum();
    let first: i128 = rows.values().map(|&n| pairs(n)).sum();
    let second: i128 = cols.values().map(|&n| pairs(n)).sum();
    let total = pairs(x.len() as u64);
    let a = both;
    let b = first - both;
    let c = second - both;
    let d = total - a - b - c;
    let den = (a + b) * (b + d) + (a + c) * (c + d);
    if den == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * (a * d - b * c) as f64 / den as f64)
}

/// Degree of every node; for a binary network this is its strength.
pub fn nodal_strength(g: &BinaryNetwork) -> Vec<u64> {
    (0..g.len()).map(|j| g.degree(j) as u64).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenusStrength<L> {
    /// 1-based community label.
    pub community: usize,
    pub genus: L,
    pub strength: u64,
}

/// Total nodal strength per (community, genus) pair that has at least one
/// taxon, ordered by community then genus.
pub fn genus_community_strength<L: Ord + Clone>(
    g: &BinaryNetwork,
    z: &CommunityAssignment,
    tau: &[L],
) -> Result<Vec<GenusStrength<L>>> {
    if g.len() != z.len() || tau.len() != z.len() {
        return Err(Error::Domain(format!(
            "network has {} nodes, {} labels, {} genera",
            g.len(),
            z.len(),
            tau.len()
        )));
    }
    let strength = nodal_strength(g);
    let mut table: BTreeMap<(usize, &L), u64> = BTreeMap::new();
    for (j, genus) in tau.iter().enumerate() {
        *table.entry((z.get(j), genus)).or_default() += strength[j];
    }
    Ok(table
        .into_iter()
        .map(|((k, genus), s)| GenusStrength {
            community: k + 1,
            genus: genus.clone(),
            strength: s,
        })
        .collect())
}

/// Shannon diversity (natural log) of genus proportions within community `k`
/// (0-based).
pub fn shannon<L: Hash + Eq>(z: &CommunityAssignment, tau: &[L], k: usize) -> Result<f64> {
    if tau.len() != z.len() {
        return Err(Error::Domain(format!("{} labels but {} genera", z.len(), tau.len())));
    }
    let mut counts: HashMap<&L, u64> = HashMap::new();
    let mut n = 0u64;
    for (j, genus) in tau.iter().enumerate() {
        if z.get(j) == k {
            *counts.entry(genus).or_default() += 1;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Domain(format!("community {} is empty", k + 1)));
    }
    let mut props: Vec<f64> = counts.values().map(|&c| c as f64 / n as f64).collect();
    props.sort_by(f64::total_cmp);
    Ok(-props.iter().map(|w| w * w.ln()).sum::<f64>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AriRecord {
    pub scenario: String,
    pub replicate: usize,
    pub method: String,
    pub ari: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrengthRecord {
    pub taxon: String,
    pub strength: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShannonRecord {
    pub model: String,
    pub community: usize,
    pub shannon: f64,
}

/// Everything the plotting scripts read, one CSV per table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub ari: Vec<AriRecord>,
    pub nodal_strength: Vec<StrengthRecord>,
    pub genus_strength: Vec<GenusStrength<String>>,
    pub shannon: Vec<ShannonRecord>,
}

impl MetricReport {
    /// Describes a fitted network: strengths, genus table and Shannon index
    /// of every non-empty community.
    pub fn describe(model: &str, g: &BinaryNetwork, z: &CommunityAssignment, tau: &[String]) -> Result<Self> {
        let nodal_strength = g
            .labels()
            .iter()
            .zip(nodal_strength(g))
            .map(|(t, s)| StrengthRecord {
                taxon: t.clone(),
                strength: s,
            })
            .collect();
        let sizes = z.sizes();
        let shannon = (0..z.k())
            .filter(|&k| sizes[k] > 0)
            .map(|k| {
                Ok(ShannonRecord {
                    model: model.to_string(),
                    community: k + 1,
                    shannon: shannon(z, tau, k)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            ari: Vec::new(),
            nodal_strength,
            genus_strength: genus_community_strength(g, z, tau)?,
            shannon,
        })
    }

    /// Writes the non-empty tables into `dir` as `ari.csv`,
    /// `nodal_strength.csv`, `genus_strength.csv` and `shannon.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<String>> {
        let mut written = Vec::new();
        if !self.ari.is_empty() {
            write_records(&dir.join("ari.csv"), &self.ari)?;
            written.push("ari.csv".to_string());
        }
        if !self.nodal_strength.is_empty() {
            write_records(&dir.join("nodal_strength.csv"), &self.nodal_strength)?;
            written.push("nodal_strength.csv".to_string());
        }
        if !self.genus_strength.is_empty() {
            write_records(&dir.join("genus_strength.csv"), &self.genus_strength)?;
            written.push("genus_strength.csv".to_string());
        }
        if !self.shannon.is_empty() {
            write_records(&dir.join("shannon.csv"), &self.shannon)?;
            written.push("shannon.csv".to_string());
        }
        Ok(written)
    }
}

pub(crate) fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes a header-only or populated ARI table to any sink.
pub fn write_ari<W: Write>(out: W, records: &[AriRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(["scenario", "replicate", "method", "ari"])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(Path::new("<ari>"), e))?;
    Ok(())
}
