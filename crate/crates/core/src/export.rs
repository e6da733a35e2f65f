//! CSV and JSON writers for every artifact the toolkit produces, plus the
//! reader for truth tables.
//!
//! Community labels are written 1-based. Floats use the shortest
//! representation that round-trips, so identical runs give identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::BinaryNetwork;
use crate::network::CorrelationResult;
use crate::sbm::{ChainTrace, CommunityAssignment};
use crate::scalar::Scalar;
use crate::simgen::SyntheticDataset;
use crate::transform::TransformedMatrix;

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish<W: Write>(mut w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Dense `node,<label>,...` adjacency, the format read back by
/// [`crate::ingest::load_adjacency`].
pub fn write_adjacency(path: &Path, g: &BinaryNetwork) -> Result<()> {
    let mut w = create(path)?;
    let mut header = vec!["node".to_string()];
    header.extend(g.labels().iter().cloned());
    w.write_record(&header)?;
    for (i, label) in g.labels().iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(g.adjacency().row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    finish(w, path)
}

pub fn write_transformed<S: Scalar>(path: &Path, v: &TransformedMatrix<S>) -> Result<()> {
    let mut w = create(path)?;
    let mut header = vec!["sample_id".to_string()];
    header.extend(v.taxa.iter().cloned());
    w.write_record(&header)?;
    for (i, sample) in v.samples.iter().enumerate() {
        let mut row = vec![sample.clone()];
        row.extend(v.values.row(i).iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    finish(w, path)
}

fn opt<S: Scalar>(v: Option<S>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `taxon_a,taxon_b,rho,p,adjusted_p,edge`; undefined statistics are blank.
pub fn write_correlations<S: Scalar>(path: &Path, c: &CorrelationResult<S>) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["taxon_a", "taxon_b", "rho", "p", "adjusted_p", "edge"])?;
    for pair in &c.pairs {
        w.write_record([
            c.taxa[pair.a].clone(),
            c.taxa[pair.b].clone(),
            opt(pair.rho),
            opt(pair.p_value),
            opt(pair.adjusted_p),
            u8::from(pair.edge).to_string(),
        ])?;
    }
    finish(w, path)
}

/// Writes `trace_z.csv`, `trace_omega.csv` and `trace_log_joint.csv` into
/// `dir`. Rows are keyed by the 1-based iteration number.
pub fn write_trace<S: Scalar>(dir: &Path, taxa: &[String], trace: &ChainTrace<S>) -> Result<()> {
    let first = trace.config.burn_in() + 1;

    let path = dir.join("trace_z.csv");
    let mut w = create(&path)?;
    let mut header = vec!["iteration".to_string()];
    header.extend(taxa.iter().cloned());
    w.write_record(&header)?;
    for (i, z) in trace.z_samples.iter().enumerate() {
        let mut row = vec![(first + i).to_string()];
        row.extend(z.labels().iter().map(|l| (l + 1).to_string()));
        w.write_record(&row)?;
    }
    finish(w, &path)?;

    let path = dir.join("trace_omega.csv");
    let mut w = create(&path)?;
    let k = trace.config.k;
    let mut header = vec!["iteration".to_string()];
    for a in 1..=k {
        for b in a..=k {
            header.push(format!("omega_{a}_{b}"));
        }
    }
    w.write_record(&header)?;
    for (i, m) in trace.omega_samples.iter().enumerate() {
        let mut row = vec![(first + i).to_string()];
        row.extend(m.upper_triangle().iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    finish(w, &path)?;

    let path = dir.join("trace_log_joint.csv");
    let mut w = create(&path)?;
    w.write_record(["iteration", "log_joint"])?;
    for (i, lj) in trace.log_joint.iter().enumerate() {
        w.write_record([(first + i).to_string(), lj.to_string()])?;
    }
    finish(w, &path)
}

/// `k,bic`
pub fn write_bic<S: Scalar>(path: &Path, curve: &[(usize, S)]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["k", "bic"])?;
    for (k, b) in curve {
        w.write_record([k.to_string(), b.to_string()])?;
    }
    finish(w, path)
}

/// `taxon,community` with 1-based communities.
pub fn write_assignment(path: &Path, taxa: &[String], z: &CommunityAssignment) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["taxon", "community"])?;
    for (t, l) in taxa.iter().zip(z.labels()) {
        w.write_record([t.clone(), (l + 1).to_string()])?;
    }
    finish(w, path)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ScenarioRecord<'a, S: Scalar> {
    #[serde(flatten)]
    scenario: &'a crate::simgen::ScenarioSpec<S>,
    replicate: usize,
    achieved_strength_ari: f64,
    omega: Vec<Vec<S>>,
    between_probs: Vec<S>,
}

/// Writes `adjacency.csv`, `truth.csv` (`taxon,community,genus`) and
/// `scenario.json` into `dir`, creating it if needed.
pub fn write_dataset<S: Scalar>(dir: &Path, ds: &SyntheticDataset<S>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_adjacency(&dir.join("adjacency.csv"), &ds.g)?;

    let path = dir.join("truth.csv");
    let mut w = create(&path)?;
    w.write_record(["taxon", "community", "genus"])?;
    for (j, t) in ds.g.labels().iter().enumerate() {
        w.write_record([
            t.clone(),
            (ds.z_true.get(j) + 1).to_string(),
            format!("g{}", ds.tau[j] + 1),
        ])?;
    }
    finish(w, &path)?;

    let k = ds.omega_spec.k();
    let between = (0..k)
        .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
        .map(|(a, b)| ds.omega_spec.get(a, b))
        .collect();
    let record = ScenarioRecord {
        scenario: &ds.scenario,
        replicate: ds.replicate,
        achieved_strength_ari: ds.achieved_strength_ari,
        omega: ds.omega_spec.clone().into(),
        between_probs: between,
    };
    write_json(&dir.join("scenario.json"), &record)
}

/// Contents of a `taxon,community[,genus]` table.
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub taxa: Vec<String>,
    pub z: CommunityAssignment,
    pub genus: Option<Vec<String>>,
}

/// Reads a truth or assignment table. K is the largest label present.
pub fn read_truth(path: &Path) -> Result<Truth> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(tc), Some(cc)) = (col("taxon"), col("community")) else {
        return Err(Error::Validation(format!(
            "{} needs `taxon` and `community` columns",
            path.display()
        )));
    };
    let gc = col("genus");
    let mut taxa = Vec::new();
    let mut labels = Vec::new();
    let mut genus = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| {
            rec.get(c).ok_or_else(|| Error::Parse {
                row: i + 2,
                message: "missing field".into(),
            })
        };
        taxa.push(field(tc)?.to_string());
        let l: usize = field(cc)?.parse().map_err(|_| Error::Parse {
            row: i + 2,
            message: format!("community `{}` is not a positive integer", field(cc).unwrap_or("")),
        })?;
        labels.push(l);
        if let Some(gc) = gc {
            genus.push(field(gc)?.to_string());
        }
    }
    let k = labels.iter().copied().max().unwrap_or(0);
    if k == 0 {
        return Err(Error::Validation(format!(
            "{} has no positive community labels",
            path.display()
        )));
    }
    Ok(Truth {
        taxa,
        z: CommunityAssignment::from_one_based(&labels, k)?,
        genus: gc.map(|_| genus),
    })
}
