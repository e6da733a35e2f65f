use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use log::info;
use serde::{Deserialize, Serialize};

use sbm_mrf::export::{
    read_truth, write_adjacency, write_assignment, write_bic, write_correlations, write_dataset, write_json,
    write_trace, write_transformed,
};
use sbm_mrf::ingest::{load_abundance, load_adjacency, load_network, load_taxonomy};
use sbm_mrf::metrics::{AriRecord, StrengthRecord};
use sbm_mrf::network::{build_cooccurrence, build_tree_adjacency};
use sbm_mrf::simgen::{default_suite, generate_suite};
use sbm_mrf::transform::{mclr, relative_abundance};
use sbm_mrf::{ari, gibbs_run, BinaryNetwork, Config, Error, Fit, MetricReport, Real, Selection, TaxonomyMap};

use crate::{FitArgs, GraphArgs, MetricsArgs, NetworkArgs, SamplerArgs, SelectKArgs, SimulateArgs};

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    threads: usize,
    parameters: &'a T,
    outputs: Vec<String>,
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn manifest<T: Serialize>(out: &Path, command: &str, parameters: &T, mut outputs: Vec<String>) -> Result<()> {
    outputs.sort();
    outputs.push("manifest.json".into());
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        threads: rayon::current_num_threads(),
        parameters,
        outputs,
    };
    write_json(&out.join("manifest.json"), &m)?;
    Ok(())
}

/// K values to fit, written `lo:hi` (inclusive) or `a,b,c`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct KGrid(pub Vec<usize>);

impl FromStr for KGrid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = |e: std::num::ParseIntError| format!("invalid K grid `{s}`: {e}");
        if let Some((lo, hi)) = s.split_once(':') {
            let lo: usize = lo.trim().parse().map_err(bad)?;
            let hi: usize = hi.trim().parse().map_err(bad)?;
            if lo > hi {
                return Err(format!("invalid K grid `{s}`: {lo} > {hi}"));
            }
            Ok(KGrid((lo..=hi).collect()))
        } else {
            s.split(',')
                .map(|t| t.trim().parse().map_err(bad))
                .collect::<std::result::Result<_, _>>()
                .map(KGrid)
        }
    }
}

pub fn network(args: &NetworkArgs) -> Result<()> {
    let counts = load_abundance(&args.abundance, args.min_nonzero)?;
    let comp = relative_abundance::<Real>(&counts);
    let v = mclr(&comp, args.shift)?;
    let (g, corr) = build_cooccurrence(&v, args.alpha)?;

    prepare(&args.out)?;
    let mut outputs = vec![
        "transformed.csv".to_string(),
        "correlations.csv".into(),
        "network.csv".into(),
    ];
    write_transformed(&args.out.join("transformed.csv"), &v)?;
    write_correlations(&args.out.join("correlations.csv"), &corr)?;
    write_adjacency(&args.out.join("network.csv"), &g)?;
    if let Some(path) = &args.taxonomy {
        let tax = load_taxonomy(path, &counts.taxa)?;
        let q = build_tree_adjacency(&tax, &counts.taxa)?;
        write_adjacency(&args.out.join("taxonomy_network.csv"), &q)?;
        outputs.push("taxonomy_network.csv".into());
    }
    println!(
        "{} edges among {} taxa from {} samples",
        g.edge_count(),
        g.len(),
        counts.n_samples()
    );
    manifest(&args.out, "network", args, outputs)
}

struct Graphs {
    g: BinaryNetwork,
    q: Option<BinaryNetwork>,
    taxonomy: Option<TaxonomyMap>,
}

fn load_graphs(args: &GraphArgs) -> Result<Graphs> {
    let (g, from_edges) = match (&args.network, &args.edges) {
        (Some(path), _) => (load_adjacency(path)?, None),
        (None, Some(path)) => {
            let nets = load_network(path, args.q_threshold.unwrap_or(0.0), None)?;
            (nets.unweighted, args.q_threshold.map(|_| nets.thresholded))
        }
        (None, None) => return Err(Error::Validation("one of --network or --edges is required".into()).into()),
    };
    let mut taxonomy = None;
    let q = if let Some(q) = from_edges {
        Some(q)
    } else if let Some(path) = &args.taxonomy {
        let tax = load_taxonomy(path, g.labels())?;
        let q = build_tree_adjacency(&tax, g.labels())?;
        taxonomy = Some(tax);
        Some(q)
    } else if let Some(path) = &args.q_network {
        let q = load_adjacency(path)?;
        if q.labels() != g.labels() {
            return Err(Error::Validation("G and Q must list the same nodes in the same order".into()).into());
        }
        Some(q)
    } else {
        None
    };
    Ok(Graphs { g, q, taxonomy })
}

fn resolve_q(graphs: &Graphs, f: f64) -> Result<BinaryNetwork> {
    match &graphs.q {
        Some(q) => Ok(q.clone()),
        None if f == 0.0 => Ok(BinaryNetwork::empty(graphs.g.labels().to_vec())),
        None => Err(Error::Validation(format!(
            "f = {f} needs a taxonomy network (--taxonomy, --q-network or --edges with --q-threshold)"
        ))
        .into()),
    }
}

fn base_config(s: &SamplerArgs, k: usize) -> Config {
    Config::new(k)
        .with_f(s.f)
        .with_iterations(s.iterations)
        .with_seed(s.seed)
        .with_beta_prior(s.a_omega, s.b_omega)
}

fn model_name(f: f64) -> &'static str {
    if f == 0.0 {
        "sbm"
    } else {
        "sbm-mrf"
    }
}

/// Contents of `fit.json`.
#[derive(Serialize, Deserialize)]
pub struct FitFile {
    pub taxa: Vec<String>,
    pub summary: Fit,
}

#[derive(Serialize)]
struct SelectionFile<'a> {
    taxa: &'a [String],
    selection: &'a Selection,
}

fn describe(graphs: &Graphs, fit: &Fit, out: &Path) -> Result<Vec<String>> {
    let report = match &graphs.taxonomy {
        Some(tax) => {
            let tau = tax.parents_of(graphs.g.labels())?;
            MetricReport::describe(model_name(fit.config.f), &graphs.g, &fit.z_map, &tau)?
        }
        None => MetricReport {
            nodal_strength: graphs
                .g
                .labels()
                .iter()
                .zip(sbm_mrf::metrics::nodal_strength(&graphs.g))
                .map(|(t, s)| StrengthRecord {
                    taxon: t.clone(),
                    strength: s,
                })
                .collect(),
            ..MetricReport::default()
        },
    };
    Ok(report.write_dir(out)?)
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let graphs = load_graphs(&args.graph)?;
    let q = resolve_q(&graphs, args.sampler.f)?;
    let cfg = base_config(&args.sampler, args.k).with_stream(args.stream);
    info!("fitting K = {} on {} nodes, f = {}", args.k, graphs.g.len(), cfg.f);
    let trace = gibbs_run(&graphs.g, &q, &cfg)?;
    let summary = Fit::from_trace(&trace)?;

    prepare(&args.out)?;
    let taxa = graphs.g.labels();
    write_trace(&args.out, taxa, &trace)?;
    write_assignment(&args.out.join("assignment.csv"), taxa, &summary.z_map)?;
    let mut outputs = vec![
        "trace_z.csv".to_string(),
        "trace_omega.csv".into(),
        "trace_log_joint.csv".into(),
        "assignment.csv".into(),
        "fit.json".into(),
    ];
    outputs.extend(describe(&graphs, &summary, &args.out)?);
    println!(
        "K = {}: BIC {:.4}, MAP log joint {:.4} at retained draw {}",
        summary.k, summary.bic, summary.map_log_joint, summary.map_index
    );
    let file = FitFile {
        taxa: taxa.to_vec(),
        summary,
    };
    write_json(&args.out.join("fit.json"), &file)?;
    manifest(&args.out, "fit", args, outputs)
}

pub fn select_k(args: &SelectKArgs) -> Result<()> {
    let graphs = load_graphs(&args.graph)?;
    let q = resolve_q(&graphs, args.sampler.f)?;
    let base = base_config(&args.sampler, 1);
    info!("fitting K in {:?} on {} nodes", args.grid.0, graphs.g.len());
    let sel = sbm_mrf::select_k(&graphs.g, &q, &base, &args.grid.0, args.method)?;

    prepare(&args.out)?;
    let taxa = graphs.g.labels();
    write_bic(&args.out.join("bic.csv"), &sel.bic_curve)?;
    let chosen = sel
        .fits
        .iter()
        .find(|f| f.k == sel.chosen_k)
        .context("chosen K missing from the fitted grid")?;
    write_assignment(&args.out.join("assignment.csv"), taxa, &chosen.z_map)?;
    write_json(
        &args.out.join("selection.json"),
        &SelectionFile { taxa, selection: &sel },
    )?;
    for (k, b) in &sel.bic_curve {
        println!("K = {k}: BIC {b:.4}");
    }
    println!("chosen K = {} ({})", sel.chosen_k, sel.method);
    let outputs = vec!["bic.csv".to_string(), "assignment.csv".into(), "selection.json".into()];
    manifest(&args.out, "select-k", args, outputs)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut specs = default_suite::<Real>(args.replicates, args.seed);
    if !args.scenarios.is_empty() {
        if let Some(bad) = args.scenarios.iter().find(|s| !specs.iter().any(|x| &x.name == *s)) {
            let known: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
            return Err(Error::Validation(format!("unknown scenario `{bad}`; known: {}", known.join(", "))).into());
        }
        specs.retain(|s| args.scenarios.contains(&s.name));
    }
    let datasets = generate_suite(&specs)?;

    prepare(&args.out)?;
    let mut outputs = Vec::new();
    for ds in &datasets {
        let rel = PathBuf::from(&ds.scenario.name).join(format!("rep{:03}", ds.replicate));
        write_dataset(&args.out.join(&rel), ds)?;
        outputs.push(rel.display().to_string());
    }
    write_json(&args.out.join("scenarios.json"), &specs)?;
    outputs.push("scenarios.json".into());
    println!("{} datasets from {} scenarios", datasets.len(), specs.len());
    manifest(&args.out, "simulate", args, outputs)
}

#[derive(Deserialize)]
struct ScenarioTag {
    name: String,
    replicate: usize,
}

/// Scenario name and replicate from a `scenario.json` next to the truth file.
fn scenario_tag(truth: &Path) -> Result<(String, usize)> {
    let path = truth.with_file_name("scenario.json");
    if path.exists() {
        let text = fs::read_to_string(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let tag: ScenarioTag = serde_json::from_str(&text).map_err(Error::from)?;
        return Ok((tag.name, tag.replicate));
    }
    let stem = truth
        .parent()
        .and_then(Path::file_name)
        .or_else(|| truth.file_stem())
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Ok((stem, 0))
}

fn read_fit(path: &Path) -> Result<FitFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

pub fn metrics(args: &MetricsArgs) -> Result<()> {
    if args.truth.len() != 1 && args.truth.len() != args.fit.len() {
        return Err(Error::Validation(format!(
            "got {} truth files for {} fits; pass one, or one per fit",
            args.truth.len(),
            args.fit.len()
        ))
        .into());
    }
    let mut records = Vec::with_capacity(args.fit.len());
    for (i, fit_path) in args.fit.iter().enumerate() {
        let truth_path = &args.truth[if args.truth.len() == 1 { 0 } else { i }];
        let truth = read_truth(truth_path)?;
        let fit = read_fit(fit_path)?;
        let index: HashMap<&str, usize> = fit.taxa.iter().enumerate().map(|(j, t)| (t.as_str(), j)).collect();
        if fit.taxa.len() != truth.taxa.len() {
            return Err(Error::Validation(format!(
                "{} has {} taxa but {} has {}",
                fit_path.display(),
                fit.taxa.len(),
                truth_path.display(),
                truth.taxa.len()
            ))
            .into());
        }
        let predicted = truth
            .taxa
            .iter()
            .map(|t| {
                index
                    .get(t.as_str())
                    .map(|&j| fit.summary.z_map.get(j))
                    .ok_or_else(|| Error::Coverage(vec![t.clone()]))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let (scenario, replicate) = scenario_tag(truth_path)?;
        let record = AriRecord {
            scenario,
            replicate,
            method: model_name(fit.summary.config.f).into(),
            ari: ari(truth.z.labels(), &predicted)?,
        };
        println!(
            "{} replicate {} {}: ARI {:.6}",
            record.scenario, record.replicate, record.method, record.ari
        );
        records.push(record);
    }

    prepare(&args.out)?;
    let report = MetricReport {
        ari: records,
        ..MetricReport::default()
    };
    let outputs = report.write_dir(&args.out)?;
    manifest(&args.out, "metrics", args, outputs)
}
