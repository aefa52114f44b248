//! The four subcommands. Each writes its artifacts under `out` and returns
//! a short summary for the terminal.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use autoneb_core::autoneb::evaluate_dense;
use autoneb_core::explorer::StopReason;
use autoneb_core::io::{
    profile_rows, read_json, write_json, write_profile_csv, ChainFile, GraphFile, Meta, ParamsFile, SaddleFile,
};
use autoneb_core::landscape::{permute_hidden_units, train_minimum};
use autoneb_core::{auto_neb, explore, Chain, Landscape, ParamVector};

use crate::config::Experiment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub init_seed: u64,
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permuted_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub requested: usize,
    pub minima: Vec<ManifestEntry>,
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectReport {
    pub saddle_loss: f64,
    pub min_loss_a: f64,
    pub min_loss_b: f64,
    /// Chain arc length over the straight-line distance; 1 for coincident
    /// endpoints.
    pub path_length_ratio: f64,
    pub pivots: usize,
    pub cycle_max_losses: Vec<f64>,
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreSummary {
    pub runs: usize,
    pub stop: StopReason,
    pub mst_max_history: Vec<f64>,
    pub meta: Meta,
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_profile(path: &Path, chain: &Chain, exp: &Experiment, m: usize) -> anyhow::Result<()> {
    let profile = evaluate_dense(chain, exp.landscape(), m)?;
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_profile_csv(BufWriter::new(file), &profile_rows(chain, &profile), Some(&exp.meta))?;
    Ok(())
}

pub fn read_params(path: &Path) -> anyhow::Result<ParamVector> {
    let file: ParamsFile = read_json(path).with_context(|| format!("reading minimum {}", path.display()))?;
    Ok(file.params()?)
}

/// Trains `count` minima from seeds `seed, seed + 1, …` into `out/minima`.
/// On divergence the minima finished so far stay on disk and the manifest
/// lists them.
pub fn cmd_train(exp: &Experiment, count: usize, out: &Path) -> anyhow::Result<Manifest> {
    let dir = out.join("minima");
    create_dir(&dir)?;
    if exp.config.permute.is_some() {
        create_dir(&dir.join("permuted"))?;
    }
    let mut manifest = Manifest { requested: count, minima: Vec::new(), meta: exp.meta.clone() };
    let mut failure = None;
    for k in 0..count {
        let init = exp.initial_point(k)?;
        let min = match train_minimum(exp.landscape(), &init, &exp.config.train) {
            Ok(m) => m,
            Err(e) => {
                failure = Some(anyhow::Error::new(e).context(format!("training minimum {k}")));
                break;
            }
        };
        let loss = exp.landscape().loss(&min)?;
        let file = format!("minimum_{k:03}.json");
        write_json(&dir.join(&file), &ParamsFile::new(&min, Some(loss), Some(exp.meta.clone())))?;
        let permuted_file = match (&exp.config.permute, exp.landscape.mlp()) {
            (Some(p), Some(net)) => {
                let mirrored = permute_hidden_units(&min, net.spec(), p.layer, &p.perm)?;
                let name = format!("permuted/minimum_{k:03}.json");
                let mirrored_loss = net.loss(&mirrored)?;
                write_json(&dir.join(&name), &ParamsFile::new(&mirrored, Some(mirrored_loss), Some(exp.meta.clone())))?;
                Some(name)
            }
            _ => None,
        };
        manifest.minima.push(ManifestEntry {
            file,
            init_seed: exp.config.seed.wrapping_add(k as u64),
            loss,
            permuted_file,
        });
    }
    write_json(&dir.join("manifest.json"), &manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Runs AutoNEB between two minima files and writes `chain.json`,
/// `profile.csv`, `saddle.json` and `report.json`.
pub fn cmd_connect(exp: &Experiment, min_a: &Path, min_b: &Path, out: &Path) -> anyhow::Result<ConnectReport> {
    let a = read_params(min_a)?;
    let b = read_params(min_b)?;
    let landscape = exp.landscape();
    if a.dim() != landscape.dim() || b.dim() != landscape.dim() {
        bail!(
            "minima have dimensions {} and {}, the landscape has {}",
            a.dim(),
            b.dim(),
            landscape.dim()
        );
    }
    create_dir(out)?;
    let outcome = auto_neb(&a, &b, landscape, &exp.config.schedule)?;
    let chord = a.distance(&b);
    let report = ConnectReport {
        saddle_loss: outcome.saddle.loss,
        min_loss_a: landscape.loss(&a)?,
        min_loss_b: landscape.loss(&b)?,
        path_length_ratio: if chord > 0.0 { outcome.chain.total_length() / chord } else { 1.0 },
        pivots: outcome.chain.len(),
        cycle_max_losses: outcome.cycle_max_losses.clone(),
        meta: exp.meta.clone(),
    };
    write_json(&out.join("chain.json"), &ChainFile::new(&outcome.chain, Some(exp.meta.clone())))?;
    let file = File::create(out.join("profile.csv"))?;
    write_profile_csv(BufWriter::new(file), &profile_rows(&outcome.chain, &outcome.profile), Some(&exp.meta))?;
    write_json(&out.join("saddle.json"), &SaddleFile::new(&outcome.saddle, Some(exp.meta.clone())))?;
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

/// Minima files in `dir`, sorted by name; `manifest.json` is skipped.
pub fn minima_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let is_json = path.extension().is_some_and(|e| e == "json");
        if path.is_file() && is_json && path.file_name().is_some_and(|n| n != "manifest.json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Explores the minima in `minima_dir` and writes `graph.json`, the node
/// parameters under `nodes/`, one chain per edge under `chains/` and
/// `explore.json` with the run history.
pub fn cmd_explore(exp: &Experiment, minima_dir: &Path, out: &Path) -> anyhow::Result<(GraphFile, ExploreSummary)> {
    let files = minima_files(minima_dir)?;
    if files.len() < 2 {
        bail!("{} holds {} minima, exploration needs at least 2", minima_dir.display(), files.len());
    }
    let minima = files.iter().map(|f| read_params(f)).collect::<anyhow::Result<Vec<_>>>()?;
    let cfg = exp.explore_config()?;
    let outcome = explore(&minima, exp.landscape(), &exp.config.schedule, &cfg)?;

    create_dir(&out.join("nodes"))?;
    create_dir(&out.join("chains"))?;
    let node_file = |id: usize| format!("nodes/node_{id:03}.json");
    let chain_file = |id: usize| format!("chains/edge_{id:03}.json");
    for node in outcome.graph.nodes() {
        let params = ParamsFile::new(&node.params, Some(node.min_loss), Some(exp.meta.clone()));
        write_json(&out.join(node_file(node.id)), &params)?;
    }
    for edge in outcome.graph.edges() {
        if let Some(chain) = &edge.chain {
            write_json(&out.join(chain_file(edge.id)), &ChainFile::new(chain, Some(exp.meta.clone())))?;
        }
    }
    let graph = GraphFile::new(&outcome.graph, &outcome.mst, node_file, chain_file, Some(exp.meta.clone()));
    write_json(&out.join("graph.json"), &graph)?;
    let summary = ExploreSummary {
        runs: outcome.runs,
        stop: outcome.stop,
        mst_max_history: outcome.mst_max_history,
        meta: exp.meta.clone(),
    };
    write_json(&out.join("explore.json"), &summary)?;
    Ok((graph, summary))
}

/// Tree edges as printable rows, highest saddle first.
pub fn mst_table(graph: &GraphFile) -> String {
    let mut rows: Vec<_> = graph.edges.iter().filter(|e| graph.mst.contains(&e.id)).collect();
    rows.sort_by(|a, b| b.saddle_loss.total_cmp(&a.saddle_loss).then(a.id.cmp(&b.id)));
    let mut text = format!("{:>5} {:>5} {:>5} {:>14}\n", "edge", "u", "v", "saddle_loss");
    for e in rows {
        text.push_str(&format!("{:>5} {:>5} {:>5} {:>14.6e}\n", e.id, e.u, e.v, e.saddle_loss));
    }
    text
}

/// Dense profiles of a stored chain and of the straight segment between its
/// endpoints, written to `chain_profile.csv` and `straight_profile.csv`.
pub fn cmd_eval_path(exp: &Experiment, chain_path: &Path, m: usize, out: &Path) -> anyhow::Result<(f64, f64)> {
    if m == 0 {
        bail!("--dense must be at least 1");
    }
    let file: ChainFile = read_json(chain_path).with_context(|| format!("reading chain {}", chain_path.display()))?;
    let chain = file.chain()?;
    if chain.dim() != exp.landscape().dim() {
        bail!("chain has dimension {}, the landscape has {}", chain.dim(), exp.landscape().dim());
    }
    create_dir(out)?;
    let straight = Chain::new(vec![chain.start().clone(), chain.end().clone()])?;
    write_profile(&out.join("chain_profile.csv"), &chain, exp, m)?;
    write_profile(&out.join("straight_profile.csv"), &straight, exp, m)?;
    let chain_max = evaluate_dense(&chain, exp.landscape(), m)?.max_loss().0;
    let straight_max = evaluate_dense(&straight, exp.landscape(), m)?.max_loss().0;
    Ok((chain_max, straight_max))
}
