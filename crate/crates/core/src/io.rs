//! File formats: observation CSV, edge lists, segmentation JSON, scenario
//! config and the tuning table.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dp::Segmentation;
use crate::error::{Error, Result};
use crate::eval::CvRow;
use crate::model::{ComparisonGraph, Observation, ObservationSeries};
use crate::simulate::{BaseKind, ChangeSpec, Scenario};

pub const CONVENTION: &str = "first-index-of-new-regime";

/// Item labels in index order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Labels {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Labels {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (k, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::invalid("empty item label"));
            }
            if index.insert(name.clone(), k).is_some() {
                return Err(Error::invalid(format!("duplicate item label '{name}'")));
            }
        }
        Ok(Self { names, index })
    }

    /// Labels `"0"`, `"1"`, … for `n` items.
    pub fn indices(n: usize) -> Self {
        Self::new((0..n).map(|k| k.to_string()).collect()).expect("distinct")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&k) = self.index.get(name) {
            return k;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub series: ObservationSeries,
    pub labels: Labels,
}

/// How labels and the comparison graph are resolved on ingest.
#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Fixed item universe and order; unknown labels are rejected.
    pub items: Option<Labels>,
    /// Edge list restricting which pairs may be compared. Without it the
    /// graph is complete over the items.
    pub edges: Option<Vec<(String, String)>>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    t: String,
    winner: String,
    loser: String,
}

#[derive(Serialize)]
struct CsvOut<'a> {
    t: usize,
    winner: &'a str,
    loser: &'a str,
}

fn parse_err(what: &'static str, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        what,
        line,
        reason: reason.into(),
    }
}

/// Reads `t,winner,loser` rows; `t` must run `1, 2, …` without gaps.
pub fn read_observations(reader: impl Read, opts: &IngestOptions) -> Result<LabeledSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["t", "winner", "loser"] {
        return Err(parse_err("observation csv", 1, format!("header must be t,winner,loser, got {}", header.join(","))));
    }
    let fixed = opts.items.is_some();
    let mut labels = opts.items.clone().unwrap_or_default();
    let mut edge_idx = Vec::new();
    if let Some(edges) = &opts.edges {
        for (a, b) in edges {
            let mut resolve = |name: &str| -> Result<usize> {
                if fixed {
                    labels
                        .get(name)
                        .ok_or_else(|| Error::invalid(format!("graph item '{name}' is not in the item list")))
                } else {
                    Ok(labels.intern(name))
                }
            };
            edge_idx.push((resolve(a)?, resolve(b)?));
        }
    }
    let mut raw = Vec::new();
    for (k, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| parse_err("observation csv", line, e.to_string()))?;
        let t: usize = row
            .t
            .parse()
            .map_err(|_| parse_err("observation csv", line, format!("bad time '{}'", row.t)))?;
        if t != k + 1 {
            let reason = if t <= k {
                format!("time {t} is duplicated or out of order")
            } else {
                format!("expected time {}, found {t} (gap)", k + 1)
            };
            return Err(parse_err("observation csv", line, reason));
        }
        let mut resolve = |name: &str| -> Result<usize> {
            if fixed || opts.edges.is_some() {
                labels
                    .get(name)
                    .ok_or_else(|| parse_err("observation csv", line, format!("unknown item '{name}'")))
            } else {
                Ok(labels.intern(name))
            }
        };
        let winner = resolve(&row.winner)?;
        let loser = resolve(&row.loser)?;
        if winner == loser {
            return Err(parse_err("observation csv", line, "item compared with itself"));
        }
        if opts.edges.is_some() && !edge_idx.iter().any(|&(a, b)| (a, b) == (winner, loser) || (b, a) == (winner, loser)) {
            return Err(parse_err(
                "observation csv",
                line,
                format!("pair ({}, {}) is not in the comparison graph", row.winner, row.loser),
            ));
        }
        raw.push(Observation { time: t, winner, loser });
    }
    let graph = if opts.edges.is_some() {
        ComparisonGraph::new(labels.len(), edge_idx)?
    } else {
        ComparisonGraph::complete(labels.len())?
    };
    let series = ObservationSeries::new(graph, raw)?;
    Ok(LabeledSeries { series, labels })
}

pub fn write_observations(writer: impl Write, series: &ObservationSeries, labels: &Labels) -> Result<()> {
    if labels.len() != series.n() {
        return Err(Error::invalid("label count does not match the number of items"));
    }
    let mut w = csv::Writer::from_writer(writer);
    for r in series.records() {
        w.serialize(CsvOut {
            t: r.time,
            winner: labels.name(r.winner),
            loser: labels.name(r.loser),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// One pair per line, separated by a comma or whitespace; `#` starts a
/// comment.
pub fn read_edge_list(reader: impl BufRead) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let parts: Vec<&str> = body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        match parts.as_slice() {
            [a, b] => out.push((a.to_string(), b.to_string())),
            _ => return Err(parse_err("edge list", k + 1, "expected exactly two items")),
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("edge list is empty"));
    }
    Ok(out)
}

/// Graph over items `0..n` from an edge list of integer indices.
pub fn graph_from_index_edges(n: usize, edges: &[(String, String)]) -> Result<ComparisonGraph> {
    let parse = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::invalid(format!("edge endpoint '{s}' is not an item index")))
    };
    let pairs = edges
        .iter()
        .map(|(a, b)| Ok((parse(a)?, parse(b)?)))
        .collect::<Result<Vec<_>>>()?;
    ComparisonGraph::new(n, pairs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SegmentationJson {
    t_max: usize,
    change_points: Vec<usize>,
    convention: String,
}

pub fn segmentation_to_json(seg: &Segmentation) -> Result<String> {
    let doc = SegmentationJson {
        t_max: seg.t_max(),
        change_points: seg.change_points().to_vec(),
        convention: CONVENTION.to_string(),
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn segmentation_from_json(text: &str) -> Result<Segmentation> {
    let doc: SegmentationJson = serde_json::from_str(text)?;
    if doc.convention != CONVENTION {
        return Err(Error::invalid(format!(
            "unsupported convention '{}', expected '{CONVENTION}'",
            doc.convention
        )));
    }
    Segmentation::new(doc.t_max, doc.change_points)
}

/// `out/dir/name.csv` → `out/dir/name.truth.json`.
pub fn truth_sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.truth.json"))
}

/// Scenario from `key = value` lines. Keys: `n`, `delta` (required),
/// `changes`, `p`, `seed`, `graph`, `base`. A relative graph path is
/// resolved against `base_dir`.
pub fn parse_scenario_config(text: &str, base_dir: &Path) -> Result<Scenario> {
    let mut kv: HashMap<&str, (usize, &str)> = HashMap::new();
    for (k, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| parse_err("config", k + 1, "expected key = value"))?;
        let key = key.trim();
        if !["n", "delta", "changes", "p", "seed", "graph", "base"].contains(&key) {
            return Err(parse_err("config", k + 1, format!("unknown key '{key}'")));
        }
        if kv.insert(key, (k + 1, value.trim())).is_some() {
            return Err(parse_err("config", k + 1, format!("duplicate key '{key}'")));
        }
    }
    fn num<T: std::str::FromStr>(kv: &HashMap<&str, (usize, &str)>, key: &'static str) -> Result<Option<T>> {
        kv.get(key)
            .map(|&(line, v)| v.parse().map_err(|_| parse_err("config", line, format!("bad value for {key}: '{v}'"))))
            .transpose()
    }
    let n: usize = num(&kv, "n")?.ok_or_else(|| Error::invalid("config is missing n"))?;
    let delta: usize = num(&kv, "delta")?.ok_or_else(|| Error::invalid("config is missing delta"))?;
    let changes = match kv.get("changes") {
        Some(&(_, v)) if !v.is_empty() && v != "none" => {
            v.split(',').map(str::parse).collect::<Result<Vec<ChangeSpec>>>()?
        }
        _ => Vec::new(),
    };
    let mut sc = Scenario::complete(n, delta, changes, num(&kv, "seed")?.unwrap_or(0))?;
    if let Some(p) = num(&kv, "p")? {
        sc.max_win_prob = p;
    }
    if let Some(&(line, v)) = kv.get("base") {
        sc.base = match v {
            "arithmetic" => BaseKind::Arithmetic,
            "random" => BaseKind::RandomUniform,
            _ => return Err(parse_err("config", line, format!("unknown base '{v}'"))),
        };
    }
    if let Some(&(_, v)) = kv.get("graph") {
        if v != "complete" {
            let path = base_dir.join(v);
            let file = std::fs::File::open(&path)?;
            let edges = read_edge_list(std::io::BufReader::new(file))?;
            sc.graph = graph_from_index_edges(n, &edges)?;
        }
    }
    sc.validate()?;
    Ok(sc)
}

/// Inverse of [`parse_scenario_config`]. `graph_path` names the edge-list
/// file for a non-complete graph.
pub fn render_scenario_config(sc: &Scenario, graph_path: Option<&str>) -> Result<String> {
    let complete = sc.graph.edge_count() == sc.n * (sc.n - 1) / 2;
    let graph = match (complete, graph_path) {
        (true, _) => "complete",
        (false, Some(p)) => p,
        (false, None) => return Err(Error::invalid("a non-complete graph needs an edge-list path")),
    };
    let changes: Vec<String> = sc.changes.iter().map(ToString::to_string).collect();
    let base = match sc.base {
        BaseKind::Arithmetic => "arithmetic",
        BaseKind::RandomUniform => "random",
    };
    Ok(format!(
        "n = {}\ndelta = {}\nchanges = {}\np = {}\nseed = {}\ngraph = {graph}\nbase = {base}\n",
        sc.n,
        sc.delta_spacing,
        if changes.is_empty() { "none".to_string() } else { changes.join(",") },
        sc.max_win_prob,
        sc.rng_seed,
    ))
}

pub fn write_cv_table(writer: impl Write, rows: &[CvRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["gamma", "k_hat", "test_loss"])?;
    for r in rows {
        w.write_record([r.gamma.to_string(), r.k_hat.to_string(), r.test_loss.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
