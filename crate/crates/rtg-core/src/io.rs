//! File formats: versioned weight documents, region tables as JSON lines,
//! and graphs as JSON or plain edge lists.
//!
//! Floating point is written by serde_json, which emits the shortest
//! decimal that round-trips, so save/load cycles are bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Rtg;
use crate::mlp::{MlpConfig, MlpParams};
use crate::pattern::ActivationPattern;
use crate::regions::{Region, RegionTable};

pub const WEIGHTS_FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct WeightsDoc {
    version: u64,
    config: MlpConfig,
    /// One flat row-major array per layer; shapes follow from the config.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

pub fn save_weights(path: &Path, params: &MlpParams) -> Result<()> {
    params.validate()?;
    let doc = WeightsDoc {
        version: WEIGHTS_FORMAT_VERSION,
        config: params.config,
        weights: params.weights.iter().map(|w| w.iter().copied().collect()).collect(),
        biases: params.biases.iter().map(|b| b.to_vec()).collect(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &doc)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<MlpParams> {
    let doc: WeightsDoc = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if doc.version != WEIGHTS_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: doc.version,
            expected: WEIGHTS_FORMAT_VERSION,
        });
    }
    let c = doc.config;
    c.validate()?;
    if doc.weights.len() != c.depth + 1 || doc.biases.len() != c.depth + 1 {
        return Err(Error::Malformed(format!(
            "expected {} layers, found {} weight / {} bias arrays",
            c.depth + 1,
            doc.weights.len(),
            doc.biases.len()
        )));
    }
    let mut weights = Vec::with_capacity(c.depth + 1);
    let mut biases = Vec::with_capacity(c.depth + 1);
    let mut in_dim = c.input_dim;
    for (l, (w_flat, b_flat)) in doc.weights.into_iter().zip(doc.biases).enumerate() {
        let out_dim = if l == c.depth { c.output_dim } else { c.width };
        let w = Array2::from_shape_vec((out_dim, in_dim), w_flat)
            .map_err(|_| Error::Malformed(format!("layer {l}: weight array has the wrong length")))?;
        if b_flat.len() != out_dim {
            return Err(Error::Malformed(format!(
                "layer {l}: bias array has length {}, expected {out_dim}",
                b_flat.len()
            )));
        }
        weights.push(w);
        biases.push(Array1::from_vec(b_flat));
        in_dim = out_dim;
    }
    let params = MlpParams {
        weights,
        biases,
        config: c,
    };
    params.validate()?;
    Ok(params)
}

#[derive(Serialize, Deserialize)]
struct RegionLine {
    id: u32,
    pattern_hex: String,
    count: usize,
    mass: f64,
    centroid: Vec<f64>,
    mean_output: Vec<f64>,
}

/// One region per line: `{"id":…, "pattern_hex":…, "count":…, "mass":…,
/// "centroid":[…], "mean_output":[…]}`.
pub fn write_regions_jsonl(path: &Path, table: &RegionTable) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in &table.regions {
        let line = RegionLine {
            id: r.id,
            pattern_hex: r.pattern.to_hex(),
            count: r.member_count,
            mass: r.mass,
            centroid: r.centroid.to_vec(),
            mean_output: r.mean_output.to_vec(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Rebuilds a region table from JSON lines. The pattern length is not
/// stored in the lines (hex padding hides up to 3 bits), so the caller
/// supplies it. Masses in the file must match `count / total` to 1e-9.
pub fn read_regions_jsonl(path: &Path, n_bits: usize) -> Result<RegionTable> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = Vec::new();
    for raw in reader.lines() {
        let raw = raw?;
        if raw.trim().is_empty() {
            continue;
        }
        let line: RegionLine = serde_json::from_str(&raw)?;
        lines.push(line);
    }
    let total: usize = lines.iter().map(|l| l.count).sum();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let mut regions = Vec::with_capacity(lines.len());
    for line in lines {
        let mass = line.count as f64 / total as f64;
        if (mass - line.mass).abs() > 1e-9 {
            return Err(Error::Malformed(format!(
                "region {}: stored mass {} disagrees with count {}/{total}",
                line.id, line.mass, line.count
            )));
        }
        regions.push(Region {
            id: line.id,
            pattern: ActivationPattern::from_hex(n_bits, &line.pattern_hex)?,
            member_count: line.count,
            mass,
            centroid: Array1::from_vec(line.centroid),
            mean_output: Array1::from_vec(line.mean_output),
        });
    }
    RegionTable::from_regions(regions, total, n_bits)
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    n_bits: usize,
    node_count: usize,
    edges: Vec<(u32, u32)>,
}

/// `{"n_bits":…, "node_count":…, "edges":[[i,j],…]}` with edges sorted.
pub fn save_graph(path: &Path, g: &Rtg) -> Result<()> {
    let doc = GraphDoc {
        n_bits: g.n_bits,
        node_count: g.node_count,
        edges: g.edges.clone(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &doc)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn load_graph(path: &Path) -> Result<Rtg> {
    let doc: GraphDoc = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    Rtg::from_edges(doc.node_count, doc.n_bits, doc.edges)
}

/// Plain text for external graph tools: one `i j` pair per line.
pub fn write_edge_list(path: &Path, g: &Rtg) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for &(a, b) in &g.edges {
        writeln!(out, "{a} {b}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_rtg;
    use crate::mlp::{init_mlp, MlpConfig};
    use crate::regions::{extract_regions, make_grid, OutputMode};

    fn workdir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn weights_round_trip_exactly() {
        let dir = workdir();
        let path = dir.path().join("net.json");
        let params = init_mlp(&MlpConfig::new(2, 3, 7, 2, 99)).unwrap();
        save_weights(&path, &params).unwrap();
        let loaded = load_weights(&path).unwrap();
        assert_eq!(loaded, params);
    }

    #[test]
    fn weights_reject_future_versions() {
        let dir = workdir();
        let path = dir.path().join("net.json");
        let params = init_mlp(&MlpConfig::new(2, 1, 3, 2, 1)).unwrap();
        save_weights(&path, &params).unwrap();
        let mut doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        doc["version"] = serde_json::json!(2);
        std::fs::write(&path, doc.to_string()).unwrap();
        assert!(matches!(
            load_weights(&path),
            Err(Error::UnsupportedVersion { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn weights_reject_wrong_array_lengths() {
        let dir = workdir();
        let path = dir.path().join("net.json");
        let params = init_mlp(&MlpConfig::new(2, 1, 3, 2, 1)).unwrap();
        save_weights(&path, &params).unwrap();
        let mut doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        doc["weights"][0].as_array_mut().unwrap().pop();
        std::fs::write(&path, doc.to_string()).unwrap();
        assert!(matches!(load_weights(&path), Err(Error::Malformed(_))));
    }

    #[test]
    fn garbage_is_a_json_error() {
        let dir = workdir();
        let path = dir.path().join("net.json");
        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(load_weights(&path), Err(Error::Json(_))));
    }

    #[test]
    fn regions_round_trip() {
        let dir = workdir();
        let path = dir.path().join("regions.jsonl");
        let params = init_mlp(&MlpConfig::new(2, 2, 8, 2, 17)).unwrap();
        let table =
            extract_regions(&params, &make_grid(40, -1.0, 1.0).unwrap(), OutputMode::Softmax).unwrap();
        write_regions_jsonl(&path, &table).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), table.len());
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["id"], 0);
        assert!(first["pattern_hex"].is_string());

        let loaded = read_regions_jsonl(&path, table.n_bits).unwrap();
        assert_eq!(loaded, table);
    }

    #[test]
    fn regions_reject_inconsistent_mass() {
        let dir = workdir();
        let path = dir.path().join("regions.jsonl");
        let params = init_mlp(&MlpConfig::new(2, 1, 4, 2, 3)).unwrap();
        let table =
            extract_regions(&params, &make_grid(20, -1.0, 1.0).unwrap(), OutputMode::Raw).unwrap();
        write_regions_jsonl(&path, &table).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let tampered: String = text
            .lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                if v["id"] == 0 {
                    v["mass"] = serde_json::json!(0.123456);
                }
                v.to_string() + "\n"
            })
            .collect();
        std::fs::write(&path, tampered).unwrap();
        assert!(matches!(
            read_regions_jsonl(&path, table.n_bits),
            Err(Error::Malformed(_))
        ));
    }

    #[test]
    fn graph_round_trip_and_edge_list() {
        let dir = workdir();
        let params = init_mlp(&MlpConfig::new(2, 2, 6, 2, 10)).unwrap();
        let table =
            extract_regions(&params, &make_grid(30, -1.0, 1.0).unwrap(), OutputMode::Raw).unwrap();
        let g = build_rtg(&table).unwrap();

        let gpath = dir.path().join("graph.json");
        save_graph(&gpath, &g).unwrap();
        let loaded = load_graph(&gpath).unwrap();
        assert_eq!(loaded, g);

        let epath = dir.path().join("edges.txt");
        write_edge_list(&epath, &g).unwrap();
        let text = std::fs::read_to_string(&epath).unwrap();
        assert_eq!(text.lines().count(), g.edge_count());
        let first = g.edges[0];
        assert_eq!(text.lines().next().unwrap(), format!("{} {}", first.0, first.1));
    }

    #[test]
    fn graph_load_rejects_self_loops() {
        let dir = workdir();
        let path = dir.path().join("graph.json");
        std::fs::write(&path, r#"{"n_bits":4,"node_count":3,"edges":[[1,1]]}"#).unwrap();
        assert!(matches!(load_graph(&path), Err(Error::Malformed(_))));
    }
}

