//! On-disk bundle for a built RTG: `graph.json` plus `regions.jsonl` in one
//! directory, loadable back into the exact structures that were saved.

use std::path::Path;

use rtg_core::graph::Rtg;
use rtg_core::io::{load_graph, read_regions_jsonl, save_graph, write_regions_jsonl};
use rtg_core::regions::RegionTable;

use crate::HarnessError;

pub const GRAPH_FILE: &str = "graph.json";
pub const REGIONS_FILE: &str = "regions.jsonl";

pub fn save_rtg(g: &Rtg, table: &RegionTable, dir: &Path) -> Result<(), HarnessError> {
    if g.node_count != table.len() || g.n_bits != table.n_bits {
        return Err(HarnessError::Config {
            message: format!(
                "graph ({} nodes, {} bits) does not describe the region table ({} regions, {} bits)",
                g.node_count,
                g.n_bits,
                table.len(),
                table.n_bits
            ),
        });
    }
    std::fs::create_dir_all(dir)?;
    save_graph(&dir.join(GRAPH_FILE), g)?;
    write_regions_jsonl(&dir.join(REGIONS_FILE), table)?;
    Ok(())
}

pub fn load_rtg(dir: &Path) -> Result<(Rtg, RegionTable), HarnessError> {
    let g = load_graph(&dir.join(GRAPH_FILE))?;
    let table = read_regions_jsonl(&dir.join(REGIONS_FILE), g.n_bits)?;
    if table.len() != g.node_count {
        return Err(HarnessError::Core(rtg_core::Error::Malformed(format!(
            "graph lists {} nodes but {} regions were read",
            g.node_count,
            table.len()
        ))));
    }
    Ok((g, table))
}
