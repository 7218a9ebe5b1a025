//! Canonical on-disk form of a dataset directory:
//!
//! - `cg.tsv` — one `user<TAB>item<TAB>time` line per interaction edge,
//!   dense indices, stable order
//! - `kg.tsv` — one `head<TAB>relation<TAB>tail` line per triple (relation
//!   is a label index into the manifest)
//! - `manifest.json` — counts, relation labels, the item -> entity map, and
//!   (for sampled graphs) the new -> old index maps

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CollabGraph, IndexMap, InteractionEdge, KnowledgeGraph, Triple};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub num_users: usize,
    pub num_items: usize,
    pub num_edges: usize,
    pub num_entities: usize,
    pub num_triples: usize,
    pub relation_labels: Vec<String>,
    pub item_entity_map: BTreeMap<usize, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_map: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_map: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_map: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub cg: CollabGraph,
    pub kg: KnowledgeGraph,
    /// new -> old maps when this directory holds a sampled graph.
    pub user_map: Option<IndexMap>,
    pub item_map: Option<IndexMap>,
    pub entity_map: Option<IndexMap>,
}

pub fn save_dataset(
    dir: &Path,
    cg: &CollabGraph,
    kg: &KnowledgeGraph,
    user_map: Option<&IndexMap>,
    item_map: Option<&IndexMap>,
    entity_map: Option<&IndexMap>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(fs::File::create(dir.join("cg.tsv"))?);
    for e in cg.edges() {
        writeln!(w, "{}\t{}\t{}", e.user, e.item, e.time)?;
    }
    w.flush()?;
    let mut w = BufWriter::new(fs::File::create(dir.join("kg.tsv"))?);
    for t in kg.triples() {
        writeln!(w, "{}\t{}\t{}", t.head, t.relation, t.tail)?;
    }
    w.flush()?;
    let manifest = Manifest {
        num_users: cg.num_users(),
        num_items: cg.num_items(),
        num_edges: cg.num_edges(),
        num_entities: kg.num_entities(),
        num_triples: kg.num_triples(),
        relation_labels: kg.relation_labels().to_vec(),
        item_entity_map: kg.item_entity_map().clone(),
        user_map: user_map.map(|m| m.new_to_old().to_vec()),
        item_map: item_map.map(|m| m.new_to_old().to_vec()),
        entity_map: entity_map.map(|m| m.new_to_old().to_vec()),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::MissingInput(manifest_path));
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;

    let cg_path = dir.join("cg.tsv");
    let mut edges = Vec::with_capacity(manifest.num_edges);
    for (lineno, line) in fs::read_to_string(&cg_path)?.lines().enumerate() {
        let mut parts = line.split('\t');
        let parse = |s: Option<&str>| -> Result<u64> {
            s.and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse {
                path: cg_path.clone(),
                line: lineno + 1,
                msg: format!("expected `user<TAB>item<TAB>time`, got {line:?}"),
            })
        };
        let user = parse(parts.next())? as usize;
        let item = parse(parts.next())? as usize;
        let time = parse(parts.next())?;
        edges.push(InteractionEdge { user, item, time });
    }
    let cg = CollabGraph::new(manifest.num_users, manifest.num_items, edges)?;

    let kg_path = dir.join("kg.tsv");
    let mut triples = Vec::with_capacity(manifest.num_triples);
    for (lineno, line) in fs::read_to_string(&kg_path)?.lines().enumerate() {
        let mut parts = line.split('\t');
        let parse = |s: Option<&str>| -> Result<usize> {
            s.and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse {
                path: kg_path.clone(),
                line: lineno + 1,
                msg: format!("expected `head<TAB>relation<TAB>tail`, got {line:?}"),
            })
        };
        let head = parse(parts.next())?;
        let relation = parse(parts.next())?;
        let tail = parse(parts.next())?;
        triples.push(Triple { head, relation, tail });
    }
    let kg = KnowledgeGraph::new(
        manifest.num_entities,
        manifest.relation_labels,
        triples,
        manifest.item_entity_map,
    )?;

    let as_map = |v: Option<Vec<usize>>| v.map(super::IndexMap::from_sorted_public);
    Ok(Dataset {
        cg,
        kg,
        user_map: as_map(manifest.user_map),
        item_map: as_map(manifest.item_map),
        entity_map: as_map(manifest.entity_map),
    })
}
