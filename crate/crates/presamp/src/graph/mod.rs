//! Immutable in-memory representations of the collaborative graph (CG) and
//! knowledge graph (KG), with the induced-subgraph and degree-sequence
//! primitives everything else builds on.

pub mod io;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    User,
    Item,
    Entity,
}

/// Dense per-kind node identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeRef {
    pub kind: NodeKind,
    pub index: usize,
}

impl NodeRef {
    pub fn user(index: usize) -> Self {
        NodeRef { kind: NodeKind::User, index }
    }
    pub fn item(index: usize) -> Self {
        NodeRef { kind: NodeKind::Item, index }
    }
    pub fn entity(index: usize) -> Self {
        NodeRef { kind: NodeKind::Entity, index }
    }
}

/// A single timestamped user-item interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEdge {
    pub user: usize,
    pub item: usize,
    pub time: u64,
}

/// Bipartite user-item graph with per-edge timestamps.
///
/// Edges keep their stable input order; adjacency lists are sorted and
/// describe the same edge set. At most one edge per (user, item) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CollabGraph {
    num_users: usize,
    num_items: usize,
    edges: Vec<InteractionEdge>,
    user_adj: Vec<Vec<usize>>,
    item_adj: Vec<Vec<usize>>,
}

impl CollabGraph {
    pub fn new(num_users: usize, num_items: usize, edges: Vec<InteractionEdge>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for e in &edges {
            if e.user >= num_users {
                return Err(Error::validation(format!(
                    "user index {} out of range (num_users = {num_users})",
                    e.user
                )));
            }
            if e.item >= num_items {
                return Err(Error::validation(format!(
                    "item index {} out of range (num_items = {num_items})",
                    e.item
                )));
            }
            if !seen.insert((e.user, e.item)) {
                return Err(Error::validation(format!(
                    "duplicate edge ({}, {})",
                    e.user, e.item
                )));
            }
        }
        let mut user_adj = vec![Vec::new(); num_users];
        let mut item_adj = vec![Vec::new(); num_items];
        for e in &edges {
            user_adj[e.user].push(e.item);
            item_adj[e.item].push(e.user);
        }
        for adj in user_adj.iter_mut().chain(item_adj.iter_mut()) {
            adj.sort_unstable();
        }
        Ok(CollabGraph { num_users, num_items, edges, user_adj, item_adj })
    }

    pub fn empty() -> Self {
        CollabGraph {
            num_users: 0,
            num_items: 0,
            edges: Vec::new(),
            user_adj: Vec::new(),
            item_adj: Vec::new(),
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }
    pub fn num_items(&self) -> usize {
        self.num_items
    }
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn edges(&self) -> &[InteractionEdge] {
        &self.edges
    }
    /// Items interacted with by `user`, ascending.
    pub fn items_of(&self, user: usize) -> &[usize] {
        &self.user_adj[user]
    }
    /// Users that interacted with `item`, ascending.
    pub fn users_of(&self, item: usize) -> &[usize] {
        &self.item_adj[item]
    }
    pub fn user_degree(&self, user: usize) -> usize {
        self.user_adj[user].len()
    }
    pub fn item_degree(&self, item: usize) -> usize {
        self.item_adj[item].len()
    }
    pub fn has_edge(&self, user: usize, item: usize) -> bool {
        self.user_adj[user].binary_search(&item).is_ok()
    }

    pub fn max_degree(&self) -> usize {
        let u = self.user_adj.iter().map(Vec::len).max().unwrap_or(0);
        let i = self.item_adj.iter().map(Vec::len).max().unwrap_or(0);
        u.max(i)
    }
}

/// Directed labeled triple over entity indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

/// Directed labeled multigraph of entities with an item -> entity mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    num_entities: usize,
    relation_labels: Vec<String>,
    triples: Vec<Triple>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    /// Triple indices incident to each entity (self-loops listed once).
    incident: Vec<Vec<usize>>,
    item_entity_map: BTreeMap<usize, usize>,
}

impl KnowledgeGraph {
    pub fn new(
        num_entities: usize,
        relation_labels: Vec<String>,
        triples: Vec<Triple>,
        item_entity_map: BTreeMap<usize, usize>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(triples.len());
        for t in &triples {
            if t.head >= num_entities || t.tail >= num_entities {
                return Err(Error::validation(format!(
                    "entity index out of range in triple ({}, {}, {})",
                    t.head, t.relation, t.tail
                )));
            }
            if t.relation >= relation_labels.len() {
                return Err(Error::validation(format!(
                    "relation index {} out of range",
                    t.relation
                )));
            }
            if !seen.insert((t.head, t.relation, t.tail)) {
                return Err(Error::validation(format!(
                    "duplicate triple ({}, {}, {})",
                    t.head, t.relation, t.tail
                )));
            }
        }
        let mut mapped = HashSet::new();
        for (_, &e) in &item_entity_map {
            if e >= num_entities {
                return Err(Error::validation(format!("mapped entity {e} out of range")));
            }
            if !mapped.insert(e) {
                return Err(Error::validation(format!(
                    "item-entity map is not injective (entity {e})"
                )));
            }
        }
        let mut out_adj = vec![Vec::new(); num_entities];
        let mut in_adj = vec![Vec::new(); num_entities];
        let mut incident = vec![Vec::new(); num_entities];
        for (idx, t) in triples.iter().enumerate() {
            out_adj[t.head].push(t.tail);
            in_adj[t.tail].push(t.head);
            incident[t.head].push(idx);
            if t.tail != t.head {
                incident[t.tail].push(idx);
            }
        }
        for adj in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            adj.sort_unstable();
        }
        Ok(KnowledgeGraph {
            num_entities,
            relation_labels,
            triples,
            out_adj,
            in_adj,
            incident,
            item_entity_map,
        })
    }

    pub fn empty() -> Self {
        KnowledgeGraph::new(0, Vec::new(), Vec::new(), BTreeMap::new()).unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.num_entities == 0 && self.triples.is_empty()
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }
    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }
    pub fn relation_labels(&self) -> &[String] {
        &self.relation_labels
    }
    pub fn item_entity_map(&self) -> &BTreeMap<usize, usize> {
        &self.item_entity_map
    }
    pub fn out_neighbors(&self, entity: usize) -> &[usize] {
        &self.out_adj[entity]
    }
    pub fn in_neighbors(&self, entity: usize) -> &[usize] {
        &self.in_adj[entity]
    }
    /// Indices of triples incident to `entity` (self-loops once).
    pub fn incident_triples(&self, entity: usize) -> &[usize] {
        &self.incident[entity]
    }
    pub fn out_degree(&self, entity: usize) -> usize {
        self.out_adj[entity].len()
    }
    pub fn in_degree(&self, entity: usize) -> usize {
        self.in_adj[entity].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_entities)
            .map(|e| self.incident[e].len())
            .max()
            .unwrap_or(0)
    }
}

/// Per-kind node membership sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeSet {
    pub users: BTreeSet<usize>,
    pub items: BTreeSet<usize>,
    pub entities: BTreeSet<usize>,
}

impl NodeSet {
    pub fn new() -> Self {
        NodeSet::default()
    }

    pub fn insert(&mut self, node: NodeRef) -> bool {
        match node.kind {
            NodeKind::User => self.users.insert(node.index),
            NodeKind::Item => self.items.insert(node.index),
            NodeKind::Entity => self.entities.insert(node.index),
        }
    }

    pub fn contains(&self, node: NodeRef) -> bool {
        match node.kind {
            NodeKind::User => self.users.contains(&node.index),
            NodeKind::Item => self.items.contains(&node.index),
            NodeKind::Entity => self.entities.contains(&node.index),
        }
    }

    pub fn len(&self) -> usize {
        self.users.len() + self.items.len() + self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_of_cg(cg: &CollabGraph) -> Self {
        NodeSet {
            users: (0..cg.num_users()).collect(),
            items: (0..cg.num_items()).collect(),
            entities: BTreeSet::new(),
        }
    }

    pub fn all_of_kg(kg: &KnowledgeGraph) -> Self {
        NodeSet {
            users: BTreeSet::new(),
            items: BTreeSet::new(),
            entities: (0..kg.num_entities()).collect(),
        }
    }
}

/// Old -> new index map for one node kind of a sampled graph.
///
/// `new_to_old[new]` is the index in the original graph; `old_to_new` is the
/// inverse lookup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMap {
    new_to_old: Vec<usize>,
}

impl IndexMap {
    fn from_sorted(new_to_old: Vec<usize>) -> Self {
        IndexMap { new_to_old }
    }

    /// Build from a sorted new -> old vector (as stored in manifests).
    pub(crate) fn from_sorted_public(new_to_old: Vec<usize>) -> Self {
        debug_assert!(new_to_old.windows(2).all(|w| w[0] < w[1]));
        IndexMap { new_to_old }
    }

    pub fn identity(n: usize) -> Self {
        IndexMap { new_to_old: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.new_to_old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.new_to_old.is_empty()
    }

    pub fn to_old(&self, new: usize) -> usize {
        self.new_to_old[new]
    }

    pub fn to_new(&self, old: usize) -> Option<usize> {
        self.new_to_old.binary_search(&old).ok()
    }

    pub fn new_to_old(&self) -> &[usize] {
        &self.new_to_old
    }
}

/// A re-densified induced subgraph of a [`CollabGraph`] plus its index maps.
#[derive(Debug, Clone, PartialEq)]
pub struct CgSubgraph {
    pub graph: CollabGraph,
    pub user_map: IndexMap,
    pub item_map: IndexMap,
}

/// A re-densified induced subgraph of a [`KnowledgeGraph`] plus its index map.
#[derive(Debug, Clone, PartialEq)]
pub struct KgSubgraph {
    pub graph: KnowledgeGraph,
    pub entity_map: IndexMap,
}

/// Subgraph containing exactly the edges of `graph` whose user AND item are in
/// `nodes`. Node indices are re-densified; edge order and timestamps are
/// preserved.
pub fn induced_subgraph_cg(graph: &CollabGraph, nodes: &NodeSet) -> Result<CgSubgraph> {
    if let Some(&u) = nodes.users.iter().next_back() {
        if u >= graph.num_users() {
            return Err(Error::validation(format!("user index {u} out of range")));
        }
    }
    if let Some(&i) = nodes.items.iter().next_back() {
        if i >= graph.num_items() {
            return Err(Error::validation(format!("item index {i} out of range")));
        }
    }
    let user_ids: Vec<usize> = nodes.users.iter().copied().collect();
    let item_ids: Vec<usize> = nodes.items.iter().copied().collect();
    let user_map = IndexMap::from_sorted(user_ids);
    let item_map = IndexMap::from_sorted(item_ids);
    let mut edges = Vec::new();
    for e in graph.edges() {
        if let (Some(u), Some(i)) = (user_map.to_new(e.user), item_map.to_new(e.item)) {
            edges.push(InteractionEdge { user: u, item: i, time: e.time });
        }
    }
    let graph = CollabGraph::new(user_map.len(), item_map.len(), edges)?;
    Ok(CgSubgraph { graph, user_map, item_map })
}

/// KG analogue of [`induced_subgraph_cg`]; the item-entity map is restricted
/// to surviving entities (item indices are left in the caller's namespace).
pub fn induced_subgraph_kg(graph: &KnowledgeGraph, nodes: &NodeSet) -> Result<KgSubgraph> {
    if let Some(&e) = nodes.entities.iter().next_back() {
        if e >= graph.num_entities() {
            return Err(Error::validation(format!("entity index {e} out of range")));
        }
    }
    let entity_ids: Vec<usize> = nodes.entities.iter().copied().collect();
    let entity_map = IndexMap::from_sorted(entity_ids);
    let mut triples = Vec::new();
    for t in graph.triples() {
        if let (Some(h), Some(tl)) = (entity_map.to_new(t.head), entity_map.to_new(t.tail)) {
            triples.push(Triple { head: h, relation: t.relation, tail: tl });
        }
    }
    let mut item_entity_map = BTreeMap::new();
    for (&item, &entity) in graph.item_entity_map() {
        if let Some(new) = entity_map.to_new(entity) {
            item_entity_map.insert(item, new);
        }
    }
    let graph = KnowledgeGraph::new(
        entity_map.len(),
        graph.relation_labels().to_vec(),
        triples,
        item_entity_map,
    )?;
    Ok(KgSubgraph { graph, entity_map })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
    Undirected,
}

/// One degree per node of the requested kind, including zeros for isolated
/// nodes. `Undirected` is only valid for the CG kinds, `In`/`Out` only for
/// entities.
pub fn degree_sequence_cg(graph: &CollabGraph, kind: NodeKind, direction: Direction) -> Result<Vec<usize>> {
    if direction != Direction::Undirected {
        return Err(Error::validation(
            "collaborative graph degrees are undirected".to_string(),
        ));
    }
    match kind {
        NodeKind::User => Ok((0..graph.num_users()).map(|u| graph.user_degree(u)).collect()),
        NodeKind::Item => Ok((0..graph.num_items()).map(|i| graph.item_degree(i)).collect()),
        NodeKind::Entity => Err(Error::validation(
            "collaborative graph has no entity nodes".to_string(),
        )),
    }
}

pub fn degree_sequence_kg(graph: &KnowledgeGraph, direction: Direction) -> Result<Vec<usize>> {
    match direction {
        Direction::In => Ok((0..graph.num_entities()).map(|e| graph.in_degree(e)).collect()),
        Direction::Out => Ok((0..graph.num_entities()).map(|e| graph.out_degree(e)).collect()),
        Direction::Undirected => Err(Error::validation(
            "knowledge graph degrees are directed; use In or Out".to_string(),
        )),
    }
}
