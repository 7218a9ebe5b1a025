//! Node-sampling strategies and the two-stage CG -> KG orchestrator.
//!
//! Every sampler returns a node set whose induced subgraph approximates the
//! requested edge budget from above: the atomic addition step in progress is
//! finished, never trimmed, and the achieved ratio is always reported.

mod forest_fire;
mod random_walk;
mod scan;

pub(crate) use forest_fire::{forest_fire, FireVariant};
pub(crate) use random_walk::random_walk_sample;
pub(crate) use scan::{niche_sample, pinsage_sample, temporal_sample};

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    induced_subgraph_cg, induced_subgraph_kg, CgSubgraph, CollabGraph, KgSubgraph, KnowledgeGraph,
    NodeRef, NodeSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Ff,
    Ffb,
    Rw,
    Rj,
    Ps,
    Ts,
    Ns,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 7] = [
        SamplerKind::Ff,
        SamplerKind::Ffb,
        SamplerKind::Rw,
        SamplerKind::Rj,
        SamplerKind::Ps,
        SamplerKind::Ts,
        SamplerKind::Ns,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Ff => "ff",
            SamplerKind::Ffb => "ffb",
            SamplerKind::Rw => "rw",
            SamplerKind::Rj => "rj",
            SamplerKind::Ps => "ps",
            SamplerKind::Ts => "ts",
            SamplerKind::Ns => "ns",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ff" => Ok(SamplerKind::Ff),
            "ffb" => Ok(SamplerKind::Ffb),
            "rw" => Ok(SamplerKind::Rw),
            "rj" => Ok(SamplerKind::Rj),
            "ps" => Ok(SamplerKind::Ps),
            "ts" => Ok(SamplerKind::Ts),
            "ns" => Ok(SamplerKind::Ns),
            other => Err(Error::validation(format!("unknown sampler {other:?}"))),
        }
    }

    /// PS, TS and NS are bipartite-only; the KG stage falls back to RW.
    fn kg_kind(&self) -> SamplerKind {
        match self {
            SamplerKind::Ps | SamplerKind::Ts | SamplerKind::Ns => SamplerKind::Rw,
            other => *other,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSpec {
    pub kind: SamplerKind,
    pub ratio: f64,
    pub p_f: f64,
    pub p_b: f64,
    pub p_c: f64,
    pub walk_len: usize,
    pub walks_per_node: usize,
    /// Override for the FFB geometric burn-count mean; defaults to
    /// (1 - p)^-1 per direction when absent.
    pub ffb_mean: Option<f64>,
    pub seed: u64,
}

impl SampleSpec {
    pub fn new(kind: SamplerKind, ratio: f64, seed: u64) -> Self {
        SampleSpec {
            kind,
            ratio,
            p_f: 0.35,
            p_b: 0.2,
            p_c: 0.15,
            walk_len: 10,
            walks_per_node: 1,
            ffb_mean: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::validation(format!("ratio {} not in (0,1]", self.ratio)));
        }
        for (name, p) in [("p_f", self.p_f), ("p_b", self.p_b), ("p_c", self.p_c)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(format!("{name} = {p} not in [0,1]")));
            }
        }
        if self.walk_len < 1 {
            return Err(Error::validation("walk_len must be >= 1".to_string()));
        }
        if let Some(m) = self.ffb_mean {
            if m < 1.0 {
                return Err(Error::validation("ffb_mean must be >= 1".to_string()));
            }
        }
        Ok(())
    }
}

/// One restart pick made by a seeded sampler; `seeds_remaining` is the number
/// of seed nodes not yet used as a start at the time of the pick.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StartEvent {
    pub node: usize,
    pub seeds_remaining: usize,
}

/// Raw sampler output over a view's local node ids.
#[derive(Debug, Clone)]
pub struct SampleRun {
    pub nodes: Vec<usize>,
    pub starts: Vec<StartEvent>,
}

/// Uniform view over the graph being sampled. Local node ids are dense in
/// `0..num_nodes()`.
pub(crate) trait SampleView {
    fn num_nodes(&self) -> usize;
    fn num_edges(&self) -> usize;
    fn forward(&self, v: usize) -> &[usize];
    fn backward(&self, v: usize) -> &[usize];
    fn walk_neighbors(&self, v: usize) -> &[usize];
    /// Edges gained by adding `v` to the membership (`v` must be absent).
    fn gained_edges(&self, v: usize, present: &[bool]) -> usize;
}

/// CG view: users at `0..U`, items at `U..U+I`.
pub(crate) struct CgView {
    num_users: usize,
    adj: Vec<Vec<usize>>,
    num_edges: usize,
}

impl CgView {
    pub fn new(cg: &CollabGraph) -> Self {
        let u = cg.num_users();
        let mut adj = Vec::with_capacity(u + cg.num_items());
        for user in 0..u {
            adj.push(cg.items_of(user).iter().map(|&i| i + u).collect());
        }
        for item in 0..cg.num_items() {
            adj.push(cg.users_of(item).to_vec());
        }
        CgView { num_users: u, adj, num_edges: cg.num_edges() }
    }

    pub fn node_set(&self, nodes: &[usize]) -> NodeSet {
        let mut set = NodeSet::new();
        for &v in nodes {
            if v < self.num_users {
                set.insert(NodeRef::user(v));
            } else {
                set.insert(NodeRef::item(v - self.num_users));
            }
        }
        set
    }

    pub fn user_id(&self, user: usize) -> usize {
        user
    }

    pub fn item_id(&self, item: usize) -> usize {
        self.num_users + item
    }
}

impl SampleView for CgView {
    fn num_nodes(&self) -> usize {
        self.adj.len()
    }
    fn num_edges(&self) -> usize {
        self.num_edges
    }
    /// Interactions are directed user -> item for sampling purposes.
    fn forward(&self, v: usize) -> &[usize] {
        if v < self.num_users {
            &self.adj[v]
        } else {
            &[]
        }
    }
    fn backward(&self, v: usize) -> &[usize] {
        if v < self.num_users {
            &[]
        } else {
            &self.adj[v]
        }
    }
    fn walk_neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }
    fn gained_edges(&self, v: usize, present: &[bool]) -> usize {
        self.adj[v].iter().filter(|&&n| present[n]).count()
    }
}

pub(crate) struct KgView<'a> {
    kg: &'a KnowledgeGraph,
    walk_adj: Vec<Vec<usize>>,
}

impl<'a> KgView<'a> {
    pub fn new(kg: &'a KnowledgeGraph) -> Self {
        let mut walk_adj = Vec::with_capacity(kg.num_entities());
        for e in 0..kg.num_entities() {
            let mut nb: Vec<usize> = kg
                .out_neighbors(e)
                .iter()
                .chain(kg.in_neighbors(e))
                .copied()
                .collect();
            nb.sort_unstable();
            nb.dedup();
            walk_adj.push(nb);
        }
        KgView { kg, walk_adj }
    }

    pub fn node_set(&self, nodes: &[usize]) -> NodeSet {
        let mut set = NodeSet::new();
        for &v in nodes {
            set.insert(NodeRef::entity(v));
        }
        set
    }
}

impl SampleView for KgView<'_> {
    fn num_nodes(&self) -> usize {
        self.kg.num_entities()
    }
    fn num_edges(&self) -> usize {
        self.kg.num_triples()
    }
    fn forward(&self, v: usize) -> &[usize] {
        self.kg.out_neighbors(v)
    }
    fn backward(&self, v: usize) -> &[usize] {
        self.kg.in_neighbors(v)
    }
    fn walk_neighbors(&self, v: usize) -> &[usize] {
        &self.walk_adj[v]
    }
    fn gained_edges(&self, v: usize, present: &[bool]) -> usize {
        let triples = self.kg.triples();
        self.kg
            .incident_triples(v)
            .iter()
            .filter(|&&t| {
                let t = triples[t];
                let other = if t.head == v { t.tail } else { t.head };
                other == v || present[other]
            })
            .count()
    }
}

/// Membership with an incrementally maintained induced edge count; the budget
/// is checked after every single node addition.
pub(crate) struct Working<'a> {
    view: &'a dyn SampleView,
    present: Vec<bool>,
    nodes: Vec<usize>,
    induced: usize,
}

impl<'a> Working<'a> {
    pub fn new(view: &'a dyn SampleView) -> Self {
        Working {
            present: vec![false; view.num_nodes()],
            nodes: Vec::new(),
            induced: 0,
            view,
        }
    }

    pub fn add(&mut self, v: usize) -> bool {
        if self.present[v] {
            return false;
        }
        self.induced += self.view.gained_edges(v, &self.present);
        self.present[v] = true;
        self.nodes.push(v);
        true
    }

    pub fn contains(&self, v: usize) -> bool {
        self.present[v]
    }

    pub fn induced_edges(&self) -> usize {
        self.induced
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn into_nodes(mut self) -> Vec<usize> {
        self.nodes.sort_unstable();
        self.nodes
    }
}

/// Uniform pick over a sorted set, reproducible because iteration order is
/// ascending.
pub(crate) fn choose_from_set(set: &BTreeSet<usize>, rng: &mut ChaCha8Rng) -> Option<usize> {
    if set.is_empty() {
        return None;
    }
    let k = rng.gen_range(0..set.len());
    set.iter().nth(k).copied()
}

/// Uniform pick over indices where `mask` is false.
pub(crate) fn choose_unmasked(mask: &[bool], unmasked: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
    if unmasked == 0 {
        return None;
    }
    let k = rng.gen_range(0..unmasked);
    mask.iter()
        .enumerate()
        .filter(|(_, &m)| !m)
        .nth(k)
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTiming {
    pub cg_seconds: f64,
    pub kg_seconds: f64,
}

/// Output of the two-stage sampling pipeline.
#[derive(Debug, Clone)]
pub struct SampleResult {
    pub cg: CgSubgraph,
    pub kg: KgSubgraph,
    pub achieved_ratio_cg: f64,
    pub achieved_ratio_kg: Option<f64>,
    pub timing: StageTiming,
    pub seed: u64,
    /// Entities passed to the KG stage as start seeds: the mapped entities of
    /// every item present in the CG sample.
    pub kg_seed_entities: Vec<usize>,
    /// Restart picks recorded by the KG stage sampler.
    pub kg_start_trace: Vec<StartEvent>,
}

fn run_sampler(
    view: &dyn SampleView,
    kind: SamplerKind,
    seeds: &[usize],
    budget: usize,
    spec: &SampleSpec,
    cg: Option<&CollabGraph>,
    rng: &mut ChaCha8Rng,
) -> SampleRun {
    match kind {
        SamplerKind::Ff => forest_fire(view, seeds, budget, spec.p_f, spec.p_b, FireVariant::Bernoulli, rng),
        SamplerKind::Ffb => {
            let variant = FireVariant::Geometric { mean_override: spec.ffb_mean };
            forest_fire(view, seeds, budget, spec.p_f, spec.p_b, variant, rng)
        }
        SamplerKind::Rw => random_walk_sample(
            view,
            seeds,
            budget,
            spec.p_c,
            spec.walk_len,
            spec.walks_per_node,
            false,
            rng,
        ),
        SamplerKind::Rj => random_walk_sample(
            view,
            seeds,
            budget,
            spec.p_c,
            spec.walk_len,
            spec.walks_per_node,
            true,
            rng,
        ),
        SamplerKind::Ps => pinsage_sample(cg.expect("PS needs a bipartite graph"), budget, rng),
        SamplerKind::Ts => temporal_sample(cg.expect("TS needs a bipartite graph"), budget),
        SamplerKind::Ns => niche_sample(cg.expect("NS needs a bipartite graph"), budget),
    }
}

/// Stage 1 samples the CG to edge budget `ceil(ratio * |E_cg|)`; stage 2
/// samples the KG to `ceil(ratio * |E_kg|)` with start seeds limited to the
/// entities of items present in the CG sample.
pub fn sample_pipeline(cg: &CollabGraph, kg: &KnowledgeGraph, spec: &SampleSpec) -> Result<SampleResult> {
    spec.validate()?;
    if cg.num_edges() == 0 {
        return Err(Error::validation("cannot sample an empty collaborative graph".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let cg_budget = (spec.ratio * cg.num_edges() as f64).ceil() as usize;
    let view = CgView::new(cg);
    let t0 = Instant::now();
    let run = run_sampler(&view, spec.kind, &[], cg_budget, spec, Some(cg), &mut rng);
    let cg_nodes = view.node_set(&run.nodes);
    let cg_sample = induced_subgraph_cg(cg, &cg_nodes)?;
    let cg_seconds = t0.elapsed().as_secs_f64();
    let achieved_ratio_cg = cg_sample.graph.num_edges() as f64 / cg.num_edges() as f64;

    let t1 = Instant::now();
    let (kg_sample, achieved_ratio_kg, kg_seed_entities, kg_start_trace) = if kg.is_empty() {
        (induced_subgraph_kg(kg, &NodeSet::new())?, None, Vec::new(), Vec::new())
    } else {
        let kg_budget = (spec.ratio * kg.num_triples() as f64).ceil() as usize;
        let mut seeds: Vec<usize> = cg_sample
            .item_map
            .new_to_old()
            .iter()
            .filter_map(|item| kg.item_entity_map().get(item).copied())
            .collect();
        seeds.sort_unstable();
        seeds.dedup();
        let kg_view = KgView::new(kg);
        let run = run_sampler(&kg_view, spec.kind.kg_kind(), &seeds, kg_budget, spec, None, &mut rng);
        let kg_nodes = kg_view.node_set(&run.nodes);
        let sample = induced_subgraph_kg(kg, &kg_nodes)?;
        let ratio = if kg.num_triples() == 0 {
            None
        } else {
            Some(sample.graph.num_triples() as f64 / kg.num_triples() as f64)
        };
        (sample, ratio, seeds, run.starts)
    };
    let kg_seconds = t1.elapsed().as_secs_f64();

    Ok(SampleResult {
        cg: cg_sample,
        kg: kg_sample,
        achieved_ratio_cg,
        achieved_ratio_kg,
        timing: StageTiming { cg_seconds, kg_seconds },
        seed: spec.seed,
        kg_seed_entities,
        kg_start_trace,
    })
}
