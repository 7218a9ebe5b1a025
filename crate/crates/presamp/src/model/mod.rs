//! Inductive embedding recommender: learned raw vectors for a set of key
//! users/items, degree-normalized initial embeddings for every node (seen or
//! unseen) from its key neighbors plus a shared template vector, and
//! unweighted symmetric-normalized neighborhood propagation with layer
//! averaging. Scores are inner products of the propagated vectors.

mod train;

pub use train::{batch_loss_and_grads, train, ParamGrads, TrainOutput};

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CollabGraph, IndexMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub layers: usize,
    /// Exponent of the (degree + 1) normalizer in the initial embeddings.
    pub norm_exponent: f64,
    /// Fraction of highest-degree nodes kept as keys; 1.0 = every node.
    pub key_fraction: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight of the bilinear pairwise loss on the raw key embeddings.
    pub self_loss_weight: f64,
    pub negatives_per_positive: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 64,
            layers: 2,
            norm_exponent: 1.0,
            key_fraction: 1.0,
            learning_rate: 2.0,
            epochs: 30,
            batch_size: 128,
            self_loss_weight: 0.1,
            negatives_per_positive: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::validation("dim must be >= 1".to_string()));
        }
        if !(self.key_fraction > 0.0 && self.key_fraction <= 1.0) {
            return Err(Error::validation(format!(
                "key_fraction {} not in (0,1]",
                self.key_fraction
            )));
        }
        if self.norm_exponent < 0.0 {
            return Err(Error::validation("norm_exponent must be >= 0".to_string()));
        }
        if self.batch_size < 1 {
            return Err(Error::validation("batch_size must be >= 1".to_string()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::validation("learning_rate must be positive".to_string()));
        }
        if self.negatives_per_positive < 1 {
            return Err(Error::validation("negatives_per_positive must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// All learned state plus the structural hyperparameters needed to rebuild
/// embeddings on any graph in the same index space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub layers: usize,
    pub norm_exponent: f64,
    /// Node ids of key users/items, ascending; rows of the raw embedding
    /// matrices follow this order.
    pub key_users: Vec<usize>,
    pub key_items: Vec<usize>,
    pub key_user_emb: Vec<f64>,
    pub key_item_emb: Vec<f64>,
    pub template_user: Vec<f64>,
    pub template_item: Vec<f64>,
    pub w_s: Vec<f64>,
}

impl ModelParams {
    /// Rewrite key node ids into another index space (sample -> original)
    /// so a model trained on a sample can run on the full graph.
    pub fn remap_keys(&mut self, user_map: &IndexMap, item_map: &IndexMap) {
        let remap = |keys: &mut Vec<usize>, emb: &mut Vec<f64>, map: &IndexMap, dim: usize| {
            let mut rows: Vec<(usize, Vec<f64>)> = keys
                .iter()
                .enumerate()
                .map(|(row, &k)| (map.to_old(k), emb[row * dim..(row + 1) * dim].to_vec()))
                .collect();
            rows.sort_by_key(|(id, _)| *id);
            *keys = rows.iter().map(|(id, _)| *id).collect();
            *emb = rows.into_iter().flat_map(|(_, v)| v).collect();
        };
        remap(&mut self.key_users, &mut self.key_user_emb, user_map, self.dim);
        remap(&mut self.key_items, &mut self.key_item_emb, item_map, self.dim);
    }

    /// Mutable view of learnable block `b` in the fixed order: key user
    /// embeddings, key item embeddings, user template, item template, W_s.
    pub fn block_mut(&mut self, b: usize) -> &mut [f64] {
        match b {
            0 => &mut self.key_user_emb,
            1 => &mut self.key_item_emb,
            2 => &mut self.template_user,
            3 => &mut self.template_item,
            4 => &mut self.w_s,
            _ => unreachable!(),
        }
    }
}

/// Highest-degree `ceil(fraction * n)` users and items, ties broken toward
/// the lower index; returned ascending.
pub fn select_keys(cg: &CollabGraph, key_fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    if cg.num_users() == 0 || cg.num_items() == 0 {
        return Err(Error::validation("cannot select keys from an empty graph".to_string()));
    }
    if !(key_fraction > 0.0 && key_fraction <= 1.0) {
        return Err(Error::validation(format!("key_fraction {key_fraction} not in (0,1]")));
    }
    let pick = |n: usize, degree: &dyn Fn(usize) -> usize| {
        let count = ((key_fraction * n as f64).ceil() as usize).clamp(1, n);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(degree(v)), v));
        let mut keys: Vec<usize> = order.into_iter().take(count).collect();
        keys.sort_unstable();
        keys
    };
    Ok((
        pick(cg.num_users(), &|u| cg.user_degree(u)),
        pick(cg.num_items(), &|i| cg.item_degree(i)),
    ))
}

/// Row-major per-node vectors for one graph.
#[derive(Debug, Clone)]
pub struct Embeddings {
    pub dim: usize,
    pub users: Vec<f64>,
    pub items: Vec<f64>,
}

impl Embeddings {
    pub fn user(&self, u: usize) -> &[f64] {
        &self.users[u * self.dim..(u + 1) * self.dim]
    }
    pub fn item(&self, i: usize) -> &[f64] {
        &self.items[i * self.dim..(i + 1) * self.dim]
    }
}

/// `slots[node] = Some(row)` for key nodes.
pub(crate) fn key_slots(keys: &[usize], n: usize) -> Vec<Option<usize>> {
    let mut slots = vec![None; n];
    for (row, &k) in keys.iter().enumerate() {
        if k < n {
            slots[k] = Some(row);
        }
    }
    slots
}

/// Layer-0 embeddings: degree-normalized sum of key-neighbor raw vectors
/// plus the node-kind template. The normalizer counts ALL neighbors in the
/// graph, the sum only key neighbors.
pub fn init_embeddings(params: &ModelParams, cg: &CollabGraph) -> Embeddings {
    let d = params.dim;
    let user_slots = key_slots(&params.key_users, cg.num_users());
    let item_slots = key_slots(&params.key_items, cg.num_items());

    let mut users = vec![0.0; cg.num_users() * d];
    for u in 0..cg.num_users() {
        let norm = ((cg.user_degree(u) + 1) as f64).powf(-params.norm_exponent);
        let row = &mut users[u * d..(u + 1) * d];
        for &i in cg.items_of(u) {
            if let Some(slot) = item_slots[i] {
                let key = &params.key_item_emb[slot * d..(slot + 1) * d];
                for (r, k) in row.iter_mut().zip(key) {
                    *r += k;
                }
            }
        }
        for (r, t) in row.iter_mut().zip(&params.template_user) {
            *r = *r * norm + t;
        }
    }

    let mut items = vec![0.0; cg.num_items() * d];
    for i in 0..cg.num_items() {
        let norm = ((cg.item_degree(i) + 1) as f64).powf(-params.norm_exponent);
        let row = &mut items[i * d..(i + 1) * d];
        for &u in cg.users_of(i) {
            if let Some(slot) = user_slots[u] {
                let key = &params.key_user_emb[slot * d..(slot + 1) * d];
                for (r, k) in row.iter_mut().zip(key) {
                    *r += k;
                }
            }
        }
        for (r, t) in row.iter_mut().zip(&params.template_item) {
            *r = *r * norm + t;
        }
    }

    Embeddings { dim: d, users, items }
}

/// One symmetric-normalized propagation sweep: out[v] = sum over neighbors
/// v' of in[v'] / sqrt(deg v * deg v'). Isolated nodes receive zero.
pub(crate) fn propagate_once(
    cg: &CollabGraph,
    dim: usize,
    users_in: &[f64],
    items_in: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut users_out = vec![0.0; users_in.len()];
    let mut items_out = vec![0.0; items_in.len()];
    for e in cg.edges() {
        let w = 1.0 / ((cg.user_degree(e.user) * cg.item_degree(e.item)) as f64).sqrt();
        let (u0, i0) = (e.user * dim, e.item * dim);
        for k in 0..dim {
            users_out[u0 + k] += items_in[i0 + k] * w;
            items_out[i0 + k] += users_in[u0 + k] * w;
        }
    }
    (users_out, items_out)
}

/// Final node vectors: mean of layers 0..layers.
pub fn compute_embeddings(params: &ModelParams, cg: &CollabGraph) -> Embeddings {
    let e0 = init_embeddings(params, cg);
    let scale = 1.0 / (params.layers + 1) as f64;
    let mut acc_u: Vec<f64> = e0.users.clone();
    let mut acc_i: Vec<f64> = e0.items.clone();
    let mut cur_u = e0.users;
    let mut cur_i = e0.items;
    for _ in 0..params.layers {
        let (nu, ni) = propagate_once(cg, params.dim, &cur_u, &cur_i);
        for (a, v) in acc_u.iter_mut().zip(&nu) {
            *a += v;
        }
        for (a, v) in acc_i.iter_mut().zip(&ni) {
            *a += v;
        }
        cur_u = nu;
        cur_i = ni;
    }
    for v in acc_u.iter_mut().chain(acc_i.iter_mut()) {
        *v *= scale;
    }
    Embeddings { dim: params.dim, users: acc_u, items: acc_i }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Items ranked by descending score for one user, excluded items removed,
/// ties broken by ascending index.
pub fn rank_from_embeddings(emb: &Embeddings, user: usize, exclude: &BTreeSet<usize>) -> Vec<usize> {
    let num_items = emb.items.len() / emb.dim;
    let uvec = emb.user(user);
    let mut scored: Vec<(f64, usize)> = (0..num_items)
        .filter(|i| !exclude.contains(i))
        .map(|i| (dot(uvec, emb.item(i)), i))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, i)| i).collect()
}

/// Full-catalog ranking for one user on an arbitrary inference graph; the
/// user may be absent from training (its embedding comes from context
/// neighbors, or from the template alone).
pub fn score_all(
    params: &ModelParams,
    inference_graph: &CollabGraph,
    user: usize,
    exclude: &BTreeSet<usize>,
) -> Result<Vec<usize>> {
    if user >= inference_graph.num_users() {
        return Err(Error::validation(format!("user {user} out of range")));
    }
    if let Some(&bad) = exclude.iter().find(|&&i| i >= inference_graph.num_items()) {
        return Err(Error::validation(format!("excluded item {bad} not in the catalog")));
    }
    let emb = compute_embeddings(params, inference_graph);
    Ok(rank_from_embeddings(&emb, user, exclude))
}

/// Global popularity ranking: items by descending train interaction count,
/// ties by ascending index.
pub fn toppop(train_cg: &CollabGraph) -> Vec<usize> {
    let mut items: Vec<usize> = (0..train_cg.num_items()).collect();
    items.sort_by_key(|&i| (std::cmp::Reverse(train_cg.item_degree(i)), i));
    items
}

/// Apply the per-user exclusion rule to a global ranking.
pub fn filter_ranking(global: &[usize], exclude: &BTreeSet<usize>) -> Vec<usize> {
    global.iter().copied().filter(|i| !exclude.contains(i)).collect()
}

/// On-disk model: parameters plus the config and loss trace that produced
/// them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config: TrainConfig,
    pub loss_trace: Vec<f64>,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, serde_json::to_string(ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
