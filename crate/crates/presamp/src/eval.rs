//! Inductive evaluation: build one shared inference graph (the training
//! graph plus every evaluated user's context edges), compute embeddings once,
//! and rank the catalog per user. Per-user ranking runs in parallel when the
//! `parallel` feature is enabled; a sequential path is always available.

use std::collections::BTreeSet;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::CollabGraph;
use crate::ingest::EvalUser;
use crate::metrics::{metrics_report, EvalInstance, MetricsReport};
use crate::model::{
    compute_embeddings, filter_ranking, rank_from_embeddings, toppop, Embeddings, ModelParams,
};

/// Training graph plus the context edges of every user under evaluation.
/// Stays in the full-dataset index space, so users absent from training are
/// represented by their context neighbors alone.
pub fn build_inference_graph(
    train: &CollabGraph,
    full: &CollabGraph,
    eval_users: &[EvalUser],
) -> Result<CollabGraph> {
    let mut edges = train.edges().to_vec();
    for eu in eval_users {
        for &idx in &eu.context_edges {
            let e = *full
                .edges()
                .get(idx)
                .ok_or_else(|| Error::validation(format!("context edge index {idx} out of range")))?;
            edges.push(e);
        }
    }
    CollabGraph::new(full.num_users(), full.num_items(), edges)
}

/// Items a user must never be recommended: training interactions plus the
/// evaluation context.
fn exclusions(inference: &CollabGraph, full: &CollabGraph, eu: &EvalUser) -> BTreeSet<usize> {
    // The inference graph holds exactly train + context edges for this user.
    let mut ex: BTreeSet<usize> = inference.items_of(eu.user).iter().copied().collect();
    ex.extend(eu.context_edges.iter().map(|&idx| full.edges()[idx].item));
    ex
}

fn targets(full: &CollabGraph, eu: &EvalUser) -> BTreeSet<usize> {
    eu.target_edges.iter().map(|&idx| full.edges()[idx].item).collect()
}

fn instance_for(
    emb: &Embeddings,
    inference: &CollabGraph,
    full: &CollabGraph,
    eu: &EvalUser,
) -> EvalInstance {
    let exclude = exclusions(inference, full, eu);
    EvalInstance {
        ranking: rank_from_embeddings(emb, eu.user, &exclude),
        relevant: targets(full, eu),
        catalog_size: full.num_items(),
    }
}

/// Sequential per-user ranking.
pub fn rank_users_seq(
    emb: &Embeddings,
    inference: &CollabGraph,
    full: &CollabGraph,
    eval_users: &[EvalUser],
) -> Vec<EvalInstance> {
    eval_users
        .iter()
        .map(|eu| instance_for(emb, inference, full, eu))
        .collect()
}

/// Parallel per-user ranking against frozen embeddings; output order matches
/// the input order, so results are identical to the sequential path.
#[cfg(feature = "parallel")]
pub fn rank_users_par(
    emb: &Embeddings,
    inference: &CollabGraph,
    full: &CollabGraph,
    eval_users: &[EvalUser],
) -> Vec<EvalInstance> {
    eval_users
        .par_iter()
        .map(|eu| instance_for(emb, inference, full, eu))
        .collect()
}

fn rank_users(
    emb: &Embeddings,
    inference: &CollabGraph,
    full: &CollabGraph,
    eval_users: &[EvalUser],
) -> Vec<EvalInstance> {
    #[cfg(feature = "parallel")]
    {
        rank_users_par(emb, inference, full, eval_users)
    }
    #[cfg(not(feature = "parallel"))]
    {
        rank_users_seq(emb, inference, full, eval_users)
    }
}

/// Evaluate a trained model on held-out users. `train` must be in the full
/// index space (remap sampled-model keys first).
pub fn evaluate_model(
    params: &ModelParams,
    train: &CollabGraph,
    full: &CollabGraph,
    eval_users: &[EvalUser],
    ks: &[usize],
) -> Result<MetricsReport> {
    let inference = build_inference_graph(train, full, eval_users)?;
    let emb = compute_embeddings(params, &inference);
    let instances = rank_users(&emb, &inference, full, eval_users);
    metrics_report(&instances, ks)
}

/// Evaluate the popularity baseline under the same exclusion rules.
pub fn evaluate_toppop(
    train: &CollabGraph,
    full: &CollabGraph,
    eval_users: &[EvalUser],
    ks: &[usize],
) -> Result<MetricsReport> {
    let inference = build_inference_graph(train, full, eval_users)?;
    let global = toppop(train);
    let instances: Vec<EvalInstance> = eval_users
        .iter()
        .map(|eu| EvalInstance {
            ranking: filter_ranking(&global, &exclusions(&inference, full, eu)),
            relevant: targets(full, eu),
            catalog_size: full.num_items(),
        })
        .collect();
    metrics_report(&instances, ks)
}
