//! Pairwise training: BPR on propagated embeddings plus a weighted bilinear
//! pairwise loss on the raw key vectors, minimized with plain SGD and
//! manually derived gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::CollabGraph;

use super::{
    compute_embeddings, dot, key_slots, propagate_once, select_keys, ModelParams, TrainConfig,
};

/// Gradient buffer with the same shape as the learnable blocks of
/// [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub key_user_emb: Vec<f64>,
    pub key_item_emb: Vec<f64>,
    pub template_user: Vec<f64>,
    pub template_item: Vec<f64>,
    pub w_s: Vec<f64>,
}

impl ParamGrads {
    fn zeros_like(p: &ModelParams) -> Self {
        ParamGrads {
            key_user_emb: vec![0.0; p.key_user_emb.len()],
            key_item_emb: vec![0.0; p.key_item_emb.len()],
            template_user: vec![0.0; p.template_user.len()],
            template_item: vec![0.0; p.template_item.len()],
            w_s: vec![0.0; p.w_s.len()],
        }
    }

    /// Blocks in the same order as [`ModelParams::block_mut`].
    pub fn blocks(&self) -> [&[f64]; 5] {
        [
            &self.key_user_emb,
            &self.key_item_emb,
            &self.template_user,
            &self.template_item,
            &self.w_s,
        ]
    }
}

fn softplus(x: f64) -> f64 {
    // ln(1 + e^x), stable for large |x|
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss and gradients for one batch of (user, positive item, negative item)
/// triples. The ranking term is the mean of -ln sigma(s+ - s-) over the
/// propagated-embedding scores; the raw term applies the same pairwise form
/// to e_u^T W_s e_i on the raw key vectors of every triple whose three nodes
/// are all keys, scaled by `self_loss_weight`.
pub fn batch_loss_and_grads(
    params: &ModelParams,
    cg: &CollabGraph,
    triples: &[(usize, usize, usize)],
    self_loss_weight: f64,
) -> (f64, ParamGrads) {
    let d = params.dim;
    let mut grads = ParamGrads::zeros_like(params);
    if triples.is_empty() {
        return (0.0, grads);
    }

    let emb = compute_embeddings(params, cg);
    let m = triples.len() as f64;
    let mut loss = 0.0;
    let mut g_users = vec![0.0; emb.users.len()];
    let mut g_items = vec![0.0; emb.items.len()];
    for &(u, ip, ineg) in triples {
        let delta = dot(emb.user(u), emb.item(ip)) - dot(emb.user(u), emb.item(ineg));
        loss += softplus(-delta) / m;
        let c = -sigmoid(-delta) / m;
        for k in 0..d {
            g_users[u * d + k] += c * (emb.items[ip * d + k] - emb.items[ineg * d + k]);
            g_items[ip * d + k] += c * emb.users[u * d + k];
            g_items[ineg * d + k] -= c * emb.users[u * d + k];
        }
    }

    // Propagation is linear with a symmetric normalized adjacency, so the
    // layer-0 gradient is the layer-averaged sum of repeated sweeps.
    let scale = 1.0 / (params.layers + 1) as f64;
    let mut g0_users = vec![0.0; g_users.len()];
    let mut g0_items = vec![0.0; g_items.len()];
    let mut hu = g_users;
    let mut hi = g_items;
    for l in 0..=params.layers {
        if l > 0 {
            let (nu, ni) = propagate_once(cg, d, &hu, &hi);
            hu = nu;
            hi = ni;
        }
        for (a, v) in g0_users.iter_mut().zip(&hu) {
            *a += v * scale;
        }
        for (a, v) in g0_items.iter_mut().zip(&hi) {
            *a += v * scale;
        }
    }

    // Initial embeddings are affine in the parameters: route the layer-0
    // gradient to templates and key rows.
    let user_slots = key_slots(&params.key_users, cg.num_users());
    let item_slots = key_slots(&params.key_items, cg.num_items());
    for u in 0..cg.num_users() {
        let g = &g0_users[u * d..(u + 1) * d];
        for (t, v) in grads.template_user.iter_mut().zip(g) {
            *t += v;
        }
        let norm = ((cg.user_degree(u) + 1) as f64).powf(-params.norm_exponent);
        for &i in cg.items_of(u) {
            if let Some(slot) = item_slots[i] {
                let row = &mut grads.key_item_emb[slot * d..(slot + 1) * d];
                for (r, v) in row.iter_mut().zip(g) {
                    *r += norm * v;
                }
            }
        }
    }
    for i in 0..cg.num_items() {
        let g = &g0_items[i * d..(i + 1) * d];
        for (t, v) in grads.template_item.iter_mut().zip(g) {
            *t += v;
        }
        let norm = ((cg.item_degree(i) + 1) as f64).powf(-params.norm_exponent);
        for &u in cg.users_of(i) {
            if let Some(slot) = user_slots[u] {
                let row = &mut grads.key_user_emb[slot * d..(slot + 1) * d];
                for (r, v) in row.iter_mut().zip(g) {
                    *r += norm * v;
                }
            }
        }
    }

    if self_loss_weight != 0.0 {
        let key_triples: Vec<(usize, usize, usize)> = triples
            .iter()
            .filter_map(|&(u, ip, ineg)| {
                let ku = user_slots.get(u).copied().flatten()?;
                let kp = item_slots.get(ip).copied().flatten()?;
                let kn = item_slots.get(ineg).copied().flatten()?;
                Some((ku, kp, kn))
            })
            .collect();
        if !key_triples.is_empty() {
            let ms = key_triples.len() as f64;
            for (ku, kp, kn) in key_triples {
                let eu = &params.key_user_emb[ku * d..(ku + 1) * d];
                let ep = &params.key_item_emb[kp * d..(kp + 1) * d];
                let en = &params.key_item_emb[kn * d..(kn + 1) * d];
                let diff: Vec<f64> = ep.iter().zip(en).map(|(a, b)| a - b).collect();
                // x = e_u^T W (e_p - e_n)
                let mut w_diff = vec![0.0; d];
                let mut wt_eu = vec![0.0; d];
                for a in 0..d {
                    for b in 0..d {
                        w_diff[a] += params.w_s[a * d + b] * diff[b];
                        wt_eu[b] += params.w_s[a * d + b] * eu[a];
                    }
                }
                let x = dot(eu, &w_diff);
                loss += self_loss_weight * softplus(-x) / ms;
                let c = -self_loss_weight * sigmoid(-x) / ms;
                for a in 0..d {
                    grads.key_user_emb[ku * d + a] += c * w_diff[a];
                    grads.key_item_emb[kp * d + a] += c * wt_eu[a];
                    grads.key_item_emb[kn * d + a] -= c * wt_eu[a];
                    for b in 0..d {
                        grads.w_s[a * d + b] += c * eu[a] * diff[b];
                    }
                }
            }
        }
    }

    (loss, grads)
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub loss_trace: Vec<f64>,
}

fn init_params(cg: &CollabGraph, config: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<ModelParams> {
    let (key_users, key_items) = select_keys(cg, config.key_fraction)?;
    let d = config.dim;
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect() };
    Ok(ModelParams {
        dim: d,
        layers: config.layers,
        norm_exponent: config.norm_exponent,
        key_user_emb: draw(key_users.len() * d),
        key_item_emb: draw(key_items.len() * d),
        key_users,
        key_items,
        template_user: draw(d),
        template_item: draw(d),
        w_s: draw(d * d),
    })
}

fn sample_negative(cg: &CollabGraph, user: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut candidate = rng.gen_range(0..cg.num_items());
    for _ in 0..100 {
        if !cg.has_edge(user, candidate) {
            break;
        }
        candidate = rng.gen_range(0..cg.num_items());
    }
    candidate
}

/// SGD training loop; fully deterministic for a given config: one seeded
/// stream drives initialization, positive sampling and negative sampling in
/// a fixed order.
pub fn train(cg: &CollabGraph, config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    if cg.num_edges() == 0 {
        return Err(Error::validation("cannot train on a graph with no interactions".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_params(cg, config, &mut rng)?;
    let mut loss_trace = Vec::with_capacity(config.epochs);
    let batches_per_epoch = cg.num_edges().div_ceil(config.batch_size);

    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        for _ in 0..batches_per_epoch {
            let mut triples = Vec::with_capacity(config.batch_size * config.negatives_per_positive);
            for _ in 0..config.batch_size {
                let e = cg.edges()[rng.gen_range(0..cg.num_edges())];
                for _ in 0..config.negatives_per_positive {
                    triples.push((e.user, e.item, sample_negative(cg, e.user, &mut rng)));
                }
            }
            let (loss, grads) = batch_loss_and_grads(&params, cg, &triples, config.self_loss_weight);
            epoch_loss += loss;
            for (b, block) in grads.blocks().into_iter().enumerate() {
                for (p, g) in params.block_mut(b).iter_mut().zip(block) {
                    *p -= config.learning_rate * g;
                }
            }
        }
        epoch_loss /= batches_per_epoch as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        loss_trace.push(epoch_loss);
    }
    Ok(TrainOutput { params, loss_trace })
}
