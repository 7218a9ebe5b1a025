//! Forest-fire sampling: burn outward from a start node, igniting forward
//! neighbors with probability `p_f` and backward neighbors with `p_b`, and
//! restart from a priority pool whenever the fire dies or a step completes.
//!
//! Restart priority: unused seed nodes first, then burned-but-unprocessed
//! nodes, then any unprocessed node.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{choose_from_set, choose_unmasked, SampleRun, SampleView, StartEvent, Working};

#[derive(Debug, Clone, Copy)]
pub(crate) enum FireVariant {
    /// Independent coin per neighbor.
    Bernoulli,
    /// Draw a geometric burn count (mean `(1 - p)^-1` unless overridden) and
    /// ignite that many uniformly chosen unburned neighbors.
    Geometric { mean_override: Option<f64> },
}

fn geometric_count(p: f64, mean_override: Option<f64>, rng: &mut ChaCha8Rng) -> usize {
    // K >= 1 with P(K = k) = p^(k-1) (1 - p), mean 1 / (1 - p).
    let fail = match mean_override {
        Some(m) => 1.0 - 1.0 / m,
        None => p,
    };
    if fail <= 0.0 {
        return 1;
    }
    if fail >= 1.0 {
        return usize::MAX;
    }
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    1 + (u.ln() / fail.ln()).floor() as usize
}

/// Ignite a subset of `w`'s unburned neighbors in one direction.
fn ignite(
    view: &dyn SampleView,
    w: usize,
    forward: bool,
    p: f64,
    variant: FireVariant,
    burning: &Working,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<usize>,
) {
    let neighbors = if forward { view.forward(w) } else { view.backward(w) };
    match variant {
        FireVariant::Bernoulli => {
            for &v in neighbors {
                if rng.gen::<f64>() < p && !burning.contains(v) {
                    out.push(v);
                }
            }
        }
        FireVariant::Geometric { mean_override } => {
            let mut pool: Vec<usize> = neighbors.iter().copied().filter(|&v| !burning.contains(v)).collect();
            let want = geometric_count(p, mean_override, rng).min(pool.len());
            for slot in 0..want {
                let k = rng.gen_range(slot..pool.len());
                pool.swap(slot, k);
                out.push(pool[slot]);
            }
        }
    }
}

pub(crate) fn forest_fire(
    view: &dyn SampleView,
    seeds: &[usize],
    budget: usize,
    p_f: f64,
    p_b: f64,
    variant: FireVariant,
    rng: &mut ChaCha8Rng,
) -> SampleRun {
    let n = view.num_nodes();
    let mut starts = Vec::new();
    if n == 0 {
        return SampleRun { nodes: Vec::new(), starts };
    }
    // A budget at or above |E| means "run to exhaustion": every node must be
    // burned and processed, otherwise stop as soon as the induced count
    // reaches the budget.
    let exhaust = budget >= view.num_edges();
    let mut burning = Working::new(view);
    let mut processed = vec![false; n];
    let mut processed_count = 0usize;
    // Burned but not yet processed.
    let mut pending: BTreeSet<usize> = BTreeSet::new();
    // Seeds not yet processed (burned or not): the highest-priority restarts.
    let mut seed_pool: BTreeSet<usize> = seeds.iter().copied().collect();
    let mut ignited = Vec::new();

    'fire: loop {
        if !exhaust && burning.induced_edges() >= budget {
            break;
        }
        if processed_count >= n {
            break;
        }
        // Pick the next node to process.
        let seeds_remaining = seed_pool.len();
        let w = if let Some(w) = choose_from_set(&seed_pool, rng) {
            w
        } else if let Some(w) = choose_from_set(&pending, rng) {
            w
        } else {
            match choose_unmasked(&processed, n - processed_count, rng) {
                Some(w) => w,
                None => break,
            }
        };
        starts.push(StartEvent { node: w, seeds_remaining });

        if burning.add(w) && !exhaust && burning.induced_edges() >= budget {
            break;
        }
        ignited.clear();
        ignite(view, w, true, p_f, variant, &burning, rng, &mut ignited);
        ignite(view, w, false, p_b, variant, &burning, rng, &mut ignited);
        seed_pool.remove(&w);
        pending.remove(&w);
        processed[w] = true;
        processed_count += 1;
        for &v in &ignited {
            if burning.add(v) {
                if !processed[v] {
                    pending.insert(v);
                }
                if !exhaust && burning.induced_edges() >= budget {
                    break 'fire;
                }
            }
        }
    }

    SampleRun { nodes: burning.into_nodes(), starts }
}
