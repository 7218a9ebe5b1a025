//! Random-walk sampling with restart (walk back to the start node) or jump
//! (teleport to a uniform random node), restart probability `p_c` per step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{choose_from_set, choose_unmasked, SampleRun, SampleView, StartEvent, Working};

#[allow(clippy::too_many_arguments)]
pub(crate) fn random_walk_sample(
    view: &dyn SampleView,
    seeds: &[usize],
    budget: usize,
    p_c: f64,
    walk_len: usize,
    walks_per_node: usize,
    jump: bool,
    rng: &mut ChaCha8Rng,
) -> SampleRun {
    let n = view.num_nodes();
    let mut starts = Vec::new();
    if n == 0 {
        return SampleRun { nodes: Vec::new(), starts };
    }
    let exhaust = budget >= view.num_edges();
    let mut visited = Working::new(view);
    let mut seed_pool: std::collections::BTreeSet<usize> = seeds.iter().copied().collect();

    'outer: loop {
        if !exhaust && visited.induced_edges() >= budget {
            break;
        }
        if visited.node_count() >= n {
            break;
        }
        // Start from an unvisited seed if any remain, otherwise any
        // unvisited node.
        seed_pool.retain(|&s| !visited.contains(s));
        let seeds_remaining = seed_pool.len();
        let start = match choose_from_set(&seed_pool, rng) {
            Some(s) => s,
            None => {
                let mask: Vec<bool> = (0..n).map(|v| visited.contains(v)).collect();
                match choose_unmasked(&mask, n - visited.node_count(), rng) {
                    Some(s) => s,
                    None => break,
                }
            }
        };
        starts.push(StartEvent { node: start, seeds_remaining });
        seed_pool.remove(&start);
        visited.add(start);
        if !exhaust && visited.induced_edges() >= budget {
            break;
        }

        for _ in 0..walks_per_node.max(1) {
            let mut cur = start;
            for _ in 0..walk_len {
                cur = if rng.gen::<f64>() < p_c {
                    if jump {
                        rng.gen_range(0..n)
                    } else {
                        start
                    }
                } else {
                    let nb = view.walk_neighbors(cur);
                    if nb.is_empty() {
                        break;
                    }
                    nb[rng.gen_range(0..nb.len())]
                };
                visited.add(cur);
                if !exhaust && visited.induced_edges() >= budget {
                    break 'outer;
                }
            }
        }
    }

    SampleRun { nodes: visited.into_nodes(), starts }
}
