//! Bipartite scan samplers: PS takes users in a seeded random order together
//! with their full neighborhoods, TS takes edges newest-first, NS takes items
//! least-popular-first.

use rand_chacha::ChaCha8Rng;

use crate::graph::CollabGraph;
use crate::ingest::seeded_permutation;

use super::{CgView, SampleRun, Working};

/// Users in a seeded random order, each added atomically with all of its
/// items; stops after the user whose addition reaches the edge budget.
pub(crate) fn pinsage_sample(cg: &CollabGraph, budget: usize, rng: &mut ChaCha8Rng) -> SampleRun {
    let view = CgView::new(cg);
    let mut w = Working::new(&view);
    for user in seeded_permutation(cg.num_users(), rng) {
        if w.induced_edges() >= budget {
            break;
        }
        w.add(view.user_id(user));
        for &item in cg.items_of(user) {
            w.add(view.item_id(item));
        }
    }
    SampleRun { nodes: w.into_nodes(), starts: Vec::new() }
}

/// Edge endpoints newest-first; ties broken toward the later input edge.
pub(crate) fn temporal_sample(cg: &CollabGraph, budget: usize) -> SampleRun {
    let view = CgView::new(cg);
    let mut w = Working::new(&view);
    let mut order: Vec<usize> = (0..cg.num_edges()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(cg.edges()[i].time), std::cmp::Reverse(i)));
    'scan: for i in order {
        let e = cg.edges()[i];
        for node in [view.user_id(e.user), view.item_id(e.item)] {
            if w.add(node) && w.induced_edges() >= budget {
                break 'scan;
            }
        }
    }
    SampleRun { nodes: w.into_nodes(), starts: Vec::new() }
}

/// Items least-popular-first (degree ascending, index ascending), each
/// followed by its users in ascending order.
pub(crate) fn niche_sample(cg: &CollabGraph, budget: usize) -> SampleRun {
    let view = CgView::new(cg);
    let mut w = Working::new(&view);
    let mut items: Vec<usize> = (0..cg.num_items()).collect();
    items.sort_by_key(|&i| (cg.users_of(i).len(), i));
    'scan: for item in items {
        if w.add(view.item_id(item)) && w.induced_edges() >= budget {
            break;
        }
        for &user in cg.users_of(item) {
            if w.add(view.user_id(user)) && w.induced_edges() >= budget {
                break 'scan;
            }
        }
    }
    SampleRun { nodes: w.into_nodes(), starts: Vec::new() }
}
