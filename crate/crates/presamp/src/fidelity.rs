//! Structural fidelity of a sample against its source graph: two-sample KS
//! D-statistics over degree distributions, skewness of interaction times,
//! user ratio and density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    degree_sequence_cg, CgSubgraph, CollabGraph, Direction, KgSubgraph, KnowledgeGraph, NodeKind,
};

/// Exact two-sample Kolmogorov-Smirnov D-statistic between two degree
/// multisets: sup over jump points of |F_a(x) - F_b(x)|.
pub fn ks_d_statistic(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("KS statistic needs two nonempty multisets".to_string()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable();
    sb.sort_unstable();
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < sa.len() || j < sb.len() {
        // Advance past all copies of the smaller next value in both arrays,
        // then evaluate the CDF gap just after that jump point.
        let x = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < sa.len() && sa[i] == x {
            i += 1;
        }
        while j < sb.len() && sb[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Fisher-Pearson moment coefficient of skewness g1 = m3 / m2^(3/2) with
/// population central moments.
pub fn fisher_pearson_skewness(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 3 {
        return Err(Error::validation(format!("skewness needs n >= 3, got {n}")));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
    if m2 <= 0.0 {
        return Err(Error::validation("skewness undefined for zero variance".to_string()));
    }
    Ok(m3 / m2.powf(1.5))
}

/// Counts for one side of the comparison.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GraphCounts {
    pub users: usize,
    pub items: usize,
    pub edges: usize,
    pub entities: usize,
    pub triples: usize,
}

fn counts(cg: &CollabGraph, kg: &KnowledgeGraph) -> GraphCounts {
    GraphCounts {
        users: cg.num_users(),
        items: cg.num_items(),
        edges: cg.num_edges(),
        entities: kg.num_entities(),
        triples: kg.num_triples(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityReport {
    /// KS D over user degrees, original vs sample.
    pub d_user: f64,
    /// KS D over item degrees.
    pub d_item: f64,
    /// KS D over KG degrees, split by entity kind (entities mapped from
    /// items vs purely descriptive ones) and direction; absent when either
    /// population is empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_kg_item_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_kg_item_out: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_kg_desc_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_kg_desc_out: Option<f64>,
    /// Skewness of interaction timestamps.
    pub stime_original: f64,
    pub stime_sample: f64,
    /// |U| / (|U| + |I|).
    pub user_ratio_original: f64,
    pub user_ratio_sample: f64,
    /// |E| / (|U| * |I|).
    pub density_cg_original: f64,
    pub density_cg_sample: f64,
    /// |T| / |V_kg|^2; absent for an empty KG.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_kg_original: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_kg_sample: Option<f64>,
    pub original: GraphCounts,
    pub sample: GraphCounts,
}

fn user_ratio(cg: &CollabGraph) -> f64 {
    let total = cg.num_users() + cg.num_items();
    if total == 0 {
        0.0
    } else {
        cg.num_users() as f64 / total as f64
    }
}

fn density_cg(cg: &CollabGraph) -> f64 {
    let denom = cg.num_users() * cg.num_items();
    if denom == 0 {
        0.0
    } else {
        cg.num_edges() as f64 / denom as f64
    }
}

fn density_kg(kg: &KnowledgeGraph) -> Option<f64> {
    if kg.num_entities() == 0 {
        None
    } else {
        Some(kg.num_triples() as f64 / (kg.num_entities() * kg.num_entities()) as f64)
    }
}

/// Per-kind directed degree multisets: (item entities, descriptive entities).
fn kg_kind_degrees(kg: &KnowledgeGraph, direction: Direction) -> (Vec<usize>, Vec<usize>) {
    let item_entities: std::collections::BTreeSet<usize> =
        kg.item_entity_map().values().copied().collect();
    let deg = |e: usize| match direction {
        Direction::In => kg.in_degree(e),
        Direction::Out => kg.out_degree(e),
        Direction::Undirected => unreachable!(),
    };
    let mut item_deg = Vec::new();
    let mut desc_deg = Vec::new();
    for e in 0..kg.num_entities() {
        if item_entities.contains(&e) {
            item_deg.push(deg(e));
        } else {
            desc_deg.push(deg(e));
        }
    }
    (item_deg, desc_deg)
}

fn ks_or_none(a: &[usize], b: &[usize]) -> Result<Option<f64>> {
    if a.is_empty() || b.is_empty() {
        Ok(None)
    } else {
        ks_d_statistic(a, b).map(Some)
    }
}

fn timestamps(cg: &CollabGraph) -> Vec<f64> {
    cg.edges().iter().map(|e| e.time as f64).collect()
}

/// Compare a sampled (CG, KG) pair against the graphs it was drawn from.
/// Sample degrees are computed inside the sample, and isolated nodes
/// contribute degree zero on both sides.
pub fn fidelity_report(
    original_cg: &CollabGraph,
    original_kg: &KnowledgeGraph,
    sample_cg: &CgSubgraph,
    sample_kg: &KgSubgraph,
) -> Result<FidelityReport> {
    let d_user = ks_d_statistic(
        &degree_sequence_cg(original_cg, NodeKind::User, Direction::Undirected)?,
        &degree_sequence_cg(&sample_cg.graph, NodeKind::User, Direction::Undirected)?,
    )?;
    let d_item = ks_d_statistic(
        &degree_sequence_cg(original_cg, NodeKind::Item, Direction::Undirected)?,
        &degree_sequence_cg(&sample_cg.graph, NodeKind::Item, Direction::Undirected)?,
    )?;

    let (d_kg_item_in, d_kg_item_out, d_kg_desc_in, d_kg_desc_out) = if original_kg.is_empty() {
        (None, None, None, None)
    } else {
        let mut out = [None, None, None, None];
        for (slot_pair, direction) in [(0, Direction::In), (1, Direction::Out)] {
            let (orig_item, orig_desc) = kg_kind_degrees(original_kg, direction);
            let (samp_item, samp_desc) = kg_kind_degrees(&sample_kg.graph, direction);
            out[slot_pair] = ks_or_none(&orig_item, &samp_item)?;
            out[slot_pair + 2] = ks_or_none(&orig_desc, &samp_desc)?;
        }
        (out[0], out[1], out[2], out[3])
    };

    Ok(FidelityReport {
        d_user,
        d_item,
        d_kg_item_in,
        d_kg_item_out,
        d_kg_desc_in,
        d_kg_desc_out,
        stime_original: fisher_pearson_skewness(&timestamps(original_cg))?,
        stime_sample: fisher_pearson_skewness(&timestamps(&sample_cg.graph))?,
        user_ratio_original: user_ratio(original_cg),
        user_ratio_sample: user_ratio(&sample_cg.graph),
        density_cg_original: density_cg(original_cg),
        density_cg_sample: density_cg(&sample_cg.graph),
        density_kg_original: density_kg(original_kg),
        density_kg_sample: density_kg(&sample_kg.graph),
        original: counts(original_cg, original_kg),
        sample: counts(&sample_cg.graph, &sample_kg.graph),
    })
}

/// Brute-force KS oracle: evaluate both CDFs at every distinct value.
#[cfg(test)]
pub(crate) fn ks_oracle(a: &[usize], b: &[usize]) -> f64 {
    let mut points: Vec<usize> = a.iter().chain(b).copied().collect();
    points.sort_unstable();
    points.dedup();
    let cdf = |s: &[usize], x: usize| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    points
        .iter()
        .map(|&x| (cdf(a, x) - cdf(b, x)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{induced_subgraph_cg, induced_subgraph_kg, NodeRef, NodeSet};
    use crate::ingest::{generate_synthetic, SyntheticSpec};
    use crate::sample::{sample_pipeline, SampleSpec, SamplerKind};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_hand_examples() {
        assert_eq!(ks_d_statistic(&[1, 1, 2], &[1, 2, 2]).unwrap(), 1.0 / 3.0);
        assert_eq!(ks_d_statistic(&[1], &[2]).unwrap(), 1.0);
        assert_eq!(ks_d_statistic(&[3, 1, 4, 1, 5], &[3, 1, 4, 1, 5]).unwrap(), 0.0);
    }

    #[test]
    fn ks_rejects_empty() {
        assert!(ks_d_statistic(&[], &[1]).is_err());
        assert!(ks_d_statistic(&[1], &[]).is_err());
    }

    #[test]
    fn ks_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let na = rng.gen_range(1..=50);
            let nb = rng.gen_range(1..=50);
            let a: Vec<usize> = (0..na).map(|_| rng.gen_range(0..=20)).collect();
            let b: Vec<usize> = (0..nb).map(|_| rng.gen_range(0..=20)).collect();
            let fast = ks_d_statistic(&a, &b).unwrap();
            let slow = ks_oracle(&a, &b);
            assert!((fast - slow).abs() <= 1e-12, "{a:?} vs {b:?}: {fast} != {slow}");
        }
    }

    #[test]
    fn skewness_hand_examples() {
        assert_eq!(fisher_pearson_skewness(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let g1 = fisher_pearson_skewness(&[1.0, 1.0, 10.0]).unwrap();
        assert!((g1 - 54.0 / 18.0f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn skewness_rejects_degenerate_input() {
        assert!(fisher_pearson_skewness(&[1.0, 2.0]).is_err());
        assert!(fisher_pearson_skewness(&[5.0, 5.0, 5.0]).is_err());
    }

    proptest! {
        #[test]
        fn ks_symmetric(a in prop::collection::vec(0usize..20, 1..40),
                        b in prop::collection::vec(0usize..20, 1..40)) {
            let ab = ks_d_statistic(&a, &b).unwrap();
            let ba = ks_d_statistic(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn ks_self_is_zero(a in prop::collection::vec(0usize..20, 1..40)) {
            prop_assert_eq!(ks_d_statistic(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn skewness_affine_equivariant(
            xs in prop::collection::vec(-100.0f64..100.0, 3..30),
            c in prop_oneof![(-8.0f64..-0.25), (0.25f64..8.0)],
            d in -50.0f64..50.0,
        ) {
            let base = match fisher_pearson_skewness(&xs) {
                Ok(g) => g,
                Err(_) => return Ok(()), // zero variance draw
            };
            let mapped: Vec<f64> = xs.iter().map(|x| c * x + d).collect();
            let got = fisher_pearson_skewness(&mapped).unwrap();
            let want = c.signum() * base;
            prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()),
                "c={} got={} want={}", c, got, want);
        }
    }

    fn synth() -> (CollabGraph, KnowledgeGraph) {
        generate_synthetic(&SyntheticSpec { seed: 5, ..Default::default() }).unwrap()
    }

    #[test]
    fn self_comparison_is_all_zero() {
        let (cg, kg) = synth();
        let all_cg = {
            let mut s = NodeSet::new();
            for u in 0..cg.num_users() {
                s.insert(NodeRef::user(u));
            }
            for i in 0..cg.num_items() {
                s.insert(NodeRef::item(i));
            }
            s
        };
        let all_kg = {
            let mut s = NodeSet::new();
            for e in 0..kg.num_entities() {
                s.insert(NodeRef::entity(e));
            }
            s
        };
        let scg = induced_subgraph_cg(&cg, &all_cg).unwrap();
        let skg = induced_subgraph_kg(&kg, &all_kg).unwrap();
        let r = fidelity_report(&cg, &kg, &scg, &skg).unwrap();
        assert_eq!(r.d_user, 0.0);
        assert_eq!(r.d_item, 0.0);
        assert_eq!(r.d_kg_item_in, Some(0.0));
        assert_eq!(r.d_kg_desc_out, Some(0.0));
        assert_eq!(r.user_ratio_original, r.user_ratio_sample);
        assert_eq!(r.density_cg_original, r.density_cg_sample);
        assert!((r.stime_original - r.stime_sample).abs() < 1e-12);
    }

    #[test]
    fn newest_half_sample_shifts_time_skew_negative_side_down() {
        // Keeping only the newest edges concentrates mass at high timestamps,
        // so the sample's skewness must move left (more negative) relative to
        // the near-symmetric uniform original.
        let (cg, kg) = synth();
        let spec = SampleSpec::new(SamplerKind::Ts, 0.5, 0);
        let out = sample_pipeline(&cg, &kg, &spec).unwrap();
        let r = fidelity_report(&cg, &kg, &out.cg, &out.kg).unwrap();
        assert!(
            r.stime_sample < r.stime_original,
            "sample {} vs original {}",
            r.stime_sample,
            r.stime_original
        );
    }

    #[test]
    fn degree_gap_matches_oracle_on_filtered_sample() {
        // Drop every user of degree > 1 from a tiny graph; the user-degree D
        // must equal the brute-force CDF comparison.
        let cg = CollabGraph::new(
            4,
            3,
            vec![
                crate::graph::InteractionEdge { user: 0, item: 0, time: 1 },
                crate::graph::InteractionEdge { user: 0, item: 1, time: 2 },
                crate::graph::InteractionEdge { user: 1, item: 1, time: 3 },
                crate::graph::InteractionEdge { user: 2, item: 2, time: 4 },
                crate::graph::InteractionEdge { user: 3, item: 2, time: 9 },
            ],
        )
        .unwrap();
        let mut keep = NodeSet::new();
        for u in 0..4 {
            if cg.user_degree(u) <= 1 {
                keep.insert(NodeRef::user(u));
            }
        }
        for i in 0..3 {
            keep.insert(NodeRef::item(i));
        }
        let scg = induced_subgraph_cg(&cg, &keep).unwrap();
        let orig: Vec<usize> = (0..4).map(|u| cg.user_degree(u)).collect();
        let samp: Vec<usize> = (0..scg.graph.num_users()).map(|u| scg.graph.user_degree(u)).collect();
        let skg = induced_subgraph_kg(&KnowledgeGraph::empty(), &NodeSet::new()).unwrap();
        let r = fidelity_report(&cg, &KnowledgeGraph::empty(), &scg, &skg).unwrap();
        assert_eq!(r.d_user, ks_oracle(&orig, &samp));
        assert!(r.d_kg_item_in.is_none());
        assert!(r.density_kg_original.is_none());
    }
}
