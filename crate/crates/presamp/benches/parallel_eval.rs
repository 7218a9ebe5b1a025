//! Per-user ranking throughput: sequential loop vs the rayon-parallel path
//! (enabled by the default `parallel` feature) on frozen embeddings.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use presamp::eval::{build_inference_graph, rank_users_seq};
use presamp::graph::CollabGraph;
use presamp::ingest::{generate_synthetic, holdout_context, temporal_split, EvalUser, SyntheticSpec};
use presamp::model::{compute_embeddings, train, Embeddings, TrainConfig};

struct Fixture {
    emb: Embeddings,
    inference: CollabGraph,
    full: CollabGraph,
    eval_users: Vec<EvalUser>,
}

fn fixture(users: usize, items: usize) -> Fixture {
    let (full, _) = generate_synthetic(&SyntheticSpec {
        num_users: users,
        num_items: items,
        edges_per_user: 10,
        seed: 17,
        ..Default::default()
    })
    .unwrap();
    let skeleton = temporal_split(&full, Default::default()).unwrap();
    let split = holdout_context(&full, &skeleton, 0.5, 1, 1).unwrap();
    let config = TrainConfig { dim: 32, epochs: 2, batch_size: 128, ..Default::default() };
    let out = train(&split.train, &config).unwrap();
    let inference = build_inference_graph(&split.train, &full, &split.test).unwrap();
    let emb = compute_embeddings(&out.params, &inference);
    Fixture { emb, inference, full, eval_users: split.test }
}

fn bench_ranking(c: &mut Criterion) {
    let mut group = c.benchmark_group("rank_users");
    for (users, items) in [(300, 150), (1000, 400)] {
        let fx = fixture(users, items);
        let label = format!("{}u_{}i_{}eval", users, items, fx.eval_users.len());
        group.bench_with_input(BenchmarkId::new("sequential", &label), &fx, |b, fx| {
            b.iter(|| rank_users_seq(&fx.emb, &fx.inference, &fx.full, &fx.eval_users))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", &label), &fx, |b, fx| {
            b.iter(|| presamp::eval::rank_users_par(&fx.emb, &fx.inference, &fx.full, &fx.eval_users))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_ranking);
criterion_main!(benches);
