//! Rayon maps against the forced-sequential path on the hot loops.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use localboost::localize::{avg_pairwise_distance, sample_cluster};
use localboost::par;
use localboost::weighting::{perturb_weights, select_weights, ScoreTable, WeightVector};

fn points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-4.0..4.0)).collect())
        .collect()
}

const MODES: [(&str, bool); 2] = [("parallel", false), ("sequential", true)];

fn distance(c: &mut Criterion) {
    let pts = points(2000, 16, 1);
    let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
    let mut g = c.benchmark_group("avg_pairwise_distance_2000x16");
    g.sample_size(10);
    for (name, seq) in MODES {
        par::set_sequential(seq);
        g.bench_function(name, |b| {
            b.iter(|| avg_pairwise_distance(black_box(&refs), 2000, 0).unwrap())
        });
    }
    g.finish();
    par::set_sequential(false);
}

fn cluster(c: &mut Criterion) {
    let pts = points(8000, 16, 2);
    let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
    let candidates: Vec<usize> = (0..pts.len()).collect();
    let anchor = vec![0.0; 16];
    let mut g = c.benchmark_group("sample_cluster_8000x16");
    for (name, seq) in MODES {
        par::set_sequential(seq);
        g.bench_function(name, |b| {
            b.iter(|| sample_cluster(black_box(&anchor), &refs, &candidates, 12.0, 32).unwrap())
        });
    }
    g.finish();
    par::set_sequential(false);
}

fn selection(c: &mut Criterion) {
    let (rows, classes) = (500, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut g = c.benchmark_group("select_weights_500x4");
    for members in [8, 40] {
        let mut table = ScoreTable::new(rows, classes);
        for _ in 0..members {
            table
                .push(
                    (0..rows * classes)
                        .map(|_| rng.gen_range(0.0..1.0))
                        .collect(),
                )
                .unwrap();
        }
        let gold: Vec<u32> = (0..rows).map(|_| rng.gen_range(1..=4)).collect();
        let v = WeightVector(vec![1.0; members]);
        let candidates = perturb_weights(&v, 16, 0.0, 0.1, 4).unwrap();
        for (name, seq) in MODES {
            par::set_sequential(seq);
            g.bench_with_input(BenchmarkId::new(name, members), &members, |b, _| {
                b.iter(|| select_weights(black_box(&candidates), &table, &gold).unwrap())
            });
        }
    }
    g.finish();
    par::set_sequential(false);
}

criterion_group!(benches, distance, cluster, selection);
criterion_main!(benches);
