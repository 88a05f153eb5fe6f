//! Model selection on one thread vs the full rayon pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mlearn::linalg::Matrix;
use mlearn::model::MahalanobisModel;
use mlearn::modelsel::{cross_validate, grid_search, knn_predict, GridSpec, Learner, Metric, Task};
use mlearn::rng::SplitMix64;
use mlearn::supervised::{SupervisedAlgorithm, SupervisedConfig};
use mlearn::tuples::LabeledDataset;

fn dataset(n: usize, d: usize) -> LabeledDataset {
    let mut rng = SplitMix64::new(42);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..d).map(|f| (i % 3) as f64 * (f % 2) as f64 + rng.normal()).collect())
        .collect();
    let y = (0..n).map(|i| (i % 3) as i64).collect();
    LabeledDataset::classification(Matrix::from_rows(&rows).unwrap(), y).unwrap()
}

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    vec![
        ("1-thread", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("pool", rayon::ThreadPoolBuilder::new().num_threads(all).build().unwrap()),
    ]
}

fn task() -> Task {
    let mut cfg = SupervisedConfig::new(SupervisedAlgorithm::Nca);
    cfg.max_iter = 20;
    Task::Supervised {
        dataset: dataset(90, 4),
        learner: Learner::Supervised(cfg),
        knn_k: 3,
    }
}

fn bench(c: &mut Criterion) {
    let task = task();
    let grid = GridSpec::from_json(r#"{"knn_k": [1, 3, 5], "max_iter": [10, 20]}"#).unwrap();
    let train = dataset(400, 6);
    let test = dataset(400, 6);
    let model = MahalanobisModel::from_components(Matrix::identity(6)).unwrap();

    let mut g = c.benchmark_group("model_selection");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new("cross_validate", name), |b| {
            b.iter(|| pool.install(|| cross_validate(&task, 5, 0, Metric::Accuracy).unwrap()))
        });
        g.bench_function(BenchmarkId::new("grid_search", name), |b| {
            b.iter(|| pool.install(|| grid_search(&task, &grid, 3, 0, Metric::Accuracy).unwrap()))
        });
        g.bench_function(BenchmarkId::new("knn_predict", name), |b| {
            b.iter(|| pool.install(|| knn_predict(&train.x, train.classes().unwrap(), &test.x, 5, &model).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
