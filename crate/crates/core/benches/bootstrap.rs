use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ppboot::dataset::{split_trial, LabeledDataset};
use ppboot::experiments::{
    generate_synthetic, run_coverage_study, Dgp, Method, PredictionModel, SyntheticSpec,
    TrialConfig,
};
use ppboot::ppboot::ppboot_interval;
use ppboot::resampling::{phase, RngStream};
use ppboot::{BootstrapConfig, Estimand, EstimandSpec, Execution};

const MODES: [(&str, Execution); 2] =
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn data(dgp: Dgp, rows: usize) -> LabeledDataset {
    let spec = SyntheticSpec { dgp, predictions: PredictionModel::NoisyTruth { rho: 0.9 }, total_rows: rows };
    generate_synthetic(&spec, &RngStream::new(1, &[phase::SYNTHETIC])).unwrap()
}

fn bench_interval(c: &mut Criterion) {
    let cases = [
        ("mean", data(Dgp::BernoulliMean { p: 0.3 }, 10_000), Estimand::Mean),
        (
            "ols_coef",
            data(Dgp::GaussianLinear { coef: vec![1.0, -0.5], noise_sd: 1.0, intercept: 0.0 }, 5_000),
            Estimand::OlsCoef { target_index: 1, intercept: true },
        ),
    ];
    let mut group = c.benchmark_group("ppboot_interval");
    group.sample_size(10);
    for (name, full, kind) in &cases {
        let (l, u) = split_trial(full, 500, &RngStream::new(2, &[phase::SPLIT])).unwrap();
        let spec = EstimandSpec::from(kind.clone());
        for (mode, exec) in MODES {
            let cfg = BootstrapConfig { execution: exec, ..Default::default() };
            group.bench_with_input(BenchmarkId::new(*name, mode), &cfg, |b, cfg| {
                b.iter(|| ppboot_interval(&l, &u, &spec, cfg, &cfg.root_stream()).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_study(c: &mut Criterion) {
    let full = data(Dgp::BernoulliMean { p: 0.3 }, 5_000);
    let mut group = c.benchmark_group("coverage_study");
    group.sample_size(10);
    for (mode, exec) in MODES {
        let mut cfg = TrialConfig::new(vec![200], vec![Method::Ppboot, Method::Classical], Estimand::Mean.into());
        cfg.trials = 20;
        cfg.bootstrap.iterations = 200;
        cfg.bootstrap.execution = exec;
        group.bench_function(mode, |b| b.iter(|| run_coverage_study(&full, &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_interval, bench_study);
criterion_main!(benches);
