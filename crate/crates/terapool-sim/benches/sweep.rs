//! Parallel-vs-sequential comparison for independent simulation points.
//!
//! The default build fans sweep points out over rayon; the same grids run
//! here through the always-sequential path for a direct comparison
//! (`cargo bench`; build with `--no-default-features` to benchmark the
//! sequential fallback as the primary path).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use terapool_sim::kernels::{KernelDims, KernelSimConfig, KernelSpec};
use terapool_sim::parallel::{par_map, seq_map};
use terapool_sim::topology::ClusterConfig;
use terapool_sim::traffic::{run_load_sweep, run_traffic_point, PoissonProfile, SweepSpec};

fn bench_cfg() -> ClusterConfig {
    ClusterConfig {
        tiles_per_subgroup: 2,
        subgroups_per_group: 2,
        groups: 2,
        cores_per_tile: 4,
        banks_per_tile: 8,
        ..ClusterConfig::default()
    }
}

fn sweep_grid(c: &mut Criterion) {
    let cfg = bench_cfg();
    let spec = SweepSpec {
        lambdas: vec![0.05, 0.10, 0.15, 0.20],
        seeds: vec![1, 2],
        duration: 3_000,
        warmup: 300,
    };
    let mut group = c.benchmark_group("sweep_grid");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("points", "parallel"), |b| {
        b.iter(|| run_load_sweep(&cfg, &spec).unwrap())
    });
    group.bench_function(BenchmarkId::new("points", "sequential"), |b| {
        b.iter(|| {
            let jobs: Vec<PoissonProfile> = spec
                .lambdas
                .iter()
                .flat_map(|&lambda| spec.seeds.iter().map(move |&seed| PoissonProfile {
                    lambda,
                    seed,
                    duration: spec.duration,
                    warmup: spec.warmup,
                }))
                .collect();
            seq_map(jobs, |p| run_traffic_point(&cfg, &p).unwrap())
        })
    });
    group.finish();
}

fn traffic_point(c: &mut Criterion) {
    let cfg = bench_cfg();
    let profile = PoissonProfile { lambda: 0.2, seed: 7, duration: 5_000, warmup: 500 };
    c.bench_function("traffic_point_5k_cycles", |b| {
        b.iter(|| run_traffic_point(&cfg, &profile).unwrap())
    });
}

fn kernel_profiles(c: &mut Criterion) {
    let cfg = bench_cfg();
    let spec = KernelSpec::new(KernelDims::SysInv { n_problems: 128, dim: 4 });
    let sim = KernelSimConfig::default();
    let profiles = vec![
        terapool_sim::topology::LatencyProfile::P1_3_5_7,
        terapool_sim::topology::LatencyProfile::P1_3_5_9,
    ];
    let mut group = c.benchmark_group("kernel_profiles");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("sysinv", "parallel"), |b| {
        b.iter(|| {
            par_map(profiles.clone(), |p| {
                let cluster = ClusterConfig { latency_profile: p, ..cfg.clone() };
                spec.simulate(&cluster, &sim, 0).unwrap().total_cycles
            })
        })
    });
    group.bench_function(BenchmarkId::new("sysinv", "sequential"), |b| {
        b.iter(|| {
            seq_map(profiles.clone(), |p| {
                let cluster = ClusterConfig { latency_profile: p, ..cfg.clone() };
                spec.simulate(&cluster, &sim, 0).unwrap().total_cycles
            })
        })
    });
    group.finish();
}

criterion_group!(benches, sweep_grid, traffic_point, kernel_profiles);
criterion_main!(benches);
