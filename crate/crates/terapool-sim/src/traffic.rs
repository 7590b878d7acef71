//! Synthetic Poisson traffic and load-sweep measurement.
//!
//! Cores are replaced by closed-loop generators: every cycle each generator
//! issues a request with probability lambda (the discrete-time Poisson
//! approximation for single-issue cores) toward a uniformly random bank.
//! Requests blocked by the outstanding limit or network backpressure wait in
//! a small bounded queue.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

use crate::engine::{Engine, Outcome, SimStats};
use crate::error::{Result, SimError};
use crate::parallel::par_map;
use crate::topology::ClusterConfig;

/// Generator-side queue bound; arrivals beyond this are dropped and counted.
pub const SOURCE_QUEUE_CAP: usize = 16;

/// One Poisson traffic point.
#[derive(Debug, Clone, Copy)]
pub struct PoissonProfile {
    /// Offered load in requests per core per cycle, `0 <= lambda <= 1`.
    pub lambda: f64,
    pub seed: u64,
    /// Cycles during which generators produce arrivals.
    pub duration: u64,
    /// Leading cycles excluded from latency/throughput statistics.
    pub warmup: u64,
}

impl PoissonProfile {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 || self.lambda > 1.0 {
            return Err(SimError::ConfigError(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.warmup >= self.duration {
            return Err(SimError::ConfigError(format!(
                "warmup ({}) must be shorter than duration ({})",
                self.warmup, self.duration
            )));
        }
        Ok(())
    }
}

/// Independent per-core arrival stream; all sweep randomness flows from
/// (profile seed, core id) through counter-mode streams.
pub struct PoissonSource {
    rng: ChaCha8Rng,
    lambda: f64,
    total_words: u64,
}

impl PoissonSource {
    pub fn new(profile: &PoissonProfile, core: u32, cfg: &ClusterConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
        rng.set_stream(core as u64 + 1);
        Self { rng, lambda: profile.lambda, total_words: cfg.total_l1_words() }
    }

    /// One cycle of the arrival process: `Some(addr)` on an arrival.
    pub fn draw(&mut self) -> Option<u64> {
        if self.rng.gen::<f64>() < self.lambda {
            Some(self.rng.gen_range(0..self.total_words))
        } else {
            None
        }
    }
}

/// Materialized injection schedule for one core: (cycle, word address).
pub fn generate(profile: &PoissonProfile, core: u32, cfg: &ClusterConfig) -> Result<Vec<(u64, u64)>> {
    profile.validate()?;
    let mut source = PoissonSource::new(profile, core, cfg);
    let mut schedule = Vec::new();
    for cycle in 0..profile.duration {
        if let Some(addr) = source.draw() {
            schedule.push((cycle, addr));
        }
    }
    Ok(schedule)
}

/// Run one traffic point to quiescence and return its statistics.
pub fn run_traffic_point(cfg: &ClusterConfig, profile: &PoissonProfile) -> Result<SimStats> {
    profile.validate()?;
    let n_cores = cfg.total_cores();
    let mut engine = Engine::new(cfg)?;
    engine.set_measure_window(profile.warmup, profile.duration);
    let mut sources: Vec<PoissonSource> =
        (0..n_cores).map(|c| PoissonSource::new(profile, c, cfg)).collect();
    let mut queues: Vec<VecDeque<u64>> = vec![VecDeque::new(); n_cores as usize];
    let mut dropped = 0u64;
    let drain_budget = profile.duration + 200_000;

    loop {
        engine.begin_cycle();
        let cycle = engine.cycle();
        let generating = cycle < profile.duration;
        if !generating && engine.in_flight() == 0 && queues.iter().all(|q| q.is_empty()) {
            break;
        }
        if cycle > drain_budget {
            return Err(SimError::DeadlockSuspected {
                budget: drain_budget,
                in_flight: engine.in_flight(),
            });
        }
        for core in 0..n_cores {
            if generating {
                if let Some(addr) = sources[core as usize].draw() {
                    let q = &mut queues[core as usize];
                    if q.len() >= SOURCE_QUEUE_CAP {
                        dropped += 1;
                    } else {
                        q.push_back(addr);
                    }
                }
            }
            if let Some(&addr) = queues[core as usize].front() {
                if engine.can_issue(core) {
                    engine.attempt(core, addr, false)?;
                }
            }
        }
        engine.finish_cycle();
        for core in 0..n_cores {
            if matches!(engine.outcome(core), Outcome::Accepted { .. }) {
                queues[core as usize].pop_front();
            }
        }
    }

    let mut stats = std::mem::replace(&mut engine.stats, SimStats::new(n_cores));
    stats.total_cycles = engine.cycle();
    stats.dropped = dropped;
    stats.measure_cycles = profile.duration - profile.warmup;
    stats.throughput =
        stats.measured_accepted as f64 / (n_cores as f64 * stats.measure_cycles as f64);
    Ok(stats)
}

/// Sweep specification: a lambda grid crossed with seeds.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub duration: u64,
    pub warmup: u64,
}

impl SweepSpec {
    /// Grid `lambda_min..=lambda_max` in `step` increments.
    pub fn grid(lambda_min: f64, lambda_max: f64, step: f64, seeds: Vec<u64>) -> Self {
        let mut lambdas = Vec::new();
        let mut l = lambda_min;
        while l <= lambda_max + 1e-12 {
            lambdas.push((l * 1e9).round() / 1e9);
            l += step;
        }
        Self { lambdas, seeds, duration: 20_000, warmup: 2_000 }
    }
}

/// One measured sweep point.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub lambda: f64,
    pub seed: u64,
    /// Accepted requests per core per cycle in the measurement window.
    pub throughput: f64,
    pub mean_latency: f64,
    pub p99_latency: u64,
}

/// Seed-averaged point of the latency/throughput curve.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub lambda: f64,
    pub throughput: f64,
    pub mean_latency: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Saturation {
    /// Plateau of accepted throughput (mean of points within 1% of max).
    pub throughput: f64,
    /// First offered load whose throughput reaches 98% of the plateau.
    pub knee_lambda: f64,
    /// Mean round-trip latency at the knee.
    pub knee_latency: f64,
}

/// Full sweep result.
#[derive(Debug, Clone)]
pub struct LoadSweep {
    pub points: Vec<SweepPoint>,
    pub curve: Vec<CurvePoint>,
    pub saturation: Option<Saturation>,
}

/// Run every (lambda, seed) point of the sweep; points are independent jobs
/// and run concurrently. Output order is (lambda, seed), regardless of
/// scheduling.
pub fn run_load_sweep(cfg: &ClusterConfig, spec: &SweepSpec) -> Result<LoadSweep> {
    if spec.lambdas.is_empty() || spec.seeds.is_empty() {
        return Err(SimError::ConfigError("sweep needs at least one lambda and one seed".into()));
    }
    let mut jobs = Vec::new();
    for &lambda in &spec.lambdas {
        for &seed in &spec.seeds {
            jobs.push(PoissonProfile { lambda, seed, duration: spec.duration, warmup: spec.warmup });
        }
    }
    for job in &jobs {
        job.validate()?;
    }
    let results = par_map(jobs, |profile| {
        run_traffic_point(cfg, &profile).map(|stats| SweepPoint {
            lambda: profile.lambda,
            seed: profile.seed,
            throughput: stats.throughput,
            mean_latency: stats.mean_latency(),
            p99_latency: stats.latency_percentile(99.0),
        })
    });
    let mut points = Vec::with_capacity(results.len());
    for r in results {
        points.push(r?);
    }

    let n_seeds = spec.seeds.len() as f64;
    let curve: Vec<CurvePoint> = spec
        .lambdas
        .iter()
        .map(|&lambda| {
            let same: Vec<&SweepPoint> =
                points.iter().filter(|p| p.lambda == lambda).collect();
            CurvePoint {
                lambda,
                throughput: same.iter().map(|p| p.throughput).sum::<f64>() / n_seeds,
                mean_latency: same.iter().map(|p| p.mean_latency).sum::<f64>() / n_seeds,
            }
        })
        .collect();
    let saturation = find_saturation(&curve).ok();
    Ok(LoadSweep { points, curve, saturation })
}

/// Locate the throughput plateau and the latency knee of a load curve.
///
/// The plateau is the mean of accepted-throughput points within 1% of the
/// maximum; the knee is the first offered load whose throughput comes within
/// 2% of the plateau. A curve whose only near-max point is its final one is
/// still climbing and has no plateau.
pub fn find_saturation(curve: &[CurvePoint]) -> Result<Saturation> {
    if curve.len() < 2 {
        return Err(SimError::NotSaturated);
    }
    let max_thr = curve.iter().map(|p| p.throughput).fold(0.0, f64::max);
    if max_thr <= 0.0 {
        return Err(SimError::NotSaturated);
    }
    let plateau: Vec<&CurvePoint> = curve
        .iter()
        .filter(|p| p.throughput >= 0.99 * max_thr)
        .collect();
    let first_plateau_lambda = plateau[0].lambda;
    let last_lambda = curve.last().unwrap().lambda;
    if plateau.len() == 1 && first_plateau_lambda == last_lambda {
        return Err(SimError::NotSaturated);
    }
    let sat = plateau.iter().map(|p| p.throughput).sum::<f64>() / plateau.len() as f64;
    let knee = curve
        .iter()
        .find(|p| p.throughput >= 0.98 * sat)
        .expect("plateau implies a knee");
    Ok(Saturation {
        throughput: sat,
        knee_lambda: knee.lambda,
        knee_latency: knee.mean_latency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{expected_zero_load_latency, locate_bank};

    fn small_cfg() -> ClusterConfig {
        ClusterConfig {
            tiles_per_subgroup: 2,
            subgroups_per_group: 2,
            groups: 2,
            cores_per_tile: 4,
            banks_per_tile: 8,
            ..ClusterConfig::default()
        }
    }

    #[test]
    fn zero_lambda_is_empty() {
        let cfg = small_cfg();
        let p = PoissonProfile { lambda: 0.0, seed: 1, duration: 1000, warmup: 10 };
        assert!(generate(&p, 0, &cfg).unwrap().is_empty());
    }

    #[test]
    fn lambda_out_of_range_rejected() {
        let p = PoissonProfile { lambda: 1.5, seed: 1, duration: 100, warmup: 10 };
        assert!(matches!(p.validate(), Err(SimError::ConfigError(_))));
    }

    #[test]
    fn arrival_count_within_three_sigma() {
        // Binomial oracle: n = 1e6 core-cycles at lambda = 0.1.
        let cfg = small_cfg();
        let n: u64 = 1_000_000;
        let lambda = 0.1;
        let p = PoissonProfile { lambda, seed: 42, duration: n / 8, warmup: 0 };
        let mut count = 0u64;
        for core in 0..8 {
            count += generate(&p, core, &cfg).unwrap().len() as u64;
        }
        let mean = n as f64 * lambda;
        let sigma = (n as f64 * lambda * (1.0 - lambda)).sqrt();
        assert!(
            (count as f64 - mean).abs() <= 3.0 * sigma,
            "count {count} outside 3 sigma of {mean}"
        );
    }

    #[test]
    fn destinations_uniform_chi_squared() {
        // Chi-squared goodness of fit over banks at the 1% level, using the
        // Wilson-Hilferty approximation for the critical value.
        let cfg = small_cfg();
        let n_banks = cfg.total_banks() as usize;
        let p = PoissonProfile { lambda: 0.5, seed: 7, duration: 50_000, warmup: 0 };
        let mut counts = vec![0u64; n_banks];
        let mut total = 0u64;
        for core in 0..cfg.total_cores() {
            for (_, addr) in generate(&p, core, &cfg).unwrap() {
                let (loc, _) = locate_bank(addr, &cfg).unwrap();
                counts[cfg.global_bank_index(loc) as usize] += 1;
                total += 1;
            }
        }
        assert!(total > 100_000);
        let expected = total as f64 / n_banks as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&o| {
                let d = o as f64 - expected;
                d * d / expected
            })
            .sum();
        let df = (n_banks - 1) as f64;
        let z = 2.3263; // z at the 99th percentile
        let crit = df * (1.0 - 2.0 / (9.0 * df) + z * (2.0 / (9.0 * df)).sqrt()).powi(3);
        assert!(chi2 < crit, "chi2 {chi2} over critical {crit}");
    }

    #[test]
    fn low_load_latency_approaches_analytic() {
        let cfg = small_cfg();
        let p = PoissonProfile { lambda: 0.01, seed: 3, duration: 20_000, warmup: 2_000 };
        let stats = run_traffic_point(&cfg, &p).unwrap();
        let analytic = expected_zero_load_latency(&cfg);
        assert!(
            (stats.mean_latency() - analytic).abs() <= 0.3,
            "mean {} vs analytic {analytic}",
            stats.mean_latency()
        );
    }

    #[test]
    fn below_saturation_accepted_tracks_offered() {
        let cfg = small_cfg();
        for lambda in [0.05, 0.10, 0.15] {
            let p = PoissonProfile { lambda, seed: 5, duration: 20_000, warmup: 2_000 };
            let stats = run_traffic_point(&cfg, &p).unwrap();
            let rel = (stats.throughput - lambda).abs() / lambda;
            assert!(rel <= 0.02, "lambda {lambda}: accepted {} off by {rel}", stats.throughput);
        }
    }

    #[test]
    fn latency_monotone_in_lambda() {
        let cfg = small_cfg();
        let spec = SweepSpec {
            lambdas: vec![0.02, 0.08, 0.14, 0.20],
            seeds: vec![1, 2, 3],
            duration: 12_000,
            warmup: 1_000,
        };
        let sweep = run_load_sweep(&cfg, &spec).unwrap();
        for w in sweep.curve.windows(2) {
            assert!(
                w[1].mean_latency >= w[0].mean_latency - 0.05,
                "latency not monotone: {} then {}",
                w[0].mean_latency,
                w[1].mean_latency
            );
        }
    }

    #[test]
    fn find_saturation_synthetic() {
        // Linear rise at slope 1 up to 0.25, then flat.
        let curve: Vec<CurvePoint> = (1..=40)
            .map(|i| {
                let lambda = i as f64 * 0.01;
                CurvePoint {
                    lambda,
                    throughput: lambda.min(0.25),
                    mean_latency: if lambda < 0.25 { 6.4 } else { 12.0 },
                }
            })
            .collect();
        let sat = find_saturation(&curve).unwrap();
        assert!((sat.throughput - 0.25).abs() < 1e-12);
        assert!((sat.knee_lambda - 0.25).abs() < 1e-12);
        assert!((sat.knee_latency - 12.0).abs() < 1e-12);
    }

    #[test]
    fn find_saturation_rejects_monotone_curve() {
        let curve: Vec<CurvePoint> = (1..=40)
            .map(|i| CurvePoint {
                lambda: i as f64 * 0.01,
                throughput: i as f64 * 0.01,
                mean_latency: 6.4,
            })
            .collect();
        assert!(matches!(find_saturation(&curve), Err(SimError::NotSaturated)));
    }

    #[test]
    fn sweep_points_deterministic_under_parallelism() {
        let cfg = small_cfg();
        let spec = SweepSpec {
            lambdas: vec![0.05, 0.10],
            seeds: vec![11, 12],
            duration: 5_000,
            warmup: 500,
        };
        let a = run_load_sweep(&cfg, &spec).unwrap();
        let b = run_load_sweep(&cfg, &spec).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            assert_eq!(x.throughput.to_bits(), y.throughput.to_bits());
            assert_eq!(x.mean_latency.to_bits(), y.mean_latency.to_bits());
            assert_eq!(x.p99_latency, y.p99_latency);
        }
    }
}
