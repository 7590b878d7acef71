//! Minimal injection driver: per-core request queues issued as fast as the
//! network accepts them. Used by property suites and as the reference
//! harness for the latency examples.

use super::{Engine, Outcome, SimStats};
use crate::error::{Result, SimError};
use crate::topology::ClusterConfig;

/// Per-core FIFO of (word address, is_store) requests.
#[derive(Debug, Clone, Default)]
pub struct Workload {
    pub per_core: Vec<Vec<(u64, bool)>>,
}

impl Workload {
    pub fn new(cores: u32) -> Self {
        Self { per_core: vec![Vec::new(); cores as usize] }
    }

    pub fn push(&mut self, core: u32, addr: u64, is_store: bool) {
        self.per_core[core as usize].push((addr, is_store));
    }

    pub fn len(&self) -> u64 {
        self.per_core.iter().map(|q| q.len() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.per_core.iter().all(|q| q.is_empty())
    }
}

/// Run a fixed workload until every injected request has retired.
///
/// Identical configs and workloads produce identical statistics. Errors with
/// `DeadlockSuspected` if the cycle budget runs out with messages in flight.
pub fn run_to_quiescence(cfg: &ClusterConfig, workload: &Workload, budget: u64) -> Result<SimStats> {
    let mut engine = Engine::new(cfg)?;
    let n_cores = cfg.total_cores();
    let mut cursors = vec![0usize; n_cores as usize];
    loop {
        engine.begin_cycle();
        let done = cursors
            .iter()
            .zip(&workload.per_core)
            .all(|(&c, q)| c == q.len());
        if done && engine.in_flight() == 0 {
            break;
        }
        if engine.cycle() > budget {
            return Err(SimError::DeadlockSuspected {
                budget,
                in_flight: engine.in_flight(),
            });
        }
        for core in 0..n_cores {
            let q = &workload.per_core[core as usize];
            let cur = cursors[core as usize];
            if cur < q.len() && engine.can_issue(core) {
                let (addr, is_store) = q[cur];
                engine.attempt(core, addr, is_store)?;
            }
        }
        engine.finish_cycle();
        for core in 0..n_cores {
            if matches!(engine.outcome(core), Outcome::Accepted { .. }) {
                cursors[core as usize] += 1;
            }
        }
    }
    let mut stats = std::mem::replace(&mut engine.stats, SimStats::new(n_cores));
    stats.total_cycles = engine.cycle();
    let cycles = stats.total_cycles.max(1);
    stats.throughput = stats.injected as f64 / (n_cores as f64 * cycles as f64);
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_workload_is_zero_cycles() {
        let cfg = ClusterConfig::default();
        let stats = run_to_quiescence(&cfg, &Workload::new(cfg.total_cores()), 100).unwrap();
        assert_eq!(stats.total_cycles, 0);
        assert_eq!(stats.throughput, 0.0);
    }

    #[test]
    fn deterministic_stats() {
        let cfg = ClusterConfig {
            tiles_per_subgroup: 2,
            subgroups_per_group: 2,
            groups: 2,
            ..ClusterConfig::default()
        };
        let mut w = Workload::new(cfg.total_cores());
        let words = cfg.total_l1_words();
        for core in 0..cfg.total_cores() {
            for k in 0..20u64 {
                w.push(core, (core as u64 * 977 + k * 131) % words, k % 3 == 0);
            }
        }
        let a = run_to_quiescence(&cfg, &w, 100_000).unwrap();
        let b = run_to_quiescence(&cfg, &w, 100_000).unwrap();
        assert_eq!(a.total_cycles, b.total_cycles);
        assert_eq!(a.injected, b.injected);
        for c in 0..4 {
            assert_eq!(a.class[c].count, b.class[c].count);
            assert_eq!(a.class[c].sum, b.class[c].sum);
        }
    }
}
