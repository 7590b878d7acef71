//! Barrier-synchronized execution of kernel traces on the cycle engine,
//! with per-core stall accounting.
//!
//! Each core issues at most one instruction per cycle. A cycle in which an
//! instruction cannot issue is charged to exactly one stall class, so per
//! core `retired + stalls == active cycles` holds exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trace::{BarrierSpec, CoreStream, Dep, FuncUnit, KernelTraces, TraceOp};
use crate::engine::{Engine, Outcome, SimStats, StallBreakdown};
use crate::error::{Result, SimError};
use crate::topology::ClusterConfig;

/// Result ring size per core; offloads older than this are always complete.
const OFFLOAD_RING: usize = 256;

#[derive(Debug, Clone, Copy)]
pub struct KernelSimConfig {
    /// Divider/square-root unit issue-to-result latency.
    pub div_latency: u32,
    /// Multiply-accumulate unit latency.
    pub mac_latency: u32,
    /// Per-instruction instruction-cache miss probability (statistical
    /// injection; the refill path is not modeled structurally).
    pub icache_miss_rate: f64,
    pub icache_penalty: u32,
    /// Keep per-core barrier arrival/resume timestamps.
    pub record_barrier_log: bool,
}

impl Default for KernelSimConfig {
    fn default() -> Self {
        Self {
            div_latency: 12,
            mac_latency: 3,
            icache_miss_rate: 0.0,
            icache_penalty: 10,
            record_barrier_log: false,
        }
    }
}

impl KernelSimConfig {
    fn validate(&self) -> Result<()> {
        if self.div_latency == 0
            || self.mac_latency == 0
            || self.div_latency as usize >= OFFLOAD_RING
            || self.mac_latency as usize >= OFFLOAD_RING
        {
            return Err(SimError::ConfigError(format!(
                "functional unit latencies must lie in 1..{OFFLOAD_RING}"
            )));
        }
        if !(0.0..=1.0).contains(&self.icache_miss_rate) {
            return Err(SimError::ConfigError("icache miss rate must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BarrierEvent {
    pub id: u32,
    pub core: u32,
    pub arrival: u64,
    pub resume: u64,
}

/// Per-core execution summary.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoreOutcome {
    pub retired: u64,
    pub active_cycles: u64,
    pub stalls: StallBreakdown,
}

/// Aggregate kernel execution report.
#[derive(Debug, Clone)]
pub struct StallReport {
    pub total_cycles: u64,
    pub retired_instructions: u64,
    pub participating_cores: u32,
    /// Retired instructions per participating core per cycle.
    pub ipc: f64,
    pub stalls: StallBreakdown,
    pub per_core: Vec<CoreOutcome>,
    pub net: SimStats,
    pub barrier_log: Vec<BarrierEvent>,
}

impl StallReport {
    /// Fraction of participating core cycles spent in each state:
    /// (instructions, lsu, raw/external, icache, barrier).
    pub fn fractions(&self) -> (f64, f64, f64, f64, f64) {
        let denom = (self.participating_cores as u64 * self.total_cycles).max(1) as f64;
        (
            self.retired_instructions as f64 / denom,
            self.stalls.lsu_stalls as f64 / denom,
            self.stalls.raw_or_external_unit_stalls as f64 / denom,
            self.stalls.icache_stalls as f64 / denom,
            self.stalls.barrier_stalls as f64 / denom,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CoreState {
    Ready,
    WaitingBarrier(u32),
    Done,
}

struct CoreRun {
    stream: CoreStream,
    cur: Option<TraceOp>,
    compute_left: u32,
    icache_left: u32,
    state: CoreState,
    offload_ready: Vec<u64>,
    offloads_issued: u64,
    loads_issued: u32,
    outcome: CoreOutcome,
    rng: Option<ChaCha8Rng>,
    attempted: bool,
}

struct BarrierState {
    expected: u32,
    arrived: u32,
    release: Option<u64>,
}

/// What a core does with the cycle, decided before network arbitration.
enum Action {
    None,
    Mem { addr: u64, is_store: bool },
}

pub fn simulate_kernel(
    traces: KernelTraces,
    cfg: &ClusterConfig,
    sim_cfg: &KernelSimConfig,
    seed: u64,
) -> Result<StallReport> {
    sim_cfg.validate()?;
    let n_cores = cfg.total_cores();
    if traces.streams.len() != n_cores as usize {
        return Err(SimError::ConfigError(format!(
            "trace set has {} streams for {} cores",
            traces.streams.len(),
            n_cores
        )));
    }
    let mut engine = Engine::new(cfg)?;
    let release_latency = cfg.latency_profile.cluster as u64;

    let max_barrier_id = traces.barriers.iter().map(|b| b.id).max().map_or(0, |m| m + 1);
    let mut barriers: Vec<BarrierState> = (0..max_barrier_id)
        .map(|_| BarrierState { expected: 0, arrived: 0, release: None })
        .collect();
    for BarrierSpec { id, participants } in &traces.barriers {
        barriers[*id as usize].expected = *participants;
    }
    let mut barrier_log = Vec::new();

    let mut cores: Vec<CoreRun> = traces
        .streams
        .into_iter()
        .enumerate()
        .map(|(i, stream)| {
            let rng = (sim_cfg.icache_miss_rate > 0.0).then(|| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(i as u64 + 1);
                r
            });
            let mut run = CoreRun {
                stream,
                cur: None,
                compute_left: 0,
                icache_left: 0,
                state: CoreState::Ready,
                offload_ready: vec![0; OFFLOAD_RING],
                offloads_issued: 0,
                loads_issued: 0,
                outcome: CoreOutcome::default(),
                rng,
                attempted: false,
            };
            fetch_next(&mut run, sim_cfg);
            run
        })
        .collect();
    let mut done_count = cores.iter().filter(|c| c.state == CoreState::Done).count() as u32;

    loop {
        engine.begin_cycle();
        let now = engine.cycle();
        if done_count == n_cores && engine.in_flight() == 0 {
            break;
        }
        if now > 100_000_000 {
            return Err(SimError::DeadlockSuspected {
                budget: now,
                in_flight: engine.in_flight(),
            });
        }
        for core_id in 0..n_cores {
            let run = &mut cores[core_id as usize];
            run.attempted = false;
            let action = step_core(run, core_id, now, &engine, sim_cfg, &mut barriers, &mut barrier_log, release_latency, &mut done_count);
            if let Action::Mem { addr, is_store } = action {
                engine.attempt(core_id, addr, is_store)?;
                run.attempted = true;
            }
        }
        engine.finish_cycle();
        for core_id in 0..n_cores {
            let run = &mut cores[core_id as usize];
            if !run.attempted {
                continue;
            }
            match engine.outcome(core_id) {
                Outcome::Accepted { load_ordinal, .. } => {
                    if !matches!(run.cur, Some(TraceOp::Store { .. })) {
                        debug_assert_eq!(load_ordinal, run.loads_issued);
                        run.loads_issued += 1;
                    }
                    run.outcome.retired += 1;
                    run.cur = None;
                    fetch_next(run, sim_cfg);
                    if run.state == CoreState::Done {
                        done_count += 1;
                    }
                }
                Outcome::Rejected => run.outcome.stalls.lsu_stalls += 1,
                Outcome::NoAttempt => unreachable!("attempt recorded"),
            }
        }
    }

    let total_cycles = engine.cycle();
    let per_core: Vec<CoreOutcome> = cores.iter().map(|c| c.outcome).collect();
    let participating =
        per_core.iter().filter(|c| c.active_cycles > 0 || c.retired > 0).count() as u32;
    let retired: u64 = per_core.iter().map(|c| c.retired).sum();
    let mut stalls = StallBreakdown::default();
    for c in &per_core {
        stalls.add(&c.stalls);
    }
    let mut net = std::mem::replace(&mut engine.stats, SimStats::new(n_cores));
    net.total_cycles = total_cycles;
    net.stalls = per_core.iter().map(|c| c.stalls).collect();
    net.retired_instructions = retired;
    let denom = participating as u64 * total_cycles;
    let ipc = if denom == 0 { 0.0 } else { retired as f64 / denom as f64 };
    net.ipc = ipc;
    Ok(StallReport {
        total_cycles,
        retired_instructions: retired,
        participating_cores: participating,
        ipc,
        stalls,
        per_core,
        net,
        barrier_log,
    })
}

/// Pull the next instruction, drawing the statistical icache penalty.
fn fetch_next(run: &mut CoreRun, sim_cfg: &KernelSimConfig) {
    debug_assert!(run.cur.is_none());
    match run.stream.next_op() {
        None => run.state = CoreState::Done,
        Some(op) => {
            if let TraceOp::Compute { cycles } = op {
                run.compute_left = cycles;
            }
            if let Some(rng) = run.rng.as_mut() {
                if rng.gen::<f64>() < sim_cfg.icache_miss_rate {
                    run.icache_left = sim_cfg.icache_penalty;
                }
            }
            run.cur = Some(op);
        }
    }
}

fn dep_ready(run: &CoreRun, engine: &Engine, core: u32, dep: Dep, now: u64) -> (bool, bool) {
    match dep {
        Dep::None => (true, false),
        Dep::Load(ord) => (engine.load_delivered(core, ord), true),
        Dep::Offload(ord) => {
            debug_assert!((ord as u64) < run.offloads_issued);
            let age = run.offloads_issued - ord as u64;
            let ready =
                age > OFFLOAD_RING as u64 || run.offload_ready[ord as usize % OFFLOAD_RING] <= now;
            (ready, false)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn step_core(
    run: &mut CoreRun,
    core: u32,
    now: u64,
    engine: &Engine,
    sim_cfg: &KernelSimConfig,
    barriers: &mut [BarrierState],
    barrier_log: &mut Vec<BarrierEvent>,
    release_latency: u64,
    done_count: &mut u32,
) -> Action {
    match run.state {
        CoreState::Done => return Action::None,
        CoreState::WaitingBarrier(id) => {
            let released = barriers[id as usize].release.is_some_and(|r| now >= r);
            if released {
                if sim_cfg.record_barrier_log {
                    if let Some(ev) = barrier_log
                        .iter_mut()
                        .rev()
                        .find(|e| e.core == core && e.id == id && e.resume == u64::MAX)
                    {
                        ev.resume = now;
                    }
                }
                run.state = CoreState::Ready;
                run.cur = None;
                fetch_next(run, sim_cfg);
                if run.state == CoreState::Done {
                    *done_count += 1;
                    return Action::None;
                }
            } else {
                run.outcome.active_cycles += 1;
                run.outcome.stalls.barrier_stalls += 1;
                return Action::None;
            }
        }
        CoreState::Ready => {}
    }
    run.outcome.active_cycles += 1;
    if run.icache_left > 0 {
        run.icache_left -= 1;
        run.outcome.stalls.icache_stalls += 1;
        return Action::None;
    }
    let op = run.cur.expect("ready core holds an instruction");
    match op {
        TraceOp::Compute { .. } => {
            run.outcome.retired += 1;
            run.compute_left -= 1;
            if run.compute_left == 0 {
                run.cur = None;
                fetch_next(run, sim_cfg);
                if run.state == CoreState::Done {
                    *done_count += 1;
                }
            }
            Action::None
        }
        TraceOp::Load { addr } => {
            if engine.can_issue(core) {
                Action::Mem { addr, is_store: false }
            } else {
                run.outcome.stalls.lsu_stalls += 1;
                Action::None
            }
        }
        TraceOp::Store { addr } => {
            if engine.can_issue(core) {
                Action::Mem { addr, is_store: true }
            } else {
                run.outcome.stalls.lsu_stalls += 1;
                Action::None
            }
        }
        TraceOp::Offload { unit, dep } => {
            let (ready, is_load_wait) = dep_ready(run, engine, core, dep, now);
            if ready {
                run.outcome.retired += 1;
                let latency = match unit {
                    FuncUnit::Mac => sim_cfg.mac_latency,
                    FuncUnit::Div => sim_cfg.div_latency,
                };
                let ord = run.offloads_issued;
                run.offload_ready[ord as usize % OFFLOAD_RING] = now + latency as u64;
                run.offloads_issued += 1;
                run.cur = None;
                fetch_next(run, sim_cfg);
                if run.state == CoreState::Done {
                    *done_count += 1;
                }
            } else if is_load_wait {
                run.outcome.stalls.lsu_stalls += 1;
            } else {
                run.outcome.stalls.raw_or_external_unit_stalls += 1;
            }
            Action::None
        }
        TraceOp::Use { dep } => {
            let (ready, is_load_wait) = dep_ready(run, engine, core, dep, now);
            if ready {
                run.outcome.retired += 1;
                run.cur = None;
                fetch_next(run, sim_cfg);
                if run.state == CoreState::Done {
                    *done_count += 1;
                }
            } else if is_load_wait {
                run.outcome.stalls.lsu_stalls += 1;
            } else {
                run.outcome.stalls.raw_or_external_unit_stalls += 1;
            }
            Action::None
        }
        TraceOp::Barrier { id } => {
            run.outcome.retired += 1;
            let b = &mut barriers[id as usize];
            b.arrived += 1;
            debug_assert!(b.arrived <= b.expected, "barrier {id} over-subscribed");
            if sim_cfg.record_barrier_log {
                barrier_log.push(BarrierEvent { id, core, arrival: now, resume: u64::MAX });
            }
            if b.arrived == b.expected {
                // Release propagates through the cluster-level network.
                b.release = Some(now + 1 + release_latency);
                b.arrived = 0;
                // Barrier ids are single-use in the mappers; reset arms the
                // state for reuse should a generator loop over one.
            }
            run.state = CoreState::WaitingBarrier(id);
            Action::None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::trace::TraceProgram;

    fn one_core_cfg() -> ClusterConfig {
        ClusterConfig {
            cores_per_tile: 1,
            banks_per_tile: 8,
            tiles_per_subgroup: 1,
            subgroups_per_group: 1,
            groups: 1,
            ..ClusterConfig::default()
        }
    }

    fn fixed(ops: Vec<TraceOp>) -> CoreStream {
        CoreStream::Fixed(TraceProgram::new(ops))
    }

    #[test]
    fn compute_only_trace_has_unit_ipc() {
        let cfg = one_core_cfg();
        let traces = KernelTraces {
            streams: vec![fixed(vec![TraceOp::Compute { cycles: 100 }])],
            barriers: vec![],
        };
        let report = simulate_kernel(traces, &cfg, &KernelSimConfig::default(), 0).unwrap();
        assert_eq!(report.total_cycles, 100);
        assert_eq!(report.retired_instructions, 100);
        assert_eq!(report.ipc, 1.0);
        assert_eq!(report.stalls.total(), 0);
    }

    #[test]
    fn accounting_is_exact_per_core() {
        let cfg = one_core_cfg();
        let ops = vec![
            TraceOp::Load { addr: 0 },
            TraceOp::Load { addr: 1 },
            TraceOp::Offload { unit: FuncUnit::Div, dep: Dep::Load(1) },
            TraceOp::Use { dep: Dep::Offload(0) },
            TraceOp::Store { addr: 2 },
            TraceOp::Compute { cycles: 3 },
        ];
        let traces = KernelTraces { streams: vec![fixed(ops)], barriers: vec![] };
        let report = simulate_kernel(traces, &cfg, &KernelSimConfig::default(), 0).unwrap();
        let core = &report.per_core[0];
        assert_eq!(core.retired + core.stalls.total(), core.active_cycles);
        assert_eq!(core.retired, 8);
        // The divider result gates the Use for its full latency.
        assert!(core.stalls.raw_or_external_unit_stalls >= 10);
    }

    #[test]
    fn barrier_releases_after_last_arrival() {
        let cfg = ClusterConfig {
            cores_per_tile: 2,
            ..one_core_cfg()
        };
        // Core 0 computes 50 cycles before the barrier; core 1 arrives at 0.
        let traces = KernelTraces {
            streams: vec![
                fixed(vec![TraceOp::Compute { cycles: 50 }, TraceOp::Barrier { id: 0 }]),
                fixed(vec![TraceOp::Barrier { id: 0 }, TraceOp::Compute { cycles: 1 }]),
            ],
            barriers: vec![BarrierSpec { id: 0, participants: 2 }],
        };
        let sim_cfg = KernelSimConfig { record_barrier_log: true, ..Default::default() };
        let report = simulate_kernel(traces, &cfg, &sim_cfg, 0).unwrap();
        let last_arrival = report.barrier_log.iter().map(|e| e.arrival).max().unwrap();
        assert_eq!(last_arrival, 50);
        for ev in &report.barrier_log {
            assert!(ev.resume > last_arrival, "core resumed before the last arrival");
            assert_eq!(ev.resume, last_arrival + 1 + cfg.latency_profile.cluster as u64);
        }
        // Core 1 stalled at the barrier the whole time core 0 computed.
        assert!(report.per_core[1].stalls.barrier_stalls >= 50);
    }

    #[test]
    fn icache_injection_adds_stalls() {
        let cfg = one_core_cfg();
        let mk = |rate| KernelSimConfig { icache_miss_rate: rate, ..Default::default() };
        let ops: Vec<TraceOp> = (0..200).map(|_| TraceOp::Compute { cycles: 1 }).collect();
        let clean = simulate_kernel(
            KernelTraces { streams: vec![fixed(ops.clone())], barriers: vec![] },
            &cfg,
            &mk(0.0),
            7,
        )
        .unwrap();
        assert_eq!(clean.stalls.icache_stalls, 0);
        let missy = simulate_kernel(
            KernelTraces { streams: vec![fixed(ops)], barriers: vec![] },
            &cfg,
            &mk(0.2),
            7,
        )
        .unwrap();
        assert!(missy.stalls.icache_stalls > 0);
        let c = &missy.per_core[0];
        assert_eq!(c.retired + c.stalls.total(), c.active_cycles);
    }
}
