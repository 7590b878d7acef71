//! Simulation statistics: latency accounting, stall breakdowns, aggregates.

use crate::topology::DestClass;

/// Latency histogram resolution; round trips beyond this land in the
/// overflow bucket but still contribute exactly to count/sum/min/max.
pub const HIST_BUCKETS: usize = 512;

/// Per-destination-class round-trip latency statistics.
#[derive(Debug, Clone)]
pub struct ClassLatency {
    pub count: u64,
    pub sum: u64,
    pub min: u64,
    pub max: u64,
    pub hist: Vec<u32>,
}

impl Default for ClassLatency {
    fn default() -> Self {
        Self { count: 0, sum: 0, min: u64::MAX, max: 0, hist: vec![0; HIST_BUCKETS + 1] }
    }
}

impl ClassLatency {
    pub fn record(&mut self, latency: u64) {
        self.count += 1;
        self.sum += latency;
        self.min = self.min.min(latency);
        self.max = self.max.max(latency);
        let bucket = (latency as usize).min(HIST_BUCKETS);
        self.hist[bucket] += 1;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum as f64 / self.count as f64
        }
    }
}

/// Cycles a core spent blocked, by cause.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StallBreakdown {
    /// Memory-unit stalls: issue backpressure, outstanding limit, waits on
    /// load data.
    pub lsu_stalls: u64,
    /// Read-after-write waits on pipelined functional units (div, mac).
    pub raw_or_external_unit_stalls: u64,
    pub icache_stalls: u64,
    pub barrier_stalls: u64,
}

impl StallBreakdown {
    pub fn total(&self) -> u64 {
        self.lsu_stalls + self.raw_or_external_unit_stalls + self.icache_stalls + self.barrier_stalls
    }

    pub fn add(&mut self, other: &StallBreakdown) {
        self.lsu_stalls += other.lsu_stalls;
        self.raw_or_external_unit_stalls += other.raw_or_external_unit_stalls;
        self.icache_stalls += other.icache_stalls;
        self.barrier_stalls += other.barrier_stalls;
    }
}

/// Aggregate output of a simulation run.
#[derive(Debug, Clone)]
pub struct SimStats {
    pub total_cycles: u64,
    /// Requests accepted into the network over the whole run.
    pub injected: u64,
    /// Responses delivered back to cores over the whole run.
    pub retired: u64,
    /// Traffic-generator queue overflows (closed-loop source only).
    pub dropped: u64,
    pub class: [ClassLatency; 4],
    /// Requests accepted with issue cycle inside the measurement window.
    pub measured_accepted: u64,
    pub measure_cycles: u64,
    pub cores: u32,
    /// Accepted requests per core per cycle over the measurement window.
    pub throughput: f64,
    pub stalls: Vec<StallBreakdown>,
    pub retired_instructions: u64,
    pub ipc: f64,
}

impl SimStats {
    pub fn new(cores: u32) -> Self {
        Self {
            total_cycles: 0,
            injected: 0,
            retired: 0,
            dropped: 0,
            class: Default::default(),
            measured_accepted: 0,
            measure_cycles: 0,
            cores,
            throughput: 0.0,
            stalls: Vec::new(),
            retired_instructions: 0,
            ipc: 0.0,
        }
    }

    pub fn class_count(&self, class: DestClass) -> u64 {
        self.class[class.index()].count
    }

    /// Mean round-trip latency over every measured request.
    pub fn mean_latency(&self) -> f64 {
        let count: u64 = self.class.iter().map(|c| c.count).sum();
        if count == 0 {
            return 0.0;
        }
        let sum: u64 = self.class.iter().map(|c| c.sum).sum();
        sum as f64 / count as f64
    }

    /// p-th latency percentile from the merged histogram (p in 0..=100).
    pub fn latency_percentile(&self, p: f64) -> u64 {
        let count: u64 = self.class.iter().map(|c| c.count).sum();
        if count == 0 {
            return 0;
        }
        let target = (count as f64 * p / 100.0).ceil() as u64;
        let mut seen = 0u64;
        for bucket in 0..=HIST_BUCKETS {
            seen += self.class.iter().map(|c| c.hist[bucket] as u64).sum::<u64>();
            if seen >= target {
                return bucket as u64;
            }
        }
        self.class.iter().map(|c| c.max).max().unwrap_or(0)
    }
}
