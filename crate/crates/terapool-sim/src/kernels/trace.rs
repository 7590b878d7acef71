//! Abstract per-core instruction streams emitted by the kernel mappers.
//!
//! Programs at full cluster scale run to hundreds of thousands of
//! instructions per core, so streams are generated lazily: a mapper-specific
//! generator refills a small buffer one natural work unit at a time (a
//! butterfly group, a matmul k-step, a problem).

use crate::topology::DestClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuncUnit {
    Mac,
    Div,
}

/// Dependency gate checked before an instruction issues. Loads are gated by
/// the in-order delivery watermark, offloads by their unit latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dep {
    None,
    /// Load ordinal (per-core, in emission order).
    Load(u32),
    /// Offload ordinal (per-core, in emission order).
    Offload(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOp {
    /// `cycles` back-to-back single-cycle ALU instructions.
    Compute { cycles: u32 },
    Load { addr: u64 },
    Store { addr: u64 },
    Offload { unit: FuncUnit, dep: Dep },
    Use { dep: Dep },
    Barrier { id: u32 },
}

/// Emission buffer with per-core ordinal counters. Counters persist across
/// refills so `Dep` ordinals always reference emission order.
#[derive(Debug, Default)]
pub struct Emitter {
    pub ops: Vec<TraceOp>,
    loads: u32,
    offloads: u32,
}

impl Emitter {
    pub fn load(&mut self, addr: u64) -> u32 {
        self.ops.push(TraceOp::Load { addr });
        let ord = self.loads;
        self.loads += 1;
        ord
    }

    pub fn store(&mut self, addr: u64) {
        self.ops.push(TraceOp::Store { addr });
    }

    pub fn offload(&mut self, unit: FuncUnit, dep: Dep) -> u32 {
        self.ops.push(TraceOp::Offload { unit, dep });
        let ord = self.offloads;
        self.offloads += 1;
        ord
    }

    pub fn compute(&mut self, cycles: u32) {
        if cycles > 0 {
            self.ops.push(TraceOp::Compute { cycles });
        }
    }

    pub fn use_result(&mut self, dep: Dep) {
        self.ops.push(TraceOp::Use { dep });
    }

    pub fn barrier(&mut self, id: u32) {
        self.ops.push(TraceOp::Barrier { id });
    }
}

/// A resumable program generator; each call appends the next natural unit
/// of work to the emitter and returns false when the program is complete.
pub trait ProgramGen {
    fn emit_next(&mut self, out: &mut Emitter) -> bool;
}

/// Lazily evaluated per-core instruction stream.
pub struct GenStream<G: ProgramGen> {
    gen: G,
    em: Emitter,
    cursor: usize,
    exhausted: bool,
}

impl<G: ProgramGen> GenStream<G> {
    pub fn new(gen: G) -> Self {
        Self { gen, em: Emitter::default(), cursor: 0, exhausted: false }
    }

    pub fn next_op(&mut self) -> Option<TraceOp> {
        loop {
            if self.cursor < self.em.ops.len() {
                let op = self.em.ops[self.cursor];
                self.cursor += 1;
                return Some(op);
            }
            if self.exhausted {
                return None;
            }
            self.em.ops.clear();
            self.cursor = 0;
            if !self.gen.emit_next(&mut self.em) {
                self.exhausted = true;
            }
        }
    }
}

/// A fully materialized program (tests and tiny workloads).
#[derive(Debug, Clone, Default)]
pub struct TraceProgram {
    pub ops: Vec<TraceOp>,
    pub cursor: usize,
}

impl TraceProgram {
    pub fn new(ops: Vec<TraceOp>) -> Self {
        Self { ops, cursor: 0 }
    }

    pub fn next_op(&mut self) -> Option<TraceOp> {
        let op = self.ops.get(self.cursor).copied();
        self.cursor += 1;
        op
    }
}

/// Barrier metadata: how many cores must arrive before release.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BarrierSpec {
    pub id: u32,
    pub participants: u32,
}

/// Per-kernel stream dispatch (one entry per core; empty programs allowed).
pub enum CoreStream {
    Fft(GenStream<super::fft::FftGen>),
    MatMul(GenStream<super::matmul::MatMulGen>),
    Che(GenStream<super::che::CheGen>),
    SysInv(GenStream<super::sysinv::SysInvGen>),
    Fixed(TraceProgram),
}

impl CoreStream {
    pub fn next_op(&mut self) -> Option<TraceOp> {
        match self {
            CoreStream::Fft(s) => s.next_op(),
            CoreStream::MatMul(s) => s.next_op(),
            CoreStream::Che(s) => s.next_op(),
            CoreStream::SysInv(s) => s.next_op(),
            CoreStream::Fixed(p) => p.next_op(),
        }
    }
}

/// A mapped kernel: one stream per core plus the barrier registry.
pub struct KernelTraces {
    pub streams: Vec<CoreStream>,
    pub barriers: Vec<BarrierSpec>,
}

/// Load/store class counts over a whole trace set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LocalityCensus {
    pub loads: [u64; 4],
    pub stores: [u64; 4],
}

impl LocalityCensus {
    pub fn load_fraction(&self, class: DestClass) -> f64 {
        let total: u64 = self.loads.iter().sum();
        if total == 0 {
            0.0
        } else {
            self.loads[class.index()] as f64 / total as f64
        }
    }

    pub fn store_fraction(&self, class: DestClass) -> f64 {
        let total: u64 = self.stores.iter().sum();
        if total == 0 {
            0.0
        } else {
            self.stores[class.index()] as f64 / total as f64
        }
    }
}
