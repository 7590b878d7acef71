//! Cycle-stepped model of cores' memory units, the hierarchical request and
//! response networks, and the banked L1.
//!
//! Structure per cycle: a request leaves its core, crosses one pipeline
//! register per cycle along the chain for its destination class, wins the
//! destination tile's incoming port and the bank arbiter, is served for one
//! bank cycle, and the response crosses the mirrored chain back. Every
//! arbitration point grants one message per cycle with rotating round-robin
//! priority; blocked messages hold their register (backpressure).
//!
//! All state lives in index-addressed vectors and every per-cycle iteration
//! is in fixed index order, so a run is a pure function of its inputs.

mod stats;
pub mod workload;

pub use stats::{ClassLatency, SimStats, StallBreakdown, HIST_BUCKETS};

use crate::error::{Result, SimError};
use crate::topology::{locate_bank, tile_pair_class, ClusterConfig, DestClass, LatencyProfile};

/// Longest supported one-way register chain (cluster latency up to 17).
const MAX_DEPTH: usize = 8;

/// In-flight network message. The same shape serves both networks: on the
/// request network it travels core -> bank, on the response network the
/// `core` field names the destination.
#[derive(Debug, Clone, Copy)]
struct Flit {
    core: u32,
    bank: u32,
    seq: u32,
    issue_cycle: u32,
    class: DestClass,
    is_store: bool,
}

/// Externally visible record of one in-flight request (test introspection).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemRequest {
    pub core: u32,
    pub addr: u64,
    pub is_store: bool,
    pub issue_cycle: u64,
    pub class: DestClass,
    pub seq: u32,
}

/// Completion record delivered back to a core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemResponse {
    pub core: u32,
    pub seq: u32,
    pub completion_cycle: u64,
    pub class: DestClass,
    pub is_store: bool,
}

/// One-way register chain for a (tile, direction) pair. `slots[depth-1]` is
/// the head (closest to the destination); `slots[0]` is the entry register.
#[derive(Debug, Clone)]
struct Chain {
    slots: [Option<Flit>; MAX_DEPTH],
    depth: u8,
    len: u8,
}

impl Chain {
    fn new(depth: u8) -> Self {
        debug_assert!(depth as usize <= MAX_DEPTH && depth >= 1);
        Self { slots: [None; MAX_DEPTH], depth, len: 0 }
    }

    fn head(&self) -> Option<&Flit> {
        self.slots[self.depth as usize - 1].as_ref()
    }

    fn pop_head(&mut self) -> Flit {
        self.len -= 1;
        self.slots[self.depth as usize - 1].take().expect("pop on empty chain head")
    }

    fn entry_free(&self) -> bool {
        self.slots[0].is_none()
    }

    fn push_entry(&mut self, flit: Flit) {
        debug_assert!(self.entry_free());
        self.slots[0] = Some(flit);
        self.len += 1;
    }

    /// Simultaneous one-step shift of every message toward the head.
    fn advance(&mut self) {
        if self.len == 0 {
            return;
        }
        for i in (0..self.depth as usize - 1).rev() {
            if self.slots[i + 1].is_none() {
                if let Some(f) = self.slots[i].take() {
                    self.slots[i + 1] = Some(f);
                }
            }
        }
    }
}

/// Bank output register: the response produced by the previous bank cycle.
#[derive(Debug, Clone, Copy)]
struct OutReg {
    flit: Flit,
    ready_cycle: u32,
    /// Direction of the response chain at the serving tile, or `None` for a
    /// same-tile delivery straight back to the core.
    dest_dir: Option<u8>,
}

/// Tracks a core's in-flight requests and the in-order delivery watermark.
#[derive(Debug, Clone, Default)]
struct CoreLsu {
    outstanding: u32,
    next_seq: u32,
    next_load_ordinal: u32,
    /// Every load ordinal below this has been delivered in order.
    load_watermark: u32,
    /// Loads that arrived ahead of the watermark.
    arrived_ooo: std::collections::BTreeSet<u32>,
    /// (seq, load ordinal; u32::MAX for stores).
    in_flight: Vec<(u32, u32)>,
}

const STORE_MARK: u32 = u32::MAX;

/// Outcome of a core's issue attempt for the current cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    NoAttempt,
    /// `load_ordinal` is meaningful for loads only.
    Accepted { seq: u32, load_ordinal: u32 },
    Rejected,
}

#[derive(Debug, Clone, Copy)]
enum BankInput {
    /// Local core attempt (index into this cycle's attempt list).
    Core(u32),
    /// Offer from an incoming remote port (request chain index).
    Port(u32),
}

#[derive(Debug, Clone, Copy)]
struct PendingAttempt {
    core: u32,
    bank: u32,
    class: DestClass,
    is_store: bool,
}

/// The cycle-stepped simulation core.
pub struct Engine {
    cfg: ClusterConfig,
    profile: LatencyProfile,
    n_tiles: u32,
    n_cores: u32,
    cores_per_tile: u32,
    banks_per_tile: u32,
    dirs: u32,
    /// dir_table[src * n_tiles + dst]: chain direction index from `src`
    /// toward `dst`, 0xFF on the diagonal.
    dir_table: Vec<u8>,
    class_table: Vec<u8>,

    req_chains: Vec<Chain>,
    resp_chains: Vec<Chain>,
    bank_out: Vec<Option<OutReg>>,
    out_busy: Vec<u32>,

    lsu: Vec<CoreLsu>,
    cycle: u64,
    in_flight: u64,

    // Round-robin pointers.
    rr_req_port: Vec<u32>,
    rr_resp_port: Vec<u32>,
    rr_bank: Vec<u32>,
    rr_inject: Vec<u32>,
    rr_resp_entry: Vec<u32>,

    // Per-cycle scratch, reused across cycles.
    port_cands: Vec<Vec<u32>>,
    touched_ports: Vec<u32>,
    bank_cands: Vec<Vec<(u32, BankInput)>>,
    touched_banks: Vec<u32>,
    inject_cands: Vec<Vec<(u32, u32)>>,
    touched_inject: Vec<u32>,
    entry_cands: Vec<Vec<(u32, u32)>>,
    touched_entries: Vec<u32>,
    attempts: Vec<PendingAttempt>,
    outcomes: Vec<Outcome>,
    outcome_stamp: Vec<u64>,
    /// Cycle whose attempt outcomes are currently readable.
    finished_cycle: u64,

    // Statistics.
    pub stats: SimStats,
    measure_from: u64,
    measure_to: u64,
    record_responses: bool,
    responses: Vec<MemResponse>,
    /// Per-bank grant counters (fairness checks); enabled on demand.
    count_grants: bool,
    grants_per_core: Vec<u64>,
}

impl Engine {
    pub fn new(cfg: &ClusterConfig) -> Result<Self> {
        cfg.validate()?;
        let profile = cfg.latency_profile;
        if profile.tile != 1 {
            return Err(SimError::ConfigError(
                "the cycle model requires a single-cycle local tile latency (tile = 1)".into(),
            ));
        }
        if profile.register_depth(DestClass::RemoteGroup) as usize > MAX_DEPTH {
            return Err(SimError::ConfigError(format!(
                "cluster latency {} exceeds the supported register depth",
                profile.cluster
            )));
        }
        let n_tiles = cfg.total_tiles();
        let n_cores = cfg.total_cores();
        let n_banks = cfg.total_banks();
        let s = cfg.subgroups_per_group;
        let dirs = cfg.remote_ports();

        let mut dir_table = vec![0xFFu8; (n_tiles * n_tiles) as usize];
        let mut class_table = vec![0u8; (n_tiles * n_tiles) as usize];
        for src in 0..n_tiles {
            let (sg, ss, _st) = cfg.tile_coords(src);
            for dst in 0..n_tiles {
                if src == dst {
                    class_table[(src * n_tiles + dst) as usize] = DestClass::LocalTile as u8;
                    continue;
                }
                let (dg, ds, _dt) = cfg.tile_coords(dst);
                let class = tile_pair_class(src, dst, cfg);
                class_table[(src * n_tiles + dst) as usize] = class as u8;
                let dir = match class {
                    DestClass::LocalTile => 0,
                    DestClass::LocalSubGroup => 0,
                    DestClass::LocalGroup => 1 + if ds < ss { ds } else { ds - 1 },
                    DestClass::RemoteGroup => s + if dg < sg { dg } else { dg - 1 },
                };
                dir_table[(src * n_tiles + dst) as usize] = dir as u8;
            }
        }

        let mut depth_of_dir = vec![0u8; dirs as usize];
        for d in 0..dirs {
            let class = if d == 0 {
                DestClass::LocalSubGroup
            } else if d < s {
                DestClass::LocalGroup
            } else {
                DestClass::RemoteGroup
            };
            depth_of_dir[d as usize] = profile.register_depth(class).max(1) as u8;
        }

        let n_chains = (n_tiles * dirs) as usize;
        let chains: Vec<Chain> = (0..n_chains)
            .map(|i| Chain::new(depth_of_dir[i % dirs as usize]))
            .collect();

        Ok(Self {
            cfg: cfg.clone(),
            profile,
            n_tiles,
            n_cores,
            cores_per_tile: cfg.cores_per_tile,
            banks_per_tile: cfg.banks_per_tile,
            dirs,
            dir_table,
            class_table,
            req_chains: chains.clone(),
            resp_chains: chains,
            bank_out: vec![None; n_banks as usize],
            out_busy: Vec::new(),
            lsu: vec![CoreLsu::default(); n_cores as usize],
            cycle: 0,
            in_flight: 0,
            rr_req_port: vec![0; n_chains],
            rr_resp_port: vec![0; n_chains],
            rr_bank: vec![0; n_banks as usize],
            rr_inject: vec![0; n_chains],
            rr_resp_entry: vec![0; n_chains],
            port_cands: vec![Vec::new(); n_chains],
            touched_ports: Vec::new(),
            bank_cands: vec![Vec::new(); n_banks as usize],
            touched_banks: Vec::new(),
            inject_cands: vec![Vec::new(); n_chains],
            touched_inject: Vec::new(),
            entry_cands: vec![Vec::new(); n_chains],
            touched_entries: Vec::new(),
            attempts: Vec::new(),
            outcomes: vec![Outcome::NoAttempt; n_cores as usize],
            outcome_stamp: vec![u64::MAX; n_cores as usize],
            finished_cycle: u64::MAX,
            stats: SimStats::new(n_cores),
            measure_from: 0,
            measure_to: u64::MAX,
            record_responses: false,
            responses: Vec::new(),
            count_grants: false,
            grants_per_core: Vec::new(),
        })
    }

    pub fn cfg(&self) -> &ClusterConfig {
        &self.cfg
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn in_flight(&self) -> u64 {
        self.in_flight
    }

    /// Restrict latency/throughput statistics to requests issued in
    /// `[from, to)`. Conservation counters always cover the whole run.
    pub fn set_measure_window(&mut self, from: u64, to: u64) {
        self.measure_from = from;
        self.measure_to = to;
    }

    /// Keep a log of every delivered response (tests only; unbounded).
    pub fn record_responses(&mut self, on: bool) {
        self.record_responses = on;
    }

    pub fn take_responses(&mut self) -> Vec<MemResponse> {
        std::mem::take(&mut self.responses)
    }

    /// Count bank grants per core (fairness checks).
    pub fn count_grants(&mut self, on: bool) {
        self.count_grants = on;
        self.grants_per_core = vec![0; self.n_cores as usize];
    }

    pub fn grants_per_core(&self) -> &[u64] {
        &self.grants_per_core
    }

    pub fn outstanding(&self, core: u32) -> u32 {
        self.lsu[core as usize].outstanding
    }

    pub fn can_issue(&self, core: u32) -> bool {
        self.outstanding(core) < self.cfg.outstanding_per_core
    }

    /// True once the load's data is consumable: every load with a smaller
    /// ordinal has also arrived (in-order delivery).
    pub fn load_delivered(&self, core: u32, ordinal: u32) -> bool {
        ordinal < self.lsu[core as usize].load_watermark
    }

    pub fn next_load_ordinal(&self, core: u32) -> u32 {
        self.lsu[core as usize].next_load_ordinal
    }

    /// Outcome of the core's attempt in the most recently finished cycle.
    pub fn outcome(&self, core: u32) -> Outcome {
        if self.outcome_stamp[core as usize] == self.finished_cycle {
            self.outcomes[core as usize]
        } else {
            Outcome::NoAttempt
        }
    }

    fn dir(&self, src_tile: u32, dst_tile: u32) -> u8 {
        self.dir_table[(src_tile * self.n_tiles + dst_tile) as usize]
    }

    fn pair_class(&self, src_tile: u32, dst_tile: u32) -> DestClass {
        match self.class_table[(src_tile * self.n_tiles + dst_tile) as usize] {
            0 => DestClass::LocalTile,
            1 => DestClass::LocalSubGroup,
            2 => DestClass::LocalGroup,
            _ => DestClass::RemoteGroup,
        }
    }

    fn tile_of_core(&self, core: u32) -> u32 {
        core / self.cores_per_tile
    }

    fn tile_of_bank(&self, bank: u32) -> u32 {
        bank / self.banks_per_tile
    }

    /// Round-robin pick: smallest candidate key >= ptr, else the smallest.
    /// Candidate keys must be strictly increasing.
    fn rr_pick(cands: &[(u32, BankInput)], ptr: u32) -> usize {
        for (i, &(key, _)) in cands.iter().enumerate() {
            if key >= ptr {
                return i;
            }
        }
        0
    }

    fn rr_pick_plain(cands: &[u32], ptr: u32) -> usize {
        for (i, &key) in cands.iter().enumerate() {
            if key >= ptr {
                return i;
            }
        }
        0
    }

    fn rr_pick_pair(cands: &[(u32, u32)], ptr: u32) -> usize {
        for (i, &(key, _)) in cands.iter().enumerate() {
            if key >= ptr {
                return i;
            }
        }
        0
    }

    fn deliver(&mut self, flit: Flit) {
        let latency = self.cycle - flit.issue_cycle as u64;
        debug_assert!(
            latency >= self.profile.latency(flit.class) as u64,
            "round trip below zero-load latency: {latency} < {} ({:?})",
            self.profile.latency(flit.class),
            flit.class
        );
        let lsu = &mut self.lsu[flit.core as usize];
        let pos = lsu
            .in_flight
            .iter()
            .position(|&(seq, _)| seq == flit.seq)
            .expect("response for unknown request");
        let (_, ordinal) = lsu.in_flight.swap_remove(pos);
        lsu.outstanding -= 1;
        if ordinal != STORE_MARK {
            if ordinal == lsu.load_watermark {
                lsu.load_watermark += 1;
                while lsu.arrived_ooo.remove(&lsu.load_watermark) {
                    lsu.load_watermark += 1;
                }
            } else {
                lsu.arrived_ooo.insert(ordinal);
            }
        }
        self.in_flight -= 1;
        self.stats.retired += 1;
        if (flit.issue_cycle as u64) >= self.measure_from && (flit.issue_cycle as u64) < self.measure_to {
            self.stats.class[flit.class.index()].record(latency);
        }
        if self.record_responses {
            self.responses.push(MemResponse {
                core: flit.core,
                seq: flit.seq,
                completion_cycle: self.cycle,
                class: flit.class,
                is_store: flit.is_store,
            });
        }
    }

    /// Phases on the response side: deliver chain heads and local bank
    /// outputs, advance response chains, then admit bank outputs into their
    /// response chains. Must be called once per cycle before `attempt`.
    pub fn begin_cycle(&mut self) {
        // Response chain heads offer to the destination tile's incoming port.
        debug_assert!(self.touched_ports.is_empty());
        for chain_idx in 0..self.resp_chains.len() {
            let Some(head) = self.resp_chains[chain_idx].head() else { continue };
            let src_tile = chain_idx as u32 / self.dirs;
            let dst_tile = self.tile_of_core(head.core);
            let port = dst_tile * self.dirs + self.dir(dst_tile, src_tile) as u32;
            if self.port_cands[port as usize].is_empty() {
                self.touched_ports.push(port);
            }
            self.port_cands[port as usize].push(src_tile);
        }
        self.touched_ports.sort_unstable();
        for i in 0..self.touched_ports.len() {
            let port = self.touched_ports[i] as usize;
            let pick = Self::rr_pick_plain(&self.port_cands[port], self.rr_resp_port[port]);
            let src_tile = self.port_cands[port][pick];
            self.rr_resp_port[port] = (src_tile + 1) % self.n_tiles;
            // The chain at src_tile carrying responses back in our direction.
            let chain = (src_tile * self.dirs + self.dir(src_tile, port as u32 / self.dirs) as u32) as usize;
            let flit = self.resp_chains[chain].pop_head();
            self.deliver(flit);
            self.port_cands[port].clear();
        }
        self.touched_ports.clear();

        // Local deliveries straight from bank output registers, and remote
        // response admission into chains.
        debug_assert!(self.touched_entries.is_empty());
        let mut retained = Vec::new();
        let mut busy = std::mem::take(&mut self.out_busy);
        busy.sort_unstable();
        for &bank in &busy {
            let Some(out) = self.bank_out[bank as usize] else { continue };
            if out.ready_cycle as u64 > self.cycle {
                retained.push(bank);
                continue;
            }
            match out.dest_dir {
                None => {
                    self.bank_out[bank as usize] = None;
                    self.deliver(out.flit);
                }
                Some(dir) => {
                    let tile = self.tile_of_bank(bank);
                    let entry = (tile * self.dirs + dir as u32) as usize;
                    if self.entry_cands[entry].is_empty() {
                        self.touched_entries.push(entry as u32);
                    }
                    self.entry_cands[entry].push((bank % self.banks_per_tile, bank));
                    retained.push(bank);
                }
            }
        }
        self.out_busy = retained;

        // Advance response chains before admission so freed entry registers
        // can be refilled this cycle.
        for chain in &mut self.resp_chains {
            chain.advance();
        }

        self.touched_entries.sort_unstable();
        for i in 0..self.touched_entries.len() {
            let entry = self.touched_entries[i] as usize;
            if self.resp_chains[entry].entry_free() {
                let pick = Self::rr_pick_pair(&self.entry_cands[entry], self.rr_resp_entry[entry]);
                let (key, bank) = self.entry_cands[entry][pick];
                self.rr_resp_entry[entry] = (key + 1) % self.banks_per_tile;
                let out = self.bank_out[bank as usize].take().expect("admitted bank must hold a response");
                self.resp_chains[entry].push_entry(out.flit);
                let pos = self.out_busy.iter().position(|&b| b == bank).unwrap();
                self.out_busy.remove(pos);
            }
            self.entry_cands[entry].clear();
        }
        self.touched_entries.clear();
    }

    /// Queue a core's issue attempt for this cycle. At most one attempt per
    /// core per cycle; resolution happens in [`finish_cycle`](Self::finish_cycle).
    pub fn attempt(&mut self, core: u32, addr: u64, is_store: bool) -> Result<()> {
        debug_assert_ne!(self.outcome_stamp[core as usize], self.cycle, "one attempt per core per cycle");
        if !self.can_issue(core) {
            self.outcomes[core as usize] = Outcome::Rejected;
            self.outcome_stamp[core as usize] = self.cycle;
            return Ok(());
        }
        let (loc, _) = locate_bank(addr, &self.cfg)?;
        let bank = self.cfg.global_bank_index(loc);
        let src_tile = self.tile_of_core(core);
        let dst_tile = self.tile_of_bank(bank);
        let class = self.pair_class(src_tile, dst_tile);
        let attempt_idx = self.attempts.len() as u32;
        self.attempts.push(PendingAttempt { core, bank, class, is_store });
        if class == DestClass::LocalTile {
            if self.bank_cands[bank as usize].is_empty() {
                self.touched_banks.push(bank);
            }
            self.bank_cands[bank as usize].push((core % self.cores_per_tile, BankInput::Core(attempt_idx)));
        } else {
            let chain = src_tile * self.dirs + self.dir(src_tile, dst_tile) as u32;
            if self.inject_cands[chain as usize].is_empty() {
                self.touched_inject.push(chain);
            }
            self.inject_cands[chain as usize].push((core % self.cores_per_tile, attempt_idx));
        }
        self.outcomes[core as usize] = Outcome::Rejected;
        self.outcome_stamp[core as usize] = self.cycle;
        Ok(())
    }

    fn accept(&mut self, attempt: PendingAttempt) -> Flit {
        let lsu = &mut self.lsu[attempt.core as usize];
        let seq = lsu.next_seq;
        lsu.next_seq += 1;
        let ordinal = if attempt.is_store {
            STORE_MARK
        } else {
            let o = lsu.next_load_ordinal;
            lsu.next_load_ordinal += 1;
            o
        };
        lsu.outstanding += 1;
        lsu.in_flight.push((seq, ordinal));
        self.in_flight += 1;
        self.stats.injected += 1;
        if self.cycle >= self.measure_from && self.cycle < self.measure_to {
            self.stats.measured_accepted += 1;
        }
        self.outcomes[attempt.core as usize] = Outcome::Accepted { seq, load_ordinal: ordinal };
        Flit {
            core: attempt.core,
            bank: attempt.bank,
            seq,
            issue_cycle: self.cycle as u32,
            class: attempt.class,
            is_store: attempt.is_store,
        }
    }

    fn serve_bank(&mut self, bank: u32, flit: Flit) {
        let bank_tile = self.tile_of_bank(bank);
        let core_tile = self.tile_of_core(flit.core);
        let dest_dir = if bank_tile == core_tile {
            None
        } else {
            Some(self.dir(bank_tile, core_tile))
        };
        self.bank_out[bank as usize] = Some(OutReg {
            flit,
            ready_cycle: self.cycle as u32 + 1,
            dest_dir,
        });
        self.out_busy.push(bank);
        if self.count_grants {
            self.grants_per_core[flit.core as usize] += 1;
        }
    }

    /// Phases on the request side: chain heads contend for destination
    /// ports, banks arbitrate and serve, chains advance, and this cycle's
    /// remote attempts contend for chain entry. Advances the clock.
    pub fn finish_cycle(&mut self) {
        // Request chain heads offer to destination tile incoming ports.
        debug_assert!(self.touched_ports.is_empty());
        for chain_idx in 0..self.req_chains.len() {
            let Some(head) = self.req_chains[chain_idx].head() else { continue };
            let src_tile = chain_idx as u32 / self.dirs;
            let dst_tile = self.tile_of_bank(head.bank);
            let port = dst_tile * self.dirs + self.dir(dst_tile, src_tile) as u32;
            if self.port_cands[port as usize].is_empty() {
                self.touched_ports.push(port);
            }
            self.port_cands[port as usize].push(src_tile);
        }
        self.touched_ports.sort_unstable();
        // Each port forwards one head into the bank arbitration of its tile.
        // The round-robin pointer moves only when the transfer completes
        // (the offer also wins its bank), like a combinational handshake.
        for i in 0..self.touched_ports.len() {
            let port = self.touched_ports[i] as usize;
            let pick = Self::rr_pick_plain(&self.port_cands[port], self.rr_req_port[port]);
            let src_tile = self.port_cands[port][pick];
            let dst_tile = port as u32 / self.dirs;
            let chain = src_tile * self.dirs + self.dir(src_tile, dst_tile) as u32;
            let head = self.req_chains[chain as usize].head().unwrap();
            let bank = head.bank;
            let dir_at_dest = port as u32 % self.dirs;
            if self.bank_cands[bank as usize].is_empty() {
                self.touched_banks.push(bank);
            }
            self.bank_cands[bank as usize]
                .push((self.cores_per_tile + dir_at_dest, BankInput::Port(chain)));
            self.port_cands[port].clear();
        }
        self.touched_ports.clear();

        // Bank arbitration: one grant per bank over local cores and port
        // offers, in core-then-port input order.
        self.touched_banks.sort_unstable();
        let touched_banks = std::mem::take(&mut self.touched_banks);
        for &bank in &touched_banks {
            let mut cands = std::mem::take(&mut self.bank_cands[bank as usize]);
            cands.sort_unstable_by_key(|&(key, _)| key);
            if self.bank_out[bank as usize].is_none() {
                let pick = Self::rr_pick(&cands, self.rr_bank[bank as usize]);
                let (key, input) = cands[pick];
                self.rr_bank[bank as usize] = (key + 1) % (self.cores_per_tile + self.dirs);
                match input {
                    BankInput::Core(attempt_idx) => {
                        let a = self.attempts[attempt_idx as usize];
                        let flit = self.accept(a);
                        self.serve_bank(bank, flit);
                    }
                    BankInput::Port(chain) => {
                        let flit = self.req_chains[chain as usize].pop_head();
                        self.serve_bank(bank, flit);
                        let port = self.tile_of_bank(bank) * self.dirs
                            + self.dir(self.tile_of_bank(bank), chain / self.dirs) as u32;
                        // Transfer completed: rotate the port pointer.
                        self.rr_req_port[port as usize] = (chain / self.dirs + 1) % self.n_tiles;
                    }
                }
            }
            cands.clear();
            self.bank_cands[bank as usize] = cands;
        }
        self.touched_banks = touched_banks;
        self.touched_banks.clear();

        for chain in &mut self.req_chains {
            chain.advance();
        }

        // Remote injection into chain entry registers.
        self.touched_inject.sort_unstable();
        let touched_inject = std::mem::take(&mut self.touched_inject);
        for &chain in &touched_inject {
            if self.req_chains[chain as usize].entry_free() {
                let mut cands = std::mem::take(&mut self.inject_cands[chain as usize]);
                cands.sort_unstable_by_key(|&(key, _)| key);
                let pick = Self::rr_pick_pair(&cands, self.rr_inject[chain as usize]);
                let (key, attempt_idx) = cands[pick];
                self.rr_inject[chain as usize] = (key + 1) % self.cores_per_tile;
                let a = self.attempts[attempt_idx as usize];
                let flit = self.accept(a);
                self.req_chains[chain as usize].push_entry(flit);
                cands.clear();
                self.inject_cands[chain as usize] = cands;
            } else {
                self.inject_cands[chain as usize].clear();
            }
        }
        self.touched_inject = touched_inject;
        self.touched_inject.clear();

        self.attempts.clear();
        self.finished_cycle = self.cycle;
        self.cycle += 1;
    }

    /// The request a core would create for `addr` (test introspection).
    pub fn classify(&self, core: u32, addr: u64) -> Result<(u32, DestClass)> {
        let (loc, _) = locate_bank(addr, &self.cfg)?;
        let bank = self.cfg.global_bank_index(loc);
        let class = self.pair_class(self.tile_of_core(core), self.tile_of_bank(bank));
        Ok((bank, class))
    }
}
