//! Register-tiled matrix multiplication mapping.
//!
//! Output is partitioned into 4x4 register tiles spread round-robin over
//! the cores. The k loop is software-pipelined (operand loads for the next
//! step issue before the multiplies of the current one) and cores of the
//! same tile start their k walk at rotated offsets so they do not fetch the
//! same rows through the same remote port at the same time. Matrices are
//! stored row-major from address zero, so operands spread over every bank.

use std::sync::Arc;

use super::reference::matmul_reference;
use super::trace::{BarrierSpec, CoreStream, Dep, Emitter, FuncUnit, GenStream, KernelTraces, ProgramGen};
use crate::error::{Result, SimError};
use crate::topology::ClusterConfig;

/// Register tile edge: a 4x4 accumulator block fits the register budget of
/// a compact 32-entry file alongside the operand registers.
pub const TILE: usize = 4;
const FINAL_BARRIER: u32 = 0;

pub struct MatMulMapping {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    tiles_m: usize,
    tiles_n: usize,
    cfg_cores: u32,
    cores_per_tile: u32,
    a_base: u64,
    b_base: u64,
    c_base: u64,
}

impl MatMulMapping {
    pub fn new(m: usize, n: usize, k: usize, cfg: &ClusterConfig) -> Result<Self> {
        if m == 0 || n == 0 || k == 0 || m % TILE != 0 || n % TILE != 0 {
            return Err(SimError::DimensionError(format!(
                "matmul {m}x{n}x{k} must be positive with M and N multiples of {TILE}"
            )));
        }
        let words = (m * k + k * n + m * n) as u64;
        if words > cfg.total_l1_words() {
            return Err(SimError::CapacityError {
                required_words: words,
                l1_words: cfg.total_l1_words(),
            });
        }
        Ok(Self {
            m,
            n,
            k,
            tiles_m: m / TILE,
            tiles_n: n / TILE,
            cfg_cores: cfg.total_cores(),
            cores_per_tile: cfg.cores_per_tile,
            a_base: 0,
            b_base: (m * k) as u64,
            c_base: (m * k + k * n) as u64,
        })
    }

    pub fn total_tiles(&self) -> usize {
        self.tiles_m * self.tiles_n
    }

    /// Output tiles of a core, round-robin over the whole grid.
    pub fn tiles_of_core(&self, core: u32) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cores = self.cfg_cores as usize;
        (core as usize..self.total_tiles())
            .step_by(cores)
            .map(|t| (t / self.tiles_n, t % self.tiles_n))
    }

    /// k-loop start offset for a core: cores sharing a tile walk k from
    /// rotated positions.
    pub fn rotation_offset(&self, core: u32) -> usize {
        let lane = (core % self.cores_per_tile) as usize;
        (lane * (self.k / self.cores_per_tile as usize)) % self.k
    }

    pub fn a_addr(&self, row: usize, col: usize) -> u64 {
        self.a_base + (row * self.k + col) as u64
    }

    pub fn b_addr(&self, row: usize, col: usize) -> u64 {
        self.b_base + (row * self.n + col) as u64
    }

    pub fn c_addr(&self, row: usize, col: usize) -> u64 {
        self.c_base + (row * self.n + col) as u64
    }
}

pub struct MatMulGen {
    map: Arc<MatMulMapping>,
    core: u32,
    tiles: Vec<(usize, usize)>,
    tile_idx: usize,
    step: usize,
    /// Last load ordinal and the first mac ordinal of the previous k step.
    prev_loads: Option<u32>,
    prev_macs: Option<u32>,
    done: bool,
}

impl MatMulGen {
    fn emit_loads(&self, out: &mut Emitter, ti: usize, tj: usize, kk: usize) -> u32 {
        let map = &self.map;
        let kq = (kk + map.rotation_offset(self.core)) % map.k;
        let mut last = 0;
        for di in 0..TILE {
            last = out.load(map.a_addr(ti * TILE + di, kq));
        }
        for dj in 0..TILE {
            last = out.load(map.b_addr(kq, tj * TILE + dj));
        }
        last
    }

    /// The 16 accumulator updates for one k step. The first multiply waits
    /// on the step's operand loads; the rest chain on their own accumulator
    /// from the previous step.
    fn emit_macs(&self, out: &mut Emitter, loads: u32, prev_macs: Option<u32>) -> u32 {
        let mut first = 0;
        for cell in 0..TILE * TILE {
            let dep = if cell == 0 {
                Dep::Load(loads)
            } else {
                match prev_macs {
                    Some(base) => Dep::Offload(base + cell as u32),
                    None => Dep::None,
                }
            };
            let ord = out.offload(FuncUnit::Mac, dep);
            if cell == 0 {
                first = ord;
            }
        }
        first
    }
}

impl ProgramGen for MatMulGen {
    fn emit_next(&mut self, out: &mut Emitter) -> bool {
        if self.done {
            return false;
        }
        let map = Arc::clone(&self.map);
        if self.tile_idx >= self.tiles.len() {
            out.barrier(FINAL_BARRIER);
            self.done = true;
            return true;
        }
        let (ti, tj) = self.tiles[self.tile_idx];
        if self.step == 0 {
            // Accumulator setup, then the first operand block.
            out.compute(2);
            self.prev_loads = Some(self.emit_loads(out, ti, tj, 0));
            self.prev_macs = None;
            self.step = 1;
            return true;
        }
        if self.step < map.k {
            // Software pipeline: next step's loads, then this step's macs.
            let loads = self.emit_loads(out, ti, tj, self.step);
            let first_mac = self.emit_macs(out, self.prev_loads.unwrap(), self.prev_macs);
            self.prev_loads = Some(loads);
            self.prev_macs = Some(first_mac);
            self.step += 1;
            return true;
        }
        // Drain the pipeline and write the tile back.
        let first_mac = self.emit_macs(out, self.prev_loads.unwrap(), self.prev_macs);
        out.use_result(Dep::Offload(first_mac + (TILE * TILE - 1) as u32));
        for di in 0..TILE {
            for dj in 0..TILE {
                out.store(map.c_addr(ti * TILE + di, tj * TILE + dj));
            }
        }
        self.tile_idx += 1;
        self.step = 0;
        true
    }
}

pub fn map_matmul(m: usize, n: usize, k: usize, cfg: &ClusterConfig) -> Result<KernelTraces> {
    let map = Arc::new(MatMulMapping::new(m, n, k, cfg)?);
    let mut participants = 0;
    let streams = (0..cfg.total_cores())
        .map(|core| {
            let tiles: Vec<_> = map.tiles_of_core(core).collect();
            if tiles.is_empty() {
                CoreStream::Fixed(Default::default())
            } else {
                participants += 1;
                CoreStream::MatMul(GenStream::new(MatMulGen {
                    map: Arc::clone(&map),
                    core,
                    tiles,
                    tile_idx: 0,
                    step: 0,
                    prev_loads: None,
                    prev_macs: None,
                    done: false,
                }))
            }
        })
        .collect();
    Ok(KernelTraces {
        streams,
        barriers: vec![BarrierSpec { id: FINAL_BARRIER, participants }],
    })
}

/// Execute the tile schedule with integer arithmetic and compare against
/// the reference product. Returns the number of mismatching cells.
pub fn verify_functional(m: usize, n: usize, k: usize, cfg: &ClusterConfig, seed: u64) -> Result<usize> {
    use rand::{Rng, SeedableRng};
    let map = MatMulMapping::new(m, n, k, cfg)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<i64> = (0..m * k).map(|_| rng.gen_range(-8..8)).collect();
    let b: Vec<i64> = (0..k * n).map(|_| rng.gen_range(-8..8)).collect();
    let want = matmul_reference(&a, &b, m, n, k)?;
    let mut got = vec![0i64; m * n];
    let mut covered = vec![false; map.total_tiles()];
    for core in 0..cfg.total_cores() {
        let offset = map.rotation_offset(core);
        for (ti, tj) in map.tiles_of_core(core) {
            assert!(!covered[ti * map.tiles_n + tj], "tile computed twice");
            covered[ti * map.tiles_n + tj] = true;
            let mut acc = [[0i64; TILE]; TILE];
            for kk in 0..k {
                let kq = (kk + offset) % k;
                for (di, row) in acc.iter_mut().enumerate() {
                    for (dj, cell) in row.iter_mut().enumerate() {
                        *cell += a[(ti * TILE + di) * k + kq] * b[kq * n + tj * TILE + dj];
                    }
                }
            }
            for di in 0..TILE {
                for dj in 0..TILE {
                    got[(ti * TILE + di) * n + tj * TILE + dj] = acc[di][dj];
                }
            }
        }
    }
    if !covered.iter().all(|&c| c) {
        return Err(SimError::DimensionError("output tiles not fully covered".into()));
    }
    Ok(got.iter().zip(&want).filter(|(g, w)| g != w).count())
}
