//! Channel-estimation mapping: element-wise complex division of received
//! pilots by reference pilots.
//!
//! Subcarrier rows are struck across tiles (row -> tile = row mod tiles)
//! and each core only produces rows whose storage is tile-local, so every
//! store (and load) stays inside its own tile. One complex division costs
//! one divider offload plus two MAC offloads; elements are processed in
//! interleaved groups so the divider latency overlaps neighbouring work.

use std::sync::Arc;

use num_complex::Complex64;

use super::reference::che_reference;
use super::trace::{BarrierSpec, CoreStream, Dep, Emitter, FuncUnit, GenStream, KernelTraces, ProgramGen};
use crate::error::{Result, SimError};
use crate::topology::{encode_addr, ClusterConfig};

/// Elements processed per interleaved group.
pub const UNROLL: usize = 4;
const FINAL_BARRIER: u32 = 0;

pub struct CheMapping {
    pub n_subcarriers: usize,
    pub n_rx: usize,
    pub n_tx: usize,
    n_tiles: u32,
    cores_per_tile: u32,
    banks_per_tile: u32,
    cfg: ClusterConfig,
}

impl CheMapping {
    pub fn new(n_subcarriers: usize, n_rx: usize, n_tx: usize, cfg: &ClusterConfig) -> Result<Self> {
        if n_subcarriers == 0 || n_rx == 0 || n_tx == 0 {
            return Err(SimError::DimensionError("estimation dims must be positive".into()));
        }
        let elems = n_rx * n_tx;
        // Received and reference matrices are resident; estimates overwrite
        // the received region in place.
        let words = 2 * n_subcarriers as u64 * elems as u64;
        if words > cfg.total_l1_words() {
            return Err(SimError::CapacityError {
                required_words: words,
                l1_words: cfg.total_l1_words(),
            });
        }
        let n_tiles = cfg.total_tiles();
        let rows_per_tile = n_subcarriers.div_ceil(n_tiles as usize);
        let tile_words = cfg.banks_per_tile as u64 * cfg.bank_words as u64;
        if (rows_per_tile * 2 * elems) as u64 > tile_words {
            return Err(SimError::CapacityError {
                required_words: (rows_per_tile * 2 * elems) as u64,
                l1_words: tile_words,
            });
        }
        Ok(Self {
            n_subcarriers,
            n_rx,
            n_tx,
            n_tiles,
            cores_per_tile: cfg.cores_per_tile,
            banks_per_tile: cfg.banks_per_tile,
            cfg: cfg.clone(),
        })
    }

    pub fn elems_per_row(&self) -> usize {
        self.n_rx * self.n_tx
    }

    fn tile_of_row(&self, row: usize) -> u32 {
        (row % self.n_tiles as usize) as u32
    }

    /// Tile-local word index -> cluster address, striping over the tile's
    /// own banks.
    fn tile_word_addr(&self, tile: u32, word: usize) -> u64 {
        let bank = tile * self.banks_per_tile + (word as u32 % self.banks_per_tile);
        encode_addr(
            self.cfg.location_of_global_bank(bank),
            word as u32 / self.banks_per_tile,
            &self.cfg,
        )
    }

    /// Received-pilot element address (estimates are written back in place).
    pub fn rx_addr(&self, row: usize, elem: usize) -> u64 {
        let slot = row / self.n_tiles as usize;
        self.tile_word_addr(self.tile_of_row(row), slot * 2 * self.elems_per_row() + elem)
    }

    pub fn ref_addr(&self, row: usize, elem: usize) -> u64 {
        let slot = row / self.n_tiles as usize;
        self.tile_word_addr(
            self.tile_of_row(row),
            slot * 2 * self.elems_per_row() + self.elems_per_row() + elem,
        )
    }

    /// Rows a core produces: rows striking its tile, dealt round-robin over
    /// the tile's cores by slot index.
    pub fn rows_of_core(&self, core: u32) -> Vec<usize> {
        let tile = core / self.cores_per_tile;
        let lane = core % self.cores_per_tile;
        (0..self.n_subcarriers)
            .filter(|&row| {
                self.tile_of_row(row) == tile
                    && (row / self.n_tiles as usize) % self.cores_per_tile as usize == lane as usize
            })
            .collect()
    }
}

pub struct CheGen {
    map: Arc<CheMapping>,
    rows: Vec<usize>,
    row_idx: usize,
    elem: usize,
    done: bool,
}

impl ProgramGen for CheGen {
    fn emit_next(&mut self, out: &mut Emitter) -> bool {
        if self.done {
            return false;
        }
        if self.row_idx >= self.rows.len() {
            out.barrier(FINAL_BARRIER);
            self.done = true;
            return true;
        }
        let map = &self.map;
        let row = self.rows[self.row_idx];
        let elems = map.elems_per_row();
        let group = UNROLL.min(elems - self.elem);
        let base = self.elem;
        // Operand loads for the whole group, then the divisions, then each
        // element's MAC pair, scoreboard wait and in-place store.
        let mut ref_loads = vec![0u32; group];
        for (slot, e) in (base..base + group).enumerate() {
            out.load(map.rx_addr(row, e));
            ref_loads[slot] = out.load(map.ref_addr(row, e));
        }
        let mut divs = vec![0u32; group];
        for slot in 0..group {
            divs[slot] = out.offload(FuncUnit::Div, Dep::Load(ref_loads[slot]));
        }
        for (slot, e) in (base..base + group).enumerate() {
            let m1 = out.offload(FuncUnit::Mac, Dep::Offload(divs[slot]));
            let m2 = out.offload(FuncUnit::Mac, Dep::Offload(m1));
            out.use_result(Dep::Offload(m2));
            out.store(map.rx_addr(row, e));
        }
        self.elem += group;
        if self.elem >= elems {
            self.elem = 0;
            self.row_idx += 1;
        }
        true
    }
}

pub fn map_che(n_subcarriers: usize, n_rx: usize, n_tx: usize, cfg: &ClusterConfig) -> Result<KernelTraces> {
    let map = Arc::new(CheMapping::new(n_subcarriers, n_rx, n_tx, cfg)?);
    let mut participants = 0;
    let streams = (0..cfg.total_cores())
        .map(|core| {
            let rows = map.rows_of_core(core);
            if rows.is_empty() {
                CoreStream::Fixed(Default::default())
            } else {
                participants += 1;
                CoreStream::Che(GenStream::new(CheGen {
                    map: Arc::clone(&map),
                    rows,
                    row_idx: 0,
                    elem: 0,
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

/// Execute the row schedule over a memory image and compare against the
/// reference element-wise division; returns the largest deviation.
pub fn verify_functional(
    n_subcarriers: usize,
    n_rx: usize,
    n_tx: usize,
    cfg: &ClusterConfig,
    seed: u64,
) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let map = CheMapping::new(n_subcarriers, n_rx, n_tx, cfg)?;
    let elems = map.elems_per_row();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut gen = || {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            + Complex64::new(3.0, 0.0)
    };
    let rx: Vec<Complex64> = (0..n_subcarriers * elems).map(|_| gen()).collect();
    let rf: Vec<Complex64> = (0..n_subcarriers * elems).map(|_| gen()).collect();
    let want = che_reference(&rx, &rf)?;

    let mut image = vec![Complex64::new(0.0, 0.0); cfg.total_l1_words() as usize];
    for row in 0..n_subcarriers {
        for e in 0..elems {
            image[map.rx_addr(row, e) as usize] = rx[row * elems + e];
            image[map.ref_addr(row, e) as usize] = rf[row * elems + e];
        }
    }
    let mut covered = vec![false; n_subcarriers];
    for core in 0..cfg.total_cores() {
        for row in map.rows_of_core(core) {
            assert!(!covered[row], "row {row} produced twice");
            covered[row] = true;
            for e in 0..elems {
                let v = image[map.rx_addr(row, e) as usize] / image[map.ref_addr(row, e) as usize];
                image[map.rx_addr(row, e) as usize] = v;
            }
        }
    }
    if !covered.iter().all(|&c| c) {
        return Err(SimError::DimensionError("subcarrier rows not fully covered".into()));
    }
    let mut worst: f64 = 0.0;
    for row in 0..n_subcarriers {
        for e in 0..elems {
            let got = image[map.rx_addr(row, e) as usize];
            worst = worst.max((got - want[row * elems + e]).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::trace::TraceOp;
    use crate::topology::{destination_class, locate_bank, DestClass};

    #[test]
    fn all_stores_are_tile_local() {
        let cfg = ClusterConfig {
            tiles_per_subgroup: 2,
            subgroups_per_group: 2,
            groups: 2,
            ..ClusterConfig::default()
        };
        let traces = map_che(64, 8, 4, &cfg).unwrap();
        for (core, mut stream) in traces.streams.into_iter().enumerate() {
            while let Some(op) = stream.next_op() {
                if let TraceOp::Store { addr } | TraceOp::Load { addr } = op {
                    let (loc, _) = locate_bank(addr, &cfg).unwrap();
                    assert_eq!(
                        destination_class(core as u32, loc, &cfg),
                        DestClass::LocalTile
                    );
                }
            }
        }
    }

    #[test]
    fn single_row_single_core() {
        let cfg = ClusterConfig {
            cores_per_tile: 1,
            banks_per_tile: 8,
            tiles_per_subgroup: 1,
            subgroups_per_group: 1,
            groups: 1,
            ..ClusterConfig::default()
        };
        let traces = map_che(1, 2, 2, &cfg).unwrap();
        let mut stream = traces.streams.into_iter().next().unwrap();
        let mut loads = 0;
        let mut divs = 0;
        while let Some(op) = stream.next_op() {
            match op {
                TraceOp::Load { .. } => loads += 1,
                TraceOp::Offload { unit: FuncUnit::Div, .. } => divs += 1,
                _ => {}
            }
        }
        assert_eq!(loads, 8); // rx + ref per element
        assert_eq!(divs, 4);
    }

    #[test]
    fn replay_matches_reference() {
        let cfg = ClusterConfig {
            tiles_per_subgroup: 2,
            subgroups_per_group: 2,
            groups: 1,
            ..ClusterConfig::default()
        };
        let err = verify_functional(32, 8, 4, &cfg, 11).unwrap();
        assert_eq!(err, 0.0); // same operations in the same order
    }

    #[test]
    fn capacity_error_when_rows_overflow_tiles() {
        let cfg = ClusterConfig {
            cores_per_tile: 1,
            banks_per_tile: 1,
            bank_words: 16,
            tiles_per_subgroup: 1,
            subgroups_per_group: 1,
            groups: 1,
            ..ClusterConfig::default()
        };
        assert!(matches!(
            CheMapping::new(4, 2, 2, &cfg),
            Err(SimError::CapacityError { .. })
        ));
    }
}
