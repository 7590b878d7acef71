//! Small-system inversion mapping: independent Hermitian positive-definite
//! problems inverted through Cholesky factorization, one batch per core.
//!
//! The kernel weak-scales: each core owns a contiguous batch of problems
//! whose storage (input matrix, factor, inverse written in place) lives in
//! its own tile's banks, so no request ever leaves the tile. Divider
//! offloads cover the square roots and reciprocal scalings; the dependent
//! factorization chains are what the core waits on.

use std::sync::Arc;

use num_complex::Complex64;

use super::reference::{inversion_residual, sysinv_reference};
use super::trace::{BarrierSpec, CoreStream, Dep, Emitter, FuncUnit, GenStream, KernelTraces, ProgramGen};
use crate::error::{Result, SimError};
use crate::topology::{encode_addr, ClusterConfig};

const FINAL_BARRIER: u32 = 0;
/// Transceiver bound of the per-subcarrier detection problem.
pub const MAX_DIM: usize = 32;

pub struct SysInvMapping {
    pub n_problems: usize,
    pub dim: usize,
    pub problems_per_core: usize,
    words_per_problem: usize,
    per_core_words: usize,
    cores_per_tile: u32,
    banks_per_tile: u32,
    cfg: ClusterConfig,
}

impl SysInvMapping {
    pub fn new(n_problems: usize, dim: usize, cfg: &ClusterConfig) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(SimError::DimensionError(format!(
                "problem dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        let n_cores = cfg.total_cores() as usize;
        if n_problems == 0 || n_problems % n_cores != 0 {
            return Err(SimError::ConfigError(format!(
                "{n_problems} problems do not divide evenly over {n_cores} cores"
            )));
        }
        let problems_per_core = n_problems / n_cores;
        let words_per_problem = dim * dim;
        let per_core_words = problems_per_core * words_per_problem;
        let tile_words = cfg.banks_per_tile as usize * cfg.bank_words as usize;
        if per_core_words * cfg.cores_per_tile as usize > tile_words {
            return Err(SimError::CapacityError {
                required_words: (per_core_words * cfg.cores_per_tile as usize) as u64,
                l1_words: tile_words as u64,
            });
        }
        Ok(Self {
            n_problems,
            dim,
            problems_per_core,
            words_per_problem,
            per_core_words,
            cores_per_tile: cfg.cores_per_tile,
            banks_per_tile: cfg.banks_per_tile,
            cfg: cfg.clone(),
        })
    }

    /// Problems of a core: a contiguous batch.
    pub fn problems_of_core(&self, core: u32) -> std::ops::Range<usize> {
        let base = core as usize * self.problems_per_core;
        base..base + self.problems_per_core
    }

    /// Element address inside the owning core's tile-local region.
    pub fn elem_addr(&self, problem: usize, elem: usize) -> u64 {
        let core = (problem / self.problems_per_core) as u32;
        let tile = core / self.cores_per_tile;
        let lane = core % self.cores_per_tile;
        let word = lane as usize * self.per_core_words
            + (problem % self.problems_per_core) * self.words_per_problem
            + elem;
        let bank = tile * self.banks_per_tile + (word as u32 % self.banks_per_tile);
        encode_addr(
            self.cfg.location_of_global_bank(bank),
            word as u32 / self.banks_per_tile,
            &self.cfg,
        )
    }
}

pub struct SysInvGen {
    map: Arc<SysInvMapping>,
    problems: std::ops::Range<usize>,
    done: bool,
}

impl ProgramGen for SysInvGen {
    fn emit_next(&mut self, out: &mut Emitter) -> bool {
        if self.done {
            return false;
        }
        let Some(problem) = self.problems.next() else {
            out.barrier(FINAL_BARRIER);
            self.done = true;
            return true;
        };
        let map = &self.map;
        let d = map.dim;
        // Fetch the matrix.
        let mut last_load = 0;
        for e in 0..map.words_per_problem {
            last_load = out.load(map.elem_addr(problem, e));
        }
        // Cholesky factorization: per column a dependent dot chain feeding
        // the diagonal square root (divider unit), then the scaled column
        // updates below it.
        let mut col_div = vec![0u32; d];
        let mut dep = Dep::Load(last_load);
        for j in 0..d {
            for _ in 0..j {
                dep = Dep::Offload(out.offload(FuncUnit::Mac, dep));
            }
            let div = out.offload(FuncUnit::Div, dep);
            col_div[j] = div;
            dep = Dep::Offload(div);
            for _ in j + 1..d {
                let mut inner = Dep::Offload(div);
                for _ in 0..j {
                    inner = Dep::Offload(out.offload(FuncUnit::Mac, inner));
                }
                out.offload(FuncUnit::Mac, inner);
            }
            out.compute(1);
        }
        // Forward/backward substitution per unit vector; each row update is
        // a dot chain scaled by the column reciprocal.
        let mut last = Dep::None;
        for _col in 0..d {
            for i in 0..d {
                let mut inner = Dep::Offload(col_div[i]);
                for _ in 0..i {
                    inner = Dep::Offload(out.offload(FuncUnit::Mac, inner));
                }
                last = Dep::Offload(out.offload(FuncUnit::Mac, inner));
            }
            for i in (0..d).rev() {
                let mut inner = Dep::Offload(col_div[i]);
                for _ in 0..d - 1 - i {
                    inner = Dep::Offload(out.offload(FuncUnit::Mac, inner));
                }
                last = Dep::Offload(out.offload(FuncUnit::Mac, inner));
            }
        }
        // Write the inverse back in place.
        out.use_result(last);
        for e in 0..map.words_per_problem {
            out.store(map.elem_addr(problem, e));
        }
        true
    }
}

pub fn map_sysinv(n_problems: usize, dim: usize, cfg: &ClusterConfig) -> Result<KernelTraces> {
    let map = Arc::new(SysInvMapping::new(n_problems, dim, cfg)?);
    let streams = (0..cfg.total_cores())
        .map(|core| {
            CoreStream::SysInv(GenStream::new(SysInvGen {
                map: Arc::clone(&map),
                problems: map.problems_of_core(core),
                done: false,
            }))
        })
        .collect();
    Ok(KernelTraces {
        streams,
        barriers: vec![BarrierSpec { id: FINAL_BARRIER, participants: cfg.total_cores() }],
    })
}

/// Invert every problem through the per-core schedule and compare against
/// the reference inversion; returns the worst inversion residual.
pub fn verify_functional(n_problems: usize, dim: usize, cfg: &ClusterConfig, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let map = SysInvMapping::new(n_problems, dim, cfg)?;
    let mut image = vec![Complex64::new(0.0, 0.0); cfg.total_l1_words() as usize];
    let mut originals = Vec::with_capacity(n_problems);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for p in 0..n_problems {
        let m: Vec<Complex64> = (0..dim * dim)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut a = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let mut v = Complex64::new(0.0, 0.0);
                for k in 0..dim {
                    v += m[k * dim + i].conj() * m[k * dim + j];
                }
                if i == j {
                    v += Complex64::new(4.0, 0.0);
                }
                a[i * dim + j] = v;
            }
        }
        for (e, &v) in a.iter().enumerate() {
            image[map.elem_addr(p, e) as usize] = v;
        }
        originals.push(a);
    }
    let mut covered = vec![false; n_problems];
    let mut worst: f64 = 0.0;
    for core in 0..cfg.total_cores() {
        for p in map.problems_of_core(core) {
            assert!(!covered[p], "problem {p} solved twice");
            covered[p] = true;
            let a: Vec<Complex64> =
                (0..dim * dim).map(|e| image[map.elem_addr(p, e) as usize]).collect();
            let inv = sysinv_reference(&a, dim)?;
            for (e, &v) in inv.iter().enumerate() {
                image[map.elem_addr(p, e) as usize] = v;
            }
            worst = worst.max(inversion_residual(&originals[p], &inv, dim));
        }
    }
    if !covered.iter().all(|&c| c) {
        return Err(SimError::DimensionError("problems not fully covered".into()));
    }
    Ok(worst)
}
