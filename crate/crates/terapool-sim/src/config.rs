//! Flat `key = value` experiment configuration.
//!
//! Bare keys configure the cluster (the `ClusterConfig` field names);
//! dotted keys open one experiment section (`sweep.*`, `kernel.*`,
//! `pusch.*`, `report.*`). Unknown keys, malformed values and violated
//! invariants are reported with their line numbers, all at once.

use std::path::Path;

use crate::analytics::{PuschScenario, DEFAULT_OPS_PER_MAC};
use crate::error::{Result, SimError};
use crate::kernels::{KernelDims, KernelKind, KernelSimConfig, KernelSpec};
use crate::topology::{BankInterleave, ClusterConfig, LatencyProfile};

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub step: f64,
    pub seeds: Vec<u64>,
    pub duration: u64,
    pub warmup: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            lambda_min: 0.02,
            lambda_max: 0.40,
            step: 0.02,
            seeds: vec![1],
            duration: 20_000,
            warmup: 2_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelSettings {
    pub spec: KernelSpec,
    /// Latency profiles to run, one result row each.
    pub profiles: Vec<LatencyProfile>,
    pub sim: KernelSimConfig,
}

#[derive(Debug, Clone, Copy)]
pub struct ReportSettings {
    pub ops_per_mac: f64,
}

#[derive(Debug, Clone)]
pub enum Experiment {
    /// No experiment section: structural queries only.
    None,
    Sweep(SweepSettings),
    Kernel(KernelSettings),
    Pusch(PuschScenario),
    Report(ReportSettings),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::None => "none",
            Experiment::Sweep(_) => "sweep",
            Experiment::Kernel(_) => "kernel",
            Experiment::Pusch(_) => "pusch",
            Experiment::Report(_) => "report",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub cluster: ClusterConfig,
    pub experiment: Experiment,
    /// Original file text (hashed into the run manifest).
    pub raw: String,
}

struct Errors(Vec<String>);

impl Errors {
    fn push(&mut self, line: usize, key: &str, reason: impl std::fmt::Display) {
        self.0.push(format!("line {line}: {key}: {reason}"));
    }
}

fn parse_num<T: std::str::FromStr>(
    value: &str,
    line: usize,
    key: &str,
    errs: &mut Errors,
) -> Option<T> {
    match value.parse::<T>() {
        Ok(v) => Some(v),
        Err(_) => {
            errs.push(line, key, format!("cannot parse {value:?}"));
            None
        }
    }
}

fn parse_seed_list(value: &str, line: usize, key: &str, errs: &mut Errors) -> Option<Vec<u64>> {
    let seeds: std::result::Result<Vec<u64>, _> =
        value.split(',').map(|s| s.trim().parse::<u64>()).collect();
    match seeds {
        Ok(v) if !v.is_empty() => Some(v),
        _ => {
            errs.push(line, key, format!("expected a comma list of seeds, got {value:?}"));
            None
        }
    }
}

fn parse_interleave(value: &str, line: usize, key: &str, errs: &mut Errors) -> Option<BankInterleave> {
    match value {
        "word_interleaved" => Some(BankInterleave::WordInterleaved),
        "tile_sequential" => Some(BankInterleave::TileSequential),
        _ => {
            errs.push(line, key, "expected word_interleaved or tile_sequential");
            None
        }
    }
}

/// Parse kernel dimensions like `64x4096`, `512x512x512`, `4096x32x4`.
pub fn parse_dims(kind: KernelKind, value: &str) -> Result<KernelDims> {
    let parts: Vec<usize> = value
        .split(['x', 'X'])
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| SimError::ConfigError(format!("cannot parse dims {value:?}")))?;
    let dims = match (kind, parts.as_slice()) {
        (KernelKind::Fft, [t, n]) => KernelDims::Fft { n_points: *n, n_transforms: *t },
        (KernelKind::MatMul, [m, n]) => KernelDims::MatMul { m: *m, n: *n, k: *n },
        (KernelKind::MatMul, [m, n, k]) => KernelDims::MatMul { m: *m, n: *n, k: *k },
        (KernelKind::Che, [sc, rx, tx]) => {
            KernelDims::Che { n_subcarriers: *sc, n_rx: *rx, n_tx: *tx }
        }
        (KernelKind::SysInv, [p, d]) => KernelDims::SysInv { n_problems: *p, dim: *d },
        _ => {
            return Err(SimError::ConfigError(format!(
                "dims {value:?} do not fit kernel {}",
                kind.name()
            )))
        }
    };
    Ok(dims)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut errs = Errors(Vec::new());
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((key, value)) => {
                let key = key.trim().to_string();
                let value = value.trim().to_string();
                if value.is_empty() {
                    errs.push(line_no, &key, "missing value");
                } else if let Some((prev, _, _)) = entries.iter().find(|(_, k, _)| *k == key) {
                    errs.push(line_no, &key, format!("duplicate key (first set on line {prev})"));
                } else {
                    entries.push((line_no, key, value));
                }
            }
            None => errs.push(line_no, line, "expected `key = value`"),
        }
    }

    // Presets apply first so explicit keys can override them.
    let mut cluster = ClusterConfig::default();
    for (line, key, value) in &entries {
        if key == "preset" {
            match value.as_str() {
                "terapool" => cluster = ClusterConfig::default(),
                "mempool256" => cluster = ClusterConfig::mempool256(),
                other => match LatencyProfile::parse(other) {
                    Ok(profile) => cluster = ClusterConfig::with_profile(profile),
                    Err(_) => errs.push(
                        *line,
                        key,
                        format!("unknown preset {other:?} (terapool, mempool256, or a profile)"),
                    ),
                },
            }
        }
    }

    let mut sweep: Option<SweepSettings> = None;
    let mut kernel_kind: Option<KernelKind> = None;
    let mut kernel_dims_raw: Option<String> = None;
    let mut kernel_profiles: Vec<LatencyProfile> = Vec::new();
    let mut kernel_placement: Option<BankInterleave> = None;
    let mut kernel_sim = KernelSimConfig::default();
    let mut kernel_section = false;
    let mut pusch: Option<PuschScenario> = None;
    let mut report: Option<ReportSettings> = None;

    for (line, key, value) in &entries {
        let line = *line;
        match key.as_str() {
            "preset" => {}
            "profile" => match LatencyProfile::parse(value) {
                Ok(p) => cluster.latency_profile = p,
                Err(e) => errs.push(line, key, e),
            },
            "cores_per_tile" => {
                if let Some(v) = parse_num(value, line, key, &mut errs) {
                    cluster.cores_per_tile = v;
                }
            }
            "banks_per_tile" => {
                if let Some(v) = parse_num(value, line, key, &mut errs) {
                    cluster.banks_per_tile = v;
                }
            }
            "bank_words" => {
                if let Some(v) = parse_num(value, line, key, &mut errs) {
                    cluster.bank_words = v;
                }
            }
            "tiles_per_subgroup" => {
                if let Some(v) = parse_num(value, line, key, &mut errs) {
                    cluster.tiles_per_subgroup = v;
                }
            }
            "subgroups_per_group" => {
                if let Some(v) = parse_num(value, line, key, &mut errs) {
                    cluster.subgroups_per_group = v;
                }
            }
            "groups" => {
                if let Some(v) = parse_num(value, line, key, &mut errs) {
                    cluster.groups = v;
                }
            }
            "outstanding_per_core" => {
                if let Some(v) = parse_num(value, line, key, &mut errs) {
                    cluster.outstanding_per_core = v;
                }
            }
            "bank_interleave" => {
                if let Some(v) = parse_interleave(value, line, key, &mut errs) {
                    cluster.bank_interleave = v;
                }
            }
            "frequency_hz" => {
                if let Some(v) = parse_num::<f64>(value, line, key, &mut errs) {
                    cluster.frequency_hz = Some(v);
                }
            }
            _ if key.starts_with("sweep.") => {
                let s = sweep.get_or_insert_with(SweepSettings::default);
                match key.as_str() {
                    "sweep.lambda_min" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            s.lambda_min = v;
                        }
                    }
                    "sweep.lambda_max" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            s.lambda_max = v;
                        }
                    }
                    "sweep.step" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            s.step = v;
                        }
                    }
                    "sweep.seeds" => {
                        if let Some(v) = parse_seed_list(value, line, key, &mut errs) {
                            s.seeds = v;
                        }
                    }
                    "sweep.duration" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            s.duration = v;
                        }
                    }
                    "sweep.warmup" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            s.warmup = v;
                        }
                    }
                    _ => errs.push(line, key, "unknown key"),
                }
            }
            _ if key.starts_with("kernel.") => {
                kernel_section = true;
                match key.as_str() {
                    "kernel.kind" => match KernelKind::parse(value) {
                        Ok(k) => kernel_kind = Some(k),
                        Err(e) => errs.push(line, key, e),
                    },
                    "kernel.dims" => kernel_dims_raw = Some(value.clone()),
                    "kernel.profiles" => {
                        for part in value.split(',') {
                            match LatencyProfile::parse(part.trim()) {
                                Ok(p) => kernel_profiles.push(p),
                                Err(e) => errs.push(line, key, e),
                            }
                        }
                    }
                    "kernel.placement" => {
                        kernel_placement = parse_interleave(value, line, key, &mut errs);
                    }
                    "kernel.div_latency" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            kernel_sim.div_latency = v;
                        }
                    }
                    "kernel.mac_latency" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            kernel_sim.mac_latency = v;
                        }
                    }
                    "kernel.icache_miss_rate" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            kernel_sim.icache_miss_rate = v;
                        }
                    }
                    "kernel.icache_penalty" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            kernel_sim.icache_penalty = v;
                        }
                    }
                    _ => errs.push(line, key, "unknown key"),
                }
            }
            _ if key.starts_with("pusch.") => {
                let p = pusch.get_or_insert(PuschScenario {
                    n_antennas: 64,
                    n_subcarriers: 3276,
                    n_beams: 32,
                    word_bytes: 4,
                    n_clusters: 1,
                    l1_per_cluster_bytes: 4 << 20,
                });
                match key.as_str() {
                    "pusch.n_antennas" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            p.n_antennas = v;
                        }
                    }
                    "pusch.n_subcarriers" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            p.n_subcarriers = v;
                        }
                    }
                    "pusch.n_beams" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            p.n_beams = v;
                        }
                    }
                    "pusch.word_bytes" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            p.word_bytes = v;
                        }
                    }
                    "pusch.n_clusters" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            p.n_clusters = v;
                        }
                    }
                    "pusch.l1_per_cluster_kib" => {
                        if let Some(v) = parse_num::<u64>(value, line, key, &mut errs) {
                            p.l1_per_cluster_bytes = v * 1024;
                        }
                    }
                    _ => errs.push(line, key, "unknown key"),
                }
            }
            _ if key.starts_with("report.") => {
                let r = report.get_or_insert(ReportSettings { ops_per_mac: DEFAULT_OPS_PER_MAC });
                match key.as_str() {
                    "report.ops_per_mac" => {
                        if let Some(v) = parse_num(value, line, key, &mut errs) {
                            r.ops_per_mac = v;
                        }
                    }
                    _ => errs.push(line, key, "unknown key"),
                }
            }
            _ => errs.push(line, key, "unknown key"),
        }
    }

    if let Err(e) = cluster.validate() {
        errs.0.push(format!("cluster: {e}"));
    }

    let kernel = if kernel_section {
        match (kernel_kind, kernel_dims_raw) {
            (Some(kind), dims_raw) => {
                let dims = match dims_raw {
                    Some(raw) => match parse_dims(kind, &raw) {
                        Ok(d) => Some(d),
                        Err(e) => {
                            errs.0.push(format!("kernel.dims: {e}"));
                            None
                        }
                    },
                    None => Some(KernelDims::max_in_l1(kind)),
                };
                dims.map(|dims| {
                    let mut spec = KernelSpec::new(dims);
                    if let Some(p) = kernel_placement {
                        spec.placement = p;
                    }
                    let profiles = if kernel_profiles.is_empty() {
                        vec![cluster.latency_profile]
                    } else {
                        kernel_profiles
                    };
                    KernelSettings { spec, profiles, sim: kernel_sim }
                })
            }
            (None, _) => {
                errs.0.push("kernel section requires kernel.kind".to_string());
                None
            }
        }
    } else {
        None
    };

    let mut sections: Vec<Experiment> = Vec::new();
    if let Some(s) = sweep {
        sections.push(Experiment::Sweep(s));
    }
    if let Some(k) = kernel {
        sections.push(Experiment::Kernel(k));
    }
    if let Some(p) = pusch {
        sections.push(Experiment::Pusch(p));
    }
    if let Some(r) = report {
        sections.push(Experiment::Report(r));
    }
    if sections.len() > 1 {
        errs.0.push(format!(
            "exactly one experiment section per run; found {}",
            sections.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ")
        ));
    }

    if !errs.0.is_empty() {
        return Err(SimError::ConfigError(errs.0.join("\n")));
    }
    Ok(ExperimentConfig {
        cluster,
        experiment: sections.pop().unwrap_or(Experiment::None),
        raw: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_preset_profile() {
        let cfg = parse_config_str("preset = 1-3-5-9\n").unwrap();
        assert_eq!(cfg.cluster.total_cores(), 1024);
        assert_eq!(cfg.cluster.latency_profile, LatencyProfile::P1_3_5_9);
        assert!(matches!(cfg.experiment, Experiment::None));
    }

    #[test]
    fn mempool_preset() {
        let cfg = parse_config_str("preset = mempool256\n").unwrap();
        assert_eq!(cfg.cluster.total_cores(), 256);
        assert_eq!(cfg.cluster.latency_profile, LatencyProfile::MEMPOOL);
    }

    #[test]
    fn zero_field_names_the_key() {
        let err = parse_config_str("cores_per_tile = 0\n").unwrap_err();
        assert!(err.to_string().contains("cores_per_tile"), "{err}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config_str("groups = 4\nbogus_key = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("bogus_key"), "{msg}");
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = parse_config_str("groups = 4\ngroups = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn one_experiment_section_only() {
        let err = parse_config_str(
            "sweep.lambda_min = 0.1\npusch.n_clusters = 4\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("exactly one experiment section"), "{err}");
    }

    #[test]
    fn kernel_section_parses() {
        let cfg = parse_config_str(
            "kernel.kind = fft\nkernel.dims = 64x4096\nkernel.profiles = 1-3-5-7, 1-3-5-9\n",
        )
        .unwrap();
        match cfg.experiment {
            Experiment::Kernel(k) => {
                assert_eq!(k.spec.dims, KernelDims::Fft { n_points: 4096, n_transforms: 64 });
                assert_eq!(k.profiles.len(), 2);
            }
            other => panic!("wrong experiment {}", other.name()),
        }
    }

    #[test]
    fn comments_and_spacing_tolerated() {
        let cfg = parse_config_str("# shape\n  groups = 2  # halved\n\nprofile = 1-3-5-7\n").unwrap();
        assert_eq!(cfg.cluster.groups, 2);
    }
}
