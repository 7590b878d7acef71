//! Cluster shape, address-to-bank mapping, destination classification and
//! closed-form zero-load latency.
//!
//! The hierarchy nests four levels: a Tile holds cores and SRAM banks, a
//! SubGroup holds tiles, a Group holds subgroups, and the Cluster holds
//! groups. Round-trip latency to a bank depends only on the hierarchical
//! distance between the issuing core and the bank (the destination class).

use crate::error::{Result, SimError};

/// Round-trip zero-load cycle latency per destination class.
///
/// Each value is odd: a round trip decomposes as one-way request registers,
/// one bank cycle, and one-way response registers, so `latency = 2r + 1`
/// where `r` is the register depth of the class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencyProfile {
    pub tile: u32,
    pub subgroup: u32,
    pub group: u32,
    pub cluster: u32,
}

impl LatencyProfile {
    pub const P1_3_5_5: Self = Self { tile: 1, subgroup: 3, group: 5, cluster: 5 };
    pub const P1_3_5_7: Self = Self { tile: 1, subgroup: 3, group: 5, cluster: 7 };
    pub const P1_3_5_9: Self = Self { tile: 1, subgroup: 3, group: 5, cluster: 9 };
    pub const P1_3_5_11: Self = Self { tile: 1, subgroup: 3, group: 5, cluster: 11 };
    /// Three-level baseline (no fourth hierarchy level); the cluster latency
    /// is kept equal to the group latency so the field is always defined.
    pub const MEMPOOL: Self = Self { tile: 1, subgroup: 3, group: 5, cluster: 5 };

    /// The four validated deep-hierarchy presets.
    pub const PRESETS: [Self; 4] = [Self::P1_3_5_5, Self::P1_3_5_7, Self::P1_3_5_9, Self::P1_3_5_11];

    pub fn latency(&self, class: DestClass) -> u32 {
        match class {
            DestClass::LocalTile => self.tile,
            DestClass::LocalSubGroup => self.subgroup,
            DestClass::LocalGroup => self.group,
            DestClass::RemoteGroup => self.cluster,
        }
    }

    /// One-way pipeline register depth for a class: `(latency - 1) / 2`.
    pub fn register_depth(&self, class: DestClass) -> u32 {
        (self.latency(class) - 1) / 2
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.tile, self.subgroup, self.group, self.cluster];
        for v in vals {
            if v == 0 || v % 2 == 0 {
                return Err(SimError::ConfigError(format!(
                    "latency profile values must be odd and >= 1, got {self}"
                )));
            }
        }
        if !(self.tile <= self.subgroup && self.subgroup <= self.group && self.group <= self.cluster) {
            return Err(SimError::ConfigError(format!(
                "latency profile must be non-decreasing tile<=subgroup<=group<=cluster, got {self}"
            )));
        }
        Ok(())
    }

    /// Parse the `a-b-c-d` (or three-level `a-b-c`) notation.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('-').collect();
        let nums: Vec<u32> = parts
            .iter()
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map_err(|_| SimError::ConfigError(format!("bad latency profile component {p:?} in {s:?}")))
            })
            .collect::<Result<_>>()?;
        let p = match nums.as_slice() {
            [t, s, g] => Self { tile: *t, subgroup: *s, group: *g, cluster: *g },
            [t, s, g, c] => Self { tile: *t, subgroup: *s, group: *g, cluster: *c },
            _ => {
                return Err(SimError::ConfigError(format!(
                    "latency profile {s:?} must have 3 or 4 components"
                )))
            }
        };
        p.validate()?;
        Ok(p)
    }
}

impl std::fmt::Display for LatencyProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}-{}-{}", self.tile, self.subgroup, self.group, self.cluster)
    }
}

/// How word addresses map onto banks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BankInterleave {
    /// Consecutive words spread across consecutive global bank indices.
    #[default]
    WordInterleaved,
    /// Each tile owns a contiguous address region, interleaved over its own
    /// banks. Kernels that pin outputs to their local banks assume this view.
    TileSequential,
}

/// Hierarchical distance between a core and a bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DestClass {
    LocalTile = 0,
    LocalSubGroup = 1,
    LocalGroup = 2,
    RemoteGroup = 3,
}

impl DestClass {
    pub const ALL: [Self; 4] = [
        Self::LocalTile,
        Self::LocalSubGroup,
        Self::LocalGroup,
        Self::RemoteGroup,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::LocalTile => "local_tile",
            Self::LocalSubGroup => "local_subgroup",
            Self::LocalGroup => "local_group",
            Self::RemoteGroup => "remote_group",
        }
    }
}

/// Position of a bank within the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BankLocation {
    pub group: u32,
    pub subgroup: u32,
    /// Tile index within the subgroup.
    pub tile: u32,
    /// Bank index within the tile.
    pub bank: u32,
}

/// Full parameterization of the cluster hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub cores_per_tile: u32,
    pub banks_per_tile: u32,
    /// 32-bit words per bank (256 words = 1 KiB).
    pub bank_words: u32,
    pub tiles_per_subgroup: u32,
    pub subgroups_per_group: u32,
    pub groups: u32,
    pub latency_profile: LatencyProfile,
    pub outstanding_per_core: u32,
    pub bank_interleave: BankInterleave,
    /// Optional clock for time-domain reporting.
    pub frequency_hz: Option<f64>,
}

impl Default for ClusterConfig {
    /// The 1024-core, 4 MiB deep-hierarchy cluster with the 1-3-5-7 profile.
    fn default() -> Self {
        Self {
            cores_per_tile: 8,
            banks_per_tile: 32,
            bank_words: 256,
            tiles_per_subgroup: 8,
            subgroups_per_group: 4,
            groups: 4,
            latency_profile: LatencyProfile::P1_3_5_7,
            outstanding_per_core: 8,
            bank_interleave: BankInterleave::WordInterleaved,
            frequency_hz: None,
        }
    }
}

impl ClusterConfig {
    /// Default cluster with a given latency profile.
    pub fn with_profile(profile: LatencyProfile) -> Self {
        Self { latency_profile: profile, ..Self::default() }
    }

    /// 256-core three-level baseline: 64 tiles of 4 cores and 16 banks,
    /// arranged as 4 groups of 16 tiles (1 MiB of L1), profile 1-3-5.
    pub fn mempool256() -> Self {
        Self {
            cores_per_tile: 4,
            banks_per_tile: 16,
            bank_words: 256,
            tiles_per_subgroup: 16,
            subgroups_per_group: 4,
            groups: 1,
            latency_profile: LatencyProfile::MEMPOOL,
            outstanding_per_core: 8,
            bank_interleave: BankInterleave::WordInterleaved,
            frequency_hz: Some(915.0e6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cores_per_tile", self.cores_per_tile),
            ("banks_per_tile", self.banks_per_tile),
            ("bank_words", self.bank_words),
            ("tiles_per_subgroup", self.tiles_per_subgroup),
            ("subgroups_per_group", self.subgroups_per_group),
            ("groups", self.groups),
            ("outstanding_per_core", self.outstanding_per_core),
        ] {
            if v == 0 {
                return Err(SimError::ConfigError(format!("{name} must be positive")));
            }
        }
        if self.outstanding_per_core > 64 {
            return Err(SimError::ConfigError(
                "outstanding_per_core above 64 is not supported".into(),
            ));
        }
        self.latency_profile.validate()
    }

    pub fn tiles_per_group(&self) -> u32 {
        self.tiles_per_subgroup * self.subgroups_per_group
    }

    pub fn total_tiles(&self) -> u32 {
        self.tiles_per_group() * self.groups
    }

    pub fn total_cores(&self) -> u32 {
        self.cores_per_tile * self.total_tiles()
    }

    pub fn total_banks(&self) -> u32 {
        self.banks_per_tile * self.total_tiles()
    }

    pub fn total_l1_words(&self) -> u64 {
        self.total_banks() as u64 * self.bank_words as u64
    }

    pub fn total_l1_bytes(&self) -> u64 {
        self.total_l1_words() * 4
    }

    /// Remote port count per tile: one for the local subgroup, one per other
    /// subgroup in the group, one per remote group.
    pub fn remote_ports(&self) -> u32 {
        1 + (self.subgroups_per_group - 1) + (self.groups - 1)
    }

    /// Flat tile index of `loc` in (group, subgroup, tile) order.
    pub fn tile_index(&self, group: u32, subgroup: u32, tile: u32) -> u32 {
        (group * self.subgroups_per_group + subgroup) * self.tiles_per_subgroup + tile
    }

    /// Inverse of [`tile_index`](Self::tile_index).
    pub fn tile_coords(&self, tile_index: u32) -> (u32, u32, u32) {
        let tile = tile_index % self.tiles_per_subgroup;
        let rest = tile_index / self.tiles_per_subgroup;
        let subgroup = rest % self.subgroups_per_group;
        let group = rest / self.subgroups_per_group;
        (group, subgroup, tile)
    }

    pub fn tile_of_core(&self, core: u32) -> u32 {
        core / self.cores_per_tile
    }

    pub fn tile_of_location(&self, loc: BankLocation) -> u32 {
        self.tile_index(loc.group, loc.subgroup, loc.tile)
    }

    pub fn global_bank_index(&self, loc: BankLocation) -> u32 {
        self.tile_of_location(loc) * self.banks_per_tile + loc.bank
    }

    pub fn location_of_global_bank(&self, global_bank: u32) -> BankLocation {
        let bank = global_bank % self.banks_per_tile;
        let (group, subgroup, tile) = self.tile_coords(global_bank / self.banks_per_tile);
        BankLocation { group, subgroup, tile, bank }
    }

    /// Bank counts per destination class as seen from any single core.
    pub fn banks_per_class(&self) -> [u64; 4] {
        let b = self.banks_per_tile as u64;
        let t = self.tiles_per_subgroup as u64;
        let s = self.subgroups_per_group as u64;
        let g = self.groups as u64;
        [b, (t - 1) * b, (s - 1) * t * b, (g - 1) * s * t * b]
    }
}

/// Map a word address to its bank location; the second element of the pair
/// is the word offset within the bank.
pub fn locate_bank(addr: u64, cfg: &ClusterConfig) -> Result<(BankLocation, u32)> {
    let total_words = cfg.total_l1_words();
    if addr >= total_words {
        return Err(SimError::AddressError { addr, total_words });
    }
    let n_banks = cfg.total_banks() as u64;
    match cfg.bank_interleave {
        BankInterleave::WordInterleaved => {
            let global_bank = (addr % n_banks) as u32;
            let word = (addr / n_banks) as u32;
            Ok((cfg.location_of_global_bank(global_bank), word))
        }
        BankInterleave::TileSequential => {
            let words_per_tile = cfg.banks_per_tile as u64 * cfg.bank_words as u64;
            let tile_index = (addr / words_per_tile) as u32;
            let within = addr % words_per_tile;
            let bank = (within % cfg.banks_per_tile as u64) as u32;
            let word = (within / cfg.banks_per_tile as u64) as u32;
            let (group, subgroup, tile) = cfg.tile_coords(tile_index);
            Ok((BankLocation { group, subgroup, tile, bank }, word))
        }
    }
}

/// Inverse of [`locate_bank`]: word address of `(loc, word)`.
pub fn encode_addr(loc: BankLocation, word: u32, cfg: &ClusterConfig) -> u64 {
    match cfg.bank_interleave {
        BankInterleave::WordInterleaved => {
            word as u64 * cfg.total_banks() as u64 + cfg.global_bank_index(loc) as u64
        }
        BankInterleave::TileSequential => {
            let words_per_tile = cfg.banks_per_tile as u64 * cfg.bank_words as u64;
            cfg.tile_of_location(loc) as u64 * words_per_tile
                + word as u64 * cfg.banks_per_tile as u64
                + loc.bank as u64
        }
    }
}

/// Hierarchical distance between a core and a bank location.
pub fn destination_class(core: u32, loc: BankLocation, cfg: &ClusterConfig) -> DestClass {
    let (cg, cs, ct) = cfg.tile_coords(cfg.tile_of_core(core));
    if cg != loc.group {
        DestClass::RemoteGroup
    } else if cs != loc.subgroup {
        DestClass::LocalGroup
    } else if ct != loc.tile {
        DestClass::LocalSubGroup
    } else {
        DestClass::LocalTile
    }
}

/// Class for a pair of tiles (the class seen by any core of `tile_a` for any
/// bank of `tile_b`).
pub fn tile_pair_class(tile_a: u32, tile_b: u32, cfg: &ClusterConfig) -> DestClass {
    let (ag, asg, at) = cfg.tile_coords(tile_a);
    let (bg, bsg, bt) = cfg.tile_coords(tile_b);
    if ag != bg {
        DestClass::RemoteGroup
    } else if asg != bsg {
        DestClass::LocalGroup
    } else if at != bt {
        DestClass::LocalSubGroup
    } else {
        DestClass::LocalTile
    }
}

/// Round-trip zero-load latency of a destination class.
pub fn zero_load_latency(class: DestClass, profile: &LatencyProfile) -> u32 {
    profile.latency(class)
}

/// Expected round-trip latency of a request to a uniformly random bank:
/// the bank-count-weighted average of the class latencies.
pub fn expected_zero_load_latency(cfg: &ClusterConfig) -> f64 {
    let counts = cfg.banks_per_class();
    let total: u64 = counts.iter().sum();
    let weighted: u64 = DestClass::ALL
        .iter()
        .map(|&c| counts[c.index()] * cfg.latency_profile.latency(c) as u64)
        .sum();
    weighted as f64 / total as f64
}

/// Which hierarchy level a crossbar instance sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossbarLevel {
    /// Per-tile local crossbar: (cores + K remote ports) x banks.
    TileLocal,
    /// Per-subgroup crossbar among its own tiles.
    SubgroupLocal,
    /// Crossbar between an ordered pair of subgroups in the same group.
    InterSubgroup,
    /// Crossbar from a group toward one remote group.
    InterGroup,
}

impl CrossbarLevel {
    pub fn name(self) -> &'static str {
        match self {
            Self::TileLocal => "tile_local",
            Self::SubgroupLocal => "subgroup_local",
            Self::InterSubgroup => "inter_subgroup",
            Self::InterGroup => "inter_group",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossbarEntry {
    pub level: CrossbarLevel,
    pub rows: u32,
    pub cols: u32,
    /// Instances over the whole cluster (one request network; the response
    /// network mirrors it).
    pub count: u32,
}

/// Crossbar inventory for one network of the cluster.
pub fn crossbar_inventory(cfg: &ClusterConfig) -> Vec<CrossbarEntry> {
    let s = cfg.subgroups_per_group;
    let g = cfg.groups;
    let t = cfg.tiles_per_subgroup;
    let tiles_per_group = cfg.tiles_per_group();
    let mut out = vec![CrossbarEntry {
        level: CrossbarLevel::TileLocal,
        rows: cfg.cores_per_tile + cfg.remote_ports(),
        cols: cfg.banks_per_tile,
        count: cfg.total_tiles(),
    }];
    out.push(CrossbarEntry {
        level: CrossbarLevel::SubgroupLocal,
        rows: t,
        cols: t,
        count: s * g,
    });
    if s > 1 {
        out.push(CrossbarEntry {
            level: CrossbarLevel::InterSubgroup,
            rows: t,
            cols: t,
            count: s * (s - 1) * g,
        });
    }
    if g > 1 {
        out.push(CrossbarEntry {
            level: CrossbarLevel::InterGroup,
            rows: tiles_per_group,
            cols: tiles_per_group,
            count: (g - 1) * g,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_cfg(groups: u32, subgroups: u32, tiles: u32) -> ClusterConfig {
        ClusterConfig {
            cores_per_tile: 2,
            banks_per_tile: 4,
            bank_words: 8,
            tiles_per_subgroup: tiles,
            subgroups_per_group: subgroups,
            groups,
            ..ClusterConfig::default()
        }
    }

    #[test]
    fn default_shape() {
        let cfg = ClusterConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.total_cores(), 1024);
        assert_eq!(cfg.total_banks(), 4096);
        assert_eq!(cfg.total_l1_bytes(), 4 * 1024 * 1024);
        assert_eq!(cfg.remote_ports(), 7);
    }

    #[test]
    fn mempool_shape() {
        let cfg = ClusterConfig::mempool256();
        cfg.validate().unwrap();
        assert_eq!(cfg.total_cores(), 256);
        assert_eq!(cfg.total_l1_bytes(), 1024 * 1024);
        assert_eq!(cfg.latency_profile, LatencyProfile::MEMPOOL);
    }

    #[test]
    fn locate_bank_word_interleaved_identity() {
        let cfg = ClusterConfig::default();
        let (loc, word) = locate_bank(0, &cfg).unwrap();
        assert_eq!((loc.group, loc.subgroup, loc.tile, loc.bank, word), (0, 0, 0, 0, 0));
        // One full sweep of the 4096 banks wraps back to bank 0, word 1.
        let (loc, word) = locate_bank(4096, &cfg).unwrap();
        assert_eq!(cfg.global_bank_index(loc), 0);
        assert_eq!(word, 1);
    }

    #[test]
    fn locate_bank_tile_sequential() {
        let cfg = ClusterConfig {
            bank_interleave: BankInterleave::TileSequential,
            ..ClusterConfig::default()
        };
        // 256 words x 32 banks fill tile 0; the next address starts tile 1.
        let (loc, word) = locate_bank(256 * 32, &cfg).unwrap();
        assert_eq!(cfg.tile_of_location(loc), 1);
        assert_eq!(loc.bank, 0);
        assert_eq!(word, 0);
    }

    #[test]
    fn locate_bank_out_of_range() {
        let cfg = toy_cfg(1, 1, 2);
        let total = cfg.total_l1_words();
        assert!(matches!(
            locate_bank(total, &cfg),
            Err(SimError::AddressError { .. })
        ));
    }

    #[test]
    fn tile_sequential_toy_bijective() {
        // Enumerate the full mapping of a 2-tile toy config and check it is
        // a bijection onto (location, word) pairs.
        let cfg = ClusterConfig {
            bank_interleave: BankInterleave::TileSequential,
            ..toy_cfg(1, 1, 2)
        };
        let mut seen = std::collections::HashSet::new();
        for addr in 0..cfg.total_l1_words() {
            let (loc, word) = locate_bank(addr, &cfg).unwrap();
            assert!(seen.insert((cfg.global_bank_index(loc), word)));
            assert_eq!(encode_addr(loc, word, &cfg), addr);
        }
        assert_eq!(seen.len() as u64, cfg.total_l1_words());
    }

    #[test]
    fn destination_class_examples() {
        let cfg = ClusterConfig::default();
        let bank_tile0 = BankLocation { group: 0, subgroup: 0, tile: 0, bank: 5 };
        assert_eq!(destination_class(0, bank_tile0, &cfg), DestClass::LocalTile);
        let bank_sg1 = BankLocation { group: 0, subgroup: 1, tile: 0, bank: 0 };
        assert_eq!(destination_class(0, bank_sg1, &cfg), DestClass::LocalGroup);
    }

    #[test]
    fn class_counts_match_enumeration() {
        // Brute-force count over every bank, for a few cores.
        let cfg = ClusterConfig::default();
        for core in [0u32, 7, 500, 1023] {
            let mut counts = [0u64; 4];
            for gb in 0..cfg.total_banks() {
                let loc = cfg.location_of_global_bank(gb);
                counts[destination_class(core, loc, &cfg).index()] += 1;
            }
            assert_eq!(counts, [32, 224, 768, 3072]);
            assert_eq!(counts, cfg.banks_per_class());
        }
    }

    #[test]
    fn zero_load_latency_values() {
        let p7 = LatencyProfile::P1_3_5_7;
        assert_eq!(zero_load_latency(DestClass::LocalTile, &p7), 1);
        assert_eq!(zero_load_latency(DestClass::RemoteGroup, &p7), 7);
        assert_eq!(zero_load_latency(DestClass::RemoteGroup, &LatencyProfile::P1_3_5_11), 11);
    }

    #[test]
    fn expected_latency_exact_values() {
        // Independent oracle: expectation by brute-force enumeration over all
        // banks, cross-checked against the closed form.
        let oracle = |cfg: &ClusterConfig| -> f64 {
            let mut sum = 0u64;
            for gb in 0..cfg.total_banks() {
                let loc = cfg.location_of_global_bank(gb);
                sum += cfg
                    .latency_profile
                    .latency(destination_class(0, loc, cfg)) as u64;
            }
            sum as f64 / cfg.total_banks() as f64
        };
        let expect = [
            (LatencyProfile::P1_3_5_5, 4.859375),
            (LatencyProfile::P1_3_5_7, 6.359375),
            (LatencyProfile::P1_3_5_9, 7.859375),
            (LatencyProfile::P1_3_5_11, 9.359375),
        ];
        for (profile, value) in expect {
            let cfg = ClusterConfig::with_profile(profile);
            let analytic = expected_zero_load_latency(&cfg);
            assert_eq!(analytic, value);
            assert_eq!(analytic, oracle(&cfg));
        }
        // Three-level baseline: (16*1 + 240*3 + 768*5) / 1024.
        let mp = ClusterConfig::mempool256();
        assert_eq!(expected_zero_load_latency(&mp), 4.46875);
        assert_eq!(expected_zero_load_latency(&mp), oracle(&mp));
    }

    #[test]
    fn inventory_default() {
        let cfg = ClusterConfig::default();
        let inv = crossbar_inventory(&cfg);
        let find = |lvl| inv.iter().find(|e| e.level == lvl).unwrap();
        let tl = find(CrossbarLevel::TileLocal);
        assert_eq!((tl.rows, tl.cols, tl.count), (15, 32, 128));
        let sl = find(CrossbarLevel::SubgroupLocal);
        assert_eq!((sl.rows, sl.cols, sl.count), (8, 8, 16));
        let is = find(CrossbarLevel::InterSubgroup);
        assert_eq!((is.rows, is.cols, is.count), (8, 8, 48));
        let ig = find(CrossbarLevel::InterGroup);
        // Three 32x32 crossbars per group.
        assert_eq!((ig.rows, ig.cols, ig.count), (32, 32, 12));
    }

    #[test]
    fn inventory_single_group_has_no_intergroup() {
        let cfg = toy_cfg(1, 2, 2);
        let inv = crossbar_inventory(&cfg);
        assert!(inv.iter().all(|e| e.level != CrossbarLevel::InterGroup));
    }

    #[test]
    fn profile_parse() {
        assert_eq!(LatencyProfile::parse("1-3-5-9").unwrap(), LatencyProfile::P1_3_5_9);
        assert_eq!(LatencyProfile::parse("1-3-5").unwrap(), LatencyProfile::MEMPOOL);
        assert!(LatencyProfile::parse("1-3-4-7").is_err());
        assert!(LatencyProfile::parse("3-1-5-7").is_err());
    }

    proptest! {
        #[test]
        fn locate_bank_roundtrip(
            addr_seed in 0u64..1_000_000,
            groups in 1u32..4,
            subgroups in 1u32..4,
            tiles in 1u32..4,
            interleave in prop::bool::ANY,
        ) {
            let mut cfg = toy_cfg(groups, subgroups, tiles);
            if interleave {
                cfg.bank_interleave = BankInterleave::TileSequential;
            }
            let addr = addr_seed % cfg.total_l1_words();
            let (loc, word) = locate_bank(addr, &cfg).unwrap();
            prop_assert!(loc.group < groups);
            prop_assert!(loc.subgroup < subgroups);
            prop_assert!(loc.tile < tiles);
            prop_assert!(loc.bank < cfg.banks_per_tile);
            prop_assert!(word < cfg.bank_words);
            prop_assert_eq!(encode_addr(loc, word, &cfg), addr);
        }

        #[test]
        fn class_probabilities_sum(groups in 1u32..5, subgroups in 1u32..5, tiles in 1u32..5) {
            let cfg = toy_cfg(groups, subgroups, tiles);
            let counts = cfg.banks_per_class();
            prop_assert_eq!(counts.iter().sum::<u64>(), cfg.total_banks() as u64);
            // And match brute force for core 0.
            let mut brute = [0u64; 4];
            for gb in 0..cfg.total_banks() {
                brute[destination_class(0, cfg.location_of_global_bank(gb), &cfg).index()] += 1;
            }
            prop_assert_eq!(brute, counts);
        }

        #[test]
        fn expected_latency_monotone(bump in 0u32..3, amount in 1u32..4) {
            let base = ClusterConfig::with_profile(LatencyProfile::P1_3_5_7);
            let mut p = base.latency_profile;
            // Raise one field (keeping oddness and ordering) and expect the
            // mean not to decrease.
            let delta = amount * 2;
            match bump {
                0 => { p.subgroup += delta; p.group += delta; p.cluster += delta; }
                1 => { p.group += delta; p.cluster += delta; }
                _ => { p.cluster += delta; }
            }
            p.validate().unwrap();
            let bumped = ClusterConfig::with_profile(p);
            prop_assert!(expected_zero_load_latency(&bumped) >= expected_zero_load_latency(&base));
        }
    }
}
