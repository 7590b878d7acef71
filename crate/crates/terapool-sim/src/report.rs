//! Result emission: CSV files (the authoritative artifact), self-contained
//! SVG charts, the reference-vs-computed report, and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::analytics::{
    self, achieved_performance, energy_efficiency, expected_table_row, peak_performance,
    pusch_transfer_model, round_tops, workload_requirement, PuschScenario,
};
use crate::error::Result;
use crate::kernels::StallReport;
use crate::topology::{
    crossbar_inventory, expected_zero_load_latency, zero_load_latency, ClusterConfig, DestClass,
    LatencyProfile,
};
use crate::traffic::LoadSweep;

/// Files produced by one experiment run.
#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub config_hash: String,
}

impl ResultBundle {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new(), config_hash: String::new() }
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(name);
        std::fs::write(&path, contents)?;
        self.files.push(path.clone());
        Ok(path)
    }
}

pub fn config_hash(raw: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(raw.as_bytes());
    let digest = hasher.finalize();
    digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Run manifest: enough to reproduce the run; not part of the byte-stable
/// CSV contract (it records wall time).
pub fn manifest(raw_config: &str, seeds: &[u64], wall_seconds: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "config_hash = {}", config_hash(raw_config));
    let _ = writeln!(
        out,
        "seeds = {}",
        seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(out, "tool_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "wall_seconds = {wall_seconds:.3}");
    out
}

pub fn sweep_csv(sweep: &LoadSweep) -> String {
    let mut out = String::from("lambda,seed,throughput,mean_latency,p99_latency\n");
    for p in &sweep.points {
        let _ = writeln!(
            out,
            "{:.6},{},{:.6},{:.4},{}",
            p.lambda, p.seed, p.throughput, p.mean_latency, p.p99_latency
        );
    }
    out
}

pub fn kernel_csv(rows: &[(String, LatencyProfile, StallReport)]) -> String {
    let mut out = String::from("kernel,profile,total_cycles,ipc,lsu,raw,icache,barrier\n");
    for (kernel, profile, report) in rows {
        let (_, lsu, raw, icache, barrier) = report.fractions();
        let _ = writeln!(
            out,
            "{kernel},{profile},{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            report.total_cycles, report.ipc, lsu, raw, icache, barrier
        );
    }
    out
}

pub fn pusch_csv(scenario: &PuschScenario) -> Result<String> {
    let r = pusch_transfer_model(scenario)?;
    let (out_kib, in_kib, total_kib, occ_kib) = r.kib_rows();
    let mut out = String::from(
        "clusters,antennas,subcarriers,beams,transfer_out_kib,transfer_in_kib,total_transfer_kib,max_l1_occupation_kib\n",
    );
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        scenario.n_clusters,
        scenario.n_antennas,
        scenario.n_subcarriers,
        scenario.n_beams,
        out_kib,
        in_kib,
        total_kib,
        occ_kib
    );
    Ok(out)
}

/// Text summary for the `topo` subcommand.
pub fn topo_text(cfg: &ClusterConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "cluster: {} cores, {} banks, {} KiB L1, profile {}",
        cfg.total_cores(),
        cfg.total_banks(),
        cfg.total_l1_bytes() / 1024,
        cfg.latency_profile
    );
    let _ = writeln!(
        out,
        "hierarchy: {} groups x {} subgroups x {} tiles x {} cores; K = {} remote ports",
        cfg.groups,
        cfg.subgroups_per_group,
        cfg.tiles_per_subgroup,
        cfg.cores_per_tile,
        cfg.remote_ports()
    );
    let _ = writeln!(out, "crossbars:");
    for e in crossbar_inventory(cfg) {
        let _ = writeln!(out, "  {:<16} {:>3} x {:<3} x{}", e.level.name(), e.rows, e.cols, e.count);
    }
    let _ = writeln!(out, "zero-load round-trip latency per class:");
    let counts = cfg.banks_per_class();
    for class in DestClass::ALL {
        let _ = writeln!(
            out,
            "  {:<16} {:>2} cycles  (P = {}/{})",
            class.name(),
            zero_load_latency(class, &cfg.latency_profile),
            counts[class.index()],
            cfg.total_banks()
        );
    }
    let _ = writeln!(
        out,
        "expected zero-load latency (uniform destinations): {:.4} cycles",
        expected_zero_load_latency(cfg)
    );
    out
}

/// Reference-vs-computed table, CSV flavour.
pub fn reference_report_csv(ops_per_mac: f64) -> Result<String> {
    let rows = reference_rows(ops_per_mac)?;
    let mut out = String::from("metric,reference,computed,match\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.metric,
            r.reference,
            r.computed,
            if r.matches { "yes" } else { "no" }
        );
    }
    Ok(out)
}

/// Reference-vs-computed table, Markdown flavour.
pub fn reference_report_md(ops_per_mac: f64) -> Result<String> {
    let rows = reference_rows(ops_per_mac)?;
    let mut out = String::from("| metric | reference | computed | match |\n|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            r.metric,
            r.reference,
            r.computed,
            if r.matches { "yes" } else { "no" }
        );
    }
    Ok(out)
}

pub struct ReportRow {
    pub metric: String,
    pub reference: String,
    pub computed: String,
    pub matches: bool,
}

fn reference_rows(ops_per_mac: f64) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();

    // Data-transfer table.
    let split = pusch_transfer_model(&PuschScenario::four_clusters())?;
    let shared = pusch_transfer_model(&PuschScenario::shared_cluster())?;
    let (so, si, st, socc) = split.kib_rows();
    let (_, hi, ht, hocc) = shared.kib_rows();
    for (name, reference, computed) in [
        ("transfer_out_1mib_clusters_kib", 205, so),
        ("transfer_in_1mib_clusters_kib", 213, si),
        ("total_transfer_1mib_clusters_kib", 418, st),
        ("l1_occupation_1mib_clusters_kib", 520, socc),
        ("transfer_in_4mib_cluster_kib", 8, hi),
        ("total_transfer_4mib_cluster_kib", 8, ht),
        ("l1_occupation_4mib_cluster_kib", 2055, hocc),
    ] {
        rows.push(ReportRow {
            metric: name.to_string(),
            reference: reference.to_string(),
            computed: computed.to_string(),
            matches: reference == computed,
        });
    }

    // Analytic zero-load latency against the reported one-decimal figures.
    for (profile, reference) in expected_table_row() {
        let cfg = ClusterConfig::with_profile(profile);
        let computed = expected_zero_load_latency(&cfg);
        rows.push(ReportRow {
            metric: format!("zero_load_latency_{profile}_cycles"),
            reference: format!("{reference:.1}"),
            computed: format!("{computed:.4}"),
            matches: (computed - reference).abs() <= 0.06,
        });
    }

    // Peak performance.
    let tera = ClusterConfig::default();
    for (freq_mhz, reference) in [(730.0, 1.50), (880.0, 1.80), (924.0, 1.89)] {
        let computed = round_tops(peak_performance(&tera, freq_mhz * 1e6, 2.0));
        rows.push(ReportRow {
            metric: format!("peak_tops_{freq_mhz:.0}mhz"),
            reference: format!("{reference:.2}"),
            computed: format!("{computed:.2}"),
            matches: computed == reference,
        });
    }
    let mp = round_tops(peak_performance(&ClusterConfig::mempool256(), 915e6, 2.0));
    rows.push(ReportRow {
        metric: "peak_tops_mempool256_915mhz".into(),
        reference: "0.47".into(),
        computed: format!("{mp:.2}"),
        matches: mp == 0.47,
    });

    // Workload requirement.
    let w64 = workload_requirement(64, 3276, 32, 14, 1e-3, ops_per_mac).required_ops_per_second;
    rows.push(ReportRow {
        metric: "required_tops_64_receivers".into(),
        reference: "0.8".into(),
        computed: format!("{:.3}", w64 / 1e12),
        matches: (w64 / 1e12 - 0.8).abs() <= 0.8 * 0.3,
    });
    let w128 = workload_requirement(128, 3276, 32, 14, 1e-3, ops_per_mac).required_ops_per_second;
    rows.push(ReportRow {
        metric: "required_tops_128_receivers".into(),
        reference: "1.8".into(),
        computed: format!("{:.3}", w128 / 1e12),
        matches: (w128 / 1e12 - 1.8).abs() <= 1.8 * 0.3,
    });

    // Peak efficiency cross-check on the measured cycle count.
    let gops_w = energy_efficiency(
        achieved_performance(2 * 512u64.pow(3), 298_239, 880e6),
        6.4,
    ) / 1e9;
    rows.push(ReportRow {
        metric: "matmul_gops_per_watt".into(),
        reference: "125".into(),
        computed: format!("{gops_w:.1}"),
        matches: (gops_w - 125.0).abs() <= 2.0,
    });

    // Request energy endpoints.
    let model = analytics::EnergyModel::default();
    let pj = model.per_class_pj(&LatencyProfile::P1_3_5_7);
    rows.push(ReportRow {
        metric: "cluster_request_pj".into(),
        reference: "13.5".into(),
        computed: format!("{:.1}", pj[DestClass::RemoteGroup.index()]),
        matches: (pj[DestClass::RemoteGroup.index()] - 13.5).abs() < 1e-9,
    });
    Ok(rows)
}

// --- SVG charts -----------------------------------------------------------

const CHART_W: f64 = 640.0;
const CHART_H: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Self-contained SVG line chart; no external tooling involved.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let ys: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).collect();
    let (x_lo, x_hi) = bounds(&xs);
    let (y_lo, y_hi) = bounds(&ys);
    let plot_w = CHART_W - MARGIN_L - MARGIN_R;
    let plot_h = CHART_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo).max(1e-12) * plot_w;
    let sy = |y: f64| MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo).max(1e-12) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CHART_W}\" height=\"{CHART_H}\" viewBox=\"0 0 {CHART_W} {CHART_H}\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{title}</text>",
        CHART_W / 2.0
    );
    // Axes and grid.
    for t in nice_ticks(x_lo, x_hi, 5) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.1}\" y1=\"{}\" x2=\"{x:.1}\" y2=\"{}\" stroke=\"#ddd\"/>",
            MARGIN_T,
            MARGIN_T + plot_h
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.1}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{t:.3}</text>",
            MARGIN_T + plot_h + 18.0
        );
    }
    for t in nice_ticks(y_lo, y_hi, 5) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>",
            MARGIN_L,
            MARGIN_L + plot_w
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{t:.3}</text>",
            MARGIN_L - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{x_label}</text>",
        MARGIN_L + plot_w / 2.0,
        CHART_H - 14.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{y_label}</text>",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    );
    // Series.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> =
            s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>",
            pts.join(" ")
        );
        let ly = MARGIN_T + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{ly:.1}\" x2=\"{}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            MARGIN_L + plot_w - 130.0,
            MARGIN_L + plot_w - 105.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            MARGIN_L + plot_w - 100.0,
            ly + 4.0,
            s.name
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(vals: &[f64]) -> (f64, f64) {
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        (lo.min(0.0_f64.max(lo)), hi)
    } else {
        (0.0, 1.0)
    }
}

/// Stacked per-run fractions of instructions and stall classes, mirroring
/// the kernel stall figure.
pub fn stall_stack_svg(rows: &[(String, LatencyProfile, StallReport)]) -> String {
    let labels = ["instructions", "lsu", "raw/unit", "icache", "barrier"];
    let colors = ["#4c78a8", "#e45756", "#f58518", "#72b7b2", "#54a24b"];
    let n = rows.len().max(1);
    let plot_w = CHART_W - MARGIN_L - MARGIN_R;
    let plot_h = CHART_H - MARGIN_T - MARGIN_B;
    let band = plot_w / n as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CHART_W}\" height=\"{CHART_H}\" viewBox=\"0 0 {CHART_W} {CHART_H}\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">cycle breakdown</text>",
        CHART_W / 2.0
    );
    for (i, (kernel, profile, report)) in rows.iter().enumerate() {
        let (instr, lsu, raw, icache, barrier) = report.fractions();
        let parts = [instr, lsu, raw, icache, barrier];
        let x = MARGIN_L + band * i as f64 + band * 0.15;
        let w = band * 0.7;
        let mut y = MARGIN_T + plot_h;
        for (p, color) in parts.iter().zip(colors) {
            let h = p * plot_h;
            y -= h;
            let _ = writeln!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" fill=\"{color}\"/>"
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{kernel} {profile}</text>",
            x + w / 2.0,
            MARGIN_T + plot_h + 16.0
        );
    }
    for (i, (label, color)) in labels.iter().zip(colors).enumerate() {
        let ly = MARGIN_T + 10.0 + 15.0 * i as f64;
        let _ = writeln!(
            svg,
            "<rect x=\"{}\" y=\"{:.1}\" width=\"12\" height=\"10\" fill=\"{color}\"/>",
            CHART_W - 120.0,
            ly - 9.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{ly:.1}\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>",
            CHART_W - 102.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
