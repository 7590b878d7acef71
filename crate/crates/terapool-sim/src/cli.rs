//! Command-line front end: configuration ingestion, experiment dispatch
//! and result emission.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::analytics::pusch_transfer_model;
use crate::config::{parse_config, Experiment, ExperimentConfig};
use crate::error::{Result, SimError};
use crate::kernels::{simulate_kernel, StallReport};
use crate::parallel::{par_map, with_threads};
use crate::report::{
    self, kernel_csv, line_chart_svg, manifest, pusch_csv, reference_report_csv,
    reference_report_md, stall_stack_svg, sweep_csv, ResultBundle, Series,
};
use crate::topology::LatencyProfile;
use crate::traffic::{run_load_sweep, SweepSpec};

#[derive(Parser, Debug)]
#[command(
    name = "terapool-sim",
    version,
    about = "Cycle-stepped simulator and analytical toolkit for hierarchical shared-L1 clusters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Experiment configuration file (flat key = value).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for the result bundle.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed override; repeatable.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// Worker threads for independent experiment points
    /// (overridden by TERAPOOL_SIM_THREADS).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the crossbar inventory and analytic latencies.
    Topo(CommonArgs),
    /// Run a Poisson load sweep and write latency/throughput curves.
    Sweep(CommonArgs),
    /// Map and simulate a kernel across latency profiles.
    Kernel(CommonArgs),
    /// Evaluate the uplink data-transfer model.
    Pusch(CommonArgs),
    /// Emit the reference-vs-computed report table.
    Report(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Topo(a)
            | Command::Sweep(a)
            | Command::Kernel(a)
            | Command::Pusch(a)
            | Command::Report(a) => a,
        }
    }
}

pub fn main_with_args(cli: Cli) -> Result<()> {
    let args = cli.command.common().clone();
    let cfg = parse_config(&args.config)?;
    let threads = std::env::var("TERAPOOL_SIM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(args.threads);
    with_threads(threads, || run(&cli.command, &args, &cfg))
}

fn run(command: &Command, args: &CommonArgs, cfg: &ExperimentConfig) -> Result<()> {
    let started = Instant::now();
    match command {
        Command::Topo(_) => {
            print!("{}", report::topo_text(&cfg.cluster));
            Ok(())
        }
        Command::Sweep(_) => {
            let Experiment::Sweep(settings) = &cfg.experiment else {
                return Err(SimError::ConfigError("config has no sweep section".into()));
            };
            let mut settings = settings.clone();
            if !args.seeds.is_empty() {
                settings.seeds = args.seeds.clone();
            }
            let spec = SweepSpec {
                lambdas: SweepSpec::grid(settings.lambda_min, settings.lambda_max, settings.step, vec![])
                    .lambdas,
                seeds: settings.seeds.clone(),
                duration: settings.duration,
                warmup: settings.warmup,
            };
            let sweep = run_load_sweep(&cfg.cluster, &spec)?;
            let mut bundle = ResultBundle::new(&args.out);
            bundle.write("sweep.csv", &sweep_csv(&sweep))?;
            let thr = Series {
                name: format!("{}", cfg.cluster.latency_profile),
                points: sweep.curve.iter().map(|p| (p.lambda, p.throughput)).collect(),
            };
            let lat = Series {
                name: format!("{}", cfg.cluster.latency_profile),
                points: sweep.curve.iter().map(|p| (p.lambda, p.mean_latency)).collect(),
            };
            bundle.write(
                "sweep_throughput.svg",
                &line_chart_svg("accepted throughput", "offered load (req/core/cycle)", "accepted (req/core/cycle)", &[thr]),
            )?;
            bundle.write(
                "sweep_latency.svg",
                &line_chart_svg("round-trip latency", "offered load (req/core/cycle)", "mean latency (cycles)", &[lat]),
            )?;
            finish_bundle(&mut bundle, cfg, &settings.seeds, started)?;
            if let Some(sat) = &sweep.saturation {
                println!(
                    "saturation: {:.4} req/core/cycle, knee at lambda {:.3} with {:.2} cycles",
                    sat.throughput, sat.knee_lambda, sat.knee_latency
                );
            } else {
                println!("saturation: not reached on this lambda grid");
            }
            println!("wrote {}", bundle.dir.display());
            Ok(())
        }
        Command::Kernel(_) => {
            let Experiment::Kernel(settings) = &cfg.experiment else {
                return Err(SimError::ConfigError("config has no kernel section".into()));
            };
            let seed = args.seeds.first().copied().unwrap_or(0);
            let jobs: Vec<LatencyProfile> = settings.profiles.clone();
            let spec = settings.spec;
            let sim_cfg = settings.sim;
            let base = cfg.cluster.clone();
            let results = par_map(jobs.clone(), move |profile| {
                let cluster = crate::topology::ClusterConfig { latency_profile: profile, ..base.clone() };
                let run_cfg = spec.run_cfg(&cluster);
                spec.map(&cluster).and_then(|traces| simulate_kernel(traces, &run_cfg, &sim_cfg, seed))
            });
            let mut rows: Vec<(String, LatencyProfile, StallReport)> = Vec::new();
            for (profile, result) in jobs.into_iter().zip(results) {
                rows.push((spec.kind().name().to_string(), profile, result?));
            }
            let mut bundle = ResultBundle::new(&args.out);
            bundle.write("kernel.csv", &kernel_csv(&rows))?;
            bundle.write("kernel_stalls.svg", &stall_stack_svg(&rows))?;
            finish_bundle(&mut bundle, cfg, &[seed], started)?;
            for (kernel, profile, report) in &rows {
                println!(
                    "{kernel} {} on {profile}: {} cycles, IPC {:.3}",
                    spec.dims, report.total_cycles, report.ipc
                );
            }
            println!("wrote {}", bundle.dir.display());
            Ok(())
        }
        Command::Pusch(_) => {
            let Experiment::Pusch(scenario) = &cfg.experiment else {
                return Err(SimError::ConfigError("config has no pusch section".into()));
            };
            let r = pusch_transfer_model(scenario)?;
            let (out_kib, in_kib, total_kib, occ_kib) = r.kib_rows();
            let mut bundle = ResultBundle::new(&args.out);
            bundle.write("pusch.csv", &pusch_csv(scenario)?)?;
            finish_bundle(&mut bundle, cfg, &[], started)?;
            println!(
                "transfer out {out_kib} KiB, in {in_kib} KiB, total {total_kib} KiB; peak L1 occupation {occ_kib} KiB"
            );
            println!("wrote {}", bundle.dir.display());
            Ok(())
        }
        Command::Report(_) => {
            let Experiment::Report(settings) = &cfg.experiment else {
                return Err(SimError::ConfigError("config has no report section".into()));
            };
            let mut bundle = ResultBundle::new(&args.out);
            bundle.write("report.csv", &reference_report_csv(settings.ops_per_mac)?)?;
            let md = reference_report_md(settings.ops_per_mac)?;
            bundle.write("report.md", &md)?;
            finish_bundle(&mut bundle, cfg, &[], started)?;
            print!("{md}");
            println!("wrote {}", bundle.dir.display());
            Ok(())
        }
    }
}

fn finish_bundle(
    bundle: &mut ResultBundle,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    started: Instant,
) -> Result<()> {
    bundle.config_hash = report::config_hash(&cfg.raw);
    bundle.write("config.txt", &cfg.raw)?;
    let m = manifest(&cfg.raw, seeds, started.elapsed().as_secs_f64());
    bundle.write("manifest.txt", &m)?;
    Ok(())
}
