use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sagmec::bcd::Variant;
use sagmec::constants::PresetName;
use sagmec::error::{Error, Result};
use sagmec::harness::{self, SweepParam, SweepSpec};
use sagmec::par::{self, Exec};
use sagmec::scenario::SimConfig;

#[derive(Parser)]
#[command(name = "sagmec", version, about = "Energy-minimising offloading, band assignment, power control and UAV placement")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON instance configuration; preset defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured preset.
    #[arg(long)]
    preset: Option<PresetName>,
    /// Output directory.
    #[arg(long, env = "SAGMEC_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// One end-to-end run.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "proposed")]
        variant: Variant,
    },
    /// Cartesian sweep over values, seeds and variants.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// devices, uavs, data_size (Mbit) or deadline (ms).
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of consecutive seeds.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, value_delimiter = ',', default_value = "proposed,no-collab,all-local")]
        variant: Vec<Variant>,
    },
    /// Proposed scheme against exhaustive band assignment and routing.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: u64,
    },
    /// Parses and checks a configuration without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(common: &Common, fallback: SimConfig) -> Result<SimConfig> {
    let mut c = match &common.config {
        Some(p) => SimConfig::load(p)?,
        None => fallback,
    };
    if let Some(p) = common.preset {
        c.preset = p;
    }
    c.validate()?;
    Ok(c)
}

fn exec(jobs: usize) -> Exec {
    Exec::from_jobs(jobs.max(1))
}

/// Returns whether every run was feasible.
fn dispatch(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Run { common, seed, variant } => {
            let mut c = load(&common, SimConfig::default())?;
            if let Some(s) = seed {
                c.seed = s;
            }
            let o = harness::run_to_dir(&c, variant, &common.out)?;
            let r = &o.record;
            println!(
                "{} seed {}: Q = {:.6e} J, offload {:.3}, {} outer iterations, feasible {}",
                r.variant, r.seed, r.total_energy_j, r.offload_fraction, r.outer_iters, r.feasible
            );
            Ok(r.feasible)
        }
        Cmd::Sweep { common, param, values, seed, seeds, variant } => {
            let c = load(&common, SimConfig::default())?;
            let spec = SweepSpec { param, values, seeds: (seed..seed + seeds).collect(), variants: variant };
            let jobs = common.jobs;
            let out = common.out.clone();
            let rows = par::with_jobs(jobs, || harness::sweep_to_dir(&c, &spec, exec(jobs), &out))?;
            for s in harness::summarize(&rows) {
                println!(
                    "{param}={} {:<10} Q = {:.4e} +/- {:.1e}  offload {:.3}",
                    s.value, s.variant, s.stats[0].0, s.stats[0].1, s.stats[3].0
                );
            }
            println!("{} runs written to {}", rows.len(), out.display());
            Ok(rows.iter().all(|r| r.record.feasible))
        }
        Cmd::Oracle { common, seed, instances } => {
            let c = load(&common, harness::oracle_config())?;
            let seeds: Vec<u64> = (seed..seed + instances).collect();
            let jobs = common.jobs;
            let rep = par::with_jobs(jobs, || harness::oracle_to_dir(&c, &seeds, exec(jobs), &common.out))?;
            println!(
                "{} instances: band gap median {:.3e} max {:.3e}; route gap median {:.3e} p90 {:.3e}; within 5%: {:.0}%",
                rep.instances,
                rep.band_gap_median,
                rep.band_gap_max,
                rep.route_gap_median,
                rep.route_gap_p90,
                100.0 * rep.route_within_5pct
            );
            Ok(true)
        }
        Cmd::ValidateConfig { config } => {
            let c = SimConfig::load(&config)?;
            sagmec::scenario::generate(&c)?;
            println!("{}: ok", config.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: at least one run is infeasible");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Infeasible(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
