mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use starsim::calibrate::{calibrate, CalibrationGrid, CalibrationTargets};
use starsim::experiments::{
    latency_grid, latency_reduction, lifetimes, retry_grid, retry_probe, retry_reduction, state_distribution,
    weak_patterns, write_latency_csv, write_lifetimes_csv, write_retry_csv, LatencyConfig, PopulationConfig,
};
use starsim::pipeline::{simulate_pipeline, write_reports_csv, DatapathConfig};
use starsim::ssd::{run_trace_at, Condition, Op, SweepConfig, Trace, WorkloadSpec};
use starsim::{CellType, Mode, Result};

use config::ExperimentConfig;
use output::Output;

#[derive(Parser, Debug)]
#[command(name = "starsim", version, about = "State-aware NAND randomizer experiments")]
struct Cli {
    /// JSON experiment config; flags take precedence.
    #[arg(long, global = true, env = "STARSIM_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "STARSIM_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "STARSIM_OUT")]
    out: Option<PathBuf>,
    /// Compare only this mode against baseline.
    #[arg(long, global = true, env = "STARSIM_MODE")]
    mode: Option<Mode>,
    #[arg(long, global = true, env = "STARSIM_CELL")]
    cell: Option<CellType>,
    /// Error profile JSON; defaults to the shipped profile for the cell type.
    #[arg(long, global = true, env = "STARSIM_PROFILE")]
    profile: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-state cell populations under each randomizer.
    StateDist,
    /// Occurrences of the most shift-prone vertical patterns.
    WeakPatterns,
    /// PEC at which the worst codeword exceeds the ECC limit.
    Lifetime {
        #[arg(long)]
        step_pec: Option<u32>,
        #[arg(long)]
        max_pec: Option<u32>,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Mean read latency on the synthetic server workloads.
    Latency {
        #[arg(long = "workload")]
        workloads: Vec<String>,
        #[arg(long)]
        duration_s: Option<f64>,
    },
    /// Mean read retries per page over wear and retention.
    Retry {
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Added latency and throughput of the randomizer datapath.
    Pipeline {
        #[arg(long)]
        groups: Option<u64>,
    },
    /// Fit a profile to asymmetry, retention-share and pattern targets.
    Calibrate {
        #[arg(long)]
        targets: Option<PathBuf>,
    },
    /// Replay a `timestamp_us,op,lba,size_bytes` trace.
    Replay {
        trace: PathBuf,
        #[arg(long)]
        pec: Option<u32>,
        #[arg(long)]
        months: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::StateDist => "state-dist",
            Command::WeakPatterns => "weak-patterns",
            Command::Lifetime { .. } => "lifetime",
            Command::Latency { .. } => "latency",
            Command::Retry { .. } => "retry",
            Command::Pipeline { .. } => "pipeline",
            Command::Calibrate { .. } => "calibrate",
            Command::Replay { .. } => "replay",
        }
    }
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if cli.mode.is_some() {
        cfg.mode = cli.mode;
    }
    if cli.cell.is_some() {
        cfg.cell = cli.cell;
    }
    if cli.profile.is_some() {
        cfg.profile = cli.profile.clone();
    }
    match &cli.command {
        Command::Lifetime { step_pec, max_pec, replicas } => {
            cfg.step_pec = step_pec.or(cfg.step_pec);
            cfg.max_pec = max_pec.or(cfg.max_pec);
            cfg.replicas = replicas.or(cfg.replicas);
        }
        Command::Latency { workloads, duration_s } => {
            if !workloads.is_empty() {
                cfg.workloads = Some(workloads.clone());
            }
            cfg.duration_s = duration_s.or(cfg.duration_s);
        }
        Command::Retry { replicas } => cfg.replicas = replicas.or(cfg.replicas),
        Command::Pipeline { groups } => cfg.groups = groups.or(cfg.groups),
        Command::Calibrate { targets: Some(path) } => {
            cfg.targets = Some(serde_json::from_str(&std::fs::read_to_string(path)?)?);
        }
        Command::Replay { pec, months, .. } if (pec.is_some() || months.is_some()) => {
            cfg.conditions = Some(vec![Condition::new(pec.unwrap_or(0), months.unwrap_or(0.0))]);
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_conditions(cell: CellType, command: &Command) -> Vec<Condition> {
    let pecs: &[u32] = match cell {
        CellType::Qlc => &[0, 500, 1000, 1500],
        CellType::Tlc => &[0, 1000, 2000, 3000],
    };
    match command {
        Command::Retry { .. } => {
            pecs.iter().flat_map(|&p| [0.0, 1.0, 3.0, 6.0, 12.0].map(|t| Condition::new(p, t))).collect()
        }
        Command::Latency { .. } => match cell {
            CellType::Qlc => vec![Condition::new(500, 6.0), Condition::new(1000, 12.0)],
            CellType::Tlc => vec![Condition::new(1000, 6.0), Condition::new(2000, 12.0)],
        },
        _ => vec![Condition::new(0, 0.0)],
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = effective_config(cli)?;
    let out = Output::new(
        cfg.out.as_deref().unwrap_or(std::path::Path::new(".")),
        cli.command.name(),
        &cfg.canonical_json(),
    )?;
    let seed = cfg.seed();
    let modes = cfg.modes();
    match &cli.command {
        Command::StateDist => {
            let profile = cfg.profile()?;
            let pop = PopulationConfig { geometry: cfg.geometry(PopulationConfig::default().geometry), seed };
            let d = state_distribution(&profile, &modes, &pop)?;
            let path = out.csv("state_dist.csv", |w| d.write_csv(w))?;
            for &m in &d.modes[1..] {
                let r = d.reductions(m)?;
                let (worst, _) =
                    profile.e.iter().enumerate().fold((0, 0.0), |a, (k, &e)| if e > a.1 { (k, e) } else { a });
                println!("{m}: most error-prone state P{worst} population {:+.1}% vs baseline", -100.0 * r[worst]);
            }
            println!("wrote {}", path.display());
        }
        Command::WeakPatterns => {
            let profile = cfg.profile()?;
            let pop = PopulationConfig { geometry: cfg.geometry(PopulationConfig::default().geometry), seed };
            let w = weak_patterns(&profile, &modes, &pop)?;
            let path = out.csv("weak_patterns.csv", |f| w.write_csv(f))?;
            for &m in &w.modes[1..] {
                println!(
                    "{m}: top-10 mean reduction {:.1}%, {} reduction {:.1}%",
                    100.0 * w.top_mean_reduction(m)?,
                    w.headline.label(),
                    100.0 * w.headline_reduction(m)?
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Lifetime { .. } => {
            let profile = cfg.profile()?;
            let ssd = cfg.ssd()?;
            let default_step = if ssd.cell == CellType::Qlc { 25 } else { 100 };
            let mut sweep = SweepConfig::default_for(ssd.cell, cfg.step_pec.unwrap_or(default_step));
            if let Some(m) = cfg.max_pec {
                sweep.max_pec = m;
            }
            if let Some(r) = cfg.replicas {
                sweep.probe.replicas = r;
            }
            sweep.probe.geometry = cfg.geometry(sweep.probe.geometry);
            sweep.probe.seed = seed;
            let reps = lifetimes(&ssd, &profile, &modes, &sweep)?;
            let path = out.csv("lifetime.csv", |w| write_lifetimes_csv(&reps, w))?;
            for r in &reps {
                println!("{}: lifetime {} PEC ({:.2}x baseline)", r.mode, r.lifetime_pec, r.ratio_to(&reps[0]));
            }
            println!("wrote {}", path.display());
        }
        Command::Latency { .. } => {
            let profile = cfg.profile()?;
            let ssd = cfg.ssd()?;
            let workloads = match &cfg.workloads {
                Some(names) => names.iter().map(|n| WorkloadSpec::by_name(n)).collect::<Result<Vec<_>>>()?,
                None => WorkloadSpec::server_mix(),
            };
            let conditions = cfg.conditions.clone().unwrap_or_else(|| default_conditions(ssd.cell, &cli.command));
            let mut lc = LatencyConfig::default_for(&ssd);
            lc.seed = seed;
            lc.probe.seed = seed;
            lc.probe.geometry = cfg.geometry(lc.probe.geometry);
            if let Some(d) = cfg.duration_s {
                lc.duration_s = d;
            }
            if let Some(r) = cfg.replicas {
                lc.probe.replicas = r;
            }
            let rows = latency_grid(&ssd, &profile, &modes, &workloads, &conditions, &lc)?;
            let path = out.csv("latency.csv", |w| write_latency_csv(&rows, w))?;
            for w in &workloads {
                for &c in &conditions {
                    for r in rows.iter().filter(|r| {
                        r.workload == w.name
                            && r.pec == c.pec
                            && r.retention_months == c.retention_months
                            && r.mode != Mode::Baseline
                    }) {
                        let red = latency_reduction(&rows, &w.name, r.mode, c).unwrap_or(f64::NAN);
                        println!(
                            "{} {} @ {} PEC/{} mo: read latency -{:.1}%",
                            w.name,
                            r.mode,
                            c.pec,
                            c.retention_months,
                            100.0 * red
                        );
                    }
                }
            }
            println!("wrote {}", path.display());
        }
        Command::Retry { .. } => {
            let profile = cfg.profile()?;
            let ssd = cfg.ssd()?;
            let conditions = cfg.conditions.clone().unwrap_or_else(|| default_conditions(ssd.cell, &cli.command));
            let mut probe = retry_probe(&ssd, cfg.replicas.unwrap_or(8), seed);
            probe.geometry = cfg.geometry(probe.geometry);
            let pts = retry_grid(&ssd, &profile, &modes, &conditions, &probe)?;
            let path = out.csv("retry.csv", |w| write_retry_csv(&pts, w))?;
            for p in pts.iter().filter(|p| p.mode != Mode::Baseline && p.retention_months == 12.0) {
                let red = retry_reduction(&pts, p.mode, Condition::new(p.pec, 12.0)).unwrap_or(f64::NAN);
                println!(
                    "{} @ {} PEC/12 mo: {:.2} retries/read ({:.1}% fewer)",
                    p.mode,
                    p.pec,
                    p.mean_retries,
                    100.0 * red
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Pipeline { .. } => {
            let configs = cfg
                .datapaths
                .clone()
                .unwrap_or_else(|| vec![DatapathConfig::standard(32), DatapathConfig::standard(64)]);
            let groups = cfg.groups.unwrap_or(1024);
            let rows = configs
                .iter()
                .map(|c| Ok((format!("io{}", c.io_width_bits), simulate_pipeline(c, groups)?)))
                .collect::<Result<Vec<_>>>()?;
            let path = out.csv("pipeline.csv", |w| write_reports_csv(&rows, w))?;
            for (id, r) in &rows {
                println!(
                    "{id}: initial latency {} ns, {} bits/cycle sustained, {} stall cycles/group, bottleneck {}",
                    r.initial_latency_ns,
                    r.sustained_throughput_bits_per_cycle,
                    r.stall_cycles_per_group,
                    r.bottleneck_stage
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Calibrate { .. } => {
            let targets = match &cfg.targets {
                Some(t) => t.clone(),
                None => CalibrationTargets::uniform(cfg.cell()?, 0.01),
            };
            let c = calibrate(&targets, &CalibrationGrid::default())?;
            let profile_path = out.text("profile.json", &(c.profile.to_json()? + "\n"))?;
            let res_path = out.csv("calibration_residuals.csv", |w| c.write_residuals_csv(w))?;
            for r in c.flagged(0.05) {
                println!("flagged: {} target {} achieved {:.4}", r.target, r.value, r.achieved);
            }
            println!("beta {} gamma {} kappa {}", c.profile.beta, c.profile.gamma, c.profile.kappa);
            println!("wrote {} and {}", profile_path.display(), res_path.display());
        }
        Command::Replay { trace, .. } => {
            let profile = cfg.profile()?;
            let mode = cfg.mode.unwrap_or(Mode::Star);
            let ssd = cfg.ssd()?.with_mode(mode);
            let t = Trace::read_csv(std::fs::File::open(trace)?)?;
            let c = cfg.conditions.as_ref().and_then(|c| c.first().copied()).unwrap_or(Condition::new(0, 0.0));
            let mut probe = retry_probe(&ssd, cfg.replicas.unwrap_or(8), seed);
            probe.geometry = cfg.geometry(probe.geometry);
            let rep = run_trace_at(&ssd, &profile, &t, c, &probe, seed)?;
            let path = out.csv("replay.csv", |w| rep.write_requests_csv(w))?;
            println!(
                "{mode}: {} requests, mean read {:.1} us (p99 {:.1}), mean write {:.1} us, {} GC runs",
                rep.requests.len(),
                rep.mean_read_us(),
                rep.percentile_us(Op::Read, 99.0),
                rep.mean_us(Op::Write),
                rep.gc.runs
            );
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
