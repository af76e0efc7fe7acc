//! `orthofield`: run verification suites, simulations and table dumps from a
//! JSON configuration.
//!
//! Exit codes: 0 when every suite passes, 1 when a suite fails, 2 on a
//! configuration or usage error.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand};
use orthofield_core::dynamics::{replica_rng, simulate};
use orthofield_core::model::nu_sample;
use orthofield_core::verify::SCHEMA_VERSION;
use orthofield_core::{run_suite, Context, DualConfig, Occupancy, RunConfig, SuiteName};

use output::{ConventionRecord, OutputRecord};

#[derive(Parser, Debug)]
#[command(
    name = "orthofield",
    version,
    about = "Orthogonal duality and higher-order fluctuation field checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides the configured one.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Output directory; overrides the configured one.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the exact identity suites.
    Check,
    /// Simulate one trajectory and write its event list as CSV.
    Simulate {
        /// Initial occupancy, one comma-separated count per site. Defaults to a draw from the invariant measure.
        #[arg(long, conflicts_with = "dual")]
        eta: Option<String>,
        /// Simulate the dual process from particles at these comma-separated sites.
        #[arg(long)]
        dual: Option<String>,
        /// Macroscopic horizon; defaults to the configured T.
        #[arg(long)]
        horizon: Option<f64>,
        /// Factor on the microscopic rates; defaults to n^2.
        #[arg(long)]
        time_scale: Option<f64>,
    },
    /// Run one suite.
    Experiment {
        /// Suite name; defaults to `experiment.suite` in the configuration.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Write the table of duality polynomials as CSV.
    DumpTable {
        /// Highest degree.
        #[arg(long, default_value_t = 4)]
        m_max: usize,
    },
    /// Print the selected sign convention.
    ResolveConvention,
}

enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Some(w) = cli.workers {
        if w == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Check => run_suites(cfg, "check", &SuiteName::CHECK),
        Command::Experiment { suite } => {
            let name = match suite {
                Some(s) => SuiteName::from_str(&s)?,
                None => cfg
                    .experiment
                    .suite
                    .context("no suite given: pass --suite or set experiment.suite")?,
            };
            run_suites(cfg, "experiment", &[name])
        }
        Command::Simulate {
            eta,
            dual,
            horizon,
            time_scale,
        } => cmd_simulate(cfg, eta, dual, horizon, time_scale),
        Command::DumpTable { m_max } => cmd_dump_table(cfg, m_max),
        Command::ResolveConvention => cmd_resolve_convention(cfg),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().context("--config PATH is required")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = RunConfig::from_json(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run_suites(cfg: RunConfig, command: &str, suites: &[SuiteName]) -> Result<Outcome> {
    let ctx = Context::new(cfg)?;
    let out = ctx.config.output_dir.clone();
    let mut record = OutputRecord::new(command, &ctx);
    for &suite in suites {
        let start = Instant::now();
        let report = run_suite(&ctx, suite).with_context(|| format!("suite {suite}"))?;
        let seconds = start.elapsed().as_secs_f64();
        report
            .write(&out.join(suite.as_str()))
            .with_context(|| format!("writing the {suite} report"))?;
        println!("{suite}: {} ({seconds:.2} s)", report.verdict);
        for c in report.failed_checks() {
            println!(
                "  {}: {} (value {:e}, threshold {:e})",
                c.name, c.detail, c.value, c.threshold
            );
        }
        record.push(&report, seconds);
    }
    write(&out.join("report.json"), &(record.to_json() + "\n"))?;
    println!("{}: {} -> {}", command, record.verdict, out.display());
    Ok(if record.verdict.passed() {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

fn parse_list(text: &str) -> Result<Vec<u32>> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u32>()
                .with_context(|| format!("`{s}` is not a non-negative integer"))
        })
        .collect()
}

fn cmd_simulate(
    cfg: RunConfig,
    eta: Option<String>,
    dual: Option<String>,
    horizon: Option<f64>,
    time_scale: Option<f64>,
) -> Result<Outcome> {
    let spec = cfg.model.spec()?;
    let geom = cfg.model.geometry()?;
    let v = geom.volume();
    let horizon = horizon.unwrap_or(cfg.experiment.horizon);
    let time_scale = time_scale.unwrap_or((cfg.model.side * cfg.model.side) as f64);
    if !(horizon > 0.0) || !(time_scale > 0.0) {
        bail!("horizon and time scale must be positive");
    }
    let mut rng = replica_rng(cfg.seed, 0);
    let eta0: Occupancy = match (eta, dual) {
        (Some(text), _) => {
            let eta = parse_list(&text)?;
            if eta.len() != v {
                bail!("--eta has {} entries but the torus has {v} sites", eta.len());
            }
            eta
        }
        (None, Some(text)) => {
            let sites: Vec<usize> = parse_list(&text)?.into_iter().map(|s| s as usize).collect();
            if let Some(s) = sites.iter().find(|&&s| s >= v) {
                bail!("--dual site {s} is outside the torus of {v} sites");
            }
            DualConfig::from_sites(&sites).to_dense(v)
        }
        (None, None) => nu_sample(&spec, v, &mut rng),
    };
    if let (Some(cap), Some(x)) = (spec.site_cap(), eta0.iter().position(|&c| Some(c) > spec.site_cap())) {
        bail!("site {x} holds {} particles but the site cap is {cap}", eta0[x]);
    }
    let traj = simulate(&spec, &geom, eta0, horizon, time_scale, &mut rng);
    let out = &cfg.output_dir;
    let mut initial = String::from("site,count\n");
    for (x, c) in traj.initial.iter().enumerate() {
        initial.push_str(&format!("{x},{c}\n"));
    }
    write(&out.join("initial.csv"), &initial)?;
    write(&out.join("trajectory.csv"), &traj.to_csv())?;
    println!(
        "seed {}: {} events up to T = {horizon} (time scale {time_scale}) -> {}",
        cfg.seed,
        traj.events.len(),
        out.display()
    );
    Ok(Outcome::Pass)
}

fn cmd_dump_table(cfg: RunConfig, m_max: usize) -> Result<Outcome> {
    let ctx = Context::new(cfg)?;
    let table = ctx.table(m_max)?;
    let out = &ctx.config.output_dir;
    write(&out.join("table.csv"), &table.to_csv())?;
    let meta = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "table": table.metadata(),
        "convention": ConventionRecord::from_context(&ctx),
    });
    write(&out.join("table.json"), &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    print!("{}", table.to_csv());
    Ok(Outcome::Pass)
}

fn cmd_resolve_convention(cfg: RunConfig) -> Result<Outcome> {
    let ctx = Context::new(cfg)?;
    let record = ConventionRecord::from_context(&ctx);
    let how = if record.overridden.is_some() {
        "overridden"
    } else {
        "resolved"
    };
    println!(
        "{}: sign_e = {:+}, sign_h = {:+} ({how}, {:?})",
        ctx.spec.family.short_name(),
        record.sign_e,
        record.sign_h,
        record.origin
    );
    if let Some(r) = &record.resolution {
        println!(
            "c = {} (printed {}, measured {})",
            r.c_conv, r.c_printed, r.c_measured_d
        );
        for c in &r.candidates {
            println!(
                "  {}: mean_zero={} orthogonal={} max_residual={} -> {}",
                c.label,
                c.mean_zero,
                c.orthogonal,
                c.max_duality_residual
                    .map_or("not evaluated".into(), |r| format!("{r:e}")),
                if c.passed { "PASS" } else { "FAIL" }
            );
        }
    }
    let out = &ctx.config.output_dir;
    write(
        &out.join("convention.json"),
        &(serde_json::to_string_pretty(&record)? + "\n"),
    )?;
    Ok(Outcome::Pass)
}
