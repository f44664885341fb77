use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crch_core::clusterrep::ClusterConfig;
use crch_core::experiment::{
    compare, comparison_table, load_workflow, run, write_reports, Algorithm, ExperimentConfig, LambdaChoice,
    WorkflowSource,
};
use crch_core::ingest::{emit_native, Family, GeneratorConfig};
use crch_core::scheduler::overprovision;

#[derive(Parser)]
#[command(name = "crch", version, about = "Replication and checkpointing experiments on simulated unreliable VM pools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every algorithm in every environment and emit per-run rows.
    Run(RunArgs),
    /// Run, then print usage and wastage relative to HEFT and CRCH.
    Compare(RunArgs),
    /// Write a synthetic workflow as a native JSON document.
    Generate(SourceArgs),
    /// Print the static schedule of one algorithm as CSV.
    Schedule {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value = "heft")]
        alg: String,
        #[command(flatten)]
        cluster: ClusterArgs,
    },
}

#[derive(Args, Clone)]
struct SourceArgs {
    /// Native JSON or DAX workflow file.
    #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
    workflow: Option<PathBuf>,
    /// Synthetic workflow as FAMILY:SIZE, e.g. layered-random:100.
    #[arg(long)]
    generate: Option<String>,
    #[arg(long, default_value_t = 20)]
    vms: usize,
    #[arg(long, default_value_t = 4)]
    reliable: usize,
    /// Base seed; `CRCH_SEED` takes precedence when set.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Clone)]
struct ClusterArgs {
    /// Cumulative explained-variance threshold for PCA.
    #[arg(long, default_value_t = 0.3)]
    cov: f64,
    /// Largest replication count CRCH may assign.
    #[arg(long = "max-rep", default_value_t = 3)]
    max_rep: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_delimiter = ',', default_value = "stable,normal,unstable")]
    env: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "heft,crch,replicate-all:3")]
    alg: Vec<String>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Checkpoint interval in minutes, or `auto`.
    #[arg(long, default_value = "auto")]
    lambda: String,
    /// Checkpoint overhead in minutes.
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[command(flatten)]
    cluster: ClusterArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Summary,
}

impl SourceArgs {
    fn apply_seed_override(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var("CRCH_SEED") {
            self.seed = v.trim().parse().with_context(|| format!("bad CRCH_SEED `{v}`"))?;
        }
        Ok(())
    }

    fn source(&self) -> Result<WorkflowSource> {
        if let Some(path) = &self.workflow {
            return Ok(WorkflowSource::File(path.clone()));
        }
        let spec = self.generate.as_deref().ok_or_else(|| anyhow!("--workflow or --generate is required"))?;
        let (family, size) = spec
            .rsplit_once(':')
            .ok_or_else(|| anyhow!("--generate expects FAMILY:SIZE, got `{spec}`"))?;
        let family: Family = family.parse()?;
        let size: usize = size.parse().with_context(|| format!("bad workflow size `{size}`"))?;
        if size == 0 || self.vms == 0 {
            bail!("workflow size and --vms must be positive");
        }
        let mut g = GeneratorConfig::new(family, size, self.vms, self.seed);
        g.reliable = self.reliable.min(self.vms);
        Ok(WorkflowSource::Generate(g))
    }
}

impl ClusterArgs {
    fn config(&self) -> Result<ClusterConfig> {
        if !(self.cov > 0.0 && self.cov <= 1.0) {
            bail!("--cov must lie in (0, 1]");
        }
        if self.max_rep == 0 {
            bail!("--max-rep must be at least 1");
        }
        Ok(ClusterConfig {
            cov_threshold: self.cov,
            max_replication: self.max_rep,
            ..ClusterConfig::default()
        })
    }
}

fn base_config(source: &SourceArgs, cluster: &ClusterArgs) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        source: source.source()?,
        vms: source.vms,
        reliable: source.reliable,
        environments: vec![],
        algorithms: vec![],
        reps: 1,
        seed: source.seed,
        lambda: LambdaChoice::Auto,
        gamma: 0.05,
        clustering: cluster.config()?,
        out_dir: None,
    })
}

fn experiment_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = base_config(&args.source, &args.cluster)?;
    cfg.environments = args.env.iter().map(|e| e.parse()).collect::<Result<_, _>>()?;
    cfg.algorithms = args.alg.iter().map(|a| a.parse()).collect::<Result<_, _>>()?;
    cfg.reps = args.reps;
    cfg.gamma = args.gamma;
    cfg.lambda = match args.lambda.trim() {
        "auto" => LambdaChoice::Auto,
        l => LambdaChoice::Fixed(l.parse().with_context(|| format!("bad --lambda `{l}`"))?),
    };
    cfg.out_dir = args.out.clone();
    Ok(cfg)
}

fn execute(args: &RunArgs, comparing: bool) -> Result<()> {
    let cfg = experiment_config(args)?;
    let report = run(&cfg)?;
    let incomplete = report.runs.iter().filter(|r| !r.metrics.completed).count();
    if incomplete > 0 {
        log::info!("{incomplete} of {} runs did not complete", report.runs.len());
    }
    let table = if comparing {
        Some(comparison_table(&compare(&report, &cfg)?))
    } else {
        None
    };
    write_reports(&cfg, &report, table.as_deref())?;
    let mut stdout = std::io::stdout().lock();
    match (&table, args.format) {
        (Some(t), _) => stdout.write_all(t.as_bytes())?,
        (None, Format::Csv) => stdout.write_all(report.to_csv().as_bytes())?,
        (None, Format::Summary) => stdout.write_all(report.to_summary_json().as_bytes())?,
    }
    Ok(())
}

fn real_main(cli: Cli) -> Result<()> {
    let mut command = cli.command;
    match &mut command {
        Command::Run(a) | Command::Compare(a) => a.source.apply_seed_override()?,
        Command::Generate(source) | Command::Schedule { source, .. } => source.apply_seed_override()?,
    }
    match command {
        Command::Run(args) => execute(&args, false),
        Command::Compare(args) => execute(&args, true),
        Command::Generate(source) => {
            let cfg = base_config(&source, &ClusterArgs { cov: 0.3, max_rep: 3 })?;
            let spec = load_workflow(&cfg)?;
            print!("{}", emit_native(&spec));
            Ok(())
        }
        Command::Schedule { source, alg, cluster } => {
            let cfg = base_config(&source, &cluster)?;
            let spec = load_workflow(&cfg)?;
            let alg: Algorithm = alg.parse()?;
            let schedule = overprovision(&spec, &alg.plan(&spec, &cfg.clustering)?);
            schedule.write_csv(&spec, std::io::stdout().lock())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
