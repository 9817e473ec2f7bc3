use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use netqubo::analysis::{Grouping, HardwareProfile, DEFAULT_CHAIN_COEFF, DEFAULT_HISTOGRAM_BINS};
use netqubo::pipeline::{self, PipelineConfig};
use netqubo::sampler::{SampleSource, ScheduleSpec};

#[derive(Parser)]
#[command(name = "netqubo", version, about = "Optical WAN allocation: ILP -> QUBO -> samplers -> reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write topology, demands, path catalog, ILP and QUBO files.
    Generate(Common),
    /// Sample a grid of penalties, accuracies and schedules into results.jsonl.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,1000")]
        penalties: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        accuracies: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "100")]
        schedules: Vec<ScheduleSpec>,
    },
    /// Sample the configured QUBO once, appending to results.jsonl.
    Solve(Common),
    /// Exact optimum by enumerating pattern selections.
    Oracle(Common),
    /// Summarize results (run) or estimate hardware requirements (scaling).
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "run")]
        mode: ReportMode,
        /// Defaults to <output>/results.jsonl.
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "cell")]
        group_by: GroupBy,
        #[arg(long, default_value_t = DEFAULT_HISTOGRAM_BINS)]
        bins: usize,
        #[arg(long, value_delimiter = ',', default_value = "3,4,5,6")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,5")]
        scaling_accuracies: Vec<u32>,
        #[arg(long, default_value_t = DEFAULT_CHAIN_COEFF)]
        chain_coeff: f64,
        #[arg(long, default_value_t = 5600)]
        qubits: u64,
        #[arg(long, default_value_t = 40100)]
        couplers: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportMode {
    Run,
    Scaling,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupBy {
    All,
    Schedule,
    Cell,
}

/// Config file plus flag overrides.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    topology_file: Option<PathBuf>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    demand_seed: Option<u64>,
    #[arg(long)]
    demand_limit: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_patterns: Option<usize>,
    #[arg(long)]
    reach_km: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    accuracy: Option<u32>,
    #[arg(long)]
    eta_max: Option<u64>,
    #[arg(long)]
    omega_max: Option<u64>,
    #[arg(long)]
    oracle_budget: Option<u64>,
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    method: Option<SampleSource>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    beta_min: Option<f64>,
    #[arg(long)]
    beta_max: Option<f64>,
    #[arg(long)]
    schedule: Option<ScheduleSpec>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bit_budget: Option<u32>,
}

macro_rules! set {
    ($target:expr, $value:expr) => {
        if let Some(v) = $value {
            $target = v;
        }
    };
}

impl Common {
    fn config(&self) -> netqubo::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        set!(cfg.output, self.output.clone());
        set!(cfg.topology.nodes, self.nodes);
        if self.topology_file.is_some() {
            cfg.topology.file = self.topology_file.clone();
        }
        set!(cfg.demands.mu, self.mu);
        set!(cfg.demands.sigma, self.sigma);
        set!(cfg.demands.seed, self.demand_seed);
        if self.demand_limit.is_some() {
            cfg.demands.limit = self.demand_limit;
        }
        set!(cfg.paths.k, self.k);
        set!(cfg.paths.max_patterns, self.max_patterns);
        set!(cfg.paths.reach_km, self.reach_km);
        set!(cfg.ilp.xi, self.xi);
        set!(cfg.ilp.a, self.accuracy);
        if self.eta_max.is_some() {
            cfg.ilp.eta_max = self.eta_max;
        }
        if self.omega_max.is_some() {
            cfg.ilp.omega_max = self.omega_max;
        }
        set!(cfg.ilp.oracle_budget, self.oracle_budget);
        set!(cfg.penalty, self.penalty);
        set!(cfg.sampler.method, self.method);
        set!(cfg.sampler.n, self.samples);
        set!(cfg.sampler.sweeps, self.sweeps);
        set!(cfg.sampler.beta_min, self.beta_min);
        set!(cfg.sampler.beta_max, self.beta_max);
        set!(cfg.sampler.schedule, self.schedule);
        set!(cfg.sampler.seed, self.seed);
        set!(cfg.sampler.bit_budget, self.bit_budget);
        Ok(cfg)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(common) => {
            let cfg = common.config()?;
            let summary = pipeline::cmd_generate(&cfg)?;
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            println!("N = {}, nnz = {}, couplings = {}", summary.n_bits, summary.nnz, summary.n_couplings);
        }
        Command::Sweep {
            common,
            penalties,
            accuracies,
            schedules,
        } => {
            let cfg = common.config()?;
            let cells = pipeline::cmd_sweep(&cfg, &penalties, &accuracies, &schedules)?;
            println!("penalty,accuracy,schedule,seed,n_bits,samples,feasible,best_energy,best_feasible_cost");
            for c in &cells {
                println!(
                    "{},{},{},{},{},{},{},{},{}",
                    c.penalty,
                    c.accuracy,
                    c.schedule,
                    c.seed,
                    c.n_bits,
                    c.samples,
                    c.feasible,
                    c.best_energy,
                    c.best_feasible_cost.map(|v| v.to_string()).unwrap_or_default()
                );
            }
            println!("wrote {}", cfg.results_path().display());
        }
        Command::Solve(common) => {
            let cfg = common.config()?;
            let c = pipeline::cmd_solve(&cfg)?;
            println!("N = {}, samples = {}, feasible = {}, best energy = {}", c.n_bits, c.samples, c.feasible, c.best_energy);
            match c.best_feasible_cost {
                Some(cost) => println!("best feasible cost = {cost}"),
                None => println!("best feasible cost = none"),
            }
            println!("appended to {}", cfg.results_path().display());
        }
        Command::Oracle(common) => {
            let cfg = common.config()?;
            let sol = pipeline::cmd_oracle(&cfg)?;
            println!("oracle cost = {}", sol.cost);
            println!("omega = {:?}", sol.omega);
        }
        Command::Report {
            common,
            mode,
            results,
            group_by,
            bins,
            sizes,
            scaling_accuracies,
            chain_coeff,
            qubits,
            couplers,
        } => {
            let cfg = common.config()?;
            match mode {
                ReportMode::Run => {
                    let results = results.unwrap_or_else(|| cfg.results_path());
                    let grouping = match group_by {
                        GroupBy::All => Grouping::ALL,
                        GroupBy::Schedule => Grouping::SCHEDULE,
                        GroupBy::Cell => Grouping::CELL,
                    };
                    let report = pipeline::cmd_report_run(&cfg, &results, &cfg.output, grouping, bins)
                        .with_context(|| format!("reporting on {}", results.display()))?;
                    print!("{}", report.text);
                }
                ReportMode::Scaling => {
                    let profile = HardwareProfile {
                        name: "default".into(),
                        physical_qubits: qubits,
                        couplers,
                    };
                    let (_, text) = pipeline::cmd_report_scaling(&cfg, &sizes, &scaling_accuracies, &profile, chain_coeff, &cfg.output)?;
                    print!("{text}");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<netqubo::Error>().map_or(1, |e| e.exit_code());
            ExitCode::from(code as u8)
        }
    }
}
