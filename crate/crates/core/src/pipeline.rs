//! End-to-end driver: instance generation, sampling, sweeps over penalty and
//! accuracy, and reports. The CLI and the C interface are thin layers over
//! this module.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, decode_sample, scaling_report, summarize, Grouping, HardwareProfile, Outcome, RunStatistics, ScalingReport,
    SizeStat,
};
use crate::error::{Error, Result};
use crate::ilp::{self, assemble, oracle_solve, IlpConfig, IlpInstance, NetworkSolution, DEFAULT_ORACLE_BUDGET};
use crate::pathgen::{self, build_catalog, PathCatalog};
use crate::qubo::{build_encoding, build_qubo, BitEncoding, QuboProblem};
use crate::sampler::{self, sample_random, sample_sa, solve_exhaustive, SaParams, SampleRecord, SampleSet, SampleSource, ScheduleSpec};
use crate::topology::{self, build_growing_topology, Topology};
use crate::traffic::{self, sample_demands, DemandSet};

pub const RESULTS_FILE: &str = "results.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyParams {
    /// Node count of the growing grid network.
    pub nodes: usize,
    /// Topology JSON to load instead of the growing network.
    pub file: Option<PathBuf>,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams { nodes: 3, file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandParams {
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Keep only the first `limit` demands.
    pub limit: Option<usize>,
}

impl Default for DemandParams {
    fn default() -> Self {
        DemandParams {
            mu: 75.0,
            sigma: 10.0,
            seed: 42,
            limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathParams {
    pub k: usize,
    pub max_patterns: usize,
    pub reach_km: f64,
}

impl Default for PathParams {
    fn default() -> Self {
        PathParams {
            k: pathgen::DEFAULT_K_PATHS,
            max_patterns: pathgen::DEFAULT_MAX_PATTERNS,
            reach_km: pathgen::DEFAULT_REACH_KM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IlpParams {
    pub xi: f64,
    pub a: u32,
    /// Falls back to the size-dependent default.
    pub eta_max: Option<u64>,
    pub omega_max: Option<u64>,
    pub oracle_budget: u64,
}

impl Default for IlpParams {
    fn default() -> Self {
        IlpParams {
            xi: traffic::DEFAULT_CIRCUIT_RATE_GBPS,
            a: 1,
            eta_max: None,
            omega_max: None,
            oracle_budget: DEFAULT_ORACLE_BUDGET as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerParams {
    pub method: SampleSource,
    pub n: usize,
    pub sweeps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub schedule: ScheduleSpec,
    pub seed: u64,
    pub bit_budget: u32,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            method: SampleSource::Sa,
            n: 1000,
            sweeps: sampler::DEFAULT_SWEEPS,
            beta_min: sampler::DEFAULT_BETA_RANGE.0,
            beta_max: sampler::DEFAULT_BETA_RANGE.1,
            schedule: ScheduleSpec::default(),
            seed: 0,
            bit_budget: sampler::DEFAULT_BIT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub topology: TopologyParams,
    pub demands: DemandParams,
    pub paths: PathParams,
    pub ilp: IlpParams,
    pub penalty: f64,
    pub sampler: SamplerParams,
    pub output: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            topology: TopologyParams::default(),
            demands: DemandParams::default(),
            paths: PathParams::default(),
            ilp: IlpParams::default(),
            penalty: 4.0,
            sampler: SamplerParams::default(),
            output: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("config", e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn ilp_config(&self, n_nodes: usize, a: u32) -> IlpConfig {
        let mut cfg = IlpConfig::for_network_size(n_nodes).with_accuracy(a);
        cfg.xi = self.ilp.xi;
        if let Some(eta) = self.ilp.eta_max {
            cfg.eta_max = eta;
        }
        if let Some(omega) = self.ilp.omega_max {
            cfg.omega_max = omega;
        }
        cfg.penalty = self.penalty;
        cfg
    }

    pub fn sa_params(&self, seed: u64) -> SaParams {
        SaParams {
            n_samples: self.sampler.n,
            sweeps: self.sampler.sweeps,
            beta_min: self.sampler.beta_min,
            beta_max: self.sampler.beta_max,
            seed,
        }
    }

    pub fn results_path(&self) -> PathBuf {
        self.output.join(RESULTS_FILE)
    }
}

/// Everything built once per (topology, demands, a); penalties only change
/// the QUBO.
#[derive(Debug, Clone)]
pub struct Instance {
    pub topology: Topology,
    pub demands: DemandSet,
    pub catalog: PathCatalog,
    pub ilp_config: IlpConfig,
    pub ilp: IlpInstance,
    pub encoding: BitEncoding,
}

impl Instance {
    pub fn build(cfg: &PipelineConfig, a: u32) -> Result<Self> {
        let topology = match &cfg.topology.file {
            Some(path) => topology::load_topology(path)?,
            None => build_growing_topology(cfg.topology.nodes)?,
        };
        Self::build_on(cfg, topology, a)
    }

    pub fn build_on(cfg: &PipelineConfig, topology: Topology, a: u32) -> Result<Self> {
        let mut demands = sample_demands(&topology, cfg.demands.mu, cfg.demands.sigma, cfg.demands.seed)?;
        if let Some(limit) = cfg.demands.limit {
            demands = demands.truncated(limit);
        }
        let catalog = build_catalog(&topology, &demands, cfg.paths.k, cfg.paths.max_patterns, cfg.paths.reach_km)?;
        let ilp_config = cfg.ilp_config(topology.node_count(), a);
        let ilp = assemble(&catalog, &demands, &ilp_config)?;
        let encoding = build_encoding(&ilp);
        Ok(Instance {
            topology,
            demands,
            catalog,
            ilp_config,
            ilp,
            encoding,
        })
    }

    pub fn qubo(&self, penalty: f64) -> Result<QuboProblem> {
        build_qubo(&self.ilp, &self.encoding, penalty)
    }
}

pub fn run_sampler(qp: &QuboProblem, cfg: &PipelineConfig, schedule: ScheduleSpec, seed: u64) -> Result<SampleSet> {
    let mut set = match cfg.sampler.method {
        SampleSource::Exhaustive => {
            let start = std::time::Instant::now();
            let sample = solve_exhaustive(qp, cfg.sampler.bit_budget)?;
            SampleSet {
                samples: vec![sample],
                schedule,
                wall_time_s: start.elapsed().as_secs_f64(),
            }
        }
        SampleSource::Random => sample_random(qp, cfg.sampler.n, seed)?,
        SampleSource::Sa => sample_sa(qp, &cfg.sa_params(seed))?,
    };
    set.schedule = schedule;
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerateSummary {
    pub files: Vec<PathBuf>,
    pub n_bits: usize,
    pub nnz: usize,
    pub n_couplings: usize,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes topology.json, demands.json, catalog.json, ilp.txt and qubo.txt.
pub fn cmd_generate(cfg: &PipelineConfig) -> Result<GenerateSummary> {
    let inst = Instance::build(cfg, cfg.ilp.a)?;
    let qp = inst.qubo(cfg.penalty)?;
    let dir = &cfg.output;
    ensure_dir(dir)?;
    let files: Vec<PathBuf> = ["topology.json", "demands.json", "catalog.json", "ilp.txt", "qubo.txt"]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    topology::save_topology(&inst.topology, &files[0])?;
    traffic::save_demands(&inst.demands, &files[1])?;
    pathgen::save_catalog(&inst.catalog, &files[2])?;
    ilp::save_ilp(&inst.ilp, &files[3])?;
    crate::qubo::export_qubo(&qp, &files[4])?;
    Ok(GenerateSummary {
        files,
        n_bits: qp.n(),
        nnz: qp.nnz(),
        n_couplings: qp.n_couplings(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub penalty: f64,
    pub accuracy: u32,
    pub schedule: String,
    pub seed: u64,
    pub n_bits: usize,
    pub samples: usize,
    pub feasible: usize,
    pub best_energy: f64,
    pub best_feasible_cost: Option<i64>,
}

struct CellRun {
    summary: CellSummary,
    records: Vec<SampleRecord>,
}

fn run_cell(inst: &Instance, qp: &QuboProblem, cfg: &PipelineConfig, p: f64, a: u32, schedule: ScheduleSpec, seed: u64) -> Result<CellRun> {
    let set = run_sampler(qp, cfg, schedule, seed)?;
    let mut feasible = 0;
    let mut best_feasible_cost: Option<i64> = None;
    for s in &set.samples {
        let d = decode_sample(qp, &inst.ilp, &inst.encoding, s)?;
        if d.feasible {
            feasible += 1;
            best_feasible_cost = Some(best_feasible_cost.map_or(d.cost, |c| c.min(d.cost)));
        }
    }
    let records = set.samples.iter().map(|s| SampleRecord::new(s, schedule, Some(p), Some(a))).collect();
    Ok(CellRun {
        summary: CellSummary {
            penalty: p,
            accuracy: a,
            schedule: schedule.to_string(),
            seed,
            n_bits: qp.n(),
            samples: set.len(),
            feasible,
            best_energy: set.best().map_or(f64::NAN, |s| s.energy),
            best_feasible_cost,
        },
        records,
    })
}

/// Samples the configured QUBO once and appends to results.jsonl.
pub fn cmd_solve(cfg: &PipelineConfig) -> Result<CellSummary> {
    let inst = Instance::build(cfg, cfg.ilp.a)?;
    let qp = inst.qubo(cfg.penalty)?;
    let run = run_cell(&inst, &qp, cfg, cfg.penalty, cfg.ilp.a, cfg.sampler.schedule, cfg.sampler.seed)?;
    ensure_dir(&cfg.output)?;
    sampler::save_records(&run.records, cfg.results_path(), true)?;
    Ok(run.summary)
}

/// One QUBO per `(p, a)` and one sampler run per schedule. Cell `i` (in
/// accuracy, penalty, schedule order) uses seed `sampler.seed + i`.
/// results.jsonl is rewritten so reruns are byte-identical.
pub fn cmd_sweep(cfg: &PipelineConfig, penalties: &[f64], accuracies: &[u32], schedules: &[ScheduleSpec]) -> Result<Vec<CellSummary>> {
    if penalties.is_empty() || accuracies.is_empty() || schedules.is_empty() {
        return Err(Error::InvalidArgument("sweep lists must be non-empty".into()));
    }
    let instances: Vec<Instance> = accuracies.iter().map(|&a| Instance::build(cfg, a)).collect::<Result<_>>()?;
    let mut cells = Vec::new();
    for (ai, &a) in accuracies.iter().enumerate() {
        for &p in penalties {
            for &schedule in schedules {
                cells.push((ai, a, p, schedule, cfg.sampler.seed + cells.len() as u64));
            }
        }
    }
    let mut qubos = BTreeMap::new();
    for &(ai, _, p, _, _) in &cells {
        if let std::collections::btree_map::Entry::Vacant(e) = qubos.entry((ai, p.to_bits())) {
            e.insert(instances[ai].qubo(p)?);
        }
    }
    let runs: Vec<CellRun> = cells
        .par_iter()
        .map(|&(ai, a, p, schedule, seed)| run_cell(&instances[ai], &qubos[&(ai, p.to_bits())], cfg, p, a, schedule, seed))
        .collect::<Result<_>>()?;
    ensure_dir(&cfg.output)?;
    let records: Vec<SampleRecord> = runs.iter().flat_map(|r| r.records.iter().cloned()).collect();
    sampler::save_records(&records, cfg.results_path(), false)?;
    Ok(runs.into_iter().map(|r| r.summary).collect())
}

/// Exact optimum of the configured instance; also written to oracle.json.
pub fn cmd_oracle(cfg: &PipelineConfig) -> Result<NetworkSolution> {
    let inst = Instance::build(cfg, cfg.ilp.a)?;
    let sol = oracle_solve(&inst.ilp, u128::from(cfg.ilp.oracle_budget))?;
    ensure_dir(&cfg.output)?;
    let path = cfg.output.join("oracle.json");
    fs::write(&path, serde_json::to_string_pretty(&sol)?).map_err(|e| Error::io(&path, e))?;
    Ok(sol)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub stats: Vec<RunStatistics>,
    pub oracle_cost: Option<u64>,
    pub text: String,
}

/// Decodes every stored sample against the instance rebuilt from `cfg` for
/// its accuracy tag, then writes run.csv and histogram.csv to `out_dir`.
pub fn cmd_report_run(cfg: &PipelineConfig, results: &Path, out_dir: &Path, grouping: Grouping, bins: usize) -> Result<RunReport> {
    let records = sampler::load_records(results)?;
    if records.is_empty() {
        return Err(Error::EmptyResults(format!("{} holds no samples", results.display())));
    }
    let mut instances: BTreeMap<u32, Instance> = BTreeMap::new();
    let mut outcomes = Vec::with_capacity(records.len());
    for r in &records {
        let a = r.accuracy.unwrap_or(cfg.ilp.a);
        let inst = match instances.entry(a) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => e.insert(Instance::build(cfg, a)?),
        };
        let d = analysis::decode_bits(&inst.ilp, &inst.encoding, &r.unpacked()?)?;
        outcomes.push(Outcome {
            schedule: r.schedule.to_string(),
            penalty: r.penalty,
            accuracy: Some(a),
            energy: r.energy,
            feasible: d.feasible,
            cost: d.cost,
        });
    }
    let stats = summarize(&outcomes, grouping, bins)?;
    let oracle_cost = instances
        .values()
        .next()
        .and_then(|inst| oracle_solve(&inst.ilp, u128::from(cfg.ilp.oracle_budget)).ok())
        .map(|s| s.cost);
    ensure_dir(out_dir)?;
    write_csv(out_dir.join("run.csv"), |w| analysis::write_run_csv(&stats, w))?;
    write_csv(out_dir.join("histogram.csv"), |w| analysis::write_histogram_csv(&stats, w))?;
    let text = analysis::run_summary_text(&stats, oracle_cost);
    Ok(RunReport { stats, oracle_cost, text })
}

fn write_csv(path: PathBuf, f: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f(&mut file)
}

/// Logical size of the growing network with `n_nodes` nodes at accuracy `a`,
/// with all other parameters from `cfg`.
pub fn measure_size(cfg: &PipelineConfig, n_nodes: usize, a: u32) -> Result<SizeStat> {
    let inst = Instance::build_on(cfg, build_growing_topology(n_nodes)?, a)?;
    let qp = inst.qubo(cfg.penalty)?;
    Ok(SizeStat {
        n_nodes,
        accuracy: a,
        logical_qubits: qp.n() as u64,
        couplings: qp.n_couplings() as u64,
    })
}

/// Scaling rows for every size and accuracy; writes scaling.csv.
pub fn cmd_report_scaling(
    cfg: &PipelineConfig,
    sizes: &[usize],
    accuracies: &[u32],
    profile: &HardwareProfile,
    chain_coeff: f64,
    out_dir: &Path,
) -> Result<(ScalingReport, String)> {
    let pairs: Vec<(usize, u32)> = accuracies.iter().flat_map(|&a| sizes.iter().map(move |&n| (n, a))).collect();
    let stats: Vec<SizeStat> = pairs.par_iter().map(|&(n, a)| measure_size(cfg, n, a)).collect::<Result<_>>()?;
    let report = scaling_report(&stats, profile, chain_coeff)?;
    ensure_dir(out_dir)?;
    write_csv(out_dir.join("scaling.csv"), |w| analysis::write_scaling_csv(&report, w))?;
    let text = analysis::scaling_summary_text(&report);
    Ok((report, text))
}
