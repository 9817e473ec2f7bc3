//! Sample decoding and statistics, the per-sample run time model, and
//! qubit/coupler scaling estimates against a hardware profile.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ilp::{IlpInstance, Violation};
use crate::qubo::{build_encoding, BitEncoding, QuboProblem};
use crate::sampler::{Sample, SampleSet};

pub const DEFAULT_HISTOGRAM_BINS: usize = 100;
pub const DEFAULT_CHAIN_COEFF: f64 = 2.13;

/// Fixed overhead per sample (ms) and slope per ms of effective anneal time.
pub const TIME_INTERCEPT_MS: f64 = 0.58;
pub const TIME_SLOPE: f64 = 5.75;

/// Power laws `c·|V|^e` reported with the reference scaling data, shown next
/// to our own fits. Which series each belongs to is not stated.
pub const REFERENCE_POWER_LAWS: [PowerLaw; 2] = [
    PowerLaw {
        coefficient: 0.25,
        exponent: 3.29,
    },
    PowerLaw {
        coefficient: 1.0 / 7.0,
        exponent: 3.35,
    },
];

/// Reference logical qubit counts `(|V|, a, N)`.
pub const REFERENCE_LOGICAL_QUBITS: [(usize, u32, u64); 3] = [(3, 1, 66), (6, 5, 532), (16, 5, 3822)];

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSample {
    pub replica: u64,
    pub energy: f64,
    pub x: Vec<i64>,
    /// Slack values scaled by `2^scale_bits`.
    pub slack_scaled: Vec<i64>,
    pub cost: i64,
    /// `‖A x + b + s‖²`.
    pub residual_sq: f64,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Maps bits back to `x` and `s` and classifies the result.
pub fn decode_bits(inst: &IlpInstance, enc: &BitEncoding, bits: &[u8]) -> Result<DecodedSample> {
    if bits.len() != enc.n_bits() {
        return Err(Error::Dimension(format!("sample has {} bits, encoding expects {}", bits.len(), enc.n_bits())));
    }
    let x = enc.decode_x(bits);
    let slack_scaled = enc.decode_slack_scaled(bits);
    let scale = inst.scale();
    let residual_sq = inst
        .residual_scaled(&x)
        .iter()
        .zip(&slack_scaled)
        .map(|(&r, &s)| ((r + s) as f64 / scale).powi(2))
        .sum();
    let check = inst.check_assignment(&x)?;
    Ok(DecodedSample {
        replica: 0,
        energy: f64::NAN,
        cost: inst.objective(&x),
        x,
        slack_scaled,
        residual_sq,
        feasible: check.feasible,
        violations: check.violations,
    })
}

pub fn decode_sample(qp: &QuboProblem, inst: &IlpInstance, enc: &BitEncoding, sample: &Sample) -> Result<DecodedSample> {
    if qp.n() != enc.n_bits() {
        return Err(Error::Dimension(format!("QUBO has {} bits, encoding expects {}", qp.n(), enc.n_bits())));
    }
    let mut d = decode_bits(inst, enc, &sample.bits)?;
    d.replica = sample.replica;
    d.energy = sample.energy;
    Ok(d)
}

pub fn decode(qp: &QuboProblem, inst: &IlpInstance, set: &SampleSet) -> Result<Vec<DecodedSample>> {
    let enc = build_encoding(inst);
    set.samples.iter().map(|s| decode_sample(qp, inst, &enc, s)).collect()
}

/// Minimal per-sample facts needed for statistics, with the run parameters
/// used for grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub schedule: String,
    pub penalty: Option<f64>,
    pub accuracy: Option<u32>,
    pub energy: f64,
    pub feasible: bool,
    pub cost: i64,
}

impl Outcome {
    pub fn new(d: &DecodedSample, schedule: impl Into<String>, penalty: Option<f64>, accuracy: Option<u32>) -> Self {
        Outcome {
            schedule: schedule.into(),
            penalty,
            accuracy,
            energy: d.energy,
            feasible: d.feasible,
            cost: d.cost,
        }
    }
}

/// Which tags split outcomes into separate groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Grouping {
    pub schedule: bool,
    pub penalty: bool,
    pub accuracy: bool,
}

impl Grouping {
    pub const ALL: Grouping = Grouping {
        schedule: false,
        penalty: false,
        accuracy: false,
    };
    pub const SCHEDULE: Grouping = Grouping {
        schedule: true,
        penalty: false,
        accuracy: false,
    };
    pub const CELL: Grouping = Grouping {
        schedule: true,
        penalty: true,
        accuracy: true,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupKey {
    pub schedule: Option<String>,
    pub penalty: Option<f64>,
    pub accuracy: Option<u32>,
}

impl std::fmt::Display for GroupKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts = Vec::new();
        if let Some(s) = &self.schedule {
            parts.push(format!("schedule={s}"));
        }
        if let Some(p) = self.penalty {
            parts.push(format!("p={p}"));
        }
        if let Some(a) = self.accuracy {
            parts.push(format!("a={a}"));
        }
        if parts.is_empty() {
            f.write_str("all")
        } else {
            f.write_str(&parts.join(" "))
        }
    }
}

/// Fixed-width bins over `[min, min + width·bins]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyHistogram {
    pub min: f64,
    pub width: f64,
    pub counts: Vec<usize>,
    /// `count / total samples` per bin.
    pub densities: Vec<f64>,
}

impl EnergyHistogram {
    pub fn new(energies: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if max > min { (max - min) / bins as f64 } else { 0.0 };
        let mut counts = vec![0; bins];
        for &e in energies {
            let k = if width > 0.0 { (((e - min) / width) as usize).min(bins - 1) } else { 0 };
            counts[k] += 1;
        }
        let total = energies.len() as f64;
        let densities = counts.iter().map(|&c| c as f64 / total).collect();
        EnergyHistogram { min, width, counts, densities }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStatistics {
    pub key: GroupKey,
    pub total: usize,
    pub feasible: usize,
    pub feasible_per_million: f64,
    /// Feasible samples per objective value.
    pub cost_counts: BTreeMap<i64, usize>,
    pub best_feasible_cost: Option<i64>,
    pub mean_energy: f64,
    pub min_energy: f64,
    pub energy_histogram: EnergyHistogram,
}

pub fn feasible_per_million(feasible: usize, total: usize) -> f64 {
    feasible as f64 * 1e6 / total as f64
}

/// Groups outcomes and computes densities, feasible rate and cost counts.
/// Groups are ordered by schedule, penalty, then accuracy.
pub fn summarize(outcomes: &[Outcome], grouping: Grouping, bins: usize) -> Result<Vec<RunStatistics>> {
    if outcomes.is_empty() {
        return Err(Error::EmptyResults("no samples to summarize".into()));
    }
    type Key = (Option<String>, Option<u64>, Option<u32>);
    let mut groups: BTreeMap<Key, Vec<&Outcome>> = BTreeMap::new();
    for o in outcomes {
        let key = (
            grouping.schedule.then(|| o.schedule.clone()),
            // penalties are positive, so bit order is numeric order
            grouping.penalty.then_some(o.penalty.map(f64::to_bits)).flatten(),
            grouping.accuracy.then_some(o.accuracy).flatten(),
        );
        groups.entry(key).or_default().push(o);
    }
    Ok(groups
        .into_iter()
        .map(|((schedule, penalty, accuracy), members)| {
            let total = members.len();
            let mut cost_counts = BTreeMap::new();
            for o in members.iter().filter(|o| o.feasible) {
                *cost_counts.entry(o.cost).or_insert(0) += 1;
            }
            let feasible = cost_counts.values().sum();
            let energies: Vec<f64> = members.iter().map(|o| o.energy).collect();
            RunStatistics {
                key: GroupKey {
                    schedule,
                    penalty: penalty.map(f64::from_bits),
                    accuracy,
                },
                total,
                feasible,
                feasible_per_million: feasible_per_million(feasible, total),
                best_feasible_cost: cost_counts.keys().next().copied(),
                cost_counts,
                mean_energy: energies.iter().sum::<f64>() / total as f64,
                min_energy: energies.iter().copied().fold(f64::INFINITY, f64::min),
                energy_histogram: EnergyHistogram::new(&energies, bins),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeToSolution {
    pub per_sample_ms: f64,
    pub total_s: f64,
}

/// `0.58 + 5.75·t_eff` ms per sample with `t_eff = (t_ps + t_p)` in ms.
pub fn time_to_solution(t_ps_us: f64, t_p_us: f64, n_samples: u64) -> Result<TimeToSolution> {
    if !(t_ps_us >= 0.0 && t_p_us >= 0.0 && t_ps_us.is_finite() && t_p_us.is_finite()) {
        return Err(Error::InvalidArgument(format!("times must be non-negative, got {t_ps_us} and {t_p_us}")));
    }
    let t_eff_ms = (t_ps_us + t_p_us) / 1000.0;
    let per_sample_ms = TIME_INTERCEPT_MS + TIME_SLOPE * t_eff_ms;
    Ok(TimeToSolution {
        per_sample_ms,
        total_s: n_samples as f64 * per_sample_ms / 1000.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    pub name: String,
    pub physical_qubits: u64,
    pub couplers: u64,
}

impl Default for HardwareProfile {
    fn default() -> Self {
        HardwareProfile {
            name: "default".into(),
            physical_qubits: 5600,
            couplers: 40100,
        }
    }
}

/// Logical size of one generated QUBO.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeStat {
    pub n_nodes: usize,
    pub accuracy: u32,
    pub logical_qubits: u64,
    /// Nonzero off-diagonal pairs.
    pub couplings: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n_nodes: usize,
    pub accuracy: u32,
    pub logical_qubits: u64,
    pub couplings: u64,
    pub chain_length: f64,
    pub physical_qubits: u64,
    pub logical_util_pct: f64,
    pub physical_util_pct: f64,
    pub coupler_util_pct: f64,
    pub embeddable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficient * x.powf(self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub profile: HardwareProfile,
    pub chain_coeff: f64,
    pub rows: Vec<ScalingRow>,
    /// Fit of logical qubits against `|V|`, per accuracy.
    pub logical_fits: Vec<(u32, PowerLaw)>,
}

pub fn chain_length(n_nodes: usize, chain_coeff: f64) -> f64 {
    chain_coeff * n_nodes as f64
}

/// `N · chain`, rounded to the nearest qubit.
pub fn physical_qubits(logical: u64, chain: f64) -> u64 {
    (logical as f64 * chain).round() as u64
}

pub fn utilization_pct(quantity: u64, limit: u64) -> f64 {
    quantity as f64 / limit as f64 * 100.0
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLaw> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("power-law fit needs at least 2 distinct sizes".into()));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::InvalidArgument("power-law fit needs positive data".into()));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let exponent = sxy / sxx;
    Ok(PowerLaw {
        coefficient: (my - exponent * mx).exp(),
        exponent,
    })
}

pub fn scaling_report(stats: &[SizeStat], profile: &HardwareProfile, chain_coeff: f64) -> Result<ScalingReport> {
    if !(chain_coeff > 0.0 && chain_coeff.is_finite()) {
        return Err(Error::InvalidArgument(format!("chain coefficient must be positive, got {chain_coeff}")));
    }
    if profile.physical_qubits == 0 || profile.couplers == 0 {
        return Err(Error::InvalidArgument("hardware profile limits must be positive".into()));
    }
    let mut sorted = stats.to_vec();
    sorted.sort_by_key(|s| (s.accuracy, s.n_nodes));
    let rows: Vec<ScalingRow> = sorted
        .iter()
        .map(|s| {
            let chain = chain_length(s.n_nodes, chain_coeff);
            let physical = physical_qubits(s.logical_qubits, chain);
            ScalingRow {
                n_nodes: s.n_nodes,
                accuracy: s.accuracy,
                logical_qubits: s.logical_qubits,
                couplings: s.couplings,
                chain_length: chain,
                physical_qubits: physical,
                logical_util_pct: utilization_pct(s.logical_qubits, profile.physical_qubits),
                physical_util_pct: utilization_pct(physical, profile.physical_qubits),
                coupler_util_pct: utilization_pct(s.couplings, profile.couplers),
                embeddable: physical <= profile.physical_qubits && s.couplings <= profile.couplers,
            }
        })
        .collect();
    let mut by_accuracy: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for s in &sorted {
        by_accuracy.entry(s.accuracy).or_default().push((s.n_nodes as f64, s.logical_qubits as f64));
    }
    let logical_fits = by_accuracy
        .into_iter()
        .map(|(a, pts)| Ok((a, fit_power_law(&pts)?)))
        .collect::<Result<_>>()?;
    Ok(ScalingReport {
        profile: profile.clone(),
        chain_coeff,
        rows,
        logical_fits,
    })
}

#[derive(Serialize)]
struct RunCsvRow<'a> {
    group: String,
    schedule: Option<&'a str>,
    penalty: Option<f64>,
    accuracy: Option<u32>,
    total: usize,
    feasible: usize,
    feasible_per_million: f64,
    best_feasible_cost: Option<i64>,
    mean_energy: f64,
    min_energy: f64,
    cost_counts: String,
}

/// Columns: group, schedule, penalty, accuracy, total, feasible,
/// feasible_per_million, best_feasible_cost, mean_energy, min_energy,
/// cost_counts (`cost:count` pairs separated by `;`).
pub fn write_run_csv<W: Write>(stats: &[RunStatistics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in stats {
        w.serialize(RunCsvRow {
            group: s.key.to_string(),
            schedule: s.key.schedule.as_deref(),
            penalty: s.key.penalty,
            accuracy: s.key.accuracy,
            total: s.total,
            feasible: s.feasible,
            feasible_per_million: s.feasible_per_million,
            best_feasible_cost: s.best_feasible_cost,
            mean_energy: s.mean_energy,
            min_energy: s.min_energy,
            cost_counts: s.cost_counts.iter().map(|(c, n)| format!("{c}:{n}")).collect::<Vec<_>>().join(";"),
        })?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

#[derive(Serialize)]
struct HistogramCsvRow {
    group: String,
    bin: usize,
    lower: f64,
    upper: f64,
    count: usize,
    density: f64,
}

/// Columns: group, bin, lower, upper, count, density.
pub fn write_histogram_csv<W: Write>(stats: &[RunStatistics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in stats {
        let h = &s.energy_histogram;
        for (bin, (&count, &density)) in h.counts.iter().zip(&h.densities).enumerate() {
            w.serialize(HistogramCsvRow {
                group: s.key.to_string(),
                bin,
                lower: h.min + h.width * bin as f64,
                upper: h.min + h.width * (bin + 1) as f64,
                count,
                density,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Columns follow [`ScalingRow`] field names.
pub fn write_scaling_csv<W: Write>(report: &ScalingReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn run_summary_text(stats: &[RunStatistics], oracle_cost: Option<u64>) -> String {
    let mut out = String::new();
    for s in stats {
        let _ = writeln!(out, "[{}] samples = {}, feasible = {} ({:.1} per million)", s.key, s.total, s.feasible, s.feasible_per_million);
        let _ = writeln!(out, "  mean energy = {}, min energy = {}", s.mean_energy, s.min_energy);
        match s.best_feasible_cost {
            Some(c) => {
                let _ = writeln!(out, "  best feasible cost = {c}");
            }
            None => {
                let _ = writeln!(out, "  best feasible cost = none");
            }
        }
    }
    if let Some(c) = oracle_cost {
        let _ = writeln!(out, "oracle cost = {c}");
    }
    out
}

pub fn scaling_summary_text(report: &ScalingReport) -> String {
    let mut out = String::new();
    let p = &report.profile;
    let _ = writeln!(
        out,
        "profile {}: {} qubits, {} couplers; chain length {}·|V|",
        p.name, p.physical_qubits, p.couplers, report.chain_coeff
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "|V|={:>2} a={} N={:>5} couplings={:>7} physical={:>7} ({:.1}%) {}",
            r.n_nodes,
            r.accuracy,
            r.logical_qubits,
            r.couplings,
            r.physical_qubits,
            r.physical_util_pct,
            if r.embeddable { "embeddable" } else { "NOT embeddable" }
        );
    }
    for (a, fit) in &report.logical_fits {
        let _ = writeln!(out, "fit a={a}: N ≈ {:.4}·|V|^{:.3}", fit.coefficient, fit.exponent);
    }
    for fit in REFERENCE_POWER_LAWS {
        let _ = writeln!(out, "reference: {:.4}·|V|^{:.2}", fit.coefficient, fit.exponent);
    }
    let _ = writeln!(
        out,
        "note: utilization is relative to {} qubits; a 5760-qubit device would give 66.4% at N = 3822 instead of 68.25%",
        p.physical_qubits
    );
    out
}
