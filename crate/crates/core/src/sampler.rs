//! Samplers for a [`QuboProblem`]: an exhaustive minimizer for small
//! instances, a uniform random baseline and a simulated-annealing sampler
//! used in place of an annealing QPU. Also the annealing schedule shorthand
//! `t_ps@s_p+t_p`.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::QuboProblem;

pub const DEFAULT_BIT_BUDGET: u32 = 26;
pub const DEFAULT_SWEEPS: usize = 1000;
pub const DEFAULT_BETA_RANGE: (f64, f64) = (0.1, 10.0);
pub const DEFAULT_SCHEDULE: &str = "100";

/// Samples drawn per RNG stream in the random baseline, fixed so results do
/// not depend on the thread count.
const RANDOM_CHUNK: usize = 4096;

/// Annealing schedule: time per sample `t_ps` (µs) with an optional pause of
/// `t_p` µs at anneal fraction `s_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSpec {
    pub t_ps: f64,
    pub s_p: Option<f64>,
    pub t_p: f64,
}

impl ScheduleSpec {
    pub fn plain(t_ps: f64) -> Self {
        ScheduleSpec { t_ps, s_p: None, t_p: 0.0 }
    }

    /// Effective anneal time per sample in µs.
    pub fn t_eff(&self) -> f64 {
        self.t_ps + self.t_p
    }
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        DEFAULT_SCHEDULE.parse().expect("default schedule parses")
    }
}

impl fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.s_p {
            None => write!(f, "{}", self.t_ps),
            Some(s_p) => write!(f, "{}@{}+{}", self.t_ps, s_p, self.t_p),
        }
    }
}

impl FromStr for ScheduleSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::parse(format!("schedule '{text}'"), msg.to_string());
        let number = |s: &str| -> Result<f64> {
            let v: f64 = s.trim().parse().map_err(|_| bad("expected a number"))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad("times must be finite and non-negative"));
            }
            Ok(v)
        };
        match text.split_once('@') {
            None => Ok(ScheduleSpec::plain(number(text)?)),
            Some((t_ps, rest)) => {
                let (s_p, t_p) = rest.split_once('+').ok_or_else(|| bad("expected '<t_ps>@<s_p>+<t_p>'"))?;
                let s_p = number(s_p)?;
                if s_p > 1.0 {
                    return Err(bad("pause fraction must lie in [0, 1]"));
                }
                Ok(ScheduleSpec {
                    t_ps: number(t_ps)?,
                    s_p: Some(s_p),
                    t_p: number(t_p)?,
                })
            }
        }
    }
}

impl Serialize for ScheduleSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScheduleSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn parse_schedule(text: &str) -> Result<ScheduleSpec> {
    text.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleSource {
    Exhaustive,
    Random,
    Sa,
}

impl fmt::Display for SampleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleSource::Exhaustive => "exhaustive",
            SampleSource::Random => "random",
            SampleSource::Sa => "sa",
        })
    }
}

impl FromStr for SampleSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(SampleSource::Exhaustive),
            "random" => Ok(SampleSource::Random),
            "sa" => Ok(SampleSource::Sa),
            _ => Err(Error::InvalidArgument(format!("unknown sampler '{s}' (expected exhaustive, random or sa)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub bits: Vec<u8>,
    /// `qᵀQq + C`.
    pub energy: f64,
    pub source: SampleSource,
    pub seed: u64,
    /// Chain or draw index within the run.
    pub replica: u64,
}

#[derive(Debug, Clone)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub schedule: ScheduleSpec,
    pub wall_time_s: f64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn best(&self) -> Option<&Sample> {
        self.samples.iter().min_by(|a, b| a.energy.total_cmp(&b.energy))
    }

    pub fn mean_energy(&self) -> f64 {
        self.samples.iter().map(|s| s.energy).sum::<f64>() / self.samples.len() as f64
    }
}

/// Off-diagonal local fields `f_i = Σ_j Q_ij q_j`, making single-flip energy
/// changes O(1) and flips O(degree).
pub(crate) struct LocalFields<'a> {
    qp: &'a QuboProblem,
    pub bits: Vec<u8>,
    fields: Vec<f64>,
}

impl<'a> LocalFields<'a> {
    pub fn new(qp: &'a QuboProblem, bits: Vec<u8>) -> Self {
        let mut fields = vec![0.0; qp.n()];
        for &(i, j, v) in qp.upper() {
            if bits[j] != 0 {
                fields[i] += v;
            }
            if bits[i] != 0 {
                fields[j] += v;
            }
        }
        LocalFields { qp, bits, fields }
    }

    /// Energy change from flipping bit `i`.
    pub fn delta(&self, i: usize) -> f64 {
        let sign = if self.bits[i] != 0 { -1.0 } else { 1.0 };
        sign * (self.qp.diag()[i] + 2.0 * self.fields[i])
    }

    pub fn flip(&mut self, i: usize) {
        let sign = if self.bits[i] != 0 { -1.0 } else { 1.0 };
        self.bits[i] ^= 1;
        for &(j, v) in self.qp.neighbors(i) {
            self.fields[j] += sign * v;
        }
    }
}

/// Bits `q_0..q_{n-1}` packed into an integer with `q_0` most significant,
/// so integer order equals lexicographic order.
fn bits_from_mask(mask: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((mask >> (n - 1 - i)) & 1) as u8).collect()
}

/// Global minimizer by Gray-code enumeration. Energies within a relative
/// `1e-9` count as ties and resolve to the lexicographically smallest bit
/// vector.
pub fn solve_exhaustive(qp: &QuboProblem, bit_budget: u32) -> Result<Sample> {
    let n = qp.n();
    if n > bit_budget as usize || n > 62 {
        return Err(Error::BudgetExceeded {
            needed: 1u128 << n.min(127),
            budget: 1u128 << bit_budget.min(127),
        });
    }
    let prefix_bits = n.min(8);
    let free = n - prefix_bits;
    let tie = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
    let better = |(ea, ma): (f64, u64), (eb, mb): (f64, u64)| if tie(ea, eb) { ma < mb } else { ea < eb };

    let (_, mask) = (0u64..1 << prefix_bits)
        .into_par_iter()
        .map(|prefix| {
            let start = prefix << free;
            let mut state = LocalFields::new(qp, bits_from_mask(start, n));
            let mut energy = qp.quadratic_energy(&state.bits);
            let mut mask = start;
            let mut best = (energy, mask);
            for step in 1u64..1 << free {
                let t = step.trailing_zeros() as usize;
                let i = n - 1 - t;
                energy += state.delta(i);
                state.flip(i);
                mask ^= 1 << t;
                if better((energy, mask), best) {
                    best = (energy, mask);
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, u64::MAX), |a, b| if better(a, b) { a } else { b });

    let bits = bits_from_mask(mask, n);
    Ok(Sample {
        energy: qp.energy(&bits),
        bits,
        source: SampleSource::Exhaustive,
        seed: 0,
        replica: 0,
    })
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    let mut bits = Vec::with_capacity(n);
    while bits.len() < n {
        let word: u64 = rng.random();
        bits.extend((0..64.min(n - bits.len())).map(|k| ((word >> k) & 1) as u8));
    }
    bits
}

fn chunk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_map<T: Send>(qp: &QuboProblem, n: usize, seed: u64, f: impl Fn(u64, Vec<u8>) -> T + Sync) -> Vec<T> {
    let chunks = n.div_ceil(RANDOM_CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            let len = RANDOM_CHUNK.min(n - c * RANDOM_CHUNK);
            let f = &f;
            (0..len)
                .map(|k| {
                    let bits = random_bits(&mut rng, qp.n());
                    f((c * RANDOM_CHUNK + k) as u64, bits)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// `n` i.i.d. uniform bit vectors.
pub fn sample_random(qp: &QuboProblem, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let start = Instant::now();
    let samples = random_map(qp, n, seed, |replica, bits| Sample {
        energy: qp.energy(&bits),
        bits,
        source: SampleSource::Random,
        seed,
        replica,
    });
    Ok(SampleSet {
        samples,
        schedule: ScheduleSpec::default(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Energies of the same draws as [`sample_random`] without keeping the bits.
pub fn random_energies(qp: &QuboProblem, n: usize, seed: u64) -> Vec<f64> {
    random_map(qp, n, seed, |_, bits| qp.energy(&bits))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub n_samples: usize,
    pub sweeps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub seed: u64,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams {
            n_samples: 1000,
            sweeps: DEFAULT_SWEEPS,
            beta_min: DEFAULT_BETA_RANGE.0,
            beta_max: DEFAULT_BETA_RANGE.1,
            seed: 0,
        }
    }
}

fn beta_ladder(sweeps: usize, beta_min: f64, beta_max: f64) -> Vec<f64> {
    if sweeps == 1 {
        return vec![beta_max];
    }
    let ratio = (beta_max / beta_min).ln() / (sweeps - 1) as f64;
    (0..sweeps).map(|s| beta_min * (ratio * s as f64).exp()).collect()
}

fn anneal_chain(qp: &QuboProblem, betas: &[f64], seed: u64, chain: u64) -> Vec<u8> {
    let mut rng = chunk_rng(seed, chain);
    let init = random_bits(&mut rng, qp.n());
    let mut state = LocalFields::new(qp, init);
    for &beta in betas {
        for i in 0..qp.n() {
            let delta = state.delta(i);
            if delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp() {
                state.flip(i);
            }
        }
    }
    state.bits
}

/// Independent Metropolis single-flip chains on a geometric inverse
/// temperature ladder; each chain contributes its final state.
pub fn sample_sa(qp: &QuboProblem, params: &SaParams) -> Result<SampleSet> {
    if params.n_samples == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if params.sweeps == 0 {
        return Err(Error::InvalidArgument("sweeps must be at least 1".into()));
    }
    if !(params.beta_min > 0.0 && params.beta_min < params.beta_max && params.beta_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "beta range must satisfy 0 < beta_min < beta_max, got ({}, {})",
            params.beta_min, params.beta_max
        )));
    }
    let start = Instant::now();
    let betas = beta_ladder(params.sweeps, params.beta_min, params.beta_max);
    let samples = (0..params.n_samples as u64)
        .into_par_iter()
        .map(|chain| {
            let bits = anneal_chain(qp, &betas, params.seed, chain);
            Sample {
                energy: qp.energy(&bits),
                bits,
                source: SampleSource::Sa,
                seed: params.seed,
                replica: chain,
            }
        })
        .collect();
    Ok(SampleSet {
        samples,
        schedule: ScheduleSpec::default(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Packs bits eight per byte, first bit most significant, as lowercase hex.
pub fn pack_bits(bits: &[u8]) -> String {
    let bytes: Vec<u8> = bits
        .chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (k, &b)| acc | (b & 1) << (7 - k)))
        .collect();
    hex::encode(bytes)
}

pub fn unpack_bits(text: &str, n: usize) -> Result<Vec<u8>> {
    let bytes = hex::decode(text).map_err(|e| Error::parse("bits", e.to_string()))?;
    if bytes.len() != n.div_ceil(8) {
        return Err(Error::parse("bits", format!("{} bytes cannot hold exactly {n} bits", bytes.len())));
    }
    Ok((0..n).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect())
}

/// One persisted sample with the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub bits: String,
    pub n: usize,
    pub energy: f64,
    pub source: SampleSource,
    pub seed: u64,
    pub replica: u64,
    pub schedule: ScheduleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<u32>,
}

impl SampleRecord {
    pub fn new(sample: &Sample, schedule: ScheduleSpec, penalty: Option<f64>, accuracy: Option<u32>) -> Self {
        SampleRecord {
            bits: pack_bits(&sample.bits),
            n: sample.bits.len(),
            energy: sample.energy,
            source: sample.source,
            seed: sample.seed,
            replica: sample.replica,
            schedule,
            penalty,
            accuracy,
        }
    }

    pub fn unpacked(&self) -> Result<Vec<u8>> {
        unpack_bits(&self.bits, self.n)
    }

    pub fn to_sample(&self) -> Result<Sample> {
        Ok(Sample {
            bits: self.unpacked()?,
            energy: self.energy,
            source: self.source,
            seed: self.seed,
            replica: self.replica,
        })
    }
}

pub fn write_records<W: Write>(records: &[SampleRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<jsonl>", e))?;
    }
    Ok(())
}

/// Writes (or with `append`, extends) a JSONL results file.
pub fn save_records(records: &[SampleRecord], path: impl AsRef<Path>, append: bool) -> Result<()> {
    let path = path.as_ref();
    let file = File::options()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_records(records, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SampleRecord = serde_json::from_str(&line).map_err(|e| Error::parse(format!("{}:{}", path.display(), k + 1), e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}
