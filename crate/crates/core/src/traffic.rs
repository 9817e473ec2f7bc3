//! Traffic demands between ordered node pairs and their discretization to
//! multiples of a circuit fraction.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Topology;

/// Data rate of a single optical circuit in Gbit/s.
pub const DEFAULT_CIRCUIT_RATE_GBPS: f64 = 100.0;

/// Exact rational `numerator / 2^bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dyadic {
    pub numerator: i64,
    pub bits: u32,
}

impl Dyadic {
    pub fn new(numerator: i64, bits: u32) -> Self {
        Dyadic { numerator, bits }
    }

    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / (1u64 << self.bits) as f64
    }

    /// Numerator at a finer (or equal) resolution `2^-bits`.
    pub fn scaled_to(self, bits: u32) -> i64 {
        assert!(bits >= self.bits, "cannot coarsen a dyadic value");
        self.numerator << (bits - self.bits)
    }

    /// Smallest integer not below the value.
    pub fn ceil(self) -> i64 {
        let denom = 1i64 << self.bits;
        self.numerator.div_euclid(denom) + i64::from(self.numerator.rem_euclid(denom) != 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    #[serde(rename = "src")]
    pub source: usize,
    #[serde(rename = "dst")]
    pub target: usize,
    #[serde(rename = "gbps")]
    pub volume_gbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSet {
    pub seed: u64,
    pub mu: f64,
    pub sigma: f64,
    pub demands: Vec<Demand>,
}

impl DemandSet {
    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    /// Keeps only the first `n` demands.
    pub fn truncated(&self, n: usize) -> DemandSet {
        DemandSet {
            demands: self.demands.iter().take(n).copied().collect(),
            ..self.clone()
        }
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        let n = topology.node_count();
        let mut pairs = std::collections::HashSet::new();
        for d in &self.demands {
            if d.source == d.target {
                return Err(Error::InvalidArgument(format!("demand {}->{} has equal endpoints", d.source, d.target)));
            }
            if d.source == 0 || d.source > n || d.target == 0 || d.target > n {
                return Err(Error::InvalidArgument(format!("demand {}->{} references a missing node", d.source, d.target)));
            }
            if !(d.volume_gbps >= 0.0 && d.volume_gbps.is_finite()) {
                return Err(Error::InvalidArgument(format!("demand {}->{} has invalid volume {}", d.source, d.target, d.volume_gbps)));
            }
            if !pairs.insert((d.source, d.target)) {
                return Err(Error::InvalidArgument(format!("duplicate demand {}->{}", d.source, d.target)));
            }
        }
        Ok(())
    }
}

/// One demand per ordered node pair, volumes drawn i.i.d. from N(mu, sigma)
/// and truncated below at zero.
pub fn sample_demands(topology: &Topology, mu: f64, sigma: f64, seed: u64) -> Result<DemandSet> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be non-negative, got {sigma}")));
    }
    let normal = Normal::new(mu, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = topology.node_count();
    let mut demands = Vec::with_capacity(n * (n - 1));
    for source in 1..=n {
        for target in 1..=n {
            if source == target {
                continue;
            }
            let volume_gbps = normal.sample(&mut rng).max(0.0);
            demands.push(Demand {
                source,
                target,
                volume_gbps,
            });
        }
    }
    Ok(DemandSet {
        seed,
        mu,
        sigma,
        demands,
    })
}

/// `ceil(volume * 2^a / xi) / 2^a`, the demand in circuit units rounded up
/// to the next multiple of `2^-a`.
pub fn discretize(volume_gbps: f64, xi: f64, a: u32) -> Dyadic {
    assert!(xi > 0.0, "circuit rate must be positive");
    let scaled = volume_gbps * (1u64 << a) as f64 / xi;
    // absorb representation noise such as 2.0000000000000004
    let nearest = scaled.round();
    let numerator = if (scaled - nearest).abs() <= 4.0 * f64::EPSILON * nearest.abs().max(1.0) {
        nearest
    } else {
        scaled.ceil()
    };
    Dyadic::new(numerator as i64, a)
}

pub fn load_demands(path: impl AsRef<Path>) -> Result<DemandSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_demands(demands: &DemandSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(demands)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
