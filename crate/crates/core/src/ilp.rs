//! The allocation ILP in block-matrix form `A x + b + s = 0`, its
//! feasibility check, and an exhaustive reference solver.
//!
//! All coefficients are stored as integers scaled by `2^scale_bits`, so every
//! constraint test is exact. Row blocks are demands (`G`), circuit paths
//! (`H | -I`) and nodes (`0 | φ`); columns are pattern selectors `g` followed
//! by circuit counts `ω`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathgen::PathCatalog;
use crate::traffic::{discretize, DemandSet, Dyadic, DEFAULT_CIRCUIT_RATE_GBPS};

pub const DEFAULT_ORACLE_BUDGET: u128 = 10_000_000;

/// Model parameters. `eta_max`/`omega_max` default by network size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IlpConfig {
    pub xi: f64,
    pub a: u32,
    pub eta_max: u64,
    pub omega_max: u64,
    pub penalty: f64,
}

impl IlpConfig {
    /// Transceiver and circuit-count limits by number of nodes.
    pub fn for_network_size(n_nodes: usize) -> Self {
        let (eta_max, omega_max) = match n_nodes {
            0..=4 => (15, 3),
            5..=7 => (31, 3),
            8..=11 => (63, 3),
            12 => (63, 7),
            _ => (127, 7),
        };
        IlpConfig {
            xi: DEFAULT_CIRCUIT_RATE_GBPS,
            a: 1,
            eta_max,
            omega_max,
            penalty: 4.0,
        }
    }

    pub fn with_accuracy(mut self, a: u32) -> Self {
        self.a = a;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(Error::InvalidArgument(format!("xi must be positive, got {}", self.xi)));
        }
        if self.a == 0 || self.a > 20 {
            return Err(Error::InvalidArgument(format!("accuracy digits must be in 1..=20, got {}", self.a)));
        }
        if self.eta_max == 0 || self.omega_max == 0 {
            return Err(Error::InvalidArgument("eta_max and omega_max must be positive".into()));
        }
        if !(self.penalty >= 1.0 && self.penalty.is_finite()) {
            return Err(Error::InvalidArgument(format!("penalty must be >= 1, got {}", self.penalty)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowLabel {
    Demand(usize),
    Circuit(usize),
    Node(usize),
    Generic(usize),
}

impl RowLabel {
    fn render(&self) -> String {
        match self {
            RowLabel::Demand(i) => format!("d:{i}"),
            RowLabel::Circuit(i) => format!("c:{i}"),
            RowLabel::Node(i) => format!("v:{i}"),
            RowLabel::Generic(i) => format!("r:{i}"),
        }
    }

    fn parse(text: &str) -> Option<Self> {
        let (kind, idx) = text.split_once(':')?;
        let idx = idx.parse().ok()?;
        Some(match kind {
            "d" => RowLabel::Demand(idx),
            "c" => RowLabel::Circuit(idx),
            "v" => RowLabel::Node(idx),
            "r" => RowLabel::Generic(idx),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarLabel {
    Pattern { pattern: usize, demand: usize },
    Circuits(usize),
    Generic(usize),
}

impl VarLabel {
    fn render(&self) -> String {
        match self {
            VarLabel::Pattern { pattern, demand } => format!("g:{pattern}:{demand}"),
            VarLabel::Circuits(c) => format!("w:{c}"),
            VarLabel::Generic(j) => format!("x:{j}"),
        }
    }

    fn parse(text: &str) -> Option<Self> {
        let mut parts = text.split(':');
        let kind = parts.next()?;
        let first = parts.next()?.parse().ok()?;
        let label = match kind {
            "g" => VarLabel::Pattern {
                pattern: first,
                demand: parts.next()?.parse().ok()?,
            },
            "w" => VarLabel::Circuits(first),
            "x" => VarLabel::Generic(first),
            _ => return None,
        };
        parts.next().is_none().then_some(label)
    }
}

/// Slack domain `{0, 2^-frac_bits, …, int_max}` of an inequality row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlackBound {
    pub int_max: u64,
    pub frac_bits: u32,
}

/// Network structure behind an instance, used by the exhaustive oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkLayout {
    pub n_demands: usize,
    pub n_patterns: usize,
    pub n_circuits: usize,
    pub n_nodes: usize,
    pub pattern_demand: Vec<usize>,
    pub pattern_circuits: Vec<Vec<usize>>,
    /// 0-based endpoint rows of each circuit path.
    pub circuit_endpoints: Vec<(usize, usize)>,
    /// Discretized demands `h̄_d`, scaled by `2^scale_bits`.
    pub hbar_scaled: Vec<i64>,
    pub eta: Vec<u64>,
    pub omega_max: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlpInstance {
    pub scale_bits: u32,
    /// Sparse rows of `A · 2^scale_bits`, sorted by column.
    pub rows: Vec<Vec<(usize, i64)>>,
    /// `b · 2^scale_bits`.
    pub rhs: Vec<i64>,
    /// Objective `c`.
    pub cost: Vec<i64>,
    pub var_upper: Vec<u64>,
    pub var_labels: Vec<VarLabel>,
    pub row_labels: Vec<RowLabel>,
    /// `None` for equality rows.
    pub slack: Vec<Option<SlackBound>>,
    pub network: Option<NetworkLayout>,
}

/// Pattern selection `g` and circuit counts `ω`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSolution {
    pub g: Vec<u8>,
    pub omega: Vec<u64>,
    pub cost: u64,
}

impl NetworkSolution {
    pub fn new(g: Vec<u8>, omega: Vec<u64>) -> Self {
        let cost = omega.iter().sum();
        NetworkSolution { g, omega, cost }
    }

    pub fn to_x(&self) -> Vec<i64> {
        self.g
            .iter()
            .map(|&v| i64::from(v))
            .chain(self.omega.iter().map(|&w| w as i64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    /// Equality row with `A x + b ≠ 0`.
    Equality,
    /// Inequality row with `A x + b > 0`.
    Inequality,
    /// Variable above its upper bound.
    Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub row: Option<RowLabel>,
    pub var: Option<VarLabel>,
    /// `A x + b` for row violations, excess over the bound for variables.
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl IlpInstance {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn scale(&self) -> f64 {
        (1u64 << self.scale_bits) as f64
    }

    pub fn a_value(&self, row: usize, col: usize) -> i64 {
        self.rows[row]
            .binary_search_by_key(&col, |&(c, _)| c)
            .map(|i| self.rows[row][i].1)
            .unwrap_or(0)
    }

    /// Generic constructor with structural checks.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        scale_bits: u32,
        rows: Vec<Vec<(usize, i64)>>,
        rhs: Vec<i64>,
        cost: Vec<i64>,
        var_upper: Vec<u64>,
        var_labels: Vec<VarLabel>,
        row_labels: Vec<RowLabel>,
        slack: Vec<Option<SlackBound>>,
    ) -> Result<Self> {
        let k = rows.len();
        let m = cost.len();
        if rhs.len() != k || row_labels.len() != k || slack.len() != k {
            return Err(Error::Dimension(format!("{k} rows but rhs/labels/slack have {}/{}/{}", rhs.len(), row_labels.len(), slack.len())));
        }
        if var_upper.len() != m || var_labels.len() != m {
            return Err(Error::Dimension(format!("{m} variables but bounds/labels have {}/{}", var_upper.len(), var_labels.len())));
        }
        let mut rows = rows;
        for (r, row) in rows.iter_mut().enumerate() {
            row.retain(|&(_, v)| v != 0);
            row.sort_unstable_by_key(|&(c, _)| c);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Dimension(format!("row {r} has a repeated column")));
            }
            if row.iter().any(|&(c, _)| c >= m) {
                return Err(Error::Dimension(format!("row {r} references a column beyond {m}")));
            }
        }
        if let Some(bad) = slack.iter().flatten().find(|s| s.frac_bits > scale_bits) {
            return Err(Error::InvalidArgument(format!("slack resolution 2^-{} finer than instance scale 2^-{scale_bits}", bad.frac_bits)));
        }
        Ok(IlpInstance {
            scale_bits,
            rows,
            rhs,
            cost,
            var_upper,
            var_labels,
            row_labels,
            slack,
            network: None,
        })
    }

    /// `(A x + b) · 2^scale_bits` for integer `x`.
    pub fn residual_scaled(&self, x: &[i64]) -> Vec<i64> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, &b)| row.iter().map(|&(c, v)| v * x[c]).sum::<i64>() + b)
            .collect()
    }

    pub fn objective(&self, x: &[i64]) -> i64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Checks `x` against every row and variable bound.
    pub fn check_assignment(&self, x: &[i64]) -> Result<Feasibility> {
        if x.len() != self.n_vars() {
            return Err(Error::Dimension(format!("expected {} variables, got {}", self.n_vars(), x.len())));
        }
        let scale = self.scale();
        let mut violations = Vec::new();
        for (r, res) in self.residual_scaled(x).into_iter().enumerate() {
            let kind = match self.slack[r] {
                None if res != 0 => ViolationKind::Equality,
                Some(_) if res > 0 => ViolationKind::Inequality,
                _ => continue,
            };
            violations.push(Violation {
                kind,
                row: Some(self.row_labels[r]),
                var: None,
                amount: res as f64 / scale,
            });
        }
        for (j, (&v, &upper)) in x.iter().zip(&self.var_upper).enumerate() {
            if v < 0 || v as u64 > upper {
                violations.push(Violation {
                    kind: ViolationKind::Bound,
                    row: None,
                    var: Some(self.var_labels[j]),
                    amount: if v < 0 { v as f64 } else { (v as u64 - upper) as f64 },
                });
            }
        }
        Ok(Feasibility {
            feasible: violations.is_empty(),
            violations,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let scale = self.scale();
        let _ = writeln!(out, "ILP {} {} {}", self.n_rows(), self.n_vars(), self.scale_bits);
        for j in 0..self.n_vars() {
            let _ = writeln!(out, "var {j} {} {} {}", self.var_labels[j].render(), self.var_upper[j], self.cost[j]);
        }
        for r in 0..self.n_rows() {
            let b = self.rhs[r] as f64 / scale;
            match self.slack[r] {
                None => {
                    let _ = writeln!(out, "row {r} {} eq {b}", self.row_labels[r].render());
                }
                Some(s) => {
                    let _ = writeln!(out, "row {r} {} le {b} {} {}", self.row_labels[r].render(), s.int_max, s.frac_bits);
                }
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                let _ = writeln!(out, "a {r} {c} {}", v as f64 / scale);
            }
        }
        if let Some(net) = &self.network {
            let _ = writeln!(out, "network {} {} {} {} {}", net.n_demands, net.n_patterns, net.n_circuits, net.n_nodes, net.omega_max);
            for (d, h) in net.hbar_scaled.iter().enumerate() {
                let _ = writeln!(out, "demand {d} {}", *h as f64 / scale);
            }
            for (t, cs) in net.pattern_circuits.iter().enumerate() {
                let list: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(out, "pattern {t} {} {}", net.pattern_demand[t], list.join(","));
            }
            for (c, (u, v)) in net.circuit_endpoints.iter().enumerate() {
                let _ = writeln!(out, "circuit {c} {u} {v}");
            }
            for (v, eta) in net.eta.iter().enumerate() {
                let _ = writeln!(out, "eta {v} {eta}");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse("ilp line 1", "empty file"))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 4 || head[0] != "ILP" {
            return Err(Error::parse("ilp line 1", "expected 'ILP K M scale_bits'"));
        }
        let num = |s: &str, at: usize| -> Result<usize> {
            s.parse().map_err(|_| Error::parse(format!("ilp line {}", at + 1), format!("bad integer '{s}'")))
        };
        let k = num(head[1], 0)?;
        let m = num(head[2], 0)?;
        let scale_bits = num(head[3], 0)? as u32;
        let scale = (1u64 << scale_bits) as f64;
        let scaled = |s: &str, at: usize| -> Result<i64> {
            let v: f64 = s.parse().map_err(|_| Error::parse(format!("ilp line {}", at + 1), format!("bad number '{s}'")))?;
            let x = v * scale;
            if x.fract() != 0.0 {
                return Err(Error::parse(format!("ilp line {}", at + 1), format!("{v} is not a multiple of 2^-{scale_bits}")));
            }
            Ok(x as i64)
        };

        let mut var_upper = vec![0; m];
        let mut cost = vec![0; m];
        let mut var_labels = vec![VarLabel::Generic(0); m];
        let mut rhs = vec![0; k];
        let mut row_labels = vec![RowLabel::Generic(0); k];
        let mut slack = vec![None; k];
        let mut rows = vec![Vec::new(); k];
        let mut net_header: Option<(usize, usize, usize, usize, u64)> = None;
        let mut hbar = Vec::new();
        let mut pattern_demand = Vec::new();
        let mut pattern_circuits = Vec::new();
        let mut circuit_endpoints = Vec::new();
        let mut eta = Vec::new();

        for (at, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            let loc = || format!("ilp line {}", at + 1);
            let bad_label = || Error::parse(loc(), "bad label");
            let index = |s: &str, limit: usize| -> Result<usize> {
                let i = num(s, at)?;
                if i >= limit {
                    return Err(Error::parse(loc(), format!("index {i} out of range {limit}")));
                }
                Ok(i)
            };
            match (f[0], f.len()) {
                ("var", 5) => {
                    let j = index(f[1], m)?;
                    var_labels[j] = VarLabel::parse(f[2]).ok_or_else(bad_label)?;
                    var_upper[j] = num(f[3], at)? as u64;
                    cost[j] = f[4].parse().map_err(|_| Error::parse(loc(), "bad cost"))?;
                }
                ("row", 5) | ("row", 7) => {
                    let r = index(f[1], k)?;
                    row_labels[r] = RowLabel::parse(f[2]).ok_or_else(bad_label)?;
                    rhs[r] = scaled(f[4], at)?;
                    slack[r] = match (f[3], f.len()) {
                        ("eq", 5) => None,
                        ("le", 7) => Some(SlackBound {
                            int_max: num(f[5], at)? as u64,
                            frac_bits: num(f[6], at)? as u32,
                        }),
                        _ => return Err(Error::parse(loc(), "row kind must be 'eq' or 'le int_max frac_bits'")),
                    };
                }
                ("a", 4) => {
                    let r = index(f[1], k)?;
                    let c = index(f[2], m)?;
                    rows[r].push((c, scaled(f[3], at)?));
                }
                ("network", 6) => {
                    net_header = Some((num(f[1], at)?, num(f[2], at)?, num(f[3], at)?, num(f[4], at)?, num(f[5], at)? as u64));
                }
                ("demand", 3) => hbar.push(scaled(f[2], at)?),
                ("pattern", 4) => {
                    pattern_demand.push(num(f[2], at)?);
                    pattern_circuits.push(f[3].split(',').map(|c| num(c, at)).collect::<Result<Vec<_>>>()?);
                }
                ("circuit", 4) => circuit_endpoints.push((num(f[2], at)?, num(f[3], at)?)),
                ("eta", 3) => eta.push(num(f[2], at)? as u64),
                _ => return Err(Error::parse(loc(), format!("unrecognized line '{line}'"))),
            }
        }

        let mut inst = IlpInstance::new(scale_bits, rows, rhs, cost, var_upper, var_labels, row_labels, slack)?;
        if let Some((n_demands, n_patterns, n_circuits, n_nodes, omega_max)) = net_header {
            if hbar.len() != n_demands || pattern_demand.len() != n_patterns || circuit_endpoints.len() != n_circuits || eta.len() != n_nodes {
                return Err(Error::parse("ilp network section", "section lengths disagree with header"));
            }
            inst.network = Some(NetworkLayout {
                n_demands,
                n_patterns,
                n_circuits,
                n_nodes,
                pattern_demand,
                pattern_circuits,
                circuit_endpoints,
                hbar_scaled: hbar,
                eta,
                omega_max,
            });
        }
        Ok(inst)
    }

    /// Evaluates `g` as a network solution: feasibility of `(g, ω)`.
    pub fn check_feasible(&self, sol: &NetworkSolution) -> Result<Feasibility> {
        let net = self.network.as_ref().ok_or_else(|| Error::InvalidArgument("instance has no network layout".into()))?;
        if sol.g.len() != net.n_patterns || sol.omega.len() != net.n_circuits {
            return Err(Error::Dimension(format!(
                "solution has {}+{} entries, instance expects {}+{}",
                sol.g.len(),
                sol.omega.len(),
                net.n_patterns,
                net.n_circuits
            )));
        }
        self.check_assignment(&sol.to_x())
    }
}

/// Assembles `A`, `b`, `c` with rows ordered demands, circuit paths, nodes
/// and columns ordered patterns, circuit paths.
pub fn assemble(catalog: &PathCatalog, demands: &DemandSet, cfg: &IlpConfig) -> Result<IlpInstance> {
    cfg.validate()?;
    if catalog.n_demands() != demands.len() {
        return Err(Error::Dimension(format!("catalog has {} demands, demand set has {}", catalog.n_demands(), demands.len())));
    }
    let n_d = catalog.n_demands();
    let n_t = catalog.n_patterns();
    let n_c = catalog.n_circuits();
    let n_v = catalog.n_nodes;
    let a = cfg.a;
    let one = 1i64 << a;

    let hbar: Vec<Dyadic> = demands.demands.iter().map(|d| discretize(d.volume_gbps, cfg.xi, a)).collect();
    let mut rows: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n_d + n_c + n_v];
    for (t, p) in catalog.patterns.iter().enumerate() {
        rows[p.demand].push((t, one));
        for &c in &p.circuits {
            rows[n_d + c].push((t, hbar[p.demand].scaled_to(a)));
        }
    }
    for (c, cp) in catalog.circuit_paths.iter().enumerate() {
        rows[n_d + c].push((n_t + c, -one));
        rows[n_v_row(n_d, n_c, cp.source())].push((n_t + c, one));
        rows[n_v_row(n_d, n_c, cp.target())].push((n_t + c, one));
    }

    let mut rhs = vec![-one; n_d];
    rhs.extend(std::iter::repeat_n(0, n_c));
    rhs.extend(std::iter::repeat_n(-(cfg.eta_max as i64) * one, n_v));

    let mut cost = vec![0; n_t];
    cost.extend(std::iter::repeat_n(1, n_c));
    let mut var_upper = vec![1; n_t];
    var_upper.extend(std::iter::repeat_n(cfg.omega_max, n_c));
    let var_labels = catalog
        .patterns
        .iter()
        .enumerate()
        .map(|(t, p)| VarLabel::Pattern { pattern: t, demand: p.demand })
        .chain((0..n_c).map(VarLabel::Circuits))
        .collect();
    let row_labels = (0..n_d)
        .map(RowLabel::Demand)
        .chain((0..n_c).map(RowLabel::Circuit))
        .chain((0..n_v).map(RowLabel::Node))
        .collect();
    let slack = std::iter::repeat_n(None, n_d)
        .chain(std::iter::repeat_n(Some(SlackBound { int_max: cfg.omega_max, frac_bits: a }), n_c))
        .chain(std::iter::repeat_n(Some(SlackBound { int_max: cfg.eta_max, frac_bits: 0 }), n_v))
        .collect();

    let mut inst = IlpInstance::new(a, rows, rhs, cost, var_upper, var_labels, row_labels, slack)?;
    inst.network = Some(NetworkLayout {
        n_demands: n_d,
        n_patterns: n_t,
        n_circuits: n_c,
        n_nodes: n_v,
        pattern_demand: catalog.patterns.iter().map(|p| p.demand).collect(),
        pattern_circuits: catalog.patterns.iter().map(|p| p.circuits.clone()).collect(),
        circuit_endpoints: catalog.circuit_paths.iter().map(|c| (c.source() - 1, c.target() - 1)).collect(),
        hbar_scaled: hbar.iter().map(|h| h.scaled_to(a)).collect(),
        eta: vec![cfg.eta_max; n_v],
        omega_max: cfg.omega_max,
    });
    Ok(inst)
}

fn n_v_row(n_d: usize, n_c: usize, node_id: usize) -> usize {
    n_d + n_c + node_id - 1
}

/// Circuit counts `ω_c = ⌈load_c⌉` induced by a pattern choice per demand.
fn minimal_omega(net: &NetworkLayout, scale_bits: u32, choice: &[usize], load: &mut [i64], omega: &mut [u64]) {
    load.iter_mut().for_each(|l| *l = 0);
    for &t in choice {
        let h = net.hbar_scaled[net.pattern_demand[t]];
        for &c in &net.pattern_circuits[t] {
            load[c] += h;
        }
    }
    for (w, &l) in omega.iter_mut().zip(load.iter()) {
        *w = Dyadic::new(l, scale_bits).ceil() as u64;
    }
}

fn nodes_within_budget(net: &NetworkLayout, omega: &[u64], used: &mut [u64]) -> bool {
    used.iter_mut().for_each(|u| *u = 0);
    for (c, &(u, v)) in net.circuit_endpoints.iter().enumerate() {
        used[u] += omega[c];
        used[v] += omega[c];
    }
    used.iter().zip(&net.eta).all(|(u, e)| u <= e)
}

/// Exhaustive reference solver over all pattern selections.
///
/// For each selection the cheapest `ω` is the ceiling of the circuit load, so
/// enumerating selections is exact. Ties resolve to the first selection in
/// mixed-radix order (demand 0 most significant).
pub fn oracle_solve(inst: &IlpInstance, budget: u128) -> Result<NetworkSolution> {
    let net = inst.network.as_ref().ok_or_else(|| Error::InvalidArgument("instance has no network layout".into()))?;
    let mut radices = vec![Vec::new(); net.n_demands];
    for (t, &d) in net.pattern_demand.iter().enumerate() {
        radices[d].push(t);
    }
    if radices.iter().any(|r| r.is_empty()) {
        return Err(Error::Infeasible);
    }
    let total: u128 = radices.iter().map(|r| r.len() as u128).product();
    if total > budget {
        return Err(Error::BudgetExceeded { needed: total, budget });
    }
    let total = total as u64;

    let evaluate = |index: u64, choice: &mut Vec<usize>, load: &mut Vec<i64>, omega: &mut Vec<u64>, used: &mut Vec<u64>| -> Option<u64> {
        let mut rest = index;
        choice.clear();
        choice.resize(radices.len(), 0);
        for d in (0..radices.len()).rev() {
            let r = radices[d].len() as u64;
            choice[d] = radices[d][(rest % r) as usize];
            rest /= r;
        }
        minimal_omega(net, inst.scale_bits, choice, load, omega);
        if omega.iter().any(|&w| w > net.omega_max) || !nodes_within_budget(net, omega, used) {
            return None;
        }
        Some(omega.iter().sum())
    };

    let chunk = 1u64 << 14;
    let n_chunks = total.div_ceil(chunk);
    let best = (0..n_chunks)
        .into_par_iter()
        .filter_map(|ci| {
            let mut choice = Vec::new();
            let mut load = vec![0; net.n_circuits];
            let mut omega = vec![0; net.n_circuits];
            let mut used = vec![0; net.n_nodes];
            let mut best: Option<(u64, u64)> = None;
            for index in ci * chunk..((ci + 1) * chunk).min(total) {
                if let Some(cost) = evaluate(index, &mut choice, &mut load, &mut omega, &mut used) {
                    if best.is_none_or(|(bc, _)| cost < bc) {
                        best = Some((cost, index));
                    }
                }
            }
            best
        })
        .min()
        .ok_or(Error::Infeasible)?;

    let mut choice = Vec::new();
    let mut load = vec![0; net.n_circuits];
    let mut omega = vec![0; net.n_circuits];
    let mut used = vec![0; net.n_nodes];
    evaluate(best.1, &mut choice, &mut load, &mut omega, &mut used);
    let mut g = vec![0u8; net.n_patterns];
    for &t in &choice {
        g[t] = 1;
    }
    Ok(NetworkSolution::new(g, omega))
}

/// Solution picking the first pattern of every demand with `ω = ⌈load⌉`.
pub fn first_pattern_solution(inst: &IlpInstance) -> Result<NetworkSolution> {
    let net = inst.network.as_ref().ok_or_else(|| Error::InvalidArgument("instance has no network layout".into()))?;
    let mut choice = Vec::with_capacity(net.n_demands);
    for d in 0..net.n_demands {
        let t = net.pattern_demand.iter().position(|&pd| pd == d).ok_or(Error::Infeasible)?;
        choice.push(t);
    }
    let mut load = vec![0; net.n_circuits];
    let mut omega = vec![0; net.n_circuits];
    minimal_omega(net, inst.scale_bits, &choice, &mut load, &mut omega);
    let mut g = vec![0u8; net.n_patterns];
    for &t in &choice {
        g[t] = 1;
    }
    Ok(NetworkSolution::new(g, omega))
}

pub fn save_ilp(inst: &IlpInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, inst.to_text()).map_err(|e| Error::io(path, e))
}

pub fn load_ilp(path: impl AsRef<Path>) -> Result<IlpInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    IlpInstance::from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathgen::{build_catalog, DEFAULT_REACH_KM};
    use crate::topology::build_growing_topology;
    use crate::traffic::{sample_demands, Demand};

    fn three_node(k: usize, volume: Option<f64>) -> (PathCatalog, DemandSet, IlpInstance) {
        let t = build_growing_topology(3).unwrap();
        let mut d = sample_demands(&t, 75.0, 10.0, 42).unwrap();
        if let Some(v) = volume {
            d.demands.iter_mut().for_each(|x| x.volume_gbps = v);
        }
        let cat = build_catalog(&t, &d, k, 4, DEFAULT_REACH_KM).unwrap();
        let inst = assemble(&cat, &d, &IlpConfig::for_network_size(3)).unwrap();
        (cat, d, inst)
    }

    #[test]
    fn table_defaults_by_size() {
        let pick = |n| {
            let c = IlpConfig::for_network_size(n);
            (c.eta_max, c.omega_max)
        };
        assert_eq!(pick(3), (15, 3));
        assert_eq!(pick(4), (15, 3));
        assert_eq!(pick(6), (31, 3));
        assert_eq!(pick(9), (63, 3));
        assert_eq!(pick(12), (63, 7));
        assert_eq!(pick(16), (127, 7));
    }

    #[test]
    fn direct_only_block_shapes() {
        let (_, d, inst) = three_node(1, None);
        assert_eq!(inst.n_vars(), 12);
        assert_eq!(inst.n_rows(), 15);
        // G = I
        for r in 0..6 {
            assert_eq!(inst.rows[r], vec![(r, 2)]);
        }
        // H diagonal with h̄ in the pattern column, -I on ω
        for c in 0..6 {
            let h = discretize(d.demands[c].volume_gbps, 100.0, 1).scaled_to(1);
            assert_eq!(inst.a_value(6 + c, c), h);
            assert_eq!(inst.a_value(6 + c, 6 + c), -2);
        }
        // φ: two ones per ω column
        for c in 0..6 {
            let ones = (12..15).filter(|&r| inst.a_value(r, 6 + c) == 2).count();
            assert_eq!(ones, 2);
        }
        assert_eq!(inst.cost, vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
        assert_eq!(&inst.rhs[..6], &[-2; 6]);
        assert_eq!(&inst.rhs[6..12], &[0; 6]);
        assert_eq!(&inst.rhs[12..], &[-30; 3]);
    }

    #[test]
    fn g_block_groups_patterns_by_demand() {
        let t = build_growing_topology(3).unwrap();
        let d = DemandSet {
            seed: 0,
            mu: 1.0,
            sigma: 0.0,
            demands: vec![
                Demand { source: 1, target: 2, volume_gbps: 60.0 },
                Demand { source: 1, target: 3, volume_gbps: 60.0 },
            ],
        };
        let mut cat = build_catalog(&t, &d, 2, 4, DEFAULT_REACH_KM).unwrap();
        // keep |T_1| = 2, |T_2| = 1
        cat.patterns = vec![cat.patterns[0].clone(), cat.patterns[1].clone(), cat.patterns[3].clone()];
        let inst = assemble(&cat, &d, &IlpConfig::for_network_size(3)).unwrap();
        let g: Vec<Vec<i64>> = (0..2).map(|r| (0..3).map(|c| inst.a_value(r, c) / 2).collect()).collect();
        assert_eq!(g, vec![vec![1, 1, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn feasibility_predicate() {
        let (_, _, inst) = three_node(2, None);
        let sol = first_pattern_solution(&inst).unwrap();
        assert!(inst.check_feasible(&sol).unwrap().feasible);

        let zero_g = NetworkSolution::new(vec![0; sol.g.len()], sol.omega.clone());
        let f = inst.check_feasible(&zero_g).unwrap();
        assert!(!f.feasible);
        assert!(f.violations.iter().all(|v| matches!(v.row, Some(RowLabel::Demand(_)))));
        assert_eq!(f.violations.len(), 6);

        let zero_w = NetworkSolution::new(sol.g.clone(), vec![0; sol.omega.len()]);
        let f = inst.check_feasible(&zero_w).unwrap();
        assert!(!f.feasible);
        assert!(f
            .violations
            .iter()
            .all(|v| v.kind == ViolationKind::Inequality && matches!(v.row, Some(RowLabel::Circuit(_)))));
    }

    #[test]
    fn oracle_direct_three_quarter_loads() {
        let (_, _, inst) = three_node(1, Some(75.0));
        let sol = oracle_solve(&inst, DEFAULT_ORACLE_BUDGET).unwrap();
        assert_eq!(sol.cost, 6);
        assert!(inst.check_feasible(&sol).unwrap().feasible);
    }

    #[test]
    fn oracle_reports_infeasible_and_budget() {
        let t = build_growing_topology(3).unwrap();
        let mut d = sample_demands(&t, 75.0, 10.0, 42).unwrap();
        d.demands.iter_mut().for_each(|x| x.volume_gbps = 1000.0);
        let cat = build_catalog(&t, &d, 1, 4, DEFAULT_REACH_KM).unwrap();
        let inst = assemble(&cat, &d, &IlpConfig::for_network_size(3)).unwrap();
        assert!(matches!(oracle_solve(&inst, DEFAULT_ORACLE_BUDGET), Err(Error::Infeasible)));

        let (_, _, inst) = three_node(2, None);
        assert!(matches!(oracle_solve(&inst, 100), Err(Error::BudgetExceeded { needed: 729, .. })));
    }

    #[test]
    fn oracle_beats_random_selections() {
        use rand::{Rng, SeedableRng};
        let (_, _, inst) = three_node(2, None);
        let best = oracle_solve(&inst, DEFAULT_ORACLE_BUDGET).unwrap();
        let net = inst.network.clone().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let choice: Vec<usize> = (0..net.n_demands)
                .map(|d| {
                    let opts: Vec<usize> = (0..net.n_patterns).filter(|&t| net.pattern_demand[t] == d).collect();
                    opts[rng.random_range(0..opts.len())]
                })
                .collect();
            let mut load = vec![0; net.n_circuits];
            let mut omega = vec![0; net.n_circuits];
            minimal_omega(&net, inst.scale_bits, &choice, &mut load, &mut omega);
            let mut g = vec![0; net.n_patterns];
            choice.iter().for_each(|&t| g[t] = 1);
            let sol = NetworkSolution::new(g, omega);
            if inst.check_feasible(&sol).unwrap().feasible {
                assert!(sol.cost >= best.cost);
            }
        }
    }

    #[test]
    fn oracle_omega_is_minimal_ceiling() {
        let (_, _, inst) = three_node(2, None);
        let sol = oracle_solve(&inst, DEFAULT_ORACLE_BUDGET).unwrap();
        let x = sol.to_x();
        let res = inst.residual_scaled(&x);
        let n_d = 6;
        let scale = inst.scale() as i64;
        for c in 0..sol.omega.len() {
            // residual row = load - ω, must lie in (-1, 0]
            let r = res[n_d + c];
            assert!(r <= 0 && r > -scale, "circuit {c} residual {r}");
        }
    }

    #[test]
    fn text_round_trip() {
        let (_, _, inst) = three_node(2, None);
        let back = IlpInstance::from_text(&inst.to_text()).unwrap();
        assert_eq!(back, inst);
        assert!(IlpInstance::from_text("ILP 1 1 0\nbogus").is_err());
    }
}
