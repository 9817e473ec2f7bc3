//! Penalty-method compilation of an [`IlpInstance`] into a QUBO
//! `X²(q) = qᵀQq + C`, its Ising form, and a sparse coordinate file format.
//!
//! Integer variables and slacks are written as weighted sums of bits,
//! `x = Z_x q_x` and `s = Z_s q_s`. With `B = A Z_x` the blocks are
//!
//! ```text
//! Q_xx = BᵀB + diag{(2bᵀA + cᵀ/p) Z_x}
//! Q_xs = Q_sxᵀ = Bᵀ Z_s
//! Q_ss = Z_sᵀ Z_s + 2 diag{Z_sᵀ b}
//! Q    = p [Q_xx Q_xs; Q_sx Q_ss],  C = p ‖b‖²
//! ```
//!
//! so that `qᵀQq + C = cᵀx + p ‖A x + b + s‖²` for every bit vector.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ilp::IlpInstance;

/// Bits needed to represent every integer in `0..=max`.
pub fn bit_count(max: u64) -> u32 {
    u64::BITS - max.leading_zeros()
}

/// Consecutive bits encoding one integer (or dyadic) quantity as
/// `Σ 2^exponent · q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitGroup {
    pub first_bit: usize,
    /// Weights as powers of two, most significant first.
    pub exponents: Vec<i32>,
}

impl BitGroup {
    fn new(first_bit: usize, int_max: u64, frac_bits: u32) -> Self {
        let r = bit_count(int_max) as i32;
        let exponents = (-(frac_bits as i32)..r).rev().collect();
        BitGroup { first_bit, exponents }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn bits(&self) -> std::ops::Range<usize> {
        self.first_bit..self.first_bit + self.len()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.exponents.iter().map(|&e| 2f64.powi(e))
    }

    /// Value scaled by `2^scale_bits`.
    fn decode_scaled(&self, bits: &[u8], scale_bits: u32) -> i64 {
        self.exponents
            .iter()
            .zip(&bits[self.bits()])
            .filter(|(_, &b)| b != 0)
            .map(|(&e, _)| 1i64 << (e + scale_bits as i32))
            .sum()
    }

    /// Writes the binary expansion of `scaled / 2^scale_bits`; `false` if the
    /// value is not representable.
    fn encode_scaled(&self, scaled: i64, scale_bits: u32, bits: &mut [u8]) -> bool {
        let mut rest = scaled;
        for (&e, bit) in self.exponents.iter().zip(&mut bits[self.first_bit..]) {
            let w = 1i64 << (e + scale_bits as i32);
            *bit = u8::from(rest >= w);
            if rest >= w {
                rest -= w;
            }
        }
        rest == 0
    }
}

/// The maps `Z_x` and `Z_s` as bit groups laid out in `q = [q_x; q_s]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitEncoding {
    pub scale_bits: u32,
    pub vars: Vec<BitGroup>,
    /// One group per constraint row; empty for equality rows.
    pub slacks: Vec<BitGroup>,
    pub n_x_bits: usize,
    pub n_s_bits: usize,
}

impl BitEncoding {
    pub fn n_bits(&self) -> usize {
        self.n_x_bits + self.n_s_bits
    }

    pub fn decode_x(&self, bits: &[u8]) -> Vec<i64> {
        self.vars.iter().map(|g| g.decode_scaled(bits, 0)).collect()
    }

    /// Slack values scaled by `2^scale_bits`.
    pub fn decode_slack_scaled(&self, bits: &[u8]) -> Vec<i64> {
        self.slacks.iter().map(|g| g.decode_scaled(bits, self.scale_bits)).collect()
    }

    /// Bit vector for `x` and scaled slacks `s`, if representable.
    pub fn encode(&self, x: &[i64], slack_scaled: &[i64]) -> Option<Vec<u8>> {
        if x.len() != self.vars.len() || slack_scaled.len() != self.slacks.len() {
            return None;
        }
        let mut bits = vec![0u8; self.n_bits()];
        for (g, &v) in self.vars.iter().zip(x) {
            if v < 0 || !g.encode_scaled(v, 0, &mut bits) {
                return None;
            }
        }
        for (g, &s) in self.slacks.iter().zip(slack_scaled) {
            if s < 0 || !g.encode_scaled(s, self.scale_bits, &mut bits) {
                return None;
            }
        }
        Some(bits)
    }
}

/// One bit per binary selector, `⌈log2(max+1)⌉` bits per bounded integer,
/// plus fractional slack bits where a row needs sub-unit resolution.
pub fn build_encoding(inst: &IlpInstance) -> BitEncoding {
    let mut next = 0;
    let vars: Vec<BitGroup> = inst
        .var_upper
        .iter()
        .map(|&upper| {
            let g = BitGroup::new(next, upper, 0);
            next += g.len();
            g
        })
        .collect();
    let n_x_bits = next;
    let slacks: Vec<BitGroup> = inst
        .slack
        .iter()
        .map(|s| {
            let g = match s {
                Some(s) => BitGroup::new(next, s.int_max, s.frac_bits),
                None => BitGroup {
                    first_bit: next,
                    exponents: Vec::new(),
                },
            };
            next += g.len();
            g
        })
        .collect();
    BitEncoding {
        scale_bits: inst.scale_bits,
        vars,
        slacks,
        n_x_bits,
        n_s_bits: next - n_x_bits,
    }
}

/// Symmetric QUBO matrix in sparse form with its constant offset.
#[derive(Debug, Clone)]
pub struct QuboProblem {
    n: usize,
    diag: Vec<f64>,
    /// Symmetric off-diagonal entries `Q_ij = Q_ji`, `i < j`, sorted.
    upper: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
    pub offset: f64,
    pub penalty: f64,
}

impl PartialEq for QuboProblem {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.diag == other.diag
            && self.upper == other.upper
            && self.offset == other.offset
            && self.penalty == other.penalty
    }
}

impl QuboProblem {
    /// From the symmetric entries; `upper` holds `(i, j, Q_ij)` with `i < j`.
    pub fn from_symmetric(n: usize, diag: Vec<f64>, upper: Vec<(usize, usize, f64)>, offset: f64, penalty: f64) -> Result<Self> {
        if diag.len() != n {
            return Err(Error::Dimension(format!("diagonal has {} entries for N = {n}", diag.len())));
        }
        let mut map = BTreeMap::new();
        for (i, j, v) in upper {
            if i >= j || j >= n {
                return Err(Error::Dimension(format!("entry ({i}, {j}) is not strictly upper within N = {n}")));
            }
            *map.entry((i, j)).or_insert(0.0) += v;
        }
        let upper: Vec<(usize, usize, f64)> = map.into_iter().filter(|&(_, v)| v != 0.0).map(|((i, j), v)| (i, j, v)).collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j, v) in &upper {
            adjacency[i].push((j, v));
            adjacency[j].push((i, v));
        }
        Ok(QuboProblem {
            n,
            diag,
            upper,
            adjacency,
            offset,
            penalty,
        })
    }

    /// From a dense symmetric matrix.
    pub fn from_dense(m: &DMatrix<f64>, offset: f64) -> Result<Self> {
        ensure_symmetric(m)?;
        let n = m.nrows();
        let diag = (0..n).map(|i| m[(i, i)]).collect();
        let upper = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, m[(i, j)]))).collect();
        QuboProblem::from_symmetric(n, diag, upper, offset, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[(usize, usize, f64)] {
        &self.upper
    }

    /// Off-diagonal neighbours of bit `i` with symmetric weights `Q_ij`.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Number of couplers (nonzero off-diagonal pairs).
    pub fn n_couplings(&self) -> usize {
        self.upper.len()
    }

    /// Nonzero entries of the triangular form.
    pub fn nnz(&self) -> usize {
        self.upper.len() + self.diag.iter().filter(|&&v| v != 0.0).count()
    }

    /// `qᵀQq` without the offset.
    pub fn quadratic_energy(&self, bits: &[u8]) -> f64 {
        let linear: f64 = self.diag.iter().zip(bits).filter(|(_, &b)| b != 0).map(|(d, _)| d).sum();
        let pairs: f64 = self
            .upper
            .iter()
            .filter(|&&(i, j, _)| bits[i] != 0 && bits[j] != 0)
            .map(|&(_, _, v)| v)
            .sum();
        linear + 2.0 * pairs
    }

    /// `qᵀQq + C`.
    pub fn energy(&self, bits: &[u8]) -> f64 {
        self.quadratic_energy(bits) + self.offset
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, &d) in self.diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        for &(i, j, v) in &self.upper {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Upper-triangular entries `(i, j, value)` with `i ≤ j` such that
    /// `Σ value q_i q_j = qᵀQq`.
    pub fn triangular_entries(&self) -> Vec<(usize, usize, f64)> {
        let mut entries: Vec<(usize, usize, f64)> = self
            .diag
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 0.0)
            .map(|(i, &d)| (i, i, d))
            .chain(self.upper.iter().map(|&(i, j, v)| (i, j, 2.0 * v)))
            .collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        entries
    }

    pub fn to_text(&self) -> String {
        let entries = self.triangular_entries();
        let mut out = String::new();
        let _ = writeln!(out, "QUBO {} {} {} {}", self.n, entries.len(), self.offset, self.penalty);
        for (i, j, v) in entries {
            let _ = writeln!(out, "{i} {j} {v}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse("qubo line 1", "empty file"))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 5 || head[0] != "QUBO" {
            return Err(Error::parse("qubo line 1", "expected 'QUBO N nnz offset penalty'"));
        }
        let bad = |at: usize, what: &str| Error::parse(format!("qubo line {}", at + 1), what.to_string());
        let n: usize = head[1].parse().map_err(|_| bad(0, "bad N"))?;
        let nnz: usize = head[2].parse().map_err(|_| bad(0, "bad nnz"))?;
        let offset: f64 = head[3].parse().map_err(|_| bad(0, "bad offset"))?;
        let penalty: f64 = head[4].parse().map_err(|_| bad(0, "bad penalty"))?;
        let mut diag = vec![0.0; n];
        let mut upper = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (at, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad(at, "expected 'i j value'"));
            }
            let i: usize = f[0].parse().map_err(|_| bad(at, "bad row index"))?;
            let j: usize = f[1].parse().map_err(|_| bad(at, "bad column index"))?;
            let v: f64 = f[2].parse().map_err(|_| bad(at, "bad value"))?;
            if i > j || j >= n {
                return Err(bad(at, "index must satisfy i <= j < N"));
            }
            if !seen.insert((i, j)) {
                return Err(bad(at, "duplicate entry"));
            }
            if i == j {
                diag[i] = v;
            } else {
                upper.push((i, j, v / 2.0));
            }
        }
        if seen.len() != nnz {
            return Err(Error::parse("qubo header", format!("header announces {nnz} entries, found {}", seen.len())));
        }
        QuboProblem::from_symmetric(n, diag, upper, offset, penalty)
    }
}

fn ensure_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("matrix is {}x{}", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            if m[(i, j)] != m[(j, i)] {
                return Err(Error::InvalidArgument(format!("matrix is not symmetric at ({i}, {j}); symmetrize first")));
            }
        }
    }
    Ok(())
}

/// Sparse accumulator for symmetric entries keyed `(i, j)` with `i ≤ j`.
#[derive(Default)]
struct SymAccumulator(BTreeMap<(usize, usize), f64>);

impl SymAccumulator {
    fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            *self.0.entry((i.min(j), i.max(j))).or_insert(0.0) += v;
        }
    }
}

/// Per constraint row, the x-bits it touches with coefficients `(A Z_x)_{k,j}`.
fn az_rows(inst: &IlpInstance, enc: &BitEncoding) -> Vec<Vec<(usize, f64)>> {
    let scale = inst.scale();
    inst.rows
        .iter()
        .map(|row| {
            row.iter()
                .flat_map(|&(v, a)| {
                    let a = a as f64 / scale;
                    let g = &enc.vars[v];
                    g.bits().zip(g.weights().collect::<Vec<_>>()).map(move |(bit, w)| (bit, a * w))
                })
                .collect()
        })
        .collect()
}

/// `Q_xx / p` split into its penalty part `BᵀB + diag{2bᵀA Z_x}` and the
/// objective part `diag{cᵀ Z_x}` (which carries the `1/p`).
fn block_xx(inst: &IlpInstance, enc: &BitEncoding, az: &[Vec<(usize, f64)>], penalty: &mut SymAccumulator, objective: &mut SymAccumulator) {
    let scale = inst.scale();
    for (k, row) in az.iter().enumerate() {
        let b = inst.rhs[k] as f64 / scale;
        for (ii, &(i, bi)) in row.iter().enumerate() {
            penalty.add(i, i, bi * bi + 2.0 * b * bi);
            for &(j, bj) in &row[ii + 1..] {
                penalty.add(i, j, bi * bj);
            }
        }
    }
    for (v, g) in enc.vars.iter().enumerate() {
        let c = inst.cost[v] as f64;
        for (bit, w) in g.bits().zip(g.weights()) {
            objective.add(bit, bit, c * w);
        }
    }
}

/// `Q_xs = (A Z_x)ᵀ Z_s`.
fn block_xs(enc: &BitEncoding, az: &[Vec<(usize, f64)>], penalty: &mut SymAccumulator) {
    for (k, row) in az.iter().enumerate() {
        let g = &enc.slacks[k];
        for (s_bit, u) in g.bits().zip(g.weights()) {
            for &(x_bit, bx) in row {
                penalty.add(x_bit, s_bit, bx * u);
            }
        }
    }
}

/// `Q_ss = Z_sᵀ Z_s + 2 diag{Z_sᵀ b}`.
fn block_ss(inst: &IlpInstance, enc: &BitEncoding, penalty: &mut SymAccumulator) {
    let scale = inst.scale();
    for (k, g) in enc.slacks.iter().enumerate() {
        let b = inst.rhs[k] as f64 / scale;
        let bits: Vec<(usize, f64)> = g.bits().zip(g.weights()).collect();
        for (ii, &(i, ui)) in bits.iter().enumerate() {
            penalty.add(i, i, ui * ui + 2.0 * ui * b);
            for &(j, uj) in &bits[ii + 1..] {
                penalty.add(i, j, ui * uj);
            }
        }
    }
}

/// Compiles the instance with penalty `p ≥ 1`.
pub fn build_qubo(inst: &IlpInstance, enc: &BitEncoding, penalty: f64) -> Result<QuboProblem> {
    if !(penalty >= 1.0 && penalty.is_finite()) {
        return Err(Error::InvalidArgument(format!("penalty must be >= 1, got {penalty}")));
    }
    if enc.vars.len() != inst.n_vars() || enc.slacks.len() != inst.n_rows() {
        return Err(Error::Dimension("encoding does not match instance".into()));
    }
    let az = az_rows(inst, enc);
    let mut pen = SymAccumulator::default();
    let mut obj = SymAccumulator::default();
    block_xx(inst, enc, &az, &mut pen, &mut obj);
    block_xs(enc, &az, &mut pen);
    block_ss(inst, enc, &mut pen);

    let n = enc.n_bits();
    let mut diag = vec![0.0; n];
    let mut upper = Vec::new();
    for ((i, j), v) in pen.0 {
        if i == j {
            diag[i] += penalty * v;
        } else {
            upper.push((i, j, penalty * v));
        }
    }
    for ((i, _), v) in obj.0 {
        diag[i] += v;
    }
    let scale = inst.scale();
    let b_norm_sq: f64 = inst.rhs.iter().map(|&b| (b as f64 / scale).powi(2)).sum();
    QuboProblem::from_symmetric(n, diag, upper, penalty * b_norm_sq, penalty)
}

/// `cᵀx + p ‖A x + b + s‖²` evaluated directly on the constraint matrix,
/// with `x` and `s` decoded from `bits`.
pub fn penalty_form_energy(inst: &IlpInstance, enc: &BitEncoding, penalty: f64, bits: &[u8]) -> f64 {
    let x = enc.decode_x(bits);
    let s = enc.decode_slack_scaled(bits);
    let scale = inst.scale();
    let residual: f64 = inst
        .residual_scaled(&x)
        .iter()
        .zip(&s)
        .map(|(&r, &s)| ((r + s) as f64 / scale).powi(2))
        .sum();
    inst.objective(&x) as f64 + penalty * residual
}

/// Ising form `σᵀJσ + hᵀσ + g` with `σ = 2q − 1`; `J` has zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem {
    pub h: Vec<f64>,
    /// Symmetric couplings `J_ij = J_ji`, `i < j`.
    pub couplings: Vec<(usize, usize, f64)>,
    pub g_const: f64,
}

impl IsingProblem {
    pub fn energy(&self, spins: &[i8]) -> f64 {
        let field: f64 = self.h.iter().zip(spins).map(|(h, &s)| h * f64::from(s)).sum();
        let pairs: f64 = self
            .couplings
            .iter()
            .map(|&(i, j, v)| v * f64::from(spins[i]) * f64::from(spins[j]))
            .sum();
        2.0 * pairs + field + self.g_const
    }

    pub fn j_dense(&self) -> DMatrix<f64> {
        let n = self.h.len();
        let mut m = DMatrix::zeros(n, n);
        for &(i, j, v) in &self.couplings {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Checks symmetry, then converts.
    pub fn from_dense_qubo(m: &DMatrix<f64>) -> Result<Self> {
        Ok(to_ising(&QuboProblem::from_dense(m, 0.0)?))
    }
}

pub fn spins_from_bits(bits: &[u8]) -> Vec<i8> {
    bits.iter().map(|&b| if b != 0 { 1 } else { -1 }).collect()
}

/// `J = Q_TL/4`, `h = q_T/2 + Q_TL·1/2`, `g = 1ᵀQ_TL1/4 + 1ᵀq_T/2`, where
/// `q_T` is the diagonal of `Q` and `Q_TL` its traceless part. The QUBO
/// offset is not included.
pub fn to_ising(qp: &QuboProblem) -> IsingProblem {
    let n = qp.n();
    let mut h: Vec<f64> = qp.diag().iter().map(|d| d / 2.0).collect();
    let mut off_sum = 0.0;
    for &(i, j, v) in qp.upper() {
        h[i] += v / 2.0;
        h[j] += v / 2.0;
        off_sum += 2.0 * v;
    }
    let trace: f64 = qp.diag().iter().sum();
    debug_assert_eq!(h.len(), n);
    IsingProblem {
        h,
        couplings: qp.upper().iter().map(|&(i, j, v)| (i, j, v / 4.0)).collect(),
        g_const: off_sum / 4.0 + trace / 2.0,
    }
}

/// `tril(Q)ᵀ + triu(Q)`: folds the strictly lower triangle onto the upper
/// one, preserving `qᵀQq`.
pub fn triangular_reduce(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..m.ncols() {
            if i <= j {
                out[(i, j)] += m[(i, j)];
            } else {
                out[(j, i)] += m[(i, j)];
            }
        }
    }
    out
}

pub fn export_qubo(qp: &QuboProblem, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, qp.to_text()).map_err(|e| Error::io(path, e))
}

pub fn import_qubo(path: impl AsRef<Path>) -> Result<QuboProblem> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    QuboProblem::from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::{assemble, IlpConfig, RowLabel, SlackBound, VarLabel};
    use crate::pathgen::build_catalog;
    use crate::topology::build_growing_topology;
    use crate::traffic::sample_demands;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_bits(n: usize) -> impl Iterator<Item = Vec<u8>> {
        (0u32..1 << n).map(move |m| (0..n).map(|i| ((m >> i) & 1) as u8).collect())
    }

    /// minimize x subject to x <= 1, one slack bit
    fn toy() -> IlpInstance {
        IlpInstance::new(
            0,
            vec![vec![(0, 1)]],
            vec![-1],
            vec![1],
            vec![1],
            vec![VarLabel::Generic(0)],
            vec![RowLabel::Generic(0)],
            vec![Some(SlackBound { int_max: 1, frac_bits: 0 })],
        )
        .unwrap()
    }

    #[test]
    fn bit_counts() {
        assert_eq!(bit_count(1), 1);
        assert_eq!(bit_count(3), 2);
        assert_eq!(bit_count(4), 3);
        assert_eq!(bit_count(15), 4);
        assert_eq!(bit_count(0), 0);
    }

    #[test]
    fn encoding_weights() {
        let omega = BitGroup::new(0, 3, 0);
        assert_eq!(omega.weights().collect::<Vec<_>>(), vec![2.0, 1.0]);
        let sv = BitGroup::new(0, 15, 0);
        assert_eq!(sv.weights().collect::<Vec<_>>(), vec![8.0, 4.0, 2.0, 1.0]);
        let sc = BitGroup::new(0, 3, 2);
        assert_eq!(sc.weights().collect::<Vec<_>>(), vec![2.0, 1.0, 0.5, 0.25]);
    }

    #[test]
    fn toy_matches_symbolic_expansion() {
        // 2(x - 1 + s)^2 + x = -x - 2s + 4xs + 2
        let inst = toy();
        let enc = build_encoding(&inst);
        let qp = build_qubo(&inst, &enc, 2.0).unwrap();
        assert_eq!(qp.diag(), &[-1.0, -2.0]);
        assert_eq!(qp.upper(), &[(0, 1, 2.0)]);
        assert_eq!(qp.offset, 2.0);
        let expect = |x: f64, s: f64| -x - 2.0 * s + 4.0 * x * s + 2.0;
        for bits in all_bits(2) {
            assert_eq!(qp.energy(&bits), expect(f64::from(bits[0]), f64::from(bits[1])));
        }
    }

    #[test]
    fn zero_instance_gives_zero_qubo() {
        let inst = IlpInstance::new(
            0,
            vec![vec![]],
            vec![0],
            vec![0],
            vec![1],
            vec![VarLabel::Generic(0)],
            vec![RowLabel::Generic(0)],
            vec![None],
        )
        .unwrap();
        let enc = build_encoding(&inst);
        let qp = build_qubo(&inst, &enc, 1.0).unwrap();
        assert_eq!(qp.nnz(), 0);
        assert_eq!(qp.offset, 0.0);
        assert!(build_qubo(&inst, &enc, 0.5).is_err());
    }

    #[test]
    fn blocks_match_dense_formula() {
        let t = build_growing_topology(3).unwrap();
        let d = sample_demands(&t, 75.0, 10.0, 42).unwrap();
        let cat = build_catalog(&t, &d, 1, 4, 1000.0).unwrap();
        let inst = assemble(&cat, &d, &IlpConfig::for_network_size(3).with_accuracy(2)).unwrap();
        let enc = build_encoding(&inst);
        let p = 4.0;
        let qp = build_qubo(&inst, &enc, p).unwrap();

        let (k, m) = (inst.n_rows(), inst.n_vars());
        let scale = inst.scale();
        let a = DMatrix::from_fn(k, m, |r, c| inst.a_value(r, c) as f64 / scale);
        let b = DMatrix::from_fn(k, 1, |r, _| inst.rhs[r] as f64 / scale);
        let c = DMatrix::from_fn(m, 1, |j, _| inst.cost[j] as f64);
        let zx = DMatrix::from_fn(m, enc.n_x_bits, |v, bit| {
            let g = &enc.vars[v];
            g.bits().position(|x| x == bit).map_or(0.0, |i| 2f64.powi(g.exponents[i]))
        });
        let zs = DMatrix::from_fn(k, enc.n_s_bits, |r, bit| {
            let g = &enc.slacks[r];
            g.bits().position(|x| x == bit + enc.n_x_bits).map_or(0.0, |i| 2f64.powi(g.exponents[i]))
        });
        let lin_x = (b.transpose() * &a * 2.0 + c.transpose() / p) * &zx;
        let qxx = zx.transpose() * a.transpose() * &a * &zx + DMatrix::from_diagonal(&lin_x.transpose().column(0).into_owned());
        let qxs = zx.transpose() * a.transpose() * &zs;
        let lin_s = zs.transpose() * &b * 2.0;
        let qss = zs.transpose() * &zs + DMatrix::from_diagonal(&lin_s.column(0).into_owned());
        let n = enc.n_bits();
        let mut full = DMatrix::zeros(n, n);
        full.view_mut((0, 0), (enc.n_x_bits, enc.n_x_bits)).copy_from(&qxx);
        full.view_mut((0, enc.n_x_bits), qxs.shape()).copy_from(&qxs);
        full.view_mut((enc.n_x_bits, 0), (qxs.ncols(), qxs.nrows())).copy_from(&qxs.transpose());
        full.view_mut((enc.n_x_bits, enc.n_x_bits), qss.shape()).copy_from(&qss);
        full *= p;

        let dense = qp.to_dense();
        assert!((dense - full).abs().max() < 1e-9);
        assert_eq!(qp.offset, p * b.norm_squared());
    }

    #[test]
    fn master_identity_on_three_node_instance() {
        let t = build_growing_topology(3).unwrap();
        let d = sample_demands(&t, 75.0, 10.0, 42).unwrap();
        let cat = build_catalog(&t, &d, 2, 4, 1000.0).unwrap();
        let inst = assemble(&cat, &d, &IlpConfig::for_network_size(3)).unwrap();
        let enc = build_encoding(&inst);
        let qp = build_qubo(&inst, &enc, 4.0).unwrap();
        assert_eq!(qp.n(), 90);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let bits: Vec<u8> = (0..qp.n()).map(|_| rng.random_range(0..2)).collect();
            let lhs = qp.energy(&bits);
            let rhs = penalty_form_energy(&inst, &enc, 4.0, &bits);
            assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        let t = build_growing_topology(3).unwrap();
        let d = sample_demands(&t, 75.0, 10.0, 42).unwrap();
        let cat = build_catalog(&t, &d, 2, 4, 1000.0).unwrap();
        let inst = assemble(&cat, &d, &IlpConfig::for_network_size(3).with_accuracy(3)).unwrap();
        let enc = build_encoding(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let bits: Vec<u8> = (0..enc.n_bits()).map(|_| rng.random_range(0..2)).collect();
            let x = enc.decode_x(&bits);
            let s = enc.decode_slack_scaled(&bits);
            assert_eq!(enc.encode(&x, &s).unwrap(), bits);
        }
        assert!(enc.encode(&vec![2; inst.n_vars()], &vec![0; inst.n_rows()]).is_none());
    }

    #[test]
    fn ising_small_example() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 3.0]);
        let ising = IsingProblem::from_dense_qubo(&q).unwrap();
        assert_eq!(ising.couplings, vec![(0, 1, 0.25)]);
        assert_eq!(ising.h, vec![1.0, 2.0]);
        assert_eq!(ising.g_const, 2.5);
        let qp = QuboProblem::from_dense(&q, 0.0).unwrap();
        for bits in all_bits(2) {
            assert_eq!(ising.energy(&spins_from_bits(&bits)), qp.quadratic_energy(&bits));
        }
        let j = ising.j_dense();
        assert_eq!(j[(0, 0)], 0.0);
        assert_eq!(j[(0, 1)], 0.25);
    }

    #[test]
    fn ising_rejects_asymmetric() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        assert!(IsingProblem::from_dense_qubo(&q).is_err());
        let zero = IsingProblem::from_dense_qubo(&DMatrix::zeros(3, 3)).unwrap();
        assert!(zero.couplings.is_empty());
        assert_eq!(zero.h, vec![0.0; 3]);
        assert_eq!(zero.g_const, 0.0);
    }

    #[test]
    fn triangular_examples() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(triangular_reduce(&m), DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -2.0, 3.0]));
        assert_eq!(triangular_reduce(&d), d);
    }

    #[test]
    fn text_round_trip_and_header() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 9;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                if rng.random_bool(0.6) {
                    let v: f64 = rng.random_range(-3.0..3.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        let qp = QuboProblem::from_dense(&m, 1.0 / 3.0).unwrap();
        let text = qp.to_text();
        let head: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(head[1], "9");
        assert_eq!(head[2].parse::<usize>().unwrap(), qp.nnz());
        assert_eq!(QuboProblem::from_text(&text).unwrap(), qp);
        assert!(QuboProblem::from_text("QUBO 2 1 0 1\n1 0 1.0").is_err());
        assert!(QuboProblem::from_text("QUBO 2 2 0 1\n0 1 1.0").is_err());
    }
}
