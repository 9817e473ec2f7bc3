//! C interface to `netqubo`.
//!
//! Every fallible function returns an [`NqStatus`]; on failure the message is
//! available from [`nq_last_error`] on the same thread. Instances and sample
//! sets are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use netqubo::analysis::{decode_bits, time_to_solution};
use netqubo::ilp::oracle_solve;
use netqubo::pipeline::{Instance, PipelineConfig};
use netqubo::qubo::{export_qubo, QuboProblem};
use netqubo::sampler::{sample_sa, solve_exhaustive, SaParams, Sample};
use netqubo::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    BudgetExceeded = 4,
    Infeasible = 5,
    Parse = 6,
    Io = 7,
    OutOfRange = 8,
    Panic = 9,
    Internal = 10,
}

impl From<&Error> for NqStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::InvalidTopology(_) | Error::NoPath { .. } | Error::ReachExceeded { .. } => {
                NqStatus::InvalidArgument
            }
            Error::Dimension(_) => NqStatus::Dimension,
            Error::BudgetExceeded { .. } => NqStatus::BudgetExceeded,
            Error::Infeasible | Error::EmptyResults(_) => NqStatus::Infeasible,
            Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => NqStatus::Parse,
            Error::Io { .. } => NqStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(NqStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(NqStatus::from(&e), e.to_string())
    }
}

fn null() -> Failure {
    Failure(NqStatus::NullPointer, "null pointer argument".into())
}

/// Runs `f`, records any failure and converts panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NqStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            NqStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null());
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(NqStatus::InvalidArgument, "string is not valid UTF-8".into()))
}

unsafe fn bits_arg<'a>(bits: *const u8, len: usize) -> Result<&'a [u8], Failure> {
    if bits.is_null() {
        return Err(null());
    }
    let bits = std::slice::from_raw_parts(bits, len);
    if bits.iter().any(|&b| b > 1) {
        return Err(Failure(NqStatus::InvalidArgument, "bits must be 0 or 1".into()));
    }
    Ok(bits)
}

unsafe fn out_arg<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(null)
}

/// A compiled instance: ILP, bit encoding and QUBO at one penalty.
pub struct NqInstance {
    instance: Instance,
    qubo: QuboProblem,
}

pub struct NqSampleSet {
    samples: Vec<Sample>,
}

fn build_instance(cfg: &PipelineConfig) -> Result<Box<NqInstance>, Failure> {
    let instance = Instance::build(cfg, cfg.ilp.a)?;
    let qubo = instance.qubo(cfg.penalty)?;
    Ok(Box::new(NqInstance { instance, qubo }))
}

/// Message of the last failure on this thread, or null. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn nq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds an instance from a pipeline config in JSON; missing fields take
/// their defaults.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nq_instance_from_config(config_json: *const c_char, out: *mut *mut NqInstance) -> NqStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        let cfg = PipelineConfig::from_json(str_arg(config_json)?)?;
        *out = Box::into_raw(build_instance(&cfg)?);
        Ok(())
    })
}

/// Growing grid network of `nodes` nodes with default demands and paths.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nq_instance_growing(nodes: usize, accuracy: u32, penalty: f64, out: *mut *mut NqInstance) -> NqStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        let mut cfg = PipelineConfig::default();
        cfg.topology.nodes = nodes;
        cfg.ilp.a = accuracy;
        cfg.penalty = penalty;
        *out = Box::into_raw(build_instance(&cfg)?);
        Ok(())
    })
}

/// # Safety
/// `inst` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nq_instance_free(inst: *mut NqInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// QUBO dimension `N`, triangular nonzeros and off-diagonal couplings.
///
/// # Safety
/// `inst` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn nq_instance_qubo_size(inst: *const NqInstance, n_bits: *mut usize, nnz: *mut usize, couplings: *mut usize) -> NqStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(null)?;
        if let Some(n) = n_bits.as_mut() {
            *n = inst.qubo.n();
        }
        if let Some(n) = nnz.as_mut() {
            *n = inst.qubo.nnz();
        }
        if let Some(n) = couplings.as_mut() {
            *n = inst.qubo.n_couplings();
        }
        Ok(())
    })
}

/// `qᵀQq + C` for one bit vector of length `N`.
///
/// # Safety
/// `bits` must point to `len` readable bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nq_instance_energy(inst: *const NqInstance, bits: *const u8, len: usize, out: *mut f64) -> NqStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(null)?;
        let bits = bits_arg(bits, len)?;
        let out = out_arg(out)?;
        if len != inst.qubo.n() {
            return Err(Error::Dimension(format!("expected {} bits, got {len}", inst.qubo.n())).into());
        }
        *out = inst.qubo.energy(bits);
        Ok(())
    })
}

/// Decodes a bit vector and reports feasibility (0 or 1) and ILP cost.
///
/// # Safety
/// `bits` must point to `len` readable bytes; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn nq_instance_decode(
    inst: *const NqInstance,
    bits: *const u8,
    len: usize,
    feasible: *mut i32,
    cost: *mut i64,
) -> NqStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(null)?;
        let bits = bits_arg(bits, len)?;
        let (feasible, cost) = (out_arg(feasible)?, out_arg(cost)?);
        let d = decode_bits(&inst.instance.ilp, &inst.instance.encoding, bits)?;
        *feasible = i32::from(d.feasible);
        *cost = d.cost;
        Ok(())
    })
}

/// Exact optimum over pattern selections; `NQ_STATUS_INFEASIBLE` if none.
///
/// # Safety
/// `inst` must be a live handle and `cost` valid.
#[no_mangle]
pub unsafe extern "C" fn nq_instance_oracle(inst: *const NqInstance, budget: u64, cost: *mut u64) -> NqStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(null)?;
        let cost = out_arg(cost)?;
        *cost = oracle_solve(&inst.instance.ilp, u128::from(budget))?.cost;
        Ok(())
    })
}

/// Simulated annealing with the default inverse temperature ladder.
///
/// # Safety
/// `inst` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn nq_instance_sample_sa(
    inst: *const NqInstance,
    n_samples: usize,
    sweeps: usize,
    seed: u64,
    out: *mut *mut NqSampleSet,
) -> NqStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(null)?;
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        let params = SaParams {
            n_samples,
            sweeps,
            seed,
            ..SaParams::default()
        };
        let set = sample_sa(&inst.qubo, &params)?;
        *out = Box::into_raw(Box::new(NqSampleSet { samples: set.samples }));
        Ok(())
    })
}

/// Global QUBO minimum by enumeration, as a one-sample set.
///
/// # Safety
/// `inst` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn nq_instance_solve_exhaustive(inst: *const NqInstance, bit_budget: u32, out: *mut *mut NqSampleSet) -> NqStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(null)?;
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        let sample = solve_exhaustive(&inst.qubo, bit_budget)?;
        *out = Box::into_raw(Box::new(NqSampleSet { samples: vec![sample] }));
        Ok(())
    })
}

/// Writes the QUBO in the coordinate text format.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nq_instance_export_qubo(inst: *const NqInstance, path: *const c_char) -> NqStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(null)?;
        export_qubo(&inst.qubo, str_arg(path)?)?;
        Ok(())
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nq_sample_set_len(set: *const NqSampleSet) -> usize {
    set.as_ref().map_or(0, |s| s.samples.len())
}

/// Copies sample `index` into `bits` (capacity `cap`, at least `N`) and its
/// energy into `energy`.
///
/// # Safety
/// `bits` must be writable for `cap` bytes; `energy` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nq_sample_set_get(set: *const NqSampleSet, index: usize, bits: *mut u8, cap: usize, energy: *mut f64) -> NqStatus {
    guard(|| {
        let set = set.as_ref().ok_or_else(null)?;
        let energy = out_arg(energy)?;
        if bits.is_null() {
            return Err(null());
        }
        let sample = set
            .samples
            .get(index)
            .ok_or_else(|| Failure(NqStatus::OutOfRange, format!("index {index} out of range for {} samples", set.samples.len())))?;
        if cap < sample.bits.len() {
            return Err(Failure(NqStatus::OutOfRange, format!("buffer holds {cap} bits, sample has {}", sample.bits.len())));
        }
        std::slice::from_raw_parts_mut(bits, sample.bits.len()).copy_from_slice(&sample.bits);
        *energy = sample.energy;
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nq_sample_set_free(set: *mut NqSampleSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Per-sample and total run time for `n_samples` anneals of `t_ps_us` plus a
/// pause of `t_p_us` microseconds.
///
/// # Safety
/// Output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nq_time_to_solution(t_ps_us: f64, t_p_us: f64, n_samples: u64, per_sample_ms: *mut f64, total_s: *mut f64) -> NqStatus {
    guard(|| {
        let (per, total) = (out_arg(per_sample_ms)?, out_arg(total_s)?);
        let t = time_to_solution(t_ps_us, t_p_us, n_samples)?;
        *per = t.per_sample_ms;
        *total = t.total_s;
        Ok(())
    })
}
