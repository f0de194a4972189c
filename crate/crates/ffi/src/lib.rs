//! C interface to `nqs-core`: Hamiltonian handles, exact ground energies,
//! FLOP estimators, V-scores and scaling-curve frontiers.
//!
//! Every fallible function returns an [`NqsStatus`] code and writes results
//! through out-pointers. On failure a description is available from
//! [`nqs_last_error`] on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nqs_core::ansatz::Architecture;
use nqs_core::flops::{sampling_flops, simplified_flops, training_flops, FlopInputs};
use nqs_core::oracle::{ground_energy, OracleError};
use nqs_core::pauli::{group_flip_patterns, parse_hamiltonian, search_space_size, PauliHamiltonian};
use nqs_core::scaling::{efficient_frontier, optimal_allocation, Metric, ScalingCurve};
use nqs_core::vmc::{vscore, EnergyEstimate};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NqsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    TooLarge = 4,
    Undefined = 5,
    Runtime = 6,
    Panic = 7,
}

pub const NQS_ARCH_MADE: c_int = 0;
pub const NQS_ARCH_TRANSFORMER: c_int = 1;
pub const NQS_ARCH_RETNET: c_int = 2;

pub const NQS_METRIC_VSCORE: c_int = 0;
pub const NQS_METRIC_ABSERR: c_int = 1;

/// Opaque Hamiltonian handle.
pub struct NqsHamiltonian(PauliHamiltonian);

/// Opaque fitted-curve handle.
pub struct NqsCurve(ScalingCurve);

/// Inputs of the per-architecture training FLOP estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NqsFlopInputs {
    pub n_qubits: f64,
    /// Unique batch size B.
    pub batch: f64,
    pub steps: f64,
    /// Number of distinct bit-flip groups M.
    pub flip_groups: f64,
    pub n_mod: f64,
    pub n_ph: f64,
    pub n_blocks: f64,
    pub d_model: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(NqsStatus, String);

type FfiResult = Result<(), Failure>;

fn fail<T>(status: NqsStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> FfiResult) -> NqsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => NqsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NqsStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    match p.as_mut() {
        Some(r) => Ok(r),
        None => fail(NqsStatus::NullPointer, format!("{name} is null")),
    }
}

unsafe fn in_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => fail(NqsStatus::NullPointer, format!("{name} is null")),
    }
}

unsafe fn in_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(NqsStatus::NullPointer, format!("{name} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(NqsStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

fn architecture(code: c_int) -> Result<Architecture, Failure> {
    match code {
        NQS_ARCH_MADE => Ok(Architecture::Made),
        NQS_ARCH_TRANSFORMER => Ok(Architecture::Transformer),
        NQS_ARCH_RETNET => Ok(Architecture::RetNet),
        _ => fail(NqsStatus::InvalidArgument, format!("unknown architecture code {code}")),
    }
}

fn metric(code: c_int) -> Result<Metric, Failure> {
    match code {
        NQS_METRIC_VSCORE => Ok(Metric::VScore),
        NQS_METRIC_ABSERR => Ok(Metric::AbsError),
        _ => fail(NqsStatus::InvalidArgument, format!("unknown metric code {code}")),
    }
}

fn finite(v: f64, name: &str) -> Result<f64, Failure> {
    if v.is_finite() {
        Ok(v)
    } else {
        fail(NqsStatus::InvalidArgument, format!("{name} is not finite"))
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nqs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn nqs_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nqs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses Hamiltonian text. The handle must be released with
/// [`nqs_hamiltonian_free`].
#[no_mangle]
pub unsafe extern "C" fn nqs_hamiltonian_parse(text: *const c_char, out: *mut *mut NqsHamiltonian) -> NqsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let text = in_str(text, "text")?;
        let h = parse_hamiltonian(text).or_else(|e| fail(NqsStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(NqsHamiltonian(h)));
        Ok(())
    })
}

/// Reads and parses a Hamiltonian file.
#[no_mangle]
pub unsafe extern "C" fn nqs_hamiltonian_load(path: *const c_char, out: *mut *mut NqsHamiltonian) -> NqsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let path = in_str(path, "path")?;
        let text = std::fs::read_to_string(path).or_else(|e| fail(NqsStatus::Runtime, format!("{path}: {e}")))?;
        let h = parse_hamiltonian(&text).or_else(|e| fail(NqsStatus::Parse, format!("{path}: {e}")))?;
        *out = Box::into_raw(Box::new(NqsHamiltonian(h)));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nqs_hamiltonian_free(h: *mut NqsHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

#[no_mangle]
pub unsafe extern "C" fn nqs_hamiltonian_n_qubits(h: *const NqsHamiltonian, out: *mut usize) -> NqsStatus {
    guard(|| {
        *out_ref(out, "out")? = in_ref(h, "h")?.0.n_qubits();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn nqs_hamiltonian_n_terms(h: *const NqsHamiltonian, out: *mut usize) -> NqsStatus {
    guard(|| {
        *out_ref(out, "out")? = in_ref(h, "h")?.0.terms().len();
        Ok(())
    })
}

/// Number of distinct bit-flip patterns M.
#[no_mangle]
pub unsafe extern "C" fn nqs_hamiltonian_flip_groups(h: *const NqsHamiltonian, out: *mut usize) -> NqsStatus {
    guard(|| {
        *out_ref(out, "out")? = group_flip_patterns(&in_ref(h, "h")?.0).count();
        Ok(())
    })
}

/// Size of the particle-number sector; fails with `Undefined` when the file
/// declares no electron count.
#[no_mangle]
pub unsafe extern "C" fn nqs_hamiltonian_search_space(h: *const NqsHamiltonian, out: *mut u64) -> NqsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let h = &in_ref(h, "h")?.0;
        if h.n_electrons().is_none() {
            return fail(NqsStatus::Undefined, "Hamiltonian declares no electron count");
        }
        *out = h.search_space_size().or_else(|e| fail(NqsStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Exact ground energy within the particle sector (whole space when no
/// sector is declared).
#[no_mangle]
pub unsafe extern "C" fn nqs_hamiltonian_ground_energy(h: *const NqsHamiltonian, out: *mut f64) -> NqsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = match ground_energy(&in_ref(h, "h")?.0) {
            Ok(e) => e,
            Err(e @ OracleError::TooLarge { .. }) => return fail(NqsStatus::TooLarge, e.to_string()),
            Err(e) => return fail(NqsStatus::Runtime, e.to_string()),
        };
        Ok(())
    })
}

/// Constrained configuration-space size for `n_qubits` spin orbitals.
#[no_mangle]
pub unsafe extern "C" fn nqs_search_space_size(
    n_qubits: usize,
    n_electrons: usize,
    multiplicity: usize,
    out: *mut u64,
) -> NqsStatus {
    guard(|| {
        *out_ref(out, "out")? = search_space_size(n_qubits, n_electrons, multiplicity)
            .or_else(|e| fail(NqsStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// V-score `n Var / (E - offset)^2`; `Undefined` when the denominator
/// vanishes or the result is not finite.
#[no_mangle]
pub unsafe extern "C" fn nqs_vscore(
    n_qubits: usize,
    energy: f64,
    variance: f64,
    identity_offset: f64,
    out: *mut f64,
) -> NqsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let est = EnergyEstimate { energy, variance, unique_count: 0 };
        match vscore(&est, n_qubits, identity_offset) {
            Some(v) => {
                *out = v;
                Ok(())
            }
            None => fail(NqsStatus::Undefined, "V-score undefined for these inputs"),
        }
    })
}

/// Total training FLOPs for `architecture` (one of the `NQS_ARCH_*` codes).
#[no_mangle]
pub unsafe extern "C" fn nqs_training_flops(
    architecture_code: c_int,
    inputs: *const NqsFlopInputs,
    out: *mut f64,
) -> NqsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let arch = architecture(architecture_code)?;
        let x = in_ref(inputs, "inputs")?;
        let fields = [x.n_qubits, x.batch, x.steps, x.flip_groups, x.n_mod, x.n_ph, x.n_blocks, x.d_model];
        if fields.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return fail(NqsStatus::InvalidArgument, "FLOP inputs must be finite and nonnegative");
        }
        let core = FlopInputs {
            n_qubits: x.n_qubits,
            batch: x.batch,
            steps: x.steps,
            flip_groups: x.flip_groups,
            n_mod: x.n_mod,
            n_ph: x.n_ph,
            n_blocks: x.n_blocks,
            d_model: x.d_model,
        };
        *out = training_flops(arch, &core);
        Ok(())
    })
}

/// Autoregressive sampling FLOPs for a modulus forward cost `f_mod`.
#[no_mangle]
pub unsafe extern "C" fn nqs_sampling_flops(
    f_mod: f64,
    steps: f64,
    batch: u64,
    n_qubits: usize,
    out: *mut f64,
) -> NqsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        finite(f_mod, "f_mod")?;
        finite(steps, "steps")?;
        *out = sampling_flops(f_mod, steps, batch, n_qubits);
        Ok(())
    })
}

/// Simplified estimate `k S D' N`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn nqs_simplified_flops(
    architecture_code: c_int,
    flip_groups: f64,
    n_qubits: f64,
    d_model: f64,
    search_space: f64,
    d_prime: f64,
    n_params: f64,
    out: *mut f64,
) -> NqsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let arch = architecture(architecture_code)?;
        for (v, name) in [
            (flip_groups, "flip_groups"),
            (n_qubits, "n_qubits"),
            (d_model, "d_model"),
            (search_space, "search_space"),
            (d_prime, "d_prime"),
            (n_params, "n_params"),
        ] {
            finite(v, name)?;
        }
        *out = simplified_flops(arch, flip_groups, n_qubits, d_model, search_space, d_prime, n_params);
        Ok(())
    })
}

/// Creates a curve `A0 + A1 / N^alpha1 + A2 / D'^alpha2`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn nqs_curve_new(
    metric_code: c_int,
    a0: f64,
    a1: f64,
    a2: f64,
    alpha1: f64,
    alpha2: f64,
    out: *mut *mut NqsCurve,
) -> NqsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let m = metric(metric_code)?;
        for (v, name) in [(a0, "a0"), (a1, "a1"), (a2, "a2"), (alpha1, "alpha1"), (alpha2, "alpha2")] {
            finite(v, name)?;
        }
        let curve = ScalingCurve::new("ffi", m, [a0, a1, a2], [alpha1, alpha2]);
        *out = Box::into_raw(Box::new(NqsCurve(curve)));
        Ok(())
    })
}

/// Parses a curve document as written by `nqs fit`.
#[no_mangle]
pub unsafe extern "C" fn nqs_curve_parse(text: *const c_char, out: *mut *mut NqsCurve) -> NqsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let text = in_str(text, "text")?;
        let curve = ScalingCurve::from_toml(text).or_else(|e| fail(NqsStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(NqsCurve(curve)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn nqs_curve_free(c: *mut NqsCurve) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

#[no_mangle]
pub unsafe extern "C" fn nqs_curve_predict(c: *const NqsCurve, n_k: f64, d_prime: f64, out: *mut f64) -> NqsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let c = &in_ref(c, "curve")?.0;
        if !(n_k > 0.0 && d_prime > 0.0) {
            return fail(NqsStatus::InvalidArgument, "N and D' must be positive");
        }
        *out = c.predict(n_k, d_prime);
        Ok(())
    })
}

/// Frontier `D' = coefficient * N^exponent`.
#[no_mangle]
pub unsafe extern "C" fn nqs_curve_frontier(
    c: *const NqsCurve,
    coefficient: *mut f64,
    exponent: *mut f64,
) -> NqsStatus {
    guard(|| {
        let coefficient = out_ref(coefficient, "coefficient")?;
        let exponent = out_ref(exponent, "exponent")?;
        let f = efficient_frontier(&in_ref(c, "curve")?.0).or_else(|e| fail(NqsStatus::InvalidArgument, e.to_string()))?;
        *coefficient = f.coefficient;
        *exponent = f.exponent;
        Ok(())
    })
}

/// Frontier allocation for budget `C = k N D'`.
#[no_mangle]
pub unsafe extern "C" fn nqs_curve_allocation(
    c: *const NqsCurve,
    budget: f64,
    k: f64,
    n_k: *mut f64,
    d_prime: *mut f64,
) -> NqsStatus {
    guard(|| {
        let n_out = out_ref(n_k, "n_k")?;
        let d_out = out_ref(d_prime, "d_prime")?;
        let (n, d) = optimal_allocation(&in_ref(c, "curve")?.0, budget, k)
            .or_else(|e| fail(NqsStatus::InvalidArgument, e.to_string()))?;
        *n_out = n;
        *d_out = d;
        Ok(())
    })
}
