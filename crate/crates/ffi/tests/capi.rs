use std::ffi::{CStr, CString};
use std::ptr;

use nqs_ffi::*;

const H2: &str = include_str!("../../../data/h2_sto3g.ham");

fn last_error() -> String {
    let p = nqs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn hamiltonian_handle_lifecycle() {
    let text = CString::new(H2).unwrap();
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(nqs_hamiltonian_parse(text.as_ptr(), &mut h), NqsStatus::Ok);
        let (mut n, mut space, mut e) = (0usize, 0u64, 0.0f64);
        assert_eq!(nqs_hamiltonian_n_qubits(h, &mut n), NqsStatus::Ok);
        assert_eq!(n, 4);
        assert_eq!(nqs_hamiltonian_search_space(h, &mut space), NqsStatus::Ok);
        assert_eq!(space, 4);
        assert_eq!(nqs_hamiltonian_ground_energy(h, &mut e), NqsStatus::Ok);
        assert!((e + 1.137283834489).abs() < 1e-6);
        let mut m = 0usize;
        assert_eq!(nqs_hamiltonian_flip_groups(h, &mut m), NqsStatus::Ok);
        assert!(m >= 1);
        nqs_hamiltonian_free(h);
        nqs_hamiltonian_free(ptr::null_mut());
    }
}

#[test]
fn errors_set_status_and_message() {
    let bad = CString::new("%n_qubits 2\n1.0 XQ\n").unwrap();
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(nqs_hamiltonian_parse(bad.as_ptr(), &mut h), NqsStatus::Parse);
        assert!(h.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(nqs_hamiltonian_parse(ptr::null(), &mut h), NqsStatus::NullPointer);
        assert!(last_error().contains("text"));
        let mut n = 0usize;
        assert_eq!(nqs_hamiltonian_n_qubits(ptr::null(), &mut n), NqsStatus::NullPointer);
        let missing = CString::new("/nonexistent/file.ham").unwrap();
        assert_eq!(nqs_hamiltonian_load(missing.as_ptr(), &mut h), NqsStatus::Runtime);
        nqs_clear_error();
        assert!(nqs_last_error().is_null());
    }
}

#[test]
fn oracle_refuses_large_systems() {
    let text = CString::new("%n_qubits 30\n1.0 ZIIIIIIIIIIIIIIIIIIIIIIIIIIIII\n").unwrap();
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(nqs_hamiltonian_parse(text.as_ptr(), &mut h), NqsStatus::Ok);
        let mut e = 0.0;
        assert_eq!(nqs_hamiltonian_ground_energy(h, &mut e), NqsStatus::TooLarge);
        let mut s = 0u64;
        assert_eq!(nqs_hamiltonian_search_space(h, &mut s), NqsStatus::Undefined);
        nqs_hamiltonian_free(h);
    }
}

#[test]
fn search_space_and_vscore() {
    let mut s = 0u64;
    unsafe {
        assert_eq!(nqs_search_space_size(14, 10, 1, &mut s), NqsStatus::Ok);
        assert_eq!(s, 441);
        assert_eq!(nqs_search_space_size(4, 9, 1, &mut s), NqsStatus::InvalidArgument);
        let mut v = 0.0;
        // cos(pi/8)|0> + sin(pi/8)|1> under Z: E = 1/sqrt2, Var = 1/2
        let e = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(nqs_vscore(1, e, 0.5, 0.0, &mut v), NqsStatus::Ok);
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(nqs_vscore(1, 0.0, 0.5, 0.0, &mut v), NqsStatus::Undefined);
    }
}

#[test]
fn flop_estimators() {
    let x = NqsFlopInputs {
        n_qubits: 4.0,
        batch: 16.0,
        steps: 1.0,
        flip_groups: 2.0,
        n_mod: 100.0,
        n_ph: 50.0,
        n_blocks: 1.0,
        d_model: 8.0,
    };
    let mut f = 0.0;
    unsafe {
        assert_eq!(nqs_training_flops(NQS_ARCH_MADE, &x, &mut f), NqsStatus::Ok);
        assert_eq!(f, 33600.0);
        assert_eq!(nqs_training_flops(7, &x, &mut f), NqsStatus::InvalidArgument);
        assert_eq!(nqs_training_flops(NQS_ARCH_MADE, ptr::null(), &mut f), NqsStatus::NullPointer);
        let neg = NqsFlopInputs { batch: -1.0, ..x };
        assert_eq!(nqs_training_flops(NQS_ARCH_RETNET, &neg, &mut f), NqsStatus::InvalidArgument);
        assert_eq!(nqs_sampling_flops(1.0, 1.0, 4, 4, &mut f), NqsStatus::Ok);
        assert_eq!(f, 5.0);
        assert_eq!(nqs_simplified_flops(NQS_ARCH_MADE, 2.0, 4.0, 8.0, 4.0, 10.0, 1.0, &mut f), NqsStatus::Ok);
        assert_eq!(f, 3.0 * 2.0 * 4.0 * 10.0);
    }
}

#[test]
fn curve_frontier_and_allocation() {
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(nqs_curve_new(NQS_METRIC_VSCORE, 9.37e-11, 2.58e-5, 5.53e-2, 1.459, 2.828, &mut c), NqsStatus::Ok);
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(nqs_curve_frontier(c, &mut a, &mut b), NqsStatus::Ok);
        assert!((a - 0.053).abs() < 5e-4 && (b - 0.516).abs() < 5e-4);
        let (mut n, mut d) = (0.0, 0.0);
        assert_eq!(nqs_curve_allocation(c, 1e9, 30.0, &mut n, &mut d), NqsStatus::Ok);
        assert!((30.0 * n * d / 1e9 - 1.0).abs() < 1e-12);
        assert_eq!(nqs_curve_allocation(c, -1.0, 30.0, &mut n, &mut d), NqsStatus::InvalidArgument);
        let mut p = 0.0;
        assert_eq!(nqs_curve_predict(c, 1.0, 1.0, &mut p), NqsStatus::Ok);
        assert!((p - (9.37e-11 + 2.58e-5 + 5.53e-2)).abs() < 1e-15);
        nqs_curve_free(c);

        let doc = CString::new("ansatz = \"made\"\nmetric = \"abserr\"\nA0 = 0.0\nA1 = 1.0\nA2 = 1.0\nalpha1 = 1.0\nalpha2 = 1.0\nr2_log = 0.5\n").unwrap();
        assert_eq!(nqs_curve_parse(doc.as_ptr(), &mut c), NqsStatus::Ok);
        assert_eq!(nqs_curve_frontier(c, &mut a, &mut b), NqsStatus::Ok);
        assert_eq!((a, b), (1.0, 1.0));
        nqs_curve_free(c);
        let zero = CString::new("ansatz = 1").unwrap();
        assert_eq!(nqs_curve_parse(zero.as_ptr(), &mut c), NqsStatus::Parse);
        assert!(c.is_null());
        assert_eq!(nqs_curve_new(5, 0.0, 1.0, 1.0, 1.0, 1.0, &mut c), NqsStatus::InvalidArgument);
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(nqs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
