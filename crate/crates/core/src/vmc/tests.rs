use super::*;
use crate::ansatz::{AnsatzConfig, LookupState};
use crate::oracle::{build_operator, exact_expectation, ground_state};
use crate::pauli::{feasible_configs, group_flip_patterns, parse_hamiltonian, PauliHamiltonian};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_hamiltonian(n: usize, terms: usize, seed: u64) -> PauliHamiltonian {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = format!("%n_qubits {n}\n");
    for _ in 0..terms {
        let s: String = (0..n).map(|_| ['I', 'X', 'Y', 'Z'][rng.random_range(0..4)]).collect();
        text += &format!("{} {s}\n", rng.random_range(-1.0..1.0));
    }
    parse_hamiltonian(&text).unwrap()
}

fn h2() -> PauliHamiltonian {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/h2_sto3g.ham");
    parse_hamiltonian(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Full-enumeration weights `|psi|^2` and local energies.
fn enumerate(state: &AnsatzState, h: &PauliHamiltonian) -> (Vec<Config>, Vec<f64>, Vec<Complex64>) {
    let configs: Vec<Config> = feasible_configs(h.n_qubits(), state.sector());
    let weights: Vec<f64> = configs
        .iter()
        .map(|&x| (2.0 * state.log_amplitude(x).unwrap().re).exp())
        .collect();
    let locals = local_energies(state, &group_flip_patterns(h), &configs).unwrap();
    (configs, weights, locals)
}

#[test]
fn local_energy_examples() {
    let x = parse_hamiltonian("%n_qubits 1\n1.0 X").unwrap();
    let uniform = LookupState::new(1, [(Config(0), c(1.0, 0.0)), (Config(1), c(1.0, 0.0))]);
    let l = local_energy(&uniform, &group_flip_patterns(&x), Config(0)).unwrap();
    assert!((l - c(1.0, 0.0)).norm() < 1e-15);
    let z = parse_hamiltonian("%n_qubits 1\n0.7 Z").unwrap();
    let l = local_energy(&uniform, &group_flip_patterns(&z), Config(1)).unwrap();
    assert!((l - c(-0.7, 0.0)).norm() < 1e-15);
}

#[test]
fn local_energy_uses_conjugate_matrix_elements() {
    // <0|Y|1> = -i, so l(0) = -i psi(1)/psi(0)
    let y = parse_hamiltonian("%n_qubits 1\n1.0 Y").unwrap();
    let psi = LookupState::new(1, [(Config(0), c(1.0, 0.0)), (Config(1), c(0.0, 1.0))]);
    let l = local_energy(&psi, &group_flip_patterns(&y), Config(0)).unwrap();
    assert!((l - c(1.0, 0.0)).norm() < 1e-15, "{l}");
}

#[test]
fn enumerated_statistics_match_oracle() {
    let h = random_hamiltonian(4, 12, 1);
    for cfg in [
        AnsatzConfig::made(4, vec![8]),
        AnsatzConfig::transformer(4, 8, 1),
        AnsatzConfig::retnet(4, 8, 1),
    ] {
        let s = AnsatzState::new(cfg.with_seed(3)).unwrap();
        let (_, w, l) = enumerate(&s, &h);
        let est = weighted_energy_and_variance(&w, &l).unwrap();
        let (e, var) = exact_expectation(&s, &h).unwrap();
        assert!((est.energy - e).abs() < 1e-10, "{} vs {e}", est.energy);
        assert!((est.variance - var).abs() < 1e-10, "{} vs {var}", est.variance);
    }
}

#[test]
fn energy_and_variance_examples() {
    let est = weighted_energy_and_variance(&[1.0, 3.0], &[c(2.5, 0.0), c(2.5, 0.0)]).unwrap();
    assert_eq!((est.energy, est.variance), (2.5, 0.0));
    let est = weighted_energy_and_variance(&[1.0, 1.0], &[c(0.0, 0.0), c(2.0, 0.0)]).unwrap();
    assert_eq!((est.energy, est.variance), (1.0, 1.0));
    assert!(weighted_energy_and_variance(&[], &[]).is_err());
    // duplicating a configuration with split counts changes nothing
    let a = weighted_energy_and_variance(&[4.0, 2.0], &[c(1.0, 0.5), c(-3.0, 0.0)]).unwrap();
    let b = weighted_energy_and_variance(&[1.0, 3.0, 2.0], &[c(1.0, 0.5), c(1.0, 0.5), c(-3.0, 0.0)]).unwrap();
    assert!((a.energy - b.energy).abs() < 1e-15 && (a.variance - b.variance).abs() < 1e-15);
}

#[test]
fn eigenstate_has_zero_variance_and_vscore() {
    let h = h2();
    let op = build_operator(&h, true).unwrap();
    let (e0, v) = ground_state(&op).unwrap();
    let psi = LookupState::new(4, op.basis().iter().copied().zip(v));
    let configs: Vec<Config> = op.basis().iter().copied().filter(|&x| psi.is_feasible(x)).collect();
    let weights: Vec<f64> = configs.iter().map(|&x| psi.amplitude(x).norm_sqr()).collect();
    let locals = local_energies(&psi, &group_flip_patterns(&h), &configs).unwrap();
    let est = weighted_energy_and_variance(&weights, &locals).unwrap();
    assert!((est.energy - e0).abs() < 1e-10);
    assert!(est.variance < 1e-12);
    assert!(vscore(&est, 4, h.identity_weight()).unwrap() < 1e-10);
}

#[test]
fn vscore_examples() {
    let z = parse_hamiltonian("%n_qubits 1\n1.0 Z").unwrap();
    let t = std::f64::consts::PI / 8.0;
    let psi = LookupState::new(1, [(Config(0), c(t.cos(), 0.0)), (Config(1), c(t.sin(), 0.0))]);
    let configs = [Config(0), Config(1)];
    let weights = [t.cos().powi(2), t.sin().powi(2)];
    let locals = local_energies(&psi, &group_flip_patterns(&z), &configs).unwrap();
    let est = weighted_energy_and_variance(&weights, &locals).unwrap();
    let v = vscore(&est, 1, 0.0).unwrap();
    assert!((v - 1.0).abs() < 1e-10, "{v}");

    let est = EnergyEstimate { energy: -2.1 + 0.5, variance: 4.41e-4, unique_count: 1 };
    assert!((vscore(&est, 14, 0.5).unwrap() - 1.4e-3).abs() < 1e-15);
    let zero = EnergyEstimate { variance: 0.0, ..est };
    assert_eq!(vscore(&zero, 14, 0.5), Some(0.0));
    let singular = EnergyEstimate { energy: 0.5, ..est };
    assert_eq!(vscore(&singular, 14, 0.5), None);
}

fn directional(grads: &BTreeMap<String, Tensor>, dir: &BTreeMap<String, Tensor>) -> f64 {
    grads.iter().map(|(k, g)| g.dot(&dir[k])).sum()
}

fn random_direction(state: &AnsatzState, rng: &mut ChaCha8Rng) -> BTreeMap<String, Tensor> {
    state
        .params()
        .iter()
        .map(|(k, t)| {
            let data = (0..t.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            (k.to_string(), Tensor::matrix(t.rows(), t.cols(), data))
        })
        .collect()
}

fn shifted(state: &AnsatzState, dir: &BTreeMap<String, Tensor>, eps: f64) -> AnsatzState {
    let mut s = state.clone();
    for (k, t) in s.params_mut().iter_mut() {
        for (v, d) in t.data_mut().iter_mut().zip(dir[k].data()) {
            *v += eps * d;
        }
    }
    s
}

#[test]
fn gradient_matches_oracle_finite_differences() {
    let h = random_hamiltonian(4, 15, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for cfg in [
        AnsatzConfig::made(4, vec![8]),
        AnsatzConfig::transformer(4, 8, 1),
        AnsatzConfig::retnet(4, 8, 1),
    ] {
        let s = AnsatzState::new(cfg.with_seed(4)).unwrap();
        let (configs, w, l) = enumerate(&s, &h);
        let g = gradient(&s, &configs, &w, &l, None).unwrap();
        for _ in 0..3 {
            let dir = random_direction(&s, &mut rng);
            let eps = 1e-5;
            let plus = exact_expectation(&shifted(&s, &dir, eps), &h).unwrap().0;
            let minus = exact_expectation(&shifted(&s, &dir, -eps), &h).unwrap().0;
            let fd = (plus - minus) / (2.0 * eps);
            let an = directional(&g, &dir);
            assert!((an - fd).abs() / fd.abs().max(1e-8) < 1e-4, "{an} vs {fd}");
        }
    }
}

#[test]
fn gradient_vanishes_for_constant_local_energy() {
    let s = AnsatzState::new(AnsatzConfig::made(3, vec![6]).with_seed(1)).unwrap();
    let configs = vec![Config(1), Config(2), Config(5)];
    let g = gradient(&s, &configs, &[1.0, 2.0, 3.0], &[c(-1.25, 0.0); 3], None).unwrap();
    assert!(g.values().all(|t| t.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn gradient_is_linear_in_hamiltonian() {
    let h = random_hamiltonian(4, 10, 5);
    let s = AnsatzState::new(AnsatzConfig::made(4, vec![8]).with_seed(2)).unwrap();
    let (configs, w, l) = enumerate(&s, &h);
    let (_, _, l2) = enumerate(&s, &h.scaled(2.0));
    let g1 = gradient(&s, &configs, &w, &l, None).unwrap();
    let g2 = gradient(&s, &configs, &w, &l2, None).unwrap();
    for (k, a) in &g1 {
        assert!(a.scale(2.0).max_abs_diff(&g2[k]) < 1e-12);
    }
}

fn z_hamiltonian() -> PauliHamiltonian {
    parse_hamiltonian("%n_qubits 1\n1.0 Z").unwrap()
}

#[test]
fn single_qubit_training_reaches_eigenstate() {
    // the default 2.5e-3 peak cannot move a logit by ~30 within 500 steps
    let cfg = TrainConfig { steps: 500, max_unique: 4, lr_peak: 2.0, seed: 1, ..TrainConfig::default() };
    let out = train(&z_hamiltonian(), &AnsatzConfig::made(1, vec![]), &cfg).unwrap();
    let r = &out.record;
    assert_eq!(r.status, RunStatus::Ok);
    assert!((r.energy + 1.0).abs() < 1e-6, "{}", r.energy);
    assert!(r.vscore.unwrap() < 1e-10);
    assert_eq!(r.abs_error, Some((r.energy + 1.0).abs()));
    assert!((r.d_prime - r.steps as f64 * r.search_fraction).abs() < 1e-12);
    assert_eq!(out.energies.len(), 500);
}

#[test]
fn training_is_deterministic() {
    let cfg = TrainConfig { steps: 30, max_unique: 8, seed: 7, ..TrainConfig::default() };
    let a = train(&h2(), &AnsatzConfig::transformer(4, 8, 1), &cfg).unwrap();
    let b = train(&h2(), &AnsatzConfig::transformer(4, 8, 1), &cfg).unwrap();
    assert_eq!(a.record, b.record);
    assert_eq!(a.state, b.state);
}

#[test]
fn huge_coefficients_flag_divergence() {
    let h = parse_hamiltonian("%n_qubits 2\n1e200 XX\n1e200 ZI").unwrap();
    let cfg = TrainConfig { steps: 5, max_unique: 4, ..TrainConfig::default() };
    let out = train(&h, &AnsatzConfig::made(2, vec![4]), &cfg).unwrap();
    assert_eq!(out.record.status, RunStatus::Diverged);
    assert!(out.record.vscore.is_none());
}

#[test]
fn record_bookkeeping() {
    let cfg = TrainConfig { steps: 20, max_unique: 16, ..TrainConfig::default() };
    let out = train(&h2(), &AnsatzConfig::made(4, vec![8]), &cfg).unwrap();
    let r = &out.record;
    assert_eq!(r.n_electrons, Some(2));
    assert_eq!(r.n_raw, out.state.params().total_count());
    assert!((r.n_k - r.n_raw as f64 / 1000.0).abs() < 1e-15);
    assert!(r.b_mean >= 1.0 && r.b_mean <= 4.0);
    assert!((r.search_fraction - r.b_mean / 4.0).abs() < 1e-15);
    assert!(r.abs_error.is_some() && r.flops_table1 > 0.0 && r.flops_simplified > 0.0);
    assert!(train(&h2(), &AnsatzConfig::made(6, vec![]), &cfg).is_err());
    assert!(TrainConfig { warmup_fraction: 1.0, ..cfg }.validate().is_err());
}

