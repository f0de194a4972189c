use super::*;
use crate::pauli::feasible_configs;

fn all_archs(n: usize) -> Vec<AnsatzConfig> {
    vec![
        AnsatzConfig::made(n, vec![12, 12]),
        AnsatzConfig::transformer(n, 16, 2),
        AnsatzConfig::retnet(n, 16, 2),
    ]
}

fn total_probability(state: &AnsatzState) -> f64 {
    feasible_configs(state.n_qubits(), None)
        .into_iter()
        .filter(|&x| state.is_feasible(x))
        .map(|x| (2.0 * log_amplitude(state, x).unwrap().re).exp())
        .sum()
}

#[test]
fn parameter_counts_match_closed_forms() {
    let d = 16;
    let t = AnsatzState::new(AnsatzConfig::transformer(8, d, 2)).unwrap();
    assert_eq!(
        t.params().modulus_count(),
        5 * d + 4 * d + 2 * (12 * d * d + 9 * d) + 6 * d + 4
    );
    let r = AnsatzState::new(AnsatzConfig::retnet(8, d, 3)).unwrap();
    assert_eq!(r.params().modulus_count(), 5 * d + 3 * (12 * d * d + 11 * d) + 6 * d + 4);
    let m = AnsatzState::new(AnsatzConfig::made(4, vec![10])).unwrap();
    assert_eq!(m.params().modulus_count(), 4 * 10 + 10 + 10 * 8 + 8);
    assert_eq!(m.params().phase_count(), 4 * 16 + 16 + 16 + 1);
}

#[test]
fn zero_parameters_give_uniform_conditionals() {
    let m = AnsatzState::zeroed(AnsatzConfig::made(5, vec![8])).unwrap();
    let dist = made_forward(&m, Config(0b10110)).unwrap();
    for j in 0..5 {
        for &l in dist.log_probs(j) {
            assert!((l - 0.5f64.ln()).abs() < 1e-12);
        }
    }
    for cfg in [AnsatzConfig::transformer(6, 8, 1), AnsatzConfig::retnet(6, 8, 1)] {
        let s = AnsatzState::zeroed(cfg).unwrap();
        let dist = match s.architecture() {
            Architecture::Transformer => transformer_forward(&s, &[1, 3]).unwrap(),
            _ => retnet_forward_parallel(&s, &[1, 3]).unwrap(),
        };
        assert_eq!(dist.positions(), 3);
        for j in 0..3 {
            for &l in dist.log_probs(j) {
                assert!((l - 0.25f64.ln()).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn normalized_without_sector() {
    for cfg in all_archs(6) {
        let s = AnsatzState::new(cfg.with_seed(3)).unwrap();
        let p = total_probability(&s);
        assert!((p - 1.0).abs() < 1e-10, "{}: {p}", s.architecture());
    }
}

#[test]
fn normalized_within_sector() {
    for mult in [1, 3] {
        let sector = Sector::from_electrons(8, 4, mult).unwrap();
        for cfg in all_archs(8) {
            let s = AnsatzState::new(cfg.with_sector(Some(sector)).with_seed(5)).unwrap();
            let p: f64 = sector
                .configs(8)
                .into_iter()
                .map(|x| (2.0 * log_amplitude(&s, x).unwrap().re).exp())
                .sum();
            assert!((p - 1.0).abs() < 1e-10, "{} mult {mult}: {p}", s.architecture());
        }
    }
}

#[test]
fn infeasible_configuration_is_rejected() {
    let sector = Sector::from_electrons(4, 2, 1).unwrap();
    let s = AnsatzState::new(AnsatzConfig::made(4, vec![8]).with_sector(Some(sector))).unwrap();
    assert!(matches!(
        log_amplitude(&s, Config(0b0101)),
        Err(AnsatzError::Infeasible(_))
    ));
    assert!(log_amplitude(&s, Config(0b0011)).is_ok());
}

#[test]
fn made_is_autoregressive() {
    let s = AnsatzState::new(AnsatzConfig::made(7, vec![20, 20]).with_seed(1)).unwrap();
    let x = Config(0b1011001);
    let base = made_forward(&s, x).unwrap();
    for j in 0..7 {
        let flipped = made_forward(&s, x.with_bit(j, !x.bit(j))).unwrap();
        for r in 0..=j {
            assert_eq!(base.log_probs(r), flipped.log_probs(r), "bit {j} leaked into row {r}");
        }
    }
}

#[test]
fn transformer_and_retnet_are_autoregressive() {
    for cfg in [AnsatzConfig::transformer(10, 16, 2), AnsatzConfig::retnet(10, 16, 2)] {
        let s = AnsatzState::new(cfg.with_seed(2)).unwrap();
        let tokens = [1, 2, 0, 3];
        let run = |t: &[usize]| match s.architecture() {
            Architecture::Transformer => transformer_forward(&s, t).unwrap(),
            _ => retnet_forward_parallel(&s, t).unwrap(),
        };
        let base = run(&tokens);
        for k in 0..tokens.len() {
            let mut t = tokens;
            t[k] = (t[k] + 1) % 4;
            let other = run(&t);
            for r in 0..=k {
                let diff: f64 = base
                    .log_probs(r)
                    .iter()
                    .zip(other.log_probs(r))
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                assert!(diff < 1e-12, "token {k} leaked into row {r}");
            }
        }
    }
}

#[test]
fn retnet_recurrent_matches_parallel() {
    let s = AnsatzState::new(AnsatzConfig::retnet(12, 16, 2).with_seed(9)).unwrap();
    let tokens = [3, 1, 0, 2, 1];
    let parallel = retnet_forward_parallel(&s, &tokens).unwrap();
    let mut rs = RetentionState::new(s.config());
    let mut prev = 0;
    for j in 0..=tokens.len() {
        let (lp, next) = retnet_forward_recurrent(&s, &rs, prev).unwrap();
        for (a, b) in lp.iter().zip(parallel.log_probs(j)) {
            assert!((a - b).abs() < 1e-10, "position {j}: {a} vs {b}");
        }
        rs = next;
        if j < tokens.len() {
            prev = tokens[j];
        }
    }
    assert_eq!(rs.position(), 6);
    let (_, full) = (0..6).fold((vec![], RetentionState::new(s.config())), |(_, r), _| {
        retnet_forward_recurrent(&s, &r, 1).unwrap()
    });
    assert!(matches!(
        retnet_forward_recurrent(&s, &full, 1),
        Err(AnsatzError::SequenceTooLong { .. })
    ));
}

#[test]
fn wrong_architecture_is_an_error() {
    let s = AnsatzState::new(AnsatzConfig::made(4, vec![4])).unwrap();
    assert!(matches!(
        transformer_forward(&s, &[0]),
        Err(AnsatzError::WrongArchitecture { .. })
    ));
}

#[test]
fn constraint_masks_overfull_spins() {
    let cfg = AnsatzConfig::transformer(6, 8, 1);
    let sector = Sector::from_electrons(6, 2, 1).unwrap();
    // after a doubly occupied orbital only the empty token remains
    let allowed = allowed_outcomes(&cfg, sector, 1, Config(0).with_orbital(0, 3)).unwrap();
    assert_eq!(allowed, vec![true, false, false, false]);
    // with nothing placed, the last orbital must be doubly occupied
    let allowed = allowed_outcomes(&cfg, sector, 2, Config(0)).unwrap();
    assert_eq!(allowed, vec![false, false, false, true]);
    let lp = apply_particle_constraint(
        &cfg.clone().with_sector(Some(sector)),
        0,
        Config(0),
        &[0.0, 0.0, 0.0, 0.0],
    )
    .unwrap();
    assert!(lp.iter().all(|l| (l - 0.25f64.ln()).abs() < 1e-12));
}

#[test]
fn log_amplitude_gradient_matches_finite_difference() {
    for cfg in all_archs(4) {
        let state = AnsatzState::new(cfg.with_seed(11)).unwrap();
        let x = Config(0b0110);
        let mut g = Graph::new();
        let bound = g.bind(state.params());
        let (re, im) = log_amplitude_on_graph(&mut g, &bound, &state, x).unwrap();
        let total = g.add(re, im).unwrap();
        let grads = g.backward(total).unwrap().for_params(&g, &bound);
        let h = 1e-6;
        for name in ["mod.head.w", "mod.made.0.w", "phase.0.w", "mod.block0.mix.wq"] {
            let Some(an) = grads.get(name) else { continue };
            for idx in [0, an.len() / 2] {
                let eval = |delta: f64| {
                    let mut s = state.clone();
                    s.params_mut().get_mut(name).unwrap().data_mut()[idx] += delta;
                    let l = log_amplitude(&s, x).unwrap();
                    l.re + l.im
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let a = an.data()[idx];
                assert!((fd - a).abs() < 1e-6 * (1.0 + a.abs()), "{name}[{idx}]: {a} vs {fd}");
            }
        }
    }
}

#[test]
fn rejects_bad_configs() {
    assert!(AnsatzState::new(AnsatzConfig::transformer(5, 8, 1)).is_err());
    assert!(AnsatzState::new(AnsatzConfig::retnet(6, 12, 1)).is_err());
    assert!(AnsatzState::new(AnsatzConfig::transformer(6, 8, 0)).is_err());
}

#[test]
fn seeded_init_is_deterministic() {
    let a = AnsatzState::new(AnsatzConfig::retnet(6, 8, 1).with_seed(4)).unwrap();
    let b = AnsatzState::new(AnsatzConfig::retnet(6, 8, 1).with_seed(4)).unwrap();
    let c = AnsatzState::new(AnsatzConfig::retnet(6, 8, 1).with_seed(5)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
