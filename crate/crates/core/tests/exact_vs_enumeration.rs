mod common;

use frameless_core::analysis::{initial_state_pmf, transition};
use frameless_core::{unresolved_pmf, AnalysisOptions, SlotClass, SystemConfig};

use common::{enumerate_stage_states, enumerate_unresolved_pmf, small_configs};

#[test]
fn pmf_matches_enumeration_on_small_configs() {
    let configs = small_configs();
    assert!(configs.len() > 300);
    for config in &configs {
        let exact = unresolved_pmf(config, AnalysisOptions::exact()).unwrap();
        let oracle = enumerate_unresolved_pmf(config);
        for (u, (a, b)) in exact.pmf.iter().zip(&oracle).enumerate() {
            assert!(
                (a - b).abs() <= 1e-10,
                "{config:?} u={u}: analysis {a} vs enumeration {b}"
            );
        }
        assert_eq!(exact.leaked_mass, 0.0);
    }
}

fn assert_stagewise(config: &SystemConfig) {
    let oracle = enumerate_stage_states(config);
    let opts = AnalysisOptions::exact();
    let mut pmf = initial_state_pmf(config, opts).unwrap();
    loop {
        let u = pmf.stage();
        let expected = &oracle[u];
        for (state, p) in pmf.iter() {
            let want = expected.get(&state).copied().unwrap_or(0.0);
            assert!((p - want).abs() < 1e-12, "u={u} {state:?}: {p} vs {want}");
        }
        for (state, want) in expected {
            assert!(
                (pmf.get(state) - want).abs() < 1e-12,
                "u={u} missing {state:?}"
            );
        }
        if u == 0 {
            break;
        }
        pmf = transition(&pmf, config, opts).unwrap().0;
    }
}

#[test]
fn stagewise_states_match_enumeration() {
    assert_stagewise(&SystemConfig::single(3, 3, 1.5).unwrap());
    assert_stagewise(
        &SystemConfig::new(3, vec![SlotClass::new(2, 1.2), SlotClass::new(2, 2.6)]).unwrap(),
    );
    assert_stagewise(&SystemConfig::single(4, 4, 2.0).unwrap());
}

#[test]
fn terminal_masses_match_enumeration() {
    let config = SystemConfig::single(3, 3, 1.5).unwrap();
    let oracle = enumerate_stage_states(&config);
    let exact = unresolved_pmf(&config, AnalysisOptions::exact()).unwrap();
    for (u, states) in oracle.iter().enumerate().skip(1) {
        let terminal: f64 = states
            .iter()
            .filter(|(s, _)| s.ripple_size == 0)
            .map(|(_, p)| p)
            .sum();
        assert!((exact.pmf[u] - terminal).abs() < 1e-12);
    }
}
