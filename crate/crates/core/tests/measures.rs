mod common;

use common::{oracle_visits, random_absorbing_chain, solve_row};
use navnet_core::ctmc::{sojourn_times, steady_state, Ctmc};
use navnet_core::gspn::parse_model;
use navnet_core::{tangible_graph, transient_measures, Error, ParameterSet, Sojourn};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Occupancy from the generator restricted to transient states, solved
/// without the library: x Q_T = -pi0.
fn oracle_occupancy(g: &navnet_core::TangibleGraph) -> Vec<f64> {
    let tr: Vec<usize> = (0..g.states.len()).filter(|&i| !g.is_absorbing(i)).collect();
    let pos = |s: usize| tr.iter().position(|&x| x == s);
    let k = tr.len();
    let mut q = vec![vec![0.0; k]; k];
    for e in &g.edges {
        let r = pos(e.source).unwrap();
        q[r][r] -= e.rate;
        if let Some(c) = pos(e.target) {
            q[r][c] += e.rate;
        }
    }
    let b: Vec<f64> = tr.iter().map(|&s| -g.initial[s]).collect();
    let x = solve_row(&q, &b);
    let mut full = vec![0.0; g.states.len()];
    for (r, &s) in tr.iter().enumerate() {
        full[s] = x[r];
    }
    full
}

#[test]
fn occupancy_equals_visits_times_sojourn_on_random_chains() {
    for seed in 0..100u64 {
        let states = 2 + (seed as usize % 11);
        let (model, params) = random_absorbing_chain(seed, states);
        let g = tangible_graph(&model, &params).unwrap();
        assert!(g.states.len() <= states, "seed {seed}");
        let m = transient_measures(&g).unwrap();
        let n_oracle = oracle_visits(&g);
        let x_oracle = oracle_occupancy(&g);
        for (i, row) in m.rows.iter().enumerate() {
            let (Some(x), Some(n), Some(c)) = (row.occupancy_s, row.visits, row.cumulative_s) else {
                assert!(g.is_absorbing(i));
                continue;
            };
            let st = row.sojourn_s.seconds().expect("transient state has finite sojourn");
            assert!(rel(x, n * st) <= 1e-9, "seed {seed} {}", row.marking);
            assert!(rel(n, n_oracle[i]) <= 1e-9, "seed {seed} visits {}", row.marking);
            assert!(rel(x, x_oracle[i]) <= 1e-9, "seed {seed} occupancy {}", row.marking);
            assert!(rel(c, n * st) <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identity_holds_for_any_chain(seed in any::<u64>(), states in 2usize..=12) {
        let (model, params) = random_absorbing_chain(seed, states);
        let g = tangible_graph(&model, &params).unwrap();
        let m = transient_measures(&g).unwrap();
        let mut total = 0.0;
        for row in &m.rows {
            let (Some(x), Some(n)) = (row.occupancy_s, row.visits) else { continue };
            let st = row.sojourn_s.seconds().unwrap();
            prop_assert!(rel(x, n * st) <= 1e-9);
            prop_assert!(n >= 0.0 && x >= 0.0);
            total += x;
        }
        prop_assert!(rel(total, m.session_duration) <= 1e-9);
    }

    #[test]
    fn sojourn_is_inverse_total_rate(seed in any::<u64>(), states in 2usize..=12) {
        let (model, params) = random_absorbing_chain(seed, states);
        let g = tangible_graph(&model, &params).unwrap();
        let st = sojourn_times(&g).unwrap();
        for (i, s) in st.iter().enumerate() {
            match s {
                Sojourn::Finite(v) => prop_assert!(rel(*v, 1.0 / g.total_rate(i)) <= 1e-12),
                Sojourn::Unbounded => prop_assert!(g.is_absorbing(i)),
            }
        }
    }
}

#[test]
fn self_loop_counts_in_sojourn_but_not_occupancy() {
    let model = parse_model(
        "net two\nplace P init=1\nplace E\nparam a\nparam m\n\
         timed stay rate=a in=P out=P\ntimed end rate=m in=P out=E\n",
    )
    .unwrap();
    let p = ParameterSet::from_pairs([("a", 0.2), ("m", 0.05)]).unwrap();
    let g = tangible_graph(&model, &p).unwrap();
    let m = transient_measures(&g).unwrap();
    let row = m.row("M_P").unwrap();
    assert!(rel(row.sojourn_s.seconds().unwrap(), 4.0) < 1e-12);
    assert!(rel(row.visits.unwrap(), 5.0) < 1e-12);
    assert!(rel(row.occupancy_s.unwrap(), 20.0) < 1e-12);
}

#[test]
fn non_absorbing_chain_is_rejected() {
    let model = parse_model(
        "net cyc\nplace A init=1\nplace B\nparam r\ntimed f rate=r in=A out=B\ntimed g rate=r in=B out=A\n",
    )
    .unwrap();
    let p = ParameterSet::from_pairs([("r", 1.0)]).unwrap();
    let g = tangible_graph(&model, &p).unwrap();
    let e = transient_measures(&g).unwrap_err();
    assert!(e.is_numerical() || matches!(e, Error::InvalidModel(_)), "{e}");
    // the recurrent chain still has a steady state
    let pi = steady_state(&Ctmc::from_graph(&g).unwrap()).unwrap();
    assert!((pi[0] - 0.5).abs() < 1e-12 && (pi[1] - 0.5).abs() < 1e-12);
}
