use std::collections::BTreeSet;

use navnet_core::ctmc::simulate;
use navnet_core::fixture::{self, MARKINGS, SOJOURN_S};
use navnet_core::report::{fixture_topology_fit, reproduce};
use navnet_core::{build_reachability_graph, tangible_graph, transient_measures, Marking, StateKind};

#[test]
fn start_marking_enables_the_catalogue_moves() {
    let model = fixture::model();
    model.ensure_valid().unwrap();
    let names: BTreeSet<&str> = model.enabled_names(&Marking::new().with("A", 1)).into_iter().collect();
    assert_eq!(names, BTreeSet::from(["tA_cont", "tB", "tE_A", "tL", "tD1"]));
}

#[test]
fn reachability_has_nine_transient_markings_and_one_end() {
    let model = fixture::model();
    let g = build_reachability_graph(&model, &fixture::params(1).unwrap()).unwrap();
    assert_eq!(g.states.len(), 10);
    let absorbing: Vec<String> = g
        .states
        .iter()
        .filter(|s| s.kind == StateKind::Absorbing)
        .map(|s| s.marking.label())
        .collect();
    assert_eq!(absorbing, ["M_E"]);
    assert!(g.states.iter().all(|s| s.kind != StateKind::Vanishing));
    let labels: BTreeSet<String> = g.states.iter().map(|s| s.marking.label()).collect();
    for m in MARKINGS {
        assert!(labels.contains(m), "{m}");
    }
}

#[test]
fn sojourns_reproduce_published_values() {
    for cluster in [1, 2] {
        let g = tangible_graph(&fixture::model(), &fixture::params(cluster).unwrap()).unwrap();
        let m = transient_measures(&g).unwrap();
        let mut within = 0;
        for (i, name) in MARKINGS.iter().enumerate() {
            let st = m.row(name).unwrap().sojourn_s.seconds().unwrap();
            let published = SOJOURN_S[cluster - 1][i];
            if (st - published).abs() / published <= 0.02 {
                within += 1;
            }
        }
        assert!(within >= 8, "cluster {cluster}: {within} of 9");
    }
    let c2 = tangible_graph(&fixture::model(), &fixture::params(2).unwrap()).unwrap();
    let m = transient_measures(&c2).unwrap();
    assert!((m.row("M_A").unwrap().sojourn_s.seconds().unwrap() - 112.765).abs() < 0.01);
}

#[test]
fn report_flags_the_known_conflicts() {
    let r = reproduce(&[1, 2]).unwrap();
    let topics: BTreeSet<&str> = r.discrepancies.iter().map(|d| d.topic.as_str()).collect();
    for t in ["published occupancy", "M_D2 sojourn", "derived δ"] {
        assert!(topics.contains(t), "missing {t}: {topics:?}");
    }
    let text = r.to_text();
    assert!(text.contains("x = n∘ST"));
    assert!(text.contains("M_D2"));
}

#[test]
fn topology_fit_recovers_start_and_lounge_sets() {
    let fit = fixture_topology_fit().unwrap();
    let set = |m: &str| -> BTreeSet<String> { fit.marking(m).unwrap().chosen.symbols.iter().cloned().collect() };
    let want = |s: &[&str]| -> BTreeSet<String> { s.iter().map(|x| x.to_string()).collect() };
    assert_eq!(set("M_ML"), want(&["θ", "ν", "μ"]));
    assert_eq!(set("M_A"), want(&["α", "λ", "μ", "κ", "ε"]));
    assert!(fit.marking("M_ML").unwrap().chosen.residual < 0.005);
    assert!(fit.marking("M_A").unwrap().chosen.residual < 0.005);
    // the bundled net is the fitted one
    let model = fixture::model();
    for mf in &fit.markings {
        let place = mf.marking.trim_start_matches("M_");
        let symbols: BTreeSet<String> = model
            .enabled_transitions(&Marking::new().with(place, 1))
            .iter()
            .filter_map(|t| t.rate_symbol().map(String::from))
            .collect();
        assert_eq!(symbols, mf.chosen.symbols.iter().cloned().collect(), "{}", mf.marking);
    }
}

#[test]
fn simulation_agrees_with_analytic_visits() {
    // a smaller run than the acceptance check; same rule
    for cluster in [1, 2] {
        let g = tangible_graph(&fixture::model(), &fixture::params(cluster).unwrap()).unwrap();
        let m = transient_measures(&g).unwrap();
        let sim = simulate(&g, &g.initial, 20_000, 7).unwrap();
        for (i, s) in sim.states.iter().enumerate() {
            let row = &m.rows[i];
            assert_eq!(row.marking, s.marking);
            let (Some(n), Some(x)) = (row.visits, row.occupancy_s) else { continue };
            assert!((s.visits - n).abs() <= 4.0 * s.visits_se, "{} visits {n} vs {}", s.marking, s.visits);
            assert!((s.occupancy_s - x).abs() <= 4.0 * s.occupancy_se, "{} occupancy", s.marking);
        }
    }
}
