mod common;

use common::two_generator_corpus;
use navnet_core::cluster::{
    adjusted_rand_index, assign, cluster_diagram, em_fit, em_fit_restarts, hard_assign, hard_assignments,
    select_k, EmConfig, MarkovMixtureModel, SequenceSet,
};
use navnet_core::synth::{sample_sequences, ChainSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_150_301;

fn assert_monotone(m: &MarkovMixtureModel) {
    let tr = &m.meta.objective_trace;
    assert!(!tr.is_empty());
    for w in tr.windows(2) {
        assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "objective fell {} -> {}", w[0], w[1]);
    }
    let ll = &m.meta.log_likelihood_trace;
    assert_eq!(ll.len(), tr.len());
    for w in ll.windows(2) {
        assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "log-likelihood fell {} -> {}", w[0], w[1]);
    }
}

fn assert_normalized(m: &MarkovMixtureModel) {
    let w: f64 = m.components.iter().map(|c| c.weight).sum();
    assert!((w - 1.0).abs() < 1e-12);
    for c in &m.components {
        assert!((c.initial.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for row in &c.transition {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&p| p > 0.0));
        }
    }
}

#[test]
fn two_generators_are_separated() {
    let (seqs, truth) = two_generator_corpus(500, SEED);
    let data = SequenceSet::from_labels(&seqs).unwrap();
    let sel = select_k(&data, 5, &EmConfig::new(2, SEED)).unwrap();
    assert_eq!(sel.chosen_k, 2, "{:?}", sel.scores);
    let labels = hard_assignments(&sel.model, &data);
    let ari = adjusted_rand_index(&truth, &labels).unwrap();
    assert!(ari >= 0.9, "ARI {ari}");
    assert_monotone(&sel.model);
    assert_normalized(&sel.model);
    // BIC is what picks K
    let best = sel.scores.iter().min_by(|a, b| a.bic.total_cmp(&b.bic)).unwrap();
    assert_eq!(best.k, 2);
}

#[test]
fn every_restart_has_a_non_decreasing_trace() {
    let (seqs, _) = two_generator_corpus(150, SEED + 1);
    let data = SequenceSet::from_labels(&seqs).unwrap();
    for k in 1..=4 {
        for r in 0..5u64 {
            let m = em_fit(&data, &EmConfig::new(k, 1000 * k as u64 + r)).unwrap();
            assert_monotone(&m);
            assert_normalized(&m);
        }
    }
}

#[test]
fn fits_are_deterministic_for_a_seed() {
    let (seqs, _) = two_generator_corpus(100, SEED + 2);
    let data = SequenceSet::from_labels(&seqs).unwrap();
    let cfg = EmConfig::new(3, 77);
    let a = em_fit_restarts(&data, &cfg).unwrap();
    let b = em_fit_restarts(&data, &cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn shuffling_sequences_keeps_the_partition() {
    let (seqs, _) = two_generator_corpus(300, SEED + 3);
    let data = SequenceSet::from_labels(&seqs).unwrap();
    let m = em_fit_restarts(&data, &EmConfig::new(2, 5)).unwrap();
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
    let shuffled: Vec<Vec<String>> = order.iter().map(|&i| seqs[i].clone()).collect();
    let sdata = SequenceSet::from_labels(&shuffled).unwrap();
    // likelihood of a fixed model ignores order
    assert!((m.data_log_likelihood(&sdata) - m.data_log_likelihood(&data)).abs() < 1e-6);
    let ms = em_fit_restarts(&sdata, &EmConfig::new(2, 5)).unwrap();
    let a = hard_assignments(&m, &data);
    let b_shuffled = hard_assignments(&ms, &sdata);
    let mut b = vec![0; b_shuffled.len()];
    for (pos, &i) in order.iter().enumerate() {
        b[i] = b_shuffled[pos];
    }
    assert!(adjusted_rand_index(&a, &b).unwrap() > 0.98);
    assert!((ms.log_likelihood - m.log_likelihood).abs() < 1e-3 * m.log_likelihood.abs());
}

#[test]
fn planted_start_probability_is_recovered() {
    let spec = ChainSpec {
        labels: vec!["x".into(), "y".into(), "z".into()],
        initial: vec![0.4, 0.35, 0.25],
        transition: vec![vec![0.1, 0.6, 0.3], vec![0.5, 0.2, 0.3], vec![0.3, 0.3, 0.4]],
        min_len: 1,
        max_len: 8,
    };
    let seqs = sample_sequences(&spec, 5000, SEED).unwrap();
    let data = SequenceSet::from_labels(&seqs).unwrap();
    let m = em_fit(&data, &EmConfig::new(1, 1)).unwrap();
    let x = data.alphabet.iter().position(|s| s == "x").unwrap();
    assert!((m.components[0].initial[x] - 0.4).abs() <= 0.02, "{}", m.components[0].initial[x]);
    // closed form: the share of sequences starting at x
    let share = seqs.iter().filter(|s| s[0] == "x").count() as f64 / seqs.len() as f64;
    assert!((m.components[0].initial[x] - share).abs() < 1e-6);
}

#[test]
fn posterior_assignment_tracks_the_generator() {
    let (train, _) = two_generator_corpus(500, SEED + 4);
    let data = SequenceSet::from_labels(&train).unwrap();
    let m = em_fit_restarts(&data, &EmConfig::new(2, 8)).unwrap();
    let (test, truth) = two_generator_corpus(200, SEED + 5);
    let labels: Vec<usize> = test.iter().map(|s| hard_assign(&m, s)).collect();
    for s in test.iter().take(20) {
        let post = assign(&m, s);
        assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    // best of the two label matchings
    let agree = labels.iter().zip(&truth).filter(|(a, b)| a == b).count();
    let acc = agree.max(labels.len() - agree) as f64 / labels.len() as f64;
    assert!(acc >= 0.9, "accuracy {acc}");
    // unseen symbols still get a distribution
    let post = assign(&m, &["never-seen", "p1"]);
    assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn adjusted_rand_reference_values() {
    let ari = adjusted_rand_index(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 2, 2]).unwrap();
    assert!((ari - 8.0 / 33.0).abs() < 1e-12, "{ari}");
    assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 3, 3]).unwrap(), 1.0);
    assert!(adjusted_rand_index(&[0, 1], &[0]).is_err());
}

#[test]
fn diagram_omits_self_loops_and_weak_edges() {
    let seqs: Vec<Vec<String>> = (0..50).map(|_| vec!["a".to_string(); 5]).collect();
    let data = SequenceSet::from_labels(&seqs).unwrap();
    let m = em_fit(&data, &EmConfig::new(1, 2)).unwrap();
    let dot = cluster_diagram(&m, 0, 0.05).unwrap();
    assert!(dot.starts_with("digraph"));
    assert!(!dot.contains("->"), "{dot}");
    assert!(cluster_diagram(&m, 1, 0.05).is_err());
}
