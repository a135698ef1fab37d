//! Generators and brute-force oracles shared by integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;

use navnet_core::gspn::{parse_model, GspnModel, Marking, ParameterSet, Rate, Transition, TransitionKind};
use navnet_core::synth::ChainSpec;
use navnet_core::TangibleGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random net with at most 6 places whose immediate transitions only move
/// tokens to higher-numbered places, so vanishing markings form a DAG.
/// Timed transitions move tokens anywhere, self-loops included.
pub fn random_vanishing_net(seed: u64) -> (GspnModel, ParameterSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6usize);
    let mut text = String::from("net rnd\n");
    let tokens = rng.random_range(1..=2u32);
    let start = rng.random_range(0..n);
    for i in 0..n {
        let init = if i == start { format!(" init={tokens}") } else { String::new() };
        let _ = writeln!(text, "place p{i}{init}");
    }
    let mut params = ParameterSet::new();
    let n_timed = rng.random_range(1..=5);
    for t in 0..n_timed {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let rate: f64 = rng.random_range(0.1..5.0);
        let _ = writeln!(text, "param r{t}");
        params.insert(format!("r{t}"), rate).unwrap();
        let _ = writeln!(text, "timed t{t} rate=r{t} in=p{a} out=p{b}");
    }
    let n_imm = rng.random_range(0..=4);
    for t in 0..n_imm {
        let a = rng.random_range(0..n - 1);
        let b = rng.random_range(a + 1..n);
        let w: f64 = rng.random_range(0.1..5.0);
        let prio = rng.random_range(1..=2);
        let _ = writeln!(text, "immediate i{t} weight={w} priority={prio} in=p{a} out=p{b}");
    }
    (parse_model(&text).unwrap(), params)
}

/// Token-enabled transitions filtered by the race/priority rule, written
/// out from the arc lists rather than through the library's enabling code.
fn oracle_enabled<'a>(model: &'a GspnModel, m: &Marking) -> Vec<&'a Transition> {
    let ok = |t: &Transition| {
        let mut need: BTreeMap<&str, u32> = BTreeMap::new();
        for a in &t.inputs {
            *need.entry(a.place.as_str()).or_insert(0) += a.multiplicity;
        }
        need.iter().all(|(p, &k)| m.tokens(p) >= k)
    };
    let on: Vec<&Transition> = model.transitions.iter().filter(|t| ok(t)).collect();
    let top = on
        .iter()
        .filter_map(|t| match t.kind {
            TransitionKind::Immediate { priority, .. } => Some(priority),
            TransitionKind::Timed { .. } => None,
        })
        .max();
    match top {
        None => on,
        Some(level) => on
            .into_iter()
            .filter(|t| matches!(t.kind, TransitionKind::Immediate { priority, .. } if priority == level))
            .collect(),
    }
}

fn oracle_fire(t: &Transition, m: &Marking) -> Marking {
    let mut next = m.clone();
    for a in &t.inputs {
        next.set(a.place.clone(), next.tokens(&a.place) - a.multiplicity);
    }
    for a in &t.outputs {
        next.set(a.place.clone(), next.tokens(&a.place) + a.multiplicity);
    }
    next
}

/// Distribution over the non-vanishing markings reached from `m` by
/// following every immediate firing path.
pub fn immediate_paths(model: &GspnModel, m: &Marking) -> BTreeMap<Marking, f64> {
    let imm: Vec<(f64, &Transition)> = oracle_enabled(model, m)
        .into_iter()
        .filter_map(|t| match t.kind {
            TransitionKind::Immediate { weight, .. } => Some((weight, t)),
            TransitionKind::Timed { .. } => None,
        })
        .collect();
    let mut out = BTreeMap::new();
    if imm.is_empty() {
        out.insert(m.clone(), 1.0);
        return out;
    }
    let total: f64 = imm.iter().map(|(w, _)| w).sum();
    for (w, t) in imm {
        for (k, p) in immediate_paths(model, &oracle_fire(t, m)) {
            *out.entry(k).or_insert(0.0) += w / total * p;
        }
    }
    out
}

/// One-step distribution from a tangible marking: race of the enabled timed
/// transitions, each followed by all immediate paths.
pub fn brute_force_step(model: &GspnModel, params: &ParameterSet, m: &Marking) -> (f64, BTreeMap<Marking, f64>) {
    let rates: Vec<(f64, &Transition)> = oracle_enabled(model, m)
        .into_iter()
        .map(|t| match &t.kind {
            TransitionKind::Timed { rate: Rate::Symbol(s) } => (params.get(s).unwrap(), t),
            TransitionKind::Timed { rate: Rate::Value(v) } => (*v, t),
            TransitionKind::Immediate { .. } => panic!("tangible marking with immediate {}", t.name),
        })
        .collect();
    let total: f64 = rates.iter().map(|(r, _)| r).sum();
    let mut out = BTreeMap::new();
    for (r, t) in rates {
        for (k, p) in immediate_paths(model, &oracle_fire(t, m)) {
            *out.entry(k).or_insert(0.0) += r / total * p;
        }
    }
    (total, out)
}

/// The same one-step distribution read off a reduced graph.
pub fn graph_step(g: &TangibleGraph, s: usize) -> BTreeMap<Marking, f64> {
    let total = g.total_rate(s);
    let mut out = BTreeMap::new();
    for e in g.edges.iter().filter(|e| e.source == s) {
        *out.entry(g.states[e.target].marking.clone()).or_insert(0.0) += e.rate / total;
    }
    out
}

/// One-token absorbing chain with `states` states in total (the last is the
/// absorbing `E`). A vanishing start place spreads the initial distribution
/// at random; self-loops are added at random.
pub fn random_absorbing_chain(seed: u64, states: usize) -> (GspnModel, ParameterSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = states - 1;
    let mut text = String::from("net chain\nplace V init=1\nplace E\n");
    for i in 0..k {
        let _ = writeln!(text, "place s{i}");
    }
    let mut params = ParameterSet::new();
    let mut t = 0;
    let mut timed = |text: &mut String, from: usize, to: &str, rate: f64| {
        let _ = writeln!(text, "param r{t}");
        params.insert(format!("r{t}"), rate).unwrap();
        let _ = writeln!(text, "timed t{t} rate=r{t} in=s{from} out={to}");
        t += 1;
    };
    for i in 0..k {
        timed(&mut text, i, "E", rng.random_range(0.01..1.0));
        if rng.random_bool(0.5) {
            timed(&mut text, i, &format!("s{i}"), rng.random_range(0.01..10.0));
        }
        for j in 0..k {
            if j != i && rng.random_bool(0.4) {
                timed(&mut text, i, &format!("s{j}"), rng.random_range(0.01..5.0));
            }
        }
    }
    for i in 0..k {
        if i == 0 || rng.random_bool(0.5) {
            let w: f64 = rng.random_range(0.1..3.0);
            let _ = writeln!(text, "immediate v{i} weight={w} in=V out=s{i}");
        }
    }
    (parse_model(&text).unwrap(), params)
}

/// Dense Gauss-Jordan solve of `y A = b`, independent of the library solver.
pub fn solve_row(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    // transpose to A^T y^T = b^T
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| a[j][i]).collect();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        let pivot = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            let f = row[col];
            if r != col && f != 0.0 {
                for c in col..=n {
                    row[c] -= f * pivot[c];
                }
            }
        }
    }
    m.iter().map(|row| row[n]).collect()
}

/// Expected visits from the jump chain of a reduced graph, self-loops kept.
pub fn oracle_visits(g: &TangibleGraph) -> Vec<f64> {
    let tr: Vec<usize> = (0..g.states.len()).filter(|&i| !g.is_absorbing(i)).collect();
    let pos = |s: usize| tr.iter().position(|&x| x == s);
    let k = tr.len();
    let mut a = vec![vec![0.0; k]; k];
    for (r, row) in a.iter_mut().enumerate() {
        row[r] = 1.0;
    }
    for e in &g.edges {
        if let (Some(r), Some(c)) = (pos(e.source), pos(e.target)) {
            a[r][c] -= e.rate / g.total_rate(e.source);
        }
    }
    let b: Vec<f64> = tr.iter().map(|&s| g.initial[s]).collect();
    let n = solve_row(&a, &b);
    let mut full = vec![0.0; g.states.len()];
    for (r, &s) in tr.iter().enumerate() {
        full[s] = n[r];
    }
    full
}

/// Two chains over six pages with disjoint preferred transitions.
pub fn two_generator_specs() -> [ChainSpec; 2] {
    let labels: Vec<String> = ["p0", "p1", "p2", "p3", "p4", "p5"].iter().map(|s| s.to_string()).collect();
    let row = |hot: usize| -> Vec<f64> {
        (0..6).map(|j| if j == hot { 0.75 } else { 0.05 }).collect()
    };
    let a = ChainSpec {
        labels: labels.clone(),
        initial: vec![0.4, 0.3, 0.2, 0.04, 0.03, 0.03],
        // 0 -> 1 -> 2 -> 0, then 3 -> 4 -> 5 -> 3
        transition: vec![row(1), row(2), row(0), row(4), row(5), row(3)],
        min_len: 5,
        max_len: 15,
    };
    let b = ChainSpec {
        labels,
        initial: vec![0.03, 0.03, 0.04, 0.2, 0.3, 0.4],
        // 0 -> 2 -> 1 -> 0, then 3 -> 5 -> 4 -> 3
        transition: vec![row(2), row(0), row(1), row(5), row(3), row(4)],
        min_len: 5,
        max_len: 15,
    };
    [a, b]
}

/// `n` sequences from each generator, interleaved, with true labels.
pub fn two_generator_corpus(n: usize, seed: u64) -> (Vec<Vec<String>>, Vec<usize>) {
    let specs = two_generator_specs();
    let a = navnet_core::synth::sample_sequences(&specs[0], n, seed).unwrap();
    let b = navnet_core::synth::sample_sequences(&specs[1], n, seed ^ 0x5eed).unwrap();
    let mut seqs = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(2 * n);
    for (x, y) in a.into_iter().zip(b) {
        seqs.push(x);
        labels.push(0);
        seqs.push(y);
        labels.push(1);
    }
    (seqs, labels)
}

pub const TWO_STATE_NET: &str = "\
net two
place P init=1 category=A
place E
param a
param m
timed stay rate=a in=P out=P
timed end rate=m in=P out=E
";

/// Three pages with a self-loop, a detour and a shared exit rate.
pub const BROWSE: &str = "\
net browse
place H init=1 category=A
place I category=A
place K category=D
place E
param a
param b
param c
param d
param m
timed h_stay rate=a in=H out=H
timed h_i rate=b in=H out=I
timed i_h rate=c in=I out=H
timed i_k rate=d in=I out=K
timed k_h rate=c in=K out=H
timed h_end rate=m in=H out=E
timed i_end rate=m in=I out=E
timed k_end rate=m in=K out=E
";
