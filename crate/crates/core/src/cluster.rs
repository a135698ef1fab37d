//! Mixtures of first-order Markov chains fitted by EM, with BIC model
//! selection, posterior assignment, cluster profiles and DOT diagrams.
//!
//! Each sequence starts from a virtual start state, so a component is an
//! initial distribution plus a transition matrix over the alphabet. All
//! counts get additive smoothing, which makes the M-step a MAP estimate
//! under a Dirichlet(1 + ε) prior; the recorded objective is the
//! corresponding penalized log-likelihood, which EM never decreases.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::logs::SessionSequence;

pub const DEFAULT_SMOOTHING: f64 = 1e-6;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_RESTARTS: usize = 5;
/// Transitions below this probability are left out of profiles and diagrams.
pub const DEFAULT_MIN_PROBABILITY: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphabetKind {
    Page,
    Category,
}

/// Sequences over a sorted alphabet of labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceSet {
    pub alphabet: Vec<String>,
    pub sequences: Vec<Vec<usize>>,
}

impl SequenceSet {
    pub fn from_labels<S: AsRef<str>>(seqs: &[Vec<S>]) -> Result<Self> {
        if seqs.is_empty() {
            return Err(Error::InvalidArgument("no sequences to cluster".into()));
        }
        let mut alphabet: Vec<String> = seqs
            .iter()
            .flatten()
            .map(|s| s.as_ref().to_string())
            .collect();
        alphabet.sort();
        alphabet.dedup();
        let index: BTreeMap<&str, usize> = alphabet
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let sequences = seqs
            .iter()
            .map(|s| s.iter().map(|x| index[x.as_ref()]).collect())
            .collect();
        Ok(SequenceSet { alphabet, sequences })
    }

    pub fn from_sessions(sessions: &[SessionSequence], kind: AlphabetKind) -> Result<Self> {
        let labels: Vec<Vec<String>> = sessions
            .iter()
            .map(|s| {
                s.events
                    .iter()
                    .map(|e| match kind {
                        AlphabetKind::Page => e.page.clone(),
                        AlphabetKind::Category => e.category.to_string(),
                    })
                    .collect()
            })
            .collect();
        Self::from_labels(&labels)
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn mean_length(&self) -> f64 {
        let total: usize = self.sequences.iter().map(Vec::len).sum();
        total as f64 / self.sequences.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovChainComponent {
    pub weight: f64,
    pub initial: Vec<f64>,
    /// Row-stochastic, `transition[from][to]`.
    pub transition: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingMeta {
    pub k: usize,
    pub seed: u64,
    /// Restart that produced this model.
    pub restart: usize,
    pub iterations: usize,
    pub converged: bool,
    pub tolerance: f64,
    pub max_iter: usize,
    pub smoothing: f64,
    /// Penalized log-likelihood after every E-step.
    pub objective_trace: Vec<f64>,
    /// Plain log-likelihood after every E-step.
    pub log_likelihood_trace: Vec<f64>,
    pub mean_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovMixtureModel {
    pub alphabet: Vec<String>,
    pub components: Vec<MarkovChainComponent>,
    pub log_likelihood: f64,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub k: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub smoothing: f64,
    pub restarts: usize,
}

impl EmConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        EmConfig {
            k,
            seed,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            smoothing: DEFAULT_SMOOTHING,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

/// Seed for restart `r` of the `k`-component fit (SplitMix64 finalizer).
pub fn restart_seed(seed: u64, k: usize, r: usize) -> u64 {
    let mut z = seed
        .wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((r as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// First symbol plus transition counts keyed by `from * S + to`.
struct Compact {
    first: Option<usize>,
    pairs: Vec<(usize, f64)>,
}

fn compact(data: &SequenceSet) -> Vec<Compact> {
    let s = data.alphabet.len();
    data.sequences
        .iter()
        .map(|seq| {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for w in seq.windows(2) {
                *counts.entry(w[0] * s + w[1]).or_default() += 1.0;
            }
            Compact {
                first: seq.first().copied(),
                pairs: counts.into_iter().collect(),
            }
        })
        .collect()
}

struct Params {
    log_w: Vec<f64>,
    log_init: Vec<Vec<f64>>,
    log_trans: Vec<Vec<f64>>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn component_log_lik(p: &Params, k: usize, c: &Compact) -> f64 {
    let mut l = 0.0;
    if let Some(f) = c.first {
        l += p.log_init[k][f];
    }
    for &(ab, n) in &c.pairs {
        l += n * p.log_trans[k][ab];
    }
    l
}

/// Returns (plain log-likelihood, responsibilities).
fn e_step(p: &Params, data: &[Compact]) -> (f64, Vec<Vec<f64>>) {
    let k = p.log_w.len();
    let mut total = 0.0;
    let mut resp = Vec::with_capacity(data.len());
    let mut ll = vec![0.0; k];
    for c in data {
        for (j, l) in ll.iter_mut().enumerate() {
            *l = p.log_w[j] + component_log_lik(p, j, c);
        }
        let z = log_sum_exp(&ll);
        total += z;
        resp.push(ll.iter().map(|l| (l - z).exp()).collect());
    }
    (total, resp)
}

fn penalty(p: &Params, eps: f64) -> f64 {
    let s: f64 = p.log_w.iter().sum::<f64>()
        + p.log_init.iter().flatten().sum::<f64>()
        + p.log_trans.iter().flatten().sum::<f64>();
    eps * s
}

fn m_step(resp: &[Vec<f64>], data: &[Compact], k: usize, s: usize, eps: f64) -> Vec<MarkovChainComponent> {
    let n = data.len() as f64;
    (0..k)
        .map(|j| {
            let mut mass = 0.0;
            let mut init = vec![0.0; s];
            let mut trans = vec![0.0; s * s];
            for (r, c) in resp.iter().zip(data) {
                let w = r[j];
                mass += w;
                if let Some(f) = c.first {
                    init[f] += w;
                }
                for &(ab, cnt) in &c.pairs {
                    trans[ab] += w * cnt;
                }
            }
            let init_total: f64 = init.iter().sum();
            let init_den = init_total + s as f64 * eps;
            let initial = init.iter().map(|x| (x + eps) / init_den).collect();
            let transition = trans
                .chunks(s)
                .map(|row| {
                    let den = row.iter().sum::<f64>() + s as f64 * eps;
                    row.iter().map(|x| (x + eps) / den).collect()
                })
                .collect();
            MarkovChainComponent {
                weight: (mass + eps) / (n + k as f64 * eps),
                initial,
                transition,
            }
        })
        .collect()
}

fn to_params(cs: &[MarkovChainComponent]) -> Params {
    Params {
        log_w: cs.iter().map(|c| c.weight.ln()).collect(),
        log_init: cs
            .iter()
            .map(|c| c.initial.iter().map(|x| x.ln()).collect())
            .collect(),
        log_trans: cs
            .iter()
            .map(|c| c.transition.iter().flatten().map(|x| x.ln()).collect())
            .collect(),
    }
}

fn em_single(data: &SequenceSet, compacted: &[Compact], cfg: &EmConfig, seed: u64, restart: usize) -> MarkovMixtureModel {
    let k = cfg.k;
    let s = data.alphabet.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let resp: Vec<Vec<f64>> = (0..compacted.len())
        .map(|_| {
            if k == 1 {
                return vec![1.0];
            }
            let v: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
            let t: f64 = v.iter().sum();
            v.into_iter().map(|x| x / t).collect()
        })
        .collect();
    let mut components = m_step(&resp, compacted, k, s, cfg.smoothing);
    let mut objective_trace = Vec::new();
    let mut ll_trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let p = to_params(&components);
        let (ll, resp) = e_step(&p, compacted);
        let obj = ll + penalty(&p, cfg.smoothing);
        if let Some(&prev) = objective_trace.last() {
            let prev: f64 = prev;
            if obj - prev < cfg.tol * prev.abs() {
                objective_trace.push(obj);
                ll_trace.push(ll);
                converged = true;
                break;
            }
        }
        objective_trace.push(obj);
        ll_trace.push(ll);
        if iterations >= cfg.max_iter {
            break;
        }
        components = m_step(&resp, compacted, k, s, cfg.smoothing);
        iterations += 1;
    }
    MarkovMixtureModel {
        alphabet: data.alphabet.clone(),
        components,
        log_likelihood: *ll_trace.last().expect("at least one E-step"),
        meta: TrainingMeta {
            k,
            seed,
            restart,
            iterations,
            converged,
            tolerance: cfg.tol,
            max_iter: cfg.max_iter,
            smoothing: cfg.smoothing,
            objective_trace,
            log_likelihood_trace: ll_trace,
            mean_length: data.mean_length(),
        },
    }
}

fn check(data: &SequenceSet, cfg: &EmConfig) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("no sequences to cluster".into()));
    }
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if !(cfg.smoothing > 0.0 && cfg.smoothing.is_finite()) {
        return Err(Error::InvalidArgument("smoothing must be positive".into()));
    }
    if data.alphabet.is_empty() {
        return Err(Error::InvalidArgument("sequences contain no symbols".into()));
    }
    Ok(())
}

/// One EM run from a random soft assignment drawn with `cfg.seed`. Stops
/// when the objective gains less than `tol` relative to its previous value
/// or after `max_iter` M-steps.
pub fn em_fit(data: &SequenceSet, cfg: &EmConfig) -> Result<MarkovMixtureModel> {
    check(data, cfg)?;
    Ok(em_single(data, &compact(data), cfg, cfg.seed, 0))
}

/// Best of `cfg.restarts` EM runs by log-likelihood; ties go to the lower
/// restart index. Restarts run in parallel.
pub fn em_fit_restarts(data: &SequenceSet, cfg: &EmConfig) -> Result<MarkovMixtureModel> {
    check(data, cfg)?;
    let compacted = compact(data);
    let runs: Vec<MarkovMixtureModel> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|r| em_single(data, &compacted, cfg, restart_seed(cfg.seed, cfg.k, r), r))
        .collect();
    let mut best: Option<MarkovMixtureModel> = None;
    for m in runs {
        if best.as_ref().is_none_or(|b| m.log_likelihood > b.log_likelihood) {
            best = Some(m);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Free parameters of a `k`-component mixture over `s` symbols.
pub fn parameter_count(k: usize, s: usize) -> usize {
    (k - 1) + k * ((s - 1) + s * (s - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KScore {
    pub k: usize,
    pub log_likelihood: f64,
    pub parameters: usize,
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub chosen_k: usize,
    pub scores: Vec<KScore>,
    pub model: MarkovMixtureModel,
}

/// Fits K = 1..=k_max and keeps the K with the lowest
/// BIC = -2 logL + params · ln(sequences); ties go to the smaller K.
pub fn select_k(data: &SequenceSet, k_max: usize, base: &EmConfig) -> Result<Selection> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k-max must be at least 1".into()));
    }
    let n = data.len() as f64;
    let s = data.alphabet.len();
    let mut scores = Vec::new();
    let mut best: Option<(f64, MarkovMixtureModel)> = None;
    for k in 1..=k_max {
        let cfg = EmConfig { k, ..base.clone() };
        let m = em_fit_restarts(data, &cfg)?;
        let params = parameter_count(k, s);
        let bic = -2.0 * m.log_likelihood + params as f64 * n.ln();
        scores.push(KScore {
            k,
            log_likelihood: m.log_likelihood,
            parameters: params,
            bic,
        });
        if best.as_ref().is_none_or(|(b, _)| bic < *b) {
            best = Some((bic, m));
        }
    }
    let (_, model) = best.expect("k_max >= 1");
    Ok(Selection {
        chosen_k: model.components.len(),
        scores,
        model,
    })
}

impl MarkovMixtureModel {
    fn floor(&self) -> f64 {
        self.meta.smoothing.ln()
    }

    fn symbol(&self, label: &str) -> Option<usize> {
        self.alphabet.binary_search_by(|a| a.as_str().cmp(label)).ok()
    }

    /// Per-component log-likelihood of a labelled sequence. Unknown labels
    /// score at the smoothing floor.
    fn component_log_liks(&self, seq: &[&str]) -> Vec<f64> {
        let idx: Vec<Option<usize>> = seq.iter().map(|l| self.symbol(l)).collect();
        self.components
            .iter()
            .map(|c| {
                let mut l = c.weight.ln();
                if let Some(first) = idx.first() {
                    l += first.map_or(self.floor(), |f| c.initial[f].ln());
                }
                for w in idx.windows(2) {
                    l += match (w[0], w[1]) {
                        (Some(a), Some(b)) => c.transition[a][b].ln(),
                        _ => self.floor(),
                    };
                }
                l
            })
            .collect()
    }

    /// Log-likelihood of a whole data set under this model.
    pub fn data_log_likelihood(&self, data: &SequenceSet) -> f64 {
        data.sequences
            .iter()
            .map(|s| {
                let labels: Vec<&str> = s.iter().map(|&i| data.alphabet[i].as_str()).collect();
                log_sum_exp(&self.component_log_liks(&labels))
            })
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// Posterior cluster probabilities of one sequence.
pub fn assign<S: AsRef<str>>(model: &MarkovMixtureModel, seq: &[S]) -> Vec<f64> {
    let labels: Vec<&str> = seq.iter().map(AsRef::as_ref).collect();
    let ll = model.component_log_liks(&labels);
    let z = log_sum_exp(&ll);
    ll.iter().map(|l| (l - z).exp()).collect()
}

/// Index of the largest posterior, lowest index on ties.
pub fn hard_assign<S: AsRef<str>>(model: &MarkovMixtureModel, seq: &[S]) -> usize {
    let p = assign(model, seq);
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

pub fn hard_assignments(model: &MarkovMixtureModel, data: &SequenceSet) -> Vec<usize> {
    data.sequences
        .iter()
        .map(|s| {
            let labels: Vec<&str> = s.iter().map(|&i| data.alphabet[i].as_str()).collect();
            hard_assign(model, &labels)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedTransition {
    pub from: String,
    pub to: String,
    pub probability: f64,
    /// Probability over the weight-averaged probability of all components.
    pub lift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Characteristic {
    /// 0-based component index.
    pub cluster: usize,
    pub weight: f64,
    /// Start probabilities, largest first.
    pub start: Vec<(String, f64)>,
    pub transitions: Vec<RankedTransition>,
    /// Expected share of views per symbol over a walk of mean length.
    pub popularity: Vec<(String, f64)>,
}

fn component(model: &MarkovMixtureModel, k: usize) -> Result<&MarkovChainComponent> {
    model.components.get(k).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "cluster {} out of range 1..={}",
            k + 1,
            model.components.len()
        ))
    })
}

/// Expected visit frequency of each symbol over the first `L` views, `L`
/// the rounded mean training sequence length. Sums to 1.
pub fn popularity(model: &MarkovMixtureModel, k: usize) -> Result<Vec<f64>> {
    let c = component(model, k)?;
    let steps = (model.meta.mean_length.round() as usize).max(1);
    let s = model.alphabet.len();
    let mut v = c.initial.clone();
    let mut total = v.clone();
    for _ in 1..steps {
        let mut next = vec![0.0; s];
        for (a, &pa) in v.iter().enumerate() {
            for (b, &t) in c.transition[a].iter().enumerate() {
                next[b] += pa * t;
            }
        }
        for (t, x) in total.iter_mut().zip(&next) {
            *t += x;
        }
        v = next;
    }
    let z: f64 = total.iter().sum();
    Ok(total.into_iter().map(|x| x / z).collect())
}

/// Profile of component `k` (0-based): start probabilities, the `top_n`
/// transitions with probability at least `min_prob` ranked by lift over
/// the pooled model, and symbol popularity.
pub fn characteristic_transitions(
    model: &MarkovMixtureModel,
    k: usize,
    top_n: usize,
    min_prob: f64,
) -> Result<Characteristic> {
    let c = component(model, k)?;
    let s = model.alphabet.len();
    let label = |i: usize| model.alphabet[i].clone();
    let mut start: Vec<(usize, f64)> = c.initial.iter().copied().enumerate().collect();
    start.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut ranked = Vec::new();
    for a in 0..s {
        for b in 0..s {
            let p = c.transition[a][b];
            if p < min_prob {
                continue;
            }
            let pooled: f64 = model
                .components
                .iter()
                .map(|m| m.weight * m.transition[a][b])
                .sum();
            ranked.push((a, b, p, p / pooled));
        }
    }
    ranked.sort_by(|x, y| {
        y.3.total_cmp(&x.3)
            .then(y.2.total_cmp(&x.2))
            .then((x.0, x.1).cmp(&(y.0, y.1)))
    });
    let pop = popularity(model, k)?;
    let mut pop_ranked: Vec<(usize, f64)> = pop.into_iter().enumerate().collect();
    pop_ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(Characteristic {
        cluster: k,
        weight: c.weight,
        start: start.into_iter().take(top_n).map(|(i, p)| (label(i), p)).collect(),
        transitions: ranked
            .into_iter()
            .take(top_n)
            .map(|(a, b, p, lift)| RankedTransition {
                from: label(a),
                to: label(b),
                probability: p,
                lift,
            })
            .collect(),
        popularity: pop_ranked.into_iter().map(|(i, p)| (label(i), p)).collect(),
    })
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT diagram of component `k` (0-based). Edges are transitions of at least
/// `min_prob` between distinct symbols, labelled with their probability;
/// start and stay probabilities go in the node label. Darker fill means a
/// more popular symbol.
pub fn cluster_diagram(model: &MarkovMixtureModel, k: usize, min_prob: f64) -> Result<String> {
    let c = component(model, k)?;
    let pop = popularity(model, k)?;
    let max_pop = pop.iter().copied().fold(0.0, f64::max);
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"cluster{}\" {{", k + 1);
    let _ = writeln!(out, "  node [shape=box, style=filled];");
    for (i, name) in model.alphabet.iter().enumerate() {
        let level = 95 - (55.0 * pop[i] / max_pop).round() as i64;
        let font = if level < 60 { "white" } else { "black" };
        let _ = writeln!(
            out,
            "  n{i} [label=\"{}\\nstart {:.2} stay {:.2}\", fillcolor=\"gray{level}\", fontcolor=\"{font}\"];",
            dot_escape(name),
            c.initial[i],
            c.transition[i][i]
        );
    }
    for (a, row) in c.transition.iter().enumerate() {
        for (b, &p) in row.iter().enumerate() {
            if a != b && p >= min_prob {
                let _ = writeln!(out, "  n{a} -> n{b} [label=\"{p:.2}\"];");
            }
        }
    }
    out.push_str("}\n");
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    /// Sequences per cluster under hard assignment.
    pub sizes: Vec<usize>,
    pub clusters: Vec<Characteristic>,
}

pub fn cluster_report(model: &MarkovMixtureModel, data: &SequenceSet, top_n: usize, min_prob: f64) -> Result<ClusterReport> {
    let mut sizes = vec![0; model.components.len()];
    for a in hard_assignments(model, data) {
        sizes[a] += 1;
    }
    let clusters = (0..model.components.len())
        .map(|k| characteristic_transitions(model, k, top_n, min_prob))
        .collect::<Result<_>>()?;
    Ok(ClusterReport { sizes, clusters })
}

impl ClusterReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, size) in self.clusters.iter().zip(&self.sizes) {
            let _ = writeln!(
                out,
                "cluster {}: {size} sequences, weight {:.2}",
                c.cluster + 1,
                c.weight
            );
            for (s, p) in &c.start {
                let _ = writeln!(out, "  start at {s}: {p:.2}");
            }
            for t in &c.transitions {
                let _ = writeln!(out, "  {} -> {}: {:.2} (lift {:.2})", t.from, t.to, t.probability, t.lift);
            }
            let popular: Vec<String> = c
                .popularity
                .iter()
                .take(5)
                .map(|(s, p)| format!("{s} {p:.2}"))
                .collect();
            let _ = writeln!(out, "  popular: {}", popular.join(", "));
        }
        out
    }
}

/// Adjusted Rand index of two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("labelings differ in length".into()));
    }
    let n = a.len() as f64;
    let mut table: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let c2 = |x: f64| x * (x - 1.0) / 2.0;
    let index: f64 = table.values().map(|&v| c2(v)).sum();
    let sr: f64 = rows.values().map(|&v| c2(v)).sum();
    let sc: f64 = cols.values().map(|&v| c2(v)).sum();
    let expected = if n < 2.0 { 0.0 } else { sr * sc / c2(n) };
    let max = (sr + sc) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
