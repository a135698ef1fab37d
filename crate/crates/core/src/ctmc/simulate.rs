//! Discrete-event simulation of the absorbing chain, used as an oracle for
//! the analytic measures.
//!
//! Run `r` draws from a ChaCha8 stream `r` keyed by the master seed, runs are
//! grouped into fixed-size chunks, and chunk statistics are merged in chunk
//! order. Results therefore depend only on `(seed, runs)`, not on how rayon
//! schedules the chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::reach::TangibleGraph;

const CHUNK: u64 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateEstimate {
    pub marking: String,
    pub visits: f64,
    pub visits_se: f64,
    pub occupancy_s: f64,
    pub occupancy_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub runs: u64,
    pub seed: u64,
    pub states: Vec<StateEstimate>,
    pub absorption_time_s: f64,
    pub absorption_time_se: f64,
}

/// Running mean and sum of squared deviations, mergeable.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        if self.n == 0.0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
    }

    fn standard_error(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        }
    }
}

#[derive(Debug, Clone)]
struct Accumulator {
    visits: Vec<Moments>,
    occupancy: Vec<Moments>,
    absorption: Moments,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Accumulator {
            visits: vec![Moments::default(); n],
            occupancy: vec![Moments::default(); n],
            absorption: Moments::default(),
        }
    }

    fn merge(&mut self, o: &Accumulator) {
        for (a, b) in self.visits.iter_mut().zip(&o.visits) {
            a.merge(b);
        }
        for (a, b) in self.occupancy.iter_mut().zip(&o.occupancy) {
            a.merge(b);
        }
        self.absorption.merge(&o.absorption);
    }
}

/// Per-state jump tables: total rate plus cumulative edge rates.
struct Jumps {
    total: Vec<f64>,
    cumulative: Vec<Vec<(f64, usize)>>,
}

fn sample_index(rng: &mut ChaCha8Rng, weights: &[(f64, usize)], total: f64) -> usize {
    let u = rng.random::<f64>() * total;
    weights
        .iter()
        .find(|(c, _)| u < *c)
        .map_or(weights[weights.len() - 1].1, |&(_, t)| t)
}

fn run_chunk(
    jumps: &Jumps,
    absorbing: &[bool],
    start: &[(f64, usize)],
    seed: u64,
    runs: std::ops::Range<u64>,
) -> Accumulator {
    let n = absorbing.len();
    let mut acc = Accumulator::new(n);
    let mut visits = vec![0u64; n];
    let mut occupancy = vec![0.0f64; n];
    for run in runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run);
        visits.iter_mut().for_each(|v| *v = 0);
        occupancy.iter_mut().for_each(|v| *v = 0.0);
        let mut state = sample_index(&mut rng, start, 1.0);
        let mut clock = 0.0;
        while !absorbing[state] {
            let total = jumps.total[state];
            let dwell: f64 = rng.sample::<f64, _>(Exp1) / total;
            visits[state] += 1;
            occupancy[state] += dwell;
            clock += dwell;
            state = sample_index(&mut rng, &jumps.cumulative[state], total);
        }
        for i in 0..n {
            acc.visits[i].push(visits[i] as f64);
            acc.occupancy[i].push(occupancy[i]);
        }
        acc.absorption.push(clock);
    }
    acc
}

/// Simulates `runs` independent trajectories from `initial` until absorption.
/// At each visit the holding time is exponential in the total enabled rate
/// and the winner of the race is drawn with probability rate/total, which
/// is the same law as sampling every enabled transition's clock.
pub fn simulate(graph: &TangibleGraph, initial: &[f64], runs: u64, seed: u64) -> Result<SimulationReport> {
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    let n = graph.states.len();
    if initial.len() != n {
        return Err(Error::InvalidArgument(format!(
            "initial distribution has {} entries for {n} states",
            initial.len()
        )));
    }
    let absorbing: Vec<bool> = (0..n).map(|i| graph.is_absorbing(i)).collect();
    let mut jumps = Jumps {
        total: vec![0.0; n],
        cumulative: vec![Vec::new(); n],
    };
    for e in &graph.edges {
        jumps.total[e.source] += e.rate;
        jumps.cumulative[e.source].push((jumps.total[e.source], e.target));
    }
    for (i, &abs) in absorbing.iter().enumerate() {
        if !abs && jumps.total[i] <= 0.0 {
            return Err(Error::ZeroRate(graph.label(i)));
        }
    }
    // Trajectories that can never absorb would not terminate.
    let mut can_absorb = absorbing.clone();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            if !can_absorb[i] && jumps.cumulative[i].iter().any(|&(_, t)| can_absorb[t]) {
                can_absorb[i] = true;
                changed = true;
            }
        }
    }
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&i| initial[i] > 0.0).collect();
    while let Some(s) = stack.pop() {
        if std::mem::replace(&mut seen[s], true) {
            continue;
        }
        if !can_absorb[s] {
            return Err(Error::NoAbsorption(graph.label(s)));
        }
        stack.extend(jumps.cumulative[s].iter().map(|&(_, t)| t));
    }

    let mut start = Vec::new();
    let mut acc_p = 0.0;
    for (i, &p) in initial.iter().enumerate() {
        if p > 0.0 {
            acc_p += p;
            start.push((acc_p, i));
        }
    }
    if start.is_empty() || (acc_p - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("initial distribution must sum to 1".into()));
    }
    let last = start.len() - 1;
    start[last].0 = 1.0;

    let chunks: Vec<std::ops::Range<u64>> = (0..runs.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(runs))
        .collect();
    let parts: Vec<Accumulator> = chunks
        .into_par_iter()
        .map(|r| run_chunk(&jumps, &absorbing, &start, seed, r))
        .collect();
    let mut total = Accumulator::new(n);
    for p in &parts {
        total.merge(p);
    }

    let states = (0..n)
        .map(|i| StateEstimate {
            marking: graph.label(i),
            visits: total.visits[i].mean,
            visits_se: total.visits[i].standard_error(),
            occupancy_s: total.occupancy[i].mean,
            occupancy_se: total.occupancy[i].standard_error(),
        })
        .collect();
    Ok(SimulationReport {
        runs,
        seed,
        states,
        absorption_time_s: total.absorption.mean,
        absorption_time_se: total.absorption.standard_error(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gspn::Marking;
    use crate::reach::{ReachState, StateKind, TangibleEdge};

    fn two_state(rate_out: f64, self_rate: f64) -> TangibleGraph {
        TangibleGraph {
            states: vec![
                ReachState {
                    marking: Marking::new().with("T", 1),
                    kind: StateKind::Tangible,
                },
                ReachState {
                    marking: Marking::new().with("E", 1),
                    kind: StateKind::Absorbing,
                },
            ],
            edges: vec![
                TangibleEdge {
                    source: 0,
                    target: 0,
                    transition: "loop".into(),
                    rate: self_rate,
                },
                TangibleEdge {
                    source: 0,
                    target: 1,
                    transition: "end".into(),
                    rate: rate_out,
                },
            ],
            initial: vec![1.0, 0.0],
        }
    }

    #[test]
    fn absorbing_start_gives_zero_measures() {
        let g = two_state(1.0, 1.0);
        let r = simulate(&g, &[0.0, 1.0], 100, 3).unwrap();
        assert!(r.states.iter().all(|s| s.visits == 0.0 && s.occupancy_s == 0.0));
        assert_eq!(r.absorption_time_s, 0.0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let g = two_state(0.5, 1.5);
        let a = simulate(&g, &g.initial, 5000, 42).unwrap();
        let b = simulate(&g, &g.initial, 5000, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate(&g, &g.initial, 5000, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_runs_is_rejected() {
        let g = two_state(1.0, 1.0);
        assert!(matches!(simulate(&g, &g.initial, 0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn geometric_visits_match() {
        // p_self = 0.75 -> n = 4, x = 1 / 0.5 = 2
        let g = two_state(0.5, 1.5);
        let r = simulate(&g, &g.initial, 40_000, 7).unwrap();
        let s = &r.states[0];
        assert!((s.visits - 4.0).abs() < 3.0 * s.visits_se, "{s:?}");
        assert!((s.occupancy_s - 2.0).abs() < 3.0 * s.occupancy_se, "{s:?}");
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin() * 10.0).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..37].iter().for_each(|&x| a.push(x));
        xs[37..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - whole.mean).abs() < 1e-12);
        assert!((a.m2 - whole.m2).abs() < 1e-9);
    }
}
