//! Absorbing CTMC analysis over a [`TangibleGraph`].
//!
//! Self-loop convention: sojourn times and the embedded jump chain count
//! self-loop firings (each one is a fresh visit), while the generator
//! cancels them on the diagonal. Under this convention the occupancy
//! `x_i` equals `n_i * ST_i` for every transient state.

mod fit;
mod simulate;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::reach::TangibleGraph;

pub use fit::{
    fit_enabling_sets, Candidate, FitConfig, FitReport, FitStatus, MarkingFit, SojournTarget,
};
pub use simulate::{simulate, SimulationReport, StateEstimate};

/// Dense systems larger than this are refused.
pub const DENSE_STATE_LIMIT: usize = 10_000;

/// Mean time per visit. Absorbing states never leave, which is reported as
/// a distinguished value rather than a float infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sojourn {
    Finite(f64),
    Unbounded,
}

impl Sojourn {
    pub fn seconds(self) -> Option<f64> {
        match self {
            Sojourn::Finite(s) => Some(s),
            Sojourn::Unbounded => None,
        }
    }
}

impl fmt::Display for Sojourn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sojourn::Finite(s) => write!(f, "{s}"),
            Sojourn::Unbounded => f.write_str("inf"),
        }
    }
}

impl Serialize for Sojourn {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Sojourn::Finite(v) => s.serialize_f64(*v),
            Sojourn::Unbounded => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ctmc {
    pub labels: Vec<String>,
    pub absorbing: Vec<bool>,
    /// Infinitesimal generator; rows sum to zero.
    pub generator: DMatrix<f64>,
    /// Initial distribution.
    pub initial: DVector<f64>,
}

impl Ctmc {
    pub fn from_graph(graph: &TangibleGraph) -> Result<Self> {
        let n = graph.states.len();
        check_size(n)?;
        let mut q = DMatrix::zeros(n, n);
        for e in &graph.edges {
            if e.source != e.target {
                q[(e.source, e.target)] += e.rate;
            }
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| q[(i, j)]).sum();
            q[(i, i)] = -off;
        }
        Ok(Ctmc {
            labels: (0..n).map(|i| graph.label(i)).collect(),
            absorbing: (0..n).map(|i| graph.is_absorbing(i)).collect(),
            generator: q,
            initial: DVector::from_column_slice(&graph.initial),
        })
    }

    pub fn transient_states(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| !self.absorbing[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedDtmc {
    pub labels: Vec<String>,
    pub absorbing: Vec<bool>,
    /// One-step jump probabilities, self-loops retained; absorbing rows are
    /// identity rows.
    pub transition: DMatrix<f64>,
}

impl EmbeddedDtmc {
    pub fn from_graph(graph: &TangibleGraph) -> Result<Self> {
        let n = graph.states.len();
        check_size(n)?;
        let mut p = DMatrix::zeros(n, n);
        let totals = outgoing_totals(graph);
        for e in &graph.edges {
            p[(e.source, e.target)] += e.rate;
        }
        for i in 0..n {
            if graph.is_absorbing(i) {
                p[(i, i)] = 1.0;
            } else if totals[i] > 0.0 {
                for j in 0..n {
                    p[(i, j)] /= totals[i];
                }
            } else {
                return Err(Error::ZeroRate(graph.label(i)));
            }
        }
        Ok(EmbeddedDtmc {
            labels: (0..n).map(|i| graph.label(i)).collect(),
            absorbing: (0..n).map(|i| graph.is_absorbing(i)).collect(),
            transition: p,
        })
    }
}

fn check_size(n: usize) -> Result<()> {
    if n > DENSE_STATE_LIMIT {
        Err(Error::InvalidArgument(format!(
            "{n} states exceed the dense solver limit of {DENSE_STATE_LIMIT}"
        )))
    } else {
        Ok(())
    }
}

fn outgoing_totals(graph: &TangibleGraph) -> Vec<f64> {
    let mut totals = vec![0.0; graph.states.len()];
    for e in &graph.edges {
        totals[e.source] += e.rate;
    }
    totals
}

/// Mean time per visit: the reciprocal of the summed rates of all enabled
/// transitions, self-loops included.
pub fn sojourn_times(graph: &TangibleGraph) -> Result<Vec<Sojourn>> {
    let totals = outgoing_totals(graph);
    (0..graph.states.len())
        .map(|i| {
            if graph.is_absorbing(i) {
                Ok(Sojourn::Unbounded)
            } else if totals[i] > 0.0 {
                Ok(Sojourn::Finite(1.0 / totals[i]))
            } else {
                Err(Error::ZeroRate(graph.label(i)))
            }
        })
        .collect()
}

/// Every transient state must reach some absorbing state, else the
/// restricted systems are singular.
fn check_absorption(labels: &[String], absorbing: &[bool], reach: impl Fn(usize, usize) -> bool) -> Result<()> {
    let n = labels.len();
    let mut can = absorbing.to_vec();
    loop {
        let mut changed = false;
        for i in 0..n {
            if !can[i] && (0..n).any(|j| can[j] && reach(i, j)) {
                can[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    match (0..n).find(|&i| !can[i]) {
        Some(i) => Err(Error::NoAbsorption(labels[i].clone())),
        None => Ok(()),
    }
}

/// Solves `y * A = b` for a row vector `y` by LU with partial pivoting.
fn solve_row(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    // nalgebra's LU panics on 0x0; every state can be absorbing from the start
    if b.is_empty() {
        return Ok(b);
    }
    a.transpose()
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular("restricted transient system".into()))
}

/// Expected total time spent in each state before absorption: solves
/// `x Q_T = -pi0_T` on the transient restriction. Absorbing entries are 0.
pub fn time_to_absorption(ctmc: &Ctmc) -> Result<Vec<f64>> {
    let q = &ctmc.generator;
    check_absorption(&ctmc.labels, &ctmc.absorbing, |i, j| q[(i, j)] > 0.0)?;
    let tr = ctmc.transient_states();
    let k = tr.len();
    let a = DMatrix::from_fn(k, k, |r, c| q[(tr[r], tr[c])]);
    let b = DVector::from_fn(k, |r, _| -ctmc.initial[tr[r]]);
    let x = solve_row(a, b)?;
    let mut full = vec![0.0; ctmc.labels.len()];
    for (r, &s) in tr.iter().enumerate() {
        full[s] = x[r];
    }
    Ok(full)
}

/// Expected number of visits to each transient state: solves
/// `n (I - P_T) = pi0_T`. Every self-loop firing counts as a visit.
/// Absorbing entries are 0.
pub fn expected_visits(dtmc: &EmbeddedDtmc, initial: &[f64]) -> Result<Vec<f64>> {
    let p = &dtmc.transition;
    if initial.len() != dtmc.labels.len() {
        return Err(Error::InvalidArgument(format!(
            "initial distribution has {} entries for {} states",
            initial.len(),
            dtmc.labels.len()
        )));
    }
    check_absorption(&dtmc.labels, &dtmc.absorbing, |i, j| i != j && p[(i, j)] > 0.0)?;
    let tr: Vec<usize> = (0..dtmc.labels.len()).filter(|&i| !dtmc.absorbing[i]).collect();
    let k = tr.len();
    let a = DMatrix::from_fn(k, k, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - p[(tr[r], tr[c])]
    });
    let b = DVector::from_fn(k, |r, _| initial[tr[r]]);
    let n = solve_row(a, b)?;
    let mut full = vec![0.0; dtmc.labels.len()];
    for (r, &s) in tr.iter().enumerate() {
        full[s] = n[r];
    }
    Ok(full)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cumulative {
    pub per_state: Vec<f64>,
    pub session_duration: f64,
}

/// `sigma_i = n_i * ST_i` and their sum.
pub fn cumulative_sojourn(visits: &[f64], sojourn: &[f64]) -> Result<Cumulative> {
    if visits.len() != sojourn.len() {
        return Err(Error::InvalidArgument(format!(
            "visit vector has {} entries, sojourn vector {}",
            visits.len(),
            sojourn.len()
        )));
    }
    let per_state: Vec<f64> = visits.iter().zip(sojourn).map(|(n, s)| n * s).collect();
    let session_duration = per_state.iter().fold(0.0, |a, b| a + b);
    Ok(Cumulative {
        per_state,
        session_duration,
    })
}

/// Stationary distribution of an irreducible chain (`pi Q = 0`, `sum pi = 1`).
pub fn steady_state(ctmc: &Ctmc) -> Result<Vec<f64>> {
    if let Some(i) = ctmc.absorbing.iter().position(|&a| a) {
        return Err(Error::SteadyStateMeaningless(ctmc.labels[i].clone()));
    }
    let n = ctmc.labels.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty chain".into()));
    }
    // pi Q = 0 with the last balance equation replaced by normalisation.
    let mut a = ctmc.generator.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular("balance equations (chain not irreducible)".into()))?;
    if pi.iter().any(|&v| !v.is_finite() || v < -1e-9) {
        return Err(Error::Singular("balance equations (chain not irreducible)".into()));
    }
    Ok(pi.iter().map(|&v| v.max(0.0)).collect())
}

/// One state's row of the measures table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureRow {
    pub marking: String,
    pub sojourn_s: Sojourn,
    pub occupancy_s: Option<f64>,
    pub visits: Option<f64>,
    pub cumulative_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransientMeasures {
    pub rows: Vec<MeasureRow>,
    /// Σ cumulative sojourn over transient states, seconds.
    pub session_duration: f64,
}

impl TransientMeasures {
    pub fn row(&self, marking: &str) -> Option<&MeasureRow> {
        self.rows.iter().find(|r| r.marking == marking)
    }
}

/// All four transient measures for every state, in graph order.
pub fn transient_measures(graph: &TangibleGraph) -> Result<TransientMeasures> {
    let st = sojourn_times(graph)?;
    let ctmc = Ctmc::from_graph(graph)?;
    let dtmc = EmbeddedDtmc::from_graph(graph)?;
    let x = time_to_absorption(&ctmc)?;
    let n = expected_visits(&dtmc, &graph.initial)?;
    let st_finite: Vec<f64> = st.iter().map(|s| s.seconds().unwrap_or(0.0)).collect();
    let cum = cumulative_sojourn(&n, &st_finite)?;
    let rows = (0..graph.states.len())
        .map(|i| {
            let transient = !graph.is_absorbing(i);
            MeasureRow {
                marking: graph.label(i),
                sojourn_s: st[i],
                occupancy_s: transient.then_some(x[i]),
                visits: transient.then_some(n[i]),
                cumulative_s: transient.then_some(cum.per_state[i]),
            }
        })
        .collect();
    Ok(TransientMeasures {
        rows,
        session_duration: cum.session_duration,
    })
}
