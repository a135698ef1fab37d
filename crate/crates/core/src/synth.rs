//! Synthetic sessions drawn from a one-token net by racing exponential
//! clocks, for checking the miners against known rates.

use std::collections::BTreeMap;

use chrono::{DateTime, TimeDelta, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::gspn::{GspnModel, Marking, ParameterSet, TransitionKind};
use crate::logs::{Category, SessionEvent, SessionSequence};

/// Upper bound on views per session; longer walks are reported as errors.
pub const MAX_EVENTS: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub sessions: usize,
    pub seed: u64,
    /// Start of the first session. Session `i` starts `i * spacing` later.
    pub start: DateTime<Utc>,
    pub spacing: TimeDelta,
    /// Page name per place. Places not listed use their own name.
    pub pages: BTreeMap<String, String>,
}

impl SynthConfig {
    pub fn new(sessions: usize, seed: u64) -> Self {
        SynthConfig {
            sessions,
            seed,
            start: DateTime::<Utc>::from_timestamp(1_420_070_400, 0).expect("valid epoch"),
            spacing: TimeDelta::days(1),
            pages: BTreeMap::new(),
        }
    }
}

fn single_place(m: &Marking) -> Option<&str> {
    let mut it = m.iter();
    match (it.next(), it.next()) {
        (Some((p, 1)), None) => Some(p),
        _ => None,
    }
}

/// Walks the token from the initial marking until no transition is enabled.
/// Every enabled timed transition draws an exponential delay; the smallest
/// fires. Each entered marking is one page view, and the session's `end` is
/// the absorption time. Timestamps have millisecond resolution.
pub fn synthesize_sessions(model: &GspnModel, params: &ParameterSet, cfg: &SynthConfig) -> Result<Vec<SessionSequence>> {
    model.ensure_valid()?;
    let rates = model.bind(params)?;
    let index: BTreeMap<&str, usize> = model
        .transitions
        .iter()
        .enumerate()
        .map(|(i, t)| (t.name.as_str(), i))
        .collect();
    let categories: BTreeMap<&str, Category> = model
        .places
        .iter()
        .map(|p| {
            let c = p
                .category
                .as_deref()
                .and_then(|c| c.parse().ok())
                .unwrap_or(Category::Control);
            (p.name.as_str(), c)
        })
        .collect();
    let mut out = Vec::with_capacity(cfg.sessions);
    for i in 0..cfg.sessions {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let mut m = model.initial_marking.clone();
        let start = cfg.start + cfg.spacing * i as i32;
        let mut clock = 0.0f64;
        let mut events = Vec::new();
        loop {
            let enabled = model.enabled_transitions(&m);
            if enabled.is_empty() {
                break;
            }
            let place = single_place(&m).ok_or_else(|| {
                Error::InvalidModel(format!("marking {m} is not a single token"))
            })?;
            if events.len() >= MAX_EVENTS {
                return Err(Error::InvalidArgument(format!(
                    "session {i} exceeded {MAX_EVENTS} views"
                )));
            }
            events.push(SessionEvent {
                timestamp: start + TimeDelta::milliseconds((clock * 1000.0).round() as i64),
                page: cfg.pages.get(place).cloned().unwrap_or_else(|| place.to_string()),
                category: categories[place],
            });
            let mut winner: Option<(f64, &str)> = None;
            for t in &enabled {
                if !matches!(t.kind, TransitionKind::Timed { .. }) {
                    return Err(Error::InvalidModel(format!(
                        "immediate transition {} enabled; synthetic sessions need timed nets",
                        t.name
                    )));
                }
                let rate = rates[index[t.name.as_str()]];
                let d = Exp::new(rate)
                    .map_err(|_| Error::ZeroRate(t.name.clone()))?
                    .sample(&mut rng);
                if winner.is_none_or(|(w, _)| d < w) {
                    winner = Some((d, &t.name));
                }
            }
            let (d, name) = winner.expect("nonempty enabled set");
            clock += d;
            m = model.fire(&m, name)?;
        }
        if events.is_empty() {
            continue;
        }
        out.push(SessionSequence {
            user_id: format!("s{i:06}"),
            events,
            end: Some(start + TimeDelta::milliseconds((clock * 1000.0).round() as i64)),
        });
    }
    Ok(out)
}

/// A first-order Markov chain over labels, for drawing test sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub labels: Vec<String>,
    pub initial: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    /// Inclusive length range, drawn uniformly per sequence.
    pub min_len: usize,
    pub max_len: usize,
}

fn weighted(w: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(w).map_err(|e| Error::InvalidArgument(format!("bad weights {w:?}: {e}")))
}

/// Draws `n` sequences; sequence `i` uses ChaCha8 stream `i` of `seed`.
pub fn sample_sequences(spec: &ChainSpec, n: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    let s = spec.labels.len();
    if spec.initial.len() != s || spec.transition.len() != s || spec.min_len > spec.max_len {
        return Err(Error::InvalidArgument("inconsistent chain spec".into()));
    }
    let init = weighted(&spec.initial)?;
    let rows = spec
        .transition
        .iter()
        .map(|r| weighted(r))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let len = rng.random_range(spec.min_len..=spec.max_len);
            let mut out = Vec::with_capacity(len);
            if len == 0 {
                return out;
            }
            let mut x = init.sample(&mut rng);
            out.push(spec.labels[x].clone());
            for _ in 1..len {
                x = rows[x].sample(&mut rng);
                out.push(spec.labels[x].clone());
            }
            out
        })
        .collect())
}
