use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::session::SessionSequence;
use super::PageTable;
use crate::error::{Error, Result};
use crate::gspn::{GspnModel, Marking, ParameterSet};

/// Page to model place, plus the place a session ends in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaceMapping {
    pages: BTreeMap<String, String>,
    pub end_place: String,
}

impl PlaceMapping {
    pub fn new(end_place: impl Into<String>) -> Self {
        PlaceMapping {
            pages: BTreeMap::new(),
            end_place: end_place.into(),
        }
    }

    pub fn from_pages(table: &PageTable, end_place: impl Into<String>) -> Self {
        let mut m = PlaceMapping::new(end_place);
        for (page, place) in table.places() {
            m.insert(page, place);
        }
        m
    }

    pub fn insert(&mut self, page: &str, place: impl Into<String>) {
        self.pages.insert(page.to_lowercase(), place.into());
    }

    pub fn place(&self, page: &str) -> Option<&str> {
        self.pages.get(&page.to_lowercase()).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    #[serde(serialize_with = "ser_params")]
    pub params: ParameterSet,
    pub firings: BTreeMap<String, u64>,
    pub exposure_s: BTreeMap<String, f64>,
    /// Observed moves with no matching enabled transition.
    pub unmatched_moves: u64,
}

fn ser_params<S: serde::Serializer>(p: &ParameterSet, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(p.iter())
}

/// Enabled timed transitions of a one-token marking: symbol and the place
/// the token moves to.
type Moves = Vec<(String, Option<String>)>;

fn moves_from(model: &GspnModel, place: &str) -> Moves {
    let m = Marking::new().with(place, 1);
    model
        .enabled_transitions(&m)
        .into_iter()
        .filter_map(|t| {
            let sym = t.rate_symbol()?.to_string();
            let next = model.fire(&m, &t.name).ok()?;
            let mut it = next.iter();
            let target = match (it.next(), it.next()) {
                (Some((p, 1)), None) => Some(p.to_string()),
                _ => None,
            };
            Some((sym, target))
        })
        .collect()
}

/// Maximum-likelihood exponential rates. Each page view is a stay in the
/// one-token marking of its place; the stay lasts until the next view (or
/// the session's recorded end) and exposes every enabled timed transition.
/// The move to the next page, or to the end place after the last view, is
/// a firing of the enabled transition producing that marking.
///
/// A session without a recorded end contributes no time after its last view.
pub fn estimate_rates(
    sessions: &[SessionSequence],
    mapping: &PlaceMapping,
    model: &GspnModel,
) -> Result<RateEstimate> {
    if sessions.is_empty() {
        return Err(Error::InvalidArgument("no sessions to estimate from".into()));
    }
    model.ensure_valid()?;
    let mut cache: HashMap<String, Moves> = HashMap::new();
    let mut firings: BTreeMap<String, u64> = BTreeMap::new();
    let mut exposure: BTreeMap<String, f64> = BTreeMap::new();
    for t in &model.transitions {
        if let Some(s) = t.rate_symbol() {
            firings.insert(s.to_string(), 0);
            exposure.insert(s.to_string(), 0.0);
        }
    }
    let mut unmatched = 0u64;
    for s in sessions {
        let places: Vec<&str> = s
            .events
            .iter()
            .map(|e| {
                mapping.place(&e.page).ok_or_else(|| {
                    Error::InvalidArgument(format!("page {:?} has no model place", e.page))
                })
            })
            .collect::<Result<_>>()?;
        for (i, &p) in places.iter().enumerate() {
            let (target, until) = match places.get(i + 1) {
                Some(&q) => (q, Some(s.events[i + 1].timestamp)),
                None => (mapping.end_place.as_str(), s.end),
            };
            let dwell = until.map_or(0.0, |t| {
                (t - s.events[i].timestamp).num_milliseconds() as f64 / 1000.0
            });
            let moves = cache
                .entry(p.to_string())
                .or_insert_with(|| moves_from(model, p));
            for (sym, _) in moves.iter() {
                *exposure.get_mut(sym).expect("symbol registered") += dwell;
            }
            match moves.iter().find(|(_, t)| t.as_deref() == Some(target)) {
                Some((sym, _)) => *firings.get_mut(sym).expect("symbol registered") += 1,
                None => unmatched += 1,
            }
        }
    }
    let mut params = ParameterSet::new();
    for (sym, &t) in &exposure {
        if t <= 0.0 {
            return Err(Error::NoExposure(sym.clone()));
        }
        let k = firings[sym];
        if k == 0 {
            return Err(Error::InvalidArgument(format!(
                "no firings observed for {sym}; its estimate would be zero"
            )));
        }
        params.insert(sym.clone(), k as f64 / t)?;
    }
    Ok(RateEstimate {
        params,
        firings,
        exposure_s: exposure,
        unmatched_moves: unmatched,
    })
}
