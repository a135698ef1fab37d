//! Generalized stochastic Petri net model and token-game semantics.
//!
//! A [`GspnModel`] is a plain description: places, timed and immediate
//! transitions with weighted arcs, symbolic rate parameters and an initial
//! marking. Rates are bound late through a [`ParameterSet`], so the same
//! structure can be solved under several parameterisations.

mod format;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{parse_model, parse_params, write_model, write_params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Place {
    pub name: String,
    /// Opaque grouping tag; the engine attaches no meaning to it.
    pub category: Option<String>,
}

impl Place {
    pub fn new(name: impl Into<String>) -> Self {
        Place {
            name: name.into(),
            category: None,
        }
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }
}

/// An input or output arc.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub place: String,
    pub multiplicity: u32,
}

/// Firing rate of a timed transition, in 1/second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Rate {
    Symbol(String),
    Value(f64),
}

impl Rate {
    pub fn symbol(s: impl Into<String>) -> Self {
        Rate::Symbol(s.into())
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Symbol(s) => f.write_str(s),
            Rate::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TransitionKind {
    /// Exponentially distributed firing delay.
    Timed { rate: Rate },
    /// Zero-delay firing; `weight` resolves conflicts within a priority level,
    /// higher `priority` levels pre-empt lower ones.
    Immediate { weight: f64, priority: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub name: String,
    pub kind: TransitionKind,
    pub inputs: Vec<Arc>,
    pub outputs: Vec<Arc>,
}

impl Transition {
    pub fn timed(name: impl Into<String>, rate: Rate) -> Self {
        Transition {
            name: name.into(),
            kind: TransitionKind::Timed { rate },
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn immediate(name: impl Into<String>, weight: f64, priority: u32) -> Self {
        Transition {
            name: name.into(),
            kind: TransitionKind::Immediate { weight, priority },
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(mut self, place: impl Into<String>, multiplicity: u32) -> Self {
        self.inputs.push(Arc {
            place: place.into(),
            multiplicity,
        });
        self
    }

    pub fn output(mut self, place: impl Into<String>, multiplicity: u32) -> Self {
        self.outputs.push(Arc {
            place: place.into(),
            multiplicity,
        });
        self
    }

    pub fn is_timed(&self) -> bool {
        matches!(self.kind, TransitionKind::Timed { .. })
    }

    pub fn rate_symbol(&self) -> Option<&str> {
        match &self.kind {
            TransitionKind::Timed {
                rate: Rate::Symbol(s),
            } => Some(s),
            _ => None,
        }
    }

    /// Every input place holds at least its arc multiplicity. Repeated arcs
    /// from one place add up.
    pub fn token_enabled(&self, marking: &Marking) -> bool {
        let mut need: BTreeMap<&str, u64> = BTreeMap::new();
        for a in &self.inputs {
            *need.entry(a.place.as_str()).or_default() += u64::from(a.multiplicity);
        }
        need.iter()
            .all(|(p, &k)| u64::from(marking.tokens(p)) >= k)
    }

    /// Rate for timed transitions, weight for immediate ones.
    pub fn resolve_rate(&self, params: &ParameterSet) -> Result<f64> {
        match &self.kind {
            TransitionKind::Timed {
                rate: Rate::Value(v),
            } => Ok(*v),
            TransitionKind::Timed {
                rate: Rate::Symbol(s),
            } => params
                .get(s)
                .ok_or_else(|| Error::UnboundParameter(s.clone())),
            TransitionKind::Immediate { weight, .. } => Ok(*weight),
        }
    }
}

/// Token distribution over places. Places absent from the map hold zero
/// tokens; zero counts are never stored, so equality is structural.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Marking(BTreeMap<String, u32>);

impl Marking {
    pub fn new() -> Self {
        Marking::default()
    }

    pub fn tokens(&self, place: &str) -> u32 {
        self.0.get(place).copied().unwrap_or(0)
    }

    pub fn set(&mut self, place: impl Into<String>, count: u32) {
        let place = place.into();
        if count == 0 {
            self.0.remove(&place);
        } else {
            self.0.insert(place, count);
        }
    }

    pub fn with(mut self, place: impl Into<String>, count: u32) -> Self {
        self.set(place, count);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(p, &n)| (p.as_str(), n))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_tokens(&self) -> u64 {
        self.0.values().map(|&n| u64::from(n)).sum()
    }

    /// Short state name: `M_A` for a single token in `A`, otherwise the
    /// places joined with `+` and prefixed by their count when above one.
    pub fn label(&self) -> String {
        if self.0.is_empty() {
            return "M_0".to_string();
        }
        let body: Vec<String> = self
            .0
            .iter()
            .map(|(p, &n)| if n == 1 { p.clone() } else { format!("{n}{p}") })
            .collect();
        format!("M_{}", body.join("+"))
    }
}

impl<S: Into<String>> FromIterator<(S, u32)> for Marking {
    fn from_iter<I: IntoIterator<Item = (S, u32)>>(iter: I) -> Self {
        let mut m = Marking::new();
        for (p, n) in iter {
            let p = p.into();
            let prev = m.tokens(&p);
            m.set(p, prev + n);
        }
        m
    }
}

impl fmt::Display for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (p, n)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}:{n}")?;
        }
        f.write_str("}")
    }
}

/// Values for symbolic rates (1/second). Every value is positive and finite.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet(BTreeMap<String, f64>);

impl ParameterSet {
    pub fn new() -> Self {
        ParameterSet::default()
    }

    pub fn insert(&mut self, symbol: impl Into<String>, value: f64) -> Result<()> {
        let symbol = symbol.into();
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParameter { symbol, value });
        }
        self.0.insert(symbol, value);
        Ok(())
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let mut set = ParameterSet::new();
        for (s, v) in pairs {
            set.insert(s, v)?;
        }
        Ok(set)
    }

    pub fn get(&self, symbol: &str) -> Option<f64> {
        self.0.get(symbol).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(s, &v)| (s.as_str(), v))
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A structural defect found by [`GspnModel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicatePlace(String),
    DuplicateTransition(String),
    DuplicateParameter(String),
    UnknownPlace { transition: String, place: String },
    UnknownInitialPlace(String),
    NonPositiveMultiplicity { transition: String, place: String },
    UndeclaredParameter { transition: String, symbol: String },
    NonPositiveRate { transition: String },
    NonPositiveWeight { transition: String },
    ZeroPriority { transition: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicatePlace(p) => write!(f, "duplicate place {p:?}"),
            Violation::DuplicateTransition(t) => write!(f, "duplicate transition {t:?}"),
            Violation::DuplicateParameter(s) => write!(f, "duplicate parameter {s:?}"),
            Violation::UnknownPlace { transition, place } => {
                write!(f, "transition {transition:?}: unknown place {place:?}")
            }
            Violation::UnknownInitialPlace(p) => {
                write!(f, "initial marking: unknown place {p:?}")
            }
            Violation::NonPositiveMultiplicity { transition, place } => write!(
                f,
                "transition {transition:?}: nonpositive multiplicity on arc to {place:?}"
            ),
            Violation::UndeclaredParameter { transition, symbol } => {
                write!(f, "transition {transition:?}: undeclared parameter {symbol:?}")
            }
            Violation::NonPositiveRate { transition } => {
                write!(f, "transition {transition:?}: rate must be positive and finite")
            }
            Violation::NonPositiveWeight { transition } => {
                write!(f, "transition {transition:?}: weight must be positive and finite")
            }
            Violation::ZeroPriority { transition } => {
                write!(f, "transition {transition:?}: priority must be at least 1")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GspnModel {
    pub name: String,
    pub places: Vec<Place>,
    pub transitions: Vec<Transition>,
    /// Declared rate symbols.
    pub parameters: Vec<String>,
    pub initial_marking: Marking,
}

impl GspnModel {
    pub fn new(name: impl Into<String>) -> Self {
        GspnModel {
            name: name.into(),
            places: Vec::new(),
            transitions: Vec::new(),
            parameters: Vec::new(),
            initial_marking: Marking::new(),
        }
    }

    pub fn place(&self, name: &str) -> Option<&Place> {
        self.places.iter().find(|p| p.name == name)
    }

    pub fn transition(&self, name: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.name == name)
    }

    /// Collects every structural defect. Violations are data: an empty
    /// report means every other operation accepts the model.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();

        let mut places = BTreeSet::new();
        for p in &self.places {
            if !places.insert(p.name.as_str()) {
                violations.push(Violation::DuplicatePlace(p.name.clone()));
            }
        }
        let mut params = BTreeSet::new();
        for s in &self.parameters {
            if !params.insert(s.as_str()) {
                violations.push(Violation::DuplicateParameter(s.clone()));
            }
        }
        for (p, _) in self.initial_marking.iter() {
            if !places.contains(p) {
                violations.push(Violation::UnknownInitialPlace(p.to_string()));
            }
        }

        let mut names = BTreeSet::new();
        for t in &self.transitions {
            if !names.insert(t.name.as_str()) {
                violations.push(Violation::DuplicateTransition(t.name.clone()));
            }
            for arc in t.inputs.iter().chain(&t.outputs) {
                if !places.contains(arc.place.as_str()) {
                    violations.push(Violation::UnknownPlace {
                        transition: t.name.clone(),
                        place: arc.place.clone(),
                    });
                }
                if arc.multiplicity == 0 {
                    violations.push(Violation::NonPositiveMultiplicity {
                        transition: t.name.clone(),
                        place: arc.place.clone(),
                    });
                }
            }
            match &t.kind {
                TransitionKind::Timed {
                    rate: Rate::Symbol(s),
                } => {
                    if !params.contains(s.as_str()) {
                        violations.push(Violation::UndeclaredParameter {
                            transition: t.name.clone(),
                            symbol: s.clone(),
                        });
                    }
                }
                TransitionKind::Timed {
                    rate: Rate::Value(v),
                } => {
                    if !(v.is_finite() && *v > 0.0) {
                        violations.push(Violation::NonPositiveRate {
                            transition: t.name.clone(),
                        });
                    }
                }
                TransitionKind::Immediate { weight, priority } => {
                    if !(weight.is_finite() && *weight > 0.0) {
                        violations.push(Violation::NonPositiveWeight {
                            transition: t.name.clone(),
                        });
                    }
                    if *priority == 0 {
                        violations.push(Violation::ZeroPriority {
                            transition: t.name.clone(),
                        });
                    }
                }
            }
        }
        ValidationReport { violations }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidModel(report.to_string()))
        }
    }

    /// Transitions that may fire in `marking`.
    ///
    /// When any immediate transition is token-enabled only the token-enabled
    /// immediate transitions of the highest priority level are returned;
    /// otherwise every token-enabled timed transition. Declaration order is
    /// preserved.
    pub fn enabled_transitions(&self, marking: &Marking) -> Vec<&Transition> {
        let token_enabled: Vec<&Transition> = self
            .transitions
            .iter()
            .filter(|t| t.token_enabled(marking))
            .collect();
        let top = token_enabled
            .iter()
            .filter_map(|t| match t.kind {
                TransitionKind::Immediate { priority, .. } => Some(priority),
                TransitionKind::Timed { .. } => None,
            })
            .max();
        match top {
            Some(level) => token_enabled
                .into_iter()
                .filter(|t| {
                    matches!(t.kind, TransitionKind::Immediate { priority, .. } if priority == level)
                })
                .collect(),
            None => token_enabled,
        }
    }

    pub fn enabled_names(&self, marking: &Marking) -> Vec<&str> {
        self.enabled_transitions(marking)
            .into_iter()
            .map(|t| t.name.as_str())
            .collect()
    }

    /// Fires `transition` and returns the successor marking.
    pub fn fire(&self, marking: &Marking, transition: &str) -> Result<Marking> {
        let t = self
            .transition(transition)
            .ok_or_else(|| Error::UnknownTransition(transition.to_string()))?;
        if !self
            .enabled_transitions(marking)
            .iter()
            .any(|e| e.name == t.name)
        {
            return Err(Error::NotEnabled(transition.to_string()));
        }
        let mut next = marking.clone();
        for a in &t.inputs {
            let have = next.tokens(&a.place);
            next.set(a.place.clone(), have - a.multiplicity);
        }
        for a in &t.outputs {
            let have = next.tokens(&a.place);
            next.set(a.place.clone(), have + a.multiplicity);
        }
        Ok(next)
    }

    /// Resolves every transition's rate (timed) or weight (immediate),
    /// in declaration order.
    pub fn bind(&self, params: &ParameterSet) -> Result<Vec<f64>> {
        self.transitions
            .iter()
            .map(|t| t.resolve_rate(params))
            .collect()
    }
}

/// Index-based view of a validated model used by state-space exploration.
#[derive(Debug, Clone)]
pub(crate) struct IndexedNet {
    pub place_names: Vec<String>,
    pub transitions: Vec<IndexedTransition>,
}

#[derive(Debug, Clone)]
pub(crate) struct IndexedTransition {
    pub name: String,
    pub inputs: Vec<(usize, u32)>,
    pub outputs: Vec<(usize, u32)>,
    /// `Some(priority)` for immediate transitions.
    pub priority: Option<u32>,
    /// Rate (timed) or weight (immediate).
    pub value: f64,
}

impl IndexedNet {
    pub fn new(model: &GspnModel, params: &ParameterSet) -> Result<Self> {
        model.ensure_valid()?;
        let values = model.bind(params)?;
        for (t, v) in model.transitions.iter().zip(&values) {
            if let Some(s) = t.rate_symbol() {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(Error::InvalidParameter {
                        symbol: s.to_string(),
                        value: *v,
                    });
                }
            }
        }
        let index: HashMap<&str, usize> = model
            .places
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.as_str(), i))
            .collect();
        let arcs = |arcs: &[Arc]| -> Vec<(usize, u32)> {
            let mut merged: BTreeMap<usize, u32> = BTreeMap::new();
            for a in arcs {
                *merged.entry(index[a.place.as_str()]).or_default() += a.multiplicity;
            }
            merged.into_iter().collect()
        };
        let transitions = model
            .transitions
            .iter()
            .zip(values)
            .map(|(t, value)| IndexedTransition {
                name: t.name.clone(),
                inputs: arcs(&t.inputs),
                outputs: arcs(&t.outputs),
                priority: match t.kind {
                    TransitionKind::Immediate { priority, .. } => Some(priority),
                    TransitionKind::Timed { .. } => None,
                },
                value,
            })
            .collect();
        Ok(IndexedNet {
            place_names: model.places.iter().map(|p| p.name.clone()).collect(),
            transitions,
        })
    }

    pub fn vector(&self, marking: &Marking) -> Vec<u32> {
        self.place_names.iter().map(|p| marking.tokens(p)).collect()
    }

    pub fn marking(&self, v: &[u32]) -> Marking {
        self.place_names
            .iter()
            .zip(v)
            .map(|(p, &n)| (p.as_str(), n))
            .collect()
    }

    /// Same priority rule as [`GspnModel::enabled_transitions`], by index.
    pub fn enabled(&self, m: &[u32]) -> Vec<usize> {
        let token: Vec<usize> = (0..self.transitions.len())
            .filter(|&i| {
                self.transitions[i]
                    .inputs
                    .iter()
                    .all(|&(p, k)| m[p] >= k)
            })
            .collect();
        match token
            .iter()
            .filter_map(|&i| self.transitions[i].priority)
            .max()
        {
            Some(level) => token
                .into_iter()
                .filter(|&i| self.transitions[i].priority == Some(level))
                .collect(),
            None => token,
        }
    }

    pub fn fire(&self, m: &[u32], t: usize) -> Vec<u32> {
        let mut next = m.to_vec();
        let tr = &self.transitions[t];
        for &(p, k) in &tr.inputs {
            next[p] -= k;
        }
        for &(p, k) in &tr.outputs {
            next[p] += k;
        }
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn split_net() -> GspnModel {
        let mut m = GspnModel::new("split");
        m.places = vec![Place::new("P"), Place::new("V"), Place::new("Q")];
        m.parameters = vec!["r".into()];
        m.transitions = vec![
            Transition::timed("t1", Rate::symbol("r")).input("P", 1).output("V", 1),
            Transition::immediate("i1", 1.0, 1).input("V", 1).output("Q", 1),
            Transition::timed("t2", Rate::Value(2.0)).input("V", 1).output("P", 1),
        ];
        m.initial_marking = Marking::new().with("P", 1);
        m
    }

    #[test]
    fn unknown_place_is_reported() {
        let mut m = split_net();
        m.transitions.push(Transition::timed("tx", Rate::Value(1.0)).input("X", 1));
        let report = m.validate();
        assert_eq!(report.violations.len(), 1);
        assert!(report.to_string().contains("unknown place"));
    }

    #[test]
    fn undeclared_parameter_is_reported() {
        let mut m = split_net();
        m.transitions
            .push(Transition::timed("tz", Rate::symbol("zeta")).input("P", 1));
        let report = m.validate();
        assert!(report.to_string().contains("undeclared parameter"));
    }

    #[test]
    fn duplicates_and_bad_arcs_are_reported() {
        let mut m = split_net();
        m.places.push(Place::new("P"));
        m.transitions
            .push(Transition::immediate("t1", 0.0, 0).input("Q", 0));
        let msgs: Vec<String> = m.validate().violations.iter().map(|v| v.to_string()).collect();
        assert!(msgs.iter().any(|s| s.contains("duplicate place")));
        assert!(msgs.iter().any(|s| s.contains("duplicate transition")));
        assert!(msgs.iter().any(|s| s.contains("nonpositive multiplicity")));
        assert!(msgs.iter().any(|s| s.contains("weight")));
        assert!(msgs.iter().any(|s| s.contains("priority")));
    }

    #[test]
    fn immediate_preempts_timed() {
        let m = split_net();
        let v = Marking::new().with("V", 1);
        assert_eq!(m.enabled_names(&v), vec!["i1"]);
        assert!(m.enabled_names(&Marking::new()).is_empty());
    }

    #[test]
    fn higher_priority_level_wins() {
        let mut m = split_net();
        m.transitions
            .push(Transition::immediate("i2", 5.0, 2).input("V", 1).output("P", 1));
        let v = Marking::new().with("V", 1);
        assert_eq!(m.enabled_names(&v), vec!["i2"]);
    }

    #[test]
    fn firing_non_enabled_transition_fails() {
        let m = split_net();
        let err = m.fire(&Marking::new().with("Q", 1), "t1").unwrap_err();
        assert_eq!(err, Error::NotEnabled("t1".into()));
        assert!(matches!(
            m.fire(&m.initial_marking, "nope"),
            Err(Error::UnknownTransition(_))
        ));
    }

    #[test]
    fn firing_moves_tokens() {
        let m = split_net();
        let next = m.fire(&m.initial_marking, "t1").unwrap();
        assert_eq!(next, Marking::new().with("V", 1));
        // input untouched
        assert_eq!(m.initial_marking, Marking::new().with("P", 1));
    }

    #[test]
    fn marking_labels() {
        assert_eq!(Marking::new().with("ML", 1).label(), "M_ML");
        assert_eq!(Marking::new().with("A", 1).with("B", 2).label(), "M_A+2B");
        assert_eq!(Marking::new().with("A", 0), Marking::new());
    }

    #[test]
    fn parameter_values_must_be_positive() {
        let mut p = ParameterSet::new();
        assert!(p.insert("a", 0.0).is_err());
        assert!(p.insert("a", f64::NAN).is_err());
        assert!(p.insert("a", 0.5).is_ok());
    }

    fn random_net() -> impl Strategy<Value = (GspnModel, Vec<u32>)> {
        let arc = (0usize..4, 1u32..3);
        let trans = (
            prop::collection::vec(arc.clone(), 0..3),
            prop::collection::vec(arc, 0..3),
            any::<bool>(),
            1u32..3,
        );
        (
            prop::collection::vec(trans, 1..6),
            prop::collection::vec(0u32..4, 4),
        )
            .prop_map(|(ts, tokens)| {
                let mut m = GspnModel::new("rand");
                m.places = (0..4).map(|i| Place::new(format!("p{i}"))).collect();
                for (i, (ins, outs, timed, prio)) in ts.into_iter().enumerate() {
                    let mut t = if timed {
                        Transition::timed(format!("t{i}"), Rate::Value(1.0))
                    } else {
                        Transition::immediate(format!("t{i}"), 1.0, prio)
                    };
                    for (p, k) in ins {
                        t = t.input(format!("p{p}"), k);
                    }
                    for (p, k) in outs {
                        t = t.output(format!("p{p}"), k);
                    }
                    m.transitions.push(t);
                }
                (m, tokens)
            })
    }

    fn marking_of(tokens: &[u32]) -> Marking {
        tokens
            .iter()
            .enumerate()
            .map(|(i, &n)| (format!("p{i}"), n))
            .collect()
    }

    proptest! {
        #[test]
        fn firing_conserves_tokens_per_place((model, tokens) in random_net()) {
            let m = marking_of(&tokens);
            for t in model.enabled_transitions(&m) {
                let next = model.fire(&m, &t.name).unwrap();
                for i in 0..4 {
                    let p = format!("p{i}");
                    let inn: u32 = t.inputs.iter().filter(|a| a.place == p).map(|a| a.multiplicity).sum();
                    let out: u32 = t.outputs.iter().filter(|a| a.place == p).map(|a| a.multiplicity).sum();
                    prop_assert_eq!(i64::from(next.tokens(&p)), i64::from(m.tokens(&p)) - i64::from(inn) + i64::from(out));
                }
                // determinism
                prop_assert_eq!(next, model.fire(&m, &t.name).unwrap());
            }
        }

        #[test]
        fn adding_tokens_never_disables((model, tokens) in random_net(), extra in prop::collection::vec(0u32..3, 4)) {
            let m = marking_of(&tokens);
            let bigger: Vec<u32> = tokens.iter().zip(&extra).map(|(a, b)| a + b).collect();
            let bm = marking_of(&bigger);
            for t in &model.transitions {
                if t.token_enabled(&m) {
                    prop_assert!(t.token_enabled(&bm));
                }
            }
        }
    }
}
