//! Reachability graph construction and vanishing-marking elimination.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gspn::{GspnModel, IndexedNet, Marking, ParameterSet};

pub const DEFAULT_STATE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Tangible,
    Vanishing,
    Absorbing,
}

/// Classifies a marking by the kinds of its enabled transitions.
pub fn classify_marking(model: &GspnModel, marking: &Marking) -> StateKind {
    let enabled = model.enabled_transitions(marking);
    if enabled.is_empty() {
        StateKind::Absorbing
    } else if enabled.iter().any(|t| !t.is_timed()) {
        StateKind::Vanishing
    } else {
        StateKind::Tangible
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachState {
    pub marking: Marking,
    pub kind: StateKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum EdgeLabel {
    /// Exponential rate of a timed transition, 1/second.
    Rate(f64),
    /// Normalized weight of an immediate transition.
    Probability(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachEdge {
    pub source: usize,
    pub target: usize,
    pub transition: String,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachabilityGraph {
    pub states: Vec<ReachState>,
    pub edges: Vec<ReachEdge>,
    pub initial: usize,
}

/// Breadth-first exploration from the initial marking with transitions tried
/// in declaration order. Fails once more than `limit` distinct markings have
/// been discovered.
pub fn build_reachability_graph_with_limit(
    model: &GspnModel,
    params: &ParameterSet,
    limit: usize,
) -> Result<ReachabilityGraph> {
    let net = IndexedNet::new(model, params)?;
    let start = net.vector(&model.initial_marking);

    let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut vectors: Vec<Vec<u32>> = Vec::new();
    let mut queue = VecDeque::new();
    index.insert(start.clone(), 0);
    vectors.push(start);
    queue.push_back(0usize);

    let mut kinds = Vec::new();
    let mut edges = Vec::new();
    while let Some(s) = queue.pop_front() {
        let enabled = net.enabled(&vectors[s]);
        let immediate = enabled
            .first()
            .is_some_and(|&t| net.transitions[t].priority.is_some());
        kinds.push(if enabled.is_empty() {
            StateKind::Absorbing
        } else if immediate {
            StateKind::Vanishing
        } else {
            StateKind::Tangible
        });
        let weight_sum: f64 = enabled.iter().map(|&t| net.transitions[t].value).sum();
        for t in enabled {
            let next = net.fire(&vectors[s], t);
            let target = match index.get(&next) {
                Some(&i) => i,
                None => {
                    let i = vectors.len();
                    if i >= limit {
                        return Err(Error::StateLimit(limit));
                    }
                    index.insert(next.clone(), i);
                    vectors.push(next);
                    queue.push_back(i);
                    i
                }
            };
            let tr = &net.transitions[t];
            let label = if immediate {
                EdgeLabel::Probability(tr.value / weight_sum)
            } else {
                EdgeLabel::Rate(tr.value)
            };
            edges.push(ReachEdge {
                source: s,
                target,
                transition: tr.name.clone(),
                label,
            });
        }
    }

    let states = vectors
        .iter()
        .zip(kinds)
        .map(|(v, kind)| ReachState {
            marking: net.marking(v),
            kind,
        })
        .collect();
    Ok(ReachabilityGraph {
        states,
        edges,
        initial: 0,
    })
}

pub fn build_reachability_graph(
    model: &GspnModel,
    params: &ParameterSet,
) -> Result<ReachabilityGraph> {
    build_reachability_graph_with_limit(model, params, DEFAULT_STATE_LIMIT)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangibleEdge {
    pub source: usize,
    pub target: usize,
    /// Timed transition that starts the move.
    pub transition: String,
    pub rate: f64,
}

/// Tangible and absorbing states only; vanishing paths are folded into rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangibleGraph {
    pub states: Vec<ReachState>,
    pub edges: Vec<TangibleEdge>,
    /// Initial probability over `states`; more than one entry is non-zero
    /// only when the initial marking is vanishing.
    pub initial: Vec<f64>,
}

impl TangibleGraph {
    pub fn is_absorbing(&self, state: usize) -> bool {
        self.states[state].kind == StateKind::Absorbing
    }

    pub fn label(&self, state: usize) -> String {
        self.states[state].marking.label()
    }

    /// Σ rates of edges leaving `state`, self-loops included.
    pub fn total_rate(&self, state: usize) -> f64 {
        self.edges
            .iter()
            .filter(|e| e.source == state)
            .map(|e| e.rate)
            .sum()
    }

    pub fn index_of(&self, marking: &Marking) -> Option<usize> {
        self.states.iter().position(|s| &s.marking == marking)
    }
}

/// Probability of reaching each tangible (graph-index) state from vanishing
/// state `v`, memoized over the vanishing DAG.
fn vanishing_distribution(
    graph: &ReachabilityGraph,
    out: &[Vec<usize>],
    v: usize,
    memo: &mut HashMap<usize, BTreeMap<usize, f64>>,
    on_stack: &mut Vec<usize>,
) -> Result<BTreeMap<usize, f64>> {
    if let Some(d) = memo.get(&v) {
        return Ok(d.clone());
    }
    if on_stack.contains(&v) {
        let cycle: Vec<String> = on_stack
            .iter()
            .skip_while(|&&s| s != v)
            .map(|&s| graph.states[s].marking.label())
            .collect();
        return Err(Error::VanishingLoop(cycle.join(" -> ")));
    }
    on_stack.push(v);
    let mut dist = BTreeMap::new();
    for &e in &out[v] {
        let edge = &graph.edges[e];
        let p = match edge.label {
            EdgeLabel::Probability(p) => p,
            EdgeLabel::Rate(_) => unreachable!("vanishing states only carry immediate edges"),
        };
        if graph.states[edge.target].kind == StateKind::Vanishing {
            let sub = vanishing_distribution(graph, out, edge.target, memo, on_stack)?;
            for (t, q) in sub {
                *dist.entry(t).or_insert(0.0) += p * q;
            }
        } else {
            *dist.entry(edge.target).or_insert(0.0) += p;
        }
    }
    on_stack.pop();
    memo.insert(v, dist.clone());
    Ok(dist)
}

/// Removes vanishing states, redistributing each timed edge that enters one
/// over the tangible states reachable through immediate firings.
pub fn eliminate_vanishing(graph: &ReachabilityGraph) -> Result<TangibleGraph> {
    let mut out = vec![Vec::new(); graph.states.len()];
    for (i, e) in graph.edges.iter().enumerate() {
        out[e.source].push(i);
    }

    let mut memo = HashMap::new();
    let mut stack = Vec::new();
    for (s, st) in graph.states.iter().enumerate() {
        if st.kind == StateKind::Vanishing {
            vanishing_distribution(graph, &out, s, &mut memo, &mut stack)?;
        }
    }

    let mut renumber = vec![usize::MAX; graph.states.len()];
    let mut states = Vec::new();
    for (s, st) in graph.states.iter().enumerate() {
        if st.kind != StateKind::Vanishing {
            renumber[s] = states.len();
            states.push(st.clone());
        }
    }

    let mut edges: Vec<TangibleEdge> = Vec::new();
    for (s, st) in graph.states.iter().enumerate() {
        if st.kind == StateKind::Vanishing {
            continue;
        }
        for &e in &out[s] {
            let edge = &graph.edges[e];
            let rate = match edge.label {
                EdgeLabel::Rate(r) => r,
                EdgeLabel::Probability(_) => unreachable!("non-vanishing states carry timed edges"),
            };
            let targets = if graph.states[edge.target].kind == StateKind::Vanishing {
                memo[&edge.target].clone()
            } else {
                BTreeMap::from([(edge.target, 1.0)])
            };
            for (t, p) in targets {
                edges.push(TangibleEdge {
                    source: renumber[s],
                    target: renumber[t],
                    transition: edge.transition.clone(),
                    rate: rate * p,
                });
            }
        }
    }

    let mut initial = vec![0.0; states.len()];
    if graph.states[graph.initial].kind == StateKind::Vanishing {
        for (&t, &p) in &memo[&graph.initial] {
            initial[renumber[t]] += p;
        }
    } else {
        initial[renumber[graph.initial]] = 1.0;
    }

    Ok(TangibleGraph {
        states,
        edges,
        initial,
    })
}

/// Builds and reduces in one step.
pub fn tangible_graph(model: &GspnModel, params: &ParameterSet) -> Result<TangibleGraph> {
    eliminate_vanishing(&build_reachability_graph(model, params)?)
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn node_shape(kind: StateKind) -> &'static str {
    match kind {
        StateKind::Tangible => "ellipse",
        StateKind::Vanishing => "diamond",
        StateKind::Absorbing => "doublecircle",
    }
}

/// DOT rendering with node ids `s0..sN` in canonical state order.
pub fn reachability_dot(graph: &ReachabilityGraph, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", dot_escape(name));
    let _ = writeln!(out, "  rankdir=LR;");
    for (i, s) in graph.states.iter().enumerate() {
        let _ = writeln!(
            out,
            "  s{i} [label=\"{}\", shape={}];",
            dot_escape(&s.marking.label()),
            node_shape(s.kind)
        );
    }
    for e in &graph.edges {
        let label = match e.label {
            EdgeLabel::Rate(r) => format!("{}:{r}", e.transition),
            EdgeLabel::Probability(p) => format!("{}:{p}", e.transition),
        };
        let _ = writeln!(
            out,
            "  s{} -> s{} [label=\"{}\"];",
            e.source,
            e.target,
            dot_escape(&label)
        );
    }
    out.push_str("}\n");
    out
}

pub fn tangible_dot(graph: &TangibleGraph, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", dot_escape(name));
    let _ = writeln!(out, "  rankdir=LR;");
    for (i, s) in graph.states.iter().enumerate() {
        let _ = writeln!(
            out,
            "  s{i} [label=\"{}\", shape={}];",
            dot_escape(&s.marking.label()),
            node_shape(s.kind)
        );
    }
    for e in &graph.edges {
        let _ = writeln!(
            out,
            "  s{} -> s{} [label=\"{}:{}\"];",
            e.source,
            e.target,
            dot_escape(&e.transition),
            e.rate
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gspn::{Place, Rate, Transition};

    /// P --t1(r)--> V, then V splits by weights 1:3 into Q and R.
    fn split_net() -> GspnModel {
        let mut m = GspnModel::new("split");
        m.places = ["P", "V", "Q", "R"].iter().map(|p| Place::new(*p)).collect();
        m.transitions = vec![
            Transition::timed("t1", Rate::Value(2.0)).input("P", 1).output("V", 1),
            Transition::immediate("toQ", 1.0, 1).input("V", 1).output("Q", 1),
            Transition::immediate("toR", 3.0, 1).input("V", 1).output("R", 1),
        ];
        m.initial_marking = Marking::new().with("P", 1);
        m
    }

    #[test]
    fn split_has_one_vanishing_state() {
        let g = build_reachability_graph(&split_net(), &ParameterSet::new()).unwrap();
        assert_eq!(g.states.len(), 4);
        let kinds: Vec<StateKind> = g.states.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![
                StateKind::Tangible,
                StateKind::Vanishing,
                StateKind::Absorbing,
                StateKind::Absorbing
            ]
        );
    }

    #[test]
    fn weights_become_rate_fractions() {
        let g = build_reachability_graph(&split_net(), &ParameterSet::new()).unwrap();
        let t = eliminate_vanishing(&g).unwrap();
        assert_eq!(t.states.len(), 3);
        let rates: Vec<f64> = t.edges.iter().map(|e| e.rate).collect();
        assert_eq!(rates, vec![0.25 * 2.0, 0.75 * 2.0]);
    }

    #[test]
    fn nothing_enabled_gives_single_absorbing_state() {
        let mut m = GspnModel::new("dead");
        m.places = vec![Place::new("P")];
        m.transitions = vec![Transition::timed("t", Rate::Value(1.0)).input("P", 1)];
        let g = build_reachability_graph(&m, &ParameterSet::new()).unwrap();
        assert_eq!(g.states.len(), 1);
        assert_eq!(g.states[0].kind, StateKind::Absorbing);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn vanishing_initial_marking_spreads_initial_distribution() {
        let mut m = split_net();
        m.initial_marking = Marking::new().with("V", 1);
        let t = tangible_graph(&m, &ParameterSet::new()).unwrap();
        let q = t.index_of(&Marking::new().with("Q", 1)).unwrap();
        let r = t.index_of(&Marking::new().with("R", 1)).unwrap();
        assert_eq!(t.initial[q], 0.25);
        assert_eq!(t.initial[r], 0.75);
    }

    #[test]
    fn unbounded_net_hits_state_limit() {
        let mut m = GspnModel::new("pump");
        m.places = vec![Place::new("P")];
        m.transitions = vec![Transition::timed("t", Rate::Value(1.0)).input("P", 1).output("P", 2)];
        m.initial_marking = Marking::new().with("P", 1);
        let e = build_reachability_graph_with_limit(&m, &ParameterSet::new(), 50).unwrap_err();
        assert_eq!(e, Error::StateLimit(50));
    }

    #[test]
    fn vanishing_loop_is_rejected() {
        let mut m = GspnModel::new("loop");
        m.places = ["P", "V", "W"].iter().map(|p| Place::new(*p)).collect();
        m.transitions = vec![
            Transition::timed("t", Rate::Value(1.0)).input("P", 1).output("V", 1),
            Transition::immediate("a", 1.0, 1).input("V", 1).output("W", 1),
            Transition::immediate("b", 1.0, 1).input("W", 1).output("V", 1),
        ];
        m.initial_marking = Marking::new().with("P", 1);
        let g = build_reachability_graph(&m, &ParameterSet::new()).unwrap();
        assert!(matches!(eliminate_vanishing(&g), Err(Error::VanishingLoop(_))));
    }

    #[test]
    fn unbound_symbol_is_an_error() {
        let mut m = split_net();
        m.parameters = vec!["r".into()];
        m.transitions[0] = Transition::timed("t1", Rate::symbol("r")).input("P", 1).output("V", 1);
        assert_eq!(
            build_reachability_graph(&m, &ParameterSet::new()).unwrap_err(),
            Error::UnboundParameter("r".into())
        );
    }

    #[test]
    fn dot_uses_shapes_and_stable_ids() {
        let g = build_reachability_graph(&split_net(), &ParameterSet::new()).unwrap();
        let dot = reachability_dot(&g, "split");
        assert!(dot.contains("s0 [label=\"M_P\", shape=ellipse]"));
        assert!(dot.contains("s1 [label=\"M_V\", shape=diamond]"));
        assert!(dot.contains("shape=doublecircle"));
        assert!(dot.contains("s0 -> s1 [label=\"t1:2\"]"));
        assert!(dot.contains("s1 -> s3 [label=\"toR:0.75\"]"));
    }
}
