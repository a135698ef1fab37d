//! Line-oriented model and parameter files.
//!
//! ```text
//! net <name>
//! place <name> [init=<uint>] [category=<tag>]
//! param <symbol>
//! timed <name> rate=<symbol|float> in=<place>[:<mult>][,...] out=<place>[:<mult>][,...]
//! immediate <name> weight=<float> [priority=<uint>] in=... out=...
//! ```
//!
//! Parameter files hold `<symbol> = <positive float>` lines. In both formats
//! `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Arc, GspnModel, Marking, ParameterSet, Place, Rate, Transition, TransitionKind};
use crate::error::{Error, Result};

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
    .trim()
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Splits `key=value` options, rejecting unknown and repeated keys.
fn options<'a>(
    line: usize,
    tokens: &[&'a str],
    allowed: &[&str],
) -> Result<BTreeMap<&'a str, &'a str>> {
    let mut out = BTreeMap::new();
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key=value, got {tok:?}")))?;
        if !allowed.contains(&k) {
            return Err(err(line, format!("unknown option {k:?}")));
        }
        if out.insert(k, v).is_some() {
            return Err(err(line, format!("option {k:?} given twice")));
        }
    }
    Ok(out)
}

fn arcs(line: usize, spec: &str) -> Result<Vec<Arc>> {
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|item| {
            let (place, mult) = match item.split_once(':') {
                Some((p, m)) => (
                    p,
                    m.parse::<u32>()
                        .map_err(|_| err(line, format!("bad multiplicity in {item:?}")))?,
                ),
                None => (item, 1),
            };
            if place.is_empty() {
                return Err(err(line, "empty place name in arc list"));
            }
            Ok(Arc {
                place: place.to_string(),
                multiplicity: mult,
            })
        })
        .collect()
}

fn positive_float(line: usize, what: &str, s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(err(line, format!("{what} must be a positive number, got {s:?}"))),
    }
}

/// Parses a model file. The result is not validated; call
/// [`GspnModel::validate`] for reference checks.
pub fn parse_model(text: &str) -> Result<GspnModel> {
    let mut model = GspnModel::new("");
    let mut named = false;
    let mut initial = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw);
        if body.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let keyword = tokens[0];
        let name = || {
            tokens
                .get(1)
                .copied()
                .filter(|n| !n.contains('='))
                .ok_or_else(|| err(line, format!("{keyword}: missing name")))
        };
        match keyword {
            "net" => {
                if named {
                    return Err(err(line, "net declared twice"));
                }
                if tokens.len() != 2 {
                    return Err(err(line, "expected `net <name>`"));
                }
                model.name = name()?.to_string();
                named = true;
            }
            "place" => {
                let n = name()?;
                let opts = options(line, &tokens[2..], &["init", "category"])?;
                let mut place = Place::new(n);
                if let Some(c) = opts.get("category") {
                    place.category = Some((*c).to_string());
                }
                if let Some(v) = opts.get("init") {
                    let k: u32 = v
                        .parse()
                        .map_err(|_| err(line, format!("bad initial token count {v:?}")))?;
                    initial.push((n.to_string(), k));
                }
                model.places.push(place);
            }
            "param" => {
                if tokens.len() != 2 {
                    return Err(err(line, "expected `param <symbol>`"));
                }
                model.parameters.push(name()?.to_string());
            }
            "timed" => {
                let n = name()?;
                let opts = options(line, &tokens[2..], &["rate", "in", "out"])?;
                let rate = opts
                    .get("rate")
                    .ok_or_else(|| err(line, "timed transition needs rate="))?;
                let rate = match rate.parse::<f64>() {
                    Ok(_) => Rate::Value(positive_float(line, "rate", rate)?),
                    Err(_) if !rate.is_empty() => Rate::Symbol((*rate).to_string()),
                    Err(_) => return Err(err(line, "empty rate")),
                };
                model.transitions.push(Transition {
                    name: n.to_string(),
                    kind: TransitionKind::Timed { rate },
                    inputs: arcs(line, required(line, &opts, "in")?)?,
                    outputs: arcs(line, required(line, &opts, "out")?)?,
                });
            }
            "immediate" => {
                let n = name()?;
                let opts = options(line, &tokens[2..], &["weight", "priority", "in", "out"])?;
                let weight = positive_float(line, "weight", required(line, &opts, "weight")?)?;
                let priority = match opts.get("priority") {
                    Some(p) => p
                        .parse::<u32>()
                        .ok()
                        .filter(|&p| p >= 1)
                        .ok_or_else(|| err(line, format!("bad priority {p:?}")))?,
                    None => 1,
                };
                model.transitions.push(Transition {
                    name: n.to_string(),
                    kind: TransitionKind::Immediate { weight, priority },
                    inputs: arcs(line, required(line, &opts, "in")?)?,
                    outputs: arcs(line, required(line, &opts, "out")?)?,
                });
            }
            other => return Err(err(line, format!("unknown directive {other:?}"))),
        }
    }
    if !named {
        return Err(err(0, "missing `net <name>` line"));
    }
    model.initial_marking = initial.into_iter().collect::<Marking>();
    Ok(model)
}

fn required<'a>(line: usize, opts: &BTreeMap<&str, &'a str>, key: &str) -> Result<&'a str> {
    opts.get(key)
        .copied()
        .ok_or_else(|| err(line, format!("missing {key}=")))
}

fn arc_list(arcs: &[Arc]) -> String {
    arcs.iter()
        .map(|a| {
            if a.multiplicity == 1 {
                a.place.clone()
            } else {
                format!("{}:{}", a.place, a.multiplicity)
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// Serializes a model in the format read by [`parse_model`].
pub fn write_model(model: &GspnModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "net {}", model.name);
    for p in &model.places {
        let _ = write!(out, "place {}", p.name);
        let init = model.initial_marking.tokens(&p.name);
        if init > 0 {
            let _ = write!(out, " init={init}");
        }
        if let Some(c) = &p.category {
            let _ = write!(out, " category={c}");
        }
        out.push('\n');
    }
    for s in &model.parameters {
        let _ = writeln!(out, "param {s}");
    }
    for t in &model.transitions {
        match &t.kind {
            TransitionKind::Timed { rate } => {
                let _ = write!(out, "timed {} rate={rate}", t.name);
            }
            TransitionKind::Immediate { weight, priority } => {
                let _ = write!(out, "immediate {} weight={weight} priority={priority}", t.name);
            }
        }
        let _ = writeln!(out, " in={} out={}", arc_list(&t.inputs), arc_list(&t.outputs));
    }
    out
}

pub fn parse_params(text: &str) -> Result<ParameterSet> {
    let mut set = ParameterSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw);
        if body.is_empty() {
            continue;
        }
        let (sym, val) = body
            .split_once('=')
            .ok_or_else(|| err(line, "expected `<symbol> = <value>`"))?;
        let sym = sym.trim();
        if sym.is_empty() || sym.contains(char::is_whitespace) {
            return Err(err(line, format!("bad symbol {sym:?}")));
        }
        if set.get(sym).is_some() {
            return Err(err(line, format!("symbol {sym:?} given twice")));
        }
        let v = positive_float(line, sym, val.trim())?;
        set.insert(sym, v)?;
    }
    Ok(set)
}

pub fn write_params(params: &ParameterSet) -> String {
    let mut out = String::new();
    for (s, v) in params.iter() {
        let _ = writeln!(out, "{s} = {v}");
    }
    out
}
