//! Reconstruction of enabling sets from observed sojourn times.
//!
//! For a net whose transitions are named by the rate they carry, the
//! sojourn time of a single-token marking is `1 / Σ rates` over the
//! transitions it enables. Given per-marking target sojourns under one or
//! more rate catalogs, every subset of rate symbols is scored by its mean
//! relative error across catalogs. A global assignment then picks one
//! subset per marking so that no symbol is used by more markings than its
//! in-degree cap allows, preferring assignments that use each capped symbol
//! as often as its cap (fewest missing arcs) and, among those, the lowest
//! total residual.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gspn::ParameterSet;

/// Largest number of free symbols per marking; subsets are enumerated.
pub const MAX_FREE_SYMBOLS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SojournTarget {
    pub marking: String,
    /// One target per catalog, seconds.
    pub seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Symbols every subset must contain.
    pub required: Vec<String>,
    /// Upper bound on how many markings may enable each symbol.
    pub in_degree: BTreeMap<String, usize>,
    /// A subset is admissible when its relative error is at most this in
    /// every catalog.
    pub ceiling: f64,
    /// Admissible subsets kept per marking for the global search.
    pub max_candidates: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            required: Vec::new(),
            in_degree: BTreeMap::new(),
            ceiling: 0.02,
            max_candidates: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub symbols: Vec<String>,
    /// Mean relative error across catalogs.
    pub residual: f64,
    pub per_catalog: Vec<f64>,
    /// `1 / Σ rates` per catalog, seconds.
    pub predicted_s: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitStatus {
    Fitted,
    Irreconcilable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkingFit {
    pub marking: String,
    pub status: FitStatus,
    /// Subset selected by the constrained assignment.
    pub chosen: Candidate,
    /// Lowest-residual subset ignoring in-degree caps.
    pub best: Candidate,
    /// Other subsets whose residual is within twice the best residual.
    pub alternatives: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub markings: Vec<MarkingFit>,
    /// Markings enabling each symbol under the chosen assignment.
    pub symbol_use: BTreeMap<String, usize>,
    /// Cap minus use for every capped symbol.
    pub shortfall: BTreeMap<String, usize>,
    /// False when no assignment respects the caps; each marking then falls
    /// back to its best subset.
    pub caps_respected: bool,
}

impl FitReport {
    pub fn marking(&self, name: &str) -> Option<&MarkingFit> {
        self.markings.iter().find(|m| m.marking == name)
    }
}

struct Scored {
    mask: u32,
    residual: f64,
    per_catalog: Vec<f64>,
    predicted: Vec<f64>,
}

struct Search<'a> {
    order: Vec<usize>,
    options: &'a [Vec<usize>],
    scored: &'a [Vec<Scored>],
    cover: Vec<u32>,
    min_residual: Vec<f64>,
    caps: &'a [(u32, usize)],
    best: Option<(usize, f64, Vec<usize>)>,
}

impl Search<'_> {
    fn shortfall(&self, use_count: &[usize]) -> usize {
        self.caps
            .iter()
            .zip(use_count)
            .map(|(&(_, cap), &u)| cap.saturating_sub(u))
            .sum()
    }

    fn run(&mut self, depth: usize, use_count: &mut Vec<usize>, residual: f64, picks: &mut Vec<usize>) {
        let rest = &self.order[depth..];
        // Optimistic bounds: every remaining marking could add each symbol it
        // ever covers, at its smallest residual.
        let short_lb: usize = self
            .caps
            .iter()
            .zip(use_count.iter())
            .map(|(&(bit, cap), &u)| {
                let possible = rest.iter().filter(|&&m| self.cover[m] & bit != 0).count();
                cap.saturating_sub(u + possible)
            })
            .sum();
        let res_lb = residual + rest.iter().map(|&m| self.min_residual[m]).sum::<f64>();
        if let Some((bs, br, _)) = &self.best {
            if (short_lb, res_lb) >= (*bs, *br) {
                return;
            }
        }
        if depth == self.order.len() {
            let s = self.shortfall(use_count);
            self.best = Some((s, residual, picks.clone()));
            return;
        }
        let m = self.order[depth];
        for &c in &self.options[m] {
            let cand = &self.scored[m][c];
            if self
                .caps
                .iter()
                .zip(use_count.iter())
                .any(|(&(bit, cap), &u)| cand.mask & bit != 0 && u + 1 > cap)
            {
                continue;
            }
            for (k, &(bit, _)) in self.caps.iter().enumerate() {
                if cand.mask & bit != 0 {
                    use_count[k] += 1;
                }
            }
            picks[m] = c;
            self.run(depth + 1, use_count, residual + cand.residual, picks);
            for (k, &(bit, _)) in self.caps.iter().enumerate() {
                if cand.mask & bit != 0 {
                    use_count[k] -= 1;
                }
            }
        }
    }
}

/// Fits an enabling set (a subset of rate symbols) to every target marking.
///
/// All catalogs must define the same symbols. Markings with no admissible
/// subset are reported as [`FitStatus::Irreconcilable`] rather than failing.
pub fn fit_enabling_sets(
    targets: &[SojournTarget],
    catalogs: &[ParameterSet],
    config: &FitConfig,
) -> Result<FitReport> {
    if catalogs.is_empty() {
        return Err(Error::InvalidArgument("at least one rate catalog is required".into()));
    }
    let symbols: Vec<String> = catalogs[0].symbols().map(str::to_string).collect();
    for c in &catalogs[1..] {
        if !c.symbols().eq(symbols.iter().map(String::as_str)) {
            return Err(Error::InvalidArgument("rate catalogs define different symbols".into()));
        }
    }
    for r in &config.required {
        if !symbols.contains(r) {
            return Err(Error::UnboundParameter(r.clone()));
        }
    }
    let free: Vec<usize> = (0..symbols.len())
        .filter(|&i| !config.required.contains(&symbols[i]))
        .collect();
    if free.len() > MAX_FREE_SYMBOLS {
        return Err(Error::InvalidArgument(format!(
            "{} candidate symbols exceed the enumeration limit of {MAX_FREE_SYMBOLS}",
            free.len()
        )));
    }
    let required_mask: u32 = (0..symbols.len())
        .filter(|&i| config.required.contains(&symbols[i]))
        .fold(0, |m, i| m | 1 << i);
    for t in targets {
        if t.seconds.len() != catalogs.len() {
            return Err(Error::InvalidArgument(format!(
                "marking {} has {} targets for {} catalogs",
                t.marking,
                t.seconds.len(),
                catalogs.len()
            )));
        }
        if t.seconds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "marking {} has a non-positive target",
                t.marking
            )));
        }
    }
    let rates: Vec<Vec<f64>> = catalogs
        .iter()
        .map(|c| symbols.iter().map(|s| c.get(s).unwrap_or(0.0)).collect())
        .collect();

    let masks: Vec<u32> = (0u32..1 << free.len())
        .map(|sub| {
            free.iter()
                .enumerate()
                .filter(|(k, _)| sub & (1 << k) != 0)
                .fold(required_mask, |m, (_, &i)| m | 1 << i)
        })
        .filter(|&m| m != 0)
        .collect();

    let scored: Vec<Vec<Scored>> = targets
        .iter()
        .map(|t| {
            let mut v: Vec<Scored> = masks
                .iter()
                .map(|&mask| {
                    let predicted: Vec<f64> = rates
                        .iter()
                        .map(|r| {
                            let sum: f64 = (0..symbols.len())
                                .filter(|i| mask & (1 << i) != 0)
                                .map(|i| r[i])
                                .sum();
                            1.0 / sum
                        })
                        .collect();
                    let per_catalog: Vec<f64> = predicted
                        .iter()
                        .zip(&t.seconds)
                        .map(|(p, s)| (p - s).abs() / s)
                        .collect();
                    let residual = per_catalog.iter().sum::<f64>() / per_catalog.len() as f64;
                    Scored {
                        mask,
                        residual,
                        per_catalog,
                        predicted,
                    }
                })
                .collect();
            v.sort_by(|a, b| {
                a.residual
                    .total_cmp(&b.residual)
                    .then(a.mask.count_ones().cmp(&b.mask.count_ones()))
                    .then(a.mask.cmp(&b.mask))
            });
            v
        })
        .collect();

    let mut statuses = Vec::new();
    let options: Vec<Vec<usize>> = scored
        .iter()
        .map(|v| {
            let admissible: Vec<usize> = (0..v.len())
                .filter(|&i| v[i].per_catalog.iter().all(|&e| e <= config.ceiling))
                .take(config.max_candidates)
                .collect();
            if admissible.is_empty() {
                statuses.push(FitStatus::Irreconcilable);
                (0..v.len().min(config.max_candidates)).collect()
            } else {
                statuses.push(FitStatus::Fitted);
                admissible
            }
        })
        .collect();

    let caps: Vec<(u32, usize)> = config
        .in_degree
        .iter()
        .filter_map(|(s, &cap)| symbols.iter().position(|x| x == s).map(|i| (1u32 << i, cap)))
        .collect();
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by_key(|&m| options[m].len());
    let mut search = Search {
        order,
        options: &options,
        scored: &scored,
        cover: options
            .iter()
            .zip(&scored)
            .map(|(o, s)| o.iter().fold(0, |m, &c| m | s[c].mask))
            .collect(),
        min_residual: options
            .iter()
            .zip(&scored)
            .map(|(o, s)| o.iter().map(|&c| s[c].residual).fold(f64::INFINITY, f64::min))
            .collect(),
        caps: &caps,
        best: None,
    };
    let mut use_count = vec![0; caps.len()];
    let mut picks = vec![0; targets.len()];
    search.run(0, &mut use_count, 0.0, &mut picks);
    let (caps_respected, picks) = match search.best.take() {
        Some((_, _, p)) => (true, p),
        None => (false, vec![0; targets.len()]),
    };

    let to_candidate = |s: &Scored| Candidate {
        symbols: (0..symbols.len())
            .filter(|i| s.mask & (1 << i) != 0)
            .map(|i| symbols[i].clone())
            .collect(),
        residual: s.residual,
        per_catalog: s.per_catalog.clone(),
        predicted_s: s.predicted.clone(),
    };

    let markings: Vec<MarkingFit> = targets
        .iter()
        .enumerate()
        .map(|(m, t)| {
            let v = &scored[m];
            let best_res = v[0].residual;
            MarkingFit {
                marking: t.marking.clone(),
                status: statuses[m],
                chosen: to_candidate(&v[picks[m]]),
                best: to_candidate(&v[0]),
                alternatives: v[1..]
                    .iter()
                    .take_while(|s| s.residual <= 2.0 * best_res)
                    .map(to_candidate)
                    .collect(),
            }
        })
        .collect();

    let mut symbol_use: BTreeMap<String, usize> = symbols.iter().map(|s| (s.clone(), 0)).collect();
    for m in &markings {
        for s in &m.chosen.symbols {
            *symbol_use.get_mut(s).expect("symbol from catalog") += 1;
        }
    }
    let shortfall = config
        .in_degree
        .iter()
        .map(|(s, &cap)| (s.clone(), cap.saturating_sub(symbol_use.get(s).copied().unwrap_or(0))))
        .collect();

    Ok(FitReport {
        markings,
        symbol_use,
        shortfall,
        caps_respected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog(pairs: &[(&str, f64)]) -> ParameterSet {
        ParameterSet::from_pairs(pairs.iter().map(|&(s, v)| (s, v))).unwrap()
    }

    #[test]
    fn exact_singleton() {
        let c = catalog(&[("a", 0.25)]);
        let t = SojournTarget {
            marking: "M_X".into(),
            seconds: vec![4.0],
        };
        let r = fit_enabling_sets(&[t], &[c], &FitConfig::default()).unwrap();
        let m = &r.markings[0];
        assert_eq!(m.chosen.symbols, vec!["a"]);
        assert_eq!(m.chosen.residual, 0.0);
        assert_eq!(m.status, FitStatus::Fitted);
    }

    #[test]
    fn required_symbol_is_always_present() {
        let c = catalog(&[("a", 1.0), ("b", 0.5), ("m", 0.001)]);
        let cfg = FitConfig {
            required: vec!["m".into()],
            ..FitConfig::default()
        };
        let t = SojournTarget {
            marking: "M_X".into(),
            seconds: vec![1.0 / 1.501],
        };
        let r = fit_enabling_sets(&[t], &[c], &cfg).unwrap();
        assert_eq!(r.markings[0].chosen.symbols, vec!["a", "b", "m"]);
    }

    #[test]
    fn caps_force_second_choice() {
        // Both markings prefer {a}; a may only be used once.
        let c = catalog(&[("a", 1.0), ("b", 0.9)]);
        let targets = vec![
            SojournTarget {
                marking: "M_X".into(),
                seconds: vec![1.0],
            },
            SojournTarget {
                marking: "M_Y".into(),
                seconds: vec![1.0 / 0.99],
            },
        ];
        let cfg = FitConfig {
            in_degree: BTreeMap::from([("a".to_string(), 1)]),
            ceiling: 0.2,
            ..FitConfig::default()
        };
        let r = fit_enabling_sets(&targets, &[c], &cfg).unwrap();
        assert!(r.caps_respected);
        assert_eq!(r.markings[0].chosen.symbols, vec!["a"]);
        assert_eq!(r.markings[1].chosen.symbols, vec!["b"]);
        assert_eq!(r.markings[1].best.symbols, vec!["a"]);
        assert_eq!(r.shortfall["a"], 0);
    }

    #[test]
    fn unreachable_target_is_irreconcilable() {
        let c = catalog(&[("a", 1.0), ("b", 2.0)]);
        let t = SojournTarget {
            marking: "M_X".into(),
            seconds: vec![100.0],
        };
        let r = fit_enabling_sets(&[t], &[c], &FitConfig::default()).unwrap();
        assert_eq!(r.markings[0].status, FitStatus::Irreconcilable);
        assert_eq!(r.markings[0].chosen.symbols, vec!["a"]);
    }

    #[test]
    fn mismatched_catalogs_are_rejected() {
        let a = catalog(&[("a", 1.0)]);
        let b = catalog(&[("b", 1.0)]);
        let t = SojournTarget {
            marking: "M".into(),
            seconds: vec![1.0, 1.0],
        };
        assert!(fit_enabling_sets(&[t], &[a, b], &FitConfig::default()).is_err());
    }
}
