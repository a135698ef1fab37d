use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use chrono::{DateTime, SecondsFormat, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use super::parse::{DropReport, LogRecord};
use super::{categorize_page, Category, PageTable};
use crate::error::{Error, Result};

/// Inactivity gap that starts a new session (30 minutes).
pub const DEFAULT_SESSION_GAP_S: i64 = 30 * 60;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionEvent {
    pub timestamp: DateTime<Utc>,
    pub page: String,
    pub category: Category,
}

/// One visit: a user's page views with no inactivity gap above the
/// threshold. Events are sorted by time and never empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionSequence {
    pub user_id: String,
    pub events: Vec<SessionEvent>,
    /// Known end of the visit. Logs only record page requests, so mined
    /// sessions leave this unset and end at their last view.
    pub end: Option<DateTime<Utc>>,
}

impl SessionSequence {
    pub fn start(&self) -> DateTime<Utc> {
        self.events[0].timestamp
    }

    pub fn end_time(&self) -> DateTime<Utc> {
        self.end
            .unwrap_or_else(|| self.events[self.events.len() - 1].timestamp)
    }

    pub fn pages(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.page.as_str())
    }
}

/// Splits each user's requests into sessions. A gap strictly greater than
/// `gap_s` seconds starts a new one. Output is sorted by user, then start.
pub fn sessionize(records: &[LogRecord], pages: &PageTable, gap_s: i64) -> Vec<SessionSequence> {
    let mut sorted: Vec<&LogRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.user, a.timestamp, &a.url).cmp(&(&b.user, b.timestamp, &b.url))
    });
    let mut out: Vec<SessionSequence> = Vec::new();
    let mut prev: Option<&LogRecord> = None;
    for r in sorted {
        let (page, category) = categorize_page(&r.url, pages);
        let event = SessionEvent {
            timestamp: r.timestamp,
            page,
            category,
        };
        let continues = prev.is_some_and(|p| {
            p.user == r.user && r.timestamp - p.timestamp <= TimeDelta::seconds(gap_s)
        });
        match out.last_mut() {
            Some(s) if continues => s.events.push(event),
            _ => out.push(SessionSequence {
                user_id: r.user.clone(),
                events: vec![event],
                end: None,
            }),
        }
        prev = Some(r);
    }
    out
}

#[derive(Serialize, Deserialize)]
struct SessionLine {
    #[serde(rename = "userId")]
    user_id: String,
    events: Vec<(String, String, Category)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end: Option<String>,
}

fn iso(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_iso(s: &str, line: usize) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Parse {
            line,
            message: format!("bad timestamp {s:?}: {e}"),
        })
}

/// Writes one JSON object per session:
/// `{"userId": .., "events": [[iso, page, category], ..], "end": iso?}`.
pub fn write_sessions<W: Write>(sessions: &[SessionSequence], mut w: W) -> Result<()> {
    for s in sessions {
        let line = SessionLine {
            user_id: s.user_id.clone(),
            events: s
                .events
                .iter()
                .map(|e| (iso(e.timestamp), e.page.clone(), e.category))
                .collect(),
            end: s.end.map(iso),
        };
        let text = serde_json::to_string(&line).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w, "{text}")?;
    }
    Ok(())
}

pub fn read_sessions<R: BufRead>(r: R) -> Result<Vec<SessionSequence>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SessionLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let mut events = Vec::with_capacity(parsed.events.len());
        for (t, page, category) in parsed.events {
            events.push(SessionEvent {
                timestamp: parse_iso(&t, i + 1)?,
                page,
                category,
            });
        }
        if events.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "session has no events".into(),
            });
        }
        if events.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
            return Err(Error::Parse {
                line: i + 1,
                message: "events out of order".into(),
            });
        }
        let end = parsed.end.map(|t| parse_iso(&t, i + 1)).transpose()?;
        out.push(SessionSequence {
            user_id: parsed.user_id,
            events,
            end,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Population standard deviation.
    pub sd: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Summary::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Summary {
            // keep min <= mean <= max despite rounding in the sum
            mean: mean.clamp(
                xs.iter().copied().fold(f64::INFINITY, f64::min),
                xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            sd: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiningStats {
    pub total_records: usize,
    pub kept_records: usize,
    pub dropped: BTreeMap<String, usize>,
    pub unique_users: usize,
    pub unique_visits: usize,
    pub visits_per_user: Summary,
    pub views_per_visit: Summary,
    /// Seconds from the end of one visit to the start of the same user's
    /// next visit; `None` when no user has two visits.
    pub inter_visit_gap_s: Option<GapSummary>,
}

/// Descriptive statistics over sessions. Without a drop report every view
/// counts as a kept record.
pub fn mining_stats(sessions: &[SessionSequence], drops: Option<&DropReport>) -> MiningStats {
    let views: usize = sessions.iter().map(|s| s.events.len()).sum();
    let (total, kept, dropped) = match drops {
        Some(d) => (
            d.total,
            d.kept,
            BTreeMap::from([
                ("bad_timestamp".to_string(), d.bad_timestamp),
                ("incomplete".to_string(), d.incomplete),
                ("inconsistent".to_string(), d.inconsistent),
            ]),
        ),
        None => (views, views, BTreeMap::new()),
    };
    let mut per_user: BTreeMap<&str, Vec<&SessionSequence>> = BTreeMap::new();
    for s in sessions {
        per_user.entry(&s.user_id).or_default().push(s);
    }
    let visits: Vec<f64> = per_user.values().map(|v| v.len() as f64).collect();
    let lengths: Vec<f64> = sessions.iter().map(|s| s.events.len() as f64).collect();
    let mut gaps = Vec::new();
    for list in per_user.values_mut() {
        list.sort_by_key(|s| s.start());
        for w in list.windows(2) {
            gaps.push((w[1].start() - w[0].end_time()).num_milliseconds() as f64 / 1000.0);
        }
    }
    let inter_visit_gap_s = (!gaps.is_empty()).then(|| {
        let s = Summary::of(&gaps);
        GapSummary {
            mean: s.mean,
            min: s.min,
            max: s.max,
        }
    });
    let users: BTreeSet<&str> = per_user.keys().copied().collect();
    MiningStats {
        total_records: total,
        kept_records: kept,
        dropped,
        unique_users: users.len(),
        unique_visits: sessions.len(),
        visits_per_user: Summary::of(&visits),
        views_per_visit: Summary::of(&lengths),
        inter_visit_gap_s,
    }
}
