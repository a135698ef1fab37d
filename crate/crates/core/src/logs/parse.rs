use std::io::BufRead;

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime, Utc};
use serde::Serialize;

use crate::error::{Error, Result};

/// How the timestamp is spread over columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimeColumns {
    /// `YYYY-MM-DD` and `HH:MM:SS[.fff]` in separate columns, UTC.
    Split { date: String, time: String },
    /// One column holding RFC 3339, `YYYY-MM-DD HH:MM:SS` (UTC) or the
    /// common-log `DD/Mon/YYYY:HH:MM:SS +zzzz` form.
    Combined(String),
}

/// Which columns hold the user, timestamp and requested URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMapping {
    pub user: String,
    pub timestamp: TimeColumns,
    pub uri: String,
}

impl Default for FieldMapping {
    /// W3C extended log field names.
    fn default() -> Self {
        FieldMapping {
            user: "cs-username".into(),
            timestamp: TimeColumns::Split {
                date: "date".into(),
                time: "time".into(),
            },
            uri: "cs-uri-stem".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    /// W3C extended format; the schema comes from `#Fields:` directives.
    W3c,
    /// Delimited text; the schema is the header row unless columns are given.
    Csv { delimiter: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogSource {
    pub format: LogFormat,
    pub mapping: FieldMapping,
    /// Explicit column names. Overrides `#Fields:` and CSV headers.
    pub columns: Option<Vec<String>>,
}

impl LogSource {
    pub fn w3c() -> Self {
        LogSource {
            format: LogFormat::W3c,
            mapping: FieldMapping::default(),
            columns: None,
        }
    }

    pub fn csv(mapping: FieldMapping) -> Self {
        LogSource {
            format: LogFormat::Csv { delimiter: b',' },
            mapping,
            columns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogRecord {
    pub user: String,
    pub timestamp: DateTime<Utc>,
    pub url: String,
}

/// Per-reason drop counts. `total = kept + incomplete + bad_timestamp + inconsistent`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DropReport {
    pub total: usize,
    pub kept: usize,
    /// A mapped field is missing, empty or `-`.
    pub incomplete: usize,
    pub bad_timestamp: usize,
    /// Row has more fields than the schema or is not valid text.
    pub inconsistent: usize,
}

impl DropReport {
    pub fn dropped(&self) -> usize {
        self.incomplete + self.bad_timestamp + self.inconsistent
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLog {
    pub records: Vec<LogRecord>,
    pub drops: DropReport,
}

struct Schema {
    width: usize,
    user: usize,
    uri: usize,
    date: usize,
    time: Option<usize>,
}

impl Schema {
    fn resolve(columns: &[String], mapping: &FieldMapping) -> Result<Self> {
        let find = |name: &str| {
            columns
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::LogFormat(format!("column {name:?} not in schema {columns:?}")))
        };
        let (date, time) = match &mapping.timestamp {
            TimeColumns::Split { date, time } => (find(date)?, Some(find(time)?)),
            TimeColumns::Combined(c) => (find(c)?, None),
        };
        Ok(Schema {
            width: columns.len(),
            user: find(&mapping.user)?,
            uri: find(&mapping.uri)?,
            date,
            time,
        })
    }

    fn record(&self, fields: &[&str], drops: &mut DropReport) -> Option<LogRecord> {
        if fields.len() > self.width {
            drops.inconsistent += 1;
            return None;
        }
        let get = |i: usize| {
            fields
                .get(i)
                .map(|s| s.trim())
                .filter(|s| !s.is_empty() && *s != "-")
        };
        let (Some(user), Some(uri), Some(date)) = (get(self.user), get(self.uri), get(self.date)) else {
            drops.incomplete += 1;
            return None;
        };
        let ts = match self.time {
            Some(t) => match get(t) {
                Some(time) => split_timestamp(date, time),
                None => {
                    drops.incomplete += 1;
                    return None;
                }
            },
            None => combined_timestamp(date),
        };
        let Some(timestamp) = ts else {
            drops.bad_timestamp += 1;
            return None;
        };
        drops.kept += 1;
        Some(LogRecord {
            user: user.to_string(),
            timestamp,
            url: uri.to_string(),
        })
    }
}

fn split_timestamp(date: &str, time: &str) -> Option<DateTime<Utc>> {
    let d = NaiveDate::parse_from_str(date, "%Y-%m-%d").ok()?;
    let t = NaiveTime::parse_from_str(time, "%H:%M:%S%.f").ok()?;
    Some(d.and_time(t).and_utc())
}

fn combined_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for f in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, f) {
            return Some(t.and_utc());
        }
    }
    DateTime::parse_from_str(s, "%d/%b/%Y:%H:%M:%S %z")
        .ok()
        .map(|t| t.with_timezone(&Utc))
}

/// Parses an access log. Malformed rows are counted in the drop report
/// rather than failing the parse; a missing schema or a mapping naming an
/// absent column is an error.
pub fn parse_log<R: BufRead>(reader: R, source: &LogSource) -> Result<ParsedLog> {
    match source.format {
        LogFormat::W3c => parse_w3c(reader, source),
        LogFormat::Csv { delimiter } => parse_csv(reader, source, delimiter),
    }
}

fn parse_w3c<R: BufRead>(reader: R, source: &LogSource) -> Result<ParsedLog> {
    let mut out = ParsedLog::default();
    let mut schema = match &source.columns {
        Some(c) => Some(Schema::resolve(c, &source.mapping)?),
        None => None,
    };
    for line in reader.split(b'\n') {
        let bytes = line?;
        let Ok(text) = std::str::from_utf8(&bytes) else {
            out.drops.total += 1;
            out.drops.inconsistent += 1;
            continue;
        };
        let text = text.trim_end_matches('\r');
        if text.trim().is_empty() {
            continue;
        }
        if let Some(directive) = text.strip_prefix('#') {
            if let Some(fields) = directive.strip_prefix("Fields:") {
                if source.columns.is_none() {
                    let cols: Vec<String> = fields.split_whitespace().map(String::from).collect();
                    schema = Some(Schema::resolve(&cols, &source.mapping)?);
                }
            }
            continue;
        }
        let Some(s) = &schema else {
            return Err(Error::LogFormat(
                "data before any #Fields directive and no column mapping given".into(),
            ));
        };
        out.drops.total += 1;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if let Some(r) = s.record(&fields, &mut out.drops) {
            out.records.push(r);
        }
    }
    Ok(out)
}

fn parse_csv<R: BufRead>(reader: R, source: &LogSource, delimiter: u8) -> Result<ParsedLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(source.columns.is_none())
        .flexible(true)
        .from_reader(reader);
    let columns: Vec<String> = match &source.columns {
        Some(c) => c.clone(),
        None => rdr
            .headers()
            .map_err(|e| Error::LogFormat(format!("cannot read header row: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect(),
    };
    if columns.iter().all(String::is_empty) {
        return Err(Error::LogFormat("empty header row and no column mapping given".into()));
    }
    let schema = Schema::resolve(&columns, &source.mapping)?;
    let mut out = ParsedLog::default();
    for row in rdr.records() {
        out.drops.total += 1;
        match row {
            Ok(rec) => {
                let fields: Vec<&str> = rec.iter().collect();
                if let Some(r) = schema.record(&fields, &mut out.drops) {
                    out.records.push(r);
                }
            }
            Err(e) if e.is_io_error() => {
                return Err(Error::Io(e.to_string()));
            }
            Err(_) => out.drops.inconsistent += 1,
        }
    }
    Ok(out)
}
