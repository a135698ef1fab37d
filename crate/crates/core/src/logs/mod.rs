//! Clickstream mining: access-log parsing, sessionization, page
//! categorization, descriptive statistics and rate estimation.

mod parse;
mod rates;
mod session;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use parse::{parse_log, DropReport, FieldMapping, LogFormat, LogRecord, LogSource, ParsedLog, TimeColumns};
pub use rates::{estimate_rates, PlaceMapping, RateEstimate};
pub use session::{
    mining_stats, read_sessions, sessionize, write_sessions, GapSummary, MiningStats, SessionEvent,
    SessionSequence, Summary, DEFAULT_SESSION_GAP_S,
};

/// Page category. `Control` collects pages missing from the page table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    A,
    B,
    C,
    D,
    Control,
}

impl Category {
    pub const KNOWN: [Category; 4] = [Category::A, Category::B, Category::C, Category::D];
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::A => "A",
            Category::B => "B",
            Category::C => "C",
            Category::D => "D",
            Category::Control => "control",
        })
    }
}

impl FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(Category::A),
            "B" => Ok(Category::B),
            "C" => Ok(Category::C),
            "D" => Ok(Category::D),
            "control" | "unknown" => Ok(Category::Control),
            _ => Err(Error::InvalidArgument(format!("unknown category {s:?}"))),
        }
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PageEntry {
    pub page: String,
    pub category: Category,
    /// Model place the page is mapped to, if any.
    pub place: Option<String>,
}

/// Page name to category (and optionally model place). Lookups ignore case.
#[derive(Debug, Clone, Default)]
pub struct PageTable {
    entries: Vec<PageEntry>,
    index: HashMap<String, usize>,
}

impl PageTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, page: impl Into<String>, category: Category, place: Option<String>) -> Result<()> {
        let page = page.into();
        let key = page.to_lowercase();
        if self.index.contains_key(&key) {
            return Err(Error::InvalidArgument(format!("page {page:?} listed twice")));
        }
        self.index.insert(key, self.entries.len());
        self.entries.push(PageEntry { page, category, place });
        Ok(())
    }

    /// Reads `page<TAB>category[<TAB>place]` lines; `#` starts a comment.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut table = PageTable::new();
        for (i, raw) in text.lines().enumerate() {
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let cols: Vec<&str> = body.split('\t').map(str::trim).collect();
            if cols.len() < 2 || cols.len() > 3 {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected page, category and optional place".into(),
                });
            }
            let cat = cols[1].parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad category {:?}", cols[1]),
            })?;
            table.insert(cols[0], cat, cols.get(2).map(|s| s.to_string()))?;
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PageEntry] {
        &self.entries
    }

    pub fn lookup(&self, page: &str) -> Option<&PageEntry> {
        self.index.get(&page.to_lowercase()).map(|&i| &self.entries[i])
    }

    /// Page-to-place map for rate estimation.
    pub fn places(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .filter_map(|e| e.place.as_deref().map(|p| (e.page.as_str(), p)))
    }
}

/// Reduces a request URL to its page token: scheme, host, query and
/// fragment are dropped, then the last path segment loses its extension.
/// A bare host or root path gives `/`.
pub fn normalize_url(url: &str) -> String {
    let mut s = url.trim();
    if let Some(i) = s.find(['?', '#']) {
        s = &s[..i];
    }
    if let Some(i) = s.find("://") {
        s = &s[i + 3..];
        s = s.find('/').map_or("", |j| &s[j..]);
    }
    let Some(seg) = s.rsplit('/').find(|p| !p.is_empty()) else {
        return "/".to_string();
    };
    match seg.rfind('.') {
        Some(i) if i > 0 => seg[..i].to_string(),
        _ => seg.to_string(),
    }
}

/// Canonical page name and category for a URL. Pages missing from the
/// table keep their normalized token and get [`Category::Control`].
pub fn categorize_page(url: &str, table: &PageTable) -> (String, Category) {
    let token = normalize_url(url);
    match table.lookup(&token) {
        Some(e) => (e.page.clone(), e.category),
        None => (token, Category::Control),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_urls() {
        assert_eq!(normalize_url("/BookDetails.aspx?id=3"), "BookDetails");
        assert_eq!(normalize_url("https://shop.example/a/b/LogIn.asp#top"), "LogIn");
        assert_eq!(normalize_url("/x/Default/"), "Default");
        assert_eq!(normalize_url("http://host.example"), "/");
        assert_eq!(normalize_url("/"), "/");
        assert_eq!(normalize_url("/.hidden"), ".hidden");
    }

    #[test]
    fn categorize_ignores_case_and_keeps_unknown_tokens() {
        let mut t = PageTable::new();
        t.insert("BookDetails", Category::A, Some("A".into())).unwrap();
        assert_eq!(categorize_page("/bookdetails.aspx", &t), ("BookDetails".into(), Category::A));
        assert_eq!(categorize_page("/Other.aspx", &t), ("Other".into(), Category::Control));
        assert!(t.insert("BOOKDETAILS", Category::B, None).is_err());
    }

    #[test]
    fn category_round_trips() {
        for c in Category::KNOWN.into_iter().chain([Category::Control]) {
            assert_eq!(c.to_string().parse::<Category>().unwrap(), c);
        }
        assert!("E".parse::<Category>().is_err());
    }
}
