//! Parsing of numbered `N. Title (YYYY)` lists and resolution against the catalog.

use std::collections::HashSet;
use std::sync::LazyLock;

use popbias::catalog::{resolve_title, ItemId, Resolution, TitleIndex};
use popbias::recommenders::Slate;
use regex::Regex;

/// Titles released after this year are rejected.
pub const MAX_RELEASE_YEAR: i32 = 2008;

static NUMBERED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*\d+[.)]\s").unwrap());
static ENTRY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(\d+)[.)]\s+(.+?)\s*\((\d{4})\)").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedLine {
    Entry { position: u32, title: String, year: i32 },
    Malformed { text: String },
}

/// Non-empty lines from the first numbered line onwards; anything before it is preamble.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedList {
    pub lines: Vec<ParsedLine>,
}

impl ParsedList {
    pub fn entries(&self) -> impl Iterator<Item = (u32, &str, i32)> {
        self.lines.iter().filter_map(|l| match l {
            ParsedLine::Entry { position, title, year } => Some((*position, title.as_str(), *year)),
            ParsedLine::Malformed { .. } => None,
        })
    }
}

fn clean_title(raw: &str) -> String {
    raw.trim().trim_matches(|c| c == '"' || c == '*' || c == '\u{201c}' || c == '\u{201d}').trim().to_owned()
}

/// Positions must strictly increase; a line that breaks the order is malformed.
pub fn parse_recommendations(text: &str) -> ParsedList {
    let mut lines = Vec::new();
    let mut started = false;
    let mut last = 0u32;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        if !started {
            if !NUMBERED.is_match(line) {
                continue;
            }
            started = true;
        }
        let parsed = ENTRY.captures(line).and_then(|c| {
            let position: u32 = c[1].parse().ok()?;
            let year: i32 = c[3].parse().ok()?;
            let title = clean_title(&c[2]);
            (position > last && !title.is_empty()).then_some((position, title, year))
        });
        lines.push(match parsed {
            Some((position, title, year)) => {
                last = position;
                ParsedLine::Entry { position, title, year }
            }
            None => ParsedLine::Malformed { text: line.to_owned() },
        });
    }
    ParsedList { lines }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValidityTag {
    Valid(ItemId),
    AlreadyWatched,
    TooNew,
    Unmatched,
    Malformed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    /// Tag per parsed line, in line order.
    pub tags: Vec<ValidityTag>,
    pub slate: Slate,
    /// Requested slots without a valid item.
    pub unmatched: usize,
}

/// Tags each of the first `k` lines (malformed, too new, unmatched, already watched, valid;
/// the first applicable wins) and keeps the valid ones in order. Repeats of an item already
/// in the slate count as malformed.
pub fn validate_and_resolve(list: &ParsedList, watched: &HashSet<ItemId>, index: &TitleIndex, k: usize) -> Validated {
    let mut tags = Vec::with_capacity(list.lines.len().min(k));
    let mut seen = HashSet::new();
    let mut slate = Vec::new();
    for line in list.lines.iter().take(k) {
        let tag = match line {
            ParsedLine::Malformed { .. } => ValidityTag::Malformed,
            ParsedLine::Entry { year, .. } if *year > MAX_RELEASE_YEAR => ValidityTag::TooNew,
            ParsedLine::Entry { title, year, .. } => match resolve_title(title, *year, index) {
                Resolution::Unmatched => ValidityTag::Unmatched,
                Resolution::Matched(item) if watched.contains(&item) => ValidityTag::AlreadyWatched,
                Resolution::Matched(item) if !seen.insert(item) => ValidityTag::Malformed,
                Resolution::Matched(item) => {
                    slate.push(item);
                    ValidityTag::Valid(item)
                }
            },
        };
        tags.push(tag);
    }
    let unmatched = k - slate.len();
    Validated { tags, slate: Slate::new(slate, k), unmatched }
}
