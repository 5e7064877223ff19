//! MovieLens-format ingestion: movies, ratings, and the popularity table.
//!
//! `movies.dat` lines look like `MovieID::Title (Year)::Genre1|Genre2`, `ratings.dat` lines
//! like `UserID::MovieID::Rating::Timestamp`. Files are decoded as UTF-8 line by line, falling
//! back to Latin-1 for lines that are not valid UTF-8.

mod title;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub use title::{normalize_title, resolve_title, Resolution, TitleIndex, TitleKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u64);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u64);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One movie. `year` is 0 when the title carried no parsable `(YYYY)` suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub item: ItemId,
    pub title: String,
    pub year: i32,
    pub genres: Vec<String>,
}

impl CatalogEntry {
    /// Title with a trailing `, The` / `, A` / `, An` moved back to the front, as a person
    /// would write it ("Matrix, The" becomes "The Matrix").
    pub fn display_title(&self) -> String {
        for article in ["The", "A", "An"] {
            let suffix = format!(", {article}");
            if let Some(head) = self.title.strip_suffix(&suffix) {
                return format!("{article} {head}");
            }
        }
        self.title.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: UserId,
    pub item: ItemId,
    pub rating: f64,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ParseMode {
    #[default]
    Lenient,
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("strict parse failed at {0}")]
    Strict(LineError),
    #[error("no interactions")]
    NoInteractions,
}

/// Records parsed from a file plus the lines that were skipped in lenient mode.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub errors: Vec<LineError>,
}

fn decode_line(bytes: &[u8]) -> String {
    let bytes = bytes.strip_suffix(b"\r").unwrap_or(bytes);
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_owned(),
        // Latin-1 maps every byte to the code point of the same value.
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    }
}

/// Splits raw file bytes into decoded lines.
pub fn decode_lines(bytes: &[u8]) -> Vec<String> {
    let mut lines: Vec<String> = bytes.split(|&b| b == b'\n').map(decode_line).collect();
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines
}

fn read_lines(path: &Path) -> Result<Vec<String>, CatalogError> {
    let bytes = fs::read(path).map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
    Ok(decode_lines(&bytes))
}

fn parse_with<T, S, F>(
    lines: impl IntoIterator<Item = S>,
    mode: ParseMode,
    mut parse: F,
) -> Result<Parsed<T>, CatalogError>
where
    S: AsRef<str>,
    F: FnMut(&str) -> Result<T, String>,
{
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in lines.into_iter().enumerate() {
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        match parse(line) {
            Ok(rec) => records.push(rec),
            Err(message) => {
                let err = LineError { line: idx + 1, message };
                if mode == ParseMode::Strict {
                    return Err(CatalogError::Strict(err));
                }
                errors.push(err);
            }
        }
    }
    Ok(Parsed { records, errors })
}

/// Splits `Title (1995)` into `("Title", 1995)`; titles without a year suffix get year 0.
fn split_year(title_field: &str) -> (String, i32) {
    let t = title_field.trim();
    if let Some(open) = t.rfind('(') {
        if let Some(inner) = t[open + 1..].strip_suffix(')') {
            if inner.len() == 4 && inner.bytes().all(|b| b.is_ascii_digit()) {
                let year = inner.parse().unwrap_or(0);
                return (t[..open].trim_end().to_owned(), year);
            }
        }
    }
    (t.to_owned(), 0)
}

fn parse_movie_line(line: &str) -> Result<CatalogEntry, String> {
    let (id, rest) = line.split_once("::").ok_or("expected `MovieID::Title (Year)::Genres`")?;
    let (title_field, genres) = rest.rsplit_once("::").ok_or("expected `MovieID::Title (Year)::Genres`")?;
    let id: u64 = id.trim().parse().map_err(|_| format!("bad movie id {id:?}"))?;
    let (title, year) = split_year(title_field);
    if title.is_empty() {
        return Err("empty title".into());
    }
    let genres = genres.split('|').map(str::trim).filter(|g| !g.is_empty()).map(str::to_owned).collect();
    Ok(CatalogEntry { item: ItemId(id), title, year, genres })
}

fn parse_rating_line(line: &str) -> Result<Interaction, String> {
    let fields: Vec<&str> = line.split("::").collect();
    let [user, item, rating, ts] = fields[..] else {
        return Err(format!("expected 4 `::`-separated fields, found {}", fields.len()));
    };
    let user = user.trim().parse().map_err(|_| format!("bad user id {user:?}"))?;
    let item = item.trim().parse().map_err(|_| format!("bad movie id {item:?}"))?;
    let rating: f64 = rating.trim().parse().map_err(|_| format!("bad rating {rating:?}"))?;
    if !(0.5..=5.0).contains(&rating) {
        return Err(format!("rating {rating} outside [0.5, 5]"));
    }
    let timestamp: i64 = ts.trim().parse().map_err(|_| format!("bad timestamp {ts:?}"))?;
    if timestamp < 0 {
        return Err(format!("negative timestamp {timestamp}"));
    }
    Ok(Interaction { user: UserId(user), item: ItemId(item), rating, timestamp })
}

pub fn parse_movies<S: AsRef<str>>(
    lines: impl IntoIterator<Item = S>,
    mode: ParseMode,
) -> Result<Parsed<CatalogEntry>, CatalogError> {
    parse_with(lines, mode, parse_movie_line)
}

pub fn parse_ratings<S: AsRef<str>>(
    lines: impl IntoIterator<Item = S>,
    mode: ParseMode,
) -> Result<Parsed<Interaction>, CatalogError> {
    parse_with(lines, mode, parse_rating_line)
}

pub fn read_movies(path: &Path, mode: ParseMode) -> Result<Parsed<CatalogEntry>, CatalogError> {
    parse_movies(read_lines(path)?, mode)
}

pub fn read_ratings(path: &Path, mode: ParseMode) -> Result<Parsed<Interaction>, CatalogError> {
    parse_ratings(read_lines(path)?, mode)
}

/// Raw popularity: number of ratings per item. Items never rated are absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PopularityTable {
    scores: BTreeMap<ItemId, u64>,
}

impl PopularityTable {
    pub fn from_counts(counts: impl IntoIterator<Item = (ItemId, u64)>) -> Self {
        let scores = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        Self { scores }
    }

    pub fn get(&self, item: ItemId) -> Option<u64> {
        self.scores.get(&item).copied()
    }

    pub fn score<T: Scalar>(&self, item: ItemId) -> Option<T> {
        self.get(item).map(|c| T::from_u64(c).expect("count representable"))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.scores.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ItemId, u64)> + '_ {
        self.scores.iter().map(|(&i, &c)| (i, c))
    }

    pub fn items(&self) -> Vec<ItemId> {
        self.scores.keys().copied().collect()
    }

    /// Items ordered by descending count, ties by ascending id.
    pub fn ranked(&self) -> Vec<(ItemId, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

pub fn compute_popularity(interactions: &[Interaction]) -> Result<PopularityTable, CatalogError> {
    if interactions.is_empty() {
        return Err(CatalogError::NoInteractions);
    }
    let mut counts: BTreeMap<ItemId, u64> = BTreeMap::new();
    for it in interactions {
        *counts.entry(it.item).or_default() += 1;
    }
    Ok(PopularityTable { scores: counts })
}

/// Immutable movie catalog with id lookup.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
    by_id: HashMap<ItemId, usize>,
}

impl Catalog {
    pub fn new(entries: Vec<CatalogEntry>) -> Self {
        let by_id = entries.iter().enumerate().map(|(i, e)| (e.item, i)).collect();
        Self { entries, by_id }
    }

    pub fn get(&self, item: ItemId) -> Option<&CatalogEntry> {
        self.by_id.get(&item).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn title_index(&self) -> TitleIndex {
        TitleIndex::build(&self.entries)
    }
}
