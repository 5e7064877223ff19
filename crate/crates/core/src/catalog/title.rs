//! Title normalization and free-text title resolution against the catalog.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::{CatalogEntry, ItemId};

const ARTICLES: [&str; 3] = ["the", "a", "an"];
const MAX_EDIT_DISTANCE: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TitleKey {
    pub normalized_title: String,
    pub year: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Matched(ItemId),
    Unmatched,
}

impl Resolution {
    pub fn item(self) -> Option<ItemId> {
        match self {
            Resolution::Matched(i) => Some(i),
            Resolution::Unmatched => None,
        }
    }
}

fn strip_marks_lowercase(s: &str) -> String {
    s.to_lowercase().nfd().filter(|c| !is_combining_mark(*c)).collect::<String>().to_lowercase()
}

fn drop_trailing_article(s: &str) -> &str {
    for a in ARTICLES {
        if let Some(head) = s.strip_suffix(a).and_then(|h| h.strip_suffix(", ")) {
            return head;
        }
    }
    s
}

/// Lowercases, strips diacritics and punctuation, removes a leading or trailing
/// (comma-rotated) article, and collapses whitespace.
pub fn normalize_title(title: &str, year: i32) -> TitleKey {
    let folded = strip_marks_lowercase(title);
    let rotated = drop_trailing_article(folded.trim());
    let cleaned: String = rotated.chars().filter(|c| c.is_alphanumeric() || c.is_whitespace()).collect();
    let mut words: Vec<&str> = cleaned.split_whitespace().collect();
    while words.len() > 1 && ARTICLES.contains(&words[0]) {
        words.remove(0);
    }
    TitleKey { normalized_title: words.join(" "), year }
}

/// Splits off trailing parenthesized groups, e.g. `Seven (a.k.a. Se7en)` yields the base
/// title `Seven` and the alias `Se7en`.
fn title_variants(title: &str) -> (String, Vec<String>) {
    let mut base = title.trim();
    let mut aliases = Vec::new();
    while let Some(inner) = base.strip_suffix(')') {
        let Some(open) = inner.rfind('(') else { break };
        let alias = inner[open + 1..].trim();
        let alias = alias.strip_prefix("a.k.a. ").or_else(|| alias.strip_prefix("aka ")).unwrap_or(alias);
        if !alias.is_empty() {
            aliases.push(alias.to_owned());
        }
        let head = inner[..open].trim_end();
        if head.is_empty() {
            break;
        }
        base = head;
    }
    (base.to_owned(), aliases)
}

/// Lookup structure over normalized titles. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct TitleIndex {
    primary: HashMap<TitleKey, BTreeSet<ItemId>>,
    alias: HashMap<TitleKey, BTreeSet<ItemId>>,
    by_year: BTreeMap<i32, Vec<(String, ItemId)>>,
}

impl TitleIndex {
    pub fn build(entries: &[CatalogEntry]) -> Self {
        let mut idx = TitleIndex::default();
        for e in entries {
            let full = normalize_title(&e.title, e.year);
            let (base, aliases) = title_variants(&e.title);
            let mut alias_keys: Vec<TitleKey> = aliases.iter().map(|a| normalize_title(a, e.year)).collect();
            if !aliases.is_empty() {
                alias_keys.push(normalize_title(&base, e.year));
            }
            if e.year != 0 {
                let names = idx.by_year.entry(e.year).or_default();
                names.push((full.normalized_title.clone(), e.item));
                for k in &alias_keys {
                    names.push((k.normalized_title.clone(), e.item));
                }
            }
            idx.primary.entry(full).or_default().insert(e.item);
            for k in alias_keys {
                if !k.normalized_title.is_empty() {
                    idx.alias.entry(k).or_default().insert(e.item);
                }
            }
        }
        idx
    }

    fn exact(&self, key: &TitleKey) -> Option<ItemId> {
        self.primary.get(key).or_else(|| self.alias.get(key)).and_then(|ids| ids.iter().next().copied())
    }

    fn all_for(&self, key: &TitleKey) -> impl Iterator<Item = ItemId> + '_ {
        self.primary.get(key).into_iter().chain(self.alias.get(key)).flat_map(|s| s.iter().copied())
    }
}

fn unique(items: BTreeSet<ItemId>) -> Option<Option<ItemId>> {
    match items.len() {
        0 => None,
        1 => Some(items.into_iter().next()),
        _ => Some(None),
    }
}

/// Resolves a free-text title to a catalog item: exact key, then year ±1, then a unique
/// Levenshtein match (distance ≤ 2) among titles released within a year of `year`.
pub fn resolve_title(title: &str, year: i32, index: &TitleIndex) -> Resolution {
    let (base, aliases) = title_variants(title);
    let mut queries = vec![normalize_title(title, year)];
    for q in std::iter::once(base).chain(aliases) {
        let k = normalize_title(&q, year);
        if !k.normalized_title.is_empty() && !queries.contains(&k) {
            queries.push(k);
        }
    }

    for q in &queries {
        if let Some(item) = index.exact(q) {
            return Resolution::Matched(item);
        }
    }
    if year == 0 {
        return Resolution::Unmatched;
    }

    for q in &queries {
        let mut near = BTreeSet::new();
        for y in [year - 1, year + 1] {
            let k = TitleKey { normalized_title: q.normalized_title.clone(), year: y };
            near.extend(index.all_for(&k));
        }
        match unique(near) {
            Some(Some(item)) => return Resolution::Matched(item),
            Some(None) => return Resolution::Unmatched,
            None => {}
        }
    }

    for q in &queries {
        let target = &q.normalized_title;
        let tlen = target.chars().count();
        let mut best = usize::MAX;
        let mut at_best = BTreeSet::new();
        for (_, names) in index.by_year.range(year - 1..=year + 1) {
            for (name, item) in names {
                if name.chars().count().abs_diff(tlen) > MAX_EDIT_DISTANCE {
                    continue;
                }
                let d = strsim::levenshtein(name, target);
                if d > MAX_EDIT_DISTANCE || d > best {
                    continue;
                }
                if d < best {
                    best = d;
                    at_best.clear();
                }
                at_best.insert(*item);
            }
        }
        match unique(at_best) {
            Some(Some(item)) => return Resolution::Matched(item),
            Some(None) => return Resolution::Unmatched,
            None => {}
        }
    }
    Resolution::Unmatched
}
