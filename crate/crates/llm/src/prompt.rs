use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Most recent watched titles placed in a prompt.
pub const HISTORY_LIMIT: usize = 50;

pub const BASE_TEMPLATE: &str = "You are a helpful movie-expert AI tasked with recommending a collection of movies based on a user's watch history. The user has watched the following movies in the past:
{watch_history}

# Output instructions
- Immediately start with the movies. Do not provide an introduction.
- Provide a list of {nr_items} movies.
- For each movie, start a new line, indicate the position in the movie list (that is, 1., 2., ...).
- Name the title of the movie (without quotation marks!) and then in parentheses the release year.
- Do not recommend movies that the user has already watched. Those are the ones listed above.
- Do not recommend movies that are newer than 2008.

Now create the movie list!";

pub const MITIGATE_INSTRUCTION: &str =
    "Recommend movies that match the average popularity level of the movies the user watched in the past.
For instance, if the user mostly watched blockbusters, you should recommend movies that are also blockbusters.
If, on the other hand, the user watched less well-known movies, you should recommend niche movies.";

pub const MINIMIZE_INSTRUCTION: &str =
    "Recommend indie, niche, or less well-known movies, avoiding mainstream blockbusters.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    #[default]
    Base,
    Mitigate,
    Minimize,
}

impl PromptVariant {
    pub fn suffix(self) -> &'static str {
        match self {
            PromptVariant::Base => "",
            PromptVariant::Mitigate => "-mitigate",
            PromptVariant::Minimize => "-minimize",
        }
    }

    fn instruction(self) -> Option<&'static str> {
        match self {
            PromptVariant::Base => None,
            PromptVariant::Mitigate => Some(MITIGATE_INSTRUCTION),
            PromptVariant::Minimize => Some(MINIMIZE_INSTRUCTION),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatchedTitle {
    pub title: String,
    /// 0 when unknown; the year is then left out.
    pub year: i32,
}

impl fmt::Display for WatchedTitle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.year == 0 {
            f.write_str(&self.title)
        } else {
            write!(f, "{} ({})", self.title, self.year)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("watch history is empty")]
    EmptyHistory,
    #[error("number of requested items must be at least 1")]
    ZeroItems,
}

/// Fills the template with the last [`HISTORY_LIMIT`] titles of `history` (oldest first) and
/// `k`, appending the variant's extra instruction at the end.
pub fn render_prompt(history: &[WatchedTitle], k: usize, variant: PromptVariant) -> Result<String, PromptError> {
    if history.is_empty() {
        return Err(PromptError::EmptyHistory);
    }
    if k == 0 {
        return Err(PromptError::ZeroItems);
    }
    let recent = &history[history.len().saturating_sub(HISTORY_LIMIT)..];
    let lines: Vec<String> = recent.iter().map(ToString::to_string).collect();
    let mut prompt = BASE_TEMPLATE.replace("{watch_history}", &lines.join("\n")).replace("{nr_items}", &k.to_string());
    if let Some(extra) = variant.instruction() {
        prompt.push_str("\n\n");
        prompt.push_str(extra);
    }
    Ok(prompt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(title: &str, year: i32) -> WatchedTitle {
        WatchedTitle { title: title.into(), year }
    }

    #[test]
    fn base_prompt() {
        let p = render_prompt(&[t("Heat", 1995)], 10, PromptVariant::Base).unwrap();
        assert!(p.contains("Provide a list of 10 movies"));
        assert!(p.contains("past:\nHeat (1995)\n\n# Output instructions"));
        assert!(p.ends_with("Now create the movie list!"));
    }

    #[test]
    fn variants_append_at_end() {
        let h = [t("Heat", 1995)];
        assert!(render_prompt(&h, 10, PromptVariant::Minimize).unwrap().ends_with(MINIMIZE_INSTRUCTION));
        let m = render_prompt(&h, 10, PromptVariant::Mitigate).unwrap();
        assert!(m.ends_with("you should recommend niche movies."));
        assert!(m.contains("Now create the movie list!\n\nRecommend movies that match"));
    }

    #[test]
    fn truncates_to_most_recent() {
        let h: Vec<WatchedTitle> = (0..60).map(|i| t(&format!("Film {i}"), 1990)).collect();
        let p = render_prompt(&h, 5, PromptVariant::Base).unwrap();
        assert!(!p.contains("Film 9 (1990)"));
        assert!(p.contains("Film 10 (1990)") && p.contains("Film 59 (1990)"));
        assert_eq!(p.matches("(1990)").count(), 50);
    }

    #[test]
    fn errors_and_unknown_year() {
        assert_eq!(render_prompt(&[], 10, PromptVariant::Base), Err(PromptError::EmptyHistory));
        assert_eq!(render_prompt(&[t("Heat", 1995)], 0, PromptVariant::Base), Err(PromptError::ZeroItems));
        assert!(render_prompt(&[t("Odd", 0)], 3, PromptVariant::Base).unwrap().contains("past:\nOdd\n"));
    }

    #[test]
    fn distinct_inputs_give_distinct_prompts() {
        let a = [t("Heat", 1995)];
        let b = [t("Heat", 1996)];
        let all = [
            render_prompt(&a, 10, PromptVariant::Base).unwrap(),
            render_prompt(&a, 9, PromptVariant::Base).unwrap(),
            render_prompt(&b, 10, PromptVariant::Base).unwrap(),
            render_prompt(&a, 10, PromptVariant::Mitigate).unwrap(),
            render_prompt(&a, 10, PromptVariant::Minimize).unwrap(),
        ];
        let unique: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(unique.len(), all.len());
    }
}
