//! Recommending movies by prompting a chat model with a user's watch history.
//!
//! The pipeline is [`render_prompt`] → [`ChatClient::complete`] → [`parse_recommendations`] →
//! [`validate_and_resolve`]; [`WokRecommender`] wires it into the evaluation harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod parse;
pub mod prompt;
pub mod provider;
mod wok;

pub use parse::{parse_recommendations, validate_and_resolve, ParsedLine, ParsedList, Validated, ValidityTag};
pub use prompt::{render_prompt, PromptError, PromptVariant, WatchedTitle};
pub use provider::{complete_chat, prompt_hash, ChatClient, Dialect, ProviderConfig, ProviderError, Secret};
pub use wok::{wok_name, WokFactory, WokRecommender, WokSpec, WokTrace};
