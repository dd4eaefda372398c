//! Deterministic text preparation: tokenization, diff handling, and
//! augmentation of brief commit messages with a generated summary.

mod augment;
mod diff;
mod provider;
mod tokenize;

pub use augment::{
    augment_all, augment_message, informative_token_count, needs_augmentation, AugmentConfig,
    AugmentRun, AugmentedMessage, CommitAugment, MessageSource,
};
pub use diff::{fallback_generate, truncate_diff};
pub use provider::{GenerationProvider, HttpGenerationProvider, ProviderError};
pub use tokenize::{tokenize, TokenStream};
