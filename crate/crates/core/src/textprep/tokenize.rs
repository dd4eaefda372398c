use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Ordered lowercase tokens. No token is empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<String>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Splits text into lowercase tokens.
///
/// NFC-normalizes and lowercases, then splits on every character that is not
/// alphanumeric, hyphen, or underscore. Hyphens and underscores are trimmed
/// from token edges. Single-character tokens are dropped unless numeric.
/// Idempotent on its own joined output.
pub fn tokenize(text: &str) -> TokenStream {
    // The second NFC pass keeps tokens normalized even when lowercasing
    // expands a composed character.
    let lowered: String = text
        .nfc()
        .collect::<String>()
        .to_lowercase()
        .nfc()
        .collect();

    let mut tokens = Vec::new();
    for piece in lowered.split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '_')) {
        let trimmed = piece.trim_matches(['-', '_']);
        if trimmed.is_empty() {
            continue;
        }
        let mut chars = trimmed.chars();
        let first = chars.next().expect("non-empty piece");
        if chars.next().is_none() && !first.is_numeric() {
            continue;
        }
        tokens.push(trimmed.to_string());
    }
    TokenStream { tokens }
}
