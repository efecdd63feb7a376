//! Lowercasing, accent-folding tokenizer shared by every index.
//!
//! Token characters are Unicode alphanumerics and `_`, so vocabulary terms
//! like `mixed_drink` survive as one token. Everything else separates
//! tokens. Leading and trailing underscores are trimmed. No stemming and no
//! stopword removal.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Lowercase, compatibility-decompose, drop combining marks, lowercase again
/// (decomposition can surface uppercase letters, e.g. `ℌ`).
fn fold(text: &str) -> String {
    let lowered: String = text.chars().flat_map(char::to_lowercase).collect();
    lowered
        .nfkd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .collect()
}

pub fn tokenize(text: &str) -> Vec<String> {
    fold(text)
        .split(|c: char| !is_token_char(c))
        .map(|t| t.trim_matches('_'))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// True if `term` tokenizes to exactly itself.
pub fn is_single_token(term: &str) -> bool {
    matches!(tokenize(term).as_slice(), [t] if t == term)
}
