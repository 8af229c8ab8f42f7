//! Pluggable tokenizers keyed by id.
//!
//! The built-in `"whitespace"` tokenizer counts maximal non-whitespace runs
//! and is always registered. Real deployments measured tokens with a model
//! tokenizer; that divergence is surfaced in evaluation report metadata
//! rather than papered over here.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};

pub const WHITESPACE: &str = "whitespace";

pub trait Tokenizer: Send + Sync {
    fn id(&self) -> &str;

    /// Split text into token spans, in order.
    fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str>;

    fn count(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

/// Maximal non-whitespace runs.
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn id(&self) -> &str {
        WHITESPACE
    }

    fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str> {
        text.split_whitespace().collect()
    }
}

fn registry() -> &'static RwLock<HashMap<String, Arc<dyn Tokenizer>>> {
    static REGISTRY: OnceLock<RwLock<HashMap<String, Arc<dyn Tokenizer>>>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut map: HashMap<String, Arc<dyn Tokenizer>> = HashMap::new();
        map.insert(WHITESPACE.to_string(), Arc::new(WhitespaceTokenizer));
        RwLock::new(map)
    })
}

/// Register a tokenizer under its own id, replacing any previous entry.
pub fn register_tokenizer(tokenizer: Arc<dyn Tokenizer>) {
    registry()
        .write()
        .expect("tokenizer registry poisoned")
        .insert(tokenizer.id().to_string(), tokenizer);
}

pub fn tokenizer(id: &str) -> Result<Arc<dyn Tokenizer>> {
    registry()
        .read()
        .expect("tokenizer registry poisoned")
        .get(id)
        .cloned()
        .ok_or_else(|| Error::UnknownTokenizer(id.to_string()))
}

pub fn is_registered(id: &str) -> bool {
    registry()
        .read()
        .expect("tokenizer registry poisoned")
        .contains_key(id)
}

/// Token count of `text` under the registered tokenizer. 0 for empty text.
pub fn count_tokens(text: &str, tokenizer_id: &str) -> Result<usize> {
    Ok(tokenizer(tokenizer_id)?.count(text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_counts() {
        assert_eq!(count_tokens("", WHITESPACE).unwrap(), 0);
        assert_eq!(count_tokens("the cat sat", WHITESPACE).unwrap(), 3);
        // mixed whitespace, trailing newline
        assert_eq!(count_tokens("a  b\tc\n", WHITESPACE).unwrap(), 3);
    }

    #[test]
    fn unknown_tokenizer_is_an_error() {
        assert!(matches!(
            count_tokens("x", "gpt-3.5"),
            Err(Error::UnknownTokenizer(_))
        ));
    }

    #[test]
    fn custom_tokenizer_registers() {
        struct Chars;
        impl Tokenizer for Chars {
            fn id(&self) -> &str {
                "test-chars"
            }
            fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str> {
                text.split("").filter(|s| !s.is_empty()).collect()
            }
        }
        register_tokenizer(Arc::new(Chars));
        assert_eq!(count_tokens("abc", "test-chars").unwrap(), 3);
    }
}
