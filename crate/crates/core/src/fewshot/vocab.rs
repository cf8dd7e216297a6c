use std::collections::HashMap;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const MASK: &str = "[MASK]";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const MASK_ID: usize = 2;

/// Whitespace tokenization with lowercasing. The mask marker keeps its case.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(normalize_token).collect()
}

pub fn normalize_token(token: &str) -> String {
    if token == MASK {
        token.to_string()
    } else {
        token.to_lowercase()
    }
}

/// Token ↔ id map with reserved ids for padding, unknown and mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Vocab::from_tokens(std::iter::empty::<&str>())
    }
}

impl Vocab {
    /// Builds a vocabulary from tokens in first-seen order after the reserved ids.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in [PAD, UNK, MASK] {
            vocab.insert(t);
        }
        for t in tokens {
            vocab.insert(t.as_ref());
        }
        vocab
    }

    fn insert(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len());
            self.tokens.push(token.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}
