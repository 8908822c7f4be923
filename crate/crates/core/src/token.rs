//! Tokenization and the dense token vocabulary.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense id of a vocabulary token, `0..|V|-1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The reserved end-of-sequence token. It is an ordinary vocabulary member,
/// appended at document boundaries when corpora are loaded, and generation
/// may stop early once every beam candidate has emitted it.
pub const EOS_TOKEN: &str = "</s>";

/// Lowercase and split on Unicode whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(|t| t.to_lowercase()).collect()
}

/// Bijective mapping between token strings and dense ids. The end-of-sequence
/// token is always present with id 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Build a vocabulary from a token stream, in first-occurrence order,
    /// with the reserved end-of-sequence token in front.
    pub fn from_tokens<S: AsRef<str>>(stream: impl IntoIterator<Item = S>) -> Self {
        let mut vocab = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        vocab.intern(EOS_TOKEN);
        for token in stream {
            vocab.intern(token.as_ref());
        }
        vocab
    }

    fn intern(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = TokenId(self.tokens.len() as u32);
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn eos(&self) -> TokenId {
        TokenId(0)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, id: TokenId) -> bool {
        id.index() < self.tokens.len()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id.index()]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Map token strings to ids, failing on the first unknown token.
    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<TokenId>> {
        tokens
            .iter()
            .map(|t| {
                self.id(t.as_ref())
                    .ok_or_else(|| Error::UnknownToken(t.as_ref().to_owned()))
            })
            .collect()
    }

    /// Map ids back to owned token strings.
    pub fn strings(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter().map(|&id| self.token(id).to_owned()).collect()
    }

    /// Space-joined rendering of a token-id sequence.
    pub fn text(&self, ids: &[TokenId]) -> String {
        self.strings(ids).join(" ")
    }
}
