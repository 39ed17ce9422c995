//! Caption word vocabulary with the two reserved sequence markers.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scenegraph::SceneRecord;

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const BOS_ID: usize = 0;
pub const EOS_ID: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    /// `tokens` must start with `<bos>`, `<eos>` and contain no duplicates.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[BOS_ID] != BOS || tokens[EOS_ID] != EOS {
            return Err(Error::Argument(
                "vocabulary must begin with <bos>, <eos>".into(),
            ));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Argument(alloc::format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    /// Markers followed by every caption word in sorted order.
    pub fn from_records(records: &[SceneRecord]) -> Self {
        let words: BTreeSet<&str> = records
            .iter()
            .flat_map(|r| r.captions.iter().flatten())
            .map(String::as_str)
            .filter(|w| *w != BOS && *w != EOS)
            .collect();
        let tokens = [BOS, EOS]
            .into_iter()
            .chain(words)
            .map(String::from)
            .collect();
        Vocab::new(tokens).expect("markers first, words deduplicated")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Result<usize> {
        self.index
            .get(token)
            .copied()
            .ok_or_else(|| Error::UnknownToken(token.into()))
    }

    pub fn encode(&self, words: &[String]) -> Result<Vec<usize>> {
        words.iter().map(|w| self.id(w)).collect()
    }

    pub fn token(&self, id: usize) -> Result<&str> {
        self.tokens
            .get(id)
            .map(String::as_str)
            .ok_or(Error::TokenOutOfRange {
                id,
                vocab: self.tokens.len(),
            })
    }

    pub fn decode(&self, ids: &[usize]) -> Result<Vec<String>> {
        ids.iter().map(|&i| self.token(i).map(String::from)).collect()
    }
}
