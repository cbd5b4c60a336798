use std::collections::HashMap;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD: &str = "<PAD>";
pub const UNK: &str = "<UNK>";
pub const ARG1_OPEN: &str = "<ARG1>";
pub const ARG1_CLOSE: &str = "</ARG1>";
pub const ARG2_OPEN: &str = "<ARG2>";
pub const ARG2_CLOSE: &str = "</ARG2>";

/// Reserved tokens occupy ids 0..6 in this order.
pub const RESERVED: [&str; 6] = [PAD, UNK, ARG1_OPEN, ARG1_CLOSE, ARG2_OPEN, ARG2_CLOSE];
pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

pub fn is_marker(token: &str) -> bool {
    RESERVED[2..].contains(&token)
}

/// Dense token ↔ id map. Ids follow first occurrence and never move.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// Only the reserved tokens.
    pub fn new() -> Self {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in RESERVED {
            v.push(t);
        }
        v
    }

    fn push(&mut self, token: &str) -> u32 {
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    /// Adds `token` if new. Tokens that cannot round-trip through the
    /// one-per-line file format are ignored and will encode as UNK.
    pub fn insert(&mut self, token: &str) -> Option<u32> {
        if let Some(&id) = self.index.get(token) {
            return Some(id);
        }
        if token.is_empty() || token.contains(['\n', '\r']) {
            return None;
        }
        Some(self.push(token))
    }

    /// Training tokens in order of appearance, then any `extra` tokens for
    /// which `has_vector` holds.
    pub fn build<'a>(
        train_tokens: impl IntoIterator<Item = &'a str>,
        extra_tokens: impl IntoIterator<Item = &'a str>,
        has_vector: impl Fn(&str) -> bool,
    ) -> Self {
        let mut v = Self::new();
        for t in train_tokens {
            v.insert(t);
        }
        for t in extra_tokens {
            if !v.index.contains_key(t) && has_vector(t) {
                v.insert(t);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line; line `n` (1-based) holds id `n − 1`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse { line: i + 1, detail: e.to_string() })?;
            if i < RESERVED.len() && line != RESERVED[i] {
                return Err(Error::Parse {
                    line: i + 1,
                    detail: format!("expected reserved token {} but found `{line}`", RESERVED[i]),
                });
            }
            if v.index.contains_key(&line) {
                return Err(Error::Parse { line: i + 1, detail: format!("duplicate token `{line}`") });
            }
            v.push(&line);
        }
        if v.len() < RESERVED.len() {
            return Err(Error::Parse { line: v.len() + 1, detail: "missing reserved tokens".into() });
        }
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(bytes.as_slice())
    }

    /// SHA-256 of the serialized form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}
