use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

/// Which text role a vocabulary indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabRole {
    /// Candidate users' own status messages (width m).
    Status,
    /// Messages mentioning candidates (width r).
    Interaction,
    /// Status messages of the users who wrote those mentions (width q).
    Interactor,
}

impl VocabRole {
    pub fn file_stem(self) -> &'static str {
        match self {
            VocabRole::Status => "status",
            VocabRole::Interaction => "interaction",
            VocabRole::Interactor => "interactor",
        }
    }
}

/// Dense bijection between tokens and column ids `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    role: VocabRole,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Columns are assigned by descending frequency, ties broken by token, so
    /// two builds over the same counts agree. With `cap`, only the `cap` most
    /// frequent tokens are kept.
    pub fn from_counts(role: VocabRole, counts: &HashMap<String, u64>, cap: Option<usize>) -> Self {
        let mut ranked: Vec<(&String, u64)> = counts.iter().map(|(t, &n)| (t, n)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        if let Some(cap) = cap {
            ranked.truncate(cap);
        }
        Self::from_tokens(role, ranked.into_iter().map(|(t, _)| t.clone()).collect())
    }

    pub fn from_tokens(role: VocabRole, tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            role,
            tokens,
            index,
        }
    }

    /// Rebuilds from a serialized token → column map. Fails unless the
    /// columns are exactly `0..len`.
    pub fn from_map(role: VocabRole, map: BTreeMap<String, usize>) -> Option<Self> {
        let mut tokens = vec![None; map.len()];
        for (tok, col) in map {
            let slot = tokens.get_mut(col)?;
            if slot.is_some() {
                return None;
            }
            *slot = Some(tok);
        }
        let tokens = tokens.into_iter().collect::<Option<Vec<_>>>()?;
        Some(Self::from_tokens(role, tokens))
    }

    pub fn to_map(&self) -> BTreeMap<String, usize> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect()
    }

    pub fn role(&self) -> VocabRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, col: usize) -> Option<&str> {
        self.tokens.get(col).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}
