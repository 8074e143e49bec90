//! Ingestion of raw post and interaction files into count matrices, an
//! interaction network and per-user timelines.
//!
//! Matrix naming follows the model: `M` holds candidate users' prior status
//! messages, `P` the messages mentioning them, `W` the status-message profile
//! of each mention's author (one row per mention), `C` the candidate posts
//! themselves and `R` the profile of every network user.

mod sparse;
mod store;
mod tokenize;
mod vocab;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use sparse::{SparseCountMatrix, SparseVec};
pub use tokenize::{tokenize, tokenize_with, Token, DEFAULT_MIN_TOKEN_LEN};
pub use vocab::{VocabRole, Vocabulary};

use crate::{Error, Result};

/// Most recent prior statuses kept per candidate.
pub const MAX_STATUSES_PER_USER: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusConfig {
    #[serde(default)]
    pub vocab_cap: Option<usize>,
    #[serde(default = "default_min_token_len")]
    pub min_token_len: usize,
}

fn default_min_token_len() -> usize {
    DEFAULT_MIN_TOKEN_LEN
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            vocab_cap: None,
            min_token_len: DEFAULT_MIN_TOKEN_LEN,
        }
    }
}

impl CorpusConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema {
            file: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// One line of `posts.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostRecord {
    pub user_id: String,
    pub ts: i64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

/// One line of `interactions.jsonl`: `src` mentions `dst`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionRecord {
    pub src: String,
    pub dst: String,
    pub ts: i64,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusRef {
    pub ts: i64,
    /// Row of `M`.
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionRef {
    pub ts: i64,
    /// Row of `P` and `W`.
    pub row: usize,
    pub author: String,
}

/// A candidate user's chronological history up to the labeled candidate post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTimeline {
    pub user_id: String,
    pub statuses: Vec<StatusRef>,
    pub mentions: Vec<MentionRef>,
    pub label: Option<u8>,
    pub candidate_ts: i64,
    /// Row of `C`.
    pub candidate_row: usize,
    /// Users who mentioned this user and were mentioned back, sorted.
    pub interactors: Vec<String>,
}

impl UserTimeline {
    pub fn transitions(&self) -> usize {
        self.statuses.len().saturating_sub(1)
    }

    /// Mention ranges feeding each transition `k - 1 -> k` (index `k - 1` in
    /// the result). A mention sharing a timestamp with a status belongs to the
    /// window ending at that status; mentions before the first status fall
    /// into the first window.
    pub fn transition_windows(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::with_capacity(self.transitions());
        let mut start = 0;
        for status in self.statuses.iter().skip(1) {
            let end = start + self.mentions[start..].partition_point(|m| m.ts <= status.ts);
            out.push(start..end);
            start = end;
        }
        out
    }

    /// Mentions after the last status, up to the candidate post.
    pub fn final_window(&self) -> std::ops::Range<usize> {
        let last = self.statuses.last().map_or(i64::MIN, |s| s.ts);
        let start = self.mentions.partition_point(|m| m.ts <= last);
        start..self.mentions.len()
    }
}

/// A timestamped mention between two network users (indices into
/// [`Corpus::users`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub ts: i64,
    pub src: usize,
    pub dst: usize,
}

/// Mention counts among a candidate user and their interactors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionNetwork {
    /// Candidate first, then interactors in id order.
    pub users: Vec<String>,
    counts: BTreeMap<(usize, usize), u32>,
    pub as_of: Option<i64>,
}

impl InteractionNetwork {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.counts.get(&(i, j)).copied().unwrap_or(0)
    }

    /// Ordered pairs with at least one mention.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.counts.iter().map(|(&(i, j), &n)| (i, j, n))
    }

    pub fn edge_count(&self) -> usize {
        self.counts.len()
    }
}

/// Time-sorted events restricted to one candidate's network, for cheap
/// repeated snapshots during training.
#[derive(Debug, Clone)]
pub struct UserNetwork {
    users: Vec<String>,
    /// Corpus user index of each local user.
    members: Vec<usize>,
    events: Vec<(i64, usize, usize)>,
}

impl UserNetwork {
    pub fn users(&self) -> &[String] {
        &self.users
    }

    /// Corpus user indices aligned with [`Self::users`].
    pub fn events(&self) -> &[(i64, usize, usize)] {
        &self.events
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn snapshot(&self, at: Option<i64>) -> InteractionNetwork {
        let mut counts = BTreeMap::new();
        for &(ts, i, j) in &self.events {
            if at.is_some_and(|at| ts > at) {
                break;
            }
            *counts.entry((i, j)).or_insert(0) += 1;
        }
        InteractionNetwork {
            users: self.users.clone(),
            counts,
            as_of: at,
        }
    }
}

/// Immutable bundle of vocabularies, count matrices, network events and
/// timelines.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub(crate) config: CorpusConfig,
    pub(crate) status_vocab: Vocabulary,
    pub(crate) interaction_vocab: Vocabulary,
    pub(crate) interactor_vocab: Vocabulary,
    pub(crate) statuses: SparseCountMatrix,
    pub(crate) interactions: SparseCountMatrix,
    pub(crate) authors: SparseCountMatrix,
    pub(crate) candidates: SparseCountMatrix,
    pub(crate) profiles: SparseCountMatrix,
    pub(crate) users: Vec<String>,
    pub(crate) events: Vec<InteractionEvent>,
    pub(crate) timelines: Vec<UserTimeline>,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(
    path: &Path,
    check: impl Fn(&T) -> std::result::Result<(), String>,
) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| Error::Schema {
            file: path.display().to_string(),
            line: i + 1,
            message,
        };
        let record: T = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        check(&record).map_err(schema)?;
        out.push(record);
    }
    Ok(out)
}

/// Reads `posts.jsonl` and `interactions.jsonl` and assembles a [`Corpus`].
pub fn build_corpus(posts_file: &Path, interactions_file: &Path, config: &CorpusConfig) -> Result<Corpus> {
    let posts: Vec<PostRecord> = read_jsonl(posts_file, |p: &PostRecord| match p.label {
        Some(l) if l > 1 => Err(format!("label must be 0 or 1, got {l}")),
        _ => Ok(()),
    })?;
    let interactions: Vec<InteractionRecord> = read_jsonl(interactions_file, |_| Ok(()))?;
    Corpus::from_records(&posts, &interactions, config)
}

struct Draft<'a> {
    user_id: &'a str,
    label: u8,
    candidate: &'a PostRecord,
    statuses: Vec<&'a PostRecord>,
    mentions: Vec<&'a InteractionRecord>,
    interactors: Vec<String>,
}

impl Corpus {
    /// Assembles a corpus from parsed records. Record order is file order and
    /// breaks timestamp ties.
    pub fn from_records(
        posts: &[PostRecord],
        interactions: &[InteractionRecord],
        config: &CorpusConfig,
    ) -> Result<Self> {
        let tok = |text: &str| tokenize_with(text, config.min_token_len);

        let mut by_user: BTreeMap<&str, Vec<&PostRecord>> = BTreeMap::new();
        for p in posts {
            by_user.entry(p.user_id.as_str()).or_default().push(p);
        }
        for list in by_user.values_mut() {
            // stable: equal timestamps keep file order
            list.sort_by_key(|p| p.ts);
        }

        let mut drafts = Vec::new();
        for (&user, list) in &by_user {
            let Some(cand_pos) = list.iter().rposition(|p| p.label.is_some()) else {
                continue;
            };
            let candidate = list[cand_pos];
            let mut statuses: Vec<&PostRecord> =
                list[..cand_pos].iter().copied().filter(|p| p.label.is_none()).collect();
            if statuses.is_empty() {
                log::warn!("candidate `{user}` has no prior statuses; excluded");
                continue;
            }
            if statuses.len() > MAX_STATUSES_PER_USER {
                statuses.drain(..statuses.len() - MAX_STATUSES_PER_USER);
            }
            let mentioned: HashSet<&str> = interactions
                .iter()
                .filter(|e| e.src == user && e.ts <= candidate.ts)
                .map(|e| e.dst.as_str())
                .collect();
            let mut mentions: Vec<&InteractionRecord> = interactions
                .iter()
                .filter(|e| {
                    e.dst == user
                        && e.src != user
                        && e.ts <= candidate.ts
                        && mentioned.contains(e.src.as_str())
                })
                .collect();
            mentions.sort_by_key(|e| e.ts);
            let interactors: BTreeSet<String> = mentions.iter().map(|e| e.src.clone()).collect();
            drafts.push(Draft {
                user_id: user,
                label: candidate.label.unwrap_or(0),
                candidate,
                statuses,
                mentions,
                interactors: interactors.into_iter().collect(),
            });
        }

        let users: Vec<String> = drafts
            .iter()
            .flat_map(|d| std::iter::once(d.user_id.to_string()).chain(d.interactors.iter().cloned()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let user_index: HashMap<&str, usize> =
            users.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
        let interactor_set: BTreeSet<&str> = drafts
            .iter()
            .flat_map(|d| d.interactors.iter().map(String::as_str))
            .collect();

        // vocabularies
        let mut status_counts = HashMap::new();
        let mut interaction_counts = HashMap::new();
        let mut interactor_counts = HashMap::new();
        let bump = |counts: &mut HashMap<String, u64>, text: &str| {
            for t in tok(text) {
                *counts.entry(t.into_string()).or_insert(0) += 1;
            }
        };
        for d in &drafts {
            for s in &d.statuses {
                bump(&mut status_counts, &s.text);
            }
            bump(&mut status_counts, &d.candidate.text);
            for m in &d.mentions {
                bump(&mut interaction_counts, &m.text);
            }
        }
        for p in posts {
            if p.label.is_none() && interactor_set.contains(p.user_id.as_str()) {
                bump(&mut interactor_counts, &p.text);
            }
        }
        let status_vocab = Vocabulary::from_counts(VocabRole::Status, &status_counts, config.vocab_cap);
        let interaction_vocab =
            Vocabulary::from_counts(VocabRole::Interaction, &interaction_counts, config.vocab_cap);
        let interactor_vocab =
            Vocabulary::from_counts(VocabRole::Interactor, &interactor_counts, config.vocab_cap);

        let count_row = |vocab: &Vocabulary, texts: &mut dyn Iterator<Item = &str>| {
            let mut row = BTreeMap::new();
            for text in texts {
                for t in tok(text) {
                    if let Some(c) = vocab.get(t.as_str()) {
                        *row.entry(c).or_insert(0u32) += 1;
                    }
                }
            }
            row
        };

        // profiles: every unlabeled post of each network user
        let profile_rows: Vec<BTreeMap<usize, u32>> = users
            .iter()
            .map(|u| {
                let list = by_user.get(u.as_str()).map(Vec::as_slice).unwrap_or(&[]);
                count_row(
                    &interactor_vocab,
                    &mut list.iter().filter(|p| p.label.is_none()).map(|p| p.text.as_str()),
                )
            })
            .collect();
        let profiles = SparseCountMatrix::from_rows(interactor_vocab.len(), &profile_rows)?;

        let mut statuses = SparseCountMatrix::empty(status_vocab.len());
        let mut interactions_m = SparseCountMatrix::empty(interaction_vocab.len());
        let mut authors = SparseCountMatrix::empty(interactor_vocab.len());
        let mut candidates = SparseCountMatrix::empty(status_vocab.len());
        let mut timelines = Vec::with_capacity(drafts.len());
        for d in &drafts {
            let mut status_refs = Vec::with_capacity(d.statuses.len());
            for s in &d.statuses {
                status_refs.push(StatusRef {
                    ts: s.ts,
                    row: statuses.rows(),
                });
                statuses.push_row(&count_row(&status_vocab, &mut std::iter::once(s.text.as_str())))?;
            }
            let mut mention_refs = Vec::with_capacity(d.mentions.len());
            for m in &d.mentions {
                mention_refs.push(MentionRef {
                    ts: m.ts,
                    row: interactions_m.rows(),
                    author: m.src.clone(),
                });
                interactions_m
                    .push_row(&count_row(&interaction_vocab, &mut std::iter::once(m.text.as_str())))?;
                authors.push_row(&profile_rows[user_index[m.src.as_str()]])?;
            }
            let candidate_row = candidates.rows();
            candidates.push_row(&count_row(
                &status_vocab,
                &mut std::iter::once(d.candidate.text.as_str()),
            ))?;
            timelines.push(UserTimeline {
                user_id: d.user_id.to_string(),
                statuses: status_refs,
                mentions: mention_refs,
                label: Some(d.label),
                candidate_ts: d.candidate.ts,
                candidate_row,
                interactors: d.interactors.clone(),
            });
        }

        let mut events: Vec<InteractionEvent> = interactions
            .iter()
            .filter(|e| e.src != e.dst)
            .filter_map(|e| {
                Some(InteractionEvent {
                    ts: e.ts,
                    src: *user_index.get(e.src.as_str())?,
                    dst: *user_index.get(e.dst.as_str())?,
                })
            })
            .collect();
        events.sort();

        Ok(Corpus {
            config: config.clone(),
            status_vocab,
            interaction_vocab,
            interactor_vocab,
            statuses,
            interactions: interactions_m,
            authors,
            candidates,
            profiles,
            users,
            events,
            timelines,
        })
    }

    pub fn config(&self) -> &CorpusConfig {
        &self.config
    }

    pub fn vocab(&self, role: VocabRole) -> &Vocabulary {
        match role {
            VocabRole::Status => &self.status_vocab,
            VocabRole::Interaction => &self.interaction_vocab,
            VocabRole::Interactor => &self.interactor_vocab,
        }
    }

    /// `M`: prior status messages, one row per status.
    pub fn status_matrix(&self) -> &SparseCountMatrix {
        &self.statuses
    }

    /// `P`: mention texts, one row per mention.
    pub fn interaction_matrix(&self) -> &SparseCountMatrix {
        &self.interactions
    }

    /// `W`: author profile of each mention, aligned with `P`.
    pub fn author_matrix(&self) -> &SparseCountMatrix {
        &self.authors
    }

    /// `C`: candidate posts, one row per timeline.
    pub fn candidate_matrix(&self) -> &SparseCountMatrix {
        &self.candidates
    }

    /// `R`: profile of every network user, aligned with [`Self::users`].
    pub fn profile_matrix(&self) -> &SparseCountMatrix {
        &self.profiles
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn events(&self) -> &[InteractionEvent] {
        &self.events
    }

    pub fn timelines(&self) -> &[UserTimeline] {
        &self.timelines
    }

    pub fn timeline(&self, user: &str) -> Result<&UserTimeline> {
        self.timelines
            .iter()
            .find(|t| t.user_id == user)
            .ok_or_else(|| Error::UnknownUser(user.to_string()))
    }

    pub fn user_index(&self, user: &str) -> Option<usize> {
        self.users.binary_search_by(|u| u.as_str().cmp(user)).ok()
    }

    /// A status row re-expressed in the interactor vocabulary by token
    /// identity; tokens absent from that vocabulary are dropped.
    pub fn status_in_interactor_space(&self, row: usize) -> SparseVec {
        self.to_interactor_space(self.statuses.row_entries(row))
    }

    /// The candidate post of a timeline in the interactor vocabulary.
    pub fn candidate_in_interactor_space(&self, timeline: &UserTimeline) -> SparseVec {
        self.to_interactor_space(self.candidates.row_entries(timeline.candidate_row))
    }

    fn to_interactor_space(&self, entries: impl Iterator<Item = (usize, u32)>) -> SparseVec {
        SparseVec::from_pairs(entries.filter_map(|(c, n)| {
            let tok = self.status_vocab.token(c)?;
            Some((self.interactor_vocab.get(tok)?, f64::from(n)))
        }))
    }

    /// Events among a candidate and their interactors, ready for snapshots.
    pub fn user_network(&self, user: &str) -> Result<UserNetwork> {
        let tl = self.timeline(user)?;
        let mut local_users = vec![tl.user_id.clone()];
        local_users.extend(tl.interactors.iter().cloned());
        let members: Vec<usize> = local_users
            .iter()
            .map(|u| self.user_index(u).ok_or_else(|| Error::UnknownUser(u.clone())))
            .collect::<Result<_>>()?;
        let local: HashMap<usize, usize> = members.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let events = self
            .events
            .iter()
            .filter_map(|e| Some((e.ts, *local.get(&e.src)?, *local.get(&e.dst)?)))
            .collect();
        Ok(UserNetwork {
            users: local_users,
            members,
            events,
        })
    }

    /// `N^M`: mention counts among `user` and their interactors, using only
    /// interactions at or before `at` (`None` means no cut).
    pub fn network_snapshot(&self, user: &str, at: Option<i64>) -> Result<InteractionNetwork> {
        Ok(self.user_network(user)?.snapshot(at))
    }
}
