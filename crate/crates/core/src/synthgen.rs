//! Seeded synthetic corpora with planted labels, mention structure and
//! latent trajectories.
//!
//! Topic `k` owns the tokens `t{k}w{j}`; topic 0 is the protest topic. Each
//! role draws from the first `size / I_true` tokens of every topic block, so
//! shared tokens line up across the status, interaction and interactor
//! vocabularies.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{InteractionRecord, PostRecord};
use crate::dynamics::SECONDS_PER_DAY;
use crate::{Error, Result};

pub const PROTEST_TOPIC: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocabSizes {
    /// Status words.
    pub m: usize,
    /// Interaction words.
    pub r: usize,
    /// Interactor profile words.
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_users: usize,
    pub n_interactors_per_user: usize,
    /// Prior statuses per user, at most 200.
    pub statuses_per_user: usize,
    #[serde(rename = "I_true")]
    pub i_true: usize,
    pub vocab_sizes: VocabSizes,
    /// Per-day drift range of each true latent dimension.
    pub mu_range: (f64, f64),
    /// Per-day volatility range.
    pub sigma_range: (f64, f64),
    /// 0 makes labels independent of everything the model sees; 1 ties every
    /// mention of a user to the user's label.
    pub signal_strength: f64,
    pub time_span_days: f64,
    pub positive_rate: f64,
    pub words_per_post: usize,
    /// Expected mentions received per user.
    pub mentions_per_user: f64,
    pub posts_per_interactor: usize,
    /// Log-state increment of a topic's dimension per mention on that topic.
    pub mention_boost: f64,
    /// Share of each received mention count that lands after the last status.
    pub late_mention_share: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_users: 200,
            n_interactors_per_user: 4,
            statuses_per_user: 15,
            i_true: 10,
            vocab_sizes: VocabSizes { m: 60, r: 60, q: 60 },
            mu_range: (-0.05, 0.05),
            sigma_range: (0.05, 0.15),
            signal_strength: 1.0,
            time_span_days: 60.0,
            positive_rate: 0.233,
            words_per_post: 8,
            mentions_per_user: 24.0,
            posts_per_interactor: 6,
            mention_boost: 1.0,
            late_mention_share: 0.85,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let counts = [
            ("n_users", self.n_users),
            ("n_interactors_per_user", self.n_interactors_per_user),
            ("statuses_per_user", self.statuses_per_user),
            ("I_true", self.i_true),
            ("words_per_post", self.words_per_post),
            ("posts_per_interactor", self.posts_per_interactor),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be positive"));
        }
        if self.statuses_per_user > crate::corpus::MAX_STATUSES_PER_USER {
            return bad(format!(
                "statuses_per_user must be at most {}",
                crate::corpus::MAX_STATUSES_PER_USER
            ));
        }
        if self.i_true < 2 {
            return bad("I_true must be at least 2".into());
        }
        let v = self.vocab_sizes;
        if [v.m, v.r, v.q].iter().any(|&s| s < self.i_true) {
            return bad("every vocabulary size must be at least I_true".into());
        }
        let (mu_lo, mu_hi) = self.mu_range;
        let (s_lo, s_hi) = self.sigma_range;
        if !(mu_lo.is_finite() && mu_hi.is_finite() && mu_lo <= mu_hi) {
            return bad("mu_range must be a finite, ordered pair".into());
        }
        if !(s_lo > 0.0 && s_hi.is_finite() && s_lo <= s_hi) {
            return bad("sigma_range must be positive and ordered".into());
        }
        let unit = [
            ("signal_strength", self.signal_strength),
            ("late_mention_share", self.late_mention_share),
        ];
        if let Some((name, _)) = unit.iter().find(|(_, x)| !(0.0..=1.0).contains(x)) {
            return bad(format!("{name} must lie in [0, 1]"));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return bad("positive_rate must lie in (0, 1)".into());
        }
        if !(self.time_span_days > 0.0 && self.time_span_days.is_finite()) {
            return bad("time_span_days must be positive".into());
        }
        if !(self.mentions_per_user >= 0.0 && self.mentions_per_user.is_finite()) {
            return bad("mentions_per_user must be non-negative".into());
        }
        if !self.mention_boost.is_finite() {
            return bad("mention_boost must be finite".into());
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| Error::Schema {
            file: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthUser {
    pub user_id: String,
    pub label: u8,
    pub mu_true: Vec<f64>,
    pub sigma_true: Vec<f64>,
    pub protest_topic_index: usize,
    /// Topic of each interactor, in interactor order.
    pub interactor_topics: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub users: Vec<TruthUser>,
    pub config: SynthConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub posts: Vec<PostRecord>,
    pub interactions: Vec<InteractionRecord>,
    pub truth: Truth,
}

impl SynthCorpus {
    /// Writes `posts.jsonl`, `interactions.jsonl` and `truth.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join("posts.jsonl"), &self.posts)?;
        write_jsonl(&dir.join("interactions.jsonl"), &self.interactions)?;
        let path = dir.join("truth.json");
        let text = serde_json::to_string_pretty(&self.truth)?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

struct Words {
    topics: usize,
    per_topic: usize,
}

impl Words {
    fn new(topics: usize, size: usize) -> Self {
        Self {
            topics,
            per_topic: size / topics,
        }
    }

    fn text(&self, topic: usize, n: usize, rng: &mut ChaCha8Rng) -> String {
        (0..n)
            .map(|_| format!("t{topic}w{}", rng.random_range(0..self.per_topic)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn off_topic(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.random_range(1..self.topics)
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn seconds(days: f64) -> i64 {
    (days * SECONDS_PER_DAY).round() as i64
}

fn argmax(x: &[f64]) -> usize {
    x.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Draws a corpus from `config`; identical configs give identical output.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let topics = config.i_true;
    let status_words = Words::new(topics, config.vocab_sizes.m);
    let mention_words = Words::new(topics, config.vocab_sizes.r);
    let profile_words = Words::new(topics, config.vocab_sizes.q);
    let mention_count = Poisson::new(config.mentions_per_user.max(1e-9))
        .map_err(|e| Error::InvalidConfig(format!("mentions_per_user: {e}")))?;
    let s = config.signal_strength;
    let span = config.time_span_days;

    let mut posts = Vec::new();
    let mut interactions = Vec::new();
    let mut truth = Vec::with_capacity(config.n_users);
    let width = config.n_users.to_string().len();
    for idx in 0..config.n_users {
        let user_id = format!("user{idx:0width$}");
        let label = u8::from(rng.random_bool(config.positive_rate));
        let mu: Vec<f64> = (0..topics).map(|_| uniform(&mut rng, config.mu_range)).collect();
        let sigma: Vec<f64> = (0..topics).map(|_| uniform(&mut rng, config.sigma_range)).collect();
        let candidate_day = span * rng.random_range(0.8..1.0);
        let candidate_ts = seconds(candidate_day);

        // interactor topics: planted with probability s, otherwise a coin flip
        // between the protest topic and a random other topic
        let interactor_topics: Vec<usize> = (0..config.n_interactors_per_user)
            .map(|_| {
                if rng.random_bool(s) {
                    if label == 1 {
                        PROTEST_TOPIC
                    } else {
                        profile_words.off_topic(&mut rng)
                    }
                } else if rng.random_bool(0.5) {
                    PROTEST_TOPIC
                } else {
                    profile_words.off_topic(&mut rng)
                }
            })
            .collect();
        let interactors: Vec<String> = (0..config.n_interactors_per_user)
            .map(|k| format!("{user_id}_friend{k}"))
            .collect();
        for (name, &topic) in interactors.iter().zip(&interactor_topics) {
            for _ in 0..config.posts_per_interactor {
                let day = rng.random_range(0.0..candidate_day);
                posts.push(PostRecord {
                    user_id: name.clone(),
                    ts: seconds(day),
                    text: profile_words.text(topic, config.words_per_post, &mut rng),
                    label: None,
                });
            }
        }

        let mut status_days: Vec<f64> = (0..config.statuses_per_user)
            .map(|_| rng.random_range(0.0..candidate_day))
            .collect();
        status_days.sort_by(f64::total_cmp);
        let last_status = *status_days.last().expect("at least one status");

        // received mentions; the user writes to each interactor once first
        let first_day = status_days[0] * 0.5;
        for name in &interactors {
            interactions.push(InteractionRecord {
                src: user_id.clone(),
                dst: name.clone(),
                ts: seconds(first_day),
                text: mention_words.text(mention_words.off_topic(&mut rng), 3, &mut rng),
            });
        }
        let n_mentions = mention_count.sample(&mut rng) as usize;
        let mut received: Vec<(f64, usize)> = (0..n_mentions)
            .map(|_| {
                let k = rng.random_range(0..interactors.len());
                let day = if rng.random_bool(config.late_mention_share) {
                    rng.random_range(last_status..candidate_day)
                } else {
                    rng.random_range(first_day..candidate_day)
                };
                (day, k)
            })
            .collect();
        received.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(day, k) in &received {
            interactions.push(InteractionRecord {
                src: interactors[k].clone(),
                dst: user_id.clone(),
                ts: seconds(day),
                text: mention_words.text(interactor_topics[k], config.words_per_post, &mut rng),
            });
        }

        let mut log_s: Vec<f64> = (0..topics).map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
        let mut prev_day = status_days[0];
        let mut next_mention = received.partition_point(|m| m.0 <= prev_day);
        for (n, &day) in status_days.iter().enumerate() {
            if n > 0 {
                let t = (day - prev_day).max(crate::dynamics::MIN_ELAPSED_DAYS);
                let mut boost = vec![0.0; topics];
                while next_mention < received.len() && received[next_mention].0 <= day {
                    boost[interactor_topics[received[next_mention].1]] += config.mention_boost;
                    next_mention += 1;
                }
                for i in 0..topics {
                    let w: f64 = rng.sample(StandardNormal);
                    log_s[i] += (mu[i] - 0.5 * sigma[i] * sigma[i]) * t + boost[i] + sigma[i] * t.sqrt() * w;
                }
                prev_day = day;
            }
            posts.push(PostRecord {
                user_id: user_id.clone(),
                ts: seconds(day),
                text: status_words.text(argmax(&log_s), config.words_per_post, &mut rng),
                label: None,
            });
        }
        let declared = if label == 1 {
            PROTEST_TOPIC
        } else {
            status_words.off_topic(&mut rng)
        };
        posts.push(PostRecord {
            user_id: user_id.clone(),
            ts: candidate_ts,
            text: status_words.text(declared, config.words_per_post, &mut rng),
            label: Some(label),
        });
        truth.push(TruthUser {
            user_id,
            label,
            mu_true: mu,
            sigma_true: sigma,
            protest_topic_index: PROTEST_TOPIC,
            interactor_topics,
        });
    }
    Ok(SynthCorpus {
        posts,
        interactions,
        truth: Truth {
            users: truth,
            config: config.clone(),
        },
    })
}
