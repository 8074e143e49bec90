//! Protest-word lexicon, tie-support and alternative-tie scores, and the
//! two-sample t-tests comparing them across labels.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::{Corpus, UserTimeline, VocabRole};
use crate::learner::user_stream;
use crate::{Error, Result};

/// Support-test significance level.
pub const SUPPORT_ALPHA: f64 = 0.01;
/// Alternative-test significance level.
pub const ALTERNATIVE_ALPHA: f64 = 0.05;

/// Tokens of positively labeled candidate posts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtestLexicon {
    pub words: BTreeSet<String>,
}

impl ProtestLexicon {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }
}

pub fn build_lexicon(corpus: &Corpus) -> Result<ProtestLexicon> {
    let vocab = corpus.vocab(VocabRole::Status);
    let c = corpus.candidate_matrix();
    let mut words = BTreeSet::new();
    let mut positives = 0;
    for tl in corpus.timelines().iter().filter(|tl| tl.label == Some(1)) {
        positives += 1;
        for (col, _) in c.row_entries(tl.candidate_row) {
            if let Some(tok) = vocab.token(col) {
                words.insert(tok.to_string());
            }
        }
    }
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    Ok(ProtestLexicon { words })
}

/// Column pairs `(interaction col, interactor col)` of tokens present in
/// both vocabularies, split by lexicon membership.
#[derive(Debug, Clone)]
pub struct ScoreColumns {
    support: Vec<Option<usize>>,
    alternative: Vec<Option<usize>>,
}

impl ScoreColumns {
    pub fn new(corpus: &Corpus, lexicon: &ProtestLexicon) -> Self {
        let inter = corpus.vocab(VocabRole::Interaction);
        let actor = corpus.vocab(VocabRole::Interactor);
        let mut support = vec![None; inter.len()];
        let mut alternative = vec![None; inter.len()];
        for (col, tok) in inter.tokens().iter().enumerate() {
            if let Some(other) = actor.get(tok) {
                if lexicon.contains(tok) {
                    support[col] = Some(other);
                } else {
                    alternative[col] = Some(other);
                }
            }
        }
        Self { support, alternative }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieScorePair {
    pub user_id: String,
    pub support_score: f64,
    pub alternative_score: f64,
}

/// Sums over the user's mentions of `P_i' . W_i'` restricted to lexicon
/// columns (support) and to the remaining shared columns (alternative).
pub fn tie_scores(timeline: &UserTimeline, corpus: &Corpus, columns: &ScoreColumns) -> TieScorePair {
    let p = corpus.interaction_matrix();
    let w = corpus.author_matrix();
    let mut support = 0u64;
    let mut alternative = 0u64;
    for mention in &timeline.mentions {
        for (col, count) in p.row_entries(mention.row) {
            if let Some(other) = columns.support[col] {
                support += u64::from(count) * u64::from(w.get(mention.row, other));
            } else if let Some(other) = columns.alternative[col] {
                alternative += u64::from(count) * u64::from(w.get(mention.row, other));
            }
        }
    }
    TieScorePair {
        user_id: timeline.user_id.clone(),
        support_score: support as f64,
        alternative_score: alternative as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMode {
    Paired,
    Welch,
}

impl std::str::FromStr for TestMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paired" => Ok(Self::Paired),
            "welch" => Ok(Self::Welch),
            other => Err(Error::InvalidConfig(format!("unknown test mode `{other}`"))),
        }
    }
}

/// Test statistic and two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// With zero spread the statistic is 0 (p = 1) for a zero mean difference
/// and infinite with the sign of the difference (p = 0) otherwise.
fn t_from(diff: f64, se: f64, df: f64) -> Result<TTest> {
    if se == 0.0 {
        return Ok(if diff == 0.0 {
            TTest { t: 0.0, p: 1.0, df }
        } else {
            TTest {
                t: diff.signum() * f64::INFINITY,
                p: 0.0,
                df,
            }
        });
    }
    let t = diff / se;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::NonFinite(format!("t distribution: {e}")))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, p, df })
}

pub fn two_sample_t_test(x: &[f64], y: &[f64], mode: TestMode) -> Result<TTest> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::TestSize(format!(
            "t-test needs at least 2 values per group, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-test input".into()));
    }
    match mode {
        TestMode::Paired => {
            if x.len() != y.len() {
                return Err(Error::TestSize(format!(
                    "paired t-test needs equal sizes, got {} and {}",
                    x.len(),
                    y.len()
                )));
            }
            let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            let n = d.len() as f64;
            t_from(mean(&d), (sample_variance(&d) / n).sqrt(), n - 1.0)
        }
        TestMode::Welch => {
            let (nx, ny) = (x.len() as f64, y.len() as f64);
            let (vx, vy) = (sample_variance(x) / nx, sample_variance(y) / ny);
            let se2 = vx + vy;
            let df = if se2 == 0.0 {
                nx + ny - 2.0
            } else {
                se2 * se2 / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0))
            };
            t_from(mean(x) - mean(y), se2.sqrt(), df)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    PositivesHigher,
    NegativesHigher,
    NoDifference,
}

impl Direction {
    fn of(t: f64) -> Self {
        if t > 0.0 {
            Self::PositivesHigher
        } else if t < 0.0 {
            Self::NegativesHigher
        } else {
            Self::NoDifference
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Positives minus negatives; `"inf"` or `"-inf"` when the spread is zero.
    #[serde(with = "signed_float")]
    pub t: f64,
    pub p: f64,
    pub df: f64,
    pub direction: Direction,
    pub alpha: f64,
    /// `p < alpha` in the expected direction.
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostulateReport {
    pub mode: TestMode,
    pub n_pos: usize,
    pub n_neg: usize,
    pub lexicon_size: usize,
    pub support: ComparisonReport,
    pub alternative: ComparisonReport,
    pub seed: u64,
}

fn compare(x: &[f64], y: &[f64], mode: TestMode, alpha: f64, expected: Direction) -> Result<ComparisonReport> {
    let test = two_sample_t_test(x, y, mode)?;
    let direction = Direction::of(test.t);
    Ok(ComparisonReport {
        t: test.t,
        p: test.p,
        df: test.df,
        direction,
        alpha,
        significant: direction == expected && test.p < alpha,
    })
}

/// Compares scores of positive users with an equally sized, seeded uniform
/// sample of negative users (or the reverse when negatives are fewer).
pub fn verify_postulates(corpus: &Corpus, seed: u64, mode: TestMode) -> Result<PostulateReport> {
    let lexicon = build_lexicon(corpus)?;
    let columns = ScoreColumns::new(corpus, &lexicon);
    let group = |label: u8| -> Vec<&UserTimeline> {
        let mut g: Vec<&UserTimeline> = corpus.timelines().iter().filter(|tl| tl.label == Some(label)).collect();
        g.sort_by(|a, b| a.user_id.cmp(&b.user_id));
        g
    };
    let (mut pos, mut neg) = (group(1), group(0));
    if neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let n = pos.len().min(neg.len());
    let mut rng = user_stream(seed, "postulate-sample");
    let mut subsample = |g: &mut Vec<&UserTimeline>| {
        if g.len() > n {
            let mut picked = sample(&mut rng, g.len(), n).into_vec();
            picked.sort_unstable();
            *g = picked.into_iter().map(|i| g[i]).collect();
        }
    };
    subsample(&mut neg);
    subsample(&mut pos);
    let scores = |g: &[&UserTimeline]| -> Vec<TieScorePair> { g.iter().map(|tl| tie_scores(tl, corpus, &columns)).collect() };
    let (sp, sn) = (scores(&pos), scores(&neg));
    let support = |s: &[TieScorePair]| s.iter().map(|p| p.support_score).collect::<Vec<_>>();
    let alternative = |s: &[TieScorePair]| s.iter().map(|p| p.alternative_score).collect::<Vec<_>>();
    Ok(PostulateReport {
        mode,
        n_pos: pos.len(),
        n_neg: neg.len(),
        lexicon_size: lexicon.len(),
        support: compare(&support(&sp), &support(&sn), mode, SUPPORT_ALPHA, Direction::PositivesHigher)?,
        alternative: compare(
            &alternative(&sp),
            &alternative(&sn),
            mode,
            ALTERNATIVE_ALPHA,
            Direction::NegativesHigher,
        )?,
        seed,
    })
}

mod signed_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        match *x {
            f64::INFINITY => "inf".serialize(s),
            f64::NEG_INFINITY => "-inf".serialize(s),
            v => v.serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad statistic `{t}`"))),
        }
    }
}

#[cfg(test)]
mod tests;
