use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::corpus::{CorpusConfig, InteractionRecord, PostRecord};

fn post(user: &str, ts: i64, text: &str, label: Option<u8>) -> PostRecord {
    PostRecord {
        user_id: user.into(),
        ts,
        text: text.into(),
        label,
    }
}

fn mention(src: &str, dst: &str, ts: i64, text: &str) -> InteractionRecord {
    InteractionRecord {
        src: src.into(),
        dst: dst.into(),
        ts,
        text: text.into(),
    }
}

fn corpus(posts: &[PostRecord], inter: &[InteractionRecord]) -> Corpus {
    Corpus::from_records(posts, inter, &CorpusConfig::default()).unwrap()
}

fn words(lex: &ProtestLexicon) -> Vec<&str> {
    lex.words.iter().map(String::as_str).collect()
}

#[test]
fn lexicon_from_single_positive() {
    let c = corpus(
        &[
            post("u", 1, "hello there", None),
            post("u", 2, "we resist rigging", Some(1)),
            post("v", 1, "calm day", None),
            post("v", 2, "nothing here", Some(0)),
        ],
        &[],
    );
    assert_eq!(words(&build_lexicon(&c).unwrap()), ["resist", "rigging", "we"]);
}

#[test]
fn lexicon_unions_and_dedups() {
    let c = corpus(
        &[
            post("a", 1, "x1", None),
            post("a", 2, "march now now", Some(1)),
            post("b", 1, "x2", None),
            post("b", 2, "march today", Some(1)),
            post("c", 1, "x3", None),
            post("c", 2, "today we march", Some(1)),
            post("d", 1, "x4", None),
            post("d", 2, "stay home", Some(0)),
        ],
        &[],
    );
    // {march, now} + {march, today} + {today, we, march}
    let lex = build_lexicon(&c).unwrap();
    assert_eq!(lex.len(), 4);
    assert_eq!(words(&lex), ["march", "now", "today", "we"]);
}

#[test]
fn lexicon_needs_positives() {
    let c = corpus(&[post("a", 1, "x", None), post("a", 2, "calm", Some(0))], &[]);
    assert!(matches!(build_lexicon(&c), Err(Error::NoPositives)));
}

/// `u` (positive) is mentioned by `a` with "resist", and `a`'s profile
/// holds "resist" twice.
fn single_mention() -> Corpus {
    corpus(
        &[
            post("u", 10, "first", None),
            post("u", 50, "resist", Some(1)),
            post("a", 1, "resist resist", None),
            post("v", 10, "first", None),
            post("v", 50, "quiet", Some(0)),
        ],
        &[mention("u", "a", 5, "hi"), mention("a", "u", 20, "resist")],
    )
}

#[test]
fn single_product_support() {
    let c = single_mention();
    let lex = build_lexicon(&c).unwrap();
    let cols = ScoreColumns::new(&c, &lex);
    let s = tie_scores(c.timeline("u").unwrap(), &c, &cols);
    assert_eq!((s.support_score, s.alternative_score), (2.0, 0.0));
    let none = tie_scores(c.timeline("v").unwrap(), &c, &cols);
    assert_eq!((none.support_score, none.alternative_score), (0.0, 0.0));
}

#[test]
fn scores_match_nested_loops() {
    let vocab = ["rig", "vote", "march", "calm", "food", "rain", "sun"];
    let mut rng = user_stream(5, "fixture");
    let mut text = |n: usize| -> String {
        (0..n).map(|_| vocab[rand::Rng::random_range(&mut rng, 0..vocab.len())]).collect::<Vec<_>>().join(" ")
    };
    let mut posts = vec![post("u", 1, "start", None), post("u", 100, "rig vote march", Some(1))];
    let mut inter = Vec::new();
    for k in 0..5 {
        let author = format!("a{k}");
        posts.push(post(&author, 1, &text(6), None));
        posts.push(post(&author, 2, &text(4), None));
        inter.push(mention("u", &author, 2, "hey"));
        inter.push(mention(&author, "u", 10 + k, &text(5)));
    }
    let c = corpus(&posts, &inter);
    let lex = build_lexicon(&c).unwrap();
    let tl = c.timeline("u").unwrap();
    assert_eq!(tl.mentions.len(), 5);
    let got = tie_scores(tl, &c, &ScoreColumns::new(&c, &lex));

    let inter_v = c.vocab(VocabRole::Interaction);
    let actor_v = c.vocab(VocabRole::Interactor);
    let (mut support, mut alternative) = (0.0, 0.0);
    for m in &tl.mentions {
        for tok in vocab {
            let (Some(pc), Some(wc)) = (inter_v.get(tok), actor_v.get(tok)) else {
                continue;
            };
            let product = f64::from(c.interaction_matrix().get(m.row, pc) * c.author_matrix().get(m.row, wc));
            if lex.contains(tok) {
                support += product;
            } else {
                alternative += product;
            }
        }
    }
    assert_eq!(got.support_score, support);
    assert_eq!(got.alternative_score, alternative);
    assert!(support > 0.0 && alternative > 0.0);
}

/// CDF of Student's t with 3 degrees of freedom.
fn t3_cdf(t: f64) -> f64 {
    let r = 3f64.sqrt();
    0.5 + (t / (r * (1.0 + t * t / 3.0)) + (t / r).atan()) / PI
}

#[test]
fn paired_fixture_closed_form() {
    let x = [2.1, 2.5, 1.9, 2.4];
    let y = [1.0, 1.2, 0.8, 1.1];
    let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / 4.0;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    let expected_t = mean / (sd / 2.0);
    let got = two_sample_t_test(&x, &y, TestMode::Paired).unwrap();
    assert!((got.t - expected_t).abs() < 1e-9, "{} vs {expected_t}", got.t);
    assert_eq!(got.df, 3.0);
    let expected_p = 2.0 * (1.0 - t3_cdf(expected_t.abs()));
    assert!((got.p - expected_p).abs() < 1e-9, "{} vs {expected_p}", got.p);
}

#[test]
fn moderate_paired_p_matches_closed_form_cdf() {
    let x = [0.3, 1.9, 1.1, 2.0];
    let y = [0.5, 0.2, 0.9, 0.6];
    let got = two_sample_t_test(&x, &y, TestMode::Paired).unwrap();
    assert!(got.t > 0.5 && got.t < 5.0);
    let expected_p = 2.0 * (1.0 - t3_cdf(got.t.abs()));
    assert!((got.p - expected_p).abs() < 1e-9);
}

#[test]
fn welch_statistic_and_degrees_of_freedom() {
    let x = [3.0, 4.0, 5.0, 6.0, 7.0];
    let y = [1.0, 1.5, 2.0];
    let (mx, my): (f64, f64) = (5.0, 1.5);
    let (vx, vy): (f64, f64) = (2.5 / 5.0, 0.25 / 3.0);
    let t = (mx - my) / (vx + vy).sqrt();
    let df = (vx + vy).powi(2) / (vx * vx / 4.0 + vy * vy / 2.0);
    let got = two_sample_t_test(&x, &y, TestMode::Welch).unwrap();
    assert!((got.t - t).abs() < 1e-12);
    assert!((got.df - df).abs() < 1e-12);
    assert!(got.p > 0.0 && got.p < 0.01);
}

#[test]
fn degenerate_conventions() {
    let same = two_sample_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], TestMode::Paired).unwrap();
    assert_eq!((same.t, same.p), (0.0, 1.0));
    let shifted = two_sample_t_test(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0], TestMode::Paired).unwrap();
    assert_eq!((shifted.t, shifted.p), (f64::INFINITY, 0.0));
    let welch = two_sample_t_test(&[1.0, 1.0], &[2.0, 2.0, 2.0], TestMode::Welch).unwrap();
    assert_eq!((welch.t, welch.p), (f64::NEG_INFINITY, 0.0));
}

#[test]
fn size_errors() {
    assert!(two_sample_t_test(&[1.0], &[1.0, 2.0], TestMode::Welch).is_err());
    assert!(two_sample_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0], TestMode::Paired).is_err());
}

#[test]
fn infinite_statistic_round_trips_json() {
    let r = ComparisonReport {
        t: f64::NEG_INFINITY,
        p: 0.0,
        df: 2.0,
        direction: Direction::NegativesHigher,
        alpha: 0.05,
        significant: true,
    };
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"-inf\""));
    assert_eq!(serde_json::from_str::<ComparisonReport>(&json).unwrap(), r);
}

#[test]
fn postulate_report_on_tiny_corpus() {
    let mut posts = Vec::new();
    let mut inter = Vec::new();
    for i in 0..6 {
        let (u, a) = (format!("p{i}"), format!("pa{i}"));
        posts.push(post(&u, 1, "hello", None));
        posts.push(post(&u, 100, "resist march", Some(1)));
        posts.push(post(&a, 1, &"resist march ".repeat(1 + i % 3), None));
        inter.push(mention(&u, &a, 2, "hi"));
        inter.push(mention(&a, &u, 50, "resist march"));
        let (n, b) = (format!("n{i}"), format!("na{i}"));
        posts.push(post(&n, 1, "hello", None));
        posts.push(post(&n, 100, "lunch", Some(0)));
        posts.push(post(&b, 1, &"food rain ".repeat(1 + i % 2), None));
        inter.push(mention(&n, &b, 2, "hi"));
        inter.push(mention(&b, &n, 50, "food rain"));
    }
    let c = corpus(&posts, &inter);
    let report = verify_postulates(&c, 1, TestMode::Welch).unwrap();
    assert_eq!((report.n_pos, report.n_neg), (6, 6));
    assert_eq!(report.support.direction, Direction::PositivesHigher);
    assert!(report.support.significant);
    assert_eq!(report.alternative.direction, Direction::NegativesHigher);
    assert!(report.alternative.significant);
    assert_eq!(report, verify_postulates(&c, 1, TestMode::Welch).unwrap());
    let paired = verify_postulates(&c, 1, TestMode::Paired).unwrap();
    assert_eq!(paired.mode, TestMode::Paired);
    let json = serde_json::to_value(&report).unwrap();
    for key in ["mode", "n_pos", "n_neg", "support", "alternative", "seed"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert_eq!(json["support"]["direction"], "positives_higher");
}

proptest! {
    #[test]
    fn swapping_groups_negates_t(
        x in prop::collection::vec(-10.0..10.0f64, 2..20),
        y in prop::collection::vec(-10.0..10.0f64, 2..20),
    ) {
        let a = two_sample_t_test(&x, &y, TestMode::Welch).unwrap();
        let b = two_sample_t_test(&y, &x, TestMode::Welch).unwrap();
        prop_assert!((a.t + b.t).abs() <= 1e-9 * a.t.abs().max(1.0));
        prop_assert!((a.p - b.p).abs() < 1e-12);
    }

    #[test]
    fn paired_is_scale_invariant(
        pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..20),
        c in 0.01..100.0f64,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let a = two_sample_t_test(&x, &y, TestMode::Paired).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| v * c).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let b = two_sample_t_test(&xs, &ys, TestMode::Paired).unwrap();
        prop_assert!((a.t - b.t).abs() <= 1e-8 * a.t.abs().max(1.0));
        prop_assert!((a.p - b.p).abs() < 1e-8);
    }
}
