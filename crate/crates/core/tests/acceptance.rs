//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! test fails if any check fails.

use std::time::Instant;

use driftcast::corpus::{Corpus, CorpusConfig, SparseVec};
use driftcast::dynamics::{gbm_step, DriftParams, LatentBasis, MentionWindow};
use driftcast::learner::{
    fit_message, gradients, objective, GradientSet, Hyperparams, ModelParams, NetworkData,
    ObjectiveOptions, Observation,
};
use driftcast::predictor::{roc_auc, run_experiment, EvalReport, FeatureMode, Method, Protocol};
use driftcast::sociolab::{two_sample_t_test, verify_postulates, Direction, TestMode};
use driftcast::synthgen::{generate, SynthConfig};
use driftcast::Execution;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

const SEEDS: [u64; 5] = [100, 101, 102, 103, 104];
const W_REG_GRID: [f64; 8] = [0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];

/// Training budget for the synthetic experiments: short, damped steps from a
/// wider shared start.
fn experiment_hyper() -> Hyperparams {
    Hyperparams {
        latent_dims: 10,
        eta: 1e-4,
        max_iters: 5,
        init_spread: 0.5,
        ..Hyperparams::default()
    }
}

fn corpus(config: &SynthConfig) -> Corpus {
    let synth = generate(config).unwrap();
    Corpus::from_records(&synth.posts, &synth.interactions, &CorpusConfig::default()).unwrap()
}

fn synth(seed: u64, signal: f64) -> SynthConfig {
    SynthConfig {
        seed,
        signal_strength: signal,
        ..SynthConfig::default()
    }
}

fn report(reports: &[EvalReport], method: Method) -> &EvalReport {
    reports.iter().find(|r| r.method == method).unwrap()
}

fn metrics(r: &EvalReport) -> [f64; 3] {
    [r.accuracy, r.auc.unwrap_or(f64::NAN), r.f1_positive]
}

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn run(id: usize, name: &'static str, check: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = check();
    let detail = format!("{detail} ({:.1}s)", start.elapsed().as_secs_f64());
    Outcome { id, name, pass, detail }
}

// 1

fn sparse(rng: &mut ChaCha8Rng, width: usize) -> SparseVec {
    let n = rng.random_range(1..4);
    SparseVec::from_pairs((0..n).map(|_| (rng.random_range(0..width), rng.random_range(1..3) as f64)))
}

fn blocks(p: &mut ModelParams) -> [&mut [f64]; 5] {
    [
        p.drift.mu.as_mut_slice(),
        p.drift.sigma.as_mut_slice(),
        p.basis.u.as_mut_slice(),
        p.basis.v.as_mut_slice(),
        p.basis.t.as_mut_slice(),
    ]
}

fn grad_blocks(g: &GradientSet) -> [&[f64]; 5] {
    [
        g.d_mu.as_slice(),
        g.d_sigma.as_slice(),
        g.d_u.as_slice(),
        g.d_v.as_slice(),
        g.d_t.as_slice(),
    ]
}

fn gradient_oracle() -> (bool, String) {
    const H: f64 = 1e-5;
    const DIMS: usize = 3;
    const WIDTH: usize = 8;
    let opts = ObjectiveOptions {
        w_reg: 0.5,
        ablate_interactions: false,
    };
    let mut worst = 0.0f64;
    let mut failures = 0;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |r, c, lo: f64, hi: f64| DMatrix::from_fn(r, c, |_, _| rng.random_range(lo..hi));
        let params = ModelParams {
            basis: LatentBasis {
                u: uniform(WIDTH, DIMS, -0.5, 0.5),
                v: uniform(WIDTH, DIMS, -0.5, 0.5),
                t: uniform(DIMS, DIMS, -0.5, 0.5),
            },
            drift: DriftParams {
                mu: uniform(DIMS, 1, -0.5, 0.5).column(0).into_owned(),
                sigma: uniform(DIMS, 1, 0.3, 1.0).column(0).into_owned(),
            },
        };
        let prev = DVector::from_fn(DIMS, |_, _| rng.random_range(-1.0..1.0));
        let window = MentionWindow {
            p_rows: (0..4).map(|_| sparse(&mut rng, WIDTH)).collect(),
            w_rows: (0..4).map(|_| sparse(&mut rng, WIDTH)).collect(),
        };
        let message = sparse(&mut rng, WIDTH);
        let network = NetworkData {
            profiles: (0..3).map(|_| sparse(&mut rng, WIDTH)).collect(),
            edges: vec![(0, 1), (2, 1)],
        };
        let obs = Observation {
            log_s_prev: &prev,
            window: &window,
            message: &message,
            elapsed: rng.random_range(0.2..3.0),
            network: &network,
        };
        let g = gradients(&params, &obs, opts).unwrap();
        for (b, analytic) in grad_blocks(&g).iter().enumerate() {
            for (idx, &a) in analytic.iter().enumerate() {
                let mut plus = params.clone();
                let mut minus = params.clone();
                blocks(&mut plus)[b][idx] += H;
                blocks(&mut minus)[b][idx] -= H;
                let numeric = (objective(&plus, &obs, opts).unwrap() - objective(&minus, &obs, opts).unwrap()) / (2.0 * H);
                let err = (a - numeric).abs();
                let rel = err / a.abs().max(numeric.abs());
                if err > 1e-8 {
                    worst = worst.max(rel);
                }
                if err > 1e-8 && rel > 1e-4 {
                    failures += 1;
                }
            }
        }
    }
    (failures == 0, format!("50 instances, worst relative error {worst:.1e}, {failures} mismatches"))
}

// 2

fn gbm_law() -> (bool, String) {
    let (prev, mu, sigma, n, t) = (0.3, 0.2, 0.4, 1.5, 2.0);
    let m = prev + (mu * n - sigma * sigma / 2.0) * t;
    let v = sigma * f64::sqrt(t);
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut xs: Vec<f64> = (0..draws)
        .map(|_| gbm_step(prev, mu, sigma, n, t, rng.sample(StandardNormal)).unwrap())
        .collect();
    let count = draws as f64;
    let mean = xs.iter().sum::<f64>() / count;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let mean_ok = (mean - m).abs() <= 4.0 * v / count.sqrt();
    let var_ok = (var / (v * v) - 1.0).abs() <= 0.05;
    xs.sort_by(f64::total_cmp);
    let normal = Normal::new(m, v).unwrap();
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / count).abs().max((i as f64 + 1.0) / count - f)
        })
        .fold(0.0, f64::max);
    // asymptotic Kolmogorov critical value at alpha = 0.01
    let critical = 1.6276 / count.sqrt();
    (
        mean_ok && var_ok && ks < critical,
        format!("mean {mean:.4} vs {m:.4}, var ratio {:.4}, KS {ks:.5} < {critical:.5}", var / (v * v)),
    )
}

// 3

fn closed_form() -> (bool, String) {
    let params = ModelParams {
        drift: DriftParams {
            mu: DVector::from_element(1, 0.01),
            sigma: DVector::from_element(1, 0.1),
        },
        basis: LatentBasis {
            u: DMatrix::zeros(1, 1),
            v: DMatrix::from_element(1, 1, 0.8),
            t: DMatrix::zeros(1, 1),
        },
    };
    let prev = DVector::from_element(1, 0.2);
    let message = SparseVec::from_pairs([(0, 1.0)]);
    let window = MentionWindow::empty();
    let network = NetworkData::empty();
    let t = 1.5;
    let obs = Observation {
        log_s_prev: &prev,
        window: &window,
        message: &message,
        elapsed: t,
        network: &network,
    };
    let hyper = Hyperparams {
        latent_dims: 1,
        w_reg: 0.0,
        ablation_int: true,
        ..Hyperparams::default()
    };
    let fit = fit_message(&params, &obs, &hyper).unwrap();
    let a = fit.params.basis.v[(0, 0)];
    let sigma = fit.params.drift.sigma[0];
    let expected = (a - prev[0] + sigma * sigma * t / 2.0) / t;
    let gap = (fit.params.drift.mu[0] - expected).abs();
    (gap < 1e-3, format!("mu {:.6} vs stationary {expected:.6}", fit.params.drift.mu[0]))
}

// 4

fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn metric_oracles() -> (bool, String) {
    let fixture = roc_auc(&[0.9, 0.8, 0.3, 0.1], &[1, 0, 1, 0]) == Some(0.75);
    let constant = roc_auc(&[0.4; 6], &[1, 0, 1, 0, 0, 1]) == Some(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=200);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..20u8)) / 4.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
        labels[0] = 0;
        labels[1] = 1;
        if roc_auc(&scores, &labels) != Some(brute_auc(&scores, &labels)) {
            mismatches += 1;
        }
    }
    (
        fixture && constant && mismatches == 0,
        format!("fixture {fixture}, constant {constant}, {mismatches}/200 brute-force mismatches"),
    )
}

// 5

fn ordering() -> (bool, String) {
    let hyper = experiment_hyper();
    let mut ordered = true;
    let mut gaps = Vec::new();
    for seed in SEEDS {
        let reports = run_experiment(&corpus(&synth(seed, 1.0)), &hyper, &Protocol::default(), Execution::Parallel).unwrap();
        let [full, int, random] = [Method::Full, Method::NoInteractions, Method::Random].map(|m| metrics(report(&reports, m)));
        ordered &= (0..3).all(|k| full[k] >= int[k] && int[k] >= random[k]);
        gaps.push(full[1] - int[1]);
    }
    let gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    (
        ordered && gap >= 0.05,
        format!("ordering on every seed {ordered}, mean AUC gap {gap:.3} (per seed {gaps:.3?})"),
    )
}

// 6

fn null_control() -> (bool, String) {
    let hyper = experiment_hyper();
    let protocol = Protocol {
        ablation: false,
        random: false,
        ..Protocol::default()
    };
    let aucs: Vec<f64> = SEEDS
        .iter()
        .map(|&seed| {
            let reports = run_experiment(&corpus(&synth(seed + 100, 0.0)), &hyper, &protocol, Execution::Parallel).unwrap();
            report(&reports, Method::Full).auc.unwrap()
        })
        .collect();
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    ((0.4..=0.6).contains(&mean), format!("mean AUC {mean:.3} (per seed {aucs:.3?})"))
}

// 7

fn postulates() -> (bool, String) {
    let r = verify_postulates(&corpus(&synth(SEEDS[0], 1.0)), 0, TestMode::Welch).unwrap();
    let pass = r.support.direction == Direction::PositivesHigher
        && r.support.p < 0.01
        && r.alternative.direction == Direction::NegativesHigher
        && r.alternative.p < 0.05;
    (
        pass,
        format!("support p {:.1e} {:?}, alternative p {:.1e} {:?}", r.support.p, r.support.direction, r.alternative.p, r.alternative.direction),
    )
}

// 8

fn sweep_protocol() -> Protocol {
    Protocol {
        train_fractions: (1..=9).map(|k| f64::from(k) / 10.0).collect(),
        w_reg_grid: W_REG_GRID.to_vec(),
        ablation: false,
        random: false,
        feature_mode: FeatureMode::Deterministic,
    }
}

fn robustness() -> (bool, String) {
    let reports = run_experiment(&corpus(&synth(SEEDS[0], 1.0)), &experiment_hyper(), &sweep_protocol(), Execution::Parallel).unwrap();
    let shaped = reports.len() == W_REG_GRID.len() * 9;
    let at_half: Vec<[f64; 3]> = reports
        .iter()
        .filter(|r| (r.train_fraction - 0.5).abs() < 1e-12)
        .map(metrics)
        .collect();
    let spread: Vec<f64> = (0..3)
        .map(|k| {
            let column = at_half.iter().map(|m| m[k]);
            column.clone().fold(f64::NEG_INFINITY, f64::max) - column.fold(f64::INFINITY, f64::min)
        })
        .collect();
    let fractions_ok = reports.iter().all(|r| r.n_train > 0 && r.n_test > 0);
    (
        shaped && fractions_ok && at_half.len() == W_REG_GRID.len() && spread.iter().all(|&s| s < 0.15),
        format!(
            "{} reports, accuracy/AUC/F1 spread over w_reg {:.3}/{:.3}/{:.3}",
            reports.len(),
            spread[0],
            spread[1],
            spread[2]
        ),
    )
}

// 9

fn all_reports(exec: Execution) -> String {
    let hyper = experiment_hyper();
    let mut out = String::new();
    for seed in SEEDS {
        let reports = run_experiment(&corpus(&synth(seed, 1.0)), &hyper, &Protocol::default(), exec).unwrap();
        out += &serde_json::to_string(&reports).unwrap();
        let null = run_experiment(&corpus(&synth(seed + 100, 0.0)), &hyper, &Protocol::default(), exec).unwrap();
        out += &serde_json::to_string(&null).unwrap();
    }
    let planted = corpus(&synth(SEEDS[0], 1.0));
    out += &serde_json::to_string(&verify_postulates(&planted, 0, TestMode::Welch).unwrap()).unwrap();
    out += &serde_json::to_string(&run_experiment(&planted, &hyper, &sweep_protocol(), exec).unwrap()).unwrap();
    out
}

fn determinism() -> (bool, String) {
    let sequential = all_reports(Execution::Sequential);
    let pooled = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| all_reports(Execution::Parallel))
    };
    let one = pooled(1);
    let four = pooled(4);
    (
        sequential == one && one == four,
        format!("{} bytes of report JSON, sequential vs 1 vs 4 threads", sequential.len()),
    )
}

// 10

fn t_test_oracle() -> (bool, String) {
    let x = [2.1, 2.5, 1.9, 2.4];
    let y = [1.0, 1.2, 0.8, 1.1];
    let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let expected = mean / (sd / n.sqrt());
    let paired = two_sample_t_test(&x, &y, TestMode::Paired).unwrap();
    let same = two_sample_t_test(&x, &x, TestMode::Paired).unwrap();
    (
        (paired.t - expected).abs() <= 1e-9 && same.t == 0.0 && same.p == 1.0,
        format!("t {:.12} vs {expected:.12}; x = y gives t {} p {}", paired.t, same.t, same.p),
    )
}

fn main() {
    let outcomes = [
        run(1, "gradient oracle", gradient_oracle),
        run(2, "GBM law", gbm_law),
        run(3, "closed-form recovery", closed_form),
        run(4, "metric oracles", metric_oracles),
        run(5, "ordering full >= -Int >= random", ordering),
        run(6, "null control", null_control),
        run(7, "postulate directions", postulates),
        run(8, "robustness sweep", robustness),
        run(9, "determinism across jobs", determinism),
        run(10, "t-test oracle", t_test_oracle),
    ];
    for o in &outcomes {
        println!("{} criterion {:>2} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
    }
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
