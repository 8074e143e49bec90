use driftcast::corpus::SparseVec;
use driftcast::dynamics::{DriftParams, LatentBasis, MentionWindow};
use driftcast::learner::{
    gradients, homogeneity_penalty, objective, GradientSet, ModelParams, NetworkData,
    ObjectiveOptions, Observation,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const DIMS: usize = 3;
const WIDTH: usize = 8;

struct Instance {
    params: ModelParams,
    prev: DVector<f64>,
    window: MentionWindow,
    message: SparseVec,
    network: NetworkData,
    elapsed: f64,
}

impl Instance {
    fn obs(&self) -> Observation<'_> {
        Observation {
            log_s_prev: &self.prev,
            window: &self.window,
            message: &self.message,
            elapsed: self.elapsed,
            network: &self.network,
        }
    }
}

fn counts(rng: &mut ChaCha8Rng) -> SparseVec {
    let n = rng.random_range(1..4);
    SparseVec::from_pairs((0..n).map(|_| (rng.random_range(0..WIDTH), rng.random_range(1..3) as f64)))
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |r: usize, c: usize, lo: f64, hi: f64| {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(lo..hi))
    };
    let u = uniform(WIDTH, DIMS, -0.5, 0.5);
    let v = uniform(WIDTH, DIMS, -0.5, 0.5);
    let t = uniform(DIMS, DIMS, -0.5, 0.5);
    let mu = uniform(DIMS, 1, -0.5, 0.5).column(0).into_owned();
    let sigma = uniform(DIMS, 1, 0.3, 1.0).column(0).into_owned();
    let prev = uniform(DIMS, 1, -1.0, 1.0).column(0).into_owned();
    let window = MentionWindow {
        p_rows: (0..4).map(|_| counts(&mut rng)).collect(),
        w_rows: (0..4).map(|_| counts(&mut rng)).collect(),
    };
    let message = counts(&mut rng);
    let network = NetworkData {
        profiles: (0..4).map(|_| counts(&mut rng)).collect(),
        edges: vec![(0, 1), (1, 0), (0, 2), (3, 2)],
    };
    Instance {
        params: ModelParams {
            drift: DriftParams { mu, sigma },
            basis: LatentBasis { u, v, t },
        },
        prev,
        window,
        message,
        network,
        elapsed: rng.random_range(0.2..3.0),
    }
}

fn blocks(p: &mut ModelParams) -> [(&'static str, &mut [f64]); 5] {
    [
        ("mu", p.drift.mu.as_mut_slice()),
        ("sigma", p.drift.sigma.as_mut_slice()),
        ("U", p.basis.u.as_mut_slice()),
        ("V", p.basis.v.as_mut_slice()),
        ("T", p.basis.t.as_mut_slice()),
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

fn assert_close(name: &str, index: usize, analytic: f64, numeric: f64) {
    let err = (analytic - numeric).abs();
    let rel = err / analytic.abs().max(numeric.abs());
    assert!(
        err <= 1e-8 || rel <= 1e-4,
        "{name}[{index}]: analytic {analytic} vs numeric {numeric}"
    );
}

#[allow(clippy::needless_range_loop)]
fn check_instance(inst: &Instance, opts: ObjectiveOptions) {
    let analytic = gradients(&inst.params, &inst.obs(), opts).unwrap();
    let analytic = grad_blocks(&analytic);
    for b in 0..5 {
        let len = analytic[b].len();
        for idx in 0..len {
            let mut plus = inst.params.clone();
            let mut minus = inst.params.clone();
            let name = blocks(&mut plus)[b].0;
            blocks(&mut plus)[b].1[idx] += H;
            blocks(&mut minus)[b].1[idx] -= H;
            let fp = objective(&plus, &inst.obs(), opts).unwrap();
            let fm = objective(&minus, &inst.obs(), opts).unwrap();
            assert_close(name, idx, analytic[b][idx], (fp - fm) / (2.0 * H));
        }
    }
}

#[test]
fn every_block_matches_central_differences() {
    let opts = ObjectiveOptions {
        w_reg: 0.7,
        ablate_interactions: false,
    };
    for seed in 0..50 {
        check_instance(&instance(seed), opts);
    }
}

#[test]
fn ablated_gradients_match_central_differences() {
    let opts = ObjectiveOptions {
        w_reg: 0.0,
        ablate_interactions: true,
    };
    for seed in 100..110 {
        let inst = instance(seed);
        check_instance(&inst, opts);
        let g = gradients(&inst.params, &inst.obs(), opts).unwrap();
        assert!(g.d_u.iter().chain(g.d_t.iter()).all(|&x| x == 0.0));
    }
}

fn profiles_latent(profiles: &[SparseVec], v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(profiles.len(), v.ncols());
    for (i, p) in profiles.iter().enumerate() {
        x.set_row(i, &p.mul_mat(v).unwrap().transpose());
    }
    x
}

#[test]
fn regularizer_gradient_matches_differences_on_single_edge() {
    let mut inst = instance(7);
    inst.network.edges = vec![(0, 1)];
    let w_reg = 1.3;
    let with = ObjectiveOptions {
        w_reg,
        ablate_interactions: false,
    };
    let without = ObjectiveOptions { w_reg: 0.0, ..with };
    let g_with = gradients(&inst.params, &inst.obs(), with).unwrap();
    let g_without = gradients(&inst.params, &inst.obs(), without).unwrap();
    let reg_only = (&g_with.d_v - &g_without.d_v) / w_reg;
    for idx in 0..reg_only.len() {
        let mut vp = inst.params.basis.v.clone();
        let mut vm = inst.params.basis.v.clone();
        vp.as_mut_slice()[idx] += H;
        vm.as_mut_slice()[idx] -= H;
        let fp = homogeneity_penalty(&profiles_latent(&inst.network.profiles, &vp), &inst.network.edges);
        let fm = homogeneity_penalty(&profiles_latent(&inst.network.profiles, &vm), &inst.network.edges);
        assert_close("V", idx, reg_only.as_slice()[idx], (fp - fm) / (2.0 * H));
    }
}

#[test]
fn regularizer_step_pulls_connected_pair_together() {
    for seed in 0..20 {
        let mut inst = instance(200 + seed);
        inst.network.edges = vec![(0, 1)];
        let opts = ObjectiveOptions {
            w_reg: 1.0,
            ablate_interactions: false,
        };
        let without = ObjectiveOptions { w_reg: 0.0, ..opts };
        let g = gradients(&inst.params, &inst.obs(), opts).unwrap();
        let g0 = gradients(&inst.params, &inst.obs(), without).unwrap();
        let reg = &g.d_v - &g0.d_v;
        if reg.norm() == 0.0 {
            continue;
        }
        let before = profiles_latent(&inst.network.profiles, &inst.params.basis.v);
        let after = profiles_latent(&inst.network.profiles, &(&inst.params.basis.v - reg * 1e-3));
        let sim = |x: &DMatrix<f64>| x.row(0).dot(&x.row(1));
        assert!(sim(&after) > sim(&before), "seed {seed}");
    }
}

#[test]
fn zero_residual_zeroes_drift_blocks() {
    let inst = instance(3);
    let opts = ObjectiveOptions {
        w_reg: 0.0,
        ablate_interactions: false,
    };
    // choose prev so that a = m exactly
    let a = inst.message.mul_mat(&inst.params.basis.v).unwrap();
    let g = gradients(&inst.params, &inst.obs(), opts).unwrap();
    let (drift_only, _) = driftcast::dynamics::gaussian_summary(
        &DVector::zeros(DIMS),
        &inst.params.drift,
        &inst.params.basis,
        &inst.window,
        inst.elapsed,
        false,
    )
    .unwrap();
    let fitted = Instance {
        prev: &a - &drift_only,
        ..inst
    };
    let g_fit = gradients(&fitted.params, &fitted.obs(), opts).unwrap();
    assert!(g.norm_squared() > 0.0);
    for x in g_fit.d_mu.iter().chain(g_fit.d_u.iter()).chain(g_fit.d_t.iter()) {
        assert!(x.abs() < 1e-12);
    }
}
