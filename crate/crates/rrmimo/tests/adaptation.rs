use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rrmimo::adaptation::{
    adapt_step, alternate, batch_design_s, batch_design_w, evaluate_ses, full_rank_rls_step, rls_update_w,
    select_rank, BatchLsWorkspace, FullRankRls, GainTracker, RankPolicy, TargetScaling,
};
use rrmimo::channel::MimoDims;
use rrmimo::equalizer::EqualizerState;
use rrmimo::linalg::{e1, identity_embedding, NoMeter};
use rrmimo::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn cg(rng: &mut ChaCha8Rng, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    C64::new(a * s, b * s)
}

fn cvec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| cg(rng, 1.0)).collect()
}

fn flat(m: usize) -> MimoDims {
    MimoDims::new(1, m, 1, 1, 0).unwrap()
}

/// Stationary linear model `x = w_trueᴴ·r + noise` with QPSK-like targets.
struct Stationary {
    inputs: Vec<Vec<C64>>,
    refs: Vec<C64>,
}

impl Stationary {
    fn new(m: usize, n: usize, noise: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mix = DMatrix::from_fn(m, m, |_, _| cg(&mut rng, 1.0 / m as f64));
        let w = DVector::from_vec(cvec(&mut rng, m));
        let mut inputs = Vec::with_capacity(n);
        let mut refs = Vec::with_capacity(n);
        for _ in 0..n {
            let r = &mix * DVector::from_vec(cvec(&mut rng, m));
            refs.push(w.dotc(&r) + cg(&mut rng, noise));
            inputs.push(r.as_slice().to_vec());
        }
        Self { inputs, refs }
    }

    fn ses(&self, w: &DVector<C64>) -> f64 {
        self.inputs
            .iter()
            .zip(&self.refs)
            .map(|(r, x)| (x - w.dotc(&DVector::from_column_slice(r))).norm_sqr())
            .sum()
    }
}

#[test]
fn inverse_tracks_accumulated_covariance() {
    let m = 8;
    let delta = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut g = GainTracker::new(m, 1.0, delta).unwrap();
    let mut acc = DMatrix::<C64>::from_diagonal_element(m, m, C64::new(delta, 0.0));
    for _ in 0..1000 {
        let r = cvec(&mut rng, m);
        g.update(&r, &mut NoMeter);
        let v = DVector::from_vec(r);
        acc += &v * v.adjoint();
    }
    let err = (&g.p * &acc - DMatrix::<C64>::identity(m, m)).norm();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn reduced_update_rank_one_example() {
    let dims = flat(3);
    let mut eq = EqualizerState::new(0, dims, RankPolicy::Fixed(3), 1.0, 1.0, TargetScaling::default()).unwrap();
    eq.w_bar.fill(ZERO);
    rls_update_w(&mut eq, &[ONE, ZERO, ZERO], ONE, &mut NoMeter).unwrap();
    assert!((eq.rls.k_bar[0] - C64::new(0.5, 0.0)).norm() < 1e-15);
    let want = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(0.5, 0.0), ONE, ONE]));
    assert!((&eq.rls.phi_bar - want).norm() < 1e-15);
    // Zero prior weights: w̄ = k̄·x*.
    assert!((eq.w_bar[0] - C64::new(0.5, 0.0)).norm() < 1e-15);
}

#[test]
fn pinned_identity_transform_matches_full_rank() {
    let m = 6;
    let dims = flat(m);
    let mut eq = EqualizerState::new(0, dims, RankPolicy::Fixed(m), 0.99, 0.1, TargetScaling::default()).unwrap();
    eq.w_bar.fill(ZERO);
    assert_eq!(eq.s, identity_embedding(m, m));
    let mut full = FullRankRls::new(m, 0.99, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..300 {
        let r = cvec(&mut rng, m);
        let x = cg(&mut rng, 1.0);
        rls_update_w(&mut eq, &r, x, &mut NoMeter).unwrap();
        full.step(&r, x, &mut NoMeter).unwrap();
        assert!((&eq.w_bar - &full.w).norm() <= 1e-10 * full.w.norm().max(1.0));
    }
}

#[test]
fn full_rank_converges_to_regularized_ls() {
    let m = 8;
    let delta = 0.01;
    let data = Stationary::new(m, 400, 0.1, 3);
    let mut st = FullRankRls::new(m, 1.0, delta).unwrap();
    let mut r_acc = DMatrix::<C64>::from_diagonal_element(m, m, C64::new(delta, 0.0));
    let mut p_acc = DVector::<C64>::zeros(m);
    for (r, &x) in data.inputs.iter().zip(&data.refs) {
        full_rank_rls_step(&mut st, r, x).unwrap();
        let v = DVector::from_column_slice(r);
        r_acc += &v * v.adjoint();
        p_acc += &v * x.conj();
    }
    let w_ls = r_acc.lu().solve(&p_acc).unwrap();
    assert!((&st.w - &w_ls).norm() < 1e-6 * w_ls.norm());
}

#[test]
fn zero_input_keeps_full_rank_weights_zero() {
    let mut st = FullRankRls::new(4, 0.99, 0.01).unwrap();
    for _ in 0..10 {
        full_rank_rls_step(&mut st, &[ZERO; 4], ONE).unwrap();
    }
    assert!(st.w.iter().all(|z| *z == ZERO));
}

#[test]
fn non_finite_input_is_reported() {
    let dims = flat(3);
    let mut eq = EqualizerState::new(0, dims, RankPolicy::Fixed(2), 0.99, 0.01, TargetScaling::default()).unwrap();
    let bad = [C64::new(f64::NAN, 0.0), ONE, ONE];
    let err = adapt_step(&mut eq, &bad, ONE).unwrap_err();
    assert!(matches!(err, rrmimo::Error::NonFinite { .. } | rrmimo::Error::Degenerate(_)), "{err}");
}

#[test]
fn runs_are_bitwise_repeatable() {
    let data = Stationary::new(10, 200, 0.1, 4);
    let run = || {
        let mut eq = EqualizerState::new(
            0,
            flat(10),
            RankPolicy::Auto { d_min: 2, d_max: 5 },
            0.998,
            0.01,
            TargetScaling::default(),
        )
        .unwrap();
        let mut trace = Vec::new();
        for (r, &x) in data.inputs.iter().zip(&data.refs) {
            let diag = adapt_step(&mut eq, r, x).unwrap();
            trace.push((diag.a_priori_error, diag.rank));
        }
        (trace, eq.s.clone(), eq.w_bar.clone())
    };
    assert_eq!(run(), run());
}

#[test]
fn design_w_with_leading_embedding() {
    let data = Stationary::new(5, 60, 0.2, 5);
    let mut ws = BatchLsWorkspace::from_block(&data.inputs, &data.refs, 1.0, 0.01).unwrap();
    ws.ridge = 0.0;
    let s = identity_embedding(5, 2);
    let w = batch_design_w(&ws, &s).unwrap();
    let block = ws.r.view((0, 0), (2, 2)).into_owned();
    let want = block.lu().solve(&ws.p.rows(0, 2).into_owned()).unwrap();
    assert!((w - want).norm() < 1e-10);
}

#[test]
fn design_w_scalar_case() {
    let data = Stationary::new(4, 30, 0.2, 6);
    let ws = BatchLsWorkspace::from_block(&data.inputs, &data.refs, 0.95, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = DMatrix::from_vec(4, 1, cvec(&mut rng, 4));
    let w = batch_design_w(&ws, &s).unwrap();
    let sv = s.column(0).into_owned();
    let want = sv.dotc(&ws.p) / sv.dotc(&(ws.regularized() * &sv));
    assert!((w[0] - want).norm() < 1e-12 * want.norm());
}

#[test]
fn full_width_alternation_reaches_ls() {
    let m = 5;
    let data = Stationary::new(m, 80, 0.1, 8);
    let mut ws = BatchLsWorkspace::from_block(&data.inputs, &data.refs, 1.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s0 = DMatrix::from_vec(m, m, cvec(&mut rng, m * m));
    let w0 = DVector::from_vec(cvec(&mut rng, m));
    let out = alternate(&mut ws, &s0, &w0, 1).unwrap();
    let w_ls = ws.regularized().lu().solve(&ws.p).unwrap();
    assert!((&out.s * &out.w - &w_ls).norm() < 1e-8 * w_ls.norm());
    let ls_min = evaluate_ses(&ws, &DMatrix::identity(m, m), &w_ls);
    assert!((out.ses_trace[1] - ls_min).abs() < 1e-8 * ls_min.abs().max(1.0));
}

#[test]
fn ses_matches_direct_sum() {
    let data = Stationary::new(6, 50, 0.3, 10);
    let lambda = 0.97;
    let mut ws = BatchLsWorkspace::from_block(&data.inputs, &data.refs, lambda, 0.01).unwrap();
    ws.ridge = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = DMatrix::from_vec(6, 3, cvec(&mut rng, 18));
    let w = DVector::from_vec(cvec(&mut rng, 3));
    let f = &s * &w;
    let n = data.inputs.len();
    let direct: f64 = data
        .inputs
        .iter()
        .zip(&data.refs)
        .enumerate()
        .map(|(l, (r, x))| lambda.powi((n - 1 - l) as i32) * (x - f.dotc(&DVector::from_column_slice(r))).norm_sqr())
        .sum();
    assert!((evaluate_ses(&ws, &s, &w) - direct).abs() < 1e-8 * direct);
}

#[test]
fn exact_noiseless_filter_has_zero_ses() {
    let data = Stationary::new(4, 40, 0.0, 12);
    let mut ws = BatchLsWorkspace::from_block(&data.inputs, &data.refs, 1.0, 0.01).unwrap();
    ws.ridge = 0.0;
    let w = ws.r.clone().lu().solve(&ws.p).unwrap();
    let ses = evaluate_ses(&ws, &DMatrix::identity(4, 4), &w);
    assert!(ses.abs() < 1e-8 * ws.sigma2_x, "{ses}");
}

#[test]
fn one_sample_transform_limit() {
    // r = e₁, x = 1, w̄_prev = e₁ and a vanishing seed: S → e₁·e₁ᴴ.
    let m = 3;
    let mut ws = BatchLsWorkspace::from_block(&[e1(m).as_slice().to_vec()], &[ONE], 1.0, 1e-9).unwrap();
    ws.set_weight_statistics(&DMatrix::zeros(m, 2), &e1(2));
    let s = batch_design_s(&ws).unwrap();
    assert!((s[(0, 0)] - ONE).norm() < 1e-8);
    assert!(s.iter().enumerate().filter(|(i, _)| *i != 0).all(|(_, z)| z.norm() < 1e-12));
}

#[test]
fn recursion_approaches_batch_alternation() {
    let m = 12;
    let d = 3;
    let data = Stationary::new(m, 2000, 0.1, 13);
    let mut eq = EqualizerState::new(0, flat(m), RankPolicy::Fixed(d), 1.0, 0.01, TargetScaling::default()).unwrap();
    for (r, &x) in data.inputs.iter().zip(&data.refs) {
        adapt_step(&mut eq, r, x).unwrap();
    }
    let rate = data.ses(&eq.composite()) / 2000.0;
    let mut ws = BatchLsWorkspace::from_block(&data.inputs, &data.refs, 1.0, 0.01).unwrap();
    let out = alternate(&mut ws, &identity_embedding(m, d), &e1(d), 30).unwrap();
    let batch = out.ses_trace.last().unwrap() / 2000.0;
    assert!((rate - batch).abs() <= 0.05 * batch, "{rate} vs {batch}");
}

#[test]
fn insensitive_to_initial_transform() {
    let m = 10;
    let d = 3;
    let data = Stationary::new(m, 1500, 0.1, 14);
    let finals: Vec<f64> = (0..10)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let s0 = DMatrix::from_vec(m, d, cvec(&mut rng, m * d));
            let mut eq = EqualizerState::with_transform(
                0,
                flat(m),
                RankPolicy::Fixed(d),
                1.0,
                0.01,
                TargetScaling::default(),
                s0,
            )
            .unwrap();
            for (r, &x) in data.inputs.iter().zip(&data.refs) {
                adapt_step(&mut eq, r, x).unwrap();
            }
            data.ses(&eq.composite())
        })
        .collect();
    let lo = finals.iter().cloned().fold(f64::MAX, f64::min);
    let hi = finals.iter().cloned().fold(f64::MIN, f64::max);
    assert!((hi - lo) <= 0.01 * lo, "{finals:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lemma_and_gain_identities(seed in any::<u64>(), lambda in 0.9f64..=1.0, d in 1usize..5) {
        let m = 8;
        let mut eq = EqualizerState::new(0, flat(m), RankPolicy::Fixed(d), lambda, 0.1, TargetScaling::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = C64::new(lambda, 0.0);
        let rel = |a: DMatrix<C64>, b: &DMatrix<C64>| (a - b).norm() / b.norm();
        for _ in 0..50 {
            let r = DVector::from_vec(cvec(&mut rng, m));
            let (p0, q0, phi0, w0) = (eq.rls.p.clone(), eq.rls.q_w.clone(), eq.rls.phi_bar.clone(), eq.w_bar.clone());
            adapt_step(&mut eq, r.as_slice(), cg(&mut rng, 1.0)).unwrap();
            let rbar = eq.s.adjoint() * &r;
            prop_assert!(rel(&eq.rls.p * l + &eq.rls.p * &r * r.adjoint() * &p0, &p0) < 1e-8);
            prop_assert!(rel(&eq.rls.q_w * l + &eq.rls.q_w * &w0 * w0.adjoint() * &q0, &q0) < 1e-8);
            prop_assert!(rel(&eq.rls.phi_bar * l + &eq.rls.phi_bar * &rbar * rbar.adjoint() * &phi0, &phi0) < 1e-8);
            let kp = &eq.rls.p * &r;
            prop_assert!((&eq.rls.k - &kp).norm() < 1e-8 * kp.norm());
            prop_assert!(rrmimo::linalg::hermitian_defect(&eq.rls.p) <= 1e-8 * eq.rls.p.norm());
        }
    }

    #[test]
    fn alternation_never_increases_ses(seed in any::<u64>(), m in 3usize..9, d_raw in 1usize..4, sweeps in 0usize..8) {
        let d = d_raw.min(m);
        let data = Stationary::new(m, 30, 0.5, seed);
        let mut ws = BatchLsWorkspace::from_block(&data.inputs, &data.refs, 0.99, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let s0 = DMatrix::from_vec(m, d, cvec(&mut rng, m * d));
        let w0 = DVector::from_vec(cvec(&mut rng, d));
        let out = alternate(&mut ws, &s0, &w0, sweeps).unwrap();
        prop_assert_eq!(out.ses_trace.len(), sweeps + 1);
        for p in out.ses_trace.windows(2) {
            prop_assert!(p[1] <= p[0] * (1.0 + 1e-10) + 1e-14);
        }
        // Normal equations of the final w̄, once at least one sweep ran.
        if sweeps > 0 {
            let resid = out.s.adjoint() * (&ws.p - ws.regularized() * &out.s * &out.w);
            prop_assert!(resid.norm() < 1e-8 * ws.p.norm().max(1.0));
        }
    }

    #[test]
    fn selected_rank_minimizes_cost(seed in any::<u64>(), d_min in 1usize..4, span in 0usize..4) {
        let d_max = d_min + span;
        let m = 8;
        let data = Stationary::new(m, 120, 0.3, seed);
        let policy = RankPolicy::Auto { d_min, d_max };
        let mut eq = EqualizerState::new(0, flat(m), policy, 0.98, 0.01, TargetScaling::default()).unwrap();
        for (r, &x) in data.inputs.iter().zip(&data.refs) {
            let diag = adapt_step(&mut eq, r, x).unwrap();
            prop_assert!((d_min..=d_max).contains(&diag.rank));
            let costs = &eq.rank_cost.as_ref().unwrap().costs;
            let chosen = costs[diag.rank - d_min];
            prop_assert!(costs.iter().all(|&c| chosen <= c));
            prop_assert_eq!(diag.rank, select_rank(costs, d_min));
            prop_assert_eq!(eq.s.ncols(), d_max);
        }
    }

    #[test]
    fn fixed_policy_rank_constant(seed in any::<u64>(), d in 1usize..6) {
        let data = Stationary::new(6, 40, 0.3, seed);
        let mut eq = EqualizerState::new(0, flat(6), RankPolicy::Fixed(d), 0.99, 0.01, TargetScaling::default()).unwrap();
        for (r, &x) in data.inputs.iter().zip(&data.refs) {
            prop_assert_eq!(adapt_step(&mut eq, r, x).unwrap().rank, d);
        }
    }

    #[test]
    fn policy_strings_round_trip(a in 1usize..20, b in 0usize..20) {
        for p in [RankPolicy::Fixed(a), RankPolicy::Auto { d_min: a, d_max: a + b }] {
            let s: String = p.into();
            prop_assert_eq!(s.parse::<RankPolicy>().unwrap(), p);
        }
    }
}
