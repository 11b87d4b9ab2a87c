use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rrmimo::adaptation::{adapt_step, RankPolicy, TargetScaling};
use rrmimo::channel::{
    noiseless_received, received_samples, stack_received, ChannelRealization, Constellation, MimoDims, SymbolFrame,
};
use rrmimo::equalizer::{
    build_stacked_input, decide, detect_block, equalizer_output, project, EqualizerState, FeedbackBuffer, Mode,
};
use rrmimo::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

fn cvec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            C64::new(a, b)
        })
        .collect()
}

fn random_state(dims: MimoDims, d: usize, seed: u64) -> EqualizerState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = dims.m();
    let s0 = DMatrix::from_vec(m, d, cvec(&mut rng, m * d));
    let mut st =
        EqualizerState::with_transform(0, dims, RankPolicy::Fixed(d), 0.99, 0.01, TargetScaling::default(), s0)
            .unwrap();
    st.w_bar = DVector::from_vec(cvec(&mut rng, d));
    st
}

fn dims() -> MimoDims {
    MimoDims::new(3, 2, 2, 3, 2).unwrap()
}

#[test]
fn two_stream_feedback_takes_other_stream() {
    let d = MimoDims::new(2, 1, 1, 1, 1).unwrap();
    let fb = FeedbackBuffer::new(d);
    let (u, v) = (C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    let r = build_stacked_input(&[ZERO], &fb, 0, Mode::Dfe, Some(&[u, v])).unwrap();
    assert_eq!(r.as_slice(), &[ZERO, v]);
}

#[test]
fn first_pass_feedback_is_zero() {
    let mut fb = FeedbackBuffer::new(dims());
    fb.push(&[C64::new(1.0, 0.0); 3]);
    let r = build_stacked_input(&[C64::new(2.0, 0.0); 6], &fb, 1, Mode::Dfe, None).unwrap();
    assert!(r.as_slice()[6..].iter().all(|z| *z == ZERO));
}

#[test]
fn mismatched_decisions_rejected() {
    let fb = FeedbackBuffer::new(dims());
    assert!(build_stacked_input(&[ZERO; 6], &fb, 0, Mode::Dfe, Some(&[ZERO; 2])).is_err());
    assert!(build_stacked_input(&[ZERO; 6], &fb, 5, Mode::Dfe, None).is_err());
}

#[test]
fn projection_matches_double_loop() {
    let st = random_state(dims(), 3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let r = cvec(&mut rng, st.m());
    let rbar = project(&st, &r).unwrap();
    for c in 0..3 {
        let mut acc = ZERO;
        for i in 0..st.m() {
            acc += st.s[(i, c)].conj() * r[i];
        }
        assert!((acc - rbar[c]).norm() < 1e-12);
    }
}

#[test]
fn zero_transform_projects_to_zero() {
    let mut st = random_state(dims(), 2, 1);
    st.s.fill(ZERO);
    let rbar = project(&st, &vec![C64::new(1.0, 1.0); st.m()]).unwrap();
    assert!(rbar.iter().all(|z| *z == ZERO));
    assert!(rrmimo::adaptation::is_degenerate(&st.s));
}

#[test]
fn trivial_weights_pick_first_entry() {
    let d = dims();
    let st = EqualizerState::new(0, d, RankPolicy::Fixed(2), 0.99, 0.01, TargetScaling::default()).unwrap();
    let mut r = vec![ZERO; d.m()];
    r[0] = C64::new(0.3, -0.7);
    r[1] = C64::new(5.0, 5.0);
    assert_eq!(equalizer_output(&st, &r).unwrap(), r[0]);
    assert_eq!(equalizer_output(&st, &vec![ZERO; d.m()]).unwrap(), ZERO);
}

#[test]
fn slicer_matches_sign_rule_on_grid() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for a in -20..=20 {
        for b in -20..=20 {
            if a == 0 || b == 0 {
                continue;
            }
            let z = C64::new(a as f64 * 0.1, b as f64 * 0.1);
            let want = C64::new(s * (a as f64).signum(), s * (b as f64).signum());
            assert_eq!(decide(z, Constellation::Qpsk), want);
        }
    }
    assert_eq!(decide(C64::new(0.9 * s, 0.8 * s), Constellation::Qpsk), C64::new(s, s));
}

#[test]
fn linear_detection_returns_first_pass() {
    let d = dims().without_feedback();
    let filters: Vec<_> = (0..3).map(|j| random_state(d, 2, j as u64)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let y = cvec(&mut rng, d.window_len());
    let fb = FeedbackBuffer::new(d);
    let det = detect_block(&filters, &y, &fb, Mode::Linear, Constellation::Qpsk, None).unwrap();
    assert_eq!(det.decisions, det.first_pass);
}

#[test]
fn perfect_channel_recovers_symbols() {
    // Noiseless identity MIMO link, one filter per stream selecting its antenna.
    let d = MimoDims::new(2, 2, 1, 1, 1).unwrap();
    let gains = [C64::new(1.0, 0.0), ZERO, ZERO, C64::new(1.0, 0.0)];
    let ch = ChannelRealization::from_static(d, 20, &gains).unwrap();
    let frame = SymbolFrame::random(2, 20, Constellation::Qpsk, 3);
    let y = noiseless_received(&ch, &frame).unwrap();
    let filters: Vec<EqualizerState> = (0..2)
        .map(|j| {
            let mut s0 = DMatrix::from_element(d.m(), 1, ZERO);
            s0[(j, 0)] = C64::new(1.0, 0.0);
            EqualizerState::with_transform(j, d, RankPolicy::Fixed(1), 0.99, 0.01, TargetScaling::default(), s0).unwrap()
        })
        .collect();
    let mut fb = FeedbackBuffer::new(d);
    for i in 0..20 {
        let ys = stack_received(&y, i, d);
        let det = detect_block(&filters, &ys, &fb, Mode::Dfe, Constellation::Qpsk, None).unwrap();
        assert_eq!(det.decisions, vec![frame.symbols[(0, i)], frame.symbols[(1, i)]]);
        fb.push(&det.decisions);
    }
}

#[test]
fn correct_feedback_lowers_error_on_static_channel() {
    // Two streams over a static two-tap channel; compare SES of the adapted
    // DFE filters with true feedback against the same filters with the
    // feedback segment zeroed.
    let d = MimoDims::new(2, 2, 2, 2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let gains: Vec<C64> = cvec(&mut rng, 8).into_iter().map(|g| g * 0.5).collect();
    let n = 3000;
    let ch = ChannelRealization::from_static(d, n, &gains).unwrap();
    let frame = SymbolFrame::random(2, n, Constellation::Qpsk, 22);
    let y = received_samples(&ch, &frame, 0.05, 23).unwrap();
    let mut filters: Vec<EqualizerState> = (0..2)
        .map(|j| EqualizerState::new(j, d, RankPolicy::Fixed(2), 0.998, 0.01, TargetScaling::default()).unwrap())
        .collect();
    let mut fb = FeedbackBuffer::new(d);
    let (mut with_fb, mut without) = (0.0, 0.0);
    for i in 0..n {
        let ys = stack_received(&y, i, d);
        let x: Vec<C64> = (0..2).map(|j| frame.symbols[(j, i)]).collect();
        for (j, f) in filters.iter_mut().enumerate() {
            let r = build_stacked_input(&ys, &fb, j, Mode::Dfe, Some(&x)).unwrap();
            if i >= n - 1000 {
                let r0 = build_stacked_input(&ys, &fb, j, Mode::Dfe, None).unwrap();
                with_fb += (x[j] - equalizer_output(f, r.as_slice()).unwrap()).norm_sqr();
                without += (x[j] - equalizer_output(f, r0.as_slice()).unwrap()).norm_sqr();
            }
            adapt_step(f, r.as_slice(), x[j]).unwrap();
        }
        fb.push(&x);
    }
    assert!(with_fb < without, "{with_fb} vs {without}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let st = random_state(dims(), 3, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let r1 = cvec(&mut rng, st.m());
        let r2 = cvec(&mut rng, st.m());
        let alpha = C64::new(a, b);
        let mix: Vec<C64> = r1.iter().zip(&r2).map(|(x, y)| alpha * x + y).collect();
        let lhs = equalizer_output(&st, &mix).unwrap();
        let rhs = alpha * equalizer_output(&st, &r1).unwrap() + equalizer_output(&st, &r2).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()) * 100.0);
    }

    #[test]
    fn composite_filter_is_equivalent(seed in any::<u64>(), d in 1usize..6) {
        let st = random_state(dims(), d, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let r = DVector::from_vec(cvec(&mut rng, st.m()));
        let z = equalizer_output(&st, r.as_slice()).unwrap();
        let w = &st.s * &st.w_bar;
        prop_assert!((z - w.dotc(&r)).norm() < 1e-12 * (1.0 + z.norm()) * 10.0);
    }

    #[test]
    fn feedback_never_contains_own_stream(n_t in 2usize..5, b in 1usize..4, j_raw in 0usize..5, steps in 0usize..6) {
        let j = j_raw % n_t;
        let d = MimoDims::new(n_t, 1, 1, 1, b).unwrap();
        let mut fb = FeedbackBuffer::new(d);
        // Stream s at instant t carries value 100·t + s + 1, so the source of
        // every feedback entry is recoverable.
        for t in 0..steps {
            fb.push(&(0..n_t).map(|s| C64::new((100 * t + s + 1) as f64, 0.0)).collect::<Vec<_>>());
        }
        let cur: Vec<C64> = (0..n_t).map(|s| C64::new((100 * steps + s + 1) as f64, 0.0)).collect();
        let seg = fb.extract(j, &cur);
        prop_assert_eq!(seg.len(), b * (n_t - 1));
        for v in seg {
            if v != ZERO {
                let s = (v.re as usize - 1) % 100;
                prop_assert_ne!(s, j);
            }
        }
    }

    #[test]
    fn decisions_scale_invariant(re in -5.0f64..5.0, im in -5.0f64..5.0, alpha in 0.01f64..100.0) {
        let z = C64::new(re, im);
        prop_assert_eq!(decide(z * alpha, Constellation::Qpsk), decide(z, Constellation::Qpsk));
    }
}
