//! Norms against independent elementwise and scalar computations.

use std::sync::Arc;

use ncmart::norms::{self, Exponent, NormFamily};
use ncmart::sampling::{random_martingale, stream_rng};
use ncmart::spectral::{c, Mat};
use ncmart::{Operator, TraceSpace};
use proptest::prelude::*;

fn frobenius_l2(x: &Operator) -> f64 {
    let n = x.dim() as f64;
    x.mats()
        .iter()
        .zip(x.space().weights())
        .map(|(m, w)| w / n * m.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Scalar dyadic model by hand: level `k` averages blocks of
/// `2^{depth − k}` consecutive values.
fn scalar_cond_exp(values: &[f64], depth: usize, k: usize) -> Vec<f64> {
    let block = 1usize << (depth - k);
    values
        .chunks(block)
        .flat_map(|ch| {
            let avg = ch.iter().sum::<f64>() / ch.len() as f64;
            std::iter::repeat_n(avg, ch.len())
        })
        .collect()
}

fn scalar_bmo_c(values: &[f64], depth: usize) -> f64 {
    let e1 = scalar_cond_exp(values, depth, 1);
    let mut best = e1.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for n in 1..=depth {
        let xn = scalar_cond_exp(values, depth, n);
        let sq: Vec<f64> = values.iter().zip(&xn).map(|(a, b)| (a - b).powi(2)).collect();
        let cond = scalar_cond_exp(&sq, depth, n);
        best = best.max(cond.iter().fold(0.0f64, |a, v| a.max(*v)).sqrt());
    }
    best
}

#[test]
fn l2_matches_frobenius_and_hardy_two_norms() {
    for seed in 0..20 {
        let sp = Arc::new(TraceSpace::dyadic(3, 3).unwrap());
        let x = random_martingale(&sp, 1.0, seed);
        let two = Exponent::Finite(2.0);
        let oracle = frobenius_l2(&x);
        assert!((norms::lp_norm(&x, two).unwrap() - oracle).abs() < 1e-12);
        // Orthogonality of differences: ‖S_c‖_2 = ‖s_c‖_2 = ‖x‖_2.
        for fam in [NormFamily::Hc, NormFamily::Hr, NormFamily::HcCond, NormFamily::HrCond] {
            let v = norms::hardy_norm(&x, fam, two).unwrap();
            assert!((v - oracle).abs() < 1e-12, "{fam:?}: {v} vs {oracle}");
        }
    }
}

#[test]
fn scalar_bmo_matches_hand_computation() {
    for seed in 0..30u64 {
        let depth = 4;
        let sp = Arc::new(TraceSpace::dyadic(depth, 1).unwrap());
        let mut rng = stream_rng(seed, 0);
        let values: Vec<f64> = (0..16).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        let x = Operator::scalar_fn(&sp, |s| values[s]);
        let oracle = scalar_bmo_c(&values, depth);
        assert!((norms::bmo_c(&x) - oracle).abs() < 1e-12);
        assert!((norms::bmo_r(&x) - oracle).abs() < 1e-12);
    }
}

#[test]
fn op_norm_of_diagonal_operator() {
    let sp = Arc::new(TraceSpace::dyadic(2, 3).unwrap());
    let x = Operator::from_fn(&sp, |s| {
        Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(s as f64),
            c(-(s as f64) - 0.5),
            c(0.25),
        ]))
    });
    assert!((x.norm_inf() - 3.5).abs() < 1e-14);
    let one = norms::lp_norm(&x, Exponent::Finite(1.0)).unwrap();
    let oracle: f64 = (0..4).map(|s| 0.25 * (s as f64 + s as f64 + 0.5 + 0.25) / 3.0).sum();
    assert!((one - oracle).abs() < 1e-13);
}

#[test]
fn identity_has_unit_norms_everywhere() {
    let sp = Arc::new(TraceSpace::dyadic(3, 2).unwrap());
    let id = Operator::identity(&sp);
    for p in [0.5, 1.0, 2.0, 7.0] {
        assert!((norms::lp_norm(&id, Exponent::Finite(p)).unwrap() - 1.0).abs() < 1e-14);
    }
    assert!((norms::bmo_c(&id) - 1.0).abs() < 1e-14);
    assert!(norms::big_bmo_c(&id) - 1.0 < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cond_exp_is_idempotent_and_trace_preserving(seed in 0u64..10_000, level in 1usize..=3) {
        let sp = Arc::new(TraceSpace::dyadic(3, 2).unwrap());
        let x = random_martingale(&sp, 1.0, seed);
        let e = x.cond_exp(level).unwrap();
        prop_assert!(e.dist_inf(&e.cond_exp(level).unwrap()) < 1e-13);
        prop_assert!((e.trace() - x.trace()).norm() < 1e-13);
    }

    #[test]
    fn lp_norms_increase_with_p(seed in 0u64..10_000) {
        let sp = Arc::new(TraceSpace::dyadic(2, 2).unwrap());
        let x = random_martingale(&sp, 1.0, seed);
        let mut last = 0.0;
        for p in [0.5, 1.0, 1.5, 2.0, 4.0] {
            let v = norms::lp_norm(&x, Exponent::Finite(p)).unwrap();
            prop_assert!(v >= last - 1e-12);
            last = v;
        }
        prop_assert!(x.norm_inf() >= last - 1e-12);
    }

    #[test]
    fn bmo_is_max_of_parts(seed in 0u64..10_000) {
        let sp = Arc::new(TraceSpace::dyadic(3, 2).unwrap());
        let x = random_martingale(&sp, 1.0, seed);
        let all = norms::bmo_norm(&x, NormFamily::Bmo).unwrap().value;
        let parts = norms::bmo_c(&x).max(norms::bmo_r(&x)).max(norms::bmo_d(&x));
        prop_assert!((all - parts).abs() < 1e-14);
        prop_assert!(norms::big_bmo_c(&x) <= 2.0 * x.norm_inf() + 1e-12);
    }
}
