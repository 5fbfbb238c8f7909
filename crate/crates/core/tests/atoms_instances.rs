use std::sync::Arc;

use ncmart::atoms::{
    lemma_4_16_check, lemma_4_2_check, pairing_bound_check, pr_to_crude, random_crude_atom,
    random_projection_atom, two_atom_decompose, validate_atom, AtomKind,
};
use ncmart::instances::{
    operator_step_residuals, lemma_5_1_steps_check, lemma_5_2_check, rademacher, rademacher_row,
    remark_3_9_instance, sweep, sweep_growth_experiment,
};
use ncmart::jn::{jn_lower_bound_with_hints, Deflator, Functional, Hint, Side};
use ncmart::norms::{self, Exponent, NormFamily};
use ncmart::sampling::{random_martingale, stream_rng};
use ncmart::spectral::{c, Mat};
use ncmart::{Operator, TraceSpace};

fn space() -> Arc<TraceSpace> {
    Arc::new(TraceSpace::dyadic(3, 2).unwrap())
}

#[test]
fn crude_atoms_satisfy_h1_bound() {
    let sp = space();
    for q in [Exponent::Finite(1.25), Exponent::Finite(2.0), Exponent::Finite(4.0), Exponent::Inf] {
        for t in 0..25 {
            let mut rng = stream_rng(7, t);
            let (a, cert) = random_crude_atom(&mut rng, &sp, q).unwrap();
            let checked = validate_atom(&a, &cert).unwrap();
            assert!(checked.valid(), "{:?}", checked.checks);
            let rep = lemma_4_2_check(&a, &cert).unwrap();
            assert!(rep.value <= 1.0 + 1e-8);
            assert_eq!(rep.jensen.is_some(), q.is_inf());
        }
    }
}

#[test]
fn projection_atoms_convert_to_crude() {
    let sp = space();
    for (i, kind) in [AtomKind::PrC, AtomKind::PrR].into_iter().enumerate() {
        for q in [Exponent::Finite(1.5), Exponent::Finite(3.0), Exponent::Inf] {
            for t in 0..15 {
                let mut rng = stream_rng(i as u64, t);
                let (a, cert) = random_projection_atom(&mut rng, &sp, kind, q, Side::Right).unwrap();
                assert!(validate_atom(&a, &cert).unwrap().valid());
                let crude = pr_to_crude(&a, &cert).unwrap();
                assert!(crude.valid(), "{:?}", crude.checks);
            }
        }
    }
}

#[test]
fn explicit_projection_atom_is_valid() {
    // a = r_2 ⊗ e_11 on the first level-1 cell, scaled to the pr_c bound.
    let sp = space();
    let e_op = Operator::cell_indicator(&sp, 1, &[0]);
    let e = ncmart::ProjectionWitness::new(1, e_op.clone()).unwrap();
    let mut e11 = Mat::zeros(2, 2);
    e11[(0, 0)] = c(1.0);
    let raw = Operator::from_fn(&sp, |s| e11.clone() * c(rademacher(3, 2, s)));
    let raw = &raw * &e_op;
    let tau = e.trace_value();
    let size = norms::hardy_norm(&raw, NormFamily::HcCond, Exponent::Finite(2.0)).unwrap();
    let a = raw.scale(tau.powf(-0.5) / size);
    let cert = ncmart::atoms::AtomCertificate::new(
        AtomKind::PrC,
        Exponent::Finite(2.0),
        1,
        ncmart::atoms::AtomPayload::Projection { e, side: Side::Right },
    );
    assert!(validate_atom(&a, &cert).unwrap().valid());
}

#[test]
fn decomposition_resums_and_respects_bounds() {
    let sp = space();
    for seed in 0..30 {
        let x = random_martingale(&sp, 1.0, seed);
        for q in [Exponent::Finite(2.0), Exponent::Finite(1.5), Exponent::Finite(4.0), Exponent::Inf] {
            let d = two_atom_decompose(&x, q).unwrap();
            assert!(d.resum_defect < 1e-10);
            for p in &d.pieces {
                if let Some(cert) = &p.certificate {
                    assert!(cert.valid());
                } else {
                    assert!(p.l1_norm <= 1.0 + 1e-8);
                }
            }
            if q == Exponent::Finite(2.0) {
                let l2 = norms::lp_norm(&x, Exponent::Finite(2.0)).unwrap();
                assert!(d.coefficient_sum <= 2f64.sqrt() * l2 + 1e-9);
            }
        }
    }
    let x0 = random_martingale(&sp, 1.0, 5);
    let x0 = &x0 - &x0.cond_exp(1).unwrap();
    let x0 = x0.scale(1.0 / norms::lp_norm(&x0, Exponent::Finite(2.0)).unwrap());
    let d = two_atom_decompose(&x0, Exponent::Finite(2.0)).unwrap();
    assert_eq!(d.pieces.len(), 1);
    assert!((d.pieces[0].coefficient - 1.0).abs() < 1e-12);
    assert!(two_atom_decompose(&Operator::zero(&sp), Exponent::Finite(2.0)).is_err());
}

#[test]
fn pairing_bound_on_random_pairs() {
    let sp = space();
    for t in 0..60 {
        let mut rng = stream_rng(21, t);
        let x = random_martingale(&sp, 1.0, 1000 + t);
        let (a, cert) = random_crude_atom(&mut rng, &sp, Exponent::Finite(2.0)).unwrap();
        let rep = pairing_bound_check(&x, &a, &cert).unwrap();
        assert!(rep.lhs <= rep.rhs * (1.0 + 1e-9));
    }
}

#[test]
fn plain_atom_ratio_is_finite() {
    let sp = space();
    let mut rng = stream_rng(2, 0);
    let (a, cert) =
        random_projection_atom(&mut rng, &sp, AtomKind::Plain, Exponent::Finite(2.0), Side::Left).unwrap();
    let r = lemma_4_16_check(&a, &cert).unwrap();
    assert!(r.is_finite() && r >= 0.0);
    assert_eq!(lemma_4_16_check(&Operator::zero(&sp), &cert).unwrap(), 0.0);
}

#[test]
fn rademacher_row_closed_forms() {
    for n in 2..=6 {
        let inst = rademacher_row(n, &[2.0, 3.0, 4.0, 8.0]).unwrap();
        for check in inst.verify().unwrap() {
            assert!(check.deviation <= 1e-10, "{check:?}");
        }
        // dx_k = r_k ⊗ e_1k exactly.
        let diffs = inst.x.diffs();
        for k in 1..=n {
            let expected = Operator::from_fn(&inst.space, |s| {
                let mut m = Mat::zeros(n, n);
                m[(0, k - 1)] = c(rademacher(n, k, s));
                m
            });
            assert!(diffs.get(k).dist_inf(&expected) < 1e-15);
        }
    }
}

#[test]
fn deflated_row_witness() {
    for n in [2usize, 4] {
        let inst = remark_3_9_instance(n, 1.0).unwrap();
        for check in inst.verify().unwrap() {
            assert!(check.deviation <= 1e-9, "{check:?}");
        }
        let a = inst.companion("a").unwrap().clone();
        let hint = Hint {
            level: n + 1,
            side: Side::Right,
            deflator: Deflator::General(a),
        };
        let est = jn_lower_bound_with_hints(&inst.x, Functional::BigBmoCP, 1.0, 0, 0, &[hint]).unwrap();
        assert!(est.lower_bound >= (n as f64).sqrt() - 1e-9);
        assert!((norms::big_bmo_c(&inst.x) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn sweep_is_square_function_squared() {
    let sp = space();
    let b = random_martingale(&sp, 1.0, 3);
    assert!(sweep(&b).dist_inf(&norms::sc_squared(&b)) < 1e-10);
    let m = Mat::from_fn(2, 2, |i, j| c((i + 2 * j) as f64));
    let constant = Operator::constant(&sp, &m).unwrap();
    assert!(sweep(&constant).dist_inf(&constant.abs_sq()) < 1e-12);
}

#[test]
fn sweep_growth_is_monotone_in_budget() {
    let a = sweep_growth_experiment(&[1, 2], 3, 16, 5).unwrap();
    let b = sweep_growth_experiment(&[1, 2], 3, 40, 5).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(y.best_value >= x.best_value);
        assert!(x.ratio.is_finite());
    }
}

#[test]
fn operator_inequality_steps() {
    let rep = lemma_5_1_steps_check(200, 3, 1).unwrap();
    assert!(rep.min_convexity >= -1e-9 && rep.min_root >= -1e-9);
    // Commuting diagonal pair: scalar convexity.
    let x = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(4.0)]));
    let y = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0), c(0.0)]));
    let (a, _) = operator_step_residuals(&x, &y);
    // min over diagonal of (x² + y²)/2 − ((x − y)/2)² = (x + y)²/4.
    assert!((a * 16.0 - 4.0).abs() < 1e-12);
    let sp = space();
    for p in [1.0, 2.0, 3.0, 5.0] {
        for seed in 0..10 {
            let x = random_martingale(&sp, 1.0, seed);
            let rep = lemma_5_2_check(&x, 1 + seed as usize % 3, p).unwrap();
            assert!(rep.lhs <= rep.rhs * (1.0 + 1e-9));
        }
    }
}

#[test]
fn conditional_cauchy_schwarz_scalar_oracle() {
    let sp = Arc::new(TraceSpace::dyadic(2, 1).unwrap());
    let vals = [0.5, -2.0, 1.5, 3.0];
    let x = Operator::scalar_fn(&sp, |s| vals[s]);
    let p = 3.0;
    let rep = lemma_5_2_check(&x, 1, p).unwrap();
    let cells = [&vals[0..2], &vals[2..4]];
    let sup_avg = |alpha: f64| {
        cells
            .iter()
            .map(|cell| cell.iter().map(|v| v.abs().powf(alpha)).sum::<f64>() / 2.0)
            .fold(0.0f64, f64::max)
    };
    assert!((rep.lhs - sup_avg((p + 1.0) / 2.0)).abs() < 1e-12);
    assert!((rep.rhs - (sup_avg(p) * sup_avg(1.0)).sqrt()).abs() < 1e-12);
}
