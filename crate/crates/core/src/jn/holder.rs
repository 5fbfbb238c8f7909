//! Hölder factorization `a = a0 a1` of an `L_2`-unit element.
//!
//! With the polar decomposition `a = u|a|`: `a0 = u|a|^{2/p}` and
//! `a1 = |a|^{(p−2)/p}`, so `‖a0‖_p^p = ‖a1‖_{2p/(p−2)}^{2p/(p−2)} = ‖a‖_2²`.

use serde::Serialize;

use crate::error::{NcError, Result};
use crate::norms::{self, Exponent, NormFamily};
use crate::operator::Operator;
use crate::spectral;

pub fn holder_witness(a: &Operator, p: f64) -> Result<(Operator, Operator)> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(NcError::InvalidArgument(format!(
            "Hölder factorization needs finite p ≥ 2, got {p}"
        )));
    }
    let l2 = norms::lp_norm(a, Exponent::Finite(2.0))?;
    if l2 > 1.0 + 1e-12 {
        return Err(NcError::InvalidInput(format!(
            "‖a‖_2 = {l2} exceeds 1"
        )));
    }
    let mut a0 = Vec::with_capacity(a.mats().len());
    let mut a1 = Vec::with_capacity(a.mats().len());
    for m in a.mats() {
        let (u, s, v) = spectral::svd(m);
        let pow = |alpha: f64| -> Vec<f64> {
            s.iter()
                .map(|&x| if x > 0.0 { x.powf(alpha) } else { 0.0 })
                .collect()
        };
        a0.push(u_sigma_v(&u, &pow(2.0 / p), &v));
        a1.push(spectral::rebuild(&pow((p - 2.0) / p), &v, |x| x));
    }
    let a0 = Operator::new(a.space().clone(), a0)?;
    let a1 = Operator::new(a.space().clone(), a1)?;
    let defect = (&(&a0 * &a1) - a).norm_inf();
    if defect > 1e-10 * a.norm_inf().max(1.0) {
        return Err(NcError::AssertionFailure {
            check: "holder_factorization".into(),
            detail: format!("‖a0 a1 − a‖_∞ = {defect:e}"),
            sample: Box::new(serde_json::json!({ "p": p })),
        });
    }
    Ok((a0, a1))
}

/// `U diag(σ) V*`.
fn u_sigma_v(u: &spectral::Mat, sigma: &[f64], v: &spectral::Mat) -> spectral::Mat {
    let mut us = u.clone();
    for (j, &s) in sigma.iter().enumerate() {
        us.column_mut(j).scale_mut(s);
    }
    us * v.adjoint()
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderChain {
    /// `‖(x − x_n) a‖²_{h^c_2}`
    pub lhs: f64,
    /// `‖(x − x_n) a0‖²_{h^c_p}`
    pub rhs: f64,
}

/// Checks `‖(x − x_n)a‖²_{h^c_2} ≤ ‖(x − x_n)a0‖²_{h^c_p}` for the
/// factorization of `a`.
pub fn holder_chain_check(x: &Operator, a: &Operator, level: usize, p: f64) -> Result<HolderChain> {
    let level = x.space().check_level(level)?;
    let (a0, _) = holder_witness(a, p)?;
    let y = x - &x.cond_exp_unchecked(level);
    let lhs = norms::hardy_norm(&(&y * a), NormFamily::HcCond, Exponent::Finite(2.0))?.powi(2);
    let rhs = norms::hardy_norm(&(&y * &a0), NormFamily::HcCond, Exponent::Finite(p))?.powi(2);
    if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
        return Err(NcError::ViolationFound {
            check: "holder_chain".into(),
            lhs,
            rhs,
            sample: Box::new(serde_json::json!({ "level": level, "p": p })),
        });
    }
    Ok(HolderChain { lhs, rhs })
}
