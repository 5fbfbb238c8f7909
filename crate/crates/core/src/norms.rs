//! Noncommutative `L_p` norms, square functions, Hardy norms and the
//! BMO-type norms, evaluated exactly on a finite trace space.
//!
//! Conventions: `x_0 = 0`, `E_0 = E_1`; row quantities are column
//! quantities of `x*`.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{NcError, Result};
use crate::operator::{Operator, SpectralFn};
use crate::spectral;

/// An exponent `p ∈ (0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Inf,
}

impl Exponent {
    pub fn finite(p: f64) -> Result<Self> {
        if p.is_finite() && p > 0.0 {
            Ok(Exponent::Finite(p))
        } else if p == f64::INFINITY {
            Ok(Exponent::Inf)
        } else {
            Err(NcError::InvalidArgument(format!("exponent must be positive, got {p}")))
        }
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, Exponent::Inf)
    }

    /// `p` as an `f64`, with `∞` mapped to `f64::INFINITY`.
    pub fn value(&self) -> f64 {
        match *self {
            Exponent::Finite(p) => p,
            Exponent::Inf => f64::INFINITY,
        }
    }

    /// The conjugate exponent `p' = p/(p−1)`; `1' = ∞`, `∞' = 1`.
    pub fn conjugate(&self) -> Result<Exponent> {
        match *self {
            Exponent::Inf => Ok(Exponent::Finite(1.0)),
            Exponent::Finite(p) if p == 1.0 => Ok(Exponent::Inf),
            Exponent::Finite(p) if p > 1.0 => Ok(Exponent::Finite(p / (p - 1.0))),
            Exponent::Finite(p) => Err(NcError::InvalidArgument(format!(
                "no conjugate exponent for p = {p}"
            ))),
        }
    }

    /// `1/p`, zero for `p = ∞`.
    pub fn recip(&self) -> f64 {
        match *self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Inf => 0.0,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Inf => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = NcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "Inf" | "infinity" | "∞" => Ok(Exponent::Inf),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| NcError::InvalidArgument(format!("cannot parse exponent `{other}`")))?;
                Exponent::finite(p)
            }
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct ExpVisitor;
        impl Visitor<'_> for ExpVisitor {
            type Value = Exponent;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Exponent, E> {
                Exponent::finite(v).map_err(E::custom)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Exponent, E> {
                self.visit_f64(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Exponent, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Exponent, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(ExpVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NormFamily {
    #[serde(rename = "lp")]
    Lp,
    #[serde(rename = "op")]
    Op,
    Hc,
    Hr,
    #[serde(rename = "hc")]
    HcCond,
    #[serde(rename = "hr")]
    HrCond,
    #[serde(rename = "hd")]
    Hd,
    #[serde(rename = "bmo_c")]
    BmoC,
    #[serde(rename = "bmo_r")]
    BmoR,
    #[serde(rename = "bmo_d")]
    BmoD,
    #[serde(rename = "bmo")]
    Bmo,
    #[serde(rename = "BMO_c")]
    BigBmoC,
    #[serde(rename = "BMO_r")]
    BigBmoR,
    #[serde(rename = "BMO")]
    BigBmo,
    #[serde(rename = "h1_upper")]
    H1UpperCond,
    #[serde(rename = "H1_upper")]
    H1Upper,
}

impl NormFamily {
    pub const ALL: [NormFamily; 16] = [
        NormFamily::Lp,
        NormFamily::Op,
        NormFamily::Hc,
        NormFamily::Hr,
        NormFamily::HcCond,
        NormFamily::HrCond,
        NormFamily::Hd,
        NormFamily::BmoC,
        NormFamily::BmoR,
        NormFamily::BmoD,
        NormFamily::Bmo,
        NormFamily::BigBmoC,
        NormFamily::BigBmoR,
        NormFamily::BigBmo,
        NormFamily::H1UpperCond,
        NormFamily::H1Upper,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            NormFamily::Lp => "lp",
            NormFamily::Op => "op",
            NormFamily::Hc => "Hc",
            NormFamily::Hr => "Hr",
            NormFamily::HcCond => "hc",
            NormFamily::HrCond => "hr",
            NormFamily::Hd => "hd",
            NormFamily::BmoC => "bmo_c",
            NormFamily::BmoR => "bmo_r",
            NormFamily::BmoD => "bmo_d",
            NormFamily::Bmo => "bmo",
            NormFamily::BigBmoC => "BMO_c",
            NormFamily::BigBmoR => "BMO_r",
            NormFamily::BigBmo => "BMO",
            NormFamily::H1UpperCond => "h1_upper",
            NormFamily::H1Upper => "H1_upper",
        }
    }

    /// Whether the family is indexed by an exponent.
    pub fn takes_exponent(&self) -> bool {
        matches!(
            self,
            NormFamily::Lp
                | NormFamily::Hc
                | NormFamily::Hr
                | NormFamily::HcCond
                | NormFamily::HrCond
                | NormFamily::Hd
        )
    }
}

impl FromStr for NormFamily {
    type Err = NcError;

    fn from_str(s: &str) -> Result<Self> {
        NormFamily::ALL
            .iter()
            .copied()
            .find(|f| f.tag() == s.trim())
            .ok_or_else(|| NcError::InvalidArgument(format!("unknown norm family `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub family: NormFamily,
    pub p: Exponent,
    pub value: f64,
    pub argmax_level: Option<usize>,
}

/// `τ(|x|^p)`-based norm, `(Σ_s μ_s (1/n) Σ_i σ_i(x_s)^p)^{1/p}`; `p = ∞`
/// is the largest singular value over all sites.
pub fn lp_norm(x: &Operator, p: Exponent) -> Result<f64> {
    if let Exponent::Finite(q) = p {
        if !(q > 0.0) {
            return Err(NcError::InvalidArgument(format!("p must be positive, got {q}")));
        }
    }
    Ok(lp_from_singular_values(x, p))
}

fn lp_from_singular_values(x: &Operator, p: Exponent) -> f64 {
    match p {
        Exponent::Inf => x.norm_inf(),
        Exponent::Finite(q) => {
            let n = x.dim() as f64;
            let spectra: Vec<Vec<f64>> = x.mats().iter().map(spectral::singular_values).collect();
            let floor = SV_RANK_TOL * spectra.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
            let total: f64 = spectra
                .iter()
                .zip(x.space().weights())
                .map(|(s, &w)| {
                    w / n * s.iter().filter(|&&v| v > floor).map(|v| v.powf(q)).sum::<f64>()
                })
                .sum();
            total.powf(1.0 / q)
        }
    }
}

/// Singular values at or below this fraction of the largest one count as
/// zero; otherwise rounding noise dominates `σ^p` for small `p`.
pub const SV_RANK_TOL: f64 = 1e-14;
/// Eigenvalue analogue of [`SV_RANK_TOL`] for squares, where rounding noise
/// sits at `1e-16·λ_max` and `λ^{p/2}` amplifies it.
pub const EIG_RANK_TOL: f64 = 1e-12;

/// `‖A^{1/2}‖_p` for a positive operator `A` given through its square,
/// computed from eigenvalues; see [`EIG_RANK_TOL`].
pub fn psd_sqrt_lp(sq: &Operator, p: Exponent) -> f64 {
    match p {
        Exponent::Inf => psd_max_eigenvalue(sq).max(0.0).sqrt(),
        Exponent::Finite(q) => {
            let n = sq.dim() as f64;
            let spectra: Vec<Vec<f64>> = sq.mats().iter().map(spectral::herm_eigenvalues).collect();
            let floor = EIG_RANK_TOL * spectra.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
            let total: f64 = spectra
                .iter()
                .zip(sq.space().weights())
                .map(|(l, &w)| {
                    w / n * l.iter().filter(|&&v| v > floor).map(|v| v.powf(q / 2.0)).sum::<f64>()
                })
                .sum();
            total.powf(1.0 / q)
        }
    }
}

/// Largest eigenvalue of a Hermitian operator over all sites.
pub fn psd_max_eigenvalue(a: &Operator) -> f64 {
    a.mats()
        .iter()
        .map(|m| *spectral::herm_eigenvalues(m).last().expect("non-empty"))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `S_c(x)² = Σ_k |dx_k|²`.
pub fn sc_squared(x: &Operator) -> Operator {
    x.diffs()
        .iter()
        .fold(Operator::zero(x.space()), |acc, d| &acc + &d.abs_sq())
}

/// `s_c(x)² = Σ_k E_{k−1}|dx_k|²` with `E_0 = E_1`.
pub fn cond_sc_squared(x: &Operator) -> Operator {
    let diffs = x.diffs();
    let mut acc = Operator::zero(x.space());
    for k in 1..=diffs.len() {
        let term = diffs.get(k).abs_sq().cond_exp_unchecked((k - 1).max(1));
        acc = &acc + &term;
    }
    acc
}

#[derive(Debug, Clone)]
pub struct SquareFunctions {
    /// `S_c(x)`
    pub sc: Operator,
    /// `s_c(x)`
    pub cond_sc: Operator,
    /// `S_r(x) = S_c(x*)`
    pub sr: Operator,
    /// `s_r(x) = s_c(x*)`
    pub cond_sr: Operator,
}

pub fn square_functions(x: &Operator) -> Result<SquareFunctions> {
    let xs = x.adjoint();
    Ok(SquareFunctions {
        sc: sc_squared(x).herm_calculus(SpectralFn::Sqrt)?,
        cond_sc: cond_sc_squared(x).herm_calculus(SpectralFn::Sqrt)?,
        sr: sc_squared(&xs).herm_calculus(SpectralFn::Sqrt)?,
        cond_sr: cond_sc_squared(&xs).herm_calculus(SpectralFn::Sqrt)?,
    })
}

/// Hardy-type norms: `Hc = ‖S_c‖_p`, `hc = ‖s_c‖_p`, row versions via
/// `x*`, and `hd = (Σ_k ‖dx_k‖_p^p)^{1/p}` (`sup_k ‖dx_k‖_∞` for `p = ∞`).
pub fn hardy_norm(x: &Operator, family: NormFamily, p: Exponent) -> Result<f64> {
    if let Exponent::Finite(q) = p {
        if !(q > 0.0) {
            return Err(NcError::InvalidArgument(format!("p must be positive, got {q}")));
        }
    }
    Ok(match family {
        NormFamily::Hc => psd_sqrt_lp(&sc_squared(x), p),
        NormFamily::Hr => psd_sqrt_lp(&sc_squared(&x.adjoint()), p),
        NormFamily::HcCond => psd_sqrt_lp(&cond_sc_squared(x), p),
        NormFamily::HrCond => psd_sqrt_lp(&cond_sc_squared(&x.adjoint()), p),
        NormFamily::Hd => {
            let diffs = x.diffs();
            match p {
                Exponent::Inf => diffs.iter().map(Operator::norm_inf).fold(0.0, f64::max),
                Exponent::Finite(q) => diffs
                    .iter()
                    .map(|d| lp_from_singular_values(d, p).powf(q))
                    .sum::<f64>()
                    .powf(1.0 / q),
            }
        }
        other => {
            return Err(NcError::InvalidArgument(format!(
                "`{}` is not a Hardy family",
                other.tag()
            )))
        }
    })
}

/// `‖E_n|x − x_n|²‖_∞^{1/2}` for `n = 1..=K` (index `n − 1`).
pub fn bmo_c_level_terms(x: &Operator) -> Vec<f64> {
    let mart = x.martingale();
    (1..mart.len())
        .map(|n| {
            let r = x - &mart[n];
            psd_max_eigenvalue(&r.abs_sq().cond_exp_unchecked(n)).max(0.0).sqrt()
        })
        .collect()
}

/// `‖E_n|x − x_{n−1}|²‖_∞^{1/2}` for `n = 1..=K` (index `n − 1`).
pub fn big_bmo_c_level_terms(x: &Operator) -> Vec<f64> {
    let mart = x.martingale();
    (1..mart.len())
        .map(|n| {
            let r = x - &mart[n - 1];
            psd_max_eigenvalue(&r.abs_sq().cond_exp_unchecked(n)).max(0.0).sqrt()
        })
        .collect()
}

/// First index attaining the maximum up to a relative `1e-12`.
fn argmax_with_ties(values: &[(usize, f64)]) -> (usize, f64) {
    let best = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * best.abs().max(1.0);
    values
        .iter()
        .copied()
        .find(|v| v.1 >= best - tol)
        .map(|(l, _)| (l, best))
        .unwrap_or((1, 0.0))
}

fn bmo_c_report(x: &Operator) -> (f64, usize) {
    let e1 = x.cond_exp_unchecked(1).norm_inf();
    let mut terms: Vec<(usize, f64)> = bmo_c_level_terms(x)
        .into_iter()
        .enumerate()
        .map(|(i, v)| (i + 1, v))
        .collect();
    terms.push((1, e1));
    let (level, value) = argmax_with_ties(&terms);
    (value, level)
}

fn big_bmo_c_report(x: &Operator) -> (f64, usize) {
    let terms: Vec<(usize, f64)> = big_bmo_c_level_terms(x)
        .into_iter()
        .enumerate()
        .map(|(i, v)| (i + 1, v))
        .collect();
    let (level, value) = argmax_with_ties(&terms);
    (value, level)
}

fn bmo_d_report(x: &Operator) -> (f64, usize) {
    let terms: Vec<(usize, f64)> = x
        .diffs()
        .iter()
        .enumerate()
        .map(|(i, d)| (i + 1, d.norm_inf()))
        .collect();
    let (level, value) = argmax_with_ties(&terms);
    (value, level)
}

/// BMO-type norms with the level attaining the supremum.
///
/// `bmo_c = max(‖E_1 x‖_∞, sup_n ‖E_n|x − x_n|²‖^{1/2})`,
/// `BMO_c = sup_n ‖E_n|x − x_{n−1}|²‖^{1/2}`, `bmo_d = sup_n ‖dx_n‖_∞`;
/// combined norms take the maximum of their components.
pub fn bmo_norm(x: &Operator, family: NormFamily) -> Result<NormReport> {
    let xs = x.adjoint();
    let (value, level) = match family {
        NormFamily::BmoC => bmo_c_report(x),
        NormFamily::BmoR => bmo_c_report(&xs),
        NormFamily::BmoD => bmo_d_report(x),
        NormFamily::Bmo => {
            let parts = [bmo_c_report(x), bmo_c_report(&xs), bmo_d_report(x)];
            let tagged: Vec<(usize, f64)> = parts.iter().map(|&(v, l)| (l, v)).collect();
            let (l, v) = argmax_with_ties(&tagged);
            (v, l)
        }
        NormFamily::BigBmoC => big_bmo_c_report(x),
        NormFamily::BigBmoR => big_bmo_c_report(&xs),
        NormFamily::BigBmo => {
            let parts = [big_bmo_c_report(x), big_bmo_c_report(&xs)];
            let tagged: Vec<(usize, f64)> = parts.iter().map(|&(v, l)| (l, v)).collect();
            let (l, v) = argmax_with_ties(&tagged);
            (v, l)
        }
        other => {
            return Err(NcError::InvalidArgument(format!(
                "`{}` is not a BMO family",
                other.tag()
            )))
        }
    };
    Ok(NormReport {
        family,
        p: Exponent::Inf,
        value,
        argmax_level: Some(level),
    })
}

pub fn bmo_c(x: &Operator) -> f64 {
    bmo_c_report(x).0
}

pub fn bmo_r(x: &Operator) -> f64 {
    bmo_c_report(&x.adjoint()).0
}

pub fn bmo_d(x: &Operator) -> f64 {
    bmo_d_report(x).0
}

pub fn big_bmo_c(x: &Operator) -> f64 {
    big_bmo_c_report(x).0
}

pub fn big_bmo_r(x: &Operator) -> f64 {
    big_bmo_c_report(&x.adjoint()).0
}

/// Upper bound for the sum-space norms `h_1` (family `h1_upper`) and
/// `H_1` (family `H1_upper`): the smallest single-component norm, each of
/// which comes from a feasible trivial decomposition.
pub fn h1_upper(x: &Operator, family: NormFamily) -> Result<f64> {
    let one = Exponent::Finite(1.0);
    match family {
        NormFamily::H1UpperCond => Ok([
            hardy_norm(x, NormFamily::HcCond, one)?,
            hardy_norm(x, NormFamily::HrCond, one)?,
            hardy_norm(x, NormFamily::Hd, one)?,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)),
        NormFamily::H1Upper => Ok(hardy_norm(x, NormFamily::Hc, one)?
            .min(hardy_norm(x, NormFamily::Hr, one)?)),
        other => Err(NcError::InvalidArgument(format!(
            "`{}` is not an h1 family",
            other.tag()
        ))),
    }
}

/// Evaluate any family into a [`NormReport`].
pub fn evaluate(x: &Operator, family: NormFamily, p: Exponent) -> Result<NormReport> {
    let (value, argmax_level, p) = match family {
        NormFamily::Lp => (lp_norm(x, p)?, None, p),
        NormFamily::Op => (x.norm_inf(), None, Exponent::Inf),
        NormFamily::Hc | NormFamily::Hr | NormFamily::HcCond | NormFamily::HrCond | NormFamily::Hd => {
            (hardy_norm(x, family, p)?, None, p)
        }
        NormFamily::H1UpperCond | NormFamily::H1Upper => {
            (h1_upper(x, family)?, None, Exponent::Finite(1.0))
        }
        _ => return bmo_norm(x, family),
    };
    Ok(NormReport {
        family,
        p,
        value,
        argmax_level,
    })
}
