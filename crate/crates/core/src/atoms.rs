//! Atoms for the `h_1`-type spaces: crude atoms `a = y b`, projection atoms
//! supported by a projection `e`, and plain `(1, q)`-atoms; validators,
//! the conversion from projection atoms to crude ones, and the checkable
//! halves of the duality lemmas.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::{NcError, Result};
use crate::jn::{bmo_c2_exact, Side};
use crate::norms::{self, Exponent, NormFamily};
use crate::operator::{Operator, ProjectionWitness, SpectralFn};
use crate::sampling::{self, ProjectionSpec};
use crate::space::TraceSpace;

pub const ATOM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomKind {
    CrudeC,
    CrudeR,
    PrC,
    PrR,
    Plain,
}

impl AtomKind {
    pub fn tag(&self) -> &'static str {
        match self {
            AtomKind::CrudeC => "crude_c",
            AtomKind::CrudeR => "crude_r",
            AtomKind::PrC => "pr_c",
            AtomKind::PrR => "pr_r",
            AtomKind::Plain => "plain",
        }
    }
}

impl fmt::Display for AtomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone)]
pub enum AtomPayload {
    /// `a = y b` (column) or `a = b y` (row).
    Crude { y: Operator, b: Operator },
    /// Support projection and the side it acts on.
    Projection { e: ProjectionWitness, side: Side },
}

#[derive(Debug, Clone, Serialize)]
pub struct AtomCheck {
    pub name: String,
    /// `value / bound` for inequalities, relative defect for identities.
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct AtomCertificate {
    pub kind: AtomKind,
    pub q: Exponent,
    pub level: usize,
    pub payload: Option<AtomPayload>,
    pub checks: Vec<AtomCheck>,
}

impl AtomCertificate {
    pub fn new(kind: AtomKind, q: Exponent, level: usize, payload: AtomPayload) -> Self {
        Self {
            kind,
            q,
            level,
            payload: Some(payload),
            checks: Vec::new(),
        }
    }

    /// True when validated and every check passed.
    pub fn valid(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn max_residual(&self, name: &str) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.name == name)
            .map(|c| c.residual)
            .reduce(f64::max)
    }

    pub fn to_json(&self) -> Value {
        let payload = match &self.payload {
            None => Value::Null,
            Some(AtomPayload::Crude { y, b }) => json!({
                "y": y.mats_json(),
                "b": b.mats_json(),
            }),
            Some(AtomPayload::Projection { e, side }) => json!({
                "e": e.proj().mats_json(),
                "side": side,
            }),
        };
        json!({
            "kind": self.kind,
            "q": self.q,
            "level": self.level,
            "payload": payload,
            "checks": self.checks,
            "valid": self.valid(),
        })
    }
}

impl Serialize for AtomCertificate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

fn bound_check(name: &str, value: f64, bound: f64) -> AtomCheck {
    let residual = if value == 0.0 {
        0.0
    } else if bound > 0.0 {
        value / bound
    } else {
        f64::INFINITY
    };
    AtomCheck {
        name: name.into(),
        residual,
        passed: residual <= 1.0 + ATOM_TOL,
    }
}

fn identity_check(name: &str, defect: f64, scale: f64) -> AtomCheck {
    let residual = if defect == 0.0 {
        0.0
    } else {
        defect / if scale > 0.0 { scale } else { 1.0 }
    };
    AtomCheck {
        name: name.into(),
        residual,
        passed: residual <= ATOM_TOL,
    }
}

/// `‖y‖` in the column Hardy norm of the atom definitions: `h^c_q` for
/// finite `q`, `bmo_c` for `q = ∞`.
fn column_size(y: &Operator, q: Exponent) -> Result<f64> {
    match q {
        Exponent::Inf => Ok(norms::bmo_c(y)),
        p => norms::hardy_norm(y, NormFamily::HcCond, p),
    }
}

fn check_q(q: Exponent) -> Result<()> {
    match q {
        Exponent::Finite(v) if !(v > 1.0) => Err(NcError::InvalidArgument(format!(
            "atoms need q > 1, got {v}"
        ))),
        _ => Ok(()),
    }
}

/// Runs every defining condition of `cert.kind` on `a` and returns the
/// certificate with its checks filled in.
pub fn validate_atom(a: &Operator, cert: &AtomCertificate) -> Result<AtomCertificate> {
    check_q(cert.q)?;
    let space = a.space();
    let level = space.check_level(cert.level)?;
    let payload = cert
        .payload
        .as_ref()
        .ok_or_else(|| NcError::MalformedCertificate("missing payload".into()))?;
    let q = cert.q;
    let qc = q.conjugate()?;
    let scale = a.norm_inf();
    let mut checks = Vec::new();
    match (cert.kind, payload) {
        (AtomKind::CrudeC | AtomKind::CrudeR, AtomPayload::Crude { y, b }) => {
            if y.space() != space || b.space() != space {
                return Err(NcError::DimensionMismatch("payload on a different space".into()));
            }
            let row = cert.kind == AtomKind::CrudeR;
            // The row kind is the column kind for the adjoints.
            let (y, b, a) = if row {
                (y.adjoint(), b.adjoint(), a.adjoint())
            } else {
                (y.clone(), b.clone(), a.clone())
            };
            let ys = y.norm_inf();
            checks.push(identity_check(
                "E_n y = 0",
                y.cond_exp_unchecked(level).norm_inf(),
                ys,
            ));
            checks.push(identity_check(
                "b measurable",
                b.measurability_defect(level)?,
                b.norm_inf(),
            ));
            checks.push(bound_check("‖b‖_q' ≤ 1", norms::lp_norm(&b, qc)?, 1.0));
            checks.push(bound_check("‖y‖ ≤ 1", column_size(&y, q)?, 1.0));
            checks.push(identity_check("a = y b", a.dist_inf(&(&y * &b)), scale.max(ys)));
        }
        (AtomKind::PrC | AtomKind::PrR | AtomKind::Plain, AtomPayload::Projection { e, side }) => {
            if e.proj().space() != space {
                return Err(NcError::DimensionMismatch("projection on a different space".into()));
            }
            let side = match cert.kind {
                AtomKind::PrC => Side::Right,
                AtomKind::PrR => Side::Left,
                _ => *side,
            };
            let proj = e.proj();
            let tau = e.trace_value();
            checks.push(identity_check(
                "e measurable",
                proj.measurability_defect(level)?,
                1.0,
            ));
            checks.push(identity_check(
                "E_n a = 0",
                a.cond_exp_unchecked(level).norm_inf(),
                scale,
            ));
            let supported = match side {
                Side::Right => a.dist_inf(&(a * proj)),
                Side::Left => a.dist_inf(&(proj * a)),
            };
            checks.push(identity_check("support in e", supported, scale));
            let (value, bound) = match cert.kind {
                AtomKind::Plain => (norms::lp_norm(a, q)?, tau.powf(-qc.recip())),
                _ => {
                    let col = if side == Side::Left { a.adjoint() } else { a.clone() };
                    let bound = match q {
                        Exponent::Inf => 1.0 / tau,
                        _ => tau.powf(-qc.recip()),
                    };
                    (column_size(&col, q)?, bound)
                }
            };
            checks.push(bound_check("norm bound", value, bound));
        }
        (kind, _) => {
            return Err(NcError::MalformedCertificate(format!(
                "payload does not match kind {kind}"
            )))
        }
    }
    Ok(AtomCertificate {
        kind: cert.kind,
        q,
        level,
        payload: cert.payload.clone(),
        checks,
    })
}

/// Factor a projection atom as a crude atom: `y = a τ(e)^{1/q'}`,
/// `b = e τ(e)^{−1/q'}`.
pub fn pr_to_crude(a: &Operator, cert: &AtomCertificate) -> Result<AtomCertificate> {
    let checked = validate_atom(a, cert)?;
    if !checked.valid() {
        return Err(NcError::InvalidInput("projection atom certificate is invalid".into()));
    }
    let (e, kind) = match (&cert.kind, &cert.payload) {
        (AtomKind::PrC, Some(AtomPayload::Projection { e, .. })) => (e, AtomKind::CrudeC),
        (AtomKind::PrR, Some(AtomPayload::Projection { e, .. })) => (e, AtomKind::CrudeR),
        _ => {
            return Err(NcError::InvalidInput(format!(
                "expected a projection atom, got {}",
                cert.kind
            )))
        }
    };
    let t = e.trace_value().powf(cert.q.conjugate()?.recip());
    let y = a.scale(t);
    let b = e.proj().scale(1.0 / t);
    validate_atom(
        a,
        &AtomCertificate::new(kind, cert.q, checked.level, AtomPayload::Crude { y, b }),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma42Report {
    /// `‖a‖_{h^c_1}` (`h^r_1` for row atoms).
    pub value: f64,
    /// For `q = ∞`: `(τ((E_n A)^{1/2}), τ(A^{1/2}))` with `A = b* s_c(y)² b`.
    pub jensen: Option<(f64, f64)>,
}

/// `‖a‖_{h^c_1} ≤ 1` for a crude atom.
pub fn lemma_4_2_check(a: &Operator, cert: &AtomCertificate) -> Result<Lemma42Report> {
    let checked = validate_atom(a, cert)?;
    let failure = |detail: String| NcError::AssertionFailure {
        check: "crude_atom_h1".into(),
        detail,
        sample: Box::new(json!({ "a": a.to_json(), "certificate": checked.to_json() })),
    };
    if !checked.valid() {
        return Err(failure("certificate is invalid".into()));
    }
    let (y, b, a_col) = match (&cert.kind, &cert.payload) {
        (AtomKind::CrudeC, Some(AtomPayload::Crude { y, b })) => (y.clone(), b.clone(), a.clone()),
        (AtomKind::CrudeR, Some(AtomPayload::Crude { y, b })) => {
            (y.adjoint(), b.adjoint(), a.adjoint())
        }
        _ => return Err(NcError::InvalidInput("expected a crude atom".into())),
    };
    let value = norms::hardy_norm(&a_col, NormFamily::HcCond, Exponent::Finite(1.0))?;
    if value > 1.0 + ATOM_TOL {
        return Err(failure(format!("‖a‖_h1 = {value}")));
    }
    let jensen = if cert.q.is_inf() {
        let big_a = &(&b.adjoint() * &norms::cond_sc_squared(&y)) * &b;
        let root_trace = |m: &Operator| -> Result<f64> {
            Ok(m.herm_calculus(SpectralFn::Sqrt)?.trace().re)
        };
        let lhs = root_trace(&big_a.cond_exp_unchecked(checked.level))?;
        let rhs = root_trace(&big_a)?;
        if lhs < rhs - 1e-9 * rhs.abs().max(1.0) {
            return Err(failure(format!("Jensen step: {lhs} < {rhs}")));
        }
        Some((lhs, rhs))
    } else {
        None
    };
    Ok(Lemma42Report { value, jensen })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceKind {
    Atom,
    /// Unit-ball element of `L_1(M_1)`.
    L1First,
}

#[derive(Debug, Clone, Serialize)]
pub struct Piece {
    pub coefficient: f64,
    pub kind: PieceKind,
    #[serde(serialize_with = "ser_op")]
    pub element: Operator,
    pub certificate: Option<AtomCertificate>,
    /// `‖element‖_1`, which must be at most one for `L1First` pieces.
    pub l1_norm: f64,
}

fn ser_op<S: Serializer>(x: &Operator, s: S) -> std::result::Result<S::Ok, S::Error> {
    x.mats_json().serialize(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub q: Exponent,
    pub pieces: Vec<Piece>,
    pub coefficient_sum: f64,
    /// Scale factor applied to the atom (`‖y‖_{h^c_q} / ‖y‖_q` when above one).
    pub c_q: f64,
    pub resum_defect: f64,
}

/// `x = ‖d‖ (d/‖d‖) + ‖E_1 x‖ (E_1 x/‖E_1 x‖)` with `d = x − E_1 x`; the
/// first piece is a crude atom at level 1 with `b = 1`.
pub fn two_atom_decompose(x: &Operator, q: Exponent) -> Result<Decomposition> {
    check_q(q)?;
    let space = x.space();
    let scale = x.norm_inf();
    if scale == 0.0 {
        return Err(NcError::InvalidInput("cannot decompose the zero operator".into()));
    }
    let first = x.cond_exp_unchecked(1);
    let d = x - &first;
    let small = |v: f64| v <= 1e-14 * scale;
    let (norm_q, c_q) = match q {
        Exponent::Finite(v) if v <= 2.0 => (Exponent::Finite(2.0), 1.0),
        Exponent::Finite(_) => {
            let lq = norms::lp_norm(&d, q)?;
            let hq = norms::hardy_norm(&d, NormFamily::HcCond, q)?;
            (q, if lq > 0.0 { (hq / lq).max(1.0) } else { 1.0 })
        }
        Exponent::Inf => (Exponent::Inf, 1.0),
    };
    let mut pieces = Vec::new();
    if !small(d.norm_inf()) {
        let coefficient = c_q * norms::lp_norm(&d, norm_q)?;
        let y = d.scale(1.0 / coefficient);
        let cert = validate_atom(
            &y,
            &AtomCertificate::new(
                AtomKind::CrudeC,
                q,
                1,
                AtomPayload::Crude {
                    y: y.clone(),
                    b: Operator::identity(space),
                },
            ),
        )?;
        if !cert.valid() {
            return Err(NcError::AssertionFailure {
                check: "two_atom_decompose".into(),
                detail: "atom piece failed validation".into(),
                sample: Box::new(json!({ "x": x.to_json(), "certificate": cert.to_json() })),
            });
        }
        pieces.push(Piece {
            coefficient,
            kind: PieceKind::Atom,
            l1_norm: norms::lp_norm(&y, Exponent::Finite(1.0))?,
            element: y,
            certificate: Some(cert),
        });
    }
    if !small(first.norm_inf()) {
        let coefficient = norms::lp_norm(&first, norm_q)?;
        let element = first.scale(1.0 / coefficient);
        let l1_norm = norms::lp_norm(&element, Exponent::Finite(1.0))?;
        if l1_norm > 1.0 + ATOM_TOL || element.measurability_defect(1)? > 1e-12 {
            return Err(NcError::AssertionFailure {
                check: "two_atom_decompose".into(),
                detail: format!("L_1(M_1) piece has norm {l1_norm}"),
                sample: Box::new(json!({ "x": x.to_json() })),
            });
        }
        pieces.push(Piece {
            coefficient,
            kind: PieceKind::L1First,
            element,
            certificate: None,
            l1_norm,
        });
    }
    let resum = pieces.iter().fold(Operator::zero(space), |acc, p| {
        &acc + &p.element.scale(p.coefficient)
    });
    let resum_defect = resum.dist_inf(x) / scale;
    Ok(Decomposition {
        q,
        coefficient_sum: pieces.iter().map(|p| p.coefficient).sum(),
        pieces,
        c_q,
        resum_defect,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingReport {
    /// `|τ(x* a)|`
    pub lhs: f64,
    /// `bmo_c(x)`, computed exactly through the `p = 2` functional.
    pub rhs: f64,
}

/// `|τ(x* a)| ≤ bmo_c(x)` for a crude column atom with `q = 2`.
pub fn pairing_bound_check(x: &Operator, a: &Operator, cert: &AtomCertificate) -> Result<PairingReport> {
    if cert.kind != AtomKind::CrudeC || cert.q != Exponent::Finite(2.0) {
        return Err(NcError::InvalidInput("pairing check needs a crude_c atom with q = 2".into()));
    }
    let checked = validate_atom(a, cert)?;
    if !checked.valid() {
        return Err(NcError::InvalidInput("atom certificate is invalid".into()));
    }
    let lhs = (&x.adjoint() * a).trace().norm();
    let rhs = bmo_c2_exact(x)?.lower_bound;
    if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
        return Err(NcError::AssertionFailure {
            check: "pairing_bound".into(),
            detail: format!("|τ(x*a)| = {lhs} > bmo_c(x) = {rhs}"),
            sample: Box::new(json!({ "x": x.to_json(), "a": a.to_json() })),
        });
    }
    Ok(PairingReport { lhs, rhs })
}

/// `h1_upper(a)·(q − 1)/q` for a plain atom; reported, not bounded.
pub fn lemma_4_16_check(a: &Operator, cert: &AtomCertificate) -> Result<f64> {
    if cert.kind != AtomKind::Plain {
        return Err(NcError::InvalidInput("expected a plain atom".into()));
    }
    check_q(cert.q)?;
    let factor = match cert.q {
        Exponent::Inf => 1.0,
        Exponent::Finite(q) => (q - 1.0) / q,
    };
    Ok(norms::h1_upper(a, NormFamily::H1UpperCond)? * factor)
}

fn random_level<R: Rng + ?Sized>(rng: &mut R, space: &TraceSpace) -> usize {
    let k = space.levels();
    if k == 1 {
        1
    } else {
        rng.random_range(1..k)
    }
}

fn random_support<R: Rng + ?Sized>(
    rng: &mut R,
    space: &Arc<TraceSpace>,
    level: usize,
) -> Result<ProjectionWitness> {
    let profile = sampling::random_rank_profile(rng, space, level);
    let spec = ProjectionSpec::random(rng, space, level, &profile)?;
    ProjectionWitness::new(level, spec.to_operator(space))
}

/// Boundary-tight projection atom (`pr_c`, `pr_r` or `plain` with the
/// given side): `a = (a' − E_n a') e` rescaled to equality in the bound.
pub fn random_projection_atom<R: Rng + ?Sized>(
    rng: &mut R,
    space: &Arc<TraceSpace>,
    kind: AtomKind,
    q: Exponent,
    side: Side,
) -> Result<(Operator, AtomCertificate)> {
    check_q(q)?;
    let side = match kind {
        AtomKind::PrC => Side::Right,
        AtomKind::PrR => Side::Left,
        AtomKind::Plain => side,
        _ => return Err(NcError::InvalidArgument(format!("{kind} is not a projection atom"))),
    };
    let level = random_level(rng, space);
    let e = random_support(rng, space, level)?;
    let g = sampling::random_operator(rng, space, 1.0, false);
    let g = &g - &g.cond_exp_unchecked(level);
    let raw = match side {
        Side::Right => &g * e.proj(),
        Side::Left => e.proj() * &g,
    };
    let tau = e.trace_value();
    let qc = q.conjugate()?;
    let (size, bound) = match kind {
        AtomKind::Plain => (norms::lp_norm(&raw, q)?, tau.powf(-qc.recip())),
        _ => {
            let col = if side == Side::Left { raw.adjoint() } else { raw.clone() };
            let bound = if q.is_inf() { 1.0 / tau } else { tau.powf(-qc.recip()) };
            (column_size(&col, q)?, bound)
        }
    };
    let a = if size > 0.0 { raw.scale(bound / size) } else { raw };
    let cert = AtomCertificate::new(kind, q, level, AtomPayload::Projection { e, side });
    Ok((a, cert))
}

/// Boundary-tight crude column atom: `‖y‖ = 1`, `‖b‖_{q'} = 1`.
pub fn random_crude_atom<R: Rng + ?Sized>(
    rng: &mut R,
    space: &Arc<TraceSpace>,
    q: Exponent,
) -> Result<(Operator, AtomCertificate)> {
    check_q(q)?;
    let level = random_level(rng, space);
    let g = sampling::random_operator(rng, space, 1.0, false);
    let y = &g - &g.cond_exp_unchecked(level);
    let ysize = column_size(&y, q)?;
    let y = if ysize > 0.0 { y.scale(1.0 / ysize) } else { y };
    let b = if rng.random_bool(0.5) {
        sampling::random_measurable(rng, space, level, None)
    } else {
        let cell = rng.random_range(0..space.cell_count(level));
        sampling::random_measurable(rng, space, level, Some(&[cell]))
    };
    let b = b.scale(1.0 / norms::lp_norm(&b, q.conjugate()?)?);
    let a = &y * &b;
    let cert = AtomCertificate::new(AtomKind::CrudeC, q, level, AtomPayload::Crude { y, b });
    Ok((a, cert))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> Arc<TraceSpace> {
        Arc::new(TraceSpace::dyadic(3, 2).unwrap())
    }

    #[test]
    fn zero_atom_is_valid_with_zero_residuals() {
        let sp = space();
        let e = ProjectionWitness::identity(&sp);
        let cert = AtomCertificate::new(
            AtomKind::Plain,
            Exponent::Finite(2.0),
            1,
            AtomPayload::Projection { e, side: Side::Right },
        );
        let out = validate_atom(&Operator::zero(&sp), &cert).unwrap();
        assert!(out.valid());
        assert!(out.checks.iter().all(|c| c.residual == 0.0));
    }

    #[test]
    fn doubled_atom_has_residual_two() {
        let sp = space();
        let mut rng = sampling::stream_rng(3, 0);
        let (a, cert) =
            random_projection_atom(&mut rng, &sp, AtomKind::Plain, Exponent::Finite(2.0), Side::Right)
                .unwrap();
        let out = validate_atom(&a.scale(2.0), &cert).unwrap();
        assert!(!out.valid());
        let r = out.max_residual("norm bound").unwrap();
        assert!((r - 2.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn q_at_most_one_rejected() {
        let sp = space();
        let mut rng = sampling::stream_rng(1, 0);
        assert!(random_crude_atom(&mut rng, &sp, Exponent::Finite(1.0)).is_err());
    }

    #[test]
    fn missing_payload_is_malformed() {
        let sp = space();
        let cert = AtomCertificate {
            kind: AtomKind::CrudeC,
            q: Exponent::Finite(2.0),
            level: 1,
            payload: None,
            checks: vec![],
        };
        assert!(matches!(
            validate_atom(&Operator::zero(&sp), &cert),
            Err(NcError::MalformedCertificate(_))
        ));
    }

    #[test]
    fn identity_support_conversion_keeps_a() {
        let sp = space();
        let mut rng = sampling::stream_rng(5, 0);
        let g = sampling::random_operator(&mut rng, &sp, 1.0, false);
        let a = &g - &g.cond_exp_unchecked(1);
        let size = norms::hardy_norm(&a, NormFamily::HcCond, Exponent::Finite(2.0)).unwrap();
        let a = a.scale(1.0 / size);
        let cert = AtomCertificate::new(
            AtomKind::PrC,
            Exponent::Finite(2.0),
            1,
            AtomPayload::Projection {
                e: ProjectionWitness::identity(&sp),
                side: Side::Right,
            },
        );
        let crude = pr_to_crude(&a, &cert).unwrap();
        assert!(crude.valid());
        match crude.payload {
            Some(AtomPayload::Crude { y, b }) => {
                assert!(y.dist_inf(&a) < 1e-15);
                assert!(b.dist_inf(&Operator::identity(&sp)) < 1e-15);
            }
            _ => panic!("expected crude payload"),
        }
    }

    #[test]
    fn constant_x_gives_single_first_piece() {
        let sp = space();
        let x = Operator::identity(&sp).scale(3.0);
        let d = two_atom_decompose(&x, Exponent::Finite(2.0)).unwrap();
        assert_eq!(d.pieces.len(), 1);
        assert!(matches!(d.pieces[0].kind, PieceKind::L1First));
        assert!((d.pieces[0].coefficient - 3.0).abs() < 1e-12);
    }
}
