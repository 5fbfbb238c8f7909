//! Evaluation of one functional component at one level.
//!
//! Two routes are kept apart on purpose. [`evaluate_definition`] forms the
//! product `(x − x_m) b` (or `b (x − x_m)`) and runs it through the generic
//! norm code. [`LevelEval`] precomputes level data so a deflator `a` of the
//! level subalgebra costs one sitewise product: `s_c(y a)² = a* T a` with
//! `T = s_c(y)²` when `E_n y = 0`, and `S_c(y a)² = S_c(E_n(y) a)² + a* Q a`
//! with `Q = Σ_{k>n} |dy_k|²` in general.

use serde::{Deserialize, Serialize};

use super::{Deflator, DeflatorClass, Side};
use crate::error::{NcError, Result};
use crate::norms::{self, Exponent, NormFamily};
use crate::operator::Operator;
use crate::space::TraceSpace;
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `L_p`
    Lp,
    /// Conditional square function, `h^c_p`.
    HcCond,
    /// Full square function, `H^c_p`.
    HcFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub side: Side,
    /// `0` for `x − x_n`, `1` for `x − x_{n−1}`.
    pub lag: usize,
    pub norm: NormKind,
    pub class: DeflatorClass,
}

impl Component {
    /// Levels at which the component is nonzero in general.
    pub fn levels(&self, space: &TraceSpace) -> Vec<usize> {
        let k = space.levels();
        if self.lag == 0 {
            (1..k).collect()
        } else {
            (1..=k).collect()
        }
    }

    /// The element whose column quantity is measured: `x` or `x*`.
    pub(crate) fn column_base(&self, x: &Operator) -> Operator {
        match self.side {
            Side::Right => x.clone(),
            Side::Left => x.adjoint(),
        }
    }

    /// Converts between the multiplier `b` and its column form; the map is
    /// an involution.
    pub(crate) fn flip(&self, b: &Operator) -> Operator {
        match self.side {
            Side::Right => b.clone(),
            Side::Left => b.adjoint(),
        }
    }
}

#[derive(Debug, Clone)]
enum LevelData {
    Lp,
    Cond { t: Operator },
    Full { head: Operator, q: Operator },
}

/// Precomputed data for one `(component, level)` pair, in column form.
#[derive(Debug, Clone)]
pub(crate) struct LevelEval {
    pub comp: Component,
    pub level: usize,
    pub y: Operator,
    data: LevelData,
}

impl LevelEval {
    pub fn new(base: &Operator, mart: &[Operator], comp: Component, level: usize) -> Self {
        let y = base - &mart[level - comp.lag];
        let data = match comp.norm {
            NormKind::Lp => LevelData::Lp,
            NormKind::HcCond => {
                debug_assert_eq!(comp.lag, 0);
                LevelData::Cond {
                    t: norms::cond_sc_squared(&y),
                }
            }
            NormKind::HcFull => {
                let head = y.cond_exp_unchecked(level);
                let q = norms::sc_squared(&(&y - &head));
                LevelData::Full { head, q }
            }
        };
        Self {
            comp,
            level,
            y,
            data,
        }
    }

    /// Per-site terms `μ_s tr(A_s^{p/2})/n` at `a = 1`, where `A` is the
    /// squared integrand of the component. Exact per cell for the additive
    /// kinds; for `HcFull` only a ranking heuristic.
    pub fn site_terms(&self, p: f64) -> Vec<f64> {
        let sq = match &self.data {
            LevelData::Lp => self.y.abs_sq(),
            LevelData::Cond { t } => t.clone(),
            LevelData::Full { head, q } => &head.abs_sq() + q,
        };
        let n = sq.dim() as f64;
        sq.mats()
            .iter()
            .zip(sq.space().weights())
            .map(|(m, &w)| {
                w / n
                    * spectral::herm_eigenvalues(m)
                        .iter()
                        .map(|v| v.max(0.0).powf(p / 2.0))
                        .sum::<f64>()
            })
            .collect()
    }

    /// `‖y a‖` in the component norm, without normalization.
    pub fn raw(&self, a: &Operator, p: Exponent) -> f64 {
        match &self.data {
            LevelData::Lp => norms::lp_norm(&(&self.y * a), p).unwrap_or(f64::NAN),
            LevelData::Cond { t } => norms::psd_sqrt_lp(&(&(&a.adjoint() * t) * a), p),
            LevelData::Full { head, q } => {
                let w = head * a;
                let sq = &norms::sc_squared(&w) + &(&(&a.adjoint() * q) * a);
                norms::psd_sqrt_lp(&sq, p)
            }
        }
    }
}

/// Value of one component at `level` for the deflator `b`, computed from
/// the norm definitions: the norm of the product divided by `‖b‖_p`
/// (general deflators) or `τ(e)^{1/p}` (projections).
pub fn evaluate_definition(
    x: &Operator,
    comp: &Component,
    level: usize,
    deflator: &Deflator,
    p: Exponent,
) -> Result<f64> {
    let space = x.space();
    if !comp.levels(space).contains(&level) {
        return Err(NcError::LevelOutOfRange {
            level,
            levels: space.levels(),
        });
    }
    let b = deflator.operator();
    if b.space() != space {
        return Err(NcError::DimensionMismatch(
            "deflator lives on a different space".into(),
        ));
    }
    if !b.is_measurable(level)? {
        return Err(NcError::InvalidInput(format!(
            "deflator is not measurable at level {level}"
        )));
    }
    let scale = match deflator {
        Deflator::General(a) => norms::lp_norm(a, p)?,
        Deflator::Projection(e) => e.trace_value().powf(p.recip()),
    };
    if !(scale > 0.0) {
        return Err(NcError::InvalidInput("deflator has zero norm".into()));
    }
    let mart = x.martingale();
    let y = x - &mart[level - comp.lag];
    let prod = match comp.side {
        Side::Right => &y * b,
        Side::Left => b * &y,
    };
    let family = match (comp.norm, comp.side) {
        (NormKind::Lp, _) => NormFamily::Lp,
        (NormKind::HcCond, Side::Right) => NormFamily::HcCond,
        (NormKind::HcCond, Side::Left) => NormFamily::HrCond,
        (NormKind::HcFull, Side::Right) => NormFamily::Hc,
        (NormKind::HcFull, Side::Left) => NormFamily::Hr,
    };
    let value = match family {
        NormFamily::Lp => norms::lp_norm(&prod, p)?,
        f => norms::hardy_norm(&prod, f, p)?,
    };
    Ok(value / scale)
}
