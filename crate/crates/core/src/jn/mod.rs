//! John–Nirenberg functionals.
//!
//! Each functional is a supremum over levels `n` and deflators (elements
//! `a` of the level-`n` subalgebra in the `L_p` unit ball, or normalized
//! projections `e/τ(e)^{1/p}`) of a norm of `(x − x_n)a`, `a(x − x_n)` or
//! their `x_{n−1}` analogues, possibly together with an explicit term such
//! as `‖E_1 x‖_∞`. Only `p = 2` is computed exactly; for other exponents the
//! search returns a certified lower bound together with a witness that
//! reproduces it.

mod directions;
mod eval;
mod exact;
mod holder;
mod search;
mod tail;

use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{NcError, Result};
use crate::norms::Exponent;
use crate::operator::{Operator, ProjectionWitness};

pub use directions::{check_constant_free_directions, DirectionCheck, DirectionReport};
pub use eval::{evaluate_definition, Component, NormKind};
pub use exact::{bmo_c2_exact, exact_p2};
pub use holder::{holder_chain_check, holder_witness, HolderChain};
pub use search::{jn_lower_bound, jn_lower_bound_with_hints, Hint};
pub use tail::{distribution_tail, TailCurve, TailMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Functional {
    #[serde(rename = "bmo_c_p")]
    BmoCP,
    #[serde(rename = "bmo_r_p")]
    BmoRP,
    #[serde(rename = "bmo_c_p_pr")]
    BmoCPPr,
    #[serde(rename = "bmo_r_p_pr")]
    BmoRPPr,
    #[serde(rename = "BMO_c_p")]
    BigBmoCP,
    #[serde(rename = "BMO_r_p")]
    BigBmoRP,
    #[serde(rename = "b_p")]
    SmallB,
    #[serde(rename = "B_p")]
    BigB,
    #[serde(rename = "Pb_p")]
    ProjSmallB,
    #[serde(rename = "PB_p")]
    ProjBigB,
}

impl Functional {
    pub const ALL: [Functional; 10] = [
        Functional::BmoCP,
        Functional::BmoRP,
        Functional::BmoCPPr,
        Functional::BmoRPPr,
        Functional::BigBmoCP,
        Functional::BigBmoRP,
        Functional::SmallB,
        Functional::BigB,
        Functional::ProjSmallB,
        Functional::ProjBigB,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Functional::BmoCP => "bmo_c_p",
            Functional::BmoRP => "bmo_r_p",
            Functional::BmoCPPr => "bmo_c_p_pr",
            Functional::BmoRPPr => "bmo_r_p_pr",
            Functional::BigBmoCP => "BMO_c_p",
            Functional::BigBmoRP => "BMO_r_p",
            Functional::SmallB => "b_p",
            Functional::BigB => "B_p",
            Functional::ProjSmallB => "Pb_p",
            Functional::ProjBigB => "PB_p",
        }
    }

    pub fn components(&self) -> Vec<Component> {
        use DeflatorClass::{General, Projection};
        use NormKind::{HcCond, HcFull, Lp};
        use Side::{Left, Right};
        let one = |side, lag, norm, class| Component {
            side,
            lag,
            norm,
            class,
        };
        match self {
            Functional::BmoCP => vec![one(Right, 0, HcCond, General)],
            Functional::BmoRP => vec![one(Left, 0, HcCond, General)],
            Functional::BmoCPPr => vec![one(Right, 0, HcCond, Projection)],
            Functional::BmoRPPr => vec![one(Left, 0, HcCond, Projection)],
            Functional::BigBmoCP => vec![one(Right, 1, HcFull, General)],
            Functional::BigBmoRP => vec![one(Left, 1, HcFull, General)],
            Functional::SmallB => vec![one(Right, 0, Lp, General), one(Left, 0, Lp, General)],
            Functional::BigB => vec![one(Right, 1, Lp, General), one(Left, 1, Lp, General)],
            Functional::ProjSmallB => {
                vec![one(Right, 0, Lp, Projection), one(Left, 0, Lp, Projection)]
            }
            Functional::ProjBigB => {
                vec![one(Right, 1, Lp, Projection), one(Left, 1, Lp, Projection)]
            }
        }
    }

    /// The explicit, deflator-free term of the functional.
    pub fn term(&self) -> Option<TermKind> {
        match self {
            Functional::BmoCP | Functional::BmoCPPr => Some(TermKind::FirstExpectation),
            Functional::BmoRP | Functional::BmoRPPr => Some(TermKind::FirstExpectation),
            Functional::SmallB | Functional::ProjSmallB => Some(TermKind::DifferenceSup),
            _ => None,
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Functional {
    type Err = NcError;

    fn from_str(s: &str) -> Result<Self> {
        Functional::ALL
            .iter()
            .copied()
            .find(|f| f.tag() == s.trim())
            .ok_or_else(|| NcError::InvalidArgument(format!("unknown functional `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// The deflator multiplies from the right: `(x − x_m) b`.
    Right,
    /// The deflator multiplies from the left: `b (x − x_m)`.
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeflatorClass {
    General,
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    /// `‖E_1 x‖_∞`
    FirstExpectation,
    /// `sup_n ‖dx_n‖_∞`
    DifferenceSup,
}

impl TermKind {
    pub fn evaluate(&self, x: &Operator) -> (f64, usize) {
        match self {
            TermKind::FirstExpectation => (x.cond_exp_unchecked(1).norm_inf(), 1),
            TermKind::DifferenceSup => {
                let mut best = (0.0, 1);
                for (i, d) in x.diffs().iter().enumerate() {
                    let v = d.norm_inf();
                    if v > best.0 {
                        best = (v, i + 1);
                    }
                }
                best
            }
        }
    }
}

/// A deflator: either a general element (normalized by its `L_p` norm when
/// evaluated) or a projection (normalized by `τ(e)^{1/p}`).
#[derive(Debug, Clone)]
pub enum Deflator {
    General(Operator),
    Projection(ProjectionWitness),
}

impl Deflator {
    pub fn operator(&self) -> &Operator {
        match self {
            Deflator::General(a) => a,
            Deflator::Projection(e) => e.proj(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Witness {
    Deflator {
        level: usize,
        side: Side,
        deflator: Deflator,
    },
    Term {
        kind: TermKind,
        level: usize,
    },
}

impl Serialize for Witness {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Witness::Deflator {
                level,
                side,
                deflator,
            } => {
                let mut m = s.serialize_map(Some(5))?;
                m.serialize_entry("kind", "deflator")?;
                m.serialize_entry("level", level)?;
                m.serialize_entry("side", side)?;
                let class = match deflator {
                    Deflator::General(_) => "general",
                    Deflator::Projection(_) => "projection",
                };
                m.serialize_entry("deflator", class)?;
                m.serialize_entry("mats", &deflator.operator().mats_json())?;
                m.end()
            }
            Witness::Term { kind, level } => {
                let mut m = s.serialize_map(Some(3))?;
                m.serialize_entry("kind", "term")?;
                m.serialize_entry("name", kind)?;
                m.serialize_entry("level", level)?;
                m.end()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JNEstimate {
    pub functional: Functional,
    pub p: f64,
    pub lower_bound: f64,
    pub witness: Witness,
    /// True only when the value is the exact supremum (`p = 2`).
    pub exact: bool,
}

impl JNEstimate {
    /// Evaluate the witness from scratch through the norm definitions.
    pub fn reevaluate(&self, x: &Operator) -> Result<f64> {
        match &self.witness {
            Witness::Term { kind, .. } => Ok(kind.evaluate(x).0),
            Witness::Deflator {
                level,
                side,
                deflator,
            } => {
                let comp = self
                    .functional
                    .components()
                    .into_iter()
                    .find(|c| c.side == *side)
                    .ok_or_else(|| {
                        NcError::InvalidInput(format!(
                            "functional {} has no {side:?} component",
                            self.functional
                        ))
                    })?;
                evaluate_definition(x, &comp, *level, deflator, Exponent::finite(self.p)?)
            }
        }
    }
}
