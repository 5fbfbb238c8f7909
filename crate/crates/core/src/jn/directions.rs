//! The inequalities between the functionals and the BMO norms that hold
//! with constant one.
//!
//! For `p ≤ 2` every deflator gives a value at most the matching BMO norm
//! (Hölder). For `p ≥ 2` the BMO norm is at most the functional, which the
//! normalized `p = 2` witness certifies. At `p = 2` both hold, so the two
//! agree.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::eval::{evaluate_definition, Component, NormKind};
use super::search::jn_lower_bound;
use super::{Deflator, DeflatorClass, Functional, Side};
use crate::error::{NcError, Result};
use crate::norms::{self, Exponent};
use crate::operator::{Operator, ProjectionWitness};
use crate::sampling::{self, ProjectionSpec};

const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct DirectionCheck {
    pub name: String,
    pub samples: usize,
    /// Largest observed `lhs / rhs` for the inequality `lhs ≤ rhs`.
    pub max_ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionReport {
    pub p: f64,
    pub checks: Vec<DirectionCheck>,
}

impl DirectionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + REL_TOL) + REL_TOL * 1e-3
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs > 1e-12 {
        f64::INFINITY
    } else {
        0.0
    }
}

struct Upper {
    name: &'static str,
    comp: Component,
    norm: f64,
}

/// Runs the constant-free checks at exponent `p`.
///
/// For `p ≤ 2`, `trials` random deflators per level (alternately general
/// and projections) are evaluated through the norm definitions. For
/// `p ≥ 2`, [`jn_lower_bound`] with budget `trials` must reach each norm.
/// A failed inequality is reported as [`NcError::ViolationFound`].
pub fn check_constant_free_directions(
    x: &Operator,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<DirectionReport> {
    let exponent = Exponent::finite(p)?;
    let mut checks = Vec::new();

    if p <= 2.0 {
        let comp = |side, lag, norm| Component {
            side,
            lag,
            norm,
            class: DeflatorClass::General,
        };
        let uppers = [
            Upper {
                name: "bmo_c_p <= bmo_c",
                comp: comp(Side::Right, 0, NormKind::HcCond),
                norm: norms::bmo_c(x),
            },
            Upper {
                name: "bmo_r_p <= bmo_r",
                comp: comp(Side::Left, 0, NormKind::HcCond),
                norm: norms::bmo_r(x),
            },
            Upper {
                name: "b_p right <= bmo_c",
                comp: comp(Side::Right, 0, NormKind::Lp),
                norm: norms::bmo_c(x),
            },
            Upper {
                name: "b_p left <= bmo_r",
                comp: comp(Side::Left, 0, NormKind::Lp),
                norm: norms::bmo_r(x),
            },
            Upper {
                name: "B_p right <= BMO_c",
                comp: comp(Side::Right, 1, NormKind::Lp),
                norm: norms::big_bmo_c(x),
            },
            Upper {
                name: "B_p left <= BMO_r",
                comp: comp(Side::Left, 1, NormKind::Lp),
                norm: norms::big_bmo_r(x),
            },
        ];
        let space = x.space();
        for (u_idx, upper) in uppers.iter().enumerate() {
            let levels = upper.comp.levels(space);
            let jobs: Vec<(usize, usize)> = levels
                .iter()
                .flat_map(|&l| (0..trials).map(move |t| (l, t)))
                .collect();
            let values: Vec<Result<(f64, usize, usize)>> = jobs
                .par_iter()
                .map(|&(level, t)| {
                    let stream = ((u_idx as u64) << 48) | ((level as u64) << 32) | t as u64;
                    let mut rng = sampling::stream_rng(seed, stream);
                    let deflator = if t % 2 == 0 {
                        let cells = space.cell_count(level);
                        let a = if rng.random_bool(0.5) {
                            sampling::random_measurable(&mut rng, space, level, None)
                        } else {
                            let c = rng.random_range(0..cells);
                            sampling::random_measurable(&mut rng, space, level, Some(&[c]))
                        };
                        Deflator::General(a)
                    } else {
                        let profile = sampling::random_rank_profile(&mut rng, space, level);
                        let spec = ProjectionSpec::random(&mut rng, space, level, &profile)?;
                        Deflator::Projection(ProjectionWitness::new(level, spec.to_operator(space))?)
                    };
                    let v = evaluate_definition(x, &upper.comp, level, &deflator, exponent)?;
                    Ok((v, level, t))
                })
                .collect();
            let mut max_ratio = 0.0f64;
            for r in values {
                let (v, level, t) = r?;
                if !holds(v, upper.norm) {
                    return Err(NcError::ViolationFound {
                        check: upper.name.into(),
                        lhs: v,
                        rhs: upper.norm,
                        sample: Box::new(serde_json::json!({
                            "p": p, "level": level, "trial": t, "seed": seed,
                            "x": x.to_json(),
                        })),
                    });
                }
                max_ratio = max_ratio.max(ratio(v, upper.norm));
            }
            checks.push(DirectionCheck {
                name: upper.name.into(),
                samples: jobs.len(),
                max_ratio,
                passed: true,
            });
        }
    }

    if p >= 2.0 {
        let pairs = [
            (Functional::BmoCP, norms::bmo_c(x), "bmo_c"),
            (Functional::BmoRP, norms::bmo_r(x), "bmo_r"),
            (Functional::BmoCPPr, norms::bmo_c(x), "bmo_c"),
            (Functional::BmoRPPr, norms::bmo_r(x), "bmo_r"),
            (Functional::SmallB, norms::bmo_norm(x, norms::NormFamily::Bmo)?.value, "bmo"),
            (Functional::BigB, norms::bmo_norm(x, norms::NormFamily::BigBmo)?.value, "BMO"),
            (Functional::ProjSmallB, norms::bmo_norm(x, norms::NormFamily::Bmo)?.value, "bmo"),
            (Functional::ProjBigB, norms::bmo_norm(x, norms::NormFamily::BigBmo)?.value, "BMO"),
        ];
        for (f, norm, norm_name) in pairs {
            let est = jn_lower_bound(x, f, p, trials, seed)?;
            let name = format!("{norm_name} <= {}", f.tag());
            if !holds(norm, est.lower_bound) {
                return Err(NcError::ViolationFound {
                    check: name,
                    lhs: norm,
                    rhs: est.lower_bound,
                    sample: Box::new(serde_json::json!({
                        "p": p, "seed": seed, "x": x.to_json(),
                    })),
                });
            }
            checks.push(DirectionCheck {
                name,
                samples: 1,
                max_ratio: ratio(norm, est.lower_bound),
                passed: true,
            });
        }
    }

    Ok(DirectionReport { p, checks })
}
