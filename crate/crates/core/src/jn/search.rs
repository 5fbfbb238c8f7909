//! Certified lower bounds for the functionals at `p ≠ 2`.
//!
//! Every candidate is a concrete deflator, so the value it reaches is a
//! lower bound for the supremum. Stages:
//!
//! 1. classical deflators `1_A ⊗ 1` (the best one is a single cell when the
//!    norm is additive over cells; otherwise subsets are searched);
//! 2. the `p = 2` optimal rank one projections, normalized by `τ(e)^{1/p}`;
//! 3. caller-supplied hints;
//! 4. `budget` randomized trials in blocks of 16. Even trials draw fresh
//!    candidates, odd trials perturb the best candidate found before the
//!    block started. Each trial uses its own random stream and results are
//!    merged in trial order, so the outcome is independent of the thread
//!    count and nondecreasing in `budget`.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use super::eval::{Component, LevelEval, NormKind};
use super::exact::{exact_p2, p2_witness};
use super::{Deflator, DeflatorClass, Functional, JNEstimate, Side, Witness};
use crate::error::{NcError, Result};
use crate::norms::{self, Exponent};
use crate::operator::{Operator, ProjectionWitness};
use crate::sampling::{self, ProjectionSpec};
use crate::space::TraceSpace;
use crate::spectral::{self, Mat};

const BLOCK: usize = 16;
/// Subsets are enumerated while `2^cells · sites` stays below this.
const EXHAUSTIVE_WORK: usize = 1 << 16;
const GREEDY_CELLS: usize = 32;

/// An explicit deflator to include in the search.
#[derive(Debug, Clone)]
pub struct Hint {
    pub level: usize,
    pub side: Side,
    pub deflator: Deflator,
}

/// A candidate in column form.
#[derive(Debug, Clone)]
pub(crate) enum Cand {
    General(Operator),
    Proj(ProjectionSpec),
}

#[derive(Debug, Clone)]
pub(crate) struct Best {
    pub value: f64,
    pub comp: Component,
    pub level: usize,
    pub cand: Cand,
}

fn evaluate(ev: &LevelEval, cand: &Cand, p: Exponent) -> f64 {
    let space = ev.y.space();
    let (a, scale) = match cand {
        Cand::General(a) => (a.clone(), norms::lp_norm(a, p).unwrap_or(0.0)),
        Cand::Proj(spec) => (spec.to_operator(space), spec.trace(space).powf(p.recip())),
    };
    if !(scale > 0.0) {
        return f64::NAN;
    }
    ev.raw(&a, p) / scale
}

/// Projection spec of `1_A ⊗ 1`.
fn classical_spec(space: &TraceSpace, level: usize, cells: &[usize]) -> ProjectionSpec {
    let n = space.matrix_dim();
    let frames = (0..space.cell_count(level))
        .map(|c| {
            if cells.contains(&c) {
                Mat::identity(n, n)
            } else {
                Mat::zeros(n, 0)
            }
        })
        .collect();
    ProjectionSpec { level, frames }
}

/// Frames of a level-measurable projection, read off its eigenvectors.
fn spec_from_projection(e: &ProjectionWitness, level: usize) -> ProjectionSpec {
    let space = e.proj().space();
    let frames = space
        .cells(level)
        .iter()
        .map(|cell| {
            let (vals, vecs) = spectral::herm_eig(e.proj().mat(cell[0]));
            let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
            Mat::from_fn(vecs.nrows(), keep.len(), |r, j| vecs[(r, keep[j])])
        })
        .collect();
    ProjectionSpec { level, frames }
}

/// Cells of `level` ordered by their share of the site terms, largest
/// first (ties by index).
fn ranked_cells(ev: &LevelEval, p: Exponent) -> Vec<usize> {
    let space = ev.y.space();
    let terms = ev.site_terms(p.value());
    let mut scores: Vec<(f64, usize)> = space
        .cells(ev.level)
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let mass: f64 = cell.iter().map(|&s| terms[s]).sum();
            (mass / space.cell_weight(ev.level, c), c)
        })
        .collect();
    scores.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scores.into_iter().map(|(_, c)| c).collect()
}

fn classical_best(ev: &LevelEval, p: Exponent) -> (f64, Cand) {
    let space = ev.y.space().clone();
    let level = ev.level;
    let cells = space.cell_count(level);
    let single = |c: usize| Cand::Proj(classical_spec(&space, level, &[c]));
    if ev.comp.norm != NormKind::HcFull {
        // Additive over cells: the ratio of sums is maximized by the cell
        // with the largest average term.
        let c = ranked_cells(ev, p)[0];
        let cand = single(c);
        return (evaluate(ev, &cand, p), cand);
    }
    if cells < 16 && (1usize << cells) * space.site_count() <= EXHAUSTIVE_WORK {
        let mut best = (f64::NEG_INFINITY, single(0));
        for mask in 1u32..(1u32 << cells) {
            let chosen: Vec<usize> = (0..cells).filter(|&c| mask & (1 << c) != 0).collect();
            let cand = Cand::Proj(classical_spec(&space, level, &chosen));
            let v = evaluate(ev, &cand, p);
            if v > best.0 {
                best = (v, cand);
            }
        }
        return best;
    }
    // Greedy over the `GREEDY_CELLS` highest ranked cells: start from the
    // best single cell and add cells in decreasing order of their own value
    // while the total improves.
    let mut singles: Vec<(f64, usize)> = ranked_cells(ev, p)
        .into_iter()
        .take(GREEDY_CELLS)
        .map(|c| (evaluate(ev, &single(c), p), c))
        .collect();
    singles.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut chosen = vec![singles[0].1];
    let mut value = singles[0].0;
    for &(_, c) in &singles[1..] {
        let mut trial = chosen.clone();
        trial.push(c);
        let v = evaluate(ev, &Cand::Proj(classical_spec(&space, level, &trial)), p);
        if v > value {
            value = v;
            chosen = trial;
        }
    }
    (value, Cand::Proj(classical_spec(&space, level, &chosen)))
}

fn random_cand<R: Rng + ?Sized>(rng: &mut R, space: &Arc<TraceSpace>, ev: &LevelEval) -> Cand {
    let level = ev.level;
    if ev.comp.class == DeflatorClass::Projection || rng.random_bool(0.5) {
        let profile = sampling::random_rank_profile(rng, space, level);
        let spec = ProjectionSpec::random(rng, space, level, &profile).expect("valid profile");
        Cand::Proj(spec)
    } else if rng.random_bool(0.5) {
        Cand::General(sampling::random_measurable(rng, space, level, None))
    } else {
        let cell = rng.random_range(0..space.cell_count(level));
        Cand::General(sampling::random_measurable(rng, space, level, Some(&[cell])))
    }
}

fn perturb<R: Rng + ?Sized>(rng: &mut R, space: &Arc<TraceSpace>, level: usize, cand: &Cand) -> Cand {
    let step = 0.5 * 10f64.powf(-2.0 * rng.random::<f64>());
    match cand {
        Cand::Proj(spec) => Cand::Proj(spec.perturb(rng, step)),
        Cand::General(a) => {
            let size = a.norm_inf().max(f64::MIN_POSITIVE);
            let g = if rng.random_bool(0.5) {
                sampling::random_measurable(rng, space, level, None)
            } else {
                let support: Vec<usize> = space
                    .cells(level)
                    .iter()
                    .enumerate()
                    .filter(|(_, cell)| a.mat(cell[0]).norm() > 0.0)
                    .map(|(c, _)| c)
                    .collect();
                sampling::random_measurable(rng, space, level, Some(&support))
            };
            Cand::General(a + &g.scale(step * size))
        }
    }
}

fn better(new: f64, cur: Option<&Best>) -> bool {
    new.is_finite() && cur.is_none_or(|b| new > b.value)
}

/// Lower bound for `functional` at exponent `p` (finite, positive). At
/// `p = 2` the exact value is returned.
pub fn jn_lower_bound(
    x: &Operator,
    functional: Functional,
    p: f64,
    budget: usize,
    seed: u64,
) -> Result<JNEstimate> {
    jn_lower_bound_with_hints(x, functional, p, budget, seed, &[])
}

pub fn jn_lower_bound_with_hints(
    x: &Operator,
    functional: Functional,
    p: f64,
    budget: usize,
    seed: u64,
    hints: &[Hint],
) -> Result<JNEstimate> {
    let exponent = Exponent::finite(p)?;
    if p == 2.0 {
        return exact_p2(x, functional);
    }
    let space = x.space().clone();
    let mut evals: Vec<LevelEval> = Vec::new();
    for comp in functional.components() {
        let base = comp.column_base(x);
        let mart = base.martingale();
        for level in comp.levels(&space) {
            evals.push(LevelEval::new(&base, &mart, comp, level));
        }
    }

    let mut best: Option<Best> = None;
    let offer = |best: &mut Option<Best>, ev: &LevelEval, value: f64, cand: Cand| {
        if better(value, best.as_ref()) {
            *best = Some(Best {
                value,
                comp: ev.comp,
                level: ev.level,
                cand,
            });
        }
    };

    for ev in &evals {
        let (v, cand) = classical_best(ev, exponent);
        offer(&mut best, ev, v, cand);
        let (_, spec) = p2_witness(&ev.y, ev.level);
        let cand = Cand::Proj(spec);
        let v = evaluate(ev, &cand, exponent);
        offer(&mut best, ev, v, cand);
    }

    for hint in hints {
        let ev = evals
            .iter()
            .find(|e| e.level == hint.level && e.comp.side == hint.side)
            .ok_or_else(|| {
                NcError::InvalidInput(format!(
                    "hint at level {} ({:?}) does not match {functional}",
                    hint.level, hint.side
                ))
            })?;
        let b = hint.deflator.operator();
        if !b.is_measurable(hint.level)? {
            return Err(NcError::InvalidInput(format!(
                "hint is not measurable at level {}",
                hint.level
            )));
        }
        let cand = match &hint.deflator {
            Deflator::Projection(e) => Cand::Proj(spec_from_projection(e, hint.level)),
            Deflator::General(a) if ev.comp.class == DeflatorClass::General => {
                Cand::General(ev.comp.flip(a))
            }
            Deflator::General(_) => {
                return Err(NcError::InvalidInput(format!(
                    "{functional} accepts only projection deflators"
                )))
            }
        };
        let v = evaluate(ev, &cand, exponent);
        offer(&mut best, ev, v, cand);
    }

    if !evals.is_empty() {
        let mut start = 0;
        while start < budget {
            let end = (start + BLOCK).min(budget);
            let anchor = best.clone();
            let results: Vec<(f64, usize, Cand)> = (start..end)
                .into_par_iter()
                .map(|t| {
                    let mut rng = sampling::stream_rng(seed, t as u64);
                    let (idx, cand) = match (&anchor, t % 2) {
                        (Some(a), 1) => {
                            let idx = evals
                                .iter()
                                .position(|e| e.level == a.level && e.comp == a.comp)
                                .expect("anchor pair exists");
                            (idx, perturb(&mut rng, &space, a.level, &a.cand))
                        }
                        _ => {
                            let idx = rng.random_range(0..evals.len());
                            (idx, random_cand(&mut rng, &space, &evals[idx]))
                        }
                    };
                    (evaluate(&evals[idx], &cand, exponent), idx, cand)
                })
                .collect();
            for (v, idx, cand) in results {
                offer(&mut best, &evals[idx], v, cand);
            }
            start = end;
        }
    }

    finalize(x, functional, p, best, false)
}

/// Combine the best deflator with the explicit term; the deflator wins
/// ties within a relative `1e-12`.
pub(crate) fn finalize(
    x: &Operator,
    functional: Functional,
    p: f64,
    best: Option<Best>,
    exact: bool,
) -> Result<JNEstimate> {
    let space = x.space();
    let term = functional.term().map(|k| {
        let (v, l) = k.evaluate(x);
        (k, v, l)
    });
    let deflator = match best {
        Some(b) => {
            let exponent = Exponent::finite(p)?;
            let deflator = match b.cand {
                Cand::Proj(spec) => {
                    Deflator::Projection(ProjectionWitness::new(b.level, spec.to_operator(space))?)
                }
                Cand::General(a) => {
                    let scale = norms::lp_norm(&a, exponent)?;
                    Deflator::General(b.comp.flip(&a).scale(1.0 / scale))
                }
            };
            Some((
                b.value,
                Witness::Deflator {
                    level: b.level,
                    side: b.comp.side,
                    deflator,
                },
            ))
        }
        None => None,
    };
    let (lower_bound, witness) = match (deflator, term) {
        (Some((dv, w)), Some((_, tv, _))) if dv >= tv - 1e-12 * tv.abs().max(1.0) => (dv.max(tv), w),
        (Some((dv, w)), None) => (dv, w),
        (_, Some((kind, tv, level))) => (tv, Witness::Term { kind, level }),
        (None, None) => {
            return Err(NcError::InvalidInput(format!(
                "{functional} has no admissible level on this space"
            )))
        }
    };
    Ok(JNEstimate {
        functional,
        p,
        lower_bound,
        witness,
        exact,
    })
}
