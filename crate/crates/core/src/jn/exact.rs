//! The `p = 2` case, where every functional is computable.
//!
//! At `p = 2` each component at level `n` equals
//! `‖E_n|y|²‖_∞^{1/2}` with `y` the column residual, attained by the rank
//! one projection `1_C ⊗ vv*` on the cell `C` and top eigenvector `v` of
//! `E_n|y|²`.

use std::sync::Arc;

use super::search::{finalize, Best, Cand};
use super::{DeflatorClass, Functional, JNEstimate};
use crate::error::Result;
use crate::operator::Operator;
use crate::sampling::ProjectionSpec;
use crate::spectral::{self, Mat};

/// Top eigenpair of `E_n|y|²` over the cells of `level`, as a rank one
/// projection spec with its value `λ_max^{1/2}`.
pub(crate) fn p2_witness(y: &Operator, level: usize) -> (f64, ProjectionSpec) {
    let space: &Arc<_> = y.space();
    let m = y.abs_sq().cond_exp_unchecked(level);
    let n = space.matrix_dim();
    let mut best: Option<(f64, usize, Mat)> = None;
    for (c, cell) in space.cells(level).iter().enumerate() {
        let (vals, vecs) = spectral::herm_eig(m.mat(cell[0]));
        let top = *vals.last().expect("non-empty");
        if best.as_ref().is_none_or(|b| top > b.0) {
            best = Some((top, c, vecs.columns(n - 1, 1).into_owned()));
        }
    }
    let (top, cell, v) = best.expect("at least one cell");
    let frames = (0..space.cell_count(level))
        .map(|c| if c == cell { v.clone() } else { Mat::zeros(n, 0) })
        .collect();
    (top.max(0.0).sqrt(), ProjectionSpec { level, frames })
}

/// Exact value of any functional at `p = 2`.
pub fn exact_p2(x: &Operator, functional: Functional) -> Result<JNEstimate> {
    let space = x.space();
    let mut best: Option<Best> = None;
    for comp in functional.components() {
        let base = comp.column_base(x);
        let mart = base.martingale();
        for level in comp.levels(space) {
            let y = &base - &mart[level - comp.lag];
            let (value, spec) = p2_witness(&y, level);
            let cand = match comp.class {
                DeflatorClass::Projection => Cand::Proj(spec),
                DeflatorClass::General => Cand::General(spec.to_operator(space)),
            };
            let b = Best {
                value,
                comp,
                level,
                cand,
            };
            if best.as_ref().is_none_or(|cur| b.value > cur.value) {
                best = Some(b);
            }
        }
    }
    finalize(x, functional, 2.0, best, true)
}

/// `bmo^c_2(x)`, which equals `bmo_c(x)`, with its witness.
pub fn bmo_c2_exact(x: &Operator) -> Result<JNEstimate> {
    exact_p2(x, Functional::BmoCP)
}
