//! Normalized distribution functions `λ ↦ τ(1_{(λ,∞)}(A)) / τ(e)` for the
//! deflated quantities appearing in the exponential integrability bounds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{NcError, Result};
use crate::norms::{self, NormFamily};
use crate::operator::{Operator, ProjectionWitness};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMode {
    /// `A = s_c((x − x_n) e)`, compared with `bmo_c`, constant 2.
    ConditionalSc,
    /// `A = |(x − x_{n−1}) e|`, compared with `BMO`, constant 4.
    PlainRight,
    /// `A = |e (x − x_{n−1})|`, compared with `BMO`, constant 4.
    PlainLeft,
}

impl TailMode {
    pub fn tag(&self) -> &'static str {
        match self {
            TailMode::ConditionalSc => "conditional-sc",
            TailMode::PlainRight => "plain-right",
            TailMode::PlainLeft => "plain-left",
        }
    }

    pub fn bound_constant(&self) -> f64 {
        match self {
            TailMode::ConditionalSc => 2.0,
            TailMode::PlainRight | TailMode::PlainLeft => 4.0,
        }
    }
}

impl fmt::Display for TailMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for TailMode {
    type Err = NcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "conditional-sc" => Ok(TailMode::ConditionalSc),
            "plain-right" => Ok(TailMode::PlainRight),
            "plain-left" => Ok(TailMode::PlainLeft),
            other => Err(NcError::InvalidArgument(format!("unknown tail mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailCurve {
    pub mode: TailMode,
    pub level: usize,
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    /// `τ(r(A)) / τ(e)`, the limit of the curve at `0⁺`.
    pub support_fraction: f64,
    pub norm_value: f64,
    pub bound_constant: f64,
    /// `min −ln(D(λ)/C)·‖x‖/λ` over grid points with `D(λ) > 0`; `None` when
    /// the curve vanishes on the whole grid.
    pub fitted_c: Option<f64>,
}

impl TailCurve {
    /// Largest `D(λ) / (C·exp(−λ/‖x‖))` on the grid.
    pub fn worst_bound_ratio(&self) -> f64 {
        self.lambdas
            .iter()
            .zip(&self.values)
            .map(|(&l, &d)| {
                if d == 0.0 {
                    0.0
                } else if self.norm_value == 0.0 {
                    f64::INFINITY
                } else {
                    d / (self.bound_constant * (-l / self.norm_value).exp())
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn distribution_tail(
    x: &Operator,
    level: usize,
    e: &ProjectionWitness,
    mode: TailMode,
    grid: &[f64],
) -> Result<TailCurve> {
    let space = x.space();
    let k = space.levels();
    if level == 0 || level > k {
        return Err(NcError::LevelOutOfRange { level, levels: k });
    }
    if e.proj().space() != space {
        return Err(NcError::DimensionMismatch("projection lives on a different space".into()));
    }
    if !e.proj().is_measurable(level)? {
        return Err(NcError::InvalidInput(format!(
            "projection is not measurable at level {level}"
        )));
    }
    if grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(NcError::InvalidArgument("grid values must be positive and finite".into()));
    }
    let tau_e = e.trace_value();
    let proj = e.proj();
    let mart = x.martingale();
    let (sq, norm_value) = match mode {
        TailMode::ConditionalSc => {
            let y = x - &mart[level];
            (norms::cond_sc_squared(&(&y * proj)), norms::bmo_c(x))
        }
        TailMode::PlainRight => {
            let y = x - &mart[level - 1];
            ((&y * proj).abs_sq(), norms::bmo_norm(x, NormFamily::BigBmo)?.value)
        }
        TailMode::PlainLeft => {
            let y = x - &mart[level - 1];
            ((proj * &y).abs_sq(), norms::bmo_norm(x, NormFamily::BigBmo)?.value)
        }
    };
    let n = space.matrix_dim() as f64;
    let spectra: Vec<(f64, Vec<f64>)> = sq
        .mats()
        .iter()
        .zip(space.weights())
        .map(|(m, &w)| {
            let s = spectral::herm_eigenvalues(m)
                .into_iter()
                .map(|l| l.max(0.0).sqrt())
                .collect();
            (w / n, s)
        })
        .collect();
    let tail = |lambda: f64| -> f64 {
        spectra
            .iter()
            .map(|(w, s)| w * s.iter().filter(|&&v| v > lambda).count() as f64)
            .sum::<f64>()
            / tau_e
    };
    let scale = sq.norm_inf().sqrt().max(1.0);
    let support_fraction = tail(1e-12 * scale);
    let values: Vec<f64> = grid.iter().map(|&l| tail(l)).collect();
    let bound_constant = mode.bound_constant();
    let fitted_c = grid
        .iter()
        .zip(&values)
        .filter(|(_, &d)| d > 0.0)
        .map(|(&l, &d)| -(d / bound_constant).ln() * norm_value / l)
        .reduce(f64::min);
    Ok(TailCurve {
        mode,
        level,
        lambdas: grid.to_vec(),
        values,
        support_fraction,
        norm_value,
        bound_constant,
        fitted_c,
    })
}
