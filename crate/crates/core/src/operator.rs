//! Operators on a finite trace space: site-indexed families of `n×n`
//! complex matrices, with the trace, conditional expectations, martingale
//! differences, Hermitian functional calculus and supports.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{NcError, Result};
use crate::space::{SpaceJson, TraceSpace};
use crate::spectral::{self, c, Mat, C64};

/// Relative tolerance used for measurability tests.
pub const MEASURABILITY_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-8;
const NEGATIVE_SPECTRUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Operator {
    space: Arc<TraceSpace>,
    mats: Vec<Mat>,
}

fn same_space(a: &Arc<TraceSpace>, b: &Arc<TraceSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl Operator {
    pub fn new(space: Arc<TraceSpace>, mats: Vec<Mat>) -> Result<Self> {
        if mats.len() != space.site_count() {
            return Err(NcError::DimensionMismatch(format!(
                "{} matrices for {} sites",
                mats.len(),
                space.site_count()
            )));
        }
        let n = space.matrix_dim();
        if let Some(m) = mats.iter().find(|m| m.nrows() != n || m.ncols() != n) {
            return Err(NcError::DimensionMismatch(format!(
                "matrix of shape {}x{} in a space of dimension {n}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { space, mats })
    }

    pub fn from_fn(space: &Arc<TraceSpace>, mut f: impl FnMut(usize) -> Mat) -> Self {
        let mats = (0..space.site_count()).map(&mut f).collect();
        Self::new(space.clone(), mats).expect("from_fn produced matrices of the wrong size")
    }

    pub fn zero(space: &Arc<TraceSpace>) -> Self {
        let n = space.matrix_dim();
        Self::from_fn(space, |_| Mat::zeros(n, n))
    }

    pub fn identity(space: &Arc<TraceSpace>) -> Self {
        let n = space.matrix_dim();
        Self::from_fn(space, |_| Mat::identity(n, n))
    }

    /// The same matrix at every site.
    pub fn constant(space: &Arc<TraceSpace>, m: &Mat) -> Result<Self> {
        Self::new(space.clone(), vec![m.clone(); space.site_count()])
    }

    /// `f(s) · 1` for a scalar function of the site.
    pub fn scalar_fn(space: &Arc<TraceSpace>, f: impl Fn(usize) -> f64) -> Self {
        let n = space.matrix_dim();
        Self::from_fn(space, |s| Mat::identity(n, n) * c(f(s)))
    }

    /// Indicator of a union of level-`level` cells, tensored with the identity.
    pub fn cell_indicator(space: &Arc<TraceSpace>, level: usize, cells: &[usize]) -> Self {
        Self::scalar_fn(space, |s| {
            if cells.contains(&space.cell_of(level, s)) {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn space(&self) -> &Arc<TraceSpace> {
        &self.space
    }

    pub fn mats(&self) -> &[Mat] {
        &self.mats
    }

    pub fn mat(&self, site: usize) -> &Mat {
        &self.mats[site]
    }

    pub fn dim(&self) -> usize {
        self.space.matrix_dim()
    }

    pub fn map(&self, f: impl Fn(&Mat) -> Mat) -> Self {
        Self {
            space: self.space.clone(),
            mats: self.mats.iter().map(f).collect(),
        }
    }

    fn zip(&self, other: &Operator, f: impl Fn(&Mat, &Mat) -> Mat) -> Self {
        assert!(
            same_space(&self.space, &other.space),
            "operators live on different trace spaces"
        );
        Self {
            space: self.space.clone(),
            mats: self.mats.iter().zip(&other.mats).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        self.map(|m| m.adjoint())
    }

    pub fn scale(&self, t: f64) -> Self {
        self.map(|m| m * c(t))
    }

    pub fn scale_complex(&self, z: C64) -> Self {
        self.map(|m| m * z)
    }

    /// `x* x`, sitewise.
    pub fn abs_sq(&self) -> Self {
        self.map(|m| m.adjoint() * m)
    }

    /// `τ(x) = Σ_s μ_s tr(x_s)/n`.
    pub fn trace(&self) -> C64 {
        let n = self.dim() as f64;
        self.mats
            .iter()
            .zip(self.space.weights())
            .fold(c(0.0), |acc, (m, &w)| acc + m.trace() * c(w / n))
    }

    /// Largest absolute matrix entry over all sites.
    pub fn max_abs_entry(&self) -> f64 {
        self.mats
            .iter()
            .flat_map(|m| m.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `‖x‖_∞`: the largest singular value over all sites.
    pub fn norm_inf(&self) -> f64 {
        self.mats.iter().map(spectral::op_norm).fold(0.0, f64::max)
    }

    /// `max_s ‖x_s − y_s‖_∞`.
    pub fn dist_inf(&self, other: &Operator) -> f64 {
        (self - other).norm_inf()
    }

    /// Conditional expectation onto the level-`level` subalgebra: the
    /// weighted average over each cell. Level 0 is treated as level 1.
    pub fn cond_exp(&self, level: usize) -> Result<Self> {
        let level = self.space.check_level(level)?;
        Ok(self.cond_exp_unchecked(level))
    }

    pub(crate) fn cond_exp_unchecked(&self, level: usize) -> Self {
        let sp = &self.space;
        let n = sp.matrix_dim();
        let mut mats = vec![Mat::zeros(n, n); sp.site_count()];
        for (cell_idx, cell) in sp.cells(level).iter().enumerate() {
            let total = sp.cell_weight(level, cell_idx);
            let mut avg = Mat::zeros(n, n);
            for &s in cell {
                avg += &self.mats[s] * c(sp.weight(s) / total);
            }
            for &s in cell {
                mats[s] = avg.clone();
            }
        }
        Self {
            space: self.space.clone(),
            mats,
        }
    }

    /// Largest deviation of `x` from its cell averages at `level`.
    pub fn measurability_defect(&self, level: usize) -> Result<f64> {
        let e = self.cond_exp(level)?;
        Ok(self.dist_inf(&e))
    }

    pub fn is_measurable(&self, level: usize) -> Result<bool> {
        let scale = self.norm_inf().max(f64::MIN_POSITIVE);
        Ok(self.measurability_defect(level)? <= MEASURABILITY_TOL * scale.max(1.0))
    }

    /// `x_k = E_k x` for `k = 0..=K`, with `x_0 = 0`.
    pub fn martingale(&self) -> Vec<Operator> {
        let k = self.space.levels();
        let mut out = vec![Operator::zero(&self.space); k + 1];
        for level in 1..=k {
            out[level] = self.cond_exp_unchecked(level);
        }
        out
    }

    pub fn diffs(&self) -> MartingaleDiffs {
        MartingaleDiffs::new(self)
    }

    /// Apply a scalar function to the spectrum at every site.
    ///
    /// The input must be Hermitian (to `1e-8·‖x‖_∞`). For the tags that
    /// need a positive argument the spectrum is clipped at zero after
    /// checking that no eigenvalue falls below `−1e-6·‖x‖_∞`.
    pub fn herm_calculus(&self, f: SpectralFn) -> Result<Self> {
        let scale = self.norm_inf();
        let defect = self
            .mats
            .iter()
            .map(spectral::hermitian_defect)
            .fold(0.0, f64::max);
        if defect > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) && defect > 0.0 {
            return Err(NcError::NonHermitianInput {
                deviation: defect,
                scale,
            });
        }
        let mats = self
            .mats
            .iter()
            .map(|m| {
                let (mut vals, vecs) = spectral::herm_eig(m);
                if f.needs_positive() {
                    for v in vals.iter_mut() {
                        if *v < -NEGATIVE_SPECTRUM_TOL * scale {
                            return Err(NcError::NegativeSpectrum {
                                eigenvalue: *v,
                                scale,
                            });
                        }
                        *v = v.max(0.0);
                    }
                }
                Ok(spectral::rebuild(&vals, &vecs, |l| f.apply(l)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            space: self.space.clone(),
            mats,
        })
    }

    /// `|x|^alpha = (x*x)^{alpha/2}`, computed through singular values.
    pub fn abs_power(&self, alpha: f64) -> Self {
        self.map(|m| spectral::abs_power(m, alpha))
    }

    pub fn abs(&self) -> Self {
        self.abs_power(1.0)
    }

    /// Right and left supports `(l(x), r(x))`: the spectral projections of
    /// `x x*` and `x* x` above `1e-12·‖x‖²_∞`.
    pub fn supports(&self) -> (Operator, Operator) {
        let scale = self.norm_inf();
        let eps = 1e-12 * scale * scale;
        let right = self.abs_sq().map(|m| {
            let (vals, vecs) = spectral::herm_eig(m);
            spectral::rebuild(&vals, &vecs, |l| if l > eps { 1.0 } else { 0.0 })
        });
        let left = self.adjoint().abs_sq().map(|m| {
            let (vals, vecs) = spectral::herm_eig(m);
            spectral::rebuild(&vals, &vecs, |l| if l > eps { 1.0 } else { 0.0 })
        });
        (left, right)
    }

    pub fn right_support(&self) -> Operator {
        self.supports().1
    }

    pub fn left_support(&self) -> Operator {
        self.supports().0
    }

    pub fn to_json(&self) -> OperatorJson {
        OperatorJson {
            space: self.space.to_json(),
            mats: self.mats_json(),
        }
    }

    /// Per-site row-major `[re, im]` pairs.
    pub fn mats_json(&self) -> Vec<Vec<[f64; 2]>> {
        self.mats
            .iter()
            .map(|m| {
                let n = m.nrows();
                let mut out = Vec::with_capacity(n * n);
                for r in 0..n {
                    for col in 0..n {
                        let z = m[(r, col)];
                        out.push([z.re, z.im]);
                    }
                }
                out
            })
            .collect()
    }

    pub fn from_json(json: OperatorJson) -> Result<Self> {
        let space = Arc::new(TraceSpace::from_json(json.space)?);
        Self::from_mats_json(&space, &json.mats)
    }

    pub fn from_mats_json(space: &Arc<TraceSpace>, mats: &[Vec<[f64; 2]>]) -> Result<Self> {
        let n = space.matrix_dim();
        let mats = mats
            .iter()
            .enumerate()
            .map(|(s, entries)| {
                if entries.len() != n * n {
                    return Err(NcError::DimensionMismatch(format!(
                        "site {s} has {} entries, expected {}",
                        entries.len(),
                        n * n
                    )));
                }
                Ok(Mat::from_row_iterator(
                    n,
                    n,
                    entries.iter().map(|[re, im]| C64::new(*re, *im)),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Operator::new(space.clone(), mats)
    }
}

impl PartialEq for Operator {
    fn eq(&self, other: &Self) -> bool {
        same_space(&self.space, &other.space) && self.mats == other.mats
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        self.zip(rhs, |a, b| a + b)
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        self.zip(rhs, |a, b| a - b)
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        self.zip(rhs, |a, b| a * b)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-1.0)
    }
}

/// Wire form of an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorJson {
    pub space: SpaceJson,
    pub mats: Vec<Vec<[f64; 2]>>,
}

/// Scalar functions available to [`Operator::herm_calculus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralFn {
    /// `λ ↦ λ^α` on the positive part.
    AbsPower(f64),
    Sqrt,
    /// `λ ↦ 1` if `λ > threshold`, else `0`.
    Indicator(f64),
    /// `λ ↦ exp(t λ)`.
    ExpScale(f64),
}

impl SpectralFn {
    fn needs_positive(&self) -> bool {
        !matches!(self, SpectralFn::ExpScale(_))
    }

    pub fn apply(&self, l: f64) -> f64 {
        match *self {
            SpectralFn::AbsPower(a) => {
                if l > 0.0 {
                    l.powf(a)
                } else if a == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SpectralFn::Sqrt => l.max(0.0).sqrt(),
            SpectralFn::Indicator(t) => {
                if l > t {
                    1.0
                } else {
                    0.0
                }
            }
            SpectralFn::ExpScale(t) => (t * l).exp(),
        }
    }
}

/// The difference sequence `dx_1 = E_1 x`, `dx_k = E_k x − E_{k−1} x`.
#[derive(Debug, Clone)]
pub struct MartingaleDiffs {
    diffs: Vec<Operator>,
    source: Operator,
}

impl MartingaleDiffs {
    pub fn new(x: &Operator) -> Self {
        let mart = x.martingale();
        let diffs = (1..mart.len()).map(|k| &mart[k] - &mart[k - 1]).collect();
        Self {
            diffs,
            source: x.clone(),
        }
    }

    /// `dx_k` for `k` in `1..=K`.
    pub fn get(&self, k: usize) -> &Operator {
        &self.diffs[k - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Operator> {
        self.diffs.iter()
    }

    pub fn len(&self) -> usize {
        self.diffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diffs.is_empty()
    }

    pub fn source(&self) -> &Operator {
        &self.source
    }

    pub fn sum(&self) -> Operator {
        self.diffs
            .iter()
            .fold(Operator::zero(self.source.space()), |acc, d| &acc + d)
    }
}

/// A level-measurable projection with positive trace.
#[derive(Debug, Clone)]
pub struct ProjectionWitness {
    level: usize,
    proj: Operator,
    trace_value: f64,
}

impl ProjectionWitness {
    /// Validates `e = e* = e²` (to `1e-10`), level measurability and
    /// `τ(e) > 0`.
    pub fn new(level: usize, proj: Operator) -> Result<Self> {
        proj.space().check_level(level)?;
        let idem = proj.dist_inf(&(&proj * &proj));
        let herm = proj.dist_inf(&proj.adjoint());
        if idem > 1e-10 || herm > 1e-10 {
            return Err(NcError::InvalidInput(format!(
                "not a projection (idempotence defect {idem:.2e}, hermitian defect {herm:.2e})"
            )));
        }
        if !proj.is_measurable(level)? {
            return Err(NcError::InvalidInput(format!(
                "projection is not measurable at level {level}"
            )));
        }
        let trace_value = proj.trace().re;
        if trace_value <= 1e-14 {
            return Err(NcError::InvalidInput(format!(
                "projection has trace {trace_value:.3e}"
            )));
        }
        Ok(Self {
            level,
            proj,
            trace_value,
        })
    }

    /// The identity as a level-1 projection.
    pub fn identity(space: &Arc<TraceSpace>) -> Self {
        Self {
            level: 1,
            proj: Operator::identity(space),
            trace_value: 1.0,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn proj(&self) -> &Operator {
        &self.proj
    }

    pub fn trace_value(&self) -> f64 {
        self.trace_value
    }
}
