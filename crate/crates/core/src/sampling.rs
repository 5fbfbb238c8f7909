//! Seeded random generators for operators, deflators and projections.
//!
//! Every random stream is a ChaCha8 generator keyed by `(seed, stream)`:
//! trial `t` of a run with seed `s` always draws from stream `t` of the
//! generator seeded with `s`, so trials can run in any order or in
//! parallel without changing their content.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{NcError, Result};
use crate::operator::{Operator, ProjectionWitness};
use crate::space::TraceSpace;
use crate::spectral::{self, Mat, C64};

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard complex Gaussian `(g + i h)/√2`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Gaussian operator with independent entries at every site.
pub fn random_operator<R: Rng + ?Sized>(
    rng: &mut R,
    space: &Arc<TraceSpace>,
    scale: f64,
    hermitian: bool,
) -> Operator {
    let n = space.matrix_dim();
    Operator::from_fn(space, |_| {
        let g = gaussian_matrix(rng, n, n) * spectral::c(scale);
        if hermitian {
            spectral::hermitian_part(&g)
        } else {
            g
        }
    })
}

/// Deterministic random operator for a seed.
pub fn random_martingale(space: &Arc<TraceSpace>, scale: f64, seed: u64) -> Operator {
    random_operator(&mut stream_rng(seed, 0), space, scale, false)
}

/// Gaussian operator constant on the cells of `level`, supported on
/// `cells` (all cells when `None`).
pub fn random_measurable<R: Rng + ?Sized>(
    rng: &mut R,
    space: &Arc<TraceSpace>,
    level: usize,
    cells: Option<&[usize]>,
) -> Operator {
    let n = space.matrix_dim();
    let blocks: Vec<Mat> = (0..space.cell_count(level))
        .map(|c| {
            let g = gaussian_matrix(rng, n, n);
            match cells {
                Some(list) if !list.contains(&c) => Mat::zeros(n, n),
                _ => g,
            }
        })
        .collect();
    Operator::from_fn(space, |s| blocks[space.cell_of(level, s)].clone())
}

/// A level-measurable projection described cell by cell through
/// orthonormal frames (`n × rank`, rank 0 meaning the cell is excluded).
#[derive(Debug, Clone)]
pub struct ProjectionSpec {
    pub level: usize,
    pub frames: Vec<Mat>,
}

impl ProjectionSpec {
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        space: &TraceSpace,
        level: usize,
        rank_profile: &[usize],
    ) -> Result<Self> {
        let n = space.matrix_dim();
        if rank_profile.len() != space.cell_count(level) {
            return Err(NcError::InvalidArgument(format!(
                "rank profile has {} entries for {} cells",
                rank_profile.len(),
                space.cell_count(level)
            )));
        }
        if let Some(r) = rank_profile.iter().find(|&&r| r > n) {
            return Err(NcError::InvalidArgument(format!(
                "rank {r} exceeds matrix dimension {n}"
            )));
        }
        let frames = rank_profile
            .iter()
            .map(|&r| {
                if r == 0 {
                    Mat::zeros(n, 0)
                } else {
                    spectral::orthonormalize(&gaussian_matrix(rng, n, r))
                }
            })
            .collect();
        Ok(Self { level, frames })
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.frames.iter().map(|f| f.ncols()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.iter().all(|f| f.ncols() == 0)
    }

    pub fn to_operator(&self, space: &Arc<TraceSpace>) -> Operator {
        let n = space.matrix_dim();
        let blocks: Vec<Mat> = self
            .frames
            .iter()
            .map(|f| {
                if f.ncols() == 0 {
                    Mat::zeros(n, n)
                } else {
                    spectral::frame_projection(f)
                }
            })
            .collect();
        Operator::from_fn(space, |s| blocks[space.cell_of(self.level, s)].clone())
    }

    /// `τ(e) = Σ_C μ(C) rank_C / n`.
    pub fn trace(&self, space: &TraceSpace) -> f64 {
        let n = space.matrix_dim() as f64;
        self.frames
            .iter()
            .enumerate()
            .map(|(c, f)| space.cell_weight(self.level, c) * f.ncols() as f64 / n)
            .sum()
    }

    /// Perturb every frame by `step` times a Gaussian and re-orthonormalize.
    pub fn perturb<R: Rng + ?Sized>(&self, rng: &mut R, step: f64) -> Self {
        let frames = self
            .frames
            .iter()
            .map(|f| {
                if f.ncols() == 0 {
                    f.clone()
                } else {
                    let g = gaussian_matrix(rng, f.nrows(), f.ncols()) * spectral::c(step);
                    spectral::orthonormalize(&(f + g))
                }
            })
            .collect();
        Self {
            level: self.level,
            frames,
        }
    }
}

/// Random projection at `level` with the given per-cell ranks.
pub fn random_projection(
    space: &Arc<TraceSpace>,
    level: usize,
    rank_profile: &[usize],
    seed: u64,
) -> Result<ProjectionWitness> {
    space.check_level(level)?;
    let level = level.max(1);
    let spec = ProjectionSpec::random(&mut stream_rng(seed, 0), space, level, rank_profile)?;
    if spec.is_empty() {
        return Err(NcError::InvalidArgument("rank profile is identically zero".into()));
    }
    ProjectionWitness::new(level, spec.to_operator(space))
}

/// A random nonempty cell subset and per-cell ranks in `1..=n`.
pub fn random_rank_profile<R: Rng + ?Sized>(rng: &mut R, space: &TraceSpace, level: usize) -> Vec<usize> {
    let cells = space.cell_count(level);
    let n = space.matrix_dim();
    let mut profile = vec![0; cells];
    if rng.random_bool(0.5) {
        profile[rng.random_range(0..cells)] = rng.random_range(1..=n);
    } else {
        for r in profile.iter_mut() {
            if rng.random_bool(0.5) {
                *r = rng.random_range(1..=n);
            }
        }
        if profile.iter().all(|&r| r == 0) {
            profile[rng.random_range(0..cells)] = rng.random_range(1..=n);
        }
    }
    profile
}
