//! Finite filtered trace spaces.
//!
//! A [`TraceSpace`] is a finite sample space `{0, .., S-1}` with positive
//! weights summing to one, a fixed matrix size `n`, and a chain of
//! partitions `P_1 ≤ P_2 ≤ .. ≤ P_K` where each level refines the previous
//! one and the last level separates all sites. The algebra is
//! `ℓ_∞(S; M_n)` with trace `τ(x) = Σ_s μ_s · tr(x_s)/n`, and the level-k
//! subalgebra consists of operators constant on the cells of `P_k`.

use serde::{Deserialize, Serialize};

use crate::error::{NcError, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSpace {
    weights: Vec<f64>,
    matrix_dim: usize,
    /// Cell ids exactly as supplied, one vector per level.
    partitions: Vec<Vec<usize>>,
    /// `cells[k][c]` lists the sites of cell `c` at level `k + 1`.
    cells: Vec<Vec<Vec<usize>>>,
    /// `cell_of[k][s]` is the dense cell index of site `s` at level `k + 1`.
    cell_of: Vec<Vec<usize>>,
    /// `cell_weight[k][c]` is the total weight of the cell.
    cell_weight: Vec<Vec<f64>>,
}

/// Wire form of a trace space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceJson {
    pub weights: Vec<f64>,
    pub matrix_dim: usize,
    pub partitions: Vec<Vec<usize>>,
}

impl TraceSpace {
    pub fn new(weights: Vec<f64>, matrix_dim: usize, partitions: Vec<Vec<usize>>) -> Result<Self> {
        let sites = weights.len();
        if sites == 0 {
            return Err(NcError::InvalidSpace("no sites".into()));
        }
        if matrix_dim == 0 {
            return Err(NcError::InvalidSpace("matrix dimension must be positive".into()));
        }
        if partitions.is_empty() {
            return Err(NcError::InvalidSpace("at least one level is required".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(NcError::InvalidSpace(format!("weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(NcError::InvalidSpace(format!("weights sum to {total}, expected 1")));
        }

        let mut cells = Vec::with_capacity(partitions.len());
        let mut cell_of = Vec::with_capacity(partitions.len());
        let mut cell_weight = Vec::with_capacity(partitions.len());
        for (k, part) in partitions.iter().enumerate() {
            if part.len() != sites {
                return Err(NcError::InvalidSpace(format!(
                    "partition at level {} has {} entries, expected {sites}",
                    k + 1,
                    part.len()
                )));
            }
            // Dense cell indices in order of first appearance.
            let mut ids: Vec<usize> = Vec::new();
            let mut dense = Vec::with_capacity(sites);
            let mut level_cells: Vec<Vec<usize>> = Vec::new();
            for (s, id) in part.iter().enumerate() {
                let c = match ids.iter().position(|i| i == id) {
                    Some(c) => c,
                    None => {
                        ids.push(*id);
                        level_cells.push(Vec::new());
                        ids.len() - 1
                    }
                };
                dense.push(c);
                level_cells[c].push(s);
            }
            let weight = level_cells
                .iter()
                .map(|sites| sites.iter().map(|&s| weights[s]).sum())
                .collect();
            cells.push(level_cells);
            cell_of.push(dense);
            cell_weight.push(weight);
        }

        for k in 1..partitions.len() {
            for fine in &cells[k] {
                let parent = cell_of[k - 1][fine[0]];
                if fine.iter().any(|&s| cell_of[k - 1][s] != parent) {
                    return Err(NcError::InvalidSpace(format!(
                        "level {} does not refine level {}",
                        k + 1,
                        k
                    )));
                }
            }
        }
        let last = cells.last().expect("non-empty");
        if last.len() != sites {
            return Err(NcError::InvalidSpace(
                "the finest level must separate all sites".into(),
            ));
        }

        Ok(Self {
            weights,
            matrix_dim,
            partitions,
            cells,
            cell_of,
            cell_weight,
        })
    }

    /// Uniform dyadic space with `2^depth` sites; level `k` groups sites by
    /// their first `k` binary digits (most significant first).
    pub fn dyadic(depth: usize, matrix_dim: usize) -> Result<Self> {
        if depth == 0 || matrix_dim == 0 {
            return Err(NcError::InvalidArgument(format!(
                "dyadic space needs depth >= 1 and matrix_dim >= 1 (got {depth}, {matrix_dim})"
            )));
        }
        if depth > 20 {
            return Err(NcError::InvalidArgument(format!("depth {depth} is too large")));
        }
        let sites = 1usize << depth;
        let weights = vec![1.0 / sites as f64; sites];
        let partitions = (1..=depth)
            .map(|k| (0..sites).map(|s| s >> (depth - k)).collect())
            .collect();
        Self::new(weights, matrix_dim, partitions)
    }

    pub fn site_count(&self) -> usize {
        self.weights.len()
    }

    pub fn matrix_dim(&self) -> usize {
        self.matrix_dim
    }

    /// Number of filtration levels `K`.
    pub fn levels(&self) -> usize {
        self.partitions.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, site: usize) -> f64 {
        self.weights[site]
    }

    pub fn partitions(&self) -> &[Vec<usize>] {
        &self.partitions
    }

    /// Clamp the level convention `E_0 = E_1` and validate the range.
    pub fn check_level(&self, level: usize) -> Result<usize> {
        if level > self.levels() {
            return Err(NcError::LevelOutOfRange {
                level,
                levels: self.levels(),
            });
        }
        Ok(level.max(1))
    }

    /// Cells of level `level` (1-based), each a list of sites.
    pub fn cells(&self, level: usize) -> &[Vec<usize>] {
        &self.cells[level.max(1) - 1]
    }

    pub fn cell_count(&self, level: usize) -> usize {
        self.cells(level).len()
    }

    pub fn cell_of(&self, level: usize, site: usize) -> usize {
        self.cell_of[level.max(1) - 1][site]
    }

    pub fn cell_weight(&self, level: usize, cell: usize) -> f64 {
        self.cell_weight[level.max(1) - 1][cell]
    }

    pub fn to_json(&self) -> SpaceJson {
        SpaceJson {
            weights: self.weights.clone(),
            matrix_dim: self.matrix_dim,
            partitions: self.partitions.clone(),
        }
    }

    pub fn from_json(json: SpaceJson) -> Result<Self> {
        Self::new(json.weights, json.matrix_dim, json.partitions)
    }
}
