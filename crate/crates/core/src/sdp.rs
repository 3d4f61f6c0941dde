//! Semidefinite programs in moment (LMI) form.
//!
//! ```text
//! opt   c'y + c0
//! s.t.  E y = e
//!       F0_j + sum_k y_k Fk_j  PSD   for every block j
//! ```
//!
//! Each block is stored as upper-triangular triplets `(row, col, var, coef)`;
//! `var = None` marks the constant matrix `F0`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("block {block} entry ({row},{col}) lies outside a {dim}x{dim} block or below the diagonal")]
    BadEntry {
        block: usize,
        row: usize,
        col: usize,
        dim: usize,
    },
    #[error("variable index {index} out of range ({num_vars} variables)")]
    BadVariable { index: usize, num_vars: usize },
    #[error("{0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    /// `+1` for maximization, `-1` for minimization.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub row: usize,
    pub col: usize,
    pub var: Option<usize>,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdBlock {
    pub dim: usize,
    pub entries: Vec<BlockEntry>,
}

impl PsdBlock {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Adds `coef * y[var]` (or a constant) at `(row, col)` and its mirror.
    pub fn push(&mut self, row: usize, col: usize, var: Option<usize>, coef: f64) {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        self.entries.push(BlockEntry { row, col, var, coef });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearEquality {
    pub label: String,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub num_vars: usize,
    #[serde(default)]
    pub var_labels: Vec<String>,
    pub blocks: Vec<PsdBlock>,
    pub equalities: Vec<LinearEquality>,
    pub objective: Vec<(usize, f64)>,
    #[serde(default)]
    pub objective_constant: f64,
    pub sense: Sense,
}

impl SdpProblem {
    pub fn new(num_vars: usize, sense: Sense) -> Self {
        Self {
            num_vars,
            var_labels: Vec::new(),
            blocks: Vec::new(),
            equalities: Vec::new(),
            objective: Vec::new(),
            objective_constant: 0.0,
            sense,
        }
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let check_var = |index: usize| {
            if index < self.num_vars {
                Ok(())
            } else {
                Err(SdpError::BadVariable {
                    index,
                    num_vars: self.num_vars,
                })
            }
        };
        for (block, b) in self.blocks.iter().enumerate() {
            for e in &b.entries {
                if e.row > e.col || e.col >= b.dim {
                    return Err(SdpError::BadEntry {
                        block,
                        row: e.row,
                        col: e.col,
                        dim: b.dim,
                    });
                }
                if let Some(v) = e.var {
                    check_var(v)?;
                }
            }
        }
        for eq in &self.equalities {
            for &(v, _) in &eq.terms {
                check_var(v)?;
            }
        }
        for &(v, _) in &self.objective {
            check_var(v)?;
        }
        Ok(())
    }

    /// Objective value `c'y + c0`.
    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(k, c)| c * y[k]).sum::<f64>()
    }

    /// Dense symmetric matrix of block `j` at the point `y`, row-major.
    pub fn block_matrix(&self, j: usize, y: &[f64]) -> Vec<f64> {
        let b = &self.blocks[j];
        let n = b.dim;
        let mut m = vec![0.0; n * n];
        for e in &b.entries {
            let v = e.coef * e.var.map_or(1.0, |k| y[k]);
            m[e.row * n + e.col] += v;
            if e.row != e.col {
                m[e.col * n + e.row] += v;
            }
        }
        m
    }

    /// Sparse text dump: one line per triplet, grouped by section.
    ///
    /// ```text
    /// sense max
    /// vars N
    /// block j dim
    /// <row> <col> <var|-> <coef>
    /// eq <label> <rhs>
    /// <var> <coef>
    /// obj <constant>
    /// <var> <coef>
    /// ```
    pub fn to_sparse_text(&self) -> String {
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Maximize => "max",
            Sense::Minimize => "min",
        };
        let _ = writeln!(out, "sense {sense}");
        let _ = writeln!(out, "vars {}", self.num_vars);
        for (j, b) in self.blocks.iter().enumerate() {
            let _ = writeln!(out, "block {j} {}", b.dim);
            for e in &b.entries {
                match e.var {
                    Some(v) => {
                        let _ = writeln!(out, "{} {} {} {:e}", e.row, e.col, v, e.coef);
                    }
                    None => {
                        let _ = writeln!(out, "{} {} - {:e}", e.row, e.col, e.coef);
                    }
                }
            }
        }
        for eq in &self.equalities {
            let _ = writeln!(out, "eq {} {:e}", eq.label.replace(char::is_whitespace, "_"), eq.rhs);
            for &(v, c) in &eq.terms {
                let _ = writeln!(out, "{v} {c:e}");
            }
        }
        let _ = writeln!(out, "obj {:e}", self.objective_constant);
        for &(v, c) in &self.objective {
            let _ = writeln!(out, "{v} {c:e}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SdpError> {
        let p: Self = serde_json::from_str(text).map_err(|e| SdpError::Format(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}
