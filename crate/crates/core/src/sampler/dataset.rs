//! Aligned angle-pair sequences with presence indicators.
//!
//! A cell (i, j) either holds an observed (phi, psi) pair or does not exist
//! (the alignment has no residue for protein i at position j). Absent cells
//! are not missing data: they carry no likelihood factor at all.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::priors::ResidueClass;
use crate::torus::AnglePair;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("dataset must contain at least one sequence and one position")]
    Empty,
    #[error("sequence '{0}' has no observed cells")]
    EmptySequence(String),
    #[error("duplicate sequence id '{0}'")]
    DuplicateId(String),
    #[error("cells length {got} does not match {n} sequences x {m} positions")]
    ShapeMismatch { got: usize, n: usize, m: usize },
    #[error("residue classes length {got} does not match {m} positions")]
    ClassesMismatch { got: usize, m: usize },
}

/// n aligned sequences over m positions, row-major cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentDataset {
    ids: Vec<String>,
    classes: Vec<ResidueClass>,
    cells: Vec<Option<AnglePair>>,
}

impl AlignmentDataset {
    pub fn new(
        ids: Vec<String>,
        classes: Vec<ResidueClass>,
        cells: Vec<Option<AnglePair>>,
    ) -> Result<Self, DataError> {
        let n = ids.len();
        let m = classes.len();
        if n == 0 || m == 0 {
            return Err(DataError::Empty);
        }
        if cells.len() != n * m {
            return Err(DataError::ShapeMismatch {
                got: cells.len(),
                n,
                m,
            });
        }
        for (i, id) in ids.iter().enumerate() {
            if ids[..i].contains(id) {
                return Err(DataError::DuplicateId(id.clone()));
            }
            if cells[i * m..(i + 1) * m].iter().all(Option::is_none) {
                return Err(DataError::EmptySequence(id.clone()));
            }
        }
        for j in 0..m {
            if (0..n).all(|i| cells[i * m + j].is_none()) {
                // Legal (a leave-one-out fit can empty a thin position); the
                // position is then governed by the prior alone.
                log::warn!("position {} has no observed cells", j + 1);
            }
        }
        Ok(Self {
            ids,
            classes,
            cells,
        })
    }

    pub fn n_sequences(&self) -> usize {
        self.ids.len()
    }

    pub fn n_positions(&self) -> usize {
        self.classes.len()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn class(&self, j: usize) -> ResidueClass {
        self.classes[j]
    }

    pub fn classes(&self) -> &[ResidueClass] {
        &self.classes
    }

    pub fn cell(&self, i: usize, j: usize) -> Option<AnglePair> {
        self.cells[i * self.n_positions() + j]
    }

    pub fn present(&self, i: usize, j: usize) -> bool {
        self.cell(i, j).is_some()
    }

    pub fn row(&self, i: usize) -> &[Option<AnglePair>] {
        let m = self.n_positions();
        &self.cells[i * m..(i + 1) * m]
    }

    /// Number of observed cells at position j.
    pub fn position_count(&self, j: usize) -> usize {
        (0..self.n_sequences())
            .filter(|&i| self.present(i, j))
            .count()
    }

    /// Dataset with sequence `i` removed (leave-one-out fitting).
    pub fn without_sequence(&self, i: usize) -> Result<AlignmentDataset, DataError> {
        let m = self.n_positions();
        let mut ids = self.ids.clone();
        ids.remove(i);
        let mut cells = self.cells.clone();
        cells.drain(i * m..(i + 1) * m);
        AlignmentDataset::new(ids, self.classes.clone(), cells)
    }

    /// Extracts sequence `i` as a standalone target.
    pub fn sequence(&self, i: usize) -> AngleSequence {
        AngleSequence {
            id: self.ids[i].clone(),
            classes: self.classes.clone(),
            cells: self.row(i).to_vec(),
        }
    }
}

/// A single angle-pair sequence with its presence mask and residue classes;
/// used for prediction targets, candidates, and truth sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSequence {
    pub id: String,
    pub classes: Vec<ResidueClass>,
    pub cells: Vec<Option<AnglePair>>,
}

impl AngleSequence {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.cells.iter().map(Option::is_some).collect()
    }

    pub fn observed_positions(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(j, c)| c.map(|_| j))
            .collect()
    }
}
