use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{GhOperator, OperatorOptions, WeightSpec};

/// JSON description of an operator:
///
/// ```json
/// {"kind": "shift", "core": {"-1": 3.0, "0": 0.25}, "left_tail": 0.5, "right_tail": 2.0}
/// {"kind": "matrix", "rows": [[0.5, 0.0], [0.0, 3.0]]}
/// ```
///
/// An empty shift core puts the left tail on `n < split` (default `split = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OperatorDescriptor {
    Shift {
        #[serde(default)]
        core: BTreeMap<String, f64>,
        left_tail: f64,
        right_tail: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        split: Option<i64>,
    },
    Matrix {
        rows: Vec<Vec<f64>>,
    },
}

impl OperatorDescriptor {
    pub fn weights(&self) -> Result<WeightSpec> {
        match self {
            OperatorDescriptor::Shift {
                core,
                left_tail,
                right_tail,
                split,
            } => {
                let mut table = Vec::with_capacity(core.len());
                for (k, w) in core {
                    let idx: i64 = k.trim().parse().map_err(|_| {
                        Error::Config(format!("shift core key `{k}` is not an integer"))
                    })?;
                    table.push((idx, *w));
                }
                WeightSpec::from_table(&table, *left_tail, *right_tail, split.unwrap_or(1))
            }
            OperatorDescriptor::Matrix { .. } => {
                Err(Error::Config("matrix descriptor has no weights".into()))
            }
        }
    }

    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        match self {
            OperatorDescriptor::Matrix { rows } => {
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config(format!(
                        "matrix rows must form a square array, got {n} rows"
                    )));
                }
                Ok(DMatrix::from_row_iterator(
                    n,
                    n,
                    rows.iter().flatten().copied(),
                ))
            }
            OperatorDescriptor::Shift { .. } => {
                Err(Error::Config("shift descriptor has no matrix".into()))
            }
        }
    }

    pub fn build(&self, opts: &OperatorOptions) -> Result<GhOperator> {
        match self {
            OperatorDescriptor::Shift { .. } => GhOperator::shift_with(self.weights()?, opts),
            OperatorDescriptor::Matrix { .. } => GhOperator::matrix_with(self.matrix()?, opts),
        }
    }
}
