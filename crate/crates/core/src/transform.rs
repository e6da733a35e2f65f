//! Relative abundances and the modified centered log-ratio (MCLR) transform.
//!
//! MCLR takes logs of the non-zero compositions of each sample, centres them
//! on the geometric mean of those non-zeros, and leaves zeros untouched. In
//! shifted mode every row is then offset so that its smallest transformed
//! non-zero equals exactly one.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AbundanceMatrix;
use crate::scalar::Scalar;

/// Row-normalized abundances.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositionMatrix<S> {
    pub samples: Vec<String>,
    pub taxa: Vec<String>,
    pub values: Array2<S>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftMode {
    /// No shift; non-zero entries of each row sum to zero.
    Robust,
    /// Shift each row so its non-zero entries are at least one.
    #[default]
    Shifted,
}

impl fmt::Display for ShiftMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShiftMode::Robust => "robust",
            ShiftMode::Shifted => "shifted",
        })
    }
}

impl FromStr for ShiftMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "robust" => Ok(ShiftMode::Robust),
            "shifted" => Ok(ShiftMode::Shifted),
            other => Err(Error::Validation(format!("unknown shift mode `{other}`"))),
        }
    }
}

/// MCLR-transformed matrix. `shifts[i]` is the offset added to row `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedMatrix<S> {
    pub samples: Vec<String>,
    pub taxa: Vec<String>,
    pub values: Array2<S>,
    pub mode: ShiftMode,
    pub shifts: Vec<S>,
}

pub fn relative_abundance<S: Scalar>(counts: &AbundanceMatrix) -> CompositionMatrix<S> {
    let mut values = counts.counts.mapv(S::from_count);
    for mut row in values.rows_mut() {
        let total: S = row.iter().copied().sum();
        row.mapv_inplace(|v| v / total);
    }
    CompositionMatrix {
        samples: counts.samples.clone(),
        taxa: counts.taxa.clone(),
        values,
    }
}

/// Geometric mean of the non-zero entries, computed through summed logs.
pub fn geometric_mean_nonzero<S: Scalar>(row: &[S]) -> Result<S> {
    Ok(mean_log_nonzero(row)?.exp())
}

fn mean_log_nonzero<S: Scalar>(row: &[S]) -> Result<S> {
    let (sum, n) = row
        .iter()
        .filter(|&&x| x != S::zero())
        .fold((S::zero(), 0u64), |(s, n), &x| (s + x.ln(), n + 1));
    if n == 0 {
        return Err(Error::Domain("row has no non-zero entries".into()));
    }
    Ok(sum / S::from_count(n))
}

/// Transforms one composition row in place, returning the applied shift.
pub fn mclr_row<S: Scalar>(row: &mut [S], mode: ShiftMode) -> Result<S> {
    let centre = mean_log_nonzero(row)?;
    // Zero pattern of the input row.
    let nonzero: Vec<bool> = row.iter().map(|&x| x != S::zero()).collect();
    let mut min_ratio = S::infinity();
    for (x, _) in row.iter_mut().zip(&nonzero).filter(|(_, &nz)| nz) {
        *x = x.ln() - centre;
        min_ratio = min_ratio.min(*x);
    }
    match mode {
        ShiftMode::Robust => Ok(S::zero()),
        ShiftMode::Shifted => {
            // (r - r_min) + 1 pins the row minimum at exactly one.
            for (x, _) in row.iter_mut().zip(&nonzero).filter(|(_, &nz)| nz) {
                *x = (*x - min_ratio) + S::one();
            }
            Ok(S::one() + min_ratio.abs())
        }
    }
}

pub fn mclr<S: Scalar>(comp: &CompositionMatrix<S>, mode: ShiftMode) -> Result<TransformedMatrix<S>> {
    let mut values = comp.values.clone();
    let mut shifts = Vec::with_capacity(values.nrows());
    for (i, mut row) in values.rows_mut().into_iter().enumerate() {
        if row.iter().any(|&x| x < S::zero() || !x.is_finite()) {
            return Err(Error::Validation(format!("sample {i} is not a valid composition")));
        }
        let mut buf = row.to_vec();
        shifts.push(mclr_row(&mut buf, mode)?);
        row.assign(&ndarray::ArrayView1::from(&buf));
    }
    Ok(TransformedMatrix {
        samples: comp.samples.clone(),
        taxa: comp.taxa.clone(),
        values,
        mode,
        shifts,
    })
}
