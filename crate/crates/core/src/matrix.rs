//! Dense complex matrices tagged with what their rows and columns index.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LimitSign;

pub type CMatrix = DMatrix<Complex64>;

/// Meaning of a matrix index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexKind {
    /// Boundary vertices of a cube, in domain order.
    Boundary,
    /// Nodes of an angular grid on `M_λ`.
    Angular,
    /// Interior vertices of a cube, in domain order.
    Interior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorMatrix {
    #[serde(with = "serde_cmatrix")]
    pub data: CMatrix,
    pub rows: IndexKind,
    pub cols: IndexKind,
    pub lambda: f64,
    pub sign: Option<LimitSign>,
}

impl OperatorMatrix {
    pub fn new(data: CMatrix, rows: IndexKind, cols: IndexKind, lambda: f64, sign: Option<LimitSign>) -> Self {
        OperatorMatrix {
            data,
            rows,
            cols,
            lambda,
            sign,
        }
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    /// `self · other`, refusing products whose inner indices disagree.
    pub fn compose(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.cols != other.rows {
            return Err(Error::IndexMismatch(format!(
                "cannot compose ({:?} x {:?}) with ({:?} x {:?})",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if self.ncols() != other.nrows() {
            return Err(Error::IndexMismatch(format!(
                "inner dimensions differ: {} vs {}",
                self.ncols(),
                other.nrows()
            )));
        }
        if (self.lambda - other.lambda).abs() > 1e-14 {
            return Err(Error::IndexMismatch(format!(
                "operators built at different energies {} and {}",
                self.lambda, other.lambda
            )));
        }
        Ok(OperatorMatrix {
            data: &self.data * &other.data,
            rows: self.rows,
            cols: other.cols,
            lambda: self.lambda,
            sign: self.sign.or(other.sign),
        })
    }
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// 2-norm condition number from the singular values.
pub fn condition_number(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `σ_min / σ_max`.
pub fn singular_ratio(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    sv.min() / sv.max()
}

/// Numerically safe inverse; `classify` turns a bad condition number into
/// the caller's error kind.
pub fn checked_inverse(m: &CMatrix, max_cond: f64, classify: impl Fn(f64) -> Error) -> Result<CMatrix> {
    let cond = condition_number(m);
    if !(cond <= max_cond) {
        return Err(classify(cond));
    }
    m.clone().lu().try_inverse().ok_or_else(|| classify(f64::INFINITY))
}

pub fn real_diag(v: &[f64]) -> CMatrix {
    CMatrix::from_fn(v.len(), v.len(), |i, j| if i == j { Complex64::new(v[i], 0.0) } else { Complex64::default() })
}

/// Serde adapter writing a complex matrix as rows of `[re, im]` pairs.
pub mod serde_cmatrix {
    use super::CMatrix;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(CMatrix::from_fn(nrows, ncols, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_checks_index_semantics() {
        let a = OperatorMatrix::new(CMatrix::identity(2, 3), IndexKind::Angular, IndexKind::Boundary, 0.3, None);
        let b = OperatorMatrix::new(CMatrix::identity(3, 3), IndexKind::Boundary, IndexKind::Boundary, 0.3, None);
        assert!(a.compose(&b).is_ok());
        assert!(matches!(b.compose(&a), Err(Error::IndexMismatch(_))));
        let c = OperatorMatrix::new(CMatrix::identity(3, 3), IndexKind::Boundary, IndexKind::Boundary, 0.4, None);
        assert!(a.compose(&c).is_err());
    }

    #[test]
    fn matrix_serde_round_trip() {
        #[derive(serde::Serialize, serde::Deserialize)]
        struct W(#[serde(with = "serde_cmatrix")] CMatrix);
        let m = CMatrix::from_fn(2, 3, |i, j| Complex64::new(i as f64 + 0.1, -(j as f64) / 3.0));
        let s = serde_json::to_string(&W(m.clone())).unwrap();
        assert!(s.starts_with("[[[0.1,"));
        let back: W = serde_json::from_str(&s).unwrap();
        assert_eq!(back.0, m);
    }

    #[test]
    fn inverse_and_condition() {
        let m = real_diag(&[1.0, 1e-3]);
        assert!((condition_number(&m) - 1e3).abs() < 1e-9);
        let inv = checked_inverse(&m, 1e12, |c| Error::ExceptionalEnergy { what: "t".into(), cond: c }).unwrap();
        assert!((inv[(1, 1)].re - 1e3).abs() < 1e-9);
        let sing = real_diag(&[1.0, 0.0]);
        assert!(checked_inverse(&sing, 1e12, |c| Error::DirichletEigenvalue { cond: c }).is_err());
    }
}
