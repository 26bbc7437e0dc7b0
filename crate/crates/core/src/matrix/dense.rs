use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::Float;

use crate::error::{Result, SpammError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
}

/// Element type of a [`DenseMatrix`].
pub trait Scalar:
    Float + Debug + Display + std::fmt::LowerExp + FromStr + Default + Send + Sync + 'static
{
    const PRECISION: Precision;

    fn to_double(self) -> f64;
    fn from_double(x: f64) -> Self;
}

impl Scalar for f32 {
    const PRECISION: Precision = Precision::Single;

    #[inline]
    fn to_double(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_double(x: f64) -> Self {
        x as f32
    }
}

impl Scalar for f64 {
    const PRECISION: Precision = Precision::Double;

    #[inline]
    fn to_double(self) -> f64 {
        self
    }
    #[inline]
    fn from_double(x: f64) -> Self {
        x
    }
}

/// Row-major dense matrix with finite elements.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix<T = f32> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseMatrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("precision", &T::PRECISION)
            .finish_non_exhaustive()
    }
}

fn check_finite<T: Scalar>(data: &[T], cols: usize) -> Result<()> {
    if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
        let (row, col) = if cols == 0 {
            (0, 0)
        } else {
            (pos / cols, pos % cols)
        };
        return Err(SpammError::NonFinite {
            row,
            col,
            value: data[pos].to_double(),
        });
    }
    Ok(())
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(SpammError::DimensionMismatch(format!(
                "{} elements supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        check_finite(&data, cols)?;
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    /// Builds a matrix element by element; fails if `f` yields a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Accepts a nested row literal; all rows must have equal length.
    pub fn from_rows(rows: &[&[T]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(SpammError::DimensionMismatch("ragged rows".into()));
        }
        Self::new(
            rows.len(),
            cols,
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
        )
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn precision(&self) -> Precision {
        T::PRECISION
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Element access; panics on out-of-range indices.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of range"
        );
        self.data[i * self.cols + j]
    }

    pub fn try_get(&self, i: usize, j: usize) -> Result<T> {
        if i >= self.rows || j >= self.cols {
            return Err(self.out_of_range(i, j));
        }
        Ok(self.data[i * self.cols + j])
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) -> Result<()> {
        if i >= self.rows || j >= self.cols {
            return Err(self.out_of_range(i, j));
        }
        if !v.is_finite() {
            return Err(SpammError::NonFinite {
                row: i,
                col: j,
                value: v.to_double(),
            });
        }
        self.data[i * self.cols + j] = v;
        Ok(())
    }

    fn out_of_range(&self, row: usize, col: usize) -> SpammError {
        SpammError::IndexOutOfRange {
            row,
            col,
            rows: self.rows,
            cols: self.cols,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && *self == self.transpose()
    }

    /// Frobenius norm accumulated in double precision.
    pub fn frobenius_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|x| {
                let v = x.to_double();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .fold(0.0, |m, x| m.max(x.to_double().abs()))
    }

    /// Elementwise conversion through `f64`.
    pub fn convert<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|x| U::from_double(x.to_double()))
                .collect(),
        }
    }

    pub fn to_f64(&self) -> DenseMatrix<f64> {
        self.convert()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_length_and_non_finite() {
        assert!(DenseMatrix::<f32>::new(2, 2, vec![0.0; 3]).is_err());
        let err = DenseMatrix::<f32>::new(1, 2, vec![0.0, f32::NAN]).unwrap_err();
        assert!(matches!(err, SpammError::NonFinite { row: 0, col: 1, .. }));
        assert!(DenseMatrix::<f64>::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn set_get_and_ranges() {
        let mut m = DenseMatrix::<f32>::zeros(2, 3);
        m.set(1, 2, 4.5).unwrap();
        assert_eq!(m.get(1, 2), 4.5);
        assert!(m.set(2, 0, 1.0).is_err());
        assert!(m.set(0, 0, f32::NAN).is_err());
        assert!(m.try_get(0, 3).is_err());
    }

    #[test]
    fn frobenius_and_transpose() {
        let m = DenseMatrix::<f32>::from_rows(&[&[3.0, 0.0], &[0.0, 4.0]]).unwrap();
        assert_eq!(m.frobenius_norm(), 5.0);
        let r = DenseMatrix::<f32>::from_rows(&[&[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(r.transpose().shape(), (3, 1));
        assert_eq!(r.transpose().get(2, 0), 3.0);
        assert!(DenseMatrix::<f64>::identity(4).is_symmetric());
        assert_eq!(r.precision(), Precision::Single);
    }
}
