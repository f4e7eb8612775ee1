//! Integral quadratic forms given by symmetric Gram matrices.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::matmod::ModMatrix;
use crate::modint::{ord_p, Order, PrimePower};

/// A symmetric `n x n` matrix of arbitrary-precision integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntQuadForm {
    n: usize,
    entries: Vec<BigInt>,
}

impl IntQuadForm {
    /// Builds a form from row-major entries, checking shape and symmetry.
    pub fn new(n: usize, entries: Vec<BigInt>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Parse(format!(
                "expected {} entries for a {n}x{n} matrix, found {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::NotSymmetric);
                }
            }
        }
        Ok(IntQuadForm { n, entries })
    }

    /// Builds a form from rows of machine integers.
    pub fn from_rows<T: Into<BigInt> + Copy>(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "row of length {} in a matrix with {n} rows",
                    row.len()
                )));
            }
            entries.extend(row.iter().map(|&v| v.into()));
        }
        Self::new(n, entries)
    }

    /// The diagonal form with the given entries.
    pub fn diagonal<T: Into<BigInt> + Copy>(diag: &[T]) -> Self {
        let n = diag.len();
        let mut entries = vec![BigInt::zero(); n * n];
        for (i, &d) in diag.iter().enumerate() {
            entries[i * n + i] = d.into();
        }
        IntQuadForm { n, entries }
    }

    /// Reinterprets a symmetric matrix over `Z/p^k` as an integral form
    /// with entries in `[0, p^k)`.
    pub fn from_mod(m: &ModMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::Parse("matrix is not square".into()));
        }
        Self::new(m.rows(), m.data().to_vec())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[BigInt] {
        &self.entries
    }

    /// The rows as vectors of integers.
    pub fn rows(&self) -> Vec<Vec<BigInt>> {
        self.entries.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    /// The exact determinant, by fraction-free Bareiss elimination.
    pub fn det(&self) -> BigInt {
        bareiss_det(self.n, &self.entries)
    }

    /// `ord_p(det Q)`, infinite for degenerate forms.
    pub fn det_order(&self, p: &BigInt) -> Order {
        ord_p(&self.det(), p)
    }

    /// The default precision `ord_p(det Q) + k_p`; fails on degenerate forms.
    pub fn default_precision(&self, p: &BigInt) -> Result<u32> {
        match self.det_order(p) {
            Order::Finite(o) => Ok(o + crate::modint::k_p(p)),
            Order::Infinite => Err(Error::Degenerate),
        }
    }

    /// The matrix reduced modulo `p^k`.
    pub fn to_mod(&self, pk: &PrimePower) -> ModMatrix {
        ModMatrix::new(self.n, self.n, pk.clone(), self.entries.clone()).expect("dimensions agree by construction")
    }

    /// `x' Q x` over the integers.
    pub fn evaluate(&self, x: &[BigInt]) -> BigInt {
        let mut total = BigInt::zero();
        for i in 0..self.n {
            if x[i].is_zero() {
                continue;
            }
            let mut row = BigInt::zero();
            for j in 0..self.n {
                row += self.get(i, j) * &x[j];
            }
            total += &x[i] * row;
        }
        total
    }
}

/// Fraction-free determinant of a row-major square matrix.
pub(crate) fn bareiss_det(n: usize, entries: &[BigInt]) -> BigInt {
    if n == 0 {
        return BigInt::one();
    }
    let mut a: Vec<BigInt> = entries.to_vec();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for col in 0..n {
        if a[col * n + col].is_zero() {
            let Some(swap) = ((col + 1)..n).find(|&r| !a[r * n + col].is_zero()) else {
                return BigInt::zero();
            };
            for c in 0..n {
                a.swap(col * n + c, swap * n + c);
            }
            sign = -sign;
        }
        let pivot = a[col * n + col].clone();
        for r in (col + 1)..n {
            for c in (col + 1)..n {
                let v = &pivot * &a[r * n + c] - &a[r * n + col] * &a[col * n + c];
                a[r * n + c] = v.div_floor(&prev);
            }
            a[r * n + col] = BigInt::zero();
        }
        prev = pivot;
    }
    sign * &a[(n - 1) * n + (n - 1)]
}

impl fmt::Display for IntQuadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric() {
        assert_eq!(
            IntQuadForm::from_rows(&[vec![1i64, 2], vec![3, 4]]),
            Err(Error::NotSymmetric)
        );
    }

    #[test]
    fn determinants() {
        let q = IntQuadForm::from_rows(&[vec![2i64, 1], vec![1, 2]]).unwrap();
        assert_eq!(q.det(), BigInt::from(3));
        let q = IntQuadForm::from_rows(&[vec![0i64, 1, 0], vec![1, 0, 0], vec![0, 0, 5]]).unwrap();
        assert_eq!(q.det(), BigInt::from(-5));
        let q = IntQuadForm::diagonal(&[1i64, 4, 0]);
        assert_eq!(q.det(), BigInt::from(0));
    }

    #[test]
    fn evaluates_quadratic_value() {
        let q = IntQuadForm::from_rows(&[vec![2i64, 1], vec![1, 4]]).unwrap();
        let x = [BigInt::from(1), BigInt::from(2)];
        assert_eq!(q.evaluate(&x), BigInt::from(22));
    }
}
