//! Dense matrices over `Z/p^k`: determinants, inverses, primitive-vector
//! extension, direct sums, local embeddings and verified equivalence witnesses.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;
use thiserror::Error;

use crate::blockdiag::{assemble, BlockDiagForm};
use crate::form::bareiss_det;
use crate::modint::PrimePower;

/// Errors raised by matrix operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatrixError {
    #[error("matrix of shape {rows}x{cols} is not square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not invertible modulo {modulus} (determinant {det})")]
    NotInvertible { det: BigInt, modulus: BigInt },
    #[error("vector is not primitive")]
    NotPrimitive,
    #[error("moduli {left} and {right} differ")]
    ModulusMismatch { left: String, right: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("random search for an invertible matrix exhausted its budget")]
    RetriesExhausted,
    #[error("witness check failed: U' * source * U differs from the target")]
    WitnessMismatch,
}

/// A matrix with entries reduced into `[0, p^k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModMatrix {
    rows: usize,
    cols: usize,
    pk: PrimePower,
    data: Vec<BigInt>,
}

impl ModMatrix {
    /// Builds a matrix from row-major entries, reducing them modulo `p^k`.
    pub fn new(rows: usize, cols: usize, pk: PrimePower, data: Vec<BigInt>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let data = data.iter().map(|v| pk.reduce(v)).collect();
        Ok(ModMatrix { rows, cols, pk, data })
    }

    /// Builds a matrix from rows of machine integers.
    pub fn from_rows<T: Into<BigInt> + Copy>(pk: &PrimePower, rows: &[Vec<T>]) -> Result<Self, MatrixError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(MatrixError::DimensionMismatch("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|row| row.iter().map(|&v| v.into())).collect();
        Self::new(r, c, pk.clone(), data)
    }

    /// The `n x n` zero matrix.
    pub fn zeros(rows: usize, cols: usize, pk: &PrimePower) -> Self {
        ModMatrix {
            rows,
            cols,
            pk: pk.clone(),
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    /// The `n x n` identity.
    pub fn identity(n: usize, pk: &PrimePower) -> Self {
        let mut m = Self::zeros(n, n, pk);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    /// A diagonal matrix.
    pub fn diagonal(entries: &[BigInt], pk: &PrimePower) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n, pk);
        for (i, v) in entries.iter().enumerate() {
            m.data[i * n + i] = pk.reduce(v);
        }
        m
    }

    /// A column vector.
    pub fn column_vector(v: &[BigInt], pk: &PrimePower) -> Self {
        ModMatrix {
            rows: v.len(),
            cols: 1,
            pk: pk.clone(),
            data: v.iter().map(|x| pk.reduce(x)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> &PrimePower {
        &self.pk
    }

    pub fn data(&self) -> &[BigInt] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    /// Sets an entry, reducing it modulo `p^k`.
    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = self.pk.reduce(&v);
    }

    /// The `j`-th column as a vector.
    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    /// The rows as vectors.
    pub fn to_rows(&self) -> Vec<Vec<BigInt>> {
        self.data.chunks(self.cols.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// The same entries reduced to a (lower or equal) precision `p^j`.
    pub fn reduce_to(&self, pk: &PrimePower) -> Result<Self, MatrixError> {
        self.check_same_prime(pk)?;
        Self::new(self.rows, self.cols, pk.clone(), self.data.clone())
    }

    fn check_same_prime(&self, pk: &PrimePower) -> Result<(), MatrixError> {
        if self.pk.p() != pk.p() {
            return Err(MatrixError::ModulusMismatch {
                left: self.pk.to_string(),
                right: pk.to_string(),
            });
        }
        Ok(())
    }

    fn check_same_modulus(&self, other: &ModMatrix) -> Result<(), MatrixError> {
        if self.pk != other.pk {
            return Err(MatrixError::ModulusMismatch {
                left: self.pk.to_string(),
                right: other.pk.to_string(),
            });
        }
        Ok(())
    }

    fn require_square(&self) -> Result<usize, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.rows)
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j).clone());
            }
        }
        ModMatrix {
            rows: self.cols,
            cols: self.rows,
            pk: self.pk.clone(),
            data,
        }
    }

    /// The product `self * other`.
    pub fn mul(&self, other: &ModMatrix) -> Result<Self, MatrixError> {
        self.check_same_modulus(other)?;
        if self.cols != other.rows {
            return Err(MatrixError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut data = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = BigInt::zero();
                for l in 0..self.cols {
                    let a = self.get(i, l);
                    if !a.is_zero() {
                        acc += a * other.get(l, j);
                    }
                }
                data.push(self.pk.reduce(&acc));
            }
        }
        Ok(ModMatrix {
            rows: self.rows,
            cols: other.cols,
            pk: self.pk.clone(),
            data,
        })
    }

    /// The congruence transform `u' * self * u`.
    pub fn congruence(&self, u: &ModMatrix) -> Result<Self, MatrixError> {
        u.transpose().mul(&self.mul(u)?)
    }

    /// `x' * self * x` for a vector `x`, reduced modulo `p^k`.
    pub fn quadratic_value(&self, x: &[BigInt]) -> BigInt {
        let mut acc = BigInt::zero();
        for i in 0..self.rows {
            if x[i].is_zero() {
                continue;
            }
            let mut row = BigInt::zero();
            for j in 0..self.cols {
                row += self.get(i, j) * &x[j];
            }
            acc += &x[i] * row;
        }
        self.pk.reduce(&acc)
    }

    /// The determinant reduced modulo `p^k`, computed exactly over the
    /// integers by fraction-free elimination and then reduced.
    pub fn det_mod(&self) -> Result<BigInt, MatrixError> {
        let n = self.require_square()?;
        Ok(self.pk.reduce(&bareiss_det(n, &self.data)))
    }

    /// True when the determinant is a unit.
    pub fn is_invertible(&self) -> bool {
        self.det_mod().map(|d| self.pk.is_unit(&d)).unwrap_or(false)
    }

    /// The inverse: `det^-1 * adj` for `n <= 4`, Gauss-Jordan elimination with
    /// unit pivots beyond.
    pub fn inverse_mod(&self) -> Result<Self, MatrixError> {
        let n = self.require_square()?;
        let det = self.det_mod()?;
        let det_inv = self.pk.inv(&det).map_err(|_| MatrixError::NotInvertible {
            det: det.clone(),
            modulus: self.pk.modulus().clone(),
        })?;
        if n <= 4 {
            Ok(self.adjugate().scale(&det_inv))
        } else {
            self.gauss_jordan_inverse()
        }
    }

    /// The adjugate matrix.
    pub fn adjugate(&self) -> Self {
        let n = self.rows;
        let mut out = Self::zeros(n, n, &self.pk);
        if n == 1 {
            out.data[0] = BigInt::one();
            return out;
        }
        for i in 0..n {
            for j in 0..n {
                let mut minor = Vec::with_capacity((n - 1) * (n - 1));
                for r in (0..n).filter(|&r| r != j) {
                    for c in (0..n).filter(|&c| c != i) {
                        minor.push(self.get(r, c).clone());
                    }
                }
                let cof = bareiss_det(n - 1, &minor);
                let signed = if (i + j) % 2 == 0 { cof } else { -cof };
                out.data[i * n + j] = self.pk.reduce(&signed);
            }
        }
        out
    }

    fn gauss_jordan_inverse(&self) -> Result<Self, MatrixError> {
        let n = self.rows;
        let m = self.pk.modulus().clone();
        let mut a = self.data.clone();
        let mut inv = Self::identity(n, &self.pk).data;
        for col in 0..n {
            let pivot_row =
                (col..n)
                    .find(|&r| self.pk.is_unit(&a[r * n + col]))
                    .ok_or_else(|| MatrixError::NotInvertible {
                        det: BigInt::zero(),
                        modulus: m.clone(),
                    })?;
            if pivot_row != col {
                for c in 0..n {
                    a.swap(col * n + c, pivot_row * n + c);
                    inv.swap(col * n + c, pivot_row * n + c);
                }
            }
            let piv_inv = self.pk.inv(&a[col * n + col]).map_err(|_| MatrixError::NotInvertible {
                det: BigInt::zero(),
                modulus: m.clone(),
            })?;
            for c in 0..n {
                a[col * n + c] = (&a[col * n + c] * &piv_inv).mod_floor(&m);
                inv[col * n + c] = (&inv[col * n + c] * &piv_inv).mod_floor(&m);
            }
            for r in 0..n {
                if r == col || a[r * n + col].is_zero() {
                    continue;
                }
                let factor = a[r * n + col].clone();
                for c in 0..n {
                    let av = &a[r * n + c] - &factor * &a[col * n + c];
                    a[r * n + c] = av.mod_floor(&m);
                    let iv = &inv[r * n + c] - &factor * &inv[col * n + c];
                    inv[r * n + c] = iv.mod_floor(&m);
                }
            }
        }
        Ok(ModMatrix {
            rows: n,
            cols: n,
            pk: self.pk.clone(),
            data: inv,
        })
    }

    /// Multiplies every entry by a scalar.
    pub fn scale(&self, s: &BigInt) -> Self {
        ModMatrix {
            rows: self.rows,
            cols: self.cols,
            pk: self.pk.clone(),
            data: self.data.iter().map(|v| self.pk.reduce(&(v * s))).collect(),
        }
    }

    /// The principal submatrix on the given indices.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        let n = idx.len();
        let mut data = Vec::with_capacity(n * n);
        for &i in idx {
            for &j in idx {
                data.push(self.get(i, j).clone());
            }
        }
        ModMatrix {
            rows: n,
            cols: n,
            pk: self.pk.clone(),
            data,
        }
    }
}

impl fmt::Display for ModMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.to_rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// True when some component of `v` is coprime to `p`.
pub fn is_primitive(v: &[BigInt], pk: &PrimePower) -> bool {
    v.iter().any(|x| pk.is_unit(x))
}

/// Extends a primitive vector to a matrix of determinant 1 whose first column is `v`.
///
/// With `i` the first unit component, the remaining columns are the standard
/// basis vectors `e_j` for `j != i` in increasing order; the first of them is
/// scaled so that the determinant becomes 1. For `n = 1` the result is `[v]`.
pub fn extend_primitive(v: &[BigInt], pk: &PrimePower) -> Result<ModMatrix, MatrixError> {
    let n = v.len();
    let i = v.iter().position(|x| pk.is_unit(x)).ok_or(MatrixError::NotPrimitive)?;
    let mut m = ModMatrix::zeros(n, n, pk);
    for (r, x) in v.iter().enumerate() {
        m.set(r, 0, x.clone());
    }
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    for (c, &j) in others.iter().enumerate() {
        m.set(j, c + 1, BigInt::one());
    }
    if n > 1 {
        let det = m.det_mod()?;
        let det_inv = pk.inv(&det).map_err(|_| MatrixError::NotPrimitive)?;
        m.set(others[0], 1, det_inv);
    }
    Ok(m)
}

/// The block-diagonal concatenation `a ⊕ b`.
pub fn direct_sum(a: &ModMatrix, b: &ModMatrix) -> Result<ModMatrix, MatrixError> {
    a.check_same_modulus(b)?;
    let n = a.rows + b.rows;
    let m = a.cols + b.cols;
    let mut out = ModMatrix::zeros(n, m, &a.pk);
    for i in 0..a.rows {
        for j in 0..a.cols {
            out.data[i * m + j] = a.get(i, j).clone();
        }
    }
    for i in 0..b.rows {
        for j in 0..b.cols {
            out.data[(a.rows + i) * m + a.cols + j] = b.get(i, j).clone();
        }
    }
    Ok(out)
}

/// The `n x n` identity with `v` placed on the rows and columns listed in `positions`.
pub fn embed_local(n: usize, positions: &[usize], v: &ModMatrix) -> Result<ModMatrix, MatrixError> {
    if v.rows != positions.len() || v.cols != positions.len() || positions.iter().any(|&p| p >= n) {
        return Err(MatrixError::DimensionMismatch(format!(
            "cannot embed a {}x{} matrix at {:?} in dimension {n}",
            v.rows, v.cols, positions
        )));
    }
    let mut u = ModMatrix::identity(n, &v.pk);
    for &p in positions {
        u.data[p * n + p] = BigInt::zero();
    }
    for (a, &pa) in positions.iter().enumerate() {
        for (b, &pb) in positions.iter().enumerate() {
            u.data[pa * n + pb] = v.get(a, b).clone();
        }
    }
    Ok(u)
}

/// The permutation matrix `P` with `(P' A P)[i][j] = A[perm[i]][perm[j]]`.
pub fn permutation_matrix(perm: &[usize], pk: &PrimePower) -> ModMatrix {
    let n = perm.len();
    let mut u = ModMatrix::zeros(n, n, pk);
    for (j, &src) in perm.iter().enumerate() {
        u.data[src * n + j] = BigInt::one();
    }
    u
}

/// A uniformly random invertible matrix, by rejection sampling.
pub fn random_gl<R: Rng + ?Sized>(n: usize, pk: &PrimePower, rng: &mut R) -> Result<ModMatrix, MatrixError> {
    const BUDGET: usize = 10_000;
    for _ in 0..BUDGET {
        let data = (0..n * n).map(|_| random_residue(pk, rng)).collect();
        let m = ModMatrix::new(n, n, pk.clone(), data)?;
        if m.is_invertible() {
            return Ok(m);
        }
    }
    Err(MatrixError::RetriesExhausted)
}

/// A uniformly random residue in `[0, p^k)`.
pub fn random_residue<R: Rng + ?Sized>(pk: &PrimePower, rng: &mut R) -> BigInt {
    random_below(pk.modulus(), rng)
}

/// A uniformly random integer in `[0, bound)`.
pub fn random_below<R: Rng + ?Sized>(bound: &BigInt, rng: &mut R) -> BigInt {
    use num_bigint::RandBigInt;
    rng.gen_bigint_range(&BigInt::zero(), bound)
}

/// A verified equivalence `u' * source * u = target (mod p^k)` with `u` invertible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    source: ModMatrix,
    target: ModMatrix,
    u: ModMatrix,
}

impl Witness {
    /// Builds a witness after checking that `u` is invertible and maps `source` to `target`.
    pub fn new(source: ModMatrix, target: ModMatrix, u: ModMatrix) -> Result<Self, MatrixError> {
        source.check_same_modulus(&target)?;
        source.check_same_modulus(&u)?;
        if !source.is_square() || !target.is_square() || !u.is_square() {
            return Err(MatrixError::NotSquare {
                rows: u.rows,
                cols: u.cols,
            });
        }
        if source.rows != target.rows || source.rows != u.rows {
            return Err(MatrixError::DimensionMismatch(format!(
                "source {}, target {}, u {}",
                source.rows, target.rows, u.rows
            )));
        }
        let det = u.det_mod()?;
        if !u.pk.is_unit(&det) {
            return Err(MatrixError::NotInvertible {
                det,
                modulus: u.pk.modulus().clone(),
            });
        }
        if source.congruence(&u)? != target {
            return Err(MatrixError::WitnessMismatch);
        }
        Ok(Witness { source, target, u })
    }

    /// The identity witness on a form.
    pub fn identity(form: ModMatrix) -> Self {
        let u = ModMatrix::identity(form.rows, &form.pk);
        Witness {
            source: form.clone(),
            target: form,
            u,
        }
    }

    /// The witness for applying `u` to `source`; the target is computed.
    pub fn apply(source: ModMatrix, u: ModMatrix) -> Result<Self, MatrixError> {
        let target = source.congruence(&u)?;
        Self::new(source, target, u)
    }

    pub fn source(&self) -> &ModMatrix {
        &self.source
    }

    pub fn target(&self) -> &ModMatrix {
        &self.target
    }

    pub fn u(&self) -> &ModMatrix {
        &self.u
    }

    pub fn modulus(&self) -> &PrimePower {
        &self.u.pk
    }

    pub fn into_u(self) -> ModMatrix {
        self.u
    }

    /// Chains `self: A -> B` with `next: B -> C` into `A -> C`.
    pub fn compose(&self, next: &Witness) -> Result<Self, MatrixError> {
        if self.target != next.source {
            return Err(MatrixError::WitnessMismatch);
        }
        let u = self.u.mul(&next.u)?;
        Self::new(self.source.clone(), next.target.clone(), u)
    }
}

/// Applies `v` to the contiguous run of blocks of `d` starting at `start_block`,
/// returning the transformed matrix and the witness `I ⊕ v ⊕ I` from `assemble(d)`.
pub fn apply_local(d: &BlockDiagForm, start_block: usize, v: &ModMatrix) -> Result<(ModMatrix, Witness), MatrixError> {
    if start_block > d.blocks().len() {
        return Err(MatrixError::DimensionMismatch(format!(
            "block index {start_block} out of range"
        )));
    }
    let offset: usize = d.blocks()[..start_block].iter().map(|b| b.block.dim()).sum();
    let mut run = 0usize;
    let mut covered = false;
    for b in &d.blocks()[start_block..] {
        run += b.block.dim();
        if run == v.rows {
            covered = true;
            break;
        }
        if run > v.rows {
            break;
        }
    }
    if !covered {
        return Err(MatrixError::DimensionMismatch(format!(
            "a {}x{} transformation does not cover whole blocks from block {start_block}",
            v.rows, v.cols
        )));
    }
    if !v.is_invertible() {
        return Err(MatrixError::NotInvertible {
            det: v.det_mod()?,
            modulus: v.pk.modulus().clone(),
        });
    }
    let source = assemble(d);
    let positions: Vec<usize> = (offset..offset + v.rows).collect();
    let u = embed_local(source.rows, &positions, v)?;
    let w = Witness::apply(source, u)?;
    Ok((w.target().clone(), w))
}
