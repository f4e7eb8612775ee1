//! Diagonalization over the rationals, the real signature, p-antisquares and
//! the p-signature (oddity for `p = 2`).

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::form::IntQuadForm;
use crate::modint::{kronecker2, legendre, padic_split};

/// A diagonal form with non-zero rational entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatDiagForm {
    entries: Vec<BigRational>,
}

impl RatDiagForm {
    pub fn entries(&self) -> &[BigRational] {
        &self.entries
    }
}

/// A square matrix of rationals in row-major order.
pub type RatMatrix = Vec<Vec<BigRational>>;

/// Diagonalizes `q` over the rationals by symmetric elimination, returning the
/// diagonal and an invertible `V` with `V' q V` equal to it.
pub fn rational_diagonalize(q: &IntQuadForm) -> Result<(RatDiagForm, RatMatrix)> {
    if q.det().is_zero() {
        return Err(Error::Degenerate);
    }
    let n = q.dim();
    let mut a: RatMatrix = (0..n)
        .map(|i| (0..n).map(|j| BigRational::from_integer(q.get(i, j).clone())).collect())
        .collect();
    let mut v: RatMatrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect();
    for cur in 0..n {
        if a[cur][cur].is_zero() {
            repair_pivot(&mut a, &mut v, cur)?;
        }
        let pivot = a[cur][cur].clone();
        for m in (cur + 1)..n {
            if a[cur][m].is_zero() {
                continue;
            }
            let c = -(&a[cur][m] / &pivot);
            add_multiple(&mut a, &mut v, cur, m, &c);
        }
    }
    let entries = (0..n).map(|i| a[i][i].clone()).collect();
    Ok((RatDiagForm { entries }, v))
}

/// Makes `a[cur][cur]` non-zero by adding another basis vector or swapping.
fn repair_pivot(a: &mut RatMatrix, v: &mut RatMatrix, cur: usize) -> Result<()> {
    let n = a.len();
    let two = BigRational::from_integer(BigInt::from(2));
    if let Some(j) = ((cur + 1)..n).find(|&j| !a[cur][j].is_zero() && !(&two * &a[cur][j] + &a[j][j]).is_zero()) {
        add_multiple(a, v, j, cur, &BigRational::one());
        return Ok(());
    }
    if let Some(j) = ((cur + 1)..n).find(|&j| !a[j][j].is_zero()) {
        swap(a, v, cur, j);
        return Ok(());
    }
    for i in cur..n {
        if let Some(j) = ((i + 1)..n).find(|&j| !a[i][j].is_zero()) {
            swap(a, v, cur, i);
            add_multiple(a, v, j, cur, &BigRational::one());
            return Ok(());
        }
    }
    Err(Error::Degenerate)
}

/// Basis change `b_dst += c * b_src`.
fn add_multiple(a: &mut RatMatrix, v: &mut RatMatrix, src: usize, dst: usize, c: &BigRational) {
    let n = a.len();
    for row in a.iter_mut() {
        let t = &row[dst] + c * &row[src];
        row[dst] = t;
    }
    for col in 0..n {
        let t = &a[dst][col] + c * &a[src][col];
        a[dst][col] = t;
    }
    for row in v.iter_mut() {
        let t = &row[dst] + c * &row[src];
        row[dst] = t;
    }
}

fn swap(a: &mut RatMatrix, v: &mut RatMatrix, i: usize, j: usize) {
    for row in a.iter_mut() {
        row.swap(i, j);
    }
    a.swap(i, j);
    for row in v.iter_mut() {
        row.swap(i, j);
    }
}

/// The real signature: positive minus negative entries of a rational diagonalization.
pub fn signature(q: &IntQuadForm) -> Result<i64> {
    let (d, _) = rational_diagonalize(q)?;
    Ok(d.entries.iter().map(|x| if x.is_positive() { 1 } else { -1 }).sum())
}

/// Splits a non-zero rational into `(alpha, a, b)` with `x = p^alpha * a / b`
/// and `a`, `b` coprime to `p`.
fn rational_split(x: &BigRational, p: &BigInt) -> Result<(i64, BigInt, BigInt)> {
    if x.is_zero() {
        return Err(Error::ZeroInput);
    }
    let (on, a) = padic_split(x.numer(), p);
    let (od, b) = padic_split(x.denom(), p);
    let on = on.finite().ok_or(Error::ZeroInput)? as i64;
    let od = od.finite().ok_or(Error::ZeroInput)? as i64;
    Ok((on - od, a, b))
}

fn unit_sign(u: &BigInt, p: &BigInt) -> Result<i8> {
    if *p == BigInt::from(2) {
        Ok(kronecker2(u)?)
    } else {
        Ok(legendre(u, p)?)
    }
}

/// True when `x = p^alpha * a / b` has odd `alpha` and the unit signs of `a` and `b` differ.
///
/// For `p = 2` the sign of a unit is its Kronecker symbol `(u|2)`.
pub fn is_antisquare(x: &BigRational, p: &BigInt) -> Result<bool> {
    let (alpha, a, b) = rational_split(x, p)?;
    if alpha.rem_euclid(2) == 0 {
        return Ok(false);
    }
    Ok(unit_sign(&a, p)? != unit_sign(&b, p)?)
}

/// The p-signature modulo 8; for `p = 2` this is the oddity.
pub fn p_signature(q: &IntQuadForm, p: &BigInt) -> Result<u8> {
    let (d, _) = rational_diagonalize(q)?;
    let eight = BigInt::from(8);
    let two = *p == BigInt::from(2);
    let mut total = BigInt::zero();
    for x in &d.entries {
        let (alpha, a, b) = rational_split(x, p)?;
        if two {
            total += &a * &b;
        } else if alpha.rem_euclid(2) == 1 {
            total += p;
        } else {
            total += 1;
        }
        if is_antisquare(x, p)? {
            total += 4;
        }
    }
    Ok(total.mod_floor(&eight).try_into().unwrap_or(0))
}
