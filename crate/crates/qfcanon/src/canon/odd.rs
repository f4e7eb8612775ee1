//! Canonical forms for odd primes: every scale becomes `1, ..., 1, {1 or sigma_p}`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::One;

use super::{rebase, CanonicalForm};
use crate::blockdiag::{
    assemble, block_diagonalize, block_diagonalize_mod, sort_blocks, Block, BlockDiagForm, ScaledBlock,
};
use crate::error::{Error, Result};
use crate::form::IntQuadForm;
use crate::matmod::{embed_local, extend_primitive, ModMatrix, Witness};
use crate::modint::{legendre, nonresidue_sum_pair, sigma_p, sqrt_mod, PrimePower};

/// The representative of the square class of a unit: 1 or `sigma_p`.
fn class_of(u: &BigInt, p: &BigInt) -> Result<BigInt> {
    if legendre(u, p)? == 1 {
        Ok(BigInt::one())
    } else {
        Ok(sigma_p(p)?)
    }
}

/// A root `x` of `x^2 u = target (mod p^k)` for units of equal square class.
fn scaling(u: &BigInt, target: &BigInt, pk: &PrimePower) -> Result<BigInt> {
    Ok(sqrt_mod(&pk.reduce(&(target * pk.inv(u)?)), pk)?)
}

/// Transforms `tau1 ⊕ tau2` into `1 ⊕ tau` with `tau` in `{1, sigma_p}` over `pk`.
pub fn canp2_pair(tau1: &BigInt, tau2: &BigInt, pk: &PrimePower) -> Result<((BigInt, BigInt), ModMatrix)> {
    let p = pk.p().clone();
    if pk.is_two() || !pk.is_unit(tau1) || !pk.is_unit(tau2) {
        return Err(Error::PreconditionViolated(
            "canp2_pair needs two units and an odd prime".into(),
        ));
    }
    let one = BigInt::one();
    let d = ModMatrix::diagonal(&[tau1.clone(), tau2.clone()], pk);
    let u = if legendre(tau1, &p)? == 1 {
        let x = scaling(tau1, &one, pk)?;
        let y = scaling(tau2, &class_of(tau2, &p)?, pk)?;
        ModMatrix::diagonal(&[x, y], pk)
    } else if legendre(tau2, &p)? == 1 {
        let swap = ModMatrix::from_rows(pk, &[vec![0, 1], vec![1, 0]])?;
        let ((_, _), inner) = canp2_pair(tau2, tau1, pk)?;
        swap.mul(&inner)?
    } else {
        let (t1, _) = nonresidue_sum_pair(&p)?;
        let t2 = pk.reduce(&(&one - &t1));
        let x = scaling(tau1, &t1, pk)?;
        let y = scaling(tau2, &t2, pk)?;
        let ext = extend_primitive(&[x, y], pk)?;
        let (diag, w) = block_diagonalize_mod(&d.congruence(&ext)?)?;
        let rest = match diag.blocks() {
            [first, second] if first.block == Block::TypeI(one.clone()) => match &second.block {
                Block::TypeI(a) => a.clone(),
                Block::TypeII { .. } => return Err(Error::internal("odd prime produced a Type II block")),
            },
            _ => return Err(Error::internal("the leading 1 was not kept")),
        };
        let z = scaling(&rest, &class_of(&rest, &p)?, pk)?;
        ext.mul(w.u())?.mul(&ModMatrix::diagonal(&[one.clone(), z], pk))?
    };
    let out = d.congruence(&u)?;
    if out.get(0, 1) != &BigInt::from(0) || !out.get(0, 0).is_one() {
        return Err(Error::internal("canp2_pair did not reach 1 ⊕ tau"));
    }
    Ok(((out.get(0, 0).clone(), out.get(1, 1).clone()), u))
}

/// Canonicalizes `q` over `Z/p^k` for an odd prime, `k > ord_p(det q)`.
///
/// The form is diagonalized and sorted by scale; each unit is scaled to 1 or
/// `sigma_p`, and consecutive units of a scale are swept with `canp2_pair` so
/// that the only possible `sigma_p` ends up last.
pub fn canonicalize_odd(q: &IntQuadForm, pk: &PrimePower) -> Result<(CanonicalForm, Witness)> {
    if pk.is_two() {
        return Err(Error::PreconditionViolated(
            "canonicalize_odd needs an odd prime".into(),
        ));
    }
    let ord = q.det_order(pk.p()).finite().ok_or(Error::Degenerate)?;
    if pk.k() <= ord {
        return Err(Error::PrecisionTooLow {
            k: pk.k(),
            required: ord + 1,
        });
    }
    let (d, w0) = block_diagonalize(q, pk)?;
    if d.zero_dim() > 0 {
        return Err(Error::Degenerate);
    }
    let (sorted, w1) = sort_blocks(&d)?;
    let n = sorted.dim();
    let mut u = w0.u().mul(w1.u())?;
    let mut units: Vec<(u32, BigInt)> = Vec::with_capacity(n);
    for (i, b) in sorted.blocks().iter().enumerate() {
        let Block::TypeI(v) = &b.block else {
            return Err(Error::internal("odd prime produced a Type II block"));
        };
        let local = pk.with_k(pk.k() - b.scale)?;
        let target = class_of(v, pk.p())?;
        let x = scaling(v, &target, &local)?;
        u = u.mul(&embed_local(n, &[i], &rebase(&ModMatrix::diagonal(&[x], &local), pk)?)?)?;
        units.push((b.scale, target));
    }
    for i in 0..n.saturating_sub(1) {
        if units[i].0 != units[i + 1].0 {
            continue;
        }
        let local = pk.with_k(pk.k() - units[i].0)?;
        let ((a, c), v) = canp2_pair(&units[i].1, &units[i + 1].1, &local)?;
        u = u.mul(&embed_local(n, &[i, i + 1], &rebase(&v, pk)?)?)?;
        units[i].1 = a;
        units[i + 1].1 = c;
    }
    let blocks = units
        .into_iter()
        .map(|(s, v)| ScaledBlock::new(s, Block::TypeI(v.mod_floor(&pk.pow_p(pk.k() - s)))))
        .collect();
    let form = BlockDiagForm::new(pk.clone(), blocks, 0);
    let witness = Witness::new(q.to_mod(pk), assemble(&form), u)?;
    Ok((CanonicalForm::new(form), witness))
}
