//! Canonical forms over `Z/p^k` with explicit witnesses, and transformations
//! between equivalent forms.

mod odd;
mod target;
mod two;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use rand::Rng;

use crate::blockdiag::{assemble, Block, BlockDiagForm};
use crate::error::{Error, Result};
use crate::form::IntQuadForm;
use crate::matmod::{ModMatrix, Witness};
use crate::modint::{legendre, sigma_p, sqrt_mod, PrimePower};
use crate::symbols::{canonical_two_symbol, p_symbol, PSymbolOdd};

pub use odd::{canonicalize_odd, canp2_pair};
pub use target::canonical_target;
pub use two::{
    absorb_type2_dim3, canonicalize_compartment, canonicalize_two, compartment_dim3, sign_walk_step, type2_canonical,
    WalkShape,
};

/// A form in canonical shape over `Z/p^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalForm {
    form: BlockDiagForm,
}

impl CanonicalForm {
    pub(crate) fn new(form: BlockDiagForm) -> Self {
        CanonicalForm { form }
    }

    pub fn form(&self) -> &BlockDiagForm {
        &self.form
    }

    pub fn modulus(&self) -> &PrimePower {
        self.form.modulus()
    }

    /// The canonical form as an explicit matrix.
    pub fn matrix(&self) -> ModMatrix {
        assemble(&self.form)
    }
}

impl fmt::Display for CanonicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.form)
    }
}

/// Reinterprets the entries of `m` modulo another power of the same prime.
pub(crate) fn rebase(m: &ModMatrix, pk: &PrimePower) -> Result<ModMatrix> {
    Ok(m.reduce_to(pk)?)
}

/// The `1 x 1` matrix `[x]`.
pub(crate) fn scalar(x: BigInt, pk: &PrimePower) -> ModMatrix {
    ModMatrix::diagonal(&[x], pk)
}

/// Canonicalizes a single block of scale 0 over `pk`.
///
/// A Type I unit maps to 1 or `sigma_p` for odd `p` and to its residue modulo 8
/// for `p = 2`; a Type II block maps to `T+` or `T-`.
pub fn can_block(block: &Block, pk: &PrimePower) -> Result<(Block, Witness)> {
    match block {
        Block::TypeI(u) => {
            if !pk.is_unit(u) {
                return Err(Error::PreconditionViolated(format!("{u} is not a unit")));
            }
            let target = if pk.is_two() {
                u.mod_floor(&BigInt::from(8))
            } else if legendre(u, pk.p())? == 1 {
                BigInt::from(1)
            } else {
                sigma_p(pk.p())?
            };
            let x = sqrt_mod(&(pk.inv(u)? * &target), pk)?;
            let witness = Witness::new(scalar(u.clone(), pk), scalar(target.clone(), pk), scalar(x, pk))?;
            Ok((Block::TypeI(target), witness))
        }
        Block::TypeII { .. } if pk.is_two() => type2_canonical(block, pk.k()),
        Block::TypeII { .. } => Err(Error::PreconditionViolated(
            "Type II blocks exist only for p = 2".into(),
        )),
    }
}

/// The precision required by the canonicalization of `q` at `p`, and the default.
fn precision(q: &IntQuadForm, pk_p: &BigInt, k: Option<u32>) -> Result<u32> {
    let ord = q.det_order(pk_p).finite().ok_or(Error::Degenerate)?;
    let two = *pk_p == BigInt::from(2);
    let required = if two { ord + 3 } else { ord + 1 };
    let k = k.unwrap_or(required);
    if k < required {
        return Err(Error::PrecisionTooLow { k, required });
    }
    Ok(k)
}

/// Computes `can_p(q)` over `Z/p^k` with a witness `U`, `U' q U = can_p(q)`.
///
/// The default precision is `ord_p(det q) + k_p`.
pub fn canonicalize<R: Rng + ?Sized>(
    q: &IntQuadForm,
    p: &BigInt,
    k: Option<u32>,
    rng: &mut R,
) -> Result<(CanonicalForm, Witness)> {
    let k = precision(q, p, k)?;
    let pk = PrimePower::new(p.clone(), k)?;
    if pk.is_two() {
        canonicalize_two(q, k, rng)
    } else {
        canonicalize_odd(q, &pk)
    }
}

/// Describes why two forms of equal dimension are inequivalent at `p`.
fn distinguish(q1: &IntQuadForm, q2: &IntQuadForm, p: &BigInt) -> String {
    if *p == BigInt::from(2) {
        match (canonical_two_symbol(q1), canonical_two_symbol(q2)) {
            (Ok(a), Ok(b)) => a
                .first_difference(&b)
                .map(|d| format!("canonical 2-symbols differ at {d}"))
                .unwrap_or_else(|| format!("canonical 2-symbols {a} and {b}")),
            _ => "the 2-symbols could not be compared".into(),
        }
    } else {
        match (p_symbol(q1, p), p_symbol(q2, p)) {
            (Ok(a), Ok(b)) => first_odd_difference(&a, &b).unwrap_or_else(|| format!("{p}-symbols {a} and {b}")),
            _ => "the p-symbols could not be compared".into(),
        }
    }
}

/// The first constituent at which two odd p-symbols disagree.
fn first_odd_difference(a: &PSymbolOdd, b: &PSymbolOdd) -> Option<String> {
    let p = a.p();
    let scales: BTreeSet<u32> = a.entries().iter().chain(b.entries()).map(|e| e.scale).collect();
    scales.into_iter().find_map(|scale| {
        let at = |s: &PSymbolOdd| {
            s.entries()
                .iter()
                .find(|e| e.scale == scale)
                .map_or((0, 1), |e| (e.dim, e.sign))
        };
        let ((da, sa), (db, sb)) = (at(a), at(b));
        if da != db {
            Some(format!("dimension at scale {p}^{scale}: {da} vs {db}"))
        } else if sa != sb {
            let c = |s: i8| if s < 0 { '-' } else { '+' };
            Some(format!("sign at scale {p}^{scale}: {} vs {}", c(sa), c(sb)))
        } else {
            None
        }
    })
}

/// A witness `W` with `W' q1 W = q2 (mod p^k)`, or `Inequivalent`.
///
/// The default precision is the larger of the two canonicalization defaults.
pub fn transform_between<R: Rng + ?Sized>(
    q1: &IntQuadForm,
    q2: &IntQuadForm,
    p: &BigInt,
    k: Option<u32>,
    rng: &mut R,
) -> Result<Witness> {
    if q1.dim() != q2.dim() {
        return Err(Error::Inequivalent(format!("dimensions {} and {}", q1.dim(), q2.dim())));
    }
    let k = match k {
        Some(k) => k,
        None => precision(q1, p, None)?.max(precision(q2, p, None)?),
    };
    let (c1, w1) = canonicalize(q1, p, Some(k), rng)?;
    let (c2, w2) = canonicalize(q2, p, Some(k), rng)?;
    if c1 != c2 {
        return Err(Error::Inequivalent(distinguish(q1, q2, p)));
    }
    let pk = c1.modulus().clone();
    let u = w1.u().mul(&w2.u().inverse_mod()?)?;
    Ok(Witness::new(q1.to_mod(&pk), q2.to_mod(&pk), u)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockdiag::ScaledBlock;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn b(v: i64) -> BigInt {
        BigInt::from(v)
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn unit_blocks(form: &CanonicalForm) -> Vec<(u32, BigInt)> {
        form.form()
            .blocks()
            .iter()
            .map(|ScaledBlock { scale, block }| match block {
                Block::TypeI(u) => (*scale, u.clone()),
                Block::TypeII { c, .. } => (*scale, -c),
            })
            .collect()
    }

    #[test]
    fn can_block_examples() {
        let pk = PrimePower::new(3, 2).unwrap();
        let (blk, u) = can_block(&Block::TypeI(b(4)), &pk).unwrap();
        assert_eq!(blk, Block::TypeI(b(1)));
        let x = u.u().get(0, 0);
        assert_eq!((x * x * 4) % 9, b(1));
        assert_eq!(x, &b(4));
        let pk8 = PrimePower::new(2, 3).unwrap();
        let (blk, _) = can_block(
            &Block::TypeII {
                a: b(0),
                b: b(1),
                c: b(0),
            },
            &pk8,
        )
        .unwrap();
        assert_eq!(blk, Block::t_plus());
        let (blk, _) = can_block(&Block::TypeI(b(11)), &PrimePower::new(2, 5).unwrap()).unwrap();
        assert_eq!(blk, Block::TypeI(b(3)));
    }

    #[test]
    fn dispatch_examples() {
        let (c, w) = canonicalize(&IntQuadForm::diagonal(&[2i64, 2]), &b(3), None, &mut rng()).unwrap();
        assert_eq!(unit_blocks(&c), vec![(0, b(1)), (0, b(1))]);
        assert_eq!(w.modulus().k(), 1);
        let t_minus = IntQuadForm::from_rows(&[vec![2i64, 1], vec![1, 2]]).unwrap();
        let (c, _) = canonicalize(&t_minus, &b(2), None, &mut rng()).unwrap();
        assert_eq!(c.form().blocks(), &[ScaledBlock::new(0, Block::t_minus())]);
        let (c, _) = canonicalize(&IntQuadForm::diagonal(&[1i64]), &b(5), None, &mut rng()).unwrap();
        assert_eq!(unit_blocks(&c), vec![(0, b(1))]);
    }

    #[test]
    fn precision_and_degeneracy() {
        assert_eq!(
            canonicalize(&IntQuadForm::diagonal(&[1i64, 4]), &b(2), Some(4), &mut rng()),
            Err(Error::PrecisionTooLow { k: 4, required: 5 })
        );
        assert_eq!(
            canonicalize(&IntQuadForm::diagonal(&[1i64, 0]), &b(3), None, &mut rng()),
            Err(Error::Degenerate)
        );
    }

    #[test]
    fn transform_examples() {
        let q1 = IntQuadForm::diagonal(&[3i64, 5]);
        let q2 = IntQuadForm::diagonal(&[1i64, 7]);
        let w = transform_between(&q1, &q2, &b(2), Some(4), &mut rng()).unwrap();
        assert_eq!(w.source().congruence(w.u()).unwrap(), q2.to_mod(w.modulus()));
        let w = transform_between(&q1, &q1, &b(2), Some(4), &mut rng()).unwrap();
        assert_eq!(w.target(), &q1.to_mod(w.modulus()));
        let one = IntQuadForm::diagonal(&[1i64, 1]);
        let sigma = IntQuadForm::diagonal(&[1i64, 2]);
        assert!(matches!(
            transform_between(&one, &sigma, &b(3), None, &mut rng()),
            Err(Error::Inequivalent(_))
        ));
    }
}
