//! The 2-adic canonicalization: Type II normalization, de-mixing of scales,
//! sign walking along trains and canonical forms of compartments.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

use super::{rebase, target::canonical_target, CanonicalForm};
use crate::blockdiag::{assemble, block_diagonalize, block_diagonalize_mod, Block, BlockDiagForm, ScaledBlock};
use crate::error::{Error, Result};
use crate::form::IntQuadForm;
use crate::matmod::{
    direct_sum, embed_local, extend_primitive, is_primitive, permutation_matrix, random_gl, random_residue, ModMatrix,
    Witness,
};
use crate::modint::{kronecker2, padic_split, sqrt_mod, Order, PrimePower};
use crate::represent::{represent_general, represent_type2};
use crate::symbols::{canonical_two_symbol, two_symbol_from_blocks, CanonicalTwoSymbol, TrainStructure};

const EIGHT: u32 = 8;
const REPRESENT_ATTEMPTS: usize = 32;
const RANDOM_PEEL_ATTEMPTS: usize = 512;
const PEEL_COORDINATES: usize = 4;

fn two_power(k: u32) -> Result<PrimePower> {
    Ok(PrimePower::new(2, k)?)
}

fn int(v: i64) -> BigInt {
    BigInt::from(v)
}

fn block_matrix(block: &Block, pk: &PrimePower) -> Result<ModMatrix> {
    let n = block.dim();
    Ok(ModMatrix::new(n, n, pk.clone(), block.entries())?)
}

fn blocks_matrix(blocks: &[ScaledBlock], pk: &PrimePower) -> ModMatrix {
    assemble(&BlockDiagForm::new(pk.clone(), blocks.to_vec(), 0))
}

fn unit_of(block: &ScaledBlock) -> Result<&BigInt> {
    match &block.block {
        Block::TypeI(u) => Ok(u),
        Block::TypeII { .. } => Err(Error::internal("expected a Type I block")),
    }
}

fn residue(u: &BigInt) -> BigInt {
    u.mod_floor(&BigInt::from(EIGHT))
}

/// The residue `r` of a unit modulo 8 and a root `x` with `x^2 u = r (mod pk)`.
fn unit_scaling(u: &BigInt, pk: &PrimePower) -> Result<(BigInt, BigInt)> {
    let r = residue(u);
    let x = sqrt_mod(&pk.reduce(&(&r * pk.inv(u)?)), pk)?;
    Ok((r, x))
}

/// The sign of a block: the Kronecker symbol of its determinant at 2.
fn block_sign(block: &Block) -> Result<i8> {
    Ok(kronecker2(&residue(&block.det()))?)
}

fn canonical_symbol(blocks: &[ScaledBlock], pk: &PrimePower) -> Result<CanonicalTwoSymbol> {
    Ok(two_symbol_from_blocks(&BlockDiagForm::new(pk.clone(), blocks.to_vec(), 0))?.canonical())
}

/// Transforms a Type II block `[[2a, b], [b, 2c]]` into `T+` or `T-` over `Z/2^k`.
///
/// The value 2 is represented primitively, the representation is completed to
/// a unit triangular matrix, the determinant is scaled to its residue modulo 8
/// and a final shear makes the off-diagonal entry 1. The work is done modulo
/// `2^(k+1)` so that the last diagonal entry is exact modulo `2^k`.
pub fn type2_canonical(block: &Block, k: u32) -> Result<(Block, Witness)> {
    let Block::TypeII { b, .. } = block else {
        return Err(Error::PreconditionViolated("a Type II block is required".into()));
    };
    if b.is_even() {
        return Err(Error::PreconditionViolated(
            "a Type II block needs an odd off-diagonal entry".into(),
        ));
    }
    if k < 3 {
        return Err(Error::PrecisionTooLow { k, required: 3 });
    }
    let pk = two_power(k)?;
    let wide = two_power(k + 1)?;
    let q = block_matrix(block, &wide)?;
    let rep = represent_type2(block, &int(2), &wide)?;
    let (mut x1, mut x2) = (rep.vector()[0].clone(), rep.vector()[1].clone());
    let mut total = ModMatrix::identity(2, &wide);
    if x1.is_even() {
        total = permutation_matrix(&[1, 0], &wide);
        std::mem::swap(&mut x1, &mut x2);
    }
    let x1_inv = wide.inv(&x1)?;
    total = total.mul(&ModMatrix::new(
        2,
        2,
        wide.clone(),
        vec![x1, BigInt::zero(), x2, x1_inv],
    )?)?;
    let det = q.congruence(&total)?.det_mod()?;
    let lambda = residue(&det);
    let root = sqrt_mod(&wide.reduce(&(&lambda * wide.inv(&det)?)), &wide)?;
    total = total.mul(&ModMatrix::diagonal(&[BigInt::one(), root], &wide))?;
    let off = q.congruence(&total)?.get(0, 1).clone();
    let shear = (BigInt::one() - off) / 2;
    total = total.mul(&ModMatrix::new(
        2,
        2,
        wide,
        vec![BigInt::one(), shear, BigInt::zero(), BigInt::one()],
    )?)?;
    let canonical = if lambda == int(3) {
        Block::t_minus()
    } else {
        Block::t_plus()
    };
    let witness = Witness::new(
        block_matrix(block, &pk)?,
        block_matrix(&canonical, &pk)?,
        total.reduce_to(&pk)?,
    )?;
    Ok((canonical, witness))
}

/// Block diagonalizes `m` and brings every block to canonical shape: a unit to
/// its residue modulo 8 and a Type II block to `T+` or `T-`.
///
/// Blocks whose visible precision is below 3 bits are left as they are.
fn settle(m: &ModMatrix) -> Result<(Vec<ScaledBlock>, ModMatrix)> {
    let pk = m.modulus().clone();
    let (d, w) = block_diagonalize_mod(m)?;
    if d.zero_dim() > 0 {
        return Err(Error::Degenerate);
    }
    let n = d.dim();
    let mut u = w.into_u();
    let mut blocks = Vec::with_capacity(d.blocks().len());
    for (b, off) in d.blocks().iter().zip(d.offsets()) {
        let visible = pk.k().saturating_sub(b.scale);
        if visible < 3 {
            blocks.push(b.clone());
            continue;
        }
        let local = pk.with_k(visible)?;
        let (block, v) = match &b.block {
            Block::TypeI(unit) => {
                let (r, x) = unit_scaling(unit, &local)?;
                (Block::TypeI(r), ModMatrix::diagonal(&[x], &local))
            }
            Block::TypeII { .. } => {
                let (t, w) = type2_canonical(&b.block, visible)?;
                (t, w.into_u())
            }
        };
        let positions: Vec<usize> = (off..off + block.dim()).collect();
        u = u.mul(&embed_local(n, &positions, &rebase(&v, &pk)?)?)?;
        blocks.push(ScaledBlock::new(b.scale, block));
    }
    Ok((blocks, u))
}

/// Transforms `tau ⊕ T` with `tau` odd and `T` Type II into three odd units
/// reduced modulo 8.
///
/// `T` is first brought to `T-`, or for `T+` further to `[[8, 1], [1, 2]]`;
/// with `x` the leading entry, the determinant-1 matrix with rows
/// `(1, 1, 1), (r, 1, 0), (0, 1, 1)`, `r = -tau / (x + 1)`, yields an odd vector
/// orthogonal to another odd vector and block diagonalization finishes.
pub fn absorb_type2_dim3(tau: &BigInt, block: &Block, k: u32) -> Result<([BigInt; 3], Witness)> {
    if tau.is_even() {
        return Err(Error::PreconditionViolated(format!("{tau} is not odd")));
    }
    let pk = two_power(k)?;
    let source = direct_sum(
        &ModMatrix::diagonal(std::slice::from_ref(tau), &pk),
        &block_matrix(block, &pk)?,
    )?;
    let one = ModMatrix::identity(1, &pk);
    let (t, w) = type2_canonical(block, k)?;
    let mut total = direct_sum(&one, w.u())?;
    let x = if t == Block::t_plus() {
        let wide = Block::TypeII {
            a: int(4),
            b: int(1),
            c: int(1),
        };
        let (_, back) = type2_canonical(&wide, k)?;
        total = total.mul(&direct_sum(&one, &back.u().inverse_mod()?)?)?;
        8
    } else {
        2
    };
    let r = pk.reduce(&(-tau * pk.inv(&int(x + 1))?));
    let v = ModMatrix::new(
        3,
        3,
        pk.clone(),
        vec![int(1), int(1), int(1), r, int(1), int(0), int(0), int(1), int(1)],
    )?;
    total = total.mul(&v)?;
    let (blocks, s) = settle(&source.congruence(&total)?)?;
    total = total.mul(&s)?;
    let units = blocks.iter().map(|b| unit_of(b).cloned()).collect::<Result<Vec<_>>>()?;
    let units: [BigInt; 3] = units
        .try_into()
        .map_err(|_| Error::internal("absorbing a Type II block did not give three units"))?;
    let witness = Witness::new(source, ModMatrix::diagonal(&units, &pk), total)?;
    Ok((units, witness))
}

/// The four local configurations along which a pair of signs is flipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WalkShape {
    /// `tau1 ⊕ 4 tau2`, becoming `(tau1 + 4) ⊕ 4 (tau2 + 4)`.
    UnitGapUnit { low: BigInt, high: BigInt },
    /// `tau ⊕ 2T`, becoming `(tau + 4) ⊕ 2T` with the sign of `T` flipped.
    UnitPair { unit: BigInt, pair: Block },
    /// `T ⊕ 2 tau`, becoming `T ⊕ 2(tau + 4)` with the sign of `T` flipped.
    PairUnit { pair: Block, unit: BigInt },
    /// `T1 ⊕ T2` at one scale, becoming `T ⊕ T+`.
    PairPair { first: Block, second: Block },
}

impl WalkShape {
    /// The least precision at which the step is carried out.
    pub fn required_precision(&self) -> u32 {
        match self {
            WalkShape::UnitGapUnit { .. } => 5,
            WalkShape::UnitPair { .. } | WalkShape::PairUnit { .. } => 4,
            WalkShape::PairPair { .. } => 3,
        }
    }

    fn blocks(&self) -> Vec<ScaledBlock> {
        match self {
            WalkShape::UnitGapUnit { low, high } => vec![
                ScaledBlock::new(0, Block::TypeI(low.clone())),
                ScaledBlock::new(2, Block::TypeI(high.clone())),
            ],
            WalkShape::UnitPair { unit, pair } => vec![
                ScaledBlock::new(0, Block::TypeI(unit.clone())),
                ScaledBlock::new(1, pair.clone()),
            ],
            WalkShape::PairUnit { pair, unit } => vec![
                ScaledBlock::new(0, pair.clone()),
                ScaledBlock::new(1, Block::TypeI(unit.clone())),
            ],
            WalkShape::PairPair { first, second } => {
                vec![ScaledBlock::new(0, first.clone()), ScaledBlock::new(0, second.clone())]
            }
        }
    }

    /// The basis change applied to the settled blocks.
    fn transform(&self, settled: &[ScaledBlock], pk: &PrimePower) -> Result<ModMatrix> {
        let rows = |rows: &[Vec<i64>]| -> Result<ModMatrix> { Ok(ModMatrix::from_rows(pk, rows)?) };
        match self {
            WalkShape::UnitGapUnit { .. } => {
                let (low, high) = (unit_of(&settled[0])?, unit_of(&settled[1])?);
                let lower = pk.with_k(pk.k() - 2)?;
                let x = lower.reduce(&(-low * lower.inv(high)?));
                Ok(ModMatrix::new(2, 2, pk.clone(), vec![int(1), int(4), int(1), x])?)
            }
            WalkShape::UnitPair { .. } => rows(&[vec![1, 0, 0], vec![1, 1, 0], vec![0, 0, 1]]),
            WalkShape::PairUnit { .. } => rows(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 1, 1]]),
            WalkShape::PairPair { .. } => {
                if settled[1].block == Block::t_plus() {
                    Ok(ModMatrix::identity(4, pk))
                } else if settled[0].block == Block::t_plus() {
                    Ok(permutation_matrix(&[2, 3, 0, 1], pk))
                } else {
                    rows(&[vec![1, 0, 0, 0], vec![0, 1, 0, 0], vec![0, 1, 1, 0], vec![0, 0, 0, 1]])
                }
            }
        }
    }
}

/// Carries out one sign walking step over `Z/2^k`, returning the settled blocks.
pub fn sign_walk_step(shape: &WalkShape, k: u32) -> Result<(Vec<ScaledBlock>, Witness)> {
    let required = shape.required_precision();
    if k < required {
        return Err(Error::PrecisionTooLow { k, required });
    }
    let pk = two_power(k)?;
    let source = blocks_matrix(&shape.blocks(), &pk);
    let (settled, u0) = settle(&source)?;
    let v = shape.transform(&settled, &pk)?;
    let (blocks, u1) = settle(&blocks_matrix(&settled, &pk).congruence(&v)?)?;
    let u = u0.mul(&v)?.mul(&u1)?;
    let witness = Witness::new(source, blocks_matrix(&blocks, &pk), u)?;
    Ok((blocks, witness))
}

/// The canonical triple of three units with the given sign and oddity.
fn table_one(sign: i8, oddity: u32) -> Option<[u32; 3]> {
    Some(match (sign, oddity) {
        (1, 1) => [1, 1, 7],
        (1, 3) => [1, 1, 1],
        (1, 5) => [3, 3, 7],
        (1, 7) => [1, 3, 3],
        (-1, 1) => [3, 3, 3],
        (-1, 3) => [1, 3, 7],
        (-1, 5) => [1, 1, 3],
        (-1, 7) => [1, 1, 5],
        _ => return None,
    })
}

/// Transforms `tau1 ⊕ tau2 ⊕ tau3` into its canonical triple.
///
/// The leading canonical unit is represented, the complement is block
/// diagonalized and its first canonical unit is represented in turn. For the
/// class of `1 ⊕ 1 ⊕ 7` the unit 7 is represented first and moved last.
pub fn compartment_dim3<R: Rng + ?Sized>(taus: &[BigInt; 3], k: u32, rng: &mut R) -> Result<([BigInt; 3], Witness)> {
    if taus.iter().any(|t| t.is_even()) {
        return Err(Error::PreconditionViolated("three odd units are required".into()));
    }
    if k < 3 {
        return Err(Error::PrecisionTooLow { k, required: 3 });
    }
    let pk = two_power(k)?;
    let product: BigInt = taus.iter().product();
    let sign = kronecker2(&residue(&product))?;
    let oddity: BigInt = taus.iter().sum();
    let oddity = u32::try_from(residue(&oddity)).map_err(|_| Error::internal("oddity out of range"))?;
    let target = table_one(sign, oddity).ok_or_else(|| Error::internal("three units with an even oddity"))?;
    let seven_first = target == [1, 1, 7];
    let order: [u32; 3] = if seven_first { [7, 1, 1] } else { target };
    let d = ModMatrix::diagonal(taus, &pk);
    let one = ModMatrix::identity(1, &pk);
    for attempt in 0..REPRESENT_ATTEMPTS {
        let start = if attempt == 0 {
            ModMatrix::identity(3, &pk)
        } else {
            random_gl(3, &pk, rng)?
        };
        let lead = BigInt::from(order[0]);
        let rep = match represent_general(&d.congruence(&start)?, &lead, rng) {
            Ok(rep) => rep,
            Err(Error::RetriesExhausted { .. }) => continue,
            Err(e) => return Err(e),
        };
        let mut total = start.mul(&extend_primitive(rep.vector(), &pk)?)?;
        let (first, w) = block_diagonalize_mod(&d.congruence(&total)?)?;
        total = total.mul(w.u())?;
        let rest: Vec<BigInt> = match first.blocks() {
            [_, ScaledBlock {
                scale: 0,
                block: Block::TypeI(a),
            }, ScaledBlock {
                scale: 0,
                block: Block::TypeI(b),
            }] => {
                vec![a.clone(), b.clone()]
            }
            _ => continue,
        };
        let rem = ModMatrix::diagonal(&rest, &pk);
        let second = BigInt::from(order[1]);
        let rep = match represent_general(&rem, &second, rng) {
            Ok(rep) => rep,
            Err(Error::RetriesExhausted { .. } | Error::NoRepresentation { .. }) => continue,
            Err(e) => return Err(e),
        };
        let e2 = extend_primitive(rep.vector(), &pk)?;
        let (tail, w2) = block_diagonalize_mod(&rem.congruence(&e2)?)?;
        let [_, ScaledBlock {
            scale: 0,
            block: Block::TypeI(last),
        }] = tail.blocks()
        else {
            continue;
        };
        let (r, x) = unit_scaling(last, &pk)?;
        if r != BigInt::from(order[2]) {
            continue;
        }
        let local = e2.mul(w2.u())?.mul(&ModMatrix::diagonal(&[BigInt::one(), x], &pk))?;
        total = total.mul(&direct_sum(&one, &local)?)?;
        if seven_first {
            total = total.mul(&permutation_matrix(&[1, 2, 0], &pk))?;
        }
        let units = target.map(BigInt::from);
        let witness = Witness::new(d, ModMatrix::diagonal(&units, &pk), total)?;
        return Ok((units, witness));
    }
    Err(Error::retries("compartment_dim3"))
}

/// Candidate leading vectors on `m` coordinates modulo 8, by number of nonzero
/// entries, then entry sum, then lexicographically.
fn peel_candidates(m: usize) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = (0..EIGHT.pow(m as u32))
        .map(|mut code| {
            let mut v = vec![0u32; m];
            for slot in v.iter_mut().rev() {
                *slot = code % EIGHT;
                code /= EIGHT;
            }
            v
        })
        .filter(|v| v.iter().any(|x| x % 2 == 1))
        .collect();
    out.sort_by_key(|v| (v.iter().filter(|&&x| x != 0).count(), v.iter().sum::<u32>(), v.clone()));
    out
}

/// Rewrites a block sequence as Type I blocks by absorbing every Type II block
/// into a unit of the same scale, or `None` when some Type II block has no
/// such partner.
fn demix_complement(blocks: &[ScaledBlock], pk: &PrimePower) -> Result<Option<(Vec<ScaledBlock>, ModMatrix)>> {
    let n: usize = blocks.iter().map(|b| b.block.dim()).sum();
    let mut u = ModMatrix::identity(n, pk);
    if blocks.iter().all(|b| b.block.is_type_one()) {
        return Ok(Some((blocks.to_vec(), u)));
    }
    let offsets: Vec<usize> = blocks
        .iter()
        .scan(0, |acc, b| {
            let off = *acc;
            *acc += b.block.dim();
            Some(off)
        })
        .collect();
    let mut used = vec![false; blocks.len()];
    for (j, pair) in blocks.iter().enumerate().filter(|(_, b)| !b.block.is_type_one()) {
        let partner =
            (0..blocks.len()).find(|&i| !used[i] && blocks[i].scale == pair.scale && blocks[i].block.is_type_one());
        let Some(i) = partner else {
            return Ok(None);
        };
        used[i] = true;
        let local = pk.k().saturating_sub(pair.scale);
        if local < 3 {
            return Ok(None);
        }
        let (_, w) = absorb_type2_dim3(unit_of(&blocks[i])?, &pair.block, local)?;
        let positions = [offsets[i], offsets[j], offsets[j] + 1];
        u = u.mul(&embed_local(n, &positions, &rebase(w.u(), pk)?)?)?;
    }
    let (settled, s) = settle(&blocks_matrix(blocks, pk).congruence(&u)?)?;
    if settled.iter().any(|b| !b.block.is_type_one()) {
        return Ok(None);
    }
    Ok(Some((settled, u.mul(&s)?)))
}

/// A transformation `U` with `U' D U = target`, for a Type I form `D` given by
/// `blocks` with the same canonical 2-symbol as `target`.
///
/// A primitive vector taking the first target value is searched among small
/// vectors on the first coordinates by scale, then among random vectors; it is
/// accepted when the complement has the canonical 2-symbol of the remaining
/// target, and the complement is handled recursively.
fn peel_compartment<R: Rng + ?Sized>(
    pk: &PrimePower,
    blocks: &[ScaledBlock],
    target: &[ScaledBlock],
    rng: &mut R,
) -> Result<ModMatrix> {
    let n = blocks.len();
    if n != target.len() {
        return Err(Error::internal("compartment and target differ in dimension"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| blocks[i].scale);
    let sorted: Vec<ScaledBlock> = order.iter().map(|&i| blocks[i].clone()).collect();
    let perm = permutation_matrix(&order, pk);
    Ok(perm.mul(&peel_sorted(pk, &sorted, target, rng)?)?)
}

fn peel_sorted<R: Rng + ?Sized>(
    pk: &PrimePower,
    blocks: &[ScaledBlock],
    target: &[ScaledBlock],
    rng: &mut R,
) -> Result<ModMatrix> {
    let n = blocks.len();
    let head = &target[0];
    let head_unit = unit_of(head)?;
    let local = pk.with_k(pk.k() - head.scale)?;
    if n == 1 {
        if blocks[0].scale != head.scale {
            return Err(Error::internal("compartment and target differ in scale"));
        }
        let x = sqrt_mod(&local.reduce(&(head_unit * local.inv(unit_of(&blocks[0])?)?)), &local)?;
        return rebase(&ModMatrix::diagonal(&[x], &local), pk);
    }
    if n == 3 && blocks.iter().chain(target).all(|b| b.scale == head.scale) {
        let taus = [
            unit_of(&blocks[0])?.clone(),
            unit_of(&blocks[1])?.clone(),
            unit_of(&blocks[2])?.clone(),
        ];
        let (units, w) = compartment_dim3(&taus, local.k(), rng)?;
        let wanted: Vec<&BigInt> = target.iter().map(unit_of).collect::<Result<_>>()?;
        if units.iter().collect::<Vec<_>>() == wanted {
            return rebase(w.u(), pk);
        }
    }
    let d = blocks_matrix(blocks, pk);
    let rest_target = &target[1..];
    let rest_symbol = canonical_symbol(rest_target, pk)?;
    let attempt = |x: Vec<BigInt>, rng: &mut R| -> Result<Option<ModMatrix>> {
        let (order, unit) = padic_split(&d.quadratic_value(&x), pk.p());
        if order != Order::Finite(head.scale) || residue(&unit) != residue(head_unit) {
            return Ok(None);
        }
        let scale = sqrt_mod(&local.reduce(&(head_unit * local.inv(&unit)?)), &local)?;
        let x: Vec<BigInt> = x.iter().map(|v| pk.reduce(&(v * &scale))).collect();
        let e = extend_primitive(&x, pk)?;
        let (split, w) = block_diagonalize_mod(&d.congruence(&e)?)?;
        if split.blocks()[0] != *head {
            return Ok(None);
        }
        let one = ModMatrix::identity(1, pk);
        let Some((rest, demixed)) = demix_complement(&split.blocks()[1..], pk)? else {
            return Ok(None);
        };
        if canonical_symbol(&rest, pk)? != rest_symbol {
            return Ok(None);
        }
        let inner = match peel_compartment(pk, &rest, rest_target, rng) {
            Ok(inner) => inner,
            Err(Error::RetriesExhausted { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        Ok(Some(e.mul(w.u())?.mul(&direct_sum(&one, &demixed.mul(&inner)?)?)?))
    };
    let m = n.min(PEEL_COORDINATES);
    for small in peel_candidates(m) {
        let mut x: Vec<BigInt> = small.into_iter().map(BigInt::from).collect();
        x.resize(n, BigInt::zero());
        if let Some(u) = attempt(x, rng)? {
            return Ok(u);
        }
    }
    for _ in 0..RANDOM_PEEL_ATTEMPTS {
        let x: Vec<BigInt> = (0..n).map(|_| random_residue(pk, rng)).collect();
        if !is_primitive(&x, pk) {
            continue;
        }
        if let Some(u) = attempt(x, rng)? {
            return Ok(u);
        }
    }
    Err(Error::retries("compartment"))
}

/// Brings a compartment, a run of scaled units whose consecutive scales differ
/// by at most 1, to its canonical form over `Z/2^k`.
pub fn canonicalize_compartment<R: Rng + ?Sized>(
    blocks: &[ScaledBlock],
    k: u32,
    rng: &mut R,
) -> Result<(CanonicalForm, Witness)> {
    if blocks.is_empty() || blocks.iter().any(|b| !b.block.is_type_one()) {
        return Err(Error::PreconditionViolated(
            "a compartment is a nonempty run of Type I blocks".into(),
        ));
    }
    let mut scales: Vec<u32> = blocks.iter().map(|b| b.scale).collect();
    scales.sort_unstable();
    if scales.windows(2).any(|w| w[1] > w[0] + 1) {
        return Err(Error::PreconditionViolated("compartment scales must not skip".into()));
    }
    let top = scales[scales.len() - 1];
    if k < top + 3 {
        return Err(Error::PrecisionTooLow { k, required: top + 3 });
    }
    let pk = two_power(k)?;
    let source = BlockDiagForm::new(pk.clone(), blocks.to_vec(), 0);
    if source.blocks().iter().any(|b| unit_of(b).map_or(true, |u| u.is_even())) {
        return Err(Error::PreconditionViolated("compartment entries must be odd".into()));
    }
    let target = canonical_target(&two_symbol_from_blocks(&source)?.canonical())?;
    let u = peel_compartment(&pk, source.blocks(), &target, rng)?;
    let form = BlockDiagForm::new(pk, target, 0);
    let witness = Witness::new(assemble(&source), assemble(&form), u)?;
    Ok((CanonicalForm::new(form), witness))
}

/// A block of the working form and the coordinates it occupies.
#[derive(Debug, Clone)]
struct Slot {
    block: ScaledBlock,
    coords: Vec<usize>,
}

/// The working state: `u' q u` is the direct sum of the slots on their coordinates.
struct Work {
    pk: PrimePower,
    n: usize,
    u: ModMatrix,
    slots: Vec<Slot>,
}

/// A constituent of a train for sign walking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Item {
    Compartment(u32, u32),
    Pair(u32),
}

impl Item {
    fn contains(self, scale: u32) -> bool {
        match self {
            Item::Compartment(a, b) => a <= scale && scale <= b,
            Item::Pair(s) => s == scale,
        }
    }
}

impl Work {
    fn new(d: &BlockDiagForm, u: ModMatrix) -> Self {
        let slots = d
            .blocks()
            .iter()
            .zip(d.offsets())
            .map(|(b, off)| Slot {
                block: b.clone(),
                coords: (off..off + b.block.dim()).collect(),
            })
            .collect();
        Work {
            pk: d.modulus().clone(),
            n: d.dim(),
            u,
            slots,
        }
    }

    fn local_precision(&self, scale: u32) -> u32 {
        self.pk.k() - scale
    }

    /// Applies the local transformation `v` to the listed slots, in the listed
    /// order, and block diagonalizes the result. Returns the new slot indices.
    fn replace(&mut self, idx: &[usize], v: &ModMatrix) -> Result<Vec<usize>> {
        let coords: Vec<usize> = idx.iter().flat_map(|&i| self.slots[i].coords.clone()).collect();
        let blocks: Vec<ScaledBlock> = idx.iter().map(|&i| self.slots[i].block.clone()).collect();
        let v = rebase(v, &self.pk)?;
        let (d, w) = block_diagonalize_mod(&blocks_matrix(&blocks, &self.pk).congruence(&v)?)?;
        if d.zero_dim() > 0 {
            return Err(Error::Degenerate);
        }
        let local = v.mul(w.u())?;
        self.u = self.u.mul(&embed_local(self.n, &coords, &local)?)?;
        let fresh: Vec<Slot> = d
            .blocks()
            .iter()
            .zip(d.offsets())
            .map(|(b, off)| Slot {
                block: b.clone(),
                coords: coords[off..off + b.block.dim()].to_vec(),
            })
            .collect();
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        for &i in sorted.iter().rev() {
            self.slots.remove(i);
        }
        let at = sorted[0];
        let count = fresh.len();
        self.slots.splice(at..at, fresh);
        let new: Vec<usize> = (at..at + count).collect();
        for &i in &new {
            self.tidy(i)?;
        }
        Ok(new)
    }

    /// Brings one slot to canonical block shape.
    fn tidy(&mut self, i: usize) -> Result<()> {
        let slot = &self.slots[i];
        let local = self.pk.with_k(self.local_precision(slot.block.scale))?;
        let (block, v) = match &slot.block.block {
            Block::TypeI(unit) => {
                let (r, x) = unit_scaling(unit, &local)?;
                (Block::TypeI(r), ModMatrix::diagonal(&[x], &local))
            }
            Block::TypeII { .. } => {
                let (t, w) = type2_canonical(&slot.block.block, local.k())?;
                (t, w.into_u())
            }
        };
        self.u = self
            .u
            .mul(&embed_local(self.n, &slot.coords, &rebase(&v, &self.pk)?)?)?;
        self.slots[i].block.block = block;
        Ok(())
    }

    fn tidy_all(&mut self) -> Result<()> {
        (0..self.slots.len()).try_for_each(|i| self.tidy(i))
    }

    fn find(&self, pred: impl Fn(&ScaledBlock) -> bool) -> Option<usize> {
        self.slots.iter().position(|s| pred(&s.block))
    }

    /// Absorbs Type II blocks into units of the same scale until no scale mixes types.
    fn demix(&mut self) -> Result<()> {
        loop {
            let mixed = self.slots.iter().enumerate().find_map(|(j, s)| {
                if s.block.block.is_type_one() {
                    return None;
                }
                self.find(|b| b.scale == s.block.scale && b.block.is_type_one())
                    .map(|i| (i, j))
            });
            let Some((i, j)) = mixed else {
                return Ok(());
            };
            let scale = self.slots[i].block.scale;
            let tau = unit_of(&self.slots[i].block)?.clone();
            let (_, w) = absorb_type2_dim3(&tau, &self.slots[j].block.block, self.local_precision(scale))?;
            self.replace(&[i, j], w.u())?;
        }
    }

    fn item_sign(&self, item: Item) -> Result<i8> {
        self.slots
            .iter()
            .filter(|s| item.contains(s.block.scale))
            .try_fold(1i8, |acc, s| Ok(acc * block_sign(&s.block.block)?))
    }

    /// Flips the signs of two consecutive items of a train.
    fn flip_boundary(&mut self, left: Item, right: Item) -> Result<()> {
        let unit_at = |w: &Work, s: u32| w.find(|b| b.scale == s && b.block.is_type_one());
        let pair_at = |w: &Work, s: u32| w.find(|b| b.scale == s && !b.block.is_type_one());
        let missing = || Error::internal("sign walking found no block at a train boundary");
        let (i, j, scale, shape) = match (left, right) {
            (Item::Compartment(_, b), Item::Pair(s)) if s == b + 1 => {
                let (i, j) = (
                    unit_at(self, b).ok_or_else(missing)?,
                    pair_at(self, s).ok_or_else(missing)?,
                );
                let shape = WalkShape::UnitPair {
                    unit: unit_of(&self.slots[i].block)?.clone(),
                    pair: self.slots[j].block.block.clone(),
                };
                (i, j, b, shape)
            }
            (Item::Pair(s), Item::Compartment(a, _)) if a == s + 1 => {
                let (i, j) = (
                    pair_at(self, s).ok_or_else(missing)?,
                    unit_at(self, a).ok_or_else(missing)?,
                );
                let shape = WalkShape::PairUnit {
                    pair: self.slots[i].block.block.clone(),
                    unit: unit_of(&self.slots[j].block)?.clone(),
                };
                (i, j, s, shape)
            }
            (Item::Compartment(_, b), Item::Compartment(a, _)) if a == b + 2 => {
                let (i, j) = (
                    unit_at(self, b).ok_or_else(missing)?,
                    unit_at(self, a).ok_or_else(missing)?,
                );
                let shape = WalkShape::UnitGapUnit {
                    low: unit_of(&self.slots[i].block)?.clone(),
                    high: unit_of(&self.slots[j].block)?.clone(),
                };
                (i, j, b, shape)
            }
            _ => {
                return Err(Error::internal(format!(
                    "no sign walking step between {left:?} and {right:?}"
                )))
            }
        };
        let (_, w) = sign_walk_step(&shape, self.local_precision(scale))?;
        self.replace(&[i, j], w.u())?;
        Ok(())
    }

    /// Walks signs along a train until every item has the sign product of the target.
    fn walk_train(&mut self, train: (u32, u32), structure: &TrainStructure, target: &[ScaledBlock]) -> Result<()> {
        let (front, end) = train;
        let mut items = Vec::new();
        for s in front..=end {
            if let Some(&(a, b)) = structure.compartments.iter().find(|c| c.0 == s) {
                items.push(Item::Compartment(a, b));
            } else if target.iter().any(|t| t.scale == s && !t.block.is_type_one()) {
                items.push(Item::Pair(s));
            }
        }
        let mut wrong = Vec::new();
        for (pos, &item) in items.iter().enumerate() {
            let wanted = target
                .iter()
                .filter(|t| item.contains(t.scale))
                .try_fold(1i8, |acc, t| Ok::<i8, Error>(acc * block_sign(&t.block)?))?;
            if self.item_sign(item)? != wanted {
                wrong.push(pos);
            }
        }
        if wrong.len() % 2 == 1 {
            return Err(Error::internal("a train has an odd number of sign mismatches"));
        }
        for pair in wrong.chunks(2) {
            for pos in pair[0]..pair[1] {
                self.flip_boundary(items[pos], items[pos + 1])?;
            }
        }
        Ok(())
    }

    /// Turns pairs of `T-` at one scale into `T+ ⊕ T+`.
    fn settle_pairs(&mut self) -> Result<()> {
        loop {
            let minus: Option<(usize, usize)> = self.slots.iter().enumerate().find_map(|(i, s)| {
                if s.block.block != Block::t_minus() {
                    return None;
                }
                self.slots
                    .iter()
                    .enumerate()
                    .skip(i + 1)
                    .find(|(_, o)| o.block.scale == s.block.scale && o.block.block == Block::t_minus())
                    .map(|(j, _)| (i, j))
            });
            let Some((i, j)) = minus else {
                return Ok(());
            };
            let shape = WalkShape::PairPair {
                first: Block::t_minus(),
                second: Block::t_minus(),
            };
            let (_, w) = sign_walk_step(&shape, self.local_precision(self.slots[i].block.scale))?;
            self.replace(&[i, j], w.u())?;
        }
    }

    /// Transforms the compartment on scales `a..=b` into its part of the target.
    fn peel<R: Rng + ?Sized>(&mut self, (a, b): (u32, u32), target: &[ScaledBlock], rng: &mut R) -> Result<()> {
        let mut idx: Vec<usize> = (0..self.slots.len())
            .filter(|&i| (a..=b).contains(&self.slots[i].block.scale))
            .collect();
        idx.sort_by_key(|&i| self.slots[i].block.scale);
        let blocks: Vec<ScaledBlock> = idx.iter().map(|&i| self.slots[i].block.clone()).collect();
        let part: Vec<ScaledBlock> = target.iter().filter(|t| (a..=b).contains(&t.scale)).cloned().collect();
        let u = peel_compartment(&self.pk, &blocks, &part, rng)?;
        self.replace(&idx, &u)?;
        Ok(())
    }

    /// Orders the slots by scale, units first and `T-` before `T+`, and returns the blocks.
    fn finish(&mut self) -> Result<Vec<ScaledBlock>> {
        let key = |b: &ScaledBlock| match &b.block {
            Block::TypeI(_) => (b.scale, 0, BigInt::zero()),
            Block::TypeII { c, .. } => (b.scale, 1, c.clone()),
        };
        self.slots.sort_by_key(|s| key(&s.block));
        let perm: Vec<usize> = self.slots.iter().flat_map(|s| s.coords.clone()).collect();
        self.u = self.u.mul(&permutation_matrix(&perm, &self.pk))?;
        let mut next = 0;
        for slot in &mut self.slots {
            let dim = slot.coords.len();
            slot.coords = (next..next + dim).collect();
            next += dim;
        }
        Ok(self.slots.iter().map(|s| s.block.clone()).collect())
    }
}

/// Canonicalizes `q` over `Z/2^k`, `k >= ord_2(det q) + 3`.
///
/// The stages run at precision `k + 3`: block diagonalization, normalization of
/// Type II blocks, absorption of Type II blocks into units of the same scale,
/// sign walking along each train to the sign pattern of the canonical form,
/// merging of `T-` pairs, and the canonical form of each compartment.
pub fn canonicalize_two<R: Rng + ?Sized>(q: &IntQuadForm, k: u32, rng: &mut R) -> Result<(CanonicalForm, Witness)> {
    let two = int(2);
    let ord = q.det_order(&two).finite().ok_or(Error::Degenerate)?;
    if k < ord + 3 {
        return Err(Error::PrecisionTooLow { k, required: ord + 3 });
    }
    let symbol = canonical_two_symbol(q)?;
    let target = canonical_target(&symbol)?;
    let (d, w) = block_diagonalize(q, &two_power(k + 3)?)?;
    if d.zero_dim() > 0 {
        return Err(Error::Degenerate);
    }
    let mut work = Work::new(&d, w.into_u());
    work.tidy_all()?;
    work.demix()?;
    let structure = symbol.to_two_symbol().partition();
    for &train in &structure.trains {
        work.walk_train(train, &structure, &target)?;
    }
    work.settle_pairs()?;
    for &compartment in &structure.compartments {
        work.peel(compartment, &target, rng)?;
    }
    if work.finish()? != target {
        return Err(Error::internal("the 2-adic pipeline missed the canonical form"));
    }
    let pk = two_power(k)?;
    let form = BlockDiagForm::new(pk.clone(), target, 0);
    let witness = Witness::new(q.to_mod(&pk), assemble(&form), work.u.reduce_to(&pk)?)?;
    Ok((CanonicalForm::new(form), witness))
}
