//! Primitive representations `x' Q x = t (mod p^k)`.
//!
//! The general solver works on a block diagonal form of `Q`. It splits the
//! search by whether some scale-0 coordinate is a unit: if so, that coordinate
//! is solved from the others by a square root (or, for a `2 x 2` block, by
//! Hensel lifting of its partner); otherwise every scale-0 coordinate is a
//! multiple of `p`, which raises its scale by two. When all scales are
//! positive the congruence is divided by `p`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

use crate::blockdiag::{block_diagonalize_mod, Block, BlockDiagForm};
use crate::error::{Error, Result};
use crate::matmod::{is_primitive, ModMatrix};
use crate::modint::{legendre, padic_split, sqrt_mod, Order, PrimePower};

/// Largest number of residue combinations enumerated exhaustively per pivot.
const EXHAUSTIVE_LIMIT: u64 = 1 << 16;
/// Number of random combinations tried per pivot beyond that limit.
const SAMPLE_BUDGET: usize = 1024;

/// A verified primitive representation of `target` by `form`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Representation {
    vector: Vec<BigInt>,
    target: BigInt,
    form: ModMatrix,
}

impl Representation {
    /// Checks `x' Q x = t (mod p^k)` and primitivity.
    pub fn new(form: ModMatrix, vector: Vec<BigInt>, target: BigInt) -> Result<Self> {
        let pk = form.modulus().clone();
        if vector.len() != form.rows() {
            return Err(Error::internal("representation vector has the wrong length"));
        }
        let vector: Vec<BigInt> = vector.iter().map(|v| pk.reduce(v)).collect();
        if !is_primitive(&vector, &pk) {
            return Err(Error::internal("representation vector is not primitive"));
        }
        if form.quadratic_value(&vector) != pk.reduce(&target) {
            return Err(Error::internal(format!("x'Qx differs from {target}")));
        }
        Ok(Representation { vector, target, form })
    }

    pub fn vector(&self) -> &[BigInt] {
        &self.vector
    }

    pub fn target(&self) -> &BigInt {
        &self.target
    }

    pub fn form(&self) -> &ModMatrix {
        &self.form
    }
}

fn no_representation(t: &BigInt, certified: &PrimePower) -> Error {
    Error::NoRepresentation {
        t: t.clone(),
        certified_modulus: certified.modulus().clone(),
    }
}

/// Solves `p^s * tau * x^2 = t (mod p^k)` with `x` a unit.
pub fn represent_type1(tau: &BigInt, scale: u32, t: &BigInt, pk: &PrimePower) -> Result<Representation> {
    let a = pk.reduce(&(pk.pow_p(scale) * tau));
    let form = ModMatrix::diagonal(std::slice::from_ref(&a), pk);
    let t_red = pk.reduce(t);
    let (oa, ua) = padic_split(&a, pk.p());
    let x = match oa {
        Order::Infinite if t_red.is_zero() => BigInt::one(),
        Order::Infinite => return Err(no_representation(t, pk)),
        Order::Finite(o) => {
            let (ot, ut) = padic_split(&t_red, pk.p());
            if ot != Order::Finite(o) {
                return Err(no_representation(t, pk));
            }
            let local = pk.with_k(pk.k() - o)?;
            let ratio = local.reduce(&(ut * local.inv(&ua)?));
            sqrt_mod(&ratio, &local).map_err(|_| no_representation(t, pk))?
        }
    };
    Representation::new(form, vec![x], t_red)
}

/// Represents `t` with `ord_2(t) = 1` by the block `[[2a, b], [b, 2c]]` over `Z/2^k`.
///
/// A solution modulo 8 is found by scanning pairs with the first coordinate
/// running fastest; the partner of the first odd coordinate is then lifted.
pub fn represent_type2(block: &Block, t: &BigInt, pk: &PrimePower) -> Result<Representation> {
    let Block::TypeII { a, b, c } = block else {
        return Err(Error::PreconditionViolated("a Type II block is required".into()));
    };
    if !pk.is_two() {
        return Err(Error::PreconditionViolated(
            "Type II blocks exist only for p = 2".into(),
        ));
    }
    let t_red = pk.reduce(t);
    if pk.order(&t_red) != Order::Finite(1) {
        return Err(Error::PreconditionViolated(format!("ord_2({t}) must be 1")));
    }
    let form = ModMatrix::new(2, 2, pk.clone(), block.entries())?;
    let low = pk.with_k(pk.k().min(3))?;
    let value = |x: &BigInt, y: &BigInt| -> BigInt { (a * x * x + b * x * y + c * y * y) * 2 };
    for yv in 0..8i64 {
        for xv in 0..8i64 {
            let (x, y) = (BigInt::from(xv), BigInt::from(yv));
            if x.is_even() && y.is_even() {
                continue;
            }
            if low.reduce(&value(&x, &y)) != low.reduce(&t_red) {
                continue;
            }
            let half = &t_red >> 1u32;
            let bits = pk.k() - 1;
            let vector = if x.is_odd() {
                let g = |w: &BigInt| a * &x * &x + b * &x * w + c * w * w;
                vec![x.clone(), lift_odd_derivative(&g, &y, &half, bits)]
            } else {
                let g = |w: &BigInt| a * w * w + b * w * &y + c * &y * &y;
                vec![lift_odd_derivative(&g, &x, &half, bits), y.clone()]
            };
            return Representation::new(form, vector, t_red);
        }
    }
    Err(Error::internal("no Type II representation modulo 8"))
}

/// Lifts `w` so that `g(w) = v (mod 2^bits)` when `g(w0) = v (mod 2)` and `g'` is odd.
fn lift_odd_derivative(g: &dyn Fn(&BigInt) -> BigInt, w0: &BigInt, v: &BigInt, bits: u32) -> BigInt {
    let mut w = w0.clone();
    for j in 1..bits {
        let modulus = BigInt::one() << (j + 1);
        if !(g(&w) - v).mod_floor(&modulus).is_zero() {
            w += BigInt::one() << j;
        }
    }
    if bits == 0 {
        w
    } else {
        w.mod_floor(&(BigInt::one() << bits))
    }
}

/// The smallest order of an entry of `q`, `k` when `q` vanishes.
fn matrix_order(q: &ModMatrix) -> u32 {
    let pk = q.modulus();
    q.data()
        .iter()
        .filter_map(|v| pk.order(v).finite())
        .min()
        .unwrap_or(pk.k())
}

/// Lifts a primitive representation `x` of `t` modulo `p^m` to one modulo `p^k`
/// by scaling with a unit `u` satisfying `u^2 x'Qx = t`.
pub fn lift_representation(q: &ModMatrix, x: &[BigInt], t: &BigInt, m: u32) -> Result<Representation> {
    let pk = q.modulus().clone();
    let t_red = pk.reduce(t);
    if m >= pk.k() {
        return Representation::new(q.clone(), x.to_vec(), t_red);
    }
    let ord_t = pk.order(&t_red).finite().unwrap_or(pk.k());
    let required = matrix_order(q).max(ord_t) + pk.k_p();
    if m < required {
        return Err(Error::ThresholdNotMet { m, required });
    }
    let low = pk.with_k(m)?;
    let vector: Vec<BigInt> = x.iter().map(|v| pk.reduce(v)).collect();
    if !is_primitive(&vector, &pk) || low.reduce(&q.quadratic_value(&vector)) != low.reduce(&t_red) {
        return Err(Error::PreconditionViolated(format!(
            "the vector does not represent {t} primitively modulo {}",
            low.modulus()
        )));
    }
    let value = q.quadratic_value(&vector);
    let (_, unit_a) = padic_split(&value, pk.p());
    let (_, unit_t) = padic_split(&t_red, pk.p());
    let local = pk.with_k(pk.k() - ord_t)?;
    let ratio = local.reduce(&(unit_t * local.inv(&unit_a)?));
    let u = sqrt_mod(&ratio, &local)?;
    let lifted = vector.iter().map(|v| pk.reduce(&(v * &u))).collect();
    Representation::new(q.clone(), lifted, t_red)
}

/// One block of the working form with the indices of its variables.
#[derive(Debug, Clone)]
struct Atom {
    scale: u32,
    block: Block,
    vars: Vec<usize>,
}

impl Atom {
    fn value(&self, vals: &[BigInt], p: &BigInt) -> BigInt {
        let s = num_traits::pow(p.clone(), self.scale as usize);
        match &self.block {
            Block::TypeI(u) => s * u * &vals[self.vars[0]] * &vals[self.vars[0]],
            Block::TypeII { a, b, c } => {
                let (x, y) = (&vals[self.vars[0]], &vals[self.vars[1]]);
                s * 2 * (a * x * x + b * x * y + c * y * y)
            }
        }
    }
}

/// How the pivot coordinate is closed.
#[derive(Debug, Clone, Copy)]
enum Pivot {
    Unit(usize),
    PairFirst(usize),
    PairSecond(usize),
}

struct Solver<'r, R: Rng + ?Sized> {
    p: BigInt,
    two: bool,
    nvars: usize,
    sampled: bool,
    rng: &'r mut R,
}

impl<R: Rng + ?Sized> Solver<'_, R> {
    fn pow(&self, e: u32) -> BigInt {
        num_traits::pow(self.p.clone(), e as usize)
    }

    fn solve(&mut self, atoms: &[Atom], in_m: &[bool], kk: u32, tt: BigInt, need_prim: bool) -> Option<Vec<BigInt>> {
        let modulus = self.pow(kk);
        let tt = tt.mod_floor(&modulus);
        let mut vals = vec![BigInt::zero(); self.nvars];
        let mut need_prim = need_prim;
        if need_prim {
            let free_var = atoms
                .iter()
                .filter(|a| a.scale >= kk)
                .flat_map(|a| a.vars.iter().copied())
                .find(|&v| in_m[v]);
            if let Some(v) = free_var {
                vals[v] = BigInt::one();
                need_prim = false;
            }
        }
        if !need_prim && tt.is_zero() {
            return Some(vals);
        }
        let active: Vec<&Atom> = atoms.iter().filter(|a| a.scale < kk).collect();
        let min_scale = active.iter().map(|a| a.scale).min()?;
        if min_scale >= 1 {
            if !tt.is_multiple_of(&self.p) {
                return None;
            }
            let shifted: Vec<Atom> = atoms
                .iter()
                .map(|a| Atom {
                    scale: a.scale - 1,
                    ..a.clone()
                })
                .collect();
            let sub = self.solve(&shifted, in_m, kk - 1, &tt / &self.p, need_prim)?;
            return Some(merge(vals, sub));
        }
        if let Some(found) = self.case_unit(atoms, in_m, kk, &tt, need_prim) {
            return Some(merge(vals, found));
        }
        let mut raised = atoms.to_vec();
        let mut sub_m = in_m.to_vec();
        let mut substituted = Vec::new();
        for a in raised.iter_mut().filter(|a| a.scale == 0) {
            a.scale += 2;
            for &v in &a.vars {
                sub_m[v] = false;
                substituted.push(v);
            }
        }
        let mut sub = self.solve(&raised, &sub_m, kk, tt, need_prim)?;
        for v in substituted {
            sub[v] = &sub[v] * &self.p;
        }
        Some(merge(vals, sub))
    }

    /// Solutions in which some scale-0 coordinate is a unit.
    fn case_unit(
        &mut self,
        atoms: &[Atom],
        in_m: &[bool],
        kk: u32,
        tt: &BigInt,
        need_prim: bool,
    ) -> Option<Vec<BigInt>> {
        let active: Vec<&Atom> = atoms.iter().filter(|a| a.scale < kk).collect();
        let mut pivots = Vec::new();
        for (idx, a) in active.iter().enumerate() {
            if a.scale != 0 {
                continue;
            }
            match a.block {
                Block::TypeI(_) => pivots.push(Pivot::Unit(idx)),
                Block::TypeII { .. } => {
                    pivots.push(Pivot::PairFirst(idx));
                    pivots.push(Pivot::PairSecond(idx));
                }
            }
        }
        for pivot in pivots {
            if let Some(found) = self.try_pivot(&active, in_m, kk, tt, need_prim, pivot) {
                return Some(found);
            }
        }
        None
    }

    /// The enumerated coordinates and their residue moduli for a pivot.
    fn enumeration(&self, active: &[&Atom], pivot_atom: usize, pair_pivot: bool) -> Vec<(usize, u64)> {
        let mut out = Vec::new();
        for (idx, a) in active.iter().enumerate() {
            if idx == pivot_atom {
                continue;
            }
            let modulus = if !self.two {
                (a.scale == 0).then_some(0u64)
            } else if pair_pivot {
                match (&a.block, a.scale) {
                    (_, 0) | (Block::TypeI(_), 1) => Some(2),
                    _ => None,
                }
            } else {
                match (&a.block, a.scale) {
                    (_, 0) => Some(4),
                    (_, 1) | (Block::TypeI(_), 2) => Some(2),
                    _ => None,
                }
            };
            if let Some(m) = modulus {
                for &v in &a.vars {
                    out.push((v, m));
                }
            }
        }
        out
    }

    fn try_pivot(
        &mut self,
        active: &[&Atom],
        in_m: &[bool],
        kk: u32,
        tt: &BigInt,
        need_prim: bool,
        pivot: Pivot,
    ) -> Option<Vec<BigInt>> {
        let (pivot_atom, pair) = match pivot {
            Pivot::Unit(i) => (i, false),
            Pivot::PairFirst(i) | Pivot::PairSecond(i) => (i, true),
        };
        let p_small = if self.two {
            0
        } else {
            u64::try_from(&self.p).unwrap_or(u64::MAX)
        };
        let enumerated: Vec<(usize, u64)> = self
            .enumeration(active, pivot_atom, pair)
            .into_iter()
            .map(|(v, m)| (v, if m == 0 { p_small } else { m }))
            .collect();
        let helper_pool: Vec<usize> = active
            .iter()
            .enumerate()
            .filter(|(idx, _)| *idx != pivot_atom)
            .flat_map(|(_, a)| a.vars.iter().copied())
            .filter(|v| in_m[*v] && !enumerated.iter().any(|(e, _)| e == v))
            .collect();
        let total = enumerated
            .iter()
            .try_fold(1u64, |acc, &(_, m)| acc.checked_mul(m))
            .filter(|&c| c <= EXHAUSTIVE_LIMIT);
        let mut counter = vec![0u64; enumerated.len()];
        let rounds = total.unwrap_or(SAMPLE_BUDGET as u64);
        if total.is_none() {
            self.sampled = true;
        }
        for round in 0..rounds {
            if total.is_none() {
                for (slot, &(_, m)) in counter.iter_mut().zip(&enumerated) {
                    *slot = self.rng.gen_range(0..m);
                }
            } else if round > 0 {
                for (slot, &(_, m)) in counter.iter_mut().zip(&enumerated) {
                    *slot += 1;
                    if *slot < m {
                        break;
                    }
                    *slot = 0;
                }
            }
            let mut vals = vec![BigInt::zero(); self.nvars];
            for (&(v, _), &c) in enumerated.iter().zip(&counter) {
                vals[v] = BigInt::from(c);
            }
            if let Some(found) =
                self.close_pivot(active, in_m, kk, tt, need_prim, pivot, &enumerated, &helper_pool, vals)
            {
                return Some(found);
            }
        }
        None
    }

    #[allow(clippy::too_many_arguments)]
    fn close_pivot(
        &self,
        active: &[&Atom],
        in_m: &[bool],
        kk: u32,
        tt: &BigInt,
        need_prim: bool,
        pivot: Pivot,
        enumerated: &[(usize, u64)],
        helper_pool: &[usize],
        mut vals: Vec<BigInt>,
    ) -> Option<Vec<BigInt>> {
        let pk = PrimePower::new(self.p.clone(), kk.max(1)).ok()?;
        let pivot_atom = match pivot {
            Pivot::Unit(i) | Pivot::PairFirst(i) | Pivot::PairSecond(i) => i,
        };
        let atom = active[pivot_atom];
        let unit_var = match pivot {
            Pivot::Unit(_) | Pivot::PairFirst(_) => atom.vars[0],
            Pivot::PairSecond(_) => atom.vars[1],
        };
        let mut primitive = !need_prim
            || in_m[unit_var]
            || enumerated
                .iter()
                .any(|&(v, _)| in_m[v] && !vals[v].is_multiple_of(&self.p));
        if !primitive {
            let helper = *helper_pool.first()?;
            vals[helper] = BigInt::one();
            primitive = true;
        }
        debug_assert!(primitive);
        let rest: BigInt = active
            .iter()
            .enumerate()
            .filter(|(idx, _)| *idx != pivot_atom)
            .map(|(_, a)| a.value(&vals, &self.p))
            .sum();
        let modulus = self.pow(kk);
        let diff = (tt - rest).mod_floor(&modulus);
        match (&atom.block, pivot) {
            (Block::TypeI(u), _) => {
                let ratio = (&diff * pk.inv(u).ok()?).mod_floor(&modulus);
                if self.two {
                    let low = BigInt::one() << kk.min(3);
                    if !ratio.mod_floor(&low).is_one() {
                        return None;
                    }
                } else if ratio.is_multiple_of(&self.p) || legendre(&ratio, &self.p).ok()? != 1 {
                    return None;
                }
                vals[unit_var] = if kk == 0 {
                    BigInt::one()
                } else {
                    sqrt_mod(&ratio, &pk).ok()?
                };
            }
            (Block::TypeII { a, b, c }, Pivot::PairFirst(_)) => {
                if diff.is_odd() {
                    return None;
                }
                let half = &diff >> 1u32;
                let g = |w: &BigInt| a + b * w + c * w * w;
                let w0 = (0..2).map(BigInt::from).find(|w| (g(w) - &half).is_even())?;
                vals[atom.vars[0]] = BigInt::one();
                vals[atom.vars[1]] = lift_odd_derivative(&g, &w0, &half, kk.saturating_sub(1));
            }
            (Block::TypeII { a, b, c }, _) => {
                if diff.is_odd() {
                    return None;
                }
                let half = &diff >> 1u32;
                let g = |w: &BigInt| a * w * w + b * w + c;
                let w0 = (0..2).map(BigInt::from).find(|w| (g(w) - &half).is_even())?;
                vals[atom.vars[1]] = BigInt::one();
                vals[atom.vars[0]] = lift_odd_derivative(&g, &w0, &half, kk.saturating_sub(1));
            }
        }
        Some(vals)
    }
}

fn merge(mut base: Vec<BigInt>, sub: Vec<BigInt>) -> Vec<BigInt> {
    for (b, s) in base.iter_mut().zip(sub) {
        if !s.is_zero() {
            *b = s;
        }
    }
    base
}

fn atoms_of(d: &BlockDiagForm) -> Vec<Atom> {
    let k = d.modulus().k();
    let mut atoms = Vec::new();
    let mut next = 0usize;
    for b in d.blocks() {
        let dim = b.block.dim();
        atoms.push(Atom {
            scale: b.scale,
            block: b.block.clone(),
            vars: (next..next + dim).collect(),
        });
        next += dim;
    }
    for _ in 0..d.zero_dim() {
        atoms.push(Atom {
            scale: k,
            block: Block::TypeI(BigInt::one()),
            vars: vec![next],
        });
        next += 1;
    }
    atoms
}

/// Outcome of the exact search on a block diagonal form.
enum Search {
    Found(Vec<BigInt>),
    Absent,
    Inconclusive,
}

fn search_blocks<R: Rng + ?Sized>(d: &BlockDiagForm, t: &BigInt, rng: &mut R) -> Search {
    let pk = d.modulus();
    let mut solver = Solver {
        p: pk.p().clone(),
        two: pk.is_two(),
        nvars: d.dim(),
        sampled: false,
        rng,
    };
    let atoms = atoms_of(d);
    let in_m = vec![true; d.dim()];
    match solver.solve(&atoms, &in_m, pk.k(), pk.reduce(t), true) {
        Some(vals) => Search::Found(vals),
        None if solver.sampled => Search::Inconclusive,
        None => Search::Absent,
    }
}

/// Finds a primitive representation of `t` by the symmetric matrix `q` over `Z/p^k`.
///
/// Absence is certified at the smallest precision `p^m` with
/// `m = min(k, max(ord_p(D), ord_p(t)) + k_p)` at which the search already fails.
pub fn represent_general<R: Rng + ?Sized>(q: &ModMatrix, t: &BigInt, rng: &mut R) -> Result<Representation> {
    let pk = q.modulus().clone();
    let t_red = pk.reduce(t);
    let (d, w) = block_diagonalize_mod(q)?;
    match search_blocks(&d, &t_red, rng) {
        Search::Found(y) => {
            let column = ModMatrix::column_vector(&y, &pk);
            let x = w.u().mul(&column)?.column(0);
            Representation::new(q.clone(), x, t_red)
        }
        Search::Inconclusive => Err(Error::retries("representation")),
        Search::Absent => {
            let ord_d = d.blocks().iter().map(|b| b.scale).min().unwrap_or(pk.k());
            let ord_t = pk.order(&t_red).finite().unwrap_or(pk.k());
            let m = pk.k().min(ord_d.max(ord_t) + pk.k_p());
            if m < pk.k() {
                let low = pk.with_k(m)?;
                let (d_low, _) = block_diagonalize_mod(&q.reduce_to(&low)?)?;
                if let Search::Absent = search_blocks(&d_low, &t_red, rng) {
                    return Err(no_representation(&t_red, &low));
                }
            }
            Err(no_representation(&t_red, &pk))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matmod::random_below;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn b(v: i64) -> BigInt {
        BigInt::from(v)
    }

    fn pk(p: u32, k: u32) -> PrimePower {
        PrimePower::new(p, k).unwrap()
    }

    #[test]
    fn type_one_examples() {
        let r = represent_type1(&b(1), 0, &b(4), &pk(5, 3)).unwrap();
        assert_eq!(r.vector(), &[b(2)]);
        assert!(matches!(
            represent_type1(&b(3), 0, &b(2), &pk(3, 2)),
            Err(Error::NoRepresentation { .. })
        ));
        let r = represent_type1(&b(7), 0, &b(7), &pk(2, 4)).unwrap();
        assert_eq!(r.vector(), &[b(1)]);
        let r = represent_type1(&b(3), 1, &b(22), &pk(2, 5)).unwrap();
        assert_eq!(r.form().quadratic_value(r.vector()), b(22));
    }

    #[test]
    fn type_two_examples() {
        let r = represent_type2(&Block::t_minus(), &b(2), &pk(2, 5)).unwrap();
        assert_eq!(r.vector(), &[b(1), b(0)]);
        let r = represent_type2(&Block::t_plus(), &b(6), &pk(2, 4)).unwrap();
        assert_eq!(r.vector(), &[b(1), b(2)]);
        let r = represent_type2(&Block::t_minus(), &b(6), &pk(2, 3)).unwrap();
        assert_eq!(r.vector(), &[b(1), b(1)]);
        assert!(matches!(
            represent_type2(&Block::t_minus(), &b(4), &pk(2, 4)),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn type_two_lifts_high() {
        for t in [2i64, 6, 10, 14, 18, 1022] {
            for block in [
                Block::t_plus(),
                Block::t_minus(),
                Block::TypeII {
                    a: b(0),
                    b: b(1),
                    c: b(0),
                },
            ] {
                let r = represent_type2(&block, &b(t), &pk(2, 12)).unwrap();
                assert_eq!(r.form().quadratic_value(r.vector()), b(t));
            }
        }
    }

    #[test]
    fn lift_examples() {
        let m128 = pk(2, 7);
        let q = ModMatrix::diagonal(&[b(1)], &m128);
        let r = lift_representation(&q, &[b(7)], &b(17), 5).unwrap();
        let x = &r.vector()[0];
        assert_eq!((x * x - b(17)).mod_floor(&b(128)), b(0));
        let r = lift_representation(&q, &[b(1)], &b(1), 3).unwrap();
        assert_eq!(r.vector(), &[b(1)]);
        assert_eq!(
            lift_representation(&q, &[b(1)], &b(1), 2),
            Err(Error::ThresholdNotMet { m: 2, required: 3 })
        );
    }

    #[test]
    fn general_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = ModMatrix::diagonal(&[b(1), b(1)], &pk(3, 2));
        let r = represent_general(&q, &b(2), &mut rng).unwrap();
        assert_eq!(q.quadratic_value(r.vector()), b(2));
        let q = ModMatrix::diagonal(&[b(1), b(1), b(7)], &pk(2, 3));
        let r = represent_general(&q, &b(7), &mut rng).unwrap();
        assert_eq!(q.quadratic_value(r.vector()), b(7));
        let q = ModMatrix::diagonal(&[b(1), b(4)], &pk(2, 3));
        assert_eq!(
            represent_general(&q, &b(3), &mut rng),
            Err(Error::NoRepresentation {
                t: b(3),
                certified_modulus: b(8)
            })
        );
    }

    fn brute_exists(q: &ModMatrix, t: &BigInt) -> bool {
        let pk = q.modulus();
        let m = i64::try_from(pk.modulus()).unwrap();
        let n = q.rows();
        let mut x = vec![0i64; n];
        loop {
            let v: Vec<BigInt> = x.iter().map(|&c| b(c)).collect();
            if is_primitive(&v, pk) && q.quadratic_value(&v) == pk.reduce(t) {
                return true;
            }
            let mut i = 0;
            loop {
                if i == n {
                    return false;
                }
                x[i] += 1;
                if x[i] < m {
                    break;
                }
                x[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn agrees_with_brute_force_on_random_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..120 {
            let (p, k) = [(2u32, 3u32), (2, 4), (3, 2), (3, 3), (5, 2)][trial % 5];
            let m = pk(p, k);
            let n = 1 + trial % 3;
            let mut data = vec![BigInt::zero(); n * n];
            for i in 0..n {
                for j in i..n {
                    let v = random_below(m.modulus(), &mut rng);
                    data[i * n + j] = v.clone();
                    data[j * n + i] = v;
                }
            }
            let q = ModMatrix::new(n, n, m.clone(), data).unwrap();
            let modulus = i64::try_from(m.modulus()).unwrap();
            for t in 0..modulus {
                let t = b(t);
                let expected = brute_exists(&q, &t);
                match represent_general(&q, &t, &mut rng) {
                    Ok(r) => {
                        assert!(expected, "found a representation brute force missed: {q} t={t}");
                        assert_eq!(q.quadratic_value(r.vector()), t);
                    }
                    Err(Error::NoRepresentation { .. }) => assert!(!expected, "missed {t} for\n{q}"),
                    Err(e) => panic!("unexpected {e}"),
                }
            }
        }
    }
}
