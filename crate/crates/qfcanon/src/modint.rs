//! Scalar arithmetic over the integers and the rings `Z/p^k`.
//!
//! Provides p-adic valuations, unit parts, Legendre and Kronecker symbols,
//! the p-sign of an integer, modular square roots lifted by Hensel's lemma,
//! the smallest quadratic non-residue and a pair of non-residues summing to 1.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Errors raised by scalar operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("{0} is not a prime")]
    NotPrime(BigInt),
    #[error("the exponent k must be at least 1")]
    ZeroExponent,
    #[error("{t} is divisible by {p}")]
    NotCoprime { t: BigInt, p: BigInt },
    #[error("{0} is not an odd prime")]
    NotOddPrime(BigInt),
    #[error("{0} is even")]
    NotOdd(BigInt),
    #[error("{t} is not a square modulo {modulus}")]
    NotASquare { t: BigInt, modulus: BigInt },
    #[error("no two non-residues modulo {0} sum to 1")]
    NoPair(BigInt),
    #[error("{t} is not invertible modulo {modulus}")]
    NotInvertible { t: BigInt, modulus: BigInt },
}

/// The p-adic order of an integer; zero has infinite order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Order {
    Finite(u32),
    Infinite,
}

impl Order {
    /// The finite value, if any.
    pub fn finite(self) -> Option<u32> {
        match self {
            Order::Finite(v) => Some(v),
            Order::Infinite => None,
        }
    }

    /// True for the order of zero.
    pub fn is_infinite(self) -> bool {
        matches!(self, Order::Infinite)
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(v) => write!(f, "{v}"),
            Order::Infinite => write!(f, "inf"),
        }
    }
}

/// A prime power `p^k` together with its materialized value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrimePower {
    p: BigInt,
    k: u32,
    modulus: BigInt,
}

impl PrimePower {
    /// Builds `p^k`, checking that `p` is prime and `k >= 1`.
    pub fn new(p: impl Into<BigInt>, k: u32) -> Result<Self, ArithError> {
        let p = p.into();
        if !is_probable_prime(&p) {
            return Err(ArithError::NotPrime(p));
        }
        if k == 0 {
            return Err(ArithError::ZeroExponent);
        }
        Ok(Self::from_trusted(p, k))
    }

    fn from_trusted(p: BigInt, k: u32) -> Self {
        let modulus = num_traits::pow(p.clone(), k as usize);
        PrimePower { p, k, modulus }
    }

    /// The same prime with a different exponent.
    pub fn with_k(&self, k: u32) -> Result<Self, ArithError> {
        if k == 0 {
            return Err(ArithError::ZeroExponent);
        }
        Ok(Self::from_trusted(self.p.clone(), k))
    }

    pub fn p(&self) -> &BigInt {
        &self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn modulus(&self) -> &BigInt {
        &self.modulus
    }

    /// True when `p = 2`.
    pub fn is_two(&self) -> bool {
        self.p == BigInt::from(2)
    }

    /// The completion exponent: 3 for `p = 2`, otherwise 1.
    pub fn k_p(&self) -> u32 {
        k_p(&self.p)
    }

    /// `p^e` as an integer.
    pub fn pow_p(&self, e: u32) -> BigInt {
        num_traits::pow(self.p.clone(), e as usize)
    }

    /// Reduces an integer into `[0, p^k)`.
    pub fn reduce(&self, t: &BigInt) -> BigInt {
        t.mod_floor(&self.modulus)
    }

    /// True when `t` is a unit modulo `p`.
    pub fn is_unit(&self, t: &BigInt) -> bool {
        !t.mod_floor(&self.p).is_zero()
    }

    /// The inverse of `t` modulo `p^k`.
    pub fn inv(&self, t: &BigInt) -> Result<BigInt, ArithError> {
        mod_inverse(t, &self.modulus)
    }

    /// The p-adic order of `t mod p^k`.
    pub fn order(&self, t: &BigInt) -> Order {
        padic_split(&self.reduce(t), &self.p).0
    }
}

impl fmt::Display for PrimePower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.p, self.k)
    }
}

/// The completion exponent `k_p`: 3 for `p = 2`, otherwise 1.
pub fn k_p(p: &BigInt) -> u32 {
    if *p == BigInt::from(2) {
        3
    } else {
        1
    }
}

/// Deterministic Miller-Rabin with the first twelve prime bases.
pub fn is_probable_prime(n: &BigInt) -> bool {
    let two = BigInt::from(2);
    if *n < two {
        return false;
    }
    const SMALL: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &q in &SMALL {
        let q = BigInt::from(q);
        if *n == q {
            return true;
        }
        if n.is_multiple_of(&q) {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let mut d = n_minus_1.clone();
    let mut s = 0u32;
    while d.is_even() {
        d >>= 1;
        s += 1;
    }
    'witness: for &a in &SMALL {
        let mut x = BigInt::from(a).modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x).mod_floor(n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Writes `t = p^order * unit` with `p` not dividing `unit`; zero gives `(Infinite, 0)`.
pub fn padic_split(t: &BigInt, p: &BigInt) -> (Order, BigInt) {
    if t.is_zero() {
        return (Order::Infinite, BigInt::zero());
    }
    let mut unit = t.clone();
    let mut order = 0u32;
    loop {
        let (q, r) = unit.div_rem(p);
        if !r.is_zero() {
            break;
        }
        unit = q;
        order += 1;
    }
    (Order::Finite(order), unit)
}

/// The p-adic order of `t`.
pub fn ord_p(t: &BigInt, p: &BigInt) -> Order {
    padic_split(t, p).0
}

/// The part of `t` coprime to `p` (zero for `t = 0`).
pub fn cop_p(t: &BigInt, p: &BigInt) -> BigInt {
    padic_split(t, p).1
}

/// The inverse of `t` modulo `m`.
pub fn mod_inverse(t: &BigInt, m: &BigInt) -> Result<BigInt, ArithError> {
    let t_red = t.mod_floor(m);
    let ext = t_red.extended_gcd(m);
    if !ext.gcd.is_one() {
        return Err(ArithError::NotInvertible {
            t: t.clone(),
            modulus: m.clone(),
        });
    }
    Ok(ext.x.mod_floor(m))
}

fn require_odd_prime_shape(p: &BigInt) -> Result<(), ArithError> {
    if *p <= BigInt::from(2) || p.is_even() {
        return Err(ArithError::NotOddPrime(p.clone()));
    }
    Ok(())
}

/// The Legendre symbol of `t` modulo an odd prime `p`, by Euler's criterion.
pub fn legendre(t: &BigInt, p: &BigInt) -> Result<i8, ArithError> {
    require_odd_prime_shape(p)?;
    let t_red = t.mod_floor(p);
    if t_red.is_zero() {
        return Err(ArithError::NotCoprime {
            t: t.clone(),
            p: p.clone(),
        });
    }
    let e = (p - 1u32) >> 1;
    if t_red.modpow(&e, p).is_one() {
        Ok(1)
    } else {
        Ok(-1)
    }
}

/// The Kronecker symbol `(t|2)`: `+1` when `t = ±1 mod 8`, `-1` when `t = ±3 mod 8`.
pub fn kronecker2(t: &BigInt) -> Result<i8, ArithError> {
    if t.is_even() {
        return Err(ArithError::NotOdd(t.clone()));
    }
    Ok(kronecker2_residue(residue_mod8(t)))
}

/// `t mod 8` as a small integer.
pub fn residue_mod8(t: &BigInt) -> u8 {
    t.mod_floor(&BigInt::from(8)).to_u8().unwrap_or(0)
}

/// `(r|2)` for an odd residue class `r` modulo 8.
pub fn kronecker2_residue(r: u8) -> i8 {
    match r % 8 {
        1 | 7 => 1,
        _ => -1,
    }
}

/// The p-sign of `t`: 0 for zero, the Legendre symbol of the unit part for odd `p`,
/// and the unit part modulo 8 for `p = 2`.
pub fn sgn_p(t: &BigInt, p: &BigInt) -> Result<i8, ArithError> {
    if t.is_zero() {
        return Ok(0);
    }
    let unit = cop_p(t, p);
    if *p == BigInt::from(2) {
        Ok(residue_mod8(&unit) as i8)
    } else {
        legendre(&unit, p)
    }
}

/// The `p^k`-symbol of an integer: order and sign of `t mod p^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntSymbol {
    pub order: Order,
    pub sign: i8,
}

/// Computes the `p^k`-symbol of `t`.
pub fn int_symbol(t: &BigInt, pk: &PrimePower) -> Result<IntSymbol, ArithError> {
    let reduced = pk.reduce(t);
    let (order, _) = padic_split(&reduced, pk.p());
    let sign = sgn_p(&reduced, pk.p())?;
    Ok(IntSymbol { order, sign })
}

/// The smallest quadratic non-residue modulo an odd prime.
pub fn sigma_p(p: &BigInt) -> Result<BigInt, ArithError> {
    require_odd_prime_shape(p)?;
    if !is_probable_prime(p) {
        return Err(ArithError::NotOddPrime(p.clone()));
    }
    let mut candidate = BigInt::from(2);
    while &candidate < p {
        if legendre(&candidate, p)? == -1 {
            return Ok(candidate);
        }
        candidate += 1u32;
    }
    Err(ArithError::NotOddPrime(p.clone()))
}

/// Two quadratic non-residues `(t1, t2)` modulo `p` with `t1 + t2 = 1 mod p`,
/// choosing the smallest possible `t1`.
pub fn nonresidue_sum_pair(p: &BigInt) -> Result<(BigInt, BigInt), ArithError> {
    require_odd_prime_shape(p)?;
    if !is_probable_prime(p) {
        return Err(ArithError::NotOddPrime(p.clone()));
    }
    let mut t1 = BigInt::from(2);
    while &t1 < p {
        let t2 = (BigInt::one() - &t1).mod_floor(p);
        if !t2.is_zero() && legendre(&t1, p)? == -1 && legendre(&t2, p)? == -1 {
            return Ok((t1, t2));
        }
        t1 += 1u32;
    }
    Err(ArithError::NoPair(p.clone()))
}

/// A square root of a non-zero residue modulo an odd prime (Tonelli-Shanks).
fn sqrt_mod_prime(u: &BigInt, p: &BigInt) -> Result<BigInt, ArithError> {
    let u = u.mod_floor(p);
    if legendre(&u, p)? != 1 {
        return Err(ArithError::NotASquare {
            t: u,
            modulus: p.clone(),
        });
    }
    let four = BigInt::from(4);
    if p.mod_floor(&four) == BigInt::from(3) {
        let e = (p + 1u32) >> 2;
        return Ok(u.modpow(&e, p));
    }
    let mut q = p - 1u32;
    let mut s = 0u32;
    while q.is_even() {
        q >>= 1;
        s += 1;
    }
    let z = sigma_p(p)?;
    let mut m = s;
    let mut c = z.modpow(&q, p);
    let mut t = u.modpow(&q, p);
    let mut r = u.modpow(&((&q + 1u32) >> 1), p);
    while !t.is_one() {
        let mut i = 0u32;
        let mut probe = t.clone();
        while !probe.is_one() {
            probe = (&probe * &probe).mod_floor(p);
            i += 1;
        }
        let mut b = c.clone();
        for _ in 0..(m - i - 1) {
            b = (&b * &b).mod_floor(p);
        }
        m = i;
        c = (&b * &b).mod_floor(p);
        t = (&t * &c).mod_floor(p);
        r = (&r * &b).mod_floor(p);
    }
    Ok(r)
}

/// True when `t` is a square modulo `p^k`, by the order/sign criterion.
pub fn is_square_mod(t: &BigInt, pk: &PrimePower) -> bool {
    sqrt_mod(t, pk).is_ok()
}

/// A square root of `t` modulo `p^k`.
///
/// Non-zero `t` is a square iff its order `o` is even and its unit part is a
/// square modulo `p` (odd `p`) or congruent to 1 modulo `2^min(3, k-o)` (`p = 2`).
/// The root is found modulo `p` (or 8) and lifted by Hensel iteration; the
/// least of `±x` (and `±x + 2^(k-1)` when `p = 2`) is returned.
pub fn sqrt_mod(t: &BigInt, pk: &PrimePower) -> Result<BigInt, ArithError> {
    let t_red = pk.reduce(t);
    if t_red.is_zero() {
        return Ok(BigInt::zero());
    }
    let not_square = || ArithError::NotASquare {
        t: t_red.clone(),
        modulus: pk.modulus().clone(),
    };
    let (order, unit) = padic_split(&t_red, pk.p());
    let order = order.finite().ok_or_else(not_square)?;
    if order % 2 == 1 {
        return Err(not_square());
    }
    let rest = pk.k() - order;
    let unit_root = if pk.is_two() {
        sqrt_unit_two(&unit, rest).ok_or_else(not_square)?
    } else {
        sqrt_unit_odd(&unit, pk.p(), rest).map_err(|_| not_square())?
    };
    let root = pk.reduce(&(pk.pow_p(order / 2) * unit_root));
    let half = pk.modulus() >> 1u32;
    let mut candidates = vec![root.clone(), pk.reduce(&-&root)];
    if pk.is_two() {
        candidates.push(pk.reduce(&(&root + &half)));
        candidates.push(pk.reduce(&(&half - &root)));
    }
    Ok(candidates
        .into_iter()
        .filter(|x| pk.reduce(&(x * x)) == t_red)
        .min()
        .unwrap_or(root))
}

/// Square root of an odd `u` modulo `2^r`, if it exists.
fn sqrt_unit_two(u: &BigInt, r: u32) -> Option<BigInt> {
    let base_bits = r.min(3);
    let base_mod = BigInt::one() << base_bits;
    if !u.mod_floor(&base_mod).is_one() {
        return None;
    }
    let mut y = BigInt::one();
    for j in 3..r {
        let next_mod = BigInt::one() << (j + 1);
        if !(&y * &y - u).mod_floor(&next_mod).is_zero() {
            y += BigInt::one() << (j - 1);
        }
    }
    Some(y.mod_floor(&(BigInt::one() << r)))
}

/// Square root of a unit `u` modulo `p^r` for odd `p`, by Newton iteration.
fn sqrt_unit_odd(u: &BigInt, p: &BigInt, r: u32) -> Result<BigInt, ArithError> {
    let target = num_traits::pow(p.clone(), r as usize);
    let mut y = sqrt_mod_prime(u, p)?;
    let mut precision = 1u32;
    while precision < r {
        precision = (precision * 2).min(r);
        let m = num_traits::pow(p.clone(), precision as usize);
        let f = (&y * &y - u).mod_floor(&m);
        let inv = mod_inverse(&(&y * 2u32), &m)?;
        y = (&y - f * inv).mod_floor(&m);
    }
    Ok(y.mod_floor(&target))
}

/// Absolute value helper used by formatting code.
pub fn abs(t: &BigInt) -> BigInt {
    t.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn padic_split_examples() {
        assert_eq!(padic_split(&b(12), &b(2)), (Order::Finite(2), b(3)));
        assert_eq!(padic_split(&b(0), &b(5)), (Order::Infinite, b(0)));
        assert_eq!(padic_split(&b(45), &b(3)), (Order::Finite(2), b(5)));
        assert_eq!(padic_split(&b(-24), &b(2)), (Order::Finite(3), b(-3)));
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre(&b(4), &b(7)), Ok(1));
        assert_eq!(legendre(&b(3), &b(7)), Ok(-1));
        assert_eq!(legendre(&b(1), &b(101)), Ok(1));
        assert!(matches!(legendre(&b(14), &b(7)), Err(ArithError::NotCoprime { .. })));
        assert!(matches!(legendre(&b(3), &b(2)), Err(ArithError::NotOddPrime(_))));
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker2(&b(7)), Ok(1));
        assert_eq!(kronecker2(&b(3)), Ok(-1));
        assert_eq!(kronecker2(&b(17)), Ok(1));
        assert_eq!(kronecker2(&b(-3)), Ok(-1));
        assert!(kronecker2(&b(4)).is_err());
    }

    #[test]
    fn sgn_examples() {
        assert_eq!(sgn_p(&b(0), &b(3)), Ok(0));
        assert_eq!(sgn_p(&b(12), &b(2)), Ok(3));
        assert_eq!(sgn_p(&b(18), &b(3)), Ok(-1));
    }

    #[test]
    fn int_symbol_examples() {
        let s = int_symbol(&b(18), &PrimePower::new(3, 3).unwrap()).unwrap();
        assert_eq!(
            s,
            IntSymbol {
                order: Order::Finite(2),
                sign: -1
            }
        );
        let s = int_symbol(&b(8), &PrimePower::new(2, 3).unwrap()).unwrap();
        assert_eq!(
            s,
            IntSymbol {
                order: Order::Infinite,
                sign: 0
            }
        );
        let s = int_symbol(&b(17), &PrimePower::new(2, 5).unwrap()).unwrap();
        assert_eq!(
            s,
            IntSymbol {
                order: Order::Finite(0),
                sign: 1
            }
        );
    }

    #[test]
    fn sqrt_examples() {
        let pk = PrimePower::new(2, 5).unwrap();
        let x = sqrt_mod(&b(17), &pk).unwrap();
        assert_eq!(x, b(7));
        assert!(sqrt_mod(&b(2), &PrimePower::new(2, 3).unwrap()).is_err());
        let x = sqrt_mod(&b(4), &PrimePower::new(3, 2).unwrap()).unwrap();
        assert_eq!(x, b(2));
    }

    #[test]
    fn sqrt_matches_scan_small() {
        for (p, k) in [(2u32, 6u32), (3, 4), (5, 3), (13, 2)] {
            let pk = PrimePower::new(p, k).unwrap();
            let m = pk.modulus().to_u64().unwrap();
            let squares: std::collections::HashSet<u64> = (0..m).map(|x| x * x % m).collect();
            for t in 0..m {
                let res = sqrt_mod(&b(t as i64), &pk);
                assert_eq!(res.is_ok(), squares.contains(&t), "p={p} k={k} t={t}");
                if let Ok(x) = res {
                    assert_eq!((&x * &x - t).mod_floor(pk.modulus()), b(0));
                }
            }
        }
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_p(&b(3)), Ok(b(2)));
        assert_eq!(sigma_p(&b(7)), Ok(b(3)));
        assert_eq!(sigma_p(&b(17)), Ok(b(3)));
        assert!(sigma_p(&b(2)).is_err());
    }

    #[test]
    fn sigma_matches_scan_below_1000() {
        for p in (3u64..1000).filter(|&p| is_probable_prime(&b(p as i64))) {
            let squares: std::collections::HashSet<u64> = (1..p).map(|x| x * x % p).collect();
            let expected = (2..p).find(|s| !squares.contains(s)).unwrap();
            assert_eq!(sigma_p(&b(p as i64)), Ok(b(expected as i64)), "p={p}");
        }
    }

    #[test]
    fn nonresidue_pairs() {
        assert_eq!(nonresidue_sum_pair(&b(7)), Ok((b(3), b(5))));
        assert_eq!(nonresidue_sum_pair(&b(3)), Ok((b(2), b(2))));
        assert_eq!(nonresidue_sum_pair(&b(5)), Ok((b(3), b(3))));
        for p in [11i64, 13, 101, 997] {
            let (t1, t2) = nonresidue_sum_pair(&b(p)).unwrap();
            assert_eq!(legendre(&t1, &b(p)), Ok(-1));
            assert_eq!(legendre(&t2, &b(p)), Ok(-1));
            assert_eq!((t1 + t2).mod_floor(&b(p)), b(1));
        }
    }

    #[test]
    fn primality() {
        let primes: Vec<i64> = (0..60).filter(|n| is_probable_prime(&b(*n))).collect();
        assert_eq!(
            primes,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]
        );
        assert!(PrimePower::new(4, 2).is_err());
        assert!(PrimePower::new(3, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn legendre_is_multiplicative(a in 1i64..10_000, c in 1i64..10_000) {
            let p = b(10007);
            let la = legendre(&b(a), &p).unwrap();
            let lc = legendre(&b(c), &p).unwrap();
            proptest::prop_assert_eq!(legendre(&b(a * c), &p).unwrap(), la * lc);
        }

        #[test]
        fn unit_squares_preserve_sign(u in 1i64..500, t in 1i64..5000) {
            for p in [2i64, 3, 5, 7] {
                if u % p == 0 { continue; }
                let lhs = sgn_p(&b(u * u * t), &b(p)).unwrap();
                let rhs = sgn_p(&b(t), &b(p)).unwrap();
                if p == 2 {
                    proptest::prop_assert_eq!(kronecker2_residue(lhs as u8), kronecker2_residue(rhs as u8));
                    proptest::prop_assert_eq!(lhs, rhs);
                } else {
                    proptest::prop_assert_eq!(lhs, rhs);
                }
            }
        }
    }
}
