//! Brute-force ground truth on tiny instances: enumeration of `GL_n(Z/p^k)`,
//! equivalence by exhaustive search over transformations and primitive
//! representations by scanning every vector.

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::matmod::ModMatrix;
use crate::modint::PrimePower;

const MAX_DIM: usize = 3;
const MAX_MODULUS_SMALL_DIM: u64 = 32;
const MAX_MODULUS_DIM3: u64 = 8;
const MAX_VECTORS: u64 = 1 << 20;

/// A dimension and modulus small enough for exhaustive enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmallUniverse {
    n: usize,
    pk: PrimePower,
    m: u64,
    p: u64,
}

impl SmallUniverse {
    /// Accepts `n <= 2` with `p^k <= 32` and `n = 3` with `p^k <= 8`.
    pub fn new(n: usize, pk: &PrimePower) -> Result<Self> {
        let too_large = || Error::UniverseTooLarge(format!("n = {n} over Z/{}", pk.modulus()));
        let m = pk.modulus().to_u64().ok_or_else(too_large)?;
        let p = pk.p().to_u64().ok_or_else(too_large)?;
        let limit = match n {
            1 | 2 => MAX_MODULUS_SMALL_DIM,
            MAX_DIM => MAX_MODULUS_DIM3,
            _ => 0,
        };
        if m > limit {
            return Err(too_large());
        }
        Ok(SmallUniverse {
            n,
            pk: pk.clone(),
            m,
            p,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> &PrimePower {
        &self.pk
    }

    /// `|GL_n(Z/p^k)| = p^(n^2 (k-1)) * prod_{i<n} (p^n - p^i)`.
    pub fn gl_order(&self) -> BigInt {
        let p = BigInt::from(self.p);
        let n = self.n as u32;
        let mut order = num_traits::pow(p.clone(), (n * n * (self.pk.k() - 1)) as usize);
        let pn = num_traits::pow(p.clone(), n as usize);
        for i in 0..n {
            order *= &pn - num_traits::pow(p.clone(), i as usize);
        }
        order
    }

    /// Every invertible matrix, each exactly once.
    pub fn gl(&self) -> GlIter {
        GlIter {
            universe: self.clone(),
            cursor: vec![0; self.n * self.n],
            exhausted: false,
        }
    }

    /// Every symmetric matrix over `Z/p^k`.
    pub fn forms(&self) -> impl Iterator<Item = ModMatrix> + '_ {
        let n = self.n;
        let free = n * (n + 1) / 2;
        let total = self.m.pow(free as u32);
        (0..total).map(move |mut code| {
            let mut data = vec![0u64; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = code % self.m;
                    code /= self.m;
                    data[i * n + j] = v;
                    data[j * n + i] = v;
                }
            }
            self.to_matrix(&data)
        })
    }

    fn to_matrix(&self, data: &[u64]) -> ModMatrix {
        ModMatrix::new(
            self.n,
            self.n,
            self.pk.clone(),
            data.iter().map(|&v| BigInt::from(v)).collect(),
        )
        .expect("dimensions agree by construction")
    }

    fn read(&self, m: &ModMatrix) -> Result<Vec<u64>> {
        if m.rows() != self.n || m.cols() != self.n || m.modulus() != &self.pk {
            return Err(Error::PreconditionViolated("matrix outside the universe".into()));
        }
        Ok(m.data().iter().map(|v| v.to_u64().unwrap_or(0)).collect())
    }
}

fn det_small(a: &[u64], n: usize, m: u64) -> u64 {
    let a: Vec<i128> = a.iter().map(|&v| v as i128).collect();
    let d = match n {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
    };
    d.rem_euclid(m as i128) as u64
}

/// Lazy enumeration of `GL_n(Z/p^k)`, the first entry running fastest.
#[derive(Debug, Clone)]
pub struct GlIter {
    universe: SmallUniverse,
    cursor: Vec<u64>,
    exhausted: bool,
}

impl GlIter {
    fn advance(&mut self) -> bool {
        for digit in self.cursor.iter_mut() {
            *digit += 1;
            if *digit < self.universe.m {
                return true;
            }
            *digit = 0;
        }
        false
    }
}

impl Iterator for GlIter {
    type Item = ModMatrix;

    fn next(&mut self) -> Option<ModMatrix> {
        while !self.exhausted {
            if !self.advance() {
                self.exhausted = true;
                break;
            }
            let u = &self.universe;
            if !det_small(&self.cursor, u.n, u.m).is_multiple_of(u.p) {
                return Some(u.to_matrix(&self.cursor));
            }
        }
        None
    }
}

/// Enumerates `GL_n(Z/p^k)` inside the small universe.
pub fn enumerate_gl(n: usize, pk: &PrimePower) -> Result<GlIter> {
    Ok(SmallUniverse::new(n, pk)?.gl())
}

/// All vectors of `(Z/m)^n`, the first coordinate running fastest.
fn all_vectors(n: usize, m: u64) -> Vec<Vec<u64>> {
    (0..m.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let v = code % m;
                    code /= m;
                    v
                })
                .collect()
        })
        .collect()
}

fn bilinear(x: &[u64], ay: &[u64], m: u64) -> u64 {
    x.iter().zip(ay).map(|(a, b)| a * b).sum::<u64>() % m
}

fn apply(a: &[u64], x: &[u64], m: u64) -> Vec<u64> {
    let n = x.len();
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum::<u64>() % m)
        .collect()
}

/// The first `U` in `GL_n(Z/p^k)` with `U' q1 U = q2`, or `None`.
///
/// Every matrix is covered: columns are chosen in turn among all vectors, a
/// partial choice is abandoned as soon as one of its Gram entries disagrees
/// with `q2`, and complete choices are kept only when invertible.
pub fn brute_equivalent(q1: &ModMatrix, q2: &ModMatrix) -> Result<Option<ModMatrix>> {
    let universe = SmallUniverse::new(q1.rows(), q1.modulus())?;
    let (a, b) = (universe.read(q1)?, universe.read(q2)?);
    let (n, m) = (universe.n, universe.m);
    let vectors = all_vectors(n, m);
    let images: Vec<Vec<u64>> = vectors.iter().map(|x| apply(&a, x, m)).collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let found = search_columns(&universe, &b, &vectors, &images, &mut chosen);
    Ok(found.map(|cols| {
        let mut data = vec![0u64; n * n];
        for (j, &c) in cols.iter().enumerate() {
            for r in 0..n {
                data[r * n + j] = vectors[c][r];
            }
        }
        universe.to_matrix(&data)
    }))
}

fn search_columns(
    universe: &SmallUniverse,
    b: &[u64],
    vectors: &[Vec<u64>],
    images: &[Vec<u64>],
    chosen: &mut Vec<usize>,
) -> Option<Vec<usize>> {
    let (n, m) = (universe.n, universe.m);
    let j = chosen.len();
    if j == n {
        let mut data = vec![0u64; n * n];
        for (c, &idx) in chosen.iter().enumerate() {
            for r in 0..n {
                data[r * n + c] = vectors[idx][r];
            }
        }
        return (!det_small(&data, n, m).is_multiple_of(universe.p)).then(|| chosen.clone());
    }
    for idx in 0..vectors.len() {
        let fits = chosen
            .iter()
            .chain(std::iter::once(&idx))
            .enumerate()
            .all(|(i, &c)| bilinear(&vectors[c], &images[idx], m) == b[i * n + j]);
        if fits {
            chosen.push(idx);
            if let Some(found) = search_columns(universe, b, vectors, images, chosen) {
                return Some(found);
            }
            chosen.pop();
        }
    }
    None
}

/// The first primitive `x` with `x' q x = t (mod p^k)`, scanning all vectors
/// with the first coordinate running fastest.
pub fn brute_represent(q: &ModMatrix, t: &BigInt) -> Result<Option<Vec<BigInt>>> {
    let pk = q.modulus();
    let n = q.rows();
    let too_large = || Error::UniverseTooLarge(format!("{} vectors over Z/{}", n, pk.modulus()));
    let m = pk.modulus().to_u64().ok_or_else(too_large)?;
    let p = pk.p().to_u64().ok_or_else(too_large)?;
    if m.checked_pow(n as u32).is_none_or(|count| count > MAX_VECTORS) {
        return Err(too_large());
    }
    let a: Vec<u64> = q.data().iter().map(|v| v.to_u64().unwrap_or(0)).collect();
    let t = pk.reduce(t).to_u64().ok_or_else(too_large)?;
    Ok(all_vectors(n, m)
        .into_iter()
        .find(|x| x.iter().any(|v| v % p != 0) && bilinear(x, &apply(&a, x, m), m) == t)
        .map(|x| x.into_iter().map(BigInt::from).collect()))
}

/// For every residue `t` modulo `p^k`, whether some primitive vector satisfies
/// `x' q x = t`, from a single scan of all vectors.
pub fn brute_represented_values(q: &ModMatrix) -> Result<Vec<bool>> {
    let pk = q.modulus();
    let n = q.rows();
    let too_large = || Error::UniverseTooLarge(format!("{} vectors over Z/{}", n, pk.modulus()));
    let m = pk.modulus().to_u64().ok_or_else(too_large)?;
    let p = pk.p().to_u64().ok_or_else(too_large)?;
    if m.checked_pow(n as u32).is_none_or(|count| count > MAX_VECTORS) {
        return Err(too_large());
    }
    let a: Vec<u64> = q.data().iter().map(|v| v.to_u64().unwrap_or(0)).collect();
    let mut hit = vec![false; m as usize];
    for x in all_vectors(n, m) {
        if x.iter().any(|v| v % p != 0) {
            hit[bilinear(&x, &apply(&a, &x, m), m) as usize] = true;
        }
    }
    Ok(hit)
}

/// True when `u` is a unit-determinant matrix carrying `q1` to `q2`.
pub fn verify_transform(q1: &ModMatrix, q2: &ModMatrix, u: &ModMatrix) -> bool {
    u.is_invertible() && q1.congruence(u).is_ok_and(|m| &m == q2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pk(p: u32, k: u32) -> PrimePower {
        PrimePower::new(p, k).unwrap()
    }

    fn mat(pk: &PrimePower, rows: &[Vec<i64>]) -> ModMatrix {
        ModMatrix::from_rows(pk, rows).unwrap()
    }

    #[test]
    fn gl_enumeration_counts() {
        let units: Vec<BigInt> = enumerate_gl(1, &pk(2, 2))
            .unwrap()
            .map(|u| u.get(0, 0).clone())
            .collect();
        assert_eq!(units, vec![BigInt::from(1), BigInt::from(3)]);
        for (n, p, k, expected) in [(2, 3, 1, 48u64), (2, 2, 3, 1536), (2, 3, 2, 3888), (1, 5, 2, 20)] {
            let universe = SmallUniverse::new(n, &pk(p, k)).unwrap();
            assert_eq!(universe.gl().count() as u64, expected);
            assert_eq!(universe.gl_order(), BigInt::from(expected));
        }
        assert_eq!(
            SmallUniverse::new(3, &pk(2, 3)).unwrap().gl_order(),
            BigInt::from(44_040_192u64)
        );
        assert!(matches!(
            SmallUniverse::new(3, &pk(3, 2)),
            Err(Error::UniverseTooLarge(_))
        ));
        assert!(matches!(
            SmallUniverse::new(2, &pk(7, 2)),
            Err(Error::UniverseTooLarge(_))
        ));
    }

    #[test]
    fn equivalence_examples() {
        let m8 = pk(2, 3);
        let q = mat(&m8, &[vec![3, 0], vec![0, 5]]);
        assert_eq!(brute_equivalent(&q, &q).unwrap(), Some(ModMatrix::identity(2, &m8)));
        let target = mat(&m8, &[vec![1, 0], vec![0, 7]]);
        let u = brute_equivalent(&q, &target).unwrap().unwrap();
        assert!(verify_transform(&q, &target, &u));
        let one = mat(&m8, &[vec![1, 0], vec![0, 1]]);
        let other = mat(&m8, &[vec![1, 0], vec![0, 3]]);
        assert_eq!(brute_equivalent(&one, &other).unwrap(), None);
    }

    #[test]
    fn equivalence_is_symmetric_on_samples() {
        let m9 = pk(3, 2);
        let forms: Vec<ModMatrix> = SmallUniverse::new(2, &m9)
            .unwrap()
            .forms()
            .step_by(37)
            .take(25)
            .collect();
        for a in &forms {
            for b in &forms {
                let ab = brute_equivalent(a, b).unwrap().is_some();
                let ba = brute_equivalent(b, a).unwrap().is_some();
                assert_eq!(ab, ba);
            }
        }
    }

    #[test]
    fn representation_examples() {
        let m9 = pk(3, 2);
        let m8 = pk(2, 3);
        let b = |v: i64| BigInt::from(v);
        assert_eq!(
            brute_represent(&mat(&m9, &[vec![1, 0], vec![0, 1]]), &b(2)).unwrap(),
            Some(vec![b(1), b(1)])
        );
        assert_eq!(
            brute_represent(&mat(&m8, &[vec![2, 1], vec![1, 2]]), &b(2)).unwrap(),
            Some(vec![b(1), b(0)])
        );
        assert_eq!(
            brute_represent(&mat(&m8, &[vec![1, 0], vec![0, 4]]), &b(3)).unwrap(),
            None
        );
    }

    #[test]
    fn value_table_agrees_with_scan() {
        let m8 = pk(2, 3);
        for q in SmallUniverse::new(2, &m8).unwrap().forms().step_by(11) {
            let table = brute_represented_values(&q).unwrap();
            for t in 0..8i64 {
                assert_eq!(
                    table[t as usize],
                    brute_represent(&q, &BigInt::from(t)).unwrap().is_some()
                );
            }
        }
    }

    #[test]
    fn forms_cover_the_universe() {
        let universe = SmallUniverse::new(2, &pk(2, 3)).unwrap();
        let forms: Vec<ModMatrix> = universe.forms().collect();
        assert_eq!(forms.len(), 512);
        assert!(forms.iter().all(ModMatrix::is_symmetric));
    }
}
