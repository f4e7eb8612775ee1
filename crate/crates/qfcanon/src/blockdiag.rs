//! Block diagonalization of symmetric matrices over `Z/p^k`.
//!
//! For odd `p` the result is diagonal; for `p = 2` it is a direct sum of
//! scaled `1 x 1` unit blocks and `2 x 2` blocks `[[2a, b], [b, 2c]]` with `b` odd.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::form::IntQuadForm;
use crate::matmod::{permutation_matrix, ModMatrix, Witness};
use crate::modint::{padic_split, Order, PrimePower};

/// A unit-scale block.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Block {
    /// The `1 x 1` block `(u)` with `u` a unit.
    TypeI(BigInt),
    /// The `2 x 2` block `[[2a, b], [b, 2c]]` with `b` odd.
    TypeII { a: BigInt, b: BigInt, c: BigInt },
}

impl Block {
    /// `T+ = [[2, 1], [1, 4]]`.
    pub fn t_plus() -> Self {
        Block::TypeII {
            a: BigInt::one(),
            b: BigInt::one(),
            c: BigInt::from(2),
        }
    }

    /// `T- = [[2, 1], [1, 2]]`.
    pub fn t_minus() -> Self {
        Block::TypeII {
            a: BigInt::one(),
            b: BigInt::one(),
            c: BigInt::one(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Block::TypeI(_) => 1,
            Block::TypeII { .. } => 2,
        }
    }

    pub fn is_type_one(&self) -> bool {
        matches!(self, Block::TypeI(_))
    }

    /// The determinant of the unit-scale block: `u` or `4ac - b^2`.
    pub fn det(&self) -> BigInt {
        match self {
            Block::TypeI(u) => u.clone(),
            Block::TypeII { a, b, c } => BigInt::from(4) * a * c - b * b,
        }
    }

    /// The unit-scale entries in row-major order.
    pub fn entries(&self) -> Vec<BigInt> {
        match self {
            Block::TypeI(u) => vec![u.clone()],
            Block::TypeII { a, b, c } => vec![a * 2, b.clone(), b.clone(), c * 2],
        }
    }

    /// Reduces the stored values to the precision visible at `scale` in `p^k`.
    fn normalized(&self, scale: u32, pk: &PrimePower) -> Self {
        let visible = |e: u32| -> BigInt {
            let digits = pk.k().saturating_sub(scale + e);
            pk.pow_p(digits)
        };
        match self {
            Block::TypeI(u) => Block::TypeI(u.mod_floor(&visible(0))),
            Block::TypeII { a, b, c } => Block::TypeII {
                a: a.mod_floor(&visible(1)),
                b: b.mod_floor(&visible(0)),
                c: c.mod_floor(&visible(1)),
            },
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::TypeI(u) => write!(f, "{u}"),
            Block::TypeII { a, b, c } => write!(f, "[[{}, {}], [{}, {}]]", a * 2, b, b, c * 2),
        }
    }
}

/// A block multiplied by `p^scale`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScaledBlock {
    pub scale: u32,
    pub block: Block,
}

impl ScaledBlock {
    pub fn new(scale: u32, block: Block) -> Self {
        ScaledBlock { scale, block }
    }
}

/// An ordered direct sum of scaled blocks, followed by `zero_dim` zero rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockDiagForm {
    pk: PrimePower,
    blocks: Vec<ScaledBlock>,
    zero_dim: usize,
}

impl BlockDiagForm {
    /// Builds a form, reducing each block to the precision visible at its scale.
    pub fn new(pk: PrimePower, blocks: Vec<ScaledBlock>, zero_dim: usize) -> Self {
        let blocks = blocks
            .into_iter()
            .map(|b| ScaledBlock::new(b.scale, b.block.normalized(b.scale, &pk)))
            .collect();
        BlockDiagForm { pk, blocks, zero_dim }
    }

    pub fn modulus(&self) -> &PrimePower {
        &self.pk
    }

    pub fn blocks(&self) -> &[ScaledBlock] {
        &self.blocks
    }

    pub fn zero_dim(&self) -> usize {
        self.zero_dim
    }

    /// Total dimension.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.block.dim()).sum::<usize>() + self.zero_dim
    }

    /// True when every diagonal block is `1 x 1`.
    pub fn is_diagonal(&self) -> bool {
        self.blocks.iter().all(|b| b.block.is_type_one())
    }

    /// Coordinate offset of each block.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.blocks
            .iter()
            .map(|b| {
                let o = acc;
                acc += b.block.dim();
                o
            })
            .collect()
    }
}

impl fmt::Display for BlockDiagForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| {
                if b.scale == 0 {
                    b.block.to_string()
                } else {
                    format!("{}^{}*{}", self.pk.p(), b.scale, b.block)
                }
            })
            .collect();
        parts.extend(std::iter::repeat_n("0".to_string(), self.zero_dim));
        write!(f, "{}", parts.join(" + "))
    }
}

/// The explicit matrix `⊕ p^scale * block`, zero rows last.
pub fn assemble(d: &BlockDiagForm) -> ModMatrix {
    let n = d.dim();
    let mut m = ModMatrix::zeros(n, n, &d.pk);
    for (b, off) in d.blocks.iter().zip(d.offsets()) {
        let scale = d.pk.pow_p(b.scale);
        let size = b.block.dim();
        for (idx, v) in b.block.entries().into_iter().enumerate() {
            m.set(off + idx / size, off + idx % size, &scale * v);
        }
    }
    m
}

/// In-place elimination state: the working matrix and the accumulated transform.
struct Eliminator {
    pk: PrimePower,
    n: usize,
    a: Vec<BigInt>,
    u: Vec<BigInt>,
}

impl Eliminator {
    fn at(&self, i: usize, j: usize) -> &BigInt {
        &self.a[i * self.n + j]
    }

    fn order(&self, i: usize, j: usize) -> Order {
        padic_split(self.at(i, j), self.pk.p()).0
    }

    /// Basis change `b_dst += c * b_src`.
    fn add_multiple(&mut self, src: usize, dst: usize, c: &BigInt) {
        if c.is_zero() {
            return;
        }
        let n = self.n;
        let m = self.pk.modulus().clone();
        for r in 0..n {
            let v = &self.a[r * n + dst] + c * &self.a[r * n + src];
            self.a[r * n + dst] = v.mod_floor(&m);
        }
        for col in 0..n {
            let v = &self.a[dst * n + col] + c * &self.a[src * n + col];
            self.a[dst * n + col] = v.mod_floor(&m);
        }
        for r in 0..n {
            let v = &self.u[r * n + dst] + c * &self.u[r * n + src];
            self.u[r * n + dst] = v.mod_floor(&m);
        }
    }

    /// Basis change `(b_i, b_j) <- (b_j, -b_i)`, which has determinant 1.
    fn signed_swap(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        let n = self.n;
        let m = self.pk.modulus().clone();
        for r in 0..n {
            self.a.swap(r * n + i, r * n + j);
            self.u.swap(r * n + i, r * n + j);
        }
        for c in 0..n {
            self.a.swap(i * n + c, j * n + c);
        }
        for r in 0..n {
            if r != j {
                let v = -&self.a[r * n + j];
                self.a[r * n + j] = v.mod_floor(&m);
                self.a[j * n + r] = self.a[r * n + j].clone();
            }
            let v = -&self.u[r * n + j];
            self.u[r * n + j] = v.mod_floor(&m);
        }
    }

    /// Minimum order over the active submatrix, preferring the least diagonal
    /// index and then the least off-diagonal pair.
    fn find_pivot(&self, cur: usize) -> Option<(usize, usize, u32)> {
        let mut best: Option<(u32, usize, usize)> = None;
        for i in cur..self.n {
            for j in i..self.n {
                if let Order::Finite(o) = self.order(i, j) {
                    if best.is_none_or(|(bo, _, _)| o < bo) {
                        best = Some((o, i, j));
                    }
                }
            }
        }
        let (o, i, j) = best?;
        if let Some(d) = (cur..self.n).find(|&d| self.order(d, d) == Order::Finite(o)) {
            return Some((d, d, o));
        }
        Some((i, j, o))
    }
}

/// Block diagonalizes an integral form over `Z/p^k`, returning the blocks in
/// pivot order and a witness `U` of determinant 1.
pub fn block_diagonalize(q: &IntQuadForm, pk: &PrimePower) -> Result<(BlockDiagForm, Witness)> {
    block_diagonalize_mod(&q.to_mod(pk))
}

/// Block diagonalizes a symmetric matrix over `Z/p^k`.
pub fn block_diagonalize_mod(q: &ModMatrix) -> Result<(BlockDiagForm, Witness)> {
    if !q.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let pk = q.modulus().clone();
    let n = q.rows();
    let mut st = Eliminator {
        pk: pk.clone(),
        n,
        a: q.data().to_vec(),
        u: ModMatrix::identity(n, &pk).data().to_vec(),
    };
    let two = pk.is_two();
    let mut blocks = Vec::new();
    let mut cur = 0usize;
    let mut zero_dim = 0usize;
    while cur < n {
        let Some((i, j, o)) = st.find_pivot(cur) else {
            zero_dim = n - cur;
            break;
        };
        let local = pk.with_k(pk.k() - o)?;
        let po = pk.pow_p(o);
        if i == j {
            st.signed_swap(i, cur);
            let unit = st.at(cur, cur) / &po;
            let unit_inv = local.inv(&unit)?;
            for m in (cur + 1)..n {
                let w = st.at(cur, m) / &po;
                let c = local.reduce(&(-w * &unit_inv));
                st.add_multiple(cur, m, &c);
            }
            blocks.push(ScaledBlock::new(o, Block::TypeI(unit)));
            cur += 1;
        } else if !two {
            st.add_multiple(j, i, &BigInt::one());
        } else {
            st.signed_swap(i, cur);
            st.signed_swap(j, cur + 1);
            let alpha = st.at(cur, cur) / &po;
            let beta = st.at(cur, cur + 1) / &po;
            let gamma = st.at(cur + 1, cur + 1) / &po;
            let det = &alpha * &gamma - &beta * &beta;
            let det_inv = local.inv(&det)?;
            for m in (cur + 2)..n {
                let d = st.at(cur, m) / &po;
                let e = st.at(cur + 1, m) / &po;
                let r = local.reduce(&(-(&gamma * &d - &beta * &e) * &det_inv));
                let s = local.reduce(&(-(&alpha * &e - &beta * &d) * &det_inv));
                st.add_multiple(cur, m, &r);
                st.add_multiple(cur + 1, m, &s);
            }
            blocks.push(ScaledBlock::new(
                o,
                Block::TypeII {
                    a: alpha / 2,
                    b: beta,
                    c: gamma / 2,
                },
            ));
            cur += 2;
        }
    }
    let form = BlockDiagForm::new(pk.clone(), blocks, zero_dim);
    let u = ModMatrix::new(n, n, pk.clone(), st.u)?;
    let witness = Witness::new(q.clone(), assemble(&form), u)
        .map_err(|e| Error::internal(format!("block diagonalization: {e}")))?;
    Ok((form, witness))
}

/// Stable sort by ascending scale, Type I blocks before Type II blocks at equal scale.
pub fn sort_blocks(d: &BlockDiagForm) -> Result<(BlockDiagForm, Witness)> {
    sort_blocks_by(d, |b| (b.scale, !b.block.is_type_one()))
}

/// Stable sort of the blocks by a key, with the permutation witness.
pub fn sort_blocks_by<K: Ord>(d: &BlockDiagForm, key: impl Fn(&ScaledBlock) -> K) -> Result<(BlockDiagForm, Witness)> {
    let offsets = d.offsets();
    let mut order: Vec<usize> = (0..d.blocks.len()).collect();
    order.sort_by_key(|&i| key(&d.blocks[i]));
    let mut perm = Vec::with_capacity(d.dim());
    let mut blocks = Vec::with_capacity(d.blocks.len());
    for &i in &order {
        for t in 0..d.blocks[i].block.dim() {
            perm.push(offsets[i] + t);
        }
        blocks.push(d.blocks[i].clone());
    }
    let nonzero = perm.len();
    perm.extend(nonzero..d.dim());
    let sorted = BlockDiagForm::new(d.pk.clone(), blocks, d.zero_dim);
    let u = permutation_matrix(&perm, &d.pk);
    let w = Witness::new(assemble(d), assemble(&sorted), u).map_err(|e| Error::internal(format!("block sort: {e}")))?;
    Ok((sorted, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn b(v: i64) -> BigInt {
        BigInt::from(v)
    }

    fn pk(p: u32, k: u32) -> PrimePower {
        PrimePower::new(p, k).unwrap()
    }

    #[test]
    fn hyperbolic_plane_at_two_is_type_two() {
        let q = IntQuadForm::from_rows(&[vec![0i64, 1], vec![1, 0]]).unwrap();
        let (d, w) = block_diagonalize(&q, &pk(2, 3)).unwrap();
        assert_eq!(
            d.blocks(),
            &[ScaledBlock::new(
                0,
                Block::TypeII {
                    a: b(0),
                    b: b(1),
                    c: b(0)
                }
            )]
        );
        assert_eq!(w.u(), &ModMatrix::identity(2, &pk(2, 3)));
    }

    #[test]
    fn hyperbolic_plane_at_three_is_diagonal() {
        let q = IntQuadForm::from_rows(&[vec![0i64, 1], vec![1, 0]]).unwrap();
        let m9 = pk(3, 2);
        let (d, w) = block_diagonalize(&q, &m9).unwrap();
        assert_eq!(assemble(&d), ModMatrix::diagonal(&[b(2), b(4)], &m9));
        assert_eq!(w.target().det_mod(), Ok(b(8)));
        assert_eq!(w.u().det_mod(), Ok(b(1)));
    }

    #[test]
    fn diagonal_input_is_unchanged() {
        let q = IntQuadForm::diagonal(&[3i64, 7, 10]);
        let m = pk(5, 3);
        let (d, w) = block_diagonalize(&q, &m).unwrap();
        assert_eq!(assemble(&d), q.to_mod(&m));
        assert_eq!(w.u(), &ModMatrix::identity(3, &m));
    }

    #[test]
    fn zero_residual_is_recorded() {
        let q = IntQuadForm::diagonal(&[1i64, 8, 0]);
        let (d, _) = block_diagonalize(&q, &pk(2, 3)).unwrap();
        assert_eq!(d.zero_dim(), 2);
        assert_eq!(d.blocks().len(), 1);
    }

    #[test]
    fn sort_examples() {
        let m = pk(3, 4);
        let d = BlockDiagForm::new(
            m.clone(),
            vec![
                ScaledBlock::new(2, Block::TypeI(b(1))),
                ScaledBlock::new(0, Block::TypeI(b(2))),
            ],
            0,
        );
        let (s, w) = sort_blocks(&d).unwrap();
        assert_eq!(s.blocks()[0].scale, 0);
        assert_eq!(w.target(), &ModMatrix::diagonal(&[b(2), b(9)], &m));
        let (s2, w2) = sort_blocks(&s).unwrap();
        assert_eq!(s2, s);
        assert_eq!(w2.u(), &ModMatrix::identity(2, &m));

        let m8 = pk(2, 3);
        let d = BlockDiagForm::new(
            m8.clone(),
            vec![
                ScaledBlock::new(1, Block::TypeI(b(1))),
                ScaledBlock::new(0, Block::t_minus()),
            ],
            0,
        );
        let (s, w) = sort_blocks(&d).unwrap();
        assert_eq!(s.blocks()[0].block, Block::t_minus());
        assert_eq!(
            w.target(),
            &ModMatrix::from_rows(&m8, &[vec![2, 1, 0], vec![1, 2, 0], vec![0, 0, 2]]).unwrap()
        );
    }

    #[test]
    fn assemble_examples() {
        let m8 = pk(2, 3);
        let d = BlockDiagForm::new(m8.clone(), vec![ScaledBlock::new(1, Block::TypeI(b(3)))], 0);
        assert_eq!(assemble(&d), ModMatrix::diagonal(&[b(6)], &m8));
        let d = BlockDiagForm::new(
            m8.clone(),
            vec![ScaledBlock::new(
                2,
                Block::TypeII {
                    a: b(0),
                    b: b(1),
                    c: b(0),
                },
            )],
            0,
        );
        assert_eq!(
            assemble(&d),
            ModMatrix::from_rows(&m8, &[vec![0, 4], vec![4, 0]]).unwrap()
        );
        let d = BlockDiagForm::new(m8.clone(), vec![], 0);
        assert_eq!(assemble(&d).rows(), 0);
    }

    fn valid_shape(d: &BlockDiagForm) -> bool {
        let pk = d.modulus();
        d.blocks().iter().all(|blk| {
            blk.scale < pk.k()
                && match &blk.block {
                    Block::TypeI(u) => pk.is_unit(u),
                    Block::TypeII { b, .. } => pk.is_two() && b.is_odd(),
                }
        })
    }

    #[test]
    fn random_forms_reach_valid_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 1000 {
            let n = rng.gen_range(1..=6);
            let p = [2u32, 3, 5, 7][checked % 4];
            let mut rows = vec![vec![0i64; n]; n];
            for i in 0..n {
                for j in i..n {
                    let v = rng.gen_range(-50..=50);
                    rows[i][j] = v;
                    rows[j][i] = v;
                }
            }
            let q = IntQuadForm::from_rows(&rows).unwrap();
            let Ok(k) = q.default_precision(&b(p as i64)) else {
                continue;
            };
            let m = pk(p, k);
            let (d, w) = block_diagonalize(&q, &m).unwrap();
            assert_eq!(w.u().det_mod(), Ok(b(1)));
            assert!(valid_shape(&d));
            assert_eq!(d.zero_dim(), 0);
            if p != 2 {
                assert!(d.is_diagonal());
            }
            assert_eq!(w.target().det_mod().unwrap(), m.reduce(&q.det()));
            checked += 1;
        }
    }
}
