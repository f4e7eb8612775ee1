//! The 2-adic canonical form read off the canonical 2-symbol.
//!
//! In each train the minus signs are placed by the first realizable pattern in
//! the order (number of minus signs, lexicographic positions), starting from the
//! canonical placement at the front. Compartment oddities follow the pattern
//! by sign walking. Each compartment then takes the lexicographically least
//! tuple of units in `{1, 3, 5, 7}` with the required signs and oddity, and a
//! Type II scale becomes `T- ⊕ T+ ⊕ ...` or `T+ ⊕ ...` according to its sign.

use crate::blockdiag::{Block, ScaledBlock};
use crate::error::{Error, Result};
use crate::modint::kronecker2_residue;
use num_bigint::BigInt;

use crate::symbols::{CanonicalEntry, CanonicalTwoSymbol};

const UNITS: [u8; 4] = [1, 3, 5, 7];

/// `reach[d][s][q]`: some `d` units have sum `s` and product `q` modulo 8.
struct Reach {
    table: Vec<[[bool; 8]; 8]>,
}

impl Reach {
    fn new(max_dim: usize) -> Self {
        let mut table = vec![[[false; 8]; 8]];
        table[0][0][1] = true;
        for d in 0..max_dim {
            let mut next = [[false; 8]; 8];
            for s in 0..8 {
                for q in 0..8 {
                    if table[d][s][q] {
                        for &u in &UNITS {
                            next[(s + u as usize) % 8][(q * u as usize) % 8] = true;
                        }
                    }
                }
            }
            table.push(next);
        }
        Reach { table }
    }

    /// Bitmask of sums of `d` further units whose product times `prefix` has the given sign.
    fn sums(&self, d: usize, prefix: u8, sign: i8) -> u8 {
        let mut mask = 0u8;
        for s in 0..8 {
            for q in 0..8 {
                if self.table[d][s][q] && kronecker2_residue(((q * prefix as usize) % 8) as u8) == sign {
                    mask |= 1 << s;
                }
            }
        }
        mask
    }
}

fn add_masks(a: u8, b: u8) -> u8 {
    let mut out = 0u8;
    for i in 0..8 {
        for j in 0..8 {
            if a & (1 << i) != 0 && b & (1 << j) != 0 {
                out |= 1 << ((i + j) % 8);
            }
        }
    }
    out
}

/// One scale of a compartment: `(scale, dim, sign)`.
type ScaleSlot = (u32, usize, i8);

fn feasible(reach: &Reach, scales: &[ScaleSlot], oddity: u8) -> bool {
    let mask = scales
        .iter()
        .fold(1u8, |acc, &(_, dim, sign)| add_masks(acc, reach.sums(dim, 1, sign)));
    mask & (1 << oddity) != 0
}

/// The lexicographically least unit tuple with the given per-scale signs and total oddity.
fn lexmin_units(reach: &Reach, scales: &[ScaleSlot], oddity: u8) -> Option<Vec<(u32, u8)>> {
    let mut out = Vec::new();
    let mut total = 0u8;
    for (j, &(scale, dim, sign)) in scales.iter().enumerate() {
        let mut prefix = 1u8;
        for pos in 0..dim {
            let remaining = dim - pos - 1;
            let chosen = UNITS.iter().copied().find(|&u| {
                let here = reach.sums(remaining, ((prefix as usize * u as usize) % 8) as u8, sign);
                let later = scales[j + 1..]
                    .iter()
                    .fold(1u8, |acc, &(_, d, s)| add_masks(acc, reach.sums(d, 1, s)));
                let need = (oddity + 16 - total - u) % 8;
                add_masks(here, later) & (1 << need) != 0
            })?;
            prefix = ((prefix as usize * chosen as usize) % 8) as u8;
            total = (total + chosen) % 8;
            out.push((scale, chosen));
        }
    }
    (total == oddity).then_some(out)
}

/// Index combinations of `size` elements out of `n`, in lexicographic order.
fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < size - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}

fn walk_steps(front: u32, scale: u32, (a, b): (u32, u32)) -> u32 {
    (front..scale)
        .filter(|&r| (a <= r && r <= b) || (a <= r + 1 && r < b))
        .count() as u32
}

/// The canonical block sequence of a canonical 2-symbol, in ascending scale.
pub fn canonical_target(sym: &CanonicalTwoSymbol) -> Result<Vec<ScaledBlock>> {
    let entries: &[CanonicalEntry] = sym.entries();
    let structure = sym.to_two_symbol().partition();
    let reach = Reach::new(sym.dim());
    let mut signs: Vec<i8> = vec![1; entries.len()];
    let mut oddities: Vec<u8> = Vec::new();
    let mut units: Vec<(u32, u8)> = Vec::new();
    for &(front, end) in &structure.trains {
        let members: Vec<usize> = (0..entries.len())
            .filter(|&i| front <= entries[i].scale && entries[i].scale <= end)
            .collect();
        let negative = members.iter().any(|&i| entries[i].sign < 0);
        let comps: Vec<(u32, u32, u8)> = sym
            .compartments()
            .iter()
            .copied()
            .filter(|&(a, _, _)| front <= a && a <= end)
            .collect();
        let mut chosen = None;
        'sizes: for size in (usize::from(negative)..=members.len()).step_by(2) {
            for minus in combinations(members.len(), size) {
                let sign_of = |i: usize| {
                    if minus.contains(&members.iter().position(|&m| m == i).unwrap_or(usize::MAX)) {
                        -1
                    } else {
                        1
                    }
                };
                let mut plan = Vec::new();
                let mut ok = true;
                for &(a, b, omega) in &comps {
                    let shift: u32 = minus
                        .iter()
                        .map(|&m| walk_steps(front, entries[members[m]].scale, (a, b)))
                        .sum();
                    let oddity = ((omega as u32 + 4 * shift) % 8) as u8;
                    let scales: Vec<ScaleSlot> = members
                        .iter()
                        .filter(|&&i| a <= entries[i].scale && entries[i].scale <= b)
                        .map(|&i| (entries[i].scale, entries[i].dim, sign_of(i)))
                        .collect();
                    if !feasible(&reach, &scales, oddity) {
                        ok = false;
                        break;
                    }
                    plan.push((scales, oddity));
                }
                if ok {
                    for &i in &members {
                        signs[i] = sign_of(i);
                    }
                    chosen = Some(plan);
                    break 'sizes;
                }
            }
        }
        let plan =
            chosen.ok_or_else(|| Error::internal(format!("no realizable sign pattern for train {front}..{end}")))?;
        for (scales, oddity) in plan {
            oddities.push(oddity);
            units.extend(
                lexmin_units(&reach, &scales, oddity)
                    .ok_or_else(|| Error::internal("no unit tuple for a compartment"))?,
            );
        }
    }
    let mut blocks = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        if e.type_one {
            blocks.extend(
                units
                    .iter()
                    .filter(|(s, _)| *s == e.scale)
                    .map(|&(s, u)| ScaledBlock::new(s, Block::TypeI(BigInt::from(u)))),
            );
        } else {
            for j in 0..e.dim / 2 {
                let block = if j == 0 && signs[i] < 0 {
                    Block::t_minus()
                } else {
                    Block::t_plus()
                };
                blocks.push(ScaledBlock::new(e.scale, block));
            }
        }
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::IntQuadForm;
    use crate::symbols::canonical_two_symbol;

    fn target_units(diag: &[i64]) -> Vec<(u32, i64)> {
        let sym = canonical_two_symbol(&IntQuadForm::diagonal(diag)).unwrap();
        canonical_target(&sym)
            .unwrap()
            .into_iter()
            .map(|b| match b.block {
                Block::TypeI(u) => (b.scale, i64::try_from(u).unwrap()),
                Block::TypeII { c, .. } => (b.scale, -i64::try_from(c).unwrap()),
            })
            .collect()
    }

    #[test]
    fn three_dimensional_table() {
        let rows: [([i64; 3], [i64; 3]); 8] = [
            ([1, 1, 7], [1, 1, 7]),
            ([1, 1, 1], [1, 1, 1]),
            ([3, 3, 7], [3, 3, 7]),
            ([1, 3, 3], [1, 3, 3]),
            ([3, 3, 3], [3, 3, 3]),
            ([1, 3, 7], [1, 3, 7]),
            ([1, 1, 3], [1, 1, 3]),
            ([1, 1, 5], [1, 1, 5]),
        ];
        for (input, expected) in rows {
            let got: Vec<i64> = target_units(&input).into_iter().map(|(_, u)| u).collect();
            assert_eq!(got, expected.to_vec());
        }
        let got: Vec<i64> = target_units(&[7, 7, 7]).into_iter().map(|(_, u)| u).collect();
        assert_eq!(got, vec![3, 3, 7]);
    }

    #[test]
    fn small_examples() {
        assert_eq!(target_units(&[3, 5]), vec![(0, 1), (0, 7)]);
        assert_eq!(target_units(&[1, 4]), vec![(0, 1), (2, 1)]);
        assert_eq!(target_units(&[5, 20]), vec![(0, 1), (2, 1)]);
        assert_eq!(target_units(&[1, 6]), vec![(0, 1), (1, 3)]);
        assert_eq!(target_units(&[1, 10]), vec![(0, 3), (1, 7)]);
    }

    #[test]
    fn type_two_scales() {
        let sym = canonical_two_symbol(&IntQuadForm::from_rows(&[vec![2i64, 1], vec![1, 2]]).unwrap()).unwrap();
        assert_eq!(
            canonical_target(&sym).unwrap(),
            vec![ScaledBlock::new(0, Block::t_minus())]
        );
        let q = IntQuadForm::from_rows(&[
            vec![2i64, 1, 0, 0],
            vec![1, 2, 0, 0],
            vec![0, 0, 2, 1],
            vec![0, 0, 1, 2],
        ])
        .unwrap();
        let sym = canonical_two_symbol(&q).unwrap();
        assert_eq!(
            canonical_target(&sym).unwrap(),
            vec![
                ScaledBlock::new(0, Block::t_plus()),
                ScaledBlock::new(0, Block::t_plus())
            ]
        );
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(combinations(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(combinations(2, 0), vec![Vec::<usize>::new()]);
    }
}
