//! Conway-Sloane p-symbols and 2-symbols, trains and compartments, oddity
//! fusion, sign walking, the canonical 2-symbol and `p^*`-equivalence.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use thiserror::Error;

use crate::blockdiag::{block_diagonalize, Block, BlockDiagForm};
use crate::error::{Error, Result};
use crate::form::IntQuadForm;
use crate::modint::{kronecker2, legendre, ArithError, Order, PrimePower};

/// Errors raised by symbol manipulation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolError {
    #[error("cannot parse symbol: {0}")]
    Parse(String),
    #[error("scales {0} and {1} do not lie in one train")]
    NotSameTrain(u32, u32),
    #[error("the symbol has no form of positive dimension at scale {0}")]
    MissingScale(u32),
}

/// One constituent `(scale, sign, dim)` of an odd p-symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PSymbolEntry {
    pub scale: u32,
    pub sign: i8,
    pub dim: usize,
}

/// The p-symbol of a form for an odd prime.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PSymbolOdd {
    p: BigInt,
    entries: Vec<PSymbolEntry>,
}

impl PSymbolOdd {
    pub fn p(&self) -> &BigInt {
        &self.p
    }

    pub fn entries(&self) -> &[PSymbolEntry] {
        &self.entries
    }

    /// Total dimension.
    pub fn dim(&self) -> usize {
        self.entries.iter().map(|e| e.dim).sum()
    }
}

fn sign_char(sign: i8) -> char {
    if sign < 0 {
        '-'
    } else {
        '+'
    }
}

impl fmt::Display for PSymbolOdd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .entries
            .iter()
            .map(|e| {
                let scale = num_traits::pow(self.p.clone(), e.scale as usize);
                format!("{scale}^{}{}", sign_char(e.sign), e.dim)
            })
            .collect();
        write!(f, "{}", terms.join(" "))
    }
}

/// One constituent `(scale, sign, dim, type, oddity)` of a 2-symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TwoSymbolEntry {
    pub scale: u32,
    pub sign: i8,
    pub dim: usize,
    pub type_one: bool,
    pub oddity: u8,
}

/// A 2-symbol: constituents of positive dimension in increasing scale.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TwoSymbol {
    entries: Vec<TwoSymbolEntry>,
}

/// Inclusive interval of scales.
pub type ScaleRange = (u32, u32);

/// Trains and compartments of a 2-symbol, as inclusive scale intervals.
///
/// Trains are trimmed to their first and last constituent of positive dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrainStructure {
    pub trains: Vec<ScaleRange>,
    pub compartments: Vec<ScaleRange>,
}

impl TrainStructure {
    /// The train containing a scale.
    pub fn train_of(&self, scale: u32) -> Option<ScaleRange> {
        self.trains.iter().copied().find(|&(a, b)| a <= scale && scale <= b)
    }

    /// Index of the compartment containing a scale.
    pub fn compartment_of(&self, scale: u32) -> Option<usize> {
        self.compartments.iter().position(|&(a, b)| a <= scale && scale <= b)
    }
}

impl TwoSymbol {
    /// Builds a symbol from entries, dropping zero-dimensional ones and sorting by scale.
    pub fn new(mut entries: Vec<TwoSymbolEntry>) -> Self {
        entries.retain(|e| e.dim > 0);
        entries.sort_by_key(|e| e.scale);
        TwoSymbol { entries }
    }

    pub fn entries(&self) -> &[TwoSymbolEntry] {
        &self.entries
    }

    pub fn entry(&self, scale: u32) -> Option<&TwoSymbolEntry> {
        self.entries.iter().find(|e| e.scale == scale)
    }

    /// Total dimension.
    pub fn dim(&self) -> usize {
        self.entries.iter().map(|e| e.dim).sum()
    }

    fn is_type_one_at(&self, scale: u32) -> bool {
        self.entry(scale).is_some_and(|e| e.type_one)
    }

    /// Trains and compartments over the scale range, gaps counted as Type II with sign `+`.
    pub fn partition(&self) -> TrainStructure {
        let (Some(first), Some(last)) = (self.entries.first(), self.entries.last()) else {
            return TrainStructure {
                trains: vec![],
                compartments: vec![],
            };
        };
        let (lo, hi) = (first.scale, last.scale);
        let mut compartments = Vec::new();
        let mut s = lo;
        while s <= hi {
            if self.is_type_one_at(s) {
                let start = s;
                while s < hi && self.is_type_one_at(s + 1) {
                    s += 1;
                }
                compartments.push((start, s));
            }
            s += 1;
        }
        let mut trains = Vec::new();
        let mut start = lo;
        for r in lo..=hi {
            let linked = r < hi && (self.is_type_one_at(r) || self.is_type_one_at(r + 1));
            if !linked {
                let present: Vec<u32> = (start..=r).filter(|&x| self.entry(x).is_some()).collect();
                if let (Some(&a), Some(&b)) = (present.first(), present.last()) {
                    trains.push((a, b));
                }
                start = r + 1;
            }
        }
        TrainStructure { trains, compartments }
    }

    /// Total oddity of each compartment modulo 8.
    pub fn oddity_fuse(&self, trains: &TrainStructure) -> Vec<u8> {
        trains
            .compartments
            .iter()
            .map(|&(a, b)| {
                let total: u32 = self
                    .entries
                    .iter()
                    .filter(|e| a <= e.scale && e.scale <= b)
                    .map(|e| e.oddity as u32)
                    .sum();
                (total % 8) as u8
            })
            .collect()
    }

    /// Flips the signs at scales `i` and `j`, shifting by 4 the total oddity of each
    /// compartment once per walk step `r -> r+1` touching it. The shift is
    /// recorded on the first constituent of the compartment.
    pub fn sign_walk(&self, i: u32, j: u32) -> std::result::Result<TwoSymbol, SymbolError> {
        for s in [i, j] {
            if self.entry(s).is_none() {
                return Err(SymbolError::MissingScale(s));
            }
        }
        if i == j {
            return Ok(self.clone());
        }
        let (lo, hi) = (i.min(j), i.max(j));
        let structure = self.partition();
        if structure.train_of(lo) != structure.train_of(hi) {
            return Err(SymbolError::NotSameTrain(i, j));
        }
        let mut shifts = vec![0u32; structure.compartments.len()];
        for r in lo..hi {
            for (c, &(a, b)) in structure.compartments.iter().enumerate() {
                let touches = |s: u32| a <= s && s <= b;
                if touches(r) || touches(r + 1) {
                    shifts[c] += 1;
                }
            }
        }
        let mut entries = self.entries.clone();
        for e in entries.iter_mut() {
            if e.scale == i || e.scale == j {
                e.sign = -e.sign;
            }
            if let Some(c) = structure.compartment_of(e.scale) {
                if structure.compartments[c].0 == e.scale {
                    e.oddity = ((e.oddity as u32 + 4 * shifts[c]) % 8) as u8;
                }
            }
        }
        Ok(TwoSymbol { entries })
    }

    /// The canonical 2-symbol: in each train the product of the signs sits on the
    /// first constituent and every other sign is `+`, with compartment oddities
    /// adjusted as if each minus sign walked to the front.
    pub fn canonical(&self) -> CanonicalTwoSymbol {
        let structure = self.partition();
        let mut totals: Vec<u32> = self.oddity_fuse(&structure).into_iter().map(u32::from).collect();
        let mut entries: Vec<CanonicalEntry> = self
            .entries
            .iter()
            .map(|e| CanonicalEntry {
                scale: e.scale,
                sign: 1,
                dim: e.dim,
                type_one: e.type_one,
            })
            .collect();
        for &(front, end) in &structure.trains {
            let mut product = 1i8;
            for e in self.entries.iter().filter(|e| front <= e.scale && e.scale <= end) {
                product *= e.sign;
                if e.sign < 0 {
                    for (c, &(a, b)) in structure.compartments.iter().enumerate() {
                        let steps = (front..e.scale)
                            .filter(|&r| (a <= r && r <= b) || (a <= r + 1 && r < b))
                            .count();
                        totals[c] += 4 * steps as u32;
                    }
                }
            }
            if let Some(e) = entries.iter_mut().find(|e| e.scale == front) {
                e.sign = product;
            }
        }
        let compartments = structure
            .compartments
            .iter()
            .zip(totals)
            .map(|(&(a, b), t)| (a, b, (t % 8) as u8))
            .collect();
        CanonicalTwoSymbol { entries, compartments }
    }
}

impl fmt::Display for TwoSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let structure = self.partition();
        let totals = self.oddity_fuse(&structure);
        let mut parts: Vec<String> = Vec::new();
        let (Some(first), Some(last)) = (self.entries.first(), self.entries.last()) else {
            return Ok(());
        };
        let mut s = first.scale;
        while s <= last.scale {
            if let Some(c) = structure.compartment_of(s) {
                let (a, b) = structure.compartments[c];
                let inner: Vec<String> = (a..=b)
                    .filter_map(|x| self.entry(x))
                    .map(|e| format!("{}^{}{}", scale_value(e.scale), sign_char(e.sign), e.dim))
                    .collect();
                parts.push(format!("[{}]_{}", inner.join(" "), totals[c]));
                s = b + 1;
                continue;
            }
            match self.entry(s) {
                Some(e) => parts.push(format!("{}^{}{}_0", scale_value(e.scale), sign_char(e.sign), e.dim)),
                None => parts.push(format!("{}^+0", scale_value(s))),
            }
            s += 1;
        }
        write!(f, "{}", parts.join(" "))
    }
}

fn scale_value(scale: u32) -> BigInt {
    BigInt::one() << scale
}

/// Parses a scale written as a power of 2.
fn parse_scale(text: &str) -> std::result::Result<u32, SymbolError> {
    let v: BigInt = text
        .parse()
        .map_err(|_| SymbolError::Parse(format!("bad scale `{text}`")))?;
    if v < BigInt::one() || (&v & (&v - 1u32)) != BigInt::from(0) {
        return Err(SymbolError::Parse(format!("scale `{text}` is not a power of 2")));
    }
    Ok(v.bits() as u32 - 1)
}

/// Parses `S^±D` with an optional `_O` suffix.
fn parse_term(text: &str) -> std::result::Result<(u32, i8, usize, Option<u8>), SymbolError> {
    let bad = || SymbolError::Parse(format!("bad term `{text}`"));
    let (scale, rest) = text.split_once('^').ok_or_else(bad)?;
    let scale = parse_scale(scale)?;
    let mut chars = rest.chars();
    let sign = match chars.next() {
        Some('+') => 1,
        Some('-') => -1,
        _ => return Err(bad()),
    };
    let rest = chars.as_str();
    let (dim, odd) = match rest.split_once('_') {
        Some((d, o)) => (d, Some(o.parse::<u8>().map_err(|_| bad())? % 8)),
        None => (rest, None),
    };
    let dim = dim.parse::<usize>().map_err(|_| bad())?;
    Ok((scale, sign, dim, odd))
}

fn tokenize(text: &str) -> Vec<String> {
    text.replace('[', " [ ")
        .replace(']', " ] ")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

impl FromStr for TwoSymbol {
    type Err = SymbolError;

    /// Parses the raw grammar: unbracketed terms are Type II, bracketed terms are
    /// Type I and a compartment total is attributed to its first term.
    fn from_str(text: &str) -> std::result::Result<Self, Self::Err> {
        let tokens = tokenize(text);
        let mut entries = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            if tokens[i] == "[" {
                let start = entries.len();
                i += 1;
                while i < tokens.len() && tokens[i] != "]" {
                    let (scale, sign, dim, odd) = parse_term(&tokens[i])?;
                    entries.push(TwoSymbolEntry {
                        scale,
                        sign,
                        dim,
                        type_one: true,
                        oddity: odd.unwrap_or(0),
                    });
                    i += 1;
                }
                if i == tokens.len() {
                    return Err(SymbolError::Parse("unclosed compartment".into()));
                }
                i += 1;
                let total = match tokens.get(i).and_then(|t| t.strip_prefix('_')) {
                    Some(o) => {
                        i += 1;
                        o.parse::<u8>()
                            .map_err(|_| SymbolError::Parse(format!("bad oddity `{o}`")))?
                            % 8
                    }
                    None => return Err(SymbolError::Parse("compartment without total oddity".into())),
                };
                if let Some(first) = entries.get_mut(start) {
                    first.oddity = total;
                }
            } else if let Some(rest) = tokens[i].strip_prefix(']') {
                return Err(SymbolError::Parse(format!("unexpected `]{rest}`")));
            } else {
                let (scale, sign, dim, odd) = parse_term(&tokens[i])?;
                if odd.unwrap_or(0) != 0 || dim % 2 != 0 {
                    return Err(SymbolError::Parse(format!("`{}` is not a Type II term", tokens[i])));
                }
                entries.push(TwoSymbolEntry {
                    scale,
                    sign,
                    dim,
                    type_one: false,
                    oddity: 0,
                });
                i += 1;
            }
        }
        let mut scales: Vec<u32> = entries.iter().filter(|e| e.dim > 0).map(|e| e.scale).collect();
        scales.dedup();
        if scales.len() != entries.iter().filter(|e| e.dim > 0).count() {
            return Err(SymbolError::Parse("scales must be strictly increasing".into()));
        }
        Ok(TwoSymbol::new(entries))
    }
}

/// One constituent of a canonical 2-symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CanonicalEntry {
    pub scale: u32,
    pub sign: i8,
    pub dim: usize,
    pub type_one: bool,
}

/// The canonical 2-symbol: per-scale data and per-compartment total oddities.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalTwoSymbol {
    entries: Vec<CanonicalEntry>,
    compartments: Vec<(u32, u32, u8)>,
}

impl CanonicalTwoSymbol {
    pub fn entries(&self) -> &[CanonicalEntry] {
        &self.entries
    }

    /// Compartments as `(first scale, last scale, total oddity)`.
    pub fn compartments(&self) -> &[(u32, u32, u8)] {
        &self.compartments
    }

    /// Total dimension.
    pub fn dim(&self) -> usize {
        self.entries.iter().map(|e| e.dim).sum()
    }

    /// A 2-symbol with this data, compartment totals on the first constituent.
    pub fn to_two_symbol(&self) -> TwoSymbol {
        let entries = self
            .entries
            .iter()
            .map(|e| TwoSymbolEntry {
                scale: e.scale,
                sign: e.sign,
                dim: e.dim,
                type_one: e.type_one,
                oddity: self.compartments.iter().find(|c| c.0 == e.scale).map_or(0, |c| c.2),
            })
            .collect();
        TwoSymbol::new(entries)
    }

    /// A human-readable description of the first difference from `other`.
    pub fn first_difference(&self, other: &CanonicalTwoSymbol) -> Option<String> {
        for (a, b) in self.entries.iter().zip(&other.entries) {
            if a != b {
                return Some(format!(
                    "scale 2^{}: {}{} type {} vs scale 2^{}: {}{} type {}",
                    a.scale,
                    sign_char(a.sign),
                    a.dim,
                    if a.type_one { "I" } else { "II" },
                    b.scale,
                    sign_char(b.sign),
                    b.dim,
                    if b.type_one { "I" } else { "II" }
                ));
            }
        }
        if self.entries.len() != other.entries.len() {
            return Some(format!(
                "{} vs {} constituents",
                self.entries.len(),
                other.entries.len()
            ));
        }
        for (a, b) in self.compartments.iter().zip(&other.compartments) {
            if a != b {
                return Some(format!("compartment 2^{}..2^{} oddity {} vs {}", a.0, a.1, a.2, b.2));
            }
        }
        None
    }
}

impl fmt::Display for CanonicalTwoSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let mut idx = 0;
        while idx < self.entries.len() {
            let e = self.entries[idx];
            let term = |e: &CanonicalEntry| format!("{}^{}{}", scale_value(e.scale), sign_char(e.sign), e.dim);
            match self.compartments.iter().find(|c| c.0 == e.scale) {
                Some(&(_, last, total)) => {
                    let mut inner = Vec::new();
                    while idx < self.entries.len() && self.entries[idx].scale <= last {
                        inner.push(term(&self.entries[idx]));
                        idx += 1;
                    }
                    parts.push(format!("[{}]_{}", inner.join(" "), total));
                }
                None => {
                    parts.push(term(&e));
                    idx += 1;
                }
            }
        }
        write!(f, "{}", parts.join(" "))
    }
}

fn require_nondegenerate(q: &IntQuadForm, p: &BigInt) -> Result<u32> {
    match q.det_order(p) {
        Order::Finite(o) => Ok(o),
        Order::Infinite => Err(Error::Degenerate),
    }
}

/// The p-symbol for an odd prime, computed at precision `ord_p(det) + 1`.
pub fn p_symbol(q: &IntQuadForm, p: &BigInt) -> Result<PSymbolOdd> {
    if *p == BigInt::from(2) {
        return Err(ArithError::NotOddPrime(p.clone()).into());
    }
    let o = require_nondegenerate(q, p)?;
    let pk = PrimePower::new(p.clone(), o + 1)?;
    let (d, _) = block_diagonalize(q, &pk)?;
    p_symbol_from_blocks(&d)
}

/// The p-symbol read off a diagonal form over `Z/p^k` with odd `p`.
pub fn p_symbol_from_blocks(d: &BlockDiagForm) -> Result<PSymbolOdd> {
    let p = d.modulus().p().clone();
    if d.zero_dim() > 0 {
        return Err(Error::Degenerate);
    }
    let mut grouped: Vec<(u32, BigInt, usize)> = Vec::new();
    for b in d.blocks() {
        let Block::TypeI(u) = &b.block else {
            return Err(Error::internal("Type II block for an odd prime"));
        };
        match grouped.iter_mut().find(|g| g.0 == b.scale) {
            Some(g) => {
                g.1 = (&g.1 * u).mod_floor(&p);
                g.2 += 1;
            }
            None => grouped.push((b.scale, u.mod_floor(&p), 1)),
        }
    }
    grouped.sort_by_key(|g| g.0);
    let entries = grouped
        .into_iter()
        .map(|(scale, det, dim)| {
            Ok(PSymbolEntry {
                scale,
                sign: legendre(&det, &p)?,
                dim,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PSymbolOdd { p, entries })
}

/// The 2-symbol, computed at precision `ord_2(det) + 3`.
pub fn two_symbol(q: &IntQuadForm) -> Result<TwoSymbol> {
    let two = BigInt::from(2);
    let o = require_nondegenerate(q, &two)?;
    let pk = PrimePower::new(2, o + 3)?;
    let (d, _) = block_diagonalize(q, &pk)?;
    two_symbol_from_blocks(&d)
}

/// The 2-symbol read off a block diagonal form over `Z/2^k`.
///
/// The sign of a scale is the Kronecker symbol of the product of its block
/// determinants; the oddity sums the Type I units, Type II blocks adding 0.
pub fn two_symbol_from_blocks(d: &BlockDiagForm) -> Result<TwoSymbol> {
    if !d.modulus().is_two() {
        return Err(Error::internal("2-symbol requested for an odd prime"));
    }
    if d.zero_dim() > 0 {
        return Err(Error::Degenerate);
    }
    let eight = BigInt::from(8);
    let mut grouped: Vec<(u32, BigInt, usize, bool, BigInt)> = Vec::new();
    for b in d.blocks() {
        let det = b.block.det();
        let (type_one, odd) = match &b.block {
            Block::TypeI(u) => (true, u.clone()),
            Block::TypeII { .. } => (false, BigInt::from(0)),
        };
        match grouped.iter_mut().find(|g| g.0 == b.scale) {
            Some(g) => {
                g.1 = (&g.1 * det).mod_floor(&eight);
                g.2 += b.block.dim();
                g.3 |= type_one;
                g.4 += odd;
            }
            None => grouped.push((b.scale, det.mod_floor(&eight), b.block.dim(), type_one, odd)),
        }
    }
    let entries = grouped
        .into_iter()
        .map(|(scale, det, dim, type_one, odd)| {
            Ok(TwoSymbolEntry {
                scale,
                sign: kronecker2(&det)?,
                dim,
                type_one,
                oddity: odd.mod_floor(&eight).to_u8().unwrap_or(0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TwoSymbol::new(entries))
}

/// The canonical 2-symbol of a form.
pub fn canonical_two_symbol(q: &IntQuadForm) -> Result<CanonicalTwoSymbol> {
    Ok(two_symbol(q)?.canonical())
}

/// Flips the signs at two scales of a symbol by sign walking.
pub fn sign_walk_symbol(sym: &TwoSymbol, scale_i: u32, scale_j: u32) -> Result<TwoSymbol> {
    Ok(sym.sign_walk(scale_i, scale_j)?)
}

/// Decides `p^*`-equivalence by comparing p-symbols, or canonical 2-symbols for `p = 2`.
pub fn equivalent(q1: &IntQuadForm, q2: &IntQuadForm, p: &BigInt) -> Result<bool> {
    if q1.dim() != q2.dim() {
        require_nondegenerate(q1, p)?;
        require_nondegenerate(q2, p)?;
        return Ok(false);
    }
    if *p == BigInt::from(2) {
        Ok(canonical_two_symbol(q1)? == canonical_two_symbol(q2)?)
    } else {
        Ok(p_symbol(q1, p)? == p_symbol(q2, p)?)
    }
}
