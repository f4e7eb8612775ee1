//! Canonical forms of integral quadratic forms over `Z/p^k`.
//!
//! Every nondegenerate symmetric integer matrix is reduced, at a prime `p` and
//! a precision `k`, to a canonical block diagonal matrix together with an
//! explicit transformation `U` satisfying `U' Q U = can_p(Q) (mod p^k)`. The
//! crate also computes `p`-adic symbols, primitive representations of numbers
//! and transformations between equivalent forms.

#![allow(clippy::needless_range_loop)]

pub mod blockdiag;
pub mod canon;
pub mod cli;
pub mod error;
pub mod form;
pub mod matmod;
pub mod modint;
pub mod oracle;
pub mod ratdiag;
pub mod represent;
pub mod symbols;

pub use blockdiag::{assemble, block_diagonalize, sort_blocks, Block, BlockDiagForm, ScaledBlock};
pub use canon::{canonicalize, transform_between, CanonicalForm};
pub use error::{Error, Result};
pub use form::IntQuadForm;
pub use matmod::{ModMatrix, Witness};
pub use modint::{Order, PrimePower};
pub use represent::{represent_general, Representation};
pub use symbols::{CanonicalTwoSymbol, PSymbolOdd, TwoSymbol};
