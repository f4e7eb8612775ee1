//! Python bindings: canonical forms, symbols, equivalence and representations
//! of integral quadratic forms over `Z/p^k`.

use num_bigint::BigInt;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use qfcanon::canon::{canonicalize as canonicalize_form, transform_between};
use qfcanon::cli::with_retries;
use qfcanon::represent::represent_general;
use qfcanon::symbols::{canonical_two_symbol, p_symbol};
use qfcanon::{Error, IntQuadForm, ModMatrix, PrimePower};

create_exception!(qfcanon_py, QfcanonError, PyException);

type Rows = Vec<Vec<BigInt>>;

fn to_py(err: Error) -> PyErr {
    QfcanonError::new_err(err.to_string())
}

fn form(rows: Rows) -> PyResult<IntQuadForm> {
    let n = rows.len();
    IntQuadForm::new(n, rows.into_iter().flatten().collect()).map_err(to_py)
}

/// Returns `(canonical, witness, k)` with `witness' Q witness = canonical (mod p^k)`.
#[pyfunction]
#[pyo3(signature = (matrix, p, k=None, seed=0))]
fn canonicalize(matrix: Rows, p: BigInt, k: Option<u32>, seed: u64) -> PyResult<(Rows, Rows, u32)> {
    let q = form(matrix)?;
    let (can, witness) = with_retries(seed, |rng| canonicalize_form(&q, &p, k, rng)).map_err(to_py)?;
    Ok((can.matrix().to_rows(), witness.u().to_rows(), can.modulus().k()))
}

/// The p-symbol for odd `p`, the canonical 2-symbol for `p = 2`.
#[pyfunction]
fn symbol(matrix: Rows, p: BigInt) -> PyResult<String> {
    let q = form(matrix)?;
    if p == BigInt::from(2) {
        canonical_two_symbol(&q).map(|s| s.to_string()).map_err(to_py)
    } else {
        p_symbol(&q, &p).map(|s| s.to_string()).map_err(to_py)
    }
}

/// A matrix `W` with `W' A W = B (mod p^k)`, or `None` when the forms are inequivalent.
#[pyfunction]
#[pyo3(signature = (a, b, p, k=None, seed=0))]
fn equivalent(a: Rows, b: Rows, p: BigInt, k: Option<u32>, seed: u64) -> PyResult<Option<Rows>> {
    let (qa, qb) = (form(a)?, form(b)?);
    match with_retries(seed, |rng| transform_between(&qa, &qb, &p, k, rng)) {
        Ok(w) => Ok(Some(w.u().to_rows())),
        Err(Error::Inequivalent(_)) => Ok(None),
        Err(e) => Err(to_py(e)),
    }
}

/// A primitive `x` with `x' Q x = t (mod p^k)`, or `None` when none exists.
#[pyfunction]
#[pyo3(signature = (matrix, t, p, k, seed=0))]
fn represent(matrix: Rows, t: BigInt, p: BigInt, k: u32, seed: u64) -> PyResult<Option<Vec<BigInt>>> {
    let q = form(matrix)?;
    let pk = PrimePower::new(p, k).map_err(|e| to_py(e.into()))?;
    let m: ModMatrix = q.to_mod(&pk);
    match with_retries(seed, |rng| represent_general(&m, &t, rng)) {
        Ok(rep) => Ok(Some(rep.vector().to_vec())),
        Err(Error::NoRepresentation { .. }) => Ok(None),
        Err(e) => Err(to_py(e)),
    }
}

#[pymodule]
fn qfcanon_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QfcanonError", m.py().get_type::<QfcanonError>())?;
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(symbol, m)?)?;
    m.add_function(wrap_pyfunction!(equivalent, m)?)?;
    m.add_function(wrap_pyfunction!(represent, m)?)?;
    Ok(())
}
