//! Command-line surface: Gram-matrix files in, symbols, canonical forms,
//! equivalence verdicts and representations out.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::canon::{canonicalize, transform_between};
use crate::error::{Error, Result};
use crate::form::IntQuadForm;
use crate::matmod::ModMatrix;
use crate::modint::PrimePower;
use crate::represent::represent_general;
use crate::symbols::{canonical_two_symbol, p_symbol, two_symbol};

/// Number of whole-pipeline attempts, each with its own derived seed.
pub const PIPELINE_ATTEMPTS: u64 = 3;
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Inequivalent = 1,
    Usage = 2,
    Degenerate = 3,
    RetriesExhausted = 4,
    Internal = 10,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    /// The status reported for a library error.
    pub fn of(err: &Error) -> Self {
        match err {
            Error::Parse(_) | Error::PrecisionTooLow { .. } | Error::NotSymmetric | Error::ZeroInput => {
                ExitStatus::Usage
            }
            Error::Degenerate => ExitStatus::Degenerate,
            Error::RetriesExhausted { .. } => ExitStatus::RetriesExhausted,
            Error::Inequivalent(_) => ExitStatus::Inequivalent,
            _ => ExitStatus::Internal,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qfcanon",
    version,
    about = "Canonical forms of integral quadratic forms over Z/p^k"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the p-symbol, or the raw and canonical 2-symbol.
    Symbol {
        file: PathBuf,
        #[arg(short)]
        p: BigInt,
        #[arg(short)]
        k: Option<u32>,
    },
    /// Print the canonical form and a verified witness.
    Canon {
        file: PathBuf,
        #[arg(short)]
        p: BigInt,
        #[arg(short)]
        k: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Decide equivalence and print a verified transformation.
    Equiv {
        first: PathBuf,
        second: PathBuf,
        #[arg(short)]
        p: BigInt,
        #[arg(short)]
        k: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Find a primitive representation of a number.
    Represent {
        file: PathBuf,
        #[arg(short, allow_hyphen_values = true)]
        t: BigInt,
        #[arg(short)]
        p: BigInt,
        #[arg(short)]
        k: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

/// What a command prints and the status it exits with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub status: ExitStatus,
    pub stdout: String,
}

impl Report {
    fn ok(stdout: String) -> Self {
        Report {
            status: ExitStatus::Ok,
            stdout,
        }
    }
}

/// Parses the matrix file format: `#` starts a comment, the first line holds
/// `n` and the next `n` lines hold the rows of a symmetric integer matrix.
pub fn parse_matrix(text: &str) -> Result<IntQuadForm> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let n: usize = header
        .parse()
        .map_err(|_| Error::Parse(format!("expected the dimension, found {header:?}")))?;
    if n == 0 {
        return Err(Error::Parse("dimension must be positive".into()));
    }
    let mut entries = Vec::with_capacity(n * n);
    for row in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing row {}", row + 1)))?;
        let values = line
            .split_whitespace()
            .map(|tok| BigInt::from_str(tok).map_err(|_| Error::Parse(format!("not an integer: {tok:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != n {
            return Err(Error::Parse(format!(
                "row {} has {} entries, expected {n}",
                row + 1,
                values.len()
            )));
        }
        entries.extend(values);
    }
    if let Some(extra) = lines.next() {
        return Err(Error::Parse(format!("unexpected trailing line {extra:?}")));
    }
    IntQuadForm::new(n, entries)
}

/// Reads and parses a matrix file.
pub fn read_matrix(path: &Path) -> Result<IntQuadForm> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_matrix(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// An integer written into JSON as a plain number of any size.
#[derive(Debug, Clone)]
struct JsonInt(BigInt);

impl Serialize for JsonInt {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let number = serde_json::Number::from_str(&self.0.to_string()).map_err(serde::ser::Error::custom)?;
        number.serialize(serializer)
    }
}

fn json_rows(m: &ModMatrix) -> Vec<Vec<JsonInt>> {
    m.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(JsonInt).collect())
        .collect()
}

#[derive(Serialize)]
struct CanonJson {
    canonical: Vec<Vec<JsonInt>>,
    witness: Vec<Vec<JsonInt>>,
    p: JsonInt,
    k: u32,
    n: usize,
    seed: u64,
}

#[derive(Serialize)]
struct EquivJson {
    equivalent: bool,
    witness: Option<Vec<Vec<JsonInt>>>,
    difference: Option<String>,
    p: JsonInt,
    k: u32,
    n: usize,
    seed: u64,
}

#[derive(Serialize)]
struct RepresentJson {
    vector: Option<Vec<JsonInt>>,
    certified_modulus: Option<JsonInt>,
    t: JsonInt,
    p: JsonInt,
    k: u32,
    n: usize,
    seed: u64,
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::internal(format!("json output: {e}")))
}

fn format_matrix(m: &ModMatrix) -> String {
    let rows = m.to_rows();
    let width = rows.iter().flatten().map(|v| v.to_string().len()).max().unwrap_or(1);
    rows.iter()
        .map(|r| r.iter().map(|v| format!("{v:>width$}")).collect::<Vec<_>>().join(" ") + "\n")
        .collect()
}

fn default_precision(q: &IntQuadForm, p: &BigInt) -> Result<u32> {
    q.default_precision(p)
}

/// The precision in effect: the requested `k`, never below the default.
fn effective_precision(q: &IntQuadForm, p: &BigInt, k: Option<u32>) -> Result<(u32, u32)> {
    let default = default_precision(q, p)?;
    match k {
        Some(k) if k < default => Err(Error::PrecisionTooLow { k, required: default }),
        Some(k) => Ok((k, default)),
        None => Ok((default, default)),
    }
}

fn check_prime(p: &BigInt) -> Result<()> {
    PrimePower::new(p.clone(), 1)
        .map(|_| ())
        .map_err(|e| Error::Parse(e.to_string()))
}

/// Runs `attempt` with seeds derived from `seed` until it stops failing for lack of luck.
pub fn with_retries<T>(seed: u64, mut attempt: impl FnMut(&mut ChaCha8Rng) -> Result<T>) -> Result<T> {
    let mut last = Error::retries("pipeline");
    for i in 0..PIPELINE_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i.wrapping_mul(SEED_STRIDE)));
        match attempt(&mut rng) {
            Err(e @ Error::RetriesExhausted { .. }) => last = e,
            other => return other,
        }
    }
    Err(last)
}

fn cmd_symbol(file: &Path, p: &BigInt, k: Option<u32>) -> Result<Report> {
    check_prime(p)?;
    let q = read_matrix(file)?;
    let (k, default) = effective_precision(&q, p, k)?;
    let mut out = String::new();
    let _ = writeln!(out, "p = {p}, k = {k} (default {default})");
    if *p == BigInt::from(2) {
        let _ = writeln!(out, "2-symbol: {}", two_symbol(&q)?);
        let _ = writeln!(out, "canonical 2-symbol: {}", canonical_two_symbol(&q)?);
    } else {
        let _ = writeln!(out, "{p}-symbol: {}", p_symbol(&q, p)?);
    }
    Ok(Report::ok(out))
}

fn cmd_canon(file: &Path, p: &BigInt, k: Option<u32>, seed: u64, json: bool) -> Result<Report> {
    check_prime(p)?;
    let q = read_matrix(file)?;
    let (k, default) = effective_precision(&q, p, k)?;
    let (can, witness) = with_retries(seed, |rng| canonicalize(&q, p, Some(k), rng))?;
    let pk = can.modulus().clone();
    let matrix = can.matrix();
    if q.to_mod(&pk).congruence(witness.u())? != matrix || !witness.u().is_invertible() {
        return Err(Error::internal("canonical witness failed verification"));
    }
    if json {
        return Ok(Report::ok(to_json(&CanonJson {
            canonical: json_rows(&matrix),
            witness: json_rows(witness.u()),
            p: JsonInt(p.clone()),
            k,
            n: q.dim(),
            seed,
        })?));
    }
    let mut out = String::new();
    let _ = writeln!(out, "p = {p}, k = {k} (default {default})");
    let _ = writeln!(out, "canonical form: {can}");
    let _ = write!(out, "canonical matrix:\n{}", format_matrix(&matrix));
    let _ = write!(out, "witness U:\n{}", format_matrix(witness.u()));
    let _ = writeln!(out, "VERIFIED U'QU = can_p(Q) mod {}", pk.modulus());
    Ok(Report::ok(out))
}

fn cmd_equiv(first: &Path, second: &Path, p: &BigInt, k: Option<u32>, seed: u64, json: bool) -> Result<Report> {
    check_prime(p)?;
    let a = read_matrix(first)?;
    let b = read_matrix(second)?;
    let k = match k {
        Some(k) => Some(k),
        None if a.dim() == b.dim() => Some(default_precision(&a, p)?.max(default_precision(&b, p)?)),
        None => None,
    };
    let shown_k = k.unwrap_or(0);
    let mut out = String::new();
    match with_retries(seed, |rng| transform_between(&a, &b, p, k, rng)) {
        Ok(w) => {
            let pk = w.modulus().clone();
            if a.to_mod(&pk).congruence(w.u())? != b.to_mod(&pk) || !w.u().is_invertible() {
                return Err(Error::internal("equivalence witness failed verification"));
            }
            if json {
                out = to_json(&EquivJson {
                    equivalent: true,
                    witness: Some(json_rows(w.u())),
                    difference: None,
                    p: JsonInt(p.clone()),
                    k: shown_k,
                    n: a.dim(),
                    seed,
                })?;
            } else {
                let _ = writeln!(out, "p = {p}, k = {shown_k}");
                let _ = writeln!(out, "EQUIVALENT");
                let _ = write!(out, "witness W:\n{}", format_matrix(w.u()));
                let _ = writeln!(out, "VERIFIED W'AW = B mod {}", pk.modulus());
            }
            Ok(Report::ok(out))
        }
        Err(Error::Inequivalent(why)) => {
            if json {
                out = to_json(&EquivJson {
                    equivalent: false,
                    witness: None,
                    difference: Some(why),
                    p: JsonInt(p.clone()),
                    k: shown_k,
                    n: a.dim(),
                    seed,
                })?;
            } else {
                let _ = writeln!(out, "p = {p}, k = {shown_k}");
                let _ = writeln!(out, "INEQUIVALENT: {why}");
            }
            Ok(Report {
                status: ExitStatus::Inequivalent,
                stdout: out,
            })
        }
        Err(e) => Err(e),
    }
}

fn cmd_represent(file: &Path, t: &BigInt, p: &BigInt, k: Option<u32>, seed: u64, json: bool) -> Result<Report> {
    check_prime(p)?;
    let q = read_matrix(file)?;
    let k = match k {
        Some(k) => k,
        None => default_precision(&q, p)?,
    };
    let pk = PrimePower::new(p.clone(), k)?;
    let m = q.to_mod(&pk);
    let found = with_retries(seed, |rng| match represent_general(&m, t, rng) {
        Ok(r) => Ok(Ok(r)),
        Err(Error::NoRepresentation { certified_modulus, .. }) => Ok(Err(certified_modulus)),
        Err(e) => Err(e),
    })?;
    let mut out = String::new();
    let t_red = pk.reduce(t);
    match found {
        Ok(rep) => {
            let x = rep.vector().to_vec();
            let column = ModMatrix::column_vector(&x, &pk);
            let value = m.congruence(&column)?.get(0, 0).clone();
            if value != t_red || !x.iter().any(|v| pk.is_unit(v)) {
                return Err(Error::internal("representation failed verification"));
            }
            if json {
                out = to_json(&RepresentJson {
                    vector: Some(x.into_iter().map(JsonInt).collect()),
                    certified_modulus: None,
                    t: JsonInt(t_red),
                    p: JsonInt(p.clone()),
                    k,
                    n: q.dim(),
                    seed,
                })?;
            } else {
                let coords: Vec<String> = x.iter().map(BigInt::to_string).collect();
                let _ = writeln!(out, "({})", coords.join(", "));
                let _ = writeln!(out, "VERIFIED x'Qx = {t_red} mod {}, x primitive", pk.modulus());
            }
        }
        Err(certified) => {
            if json {
                out = to_json(&RepresentJson {
                    vector: None,
                    certified_modulus: Some(JsonInt(certified)),
                    t: JsonInt(t_red),
                    p: JsonInt(p.clone()),
                    k,
                    n: q.dim(),
                    seed,
                })?;
            } else {
                let _ = writeln!(out, "NONE (certified mod {certified})");
            }
        }
    }
    Ok(Report::ok(out))
}

/// Runs one command.
pub fn run(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Symbol { file, p, k } => cmd_symbol(file, p, *k),
        Command::Canon { file, p, k, seed, json } => cmd_canon(file, p, *k, *seed, *json),
        Command::Equiv {
            first,
            second,
            p,
            k,
            seed,
            json,
        } => cmd_equiv(first, second, p, *k, *seed, *json),
        Command::Represent {
            file,
            t,
            p,
            k,
            seed,
            json,
        } => cmd_represent(file, t, p, *k, *seed, *json),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_matrix_files() {
        let q = parse_matrix("# a form\n2\n3 0 # first row\n0 5\n").unwrap();
        assert_eq!(q, IntQuadForm::diagonal(&[3i64, 5]));
        let q = parse_matrix("\n\n1\n-7\n").unwrap();
        assert_eq!(q, IntQuadForm::diagonal(&[-7i64]));
    }

    #[test]
    fn rejects_bad_files() {
        for text in [
            "",
            "# only\n",
            "x\n",
            "2\n1 0\n",
            "2\n1 0\n0\n",
            "2\n1 2\n3 4\n",
            "1\n1\n2\n",
            "0\n",
        ] {
            let err = parse_matrix(text).unwrap_err();
            assert_eq!(ExitStatus::of(&err), ExitStatus::Usage, "{text:?} gave {err:?}");
        }
    }

    #[test]
    fn exit_statuses() {
        assert_eq!(ExitStatus::of(&Error::Degenerate).code(), 3);
        assert_eq!(ExitStatus::of(&Error::retries("x")).code(), 4);
        assert_eq!(ExitStatus::of(&Error::internal("x")).code(), 10);
        assert_eq!(ExitStatus::of(&Error::PrecisionTooLow { k: 1, required: 2 }).code(), 2);
    }

    #[test]
    fn retries_derive_fresh_seeds() {
        let mut seen = Vec::new();
        let result: Result<()> = with_retries(5, |rng| {
            seen.push(rand::Rng::gen::<u64>(rng));
            Err(Error::retries("stage"))
        });
        assert_eq!(result, Err(Error::retries("stage")));
        assert_eq!(seen.len(), PIPELINE_ATTEMPTS as usize);
        seen.dedup();
        assert_eq!(seen.len(), PIPELINE_ATTEMPTS as usize);
    }

    #[test]
    fn json_numbers_are_exact() {
        let big = BigInt::from_str("123456789012345678901234567890").unwrap();
        assert_eq!(
            serde_json::to_string(&JsonInt(big)).unwrap(),
            "123456789012345678901234567890"
        );
    }
}
