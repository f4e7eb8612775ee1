#![allow(clippy::needless_range_loop)]

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clap::Parser;
use qfcanon::canon::{canonicalize, compartment_dim3, transform_between, CanonicalForm};
use qfcanon::cli::{run, Cli, ExitStatus};
use qfcanon::matmod::random_gl;
use qfcanon::modint::{k_p, kronecker2, sqrt_mod};
use qfcanon::oracle::{brute_equivalent, brute_represented_values, verify_transform, SmallUniverse};
use qfcanon::represent::represent_general;
use qfcanon::symbols::{canonical_two_symbol, p_symbol, sign_walk_symbol, TwoSymbol};
use qfcanon::{Block, Error, IntQuadForm, ModMatrix, PrimePower};

type Check = std::result::Result<String, String>;

/// Name, time budget in seconds and check of one criterion.
type Criterion = (&'static str, u64, fn() -> Check);

fn b(v: i64) -> BigInt {
    BigInt::from(v)
}

fn pk(p: u32, k: u32) -> PrimePower {
    PrimePower::new(p, k).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lift(m: &ModMatrix) -> IntQuadForm {
    IntQuadForm::from_mod(m).unwrap()
}

fn random_form(n: usize, rng: &mut ChaCha8Rng) -> IntQuadForm {
    loop {
        let mut rows = vec![vec![0i64; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-50..=50);
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        let q = IntQuadForm::from_rows(&rows).unwrap();
        if !q.det().is_zero() {
            return q;
        }
    }
}

fn write_matrix(name: &str, q: &IntQuadForm) -> String {
    let dir = std::env::temp_dir().join(format!("qfcanon-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    let mut text = format!("{}\n", q.dim());
    for row in q.rows() {
        text += &row.iter().map(BigInt::to_string).collect::<Vec<_>>().join(" ");
        text += "\n";
    }
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn cli_equiv(a: &IntQuadForm, b: &IntQuadForm, k: u32) -> std::result::Result<(), String> {
    let (fa, fb) = (write_matrix("a.mat", a), write_matrix("b.mat", b));
    let k = k.to_string();
    let cli = Cli::try_parse_from(["qfcanon", "equiv", "-p", "2", "-k", &k, &fa, &fb]).map_err(|e| e.to_string())?;
    let report = run(&cli).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = report.stdout.lines().collect();
    ensure(
        report.status == ExitStatus::Ok && lines.contains(&"EQUIVALENT") && report.stdout.contains("VERIFIED"),
        || format!("equiv output was {:?}", report.stdout),
    )
}

fn worked_examples() -> Check {
    let pairs = [
        (IntQuadForm::diagonal(&[3i64, 5]), IntQuadForm::diagonal(&[1i64, 7])),
        (IntQuadForm::diagonal(&[1i64, 4]), IntQuadForm::diagonal(&[5i64, 20])),
    ];
    for (a, b) in &pairs {
        for k in [4, 5] {
            if k < a.default_precision(&BigInt::from(2)).unwrap() {
                continue;
            }
            cli_equiv(a, b, k)?;
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            let w = transform_between(a, b, &BigInt::from(2), Some(k), &mut rng).map_err(|e| e.to_string())?;
            ensure(
                verify_transform(&a.to_mod(w.modulus()), &b.to_mod(w.modulus()), w.u()),
                || "witness".into(),
            )?;
        }
    }
    let sym: TwoSymbol = "1^+2_0 [2^-2 4^+3]_3 8^+0 [16^+1]_1 32^+2_0"
        .parse()
        .map_err(|e| format!("{e}"))?;
    let walked = sign_walk_symbol(&sym, 1, 4).map_err(|e| e.to_string())?.to_string();
    let expected = "1^+2_0 [2^+2 4^+3]_3 8^+0 [16^-1]_5 32^+2_0";
    ensure(walked == expected, || format!("sign walk gave {walked}"))?;
    let canonical = sym.canonical().to_string();
    let expected_canonical = "1^-2 [2^+2 4^+3]_7 [16^+1]_1 32^+2";
    ensure(canonical == expected_canonical, || {
        format!("canonical symbol {canonical}")
    })?;
    Ok(format!(
        "2 equivalences via cli, sign walk {walked}, canonical {canonical}"
    ))
}

fn epsilon_oddity(taus: &[i64]) -> (i8, i64) {
    let product: i64 = taus.iter().product();
    (kronecker2(&b(product)).unwrap(), taus.iter().sum::<i64>().rem_euclid(8))
}

fn tables() -> Check {
    let canonical_triples: [(i8, i64, [i64; 3]); 8] = [
        (1, 1, [1, 1, 7]),
        (1, 3, [1, 1, 1]),
        (1, 5, [3, 3, 7]),
        (1, 7, [1, 3, 3]),
        (-1, 1, [3, 3, 3]),
        (-1, 3, [1, 3, 7]),
        (-1, 5, [1, 1, 3]),
        (-1, 7, [1, 1, 5]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut inputs = 0;
    for (eps, oddity, expected) in canonical_triples {
        ensure(epsilon_oddity(&expected) == (eps, oddity), || {
            format!("table row {expected:?}")
        })?;
        for k in [3u32, 5, 8] {
            let modulus = 1i64 << k;
            let mut realized = 0;
            while realized < 4 {
                let taus: [i64; 3] = std::array::from_fn(|_| 2 * rng.gen_range(0..modulus / 2) + 1);
                if epsilon_oddity(&taus) != (eps, oddity) {
                    continue;
                }
                realized += 1;
                let input = taus.map(b);
                let (out, w) = compartment_dim3(&input, k, &mut rng).map_err(|e| format!("{taus:?}: {e}"))?;
                ensure(out == expected.map(b), || format!("{taus:?} mod 2^{k} gave {out:?}"))?;
                let m = pk(2, k);
                let source = ModMatrix::diagonal(&input, &m);
                let target = ModMatrix::diagonal(&expected.map(b), &m);
                ensure(verify_transform(&source, &target, w.u()), || {
                    format!("witness for {taus:?}")
                })?;
                inputs += 1;
            }
        }
    }
    let type_two_rows: [(i64, Block, [i64; 3], i64, i8); 8] = [
        (1, Block::t_minus(), [3, 3, 3], 1, -1),
        (3, Block::t_minus(), [1, 1, 1], 3, 1),
        (5, Block::t_minus(), [3, 3, 7], 5, 1),
        (7, Block::t_minus(), [1, 1, 5], 7, -1),
        (1, Block::t_plus(), [1, 1, 7], 1, 1),
        (3, Block::t_plus(), [1, 3, 7], 3, -1),
        (5, Block::t_plus(), [1, 1, 3], 5, -1),
        (7, Block::t_plus(), [1, 3, 3], 7, 1),
    ];
    let two = BigInt::from(2);
    for (tau, block, equivalent, oddity, eps) in type_two_rows {
        ensure(epsilon_oddity(&equivalent) == (eps, oddity), || {
            format!("table row {equivalent:?}")
        })?;
        let entries = block.entries();
        let rows = [
            vec![b(tau), b(0), b(0)],
            vec![b(0), entries[0].clone(), entries[1].clone()],
            vec![b(0), entries[2].clone(), entries[3].clone()],
        ];
        let with_block = IntQuadForm::new(3, rows.concat()).unwrap();
        let diagonal = IntQuadForm::diagonal(&equivalent);
        let (c1, _) = canonicalize(&with_block, &two, Some(3), &mut rng).map_err(|e| e.to_string())?;
        let (c2, _) = canonicalize(&diagonal, &two, Some(3), &mut rng).map_err(|e| e.to_string())?;
        ensure(c1 == c2, || format!("{tau} + block: {c1} vs {c2}"))?;
        let w = transform_between(&with_block, &diagonal, &two, Some(3), &mut rng).map_err(|e| e.to_string())?;
        let m8 = pk(2, 3);
        ensure(
            verify_transform(&with_block.to_mod(&m8), &diagonal.to_mod(&m8), w.u()),
            || "Type II row witness".into(),
        )?;
    }
    Ok(format!(
        "8 canonical triples from {inputs} random inputs, 8 Type II rows with witnesses mod 8"
    ))
}

fn soundness() -> Check {
    let mut checked = 0;
    for (p, seed) in [(2u32, 31u64), (3, 32), (5, 33), (7, 34)] {
        let prime = BigInt::from(p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for trial in 0..500 {
            let n = 1 + trial % 6;
            let q = random_form(n, &mut rng);
            let (can, w) = canonicalize(&q, &prime, None, &mut rng).map_err(|e| format!("p={p} {q:?}: {e}"))?;
            let m = can.modulus().clone();
            ensure(verify_transform(&q.to_mod(&m), &can.matrix(), w.u()), || {
                format!("witness p={p} {q:?}")
            })?;
            let v = random_gl(n, &m, &mut rng).map_err(|e| e.to_string())?;
            let moved = lift(&q.to_mod(&m).congruence(&v).map_err(|e| e.to_string())?);
            let (again, w2) = canonicalize(&moved, &prime, Some(m.k()), &mut rng)
                .map_err(|e| format!("p={p} k={} moved {:?}: {e}", m.k(), moved.rows()))?;
            ensure(again == can, || format!("p={p} invariance {q:?}: {can} vs {again}"))?;
            ensure(verify_transform(&moved.to_mod(&m), &again.matrix(), w2.u()), || {
                "moved witness".into()
            })?;
            let (fixed, _) =
                canonicalize(&lift(&can.matrix()), &prime, Some(m.k()), &mut rng).map_err(|e| e.to_string())?;
            ensure(fixed == can, || format!("p={p} idempotence {can} vs {fixed}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} forms: witnesses, invariance and idempotence"))
}

/// Canonical form of a form given modulo `p^k`, or `None` when `k < ord_p(det) + k_p`.
fn handled_canonical(q: &ModMatrix, rng: &mut ChaCha8Rng) -> std::result::Result<Option<CanonicalForm>, String> {
    let m = q.modulus();
    if q.det_mod().map_err(|e| e.to_string())?.is_zero() {
        return Ok(None);
    }
    let form = lift(q);
    let ord = form.det_order(m.p()).finite().ok_or("degenerate lift")?;
    if m.k() < ord + k_p(m.p()) {
        return Ok(None);
    }
    let (can, _) = canonicalize(&form, m.p(), Some(m.k()), rng).map_err(|e| format!("{q:?}: {e}"))?;
    Ok(Some(can))
}

fn oracle_completeness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut summary = Vec::new();
    for (p, k) in [(2u32, 3u32), (3, 2), (2, 4), (5, 2)] {
        let universe = SmallUniverse::new(2, &pk(p, k)).map_err(|e| e.to_string())?;
        let mut classes: HashMap<CanonicalForm, Vec<ModMatrix>> = HashMap::new();
        let mut skipped = 0;
        for q in universe.forms() {
            match handled_canonical(&q, &mut rng)? {
                Some(can) => classes.entry(can).or_default().push(q),
                None => skipped += 1,
            }
        }
        let mut handled = 0;
        for members in classes.values() {
            let rep = &members[0];
            for q in members {
                let u = brute_equivalent(rep, q).map_err(|e| e.to_string())?;
                ensure(u.is_some_and(|u| verify_transform(rep, q, &u)), || {
                    format!("same canonical form but no witness: {rep:?} {q:?}")
                })?;
                handled += 1;
            }
        }
        let reps: Vec<&ModMatrix> = classes.values().map(|m| &m[0]).collect();
        for (i, a) in reps.iter().enumerate() {
            for b in &reps[i + 1..] {
                let hit = brute_equivalent(a, b).map_err(|e| e.to_string())?;
                ensure(hit.is_none(), || {
                    format!("different canonical forms but equivalent: {a:?} {b:?}")
                })?;
            }
        }
        summary.push(format!(
            "Z/{}: {handled} forms in {} classes ({skipped} excluded)",
            universe.modulus().modulus(),
            classes.len()
        ));
    }
    let m8 = pk(2, 3);
    let universe = SmallUniverse::new(3, &m8).map_err(|e| e.to_string())?;
    let odd: Vec<ModMatrix> = universe
        .forms()
        .filter(|q| q.det_mod().is_ok_and(|d| d.to_u64().unwrap() % 2 == 1))
        .collect();
    let (mut equal, mut different) = (0, 0);
    for trial in 0..200 {
        let a = &odd[rng.gen_range(0..odd.len())];
        let b = if trial % 2 == 0 {
            let v = random_gl(3, &m8, &mut rng).map_err(|e| e.to_string())?;
            a.congruence(&v).map_err(|e| e.to_string())?
        } else {
            odd[rng.gen_range(0..odd.len())].clone()
        };
        let ca = handled_canonical(a, &mut rng)?.ok_or("odd determinant not handled")?;
        let cb = handled_canonical(&b, &mut rng)?.ok_or("odd determinant not handled")?;
        let brute = brute_equivalent(a, &b).map_err(|e| e.to_string())?;
        ensure((ca == cb) == brute.is_some(), || format!("n=3 mismatch {a:?} {b:?}"))?;
        if ca == cb {
            equal += 1;
        } else {
            different += 1;
        }
    }
    summary.push(format!("n=3 over Z/8: 200 pairs ({equal} equivalent, {different} not)"));
    Ok(summary.join("; "))
}

fn square_roots() -> Check {
    let mut total = 0;
    for (p, k) in [(2u32, 7u32), (3, 5), (5, 4), (7, 3)] {
        let m = pk(p, k);
        let modulus = m.modulus().to_u64().unwrap();
        let mut squares = vec![false; modulus as usize];
        for x in 0..modulus {
            squares[(x * x % modulus) as usize] = true;
        }
        for t in 0..modulus {
            match sqrt_mod(&BigInt::from(t), &m) {
                Ok(x) => {
                    let x = x.to_u64().ok_or("root out of range")?;
                    ensure(squares[t as usize] && x < modulus && x * x % modulus == t, || {
                        format!("root {x} of {t} mod {modulus}")
                    })?;
                }
                Err(_) => ensure(!squares[t as usize], || format!("{t} mod {modulus} has a root"))?,
            }
            total += 1;
        }
    }
    Ok(format!("{total} residues"))
}

fn forms_for_representation(m: &PrimePower) -> Vec<ModMatrix> {
    let modulus = m.modulus().to_i64().unwrap();
    let mut seen = HashSet::new();
    let mut forms = Vec::new();
    let mut push = |rows: Vec<Vec<i64>>| {
        let q = ModMatrix::from_rows(m, &rows).unwrap();
        if seen.insert(q.clone()) {
            forms.push(q);
        }
    };
    for a in 0..modulus {
        push(vec![vec![a]]);
        for c in 0..modulus {
            push(vec![vec![a, 0], vec![0, c]]);
            for d in 0..modulus {
                push(vec![vec![a, 0, 0], vec![0, c, 0], vec![0, 0, d]]);
            }
        }
    }
    if m.is_two() {
        for s in 0..m.k() {
            let scale = 1i64 << s;
            for a in 0..modulus / 2 {
                for bb in (1..modulus).step_by(2) {
                    for c in 0..modulus / 2 {
                        let (x, y, z) = (scale * 2 * a, scale * bb, scale * 2 * c);
                        push(vec![vec![x, y], vec![y, z]]);
                        for d in 0..modulus {
                            push(vec![vec![d, 0, 0], vec![0, x, y], vec![0, y, z]]);
                        }
                    }
                }
            }
        }
    }
    forms
}

fn representation() -> Check {
    let mut summary = Vec::new();
    for (p, k) in [(2u32, 3u32), (2, 4), (3, 2), (3, 3)] {
        let m = pk(p, k);
        let mut rng = ChaCha8Rng::seed_from_u64(6 + k as u64);
        let forms = forms_for_representation(&m);
        let (mut found, mut absent) = (0, 0);
        for q in &forms {
            let table = brute_represented_values(q).map_err(|e| e.to_string())?;
            for (t, &exists) in table.iter().enumerate() {
                let t = BigInt::from(t);
                let mut verdict = Err(Error::retries("representation"));
                for _ in 0..3 {
                    verdict = represent_general(q, &t, &mut rng);
                    if !matches!(verdict, Err(Error::RetriesExhausted { .. })) {
                        break;
                    }
                }
                match verdict {
                    Ok(rep) => {
                        let x = rep.vector();
                        let value = q.quadratic_value(x);
                        ensure(exists, || format!("{q:?} represents {t} only per the algorithm"))?;
                        ensure(m.reduce(&value) == t && x.iter().any(|v| m.is_unit(v)), || {
                            format!("bad vector {x:?} for {t} by {q:?}")
                        })?;
                        found += 1;
                    }
                    Err(Error::NoRepresentation { .. }) => {
                        ensure(!exists, || format!("{q:?} misses {t}"))?;
                        absent += 1;
                    }
                    Err(e) => return Err(format!("{q:?}, t={t}: {e}")),
                }
            }
        }
        summary.push(format!(
            "Z/{}: {} forms, {found} found, {absent} absent",
            m.modulus(),
            forms.len()
        ));
    }
    Ok(summary.join("; "))
}

fn symbol_invariance() -> Check {
    let mut checked = 0;
    for (p, seed) in [(2u32, 71u64), (3, 72), (5, 73), (7, 74)] {
        let prime = BigInt::from(p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for trial in 0..300 {
            let n = 1 + trial % 6;
            let q = random_form(n, &mut rng);
            let k = q.default_precision(&prime).map_err(|e| e.to_string())?;
            let m = pk(p, k);
            let v = random_gl(n, &m, &mut rng).map_err(|e| e.to_string())?;
            let moved = lift(&q.to_mod(&m).congruence(&v).map_err(|e| e.to_string())?);
            if p == 2 {
                let (a, b) = (canonical_two_symbol(&q), canonical_two_symbol(&moved));
                ensure(a.is_ok() && a == b, || format!("2-symbols of {q:?}: {a:?} vs {b:?}"))?;
            } else {
                let (a, b) = (p_symbol(&q, &prime), p_symbol(&moved, &prime));
                ensure(a.is_ok() && a == b, || format!("{p}-symbols of {q:?}: {a:?} vs {b:?}"))?;
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} pairs"))
}

fn benchmark() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let three = BigInt::from(3);
    let q = loop {
        let q = random_form(20, &mut rng);
        if q.det_order(&three).finite().is_some_and(|o| o < 30) {
            break q;
        }
    };
    let start = Instant::now();
    let (can, w) = canonicalize(&q, &three, Some(30), &mut rng).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(verify_transform(&q.to_mod(can.modulus()), &can.matrix(), w.u()), || {
        "benchmark witness".into()
    })?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("n=20, k=30, p=3 in {:.3} s", elapsed.as_secs_f64()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("worked examples", 1, worked_examples),
        ("dimension three tables", 5, tables),
        ("canonicalization soundness and invariance", 60, soundness),
        ("oracle completeness", 600, oracle_completeness),
        ("square roots", 10, square_roots),
        ("representation contract", 300, representation),
        ("symbol invariance", 30, symbol_invariance),
        ("smoke benchmark", 10, benchmark),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(detail) if secs > budget as f64 => Err(format!("{detail}, over the {budget} s budget")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} ({secs:.2} s)", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL {} {name}: {why} ({secs:.2} s)", i + 1);
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
