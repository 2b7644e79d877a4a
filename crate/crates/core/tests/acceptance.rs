//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use webrank_core::abelrank::{default_orders, rank_estimate, rank_run, verify_max_rank};
use webrank_core::catalog::{self, FamilySpec};
use webrank_core::combin::{n_table, pi_prime, rho, verify_identities};
use webrank_core::expr::parse;
use webrank_core::ordinary::{check_condition_iv, check_ordinary_direct, check_web_direct, theorem1_crosscheck};
use webrank_core::web::cubic_reparametrization;
use webrank_core::{assemble, AssembledWeb, BalancedSet, GenericPointSampler, Precision, Rational, Verdict};

const PREC: Precision = Precision::P128;

struct Outcome {
    pass: bool,
    detail: String,
}

fn ok(detail: impl Into<String>) -> Outcome {
    Outcome { pass: true, detail: detail.into() }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome { pass: false, detail: detail.into() }
}

fn choose(p: u128, q: u128) -> u128 {
    if q > p {
        return 0;
    }
    (0..q).fold(1, |acc, i| acc * (p - i) / (i + 1))
}

fn monomials(n: u128, h: u128) -> u128 {
    choose(n + h - 1, h)
}

fn families() -> Vec<(BalancedSet, FamilySpec)> {
    catalog::names().iter().map(|n| catalog::get_family(n).unwrap()).collect()
}

fn bad_family() -> BalancedSet {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../families/bad_family.json");
    let text = std::fs::read_to_string(path).expect("bad_family.json");
    BalancedSet::from_json("bad_family", &text).unwrap()
}

fn criterion_1() -> Outcome {
    for k0 in 2..=6 {
        match verify_identities(k0, 20, 12) {
            Ok(None) => {}
            Ok(Some(cx)) => return fail(format!("k0={k0}: {cx:?}")),
            Err(e) => return fail(format!("k0={k0}: {e}")),
        }
        let table = n_table(k0, 20).unwrap();
        for h in (k0 + 1)..=20 {
            if table.n_value(h).is_some_and(|v| *v != BigInt::from(0)) {
                return fail(format!("N({h},{k0}) nonzero"));
            }
        }
    }
    ok("split identity n,h <= 12; rank split k0 = 2..=6, n <= 20; vanishing tail")
}

fn criterion_2() -> Outcome {
    let rhos = [(2, 3, 3), (3, 3, 11), (4, 3, 26), (2, 4, 6), (3, 4, 26), (4, 4, 71), (5, 4, 155)];
    for (n, k0, want) in rhos {
        let d = monomials(n, k0);
        // closed form and the sum over h, both with plain integers
        let closed = k0 * d - monomials(n + 1, k0) + 1;
        let summed: u128 = (1..=k0).map(|h| d - monomials(n, h)).sum();
        let lib = rho(n as i64, k0 as i64).unwrap();
        let lib_sum = pi_prime(n as i64, &BigInt::from(d)).unwrap();
        if closed != want || summed != want || lib != BigInt::from(want) || lib_sum != BigInt::from(want) {
            return fail(format!("rho({n},{k0}): closed {closed}, summed {summed}, library {lib}/{lib_sum}, want {want}"));
        }
    }
    let ns = [(3, 3, 2), (3, 4, 8), (4, 4, 3)];
    for (h, k0, want) in ns {
        // N(h) = rho(h) - sum_{j<h} binom(h,j) N(j)
        let mut table = vec![0i128; h as usize + 1];
        for j in 2..=h {
            let d = monomials(j, k0);
            let r = (k0 * d - monomials(j + 1, k0) + 1) as i128;
            let lower: i128 = (2..j).map(|i| choose(j, i) as i128 * table[i as usize]).sum();
            table[j as usize] = r - lower;
        }
        let lib = n_table(k0 as i64, h as i64).unwrap().n_value(h as i64).cloned();
        if table[h as usize] != want || lib != Some(BigInt::from(want)) {
            return fail(format!("N({h},{k0}): oracle {}, library {lib:?}, want {want}", table[h as usize]));
        }
    }
    ok("rho and N values from independent closed and summed forms")
}

fn criterion_3() -> Outcome {
    let sampler = GenericPointSampler::new(0);
    let mut slowest = Duration::ZERO;
    for (e, _) in families() {
        let t = Instant::now();
        let iv = check_condition_iv(&e, &sampler, PREC);
        if iv.verdict != Verdict::True {
            return fail(format!("{}: condition iv {}", e.name, iv.verdict));
        }
        let mut marginal = iv.witnesses.iter().any(|w| w.marginal);
        let mut ns = vec![2, 3, e.k0, e.k0 + 1];
        ns.dedup();
        for n in ns {
            let r = check_ordinary_direct(&e, n, &sampler, PREC).unwrap();
            if r.verdict != Verdict::True {
                return fail(format!("{}: direct n={n} {}", e.name, r.verdict));
            }
            marginal |= r.witnesses.iter().any(|w| w.marginal);
        }
        if marginal {
            return fail(format!("{}: marginal pivot at seed 0", e.name));
        }
        let el = t.elapsed();
        if el > Duration::from_secs(30) {
            return fail(format!("{}: {:.1}s exceeds 30s", e.name, el.as_secs_f64()));
        }
        slowest = slowest.max(el);
    }
    ok(format!("{} families, slowest {:.1}s", families().len(), slowest.as_secs_f64()))
}

/// Adds `c * x_i * x_j` to one integral of a rational family.
fn perturb(spec: &FamilySpec, rng: &mut ChaCha8Rng, idx: usize) -> BalancedSet {
    let mut webs = spec.webs.clone();
    let k = rng.gen_range(1..=spec.k0);
    let b = rng.gen_range(0..webs[k - 1].len());
    let (i, j) = (rng.gen_range(1..=k), rng.gen_range(1..=k));
    let (num, den) = (rng.gen_range(1..=5), rng.gen_range(7..=29));
    webs[k - 1][b] = format!("({})+({num}/{den})*x{i}*x{j}", webs[k - 1][b]);
    let exprs = webs
        .iter()
        .enumerate()
        .map(|(t, list)| list.iter().map(|s| parse(s, t + 1).unwrap()).collect())
        .collect();
    BalancedSet::new(format!("{}~{idx}", spec.name), spec.k0, exprs).unwrap()
}

fn criterion_4() -> Outcome {
    let sampler = GenericPointSampler::new(0);
    let mut sets: Vec<BalancedSet> = families().into_iter().map(|(e, _)| e).collect();
    let rational: Vec<FamilySpec> = families().into_iter().filter(|(e, _)| e.is_rational()).map(|(_, s)| s).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for idx in 0..20 {
        let spec = &rational[rng.gen_range(0..rational.len())];
        sets.push(perturb(spec, &mut rng, idx));
    }
    let (mut agreed, mut ordinary) = (0, 0);
    for e in &sets {
        let x = theorem1_crosscheck(e, &[e.k0, e.k0 + 1], &sampler, PREC).unwrap();
        if x.verdict != Verdict::True {
            let rows: Vec<String> = x.rows.iter().map(|r| format!("n={} direct {}", r.n, r.direct)).collect();
            return fail(format!("{}: iv {} vs {}", e.name, x.condition_iv, rows.join(", ")));
        }
        agreed += 1;
        ordinary += usize::from(x.condition_iv == Verdict::True);
    }
    let bad = bad_family();
    let x = theorem1_crosscheck(&bad, &[bad.k0, bad.k0 + 1], &sampler, PREC).unwrap();
    let both_false = x.condition_iv == Verdict::False && x.rows.iter().all(|r| r.direct == Verdict::False);
    if !both_false {
        return fail(format!("dependent-gradient family: iv {}, rows {:?}", x.condition_iv, x.rows));
    }
    ok(format!("{agreed} sets agree ({ordinary} ordinary); dependent gradients false on both sides"))
}

fn criteria_5_and_6() -> (Outcome, Outcome) {
    let sampler = GenericPointSampler::new(0);
    let mut slowest = Duration::ZERO;
    let mut five: Option<Outcome> = None;
    let mut six: Option<Outcome> = None;
    for (e, _) in families() {
        let t = Instant::now();
        let m = verify_max_rank(&e, &sampler, None, PREC, e.k0 == 3).unwrap();
        let el = t.elapsed();
        slowest = slowest.max(el);
        let bad_run = m.runs.iter().find(|r| {
            r.verdict != Verdict::True
                || r.value != Some(r.expected)
                || r.estimates.last().is_none_or(|est| est.marginal || est.stabilized_at.is_none())
        });
        if five.is_none() {
            if let Some(r) = bad_run {
                five = Some(fail(format!("{} n={}: {:?} vs rho {}", e.name, r.n, r.value, r.expected)));
            } else if el > Duration::from_secs(300) {
                five = Some(fail(format!("{}: {:.1}s exceeds 5 min", e.name, el.as_secs_f64())));
            }
        }
        if e.name == "k0_4_exp" && m.runs.iter().find(|r| r.n == 2).and_then(|r| r.value) != Some(6) {
            five.get_or_insert(fail("five-web instance is not rank 6"));
        }
        if six.is_none() && bad_run.is_none() && m.n_table_empirical != m.n_table_expected {
            six = Some(fail(format!("{}: {:?} vs {:?}", e.name, m.n_table_empirical, m.n_table_expected)));
        }
    }
    (
        five.unwrap_or_else(|| ok(format!("all families at rho, slowest {:.1}s", slowest.as_secs_f64()))),
        six.unwrap_or_else(|| ok("support tables match (3,2) and (6,8,3)")),
    )
}

#[derive(Debug, PartialEq)]
struct Verdicts {
    iv: Verdict,
    direct: Vec<Verdict>,
    ranks: Vec<Option<usize>>,
}

fn verdicts_of(e: &BalancedSet, seed: u64) -> Verdicts {
    let s = GenericPointSampler::new(seed);
    Verdicts {
        iv: check_condition_iv(e, &s, PREC).verdict,
        direct: [e.k0, e.k0 + 1]
            .iter()
            .map(|&n| check_ordinary_direct(e, n, &s, PREC).unwrap().verdict)
            .collect(),
        ranks: (2..=e.k0)
            .map(|n| {
                let want = rho(n as i64, e.k0 as i64).unwrap().try_into().unwrap();
                rank_run(e, n, want, &s, None, PREC).value
            })
            .collect(),
    }
}

/// Rank of an assembled web at the first regular, non-marginal sample.
fn web_rank(w: &AssembledWeb, k0: usize, seed: u64) -> Option<usize> {
    let (m_start, m_cap) = default_orders(k0);
    let mode = w.mode(PREC);
    let mut s = GenericPointSampler::new(seed);
    s.find(w.n, |p| {
        let est = rank_estimate(w, p, m_start, m_cap, mode).ok()?;
        (!est.marginal).then_some(est.value).flatten()
    })
    .map(|(_, v)| v)
}

fn criterion_7() -> Outcome {
    let names = ["k0_3_quadrics", "k0_3_moebius", "k0_4_WB", "k0_4_exp"];
    let mut checks = 0;
    for name in names {
        let (e, spec) = catalog::get_family(name).unwrap();
        let base = verdicts_of(&e, 0);
        if verdicts_of(&e, 12345) != base {
            return fail(format!("{name}: seed change altered verdicts"));
        }
        let k = e.k0;
        let last = e.web(k).integrals.len();
        for (kk, b) in [(1, 1), (k, last)] {
            let r = e.reparametrized(kk, b, cubic_reparametrization);
            if verdicts_of(&r, 0) != base {
                return fail(format!("{name}: u^3+u on T_{kk}[{b}] altered verdicts"));
            }
        }
        checks += 3;
        if spec.expected.quasi_symmetric {
            let n = e.k0;
            let w = assemble(&e, n);
            let sigma: Vec<usize> = (1..=n).rev().collect();
            let v = w.permuted(&sigma);
            let s = GenericPointSampler::new(0);
            let dw = check_web_direct(&w, name, &s, PREC).unwrap().verdict;
            let dv = check_web_direct(&v, name, &s, PREC).unwrap().verdict;
            let (rw, rv) = (web_rank(&w, e.k0, 0), web_rank(&v, e.k0, 0));
            if dw != dv || rw != rv || rw.is_none() {
                return fail(format!("{name}: permutation gives direct {dw}/{dv}, rank {rw:?}/{rv:?}"));
            }
            checks += 1;
        }
    }
    ok(format!("{checks} transformed runs match their base verdicts"))
}

/// Kernel dimension of `sum_i c_i l_i^m = 0` for planar linear forms `l_i`,
/// by elimination on the binomial coefficient matrix.
fn brute_force_kernel(forms: &[(i64, i64)], m: u32) -> usize {
    let mut rows: Vec<Vec<f64>> = (0..=m)
        .map(|j| {
            forms
                .iter()
                .map(|&(a, b)| choose(m as u128, j as u128) as f64 * (a as f64).powi((m - j) as i32) * (b as f64).powi(j as i32))
                .collect()
        })
        .collect();
    let cols = forms.len();
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).max_by(|&x, &y| rows[x][c].abs().total_cmp(&rows[y][c].abs())) else {
            break;
        };
        if rows[p][c].abs() < 1e-9 {
            continue;
        }
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank {
                let f = rows[r][c] / rows[rank][c];
                for cc in 0..cols {
                    rows[r][cc] -= f * rows[rank][cc];
                }
            }
        }
        rank += 1;
    }
    cols - rank
}

fn criterion_8() -> Outcome {
    let integrals = ["x1", "x2", "x1+x2", "x1-x2"].iter().map(|s| parse(s, 2).unwrap()).collect();
    let w = AssembledWeb::from_integrals(2, integrals);
    let (m_start, m_cap) = default_orders(w.k0);
    let origin = vec![Rational::from_integer(0.into()); 2];
    let est = rank_estimate(&w, &origin, m_start, m_cap, w.mode(PREC)).unwrap();
    let inc = est.increments();
    let got: Vec<i64> = (1..=3).map(|m| inc[&m]).collect();
    let forms = [(1, 0), (0, 1), (1, 1), (1, -1)];
    let oracle: Vec<i64> = (1..=3).map(|m| brute_force_kernel(&forms, m) as i64).collect();
    if got != oracle || oracle != [2, 1, 0] || est.value != Some(3) {
        return fail(format!("increments {got:?}, oracle {oracle:?}, rank {:?}", est.value));
    }
    ok("degree-wise kernel (2,1,0), rank 3")
}

fn print(n: &str, o: &Outcome, secs: f64) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {n}: {tag} ({}, {secs:.2}s)", o.detail);
}

fn main() -> ExitCode {
    let mut all = true;
    let singles: [(&str, fn() -> Outcome); 4] = [("1", criterion_1), ("2", criterion_2), ("3", criterion_3), ("4", criterion_4)];
    for (n, f) in singles {
        let t = Instant::now();
        let o = f();
        print(n, &o, t.elapsed().as_secs_f64());
        all &= o.pass;
    }
    let t = Instant::now();
    let (five, six) = criteria_5_and_6();
    let secs = t.elapsed().as_secs_f64();
    for (n, o) in [("5", five), ("6", six)] {
        print(n, &o, secs);
        all &= o.pass;
    }
    let rest: [(&str, fn() -> Outcome); 2] = [("7", criterion_7), ("8", criterion_8)];
    for (n, f) in rest {
        let t = Instant::now();
        let o = f();
        print(n, &o, t.elapsed().as_secs_f64());
        all &= o.pass;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
