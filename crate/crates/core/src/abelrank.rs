//! Dimensions of abelian-relation spaces from truncated jets.
//!
//! A relation is `sum_i g_i(u_i) = const` with `g_i(t) = sum_m gamma_{i,m}
//! (t - u_i(p))^m`. Writing `D_i = u_i - u_i(p)`, the order-`M` kernel is the
//! set of `gamma_{i,1..M}` whose combination `sum gamma_{i,m} D_i^m` has no
//! Taylor terms of degree `1..=M` at `p`.
//!
//! Degree-`M` coefficients involve no `gamma_{i,m}` with `m > M`, so the
//! order-`M` kernel restricted to `m < M` lies in the order-`(M-1)` kernel. We
//! therefore solve degree by degree: unknowns are coordinates on the previous
//! kernel basis plus the new `gamma_{i,M}`, equations are the degree-`M`
//! coefficients only.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combin::{decimal_map, n_table, rho, support_recursion};
use crate::error::{Error, Result};
use crate::expr::{taylor, TruncatedPoly};
use crate::jets::{multi_indices_of_degree, MultiIndex};
use crate::linalg::{nullspace, Matrix};
use crate::report::{Verdict, VerificationReport};
use crate::sampler::GenericPointSampler;
use crate::scalar::{Precision, Rational, Scalar, ScalarMode};
use crate::web::{assemble, proportional, AssembledWeb, BalancedSet, CONFIRMATIONS};
use crate::with_scalar;

/// A relation jet: `gamma[i][m-1]` is the coefficient of `(u_i - u_i(p))^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationJet<S> {
    pub point: Vec<S>,
    pub order: u32,
    pub gamma: Vec<Vec<S>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEstimate {
    /// Kernel dimension at each order `M`.
    pub dims: BTreeMap<u32, usize>,
    pub stabilized_at: Option<u32>,
    /// Set only when `dims[M] = dims[M+1]` for some `m_start <= M < cap`.
    pub value: Option<usize>,
    pub mode: String,
    pub point: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_gap_log2: Option<f64>,
    pub marginal: bool,
}

impl RankEstimate {
    /// `dims[M] - dims[M-1]`: relations whose lowest new term has degree `M`.
    pub fn increments(&self) -> BTreeMap<u32, i64> {
        let mut prev = 0i64;
        self.dims
            .iter()
            .map(|(&m, &d)| {
                let inc = d as i64 - prev;
                prev = d as i64;
                (m, inc)
            })
            .collect()
    }
}

pub(crate) struct Trace<S> {
    pub dims: Vec<usize>,
    pub relations: Vec<RelationJet<S>>,
    pub min_gap_log2: Option<f64>,
    pub marginal: bool,
}

/// Degree-`M` homogeneous part of `poly` as a dense vector over `rows`.
fn scatter<S: Scalar>(poly: &TruncatedPoly<S>, m: u32, rows: &BTreeMap<MultiIndex, usize>, out: &mut [S], scale: &S) {
    for (idx, c) in poly.homogeneous(m) {
        out[rows[idx]].add_product(c, scale);
    }
}

/// Kernel dimensions for orders `1..=upto` at `p`.
pub(crate) fn kernel_trace<S: Scalar>(w: &AssembledWeb, p: &[S], upto: u32) -> Result<Trace<S>> {
    let n = w.n;
    let d = w.len();
    let series: Vec<TruncatedPoly<S>> = w
        .entries
        .par_iter()
        .map(|e| {
            taylor(&e.integral, p, upto)
                .map(|t| t.without_constant())
                .map_err(|err| Error::Singular(format!("entry {}: {err}", e.label)))
        })
        .collect::<Result<_>>()?;

    // genericity: nonzero, pairwise independent differentials at p
    let linear: Vec<Vec<S>> = series
        .iter()
        .map(|s| (1..=n).map(|j| s.coefficient(&MultiIndex::unit(n, j))).collect())
        .collect();
    for i in 0..d {
        for j in i + 1..d {
            if proportional(&linear[i], &linear[j]) {
                return Err(Error::Singular(format!(
                    "differentials of {} and {} are dependent at the base point",
                    w.entries[i].label, w.entries[j].label
                )));
            }
        }
    }

    // powers[i][m-1] = D_i^m
    let powers: Vec<Vec<TruncatedPoly<S>>> = series
        .par_iter()
        .map(|s| {
            let mut out = Vec::with_capacity(upto as usize);
            let mut acc = s.clone();
            for m in 1..=upto {
                if m > 1 {
                    acc = acc.mul(s);
                }
                out.push(acc.clone());
            }
            out
        })
        .collect();

    let mut basis: Vec<Vec<Vec<S>>> = Vec::new();
    let mut dims = Vec::with_capacity(upto as usize);
    let mut min_gap: Option<f64> = None;
    let mut marginal = false;
    for m in 1..=upto {
        let row_list = multi_indices_of_degree(n, m);
        let rows: BTreeMap<MultiIndex, usize> = row_list.into_iter().enumerate().map(|(i, l)| (l, i)).collect();
        let nrows = rows.len();
        let kprev = basis.len();
        let mut cols: Vec<Vec<S>> = basis
            .par_iter()
            .map(|v| {
                let mut col = vec![S::zero(); nrows];
                for (i, gi) in v.iter().enumerate() {
                    for (mm, g) in gi.iter().enumerate() {
                        if !g.is_zero() {
                            scatter(&powers[i][mm], m, &rows, &mut col, g);
                        }
                    }
                }
                col
            })
            .collect();
        for pw in powers.iter() {
            let mut col = vec![S::zero(); nrows];
            scatter(&pw[m as usize - 1], m, &rows, &mut col, &S::one());
            cols.push(col);
        }
        let ncols = cols.len();
        let mut mat = Matrix::zeros(nrows, ncols);
        for (j, col) in cols.into_iter().enumerate() {
            for (i, v) in col.into_iter().enumerate() {
                mat.set(i, j, v);
            }
        }
        let kernel = nullspace(&mat, S::PRECISION);
        if let Some(f) = &kernel.float {
            marginal |= f.marginal;
            if let Some(g) = f.gap_log2 {
                min_gap = Some(min_gap.map_or(g, |x: f64| x.min(g)));
            }
        }
        let next: Vec<Vec<Vec<S>>> = kernel
            .basis
            .iter()
            .map(|z| {
                let mut v: Vec<Vec<S>> = vec![vec![S::zero(); m as usize]; d];
                for (j, b) in basis.iter().enumerate() {
                    if z[j].is_zero() {
                        continue;
                    }
                    for i in 0..d {
                        for mm in 0..(m as usize - 1) {
                            v[i][mm].add_product(&z[j], &b[i][mm]);
                        }
                    }
                }
                for i in 0..d {
                    v[i][m as usize - 1] = z[kprev + i].clone();
                }
                let mut flat: Vec<S> = v.concat();
                S::normalize_direction(&mut flat);
                flat.chunks(m as usize).map(|c| c.to_vec()).collect()
            })
            .collect();
        dims.push(next.len());
        basis = next;
    }
    let relations = basis
        .into_iter()
        .map(|gamma| RelationJet {
            point: p.to_vec(),
            order: upto,
            gamma,
        })
        .collect();
    Ok(Trace {
        dims,
        relations,
        min_gap_log2: min_gap,
        marginal,
    })
}

fn first_stable(dims: &[usize], m_start: u32) -> Option<u32> {
    (m_start.max(1)..dims.len() as u32).find(|&m| dims[m as usize - 1] == dims[m as usize])
}

fn estimate_in<S: Scalar>(w: &AssembledWeb, p: &[Rational], m_start: u32, m_cap: u32) -> Result<RankEstimate> {
    let pt: Vec<S> = p.iter().map(S::from_rational).collect();
    // cheap attempt first: most webs stabilize right at m_start
    let mut tries = vec![(m_start + 1).min(m_cap)];
    if m_cap > tries[0] {
        tries.push(m_cap);
    }
    let mut last = None;
    for upto in tries {
        let t = kernel_trace(w, &pt, upto)?;
        let stabilized_at = first_stable(&t.dims, m_start);
        let est = RankEstimate {
            dims: t.dims.iter().enumerate().map(|(i, &v)| (i as u32 + 1, v)).collect(),
            stabilized_at,
            value: stabilized_at.map(|m| t.dims[m as usize - 1]),
            mode: match S::PRECISION {
                None => "exact".into(),
                Some(b) => format!("float{b}"),
            },
            point: p.iter().map(|q| q.to_string()).collect(),
            min_gap_log2: t.min_gap_log2,
            marginal: t.marginal,
        };
        if est.value.is_some() {
            return Ok(est);
        }
        last = Some(est);
    }
    Ok(last.expect("at least one attempt"))
}

/// Kernel dimensions at `p` for orders `1..`, stopping at the first `M >=
/// m_start` with `dims[M] = dims[M+1]` or at `m_cap`. Float mode climbs the
/// precision ladder while kernel decisions are marginal.
pub fn rank_estimate(w: &AssembledWeb, p: &[Rational], m_start: u32, m_cap: u32, mode: ScalarMode) -> Result<RankEstimate> {
    if p.len() != w.n {
        return Err(Error::PointTooShort { got: p.len(), need: w.n });
    }
    match mode {
        ScalarMode::Exact => estimate_in::<Rational>(w, p, m_start, m_cap),
        ScalarMode::Float(start) => {
            let mut last = None;
            for prec in start.ladder() {
                let est = with_scalar!(ScalarMode::Float(prec), S => estimate_in::<S>(w, p, m_start, m_cap))?;
                if !est.marginal {
                    return Ok(est);
                }
                last = Some(est);
            }
            Ok(last.expect("ladder is nonempty"))
        }
    }
}

/// Relation jets spanning the order-`order` kernel at `p`.
pub fn relation_jets<S: Scalar>(w: &AssembledWeb, p: &[S], order: u32) -> Result<Vec<RelationJet<S>>> {
    Ok(kernel_trace(w, p, order)?.relations)
}

/// Default jet orders for a `k0`-balanced family: start `k0+1`, cap `k0+5`.
pub fn default_orders(k0: usize) -> (u32, u32) {
    (k0 as u32 + 1, k0 as u32 + 5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankRun {
    pub n: usize,
    pub expected: usize,
    pub verdict: Verdict,
    pub value: Option<usize>,
    /// Every estimate computed, the deciding one last.
    pub estimates: Vec<RankEstimate>,
}

/// Rank of `W(n,E)` at sampled points against `expected`, with the same
/// confirmation policy as the ordinariness checks.
pub fn rank_run(
    e: &BalancedSet,
    n: usize,
    expected: usize,
    sampler: &GenericPointSampler,
    m_cap: Option<u32>,
    precision: Precision,
) -> RankRun {
    let w = assemble(e, n);
    let (m_start, default_cap) = default_orders(e.k0);
    let m_cap = m_cap.unwrap_or(default_cap).max(m_start + 1);
    let mode = w.mode(precision);
    let mut s = sampler.fork(&format!("rank/n{n}"));
    let mut estimates: Vec<RankEstimate> = Vec::new();
    let mut checked = 0;
    while checked < 1 + CONFIRMATIONS {
        let found = s.find(n, |p| {
            let est = rank_estimate(&w, p, m_start, m_cap, mode).ok()?;
            (!est.marginal).then_some(est)
        });
        let Some((_, est)) = found else {
            return RankRun {
                n,
                expected,
                verdict: Verdict::Inconclusive,
                value: estimates.last().and_then(|e| e.value),
                estimates,
            };
        };
        checked += 1;
        let value = est.value;
        estimates.push(est);
        if value == Some(expected) {
            return RankRun {
                n,
                expected,
                verdict: Verdict::True,
                value,
                estimates,
            };
        }
    }
    let verdict = if estimates.iter().all(|e| e.value.is_some()) {
        Verdict::False
    } else {
        Verdict::Inconclusive
    };
    RankRun {
        n,
        expected,
        verdict,
        value: estimates.last().and_then(|e| e.value),
        estimates,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportDecomposition {
    /// `r(h)`: rank of `W(h,E)`.
    pub ranks: BTreeMap<usize, Option<usize>>,
    /// Exact-support dimensions from the recursion; empty if a rank is missing.
    #[serde(with = "decimal_map")]
    pub delta_n: BTreeMap<i64, BigInt>,
}

fn decompose(ranks: &BTreeMap<usize, Option<usize>>) -> Result<BTreeMap<i64, BigInt>> {
    let known: Option<BTreeMap<i64, BigInt>> = ranks
        .iter()
        .map(|(&h, r)| r.map(|v| (h as i64, BigInt::from(v))))
        .collect();
    match known {
        Some(k) => support_recursion(&k),
        None => Ok(BTreeMap::new()),
    }
}

/// Measured `r(h)` for `h = 2..=min(n,k0)` and the resulting `Delta N(h)`.
pub fn support_decomposition(
    e: &BalancedSet,
    n: usize,
    sampler: &GenericPointSampler,
    m_cap: Option<u32>,
    precision: Precision,
) -> Result<SupportDecomposition> {
    let runs: Vec<RankRun> = (2..=n.min(e.k0))
        .into_par_iter()
        .map(|h| -> Result<RankRun> {
            let expected = crate::combin::to_usize(&rho(h as i64, e.k0 as i64)?)?;
            Ok(rank_run(e, h, expected, sampler, m_cap, precision))
        })
        .collect::<Result<_>>()?;
    let ranks = runs.iter().map(|r| (r.n, r.value)).collect();
    let delta_n = decompose(&ranks)?;
    Ok(SupportDecomposition { ranks, delta_n })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxRankReport {
    pub report: VerificationReport,
    pub runs: Vec<RankRun>,
    #[serde(with = "decimal_map")]
    pub n_table_empirical: BTreeMap<i64, BigInt>,
    #[serde(with = "decimal_map")]
    pub n_table_expected: BTreeMap<i64, BigInt>,
    /// Set when the finite check licenses maximal rank for every `n`.
    pub all_n: bool,
}

/// Ranks of `W(n,E)` for `n = 2..=k0` against `rho(n,k0)`, plus the
/// exact-support table. `corroborate` adds `n = k0+1`.
pub fn verify_max_rank(
    e: &BalancedSet,
    sampler: &GenericPointSampler,
    m_cap: Option<u32>,
    precision: Precision,
    corroborate: bool,
) -> Result<MaxRankReport> {
    let top = if corroborate { e.k0 + 1 } else { e.k0 };
    let expected: Vec<(usize, usize)> = (2..=top)
        .map(|n| Ok((n, crate::combin::to_usize(&rho(n as i64, e.k0 as i64)?)?)))
        .collect::<Result<_>>()?;
    let runs: Vec<RankRun> = expected
        .par_iter()
        .map(|&(n, want)| rank_run(e, n, want, sampler, m_cap, precision))
        .collect();

    let mut report = VerificationReport::new(&e.name, sampler.seed());
    for r in &runs {
        let trace = r
            .estimates
            .last()
            .map(|est| format!("dims {:?}", est.dims.values().collect::<Vec<_>>()))
            .unwrap_or_default();
        let got = r.value.map_or("none".to_string(), |v| v.to_string());
        report.push(
            format!("rank n={}", r.n),
            r.verdict,
            format!("rank {got}, rho({},{}) = {}; {trace}", r.n, e.k0, r.expected),
        );
    }
    let ranks: BTreeMap<usize, Option<usize>> = runs
        .iter()
        .filter(|r| r.n <= e.k0)
        .map(|r| (r.n, r.value))
        .collect();
    let empirical = decompose(&ranks)?;
    let table = n_table(e.k0 as i64, e.k0 as i64)?;
    let matches = !empirical.is_empty() && empirical == table.n_values;
    let support_verdict = if empirical.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(matches)
    };
    report.push(
        "support decomposition",
        support_verdict,
        format!(
            "empirical {:?}, expected {:?}",
            empirical.values().map(|v| v.to_string()).collect::<Vec<_>>(),
            table.n_values.values().map(|v| v.to_string()).collect::<Vec<_>>()
        ),
    );
    let all_n = report.verdict == Verdict::True;
    Ok(MaxRankReport {
        report,
        runs,
        n_table_empirical: empirical,
        n_table_expected: table.n_values,
        all_n,
    })
}
