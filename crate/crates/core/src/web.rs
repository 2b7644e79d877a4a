//! Balanced sets, the assembled webs `W(n,E)`, and their validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::combin::c_usize;
use crate::error::{Error, Result};
use crate::expr::{eval, gradient, parse, vars_used, Expr};
use crate::jets::gradient_values;
use crate::report::{Verdict, VerificationReport};
use crate::sampler::GenericPointSampler;
use crate::scalar::{Mp128, Precision, Rational, Scalar, ScalarMode};

/// Confirmation points drawn after a negative finding at the first point.
pub const CONFIRMATIONS: usize = 3;

/// Position of an entry of `W(n,E)`: generating web `T_k`, rank `a` of the
/// coordinate subset among `k`-subsets, rank `b` of the integral in `T_k`.
/// `a` and `b` are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label {
    pub k: usize,
    pub a: usize,
    pub b: usize,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({};{};{})", self.k, self.a, self.b)
    }
}

/// A web in `k` variables given by its first integrals, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct TkWeb {
    pub k: usize,
    pub integrals: Vec<Expr>,
}

/// Candidate `k0`-balanced set `(T_1, ..., T_k0)`.
///
/// Construction only checks that `T_k` is written in `x1..xk`; cardinalities
/// and the remaining conditions are reported by [`validate_balanced`].
#[derive(Clone, Debug, PartialEq)]
pub struct BalancedSet {
    pub name: String,
    pub k0: usize,
    pub webs: Vec<TkWeb>,
}

/// JSON web-definition file: `{"k0": 3, "webs": [["x1"], ["x1+x2", ...], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WebDefinition {
    pub k0: usize,
    pub webs: Vec<Vec<String>>,
}

impl BalancedSet {
    pub fn new(name: impl Into<String>, k0: usize, webs: Vec<Vec<Expr>>) -> Result<Self> {
        if k0 < 2 {
            return Err(Error::InvalidFamily(format!("k0 = {k0}, need k0 >= 2")));
        }
        if webs.len() != k0 {
            return Err(Error::InvalidFamily(format!(
                "{} generating webs given, k0 = {k0} needs {k0}",
                webs.len()
            )));
        }
        let webs = webs
            .into_iter()
            .enumerate()
            .map(|(i, integrals)| {
                let k = i + 1;
                for u in &integrals {
                    if u.arity() > k {
                        return Err(Error::InvalidFamily(format!(
                            "T_{k} integral {u} uses x{}",
                            u.arity()
                        )));
                    }
                }
                Ok(TkWeb { k, integrals })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BalancedSet {
            name: name.into(),
            k0,
            webs,
        })
    }

    pub fn from_definition(name: impl Into<String>, def: &WebDefinition) -> Result<Self> {
        let webs = def
            .webs
            .iter()
            .enumerate()
            .map(|(i, list)| list.iter().map(|s| parse(s, i + 1)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, def.k0, webs)
    }

    pub fn from_json(name: impl Into<String>, text: &str) -> Result<Self> {
        let def: WebDefinition =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Self::from_definition(name, &def)
    }

    pub fn to_definition(&self) -> WebDefinition {
        WebDefinition {
            k0: self.k0,
            webs: self
                .webs
                .iter()
                .map(|t| t.integrals.iter().map(|u| u.to_string()).collect())
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_definition()).expect("definition serializes")
    }

    pub fn web(&self, k: usize) -> &TkWeb {
        &self.webs[k - 1]
    }

    pub fn is_rational(&self) -> bool {
        self.webs.iter().all(|t| t.integrals.iter().all(Expr::is_rational))
    }

    /// Exact when every integral is rational, else floats at `precision`.
    pub fn mode(&self, precision: Precision) -> ScalarMode {
        if self.is_rational() {
            ScalarMode::Exact
        } else {
            ScalarMode::Float(precision)
        }
    }

    /// Copy with integral `b` of `T_k` (both 1-based) replaced by `phi(u)`.
    pub fn reparametrized(&self, k: usize, b: usize, phi: impl Fn(Expr) -> Expr) -> Self {
        let mut out = self.clone();
        let slot = &mut out.webs[k - 1].integrals[b - 1];
        *slot = phi(slot.clone());
        out
    }
}

/// `u^3 + u`, a reparametrization with nonvanishing derivative everywhere.
pub fn cubic_reparametrization(u: Expr) -> Expr {
    Expr::sum([Expr::pow(u.clone(), 3), u])
}

#[derive(Clone, Debug, PartialEq)]
pub struct WebEntry {
    pub label: Label,
    pub integral: Expr,
    /// The coordinate subset `I` (1-based, increasing) the integral is pulled back along.
    pub source: Vec<usize>,
}

/// `W(n,E)`, entries sorted by label.
#[derive(Clone, Debug, PartialEq)]
pub struct AssembledWeb {
    pub n: usize,
    pub k0: usize,
    pub entries: Vec<WebEntry>,
}

impl AssembledWeb {
    /// A web given directly by integrals in `x1..xn`, labeled `(1,1,b)`.
    pub fn from_integrals(n: usize, integrals: Vec<Expr>) -> Self {
        let entries = integrals
            .into_iter()
            .enumerate()
            .map(|(b, integral)| WebEntry {
                label: Label { k: 1, a: 1, b: b + 1 },
                integral,
                source: (1..=n).collect(),
            })
            .collect::<Vec<_>>();
        let d = entries.len();
        // k0 only matters for default jet orders; c(1,h) = 1 never exceeds d
        let k0 = if n < 2 {
            d.max(1)
        } else {
            (1..).find(|&k| c_usize(n, k + 1) > d).unwrap_or(1)
        };
        AssembledWeb { n, k0, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labeled_integrals(&self) -> Vec<(Label, &Expr)> {
        self.entries.iter().map(|e| (e.label, &e.integral)).collect()
    }

    pub fn is_rational(&self) -> bool {
        self.entries.iter().all(|e| e.integral.is_rational())
    }

    pub fn mode(&self, precision: Precision) -> ScalarMode {
        if self.is_rational() {
            ScalarMode::Exact
        } else {
            ScalarMode::Float(precision)
        }
    }

    /// Renames ambient variables: `x_j` becomes `x_{sigma[j-1]}`.
    pub fn permuted(&self, sigma: &[usize]) -> Self {
        assert_eq!(sigma.len(), self.n);
        let f = |j: usize| sigma[j - 1];
        AssembledWeb {
            n: self.n,
            k0: self.k0,
            entries: self
                .entries
                .iter()
                .map(|e| WebEntry {
                    label: e.label,
                    integral: e.integral.rename_vars(&f),
                    source: {
                        let mut s: Vec<usize> = e.source.iter().map(|&j| f(j)).collect();
                        s.sort_unstable();
                        s
                    },
                })
                .collect(),
        }
    }

    /// Copy with entry `index` (0-based) replaced by `phi(u)`.
    pub fn reparametrized(&self, index: usize, phi: impl Fn(Expr) -> Expr) -> Self {
        let mut out = self.clone();
        let e = &mut out.entries[index];
        e.integral = phi(e.integral.clone());
        out
    }
}

/// The `k`-subsets of `1..=n` as increasing tuples, in lexicographic order.
pub fn multi_indices(k: usize, n: usize) -> Result<Vec<Vec<usize>>> {
    if k < 1 || k > n {
        return Err(Error::Domain(format!("multi_indices needs 1 <= k <= n, got k={k}, n={n}")));
    }
    Ok(subsets(k, n))
}

/// Like [`multi_indices`] but also accepts `k = 0`.
fn subsets(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - (k - 1 - i) {
                break;
            }
        }
        cur[i] += 1;
        for t in i + 1..k {
            cur[t] = cur[t - 1] + 1;
        }
    }
}

/// `W(n,E)`: every integral of `T_k`, `k <= min(n,k0)`, pulled back along
/// every coordinate projection onto a `k`-subset.
pub fn assemble(e: &BalancedSet, n: usize) -> AssembledWeb {
    let mut entries = Vec::new();
    for t in e.webs.iter().take(n.min(e.k0)) {
        for (a, idx) in subsets(t.k, n).into_iter().enumerate() {
            for (b, u) in t.integrals.iter().enumerate() {
                let integral = u.substitute(&|j| Expr::Var(idx[j - 1]));
                entries.push(WebEntry {
                    label: Label { k: t.k, a: a + 1, b: b + 1 },
                    integral,
                    source: idx.clone(),
                });
            }
        }
    }
    AssembledWeb { n, k0: e.k0, entries }
}

/// True when the two gradients are proportional (including a zero one).
/// Floats compare all 2x2 minors against `2^(-bits/2) |g| |h|`.
pub(crate) fn proportional<S: Scalar>(g: &[S], h: &[S]) -> bool {
    let max_log = |v: &[S]| v.iter().map(|x| x.log2_abs()).fold(f64::NEG_INFINITY, f64::max);
    let tol = match S::PRECISION {
        None => None,
        Some(bits) => Some(max_log(g) + max_log(h) - bits as f64 / 2.0),
    };
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            let m = g[i].clone() * h[j].clone() - g[j].clone() * h[i].clone();
            let zero = match tol {
                None => m.is_zero(),
                Some(t) => m.is_zero() || m.log2_abs() <= t,
            };
            if !zero {
                return false;
            }
        }
    }
    true
}

fn is_zero_vector<S: Scalar>(g: &[S]) -> bool {
    match S::PRECISION {
        None => g.iter().all(|x| x.is_zero()),
        Some(_) => g.iter().all(|x| x.is_zero() || x.log2_abs() < -(S::PRECISION.unwrap() as f64) / 2.0),
    }
}

fn point_strings(p: &[Rational]) -> Vec<String> {
    p.iter().map(|q| q.to_string()).collect()
}

/// Gradients at `p` when every integral is defined there with a nonzero
/// differential, else `None`.
fn regular_gradients<S: Scalar>(integrals: &[(Label, &Expr)], n: usize, p: &[Rational]) -> Option<Vec<Vec<S>>> {
    let pt: Vec<S> = p.iter().map(S::from_rational).collect();
    let grads = gradient_values(integrals, n, &pt).ok()?;
    if grads.iter().any(|g| is_zero_vector(g)) {
        return None;
    }
    Some(grads)
}

fn proportional_pairs<S: Scalar>(grads: &[Vec<S>], among: &BTreeSet<(usize, usize)>) -> BTreeSet<(usize, usize)> {
    among
        .iter()
        .copied()
        .filter(|&(i, j)| proportional(&grads[i], &grads[j]))
        .collect()
}

fn web_condition_in<S: Scalar>(
    w: &AssembledWeb,
    sampler: &GenericPointSampler,
) -> (Verdict, String) {
    let integrals = w.labeled_integrals();
    let mut s = sampler.fork(&format!("validate/web/{}", w.n));
    let all: BTreeSet<(usize, usize)> = (0..w.len())
        .flat_map(|i| (i + 1..w.len()).map(move |j| (i, j)))
        .collect();
    let Some((p, grads)) = s.find(w.n, |p| regular_gradients::<S>(&integrals, w.n, p)) else {
        return (
            Verdict::Inconclusive,
            format!("no regular point found in {} attempts", s.max_retries()),
        );
    };
    let mut failing = proportional_pairs(&grads, &all);
    let mut points = vec![point_strings(&p)];
    let mut confirmations = 0;
    while !failing.is_empty() && confirmations < CONFIRMATIONS {
        let Some((p, grads)) = s.find(w.n, |p| regular_gradients::<S>(&integrals, w.n, p)) else {
            break;
        };
        failing = proportional_pairs(&grads, &failing);
        points.push(point_strings(&p));
        confirmations += 1;
    }
    if failing.is_empty() {
        (
            Verdict::True,
            format!("{} differentials pairwise independent at {:?}", w.len(), points.last().unwrap()),
        )
    } else if confirmations < CONFIRMATIONS {
        (
            Verdict::Inconclusive,
            format!("proportional pairs at {:?}, confirmation points not found", points),
        )
    } else {
        let pairs: Vec<String> = failing
            .iter()
            .map(|&(i, j)| format!("{}~{}", w.entries[i].label, w.entries[j].label))
            .collect();
        (
            Verdict::False,
            format!("proportional differentials {} at {:?}", pairs.join(", "), points),
        )
    }
}

/// Checks cardinalities, that each integral of `T_k` uses all `k` variables,
/// and that the differentials of `W(n_check, E)` are pairwise independent at a
/// sampled point. Independence failures are confirmed at further points.
pub fn validate_balanced(e: &BalancedSet, n_check: usize, sampler: &GenericPointSampler) -> VerificationReport {
    let mut report = VerificationReport::new(&e.name, sampler.seed());
    for t in &e.webs {
        let want = c_usize(t.k, e.k0 - t.k);
        let got = t.integrals.len();
        report.push(
            format!("cardinality T_{}", t.k),
            Verdict::from_bool(got == want),
            format!("{got} integrals, c({},{}) = {want}", t.k, e.k0 - t.k),
        );
        for (b, u) in t.integrals.iter().enumerate() {
            let used = vars_used(u);
            let full: BTreeSet<usize> = (1..=t.k).collect();
            let ok = used == full;
            report.push(
                format!("variables T_{}[{}]", t.k, b + 1),
                Verdict::from_bool(ok),
                if ok {
                    format!("{u} uses x1..x{}", t.k)
                } else {
                    format!("{u} depends only on {used:?}")
                },
            );
        }
    }
    let w = assemble(e, n_check);
    let (verdict, detail) = if e.is_rational() {
        web_condition_in::<Rational>(&w, sampler)
    } else {
        web_condition_in::<Mp128>(&w, sampler)
    };
    report.push(format!("web condition n={n_check}"), verdict, detail);
    report
}

/// Per-`k` result of the transposition test; verdicts are probabilistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiSymmetry {
    pub per_k: BTreeMap<usize, bool>,
    pub trials: usize,
}

impl QuasiSymmetry {
    pub fn holds(&self) -> bool {
        self.per_k.values().all(|&b| b)
    }

    pub fn summary(&self) -> &'static str {
        if self.holds() {
            "probably yes"
        } else {
            "probably no"
        }
    }
}

fn tk_invariant<S: Scalar>(t: &TkWeb, trials: usize, sampler: &mut GenericPointSampler) -> bool {
    let k = t.k;
    let grads: Vec<Vec<Expr>> = t.integrals.iter().map(|u| gradient(u, k)).collect();
    for j in 1..k {
        let swap = |i: usize| {
            if i == j {
                j + 1
            } else if i == j + 1 {
                j
            } else {
                i
            }
        };
        for u in &t.integrals {
            let moved = gradient(&u.rename_vars(&swap), k);
            let mut candidates: Vec<usize> = (0..t.integrals.len()).collect();
            let mut done = 0;
            for _ in 0..sampler.max_retries() {
                if done == trials || candidates.is_empty() {
                    break;
                }
                let p: Vec<S> = sampler.next_point(k).iter().map(S::from_rational).collect();
                let eval_all = |gs: &[Expr]| -> Option<Vec<S>> { gs.iter().map(|d| eval(d, &p).ok()).collect() };
                let Some(gm) = eval_all(&moved) else { continue };
                let Some(gv) = grads.iter().map(|g| eval_all(g)).collect::<Option<Vec<_>>>() else {
                    continue;
                };
                if is_zero_vector(&gm) || gv.iter().any(|g| is_zero_vector(g)) {
                    continue;
                }
                candidates.retain(|&c| proportional(&gm, &gv[c]));
                done += 1;
            }
            if candidates.is_empty() || done == 0 {
                return false;
            }
        }
    }
    true
}

/// Tests whether each `T_k` maps to itself, as a set of foliations, under
/// every adjacent transposition of its variables, by gradient proportionality
/// at `trials` sampled points.
pub fn is_quasi_symmetric(e: &BalancedSet, trials: usize, sampler: &GenericPointSampler) -> QuasiSymmetry {
    let per_k = e
        .webs
        .iter()
        .map(|t| {
            let mut s = sampler.fork(&format!("quasi-symmetry/{}", t.k));
            let ok = if t.integrals.iter().all(Expr::is_rational) {
                tk_invariant::<Rational>(t, trials, &mut s)
            } else {
                tk_invariant::<Mp128>(t, trials, &mut s)
            };
            (t.k, ok)
        })
        .collect();
    QuasiSymmetry { per_k, trials }
}

/// Balanced set generated by specializing trailing arguments of `f` to marked
/// points: `T_k` holds `f(x1..xk, m_{i1}, ..., m_{i(k0-k)})` for every
/// increasing choice `i1 < ... < i(k0-k)` from `1..k0-1`, in lexicographic order.
pub fn cross_ratio_family(name: &str, f: &Expr, marks: &[Rational]) -> Result<BalancedSet> {
    let k0 = marks.len() + 1;
    if k0 < 2 {
        return Err(Error::InvalidFamily("need at least one marked point".into()));
    }
    if f.arity() > k0 {
        return Err(Error::InvalidFamily(format!("f uses x{}, more than k0 = {k0}", f.arity())));
    }
    let distinct: BTreeSet<&Rational> = marks.iter().collect();
    if distinct.len() != marks.len() {
        return Err(Error::InvalidFamily("marked points must be distinct".into()));
    }
    let mut webs = Vec::with_capacity(k0);
    for k in 1..=k0 {
        let mut t = Vec::new();
        for choice in subsets(k0 - k, k0 - 1) {
            let u = f.substitute(&|j| {
                if j <= k {
                    Expr::Var(j)
                } else {
                    Expr::constant(marks[choice[j - k - 1] - 1].clone())
                }
            });
            if !defined_somewhere(&u, k) {
                return Err(Error::InvalidFamily(format!(
                    "T_{k} integral {u} is undefined at every sampled point"
                )));
            }
            t.push(u);
        }
        webs.push(t);
    }
    BalancedSet::new(name, k0, webs)
}

fn defined_somewhere(u: &Expr, k: usize) -> bool {
    let mut s = GenericPointSampler::new(0);
    (0..8).any(|_| {
        let p = s.next_point(k);
        if u.is_rational() {
            eval::<Rational>(u, &p).is_ok()
        } else {
            let pf: Vec<Mp128> = p.iter().map(Mp128::from_rational).collect();
            eval(u, &pf).is_ok()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadrics() -> BalancedSet {
        BalancedSet::from_definition(
            "quadrics",
            &WebDefinition {
                k0: 3,
                webs: vec![
                    vec!["x1".into()],
                    vec!["x1+x2".into(), "x1-x2".into()],
                    vec!["x1^2+x2^2+x3^2".into()],
                ],
            },
        )
        .unwrap()
    }

    #[test]
    fn subsets_in_lexicographic_order() {
        assert_eq!(multi_indices(2, 3).unwrap(), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(multi_indices(3, 3).unwrap(), vec![vec![1, 2, 3]]);
        assert_eq!(multi_indices(1, 4).unwrap().len(), 4);
        assert!(multi_indices(0, 3).is_err());
        assert!(multi_indices(4, 3).is_err());
        assert_eq!(subsets(0, 3), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn assembled_counts() {
        let e = quadrics();
        assert_eq!(assemble(&e, 2).len(), 4);
        assert_eq!(assemble(&e, 3).len(), 10);
        assert_eq!(assemble(&e, 4).len(), 20);
        let w = assemble(&e, 3);
        assert!(w.entries.windows(2).all(|p| p[0].label < p[1].label));
        assert_eq!(w.entries[6].integral.to_string(), "x1 - x3");
    }

    #[test]
    fn quadrics_validate() {
        let r = validate_balanced(&quadrics(), 3, &GenericPointSampler::new(0));
        assert_eq!(r.verdict, Verdict::True, "{r:?}");
    }

    #[test]
    fn duplicate_foliation_fails() {
        let mut e = quadrics();
        e.webs[1].integrals[1] = parse("2*x1+2*x2", 2).unwrap();
        let r = validate_balanced(&e, 3, &GenericPointSampler::new(0));
        assert_eq!(r.verdict, Verdict::False);
        assert!(r.failures().any(|c| c.label.starts_with("web condition")));
    }

    #[test]
    fn missing_variable_fails() {
        let mut e = quadrics();
        e.webs[1].integrals = vec![parse("x1", 2).unwrap()];
        let r = validate_balanced(&e, 3, &GenericPointSampler::new(0));
        assert_eq!(r.verdict, Verdict::False);
        let labels: Vec<&str> = r.failures().map(|c| c.label.as_str()).collect();
        assert!(labels.contains(&"cardinality T_2"));
        assert!(labels.contains(&"variables T_2[1]"));
    }

    #[test]
    fn quasi_symmetry_examples() {
        let s = GenericPointSampler::new(0);
        assert!(is_quasi_symmetric(&quadrics(), 3, &s).holds());
        let mut e = quadrics();
        e.webs[1].integrals = vec![parse("x1+2*x2", 2).unwrap(), parse("x1*x2", 2).unwrap()];
        let q = is_quasi_symmetric(&e, 3, &s);
        assert_eq!(q.per_k[&1], true);
        assert_eq!(q.per_k[&2], false);
        assert_eq!(q.summary(), "probably no");
    }

    #[test]
    fn cross_ratio_generator() {
        let f = parse("(x1-x3)/(x2-x3)", 3).unwrap();
        let marks = [Rational::from_integer(0.into()), Rational::from_integer(1.into())];
        let e = cross_ratio_family("cr", &f, &marks).unwrap();
        assert_eq!(e.web(2).integrals.len(), 2);
        assert_eq!(e.web(2).integrals[0].to_string(), "x1/x2");
        assert_eq!(validate_balanced(&e, 3, &GenericPointSampler::new(0)).verdict, Verdict::True);
        let dup = [marks[0].clone(), marks[0].clone()];
        assert!(cross_ratio_family("cr", &f, &dup).is_err());
    }

    #[test]
    fn translates_fail_validation() {
        let f = parse("x1+x2+x3", 3).unwrap();
        let marks = [Rational::from_integer(0.into()), Rational::from_integer(1.into())];
        let e = cross_ratio_family("sum", &f, &marks).unwrap();
        let r = validate_balanced(&e, 3, &GenericPointSampler::new(0));
        assert_eq!(r.verdict, Verdict::False);
    }

    #[test]
    fn json_round_trip() {
        let e = quadrics();
        let back = BalancedSet::from_json("quadrics", &e.to_json()).unwrap();
        assert_eq!(back, e);
        assert!(BalancedSet::from_json("x", "{\"k0\": 2, \"webs\": [[\"x1\"], [\"x3\"]]}").is_err());
    }
}
