//! Multi-indices, jet coefficients and the matrices `P_h`.
//!
//! Rows of `P_h` are the degree-`h` multi-indices grouped by support: first by
//! support size `k`, then by the lexicographic rank `a` of the support among
//! the `k`-subsets of `1..=n`, then by rank `b` inside the block. Inside a
//! block exponent vectors run in decreasing lexicographic order, so
//! `(2,1)` precedes `(1,2)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{eval, gradient, Expr};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::web::{multi_indices, AssembledWeb, Label, TkWeb};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// Exponent 1 at variable `j` (1-based).
    pub fn unit(n: usize, j: usize) -> Self {
        let mut v = vec![0; n];
        v[j - 1] = 1;
        MultiIndex(v)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Variables with positive exponent, 1-based and increasing.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// The label `(h, k, a, b)`: degree, support size, 1-based rank of the
    /// support among `k`-subsets, 1-based rank inside the support block.
    pub fn quadruple(&self) -> (u32, usize, usize, usize) {
        let h = self.degree();
        let support = self.support();
        let k = support.len();
        if k == 0 {
            return (0, 0, 1, 1);
        }
        let a = multi_indices(k, self.len())
            .expect("support fits")
            .iter()
            .position(|s| *s == support)
            .expect("support is a k-subset")
            + 1;
        let b = support_block(h, &support, self.len())
            .iter()
            .position(|m| m == self)
            .expect("index is in its own block")
            + 1;
        (h, k, a, b)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Compositions of `h` into `k` positive parts, decreasing lexicographically.
fn compositions(h: u32, k: usize) -> Vec<Vec<u32>> {
    if k == 0 {
        return if h == 0 { vec![vec![]] } else { vec![] };
    }
    if (h as usize) < k {
        return vec![];
    }
    if k == 1 {
        return vec![vec![h]];
    }
    let mut out = Vec::new();
    for first in (1..=h - (k as u32 - 1)).rev() {
        for mut rest in compositions(h - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Degree-`h` multi-indices in `n` variables with support exactly `support`.
pub fn support_block(h: u32, support: &[usize], n: usize) -> Vec<MultiIndex> {
    compositions(h, support.len())
        .into_iter()
        .map(|parts| {
            let mut v = vec![0; n];
            for (&j, e) in support.iter().zip(parts) {
                v[j - 1] = e;
            }
            MultiIndex(v)
        })
        .collect()
}

/// All degree-`h` multi-indices in `n` variables, in `(k, a, b)` order.
/// There are `c(n, h)` of them.
pub fn multi_indices_of_degree(n: usize, h: u32) -> Vec<MultiIndex> {
    if h == 0 {
        return vec![MultiIndex::zero(n)];
    }
    let mut out = Vec::new();
    for k in 1..=n.min(h as usize) {
        for support in multi_indices(k, n).expect("1 <= k <= n") {
            out.extend(support_block(h, &support, n));
        }
    }
    out
}

/// Degree-`h` multi-indices in `k` variables with every exponent at least 1.
pub fn positive_block(k: usize, h: u32) -> Vec<MultiIndex> {
    let all: Vec<usize> = (1..=k).collect();
    support_block(h, &all, k)
}

/// `prod_lambda gradient[lambda]^(l_lambda)`; zero exponents contribute 1.
pub fn jet_coefficient<S: Scalar>(gradient: &[S], l: &MultiIndex) -> S {
    assert_eq!(gradient.len(), l.len(), "gradient and multi-index lengths differ");
    gradient
        .iter()
        .zip(l.exponents())
        .filter(|(_, &e)| e > 0)
        .fold(S::one(), |acc, (g, &e)| acc * g.powi(e))
}

/// A matrix of jet coefficients with its row and column labels.
#[derive(Clone, Debug, PartialEq)]
pub struct JetMatrix<S> {
    pub rows: Vec<MultiIndex>,
    pub cols: Vec<Label>,
    pub matrix: Matrix<S>,
}

impl<S: Scalar> JetMatrix<S> {
    pub fn from_gradients(rows: Vec<MultiIndex>, cols: Vec<Label>, grads: &[Vec<S>]) -> Self {
        let data = rows
            .iter()
            .map(|l| grads.iter().map(|g| jet_coefficient(g, l)).collect())
            .collect::<Vec<Vec<S>>>();
        let mut matrix = Matrix::from_rows(data);
        if rows.is_empty() {
            matrix = Matrix::zeros(0, cols.len());
        }
        JetMatrix { rows, cols, matrix }
    }

    /// CSV with a header of column labels; the first column holds row
    /// multi-indices written as `l1;l2;...`. Exact entries are `p/q`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("L");
        for c in &self.cols {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (i, l) in self.rows.iter().enumerate() {
            let idx: Vec<String> = l.exponents().iter().map(|e| e.to_string()).collect();
            out.push_str(&idx.join(";"));
            for j in 0..self.cols.len() {
                out.push(',');
                out.push_str(&self.matrix.get(i, j).to_report_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Gradient of every integral, evaluated at `p`. Errors name the failing entry.
pub fn gradient_values<S: Scalar>(
    integrals: &[(Label, &Expr)],
    n: usize,
    p: &[S],
) -> Result<Vec<Vec<S>>> {
    integrals
        .iter()
        .map(|(label, u)| {
            // the integral itself must be defined at p, not only its derivatives
            eval(u, p).map_err(|e| Error::Singular(format!("entry {label}: {e}")))?;
            gradient(u, n)
                .iter()
                .map(|d| eval(d, p).map_err(|e| Error::Singular(format!("entry {label}: {e}"))))
                .collect()
        })
        .collect()
}

/// `P_h(W)` at `p`: `c(n,h)` rows in `(k,a,b)` order, one column per entry of `W`.
pub fn build_p<S: Scalar>(w: &AssembledWeb, h: u32, p: &[S]) -> Result<JetMatrix<S>> {
    let grads = gradient_values(&w.labeled_integrals(), w.n, p)?;
    Ok(build_p_from_gradients(w, h, &grads))
}

pub fn build_p_from_gradients<S: Scalar>(w: &AssembledWeb, h: u32, grads: &[Vec<S>]) -> JetMatrix<S> {
    let cols = w.entries.iter().map(|e| e.label).collect();
    JetMatrix::from_gradients(multi_indices_of_degree(w.n, h), cols, grads)
}

/// The square block of `T_k` at `p`: rows are degree-`k0` multi-indices in `k`
/// variables with all exponents positive, columns the integrals of `T_k`.
pub fn square_block<S: Scalar>(t: &TkWeb, k0: usize, p: &[S]) -> Result<JetMatrix<S>> {
    let labeled: Vec<(Label, &Expr)> = t
        .integrals
        .iter()
        .enumerate()
        .map(|(b, u)| (Label { k: t.k, a: 1, b: b + 1 }, u))
        .collect();
    let grads = gradient_values(&labeled, t.k, p)?;
    let cols = labeled.iter().map(|(l, _)| *l).collect();
    Ok(JetMatrix::from_gradients(positive_block(t.k, k0 as u32), cols, &grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combin::c_usize;
    use crate::scalar::Rational;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn q(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(jet_coefficient(&[q(1), q(1)], &mi(&[1, 1])), q(1));
        assert_eq!(jet_coefficient(&[q(2), q(2), q(2)], &mi(&[1, 1, 1])), q(8));
        assert_eq!(jet_coefficient(&[q(0), q(5)], &mi(&[0, 0])), q(1));
        assert_eq!(jet_coefficient(&[q(0), q(5)], &mi(&[0, 2])), q(25));
    }

    #[test]
    fn row_counts_match_c() {
        for n in 1..=5 {
            for h in 0..=6 {
                assert_eq!(multi_indices_of_degree(n, h).len(), c_usize(n, h as usize));
            }
        }
    }

    #[test]
    fn block_order() {
        assert_eq!(positive_block(2, 3), vec![mi(&[2, 1]), mi(&[1, 2])]);
        let rows = multi_indices_of_degree(2, 2);
        assert_eq!(rows, vec![mi(&[2, 0]), mi(&[0, 2]), mi(&[1, 1])]);
        assert_eq!(mi(&[1, 1]).quadruple(), (2, 2, 1, 1));
        assert_eq!(mi(&[0, 2]).quadruple(), (2, 1, 2, 1));
        assert_eq!(mi(&[0, 2, 1]).quadruple(), (3, 2, 3, 1));
    }

    #[test]
    fn positive_block_sizes() {
        // c(k, k0 - k) = binom(k0 - 1, k - 1)
        for k0 in 2..=6usize {
            for k in 1..=k0 {
                assert_eq!(positive_block(k, k0 as u32).len(), c_usize(k, k0 - k));
            }
        }
    }
}
