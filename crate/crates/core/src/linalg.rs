//! Dense matrices, exact and thresholded rank, and kernels.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::scalar::{Rational, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Sub-matrix on the given row and column positions.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Matrix::from_rows(
            rows.iter()
                .map(|&i| cols.iter().map(|&j| self.get(i, j).clone()).collect())
                .collect(),
        )
        .with_shape(rows.len(), cols.len())
    }

    fn with_shape(mut self, rows: usize, cols: usize) -> Self {
        self.rows = rows;
        self.cols = cols;
        self
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }
}

/// Rank by fraction-free (Bareiss) elimination on integer-cleared rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactRank {
    pub rank: usize,
    pub pivots: Vec<(usize, usize)>,
    /// Present for square matrices; zero when singular.
    pub determinant: Option<Rational>,
}

/// Rows multiplied by the lcm of their denominators, and the product of
/// those multipliers.
fn integer_rows(m: &Matrix<Rational>) -> (Vec<Vec<BigInt>>, BigInt) {
    let mut scale = BigInt::one();
    let a = (0..m.rows)
        .map(|i| {
            let l = m
                .row(i)
                .iter()
                .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
            scale *= &l;
            m.row(i)
                .iter()
                .map(|q| q.numer() * (&l / q.denom()))
                .collect()
        })
        .collect();
    (a, scale)
}

pub fn exact_rank(m: &Matrix<Rational>) -> ExactRank {
    let (rows, cols) = (m.rows, m.cols);
    let (mut a, scale) = integer_rows(m);

    let mut prev = BigInt::one();
    let mut negate = false;
    let mut r = 0;
    let mut pivots = Vec::new();
    let mut order: Vec<usize> = (0..rows).collect();
    for col in 0..cols {
        if r == rows {
            break;
        }
        let Some(i) = (r..rows).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        if i != r {
            a.swap(i, r);
            order.swap(i, r);
            negate = !negate;
        }
        let (top, rest) = a.split_at_mut(r + 1);
        let pivot_row = &top[r];
        for row in rest.iter_mut() {
            let lead = row[col].clone();
            for j in col + 1..cols {
                let num = &pivot_row[col] * &row[j] - &lead * &pivot_row[j];
                row[j] = num / &prev;
            }
            row[col] = BigInt::zero();
        }
        prev = a[r][col].clone();
        pivots.push((order[r], col));
        r += 1;
    }

    let determinant = (rows == cols).then(|| {
        if r < rows {
            Rational::zero()
        } else if rows == 0 {
            Rational::one()
        } else {
            let d = if negate { -prev.clone() } else { prev.clone() };
            Rational::new(d, scale.clone())
        }
    });
    ExactRank {
        rank: r,
        pivots,
        determinant,
    }
}

/// Margin, in bits, that pivots must keep from the rank threshold.
pub const MARGIN_LOG2: f64 = 4.0;

/// Thresholded rank from full-pivoting elimination after column equilibration.
///
/// A pivot counts when it exceeds `2^(-bits/2)` times the largest initial
/// pivot. `marginal` is set when an accepted or discarded pivot lies within
/// `2^MARGIN_LOG2` of that threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloatRank {
    pub rank: usize,
    pub bits: u32,
    pub pivots: Vec<(usize, usize)>,
    pub threshold_log2: Option<f64>,
    pub min_pivot_log2: Option<f64>,
    /// Distance in bits from the threshold to the nearest pivot on either side.
    pub gap_log2: Option<f64>,
    pub marginal: bool,
}

struct Elimination<S> {
    /// Reduced rows, one per pivot, with 1 at the pivot column.
    reduced: Vec<Vec<S>>,
    pivot_cols: Vec<usize>,
    pivot_rows: Vec<usize>,
    col_scale: Vec<S>,
    threshold_log2: Option<f64>,
    accepted_min_log2: Option<f64>,
    rejected_max_log2: Option<f64>,
}

fn equilibrate<S: Scalar>(m: &Matrix<S>) -> (Vec<Vec<S>>, Vec<S>) {
    let mut a = m.to_rows();
    let mut scale = vec![S::one(); m.cols];
    if S::EXACT {
        return (a, scale);
    }
    for (j, s) in scale.iter_mut().enumerate() {
        let mut big = S::zero();
        for row in a.iter() {
            let v = row[j].abs();
            if v > big {
                big = v;
            }
        }
        if !big.is_zero() {
            for row in a.iter_mut() {
                row[j] = row[j].clone() / big.clone();
            }
            *s = big;
        }
    }
    (a, scale)
}

/// Gauss-Jordan with full pivoting. Exact scalars take the first nonzero
/// entry as pivot; floats take the largest and stop at the threshold.
fn eliminate<S: Scalar>(m: &Matrix<S>, bits: Option<u32>) -> Elimination<S> {
    let (mut a, col_scale) = equilibrate(m);
    let (rows, cols) = (m.rows, m.cols);
    let mut row_live: Vec<bool> = vec![true; rows];
    let mut col_live: Vec<bool> = vec![true; cols];
    let mut pivot_cols = Vec::new();
    let mut pivot_rows = Vec::new();
    let mut threshold_log2 = None;
    let mut accepted_min_log2: Option<f64> = None;
    let mut rejected_max_log2 = None;

    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        'search: for j in 0..cols {
            if !col_live[j] {
                continue;
            }
            for i in 0..rows {
                if !row_live[i] || a[i][j].is_zero() {
                    continue;
                }
                if S::EXACT {
                    best = Some((i, j, 0.0));
                    break 'search;
                }
                let l = a[i][j].log2_abs();
                if best.map_or(true, |(_, _, b)| l > b) {
                    best = Some((i, j, l));
                }
            }
        }
        let Some((pi, pj, lp)) = best else { break };
        if let Some(b) = bits {
            let thr = *threshold_log2.get_or_insert(lp - b as f64 / 2.0);
            if lp <= thr {
                rejected_max_log2 = Some(lp);
                break;
            }
            accepted_min_log2 = Some(accepted_min_log2.map_or(lp, |m: f64| m.min(lp)));
        }
        let inv = S::one() / a[pi][pj].clone();
        for v in a[pi].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        let prow = a[pi].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i == pi || row[pj].is_zero() {
                continue;
            }
            let f = row[pj].clone();
            for j in 0..cols {
                if !prow[j].is_zero() {
                    row[j] = row[j].clone() - f.clone() * prow[j].clone();
                }
            }
            if !S::EXACT {
                row[pj] = S::zero();
            }
        }
        row_live[pi] = false;
        col_live[pj] = false;
        pivot_cols.push(pj);
        pivot_rows.push(pi);
    }

    let reduced = pivot_rows.iter().map(|&i| a[i].clone()).collect();
    Elimination {
        reduced,
        pivot_cols,
        pivot_rows,
        col_scale,
        threshold_log2,
        accepted_min_log2,
        rejected_max_log2,
    }
}

pub fn float_rank<S: Scalar>(m: &Matrix<S>, bits: u32) -> FloatRank {
    let e = eliminate(m, Some(bits));
    summarize(&e, bits)
}

fn summarize<S>(e: &Elimination<S>, bits: u32) -> FloatRank {
    let gap_log2 = match e.threshold_log2 {
        None => None,
        Some(t) => {
            let above = e.accepted_min_log2.map(|a| a - t);
            let below = e.rejected_max_log2.map(|r| t - r);
            match (above, below) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            }
        }
    };
    FloatRank {
        rank: e.pivot_cols.len(),
        bits,
        pivots: e.pivot_rows.iter().copied().zip(e.pivot_cols.iter().copied()).collect(),
        threshold_log2: e.threshold_log2,
        min_pivot_log2: e.accepted_min_log2,
        gap_log2,
        marginal: gap_log2.map_or(false, |g| g < MARGIN_LOG2),
    }
}

/// Kernel basis of `m`, one vector per free column, each normalized with
/// [`Scalar::normalize_direction`]. Floats use the rank threshold for `bits`.
#[derive(Clone, Debug)]
pub struct Kernel<S> {
    pub basis: Vec<Vec<S>>,
    pub rank: usize,
    /// Threshold diagnostics; `None` for exact scalars.
    pub float: Option<FloatRank>,
}

pub fn nullspace<S: Scalar>(m: &Matrix<S>, bits: Option<u32>) -> Kernel<S> {
    if S::EXACT {
        let q = rational_matrix(m).expect("exact scalar");
        let (basis, rank) = exact_kernel(&q);
        return Kernel {
            basis: basis
                .into_iter()
                .map(|v| v.iter().map(|x| S::from_rational(&Rational::from_integer(x.clone()))).collect())
                .collect(),
            rank,
            float: None,
        };
    }
    let bits = bits.or(S::PRECISION);
    let e = eliminate(m, bits);
    let mut is_pivot = vec![false; m.cols];
    for &j in &e.pivot_cols {
        is_pivot[j] = true;
    }
    let mut basis = Vec::new();
    for f in (0..m.cols).filter(|&j| !is_pivot[j]) {
        let mut v = vec![S::zero(); m.cols];
        v[f] = S::one();
        for (t, &pc) in e.pivot_cols.iter().enumerate() {
            v[pc] = -e.reduced[t][f].clone();
        }
        // undo the column equilibration: A x = 0 with x_j = y_j / s_j
        for (x, s) in v.iter_mut().zip(&e.col_scale) {
            *x = x.clone() / s.clone();
        }
        S::normalize_direction(&mut v);
        basis.push(v);
    }
    Kernel {
        rank: e.pivot_cols.len(),
        basis,
        float: bits.map(|b| summarize(&e, b)),
    }
}

/// Primitive integer kernel basis by fraction-free Gauss-Jordan elimination.
///
/// After each step every pivot entry equals the latest pivot and all
/// divisions by the previous pivot are exact, so no rational arithmetic is
/// needed. Returns the basis and the rank.
fn exact_kernel(m: &Matrix<Rational>) -> (Vec<Vec<BigInt>>, usize) {
    let (a, _) = integer_rows(m);
    // row content does not affect the kernel
    let a: Vec<Vec<BigInt>> = a
        .into_iter()
        .filter_map(|row| {
            let g = row.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
            (!g.is_zero()).then(|| row.iter().map(|x| x / &g).collect())
        })
        .collect();
    // Rows independent modulo a prime are independent over Q. Eliminate on
    // those only, then confirm that every other row annihilates the kernel.
    let keep = independent_rows_mod_p(&a);
    if keep.len() < a.len() {
        let chosen: Vec<Vec<BigInt>> = keep.iter().map(|&i| a[i].clone()).collect();
        let (basis, rank) = fraction_free_kernel(chosen, m.cols);
        let others = (0..a.len()).filter(|i| keep.binary_search(i).is_err());
        let spans = others.into_iter().all(|i| {
            basis.iter().all(|v| {
                a[i].iter()
                    .zip(v)
                    .filter(|(x, y)| !x.is_zero() && !y.is_zero())
                    .fold(BigInt::zero(), |acc, (x, y)| acc + x * y)
                    .is_zero()
            })
        });
        if spans {
            return (basis, rank);
        }
    }
    fraction_free_kernel(a, m.cols)
}

const MOD_P: u64 = (1 << 61) - 1;

fn reduce_mod_p(x: &BigInt) -> u64 {
    let r = x.mod_floor(&BigInt::from(MOD_P));
    r.to_u64_digits().1.first().copied().unwrap_or(0)
}

fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % MOD_P as u128) as u64
}

fn inv_mod(a: u64) -> u64 {
    let (mut base, mut e, mut acc) = (a, MOD_P - 2, 1u64);
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, base);
        }
        base = mul_mod(base, base);
        e >>= 1;
    }
    acc
}

/// Indices, in increasing order, of a maximal set of rows that stay
/// independent modulo `MOD_P`.
fn independent_rows_mod_p(a: &[Vec<BigInt>]) -> Vec<usize> {
    let mut echelon: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut keep = Vec::new();
    for (i, row) in a.iter().enumerate() {
        let mut r: Vec<u64> = row.iter().map(reduce_mod_p).collect();
        for (pc, e) in &echelon {
            let f = r[*pc];
            if f != 0 {
                for (x, y) in r.iter_mut().zip(e) {
                    *x = (*x + MOD_P - mul_mod(f, *y)) % MOD_P;
                }
            }
        }
        if let Some(pc) = r.iter().position(|&x| x != 0) {
            let inv = inv_mod(r[pc]);
            r.iter_mut().for_each(|x| *x = mul_mod(*x, inv));
            echelon.push((pc, r));
            keep.push(i);
        }
    }
    keep
}

fn fraction_free_kernel(mut a: Vec<Vec<BigInt>>, cols: usize) -> (Vec<Vec<BigInt>>, usize) {
    let rows = a.len();
    let mut prev = BigInt::one();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for col in 0..cols {
        if r == rows {
            break;
        }
        let Some(i) = (r..rows).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        a.swap(i, r);
        let (before, rest) = a.split_at_mut(r);
        let (pivot, after) = rest.split_first_mut().expect("row r exists");
        let p = pivot[col].clone();
        for row in before.iter_mut().chain(after.iter_mut()) {
            let lead = std::mem::take(&mut row[col]);
            for j in 0..cols {
                if j == col {
                    continue;
                }
                let mut num = &p * &row[j];
                if !lead.is_zero() && !pivot[j].is_zero() {
                    num -= &lead * &pivot[j];
                }
                if num.is_zero() {
                    row[j] = num;
                    continue;
                }
                let (quot, rem) = num.div_rem(&prev);
                debug_assert!(rem.is_zero(), "fraction-free step must divide exactly");
                row[j] = quot;
            }
        }
        prev = p;
        pivot_cols.push(col);
        r += 1;
    }
    let mut is_pivot = vec![false; cols];
    for &j in &pivot_cols {
        is_pivot[j] = true;
    }
    let basis = (0..cols)
        .filter(|&f| !is_pivot[f])
        .map(|f| {
            let mut v = vec![BigInt::zero(); cols];
            v[f] = prev.clone();
            for (t, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -a[t][f].clone();
            }
            let g = v.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
            // keep the free coordinate positive
            let g = if prev.is_negative() { -g } else { g };
            v.iter().map(|x| x / &g).collect()
        })
        .collect();
    (basis, r)
}

/// Rank of a rational matrix as an integer, ignoring pivots.
pub fn rank_of(m: &Matrix<Rational>) -> usize {
    exact_rank(m).rank
}

pub(crate) fn rational_matrix<S: Scalar>(m: &Matrix<S>) -> Option<Matrix<Rational>> {
    let data: Option<Vec<Rational>> = m.data.iter().map(|x| x.to_rational()).collect();
    Some(Matrix {
        rows: m.rows,
        cols: m.cols,
        data: data?,
    })
}
