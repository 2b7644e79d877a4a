use proptest::prelude::*;

use webrank_core::catalog;
use webrank_core::combin::c;
use webrank_core::expr::{eval, gradient};
use webrank_core::jets::{build_p, square_block, MultiIndex};
use webrank_core::linalg::{exact_rank, float_rank, nullspace, Matrix};
use webrank_core::web::{assemble, cubic_reparametrization, multi_indices, AssembledWeb};
use num_traits::Zero;
use webrank_core::{BalancedSet, GenericPointSampler, Mp128, Rational, Scalar};

fn q(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

fn rational_families() -> Vec<BalancedSet> {
    catalog::list()
        .iter()
        .map(|s| catalog::get_family(&s.name).unwrap().0)
        .filter(|e| e.is_rational())
        .collect()
}

/// A point where every integral and gradient of `w` is defined.
fn regular_point(w: &AssembledWeb, seed: u64) -> Vec<Rational> {
    let mut s = GenericPointSampler::new(seed);
    s.find(w.n, |p| build_p::<Rational>(w, 1, p).ok().map(|_| ()))
        .expect("regular point")
        .0
}

#[test]
fn assembled_sizes_follow_the_support_split() {
    for spec in catalog::list() {
        let (e, _) = catalog::get_family(&spec.name).unwrap();
        for n in e.k0..=(e.k0 + 3).min(8) {
            let w = assemble(&e, n);
            assert_eq!(c(n as i64, e.k0 as i64).unwrap(), w.len().into(), "{} n={n}", e.name);
            // strictly increasing, hence unique, labels
            for pair in w.entries.windows(2) {
                let (l, r) = (pair[0].label, pair[1].label);
                assert!((l.k, l.a, l.b) < (r.k, r.a, r.b), "{} n={n}", e.name);
            }
            for entry in &w.entries {
                let subsets = multi_indices(entry.label.k, n).unwrap();
                assert_eq!(subsets[entry.label.a - 1], entry.source);
            }
        }
    }
}

#[test]
fn square_blocks_are_diagonal_blocks_of_p() {
    for e in rational_families() {
        for n in [e.k0, e.k0 + 1] {
            let w = assemble(&e, n);
            let p = regular_point(&w, 11);
            let big = build_p(&w, e.k0 as u32, &p).unwrap();
            for (ci, entry) in w.entries.iter().enumerate() {
                // rows whose support is exactly the entry's source
                for (ri, row) in big.rows.iter().enumerate() {
                    let support = row.support();
                    let inside = support.iter().all(|j| entry.source.contains(j));
                    if !inside {
                        assert!(big.matrix.get(ri, ci).is_zero(), "{} n={n} {} row {row}", e.name, entry.label);
                    }
                }
            }
            for k in 1..=e.k0 {
                for (a, source) in multi_indices(k, n).unwrap().iter().enumerate() {
                    let local: Vec<Rational> = source.iter().map(|&j| p[j - 1].clone()).collect();
                    let block = square_block(e.web(k), e.k0, &local).unwrap();
                    let cols: Vec<usize> = w
                        .entries
                        .iter()
                        .enumerate()
                        .filter(|(_, en)| en.label.k == k && en.label.a == a + 1)
                        .map(|(i, _)| i)
                        .collect();
                    let rows: Vec<usize> = big
                        .rows
                        .iter()
                        .enumerate()
                        .filter(|(_, l)| l.support() == *source)
                        .map(|(i, _)| i)
                        .collect();
                    assert_eq!(big.matrix.select(&rows, &cols), block.matrix, "{} n={n} k={k} a={}", e.name, a + 1);
                }
            }
        }
    }
}

#[test]
fn cubic_reparametrization_scales_columns() {
    let (e, _) = catalog::get_family("k0_3_moebius").unwrap();
    let w = assemble(&e, 3);
    let p = regular_point(&w, 5);
    for idx in [0, 4, 9] {
        let v = w.reparametrized(idx, cubic_reparametrization);
        let u = eval(&w.entries[idx].integral, &p).unwrap();
        let s = q(3) * u.clone() * u + q(1);
        for h in 1..=3u32 {
            let a = build_p(&w, h, &p).unwrap();
            let b = build_p(&v, h, &p).unwrap();
            let factor = s.powi(h);
            for r in 0..a.matrix.rows() {
                for col in 0..a.matrix.cols() {
                    let want = if col == idx {
                        a.matrix.get(r, col).clone() * factor.clone()
                    } else {
                        a.matrix.get(r, col).clone()
                    };
                    assert_eq!(b.matrix.get(r, col), &want);
                }
            }
            assert_eq!(exact_rank(&a.matrix).rank, exact_rank(&b.matrix).rank);
        }
    }
}

#[test]
fn permuted_webs_match_up_to_relabeling() {
    for spec in catalog::list().into_iter().filter(|s| s.expected.quasi_symmetric) {
        let (e, _) = catalog::get_family(&spec.name).unwrap();
        if !e.is_rational() {
            continue;
        }
        let n = e.k0 + 1;
        let w = assemble(&e, n);
        let sigma: Vec<usize> = (1..=n).map(|j| j % n + 1).collect();
        let v = w.permuted(&sigma);
        let p = regular_point(&w, 3);
        let grads = |web: &AssembledWeb| -> Vec<Vec<Rational>> {
            web.entries
                .iter()
                .map(|en| gradient(&en.integral, n).iter().map(|d| eval(d, &p).unwrap()).collect())
                .collect()
        };
        let (gw, gv) = (grads(&w), grads(&v));
        let proportional = |x: &[Rational], y: &[Rational]| {
            (0..n).all(|i| (0..n).all(|j| x[i].clone() * y[j].clone() == x[j].clone() * y[i].clone()))
        };
        let mut used = vec![false; gw.len()];
        for g in &gv {
            let hit = (0..gw.len()).find(|&i| !used[i] && proportional(g, &gw[i]));
            let i = hit.unwrap_or_else(|| panic!("{}: permuted entry without a partner", e.name));
            used[i] = true;
        }
    }
}

#[test]
fn row_order_inside_a_block_is_descending_lexicographic() {
    let rows: Vec<MultiIndex> = webrank_core::jets::positive_block(2, 3);
    assert_eq!(rows, vec![MultiIndex::new(vec![2, 1]), MultiIndex::new(vec![1, 2])]);
    assert_eq!(MultiIndex::new(vec![0, 2, 1]).quadruple(), (3, 2, 3, 1));
}

fn arb_low_rank() -> impl Strategy<Value = (Vec<Vec<i64>>, Vec<Vec<i64>>)> {
    (1usize..6, 1usize..6, 1usize..4).prop_flat_map(|(r, cdim, k)| {
        (
            prop::collection::vec(prop::collection::vec(-3i64..=3, k), r),
            prop::collection::vec(prop::collection::vec(-3i64..=3, cdim), k),
        )
    })
}

fn product(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    a.iter()
        .map(|row| (0..b[0].len()).map(|j| row.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
        .collect()
}

proptest! {
    #[test]
    fn exact_and_float_rank_agree((a, b) in arb_low_rank()) {
        let m = product(&a, &b);
        let exact = Matrix::from_rows(m.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect());
        let float: Matrix<Mp128> = Matrix::from_rows(m.iter().map(|r| r.iter().map(|&x| Mp128::from_i64(x)).collect()).collect());
        let r = exact_rank(&exact).rank;
        let f = float_rank(&float, 128);
        prop_assert_eq!(r, f.rank);
        prop_assert!(!f.marginal);
        prop_assert!(r <= a[0].len());
    }

    #[test]
    fn kernels_annihilate_and_complement_the_rank((a, b) in arb_low_rank()) {
        let m = product(&a, &b);
        let exact = Matrix::from_rows(m.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect());
        let k = nullspace(&exact, None);
        prop_assert_eq!(k.basis.len() + exact_rank(&exact).rank, exact.cols());
        for v in &k.basis {
            prop_assert!(exact.mul_vec(v).iter().all(|x| x.is_zero()));
        }
        // independent: the basis stacked as rows has full rank
        if !k.basis.is_empty() {
            prop_assert_eq!(exact_rank(&Matrix::from_rows(k.basis.clone())).rank, k.basis.len());
        }
    }

    #[test]
    fn column_scaling_keeps_rank((a, b) in arb_low_rank(), s in prop::collection::vec(1i64..50, 6)) {
        let m = product(&a, &b);
        let exact = Matrix::from_rows(m.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect());
        let scaled = Matrix::from_rows(
            m.iter()
                .map(|r| r.iter().enumerate().map(|(j, &x)| Rational::new(x.into(), s[j].into())).collect())
                .collect(),
        );
        prop_assert_eq!(exact_rank(&exact).rank, exact_rank(&scaled).rank);
    }
}
