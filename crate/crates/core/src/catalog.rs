//! Named example families with the properties claimed for them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::parse;
use crate::scalar::Rational;
use crate::web::{cross_ratio_family, BalancedSet, WebDefinition};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    pub ordinary: bool,
    pub max_rank: bool,
    pub quasi_symmetric: bool,
}

/// Trailing-argument specialization of `f` at finite marked points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    pub f: String,
    pub marks: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub name: String,
    pub k0: usize,
    pub webs: Vec<Vec<String>>,
    pub expected: Expected,
    pub provenance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
}

const ALL: Expected = Expected {
    ordinary: true,
    max_rank: true,
    quasi_symmetric: true,
};

fn listed(name: &str, k0: usize, webs: &[&[&str]], expected: Expected, provenance: &str) -> FamilySpec {
    FamilySpec {
        name: name.into(),
        k0,
        webs: webs.iter().map(|t| t.iter().map(|s| s.to_string()).collect()).collect(),
        expected,
        provenance: provenance.into(),
        generator: None,
    }
}

const WB_T1: &[&str] = &["x1"];
const WB_T2: &[&str] = &["x1+x2", "x1-x2", "x1*x2"];
const WB_T3: &[&str] = &["x1+x2+x3", "x1^2+x2^2+x3^2", "x1*x2*x3"];

fn specs() -> Vec<FamilySpec> {
    let known = "known example";
    let new = "new example";
    let mut v = vec![
        listed("k0_2_linear", 2, &[&["x1"], &["x1+x2"]], ALL, known),
        listed(
            "k0_3_quadrics",
            3,
            &[&["x1"], &["x1+x2", "x1-x2"], &["x1^2+x2^2+x3^2"]],
            ALL,
            known,
        ),
        listed("k0_3_sym", 3, &[&["x1"], &["x1+x2", "x1*x2"], &["x1+x2+x3"]], ALL, new),
        listed("k0_3_sym_xyz", 3, &[&["x1"], &["x1+x2", "x1*x2"], &["x1*x2*x3"]], ALL, new),
        listed(
            "k0_3_moebius",
            3,
            &[&["x1"], &["x1*x2", "(x1-1)*(x2-1)/((x1+1)*(x2+1))"], &["x1+x2+x3"]],
            ALL,
            new,
        ),
        listed(
            "k0_3_moebius_triple",
            3,
            &[
                &["x1"],
                &["x1*x2", "(x1-1)*(x2-1)/((x1+1)*(x2+1))"],
                &["(x1-1)*(x2-1)*(x3-1)/((x1+1)*(x2+1)*(x3+1))"],
            ],
            ALL,
            new,
        ),
        listed("k0_3_harmonic", 3, &[&["x1"], &["x1+x2", "1/x1+1/x2"], &["x1+x2+x3"]], ALL, new),
        listed(
            "k0_3_harmonic_inv",
            3,
            &[&["x1"], &["x1+x2", "1/x1+1/x2"], &["1/x1+1/x2+1/x3"]],
            ALL,
            new,
        ),
        listed("k0_4_WB", 4, &[WB_T1, WB_T2, WB_T3, &["x1+x2+x3+x4"]], ALL, known),
        listed("k0_4_WB_sq", 4, &[WB_T1, WB_T2, WB_T3, &["x1^2+x2^2+x3^2+x4^2"]], ALL, known),
        listed("k0_4_WB_xyzt", 4, &[WB_T1, WB_T2, WB_T3, &["x1*x2*x3*x4"]], ALL, known),
        listed(
            "k0_4_exp",
            4,
            &[
                &["x1"],
                &["x1+x2", "x1-x2", "exp(x1)+exp(x2)"],
                &["x1+x2+x3", "x1+x2-x3", "exp(x1)+exp(x2)+exp(x3)"],
                &["x1+x2+x3+x4"],
            ],
            // x1+x2-x3 is not invariant under swapping x2 and x3
            Expected {
                quasi_symmetric: false,
                ..ALL
            },
            new,
        ),
        // cross ratio (x-z)(y-t)/((y-z)(x-t)) with marks 0, 1 and the infinite
        // mark specialized by hand
        listed(
            "k0_4_pereira_pirio_affine",
            4,
            &[
                &["1-x1"],
                &["x1/x2", "(x1-1)/(x2-1)", "x1*(x2-1)/(x2*(x1-1))"],
                &[
                    "(x1-x3)*x2/((x2-x3)*x1)",
                    "(x1-x3)*(x2-1)/((x2-x3)*(x1-1))",
                    "(x1-x3)/(x2-x3)",
                ],
                &["(x1-x3)*(x2-x4)/((x2-x3)*(x1-x4))"],
            ],
            ALL,
            known,
        ),
    ];
    let f = "(x1-x3)/(x2-x3)";
    let generated = crossratio_affine(f).expect("built-in generator is valid");
    v.insert(
        8,
        FamilySpec {
            name: "k0_3_crossratio_affine".into(),
            k0: 3,
            webs: generated.to_definition().webs,
            expected: ALL,
            provenance: "cross-ratio generator".into(),
            generator: Some(Generator {
                f: f.into(),
                marks: vec!["0".into(), "1".into()],
            }),
        },
    );
    v
}

fn crossratio_affine(f: &str) -> Result<BalancedSet> {
    let marks = [Rational::from_integer(0.into()), Rational::from_integer(1.into())];
    cross_ratio_family("k0_3_crossratio_affine", &parse(f, 3)?, &marks)
}

/// All catalog entries in a fixed order.
pub fn list() -> Vec<FamilySpec> {
    specs()
}

pub fn names() -> Vec<String> {
    specs().into_iter().map(|s| s.name).collect()
}

pub fn get_family(name: &str) -> Result<(BalancedSet, FamilySpec)> {
    let spec = specs()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownFamily(name.into()))?;
    let set = BalancedSet::from_definition(
        &spec.name,
        &WebDefinition {
            k0: spec.k0,
            webs: spec.webs.clone(),
        },
    )?;
    Ok((set, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combin::c_usize;

    #[test]
    fn every_entry_parses_with_balanced_counts() {
        for spec in list() {
            let (e, _) = get_family(&spec.name).unwrap();
            for t in &e.webs {
                assert_eq!(t.integrals.len(), c_usize(t.k, e.k0 - t.k), "{} T_{}", spec.name, t.k);
            }
        }
    }

    #[test]
    fn lookup() {
        let (e, spec) = get_family("k0_3_quadrics").unwrap();
        assert_eq!(e.webs.iter().map(|t| t.integrals.len()).collect::<Vec<_>>(), vec![1, 2, 1]);
        assert!(spec.expected.ordinary && spec.expected.max_rank);
        let (e, _) = get_family("k0_4_exp").unwrap();
        assert_eq!(e.web(3).integrals[2].to_string(), "exp(x1) + exp(x2) + exp(x3)");
        assert!(matches!(get_family("nope"), Err(Error::UnknownFamily(_))));
        let (e, _) = get_family("k0_3_crossratio_affine").unwrap();
        assert_eq!(e.web(3).integrals[0].to_string(), "(x1 - x3)/(x2 - x3)");
    }

    #[test]
    fn names_are_unique() {
        let mut n = names();
        let len = n.len();
        n.sort();
        n.dedup();
        assert_eq!(n.len(), len);
        assert_eq!(len, 14);
    }
}
