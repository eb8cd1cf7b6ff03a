use std::fmt;
use std::str::FromStr;

use super::element::{GroupElement, GroupSet};
use super::spec::GroupSpec;
use super::GroupError;
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SubgroupKind {
    /// C_ν inside SO(2).
    Cyclic(usize),
    /// C_a × C_b inside the 2-torus.
    CyclicProduct(usize, usize),
    /// Rotation group of the tetrahedron, order 12.
    Tetrahedral,
    /// Rotation group of the cube, order 24.
    Octahedral,
    /// Rotation group of the icosahedron, order 60.
    Icosahedral,
}

/// A finite subgroup in a fixed standard embedding into its ambient group.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteSubgroupSpec {
    kind: SubgroupKind,
    ambient: GroupSpec,
}

impl FiniteSubgroupSpec {
    pub fn new(kind: SubgroupKind, ambient: GroupSpec) -> Result<Self, GroupError> {
        let ok = match kind {
            SubgroupKind::Cyclic(n) => n >= 1 && ambient.same_group(&GroupSpec::So2),
            SubgroupKind::CyclicProduct(a, b) => {
                a >= 1 && b >= 1 && ambient.same_group(&GroupSpec::Torus(2))
            }
            _ => ambient == GroupSpec::So3,
        };
        if ok {
            Ok(Self { kind, ambient })
        } else {
            Err(GroupError::BadSubgroup {
                kind: format!("{kind:?}"),
                ambient: ambient.to_string(),
            })
        }
    }

    pub fn cyclic(n: usize) -> Self {
        Self::new(SubgroupKind::Cyclic(n), GroupSpec::So2).expect("n >= 1")
    }

    pub fn cyclic_product(a: usize, b: usize) -> Self {
        Self::new(SubgroupKind::CyclicProduct(a, b), GroupSpec::Torus(2)).expect("a, b >= 1")
    }

    pub fn polyhedral(kind: SubgroupKind) -> Self {
        Self::new(kind, GroupSpec::So3).expect("polyhedral kind")
    }

    pub fn kind(&self) -> SubgroupKind {
        self.kind
    }

    pub fn ambient(&self) -> &GroupSpec {
        &self.ambient
    }

    pub fn order(&self) -> usize {
        match self.kind {
            SubgroupKind::Cyclic(n) => n,
            SubgroupKind::CyclicProduct(a, b) => a * b,
            SubgroupKind::Tetrahedral => 12,
            SubgroupKind::Octahedral => 24,
            SubgroupKind::Icosahedral => 60,
        }
    }

    /// Tag used in file headers: `C4`, `C2xC3`, `T`, `O`, `I`.
    pub fn tag(&self) -> String {
        match self.kind {
            SubgroupKind::Cyclic(n) => format!("C{n}"),
            SubgroupKind::CyclicProduct(a, b) => format!("C{a}xC{b}"),
            SubgroupKind::Tetrahedral => "T".into(),
            SubgroupKind::Octahedral => "O".into(),
            SubgroupKind::Icosahedral => "I".into(),
        }
    }
}

impl fmt::Display for FiniteSubgroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl FromStr for FiniteSubgroupSpec {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GroupError::BadTag(s.to_string());
        let cyc = |t: &str| -> Result<usize, GroupError> {
            t.strip_prefix('C')
                .and_then(|n| n.parse().ok())
                .filter(|n| *n >= 1)
                .ok_or_else(bad)
        };
        match s {
            "T" => Ok(Self::polyhedral(SubgroupKind::Tetrahedral)),
            "O" => Ok(Self::polyhedral(SubgroupKind::Octahedral)),
            "I" => Ok(Self::polyhedral(SubgroupKind::Icosahedral)),
            _ => match s.split_once('x') {
                Some((a, b)) => Ok(Self::cyclic_product(cyc(a)?, cyc(b)?)),
                None => Ok(Self::cyclic(cyc(s)?)),
            },
        }
    }
}

/// Every element of the subgroup.
///
/// Cyclic groups come in angle order; polyhedral groups are closed from a pair
/// of generators and sorted lexicographically by matrix entries.
pub fn enumerate_subgroup<T: Scalar>(sub: &FiniteSubgroupSpec) -> GroupSet<T> {
    let tau = std::f64::consts::TAU;
    let elements: Vec<GroupElement<f64>> = match sub.kind {
        SubgroupKind::Cyclic(n) => (0..n)
            .map(|j| GroupElement::rotation2(tau * j as f64 / n as f64))
            .collect(),
        SubgroupKind::CyclicProduct(a, b) => (0..a)
            .flat_map(|i| {
                (0..b).map(move |j| {
                    GroupElement::torus(&[tau * i as f64 / a as f64, tau * j as f64 / b as f64])
                })
            })
            .collect(),
        SubgroupKind::Tetrahedral => close_under_composition(&[
            GroupElement::rotation3([0.0, 0.0, 1.0], std::f64::consts::PI),
            GroupElement::rotation3([1.0, 1.0, 1.0], tau / 3.0),
        ]),
        SubgroupKind::Octahedral => close_under_composition(&[
            GroupElement::rotation3([0.0, 0.0, 1.0], tau / 4.0),
            GroupElement::rotation3([1.0, 1.0, 1.0], tau / 3.0),
        ]),
        SubgroupKind::Icosahedral => {
            let golden = (1.0 + 5f64.sqrt()) / 2.0;
            close_under_composition(&[
                GroupElement::rotation3([0.0, 1.0, golden], tau / 5.0),
                GroupElement::rotation3([1.0, 1.0, 1.0], tau / 3.0),
            ])
        }
    };
    let elements =
        if sub.ambient.same_group(elements[0].spec()) && sub.ambient != *elements[0].spec() {
            elements
                .into_iter()
                .map(|e| GroupElement::from_params(&sub.ambient, e.params()).expect("same layout"))
                .collect()
        } else {
            elements
        };
    GroupSet::new(elements.iter().map(|e| e.cast()).collect()).expect("nonempty subgroup")
}

const DEDUP_TOL: f64 = 1e-9;

fn quantized(g: &GroupElement<f64>) -> Vec<i64> {
    g.matrix()
        .iter()
        .map(|x| (x / DEDUP_TOL).round() as i64)
        .collect()
}

fn close_under_composition(generators: &[GroupElement<f64>]) -> Vec<GroupElement<f64>> {
    let spec = generators[0].spec().clone();
    let mut elements = vec![GroupElement::identity(&spec)];
    let mut frontier = elements.clone();
    let contains = |set: &[GroupElement<f64>], g: &GroupElement<f64>| {
        set.iter().any(|e| e.distance_sq(g).unwrap() < DEDUP_TOL)
    };
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for f in &frontier {
            for gen in generators {
                let candidate = gen.compose(f).unwrap();
                if !contains(&elements, &candidate) {
                    elements.push(candidate.clone());
                    next.push(candidate);
                }
            }
        }
        frontier = next;
    }
    elements.sort_by_key(quantized);
    elements
}
