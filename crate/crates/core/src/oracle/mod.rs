//! Brute-force checks of the orbit-stabilizer picture on finite actions, and
//! the coset-containment test for predicted sets in continuous groups.

mod perm;
mod text;

use std::collections::BTreeSet;

use thiserror::Error;

pub use perm::{random_action, PermutationGroup};

use crate::group::{GroupError, GroupSet};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("composition table is not a group: {0}")]
    NotAGroup(String),
    #[error("action table is not an action: {0}")]
    NotAnAction(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("point {0} out of range")]
    NoSuchPoint(usize),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// A finite group given by its composition table, acting on points
/// `0..points` through an action table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteAction {
    /// compose[a][b] = a∘b.
    compose: Vec<Vec<usize>>,
    /// action[g][x] = g·x.
    action: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
}

fn check_table(rows: &[Vec<usize>], width: usize, range: usize, what: &str) -> Result<(), String> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(format!(
                "{what} row {i} has {} entries, expected {width}",
                r.len()
            ));
        }
        if let Some(v) = r.iter().find(|v| **v >= range) {
            return Err(format!("{what} row {i} has out-of-range entry {v}"));
        }
    }
    Ok(())
}

impl FiniteAction {
    /// Validates the group axioms and the action axioms exhaustively.
    pub fn new(compose: Vec<Vec<usize>>, action: Vec<Vec<usize>>) -> Result<Self, OracleError> {
        let n = compose.len();
        let bad = |m: String| OracleError::NotAGroup(m);
        if n == 0 {
            return Err(bad("empty group".into()));
        }
        check_table(&compose, n, n, "composition").map_err(bad)?;
        for a in 0..n {
            for b in 0..n {
                let ab = compose[a][b];
                for c in 0..n {
                    if compose[ab][c] != compose[a][compose[b][c]] {
                        return Err(bad(format!("({a}∘{b})∘{c} ≠ {a}∘({b}∘{c})")));
                    }
                }
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|a| compose[e][a] == a && compose[a][e] == a))
            .ok_or_else(|| bad("no identity".into()))?;
        let inverse = (0..n)
            .map(|a| {
                (0..n)
                    .find(|&b| compose[a][b] == identity && compose[b][a] == identity)
                    .ok_or_else(|| bad(format!("{a} has no inverse")))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let bad = |m: String| OracleError::NotAnAction(m);
        if action.len() != n {
            return Err(bad(format!(
                "{} action rows for {n} group elements",
                action.len()
            )));
        }
        let m = action[0].len();
        if m == 0 {
            return Err(bad("no points".into()));
        }
        check_table(&action, m, m, "action").map_err(bad)?;
        if let Some(x) = (0..m).find(|&x| action[identity][x] != x) {
            return Err(bad(format!("identity moves point {x}")));
        }
        for a in 0..n {
            for b in 0..n {
                for x in 0..m {
                    if action[compose[a][b]][x] != action[a][action[b][x]] {
                        return Err(bad(format!("({a}∘{b})·{x} ≠ {a}·({b}·{x})")));
                    }
                }
            }
        }
        Ok(Self {
            compose,
            action,
            identity,
            inverse,
        })
    }

    /// The group acting on itself by left multiplication.
    pub fn regular(compose: Vec<Vec<usize>>) -> Result<Self, OracleError> {
        let action = compose.clone();
        Self::new(compose, action)
    }

    /// The group acting on the left cosets of `subgroup` by g·(kH) = (g∘k)H.
    /// Cosets are numbered by their smallest element.
    pub fn on_cosets(compose: Vec<Vec<usize>>, subgroup: &[usize]) -> Result<Self, OracleError> {
        let n = compose.len();
        let coset_of =
            |k: usize| -> BTreeSet<usize> { subgroup.iter().map(|&h| compose[k][h]).collect() };
        let mut cosets: Vec<BTreeSet<usize>> = Vec::new();
        let mut label = vec![usize::MAX; n];
        for k in 0..n {
            if label[k] == usize::MAX {
                let c = coset_of(k);
                for &e in &c {
                    if e < n {
                        label[e] = cosets.len();
                    }
                }
                cosets.push(c);
            }
        }
        if label.contains(&usize::MAX) || cosets.iter().any(|c| c.len() != subgroup.len()) {
            return Err(OracleError::NotAGroup(
                "subgroup does not partition the group".into(),
            ));
        }
        let reps: Vec<usize> = cosets.iter().map(|c| *c.iter().next().unwrap()).collect();
        let action = (0..n)
            .map(|g| reps.iter().map(|&k| label[compose[g][k]]).collect())
            .collect();
        Self::new(compose, action)
    }

    /// Disjoint union of several actions of one group.
    pub fn disjoint_union(parts: &[FiniteAction]) -> Result<Self, OracleError> {
        let first = parts
            .first()
            .ok_or_else(|| OracleError::NotAnAction("no parts".into()))?;
        if parts.iter().any(|p| p.compose != first.compose) {
            return Err(OracleError::NotAnAction(
                "parts act by different groups".into(),
            ));
        }
        let action = (0..first.group_order())
            .map(|g| {
                let mut offset = 0;
                let mut row = Vec::new();
                for p in parts {
                    row.extend(p.action[g].iter().map(|x| x + offset));
                    offset += p.point_count();
                }
                row
            })
            .collect();
        Self::new(first.compose.clone(), action)
    }

    pub fn group_order(&self) -> usize {
        self.compose.len()
    }

    pub fn point_count(&self) -> usize {
        self.action[0].len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn compose(&self, a: usize, b: usize) -> usize {
        self.compose[a][b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn act(&self, g: usize, x: usize) -> usize {
        self.action[g][x]
    }

    pub fn composition_table(&self) -> &[Vec<usize>] {
        &self.compose
    }

    pub fn action_table(&self) -> &[Vec<usize>] {
        &self.action
    }

    fn check_point(&self, x: usize) -> Result<(), OracleError> {
        if x < self.point_count() {
            Ok(())
        } else {
            Err(OracleError::NoSuchPoint(x))
        }
    }

    /// Whether `elements` is closed under composition and inverses.
    pub fn is_subgroup(&self, elements: &[usize]) -> bool {
        let set: BTreeSet<usize> = elements.iter().copied().collect();
        set.contains(&self.identity)
            && set.iter().all(|&a| {
                set.contains(&self.inverse[a])
                    && set.iter().all(|&b| set.contains(&self.compose[a][b]))
            })
    }
}

/// {g·x : g ∈ G}, sorted.
pub fn orbit_of(action: &FiniteAction, x: usize) -> Result<Vec<usize>, OracleError> {
    action.check_point(x)?;
    let set: BTreeSet<usize> = (0..action.group_order())
        .map(|g| action.act(g, x))
        .collect();
    Ok(set.into_iter().collect())
}

/// G_x = {g : g·x = x}, sorted; checked to be a subgroup.
pub fn stabilizer_of(action: &FiniteAction, x: usize) -> Result<Vec<usize>, OracleError> {
    action.check_point(x)?;
    let stab: Vec<usize> = (0..action.group_order())
        .filter(|&g| action.act(g, x) == x)
        .collect();
    if !action.is_subgroup(&stab) {
        return Err(OracleError::NotAnAction(format!(
            "stabilizer of {x} is not a subgroup"
        )));
    }
    Ok(stab)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OrbitStabilizerReport {
    pub points_checked: usize,
    pub orbits: usize,
    pub violations: Vec<String>,
}

impl OrbitStabilizerReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// For every point: |orbit|·|stabilizer| = |G|; gG_x ↦ g·x is well defined
/// and bijective onto the orbit; and stabilizers along the orbit are the
/// conjugates h G_x h⁻¹.
pub fn check_orbit_stabilizer(action: &FiniteAction) -> OrbitStabilizerReport {
    let n = action.group_order();
    let mut report = OrbitStabilizerReport::default();
    let mut seen_orbits = BTreeSet::new();
    for x in 0..action.point_count() {
        report.points_checked += 1;
        let orbit = orbit_of(action, x).expect("point in range");
        let stab = match stabilizer_of(action, x) {
            Ok(s) => s,
            Err(e) => {
                report.violations.push(e.to_string());
                continue;
            }
        };
        seen_orbits.insert(orbit[0]);
        if orbit.len() * stab.len() != n {
            report.violations.push(format!(
                "point {x}: |orbit| {} × |stab| {} ≠ {n}",
                orbit.len(),
                stab.len()
            ));
        }
        let in_stab: BTreeSet<usize> = stab.iter().copied().collect();
        let mut coset_image: Vec<Option<usize>> = vec![None; n];
        for g in 0..n {
            let rep = (0..n)
                .find(|&k| in_stab.contains(&action.compose(action.inverse(k), g)))
                .expect("g itself qualifies");
            let image = action.act(g, x);
            match coset_image[rep] {
                None => coset_image[rep] = Some(image),
                Some(prev) if prev != image => {
                    report.violations.push(format!(
                        "point {x}: coset of {g} maps to both {prev} and {image}"
                    ));
                }
                _ => {}
            }
        }
        let images: Vec<usize> = coset_image.iter().flatten().copied().collect();
        let distinct: BTreeSet<usize> = images.iter().copied().collect();
        if distinct.len() != images.len() {
            report
                .violations
                .push(format!("point {x}: two cosets share an image"));
        }
        if distinct.into_iter().collect::<Vec<_>>() != orbit {
            report
                .violations
                .push(format!("point {x}: coset images do not cover the orbit"));
        }
        for h in 0..n {
            let y = action.act(h, x);
            let conj: BTreeSet<usize> = stab
                .iter()
                .map(|&s| action.compose(action.compose(h, s), action.inverse(h)))
                .collect();
            let direct: BTreeSet<usize> = stabilizer_of(action, y)
                .unwrap_or_default()
                .into_iter()
                .collect();
            if conj != direct {
                report
                    .violations
                    .push(format!("stabilizer of {y} is not {h}·G_{x}·{h}⁻¹"));
                break;
            }
        }
    }
    report.orbits = seen_orbits.len();
    report
}

#[derive(Clone, Debug, PartialEq)]
pub struct Containment {
    pub contained: bool,
    /// Index in `predicted` of the best translating element h.
    pub witness: usize,
    /// max over s ∈ h·S of the d_G distance to the nearest predicted element,
    /// for the witness h.
    pub score: f64,
}

/// Whether some left translate h·S, h ∈ `predicted`, of the stabilizer
/// representative S lies within `tol` (per element, in d_G) of `predicted`.
pub fn check_coset_containment(
    predicted: &GroupSet<f64>,
    stabilizer: &GroupSet<f64>,
    tol: f64,
) -> Result<Containment, OracleError> {
    predicted.spec().check_same(stabilizer.spec())?;
    let mut best = (f64::INFINITY, 0usize);
    for (i, h) in predicted.iter().enumerate() {
        let translated = stabilizer.left_translate(h)?;
        let mut worst: f64 = 0.0;
        for s in translated.iter() {
            let mut nearest = f64::INFINITY;
            for p in predicted.iter() {
                nearest = nearest.min(s.distance_sq(p)?);
            }
            worst = worst.max(nearest);
            if worst >= best.0 {
                break;
            }
        }
        if worst < best.0 {
            best = (worst, i);
        }
    }
    Ok(Containment {
        contained: best.0 < tol,
        witness: best.1,
        score: best.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyclic_table(n: usize) -> Vec<Vec<usize>> {
        (0..n)
            .map(|a| (0..n).map(|b| (a + b) % n).collect())
            .collect()
    }

    #[test]
    fn rejects_non_group() {
        let mut t = cyclic_table(3);
        t[1][1] = 0;
        assert!(matches!(
            FiniteAction::regular(t),
            Err(OracleError::NotAGroup(_))
        ));
    }

    #[test]
    fn rejects_non_action() {
        let t = cyclic_table(2);
        let action = vec![vec![0, 1], vec![0, 0]];
        assert!(matches!(
            FiniteAction::new(t, action),
            Err(OracleError::NotAnAction(_))
        ));
    }

    #[test]
    fn cosets_of_c3_in_c12() {
        let a = FiniteAction::on_cosets(cyclic_table(12), &[0, 4, 8]).unwrap();
        assert_eq!(a.point_count(), 4);
        assert_eq!(orbit_of(&a, 0).unwrap().len(), 4);
        assert_eq!(stabilizer_of(&a, 0).unwrap(), vec![0, 4, 8]);
    }
}
