//! Permutation groups closed from generators, and random finite actions
//! built as disjoint unions of coset spaces.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{FiniteAction, OracleError};

/// A finite group of permutations of `0..degree`, elements sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationGroup {
    elements: Vec<Vec<usize>>,
}

fn compose(a: &[usize], b: &[usize]) -> Vec<usize> {
    b.iter().map(|&i| a[i]).collect()
}

impl PermutationGroup {
    /// Closure of `generators` under composition.
    pub fn generate(degree: usize, generators: &[Vec<usize>]) -> Self {
        let identity: Vec<usize> = (0..degree).collect();
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::from([identity.clone()]);
        let mut frontier = vec![identity];
        while let Some(p) = frontier.pop() {
            for g in generators {
                let q = compose(g, &p);
                if seen.insert(q.clone()) {
                    frontier.push(q);
                }
            }
        }
        Self {
            elements: seen.into_iter().collect(),
        }
    }

    pub fn cyclic(n: usize) -> Self {
        let rot: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        Self::generate(n, &[rot])
    }

    /// Symmetries of the n-gon, order 2n.
    pub fn dihedral(n: usize) -> Self {
        let rot: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        let flip: Vec<usize> = (0..n).map(|i| (n - i) % n).collect();
        Self::generate(n, &[rot, flip])
    }

    pub fn symmetric(n: usize) -> Self {
        let mut gens = Vec::new();
        if n > 1 {
            gens.push((0..n).map(|i| (i + 1) % n).collect());
            let mut swap: Vec<usize> = (0..n).collect();
            swap.swap(0, 1);
            gens.push(swap);
        }
        Self::generate(n, &gens)
    }

    /// Even permutations, generated by the 3-cycles (0 1 k).
    pub fn alternating(n: usize) -> Self {
        let gens: Vec<Vec<usize>> = (2..n)
            .map(|k| {
                let mut p: Vec<usize> = (0..n).collect();
                p[0] = 1;
                p[1] = k;
                p[k] = 0;
                p
            })
            .collect();
        Self::generate(n, &gens)
    }

    /// G × H acting on the disjoint union of their domains.
    pub fn direct_product(a: &Self, b: &Self) -> Self {
        let da = a.degree();
        let lift = |p: &[usize], q: &[usize]| -> Vec<usize> {
            p.iter().copied().chain(q.iter().map(|i| i + da)).collect()
        };
        let ia: Vec<usize> = (0..da).collect();
        let ib: Vec<usize> = (0..b.degree()).collect();
        let gens: Vec<Vec<usize>> = a
            .elements
            .iter()
            .map(|p| lift(p, &ib))
            .chain(b.elements.iter().map(|q| lift(&ia, q)))
            .collect();
        Self::generate(da + b.degree(), &gens)
    }

    pub fn degree(&self) -> usize {
        self.elements[0].len()
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    /// compose[a][b] = index of elements[a]∘elements[b].
    pub fn composition_table(&self) -> Vec<Vec<usize>> {
        let index: BTreeMap<&Vec<usize>, usize> = self
            .elements
            .iter()
            .enumerate()
            .map(|(i, p)| (p, i))
            .collect();
        self.elements
            .iter()
            .map(|a| {
                self.elements
                    .iter()
                    .map(|b| index[&compose(a, b)])
                    .collect()
            })
            .collect()
    }

    /// Indices of the subgroup generated by the given element indices.
    pub fn subgroup(&self, generators: &[usize]) -> Vec<usize> {
        let gens: Vec<Vec<usize>> = generators
            .iter()
            .map(|&i| self.elements[i].clone())
            .collect();
        let sub = Self::generate(self.degree(), &gens);
        let index: BTreeMap<&Vec<usize>, usize> = self
            .elements
            .iter()
            .enumerate()
            .map(|(i, p)| (p, i))
            .collect();
        sub.elements.iter().map(|p| index[p]).collect()
    }
}

/// A random group of order ≤ `max_order` acting on ≤ `max_points` points:
/// one to four coset spaces G/H with H generated by random elements.
pub fn random_action<R: Rng + ?Sized>(
    rng: &mut R,
    max_order: usize,
    max_points: usize,
) -> Result<FiniteAction, OracleError> {
    let mut candidates: Vec<PermutationGroup> = Vec::new();
    for n in 1..=12 {
        candidates.push(PermutationGroup::cyclic(n));
    }
    for n in 3..=10 {
        candidates.push(PermutationGroup::dihedral(n));
    }
    candidates.push(PermutationGroup::symmetric(3));
    candidates.push(PermutationGroup::symmetric(4));
    candidates.push(PermutationGroup::alternating(4));
    candidates.push(PermutationGroup::alternating(5));
    candidates.push(PermutationGroup::symmetric(5));
    candidates.push(PermutationGroup::direct_product(
        &PermutationGroup::cyclic(2),
        &PermutationGroup::cyclic(6),
    ));
    candidates.push(PermutationGroup::direct_product(
        &PermutationGroup::cyclic(3),
        &PermutationGroup::symmetric(3),
    ));
    candidates.retain(|g| g.order() <= max_order);
    let group = candidates.choose(rng).ok_or_else(|| {
        OracleError::NotAGroup(format!("no catalogued group of order ≤ {max_order}"))
    })?;
    let table = group.composition_table();
    let mut parts = Vec::new();
    let mut points = 0;
    for _ in 0..rng.random_range(1..=4) {
        let gens: Vec<usize> = (0..rng.random_range(0..=2))
            .map(|_| rng.random_range(0..group.order()))
            .collect();
        let h = group.subgroup(&gens);
        let size = group.order() / h.len();
        if points + size > max_points {
            continue;
        }
        points += size;
        parts.push(FiniteAction::on_cosets(table.clone(), &h)?);
    }
    if parts.is_empty() {
        parts.push(FiniteAction::on_cosets(
            table.clone(),
            &(0..group.order()).collect::<Vec<_>>(),
        )?);
    }
    FiniteAction::disjoint_union(&parts)
}
