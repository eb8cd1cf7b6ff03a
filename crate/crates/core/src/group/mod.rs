//! Lie-group and finite-group numerics.

pub mod closed_form;
mod element;
mod spec;
mod subgroup;

use thiserror::Error;

pub use element::{
    exp_coords, exp_map, left_translate, log_map, metric_dg, sample_haar, AlgebraVector,
    GroupElement, GroupSet, LOG_BRANCH_MARGIN,
};
pub use spec::{Factor, FactorSlot, GroupSpec};
pub use subgroup::{enumerate_subgroup, FiniteSubgroupSpec, SubgroupKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("group mismatch: {left} vs {right}")]
    SpecMismatch { left: String, right: String },
    #[error("{what}: expected {expected} values, got {got}")]
    WrongLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("rotation angle {angle} is on the logarithm branch cut")]
    BranchCut { angle: f64 },
    #[error("zero rotation axis with nonzero angle")]
    DegenerateAxis,
    #[error("empty group set")]
    EmptySet,
    #[error("group with no factors")]
    EmptyGroup,
    #[error("unrecognized tag {0:?}")]
    BadTag(String),
    #[error("subgroup {kind} does not live in {ambient}")]
    BadSubgroup { kind: String, ambient: String },
}

use crate::Scalar;

/// Matrix realization of exp(v) together with ∂M/∂v_k for every algebra
/// coordinate k, all dense row-major n×n.
///
/// The matrix comes straight from the closed forms without recanonicalizing,
/// so it is differentiable in `coords` everywhere.
#[derive(Clone, Debug)]
pub struct ExpJacobian<T> {
    pub matrix: Vec<T>,
    pub partials: Vec<Vec<T>>,
}

pub fn exp_with_jacobian<T: Scalar>(spec: &GroupSpec, coords: &[T]) -> ExpJacobian<T> {
    let slots = spec.slots();
    let n = spec.matrix_dim();
    let mut matrix = vec![T::zero(); n * n];
    let mut partials = vec![vec![T::zero(); n * n]; spec.algebra_dim()];
    for slot in slots {
        let b = slot.block;
        match slot.factor {
            Factor::So2 => {
                let t = coords[slot.algebra];
                let (m, d) = (closed_form::so2_matrix(t), closed_form::so2_derivative(t));
                for i in 0..2 {
                    for j in 0..2 {
                        matrix[(b + i) * n + b + j] = m[2 * i + j];
                        partials[slot.algebra][(b + i) * n + b + j] = d[2 * i + j];
                    }
                }
            }
            Factor::So3 => {
                let c = &coords[slot.algebra..slot.algebra + 3];
                let (m, jac) = closed_form::rodrigues_with_jacobian([c[0], c[1], c[2]]);
                for i in 0..3 {
                    for j in 0..3 {
                        matrix[(b + i) * n + b + j] = m[3 * i + j];
                        for (k, d) in jac.iter().enumerate() {
                            partials[slot.algebra + k][(b + i) * n + b + j] = d[3 * i + j];
                        }
                    }
                }
            }
        }
    }
    ExpJacobian { matrix, partials }
}

impl<T: Scalar> ExpJacobian<T> {
    /// Pulls a gradient w.r.t. the matrix back to the algebra coordinates.
    pub fn pullback(&self, grad_matrix: &[T]) -> Vec<T> {
        self.partials
            .iter()
            .map(|p| p.iter().zip(grad_matrix).map(|(a, b)| *a * *b).sum())
            .collect()
    }
}
