//! Set-valued distances on group outputs: the asymmetric Chamfer distance and
//! the pairwise-dispersion ("discrete entropy") regularizer, with gradients
//! w.r.t. the Lie-algebra coordinates that produce the sets.

use crate::group::{
    exp_with_jacobian, AlgebraVector, ExpJacobian, GroupElement, GroupError, GroupSet, GroupSpec,
};
use crate::Scalar;

/// Result of [`chamfer`]: the distance and, for every element of `A`, the
/// index of its nearest element in `B` (lowest index on ties).
#[derive(Clone, Debug, PartialEq)]
pub struct SetDistanceReport<T> {
    pub value: T,
    pub argmin: Vec<usize>,
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum()
}

/// Nearest neighbour of each row of `a` among the rows of `b`.
fn nearest<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> (T, Vec<usize>) {
    let mut total = T::zero();
    let argmin = a
        .iter()
        .map(|ai| {
            let (mut best, mut best_d) = (0, sq_dist(ai, &b[0]));
            for (j, bj) in b.iter().enumerate().skip(1) {
                let d = sq_dist(ai, bj);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            total += best_d;
            best
        })
        .collect();
    (total / T::from_usize(a.len()).unwrap(), argmin)
}

/// d(A, B) = mean over a ∈ A of min over b ∈ B of d_G(a, b).
pub fn chamfer<T: Scalar>(
    a: &GroupSet<T>,
    b: &GroupSet<T>,
) -> Result<SetDistanceReport<T>, GroupError> {
    a.spec().check_same(b.spec())?;
    let am: Vec<Vec<T>> = a.iter().map(|g| g.matrix().to_vec()).collect();
    let bm: Vec<Vec<T>> = b.iter().map(|g| g.matrix().to_vec()).collect();
    let (value, argmin) = nearest(&am, &bm);
    Ok(SetDistanceReport { value, argmin })
}

/// (1/N²) Σ_{i,j} d_G(A_i, A_j), without any weighting factor.
pub fn entropy_reg<T: Scalar>(a: &GroupSet<T>) -> T {
    let m: Vec<&[T]> = a.iter().map(|g| g.matrix()).collect();
    dispersion(&m)
}

fn dispersion<T: Scalar>(m: &[&[T]]) -> T {
    let n = m.len();
    let mut total = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            total += sq_dist(m[i], m[j]);
        }
    }
    T::lit(2.0) * total / T::from_usize(n * n).unwrap()
}

/// Value and coordinate gradients of a set loss.
#[derive(Clone, Debug, PartialEq)]
pub struct SetGradient<T> {
    pub value: T,
    pub argmin: Vec<usize>,
    /// ∂/∂ coordinates of each element of `A`.
    pub grad_a: Vec<Vec<T>>,
    /// ∂/∂ coordinates of each element of `B` (empty for single-set losses).
    pub grad_b: Vec<Vec<T>>,
}

fn mat_mul<T: Scalar>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == T::zero() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

fn mat_tmul<T: Scalar>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    for k in 0..n {
        for i in 0..n {
            let aki = a[k * n + i];
            if aki == T::zero() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aki * b[k * n + j];
            }
        }
    }
    out
}

/// Chamfer value and its gradients w.r.t. the matrices of `A` and `B`, where
/// `A` is first left-translated by `g` (given as a matrix). The argmin
/// assignment is held fixed.
pub(crate) fn chamfer_matrix_grad<T: Scalar>(
    g: Option<&[T]>,
    a: &[Vec<T>],
    b: &[Vec<T>],
    n: usize,
) -> (T, Vec<usize>, Vec<Vec<T>>, Vec<Vec<T>>) {
    let translated: Vec<Vec<T>> = match g {
        Some(g) => a.iter().map(|m| mat_mul(g, m, n)).collect(),
        None => a.to_vec(),
    };
    let (value, argmin) = nearest(&translated, b);
    let scale = T::lit(2.0) / T::from_usize(a.len()).unwrap();
    let mut grad_b = vec![vec![T::zero(); n * n]; b.len()];
    let grad_a = translated
        .iter()
        .zip(&argmin)
        .map(|(ta, &j)| {
            let diff: Vec<T> = ta
                .iter()
                .zip(&b[j])
                .map(|(x, y)| scale * (*x - *y))
                .collect();
            for (gb, d) in grad_b[j].iter_mut().zip(&diff) {
                *gb -= *d;
            }
            match g {
                Some(g) => mat_tmul(g, &diff, n),
                None => diff,
            }
        })
        .collect();
    (value, argmin, grad_a, grad_b)
}

/// Dispersion value and its gradient w.r.t. each matrix.
pub(crate) fn entropy_matrix_grad<T: Scalar>(m: &[Vec<T>]) -> (T, Vec<Vec<T>>) {
    let k = m.len();
    let refs: Vec<&[T]> = m.iter().map(|x| x.as_slice()).collect();
    let value = dispersion(&refs);
    let len = m[0].len();
    let mut sum = vec![T::zero(); len];
    for row in m {
        for (s, x) in sum.iter_mut().zip(row) {
            *s += *x;
        }
    }
    let kt = T::from_usize(k).unwrap();
    let scale = T::lit(4.0) / (kt * kt);
    let grads = m
        .iter()
        .map(|row| {
            row.iter()
                .zip(&sum)
                .map(|(x, s)| scale * (kt * *x - *s))
                .collect()
        })
        .collect();
    (value, grads)
}

fn check_coords<T: Scalar>(
    spec: &GroupSpec,
    coords: &[AlgebraVector<T>],
) -> Result<(), GroupError> {
    if coords.is_empty() {
        return Err(GroupError::EmptySet);
    }
    coords.iter().try_for_each(|c| spec.check_same(c.spec()))
}

/// Gradient of chamfer(exp(A), exp(B)) w.r.t. all coordinates, with the
/// nearest-neighbour assignment held fixed.
pub fn chamfer_gradient<T: Scalar>(
    spec: &GroupSpec,
    a_coords: &[AlgebraVector<T>],
    b_coords: &[AlgebraVector<T>],
) -> Result<SetGradient<T>, GroupError> {
    chamfer_gradient_translated(spec, None, a_coords, b_coords)
}

/// Gradient of chamfer(g · exp(A), exp(B)); this is the equivariance loss
/// geometry with `g` the known group action.
pub fn chamfer_gradient_translated<T: Scalar>(
    spec: &GroupSpec,
    g: Option<&GroupElement<T>>,
    a_coords: &[AlgebraVector<T>],
    b_coords: &[AlgebraVector<T>],
) -> Result<SetGradient<T>, GroupError> {
    check_coords(spec, a_coords)?;
    check_coords(spec, b_coords)?;
    if let Some(g) = g {
        spec.check_same(g.spec())?;
    }
    let ja: Vec<ExpJacobian<T>> = a_coords
        .iter()
        .map(|c| exp_with_jacobian(spec, c.coords()))
        .collect();
    let jb: Vec<ExpJacobian<T>> = b_coords
        .iter()
        .map(|c| exp_with_jacobian(spec, c.coords()))
        .collect();
    let am: Vec<Vec<T>> = ja.iter().map(|j| j.matrix.clone()).collect();
    let bm: Vec<Vec<T>> = jb.iter().map(|j| j.matrix.clone()).collect();
    let (value, argmin, ga, gb) =
        chamfer_matrix_grad(g.map(|g| g.matrix()), &am, &bm, spec.matrix_dim());
    Ok(SetGradient {
        value,
        argmin,
        grad_a: ja.iter().zip(&ga).map(|(j, g)| j.pullback(g)).collect(),
        grad_b: jb.iter().zip(&gb).map(|(j, g)| j.pullback(g)).collect(),
    })
}

/// Value and coordinate gradient of entropy_reg(exp(A)).
pub fn entropy_gradient<T: Scalar>(
    spec: &GroupSpec,
    coords: &[AlgebraVector<T>],
) -> Result<SetGradient<T>, GroupError> {
    check_coords(spec, coords)?;
    let ja: Vec<ExpJacobian<T>> = coords
        .iter()
        .map(|c| exp_with_jacobian(spec, c.coords()))
        .collect();
    let m: Vec<Vec<T>> = ja.iter().map(|j| j.matrix.clone()).collect();
    let (value, grads) = entropy_matrix_grad(&m);
    Ok(SetGradient {
        value,
        argmin: Vec::new(),
        grad_a: ja.iter().zip(&grads).map(|(j, g)| j.pullback(g)).collect(),
        grad_b: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn set(angles: &[f64]) -> GroupSet<f64> {
        GroupSet::new(angles.iter().map(|&t| GroupElement::rotation2(t)).collect()).unwrap()
    }

    #[test]
    fn chamfer_is_asymmetric() {
        let a = set(&[0.0]);
        let b = set(&[0.0, PI]);
        assert!(chamfer(&a, &b).unwrap().value.abs() < 1e-12);
        let r = chamfer(&b, &a).unwrap();
        assert!((r.value - 4.0).abs() < 1e-12);
        assert_eq!(r.argmin, vec![0, 0]);
        assert!((chamfer(&set(&[FRAC_PI_2]), &a).unwrap().value - 4.0).abs() < 1e-12);
        assert_eq!(chamfer(&b, &b).unwrap().value, 0.0);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let r = chamfer(&set(&[FRAC_PI_2]), &set(&[0.7, 0.7, 0.1])).unwrap();
        assert_eq!(r.argmin, vec![0]);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_reg(&set(&[0.3, 0.3, 0.3])), 0.0);
        assert!((entropy_reg(&set(&[0.0, PI])) - 4.0).abs() < 1e-12);
        let x = entropy_reg(&set(&[0.1, 1.0, 2.5]));
        let y = entropy_reg(&set(&[2.5, 0.1, 1.0]));
        assert!((x - y).abs() < 1e-14);
    }

    #[test]
    fn mismatched_groups_rejected() {
        let so3 = GroupSet::singleton(GroupElement::<f64>::identity(&GroupSpec::So3));
        assert!(chamfer(&set(&[0.0]), &so3).is_err());
    }

    #[test]
    fn singleton_gradient_is_four_sine() {
        let a = [AlgebraVector::new(GroupSpec::So2, vec![FRAC_PI_2]).unwrap()];
        let b = [AlgebraVector::new(GroupSpec::So2, vec![0.0]).unwrap()];
        let g = chamfer_gradient(&GroupSpec::So2, &a, &b).unwrap();
        assert!((g.grad_a[0][0] - 4.0).abs() < 1e-12);
        assert!((g.grad_b[0][0] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn equal_sets_have_zero_gradient() {
        let coords: Vec<_> = [[0.2, -0.4, 0.9], [1.0, 0.3, -0.2]]
            .iter()
            .map(|c| AlgebraVector::<f64>::new(GroupSpec::So3, c.to_vec()).unwrap())
            .collect();
        let g = chamfer_gradient::<f64>(&GroupSpec::So3, &coords, &coords).unwrap();
        assert!(g.value.abs() < 1e-24);
        assert!(g
            .grad_a
            .iter()
            .chain(&g.grad_b)
            .flatten()
            .all(|x| x.abs() < 1e-12));
    }
}
