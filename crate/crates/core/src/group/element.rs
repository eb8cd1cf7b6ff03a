use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;

use super::closed_form::{axis_angle_matrix, matrix_to_axis_angle, rodrigues, so2_matrix};
use super::spec::{Factor, FactorSlot, GroupSpec};
use super::GroupError;
use crate::Scalar;

/// Below this distance from π the SO(3) logarithm refuses to pick an axis.
pub const LOG_BRANCH_MARGIN: f64 = 1e-6;

/// An element of a matrix Lie group, kept both as canonical parameters and as
/// its (block-diagonal, row-major) matrix realization.
///
/// Parameters are an angle in [0, 2π) per SO(2) factor and a unit axis plus an
/// angle in [0, π] per SO(3) factor. The matrix is always rebuilt from the
/// canonical parameters, so the two never drift apart.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement<T> {
    spec: GroupSpec,
    params: Vec<T>,
    matrix: Vec<T>,
}

/// Coordinates in the Lie algebra: one per SO(2) factor, an axis-angle vector
/// per SO(3) factor.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraVector<T> {
    spec: GroupSpec,
    coords: Vec<T>,
}

impl<T: Scalar> AlgebraVector<T> {
    pub fn new(spec: GroupSpec, coords: Vec<T>) -> Result<Self, GroupError> {
        let expected = spec.algebra_dim();
        if coords.len() != expected {
            return Err(GroupError::WrongLength {
                what: "algebra coordinates",
                expected,
                got: coords.len(),
            });
        }
        Ok(Self { spec, coords })
    }

    pub fn zero(spec: GroupSpec) -> Self {
        let coords = vec![T::zero(); spec.algebra_dim()];
        Self { spec, coords }
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    /// The algebra element as an n×n (skew-symmetric) matrix.
    pub fn to_matrix(&self) -> Vec<T> {
        let n = self.spec.matrix_dim();
        let mut m = vec![T::zero(); n * n];
        for slot in self.spec.slots() {
            let b = slot.block;
            let c = &self.coords[slot.algebra..];
            match slot.factor {
                Factor::So2 => {
                    m[b * n + b + 1] = -c[0];
                    m[(b + 1) * n + b] = c[0];
                }
                Factor::So3 => {
                    let h = super::closed_form::hat([c[0], c[1], c[2]]);
                    for i in 0..3 {
                        for j in 0..3 {
                            m[(b + i) * n + b + j] = h[3 * i + j];
                        }
                    }
                }
            }
        }
        m
    }
}

fn canonical_angle<T: Scalar>(theta: T) -> T {
    let tau = T::TAU();
    let t = theta - tau * (theta / tau).floor();
    if t >= tau || t < T::zero() {
        T::zero()
    } else {
        t
    }
}

impl<T: Scalar> GroupElement<T> {
    pub fn identity(spec: &GroupSpec) -> Self {
        let mut params = vec![T::zero(); spec.param_dim()];
        for slot in spec.slots() {
            if slot.factor == Factor::So3 {
                params[slot.param + 2] = T::one();
            }
        }
        Self::build(spec.clone(), params)
    }

    /// Rotation of the plane by `theta`.
    pub fn rotation2(theta: T) -> Self {
        Self::build(GroupSpec::So2, vec![canonical_angle(theta)])
    }

    /// Rotation of space about `axis` (need not be unit) by `angle`.
    pub fn rotation3(axis: [T; 3], angle: T) -> Self {
        Self::from_params(&GroupSpec::So3, &[axis[0], axis[1], axis[2], angle])
            .expect("finite axis and angle")
    }

    /// Element of a torus from its per-factor angles.
    pub fn torus(angles: &[T]) -> Self {
        let spec = GroupSpec::Torus(angles.len());
        Self::build(spec, angles.iter().map(|&a| canonical_angle(a)).collect())
    }

    /// Builds an element from (possibly non-canonical) parameters.
    pub fn from_params(spec: &GroupSpec, params: &[T]) -> Result<Self, GroupError> {
        let expected = spec.param_dim();
        if params.len() != expected {
            return Err(GroupError::WrongLength {
                what: "group parameters",
                expected,
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(GroupError::NonFinite("group parameters"));
        }
        let mut canon = params.to_vec();
        for slot in spec.slots() {
            match slot.factor {
                Factor::So2 => canon[slot.param] = canonical_angle(params[slot.param]),
                Factor::So3 => {
                    let p = &params[slot.param..slot.param + 4];
                    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                    if n <= T::epsilon() {
                        if p[3] == T::zero() {
                            canon[slot.param..slot.param + 4].copy_from_slice(&[
                                T::zero(),
                                T::zero(),
                                T::one(),
                                T::zero(),
                            ]);
                            continue;
                        }
                        return Err(GroupError::DegenerateAxis);
                    }
                    if is_canonical_axis_angle(p) {
                        continue;
                    }
                    let axis = [p[0] / n, p[1] / n, p[2] / n];
                    let m = axis_angle_matrix(axis, p[3]);
                    let (a, t) = matrix_to_axis_angle(&m);
                    canon[slot.param..slot.param + 4].copy_from_slice(&[a[0], a[1], a[2], t]);
                }
            }
        }
        Ok(Self::build(spec.clone(), canon))
    }

    /// Projects nothing: `matrix` must already be a valid block rotation matrix.
    pub fn from_matrix(spec: &GroupSpec, matrix: &[T]) -> Result<Self, GroupError> {
        let n = spec.matrix_dim();
        if matrix.len() != n * n {
            return Err(GroupError::WrongLength {
                what: "matrix entries",
                expected: n * n,
                got: matrix.len(),
            });
        }
        if matrix.iter().any(|p| !p.is_finite()) {
            return Err(GroupError::NonFinite("matrix"));
        }
        let mut params = vec![T::zero(); spec.param_dim()];
        for slot in spec.slots() {
            write_params_from_block(&slot, matrix, n, &mut params);
        }
        Ok(Self::build(spec.clone(), params))
    }

    fn build(spec: GroupSpec, params: Vec<T>) -> Self {
        let n = spec.matrix_dim();
        let mut matrix = vec![T::zero(); n * n];
        for slot in spec.slots() {
            let b = slot.block;
            match slot.factor {
                Factor::So2 => {
                    let r = so2_matrix(params[slot.param]);
                    for i in 0..2 {
                        for j in 0..2 {
                            matrix[(b + i) * n + b + j] = r[2 * i + j];
                        }
                    }
                }
                Factor::So3 => {
                    let p = &params[slot.param..];
                    let r = axis_angle_matrix([p[0], p[1], p[2]], p[3]);
                    for i in 0..3 {
                        for j in 0..3 {
                            matrix[(b + i) * n + b + j] = r[3 * i + j];
                        }
                    }
                }
            }
        }
        Self {
            spec,
            params,
            matrix,
        }
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    /// Row-major n×n matrix.
    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.spec.matrix_dim()
    }

    pub fn compose(&self, other: &Self) -> Result<Self, GroupError> {
        self.spec.check_same(&other.spec)?;
        let n = self.dim();
        let mut product = vec![T::zero(); n * n];
        for slot in self.spec.slots() {
            let (b, d) = (slot.block, slot.factor.block_dim());
            for i in b..b + d {
                for j in b..b + d {
                    product[i * n + j] = (b..b + d)
                        .map(|k| self.matrix[i * n + k] * other.matrix[k * n + j])
                        .sum();
                }
            }
        }
        let mut params = vec![T::zero(); self.params.len()];
        for slot in self.spec.slots() {
            write_params_from_block(&slot, &product, n, &mut params);
        }
        Ok(Self::build(self.spec.clone(), params))
    }

    pub fn inverse(&self) -> Self {
        let mut params = self.params.clone();
        for slot in self.spec.slots() {
            match slot.factor {
                Factor::So2 => params[slot.param] = canonical_angle(-params[slot.param]),
                Factor::So3 => {
                    let p = &mut params[slot.param..slot.param + 4];
                    if p[3] > T::zero() && p[3] < T::PI() {
                        p[0] = -p[0];
                        p[1] = -p[1];
                        p[2] = -p[2];
                    }
                }
            }
        }
        Self::build(self.spec.clone(), params)
    }

    /// Squared Frobenius distance between the matrix realizations.
    pub fn distance_sq(&self, other: &Self) -> Result<T, GroupError> {
        self.spec.check_same(&other.spec)?;
        Ok(self
            .matrix
            .iter()
            .zip(&other.matrix)
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum())
    }

    /// Principal logarithm; SO(2) angles land in (−π, π].
    pub fn log(&self) -> Result<AlgebraVector<T>, GroupError> {
        let mut coords = vec![T::zero(); self.spec.algebra_dim()];
        for slot in self.spec.slots() {
            match slot.factor {
                Factor::So2 => {
                    let t = self.params[slot.param];
                    coords[slot.algebra] = if t > T::PI() { t - T::TAU() } else { t };
                }
                Factor::So3 => {
                    let p = &self.params[slot.param..slot.param + 4];
                    if p[3] >= T::PI() - T::lit(LOG_BRANCH_MARGIN) {
                        return Err(GroupError::BranchCut {
                            angle: p[3].as_f64(),
                        });
                    }
                    for i in 0..3 {
                        coords[slot.algebra + i] = p[i] * p[3];
                    }
                }
            }
        }
        Ok(AlgebraVector {
            spec: self.spec.clone(),
            coords,
        })
    }

    /// The element's SO(2) factor angles, in factor order (SO(3) factors skipped).
    pub fn angles(&self) -> Vec<T> {
        self.spec
            .slots()
            .iter()
            .filter(|s| s.factor == Factor::So2)
            .map(|s| self.params[s.param])
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> GroupElement<U> {
        let params: Vec<U> = self.params.iter().map(|p| U::lit(p.as_f64())).collect();
        GroupElement::from_params(&self.spec, &params).expect("finite parameters")
    }
}

/// Already a unit axis with angle in (0, π), so reloading stored parameters
/// reproduces them bit for bit.
fn is_canonical_axis_angle<T: Scalar>(p: &[T]) -> bool {
    let n2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    (n2 - T::one()).abs() <= T::lit(8.0) * T::epsilon() && p[3] > T::epsilon() && p[3] < T::PI()
}

fn write_params_from_block<T: Scalar>(slot: &FactorSlot, m: &[T], n: usize, params: &mut [T]) {
    let b = slot.block;
    match slot.factor {
        Factor::So2 => {
            params[slot.param] = canonical_angle(m[(b + 1) * n + b].atan2(m[b * n + b]));
        }
        Factor::So3 => {
            let mut r = [T::zero(); 9];
            for i in 0..3 {
                for j in 0..3 {
                    r[3 * i + j] = m[(b + i) * n + b + j];
                }
            }
            let (a, t) = matrix_to_axis_angle(&r);
            params[slot.param..slot.param + 4].copy_from_slice(&[a[0], a[1], a[2], t]);
        }
    }
}

/// Exponential map 𝔤 → G via closed forms (angle wrap for SO(2), Rodrigues for SO(3)).
pub fn exp_map<T: Scalar>(
    spec: &GroupSpec,
    v: &AlgebraVector<T>,
) -> Result<GroupElement<T>, GroupError> {
    spec.check_same(&v.spec)?;
    exp_coords(spec, &v.coords)
}

/// [`exp_map`] on raw coordinates.
pub fn exp_coords<T: Scalar>(
    spec: &GroupSpec,
    coords: &[T],
) -> Result<GroupElement<T>, GroupError> {
    let expected = spec.algebra_dim();
    if coords.len() != expected {
        return Err(GroupError::WrongLength {
            what: "algebra coordinates",
            expected,
            got: coords.len(),
        });
    }
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(GroupError::NonFinite("algebra coordinates"));
    }
    let mut params = vec![T::zero(); spec.param_dim()];
    for slot in spec.slots() {
        match slot.factor {
            Factor::So2 => params[slot.param] = canonical_angle(coords[slot.algebra]),
            Factor::So3 => {
                let c = &coords[slot.algebra..slot.algebra + 3];
                let r = rodrigues([c[0], c[1], c[2]]);
                let (a, t) = matrix_to_axis_angle(&r);
                params[slot.param..slot.param + 4].copy_from_slice(&[a[0], a[1], a[2], t]);
            }
        }
    }
    Ok(GroupElement::build(spec.clone(), params))
}

pub fn log_map<T: Scalar>(g: &GroupElement<T>) -> Result<AlgebraVector<T>, GroupError> {
    g.log()
}

/// d_G: squared Frobenius distance.
pub fn metric_dg<T: Scalar>(a: &GroupElement<T>, b: &GroupElement<T>) -> Result<T, GroupError> {
    a.distance_sq(b)
}

/// Draws from the Haar measure: uniform angles on circle factors, uniform
/// unit quaternions on SO(3) factors.
pub fn sample_haar<T: Scalar, R: Rng + ?Sized>(spec: &GroupSpec, rng: &mut R) -> GroupElement<T> {
    let mut params = vec![T::zero(); spec.param_dim()];
    for slot in spec.slots() {
        match slot.factor {
            Factor::So2 => params[slot.param] = canonical_angle(T::lit(rng.random::<f64>() * TAU)),
            Factor::So3 => {
                let mut q: [f64; 4] = [0.0; 4];
                let mut norm = 0.0;
                while norm < 1e-12 {
                    q = std::array::from_fn(|_| rng.sample(StandardNormal));
                    norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                }
                let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
                let w = sign * q[0] / norm;
                let v = [sign * q[1] / norm, sign * q[2] / norm, sign * q[3] / norm];
                let vn = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                let angle = 2.0 * vn.atan2(w);
                let p = if vn < 1e-300 {
                    [0.0, 0.0, 1.0, 0.0]
                } else {
                    [v[0] / vn, v[1] / vn, v[2] / vn, angle]
                };
                let m = axis_angle_matrix(p.map(T::lit)[..3].try_into().unwrap(), T::lit(p[3]));
                let (a, t) = matrix_to_axis_angle(&m);
                params[slot.param..slot.param + 4].copy_from_slice(&[a[0], a[1], a[2], t]);
            }
        }
    }
    GroupElement::build(spec.clone(), params)
}

/// An ordered multiset of elements of one group: a candidate coset.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSet<T> {
    elements: Vec<GroupElement<T>>,
}

impl<T: Scalar> GroupSet<T> {
    pub fn new(elements: Vec<GroupElement<T>>) -> Result<Self, GroupError> {
        let first = elements.first().ok_or(GroupError::EmptySet)?;
        for e in &elements[1..] {
            first.spec.check_same(&e.spec)?;
        }
        Ok(Self { elements })
    }

    pub fn singleton(g: GroupElement<T>) -> Self {
        Self { elements: vec![g] }
    }

    pub fn spec(&self) -> &GroupSpec {
        self.elements[0].spec()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn elements(&self) -> &[GroupElement<T>] {
        &self.elements
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GroupElement<T>> {
        self.elements.iter()
    }

    pub fn into_elements(self) -> Vec<GroupElement<T>> {
        self.elements
    }

    /// g · A = {g a : a ∈ A}, order preserved.
    pub fn left_translate(&self, g: &GroupElement<T>) -> Result<Self, GroupError> {
        let elements = self
            .elements
            .iter()
            .map(|a| g.compose(a))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { elements })
    }

    /// A · g = {a g : a ∈ A}.
    pub fn right_translate(&self, g: &GroupElement<T>) -> Result<Self, GroupError> {
        let elements = self
            .elements
            .iter()
            .map(|a| a.compose(g))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { elements })
    }

    /// g A g⁻¹.
    pub fn conjugate(&self, g: &GroupElement<T>) -> Result<Self, GroupError> {
        self.left_translate(g)?.right_translate(&g.inverse())
    }

    pub fn cast<U: Scalar>(&self) -> GroupSet<U> {
        GroupSet {
            elements: self.elements.iter().map(|e| e.cast()).collect(),
        }
    }
}

impl<'a, T> IntoIterator for &'a GroupSet<T> {
    type Item = &'a GroupElement<T>;
    type IntoIter = std::slice::Iter<'a, GroupElement<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.elements.iter()
    }
}

/// Free-function form of [`GroupSet::left_translate`].
pub fn left_translate<T: Scalar>(
    g: &GroupElement<T>,
    set: &GroupSet<T>,
) -> Result<GroupSet<T>, GroupError> {
    set.left_translate(g)
}
