//! Closed-form exponential maps and their derivatives for the atomic factors.
//!
//! 3x3 matrices are row-major `[T; 9]`, 2x2 matrices row-major `[T; 4]`.

use crate::Scalar;

pub type Mat2<T> = [T; 4];
pub type Mat3<T> = [T; 9];

pub fn so2_matrix<T: Scalar>(theta: T) -> Mat2<T> {
    let (s, c) = theta.sin_cos();
    [c, -s, s, c]
}

/// d/dθ of the SO(2) rotation matrix.
pub fn so2_derivative<T: Scalar>(theta: T) -> Mat2<T> {
    let (s, c) = theta.sin_cos();
    [-s, -c, c, -s]
}

pub fn hat<T: Scalar>(v: [T; 3]) -> Mat3<T> {
    let z = T::zero();
    [z, -v[2], v[1], v[2], z, -v[0], -v[1], v[0], z]
}

pub fn mat3_mul<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = [T::zero(); 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = (0..3).map(|k| a[3 * i + k] * b[3 * k + j]).sum();
        }
    }
    out
}

fn identity3<T: Scalar>() -> Mat3<T> {
    let (o, z) = (T::one(), T::zero());
    [o, z, z, z, o, z, z, z, o]
}

/// Coefficients sin(θ)/θ and (1 - cos θ)/θ² of Rodrigues' formula.
fn rodrigues_coeffs<T: Scalar>(theta: T) -> (T, T) {
    if theta < T::small_angle() {
        let t2 = theta * theta;
        let a = T::one()
            - t2 / T::lit(6.0) * (T::one() - t2 / T::lit(20.0) * (T::one() - t2 / T::lit(42.0)));
        let b = T::lit(0.5)
            - t2 / T::lit(24.0) * (T::one() - t2 / T::lit(30.0) * (T::one() - t2 / T::lit(56.0)));
        (a, b)
    } else {
        (
            theta.sin() / theta,
            (T::one() - theta.cos()) / (theta * theta),
        )
    }
}

/// Derivatives of the Rodrigues coefficients divided by θ.
fn rodrigues_coeff_slopes<T: Scalar>(theta: T) -> (T, T) {
    if theta < T::small_angle() {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        let c1 = -T::one() / T::lit(3.0) + t2 / T::lit(30.0) - t4 / T::lit(840.0)
            + t4 * t2 / T::lit(45360.0);
        let c2 = -T::one() / T::lit(12.0) + t2 / T::lit(180.0) - t4 / T::lit(6720.0)
            + t4 * t2 / T::lit(453600.0);
        (c1, c2)
    } else {
        let (s, c) = theta.sin_cos();
        let t3 = theta * theta * theta;
        let c1 = (theta * c - s) / t3;
        let c2 = (theta * s - T::lit(2.0) * (T::one() - c)) / (t3 * theta);
        (c1, c2)
    }
}

fn norm3<T: Scalar>(v: [T; 3]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Rodrigues' formula: exp of the axis-angle vector `v`.
pub fn rodrigues<T: Scalar>(v: [T; 3]) -> Mat3<T> {
    let (a, b) = rodrigues_coeffs(norm3(v));
    let k = hat(v);
    let k2 = mat3_mul(&k, &k);
    let mut r = identity3();
    for i in 0..9 {
        r[i] += a * k[i] + b * k2[i];
    }
    r
}

/// Rodrigues' formula together with the partial derivatives dR/dv_i.
pub fn rodrigues_with_jacobian<T: Scalar>(v: [T; 3]) -> (Mat3<T>, [Mat3<T>; 3]) {
    let theta = norm3(v);
    let (a, b) = rodrigues_coeffs(theta);
    let (c1, c2) = rodrigues_coeff_slopes(theta);
    let k = hat(v);
    let k2 = mat3_mul(&k, &k);
    let mut r = identity3();
    for i in 0..9 {
        r[i] += a * k[i] + b * k2[i];
    }
    let mut jac = [[T::zero(); 9]; 3];
    for (axis, d) in jac.iter_mut().enumerate() {
        let mut e = [T::zero(); 3];
        e[axis] = T::one();
        let ei = hat(e);
        let eik = mat3_mul(&ei, &k);
        let kei = mat3_mul(&k, &ei);
        for j in 0..9 {
            d[j] = c1 * v[axis] * k[j] + a * ei[j] + c2 * v[axis] * k2[j] + b * (eik[j] + kei[j]);
        }
    }
    (r, jac)
}

/// Rotation about a unit `axis` by `angle`.
pub fn axis_angle_matrix<T: Scalar>(axis: [T; 3], angle: T) -> Mat3<T> {
    let (s, c) = angle.sin_cos();
    let k = hat(axis);
    let k2 = mat3_mul(&k, &k);
    let mut r = identity3();
    for i in 0..9 {
        r[i] += s * k[i] + (T::one() - c) * k2[i];
    }
    r
}

fn vee_antisym<T: Scalar>(m: &Mat3<T>) -> [T; 3] {
    let h = T::lit(0.5);
    [h * (m[7] - m[5]), h * (m[2] - m[6]), h * (m[3] - m[1])]
}

/// Canonical axis-angle of a rotation matrix: unit axis, angle in [0, π].
///
/// The identity maps to axis e_z. At angle π the axis sign is fixed so that
/// its first nonzero coordinate is positive.
pub fn matrix_to_axis_angle<T: Scalar>(m: &Mat3<T>) -> ([T; 3], T) {
    let w = vee_antisym(m);
    let sin_t = norm3(w);
    let cos_t = ((m[0] + m[4] + m[8] - T::one()) * T::lit(0.5))
        .max(-T::one())
        .min(T::one());
    let angle = sin_t.atan2(cos_t);
    let zero = T::zero();
    if angle <= T::epsilon() {
        return ([zero, zero, T::one()], zero);
    }
    let mut axis = if cos_t >= zero {
        [w[0] / sin_t, w[1] / sin_t, w[2] / sin_t]
    } else {
        // (R + Rᵀ)/2 - cos θ I = (1 - cos θ) a aᵀ; read the best-conditioned column.
        let one_minus = T::one() - cos_t;
        let diag = [m[0] - cos_t, m[4] - cos_t, m[8] - cos_t];
        let p = (0..3)
            .max_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap())
            .unwrap();
        let mut col = [zero; 3];
        for (r, c) in col.iter_mut().enumerate() {
            *c = T::lit(0.5) * (m[3 * r + p] + m[3 * p + r]) - if r == p { cos_t } else { zero };
            *c /= one_minus;
        }
        let n = norm3(col);
        let mut a = [col[0] / n, col[1] / n, col[2] / n];
        let dot = a[0] * w[0] + a[1] * w[1] + a[2] * w[2];
        if dot < zero {
            a = [-a[0], -a[1], -a[2]];
        }
        a
    };
    let n = norm3(axis);
    axis = [axis[0] / n, axis[1] / n, axis[2] / n];
    let angle = angle.min(T::PI());
    if T::PI() - angle <= T::lit(4.0) * T::epsilon() {
        if let Some(first) = axis.iter().copied().find(|x| x.abs() > T::epsilon().sqrt()) {
            if first < zero {
                axis = [-axis[0], -axis[1], -axis[2]];
            }
        }
    }
    (axis, angle)
}
