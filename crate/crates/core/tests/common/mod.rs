#![allow(dead_code)]

pub mod gradient;

use equin::group::{AlgebraVector, GroupElement, GroupSpec};

/// Truncated matrix Taylor series Σ_{k<terms} Vᵏ/k! of the exponential.
pub fn taylor_exp(v: &AlgebraVector<f64>, terms: usize) -> Vec<f64> {
    let m = v.to_matrix();
    let n = (m.len() as f64).sqrt() as usize;
    let mut out = vec![0.0; n * n];
    let mut power = vec![0.0; n * n];
    for i in 0..n {
        power[i * n + i] = 1.0;
    }
    for k in 0..terms {
        for i in 0..n * n {
            out[i] += power[i];
        }
        let mut next = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                next[i * n + j] =
                    (0..n).map(|l| power[i * n + l] * m[l * n + j]).sum::<f64>() / (k + 1) as f64;
            }
        }
        power = next;
    }
    out
}

pub fn matmul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = (a.len() as f64).sqrt() as usize;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (0..n).map(|k| a[i * n + k] * b[k * n + j]).sum();
        }
    }
    out
}

pub fn transpose(a: &[f64]) -> Vec<f64> {
    let n = (a.len() as f64).sqrt() as usize;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = a[i * n + j];
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// ‖MᵀM − I‖_F.
pub fn orthogonality_defect(m: &[f64]) -> f64 {
    let n = (m.len() as f64).sqrt() as usize;
    let mtm = matmul(&transpose(m), m);
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let e = mtm[i * n + j] - if i == j { 1.0 } else { 0.0 };
            s += e * e;
        }
    }
    s.sqrt()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &[f64]) -> f64 {
    let n = (m.len() as f64).sqrt() as usize;
    let mut a = m.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i * n + c].abs().partial_cmp(&a[j * n + c].abs()).unwrap())
            .unwrap();
        if a[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for j in 0..n {
                a.swap(p * n + j, c * n + j);
            }
            det = -det;
        }
        det *= a[c * n + c];
        for r in c + 1..n {
            let f = a[r * n + c] / a[c * n + c];
            for j in c..n {
                a[r * n + j] -= f * a[c * n + j];
            }
        }
    }
    det
}

pub fn group_kinds() -> Vec<GroupSpec> {
    vec![
        GroupSpec::So2,
        GroupSpec::So3,
        GroupSpec::Torus(2),
        GroupSpec::Product(vec![GroupSpec::So3, GroupSpec::So2]),
    ]
}

pub fn rebuild(g: &GroupElement<f64>) -> GroupElement<f64> {
    GroupElement::from_params(g.spec(), g.params()).unwrap()
}
