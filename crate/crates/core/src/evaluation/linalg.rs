//! Symmetric eigendecomposition and PCA.

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, sorted by
/// descending eigenvalue. Eigenvectors are returned as rows.
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale: f64 = a
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (values, vectors)
}

/// Principal axes of a sample. With `center`, the covariance about the mean;
/// otherwise the raw second-moment matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    /// `out_dim` orthonormal rows (zero rows past the numerical rank).
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub mean: Vec<f64>,
    pub explained_variance_ratio: f64,
    /// Fewer than `out_dim` directions carry variance.
    pub degenerate: bool,
}

/// Eigenvalues below this fraction of the mean squared sample norm count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

impl Pca {
    pub fn fit(samples: &[Vec<f64>], out_dim: usize, center: bool) -> Option<Self> {
        let dim = samples.first()?.len();
        if samples.len() < out_dim || out_dim > dim || out_dim == 0 {
            return None;
        }
        let count = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        if center {
            for s in samples {
                mean.iter_mut().zip(s).for_each(|(m, x)| *m += x / count);
            }
        }
        let mut cov = vec![vec![0.0; dim]; dim];
        for s in samples {
            let d: Vec<f64> = s.iter().zip(&mean).map(|(x, m)| x - m).collect();
            for i in 0..dim {
                for j in i..dim {
                    cov[i][j] += d[i] * d[j] / count;
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                cov[i][j] = cov[j][i];
            }
        }
        let (values, vectors) = symmetric_eigen(&cov);
        let scale: f64 = samples
            .iter()
            .map(|s| s.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            / count;
        let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
        let mut degenerate = false;
        let components = vectors
            .into_iter()
            .zip(&values)
            .take(out_dim)
            .map(|(mut row, &val)| {
                if scale <= 0.0 || val <= RANK_TOLERANCE * scale {
                    degenerate = true;
                    return vec![0.0; dim];
                }
                if let Some(first) = row.iter().find(|x| x.abs() > 1e-12) {
                    if *first < 0.0 {
                        row.iter_mut().for_each(|x| *x = -*x);
                    }
                }
                row
            })
            .collect();
        let kept: f64 = values.iter().take(out_dim).map(|v| v.max(0.0)).sum();
        Some(Self {
            components,
            eigenvalues: values,
            mean,
            explained_variance_ratio: if total > 0.0 { kept / total } else { 0.0 },
            degenerate,
        })
    }

    /// A·v, applied to the raw vector (no mean subtraction).
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// A·(v − mean).
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = v.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        self.apply(&d)
    }

    /// mean + Aᵀ·coords.
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, row) in coords.iter().zip(&self.components) {
            out.iter_mut().zip(row).for_each(|(o, r)| *o += c * r);
        }
        out
    }
}
