use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{DatasetError, OrbitSpec};
use crate::group::{enumerate_subgroup, sample_haar, Factor, GroupElement, GroupSet, SubgroupKind};
use crate::random_stream;

/// Width of the symmetrized random-feature block used for SO(3) orbits.
pub const SO3_BASE_DIM: usize = 24;

/// Angles are snapped to a 2π/2³² grid before featurization so that
/// stabilizer-equivalent poses produce bitwise identical features.
const ANGLE_STEPS: f64 = 4_294_967_296.0;
/// Grid for SO(3) representative matrices.
const MATRIX_GRID: f64 = 1_073_741_824.0;

/// Deterministic map from poses of one orbit to feature vectors, exactly
/// invariant under the orbit's stabilizer and injective on the quotient.
#[derive(Clone, Debug)]
pub struct FeatureMap {
    orbit: OrbitSpec,
    kind: BaseKind,
    /// Row-major `feature_dim × (base_dim + tag_dim)`.
    affine: Vec<f64>,
    bias: Vec<f64>,
    base_dim: usize,
}

#[derive(Clone, Debug)]
enum BaseKind {
    /// Frequency per circle factor.
    Circles(Vec<usize>),
    Solid {
        stabilizer: GroupSet<f64>,
        /// Row-major `SO3_BASE_DIM × 9`.
        weights: Vec<f64>,
    },
}

impl FeatureMap {
    pub fn new(orbit: &OrbitSpec) -> Result<Self, DatasetError> {
        orbit.validate()?;
        let mut rng = random_stream(orbit.embed_seed);
        let kind = match orbit.stabilizer.kind() {
            SubgroupKind::Cyclic(n) => BaseKind::Circles(vec![n]),
            SubgroupKind::CyclicProduct(a, b) => BaseKind::Circles(vec![a, b]),
            _ => BaseKind::Solid {
                stabilizer: enumerate_subgroup(&orbit.stabilizer),
                weights: (0..SO3_BASE_DIM * 9)
                    .map(|_| rng.sample(StandardNormal))
                    .collect(),
            },
        };
        let base_dim = match &kind {
            BaseKind::Circles(f) => 2 * f.len(),
            BaseKind::Solid { .. } => SO3_BASE_DIM,
        };
        let inputs = base_dim + orbit.tag_dim;
        let scale = Normal::new(0.0, (1.0 / inputs as f64).sqrt() * 2.0).expect("positive std");
        let affine = (0..orbit.feature_dim * inputs)
            .map(|_| scale.sample(&mut rng))
            .collect();
        let bias = (0..orbit.feature_dim)
            .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self {
            orbit: orbit.clone(),
            kind,
            affine,
            bias,
            base_dim,
        })
    }

    pub fn orbit(&self) -> &OrbitSpec {
        &self.orbit
    }

    fn base_features(&self, pose: &GroupElement<f64>) -> Vec<f64> {
        match &self.kind {
            BaseKind::Circles(freqs) => {
                let angles = pose.angles();
                freqs
                    .iter()
                    .zip(angles)
                    .flat_map(|(&nu, theta)| {
                        let u = (nu as f64 * theta).rem_euclid(std::f64::consts::TAU);
                        let step = (u / std::f64::consts::TAU * ANGLE_STEPS).round() as u64
                            % (ANGLE_STEPS as u64);
                        let snapped = step as f64 / ANGLE_STEPS * std::f64::consts::TAU;
                        [snapped.cos(), snapped.sin()]
                    })
                    .collect()
            }
            BaseKind::Solid {
                stabilizer,
                weights,
            } => {
                let rep = canonical_representative(pose, stabilizer);
                let mut acc = vec![0.0; SO3_BASE_DIM];
                for h in stabilizer {
                    let m = mat3(&rep, h.matrix());
                    for (r, a) in acc.iter_mut().enumerate() {
                        let z: f64 = (0..9).map(|k| weights[9 * r + k] * m[k]).sum();
                        *a += z.tanh();
                    }
                }
                let inv = 1.0 / stabilizer.len() as f64;
                acc.iter_mut().for_each(|a| *a *= inv);
                acc
            }
        }
    }

    /// Noise-free features of `pose`.
    pub fn embed(&self, pose: &GroupElement<f64>) -> Result<Vec<f64>, DatasetError> {
        if !pose.spec().same_group(&self.orbit.group) {
            return Err(DatasetError::SpecMismatch(format!(
                "pose in {} for orbit in {}",
                pose.spec(),
                self.orbit.group
            )));
        }
        let mut input = self.base_features(pose);
        input.extend((0..self.orbit.tag_dim).map(|i| {
            if i == self.orbit.orbit_id as usize {
                1.0
            } else {
                0.0
            }
        }));
        let cols = self.base_dim + self.orbit.tag_dim;
        Ok((0..self.orbit.feature_dim)
            .map(|r| {
                self.bias[r]
                    + (0..cols)
                        .map(|c| self.affine[r * cols + c] * input[c])
                        .sum::<f64>()
            })
            .collect())
    }

    /// Features of `pose` plus i.i.d. Gaussian noise.
    pub fn observe<R: Rng + ?Sized>(
        &self,
        pose: &GroupElement<f64>,
        noise_sigma: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>, DatasetError> {
        let mut f = self.embed(pose)?;
        if noise_sigma > 0.0 {
            let noise =
                Normal::new(0.0, noise_sigma).map_err(|e| DatasetError::Invalid(e.to_string()))?;
            f.iter_mut().for_each(|v| *v += noise.sample(rng));
        }
        Ok(f)
    }

    /// x ~ Haar, g ~ Haar, y = g·x.
    pub fn sample_triplet<R: Rng + ?Sized>(
        &self,
        noise_sigma: f64,
        rng: &mut R,
    ) -> Result<super::Triplet, DatasetError> {
        let x_pose: GroupElement<f64> = sample_haar(&self.orbit.group, rng);
        let g: GroupElement<f64> = sample_haar(&self.orbit.group, rng);
        self.triplet_from(x_pose, g, noise_sigma, rng)
    }

    pub fn triplet_from<R: Rng + ?Sized>(
        &self,
        x_pose: GroupElement<f64>,
        g: GroupElement<f64>,
        noise_sigma: f64,
        rng: &mut R,
    ) -> Result<super::Triplet, DatasetError> {
        let y_pose = g
            .compose(&x_pose)
            .map_err(|e| DatasetError::SpecMismatch(e.to_string()))?;
        let x = super::Datapoint {
            features: self.observe(&x_pose, noise_sigma, rng)?,
            orbit_id: self.orbit.orbit_id,
            pose: x_pose,
        };
        let y = super::Datapoint {
            features: self.observe(&y_pose, noise_sigma, rng)?,
            orbit_id: self.orbit.orbit_id,
            pose: y_pose,
        };
        Ok(super::Triplet { x, g, y })
    }
}

fn mat3(a: &[f64], b: &[f64]) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = (0..3).map(|k| a[3 * i + k] * b[3 * k + j]).sum();
        }
    }
    out
}

/// The element of pose·H closest to the identity, snapped to a fixed grid.
fn canonical_representative(pose: &GroupElement<f64>, stabilizer: &GroupSet<f64>) -> Vec<f64> {
    let snap = |m: &[f64]| -> Vec<f64> {
        m.iter()
            .map(|x| (x * MATRIX_GRID).round() / MATRIX_GRID)
            .collect()
    };
    debug_assert!(pose.spec().factors() == [Factor::So3]);
    stabilizer
        .iter()
        .map(|h| snap(&mat3(pose.matrix(), h.matrix())))
        .max_by(|a, b| {
            let (ta, tb) = (a[0] + a[4] + a[8], b[0] + b[4] + b[8]);
            ta.partial_cmp(&tb)
                .unwrap()
                .then_with(|| b.partial_cmp(a).unwrap())
        })
        .expect("nonempty stabilizer")
}
