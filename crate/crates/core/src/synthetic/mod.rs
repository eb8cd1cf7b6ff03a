//! Procedural non-free group actions: five dataset families with exactly
//! known stabilizers, triplet sampling and on-disk storage.
//!
//! Images are replaced by feature vectors: a stabilizer-invariant base
//! signature of the pose, concatenated with a one-hot orbit tag and pushed
//! through a fixed random affine map.

mod embed;
mod format;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

pub use embed::{FeatureMap, SO3_BASE_DIM};
pub use format::{DATASET_MAGIC, DATASET_VERSION};

use crate::group::{FiniteSubgroupSpec, GroupElement, GroupSpec, SubgroupKind};
use crate::{random_stream, Scalar};

pub const DEFAULT_FEATURE_DIM: usize = 32;
pub const DEFAULT_NOISE_SIGMA: f64 = 0.01;
/// Every tenth triplet of an orbit is held out for testing.
pub const TEST_FRACTION_DENOMINATOR: usize = 10;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dataset file: {0}")]
    Malformed(String),
    #[error("not a dataset file (bad magic)")]
    BadMagic,
    #[error("unsupported dataset version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("group mismatch: {0}")]
    SpecMismatch(String),
    #[error("invalid dataset spec: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DatasetName {
    RotatingArrows,
    ColoredArrows,
    DoubleArrows,
    ModelNetLike,
    Solids,
}

impl DatasetName {
    pub const ALL: [DatasetName; 5] = [
        DatasetName::RotatingArrows,
        DatasetName::ColoredArrows,
        DatasetName::DoubleArrows,
        DatasetName::ModelNetLike,
        DatasetName::Solids,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            DatasetName::RotatingArrows => "rotating-arrows",
            DatasetName::ColoredArrows => "colored-arrows",
            DatasetName::DoubleArrows => "double-arrows",
            DatasetName::ModelNetLike => "modelnet",
            DatasetName::Solids => "solids",
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DatasetName {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|n| n.tag() == s)
            .ok_or_else(|| DatasetError::Invalid(format!("unknown dataset {s:?}")))
    }
}

/// One orbit: its group, stabilizer and the parameters of its feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitSpec {
    pub group: GroupSpec,
    pub stabilizer: FiniteSubgroupSpec,
    pub orbit_id: u32,
    pub feature_dim: usize,
    pub embed_seed: u64,
    /// Length of the one-hot orbit tag (number of orbits in the family).
    pub tag_dim: usize,
}

impl OrbitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if !self.stabilizer.ambient().same_group(&self.group) {
            return Err(DatasetError::Invalid(format!(
                "stabilizer {} does not live in {}",
                self.stabilizer, self.group
            )));
        }
        if self.feature_dim < 2 * self.group.algebra_dim() {
            return Err(DatasetError::Invalid(format!(
                "feature_dim {} below twice the algebra dimension of {}",
                self.feature_dim, self.group
            )));
        }
        if self.orbit_id as usize >= self.tag_dim.max(1) {
            return Err(DatasetError::Invalid(format!(
                "orbit id {} outside a tag of width {}",
                self.orbit_id, self.tag_dim
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub name: DatasetName,
    pub orbits: Vec<OrbitSpec>,
    pub triplets_per_orbit: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Mixes a stream id into a seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl DatasetSpec {
    /// The published orbit/stabilizer/size table for each family.
    pub fn preset(name: DatasetName, seed: u64) -> Self {
        let so2 = GroupSpec::So2;
        let (group, stabilizers, per_orbit): (GroupSpec, Vec<FiniteSubgroupSpec>, usize) =
            match name {
                DatasetName::RotatingArrows => {
                    (so2, (1..=5).map(FiniteSubgroupSpec::cyclic).collect(), 2500)
                }
                DatasetName::ColoredArrows => (
                    so2,
                    (0..5)
                        .flat_map(|_| (1..=5).map(FiniteSubgroupSpec::cyclic))
                        .collect(),
                    2000,
                ),
                DatasetName::DoubleArrows => (
                    GroupSpec::Torus(2),
                    vec![
                        FiniteSubgroupSpec::cyclic_product(2, 3),
                        FiniteSubgroupSpec::cyclic_product(3, 5),
                    ],
                    2000,
                ),
                DatasetName::ModelNetLike => (
                    so2,
                    [4, 4, 4, 1, 1].map(FiniteSubgroupSpec::cyclic).to_vec(),
                    2500,
                ),
                DatasetName::Solids => (
                    GroupSpec::So3,
                    [
                        SubgroupKind::Tetrahedral,
                        SubgroupKind::Octahedral,
                        SubgroupKind::Icosahedral,
                    ]
                    .map(FiniteSubgroupSpec::polyhedral)
                    .to_vec(),
                    7500,
                ),
            };
        let embed_seed = derive_seed(seed, 0xE4BED);
        let tag_dim = stabilizers.len();
        let orbits = stabilizers
            .into_iter()
            .enumerate()
            .map(|(i, stabilizer)| OrbitSpec {
                group: group.clone(),
                stabilizer,
                orbit_id: i as u32,
                feature_dim: DEFAULT_FEATURE_DIM,
                embed_seed,
                tag_dim,
            })
            .collect();
        Self {
            name,
            orbits,
            triplets_per_orbit: per_orbit,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            seed,
        }
    }

    /// Keeps only the orbits matching `keep`; ids and tags are unchanged.
    pub fn retain_orbits(mut self, keep: impl Fn(&OrbitSpec) -> bool) -> Self {
        self.orbits.retain(|o| keep(o));
        self
    }

    pub fn with_triplets_per_orbit(mut self, n: usize) -> Self {
        self.triplets_per_orbit = n;
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_feature_dim(mut self, dim: usize) -> Self {
        self.orbits.iter_mut().for_each(|o| o.feature_dim = dim);
        self
    }

    pub fn group(&self) -> Option<&GroupSpec> {
        self.orbits.first().map(|o| &o.group)
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.orbits.first().map(|o| o.feature_dim)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let first = self
            .orbits
            .first()
            .ok_or_else(|| DatasetError::Invalid("no orbits".into()))?;
        for o in &self.orbits {
            o.validate()?;
            if !o.group.same_group(&first.group) || o.feature_dim != first.feature_dim {
                return Err(DatasetError::Invalid(
                    "orbits disagree on group or feature dimension".into(),
                ));
            }
        }
        if self.triplets_per_orbit == 0 {
            return Err(DatasetError::Invalid(
                "triplets_per_orbit must be positive".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(DatasetError::Invalid(
                "noise_sigma must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn orbit(&self, orbit_id: u32) -> Option<&OrbitSpec> {
        self.orbits.iter().find(|o| o.orbit_id == orbit_id)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Datapoint {
    pub features: Vec<f64>,
    pub orbit_id: u32,
    /// Ground-truth pose; for evaluation only.
    pub pose: GroupElement<f64>,
}

/// (x, g, y) with y = g·x.
#[derive(Clone, Debug, PartialEq)]
pub struct Triplet {
    pub x: Datapoint,
    pub g: GroupElement<f64>,
    pub y: Datapoint,
}

/// What the trainer is allowed to see: features and the acting element.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingTriplet<T> {
    pub x: Vec<T>,
    pub g: GroupElement<T>,
    pub y: Vec<T>,
}

impl<T: Scalar> TrainingTriplet<T> {
    pub fn from_triplet(t: &Triplet) -> Self {
        Self {
            x: t.x.features.iter().map(|&v| T::lit(v)).collect(),
            g: t.g.cast(),
            y: t.y.features.iter().map(|&v| T::lit(v)).collect(),
        }
    }
}

/// x ~ Haar, g ~ Haar, y = g·x, with independent feature noise on x and y.
pub fn sample_triplet<R: Rng + ?Sized>(
    spec: &DatasetSpec,
    orbit: &OrbitSpec,
    rng: &mut R,
) -> Result<Triplet, DatasetError> {
    FeatureMap::new(orbit)?.sample_triplet(spec.noise_sigma, rng)
}

/// Noise-free features of `pose` in `orbit`.
pub fn embed(orbit: &OrbitSpec, pose: &GroupElement<f64>) -> Result<Vec<f64>, DatasetError> {
    FeatureMap::new(orbit)?.embed(pose)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    spec: DatasetSpec,
    triplets: Vec<Triplet>,
    is_test: Vec<bool>,
}

impl Dataset {
    /// Samples `triplets_per_orbit` triplets for every orbit, each orbit from
    /// its own derived stream, and holds out the last tenth of each orbit.
    pub fn generate(spec: &DatasetSpec) -> Result<Self, DatasetError> {
        spec.validate()?;
        let mut triplets = Vec::with_capacity(spec.orbits.len() * spec.triplets_per_orbit);
        let mut is_test = Vec::with_capacity(triplets.capacity());
        let held_out = spec.triplets_per_orbit / TEST_FRACTION_DENOMINATOR;
        for orbit in &spec.orbits {
            let map = FeatureMap::new(orbit)?;
            let mut rng = random_stream(derive_seed(spec.seed, orbit.orbit_id as u64));
            for i in 0..spec.triplets_per_orbit {
                triplets.push(map.sample_triplet(spec.noise_sigma, &mut rng)?);
                is_test.push(i >= spec.triplets_per_orbit - held_out);
            }
        }
        Ok(Self {
            spec: spec.clone(),
            triplets,
            is_test,
        })
    }

    pub(crate) fn from_parts(
        spec: DatasetSpec,
        triplets: Vec<Triplet>,
        is_test: Vec<bool>,
    ) -> Self {
        Self {
            spec,
            triplets,
            is_test,
        }
    }

    pub fn spec(&self) -> &DatasetSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// All triplets with ground truth, for evaluation.
    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn is_test(&self, index: usize) -> bool {
        self.is_test[index]
    }

    pub fn test_triplets(&self) -> Vec<&Triplet> {
        self.triplets
            .iter()
            .zip(&self.is_test)
            .filter(|(_, t)| **t)
            .map(|(x, _)| x)
            .collect()
    }

    pub fn train_triplets(&self) -> Vec<&Triplet> {
        self.triplets
            .iter()
            .zip(&self.is_test)
            .filter(|(_, t)| !**t)
            .map(|(x, _)| x)
            .collect()
    }

    /// Training split stripped of poses and orbit labels.
    pub fn training_view<T: Scalar>(&self) -> Vec<TrainingTriplet<T>> {
        self.train_triplets()
            .into_iter()
            .map(TrainingTriplet::from_triplet)
            .collect()
    }

    pub fn stabilizer_of_orbit(&self, orbit_id: u32) -> Option<&FiniteSubgroupSpec> {
        self.spec.orbit(orbit_id).map(|o| &o.stabilizer)
    }
}


pub(crate) use format::{checked_body as format_checked_body, Reader as FormatReader};
