//! Quantitative metrics: hit-rate, the PCA-based disentanglement estimate,
//! the head-dispersion diagnostic and stabilizer recovery.
//!
//! Metrics run in f64 on [`Embedder`]s, so trained models, the ground-truth
//! coset map and degenerate references are scored by the same code.

mod linalg;
mod report;

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

pub use linalg::{symmetric_eigen, Pca, RANK_TOLERANCE};
pub use report::{
    write_embeddings_csv, MetricsRow, EMBEDDINGS_HEADER, METRICS_CSV_HEADER, METRICS_CSV_VERSION,
};

use crate::encoder::{forward, EncoderConfig, EncoderError, EncoderParams};
use crate::group::{
    enumerate_subgroup, exp_map, log_map, AlgebraVector, Factor, GroupElement, GroupError,
    GroupSet, GroupSpec,
};
use crate::set_metrics::{chamfer, entropy_reg};
use crate::synthetic::{Datapoint, Dataset, DatasetSpec, Triplet};
use crate::{random_stream, Scalar};

/// Single-linkage merge threshold on d_G.
pub const CLUSTER_THRESHOLD: f64 = 0.1;
/// Tolerance of the coset comparison in stabilizer recovery.
pub const RECOVERY_TOLERANCE: f64 = 0.1;
/// Frequencies tried by the latent action fit.
pub const MAX_FREQUENCY: u32 = 10;
/// Pairs sampled per orbit by the disentanglement estimate.
pub const DISENTANGLEMENT_PAIRS: usize = 10_000;
/// Pairs sampled per candidate during the grid search.
pub const FIT_PAIRS: usize = 2_000;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error("need at least {need} test points, have {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// One point of 𝒵 = 𝒵_G × 𝒵_O.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub set: GroupSet<f64>,
    pub orbit: Vec<f64>,
}

pub trait Embedder {
    fn group(&self) -> &GroupSpec;
    fn embed(&self, point: &Datapoint) -> Result<Embedding, EvalError>;
}

/// A trained encoder, evaluated in its own scalar type.
#[derive(Clone, Debug)]
pub struct ModelEmbedder<T> {
    pub config: EncoderConfig,
    pub params: EncoderParams<T>,
}

impl<T: Scalar> ModelEmbedder<T> {
    pub fn new(config: EncoderConfig, params: EncoderParams<T>) -> Self {
        Self { config, params }
    }
}

impl<T: Scalar> Embedder for ModelEmbedder<T> {
    fn group(&self) -> &GroupSpec {
        &self.config.group
    }

    fn embed(&self, point: &Datapoint) -> Result<Embedding, EvalError> {
        let x: Vec<T> = point.features.iter().map(|v| T::lit(*v)).collect();
        let pass = forward(&self.params, &self.config, &x)?;
        Ok(Embedding {
            set: pass.group_set(&self.config)?.cast(),
            orbit: pass.orbit()?.iter().map(|v| v.as_f64()).collect(),
        })
    }
}

/// The ground-truth map x ↦ (pose·H, orbit vector), with the coset cycled
/// over `heads` outputs. Orbit vectors are spread on the unit sphere.
#[derive(Clone, Debug)]
pub struct CosetOracle {
    group: GroupSpec,
    heads: usize,
    cosets: BTreeMap<u32, (GroupSet<f64>, Vec<f64>)>,
}

fn sphere_point(i: usize, n: usize) -> Vec<f64> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
    let r = (1.0 - z * z).sqrt();
    let phi = golden * i as f64;
    vec![r * phi.cos(), r * phi.sin(), z]
}

impl CosetOracle {
    pub fn new(spec: &DatasetSpec, heads: usize) -> Result<Self, EvalError> {
        let group = spec
            .group()
            .cloned()
            .ok_or_else(|| EvalError::InvalidConfig("dataset has no orbits".into()))?;
        if heads == 0 {
            return Err(EvalError::InvalidConfig("heads must be positive".into()));
        }
        let n = spec.orbits.len();
        let cosets = spec
            .orbits
            .iter()
            .enumerate()
            .map(|(i, o)| {
                (
                    o.orbit_id,
                    (enumerate_subgroup::<f64>(&o.stabilizer), sphere_point(i, n)),
                )
            })
            .collect();
        Ok(Self {
            group,
            heads,
            cosets,
        })
    }
}

impl Embedder for CosetOracle {
    fn group(&self) -> &GroupSpec {
        &self.group
    }

    fn embed(&self, point: &Datapoint) -> Result<Embedding, EvalError> {
        let (h, orbit) = self
            .cosets
            .get(&point.orbit_id)
            .ok_or_else(|| EvalError::InvalidConfig(format!("unknown orbit {}", point.orbit_id)))?;
        let elements = (0..self.heads)
            .map(|i| point.pose.compose(&h.elements()[i % h.len()]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Embedding {
            set: GroupSet::new(elements)?,
            orbit: orbit.clone(),
        })
    }
}

/// Returns the same embedding for every input.
#[derive(Clone, Debug)]
pub struct ConstantEmbedder {
    pub embedding: Embedding,
}

impl ConstantEmbedder {
    pub fn identity(group: &GroupSpec, heads: usize) -> Self {
        let set =
            GroupSet::new(vec![GroupElement::identity(group); heads.max(1)]).expect("nonempty");
        Self {
            embedding: Embedding {
                set,
                orbit: vec![0.0, 0.0, 1.0],
            },
        }
    }
}

impl Embedder for ConstantEmbedder {
    fn group(&self) -> &GroupSpec {
        self.embedding.set.spec()
    }

    fn embed(&self, _: &Datapoint) -> Result<Embedding, EvalError> {
        Ok(self.embedding.clone())
    }
}

/// x and y of every test triplet, in triplet order.
pub fn test_points(dataset: &Dataset) -> Vec<&Datapoint> {
    dataset
        .test_triplets()
        .into_iter()
        .flat_map(|t| [&t.x, &t.y])
        .collect()
}

/// Training latent metric: Chamfer on 𝒵_G plus d_O(a, b) = −a·b on 𝒵_O.
pub fn latent_distance(
    query: &GroupSet<f64>,
    query_orbit: &[f64],
    candidate: &Embedding,
) -> Result<f64, EvalError> {
    let d_o: f64 = -query_orbit
        .iter()
        .zip(&candidate.orbit)
        .map(|(a, b)| a * b)
        .sum::<f64>();
    Ok(chamfer(query, &candidate.set)?.value + d_o)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HitRateConfig {
    /// Pool size |ℬ|: the target plus `batch_size − 1` decoys.
    pub batch_size: usize,
    /// Passes over the test triplets, each with fresh decoys.
    pub trials: usize,
    pub seed: u64,
}

impl Default for HitRateConfig {
    fn default() -> Self {
        Self {
            batch_size: 20,
            trials: 1,
            seed: 0,
        }
    }
}

/// Fraction of test triplets whose g·φ(x) has φ(y) as strict nearest
/// neighbour in a pool of φ(y) and `B − 1` decoys drawn with replacement
/// from the other test datapoints. Ties count as misses.
pub fn hit_rate(
    embedder: &dyn Embedder,
    triplets: &[&Triplet],
    config: &HitRateConfig,
) -> Result<f64, EvalError> {
    if config.batch_size < 2 || config.trials == 0 {
        return Err(EvalError::InvalidConfig(
            "batch_size ≥ 2 and trials ≥ 1 required".into(),
        ));
    }
    let pool_len = 2 * triplets.len();
    if pool_len < config.batch_size {
        return Err(EvalError::TooFewPoints {
            need: config.batch_size,
            got: pool_len,
        });
    }
    let mut pool = Vec::with_capacity(pool_len);
    for t in triplets {
        pool.push(embedder.embed(&t.x)?);
        pool.push(embedder.embed(&t.y)?);
    }
    let mut rng = random_stream(config.seed);
    let mut hits = 0usize;
    for _ in 0..config.trials {
        for (i, t) in triplets.iter().enumerate() {
            let source = &pool[2 * i];
            let query = source.set.left_translate(&t.g)?;
            let target = latent_distance(&query, &source.orbit, &pool[2 * i + 1])?;
            let mut hit = true;
            for _ in 1..config.batch_size {
                let j = loop {
                    let j = rng.random_range(0..pool_len);
                    if j != 2 * i + 1 {
                        break j;
                    }
                };
                if latent_distance(&query, &source.orbit, &pool[j])? <= target {
                    hit = false;
                }
            }
            hits += hit as usize;
        }
    }
    Ok(hits as f64 / (config.trials * triplets.len()) as f64)
}

/// Mean over points of entropy_reg(φ_G(x)), without λ.
pub fn entropy_diagnostic(
    embedder: &dyn Embedder,
    points: &[&Datapoint],
) -> Result<f64, EvalError> {
    if points.is_empty() {
        return Err(EvalError::TooFewPoints { need: 1, got: 0 });
    }
    let mut total = 0.0;
    for p in points {
        total += entropy_reg(&embedder.embed(p)?.set);
    }
    Ok(total / points.len() as f64)
}

/// Single-linkage clusters of a set under d_G < `threshold`, each listed by
/// member index and ordered by smallest member.
pub fn head_clusters(set: &GroupSet<f64>, threshold: f64) -> Vec<Vec<usize>> {
    let n = set.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let e = set.elements();
    for i in 0..n {
        for j in i + 1..n {
            if e[i].distance_sq(&e[j]).expect("homogeneous set") < threshold {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// One Karcher step from the first member: c₀·exp(mean log(c₀⁻¹ m)).
/// Falls back to c₀ when a logarithm sits on the branch cut.
pub fn cluster_centroid(members: &[&GroupElement<f64>]) -> Result<GroupElement<f64>, EvalError> {
    let c0 = members[0];
    let inv = c0.inverse();
    let spec = c0.spec().clone();
    let mut mean = vec![0.0; spec.algebra_dim()];
    for m in members {
        match log_map(&inv.compose(m)?) {
            Ok(v) => mean
                .iter_mut()
                .zip(v.coords())
                .for_each(|(a, b)| *a += b / members.len() as f64),
            Err(GroupError::BranchCut { .. }) => return Ok(c0.clone()),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(c0.compose(&exp_map(&spec, &AlgebraVector::new(spec.clone(), mean)?)?)?)
}

/// Number of head clusters for each point.
pub fn cluster_counts(
    embedder: &dyn Embedder,
    points: &[&Datapoint],
) -> Result<Vec<usize>, EvalError> {
    points
        .iter()
        .map(|p| Ok(head_clusters(&embedder.embed(p)?.set, CLUSTER_THRESHOLD).len()))
        .collect()
}

/// Whether the cluster centroids of `predicted` coincide with a left coset
/// g·H of the subgroup `h`, trying g = C₀·r⁻¹ for every r ∈ H.
pub fn recovers_coset(predicted: &GroupSet<f64>, h: &GroupSet<f64>) -> Result<bool, EvalError> {
    let clusters = head_clusters(predicted, CLUSTER_THRESHOLD);
    if clusters.len() != h.len() {
        return Ok(false);
    }
    let e = predicted.elements();
    let centroids = clusters
        .iter()
        .map(|c| cluster_centroid(&c.iter().map(|&i| &e[i]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>, _>>()?;
    let c = GroupSet::new(centroids)?;
    for r in h.iter() {
        let g = c.elements()[0].compose(&r.inverse())?;
        let coset = h.left_translate(&g)?;
        let score = chamfer(&c, &coset)?.value.max(chamfer(&coset, &c)?.value);
        if score < RECOVERY_TOLERANCE {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Fraction of points whose head clusters form a coset of the orbit's
/// ground-truth stabilizer.
pub fn stabilizer_recovery(
    embedder: &dyn Embedder,
    dataset: &Dataset,
    points: &[&Datapoint],
) -> Result<f64, EvalError> {
    if points.is_empty() {
        return Err(EvalError::TooFewPoints { need: 1, got: 0 });
    }
    let mut stabilizers = BTreeMap::new();
    let mut ok = 0usize;
    for p in points {
        let h = match stabilizers.get(&p.orbit_id) {
            Some(h) => h,
            None => {
                let sub = dataset.stabilizer_of_orbit(p.orbit_id).ok_or_else(|| {
                    EvalError::InvalidConfig(format!("unknown orbit {}", p.orbit_id))
                })?;
                stabilizers
                    .entry(p.orbit_id)
                    .or_insert(enumerate_subgroup::<f64>(sub))
            }
        };
        ok += recovers_coset(&embedder.embed(p)?.set, h)? as usize;
    }
    Ok(ok as f64 / points.len() as f64)
}

/// Fitted latent SO(2) action on one plane: α ↦ rotation by
/// `orientation · frequency · α`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentActionFit {
    pub frequency: u32,
    pub orientation: i8,
    /// Angle of the mean back-transformed first head, on a 1° grid.
    pub phase: f64,
    pub dispersion: f64,
    /// All candidates scored alike, so the frequency carries no information.
    pub degenerate: bool,
}

fn rotate(p: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Asymmetric Chamfer with squared Euclidean ground distance.
pub fn point_chamfer(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .map(|p| b.iter().map(|q| sq(p, q)).fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        / a.len() as f64
}

fn sample_pairs(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = random_stream(seed);
    (0..count)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect()
}

fn mean_dispersion(sets: &[Vec<Vec<f64>>], pairs: &[(usize, usize)]) -> f64 {
    pairs
        .iter()
        .map(|&(a, b)| point_chamfer(&sets[b], &sets[a]))
        .sum::<f64>()
        / pairs.len() as f64
}

/// Grid search over frequency 1..=10 and orientation ±1 minimizing the
/// dispersion of back-transformed planar point sets.
pub fn fit_latent_action(
    points: &[Vec<[f64; 2]>],
    angles: &[f64],
    seed: u64,
) -> Result<LatentActionFit, EvalError> {
    if points.is_empty() || points.len() != angles.len() {
        return Err(EvalError::TooFewPoints { need: 1, got: 0 });
    }
    let pairs = sample_pairs(points.len(), FIT_PAIRS, seed);
    let back = |k: u32, o: i8| -> Vec<Vec<Vec<f64>>> {
        points
            .iter()
            .zip(angles)
            .map(|(set, &a)| {
                set.iter()
                    .map(|p| rotate(*p, -(o as f64) * k as f64 * a).to_vec())
                    .collect()
            })
            .collect()
    };
    let mut best: Option<(f64, u32, i8)> = None;
    let mut worst: f64 = 0.0;
    for k in 1..=MAX_FREQUENCY {
        for o in [1i8, -1] {
            let d = mean_dispersion(&back(k, o), &pairs);
            worst = worst.max(d);
            if best.is_none_or(|(b, _, _)| d < b) {
                best = Some((d, k, o));
            }
        }
    }
    let (dispersion, frequency, orientation) = best.expect("nonempty grid");
    let sets = back(frequency, orientation);
    let (mut mx, mut my) = (0.0, 0.0);
    for s in &sets {
        mx += s[0][0];
        my += s[0][1];
    }
    let step = std::f64::consts::TAU / 360.0;
    let phase = (my.atan2(mx).rem_euclid(std::f64::consts::TAU) / step).round() % 360.0 * step;
    Ok(LatentActionFit {
        frequency,
        orientation,
        phase,
        dispersion,
        degenerate: worst - dispersion <= 1e-9 * worst.max(1e-300),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitDisentanglement {
    pub orbit_id: u32,
    pub projections: Vec<Pca>,
    pub fits: Vec<LatentActionFit>,
    pub dispersion: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisentanglementReport {
    pub orbits: Vec<OrbitDisentanglement>,
    pub mean: f64,
}

/// 2×2 blocks of the SO(2) factors of `g`, each flattened row-major.
fn so2_blocks(g: &GroupElement<f64>) -> Vec<Vec<f64>> {
    let n = g.dim();
    let m = g.matrix();
    g.spec()
        .slots()
        .iter()
        .filter(|s| s.factor == Factor::So2)
        .map(|s| {
            let b = s.block;
            vec![
                m[b * n + b],
                m[b * n + b + 1],
                m[(b + 1) * n + b],
                m[(b + 1) * n + b + 1],
            ]
        })
        .collect()
}

/// Eq.-11-style dispersion for G = SO(2)^T. Per orbit, each SO(2) block of
/// every head is projected to ℝ² by an uncentered PCA, a latent rotation
/// action is fitted per factor, and the mean Chamfer dispersion of the
/// back-transformed head sets is estimated from random pairs. Poses are
/// expressed relative to the orbit's first test point.
pub fn disentanglement(
    embedder: &dyn Embedder,
    points: &[&Datapoint],
    seed: u64,
) -> Result<DisentanglementReport, EvalError> {
    let group = embedder.group();
    if group.factors().iter().any(|f| *f != Factor::So2) {
        return Err(EvalError::Unsupported(format!(
            "disentanglement needs SO(2)^T, got {group}"
        )));
    }
    let t = group.factors().len();
    let mut by_orbit: BTreeMap<u32, Vec<&Datapoint>> = BTreeMap::new();
    for p in points {
        by_orbit.entry(p.orbit_id).or_default().push(p);
    }
    if by_orbit.is_empty() {
        return Err(EvalError::TooFewPoints { need: 2, got: 0 });
    }
    let mut orbits = Vec::new();
    for (orbit_id, pts) in by_orbit {
        if pts.len() < 2 {
            return Err(EvalError::TooFewPoints {
                need: 2,
                got: pts.len(),
            });
        }
        let base_inv = pts[0].pose.inverse();
        let angles: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| Ok(p.pose.compose(&base_inv)?.angles()))
            .collect::<Result<_, GroupError>>()?;
        // blocks[point][head][factor]
        let blocks: Vec<Vec<Vec<Vec<f64>>>> = pts
            .iter()
            .map(|p| Ok(embedder.embed(p)?.set.iter().map(so2_blocks).collect()))
            .collect::<Result<_, EvalError>>()?;
        let mut projections = Vec::with_capacity(t);
        let mut fits = Vec::with_capacity(t);
        let mut planar: Vec<Vec<[f64; 2]>> = Vec::new();
        for f in 0..t {
            let samples: Vec<Vec<f64>> = blocks
                .iter()
                .flat_map(|heads| heads.iter().map(|h| h[f].clone()))
                .collect();
            let pca = Pca::fit(&samples, 2, false).ok_or(EvalError::TooFewPoints {
                need: 2,
                got: samples.len(),
            })?;
            planar = blocks
                .iter()
                .map(|heads| {
                    heads
                        .iter()
                        .map(|h| {
                            let v = pca.apply(&h[f]);
                            [v[0], v[1]]
                        })
                        .collect()
                })
                .collect();
            let factor_angles: Vec<f64> = angles.iter().map(|a| a[f]).collect();
            let mut fit = fit_latent_action(
                &planar,
                &factor_angles,
                seed ^ (orbit_id as u64) << 8 ^ f as u64,
            )?;
            fit.degenerate |= pca.degenerate;
            fits.push(fit);
            projections.push(pca);
        }
        drop(planar);
        let sets: Vec<Vec<Vec<f64>>> = blocks
            .iter()
            .zip(&angles)
            .map(|(heads, a)| {
                heads
                    .iter()
                    .map(|h| {
                        (0..t)
                            .flat_map(|f| {
                                let v = projections[f].apply(&h[f]);
                                let fit = &fits[f];
                                rotate(
                                    [v[0], v[1]],
                                    -(fit.orientation as f64) * fit.frequency as f64 * a[f],
                                )
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let pairs = sample_pairs(
            sets.len(),
            DISENTANGLEMENT_PAIRS,
            seed.wrapping_add(orbit_id as u64 + 1),
        );
        orbits.push(OrbitDisentanglement {
            orbit_id,
            projections,
            fits,
            dispersion: mean_dispersion(&sets, &pairs),
        });
    }
    let mean = orbits.iter().map(|o| o.dispersion).sum::<f64>() / orbits.len() as f64;
    Ok(DisentanglementReport { orbits, mean })
}
