//! Objectives, optimizer and the epoch loop.
//!
//! The per-batch objective is
//! mean_i [ L_G(x_i, g_i, y_i) + λ·(E(x_i) + E(y_i))/2 ] + InfoNCE(batch),
//! where L_G is the Chamfer equivariance loss, E the head dispersion and the
//! InfoNCE negatives of an anchor are the x and y of every other triplet.

mod run;

use std::time::Instant;

use rand::seq::SliceRandom;
use thiserror::Error;

pub use run::RunWriter;

use crate::encoder::{forward, EncoderConfig, EncoderError, EncoderParams, ForwardPass};
use crate::group::{GroupError, GroupSpec};
use crate::set_metrics::{chamfer_matrix_grad, entropy_matrix_grad};
use crate::synthetic::TrainingTriplet;
use crate::{random_stream, Scalar};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("InfoNCE needs at least two triplets per batch, got {0}")]
    BatchTooSmall(usize),
    #[error("non-finite {what} at epoch {epoch}, step {step}")]
    NonFinite {
        what: &'static str,
        epoch: usize,
        step: usize,
    },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no training triplets")]
    EmptyDataset,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            learning_rate: 1e-4,
            weight_decay: 1e-2,
            lambda: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        Ok(())
    }
}

/// Components of the objective, each averaged over the triplets it covers.
/// `entropy` excludes λ; `total` includes it.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub equivariance: f64,
    pub entropy: f64,
    pub orbit: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub losses: LossBreakdown,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainReport<T> {
    pub epochs: Vec<EpochMetrics>,
    pub wall_clock: f64,
    pub steps: u64,
    pub params: EncoderParams<T>,
}

impl<T> TrainReport<T> {
    pub fn final_losses(&self) -> LossBreakdown {
        self.epochs.last().map(|e| e.losses).unwrap_or_default()
    }
}

fn head_matrices<T: Scalar>(
    pass: &ForwardPass<T>,
    config: &EncoderConfig,
) -> (Vec<Vec<T>>, Vec<crate::group::ExpJacobian<T>>) {
    let jac = pass.head_jacobians(config);
    (jac.iter().map(|j| j.matrix.clone()).collect(), jac)
}

/// L_G(x, g, y) = chamfer(g · φ_G(x), φ_G(y)).
pub fn loss_equivariance<T: Scalar>(
    params: &EncoderParams<T>,
    config: &EncoderConfig,
    triplet: &TrainingTriplet<T>,
) -> Result<T, TrainError> {
    config.group.check_same(triplet.g.spec())?;
    let (a, _) = head_matrices(&forward(params, config, &triplet.x)?, config);
    let (b, _) = head_matrices(&forward(params, config, &triplet.y)?, config);
    Ok(chamfer_matrix_grad(Some(triplet.g.matrix()), &a, &b, config.group.matrix_dim()).0)
}

/// λ · entropy_reg(φ_G(x)).
pub fn loss_entropy<T: Scalar>(
    params: &EncoderParams<T>,
    config: &EncoderConfig,
    x: &[T],
    lambda: T,
) -> Result<T, TrainError> {
    let (m, _) = head_matrices(&forward(params, config, x)?, config);
    Ok(lambda * entropy_matrix_grad(&m).0)
}

/// Value of the contrastive orbit loss and its gradients w.r.t. the unit
/// orbit vectors of `x` (first B) and `y` (last B) of each triplet.
fn infonce_parts<T: Scalar>(xs: &[&[T]], ys: &[&[T]]) -> (T, Vec<Vec<T>>) {
    let b = xs.len();
    let dot = |u: &[T], v: &[T]| u.iter().zip(v).map(|(a, c)| *a * *c).sum::<T>();
    let points: Vec<&[T]> = xs.iter().chain(ys).copied().collect();
    let mut grads = vec![vec![T::zero(); xs[0].len()]; 2 * b];
    let bt = T::from_usize(b).unwrap();
    let kt = T::from_usize(2 * b - 2).unwrap();
    let mut total = T::zero();
    for i in 0..b {
        let anchor = xs[i];
        let negatives: Vec<usize> = (0..2 * b).filter(|&k| k != i && k != b + i).collect();
        let logits: Vec<T> = negatives.iter().map(|&k| dot(points[k], anchor)).collect();
        let peak = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let weights: Vec<T> = logits.iter().map(|l| (*l - peak).exp()).collect();
        let z: T = weights.iter().copied().sum();
        total += -dot(anchor, ys[i]) + peak + (z / kt).ln();
        for (d, &p) in grads[i].iter_mut().zip(ys[i]) {
            *d -= p / bt;
        }
        for (d, &a) in grads[b + i].iter_mut().zip(anchor) {
            *d -= a / bt;
        }
        for (&k, w) in negatives.iter().zip(&weights) {
            let w = *w / z / bt;
            for c in 0..anchor.len() {
                let nk = points[k][c];
                grads[i][c] += w * nk;
                grads[k][c] += w * anchor[c];
            }
        }
    }
    (total / bt, grads)
}

/// L_O averaged over the batch; negatives of each anchor are the x and y of
/// every other triplet.
pub fn loss_infonce<T: Scalar>(
    params: &EncoderParams<T>,
    config: &EncoderConfig,
    batch: &[TrainingTriplet<T>],
) -> Result<T, TrainError> {
    if batch.len() < 2 {
        return Err(TrainError::BatchTooSmall(batch.len()));
    }
    let enc = |x: &[T]| -> Result<Vec<T>, TrainError> {
        Ok(forward(params, config, x)?.orbit()?.to_vec())
    };
    let xs = batch
        .iter()
        .map(|t| enc(&t.x))
        .collect::<Result<Vec<_>, _>>()?;
    let ys = batch
        .iter()
        .map(|t| enc(&t.y))
        .collect::<Result<Vec<_>, _>>()?;
    let xr: Vec<&[T]> = xs.iter().map(|v| v.as_slice()).collect();
    let yr: Vec<&[T]> = ys.iter().map(|v| v.as_slice()).collect();
    Ok(infonce_parts(&xr, &yr).0)
}

/// Full batch objective and its gradient w.r.t. every parameter.
pub fn batch_loss_and_gradient<T: Scalar>(
    params: &EncoderParams<T>,
    config: &EncoderConfig,
    batch: &[TrainingTriplet<T>],
    lambda: T,
) -> Result<(LossBreakdown, Vec<T>), TrainError> {
    let b = batch.len();
    if b < 2 {
        return Err(TrainError::BatchTooSmall(b));
    }
    let spec: &GroupSpec = &config.group;
    let n = spec.matrix_dim();
    let alg = spec.algebra_dim();
    let bt = T::from_usize(b).unwrap();
    let half = T::lit(0.5);

    let mut passes = Vec::with_capacity(2 * b);
    for t in batch {
        spec.check_same(t.g.spec())?;
        passes.push(forward(params, config, &t.x)?);
    }
    for t in batch {
        passes.push(forward(params, config, &t.y)?);
    }
    let heads: Vec<_> = passes.iter().map(|p| head_matrices(p, config)).collect();
    let mut coord_grads: Vec<Vec<T>> = vec![vec![T::zero(); config.heads * alg]; 2 * b];

    let (mut eq_sum, mut ent_sum) = (T::zero(), T::zero());
    for (i, t) in batch.iter().enumerate() {
        let (value, _, ga, gb) =
            chamfer_matrix_grad(Some(t.g.matrix()), &heads[i].0, &heads[b + i].0, n);
        eq_sum += value;
        for (slot, pass_idx, grads) in [(i, i, ga), (b + i, b + i, gb)] {
            let jac = &heads[pass_idx].1;
            for (h, g) in grads.iter().enumerate() {
                let pulled = jac[h].pullback(g);
                for (c, v) in pulled.into_iter().enumerate() {
                    coord_grads[slot][h * alg + c] += v / bt;
                }
            }
        }
    }
    for (k, (m, jac)) in heads.iter().enumerate() {
        let (value, grads) = entropy_matrix_grad(m);
        ent_sum += value;
        if lambda == T::zero() {
            continue;
        }
        let scale = lambda * half / bt;
        for (h, g) in grads.iter().enumerate() {
            let pulled = jac[h].pullback(g);
            for (c, v) in pulled.into_iter().enumerate() {
                coord_grads[k][h * alg + c] += scale * v;
            }
        }
    }

    let units = passes
        .iter()
        .map(|p| p.orbit())
        .collect::<Result<Vec<_>, _>>()?;
    let (orbit_loss, orbit_grads) = infonce_parts(&units[..b], &units[b..]);

    let mut grad = vec![T::zero(); params.len()];
    for (k, pass) in passes.iter().enumerate() {
        pass.backward(params, config, &coord_grads[k], &orbit_grads[k], &mut grad)?;
    }

    let equivariance = (eq_sum / bt).as_f64();
    let entropy = (ent_sum / (bt + bt)).as_f64();
    let orbit = orbit_loss.as_f64();
    let losses = LossBreakdown {
        equivariance,
        entropy,
        orbit,
        total: equivariance + lambda.as_f64() * entropy + orbit,
    };
    Ok((losses, grad))
}

/// First and second moment estimates with the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }
}

/// One AdamW update with decoupled weight decay:
/// p ← p − lr·m̂/(√v̂ + ε) − lr·wd·p.
pub fn adamw_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
    learning_rate: f64,
    weight_decay: f64,
) -> Result<(), TrainError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(TrainError::InvalidConfig("optimizer shape mismatch".into()));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(TrainError::NonFinite {
            what: "gradient",
            epoch: 0,
            step: state.t as usize,
        });
    }
    state.t += 1;
    let (b1, b2) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2));
    let c1 = T::one() - b1.powi(state.t as i32);
    let c2 = T::one() - b2.powi(state.t as i32);
    let (lr, wd, eps) = (
        T::lit(learning_rate),
        T::lit(weight_decay),
        T::lit(ADAM_EPSILON),
    );
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = b1 * *m + (T::one() - b1) * *g;
        *v = b2 * *v + (T::one() - b2) * *g * *g;
        let (mh, vh) = (*m / c1, *v / c2);
        *p = *p - lr * mh / (vh.sqrt() + eps) - lr * wd * *p;
    }
    Ok(())
}

/// Batches of one epoch: shuffled indices split into chunks, a trailing
/// chunk of one dropped (InfoNCE needs a negative).
pub fn epoch_batches(
    len: usize,
    batch_size: usize,
    rng: &mut crate::RandomStream,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    order
        .chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(|c| c.to_vec())
        .collect()
}

/// Trains from `init_encoder(encoder)`.
pub fn train<T: Scalar>(
    data: &[TrainingTriplet<T>],
    encoder: &EncoderConfig,
    config: &TrainConfig,
) -> Result<TrainReport<T>, TrainError> {
    let params = crate::encoder::init_encoder(encoder)?;
    train_from(data, encoder, config, params, |_, _| Ok(()))
}

/// Trains from given parameters; `on_epoch` sees every epoch's metrics and
/// the current parameters (for logging and checkpoints).
pub fn train_from<T: Scalar>(
    data: &[TrainingTriplet<T>],
    encoder: &EncoderConfig,
    config: &TrainConfig,
    mut params: EncoderParams<T>,
    mut on_epoch: impl FnMut(&EpochMetrics, &EncoderParams<T>) -> Result<(), TrainError>,
) -> Result<TrainReport<T>, TrainError> {
    config.validate()?;
    encoder.validate()?;
    if data.len() < 2 {
        return Err(TrainError::EmptyDataset);
    }
    let start = Instant::now();
    let mut rng = random_stream(config.seed);
    let mut state = AdamState::new(params.len());
    let lambda = T::lit(config.lambda);
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let epoch_start = Instant::now();
        let mut sums = LossBreakdown::default();
        let batches = epoch_batches(data.len(), config.batch_size, &mut rng);
        for (step, idx) in batches.iter().enumerate() {
            let batch: Vec<TrainingTriplet<T>> = idx.iter().map(|&i| data[i].clone()).collect();
            let (losses, grad) = batch_loss_and_gradient(&params, encoder, &batch, lambda)
                .map_err(|e| match e {
                    TrainError::Encoder(EncoderError::NonFinite { op }) => TrainError::NonFinite {
                        what: op,
                        epoch,
                        step,
                    },
                    other => other,
                })?;
            if !losses.total.is_finite() {
                return Err(TrainError::NonFinite {
                    what: "loss",
                    epoch,
                    step,
                });
            }
            adamw_step(
                &mut params.values,
                &grad,
                &mut state,
                config.learning_rate,
                config.weight_decay,
            )
            .map_err(|e| match e {
                TrainError::NonFinite { what, .. } => TrainError::NonFinite { what, epoch, step },
                other => other,
            })?;
            sums.equivariance += losses.equivariance;
            sums.entropy += losses.entropy;
            sums.orbit += losses.orbit;
            sums.total += losses.total;
        }
        let k = batches.len() as f64;
        let metrics = EpochMetrics {
            epoch: epoch + 1,
            losses: LossBreakdown {
                equivariance: sums.equivariance / k,
                entropy: sums.entropy / k,
                orbit: sums.orbit / k,
                total: sums.total / k,
            },
            seconds: epoch_start.elapsed().as_secs_f64(),
        };
        on_epoch(&metrics, &params)?;
        epochs.push(metrics);
    }
    Ok(TrainReport {
        epochs,
        wall_clock: start.elapsed().as_secs_f64(),
        steps: state.t,
        params,
    })
}
