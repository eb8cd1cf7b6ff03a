//! Finite-difference gradient oracle built from public primitives only.

use equin::encoder::{encode_group, encode_orbit, init_encoder, EncoderConfig, EncoderParams};
use equin::group::{sample_haar, GroupSpec};
use equin::random_stream;
use equin::set_metrics::{chamfer, entropy_reg};
use equin::synthetic::TrainingTriplet;
use equin::training::{batch_loss_and_gradient, LossBreakdown};
use rand::Rng;

pub fn small_config(group: GroupSpec, heads: usize, seed: u64) -> EncoderConfig {
    EncoderConfig {
        trunk_layers: vec![7, 5],
        ..EncoderConfig::new(6, heads, group).with_seed(seed)
    }
}

pub fn gaussian(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect()
}

pub fn random_batch(
    group: &GroupSpec,
    b: usize,
    dim: usize,
    rng: &mut impl Rng,
) -> Vec<TrainingTriplet<f64>> {
    (0..b)
        .map(|_| TrainingTriplet {
            x: gaussian(rng, dim),
            g: sample_haar(group, rng),
            y: gaussian(rng, dim),
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Objective recomputed from public primitives only.
pub fn reference_objective(
    p: &EncoderParams<f64>,
    c: &EncoderConfig,
    batch: &[TrainingTriplet<f64>],
    lambda: f64,
) -> LossBreakdown {
    let b = batch.len() as f64;
    let (mut eq, mut ent) = (0.0, 0.0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in batch {
        let a = encode_group(p, c, &t.x).unwrap();
        let bset = encode_group(p, c, &t.y).unwrap();
        eq += chamfer(&a.left_translate(&t.g).unwrap(), &bset)
            .unwrap()
            .value;
        ent += entropy_reg(&a) + entropy_reg(&bset);
        xs.push(encode_orbit(p, c, &t.x).unwrap());
        ys.push(encode_orbit(p, c, &t.y).unwrap());
    }
    let mut orbit = 0.0;
    for i in 0..batch.len() {
        let negatives: Vec<&Vec<f64>> = (0..batch.len())
            .filter(|&j| j != i)
            .flat_map(|j| [&xs[j], &ys[j]])
            .collect();
        let mean =
            negatives.iter().map(|n| dot(n, &xs[i]).exp()).sum::<f64>() / negatives.len() as f64;
        orbit += -dot(&xs[i], &ys[i]) + mean.ln();
    }
    let (equivariance, entropy, orbit) = (eq / b, ent / (2.0 * b), orbit / b);
    LossBreakdown {
        equivariance,
        entropy,
        orbit,
        total: equivariance + lambda * entropy + orbit,
    }
}

/// Smallest gap between the nearest and second-nearest candidate over all
/// Chamfer assignments in the batch.
pub fn assignment_margin(
    p: &EncoderParams<f64>,
    c: &EncoderConfig,
    batch: &[TrainingTriplet<f64>],
) -> f64 {
    let mut margin = f64::INFINITY;
    for t in batch {
        let a = encode_group(p, c, &t.x)
            .unwrap()
            .left_translate(&t.g)
            .unwrap();
        let bset = encode_group(p, c, &t.y).unwrap();
        for ai in a.iter() {
            let mut d: Vec<f64> = bset.iter().map(|bj| ai.distance_sq(bj).unwrap()).collect();
            d.sort_by(f64::total_cmp);
            if d.len() > 1 {
                margin = margin.min(d[1] - d[0]);
            }
        }
    }
    margin
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Relative error ‖a − b‖ / max(‖a‖, ‖b‖, 1e-12).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-12)
}

pub fn finite_difference(
    p: &EncoderParams<f64>,
    c: &EncoderConfig,
    batch: &[TrainingTriplet<f64>],
    lambda: f64,
) -> Vec<f64> {
    let h = 1e-5;
    let mut q = p.clone();
    (0..p.len())
        .map(|k| {
            let orig = q.values[k];
            q.values[k] = orig + h;
            let up = reference_objective(&q, c, batch, lambda).total;
            q.values[k] = orig - h;
            let down = reference_objective(&q, c, batch, lambda).total;
            q.values[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative gradient error on one random instance; `Ok(None)` when a Chamfer
/// assignment is too close to a tie for finite differences to be meaningful.
pub fn gradient_case(
    group: GroupSpec,
    heads: usize,
    lambda: f64,
    shared: bool,
    seed: u64,
) -> Result<Option<f64>, String> {
    let mut rng = random_stream(seed);
    let c = EncoderConfig {
        shared_trunk: shared,
        ..small_config(group.clone(), heads, seed)
    };
    let p = init_encoder::<f64>(&c).unwrap();
    let batch = random_batch(&group, 3, c.input_dim, &mut rng);
    if assignment_margin(&p, &c, &batch) < 1e-3 {
        return Ok(None);
    }
    let (losses, grad) = batch_loss_and_gradient(&p, &c, &batch, lambda).unwrap();
    let reference = reference_objective(&p, &c, &batch, lambda);
    let agree = (losses.total - reference.total).abs() < 1e-10 * (1.0 + reference.total.abs())
        && (losses.equivariance - reference.equivariance).abs() < 1e-10
        && (losses.entropy - reference.entropy).abs() < 1e-10
        && (losses.orbit - reference.orbit).abs() < 1e-10;
    if !agree {
        return Err(format!("loss values differ: {losses:?} vs {reference:?}"));
    }
    Ok(Some(relative_error(
        &grad,
        &finite_difference(&p, &c, &batch, lambda),
    )))
}
