//! CSV outputs: one metrics row per evaluated run and a per-head embedding
//! dump for external plotting.

use std::io::Write;

use super::{Embedder, EvalError};
use crate::synthetic::Datapoint;

pub const METRICS_CSV_VERSION: u32 = 1;
pub const METRICS_CSV_HEADER: &str =
    "dataset,model,N,lambda,seed,hit_rate,disentanglement,entropy,stabilizer_recovery";
pub const EMBEDDINGS_HEADER: &str = "index,orbit_id,head,params,orbit";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub dataset: String,
    pub model: String,
    pub heads: usize,
    pub lambda: f64,
    pub seed: u64,
    pub hit_rate: f64,
    /// Absent for groups with an SO(3) factor.
    pub disentanglement: Option<f64>,
    pub entropy: f64,
    pub stabilizer_recovery: f64,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.dataset,
            self.model,
            self.heads,
            self.lambda,
            self.seed,
            self.hit_rate,
            self.disentanglement
                .map(|d| d.to_string())
                .unwrap_or_default(),
            self.entropy,
            self.stabilizer_recovery
        )
    }

    pub fn from_csv(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return None;
        }
        Some(Self {
            dataset: f[0].to_string(),
            model: f[1].to_string(),
            heads: f[2].parse().ok()?,
            lambda: f[3].parse().ok()?,
            seed: f[4].parse().ok()?,
            hit_rate: f[5].parse().ok()?,
            disentanglement: if f[6].is_empty() {
                None
            } else {
                Some(f[6].parse().ok()?)
            },
            entropy: f[7].parse().ok()?,
            stabilizer_recovery: f[8].parse().ok()?,
        })
    }
}

/// One row per (point, head): group parameters and the orbit vector, each as
/// a space-separated list.
pub fn write_embeddings_csv(
    embedder: &dyn Embedder,
    points: &[&Datapoint],
    mut out: impl Write,
) -> Result<(), EvalError> {
    writeln!(out, "{EMBEDDINGS_HEADER}")?;
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    for (i, p) in points.iter().enumerate() {
        let e = embedder.embed(p)?;
        let orbit = join(&e.orbit);
        for (h, g) in e.set.iter().enumerate() {
            writeln!(out, "{i},{},{h},{},{orbit}", p.orbit_id, join(g.params()))?;
        }
    }
    Ok(())
}
