//! Run directory: `metrics.csv` (one row per epoch) and
//! `checkpoint-<epoch>.eqck` every K epochs plus `final.eqck`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{EpochMetrics, TrainError};
use crate::encoder::{Checkpoint, EncoderConfig, EncoderParams};
use crate::Scalar;

pub const METRICS_HEADER: &str = "epoch,L_G,entropy,L_O,total,seconds";

pub struct RunWriter {
    dir: PathBuf,
    metrics: BufWriter<File>,
    checkpoint_every: Option<usize>,
    steps_per_epoch: u64,
    config: EncoderConfig,
}

impl RunWriter {
    pub fn create(
        dir: impl AsRef<Path>,
        config: &EncoderConfig,
        checkpoint_every: Option<usize>,
        steps_per_epoch: u64,
    ) -> Result<Self, TrainError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut metrics = BufWriter::new(File::create(dir.join("metrics.csv"))?);
        writeln!(metrics, "{METRICS_HEADER}")?;
        Ok(Self {
            dir,
            metrics,
            checkpoint_every: checkpoint_every.filter(|k| *k > 0),
            steps_per_epoch,
            config: config.clone(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn record<T: Scalar>(
        &mut self,
        m: &EpochMetrics,
        params: &EncoderParams<T>,
    ) -> Result<(), TrainError> {
        let l = &m.losses;
        writeln!(
            self.metrics,
            "{},{},{},{},{},{:.3}",
            m.epoch, l.equivariance, l.entropy, l.orbit, l.total, m.seconds
        )?;
        self.metrics.flush()?;
        if let Some(k) = self.checkpoint_every {
            if m.epoch % k == 0 {
                let path = self.dir.join(format!("checkpoint-{:04}.eqck", m.epoch));
                self.checkpoint(&path, m.epoch as u64 * self.steps_per_epoch, params)?;
            }
        }
        Ok(())
    }

    pub fn finish<T: Scalar>(
        &mut self,
        steps: u64,
        params: &EncoderParams<T>,
    ) -> Result<PathBuf, TrainError> {
        let path = self.dir.join("final.eqck");
        self.checkpoint(&path, steps, params)?;
        Ok(path)
    }

    fn checkpoint<T: Scalar>(
        &self,
        path: &Path,
        step: u64,
        params: &EncoderParams<T>,
    ) -> Result<(), TrainError> {
        Checkpoint::new(&self.config, step, params).write(path)?;
        Ok(())
    }
}
