//! Checkpoint file: magic "EQCK" | version u32 | config text (u32 length +
//! UTF-8) | step u64 | parameter count u64 | f64 parameters | crc32 u32.

use std::path::Path;

use super::{EncoderConfig, EncoderError, EncoderParams};
use crate::synthetic::DatasetError;
use crate::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EQCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: EncoderConfig,
    pub step: u64,
    pub params: EncoderParams<f64>,
}

fn ck(e: impl std::fmt::Display) -> EncoderError {
    EncoderError::Checkpoint(e.to_string())
}

impl Checkpoint {
    pub fn new<T: Scalar>(config: &EncoderConfig, step: u64, params: &EncoderParams<T>) -> Self {
        Self {
            config: config.clone(),
            step,
            params: EncoderParams {
                values: params.values.iter().map(|v| v.as_f64()).collect(),
                layout: params.layout.clone(),
            },
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let text = self.config.to_text();
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.params.values.len() as u64).to_le_bytes());
        for v in &self.params.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncoderError> {
        if bytes.len() < 8 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(ck("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(ck(format!("unsupported version {version}")));
        }
        let body = crate::synthetic::format_checked_body(bytes).map_err(|e| match e {
            DatasetError::Checksum { .. } => ck("checksum mismatch"),
            other => ck(other),
        })?;
        let mut r = crate::synthetic::FormatReader::new(&body[8..]);
        let text = r.str().map_err(ck)?;
        let config = EncoderConfig::from_text(&text)?;
        let step = r.u64().map_err(ck)?;
        let count = r.u64().map_err(ck)? as usize;
        if count != config.param_count() || r.remaining() != 8 * count {
            return Err(ck(format!("{count} parameters do not fit the config")));
        }
        let values = (0..count)
            .map(|_| r.f64())
            .collect::<Result<Vec<_>, _>>()
            .map_err(ck)?;
        let params = EncoderParams::from_values(&config, values)?;
        Ok(Self {
            config,
            step,
            params,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), EncoderError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EncoderError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Parameters converted to the requested scalar type.
    pub fn params_as<T: Scalar>(&self) -> EncoderParams<T> {
        EncoderParams {
            values: self.params.values.iter().map(|v| T::lit(*v)).collect(),
            layout: self.params.layout.clone(),
        }
    }
}
