//! Binary dataset file (little-endian):
//!
//! ```text
//! magic "EQIN" | version u32 | name str | seed u64 | noise_sigma f64 | triplets_per_orbit u32
//! orbit count u32, then per orbit:
//!     orbit_id u32 | group tag str | stabilizer tag str | stabilizer order u32
//!     | D u32 | embed_seed u64 | tag_dim u32
//! record count u64, then per record:
//!     orbit_id u32 | x features f64×D | g params f64×k | y features f64×D
//!     | x pose f64×k | y pose f64×k | split u8 (1 = test)
//! crc32 u32 over every preceding byte
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8. `k` is the parameter count of
//! the group (1 per SO(2) factor, 4 per SO(3) factor).

use std::io::Write;
use std::path::Path;

use super::{Datapoint, Dataset, DatasetError, DatasetSpec, OrbitSpec, Triplet};
use crate::group::{FiniteSubgroupSpec, GroupElement, GroupSpec};

pub const DATASET_MAGIC: &[u8; 4] = b"EQIN";
pub const DATASET_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|x| self.f64(*x));
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], DatasetError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| {
                DatasetError::Malformed(format!("unexpected end of data at byte {}", self.pos))
            })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    pub(crate) fn u8(&mut self) -> Result<u8, DatasetError> {
        Ok(self.take(1)?[0])
    }
    pub(crate) fn u32(&mut self) -> Result<u32, DatasetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub(crate) fn u64(&mut self) -> Result<u64, DatasetError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub(crate) fn f64(&mut self) -> Result<f64, DatasetError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, DatasetError> {
        (0..n).map(|_| self.f64()).collect()
    }
    pub(crate) fn str(&mut self) -> Result<String, DatasetError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| DatasetError::Malformed("invalid UTF-8".into()))
    }
    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Splits off and verifies the trailing CRC32.
pub(crate) fn checked_body(bytes: &[u8]) -> Result<&[u8], DatasetError> {
    if bytes.len() < 4 {
        return Err(DatasetError::Malformed("file too short".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(DatasetError::Checksum { stored, computed });
    }
    Ok(body)
}

fn malformed(e: impl std::fmt::Display) -> DatasetError {
    DatasetError::Malformed(e.to_string())
}

impl Dataset {
    pub fn to_bytes(&self) -> Vec<u8> {
        let spec = &self.spec;
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(DATASET_MAGIC);
        w.u32(DATASET_VERSION);
        w.str(spec.name.tag());
        w.u64(spec.seed);
        w.f64(spec.noise_sigma);
        w.u32(spec.triplets_per_orbit as u32);
        w.u32(spec.orbits.len() as u32);
        for o in &spec.orbits {
            w.u32(o.orbit_id);
            w.str(&o.group.to_string());
            w.str(&o.stabilizer.tag());
            w.u32(o.stabilizer.order() as u32);
            w.u32(o.feature_dim as u32);
            w.u64(o.embed_seed);
            w.u32(o.tag_dim as u32);
        }
        w.u64(self.triplets.len() as u64);
        for (t, test) in self.triplets.iter().zip(&self.is_test) {
            w.u32(t.x.orbit_id);
            w.f64s(&t.x.features);
            w.f64s(t.g.params());
            w.f64s(&t.y.features);
            w.f64s(t.x.pose.params());
            w.f64s(t.y.pose.params());
            w.u8(u8::from(*test));
        }
        let crc = crc32fast::hash(&w.0);
        w.u32(crc);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DatasetError> {
        if bytes.len() < 8 {
            return Err(DatasetError::Malformed("file too short".into()));
        }
        if &bytes[..4] != DATASET_MAGIC {
            return Err(DatasetError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != DATASET_VERSION {
            return Err(DatasetError::Version {
                found: version,
                expected: DATASET_VERSION,
            });
        }
        let body = &bytes[..bytes.len().saturating_sub(4)];
        let parsed = Self::parse_body(&body[8..]);
        // Structural errors (truncation) take precedence over the checksum.
        let dataset = parsed?;
        checked_body(bytes)?;
        Ok(dataset)
    }

    fn parse_body(body: &[u8]) -> Result<Self, DatasetError> {
        let mut r = Reader::new(body);
        let name = r.str()?.parse()?;
        let seed = r.u64()?;
        let noise_sigma = r.f64()?;
        let triplets_per_orbit = r.u32()? as usize;
        let orbit_count = r.u32()? as usize;
        let mut orbits = Vec::with_capacity(orbit_count.min(1024));
        for _ in 0..orbit_count {
            let orbit_id = r.u32()?;
            let group: GroupSpec = r.str()?.parse().map_err(malformed)?;
            let stabilizer: FiniteSubgroupSpec = r.str()?.parse().map_err(malformed)?;
            let order = r.u32()? as usize;
            if order != stabilizer.order() {
                return Err(DatasetError::Malformed(format!(
                    "stabilizer {stabilizer} with order {order}"
                )));
            }
            let stabilizer =
                FiniteSubgroupSpec::new(stabilizer.kind(), group.clone()).map_err(malformed)?;
            orbits.push(OrbitSpec {
                orbit_id,
                group,
                stabilizer,
                feature_dim: r.u32()? as usize,
                embed_seed: r.u64()?,
                tag_dim: r.u32()? as usize,
            });
        }
        let spec = DatasetSpec {
            name,
            orbits,
            triplets_per_orbit,
            noise_sigma,
            seed,
        };
        spec.validate().map_err(malformed)?;
        let group = spec.group().expect("validated").clone();
        let (d, k) = (spec.feature_dim().expect("validated"), group.param_dim());
        let count = r.u64()? as usize;
        let record = 4 + 8 * (2 * d + 3 * k) + 1;
        if count.checked_mul(record) != Some(r.remaining()) {
            return Err(DatasetError::Malformed(format!(
                "{} bytes left for {count} records of {record} bytes",
                r.remaining()
            )));
        }
        let mut triplets = Vec::with_capacity(count);
        let mut is_test = Vec::with_capacity(count);
        let element = |p: Vec<f64>| GroupElement::from_params(&group, &p).map_err(malformed);
        for _ in 0..count {
            let orbit_id = r.u32()?;
            if spec.orbit(orbit_id).is_none() {
                return Err(DatasetError::Malformed(format!(
                    "record for unknown orbit {orbit_id}"
                )));
            }
            let xf = r.f64s(d)?;
            let g = element(r.f64s(k)?)?;
            let yf = r.f64s(d)?;
            let xp = element(r.f64s(k)?)?;
            let yp = element(r.f64s(k)?)?;
            let split = r.u8()?;
            if split > 1 {
                return Err(DatasetError::Malformed(format!("split flag {split}")));
            }
            triplets.push(Triplet {
                x: Datapoint {
                    features: xf,
                    orbit_id,
                    pose: xp,
                },
                g,
                y: Datapoint {
                    features: yf,
                    orbit_id,
                    pose: yp,
                },
            });
            is_test.push(split == 1);
        }
        Ok(Dataset::from_parts(spec, triplets, is_test))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Plain-text export, one record per line:
    /// `index,orbit_id,split,x_0..x_{D-1},g_0..g_{k-1},y_0..,xpose_0..,ypose_0..`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<(), DatasetError> {
        let d = self.spec.feature_dim().unwrap_or(0);
        let k = self.spec.group().map(|g| g.param_dim()).unwrap_or(0);
        let mut header = vec!["index".to_string(), "orbit_id".into(), "split".into()];
        for (prefix, n) in [("x", d), ("g", k), ("y", d), ("xpose", k), ("ypose", k)] {
            header.extend((0..n).map(|i| format!("{prefix}_{i}")));
        }
        writeln!(out, "{}", header.join(","))?;
        for (i, (t, test)) in self.triplets.iter().zip(&self.is_test).enumerate() {
            let mut row = vec![
                i.to_string(),
                t.x.orbit_id.to_string(),
                if *test { "test" } else { "train" }.into(),
            ];
            for values in [
                &t.x.features[..],
                t.g.params(),
                &t.y.features,
                t.x.pose.params(),
                t.y.pose.params(),
            ] {
                row.extend(values.iter().map(|v| format!("{v:e}")));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}
