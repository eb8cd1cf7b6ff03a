//! The trainable map φ = (φ_G, φ_O).
//!
//! φ_G is an MLP trunk followed by one linear layer emitting `N` Lie-algebra
//! vectors, each sent through the exponential map. φ_O is a second trunk (or
//! the same one, when shared) with a linear head whose output is normalized to
//! the unit sphere. Gradients are computed by explicit reverse-mode passes.

mod checkpoint;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use thiserror::Error;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use crate::group::{exp_coords, exp_with_jacobian, ExpJacobian, GroupError, GroupSet, GroupSpec};
use crate::{random_stream, Scalar};

/// Raw orbit outputs shorter than this cannot be normalized.
pub const MIN_ORBIT_NORM: f64 = 1e-8;
/// Standard deviation of the random offsets on the group-head biases.
pub const HEAD_BIAS_SPREAD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("input has {got} features, encoder expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("orbit output norm {norm:e} too small to normalize")]
    DegenerateOrbit { norm: f64 },
    #[error("non-finite value in {op}")]
    NonFinite { op: &'static str },
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("parameter vector has {got} entries, layout needs {expected}")]
    ParamCount { expected: usize, got: usize },
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(T::zero()),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn slope<T: Scalar>(self, a: T) -> T {
        match self {
            Activation::Tanh => T::one() - a * a,
            Activation::Relu => {
                if a > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = EncoderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            _ => Err(EncoderError::InvalidConfig(format!(
                "unknown activation {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub trunk_layers: Vec<usize>,
    pub activation: Activation,
    /// N: number of group heads.
    pub heads: usize,
    pub group: GroupSpec,
    pub orbit_dim: usize,
    pub shared_trunk: bool,
    pub init_seed: u64,
}

impl EncoderConfig {
    pub fn new(input_dim: usize, heads: usize, group: GroupSpec) -> Self {
        Self {
            input_dim,
            trunk_layers: vec![64, 64],
            activation: Activation::Tanh,
            heads,
            group,
            orbit_dim: 3,
            shared_trunk: false,
            init_seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: &str| Err(EncoderError::InvalidConfig(m.into()));
        if self.heads == 0 {
            return bad("need at least one group head");
        }
        if self.orbit_dim < 2 {
            return bad("orbit_dim must be at least 2");
        }
        if self.input_dim == 0 || self.trunk_layers.contains(&0) {
            return bad("layer widths must be positive");
        }
        if self.group.factors().is_empty() {
            return bad("group has no factors");
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        let mut offset = 0;
        let trunk = |offset: &mut usize| {
            let mut layers = Vec::new();
            let mut width = self.input_dim;
            for &w in &self.trunk_layers {
                layers.push(Dense::at(offset, width, w));
                width = w;
            }
            layers
        };
        let group_trunk = trunk(&mut offset);
        let feature = *self.trunk_layers.last().unwrap_or(&self.input_dim);
        let group_head = Dense::at(&mut offset, feature, self.heads * self.group.algebra_dim());
        let orbit_trunk = if self.shared_trunk {
            Vec::new()
        } else {
            trunk(&mut offset)
        };
        let orbit_head = Dense::at(&mut offset, feature, self.orbit_dim);
        Layout {
            group_trunk,
            group_head,
            orbit_trunk,
            orbit_head,
            total: offset,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }

    /// `key=value` lines, the form echoed into checkpoints and run directories.
    pub fn to_text(&self) -> String {
        let widths: Vec<String> = self.trunk_layers.iter().map(|w| w.to_string()).collect();
        format!(
            "input_dim={}\ntrunk_layers={}\nactivation={}\nheads={}\ngroup={}\norbit_dim={}\nshared_trunk={}\ninit_seed={}\n",
            self.input_dim,
            widths.join(","),
            self.activation,
            self.heads,
            self.group,
            self.orbit_dim,
            self.shared_trunk,
            self.init_seed
        )
    }

    pub fn from_text(text: &str) -> Result<Self, EncoderError> {
        let bad = |m: String| EncoderError::InvalidConfig(m);
        let mut cfg = EncoderConfig::new(0, 0, GroupSpec::So2);
        let mut seen = 0;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("bad line {line:?}")))?;
            let num = |v: &str| {
                v.parse::<u64>()
                    .map_err(|_| bad(format!("{k}: not an integer")))
            };
            match k {
                "input_dim" => cfg.input_dim = num(v)? as usize,
                "trunk_layers" => {
                    cfg.trunk_layers = if v.is_empty() {
                        Vec::new()
                    } else {
                        v.split(',')
                            .map(|w| num(w).map(|w| w as usize))
                            .collect::<Result<_, _>>()?
                    }
                }
                "activation" => cfg.activation = v.parse()?,
                "heads" => cfg.heads = num(v)? as usize,
                "group" => cfg.group = v.parse()?,
                "orbit_dim" => cfg.orbit_dim = num(v)? as usize,
                "shared_trunk" => {
                    cfg.shared_trunk = v.parse().map_err(|_| bad(format!("{k}: not a bool")))?
                }
                "init_seed" => cfg.init_seed = num(v)?,
                _ => return Err(bad(format!("unknown key {k:?}"))),
            }
            seen += 1;
        }
        if seen != 8 {
            return Err(bad(format!("expected 8 keys, found {seen}")));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A fully connected layer inside the flat parameter vector: weights
/// (row-major `outputs × inputs`) followed by biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dense {
    pub offset: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    fn at(offset: &mut usize, inputs: usize, outputs: usize) -> Self {
        let d = Dense {
            offset: *offset,
            inputs,
            outputs,
        };
        *offset += (inputs + 1) * outputs;
        d
    }

    pub fn bias_offset(&self) -> usize {
        self.offset + self.inputs * self.outputs
    }

    fn forward<T: Scalar>(&self, params: &[T], input: &[T]) -> Vec<T> {
        let w = &params[self.offset..self.offset + self.inputs * self.outputs];
        let b = &params[self.bias_offset()..self.bias_offset() + self.outputs];
        (0..self.outputs)
            .map(|r| {
                let row = &w[r * self.inputs..(r + 1) * self.inputs];
                b[r] + row.iter().zip(input).map(|(a, x)| *a * *x).sum::<T>()
            })
            .collect()
    }

    /// Accumulates parameter gradients and returns ∂L/∂input.
    fn backward<T: Scalar>(
        &self,
        params: &[T],
        input: &[T],
        delta: &[T],
        grad: &mut [T],
    ) -> Vec<T> {
        let mut grad_in = vec![T::zero(); self.inputs];
        let bias = self.bias_offset();
        for (r, &d) in delta.iter().enumerate() {
            if d == T::zero() {
                continue;
            }
            let row = self.offset + r * self.inputs;
            for c in 0..self.inputs {
                grad[row + c] += d * input[c];
                grad_in[c] += d * params[row + c];
            }
            grad[bias + r] += d;
        }
        grad_in
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub group_trunk: Vec<Dense>,
    pub group_head: Dense,
    /// Empty when the trunk is shared.
    pub orbit_trunk: Vec<Dense>,
    pub orbit_head: Dense,
    pub total: usize,
}

/// Flat weights and biases together with the layout that slices them.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams<T> {
    pub values: Vec<T>,
    pub layout: Layout,
}

impl<T: Scalar> EncoderParams<T> {
    pub fn from_values(config: &EncoderConfig, values: Vec<T>) -> Result<Self, EncoderError> {
        let layout = config.layout();
        if values.len() != layout.total {
            return Err(EncoderError::ParamCount {
                expected: layout.total,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EncoderError::NonFinite { op: "parameters" });
        }
        Ok(Self { values, layout })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Glorot-uniform weights, zero biases, and N(0, 0.5²) offsets on the group
/// head biases so the heads start apart. Deterministic in `init_seed`.
pub fn init_encoder<T: Scalar>(config: &EncoderConfig) -> Result<EncoderParams<T>, EncoderError> {
    config.validate()?;
    let layout = config.layout();
    let mut rng = random_stream(config.init_seed);
    let mut values = vec![T::zero(); layout.total];
    let all = layout
        .group_trunk
        .iter()
        .chain(std::iter::once(&layout.group_head))
        .chain(&layout.orbit_trunk)
        .chain(std::iter::once(&layout.orbit_head));
    for d in all {
        let limit = (6.0 / (d.inputs + d.outputs) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
        for v in &mut values[d.offset..d.bias_offset()] {
            *v = T::lit(dist.sample(&mut rng));
        }
    }
    let spread = Normal::new(0.0, HEAD_BIAS_SPREAD).expect("positive std");
    let head = layout.group_head;
    for v in &mut values[head.bias_offset()..head.bias_offset() + head.outputs] {
        *v = T::lit(spread.sample(&mut rng));
    }
    Ok(EncoderParams { values, layout })
}

/// Cached activations of one forward pass, enough to run the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass<T> {
    /// Input followed by every hidden activation of the group trunk.
    group_acts: Vec<Vec<T>>,
    orbit_acts: Vec<Vec<T>>,
    /// N × algebra_dim coordinates, head-major.
    pub coords: Vec<T>,
    pub orbit_raw: Vec<T>,
    pub orbit_unit: Vec<T>,
    orbit_norm: T,
}

fn check_finite<T: Scalar>(v: &[T], op: &'static str) -> Result<(), EncoderError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(EncoderError::NonFinite { op })
    }
}

fn run_trunk<T: Scalar>(
    layers: &[Dense],
    params: &[T],
    input: &[T],
    act: Activation,
) -> Result<Vec<Vec<T>>, EncoderError> {
    let mut acts = vec![input.to_vec()];
    for layer in layers {
        let z = layer.forward(params, acts.last().unwrap());
        let a: Vec<T> = z.into_iter().map(|v| act.apply(v)).collect();
        check_finite(&a, "trunk activation")?;
        acts.push(a);
    }
    Ok(acts)
}

fn back_trunk<T: Scalar>(
    layers: &[Dense],
    params: &[T],
    acts: &[Vec<T>],
    mut delta: Vec<T>,
    act: Activation,
    grad: &mut [T],
) {
    for (i, layer) in layers.iter().enumerate().rev() {
        let out = &acts[i + 1];
        for (d, a) in delta.iter_mut().zip(out) {
            *d *= act.slope(*a);
        }
        delta = layer.backward(params, &acts[i], &delta, grad);
    }
}

pub fn forward<T: Scalar>(
    params: &EncoderParams<T>,
    config: &EncoderConfig,
    x: &[T],
) -> Result<ForwardPass<T>, EncoderError> {
    if x.len() != config.input_dim {
        return Err(EncoderError::DimensionMismatch {
            expected: config.input_dim,
            got: x.len(),
        });
    }
    check_finite(x, "input features")?;
    let l = &params.layout;
    let p = &params.values;
    let group_acts = run_trunk(&l.group_trunk, p, x, config.activation)?;
    let coords = l.group_head.forward(p, group_acts.last().unwrap());
    check_finite(&coords, "group head")?;
    let orbit_acts = if config.shared_trunk {
        Vec::new()
    } else {
        run_trunk(&l.orbit_trunk, p, x, config.activation)?
    };
    let orbit_feature = if config.shared_trunk {
        &group_acts
    } else {
        &orbit_acts
    };
    let orbit_raw = l.orbit_head.forward(p, orbit_feature.last().unwrap());
    check_finite(&orbit_raw, "orbit head")?;
    let orbit_norm = orbit_raw.iter().map(|v| *v * *v).sum::<T>().sqrt();
    let orbit_unit = if orbit_norm.as_f64() < MIN_ORBIT_NORM {
        Vec::new()
    } else {
        orbit_raw.iter().map(|v| *v / orbit_norm).collect()
    };
    Ok(ForwardPass {
        group_acts,
        orbit_acts,
        coords,
        orbit_raw,
        orbit_unit,
        orbit_norm,
    })
}

impl<T: Scalar> ForwardPass<T> {
    pub fn head_coords<'a>(&'a self, config: &EncoderConfig) -> impl Iterator<Item = &'a [T]> {
        self.coords.chunks(config.group.algebra_dim())
    }

    pub fn group_set(&self, config: &EncoderConfig) -> Result<GroupSet<T>, EncoderError> {
        let elements = self
            .head_coords(config)
            .map(|c| exp_coords(&config.group, c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GroupSet::new(elements)?)
    }

    /// Head matrices with their exponential-map Jacobians.
    pub fn head_jacobians(&self, config: &EncoderConfig) -> Vec<ExpJacobian<T>> {
        self.head_coords(config)
            .map(|c| exp_with_jacobian(&config.group, c))
            .collect()
    }

    pub fn orbit(&self) -> Result<&[T], EncoderError> {
        if self.orbit_unit.is_empty() {
            Err(EncoderError::DegenerateOrbit {
                norm: self.orbit_norm.as_f64(),
            })
        } else {
            Ok(&self.orbit_unit)
        }
    }

    /// Reverse pass. `grad_coords` is ∂L/∂(head coordinates) and `grad_orbit`
    /// is ∂L/∂(unit orbit vector), either may be all zeros. Parameter
    /// gradients are accumulated into `grad`.
    pub fn backward(
        &self,
        params: &EncoderParams<T>,
        config: &EncoderConfig,
        grad_coords: &[T],
        grad_orbit: &[T],
        grad: &mut [T],
    ) -> Result<(), EncoderError> {
        check_finite(grad_coords, "group-head gradient")?;
        check_finite(grad_orbit, "orbit gradient")?;
        let l = &params.layout;
        let p = &params.values;
        let act = config.activation;
        let group_feature = self.group_acts.last().unwrap();
        let mut trunk_delta = l.group_head.backward(p, group_feature, grad_coords, grad);

        if grad_orbit.iter().any(|g| *g != T::zero()) {
            let unit = self.orbit()?;
            let dot: T = unit.iter().zip(grad_orbit).map(|(u, g)| *u * *g).sum();
            let raw_delta: Vec<T> = unit
                .iter()
                .zip(grad_orbit)
                .map(|(u, g)| (*g - *u * dot) / self.orbit_norm)
                .collect();
            if config.shared_trunk {
                let d = l.orbit_head.backward(p, group_feature, &raw_delta, grad);
                trunk_delta.iter_mut().zip(d).for_each(|(t, v)| *t += v);
            } else {
                let d = l
                    .orbit_head
                    .backward(p, self.orbit_acts.last().unwrap(), &raw_delta, grad);
                back_trunk(&l.orbit_trunk, p, &self.orbit_acts, d, act, grad);
            }
        }
        back_trunk(&l.group_trunk, p, &self.group_acts, trunk_delta, act, grad);
        check_finite(grad, "parameter gradient")
    }
}

/// φ_G(x): the N head outputs mapped into the group.
pub fn encode_group<T: Scalar>(
    params: &EncoderParams<T>,
    config: &EncoderConfig,
    x: &[T],
) -> Result<GroupSet<T>, EncoderError> {
    forward(params, config, x)?.group_set(config)
}

/// φ_O(x) on the unit sphere.
pub fn encode_orbit<T: Scalar>(
    params: &EncoderParams<T>,
    config: &EncoderConfig,
    x: &[T],
) -> Result<Vec<T>, EncoderError> {
    Ok(forward(params, config, x)?.orbit()?.to_vec())
}

/// Gaussian features, handy for tests and smoke runs.
pub fn random_input<T: Scalar, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<T> {
    (0..dim)
        .map(|_| T::lit(rng.sample(rand_distr::StandardNormal)))
        .collect()
}
