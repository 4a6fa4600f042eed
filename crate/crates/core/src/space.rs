//! Hyperparameter search spaces.
//!
//! A [`ConfigSpace`] is an ordered list of [`ParamSpec`]s. Configurations are
//! sampled from it, enumerated on a grid, or mapped to and from the unit
//! hypercube ([`ConfigSpace::encode`] / [`ConfigSpace::decode`]) for the
//! surrogate models.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on the number of grid points.
pub const DEFAULT_GRID_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("configuration is missing parameter `{0}`")]
    MissingParam(String),
    #[error("value {value} is invalid for parameter `{name}`")]
    InvalidValue { name: String, value: Value },
    #[error("encoded vector has length {actual}, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("grid resolution for `{name}` must be at least 2, got {resolution}")]
    GridResolution { name: String, resolution: usize },
    #[error("grid would contain more than {cap} configurations")]
    GridTooLarge { cap: usize },
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

/// A single hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Str(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Real(v) => Some(*v),
            Value::Str(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Real(v) if v.fract() == 0.0 => Some(*v as i64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "{s}"),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    Categorical { choices: Vec<Value> },
    Integer { lo: i64, hi: i64, log: bool },
    Real { lo: f64, hi: f64, log: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    name: String,
    kind: ParamKind,
}

impl ParamSpec {
    pub fn categorical<V: Into<Value>>(
        name: impl Into<String>,
        choices: impl IntoIterator<Item = V>,
    ) -> Result<Self, SpaceError> {
        Self::new(
            name,
            ParamKind::Categorical {
                choices: choices.into_iter().map(Into::into).collect(),
            },
        )
    }

    pub fn integer(name: impl Into<String>, lo: i64, hi: i64, log: bool) -> Result<Self, SpaceError> {
        Self::new(name, ParamKind::Integer { lo, hi, log })
    }

    pub fn real(name: impl Into<String>, lo: f64, hi: f64, log: bool) -> Result<Self, SpaceError> {
        Self::new(name, ParamKind::Real { lo, hi, log })
    }

    pub fn new(name: impl Into<String>, kind: ParamKind) -> Result<Self, SpaceError> {
        let name = name.into();
        let invalid = |reason: &str| SpaceError::InvalidParam {
            name: name.clone(),
            reason: reason.to_string(),
        };
        match &kind {
            ParamKind::Categorical { choices } => {
                if choices.is_empty() {
                    return Err(invalid("categorical choice list is empty"));
                }
                for (i, c) in choices.iter().enumerate() {
                    if let Value::Real(v) = c {
                        if !v.is_finite() {
                            return Err(invalid("non-finite choice"));
                        }
                    }
                    if choices[..i].contains(c) {
                        return Err(invalid(&format!("duplicate choice {c}")));
                    }
                }
            }
            ParamKind::Integer { lo, hi, log } => {
                if lo >= hi {
                    return Err(invalid("lo must be < hi"));
                }
                if *log && *lo <= 0 {
                    return Err(invalid("log scale requires lo > 0"));
                }
            }
            ParamKind::Real { lo, hi, log } => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(invalid("bounds must be finite"));
                }
                if lo >= hi {
                    return Err(invalid("lo must be < hi"));
                }
                if *log && *lo <= 0.0 {
                    return Err(invalid("log scale requires lo > 0"));
                }
            }
        }
        Ok(Self { name, kind })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ParamKind {
        &self.kind
    }

    /// Width of this parameter in an encoded vector.
    pub fn encoded_width(&self) -> usize {
        match &self.kind {
            ParamKind::Categorical { choices } => choices.len(),
            _ => 1,
        }
    }

    fn numeric_bounds(&self) -> Option<(f64, f64, bool)> {
        match self.kind {
            ParamKind::Integer { lo, hi, log } => Some((lo as f64, hi as f64, log)),
            ParamKind::Real { lo, hi, log } => Some((lo, hi, log)),
            ParamKind::Categorical { .. } => None,
        }
    }

    fn contains(&self, value: &Value) -> bool {
        match (&self.kind, value) {
            (ParamKind::Categorical { choices }, v) => choices.contains(v),
            (ParamKind::Integer { lo, hi, .. }, Value::Int(v)) => lo <= v && v <= hi,
            (ParamKind::Real { lo, hi, .. }, Value::Real(v)) => *lo <= *v && *v <= *hi,
            _ => false,
        }
    }

    /// Maps a unit coordinate onto the parameter's numeric range.
    fn value_at_unit(&self, u: f64) -> Value {
        let u = u.clamp(0.0, 1.0);
        match self.kind {
            ParamKind::Integer { lo, hi, log } => {
                let v = scale_from_unit(u, lo as f64, hi as f64, log);
                Value::Int(round_half_up(v).clamp(lo, hi))
            }
            ParamKind::Real { lo, hi, log } => Value::Real(scale_from_unit(u, lo, hi, log).clamp(lo, hi)),
            ParamKind::Categorical { .. } => unreachable!("categoricals have no unit scale"),
        }
    }
}

fn scale_from_unit(u: f64, lo: f64, hi: f64, log: bool) -> f64 {
    if log {
        let (a, b) = (lo.ln(), hi.ln());
        (a + u * (b - a)).exp()
    } else {
        lo + u * (hi - lo)
    }
}

fn scale_to_unit(v: f64, lo: f64, hi: f64, log: bool) -> f64 {
    if log {
        let (a, b) = (lo.ln(), hi.ln());
        (v.ln() - a) / (b - a)
    } else {
        (v - lo) / (hi - lo)
    }
}

fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// A concrete assignment of every parameter in a space.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(BTreeMap<String, Value>);

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, value: impl Into<Value>) {
        self.0.insert(name.into(), value.into());
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn f64(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(Value::as_f64)
    }

    pub fn i64(&self, name: &str) -> Option<i64> {
        self.get(name).and_then(Value::as_i64)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// One contiguous block of an encoded vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Numeric { offset: usize },
    OneHot { offset: usize, width: usize },
}

/// Per-parameter blocks of an encoded vector, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingLayout {
    pub segments: Vec<Segment>,
    pub dim: usize,
}

/// Resolution settings for [`ConfigSpace::grid`].
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub default_resolution: usize,
    pub per_param: BTreeMap<String, usize>,
    pub cap: usize,
}

impl GridSpec {
    pub fn uniform(resolution: usize) -> Self {
        Self {
            default_resolution: resolution,
            per_param: BTreeMap::new(),
            cap: DEFAULT_GRID_CAP,
        }
    }

    fn resolution(&self, name: &str) -> usize {
        self.per_param.get(name).copied().unwrap_or(self.default_resolution)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSpace {
    params: Vec<ParamSpec>,
}

impl ConfigSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self, SpaceError> {
        for (i, p) in params.iter().enumerate() {
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn encoded_dim(&self) -> usize {
        self.params.iter().map(ParamSpec::encoded_width).sum()
    }

    pub fn layout(&self) -> EncodingLayout {
        let mut offset = 0;
        let segments = self
            .params
            .iter()
            .map(|p| {
                let seg = match &p.kind {
                    ParamKind::Categorical { choices } => Segment::OneHot {
                        offset,
                        width: choices.len(),
                    },
                    _ => Segment::Numeric { offset },
                };
                offset += p.encoded_width();
                seg
            })
            .collect();
        EncodingLayout { segments, dim: offset }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let mut config = Configuration::new();
        for p in &self.params {
            let value = match &p.kind {
                ParamKind::Categorical { choices } => choices[rng.random_range(0..choices.len())].clone(),
                _ => p.value_at_unit(rng.random::<f64>()),
            };
            config.insert(p.name.clone(), value);
        }
        config
    }

    pub fn validate(&self, config: &Configuration) -> Result<(), SpaceError> {
        for (name, value) in config.iter() {
            let spec = self.param(name).ok_or_else(|| SpaceError::UnknownParam(name.clone()))?;
            if !spec.contains(value) {
                return Err(SpaceError::InvalidValue {
                    name: name.clone(),
                    value: value.clone(),
                });
            }
        }
        for p in &self.params {
            if config.get(&p.name).is_none() {
                return Err(SpaceError::MissingParam(p.name.clone()));
            }
        }
        Ok(())
    }

    /// Cartesian product of per-parameter value lists. Numeric parameters take
    /// `resolution` evenly spaced points (log-spaced when flagged) including
    /// both endpoints; integer points are rounded and deduplicated.
    pub fn grid(&self, spec: &GridSpec) -> Result<Vec<Configuration>, SpaceError> {
        let mut axes: Vec<Vec<Value>> = Vec::with_capacity(self.params.len());
        for p in &self.params {
            let axis = match &p.kind {
                ParamKind::Categorical { choices } => choices.clone(),
                _ => {
                    let res = spec.resolution(&p.name);
                    if res < 2 {
                        return Err(SpaceError::GridResolution {
                            name: p.name.clone(),
                            resolution: res,
                        });
                    }
                    let mut values: Vec<Value> = Vec::with_capacity(res);
                    for k in 0..res {
                        let v = p.grid_point(k, res);
                        if values.last() != Some(&v) {
                            values.push(v);
                        }
                    }
                    values
                }
            };
            axes.push(axis);
        }
        let mut total: usize = 1;
        for axis in &axes {
            total = total
                .checked_mul(axis.len())
                .filter(|t| *t <= spec.cap)
                .ok_or(SpaceError::GridTooLarge { cap: spec.cap })?;
        }

        let mut out = Vec::with_capacity(total);
        let mut index = vec![0usize; axes.len()];
        for _ in 0..total {
            let mut config = Configuration::new();
            for ((p, axis), &i) in self.params.iter().zip(&axes).zip(&index) {
                config.insert(p.name.clone(), axis[i].clone());
            }
            out.push(config);
            // odometer increment, last parameter fastest
            for d in (0..axes.len()).rev() {
                index[d] += 1;
                if index[d] < axes[d].len() {
                    break;
                }
                index[d] = 0;
            }
        }
        Ok(out)
    }

    pub fn encode(&self, config: &Configuration) -> Result<Vec<f64>, SpaceError> {
        let mut out = Vec::with_capacity(self.encoded_dim());
        for p in &self.params {
            let value = config
                .get(&p.name)
                .ok_or_else(|| SpaceError::MissingParam(p.name.clone()))?;
            let bad = || SpaceError::InvalidValue {
                name: p.name.clone(),
                value: value.clone(),
            };
            match &p.kind {
                ParamKind::Categorical { choices } => {
                    let idx = choices.iter().position(|c| c == value).ok_or_else(bad)?;
                    out.extend((0..choices.len()).map(|i| if i == idx { 1.0 } else { 0.0 }));
                }
                _ => {
                    if !p.contains(value) {
                        return Err(bad());
                    }
                    let (lo, hi, log) = p.numeric_bounds().expect("numeric");
                    let v = value.as_f64().ok_or_else(bad)?;
                    out.push(scale_to_unit(v, lo, hi, log).clamp(0.0, 1.0));
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`encode`](Self::encode). Coordinates are clamped to the
    /// unit interval and one-hot blocks snap to their argmax (first on ties).
    pub fn decode(&self, encoded: &[f64]) -> Result<Configuration, SpaceError> {
        let dim = self.encoded_dim();
        if encoded.len() != dim {
            return Err(SpaceError::DimensionMismatch {
                expected: dim,
                actual: encoded.len(),
            });
        }
        let mut config = Configuration::new();
        let mut offset = 0;
        for p in &self.params {
            let value = match &p.kind {
                ParamKind::Categorical { choices } => {
                    let block = &encoded[offset..offset + choices.len()];
                    choices[argmax_first(block)].clone()
                }
                _ => p.value_at_unit(encoded[offset]),
            };
            offset += p.encoded_width();
            config.insert(p.name.clone(), value);
        }
        Ok(config)
    }

    /// Parses a search-space document (YAML; JSON is accepted as well).
    ///
    /// ```yaml
    /// learning_rate: {type: float, lo: 1.0e-4, hi: 1.0e-1, log: true}
    /// batch_size: {type: categorical, choices: [256, 512, 1024]}
    /// embedding_dim: {type: int, lo: 8, hi: 256, log: true}
    /// ```
    pub fn from_yaml_str(text: &str) -> Result<Self, SpaceError> {
        let entries: IndexMap<String, ParamEntry> = serde_yaml::from_str(text).map_err(|e| SpaceError::File {
            path: "<search space>".into(),
            message: e.to_string(),
        })?;
        let mut params = Vec::with_capacity(entries.len());
        for (name, entry) in entries {
            params.push(entry.into_spec(name)?);
        }
        Self::new(params)
    }

    pub fn from_file(path: &Path) -> Result<Self, SpaceError> {
        let text = std::fs::read_to_string(path).map_err(|e| SpaceError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_yaml_str(&text).map_err(|e| match e {
            SpaceError::File { message, .. } => SpaceError::File {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn to_yaml_string(&self) -> String {
        let mut out = String::new();
        for p in &self.params {
            let body = match &p.kind {
                ParamKind::Categorical { choices } => {
                    let items: Vec<String> = choices
                        .iter()
                        .map(|c| match c {
                            Value::Str(s) => format!("{s:?}"),
                            Value::Real(v) => format!("{v:?}"),
                            Value::Int(v) => v.to_string(),
                        })
                        .collect();
                    format!("{{type: categorical, choices: [{}]}}", items.join(", "))
                }
                ParamKind::Integer { lo, hi, log } => {
                    format!("{{type: int, lo: {lo}, hi: {hi}, log: {log}}}")
                }
                ParamKind::Real { lo, hi, log } => {
                    format!("{{type: float, lo: {lo:e}, hi: {hi:e}, log: {log}}}")
                }
            };
            out.push_str(&format!("{}: {}\n", p.name, body));
        }
        out
    }
}

impl ParamSpec {
    fn grid_point(&self, k: usize, res: usize) -> Value {
        match self.kind {
            // pin the endpoints exactly; exp(ln hi) need not round-trip
            ParamKind::Real { lo, .. } if k == 0 => Value::Real(lo),
            ParamKind::Real { hi, .. } if k == res - 1 => Value::Real(hi),
            _ => self.value_at_unit(k as f64 / (res - 1) as f64),
        }
    }
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamEntry {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    choices: Option<Vec<Value>>,
    #[serde(default)]
    lo: Option<f64>,
    #[serde(default)]
    hi: Option<f64>,
    #[serde(default)]
    log: bool,
}

impl ParamEntry {
    fn into_spec(self, name: String) -> Result<ParamSpec, SpaceError> {
        let missing = |field: &str| SpaceError::InvalidParam {
            name: name.clone(),
            reason: format!("missing `{field}`"),
        };
        match self.kind.as_str() {
            "categorical" => {
                let choices = self.choices.ok_or_else(|| missing("choices"))?;
                ParamSpec::categorical(name, choices)
            }
            "int" | "integer" => {
                let lo = self.lo.ok_or_else(|| missing("lo"))?;
                let hi = self.hi.ok_or_else(|| missing("hi"))?;
                if lo.fract() != 0.0 || hi.fract() != 0.0 {
                    return Err(SpaceError::InvalidParam {
                        name,
                        reason: "integer bounds must be whole numbers".into(),
                    });
                }
                ParamSpec::integer(name, lo as i64, hi as i64, self.log)
            }
            "float" | "real" => {
                let lo = self.lo.ok_or_else(|| missing("lo"))?;
                let hi = self.hi.ok_or_else(|| missing("hi"))?;
                ParamSpec::real(name, lo, hi, self.log)
            }
            other => Err(SpaceError::InvalidParam {
                name,
                reason: format!("unknown type `{other}`"),
            }),
        }
    }
}
