use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::featurize::{FingerprintConfig, ATOM_DIM, BOND_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskType {
    Regression,
    Classification,
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskType::Regression => "regression",
            TaskType::Classification => "classification",
        })
    }
}

impl FromStr for TaskType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "regression" | "reg" => Ok(TaskType::Regression),
            "classification" | "cls" => Ok(TaskType::Classification),
            _ => Err(format!("unknown task type '{s}'")),
        }
    }
}

/// Which node streams feed the readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Streams {
    Both,
    GatOnly,
    TransformerOnly,
}

impl fmt::Display for Streams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Streams::Both => "both",
            Streams::GatOnly => "gat-only",
            Streams::TransformerOnly => "transformer-only",
        })
    }
}

impl FromStr for Streams {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "both" => Ok(Streams::Both),
            "gat-only" => Ok(Streams::GatOnly),
            "transformer-only" => Ok(Streams::TransformerOnly),
            _ => Err(format!("unknown stream selection '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    DynamicTanh,
    LayerNorm,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::DynamicTanh => "dyt",
            NormKind::LayerNorm => "layernorm",
        })
    }
}

impl FromStr for NormKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dyt" => Ok(NormKind::DynamicTanh),
            "layernorm" => Ok(NormKind::LayerNorm),
            _ => Err(format!("unknown norm '{s}'")),
        }
    }
}

/// Architecture hyperparameters. Serialized as sorted `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub transformer_layers: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub gat_out_dim: usize,
    pub gat_layers: usize,
    /// Width shared by both node streams; must equal `heads * head_dim`.
    pub hidden_dim: usize,
    pub fingerprint_embed_dim: usize,
    pub dropout_gat: f64,
    pub dropout_ffn: f64,
    pub dropout_attn: f64,
    pub task: TaskType,
    pub n_tasks: usize,
    pub streams: Streams,
    pub use_fingerprint: bool,
    pub norm: NormKind,
    pub use_adjacency: bool,
    pub leaky_slope: f64,
    pub fingerprints: FingerprintConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            transformer_layers: 2,
            heads: 4,
            head_dim: 8,
            gat_out_dim: 32,
            gat_layers: 2,
            hidden_dim: 32,
            fingerprint_embed_dim: 64,
            dropout_gat: 0.1,
            dropout_ffn: 0.1,
            dropout_attn: 0.1,
            task: TaskType::Regression,
            n_tasks: 1,
            streams: Streams::Both,
            use_fingerprint: true,
            norm: NormKind::DynamicTanh,
            use_adjacency: true,
            leaky_slope: 0.2,
            fingerprints: FingerprintConfig::default(),
        }
    }
}

pub const MODEL_KEYS: &[&str] = &[
    "dropout_attn",
    "dropout_ffn",
    "dropout_gat",
    "erg_max_path",
    "fingerprint_embed_dim",
    "fingerprints",
    "gat_layers",
    "gat_out_dim",
    "head_dim",
    "heads",
    "hidden_dim",
    "leaky_slope",
    "morgan_bits",
    "morgan_radius",
    "n_tasks",
    "norm",
    "streams",
    "task",
    "transformer_layers",
    "use_adjacency",
    "use_fingerprint",
];

pub(crate) fn parse_field<T: FromStr>(key: &str, value: &str, errors: &mut Vec<String>) -> Option<T>
where
    T::Err: fmt::Display,
{
    match value.parse::<T>() {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("{key}: cannot parse '{value}': {e}"));
            None
        }
    }
}

impl ModelConfig {
    pub fn fingerprint_dim(&self) -> usize {
        self.fingerprints.len()
    }

    pub fn has_gat(&self) -> bool {
        self.streams != Streams::TransformerOnly
    }

    pub fn has_transformer(&self) -> bool {
        self.streams != Streams::GatOnly
    }

    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        for (name, v) in [
            ("transformer_layers", self.transformer_layers),
            ("heads", self.heads),
            ("head_dim", self.head_dim),
            ("gat_out_dim", self.gat_out_dim),
            ("gat_layers", self.gat_layers),
            ("hidden_dim", self.hidden_dim),
            ("fingerprint_embed_dim", self.fingerprint_embed_dim),
            ("n_tasks", self.n_tasks),
        ] {
            if v == 0 {
                errors.push(format!("{name} must be at least 1"));
            }
        }
        for (name, r) in [
            ("dropout_gat", self.dropout_gat),
            ("dropout_ffn", self.dropout_ffn),
            ("dropout_attn", self.dropout_attn),
        ] {
            if !(0.0..1.0).contains(&r) {
                errors.push(format!("{name} must lie in [0, 1), got {r}"));
            }
        }
        if self.hidden_dim != self.heads * self.head_dim {
            errors.push(format!(
                "hidden_dim ({}) must equal heads * head_dim ({} * {})",
                self.hidden_dim, self.heads, self.head_dim
            ));
        }
        if !self.leaky_slope.is_finite() {
            errors.push("leaky_slope must be finite".into());
        }
        if self.use_fingerprint && self.fingerprints.is_empty() {
            errors.push("use_fingerprint requires at least one fingerprint component".into());
        }
        if self.fingerprints.morgan && self.fingerprints.morgan_bits < 64 {
            errors.push("morgan_bits must be at least 64".into());
        }
        if self.fingerprints.erg && self.fingerprints.erg_max_path == 0 {
            errors.push("erg_max_path must be at least 1".into());
        }
        errors
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        let f = &self.fingerprints;
        let entries: [(&str, String); 21] = [
            ("transformer_layers", self.transformer_layers.to_string()),
            ("heads", self.heads.to_string()),
            ("head_dim", self.head_dim.to_string()),
            ("gat_out_dim", self.gat_out_dim.to_string()),
            ("gat_layers", self.gat_layers.to_string()),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("fingerprint_embed_dim", self.fingerprint_embed_dim.to_string()),
            ("dropout_gat", self.dropout_gat.to_string()),
            ("dropout_ffn", self.dropout_ffn.to_string()),
            ("dropout_attn", self.dropout_attn.to_string()),
            ("task", self.task.to_string()),
            ("n_tasks", self.n_tasks.to_string()),
            ("streams", self.streams.to_string()),
            ("use_fingerprint", self.use_fingerprint.to_string()),
            ("norm", self.norm.to_string()),
            ("use_adjacency", self.use_adjacency.to_string()),
            ("leaky_slope", self.leaky_slope.to_string()),
            ("fingerprints", f.components()),
            ("morgan_radius", f.morgan_radius.to_string()),
            ("morgan_bits", f.morgan_bits.to_string()),
            ("erg_max_path", f.erg_max_path.to_string()),
        ];
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.to_map().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Overrides fields from `map`; keys outside [`MODEL_KEYS`] are ignored.
    /// Returns every parse error found.
    pub fn apply_map(&mut self, map: &BTreeMap<String, String>) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        let e = &mut errors;
        for (key, value) in map {
            let value = value.as_str();
            match key.as_str() {
                "transformer_layers" => self.transformer_layers = parse_field(key, value, e).unwrap_or(self.transformer_layers),
                "heads" => self.heads = parse_field(key, value, e).unwrap_or(self.heads),
                "head_dim" => self.head_dim = parse_field(key, value, e).unwrap_or(self.head_dim),
                "gat_out_dim" => self.gat_out_dim = parse_field(key, value, e).unwrap_or(self.gat_out_dim),
                "gat_layers" => self.gat_layers = parse_field(key, value, e).unwrap_or(self.gat_layers),
                "hidden_dim" => self.hidden_dim = parse_field(key, value, e).unwrap_or(self.hidden_dim),
                "fingerprint_embed_dim" => {
                    self.fingerprint_embed_dim = parse_field(key, value, e).unwrap_or(self.fingerprint_embed_dim)
                }
                "dropout_gat" => self.dropout_gat = parse_field(key, value, e).unwrap_or(self.dropout_gat),
                "dropout_ffn" => self.dropout_ffn = parse_field(key, value, e).unwrap_or(self.dropout_ffn),
                "dropout_attn" => self.dropout_attn = parse_field(key, value, e).unwrap_or(self.dropout_attn),
                "task" => self.task = parse_field(key, value, e).unwrap_or(self.task),
                "n_tasks" => self.n_tasks = parse_field(key, value, e).unwrap_or(self.n_tasks),
                "streams" => self.streams = parse_field(key, value, e).unwrap_or(self.streams),
                "use_fingerprint" => self.use_fingerprint = parse_field(key, value, e).unwrap_or(self.use_fingerprint),
                "norm" => self.norm = parse_field(key, value, e).unwrap_or(self.norm),
                "use_adjacency" => self.use_adjacency = parse_field(key, value, e).unwrap_or(self.use_adjacency),
                "leaky_slope" => self.leaky_slope = parse_field(key, value, e).unwrap_or(self.leaky_slope),
                "fingerprints" => match self.fingerprints.clone().with_components(value) {
                    Ok(f) => self.fingerprints = f,
                    Err(msg) => e.push(format!("fingerprints: {msg}")),
                },
                "morgan_radius" => {
                    self.fingerprints.morgan_radius = parse_field(key, value, e).unwrap_or(self.fingerprints.morgan_radius)
                }
                "morgan_bits" => {
                    self.fingerprints.morgan_bits = parse_field(key, value, e).unwrap_or(self.fingerprints.morgan_bits)
                }
                "erg_max_path" => {
                    self.fingerprints.erg_max_path = parse_field(key, value, e).unwrap_or(self.fingerprints.erg_max_path)
                }
                _ => {}
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Parses text written by [`ModelConfig::to_text`], then validates.
    pub fn from_text(text: &str) -> Result<Self, Vec<String>> {
        let map = parse_key_values(text)?;
        let mut errors: Vec<String> = map
            .keys()
            .filter(|k| !MODEL_KEYS.contains(&k.as_str()))
            .map(|k| format!("unknown model key '{k}'"))
            .collect();
        let mut config = ModelConfig::default();
        if let Err(e) = config.apply_map(&map) {
            errors.extend(e);
        }
        errors.extend(config.validate());
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(errors)
        }
    }

    /// Closed-form number of learnable scalars.
    pub fn parameter_count(&self) -> usize {
        let lin = |i: usize, o: usize, bias: bool| i * o + if bias { o } else { 0 };
        let gru = |i: usize, h: usize| 3 * ((i + h) * h + h);
        let (g, d, e) = (self.gat_out_dim, self.hidden_dim, self.fingerprint_embed_dim);
        let mut n = lin(ATOM_DIM, g, true);
        if self.use_fingerprint {
            n += lin(self.fingerprint_dim(), e, true) + lin(e, e, true);
        }
        if self.has_gat() {
            n += lin(ATOM_DIM + BOND_DIM, g, true);
            n += self.gat_layers * (2 * g + g * g + gru(g, g));
            n += lin(g, d, true);
        }
        if self.has_transformer() {
            let norm = match self.norm {
                NormKind::DynamicTanh => 1 + 2 * d,
                NormKind::LayerNorm => 2 * d,
            };
            let layer = 3 * d * d + lin(d, d, true) + 1 + usize::from(self.use_adjacency) + 2 * norm + lin(d, 4 * d, true) + lin(4 * d, d, true);
            n += lin(g, d, true) + self.transformer_layers * layer;
        }
        if self.streams == Streams::Both {
            n += 1;
        }
        n += 2 * d + d * d + gru(d, d);
        let head_in = if self.use_fingerprint {
            n += e * d + 2 * d * d + lin(d, d, true);
            2 * d + e
        } else {
            d
        };
        n + lin(head_in, d, true) + lin(d, self.n_tasks, true)
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, Vec<String>> {
    let mut map = BTreeMap::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                    errors.push(format!("line {}: duplicate key '{}'", i + 1, k.trim()));
                }
            }
            None => errors.push(format!("line {}: expected key=value", i + 1)),
        }
    }
    if errors.is_empty() {
        Ok(map)
    } else {
        Err(errors)
    }
}
