use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::layers::{LruMode, NormKind, RingPreset};

/// Where the skip connection of a SkipBlock attaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipStyle {
    /// `y = post(x₁ + up(inner(down(x₁))))` with `x₁ = pre(x)`.
    Short,
    /// `y = x + post(up(inner(down(pre(x)))))`.
    Long,
}

/// How a level's `2·l` layers are split between the two sides of the pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// `l` layers before down-pooling and `l` after up-pooling.
    Around,
    /// All `2·l` layers after up-pooling.
    After,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeepMixer {
    RgLru,
    Attention,
}

macro_rules! named_enum {
    ($ty:ident, $what:literal, $($variant:ident => $name:literal),+) => {
        impl $ty {
            pub fn parse(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::arg(format!(concat!("unknown ", $what, " '{}'"), other))),
                }
            }

            pub fn name(self) -> &'static str {
                match self {
                    $($ty::$variant => $name,)+
                }
            }
        }
    };
}

named_enum!(SkipStyle, "skip style", Short => "short", Long => "long");
named_enum!(Placement, "placement", Around => "around", After => "after");
named_enum!(DeepMixer, "deepest mixer", RgLru => "rg_lru", Attention => "attention");

/// Architecture description. `None` fields resolve from the others
/// (see the accessor of the same name).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    pub rec_dim: usize,
    pub mlp_dim: Option<usize>,
    pub pooling: Vec<usize>,
    pub layers: Vec<usize>,
    pub dropout: f64,
    pub skip: SkipStyle,
    pub placement: Placement,
    pub norm: NormKind,
    pub gated: bool,
    pub deepest: DeepMixer,
    pub heads: usize,
    pub multi_query: bool,
    pub lru_mode: LruMode,
    pub init_scale: Option<f64>,
    pub ring: RingPreset,
    pub groups: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 32,
            rec_dim: 64,
            mlp_dim: None,
            pooling: vec![2, 4],
            layers: vec![2, 2, 2],
            dropout: 0.0,
            skip: SkipStyle::Short,
            placement: Placement::Around,
            norm: NormKind::Layer,
            gated: true,
            deepest: DeepMixer::RgLru,
            heads: 4,
            multi_query: false,
            lru_mode: LruMode::Complex,
            init_scale: None,
            ring: RingPreset::Small,
            groups: None,
        }
    }
}

pub const MODEL_KEYS: &[&str] = &[
    "dim",
    "rec_dim",
    "mlp_dim",
    "pooling",
    "layers",
    "dropout",
    "skip",
    "placement",
    "norm",
    "gated",
    "deepest",
    "heads",
    "multi_query",
    "lru_mode",
    "init_scale",
    "ring",
    "groups",
];

pub(crate) fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::arg(format!("{key}: expected a non-negative integer, got '{v}'")))
}

pub(crate) fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| Error::arg(format!("{key}: expected a number, got '{v}'")))?;
    if !x.is_finite() {
        return Err(Error::arg(format!("{key}: value must be finite")));
    }
    Ok(x)
}

pub(crate) fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::arg(format!("{key}: expected true or false, got '{v}'"))),
    }
}

/// Accepts `2,4`, `[2, 4]` and the empty list `[]`.
pub(crate) fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    let inner = v.trim().trim_start_matches('[').trim_end_matches(']').trim();
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|s| parse_usize(key, s.trim())).collect()
}

fn format_list(v: &[usize]) -> String {
    let items: Vec<String> = v.iter().map(usize::to_string).collect();
    format!("[{}]", items.join(", "))
}

fn auto<T>(key: &str, v: &str, parse: impl Fn(&str, &str) -> Result<T>) -> Result<Option<T>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

impl ModelConfig {
    /// The 36-layer reference architecture.
    pub fn baseline() -> Self {
        ModelConfig {
            dim: 128,
            rec_dim: 256,
            pooling: vec![2, 4, 4, 5],
            layers: vec![4, 4, 4, 4, 4],
            dropout: 0.2,
            ..ModelConfig::default()
        }
    }

    pub fn mlp_dim(&self) -> usize {
        self.mlp_dim.unwrap_or(self.dim)
    }

    pub fn groups(&self) -> usize {
        self.groups.unwrap_or(self.dim)
    }

    /// Total layers: `2·l_i` per pooled level plus `l` at the deepest level.
    pub fn layer_count(&self) -> usize {
        let (deep, outer) = self.layers.split_last().map_or((0, &[][..]), |(d, o)| (*d, o));
        2 * outer.iter().sum::<usize>() + deep
    }

    /// Residual blocks in the network; each layer holds a temporal and an MLP block.
    pub fn block_count(&self) -> usize {
        2 * self.layer_count()
    }

    /// `1 / n_blocks` unless set explicitly.
    pub fn init_scale(&self) -> f64 {
        self.init_scale.unwrap_or_else(|| 1.0 / self.block_count().max(1) as f64)
    }

    /// Product of the pooling factors; sequence lengths must be multiples of it.
    pub fn pooling_product(&self) -> usize {
        self.pooling.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != self.pooling.len() + 1 {
            return Err(Error::arg(format!(
                "layer config needs one entry per level: {} pooling factors but {} layer counts",
                self.pooling.len(),
                self.layers.len()
            )));
        }
        if let Some(f) = self.pooling.iter().find(|&&f| f < 2) {
            return Err(Error::arg(format!("pooling factors must be at least 2, got {f}")));
        }
        if self.dim == 0 || self.dim % 2 != 0 {
            return Err(Error::arg(format!("model dimension must be even and positive, got {}", self.dim)));
        }
        if self.rec_dim == 0 || self.mlp_dim() == 0 {
            return Err(Error::arg("recurrence and MLP dimensions must be positive"));
        }
        if self.lru_mode == LruMode::Complex && self.rec_dim % 2 != 0 {
            return Err(Error::arg(format!("complex rg-lru needs an even recurrence dimension, got {}", self.rec_dim)));
        }
        let g = self.groups();
        if g == 0 || self.dim % g != 0 {
            return Err(Error::arg(format!("group count {g} must divide the model dimension {}", self.dim)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::arg(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if let Some(s) = self.init_scale {
            if !(s >= 0.0) {
                return Err(Error::arg(format!("init scale must be non-negative, got {s}")));
            }
        }
        if self.deepest == DeepMixer::Attention && (self.heads == 0 || self.dim % self.heads != 0) {
            return Err(Error::arg(format!("{} heads do not divide the model dimension {}", self.heads, self.dim)));
        }
        Ok(())
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        match key {
            "dim" => self.dim = parse_usize(key, v)?,
            "rec_dim" => self.rec_dim = parse_usize(key, v)?,
            "mlp_dim" => self.mlp_dim = auto(key, v, parse_usize)?,
            "pooling" => self.pooling = parse_list(key, v)?,
            "layers" => self.layers = parse_list(key, v)?,
            "dropout" => self.dropout = parse_f64(key, v)?,
            "skip" => self.skip = SkipStyle::parse(v)?,
            "placement" => self.placement = Placement::parse(v)?,
            "norm" => self.norm = NormKind::parse(v)?,
            "gated" => self.gated = parse_bool(key, v)?,
            "deepest" => self.deepest = DeepMixer::parse(v)?,
            "heads" => self.heads = parse_usize(key, v)?,
            "multi_query" => self.multi_query = parse_bool(key, v)?,
            "lru_mode" => self.lru_mode = LruMode::parse(v)?,
            "init_scale" => self.init_scale = auto(key, v, parse_f64)?,
            "ring" => self.ring = RingPreset::parse(v)?,
            "groups" => self.groups = auto(key, v, parse_usize)?,
            other => return Err(Error::arg(format!("unknown model key '{other}'"))),
        }
        Ok(())
    }

    /// `(key, value)` pairs in canonical order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".to_string());
        vec![
            ("dim", self.dim.to_string()),
            ("rec_dim", self.rec_dim.to_string()),
            ("mlp_dim", opt(self.mlp_dim.map(|v| v.to_string()))),
            ("pooling", format_list(&self.pooling)),
            ("layers", format_list(&self.layers)),
            ("dropout", format!("{:?}", self.dropout)),
            ("skip", self.skip.name().to_string()),
            ("placement", self.placement.name().to_string()),
            ("norm", self.norm.name().to_string()),
            ("gated", self.gated.to_string()),
            ("deepest", self.deepest.name().to_string()),
            ("heads", self.heads.to_string()),
            ("multi_query", self.multi_query.to_string()),
            ("lru_mode", self.lru_mode.name().to_string()),
            ("init_scale", opt(self.init_scale.map(|v| format!("{v:?}")))),
            ("ring", self.ring.name().to_string()),
            ("groups", opt(self.groups.map(|v| v.to_string()))),
        ]
    }

    /// Canonical `key = value` lines; `from_text` inverts it exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::arg(format!("expected key = value, got '{line}'")))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
