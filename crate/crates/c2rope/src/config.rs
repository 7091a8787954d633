//! Plain-text run configuration: `key=value` lines with `#` comments.
//! One config fixes everything a run needs — model shape, seed, encoding,
//! mask and sequence geometry — so an experiment is reproducible from the
//! file alone.

use std::collections::HashSet;

use crate::maskgen::{MaskKind, MAX_MASK_TOKENS};
use crate::posindex::{GridShape, MultiViewLayout};
use crate::rotary::Variant;
use crate::toynet::ModelConfig;
use crate::{Error, Result};

/// Everything a `run` needs; also the carrier for flag overrides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub layers: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub vocab: usize,
    pub seed: u64,
    pub encoding: Variant,
    pub mask: MaskKind,
    pub grid: GridShape,
    pub views: usize,
    pub text: usize,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            layers: 2,
            heads: 2,
            head_dim: 16,
            vocab: 32,
            seed: 0,
            encoding: Variant::C2Rope,
            mask: MaskKind::Chebyshev,
            grid: GridShape::new(4, 4).expect("static shape"),
            views: 1,
            text: 4,
        }
    }
}

pub const CONFIG_KEYS: [&str; 10] = [
    "layers", "heads", "head_dim", "vocab", "seed", "encoding", "mask", "grid", "views", "text",
];

impl RunConfig {
    /// Parses a config file body: one `key=value` per line, `#` comments
    /// and blank lines ignored, every key at most once. Unset keys keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen: HashSet<String> = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                Error::parse(line, format!("expected key=value, got {trimmed:?}"))
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::parse(line, format!("duplicate key {key:?}")));
            }
            cfg.set(key, value.trim())
                .map_err(|msg| Error::parse(line, msg))?;
        }
        Ok(cfg)
    }

    /// Applies one `key=value` override (flags win over file contents).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        self.set(key, value).map_err(Error::Config)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn count(value: &str, what: &str) -> std::result::Result<usize, String> {
            value
                .parse()
                .map_err(|_| format!("bad {what} {value:?}: expected a nonnegative integer"))
        }
        match key {
            "layers" => self.layers = count(value, "layers")?,
            "heads" => self.heads = count(value, "heads")?,
            "head_dim" => self.head_dim = count(value, "head_dim")?,
            "vocab" => self.vocab = count(value, "vocab")?,
            "views" => self.views = count(value, "views")?,
            "text" => self.text = count(value, "text")?,
            "seed" => {
                self.seed = value.parse().map_err(|_| {
                    format!("bad seed {value:?}: expected a 64-bit unsigned integer")
                })?
            }
            "encoding" => self.encoding = value.parse().map_err(|e: Error| e.bare_message())?,
            "mask" => self.mask = value.parse().map_err(|e: Error| e.bare_message())?,
            "grid" => self.grid = value.parse().map_err(|e: Error| e.bare_message())?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Canonical config-file rendering; `parse` of the output reproduces
    /// the config.
    pub fn to_config_text(&self) -> String {
        format!(
            "layers={}\nheads={}\nhead_dim={}\nvocab={}\nseed={}\nencoding={}\nmask={}\ngrid={}\nviews={}\ntext={}\n",
            self.layers,
            self.heads,
            self.head_dim,
            self.vocab,
            self.seed,
            self.encoding,
            self.mask,
            self.grid,
            self.views,
            self.text
        )
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            layers: self.layers,
            heads: self.heads,
            head_dim: self.head_dim,
            vocab: self.vocab,
            seed: self.seed,
            encoding: self.encoding,
            mask_kind: self.mask,
        }
    }

    pub fn layout(&self) -> Result<MultiViewLayout> {
        MultiViewLayout::new(self.grid, self.views, self.text)
    }

    /// Cross-field validation: model constraints, sequence geometry, and
    /// desk-scale resource caps.
    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        if self.layers > 64 {
            return Err(Error::config(format!(
                "layers={} exceeds the cap of 64",
                self.layers
            )));
        }
        if self.vocab > 65536 {
            return Err(Error::config(format!(
                "vocab={} exceeds the cap of 65536",
                self.vocab
            )));
        }
        let d = self.model_config().model_dim();
        if d > 4096 {
            return Err(Error::config(format!(
                "model width heads*head_dim={d} exceeds the cap of 4096"
            )));
        }
        let layout = self.layout()?;
        if layout.len() > MAX_MASK_TOKENS {
            return Err(Error::config(format!(
                "sequence of {} tokens exceeds the {MAX_MASK_TOKENS}-token limit",
                layout.len()
            )));
        }
        Ok(())
    }
}
