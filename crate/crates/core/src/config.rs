//! Pipeline configuration, read from a TOML document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Format;
use crate::dedup::{ExpertRule, DEFAULT_K, DEFAULT_SWEEP, DEFAULT_THETA};
use crate::embed::{DEFAULT_DIM, DEFAULT_MAX_TOKENS};
use crate::error::Error;
use crate::index::IndexConfig;
use crate::normalize::NormalizeConfig;
use crate::retry::RetryPolicy;
use crate::translate::BackendKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Translate representatives to English, then embed.
    #[default]
    TwoStep,
    /// Embed the cleaned text directly; translation is the identity.
    Multilingual,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two_step" | "two-step" => Ok(Mode::TwoStep),
            "multilingual" => Ok(Mode::Multilingual),
            other => Err(format!("unknown mode {other:?} (expected two_step or multilingual)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::TwoStep => "two_step",
            Mode::Multilingual => "multilingual",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslateSection {
    /// Required in two-step mode.
    pub backend: Option<BackendKind>,
    pub max_in_flight: usize,
    pub batch_size: usize,
    pub cache_path: Option<PathBuf>,
    pub retry: RetryPolicy,
}

impl Default for TranslateSection {
    fn default() -> Self {
        Self {
            backend: None,
            max_in_flight: 4,
            batch_size: 32,
            cache_path: None,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedBackend {
    #[default]
    Hashed,
    Remote {
        endpoint: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedSection {
    pub backend: EmbedBackend,
    pub dim: usize,
    pub max_tokens: usize,
    pub batch_size: usize,
    pub max_in_flight: usize,
}

impl Default for EmbedSection {
    fn default() -> Self {
        Self {
            backend: EmbedBackend::Hashed,
            dim: DEFAULT_DIM,
            max_tokens: DEFAULT_MAX_TOKENS,
            batch_size: 64,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DedupSection {
    pub k: usize,
    pub base_theta: f64,
    /// Empty means threshold-only.
    pub rules: Vec<ExpertRule>,
    pub sweep: Vec<f64>,
}

impl Default for DedupSection {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            base_theta: DEFAULT_THETA,
            rules: Vec::new(),
            sweep: DEFAULT_SWEEP.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IoSection {
    pub input: Option<PathBuf>,
    pub format: Option<Format>,
    pub output_dir: PathBuf,
}

impl Default for IoSection {
    fn default() -> Self {
        Self {
            input: None,
            format: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub normalize: NormalizeConfig,
    pub translate: TranslateSection,
    pub embed: EmbedSection,
    pub index: IndexConfig,
    pub dedup: DedupSection,
    pub io: IoSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    /// Strict reference settings: ASCII-only cleaning, k = 100, θ = 0.25 and a
    /// 384-token input limit.
    pub fn apply_paper_strict(&mut self) {
        self.normalize.ascii_only = true;
        self.dedup.k = 100;
        self.dedup.base_theta = 0.25;
        self.embed.max_tokens = 384;
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        if self.mode == Mode::TwoStep && self.translate.backend.is_none() {
            return bad("two_step mode requires a translate.backend".into());
        }
        if self.translate.max_in_flight == 0 || self.translate.batch_size == 0 {
            return bad("translate.max_in_flight and translate.batch_size must be positive".into());
        }
        if self.embed.dim < 2 || self.embed.max_tokens == 0 {
            return bad("embed.dim must be >= 2 and embed.max_tokens positive".into());
        }
        if self.index.dim != 0 && self.index.dim != self.embed.dim {
            return bad(format!(
                "index.dim {} disagrees with embed.dim {}",
                self.index.dim, self.embed.dim
            ));
        }
        if self.dedup.k == 0 {
            return bad("dedup.k must be positive".into());
        }
        if !(self.dedup.base_theta >= 0.0 && self.dedup.base_theta.is_finite()) {
            return bad(format!("dedup.base_theta {} must be a non-negative number", self.dedup.base_theta));
        }
        if self.dedup.sweep.windows(2).any(|w| w[0] > w[1]) {
            return bad("dedup.sweep must be ascending".into());
        }
        if self.normalize.keep_punct.is_empty() {
            return bad("normalize.keep_punct must not be empty".into());
        }
        for r in &self.dedup.rules {
            r.clone().validated().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(last) = self.dedup.rules.last() {
            if !last.is_catch_all() {
                return bad("the last rule must match every pair (company, language and location = any)".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = PipelineConfig::from_toml("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.dedup.k, 100);
    }

    #[test]
    fn round_trip() {
        let mut c = PipelineConfig::default();
        c.translate.backend = Some(BackendKind::Dictionary {
            path: "dict.json".into(),
        });
        c.dedup.rules = crate::dedup::example_ruleset();
        c.io.format = Some(Format::Csv);
        let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        back.validate().unwrap();
    }

    #[test]
    fn nested_keys() {
        let text = r#"
mode = "multilingual"
[embed]
dim = 64
[index]
kind = "ivf"
nlist = 8
[dedup]
base_theta = 0.3
[[dedup.rules]]
company = "same"
action = "threshold"
threshold = 0.35
[[dedup.rules]]
action = "threshold"
"#;
        let c = PipelineConfig::from_toml(text).unwrap();
        assert_eq!(c.mode, Mode::Multilingual);
        assert_eq!(c.embed.dim, 64);
        assert_eq!(c.index.nlist, 8);
        assert_eq!(c.dedup.rules.len(), 2);
        c.validate().unwrap();
    }

    #[test]
    fn two_step_needs_translator() {
        let c = PipelineConfig::default();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_are_fine_but_bad_types_are_not() {
        assert!(PipelineConfig::from_toml("[dedup]\nk = \"many\"").is_err());
    }

    #[test]
    fn missing_terminal_rule_rejected() {
        let mut c = PipelineConfig {
            mode: Mode::Multilingual,
            ..Default::default()
        };
        c.dedup.rules = vec![crate::dedup::example_ruleset()[0].clone()];
        assert!(c.validate().is_err());
    }
}
