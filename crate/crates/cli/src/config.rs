//! Structured-text run configuration (TOML). Parsing is total: unknown keys
//! are errors, every diagnostic carries the offending line, and a parsed
//! config re-printed and re-parsed compares equal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use wordbench_core::amalgam::{AmalgamCaps, AmalgamContext, EdgeSpec};
use wordbench_core::base::BaseGroup;
use wordbench_core::preset;
use wordbench_core::torus::{Automorphism, MappingTorus};
use wordbench_core::words::{Alphabet, Presentation, Ratio};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("config rejected ({code}): {detail}")]
    Semantic { code: String, detail: String },
}

fn semantic(code: &str, detail: impl Into<String>) -> ConfigError {
    ConfigError::Semantic { code: code.to_string(), detail: detail.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Free,
    Surface,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutConfig {
    pub forward: BTreeMap<String, String>,
    pub backward: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub x: String,
    pub x1: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsConfig {
    pub ball_radius: usize,
    pub distance_cap: usize,
    pub coset_window: usize,
    pub geodesic_cap: usize,
    /// Power window for the y-vs-edge conjugacy scan.
    pub y_window: usize,
}

impl Default for CapsConfig {
    fn default() -> Self {
        CapsConfig { ball_radius: 6, distance_cap: 6, coset_window: 24, geodesic_cap: 8, y_window: 12 }
    }
}

/// One experiment invocation; the `name` tag selects the kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentConfig {
    Distortion {
        #[serde(default = "default_distortion_n")]
        n_max: u32,
    },
    Claim1 {
        #[serde(default = "default_claim1_min")]
        n_min: i64,
        #[serde(default = "default_claim1_max")]
        n_max: i64,
    },
    Claim2 {
        #[serde(default = "default_claim2_q")]
        q: Vec<String>,
        #[serde(default = "default_claim2_n")]
        n_max: u32,
    },
    Escape {
        z: String,
        #[serde(default = "default_escape_radius")]
        h_radius: usize,
        #[serde(default = "default_escape_n")]
        n_max: u32,
    },
    Vn {
        g: String,
        #[serde(default = "default_vn_radius")]
        max_radius: usize,
    },
    Delta {
        #[serde(default = "default_delta_radius")]
        max_radius: usize,
        #[serde(default)]
        exhaustive: bool,
        #[serde(default = "default_delta_samples")]
        sample_count: usize,
    },
    Quasiconvexity {
        subgroup: String,
        #[serde(default = "default_qc_radius")]
        radius: usize,
    },
}

fn default_distortion_n() -> u32 {
    30
}
fn default_claim1_min() -> i64 {
    -20
}
fn default_claim1_max() -> i64 {
    20
}
fn default_claim2_q() -> Vec<String> {
    vec![String::new(), "t1".to_string(), "aaa".to_string()]
}
fn default_claim2_n() -> u32 {
    8
}
fn default_escape_radius() -> usize {
    3
}
fn default_escape_n() -> u32 {
    3
}
fn default_vn_radius() -> usize {
    5
}
fn default_delta_radius() -> usize {
    3
}
fn default_delta_samples() -> usize {
    400
}
fn default_qc_radius() -> usize {
    4
}

impl ExperimentConfig {
    pub fn label(&self) -> &'static str {
        match self {
            ExperimentConfig::Distortion { .. } => "distortion",
            ExperimentConfig::Claim1 { .. } => "claim1",
            ExperimentConfig::Claim2 { .. } => "claim2",
            ExperimentConfig::Escape { .. } => "escape",
            ExperimentConfig::Vn { .. } => "vn",
            ExperimentConfig::Delta { .. } => "delta",
            ExperimentConfig::Quasiconvexity { .. } => "quasiconvexity",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Space-separated base generators; declaration order fixes shortlex.
    pub base: String,
    /// Inline presentation text (surface mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub presentation: Option<String>,
    pub y: String,
    pub aut: AutConfig,
    pub edge: EdgeConfig,
    pub caps: CapsConfig,
    pub out_dir: String,
    #[serde(rename = "experiment", skip_serializing_if = "Vec::is_empty")]
    pub experiments: Vec<ExperimentConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let forward = preset::DEFAULT_FORWARD
            .iter()
            .map(|(g, img)| (g.to_string(), img.to_string()))
            .collect();
        let backward = preset::DEFAULT_BACKWARD
            .iter()
            .map(|(g, img)| (g.to_string(), img.to_string()))
            .collect();
        RunConfig {
            mode: Mode::Free,
            seed: 0,
            base: preset::DEFAULT_BASE.to_string(),
            presentation: None,
            y: preset::DEFAULT_Y.to_string(),
            aut: AutConfig { forward, backward },
            edge: EdgeConfig {
                x: preset::DEFAULT_EDGE.to_string(),
                x1: preset::DEFAULT_EDGE.to_string(),
            },
            caps: CapsConfig::default(),
            out_dir: "out".to_string(),
            experiments: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Total parse: TOML syntax, unknown-key rejection, then semantic
    /// validation by constructing the contexts once.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn print(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.build_contexts().map(|_| ())
    }

    /// Constructs the validated mapping torus and amalgam for this config.
    pub fn build_contexts(&self) -> Result<BuiltContexts, ConfigError> {
        if self.caps.ball_radius == 0
            || self.caps.distance_cap == 0
            || self.caps.coset_window == 0
            || self.caps.geodesic_cap == 0
            || self.caps.y_window == 0
        {
            return Err(semantic("caps-positive", "all caps must be positive"));
        }
        let names: Vec<&str> = self.base.split_whitespace().collect();
        if names.is_empty() {
            return Err(semantic("base-empty", "base alphabet must be nonempty"));
        }
        let alphabet = Alphabet::new(names.clone())
            .map_err(|e| semantic("base-alphabet", e.to_string()))?;

        let base = match self.mode {
            Mode::Free => {
                if self.presentation.is_some() {
                    return Err(semantic(
                        "presentation-in-free-mode",
                        "free mode takes no presentation",
                    ));
                }
                BaseGroup::free(alphabet.clone())
            }
            Mode::Surface => {
                let text = self.presentation.as_ref().ok_or_else(|| {
                    semantic("presentation-missing", "surface mode requires a presentation")
                })?;
                let p = Presentation::parse(text)
                    .map_err(|e| semantic("presentation-parse", e.to_string()))?;
                if p.alphabet() != &alphabet {
                    return Err(semantic(
                        "presentation-alphabet",
                        "presentation generators must match the base alphabet",
                    ));
                }
                if !p.piece_report(Ratio::new(1, 6)).satisfies {
                    return Err(semantic(
                        "presentation-not-sixth",
                        "surface presentation must satisfy C'(1/6)",
                    ));
                }
                BaseGroup::surface(p).map_err(|e| semantic("presentation", e.to_string()))?
            }
        };

        let table = |map: &BTreeMap<String, String>, which: &str| -> Result<Vec<_>, ConfigError> {
            let mut images = Vec::new();
            for name in alphabet.names() {
                let img = map.get(name).ok_or_else(|| {
                    semantic(
                        "aut-table-incomplete",
                        format!("missing {which} automorphism image for generator {name:?}"),
                    )
                })?;
                images.push(
                    alphabet
                        .parse_word(img)
                        .map_err(|e| semantic("aut-word", e.to_string()))?,
                );
            }
            for key in map.keys() {
                if alphabet.gen_id(key).is_none() {
                    return Err(semantic(
                        "aut-unknown-generator",
                        format!("{which} table names unknown generator {key:?}"),
                    ));
                }
            }
            Ok(images)
        };
        let forward = table(&self.aut.forward, "forward")?;
        let backward = table(&self.aut.backward, "backward")?;
        let aut = Automorphism::new(&base, forward, backward)
            .map_err(|e| semantic("aut-invalid", e.to_string()))?;
        let torus = MappingTorus::new(base, aut).map_err(|e| semantic("torus", e.to_string()))?;

        let x = alphabet
            .parse_word(&self.edge.x)
            .map_err(|e| semantic("edge-word", e.to_string()))?;
        let x1 = alphabet
            .parse_word(&self.edge.x1)
            .map_err(|e| semantic("edge-word", e.to_string()))?;
        let edge = EdgeSpec::new(x, x1).map_err(|e| semantic("edge", e.to_string()))?;
        edge.check_primitive().map_err(|e| semantic("edge-proper-power", e.to_string()))?;

        let caps = AmalgamCaps {
            coset_window: self.caps.coset_window,
            geodesic_cap: self.caps.geodesic_cap,
        };
        let amalgam = AmalgamContext::new(torus, edge, caps)
            .map_err(|e| semantic("amalgam", e.to_string()))?;

        let y = alphabet
            .parse_word(&self.y)
            .map_err(|e| semantic("y-word", e.to_string()))?;

        for exp in &self.experiments {
            if let ExperimentConfig::Quasiconvexity { subgroup, .. } = exp {
                if !matches!(subgroup.as_str(), "c-in-m" | "h-in-m" | "f-in-g") {
                    return Err(semantic(
                        "quasiconvexity-subgroup",
                        format!("unknown subgroup {subgroup:?}; expected c-in-m, h-in-m, or f-in-g"),
                    ));
                }
            }
        }

        Ok(BuiltContexts { amalgam, y })
    }
}

/// Contexts constructed from a validated config.
pub struct BuiltContexts {
    pub amalgam: AmalgamContext,
    pub y: wordbench_core::words::Word,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.edge.x, "a");
        assert_eq!(c.y, "ab");
        assert_eq!(c.aut.forward.get("c").unwrap(), "ab");
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.experiments.push(ExperimentConfig::Distortion { n_max: 30 });
        c.experiments.push(ExperimentConfig::Vn { g: "t".to_string(), max_radius: 5 });
        let printed = c.print();
        let reparsed = RunConfig::parse(&printed).unwrap();
        assert_eq!(c, reparsed);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(matches!(RunConfig::parse("bogus_key = 1"), Err(ConfigError::Syntax(_))));
        let text = "[edge]\nx = \"a\"\nx1 = \"a\"\nextra = 1\n";
        assert!(RunConfig::parse(text).is_err());
    }

    #[test]
    fn proper_power_edge_rejected() {
        let text = "[edge]\nx = \"aa\"\nx1 = \"a\"\n";
        let err = RunConfig::parse(text).unwrap_err();
        match err {
            ConfigError::Semantic { code, detail } => {
                assert_eq!(code, "edge-proper-power");
                assert!(detail.contains("edge-proper-power"), "{detail}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_backward_table_rejected() {
        let text = r#"
[aut.forward]
a = "b"
b = "c"
c = "ab"
[aut.backward]
a = "cA"
b = "a"
"#;
        let err = RunConfig::parse(text).unwrap_err();
        match err {
            ConfigError::Semantic { code, .. } => assert_eq!(code, "aut-table-incomplete"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn surface_mode_requires_presentation() {
        let err = RunConfig::parse("mode = \"surface\"").unwrap_err();
        match err {
            ConfigError::Semantic { code, .. } => assert_eq!(code, "presentation-missing"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = RunConfig::parse("mode = \n").unwrap_err();
        match err {
            ConfigError::Syntax(msg) => assert!(msg.contains("line"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
