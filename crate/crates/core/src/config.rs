//! TOML pipeline configuration.
//!
//! ```toml
//! [schema]
//! attributes = ["title", "authors", "venue", "year"]
//! long_text = ["title"]
//!
//! [[sources]]
//! path = "DBLP.csv"
//! key_column = "id"
//!
//! [[sources]]
//! path = "ACM.csv"
//! key_column = "id"
//!
//! [[templates]]
//! id = 1
//! parts = [{ kind = "consecutive_words", attr = "title", n = 3 }]
//!
//! [model]
//! a = 2.0
//! b = 0.1
//!
//! [link]
//! rho = 0.1
//! tau = 0.5
//! verifier = "jaccard:0.3"
//!
//! [truth]
//! path = "DBLP-ACM_perfectMapping.csv"
//!
//! [grid]
//! a = [1.5, 3.0]
//! b = [0.01, 0.1]
//! rho = [0.05]
//! tau = [0.3, 0.5, 0.7]
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ParamGrid, Scope};
use crate::linker::VerifierRegistry;
use crate::records::{Encoding, Schema, Source, SourceSpec};
use crate::sigprob::{check_unit_open, ProbabilityModel, DEFAULT_K_CAP};
use crate::synth::SynthParams;
use crate::templates::{ExtractLimits, Guidelines, KeyFormat, SignatureTemplate, TemplateSet};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<SchemaConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<SourceConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub templates: Vec<SignatureTemplate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keys: Option<KeyFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<ParamGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthParams>,
    /// Default output directory when none is given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub attributes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub long_text: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_signature_tokens: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_column: Option<String>,
    /// First internal id of this source. Defaults to 0 for the first source
    /// and to the first source's row count for the second.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_id: Option<u64>,
    /// attribute -> column, for columns named differently from the attribute.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub columns: BTreeMap<String, String>,
    #[serde(default)]
    pub encoding: Encoding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Defaults to true with two sources and false with one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_source_only: Option<bool>,
    /// `none` or `name:argument`, e.g. `jaccard:0.3`.
    pub verifier: String,
    pub skip_elimination: bool,
    pub k_cap: usize,
    pub max_combinations: usize,
    pub random_words_max_tokens: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        let limits = ExtractLimits::default();
        LinkConfig {
            rho: None,
            tau: None,
            cross_source_only: None,
            verifier: "none".into(),
            skip_elimination: false,
            k_cap: DEFAULT_K_CAP,
            max_combinations: limits.max_combinations,
            random_words_max_tokens: limits.random_words_max_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub path: PathBuf,
    /// Defaults to cross-source with two sources and all pairs with one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<Scope>,
}

impl Config {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.resolve_paths(base_dir);
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut self.sources {
            fix(&mut s.path);
        }
        if let Some(t) = &mut self.truth {
            fix(&mut t.path);
        }
        if let Some(o) = &mut self.output {
            fix(o);
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The same configuration with the four tunable parameters replaced.
    pub fn with_params(&self, a: f64, b: f64, rho: f64, tau: f64) -> Config {
        let mut c = self.clone();
        c.model = Some(ModelConfig { a, b });
        c.link.rho = Some(rho);
        c.link.tau = Some(tau);
        c
    }

    /// Validates everything the pipeline needs, without touching any input
    /// file.
    pub fn pipeline(&self) -> Result<PipelineConfig> {
        self.pipeline_with(&VerifierRegistry::default())
    }

    pub fn pipeline_with(&self, registry: &VerifierRegistry) -> Result<PipelineConfig> {
        let mut errors = Vec::new();
        let mut note = |r: Result<()>| {
            if let Err(e) = r {
                match e {
                    Error::ConfigList(list) => errors.extend(list),
                    Error::Config(msg) => errors.push(msg),
                    other => errors.push(other.to_string()),
                }
            }
        };

        let schema_cfg = self.schema.as_ref();
        let schema = match schema_cfg {
            Some(s) => Schema::new(s.attributes.iter().cloned())
                .map_err(|e| note(Err(e)))
                .ok(),
            None => {
                note(Err(Error::Config("missing [schema] section".into())));
                None
            }
        };
        if self.sources.is_empty() || self.sources.len() > 2 {
            note(Err(Error::Config(format!(
                "expected one or two [[sources]], found {}",
                self.sources.len()
            ))));
        }
        let model = match self.model {
            Some(m) => ProbabilityModel::new(m.a, m.b)
                .map_err(|e| note(Err(e)))
                .ok(),
            None => {
                note(Err(Error::Config("missing [model] section".into())));
                None
            }
        };
        let rho = self
            .link
            .rho
            .ok_or_else(|| Error::Config("missing link.rho".into()));
        let tau = self
            .link
            .tau
            .ok_or_else(|| Error::Config("missing link.tau".into()));
        note(
            rho.as_ref()
                .map_err(|e| Error::Config(e.to_string()))
                .and_then(|&r| check_unit_open("link.rho", r)),
        );
        note(
            tau.as_ref()
                .map_err(|e| Error::Config(e.to_string()))
                .and_then(|&t| check_unit_open("link.tau", t)),
        );
        if self.link.k_cap == 0 {
            note(Err(Error::Config("link.k_cap must be at least 1".into())));
        }
        let verifier_ok = registry.build(&self.link.verifier).map(|_| ());
        note(verifier_ok);
        if let Some(grid) = &self.grid {
            for &a in &grid.a {
                note(
                    ProbabilityModel::new(a, 0.5)
                        .map(|_| ())
                        .map_err(|e| Error::Config(format!("grid.a: {e}"))),
                );
            }
            for &b in &grid.b {
                note(
                    ProbabilityModel::new(2.0, b)
                        .map(|_| ())
                        .map_err(|e| Error::Config(format!("grid.b: {e}"))),
                );
            }
            for &r in &grid.rho {
                note(check_unit_open("grid.rho", r));
            }
            for &t in &grid.tau {
                note(check_unit_open("grid.tau", t));
            }
            if grid.cell_count() == 0 {
                note(Err(Error::Config(
                    "every grid axis needs at least one value".into(),
                )));
            }
        }

        let templates = schema.as_ref().and_then(|schema| {
            let guidelines = Guidelines {
                max_signature_tokens: schema_cfg
                    .and_then(|s| s.max_signature_tokens)
                    .unwrap_or(Guidelines::default().max_signature_tokens),
                long_text: schema_cfg.map(|s| s.long_text.clone()).unwrap_or_default(),
            };
            let limits = ExtractLimits {
                max_combinations: self.link.max_combinations,
                random_words_max_tokens: self.link.random_words_max_tokens,
            };
            TemplateSet::new(
                &self.templates,
                schema,
                &guidelines,
                limits,
                self.keys.unwrap_or_default(),
            )
            .map_err(|e| note(Err(e)))
            .ok()
        });

        if !errors.is_empty() {
            return Err(Error::ConfigList(errors));
        }
        let (schema, model, templates) = (schema.unwrap(), model.unwrap(), templates.unwrap());
        let two_sources = self.sources.len() == 2;
        let sources = self
            .sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let tag = match (two_sources, i) {
                    (false, _) => Source::Single,
                    (true, 0) => Source::A,
                    (true, _) => Source::B,
                };
                let mut spec = SourceSpec::new(tag, s.base_id.unwrap_or(0));
                spec.key_column = s.key_column.clone();
                spec.columns = s.columns.clone();
                spec.encoding = s.encoding;
                SourceInput {
                    path: s.path.clone(),
                    spec,
                    base_configured: s.base_id.is_some(),
                }
            })
            .collect();
        let scope = self
            .truth
            .as_ref()
            .and_then(|t| t.scope)
            .unwrap_or(if two_sources {
                Scope::CrossSource
            } else {
                Scope::AllPairs
            });

        Ok(PipelineConfig {
            schema,
            sources,
            templates,
            params: LinkParams {
                a: model.a(),
                b: model.b(),
                rho: rho.unwrap(),
                tau: tau.unwrap(),
                k_cap: self.link.k_cap,
                cross_source_only: self.link.cross_source_only.unwrap_or(two_sources),
                skip_elimination: self.link.skip_elimination,
            },
            verifier: self.link.verifier.clone(),
            truth: self.truth.as_ref().map(|t| t.path.clone()),
            scope,
            grid: self.grid.clone(),
        })
    }
}

/// One input file with its resolved loading rules.
#[derive(Debug, Clone)]
pub struct SourceInput {
    pub path: PathBuf,
    pub spec: SourceSpec,
    pub base_configured: bool,
}

/// The parameters that vary between runs of the same data.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub tau: f64,
    pub k_cap: usize,
    pub cross_source_only: bool,
    pub skip_elimination: bool,
}

impl LinkParams {
    pub fn model(&self) -> Result<ProbabilityModel> {
        ProbabilityModel::new(self.a, self.b)
    }
}

/// A validated configuration, ready to drive the pipeline.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub schema: Schema,
    pub sources: Vec<SourceInput>,
    pub templates: TemplateSet,
    pub params: LinkParams,
    pub verifier: String,
    pub truth: Option<PathBuf>,
    pub scope: Scope,
    pub grid: Option<ParamGrid>,
}
