//! Candidate-signature templates.
//!
//! A template is an ordered list of extractors. Each extractor reads one
//! attribute and yields a set of token sequences ("part values"); the
//! template's keys are the Cartesian product of its parts, encoded as
//! `<template_id>◦<part>◦<part>…` with `·` joining tokens inside a part.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{Record, Schema, Token};

pub type TemplateId = u32;

pub const DEFAULT_PART_SEPARATOR: char = '\u{25e6}';
pub const DEFAULT_TOKEN_SEPARATOR: char = '\u{b7}';

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Extractor {
    /// Every window of `n` adjacent words, order preserved.
    #[serde(alias = "consecutive")]
    ConsecutiveWords { attr: String, n: usize },
    /// Every unordered `k`-combination of words, sorted inside the part.
    #[serde(alias = "random")]
    RandomWords { attr: String, k: usize },
    /// The whole attribute value.
    #[serde(alias = "full")]
    FullAttribute { attr: String },
    /// The last `d` digits of the attribute's concatenated digit tokens.
    LastDigits { attr: String, d: usize },
}

impl Extractor {
    pub fn attr(&self) -> &str {
        match self {
            Extractor::ConsecutiveWords { attr, .. }
            | Extractor::RandomWords { attr, .. }
            | Extractor::FullAttribute { attr }
            | Extractor::LastDigits { attr, .. } => attr,
        }
    }

    /// Fewest tokens a single yielded part value can have.
    fn min_tokens(&self) -> usize {
        match self {
            Extractor::ConsecutiveWords { n, .. } => *n,
            Extractor::RandomWords { k, .. } => *k,
            Extractor::FullAttribute { .. } | Extractor::LastDigits { .. } => 1,
        }
    }

    fn width(&self) -> Option<usize> {
        match self {
            Extractor::ConsecutiveWords { n, .. } => Some(*n),
            Extractor::RandomWords { k, .. } => Some(*k),
            Extractor::LastDigits { d, .. } => Some(*d),
            Extractor::FullAttribute { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignatureTemplate {
    pub id: TemplateId,
    /// Templates sharing a family have comparable keys: evidence from one can
    /// be eliminated by a superrecord from another. Defaults to `id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<u32>,
    pub parts: Vec<Extractor>,
}

impl SignatureTemplate {
    pub fn new(id: TemplateId, parts: Vec<Extractor>) -> Self {
        SignatureTemplate {
            id,
            family: None,
            parts,
        }
    }

    pub fn with_family(mut self, family: u32) -> Self {
        self.family = Some(family);
        self
    }

    pub fn family(&self) -> u32 {
        self.family.unwrap_or(self.id)
    }
}

/// Separator characters of the key wire format. Both must be
/// non-alphanumeric so they can never occur inside a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyFormat {
    pub part_separator: char,
    pub token_separator: char,
}

impl Default for KeyFormat {
    fn default() -> Self {
        KeyFormat {
            part_separator: DEFAULT_PART_SEPARATOR,
            token_separator: DEFAULT_TOKEN_SEPARATOR,
        }
    }
}

impl KeyFormat {
    fn check(&self) -> Result<()> {
        let (p, t) = (self.part_separator, self.token_separator);
        if p.is_alphanumeric() || t.is_alphanumeric() || p == t {
            return Err(Error::Config(format!(
                "key separators must be distinct non-alphanumeric characters, got {p:?} and {t:?}"
            )));
        }
        Ok(())
    }

    pub fn parse<'k>(&self, key: &'k str) -> Option<ParsedKey<'k>> {
        let mut pieces = key.split(self.part_separator);
        let template = pieces.next()?.parse().ok()?;
        let parts: Vec<Vec<&str>> = pieces
            .map(|p| p.split(self.token_separator).collect())
            .collect();
        if parts.is_empty() || parts.iter().flatten().any(|t| t.is_empty()) {
            return None;
        }
        Some(ParsedKey { template, parts })
    }
}

/// A decoded candidate-signature key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedKey<'k> {
    pub template: TemplateId,
    pub parts: Vec<Vec<&'k str>>,
}

/// Per record-template yield limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractLimits {
    /// A record-template pair producing more keys than this is skipped.
    pub max_combinations: usize,
    /// `RandomWords` parts over attributes longer than this yield nothing.
    pub random_words_max_tokens: usize,
}

impl Default for ExtractLimits {
    fn default() -> Self {
        ExtractLimits {
            max_combinations: 64,
            random_words_max_tokens: 12,
        }
    }
}

/// Thresholds for the template-design warnings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Guidelines {
    /// Warn when a template's shortest possible key has more tokens than this.
    pub max_signature_tokens: usize,
    /// Attributes holding free text, where single words are weak evidence.
    pub long_text: Vec<String>,
}

impl Default for Guidelines {
    fn default() -> Self {
        Guidelines {
            max_signature_tokens: 6,
            long_text: Vec::new(),
        }
    }
}

/// Checks templates against the schema. Returns the guideline warnings on
/// success and every error found otherwise.
pub fn validate_config(
    templates: &[SignatureTemplate],
    schema: &Schema,
    guidelines: &Guidelines,
) -> Result<Vec<String>> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    if templates.is_empty() {
        errors.push("no templates configured".to_string());
    }

    let mut seen = BTreeSet::new();
    let mut families: BTreeMap<u32, &SignatureTemplate> = BTreeMap::new();
    for t in templates {
        if !seen.insert(t.id) {
            errors.push(format!("template id {} is used more than once", t.id));
        }
        if t.parts.is_empty() {
            errors.push(format!("template {} has no parts", t.id));
            continue;
        }
        for part in &t.parts {
            if schema.index_of(part.attr()).is_none() {
                errors.push(format!(
                    "template {} references unknown attribute `{}`",
                    t.id,
                    part.attr()
                ));
            }
            if part.width() == Some(0) {
                errors.push(format!(
                    "template {} has a zero-width part on `{}`",
                    t.id,
                    part.attr()
                ));
            }
        }
        match families.get(&t.family()) {
            Some(first) => {
                let same_shape = first.parts.len() == t.parts.len()
                    && first
                        .parts
                        .iter()
                        .zip(&t.parts)
                        .all(|(x, y)| x.attr() == y.attr());
                if !same_shape {
                    errors.push(format!(
                        "templates {} and {} share family {} but read different attributes",
                        first.id,
                        t.id,
                        t.family()
                    ));
                }
            }
            None => {
                families.insert(t.family(), t);
            }
        }

        let min_tokens: usize = t.parts.iter().map(Extractor::min_tokens).sum();
        if min_tokens > guidelines.max_signature_tokens {
            warnings.push(format!(
                "template {}: keys have at least {min_tokens} tokens (guideline: at most {}); long keys rarely recur",
                t.id, guidelines.max_signature_tokens
            ));
        }
        if let [single] = t.parts.as_slice() {
            if single.min_tokens() == 1
                && single.width().is_some()
                && !matches!(single, Extractor::LastDigits { .. })
                && guidelines.long_text.iter().any(|a| a == single.attr())
            {
                warnings.push(format!(
                    "template {}: single words of long-text attribute `{}` are weakly distinctive",
                    t.id,
                    single.attr()
                ));
            }
        }
    }

    if errors.is_empty() {
        Ok(warnings)
    } else {
        Err(Error::ConfigList(errors))
    }
}

#[derive(Debug, Clone)]
struct CompiledPart {
    extractor: Extractor,
    attr: usize,
}

#[derive(Debug, Clone)]
pub struct CompiledTemplate {
    pub id: TemplateId,
    pub family: u32,
    parts: Vec<CompiledPart>,
}

impl CompiledTemplate {
    /// Keys for one record, sorted and deduplicated. `None` means the record
    /// exceeded a yield limit for this template.
    pub fn extract(
        &self,
        record: &Record,
        limits: &ExtractLimits,
        format: &KeyFormat,
    ) -> Option<Vec<String>> {
        let mut yields = Vec::with_capacity(self.parts.len());
        let mut combinations = 1usize;
        for part in &self.parts {
            let values = part_values(&part.extractor, record.attribute(part.attr), limits, format)?;
            if values.is_empty() {
                return Some(Vec::new());
            }
            combinations = combinations.saturating_mul(values.len());
            yields.push(values);
        }
        if combinations > limits.max_combinations {
            return None;
        }

        let mut keys = vec![self.id.to_string()];
        for values in &yields {
            let mut next = Vec::with_capacity(keys.len() * values.len());
            for prefix in &keys {
                for value in values {
                    let mut key = String::with_capacity(prefix.len() + value.len() + 3);
                    key.push_str(prefix);
                    key.push(format.part_separator);
                    key.push_str(value);
                    next.push(key);
                }
            }
            keys = next;
        }
        keys.sort_unstable();
        keys.dedup();
        Some(keys)
    }
}

fn join(tokens: &[&Token], sep: char) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(sep);
        }
        out.push_str(t.as_str());
    }
    out
}

/// Sorted, deduplicated encoded values of one part. `None` when the part is
/// over a limit.
fn part_values(
    extractor: &Extractor,
    tokens: &[Token],
    limits: &ExtractLimits,
    format: &KeyFormat,
) -> Option<Vec<String>> {
    let sep = format.token_separator;
    let mut values: Vec<String> = match extractor {
        Extractor::ConsecutiveWords { n, .. } => {
            if tokens.len() < *n {
                return Some(Vec::new());
            }
            tokens
                .windows(*n)
                .map(|w| join(&w.iter().collect::<Vec<_>>(), sep))
                .collect()
        }
        Extractor::RandomWords { k, .. } => {
            if tokens.len() > limits.random_words_max_tokens {
                return None;
            }
            let mut out = Vec::new();
            for_each_combination(tokens.len(), *k, |positions| {
                let mut chosen: Vec<&Token> = positions.iter().map(|&i| &tokens[i]).collect();
                chosen.sort();
                out.push(join(&chosen, sep));
            });
            out
        }
        Extractor::FullAttribute { .. } => {
            if tokens.is_empty() {
                Vec::new()
            } else {
                vec![join(&tokens.iter().collect::<Vec<_>>(), sep)]
            }
        }
        Extractor::LastDigits { d, .. } => {
            let digits: String = tokens
                .iter()
                .filter(|t| t.as_str().bytes().all(|b| b.is_ascii_digit()))
                .map(Token::as_str)
                .collect();
            if digits.len() < *d {
                Vec::new()
            } else {
                vec![digits[digits.len() - d..].to_string()]
            }
        }
    };
    values.sort_unstable();
    values.dedup();
    Some(values)
}

/// Calls `f` with every increasing `k`-subset of `0..n`, in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k == 0 || k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Validated templates bound to a schema, ready for extraction.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: Vec<CompiledTemplate>,
    families: BTreeMap<TemplateId, u32>,
    pub limits: ExtractLimits,
    pub format: KeyFormat,
    warnings: Vec<String>,
}

/// Keys of one record across all templates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordKeys {
    pub keys: Vec<String>,
    /// Record-template pairs dropped for exceeding a yield limit.
    pub skipped: usize,
}

impl TemplateSet {
    pub fn new(
        templates: &[SignatureTemplate],
        schema: &Schema,
        guidelines: &Guidelines,
        limits: ExtractLimits,
        format: KeyFormat,
    ) -> Result<Self> {
        format.check()?;
        if limits.max_combinations == 0 {
            return Err(Error::Config("max_combinations must be at least 1".into()));
        }
        let warnings = validate_config(templates, schema, guidelines)?;
        let compiled = templates
            .iter()
            .map(|t| CompiledTemplate {
                id: t.id,
                family: t.family(),
                parts: t
                    .parts
                    .iter()
                    .map(|p| CompiledPart {
                        extractor: p.clone(),
                        attr: schema.index_of(p.attr()).expect("validated attribute"),
                    })
                    .collect(),
            })
            .collect();
        Ok(TemplateSet {
            templates: compiled,
            families: templates.iter().map(|t| (t.id, t.family())).collect(),
            limits,
            format,
            warnings,
        })
    }

    /// Default limits, key format and guidelines.
    pub fn with_defaults(templates: &[SignatureTemplate], schema: &Schema) -> Result<Self> {
        Self::new(
            templates,
            schema,
            &Guidelines::default(),
            ExtractLimits::default(),
            KeyFormat::default(),
        )
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn templates(&self) -> &[CompiledTemplate] {
        &self.templates
    }

    pub fn families(&self) -> &BTreeMap<TemplateId, u32> {
        &self.families
    }

    pub fn family_of(&self, template: TemplateId) -> Option<u32> {
        self.families.get(&template).copied()
    }

    pub fn extract(&self, record: &Record) -> RecordKeys {
        let mut out = RecordKeys::default();
        for t in &self.templates {
            match t.extract(record, &self.limits, &self.format) {
                Some(keys) => out.keys.extend(keys),
                None => out.skipped += 1,
            }
        }
        out.keys.sort_unstable();
        out.keys.dedup();
        out
    }
}
