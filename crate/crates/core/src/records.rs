//! Record ingestion: CSV loading, word tokenization and exact deduplication.
//!
//! A record is an ordered list of attribute values, each value a sequence of
//! lowercase alphanumeric tokens. Attribute order follows the [`Schema`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lowercase word with no delimiter characters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(String);

impl Token {
    /// Returns `None` for empty text or text containing a non-alphanumeric
    /// character.
    pub fn new(text: &str) -> Option<Self> {
        if text.is_empty() || !text.chars().all(char::is_alphanumeric) {
            return None;
        }
        Some(Token(text.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Lowercases `raw` and splits it on every maximal run of non-alphanumeric
/// characters. Digit runs are ordinary tokens.
pub fn tokenize(raw: &str) -> Vec<Token> {
    let lowered = raw.to_lowercase();
    lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty())
        .map(|piece| Token(piece.to_string()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordId(pub u64);

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Which input a record came from. Single-dataset deduplication uses
/// `Single`; two-dataset linkage uses `A` and `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    Single,
    A,
    B,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Single => "single",
            Source::A => "A",
            Source::B => "B",
        })
    }
}

/// Ordered attribute names shared by every record of a load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    attributes: Vec<String>,
}

impl Schema {
    pub fn new<I, S>(attributes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let attributes: Vec<String> = attributes.into_iter().map(Into::into).collect();
        if attributes.is_empty() {
            return Err(Error::Config("schema has no attributes".into()));
        }
        for (i, name) in attributes.iter().enumerate() {
            if attributes[..i].contains(name) {
                return Err(Error::Config(format!("schema repeats attribute `{name}`")));
            }
        }
        Ok(Schema { attributes })
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == name)
    }

    pub fn names(&self) -> &[String] {
        &self.attributes
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: RecordId,
    pub source: Source,
    /// Value of the source's native key column, used to resolve ground truth.
    pub native_key: Option<String>,
    /// One token sequence per schema attribute, in schema order. Missing
    /// values are empty sequences.
    pub values: Vec<Vec<Token>>,
}

impl Record {
    pub fn new(id: u64, source: Source, values: Vec<Vec<Token>>) -> Self {
        Record {
            id: RecordId(id),
            source,
            native_key: None,
            values,
        }
    }

    /// Builds a record by tokenizing one raw string per attribute.
    pub fn from_raw(id: u64, source: Source, raw: &[&str]) -> Self {
        Record::new(id, source, raw.iter().map(|v| tokenize(v)).collect())
    }

    pub fn attribute(&self, index: usize) -> &[Token] {
        self.values.get(index).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every token of the record, across all attributes.
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.values.iter().flatten()
    }

    /// Token content with attribute boundaries, independent of id and source.
    pub fn normalized_key(&self) -> String {
        let mut out = String::new();
        for (i, value) in self.values.iter().enumerate() {
            if i > 0 {
                out.push('\u{1f}');
            }
            for (j, token) in value.iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                out.push_str(token.as_str());
            }
        }
        out
    }
}

/// Character encoding of an input CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Encoding {
    #[default]
    #[serde(rename = "utf-8", alias = "utf8")]
    Utf8,
    #[serde(rename = "latin-1", alias = "latin1", alias = "iso-8859-1")]
    Latin1,
}

impl Encoding {
    fn decode(self, bytes: &[u8]) -> String {
        match self {
            Encoding::Utf8 => String::from_utf8_lossy(bytes).into_owned(),
            Encoding::Latin1 => bytes.iter().map(|&b| b as char).collect(),
        }
    }
}

/// How one CSV file maps onto the schema.
#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub source: Source,
    /// Id given to the first data row; later rows count up from here.
    pub base_id: u64,
    /// Column holding the native record key (for ground truth).
    pub key_column: Option<String>,
    /// attribute name -> column name, for attributes whose column is named
    /// differently.
    pub columns: BTreeMap<String, String>,
    pub encoding: Encoding,
}

impl SourceSpec {
    pub fn new(source: Source, base_id: u64) -> Self {
        SourceSpec {
            source,
            base_id,
            key_column: None,
            columns: BTreeMap::new(),
            encoding: Encoding::Utf8,
        }
    }

    fn column_for<'a>(&'a self, attribute: &'a str) -> &'a str {
        self.columns
            .get(attribute)
            .map(String::as_str)
            .unwrap_or(attribute)
    }
}

/// Loads one record per data row of a headed CSV file.
pub fn load_csv(path: &Path, schema: &Schema, spec: &SourceSpec) -> Result<Vec<Record>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };

    let header: Vec<String> = reader
        .byte_headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| spec.encoding.decode(h).trim().to_string())
        .collect();
    let find = |column: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: column.to_string(),
            })
    };
    let columns = schema
        .names()
        .iter()
        .map(|attr| find(spec.column_for(attr)))
        .collect::<Result<Vec<_>>>()?;
    let key_column = spec.key_column.as_deref().map(find).transpose()?;

    let mut records = Vec::new();
    let mut row = csv::ByteRecord::new();
    let mut next_id = spec.base_id;
    while reader.read_byte_record(&mut row).map_err(csv_err)? {
        if row.len() != header.len() {
            return Err(Error::Row {
                path: path.to_path_buf(),
                line: row.position().map_or(0, |p| p.line()),
                expected: header.len(),
                found: row.len(),
            });
        }
        let values = columns
            .iter()
            .map(|&c| tokenize(&spec.encoding.decode(&row[c])))
            .collect();
        records.push(Record {
            id: RecordId(next_id),
            source: spec.source,
            native_key: key_column.map(|c| spec.encoding.decode(&row[c]).trim().to_string()),
            values,
        });
        next_id += 1;
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedupResult {
    /// One record per equality class, the one with the smallest id, sorted by
    /// id.
    pub canonical: Vec<Record>,
    /// Every input id mapped to the id of its canonical record.
    pub alias_map: BTreeMap<RecordId, RecordId>,
}

/// Collapses records with identical token content (attribute boundaries
/// included, source ignored) onto the smallest id of each class.
pub fn deduplicate(records: &[Record]) -> DedupResult {
    let keys: Vec<String> = records.par_iter().map(Record::normalized_key).collect();

    let mut class_min: HashMap<&str, RecordId> = HashMap::with_capacity(records.len());
    for (record, key) in records.iter().zip(&keys) {
        class_min
            .entry(key.as_str())
            .and_modify(|min| *min = (*min).min(record.id))
            .or_insert(record.id);
    }

    let mut canonical = Vec::with_capacity(class_min.len());
    let mut alias_map = BTreeMap::new();
    for (record, key) in records.iter().zip(&keys) {
        let target = class_min[key.as_str()];
        alias_map.insert(record.id, target);
        if target == record.id {
            canonical.push(record.clone());
        }
    }
    canonical.sort_by_key(|r| r.id);
    DedupResult {
        canonical,
        alias_map,
    }
}

/// Records sorted by id with lookup by id.
#[derive(Debug, Clone, Default)]
pub struct RecordSet {
    records: Vec<Record>,
}

impl RecordSet {
    pub fn new(mut records: Vec<Record>) -> Self {
        records.sort_by_key(|r| r.id);
        RecordSet { records }
    }

    pub fn get(&self, id: RecordId) -> Option<&Record> {
        self.records
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn source_of(&self, id: RecordId) -> Option<Source> {
        self.get(id).map(|r| r.source)
    }

    pub fn as_slice(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = RecordId> + '_ {
        self.records.iter().map(|r| r.id)
    }
}
