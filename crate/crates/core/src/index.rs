//! Inverted index over candidate signatures.
//!
//! Each surviving key carries its sorted posting list and the signature
//! probability of its recurrence. Keys recurring in more records than the
//! probability threshold allows are dropped during the group-by, before any
//! probability is computed.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::records::{Record, RecordId};
use crate::sigprob::ProbabilityModel;
use crate::templates::{KeyFormat, TemplateId, TemplateSet};

const CHUNK: usize = 2048;

/// True when `s` can be obtained from `t` by deleting elements without
/// reordering the rest.
pub fn subrecord_of<S, T>(s: &[S], t: &[T]) -> bool
where
    S: PartialEq<T>,
{
    let mut rest = t.iter();
    s.iter().all(|x| rest.any(|y| x == y))
}

/// Key-to-records grouping with no pruning applied.
#[derive(Debug, Clone, Default)]
pub struct Postings {
    keys: Vec<String>,
    lists: Vec<Vec<RecordId>>,
    /// Record-template pairs dropped for exceeding a yield limit.
    pub skipped_extractions: usize,
    format: KeyFormat,
    families: BTreeMap<TemplateId, u32>,
}

impl Postings {
    /// Extracts every record's keys and groups them, in parallel over record
    /// chunks. Keys come out sorted; each posting list is sorted.
    pub fn collect(records: &[Record], templates: &TemplateSet) -> Self {
        let (grouped, skipped) = records
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut local: HashMap<String, Vec<RecordId>> = HashMap::new();
                let mut skipped = 0;
                for record in chunk {
                    let extracted = templates.extract(record);
                    skipped += extracted.skipped;
                    for key in extracted.keys {
                        local.entry(key).or_default().push(record.id);
                    }
                }
                (local, skipped)
            })
            .reduce(
                || (HashMap::new(), 0),
                |(mut big, s1), (mut small, s2)| {
                    if big.len() < small.len() {
                        std::mem::swap(&mut big, &mut small);
                    }
                    for (key, ids) in small {
                        big.entry(key).or_default().extend(ids);
                    }
                    (big, s1 + s2)
                },
            );

        let mut pairs: Vec<(String, Vec<RecordId>)> = grouped.into_iter().collect();
        pairs.par_sort_unstable_by(|x, y| x.0.cmp(&y.0));
        let (keys, mut lists): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        lists.par_iter_mut().for_each(|ids: &mut Vec<RecordId>| {
            ids.sort_unstable();
            ids.dedup();
        });
        Postings {
            keys,
            lists,
            skipped_extractions: skipped,
            format: templates.format,
            families: templates.families().clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Record-key pairs across all lists.
    pub fn incidences(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[RecordId])> {
        self.keys
            .iter()
            .map(String::as_str)
            .zip(self.lists.iter().map(Vec::as_slice))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub key: String,
    pub postings: Vec<RecordId>,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IndexStats {
    /// Distinct keys extracted before pruning.
    pub total_keys_seen: usize,
    pub keys_pruned_by_rho: usize,
    /// Longest posting list among surviving entries.
    pub max_posting_len: usize,
    pub skipped_extractions: usize,
}

#[derive(Debug, Clone)]
pub struct InvertedIndex {
    entries: Vec<IndexEntry>,
    stats: IndexStats,
    max_recurrence: usize,
    format: KeyFormat,
    families: BTreeMap<TemplateId, u32>,
}

impl InvertedIndex {
    /// Builds the index over deduplicated records, keeping only keys whose
    /// signature probability exceeds `rho`.
    pub fn build(
        records: &[Record],
        templates: &TemplateSet,
        model: &ProbabilityModel,
        rho: f64,
        k_cap: usize,
    ) -> Result<Self> {
        Self::from_postings(&Postings::collect(records, templates), model, rho, k_cap)
    }

    /// Prunes already-grouped postings. Lets several `(a, b, ρ)` settings share
    /// one extraction pass.
    pub fn from_postings(
        postings: &Postings,
        model: &ProbabilityModel,
        rho: f64,
        k_cap: usize,
    ) -> Result<Self> {
        let max_recurrence = model.max_recurrence(rho, k_cap)?;
        let entries: Vec<IndexEntry> = postings
            .iter()
            .filter(|(_, ids)| ids.len() <= max_recurrence)
            .map(|(key, ids)| IndexEntry {
                key: key.to_string(),
                postings: ids.to_vec(),
                p: model.signature_probability(ids.len()),
            })
            .collect();
        let stats = IndexStats {
            total_keys_seen: postings.len(),
            keys_pruned_by_rho: postings.len() - entries.len(),
            max_posting_len: entries.iter().map(|e| e.postings.len()).max().unwrap_or(0),
            skipped_extractions: postings.skipped_extractions,
        };
        Ok(InvertedIndex {
            entries,
            stats,
            max_recurrence,
            format: postings.format,
            families: postings.families.clone(),
        })
    }

    /// Entries sorted by key.
    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&IndexEntry> {
        self.entries
            .binary_search_by(|e| e.key.as_str().cmp(key))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stats(&self) -> IndexStats {
        self.stats
    }

    /// Largest posting length the threshold admits.
    pub fn max_recurrence(&self) -> usize {
        self.max_recurrence
    }

    pub fn key_format(&self) -> KeyFormat {
        self.format
    }

    pub fn families(&self) -> &BTreeMap<TemplateId, u32> {
        &self.families
    }

    pub fn family_of(&self, template: TemplateId) -> Option<u32> {
        self.families.get(&template).copied()
    }

    /// Writes `key<TAB>p<TAB>id,id,…`, one line per entry, ordered by key.
    pub fn dump<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for e in &self.entries {
            write!(out, "{}\t{}\t", e.key, e.p)?;
            for (i, id) in e.postings.iter().enumerate() {
                if i > 0 {
                    out.write_all(b",")?;
                }
                write!(out, "{id}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
