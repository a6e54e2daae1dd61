//! Pairwise linkage from shared candidate signatures.
//!
//! Every index entry contributes one piece of evidence `(r_i, r_j, s, p_s)`
//! per record pair in its posting list. Evidence for a pair is reduced to its
//! superrecord-maximal keys, combined as `1 − ∏(1 − p_s)` and thresholded at
//! `τ`; an optional post-verifier gets the last word.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::{subrecord_of, InvertedIndex};
use crate::records::{Record, RecordId, RecordSet};
use crate::sigprob::check_unit_open;
use crate::templates::{KeyFormat, ParsedKey, TemplateId};

/// One piece of pair evidence. `r_i < r_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTuple<'a> {
    pub r_i: RecordId,
    pub r_j: RecordId,
    pub key: &'a str,
    pub p: f64,
}

/// A record pair with its combined signature probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub r_i: RecordId,
    pub r_j: RecordId,
    pub probability: f64,
    /// Evidence tuples left after elimination.
    pub evidence_count: usize,
}

/// Evidence for every pair sharing at least one indexed key. Within a pair,
/// tuples are ordered by key; pairs are ordered by `(r_i, r_j)`.
pub fn generate<'a>(
    index: &'a InvertedIndex,
    cross_source: Option<&RecordSet>,
) -> Vec<LinkTuple<'a>> {
    let mut tuples: Vec<LinkTuple<'a>> = index
        .entries()
        .par_iter()
        .flat_map_iter(|entry| {
            let ids = &entry.postings;
            let mut out = Vec::new();
            for (x, &r_i) in ids.iter().enumerate() {
                for &r_j in &ids[x + 1..] {
                    if let Some(records) = cross_source {
                        if records.source_of(r_i) == records.source_of(r_j) {
                            continue;
                        }
                    }
                    out.push(LinkTuple {
                        r_i,
                        r_j,
                        key: entry.key.as_str(),
                        p: entry.p,
                    });
                }
            }
            out
        })
        .collect();
    // Stable: entries are visited in key order, so keys stay sorted per pair.
    tuples.par_sort_by_key(|t| (t.r_i, t.r_j));
    tuples
}

/// Decides superrecord domination between keys of one pair's evidence.
#[derive(Debug, Clone)]
pub struct Eliminator {
    format: KeyFormat,
    families: BTreeMap<TemplateId, u32>,
}

impl Eliminator {
    pub fn new(index: &InvertedIndex) -> Self {
        Self::with_families(index.key_format(), index.families().clone())
    }

    /// Eliminator where every template is its own family.
    pub fn per_template(format: KeyFormat) -> Self {
        Self::with_families(format, BTreeMap::new())
    }

    /// Templates missing from `families` form their own family.
    pub fn with_families(format: KeyFormat, families: BTreeMap<TemplateId, u32>) -> Self {
        Eliminator { format, families }
    }

    fn family(&self, key: &ParsedKey<'_>) -> u32 {
        self.families
            .get(&key.template)
            .copied()
            .unwrap_or(key.template)
    }

    #[cfg(test)]
    fn dominated(&self, small: (&str, &ParsedKey<'_>), big: (&str, &ParsedKey<'_>)) -> bool {
        let (s_key, s) = small;
        let (b_key, b) = big;
        if s_key == b_key || self.family(s) != self.family(b) || s.parts.len() != b.parts.len() {
            return false;
        }
        let mut equal = true;
        for (sp, bp) in s.parts.iter().zip(&b.parts) {
            if !subrecord_of(sp, bp) {
                return false;
            }
            equal &= sp == bp;
        }
        !equal || b_key < s_key
    }

    /// Drops every tuple whose key is a subrecord of another tuple's key.
    /// All tuples must belong to the same pair.
    ///
    /// Keys are bucketed by family and per-part token counts. Within a
    /// bucket only identical content can dominate; across buckets only a
    /// bucket whose counts are pointwise no larger can be dominated.
    pub fn eliminate<'a>(&self, tuples: &[LinkTuple<'a>]) -> Vec<LinkTuple<'a>> {
        if tuples.len() < 2 {
            return tuples.to_vec();
        }
        let parsed: Vec<Option<ParsedKey<'_>>> =
            tuples.iter().map(|t| self.format.parse(t.key)).collect();
        let mut buckets: HashMap<(u32, Vec<usize>), Vec<usize>> = HashMap::new();
        for (x, key) in parsed.iter().enumerate() {
            if let Some(key) = key {
                let lens = key.parts.iter().map(Vec::len).collect();
                buckets.entry((self.family(key), lens)).or_default().push(x);
            }
        }
        let mut dropped = vec![false; tuples.len()];
        let buckets: Vec<_> = buckets.into_iter().collect();
        for ((_, _), members) in &buckets {
            if members.len() < 2 {
                continue;
            }
            let mut by_content: HashMap<&[Vec<&str>], usize> = HashMap::new();
            for &x in members {
                let content = parsed[x].as_ref().unwrap().parts.as_slice();
                match by_content.get_mut(content) {
                    Some(keep) if tuples[x].key < tuples[*keep].key => {
                        dropped[*keep] = true;
                        *keep = x;
                    }
                    Some(_) => dropped[x] = true,
                    None => {
                        by_content.insert(content, x);
                    }
                }
            }
        }
        for ((fs, ls), small) in &buckets {
            for ((fb, lb), big) in &buckets {
                let fits = fs == fb
                    && ls.len() == lb.len()
                    && ls != lb
                    && ls.iter().zip(lb).all(|(s, b)| s <= b);
                if !fits {
                    continue;
                }
                for &x in small {
                    if dropped[x] {
                        continue;
                    }
                    let s = parsed[x].as_ref().unwrap();
                    dropped[x] = big.iter().any(|&y| {
                        let b = parsed[y].as_ref().unwrap();
                        s.parts
                            .iter()
                            .zip(&b.parts)
                            .all(|(sp, bp)| subrecord_of(sp, bp))
                    });
                }
            }
        }
        tuples
            .iter()
            .zip(dropped)
            .filter(|(_, d)| !d)
            .map(|(t, _)| *t)
            .collect()
    }

    /// Quadratic reference for `eliminate`.
    #[cfg(test)]
    fn eliminate_naive<'a>(&self, tuples: &[LinkTuple<'a>]) -> Vec<LinkTuple<'a>> {
        let parsed: Vec<Option<ParsedKey<'_>>> =
            tuples.iter().map(|t| self.format.parse(t.key)).collect();
        tuples
            .iter()
            .enumerate()
            .filter(|&(x, t)| {
                let Some(small) = &parsed[x] else {
                    return true;
                };
                !tuples.iter().enumerate().any(|(y, u)| {
                    x != y
                        && parsed[y]
                            .as_ref()
                            .is_some_and(|big| self.dominated((t.key, small), (u.key, big)))
                })
            })
            .map(|(_, t)| *t)
            .collect()
    }
}

/// `1 − ∏(1 − p)`, in iteration order.
pub fn combine(ps: impl IntoIterator<Item = f64>) -> f64 {
    1.0 - ps.into_iter().fold(1.0, |acc, p| acc * (1.0 - p))
}

/// Combined probability for every pair with evidence, before thresholding.
pub fn score_pairs(
    index: &InvertedIndex,
    cross_source: Option<&RecordSet>,
    skip_elimination: bool,
) -> Vec<Link> {
    let tuples = generate(index, cross_source);
    let eliminator = Eliminator::new(index);
    let mut starts = Vec::new();
    for (x, t) in tuples.iter().enumerate() {
        if x == 0 || (tuples[x - 1].r_i, tuples[x - 1].r_j) != (t.r_i, t.r_j) {
            starts.push(x);
        }
    }
    starts.push(tuples.len());
    starts
        .par_windows(2)
        .map(|w| {
            let group = &tuples[w[0]..w[1]];
            let kept = if skip_elimination {
                group.to_vec()
            } else {
                eliminator.eliminate(group)
            };
            Link {
                r_i: group[0].r_i,
                r_j: group[0].r_j,
                probability: combine(kept.iter().map(|t| t.p)),
                evidence_count: kept.len(),
            }
        })
        .collect()
}

/// Extra acceptance test applied to pairs that pass `τ`.
pub trait PostVerifier: Send + Sync {
    fn name(&self) -> &str;
    fn accept(&self, a: &Record, b: &Record) -> bool;
}

/// Jaccard similarity of the two records' token sets, all attributes pooled.
/// Two empty records count as identical.
pub fn jaccard(a: &Record, b: &Record) -> f64 {
    let mut left: Vec<&str> = a.tokens().map(|t| t.as_str()).collect();
    let mut right: Vec<&str> = b.tokens().map(|t| t.as_str()).collect();
    left.sort_unstable();
    left.dedup();
    right.sort_unstable();
    right.dedup();
    let (mut x, mut y, mut common) = (0, 0, 0usize);
    while x < left.len() && y < right.len() {
        match left[x].cmp(right[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                x += 1;
                y += 1;
            }
        }
    }
    let union = left.len() + right.len() - common;
    if union == 0 {
        1.0
    } else {
        common as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JaccardVerifier {
    threshold: f64,
}

impl JaccardVerifier {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!(
                "jaccard threshold must lie in [0, 1], got {threshold}"
            )));
        }
        Ok(JaccardVerifier { threshold })
    }
}

impl PostVerifier for JaccardVerifier {
    fn name(&self) -> &str {
        "jaccard"
    }

    fn accept(&self, a: &Record, b: &Record) -> bool {
        jaccard(a, b) >= self.threshold
    }
}

pub fn jaccard_verifier(threshold: f64) -> Result<Box<dyn PostVerifier>> {
    Ok(Box::new(JaccardVerifier::new(threshold)?))
}

type VerifierFactory = Box<dyn Fn(&str) -> Result<Box<dyn PostVerifier>> + Send + Sync>;

/// Named verifier constructors, addressed from config as `name:argument`.
pub struct VerifierRegistry {
    factories: BTreeMap<String, VerifierFactory>,
}

impl Default for VerifierRegistry {
    fn default() -> Self {
        let mut registry = VerifierRegistry {
            factories: BTreeMap::new(),
        };
        registry.register("jaccard", |arg| {
            let threshold = arg.trim().parse::<f64>().map_err(|_| {
                Error::Config(format!(
                    "jaccard verifier needs a numeric threshold, got `{arg}`"
                ))
            })?;
            jaccard_verifier(threshold)
        });
        registry
    }
}

impl VerifierRegistry {
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&str) -> Result<Box<dyn PostVerifier>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    /// Parses `none` or `name:argument`.
    pub fn build(&self, spec: &str) -> Result<Option<Box<dyn PostVerifier>>> {
        let spec = spec.trim();
        if spec.is_empty() || spec == "none" {
            return Ok(None);
        }
        let (name, arg) = spec.split_once(':').unwrap_or((spec, ""));
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown verifier `{name}`")))?;
        factory(arg).map(Some)
    }
}

/// Outcome of thresholding scored pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Finalized {
    /// Pairs whose combined probability exceeds `τ`.
    pub above_tau: usize,
    /// Of those, the pairs the verifier accepted (all of them without one).
    pub links: Vec<Link>,
}

/// Keeps pairs with probability strictly above `tau` that the verifier
/// accepts.
pub fn finalize(
    scored: &[Link],
    tau: f64,
    verifier: Option<&dyn PostVerifier>,
    records: &RecordSet,
) -> Result<Finalized> {
    check_unit_open("link.tau", tau)?;
    let passing: Vec<&Link> = scored.iter().filter(|l| l.probability > tau).collect();
    let above_tau = passing.len();
    let links = match verifier {
        None => passing.into_iter().copied().collect(),
        Some(v) => passing
            .into_par_iter()
            .filter(|l| match (records.get(l.r_i), records.get(l.r_j)) {
                (Some(a), Some(b)) => v.accept(a, b),
                _ => false,
            })
            .copied()
            .collect(),
    };
    Ok(Finalized { above_tau, links })
}

/// Writes `id_a,id_b,probability,evidence_count` rows in the given order.
pub fn write_links<W: Write>(links: &[Link], out: &mut W) -> io::Result<()> {
    writeln!(out, "id_a,id_b,probability,evidence_count")?;
    for l in links {
        writeln!(
            out,
            "{},{},{},{}",
            l.r_i, l.r_j, l.probability, l.evidence_count
        )?;
    }
    Ok(())
}
