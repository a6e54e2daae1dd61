//! Pairwise evaluation against ground truth, and grid search over
//! `(a, b, ρ, τ)`.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cc::Labelling;
use crate::config::LinkParams;
use crate::error::{Error, Result};
use crate::pipeline::Prepared;
use crate::records::{RecordId, Source};

/// Matched pairs, stored as `(smaller id, larger id)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pairs: BTreeSet<(RecordId, RecordId)>,
}

impl GroundTruth {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (RecordId, RecordId)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::Invariant(format!(
                    "ground truth pairs record {a} with itself"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(GroundTruth { pairs: set })
    }

    /// Reads a headed two-column CSV of native keys: the first column is
    /// resolved against `left`, the second against `right`.
    pub fn load(
        path: &Path,
        left: &HashMap<String, RecordId>,
        right: &HashMap<String, RecordId>,
    ) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(path)
            .map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
        let mut pairs = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
            if row.len() < 2 {
                return Err(Error::Row {
                    path: path.to_path_buf(),
                    line: row.position().map_or(0, |p| p.line()),
                    expected: 2,
                    found: row.len(),
                });
            }
            let resolve = |key: &str, map: &HashMap<String, RecordId>| {
                let key = key.trim();
                map.get(key)
                    .copied()
                    .ok_or_else(|| Error::UnknownTruthId(key.to_string()))
            };
            pairs.push((resolve(&row[0], left)?, resolve(&row[1], right)?));
        }
        Self::from_pairs(pairs)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (RecordId, RecordId)> + '_ {
        self.pairs.iter().copied()
    }
}

/// Which record pairs count as predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Pairs with one record from each source.
    CrossSource,
    /// Every pair of records.
    AllPairs,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl Metrics {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f_measure = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f_measure,
        }
    }
}

/// Scores the pairs implied by `clusters` against `truth`. Predicted pairs
/// are all pairs in `scope` that share a label.
pub fn evaluate(
    clusters: &Labelling,
    sources: &HashMap<RecordId, Source>,
    truth: &GroundTruth,
    scope: Scope,
) -> Result<Metrics> {
    // label -> (records from A or single, records from B)
    let mut sizes: HashMap<RecordId, (u64, u64)> = HashMap::new();
    for (node, label) in clusters.iter() {
        let slot = sizes.entry(label).or_default();
        match sources.get(&node) {
            Some(Source::B) => slot.1 += 1,
            _ => slot.0 += 1,
        }
    }
    let predicted: u64 = sizes
        .values()
        .map(|&(a, b)| match scope {
            Scope::CrossSource => a * b,
            Scope::AllPairs => (a + b) * (a + b).saturating_sub(1) / 2,
        })
        .sum();

    let mut tp = 0u64;
    for (x, y) in truth.iter() {
        let lx = clusters
            .get(x)
            .ok_or_else(|| Error::UnknownTruthId(x.to_string()))?;
        let ly = clusters
            .get(y)
            .ok_or_else(|| Error::UnknownTruthId(y.to_string()))?;
        let in_scope = match scope {
            Scope::CrossSource => sources.get(&x) != sources.get(&y),
            Scope::AllPairs => true,
        };
        if lx == ly && in_scope {
            tp += 1;
        }
    }
    let fp = predicted - tp;
    let fn_ = truth.len() as u64 - tp;
    Ok(Metrics::from_counts(tp, fp, fn_))
}

/// Candidate values per parameter; the grid is their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamGrid {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
}

impl ParamGrid {
    pub fn cell_count(&self) -> usize {
        self.a.len() * self.b.len() * self.rho.len() * self.tau.len()
    }

    fn check(&self) -> Result<()> {
        if self.cell_count() == 0 {
            return Err(Error::Config(
                "every grid axis needs at least one value".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub tau: f64,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// One row per cell, in grid order (a, then b, then ρ, then τ).
    pub rows: Vec<GridRow>,
    pub best: usize,
}

impl GridResult {
    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best]
    }
}

/// Evaluates every grid cell. Extraction is shared by all cells; scoring is
/// shared by cells that differ only in `τ`.
pub fn grid_search(
    prepared: &Prepared,
    grid: &ParamGrid,
    base: &LinkParams,
    truth: &GroundTruth,
) -> Result<GridResult> {
    grid.check()?;
    let mut scoring_cells = Vec::new();
    for &a in &grid.a {
        for &b in &grid.b {
            for &rho in &grid.rho {
                scoring_cells.push((a, b, rho));
            }
        }
    }

    let blocks: Vec<Vec<GridRow>> = scoring_cells
        .par_iter()
        .map(|&(a, b, rho)| -> Result<Vec<GridRow>> {
            let started = Instant::now();
            let params = LinkParams {
                a,
                b,
                rho,
                ..base.clone()
            };
            let scored = prepared.score(&params)?;
            let shared = started.elapsed().as_secs_f64();
            grid.tau
                .iter()
                .map(|&tau| {
                    let started = Instant::now();
                    let cell = LinkParams {
                        tau,
                        ..params.clone()
                    };
                    let outcome = prepared.finish(&scored, &cell)?;
                    let metrics = evaluate(
                        &outcome.clusters,
                        &prepared.sources,
                        truth,
                        prepared.scope(),
                    )?;
                    Ok(GridRow {
                        a,
                        b,
                        rho,
                        tau,
                        metrics,
                        wall_seconds: shared + started.elapsed().as_secs_f64(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<GridRow> = blocks.into_iter().flatten().collect();
    let best = best_index(&rows);
    Ok(GridResult { rows, best })
}

/// Highest F; ties go to higher precision, then lower τ, then grid order.
fn best_index(rows: &[GridRow]) -> usize {
    let mut best = 0;
    for (x, row) in rows.iter().enumerate().skip(1) {
        let cur = &rows[best];
        let better = row.metrics.f_measure > cur.metrics.f_measure
            || (row.metrics.f_measure == cur.metrics.f_measure
                && (row.metrics.precision > cur.metrics.precision
                    || (row.metrics.precision == cur.metrics.precision && row.tau < cur.tau)));
        if better {
            best = x;
        }
    }
    best
}

/// Writes one CSV row per grid cell.
pub fn write_grid<W: std::io::Write>(rows: &[GridRow], mut out: W) -> Result<()> {
    let io = |e| Error::io("grid results", e);
    writeln!(
        out,
        "a,b,rho,tau,true_positives,false_positives,false_negatives,precision,recall,f_measure,wall_seconds"
    )
    .map_err(io)?;
    for r in rows {
        let m = &r.metrics;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{:.3}",
            r.a,
            r.b,
            r.rho,
            r.tau,
            m.true_positives,
            m.false_positives,
            m.false_negatives,
            m.precision,
            m.recall,
            m.f_measure,
            r.wall_seconds
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}
