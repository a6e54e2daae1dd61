//! End-to-end resolution: load, deduplicate, index, link, verify, label.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::cc::{connected_components, CcStats, EdgeList, Labelling};
use crate::config::{LinkParams, PipelineConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, GroundTruth, Metrics, Scope};
use crate::index::{IndexStats, InvertedIndex, Postings};
use crate::linker::{finalize, score_pairs, write_links, Link, PostVerifier, VerifierRegistry};
use crate::records::{deduplicate, load_csv, Record, RecordId, RecordSet, Source};
use crate::templates::TemplateSet;

/// Everything that does not depend on `(a, b, ρ, τ)`: deduplicated records
/// and their grouped keys.
pub struct Prepared {
    /// Rows read from all sources.
    pub loaded: usize,
    /// Canonical records, one per duplicate class.
    pub records: RecordSet,
    /// Every loaded id mapped to its canonical id.
    pub alias_map: BTreeMap<RecordId, RecordId>,
    /// Source of every loaded id.
    pub sources: HashMap<RecordId, Source>,
    /// Native key to id, one map per source in configuration order.
    pub native_keys: Vec<HashMap<String, RecordId>>,
    pub postings: Postings,
    pub dedup_seconds: f64,
    pub extract_seconds: f64,
    verifier: Option<Box<dyn PostVerifier>>,
    scope: Scope,
}

/// Output of the scoring stages for one `(a, b, ρ)`.
#[derive(Debug, Clone)]
pub struct Scored {
    pub index: IndexStats,
    pub index_keys: usize,
    pub max_recurrence: usize,
    /// Every pair with evidence, sorted by `(r_i, r_j)`.
    pub links: Vec<Link>,
    pub index_seconds: f64,
    pub link_seconds: f64,
}

/// Thresholded, verified and labelled result of one parameter setting.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub above_tau: usize,
    pub links: Vec<Link>,
    /// Component label of every loaded id.
    pub clusters: Labelling,
    pub cc: CcStats,
    pub threshold_seconds: f64,
    pub verify_seconds: f64,
    pub cc_seconds: f64,
}

impl Prepared {
    /// Loads and deduplicates every source, then extracts keys.
    pub fn load(config: &PipelineConfig) -> Result<Self> {
        Self::load_with(config, &VerifierRegistry::default())
    }

    pub fn load_with(config: &PipelineConfig, registry: &VerifierRegistry) -> Result<Self> {
        let verifier = registry.build(&config.verifier)?;
        let started = Instant::now();
        let mut loaded = Vec::with_capacity(config.sources.len());
        let mut next_base = 0u64;
        for input in &config.sources {
            let mut spec = input.spec.clone();
            if !input.base_configured {
                spec.base_id = next_base;
            }
            let rows =
                load_csv(&input.path, &config.schema, &spec).map_err(|e| e.in_stage("load"))?;
            next_base = spec.base_id + rows.len() as u64;
            loaded.push(rows);
        }
        let load_seconds = started.elapsed().as_secs_f64();
        let mut prepared = Self::from_sources(loaded, &config.templates, verifier, config.scope)?;
        prepared.dedup_seconds += load_seconds;
        Ok(prepared)
    }

    /// Builds from in-memory records, one vector per source. Duplicates are
    /// only collapsed within a source.
    pub fn from_sources(
        sources: Vec<Vec<Record>>,
        templates: &TemplateSet,
        verifier: Option<Box<dyn PostVerifier>>,
        scope: Scope,
    ) -> Result<Self> {
        let started = Instant::now();
        let mut source_of = HashMap::new();
        let mut native_keys = Vec::with_capacity(sources.len());
        let mut alias_map = BTreeMap::new();
        let mut canonical = Vec::new();
        let mut loaded = 0;
        for rows in &sources {
            loaded += rows.len();
            let mut keys = HashMap::with_capacity(rows.len());
            for r in rows {
                if source_of.insert(r.id, r.source).is_some() {
                    return Err(Error::Data(format!(
                        "record id {} is used by more than one row; check the sources' base_id",
                        r.id
                    ))
                    .in_stage("load"));
                }
                let key = r.native_key.clone().unwrap_or_else(|| r.id.to_string());
                if keys.insert(key.clone(), r.id).is_some() {
                    log::warn!("native key `{key}` appears more than once; keeping the last row");
                }
            }
            native_keys.push(keys);
            let dedup = deduplicate(rows);
            alias_map.extend(dedup.alias_map);
            canonical.extend(dedup.canonical);
        }
        let records = RecordSet::new(canonical);
        let dedup_seconds = started.elapsed().as_secs_f64();

        let started = Instant::now();
        let postings = Postings::collect(records.as_slice(), templates);
        let extract_seconds = started.elapsed().as_secs_f64();
        if postings.skipped_extractions > 0 {
            log::warn!(
                "{} record-template extractions exceeded the yield limits and were skipped",
                postings.skipped_extractions
            );
        }
        Ok(Prepared {
            loaded,
            records,
            alias_map,
            sources: source_of,
            native_keys,
            postings,
            dedup_seconds,
            extract_seconds,
            verifier,
            scope,
        })
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    /// Ground truth whose first column names records of the first source and
    /// second column records of the last one.
    pub fn load_truth(&self, path: &Path) -> Result<GroundTruth> {
        let left = &self.native_keys[0];
        let right = self.native_keys.last().unwrap_or(left);
        GroundTruth::load(path, left, right).map_err(|e| e.in_stage("evaluate"))
    }

    /// Index and pair scores for `(a, b, ρ)`; `τ` is not used.
    pub fn score(&self, params: &LinkParams) -> Result<Scored> {
        let started = Instant::now();
        let model = params.model()?;
        let index = InvertedIndex::from_postings(&self.postings, &model, params.rho, params.k_cap)
            .map_err(|e| e.in_stage("index"))?;
        let index_seconds = started.elapsed().as_secs_f64();

        let started = Instant::now();
        let cross = params.cross_source_only.then_some(&self.records);
        let links = score_pairs(&index, cross, params.skip_elimination);
        Ok(Scored {
            index: index.stats(),
            index_keys: index.len(),
            max_recurrence: index.max_recurrence(),
            links,
            index_seconds,
            link_seconds: started.elapsed().as_secs_f64(),
        })
    }

    /// Applies `τ` and the verifier, then labels components over every
    /// loaded id.
    pub fn finish(&self, scored: &Scored, params: &LinkParams) -> Result<Outcome> {
        let started = Instant::now();
        let thresholded = finalize(&scored.links, params.tau, None, &self.records)
            .map_err(|e| e.in_stage("link"))?;
        let threshold_seconds = started.elapsed().as_secs_f64();

        let started = Instant::now();
        let (above_tau, links) = match &self.verifier {
            None => (thresholded.above_tau, thresholded.links),
            Some(v) => {
                let verified = finalize(
                    &thresholded.links,
                    params.tau,
                    Some(v.as_ref()),
                    &self.records,
                )
                .map_err(|e| e.in_stage("verify"))?;
                (thresholded.above_tau, verified.links)
            }
        };
        let verify_seconds = started.elapsed().as_secs_f64();

        let started = Instant::now();
        let edges = EdgeList::new(links.iter().map(|l| (l.r_i, l.r_j)));
        let (canonical, cc) = connected_components(&edges, self.records.ids())
            .map_err(|e| e.in_stage("components"))?;
        let clusters = canonical
            .expand(&self.alias_map)
            .map_err(|e| e.in_stage("components"))?;
        Ok(Outcome {
            above_tau,
            links,
            clusters,
            cc,
            threshold_seconds,
            verify_seconds,
            cc_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

/// One row of the stage report: how many items a stage produced and how long
/// it took.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRow {
    pub stage: &'static str,
    pub size: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub records: usize,
    /// `distinct_records`, `candidate_signatures`, `pairwise_links`,
    /// `verified_links`, `connected_components`, in that order.
    pub stages: Vec<StageRow>,
    pub total_seconds: f64,
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub tau: f64,
    pub max_recurrence: usize,
    pub index_keys: usize,
    pub index: IndexStats,
    pub pairs_scored: usize,
    pub cc: CcStats,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
}

impl RunReport {
    /// Tab-separated `stage, size, seconds`, framed by the record count and
    /// the total time.
    pub fn write_tsv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "stage\tsize\tseconds")?;
        writeln!(out, "records\t{}\t", self.records)?;
        for row in &self.stages {
            writeln!(out, "{}\t{}\t{:.3}", row.stage, row.size, row.seconds)?;
        }
        writeln!(out, "overall\t\t{:.3}", self.total_seconds)
    }
}

/// A finished run.
pub struct Run {
    pub clusters: Labelling,
    pub links: Vec<Link>,
    pub report: RunReport,
}

/// Runs the whole pipeline for the configured parameters. Ground truth, when
/// configured, is scored into the report.
pub fn resolve(config: &PipelineConfig) -> Result<Run> {
    let started = Instant::now();
    let prepared = Prepared::load(config)?;
    let truth = config
        .truth
        .as_deref()
        .map(|p| prepared.load_truth(p))
        .transpose()?;
    let run = resolve_prepared(&prepared, &config.params, config.templates.warnings())?;
    let mut report = run.report;
    if let Some(truth) = truth {
        report.metrics = Some(
            evaluate(&run.clusters, &prepared.sources, &truth, prepared.scope())
                .map_err(|e| e.in_stage("evaluate"))?,
        );
    }
    report.total_seconds = started.elapsed().as_secs_f64();
    Ok(Run { report, ..run })
}

pub fn resolve_prepared(
    prepared: &Prepared,
    params: &LinkParams,
    warnings: &[String],
) -> Result<Run> {
    let scored = prepared.score(params)?;
    let outcome = prepared.finish(&scored, params)?;
    let stages = vec![
        StageRow {
            stage: "distinct_records",
            size: prepared.records.len() as u64,
            seconds: prepared.dedup_seconds,
        },
        StageRow {
            stage: "candidate_signatures",
            size: prepared.postings.incidences() as u64,
            seconds: prepared.extract_seconds + scored.index_seconds,
        },
        StageRow {
            stage: "pairwise_links",
            size: outcome.above_tau as u64,
            seconds: scored.link_seconds + outcome.threshold_seconds,
        },
        StageRow {
            stage: "verified_links",
            size: outcome.links.len() as u64,
            seconds: outcome.verify_seconds,
        },
        StageRow {
            stage: "connected_components",
            size: outcome.clusters.component_count() as u64,
            seconds: outcome.cc_seconds,
        },
    ];
    let total_seconds = stages.iter().map(|s| s.seconds).sum();
    let report = RunReport {
        records: prepared.loaded,
        stages,
        total_seconds,
        a: params.a,
        b: params.b,
        rho: params.rho,
        tau: params.tau,
        max_recurrence: scored.max_recurrence,
        index_keys: scored.index_keys,
        index: scored.index,
        pairs_scored: scored.links.len(),
        cc: outcome.cc,
        warnings: warnings.to_vec(),
        metrics: None,
    };
    Ok(Run {
        clusters: outcome.clusters,
        links: outcome.links,
        report,
    })
}

/// Writes `record_id,entity_id` sorted by record id.
pub fn write_clusters<W: Write>(clusters: &Labelling, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "record_id,entity_id")?;
    for (node, label) in clusters.iter() {
        writeln!(out, "{node},{label}")?;
    }
    Ok(())
}

pub const OUTPUT_FILES: [&str; 4] = ["clusters.csv", "links.csv", "report.tsv", "report.json"];

/// Writes the run's files into `dir`. Either all of them appear or none do.
pub fn write_run(run: &Run, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut writers: Vec<FileWriter<'_>> = vec![
        (
            "clusters.csv",
            Box::new(|mut w| write_clusters(&run.clusters, &mut w)),
        ),
        (
            "links.csv",
            Box::new(|mut w| write_links(&run.links, &mut w)),
        ),
        ("report.tsv", Box::new(|mut w| run.report.write_tsv(&mut w))),
        (
            "report.json",
            Box::new(|w| {
                serde_json::to_writer_pretty(&mut *w, &run.report).map_err(std::io::Error::from)?;
                writeln!(w)
            }),
        ),
    ];
    write_all_or_nothing(dir, &mut writers)
}

/// Produces one file's contents.
pub type WriteFn<'a> = Box<dyn Fn(&mut dyn Write) -> std::io::Result<()> + 'a>;

/// A file name and the writer of its contents.
pub type FileWriter<'a> = (&'a str, WriteFn<'a>);

/// Writes each file to a temporary name, then renames them all into place.
/// On any failure every file of this call is removed.
pub fn write_all_or_nothing(dir: &Path, files: &mut [FileWriter<'_>]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut temps = Vec::new();
    let mut finals = Vec::new();
    let result = (|| -> Result<()> {
        for (name, write) in files.iter() {
            let tmp = dir.join(format!(".{name}.partial"));
            temps.push(tmp.clone());
            let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let mut w = BufWriter::new(file);
            write(&mut w).map_err(|e| Error::io(&tmp, e))?;
            w.flush().map_err(|e| Error::io(&tmp, e))?;
        }
        for ((name, _), tmp) in files.iter().zip(&temps) {
            let dest = dir.join(name);
            fs::rename(tmp, &dest).map_err(|e| Error::io(&dest, e))?;
            finals.push(dest);
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(finals),
        Err(e) => {
            for p in temps.iter().chain(&finals) {
                let _ = fs::remove_file(p);
            }
            Err(e)
        }
    }
}
