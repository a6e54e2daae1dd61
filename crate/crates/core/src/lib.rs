//! Signature-based probabilistic entity resolution.
//!
//! Records are tokenized and deduplicated, candidate signatures are extracted
//! with user templates, and an inverted index keeps the signatures rare
//! enough to be informative. Pairs sharing signatures get a combined match
//! probability; pairs above a threshold become links, and the linked records
//! are labelled by connected components.
//!
//! ```
//! use psig_core::{Extractor, ProbabilityModel, Record, Schema, SignatureTemplate, Source, TemplateSet};
//! use psig_core::{connected_components, score_pairs, EdgeList, InvertedIndex};
//!
//! let schema = Schema::new(["name"]).unwrap();
//! let templates = TemplateSet::with_defaults(
//!     &[SignatureTemplate::new(1, vec![Extractor::ConsecutiveWords { attr: "name".into(), n: 2 }])],
//!     &schema,
//! )
//! .unwrap();
//! let records = vec![
//!     Record::from_raw(0, Source::Single, &["ada lovelace"]),
//!     Record::from_raw(1, Source::Single, &["Ada Lovelace (1815)"]),
//!     Record::from_raw(2, Source::Single, &["alan turing"]),
//! ];
//! let model = ProbabilityModel::new(2.0, 0.1).unwrap();
//! let index = InvertedIndex::build(&records, &templates, &model, 0.1, 10_000).unwrap();
//! let links = score_pairs(&index, None, false);
//! assert_eq!(links.len(), 1);
//! let edges = EdgeList::new(links.iter().map(|l| (l.r_i, l.r_j)));
//! let (labels, _) = connected_components(&edges, records.iter().map(|r| r.id)).unwrap();
//! assert_eq!(labels.component_count(), 2);
//! ```

pub mod cc;
pub mod config;
pub mod error;
pub mod eval;
pub mod index;
pub mod linker;
pub mod pipeline;
pub mod records;
pub mod sigprob;
pub mod synth;
pub mod templates;

pub use cc::{
    connected_components, flatten, oracle_components, to_forest, CcStats, EdgeList, Labelling,
};
pub use config::{Config, LinkParams, PipelineConfig};
pub use error::{Error, ErrorKind, Result};
pub use eval::{
    evaluate, grid_search, GridResult, GridRow, GroundTruth, Metrics, ParamGrid, Scope,
};
pub use index::{IndexEntry, IndexStats, InvertedIndex, Postings};
pub use linker::{
    combine, finalize, jaccard, score_pairs, Eliminator, JaccardVerifier, Link, LinkTuple,
    PostVerifier, VerifierRegistry,
};
pub use pipeline::{resolve, Prepared, Run, RunReport, StageRow};
pub use records::{
    deduplicate, load_csv, tokenize, Record, RecordId, RecordSet, Schema, Source, SourceSpec, Token,
};
pub use sigprob::ProbabilityModel;
pub use synth::{generate as generate_synthetic, SynthDataset, SynthParams};
pub use templates::{Extractor, KeyFormat, SignatureTemplate, TemplateSet};
