//! Fixtures shared by the benches.

use psig_core::eval::Scope;
use psig_core::{
    generate_synthetic, Config, EdgeList, LinkParams, Prepared, RecordId, SynthParams, TemplateSet,
};

/// Deduplicated, key-extracted synthetic person records plus the parameters
/// of the generated config.
pub fn synthetic(entities: usize) -> (Prepared, LinkParams) {
    let data = generate_synthetic(&SynthParams {
        entities,
        records_per_entity: 3,
        corruption: 0.2,
        seed: 1,
    })
    .expect("valid synth params");
    let config = Config::from_toml(psig_core::synth::CONFIG, std::path::Path::new("."))
        .and_then(|c| c.pipeline())
        .expect("bundled config is valid");
    let templates: &TemplateSet = &config.templates;
    let prepared =
        Prepared::from_sources(vec![data.to_records()], templates, None, Scope::AllPairs)
            .expect("distinct ids");
    (prepared, config.params)
}

/// A chain over `n` nodes whose ids are scattered by a fixed odd multiplier,
/// so the forest rewrite has real work to do.
pub fn scrambled_chain(n: u64) -> EdgeList {
    let id = |i: u64| RecordId(i.wrapping_mul(0x9e37_79b9) % (n * 4));
    EdgeList::new((0..n - 1).map(|i| (id(i), id(i + 1))))
}

/// Disjoint stars of `arms` leaves each, `n` nodes in total.
pub fn stars(n: u64, arms: u64) -> EdgeList {
    EdgeList::new(
        (0..n)
            .filter(|i| i % (arms + 1) != 0)
            .map(|i| (RecordId(i - i % (arms + 1)), RecordId(i))),
    )
}
