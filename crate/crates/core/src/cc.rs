//! Connected-components labelling over an edge table.
//!
//! Both phases run as synchronous rounds of sort/group-by and join over the
//! whole edge list, never as graph traversals:
//!
//! 1. `to_forest`: for every node with several parents `e1…ei`, rewrite its
//!    incoming edges to hang off `e★ = min(e1…ei)` and make the other parents
//!    children of `e★`. Repeat until every node has one parent.
//! 2. `flatten`: pointer jumping, `(ei,ej),(ej,ek) ⇒ (ei,ej),(ei,ek)`, until
//!    every tree has height one.
//!
//! Each component ends up labelled with its smallest node id.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::records::RecordId;

/// Undirected edges stored as `(smaller, larger)`, sorted, no duplicates, no
/// self-loops. After `to_forest` the first element is the parent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeList {
    edges: Vec<(u64, u64)>,
}

impl EdgeList {
    pub fn new(pairs: impl IntoIterator<Item = (RecordId, RecordId)>) -> Self {
        Self::from_raw(pairs.into_iter().map(|(a, b)| (a.0, b.0)).collect())
    }

    fn from_raw(mut edges: Vec<(u64, u64)>) -> Self {
        edges.retain(|(a, b)| a != b);
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.par_sort_unstable();
        edges.dedup();
        EdgeList { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (RecordId, RecordId)> + '_ {
        self.edges.iter().map(|&(a, b)| (RecordId(a), RecordId(b)))
    }

    fn parent_sum(&self) -> u128 {
        self.edges.iter().map(|&(p, _)| p as u128).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ForestStats {
    /// Rewriting rounds that changed the edge list.
    pub rounds: usize,
    /// Sum of parent ids over all edges: the input's first, then one value
    /// after each round.
    pub parent_sums: Vec<u128>,
}

/// Rewrites the graph into a forest with parent < child and one parent per
/// node, preserving connectivity.
pub fn to_forest(edges: &EdgeList) -> (EdgeList, ForestStats) {
    let mut stats = ForestStats {
        rounds: 0,
        parent_sums: vec![edges.parent_sum()],
    };
    // Grouped by child: (child, parent).
    let mut by_child: Vec<(u64, u64)> = edges.edges.iter().map(|&(p, c)| (c, p)).collect();
    by_child.par_sort_unstable();

    loop {
        let multi_parent = by_child.windows(2).any(|w| w[0].0 == w[1].0);
        if !multi_parent {
            break;
        }
        let mut next: Vec<(u64, u64)> = group_starts(&by_child)
            .par_windows(2)
            .flat_map_iter(|w| {
                let group = &by_child[w[0]..w[1]];
                let child = group[0].0;
                // Sorted by parent within the group, so the first is the minimum.
                let star = group[0].1;
                std::iter::once((child, star))
                    .chain(group[1..].iter().map(move |&(_, p)| (p, star)))
            })
            .collect();
        next.par_sort_unstable();
        next.dedup();
        by_child = next;
        stats.rounds += 1;
        stats
            .parent_sums
            .push(by_child.iter().map(|&(_, p)| p as u128).sum());
    }

    let forest = EdgeList::from_raw(by_child.into_iter().map(|(c, p)| (p, c)).collect());
    (forest, stats)
}

fn group_starts(sorted: &[(u64, u64)]) -> Vec<usize> {
    let mut starts: Vec<usize> = (0..sorted.len())
        .filter(|&x| x == 0 || sorted[x - 1].0 != sorted[x].0)
        .collect();
    starts.push(sorted.len());
    starts
}

/// Node-to-component assignment; every label is the smallest id of its
/// component.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Labelling {
    labels: Vec<(RecordId, RecordId)>,
}

impl Labelling {
    fn from_pairs(mut labels: Vec<(RecordId, RecordId)>) -> Self {
        labels.sort_unstable();
        labels.dedup_by_key(|(node, _)| *node);
        Labelling { labels }
    }

    pub fn get(&self, node: RecordId) -> Option<RecordId> {
        self.labels
            .binary_search_by_key(&node, |&(n, _)| n)
            .ok()
            .map(|i| self.labels[i].1)
    }

    /// `(node, label)` ordered by node.
    pub fn iter(&self) -> impl Iterator<Item = (RecordId, RecordId)> + '_ {
        self.labels.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn component_count(&self) -> usize {
        self.labels.iter().filter(|(n, l)| n == l).count()
    }

    /// Adds every node of `universe` missing from the labelling as its own
    /// component.
    pub fn with_universe(self, universe: impl IntoIterator<Item = RecordId>) -> Self {
        let mut labels = self.labels;
        let known: BTreeSet<RecordId> = labels.iter().map(|&(n, _)| n).collect();
        labels.extend(
            universe
                .into_iter()
                .filter(|n| !known.contains(n))
                .map(|n| (n, n)),
        );
        Labelling::from_pairs(labels)
    }

    /// Labels every key of `alias` (an id to its canonical id) with the label
    /// of its canonical id. Fails if some canonical id is unlabelled.
    pub fn expand(&self, alias: &BTreeMap<RecordId, RecordId>) -> Result<Labelling> {
        let labels = alias
            .iter()
            .map(|(&node, &canonical)| {
                self.get(canonical)
                    .map(|label| (node, label))
                    .ok_or_else(|| Error::Invariant(format!("record {canonical} has no label")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Labelling::from_pairs(labels))
    }

    /// Parent edges `(label, node)` for every non-root node.
    pub fn edges(&self) -> EdgeList {
        EdgeList::from_raw(
            self.labels
                .iter()
                .filter(|(n, l)| n != l)
                .map(|&(n, l)| (l.0, n.0))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FlattenStats {
    /// Join rounds executed; the last one also confirms every tree is flat.
    pub rounds: usize,
}

/// Pointer jumping over a forest whose edges are `(parent, child)` with
/// `parent < child` and one parent per child.
pub fn flatten(forest: &EdgeList) -> Result<(Labelling, FlattenStats)> {
    let mut by_child: Vec<(u64, u64)> = forest.edges.iter().map(|&(p, c)| (c, p)).collect();
    by_child.par_sort_unstable();
    for w in by_child.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Invariant(format!(
                "node {} has parents {} and {}; input is not a forest",
                w[0].0, w[0].1, w[1].1
            )));
        }
    }
    if let Some(&(c, p)) = by_child.iter().find(|(c, p)| p >= c) {
        return Err(Error::Invariant(format!(
            "edge ({p}, {c}) has parent >= child; possible cycle"
        )));
    }

    let mut stats = FlattenStats::default();
    if !by_child.is_empty() {
        loop {
            stats.rounds += 1;
            // Join each edge's parent against the child column.
            let next: Vec<(u64, u64)> = by_child
                .par_iter()
                .map(
                    |&(c, p)| match by_child.binary_search_by_key(&p, |&(c2, _)| c2) {
                        Ok(x) => (c, by_child[x].1),
                        Err(_) => (c, p),
                    },
                )
                .collect();
            let flat = next
                .par_iter()
                .all(|&(_, p)| by_child.binary_search_by_key(&p, |&(c2, _)| c2).is_err());
            by_child = next;
            if flat {
                break;
            }
        }
    }

    let mut labels: Vec<(RecordId, RecordId)> = Vec::with_capacity(by_child.len() * 2);
    for &(c, p) in &by_child {
        labels.push((RecordId(c), RecordId(p)));
        labels.push((RecordId(p), RecordId(p)));
    }
    Ok((Labelling::from_pairs(labels), stats))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CcStats {
    pub forest: ForestStats,
    pub flatten: FlattenStats,
}

/// Full labelling: `to_forest`, then `flatten`, then singletons for every
/// node of `universe` not touched by an edge.
pub fn connected_components(
    edges: &EdgeList,
    universe: impl IntoIterator<Item = RecordId>,
) -> Result<(Labelling, CcStats)> {
    let (forest, forest_stats) = to_forest(edges);
    let (labelling, flatten_stats) = flatten(&forest)?;
    Ok((
        labelling.with_universe(universe),
        CcStats {
            forest: forest_stats,
            flatten: flatten_stats,
        },
    ))
}

/// Reference labelling by union-find with min-id roots.
pub fn oracle_components(
    edges: &EdgeList,
    universe: impl IntoIterator<Item = RecordId>,
) -> Labelling {
    let mut nodes: Vec<u64> = edges.edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    nodes.extend(universe.into_iter().map(|r| r.0));
    nodes.sort_unstable();
    nodes.dedup();
    let slot = |id: u64| nodes.binary_search(&id).expect("known node");

    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in &edges.edges {
        let ra = find(&mut parent, slot(a));
        let rb = find(&mut parent, slot(b));
        // Slots follow id order, so the smaller slot is the smaller id.
        if ra < rb {
            parent[rb] = ra;
        } else if rb < ra {
            parent[ra] = rb;
        }
    }
    let labels = (0..nodes.len())
        .map(|x| (RecordId(nodes[x]), RecordId(nodes[find(&mut parent, x)])))
        .collect();
    Labelling::from_pairs(labels)
}
