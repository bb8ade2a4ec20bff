//! Directed join graph over the schema and greedy meta-path selection.
//!
//! Every foreign key yields two directed edges (toward the PK side and back),
//! so paths may traverse joins in either direction. Each auxiliary table gets
//! one meta-path from the base table, picked by a greedy frontier search that
//! always extends the highest-scoring one-step extension. The greedy search
//! is not guaranteed globally optimal; the score of the returned path is
//! always exactly recomputable from its hops.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{RelationalDataset, Value};
use crate::error::{Error, Result};

/// Join multiplicity observed in the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkType {
    OneToOne,
    OneToMany,
    ManyToOne,
}

/// One directed traversal of a PK/FK link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinEdge {
    pub src_table: String,
    pub dst_table: String,
    /// FK column on the many side of the link.
    pub fk_column: String,
    /// PK column on the one side of the link.
    pub pk_column: String,
    /// Which endpoint holds the FK column. Implied by link_type for m:1
    /// (src) and 1:n (dst) but needed to disambiguate 1:1 edges.
    #[serde(default = "default_true")]
    pub fk_on_src: bool,
    pub link_type: LinkType,
    /// Mean number of dst tuples matched per src tuple.
    pub avg_fanout: f64,
}

fn default_true() -> bool {
    true
}

impl fmt::Display for JoinEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lt = match self.link_type {
            LinkType::OneToOne => "1:1",
            LinkType::OneToMany => "1:n",
            LinkType::ManyToOne => "m:1",
        };
        write!(
            f,
            "{} -({})-> {} [{lt} w={:.3}]",
            self.src_table, self.fk_column, self.dst_table, self.avg_fanout
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectedJoinGraph {
    pub base_table: String,
    pub nodes: Vec<String>,
    pub edges: Vec<JoinEdge>,
}

impl DirectedJoinGraph {
    pub fn out_edges<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a JoinEdge> {
        self.edges.iter().filter(move |e| e.src_table == table)
    }
}

/// A scored join path from the base table to one auxiliary table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetaPath {
    pub target_table: String,
    pub hops: Vec<JoinEdge>,
    pub length: usize,
    pub s_length: f64,
    pub s_direction: f64,
    pub score: f64,
}

impl fmt::Display for MetaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: L={} S_L={:.4} S_N={:.4} score={:.4}",
            self.target_table, self.length, self.s_length, self.s_direction, self.score
        )?;
        for h in &self.hops {
            write!(f, "\n    {h}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PathScoringConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for PathScoringConfig {
    fn default() -> Self {
        PathScoringConfig {
            alpha: 0.5,
            beta: 0.5,
        }
    }
}

impl PathScoringConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha + self.beta > 0.0) {
            return Err(Error::Config(format!(
                "path scoring weights must satisfy alpha >= 0, beta >= 0, alpha + beta > 0 \
                 (got alpha={}, beta={})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Build the directed join graph from the schema plus observed fanouts.
///
/// For every FK two edges are materialized: FK side toward PK side and back.
/// When the FK column's non-null values are unique both directions are 1:1;
/// otherwise the forward edge is m:1 and the reverse edge 1:n. Dangling and
/// null FK values simply contribute zero matches to the fanout.
pub fn build_join_graph(dataset: &RelationalDataset) -> DirectedJoinGraph {
    let mut edges = Vec::new();
    for table in &dataset.tables {
        for (fk_col, spec, target) in table.fk_columns() {
            let Ok(dst) = dataset.table(&target.table) else {
                continue; // validated at load; defensive for hand-built datasets
            };
            let n_src = table.tuples.len();
            let n_dst = dst.tuples.len();

            let mut matched = 0usize; // src rows whose FK hits an existing PK
            let mut per_value: BTreeMap<&str, usize> = BTreeMap::new();
            for t in &table.tuples {
                if let Value::Str(v) = &t.values[fk_col] {
                    if dst.row_by_pk(v).is_some() {
                        matched += 1;
                    }
                    *per_value.entry(v.as_str()).or_insert(0) += 1;
                }
            }
            let max_rows_per_value = per_value.values().copied().max().unwrap_or(0);
            let unique_fk = max_rows_per_value <= 1;

            let forward_fanout = if n_src == 0 {
                0.0
            } else {
                matched as f64 / n_src as f64
            };
            // Reverse fanout: FK rows matching each PK row, averaged over
            // all PK-side rows.
            let reverse_total: usize = dst
                .tuples
                .iter()
                .map(|d| per_value.get(d.key.as_str()).copied().unwrap_or(0))
                .sum();
            let reverse_fanout = if n_dst == 0 {
                0.0
            } else {
                reverse_total as f64 / n_dst as f64
            };

            edges.push(JoinEdge {
                src_table: table.name.clone(),
                dst_table: target.table.clone(),
                fk_column: spec.name.clone(),
                pk_column: target.column.clone(),
                fk_on_src: true,
                link_type: if unique_fk {
                    LinkType::OneToOne
                } else {
                    LinkType::ManyToOne
                },
                avg_fanout: forward_fanout,
            });
            edges.push(JoinEdge {
                src_table: target.table.clone(),
                dst_table: table.name.clone(),
                fk_column: spec.name.clone(),
                pk_column: target.column.clone(),
                fk_on_src: false,
                link_type: if unique_fk {
                    LinkType::OneToOne
                } else {
                    LinkType::OneToMany
                },
                avg_fanout: reverse_fanout,
            });
        }
    }
    DirectedJoinGraph {
        base_table: dataset.task.base_table.clone(),
        nodes: dataset.tables.iter().map(|t| t.name.clone()).collect(),
        edges,
    }
}

/// Shorter paths score higher: 1/(1+L).
pub fn path_length_score(length: usize) -> f64 {
    1.0 / (1.0 + length as f64)
}

/// One-to-many hops amplify noise; penalize by their fanout:
/// 1/(1 + sum of 1:n hop fanouts). 1:1 and m:1 hops are free.
pub fn join_direction_score(hops: &[JoinEdge]) -> f64 {
    let penalty: f64 = hops
        .iter()
        .filter(|h| h.link_type == LinkType::OneToMany)
        .map(|h| h.avg_fanout)
        .sum();
    1.0 / (1.0 + penalty)
}

pub fn score_path(hops: &[JoinEdge], config: &PathScoringConfig) -> f64 {
    config.alpha * path_length_score(hops.len()) + config.beta * join_direction_score(hops)
}

/// Candidate one-step extension in the greedy frontier. Ordered so the heap
/// pops the highest score first, ties broken toward the lexicographically
/// smaller (dst table, fk column).
struct Candidate {
    score: f64,
    hops: Vec<JoinEdge>,
}

impl Candidate {
    fn dst(&self) -> &str {
        &self.hops.last().expect("candidate has at least one hop").dst_table
    }

    fn fk(&self) -> &str {
        &self.hops.last().expect("candidate has at least one hop").fk_column
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.dst().cmp(self.dst()))
            .then_with(|| other.fk().cmp(self.fk()))
    }
}

/// Greedy meta-path search from the base table.
///
/// Frontier expansion: among all one-step extensions of already-settled
/// paths, settle the one whose extended path scores highest. Extending a
/// path never raises its score, so each table's first settlement is the
/// greedy choice. Settled tables are never revisited, which also keeps
/// every path cycle-free. Unreachable tables are absent from the result.
pub fn find_meta_paths(
    graph: &DirectedJoinGraph,
    config: &PathScoringConfig,
) -> Result<BTreeMap<String, MetaPath>> {
    config.validate()?;

    let mut settled: BTreeSet<String> = BTreeSet::new();
    settled.insert(graph.base_table.clone());
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::new();

    let push_extensions =
        |heap: &mut BinaryHeap<Candidate>, settled: &BTreeSet<String>, hops: &[JoinEdge], from: &str| {
            for e in graph.out_edges(from) {
                if settled.contains(&e.dst_table) {
                    continue;
                }
                let mut ext = hops.to_vec();
                ext.push(e.clone());
                heap.push(Candidate {
                    score: score_path(&ext, config),
                    hops: ext,
                });
            }
        };

    push_extensions(&mut heap, &settled, &[], &graph.base_table);

    let mut result = BTreeMap::new();
    while let Some(cand) = heap.pop() {
        let dst = cand.dst().to_string();
        if settled.contains(&dst) {
            continue;
        }
        settled.insert(dst.clone());
        push_extensions(&mut heap, &settled, &cand.hops, &dst);
        let hops = cand.hops;
        result.insert(
            dst.clone(),
            MetaPath {
                target_table: dst,
                length: hops.len(),
                s_length: path_length_score(hops.len()),
                s_direction: join_direction_score(&hops),
                score: cand.score,
                hops,
            },
        );
    }

    for node in &graph.nodes {
        if !settled.contains(node) {
            log::warn!("table {node} is unreachable from {}; no meta-path", graph.base_table);
        }
    }
    Ok(result)
}
