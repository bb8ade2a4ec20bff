//! Turning trained attention matrices into attribute groups and sub-tables.
//!
//! Per table: sum the per-tuple attention matrices, min-max normalize the
//! off-diagonal, symmetrize, keep pairs above a threshold, and read the
//! resulting undirected graph's structure — maximal cliques by default,
//! edge-betweenness communities as the alternative. Each group becomes a
//! projection of the parent table that keeps its key columns for linkage.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{RelationalDataset, Table, Tuple};
use crate::error::{Error, Result};
use crate::gat::AttentionRecord;

/// Summed and normalized attention for one table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CumulativeAttention {
    pub table: String,
    pub nodes: Vec<String>,
    /// Elementwise sum of all per-tuple attention matrices.
    pub a_sum: Vec<Vec<f64>>,
    /// Min-max normalized over off-diagonal entries; diagonal fixed at 0.
    pub a_norm: Vec<Vec<f64>>,
}

/// Undirected attribute pairs whose symmetrized normalized weight clears
/// the threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignificantEdgeSet {
    pub table: String,
    pub threshold: f64,
    pub nodes: Vec<String>,
    /// Pairs stored with the lexicographically smaller attribute first.
    pub edges: BTreeSet<(String, String)>,
}

impl SignificantEdgeSet {
    pub fn contains(&self, u: &str, v: &str) -> bool {
        let pair = if u <= v {
            (u.to_string(), v.to_string())
        } else {
            (v.to_string(), u.to_string())
        };
        self.edges.contains(&pair)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingMethod {
    MaximalClique,
    GirvanNewman,
}

/// Attribute groups extracted from one table's significant-edge graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubTableManifest {
    pub table: String,
    pub method: GroupingMethod,
    pub threshold: f64,
    /// Each group sorted internally; group list sorted lexicographically.
    pub groups: Vec<Vec<String>>,
}

/// Sum attention records and min-max normalize the off-diagonal entries.
/// All records must share the same node list (same table, same ordering).
pub fn accumulate(records: &[AttentionRecord]) -> Result<CumulativeAttention> {
    let first = records.first().ok_or_else(|| {
        Error::Config("cannot accumulate an empty set of attention records".into())
    })?;
    let n = first.nodes.len();
    let mut a_sum = vec![vec![0.0; n]; n];
    for rec in records {
        if rec.nodes != first.nodes {
            return Err(Error::MismatchedNodeSets {
                table: first.table.clone(),
                expected: first.nodes.clone(),
                found: rec.nodes.clone(),
            });
        }
        for (acc, row) in a_sum.iter_mut().zip(&rec.matrix) {
            for (a, &x) in acc.iter_mut().zip(row) {
                *a += x;
            }
        }
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (u, row) in a_sum.iter().enumerate() {
        for (v, &val) in row.iter().enumerate() {
            if u != v {
                lo = lo.min(val);
                hi = hi.max(val);
            }
        }
    }
    let mut a_norm = vec![vec![0.0; n]; n];
    if n < 2 || hi <= lo {
        if n >= 2 {
            log::warn!(
                "table {}: all off-diagonal attention sums equal ({lo}); \
                 normalized matrix is all zeros",
                first.table
            );
        }
    } else {
        for u in 0..n {
            for v in 0..n {
                if u != v {
                    a_norm[u][v] = (a_sum[u][v] - lo) / (hi - lo);
                }
            }
        }
    }
    Ok(CumulativeAttention {
        table: first.table.clone(),
        nodes: first.nodes.clone(),
        a_sum,
        a_norm,
    })
}

/// Keep attribute pairs whose symmetrized normalized weight is strictly
/// above `ell`.
pub fn select_edges(ca: &CumulativeAttention, ell: f64) -> Result<SignificantEdgeSet> {
    if !(0.0..=1.0).contains(&ell) {
        return Err(Error::Config(format!(
            "edge threshold must lie in [0, 1], got {ell}"
        )));
    }
    let n = ca.nodes.len();
    let mut edges = BTreeSet::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let w = 0.5 * (ca.a_norm[u][v] + ca.a_norm[v][u]);
            if w > ell {
                let (a, b) = ordered(&ca.nodes[u], &ca.nodes[v]);
                edges.insert((a, b));
            }
        }
    }
    Ok(SignificantEdgeSet {
        table: ca.table.clone(),
        threshold: ell,
        nodes: ca.nodes.clone(),
        edges,
    })
}

fn ordered(u: &str, v: &str) -> (String, String) {
    if u <= v {
        (u.to_string(), v.to_string())
    } else {
        (v.to_string(), u.to_string())
    }
}

/// Adjacency over node indices for the significant-edge graph.
fn adjacency(edges: &SignificantEdgeSet) -> Vec<BTreeSet<usize>> {
    let index: BTreeMap<&str, usize> = edges
        .nodes
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut adj = vec![BTreeSet::new(); edges.nodes.len()];
    for (u, v) in &edges.edges {
        let (ui, vi) = (index[u.as_str()], index[v.as_str()]);
        adj[ui].insert(vi);
        adj[vi].insert(ui);
    }
    adj
}

/// All maximal cliques of the significant-edge graph, as attribute groups.
/// With `keep_singletons` false (the default elsewhere), isolated
/// attributes are dropped; otherwise they become one-element groups.
pub fn extract_cliques(edges: &SignificantEdgeSet, keep_singletons: bool) -> SubTableManifest {
    let adj = adjacency(edges);
    let mut cliques = Vec::new();
    let mut r = Vec::new();
    let mut p: BTreeSet<usize> = (0..edges.nodes.len()).collect();
    let mut x = BTreeSet::new();
    bron_kerbosch(&mut r, &mut p, &mut x, &adj, &mut cliques);

    let mut groups: Vec<Vec<String>> = cliques
        .into_iter()
        .filter(|c| c.len() >= 2 || (keep_singletons && c.len() == 1))
        .map(|c| {
            let mut g: Vec<String> = c.iter().map(|&i| edges.nodes[i].clone()).collect();
            g.sort();
            g
        })
        .collect();
    groups.sort();
    SubTableManifest {
        table: edges.table.clone(),
        method: GroupingMethod::MaximalClique,
        threshold: edges.threshold,
        groups,
    }
}

/// Branch-and-bound maximal-clique enumeration with pivoting: recursion
/// instances where P ∪ X is empty report R as maximal; the pivot prunes
/// candidates that cannot lead to new maximal cliques.
fn bron_kerbosch(
    r: &mut Vec<usize>,
    p: &mut BTreeSet<usize>,
    x: &mut BTreeSet<usize>,
    adj: &[BTreeSet<usize>],
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() && x.is_empty() {
        out.push(r.clone());
        return;
    }
    // Pivot: the candidate covering the most of P (ties -> smallest id).
    let pivot = p
        .iter()
        .chain(x.iter())
        .copied()
        .max_by_key(|&u| (adj[u].intersection(p).count(), std::cmp::Reverse(u)))
        .expect("P or X is non-empty");
    let branch: Vec<usize> = p.difference(&adj[pivot]).copied().collect();
    for v in branch {
        r.push(v);
        let mut p2: BTreeSet<usize> = p.intersection(&adj[v]).copied().collect();
        let mut x2: BTreeSet<usize> = x.intersection(&adj[v]).copied().collect();
        bron_kerbosch(r, &mut p2, &mut x2, adj, out);
        r.pop();
        p.remove(&v);
        x.insert(v);
    }
}

/// Girvan–Newman community detection: repeatedly remove the edge with the
/// highest betweenness and keep the connected-component partition that
/// maximizes modularity against the original graph. Attributes with no
/// significant edge are left out entirely.
pub fn extract_communities_gn(edges: &SignificantEdgeSet) -> SubTableManifest {
    let full_adj = adjacency(edges);
    let active: Vec<usize> = (0..edges.nodes.len())
        .filter(|&u| !full_adj[u].is_empty())
        .collect();
    let mut manifest = SubTableManifest {
        table: edges.table.clone(),
        method: GroupingMethod::GirvanNewman,
        threshold: edges.threshold,
        groups: Vec::new(),
    };
    if active.is_empty() {
        return manifest;
    }

    let degree: Vec<usize> = (0..edges.nodes.len()).map(|u| full_adj[u].len()).collect();
    let m = edges.edges.len() as f64;

    let modularity = |partition: &[Vec<usize>]| -> f64 {
        let mut q = 0.0;
        for comm in partition {
            let members: BTreeSet<usize> = comm.iter().copied().collect();
            let mut internal = 0usize;
            let mut deg_sum = 0usize;
            for &u in comm {
                deg_sum += degree[u];
                internal += full_adj[u].intersection(&members).count();
            }
            let internal = internal as f64 / 2.0;
            q += internal / m - (deg_sum as f64 / (2.0 * m)).powi(2);
        }
        q
    };

    let mut adj = full_adj.clone();
    let mut best = components(&adj, &active);
    let mut best_q = modularity(&best);
    let mut remaining: BTreeSet<(usize, usize)> = edges
        .edges
        .iter()
        .map(|(u, v)| {
            let ui = edges.nodes.iter().position(|n| n == u).unwrap();
            let vi = edges.nodes.iter().position(|n| n == v).unwrap();
            (ui.min(vi), ui.max(vi))
        })
        .collect();

    while !remaining.is_empty() {
        let bet = edge_betweenness(&adj, &active);
        // Highest betweenness; exact ties resolved by attribute-name order.
        let (&(u, v), _) = bet
            .iter()
            .max_by(|(ea, wa), (eb, wb)| {
                wa.total_cmp(wb).then_with(|| {
                    let na = (&edges.nodes[ea.0], &edges.nodes[ea.1]);
                    let nb = (&edges.nodes[eb.0], &edges.nodes[eb.1]);
                    nb.cmp(&na)
                })
            })
            .expect("remaining edges imply non-empty betweenness");
        adj[u].remove(&v);
        adj[v].remove(&u);
        remaining.remove(&(u, v));
        let partition = components(&adj, &active);
        let q = modularity(&partition);
        if q > best_q {
            best_q = q;
            best = partition;
        }
    }

    let mut groups: Vec<Vec<String>> = best
        .into_iter()
        .map(|c| {
            let mut g: Vec<String> = c.iter().map(|&i| edges.nodes[i].clone()).collect();
            g.sort();
            g
        })
        .collect();
    groups.sort();
    manifest.groups = groups;
    manifest
}

/// Connected components restricted to `active` nodes, sorted by node id.
fn components(adj: &[BTreeSet<usize>], active: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in active {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if seen.insert(w) {
                    comp.push(w);
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Brandes-style edge betweenness for an unweighted undirected graph.
/// Each unordered pair of reachable nodes contributes 1 split across the
/// shortest paths between them (per-edge totals halved to undo the
/// double count from traversing both endpoints as sources).
fn edge_betweenness(
    adj: &[BTreeSet<usize>],
    active: &[usize],
) -> BTreeMap<(usize, usize), f64> {
    let mut bet: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for u in active {
        for &v in &adj[*u] {
            if *u < v {
                bet.insert((*u, v), 0.0);
            }
        }
    }
    let n = adj.len();
    for &s in active {
        let mut dist = vec![usize::MAX; n];
        let mut sigma = vec![0.0f64; n];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut order = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        dist[s] = 0;
        sigma[s] = 1.0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[u] + 1 {
                    sigma[w] += sigma[u];
                    preds[w].push(u);
                }
            }
        }
        let mut delta = vec![0.0f64; n];
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                let c = sigma[v] / sigma[w] * (1.0 + delta[w]);
                *bet.get_mut(&(v.min(w), v.max(w))).expect("edge exists") += c;
                delta[v] += c;
            }
        }
    }
    for w in bet.values_mut() {
        *w *= 0.5;
    }
    bet
}

/// One materialized attribute group: the parent table projected onto the
/// group plus its key columns.
#[derive(Debug, Clone)]
pub struct SubTable {
    /// Stable identifier, `{parent}#{i}` or `{parent}#whole`.
    pub id: String,
    pub parent: String,
    /// Non-key attributes this sub-table carries.
    pub group: Vec<String>,
    /// True when the parent had no significant edges and is used whole.
    pub unsplit: bool,
    pub table: Table,
}

/// Project the parent table onto each manifest group (plus PK and FK
/// columns). An empty manifest falls back to the whole table, flagged
/// `unsplit`, so the parent still participates downstream.
pub fn materialize_subtables(
    ds: &RelationalDataset,
    manifest: &SubTableManifest,
) -> Result<Vec<SubTable>> {
    let parent = ds.table(&manifest.table)?;
    if manifest.groups.is_empty() {
        log::warn!(
            "table {}: no attribute groups survived; using the whole table",
            manifest.table
        );
        let group: Vec<String> = parent
            .non_key_columns()
            .into_iter()
            .map(|i| parent.columns[i].name.clone())
            .collect();
        return Ok(vec![project(
            parent,
            format!("{}#whole", manifest.table),
            &group,
            true,
        )?]);
    }
    manifest
        .groups
        .iter()
        .enumerate()
        .map(|(i, group)| project(parent, format!("{}#{i}", manifest.table), group, false))
        .collect()
}

fn project(parent: &Table, id: String, group: &[String], unsplit: bool) -> Result<SubTable> {
    let mut keep = Vec::new();
    for (i, c) in parent.columns.iter().enumerate() {
        if c.kind.is_key() || group.contains(&c.name) {
            keep.push(i);
        }
    }
    let found: Vec<&String> = group
        .iter()
        .filter(|g| parent.columns.iter().any(|c| &c.name == *g && !c.kind.is_key()))
        .collect();
    if found.len() != group.len() {
        let missing = group
            .iter()
            .find(|g| !found.contains(g))
            .expect("some group member failed the filter");
        return Err(Error::UnknownAttribute {
            table: parent.name.clone(),
            attribute: missing.clone(),
        });
    }
    let columns = keep.iter().map(|&i| parent.columns[i].clone()).collect();
    let tuples = parent
        .tuples
        .iter()
        .map(|t| Tuple {
            key: t.key.clone(),
            values: keep.iter().map(|&i| t.values[i].clone()).collect(),
        })
        .collect();
    let table = Table::from_parts(id.clone(), columns, tuples, false)?;
    Ok(SubTable {
        id,
        parent: parent.name.clone(),
        group: group.to_vec(),
        unsplit,
        table,
    })
}

/// Human-readable listing of the strongest symmetrized attribute pairs.
pub fn top_pairs_report(ca: &CumulativeAttention, limit: usize) -> String {
    let n = ca.nodes.len();
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let w = 0.5 * (ca.a_norm[u][v] + ca.a_norm[v][u]);
            pairs.push((w, &ca.nodes[u], &ca.nodes[v]));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| (a.1, a.2).cmp(&(b.1, b.2))));
    let mut out = format!("table {}: strongest attribute pairs\n", ca.table);
    for (w, u, v) in pairs.into_iter().take(limit) {
        out.push_str(&format!("  {u} -- {v}: {w:.4}\n"));
    }
    out
}
