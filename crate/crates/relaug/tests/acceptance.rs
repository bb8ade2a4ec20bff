//! Acceptance suite: every release-gating check in one target, one test
//! per criterion, each printing a `PASS` line with its measured numbers
//! (visible with `--nocapture`; a failing check panics with a `FAIL`
//! message carrying the same numbers).
//!
//! The checks are property-based plus controlled planted-signal
//! experiments: closed-form scoring formulas against hand-computed
//! values, analytic gradients against central finite differences,
//! extraction and linking against brute-force oracles, and the
//! end-to-end pipeline against datasets whose signal location is known
//! by construction.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::Rng;

use relaug::dataset::{load_dataset, Label, RelationalDataset, TaskKind, Value};
use relaug::encoders::{EncoderDims, EncoderParams};
use relaug::gat::{
    attention_forward, build_tuple_graph, graph_loss_backward, AttentionRecord, GatParams,
    Stage1Model,
};
use relaug::harness::{ell_sweep, run_baseline, sweep_csv, Baseline};
use relaug::hetgraph::{EdgeType, HeteroEdge, HeteroGraph, HeteroNode, Relation};
use relaug::hgnn::{evaluate_loss, loss_and_backward, HgnnParams, Stage2Config};
use relaug::joinplan::{
    build_join_graph, find_meta_paths, join_direction_score, path_length_score, score_path,
    JoinEdge, LinkType, MetaPath, PathScoringConfig,
};
use relaug::linker::{link_tuples, CoresetConfig, SampleSize};
use relaug::nn::{softmax, zero_grads, ParamSet};
use relaug::pipeline::{
    complete_from_manifests, manifests_for_mode, mine_for_config, run_all, run_in_memory,
    PipelineConfig,
};
use relaug::rng::seeded_rng;
use relaug::subtables::{accumulate, extract_cliques, SignificantEdgeSet};
use relaug::synth::{generate_synthetic, SyntheticSpec};

fn pass(name: &str, detail: &str) {
    println!("PASS {name}: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Closed-form scoring formulas against hand-computed values.

fn hop(link_type: LinkType, fanout: f64) -> JoinEdge {
    JoinEdge {
        src_table: "s".into(),
        dst_table: "d".into(),
        fk_column: "fk".into(),
        pk_column: "id".into(),
        fk_on_src: true,
        link_type,
        avg_fanout: fanout,
    }
}

#[test]
fn acceptance_1_formula_oracles() {
    // Path-length score 1/(1+L), exact.
    for (len, want) in [(0, 1.0), (1, 0.5), (2, 1.0 / 3.0), (3, 0.25)] {
        let got = path_length_score(len);
        assert!(
            (got - want).abs() < 1e-12,
            "FAIL formula oracles: length score L={len} got {got}, want {want}"
        );
    }

    // Direction score 1/(1 + sum of one-to-many fanouts); other hops free.
    let hops = vec![
        hop(LinkType::ManyToOne, 3.0),
        hop(LinkType::OneToMany, 2.5),
        hop(LinkType::OneToMany, 1.5),
    ];
    let got = join_direction_score(&hops);
    assert!(
        (got - 0.2).abs() < 1e-12,
        "FAIL formula oracles: direction score got {got}, want 0.2"
    );
    assert!((join_direction_score(&[]) - 1.0).abs() < 1e-12);
    assert!(
        (join_direction_score(&[hop(LinkType::ManyToOne, 9.0), hop(LinkType::OneToOne, 4.0)])
            - 1.0)
            .abs()
            < 1e-12
    );

    // Combined score alpha * S_L + beta * S_N.
    let even = PathScoringConfig {
        alpha: 0.5,
        beta: 0.5,
    };
    let got = score_path(&hops, &even);
    assert!(
        (got - 0.225).abs() < 1e-12,
        "FAIL formula oracles: combined score got {got}, want 0.225"
    );
    let skew = PathScoringConfig {
        alpha: 2.0,
        beta: 1.0,
    };
    let got = score_path(&hops, &skew);
    assert!(
        (got - 0.7).abs() < 1e-12,
        "FAIL formula oracles: weighted combined score got {got}, want 0.7"
    );

    // Min-max normalization of the accumulated attention, hand-computed.
    let rec = |matrix: Vec<Vec<f64>>| AttentionRecord {
        table: "t".into(),
        key: "k".into(),
        nodes: vec!["a".into(), "b".into(), "c".into()],
        matrix,
        params_stamp: 7,
    };
    let ca = accumulate(&[
        rec(vec![
            vec![0.0, 0.7, 0.3],
            vec![0.2, 0.0, 0.8],
            vec![0.5, 0.5, 0.0],
        ]),
        rec(vec![
            vec![0.0, 0.2, 0.8],
            vec![0.5, 0.0, 0.5],
            vec![0.1, 0.9, 0.0],
        ]),
    ])
    .unwrap();
    // Off-diagonal sums: ab=0.9 ac=1.1 ba=0.7 bc=1.3 ca=0.6 cb=1.4;
    // min 0.6, max 1.4, range 0.8.
    let want = [
        [0.0, 0.375, 0.625],
        [0.125, 0.0, 0.875],
        [0.0, 1.0, 0.0],
    ];
    for i in 0..3 {
        for j in 0..3 {
            assert!(
                (ca.a_norm[i][j] - want[i][j]).abs() < 1e-12,
                "FAIL formula oracles: a_norm[{i}][{j}] got {}, want {}",
                ca.a_norm[i][j],
                want[i][j]
            );
        }
    }

    // Softmax: hand values and row-stochasticity.
    let sm = softmax(&[0.0, 2f64.ln(), 3f64.ln()]);
    for (got, want) in sm.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
        assert!(
            (got - want).abs() < 1e-6,
            "FAIL formula oracles: softmax got {got}, want {want}"
        );
    }
    let mut rng = seeded_rng(11, "acceptance/softmax");
    for _ in 0..50 {
        let n = rng.random_range(1..=8);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
        let p = softmax(&xs);
        let total: f64 = p.iter().sum();
        assert!(
            (total - 1.0).abs() < 1e-6 && p.iter().all(|&v| v >= 0.0),
            "FAIL formula oracles: softmax not row-stochastic (sum {total})"
        );
    }

    // Attention rows of a live model are rows of softmaxes too.
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        aux_tables: 1,
        base_rows: 12,
        aux_rows: 4,
        label_noise: 0.0,
        seed: 5,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec, dir.path()).unwrap();
    let (lt, _) = one_link(&ds, 0);
    let graph = build_tuple_graph(&lt, &ds).unwrap();
    let dims = EncoderDims {
        d_num: 3,
        d_cat: 3,
        d_text: 3,
        d_out: 4,
    };
    let model = Stage1Model {
        encoders: EncoderParams::init(&ds, &["aux0"], dims, 3).unwrap(),
        gat: GatParams::init(4, 3, ds.class_count(), 0.2, 3),
    };
    let (_, record) = attention_forward(&graph, &model).unwrap();
    for row in &record.matrix {
        let total: f64 = row.iter().sum();
        assert!(
            (total - 1.0).abs() < 1e-6,
            "FAIL formula oracles: attention row sums to {total}"
        );
    }

    pass(
        "formula oracles",
        "length/direction/combined scores, min-max normalization, softmax all match hand values",
    );
}

// ---------------------------------------------------------------------------
// 2. Analytic gradients against central finite differences.

fn flat_data<M: ParamSet + ?Sized>(m: &mut M) -> Vec<f64> {
    let mut out = Vec::new();
    m.visit_params(&mut |p| out.extend_from_slice(&p.data));
    out
}

fn flat_grad<M: ParamSet + ?Sized>(m: &mut M) -> Vec<f64> {
    let mut out = Vec::new();
    m.visit_params(&mut |p| out.extend_from_slice(&p.grad));
    out
}

fn set_entry<M: ParamSet + ?Sized>(m: &mut M, idx: usize, value: f64) {
    let mut seen = 0usize;
    m.visit_params(&mut |p| {
        if idx >= seen && idx < seen + p.data.len() {
            p.data[idx - seen] = value;
        }
        seen += p.data.len();
    });
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// First labeled link of the only auxiliary table of a tiny planted set.
fn one_link(ds: &RelationalDataset, pick: usize) -> (relaug::linker::LabeledTuple, usize) {
    let paths = find_meta_paths(&build_join_graph(ds), &PathScoringConfig::default()).unwrap();
    let cfg = CoresetConfig {
        base_sample_size: SampleSize::Count(1_000_000),
        per_tuple_label_cap: 3,
        seed: 0,
    };
    let links = link_tuples(ds, &paths["aux0"], &cfg).unwrap();
    assert!(!links.is_empty());
    let n = links.len();
    (links[pick % n].clone(), n)
}

#[test]
fn acceptance_2_gradients_match_finite_differences() {
    // Stage 1: full model (encoders + attention + head) on tuple graphs
    // of at most 5 attribute nodes.
    let mut worst_s1 = 0.0f64;
    for trial in 0..20u64 {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec {
            aux_tables: 1,
            base_rows: 12,
            aux_rows: 4,
            noise_attributes: 3, // 5 feature columns -> 5-node tuple graphs
            label_noise: 0.0,
            seed: 100 + trial,
            ..SyntheticSpec::default()
        };
        let ds = generate_synthetic(&spec, dir.path()).unwrap();
        let (lt, _) = one_link(&ds, trial as usize);
        let graph = build_tuple_graph(&lt, &ds).unwrap();
        assert!(graph.node_count() <= 5);
        let dims = EncoderDims {
            d_num: 3,
            d_cat: 3,
            d_text: 3,
            d_out: 4,
        };
        let mut model = Stage1Model {
            encoders: EncoderParams::init(&ds, &["aux0"], dims, 7 + trial).unwrap(),
            gat: GatParams::init(4, 3, ds.class_count(), 0.2, 31 + trial),
        };

        zero_grads(&mut model);
        graph_loss_backward(&mut model, &graph).unwrap();
        let theta = flat_data(&mut model);
        let grads = flat_grad(&mut model);
        for i in 0..theta.len() {
            let h = 1e-5 * theta[i].abs().max(1.0);
            set_entry(&mut model, i, theta[i] + h);
            let up = graph_loss_backward(&mut model, &graph).unwrap();
            set_entry(&mut model, i, theta[i] - h);
            let down = graph_loss_backward(&mut model, &graph).unwrap();
            set_entry(&mut model, i, theta[i]);
            let fd = (up - down) / (2.0 * h);
            worst_s1 = worst_s1.max(rel_err(fd, grads[i]));
        }
    }
    assert!(
        worst_s1 < 1e-4,
        "FAIL gradient check: stage-1 worst relative error {worst_s1:.3e} >= 1e-4"
    );

    // Stage 2: heterogeneous message passing on random graphs of at most
    // 10 nodes.
    let mut worst_s2 = 0.0f64;
    for trial in 0..20u64 {
        let graph = random_hetero_graph(trial);
        assert!(graph.nodes.len() <= 10);
        let adj = graph.in_adjacency();
        let config = Stage2Config {
            d_model: 4,
            layers: 2,
            ..Stage2Config::default()
        };
        let mut params = HgnnParams::init(&graph, &config, 900 + trial).unwrap();
        let ids: Vec<usize> = graph
            .base_nodes()
            .filter(|n| n.label.is_some())
            .map(|n| n.id)
            .collect();

        zero_grads(&mut params);
        loss_and_backward(&graph, &adj, &mut params, &ids).unwrap();
        let theta = flat_data(&mut params);
        let grads = flat_grad(&mut params);
        for i in 0..theta.len() {
            let h = 1e-5 * theta[i].abs().max(1.0);
            set_entry(&mut params, i, theta[i] + h);
            let up = evaluate_loss(&graph, &adj, &params, &ids).unwrap();
            set_entry(&mut params, i, theta[i] - h);
            let down = evaluate_loss(&graph, &adj, &params, &ids).unwrap();
            set_entry(&mut params, i, theta[i]);
            let fd = (up - down) / (2.0 * h);
            worst_s2 = worst_s2.max(rel_err(fd, grads[i]));
        }
    }
    assert!(
        worst_s2 < 1e-4,
        "FAIL gradient check: stage-2 worst relative error {worst_s2:.3e} >= 1e-4"
    );

    pass(
        "gradient finite differences",
        &format!(
            "20 trials each; worst relative error stage 1 {worst_s1:.3e}, stage 2 {worst_s2:.3e}"
        ),
    );
}

fn random_hetero_graph(seed: u64) -> HeteroGraph {
    let mut rng = seeded_rng(seed, "acceptance/hetgraph");
    let n_base = rng.random_range(4..=6);
    let n_aux = rng.random_range(2..=4);
    let mut nodes = Vec::new();
    for i in 0..n_base {
        let class = if i < 2 { i } else { rng.random_range(0..2) };
        nodes.push(HeteroNode {
            id: i,
            node_type: "b".into(),
            key: format!("b{i}"),
            x: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
            label: Some(Label::Class(class)),
            split: None,
        });
    }
    for i in 0..n_aux {
        nodes.push(HeteroNode {
            id: n_base + i,
            node_type: "t#0".into(),
            key: format!("t{i}"),
            x: (0..2).map(|_| rng.random_range(-1.0..1.0)).collect(),
            label: None,
            split: None,
        });
    }
    let mut edges = Vec::new();
    for i in 0..n_aux {
        let aux = n_base + i;
        let hits = rng.random_range(1..=2);
        for _ in 0..hits {
            let b = rng.random_range(0..n_base);
            edges.push(HeteroEdge {
                src: aux,
                dst: b,
                edge_type: EdgeType::new("t#0", Relation::Join, "b"),
                weight: 1.0,
            });
            edges.push(HeteroEdge {
                src: b,
                dst: aux,
                edge_type: EdgeType::new("b", Relation::Join, "t#0"),
                weight: 1.0,
            });
        }
    }
    for i in 0..n_base {
        let j = rng.random_range(0..n_base);
        if i != j {
            edges.push(HeteroEdge {
                src: i,
                dst: j,
                edge_type: EdgeType::new("b", Relation::Similarity, "b"),
                weight: 1.0,
            });
        }
    }
    HeteroGraph {
        base_type: "b".into(),
        task: TaskKind::Classification,
        nodes,
        edges,
    }
}

// ---------------------------------------------------------------------------
// 3. Clique extraction against brute-force enumeration.

#[test]
fn acceptance_3_maximal_clique_oracle() {
    let mut rng = seeded_rng(0, "acceptance/cliques");
    for trial in 0..200 {
        let n: usize = rng.random_range(1..=12);
        let p: f64 = rng.random_range(0.05..0.95);
        let names: Vec<String> = (0..n).map(|i| format!("c{i:02}")).collect();
        let mut adjbits = vec![0u16; n];
        let mut edges = std::collections::BTreeSet::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random_bool(p) {
                    adjbits[u] |= 1 << v;
                    adjbits[v] |= 1 << u;
                    edges.insert((names[u].clone(), names[v].clone()));
                }
            }
        }
        let es = SignificantEdgeSet {
            table: "t".into(),
            threshold: 0.5,
            nodes: names.clone(),
            edges,
        };

        // Brute force: a subset is a clique iff every member is adjacent
        // to all other members; maximal iff no outside vertex extends it.
        let mut want: Vec<Vec<String>> = Vec::new();
        for mask in 1u32..(1 << n) {
            let is_clique = (0..n)
                .filter(|&i| mask & (1 << i) != 0)
                .all(|i| mask & !(u32::from(adjbits[i]) | (1 << i)) == 0);
            if !is_clique {
                continue;
            }
            let maximal = (0..n)
                .filter(|&v| mask & (1 << v) == 0)
                .all(|v| u32::from(adjbits[v]) & mask != mask);
            if maximal {
                want.push(
                    (0..n)
                        .filter(|&i| mask & (1 << i) != 0)
                        .map(|i| names[i].clone())
                        .collect(),
                );
            }
        }
        want.sort();

        let got = extract_cliques(&es, true);
        assert_eq!(
            got.groups, want,
            "FAIL clique oracle: trial {trial} (n={n}, p={p:.2}) disagrees with brute force"
        );

        // Without singletons, isolated attributes disappear and nothing else.
        let no_single = extract_cliques(&es, false);
        let want_ns: Vec<Vec<String>> =
            want.iter().filter(|g| g.len() > 1).cloned().collect();
        assert_eq!(no_single.groups, want_ns);
    }
    pass(
        "maximal clique oracle",
        "200 random graphs (up to 12 nodes) match brute-force enumeration, with and without singletons",
    );
}

// ---------------------------------------------------------------------------
// 4. Tuple linking against a nested-loop multi-way join.

fn write_file(dir: &Path, name: &str, contents: &str) {
    std::fs::write(dir.join(name), contents).unwrap();
}

/// Random 3-table dataset in one of three join shapes, with dangling FKs,
/// null FKs, and null labels mixed in.
fn random_link_dataset(dir: &Path, seed: u64) -> RelationalDataset {
    let mut rng = seeded_rng(seed, "acceptance/linkds");
    let shape = rng.random_range(0..3u8);
    let n_base = rng.random_range(50..=300);
    let n_a1 = rng.random_range(20..=250);
    let n_a2 = rng.random_range(20..=250);

    let fk_cell = |rng: &mut rand_chacha::ChaCha8Rng, n_target: usize| -> String {
        let roll: f64 = rng.random();
        if roll < 0.10 {
            String::new() // null
        } else if roll < 0.18 {
            format!("zz{}", rng.random_range(0..50)) // dangling
        } else {
            format!("k{}", rng.random_range(0..n_target))
        }
    };

    // shape 0: base holds FK to a1, a1 holds FK to a2 (many-to-one hops).
    // shape 1: a1 holds FK to base, a2 holds FK to a1 (one-to-many hops).
    // shape 2: base holds FK to a1, a2 holds FK to a1 (mixed).
    let (base_cols, a1_cols, a2_cols) = match shape {
        0 => (
            r#"[{"name":"id","kind":"primary_key"},{"name":"r1","kind":"foreign_key","fk_target":{"table":"a1","column":"id"}},{"name":"x","kind":"numerical"},{"name":"y","kind":"categorical"}]"#,
            r#"[{"name":"id","kind":"primary_key"},{"name":"r2","kind":"foreign_key","fk_target":{"table":"a2","column":"id"}},{"name":"v","kind":"numerical"}]"#,
            r#"[{"name":"id","kind":"primary_key"},{"name":"u","kind":"numerical"}]"#,
        ),
        1 => (
            r#"[{"name":"id","kind":"primary_key"},{"name":"x","kind":"numerical"},{"name":"y","kind":"categorical"}]"#,
            r#"[{"name":"id","kind":"primary_key"},{"name":"bref","kind":"foreign_key","fk_target":{"table":"b","column":"id"}},{"name":"v","kind":"numerical"}]"#,
            r#"[{"name":"id","kind":"primary_key"},{"name":"a1ref","kind":"foreign_key","fk_target":{"table":"a1","column":"id"}},{"name":"u","kind":"numerical"}]"#,
        ),
        _ => (
            r#"[{"name":"id","kind":"primary_key"},{"name":"r1","kind":"foreign_key","fk_target":{"table":"a1","column":"id"}},{"name":"x","kind":"numerical"},{"name":"y","kind":"categorical"}]"#,
            r#"[{"name":"id","kind":"primary_key"},{"name":"v","kind":"numerical"}]"#,
            r#"[{"name":"id","kind":"primary_key"},{"name":"a1ref","kind":"foreign_key","fk_target":{"table":"a1","column":"id"}},{"name":"u","kind":"numerical"}]"#,
        ),
    };
    let schema = format!(
        r#"{{"tables":[{{"name":"b","file":"b.csv","columns":{base_cols}}},{{"name":"a1","file":"a1.csv","columns":{a1_cols}}},{{"name":"a2","file":"a2.csv","columns":{a2_cols}}}],"base_table":"b","target_column":"y","task":"classification","class_count":2}}"#
    );
    write_file(dir, "schema.json", &schema);

    let mut base = String::new();
    for i in 0..n_base {
        let label = match rng.random_range(0..10u8) {
            0 => "",
            x if x < 5 => "n",
            _ => "p",
        };
        let x: f64 = rng.random_range(-3.0..3.0);
        if shape == 1 {
            base.push_str(&format!("k{i},{x},{label}\n"));
        } else {
            base.push_str(&format!("k{i},{},{x},{label}\n", fk_cell(&mut rng, n_a1)));
        }
    }
    let header = if shape == 1 { "id,x,y\n" } else { "id,r1,x,y\n" };
    write_file(dir, "b.csv", &format!("{header}{base}"));

    let mut a1 = String::new();
    for i in 0..n_a1 {
        let v: f64 = rng.random_range(-3.0..3.0);
        match shape {
            0 => a1.push_str(&format!("k{i},{},{v}\n", fk_cell(&mut rng, n_a2))),
            1 => a1.push_str(&format!("k{i},{},{v}\n", fk_cell(&mut rng, n_base))),
            _ => a1.push_str(&format!("k{i},{v}\n")),
        }
    }
    let header = match shape {
        0 => "id,r2,v\n",
        1 => "id,bref,v\n",
        _ => "id,v\n",
    };
    write_file(dir, "a1.csv", &format!("{header}{a1}"));

    let mut a2 = String::new();
    for i in 0..n_a2 {
        let u: f64 = rng.random_range(-3.0..3.0);
        if shape == 0 {
            a2.push_str(&format!("k{i},{u}\n"));
        } else if shape == 1 {
            a2.push_str(&format!("k{i},{},{u}\n", fk_cell(&mut rng, n_a1)));
        } else {
            a2.push_str(&format!("k{i},{},{u}\n", fk_cell(&mut rng, n_a1)));
        }
    }
    let header = if shape == 0 { "id,u\n" } else { "id,a1ref,u\n" };
    write_file(dir, "a2.csv", &format!("{header}{a2}"));

    load_dataset(dir, "schema.json").unwrap()
}

/// Nested-loop multi-way join: walk the hops forward from every labeled
/// base row, no indexes, and collect distinct (aux key, base key) pairs.
fn oracle_links(ds: &RelationalDataset, path: &MetaPath) -> Vec<(String, String, Label)> {
    let base = ds.base_table();
    let mut pairs: std::collections::BTreeSet<(String, String)> = Default::default();
    let mut labels: BTreeMap<String, Label> = BTreeMap::new();
    for (b_row, b) in base.tuples.iter().enumerate() {
        let Some(label) = ds.base_label(b_row) else {
            continue;
        };
        labels.insert(b.key.clone(), label);
        let mut cur_table = base;
        let mut cur_rows: Vec<usize> = vec![b_row];
        for hop in &path.hops {
            let src = ds.table(&hop.src_table).unwrap();
            assert_eq!(src.name, cur_table.name, "hops chain src to dst");
            let dst = ds.table(&hop.dst_table).unwrap();
            let mut next: std::collections::BTreeSet<usize> = Default::default();
            if hop.fk_on_src {
                let (fk, _) = src.column(&hop.fk_column).unwrap();
                for &r in &cur_rows {
                    if let Value::Str(v) = &src.tuples[r].values[fk] {
                        for (dr, dt) in dst.tuples.iter().enumerate() {
                            if dt.key == *v {
                                next.insert(dr);
                            }
                        }
                    }
                }
            } else {
                let (fk, _) = dst.column(&hop.fk_column).unwrap();
                for &r in &cur_rows {
                    let key = &src.tuples[r].key;
                    for (dr, dt) in dst.tuples.iter().enumerate() {
                        if let Value::Str(v) = &dt.values[fk] {
                            if v == key {
                                next.insert(dr);
                            }
                        }
                    }
                }
            }
            cur_rows = next.into_iter().collect();
            cur_table = dst;
            if cur_rows.is_empty() {
                break;
            }
        }
        for &r in &cur_rows {
            pairs.insert((cur_table.tuples[r].key.clone(), b.key.clone()));
        }
    }
    pairs
        .into_iter()
        .map(|(key, base_key)| {
            let label = labels[&base_key];
            (key, base_key, label)
        })
        .collect()
}

#[test]
fn acceptance_4_join_link_oracle() {
    let uncapped = CoresetConfig {
        base_sample_size: SampleSize::Count(1_000_000),
        per_tuple_label_cap: 1_000_000,
        seed: 0,
    };
    let mut compared = 0usize;
    for trial in 0..20u64 {
        let dir = tempfile::tempdir().unwrap();
        let ds = random_link_dataset(dir.path(), trial);
        let paths =
            find_meta_paths(&build_join_graph(&ds), &PathScoringConfig::default()).unwrap();
        assert!(!paths.is_empty());
        for (table, path) in &paths {
            let mut got: Vec<(String, String, Label)> = link_tuples(&ds, path, &uncapped)
                .unwrap()
                .into_iter()
                .map(|lt| (lt.key, lt.base_key, lt.label))
                .collect();
            got.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
            let want = oracle_links(&ds, path);
            assert_eq!(
                got, want,
                "FAIL join-link oracle: trial {trial} table {table} disagrees with nested-loop join"
            );
            compared += got.len();
        }
    }
    pass(
        "join-link oracle",
        &format!("20 random datasets match the nested-loop multi-way join ({compared} links compared)"),
    );
}

// ---------------------------------------------------------------------------
// 5-7. Planted-signal experiments.

fn planted_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        aux_tables: 3,
        base_rows: 2000,
        aux_rows: 80,
        label_noise: 0.05,
        seed,
        ..SyntheticSpec::default()
    }
}

fn planted_config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        seed,
        stage2: Stage2Config {
            d_model: 32,
            epochs: 60,
            ..Stage2Config::default()
        },
        ..PipelineConfig::default()
    }
}

#[test]
fn acceptance_5_planted_signal_lift() {
    let mut hits = 0;
    let mut lines = Vec::new();
    for seed in 1..=5u64 {
        let t0 = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_synthetic(&planted_spec(seed), dir.path()).unwrap();
        let cfg = planted_config(seed);
        let full = run_in_memory(&ds, &cfg).unwrap();
        let base = run_baseline(&ds, &cfg, Baseline::BaseOnly).unwrap();
        let fa = full.test_metrics.auc_roc.expect("binary task");
        let ba = base.test_metrics.auc_roc.expect("binary task");
        let ok = fa >= 0.85 && ba <= 0.60;
        hits += usize::from(ok);
        lines.push(format!(
            "seed {seed}: full {fa:.3}, base-only {ba:.3} in {:.0?}{}",
            t0.elapsed(),
            if ok { "" } else { " (miss)" }
        ));
    }
    let detail = lines.join("; ");
    assert!(
        hits >= 4,
        "FAIL planted-signal lift: full >= 0.85 and base-only <= 0.60 in only {hits}/5 seeds ({detail})"
    );
    pass(
        "planted-signal lift",
        &format!("{hits}/5 seeds with full AUC >= 0.85 and base-only <= 0.60 ({detail})"),
    );
}

#[test]
fn acceptance_6_planted_pair_ranking() {
    let mut hits = 0;
    let mut lines = Vec::new();
    for seed in 1..=5u64 {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec {
            noise_attributes: 8, // 10 features -> 45 pairs, top 10% = 4
            ..planted_spec(seed)
        };
        let ds = generate_synthetic(&spec, dir.path()).unwrap();
        let cfg = planted_config(seed);
        let records = mine_for_config(&ds, &cfg).unwrap();
        let ca = accumulate(&records[&spec.planted_table_name()]).unwrap();

        let n = ca.nodes.len();
        let mut pairs: Vec<((usize, usize), f64)> = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                pairs.push(((u, v), 0.5 * (ca.a_norm[u][v] + ca.a_norm[v][u])));
            }
        }
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (cx, cy) = spec.planted_pair();
        let xi = ca.nodes.iter().position(|s| *s == cx).unwrap();
        let yi = ca.nodes.iter().position(|s| *s == cy).unwrap();
        let key = (xi.min(yi), xi.max(yi));
        let rank = pairs.iter().position(|(p, _)| *p == key).unwrap() + 1;
        let cutoff = ((pairs.len() as f64) * 0.10).floor().max(1.0) as usize;
        let ok = rank <= cutoff;
        hits += usize::from(ok);
        lines.push(format!(
            "seed {seed}: rank {rank}/{} (cutoff {cutoff}){}",
            pairs.len(),
            if ok { "" } else { " (miss)" }
        ));
    }
    let detail = lines.join("; ");
    assert!(
        hits >= 4,
        "FAIL planted-pair ranking: top-10% rank in only {hits}/5 seeds ({detail})"
    );
    pass(
        "planted-pair ranking",
        &format!("{hits}/5 seeds rank the planted pair in the top 10% ({detail})"),
    );
}

#[test]
fn acceptance_7_ablation_directions() {
    let mut weighted = Vec::new();
    let mut uniform = Vec::new();
    let mut no_sim = Vec::new();
    for seed in 1..=5u64 {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_synthetic(&planted_spec(seed), dir.path()).unwrap();
        let cfg = planted_config(seed);
        let mined = mine_for_config(&ds, &cfg).unwrap();
        let manifests = manifests_for_mode(&ds, &cfg, &mined).unwrap();
        for (bucket, edge_weights, similarity_edges) in [
            (&mut weighted, true, true),
            (&mut uniform, false, true),
            (&mut no_sim, true, false),
        ] {
            let mut c = cfg.clone();
            c.edge_weights = edge_weights;
            c.similarity_edges = similarity_edges;
            let run = complete_from_manifests(&ds, manifests.clone(), &c).unwrap();
            bucket.push(run.test_metrics.auc_roc.expect("binary task"));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mw, mu, mn) = (mean(&weighted), mean(&uniform), mean(&no_sim));
    let d_weights = mw - mu;
    let d_sim = mw - mn;
    println!(
        "ablation deltas over 5 paired seeds: learned edge weights {d_weights:+.4} \
         (with {mw:.4} vs without {mu:.4}); similarity edges {d_sim:+.4} \
         (with {mw:.4} vs without {mn:.4})"
    );
    assert!(
        d_weights >= -0.02,
        "FAIL ablation directions: learned edge weights lose {:.4} mean AUC (> 0.02)",
        -d_weights
    );
    pass(
        "ablation directions",
        &format!("edge-weight delta {d_weights:+.4}, similarity delta {d_sim:+.4} (both reported; weights within tolerance)"),
    );
}

// ---------------------------------------------------------------------------
// 8. Threshold sweep completes; threshold 1 collapses to whole tables.

#[test]
fn acceptance_8_threshold_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        aux_tables: 2,
        base_rows: 400,
        aux_rows: 40,
        label_noise: 0.05,
        seed: 8,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec, dir.path()).unwrap();
    let cfg = PipelineConfig {
        seed: 8,
        stage2: Stage2Config {
            d_model: 16,
            epochs: 30,
            ..Stage2Config::default()
        },
        ..PipelineConfig::default()
    };
    let mut ells: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    ells.push(1.0);
    let points = ell_sweep(&ds, &cfg, &ells).unwrap();
    assert_eq!(points.len(), 10);
    for p in &points[..9] {
        assert!(
            p.metrics.auc_roc.is_some() && p.metrics.accuracy.is_some(),
            "FAIL threshold sweep: no metrics at threshold {}",
            p.ell
        );
    }
    let limit = &points[9];
    assert_eq!(
        (limit.subtable_count, limit.unsplit_tables),
        (2, 2),
        "FAIL threshold sweep: threshold 1 must fall back to one whole sub-table per table"
    );
    let csv = sweep_csv(&points);
    assert_eq!(csv.lines().count(), 11);
    let curve: Vec<String> = points
        .iter()
        .map(|p| format!("{:.1}:{:.3}", p.ell, p.metrics.auc_roc.unwrap_or(f64::NAN)))
        .collect();
    pass(
        "threshold sweep",
        &format!(
            "thresholds 0.1-0.9 emit metric curves (AUC {}), threshold 1.0 is the unsplit fallback",
            curve.join(" ")
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Rerunning the whole pipeline reproduces artifacts byte for byte.

#[test]
fn acceptance_9_rerun_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        aux_tables: 2,
        base_rows: 400,
        aux_rows: 40,
        label_noise: 0.05,
        seed: 42,
        ..SyntheticSpec::default()
    };
    let data_dir = dir.path().join("data");
    generate_synthetic(&spec, &data_dir).unwrap();
    let cfg = PipelineConfig {
        dataset: data_dir,
        out: dir.path().join("first"),
        seed: 42,
        stage2: Stage2Config {
            d_model: 16,
            epochs: 20,
            ..Stage2Config::default()
        },
        ..PipelineConfig::default()
    };
    run_all(&cfg).unwrap();
    let mut again = cfg.clone();
    again.out = dir.path().join("second");
    run_all(&again).unwrap();

    let mut sizes = Vec::new();
    for name in ["predictions.csv", "subtables.json"] {
        let a = std::fs::read(cfg.out.join(name)).unwrap();
        let b = std::fs::read(again.out.join(name)).unwrap();
        assert_eq!(
            a, b,
            "FAIL rerun determinism: {name} differs between identical runs"
        );
        sizes.push(format!("{name} {} bytes", a.len()));
    }
    pass(
        "rerun determinism",
        &format!("two full runs with one seed agree byte for byte ({})", sizes.join(", ")),
    );
}
