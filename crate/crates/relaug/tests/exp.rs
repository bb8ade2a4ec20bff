//! Temporary tuning experiment; not part of the suite.

use relaug::encoders::{EncoderDims, EncoderParams};
use relaug::gat::{
    attention_forward, build_tuple_graph, stage1_train, GatParams, Stage1Config, Stage1Model,
    TupleGraph,
};
use relaug::pipeline::{mine_for_config, PipelineConfig};
use relaug::rng::derive_seed;
use relaug::subtables::{accumulate, CumulativeAttention};
use relaug::synth::{generate_synthetic, SyntheticSpec};

fn rank_of(ca: &CumulativeAttention, cx: &str, cy: &str) -> (usize, usize) {
    let n = ca.nodes.len();
    let mut pairs: Vec<((usize, usize), f64)> = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            pairs.push(((u, v), 0.5 * (ca.a_norm[u][v] + ca.a_norm[v][u])));
        }
    }
    pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
    let xi = ca.nodes.iter().position(|s| s == cx).unwrap();
    let yi = ca.nodes.iter().position(|s| s == cy).unwrap();
    let key = (xi.min(yi), xi.max(yi));
    (pairs.iter().position(|(p, _)| *p == key).unwrap() + 1, pairs.len())
}

#[test]
#[ignore]
fn replicate() {
    let data_seed = 1u64;
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        aux_tables: 3,
        base_rows: 2000,
        aux_rows: 600,
        noise_attributes: 8,
        label_noise: 0.05,
        seed: data_seed,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec, dir.path()).unwrap();
    let (cx, cy) = spec.planted_pair();
    let planted = spec.planted_table_name();

    // Path A: the real pipeline.
    let cfg = PipelineConfig {
        seed: data_seed,
        ..PipelineConfig::default()
    };
    let records = mine_for_config(&ds, &cfg).unwrap();
    let ca = accumulate(&records[&planted]).unwrap();
    let (rank, total) = rank_of(&ca, &cx, &cy);
    println!(
        "pipeline: {} records, rank {rank}/{total}",
        records[&planted].len()
    );

    // Path B: hand-rolled replica of mine_attention for the planted table.
    let coreset_cfg = relaug::linker::CoresetConfig {
        seed: derive_seed(cfg.seed, "link"),
        ..cfg.coreset
    };
    let paths = relaug::joinplan::find_meta_paths(
        &relaug::joinplan::build_join_graph(&ds),
        &cfg.scoring,
    )
    .unwrap();
    let links = relaug::linker::link_all(&ds, &paths, &coreset_cfg).unwrap();
    let coreset = relaug::linker::build_coreset(&ds, &links, &coreset_cfg).unwrap();
    let graphs: Vec<TupleGraph> = coreset.links[&planted]
        .iter()
        .map(|lt| build_tuple_graph(lt, &ds).unwrap())
        .collect();
    let stage1 = Stage1Config::default();
    let dims = EncoderDims::default();
    let table_seed = derive_seed(cfg.seed, &format!("stage1/{planted}"));
    let mut model = Stage1Model {
        encoders: EncoderParams::init(&ds, &[planted.as_str()], dims, table_seed).unwrap(),
        gat: GatParams::init(
            dims.d_out,
            stage1.d_h,
            ds.class_count(),
            stage1.leaky_slope,
            table_seed,
        ),
    };
    let out = stage1_train(&mut model, &graphs, &stage1, table_seed).unwrap();
    let ca_b = accumulate(&out.records).unwrap();
    let (rank_b, _) = rank_of(&ca_b, &cx, &cy);
    println!(
        "replica:  {} records, rank {rank_b}/{total}, final loss {:.4}",
        out.records.len(),
        out.curve.last().unwrap().1 / graphs.len() as f64
    );

    // Path C: replica records recomputed via attention_forward (should
    // equal path B's records).
    let records_c: Vec<_> = graphs
        .iter()
        .map(|g| attention_forward(g, &model).unwrap().1)
        .collect();
    let ca_c = accumulate(&records_c).unwrap();
    let (rank_c, _) = rank_of(&ca_c, &cx, &cy);
    println!("forward:  rank {rank_c}");
}
