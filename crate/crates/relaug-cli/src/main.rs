//! Command-line driver for the relational feature augmentation pipeline.
//!
//! Each subcommand runs one stage against the artifact directory named in
//! the config; `run-all` chains them. Exit codes: 0 success, 2 a required
//! upstream artifact is missing, 3 the config is invalid, 1 anything else.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use relaug::dataset::load_dataset;
use relaug::harness::{ell_sweep, run_ablations, run_baseline, sweep_csv, Baseline};
use relaug::pipeline::{
    cmd_build_graph, cmd_evaluate, cmd_ingest, cmd_link, cmd_plan, cmd_predict, cmd_split,
    cmd_train_stage1, cmd_train_stage2, run_all, Overrides, PipelineConfig,
};
use relaug::synth::{generate_synthetic, SyntheticSpec};

#[derive(Parser)]
#[command(name = "relaug", version, about = "Two-stage relational feature augmentation")]
struct Cli {
    /// Pipeline config file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Significant-edge threshold override.
    #[arg(long, global = true)]
    ell: Option<f64>,
    /// Similarity top-k override.
    #[arg(long, global = true)]
    topk: Option<usize>,
    /// Path-length score weight override.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Join-direction score weight override.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the dataset; write the load report.
    Ingest,
    /// Score join paths and pick one meta-path per auxiliary table.
    Plan,
    /// Link auxiliary tuples to labeled base tuples and build the coreset.
    Link,
    /// Train the per-table attribute-attention miners.
    TrainStage1,
    /// Extract attribute groups and write sub-table manifests.
    Split,
    /// Materialize sub-tables and assemble the heterogeneous graph.
    BuildGraph,
    /// Train the heterogeneous message-passing model.
    TrainStage2,
    /// Write predictions for every base tuple.
    Predict,
    /// Compute metrics on the held-out test split.
    Evaluate,
    /// Generate a planted-signal synthetic dataset.
    Synth {
        /// Generator spec file; built-in defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Directory to write the dataset into.
        #[arg(long)]
        data_out: PathBuf,
    },
    /// Run the switch-ablation grid; optionally baselines and a threshold sweep.
    Ablate {
        /// Seeds, paired across every grid cell.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        /// Also run the reference baselines.
        #[arg(long)]
        baselines: bool,
        /// Attribute budget for the random-k baseline.
        #[arg(long, default_value_t = 4)]
        random_k: usize,
        /// Edge thresholds to sweep, e.g. 0.1,0.3,0.5.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        sweep: Vec<f64>,
    },
    /// Run every stage in order.
    RunAll,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<relaug::Error>() {
        Some(relaug::Error::MissingArtifact { .. }) => 2,
        Some(relaug::Error::Config(_)) => 3,
        _ => 1,
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let path = cli.config.as_ref().ok_or_else(|| {
        relaug::Error::Config("this command needs --config <file>".to_string())
    })?;
    let mut cfg = PipelineConfig::load(path)?;
    cfg.apply(
        &Overrides {
            seed: cli.seed,
            ell: cli.ell,
            topk: cli.topk,
            alpha: cli.alpha,
            beta: cli.beta,
        },
        cli.out.clone(),
    );
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Ingest => {
            let report = cmd_ingest(&load_config(&cli)?)?;
            print!("{report}");
        }
        Command::Plan => {
            let paths = cmd_plan(&load_config(&cli)?)?;
            for (table, path) in &paths {
                println!("{table}: {path}");
            }
        }
        Command::Link => {
            let coreset = cmd_link(&load_config(&cli)?)?;
            println!("coreset: {} base tuples", coreset.base_keys.len());
            for (table, links) in &coreset.links {
                println!("  {table}: {} linked tuples", links.len());
            }
        }
        Command::TrainStage1 => {
            let tables = cmd_train_stage1(&load_config(&cli)?)?;
            if tables.is_empty() {
                println!("no tables trained");
            }
            for table in tables {
                println!("trained {table}");
            }
        }
        Command::Split => {
            let manifests = cmd_split(&load_config(&cli)?)?;
            for m in &manifests {
                if m.groups.is_empty() {
                    println!("{}: whole table", m.table);
                } else {
                    println!("{}: {} group(s)", m.table, m.groups.len());
                }
            }
        }
        Command::BuildGraph => {
            let graph = cmd_build_graph(&load_config(&cli)?)?;
            println!(
                "graph: {} nodes, {} edges, {} node types",
                graph.nodes.len(),
                graph.edges.len(),
                graph.node_types().len()
            );
        }
        Command::TrainStage2 => {
            let out = cmd_train_stage2(&load_config(&cli)?)?;
            let last = out.curve.last().copied().unwrap_or((0, f64::NAN, f64::NAN));
            println!(
                "best epoch {} (final train loss {:.6}, val loss {:.6})",
                out.best_epoch, last.1, last.2
            );
        }
        Command::Predict => {
            let path = cmd_predict(&load_config(&cli)?)?;
            println!("wrote {}", path.display());
        }
        Command::Evaluate => {
            let artifact = cmd_evaluate(&load_config(&cli)?)?;
            println!("{}", serde_json::to_string_pretty(&artifact)?);
        }
        Command::RunAll => {
            let metrics = run_all(&load_config(&cli)?)?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
        }
        Command::Synth { spec, data_out } => {
            let mut spec: SyntheticSpec = match spec {
                Some(path) => {
                    let raw = std::fs::read_to_string(path)
                        .map_err(|e| relaug::Error::io(path, e))?;
                    serde_json::from_str(&raw)
                        .map_err(|e| relaug::Error::Config(format!("{}: {e}", path.display())))?
                }
                None => SyntheticSpec::default(),
            };
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let ds = generate_synthetic(&spec, data_out)?;
            println!(
                "wrote {} tables to {}",
                ds.tables.len(),
                data_out.display()
            );
            print!("{}", ds.load_report);
        }
        Command::Ablate {
            seeds,
            baselines,
            random_k,
            sweep,
        } => {
            let cfg = load_config(&cli)?;
            let ds = load_dataset(&cfg.dataset, "schema.json")?;
            std::fs::create_dir_all(&cfg.out)
                .map_err(|e| relaug::Error::io(&cfg.out, e))?;

            let report = run_ablations(&ds, &cfg, seeds)?;
            write(&cfg.out, "ablation_runs.csv", &report.csv())?;
            write(&cfg.out, "ablation_summary.txt", &report.table())?;
            write(
                &cfg.out,
                "ablation.json",
                &format!("{}\n", serde_json::to_string_pretty(&report)?),
            )?;
            print!("{}", report.table());

            if *baselines {
                let mut rows = serde_json::Map::new();
                for (name, arm) in [
                    ("base_only", Baseline::BaseOnly),
                    ("all_join", Baseline::AllJoin),
                    ("random_k", Baseline::RandomK { k: *random_k }),
                ] {
                    let run = run_baseline(&ds, &cfg, arm)?;
                    println!(
                        "baseline {name}: {}",
                        serde_json::to_string(&run.test_metrics)?
                    );
                    rows.insert(name.to_string(), serde_json::to_value(&run.test_metrics)?);
                }
                write(
                    &cfg.out,
                    "baselines.json",
                    &format!("{}\n", serde_json::to_string_pretty(&rows)?),
                )?;
            }

            if !sweep.is_empty() {
                let points = ell_sweep(&ds, &cfg, sweep)?;
                let csv = sweep_csv(&points);
                write(&cfg.out, "threshold_sweep.csv", &csv)?;
                print!("{csv}");
            }
        }
    }
    Ok(())
}

fn write(dir: &std::path::Path, name: &str, body: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| relaug::Error::io(&path, e))?;
    Ok(())
}
