//! Command line front end. Every subcommand reads and writes one bundle
//! directory; see `topiclink --help`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topiclink::config::RunConfig;
use topiclink::corpus::synth::{self, SynthConfig};
use topiclink::corpus::write_corpus;
use topiclink::pipeline::{self, CellStatus};
use topiclink::service::{self, ServiceState};
use topiclink::store::Bundle;
use topiclink::{Error, Result};

#[derive(Parser)]
#[command(name = "topiclink", version, about = "Hierarchical topics and topic-material link prediction")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML file with the full run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set hierarchy.k_max=8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Print results as JSON.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a JSONL corpus and build the TF-IDF matrix.
    Ingest {
        corpus: PathBuf,
        #[arg(long, env = "TOPICLINK_BUNDLE")]
        out: PathBuf,
        #[arg(long)]
        min_df: Option<usize>,
    },
    /// Build the topic hierarchy.
    Hierarchy {
        #[arg(env = "TOPICLINK_BUNDLE")]
        bundle: PathBuf,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        s_min: Option<usize>,
        #[arg(long)]
        d_max: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the topic-material property matrix.
    Propmatrix {
        #[arg(env = "TOPICLINK_BUNDLE")]
        bundle: PathBuf,
        #[arg(long)]
        facet: Option<String>,
        #[arg(long)]
        assoc_min: Option<usize>,
        #[arg(long)]
        coverage_floor: Option<usize>,
    },
    /// Fit the Boolean plus logistic ensemble.
    Fit {
        #[arg(env = "TOPICLINK_BUNDLE")]
        bundle: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-validate and rank held-out materials.
    Evaluate {
        #[arg(env = "TOPICLINK_BUNDLE")]
        bundle: PathBuf,
        #[arg(long)]
        target_query: Option<String>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        negative_ratio: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the highest-scoring cells.
    Predict {
        #[arg(env = "TOPICLINK_BUNDLE")]
        bundle: PathBuf,
        #[arg(long, default_value_t = 20)]
        top: usize,
        /// unknown, zero, one or all
        #[arg(long, default_value = "unknown")]
        status: String,
    },
    /// Serve the read-only HTTP API.
    Serve {
        #[arg(env = "TOPICLINK_BUNDLE")]
        bundle: PathBuf,
        #[arg(long, env = "TOPICLINK_PORT")]
        port: Option<u16>,
        #[arg(long)]
        host: Option<String>,
        #[arg(long, env = "TOPICLINK_CORS_ORIGIN")]
        cors_origin: Option<String>,
    },
    /// Write a synthetic corpus.
    Synth {
        #[arg(long, default_value = synth::PLANTED_TMD)]
        preset: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn push<T: ToString>(sets: &mut Vec<String>, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        let v = v.to_string();
        // quote strings so they are never read as another TOML type
        match v.parse::<f64>() {
            Ok(_) => sets.push(format!("{key}={v}")),
            Err(_) => sets.push(format!("{key}={}", toml_string(&v))),
        }
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn resolve(global: &Global, bundle: &Path, flags: Vec<String>) -> Result<RunConfig> {
    let mut sets = global.sets.clone();
    sets.extend(flags);
    let mut config = pipeline::resolve_config(Some(bundle), global.config.as_deref(), &sets)?;
    config.paths.bundle = Some(bundle.to_path_buf());
    Ok(config)
}

fn emit<T: serde::Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
    } else {
        println!("{}", text());
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Ingest { corpus, out, min_df } => {
            let mut flags = Vec::new();
            push(&mut flags, "tfidf.min_df", &min_df);
            let mut config = resolve(g, &out, flags)?;
            config.paths.corpus = Some(corpus.clone());
            let s = pipeline::run_ingest(&corpus, &out, &config)?;
            emit(g.json, &s, || {
                format!(
                    "documents {}\nvocabulary {}\nnonzeros {}\nfacets {}",
                    s.documents,
                    s.vocabulary,
                    s.nonzeros,
                    s.facets.join(", ")
                )
            });
        }
        Command::Hierarchy { bundle, k_min, k_max, s_min, d_max, seed } => {
            let mut flags = Vec::new();
            push(&mut flags, "hierarchy.k_min", &k_min);
            push(&mut flags, "hierarchy.k_max", &k_max);
            push(&mut flags, "hierarchy.s_min", &s_min);
            push(&mut flags, "hierarchy.d_max", &d_max);
            push(&mut flags, "hierarchy.seed", &seed);
            let config = resolve(g, &bundle, flags)?;
            let s = pipeline::run_hierarchy(&bundle, &config)?;
            emit(g.json, &s, || {
                let mut out = String::from("depth nodes\n");
                for (d, n) in s.nodes_per_depth.iter().enumerate() {
                    out += &format!("{d:>5} {n}\n");
                }
                out + &format!("topics {} leaves {} root rank {}", s.total_topics, s.leaves, s.root_rank.map_or("-".into(), |k| k.to_string()))
            });
        }
        Command::Propmatrix { bundle, facet, assoc_min, coverage_floor } => {
            let mut flags = Vec::new();
            push(&mut flags, "property.facet", &facet);
            push(&mut flags, "property.assoc_min", &assoc_min);
            push(&mut flags, "property.coverage_floor", &coverage_floor);
            let config = resolve(g, &bundle, flags)?;
            let s = pipeline::run_propmatrix(&bundle, &config)?;
            emit(g.json, &s, || {
                format!(
                    "{} topics x {} materials\nones {} zeros {} unknown {}\ndensity {:.4}\nunknown fraction {:.4}",
                    s.topics, s.materials, s.ones, s.zeros, s.unknown, s.density, s.unknown_fraction
                )
            });
        }
        Command::Fit { bundle, lambda, learning_rate, epochs, seed } => {
            let mut flags = Vec::new();
            push(&mut flags, "ensemble.lmf.lambda", &lambda);
            push(&mut flags, "ensemble.lmf.learning_rate", &learning_rate);
            push(&mut flags, "ensemble.lmf.epochs", &epochs);
            push(&mut flags, "fit_seed", &seed);
            let config = resolve(g, &bundle, flags)?;
            let s = pipeline::run_fit(&bundle, &config)?;
            emit(g.json, &s, || {
                format!(
                    "selected rank {}\nhamming error {}\nlogistic loss {:.4}",
                    s.rank, s.hamming_error, s.lmf_loss
                )
            });
        }
        Command::Evaluate { bundle, target_query, folds, negative_ratio, seed } => {
            let mut flags = Vec::new();
            push(&mut flags, "evaluate.target_query", &target_query);
            push(&mut flags, "evaluate.cv.folds", &folds);
            push(&mut flags, "evaluate.cv.negative_ratio", &negative_ratio);
            push(&mut flags, "evaluate.seed", &seed);
            let config = resolve(g, &bundle, flags)?;
            let a = pipeline::run_evaluate(&bundle, &config)?;
            emit(g.json, &a, || {
                let r = &a.report;
                let mut out = format!("target topics {}\n", a.target_topics.join(" "));
                out += &format!("target materials {}\n", a.target_materials.join(" "));
                for (k, v) in &r.hit_at {
                    let (lo, hi) = r.ci95[k];
                    out += &format!("hit@{k} {v:.3} [{lo:.3}, {hi:.3}]\n");
                }
                out += &format!(
                    "median positive {:.3} negative {:.3}\n",
                    r.separation.positive.median, r.separation.negative.median
                );
                out += "material score set\n";
                for row in &a.ranking.rows {
                    out += &format!("{} {:.3} {}\n", row.material, row.score, row.set);
                }
                out.trim_end().to_string()
            });
        }
        Command::Predict { bundle, top, status } => {
            let status = CellStatus::parse(&status)?;
            let rows = pipeline::run_predict(&bundle, status, top)?;
            emit(g.json, &rows, || {
                let mut out = String::from("topic\tmaterial\tscore\tstatus\tsupport\n");
                for p in &rows {
                    out += &format!(
                        "{}\t{}\t{:.4}\t{}\t{}\n",
                        p.topic, p.material, p.score, p.status.name(), p.provenance
                    );
                }
                out.trim_end().to_string()
            });
        }
        Command::Serve { bundle, port, host, cors_origin } => {
            let mut flags = Vec::new();
            push(&mut flags, "serve.port", &port);
            push(&mut flags, "serve.host", &host);
            push(&mut flags, "serve.cors_origin", &cors_origin);
            let config = resolve(g, &bundle, flags)?;
            let state = ServiceState::from_bundle(&Bundle::open(&bundle)?)?;
            eprintln!(
                "serving {} on http://{}:{}",
                bundle.display(),
                config.serve.host,
                config.serve.port
            );
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("starting runtime", e))?;
            rt.block_on(service::serve(state, &config.serve))?;
        }
        Command::Synth { preset, out, seed } => {
            let mut config = SynthConfig::preset(&preset)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let corpus = synth::generate(&config)?;
            write_corpus(&out, &corpus.docs)?;
            emit(g.json, &config, || {
                format!("wrote {} documents to {}", corpus.docs.len(), out.display())
            });
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::FAILURE
        }
    }
}
