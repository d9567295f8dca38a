use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use ii20_core::dataset::synth::{self, SynthConfig};
use ii20_core::dataset::{Collection, CollectionManifest};
use ii20_core::engine::Dataset;
use ii20_core::pq::{KnnBuildConfig, KnnMatrix, PqConfig, PqIndex, DEFAULT_KNN};
use ii20_harness::grid::{run_grid, GridSpec};
use ii20_service::{router, SessionStore};

/// Relative paths given on the command line resolve against this directory when set.
const DATA_ROOT_ENV: &str = "II20_DATA_ROOT";

#[derive(Parser)]
#[command(name = "ii20", version, about = "Interactive image categorization engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labelled collection.
    GenSynth(GenSynth),
    /// Validate a collection manifest and record its checksum.
    Ingest {
        manifest: PathBuf,
    },
    #[command(subcommand)]
    Index(IndexCommand),
    /// Serve the HTTP session API over one dataset.
    Serve(Serve),
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct GenSynth {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    clusters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rare clusters, each paired with a look-alike cluster.
    #[arg(long, default_value_t = 0)]
    needles: usize,
    #[arg(long, default_value_t = 128)]
    abstract_dim: usize,
    #[arg(long, default_value_t = 512)]
    concept_dim: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Train a PQ codebook and encode the collection.
    Build {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = PqConfig::default().m)]
        m: usize,
        #[arg(long, default_value_t = PqConfig::default().k_cap)]
        k_cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Precompute the k nearest neighbours of every image.
    KnnMatrix {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_KNN)]
        k: usize,
    },
}

#[derive(Args)]
struct Serve {
    /// Collection manifest.
    #[arg(long)]
    dataset: PathBuf,
    /// Saved PQ index; built on startup when absent.
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    knn: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8020)]
    port: u16,
    /// Sessions are kept in memory only when absent.
    #[arg(long)]
    sessions_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run a simulated-user grid and write metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve(p: &Path) -> PathBuf {
    match std::env::var_os(DATA_ROOT_ENV) {
        Some(root) if p.is_relative() => Path::new(&root).join(p),
        _ => p.to_path_buf(),
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::GenSynth(g) => {
            let cfg = SynthConfig {
                n: g.n,
                clusters: g.clusters,
                seed: g.seed,
                needles: g.needles,
                abstract_dim: g.abstract_dim,
                concept_dim: g.concept_dim,
                ..SynthConfig::default()
            };
            let out = resolve(&g.out);
            let manifest = synth::write(&cfg, &out)?;
            println!("{}", manifest.display());
        }
        Command::Ingest { manifest } => {
            let path = resolve(&manifest);
            let mut m = CollectionManifest::load(&path)?;
            let c = Collection::from_manifest(&m)?;
            m.checksum = Some(m.compute_checksum()?);
            m.save(&path)?;
            println!("{} images, {}", c.len(), m.checksum.as_deref().unwrap_or_default());
        }
        Command::Index(IndexCommand::Build {
            dataset,
            out,
            m,
            k_cap,
            seed,
        }) => {
            let c = Collection::load(resolve(&dataset))?;
            let cfg = PqConfig {
                m,
                k_cap,
                seed,
                ..PqConfig::default()
            };
            PqIndex::build(&c, &cfg)?.save(resolve(&out))?;
        }
        Command::Index(IndexCommand::KnnMatrix { index, out, k }) => {
            let index = PqIndex::load(resolve(&index))?;
            let knn = index.build_knn(&KnnBuildConfig {
                k,
                ..KnnBuildConfig::default()
            })?;
            knn.save(resolve(&out))?;
        }
        Command::Serve(s) => serve(s)?,
        Command::Bench(BenchCommand::Run { config, out }) => {
            let spec = GridSpec::load(resolve(&config))?;
            let report = run_grid(&spec)?;
            let out = resolve(&out);
            report.write(&out)?;
            for f in &report.failures {
                log::error!("{}/{}/{} seed {}: {}", f.dataset, f.engine, f.actor, f.seed, f.error);
            }
            println!(
                "{} runs, {} failures, reports in {}",
                report.results.len(),
                report.failures.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn serve(s: Serve) -> anyhow::Result<()> {
    let collection = Collection::load(resolve(&s.dataset))?;
    let index = match &s.index {
        Some(p) => PqIndex::load(resolve(p))?,
        None => {
            log::info!("no index given, building one");
            PqIndex::build(&collection, &PqConfig::default())?
        }
    };
    let knn = s.knn.as_ref().map(|p| KnnMatrix::load(resolve(p))).transpose()?;
    let data = Dataset::new(collection, index, knn)?;
    let store = Arc::new(SessionStore::open(data, s.sessions_dir.as_ref().map(|p| resolve(p)))?);
    let addr: SocketAddr = format!("{}:{}", s.host, s.port)
        .parse()
        .with_context(|| format!("bad listen address {}:{}", s.host, s.port))?;
    tokio::runtime::Runtime::new()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("serving {} on http://{addr}", store.dataset_name());
        axum::serve(listener, router(store))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
