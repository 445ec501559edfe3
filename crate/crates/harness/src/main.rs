use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use specband_core::{
    build_knn_graph, build_laplacian, eigendecompose, generate_barabasi_albert, Matrix64, PolicyKind, Similarity,
    WeightLaw, WeightedGraph64,
};
use specband_harness::config::{ExperimentConfig, GraphSource, NormBound, PolicySpec};
use specband_harness::experiment::{bound_checks, run_experiment_cached};
use specband_harness::output::emit_outputs;
use specband_harness::pipeline::{prepare_ratings, write_features_csv};
use specband_harness::timing::{time_complexity_study, write_timing_csv};

#[derive(Parser)]
#[command(name = "specband", version, about = "Spectral bandit experiments on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiments
    #[command(subcommand)]
    Bench(Bench),
    /// Laplacian eigenvalues of an edge-list graph, as CSV
    Spectrum {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Effective dimension d(T) for T = 1..=tmax, as CSV
    Effdim {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 500)]
        tmax: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Graph construction
    #[command(subcommand)]
    Graph(GraphCmd),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long = "t", default_value_t = 200)]
    horizon: u64,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0.001)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Environment noise level R
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Comma-separated: sucb, sts, lucb, lts
    #[arg(long, default_value = "sucb,sts,lucb,lts")]
    policies: String,
    /// Norm bound C for every policy (default: exact for synthetic graphs, 1 for ratings)
    #[arg(long = "c")]
    norm_bound: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn config(&self, graph: GraphSource, smooth_k: usize) -> Result<ExperimentConfig> {
        let policies = self
            .policies
            .split(',')
            .map(|s| {
                let kind: PolicyKind = s.trim().parse()?;
                Ok(PolicySpec {
                    delta: self.delta,
                    lambda: self.lambda,
                    norm_bound: self.norm_bound.map(NormBound::Value),
                    ..PolicySpec::new(kind)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = ExperimentConfig {
            horizon: self.horizon,
            num_runs: self.runs,
            base_seed: self.seed,
            smooth_k,
            noise: self.noise,
            output_dir: self.out.clone(),
            graph,
            policies,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Bench {
    /// BA graphs, fresh graph and α* per run
    Synthetic {
        #[arg(long, default_value_t = 250)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        m: usize,
        /// Support size of α* over the smoothest eigenvectors
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value = "uniform")]
        weights: WeightLaw,
        #[command(flatten)]
        common: Common,
    },
    /// Item graph from a ratings CSV (user,item,rating); one random user per run
    Ratings {
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value_t = 10)]
        rank: usize,
        #[arg(long, default_value_t = 0.1)]
        mu: f64,
        #[arg(long, default_value_t = 10)]
        knn: usize,
        #[arg(long, default_value_t = 50)]
        iters: usize,
        #[arg(long, default_value = "cosine")]
        similarity: Similarity,
        #[command(flatten)]
        common: Common,
    },
    /// Per-step time of SpectralUCB vs SpectralTS over graph sizes
    Timing {
        #[arg(long, value_delimiter = ',', default_value = "128,256,512")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a TOML experiment config
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output_dir from the config
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Barabási–Albert graph as an edge list
    GenBa {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "uniform")]
        weights: WeightLaw,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// kNN similarity graph over the rows of a feature CSV (header, label column, then numbers)
    Knn {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value = "cosine")]
        similarity: Similarity,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_graph(path: &Path) -> Result<WeightedGraph64> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    WeightedGraph64::read_edge_list(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn read_features(path: &Path) -> Result<Matrix64> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(1)
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}: bad number on data row {}", path.display(), i + 1))?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no feature rows", path.display());
    }
    if rows.iter().any(|r| r.len() != rows[0].len() || r.is_empty()) {
        bail!("{}: ragged or empty feature rows", path.display());
    }
    Ok(Matrix64::from_rows(&rows))
}

fn run_bench(cfg: &ExperimentConfig) -> Result<()> {
    let out = &cfg.output_dir;
    let cache = out.join("cache");
    if let GraphSource::KnnFromRatings {
        path,
        rank,
        mu,
        k,
        iters,
        als_seed,
        similarity,
    } = &cfg.graph
    {
        let opts = specband_core::AlsOptions {
            rank: *rank,
            reg: *mu,
            iters: *iters,
            seed: *als_seed,
        };
        let prepared = prepare_ratings(path, opts, *k, *similarity, Some(&cache))?;
        std::fs::create_dir_all(out)?;
        write_features_csv(&prepared, &out.join("item_features.csv"))?;
    }
    let result = run_experiment_cached(cfg, Some(&cache))?;
    emit_outputs(cfg, &result, out)?;
    let checks = bound_checks(&result);
    println!(
        "{:<14} {:>12} {:>10} {:>10} {:>8}",
        "policy", "regret", "se", "step_ms", "bound"
    );
    for (p, label) in result.labels.iter().enumerate() {
        let held = checks.iter().filter(|c| c[p].satisfied).count();
        println!(
            "{:<14} {:>12.3} {:>10.3} {:>10.4} {:>5}/{}",
            label,
            result.final_mean(p),
            result.stderr_regret[p].last().copied().unwrap_or(0.0),
            result.mean_step_ms[p],
            held,
            checks.len()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Bench(Bench::Synthetic {
            n,
            m,
            k,
            weights,
            common,
        }) => {
            let cfg = common.config(
                GraphSource::Ba {
                    n,
                    m,
                    weight_law: weights,
                },
                k,
            )?;
            run_bench(&cfg)
        }
        Command::Bench(Bench::Ratings {
            file,
            rank,
            mu,
            knn,
            iters,
            similarity,
            common,
        }) => {
            let graph = GraphSource::KnnFromRatings {
                path: file,
                rank,
                mu,
                k: knn,
                iters,
                als_seed: common.seed,
                similarity,
            };
            let cfg = common.config(graph, 1)?;
            run_bench(&cfg)
        }
        Command::Bench(Bench::Timing {
            sizes,
            steps,
            seed,
            out,
        }) => {
            if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
                bail!("--sizes must be strictly ascending");
            }
            let rows = time_complexity_study(&sizes, steps, seed)?;
            let mut w = sink(out.as_deref())?;
            write_timing_csv(&rows, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Bench(Bench::Run { config, out }) => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            run_bench(&cfg)
        }
        Command::Spectrum { graph, lambda, out } => {
            let basis = eigendecompose(&build_laplacian(&read_graph(&graph)?), lambda)?;
            let mut w = sink(out.as_deref())?;
            writeln!(w, "index,eigenvalue")?;
            for (i, e) in basis.lap_eigenvalues().iter().enumerate() {
                writeln!(w, "{i},{e}")?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Effdim {
            graph,
            lambda,
            tmax,
            out,
        } => {
            let basis = eigendecompose(&build_laplacian(&read_graph(&graph)?), lambda)?;
            let mut w = sink(out.as_deref())?;
            writeln!(w, "T,d")?;
            for t in 1..=tmax {
                writeln!(w, "{t},{}", basis.effective_dimension(t))?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Graph(GraphCmd::GenBa {
            n,
            m,
            seed,
            weights,
            out,
        }) => {
            let g: WeightedGraph64 = generate_barabasi_albert(n, m, seed, weights)?;
            let mut w = sink(out.as_deref())?;
            g.write_edge_list(&mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Graph(GraphCmd::Knn {
            features,
            k,
            similarity,
            out,
        }) => {
            let g = build_knn_graph(&read_features(&features)?, k, similarity)?;
            let mut w = sink(out.as_deref())?;
            g.write_edge_list(&mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}
