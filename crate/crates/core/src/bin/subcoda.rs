use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subcoda::ingest::Grouping;
use subcoda::metric::Mode;
use subcoda::pipeline::{self, CodaSubset, RunConfig, ScanScope};
use subcoda::vlmc::Threshold;

#[derive(Parser)]
#[command(name = "subcoda", version, about = "Context-tree models of coda rhythm")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Bin width in seconds.
    #[arg(long, global = true, default_value_t = 0.05)]
    delta_t: f64,
    /// Intervals at or above this go to the last bin.
    #[arg(long, global = true, default_value_t = 1.0)]
    t_max: f64,
    /// Maximum context depth.
    #[arg(long, global = true, default_value_t = 10)]
    depth: usize,
    /// Pruning threshold: `auto` or a number.
    #[arg(long, global = true, default_value = "auto")]
    threshold: Threshold,
    /// Groups with fewer codas are skipped.
    #[arg(long, global = true, default_value_t = 200)]
    min_codas: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one context tree per group.
    Fit {
        dataset: PathBuf,
        #[arg(long, default_value = "sample")]
        grouping: Grouping,
    },
    /// Pairwise tree distances.
    Dist {
        /// Tree files, fit manifests or fit output directories.
        #[arg(required = true)]
        models: Vec<PathBuf>,
        #[arg(long, default_value = "symmetric")]
        mode: Mode,
    },
    /// Average-linkage clustering of a distance matrix.
    Cluster {
        matrix: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        /// `label,group` CSV to score cuts against.
        #[arg(long)]
        groups: Option<PathBuf>,
    },
    /// Within-group against between-group distances.
    WithinBetween(WithinBetweenArgs),
    /// Statistical tests on distance matrices.
    Stats {
        #[command(subcommand)]
        command: StatsCommand,
    },
    /// Regress clan-pair style distance on spatial overlap.
    RegressOverlap {
        dataset: PathBuf,
        #[arg(long)]
        overlap: PathBuf,
        #[arg(long, default_value = "all")]
        codas: CodaSubset,
        #[arg(long)]
        by_coda_type: bool,
    },
    /// Fixed-order Markov scan over history lengths.
    MarkovScan {
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        h_min: usize,
        #[arg(long, default_value_t = 6)]
        h_max: usize,
        #[arg(long, default_value = "pooled")]
        scope: ScanScope,
    },
    /// Context-tree AIC against order 0 across bin widths.
    ResolutionScan {
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        delta_ts: Vec<f64>,
        #[arg(long, default_value = "pooled")]
        scope: ScanScope,
    },
    /// Sample synthetic codas from a fitted tree.
    Generate {
        tree: PathBuf,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Label codas with the most likely model.
    Classify {
        dataset: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        models: Vec<PathBuf>,
    },
    /// Train per clan, generate, classify held-out and synthetic codas.
    GenerateClassify { dataset: PathBuf },
    /// End-to-end pipelines.
    Pipeline {
        #[command(subcommand)]
        command: PipelineCommand,
    },
}

#[derive(Args)]
struct WithinBetweenArgs {
    matrix: PathBuf,
    /// `label,group` CSV.
    #[arg(long)]
    groups: PathBuf,
}

#[derive(Subcommand)]
enum StatsCommand {
    WithinBetween(WithinBetweenArgs),
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Fit, distances, clustering, ARI and within/between tests.
    ClanRecovery {
        dataset: PathBuf,
        #[arg(long, default_value = "sample")]
        grouping: Grouping,
    },
}

fn config(g: &Global, command: &str, inputs: Vec<PathBuf>) -> RunConfig {
    RunConfig {
        command: command.to_string(),
        inputs,
        delta_t: g.delta_t,
        t_max: g.t_max,
        depth: g.depth,
        threshold: g.threshold,
        min_codas: g.min_codas,
        seed: g.seed,
        out: g.out.clone(),
        options: Default::default(),
    }
}

fn run(cli: Cli) -> subcoda::Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Fit { dataset, grouping } => {
            let cfg = config(g, "fit", vec![dataset.clone()]).with_option("grouping", grouping);
            let m = pipeline::cmd_fit(&cfg, &dataset, grouping)?;
            println!("fitted {} trees, skipped {}", m.groups.len(), m.skipped.len());
        }
        Command::Dist { models, mode } => {
            let cfg = config(g, "dist", models.clone()).with_option("mode", mode);
            let m = pipeline::cmd_dist(&cfg, &models, mode)?;
            println!("{}x{} distance matrix", m.len(), m.len());
        }
        Command::Cluster { matrix, k, groups } => {
            let mut inputs = vec![matrix.clone()];
            inputs.extend(groups.clone());
            let cfg = config(g, "cluster", inputs).with_option("k", k);
            let r = pipeline::cmd_cluster(&cfg, &matrix, k, groups.as_deref())?;
            if let Some(ari) = r.ari {
                println!("ARI at k={}: {ari}", k.unwrap_or_default());
            }
            if let Some(s) = r.sweep {
                println!("best ARI {} at k={}", s.best_ari, s.best_k);
            }
        }
        Command::WithinBetween(a) | Command::Stats { command: StatsCommand::WithinBetween(a) } => {
            let cfg = config(g, "within-between", vec![a.matrix.clone(), a.groups.clone()]);
            let r = pipeline::cmd_within_between(&cfg, &a.matrix, &a.groups)?;
            println!(
                "within mean {} (n={}), between mean {} (n={}), KS p={}, Welch p={}",
                r.mean_within, r.n_within, r.mean_between, r.n_between, r.ks.p_value, r.welch.p_value
            );
        }
        Command::RegressOverlap {
            dataset,
            overlap,
            codas,
            by_coda_type,
        } => {
            let cfg = config(g, "regress-overlap", vec![dataset.clone(), overlap.clone()])
                .with_option("codas", codas)
                .with_option("by_coda_type", by_coda_type);
            let r = pipeline::cmd_regress_overlap(&cfg, &dataset, &overlap, codas, by_coda_type)?;
            let o = &r.overall;
            println!(
                "slope {} (p={}, r2={}), {:.0}% CI [{}, {}] over {} pairs",
                o.slope,
                o.p_value,
                o.r_squared,
                o.ci.level * 100.0,
                o.ci.lower,
                o.ci.upper,
                o.n_pairs
            );
        }
        Command::MarkovScan {
            dataset,
            h_min,
            h_max,
            scope,
        } => {
            let cfg = config(g, "markov-scan", vec![dataset.clone()])
                .with_option("h_min", h_min)
                .with_option("h_max", h_max)
                .with_option("scope", scope);
            for (label, scan) in pipeline::cmd_markov_scan(&cfg, &dataset, scope, h_min, h_max)? {
                println!(
                    "{label}: AIC minimal at h={}, variance peaks at h={}",
                    scan.argmin_aic(),
                    scan.argmax_variance()
                );
            }
        }
        Command::ResolutionScan {
            dataset,
            delta_ts,
            scope,
        } => {
            let cfg = config(g, "resolution-scan", vec![dataset.clone()])
                .with_option("delta_ts", &delta_ts)
                .with_option("scope", scope);
            for (label, scan) in pipeline::cmd_resolution_scan(&cfg, &dataset, scope, &delta_ts)? {
                println!("{label}: best delta_t {}", scan.best_delta_t);
            }
        }
        Command::Generate { tree, n } => {
            let cfg = config(g, "generate", vec![tree.clone()]).with_option("n", n);
            let codas = pipeline::cmd_generate(&cfg, &tree, n)?;
            println!("generated {} codas", codas.len());
        }
        Command::Classify { dataset, models } => {
            let mut inputs = vec![dataset.clone()];
            inputs.extend(models.iter().cloned());
            let cfg = config(g, "classify", inputs);
            let s = pipeline::cmd_classify(&cfg, &dataset, &models)?;
            match s.accuracy {
                Some(a) => println!("classified {} codas, accuracy {a}", s.n_codas),
                None => println!("classified {} codas", s.n_codas),
            }
        }
        Command::GenerateClassify { dataset } => {
            let cfg = config(g, "generate-classify", vec![dataset.clone()]);
            let r = pipeline::cmd_generate_and_classify(&cfg, &dataset)?;
            println!(
                "held-out accuracy {}, synthetic accuracy {}",
                r.accuracy_real, r.accuracy_synthetic
            );
        }
        Command::Pipeline {
            command: PipelineCommand::ClanRecovery { dataset, grouping },
        } => {
            let cfg = config(g, "pipeline clan-recovery", vec![dataset.clone()]).with_option("grouping", grouping);
            let r = pipeline::cmd_pipeline_clan_recovery(&cfg, &dataset, grouping)?;
            println!(
                "ARI {} at k={}; within/between KS p={}",
                r.ari, r.k, r.comparison.ks.p_value
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let out = cli.global.out.clone();
    match run(cli) {
        Ok(()) => {
            println!("outputs in {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
