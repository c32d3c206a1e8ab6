use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sbpsample::blockmodel::{description_length, max_description_length, quality_score, Partition};
use sbpsample::generator::{generate, GeneratorParams};
use sbpsample::graph::{load_edge_list, write_edge_list, Graph};
use sbpsample::harness::{
    align_labels, attach_truth, labels_for, load_source, read_partition, run_experiment_on,
    write_partition, ExperimentConfig,
};
use sbpsample::metrics::{
    compare_features, hungarian_match, modularity, pairwise_f1, ContingencyTable, Features,
};
use sbpsample::pipeline::{run_baseline, run_pipeline, StageSeconds};
use sbpsample::sampling::{sample, write_sample, Algorithm, SamplerConfig, Threshold};
use sbpsample::sbp::{write_trace_csv, SbpConfig};
use sbpsample::stats::{graph_statistics, GraphStats};
use sbpsample::Error;

#[derive(Parser)]
#[command(
    name = "sbpsample",
    version,
    about = "Sampling-accelerated stochastic block partitioning"
)]
struct Cli {
    /// Worker threads for the rayon pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a DCSBM graph from a parameter JSON file.
    Generate {
        params: PathBuf,
        /// Output prefix; writes PREFIX.el, PREFIX.truth and PREFIX.stats.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Structural statistics of a graph as JSON.
    Stats {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a vertex sample.
    Sample {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run SBP on the full graph.
    Detect {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        sbp: SbpArgs,
        /// Partition output ("vertex_id block_id" lines).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Block-count trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        no_timing: bool,
    },
    /// Sample, partition, propagate and fine-tune; prints a JSON report.
    Pipeline {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[command(flatten)]
        sbp: SbpArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the final partition here.
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long)]
        no_timing: bool,
    },
    /// Compare a partition against ground truth.
    Evaluate {
        prediction: PathBuf,
        truth: PathBuf,
        /// Graph for modularity and description length.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        undirected: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a batch experiment and write the result CSV.
    Experiment {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_timing: bool,
    },
    /// Feature ratio table of two `stats` outputs (first / second).
    Compare {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list, one "src dst" pair per line.
    graph: PathBuf,
    /// Treat each line as an undirected edge.
    #[arg(long)]
    undirected: bool,
    /// Ground-truth partition file.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct SamplerArgs {
    #[arg(long, default_value = "ur")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    #[arg(long, default_value = "off")]
    threshold: Threshold,
    #[arg(long, default_value_t = 0.7)]
    ff_p: f64,
}

#[derive(Args)]
struct SbpArgs {
    /// SBP settings as JSON; missing fields take defaults.
    #[arg(long)]
    sbp_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => Failure::Usage(m),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn runtime(e: Error) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                Failure::Runtime(format!("{}: {e}", p.display()))
            })?))
        }
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json(value: &impl Serialize, path: Option<&Path>) -> CliResult<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_graph(args: &GraphArgs) -> CliResult<Graph> {
    let g = load_edge_list(&args.graph, !args.undirected).map_err(runtime)?;
    match &args.truth {
        Some(t) => {
            let pairs = read_partition(t).map_err(runtime)?;
            attach_truth(g, &pairs).map_err(runtime)
        }
        None => Ok(g),
    }
}

fn sampler_config(args: &SamplerArgs, seed: u64) -> CliResult<SamplerConfig> {
    let cfg = SamplerConfig {
        threshold: args.threshold,
        ff_p: args.ff_p,
        seed,
        ..SamplerConfig::new(args.algorithm, args.fraction)
    };
    cfg.validate()?;
    Ok(cfg)
}

fn sbp_config(args: &SbpArgs) -> CliResult<SbpConfig> {
    let base: SbpConfig = match &args.sbp_config {
        Some(p) => read_json(p)?,
        None => SbpConfig::default(),
    };
    let cfg = SbpConfig {
        seed: args.seed,
        ..base
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Evaluation {
    num_vertices: usize,
    predicted_blocks: usize,
    truth_blocks: usize,
    precision: f64,
    recall: f64,
    f1: f64,
    matched_accuracy: f64,
    modularity: Option<f64>,
    description_length: Option<f64>,
    quality_score: Option<f64>,
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Generate { params, out, seed } => {
            let mut params: GeneratorParams = read_json(&params)?;
            if let Some(s) = seed {
                params.seed = s;
            }
            params.validate()?;
            let generated = generate(&params).map_err(runtime)?;
            let g = &generated.graph;
            let with_ext = |ext: &str| {
                let mut p = out.clone().into_os_string();
                p.push(ext);
                PathBuf::from(p)
            };
            let mut el = output(Some(&with_ext(".el")))?;
            write_edge_list(g, &mut el)?;
            el.flush()?;
            let truth = Partition::from_labels(g.truth().unwrap_or_default());
            let mut tf = output(Some(&with_ext(".truth")))?;
            write_partition(g, &truth, &mut tf)?;
            tf.flush()?;
            write_json(&generated.realized, Some(&with_ext(".stats.json")))
        }
        Command::Stats { graph, out } => {
            let g = load_graph(&graph)?;
            let stats: GraphStats = graph_statistics(&g).map_err(runtime)?;
            write_json(&stats, out.as_deref())
        }
        Command::Sample {
            graph,
            sampler,
            seed,
            out,
        } => {
            let cfg = sampler_config(&sampler, seed)?;
            let g = load_graph(&graph)?;
            let s = sample(&g, &cfg).map_err(runtime)?;
            let mut w = output(out.as_deref())?;
            write_sample(&g, &s, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Detect {
            graph,
            sbp,
            out,
            trace,
            no_timing,
        } => {
            let cfg = sbp_config(&sbp)?;
            let g = load_graph(&graph)?;
            let mut result = run_baseline(&g, &cfg).map_err(runtime)?;
            if no_timing {
                result.trace.iter_mut().for_each(|t| t.seconds = 0.0);
            }
            let mut w = output(out.as_deref())?;
            write_partition(&g, &result.partition, &mut w)?;
            w.flush()?;
            if let Some(t) = trace {
                let mut tw = output(Some(&t))?;
                write_trace_csv(&result.trace, &mut tw)?;
                tw.flush()?;
            }
            Ok(())
        }
        Command::Pipeline {
            graph,
            sampler,
            sbp,
            out,
            partition,
            no_timing,
        } => {
            let cfg = sbp_config(&sbp)?;
            let scfg = sampler_config(&sampler, sbp.seed)?;
            let g = load_graph(&graph)?;
            let result = run_pipeline(&g, &scfg, &cfg).map_err(runtime)?;
            let mut report = result.report(&g, &scfg, &cfg).map_err(runtime)?;
            if no_timing {
                report.stage_seconds = StageSeconds::default();
                report.total_seconds = 0.0;
            }
            if let Some(p) = partition {
                let mut w = output(Some(&p))?;
                write_partition(&g, &result.partition, &mut w)?;
                w.flush()?;
            }
            write_json(&report, out.as_deref())
        }
        Command::Evaluate {
            prediction,
            truth,
            graph,
            undirected,
            out,
        } => {
            let pred_pairs = read_partition(&prediction).map_err(runtime)?;
            let truth_pairs = read_partition(&truth).map_err(runtime)?;
            let (pred, tru) = align_labels(&pred_pairs, &truth_pairs)?;
            let scores = pairwise_f1(&pred, &tru)?;
            let table = ContingencyTable::new(&pred, &tru)?;
            let matching = hungarian_match(&table);
            let mut eval = Evaluation {
                num_vertices: pred.len(),
                predicted_blocks: table.rows(),
                truth_blocks: table.cols(),
                precision: scores.precision,
                recall: scores.recall,
                f1: scores.f1,
                matched_accuracy: matching.accuracy,
                modularity: None,
                description_length: None,
                quality_score: None,
            };
            if let Some(path) = graph {
                let g = load_edge_list(&path, !undirected).map_err(runtime)?;
                let labels = labels_for(&g, &pred_pairs)?;
                let p = Partition::from_labels(&labels);
                let h = description_length(&g, &p);
                eval.modularity = modularity(&g, &labels).ok();
                eval.description_length = Some(h);
                eval.quality_score = Some(quality_score(h, max_description_length(&g)));
            }
            write_json(&eval, out.as_deref())
        }
        Command::Experiment {
            config,
            seed,
            out,
            no_timing,
        } => {
            let mut cfg = ExperimentConfig::from_json_file(&config).map_err(|e| match e {
                Error::Json(j) => Failure::Usage(format!("{}: {j}", config.display())),
                e => runtime(e),
            })?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let g = load_source(&cfg.graph).map_err(runtime)?;
            let table = run_experiment_on(&g, &cfg, !no_timing).map_err(runtime)?;
            for e in &table.errors {
                eprintln!("warning: {e}");
            }
            let path = out.or_else(|| cfg.output_dir.as_ref().map(|d| d.join("results.csv")));
            if let Some(dir) = path.as_ref().and_then(|p| p.parent()) {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            let mut w = output(path.as_deref())?;
            table.write_csv(&mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Compare { first, second, out } => {
            let a: GraphStats = read_json(&first)?;
            let b: GraphStats = read_json(&second)?;
            let c = compare_features(&a, &b);
            let mut w = output(out.as_deref())?;
            writeln!(w, "feature,first,second,ratio")?;
            let rows: [(&str, fn(&Features) -> f64); 6] = [
                ("clustering_coefficient", |f| f.clustering_coefficient),
                ("density", |f| f.density),
                ("max_degree_ratio", |f| f.max_degree_ratio),
                ("avg_to_max_degree", |f| f.avg_to_max_degree),
                ("lcc_fraction", |f| f.lcc_fraction),
                ("degree_95_ratio", |f| f.degree_95_ratio),
            ];
            for (name, get) in rows {
                writeln!(
                    w,
                    "{name},{},{},{}",
                    get(&c.first),
                    get(&c.second),
                    get(&c.ratio)
                )?;
            }
            w.flush()?;
            Ok(())
        }
    }
}
