//! Command-line front end: argument parsing, file I/O and exit codes around
//! the `ncvi` library.
//!
//! Exit codes: 0 on success, 1 for bad arguments or input files, 2 when
//! inference fails numerically. Diagnostics go to standard error as a single
//! line. Every command writes an objective trace CSV next to its output.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ncvi::eval::{heldout_corpus, metrics_csv, MetricReport};
use ncvi::io::{
    format_ctm_params, format_gaussian, parse_corpus, parse_labeled, parse_task_dir, read_ctm_params, read_gaussian, write_file,
};
use ncvi::{
    blr_fit, blr_predict_label, blr_predict_loglik, ctm_em_fit, hblr_fit_em, unigram_infer, BlrPrior, Config, CtmModel, Error,
    Gaussian, HblrOptions, HierPrior, InferenceTrace, Method, TraceRecord, UnigramModel,
};

#[derive(Debug, Parser)]
#[command(name = "ncvi", version, about = "Mean-field variational inference for nonconjugate models")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Worker threads for per-document and per-task inference (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Seed for parameter initialization and held-out splits.
    #[arg(long, global = true, default_value_t = ncvi::eval::DEFAULT_SPLIT_SEED)]
    seed: u64,
    /// Convergence threshold on the change of the variational mean.
    #[arg(long, global = true)]
    conv_tol: Option<f64>,
    /// Maximum coordinate-ascent iterations per inference problem.
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Record wall-clock seconds in trace files (otherwise written as 0).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a correlated topic model by variational EM.
    FitCtm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "laplace")]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        em_iters: usize,
    },
    /// Held-out per-word log likelihood of a corpus under a fitted model.
    EvalCtm {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "laplace")]
        method: Method,
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior of a Bayesian logistic regression with a N(0, I) prior.
    FitBlr {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "laplace")]
        method: Method,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hierarchical logistic regression over one task file per problem.
    FitHblr {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long, default_value = "laplace")]
        method: Method,
        /// Degrees of freedom as an offset from the covariate dimension.
        #[arg(long, default_value_t = 100.0)]
        nu_offset: f64,
        /// Scale of the inverse-Wishart matrix (multiplies the identity).
        #[arg(long, default_value_t = 0.01)]
        phi0: f64,
        /// Scale of the prior covariance of the shared mean (multiplies the identity).
        #[arg(long, default_value_t = 0.01)]
        phi1: f64,
        #[arg(long, default_value_t = 20)]
        em_iters: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy and log predictive likelihood of a posterior on test data.
    EvalBlr {
        #[arg(long)]
        posterior: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior over the log-weights of the hierarchical unigram model.
    InferUnigram {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "laplace")]
        method: Method,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let line = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("ncvi: {}", line.trim_start_matches("error: "));
            return 1;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ncvi: {}", e.to_string().replace('\n', " "));
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn execute(cli: Cli) -> ncvi::Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli.global, cli.command))
}

fn config(global: &GlobalOpts, method: Method) -> ncvi::Result<Config> {
    let mut cfg = Config::with_method(method);
    if let Some(tol) = global.conv_tol {
        cfg.conv_tol = tol;
    }
    if let Some(iters) = global.max_iters {
        cfg.max_outer_iters = iters;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn trace_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".trace.csv");
    PathBuf::from(name)
}

fn write_trace(path: &Path, trace: &InferenceTrace, timing: bool) -> ncvi::Result<()> {
    write_file(path, &trace.to_csv(timing))
}

/// Prefixes input errors with the offending path.
fn with_path<T>(path: &Path, r: ncvi::Result<T>) -> ncvi::Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::Validation { line, message } => Error::Validation {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::Input(m) => Error::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Traces of independent problems laid end to end, renumbered from 1.
fn concat_traces(traces: &[InferenceTrace]) -> InferenceTrace {
    let mut out = InferenceTrace::default();
    for r in traces.iter().flat_map(|t| &t.records) {
        out.push(TraceRecord {
            iteration: out.len() + 1,
            ..*r
        });
    }
    out
}

fn dispatch(global: &GlobalOpts, command: Command) -> ncvi::Result<()> {
    match command {
        Command::FitCtm {
            corpus,
            k,
            method,
            out,
            em_iters,
        } => {
            let data = with_path(&corpus, parse_corpus(&corpus))?;
            let fit = ctm_em_fit(&data.docs, k, data.vocab_size, &config(global, method)?, em_iters, global.seed)?;
            write_file(&out, &format_ctm_params(&fit.params))?;
            write_trace(&trace_path(&out), &fit.trace, global.timing)
        }
        Command::EvalCtm {
            model,
            corpus,
            method,
            out,
        } => {
            let params = with_path(&model, read_ctm_params(&model))?;
            let data = with_path(&corpus, parse_corpus(&corpus))?;
            if data.vocab_size > params.vocab_size() {
                return Err(Error::Input(format!(
                    "corpus vocabulary {} exceeds model vocabulary {}",
                    data.vocab_size,
                    params.vocab_size()
                )));
            }
            let report = heldout_corpus(&CtmModel::new(params)?, &data.docs, &config(global, method)?, global.seed)?;
            let corpus_level = MetricReport::new("heldout_loglik_per_word_total", vec![("corpus".into(), report.per_word())]);
            write_file(&out, &metrics_csv(&[report.per_doc, corpus_level]))?;
            write_trace(&trace_path(&out), &concat_traces(&report.traces), global.timing)
        }
        Command::FitBlr { data, method, out } => {
            let labeled = with_path(&data, parse_labeled(&data))?;
            let fit = blr_fit(&labeled.instances, &BlrPrior::standard(labeled.dim), method, &config(global, method)?)?;
            write_file(&out, &format_gaussian(&fit.q))?;
            write_trace(&trace_path(&out), &fit.trace(), global.timing)
        }
        Command::FitHblr {
            tasks,
            method,
            nu_offset,
            phi0,
            phi1,
            em_iters,
            out,
        } => {
            let (names, data) = parse_task_dir(&tasks)?;
            let hier = HierPrior::scaled(data[0].dim, nu_offset, phi0, phi1)?;
            let instances: Vec<_> = data.into_iter().map(|d| d.instances).collect();
            let options = HblrOptions {
                em_iters,
                ..HblrOptions::default()
            };
            let fit = hblr_fit_em(&instances, &hier, method, &config(global, method)?, options)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
            for (name, task) in names.iter().zip(&fit.tasks) {
                write_file(&out.join(format!("{name}.posterior")), &format_gaussian(&task.q))?;
            }
            let shared = Gaussian::new(fit.mu0.clone(), fit.sigma0.clone())?;
            write_file(&out.join("prior.txt"), &format_gaussian(&shared))?;
            write_trace(&out.join("trace.csv"), &fit.trace, global.timing)
        }
        Command::EvalBlr { posterior, data, out } => {
            let q = with_path(&posterior, read_gaussian(&posterior))?;
            let labeled = with_path(&data, parse_labeled(&data))?;
            if labeled.dim != q.dim() {
                return Err(Error::Input(format!("data dimension {} differs from posterior dimension {}", labeled.dim, q.dim())));
            }
            if labeled.instances.is_empty() {
                return Err(Error::Input(format!("{}: no instances", data.display())));
            }
            let mut correct = Vec::with_capacity(labeled.instances.len());
            let mut loglik = Vec::with_capacity(labeled.instances.len());
            for (i, x) in labeled.instances.iter().enumerate() {
                let hit = blr_predict_label(&q, &x.covariates) == x.positive;
                correct.push((i.to_string(), if hit { 1.0 } else { 0.0 }));
                loglik.push((i.to_string(), blr_predict_loglik(&q, x)));
            }
            let reports = [MetricReport::new("accuracy", correct), MetricReport::new("log_pred", loglik)];
            write_file(&out, &metrics_csv(&reports))?;
            write_trace(&trace_path(&out), &InferenceTrace::default(), global.timing)
        }
        Command::InferUnigram { corpus, method, out } => {
            let data = with_path(&corpus, parse_corpus(&corpus))?;
            let model = UnigramModel::new(data.vocab_size)?;
            let trace_file = trace_path(&out);
            match unigram_infer(&model, &data.docs, &config(global, method)?) {
                Ok(fit) => {
                    let mut csv = String::from("term,mean,variance\n");
                    for (w, m) in fit.q_theta.mean.iter().enumerate() {
                        csv.push_str(&format!("{w},{m:?},{:?}\n", fit.q_theta.cov[(w, w)]));
                    }
                    write_file(&out, &csv)?;
                    write_trace(&trace_file, &fit.trace, global.timing)
                }
                Err(failure) => {
                    write_trace(&trace_file, &failure.trace, global.timing)?;
                    Err(failure.error)
                }
            }
        }
    }
}
