use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use modecollapse::blackwell::{is_more_informative_with, MarkovMatrix, Verdict, DEFAULT_TOLERANCE};
use modecollapse::bounds::{bounds_curve, packing_sweep, packing_sweep_with};
use modecollapse::dist::{common_refinement, pack, DEFAULT_ENUMERATION_LIMIT, PROTOCOL_SMOOTHING};
use modecollapse::eval::{
    draw_samples, kl_report, load_counts, sample_synthetic, tuple_counts, write_output, KlOptions,
    NamedCounts, PlotJob,
};
use modecollapse::region::{region_boundary, region_boundary_packed};
use modecollapse::veegan::{
    bound_campaign, matched_optimum_check, verify_bound, FiniteVeeganConfig,
};
use modecollapse::{DiscreteDist, Error, Execution, PiecewiseUniformDist, Result};

#[derive(Parser, Debug)]
#[command(
    name = "modecollapse",
    version,
    about = "Mode-collapse regions, packing bounds and evaluation"
)]
struct Cli {
    /// Run every computation on one thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mode-collapse region boundary as `epsilon,delta` CSV.
    Region {
        #[command(flatten)]
        pair: PairArgs,
        /// Packing degree.
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Total variation, region area and packing bounds for one degree.
    Dtv {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Packed TV, area and bounds for m = 1..=M as CSV.
    PackSweep {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = 6)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lower and upper packed-TV bounds for each tau and m = 1..=M.
    Bounds {
        #[arg(long, value_delimiter = ',', required = true)]
        tau: Vec<f64>,
        #[arg(long, default_value_t = 6)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Is experiment B more informative than C? Input `{"b": [[..]], "c": [[..]]}`.
    Blackwell {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random decision problems tried after the identity probe.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the reconstructor bound on a config, or on random configs.
    VeeganCheck {
        #[arg(short, long, required_unless_present = "campaign")]
        input: Option<PathBuf>,
        /// Number of random configurations instead of an input file.
        #[arg(long)]
        campaign: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average smoothed KL of generated histograms against a reference.
    KlEval {
        /// Reference histogram (CSV `label,count` or JSON map).
        #[arg(long)]
        reference: PathBuf,
        /// Generated histograms as `SOURCE=PATH` or `PATH` (source = file stem).
        /// Repeating a source averages its trials.
        #[arg(short, long, required = true)]
        input: Vec<String>,
        #[arg(long, default_value_t = PROTOCOL_SMOOTHING)]
        smoothing: f64,
        #[arg(long, default_value_t = std::f64::consts::E)]
        log_base: f64,
        /// `.json` or `.csv` report; a text table goes to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded inverse-CDF samples from a piecewise-uniform density, binned.
    Sample {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        n: usize,
        /// Bin edges; defaults to the density's breakpoints.
        #[arg(long, value_delimiter = ',')]
        bins: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Histogram consecutive m-tuples instead of single draws.
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct PairArgs {
    /// One file with `{"p": .., "q": ..}`, or two files (P then Q).
    #[arg(short, long, required = true, num_args = 1..=2)]
    input: Vec<PathBuf>,
    /// Rescale probabilities that do not sum to one.
    #[arg(long)]
    normalize: bool,
}

/// Failed check, reported with exit code 2.
struct CheckFailed;

enum AnyDist {
    Discrete(DiscreteDist),
    Piecewise(PiecewiseUniformDist),
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_json(path: &Path, text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        msg: e.to_string(),
    })
}

fn dist_from_value(v: Value, normalize: bool) -> Result<AnyDist> {
    if v.get("segments").is_some() {
        return Ok(AnyDist::Piecewise(serde_json::from_value(v)?));
    }
    let atoms = v.get("atoms").and_then(Value::as_array).ok_or_else(|| {
        Error::InvalidConfig("expected an object with `atoms` or `segments`".into())
    })?;
    let mut labels = Vec::with_capacity(atoms.len());
    let mut probs = Vec::with_capacity(atoms.len());
    for a in atoms {
        let label = a.get("label").and_then(Value::as_str);
        let prob = a.get("prob").and_then(Value::as_f64);
        match (label, prob) {
            (Some(l), Some(p)) => {
                labels.push(l.to_string());
                probs.push(p);
            }
            _ => return Err(Error::InvalidConfig(format!("malformed atom {a}"))),
        }
    }
    Ok(AnyDist::Discrete(DiscreteDist::with_normalize(
        labels, probs, normalize,
    )?))
}

/// `label,prob` rows, with an optional header.
fn dist_from_csv(path: &Path, text: &str, normalize: bool) -> Result<AnyDist> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let (mut labels, mut probs) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let prob = match rec.get(1).map(str::parse::<f64>) {
            Some(Ok(p)) if rec.len() == 2 => p,
            _ if i == 0 => continue,
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: "expected `label,prob`".into(),
                })
            }
        };
        labels.push(rec[0].to_string());
        probs.push(prob);
    }
    Ok(AnyDist::Discrete(DiscreteDist::with_normalize(
        labels, probs, normalize,
    )?))
}

fn load_dist(path: &Path, normalize: bool) -> Result<AnyDist> {
    let text = read(path)?;
    if text.trim_start().starts_with('{') {
        dist_from_value(parse_json(path, &text)?, normalize)
    } else {
        dist_from_csv(path, &text, normalize)
    }
}

fn align(p: AnyDist, q: AnyDist) -> Result<(DiscreteDist, DiscreteDist)> {
    match (p, q) {
        (AnyDist::Discrete(p), AnyDist::Discrete(q)) => {
            p.check_same_labels(&q)?;
            Ok((p, q))
        }
        (AnyDist::Piecewise(p), AnyDist::Piecewise(q)) => Ok(common_refinement(&p, &q)),
        _ => Err(Error::InvalidConfig(
            "P and Q must both be discrete or both piecewise-uniform".into(),
        )),
    }
}

fn load_pair(args: &PairArgs) -> Result<(DiscreteDist, DiscreteDist)> {
    match args.input.as_slice() {
        [one] => {
            let mut v = parse_json(one, &read(one)?)?;
            let mut take = |key: &str| {
                v.get_mut(key).map(Value::take).ok_or_else(|| {
                    Error::InvalidConfig(format!("{}: missing `{key}`", one.display()))
                })
            };
            let (p, q) = (take("p")?, take("q")?);
            align(
                dist_from_value(p, args.normalize)?,
                dist_from_value(q, args.normalize)?,
            )
        }
        [p, q] => align(load_dist(p, args.normalize)?, load_dist(q, args.normalize)?),
        _ => unreachable!("clap limits the number of inputs"),
    }
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => write_output(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, v: &Value) -> Result<()> {
    emit(out, &(serde_json::to_string_pretty(v)? + "\n"))
}

fn run(cli: Cli) -> Result<std::result::Result<(), CheckFailed>> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match cli.command {
        Command::Region { pair, m, out } => {
            let (p, q) = load_pair(&pair)?;
            let boundary = if m == 1 {
                region_boundary(&p, &q)?
            } else {
                region_boundary_packed(&pack(&p, m)?, &pack(&q, m)?)?
            };
            emit(out.as_deref(), &PlotJob::Region(&boundary).render())?;
        }
        Command::Dtv { pair, m, out } => {
            let (p, q) = load_pair(&pair)?;
            let rows = packing_sweep(&p, &q, m)?;
            let row = rows.last().expect("sweep has m rows");
            let tau = rows[0].dtv;
            emit_json(
                out.as_deref(),
                &json!({"m": m, "tau": tau, "dtv": row.dtv, "area": row.area,
                        "lower": row.lower, "upper": row.upper}),
            )?;
        }
        Command::PackSweep { pair, m, out } => {
            let (p, q) = load_pair(&pair)?;
            let rows = packing_sweep_with(&p, &q, m, DEFAULT_ENUMERATION_LIMIT, exec)?;
            emit(out.as_deref(), &PlotJob::PackSweep(&rows).render())?;
        }
        Command::Bounds { tau, m, out } => {
            if m == 0 {
                return Err(Error::Domain("m must be at least 1".into()));
            }
            let ms: Vec<usize> = (1..=m).collect();
            let rows = bounds_curve(&tau, &ms, exec)?;
            emit(out.as_deref(), &PlotJob::BoundsCurve(&rows).render())?;
        }
        Command::Blackwell {
            input,
            seed,
            trials,
            tol,
            out,
        } => {
            let mut v = parse_json(&input, &read(&input)?)?;
            let mut take = |key: &str| -> Result<MarkovMatrix> {
                let m = v.get_mut(key).map(Value::take).ok_or_else(|| {
                    Error::InvalidConfig(format!("{}: missing `{key}`", input.display()))
                })?;
                Ok(serde_json::from_value(m)?)
            };
            let (b, c) = (take("b")?, take("c")?);
            let verdict = is_more_informative_with(&b, &c, trials, seed, tol, exec)?;
            let report = match &verdict {
                Verdict::MoreInformative(f) => json!({
                    "verdict": verdict.name(),
                    "garbling": f.garbling.to_rows(),
                    "residual": f.residual,
                }),
                Verdict::NotMoreInformative(w) => json!({"verdict": verdict.name(), "witness": w}),
                Verdict::Undetermined { trials } => {
                    json!({"verdict": verdict.name(), "trials": trials})
                }
            };
            emit_json(out.as_deref(), &report)?;
            if !matches!(verdict, Verdict::MoreInformative(_)) {
                return Ok(Err(CheckFailed));
            }
        }
        Command::VeeganCheck {
            input,
            campaign,
            seed,
            tol,
            out,
        } => {
            if let Some(n) = campaign {
                let summary = bound_campaign(n, seed, exec);
                emit_json(out.as_deref(), &serde_json::to_value(&summary)?)?;
                if summary.failures > 0 {
                    return Ok(Err(CheckFailed));
                }
            } else {
                let input = input.expect("clap requires an input without --campaign");
                let cfg: FiniteVeeganConfig =
                    serde_json::from_value(parse_json(&input, &read(&input)?)?)?;
                let bound = verify_bound(&cfg);
                let optimum = matched_optimum_check(&cfg, tol);
                emit_json(out.as_deref(), &json!({"bound": bound, "optimum": optimum}))?;
                if !bound.holds {
                    return Ok(Err(CheckFailed));
                }
            }
        }
        Command::KlEval {
            reference,
            input,
            smoothing,
            log_base,
            out,
        } => {
            let stem = |p: &Path| {
                p.file_stem()
                    .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
            };
            let reference_counts = load_counts(&reference)?;
            let mut generated = Vec::with_capacity(input.len());
            for spec in &input {
                let (source, path) = match spec.split_once('=') {
                    Some((s, p)) => (s.to_string(), PathBuf::from(p)),
                    None => (stem(Path::new(spec)), PathBuf::from(spec)),
                };
                generated.push(NamedCounts {
                    source,
                    counts: load_counts(&path)?,
                });
            }
            let report = kl_report(
                &generated,
                &stem(&reference),
                &reference_counts,
                KlOptions {
                    smoothing,
                    log_base,
                },
            )?;
            let ext = out
                .as_deref()
                .and_then(Path::extension)
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase);
            let text = match ext.as_deref() {
                Some("json") => report.to_json(),
                Some("csv") => report.to_csv(),
                _ => report.to_table(),
            };
            emit(out.as_deref(), &text)?;
        }
        Command::Sample {
            input,
            n,
            bins,
            seed,
            m,
            out,
        } => {
            let AnyDist::Piecewise(dist) = load_dist(&input, false)? else {
                return Err(Error::InvalidConfig(
                    "sampling needs a piecewise-uniform density".into(),
                ));
            };
            let bins = if bins.is_empty() {
                dist.breakpoints()
            } else {
                bins
            };
            let counts = if m == 1 {
                sample_synthetic(&dist, n, &bins, seed, exec)?
            } else {
                let (lo, hi) = dist.support();
                if bins.first().is_none_or(|&b| b > lo) || bins.last().is_none_or(|&b| b < hi) {
                    return Err(Error::InvalidConfig("bins do not cover the support".into()));
                }
                tuple_counts(&draw_samples(&dist, n * m, seed, exec), m, &bins)?
            };
            emit(out.as_deref(), &PlotJob::Frequency(&counts).render())?;
        }
    }
    Ok(Ok(()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(CheckFailed)) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
