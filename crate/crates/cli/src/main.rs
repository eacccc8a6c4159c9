use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use texdim_core::capacity::{ArchitectureSpec, SampleParams};
use texdim_core::counting::DEFAULT_ENUMERATION_CAP;
use texdim_core::geometry::{MonteCarloOptions, DEFAULT_Z_THRESHOLD};
use texdim_core::idim::IdimConfig;
use texdim_core::pipeline::commands::Tabular;
use texdim_core::pipeline::{
    counts_command, counts_results, features_command, geometry_command, geometry_results, idim_command,
    idim_results, report_command, rows_to_csv, vc_command, vc_results, CountsCommand, FeatureConfig, FeaturesCommand,
    Fixture, GeometryCommand, IdimCommand, IdimSource, RcSweepConfig, ReportCommand, ReportEnvelope, Table3Config,
    VcCommand,
};
use texdim_core::texture::{Aggregation, GlcmOffset};

#[derive(Parser)]
#[command(name = "texdim", version, about = "Texture features, capacity bounds and intrinsic dimension")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Haralick feature vectors for every window of every image, as CSV.
    Features(FeaturesArgs),
    /// Maximum-likelihood intrinsic dimension of a point cloud or image set.
    Idim(IdimArgs),
    /// Nearest and farthest sample distances in the unit ball.
    Geometry(GeometryArgs),
    /// VC-dimension bounds and the excess-error bound.
    Vc(VcArgs),
    /// Distinct-value counts of co-occurrence statistics.
    Counts(CountsArgs),
    /// Counts, bounds, geometry and intrinsic dimension in one document.
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Write here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Clone)]
struct TextureArgs {
    /// Gray levels after quantization.
    #[arg(long, default_value_t = 256)]
    kappa: u32,
    /// Window side; whole images when omitted.
    #[arg(long = "n")]
    window: Option<usize>,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Offsets as `dr:dc`, with a trailing `s` for symmetric counting.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0:1s,1:0s,1:1s,1:-1s")]
    offsets: Vec<GlcmOffset>,
    #[arg(long, default_value = "avg")]
    agg: Aggregation,
    /// Abort on the first file that fails to decode.
    #[arg(long)]
    strict: bool,
}

impl TextureArgs {
    fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            window: self.window,
            stride: self.stride,
            offsets: self.offsets.clone(),
            aggregation: self.agg,
        }
    }
}

#[derive(Args)]
struct FeaturesArgs {
    /// Image file or directory (PGM, PNG, IDX).
    #[arg(long)]
    input: PathBuf,
    /// Value of the dataset column; the input's file name by default.
    #[arg(long)]
    dataset: Option<String>,
    #[command(flatten)]
    texture: TextureArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct IdimArgs {
    /// CSV point cloud, or an image file or directory.
    #[arg(long, conflicts_with = "fixture")]
    input: Option<PathBuf>,
    /// Synthetic cloud: `ball:P` or `cube:P:D`.
    #[arg(long)]
    fixture: Option<String>,
    /// Points in a synthetic cloud.
    #[arg(long, default_value_t = 2000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    kmin: usize,
    #[arg(long, default_value_t = 20)]
    kmax: usize,
    /// Average inverse estimates before inverting.
    #[arg(long)]
    inverse_average: bool,
    /// Include per-point estimates.
    #[arg(long)]
    per_point: bool,
    #[command(flatten)]
    texture: TextureArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct GeometryArgs {
    /// Nearest-distance rows for MNIST and CIFAR-10.
    #[arg(long)]
    table3: bool,
    #[arg(long, default_value_t = 60_000)]
    mnist_n: u64,
    #[arg(long, default_value_t = 50_000)]
    cifar_n: u64,
    /// Extra nearest-distance row as `NAME:P:N`; repeatable.
    #[arg(long = "dataset-row")]
    dataset_rows: Vec<String>,
    /// Sample counts; crossed with `-p`.
    #[arg(short = 'n', long = "n", value_delimiter = ',')]
    n: Vec<u64>,
    /// Ball dimensions; crossed with `-n`.
    #[arg(short = 'p', long = "p", value_delimiter = ',')]
    p: Vec<f64>,
    /// Monte Carlo trials per point; 0 disables.
    #[arg(long, default_value_t = 0)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Agreement threshold in standard errors.
    #[arg(long, default_value_t = DEFAULT_Z_THRESHOLD)]
    z: f64,
    /// Relative contrast at n = 2 for p = 10^1 .. 10^8.
    #[arg(long)]
    rc_sweep: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    Dense,
    Dropout,
    Dropconnect,
}

#[derive(Args)]
struct VcArgs {
    /// Compare Dropout and DropConnect over the `-w` x `-p` grid.
    #[arg(long, conflicts_with_all = ["layers", "cnn"])]
    dropout: bool,
    #[arg(short = 'w', value_delimiter = ',')]
    w: Vec<f64>,
    #[arg(short = 'p', value_delimiter = ',')]
    p: Vec<f64>,
    /// Training-set size.
    #[arg(short = 'N')]
    samples: Option<u64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Dense layer sizes, input first.
    #[arg(long, value_delimiter = ',', conflicts_with = "cnn")]
    layers: Vec<u64>,
    #[arg(long, value_enum, default_value = "dense")]
    variant: Variant,
    /// Convolutional stack as `maps,kernel,subsampling,layers`.
    #[arg(long, value_delimiter = ',')]
    cnn: Vec<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct CountsArgs {
    #[arg(short = 'n', long = "n")]
    n: u32,
    #[arg(short = 'k', long)]
    kappa: u32,
    /// Enumerate every co-occurrence matrix as an oracle.
    #[arg(long)]
    brute_force: bool,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u64,
    /// Weight count for the feature-space versus VC-scale comparison.
    #[arg(short = 'w')]
    w: Option<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Image set or CSV point cloud for the intrinsic-dimension section.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Synthetic cloud used when no input is given.
    #[arg(long, default_value = "cube:5:50")]
    fixture: String,
    #[arg(long, default_value_t = 2000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo trials per geometry point; 0 disables.
    #[arg(long, default_value_t = 0)]
    trials: u64,
    #[arg(long, default_value_t = 10)]
    kmin: usize,
    #[arg(long, default_value_t = 20)]
    kmax: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn emit(out: &OutputArgs, text: &str) -> Result<()> {
    match &out.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn render(out: &OutputArgs, envelope: impl FnOnce() -> texdim_core::Result<ReportEnvelope>, rows: impl FnOnce() -> texdim_core::Result<Vec<serde_json::Value>>) -> Result<()> {
    let text = match out.format.unwrap_or(Format::Json) {
        Format::Json => envelope()?.to_json(),
        Format::Csv => rows_to_csv(&rows()?)?,
    };
    emit(out, &text)
}

fn idim_source(path: &Path, texture: &TextureArgs) -> IdimSource {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        IdimSource::Csv { path: path.to_path_buf() }
    } else {
        IdimSource::Images {
            path: path.to_path_buf(),
            kappa: texture.kappa,
            features: texture.feature_config(),
            strict: texture.strict,
        }
    }
}

fn run_features(a: FeaturesArgs) -> Result<()> {
    let cfg = FeaturesCommand {
        input: a.input,
        dataset: a.dataset,
        kappa: a.texture.kappa,
        features: a.texture.feature_config(),
        strict: a.texture.strict,
    };
    let output = features_command(&cfg)?;
    for e in &output.errors {
        eprintln!("{}", json!({ "skipped": e }));
    }
    let text = match a.out.format.unwrap_or(Format::Csv) {
        Format::Csv => output.table.to_csv()?,
        Format::Json => {
            let rows: Vec<_> = output
                .table
                .rows
                .iter()
                .map(|r| {
                    json!({
                        "image": r.image,
                        "row": r.row,
                        "col": r.col,
                        "values": r.values,
                        "flag_correlation": r.flag_correlation,
                        "flag_info_correlation": r.flag_info_correlation,
                    })
                })
                .collect();
            let results = json!({
                "dataset": output.table.dataset,
                "columns": output.table.columns,
                "rows": rows,
                "ingest_errors": output.errors,
            });
            let flags = if output.errors.is_empty() {
                vec![]
            } else {
                vec![format!("ingest_errors:{}", output.errors.len())]
            };
            ReportEnvelope::new("features", &cfg, &results, flags)?.to_json()
        }
    };
    emit(&a.out, &text)
}

fn run_idim(a: IdimArgs) -> Result<()> {
    let source = match (&a.input, &a.fixture) {
        (Some(path), _) => idim_source(path, &a.texture),
        (None, Some(spec)) => IdimSource::Fixture(Fixture::parse(spec, a.count, a.seed)?),
        (None, None) => bail!("idim needs --input or --fixture"),
    };
    let mut estimator = IdimConfig::with_range(a.kmin, a.kmax);
    estimator.inverse_average = a.inverse_average;
    estimator.per_point = a.per_point;
    let cfg = IdimCommand { source, estimator };
    render(&a.out, || idim_command(&cfg), || idim_results(&cfg)?.csv_rows())
}

fn run_geometry(a: GeometryArgs) -> Result<()> {
    if a.n.is_empty() != a.p.is_empty() {
        bail!("-n and -p must be given together");
    }
    let extra = a
        .dataset_rows
        .iter()
        .map(|spec| parse_dataset_row(spec))
        .collect::<Result<Vec<_>>>()?;
    if !extra.is_empty() && !a.table3 {
        bail!("--dataset-row needs --table3");
    }
    let cfg = GeometryCommand {
        table3: a.table3.then(|| Table3Config {
            mnist_n: a.mnist_n,
            cifar_n: a.cifar_n,
            extra,
            ..Table3Config::default()
        }),
        points: a.n.iter().flat_map(|&n| a.p.iter().map(move |&p| (n, p))).collect(),
        monte_carlo: (a.trials > 0).then_some(MonteCarloOptions {
            trials: a.trials,
            seed: a.seed,
            z_threshold: a.z,
        }),
        rc_sweep: a.rc_sweep.then(RcSweepConfig::default),
    };
    if cfg.table3.is_none() && cfg.points.is_empty() && cfg.rc_sweep.is_none() {
        bail!("nothing to compute: pass --table3, --rc-sweep or -n/-p");
    }
    render(&a.out, || geometry_command(&cfg), || geometry_results(&cfg)?.csv_rows())
}

fn parse_dataset_row(spec: &str) -> Result<(String, f64, u64)> {
    let mut parts = spec.rsplitn(3, ':');
    let (Some(n), Some(p), Some(name)) = (parts.next(), parts.next(), parts.next()) else {
        bail!("dataset row '{spec}' is not NAME:P:N");
    };
    let p: f64 = p.parse().with_context(|| format!("bad dimension in '{spec}'"))?;
    let n: u64 = n.parse().with_context(|| format!("bad sample count in '{spec}'"))?;
    Ok((name.to_string(), p, n))
}

fn run_vc(a: VcArgs) -> Result<()> {
    let cfg = if a.dropout {
        if a.w.is_empty() || a.p.is_empty() {
            bail!("--dropout needs -w and -p");
        }
        VcCommand::Dropout {
            w: a.w,
            p: a.p,
            n: a.samples.unwrap_or(1_000_000),
            eta: a.eta.unwrap_or(0.05),
        }
    } else {
        let architecture = if !a.cnn.is_empty() {
            let [maps, kernel, subsampling, layers] = a.cnn[..] else {
                bail!("--cnn takes maps,kernel,subsampling,layers");
            };
            ArchitectureSpec::Cnn {
                maps,
                kernel,
                subsampling,
                layers: u32::try_from(layers).context("layer count too large")?,
            }
        } else if !a.layers.is_empty() {
            let p = || match a.p[..] {
                [p] => Ok(p),
                _ => Err(anyhow::anyhow!("this variant needs exactly one -p")),
            };
            match a.variant {
                Variant::Dense => ArchitectureSpec::Dense { layer_sizes: a.layers },
                Variant::Dropout => ArchitectureSpec::Dropout { layer_sizes: a.layers.clone(), p: p()? },
                Variant::Dropconnect => ArchitectureSpec::Dropconnect { layer_sizes: a.layers.clone(), p: p()? },
            }
        } else {
            bail!("vc needs --dropout, --layers or --cnn");
        };
        let sample = match a.samples {
            Some(n) => Some(SampleParams {
                n,
                eta: a.eta.unwrap_or(0.05),
            }),
            None => None,
        };
        VcCommand::Architecture { architecture, sample }
    };
    render(&a.out, || vc_command(&cfg), || vc_results(&cfg)?.csv_rows())
}

fn run_counts(a: CountsArgs) -> Result<()> {
    let cfg = CountsCommand {
        n: a.n,
        kappa: a.kappa,
        brute_force: a.brute_force,
        enumeration_cap: a.cap,
        w: a.w,
    };
    render(&a.out, || counts_command(&cfg), || counts_results(&cfg)?.csv_rows())
}

fn run_report(a: ReportArgs) -> Result<()> {
    let texture = TextureArgs {
        kappa: 256,
        window: None,
        stride: 1,
        offsets: GlcmOffset::standard(true).to_vec(),
        agg: Aggregation::Average,
        strict: false,
    };
    let source = match &a.input {
        Some(path) => idim_source(path, &texture),
        None => IdimSource::Fixture(Fixture::parse(&a.fixture, a.count, a.seed)?),
    };
    let mut counts = CountsCommand::new(2, 2);
    counts.brute_force = true;
    let cfg = ReportCommand {
        counts,
        vc: VcCommand::Dropout {
            w: vec![10.0, 100.0, 1000.0],
            p: (0..10).map(|i| f64::from(i) / 10.0).collect(),
            n: 1_000_000,
            eta: 0.05,
        },
        geometry: GeometryCommand {
            table3: Some(Table3Config::default()),
            points: [1u64, 3, 10]
                .iter()
                .flat_map(|&n| [1.0, 2.0, 3.0, 5.0].map(|p| (n, p)))
                .collect(),
            monte_carlo: (a.trials > 0).then_some(MonteCarloOptions {
                trials: a.trials,
                seed: a.seed,
                z_threshold: DEFAULT_Z_THRESHOLD,
            }),
            rc_sweep: Some(RcSweepConfig::default()),
        },
        idim: Some(IdimCommand {
            source,
            estimator: IdimConfig::with_range(a.kmin, a.kmax),
        }),
    };
    let out = OutputArgs {
        output: a.output,
        format: Some(Format::Json),
    };
    emit(&out, &report_command(&cfg)?.to_json())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("TEXDIM_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .with_context(|| format!("TEXDIM_THREADS must be a positive integer, got '{value}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<texdim_core::Error>() {
        e.kind()
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        "io"
    } else {
        "usage"
    }
}

fn report_error(kind: &str, message: &str) {
    let record = json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{record}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim_end());
            return ExitCode::from(2);
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Features(a) => run_features(a),
        Command::Idim(a) => run_idim(a),
        Command::Geometry(a) => run_geometry(a),
        Command::Vc(a) => run_vc(a),
        Command::Counts(a) => run_counts(a),
        Command::Report(a) => run_report(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(error_kind(&e), &format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}
