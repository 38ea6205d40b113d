use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use shiftscope_core::ablation::{
    ablation_csv_header, ablation_csv_row, ablation_sweep, AblationConfig, AblationRow,
};
use shiftscope_core::detector::{
    log_grid, perturbation_shift_test, subsample_shift_test, Decision, DetectorConfig, Metric,
    PerturbConfig, PerturbationReport, ShiftReport,
};
use shiftscope_core::embedio::{self, l2_normalize};
use shiftscope_core::sampling::{
    apply_class_mixture, dirichlet_mixture, domain_split, gaussian_clusters, random_label_groups,
    split_halves, subpopulation_shift, ClassMixture,
};
use shiftscope_core::topology::{diagrams, write_diagrams_csv, EdgeLimit, RipsConfig};
use shiftscope_core::{EmbeddingSet, Error, RngSeed};

const EXIT_SHIFT: u8 = 3;
const EXIT_ERROR: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "shiftscope",
    version,
    about = "Distribution shift detection for embedding sets"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether a candidate set has shifted away from a reference set.
    Detect(DetectArgs),
    /// Generate synthetic sets or shifted pairs.
    Gen(GenArgs),
    /// Sweep sample sizes against class-mixture shifts of growing magnitude.
    Ablate(AblateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    Subsample,
    Perturbation,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricName {
    Energy,
    LocalEnergy,
    Swp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Table,
    Csv,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long, value_enum, default_value = "energy")]
    metric: MetricName,
    /// Neighbors per point for local energy.
    #[arg(long, default_value_t = Metric::DEFAULT_LOCAL_K)]
    k: usize,
    /// Projection directions for sliced Wasserstein.
    #[arg(long, default_value_t = 50)]
    slices: usize,
    /// Highest homology dimension for SWP (0 or 1).
    #[arg(long, default_value_t = 1)]
    max_dim: usize,
    /// Points kept for H1 diagrams.
    #[arg(long, default_value_t = 400)]
    h1_cap: usize,
    /// Rips filtration cutoff; the enclosing radius when omitted.
    #[arg(long)]
    max_edge: Option<f64>,
}

impl MetricArgs {
    fn metric(&self) -> Metric {
        match self.metric {
            MetricName::Energy => Metric::Energy,
            MetricName::LocalEnergy => Metric::local_energy(self.k),
            MetricName::Swp => Metric::Swp {
                max_dimension: self.max_dim,
                slices: self.slices,
                h1_point_cap: self.h1_cap,
                max_edge_length: self.edge_limit(),
            },
        }
    }

    fn edge_limit(&self) -> EdgeLimit {
        self.max_edge.map_or(EdgeLimit::Auto, EdgeLimit::Fixed)
    }
}

#[derive(Args)]
struct InputArgs {
    /// Skip L2 normalization of the inputs.
    #[arg(long)]
    no_normalize: bool,
    /// Label column name for CSV inputs.
    #[arg(long)]
    label_column: Option<String>,
}

#[derive(Args)]
struct DetectArgs {
    reference: PathBuf,
    candidate: PathBuf,
    #[arg(long, value_enum, default_value = "subsample")]
    test: TestKind,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long, default_value_t = 1000)]
    subsample_size: usize,
    /// Distance samples per run.
    #[arg(long, default_value_t = 15)]
    samples: usize,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated noise levels for the perturbation test.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    criterion_k: usize,
    #[arg(long, default_value_t = 0.80)]
    threshold: f64,
    /// Perturbation draws per noise level.
    #[arg(long, default_value_t = 3)]
    draws: usize,
    #[arg(long, env = "SHIFTSCOPE_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    input: InputArgs,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    /// Write persistence diagrams of one subsample of each input to
    /// DIR/reference.csv and DIR/candidate.csv.
    #[arg(long, value_name = "DIR")]
    export_diagrams: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
}

#[derive(Subcommand)]
enum GenKind {
    /// Isotropic Gaussian clusters, one per class.
    Clusters {
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 700)]
        per_class: usize,
        #[arg(long, default_value_t = 128)]
        dim: usize,
        /// Distance scale between cluster centers.
        #[arg(long, default_value_t = 6.0)]
        sep: f64,
        #[arg(long, env = "SHIFTSCOPE_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Subpopulation shift: group A is thinned in the reference, the other
    /// classes in the candidate.
    Subpop {
        #[command(flatten)]
        pair: PairArgs,
        /// Fraction of each thinned class that is kept.
        #[arg(long, alias = "fractions-a", default_value_t = 0.1)]
        fraction: f64,
    },
    /// Domain shift: reference from group A only, candidate from group B only.
    Domain {
        #[command(flatten)]
        pair: PairArgs,
        /// Group B classes; the complement of group A when omitted.
        #[arg(long, value_parser = parse_classes)]
        classes_b: Option<ClassList>,
    },
    /// Resamples classes with Dirichlet-drawn proportions.
    Dirichlet {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        concentration: f64,
        /// Blend weight between keeping every row (0) and the Dirichlet draw (1).
        #[arg(long, default_value_t = 1.0)]
        magnitude: f64,
        #[arg(long)]
        label_column: Option<String>,
        #[arg(long, env = "SHIFTSCOPE_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PairArgs {
    /// Labeled source set.
    #[arg(long)]
    input: PathBuf,
    /// Separate labeled source for the candidate; otherwise the input is
    /// split in halves.
    #[arg(long)]
    candidate_input: Option<PathBuf>,
    /// Group A classes, e.g. `0-4` or `1,3,5`; drawn at random when omitted.
    #[arg(long, value_parser = parse_classes)]
    classes_a: Option<ClassList>,
    /// Size of a randomly drawn group A (half the classes by default).
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long, env = "SHIFTSCOPE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_reference: PathBuf,
    #[arg(long)]
    out_candidate: PathBuf,
}

#[derive(Clone)]
struct ClassList(Vec<u32>);

fn parse_classes(s: &str) -> Result<ClassList, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || format!("cannot parse class list entry {part:?}");
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
                let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                out.extend(lo..=hi);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err("empty class list".into());
    }
    out.sort_unstable();
    out.dedup();
    Ok(ClassList(out))
}

#[derive(Args)]
struct AblateArgs {
    /// Labeled input; split in halves into reference and candidate pool.
    input: PathBuf,
    #[command(flatten)]
    metric: AblateMetricArgs,
    #[arg(long, value_delimiter = ',', default_value = "25,50,100")]
    sample_sizes: Vec<usize>,
    /// Comma-separated shift magnitudes in [0, 1].
    #[arg(long, value_delimiter = ',')]
    magnitudes: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    concentration: f64,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, env = "SHIFTSCOPE_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    input_opts: InputArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct AblateMetricArgs {
    #[arg(long = "metric", value_enum, default_value = "local-energy")]
    name: MetricName,
    #[arg(long, default_value_t = Metric::DEFAULT_LOCAL_K)]
    k: usize,
    #[arg(long, default_value_t = 50)]
    slices: usize,
    #[arg(long, default_value_t = 1)]
    max_dim: usize,
}

impl AblateMetricArgs {
    fn metric(&self) -> Metric {
        MetricArgs {
            metric: self.name,
            k: self.k,
            slices: self.slices,
            max_dim: self.max_dim,
            h1_cap: 400,
            max_edge: None,
        }
        .metric()
    }
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. }
            | Error::Format(_)
            | Error::UnsupportedArray(_)
            | Error::Parse { .. }
            | Error::InvalidSet(_)
            | Error::IndexPairing { .. } => EXIT_ERROR,
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl Failure {
    fn io(path: &Path, e: io::Error) -> Self {
        Failure {
            code: EXIT_ERROR,
            message: format!("cannot write {}: {e}", path.display()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot size thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let outcome = match cli.command {
        Command::Detect(args) => detect(args),
        Command::Gen(args) => generate(args.kind).map(|()| 0),
        Command::Ablate(args) => ablate(args).map(|()| 0),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_input(path: &Path, opts: &InputArgs) -> CliResult<EmbeddingSet> {
    let set = embedio::load(path, opts.label_column.as_deref())?;
    if opts.no_normalize {
        return Ok(set);
    }
    let (set, zero_rows) = l2_normalize(&set);
    if zero_rows > 0 {
        log::warn!(
            "{}: {zero_rows} all-zero rows left unnormalized",
            path.display()
        );
    }
    Ok(set)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::io(path, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::io(Path::new("<stdout>"), e)),
    }
}

#[derive(Serialize)]
struct InputEcho {
    reference: String,
    candidate: String,
    reference_rows: usize,
    candidate_rows: usize,
    dim: usize,
    normalized: bool,
}

#[derive(Serialize)]
struct Output<'a, R> {
    #[serde(flatten)]
    report: &'a R,
    inputs: InputEcho,
}

fn detect(args: DetectArgs) -> CliResult<u8> {
    let metric = args.metric.metric();
    metric.validate()?;
    let x = load_input(&args.reference, &args.input)?;
    let y = load_input(&args.candidate, &args.input)?;
    let inputs = InputEcho {
        reference: args.reference.display().to_string(),
        candidate: args.candidate.display().to_string(),
        reference_rows: x.len(),
        candidate_rows: y.len(),
        dim: x.dim(),
        normalized: !args.input.no_normalize,
    };
    let seed = RngSeed::new(args.seed);

    if let Some(dir) = &args.export_diagrams {
        export_diagrams(dir, &x, &y, &args, seed)?;
    }

    let (decision, text) = match args.test {
        TestKind::Subsample => {
            let cfg = DetectorConfig {
                metric,
                subsample_size: args.subsample_size,
                samples_per_run: args.samples,
                runs: args.runs,
                alpha: args.alpha,
                seed,
            };
            let report = subsample_shift_test(&x, &y, &cfg)?;
            let text = render(&report, inputs, args.format, ShiftReport::to_table, || {
                (ShiftReport::csv_header(), report.csv_row())
            })?;
            (report.decision, text)
        }
        TestKind::Perturbation => {
            let pcfg = PerturbConfig {
                grid: args.grid.clone().unwrap_or_else(|| log_grid(0.01, 1.0, 10)),
                criterion_k: args.criterion_k,
                threshold: args.threshold,
                samples_per_level: args.draws,
                seed,
                ..PerturbConfig::default()
            };
            let report = perturbation_shift_test(&x, &y, &metric, &pcfg)?;
            let text = render(
                &report,
                inputs,
                args.format,
                PerturbationReport::to_table,
                || (PerturbationReport::csv_header(), report.csv_row()),
            )?;
            (report.decision, text)
        }
    };
    emit(args.out.as_deref(), &text)?;
    Ok(match decision {
        Decision::Yes => EXIT_SHIFT,
        Decision::No => 0,
    })
}

fn render<R: Serialize>(
    report: &R,
    inputs: InputEcho,
    format: OutputFormat,
    table: impl Fn(&R) -> String,
    csv: impl Fn() -> (&'static str, String),
) -> CliResult<String> {
    Ok(match format {
        OutputFormat::Json => {
            let mut s =
                serde_json::to_string_pretty(&Output { report, inputs }).map_err(|e| Failure {
                    code: EXIT_ERROR,
                    message: format!("cannot serialize report: {e}"),
                })?;
            s.push('\n');
            s
        }
        OutputFormat::Table => table(report),
        OutputFormat::Csv => {
            let (header, row) = csv();
            format!("{header}\n{row}\n")
        }
    })
}

fn export_diagrams(
    dir: &Path,
    x: &EmbeddingSet,
    y: &EmbeddingSet,
    args: &DetectArgs,
    seed: RngSeed,
) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let rips = RipsConfig {
        max_dimension: args.metric.max_dim,
        max_edge_length: args.metric.edge_limit(),
        h1_point_cap: args.metric.h1_cap,
        seed: seed.derive(1),
    };
    for (name, set, tag) in [("reference", x, 0), ("candidate", y, 1)] {
        let m = args.subsample_size.min(set.len());
        let sample = shiftscope_core::sampling::subsample(set, m, seed.derive(tag))?;
        let dgms = diagrams(&sample, &rips)?;
        write_diagrams_csv(&dgms, dir.join(format!("{name}.csv")))?;
    }
    Ok(())
}

fn generate(kind: GenKind) -> CliResult<()> {
    match kind {
        GenKind::Clusters {
            classes,
            per_class,
            dim,
            sep,
            seed,
            out,
        } => {
            let set = gaussian_clusters(classes, per_class, dim, sep, RngSeed::new(seed))?;
            embedio::save(&set, &out)?;
        }
        GenKind::Subpop { pair, fraction } => {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(
                    Error::Config(format!("fraction must be in [0, 1], got {fraction}")).into(),
                );
            }
            let seed = RngSeed::new(pair.seed);
            let (reference, candidate, classes) = load_pair(&pair, seed)?;
            let (group_a, _) = groups(&pair, &classes, seed)?;
            let (r, c) =
                subpopulation_shift(&reference, &candidate, &group_a, fraction, seed.derive(2))?;
            save_pair(&pair, &r, &c)?;
        }
        GenKind::Domain { pair, classes_b } => {
            let seed = RngSeed::new(pair.seed);
            let (reference, candidate, classes) = load_pair(&pair, seed)?;
            let (group_a, complement) = groups(&pair, &classes, seed)?;
            let group_b = classes_b.map_or(complement, |c| c.0);
            let r = domain_split(&reference, &group_a, &group_b)?.0;
            let c = domain_split(&candidate, &group_a, &group_b)?.1;
            save_pair(&pair, &r, &c)?;
        }
        GenKind::Dirichlet {
            input,
            concentration,
            magnitude,
            label_column,
            seed,
            out,
        } => {
            let set = embedio::load(&input, label_column.as_deref())?;
            let classes = set.classes().ok_or(Error::LabelsRequired)?;
            let num_classes = classes.last().map_or(0, |&c| c as usize + 1);
            let seed = RngSeed::new(seed);
            let target = dirichlet_mixture(num_classes, concentration, seed.derive(0))?;
            let mix = ClassMixture::identity(num_classes).blend(&target, magnitude)?;
            log::info!("class mixture {:?}", mix.proportions());
            let shifted = apply_class_mixture(&set, &mix, seed.derive(1))?;
            embedio::save(&shifted, &out)?;
        }
    }
    Ok(())
}

fn load_pair(pair: &PairArgs, seed: RngSeed) -> CliResult<(EmbeddingSet, EmbeddingSet, Vec<u32>)> {
    let label_column = pair.label_column.as_deref();
    let source = embedio::load(&pair.input, label_column)?;
    let (reference, candidate) = match &pair.candidate_input {
        Some(path) => (source, embedio::load(path, label_column)?),
        None => {
            source.labels().ok_or(Error::LabelsRequired)?;
            split_halves(&source, seed.derive(0))?
        }
    };
    let mut classes = reference.classes().ok_or(Error::LabelsRequired)?;
    classes.extend(candidate.classes().ok_or(Error::LabelsRequired)?);
    classes.sort_unstable();
    classes.dedup();
    Ok((reference, candidate, classes))
}

fn groups(pair: &PairArgs, classes: &[u32], seed: RngSeed) -> CliResult<(Vec<u32>, Vec<u32>)> {
    match &pair.classes_a {
        Some(a) => {
            let b = classes
                .iter()
                .copied()
                .filter(|c| !a.0.contains(c))
                .collect();
            Ok((a.0.clone(), b))
        }
        None => {
            let size = pair.group_size.unwrap_or(classes.len() / 2);
            Ok(random_label_groups(classes, size, seed.derive(1))?)
        }
    }
}

fn save_pair(pair: &PairArgs, reference: &EmbeddingSet, candidate: &EmbeddingSet) -> CliResult<()> {
    embedio::save(reference, &pair.out_reference)?;
    embedio::save(candidate, &pair.out_candidate)?;
    Ok(())
}

#[derive(Serialize)]
struct AblationOutput<'a> {
    config: &'a AblationConfig,
    input: String,
    normalized: bool,
    rows: &'a [AblationRow],
}

fn ablate(args: AblateArgs) -> CliResult<()> {
    let set = load_input(&args.input, &args.input_opts)?;
    set.labels().ok_or(Error::LabelsRequired)?;
    let seed = RngSeed::new(args.seed);
    let mut cfg = AblationConfig {
        metric: args.metric.metric(),
        sample_sizes: args.sample_sizes,
        concentration: args.concentration,
        reps: args.reps,
        samples_per_run: args.samples,
        alpha: args.alpha,
        seed: seed.derive(1),
        ..AblationConfig::default()
    };
    if let Some(m) = args.magnitudes {
        cfg.magnitudes = m;
    }
    cfg.validate()?;
    let (reference, pool) = split_halves(&set, seed.derive(0))?;
    let rows = ablation_sweep(&reference, &pool, &cfg)?;
    let text = match args.format {
        OutputFormat::Csv => {
            let mut s = format!("{}\n", ablation_csv_header());
            for row in &rows {
                s.push_str(&ablation_csv_row(row));
                s.push('\n');
            }
            s
        }
        OutputFormat::Table => {
            let mut s = format!(
                "{:>11}  {:>9}  {:>13}  {:>13}  {:>11}\n",
                "sample_size", "magnitude", "label_dist_l2", "positive_rate", "mean_metric"
            );
            for r in &rows {
                s.push_str(&format!(
                    "{:>11}  {:>9.3}  {:>13.4}  {:>13.2}  {:>11.4}\n",
                    r.sample_size, r.magnitude, r.label_dist_l2, r.positive_rate, r.mean_metric
                ));
            }
            s
        }
        OutputFormat::Json => {
            let out = AblationOutput {
                config: &cfg,
                input: args.input.display().to_string(),
                normalized: !args.input_opts.no_normalize,
                rows: &rows,
            };
            let mut s = serde_json::to_string_pretty(&out).map_err(|e| Failure {
                code: EXIT_ERROR,
                message: format!("cannot serialize rows: {e}"),
            })?;
            s.push('\n');
            s
        }
    };
    emit(args.out.as_deref(), &text)
}
