//! Command line front end for the `oak` graph kernel library.
//!
//! Four subcommands cover the usual workflow: `gram` computes and
//! exports a kernel matrix, `validate` checks one for positive
//! semidefiniteness (optionally cross-checking assignment values
//! against a Hungarian solver), `bench` times the kernels, and
//! `inspect` summarizes a dataset.
//!
//! Exit codes: 1 dataset or matrix parse error, 2 unknown kernel
//! name, 3 I/O error, 4 failed validation check.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use oak::{
    benchmark_linear_time, check_psd, gram, normalize, parse_dataset, refine, solve_hungarian,
    wl_hierarchy, AssignmentInstance, ColourSequence, Dataset, GramMatrix, Graph, GraphError,
    KernelName, DEFAULT_PSD_TOLERANCE,
};

#[derive(Parser)]
#[command(name = "oak", version, about = "Optimal assignment graph kernels")]
struct Cli {
    /// Cap the number of worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a Gram matrix and write it to a file or stdout.
    Gram(GramArgs),
    /// Check a Gram matrix for positive semidefiniteness.
    Validate(ValidateArgs),
    /// Time Gram matrix construction, one row per kernel.
    Bench(BenchArgs),
    /// Print summary statistics for a dataset.
    Inspect(InspectArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    /// Header line `n kernel params`, then one whitespace-separated
    /// row per graph.
    Dense,
    /// One line per graph: `class 0:index 1:v ... n:v` with 1-based
    /// sample indices, as consumed by libsvm/liblinear.
    Libsvm,
}

#[derive(Args)]
struct GramArgs {
    /// Dataset directory; the directory name is the dataset name.
    #[arg(long)]
    dataset: PathBuf,
    /// Kernel: V, E, V-OA, E-OA, WL, WL-OA, GL or SP.
    #[arg(long)]
    kernel: String,
    /// Refinement depth for the WL kernels; ignored otherwise.
    #[arg(long, default_value_t = 0)]
    h: usize,
    /// Cosine-normalize so every self-similarity becomes 1.
    #[arg(long)]
    normalize: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Dense)]
    format: OutputFormat,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Dataset directory; requires --kernel.
    #[arg(long, required_unless_present = "matrix", conflicts_with = "matrix")]
    dataset: Option<PathBuf>,
    /// Kernel to compute from --dataset.
    #[arg(long, requires = "dataset")]
    kernel: Option<String>,
    /// Refinement depth for the WL kernels; ignored otherwise.
    #[arg(long, default_value_t = 0)]
    h: usize,
    /// Previously exported dense matrix file to check instead of
    /// computing one; a header line is detected and skipped.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Relative eigenvalue tolerance for the check.
    #[arg(long, default_value_t = DEFAULT_PSD_TOLERANCE)]
    tolerance: f64,
    /// Cross-check sampled assignment kernel entries against an
    /// exact Hungarian solver (V-OA, E-OA and WL-OA only).
    #[arg(long, requires = "kernel")]
    oracle: bool,
    /// Seed for the oracle pair sampling.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset directory; the directory name is the dataset name.
    #[arg(long)]
    dataset: PathBuf,
    /// Refinement depth for the WL kernels.
    #[arg(long, default_value_t = 3)]
    h: usize,
    /// Also emit a size-doubling series comparing the histogram
    /// evaluation against the Hungarian baseline.
    #[arg(long)]
    scale: bool,
    /// Largest multiset size the Hungarian baseline is run on.
    #[arg(long, default_value_t = 512)]
    hungarian_cap: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    /// Dataset directory; the directory name is the dataset name.
    #[arg(long)]
    dataset: PathBuf,
    /// Also report distinct colour counts per refinement iteration.
    #[arg(long)]
    wl_h: Option<usize>,
}

enum CliError {
    Parse(String),
    UnknownKernel(String),
    Io(String),
    CheckFailed(String),
}

impl CliError {
    fn message(&self) -> &str {
        match self {
            CliError::Parse(m)
            | CliError::UnknownKernel(m)
            | CliError::Io(m)
            | CliError::CheckFailed(m) => m,
        }
    }

    fn code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 1,
            CliError::UnknownKernel(_) => 2,
            CliError::Io(_) => 3,
            CliError::CheckFailed(_) => 4,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Ignore the error: the global pool can only be set once,
        // which is fine for repeated invocations under test harnesses.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let result = match cli.command {
        Command::Gram(args) => cmd_gram(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Inspect(args) => cmd_inspect(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        process::exit(e.code());
    }
}

/// Reads a TU-format dataset whose files live in `dir` and share the
/// directory name as prefix (`DIR/NAME_A.txt` etc.).
fn load_dataset(dir: &Path) -> Result<Dataset, CliError> {
    let name = dir
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::Parse(format!("cannot derive a dataset name from {dir:?}")))?;
    parse_dataset(dir, name).map_err(|e| match e {
        GraphError::MissingFile(_) | GraphError::Io { .. } => CliError::Io(e.to_string()),
        other => CliError::Parse(other.to_string()),
    })
}

fn parse_kernel(name: &str) -> Result<KernelName, CliError> {
    KernelName::from_str(name).map_err(|e| CliError::UnknownKernel(e.to_string()))
}

/// Formats one kernel value with 9 significant digits. Integer values
/// print exactly, so integer-valued kernels survive a round trip
/// through their text form unchanged.
fn fmt_value(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.fract() == 0.0 && v.abs() < 9e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.8e}")
    }
}

fn render_dense(m: &GramMatrix) -> String {
    let mut out = format!("{} {}", m.n(), m.kernel_name());
    for (key, value) in m.params() {
        let _ = write!(out, " {key}={value}");
    }
    if m.normalized() {
        out.push_str(" normalized");
    }
    out.push('\n');
    for i in 0..m.n() {
        for j in 0..m.n() {
            if j > 0 {
                out.push(' ');
            }
            out.push_str(&fmt_value(m.get(i, j)));
        }
        out.push('\n');
    }
    out
}

fn render_libsvm(m: &GramMatrix, classes: &[i64]) -> String {
    let mut out = String::new();
    for (i, &class) in classes.iter().enumerate().take(m.n()) {
        let _ = write!(out, "{class} 0:{}", i + 1);
        for j in 0..m.n() {
            let _ = write!(out, " {}:{}", j + 1, fmt_value(m.get(i, j)));
        }
        out.push('\n');
    }
    out
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gram(args: GramArgs) -> Result<(), CliError> {
    let kernel = parse_kernel(&args.kernel)?;
    let dataset = load_dataset(&args.dataset)?;
    let mut matrix = gram(&dataset, kernel, args.h);
    if args.normalize {
        matrix = normalize(&matrix);
    }
    let text = match args.format {
        OutputFormat::Dense => render_dense(&matrix),
        OutputFormat::Libsvm => render_libsvm(&matrix, dataset.class_labels()),
    };
    emit(&text, args.output.as_deref())
}

/// Reads a square matrix from a dense export or a bare whitespace
/// table. The first line is treated as a header iff any of its tokens
/// fails to parse as a number.
fn read_matrix_file(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    let mut declared = None;
    if let Some((_, first)) = lines.peek() {
        let tokens: Vec<&str> = first.split_whitespace().collect();
        if tokens.iter().any(|t| t.parse::<f64>().is_err()) {
            declared = tokens[0].parse::<usize>().ok();
            lines.next();
        }
    }

    let mut rows = Vec::new();
    for (idx, line) in lines {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    CliError::Parse(format!(
                        "{}:{}: invalid number '{t}'",
                        path.display(),
                        idx + 1
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if let Some(d) = declared {
        if d != n {
            return Err(CliError::Parse(format!(
                "{}: header declares {d} rows, found {n}",
                path.display()
            )));
        }
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(CliError::Parse(format!(
            "{}: row {bad} has {} entries, expected {n}",
            path.display(),
            rows[bad].len()
        )));
    }
    Ok(rows)
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let (rows, source, oracle_input) = if let Some(matrix_path) = &args.matrix {
        let rows = read_matrix_file(matrix_path)?;
        (rows, matrix_path.display().to_string(), None)
    } else {
        // Clap guarantees --dataset here, but --kernel is only tied to
        // --dataset by a `requires` edge in the other direction.
        let kernel_name = args
            .kernel
            .as_deref()
            .ok_or_else(|| CliError::Parse("--dataset requires --kernel".to_string()))?;
        let kernel = parse_kernel(kernel_name)?;
        let dataset = load_dataset(args.dataset.as_deref().expect("enforced by clap"))?;
        let matrix = gram(&dataset, kernel, args.h);
        let source = format!("{} on {}", matrix.kernel_name(), dataset.name());
        (matrix.rows(), source, Some((dataset, kernel, matrix)))
    };

    let report =
        check_psd(&rows, args.tolerance).map_err(|e| CliError::CheckFailed(e.to_string()))?;
    println!("matrix: {} x {} ({source})", rows.len(), rows.len());
    println!("min eigenvalue: {:.6e}", report.min_eigenvalue);
    println!("max eigenvalue: {:.6e}", report.max_eigenvalue);
    println!("tolerance: {:e}", report.tolerance);
    println!("psd: {}", report.passed);
    if !report.passed {
        return Err(CliError::CheckFailed(
            "matrix is not positive semidefinite within tolerance".to_string(),
        ));
    }

    if args.oracle {
        let (dataset, kernel, matrix) = oracle_input
            .as_ref()
            .ok_or_else(|| CliError::Parse("--oracle requires --dataset".to_string()))?;
        run_oracle(dataset, *kernel, matrix, args.h, args.seed)?;
    }
    Ok(())
}

/// Re-solves up to 50 sampled Gram entries with the exact Hungarian
/// algorithm on the kernel's base similarities and compares.
fn run_oracle(
    dataset: &Dataset,
    kernel: KernelName,
    matrix: &GramMatrix,
    h: usize,
    seed: u64,
) -> Result<(), CliError> {
    let colours = match kernel {
        KernelName::VOa | KernelName::EOa => None,
        KernelName::WlOa => Some(refine(dataset.graphs(), h)),
        other => {
            return Err(CliError::Parse(format!(
                "--oracle applies to the assignment kernels, not {other}"
            )))
        }
    };

    let n = dataset.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = 50.min(n * n);
    for _ in 0..samples {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let expected = hungarian_value(dataset, kernel, colours.as_ref(), i, j);
        let got = matrix.get(i, j);
        if (expected - got).abs() > 1e-9 * 1.0_f64.max(expected.abs()) {
            println!("oracle mismatch at pair ({i}, {j}): gram {got}, hungarian {expected}");
            return Err(CliError::CheckFailed(format!(
                "assignment value mismatch at pair ({i}, {j})"
            )));
        }
    }
    println!("oracle: {samples} sampled pairs match the Hungarian solver");
    Ok(())
}

/// Exact optimal assignment value for one graph pair, solved on the
/// padded base similarity matrix.
fn hungarian_value(
    dataset: &Dataset,
    kernel: KernelName,
    colours: Option<&ColourSequence>,
    i: usize,
    j: usize,
) -> f64 {
    let (gi, gj) = (dataset.graph(i), dataset.graph(j));
    let cross: Vec<Vec<f64>> = match kernel {
        KernelName::VOa => cross_matrix(&vertex_labels(gi), &vertex_labels(gj)),
        KernelName::EOa => cross_matrix(&edge_labels(gi), &edge_labels(gj)),
        KernelName::WlOa => {
            let c = colours.expect("refined for WL-OA");
            let (nu, nv) = (gi.vertex_count(), gj.vertex_count());
            let n = nu.max(nv);
            (0..n)
                .map(|u| {
                    (0..n)
                        .map(|v| {
                            if u < nu && v < nv {
                                c.matching_colours((i, u), (j, v)) as f64
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect()
        }
        _ => unreachable!("callers filter to assignment kernels"),
    };
    if cross.is_empty() {
        return 0.0;
    }
    let inst = AssignmentInstance::from_cross(&cross).expect("square finite matrix");
    solve_hungarian(&inst).0
}

fn vertex_labels(g: &Graph) -> Vec<u32> {
    g.labels().to_vec()
}

/// Unordered endpoint label pairs, one per edge.
fn edge_labels(g: &Graph) -> Vec<(u32, u32)> {
    g.edges()
        .iter()
        .map(|&(u, v)| {
            let (a, b) = (g.label(u), g.label(v));
            (a.min(b), a.max(b))
        })
        .collect()
}

/// Square zero-padded Dirac cross matrix between two element lists.
fn cross_matrix<T: PartialEq>(xs: &[T], ys: &[T]) -> Vec<Vec<f64>> {
    let n = xs.len().max(ys.len());
    (0..n)
        .map(|u| {
            (0..n)
                .map(|v| {
                    if u < xs.len() && v < ys.len() && xs[u] == ys[v] {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let dataset = load_dataset(&args.dataset)?;
    if dataset.is_empty() {
        return Err(CliError::Parse(format!(
            "dataset {} has no graphs",
            dataset.name()
        )));
    }

    let mut out = String::from("kernel,h,graphs,gram_ms\n");
    for kernel in KernelName::ALL {
        let start = Instant::now();
        let matrix = gram(&dataset, kernel, args.h);
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(matrix);
        let h = if kernel.takes_h() {
            args.h.to_string()
        } else {
            String::new()
        };
        let _ = writeln!(out, "{kernel},{h},{},{elapsed:.3}", dataset.len());
    }

    if args.scale {
        let colours = refine(dataset.graphs(), args.h);
        let hierarchy = wl_hierarchy(&colours);
        let sizes = [256, 512, 1024, 2048, 4096];
        let table = benchmark_linear_time(&hierarchy, &sizes, args.hungarian_cap);
        out.push('\n');
        out.push_str(&table.to_csv());
    }
    emit(&out, args.output.as_deref())
}

fn cmd_inspect(args: InspectArgs) -> Result<(), CliError> {
    let dataset = load_dataset(&args.dataset)?;
    println!("dataset: {}", dataset.name());
    println!("graphs: {}", dataset.len());
    print_stat("vertices", dataset.graphs(), |g| g.vertex_count());
    print_stat("edges", dataset.graphs(), |g| g.edge_count());
    println!("label alphabet: {}", dataset.label_alphabet());

    let mut classes: BTreeMap<i64, usize> = BTreeMap::new();
    for &c in dataset.class_labels() {
        *classes.entry(c).or_insert(0) += 1;
    }
    let summary: Vec<String> = classes.iter().map(|(c, n)| format!("{c}:{n}")).collect();
    println!("classes: {}", summary.join(" "));

    if let Some(h) = args.wl_h {
        let colours = refine(dataset.graphs(), h);
        let counts: Vec<String> = (0..=h)
            .map(|i| format!("{i}:{}", colours.iteration_block(i).len()))
            .collect();
        println!("wl colours: {}", counts.join(" "));
    }
    Ok(())
}

fn print_stat(name: &str, graphs: &[Graph], f: impl Fn(&Graph) -> usize) {
    let counts: Vec<usize> = graphs.iter().map(f).collect();
    let total: usize = counts.iter().sum();
    if counts.is_empty() {
        println!("{name}: 0");
        return;
    }
    let min = counts.iter().min().unwrap();
    let max = counts.iter().max().unwrap();
    println!(
        "{name}: {total} (min {min}, max {max}, mean {:.2})",
        total as f64 / counts.len() as f64
    );
}
