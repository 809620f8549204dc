//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error,
//! 3 internal invariant violation (a trace dump path is printed).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::coloring::{parse_coloring, permuted_round_robin, round_robin, serialize_coloring, EdgeColoring};
use crate::constructor::{build_forest, omega, ConstructionTrace, SelectionPolicy};
use crate::forest::{to_dot, ForestRecord};
use crate::oracle::{
    enumerate_rainbow_spanning_trees, max_disjoint_rainbow_trees, DEFAULT_ENUMERATION_CAP, DEFAULT_PACKING_CAP,
};
use crate::verifier::verify_all;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "rainbow-trees", version, about = "Edge-disjoint rainbow spanning trees in edge-colored K_2m")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a proper (2m-1)-edge-coloring of K_2m.
    Gen {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        m: u64,
        #[arg(long, value_enum, default_value_t = Scheme::RoundRobin)]
        scheme: Scheme,
        /// Relabel vertices and colors with a seeded random permutation.
        #[arg(long)]
        permute_seed: Option<u64>,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Construct the rainbow spanning trees for a coloring.
    Build {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PolicyArg::Min)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the construction trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write a Graphviz rendering of the trees.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Check a forest (and optionally its trace) against a coloring.
    Verify {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[arg(short = 'f', long)]
        forest: PathBuf,
        #[arg(short = 't', long)]
        trace: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Exhaustive rainbow tree count and maximum disjoint packing.
    Oracle {
        #[arg(short = 'i', long)]
        input: PathBuf,
        /// Vertex cap for both the enumeration and the packing search.
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Build and verify over a range of m, writing CSV.
    Bench {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        m_from: u64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        m_to: u64,
        #[arg(long, default_value_t = 1)]
        reps: u64,
        #[arg(long, value_enum, default_value_t = PolicyArg::Min)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scheme {
    RoundRobin,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Min,
    Max,
    Random,
}

impl PolicyArg {
    fn with_seed(self, seed: u64) -> SelectionPolicy {
        match self {
            PolicyArg::Min => SelectionPolicy::MinIndex,
            PolicyArg::Max => SelectionPolicy::MaxIndex,
            PolicyArg::Random => SelectionPolicy::Random(seed),
        }
    }
}

/// A failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

type CliResult = Result<i32, Failure>;

/// Parse `args` (including the program name) and run the subcommand.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.command {
        Command::Gen { m, scheme: Scheme::RoundRobin, permute_seed, output } => gen(m as usize, permute_seed, output),
        Command::Build { input, output, policy, seed, trace, dot } => {
            build(&input, output, policy.with_seed(seed), trace, dot)
        }
        Command::Verify { input, forest, trace, report } => verify(&input, &forest, trace, report),
        Command::Oracle { input, cap } => oracle(&input, cap),
        Command::Bench { m_from, m_to, reps, policy, seed, csv } => {
            bench(m_from as usize, m_to as usize, reps, policy, seed, csv)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(|e| Failure::usage(format!("cannot write to stdout: {e}"))),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn load_coloring(path: &Path) -> Result<EdgeColoring, Failure> {
    parse_coloring(&read_file(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn gen(m: usize, permute_seed: Option<u64>, output: Option<PathBuf>) -> CliResult {
    let coloring = match permute_seed {
        Some(seed) => permuted_round_robin(m, seed),
        None => round_robin(m),
    };
    write_output(output.as_deref(), &serialize_coloring(&coloring))?;
    Ok(EXIT_OK)
}

fn build(
    input: &Path,
    output: Option<PathBuf>,
    policy: SelectionPolicy,
    trace_path: Option<PathBuf>,
    dot: Option<PathBuf>,
) -> CliResult {
    let coloring = load_coloring(input)?;
    match build_forest(&coloring, policy, true) {
        Ok((forest, trace)) => {
            let record = forest.to_record();
            write_output(output.as_deref(), &record.to_json())?;
            if let Some(path) = trace_path {
                write_output(Some(&path), &trace.to_jsonl())?;
            }
            if let Some(path) = dot {
                write_output(Some(&path), to_dot(&record).as_bytes())?;
            }
            eprintln!("built {} rainbow spanning trees for m = {}", forest.trees.len(), coloring.m());
            Ok(EXIT_OK)
        }
        Err(failure) => {
            let dump = trace_path
                .unwrap_or_else(|| PathBuf::from(format!("rainbow-trees-failure-{}.jsonl", &coloring.digest()[..12])));
            let saved = fs::write(&dump, failure.trace.to_jsonl());
            let location = match saved {
                Ok(()) => format!("trace dump written to {}", dump.display()),
                Err(e) => format!("could not write trace dump to {}: {e}", dump.display()),
            };
            Err(Failure {
                code: EXIT_INTERNAL,
                message: format!("internal invariant violated: {}; {location}", failure.error),
            })
        }
    }
}

fn verify(input: &Path, forest_path: &Path, trace_path: Option<PathBuf>, report_path: Option<PathBuf>) -> CliResult {
    let coloring = load_coloring(input)?;
    let forest = ForestRecord::from_json(&read_file(forest_path)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", forest_path.display())))?;
    let trace = match trace_path {
        Some(path) => {
            let text =
                String::from_utf8(read_file(&path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            Some(ConstructionTrace::from_jsonl(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let report = verify_all(&coloring, &forest, trace.as_ref());
    write_output(report_path.as_deref(), &report.to_json())?;
    if report.verdict {
        eprintln!("PASS: {} trees verified for m = {}", report.tree_count, report.m);
        Ok(EXIT_OK)
    } else {
        eprintln!("FAIL: verification failed for m = {}", report.m);
        Ok(EXIT_VERIFY_FAILED)
    }
}

#[derive(Serialize)]
struct OracleOutput {
    count: usize,
    max_disjoint: usize,
}

fn oracle(input: &Path, cap: Option<usize>) -> CliResult {
    let coloring = load_coloring(input)?;
    let enumeration_cap = cap.unwrap_or(DEFAULT_ENUMERATION_CAP);
    let packing_cap = cap.unwrap_or(DEFAULT_PACKING_CAP);
    let count =
        enumerate_rainbow_spanning_trees(&coloring, enumeration_cap).map_err(|e| Failure::usage(e.to_string()))?.len();
    let max_disjoint = max_disjoint_rainbow_trees(&coloring, packing_cap).map_err(|e| Failure::usage(e.to_string()))?;
    let mut out = serde_json::to_vec(&OracleOutput { count, max_disjoint }).expect("plain data serializes");
    out.push(b'\n');
    write_output(None, &out)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct BenchRow {
    m: usize,
    omega: usize,
    trees_built: usize,
    build_micros: u128,
    verify_pass: bool,
    min_candidate_slack: Option<usize>,
}

fn bench(m_from: usize, m_to: usize, reps: u64, policy: PolicyArg, seed: u64, csv_path: Option<PathBuf>) -> CliResult {
    if m_from > m_to {
        return Err(Failure::usage("--m-from must not exceed --m-to"));
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut all_pass = true;
    for m in m_from..=m_to {
        for rep in 0..reps {
            let instance_seed = seed.wrapping_add(rep);
            let coloring = permuted_round_robin(m, instance_seed);
            let started = Instant::now();
            let built = build_forest(&coloring, policy.with_seed(instance_seed), true);
            let build_micros = started.elapsed().as_micros();
            let (trees_built, verify_pass, slack) = match built {
                Ok((forest, trace)) => {
                    let report = verify_all(&coloring, &forest.to_record(), Some(&trace));
                    (forest.trees.len(), report.verdict, trace.min_candidate_slack())
                }
                Err(_) => (0, false, None),
            };
            all_pass &= verify_pass;
            writer
                .serialize(BenchRow {
                    m,
                    omega: omega(m),
                    trees_built,
                    build_micros,
                    verify_pass,
                    min_candidate_slack: slack,
                })
                .map_err(|e| Failure::usage(e.to_string()))?;
        }
    }
    let bytes = writer.into_inner().map_err(|e| Failure::usage(e.to_string()))?;
    write_output(csv_path.as_deref(), &bytes)?;
    Ok(if all_pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}
