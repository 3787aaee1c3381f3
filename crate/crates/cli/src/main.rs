use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "binlayout", version, about = "Function folding, start-up layout and dynamic-linking cost models")]
struct Cli {
    /// Add a `generated_at` field (Unix seconds) to JSON reports.
    #[arg(long, global = true)]
    timestamps: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fold identical functions of a mini-IR module.
    Fold(FoldArgs),
    /// Order functions by a time profile recorded from start-up traces.
    Reorder(ReorderArgs),
    /// Count page reads of a start-up trace under read-ahead.
    Pagesim(PagesimArgs),
    /// Simulate symbol lookups across dynamic-linker scopes.
    Dynlink(DynlinkArgs),
    /// Pack relative relocations and account wasted table bytes.
    Relpack(RelpackArgs),
}

#[derive(Args, Debug)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long, visible_alias = "report")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FoldArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Also write the folded module as mini-IR text.
    #[arg(long, value_name = "FILE")]
    emit_ir: Option<PathBuf>,
    /// Comparator threads; defaults to the number of logical CPUs.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ReorderArgs {
    #[arg(long, value_name = "FILE")]
    module: PathBuf,
    /// Start-up call traces; several are merged into one profile.
    #[arg(long = "trace", value_name = "FILE", required = true)]
    traces: Vec<PathBuf>,
    /// Write the profile dump (JSON) here.
    #[arg(long, value_name = "FILE")]
    profile_out: Option<PathBuf>,
    /// Prefix each ordered name with `.text.` for use as a section-ordering file.
    #[arg(long)]
    section_prefix: bool,
    /// Also print profiled partitions: K partitions of CAPACITY functions.
    #[arg(long, value_names = ["K", "CAPACITY"], num_args = 2)]
    partitions: Option<Vec<usize>>,
    /// Print per-function start-up scores to stderr.
    #[arg(long)]
    summary: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct PagesimArgs {
    /// JSON list of {"name","size"} in layout order, or an object with
    /// "functions" and an optional "total_size".
    #[arg(long, value_name = "FILE")]
    layout: PathBuf,
    #[arg(long, value_name = "FILE")]
    trace: PathBuf,
    #[arg(long, default_value_t = 4096)]
    page_size: u64,
    #[arg(long, default_value_t = 256)]
    readahead_sectors: u64,
    #[arg(long, default_value_t = 16)]
    align: u64,
    /// Write the read events as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Read the whole file sequentially instead of on demand.
    #[arg(long)]
    preload: bool,
    /// Cost of one seek in milliseconds for the stderr summary.
    #[arg(long, default_value_t = 30.0)]
    seek_ms: f64,
    #[arg(long)]
    summary: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum HashStyle {
    Sysv,
    Gnu,
}

#[derive(Args, Debug)]
struct DynlinkArgs {
    /// Symbol list of one scope, one name per line; repeat in search order.
    #[arg(long = "symbols", value_name = "FILE", required = true)]
    symbols: Vec<PathBuf>,
    /// Names to resolve, one per line.
    #[arg(long, value_name = "FILE")]
    probes: PathBuf,
    #[arg(long, value_enum, default_value_t = HashStyle::Sysv)]
    hash: HashStyle,
    #[arg(long)]
    nbuckets: usize,
    /// Bloom filter size in machine words (power of two); defaults to
    /// one word per eight symbols.
    #[arg(long)]
    bloom_words: Option<usize>,
    #[arg(long, default_value_t = 6)]
    bloom_shift: u32,
    /// Skip repeated lookups of the same name.
    #[arg(long)]
    cache: bool,
    /// Print the bucket histogram of each SysV scope to stderr.
    #[arg(long)]
    histogram: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Rel,
    Rela,
}

#[derive(Args, Debug)]
struct RelpackArgs {
    /// CSV with `offset,rtype,has_sym,addend` rows.
    #[arg(long, value_name = "FILE")]
    relocs: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Rela)]
    format: Format,
    #[arg(long, default_value_t = 64)]
    wordsize: u32,
    /// Print the wasted-bytes table to stderr.
    #[arg(long)]
    waste_text: bool,
    #[command(flatten)]
    output: Output,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            for line in e.to_string().lines() {
                eprintln!("ERROR {}: {line}", e.code());
            }
            ExitCode::from(1)
        }
    }
}
