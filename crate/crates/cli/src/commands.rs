use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use binlayout::elf::{
    self, BloomParams, ElfError, GnuTable, HashTable, RelFormat, RelocationTable, SymbolSet, SysvTable,
};
use binlayout::icf::{fold_module, FoldOptions, IcfError};
use binlayout::ir::{parse_module, print_module, validate_module, Diagnostic, SyntaxError};
use binlayout::pagesim::{self, CacheConfig, FunctionSize, SimError};
use binlayout::profile::{self, ProfileError, TimeProfile};
use serde::Deserialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::{Cli, Command, DynlinkArgs, FoldArgs, Format, HashStyle, PagesimArgs, RelpackArgs, ReorderArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{source}")]
    Syntax { path: PathBuf, source: SyntaxError },
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error(transparent)]
    Icf(#[from] IcfError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Elf(#[from] ElfError),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "IO",
            CliError::Syntax { .. } => "SYNTAX",
            CliError::Invalid(_) => "INVALID_MODULE",
            CliError::Json { .. } => "BAD_JSON",
            CliError::Icf(_) => "ICF",
            CliError::Profile(_) => "PROFILE",
            CliError::Sim(_) => "PAGESIM",
            CliError::Elf(_) => "ELF",
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(cli: &Cli, out: &Option<PathBuf>, mut report: Value) -> Result<()> {
    if cli.timestamps {
        if let Value::Object(m) = &mut report {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            m.insert("generated_at".into(), json!(secs));
        }
    }
    let mut text = serde_json::to_string_pretty(&report).expect("report values serialize");
    text.push('\n');
    emit(out, &text)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fold(a) => fold(cli, a),
        Command::Reorder(a) => reorder(a),
        Command::Pagesim(a) => pagesim(cli, a),
        Command::Dynlink(a) => dynlink(cli, a),
        Command::Relpack(a) => relpack(cli, a),
    }
}

fn load_module(path: &Path) -> Result<binlayout::ir::MiniModule> {
    let text = read(path)?;
    let m = parse_module(&text).map_err(|source| CliError::Syntax { path: path.to_path_buf(), source })?;
    let diags = validate_module(&m);
    if !diags.is_empty() {
        return Err(CliError::Invalid(diags));
    }
    Ok(m)
}

fn fold(cli: &Cli, a: &FoldArgs) -> Result<()> {
    let m = load_module(&a.input)?;
    let res = fold_module(&m, FoldOptions { jobs: a.jobs })?;
    if let Some(p) = &a.emit_ir {
        write(p, &print_module(&res.module))?;
    }
    emit_json(cli, &a.output.out, to_value(&res.report))
}

fn reorder(a: &ReorderArgs) -> Result<()> {
    let m = load_module(&a.module)?;
    let universe: Vec<String> = m.functions.iter().filter(|f| f.is_defined()).map(|f| f.name.clone()).collect();
    let mut merged: Option<TimeProfile> = None;
    for t in &a.traces {
        let run = profile::record_run(&profile::parse_trace(&read(t)?), &universe)?;
        merged = Some(match merged {
            None => run,
            Some(prev) => profile::merge_profiles(&prev, &run)?,
        });
    }
    let prof = merged.unwrap_or_else(|| TimeProfile::empty(&universe));
    let order = profile::order_functions(&prof, &universe);

    if let Some(p) = &a.profile_out {
        let mut text = serde_json::to_string_pretty(&to_value(&prof.entries)).expect("profile serializes");
        text.push('\n');
        write(p, &text)?;
    }
    if let Some(kc) = &a.partitions {
        let parts = profile::partition_functions(&prof, &order, kc[0], kc[1])?;
        for (i, part) in parts.iter().enumerate() {
            let label = if i + 1 == parts.len() { "rest".to_string() } else { i.to_string() };
            eprintln!("partition {label}: {}", part.join(" "));
        }
    }
    if a.summary {
        for name in order.iter().filter(|n| prof.get(n).is_some_and(|r| r.first_visit.is_some())) {
            let r = prof.get(name).expect("profiled");
            eprintln!(
                "{name} first={} last={} startup_score={}",
                r.first_visit.unwrap_or(0),
                r.last_visit.unwrap_or(0),
                r.startup_score().unwrap_or(0)
            );
        }
    }
    let prefix = if a.section_prefix { ".text." } else { "" };
    let text: String = order.iter().map(|n| format!("{prefix}{n}\n")).collect();
    emit(&a.output.out, &text)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LayoutInput {
    List(Vec<FunctionSize>),
    File { functions: Vec<FunctionSize>, total_size: Option<u64> },
}

fn pagesim(cli: &Cli, a: &PagesimArgs) -> Result<()> {
    let text = read(&a.layout)?;
    let input: LayoutInput =
        serde_json::from_str(&text).map_err(|e| CliError::Json { path: a.layout.clone(), message: e.to_string() })?;
    let (functions, total) = match input {
        LayoutInput::List(f) => (f, None),
        LayoutInput::File { functions, total_size } => (functions, total_size),
    };
    let mut layout = pagesim::layout_functions(&functions, a.page_size, a.align)?;
    if let Some(t) = total {
        if t < layout.total_size {
            return Err(SimError::InvalidArgument(format!(
                "total_size {t} is smaller than the laid-out functions ({})",
                layout.total_size
            ))
            .into());
        }
        layout.total_size = t;
    }
    let trace = profile::parse_trace(&read(&a.trace)?);
    let rep = if a.preload {
        for name in &trace {
            if layout.find(name).is_none() {
                return Err(SimError::UnknownFunction(name.clone()).into());
            }
        }
        pagesim::simulate_preload(&layout)
    } else {
        pagesim::simulate_startup(&layout, &trace, CacheConfig { readahead_sectors: a.readahead_sectors })?
    };
    if let Some(p) = &a.csv {
        write(p, &pagesim::emit_seek_report(&rep))?;
    }
    if a.summary {
        eprintln!(
            "{} pages in {} reads, {} seeks (~{:.0} ms at {} ms/seek)",
            rep.distinct_pages_read,
            rep.read_events,
            rep.seek_count,
            rep.estimated_seek_ms(a.seek_ms),
            a.seek_ms
        );
    }
    emit_json(
        cli,
        &a.output.out,
        json!({"pages": rep.distinct_pages_read, "events": rep.read_events, "seeks": rep.seek_count}),
    )
}

fn dynlink(cli: &Cli, a: &DynlinkArgs) -> Result<()> {
    let mut scopes = Vec::new();
    let mut stats = Vec::new();
    for path in &a.symbols {
        let set = SymbolSet::parse(&read(path)?)?;
        let table = match a.hash {
            HashStyle::Sysv => {
                let t = SysvTable::build(&set, a.nbuckets)?;
                let s = elf::chain_statistics(&t);
                if a.histogram {
                    eprint!("{}", s.render_readelf(0, 0));
                }
                stats.push(json!({
                    "file": path.display().to_string(),
                    "symbols": s.nsymbols,
                    "buckets": s.nbuckets,
                    "histogram": s.histogram,
                    "avg_successful": s.avg_successful,
                    "avg_unsuccessful": s.avg_unsuccessful,
                }));
                HashTable::Sysv(t)
            }
            HashStyle::Gnu => {
                let bloom = match a.bloom_words {
                    Some(w) => BloomParams { maskwords: w, shift: a.bloom_shift, ..Default::default() },
                    None => BloomParams { shift: a.bloom_shift, ..BloomParams::sized_for(set.len()) },
                };
                stats.push(json!({
                    "file": path.display().to_string(),
                    "symbols": set.len(),
                    "buckets": a.nbuckets,
                    "bloom_words": bloom.maskwords,
                }));
                HashTable::Gnu(GnuTable::build(&set, a.nbuckets, bloom)?)
            }
        };
        scopes.push(table);
    }
    let probes = profile::parse_trace(&read(&a.probes)?);
    let cost = elf::simulate_relocation_lookups(&scopes, &probes, a.cache);
    let mut report = Map::new();
    report.insert("scopes".into(), Value::Array(stats));
    report.insert("cost".into(), to_value(&cost));
    emit_json(cli, &a.output.out, Value::Object(report))
}

fn relpack(cli: &Cli, a: &RelpackArgs) -> Result<()> {
    let entries = elf::parse_relocation_csv(&read(&a.relocs)?)?;
    let format = match a.format {
        Format::Rel => RelFormat::Rel,
        Format::Rela => RelFormat::Rela,
    };
    let table = RelocationTable { entries, format, wordsize: a.wordsize };
    let packed = elf::pack_table(&table)?;
    let without_sym = table.entries.iter().filter(|r| r.sym.is_none()).count() as u64;
    let waste = elf::waste_report(table.entries.len() as u64, without_sym)?;
    if a.waste_text {
        eprint!("{}", waste.render_text());
    }
    let report = json!({
        "entries": table.entries.len(),
        "format": format.to_string(),
        "wordsize": a.wordsize,
        "relative": table.entries.len() - packed.passthrough.len(),
        "runs": packed.packed.runs.len(),
        "original_bytes": packed.original_bytes,
        "packed_bytes": packed.packed_bytes,
        "waste": to_value(&waste),
    });
    emit_json(cli, &a.output.out, report)
}
