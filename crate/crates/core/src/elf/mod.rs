//! Dynamic-linking cost models: SysV and GNU symbol hash tables, chain
//! statistics, lookup-scope simulation, and relocation table accounting.

mod hash;
mod reloc;
mod stats;
mod table;

use thiserror::Error;

pub use hash::{elf_gnu_hash, elf_sysv_hash};
pub use reloc::{
    entry_size, pack_relative_relocations, pack_table, parse_relocation_csv, relocation_table_size, waste_report,
    PackedRelocations, PackedTable, RelFormat, Relocation, RelocationTable, Run, WasteItem, WasteReport, R_RELATIVE,
};
pub use stats::{chain_statistics, simulate_relocation_lookups, ChainStats, CostReport};
pub use table::{BloomParams, GnuTable, HashTable, LookupResult, SymbolSet, SysvTable};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ElfError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("offset 0x{0:x} does not fit in 32 bits")]
    OffsetOverflow(u64),
    #[error("offsets not strictly increasing at index {0}")]
    Unsorted(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
