use crate::fnv::{fold_words, Fnv1a};
use crate::ir::{cfg_checksum, MiniFunction, StatementKind};

use super::IcfError;

/// Name-independent summary of a function body. Equal functions always
/// have equal fingerprints; the converse does not hold.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    pub arg_count: u32,
    pub bb_count: u32,
    pub edge_count: u32,
    pub cfg_checksum: u32,
    pub bb_sizes: Vec<u32>,
    pub bb_kind_hashes: Vec<u32>,
    pub compound: u32,
}

pub fn fingerprint_function(f: &MiniFunction) -> Result<Fingerprint, IcfError> {
    if !f.is_defined() {
        return Err(IcfError::ExternalFunction(f.name.clone()));
    }
    let bb_sizes: Vec<u32> = f.blocks.iter().map(|b| b.nondebug_stmt_count() as u32).collect();
    let bb_kind_hashes: Vec<u32> = f
        .blocks
        .iter()
        .map(|b| {
            fold_words(b.statements.iter().map(|s| s.kind()).filter(|k| *k != StatementKind::Debug).map(|k| k.code()))
        })
        .collect();
    let arg_count = f.params.len() as u32;
    let bb_count = f.blocks.len() as u32;
    let edge_count = f.edge_count() as u32;
    let cfg_checksum = cfg_checksum(f);

    let mut h = Fnv1a::new();
    for w in [arg_count, bb_count, edge_count, cfg_checksum] {
        h.write_u32(w);
    }
    for w in bb_sizes.iter().chain(bb_kind_hashes.iter()) {
        h.write_u32(*w);
    }
    Ok(Fingerprint { arg_count, bb_count, edge_count, cfg_checksum, bb_sizes, bb_kind_hashes, compound: h.finish() })
}
