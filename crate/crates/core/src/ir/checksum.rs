use crate::fnv;

use super::types::MiniFunction;

/// Control-flow checksum: FNV-1a over the block count and, per block, the
/// out-degree followed by each edge's destination ordinal and flag bits.
/// Statement contents and names never enter the hash.
pub fn cfg_checksum(f: &MiniFunction) -> u32 {
    let mut words = vec![f.blocks.len() as u32];
    for b in &f.blocks {
        words.push(b.out_edges.len() as u32);
        for e in &b.out_edges {
            let dest = f.block_index(&e.dest).map_or(u32::MAX, |i| i as u32);
            words.push(dest);
            words.push(u32::from(e.flags.bits()));
        }
    }
    fnv::fold_words(words)
}
