use std::fmt::Write;

use serde::Serialize;

use super::{HashTable, SysvTable};
use crate::ratio::Ratio;

/// Bucket-length distribution of a SysV table and the expected number of
/// string comparisons per lookup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainStats {
    pub nbuckets: u64,
    pub nsymbols: u64,
    /// `histogram[len]` = number of buckets whose chain has length `len`.
    pub histogram: Vec<u64>,
    pub avg_successful: Ratio,
    pub avg_unsuccessful: Ratio,
}

impl ChainStats {
    pub fn from_histogram(histogram: &[u64]) -> ChainStats {
        let mut histogram = histogram.to_vec();
        while histogram.len() > 1 && histogram.last() == Some(&0) {
            histogram.pop();
        }
        let nbuckets: u64 = histogram.iter().sum();
        let nsymbols: u64 = histogram.iter().enumerate().map(|(len, n)| len as u64 * n).sum();
        let probes: u64 = histogram.iter().enumerate().map(|(len, n)| (len as u64 * (len as u64 + 1) / 2) * n).sum();
        ChainStats {
            nbuckets,
            nsymbols,
            histogram,
            avg_successful: Ratio::new(probes as u128, nsymbols as u128),
            avg_unsuccessful: Ratio::new(nsymbols as u128, nbuckets as u128),
        }
    }

    /// Text in the layout of `eu-readelf -I`.
    pub fn render_readelf(&self, addr: u64, offset: u64) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Hist. for bucket list length in section '.hash' ({} buckets):", self.nbuckets);
        let _ = writeln!(out, " Addr: 0x{addr:08x}  Offset: 0x{offset:06x}  Link to section: '.dynsym'");
        out.push_str(" Length  Number  % of total  Coverage\n");
        let pct = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 * 100.0 / d as f64 };
        let zero = self.histogram.first().copied().unwrap_or(0);
        let _ = writeln!(out, "      0  {zero:6}      {:5.1}%", pct(zero, self.nbuckets));
        let mut covered = 0u64;
        for (len, &n) in self.histogram.iter().enumerate().skip(1) {
            covered += n * len as u64;
            let _ = writeln!(
                out,
                "{len:7}  {n:6}      {:5.1}%    {:5.1}%",
                pct(n, self.nbuckets),
                pct(covered, self.nsymbols)
            );
        }
        let _ = writeln!(out, " Average number of tests:   successful lookup: {:.6}", self.avg_successful.as_f64());
        let _ = writeln!(out, "\t\t\t  unsuccessful lookup: {:.6}", self.avg_unsuccessful.as_f64());
        out
    }
}

pub fn chain_statistics(t: &SysvTable) -> ChainStats {
    let longest = t.buckets.iter().map(Vec::len).max().unwrap_or(0);
    let mut histogram = vec![0u64; longest + 1];
    for b in &t.buckets {
        histogram[b.len()] += 1;
    }
    ChainStats::from_histogram(&histogram)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub relocations: u64,
    pub lookups: u64,
    pub cache_hits: u64,
    pub unresolved: u64,
    pub total_string_comparisons: u64,
    pub total_hash_comparisons: u64,
    pub bloom_rejections: u64,
    pub scopes_searched: u64,
    pub avg_scopes_searched: Ratio,
    pub avg_string_comparisons: Ratio,
}

/// Resolve each relocation by searching `scopes` in order. With the cache
/// enabled a name already resolved (or found missing) is not searched again.
pub fn simulate_relocation_lookups<S: AsRef<[u8]>>(
    scopes: &[HashTable],
    relocations: &[S],
    cache_enabled: bool,
) -> CostReport {
    let mut rep = CostReport { relocations: relocations.len() as u64, ..Default::default() };
    let mut seen: std::collections::HashSet<&[u8]> = std::collections::HashSet::new();
    for name in relocations {
        let name = name.as_ref();
        if cache_enabled && !seen.insert(name) {
            rep.cache_hits += 1;
            continue;
        }
        rep.lookups += 1;
        let mut found = false;
        for t in scopes {
            rep.scopes_searched += 1;
            let r = t.lookup(name);
            rep.total_string_comparisons += r.string_comparisons;
            rep.total_hash_comparisons += r.hash_comparisons;
            rep.bloom_rejections += r.bloom_rejected as u64;
            if r.found {
                found = true;
                break;
            }
        }
        rep.unresolved += !found as u64;
    }
    rep.avg_scopes_searched = Ratio::new(rep.scopes_searched as u128, rep.lookups as u128);
    rep.avg_string_comparisons = Ratio::new(rep.total_string_comparisons as u128, rep.lookups as u128);
    rep
}
