//! Cold start-up simulation: which file pages does a call trace fault in
//! under a fixed read-ahead window?

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECTOR_SIZE: u64 = 256;
pub const DEFAULT_PAGE_SIZE: u64 = 4096;
pub const DEFAULT_READAHEAD_SECTORS: u64 = 256;
pub const DEFAULT_ALIGNMENT: u64 = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("function {0} is not placed in the layout")]
    UnknownFunction(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSize {
    pub name: String,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Placement {
    pub name: String,
    pub offset: u64,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BinaryLayout {
    pub placements: Vec<Placement>,
    pub total_size: u64,
    pub page_size: u64,
    pub alignment: u64,
}

impl BinaryLayout {
    pub fn page_count(&self) -> u64 {
        self.total_size.div_ceil(self.page_size)
    }

    pub fn find(&self, name: &str) -> Option<&Placement> {
        self.placements.iter().find(|p| p.name == name)
    }
}

/// Place functions back to back in the given order, each start aligned.
/// `total_size` includes the tail padding of the last function.
pub fn layout_functions(order: &[FunctionSize], page_size: u64, alignment: u64) -> Result<BinaryLayout, SimError> {
    if page_size == 0 || alignment == 0 {
        return Err(SimError::InvalidArgument("page size and alignment must be positive".into()));
    }
    let mut offset = 0u64;
    let mut placements = Vec::with_capacity(order.len());
    for f in order {
        if f.size == 0 {
            return Err(SimError::InvalidArgument(format!("function {} has size 0", f.name)));
        }
        placements.push(Placement { name: f.name.clone(), offset, size: f.size });
        offset += f.size.next_multiple_of(alignment);
    }
    Ok(BinaryLayout { placements, total_size: offset, page_size, alignment })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheConfig {
    pub readahead_sectors: u64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig { readahead_sectors: DEFAULT_READAHEAD_SECTORS }
    }
}

impl CacheConfig {
    /// Pages fetched by one read, never less than one.
    pub fn window_pages(&self, page_size: u64) -> u64 {
        (self.readahead_sectors * SECTOR_SIZE / page_size).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReadEvent {
    pub sequence: usize,
    pub start_page: u64,
    pub pages_read: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PageReadReport {
    pub distinct_pages_read: u64,
    pub read_events: usize,
    pub seek_count: usize,
    pub page_size: u64,
    pub events: Vec<ReadEvent>,
}

impl PageReadReport {
    pub fn estimated_seek_ms(&self, seek_ms: f64) -> f64 {
        self.seek_count as f64 * seek_ms
    }
}

pub fn simulate_startup(layout: &BinaryLayout, trace: &[String], cfg: CacheConfig) -> Result<PageReadReport, SimError> {
    let by_name: HashMap<&str, &Placement> = layout.placements.iter().map(|p| (p.name.as_str(), p)).collect();
    let ps = layout.page_size;
    let window = cfg.window_pages(ps);
    let file_pages = layout.page_count();
    let mut resident: BTreeSet<u64> = BTreeSet::new();
    let mut rep = PageReadReport { page_size: ps, ..Default::default() };

    for name in trace {
        let p = by_name.get(name.as_str()).ok_or_else(|| SimError::UnknownFunction(name.clone()))?;
        let first = p.offset / ps;
        let last = (p.offset + p.size - 1) / ps;
        for page in first..=last {
            if resident.contains(&page) {
                continue;
            }
            // Stop at the end of the file or at the first page already cached.
            let limit = (page + window).min(file_pages.max(page + 1));
            let end = resident.range(page..limit).next().copied().unwrap_or(limit);
            resident.extend(page..end);
            rep.events.push(ReadEvent { sequence: rep.events.len(), start_page: page, pages_read: end - page });
        }
    }
    rep.distinct_pages_read = resident.len() as u64;
    rep.read_events = rep.events.len();
    rep.seek_count = rep
        .events
        .iter()
        .enumerate()
        .filter(|(i, e)| *i == 0 || rep.events[i - 1].start_page + rep.events[i - 1].pages_read != e.start_page)
        .count();
    Ok(rep)
}

/// Sequential read of the whole file, for comparison with demand paging.
pub fn simulate_preload(layout: &BinaryLayout) -> PageReadReport {
    let pages = layout.page_count();
    let events =
        if pages == 0 { Vec::new() } else { vec![ReadEvent { sequence: 0, start_page: 0, pages_read: pages }] };
    PageReadReport {
        distinct_pages_read: pages,
        read_events: events.len(),
        seek_count: events.len(),
        page_size: layout.page_size,
        events,
    }
}

pub fn emit_seek_report(rep: &PageReadReport) -> String {
    let mut out = String::from("sequence,start_offset_bytes,pages_read\n");
    for e in &rep.events {
        let _ = writeln!(out, "{},{},{}", e.sequence, e.start_page * rep.page_size, e.pages_read);
    }
    out
}
