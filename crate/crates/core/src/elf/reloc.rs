use std::fmt;

use serde::Serialize;

use super::ElfError;
use crate::ratio::Ratio;

/// `R_X86_64_RELATIVE`.
pub const R_RELATIVE: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RelFormat {
    Rel,
    Rela,
}

impl fmt::Display for RelFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelFormat::Rel => "REL",
            RelFormat::Rela => "RELA",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Relocation {
    pub offset: u64,
    pub rtype: u32,
    pub sym: Option<u32>,
    pub addend: Option<i64>,
}

impl Relocation {
    pub fn is_relative(&self) -> bool {
        self.rtype == R_RELATIVE && self.sym.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelocationTable {
    pub entries: Vec<Relocation>,
    pub format: RelFormat,
    pub wordsize: u32,
}

/// Bytes per entry: two or three fields of the machine word size.
pub fn entry_size(format: RelFormat, wordsize: u32) -> Result<u64, ElfError> {
    let word = match wordsize {
        32 => 4,
        64 => 8,
        other => return Err(ElfError::InvalidArgument(format!("unsupported word size {other}"))),
    };
    Ok(match format {
        RelFormat::Rel => 2 * word,
        RelFormat::Rela => 3 * word,
    })
}

pub fn relocation_table_size(n: u64, format: RelFormat, wordsize: u32) -> Result<u64, ElfError> {
    Ok(n * entry_size(format, wordsize)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Run {
    pub start_offset: u32,
    pub count: u32,
}

/// Relative relocations as (start, count) pairs of 8 bytes each.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PackedRelocations {
    pub runs: Vec<Run>,
    pub stride: u32,
}

impl PackedRelocations {
    pub const RUN_BYTES: u64 = 8;

    pub fn byte_size(&self) -> u64 {
        self.runs.len() as u64 * Self::RUN_BYTES
    }

    pub fn unpack(&self) -> Vec<u64> {
        self.runs
            .iter()
            .flat_map(|r| (0..r.count as u64).map(move |i| r.start_offset as u64 + i * self.stride as u64))
            .collect()
    }
}

/// Group strictly increasing offsets into runs spaced by the word size.
pub fn pack_relative_relocations(offsets: &[u64], wordsize: u32) -> Result<PackedRelocations, ElfError> {
    let stride = match wordsize {
        32 => 4u64,
        64 => 8,
        other => return Err(ElfError::InvalidArgument(format!("unsupported word size {other}"))),
    };
    let mut runs: Vec<Run> = Vec::new();
    let mut prev: Option<u64> = None;
    for (i, &off) in offsets.iter().enumerate() {
        if off > u32::MAX as u64 {
            return Err(ElfError::OffsetOverflow(off));
        }
        if prev.is_some_and(|p| off <= p) {
            return Err(ElfError::Unsorted(i));
        }
        match runs.last_mut() {
            Some(r) if prev.is_some_and(|p| p + stride == off) && r.count < u32::MAX => r.count += 1,
            _ => runs.push(Run { start_offset: off as u32, count: 1 }),
        }
        prev = Some(off);
    }
    Ok(PackedRelocations { runs, stride: stride as u32 })
}

/// Packing outcome for a mixed table: relative entries packed, the rest
/// passed through unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedTable {
    pub packed: PackedRelocations,
    pub passthrough: Vec<Relocation>,
    pub original_bytes: u64,
    pub packed_bytes: u64,
}

pub fn pack_table(t: &RelocationTable) -> Result<PackedTable, ElfError> {
    let mut relative: Vec<u64> = t.entries.iter().filter(|r| r.is_relative()).map(|r| r.offset).collect();
    relative.sort_unstable();
    if let Some(w) = relative.windows(2).position(|w| w[0] == w[1]) {
        return Err(ElfError::InvalidArgument(format!("duplicate relative relocation at 0x{:x}", relative[w])));
    }
    let packed = pack_relative_relocations(&relative, t.wordsize)?;
    let passthrough: Vec<Relocation> = t.entries.iter().filter(|r| !r.is_relative()).cloned().collect();
    let original_bytes = relocation_table_size(t.entries.len() as u64, t.format, t.wordsize)?;
    let packed_bytes = packed.byte_size() + relocation_table_size(passthrough.len() as u64, t.format, t.wordsize)?;
    Ok(PackedTable { packed, passthrough, original_bytes, packed_bytes })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WasteItem {
    pub bytes: u64,
    /// Fraction of the table.
    pub share: Ratio,
    /// `share` as a percentage with two decimals.
    pub percent: String,
}

/// Bytes of a RELA/64 table that carry no information: duplicated addends,
/// oversized type and symbol fields, and 64-bit offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WasteReport {
    pub table_bytes: u64,
    pub addend: WasteItem,
    pub rtype: WasteItem,
    pub symref: WasteItem,
    pub offset: WasteItem,
    pub total: WasteItem,
}

impl WasteReport {
    pub fn render_text(&self) -> String {
        let rows = [
            ("addend", &self.addend),
            ("type", &self.rtype),
            ("symref", &self.symref),
            ("offset", &self.offset),
            ("total", &self.total),
        ];
        let mut out = format!("{:<8} {:>12} {:>8}\n", "field", "bytes", "share");
        for (name, item) in rows {
            out.push_str(&format!("{name:<8} {:>12} {:>7}%\n", item.bytes, item.percent));
        }
        out.push_str(&format!("{:<8} {:>12}\n", "table", self.table_bytes));
        out
    }
}

pub fn waste_report(total_entries: u64, without_symref: u64) -> Result<WasteReport, ElfError> {
    if without_symref > total_entries {
        return Err(ElfError::InvalidArgument("more entries without symbol than entries".into()));
    }
    let table_bytes = relocation_table_size(total_entries, RelFormat::Rela, 64)?;
    let item = |bytes: u64| {
        let share = Ratio::new(bytes as u128, table_bytes as u128);
        WasteItem { bytes, share, percent: share.percent(2) }
    };
    let parts = [8 * total_entries, 3 * total_entries, 4 * without_symref, 4 * total_entries];
    Ok(WasteReport {
        table_bytes,
        addend: item(parts[0]),
        rtype: item(parts[1]),
        symref: item(parts[2]),
        offset: item(parts[3]),
        total: item(parts.iter().sum()),
    })
}

fn parse_int(field: &str) -> Option<i128> {
    let f = field.trim();
    let (neg, body) = match f.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, f),
    };
    let v = match body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        Some(hex) => i128::from_str_radix(hex, 16).ok()?,
        None => body.parse::<i128>().ok()?,
    };
    Some(if neg { -v } else { v })
}

/// `offset,rtype,has_sym,addend` per line. Offsets may be hex (`0x`); an
/// empty addend means none. A leading header line is skipped.
pub fn parse_relocation_csv(text: &str) -> Result<Vec<Relocation>, ElfError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("offset")) {
            continue;
        }
        let bad = |what: &str| ElfError::Parse { line: i + 1, message: what.to_string() };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let offset = parse_int(fields[0]).and_then(|v| u64::try_from(v).ok()).ok_or_else(|| bad("bad offset"))?;
        let rtype = parse_int(fields[1]).and_then(|v| u32::try_from(v).ok()).ok_or_else(|| bad("bad type"))?;
        let sym = match fields[2].trim() {
            "0" | "false" => None,
            "1" | "true" => Some(0),
            other => Some(parse_int(other).and_then(|v| u32::try_from(v).ok()).ok_or_else(|| bad("bad symbol"))?),
        };
        let addend = match fields[3].trim() {
            "" => None,
            a => Some(parse_int(a).and_then(|v| i64::try_from(v).ok()).ok_or_else(|| bad("bad addend"))?),
        };
        out.push(Relocation { offset, rtype, sym, addend });
    }
    Ok(out)
}
