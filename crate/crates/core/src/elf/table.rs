use std::collections::HashSet;

use serde::Serialize;

use super::{elf_gnu_hash, elf_sysv_hash, ElfError};

/// Dynamic symbol names of one shared object, unique and ordered.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolSet {
    names: Vec<Vec<u8>>,
}

impl SymbolSet {
    pub fn new<I, S>(names: I) -> Result<Self, ElfError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let names: Vec<Vec<u8>> = names.into_iter().map(|n| n.as_ref().to_vec()).collect();
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_slice()) {
                return Err(ElfError::InvalidArgument(format!("duplicate symbol {}", String::from_utf8_lossy(n))));
            }
        }
        Ok(SymbolSet { names })
    }

    /// One name per line; blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, ElfError> {
        Self::new(text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn names(&self) -> &[Vec<u8>] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, name: &[u8]) -> bool {
        self.names.iter().any(|n| n == name)
    }
}

/// Outcome of one symbol lookup in one table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LookupResult {
    pub found: bool,
    pub string_comparisons: u64,
    pub bloom_rejected: bool,
    pub hash_comparisons: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SysvTable {
    pub nbuckets: usize,
    /// Symbol indices per bucket, in input order.
    pub buckets: Vec<Vec<usize>>,
    pub names: Vec<Vec<u8>>,
}

impl SysvTable {
    pub fn build(symbols: &SymbolSet, nbuckets: usize) -> Result<Self, ElfError> {
        if nbuckets == 0 {
            return Err(ElfError::InvalidArgument("nbuckets must be at least 1".into()));
        }
        let mut buckets = vec![Vec::new(); nbuckets];
        for (i, n) in symbols.names().iter().enumerate() {
            buckets[elf_sysv_hash(n) as usize % nbuckets].push(i);
        }
        Ok(SysvTable { nbuckets, buckets, names: symbols.names().to_vec() })
    }

    pub fn chain(&self, name: &[u8]) -> &[usize] {
        &self.buckets[elf_sysv_hash(name) as usize % self.nbuckets]
    }

    pub fn lookup(&self, name: &[u8]) -> LookupResult {
        let mut r = LookupResult::default();
        for &i in self.chain(name) {
            r.string_comparisons += 1;
            if self.names[i] == name {
                r.found = true;
                break;
            }
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BloomParams {
    pub maskwords: usize,
    pub shift: u32,
    pub word_bits: u32,
}

impl Default for BloomParams {
    fn default() -> Self {
        BloomParams { maskwords: 1, shift: 6, word_bits: 64 }
    }
}

impl BloomParams {
    /// Smallest power-of-two word count giving at least `nsymbols / 8` words.
    pub fn sized_for(nsymbols: usize) -> Self {
        BloomParams { maskwords: nsymbols.div_ceil(8).max(1).next_power_of_two(), ..Default::default() }
    }

    pub fn bits(&self) -> u64 {
        self.maskwords as u64 * self.word_bits as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GnuTable {
    pub nbuckets: usize,
    pub bloom: BloomParams,
    /// Bloom bitset, `bloom.bits()` bits packed into 64-bit words.
    pub bloom_words: Vec<u64>,
    pub buckets: Vec<Vec<usize>>,
    /// Stored hashes per bucket; bit 0 set on the last entry of each chain.
    pub chains: Vec<Vec<u32>>,
    pub names: Vec<Vec<u8>>,
}

impl GnuTable {
    pub fn build(symbols: &SymbolSet, nbuckets: usize, bloom: BloomParams) -> Result<Self, ElfError> {
        if nbuckets == 0 {
            return Err(ElfError::InvalidArgument("nbuckets must be at least 1".into()));
        }
        if bloom.maskwords == 0 || !bloom.maskwords.is_power_of_two() {
            return Err(ElfError::InvalidArgument("bloom maskwords must be a power of two".into()));
        }
        if bloom.word_bits != 32 && bloom.word_bits != 64 {
            return Err(ElfError::InvalidArgument("bloom word size must be 32 or 64 bits".into()));
        }
        if bloom.shift >= 32 {
            return Err(ElfError::InvalidArgument("bloom shift must be below 32".into()));
        }
        let nbits = bloom.bits();
        let mut t = GnuTable {
            nbuckets,
            bloom,
            bloom_words: vec![0; nbits.div_ceil(64) as usize],
            buckets: vec![Vec::new(); nbuckets],
            chains: vec![Vec::new(); nbuckets],
            names: symbols.names().to_vec(),
        };
        for (i, n) in symbols.names().iter().enumerate() {
            let h = elf_gnu_hash(n);
            for bit in t.bloom_bits(h) {
                t.bloom_words[(bit / 64) as usize] |= 1 << (bit % 64);
            }
            let b = h as usize % nbuckets;
            if let Some(prev) = t.chains[b].last_mut() {
                *prev &= !1;
            }
            t.buckets[b].push(i);
            t.chains[b].push(h | 1);
        }
        Ok(t)
    }

    fn bloom_bits(&self, h: u32) -> [u64; 2] {
        let nbits = self.bloom.bits();
        [h as u64 % nbits, (h >> self.bloom.shift) as u64 % nbits]
    }

    pub fn bloom_accepts(&self, name: &[u8]) -> bool {
        self.bloom_bits(elf_gnu_hash(name))
            .iter()
            .all(|&bit| self.bloom_words[(bit / 64) as usize] >> (bit % 64) & 1 == 1)
    }

    pub fn lookup(&self, name: &[u8]) -> LookupResult {
        let mut r = LookupResult::default();
        let h = elf_gnu_hash(name);
        if !self.bloom_accepts(name) {
            r.bloom_rejected = true;
            return r;
        }
        let b = h as usize % self.nbuckets;
        for (&stored, &sym) in self.chains[b].iter().zip(&self.buckets[b]) {
            r.hash_comparisons += 1;
            if (stored | 1) == (h | 1) {
                r.string_comparisons += 1;
                if self.names[sym] == name {
                    r.found = true;
                    break;
                }
            }
            if stored & 1 == 1 {
                break;
            }
        }
        r
    }
}

/// Either hash-table flavour, as searched by a lookup scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HashTable {
    Sysv(SysvTable),
    Gnu(GnuTable),
}

impl HashTable {
    pub fn lookup(&self, name: &[u8]) -> LookupResult {
        match self {
            HashTable::Sysv(t) => t.lookup(name),
            HashTable::Gnu(t) => t.lookup(name),
        }
    }
}
