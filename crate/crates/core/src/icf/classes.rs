//! Congruence classes and their refinement by call targets.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::ir::{MiniModule, Statement};

use super::Fingerprint;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CongruenceClass {
    pub id: usize,
    /// Function indices, ascending.
    pub members: Vec<usize>,
}

/// Where a call lands: a function of the module that has a body, or some
/// other symbol compared by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CallTarget {
    Function(usize),
    External(String),
}

/// Call targets of each function, in statement order.
pub type CallVectors = BTreeMap<usize, Vec<CallTarget>>;

/// Resolve every call of every defined function. Aliases are followed to the
/// function whose body they share.
pub fn call_vectors(m: &MiniModule) -> CallVectors {
    let mut out = CallVectors::new();
    for (i, f) in m.functions.iter().enumerate() {
        if !f.is_defined() {
            continue;
        }
        let targets = f
            .blocks
            .iter()
            .flat_map(|b| b.statements.iter())
            .filter_map(|s| match s {
                Statement::Call { callee, .. } => Some(resolve_callee(m, callee)),
                _ => None,
            })
            .collect();
        out.insert(i, targets);
    }
    out
}

pub fn resolve_callee(m: &MiniModule, name: &str) -> CallTarget {
    let mut current = name;
    for _ in 0..=m.functions.len() {
        match m.position(current) {
            Some(i) if m.functions[i].is_defined() => return CallTarget::Function(i),
            Some(i) => match &m.functions[i].alias_of {
                Some(t) => current = t,
                None => break,
            },
            None => break,
        }
    }
    CallTarget::External(name.to_string())
}

/// Group functions by compound hash. Class ids follow first appearance.
pub fn build_initial_classes(fps: &[(usize, Fingerprint)]) -> Vec<CongruenceClass> {
    let mut by_hash: HashMap<u32, usize> = HashMap::new();
    let mut classes: Vec<CongruenceClass> = Vec::new();
    for (func, fp) in fps {
        let id = *by_hash.entry(fp.compound).or_insert_with(|| {
            classes.push(CongruenceClass { id: classes.len(), members: Vec::new() });
            classes.len() - 1
        });
        classes[id].members.push(*func);
    }
    for c in &mut classes {
        c.members.sort_unstable();
    }
    classes
}

/// One class being cut in two during refinement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitEvent {
    pub parent: Vec<usize>,
    pub pieces: [Vec<usize>; 2],
}

pub fn refine_classes(classes: &[CongruenceClass], calls: &CallVectors) -> Vec<CongruenceClass> {
    refine_classes_traced(classes, calls).0
}

/// Hopcroft-style refinement. Returns the stable partition, renumbered by
/// smallest member, along with every split performed.
pub fn refine_classes_traced(
    classes: &[CongruenceClass],
    calls: &CallVectors,
) -> (Vec<CongruenceClass>, Vec<SplitEvent>) {
    let mut part = Partition::new(classes);
    let n = part.elems.len();

    // Node ids: 0..n are partition members, the rest stand for targets
    // outside the partition, each its own fixed singleton.
    let mut outside: HashMap<CallTarget, usize> = HashMap::new();
    let mut inverse: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (local, &func) in part.funcs.iter().enumerate() {
        let Some(targets) = calls.get(&func) else { continue };
        for (pos, t) in targets.iter().enumerate() {
            let node = match t {
                CallTarget::Function(j) if part.local.contains_key(j) => part.local[j],
                other => {
                    let next = n + outside.len();
                    *outside.entry(other.clone()).or_insert(next)
                }
            };
            if node >= inverse.len() {
                inverse.resize(node + 1, Vec::new());
            }
            inverse[node].push((local, pos));
        }
    }

    let mut events = Vec::new();
    let mut outside_nodes: Vec<usize> = outside.values().copied().collect();
    outside_nodes.sort_unstable();
    for node in outside_nodes {
        part.split_by(&[node], &inverse, &mut events);
    }
    while let Some(c) = part.worklist.pop() {
        part.in_worklist[c] = false;
        let splitter: Vec<usize> = part.members(c).to_vec();
        part.split_by(&splitter, &inverse, &mut events);
    }
    (part.into_classes(), events)
}

#[derive(Debug, Clone, Copy)]
struct Block {
    start: usize,
    end: usize,
    marked: usize,
}

/// Refinable partition over local element ids `0..n`, stored so that each
/// class is a contiguous slice of `elems`.
struct Partition {
    funcs: Vec<usize>,
    local: HashMap<usize, usize>,
    elems: Vec<usize>,
    loc: Vec<usize>,
    class_of: Vec<usize>,
    blocks: Vec<Block>,
    worklist: Vec<usize>,
    in_worklist: Vec<bool>,
}

impl Partition {
    fn new(classes: &[CongruenceClass]) -> Self {
        let mut p = Partition {
            funcs: Vec::new(),
            local: HashMap::new(),
            elems: Vec::new(),
            loc: Vec::new(),
            class_of: Vec::new(),
            blocks: Vec::new(),
            worklist: Vec::new(),
            in_worklist: Vec::new(),
        };
        for c in classes {
            let start = p.elems.len();
            for &f in &c.members {
                let l = p.funcs.len();
                p.funcs.push(f);
                p.local.insert(f, l);
                p.loc.push(p.elems.len());
                p.elems.push(l);
                p.class_of.push(p.blocks.len());
            }
            p.blocks.push(Block { start, end: p.elems.len(), marked: 0 });
        }
        p.worklist = (0..p.blocks.len()).rev().collect();
        p.in_worklist = vec![true; p.blocks.len()];
        p
    }

    fn members(&self, c: usize) -> &[usize] {
        &self.elems[self.blocks[c].start..self.blocks[c].end]
    }

    fn mark(&mut self, e: usize, touched: &mut Vec<usize>) {
        let c = self.class_of[e];
        let b = self.blocks[c];
        let slot = b.start + b.marked;
        let pos = self.loc[e];
        if pos < slot {
            return;
        }
        if b.marked == 0 {
            touched.push(c);
        }
        let other = self.elems[slot];
        self.elems.swap(pos, slot);
        self.loc[other] = pos;
        self.loc[e] = slot;
        self.blocks[c].marked += 1;
    }

    /// Split every class by "the call at position i lands in the splitter",
    /// for each position i in turn.
    fn split_by(&mut self, splitter: &[usize], inverse: &[Vec<(usize, usize)>], events: &mut Vec<SplitEvent>) {
        let mut by_pos: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &node in splitter {
            if let Some(callers) = inverse.get(node) {
                for &(caller, pos) in callers {
                    by_pos.entry(pos).or_default().push(caller);
                }
            }
        }
        for callers in by_pos.values() {
            let mut touched = Vec::new();
            for &e in callers {
                self.mark(e, &mut touched);
            }
            for c in touched {
                self.split_marked(c, events);
            }
        }
    }

    fn split_marked(&mut self, c: usize, events: &mut Vec<SplitEvent>) {
        let b = self.blocks[c];
        self.blocks[c].marked = 0;
        if b.marked == b.end - b.start {
            return;
        }
        let parent = self.sorted_funcs(b.start, b.end);
        let new_id = self.blocks.len();
        let mid = b.start + b.marked;
        self.blocks.push(Block { start: b.start, end: mid, marked: 0 });
        self.blocks[c].start = mid;
        for pos in b.start..mid {
            self.class_of[self.elems[pos]] = new_id;
        }
        let pieces = [self.sorted_funcs(b.start, mid), self.sorted_funcs(mid, b.end)];
        events.push(SplitEvent { parent, pieces });

        let new_smaller = mid - b.start <= b.end - mid;
        self.in_worklist.push(false);
        let enqueue = if self.in_worklist[c] || new_smaller { new_id } else { c };
        self.in_worklist[enqueue] = true;
        self.worklist.push(enqueue);
    }

    fn sorted_funcs(&self, start: usize, end: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.elems[start..end].iter().map(|&l| self.funcs[l]).collect();
        v.sort_unstable();
        v
    }

    fn into_classes(self) -> Vec<CongruenceClass> {
        let mut out: Vec<Vec<usize>> =
            (0..self.blocks.len()).map(|c| self.sorted_funcs(self.blocks[c].start, self.blocks[c].end)).collect();
        out.retain(|m| !m.is_empty());
        out.sort_by_key(|m| m[0]);
        out.into_iter().enumerate().map(|(id, members)| CongruenceClass { id, members }).collect()
    }
}
