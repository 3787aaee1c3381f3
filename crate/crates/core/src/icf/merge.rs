use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::ir::{BasicBlock, DeclClass, DeclRef, FunctionFlags, MiniFunction, MiniModule, Operand, SsaName, Statement};

use super::IcfError;

/// Size proxy per statement used for the savings estimate.
pub const BYTES_PER_STATEMENT: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Alias,
    Thunk,
    Redirect,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Alias => "alias",
            Mechanism::Thunk => "thunk",
            Mechanism::Redirect => "redirect",
        }
    }

    /// Pick how `member` is folded into `rep`.
    pub fn choose(rep: &FunctionFlags, member: &FunctionFlags) -> Mechanism {
        if (!member.address_taken || !rep.address_taken) && !member.comdat {
            Mechanism::Alias
        } else if !member.writeable && !rep.writeable {
            Mechanism::Redirect
        } else {
            Mechanism::Thunk
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Merged {
    pub function: usize,
    pub mechanism: Mechanism,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeGroup {
    pub representative: usize,
    pub merged: Vec<Merged>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergePlan {
    pub groups: Vec<MergeGroup>,
}

/// `flags` is indexed by function index. Groups of fewer than two functions
/// are dropped.
pub fn plan_merges(groups: &[Vec<usize>], flags: &[FunctionFlags]) -> MergePlan {
    let mut out = Vec::new();
    for g in groups {
        let members: BTreeSet<usize> = g.iter().copied().collect();
        let mut it = members.into_iter();
        let Some(rep) = it.next() else { continue };
        let merged: Vec<Merged> =
            it.map(|f| Merged { function: f, mechanism: Mechanism::choose(&flags[rep], &flags[f]) }).collect();
        if !merged.is_empty() {
            out.push(MergeGroup { representative: rep, merged });
        }
    }
    MergePlan { groups: out }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldedEntry {
    pub kept: String,
    pub dropped: String,
    pub mechanism: Mechanism,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FoldReport {
    pub functions_before: usize,
    pub functions_after: usize,
    pub folded: Vec<FoldedEntry>,
    pub estimated_bytes_saved: u64,
}

impl FoldReport {
    pub fn folded_count(&self) -> usize {
        self.folded.len()
    }
}

fn bodies(m: &MiniModule) -> usize {
    m.functions.iter().filter(|f| f.is_defined()).count()
}

fn check_plan(m: &MiniModule, plan: &MergePlan) -> Result<(), IcfError> {
    let mut seen = BTreeSet::new();
    for g in &plan.groups {
        for f in std::iter::once(g.representative).chain(g.merged.iter().map(|x| x.function)) {
            let Some(func) = m.functions.get(f) else {
                return Err(IcfError::PlanInconsistent(format!("unknown function index {f}")));
            };
            if !func.is_defined() {
                return Err(IcfError::PlanInconsistent(format!("{} has no body", func.name)));
            }
            if !seen.insert(f) {
                return Err(IcfError::PlanInconsistent(format!("{} appears twice", func.name)));
            }
        }
    }
    Ok(())
}

/// Single-block wrapper that tail-calls `target` with the incoming arguments.
pub fn thunk_body(f: &MiniFunction, target: &str) -> BasicBlock {
    let args: Vec<Operand> = f
        .params
        .iter()
        .enumerate()
        .map(|(i, p)| Operand::Ssa(SsaName::default_def(i as u32, DeclRef::new(DeclClass::Parm, &p.name))))
        .collect();
    let result = (f.result_type != crate::ir::TypeTag::Void).then(|| SsaName::new(f.params.len() as u32));
    let mut bb = BasicBlock::new("bb0");
    bb.statements.push(Statement::Call { result: result.clone(), callee: target.to_string(), args });
    bb.statements.push(Statement::Return(result.map(Operand::Ssa)));
    bb
}

pub fn apply_merges(m: &MiniModule, plan: &MergePlan) -> Result<(MiniModule, FoldReport), IcfError> {
    check_plan(m, plan)?;
    let mut out = m.clone();
    let mut report = FoldReport { functions_before: bodies(m), ..Default::default() };
    let mut removed_stmts = 0u64;
    let mut added_stmts = 0u64;
    // Merged name -> representative name, for reference rewriting.
    let mut redirect: Vec<(String, String)> = Vec::new();
    let mut retarget_aliases: Vec<(String, String)> = Vec::new();
    let mut dropped: BTreeSet<usize> = BTreeSet::new();

    for g in &plan.groups {
        let rep_name = m.functions[g.representative].name.clone();
        for mg in &g.merged {
            let f = &mut out.functions[mg.function];
            removed_stmts += f.statement_count() as u64;
            report.folded.push(FoldedEntry {
                kept: rep_name.clone(),
                dropped: f.name.clone(),
                mechanism: mg.mechanism,
            });
            match mg.mechanism {
                Mechanism::Alias => {
                    f.blocks.clear();
                    f.eh_regions = None;
                    f.alias_of = Some(rep_name.clone());
                    retarget_aliases.push((f.name.clone(), rep_name.clone()));
                }
                Mechanism::Thunk => {
                    let bb = thunk_body(f, &rep_name);
                    added_stmts += bb.statements.len() as u64;
                    f.blocks = vec![bb];
                    f.eh_regions = None;
                }
                Mechanism::Redirect => {
                    redirect.push((f.name.clone(), rep_name.clone()));
                    retarget_aliases.push((f.name.clone(), rep_name.clone()));
                    dropped.insert(mg.function);
                }
            }
        }
    }

    let mut idx = 0;
    out.functions.retain(|_| {
        let keep = !dropped.contains(&idx);
        idx += 1;
        keep
    });
    out.reindex();

    for f in &mut out.functions {
        if let Some(target) = &mut f.alias_of {
            if let Some((_, rep)) = retarget_aliases.iter().find(|(from, _)| from == target) {
                *target = rep.clone();
            }
        }
        for b in &mut f.blocks {
            for s in &mut b.statements {
                if let Statement::Call { callee, .. } = s {
                    if let Some((_, rep)) = redirect.iter().find(|(from, _)| from == callee) {
                        *callee = rep.clone();
                    }
                }
                for op in s.operands_mut() {
                    op.for_each_decl_mut(&mut |d| {
                        if d.class == DeclClass::Func {
                            if let Some((_, rep)) = redirect.iter().find(|(from, _)| *from == d.name) {
                                d.name = rep.clone();
                            }
                        }
                    });
                }
            }
            for p in &mut b.phis {
                for (_, op) in &mut p.args {
                    op.for_each_decl_mut(&mut |d| {
                        if d.class == DeclClass::Func {
                            if let Some((_, rep)) = redirect.iter().find(|(from, _)| *from == d.name) {
                                d.name = rep.clone();
                            }
                        }
                    });
                }
            }
        }
    }

    report.functions_after = bodies(&out);
    report.estimated_bytes_saved = removed_stmts.saturating_sub(added_stmts) * BYTES_PER_STATEMENT;
    Ok((out, report))
}
