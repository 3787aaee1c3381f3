//! Structural validator. Every violation is reported, nothing is fixed up.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::types::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiagnosticCode {
    DuplicateFunction,
    DuplicateIndex,
    EmptyBody,
    ExternalWithBody,
    BadAlias,
    DuplicateLabel,
    BadEdge,
    BadTerminator,
    MissingTerminator,
    BadPhi,
    SsaRedef,
    SsaUndef,
    SsaNotDominated,
    BadDefaultDef,
    BadDecl,
    UnknownCallee,
    BadEh,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::DuplicateFunction => "DUPLICATE_FUNCTION",
            DiagnosticCode::DuplicateIndex => "DUPLICATE_INDEX",
            DiagnosticCode::EmptyBody => "EMPTY_BODY",
            DiagnosticCode::ExternalWithBody => "EXTERNAL_WITH_BODY",
            DiagnosticCode::BadAlias => "BAD_ALIAS",
            DiagnosticCode::DuplicateLabel => "DUPLICATE_LABEL",
            DiagnosticCode::BadEdge => "BAD_EDGE",
            DiagnosticCode::BadTerminator => "BAD_TERMINATOR",
            DiagnosticCode::MissingTerminator => "MISSING_TERMINATOR",
            DiagnosticCode::BadPhi => "BAD_PHI",
            DiagnosticCode::SsaRedef => "SSA_REDEF",
            DiagnosticCode::SsaUndef => "SSA_UNDEF",
            DiagnosticCode::SsaNotDominated => "SSA_NOT_DOMINATED",
            DiagnosticCode::BadDefaultDef => "BAD_DEFAULT_DEF",
            DiagnosticCode::BadDecl => "BAD_DECL",
            DiagnosticCode::UnknownCallee => "UNKNOWN_CALLEE",
            DiagnosticCode::BadEh => "BAD_EH",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    /// Empty for module-level diagnostics.
    pub function: String,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.function.is_empty() {
            write!(f, "{}: {}", self.code, self.detail)
        } else {
            write!(f, "{} in `{}`: {}", self.code, self.function, self.detail)
        }
    }
}

pub fn validate_module(m: &MiniModule) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut names = BTreeSet::new();
    let mut indices = BTreeSet::new();
    for f in &m.functions {
        if !names.insert(f.name.as_str()) {
            diags.push(Diagnostic {
                code: DiagnosticCode::DuplicateFunction,
                function: String::new(),
                detail: format!("function `{}` defined more than once", f.name),
            });
        }
        if !indices.insert(f.index) {
            diags.push(Diagnostic {
                code: DiagnosticCode::DuplicateIndex,
                function: String::new(),
                detail: format!("function index {} used more than once", f.index),
            });
        }
    }
    for f in &m.functions {
        FunctionValidator::new(m, f, &mut diags).run();
    }
    diags
}

/// Program point used for dominance checks: PHIs sit at position 0, the
/// i-th statement at i + 1, and PHI arguments at the end of the predecessor.
#[derive(Debug, Clone, Copy)]
struct Point {
    block: usize,
    pos: usize,
}

const BLOCK_END: usize = usize::MAX;

struct FunctionValidator<'a> {
    module: &'a MiniModule,
    f: &'a MiniFunction,
    diags: &'a mut Vec<Diagnostic>,
    labels: HashMap<&'a str, usize>,
}

impl<'a> FunctionValidator<'a> {
    fn new(module: &'a MiniModule, f: &'a MiniFunction, diags: &'a mut Vec<Diagnostic>) -> Self {
        FunctionValidator { module, f, diags, labels: HashMap::new() }
    }

    fn report(&mut self, code: DiagnosticCode, detail: String) {
        self.diags.push(Diagnostic { code, function: self.f.name.clone(), detail });
    }

    fn run(&mut self) {
        let f = self.f;
        if let Some(target) = &f.alias_of {
            let ok = !f.flags.external && self.module.function(target).is_some_and(|t| t.is_defined());
            if !ok {
                self.report(DiagnosticCode::BadAlias, format!("alias target `{target}` is not a defined function"));
            }
        }
        if !f.is_defined() {
            if !f.blocks.is_empty() {
                self.report(DiagnosticCode::ExternalWithBody, "body-less symbol has basic blocks".into());
            }
            return;
        }
        if f.blocks.is_empty() {
            self.report(DiagnosticCode::EmptyBody, "defined function has no basic blocks".into());
            return;
        }
        for (i, b) in f.blocks.iter().enumerate() {
            if self.labels.insert(b.label.as_str(), i).is_some() {
                self.report(DiagnosticCode::DuplicateLabel, format!("block label `{}` repeated", b.label));
            }
        }
        self.check_eh();
        self.check_cfg();
        let preds = self.predecessors();
        self.check_phis(&preds);
        self.check_decls_and_calls();
        self.check_ssa(&preds);
    }

    fn check_eh(&mut self) {
        let mut ids = BTreeSet::new();
        if let Some(tree) = &self.f.eh_regions {
            for r in tree.preorder() {
                if !ids.insert(r.id) {
                    self.report(DiagnosticCode::BadEh, format!("EH region {} declared twice", r.id));
                }
            }
        }
        for b in &self.f.blocks {
            for s in &b.statements {
                if let Statement::Resx(r) | Statement::EhDispatch(r) = s {
                    if !ids.contains(r) {
                        self.report(
                            DiagnosticCode::BadEh,
                            format!("block `{}` refers to unknown EH region {r}", b.label),
                        );
                    }
                }
            }
        }
    }

    fn check_cfg(&mut self) {
        let f = self.f;
        let n = f.blocks.len();
        for (i, b) in f.blocks.iter().enumerate() {
            for (si, s) in b.statements.iter().enumerate() {
                if s.kind().is_terminator() && si + 1 != b.statements.len() {
                    self.report(
                        DiagnosticCode::BadTerminator,
                        format!("terminator in block `{}` is followed by more statements", b.label),
                    );
                }
            }
            if let Some(Statement::Cond { then_label, else_label, .. }) = b.statements.last() {
                if then_label == else_label {
                    self.report(
                        DiagnosticCode::BadTerminator,
                        format!("conditional in block `{}` has identical targets", b.label),
                    );
                }
            }
            let terminated = b.statements.last().is_some_and(|s| s.kind().is_terminator());
            if !terminated && i + 1 == n {
                self.report(
                    DiagnosticCode::MissingTerminator,
                    format!("last block `{}` falls off the function", b.label),
                );
            }
            let next = f.blocks.get(i + 1).map(|nb| nb.label.as_str());
            let implied = b.implied_edges(next);
            if !b.out_edges.starts_with(&implied) {
                self.report(
                    DiagnosticCode::BadTerminator,
                    format!("out-edges of block `{}` disagree with its terminator", b.label),
                );
            } else {
                for e in &b.out_edges[implied.len()..] {
                    if !e.flags.intersects(EdgeFlags::EH | EdgeFlags::ABNORMAL) {
                        self.report(
                            DiagnosticCode::BadEdge,
                            format!("explicit edge `{}` -> `{}` must be eh or abnormal", b.label, e.dest),
                        );
                    }
                }
            }
            let mut dests = BTreeSet::new();
            for e in &b.out_edges {
                if !self.labels.contains_key(e.dest.as_str()) {
                    self.report(
                        DiagnosticCode::BadEdge,
                        format!("edge `{}` -> undeclared label `{}`", b.label, e.dest),
                    );
                }
                if !dests.insert(e.dest.as_str()) {
                    self.report(DiagnosticCode::BadEdge, format!("duplicate edge `{}` -> `{}`", b.label, e.dest));
                }
            }
        }
    }

    fn predecessors(&self) -> Vec<BTreeSet<usize>> {
        let mut preds = vec![BTreeSet::new(); self.f.blocks.len()];
        for (i, b) in self.f.blocks.iter().enumerate() {
            for e in &b.out_edges {
                if let Some(&d) = self.labels.get(e.dest.as_str()) {
                    preds[d].insert(i);
                }
            }
        }
        preds
    }

    fn check_phis(&mut self, preds: &[BTreeSet<usize>]) {
        for (i, b) in self.f.blocks.iter().enumerate() {
            for p in &b.phis {
                let mut seen = BTreeSet::new();
                let mut ok = true;
                for (l, _) in &p.args {
                    match self.labels.get(l.as_str()) {
                        Some(&pi) if preds[i].contains(&pi) && seen.insert(pi) => {}
                        _ => ok = false,
                    }
                }
                if !ok || seen.len() != preds[i].len() {
                    self.report(
                        DiagnosticCode::BadPhi,
                        format!("PHI %{} in `{}` does not list each predecessor exactly once", p.result.index, b.label),
                    );
                }
            }
        }
    }

    fn check_decls_and_calls(&mut self) {
        let f = self.f;
        let mut labels_defined: BTreeMap<&str, usize> = BTreeMap::new();
        for b in &f.blocks {
            for s in &b.statements {
                if let Statement::Label(d) = s {
                    *labels_defined.entry(d.name.as_str()).or_default() += 1;
                }
            }
        }
        for (name, count) in &labels_defined {
            if *count > 1 {
                self.report(DiagnosticCode::BadDecl, format!("label `{name}` defined {count} times"));
            }
        }
        let mut bad: Vec<String> = Vec::new();
        let mut unknown_callees: Vec<String> = Vec::new();
        let check = |d: &DeclRef, bad: &mut Vec<String>| {
            let ok = match d.class {
                DeclClass::Var => self.module.declarations.get(&d.name).is_some_and(|i| i.class == DeclClass::Var),
                DeclClass::Parm => f.params.iter().any(|p| p.name == d.name),
                DeclClass::Label => labels_defined.contains_key(d.name.as_str()),
                DeclClass::Func => self.callee_known(&d.name),
            };
            if !ok {
                bad.push(d.to_string());
            }
        };
        for b in &f.blocks {
            for p in &b.phis {
                for (_, op) in &p.args {
                    op.for_each_decl(&mut |d| check(d, &mut bad));
                }
            }
            for s in &b.statements {
                for op in s.uses() {
                    op.for_each_decl(&mut |d| check(d, &mut bad));
                }
                if let Some(d) = s.direct_ssa_use().and_then(|s| s.default_def.as_ref()) {
                    check(d, &mut bad);
                }
                if let Statement::Call { callee, .. } = s {
                    if !self.callee_known(callee) {
                        unknown_callees.push(callee.clone());
                    }
                }
            }
        }
        for d in bad {
            self.report(DiagnosticCode::BadDecl, format!("`{d}` does not name a declaration of that class"));
        }
        for c in unknown_callees {
            self.report(DiagnosticCode::UnknownCallee, format!("call to unknown symbol `{c}`"));
        }
    }

    fn callee_known(&self, name: &str) -> bool {
        self.module.function(name).is_some()
            || self.module.declarations.get(name).is_some_and(|i| i.class == DeclClass::Func)
    }

    fn dominators(&self, preds: &[BTreeSet<usize>]) -> Vec<Vec<bool>> {
        let n = self.f.blocks.len();
        let mut dom = vec![vec![true; n]; n];
        dom[0] = vec![false; n];
        dom[0][0] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for b in 1..n {
                let mut new = vec![true; n];
                let mut any = false;
                for &p in &preds[b] {
                    any = true;
                    for (x, slot) in new.iter_mut().enumerate() {
                        *slot &= dom[p][x];
                    }
                }
                if !any {
                    // Unreachable: leave as "dominated by everything".
                    continue;
                }
                new[b] = true;
                if new != dom[b] {
                    dom[b] = new;
                    changed = true;
                }
            }
        }
        dom
    }

    fn check_ssa(&mut self, preds: &[BTreeSet<usize>]) {
        let f = self.f;
        let mut defs: HashMap<u32, Point> = HashMap::new();
        let mut default_defs: HashMap<u32, DeclRef> = HashMap::new();
        let mut redefs = Vec::new();
        let mut bad_default = Vec::new();

        let mut define = |s: &SsaName, at: Point, defs: &mut HashMap<u32, Point>| {
            if s.default_def.is_some() {
                bad_default.push(format!("%{} is assigned but marked as a default definition", s.index));
            }
            if defs.insert(s.index, at).is_some() {
                redefs.push(s.index);
            }
        };
        for (bi, b) in f.blocks.iter().enumerate() {
            for p in &b.phis {
                define(&p.result, Point { block: bi, pos: 0 }, &mut defs);
            }
            for (si, s) in b.statements.iter().enumerate() {
                if let Some(d) = s.def() {
                    define(d, Point { block: bi, pos: si + 1 }, &mut defs);
                }
            }
        }
        for idx in redefs {
            self.report(DiagnosticCode::SsaRedef, format!("%{idx} is defined more than once"));
        }

        // Collect every use with its program point.
        let mut uses: Vec<(SsaName, Point)> = Vec::new();
        for (bi, b) in f.blocks.iter().enumerate() {
            for p in &b.phis {
                for (l, op) in &p.args {
                    if let Some(&pi) = self.labels.get(l.as_str()) {
                        op.for_each_ssa(&mut |s| uses.push((s.clone(), Point { block: pi, pos: BLOCK_END })));
                    }
                }
            }
            for (si, s) in b.statements.iter().enumerate() {
                let at = Point { block: bi, pos: si + 1 };
                for op in s.uses() {
                    op.for_each_ssa(&mut |s| uses.push((s.clone(), at)));
                }
                if let Some(d) = s.direct_ssa_use() {
                    uses.push((d.clone(), at));
                }
            }
        }

        for (s, _) in &uses {
            if let Some(d) = &s.default_def {
                if !matches!(d.class, DeclClass::Parm | DeclClass::Var) {
                    bad_default.push(format!("%{} is a default definition of non-variable `{d}`", s.index));
                }
                if defs.contains_key(&s.index) {
                    bad_default.push(format!("%{} is both assigned and a default definition", s.index));
                }
                match default_defs.get(&s.index) {
                    Some(prev) if prev != d => {
                        bad_default.push(format!("%{} is a default definition of both `{prev}` and `{d}`", s.index))
                    }
                    Some(_) => {}
                    None => {
                        default_defs.insert(s.index, d.clone());
                    }
                }
            }
        }
        bad_default.sort();
        bad_default.dedup();
        for msg in bad_default {
            self.report(DiagnosticCode::BadDefaultDef, msg);
        }

        let dom = self.dominators(preds);
        let mut undefined = BTreeSet::new();
        let mut undominated = BTreeSet::new();
        for (s, at) in &uses {
            if s.default_def.is_some() {
                continue;
            }
            match defs.get(&s.index) {
                None => {
                    if default_defs.contains_key(&s.index) {
                        // Mixed annotated/unannotated uses of a default definition.
                        self.report(
                            DiagnosticCode::BadDefaultDef,
                            format!("%{} is used without its default-definition marker", s.index),
                        );
                    } else {
                        undefined.insert(s.index);
                    }
                }
                Some(def) => {
                    let ok = if def.block == at.block { def.pos < at.pos } else { dom[at.block][def.block] };
                    if !ok {
                        undominated.insert(s.index);
                    }
                }
            }
        }
        for idx in undefined {
            self.report(DiagnosticCode::SsaUndef, format!("%{idx} is used but never defined"));
        }
        for idx in undominated {
            self.report(DiagnosticCode::SsaNotDominated, format!("a use of %{idx} is not dominated by its definition"));
        }
    }
}
