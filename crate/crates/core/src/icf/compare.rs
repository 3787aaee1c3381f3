//! Pairwise semantic comparison of two function bodies.

use std::collections::BTreeMap;
use std::fmt;

use crate::ir::{
    cfg_checksum, BasicBlock, DeclClass, DeclRef, Declarations, EhRegion, GotoTarget, MiniFunction, Operand, Selector,
    SsaName, Statement, StatementKind, TypeTag,
};

/// Position of an out-edge: (block ordinal, index within `out_edges`).
pub type EdgeId = (usize, usize);

#[derive(Debug, Clone)]
enum Undo {
    Ssa(u32, u32),
    Decl(DeclRef, DeclRef),
}

/// Correspondence built while comparing two functions. SSA names and
/// declarations are bound bijectively; every binding is journalled so a
/// failed trial can be rolled back exactly.
#[derive(Debug, Clone, Default)]
pub struct CorrespondenceMap {
    ssa_fwd: BTreeMap<u32, u32>,
    ssa_rev: BTreeMap<u32, u32>,
    decl_pairs: BTreeMap<DeclRef, DeclRef>,
    decl_rev: BTreeMap<DeclRef, DeclRef>,
    edge_pairs: BTreeMap<EdgeId, EdgeId>,
    journal: Vec<Undo>,
}

impl PartialEq for CorrespondenceMap {
    fn eq(&self, other: &Self) -> bool {
        self.ssa_fwd == other.ssa_fwd
            && self.ssa_rev == other.ssa_rev
            && self.decl_pairs == other.decl_pairs
            && self.decl_rev == other.decl_rev
            && self.edge_pairs == other.edge_pairs
    }
}

impl Eq for CorrespondenceMap {}

impl CorrespondenceMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ssa_fwd(&self) -> &BTreeMap<u32, u32> {
        &self.ssa_fwd
    }

    pub fn ssa_rev(&self) -> &BTreeMap<u32, u32> {
        &self.ssa_rev
    }

    pub fn decl_pairs(&self) -> &BTreeMap<DeclRef, DeclRef> {
        &self.decl_pairs
    }

    pub fn edge_pairs(&self) -> &BTreeMap<EdgeId, EdgeId> {
        &self.edge_pairs
    }

    /// Bind `a ↔ b`, or confirm an existing binding. Fails if either side is
    /// already bound elsewhere.
    pub fn bind_ssa(&mut self, a: u32, b: u32) -> bool {
        match (self.ssa_fwd.get(&a), self.ssa_rev.get(&b)) {
            (Some(&x), _) => x == b,
            (None, Some(_)) => false,
            (None, None) => {
                self.ssa_fwd.insert(a, b);
                self.ssa_rev.insert(b, a);
                self.journal.push(Undo::Ssa(a, b));
                true
            }
        }
    }

    pub fn bind_decl(&mut self, a: &DeclRef, b: &DeclRef) -> bool {
        match (self.decl_pairs.get(a), self.decl_rev.get(b)) {
            (Some(x), _) => x == b,
            (None, Some(_)) => false,
            (None, None) => {
                self.decl_pairs.insert(a.clone(), b.clone());
                self.decl_rev.insert(b.clone(), a.clone());
                self.journal.push(Undo::Decl(a.clone(), b.clone()));
                true
            }
        }
    }

    pub fn bind_edge(&mut self, a: EdgeId, b: EdgeId) {
        self.edge_pairs.insert(a, b);
    }

    fn checkpoint(&self) -> usize {
        self.journal.len()
    }

    fn rollback(&mut self, to: usize) {
        while self.journal.len() > to {
            match self.journal.pop() {
                Some(Undo::Ssa(a, b)) => {
                    self.ssa_fwd.remove(&a);
                    self.ssa_rev.remove(&b);
                }
                Some(Undo::Decl(a, b)) => {
                    self.decl_pairs.remove(&a);
                    self.decl_rev.remove(&b);
                }
                None => break,
            }
        }
    }
}

/// Decides whether two declarations may be paired at all.
pub trait DeclContext {
    fn decls_compatible(&self, a: &DeclRef, b: &DeclRef) -> bool;
}

/// Pairs any two declarations of the same class; functions by name only.
pub struct AnyDecl;

impl DeclContext for AnyDecl {
    fn decls_compatible(&self, a: &DeclRef, b: &DeclRef) -> bool {
        a.class == b.class && (a.class != DeclClass::Func || a.name == b.name)
    }
}

/// Check two operands for equivalence, extending `m`. On failure `m` is left
/// exactly as it was on entry.
pub fn check_operand(o1: &Operand, o2: &Operand, m: &mut CorrespondenceMap) -> bool {
    check_operand_with(o1, o2, m, &AnyDecl)
}

pub fn check_operand_with(o1: &Operand, o2: &Operand, m: &mut CorrespondenceMap, cx: &dyn DeclContext) -> bool {
    let cp = m.checkpoint();
    let ok = operand_rec(o1, o2, m, cx);
    if !ok {
        m.rollback(cp);
    }
    ok
}

fn operand_rec(o1: &Operand, o2: &Operand, m: &mut CorrespondenceMap, cx: &dyn DeclContext) -> bool {
    match (o1, o2) {
        (Operand::Ssa(a), Operand::Ssa(b)) => ssa_rec(a, b, m, cx),
        (Operand::Decl(a), Operand::Decl(b)) => decl_rec(a, b, m, cx),
        (Operand::Int { ty: ta, value: va }, Operand::Int { ty: tb, value: vb }) => ta.compatible(tb) && va == vb,
        (Operand::Const { ty: ta, payload: pa }, Operand::Const { ty: tb, payload: pb }) => {
            ta.compatible(tb) && pa == pb
        }
        (
            Operand::Component { kind: ka, base: ba, selector: sa },
            Operand::Component { kind: kb, base: bb, selector: sb },
        ) => {
            ka == kb
                && operand_rec(ba, bb, m, cx)
                && match (sa, sb) {
                    (Selector::Offset(x), Selector::Offset(y)) => x == y,
                    (Selector::Operand(x), Selector::Operand(y)) => operand_rec(x, y, m, cx),
                    _ => false,
                }
        }
        _ => false,
    }
}

fn ssa_rec(a: &SsaName, b: &SsaName, m: &mut CorrespondenceMap, cx: &dyn DeclContext) -> bool {
    let decls_ok = match (&a.default_def, &b.default_def) {
        (None, None) => true,
        (Some(da), Some(db)) => decl_rec(da, db, m, cx),
        _ => false,
    };
    decls_ok && m.bind_ssa(a.index, b.index)
}

fn decl_rec(a: &DeclRef, b: &DeclRef, m: &mut CorrespondenceMap, cx: &dyn DeclContext) -> bool {
    if !cx.decls_compatible(a, b) {
        return false;
    }
    if a.class == DeclClass::Func {
        return true;
    }
    m.bind_decl(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reason {
    ShapeMismatch,
    TypeMismatch,
    AttributeMismatch,
    EhMismatch,
    StatementCountMismatch,
    KindMismatch,
    OpcodeMismatch,
    OperandMismatch,
    CalleeMismatch,
    SwitchMismatch,
    TargetMismatch,
    RegionMismatch,
    InlineAsm,
    EdgeMismatch,
    PhiMismatch,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::ShapeMismatch => "SHAPE_MISMATCH",
            Reason::TypeMismatch => "TYPE_MISMATCH",
            Reason::AttributeMismatch => "ATTRIBUTE_MISMATCH",
            Reason::EhMismatch => "EH_MISMATCH",
            Reason::StatementCountMismatch => "STATEMENT_COUNT_MISMATCH",
            Reason::KindMismatch => "KIND_MISMATCH",
            Reason::OpcodeMismatch => "OPCODE_MISMATCH",
            Reason::OperandMismatch => "OPERAND_MISMATCH",
            Reason::CalleeMismatch => "CALLEE_MISMATCH",
            Reason::SwitchMismatch => "SWITCH_MISMATCH",
            Reason::TargetMismatch => "TARGET_MISMATCH",
            Reason::RegionMismatch => "REGION_MISMATCH",
            Reason::InlineAsm => "INLINE_ASM",
            Reason::EdgeMismatch => "EDGE_MISMATCH",
            Reason::PhiMismatch => "PHI_MISMATCH",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the first difference was found. `item` indexes non-debug
/// statements, out-edges or PHIs depending on the reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Location {
    pub block: Option<usize>,
    pub item: Option<usize>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.block, self.item) {
            (Some(b), Some(i)) => write!(f, "block {b} item {i}"),
            (Some(b), None) => write!(f, "block {b}"),
            _ => f.write_str("function"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Equal(CorrespondenceMap),
    NotEqual(Reason, Location),
}

impl Verdict {
    pub fn is_equal(&self) -> bool {
        matches!(self, Verdict::Equal(_))
    }
}

/// Compare without a declaration registry: variables pair by class only.
pub fn compare_functions(a: &MiniFunction, b: &MiniFunction) -> Verdict {
    compare_functions_with(a, b, &Declarations::new())
}

/// Compare two functions of a module whose variable types live in `decls`.
pub fn compare_functions_with(a: &MiniFunction, b: &MiniFunction, decls: &Declarations) -> Verdict {
    let cx = Comparator { a, b, decls, a_regions: region_ordinals(a), b_regions: region_ordinals(b) };
    match cx.run() {
        Ok(m) => Verdict::Equal(m),
        Err((reason, loc)) => Verdict::NotEqual(reason, loc),
    }
}

fn region_ordinals(f: &MiniFunction) -> BTreeMap<u32, usize> {
    f.eh_regions.as_ref().map(|t| t.preorder().iter().enumerate().map(|(i, r)| (r.id, i)).collect()).unwrap_or_default()
}

fn eh_isomorphic(a: &[EhRegion], b: &[EhRegion]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.kind == y.kind && eh_isomorphic(&x.children, &y.children))
}

type Fail = (Reason, Location);

struct Comparator<'a> {
    a: &'a MiniFunction,
    b: &'a MiniFunction,
    decls: &'a Declarations,
    a_regions: BTreeMap<u32, usize>,
    b_regions: BTreeMap<u32, usize>,
}

impl DeclContext for Comparator<'_> {
    fn decls_compatible(&self, da: &DeclRef, db: &DeclRef) -> bool {
        if da.class != db.class {
            return false;
        }
        match da.class {
            DeclClass::Func => da.name == db.name,
            DeclClass::Label => true,
            DeclClass::Parm => {
                let ta = self.a.params.iter().find(|p| p.name == da.name).map(|p| &p.ty);
                let tb = self.b.params.iter().find(|p| p.name == db.name).map(|p| &p.ty);
                types_match(ta, tb)
            }
            DeclClass::Var => {
                let ta = self.decls.get(&da.name).map(|i| &i.ty);
                let tb = self.decls.get(&db.name).map(|i| &i.ty);
                types_match(ta, tb)
            }
        }
    }
}

fn types_match(a: Option<&TypeTag>, b: Option<&TypeTag>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x.compatible(y),
        (None, None) => true,
        _ => false,
    }
}

fn whole() -> Location {
    Location::default()
}

fn at(block: usize, item: usize) -> Location {
    Location { block: Some(block), item: Some(item) }
}

impl Comparator<'_> {
    fn run(&self) -> Result<CorrespondenceMap, Fail> {
        let (a, b) = (self.a, self.b);
        if a.params.len() != b.params.len()
            || a.blocks.len() != b.blocks.len()
            || a.edge_count() != b.edge_count()
            || cfg_checksum(a) != cfg_checksum(b)
        {
            return Err((Reason::ShapeMismatch, whole()));
        }
        if !a.result_type.compatible(&b.result_type)
            || a.params.iter().zip(&b.params).any(|(x, y)| !x.ty.compatible(&y.ty))
        {
            return Err((Reason::TypeMismatch, whole()));
        }
        if a.attributes != b.attributes {
            return Err((Reason::AttributeMismatch, whole()));
        }
        let eh_ok = match (&a.eh_regions, &b.eh_regions) {
            (None, None) => true,
            (Some(x), Some(y)) => eh_isomorphic(&x.roots, &y.roots),
            _ => false,
        };
        if !eh_ok {
            return Err((Reason::EhMismatch, whole()));
        }

        let mut m = CorrespondenceMap::new();
        for (pa, pb) in a.params.iter().zip(&b.params) {
            m.bind_decl(&DeclRef::new(DeclClass::Parm, &pa.name), &DeclRef::new(DeclClass::Parm, &pb.name));
        }
        for (i, (ba, bb)) in a.blocks.iter().zip(&b.blocks).enumerate() {
            self.compare_block_statements(i, ba, bb, &mut m)?;
        }
        for (i, (ba, bb)) in a.blocks.iter().zip(&b.blocks).enumerate() {
            if ba.out_edges.len() != bb.out_edges.len() {
                return Err((Reason::EdgeMismatch, Location { block: Some(i), item: None }));
            }
            for (j, (ea, eb)) in ba.out_edges.iter().zip(&bb.out_edges).enumerate() {
                if ea.flags != eb.flags || a.block_index(&ea.dest) != b.block_index(&eb.dest) {
                    return Err((Reason::EdgeMismatch, at(i, j)));
                }
                m.bind_edge((i, j), (i, j));
            }
        }
        for (i, (ba, bb)) in a.blocks.iter().zip(&b.blocks).enumerate() {
            self.compare_phis(i, ba, bb, &mut m)?;
        }
        Ok(m)
    }

    fn operand(&self, x: &Operand, y: &Operand, m: &mut CorrespondenceMap, loc: Location) -> Result<(), Fail> {
        if check_operand_with(x, y, m, self) {
            Ok(())
        } else {
            Err((Reason::OperandMismatch, loc))
        }
    }

    fn ssa(&self, x: &SsaName, y: &SsaName, m: &mut CorrespondenceMap, loc: Location) -> Result<(), Fail> {
        self.operand(&Operand::Ssa(x.clone()), &Operand::Ssa(y.clone()), m, loc)
    }

    fn same_target(&self, la: &str, lb: &str) -> bool {
        let ia = self.a.block_index(la);
        ia.is_some() && ia == self.b.block_index(lb)
    }

    fn compare_block_statements(
        &self,
        bi: usize,
        ba: &BasicBlock,
        bb: &BasicBlock,
        m: &mut CorrespondenceMap,
    ) -> Result<(), Fail> {
        let sa: Vec<&Statement> = ba.statements.iter().filter(|s| s.kind() != StatementKind::Debug).collect();
        let sb: Vec<&Statement> = bb.statements.iter().filter(|s| s.kind() != StatementKind::Debug).collect();
        if sa.len() != sb.len() {
            return Err((Reason::StatementCountMismatch, Location { block: Some(bi), item: None }));
        }
        for (j, (x, y)) in sa.into_iter().zip(sb).enumerate() {
            self.compare_statement(x, y, m, at(bi, j))?;
        }
        Ok(())
    }

    fn compare_statement(
        &self,
        x: &Statement,
        y: &Statement,
        m: &mut CorrespondenceMap,
        loc: Location,
    ) -> Result<(), Fail> {
        if x.kind() != y.kind() {
            return Err((Reason::KindMismatch, loc));
        }
        match (x, y) {
            (
                Statement::Assign { dest: da, opcode: oa, operands: xa },
                Statement::Assign { dest: db, opcode: ob, operands: xb },
            ) => {
                if oa != ob || xa.len() != xb.len() {
                    return Err((Reason::OpcodeMismatch, loc));
                }
                self.operand(da, db, m, loc)?;
                for (p, q) in xa.iter().zip(xb) {
                    self.operand(p, q, m, loc)?;
                }
            }
            (
                Statement::Call { result: ra, callee: ca, args: aa },
                Statement::Call { result: rb, callee: cb, args: ab },
            ) => {
                if ca != cb || aa.len() != ab.len() {
                    return Err((Reason::CalleeMismatch, loc));
                }
                match (ra, rb) {
                    (Some(p), Some(q)) => self.ssa(p, q, m, loc)?,
                    (None, None) => {}
                    _ => return Err((Reason::OperandMismatch, loc)),
                }
                for (p, q) in aa.iter().zip(ab) {
                    self.operand(p, q, m, loc)?;
                }
            }
            (
                Statement::Cond { opcode: oa, lhs: la, rhs: ra, .. },
                Statement::Cond { opcode: ob, lhs: lb, rhs: rb, .. },
            ) => {
                if oa != ob {
                    return Err((Reason::OpcodeMismatch, loc));
                }
                self.operand(la, lb, m, loc)?;
                self.operand(ra, rb, m, loc)?;
            }
            (
                Statement::Switch { index: ia, cases: ca, default: da },
                Statement::Switch { index: ib, cases: cb, default: db },
            ) => {
                if ca.len() != cb.len() {
                    return Err((Reason::SwitchMismatch, loc));
                }
                for (p, q) in ca.iter().zip(cb) {
                    if p.low != q.low || p.high != q.high {
                        return Err((Reason::SwitchMismatch, loc));
                    }
                    if !self.same_target(&p.target, &q.target) {
                        return Err((Reason::TargetMismatch, loc));
                    }
                }
                if !self.same_target(da, db) {
                    return Err((Reason::TargetMismatch, loc));
                }
                self.ssa(ia, ib, m, loc)?;
            }
            (Statement::Return(p), Statement::Return(q)) => match (p, q) {
                (None, None) => {}
                (Some(p), Some(q)) => self.operand(p, q, m, loc)?,
                _ => return Err((Reason::OperandMismatch, loc)),
            },
            (Statement::Label(p), Statement::Label(q)) => {
                self.operand(&Operand::Decl(p.clone()), &Operand::Decl(q.clone()), m, loc)?;
            }
            (Statement::Goto(p), Statement::Goto(q)) => match (p, q) {
                (GotoTarget::Computed(p), GotoTarget::Computed(q)) => self.ssa(p, q, m, loc)?,
                (GotoTarget::Block(p), GotoTarget::Block(q)) => {
                    if !self.same_target(p, q) {
                        return Err((Reason::TargetMismatch, loc));
                    }
                }
                _ => return Err((Reason::KindMismatch, loc)),
            },
            (Statement::Resx(p), Statement::Resx(q)) => {
                let (op, oq) = (self.a_regions.get(p), self.b_regions.get(q));
                if op.is_none() || op != oq {
                    return Err((Reason::RegionMismatch, loc));
                }
            }
            (Statement::EhDispatch(_), Statement::EhDispatch(_)) => {}
            (Statement::Asm(_), Statement::Asm(_)) => return Err((Reason::InlineAsm, loc)),
            _ => unreachable!("kinds already compared"),
        }
        Ok(())
    }

    fn compare_phis(&self, bi: usize, ba: &BasicBlock, bb: &BasicBlock, m: &mut CorrespondenceMap) -> Result<(), Fail> {
        if ba.phis.len() != bb.phis.len() {
            return Err((Reason::PhiMismatch, Location { block: Some(bi), item: None }));
        }
        for (j, (pa, pb)) in ba.phis.iter().zip(&bb.phis).enumerate() {
            let loc = at(bi, j);
            if pa.args.len() != pb.args.len() {
                return Err((Reason::PhiMismatch, loc));
            }
            self.ssa(&pa.result, &pb.result, m, loc)?;
            for (label, op) in &pa.args {
                let ord = self.a.block_index(label);
                let other = pb.args.iter().find(|(l, _)| ord.is_some() && self.b.block_index(l) == ord);
                match other {
                    Some((_, q)) => self.operand(op, q, m, loc)?,
                    None => return Err((Reason::PhiMismatch, loc)),
                }
            }
        }
        Ok(())
    }
}
