//! Data structures of the SSA mini-IR.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use bitflags::bitflags;

/// Scalar, pointer and record types.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeTag {
    Void,
    I8,
    I16,
    I32,
    I64,
    F32,
    F64,
    Ptr(Box<TypeTag>),
    Record(String),
}

impl TypeTag {
    pub fn ptr(pointee: TypeTag) -> TypeTag {
        TypeTag::Ptr(Box::new(pointee))
    }

    pub fn record(name: impl Into<String>) -> TypeTag {
        TypeTag::Record(name.into())
    }

    /// Two types are compatible when no conversion is needed between them.
    ///
    /// Pointers to any record are mutually compatible, so methods that only
    /// differ in the class of their `this` pointer compare equal. Every other
    /// pair must be identical.
    pub fn compatible(&self, other: &TypeTag) -> bool {
        match (self, other) {
            (TypeTag::Ptr(a), TypeTag::Ptr(b)) => {
                matches!((a.as_ref(), b.as_ref()), (TypeTag::Record(_), TypeTag::Record(_))) || a == b
            }
            _ => self == other,
        }
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTag::Void => f.write_str("void"),
            TypeTag::I8 => f.write_str("i8"),
            TypeTag::I16 => f.write_str("i16"),
            TypeTag::I32 => f.write_str("i32"),
            TypeTag::I64 => f.write_str("i64"),
            TypeTag::F32 => f.write_str("f32"),
            TypeTag::F64 => f.write_str("f64"),
            TypeTag::Ptr(inner) => write!(f, "ptr<{inner}>"),
            TypeTag::Record(name) => write!(f, "record<{name}>"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeclClass {
    Var,
    Parm,
    Label,
    Func,
}

impl DeclClass {
    pub fn keyword(self) -> &'static str {
        match self {
            DeclClass::Var => "var",
            DeclClass::Parm => "parm",
            DeclClass::Label => "label",
            DeclClass::Func => "func",
        }
    }

    pub fn from_keyword(s: &str) -> Option<DeclClass> {
        Some(match s {
            "var" => DeclClass::Var,
            "parm" => DeclClass::Parm,
            "label" => DeclClass::Label,
            "func" => DeclClass::Func,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeclRef {
    pub class: DeclClass,
    pub name: String,
}

impl DeclRef {
    pub fn new(class: DeclClass, name: impl Into<String>) -> Self {
        DeclRef { class, name: name.into() }
    }
}

impl fmt::Display for DeclRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "decl.{} {}", self.class.keyword(), self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeclInfo {
    pub class: DeclClass,
    pub ty: TypeTag,
}

/// Module-level declaration registry.
pub type Declarations = BTreeMap<String, DeclInfo>;

/// An SSA name. Default definitions carry the declaration they stand for
/// (a parameter's incoming value, or an uninitialised variable).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SsaName {
    pub index: u32,
    pub default_def: Option<DeclRef>,
}

impl SsaName {
    pub fn new(index: u32) -> Self {
        SsaName { index, default_def: None }
    }

    pub fn default_def(index: u32, decl: DeclRef) -> Self {
        SsaName { index, default_def: Some(decl) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComponentKind {
    ArrayRef,
    ComponentRef,
    MemRef,
}

impl ComponentKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ComponentKind::ArrayRef => "aref",
            ComponentKind::ComponentRef => "cref",
            ComponentKind::MemRef => "mref",
        }
    }

    pub fn from_keyword(s: &str) -> Option<ComponentKind> {
        Some(match s {
            "aref" => ComponentKind::ArrayRef,
            "cref" => ComponentKind::ComponentRef,
            "mref" => ComponentKind::MemRef,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Selector {
    Operand(Box<Operand>),
    Offset(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Ssa(SsaName),
    Decl(DeclRef),
    Int {
        ty: TypeTag,
        value: i128,
    },
    /// Any non-integer constant; compared structurally by type and payload.
    Const {
        ty: TypeTag,
        payload: String,
    },
    Component {
        kind: ComponentKind,
        base: Box<Operand>,
        selector: Selector,
    },
}

impl Operand {
    pub fn ssa(index: u32) -> Operand {
        Operand::Ssa(SsaName::new(index))
    }

    pub fn int(ty: TypeTag, value: i128) -> Operand {
        Operand::Int { ty, value }
    }

    pub fn component(kind: ComponentKind, base: Operand, selector: Selector) -> Operand {
        Operand::Component { kind, base: Box::new(base), selector }
    }

    /// Visit every SSA name reachable from this operand, including through
    /// component chains.
    pub fn for_each_ssa(&self, f: &mut impl FnMut(&SsaName)) {
        match self {
            Operand::Ssa(s) => f(s),
            Operand::Component { base, selector, .. } => {
                base.for_each_ssa(f);
                if let Selector::Operand(op) = selector {
                    op.for_each_ssa(f);
                }
            }
            Operand::Decl(_) | Operand::Int { .. } | Operand::Const { .. } => {}
        }
    }

    pub fn for_each_decl(&self, f: &mut impl FnMut(&DeclRef)) {
        match self {
            Operand::Ssa(s) => {
                if let Some(d) = &s.default_def {
                    f(d);
                }
            }
            Operand::Decl(d) => f(d),
            Operand::Component { base, selector, .. } => {
                base.for_each_decl(f);
                if let Selector::Operand(op) = selector {
                    op.for_each_decl(f);
                }
            }
            Operand::Int { .. } | Operand::Const { .. } => {}
        }
    }

    pub(crate) fn for_each_decl_mut(&mut self, f: &mut impl FnMut(&mut DeclRef)) {
        match self {
            Operand::Ssa(s) => {
                if let Some(d) = &mut s.default_def {
                    f(d);
                }
            }
            Operand::Decl(d) => f(d),
            Operand::Component { base, selector, .. } => {
                base.for_each_decl_mut(f);
                if let Selector::Operand(op) = selector {
                    op.for_each_decl_mut(f);
                }
            }
            Operand::Int { .. } | Operand::Const { .. } => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatementKind {
    Assign,
    Call,
    Cond,
    Switch,
    Return,
    Label,
    Goto,
    Resx,
    Debug,
    EhDispatch,
    Asm,
}

impl StatementKind {
    /// Stable numeric code fed into fingerprints.
    pub fn code(self) -> u32 {
        match self {
            StatementKind::Assign => 1,
            StatementKind::Call => 2,
            StatementKind::Cond => 3,
            StatementKind::Switch => 4,
            StatementKind::Return => 5,
            StatementKind::Label => 6,
            StatementKind::Goto => 7,
            StatementKind::Resx => 8,
            StatementKind::Debug => 9,
            StatementKind::EhDispatch => 10,
            StatementKind::Asm => 11,
        }
    }

    pub fn is_terminator(self) -> bool {
        matches!(
            self,
            StatementKind::Cond
                | StatementKind::Switch
                | StatementKind::Return
                | StatementKind::Goto
                | StatementKind::Resx
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchCase {
    pub low: i128,
    pub high: Option<i128>,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GotoTarget {
    /// Computed goto through an SSA name; targets are listed as explicit
    /// abnormal edges.
    Computed(SsaName),
    Block(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    /// `dest = opcode operands`. A non-SSA destination is a store.
    Assign {
        dest: Operand,
        opcode: String,
        operands: Vec<Operand>,
    },
    Call {
        result: Option<SsaName>,
        callee: String,
        args: Vec<Operand>,
    },
    Cond {
        opcode: String,
        lhs: Operand,
        rhs: Operand,
        then_label: String,
        else_label: String,
    },
    Switch {
        index: SsaName,
        cases: Vec<SwitchCase>,
        default: String,
    },
    Return(Option<Operand>),
    Label(DeclRef),
    Goto(GotoTarget),
    Resx(u32),
    Debug(Vec<Operand>),
    EhDispatch(u32),
    Asm(String),
}

impl Statement {
    pub fn kind(&self) -> StatementKind {
        match self {
            Statement::Assign { .. } => StatementKind::Assign,
            Statement::Call { .. } => StatementKind::Call,
            Statement::Cond { .. } => StatementKind::Cond,
            Statement::Switch { .. } => StatementKind::Switch,
            Statement::Return(_) => StatementKind::Return,
            Statement::Label(_) => StatementKind::Label,
            Statement::Goto(_) => StatementKind::Goto,
            Statement::Resx(_) => StatementKind::Resx,
            Statement::Debug(_) => StatementKind::Debug,
            Statement::EhDispatch(_) => StatementKind::EhDispatch,
            Statement::Asm(_) => StatementKind::Asm,
        }
    }

    /// The SSA name this statement defines, if any.
    pub fn def(&self) -> Option<&SsaName> {
        match self {
            Statement::Assign { dest: Operand::Ssa(s), .. } => Some(s),
            Statement::Call { result, .. } => result.as_ref(),
            _ => None,
        }
    }

    /// Operands read by the statement. A store destination counts as a use
    /// of whatever it dereferences.
    pub fn uses(&self) -> Vec<&Operand> {
        match self {
            Statement::Assign { dest, operands, .. } => {
                let mut v: Vec<&Operand> = Vec::with_capacity(operands.len() + 1);
                if !matches!(dest, Operand::Ssa(_)) {
                    v.push(dest);
                }
                v.extend(operands.iter());
                v
            }
            Statement::Call { args, .. } => args.iter().collect(),
            Statement::Cond { lhs, rhs, .. } => vec![lhs, rhs],
            Statement::Return(Some(op)) => vec![op],
            Statement::Debug(ops) => ops.iter().collect(),
            _ => Vec::new(),
        }
    }

    /// SSA name read directly by the statement outside any operand
    /// (switch discriminant, computed-goto target).
    pub fn direct_ssa_use(&self) -> Option<&SsaName> {
        match self {
            Statement::Switch { index, .. } => Some(index),
            Statement::Goto(GotoTarget::Computed(s)) => Some(s),
            _ => None,
        }
    }

    pub(crate) fn operands_mut(&mut self) -> Vec<&mut Operand> {
        match self {
            Statement::Assign { dest, operands, .. } => {
                let mut v = vec![dest];
                v.extend(operands.iter_mut());
                v
            }
            Statement::Call { args, .. } => args.iter_mut().collect(),
            Statement::Cond { lhs, rhs, .. } => vec![lhs, rhs],
            Statement::Return(Some(op)) => vec![op],
            Statement::Debug(ops) => ops.iter_mut().collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiNode {
    pub result: SsaName,
    /// `(predecessor label, incoming value)`
    pub args: Vec<(String, Operand)>,
}

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
    pub struct EdgeFlags: u8 {
        const FALLTHRU = 1;
        const TRUE = 1 << 1;
        const FALSE = 1 << 2;
        const EH = 1 << 3;
        const ABNORMAL = 1 << 4;
    }
}

impl EdgeFlags {
    pub const NAMES: [(EdgeFlags, &'static str); 5] = [
        (EdgeFlags::FALLTHRU, "fallthru"),
        (EdgeFlags::TRUE, "true"),
        (EdgeFlags::FALSE, "false"),
        (EdgeFlags::EH, "eh"),
        (EdgeFlags::ABNORMAL, "abnormal"),
    ];

    pub fn from_keyword(s: &str) -> Option<EdgeFlags> {
        Self::NAMES.iter().find(|(_, n)| *n == s).map(|(f, _)| *f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub dest: String,
    pub flags: EdgeFlags,
}

impl Edge {
    pub fn new(dest: impl Into<String>, flags: EdgeFlags) -> Self {
        Edge { dest: dest.into(), flags }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub label: String,
    pub phis: Vec<PhiNode>,
    pub statements: Vec<Statement>,
    pub out_edges: Vec<Edge>,
}

impl BasicBlock {
    pub fn new(label: impl Into<String>) -> Self {
        BasicBlock { label: label.into(), phis: Vec::new(), statements: Vec::new(), out_edges: Vec::new() }
    }

    pub fn nondebug_stmt_count(&self) -> usize {
        self.statements.iter().filter(|s| s.kind() != StatementKind::Debug).count()
    }

    /// Edges implied by the block's terminator, or a fall-through edge to
    /// `next` when the block has none. Explicit EH/abnormal edges follow
    /// these in `out_edges`.
    pub fn implied_edges(&self, next: Option<&str>) -> Vec<Edge> {
        match self.statements.last() {
            Some(Statement::Cond { then_label, else_label, .. }) => {
                vec![Edge::new(then_label.clone(), EdgeFlags::TRUE), Edge::new(else_label.clone(), EdgeFlags::FALSE)]
            }
            Some(Statement::Switch { cases, default, .. }) => {
                let mut seen: Vec<&str> = Vec::new();
                for t in cases.iter().map(|c| c.target.as_str()).chain(std::iter::once(default.as_str())) {
                    if !seen.contains(&t) {
                        seen.push(t);
                    }
                }
                seen.into_iter().map(|t| Edge::new(t, EdgeFlags::empty())).collect()
            }
            Some(Statement::Goto(GotoTarget::Block(l))) => vec![Edge::new(l.clone(), EdgeFlags::empty())],
            Some(Statement::Goto(GotoTarget::Computed(_))) | Some(Statement::Return(_)) | Some(Statement::Resx(_)) => {
                Vec::new()
            }
            _ => match next {
                Some(n) => vec![Edge::new(n, EdgeFlags::FALLTHRU)],
                None => Vec::new(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    Nothrow,
    Noreturn,
    Constructor,
    Destructor,
}

impl Attribute {
    pub fn keyword(self) -> &'static str {
        match self {
            Attribute::Nothrow => "nothrow",
            Attribute::Noreturn => "noreturn",
            Attribute::Constructor => "constructor",
            Attribute::Destructor => "destructor",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Attribute> {
        Some(match s {
            "nothrow" => Attribute::Nothrow,
            "noreturn" => Attribute::Noreturn,
            "constructor" => Attribute::Constructor,
            "destructor" => Attribute::Destructor,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FunctionFlags {
    pub address_taken: bool,
    pub comdat: bool,
    pub writeable: bool,
    pub external: bool,
}

impl FunctionFlags {
    pub const KEYWORDS: [&'static str; 4] = ["address_taken", "comdat", "writeable", "external"];

    pub fn names(&self) -> Vec<&'static str> {
        let bits = [self.address_taken, self.comdat, self.writeable, self.external];
        Self::KEYWORDS.iter().zip(bits).filter(|(_, b)| *b).map(|(k, _)| *k).collect()
    }

    pub fn set(&mut self, name: &str) -> bool {
        match name {
            "address_taken" => self.address_taken = true,
            "comdat" => self.comdat = true,
            "writeable" => self.writeable = true,
            "external" => self.external = true,
            _ => return false,
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EhKind {
    Try,
    Cleanup,
    MustNotThrow,
}

impl EhKind {
    pub fn keyword(self) -> &'static str {
        match self {
            EhKind::Try => "try",
            EhKind::Cleanup => "cleanup",
            EhKind::MustNotThrow => "must_not_throw",
        }
    }

    pub fn from_keyword(s: &str) -> Option<EhKind> {
        Some(match s {
            "try" => EhKind::Try,
            "cleanup" => EhKind::Cleanup,
            "must_not_throw" => EhKind::MustNotThrow,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EhRegion {
    pub id: u32,
    pub kind: EhKind,
    pub children: Vec<EhRegion>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EhRegionTree {
    pub roots: Vec<EhRegion>,
}

impl EhRegionTree {
    /// Regions in pre-order.
    pub fn preorder(&self) -> Vec<&EhRegion> {
        fn walk<'a>(r: &'a EhRegion, out: &mut Vec<&'a EhRegion>) {
            out.push(r);
            for c in &r.children {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        for r in &self.roots {
            walk(r, &mut out);
        }
        out
    }

    pub fn contains(&self, id: u32) -> bool {
        self.preorder().iter().any(|r| r.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: TypeTag,
}

impl Param {
    pub fn new(name: impl Into<String>, ty: TypeTag) -> Self {
        Param { name: name.into(), ty }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniFunction {
    pub name: String,
    pub index: usize,
    pub params: Vec<Param>,
    pub result_type: TypeTag,
    pub attributes: BTreeSet<Attribute>,
    pub flags: FunctionFlags,
    /// Set when the function is a body-less alias of another symbol.
    pub alias_of: Option<String>,
    pub eh_regions: Option<EhRegionTree>,
    pub blocks: Vec<BasicBlock>,
}

impl MiniFunction {
    pub fn new(name: impl Into<String>, index: usize, result_type: TypeTag) -> Self {
        MiniFunction {
            name: name.into(),
            index,
            params: Vec::new(),
            result_type,
            attributes: BTreeSet::new(),
            flags: FunctionFlags::default(),
            alias_of: None,
            eh_regions: None,
            blocks: Vec::new(),
        }
    }

    pub fn arg_types(&self) -> Vec<&TypeTag> {
        self.params.iter().map(|p| &p.ty).collect()
    }

    /// A function with a body of its own (neither external nor an alias).
    pub fn is_defined(&self) -> bool {
        !self.flags.external && self.alias_of.is_none()
    }

    pub fn edge_count(&self) -> usize {
        self.blocks.iter().map(|b| b.out_edges.len()).sum()
    }

    pub fn statement_count(&self) -> usize {
        self.blocks.iter().map(|b| b.statements.len()).sum()
    }

    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    /// Number of distinct SSA names defined, counting default definitions.
    pub fn ssa_count(&self) -> usize {
        let mut names = BTreeSet::new();
        for b in &self.blocks {
            for p in &b.phis {
                names.insert(p.result.index);
                for (_, op) in &p.args {
                    op.for_each_ssa(&mut |s| {
                        if s.default_def.is_some() {
                            names.insert(s.index);
                        }
                    });
                }
            }
            for s in &b.statements {
                if let Some(d) = s.def() {
                    names.insert(d.index);
                }
                for op in s.uses() {
                    op.for_each_ssa(&mut |s| {
                        if s.default_def.is_some() {
                            names.insert(s.index);
                        }
                    });
                }
                if let Some(d) = s.direct_ssa_use().filter(|d| d.default_def.is_some()) {
                    names.insert(d.index);
                }
            }
        }
        names.len()
    }

    /// Callee names in statement order.
    pub fn callees(&self) -> Vec<&str> {
        self.blocks
            .iter()
            .flat_map(|b| b.statements.iter())
            .filter_map(|s| match s {
                Statement::Call { callee, .. } => Some(callee.as_str()),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MiniModule {
    pub declarations: Declarations,
    pub functions: Vec<MiniFunction>,
}

impl MiniModule {
    pub fn function(&self, name: &str) -> Option<&MiniFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    /// Renumber function indices to match their position.
    pub fn reindex(&mut self) {
        for (i, f) in self.functions.iter_mut().enumerate() {
            f.index = i;
        }
    }
}
