//! Shared generators and reference implementations for the integration
//! tests. Everything random is driven by `BINLAYOUT_SEED` when set.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use binlayout::icf::{CallTarget, CallVectors, CongruenceClass};
use binlayout::ir::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn show(f: &MiniFunction) -> String {
    let mut s = String::new();
    print_function(&mut s, f);
    s
}

pub fn seed() -> u64 {
    std::env::var("BINLAYOUT_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0x5eed_1ca7)
}

/// A generator stream distinct per `salt`, so test files do not share draws.
pub fn rng(salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed() ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

// ---------------------------------------------------------------------------
// Random modules

const VAR_TYPES: [&str; 4] = ["i32", "i32", "ptr<record<A>>", "ptr<record<B>>"];
pub const MAX_BLOCKS: usize = 6;
pub const MAX_STATEMENTS: usize = 15;

fn var_type(i: usize) -> TypeTag {
    match VAR_TYPES[i % VAR_TYPES.len()] {
        "i32" => TypeTag::I32,
        "ptr<record<A>>" => TypeTag::ptr(TypeTag::record("A")),
        _ => TypeTag::ptr(TypeTag::record("B")),
    }
}

fn param_type(rng: &mut ChaCha8Rng) -> TypeTag {
    match rng.gen_range(0..4) {
        0 | 1 => TypeTag::I32,
        2 => TypeTag::ptr(TypeTag::record("A")),
        _ => TypeTag::ptr(TypeTag::record("B")),
    }
}

struct ModuleCx {
    vars: Vec<String>,
    callees: Vec<String>,
}

struct FnGen<'r> {
    rng: &'r mut ChaCha8Rng,
    next_ssa: u32,
    next_label: u32,
    budget: usize,
    defaults: Vec<SsaName>,
    regions: Vec<u32>,
}

impl FnGen<'_> {
    fn fresh(&mut self) -> SsaName {
        self.next_ssa += 1;
        SsaName::new(self.next_ssa)
    }

    fn value(&mut self, avail: &[SsaName]) -> Operand {
        let r = self.rng.gen_range(0..10);
        if r < 3 || (avail.is_empty() && self.defaults.is_empty()) {
            Operand::int(TypeTag::I32, self.rng.gen_range(0..3))
        } else if r < 5 && !self.defaults.is_empty() || avail.is_empty() {
            Operand::Ssa(self.defaults.choose(self.rng).unwrap().clone())
        } else {
            Operand::Ssa(avail.choose(self.rng).unwrap().clone())
        }
    }

    fn ssa_value(&mut self, avail: &[SsaName]) -> Option<SsaName> {
        let pool: Vec<&SsaName> = avail.iter().chain(self.defaults.iter()).collect();
        pool.choose(self.rng).map(|s| (*s).clone())
    }

    fn memory(&mut self, cx: &ModuleCx, avail: &[SsaName]) -> Operand {
        let var = Operand::Decl(DeclRef::new(DeclClass::Var, cx.vars.choose(self.rng).unwrap()));
        match self.rng.gen_range(0..3) {
            0 => {
                let idx = self.value(avail);
                Operand::component(ComponentKind::ArrayRef, var, Selector::Operand(Box::new(idx)))
            }
            1 => Operand::component(ComponentKind::ComponentRef, var, Selector::Offset(self.rng.gen_range(0..2) * 8)),
            _ => {
                let base = self.value(avail);
                Operand::component(ComponentKind::MemRef, base, Selector::Offset(self.rng.gen_range(0..2) * 4))
            }
        }
    }

    fn body_statement(&mut self, cx: &ModuleCx, avail: &mut Vec<SsaName>) -> Statement {
        let eh = !self.regions.is_empty();
        loop {
            let s = match self.rng.gen_range(0..100) {
                0..=29 => {
                    let op = ["add", "sub", "mul"].choose(self.rng).unwrap().to_string();
                    let operands = vec![self.value(avail), self.value(avail)];
                    let d = self.fresh();
                    avail.push(d.clone());
                    Statement::Assign { dest: Operand::Ssa(d), opcode: op, operands }
                }
                30..=39 => {
                    let operands = vec![self.value(avail)];
                    let d = self.fresh();
                    avail.push(d.clone());
                    Statement::Assign { dest: Operand::Ssa(d), opcode: "copy".into(), operands }
                }
                40..=49 => {
                    let operands = vec![self.memory(cx, avail)];
                    let d = self.fresh();
                    avail.push(d.clone());
                    Statement::Assign { dest: Operand::Ssa(d), opcode: "load".into(), operands }
                }
                50..=59 => {
                    let dest = if self.rng.gen_bool(0.3) {
                        Operand::Decl(DeclRef::new(DeclClass::Var, cx.vars.choose(self.rng).unwrap()))
                    } else {
                        self.memory(cx, avail)
                    };
                    Statement::Assign { dest, opcode: "copy".into(), operands: vec![self.value(avail)] }
                }
                60..=74 => {
                    let callee = cx.callees.choose(self.rng).unwrap().clone();
                    let mut args: Vec<Operand> = (0..self.rng.gen_range(0..3)).map(|_| self.value(avail)).collect();
                    if self.rng.gen_bool(0.1) {
                        args.push(Operand::Decl(DeclRef::new(DeclClass::Func, cx.callees.choose(self.rng).unwrap())));
                    }
                    let result = self.rng.gen_bool(0.5).then(|| self.fresh());
                    if let Some(r) = &result {
                        avail.push(r.clone());
                    }
                    Statement::Call { result, callee, args }
                }
                75..=81 => {
                    self.next_label += 1;
                    Statement::Label(DeclRef::new(DeclClass::Label, format!("L{}", self.next_label)))
                }
                82..=89 => Statement::Debug(vec![self.value(avail)]),
                90..=95 if eh => Statement::EhDispatch(*self.regions.choose(self.rng).unwrap()),
                96..=97 => Statement::Asm("nop".into()),
                _ => continue,
            };
            return s;
        }
    }
}

/// Terminator plan of one block; edges are derived from it afterwards.
enum Term {
    Fall,
    Goto(usize),
    Cond(usize, usize),
    Switch(Vec<usize>, usize),
    Ret,
    Resx,
}

/// A random valid function over the module's variables and callees.
fn gen_function(rng: &mut ChaCha8Rng, cx: &ModuleCx, name: &str, index: usize) -> MiniFunction {
    let nblocks = rng.gen_range(1..=MAX_BLOCKS);
    let mut f = MiniFunction::new(name, index, if rng.gen_bool(0.7) { TypeTag::I32 } else { TypeTag::Void });
    for p in 0..rng.gen_range(0..=3) {
        f.params.push(Param::new(format!("p{p}"), param_type(rng)));
    }
    if rng.gen_bool(0.2) {
        f.attributes.insert(Attribute::Nothrow);
    }
    let mut regions = Vec::new();
    if rng.gen_bool(0.3) {
        let tree = if rng.gen_bool(0.5) {
            vec![EhRegion {
                id: 1,
                kind: EhKind::Try,
                children: vec![EhRegion { id: 2, kind: EhKind::Cleanup, children: vec![] }],
            }]
        } else {
            vec![
                EhRegion { id: 1, kind: EhKind::MustNotThrow, children: vec![] },
                EhRegion { id: 2, kind: EhKind::Try, children: vec![] },
            ]
        };
        f.eh_regions = Some(EhRegionTree { roots: tree });
        regions = vec![1, 2];
    }

    let mut g = FnGen { rng, next_ssa: 0, next_label: 0, budget: MAX_STATEMENTS, defaults: Vec::new(), regions };
    for p in &f.params {
        if g.rng.gen_bool(0.8) {
            g.next_ssa += 1;
            g.defaults.push(SsaName::default_def(g.next_ssa, DeclRef::new(DeclClass::Parm, &p.name)));
        }
    }
    if g.rng.gen_bool(0.3) {
        g.next_ssa += 1;
        let v = cx.vars.choose(g.rng).unwrap().clone();
        g.defaults.push(SsaName::default_def(g.next_ssa, DeclRef::new(DeclClass::Var, v)));
    }

    // Control flow first; targets never include the entry block.
    let mut terms = Vec::with_capacity(nblocks);
    for i in 0..nblocks {
        let t = if i + 1 == nblocks {
            if !g.regions.is_empty() && g.rng.gen_bool(0.3) {
                Term::Resx
            } else {
                Term::Ret
            }
        } else {
            let target = |g: &mut FnGen| g.rng.gen_range(1..nblocks);
            match g.rng.gen_range(0..10) {
                0..=2 => Term::Fall,
                3..=4 => Term::Goto(target(&mut g)),
                5..=6 if nblocks > 2 => {
                    let a = target(&mut g);
                    let b = loop {
                        let b = target(&mut g);
                        if b != a {
                            break b;
                        }
                    };
                    Term::Cond(a, b)
                }
                7..=8 => {
                    let cases = (0..g.rng.gen_range(1..=3)).map(|_| target(&mut g)).collect();
                    Term::Switch(cases, target(&mut g))
                }
                _ => Term::Ret,
            }
        };
        terms.push(t);
    }
    let labels: Vec<String> = (0..nblocks).map(|i| format!("bb{i}")).collect();

    // Plan every edge, so predecessors are known before bodies exist.
    let mut planned: Vec<Vec<usize>> = Vec::with_capacity(nblocks);
    let mut extra: Vec<Option<(usize, EdgeFlags)>> = vec![None; nblocks];
    for (i, t) in terms.iter().enumerate() {
        let mut d = match t {
            Term::Fall => vec![i + 1],
            Term::Goto(x) => vec![*x],
            Term::Cond(a, b) => vec![*a, *b],
            Term::Switch(cases, default) => {
                let mut v: Vec<usize> = Vec::new();
                for &x in cases.iter().chain(std::iter::once(default)) {
                    if !v.contains(&x) {
                        v.push(x);
                    }
                }
                v
            }
            Term::Ret | Term::Resx => Vec::new(),
        };
        if !g.regions.is_empty() && i + 1 < nblocks && g.rng.gen_bool(0.3) {
            let x = g.rng.gen_range(1..nblocks);
            if !d.contains(&x) {
                let flags = if g.rng.gen_bool(0.8) { EdgeFlags::EH } else { EdgeFlags::ABNORMAL };
                extra[i] = Some((x, flags));
                d.push(x);
            }
        }
        planned.push(d);
    }
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); nblocks];
    for (i, d) in planned.iter().enumerate() {
        for &x in d {
            preds[x].push(i);
        }
    }

    let mut blocks: Vec<BasicBlock> = labels.iter().map(BasicBlock::new).collect();
    let mut phi_results: Vec<Vec<SsaName>> = vec![Vec::new(); nblocks];
    let mut stmt_defs: Vec<Vec<SsaName>> = vec![Vec::new(); nblocks];
    for i in 0..nblocks {
        if !preds[i].is_empty() && i > 0 {
            for _ in 0..[0, 0, 1, 1, 2].choose(g.rng).copied().unwrap() {
                let r = g.fresh();
                phi_results[i].push(r);
            }
        }
    }

    for i in 0..nblocks {
        let entry: Vec<SsaName> = if i == 0 { Vec::new() } else { stmt_defs[0].clone() };
        let mut avail: Vec<SsaName> = entry.iter().chain(&phi_results[i]).cloned().collect();
        let before = avail.len();
        let reserve = nblocks - i + terms[i..].iter().filter(|t| matches!(t, Term::Switch(..))).count();
        let room = g.budget.saturating_sub(reserve);
        let n = g.rng.gen_range(0..=room.min(4));
        g.budget -= n;
        let mut stmts = Vec::new();
        for _ in 0..n {
            let s = g.body_statement(cx, &mut avail);
            stmts.push(s);
        }
        let term = match &terms[i] {
            Term::Fall => None,
            Term::Goto(t) => Some(Statement::Goto(GotoTarget::Block(labels[*t].clone()))),
            Term::Cond(a, b) => Some(Statement::Cond {
                opcode: ["lt", "eq"].choose(g.rng).unwrap().to_string(),
                lhs: g.value(&avail),
                rhs: g.value(&avail),
                then_label: labels[*a].clone(),
                else_label: labels[*b].clone(),
            }),
            Term::Switch(cases, default) => {
                let index = match g.ssa_value(&avail) {
                    Some(s) => s,
                    None => {
                        let d = g.fresh();
                        g.budget = g.budget.saturating_sub(1);
                        stmts.push(Statement::Assign {
                            dest: Operand::Ssa(d.clone()),
                            opcode: "copy".into(),
                            operands: vec![Operand::int(TypeTag::I32, 1)],
                        });
                        avail.push(d.clone());
                        d
                    }
                };
                Some(Statement::Switch {
                    index,
                    cases: cases
                        .iter()
                        .enumerate()
                        .map(|(k, t)| SwitchCase {
                            low: k as i128 * 2,
                            high: (k % 2 == 1).then_some(k as i128 * 2 + 1),
                            target: labels[*t].clone(),
                        })
                        .collect(),
                    default: labels[*default].clone(),
                })
            }
            Term::Ret => Some(Statement::Return((f.result_type != TypeTag::Void).then(|| g.value(&avail)))),
            Term::Resx => Some(Statement::Resx(*g.regions.choose(g.rng).unwrap())),
        };
        if let Some(t) = term {
            g.budget = g.budget.saturating_sub(1);
            stmts.push(t);
        }
        stmt_defs[i] = avail[before..].to_vec();
        blocks[i].statements = stmts;
    }

    for i in 0..nblocks {
        let next = labels.get(i + 1).map(String::as_str);
        let mut edges = blocks[i].implied_edges(next);
        if let Some((x, flags)) = extra[i] {
            edges.push(Edge::new(labels[x].clone(), flags));
        }
        debug_assert_eq!(edges.len(), planned[i].len());
        blocks[i].out_edges = edges;
    }
    for i in 0..nblocks {
        for r in phi_results[i].clone() {
            let mut args = Vec::new();
            for &p in &preds[i] {
                let mut pool = if p == 0 { Vec::new() } else { stmt_defs[0].clone() };
                pool.extend(stmt_defs[p].iter().cloned());
                pool.extend(phi_results[p].iter().cloned());
                args.push((labels[p].clone(), g.value(&pool)));
            }
            args.shuffle(g.rng);
            blocks[i].phis.push(PhiNode { result: r, args });
        }
    }
    f.blocks = blocks;
    f
}

/// Rename everything the comparator must see through: SSA numbers, parameter
/// and label names, block labels, EH region ids, record names, PHI argument
/// order, debug statements and flags.
pub fn equal_variant(rng: &mut ChaCha8Rng, f: &MiniFunction, vars: &BTreeMap<String, DeclInfo>) -> MiniFunction {
    let mut g = f.clone();
    let mut ssa: Vec<u32> = (1..=200).collect();
    ssa.shuffle(rng);
    let ssa_map = |i: u32| ssa[(i as usize - 1) % 200];
    let parm_rename: HashMap<String, String> =
        f.params.iter().map(|p| (p.name.clone(), format!("q_{}", p.name))).collect();

    // Vars only move within a type class so registry types stay compatible.
    let mut var_map: HashMap<String, String> = HashMap::new();
    let mut by_type: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (name, info) in vars.iter().filter(|(_, i)| i.class == DeclClass::Var) {
        let key = match &info.ty {
            TypeTag::Ptr(inner) if matches!(inner.as_ref(), TypeTag::Record(_)) => "rec".to_string(),
            t => t.to_string(),
        };
        by_type.entry(key).or_default().push(name.clone());
    }
    for names in by_type.values() {
        let mut shuffled = names.clone();
        shuffled.shuffle(rng);
        for (a, b) in names.iter().zip(shuffled) {
            var_map.insert(a.clone(), b);
        }
    }
    let suffix: u32 = rng.gen_range(100..999);
    let label_map = |l: &str| format!("{l}_{suffix}");
    let block_map = |l: &str| format!("blk_{l}");
    let region_shift = rng.gen_range(3..9u32);

    for p in &mut g.params {
        p.name = parm_rename[&p.name].clone();
        if let TypeTag::Ptr(inner) = &p.ty {
            if matches!(inner.as_ref(), TypeTag::Record(_)) && rng.gen_bool(0.5) {
                p.ty = TypeTag::ptr(TypeTag::record(if rng.gen_bool(0.5) { "A" } else { "C" }));
            }
        }
    }
    let mut decl = |d: &mut DeclRef| match d.class {
        DeclClass::Parm => d.name = parm_rename[&d.name].clone(),
        DeclClass::Var => d.name = var_map[&d.name].clone(),
        DeclClass::Label => d.name = label_map(&d.name),
        DeclClass::Func => {}
    };
    fn walk(o: &mut Operand, ssa: &dyn Fn(u32) -> u32, decl: &mut dyn FnMut(&mut DeclRef)) {
        match o {
            Operand::Ssa(s) => {
                s.index = ssa(s.index);
                if let Some(d) = &mut s.default_def {
                    decl(d);
                }
            }
            Operand::Decl(d) => decl(d),
            Operand::Component { base, selector, .. } => {
                walk(base, ssa, decl);
                if let Selector::Operand(x) = selector {
                    walk(x, ssa, decl);
                }
            }
            Operand::Int { .. } | Operand::Const { .. } => {}
        }
    }
    let rename_ssa = |s: &mut SsaName, decl: &mut dyn FnMut(&mut DeclRef)| {
        s.index = ssa_map(s.index);
        if let Some(d) = &mut s.default_def {
            decl(d);
        }
    };
    for b in &mut g.blocks {
        b.label = block_map(&b.label);
        for p in &mut b.phis {
            rename_ssa(&mut p.result, &mut decl);
            for (l, o) in &mut p.args {
                *l = block_map(l);
                walk(o, &ssa_map, &mut decl);
            }
            p.args.shuffle(rng);
        }
        for e in &mut b.out_edges {
            e.dest = block_map(&e.dest);
        }
        let mut stmts = Vec::new();
        for s in std::mem::take(&mut b.statements) {
            let mut s = s;
            match &mut s {
                Statement::Assign { dest, operands, .. } => {
                    walk(dest, &ssa_map, &mut decl);
                    operands.iter_mut().for_each(|o| walk(o, &ssa_map, &mut decl));
                }
                Statement::Call { result, args, .. } => {
                    if let Some(r) = result {
                        rename_ssa(r, &mut decl);
                    }
                    args.iter_mut().for_each(|o| walk(o, &ssa_map, &mut decl));
                }
                Statement::Cond { lhs, rhs, then_label, else_label, .. } => {
                    walk(lhs, &ssa_map, &mut decl);
                    walk(rhs, &ssa_map, &mut decl);
                    *then_label = block_map(then_label);
                    *else_label = block_map(else_label);
                }
                Statement::Switch { index, cases, default } => {
                    rename_ssa(index, &mut decl);
                    cases.iter_mut().for_each(|c| c.target = block_map(&c.target));
                    *default = block_map(default);
                }
                Statement::Return(Some(o)) => walk(o, &ssa_map, &mut decl),
                Statement::Label(d) => decl(d),
                Statement::Goto(GotoTarget::Block(l)) => *l = block_map(l),
                Statement::Goto(GotoTarget::Computed(s)) => rename_ssa(s, &mut decl),
                Statement::Resx(r) | Statement::EhDispatch(r) => *r += region_shift,
                Statement::Debug(ops) => ops.iter_mut().for_each(|o| walk(o, &ssa_map, &mut decl)),
                Statement::Return(None) | Statement::Asm(_) => {}
            }
            if matches!(s, Statement::Debug(_)) && rng.gen_bool(0.5) {
                continue;
            }
            if !s.kind().is_terminator() && rng.gen_bool(0.15) {
                stmts.push(Statement::Debug(vec![Operand::int(TypeTag::I32, 7)]));
            }
            stmts.push(s);
        }
        b.statements = stmts;
    }
    // Keep within the size limit of generated functions.
    while g.statement_count() > MAX_STATEMENTS {
        let Some(b) = g.blocks.iter_mut().find(|b| b.statements.iter().any(|s| matches!(s, Statement::Debug(_))))
        else {
            break;
        };
        let k = b.statements.iter().rposition(|s| matches!(s, Statement::Debug(_))).unwrap();
        b.statements.remove(k);
    }
    if let Some(t) = &mut g.eh_regions {
        fn shift(r: &mut EhRegion, by: u32) {
            r.id += by;
            r.children.iter_mut().for_each(|c| shift(c, by));
        }
        t.roots.iter_mut().for_each(|r| shift(r, region_shift));
    }
    g.flags = random_flags(rng);
    g
}

/// One small edit that usually breaks equality.
pub fn mutated_variant(rng: &mut ChaCha8Rng, f: &MiniFunction, callees: &[String]) -> MiniFunction {
    let mut g = f.clone();
    let nb = g.blocks.len();
    for _ in 0..8 {
        let b = &mut g.blocks[rng.gen_range(0..nb)];
        if b.statements.is_empty() {
            continue;
        }
        let si = rng.gen_range(0..b.statements.len());
        match &mut b.statements[si] {
            Statement::Assign { opcode, operands, .. } if opcode != "load" && opcode != "copy" => {
                if rng.gen_bool(0.5) {
                    *opcode = if opcode == "add" { "sub".into() } else { "add".into() };
                } else {
                    operands.swap(0, 1);
                }
                return g;
            }
            Statement::Assign { operands, .. } => {
                if let Some(Operand::Int { value, .. }) = operands.first_mut() {
                    *value += 1;
                    return g;
                }
            }
            Statement::Call { callee, .. } => {
                *callee = callees.choose(rng).unwrap().clone();
                return g;
            }
            Statement::Return(Some(Operand::Int { value, .. })) => {
                *value = 1 - *value;
                return g;
            }
            Statement::Cond { opcode, .. } => {
                *opcode = if opcode == "lt" { "eq".into() } else { "lt".into() };
                return g;
            }
            Statement::Switch { cases, .. } => {
                cases[0].low -= 1;
                return g;
            }
            _ => {}
        }
    }
    g.attributes.insert(Attribute::Noreturn);
    g
}

pub fn random_flags(rng: &mut ChaCha8Rng) -> FunctionFlags {
    FunctionFlags {
        address_taken: rng.gen_bool(0.3),
        comdat: rng.gen_bool(0.3),
        writeable: rng.gen_bool(0.2),
        external: false,
    }
}

/// A valid module mixing fresh functions, renamed copies and near copies.
pub fn random_module(rng: &mut ChaCha8Rng) -> MiniModule {
    let nbase = rng.gen_range(2..=4);
    let nderived = rng.gen_range(1..=5);
    let total = nbase + nderived;
    let mut declarations = Declarations::new();
    let vars: Vec<String> = (0..rng.gen_range(1..=4)).map(|i| format!("g{i}")).collect();
    for (i, v) in vars.iter().enumerate() {
        declarations.insert(v.clone(), DeclInfo { class: DeclClass::Var, ty: var_type(i) });
    }
    for e in ["ext0", "ext1"] {
        declarations.insert(e.into(), DeclInfo { class: DeclClass::Func, ty: TypeTag::I32 });
    }
    let names: Vec<String> = (0..total).map(|i| format!("f{i}")).collect();
    let mut callees: Vec<String> = vec!["ext0".into(), "ext1".into()];
    callees.extend(names.iter().cloned());
    let cx = ModuleCx { vars, callees };

    let mut functions: Vec<MiniFunction> = Vec::with_capacity(total);
    for name in &names[..nbase] {
        let mut f = gen_function(rng, &cx, name, 0);
        f.flags = random_flags(rng);
        functions.push(f);
    }
    for name in &names[nbase..] {
        let src = functions[rng.gen_range(0..functions.len())].clone();
        let mut v = equal_variant(rng, &src, &declarations);
        if rng.gen_bool(0.4) {
            v = mutated_variant(rng, &v, &cx.callees);
        }
        v.name = name.clone();
        functions.push(v);
    }
    functions.shuffle(rng);
    let mut m = MiniModule { declarations, functions };
    m.reindex();
    let diags = validate_module(&m);
    assert!(diags.is_empty(), "generator produced an invalid module: {diags:?}\n{}", print_module(&m));
    m
}

// ---------------------------------------------------------------------------
// Brute-force equality oracle

fn norm_type(t: &TypeTag) -> TypeTag {
    match t {
        TypeTag::Ptr(inner) if matches!(inner.as_ref(), TypeTag::Record(_)) => TypeTag::ptr(TypeTag::record("")),
        other => other.clone(),
    }
}

fn has_asm(f: &MiniFunction) -> bool {
    f.blocks.iter().flat_map(|b| &b.statements).any(|s| matches!(s, Statement::Asm(_)))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Site {
    Phi(usize, usize),
    Stmt(usize, usize),
}

fn def_sites(f: &MiniFunction) -> BTreeMap<Site, u32> {
    let mut out = BTreeMap::new();
    for (bi, b) in f.blocks.iter().enumerate() {
        for (j, p) in b.phis.iter().enumerate() {
            out.insert(Site::Phi(bi, j), p.result.index);
        }
        let nondebug = b.statements.iter().filter(|s| s.kind() != StatementKind::Debug);
        for (j, s) in nondebug.enumerate() {
            if let Some(d) = s.def() {
                out.insert(Site::Stmt(bi, j), d.index);
            }
        }
    }
    out
}

/// Every SSA operand occurrence and every declaration reference of `f`
/// outside debug statements.
fn walk_names(f: &MiniFunction, ssa: &mut dyn FnMut(&SsaName), decl: &mut dyn FnMut(&DeclRef)) {
    fn op(o: &Operand, ssa: &mut dyn FnMut(&SsaName), decl: &mut dyn FnMut(&DeclRef)) {
        match o {
            Operand::Ssa(s) => ssa(s),
            Operand::Decl(d) => decl(d),
            Operand::Component { base, selector, .. } => {
                op(base, ssa, decl);
                if let Selector::Operand(x) = selector {
                    op(x, ssa, decl);
                }
            }
            _ => {}
        }
    }
    for b in &f.blocks {
        for p in &b.phis {
            ssa(&p.result);
            p.args.iter().for_each(|(_, o)| op(o, ssa, decl));
        }
        for s in b.statements.iter().filter(|s| s.kind() != StatementKind::Debug) {
            if let Some(d) = s.def() {
                ssa(d);
            }
            if let Some(d) = s.direct_ssa_use() {
                ssa(d);
            }
            if let Statement::Label(d) = s {
                decl(d);
            }
            for o in s.uses() {
                op(o, ssa, decl);
            }
        }
    }
}

struct Names {
    /// Default-definition SSA names per declaration.
    defaults: BTreeMap<DeclRef, BTreeSet<u32>>,
    vars: BTreeSet<String>,
    labels: BTreeSet<String>,
    ssa: BTreeSet<u32>,
}

fn names_of(f: &MiniFunction) -> Names {
    let mut n =
        Names { defaults: BTreeMap::new(), vars: BTreeSet::new(), labels: BTreeSet::new(), ssa: BTreeSet::new() };
    let mut decls: Vec<DeclRef> = Vec::new();
    let mut defaults: Vec<(DeclRef, u32)> = Vec::new();
    let mut ssa = BTreeSet::new();
    walk_names(
        f,
        &mut |s| {
            ssa.insert(s.index);
            if let Some(d) = &s.default_def {
                defaults.push((d.clone(), s.index));
            }
        },
        &mut |d| decls.push(d.clone()),
    );
    decls.extend(defaults.iter().map(|(d, _)| d.clone()));
    for (d, i) in defaults {
        n.defaults.entry(d).or_default().insert(i);
    }
    for d in decls {
        match d.class {
            DeclClass::Var => {
                n.vars.insert(d.name);
            }
            DeclClass::Label => {
                n.labels.insert(d.name);
            }
            _ => {}
        }
    }
    n.ssa = ssa;
    n
}

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head.clone());
            out.push(p);
        }
    }
    out
}

/// Rewrite `f` under the given renaming into a canonical, name-free form
/// that can be compared with `==`.
fn canonical(
    f: &MiniFunction,
    ssa: &BTreeMap<u32, u32>,
    decl: &BTreeMap<DeclRef, DeclRef>,
    block_names: &[String],
) -> MiniFunction {
    let ord: HashMap<&str, usize> = f.blocks.iter().enumerate().map(|(i, b)| (b.label.as_str(), i)).collect();
    let label = |l: &str| block_names[ord[l]].clone();
    let regions: HashMap<u32, u32> = f
        .eh_regions
        .as_ref()
        .map(|t| t.preorder().iter().enumerate().map(|(i, r)| (r.id, i as u32)).collect())
        .unwrap_or_default();
    let map_decl = |d: &DeclRef| decl.get(d).cloned().unwrap_or_else(|| d.clone());
    let map_ssa = |s: &SsaName| SsaName {
        index: ssa.get(&s.index).copied().unwrap_or(u32::MAX),
        default_def: s.default_def.as_ref().map(map_decl),
    };
    fn op(o: &Operand, ms: &dyn Fn(&SsaName) -> SsaName, md: &dyn Fn(&DeclRef) -> DeclRef) -> Operand {
        match o {
            Operand::Ssa(s) => Operand::Ssa(ms(s)),
            Operand::Decl(d) => Operand::Decl(md(d)),
            Operand::Int { ty, value } => Operand::Int { ty: norm_type(ty), value: *value },
            Operand::Const { ty, payload } => Operand::Const { ty: norm_type(ty), payload: payload.clone() },
            Operand::Component { kind, base, selector } => Operand::Component {
                kind: *kind,
                base: Box::new(op(base, ms, md)),
                selector: match selector {
                    Selector::Offset(x) => Selector::Offset(*x),
                    Selector::Operand(x) => Selector::Operand(Box::new(op(x, ms, md))),
                },
            },
        }
    }
    let o = |x: &Operand| op(x, &map_ssa, &map_decl);

    let mut g = MiniFunction::new("", 0, norm_type(&f.result_type));
    g.attributes = f.attributes.clone();
    g.params = f
        .params
        .iter()
        .map(|p| Param::new(map_decl(&DeclRef::new(DeclClass::Parm, &p.name)).name, norm_type(&p.ty)))
        .collect();
    g.eh_regions = f.eh_regions.as_ref().map(|t| {
        fn strip(r: &EhRegion, ids: &HashMap<u32, u32>) -> EhRegion {
            EhRegion { id: ids[&r.id], kind: r.kind, children: r.children.iter().map(|c| strip(c, ids)).collect() }
        }
        EhRegionTree { roots: t.roots.iter().map(|r| strip(r, &regions)).collect() }
    });
    for b in &f.blocks {
        let mut nb = BasicBlock::new(label(&b.label));
        for p in &b.phis {
            let mut args: Vec<(usize, String, Operand)> =
                p.args.iter().map(|(l, x)| (ord[l.as_str()], label(l), o(x))).collect();
            args.sort_by_key(|a| a.0);
            nb.phis
                .push(PhiNode { result: map_ssa(&p.result), args: args.into_iter().map(|(_, l, x)| (l, x)).collect() });
        }
        for s in &b.statements {
            let t = match s {
                Statement::Debug(_) => continue,
                Statement::Assign { dest, opcode, operands } => Statement::Assign {
                    dest: o(dest),
                    opcode: opcode.clone(),
                    operands: operands.iter().map(o).collect(),
                },
                Statement::Call { result, callee, args } => Statement::Call {
                    result: result.as_ref().map(map_ssa),
                    callee: callee.clone(),
                    args: args.iter().map(o).collect(),
                },
                Statement::Cond { opcode, lhs, rhs, then_label, else_label } => Statement::Cond {
                    opcode: opcode.clone(),
                    lhs: o(lhs),
                    rhs: o(rhs),
                    then_label: label(then_label),
                    else_label: label(else_label),
                },
                Statement::Switch { index, cases, default } => Statement::Switch {
                    index: map_ssa(index),
                    cases: cases
                        .iter()
                        .map(|c| SwitchCase { low: c.low, high: c.high, target: label(&c.target) })
                        .collect(),
                    default: label(default),
                },
                Statement::Return(x) => Statement::Return(x.as_ref().map(o)),
                Statement::Label(d) => Statement::Label(map_decl(d)),
                Statement::Goto(GotoTarget::Block(l)) => Statement::Goto(GotoTarget::Block(label(l))),
                Statement::Goto(GotoTarget::Computed(x)) => Statement::Goto(GotoTarget::Computed(map_ssa(x))),
                Statement::Resx(r) => Statement::Resx(regions.get(r).copied().unwrap_or(u32::MAX)),
                Statement::EhDispatch(_) => Statement::EhDispatch(0),
                Statement::Asm(x) => Statement::Asm(x.clone()),
            };
            nb.statements.push(t);
        }
        nb.out_edges = b.out_edges.iter().map(|e| Edge::new(label(&e.dest), e.flags)).collect();
        g.blocks.push(nb);
    }
    g
}

/// Exhaustive equality: search every declaration bijection (parameters fixed
/// by position), every SSA bijection consistent with definition sites, and
/// accept if the renamed left side is structurally identical to the right.
pub fn oracle_equal(a: &MiniFunction, b: &MiniFunction, decls: &Declarations) -> bool {
    if has_asm(a) || has_asm(b) {
        return false;
    }
    if a.params.len() != b.params.len() || a.blocks.len() != b.blocks.len() {
        return false;
    }
    let (na, nb) = (names_of(a), names_of(b));
    if na.ssa.len() != nb.ssa.len() || na.vars.len() != nb.vars.len() || na.labels.len() != nb.labels.len() {
        return false;
    }
    let (sa, sb) = (def_sites(a), def_sites(b));
    if sa.keys().ne(sb.keys()) {
        return false;
    }
    let block_names: Vec<String> = (0..b.blocks.len()).map(|i| format!("#{i}")).collect();
    let identity: BTreeMap<u32, u32> = nb.ssa.iter().map(|&i| (i, i)).collect();
    let mut b_decl: BTreeMap<DeclRef, DeclRef> = BTreeMap::new();
    for p in &b.params {
        let d = DeclRef::new(DeclClass::Parm, &p.name);
        b_decl.insert(d.clone(), d);
    }
    let cb = canonical(b, &identity, &b_decl, &block_names);

    let var_ty = |n: &str| decls.get(n).map(|i| norm_type(&i.ty));
    let va: Vec<String> = na.vars.iter().cloned().collect();
    let vb: Vec<String> = nb.vars.iter().cloned().collect();
    let la: Vec<String> = na.labels.iter().cloned().collect();
    let lb: Vec<String> = nb.labels.iter().cloned().collect();

    for vperm in permutations(&vb) {
        if va.iter().zip(&vperm).any(|(x, y)| var_ty(x) != var_ty(y)) {
            continue;
        }
        for lperm in permutations(&lb) {
            let mut dmap: BTreeMap<DeclRef, DeclRef> = BTreeMap::new();
            for (pa, pb) in a.params.iter().zip(&b.params) {
                dmap.insert(DeclRef::new(DeclClass::Parm, &pa.name), DeclRef::new(DeclClass::Parm, &pb.name));
            }
            for (x, y) in va.iter().zip(&vperm) {
                dmap.insert(DeclRef::new(DeclClass::Var, x), DeclRef::new(DeclClass::Var, y));
            }
            for (x, y) in la.iter().zip(&lperm) {
                dmap.insert(DeclRef::new(DeclClass::Label, x), DeclRef::new(DeclClass::Label, y));
            }
            let mut base: BTreeMap<u32, u32> = BTreeMap::new();
            for (site, &i) in &sa {
                base.insert(i, sb[site]);
            }
            // Default definitions follow their declaration; several names of
            // one declaration may still be permuted among themselves.
            let mut choices: Vec<Vec<Vec<(u32, u32)>>> = Vec::new();
            let mut ok = true;
            for (d, names) in &na.defaults {
                let target = dmap.get(d).cloned().unwrap_or_else(|| d.clone());
                let Some(other) = nb.defaults.get(&target) else {
                    ok = false;
                    break;
                };
                if other.len() != names.len() {
                    ok = false;
                    break;
                }
                let from: Vec<u32> = names.iter().copied().collect();
                let to: Vec<u32> = other.iter().copied().collect();
                choices.push(permutations(&to).into_iter().map(|p| from.iter().copied().zip(p).collect()).collect());
            }
            if !ok {
                continue;
            }
            let mut idx = vec![0usize; choices.len()];
            loop {
                let mut smap = base.clone();
                for (c, &k) in choices.iter().zip(&idx) {
                    smap.extend(c[k].iter().copied());
                }
                let injective = smap.values().collect::<BTreeSet<_>>().len() == smap.len();
                if injective && canonical(a, &smap, &dmap, &block_names) == cb {
                    return true;
                }
                let mut pos = 0;
                loop {
                    if pos == idx.len() {
                        break;
                    }
                    idx[pos] += 1;
                    if idx[pos] < choices[pos].len() {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == idx.len() {
                    break;
                }
            }
        }
    }
    false
}

/// All pairs `(i, j)`, `i < j`, of defined functions the oracle considers
/// equal.
pub fn oracle_pairs(m: &MiniModule) -> BTreeSet<(usize, usize)> {
    let defined: Vec<usize> = (0..m.functions.len()).filter(|&i| m.functions[i].is_defined()).collect();
    let mut out = BTreeSet::new();
    for (k, &i) in defined.iter().enumerate() {
        for &j in &defined[k + 1..] {
            if oracle_equal(&m.functions[i], &m.functions[j], &m.declarations) {
                out.insert((i, j));
            }
        }
    }
    out
}

pub fn group_pairs(groups: &[Vec<usize>]) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for g in groups {
        for (k, &i) in g.iter().enumerate() {
            for &j in &g[k + 1..] {
                out.insert((i.min(j), i.max(j)));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Naive partition refinement

/// Split by call signatures until nothing changes. Targets outside the
/// partition keep their own identity.
pub fn naive_refine(classes: &[CongruenceClass], calls: &CallVectors) -> Vec<BTreeSet<usize>> {
    let mut class_of: BTreeMap<usize, usize> = BTreeMap::new();
    for (k, c) in classes.iter().enumerate() {
        for &f in &c.members {
            class_of.insert(f, k);
        }
    }
    loop {
        let mut sigs: BTreeMap<(usize, Vec<String>), Vec<usize>> = BTreeMap::new();
        for (&f, &c) in &class_of {
            let sig: Vec<String> = calls
                .get(&f)
                .map(|v| {
                    v.iter()
                        .map(|t| match t {
                            CallTarget::Function(j) if class_of.contains_key(j) => format!("c{}", class_of[j]),
                            CallTarget::Function(j) => format!("f{j}"),
                            CallTarget::External(n) => format!("x{n}"),
                        })
                        .collect()
                })
                .unwrap_or_default();
            sigs.entry((c, sig)).or_default().push(f);
        }
        let count_before = class_of.values().collect::<BTreeSet<_>>().len();
        if sigs.len() == count_before {
            let mut out: Vec<BTreeSet<usize>> = sigs.into_values().map(|v| v.into_iter().collect()).collect();
            out.sort();
            return out;
        }
        for (k, members) in sigs.into_values().enumerate() {
            for f in members {
                class_of.insert(f, k);
            }
        }
    }
}

/// Random classes over `0..n` plus call vectors that may reach functions
/// outside the partition and external symbols.
pub fn random_call_structure(rng: &mut ChaCha8Rng) -> (Vec<CongruenceClass>, CallVectors) {
    let n = rng.gen_range(1..=100);
    let mut funcs: Vec<usize> = (0..n).collect();
    funcs.shuffle(rng);
    let in_partition = if rng.gen_bool(0.3) { n - rng.gen_range(0..=n / 4) } else { n };
    let nclasses = rng.gen_range(1..=in_partition.clamp(1, 6));
    let mut classes: Vec<CongruenceClass> =
        (0..nclasses).map(|id| CongruenceClass { id, members: Vec::new() }).collect();
    for &f in &funcs[..in_partition] {
        classes[rng.gen_range(0..nclasses)].members.push(f);
    }
    classes.retain(|c| !c.members.is_empty());
    for (id, c) in classes.iter_mut().enumerate() {
        c.id = id;
        c.members.sort_unstable();
    }
    let arity = rng.gen_range(0..=3);
    let mut calls = CallVectors::new();
    for f in 0..n {
        let len = if rng.gen_bool(0.8) { arity } else { rng.gen_range(0..=3) };
        let v = (0..len)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    CallTarget::External(format!("ext{}", rng.gen_range(0..2)))
                } else {
                    CallTarget::Function(rng.gen_range(0..n))
                }
            })
            .collect();
        calls.insert(f, v);
    }
    (classes, calls)
}

/// Distinct random identifiers of `len` characters drawn from `[a-z0-9_]`.
pub fn random_symbols(rng: &mut ChaCha8Rng, count: usize, len: usize) -> Vec<String> {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789_";
    let mut seen = BTreeSet::new();
    while seen.len() < count {
        let s: String = (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())] as char).collect();
        seen.insert(s);
    }
    let mut out: Vec<String> = seen.into_iter().collect();
    out.shuffle(rng);
    out
}
