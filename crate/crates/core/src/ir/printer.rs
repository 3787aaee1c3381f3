//! Canonical text form of a module. `parse_module(&print_module(m)) == m`
//! for every module whose edges agree with its terminators.

use std::fmt::Write;

use super::types::*;

pub fn print_module(m: &MiniModule) -> String {
    let mut out = String::new();
    for (name, info) in &m.declarations {
        let _ = writeln!(out, "decl {} {}: {}", info.class.keyword(), name, info.ty);
    }
    for (i, f) in m.functions.iter().enumerate() {
        if i > 0 || !m.declarations.is_empty() {
            out.push('\n');
        }
        print_function(&mut out, f);
    }
    out
}

pub fn print_function(out: &mut String, f: &MiniFunction) {
    let params: Vec<String> = f.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
    let _ = write!(out, "func {}({}) -> {}", f.name, params.join(", "), f.result_type);
    if !f.attributes.is_empty() {
        let attrs: Vec<&str> = f.attributes.iter().map(|a| a.keyword()).collect();
        let _ = write!(out, " attrs [{}]", attrs.join(", "));
    }
    let flags = f.flags.names();
    if !flags.is_empty() {
        let _ = write!(out, " flags [{}]", flags.join(", "));
    }
    if let Some(eh) = &f.eh_regions {
        out.push_str(" eh ");
        print_eh(out, &eh.roots);
    }
    if let Some(target) = &f.alias_of {
        let _ = writeln!(out, " alias {target}");
        return;
    }
    if f.flags.external && f.blocks.is_empty() {
        out.push('\n');
        return;
    }
    out.push_str(" {\n");
    for (i, b) in f.blocks.iter().enumerate() {
        let next = f.blocks.get(i + 1).map(|n| n.label.as_str());
        print_block(out, b, next);
    }
    out.push_str("}\n");
}

fn print_eh(out: &mut String, regions: &[EhRegion]) {
    out.push('(');
    for (i, r) in regions.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{} {}", r.kind.keyword(), r.id);
        if !r.children.is_empty() {
            out.push(' ');
            print_eh(out, &r.children);
        }
    }
    out.push(')');
}

fn print_block(out: &mut String, b: &BasicBlock, next: Option<&str>) {
    let _ = writeln!(out, "{}:", b.label);
    for p in &b.phis {
        let args: Vec<String> = p.args.iter().map(|(l, op)| format!("{l}: {}", operand(op))).collect();
        let _ = writeln!(out, "  %{} = phi [{}]", p.result.index, args.join(", "));
    }
    for s in &b.statements {
        let _ = writeln!(out, "  {}", statement(s));
    }
    let implied = b.implied_edges(next);
    let explicit = if b.out_edges.starts_with(&implied) { &b.out_edges[implied.len()..] } else { &b.out_edges[..] };
    for e in explicit {
        let names: Vec<&str> = EdgeFlags::NAMES.iter().filter(|(f, _)| e.flags.contains(*f)).map(|(_, n)| *n).collect();
        let _ = writeln!(out, "  edge {} [{}]", e.dest, names.join(", "));
    }
}

pub fn ssa(s: &SsaName) -> String {
    match &s.default_def {
        Some(d) => format!("%{}(D {d})", s.index),
        None => format!("%{}", s.index),
    }
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

pub fn operand(op: &Operand) -> String {
    match op {
        Operand::Ssa(s) => ssa(s),
        Operand::Decl(d) => d.to_string(),
        Operand::Int { ty, value } => format!("const.{ty} {value}"),
        Operand::Const { ty, payload } => format!("const.{ty} {}", quote(payload)),
        Operand::Component { kind, base, selector } => {
            let sel = match selector {
                Selector::Offset(o) => o.to_string(),
                Selector::Operand(o) => operand(o),
            };
            format!("{}({}, {sel})", kind.keyword(), operand(base))
        }
    }
}

fn operand_list(ops: &[Operand]) -> String {
    ops.iter().map(operand).collect::<Vec<_>>().join(", ")
}

pub fn statement(s: &Statement) -> String {
    match s {
        Statement::Assign { dest, opcode, operands } => {
            format!("{} = {opcode} {}", operand(dest), operand_list(operands))
        }
        Statement::Call { result, callee, args } => {
            let call = format!("call {callee}({})", operand_list(args));
            match result {
                Some(r) => format!("{} = {call}", ssa(r)),
                None => call,
            }
        }
        Statement::Cond { opcode, lhs, rhs, then_label, else_label } => {
            format!("if {opcode} {}, {} then {then_label} else {else_label}", operand(lhs), operand(rhs))
        }
        Statement::Switch { index, cases, default } => {
            let cs: Vec<String> = cases
                .iter()
                .map(|c| match c.high {
                    Some(h) => format!("{}..{h} -> {}", c.low, c.target),
                    None => format!("{} -> {}", c.low, c.target),
                })
                .collect();
            format!("switch {} [{}] default {default}", ssa(index), cs.join(", "))
        }
        Statement::Return(None) => "ret".to_string(),
        Statement::Return(Some(op)) => format!("ret {}", operand(op)),
        Statement::Label(d) => format!("label {d}"),
        Statement::Goto(GotoTarget::Computed(s)) => format!("goto {}", ssa(s)),
        Statement::Goto(GotoTarget::Block(l)) => format!("br {l}"),
        Statement::Resx(r) => format!("resx {r}"),
        Statement::EhDispatch(r) => format!("eh_dispatch {r}"),
        Statement::Debug(ops) if ops.is_empty() => "debug".to_string(),
        Statement::Debug(ops) => format!("debug {}", operand_list(ops)),
        Statement::Asm(text) => format!("asm {}", quote(text)),
    }
}
