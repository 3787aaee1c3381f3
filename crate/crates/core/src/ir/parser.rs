//! Text parser for the mini-IR.

use thiserror::Error;

use super::types::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i128),
    Ssa(u32),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Lt,
    Gt,
    Comma,
    Colon,
    Eq,
    Arrow,
    DotDot,
    Dot,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("integer {v}"),
            Tok::Ssa(i) => format!("`%{i}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.punct()),
        }
    }

    fn punct(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Eq => "=",
            Tok::Arrow => "->",
            Tok::DotDot => "..",
            Tok::Dot => ".",
            _ => "?",
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, message: String| SyntaxError { line, col, message };

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                advance(1, &mut i, &mut col);
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            _ => {}
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '=' => Tok::Eq,
            '.' => {
                if chars.get(i + 1) == Some(&'.') {
                    advance(2, &mut i, &mut col);
                    out.push(Spanned { tok: Tok::DotDot, line: tl, col: tc });
                    continue;
                }
                Tok::Dot
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                advance(2, &mut i, &mut col);
                out.push(Spanned { tok: Tok::Arrow, line: tl, col: tc });
                continue;
            }
            '-' | '0'..='9' => {
                let start = i;
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let s: String = chars[start..j].iter().collect();
                if s == "-" {
                    return Err(err(tl, tc, "expected digits after `-`".into()));
                }
                let v: i128 = s.parse().map_err(|_| err(tl, tc, format!("integer literal `{s}` out of range")))?;
                advance(j - i, &mut i, &mut col);
                out.push(Spanned { tok: Tok::Int(v), line: tl, col: tc });
                continue;
            }
            '%' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j == i + 1 {
                    return Err(err(tl, tc, "expected SSA index after `%`".into()));
                }
                let s: String = chars[i + 1..j].iter().collect();
                let v: u32 = s.parse().map_err(|_| err(tl, tc, format!("SSA index `{s}` out of range")))?;
                advance(j - i, &mut i, &mut col);
                out.push(Spanned { tok: Tok::Ssa(v), line: tl, col: tc });
                continue;
            }
            '"' => {
                let mut j = i + 1;
                let mut s = String::new();
                loop {
                    match chars.get(j) {
                        None | Some('\n') => return Err(err(tl, tc, "unterminated string literal".into())),
                        Some('"') => break,
                        Some('\\') => {
                            match chars.get(j + 1) {
                                Some('n') => s.push('\n'),
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                _ => return Err(err(line, col + (j - i), "bad escape in string".into())),
                            }
                            j += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                advance(j + 1 - i, &mut i, &mut col);
                out.push(Spanned { tok: Tok::Str(s), line: tl, col: tc });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_' || chars[j] == '$') {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                advance(j - i, &mut i, &mut col);
                out.push(Spanned { tok: Tok::Ident(s), line: tl, col: tc });
                continue;
            }
            other => return Err(err(tl, tc, format!("unexpected character `{other}`"))),
        };
        advance(1, &mut i, &mut col);
        out.push(Spanned { tok, line: tl, col: tc });
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

const STATEMENT_KEYWORDS: [&str; 12] =
    ["call", "if", "switch", "ret", "goto", "br", "label", "resx", "debug", "asm", "eh_dispatch", "edge"];

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let s = &self.toks[self.pos];
        Err(SyntaxError { line: s.line, col: s.col, message: message.into() })
    }

    fn expect(&mut self, want: Tok) -> PResult<()> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            self.error(format!("expected {}, found {}", want.describe(), self.peek().describe()))
        }
    }

    fn is_ident(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_ident(&mut self, kw: &str) -> bool {
        if self.is_ident(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_ident(kw) {
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", self.peek().describe()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => self.error(format!("expected a name, found {}", other.describe())),
        }
    }

    fn int(&mut self) -> PResult<i128> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(v)
            }
            other => self.error(format!("expected an integer, found {}", other.describe())),
        }
    }

    fn u32_value(&mut self) -> PResult<u32> {
        let v = self.int()?;
        u32::try_from(v).or_else(|_| self.error(format!("value {v} out of range")))
    }

    fn module(&mut self) -> PResult<MiniModule> {
        let mut m = MiniModule::default();
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Ident(s) if s == "func" => {
                    let idx = m.functions.len();
                    let f = self.function(idx)?;
                    m.functions.push(f);
                }
                Tok::Ident(s) if s == "decl" => {
                    self.next();
                    let class_name = self.ident()?;
                    let class = match DeclClass::from_keyword(&class_name) {
                        Some(c @ (DeclClass::Var | DeclClass::Func)) => c,
                        _ => return self.error(format!("`decl {class_name}` is not a module-level declaration")),
                    };
                    let name = self.ident()?;
                    self.expect(Tok::Colon)?;
                    let ty = self.ty()?;
                    if m.declarations.insert(name.clone(), DeclInfo { class, ty }).is_some() {
                        return self.error(format!("duplicate declaration `{name}`"));
                    }
                }
                other => {
                    let d = other.describe();
                    return self.error(format!("expected `func` or `decl`, found {d}"));
                }
            }
        }
        Ok(m)
    }

    fn ty(&mut self) -> PResult<TypeTag> {
        let name = self.ident()?;
        Ok(match name.as_str() {
            "void" => TypeTag::Void,
            "i8" => TypeTag::I8,
            "i16" => TypeTag::I16,
            "i32" => TypeTag::I32,
            "i64" => TypeTag::I64,
            "f32" => TypeTag::F32,
            "f64" => TypeTag::F64,
            "ptr" => {
                self.expect(Tok::Lt)?;
                let inner = self.ty()?;
                self.expect(Tok::Gt)?;
                TypeTag::ptr(inner)
            }
            "record" => {
                self.expect(Tok::Lt)?;
                let n = self.ident()?;
                self.expect(Tok::Gt)?;
                TypeTag::Record(n)
            }
            other => return self.error(format!("unknown type `{other}`")),
        })
    }

    fn name_list(&mut self) -> PResult<Vec<String>> {
        self.expect(Tok::LBracket)?;
        let mut v = Vec::new();
        if *self.peek() != Tok::RBracket {
            v.push(self.ident()?);
            while *self.peek() == Tok::Comma {
                self.next();
                v.push(self.ident()?);
            }
        }
        self.expect(Tok::RBracket)?;
        Ok(v)
    }

    fn function(&mut self, index: usize) -> PResult<MiniFunction> {
        self.expect_keyword("func")?;
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let pname = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                params.push(Param { name: pname, ty });
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Arrow)?;
        let result_type = self.ty()?;
        let mut f = MiniFunction::new(name, index, result_type);
        f.params = params;

        if self.eat_ident("attrs") {
            for a in self.name_list()? {
                match Attribute::from_keyword(&a) {
                    Some(attr) => {
                        f.attributes.insert(attr);
                    }
                    None => return self.error(format!("unknown attribute `{a}`")),
                }
            }
        }
        if self.eat_ident("flags") {
            for fl in self.name_list()? {
                if !f.flags.set(&fl) {
                    return self.error(format!("unknown flag `{fl}`"));
                }
            }
        }
        if self.eat_ident("eh") {
            f.eh_regions = Some(EhRegionTree { roots: self.eh_list()? });
        }
        if self.eat_ident("alias") {
            f.alias_of = Some(self.ident()?);
            return Ok(f);
        }
        if *self.peek() != Tok::LBrace {
            if f.flags.external {
                return Ok(f);
            }
            return self.error(format!("expected `{{`, found {}", self.peek().describe()));
        }
        self.next();
        while *self.peek() != Tok::RBrace {
            f.blocks.push(self.block()?);
        }
        self.expect(Tok::RBrace)?;

        // Implied edges depend on block order, so they are attached once the
        // whole body is known. Explicit `edge` lines were stashed in
        // out_edges and follow the implied ones.
        let labels: Vec<String> = f.blocks.iter().map(|b| b.label.clone()).collect();
        for (i, b) in f.blocks.iter_mut().enumerate() {
            let mut edges = b.implied_edges(labels.get(i + 1).map(String::as_str));
            edges.append(&mut b.out_edges);
            b.out_edges = edges;
        }
        Ok(f)
    }

    fn eh_list(&mut self) -> PResult<Vec<EhRegion>> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RParen {
            let kw = self.ident()?;
            let kind = match EhKind::from_keyword(&kw) {
                Some(k) => k,
                None => return self.error(format!("unknown EH region kind `{kw}`")),
            };
            let id = self.u32_value()?;
            let children = if *self.peek() == Tok::LParen { self.eh_list()? } else { Vec::new() };
            out.push(EhRegion { id, kind, children });
        }
        self.expect(Tok::RParen)?;
        Ok(out)
    }

    fn at_block_label(&self) -> bool {
        matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Colon
    }

    fn block(&mut self) -> PResult<BasicBlock> {
        if !self.at_block_label() {
            return self.error(format!("expected a block label, found {}", self.peek().describe()));
        }
        let label = self.ident()?;
        self.expect(Tok::Colon)?;
        let mut bb = BasicBlock::new(label);
        while matches!(self.peek(), Tok::Ssa(_)) && self.is_phi() {
            bb.phis.push(self.phi()?);
        }
        loop {
            if self.at_block_label() || matches!(self.peek(), Tok::RBrace | Tok::Eof) {
                break;
            }
            if self.eat_ident("edge") {
                let dest = self.ident()?;
                let mut flags = EdgeFlags::empty();
                for n in self.name_list()? {
                    match EdgeFlags::from_keyword(&n) {
                        Some(fl) => flags |= fl,
                        None => return self.error(format!("unknown edge flag `{n}`")),
                    }
                }
                bb.out_edges.push(Edge { dest, flags });
                continue;
            }
            if !bb.out_edges.is_empty() {
                return self.error("statements may not follow `edge` lines");
            }
            bb.statements.push(self.statement()?);
        }
        Ok(bb)
    }

    fn is_phi(&self) -> bool {
        *self.peek_at(1) == Tok::Eq && matches!(self.peek_at(2), Tok::Ident(s) if s == "phi")
    }

    fn phi(&mut self) -> PResult<PhiNode> {
        let result = self.plain_ssa()?;
        self.expect(Tok::Eq)?;
        self.expect_keyword("phi")?;
        self.expect(Tok::LBracket)?;
        let mut args = Vec::new();
        loop {
            let l = self.ident()?;
            self.expect(Tok::Colon)?;
            let op = self.operand()?;
            args.push((l, op));
            if *self.peek() == Tok::Comma {
                self.next();
            } else {
                break;
            }
        }
        self.expect(Tok::RBracket)?;
        Ok(PhiNode { result, args })
    }

    fn plain_ssa(&mut self) -> PResult<SsaName> {
        match self.peek().clone() {
            Tok::Ssa(i) => {
                self.next();
                if *self.peek() == Tok::LParen {
                    return self.error("a default definition cannot be assigned");
                }
                Ok(SsaName::new(i))
            }
            other => self.error(format!("expected an SSA name, found {}", other.describe())),
        }
    }

    fn ssa_use(&mut self) -> PResult<SsaName> {
        match self.peek().clone() {
            Tok::Ssa(i) => {
                self.next();
                if *self.peek() == Tok::LParen && matches!(self.peek_at(1), Tok::Ident(s) if s == "D") {
                    self.next();
                    self.next();
                    let decl = self.decl_ref()?;
                    self.expect(Tok::RParen)?;
                    return Ok(SsaName::default_def(i, decl));
                }
                Ok(SsaName::new(i))
            }
            other => self.error(format!("expected an SSA name, found {}", other.describe())),
        }
    }

    fn decl_ref(&mut self) -> PResult<DeclRef> {
        self.expect_keyword("decl")?;
        self.expect(Tok::Dot)?;
        let cls = self.ident()?;
        let class = match DeclClass::from_keyword(&cls) {
            Some(c) => c,
            None => return self.error(format!("unknown declaration class `{cls}`")),
        };
        let name = self.ident()?;
        Ok(DeclRef { class, name })
    }

    fn at_operand(&self) -> bool {
        match self.peek() {
            Tok::Ssa(_) => true,
            Tok::Ident(s) if s == "decl" || s == "const" => *self.peek_at(1) == Tok::Dot,
            Tok::Ident(s) => ComponentKind::from_keyword(s).is_some() && *self.peek_at(1) == Tok::LParen,
            _ => false,
        }
    }

    fn operand(&mut self) -> PResult<Operand> {
        match self.peek().clone() {
            Tok::Ssa(_) => Ok(Operand::Ssa(self.ssa_use()?)),
            Tok::Ident(s) if s == "decl" => Ok(Operand::Decl(self.decl_ref()?)),
            Tok::Ident(s) if s == "const" => {
                self.next();
                self.expect(Tok::Dot)?;
                let ty = self.ty()?;
                match self.next() {
                    Tok::Int(value) => Ok(Operand::Int { ty, value }),
                    Tok::Str(payload) => Ok(Operand::Const { ty, payload }),
                    other => {
                        self.pos -= 1;
                        self.error(format!("expected a constant value, found {}", other.describe()))
                    }
                }
            }
            Tok::Ident(s) if ComponentKind::from_keyword(&s).is_some() => {
                let kind = ComponentKind::from_keyword(&s).unwrap();
                self.next();
                self.expect(Tok::LParen)?;
                let base = self.operand()?;
                self.expect(Tok::Comma)?;
                let selector = if let Tok::Int(v) = self.peek().clone() {
                    self.next();
                    let off = i64::try_from(v).or_else(|_| self.error(format!("offset {v} out of range")))?;
                    Selector::Offset(off)
                } else {
                    Selector::Operand(Box::new(self.operand()?))
                };
                self.expect(Tok::RParen)?;
                Ok(Operand::Component { kind, base: Box::new(base), selector })
            }
            other => self.error(format!("expected an operand, found {}", other.describe())),
        }
    }

    fn operand_list(&mut self) -> PResult<Vec<Operand>> {
        let mut v = vec![self.operand()?];
        while *self.peek() == Tok::Comma {
            self.next();
            v.push(self.operand()?);
        }
        Ok(v)
    }

    fn statement(&mut self) -> PResult<Statement> {
        if let Tok::Ident(kw) = self.peek().clone() {
            if STATEMENT_KEYWORDS.contains(&kw.as_str()) {
                self.next();
                return self.keyword_statement(&kw, None);
            }
        }
        // `dest = ...`
        let dest = if matches!(self.peek(), Tok::Ssa(_)) {
            Operand::Ssa(self.plain_ssa()?)
        } else if self.at_operand() {
            self.operand()?
        } else {
            return self.error(format!("expected a statement, found {}", self.peek().describe()));
        };
        self.expect(Tok::Eq)?;
        if self.eat_ident("call") {
            let result = match dest {
                Operand::Ssa(s) => s,
                _ => return self.error("a call result must be an SSA name"),
            };
            return self.keyword_statement("call", Some(result));
        }
        let opcode = self.ident()?;
        if opcode == "phi" {
            return self.error("PHI nodes must precede the statements of a block");
        }
        let operands = self.operand_list()?;
        Ok(Statement::Assign { dest, opcode, operands })
    }

    fn keyword_statement(&mut self, kw: &str, result: Option<SsaName>) -> PResult<Statement> {
        Ok(match kw {
            "call" => {
                let callee = self.ident()?;
                self.expect(Tok::LParen)?;
                let args = if *self.peek() == Tok::RParen { Vec::new() } else { self.operand_list()? };
                self.expect(Tok::RParen)?;
                Statement::Call { result, callee, args }
            }
            "if" => {
                let opcode = self.ident()?;
                let lhs = self.operand()?;
                self.expect(Tok::Comma)?;
                let rhs = self.operand()?;
                self.expect_keyword("then")?;
                let then_label = self.ident()?;
                self.expect_keyword("else")?;
                let else_label = self.ident()?;
                Statement::Cond { opcode, lhs, rhs, then_label, else_label }
            }
            "switch" => {
                let index = self.ssa_use()?;
                self.expect(Tok::LBracket)?;
                let mut cases = Vec::new();
                while *self.peek() != Tok::RBracket {
                    if !cases.is_empty() {
                        self.expect(Tok::Comma)?;
                    }
                    let low = self.int()?;
                    let high = if *self.peek() == Tok::DotDot {
                        self.next();
                        Some(self.int()?)
                    } else {
                        None
                    };
                    self.expect(Tok::Arrow)?;
                    let target = self.ident()?;
                    cases.push(SwitchCase { low, high, target });
                }
                self.expect(Tok::RBracket)?;
                self.expect_keyword("default")?;
                let default = self.ident()?;
                Statement::Switch { index, cases, default }
            }
            "ret" => {
                if self.at_operand() {
                    Statement::Return(Some(self.operand()?))
                } else {
                    Statement::Return(None)
                }
            }
            "goto" => Statement::Goto(GotoTarget::Computed(self.ssa_use()?)),
            "br" => Statement::Goto(GotoTarget::Block(self.ident()?)),
            "label" => {
                let d = self.decl_ref()?;
                if d.class != DeclClass::Label {
                    return self.error("`label` takes a `decl.label` operand");
                }
                Statement::Label(d)
            }
            "resx" => Statement::Resx(self.u32_value()?),
            "eh_dispatch" => Statement::EhDispatch(self.u32_value()?),
            "debug" => {
                let ops = if self.at_operand() { self.operand_list()? } else { Vec::new() };
                Statement::Debug(ops)
            }
            "asm" => match self.next() {
                Tok::Str(s) => Statement::Asm(s),
                other => {
                    self.pos -= 1;
                    return self.error(format!("expected asm text, found {}", other.describe()));
                }
            },
            _ => unreachable!("statement keyword table out of sync"),
        })
    }
}

/// Parse a whole module. Empty input yields an empty module.
pub fn parse_module(text: &str) -> Result<MiniModule, SyntaxError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    p.module()
}
