// SPDX-License-Identifier: Apache-2.0

//! Lexer and recursive-descent parser for the module language.
//!
//! ```text
//! module calc;
//! quota { cam_entries = 4; }
//! field op: u16 @ 46;
//! register hits[4];
//! table t {
//!     key op;
//!     when a > 5;
//!     entry (1) { r = a + b; port src_port; }
//! }
//! ```
//!
//! Name resolution and arity are checked here too, so every program that
//! parses is well formed; policy checks happen later.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use super::ast::*;
use super::{CompileError, ResourceQuota};
use crate::config::CmpOp;
use crate::phv::ContainerKind;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Punct(&'static str),
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

const PUNCT: [&str; 20] =
    ["==", "!=", ">=", "<=", ";", ":", "@", "{", "}", "(", ")", "[", "]", ",", "=", "+", "-", ">", "<", "!"];

fn err(pos: Pos, msg: impl Into<String>) -> CompileError {
    CompileError::Syntax { line: pos.line, col: pos.col, msg: msg.into() }
}

fn parse_int(text: &str, pos: Pos) -> Result<u64, CompileError> {
    let t = text.replace('_', "");
    let r = if let Some(h) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        u64::from_str_radix(h, 16)
    } else if let Some(b) = t.strip_prefix("0b").or_else(|| t.strip_prefix("0B")) {
        u64::from_str_radix(b, 2)
    } else if t.contains('.') {
        return t
            .parse::<Ipv4Addr>()
            .map(|ip| u32::from(ip) as u64)
            .map_err(|_| err(pos, format!("bad address `{text}`")));
    } else {
        t.parse::<u64>()
    };
    r.map_err(|_| err(pos, format!("bad number `{text}`")))
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, CompileError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            out.push((Tok::Ident(s), pos));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            out.push((Tok::Int(parse_int(&s, pos)?), pos));
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let p = PUNCT
            .iter()
            .find(|p| p.len() == 2 && **p == two)
            .or_else(|| PUNCT.iter().find(|p| p.len() == 1 && p.starts_with(c)));
        match p {
            Some(p) => {
                i += p.len();
                col += p.len() as u32;
                out.push((Tok::Punct(p), pos));
            }
            None => return Err(err(pos, format!("unexpected character `{c}`"))),
        }
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn expect(&mut self, p: &str) -> Result<Pos, CompileError> {
        let (t, pos) = self.next();
        match t {
            Tok::Punct(q) if q == p => Ok(pos),
            other => Err(err(pos, format!("expected `{p}`, found {other}"))),
        }
    }

    fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), CompileError> {
        match self.next() {
            (Tok::Ident(s), pos) => Ok((s, pos)),
            (other, pos) => Err(err(pos, format!("expected identifier, found {other}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<Pos, CompileError> {
        match self.next() {
            (Tok::Ident(s), pos) if s == kw => Ok(pos),
            (other, pos) => Err(err(pos, format!("expected `{kw}`, found {other}"))),
        }
    }

    fn int(&mut self) -> Result<(u64, Pos), CompileError> {
        match self.next() {
            (Tok::Int(v), pos) => Ok((v, pos)),
            (other, pos) => Err(err(pos, format!("expected number, found {other}"))),
        }
    }

    fn value(&mut self) -> Result<Value, CompileError> {
        match self.next() {
            (Tok::Int(v), _) => Ok(Value::Imm(v)),
            (Tok::Ident(s), _) => Ok(Value::Name(s)),
            (other, pos) => Err(err(pos, format!("expected operand, found {other}"))),
        }
    }

    fn indexed(&mut self) -> Result<(String, u16, Pos), CompileError> {
        let (name, pos) = self.ident()?;
        self.expect("[")?;
        let (idx, ipos) = self.int()?;
        self.expect("]")?;
        let idx = u16::try_from(idx).map_err(|_| err(ipos, "index too large"))?;
        Ok((name, idx, pos))
    }

    fn program(&mut self) -> Result<ModuleProgram, CompileError> {
        self.keyword("module")?;
        let (name, _) = self.ident()?;
        self.expect(";")?;
        let mut prog = ModuleProgram { name, fields: vec![], registers: vec![], tables: vec![], quota: None };
        loop {
            let (t, pos) = self.next();
            match t {
                Tok::Eof => break,
                Tok::Ident(kw) if kw == "field" => prog.fields.push(self.field(pos)?),
                Tok::Ident(kw) if kw == "register" => {
                    let (name, idx, _) = self.indexed()?;
                    self.expect(";")?;
                    prog.registers.push(RegisterDecl { name, size: idx, pos });
                }
                Tok::Ident(kw) if kw == "table" => prog.tables.push(self.table(pos)?),
                Tok::Ident(kw) if kw == "quota" => {
                    if prog.quota.is_some() {
                        return Err(err(pos, "duplicate quota block"));
                    }
                    prog.quota = Some(self.quota()?);
                }
                other => {
                    return Err(err(pos, format!("expected `field`, `register`, `table` or `quota`, found {other}")))
                }
            }
        }
        Ok(prog)
    }

    fn field(&mut self, pos: Pos) -> Result<FieldDecl, CompileError> {
        let (name, _) = self.ident()?;
        self.expect(":")?;
        let (ty, tpos) = self.ident()?;
        let width = match ty.as_str() {
            "u16" => 16,
            "u32" => 32,
            "u48" => 48,
            _ => return Err(err(tpos, format!("field type must be u16, u32 or u48, found `{ty}`"))),
        };
        self.expect("@")?;
        let (offset, opos) = self.int()?;
        self.expect(";")?;
        let f = FieldDecl { name, width, offset: offset as usize, pos };
        // Parse actions address bytes 0..127 and never reach past the header region.
        if offset > 127 {
            return Err(err(opos, format!("field offset {offset} outside the 128-byte header region")));
        }
        Ok(f)
    }

    fn quota(&mut self) -> Result<ResourceQuota, CompileError> {
        self.expect("{")?;
        let mut q = ResourceQuota::default();
        while !self.eat("}") {
            let (k, kpos) = self.ident()?;
            self.expect("=")?;
            let (v, vpos) = self.int()?;
            self.expect(";")?;
            let narrow = |v: u64| u8::try_from(v).map_err(|_| err(vpos, "quota value too large"));
            match k.as_str() {
                "parser_actions" => q.parser_actions = narrow(v)?,
                "cam_entries" => q.cam_entries = narrow(v)?,
                "stateful_words" => {
                    q.stateful_words = u16::try_from(v).map_err(|_| err(vpos, "quota value too large"))?
                }
                "containers_2b" => q.containers_2b = narrow(v)?,
                "containers_4b" => q.containers_4b = narrow(v)?,
                "containers_6b" => q.containers_6b = narrow(v)?,
                _ => return Err(err(kpos, format!("unknown quota `{k}`"))),
            }
        }
        Ok(q)
    }

    fn table(&mut self, pos: Pos) -> Result<TableDecl, CompileError> {
        let (name, _) = self.ident()?;
        self.expect("{")?;
        let mut t = TableDecl { name, keys: vec![], predicate: None, entries: vec![], pos };
        while !self.eat("}") {
            let (kw, kpos) = self.ident()?;
            match kw.as_str() {
                "key" => {
                    if !t.keys.is_empty() {
                        return Err(err(kpos, "duplicate key clause"));
                    }
                    loop {
                        t.keys.push(self.ident()?.0);
                        if !self.eat(",") {
                            break;
                        }
                    }
                    self.expect(";")?;
                }
                "when" => {
                    if t.predicate.is_some() {
                        return Err(err(kpos, "duplicate when clause"));
                    }
                    let lhs = self.value()?;
                    let (op, opos) = self.next();
                    let op = match op {
                        Tok::Punct("==") => CmpOp::Eq,
                        Tok::Punct("!=") => CmpOp::Ne,
                        Tok::Punct(">") => CmpOp::Gt,
                        Tok::Punct(">=") => CmpOp::Ge,
                        Tok::Punct("<") => CmpOp::Lt,
                        Tok::Punct("<=") => CmpOp::Le,
                        other => return Err(err(opos, format!("expected comparison, found {other}"))),
                    };
                    let rhs = self.value()?;
                    self.expect(";")?;
                    t.predicate = Some(Predicate { lhs, op, rhs });
                }
                "entry" => {
                    self.expect("(")?;
                    let mut key = vec![];
                    if !self.eat(")") {
                        loop {
                            key.push(self.int()?.0);
                            if !self.eat(",") {
                                break;
                            }
                        }
                        self.expect(")")?;
                    }
                    self.expect("{")?;
                    let mut actions = vec![];
                    while !self.eat("}") {
                        actions.push(self.action()?);
                    }
                    t.entries.push(EntryDecl { key, actions, pos: kpos });
                }
                _ => return Err(err(kpos, format!("expected `key`, `when` or `entry`, found `{kw}`"))),
            }
        }
        Ok(t)
    }

    fn action(&mut self) -> Result<ActionDecl, CompileError> {
        let (word, pos) = self.ident()?;
        let action = match word.as_str() {
            "discard" => Action::Discard,
            "recirculate" => Action::Recirculate,
            "port" => Action::Port(self.value()?),
            "ports" => Action::Ports(self.int()?.0),
            "store" => {
                let (register, index, _) = self.indexed()?;
                self.expect("=")?;
                let (src, _) = self.ident()?;
                Action::Store { register, index, src }
            }
            _ => {
                self.expect("=")?;
                Action::Assign { dst: word, expr: self.expr()? }
            }
        };
        self.expect(";")?;
        Ok(ActionDecl { action, pos })
    }

    fn expr(&mut self) -> Result<Expr, CompileError> {
        if let Tok::Ident(kw) = self.peek().clone() {
            if kw == "load" || kw == "loadd" {
                self.next();
                let (register, index, _) = self.indexed()?;
                return Ok(if kw == "load" {
                    Expr::Load { register, index }
                } else {
                    Expr::LoadInc { register, index }
                });
            }
        }
        let a = self.value()?;
        if self.eat("+") {
            return Ok(Expr::Add(a, self.value()?));
        }
        if self.eat("-") {
            return Ok(Expr::Sub(a, self.value()?));
        }
        Ok(Expr::Value(a))
    }
}

/// Resolves every name and checks arity. Errors point at the offending
/// construct.
fn validate(p: &ModuleProgram) -> Result<(), CompileError> {
    let mut names = BTreeSet::new();
    for f in &p.fields {
        if builtin::is_builtin(&f.name) || !names.insert(f.name.as_str()) {
            return Err(err(f.pos, format!("duplicate or reserved name `{}`", f.name)));
        }
    }
    for r in &p.registers {
        if builtin::is_builtin(&r.name) || !names.insert(r.name.as_str()) {
            return Err(err(r.pos, format!("duplicate or reserved name `{}`", r.name)));
        }
        if r.size == 0 {
            return Err(err(r.pos, "register array must have at least one word"));
        }
    }
    let mut tables = BTreeSet::new();
    let readable = |n: &str| p.field(n).is_some() || builtin::READABLE.contains(&n);
    let check_value = |v: &Value, pos: Pos| match v {
        Value::Name(n) if !readable(n) => Err(err(pos, format!("unknown name `{n}`"))),
        _ => Ok(()),
    };
    for t in &p.tables {
        if !tables.insert(t.name.as_str()) || names.contains(t.name.as_str()) {
            return Err(err(t.pos, format!("duplicate name `{}`", t.name)));
        }
        let mut kinds = [0usize; 3];
        for k in &t.keys {
            let f = p.field(k).ok_or_else(|| err(t.pos, format!("key `{k}` is not a declared field")))?;
            let n = &mut kinds[f.kind().code() as usize];
            *n += 1;
            if *n > 2 {
                return Err(err(t.pos, format!("at most two {}-byte key fields per table", f.bytes())));
            }
        }
        if t.keys.iter().collect::<BTreeSet<_>>().len() != t.keys.len() {
            return Err(err(t.pos, "repeated key field"));
        }
        if let Some(pr) = &t.predicate {
            check_value(&pr.lhs, t.pos)?;
            check_value(&pr.rhs, t.pos)?;
            for v in [&pr.lhs, &pr.rhs] {
                if let Value::Name(n) = v {
                    if builtin::READABLE.contains(&n.as_str()) {
                        return Err(err(t.pos, format!("predicate operand `{n}` must be a field or immediate")));
                    }
                }
            }
        }
        let mut seen = BTreeSet::new();
        for e in &t.entries {
            if e.key.len() != t.keys.len() {
                return Err(err(
                    e.pos,
                    format!("entry has {} key values, table has {} keys", e.key.len(), t.keys.len()),
                ));
            }
            for (v, k) in e.key.iter().zip(&t.keys) {
                if *v & !p.field(k).unwrap().mask() != 0 {
                    return Err(err(e.pos, format!("key value {v} does not fit field `{k}`")));
                }
            }
            if !seen.insert(e.key.clone()) {
                return Err(err(e.pos, "duplicate entry key"));
            }
            for a in &e.actions {
                validate_action(p, a, &check_value)?;
            }
        }
    }
    Ok(())
}

fn validate_action(
    p: &ModuleProgram,
    a: &ActionDecl,
    check_value: &dyn Fn(&Value, Pos) -> Result<(), CompileError>,
) -> Result<(), CompileError> {
    let pos = a.pos;
    let reg = |r: &str| p.register(r).map(|_| ()).ok_or_else(|| err(pos, format!("unknown register `{r}`")));
    match &a.action {
        Action::Assign { dst, expr } => {
            // Writes to builtins are policy violations reported by the static check.
            if p.field(dst).is_none() && !builtin::is_builtin(dst) {
                return Err(err(pos, format!("unknown field `{dst}`")));
            }
            match expr {
                Expr::Value(v) => check_value(v, pos)?,
                Expr::Add(x, y) => {
                    check_value(x, pos)?;
                    check_value(y, pos)?;
                    if x.name().is_none() && y.name().is_none() {
                        return Err(err(pos, "an addition needs at least one named operand"));
                    }
                }
                Expr::Sub(x, y) => {
                    check_value(x, pos)?;
                    check_value(y, pos)?;
                    if x.name().is_none() {
                        return Err(err(pos, "the left side of a subtraction must be named"));
                    }
                }
                Expr::Load { register, .. } | Expr::LoadInc { register, .. } => reg(register)?,
            }
        }
        Action::Store { register, src, .. } => {
            reg(register)?;
            if p.field(src).is_none() {
                return Err(err(pos, format!("store source `{src}` must be a field")));
            }
        }
        Action::Port(v) => check_value(v, pos)?,
        Action::Ports(_) | Action::Discard | Action::Recirculate => {}
    }
    Ok(())
}

/// Parses and resolves a module program.
pub fn parse_dsl(source: &str) -> Result<ModuleProgram, CompileError> {
    let mut p = Parser { toks: lex(source)?, i: 0 };
    let prog = p.program()?;
    validate(&prog)?;
    for f in &prog.fields {
        debug_assert!(ContainerKind::from_bits(f.width).is_some());
    }
    Ok(prog)
}
