//! Lexer, recursive-descent parser, and kind checking for the mini
//! language. `//` comments run to end of line. Variable shadowing is
//! rejected so that escaped-local identity stays unambiguous.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use super::ast::*;
use super::cfg::{build_cfg, Cfg};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrontendError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: u32, col: u32, msg: String },
    #[error("type error at line {line}: {msg}")]
    Type { line: u32, msg: String },
}

#[derive(Clone, Debug)]
pub struct Program {
    pub globals: Vec<GlobalDecl>,
    pub procs: Vec<Procedure>,
    pub thread_entries: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Procedure {
    pub name: String,
    pub params: Vec<String>,
    pub cfg: Cfg,
    /// Locals whose address is taken somewhere in this procedure.
    pub escaped: BTreeSet<String>,
    /// All locals (parameters and declarations), for oracle bookkeeping.
    pub locals: BTreeSet<String>,
}

impl Program {
    pub fn proc(&self, name: &str) -> Option<&Procedure> {
        self.procs.iter().find(|p| p.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalDecl> {
        self.globals.iter().find(|g| g.name == name)
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

struct Lexer {
    toks: Vec<(Tok, u32, u32)>,
    pos: usize,
}

const SYMBOLS2: [&str; 7] = ["<=", ">=", "==", "!=", "++", "--", "//"];
const SYMBOLS1: [&str; 13] = ["<", ">", "=", "+", "-", "*", "&", "(", ")", "{", "}", ";", ","];

fn lex(source: &str) -> Result<Lexer, FrontendError> {
    let mut toks = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let bytes: Vec<char> = source.chars().collect();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i];
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        if c == '/' && bytes.get(i + 1) == Some(&'/') {
            while i < bytes.len() && bytes[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                i += 1;
            }
            let word: String = bytes[start..i].iter().collect();
            toks.push((Tok::Ident(word), line, col));
            col += (i - start) as u32;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = bytes[start..i].iter().collect();
            let n: i64 = text.parse().map_err(|_| FrontendError::Parse {
                line,
                col,
                msg: format!("integer literal `{text}` out of range"),
            })?;
            toks.push((Tok::Int(n), line, col));
            col += (i - start) as u32;
            continue;
        }
        let two: String = bytes[i..(i + 2).min(bytes.len())].iter().collect();
        if let Some(sym) = SYMBOLS2.iter().find(|s| **s == two) {
            toks.push((Tok::Sym(sym), line, col));
            i += 2;
            col += 2;
            continue;
        }
        let one: String = c.to_string();
        if let Some(sym) = SYMBOLS1.iter().find(|s| **s == one) {
            toks.push((Tok::Sym(sym), line, col));
            i += 1;
            col += 1;
            continue;
        }
        return Err(FrontendError::Parse { line, col, msg: format!("unexpected character `{c}`") });
    }
    toks.push((Tok::Eof, line, col));
    Ok(Lexer { toks, pos: 0 })
}

impl Lexer {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }


    fn here(&self) -> (u32, u32) {
        let (_, l, c) = &self.toks[self.pos];
        (*l, *c)
    }

    fn line(&self) -> u32 {
        self.here().0
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, FrontendError> {
        let (line, col) = self.here();
        Err(FrontendError::Parse { line, col, msg: msg.into() })
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), FrontendError> {
        match self.peek() {
            Tok::Sym(s) if *s == sym => {
                self.next();
                Ok(())
            }
            other => self.err(format!("expected `{sym}`, found {other:?}")),
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), FrontendError> {
        match self.peek() {
            Tok::Ident(w) if w == kw => {
                self.next();
                Ok(())
            }
            other => self.err(format!("expected `{kw}`, found {other:?}")),
        }
    }

    fn expect_ident(&mut self) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Ident(w) if !is_keyword(&w) => {
                self.next();
                Ok(w)
            }
            other => self.err(format!("expected identifier, found {other:?}")),
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == kw)
    }

    fn at_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }
}

fn is_keyword(w: &str) -> bool {
    matches!(w, "int" | "void" | "while" | "for" | "if" | "else" | "assert")
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

pub fn parse(source: &str) -> Result<Program, FrontendError> {
    let mut lx = lex(source)?;
    let mut globals: Vec<GlobalDecl> = Vec::new();
    let mut procs_src: Vec<ProcDecl> = Vec::new();
    loop {
        if matches!(lx.peek(), Tok::Eof) {
            break;
        }
        if lx.at_kw("int") {
            lx.next();
            if lx.at_sym("*") {
                lx.next();
                let name = lx.expect_ident()?;
                lx.expect_sym("=")?;
                lx.expect_sym("&")?;
                let target = lx.expect_ident()?;
                lx.expect_sym(";")?;
                globals.push(GlobalDecl { name, kind: GlobalKind::Ptr, init: GlobalInit::Addr(target) });
            } else {
                let name = lx.expect_ident()?;
                lx.expect_sym("=")?;
                let value = parse_int_lit(&mut lx)?;
                lx.expect_sym(";")?;
                globals.push(GlobalDecl { name, kind: GlobalKind::Int, init: GlobalInit::Int(value) });
            }
        } else if lx.at_kw("void") {
            lx.next();
            let line = lx.line();
            let name = lx.expect_ident()?;
            lx.expect_sym("(")?;
            let mut params = Vec::new();
            if !lx.at_sym(")") {
                loop {
                    lx.expect_kw("int")?;
                    params.push(lx.expect_ident()?);
                    if lx.at_sym(",") {
                        lx.next();
                    } else {
                        break;
                    }
                }
            }
            lx.expect_sym(")")?;
            let body = parse_block(&mut lx)?;
            procs_src.push(ProcDecl { name, params, body, line });
        } else {
            return lx.err("expected `int` global declaration or `void` procedure");
        }
    }
    check_and_build(globals, procs_src)
}

fn parse_int_lit(lx: &mut Lexer) -> Result<i64, FrontendError> {
    let neg = if lx.at_sym("-") {
        lx.next();
        true
    } else {
        false
    };
    match lx.next() {
        Tok::Int(n) => Ok(if neg { -n } else { n }),
        other => lx.err(format!("expected integer literal, found {other:?}")),
    }
}

fn parse_block(lx: &mut Lexer) -> Result<Vec<Stmt>, FrontendError> {
    lx.expect_sym("{")?;
    let mut stmts = Vec::new();
    while !lx.at_sym("}") {
        stmts.push(parse_stmt(lx)?);
    }
    lx.expect_sym("}")?;
    Ok(stmts)
}

fn parse_stmt(lx: &mut Lexer) -> Result<Stmt, FrontendError> {
    let line = lx.line();
    if lx.at_kw("while") {
        lx.next();
        lx.expect_sym("(")?;
        let cond = parse_cond(lx)?;
        lx.expect_sym(")")?;
        let body = parse_block(lx)?;
        return Ok(Stmt::While(cond, body, line));
    }
    if lx.at_kw("for") {
        lx.next();
        lx.expect_sym("(")?;
        let mut decls = Vec::new();
        if lx.at_kw("int") {
            lx.next();
        }
        loop {
            let name = lx.expect_ident()?;
            lx.expect_sym("=")?;
            let e = parse_expr(lx)?;
            decls.push((name, e));
            if lx.at_sym(",") {
                lx.next();
            } else {
                break;
            }
        }
        lx.expect_sym(";")?;
        let cond = parse_cond(lx)?;
        lx.expect_sym(";")?;
        let step_line = lx.line();
        let step_var = lx.expect_ident()?;
        let step: Stmt = if lx.at_sym("++") {
            lx.next();
            Stmt::Assign(
                step_var.clone(),
                Expr::Bin(Box::new(Expr::Var(step_var)), BinOp::Add, Box::new(Expr::Lit(1))),
                step_line,
            )
        } else if lx.at_sym("--") {
            lx.next();
            Stmt::Assign(
                step_var.clone(),
                Expr::Bin(Box::new(Expr::Var(step_var)), BinOp::Sub, Box::new(Expr::Lit(1))),
                step_line,
            )
        } else {
            lx.expect_sym("=")?;
            let e = parse_expr(lx)?;
            Stmt::Assign(step_var, e, step_line)
        };
        lx.expect_sym(")")?;
        let body = parse_block(lx)?;
        return Ok(Stmt::For(decls, cond, Box::new(step), body, line));
    }
    if lx.at_kw("if") {
        lx.next();
        lx.expect_sym("(")?;
        let cond = parse_cond(lx)?;
        lx.expect_sym(")")?;
        let then = parse_block_or_stmt(lx)?;
        let els = if lx.at_kw("else") {
            lx.next();
            parse_block_or_stmt(lx)?
        } else {
            Vec::new()
        };
        return Ok(Stmt::If(cond, then, els, line));
    }
    if lx.at_kw("assert") {
        lx.next();
        lx.expect_sym("(")?;
        let cond = parse_cond(lx)?;
        lx.expect_sym(")")?;
        lx.expect_sym(";")?;
        return Ok(Stmt::Assert(cond, line));
    }
    if lx.at_kw("int") {
        lx.next();
        let name = lx.expect_ident()?;
        lx.expect_sym("=")?;
        let e = parse_expr(lx)?;
        lx.expect_sym(";")?;
        return Ok(Stmt::Decl(name, e, line));
    }
    // assignment, address assignment, or call
    let name = lx.expect_ident()?;
    if lx.at_sym("(") {
        lx.next();
        let mut args = Vec::new();
        if !lx.at_sym(")") {
            loop {
                args.push(parse_expr(lx)?);
                if lx.at_sym(",") {
                    lx.next();
                } else {
                    break;
                }
            }
        }
        lx.expect_sym(")")?;
        lx.expect_sym(";")?;
        return Ok(Stmt::Call(name, args, line));
    }
    lx.expect_sym("=")?;
    if lx.at_sym("&") {
        lx.next();
        let target = lx.expect_ident()?;
        lx.expect_sym(";")?;
        return Ok(Stmt::AssignAddr(name, target, line));
    }
    let e = parse_expr(lx)?;
    lx.expect_sym(";")?;
    Ok(Stmt::Assign(name, e, line))
}

fn parse_block_or_stmt(lx: &mut Lexer) -> Result<Vec<Stmt>, FrontendError> {
    if lx.at_sym("{") {
        parse_block(lx)
    } else {
        Ok(vec![parse_stmt(lx)?])
    }
}

/// Flat left-associative expression over terms; no operator precedence.
fn parse_expr(lx: &mut Lexer) -> Result<Expr, FrontendError> {
    let mut e = parse_term(lx)?;
    loop {
        let op = match lx.peek() {
            Tok::Sym("+") => BinOp::Add,
            Tok::Sym("-") => BinOp::Sub,
            Tok::Sym("*") => BinOp::Mul,
            _ => break,
        };
        lx.next();
        let rhs = parse_term(lx)?;
        e = Expr::Bin(Box::new(e), op, Box::new(rhs));
    }
    Ok(e)
}

fn parse_term(lx: &mut Lexer) -> Result<Expr, FrontendError> {
    match lx.peek().clone() {
        Tok::Int(n) => {
            lx.next();
            Ok(Expr::Lit(n))
        }
        Tok::Sym("-") => {
            lx.next();
            match lx.next() {
                Tok::Int(n) => Ok(Expr::Lit(-n)),
                other => lx.err(format!("expected integer after `-`, found {other:?}")),
            }
        }
        Tok::Sym("*") => {
            lx.next();
            Ok(Expr::Deref(lx.expect_ident()?))
        }
        Tok::Ident(w) if !is_keyword(&w) => {
            lx.next();
            Ok(Expr::Var(w))
        }
        other => lx.err(format!("expected expression term, found {other:?}")),
    }
}

fn parse_cond(lx: &mut Lexer) -> Result<Cond, FrontendError> {
    let lhs = parse_expr(lx)?;
    let op = match lx.peek() {
        Tok::Sym("<") => CmpOp::Lt,
        Tok::Sym(">") => CmpOp::Gt,
        Tok::Sym("<=") => CmpOp::Le,
        Tok::Sym(">=") => CmpOp::Ge,
        Tok::Sym("==") => CmpOp::Eq,
        Tok::Sym("!=") => CmpOp::Ne,
        other => return lx.err(format!("expected comparison operator, found {other:?}")),
    };
    lx.next();
    let rhs = parse_expr(lx)?;
    Ok(Cond { lhs, op, rhs })
}

// ---------------------------------------------------------------------------
// Kind checking and program assembly
// ---------------------------------------------------------------------------

struct Checker<'a> {
    globals: HashMap<String, GlobalKind>,
    proc_arity: HashMap<String, usize>,
    proc: &'a str,
    locals: BTreeSet<String>,
    escaped: BTreeSet<String>,
}

impl<'a> Checker<'a> {
    fn terr<T>(&self, line: u32, msg: impl Into<String>) -> Result<T, FrontendError> {
        Err(FrontendError::Type { line, msg: msg.into() })
    }

    fn declare(&mut self, name: &str, line: u32) -> Result<(), FrontendError> {
        if self.globals.contains_key(name) {
            return self.terr(line, format!("local `{name}` shadows a global"));
        }
        if !self.locals.insert(name.to_string()) {
            return self.terr(line, format!("`{name}` redeclared in `{}`", self.proc));
        }
        Ok(())
    }

    fn check_int_expr(&self, e: &Expr, line: u32) -> Result<(), FrontendError> {
        match e {
            Expr::Lit(_) => Ok(()),
            Expr::Var(x) => {
                if self.locals.contains(x) {
                    Ok(())
                } else {
                    match self.globals.get(x) {
                        Some(GlobalKind::Int) => Ok(()),
                        Some(GlobalKind::Ptr) => {
                            self.terr(line, format!("pointer `{x}` used as integer"))
                        }
                        None => self.terr(line, format!("undeclared variable `{x}`")),
                    }
                }
            }
            Expr::Deref(p) => match self.globals.get(p) {
                Some(GlobalKind::Ptr) => Ok(()),
                Some(GlobalKind::Int) => self.terr(line, format!("`*{p}` dereferences an integer")),
                None => self.terr(line, format!("undeclared pointer `{p}`")),
            },
            Expr::Bin(l, _, r) => {
                self.check_int_expr(l, line)?;
                self.check_int_expr(r, line)
            }
        }
    }

    fn check_cond(&self, c: &Cond, line: u32) -> Result<(), FrontendError> {
        self.check_int_expr(&c.lhs, line)?;
        self.check_int_expr(&c.rhs, line)
    }

    fn check_stmts(&mut self, stmts: &[Stmt]) -> Result<(), FrontendError> {
        for s in stmts {
            self.check_stmt(s)?;
        }
        Ok(())
    }

    fn check_stmt(&mut self, s: &Stmt) -> Result<(), FrontendError> {
        match s {
            Stmt::Decl(x, e, line) => {
                self.check_int_expr(e, *line)?;
                self.declare(x, *line)
            }
            Stmt::Assign(x, e, line) => {
                self.check_int_expr(e, *line)?;
                if self.locals.contains(x) {
                    return Ok(());
                }
                match self.globals.get(x) {
                    Some(GlobalKind::Int) => Ok(()),
                    Some(GlobalKind::Ptr) => {
                        self.terr(*line, format!("cannot assign integer to pointer `{x}`"))
                    }
                    None => self.terr(*line, format!("assignment to undeclared `{x}`")),
                }
            }
            Stmt::AssignAddr(p, x, line) => {
                match self.globals.get(p) {
                    Some(GlobalKind::Ptr) => {}
                    Some(GlobalKind::Int) => {
                        return self.terr(*line, format!("cannot assign address to integer `{p}`"))
                    }
                    None => return self.terr(*line, format!("assignment to undeclared `{p}`")),
                }
                if self.locals.contains(x) {
                    self.escaped.insert(x.clone());
                    Ok(())
                } else {
                    match self.globals.get(x) {
                        Some(GlobalKind::Int) => Ok(()),
                        Some(GlobalKind::Ptr) => {
                            self.terr(*line, format!("cannot take the address of pointer `{x}`"))
                        }
                        None => self.terr(*line, format!("undeclared variable `{x}`")),
                    }
                }
            }
            Stmt::While(c, body, line) => {
                self.check_cond(c, *line)?;
                self.check_stmts(body)
            }
            Stmt::For(decls, c, step, body, line) => {
                for (x, e) in decls {
                    self.check_int_expr(e, *line)?;
                    self.declare(x, *line)?;
                }
                self.check_cond(c, *line)?;
                self.check_stmt(step)?;
                self.check_stmts(body)
            }
            Stmt::If(c, then, els, line) => {
                self.check_cond(c, *line)?;
                self.check_stmts(then)?;
                self.check_stmts(els)
            }
            Stmt::Call(p, args, line) => {
                let Some(arity) = self.proc_arity.get(p) else {
                    return self.terr(*line, format!("call to undeclared procedure `{p}`"));
                };
                if *arity != args.len() {
                    return self.terr(
                        *line,
                        format!("`{p}` takes {arity} arguments, {} given", args.len()),
                    );
                }
                for a in args {
                    self.check_int_expr(a, *line)?;
                }
                Ok(())
            }
            Stmt::Assert(c, line) => self.check_cond(c, *line),
        }
    }
}

fn check_and_build(
    globals: Vec<GlobalDecl>,
    procs_src: Vec<ProcDecl>,
) -> Result<Program, FrontendError> {
    let mut global_kinds: HashMap<String, GlobalKind> = HashMap::new();
    for g in &globals {
        if global_kinds.insert(g.name.clone(), g.kind).is_some() {
            return Err(FrontendError::Type { line: 0, msg: format!("global `{}` redeclared", g.name) });
        }
    }
    for g in &globals {
        if let GlobalInit::Addr(t) = &g.init {
            match global_kinds.get(t) {
                Some(GlobalKind::Int) => {}
                _ => {
                    return Err(FrontendError::Type {
                        line: 0,
                        msg: format!("pointer `{}` must be initialized with a global integer", g.name),
                    })
                }
            }
        }
    }
    let mut proc_arity = HashMap::new();
    for p in &procs_src {
        if global_kinds.contains_key(&p.name) {
            return Err(FrontendError::Type {
                line: p.line,
                msg: format!("procedure `{}` shadows a global", p.name),
            });
        }
        if proc_arity.insert(p.name.clone(), p.params.len()).is_some() {
            return Err(FrontendError::Type {
                line: p.line,
                msg: format!("procedure `{}` redeclared", p.name),
            });
        }
    }

    let mut procs = Vec::new();
    let mut thread_entries = Vec::new();
    for p in &procs_src {
        let mut checker = Checker {
            globals: global_kinds.clone(),
            proc_arity: proc_arity.clone(),
            proc: &p.name,
            locals: BTreeSet::new(),
            escaped: BTreeSet::new(),
        };
        for param in &p.params {
            checker.declare(param, p.line)?;
        }
        checker.check_stmts(&p.body)?;
        let is_entry = p.name == "main" || p.name.starts_with("thread");
        if is_entry {
            if !p.params.is_empty() {
                return Err(FrontendError::Type {
                    line: p.line,
                    msg: format!("thread entry `{}` must not take parameters", p.name),
                });
            }
            thread_entries.push(p.name.clone());
        }
        let cfg = build_cfg(&p.name, &p.body);
        procs.push(Procedure {
            name: p.name.clone(),
            params: p.params.clone(),
            cfg,
            escaped: checker.escaped,
            locals: checker.locals,
        });
    }
    if thread_entries.is_empty() {
        return Err(FrontendError::Type {
            line: 0,
            msg: "program has no thread entry (`main` or `thread*` procedure)".to_string(),
        });
    }
    Ok(Program { globals, procs, thread_entries })
}
