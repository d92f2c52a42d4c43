//! Expression trees, the plain-text expression grammar and the structural
//! views (evaluation order, skeletons, operator tokens) used for indexing.
//!
//! Grammar, lowest to highest precedence:
//!
//! ```text
//! equation := additive ( '=' additive )?          -- non-associative
//! additive := term ( ('+' | '-') term )*           -- left
//! term     := unary ( ('*' | '/') unary )*         -- left
//! unary    := '-' unary | power
//! power    := atom ( '^' unary )?                  -- right
//! atom     := number | identifier | func '(' args ')' | '(' equation ')'
//! ```

use std::fmt;

use thiserror::Error;

/// Placeholder identifier every leaf collapses to in a structural skeleton.
pub const SKELETON_TERM: &str = "term";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Eq,
}

impl BinOp {
    pub const ALL: [BinOp; 6] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Pow,
        BinOp::Eq,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
            BinOp::Eq => "=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinOp> {
        BinOp::ALL.into_iter().find(|op| op.symbol() == s)
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Eq => PREC_EQ,
            BinOp::Add | BinOp::Sub => PREC_ADD,
            BinOp::Mul | BinOp::Div => PREC_MUL,
            BinOp::Pow => PREC_POW,
        }
    }
}

/// Entries of the fixed function table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Log,
    Exp,
    Sqrt,
    Int,
    Diff,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Log,
        Func::Exp,
        Func::Sqrt,
        Func::Int,
        Func::Diff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Log => "log",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Int => "int",
            Func::Diff => "diff",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }

    /// `int` and `diff` take (body, variable); everything else is unary.
    pub fn arity(self) -> usize {
        match self {
            Func::Int | Func::Diff => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Number(String),
    Identifier(String),
    /// Unary minus, the only prefix operator.
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        func: Func,
        args: Vec<Expr>,
    },
}

/// One operator or function node together with its evaluation rank.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OpOccurrence {
    pub op: &'static str,
    pub order: usize,
}

impl OpOccurrence {
    /// Index-term encoding, `pair:OP:K`.
    pub fn pair_token(&self) -> String {
        pair_token(self.op, self.order)
    }
}

impl fmt::Display for OpOccurrence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.op, self.order)
    }
}

pub fn pair_token(op: &str, order: usize) -> String {
    format!("pair:{op}:{order}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

impl SyntaxError {
    pub(crate) fn new(offset: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            offset,
            message: message.into(),
        }
    }
}

pub fn is_number_literal(s: &str) -> bool {
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (s, None),
    };
    let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    digits(int) && frac.is_none_or(digits)
}

/// `[A-Za-z][A-Za-z0-9_]*`, excluding the function table.
pub fn is_identifier(s: &str) -> bool {
    let mut bytes = s.bytes();
    matches!(bytes.next(), Some(b) if b.is_ascii_alphabetic())
        && bytes.all(|b| b.is_ascii_alphanumeric() || b == b'_')
        && Func::from_name(s).is_none()
}

/// True for binary operator symbols and function names.
pub fn is_operator_symbol(s: &str) -> bool {
    BinOp::from_symbol(s).is_some() || Func::from_name(s).is_some()
}

impl Expr {
    pub fn number(lit: impl Into<String>) -> Expr {
        Expr::Number(lit.into())
    }

    pub fn ident(name: impl Into<String>) -> Expr {
        Expr::Identifier(name.into())
    }

    pub fn negate(operand: Expr) -> Expr {
        Expr::Neg(Box::new(operand))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn call(func: Func, args: Vec<Expr>) -> Expr {
        Expr::Call { func, args }
    }

    /// Symbol of this node when it is an operator or function application.
    pub fn op_symbol(&self) -> Option<&'static str> {
        match self {
            Expr::Number(_) | Expr::Identifier(_) => None,
            Expr::Neg(_) => Some("-"),
            Expr::Binary { op, .. } => Some(op.symbol()),
            Expr::Call { func, .. } => Some(func.name()),
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Number(_) | Expr::Identifier(_) => Vec::new(),
            Expr::Neg(e) => vec![e],
            Expr::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            Expr::Call { args, .. } => args.iter().collect(),
        }
    }

    /// Visits every node children-first, left to right.
    pub fn walk_post_order<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        for child in self.children() {
            child.walk_post_order(visit);
        }
        visit(self);
    }

    /// Identifier names and number literals in left-to-right order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk_post_order(&mut |e| match e {
            Expr::Number(s) | Expr::Identifier(s) => out.push(s.as_str()),
            _ => {}
        });
        out
    }

    /// True when `pred` holds for this node or any descendant.
    pub fn contains(&self, pred: impl Fn(&Expr) -> bool) -> bool {
        fn go(e: &Expr, pred: &dyn Fn(&Expr) -> bool) -> bool {
            pred(e) || e.children().into_iter().any(|c| go(c, pred))
        }
        go(self, &pred)
    }
}

/// Operator and function nodes ranked by left-to-right post-order.
pub fn eval_order(e: &Expr) -> Vec<OpOccurrence> {
    let mut out = Vec::new();
    e.walk_post_order(&mut |node| {
        if let Some(op) = node.op_symbol() {
            out.push(OpOccurrence {
                op,
                order: out.len() + 1,
            });
        }
    });
    out
}

/// Replaces every identifier and number with [`SKELETON_TERM`].
pub fn skeletonize(e: &Expr) -> Expr {
    match e {
        Expr::Number(_) | Expr::Identifier(_) => Expr::ident(SKELETON_TERM),
        Expr::Neg(inner) => Expr::negate(skeletonize(inner)),
        Expr::Binary { op, lhs, rhs } => Expr::binary(*op, skeletonize(lhs), skeletonize(rhs)),
        Expr::Call { func, args } => Expr::call(*func, args.iter().map(skeletonize).collect()),
    }
}

/// Multiset of operator and function symbols, in post-order.
pub fn op_tokens(e: &Expr) -> Vec<&'static str> {
    let mut out = Vec::new();
    e.walk_post_order(&mut |node| out.extend(node.op_symbol()));
    out
}

// ---------------------------------------------------------------------------
// Printing

const PREC_EQ: u8 = 1;
const PREC_ADD: u8 = 2;
const PREC_MUL: u8 = 3;
const PREC_UNARY: u8 = 4;
const PREC_POW: u8 = 5;
const PREC_ATOM: u8 = 6;

fn node_precedence(e: &Expr) -> u8 {
    match e {
        Expr::Number(_) | Expr::Identifier(_) | Expr::Call { .. } => PREC_ATOM,
        Expr::Neg(_) => PREC_UNARY,
        Expr::Binary { op, .. } => op.precedence(),
    }
}

fn write_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Number(s) | Expr::Identifier(s) => out.push_str(s),
        Expr::Neg(inner) => {
            out.push('-');
            write_operand(inner, node_precedence(inner) < PREC_UNARY, out);
        }
        Expr::Binary { op, lhs, rhs } => {
            let (lp, rp) = (node_precedence(lhs), node_precedence(rhs));
            let (lhs_parens, rhs_parens) = match op {
                BinOp::Eq => (lp <= PREC_EQ, rp <= PREC_EQ),
                BinOp::Add | BinOp::Sub => (lp < PREC_ADD, rp <= PREC_ADD),
                BinOp::Mul | BinOp::Div => (lp < PREC_MUL, rp <= PREC_MUL),
                // base is an atom; exponent is a unary-level operand
                BinOp::Pow => (lp < PREC_ATOM, rp < PREC_UNARY),
            };
            write_operand(lhs, lhs_parens, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_operand(rhs, rhs_parens, out);
        }
        Expr::Call { func, args } => {
            out.push_str(func.name());
            out.push('(');
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(arg, out);
            }
            out.push(')');
        }
    }
}

fn write_operand(e: &Expr, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        write_expr(e, out);
        out.push(')');
    } else {
        write_expr(e, out);
    }
}

/// Canonical text form: minimal parentheses, single spaces around binary operators.
pub fn print_text(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(e, &mut out);
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_text(self))
    }
}

// ---------------------------------------------------------------------------
// Parsing

/// Token stream shared by the text lexer and the presentation-MathML reader.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token {
    Number(String),
    Identifier(String),
    Func(Func),
    Op(BinOp),
    LParen,
    RParen,
    Comma,
    /// A sub-expression already built by the caller (e.g. an `msup` layout).
    Atom(Expr),
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Number(s) => format!("number `{s}`"),
            Token::Identifier(s) => format!("identifier `{s}`"),
            Token::Func(f) => format!("function `{}`", f.name()),
            Token::Op(op) => format!("operator `{}`", op.symbol()),
            Token::LParen => "`(`".to_string(),
            Token::RParen => "`)`".to_string(),
            Token::Comma => "`,`".to_string(),
            Token::Atom(e) => format!("sub-expression `{e}`"),
        }
    }
}

/// A token with the offset used in error reports.
pub(crate) type Spanned = (Token, usize);

fn lex(input: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let bytes = input.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        let token = match b {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    let frac = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i == frac {
                        return Err(SyntaxError::new(i, "expected digits after decimal point"));
                    }
                }
                Token::Number(input[start..i].to_string())
            }
            b if b.is_ascii_alphabetic() => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &input[start..i];
                match Func::from_name(word) {
                    Some(f) => Token::Func(f),
                    None => Token::Identifier(word.to_string()),
                }
            }
            b'(' => {
                i += 1;
                Token::LParen
            }
            b')' => {
                i += 1;
                Token::RParen
            }
            b',' => {
                i += 1;
                Token::Comma
            }
            _ => {
                let ch = input[i..].chars().next().unwrap_or('?');
                match BinOp::from_symbol(ch.encode_utf8(&mut [0; 4])) {
                    Some(op) => {
                        i += 1;
                        Token::Op(op)
                    }
                    None => {
                        return Err(SyntaxError::new(i, format!("unknown character `{ch}`")));
                    }
                }
            }
        };
        tokens.push((token, start));
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn bump(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        tok
    }

    fn eat_op(&mut self, ops: &[BinOp]) -> Option<BinOp> {
        match self.peek() {
            Some(Token::Op(op)) if ops.contains(op) => {
                let op = *op;
                self.pos += 1;
                Some(op)
            }
            _ => None,
        }
    }

    fn unexpected(&self, wanted: &str) -> SyntaxError {
        match self.peek() {
            Some(tok) => SyntaxError::new(
                self.offset(),
                format!("expected {wanted}, found {}", tok.describe()),
            ),
            None => SyntaxError::new(self.end, format!("expected {wanted}, found end of input")),
        }
    }

    fn equation(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.additive()?;
        if self.eat_op(&[BinOp::Eq]).is_some() {
            let rhs = self.additive()?;
            if matches!(self.peek(), Some(Token::Op(BinOp::Eq))) {
                return Err(SyntaxError::new(
                    self.offset(),
                    "`=` is non-associative; parenthesize chained equations",
                ));
            }
            return Ok(Expr::binary(BinOp::Eq, lhs, rhs));
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&[BinOp::Add, BinOp::Sub]) {
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&[BinOp::Mul, BinOp::Div]) {
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_op(&[BinOp::Sub]).is_some() {
            return Ok(Expr::negate(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.atom()?;
        if self.eat_op(&[BinOp::Pow]).is_some() {
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.offset();
        match self.peek() {
            Some(Token::Number(_) | Token::Identifier(_) | Token::Atom(_)) => {
                Ok(match self.bump() {
                    Some(Token::Number(n)) => Expr::Number(n),
                    Some(Token::Identifier(n)) => Expr::Identifier(n),
                    Some(Token::Atom(e)) => e,
                    _ => unreachable!(),
                })
            }
            Some(Token::Func(func)) => {
                let func = *func;
                self.pos += 1;
                if self.peek() != Some(&Token::LParen) {
                    return Err(self.unexpected(&format!("`(` after `{}`", func.name())));
                }
                self.pos += 1;
                let mut args = vec![self.equation()?];
                while self.peek() == Some(&Token::Comma) {
                    self.pos += 1;
                    args.push(self.equation()?);
                }
                if self.peek() != Some(&Token::RParen) {
                    return Err(self.unexpected("`,` or `)`"));
                }
                self.pos += 1;
                if args.len() != func.arity() {
                    return Err(SyntaxError::new(
                        start,
                        format!(
                            "`{}` takes {} argument(s), got {}",
                            func.name(),
                            func.arity(),
                            args.len()
                        ),
                    ));
                }
                Ok(Expr::call(func, args))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.equation()?;
                if self.peek() != Some(&Token::RParen) {
                    return Err(match self.peek() {
                        None => SyntaxError::new(start, "unbalanced `(`"),
                        Some(_) => self.unexpected("`)`"),
                    });
                }
                self.pos += 1;
                Ok(inner)
            }
            _ => Err(self.unexpected("an operand")),
        }
    }
}

/// Precedence-parses a prepared token stream; `end` is the offset reported
/// for errors at end of input.
pub(crate) fn parse_tokens(tokens: Vec<Spanned>, end: usize) -> Result<Expr, SyntaxError> {
    if tokens.is_empty() {
        return Err(SyntaxError::new(end, "empty expression"));
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        end,
    };
    let expr = parser.equation()?;
    match parser.peek() {
        None => Ok(expr),
        Some(Token::RParen) => Err(SyntaxError::new(parser.offset(), "unbalanced `)`")),
        Some(_) => Err(parser.unexpected("an operator or end of input")),
    }
}

pub fn parse_text(input: &str) -> Result<Expr, SyntaxError> {
    parse_tokens(lex(input)?, input.len())
}

impl std::str::FromStr for Expr {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_text(s)
    }
}
