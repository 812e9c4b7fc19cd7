//! A small arithmetic expression language used to describe problem data
//! such as `f(t, y)`, `g(t, y)` and custom `Psi(t)` functions.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;          (* right associative *)
//! primary = number | name | name "(" expr { "," expr } ")" | "(" expr ")" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
//!         | "." digits [ exponent ] ;
//! ```
//!
//! `^` binds tighter than unary minus, so `-t^2` is `-(t^2)` while `2^-t`
//! is `2^(-t)`. Names resolve to declared variables first, then to the
//! constants `pi` and `e`. Builtins: `sin cos exp log sqrt abs gamma` (one
//! argument) and `pow` (two arguments).

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use thiserror::Error;

use crate::special::{gamma_fn, SpecialError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    /// Left and right binding powers for the Pratt loop.
    fn binding_power(self) -> (u8, u8) {
        match self {
            BinaryOp::Add | BinaryOp::Sub => (1, 2),
            BinaryOp::Mul | BinaryOp::Div => (3, 4),
            BinaryOp::Pow => (7, 6),
        }
    }
}

const PREFIX_NEG_BP: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Pow,
    Gamma,
}

impl Builtin {
    pub const ALL: [Builtin; 8] = [
        Builtin::Sin,
        Builtin::Cos,
        Builtin::Exp,
        Builtin::Log,
        Builtin::Sqrt,
        Builtin::Abs,
        Builtin::Pow,
        Builtin::Gamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Exp => "exp",
            Builtin::Log => "log",
            Builtin::Sqrt => "sqrt",
            Builtin::Abs => "abs",
            Builtin::Pow => "pow",
            Builtin::Gamma => "gamma",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Pow => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }
}

/// AST node. Equality ignores source spans.
#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub span: Range<usize>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Number(f64),
    /// Index into the declared variable list of the owning [`Expr`].
    Variable(usize),
    Neg(Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    Call(Builtin, Vec<Node>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyInput,
    NoVariables,
    DuplicateVariable(String),
    UnexpectedChar(char),
    InvalidNumber(String),
    UnexpectedToken { found: String, expected: &'static str },
    UnexpectedEnd { expected: &'static str },
    UnknownIdentifier(String),
    ArityMismatch { function: &'static str, expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::EmptyInput => write!(f, "empty expression"),
            ParseErrorKind::NoVariables => write!(f, "no variables declared"),
            ParseErrorKind::DuplicateVariable(v) => write!(f, "variable `{v}` declared twice"),
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character `{c}`"),
            ParseErrorKind::InvalidNumber(s) => write!(f, "invalid number literal `{s}`"),
            ParseErrorKind::UnexpectedToken { found, expected } => {
                write!(f, "expected {expected}, found `{found}`")
            }
            ParseErrorKind::UnexpectedEnd { expected } => {
                write!(f, "expected {expected}, found end of input")
            }
            ParseErrorKind::UnknownIdentifier(name) => write!(f, "unknown identifier `{name}`"),
            ParseErrorKind::ArityMismatch { function, expected, found } => write!(
                f,
                "`{function}` takes {expected} argument(s), {found} given"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalErrorKind {
    #[error("missing binding for variable `{0}`")]
    MissingBinding(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of non-positive value {0}")]
    LogOfNonPositive(f64),
    #[error("square root of negative value {0}")]
    SqrtOfNegative(f64),
    #[error("gamma function pole at {0}")]
    GammaPole(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation error at bytes {}..{}: {kind}", span.start, span.end)]
pub struct EvalError {
    pub span: Range<usize>,
    pub kind: EvalErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("{v}"),
            Tok::Ident(s) => s.clone(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Caret => "^".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::Comma => ",".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Range<usize>,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, span: start..start + 1 });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j < bytes.len() && bytes[j] == b'.' {
                j += 1;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
            }
            // exponent only when followed by digits, otherwise `e` starts a name
            if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                let mut k = j + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let text = &src[i..j];
            let value: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                kind: ParseErrorKind::InvalidNumber(text.to_string()),
            })?;
            if !value.is_finite() {
                return Err(ParseError {
                    offset: start,
                    kind: ParseErrorKind::InvalidNumber(text.to_string()),
                });
            }
            out.push(Token { tok: Tok::Num(value), span: start..j });
            i = j;
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut j = i;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            out.push(Token { tok: Tok::Ident(src[i..j].to_string()), span: start..j });
            i = j;
            continue;
        }
        let ch = src[i..].chars().next().unwrap_or('?');
        return Err(ParseError { offset: start, kind: ParseErrorKind::UnexpectedChar(ch) });
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
    variables: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, expected: &'static str) -> Result<Token, ParseError> {
        match self.next() {
            Some(t) if t.tok == want => Ok(t),
            Some(t) => Err(ParseError {
                offset: t.span.start,
                kind: ParseErrorKind::UnexpectedToken { found: t.tok.describe(), expected },
            }),
            None => Err(ParseError {
                offset: self.end,
                kind: ParseErrorKind::UnexpectedEnd { expected },
            }),
        }
    }

    fn parse_expr(&mut self, min_bp: u8) -> Result<Node, ParseError> {
        let mut lhs = self.parse_prefix()?;
        loop {
            let op = match self.peek().map(|t| &t.tok) {
                Some(Tok::Plus) => BinaryOp::Add,
                Some(Tok::Minus) => BinaryOp::Sub,
                Some(Tok::Star) => BinaryOp::Mul,
                Some(Tok::Slash) => BinaryOp::Div,
                Some(Tok::Caret) => BinaryOp::Pow,
                _ => break,
            };
            let (l_bp, r_bp) = op.binding_power();
            if l_bp < min_bp {
                break;
            }
            self.next();
            let rhs = self.parse_expr(r_bp)?;
            let span = lhs.span.start..rhs.span.end;
            lhs = Node { kind: NodeKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn parse_prefix(&mut self) -> Result<Node, ParseError> {
        let Some(tok) = self.next() else {
            return Err(ParseError {
                offset: self.end,
                kind: ParseErrorKind::UnexpectedEnd { expected: "an operand" },
            });
        };
        match tok.tok {
            Tok::Num(v) => Ok(Node { kind: NodeKind::Number(v), span: tok.span }),
            Tok::Minus => {
                let operand = self.parse_expr(PREFIX_NEG_BP)?;
                let span = tok.span.start..operand.span.end;
                Ok(Node { kind: NodeKind::Neg(Box::new(operand)), span })
            }
            Tok::LParen => {
                let inner = self.parse_expr(0)?;
                let close = self.expect(Tok::RParen, "`)`")?;
                Ok(Node { kind: inner.kind, span: tok.span.start..close.span.end })
            }
            Tok::Ident(name) => self.parse_name(name, tok.span),
            other => Err(ParseError {
                offset: tok.span.start,
                kind: ParseErrorKind::UnexpectedToken {
                    found: other.describe(),
                    expected: "an operand",
                },
            }),
        }
    }

    fn parse_name(&mut self, name: String, span: Range<usize>) -> Result<Node, ParseError> {
        let is_call = matches!(self.peek().map(|t| &t.tok), Some(Tok::LParen));
        if is_call {
            let Some(builtin) = Builtin::from_name(&name) else {
                return Err(ParseError {
                    offset: span.start,
                    kind: ParseErrorKind::UnknownIdentifier(name),
                });
            };
            self.next();
            let mut args = Vec::new();
            if matches!(self.peek().map(|t| &t.tok), Some(Tok::RParen)) {
                let close = self.next().expect("peeked");
                return Err(ParseError {
                    offset: close.span.start,
                    kind: ParseErrorKind::ArityMismatch {
                        function: builtin.name(),
                        expected: builtin.arity(),
                        found: 0,
                    },
                });
            }
            loop {
                args.push(self.parse_expr(0)?);
                match self.next() {
                    Some(Token { tok: Tok::Comma, .. }) => continue,
                    Some(Token { tok: Tok::RParen, span: close }) => {
                        if args.len() != builtin.arity() {
                            return Err(ParseError {
                                offset: span.start,
                                kind: ParseErrorKind::ArityMismatch {
                                    function: builtin.name(),
                                    expected: builtin.arity(),
                                    found: args.len(),
                                },
                            });
                        }
                        return Ok(Node {
                            kind: NodeKind::Call(builtin, args),
                            span: span.start..close.end,
                        });
                    }
                    Some(t) => {
                        return Err(ParseError {
                            offset: t.span.start,
                            kind: ParseErrorKind::UnexpectedToken {
                                found: t.tok.describe(),
                                expected: "`,` or `)`",
                            },
                        })
                    }
                    None => {
                        return Err(ParseError {
                            offset: self.end,
                            kind: ParseErrorKind::UnexpectedEnd { expected: "`,` or `)`" },
                        })
                    }
                }
            }
        }
        if let Some(idx) = self.variables.iter().position(|v| *v == name) {
            return Ok(Node { kind: NodeKind::Variable(idx), span });
        }
        let constant = match name.as_str() {
            "pi" => Some(std::f64::consts::PI),
            "e" => Some(std::f64::consts::E),
            _ => None,
        };
        match constant {
            Some(v) => Ok(Node { kind: NodeKind::Number(v), span }),
            None => Err(ParseError {
                offset: span.start,
                kind: ParseErrorKind::UnknownIdentifier(name),
            }),
        }
    }
}

/// A parsed expression together with its declared variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    variables: Vec<String>,
}

/// Parse `source` over the declared `variables`.
pub fn parse(source: &str, variables: &[&str]) -> Result<Expr, ParseError> {
    Expr::parse(source, variables)
}

impl Expr {
    pub fn parse(source: &str, variables: &[&str]) -> Result<Expr, ParseError> {
        if variables.is_empty() {
            return Err(ParseError { offset: 0, kind: ParseErrorKind::NoVariables });
        }
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].contains(v) {
                return Err(ParseError {
                    offset: 0,
                    kind: ParseErrorKind::DuplicateVariable(v.to_string()),
                });
            }
        }
        let tokens = tokenize(source)?;
        if tokens.is_empty() {
            return Err(ParseError { offset: 0, kind: ParseErrorKind::EmptyInput });
        }
        let variables: Vec<String> = variables.iter().map(|s| s.to_string()).collect();
        let mut parser = Parser { tokens, pos: 0, end: source.len(), variables: &variables };
        let root = parser.parse_expr(0)?;
        if let Some(t) = parser.next() {
            return Err(ParseError {
                offset: t.span.start,
                kind: ParseErrorKind::UnexpectedToken {
                    found: t.tok.describe(),
                    expected: "an operator or end of input",
                },
            });
        }
        Ok(Expr { root, variables })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// Whether the variable `name` occurs anywhere in the tree.
    pub fn uses_variable(&self, name: &str) -> bool {
        fn walk(node: &Node, idx: usize) -> bool {
            match &node.kind {
                NodeKind::Number(_) => false,
                NodeKind::Variable(i) => *i == idx,
                NodeKind::Neg(a) => walk(a, idx),
                NodeKind::Binary(_, a, b) => walk(a, idx) || walk(b, idx),
                NodeKind::Call(_, args) => args.iter().any(|a| walk(a, idx)),
            }
        }
        match self.variables.iter().position(|v| v == name) {
            Some(idx) => walk(&self.root, idx),
            None => false,
        }
    }

    /// Evaluate with named bindings.
    pub fn eval(&self, bindings: &HashMap<&str, f64>) -> Result<f64, EvalError> {
        let mut values = Vec::with_capacity(self.variables.len());
        for name in &self.variables {
            match bindings.get(name.as_str()) {
                Some(v) => values.push(*v),
                None if !self.uses_variable(name) => values.push(f64::NAN),
                None => {
                    return Err(EvalError {
                        span: self.root.span.clone(),
                        kind: EvalErrorKind::MissingBinding(name.clone()),
                    })
                }
            }
        }
        self.eval_at(&values)
    }

    /// Evaluate with values given positionally in declaration order.
    pub fn eval_at(&self, values: &[f64]) -> Result<f64, EvalError> {
        if values.len() < self.variables.len() {
            let missing = self.variables[values.len()].clone();
            return Err(EvalError {
                span: self.root.span.clone(),
                kind: EvalErrorKind::MissingBinding(missing),
            });
        }
        eval_node(&self.root, values)
    }

    /// `self + c`.
    pub fn plus_constant(&self, c: f64) -> Expr {
        let span = self.root.span.clone();
        let rhs = Node { kind: NodeKind::Number(c), span: span.clone() };
        Expr {
            root: Node {
                kind: NodeKind::Binary(BinaryOp::Add, Box::new(self.root.clone()), Box::new(rhs)),
                span,
            },
            variables: self.variables.clone(),
        }
    }

    /// `-self`.
    pub fn negated(&self) -> Expr {
        let span = self.root.span.clone();
        Expr {
            root: Node { kind: NodeKind::Neg(Box::new(self.root.clone())), span },
            variables: self.variables.clone(),
        }
    }

    /// Replace every occurrence of variable `name` with `-name`.
    pub fn with_negated_variable(&self, name: &str) -> Expr {
        fn walk(node: &Node, idx: usize) -> Node {
            let kind = match &node.kind {
                NodeKind::Variable(i) if *i == idx => {
                    NodeKind::Neg(Box::new(node.clone()))
                }
                NodeKind::Number(_) | NodeKind::Variable(_) => node.kind.clone(),
                NodeKind::Neg(a) => NodeKind::Neg(Box::new(walk(a, idx))),
                NodeKind::Binary(op, a, b) => {
                    NodeKind::Binary(*op, Box::new(walk(a, idx)), Box::new(walk(b, idx)))
                }
                NodeKind::Call(f, args) => {
                    NodeKind::Call(*f, args.iter().map(|a| walk(a, idx)).collect())
                }
            };
            Node { kind, span: node.span.clone() }
        }
        match self.variables.iter().position(|v| v == name) {
            Some(idx) => Expr { root: walk(&self.root, idx), variables: self.variables.clone() },
            None => self.clone(),
        }
    }

    /// Same tree over a renamed variable list (positions are kept).
    pub fn with_variable_names(&self, names: &[&str]) -> Option<Expr> {
        if names.len() != self.variables.len() {
            return None;
        }
        Some(Expr {
            root: self.root.clone(),
            variables: names.iter().map(|s| s.to_string()).collect(),
        })
    }
}

fn eval_node(node: &Node, values: &[f64]) -> Result<f64, EvalError> {
    let err = |kind| EvalError { span: node.span.clone(), kind };
    match &node.kind {
        NodeKind::Number(v) => Ok(*v),
        NodeKind::Variable(i) => Ok(values[*i]),
        NodeKind::Neg(a) => Ok(-eval_node(a, values)?),
        NodeKind::Binary(op, a, b) => {
            let x = eval_node(a, values)?;
            let y = eval_node(b, values)?;
            Ok(match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => {
                    if y == 0.0 {
                        return Err(err(EvalErrorKind::DivisionByZero));
                    }
                    x / y
                }
                BinaryOp::Pow => x.powf(y),
            })
        }
        NodeKind::Call(f, args) => {
            let x = eval_node(&args[0], values)?;
            Ok(match f {
                Builtin::Sin => x.sin(),
                Builtin::Cos => x.cos(),
                Builtin::Exp => x.exp(),
                Builtin::Log => {
                    if x <= 0.0 {
                        return Err(err(EvalErrorKind::LogOfNonPositive(x)));
                    }
                    x.ln()
                }
                Builtin::Sqrt => {
                    if x < 0.0 {
                        return Err(err(EvalErrorKind::SqrtOfNegative(x)));
                    }
                    x.sqrt()
                }
                Builtin::Abs => x.abs(),
                Builtin::Pow => x.powf(eval_node(&args[1], values)?),
                Builtin::Gamma => match gamma_fn(x) {
                    Ok(v) => v,
                    Err(SpecialError::GammaPole(p)) => {
                        return Err(err(EvalErrorKind::GammaPole(p)))
                    }
                    Err(SpecialError::GammaOverflow(_)) => f64::INFINITY,
                    Err(_) => f64::NAN,
                },
            })
        }
    }
}

struct Printer<'a> {
    node: &'a Node,
    variables: &'a [String],
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |node| Printer { node, variables: self.variables };
        match &self.node.kind {
            NodeKind::Number(v) => write!(f, "{v:?}"),
            NodeKind::Variable(i) => write!(f, "{}", self.variables[*i]),
            NodeKind::Neg(a) => write!(f, "(-{})", sub(a)),
            NodeKind::Binary(op, a, b) => write!(f, "({} {} {})", sub(a), op.symbol(), sub(b)),
            NodeKind::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", sub(a))?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Fully parenthesized form; parses back to an equal tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer { node: &self.root, variables: &self.variables }.fmt(f)
    }
}
