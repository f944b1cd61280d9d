//! Arithmetic expression language for user-defined distributions: a user
//! supplies any two of density / hazard / survival (plain or log form) as
//! formulas in `time` and the model parameters, plus optional
//! parameter-preparation statements such as `mu=exp(-beta);` that run before
//! each evaluation. The missing third function is derived pointwise.
//!
//! Grammar (binary `**` is right-associative and binds tighter than unary
//! minus, so `-mu*time**alpha` is `-(mu*(time**alpha))`):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := ['-'] product
//! product := factor (('*' | '/') factor)*
//! factor  := '-' factor | power
//! power   := atom ['**' factor]
//! atom    := number | ident | func '(' expr (',' expr)* ')' | '(' expr ')'
//! func    := exp | log | sqrt | abs | pow
//! ```

use crate::dist::Constraint;
use crate::error::{Error, Result};
use std::collections::{BTreeSet, HashMap};

pub type Bindings = HashMap<String, f64>;

/// Reserved identifier bound to the event time during kernel evaluation.
pub const TIME_VAR: &str = "time";

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Ident(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Pow,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            "pow" => Some(Func::Pow),
            _ => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Pow => "pow",
        }
    }

    fn arity(&self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    StarStar,
    Slash,
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let pos = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
            }
            '+' => {
                out.push(Token { tok: Tok::Plus, pos });
                i += 1;
            }
            '-' => {
                out.push(Token { tok: Tok::Minus, pos });
                i += 1;
            }
            '*' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'*' {
                    out.push(Token { tok: Tok::StarStar, pos });
                    i += 2;
                } else {
                    out.push(Token { tok: Tok::Star, pos });
                    i += 1;
                }
            }
            '/' => {
                out.push(Token { tok: Tok::Slash, pos });
                i += 1;
            }
            '(' => {
                out.push(Token { tok: Tok::LParen, pos });
                i += 1;
            }
            ')' => {
                out.push(Token { tok: Tok::RParen, pos });
                i += 1;
            }
            ',' => {
                out.push(Token { tok: Tok::Comma, pos });
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| {
                    Error::Expr(format!("syntax error at position {start}: bad number '{text}'"))
                })?;
                out.push(Token { tok: Tok::Num(v), pos: start });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    pos: start,
                });
            }
            other => {
                return Err(Error::Expr(format!(
                    "syntax error at position {pos}: unexpected character '{other}'"
                )))
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.pos)
            .unwrap_or(self.src_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == Some(want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                let rhs = self.term()?;
                lhs = Expr::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
            } else if self.eat(&Tok::Minus) {
                let rhs = self.term()?;
                lhs = Expr::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        if self.eat(&Tok::Minus) {
            Ok(Expr::Neg(Box::new(self.product()?)))
        } else {
            self.product()
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(&Tok::Star) {
                let rhs = self.factor()?;
                lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
            } else if self.eat(&Tok::Slash) {
                let rhs = self.factor()?;
                lhs = Expr::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat(&Tok::Minus) {
            Ok(Expr::Neg(Box::new(self.factor()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(&Tok::StarStar) {
            let exponent = self.factor()?;
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let pos = self.here();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LParen) {
                    let func = Func::from_name(&name).ok_or_else(|| {
                        Error::Expr(format!(
                            "unknown function name '{name}' at position {pos}"
                        ))
                    })?;
                    self.pos += 1; // '('
                    let mut args = vec![self.expr()?];
                    while self.eat(&Tok::Comma) {
                        args.push(self.expr()?);
                    }
                    let close = self.here();
                    if !self.eat(&Tok::RParen) {
                        return Err(Error::Expr(format!(
                            "syntax error at position {close}: expected ')'"
                        )));
                    }
                    if args.len() != func.arity() {
                        return Err(Error::Expr(format!(
                            "function '{}' takes {} argument(s), got {}",
                            func.name(),
                            func.arity(),
                            args.len()
                        )));
                    }
                    Ok(Expr::Call(func, args))
                } else {
                    Ok(Expr::Ident(name))
                }
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                let close = self.here();
                if !self.eat(&Tok::RParen) {
                    return Err(Error::Expr(format!(
                        "syntax error at position {close}: expected ')'"
                    )));
                }
                Ok(inner)
            }
            Some(other) => Err(Error::Expr(format!(
                "syntax error at position {pos}: unexpected token {other:?}"
            ))),
            None => Err(Error::Expr(format!(
                "syntax error at position {pos}: unexpected end of expression"
            ))),
        }
    }
}

/// Parse an expression source string into a tree.
pub fn parse(src: &str) -> Result<Expr> {
    if src.trim().is_empty() {
        return Err(Error::Expr("empty expression".to_string()));
    }
    let tokens = lex(src)?;
    let mut p = Parser {
        tokens: &tokens,
        pos: 0,
        src_len: src.len(),
    };
    let e = p.expr()?;
    if p.pos != tokens.len() {
        return Err(Error::Expr(format!(
            "syntax error at position {}: unexpected trailing input",
            p.here()
        )));
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

/// Render a tree back to source. Parenthesization is minimal but chosen so
/// that `parse(pretty(t)) == t` for every tree the parser can produce.
pub fn pretty(e: &Expr) -> String {
    match e {
        Expr::Num(v) => format!("{v}"),
        Expr::Ident(s) => s.clone(),
        Expr::Neg(c) => {
            // the printed '-' may land in factor position (after another
            // operator or minus), where it binds a single factor; anything
            // looser than a power keeps explicit parentheses
            let bare = matches!(
                **c,
                Expr::Num(_)
                    | Expr::Ident(_)
                    | Expr::Call(_, _)
                    | Expr::Bin(BinOp::Pow, _, _)
                    | Expr::Neg(_)
            );
            if bare {
                format!("-{}", pretty(c))
            } else {
                format!("-({})", pretty(c))
            }
        }
        Expr::Bin(op, l, r) => {
            let (sym, lw, rw) = match op {
                BinOp::Add | BinOp::Sub => {
                    let sym = if *op == BinOp::Add { "+" } else { "-" };
                    // left associativity keeps the left side bare; the right
                    // side keeps grouping for nested additive expressions
                    let rw = matches!(**r, Expr::Bin(BinOp::Add, _, _) | Expr::Bin(BinOp::Sub, _, _));
                    (sym, false, rw)
                }
                BinOp::Mul | BinOp::Div => {
                    let sym = if *op == BinOp::Mul { "*" } else { "/" };
                    let lw = matches!(
                        **l,
                        Expr::Bin(BinOp::Add, _, _) | Expr::Bin(BinOp::Sub, _, _) | Expr::Neg(_)
                    );
                    let rw = matches!(
                        **r,
                        Expr::Bin(BinOp::Add, _, _)
                            | Expr::Bin(BinOp::Sub, _, _)
                            | Expr::Bin(BinOp::Mul, _, _)
                            | Expr::Bin(BinOp::Div, _, _)
                    );
                    (sym, lw, rw)
                }
                BinOp::Pow => {
                    // the base of `**` must be an atom; the exponent slot is
                    // a factor, so negation and nested powers stay bare
                    let lw = !matches!(**l, Expr::Num(_) | Expr::Ident(_) | Expr::Call(_, _));
                    let rw = matches!(
                        **r,
                        Expr::Bin(BinOp::Add, _, _)
                            | Expr::Bin(BinOp::Sub, _, _)
                            | Expr::Bin(BinOp::Mul, _, _)
                            | Expr::Bin(BinOp::Div, _, _)
                    );
                    ("**", lw, rw)
                }
            };
            let ls = if lw { format!("({})", pretty(l)) } else { pretty(l) };
            let rs = if rw { format!("({})", pretty(r)) } else { pretty(r) };
            format!("{ls}{sym}{rs}")
        }
        Expr::Call(f, args) => {
            let args: Vec<String> = args.iter().map(pretty).collect();
            format!("{}({})", f.name(), args.join(","))
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Evaluate a tree under the given bindings. Domain errors (log of a
/// nonpositive value, division by zero, invalid power) carry the offending
/// subexpression.
pub fn evaluate(e: &Expr, bindings: &Bindings) -> Result<f64> {
    match e {
        Expr::Num(v) => Ok(*v),
        Expr::Ident(name) => bindings
            .get(name)
            .copied()
            .ok_or_else(|| Error::Expr(format!("unbound identifier '{name}'"))),
        Expr::Neg(c) => Ok(-evaluate(c, bindings)?),
        Expr::Bin(op, l, r) => {
            let a = evaluate(l, bindings)?;
            let b = evaluate(r, bindings)?;
            match op {
                BinOp::Add => Ok(a + b),
                BinOp::Sub => Ok(a - b),
                BinOp::Mul => Ok(a * b),
                BinOp::Div => {
                    if b == 0.0 {
                        Err(Error::Expr(format!(
                            "division by zero in '{}'",
                            pretty(e)
                        )))
                    } else {
                        Ok(a / b)
                    }
                }
                BinOp::Pow => checked_pow(a, b, e),
            }
        }
        Expr::Call(f, args) => {
            let a = evaluate(&args[0], bindings)?;
            match f {
                Func::Exp => Ok(a.exp()),
                Func::Log => {
                    if a <= 0.0 {
                        Err(Error::Expr(format!(
                            "log of a nonpositive value ({a}) in '{}'",
                            pretty(e)
                        )))
                    } else {
                        Ok(a.ln())
                    }
                }
                Func::Sqrt => {
                    if a < 0.0 {
                        Err(Error::Expr(format!(
                            "sqrt of a negative value ({a}) in '{}'",
                            pretty(e)
                        )))
                    } else {
                        Ok(a.sqrt())
                    }
                }
                Func::Abs => Ok(a.abs()),
                Func::Pow => {
                    let b = evaluate(&args[1], bindings)?;
                    checked_pow(a, b, e)
                }
            }
        }
    }
}

fn checked_pow(a: f64, b: f64, site: &Expr) -> Result<f64> {
    let v = a.powf(b);
    if v.is_nan() {
        Err(Error::Expr(format!(
            "invalid power {a}**{b} in '{}'",
            pretty(site)
        )))
    } else {
        Ok(v)
    }
}

/// Collect free identifiers.
pub fn identifiers(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Num(_) => {}
        Expr::Ident(s) => {
            out.insert(s.clone());
        }
        Expr::Neg(c) => identifiers(c, out),
        Expr::Bin(_, l, r) => {
            identifiers(l, out);
            identifiers(r, out);
        }
        Expr::Call(_, args) => {
            for a in args {
                identifiers(a, out);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parameter-preparation programs
// ---------------------------------------------------------------------------

/// Ordered assignments `name = expression;` executed before each kernel
/// evaluation with the current parameter values bound.
#[derive(Debug, Clone, Default)]
pub struct PrepProgram {
    pub statements: Vec<(String, Expr)>,
}

pub fn parse_prep(src: &str) -> Result<PrepProgram> {
    let mut statements = Vec::new();
    for raw in src.split(';') {
        let stmt = raw.trim();
        if stmt.is_empty() {
            continue;
        }
        let eq = stmt.find('=').ok_or_else(|| {
            Error::Expr(format!("prep statement '{stmt}' is missing '='"))
        })?;
        let name = stmt[..eq].trim();
        if name.is_empty()
            || !name
                .chars()
                .enumerate()
                .all(|(i, c)| c == '_' || c.is_ascii_alphabetic() || (i > 0 && c.is_ascii_digit()))
        {
            return Err(Error::Expr(format!(
                "prep statement assigns to invalid name '{name}'"
            )));
        }
        if name == TIME_VAR {
            return Err(Error::Expr(
                "prep statements may not assign to 'time'".to_string(),
            ));
        }
        let expr = parse(&stmt[eq + 1..])?;
        statements.push((name.to_string(), expr));
    }
    Ok(PrepProgram { statements })
}

impl PrepProgram {
    pub fn run(&self, env: &mut Bindings) -> Result<()> {
        for (name, expr) in &self.statements {
            let v = evaluate(expr, env)?;
            env.insert(name.clone(), v);
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Custom distributions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FnRole {
    Density,
    Hazard,
    Survival,
}

impl FnRole {
    fn name(&self) -> &'static str {
        match self {
            FnRole::Density => "density",
            FnRole::Hazard => "hazard",
            FnRole::Survival => "survival",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProvidedFn {
    pub role: FnRole,
    pub log_form: bool,
    pub expr: Expr,
}

/// A user-defined distribution: exactly two of the three function roles,
/// a prep program, and the parameter list (location first).
#[derive(Debug, Clone)]
pub struct CustomDistribution {
    pub provided: Vec<ProvidedFn>,
    pub prep: PrepProgram,
    pub location: String,
    pub parameters: Vec<(String, Constraint)>,
}

/// Slack for roundoff when validating survival values against [0, 1].
const SURVIVAL_SLACK: f64 = 1e-9;

impl CustomDistribution {
    pub fn new(
        location: &str,
        param_anc: &[String],
        log_transf_param: &[String],
        provided: Vec<ProvidedFn>,
        prep: PrepProgram,
    ) -> Result<Self> {
        if provided.len() != 2 {
            return Err(Error::Model(format!(
                "a custom distribution needs exactly two of density/hazard/survival, got {}",
                provided.len()
            )));
        }
        if provided[0].role == provided[1].role {
            return Err(Error::Model(format!(
                "custom {} provided twice",
                provided[0].role.name()
            )));
        }
        let mut parameters = Vec::new();
        let mut push = |name: &str| -> Result<()> {
            if name == TIME_VAR {
                return Err(Error::Model(
                    "'time' is reserved and cannot be a parameter name".to_string(),
                ));
            }
            if parameters.iter().any(|(n, _)| n == name) {
                return Err(Error::Model(format!("duplicate parameter name '{name}'")));
            }
            let constraint = if log_transf_param.iter().any(|p| p == name) {
                Constraint::Positive
            } else {
                Constraint::Free
            };
            parameters.push((name.to_string(), constraint));
            Ok(())
        };
        push(location)?;
        for p in param_anc {
            push(p)?;
        }
        for lt in log_transf_param {
            if !parameters.iter().any(|(n, _)| n == lt) {
                return Err(Error::Model(format!(
                    "log_transf_param names unknown parameter '{lt}'"
                )));
            }
        }

        // prep statements may reference parameters and earlier assignments
        let mut known: BTreeSet<String> =
            parameters.iter().map(|(n, _)| n.clone()).collect();
        for (name, expr) in &prep.statements {
            let mut used = BTreeSet::new();
            identifiers(expr, &mut used);
            for u in &used {
                if !known.contains(u) {
                    return Err(Error::Model(format!(
                        "prep statement for '{name}' references unknown name '{u}'"
                    )));
                }
            }
            known.insert(name.clone());
        }
        // function expressions may additionally reference `time`
        known.insert(TIME_VAR.to_string());
        for p in &provided {
            let mut used = BTreeSet::new();
            identifiers(&p.expr, &mut used);
            for u in &used {
                if !known.contains(u) {
                    return Err(Error::Model(format!(
                        "custom {} references unknown name '{u}'",
                        p.role.name()
                    )));
                }
            }
        }
        Ok(CustomDistribution {
            provided,
            prep,
            location: location.to_string(),
            parameters,
        })
    }
}

/// Evaluable kernel assembled from a custom distribution: exposes
/// survival/density/hazard with the missing role derived pointwise
/// (f = h*S, h = f/S, S = f/h).
#[derive(Debug, Clone)]
pub struct CustomKernel {
    pub dist: CustomDistribution,
}

pub fn assemble(dist: CustomDistribution) -> CustomKernel {
    CustomKernel { dist }
}

impl CustomKernel {
    /// Evaluate the provided expressions at (params, t) and derive the
    /// missing role. Returns (log survival, log density).
    pub fn log_roles(&self, params: &[f64], t: f64) -> Result<(f64, f64)> {
        let mut env: Bindings = HashMap::with_capacity(self.dist.parameters.len() + 4);
        for ((name, _), value) in self.dist.parameters.iter().zip(params.iter()) {
            env.insert(name.clone(), *value);
        }
        self.dist.prep.run(&mut env)?;
        env.insert(TIME_VAR.to_string(), t);

        let mut log_s: Option<f64> = None;
        let mut log_f: Option<f64> = None;
        let mut log_h: Option<f64> = None;
        for p in &self.dist.provided {
            let raw = evaluate(&p.expr, &env)?;
            let logv = if p.log_form {
                raw
            } else {
                if raw < 0.0 {
                    return Err(Error::Domain(format!(
                        "custom {} is negative ({raw}) at time {t}",
                        p.role.name()
                    )));
                }
                raw.ln()
            };
            if logv.is_nan() {
                return Err(Error::Domain(format!(
                    "custom {} evaluates to NaN at time {t}",
                    p.role.name()
                )));
            }
            match p.role {
                FnRole::Survival => log_s = Some(validate_log_survival(logv, t, "custom survival")?),
                FnRole::Density => log_f = Some(logv),
                FnRole::Hazard => log_h = Some(logv),
            }
        }
        let (log_s, log_f) = match (log_s, log_f, log_h) {
            (Some(s), Some(f), None) => (s, f),
            (Some(s), None, Some(h)) => (s, h + s),
            (None, Some(f), Some(h)) => {
                let s = validate_log_survival(f - h, t, "derived survival f/h")?;
                (s, f)
            }
            _ => unreachable!("constructor enforces exactly two distinct roles"),
        };
        Ok((log_s, log_f))
    }

    pub fn log_survival(&self, params: &[f64], t: f64) -> Result<f64> {
        Ok(self.log_roles(params, t)?.0)
    }

    pub fn log_density(&self, params: &[f64], t: f64) -> Result<f64> {
        Ok(self.log_roles(params, t)?.1)
    }

    pub fn survival(&self, params: &[f64], t: f64) -> Result<f64> {
        Ok(self.log_survival(params, t)?.exp())
    }

    pub fn density(&self, params: &[f64], t: f64) -> Result<f64> {
        Ok(self.log_density(params, t)?.exp())
    }

    pub fn cdf(&self, params: &[f64], t: f64) -> Result<f64> {
        Ok(-f64::exp_m1(self.log_survival(params, t)?))
    }

    pub fn hazard(&self, params: &[f64], t: f64) -> Result<f64> {
        let (log_s, log_f) = self.log_roles(params, t)?;
        if log_s < crate::dist::SURVIVAL_UNDERFLOW_LOG {
            return Err(Error::Domain(format!(
                "custom survival underflows to 0 at time {t}; hazard overflows"
            )));
        }
        Ok((log_f - log_s).exp())
    }
}

fn validate_log_survival(log_s: f64, t: f64, what: &str) -> Result<f64> {
    if log_s.is_nan() {
        return Err(Error::Domain(format!("{what} is NaN at time {t}")));
    }
    if log_s > 0.0 {
        if log_s <= SURVIVAL_SLACK {
            return Ok(0.0);
        }
        return Err(Error::Domain(format!(
            "{what} is outside [0, 1] at time {t} (S = {})",
            log_s.exp()
        )));
    }
    Ok(log_s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, f64)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn parses_and_evaluates_weibull_ph_hazard() {
        let e = parse("mu*alpha*time**(alpha-1)").unwrap();
        let v = evaluate(&e, &env(&[("mu", 1.0), ("alpha", 2.0), ("time", 3.0)])).unwrap();
        assert!((v - 6.0).abs() < 1e-15);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse("-mu*time**alpha").unwrap();
        // tree is -(mu*(time**alpha))
        assert!(matches!(e, Expr::Neg(_)));
        let v = evaluate(&e, &env(&[("mu", 1.0), ("time", 2.0), ("alpha", 2.0)])).unwrap();
        assert!((v + 4.0).abs() < 1e-15);
    }

    #[test]
    fn power_is_right_associative() {
        let e = parse("2**3**2").unwrap();
        let v = evaluate(&e, &env(&[])).unwrap();
        assert!((v - 512.0).abs() < 1e-12);
    }

    #[test]
    fn unmatched_parenthesis_is_a_positioned_error() {
        let err = parse("exp(-(beta)").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("position"), "{msg}");
        assert!(msg.contains("')'"), "{msg}");
    }

    #[test]
    fn unknown_function_rejected() {
        let err = parse("sin(x)").unwrap_err();
        assert!(err.to_string().contains("unknown function name 'sin'"));
    }

    #[test]
    fn evaluate_identity_and_exp() {
        let e = parse("time").unwrap();
        assert_eq!(evaluate(&e, &env(&[("time", 7.0)])).unwrap(), 7.0);
        let e = parse("exp(-beta)").unwrap();
        assert_eq!(evaluate(&e, &env(&[("beta", 0.0)])).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors_carry_subexpression() {
        let e = parse("log(0-1)").unwrap();
        let err = evaluate(&e, &env(&[])).unwrap_err();
        assert!(err.to_string().contains("log of a nonpositive value"));
        let e = parse("1/(x-x)").unwrap();
        let err = evaluate(&e, &env(&[("x", 3.0)])).unwrap_err();
        assert!(err.to_string().contains("division by zero"));
        let e = parse("y").unwrap();
        let err = evaluate(&e, &env(&[])).unwrap_err();
        assert!(err.to_string().contains("unbound identifier 'y'"));
    }

    #[test]
    fn prep_program_runs_in_order() {
        let prog = parse_prep("mu=exp(-beta); nu=mu*2;").unwrap();
        let mut b = env(&[("beta", 0.0)]);
        prog.run(&mut b).unwrap();
        assert_eq!(b["mu"], 1.0);
        assert_eq!(b["nu"], 2.0);
    }

    fn weibull_ph_custom() -> CustomDistribution {
        CustomDistribution::new(
            "beta",
            &["alpha".to_string()],
            &["alpha".to_string()],
            vec![
                ProvidedFn {
                    role: FnRole::Hazard,
                    log_form: false,
                    expr: parse("mu*alpha*time**(alpha-1)").unwrap(),
                },
                ProvidedFn {
                    role: FnRole::Survival,
                    log_form: true,
                    expr: parse("-mu*time**alpha").unwrap(),
                },
            ],
            parse_prep("mu=exp(-beta);").unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn assembled_weibull_ph_reduces_to_exponential() {
        let kernel = assemble(weibull_ph_custom());
        // beta=0, alpha=1 is the unit exponential
        let params = [0.0, 1.0];
        let s = kernel.survival(&params, 1.0).unwrap();
        let h = kernel.hazard(&params, 1.0).unwrap();
        let f = kernel.density(&params, 1.0).unwrap();
        assert!((s - (-1.0_f64).exp()).abs() < 1e-12);
        assert!((h - 1.0).abs() < 1e-12);
        assert!((f - 0.36787944117144233).abs() < 1e-12);
    }

    #[test]
    fn hazard_derived_from_density_and_survival() {
        let dist = CustomDistribution::new(
            "beta",
            &[],
            &[],
            vec![
                ProvidedFn {
                    role: FnRole::Density,
                    log_form: false,
                    expr: parse("mu*exp(-mu*time)").unwrap(),
                },
                ProvidedFn {
                    role: FnRole::Survival,
                    log_form: false,
                    expr: parse("exp(-mu*time)").unwrap(),
                },
            ],
            parse_prep("mu=exp(-beta);").unwrap(),
        )
        .unwrap();
        let kernel = assemble(dist);
        for &t in &[0.2, 1.0, 4.0] {
            let h = kernel.hazard(&[0.0], t).unwrap();
            assert!((h - 1.0).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn improper_derived_survival_is_flagged() {
        let dist = CustomDistribution::new(
            "beta",
            &[],
            &[],
            vec![
                ProvidedFn {
                    role: FnRole::Density,
                    log_form: false,
                    expr: parse("2").unwrap(),
                },
                ProvidedFn {
                    role: FnRole::Hazard,
                    log_form: false,
                    expr: parse("1").unwrap(),
                },
            ],
            PrepProgram::default(),
        )
        .unwrap();
        let kernel = assemble(dist);
        let err = kernel.survival(&[0.0], 0.5).unwrap_err();
        assert!(err.to_string().contains("outside [0, 1]"), "{err}");
        assert!(err.to_string().contains("0.5"), "{err}");
    }

    #[test]
    fn both_or_neither_role_rejected() {
        let one = CustomDistribution::new(
            "beta",
            &[],
            &[],
            vec![ProvidedFn {
                role: FnRole::Hazard,
                log_form: false,
                expr: parse("1").unwrap(),
            }],
            PrepProgram::default(),
        );
        assert!(one.is_err());
        let dup = CustomDistribution::new(
            "beta",
            &[],
            &[],
            vec![
                ProvidedFn {
                    role: FnRole::Survival,
                    log_form: false,
                    expr: parse("1").unwrap(),
                },
                ProvidedFn {
                    role: FnRole::Survival,
                    log_form: true,
                    expr: parse("0-time").unwrap(),
                },
            ],
            PrepProgram::default(),
        );
        assert!(dup.is_err());
    }

    #[test]
    fn unknown_identifier_in_custom_function_rejected() {
        let err = CustomDistribution::new(
            "beta",
            &[],
            &[],
            vec![
                ProvidedFn {
                    role: FnRole::Hazard,
                    log_form: false,
                    expr: parse("gamma*time").unwrap(),
                },
                ProvidedFn {
                    role: FnRole::Survival,
                    log_form: true,
                    expr: parse("-time").unwrap(),
                },
            ],
            PrepProgram::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown name 'gamma'"));
    }

    #[test]
    fn pretty_round_trips_fixed_cases() {
        for src in [
            "mu*alpha*time**(alpha-1)",
            "-mu*time**alpha",
            "2**3**2",
            "a-b-c",
            "a-(b-c)",
            "a/(b*c)",
            "a*-b",
            "exp(-(beta+1))*sqrt(abs(x))",
            "pow(x,y+1)",
        ] {
            let t1 = parse(src).unwrap();
            let printed = pretty(&t1);
            let t2 = parse(&printed).unwrap();
            assert_eq!(t1, t2, "src='{src}' printed='{printed}'");
        }
    }
}
