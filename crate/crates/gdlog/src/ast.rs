//! Surface syntax tree for rule programs.
//!
//! A program is a *bag* of rule occurrences: the same rule text appearing
//! twice is two occurrences with distinct ids, and ids are dense in file
//! order. Head terms may nest deterministic arithmetic and distribution
//! calls; every distribution call is its own sampling site.
//!
//! The pretty-printer emits the canonical form of a program, and parsing a
//! printed program reproduces the tree exactly (parse . print is the
//! identity on parser output).

use std::fmt;

use crate::dist::{DistSpec, FnOp};
use crate::lex::Pos;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Const(Value),
    Var(String),
    Fn(FnOp, Vec<Term>),
    /// A distribution call with named parameters in written order.
    /// `discrete` carries its values and weights inside the spec and has no
    /// parameter terms.
    Dist { spec: DistSpec, params: Vec<(String, Term)> },
}

impl Term {
    /// Pre-order walk over this term.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Term)) {
        visit(self);
        match self {
            Term::Const(_) | Term::Var(_) => {}
            Term::Fn(_, args) => {
                for a in args {
                    a.walk(visit);
                }
            }
            Term::Dist { params, .. } => {
                for (_, t) in params {
                    t.walk(visit);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BodyArg {
    Var(String),
    Const(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyAtom {
    pub relation: String,
    pub args: Vec<BodyArg>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub head_relation: String,
    pub head_terms: Vec<Term>,
    pub body: Vec<BodyAtom>,
    pub pos: Pos,
}

impl Rule {
    /// Distinct variables of the head terms in first-appearance order
    /// (pre-order, left to right across the head).
    pub fn head_vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.head_terms {
            t.walk(&mut |t| {
                if let Term::Var(v) = t {
                    if !out.iter().any(|o| o == v) {
                        out.push(v.clone());
                    }
                }
            });
        }
        out
    }
}

/// A parsed, not yet validated program.
#[derive(Debug, Clone, PartialEq)]
pub struct RawProgram {
    /// Rules in file order; the index is the occurrence id.
    pub rules: Vec<Rule>,
}

// --- pretty-printing ---------------------------------------------------

fn precedence(op: FnOp) -> u8 {
    match op {
        FnOp::Add | FnOp::Sub => 1,
        FnOp::Mul | FnOp::Div => 2,
        FnOp::Ln | FnOp::Exp | FnOp::Neg => 3,
    }
}

fn fmt_term(t: &Term, parent_prec: u8, right_side: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Const(v) => write!(f, "{v}"),
        Term::Var(v) => f.write_str(v),
        Term::Fn(op @ (FnOp::Ln | FnOp::Exp), args) => {
            write!(f, "{}(", op.name())?;
            fmt_term(&args[0], 0, false, f)?;
            f.write_str(")")
        }
        Term::Fn(FnOp::Neg, args) => {
            // Unary minus always parenthesizes its operand, so it stays
            // distinct from a negative literal.
            f.write_str("-(")?;
            fmt_term(&args[0], 0, false, f)?;
            f.write_str(")")
        }
        Term::Fn(op, args) => {
            let prec = precedence(*op);
            // A right operand at equal precedence needs parentheses to
            // survive the parser's left associativity.
            let need = prec < parent_prec || (right_side && prec == parent_prec);
            if need {
                f.write_str("(")?;
            }
            fmt_term(&args[0], prec, false, f)?;
            write!(f, " {} ", op.name())?;
            fmt_term(&args[1], prec, true, f)?;
            if need {
                f.write_str(")")?;
            }
            Ok(())
        }
        Term::Dist { spec, params } => {
            write!(f, "{}(", spec.name())?;
            if let DistSpec::Discrete { values, weights } = spec {
                f.write_str("values=[")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("], weights=[")?;
                for (i, w) in weights.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{w:?}")?;
                }
                f.write_str("]")?;
            } else {
                for (i, (name, t)) in params.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{name}=")?;
                    fmt_term(t, 0, false, f)?;
                }
            }
            f.write_str(")")
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_term(self, 0, false, f)
    }
}

impl fmt::Display for BodyArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyArg::Var(v) => f.write_str(v),
            BodyArg::Const(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Display for BodyAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.head_relation)?;
        for (i, t) in self.head_terms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, a) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
        }
        f.write_str(".")
    }
}

impl fmt::Display for RawProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}
