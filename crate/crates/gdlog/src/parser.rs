//! Parser for rule programs.
//!
//! ```text
//! R(x, 0) :- S(x).
//! R(x, t + lognormal(mu=ln(s), var=0.1)) :- R(y, t), E(y, x, s).
//! ```
//!
//! Rules end with a dot, bodies are comma-separated atoms, `%` starts a line
//! comment. Head terms use infix arithmetic with the usual precedence,
//! `ln`/`exp` calls, and distribution calls with named parameters. Body
//! arguments are variables or constants. `true` and `false` are boolean
//! constants everywhere, and any other identifier in argument position is a
//! variable.

use crate::ast::{BodyArg, BodyAtom, RawProgram, Rule, Term};
use crate::dist::{DistSpec, FnOp};
use crate::lex::{Cursor, SyntaxError, TokKind};
use crate::value::Value;

pub fn parse_program(text: &str) -> Result<RawProgram, SyntaxError> {
    let mut cur = Cursor::new(text)?;
    let mut rules = Vec::new();
    while !cur.at_end() {
        rules.push(parse_rule(&mut cur)?);
    }
    Ok(RawProgram { rules })
}

fn parse_rule(cur: &mut Cursor) -> Result<Rule, SyntaxError> {
    let pos = cur.pos();
    let (head_relation, _) = cur.expect_ident("relation name")?;
    cur.expect(&TokKind::LParen)?;
    let mut head_terms = Vec::new();
    if !cur.eat(&TokKind::RParen) {
        loop {
            head_terms.push(parse_term(cur)?);
            if cur.eat(&TokKind::RParen) {
                break;
            }
            cur.expect(&TokKind::Comma)?;
        }
    }
    let mut body = Vec::new();
    if cur.eat(&TokKind::Turnstile) {
        loop {
            body.push(parse_atom(cur)?);
            if !cur.eat(&TokKind::Comma) {
                break;
            }
        }
    }
    cur.expect(&TokKind::Dot)?;
    Ok(Rule { head_relation, head_terms, body, pos })
}

fn parse_atom(cur: &mut Cursor) -> Result<BodyAtom, SyntaxError> {
    let pos = cur.pos();
    let (relation, _) = cur.expect_ident("relation name")?;
    cur.expect(&TokKind::LParen)?;
    let mut args = Vec::new();
    if !cur.eat(&TokKind::RParen) {
        loop {
            args.push(parse_arg(cur)?);
            if cur.eat(&TokKind::RParen) {
                break;
            }
            cur.expect(&TokKind::Comma)?;
        }
    }
    Ok(BodyAtom { relation, args, pos })
}

fn parse_arg(cur: &mut Cursor) -> Result<BodyArg, SyntaxError> {
    let pos = cur.pos();
    if cur.eat(&TokKind::Minus) {
        return Ok(BodyArg::Const(parse_negative_number(cur)?));
    }
    match cur.next().map(|t| t.kind) {
        Some(TokKind::Ident(s)) => Ok(match s.as_str() {
            "true" => BodyArg::Const(Value::Boolean(true)),
            "false" => BodyArg::Const(Value::Boolean(false)),
            _ => BodyArg::Var(s),
        }),
        Some(TokKind::Int(i)) => Ok(BodyArg::Const(Value::Integer(i))),
        Some(TokKind::Real(x)) => Ok(BodyArg::Const(real(x))),
        Some(TokKind::Str(s)) => Ok(BodyArg::Const(Value::String(s))),
        _ => Err(SyntaxError::at(pos, "expected variable or constant")),
    }
}

fn real(x: f64) -> Value {
    Value::real(x).expect("lexer produces finite reals")
}

fn parse_negative_number(cur: &mut Cursor) -> Result<Value, SyntaxError> {
    let pos = cur.pos();
    match cur.next().map(|t| t.kind) {
        Some(TokKind::Int(i)) => Ok(Value::Integer(-i)),
        Some(TokKind::Real(x)) => Ok(real(-x)),
        _ => Err(SyntaxError::at(pos, "expected numeric literal after -")),
    }
}

// Terms: additive over multiplicative over unary, all left-associative.

fn parse_term(cur: &mut Cursor) -> Result<Term, SyntaxError> {
    let mut left = parse_mul(cur)?;
    loop {
        let op = if cur.eat(&TokKind::Plus) {
            FnOp::Add
        } else if cur.eat(&TokKind::Minus) {
            FnOp::Sub
        } else {
            return Ok(left);
        };
        let right = parse_mul(cur)?;
        left = Term::Fn(op, vec![left, right]);
    }
}

fn parse_mul(cur: &mut Cursor) -> Result<Term, SyntaxError> {
    let mut left = parse_unary(cur)?;
    loop {
        let op = if cur.eat(&TokKind::Star) {
            FnOp::Mul
        } else if cur.eat(&TokKind::Slash) {
            FnOp::Div
        } else {
            return Ok(left);
        };
        let right = parse_unary(cur)?;
        left = Term::Fn(op, vec![left, right]);
    }
}

fn parse_unary(cur: &mut Cursor) -> Result<Term, SyntaxError> {
    if cur.eat(&TokKind::Minus) {
        // A minus directly on a numeric literal is a negative constant;
        // anything else is the negation function.
        if matches!(cur.peek(), Some(TokKind::Int(_)) | Some(TokKind::Real(_))) {
            return Ok(Term::Const(parse_negative_number(cur)?));
        }
        return Ok(Term::Fn(FnOp::Neg, vec![parse_unary(cur)?]));
    }
    parse_primary(cur)
}

fn parse_primary(cur: &mut Cursor) -> Result<Term, SyntaxError> {
    let pos = cur.pos();
    match cur.next().map(|t| t.kind) {
        Some(TokKind::LParen) => {
            let t = parse_term(cur)?;
            cur.expect(&TokKind::RParen)?;
            Ok(t)
        }
        Some(TokKind::Int(i)) => Ok(Term::Const(Value::Integer(i))),
        Some(TokKind::Real(x)) => Ok(Term::Const(real(x))),
        Some(TokKind::Str(s)) => Ok(Term::Const(Value::String(s))),
        Some(TokKind::Ident(name)) => {
            match name.as_str() {
                "true" => return Ok(Term::Const(Value::Boolean(true))),
                "false" => return Ok(Term::Const(Value::Boolean(false))),
                _ => {}
            }
            if cur.peek() == Some(&TokKind::LParen) {
                if name == "ln" || name == "exp" {
                    cur.next();
                    let op = if name == "ln" { FnOp::Ln } else { FnOp::Exp };
                    let arg = parse_term(cur)?;
                    cur.expect(&TokKind::RParen)?;
                    return Ok(Term::Fn(op, vec![arg]));
                }
                if name == "discrete" {
                    cur.next();
                    return parse_discrete(cur, pos);
                }
                if let Some(spec) = DistSpec::family_from_name(&name) {
                    cur.next();
                    let params = parse_named_params(cur)?;
                    return Ok(Term::Dist { spec, params });
                }
                return Err(SyntaxError::at(
                    pos,
                    format!("{name} is not a function or distribution name"),
                ));
            }
            Ok(Term::Var(name))
        }
        _ => Err(SyntaxError::at(pos, "expected term")),
    }
}

fn parse_named_params(cur: &mut Cursor) -> Result<Vec<(String, Term)>, SyntaxError> {
    let mut params = Vec::new();
    if cur.eat(&TokKind::RParen) {
        return Ok(params);
    }
    loop {
        let (name, _) = cur.expect_ident("parameter name")?;
        cur.expect(&TokKind::Eq)?;
        params.push((name, parse_term(cur)?));
        if cur.eat(&TokKind::RParen) {
            return Ok(params);
        }
        cur.expect(&TokKind::Comma)?;
    }
}

fn parse_discrete(cur: &mut Cursor, pos: crate::lex::Pos) -> Result<Term, SyntaxError> {
    let mut values: Option<Vec<Value>> = None;
    let mut weights: Option<Vec<f64>> = None;
    loop {
        let (name, npos) = cur.expect_ident("values or weights")?;
        cur.expect(&TokKind::Eq)?;
        match name.as_str() {
            "values" if values.is_none() => values = Some(parse_value_list(cur)?),
            "weights" if weights.is_none() => weights = Some(parse_weight_list(cur)?),
            _ => {
                return Err(SyntaxError::at(
                    npos,
                    format!("unexpected discrete parameter {name}"),
                ));
            }
        }
        if cur.eat(&TokKind::RParen) {
            break;
        }
        cur.expect(&TokKind::Comma)?;
    }
    let (Some(values), Some(weights)) = (values, weights) else {
        return Err(SyntaxError::at(pos, "discrete needs values=[...] and weights=[...]"));
    };
    Ok(Term::Dist { spec: DistSpec::Discrete { values, weights }, params: vec![] })
}

fn parse_value_list(cur: &mut Cursor) -> Result<Vec<Value>, SyntaxError> {
    cur.expect(&TokKind::LBracket)?;
    let mut out = Vec::new();
    if cur.eat(&TokKind::RBracket) {
        return Ok(out);
    }
    loop {
        let pos = cur.pos();
        if cur.eat(&TokKind::Minus) {
            out.push(parse_negative_number(cur)?);
        } else {
            match cur.next().map(|t| t.kind) {
                Some(TokKind::Int(i)) => out.push(Value::Integer(i)),
                Some(TokKind::Real(x)) => out.push(real(x)),
                Some(TokKind::Str(s)) => out.push(Value::String(s)),
                Some(TokKind::Ident(s)) if s == "true" => out.push(Value::Boolean(true)),
                Some(TokKind::Ident(s)) if s == "false" => out.push(Value::Boolean(false)),
                _ => return Err(SyntaxError::at(pos, "expected constant in list")),
            }
        }
        if cur.eat(&TokKind::RBracket) {
            return Ok(out);
        }
        cur.expect(&TokKind::Comma)?;
    }
}

fn parse_weight_list(cur: &mut Cursor) -> Result<Vec<f64>, SyntaxError> {
    cur.expect(&TokKind::LBracket)?;
    let mut out = Vec::new();
    if cur.eat(&TokKind::RBracket) {
        return Ok(out);
    }
    loop {
        let pos = cur.pos();
        match cur.next().map(|t| t.kind) {
            Some(TokKind::Real(x)) => out.push(x),
            Some(TokKind::Int(i)) => out.push(i as f64),
            _ => return Err(SyntaxError::at(pos, "expected numeric weight")),
        }
        if cur.eat(&TokKind::RBracket) {
            return Ok(out);
        }
        cur.expect(&TokKind::Comma)?;
    }
}
