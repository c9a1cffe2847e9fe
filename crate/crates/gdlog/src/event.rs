//! Counting events over instances.
//!
//! The primitive observable is "how many facts of relation R satisfy a
//! conjunction of per-attribute constraints", compared against a threshold.
//! Boolean combinations of those counting atoms form [`EventExpr`], the event
//! language estimates are computed for. Counts respect multiplicities, so
//! events see bag instances as bags.
//!
//! Concrete syntax, used by the CLI and tests:
//!
//! ```text
//! count(Temp where room = "4108" and celsius >= 20 and celsius <= 22) >= 1
//!   and not count(Temp where room = "4109") = 0
//! ```

use crate::fact::{Fact, Instance};
use crate::lex::{Cursor, SyntaxError, TokKind};
use crate::schema::{Schema, SchemaError};
use crate::value::{AttrType, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn holds<T: Ord + ?Sized>(self, left: &T, right: &T) -> bool {
        match self {
            Cmp::Eq => left == right,
            Cmp::Ne => left != right,
            Cmp::Lt => left < right,
            Cmp::Le => left <= right,
            Cmp::Gt => left > right,
            Cmp::Ge => left >= right,
        }
    }

    pub fn is_order(self) -> bool {
        matches!(self, Cmp::Lt | Cmp::Le | Cmp::Gt | Cmp::Ge)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Ne => "!=",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

/// Right-hand side of a constraint as written: a constant or another
/// attribute of the same relation.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintRhs {
    Const(Value),
    Attr(String),
}

/// One constraint before schema resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct RawConstraint {
    pub attr: String,
    pub cmp: Cmp,
    pub rhs: ConstraintRhs,
}

#[derive(Debug, Clone, PartialEq)]
enum ResolvedRhs {
    Const(Value),
    Attr(usize),
}

#[derive(Debug, Clone, PartialEq)]
struct Constraint {
    attr: usize,
    cmp: Cmp,
    rhs: ResolvedRhs,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EventError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("order comparison {cmp} needs a numeric attribute, {relation}.{attr} is {ty}")]
    OrderOnNonNumeric {
        relation: String,
        attr: String,
        cmp: &'static str,
        ty: AttrType,
    },
    #[error("attribute-to-attribute constraints support only = and !=, got {0}")]
    OrderBetweenAttrs(&'static str),
    #[error("cannot compare {relation}.{left} ({left_ty}) with {relation}.{right} ({right_ty})")]
    AttrTypeClash {
        relation: String,
        left: String,
        left_ty: AttrType,
        right: String,
        right_ty: AttrType,
    },
    #[error("count threshold must be a nonnegative integer, got {0}")]
    NegativeCount(i64),
}

/// A conjunction of constraints over the facts of one relation, with
/// attribute positions resolved against a schema at build time.
#[derive(Debug, Clone, PartialEq)]
pub struct FactPredicate {
    relation: String,
    arity: usize,
    constraints: Vec<Constraint>,
}

impl FactPredicate {
    /// Resolves attribute names and checks operand types. Integer constants
    /// are widened when compared against a real attribute; order comparisons
    /// are only allowed on real and integer attributes; attribute-to-attribute
    /// constraints must relate attributes of equal type and may only use
    /// `=` and `!=`.
    pub fn build(
        schema: &Schema,
        relation: &str,
        raw: Vec<RawConstraint>,
    ) -> Result<FactPredicate, EventError> {
        let rel = schema.require_relation(relation)?;
        let mut constraints = Vec::with_capacity(raw.len());
        for c in raw {
            let attr = rel.attr_index(&c.attr).ok_or_else(|| SchemaError::UnknownAttribute {
                relation: relation.to_string(),
                attr: c.attr.clone(),
            })?;
            let attr_ty = rel.attrs[attr].ty;
            let rhs = match c.rhs {
                ConstraintRhs::Const(v) => {
                    let v = match (attr_ty, v) {
                        (AttrType::Real, Value::Integer(i)) => Value::Real(i as f64),
                        (_, v) => v,
                    };
                    if v.type_of() != attr_ty {
                        return Err(SchemaError::TypeMismatch {
                            relation: relation.to_string(),
                            position: attr,
                            attr: c.attr.clone(),
                            expected: attr_ty,
                            got: v.type_of(),
                        }
                        .into());
                    }
                    if c.cmp.is_order()
                        && !matches!(attr_ty, AttrType::Real | AttrType::Integer)
                    {
                        return Err(EventError::OrderOnNonNumeric {
                            relation: relation.to_string(),
                            attr: c.attr.clone(),
                            cmp: c.cmp.symbol(),
                            ty: attr_ty,
                        });
                    }
                    ResolvedRhs::Const(v)
                }
                ConstraintRhs::Attr(name) => {
                    if c.cmp.is_order() {
                        return Err(EventError::OrderBetweenAttrs(c.cmp.symbol()));
                    }
                    let other =
                        rel.attr_index(&name).ok_or_else(|| SchemaError::UnknownAttribute {
                            relation: relation.to_string(),
                            attr: name.clone(),
                        })?;
                    let other_ty = rel.attrs[other].ty;
                    if other_ty != attr_ty {
                        return Err(EventError::AttrTypeClash {
                            relation: relation.to_string(),
                            left: c.attr.clone(),
                            left_ty: attr_ty,
                            right: name,
                            right_ty: other_ty,
                        });
                    }
                    ResolvedRhs::Attr(other)
                }
            };
            constraints.push(Constraint { attr, cmp: c.cmp, rhs });
        }
        Ok(FactPredicate { relation: relation.to_string(), arity: rel.arity(), constraints })
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    /// Whether a fact satisfies every constraint. Facts of other relations
    /// (or of a different arity, which only happens when predicate and
    /// instance were built against different schemas) never match.
    pub fn matches(&self, fact: &Fact) -> bool {
        if fact.relation != self.relation || fact.values.len() != self.arity {
            return false;
        }
        self.constraints.iter().all(|c| {
            let left = &fact.values[c.attr];
            let right = match &c.rhs {
                ResolvedRhs::Const(v) => v,
                ResolvedRhs::Attr(i) => &fact.values[*i],
            };
            c.cmp.holds(left, right)
        })
    }
}

/// `count(pred) CMP n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingAtom {
    pub pred: FactPredicate,
    pub cmp: Cmp,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventExpr {
    Atom(CountingAtom),
    Not(Box<EventExpr>),
    And(Box<EventExpr>, Box<EventExpr>),
    Or(Box<EventExpr>, Box<EventExpr>),
}

impl EventExpr {
    pub fn atom(pred: FactPredicate, cmp: Cmp, n: u64) -> EventExpr {
        EventExpr::Atom(CountingAtom { pred, cmp, n })
    }
}

/// Total multiplicity of the facts satisfying `pred`.
pub fn multiplicity(instance: &Instance, pred: &FactPredicate) -> u64 {
    instance
        .iter_counted()
        .filter(|(f, _)| pred.matches(f))
        .map(|(_, c)| c)
        .sum()
}

pub fn event_holds(instance: &Instance, event: &EventExpr) -> bool {
    match event {
        EventExpr::Atom(a) => a.cmp.holds(&multiplicity(instance, &a.pred), &a.n),
        EventExpr::Not(e) => !event_holds(instance, e),
        EventExpr::And(l, r) => event_holds(instance, l) && event_holds(instance, r),
        EventExpr::Or(l, r) => event_holds(instance, l) || event_holds(instance, r),
    }
}

/// Parses the event syntax shown in the module docs against a schema.
pub fn parse_event(text: &str, schema: &Schema) -> Result<EventExpr, EventError> {
    let mut cur = Cursor::new(text)?;
    let e = parse_or(&mut cur, schema)?;
    if !cur.at_end() {
        return Err(cur.error("expected end of event").into());
    }
    Ok(e)
}

fn parse_or(cur: &mut Cursor, schema: &Schema) -> Result<EventExpr, EventError> {
    let mut left = parse_and(cur, schema)?;
    while cur.eat_kw("or") {
        let right = parse_and(cur, schema)?;
        left = EventExpr::Or(Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn parse_and(cur: &mut Cursor, schema: &Schema) -> Result<EventExpr, EventError> {
    let mut left = parse_not(cur, schema)?;
    while cur.eat_kw("and") {
        let right = parse_not(cur, schema)?;
        left = EventExpr::And(Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn parse_not(cur: &mut Cursor, schema: &Schema) -> Result<EventExpr, EventError> {
    if cur.eat_kw("not") {
        return Ok(EventExpr::Not(Box::new(parse_not(cur, schema)?)));
    }
    if cur.eat(&TokKind::LParen) {
        let e = parse_or(cur, schema)?;
        cur.expect(&TokKind::RParen)?;
        return Ok(e);
    }
    parse_counting_atom(cur, schema)
}

fn parse_counting_atom(cur: &mut Cursor, schema: &Schema) -> Result<EventExpr, EventError> {
    cur.expect_kw("count")?;
    cur.expect(&TokKind::LParen)?;
    let (relation, _) = cur.expect_ident("relation name")?;
    let mut raw = Vec::new();
    if cur.eat_kw("where") {
        loop {
            raw.push(parse_constraint(cur)?);
            if !cur.eat_kw("and") {
                break;
            }
        }
    }
    cur.expect(&TokKind::RParen)?;
    let cmp = parse_cmp(cur)?;
    let pos = cur.pos();
    let n = match cur.next().map(|t| t.kind) {
        Some(TokKind::Int(i)) => {
            if i < 0 {
                return Err(EventError::NegativeCount(i));
            }
            i as u64
        }
        _ => return Err(SyntaxError::at(pos, "expected count threshold").into()),
    };
    let pred = FactPredicate::build(schema, &relation, raw)?;
    Ok(EventExpr::atom(pred, cmp, n))
}

fn parse_constraint(cur: &mut Cursor) -> Result<RawConstraint, EventError> {
    let (attr, _) = cur.expect_ident("attribute name")?;
    let cmp = parse_cmp(cur)?;
    let pos = cur.pos();
    let negative = cur.eat(&TokKind::Minus);
    let rhs = match cur.next().map(|t| t.kind) {
        Some(TokKind::Int(i)) => {
            ConstraintRhs::Const(Value::Integer(if negative { -i } else { i }))
        }
        Some(TokKind::Real(x)) => {
            let x = if negative { -x } else { x };
            ConstraintRhs::Const(Value::real(x).expect("lexer produces finite reals"))
        }
        Some(TokKind::Str(s)) if !negative => ConstraintRhs::Const(Value::String(s)),
        Some(TokKind::Ident(s)) if !negative => match s.as_str() {
            "true" => ConstraintRhs::Const(Value::Boolean(true)),
            "false" => ConstraintRhs::Const(Value::Boolean(false)),
            _ => ConstraintRhs::Attr(s),
        },
        _ => return Err(SyntaxError::at(pos, "expected constraint operand").into()),
    };
    Ok(RawConstraint { attr, cmp, rhs })
}

fn parse_cmp(cur: &mut Cursor) -> Result<Cmp, EventError> {
    let cmp = match cur.peek() {
        Some(TokKind::Eq) => Cmp::Eq,
        Some(TokKind::Ne) => Cmp::Ne,
        Some(TokKind::Lt) => Cmp::Lt,
        Some(TokKind::Le) => Cmp::Le,
        Some(TokKind::Gt) => Cmp::Gt,
        Some(TokKind::Ge) => Cmp::Ge,
        _ => return Err(cur.error("expected comparison operator").into()),
    };
    cur.next();
    Ok(cmp)
}
