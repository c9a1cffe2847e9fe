//! Per-world query evaluation for a select-project-join-aggregate fragment
//! with a small SQL-like surface syntax.
//!
//! Queries are deterministic functions from instances to instances. Input
//! multiplicities are ignored (evaluation is over the support) and the
//! output is always a set-mode instance over a single relation named
//! `result`. Aggregates: AVG and SUM produce reals, COUNT produces an
//! integer, MIN and MAX keep the column type. Groups are those present in
//! the input, so an empty input produces no rows even for a global
//! aggregate.
//!
//! Equality on real attributes is exact double equality. Two independently
//! sampled continuous values almost never collide, so a selection like
//! `WHERE a = b` on continuous data is usually the empty query; it is still
//! well defined and occasionally exactly what a test wants.

use std::collections::{BTreeMap, BTreeSet};

use crate::event::Cmp;
use crate::fact::{Fact, Instance};
use crate::lex::{Cursor, SyntaxError, TokKind};
use crate::schema::{AttrSchema, RelationKind, RelationSchema, Schema};
use crate::value::{AttrType, Value};

pub const RESULT_RELATION: &str = "result";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("unknown attribute {0}")]
    UnknownAttribute(String),
    #[error("attribute {0} is ambiguous here")]
    AmbiguousAttribute(String),
    #[error("{agg} needs a numeric attribute, {attr} is {ty}")]
    NonNumericAggregate { agg: &'static str, attr: String, ty: AttrType },
    #[error("attribute {0} is selected but not grouped")]
    UngroupedAttribute(String),
    #[error("grouping attribute {0} is not selected")]
    UnselectedGroupAttribute(String),
    #[error("cannot compare {left} with {right}")]
    ComparisonTypeClash { left: AttrType, right: AttrType },
    #[error("ordered comparison on non-numeric attribute {0}")]
    OrderOnNonNumeric(String),
    #[error("duplicate output attribute {0}")]
    DuplicateOutputAttribute(String),
    #[error("world does not fit the query: {0}")]
    SchemaMismatch(String),
    #[error("aggregate over {0} produced a non-finite value")]
    NonFiniteAggregate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Avg,
    Sum,
    Count,
    Min,
    Max,
}

impl Aggregate {
    pub fn name(self) -> &'static str {
        match self {
            Aggregate::Avg => "avg",
            Aggregate::Sum => "sum",
            Aggregate::Count => "count",
            Aggregate::Min => "min",
            Aggregate::Max => "max",
        }
    }

    fn from_ident(name: &str) -> Option<Aggregate> {
        match name.to_ascii_lowercase().as_str() {
            "avg" => Some(Aggregate::Avg),
            "sum" => Some(Aggregate::Sum),
            "count" => Some(Aggregate::Count),
            "min" => Some(Aggregate::Min),
            "max" => Some(Aggregate::Max),
            _ => None,
        }
    }
}

/// Condition over one row, with columns referenced by index.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    AttrConst { col: usize, cmp: Cmp, value: Value },
    AttrAttr { left: usize, cmp: Cmp, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryPlan {
    Scan {
        relation: String,
        arity: usize,
    },
    Select {
        input: Box<QueryPlan>,
        conditions: Vec<Condition>,
    },
    Project {
        input: Box<QueryPlan>,
        cols: Vec<usize>,
    },
    Join {
        left: Box<QueryPlan>,
        right: Box<QueryPlan>,
        on: Vec<(usize, usize)>,
    },
    GroupAggregate {
        input: Box<QueryPlan>,
        group: Vec<usize>,
        agg: Option<(Aggregate, usize)>,
    },
    Union {
        left: Box<QueryPlan>,
        right: Box<QueryPlan>,
    },
}

/// A validated plan together with its output relation schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub plan: QueryPlan,
    pub output: RelationSchema,
}

impl Query {
    /// Schema holding only the output relation, for validating events over
    /// query results.
    pub fn output_schema(&self) -> Schema {
        Schema::new(vec![self.output.clone()]).expect("output schema is valid by construction")
    }
}

#[derive(Clone)]
struct Columns {
    names: Vec<String>,
    types: Vec<AttrType>,
}

impl Columns {
    fn resolve(&self, attr: &str) -> Result<usize, QueryError> {
        let mut hits = self.names.iter().enumerate().filter(|(_, n)| n.as_str() == attr);
        match (hits.next(), hits.next()) {
            (Some((i, _)), None) => Ok(i),
            (Some(_), Some(_)) => Err(QueryError::AmbiguousAttribute(attr.to_string())),
            (None, _) => Err(QueryError::UnknownAttribute(attr.to_string())),
        }
    }
}

enum SelectItem {
    Attr { name: String, out: Option<String> },
    Agg { agg: Aggregate, attr: String, out: Option<String> },
}

struct ParsedQuery {
    items: Vec<SelectItem>,
    relations: Vec<String>,
    conditions: Vec<RawCondition>,
    group_by: Vec<String>,
}

struct RawCondition {
    attr: String,
    cmp: Cmp,
    rhs: RawRhs,
}

enum RawRhs {
    Const(Value),
    Attr(String),
}

fn parse_cmp(cur: &mut Cursor) -> Result<Cmp, SyntaxError> {
    let pos = cur.pos();
    let cmp = match cur.peek() {
        Some(TokKind::Eq) => Cmp::Eq,
        Some(TokKind::Ne) => Cmp::Ne,
        Some(TokKind::Lt) => Cmp::Lt,
        Some(TokKind::Le) => Cmp::Le,
        Some(TokKind::Gt) => Cmp::Gt,
        Some(TokKind::Ge) => Cmp::Ge,
        _ => return Err(SyntaxError::at(pos, "expected a comparison operator")),
    };
    cur.next();
    Ok(cmp)
}

fn parse_literal(cur: &mut Cursor) -> Result<Option<Value>, SyntaxError> {
    let negative = if matches!(cur.peek(), Some(TokKind::Minus)) {
        cur.next();
        true
    } else {
        false
    };
    let v = match cur.peek() {
        Some(TokKind::Int(i)) => Value::Integer(if negative { -i } else { *i }),
        Some(TokKind::Real(x)) => {
            let x = if negative { -x } else { *x };
            Value::real(x).map_err(|e| SyntaxError::at(cur.pos(), e.to_string()))?
        }
        Some(TokKind::Str(_)) => {
            if negative {
                return Err(SyntaxError::at(cur.pos(), "expected a number after -"));
            }
            match cur.next().map(|t| t.kind) {
                Some(TokKind::Str(s)) => return Ok(Some(Value::String(s))),
                _ => unreachable!(),
            }
        }
        Some(TokKind::Ident(w)) if w == "true" || w == "false" => {
            if negative {
                return Err(SyntaxError::at(cur.pos(), "expected a number after -"));
            }
            let b = w == "true";
            cur.next();
            return Ok(Some(Value::Boolean(b)));
        }
        _ => {
            if negative {
                return Err(SyntaxError::at(cur.pos(), "expected a number after -"));
            }
            return Ok(None);
        }
    };
    cur.next();
    Ok(Some(v))
}

fn parse_surface(text: &str) -> Result<ParsedQuery, SyntaxError> {
    let mut cur = Cursor::new(text)?;
    cur.expect_kw("select")?;

    let mut items = Vec::new();
    loop {
        let name = cur.expect_ident("an attribute or aggregate")?.0;
        if let Some(agg) = Aggregate::from_ident(&name) {
            if cur.eat(&TokKind::LParen) {
                let attr = cur.expect_ident("an attribute name")?.0;
                cur.expect(&TokKind::RParen)?;
                let out = if cur.eat_kw("as") {
                    Some(cur.expect_ident("an output name")?.0)
                } else {
                    None
                };
                items.push(SelectItem::Agg { agg, attr, out });
                if cur.eat(&TokKind::Comma) {
                    continue;
                }
                break;
            }
        }
        let out = if cur.eat_kw("as") {
            Some(cur.expect_ident("an output name")?.0)
        } else {
            None
        };
        items.push(SelectItem::Attr { name, out });
        if !cur.eat(&TokKind::Comma) {
            break;
        }
    }

    cur.expect_kw("from")?;
    let mut relations = vec![cur.expect_ident("a relation name")?.0];
    while cur.eat(&TokKind::Comma) {
        relations.push(cur.expect_ident("a relation name")?.0);
    }

    let mut conditions = Vec::new();
    if cur.eat_kw("where") {
        loop {
            let attr = cur.expect_ident("an attribute name")?.0;
            let cmp = parse_cmp(&mut cur)?;
            let rhs = match parse_literal(&mut cur)? {
                Some(v) => RawRhs::Const(v),
                None => RawRhs::Attr(cur.expect_ident("an attribute or literal")?.0),
            };
            conditions.push(RawCondition { attr, cmp, rhs });
            if !cur.eat_kw("and") {
                break;
            }
        }
    }

    let mut group_by = Vec::new();
    if cur.eat_kw("group") {
        cur.expect_kw("by")?;
        group_by.push(cur.expect_ident("an attribute name")?.0);
        while cur.eat(&TokKind::Comma) {
            group_by.push(cur.expect_ident("an attribute name")?.0);
        }
    }

    if !cur.at_end() {
        return Err(cur.error("unexpected input after the query"));
    }
    Ok(ParsedQuery { items, relations, conditions, group_by })
}

fn numeric(ty: AttrType) -> bool {
    matches!(ty, AttrType::Real | AttrType::Integer)
}

fn build_condition(cols: &Columns, raw: &RawCondition) -> Result<Condition, QueryError> {
    let col = cols.resolve(&raw.attr)?;
    let lty = cols.types[col];
    match &raw.rhs {
        RawRhs::Const(v) => {
            let v = match (lty, v) {
                (AttrType::Real, Value::Integer(i)) => Value::Real(*i as f64),
                _ => v.clone(),
            };
            if raw.cmp.is_order() {
                if !numeric(lty) {
                    return Err(QueryError::OrderOnNonNumeric(raw.attr.clone()));
                }
                if !numeric(v.type_of()) {
                    return Err(QueryError::ComparisonTypeClash { left: lty, right: v.type_of() });
                }
            } else if v.type_of() != lty {
                return Err(QueryError::ComparisonTypeClash { left: lty, right: v.type_of() });
            }
            Ok(Condition::AttrConst { col, cmp: raw.cmp, value: v })
        }
        RawRhs::Attr(name) => {
            let right = cols.resolve(name)?;
            let rty = cols.types[right];
            if raw.cmp.is_order() {
                if !numeric(lty) {
                    return Err(QueryError::OrderOnNonNumeric(raw.attr.clone()));
                }
                if !numeric(rty) {
                    return Err(QueryError::OrderOnNonNumeric(name.clone()));
                }
            } else if lty != rty && !(numeric(lty) && numeric(rty)) {
                return Err(QueryError::ComparisonTypeClash { left: lty, right: rty });
            }
            Ok(Condition::AttrAttr { left: col, cmp: raw.cmp, right })
        }
    }
}

/// Parses and validates a query against the schema, resolving the output
/// relation (always named `result`).
pub fn parse_query(text: &str, schema: &Schema) -> Result<Query, QueryError> {
    let parsed = parse_surface(text)?;

    let mut plan: Option<QueryPlan> = None;
    let mut cols = Columns { names: Vec::new(), types: Vec::new() };
    for rel_name in &parsed.relations {
        let rel = schema
            .relation(rel_name)
            .ok_or_else(|| QueryError::UnknownRelation(rel_name.clone()))?;
        let scan = QueryPlan::Scan { relation: rel.name.clone(), arity: rel.arity() };
        for a in &rel.attrs {
            cols.names.push(a.name.clone());
            cols.types.push(a.ty);
        }
        plan = Some(match plan {
            None => scan,
            Some(p) => QueryPlan::Join { left: Box::new(p), right: Box::new(scan), on: vec![] },
        });
    }
    let mut plan = plan.expect("at least one relation parsed");

    if !parsed.conditions.is_empty() {
        let conditions = parsed
            .conditions
            .iter()
            .map(|raw| build_condition(&cols, raw))
            .collect::<Result<Vec<_>, _>>()?;
        plan = QueryPlan::Select { input: Box::new(plan), conditions };
    }

    let mut out_attrs: Vec<AttrSchema> = Vec::new();
    let mut plain: Vec<(usize, String)> = Vec::new();
    let mut agg: Option<(Aggregate, usize)> = None;
    for item in &parsed.items {
        match item {
            SelectItem::Attr { name, out } => {
                let col = cols.resolve(name)?;
                let out_name = out.clone().unwrap_or_else(|| name.clone());
                plain.push((col, name.clone()));
                out_attrs.push(AttrSchema::new(out_name, cols.types[col]));
            }
            SelectItem::Agg { agg: a, attr, out } => {
                let col = cols.resolve(attr)?;
                let ty = cols.types[col];
                if matches!(a, Aggregate::Avg | Aggregate::Sum) && !numeric(ty) {
                    return Err(QueryError::NonNumericAggregate {
                        agg: a.name(),
                        attr: attr.clone(),
                        ty,
                    });
                }
                if agg.is_some() {
                    return Err(QueryError::SchemaMismatch(
                        "at most one aggregate per query".into(),
                    ));
                }
                agg = Some((*a, col));
                let out_name =
                    out.clone().unwrap_or_else(|| format!("{}_{}", a.name(), attr));
                let out_ty = match a {
                    Aggregate::Avg | Aggregate::Sum => AttrType::Real,
                    Aggregate::Count => AttrType::Integer,
                    Aggregate::Min | Aggregate::Max => ty,
                };
                out_attrs.push(AttrSchema::new(out_name, out_ty));
            }
        }
    }

    if agg.is_some() || !parsed.group_by.is_empty() {
        for name in &parsed.group_by {
            if !plain.iter().any(|(_, n)| n == name) {
                return Err(QueryError::UnselectedGroupAttribute(name.clone()));
            }
        }
        for (_, name) in &plain {
            if !parsed.group_by.iter().any(|n| n == name) {
                return Err(QueryError::UngroupedAttribute(name.clone()));
            }
        }
        // Aggregate output goes last; reorder the schema to match
        // (group columns in selection order, then the aggregate).
        let group: Vec<usize> = plain.iter().map(|(c, _)| *c).collect();
        let mut attrs: Vec<AttrSchema> = Vec::new();
        let mut agg_attr = None;
        for (item, schema_attr) in parsed.items.iter().zip(&out_attrs) {
            match item {
                SelectItem::Attr { .. } => attrs.push(schema_attr.clone()),
                SelectItem::Agg { .. } => agg_attr = Some(schema_attr.clone()),
            }
        }
        if let Some(a) = agg_attr {
            attrs.push(a);
        }
        out_attrs = attrs;
        plan = QueryPlan::GroupAggregate { input: Box::new(plan), group, agg };
    } else {
        let colsel: Vec<usize> = plain.iter().map(|(c, _)| *c).collect();
        plan = QueryPlan::Project { input: Box::new(plan), cols: colsel };
    }

    let mut seen = BTreeSet::new();
    for a in &out_attrs {
        if !seen.insert(a.name.clone()) {
            return Err(QueryError::DuplicateOutputAttribute(a.name.clone()));
        }
    }

    let output = RelationSchema {
        name: RESULT_RELATION.to_string(),
        kind: RelationKind::Intensional,
        attrs: out_attrs,
    };
    Ok(Query { plan, output })
}

fn condition_holds(cond: &Condition, row: &[Value]) -> bool {
    let (a, cmp, b) = match cond {
        Condition::AttrConst { col, cmp, value } => (&row[*col], *cmp, value),
        Condition::AttrAttr { left, cmp, right } => (&row[*left], *cmp, &row[*right]),
    };
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => match cmp {
            Cmp::Eq => x == y,
            Cmp::Ne => x != y,
            Cmp::Lt => x < y,
            Cmp::Le => x <= y,
            Cmp::Gt => x > y,
            Cmp::Ge => x >= y,
        },
        _ => cmp.holds(a, b),
    }
}

fn eval_plan(plan: &QueryPlan, world: &Instance) -> Result<BTreeSet<Vec<Value>>, QueryError> {
    match plan {
        QueryPlan::Scan { relation, arity } => {
            let mut rows = BTreeSet::new();
            for fact in world.support() {
                if &fact.relation == relation {
                    if fact.values.len() != *arity {
                        return Err(QueryError::SchemaMismatch(format!(
                            "fact {fact} has arity {}, expected {arity}",
                            fact.values.len()
                        )));
                    }
                    rows.insert(fact.values.clone());
                }
            }
            Ok(rows)
        }
        QueryPlan::Select { input, conditions } => {
            let rows = eval_plan(input, world)?;
            Ok(rows
                .into_iter()
                .filter(|row| conditions.iter().all(|c| condition_holds(c, row)))
                .collect())
        }
        QueryPlan::Project { input, cols } => {
            let rows = eval_plan(input, world)?;
            Ok(rows
                .into_iter()
                .map(|row| cols.iter().map(|&c| row[c].clone()).collect())
                .collect())
        }
        QueryPlan::Join { left, right, on } => {
            let lrows = eval_plan(left, world)?;
            let rrows = eval_plan(right, world)?;
            let mut rows = BTreeSet::new();
            for l in &lrows {
                for r in &rrows {
                    if on.iter().all(|&(lc, rc)| l[lc] == r[rc]) {
                        let mut row = l.clone();
                        row.extend(r.iter().cloned());
                        rows.insert(row);
                    }
                }
            }
            Ok(rows)
        }
        QueryPlan::GroupAggregate { input, group, agg } => {
            let rows = eval_plan(input, world)?;
            let mut groups: BTreeMap<Vec<Value>, Vec<Vec<Value>>> = BTreeMap::new();
            for row in rows {
                let key: Vec<Value> = group.iter().map(|&c| row[c].clone()).collect();
                groups.entry(key).or_default().push(row);
            }
            let mut out = BTreeSet::new();
            for (key, members) in groups {
                let mut row = key;
                if let Some((a, col)) = agg {
                    row.push(aggregate(*a, *col, &members)?);
                }
                out.insert(row);
            }
            Ok(out)
        }
        QueryPlan::Union { left, right } => {
            let mut rows = eval_plan(left, world)?;
            rows.extend(eval_plan(right, world)?);
            Ok(rows)
        }
    }
}

fn aggregate(agg: Aggregate, col: usize, members: &[Vec<Value>]) -> Result<Value, QueryError> {
    match agg {
        Aggregate::Count => Ok(Value::Integer(members.len() as i64)),
        Aggregate::Min => Ok(members.iter().map(|r| &r[col]).min().unwrap().clone()),
        Aggregate::Max => Ok(members.iter().map(|r| &r[col]).max().unwrap().clone()),
        Aggregate::Sum | Aggregate::Avg => {
            let mut sum = 0.0f64;
            for r in members {
                sum += r[col].as_f64().ok_or_else(|| {
                    QueryError::SchemaMismatch("aggregate over non-numeric value".into())
                })?;
            }
            let x = if agg == Aggregate::Avg { sum / members.len() as f64 } else { sum };
            Value::real(x).map_err(|_| QueryError::NonFiniteAggregate(agg.name().into()))
        }
    }
}

/// Applies the query to one world, producing a set-mode instance over the
/// `result` relation.
pub fn eval_query(query: &Query, world: &Instance) -> Result<Instance, QueryError> {
    let rows = eval_plan(&query.plan, world)?;
    let mut out = Instance::set();
    for row in rows {
        out.insert(Fact::new(RESULT_RELATION, row));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::RelationKind;

    fn temp_schema() -> Schema {
        Schema::new(vec![RelationSchema {
            name: "Temp".into(),
            kind: RelationKind::Extensional,
            attrs: vec![
                AttrSchema::new("room", AttrType::Integer),
                AttrSchema::new("time", AttrType::String),
                AttrSchema::new("celsius", AttrType::Real),
            ],
        }])
        .unwrap()
    }

    fn temp_world() -> Instance {
        let mut w = Instance::set();
        let rows: [(i64, &str, f64); 5] = [
            (4108, "2021-01-05 08:00", 20.2),
            (4108, "2021-01-05 14:00", 21.8),
            (4109, "2021-01-05 08:00", 22.1),
            (4109, "2021-01-05 14:00", 22.3),
            (4109, "2021-01-06 08:00", 21.9),
        ];
        for (room, time, c) in rows {
            w.insert(Fact::new(
                "Temp",
                vec![
                    Value::Integer(room),
                    Value::String(time.into()),
                    Value::real(c).unwrap(),
                ],
            ));
        }
        w
    }

    fn rows_of(instance: &Instance) -> Vec<Vec<Value>> {
        instance.support().map(|f| f.values.clone()).collect()
    }

    #[test]
    fn group_average_per_room() {
        let schema = temp_schema();
        let q = parse_query(
            "SELECT room, AVG(celsius) FROM Temp GROUP BY room",
            &schema,
        )
        .unwrap();
        assert_eq!(q.output.attrs[1].name, "avg_celsius");
        let out = eval_query(&q, &temp_world()).unwrap();
        let rows = rows_of(&out);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][0], Value::Integer(4108));
        assert_eq!(rows[0][1], Value::Real(21.0));
        assert_eq!(rows[1][0], Value::Integer(4109));
        let Value::Real(avg) = rows[1][1] else { panic!("real expected") };
        assert!((avg - 22.1).abs() < 1e-12);
    }

    #[test]
    fn diagonal_selection() {
        let schema = Schema::new(vec![RelationSchema {
            name: "R".into(),
            kind: RelationKind::Extensional,
            attrs: vec![
                AttrSchema::new("A", AttrType::Integer),
                AttrSchema::new("B", AttrType::Integer),
            ],
        }])
        .unwrap();
        let q = parse_query("SELECT A, B FROM R WHERE A = B", &schema).unwrap();
        let mut w = Instance::set();
        w.insert(Fact::new("R", vec![Value::Integer(1), Value::Integer(1)]));
        w.insert(Fact::new("R", vec![Value::Integer(1), Value::Integer(2)]));
        let out = eval_query(&q, &w).unwrap();
        assert_eq!(rows_of(&out), vec![vec![Value::Integer(1), Value::Integer(1)]]);
    }

    #[test]
    fn unknown_attribute_rejected() {
        let err = parse_query("SELECT z FROM Temp", &temp_schema()).unwrap_err();
        assert_eq!(err, QueryError::UnknownAttribute("z".into()));
    }

    #[test]
    fn nonnumeric_average_rejected() {
        let err = parse_query("SELECT AVG(time) FROM Temp", &temp_schema()).unwrap_err();
        assert!(matches!(err, QueryError::NonNumericAggregate { agg: "avg", .. }));
    }

    #[test]
    fn ungrouped_attribute_rejected() {
        let err =
            parse_query("SELECT room, time, AVG(celsius) FROM Temp GROUP BY room", &temp_schema())
                .unwrap_err();
        assert_eq!(err, QueryError::UngroupedAttribute("time".into()));
    }

    #[test]
    fn global_aggregate_on_empty_input_is_empty() {
        let q = parse_query("SELECT COUNT(room) FROM Temp", &temp_schema()).unwrap();
        let out = eval_query(&q, &Instance::set()).unwrap();
        assert!(out.is_empty());
        let out = eval_query(&q, &temp_world()).unwrap();
        assert_eq!(rows_of(&out), vec![vec![Value::Integer(5)]]);
    }

    #[test]
    fn where_and_projection_with_rename() {
        let q = parse_query(
            "SELECT room AS r FROM Temp WHERE celsius > 22 AND room >= 4109",
            &temp_schema(),
        )
        .unwrap();
        assert_eq!(q.output.attrs[0].name, "r");
        let out = eval_query(&q, &temp_world()).unwrap();
        assert_eq!(rows_of(&out), vec![vec![Value::Integer(4109)]]);
    }

    #[test]
    fn cross_join_matches_nested_loop_oracle() {
        let schema = Schema::new(vec![
            RelationSchema {
                name: "R".into(),
                kind: RelationKind::Extensional,
                attrs: vec![
                    AttrSchema::new("a", AttrType::Integer),
                    AttrSchema::new("b", AttrType::Integer),
                ],
            },
            RelationSchema {
                name: "S".into(),
                kind: RelationKind::Extensional,
                attrs: vec![
                    AttrSchema::new("c", AttrType::Integer),
                    AttrSchema::new("d", AttrType::Integer),
                ],
            },
        ])
        .unwrap();
        let q = parse_query("SELECT a, d FROM R, S WHERE b = c", &schema).unwrap();
        let mut w = Instance::set();
        let r_rows = [(1, 10), (2, 20), (3, 10)];
        let s_rows = [(10, 7), (20, 8), (30, 9)];
        for (a, b) in r_rows {
            w.insert(Fact::new("R", vec![Value::Integer(a), Value::Integer(b)]));
        }
        for (c, d) in s_rows {
            w.insert(Fact::new("S", vec![Value::Integer(c), Value::Integer(d)]));
        }
        let out = eval_query(&q, &w).unwrap();

        let mut oracle = BTreeSet::new();
        for (a, b) in r_rows {
            for (c, d) in s_rows {
                if b == c {
                    oracle.insert(vec![Value::Integer(a), Value::Integer(d)]);
                }
            }
        }
        assert_eq!(rows_of(&out), oracle.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn duplicate_output_names_rejected() {
        let err = parse_query("SELECT room, room FROM Temp", &temp_schema()).unwrap_err();
        assert_eq!(err, QueryError::DuplicateOutputAttribute("room".into()));
    }

    #[test]
    fn bag_world_input_is_deduplicated() {
        let q = parse_query("SELECT room, COUNT(celsius) FROM Temp GROUP BY room", &temp_schema())
            .unwrap();
        let mut w = Instance::bag();
        let f = Fact::new(
            "Temp",
            vec![
                Value::Integer(4108),
                Value::String("t".into()),
                Value::Real(20.0),
            ],
        );
        w.insert(f.clone());
        w.insert(f);
        let out = eval_query(&q, &w).unwrap();
        assert_eq!(
            rows_of(&out),
            vec![vec![Value::Integer(4108), Value::Integer(1)]]
        );
    }

    #[test]
    fn integer_literal_compares_against_real_column() {
        let q = parse_query("SELECT celsius FROM Temp WHERE celsius < 21", &temp_schema())
            .unwrap();
        let out = eval_query(&q, &temp_world()).unwrap();
        assert_eq!(rows_of(&out), vec![vec![Value::Real(20.2)]]);
    }
}
