//! Program validation and the compiled form the engine executes.
//!
//! Validation checks safety (every head variable is bound by the body), that
//! head relations are intensional, that every atom and term is well-typed
//! against the schema, and that distribution calls name their parameters
//! correctly. It produces a [`Program`] whose rules carry dense variable
//! indices, canonicalized parameter order and a site index for every
//! distribution call (pre-order across the head, left to right).
//!
//! The firing signature of a rule occurrence under a head-variable
//! assignment is an injective byte encoding: the occurrence id as eight
//! big-endian bytes, then each head variable's value in first-appearance
//! order, each with a type tag (reals as IEEE bits with `-0.0` already
//! canonicalized away, integers big-endian, strings length-prefixed,
//! booleans one byte). Two distinct instantiations never encode alike, which
//! is what lets the once-per-instantiation rule and the per-site random
//! streams work.

use std::collections::HashMap;

use crate::ast::{BodyArg, RawProgram, Rule, Term};
use crate::dist::{validate_params, DistError, DistSpec, FnOp};
use crate::lex::Pos;
use crate::schema::{RelationKind, Schema};
use crate::value::{AttrType, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidateError {
    #[error("unsafe variable {var} in rule head at {pos}")]
    UnsafeVariable { var: String, pos: Pos },
    #[error("head relation {relation} is extensional at {pos}")]
    HeadRelationExtensional { relation: String, pos: Pos },
    #[error("unknown relation {relation} at {pos}")]
    UnknownRelation { relation: String, pos: Pos },
    #[error("relation {relation} expects {expected} arguments, got {got} at {pos}")]
    ArityMismatch {
        relation: String,
        expected: usize,
        got: usize,
        pos: Pos,
    },
    #[error("{context}: expected {expected}, got {got} at {pos}")]
    TypeMismatch {
        context: String,
        expected: AttrType,
        got: AttrType,
        pos: Pos,
    },
    #[error("{dist}: {detail} at {pos}")]
    DistParamArity {
        dist: &'static str,
        detail: String,
        pos: Pos,
    },
    #[error("invalid distribution at {pos}: {source}")]
    BadDistribution { source: DistError, pos: Pos },
}

/// Body argument with interned variables.
#[derive(Debug, Clone, PartialEq)]
pub enum CArg {
    Var(usize),
    Const(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CAtom {
    pub relation: String,
    pub args: Vec<CArg>,
}

/// Head term with interned variables, canonical parameter order and a site
/// index on every distribution call.
#[derive(Debug, Clone, PartialEq)]
pub enum CTerm {
    Const(Value),
    Var(usize),
    Fn(FnOp, Vec<CTerm>),
    Dist {
        spec: DistSpec,
        params: Vec<CTerm>,
        site: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledRule {
    pub head_relation: String,
    pub head_attr_types: Vec<AttrType>,
    pub head_terms: Vec<CTerm>,
    pub body: Vec<CAtom>,
    pub var_names: Vec<String>,
    pub var_types: Vec<AttrType>,
    /// Head variables (indices into `var_names`) in first-appearance order.
    pub head_vars: Vec<usize>,
    pub dist_sites: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleOccurrence {
    pub id: u64,
    pub rule: Rule,
    pub compiled: CompiledRule,
}

/// A validated program bound to its schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub schema: Schema,
    pub occurrences: Vec<RuleOccurrence>,
}

impl Program {
    pub fn dist_site_count(&self) -> u64 {
        self.occurrences.iter().map(|o| o.compiled.dist_sites).sum()
    }

    pub fn is_deterministic(&self) -> bool {
        self.dist_site_count() == 0
    }
}

struct RuleCompiler<'a> {
    schema: &'a Schema,
    pos: Pos,
    var_names: Vec<String>,
    var_types: Vec<AttrType>,
}

impl<'a> RuleCompiler<'a> {
    fn lookup_var(&self, name: &str) -> Option<usize> {
        self.var_names.iter().position(|v| v == name)
    }

    fn compile_body(&mut self, rule: &Rule) -> Result<Vec<CAtom>, ValidateError> {
        let mut out = Vec::with_capacity(rule.body.len());
        for atom in &rule.body {
            let rel = self.schema.relation(&atom.relation).ok_or_else(|| {
                ValidateError::UnknownRelation { relation: atom.relation.clone(), pos: atom.pos }
            })?;
            if atom.args.len() != rel.arity() {
                return Err(ValidateError::ArityMismatch {
                    relation: atom.relation.clone(),
                    expected: rel.arity(),
                    got: atom.args.len(),
                    pos: atom.pos,
                });
            }
            let mut args = Vec::with_capacity(atom.args.len());
            for (arg, attr) in atom.args.iter().zip(&rel.attrs) {
                match arg {
                    BodyArg::Var(name) => {
                        if let Some(i) = self.lookup_var(name) {
                            if self.var_types[i] != attr.ty {
                                return Err(ValidateError::TypeMismatch {
                                    context: format!("variable {name}"),
                                    expected: self.var_types[i],
                                    got: attr.ty,
                                    pos: atom.pos,
                                });
                            }
                            args.push(CArg::Var(i));
                        } else {
                            self.var_names.push(name.clone());
                            self.var_types.push(attr.ty);
                            args.push(CArg::Var(self.var_names.len() - 1));
                        }
                    }
                    BodyArg::Const(v) => {
                        let v = widen(v.clone(), attr.ty);
                        if v.type_of() != attr.ty {
                            return Err(ValidateError::TypeMismatch {
                                context: format!(
                                    "constant {v} at {}.{}",
                                    atom.relation, attr.name
                                ),
                                expected: attr.ty,
                                got: v.type_of(),
                                pos: atom.pos,
                            });
                        }
                        args.push(CArg::Const(v));
                    }
                }
            }
            out.push(CAtom { relation: atom.relation.clone(), args });
        }
        Ok(out)
    }

    fn compile_term(&mut self, term: &Term, site: &mut u64) -> Result<(CTerm, AttrType), ValidateError> {
        match term {
            Term::Const(v) => Ok((CTerm::Const(v.clone()), v.type_of())),
            Term::Var(name) => {
                let i = self.lookup_var(name).ok_or_else(|| ValidateError::UnsafeVariable {
                    var: name.clone(),
                    pos: self.pos,
                })?;
                Ok((CTerm::Var(i), self.var_types[i]))
            }
            Term::Fn(op, args) => {
                let mut cargs = Vec::with_capacity(args.len());
                for a in args {
                    let (c, ty) = self.compile_term(a, site)?;
                    self.require_numeric(&format!("argument of {}", op.name()), ty)?;
                    cargs.push(c);
                }
                Ok((CTerm::Fn(*op, cargs), AttrType::Real))
            }
            Term::Dist { spec, params } => {
                let my_site = *site;
                *site += 1;
                let ordered = self.order_params(spec, params, site)?;
                if let DistSpec::Discrete { .. } = spec {
                    validate_params(spec, &[])
                        .map_err(|source| ValidateError::BadDistribution { source, pos: self.pos })?;
                }
                Ok((
                    CTerm::Dist { spec: spec.clone(), params: ordered, site: my_site },
                    spec.support_type(),
                ))
            }
        }
    }

    /// Reorders named parameters into the family's canonical order, checking
    /// that each expected name appears exactly once.
    fn order_params(
        &mut self,
        spec: &DistSpec,
        params: &[(String, Term)],
        site: &mut u64,
    ) -> Result<Vec<CTerm>, ValidateError> {
        let expected = spec.param_names();
        if params.len() != expected.len() {
            return Err(ValidateError::DistParamArity {
                dist: spec.name(),
                detail: format!("expected {} parameters, got {}", expected.len(), params.len()),
                pos: self.pos,
            });
        }
        let mut ordered = Vec::with_capacity(expected.len());
        for want in expected {
            let mut found = None;
            for (name, t) in params {
                if name == want {
                    if found.is_some() {
                        return Err(ValidateError::DistParamArity {
                            dist: spec.name(),
                            detail: format!("parameter {want} given twice"),
                            pos: self.pos,
                        });
                    }
                    found = Some(t);
                }
            }
            let Some(t) = found else {
                return Err(ValidateError::DistParamArity {
                    dist: spec.name(),
                    detail: format!("missing parameter {want}"),
                    pos: self.pos,
                });
            };
            let (c, ty) = self.compile_term(t, site)?;
            self.require_numeric(&format!("parameter {want} of {}", spec.name()), ty)?;
            ordered.push(c);
        }
        Ok(ordered)
    }

    fn require_numeric(&self, context: &str, ty: AttrType) -> Result<(), ValidateError> {
        if matches!(ty, AttrType::Real | AttrType::Integer) {
            Ok(())
        } else {
            Err(ValidateError::TypeMismatch {
                context: context.to_string(),
                expected: AttrType::Real,
                got: ty,
                pos: self.pos,
            })
        }
    }
}

fn widen(v: Value, target: AttrType) -> Value {
    match (target, v) {
        (AttrType::Real, Value::Integer(i)) => Value::Real(i as f64),
        (_, v) => v,
    }
}

/// Integer results are acceptable where a real is declared; everything else
/// must match exactly.
fn assignable(declared: AttrType, inferred: AttrType) -> bool {
    declared == inferred || (declared == AttrType::Real && inferred == AttrType::Integer)
}

/// Checks one parsed rule against the schema and compiles it.
fn validate_rule(schema: &Schema, rule: &Rule) -> Result<CompiledRule, ValidateError> {
    let head_rel = schema.relation(&rule.head_relation).ok_or_else(|| {
        ValidateError::UnknownRelation { relation: rule.head_relation.clone(), pos: rule.pos }
    })?;
    if head_rel.kind == RelationKind::Extensional {
        return Err(ValidateError::HeadRelationExtensional {
            relation: rule.head_relation.clone(),
            pos: rule.pos,
        });
    }
    if rule.head_terms.len() != head_rel.arity() {
        return Err(ValidateError::ArityMismatch {
            relation: rule.head_relation.clone(),
            expected: head_rel.arity(),
            got: rule.head_terms.len(),
            pos: rule.pos,
        });
    }

    let mut compiler = RuleCompiler {
        schema,
        pos: rule.pos,
        var_names: Vec::new(),
        var_types: Vec::new(),
    };
    let body = compiler.compile_body(rule)?;

    let head_attr_types: Vec<AttrType> = head_rel.attrs.iter().map(|a| a.ty).collect();
    let mut head_terms = Vec::with_capacity(rule.head_terms.len());
    let mut site = 0u64;
    for (term, (attr, declared)) in rule
        .head_terms
        .iter()
        .zip(head_rel.attrs.iter().zip(&head_attr_types))
    {
        let (c, inferred) = compiler.compile_term(term, &mut site)?;
        if !assignable(*declared, inferred) {
            return Err(ValidateError::TypeMismatch {
                context: format!("head attribute {}.{}", rule.head_relation, attr.name),
                expected: *declared,
                got: inferred,
                pos: rule.pos,
            });
        }
        head_terms.push(c);
    }

    let head_vars = rule
        .head_vars()
        .iter()
        .map(|name| compiler.lookup_var(name).expect("head vars were resolved"))
        .collect();

    Ok(CompiledRule {
        head_relation: rule.head_relation.clone(),
        head_attr_types,
        head_terms,
        body,
        var_names: compiler.var_names,
        var_types: compiler.var_types,
        head_vars,
        dist_sites: site,
    })
}

/// Validates every rule and binds the program to the schema.
pub fn validate_program(raw: &RawProgram, schema: &Schema) -> Result<Program, ValidateError> {
    let mut occurrences = Vec::with_capacity(raw.rules.len());
    for (id, rule) in raw.rules.iter().enumerate() {
        let compiled = validate_rule(schema, rule)?;
        occurrences.push(RuleOccurrence { id: id as u64, rule: rule.clone(), compiled });
    }
    Ok(Program { schema: schema.clone(), occurrences })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignatureError {
    #[error("assignment is missing head variable {0}")]
    MissingVariable(String),
}

/// Tag bytes of the signature encoding, one per value type.
const TAG_REAL: u8 = 0;
const TAG_INTEGER: u8 = 1;
const TAG_STRING: u8 = 2;
const TAG_BOOLEAN: u8 = 3;

pub(crate) fn encode_signature<'a>(
    occurrence_id: u64,
    values: impl Iterator<Item = &'a Value>,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(32);
    out.extend_from_slice(&occurrence_id.to_be_bytes());
    for v in values {
        match v {
            Value::Real(x) => {
                out.push(TAG_REAL);
                out.extend_from_slice(&x.to_bits().to_be_bytes());
            }
            Value::Integer(i) => {
                out.push(TAG_INTEGER);
                out.extend_from_slice(&(*i as u64).to_be_bytes());
            }
            Value::String(s) => {
                out.push(TAG_STRING);
                out.extend_from_slice(&(s.len() as u64).to_be_bytes());
                out.extend_from_slice(s.as_bytes());
            }
            Value::Boolean(b) => {
                out.push(TAG_BOOLEAN);
                out.push(*b as u8);
            }
        }
    }
    out
}

/// Canonical bytes identifying one instantiation of one rule occurrence's
/// head variables.
pub fn head_instantiation_signature(
    occ: &RuleOccurrence,
    assignment: &HashMap<String, Value>,
) -> Result<Vec<u8>, SignatureError> {
    let mut values = Vec::with_capacity(occ.compiled.head_vars.len());
    for &i in &occ.compiled.head_vars {
        let name = &occ.compiled.var_names[i];
        let v = assignment
            .get(name)
            .ok_or_else(|| SignatureError::MissingVariable(name.clone()))?;
        values.push(v);
    }
    Ok(encode_signature(occ.id, values.into_iter()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;
    use crate::schema::{AttrSchema, RelationSchema};

    fn walk_schema() -> Schema {
        Schema::new(vec![
            RelationSchema {
                name: "S".into(),
                kind: RelationKind::Extensional,
                attrs: vec![AttrSchema::new("v", AttrType::String)],
            },
            RelationSchema {
                name: "E".into(),
                kind: RelationKind::Extensional,
                attrs: vec![
                    AttrSchema::new("from", AttrType::String),
                    AttrSchema::new("to", AttrType::String),
                    AttrSchema::new("w", AttrType::Real),
                ],
            },
            RelationSchema {
                name: "R".into(),
                kind: RelationKind::Intensional,
                attrs: vec![
                    AttrSchema::new("v", AttrType::String),
                    AttrSchema::new("t", AttrType::Real),
                ],
            },
        ])
        .unwrap()
    }

    fn validated(src: &str) -> Result<Program, ValidateError> {
        validate_program(&parse_program(src).unwrap(), &walk_schema())
    }

    #[test]
    fn generative_walk_program_validates() {
        let p = validated(
            "R(x,0) :- S(x). R(x, t + lognormal(mu=ln(s), var=0.1)) :- R(y,t), E(y,x,s).",
        )
        .unwrap();
        assert_eq!(p.occurrences.len(), 2);
        assert_eq!(p.occurrences[0].compiled.dist_sites, 0);
        assert_eq!(p.occurrences[1].compiled.dist_sites, 1);
        assert!(!p.is_deterministic());
        // Head vars of the second rule in first-appearance order: x, t
        // (and s inside the distribution parameter).
        let c = &p.occurrences[1].compiled;
        let names: Vec<&str> = c.head_vars.iter().map(|&i| c.var_names[i].as_str()).collect();
        assert_eq!(names, ["x", "t", "s"]);
    }

    #[test]
    fn integer_zero_widens_into_real_attribute() {
        assert!(validated("R(x, 0) :- S(x).").is_ok());
    }

    #[test]
    fn unsafe_variable_rejected() {
        let err = validated("R(x, t) :- S(x).").unwrap_err();
        assert!(matches!(err, ValidateError::UnsafeVariable { ref var, .. } if var == "t"));
    }

    #[test]
    fn extensional_head_rejected() {
        let err = validated("S(x) :- R(x, t).").unwrap_err();
        assert!(matches!(err, ValidateError::HeadRelationExtensional { .. }));
    }

    #[test]
    fn unknown_relation_rejected() {
        let err = validated("R(x, 0) :- Nope(x).").unwrap_err();
        assert!(matches!(err, ValidateError::UnknownRelation { ref relation, .. } if relation == "Nope"));
    }

    #[test]
    fn string_into_real_attribute_rejected() {
        let err = validated("R(x, \"warm\") :- S(x).").unwrap_err();
        assert!(matches!(
            err,
            ValidateError::TypeMismatch { expected: AttrType::Real, got: AttrType::String, .. }
        ));
    }

    #[test]
    fn conflicting_variable_types_rejected() {
        // x is a string in S but used as the weight in E.
        let err = validated("R(x, 0) :- S(x), E(y, z, x).").unwrap_err();
        assert!(matches!(err, ValidateError::TypeMismatch { .. }));
    }

    #[test]
    fn missing_dist_param_rejected() {
        let err = validated("R(x, normal(mean=20.2)) :- S(x).").unwrap_err();
        assert!(matches!(err, ValidateError::DistParamArity { dist: "normal", .. }));
    }

    #[test]
    fn duplicate_dist_param_rejected() {
        let err = validated("R(x, normal(mean=1, mean=2)) :- S(x).").unwrap_err();
        assert!(matches!(err, ValidateError::DistParamArity { .. }));
    }

    #[test]
    fn signature_distinguishes_values_types_and_occurrences() {
        let p = validated(
            "R(x, t + s) :- R(y, t), E(y, x, s). R(x, t * s) :- R(y, t), E(y, x, s).",
        )
        .unwrap();
        let occ = &p.occurrences[0];
        let mk = |x: &str, t: f64, s: f64| {
            let mut m = HashMap::new();
            m.insert("x".to_string(), Value::String(x.into()));
            m.insert("t".to_string(), Value::Real(t));
            m.insert("s".to_string(), Value::Real(s));
            head_instantiation_signature(occ, &m).unwrap()
        };
        assert_eq!(mk("a", 1.0, 2.0), mk("a", 1.0, 2.0));
        assert_ne!(mk("a", 1.0, 2.0), mk("a", 1.0, 3.0));

        // Same assignment under a different occurrence id.
        let mut m = HashMap::new();
        m.insert("x".to_string(), Value::String("a".into()));
        m.insert("t".to_string(), Value::Real(1.0));
        m.insert("s".to_string(), Value::Real(2.0));
        let s0 = head_instantiation_signature(&p.occurrences[0], &m).unwrap();
        let s1 = head_instantiation_signature(&p.occurrences[1], &m).unwrap();
        assert_ne!(s0, s1);

        let missing = head_instantiation_signature(occ, &HashMap::new());
        assert!(matches!(missing, Err(SignatureError::MissingVariable(_))));
    }

    #[test]
    fn signature_separates_real_from_integer() {
        assert_ne!(
            encode_signature(0, [&Value::Real(1.0)].into_iter()),
            encode_signature(0, [&Value::Integer(1)].into_iter())
        );
    }
}
