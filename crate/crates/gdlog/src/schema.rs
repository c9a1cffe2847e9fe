//! Relation schemas.

use serde::{Deserialize, Serialize};

use crate::value::AttrType;

/// Whether a relation is supplied as input data or derived by rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    Extensional,
    Intensional,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttrSchema {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: AttrType,
}

impl AttrSchema {
    pub fn new(name: impl Into<String>, ty: AttrType) -> AttrSchema {
        AttrSchema { name: name.into(), ty }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSchema {
    pub name: String,
    pub kind: RelationKind,
    pub attrs: Vec<AttrSchema>,
}

impl RelationSchema {
    pub fn arity(&self) -> usize {
        self.attrs.len()
    }

    pub fn attr_index(&self, name: &str) -> Option<usize> {
        self.attrs.iter().position(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("relation {relation} expects {expected} values, got {got}")]
    ArityMismatch {
        relation: String,
        expected: usize,
        got: usize,
    },
    #[error("relation {relation}, position {position} ({attr}): expected {expected}, got {got}")]
    TypeMismatch {
        relation: String,
        position: usize,
        attr: String,
        expected: AttrType,
        got: AttrType,
    },
    #[error("duplicate relation name {0}")]
    DuplicateRelation(String),
    #[error("relation {relation} has duplicate attribute {attr}")]
    DuplicateAttribute { relation: String, attr: String },
    #[error("relation {relation} has no attribute {attr}")]
    UnknownAttribute { relation: String, attr: String },
}

/// A named collection of relation schemas with unique relation and attribute
/// names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub relations: Vec<RelationSchema>,
}

impl Schema {
    pub fn new(relations: Vec<RelationSchema>) -> Result<Schema, SchemaError> {
        for (i, r) in relations.iter().enumerate() {
            if relations[..i].iter().any(|p| p.name == r.name) {
                return Err(SchemaError::DuplicateRelation(r.name.clone()));
            }
            for (j, a) in r.attrs.iter().enumerate() {
                if r.attrs[..j].iter().any(|p| p.name == a.name) {
                    return Err(SchemaError::DuplicateAttribute {
                        relation: r.name.clone(),
                        attr: a.name.clone(),
                    });
                }
            }
        }
        Ok(Schema { relations })
    }

    pub fn relation(&self, name: &str) -> Option<&RelationSchema> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn require_relation(&self, name: &str) -> Result<&RelationSchema, SchemaError> {
        self.relation(name)
            .ok_or_else(|| SchemaError::UnknownRelation(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_relation_rejected() {
        let r = RelationSchema {
            name: "R".into(),
            kind: RelationKind::Extensional,
            attrs: vec![],
        };
        let err = Schema::new(vec![r.clone(), r]).unwrap_err();
        assert_eq!(err, SchemaError::DuplicateRelation("R".into()));
    }

    #[test]
    fn duplicate_attribute_rejected() {
        let r = RelationSchema {
            name: "R".into(),
            kind: RelationKind::Extensional,
            attrs: vec![
                AttrSchema::new("a", AttrType::Real),
                AttrSchema::new("a", AttrType::Real),
            ],
        };
        assert!(Schema::new(vec![r]).is_err());
    }
}
