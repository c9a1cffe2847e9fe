//! Facts and instances.
//!
//! An [`Instance`] is a finite multiset of facts. Bag mode keeps
//! multiplicities (repeated rows in input data, sampled table worlds); set
//! mode caps every multiplicity at one and is the semantics rules operate
//! under. Facts are kept in a sorted map, so iteration order (and therefore
//! every serialized form) is deterministic.

use std::collections::BTreeMap;
use std::fmt;

use crate::schema::{Schema, SchemaError};
use crate::value::Value;

/// One row of one relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub relation: String,
    pub values: Vec<Value>,
}

impl Fact {
    pub fn new(relation: impl Into<String>, values: Vec<Value>) -> Fact {
        Fact { relation: relation.into(), values }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Builds a fact after checking it against the schema: the relation must
/// exist, the arity must match, and every value must have the declared
/// attribute type. No numeric coercion happens here; loaders coerce while
/// reading external data.
pub fn make_fact(schema: &Schema, relation: &str, values: Vec<Value>) -> Result<Fact, SchemaError> {
    let rel = schema.require_relation(relation)?;
    if values.len() != rel.arity() {
        return Err(SchemaError::ArityMismatch {
            relation: relation.to_string(),
            expected: rel.arity(),
            got: values.len(),
        });
    }
    for (i, (v, a)) in values.iter().zip(&rel.attrs).enumerate() {
        if v.type_of() != a.ty {
            return Err(SchemaError::TypeMismatch {
                relation: relation.to_string(),
                position: i,
                attr: a.name.clone(),
                expected: a.ty,
                got: v.type_of(),
            });
        }
    }
    Ok(Fact::new(relation, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceMode {
    Bag,
    Set,
}

/// A finite multiset of facts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    mode: InstanceMode,
    counts: BTreeMap<Fact, u64>,
}

impl Instance {
    pub fn bag() -> Instance {
        Instance { mode: InstanceMode::Bag, counts: BTreeMap::new() }
    }

    pub fn set() -> Instance {
        Instance { mode: InstanceMode::Set, counts: BTreeMap::new() }
    }

    pub fn mode(&self) -> InstanceMode {
        self.mode
    }

    /// Adds one occurrence of `fact`. In set mode a repeated insert is a
    /// no-op. Returns whether the support grew.
    pub fn insert(&mut self, fact: Fact) -> bool {
        match self.mode {
            InstanceMode::Bag => {
                let c = self.counts.entry(fact).or_insert(0);
                *c += 1;
                *c == 1
            }
            InstanceMode::Set => {
                let c = self.counts.entry(fact).or_insert(0);
                if *c == 0 {
                    *c = 1;
                    true
                } else {
                    false
                }
            }
        }
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.counts.contains_key(fact)
    }

    /// Multiplicity of one specific fact.
    pub fn count_of(&self, fact: &Fact) -> u64 {
        self.counts.get(fact).copied().unwrap_or(0)
    }

    /// Distinct facts, in sorted order.
    pub fn support(&self) -> impl Iterator<Item = &Fact> {
        self.counts.keys()
    }

    /// Distinct facts with multiplicities, in sorted order.
    pub fn iter_counted(&self) -> impl Iterator<Item = (&Fact, u64)> {
        self.counts.iter().map(|(f, c)| (f, *c))
    }

    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    pub fn total_count(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// The support of this instance as a set-mode instance. Idempotent.
    pub fn to_set(&self) -> Instance {
        Instance {
            mode: InstanceMode::Set,
            counts: self.counts.keys().map(|f| (f.clone(), 1)).collect(),
        }
    }

    /// Keeps only the facts whose relation satisfies `keep`.
    pub fn filter_relations(&self, keep: impl Fn(&str) -> bool) -> Instance {
        Instance {
            mode: self.mode,
            counts: self
                .counts
                .iter()
                .filter(|(f, _)| keep(&f.relation))
                .map(|(f, c)| (f.clone(), *c))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{AttrSchema, RelationKind, RelationSchema};
    use crate::value::AttrType;

    fn temp_schema() -> Schema {
        Schema::new(vec![RelationSchema {
            name: "Temp".into(),
            kind: RelationKind::Extensional,
            attrs: vec![
                AttrSchema::new("room", AttrType::String),
                AttrSchema::new("time", AttrType::String),
                AttrSchema::new("celsius", AttrType::Real),
            ],
        }])
        .unwrap()
    }

    #[test]
    fn make_fact_accepts_well_typed_row() {
        let s = temp_schema();
        let f = make_fact(
            &s,
            "Temp",
            vec![
                Value::String("4108".into()),
                Value::String("2021-01-05 08:00".into()),
                Value::Real(20.2),
            ],
        )
        .unwrap();
        assert_eq!(f.relation, "Temp");
    }

    #[test]
    fn make_fact_reports_position_of_type_mismatch() {
        let s = temp_schema();
        let err = make_fact(
            &s,
            "Temp",
            vec![
                Value::String("4108".into()),
                Value::String("x".into()),
                Value::String("warm".into()),
            ],
        )
        .unwrap_err();
        match err {
            SchemaError::TypeMismatch { position, expected, got, .. } => {
                assert_eq!(position, 2);
                assert_eq!(expected, AttrType::Real);
                assert_eq!(got, AttrType::String);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn make_fact_rejects_unknown_relation_and_bad_arity() {
        let s = temp_schema();
        assert!(matches!(
            make_fact(&s, "Nope", vec![]),
            Err(SchemaError::UnknownRelation(_))
        ));
        assert!(matches!(
            make_fact(&s, "Temp", vec![Value::String("4108".into())]),
            Err(SchemaError::ArityMismatch { expected: 3, got: 1, .. })
        ));
    }

    #[test]
    fn bag_counts_repeats_and_set_does_not() {
        let f = Fact::new("R", vec![Value::Integer(1)]);
        let mut bag = Instance::bag();
        assert!(bag.insert(f.clone()));
        assert!(!bag.insert(f.clone()));
        assert_eq!(bag.count_of(&f), 2);

        let mut set = Instance::set();
        assert!(set.insert(f.clone()));
        assert!(!set.insert(f.clone()));
        assert_eq!(set.count_of(&f), 1);
    }

    #[test]
    fn to_set_is_idempotent_and_preserves_support() {
        let mut bag = Instance::bag();
        for _ in 0..3 {
            bag.insert(Fact::new("R", vec![Value::Integer(7)]));
        }
        bag.insert(Fact::new("R", vec![Value::Integer(8)]));
        let s1 = bag.to_set();
        let s2 = s1.to_set();
        assert_eq!(s1, s2);
        assert_eq!(s1.support_size(), 2);
        assert_eq!(s1.total_count(), 2);
        assert!(s1.support().eq(bag.support()));
    }
}
