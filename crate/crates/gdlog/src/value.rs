//! Typed constants.
//!
//! Every value that can appear in a fact, a distribution parameter or a query
//! constant is one of four types: `real`, `integer`, `string`, `boolean`.
//! Reals are always finite and `-0.0` is canonicalized to `+0.0` on
//! construction, so equality, ordering and hashing are total and agree with
//! the IEEE bit patterns. That makes instances (and anything derived from
//! them, like firing signatures) byte-stable across runs.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

/// Attribute type of a relation column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrType {
    Real,
    Integer,
    String,
    Boolean,
}

impl fmt::Display for AttrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttrType::Real => "real",
            AttrType::Integer => "integer",
            AttrType::String => "string",
            AttrType::Boolean => "boolean",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValueError {
    #[error("real value must be finite, got {0}")]
    NonFiniteReal(f64),
}

/// A typed constant.
///
/// Construct reals through [`Value::real`] so the finiteness and `-0.0`
/// invariants hold; the other variants carry no invariant.
#[derive(Debug, Clone)]
pub enum Value {
    Real(f64),
    Integer(i64),
    String(String),
    Boolean(bool),
}

impl Value {
    /// Builds a real value, rejecting NaN and infinities and canonicalizing
    /// `-0.0` to `+0.0`.
    pub fn real(x: f64) -> Result<Value, ValueError> {
        if !x.is_finite() {
            return Err(ValueError::NonFiniteReal(x));
        }
        Ok(Value::Real(if x == 0.0 { 0.0 } else { x }))
    }

    pub fn type_of(&self) -> AttrType {
        match self {
            Value::Real(_) => AttrType::Real,
            Value::Integer(_) => AttrType::Integer,
            Value::String(_) => AttrType::String,
            Value::Boolean(_) => AttrType::Boolean,
        }
    }

    /// Numeric view: reals as-is, integers widened to double. `None` for
    /// strings and booleans.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Real(_) => 0,
            Value::Integer(_) => 1,
            Value::String(_) => 2,
            Value::Boolean(_) => 3,
        }
    }
}

// Equality, ordering and hashing are implemented by hand so that reals
// compare by bit pattern. With the construction invariant (finite, no -0.0)
// bit equality coincides with numeric equality, and `total_cmp` coincides
// with the numeric order.
impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => a.to_bits() == b.to_bits(),
            (Value::Integer(a), Value::Integer(b)) => a == b,
            (Value::String(a), Value::String(b)) => a == b,
            (Value::Boolean(a), Value::Boolean(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u8(self.rank());
        match self {
            Value::Real(x) => state.write_u64(x.to_bits()),
            Value::Integer(i) => state.write_i64(*i),
            Value::String(s) => s.hash(state),
            Value::Boolean(b) => state.write_u8(*b as u8),
        }
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => a.total_cmp(b),
            (Value::Integer(a), Value::Integer(b)) => a.cmp(b),
            (Value::String(a), Value::String(b)) => a.cmp(b),
            (Value::Boolean(a), Value::Boolean(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Value) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // Debug formatting of f64 keeps a decimal point or exponent, so
            // the printed form lexes back as a real literal.
            Value::Real(x) => write!(f, "{x:?}"),
            Value::Integer(i) => write!(f, "{i}"),
            Value::String(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Value::Boolean(b) => write!(f, "{b}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Real(x) => ser.serialize_f64(*x),
            Value::Integer(i) => ser.serialize_i64(*i),
            Value::String(s) => ser.serialize_str(s),
            Value::Boolean(b) => ser.serialize_bool(*b),
        }
    }
}
