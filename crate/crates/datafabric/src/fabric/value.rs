//! Typed field values. Comparisons never coerce across kinds: an integer
//! compared against text (or against a real) is a type error, which the
//! view layer treats as "record excluded".

use std::cmp::Ordering;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl FieldValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            FieldValue::Int(_) => ValueKind::Int,
            FieldValue::Real(_) => ValueKind::Real,
            FieldValue::Text(_) => ValueKind::Text,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, FieldValue::Int(_) | FieldValue::Real(_))
    }

    /// Same-kind comparison. `None` means the kinds differ and the
    /// comparison is a type error, not an ordering.
    pub fn compare(&self, other: &FieldValue) -> Option<Ordering> {
        match (self, other) {
            (FieldValue::Int(a), FieldValue::Int(b)) => Some(a.cmp(b)),
            (FieldValue::Real(a), FieldValue::Real(b)) => a.partial_cmp(b),
            (FieldValue::Text(a), FieldValue::Text(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    /// Numeric view used only by aggregation blocks (sum/min/max/avg),
    /// where mixing stored ints and reals across records is legitimate.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FieldValue::Int(i) => Some(*i as f64),
            FieldValue::Real(r) => Some(*r),
            FieldValue::Text(_) => None,
        }
    }
}

impl From<i64> for FieldValue {
    fn from(v: i64) -> Self {
        FieldValue::Int(v)
    }
}

impl From<f64> for FieldValue {
    fn from(v: f64) -> Self {
        FieldValue::Real(v)
    }
}

impl From<&str> for FieldValue {
    fn from(v: &str) -> Self {
        FieldValue::Text(v.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Int,
    Real,
    Text,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueKind::Int => write!(f, "int"),
            ValueKind::Real => write!(f, "real"),
            ValueKind::Text => write!(f, "text"),
        }
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Int(i) => write!(f, "{i}"),
            // {:?} keeps the decimal point so reals stay reals in round-trips
            FieldValue::Real(r) => write!(f, "{r:?}"),
            FieldValue::Text(s) => write!(f, "\"{s}\""),
        }
    }
}

impl Serialize for FieldValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            FieldValue::Int(i) => serializer.serialize_i64(*i),
            FieldValue::Real(r) => serializer.serialize_f64(*r),
            FieldValue::Text(s) => serializer.serialize_str(s),
        }
    }
}

impl<'de> Deserialize<'de> for FieldValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(deserializer)?;
        match v {
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(FieldValue::Int(i))
                } else if let Some(r) = n.as_f64() {
                    Ok(FieldValue::Real(r))
                } else {
                    Err(D::Error::custom(format!("unrepresentable number {n}")))
                }
            }
            serde_json::Value::String(s) => Ok(FieldValue::Text(s)),
            other => Err(D::Error::custom(format!(
                "field value must be number or string, got {other}"
            ))),
        }
    }
}
