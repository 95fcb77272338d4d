//! Typed literal values shared by the catalog, statechart, broker and runner.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::vss_catalog::Datatype;

/// A literal signal value.
///
/// Integers are widened to `i64` internally; range against the declared
/// datatype is checked where a catalog node is in play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    /// Default value for a datatype: false, 0, 0.0 or the empty string.
    pub fn default_for(datatype: Datatype) -> Value {
        match datatype {
            Datatype::Boolean => Value::Bool(false),
            Datatype::Int32 => Value::Int(0),
            Datatype::Float => Value::Float(0.0),
            Datatype::String => Value::Str(String::new()),
        }
    }

    /// Whether this value is admissible for the given datatype.
    pub fn matches(&self, datatype: Datatype) -> bool {
        match (self, datatype) {
            (Value::Bool(_), Datatype::Boolean) => true,
            (Value::Int(n), Datatype::Int32) => i32::try_from(*n).is_ok(),
            (Value::Float(_), Datatype::Float) => true,
            (Value::Str(_), Datatype::String) => true,
            _ => false,
        }
    }

    /// Parse a step argument according to the target datatype. Strings take
    /// the raw remainder of the step text, unquoted.
    pub fn parse_as(datatype: Datatype, text: &str) -> Option<Value> {
        match datatype {
            Datatype::Boolean => match text {
                "true" => Some(Value::Bool(true)),
                "false" => Some(Value::Bool(false)),
                _ => None,
            },
            Datatype::Int32 => text
                .parse::<i64>()
                .ok()
                .filter(|n| i32::try_from(*n).is_ok())
                .map(Value::Int),
            Datatype::Float => text.parse::<f64>().ok().map(Value::Float),
            Datatype::String => Some(Value::Str(text.to_string())),
        }
    }

    /// Parse a chart literal: `true`/`false`, an integer, a float, or a
    /// double-quoted string (no escape sequences).
    pub fn parse_chart_literal(text: &str) -> Option<Value> {
        let text = text.trim();
        if text == "true" {
            return Some(Value::Bool(true));
        }
        if text == "false" {
            return Some(Value::Bool(false));
        }
        if text.len() >= 2 && text.starts_with('"') && text.ends_with('"') {
            let inner = &text[1..text.len() - 1];
            if inner.contains('"') {
                return None;
            }
            return Some(Value::Str(inner.to_string()));
        }
        if let Ok(n) = text.parse::<i64>() {
            return Some(Value::Int(n));
        }
        if let Ok(f) = text.parse::<f64>() {
            return Some(Value::Float(f));
        }
        None
    }

    /// Render in chart-literal form (strings quoted). Inverse of
    /// [`Value::parse_chart_literal`].
    pub fn to_chart_literal(&self) -> String {
        match self {
            Value::Str(s) => format!("\"{s}\""),
            other => other.to_string(),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "boolean",
            Value::Int(_) => "int32",
            Value::Float(_) => "float",
            Value::Str(_) => "string",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Str(s) => write!(f, "{s}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_per_datatype() {
        assert_eq!(Value::default_for(Datatype::Boolean), Value::Bool(false));
        assert_eq!(Value::default_for(Datatype::Int32), Value::Int(0));
        assert_eq!(Value::default_for(Datatype::Float), Value::Float(0.0));
        assert_eq!(Value::default_for(Datatype::String), Value::Str(String::new()));
    }

    #[test]
    fn datatype_directed_parse() {
        assert_eq!(Value::parse_as(Datatype::Boolean, "true"), Some(Value::Bool(true)));
        assert_eq!(Value::parse_as(Datatype::Boolean, "yes"), None);
        assert_eq!(Value::parse_as(Datatype::Int32, "41"), Some(Value::Int(41)));
        assert_eq!(Value::parse_as(Datatype::Int32, "4100000000"), None);
        assert_eq!(Value::parse_as(Datatype::Float, "21.5"), Some(Value::Float(21.5)));
        assert_eq!(
            Value::parse_as(Datatype::String, "free text"),
            Some(Value::Str("free text".into()))
        );
    }

    #[test]
    fn chart_literal_round_trip() {
        for v in [
            Value::Bool(true),
            Value::Int(-3),
            Value::Float(1.25),
            Value::Str("warm".into()),
        ] {
            assert_eq!(Value::parse_chart_literal(&v.to_chart_literal()), Some(v));
        }
    }

    #[test]
    fn int32_range_enforced() {
        assert!(Value::Int(i64::from(i32::MAX)).matches(Datatype::Int32));
        assert!(!Value::Int(i64::from(i32::MAX) + 1).matches(Datatype::Int32));
    }
}
