use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::ModuleError;
use crate::typesys::TemplateEnv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    #[serde(rename = "int")]
    Int,
    #[serde(rename = "float")]
    Float,
    #[serde(rename = "string")]
    Str,
    #[serde(rename = "bool")]
    Bool,
    #[serde(rename = "int-list")]
    IntList,
    #[serde(rename = "string-list")]
    StrList,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamKind::Int => "int",
            ParamKind::Float => "float",
            ParamKind::Str => "string",
            ParamKind::Bool => "bool",
            ParamKind::IntList => "int-list",
            ParamKind::StrList => "string-list",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    IntList(Vec<i64>),
    StrList(Vec<String>),
}

impl ParamValue {
    pub fn from_json(kind: ParamKind, v: &Value) -> Option<ParamValue> {
        Some(match kind {
            ParamKind::Int => ParamValue::Int(v.as_i64()?),
            ParamKind::Float => ParamValue::Float(v.as_f64()?),
            ParamKind::Str => ParamValue::Str(v.as_str()?.to_string()),
            ParamKind::Bool => ParamValue::Bool(v.as_bool()?),
            ParamKind::IntList => ParamValue::IntList(
                v.as_array()?
                    .iter()
                    .map(Value::as_i64)
                    .collect::<Option<_>>()?,
            ),
            ParamKind::StrList => ParamValue::StrList(
                v.as_array()?
                    .iter()
                    .map(|x| x.as_str().map(String::from))
                    .collect::<Option<_>>()?,
            ),
        })
    }

    pub fn to_json(&self) -> Value {
        match self {
            ParamValue::Int(v) => Value::from(*v),
            ParamValue::Float(v) => Value::from(*v),
            ParamValue::Str(v) => Value::from(v.as_str()),
            ParamValue::Bool(v) => Value::from(*v),
            ParamValue::IntList(v) => Value::from(v.clone()),
            ParamValue::StrList(v) => Value::from(v.clone()),
        }
    }
}

/// A restriction on an entry's value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// Numbers, and every element of an int list, are at least this.
    AtLeast(f64),
    OneOf(Vec<String>),
    NonEmpty,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::AtLeast(v) => write!(f, "≥ {v}"),
            Constraint::OneOf(opts) => write!(f, "one of {{{}}}", opts.join(", ")),
            Constraint::NonEmpty => f.write_str("non-empty"),
        }
    }
}

impl Constraint {
    fn holds(&self, v: &ParamValue) -> bool {
        match (self, v) {
            (Constraint::AtLeast(min), ParamValue::Int(x)) => *x as f64 >= *min,
            (Constraint::AtLeast(min), ParamValue::Float(x)) => *x >= *min,
            (Constraint::AtLeast(min), ParamValue::IntList(xs)) => {
                xs.iter().all(|&x| x as f64 >= *min)
            }
            (Constraint::OneOf(opts), ParamValue::Str(s)) => opts.contains(s),
            (Constraint::NonEmpty, ParamValue::IntList(xs)) => !xs.is_empty(),
            (Constraint::NonEmpty, ParamValue::StrList(xs)) => !xs.is_empty(),
            (Constraint::NonEmpty, ParamValue::Str(s)) => !s.is_empty(),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default)]
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Constraint>,
}

impl ParamEntry {
    pub fn required(name: &str, kind: ParamKind) -> Self {
        ParamEntry {
            name: name.to_string(),
            kind,
            required: true,
            default: None,
            constraint: None,
        }
    }

    pub fn optional(name: &str, kind: ParamKind, default: Value) -> Self {
        ParamEntry {
            name: name.to_string(),
            kind,
            required: false,
            default: Some(default),
            constraint: None,
        }
    }

    pub fn with(mut self, c: Constraint) -> Self {
        self.constraint = Some(c);
        self
    }

    fn check(&self, raw: &Value) -> Result<ParamValue, ModuleError> {
        let v = ParamValue::from_json(self.kind, raw).ok_or_else(|| ModuleError::ParamKind {
            name: self.name.clone(),
            expected: self.kind,
            found: raw.to_string(),
        })?;
        if let Some(c) = &self.constraint {
            if !c.holds(&v) {
                return Err(ModuleError::ConstraintViolation {
                    name: self.name.clone(),
                    constraint: c.to_string(),
                });
            }
        }
        Ok(v)
    }
}

/// Ordered list of parameter entries for a descriptor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSchema(pub Vec<ParamEntry>);

impl ParamSchema {
    pub fn entry(&self, name: &str) -> Option<&ParamEntry> {
        self.0.iter().find(|e| e.name == name)
    }

    /// Schema self-consistency: unique names, required entries without
    /// defaults, defaults that satisfy their own constraints.
    pub fn check(&self) -> Result<(), ModuleError> {
        for (i, e) in self.0.iter().enumerate() {
            if self.0[..i].iter().any(|o| o.name == e.name) {
                return Err(ModuleError::InvalidSchema(format!(
                    "duplicate parameter `{}`",
                    e.name
                )));
            }
            match (&e.default, e.required) {
                (Some(_), true) => {
                    return Err(ModuleError::InvalidSchema(format!(
                        "required parameter `{}` has a default",
                        e.name
                    )))
                }
                (None, false) => {
                    return Err(ModuleError::InvalidSchema(format!(
                        "optional parameter `{}` needs a default",
                        e.name
                    )))
                }
                (Some(d), false) => {
                    e.check(d)?;
                }
                (None, true) => {}
            }
        }
        Ok(())
    }

    /// Check `values` against the schema and fill in defaults.
    pub fn validate(&self, values: &Map<String, Value>) -> Result<Params, ModuleError> {
        if let Some(unknown) = values.keys().find(|k| self.entry(k).is_none()) {
            return Err(ModuleError::UnknownParam(unknown.clone()));
        }
        let mut out = BTreeMap::new();
        for e in &self.0 {
            let raw = match (values.get(&e.name), &e.default) {
                (Some(v), _) => v,
                (None, Some(d)) => d,
                (None, None) => return Err(ModuleError::MissingParam(e.name.clone())),
            };
            out.insert(e.name.clone(), e.check(raw)?);
        }
        Ok(Params(out))
    }
}

/// Validated parameter values, every schema entry present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(pub BTreeMap<String, ParamValue>);

impl Params {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    pub fn int(&self, name: &str) -> Result<i64, ModuleError> {
        match self.get(name) {
            Some(ParamValue::Int(v)) => Ok(*v),
            _ => Err(ModuleError::MissingParam(name.to_string())),
        }
    }

    pub fn usize(&self, name: &str) -> Result<usize, ModuleError> {
        let v = self.int(name)?;
        usize::try_from(v).map_err(|_| ModuleError::ConstraintViolation {
            name: name.to_string(),
            constraint: "≥ 0".into(),
        })
    }

    pub fn float(&self, name: &str) -> Result<f64, ModuleError> {
        match self.get(name) {
            Some(ParamValue::Float(v)) => Ok(*v),
            Some(ParamValue::Int(v)) => Ok(*v as f64),
            _ => Err(ModuleError::MissingParam(name.to_string())),
        }
    }

    pub fn str(&self, name: &str) -> Result<&str, ModuleError> {
        match self.get(name) {
            Some(ParamValue::Str(v)) => Ok(v),
            _ => Err(ModuleError::MissingParam(name.to_string())),
        }
    }

    pub fn bool(&self, name: &str) -> Result<bool, ModuleError> {
        match self.get(name) {
            Some(ParamValue::Bool(v)) => Ok(*v),
            _ => Err(ModuleError::MissingParam(name.to_string())),
        }
    }

    pub fn int_list(&self, name: &str) -> Result<&[i64], ModuleError> {
        match self.get(name) {
            Some(ParamValue::IntList(v)) => Ok(v),
            _ => Err(ModuleError::MissingParam(name.to_string())),
        }
    }

    pub fn str_list(&self, name: &str) -> Result<&[String], ModuleError> {
        match self.get(name) {
            Some(ParamValue::StrList(v)) => Ok(v),
            _ => Err(ModuleError::MissingParam(name.to_string())),
        }
    }

    pub fn to_json(&self) -> Map<String, Value> {
        self.0
            .iter()
            .map(|(k, v)| (k.clone(), v.to_json()))
            .collect()
    }
}

impl TemplateEnv for Params {
    fn string(&self, name: &str) -> Result<String, String> {
        self.str(name)
            .map(String::from)
            .map_err(|_| format!("`{name}` is not a string parameter"))
    }

    fn int(&self, name: &str) -> Result<i64, String> {
        Params::int(self, name).map_err(|_| format!("`{name}` is not an int parameter"))
    }

    fn string_list(&self, name: &str) -> Result<Vec<String>, String> {
        self.str_list(name)
            .map(|v| v.to_vec())
            .map_err(|_| format!("`{name}` is not a string-list parameter"))
    }

    fn list_len(&self, name: &str) -> Result<usize, String> {
        match self.get(name) {
            Some(ParamValue::IntList(v)) => Ok(v.len()),
            Some(ParamValue::StrList(v)) => Ok(v.len()),
            _ => Err(format!("`{name}` is not a list parameter")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn linear_schema() -> ParamSchema {
        ParamSchema(vec![
            ParamEntry::required("in_features", ParamKind::Int).with(Constraint::AtLeast(1.0)),
            ParamEntry::required("out_features", ParamKind::Int).with(Constraint::AtLeast(1.0)),
            ParamEntry::optional("seed", ParamKind::Int, json!(0)),
        ])
    }

    fn map(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn fills_defaults() {
        let p = linear_schema()
            .validate(&map(json!({"in_features": 64, "out_features": 40})))
            .unwrap();
        assert_eq!(p.int("seed").unwrap(), 0);
        assert_eq!(p.int("in_features").unwrap(), 64);
    }

    #[test]
    fn constraint_violation_names_entry() {
        let err = linear_schema()
            .validate(&map(json!({"in_features": 0, "out_features": 40})))
            .unwrap_err();
        assert_eq!(
            err,
            ModuleError::ConstraintViolation {
                name: "in_features".into(),
                constraint: "≥ 1".into()
            }
        );
        assert!(err.to_string().contains("in_features ≥ 1"));
    }

    #[test]
    fn unknown_and_missing() {
        let s = linear_schema();
        assert_eq!(
            s.validate(&map(
                json!({"in_features": 64, "out_features": 40, "typo": 3})
            )),
            Err(ModuleError::UnknownParam("typo".into()))
        );
        assert_eq!(
            s.validate(&map(json!({"in_features": 64}))),
            Err(ModuleError::MissingParam("out_features".into()))
        );
        assert!(matches!(
            s.validate(&map(json!({"in_features": "x", "out_features": 1}))),
            Err(ModuleError::ParamKind { .. })
        ));
    }

    #[test]
    fn schema_self_check() {
        let bad = ParamSchema(vec![
            ParamEntry::optional("n", ParamKind::Int, json!(0)).with(Constraint::AtLeast(1.0))
        ]);
        assert!(bad.check().is_err());
        let mut req = ParamEntry::required("n", ParamKind::Int);
        req.default = Some(json!(1));
        assert!(ParamSchema(vec![req]).check().is_err());
        assert!(linear_schema().check().is_ok());
    }

    #[test]
    fn one_of_and_lists() {
        let s = ParamSchema(vec![
            ParamEntry::optional("init", ParamKind::Str, json!("glorot"))
                .with(Constraint::OneOf(vec!["glorot".into(), "zeros".into()])),
            ParamEntry::optional("dims", ParamKind::IntList, json!([0, 8]))
                .with(Constraint::AtLeast(0.0)),
        ]);
        assert!(s.validate(&map(json!({"init": "zeros"}))).is_ok());
        assert!(s.validate(&map(json!({"init": "he"}))).is_err());
        assert!(s.validate(&map(json!({"dims": [1, -1]}))).is_err());
    }
}
