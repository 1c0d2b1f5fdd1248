//! Typed lookups in TOML tables with errors that name the offending field.

use toml::{Table, Value};

use crate::error::CliError;

pub(crate) fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

pub(crate) fn path(section: &str, key: &str) -> String {
    format!("{section}.{key}")
}

pub(crate) fn table<'a>(root: &'a Table, key: &str) -> Result<Option<&'a Table>, CliError> {
    match root.get(key) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(invalid(key, "expected a table")),
    }
}

pub(crate) fn deny_unknown(t: &Table, section: &str, allowed: &[&str]) -> Result<(), CliError> {
    match t.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(invalid(
            &path(section, k),
            format!("unknown key (allowed: {})", allowed.join(", ")),
        )),
        None => Ok(()),
    }
}

/// A number, accepting TOML integers.
pub(crate) fn number(v: &Value, field: &str) -> Result<f64, CliError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(invalid(field, "expected a number")),
    }
}

pub(crate) fn opt_number(t: &Table, section: &str, key: &str) -> Result<Option<f64>, CliError> {
    t.get(key).map(|v| number(v, &path(section, key))).transpose()
}

pub(crate) fn opt_usize(t: &Table, section: &str, key: &str) -> Result<Option<usize>, CliError> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
        Some(_) => Err(invalid(&path(section, key), "expected a non-negative integer")),
    }
}

/// An expression: a string in the expression grammar, or a bare number.
pub(crate) fn expression(v: &Value, field: &str) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Float(f) => Ok(format!("{f:?}")),
        Value::Integer(i) => Ok(i.to_string()),
        _ => Err(invalid(field, "expected an expression string")),
    }
}

pub(crate) fn array<'a>(v: &'a Value, field: &str) -> Result<&'a Vec<Value>, CliError> {
    v.as_array().ok_or_else(|| invalid(field, "expected an array"))
}

pub(crate) fn required<'a>(t: &'a Table, section: &str, key: &str) -> Result<&'a Value, CliError> {
    t.get(key).ok_or_else(|| invalid(&path(section, key), "missing"))
}

pub(crate) fn expressions(t: &Table, section: &str, key: &str) -> Result<Vec<String>, CliError> {
    let field = path(section, key);
    array(required(t, section, key)?, &field)?
        .iter()
        .enumerate()
        .map(|(i, v)| expression(v, &format!("{field}[{i}]")))
        .collect()
}

pub(crate) fn expression_matrix(t: &Table, section: &str, key: &str) -> Result<Vec<Vec<String>>, CliError> {
    let field = path(section, key);
    array(required(t, section, key)?, &field)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let f = format!("{field}[{i}]");
            array(row, &f)?
                .iter()
                .enumerate()
                .map(|(j, v)| expression(v, &format!("{f}[{j}]")))
                .collect()
        })
        .collect()
}

pub(crate) fn numbers(v: &Value, field: &str) -> Result<Vec<f64>, CliError> {
    array(v, field)?
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{field}[{i}]")))
        .collect()
}

pub(crate) fn strings(v: &Value, field: &str) -> Result<Vec<String>, CliError> {
    array(v, field)?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            x.as_str()
                .map(str::to_string)
                .ok_or_else(|| invalid(&format!("{field}[{i}]"), "expected a string"))
        })
        .collect()
}

/// One-based coordinate indices, returned zero-based.
pub(crate) fn indices(t: &Table, section: &str, key: &str) -> Result<Vec<usize>, CliError> {
    let field = path(section, key);
    array(required(t, section, key)?, &field)?
        .iter()
        .enumerate()
        .map(|(i, v)| match v {
            Value::Integer(k) if *k >= 1 => Ok(*k as usize - 1),
            _ => Err(invalid(&format!("{field}[{i}]"), "expected a coordinate index >= 1")),
        })
        .collect()
}
