//! Scalar expressions over named variables.
//!
//! Expressions are parsed from a fixed ASCII infix grammar and evaluated with
//! exact first and second partial derivatives using nested forward-mode dual
//! numbers. A central-difference evaluator is provided as an independent
//! oracle for tests and diagnostics.

mod ast;
mod dual;
mod eval;
mod parse;

pub use ast::{Ast, BinOp, Func};
pub use dual::{Dual, Scalar};
pub use eval::{eval, eval_generic, eval_with_partials, finite_difference_partials, Order, PartialBundle};
pub use parse::parse;

/// Tree constructors with folding of trivial constants.
pub mod ast_ops {
    pub use super::ast::{add, call, div, mul, neg, pow, sub};
}

use std::fmt;

/// Errors raised while parsing or evaluating expressions.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{function}` takes {expected} argument(s), got {found}")]
    Arity {
        function: String,
        expected: usize,
        found: usize,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid variable space: {0}")]
    Space(String),
}

/// Role a variable plays in the jet coordinates `(t, q^i, q^i_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Time,
    Coordinate,
    Velocity,
    Auxiliary,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Time => "time",
            Role::Coordinate => "coordinate",
            Role::Velocity => "velocity",
            Role::Auxiliary => "auxiliary",
        };
        f.write_str(s)
    }
}

/// Ordered set of variable names an expression may reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableSpace {
    names: Vec<String>,
    roles: Vec<Role>,
}

impl VariableSpace {
    pub fn new<I, S>(vars: I) -> Result<Self, ExprError>
    where
        I: IntoIterator<Item = (S, Role)>,
        S: Into<String>,
    {
        let (names, roles): (Vec<String>, Vec<Role>) = vars.into_iter().map(|(n, r)| (n.into(), r)).unzip();
        for (i, n) in names.iter().enumerate() {
            if !is_identifier(n) {
                return Err(ExprError::Space(format!("`{n}` is not an identifier")));
            }
            if parse::is_function_name(n) {
                return Err(ExprError::Space(format!("`{n}` shadows a function")));
            }
            if names[..i].contains(n) {
                return Err(ExprError::Space(format!("duplicate variable `{n}`")));
            }
        }
        let count = |r: Role| roles.iter().filter(|&&x| x == r).count();
        if count(Role::Time) != 1 {
            return Err(ExprError::Space("exactly one time variable required".into()));
        }
        if count(Role::Coordinate) != count(Role::Velocity) {
            return Err(ExprError::Space(
                "coordinate and velocity lists differ in length".into(),
            ));
        }
        Ok(Self { names, roles })
    }

    /// The jet space `t, q1..qm, v1..vm` followed by auxiliary names.
    pub fn jet(dim: usize, auxiliary: &[&str]) -> Result<Self, ExprError> {
        let mut vars = vec![("t".to_string(), Role::Time)];
        vars.extend((1..=dim).map(|i| (format!("q{i}"), Role::Coordinate)));
        vars.extend((1..=dim).map(|i| (format!("v{i}"), Role::Velocity)));
        vars.extend(auxiliary.iter().map(|a| (a.to_string(), Role::Auxiliary)));
        Self::new(vars)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn role(&self, index: usize) -> Role {
        self.roles[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Indices of all variables carrying `role`, in declaration order.
    pub fn indices(&self, role: Role) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roles[i] == role).collect()
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_space_layout() {
        let s = VariableSpace::jet(2, &[]).unwrap();
        assert_eq!(s.names(), &["t", "q1", "q2", "v1", "v2"]);
        assert_eq!(s.indices(Role::Velocity), vec![3, 4]);
    }

    #[test]
    fn rejects_bad_spaces() {
        assert!(VariableSpace::new([("t", Role::Time), ("t", Role::Coordinate)]).is_err());
        assert!(VariableSpace::new([("q1", Role::Coordinate), ("v1", Role::Velocity)]).is_err());
        assert!(VariableSpace::new([("t", Role::Time), ("q1", Role::Coordinate)]).is_err());
        assert!(VariableSpace::new([("t", Role::Time), ("sin", Role::Auxiliary)]).is_err());
    }
}
