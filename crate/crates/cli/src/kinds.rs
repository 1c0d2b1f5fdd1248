//! Constraint kinds accepted in the `[constraint]` section, looked up by the
//! `kind` key.

use std::collections::BTreeMap;
use std::sync::Arc;

use jetflow::bundle::{ConfigurationSpace, JetPoint};
use jetflow::constraint::{Codistribution, CompositeConstraintSpec, ConstraintOneForm, LinearConstraintSpec};
use toml::Table;

use crate::error::CliError;
use crate::fields::{deny_unknown, expression_matrix, expressions, indices, invalid, path};

const SECTION: &str = "constraint";

pub trait ConstraintKind: Send + Sync {
    fn name(&self) -> &'static str;

    /// Keys the kind reads besides `kind`.
    fn keys(&self) -> &'static [&'static str];

    fn build(
        &self,
        space: &ConfigurationSpace,
        section: &Table,
        probes: &[JetPoint],
    ) -> Result<Codistribution, CliError>;
}

fn parse_all(space: &ConfigurationSpace, texts: &[String], field: &str) -> Result<Vec<jetflow::expr::Ast>, CliError> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| space.parse(t).map_err(CliError::at(&format!("{field}[{i}]"))))
        .collect()
}

fn parse_matrix(
    space: &ConfigurationSpace,
    rows: &[Vec<String>],
    field: &str,
) -> Result<Vec<Vec<jetflow::expr::Ast>>, CliError> {
    rows.iter()
        .enumerate()
        .map(|(a, row)| parse_all(space, row, &format!("{field}[{a}]")))
        .collect()
}

/// Raw forms `s0 dt + s_i dq^i + sdot_i dv^i`, one row per form.
pub struct Forms;

impl ConstraintKind for Forms {
    fn name(&self) -> &'static str {
        "forms"
    }

    fn keys(&self) -> &'static [&'static str] {
        &["s0", "s", "sdot"]
    }

    fn build(&self, space: &ConfigurationSpace, t: &Table, _: &[JetPoint]) -> Result<Codistribution, CliError> {
        let s0 = parse_all(space, &expressions(t, SECTION, "s0")?, &path(SECTION, "s0"))?;
        let s = parse_matrix(space, &expression_matrix(t, SECTION, "s")?, &path(SECTION, "s"))?;
        let sdot = parse_matrix(space, &expression_matrix(t, SECTION, "sdot")?, &path(SECTION, "sdot"))?;
        if s.len() != s0.len() || sdot.len() != s0.len() {
            return Err(invalid(
                &path(SECTION, "s"),
                format!("{} s0 entries, {} s rows, {} sdot rows", s0.len(), s.len(), sdot.len()),
            ));
        }
        let forms = s0
            .into_iter()
            .zip(s.into_iter().zip(sdot))
            .map(|(s0, (si, sdoti))| ConstraintOneForm { s0, si, sdoti })
            .collect();
        Codistribution::from_forms(space, forms).map_err(CliError::at(SECTION))
    }
}

/// Zero set of functions `f^a(t, q, v)`; the forms are their differentials.
pub struct Submanifold;

impl ConstraintKind for Submanifold {
    fn name(&self) -> &'static str {
        "submanifold"
    }

    fn keys(&self) -> &'static [&'static str] {
        &["f"]
    }

    fn build(&self, space: &ConfigurationSpace, t: &Table, probes: &[JetPoint]) -> Result<Codistribution, CliError> {
        let f = parse_all(space, &expressions(t, SECTION, "f")?, &path(SECTION, "f"))?;
        Codistribution::from_submanifold(space, f, probes).map_err(CliError::at(&path(SECTION, "f")))
    }
}

/// `f0^a(t, q) + f^a_i(t, q) v^i = 0`.
pub struct Linear;

impl ConstraintKind for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn keys(&self) -> &'static [&'static str] {
        &["f0", "fi"]
    }

    fn build(&self, space: &ConfigurationSpace, t: &Table, probes: &[JetPoint]) -> Result<Codistribution, CliError> {
        let f0 = expressions(t, SECTION, "f0")?;
        let fi = expression_matrix(t, SECTION, "fi")?;
        let spec = LinearConstraintSpec {
            f0: parse_all(space, &f0, &path(SECTION, "f0"))?,
            fi: parse_matrix(space, &fi, &path(SECTION, "fi"))?,
        };
        if spec.fi.len() != spec.f0.len() {
            return Err(invalid(
                &path(SECTION, "fi"),
                format!("{} rows for {} f0 entries", spec.fi.len(), spec.f0.len()),
            ));
        }
        Codistribution::from_linear(space, spec, probes).map_err(CliError::at(&path(SECTION, "fi")))
    }
}

/// Connection `q^a_t = B^a + σ^r_t B^a_r` on a split `base | fiber` of the
/// coordinates. Indices are one-based in the file.
pub struct Composite;

impl ConstraintKind for Composite {
    fn name(&self) -> &'static str {
        "composite"
    }

    fn keys(&self) -> &'static [&'static str] {
        &["base", "fiber", "b", "br"]
    }

    fn build(&self, space: &ConfigurationSpace, t: &Table, _: &[JetPoint]) -> Result<Codistribution, CliError> {
        let spec = CompositeConstraintSpec {
            base: indices(t, SECTION, "base")?,
            fiber: indices(t, SECTION, "fiber")?,
            b: parse_all(space, &expressions(t, SECTION, "b")?, &path(SECTION, "b"))?,
            br: parse_matrix(space, &expression_matrix(t, SECTION, "br")?, &path(SECTION, "br"))?,
        };
        Codistribution::from_composite(space, spec).map_err(CliError::at(SECTION))
    }
}

pub struct KindRegistry {
    kinds: BTreeMap<&'static str, Arc<dyn ConstraintKind>>,
}

impl Default for KindRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Forms));
        r.register(Arc::new(Submanifold));
        r.register(Arc::new(Linear));
        r.register(Arc::new(Composite));
        r
    }
}

impl KindRegistry {
    pub fn empty() -> Self {
        Self { kinds: BTreeMap::new() }
    }

    pub fn register(&mut self, kind: Arc<dyn ConstraintKind>) {
        self.kinds.insert(kind.name(), kind);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.kinds.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn ConstraintKind>, CliError> {
        self.kinds.get(name).ok_or_else(|| {
            invalid(
                &path(SECTION, "kind"),
                format!("unknown kind `{name}` (known: {})", self.names().join(", ")),
            )
        })
    }

    /// Builds the codistribution described by a `[constraint]` section.
    pub fn build(
        &self,
        space: &ConfigurationSpace,
        section: &Table,
        probes: &[JetPoint],
    ) -> Result<Codistribution, CliError> {
        let name = section
            .get("kind")
            .ok_or_else(|| invalid(&path(SECTION, "kind"), "missing"))?
            .as_str()
            .ok_or_else(|| invalid(&path(SECTION, "kind"), "expected a string"))?;
        let kind = self.get(name)?;
        let mut allowed = vec!["kind"];
        allowed.extend_from_slice(kind.keys());
        deny_unknown(section, SECTION, &allowed)?;
        kind.build(space, section, probes)
    }
}
