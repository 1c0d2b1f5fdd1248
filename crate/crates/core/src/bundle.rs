//! State types on the configuration bundle `Q -> R`, its jet spaces and
//! momentum phase spaces, plus reference frames.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{self, Ast, Order, Role, VariableSpace};

/// Configuration space of dimension `m` with jet coordinates
/// `t, q1..qm, v1..vm` and optional named constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationSpace {
    dim: usize,
    labels: Vec<String>,
    space: Arc<VariableSpace>,
    parameters: Vec<(usize, f64)>,
}

impl ConfigurationSpace {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_parameters(dim, &[])
    }

    /// Space whose expressions may also reference the named constants.
    pub fn with_parameters(dim: usize, parameters: &[(&str, f64)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("configuration dimension must be at least 1".into()));
        }
        let names: Vec<&str> = parameters.iter().map(|(n, _)| *n).collect();
        let space = VariableSpace::jet(dim, &names)?;
        let parameters = parameters
            .iter()
            .map(|(n, v)| (space.index_of(n).unwrap(), *v))
            .collect();
        Ok(Self {
            dim,
            labels: (1..=dim).map(|i| format!("q{i}")).collect(),
            space: Arc::new(space),
            parameters,
        })
    }

    /// Display names for the coordinates (used in reports and CSV headers).
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim {
            return Err(Error::Shape(format!(
                "{} labels for dimension {}",
                labels.len(),
                self.dim
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn variables(&self) -> &VariableSpace {
        &self.space
    }

    /// Number of jet variables `1 + 2m`.
    pub fn jet_len(&self) -> usize {
        1 + 2 * self.dim
    }

    pub const fn t_index(&self) -> usize {
        0
    }

    pub fn q_index(&self, i: usize) -> usize {
        1 + i
    }

    pub fn v_index(&self, i: usize) -> usize {
        1 + self.dim + i
    }

    /// Parses an expression and folds the named constants into it.
    pub fn parse(&self, text: &str) -> Result<Ast> {
        let mut ast = expr::parse(text, &self.space)?;
        for &(index, value) in &self.parameters {
            if ast.references(index) {
                ast = ast.substitute(index, value);
            }
        }
        Ok(ast)
    }

    pub fn parse_all<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<Ast>> {
        texts.iter().map(|t| self.parse(t.as_ref())).collect()
    }

    /// True when `ast` references no velocity variable.
    pub fn is_velocity_free(&self, ast: &Ast) -> bool {
        self.space
            .indices(Role::Velocity)
            .into_iter()
            .all(|i| !ast.references(i))
    }
}

/// Point `(t, q^i, q^i_t)` of the first jet manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoint {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl JetPoint {
    pub fn new(t: f64, q: Vec<f64>, v: Vec<f64>) -> Self {
        debug_assert_eq!(q.len(), v.len());
        Self { t, q, v }
    }

    /// Splits a flat `[t, q.., v..]` vector.
    pub fn from_values(values: &[f64]) -> Self {
        let m = (values.len() - 1) / 2;
        Self {
            t: values[0],
            q: values[1..=m].to_vec(),
            v: values[1 + m..1 + 2 * m].to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Flat `[t, q.., v..]` ordering used by expression evaluation.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + 2 * self.q.len());
        out.push(self.t);
        out.extend_from_slice(&self.q);
        out.extend_from_slice(&self.v);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.q.iter().chain(&self.v).all(|x| x.is_finite())
    }
}

/// Point of the second jet manifold: a jet point plus accelerations.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2Point {
    pub x: JetPoint,
    pub a: Vec<f64>,
}

/// Point `(t, q^i, p_i)` of the momentum phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(t: f64, q: Vec<f64>, p: Vec<f64>) -> Self {
        Self { t, q, p }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }
}

/// Point of the vertical momentum phase space: `(t, q, p, q̇, ṗ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalPhasePoint {
    pub base: PhasePoint,
    pub qdot: Vec<f64>,
    pub pdot: Vec<f64>,
}

/// Connection `Γ^i(t, q)` on `Q -> R`, i.e. a reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFrame {
    gamma: Vec<Ast>,
}

impl ReferenceFrame {
    pub fn new(space: &ConfigurationSpace, gamma: Vec<Ast>) -> Result<Self> {
        if gamma.len() != space.dim() {
            return Err(Error::Shape(format!(
                "frame has {} components, expected {}",
                gamma.len(),
                space.dim()
            )));
        }
        Ok(Self { gamma })
    }

    pub fn parse<S: AsRef<str>>(space: &ConfigurationSpace, gamma: &[S]) -> Result<Self> {
        Self::new(space, space.parse_all(gamma)?)
    }

    /// The frame at rest in the given coordinates, `Γ = 0`.
    pub fn rest(space: &ConfigurationSpace) -> Self {
        Self {
            gamma: vec![Ast::zero(); space.dim()],
        }
    }

    pub fn components(&self) -> &[Ast] {
        &self.gamma
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn eval(&self, x: &JetPoint) -> Result<Vec<f64>> {
        let values = x.values();
        self.gamma
            .iter()
            .map(|g| expr::eval(g, &values).map_err(Error::from))
            .collect()
    }

    /// Checks that no component varies with velocity at the sample points.
    pub fn check_velocity_independent(&self, space: &ConfigurationSpace, points: &[JetPoint]) -> Result<()> {
        for x in points {
            let values = x.values();
            for (i, g) in self.gamma.iter().enumerate() {
                let b = expr::eval_with_partials(g, &values, Order::Gradient)?;
                for k in 0..space.dim() {
                    let d = b.grad()[space.v_index(k)];
                    if d != 0.0 {
                        return Err(Error::InvalidFrame(format!(
                            "component {} has velocity derivative {d} along v{} at {:?}",
                            i + 1,
                            k + 1,
                            values
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Relative velocity `v^i - Γ^i(t, q)`.
pub fn relative_velocity(frame: &ReferenceFrame, x: &JetPoint) -> Result<Vec<f64>> {
    let g = frame.eval(x)?;
    Ok(x.v.iter().zip(g).map(|(v, g)| v - g).collect())
}

/// Total derivative `d_t Γ^i = ∂_t Γ^i + v^j ∂_j Γ^i`.
pub fn frame_total_derivative(frame: &ReferenceFrame, x: &JetPoint) -> Result<Vec<f64>> {
    let values = x.values();
    let m = x.dim();
    frame
        .gamma
        .iter()
        .map(|g| {
            let b = expr::eval_with_partials(g, &values, Order::Gradient)?;
            let grad = b.grad();
            Ok(grad[0] + (0..m).map(|j| x.v[j] * grad[1 + j]).sum::<f64>())
        })
        .collect()
}
