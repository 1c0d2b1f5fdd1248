//! Newtonian and Lagrangian systems on `J¹Q`.
//!
//! A Newtonian system pairs a mass metric `m_ij(t, q, v)` with a dynamic
//! equation `q_tt = ξ(t, q, v)`. Lagrangian systems produce both from a single
//! Lagrangian through `m_ij = ∂²L/∂v^i∂v^j` and the Lagrange dynamic equation.

mod checks;
mod energy;
mod lagrangian;

pub use checks::{apply_external_force, check_compatibility, check_metric_symmetry, ForceReport};
pub use energy::{energy_balance_residual, energy_function};
pub use lagrangian::{
    euler_lagrange_residual, lagrange_dynamic_equation, mass_metric_from_lagrangian, standard_lagrangian,
    LagrangeDynamics, LagrangianPartials, LagrangianSystem,
};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bundle::{ConfigurationSpace, JetPoint};
use crate::error::{Error, Result};
use crate::expr::{self, Ast, Order};
use crate::linalg::{self, Singular};

/// Fiber metric on vertical velocities.
pub trait MassMetric: Send + Sync {
    fn dim(&self) -> usize;

    /// Whether the metric was found positive definite at every probe.
    fn riemannian(&self) -> bool;

    fn eval(&self, x: &JetPoint) -> Result<DMatrix<f64>>;

    /// The matrix together with its partial derivative along every jet
    /// variable `t, q1.., v1..`.
    fn eval_with_partials(&self, x: &JetPoint) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)>;

    /// `m^{ij}`: Cholesky when Riemannian, pivoted LU otherwise.
    fn inverse(&self, x: &JetPoint) -> Result<DMatrix<f64>> {
        let m = self.eval(x)?;
        linalg::metric_inverse(&m, self.riemannian()).map_err(|e| degenerate(x, e))
    }
}

pub(crate) fn degenerate(x: &JetPoint, e: Singular) -> Error {
    Error::DegenerateMetric {
        point: x.values(),
        detail: match e {
            Singular::NotPositiveDefinite => "Cholesky factorization failed".into(),
            Singular::SmallPivot => format!("pivot below {:e}", linalg::PIVOT_TOL),
        },
    }
}

/// Second-order dynamic equation `q_tt = ξ(t, q, v)`.
pub trait DynamicEquation: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &JetPoint) -> Result<Vec<f64>>;

    /// `ξ` and its Jacobian `∂ξ^i/∂z` over jet variables `z` (`m × (1+2m)`).
    fn eval_with_jacobian(&self, x: &JetPoint) -> Result<(Vec<f64>, DMatrix<f64>)>;
}

/// Metric given entrywise by expressions.
#[derive(Debug, Clone)]
pub struct ExprMetric {
    entries: Vec<Vec<Ast>>,
    riemannian: bool,
}

impl ExprMetric {
    /// Builds a metric from a square table of expressions. The Riemannian
    /// flag is set by probing positive-definiteness at `probes`.
    pub fn new(entries: Vec<Vec<Ast>>, probes: &[JetPoint]) -> Result<Self> {
        let m = entries.len();
        if m == 0 || entries.iter().any(|row| row.len() != m) {
            return Err(Error::Shape("mass metric must be a non-empty square table".into()));
        }
        let mut metric = Self {
            entries,
            riemannian: true,
        };
        metric.riemannian = metric.probe(probes)?;
        Ok(metric)
    }

    /// Checks nondegeneracy at every probe and reports positive-definiteness.
    pub fn probe(&self, probes: &[JetPoint]) -> Result<bool> {
        let mut spd = true;
        for x in probes {
            let m = self.eval(x)?;
            let det = m.determinant();
            if !(det.abs() >= 1e-12) {
                return Err(Error::DegenerateMetric {
                    point: x.values(),
                    detail: format!("det = {det:e}"),
                });
            }
            spd &= linalg::is_positive_definite(&m);
        }
        Ok(spd)
    }

    pub fn entries(&self) -> &[Vec<Ast>] {
        &self.entries
    }
}

impl MassMetric for ExprMetric {
    fn dim(&self) -> usize {
        self.entries.len()
    }

    fn riemannian(&self) -> bool {
        self.riemannian
    }

    fn eval(&self, x: &JetPoint) -> Result<DMatrix<f64>> {
        let m = self.dim();
        let values = x.values();
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                out[(i, j)] = expr::eval(&self.entries[i][j], &values)?;
            }
        }
        Ok(out)
    }

    fn eval_with_partials(&self, x: &JetPoint) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        let m = self.dim();
        let values = x.values();
        let n = values.len();
        let mut out = DMatrix::zeros(m, m);
        let mut partials = vec![DMatrix::zeros(m, m); n];
        for i in 0..m {
            for j in 0..m {
                let b = expr::eval_with_partials(&self.entries[i][j], &values, Order::Gradient)?;
                out[(i, j)] = b.value;
                for (k, g) in b.grad().iter().enumerate() {
                    partials[k][(i, j)] = *g;
                }
            }
        }
        Ok((out, partials))
    }
}

/// Dynamic equation given componentwise by expressions.
#[derive(Debug, Clone)]
pub struct ExprDynamics {
    xi: Vec<Ast>,
}

impl ExprDynamics {
    pub fn new(xi: Vec<Ast>) -> Self {
        Self { xi }
    }

    pub fn components(&self) -> &[Ast] {
        &self.xi
    }
}

impl DynamicEquation for ExprDynamics {
    fn dim(&self) -> usize {
        self.xi.len()
    }

    fn eval(&self, x: &JetPoint) -> Result<Vec<f64>> {
        let values = x.values();
        self.xi
            .iter()
            .map(|a| expr::eval(a, &values).map_err(Error::from))
            .collect()
    }

    fn eval_with_jacobian(&self, x: &JetPoint) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let values = x.values();
        let mut jac = DMatrix::zeros(self.xi.len(), values.len());
        let mut out = Vec::with_capacity(self.xi.len());
        for (i, a) in self.xi.iter().enumerate() {
            let b = expr::eval_with_partials(a, &values, Order::Gradient)?;
            out.push(b.value);
            for (k, g) in b.grad().iter().enumerate() {
                jac[(i, k)] = *g;
            }
        }
        Ok((out, jac))
    }
}

/// Covector field `F_i(t, q, v)` on vertical velocities.
#[derive(Debug, Clone)]
pub struct ExternalForce {
    components: Vec<Ast>,
}

impl ExternalForce {
    pub fn new(components: Vec<Ast>) -> Self {
        Self { components }
    }

    pub fn parse<S: AsRef<str>>(space: &ConfigurationSpace, texts: &[S]) -> Result<Self> {
        let components = space.parse_all(texts)?;
        if components.len() != space.dim() {
            return Err(Error::Shape(format!(
                "force has {} components, expected {}",
                components.len(),
                space.dim()
            )));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[Ast] {
        &self.components
    }

    pub fn eval(&self, x: &JetPoint) -> Result<Vec<f64>> {
        ExprDynamics::new(self.components.clone()).eval(x)
    }

    pub fn eval_with_jacobian(&self, x: &JetPoint) -> Result<(Vec<f64>, DMatrix<f64>)> {
        ExprDynamics::new(self.components.clone()).eval_with_jacobian(x)
    }
}

/// `ξ_F = ξ + m^{-1} F`.
pub struct ForcedDynamics {
    base: Arc<dyn DynamicEquation>,
    metric: Arc<dyn MassMetric>,
    force: ExprDynamics,
}

impl DynamicEquation for ForcedDynamics {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, x: &JetPoint) -> Result<Vec<f64>> {
        let xi = self.base.eval(x)?;
        let f = DVector::from_vec(self.force.eval(x)?);
        let shift = self.metric.inverse(x)? * f;
        Ok(xi.iter().zip(shift.iter()).map(|(a, b)| a + b).collect())
    }

    fn eval_with_jacobian(&self, x: &JetPoint) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let (xi, dxi) = self.base.eval_with_jacobian(x)?;
        let (f, df) = self.force.eval_with_jacobian(x)?;
        let (_, dm) = self.metric.eval_with_partials(x)?;
        let minv = self.metric.inverse(x)?;
        let f = DVector::from_vec(f);
        let shift = &minv * &f;
        let mut jac = dxi;
        for (k, dmk) in dm.iter().enumerate() {
            // ∂(m^{-1} F) = m^{-1} (∂F - ∂m m^{-1} F)
            let col = &minv * (df.column(k) - dmk * &shift);
            for i in 0..jac.nrows() {
                jac[(i, k)] += col[i];
            }
        }
        let out = xi.iter().zip(shift.iter()).map(|(a, b)| a + b).collect();
        Ok((out, jac))
    }
}

/// A mass metric together with a dynamic equation.
#[derive(Clone)]
pub struct NewtonianSystem {
    pub space: ConfigurationSpace,
    pub metric: Arc<dyn MassMetric>,
    pub xi: Arc<dyn DynamicEquation>,
}

impl std::fmt::Debug for NewtonianSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NewtonianSystem")
            .field("dim", &self.space.dim())
            .field("riemannian", &self.metric.riemannian())
            .finish()
    }
}

impl NewtonianSystem {
    pub fn new(space: ConfigurationSpace, metric: Arc<dyn MassMetric>, xi: Arc<dyn DynamicEquation>) -> Result<Self> {
        if metric.dim() != space.dim() || xi.dim() != space.dim() {
            return Err(Error::Shape(format!(
                "metric dim {} / dynamics dim {} / space dim {}",
                metric.dim(),
                xi.dim(),
                space.dim()
            )));
        }
        Ok(Self { space, metric, xi })
    }

    /// Newtonian system of a nondegenerate Lagrangian.
    pub fn from_lagrangian(lag: &Arc<LagrangianSystem>, probes: &[JetPoint]) -> Result<Self> {
        let metric = mass_metric_from_lagrangian(lag, probes)?;
        let xi = lagrange_dynamic_equation(lag);
        Self::new(lag.space.clone(), Arc::new(metric), Arc::new(xi))
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }
}
