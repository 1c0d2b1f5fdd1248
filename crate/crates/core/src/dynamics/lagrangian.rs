use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{degenerate, DynamicEquation, ExprMetric};
use crate::bundle::{ConfigurationSpace, Jet2Point, JetPoint, ReferenceFrame};
use crate::error::{Error, Result};
use crate::expr::{self, ast_ops, Ast, Order};
use crate::linalg;

/// Lagrangian `L(t, q, v)` with its momenta `π_i = ∂L/∂v^i` and velocity
/// Hessian `π_ij` kept as expressions.
#[derive(Debug, Clone)]
pub struct LagrangianSystem {
    pub space: ConfigurationSpace,
    lagrangian: Ast,
    momenta: Vec<Ast>,
    hessian: Vec<Vec<Ast>>,
}

/// Value, gradient and Hessian of `L` over the jet variables at one point.
#[derive(Debug, Clone)]
pub struct LagrangianPartials {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
    dim: usize,
}

impl LagrangianPartials {
    fn v(&self, i: usize) -> usize {
        1 + self.dim + i
    }

    fn q(&self, i: usize) -> usize {
        1 + i
    }

    /// `π_i`
    pub fn momentum(&self, i: usize) -> f64 {
        self.grad[self.v(i)]
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.momentum(i)).collect()
    }

    /// `∂_i L`
    pub fn dq(&self, i: usize) -> f64 {
        self.grad[self.q(i)]
    }

    pub fn dt(&self) -> f64 {
        self.grad[0]
    }

    /// `π_ij`
    pub fn mass(&self) -> DMatrix<f64> {
        let m = self.dim;
        DMatrix::from_fn(m, m, |i, j| self.hess[(self.v(i), self.v(j))])
    }

    /// `∂_t π_i`
    pub fn dt_momentum(&self, i: usize) -> f64 {
        self.hess[(0, self.v(i))]
    }

    /// `∂_j π_i`
    pub fn dq_momentum(&self, i: usize, j: usize) -> f64 {
        self.hess[(self.q(j), self.v(i))]
    }
}

impl LagrangianSystem {
    pub fn new(space: ConfigurationSpace, lagrangian: Ast) -> Self {
        let m = space.dim();
        let momenta: Vec<Ast> = (0..m).map(|i| lagrangian.derivative(space.v_index(i))).collect();
        let hessian = momenta
            .iter()
            .map(|p| (0..m).map(|j| p.derivative(space.v_index(j))).collect())
            .collect();
        Self {
            space,
            lagrangian,
            momenta,
            hessian,
        }
    }

    pub fn parse(space: ConfigurationSpace, text: &str) -> Result<Self> {
        let l = space.parse(text)?;
        Ok(Self::new(space, l))
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn lagrangian(&self) -> &Ast {
        &self.lagrangian
    }

    pub fn momentum_exprs(&self) -> &[Ast] {
        &self.momenta
    }

    pub fn hessian_exprs(&self) -> &[Vec<Ast>] {
        &self.hessian
    }

    pub fn value(&self, x: &JetPoint) -> Result<f64> {
        Ok(expr::eval(&self.lagrangian, &x.values())?)
    }

    pub fn partials(&self, x: &JetPoint) -> Result<LagrangianPartials> {
        let b = expr::eval_with_partials(&self.lagrangian, &x.values(), Order::Hessian)?;
        Ok(LagrangianPartials {
            value: b.value,
            grad: b.gradient.unwrap(),
            hess: b.hessian.unwrap(),
            dim: self.dim(),
        })
    }

    /// `π_i(x)` without second derivatives.
    pub fn momenta(&self, x: &JetPoint) -> Result<Vec<f64>> {
        let values = x.values();
        self.momenta
            .iter()
            .map(|p| expr::eval(p, &values).map_err(Error::from))
            .collect()
    }

    /// `π_ij(x)` without third derivatives.
    pub fn mass(&self, x: &JetPoint) -> Result<DMatrix<f64>> {
        let values = x.values();
        let m = self.dim();
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                out[(i, j)] = expr::eval(&self.hessian[i][j], &values)?;
            }
        }
        Ok(out)
    }
}

/// Mass metric `m_ij = π_ij`. Fails with `DegenerateMetric` where
/// `|det π_ij| < 1e-12` at a probe; the Riemannian flag records whether
/// every probe was positive definite.
pub fn mass_metric_from_lagrangian(lag: &LagrangianSystem, probes: &[JetPoint]) -> Result<ExprMetric> {
    ExprMetric::new(lag.hessian.clone(), probes)
}

/// Lagrange dynamic equation
/// `ξ_L^i = m^{ij}(-∂_t π_j - ∂_k π_j v^k + ∂_j L)`.
#[derive(Debug, Clone)]
pub struct LagrangeDynamics {
    lag: Arc<LagrangianSystem>,
    riemannian: bool,
}

impl LagrangeDynamics {
    pub fn new(lag: Arc<LagrangianSystem>, riemannian: bool) -> Self {
        Self { lag, riemannian }
    }

    fn rhs(p: &LagrangianPartials, x: &JetPoint) -> DVector<f64> {
        let m = x.dim();
        DVector::from_fn(m, |j, _| {
            -p.dt_momentum(j) - (0..m).map(|k| p.dq_momentum(j, k) * x.v[k]).sum::<f64>() + p.dq(j)
        })
    }

    fn solve(&self, mass: &DMatrix<f64>, x: &JetPoint) -> Result<DMatrix<f64>> {
        linalg::metric_inverse(mass, self.riemannian).map_err(|e| degenerate(x, e))
    }
}

/// `ξ_L` for `lag`, using pivoted LU for the metric inverse.
pub fn lagrange_dynamic_equation(lag: &Arc<LagrangianSystem>) -> LagrangeDynamics {
    LagrangeDynamics::new(Arc::clone(lag), false)
}

impl DynamicEquation for LagrangeDynamics {
    fn dim(&self) -> usize {
        self.lag.dim()
    }

    fn eval(&self, x: &JetPoint) -> Result<Vec<f64>> {
        let p = self.lag.partials(x)?;
        let minv = self.solve(&p.mass(), x)?;
        Ok((minv * Self::rhs(&p, x)).iter().copied().collect())
    }

    fn eval_with_jacobian(&self, x: &JetPoint) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let m = x.dim();
        let values = x.values();
        let n = values.len();
        let sp = &self.lag.space;
        let p = self.lag.partials(x)?;
        let minv = self.solve(&p.mass(), x)?;
        let xi = &minv * Self::rhs(&p, x);

        // Second partials of each momentum give third partials of L.
        let mut dpi = Vec::with_capacity(m);
        for a in &self.lag.momenta {
            dpi.push(expr::eval_with_partials(a, &values, Order::Hessian)?);
        }
        let mut db = DMatrix::zeros(m, n);
        let mut dmass = vec![DMatrix::zeros(m, m); n];
        for z in 0..n {
            for j in 0..m {
                let h = dpi[j].hess();
                let g = dpi[j].grad();
                let mut d = -h[(0, z)] + p.hess[(z, sp.q_index(j))];
                for k in 0..m {
                    d -= h[(sp.q_index(k), z)] * x.v[k];
                    if z == sp.v_index(k) {
                        d -= g[sp.q_index(k)];
                    }
                }
                db[(j, z)] = d;
                for i in 0..m {
                    dmass[z][(j, i)] = h[(sp.v_index(i), z)];
                }
            }
        }
        let mut jac = DMatrix::zeros(m, n);
        for z in 0..n {
            let col = &minv * (db.column(z) - &dmass[z] * &xi);
            jac.set_column(z, &col);
        }
        Ok((xi.iter().copied().collect(), jac))
    }
}

/// `E_i = ∂_i L - (∂_t π_i + v^j ∂_j π_i + a^j π_ji)`.
pub fn euler_lagrange_residual(lag: &LagrangianSystem, w: &Jet2Point) -> Result<Vec<f64>> {
    let p = lag.partials(&w.x)?;
    let m = lag.dim();
    let mass = p.mass();
    Ok((0..m)
        .map(|i| {
            let dt_pi = p.dt_momentum(i)
                + (0..m).map(|j| w.x.v[j] * p.dq_momentum(i, j)).sum::<f64>()
                + (0..m).map(|j| w.a[j] * mass[(j, i)]).sum::<f64>();
            p.dq(i) - dt_pi
        })
        .collect())
}

/// `L = ½ m_ij (v^i - Γ^i)(v^j - Γ^j)` for a velocity-independent symmetric
/// metric table.
pub fn standard_lagrangian(
    space: ConfigurationSpace,
    metric: &[Vec<Ast>],
    frame: &ReferenceFrame,
) -> Result<LagrangianSystem> {
    let m = space.dim();
    if metric.len() != m || metric.iter().any(|r| r.len() != m) {
        return Err(Error::Shape(format!("metric must be {m}x{m}")));
    }
    if frame.dim() != m {
        return Err(Error::Shape(format!("frame must have {m} components")));
    }
    for i in 0..m {
        for j in 0..m {
            if !space.is_velocity_free(&metric[i][j]) {
                return Err(Error::Config(format!("metric entry ({i},{j}) depends on velocity")));
            }
            if metric[i][j] != metric[j][i] {
                return Err(Error::Config(format!("metric entries ({i},{j}) and ({j},{i}) differ")));
            }
        }
    }
    let rel: Vec<Ast> = (0..m)
        .map(|i| ast_ops::sub(Ast::Var(space.v_index(i)), frame.components()[i].clone()))
        .collect();
    let mut sum = Ast::zero();
    for i in 0..m {
        for j in 0..m {
            let term = ast_ops::mul(metric[i][j].clone(), ast_ops::mul(rel[i].clone(), rel[j].clone()));
            sum = ast_ops::add(sum, term);
        }
    }
    let l = ast_ops::mul(Ast::Const(0.5), sum);
    Ok(LagrangianSystem::new(space, l))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag(m: usize, text: &str) -> Arc<LagrangianSystem> {
        Arc::new(LagrangianSystem::parse(ConfigurationSpace::new(m).unwrap(), text).unwrap())
    }

    fn pt(q: &[f64], v: &[f64]) -> JetPoint {
        JetPoint::new(0.0, q.to_vec(), v.to_vec())
    }

    #[test]
    fn kinetic_metric_is_identity() {
        let l = lag(2, "0.5*(v1^2 + v2^2) - 9.8*q2");
        let x = pt(&[0.3, -1.0], &[2.0, 0.5]);
        let metric = mass_metric_from_lagrangian(&l, &[x.clone()]).unwrap();
        assert!(metric.riemannian());
        use crate::dynamics::MassMetric;
        assert_eq!(metric.eval(&x).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn indefinite_metric_flagged() {
        use crate::dynamics::MassMetric;
        let l = lag(2, "v1*v2");
        let x = pt(&[0.0, 0.0], &[1.0, 1.0]);
        let metric = mass_metric_from_lagrangian(&l, &[x.clone()]).unwrap();
        assert!(!metric.riemannian());
        assert_eq!(
            metric.eval(&x).unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
        );
    }

    #[test]
    fn degenerate_lagrangian_rejected() {
        let l = lag(2, "0.5*v1^2");
        let x = pt(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(
            mass_metric_from_lagrangian(&l, &[x]),
            Err(Error::DegenerateMetric { .. })
        ));
    }

    #[test]
    fn lagrange_dynamic_equation_examples() {
        let free = lagrange_dynamic_equation(&lag(1, "0.5*v1^2"));
        assert_eq!(free.eval(&pt(&[4.0], &[-2.0])).unwrap(), vec![0.0]);
        let osc = lagrange_dynamic_equation(&lag(1, "0.5*v1^2 - 0.5*q1^2"));
        assert_eq!(osc.eval(&pt(&[1.0], &[0.3])).unwrap(), vec![-1.0]);
        let grav = lagrange_dynamic_equation(&lag(2, "0.5*(v1^2 + v2^2) - 9.8*q2"));
        assert_eq!(grav.eval(&pt(&[1.0, 2.0], &[0.3, 0.1])).unwrap(), vec![0.0, -9.8]);
    }

    #[test]
    fn euler_lagrange_residual_examples() {
        let free = lag(1, "0.5*v1^2");
        let w = Jet2Point {
            x: pt(&[1.0], &[1.0]),
            a: vec![0.0],
        };
        assert_eq!(euler_lagrange_residual(&free, &w).unwrap(), vec![0.0]);
        let osc = lag(1, "0.5*v1^2 - 0.5*q1^2");
        let w = Jet2Point {
            x: pt(&[1.0], &[0.0]),
            a: vec![0.0],
        };
        assert_eq!(euler_lagrange_residual(&osc, &w).unwrap(), vec![-1.0]);
    }

    #[test]
    fn residual_vanishes_on_lagrange_acceleration() {
        let l = lag(2, "0.5*(2 + sin(q1))*v1^2 + 0.5*v2^2 + v1^4/12 + q1*v2 - 9.8*q2");
        let dynamics = lagrange_dynamic_equation(&l);
        let x = JetPoint::new(0.4, vec![0.7, -0.2], vec![1.1, -0.6]);
        let a = dynamics.eval(&x).unwrap();
        let e = euler_lagrange_residual(&l, &Jet2Point { x, a }).unwrap();
        assert!(e.iter().all(|r| r.abs() <= 1e-10), "{e:?}");
    }

    #[test]
    fn lagrange_jacobian_against_finite_differences() {
        let l = lag(2, "0.5*(2 + sin(q1))*v1^2 + 0.5*v2^2 + v1^4/12 + t*q1*v2 - 9.8*q2");
        let dynamics = lagrange_dynamic_equation(&l);
        let x = JetPoint::new(0.4, vec![0.7, -0.2], vec![1.1, -0.6]);
        let (_, jac) = dynamics.eval_with_jacobian(&x).unwrap();
        let base = x.values();
        let h = 1e-6;
        for z in 0..base.len() {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[z] += h;
            minus[z] -= h;
            let fp = dynamics.eval(&JetPoint::from_values(&plus)).unwrap();
            let fm = dynamics.eval(&JetPoint::from_values(&minus)).unwrap();
            for i in 0..2 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!(
                    (fd - jac[(i, z)]).abs() < 1e-6,
                    "z={z} i={i} fd={fd} ad={}",
                    jac[(i, z)]
                );
            }
        }
    }

    #[test]
    fn standard_lagrangian_examples() {
        let s = ConfigurationSpace::new(2).unwrap();
        let id = vec![vec![Ast::Const(1.0), Ast::zero()], vec![Ast::zero(), Ast::Const(1.0)]];
        let rest = standard_lagrangian(s.clone(), &id, &ReferenceFrame::rest(&s)).unwrap();
        let x = pt(&[0.2, 0.3], &[1.0, 2.0]);
        assert_eq!(rest.value(&x).unwrap(), 2.5);

        let moving = ReferenceFrame::parse(&s, &["1", "0"]).unwrap();
        let l = Arc::new(standard_lagrangian(s.clone(), &id, &moving).unwrap());
        let xi = lagrange_dynamic_equation(&l).eval(&x).unwrap();
        assert_eq!(xi, vec![0.0, 0.0]);

        let bad = vec![vec![Ast::Const(1.0)]];
        assert!(matches!(standard_lagrangian(s, &bad, &moving), Err(Error::Shape(_))));
    }
}
