//! Splitting of a dynamic equation into a constraint-compatible part and an
//! ideal reaction.
//!
//! The default rule is the metric projection. A saddle-point (KKT) oracle and
//! the composite-fibration splitting are available through the same
//! [`Decomposer`] interface and can be looked up by name in a
//! [`DecomposerRegistry`].

mod strategy;

pub use strategy::{CompositeSplitting, Decomposer, DecomposerRegistry, Decomposition, KktOracle, MetricProjection};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bundle::{ConfigurationSpace, JetPoint};
use crate::constraint::{Codistribution, CompositeConstraintSpec};
use crate::dynamics::{DynamicEquation, MassMetric, NewtonianSystem};
use crate::error::{Error, Result};
use crate::linalg;
use crate::report::CheckReport;

pub const COMPATIBILITY_TOL: f64 = 1e-10;
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
pub const PYTHAGORAS_TOL: f64 = 1e-9;

/// A Newtonian system restricted by a codistribution.
#[derive(Clone)]
pub struct ConstrainedDynamics {
    pub base: NewtonianSystem,
    pub cod: Arc<Codistribution>,
    decomposer: Arc<dyn Decomposer>,
}

impl std::fmt::Debug for ConstrainedDynamics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstrainedDynamics")
            .field("base", &self.base)
            .field("forms", &self.cod.len())
            .field("method", &self.decomposer.name())
            .finish()
    }
}

/// Metric projection of `sys` onto the constraint. Rejects metrics that were
/// not positive definite at their probes.
pub fn constrain(sys: NewtonianSystem, cod: Arc<Codistribution>) -> Result<ConstrainedDynamics> {
    if !sys.metric.riemannian() {
        return Err(Error::NotRiemannian { point: Vec::new() });
    }
    ConstrainedDynamics::with_decomposer(sys, cod, Arc::new(MetricProjection))
}

impl ConstrainedDynamics {
    pub fn with_decomposer(
        base: NewtonianSystem,
        cod: Arc<Codistribution>,
        decomposer: Arc<dyn Decomposer>,
    ) -> Result<Self> {
        if cod.dim() != base.dim() {
            return Err(Error::Shape(format!(
                "constraint dimension {} differs from system dimension {}",
                cod.dim(),
                base.dim()
            )));
        }
        Ok(Self { base, cod, decomposer })
    }

    pub fn method(&self) -> &'static str {
        self.decomposer.name()
    }

    pub fn space(&self) -> &ConfigurationSpace {
        &self.base.space
    }

    pub fn metric(&self) -> &dyn MassMetric {
        self.base.metric.as_ref()
    }

    pub fn decompose(&self, x: &JetPoint) -> Result<Decomposition> {
        self.decomposer.decompose(&self.base, &self.cod, x)
    }

    /// `max_a |s^a(ξ̃)|` at `x`.
    pub fn compatibility_residual(&self, x: &JetPoint, d: &Decomposition) -> Result<f64> {
        if self.cod.is_empty() {
            return Ok(0.0);
        }
        Ok(self.cod.eval(x)?.contract(&x.v, &d.xi_tilde).amax())
    }

    /// `max |m(r, w)|` over an orthonormal kernel basis of `ṡ`.
    pub fn orthogonality_residual(&self, x: &JetPoint, d: &Decomposition) -> Result<f64> {
        let mass = self.base.metric.eval(x)?;
        let mr = &mass * DVector::from_column_slice(&d.reaction);
        Ok(self.kernel(x)?.iter().map(|w| mr.dot(w).abs()).fold(0.0, f64::max))
    }

    /// `max |F_i + m_ij r^j|`.
    pub fn duality_residual(&self, x: &JetPoint, d: &Decomposition) -> Result<f64> {
        let mass = self.base.metric.eval(x)?;
        let mr = &mass * DVector::from_column_slice(&d.reaction);
        Ok(d.force
            .iter()
            .zip(mr.iter())
            .map(|(f, g)| (f + g).abs())
            .fold(0.0, f64::max))
    }

    /// Orthonormal basis of the virtual accelerations `{w : ṡ^a_i w^i = 0}`.
    pub fn kernel(&self, x: &JetPoint) -> Result<Vec<DVector<f64>>> {
        if self.cod.is_empty() {
            return Ok((0..self.base.dim())
                .map(|i| DVector::from_fn(self.base.dim(), |k, _| if k == i { 1.0 } else { 0.0 }))
                .collect());
        }
        Ok(linalg::kernel_basis(&self.cod.eval(x)?.sdot))
    }
}

impl DynamicEquation for ConstrainedDynamics {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, x: &JetPoint) -> Result<Vec<f64>> {
        Ok(self.decompose(x)?.xi_tilde)
    }

    /// Central differences; `ξ̃` contains linear solves.
    fn eval_with_jacobian(&self, x: &JetPoint) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let xi = self.eval(x)?;
        let values = x.values();
        let mut jac = DMatrix::zeros(xi.len(), values.len());
        for z in 0..values.len() {
            let h = 1e-6 * values[z].abs().max(1.0);
            let mut plus = values.clone();
            let mut minus = values.clone();
            plus[z] += h;
            minus[z] -= h;
            let fp = self.eval(&JetPoint::from_values(&plus))?;
            let fm = self.eval(&JetPoint::from_values(&minus))?;
            for i in 0..xi.len() {
                jac[(i, z)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok((xi, jac))
    }
}

/// `G(a) = m_ij (ξ^i - a^i)(ξ^j - a^j)`.
pub fn gauss_value(sys: &NewtonianSystem, x: &JetPoint, a: &[f64]) -> Result<f64> {
    let xi = sys.xi.eval(x)?;
    let mass = sys.metric.eval(x)?;
    let d = DVector::from_iterator(xi.len(), xi.iter().zip(a).map(|(p, q)| p - q));
    Ok(d.dot(&(&mass * &d)))
}

/// Result of sampling virtual accelerations around `ξ̃`.
#[derive(Debug, Clone)]
pub struct LeastNormCertificate {
    /// `|G(ξ̃ + w) - G(ξ̃) - m(w, w)|`.
    pub pythagoras: CheckReport,
    /// Samples with `G(ξ̃ + w) < G(ξ̃)`.
    pub violations: usize,
    pub trials: usize,
    /// Set when `ṡ` is square: no virtual accelerations exist.
    pub unique: bool,
}

impl LeastNormCertificate {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.pythagoras.passed()
    }
}

/// Compares `G(ξ̃)` with `G(ξ̃ + w)` for `trials` random kernel vectors
/// `w = Σ c_k e_k`, with coefficients `c_k` drawn from `coefficient`.
pub fn least_norm_certificate(
    cd: &ConstrainedDynamics,
    x: &JetPoint,
    trials: usize,
    coefficient: &mut dyn FnMut() -> f64,
) -> Result<LeastNormCertificate> {
    let d = cd.decompose(x)?;
    let kernel = cd.kernel(x)?;
    let mass = cd.base.metric.eval(x)?;
    let r = DVector::from_column_slice(&d.reaction);
    let g0 = r.dot(&(&mass * &r));
    let mut pythagoras = CheckReport::new("gauss_pythagoras", PYTHAGORAS_TOL);
    let mut violations = 0;
    let unique = kernel.is_empty();
    if unique {
        pythagoras = pythagoras.with_note("unique decomposition");
    } else {
        for _ in 0..trials {
            let w = kernel
                .iter()
                .fold(DVector::zeros(cd.base.dim()), |acc, e| acc + e * coefficient());
            let mw = &mass * &w;
            let ww = w.dot(&mw);
            let gap = &r - &w;
            let g = gap.dot(&(&mass * &gap));
            pythagoras.record(g - g0 - ww, || {
                let mut p = x.values();
                p.extend(w.iter());
                p
            });
            if ww > 0.0 && g < g0 {
                violations += 1;
            }
        }
    }
    Ok(LeastNormCertificate {
        pythagoras,
        violations,
        trials: if unique { 0 } else { trials },
        unique,
    })
}

/// `ξ̃` from the saddle-point system, independent of the projection formula.
pub fn multiplier_oracle(sys: &NewtonianSystem, cod: &Codistribution, x: &JetPoint) -> Result<Vec<f64>> {
    Ok(KktOracle.decompose(sys, cod, x)?.xi_tilde)
}

/// Composite splitting of an arbitrary dynamic equation: returns `(ξ̃, r)`.
pub fn composite_decomposition(
    space: &ConfigurationSpace,
    xi: &dyn DynamicEquation,
    spec: &CompositeConstraintSpec,
    x: &JetPoint,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let cod = Codistribution::from_composite(space, spec.clone())?;
    let xi = xi.eval(x)?;
    let s_xi = cod.eval(x)?.contract(&x.v, &xi);
    let mut r = vec![0.0; xi.len()];
    for (a, &fa) in spec.fiber.iter().enumerate() {
        r[fa] = s_xi[a];
    }
    Ok((xi.iter().zip(&r).map(|(p, q)| p - q).collect(), r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::LinearConstraintSpec;
    use crate::dynamics::{ExprDynamics, ExprMetric, LagrangianSystem};
    use crate::expr::Ast;

    fn gravity() -> NewtonianSystem {
        let s = ConfigurationSpace::new(2).unwrap();
        let l = Arc::new(LagrangianSystem::parse(s, "0.5*(v1^2+v2^2) - 9.8*q2").unwrap());
        NewtonianSystem::from_lagrangian(&l, &[]).unwrap()
    }

    fn sub(sys: &NewtonianSystem, f: &str, probe: &JetPoint) -> Arc<Codistribution> {
        let s = &sys.space;
        Arc::new(Codistribution::from_submanifold(s, s.parse_all(&[f]).unwrap(), &[probe.clone()]).unwrap())
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn frozen_vertical_velocity() {
        let sys = gravity();
        let x = JetPoint::new(0.0, vec![0.0, 1.0], vec![0.5, 0.0]);
        let cd = constrain(sys.clone(), sub(&sys, "v2", &x)).unwrap();
        let d = cd.decompose(&x).unwrap();
        assert_eq!(d.xi_tilde, vec![0.0, 0.0]);
        assert_eq!(d.force, vec![0.0, 9.8]);
        assert_eq!(multiplier_oracle(&sys, &cd.cod, &x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn constant_speed_closed_form() {
        let sys = gravity();
        let x = JetPoint::new(0.0, vec![0.0, 0.0], vec![0.6, 0.8]);
        let cd = constrain(sys.clone(), sub(&sys, "v1^2+v2^2-1", &x)).unwrap();
        let d = cd.decompose(&x).unwrap();
        assert!(close(&d.xi_tilde, &[4.704, -3.528], 1e-12), "{:?}", d.xi_tilde);
        assert!(close(&d.reaction, &[-4.704, -6.272], 1e-12));
        assert!((d.multipliers[0] + 3.92).abs() < 1e-12);
        // G = |r|^2 = (2λ)^2 = 7.84^2
        let g = gauss_value(&sys, &x, &d.xi_tilde).unwrap();
        assert!((g - 61.4656).abs() < 1e-12, "{g}");
        assert!(cd.compatibility_residual(&x, &d).unwrap() <= 1e-15);
        assert!(cd.duality_residual(&x, &d).unwrap() <= 1e-15);
    }

    #[test]
    fn unconstrained_limit() {
        let sys = gravity();
        let x = JetPoint::new(0.0, vec![0.0, 0.0], vec![1.0, 2.0]);
        let cod = Arc::new(Codistribution::unconstrained(&sys.space));
        let cd = constrain(sys.clone(), Arc::clone(&cod)).unwrap();
        let d = cd.decompose(&x).unwrap();
        assert_eq!(
            (d.xi_tilde.clone(), d.reaction.clone()),
            (vec![0.0, -9.8], vec![0.0, 0.0])
        );
        assert_eq!(multiplier_oracle(&sys, &cod, &x).unwrap(), vec![0.0, -9.8]);
    }

    #[test]
    fn gauss_examples() {
        let sys = gravity();
        let x = JetPoint::new(0.0, vec![0.0, 0.0], vec![0.0, 0.0]);
        assert_eq!(gauss_value(&sys, &x, &[0.0, -9.8]).unwrap(), 0.0);
        let s = ConfigurationSpace::new(2).unwrap();
        let metric = ExprMetric::new(
            vec![s.parse_all(&["1", "0"]).unwrap(), s.parse_all(&["0", "1"]).unwrap()],
            &[],
        )
        .unwrap();
        let free =
            NewtonianSystem::new(s, Arc::new(metric), Arc::new(ExprDynamics::new(vec![Ast::zero(); 2]))).unwrap();
        assert_eq!(gauss_value(&free, &x, &[3.0, 4.0]).unwrap(), 25.0);
    }

    #[test]
    fn certificate_cases() {
        let sys = gravity();
        let x = JetPoint::new(0.0, vec![0.0, 0.0], vec![0.6, 0.8]);
        let cd = constrain(sys.clone(), sub(&sys, "v1^2+v2^2-1", &x)).unwrap();
        let mut k = 0u32;
        let mut coef = || {
            k += 1;
            ((k as f64) * 0.754877666).fract() * 2.0 - 1.0
        };
        let c = least_norm_certificate(&cd, &x, 0, &mut coef).unwrap();
        assert!(c.passed() && c.pythagoras.samples == 0);
        let c = least_norm_certificate(&cd, &x, 1000, &mut coef).unwrap();
        assert!(c.passed(), "{}", c.pythagoras);
        assert_eq!(c.violations, 0);

        let s = &sys.space;
        let full = LinearConstraintSpec::parse(s, &["0", "0"], &[vec!["1", "0"], vec!["0", "1"]]).unwrap();
        let cd = constrain(
            sys.clone(),
            Arc::new(Codistribution::from_linear(s, full, &[x.clone()]).unwrap()),
        )
        .unwrap();
        let c = least_norm_certificate(&cd, &x, 10, &mut coef).unwrap();
        assert!(c.unique && c.passed());
        assert_eq!(c.pythagoras.note.as_deref(), Some("unique decomposition"));
    }

    #[test]
    fn indefinite_metric_is_rejected() {
        let s = ConfigurationSpace::new(2).unwrap();
        let x = JetPoint::new(0.0, vec![0.0, 0.0], vec![1.0, 0.0]);
        let metric = ExprMetric::new(
            vec![s.parse_all(&["1", "0"]).unwrap(), s.parse_all(&["0", "-1"]).unwrap()],
            &[x.clone()],
        )
        .unwrap();
        let sys = NewtonianSystem::new(
            s.clone(),
            Arc::new(metric),
            Arc::new(ExprDynamics::new(vec![Ast::zero(); 2])),
        )
        .unwrap();
        let cod = Arc::new(Codistribution::from_submanifold(&s, s.parse_all(&["v1"]).unwrap(), &[]).unwrap());
        assert!(matches!(
            constrain(sys.clone(), Arc::clone(&cod)),
            Err(Error::NotRiemannian { .. })
        ));
        assert!(matches!(
            MetricProjection.decompose(&sys, &cod, &x),
            Err(Error::NotRiemannian { .. })
        ));
    }

    #[test]
    fn singular_saddle_system() {
        let sys = gravity();
        let x = JetPoint::new(0.0, vec![0.0, 0.0], vec![0.0, 0.0]);
        let cod = sub(&sys, "v1^2+v2^2-1", &JetPoint::new(0.0, vec![0.0, 0.0], vec![1.0, 0.0]));
        assert!(matches!(
            KktOracle.decompose(&sys, &cod, &x),
            Err(Error::SingularKkt { .. })
        ));
        assert!(matches!(
            MetricProjection.decompose(&sys, &cod, &x),
            Err(Error::InadmissibleConstraint {
                rank: 0,
                expected: 1,
                ..
            })
        ));
    }

    #[test]
    fn composite_examples() {
        let sys = gravity();
        let s = &sys.space;
        let x = JetPoint::new(0.3, vec![0.1, 0.2], vec![0.7, -0.4]);
        let spec = |b: &str, br: &str| CompositeConstraintSpec {
            base: vec![0],
            fiber: vec![1],
            b: vec![s.parse(b).unwrap()],
            br: vec![vec![s.parse(br).unwrap()]],
        };
        let (xt, r) = composite_decomposition(s, sys.xi.as_ref(), &spec("0", "0"), &x).unwrap();
        assert_eq!((xt, r), (vec![0.0, 0.0], vec![0.0, -9.8]));

        // ξ̃ fiber tracks ξ base
        let tilted = ExprDynamics::new(s.parse_all(&["2.5", "-9.8"]).unwrap());
        let (xt, _) = composite_decomposition(s, &tilted, &spec("0", "1"), &x).unwrap();
        assert_eq!(xt, vec![2.5, 2.5]);

        let compatible = ExprDynamics::new(s.parse_all(&["1", "1"]).unwrap());
        let (_, r) = composite_decomposition(s, &compatible, &spec("0", "1"), &x).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);

        let cod = Arc::new(Codistribution::from_composite(s, spec("t*q2", "sin(q1)")).unwrap());
        let cd =
            ConstrainedDynamics::with_decomposer(sys.clone(), Arc::clone(&cod), Arc::new(CompositeSplitting)).unwrap();
        let d = cd.decompose(&x).unwrap();
        assert!(cd.compatibility_residual(&x, &d).unwrap() <= 1e-14);
        assert_eq!(d.xi_tilde[0], d.xi[0]);
    }

    #[test]
    fn composite_matches_metric_on_block_diagonal_metric() {
        // m block-diagonal in (σ, q) and B^a_r = 0: the fiber is m-orthogonal to the base
        let s = ConfigurationSpace::new(3).unwrap();
        let l = Arc::new(
            LagrangianSystem::parse(s.clone(), "0.5*(2*v1^2 + v1*v2 + v2^2) + 1.5*v3^2 - q1*q3 - 9.8*q2").unwrap(),
        );
        let sys = NewtonianSystem::from_lagrangian(&l, &[]).unwrap();
        let spec = CompositeConstraintSpec {
            base: vec![0, 1],
            fiber: vec![2],
            b: vec![s.parse("t*q1 + q2").unwrap()],
            br: vec![vec![Ast::zero(), Ast::zero()]],
        };
        let cod = Arc::new(Codistribution::from_composite(&s, spec).unwrap());
        let x = JetPoint::new(0.4, vec![0.3, -0.2, 0.5], vec![1.0, 0.5, -0.3]);
        let a = DecomposerRegistry::default()
            .get("composite")
            .unwrap()
            .decompose(&sys, &cod, &x)
            .unwrap();
        let b = MetricProjection.decompose(&sys, &cod, &x).unwrap();
        assert!(
            close(&a.xi_tilde, &b.xi_tilde, 1e-12),
            "{:?} {:?}",
            a.xi_tilde,
            b.xi_tilde
        );
        assert!(close(&a.force, &b.force, 1e-12));
    }

    #[test]
    fn registry_lookup() {
        let reg = DecomposerRegistry::default();
        assert_eq!(reg.names(), vec!["composite", "kkt", "metric"]);
        assert!(matches!(reg.get("simplex"), Err(Error::Config(_))));
        let sys = gravity();
        let x = JetPoint::new(0.0, vec![0.0, 0.0], vec![0.6, 0.8]);
        let cod = sub(&sys, "v1^2+v2^2-1", &x);
        let cd = ConstrainedDynamics::with_decomposer(sys.clone(), cod, reg.get("kkt").unwrap()).unwrap();
        assert_eq!(cd.method(), "kkt");
        assert!(close(&cd.eval(&x).unwrap(), &[4.704, -3.528], 1e-12));
        assert!(matches!(
            reg.get("composite").unwrap().decompose(&sys, &cd.cod, &x),
            Err(Error::Partition(_))
        ));
    }
}
