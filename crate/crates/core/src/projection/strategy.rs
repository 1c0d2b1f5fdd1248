use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bundle::JetPoint;
use crate::constraint::{Codistribution, ConstraintOrigin, RANK_TOL};
use crate::dynamics::NewtonianSystem;
use crate::error::{Error, Result};
use crate::linalg;

/// One point's worth of the splitting `ξ = ξ̃ + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub xi: Vec<f64>,
    pub xi_tilde: Vec<f64>,
    /// Reaction acceleration `r = ξ - ξ̃`.
    pub reaction: Vec<f64>,
    /// Reaction force covector.
    pub force: Vec<f64>,
    pub multipliers: Vec<f64>,
}

impl Decomposition {
    fn unconstrained(xi: Vec<f64>) -> Self {
        let m = xi.len();
        Self {
            xi_tilde: xi.clone(),
            xi,
            reaction: vec![0.0; m],
            force: vec![0.0; m],
            multipliers: Vec::new(),
        }
    }
}

/// A rule that splits a dynamic equation against a codistribution.
pub trait Decomposer: Send + Sync {
    fn name(&self) -> &'static str;

    fn decompose(&self, sys: &NewtonianSystem, cod: &Codistribution, x: &JetPoint) -> Result<Decomposition>;
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Metric projection: `λ = m̃^{-1} s(ξ)`, `r^i = m^{ij} ṡ^a_j λ_a`,
/// `F_i = -λ_a ṡ^a_i`, with `m̃^{ab} = ṡ^a_i ṡ^b_j m^{ij}`.
#[derive(Debug, Default, Clone, Copy)]
pub struct MetricProjection;

impl Decomposer for MetricProjection {
    fn name(&self) -> &'static str {
        "metric"
    }

    fn decompose(&self, sys: &NewtonianSystem, cod: &Codistribution, x: &JetPoint) -> Result<Decomposition> {
        if !sys.metric.riemannian() {
            return Err(Error::NotRiemannian { point: x.values() });
        }
        let mass = sys.metric.eval(x)?;
        let minv = linalg::spd_inverse(&mass).map_err(|_| Error::NotRiemannian { point: x.values() })?;
        let xi = sys.xi.eval(x)?;
        if cod.is_empty() {
            return Ok(Decomposition::unconstrained(xi));
        }
        let vals = cod.eval(x)?;
        let s_xi = vals.contract(&x.v, &xi);
        let reduced = &vals.sdot * &minv * vals.sdot.transpose();
        let lambda = linalg::spd_solve(&reduced, &s_xi).map_err(|_| inadmissible(&vals.sdot, &reduced, x))?;
        let r = &minv * vals.sdot.transpose() * &lambda;
        let force = -(vals.sdot.transpose() * &lambda);
        let xi_v = DVector::from_column_slice(&xi);
        Ok(Decomposition {
            xi_tilde: to_vec(&(&xi_v - &r)),
            xi,
            reaction: to_vec(&r),
            force: to_vec(&force),
            multipliers: to_vec(&lambda),
        })
    }
}

fn inadmissible(sdot: &DMatrix<f64>, reduced: &DMatrix<f64>, x: &JetPoint) -> Error {
    let eig = reduced.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| {
        (lo.min(e.abs()), hi.max(e.abs()))
    });
    Error::InadmissibleConstraint {
        rank: linalg::numerical_rank(sdot, RANK_TOL),
        expected: sdot.nrows(),
        point: x.values(),
        detail: Some(format!("reduced metric condition estimate {:e}", hi / lo)),
    }
}

/// Saddle-point oracle: solves
/// `[m, ṡ^T; ṡ, 0] (a, μ) = (m ξ, -(s_0 + s_i v^i))` by pivoted LU.
/// Does not need the metric to be positive definite.
#[derive(Debug, Default, Clone, Copy)]
pub struct KktOracle;

impl Decomposer for KktOracle {
    fn name(&self) -> &'static str {
        "kkt"
    }

    fn decompose(&self, sys: &NewtonianSystem, cod: &Codistribution, x: &JetPoint) -> Result<Decomposition> {
        let m = sys.dim();
        let n = cod.len();
        let mass = sys.metric.eval(x)?;
        let xi = sys.xi.eval(x)?;
        let vals = cod.eval(x)?;
        let mut k = DMatrix::zeros(m + n, m + n);
        k.view_mut((0, 0), (m, m)).copy_from(&mass);
        k.view_mut((0, m), (m, n)).copy_from(&vals.sdot.transpose());
        k.view_mut((m, 0), (n, m)).copy_from(&vals.sdot);
        let xi_v = DVector::from_column_slice(&xi);
        let mut rhs = DVector::zeros(m + n);
        rhs.rows_mut(0, m).copy_from(&(&mass * &xi_v));
        rhs.rows_mut(m, n).copy_from(&(-vals.drift(&x.v)));
        let sol = linalg::lu_solve(&k, &rhs).map_err(|_| Error::SingularKkt { point: x.values() })?;
        let a = sol.rows(0, m).into_owned();
        let r = &xi_v - &a;
        Ok(Decomposition {
            xi_tilde: to_vec(&a),
            xi,
            force: to_vec(&-(&mass * &r)),
            reaction: to_vec(&r),
            multipliers: sol.rows(m, n).iter().copied().collect(),
        })
    }
}

/// Splitting along the fibers of a composite fibration: base components are
/// kept and fiber components become `ξ^a - s^a(ξ)`.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompositeSplitting;

impl Decomposer for CompositeSplitting {
    fn name(&self) -> &'static str {
        "composite"
    }

    fn decompose(&self, sys: &NewtonianSystem, cod: &Codistribution, x: &JetPoint) -> Result<Decomposition> {
        let ConstraintOrigin::Composite(spec) = cod.origin() else {
            return Err(Error::Partition(format!(
                "composite splitting needs a composite constraint, got `{}`",
                cod.origin().kind()
            )));
        };
        let xi = sys.xi.eval(x)?;
        let s_xi = cod.eval(x)?.contract(&x.v, &xi);
        let mut r = DVector::zeros(xi.len());
        for (a, &fa) in spec.fiber.iter().enumerate() {
            r[fa] = s_xi[a];
        }
        let xi_v = DVector::from_column_slice(&xi);
        let mass = sys.metric.eval(x)?;
        Ok(Decomposition {
            xi_tilde: to_vec(&(&xi_v - &r)),
            xi,
            force: to_vec(&-(&mass * &r)),
            reaction: to_vec(&r),
            multipliers: to_vec(&s_xi),
        })
    }
}

/// Decomposers by name.
#[derive(Clone)]
pub struct DecomposerRegistry {
    entries: BTreeMap<&'static str, Arc<dyn Decomposer>>,
}

impl Default for DecomposerRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(MetricProjection));
        r.register(Arc::new(KktOracle));
        r.register(Arc::new(CompositeSplitting));
        r
    }
}

impl DecomposerRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Adds or replaces the decomposer under its own name.
    pub fn register(&mut self, d: Arc<dyn Decomposer>) {
        self.entries.insert(d.name(), d);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Decomposer>> {
        self.entries.get(name).cloned().ok_or_else(|| {
            Error::Config(format!(
                "unknown decomposition method `{name}` (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
