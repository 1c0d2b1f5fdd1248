//! Legendre transform and Hamiltonian fields on the momentum phase space
//! `V*Q`, with constraints pulled back along the inverse Legendre map `Ĥ`.
//!
//! Every derivative of `H` is obtained from derivatives of `L` at `Ĥ(y)`:
//! `∂^iH = v^i`, `∂_iH = -∂_iL`, `∂^i∂^jH = M^{ij}`, `∂_i∂^jH = -M^{jk}∂_iπ_k`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use parking_lot::Mutex;

use crate::bundle::{JetPoint, PhasePoint};
use crate::constraint::{Codistribution, RANK_TOL};
use crate::dynamics::{degenerate, LagrangianPartials, LagrangianSystem};
use crate::error::{Error, Result};
use crate::linalg;
use crate::projection::ConstrainedDynamics;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Residual tolerance, scaled by `max(1, |p|_inf)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
        }
    }
}

/// Hamiltonian counterpart of a hyperregular Lagrangian.
#[derive(Debug)]
pub struct HamiltonianSide {
    lag: Arc<LagrangianSystem>,
    newton: NewtonConfig,
    seed: Option<Vec<f64>>,
    // velocity of the last successful inversion, the first seed tried
    last: Mutex<Option<Vec<f64>>>,
}

impl HamiltonianSide {
    pub fn new(lag: Arc<LagrangianSystem>) -> Self {
        Self {
            lag,
            newton: NewtonConfig::default(),
            seed: None,
            last: Mutex::new(None),
        }
    }

    pub fn with_newton(mut self, newton: NewtonConfig) -> Self {
        self.newton = newton;
        self
    }

    /// Fallback seed used when continuation from the previous solve fails.
    pub fn with_seed(mut self, seed: Vec<f64>) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn lagrangian(&self) -> &Arc<LagrangianSystem> {
        &self.lag
    }

    pub fn dim(&self) -> usize {
        self.lag.dim()
    }

    /// `p_i = π_i(x)` and `H = p_i v^i - L(x)`.
    pub fn legendre(&self, x: &JetPoint) -> Result<(PhasePoint, f64)> {
        let p = self.lag.momenta(x)?;
        let h = p.iter().zip(&x.v).map(|(a, b)| a * b).sum::<f64>() - self.lag.value(x)?;
        Ok((PhasePoint::new(x.t, x.q.clone(), p), h))
    }

    /// Damped Newton solve of `π(t, q, v) = p` from `seed`.
    pub fn inverse_legendre(&self, y: &PhasePoint, seed: &[f64]) -> Result<JetPoint> {
        let target = DVector::from_column_slice(&y.p);
        let tol = self.newton.tol * target.amax().max(1.0);
        let residual = |v: &[f64]| -> Result<DVector<f64>> {
            let x = JetPoint::new(y.t, y.q.clone(), v.to_vec());
            Ok(DVector::from_vec(self.lag.momenta(&x)?) - &target)
        };
        let mut v = DVector::from_column_slice(seed);
        let mut r = residual(v.as_slice())?;
        let mut norm = r.amax();
        for _ in 0..self.newton.max_iter {
            if norm <= tol {
                return Ok(JetPoint::new(y.t, y.q.clone(), v.iter().copied().collect()));
            }
            let x = JetPoint::new(y.t, y.q.clone(), v.iter().copied().collect());
            let jac = self.lag.mass(&x)?;
            let step = linalg::lu_solve(&jac, &(-&r)).map_err(|e| degenerate(&x, e))?;
            let mut scale = 1.0;
            loop {
                let trial = &v + &step * scale;
                match residual(trial.as_slice()) {
                    Ok(rt) if rt.amax() <= norm || scale < 1e-9 => {
                        v = trial;
                        norm = rt.amax();
                        r = rt;
                        break;
                    }
                    Err(e) if scale < 1e-9 => return Err(e),
                    _ => scale *= 0.5,
                }
            }
            if !norm.is_finite() {
                break;
            }
        }
        if norm <= tol {
            return Ok(JetPoint::new(y.t, y.q.clone(), v.iter().copied().collect()));
        }
        Err(Error::NonConvergence {
            iterations: self.newton.max_iter,
            residual: norm,
        })
    }

    /// `Ĥ(y)`, seeded by the previous solve, then the configured seed, then zero.
    pub fn resolve(&self, y: &PhasePoint) -> Result<JetPoint> {
        let m = y.dim();
        let mut seeds: Vec<Vec<f64>> = Vec::with_capacity(3);
        if let Some(s) = self.last.lock().clone().filter(|s| s.len() == m) {
            seeds.push(s);
        }
        if let Some(s) = self.seed.clone().filter(|s| s.len() == m) {
            seeds.push(s);
        }
        seeds.push(vec![0.0; m]);
        let mut last_err = None;
        for s in seeds {
            match self.inverse_legendre(y, &s) {
                Ok(x) => {
                    *self.last.lock() = Some(x.v.clone());
                    return Ok(x);
                }
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap())
    }

    /// `(γ^i, γ_i) = (v^i, ∂_iL)` at `Ĥ(y)`.
    pub fn hamilton_field(self: &Arc<Self>) -> HamiltonField {
        HamiltonField { side: Arc::clone(self) }
    }

    pub fn constrained_hamilton_field(self: &Arc<Self>, cod: Arc<Codistribution>) -> Result<ConstrainedHamiltonField> {
        if cod.dim() != self.dim() {
            return Err(Error::Shape(format!(
                "constraint dimension {} differs from system dimension {}",
                cod.dim(),
                self.dim()
            )));
        }
        Ok(ConstrainedHamiltonField {
            side: Arc::clone(self),
            cod,
        })
    }

    fn field_at(&self, x: &JetPoint, p: &LagrangianPartials) -> (Vec<f64>, Vec<f64>) {
        (x.v.clone(), (0..x.dim()).map(|i| p.dq(i)).collect())
    }

    /// `β^a = Ĥ* s^a` at `y`.
    pub fn pullback_constraint(&self, cod: &Codistribution, y: &PhasePoint) -> Result<Vec<PullbackForm>> {
        let x = self.resolve(y)?;
        let p = self.lag.partials(&x)?;
        Ok(self.pullback_at(cod, &x, &p)?.0)
    }

    /// Pullback forms together with `M^{ij}`.
    fn pullback_at(
        &self,
        cod: &Codistribution,
        x: &JetPoint,
        p: &LagrangianPartials,
    ) -> Result<(Vec<PullbackForm>, DMatrix<f64>)> {
        let m = x.dim();
        let minv = linalg::lu_inverse(&p.mass()).map_err(|e| degenerate(x, e))?;
        // ∂_t∂^jH and ∂_i∂^jH, the latter indexed [(j, i)]
        let dt_pi = DVector::from_fn(m, |k, _| p.dt_momentum(k));
        let dq_pi = DMatrix::from_fn(m, m, |k, i| p.dq_momentum(k, i));
        let dt_dh = -(&minv * dt_pi);
        let dq_dh = -(&minv * dq_pi);
        let vals = cod.eval(x)?;
        let betadot = &vals.sdot * &minv;
        let beta0 = &vals.s0 + &vals.sdot * &dt_dh;
        let beta = &vals.s + &vals.sdot * &dq_dh;
        let forms = (0..cod.len())
            .map(|a| PullbackForm {
                beta0: beta0[a],
                betai: beta.row(a).iter().copied().collect(),
                betadoti: betadot.row(a).iter().copied().collect(),
            })
            .collect();
        Ok((forms, minv))
    }
}

/// `β = β_0 dt + β_i dq^i + β̇^i dp_i` at one phase point.
#[derive(Debug, Clone, PartialEq)]
pub struct PullbackForm {
    pub beta0: f64,
    pub betai: Vec<f64>,
    pub betadoti: Vec<f64>,
}

impl PullbackForm {
    /// `β(γ) = β_0 + β_i γ^i + β̇^i γ_i`.
    pub fn contract(&self, up: &[f64], down: &[f64]) -> f64 {
        self.beta0
            + self.betai.iter().zip(up).map(|(a, b)| a * b).sum::<f64>()
            + self.betadoti.iter().zip(down).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// First-order field `(q_t, p_t) = (γ^i, γ_i)` on `V*Q`.
pub trait PhaseField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, y: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>)>;
}

/// Hamilton equations `q_t = ∂^iH`, `p_t = -∂_iH`.
#[derive(Debug, Clone)]
pub struct HamiltonField {
    side: Arc<HamiltonianSide>,
}

impl HamiltonField {
    pub fn side(&self) -> &Arc<HamiltonianSide> {
        &self.side
    }
}

impl PhaseField for HamiltonField {
    fn dim(&self) -> usize {
        self.side.dim()
    }

    fn eval(&self, y: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = self.side.resolve(y)?;
        let p = self.side.lag.partials(&x)?;
        Ok(self.side.field_at(&x, &p))
    }
}

/// `γ̃ = γ_H - c`, where the correction
/// `c_i = M̃_ab M_ij β̇^{aj} β^b(γ_H)` only touches momentum components.
#[derive(Debug, Clone)]
pub struct ConstrainedHamiltonField {
    side: Arc<HamiltonianSide>,
    cod: Arc<Codistribution>,
}

/// Every intermediate of the constrained field at one phase point.
#[derive(Debug, Clone)]
pub struct ConstrainedHamiltonEval {
    pub x: JetPoint,
    pub gamma_up: Vec<f64>,
    pub gamma_down: Vec<f64>,
    pub forms: Vec<PullbackForm>,
    /// `M̃^{ab} = β̇^{ai} β̇^{bj} M_ij`
    pub reduced_metric: DMatrix<f64>,
    /// `β^a(γ_H)`
    pub beta_on_field: DVector<f64>,
    /// `c_i`; the reaction covector is `-c`.
    pub correction: Vec<f64>,
}

impl ConstrainedHamiltonEval {
    pub fn tilde_down(&self) -> Vec<f64> {
        self.gamma_down
            .iter()
            .zip(&self.correction)
            .map(|(g, c)| g - c)
            .collect()
    }

    pub fn reaction(&self) -> Vec<f64> {
        self.correction.iter().map(|c| -c).collect()
    }

    /// `max_a |β^a(γ̃)|`.
    pub fn compatibility_residual(&self) -> f64 {
        let down = self.tilde_down();
        self.forms
            .iter()
            .map(|b| b.contract(&self.gamma_up, &down).abs())
            .fold(0.0, f64::max)
    }
}

impl ConstrainedHamiltonField {
    pub fn codistribution(&self) -> &Arc<Codistribution> {
        &self.cod
    }

    pub fn side(&self) -> &Arc<HamiltonianSide> {
        &self.side
    }

    pub fn details(&self, y: &PhasePoint) -> Result<ConstrainedHamiltonEval> {
        let side = &self.side;
        let x = side.resolve(y)?;
        let p = side.lag.partials(&x)?;
        let (gamma_up, gamma_down) = side.field_at(&x, &p);
        let m = x.dim();
        let n = self.cod.len();
        if n == 0 {
            return Ok(ConstrainedHamiltonEval {
                x,
                gamma_up,
                gamma_down,
                forms: Vec::new(),
                reduced_metric: DMatrix::zeros(0, 0),
                beta_on_field: DVector::zeros(0),
                correction: vec![0.0; m],
            });
        }
        let mass = p.mass();
        if !linalg::is_positive_definite(&mass) {
            return Err(Error::NotRiemannian { point: x.values() });
        }
        let (forms, _) = side.pullback_at(&self.cod, &x, &p)?;
        let betadot = DMatrix::from_fn(n, m, |a, i| forms[a].betadoti[i]);
        let reduced = &betadot * &mass * betadot.transpose();
        let beta_on_field = DVector::from_iterator(n, forms.iter().map(|b| b.contract(&gamma_up, &gamma_down)));
        let weights = linalg::spd_solve(&reduced, &beta_on_field).map_err(|_| Error::InadmissibleConstraint {
            rank: linalg::numerical_rank(&betadot, RANK_TOL),
            expected: n,
            point: x.values(),
            detail: Some("pulled-back reduced metric is singular".into()),
        })?;
        let correction = (&mass * betadot.transpose() * weights).iter().copied().collect();
        Ok(ConstrainedHamiltonEval {
            x,
            gamma_up,
            gamma_down,
            forms,
            reduced_metric: reduced,
            beta_on_field,
            correction,
        })
    }
}

impl PhaseField for ConstrainedHamiltonField {
    fn dim(&self) -> usize {
        self.side.dim()
    }

    fn eval(&self, y: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.details(y)?;
        let down = d.tilde_down();
        Ok((d.gamma_up, down))
    }
}

/// Residuals of the relations between the two sides at one phase point:
/// `M̃^{ab} - m̃^{ab}∘Ĥ`, `β^a(γ_H) - s^a(ξ_L)∘Ĥ`, and reaction covector
/// minus `F∘Ĥ`. Each entry is a max-abs value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationResiduals {
    pub reduced_metric: f64,
    pub beta: f64,
    pub reaction: f64,
    pub roundtrip: f64,
}

pub fn relation_residuals(
    field: &ConstrainedHamiltonField,
    cd: &ConstrainedDynamics,
    y: &PhasePoint,
) -> Result<RelationResiduals> {
    let h = field.details(y)?;
    let x = &h.x;
    let d = cd.decompose(x)?;
    let vals = cd.cod.eval(x)?;
    let minv = cd.base.metric.inverse(x)?;
    let reduced = &vals.sdot * minv * vals.sdot.transpose();
    let s_xi = vals.contract(&x.v, &d.xi);
    let (back, _) = field.side.legendre(x)?;
    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    Ok(RelationResiduals {
        reduced_metric: (&h.reduced_metric - reduced).amax(),
        beta: (&h.beta_on_field - s_xi).amax(),
        reaction: max_diff(&h.reaction(), &d.force),
        roundtrip: max_diff(&back.p, &y.p),
    })
}
