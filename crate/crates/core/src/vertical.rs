//! Vertical extension on `VV*Q`: coordinates `(t, q, p, q̇, ṗ)` where
//! `(q̇, ṗ)` is a vertical tangent vector along `V*Q`. The extra equations
//! transport Jacobi fields along solutions of the base equations.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::bundle::{PhasePoint, VerticalPhasePoint};
use crate::dynamics::degenerate;
use crate::error::Result;
use crate::hamilton::{ConstrainedHamiltonField, HamiltonianSide, PhaseField};
use crate::linalg;

pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// `(γ^i, γ_i, γ̄^i, γ̄_i)`: rates of `q`, `p`, `q̇`, `ṗ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalRates {
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    pub bar_up: Vec<f64>,
    pub bar_down: Vec<f64>,
}

/// First-order field on `VV*Q`.
pub trait VerticalField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, z: &VerticalPhasePoint) -> Result<VerticalRates>;
}

/// `∂_V H = q̇^i ∂_iH + ṗ_i ∂^iH = -q̇^i ∂_iL + ṗ_i v^i` at `Ĥ(t, q, p)`.
pub fn vertical_hamiltonian_value(hs: &HamiltonianSide, z: &VerticalPhasePoint) -> Result<f64> {
    let x = hs.resolve(&z.base)?;
    let p = hs.lagrangian().partials(&x)?;
    Ok((0..x.dim()).map(|i| -z.qdot[i] * p.dq(i) + z.pdot[i] * x.v[i]).sum())
}

/// `∂_V H + q̇^i c_i` with the constraint correction `c_i` of the
/// constrained Hamilton field.
pub fn constrained_vertical_hamiltonian(field: &ConstrainedHamiltonField, z: &VerticalPhasePoint) -> Result<f64> {
    let d = field.details(&z.base)?;
    Ok((0..d.x.dim())
        .map(|i| -z.qdot[i] * d.gamma_down[i] + z.pdot[i] * d.gamma_up[i] + z.qdot[i] * d.correction[i])
        .sum())
}

/// A sample of a curve in `VV*Q` with the rates of its base part.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub z: VerticalPhasePoint,
    pub q_t: Vec<f64>,
    pub p_t: Vec<f64>,
}

/// `L_H = ṗ_i (q^i_t - ∂^iH) - q̇^i (p_ti + ∂_iH)`.
pub fn trajectory_lagrangian(hs: &HamiltonianSide, s: &TrajectorySample) -> Result<f64> {
    let x = hs.resolve(&s.z.base)?;
    let p = hs.lagrangian().partials(&x)?;
    Ok((0..x.dim())
        .map(|i| s.z.pdot[i] * (s.q_t[i] - x.v[i]) - s.z.qdot[i] * (s.p_t[i] - p.dq(i)))
        .sum())
}

/// `L_H` of the constrained vertical Hamiltonian:
/// `ṗ_i (q^i_t - γ^i) - q̇^i (p_ti - γ̃_i)`. Vanishes along solutions of `γ̃`.
pub fn constrained_trajectory_lagrangian(field: &ConstrainedHamiltonField, s: &TrajectorySample) -> Result<f64> {
    let d = field.details(&s.z.base)?;
    let down = d.tilde_down();
    Ok((0..d.x.dim())
        .map(|i| s.z.pdot[i] * (s.q_t[i] - d.gamma_up[i]) - s.z.qdot[i] * (s.p_t[i] - down[i]))
        .sum())
}

/// Lift of a field on `V*Q`:
/// `γ̄^i = ṗ_j ∂^iγ^j - q̇^j ∂^iγ_j`, `γ̄_i = -ṗ_j ∂_iγ^j + q̇^j ∂_iγ_j`,
/// with partials of the base field by central differences.
#[derive(Clone)]
pub struct VerticalLift {
    base: Arc<dyn PhaseField>,
    fd_step: f64,
}

pub fn vertical_lift(base: Arc<dyn PhaseField>, fd_step: f64) -> VerticalLift {
    VerticalLift { base, fd_step }
}

/// Partials of a field: `[k]` holds `(∂γ^j, ∂γ_j)` along the `k`-th
/// coordinate `q1.., p1..`.
type FieldPartials = Vec<(Vec<f64>, Vec<f64>)>;

impl VerticalLift {
    fn partials(&self, y: &PhasePoint) -> Result<FieldPartials> {
        let m = y.dim();
        (0..2 * m)
            .map(|k| {
                let coord = if k < m { y.q[k] } else { y.p[k - m] };
                let h = self.fd_step * coord.abs().max(1.0);
                let shifted = |d: f64| {
                    let mut s = y.clone();
                    if k < m {
                        s.q[k] += d;
                    } else {
                        s.p[k - m] += d;
                    }
                    self.base.eval(&s)
                };
                let (up_p, down_p) = shifted(h)?;
                let (up_m, down_m) = shifted(-h)?;
                let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) / (2.0 * h)).collect();
                Ok((diff(&up_p, &up_m), diff(&down_p, &down_m)))
            })
            .collect()
    }
}

fn lift_rates(
    z: &VerticalPhasePoint,
    up: Vec<f64>,
    down: Vec<f64>,
    // (∂_iγ^j, ∂_iγ_j, ∂^iγ^j, ∂^iγ_j), each indexed [(i, j)]
    dq_up: &DMatrix<f64>,
    dq_down: &DMatrix<f64>,
    dp_up: &DMatrix<f64>,
    dp_down: &DMatrix<f64>,
) -> VerticalRates {
    let m = up.len();
    let mut bar_up = vec![0.0; m];
    let mut bar_down = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            bar_up[i] += z.pdot[j] * dp_up[(i, j)] - z.qdot[j] * dp_down[(i, j)];
            bar_down[i] += -z.pdot[j] * dq_up[(i, j)] + z.qdot[j] * dq_down[(i, j)];
        }
    }
    VerticalRates {
        up,
        down,
        bar_up,
        bar_down,
    }
}

impl VerticalField for VerticalLift {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, z: &VerticalPhasePoint) -> Result<VerticalRates> {
        let m = self.dim();
        let (up, down) = self.base.eval(&z.base)?;
        let d = self.partials(&z.base)?;
        let dq_up = DMatrix::from_fn(m, m, |i, j| d[i].0[j]);
        let dq_down = DMatrix::from_fn(m, m, |i, j| d[i].1[j]);
        let dp_up = DMatrix::from_fn(m, m, |i, j| d[m + i].0[j]);
        let dp_down = DMatrix::from_fn(m, m, |i, j| d[m + i].1[j]);
        Ok(lift_rates(z, up, down, &dq_up, &dq_down, &dp_up, &dp_down))
    }
}

/// Lift of the unconstrained Hamilton field with exact partials:
/// `∂^iγ^j = M^{ij}`, `∂_iγ^j = -M^{jk}∂_iπ_k`, `∂^iγ_j = ∂_jπ_k M^{ki}`,
/// `∂_iγ_j = ∂_i∂_jL - ∂_jπ_k M^{kl} ∂_iπ_l`.
#[derive(Debug, Clone)]
pub struct AnalyticVerticalHamilton {
    side: Arc<HamiltonianSide>,
}

impl AnalyticVerticalHamilton {
    pub fn new(side: Arc<HamiltonianSide>) -> Self {
        Self { side }
    }
}

impl VerticalField for AnalyticVerticalHamilton {
    fn dim(&self) -> usize {
        self.side.dim()
    }

    fn eval(&self, z: &VerticalPhasePoint) -> Result<VerticalRates> {
        let m = self.dim();
        let x = self.side.resolve(&z.base)?;
        let p = self.side.lagrangian().partials(&x)?;
        let minv = linalg::lu_inverse(&p.mass()).map_err(|e| degenerate(&x, e))?;
        // dpi[(k, i)] = ∂_i π_k
        let dpi = DMatrix::from_fn(m, m, |k, i| p.dq_momentum(k, i));
        let dq_up = -(&minv * &dpi).transpose();
        let dp_up = minv.transpose();
        let dp_down = &minv * &dpi;
        let dq_down = DMatrix::from_fn(m, m, |i, j| p.hess[(1 + i, 1 + j)]) - dpi.transpose() * &minv * &dpi;
        let up = x.v.clone();
        let down = (0..m).map(|i| p.dq(i)).collect();
        Ok(lift_rates(z, up, down, &dq_up, &dq_down, &dp_up, &dp_down))
    }
}
