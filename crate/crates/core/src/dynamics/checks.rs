use std::sync::Arc;

use super::{ExprDynamics, ExternalForce, ForcedDynamics, MassMetric, NewtonianSystem};
use crate::bundle::JetPoint;
use crate::error::Result;
use crate::report::CheckReport;

pub const SYMMETRY_TOL: f64 = 1e-9;
pub const COMPATIBILITY_TOL: f64 = 1e-9;

/// Max of `|∂^t_k m_ij - ∂^t_j m_ik|` over the points.
pub fn check_metric_symmetry(metric: &dyn MassMetric, points: &[JetPoint]) -> Result<CheckReport> {
    let mut report = CheckReport::new("metric_symmetry", SYMMETRY_TOL);
    let m = metric.dim();
    for x in points {
        let (_, d) = metric.eval_with_partials(x)?;
        let dv = |k: usize| &d[1 + m + k];
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    worst = worst.max((dv(k)[(i, j)] - dv(j)[(i, k)]).abs());
                }
            }
        }
        report.record(worst, || x.values());
    }
    Ok(report)
}

/// Max over the points of the compatibility residual
/// `2(∂_t m_ij + v^k ∂_k m_ij + ξ^k ∂^t_k m_ij) + m_ik ∂^t_j ξ^k + m_jk ∂^t_i ξ^k`.
pub fn check_compatibility(sys: &NewtonianSystem, points: &[JetPoint]) -> Result<CheckReport> {
    let mut report = CheckReport::new("compatibility", COMPATIBILITY_TOL);
    let m = sys.dim();
    for x in points {
        let (mass, dm) = sys.metric.eval_with_partials(x)?;
        let (xi, dxi) = sys.xi.eval_with_jacobian(x)?;
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let mut along = dm[0][(i, j)];
                for k in 0..m {
                    along += x.v[k] * dm[1 + k][(i, j)] + xi[k] * dm[1 + m + k][(i, j)];
                }
                let mut r = 2.0 * along;
                for k in 0..m {
                    r += mass[(i, k)] * dxi[(k, 1 + m + j)] + mass[(j, k)] * dxi[(k, 1 + m + i)];
                }
                worst = worst.max(r.abs());
            }
        }
        report.record(worst, || x.values());
    }
    Ok(report)
}

/// Outcome of adding an external force: the residual of
/// `∂^t_i F_j + ∂^t_j F_i = 0` and a warning when it fails.
#[derive(Debug, Clone)]
pub struct ForceReport {
    pub check: CheckReport,
    pub warning: Option<String>,
}

/// `ξ_F = ξ + m^{-1} F`. The result is always a dynamic equation; it stays a
/// Newtonian system only when the force condition holds, which is reported as
/// a warning rather than an error.
pub fn apply_external_force(
    sys: &NewtonianSystem,
    force: &ExternalForce,
    probes: &[JetPoint],
) -> Result<(NewtonianSystem, ForceReport)> {
    let m = sys.dim();
    let forced = ForcedDynamics {
        base: Arc::clone(&sys.xi),
        metric: Arc::clone(&sys.metric),
        force: ExprDynamics::new(force.components().to_vec()),
    };
    let mut check = CheckReport::new("external_force_condition", SYMMETRY_TOL);
    for x in probes {
        let (_, jac) = force.eval_with_jacobian(x)?;
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                worst = worst.max((jac[(j, 1 + m + i)] + jac[(i, 1 + m + j)]).abs());
            }
        }
        check.record(worst, || x.values());
        // surfaces DegenerateMetric at probes
        sys.metric.inverse(x)?;
    }
    let warning = (!check.passed()).then(|| {
        format!(
            "force violates ∂^t_i F_j + ∂^t_j F_i = 0 (max {:e}); result is a dynamic equation but not a Newtonian system",
            check.max_residual
        )
    });
    let system = NewtonianSystem::new(sys.space.clone(), Arc::clone(&sys.metric), Arc::new(forced))?;
    Ok((system, ForceReport { check, warning }))
}
