//! Fixed-step classical RK4 on `J¹Q` (second-order equations reduced to
//! `(q, v)`) and on `V*Q` / `VV*Q`, with per-sample monitors.

use std::sync::Arc;

use nalgebra::DVector;

use crate::bundle::{Jet2Point, JetPoint, PhasePoint, ReferenceFrame, VerticalPhasePoint};
use crate::constraint::{admissibility_report, ConstraintOrigin};
use crate::dynamics::{energy_balance_residual, energy_function, DynamicEquation, ExternalForce, LagrangianSystem};
use crate::error::{Error, Result};
use crate::hamilton::PhaseField;
use crate::projection::ConstrainedDynamics;
use crate::vertical::VerticalField;

/// Tolerance on `|f^a(x0)|` for constraints with defining functions.
pub const INITIAL_CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
}

impl IntegratorConfig {
    pub fn new(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && dt.is_finite()) {
            return Err(Error::Config("t0, t1 and dt must be finite".into()));
        }
        if t1 <= t0 {
            return Err(Error::Config(format!("t1 = {t1} must exceed t0 = {t0}")));
        }
        if dt <= 0.0 || dt > t1 - t0 {
            return Err(Error::Config(format!("dt = {dt} must lie in (0, t1 - t0]")));
        }
        Ok(Self { t0, t1, dt })
    }

    /// `t_k = t0 + k dt`, ending exactly at `t1` (the last step may be short).
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.t1 - self.t0) / self.dt).floor() as usize;
        let mut ts: Vec<f64> = (0..=n).map(|k| self.t0 + k as f64 * self.dt).collect();
        let last = *ts.last().unwrap();
        if self.t1 - last > 1e-12 * self.dt {
            ts.push(self.t1);
        } else if let Some(l) = ts.last_mut() {
            *l = self.t1;
        }
        ts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: Vec<f64>,
    pub monitors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub state_names: Vec<String>,
    pub monitor_names: Vec<String>,
    pub samples: Vec<Sample>,
    pub notes: Vec<String>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn monitor(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.monitor_names.iter().position(|n| n == name)?;
        Some(self.samples.iter().map(|s| s.monitors[k]).collect())
    }

    pub fn max_abs_monitor(&self, name: &str) -> Option<f64> {
        self.monitor(name)
            .map(|v| v.iter().fold(0.0, |a: f64, b| a.max(b.abs())))
    }

    /// Time derivative of the state at every sample from the Lagrange
    /// interpolant through the seven nearest samples (sixth order).
    pub fn time_derivatives(&self) -> Vec<Vec<f64>> {
        let n = self.samples.len();
        let width = n.min(7);
        (0..n)
            .map(|k| {
                let start = k.saturating_sub(width / 2).min(n - width);
                let nodes: Vec<f64> = (start..start + width).map(|j| self.samples[j].t).collect();
                let w = derivative_weights(&nodes, self.samples[k].t);
                let dim = self.samples[k].state.len();
                (0..dim)
                    .map(|c| (0..width).map(|j| w[j] * self.samples[start + j].state[c]).sum())
                    .collect()
            })
            .collect()
    }
}

/// Weights `w_j` with `p'(x) = Σ w_j y_j` for the interpolant through `nodes`.
fn derivative_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|j| {
            let denom: f64 = (0..n).filter(|&k| k != j).map(|k| nodes[j] - nodes[k]).product();
            let mut sum = 0.0;
            for i in 0..n {
                if i == j {
                    continue;
                }
                let prod: f64 = (0..n).filter(|&k| k != j && k != i).map(|k| x - nodes[k]).product();
                sum += prod;
            }
            sum / denom
        })
        .collect()
}

/// Quantities recorded at every sample of a second-order run.
pub trait JetMonitor: Send + Sync {
    fn names(&self) -> Vec<String>;

    /// May fail to stop the run, e.g. with `RankDropped`.
    fn observe(&self, x: &JetPoint) -> Result<Vec<f64>>;
}

/// Monitors of a constrained run: `mon_f<a>` drift (when defining functions
/// exist), `mon_compat` = max |s^a(ξ̃)|, `mon_gauss` = G(ξ̃),
/// `mon_power` = F_i(v^i - Γ^i), and for Lagrangian systems `mon_energy`
/// = T_Γ and `mon_balance`, the energy-balance residual along ξ̃ with the
/// reaction plus any external force.
pub struct ConstraintMonitor {
    pub cd: ConstrainedDynamics,
    pub frame: ReferenceFrame,
    pub lagrangian: Option<Arc<LagrangianSystem>>,
    pub external: Option<ExternalForce>,
}

impl ConstraintMonitor {
    pub fn new(cd: ConstrainedDynamics, frame: ReferenceFrame) -> Self {
        Self {
            cd,
            frame,
            lagrangian: None,
            external: None,
        }
    }

    pub fn with_lagrangian(mut self, lag: Arc<LagrangianSystem>) -> Self {
        self.lagrangian = Some(lag);
        self
    }

    pub fn with_external_force(mut self, f: ExternalForce) -> Self {
        self.external = Some(f);
        self
    }
}

impl JetMonitor for ConstraintMonitor {
    fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .cd
            .cod
            .functions()
            .map(|f| (1..=f.len()).map(|a| format!("mon_f{a}")).collect())
            .unwrap_or_default();
        names.extend(["mon_compat", "mon_gauss", "mon_power"].map(String::from));
        if self.lagrangian.is_some() {
            names.extend(["mon_energy", "mon_balance"].map(String::from));
        }
        names
    }

    fn observe(&self, x: &JetPoint) -> Result<Vec<f64>> {
        let cod = &self.cd.cod;
        if !cod.is_empty() {
            let adm = admissibility_report(cod, x)?;
            if !adm.passed() {
                return Err(Error::RankDropped {
                    t: x.t,
                    rank: adm.rank,
                    expected: adm.expected,
                });
            }
        }
        let d = self.cd.decompose(x)?;
        let mut out = cod.function_residuals(x)?.unwrap_or_default();
        out.push(self.cd.compatibility_residual(x, &d)?);
        let mass = self.cd.base.metric.eval(x)?;
        let r = DVector::from_column_slice(&d.reaction);
        out.push(r.dot(&(&mass * &r)));
        let gamma = self.frame.eval(x)?;
        let rel: Vec<f64> = x.v.iter().zip(&gamma).map(|(v, g)| v - g).collect();
        out.push(d.force.iter().zip(&rel).map(|(f, u)| f * u).sum());
        if let Some(lag) = &self.lagrangian {
            out.push(energy_function(lag, &self.frame, x)?);
            let external = self.external.as_ref();
            let force = |y: &JetPoint| -> Result<Vec<f64>> {
                let mut f = self.cd.decompose(y)?.force;
                if let Some(e) = external {
                    for (a, b) in f.iter_mut().zip(e.eval(y)?) {
                        *a += b;
                    }
                }
                Ok(f)
            };
            let w = Jet2Point {
                x: x.clone(),
                a: d.xi_tilde.clone(),
            };
            out.push(energy_balance_residual(lag, &self.frame, Some(&force), &[w])?[0]);
        }
        Ok(out)
    }
}

fn rk4_step(f: &dyn Fn(f64, &[f64]) -> Result<Vec<f64>>, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>> {
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, k)| x + s * k).collect() };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &add(y, &k1, 0.5 * h))?;
    let k3 = f(t + 0.5 * h, &add(y, &k2, 0.5 * h))?;
    let k4 = f(t + h, &add(y, &k3, h))?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn run(
    f: &dyn Fn(f64, &[f64]) -> Result<Vec<f64>>,
    observe: &dyn Fn(f64, &[f64]) -> Result<Vec<f64>>,
    y0: Vec<f64>,
    cfg: &IntegratorConfig,
) -> Result<Vec<Sample>> {
    let grid = cfg.grid();
    let mut samples = Vec::with_capacity(grid.len());
    let mut y = y0;
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { t: grid[0] });
    }
    samples.push(Sample {
        t: grid[0],
        monitors: observe(grid[0], &y)?,
        state: y.clone(),
    });
    for w in grid.windows(2) {
        y = rk4_step(f, w[0], &y, w[1] - w[0])?;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: w[1] });
        }
        samples.push(Sample {
            t: w[1],
            monitors: observe(w[1], &y)?,
            state: y.clone(),
        });
    }
    Ok(samples)
}

fn jet_names(m: usize) -> Vec<String> {
    (1..=m)
        .map(|i| format!("q{i}"))
        .chain((1..=m).map(|i| format!("v{i}")))
        .collect()
}

/// RK4 on `(q, v)` for `q_tt = ξ(t, q, v)`. The state is `[q.., v..]`.
pub fn integrate_second_order(
    dynamics: &dyn DynamicEquation,
    x0: &JetPoint,
    cfg: &IntegratorConfig,
    monitor: Option<&dyn JetMonitor>,
) -> Result<Trajectory> {
    let m = dynamics.dim();
    if x0.dim() != m {
        return Err(Error::Shape(format!(
            "initial state has dimension {}, expected {m}",
            x0.dim()
        )));
    }
    let split = |t: f64, y: &[f64]| JetPoint::new(t, y[..m].to_vec(), y[m..].to_vec());
    let f = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let a = dynamics.eval(&split(t, y))?;
        Ok(y[m..].iter().copied().chain(a).collect())
    };
    let observe = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        match monitor {
            Some(mon) => mon.observe(&split(t, y)),
            None => Ok(Vec::new()),
        }
    };
    let y0: Vec<f64> = x0.q.iter().chain(&x0.v).copied().collect();
    let mut cfg = *cfg;
    cfg.t0 = x0.t;
    Ok(Trajectory {
        state_names: jet_names(m),
        monitor_names: monitor.map(|m| m.names()).unwrap_or_default(),
        samples: run(&f, &observe, y0, &cfg)?,
        notes: Vec::new(),
    })
}

/// Second-order run of constrained dynamics. The initial state must satisfy
/// the defining functions when the constraint has them; raw forms only get a
/// note.
pub fn integrate_constrained(
    cd: &ConstrainedDynamics,
    x0: &JetPoint,
    cfg: &IntegratorConfig,
    monitor: Option<&dyn JetMonitor>,
) -> Result<Trajectory> {
    let mut notes = Vec::new();
    match cd.cod.function_residuals(x0)? {
        Some(r) => {
            let worst = r.iter().fold(0.0f64, |a, b| a.max(*b));
            if worst > INITIAL_CONSTRAINT_TOL {
                return Err(Error::OffConstraint {
                    residual: worst,
                    tolerance: INITIAL_CONSTRAINT_TOL,
                });
            }
        }
        None if matches!(cd.cod.origin(), ConstraintOrigin::Forms) && !cd.cod.is_empty() => {
            notes.push("raw-form constraint: no defining functions, drift is not monitored".into());
        }
        None => {}
    }
    // a stage evaluation may hit the rank loss before the monitor does
    let mut traj = integrate_second_order(cd, x0, cfg, monitor).map_err(|e| match e {
        Error::InadmissibleConstraint {
            rank, expected, point, ..
        } => Error::RankDropped {
            t: point[0],
            rank,
            expected,
        },
        e => e,
    })?;
    traj.notes.extend(notes);
    Ok(traj)
}

/// A first-order system `y_t = f(t, y)`.
pub trait FirstOrderSystem: Send + Sync {
    fn state_names(&self) -> Vec<String>;

    fn rhs(&self, t: f64, y: &[f64]) -> Result<Vec<f64>>;
}

/// State `[q.., p..]` driven by a field on `V*Q`.
pub struct PhaseFlow(pub Arc<dyn PhaseField>);

impl PhaseFlow {
    pub fn point(&self, t: f64, y: &[f64]) -> PhasePoint {
        let m = self.0.dim();
        PhasePoint::new(t, y[..m].to_vec(), y[m..2 * m].to_vec())
    }
}

impl FirstOrderSystem for PhaseFlow {
    fn state_names(&self) -> Vec<String> {
        let m = self.0.dim();
        (1..=m)
            .map(|i| format!("q{i}"))
            .chain((1..=m).map(|i| format!("p{i}")))
            .collect()
    }

    fn rhs(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let (up, down) = self.0.eval(&self.point(t, y))?;
        Ok(up.into_iter().chain(down).collect())
    }
}

/// State `[q.., p.., q̇.., ṗ..]` driven by a field on `VV*Q`.
pub struct VerticalFlow(pub Arc<dyn VerticalField>);

impl VerticalFlow {
    pub fn point(&self, t: f64, y: &[f64]) -> VerticalPhasePoint {
        let m = self.0.dim();
        VerticalPhasePoint {
            base: PhasePoint::new(t, y[..m].to_vec(), y[m..2 * m].to_vec()),
            qdot: y[2 * m..3 * m].to_vec(),
            pdot: y[3 * m..4 * m].to_vec(),
        }
    }
}

impl FirstOrderSystem for VerticalFlow {
    fn state_names(&self) -> Vec<String> {
        let m = self.0.dim();
        let block = |p: &'static str| (1..=m).map(move |i| format!("{p}{i}"));
        block("q")
            .chain(block("p"))
            .chain(block("dq"))
            .chain(block("dp"))
            .collect()
    }

    fn rhs(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let r = self.0.eval(&self.point(t, y))?;
        Ok(r.up
            .into_iter()
            .chain(r.down)
            .chain(r.bar_up)
            .chain(r.bar_down)
            .collect())
    }
}

/// Monitors for first-order runs, called with `(t, state)`.
pub type StateMonitor<'a> = (&'a [String], &'a dyn Fn(f64, &[f64]) -> Result<Vec<f64>>);

pub fn integrate_first_order(
    system: &dyn FirstOrderSystem,
    t0: f64,
    y0: &[f64],
    cfg: &IntegratorConfig,
    monitor: Option<StateMonitor<'_>>,
) -> Result<Trajectory> {
    let names = system.state_names();
    if y0.len() != names.len() {
        return Err(Error::Shape(format!(
            "initial state has {} entries, expected {}",
            y0.len(),
            names.len()
        )));
    }
    let f = |t: f64, y: &[f64]| system.rhs(t, y);
    let observe = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        match &monitor {
            Some((_, m)) => m(t, y),
            None => Ok(Vec::new()),
        }
    };
    let mut cfg = *cfg;
    cfg.t0 = t0;
    Ok(Trajectory {
        state_names: names,
        monitor_names: monitor.map(|(n, _)| n.to_vec()).unwrap_or_default(),
        samples: run(&f, &observe, y0.to_vec(), &cfg)?,
        notes: Vec::new(),
    })
}

/// Per-component `max |a - map(b)|` over shared sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub per_component: Vec<f64>,
    pub max: f64,
}

pub type StateMap<'a> = &'a dyn Fn(f64, &[f64]) -> Result<Vec<f64>>;

pub fn compare_trajectories(a: &Trajectory, b: &Trajectory, map: Option<StateMap<'_>>) -> Result<DeviationReport> {
    if a.samples.len() != b.samples.len() {
        return Err(Error::GridMismatch(format!(
            "{} vs {} samples",
            a.samples.len(),
            b.samples.len()
        )));
    }
    let mut per_component: Vec<f64> = Vec::new();
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        if (sa.t - sb.t).abs() > 1e-12 * sa.t.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("t = {} vs t = {}", sa.t, sb.t)));
        }
        let mapped = match map {
            Some(f) => f(sb.t, &sb.state)?,
            None => sb.state.clone(),
        };
        if mapped.len() != sa.state.len() {
            return Err(Error::GridMismatch(format!(
                "state sizes {} vs {}",
                sa.state.len(),
                mapped.len()
            )));
        }
        per_component.resize(mapped.len(), 0.0);
        for (k, (x, y)) in sa.state.iter().zip(&mapped).enumerate() {
            per_component[k] = per_component[k].max((x - y).abs());
        }
    }
    let max = per_component.iter().fold(0.0, |a: f64, b| a.max(*b));
    Ok(DeviationReport { per_component, max })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::bundle::ConfigurationSpace;
    use crate::constraint::Codistribution;
    use crate::dynamics::{lagrange_dynamic_equation, NewtonianSystem};
    use crate::hamilton::HamiltonianSide;
    use crate::projection::constrain;

    fn lag(m: usize, l: &str) -> Arc<LagrangianSystem> {
        Arc::new(LagrangianSystem::parse(ConfigurationSpace::new(m).unwrap(), l).unwrap())
    }

    #[test]
    fn config_and_grid() {
        assert!(IntegratorConfig::new(1.0, 0.0, 0.1).is_err());
        assert!(IntegratorConfig::new(0.0, 1.0, 2.0).is_err());
        assert!(IntegratorConfig::new(0.0, 1.0, 0.0).is_err());
        let g = IntegratorConfig::new(0.0, 1.0, 0.3).unwrap().grid();
        assert_eq!(g.len(), 5);
        assert_eq!(g[4], 1.0);
        assert!((g[3] - 0.9).abs() < 1e-15);
        let g = IntegratorConfig::new(0.0, 1.0, 0.25).unwrap().grid();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn free_particle_is_exact() {
        let l = lag(2, "0.5*(v1^2+v2^2)");
        let xi = lagrange_dynamic_equation(&l);
        let cfg = IntegratorConfig::new(0.0, 1.0, 0.1).unwrap();
        let tr = integrate_second_order(&xi, &JetPoint::new(0.0, vec![0.0, 0.0], vec![1.0, 0.0]), &cfg, None).unwrap();
        let last = tr.last();
        assert!((last.state[0] - 1.0).abs() < 1e-14 && last.state[1] == 0.0);
        assert_eq!(tr.state_names, vec!["q1", "q2", "v1", "v2"]);
    }

    #[test]
    fn oscillator_returns_and_converges_at_fourth_order() {
        let l = lag(1, "0.5*v1^2 - 0.5*q1^2");
        let xi = lagrange_dynamic_equation(&l);
        let x0 = JetPoint::new(0.0, vec![1.0], vec![0.0]);
        let cfg = IntegratorConfig::new(0.0, 2.0 * PI, 1e-3).unwrap();
        let tr = integrate_second_order(&xi, &x0, &cfg, None).unwrap();
        let s = &tr.last().state;
        assert!((s[0] - 1.0).abs() < 1e-10 && s[1].abs() < 1e-10, "{s:?}");

        let err = |dt: f64| {
            let cfg = IntegratorConfig::new(0.0, 2.0, dt).unwrap();
            let s = integrate_second_order(&xi, &x0, &cfg, None)
                .unwrap()
                .last()
                .state
                .clone();
            ((s[0] - 2f64.cos()).powi(2) + (s[1] + 2f64.sin()).powi(2)).sqrt()
        };
        let e = [err(1e-2), err(5e-3), err(2.5e-3)];
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            assert!((8.0..=32.0).contains(&ratio), "{e:?}");
        }
    }

    #[test]
    fn constant_speed_is_conserved() {
        let l = lag(2, "0.5*(v1^2+v2^2) - 9.8*q2");
        let s = l.space.clone();
        let x0 = JetPoint::new(0.0, vec![0.0, 0.0], vec![0.6, 0.8]);
        let cod = Arc::new(
            Codistribution::from_submanifold(&s, s.parse_all(&["v1^2+v2^2-1"]).unwrap(), &[x0.clone()]).unwrap(),
        );
        let cd = constrain(NewtonianSystem::from_lagrangian(&l, &[x0.clone()]).unwrap(), cod).unwrap();
        let mon = ConstraintMonitor::new(cd.clone(), ReferenceFrame::rest(&s)).with_lagrangian(Arc::clone(&l));
        let cfg = IntegratorConfig::new(0.0, 10.0, 1e-3).unwrap();
        let tr = integrate_constrained(&cd, &x0, &cfg, Some(&mon)).unwrap();
        assert!(tr.max_abs_monitor("mon_f1").unwrap() <= 1e-8);
        assert!(tr.max_abs_monitor("mon_compat").unwrap() <= 1e-10);
        assert!(tr.max_abs_monitor("mon_balance").unwrap() <= 1e-8);

        let off = JetPoint::new(0.0, vec![0.0, 0.0], vec![1.0, 1.0]);
        assert!(matches!(
            integrate_constrained(&cd, &off, &cfg, Some(&mon)),
            Err(Error::OffConstraint { .. })
        ));
    }

    #[test]
    fn rank_drop_stops_the_run() {
        // ṡ = (1, 0) * (1 - t): admissibility lost at t = 1
        let l = lag(2, "0.5*(v1^2+v2^2)");
        let s = l.space.clone();
        let cod = Codistribution::from_forms(
            &s,
            vec![crate::constraint::ConstraintOneForm {
                s0: crate::expr::Ast::zero(),
                si: vec![crate::expr::Ast::zero(); 2],
                sdoti: s.parse_all(&["1 - t", "0"]).unwrap(),
            }],
        )
        .unwrap();
        let cd = constrain(NewtonianSystem::from_lagrangian(&l, &[]).unwrap(), Arc::new(cod)).unwrap();
        let mon = ConstraintMonitor::new(cd.clone(), ReferenceFrame::rest(&s));
        let cfg = IntegratorConfig::new(0.0, 2.0, 0.25).unwrap();
        let r = integrate_constrained(
            &cd,
            &JetPoint::new(0.0, vec![0.0, 0.0], vec![0.0, 1.0]),
            &cfg,
            Some(&mon),
        );
        assert!(matches!(r, Err(Error::RankDropped { t, .. }) if t == 1.0), "{r:?}");
    }

    #[test]
    fn hamilton_flows() {
        let free = Arc::new(HamiltonianSide::new(lag(1, "0.5*v1^2")));
        let flow = PhaseFlow(Arc::new(free.hamilton_field()));
        let cfg = IntegratorConfig::new(0.0, 1.0, 0.1).unwrap();
        let tr = integrate_first_order(&flow, 0.0, &[0.5, 1.0], &cfg, None).unwrap();
        assert!((tr.last().state[0] - 1.5).abs() < 1e-14);

        let osc = Arc::new(HamiltonianSide::new(lag(1, "0.5*v1^2 - 0.5*q1^2")));
        let flow = PhaseFlow(Arc::new(osc.hamilton_field()));
        let cfg = IntegratorConfig::new(0.0, 2.0 * PI, 1e-3).unwrap();
        let tr = integrate_first_order(&flow, 0.0, &[1.0, 0.0], &cfg, None).unwrap();
        let s = &tr.last().state;
        assert!((s[0] - 1.0).abs() < 1e-10 && s[1].abs() < 1e-10);

        let g = Arc::new(HamiltonianSide::new(lag(2, "0.5*(v1^2+v2^2) - 9.8*q2")));
        let sp = g.lagrangian().space.clone();
        let cod = Arc::new(Codistribution::from_submanifold(&sp, sp.parse_all(&["v2"]).unwrap(), &[]).unwrap());
        let flow = PhaseFlow(Arc::new(g.constrained_hamilton_field(cod).unwrap()));
        let cfg = IntegratorConfig::new(0.0, 1.0, 1e-2).unwrap();
        let tr = integrate_first_order(&flow, 0.0, &[0.0, 1.0, 0.7, 0.0], &cfg, None).unwrap();
        assert!(tr.samples.iter().all(|s| s.state[3].abs() <= 1e-10));
    }

    #[test]
    fn time_derivatives_track_the_flow() {
        let osc = Arc::new(HamiltonianSide::new(lag(1, "0.5*v1^2 - 0.5*q1^2")));
        let flow = PhaseFlow(Arc::new(osc.hamilton_field()));
        let cfg = IntegratorConfig::new(0.0, 1.0, 1e-2).unwrap();
        let tr = integrate_first_order(&flow, 0.0, &[1.0, 0.0], &cfg, None).unwrap();
        for (s, d) in tr.samples.iter().zip(tr.time_derivatives()) {
            assert!((d[0] + s.t.sin()).abs() < 1e-8 && (d[1] + s.t.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn comparisons() {
        let l = lag(1, "0.5*v1^2 - 0.5*q1^2");
        let xi = lagrange_dynamic_equation(&l);
        let x0 = JetPoint::new(0.0, vec![1.0], vec![0.0]);
        let a = integrate_second_order(&xi, &x0, &IntegratorConfig::new(0.0, 1.0, 0.1).unwrap(), None).unwrap();
        assert_eq!(compare_trajectories(&a, &a, None).unwrap().max, 0.0);
        let b = integrate_second_order(&xi, &x0, &IntegratorConfig::new(0.0, 1.0, 0.05).unwrap(), None).unwrap();
        assert!(matches!(
            compare_trajectories(&a, &b, None),
            Err(Error::GridMismatch(_))
        ));
        let shift = |_: f64, y: &[f64]| -> Result<Vec<f64>> { Ok(vec![y[0] + 1.0, y[1]]) };
        let r = compare_trajectories(&a, &a, Some(&shift)).unwrap();
        assert_eq!(r.per_component, vec![1.0, 0.0]);
    }
}
