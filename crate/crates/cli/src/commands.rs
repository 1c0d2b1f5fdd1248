//! The six commands. Each returns its main artifact (a CSV or a report) plus
//! diagnostics for stderr; `run` decides where they go.

use std::path::PathBuf;
use std::sync::Arc;

use jetflow::bundle::{JetPoint, PhasePoint, VerticalPhasePoint};
use jetflow::constraint::{admissibility_report, verify_constraint_frame, ConstraintOrigin, RANK_TOL};
use jetflow::dynamics::{check_compatibility, check_metric_symmetry, NewtonianSystem};
use jetflow::hamilton::{relation_residuals, ConstrainedHamiltonField, HamiltonianSide, PhaseField};
use jetflow::integrate::{
    integrate_constrained, integrate_first_order, integrate_second_order, ConstraintMonitor, IntegratorConfig,
    PhaseFlow, Trajectory, VerticalFlow, INITIAL_CONSTRAINT_TOL,
};
use jetflow::projection::{
    constrain, least_norm_certificate, ConstrainedDynamics, DecomposerRegistry, KktOracle, MetricProjection,
    COMPATIBILITY_TOL, ORTHOGONALITY_TOL,
};
use jetflow::report::CheckReport;
use jetflow::vertical::{
    constrained_trajectory_lagrangian, constrained_vertical_hamiltonian, trajectory_lagrangian,
    vertical_hamiltonian_value, vertical_lift, AnalyticVerticalHamilton, TrajectorySample, VerticalField,
    DEFAULT_FD_STEP,
};
use jetflow::Error;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{CliError, EXIT_CHECK_FAILED, EXIT_OK};
use crate::model::Model;
use crate::output::{self, Report};

pub const DEFAULT_T_SPAN: f64 = 1.0;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_POINTS: usize = 100;
pub const DEFAULT_EPS: f64 = 1e-4;
pub const DUALITY_TOL: f64 = 1e-10;
pub const ORACLE_TOL: f64 = 1e-9;
pub const ROUNDTRIP_TOL: f64 = 1e-10;
pub const RELATION_TOL: f64 = 1e-10;
/// Finite-difference Jacobi error allowed per unit of `eps`.
pub const JACOBI_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Simulate,
    Check,
    Hamsim,
    Jacobi,
    Energy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Simulate => "simulate",
            Command::Check => "check",
            Command::Hamsim => "hamsim",
            Command::Jacobi => "jacobi",
            Command::Energy => "energy",
        }
    }

    pub fn produces_csv(self) -> bool {
        !matches!(self, Command::Validate | Command::Check)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub dt: Option<f64>,
    /// `q1.. v1..` for the initial jet point.
    pub state: Option<String>,
    /// `q̇1.. ṗ1..` for the initial vertical vector of `jacobi`.
    pub delta: Option<String>,
    pub eps: f64,
    pub seed: u64,
    pub trials: usize,
    pub points: usize,
    pub out: Option<PathBuf>,
    pub method: String,
    pub gnuplot: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            t0: None,
            t1: None,
            dt: None,
            state: None,
            delta: None,
            eps: DEFAULT_EPS,
            seed: DEFAULT_SEED,
            trials: DEFAULT_TRIALS,
            points: DEFAULT_POINTS,
            out: None,
            method: "metric".into(),
            gnuplot: false,
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub code: i32,
    pub text: String,
    /// Number of CSV columns, when `text` is a CSV.
    pub columns: Option<usize>,
    pub diagnostics: Vec<String>,
}

pub fn execute(cmd: Command, model: &Model, opts: &RunOptions) -> Result<Output, CliError> {
    match cmd {
        Command::Validate => validate(model),
        Command::Simulate => simulate(model, opts),
        Command::Check => check(model, opts),
        Command::Hamsim => hamsim(model, opts),
        Command::Jacobi => jacobi(model, opts),
        Command::Energy => energy(model, opts),
    }
}

fn parse_numbers(text: &str, expected: usize, flag: &str) -> Result<Vec<f64>, CliError> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Input(format!("{flag}: `{s}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(CliError::Input(format!(
            "{flag}: expected {expected} numbers, got {}",
            values.len()
        )));
    }
    Ok(values)
}

fn start_time(model: &Model, opts: &RunOptions) -> f64 {
    opts.t0
        .or(model.initial.as_ref().map(|x| x.t))
        .or(model.run.t0)
        .unwrap_or(0.0)
}

pub fn grid(model: &Model, opts: &RunOptions) -> Result<IntegratorConfig, CliError> {
    let t0 = start_time(model, opts);
    let t1 = opts.t1.or(model.run.t1).unwrap_or(t0 + DEFAULT_T_SPAN);
    let dt = opts.dt.or(model.run.dt).unwrap_or(DEFAULT_DT);
    Ok(IntegratorConfig::new(t0, t1, dt)?)
}

pub fn initial_state(model: &Model, opts: &RunOptions) -> Result<JetPoint, CliError> {
    let m = model.dim();
    let t = start_time(model, opts);
    match (&opts.state, &model.initial) {
        (Some(s), _) => {
            let v = parse_numbers(s, 2 * m, "--state")?;
            Ok(JetPoint::new(t, v[..m].to_vec(), v[m..].to_vec()))
        }
        (None, Some(x)) => Ok(JetPoint::new(t, x.q.clone(), x.v.clone())),
        (None, None) => Err(CliError::Input(
            "no initial state: add an [initial] section or pass --state".into(),
        )),
    }
}

/// The model's dynamics split against its constraint by the named method.
pub fn constrained(model: &Model, system: NewtonianSystem, method: &str) -> Result<ConstrainedDynamics, CliError> {
    let decomposer = DecomposerRegistry::default().get(method)?;
    let cd = constrain(system, model.codistribution())?;
    Ok(ConstrainedDynamics::with_decomposer(cd.base, cd.cod, decomposer)?)
}

fn require_lagrangian(model: &Model, cmd: Command) -> Result<Arc<jetflow::dynamics::LagrangianSystem>, CliError> {
    let lag = model
        .lagrangian
        .clone()
        .ok_or_else(|| CliError::Input(format!("{} needs a [lagrangian] model", cmd.name())))?;
    if cmd != Command::Energy && model.force.is_some() {
        return Err(CliError::Input(format!(
            "{} does not support an external [force]: the momentum side has no force term",
            cmd.name()
        )));
    }
    Ok(lag)
}

fn csv_output(traj: &Trajectory, model: &Model, mut diagnostics: Vec<String>) -> Output {
    diagnostics.extend(traj.notes.iter().cloned());
    Output {
        code: EXIT_OK,
        text: output::csv(traj, model.space.labels()),
        columns: Some(1 + traj.state_names.len() + traj.monitor_names.len()),
        diagnostics,
    }
}

fn force_warning(model: &Model) -> Vec<String> {
    model
        .force_report
        .as_ref()
        .and_then(|r| r.warning.clone())
        .map(|w| format!("warning: {w}"))
        .into_iter()
        .collect()
}

fn validate(model: &Model) -> Result<Output, CliError> {
    let kind = model.constraint.as_ref().map_or("none", |c| c.origin().kind());
    let mut r = Report::new(format!(
        "validate {} dim={} dynamics={} constraint={} probes={}",
        model.name,
        model.dim(),
        if model.lagrangian.is_some() {
            "lagrangian"
        } else {
            "newtonian"
        },
        kind,
        model.probes.len()
    ));
    r.check(&check_metric_symmetry(model.system.metric.as_ref(), &model.probes)?);
    r.check(&check_compatibility(&model.system, &model.probes)?);
    r.line(format!(
        "INFO riemannian={} (positive definite at every probe)",
        if model.system.metric.riemannian() { "yes" } else { "no" }
    ));
    if let Some(cod) = &model.constraint {
        let mut adm =
            CheckReport::new("admissibility", 0.0).with_note(format!("rank deficit of sdot, n={}", cod.len()));
        for x in &model.probes {
            let a = admissibility_report(cod, x)?;
            adm.record(a.expected.saturating_sub(a.rank) as f64, || x.values());
        }
        r.check(&adm);
        match cod.origin() {
            ConstraintOrigin::Linear(spec) => {
                let frame = verify_constraint_frame(spec, &model.frame, &model.probes)?;
                let mut c = frame.check;
                if !model.frame_given {
                    c = c.with_note("rest frame");
                }
                r.check(&c);
            }
            other => r.line(format!("SKIP constraint_frame (constraint kind {})", other.kind())),
        }
    }
    if let Some(f) = &model.force_report {
        r.advisory(&f.check);
    }
    let (text, code) = r.finish();
    Ok(Output {
        code,
        text,
        columns: None,
        diagnostics: force_warning(model),
    })
}

fn simulate(model: &Model, opts: &RunOptions) -> Result<Output, CliError> {
    let cfg = grid(model, opts)?;
    let x0 = initial_state(model, opts)?;
    let mut diagnostics = force_warning(model);
    if model.constraint.is_none() && !model.system.metric.riemannian() {
        diagnostics.push("note: metric is not positive definite; running without monitors".into());
        let traj = integrate_second_order(model.system.xi.as_ref(), &x0, &cfg, None)?;
        return Ok(csv_output(&traj, model, diagnostics));
    }
    let cd = constrained(model, model.system.clone(), &opts.method)?;
    let traj = integrate_constrained(&cd, &x0, &cfg, Some(&monitor(model, cd.clone())))?;
    Ok(csv_output(&traj, model, diagnostics))
}

fn monitor(model: &Model, cd: ConstrainedDynamics) -> ConstraintMonitor {
    let mut mon = ConstraintMonitor::new(cd, model.frame.clone());
    if let Some(lag) = &model.lagrangian {
        mon = mon.with_lagrangian(Arc::clone(lag));
    }
    if let Some(f) = &model.force {
        mon = mon.with_external_force(f.clone());
    }
    mon
}

fn energy(model: &Model, opts: &RunOptions) -> Result<Output, CliError> {
    require_lagrangian(model, Command::Energy)?;
    let cfg = grid(model, opts)?;
    let x0 = initial_state(model, opts)?;
    let cd = constrained(model, model.system.clone(), &opts.method)?;
    let mut traj = integrate_constrained(&cd, &x0, &cfg, Some(&monitor(model, cd.clone())))?;
    output::select_monitors(&mut traj, &["mon_energy", "mon_balance", "mon_power"]);
    Ok(csv_output(&traj, model, force_warning(model)))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Samples `count` admissible points from the model's probe box.
fn sample_points(model: &Model, rng: &mut SplitMix64, count: usize) -> Result<(Vec<JetPoint>, usize), CliError> {
    let cod = model.codistribution();
    let mut points = Vec::with_capacity(count);
    let mut skipped = 0usize;
    while points.len() < count {
        let x = model.probe_box.sample(rng, model.dim());
        if !cod.is_empty() && !admissibility_report(&cod, &x)?.passed() {
            skipped += 1;
            if skipped > 100 * (count + 1) {
                return Err(Error::InadmissibleConstraint {
                    rank: 0,
                    expected: cod.len(),
                    point: x.values(),
                    detail: Some(format!("no admissible points in the probe box after {skipped} draws")),
                }
                .into());
            }
            continue;
        }
        points.push(x);
    }
    Ok((points, skipped))
}

fn check(model: &Model, opts: &RunOptions) -> Result<Output, CliError> {
    let cd = constrained(model, model.system.clone(), &opts.method)?;
    let metric =
        ConstrainedDynamics::with_decomposer(model.system.clone(), Arc::clone(&cd.cod), Arc::new(MetricProjection))?;
    let kkt = ConstrainedDynamics::with_decomposer(model.system.clone(), Arc::clone(&cd.cod), Arc::new(KktOracle))?;
    let mut rng = SplitMix64::seed_from_u64(opts.seed);
    let (points, skipped) = sample_points(model, &mut rng, opts.points)?;

    let mut r = Report::new(format!(
        "check {} seed={} points={} trials={} method={}",
        model.name,
        opts.seed,
        points.len(),
        opts.trials,
        cd.method()
    ));
    if skipped > 0 {
        r.line(format!(
            "INFO resampled {skipped} points where rank(sdot) < n (rank tol {RANK_TOL:e})"
        ));
    }

    let mut compat = CheckReport::new("compatibility", COMPATIBILITY_TOL);
    let mut orth = CheckReport::new("orthogonality", ORTHOGONALITY_TOL);
    let mut duality = CheckReport::new("reaction_force_duality", DUALITY_TOL);
    let mut pyth = CheckReport::new("gauss_pythagoras", jetflow::projection::PYTHAGORAS_TOL);
    let mut oracle = CheckReport::new("oracle_equivalence", ORACLE_TOL);
    let mut violations = 0usize;
    let mut sampled = 0usize;
    let mut unique = 0usize;
    for x in &points {
        let d = cd.decompose(x)?;
        compat.record(cd.compatibility_residual(x, &d)?, || x.values());
        orth.record(cd.orthogonality_residual(x, &d)?, || x.values());
        duality.record(cd.duality_residual(x, &d)?, || x.values());
        let cert = least_norm_certificate(&cd, x, opts.trials, &mut || rng.random_range(-1.0..1.0))?;
        if cert.unique {
            unique += 1;
        } else {
            let w = cert.pythagoras.witness.clone().unwrap_or_default();
            pyth.record(cert.pythagoras.max_residual, || w);
        }
        violations += cert.violations;
        sampled += cert.trials;
        let a = metric.decompose(x)?.xi_tilde;
        let b = kkt.decompose(x)?.xi_tilde;
        oracle.record(max_diff(&a, &b), || x.values());
    }
    if unique > 0 {
        pyth = pyth.with_note(format!("{unique} points with a unique decomposition"));
    }
    r.check(&compat);
    r.check(&orth);
    r.check(&duality);
    r.check(&pyth);
    r.count("least_norm_violations", violations, 0, &format!("trials={sampled}"));
    r.check(&oracle);

    if let Some(lag) = &model.lagrangian {
        // the momentum side carries no external force, so compare with the bare Lagrangian system
        let bare = NewtonianSystem::from_lagrangian(lag, &model.probes)?;
        let bare_cd = constrained(model, bare, "metric")?;
        let side = Arc::new(HamiltonianSide::new(Arc::clone(lag)));
        let field = side.constrained_hamilton_field(Arc::clone(&bare_cd.cod))?;
        let mut roundtrip = CheckReport::new("legendre_roundtrip", ROUNDTRIP_TOL);
        let mut reduced = CheckReport::new("reduced_metric_relation", RELATION_TOL);
        let mut beta = CheckReport::new("beta_relation", RELATION_TOL);
        let mut reaction = CheckReport::new("reaction_covector", RELATION_TOL);
        for x in &points {
            let (y, _) = side.legendre(x)?;
            let back = side.resolve(&y)?;
            roundtrip.record(max_diff(&back.v, &x.v), || x.values());
            if !bare_cd.cod.is_empty() {
                let rel = relation_residuals(&field, &bare_cd, &y)?;
                let at = || phase_values(&y);
                reduced.record(rel.reduced_metric, at);
                beta.record(rel.beta, at);
                reaction.record(rel.reaction, at);
            }
        }
        r.check(&roundtrip);
        if !bare_cd.cod.is_empty() {
            r.check(&reduced);
            r.check(&beta);
            r.check(&reaction);
        }
    }
    let (text, code) = r.finish();
    Ok(Output {
        code,
        text,
        columns: None,
        diagnostics: force_warning(model),
    })
}

fn phase_values(y: &PhasePoint) -> Vec<f64> {
    std::iter::once(y.t)
        .chain(y.q.iter().copied())
        .chain(y.p.iter().copied())
        .collect()
}

/// Momentum-side fields of a Lagrangian model.
struct PhaseSide {
    side: Arc<HamiltonianSide>,
    constrained: Option<Arc<ConstrainedHamiltonField>>,
}

impl PhaseSide {
    fn new(model: &Model, lag: Arc<jetflow::dynamics::LagrangianSystem>, x0: &JetPoint) -> Result<Self, CliError> {
        let side = Arc::new(HamiltonianSide::new(lag).with_seed(x0.v.clone()));
        let constrained = match &model.constraint {
            Some(cod) if !cod.is_empty() => Some(Arc::new(side.constrained_hamilton_field(Arc::clone(cod))?)),
            _ => None,
        };
        Ok(Self { side, constrained })
    }

    fn field(&self) -> Arc<dyn PhaseField> {
        match &self.constrained {
            Some(f) => Arc::clone(f) as Arc<dyn PhaseField>,
            None => Arc::new(self.side.hamilton_field()),
        }
    }

    fn lagrangian_value(&self, s: &TrajectorySample) -> jetflow::Result<f64> {
        match &self.constrained {
            Some(f) => constrained_trajectory_lagrangian(f, s),
            None => trajectory_lagrangian(&self.side, s),
        }
    }

    fn vertical_value(&self, z: &VerticalPhasePoint) -> jetflow::Result<f64> {
        match &self.constrained {
            Some(f) => constrained_vertical_hamiltonian(f, z),
            None => vertical_hamiltonian_value(&self.side, z),
        }
    }
}

fn check_initial_on_constraint(model: &Model, x0: &JetPoint) -> Result<(), CliError> {
    if let Some(r) = model
        .constraint
        .as_ref()
        .map(|c| c.function_residuals(x0))
        .transpose()?
        .flatten()
    {
        let worst = r.iter().fold(0.0f64, |a, b| a.max(*b));
        if worst > INITIAL_CONSTRAINT_TOL {
            return Err(Error::OffConstraint {
                residual: worst,
                tolerance: INITIAL_CONSTRAINT_TOL,
            }
            .into());
        }
    }
    Ok(())
}

/// `L_H` at every sample, with the time derivatives of the base part taken
/// from the samples and `(q̇, ṗ)` from `vertical`.
fn lagrangian_column(
    phase: &PhaseSide,
    traj: &Trajectory,
    m: usize,
    vertical: &dyn Fn(&[f64]) -> (Vec<f64>, Vec<f64>),
) -> Result<Vec<f64>, CliError> {
    let rates = traj.time_derivatives();
    traj.samples
        .iter()
        .zip(rates)
        .map(|(s, d)| {
            let (qdot, pdot) = vertical(&s.state);
            let sample = TrajectorySample {
                z: VerticalPhasePoint {
                    base: PhasePoint::new(s.t, s.state[..m].to_vec(), s.state[m..2 * m].to_vec()),
                    qdot,
                    pdot,
                },
                q_t: d[..m].to_vec(),
                p_t: d[m..2 * m].to_vec(),
            };
            Ok(phase.lagrangian_value(&sample)?)
        })
        .collect()
}

fn hamsim(model: &Model, opts: &RunOptions) -> Result<Output, CliError> {
    let lag = require_lagrangian(model, Command::Hamsim)?;
    let cfg = grid(model, opts)?;
    let x0 = initial_state(model, opts)?;
    check_initial_on_constraint(model, &x0)?;
    let m = model.dim();
    let phase = PhaseSide::new(model, lag, &x0)?;
    let (y0, _) = phase.side.legendre(&x0)?;
    let cod = model.codistribution();
    let mut names: Vec<String> = cod
        .functions()
        .map(|f| (1..=f.len()).map(|a| format!("mon_f{a}")).collect())
        .unwrap_or_default();
    names.extend(["mon_H", "mon_compat"].map(String::from));
    let observe = |t: f64, y: &[f64]| -> jetflow::Result<Vec<f64>> {
        let point = PhasePoint::new(t, y[..m].to_vec(), y[m..].to_vec());
        let x = phase.side.resolve(&point)?;
        let (_, h) = phase.side.legendre(&x)?;
        let mut out = cod.function_residuals(&x)?.unwrap_or_default();
        out.push(h);
        out.push(match &phase.constrained {
            Some(f) => f.details(&point)?.compatibility_residual(),
            None => 0.0,
        });
        Ok(out)
    };
    let y: Vec<f64> = y0.q.iter().chain(&y0.p).copied().collect();
    let mut traj = integrate_first_order(&PhaseFlow(phase.field()), y0.t, &y, &cfg, Some((&names, &observe)))?;
    let ones = vec![1.0; m];
    let lh = lagrangian_column(&phase, &traj, m, &|_| (ones.clone(), ones.clone()))?;
    output::push_monitor(&mut traj, "mon_lh", lh);
    Ok(csv_output(&traj, model, Vec::new()))
}

/// Max over samples and components of `|(y_eps - y) / eps - (q̇, ṗ)|`.
pub struct JacobiComparison {
    pub per_sample: Vec<f64>,
    pub max: f64,
    pub tolerance: f64,
}

fn jacobi(model: &Model, opts: &RunOptions) -> Result<Output, CliError> {
    let lag = require_lagrangian(model, Command::Jacobi)?;
    let cfg = grid(model, opts)?;
    let x0 = initial_state(model, opts)?;
    check_initial_on_constraint(model, &x0)?;
    if !(opts.eps > 0.0 && opts.eps.is_finite()) {
        return Err(CliError::Input(format!("--eps must be positive, got {}", opts.eps)));
    }
    let m = model.dim();
    let delta = match &opts.delta {
        Some(s) => parse_numbers(s, 2 * m, "--delta")?,
        None => (0..2 * m).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect(),
    };
    let phase = PhaseSide::new(model, lag, &x0)?;
    let (y0, _) = phase.side.legendre(&x0)?;
    let base = phase.field();
    let lift: Arc<dyn VerticalField> = match &phase.constrained {
        Some(f) => Arc::new(vertical_lift(Arc::clone(f) as Arc<dyn PhaseField>, DEFAULT_FD_STEP)),
        None => Arc::new(AnalyticVerticalHamilton::new(Arc::clone(&phase.side))),
    };
    let y: Vec<f64> = y0.q.iter().chain(&y0.p).copied().collect();
    let z: Vec<f64> = y.iter().chain(&delta).copied().collect();
    let names = vec!["mon_vh".to_string()];
    let vflow = VerticalFlow(Arc::clone(&lift));
    let observe =
        |t: f64, s: &[f64]| -> jetflow::Result<Vec<f64>> { Ok(vec![phase.vertical_value(&vflow.point(t, s))?]) };
    let mut traj = integrate_first_order(&vflow, y0.t, &z, &cfg, Some((&names, &observe)))?;

    let flow = PhaseFlow(base);
    let reference = integrate_first_order(&flow, y0.t, &y, &cfg, None)?;
    let shifted: Vec<f64> = y.iter().zip(&delta).map(|(a, d)| a + opts.eps * d).collect();
    let perturbed = integrate_first_order(&flow, y0.t, &shifted, &cfg, None)?;
    let cmp = jacobi_comparison(&traj, &reference, &perturbed, opts.eps, m);

    let lh = lagrangian_column(&phase, &traj, m, &|s| (s[2 * m..3 * m].to_vec(), s[3 * m..].to_vec()))?;
    output::push_monitor(&mut traj, "mon_lh", lh);
    output::push_monitor(&mut traj, "mon_fd_dev", cmp.per_sample.clone());

    let mut out = csv_output(&traj, model, Vec::new());
    let mut report = CheckReport::new("jacobi_fd_deviation", cmp.tolerance);
    for (s, dev) in traj.samples.iter().zip(&cmp.per_sample) {
        report.record(*dev, || vec![s.t]);
    }
    if phase.constrained.is_some() {
        out.diagnostics.push(format!(
            "INFO jacobi_fd_deviation max={:.6e} tol={:e} (constrained field: the lift is not its linearization, not checked)",
            cmp.max, cmp.tolerance
        ));
    } else {
        if !report.passed() {
            out.code = EXIT_CHECK_FAILED;
        }
        out.diagnostics.push(report.to_string());
    }
    Ok(out)
}

pub fn jacobi_comparison(
    vertical: &Trajectory,
    reference: &Trajectory,
    perturbed: &Trajectory,
    eps: f64,
    m: usize,
) -> JacobiComparison {
    let per_sample: Vec<f64> = vertical
        .samples
        .iter()
        .zip(reference.samples.iter().zip(&perturbed.samples))
        .map(|(v, (r, p))| {
            (0..2 * m)
                .map(|k| ((p.state[k] - r.state[k]) / eps - v.state[2 * m + k]).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let max = per_sample.iter().copied().fold(0.0, f64::max);
    JacobiComparison {
        per_sample,
        max,
        tolerance: JACOBI_FACTOR * eps,
    }
}
