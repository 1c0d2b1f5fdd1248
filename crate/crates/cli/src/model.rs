//! Model files: a TOML subset with one section per part of the model.
//!
//! ```toml
//! [space]
//! dim = 2
//! labels = ["x", "y"]        # optional, used in CSV headers
//!
//! [parameters]               # optional named constants
//! g = 9.8
//!
//! [lagrangian]               # exactly one of [lagrangian] / [newtonian]
//! L = "0.5*(v1^2 + v2^2) - g*q2"
//!
//! [constraint]               # optional; kind = forms | submanifold | linear | composite
//! kind = "submanifold"
//! f = ["v1^2 + v2^2 - 1"]
//!
//! [frame]                    # optional, defaults to the rest frame
//! gamma = ["0", "0"]
//!
//! [force]                    # optional external force covector
//! F = ["0", "0"]
//!
//! [initial]                  # optional default initial jet point
//! t = 0.0
//! q = [0.0, 0.0]
//! v = [0.6, 0.8]
//!
//! [probe]                    # sampling box for validity probes
//! count = 8
//! t = [0.0, 1.0]
//! q = [-1.0, 1.0]
//! v = [-1.0, 1.0]
//!
//! [run]                      # optional defaults for the time grid
//! t0 = 0.0
//! t1 = 1.0
//! dt = 1e-3
//! ```
//!
//! A Newtonian model gives `metric = [[..], ..]` and `xi = [..]` instead of `L`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use jetflow::bundle::{ConfigurationSpace, JetPoint, ReferenceFrame};
use jetflow::constraint::Codistribution;
use jetflow::dynamics::{
    apply_external_force, ExprDynamics, ExprMetric, ExternalForce, ForceReport, LagrangianSystem, NewtonianSystem,
};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use toml::Table;

use crate::error::CliError;
use crate::fields::{
    deny_unknown, expression, expression_matrix, expressions, invalid, number, numbers, opt_number, opt_usize, path,
    required, strings, table,
};
use crate::kinds::KindRegistry;

pub const PROBE_ENV: &str = "JETFLOW_PROBE_POINTS";
pub const DEFAULT_PROBE_COUNT: usize = 8;
/// Probes are drawn from a fixed stream so that loading is reproducible.
const PROBE_SEED: u64 = 0x6a65_7466_6c6f_77;

const SECTIONS: &[&str] = &[
    "space",
    "parameters",
    "lagrangian",
    "newtonian",
    "constraint",
    "frame",
    "force",
    "initial",
    "probe",
    "run",
];

/// Axis-aligned box of jet points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBox {
    pub t: (f64, f64),
    pub q: (f64, f64),
    pub v: (f64, f64),
}

impl Default for ProbeBox {
    fn default() -> Self {
        Self {
            t: (0.0, 1.0),
            q: (-1.0, 1.0),
            v: (-1.0, 1.0),
        }
    }
}

impl ProbeBox {
    pub fn sample(&self, rng: &mut SplitMix64, m: usize) -> JetPoint {
        let mut draw = |(lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
        let t = draw(self.t);
        let q = (0..m).map(|_| draw(self.q)).collect();
        let v = (0..m).map(|_| draw(self.v)).collect();
        JetPoint::new(t, q, v)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunDefaults {
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Overrides `[probe] count`.
    pub probe_points: Option<usize>,
}

impl LoadOptions {
    pub fn from_env() -> Result<Self, CliError> {
        let probe_points = match std::env::var(PROBE_ENV) {
            Ok(s) => Some(
                s.trim()
                    .parse()
                    .map_err(|_| CliError::Input(format!("{PROBE_ENV} must be a non-negative integer, got `{s}`")))?,
            ),
            Err(_) => None,
        };
        Ok(Self { probe_points })
    }
}

#[derive(Clone)]
pub struct Model {
    pub name: String,
    pub space: ConfigurationSpace,
    pub lagrangian: Option<Arc<LagrangianSystem>>,
    /// The dynamics including any external force.
    pub system: NewtonianSystem,
    pub force: Option<ExternalForce>,
    pub force_report: Option<ForceReport>,
    pub constraint: Option<Arc<Codistribution>>,
    pub frame: ReferenceFrame,
    pub frame_given: bool,
    pub initial: Option<JetPoint>,
    pub probe_box: ProbeBox,
    pub probes: Vec<JetPoint>,
    pub run: RunDefaults,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name)
            .field("dim", &self.space.dim())
            .field("lagrangian", &self.lagrangian.is_some())
            .field("constraint", &self.constraint.as_ref().map(|c| c.origin().kind()))
            .finish()
    }
}

impl Model {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// The constraint, or the empty codistribution.
    pub fn codistribution(&self) -> Arc<Codistribution> {
        self.constraint
            .clone()
            .unwrap_or_else(|| Arc::new(Codistribution::unconstrained(&self.space)))
    }
}

pub fn load_model(path: &Path) -> Result<Model, CliError> {
    load_model_with(path, LoadOptions::from_env()?)
}

pub fn load_model_with(path: &Path, options: LoadOptions) -> Result<Model, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    parse_model(&text, path, &name, options)
}

/// One-based line and column of a byte offset.
fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_model(text: &str, file: &Path, name: &str, options: LoadOptions) -> Result<Model, CliError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e.span().map_or((1, 1), |s| position(text, s.start));
        CliError::Parse {
            path: PathBuf::from(file),
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(invalid(
            k,
            format!("unknown section (allowed: {})", SECTIONS.join(", ")),
        ));
    }

    let space = read_space(&root)?;
    let m = space.dim();

    let probe_box = read_probe_box(&root)?;
    let count = match options.probe_points {
        Some(n) => n,
        None => table(&root, "probe")?
            .map(|t| opt_usize(t, "probe", "count"))
            .transpose()?
            .flatten()
            .unwrap_or(DEFAULT_PROBE_COUNT),
    };
    let mut rng = SplitMix64::seed_from_u64(PROBE_SEED);
    let probes: Vec<JetPoint> = (0..count).map(|_| probe_box.sample(&mut rng, m)).collect();

    let (lagrangian, base) = match (table(&root, "lagrangian")?, table(&root, "newtonian")?) {
        (Some(_), Some(_)) => {
            return Err(invalid(
                "newtonian",
                "a model has exactly one of [lagrangian] and [newtonian]",
            ))
        }
        (None, None) => {
            return Err(invalid(
                "lagrangian",
                "missing dynamics: give [lagrangian] or [newtonian]",
            ))
        }
        (Some(t), None) => {
            deny_unknown(t, "lagrangian", &["L"])?;
            let field = path("lagrangian", "L");
            let text = expression(required(t, "lagrangian", "L")?, &field)?;
            let lag = Arc::new(LagrangianSystem::parse(space.clone(), &text).map_err(CliError::at(&field))?);
            let sys = NewtonianSystem::from_lagrangian(&lag, &probes).map_err(CliError::at(&field))?;
            (Some(lag), sys)
        }
        (None, Some(t)) => (None, read_newtonian(&space, t, &probes)?),
    };

    let (force, force_report, system) = match table(&root, "force")? {
        Some(t) => {
            deny_unknown(t, "force", &["F"])?;
            let field = path("force", "F");
            let texts = expressions(t, "force", "F")?;
            let force = ExternalForce::parse(&space, &texts).map_err(CliError::at(&field))?;
            let (sys, report) = apply_external_force(&base, &force, &probes).map_err(CliError::at(&field))?;
            (Some(force), Some(report), sys)
        }
        None => (None, None, base),
    };

    let constraint = table(&root, "constraint")?
        .map(|t| KindRegistry::default().build(&space, t, &probes).map(Arc::new))
        .transpose()?;

    let (frame, frame_given) = match table(&root, "frame")? {
        Some(t) => {
            deny_unknown(t, "frame", &["gamma"])?;
            let field = path("frame", "gamma");
            let gamma = expressions(t, "frame", "gamma")?;
            let frame = ReferenceFrame::parse(&space, &gamma).map_err(CliError::at(&field))?;
            frame
                .check_velocity_independent(&space, &probes)
                .map_err(CliError::at(&field))?;
            (frame, true)
        }
        None => (ReferenceFrame::rest(&space), false),
    };

    let initial = table(&root, "initial")?.map(|t| read_initial(t, m)).transpose()?;

    let run = match table(&root, "run")? {
        Some(t) => {
            deny_unknown(t, "run", &["t0", "t1", "dt"])?;
            RunDefaults {
                t0: opt_number(t, "run", "t0")?,
                t1: opt_number(t, "run", "t1")?,
                dt: opt_number(t, "run", "dt")?,
            }
        }
        None => RunDefaults::default(),
    };

    Ok(Model {
        name: name.to_string(),
        space,
        lagrangian,
        system,
        force,
        force_report,
        constraint,
        frame,
        frame_given,
        initial,
        probe_box,
        probes,
        run,
    })
}

fn read_space(root: &Table) -> Result<ConfigurationSpace, CliError> {
    let t = table(root, "space")?.ok_or_else(|| invalid("space", "missing section"))?;
    deny_unknown(t, "space", &["dim", "labels"])?;
    let dim = opt_usize(t, "space", "dim")?.ok_or_else(|| invalid("space.dim", "missing"))?;
    let mut parameters: Vec<(String, f64)> = Vec::new();
    if let Some(p) = table(root, "parameters")? {
        for (k, v) in p {
            parameters.push((k.clone(), number(v, &path("parameters", k))?));
        }
    }
    let borrowed: Vec<(&str, f64)> = parameters.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let field = if parameters.is_empty() {
        "space.dim"
    } else {
        "parameters"
    };
    let space = ConfigurationSpace::with_parameters(dim, &borrowed).map_err(CliError::at(field))?;
    match t.get("labels") {
        Some(v) => {
            let labels = strings(v, "space.labels")?;
            space.with_labels(labels).map_err(CliError::at("space.labels"))
        }
        None => Ok(space),
    }
}

fn read_newtonian(space: &ConfigurationSpace, t: &Table, probes: &[JetPoint]) -> Result<NewtonianSystem, CliError> {
    deny_unknown(t, "newtonian", &["metric", "xi"])?;
    let m = space.dim();
    let rows = expression_matrix(t, "newtonian", "metric")?;
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(invalid("newtonian.metric", format!("expected a {m} x {m} table")));
    }
    let entries = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, e)| {
                    space
                        .parse(e)
                        .map_err(CliError::at(&format!("newtonian.metric[{i}][{j}]")))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let metric = ExprMetric::new(entries, probes).map_err(CliError::at("newtonian.metric"))?;
    let xi_texts = expressions(t, "newtonian", "xi")?;
    if xi_texts.len() != m {
        return Err(invalid(
            "newtonian.xi",
            format!("expected {m} components, got {}", xi_texts.len()),
        ));
    }
    let xi = xi_texts
        .iter()
        .enumerate()
        .map(|(i, e)| space.parse(e).map_err(CliError::at(&format!("newtonian.xi[{i}]"))))
        .collect::<Result<Vec<_>, _>>()?;
    NewtonianSystem::new(space.clone(), Arc::new(metric), Arc::new(ExprDynamics::new(xi)))
        .map_err(CliError::at("newtonian"))
}

fn read_probe_box(root: &Table) -> Result<ProbeBox, CliError> {
    let mut b = ProbeBox::default();
    if let Some(t) = table(root, "probe")? {
        deny_unknown(t, "probe", &["count", "t", "q", "v"])?;
        for (key, slot) in [("t", &mut b.t), ("q", &mut b.q), ("v", &mut b.v)] {
            if let Some(v) = t.get(key) {
                let field = path("probe", key);
                match numbers(v, &field)?.as_slice() {
                    [lo, hi] if lo <= hi => *slot = (*lo, *hi),
                    _ => return Err(invalid(&field, "expected [low, high] with low <= high")),
                }
            }
        }
    }
    Ok(b)
}

fn read_initial(t: &Table, m: usize) -> Result<JetPoint, CliError> {
    deny_unknown(t, "initial", &["t", "q", "v"])?;
    let time = opt_number(t, "initial", "t")?.unwrap_or(0.0);
    let vec_of = |key: &str| -> Result<Vec<f64>, CliError> {
        let field = path("initial", key);
        let v = numbers(required(t, "initial", key)?, &field)?;
        if v.len() != m {
            return Err(invalid(&field, format!("expected {m} entries, got {}", v.len())));
        }
        Ok(v)
    };
    Ok(JetPoint::new(time, vec_of("q")?, vec_of("v")?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Model, CliError> {
        parse_model(
            text,
            Path::new("test.toml"),
            "test",
            LoadOptions { probe_points: Some(4) },
        )
    }

    #[test]
    fn minimal_free_particle() {
        let m = load("[space]\ndim = 1\n[lagrangian]\nL = \"0.5*v1^2\"\n").unwrap();
        assert_eq!(m.dim(), 1);
        assert!(m.constraint.is_none());
        assert_eq!(m.probes.len(), 4);
    }

    #[test]
    fn both_dynamics_sections_rejected() {
        let e =
            load("[space]\ndim = 1\n[lagrangian]\nL = \"0.5*v1^2\"\n[newtonian]\nmetric = [[\"1\"]]\nxi = [\"0\"]\n")
                .unwrap_err();
        assert!(
            matches!(e, CliError::Validation { ref field, .. } if field == "newtonian"),
            "{e}"
        );
    }

    #[test]
    fn parse_error_has_position() {
        let e = load("[space]\ndim = 1\n[lagrangian\n").unwrap_err();
        match e {
            CliError::Parse { line, column, .. } => assert_eq!((line, column), (3, 12)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_variable_names_field() {
        let e = load("[space]\ndim = 1\n[lagrangian]\nL = \"0.5*v2^2\"\n").unwrap_err();
        assert!(
            matches!(e, CliError::Validation { ref field, .. } if field == "lagrangian.L"),
            "{e}"
        );
    }

    #[test]
    fn parameters_are_constants() {
        let m = load("[space]\ndim = 1\n[parameters]\nk = 4\n[lagrangian]\nL = \"0.5*v1^2 - 0.5*k*q1^2\"\n").unwrap();
        let x = JetPoint::new(0.0, vec![1.0], vec![0.0]);
        assert_eq!(m.system.xi.eval(&x).unwrap(), vec![-4.0]);
    }

    #[test]
    fn newtonian_shape_checked() {
        let e = load("[space]\ndim = 2\n[newtonian]\nmetric = [[\"1\"]]\nxi = [\"0\", \"0\"]\n").unwrap_err();
        assert!(
            matches!(e, CliError::Validation { ref field, .. } if field == "newtonian.metric"),
            "{e}"
        );
    }

    #[test]
    fn initial_state_length_checked() {
        let e =
            load("[space]\ndim = 2\n[lagrangian]\nL = \"v1^2+v2^2\"\n[initial]\nq = [0, 0]\nv = [1]\n").unwrap_err();
        assert!(
            matches!(e, CliError::Validation { ref field, .. } if field == "initial.v"),
            "{e}"
        );
    }

    #[test]
    fn velocity_dependent_frame_rejected() {
        let e = load("[space]\ndim = 1\n[lagrangian]\nL = \"v1^2\"\n[frame]\ngamma = [\"v1\"]\n").unwrap_err();
        assert!(
            matches!(e, CliError::Validation { ref field, .. } if field == "frame.gamma"),
            "{e}"
        );
    }

    #[test]
    fn probes_are_reproducible_and_in_box() {
        let text = "[space]\ndim = 2\n[lagrangian]\nL = \"v1^2+v2^2\"\n[probe]\nq = [2, 3]\nv = [-0.5, 0.5]\n";
        let a = load(text).unwrap();
        let b = load(text).unwrap();
        assert_eq!(a.probes, b.probes);
        for p in &a.probes {
            assert!(p.q.iter().all(|q| (2.0..3.0).contains(q)));
            assert!(p.v.iter().all(|v| (-0.5..0.5).contains(v)));
        }
    }
}
