//! Constraint codistributions on `J¹Q`.
//!
//! A codistribution is spanned by forms `s = s_0 dt + s_i dq^i + ṡ_i dv^i`.
//! Four constructors are provided: raw forms, the differentials of defining
//! functions `f(t, q, v)`, linear constraints `f_0 + f_i v^i`, and the
//! constraint induced by a connection on a composite fibration.

use nalgebra::{DMatrix, DVector};

use crate::bundle::{ConfigurationSpace, JetPoint, ReferenceFrame};
use crate::error::{Error, Result};
use crate::expr::{self, ast_ops, Ast};
use crate::linalg;
use crate::report::CheckReport;

/// Relative rank tolerance for `ṡ^a_i`.
pub const RANK_TOL: f64 = 1e-10;

/// `s = s_0 dt + s_i dq^i + ṡ_i dv^i` with expression coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintOneForm {
    pub s0: Ast,
    pub si: Vec<Ast>,
    pub sdoti: Vec<Ast>,
}

/// Coefficients of a form at one jet point.
#[derive(Debug, Clone, PartialEq)]
pub struct FormValues {
    pub s0: f64,
    pub s: Vec<f64>,
    pub sdot: Vec<f64>,
}

impl ConstraintOneForm {
    /// The differential `df` of a function on `J¹Q`.
    pub fn differential(space: &ConfigurationSpace, f: &Ast) -> Self {
        let m = space.dim();
        Self {
            s0: f.derivative(space.t_index()),
            si: (0..m).map(|i| f.derivative(space.q_index(i))).collect(),
            sdoti: (0..m).map(|i| f.derivative(space.v_index(i))).collect(),
        }
    }

    pub fn eval(&self, x: &JetPoint) -> Result<FormValues> {
        let values = x.values();
        let e = |a: &Ast| expr::eval(a, &values).map_err(Error::from);
        Ok(FormValues {
            s0: e(&self.s0)?,
            s: self.si.iter().map(e).collect::<Result<_>>()?,
            sdot: self.sdoti.iter().map(e).collect::<Result<_>>()?,
        })
    }
}

/// `f^a_0(t, q) + f^a_i(t, q) v^i = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraintSpec {
    pub f0: Vec<Ast>,
    pub fi: Vec<Vec<Ast>>,
}

impl LinearConstraintSpec {
    pub fn parse<S: AsRef<str>>(space: &ConfigurationSpace, f0: &[S], fi: &[Vec<S>]) -> Result<Self> {
        Ok(Self {
            f0: space.parse_all(f0)?,
            fi: fi.iter().map(|row| space.parse_all(row)).collect::<Result<_>>()?,
        })
    }

    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    /// The defining functions `f^a_0 + f^a_i v^i`.
    pub fn functions(&self, space: &ConfigurationSpace) -> Vec<Ast> {
        self.f0
            .iter()
            .zip(&self.fi)
            .map(|(f0, row)| {
                row.iter().enumerate().fold(f0.clone(), |acc, (i, fi)| {
                    ast_ops::add(acc, ast_ops::mul(fi.clone(), Ast::Var(space.v_index(i))))
                })
            })
            .collect()
    }

    /// `(f^a_0, f^a_i)` evaluated at `(t, q)`.
    pub fn eval(&self, x: &JetPoint) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let values = x.values();
        let n = self.len();
        let m = x.dim();
        let mut f0 = DVector::zeros(n);
        let mut fi = DMatrix::zeros(n, m);
        for a in 0..n {
            f0[a] = expr::eval(&self.f0[a], &values)?;
            for i in 0..m {
                fi[(a, i)] = expr::eval(&self.fi[a][i], &values)?;
            }
        }
        Ok((f0, fi))
    }
}

/// Connection `q^a_t = B^a + σ^r_t B^a_r` on a composite fibration
/// `Q -> Σ -> R`, with coordinates split into base `σ^r` and fiber `q^a`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeConstraintSpec {
    /// Zero-based coordinate indices of the base `σ^r`.
    pub base: Vec<usize>,
    /// Zero-based coordinate indices of the fiber `q^a`.
    pub fiber: Vec<usize>,
    /// `B^a(t, σ, q)`, one per fiber coordinate.
    pub b: Vec<Ast>,
    /// `B^a_r(t, σ, q)`, indexed `[a][r]`.
    pub br: Vec<Vec<Ast>>,
}

impl CompositeConstraintSpec {
    pub fn validate(&self, space: &ConfigurationSpace) -> Result<()> {
        let m = space.dim();
        let mut seen = vec![false; m];
        for &i in self.base.iter().chain(&self.fiber) {
            if i >= m {
                return Err(Error::Partition(format!("coordinate index {} out of range", i + 1)));
            }
            if seen[i] {
                return Err(Error::Partition(format!("coordinate {} listed twice", i + 1)));
            }
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Partition(format!("coordinate {} not assigned", i + 1)));
        }
        if self.fiber.is_empty() {
            return Err(Error::Partition("fiber must be non-empty".into()));
        }
        if self.b.len() != self.fiber.len()
            || self.br.len() != self.fiber.len()
            || self.br.iter().any(|r| r.len() != self.base.len())
        {
            return Err(Error::Partition(format!(
                "expected {} B^a and {}x{} B^a_r entries",
                self.fiber.len(),
                self.fiber.len(),
                self.base.len()
            )));
        }
        for e in self.b.iter().chain(self.br.iter().flatten()) {
            if !space.is_velocity_free(e) {
                return Err(Error::Config(
                    "connection components must not depend on velocity".into(),
                ));
            }
        }
        Ok(())
    }
}

/// How a codistribution was built.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintOrigin {
    Forms,
    Submanifold,
    Linear(LinearConstraintSpec),
    Composite(CompositeConstraintSpec),
}

impl ConstraintOrigin {
    pub fn kind(&self) -> &'static str {
        match self {
            ConstraintOrigin::Forms => "forms",
            ConstraintOrigin::Submanifold => "submanifold",
            ConstraintOrigin::Linear(_) => "linear",
            ConstraintOrigin::Composite(_) => "composite",
        }
    }
}

/// Coefficients of all forms at one point: `s0` (n), `s` and `sdot` (n×m).
#[derive(Debug, Clone, PartialEq)]
pub struct CodistributionValues {
    pub s0: DVector<f64>,
    pub s: DMatrix<f64>,
    pub sdot: DMatrix<f64>,
}

impl CodistributionValues {
    /// `s^a(ξ) = s^a_0 + s^a_i v^i + ṡ^a_i ξ^i` for every form.
    pub fn contract(&self, v: &[f64], xi: &[f64]) -> DVector<f64> {
        let v = DVector::from_column_slice(v);
        let xi = DVector::from_column_slice(xi);
        &self.s0 + &self.s * v + &self.sdot * xi
    }

    /// `s^a_0 + s^a_i v^i`, the part independent of the acceleration.
    pub fn drift(&self, v: &[f64]) -> DVector<f64> {
        &self.s0 + &self.s * DVector::from_column_slice(v)
    }
}

/// Codistribution `S` spanned by `n ≤ m` forms.
#[derive(Debug, Clone)]
pub struct Codistribution {
    dim: usize,
    forms: Vec<ConstraintOneForm>,
    functions: Option<Vec<Ast>>,
    origin: ConstraintOrigin,
}

/// Rank of `ṡ^a_i` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdmissibilityReport {
    pub rank: usize,
    pub expected: usize,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.rank == self.expected
    }
}

impl Codistribution {
    /// Raw forms. No defining functions, so no drift monitor is available.
    pub fn from_forms(space: &ConfigurationSpace, forms: Vec<ConstraintOneForm>) -> Result<Self> {
        let m = space.dim();
        if forms.len() > m {
            return Err(Error::Shape(format!("{} forms exceed dimension {m}", forms.len())));
        }
        if forms.iter().any(|f| f.si.len() != m || f.sdoti.len() != m) {
            return Err(Error::Shape(format!("every form needs {m} dq and {m} dv coefficients")));
        }
        Ok(Self {
            dim: m,
            forms,
            functions: None,
            origin: ConstraintOrigin::Forms,
        })
    }

    /// Annihilator of the tangent bundle of `{f^a = 0}`: spanned by `df^a`.
    /// Fails where `∂f^a/∂v^j` loses rank at a probe.
    pub fn from_submanifold(space: &ConfigurationSpace, f: Vec<Ast>, probes: &[JetPoint]) -> Result<Self> {
        let m = space.dim();
        if f.len() > m {
            return Err(Error::Shape(format!("{} functions exceed dimension {m}", f.len())));
        }
        let forms = f.iter().map(|fa| ConstraintOneForm::differential(space, fa)).collect();
        let cod = Self {
            dim: m,
            forms,
            functions: Some(f),
            origin: ConstraintOrigin::Submanifold,
        };
        cod.require_admissible(probes)?;
        Ok(cod)
    }

    /// Linear constraint; admissible wherever `f^a_i` has full rank.
    pub fn from_linear(space: &ConfigurationSpace, spec: LinearConstraintSpec, probes: &[JetPoint]) -> Result<Self> {
        let m = space.dim();
        let n = spec.len();
        if n > m || spec.fi.len() != n || spec.fi.iter().any(|r| r.len() != m) {
            return Err(Error::Shape(format!("linear constraint must be n x {m} with n <= {m}")));
        }
        for e in spec.f0.iter().chain(spec.fi.iter().flatten()) {
            if !space.is_velocity_free(e) {
                return Err(Error::Rank(
                    "linear constraint coefficients must not depend on velocity".into(),
                ));
            }
        }
        for x in probes {
            let (_, fi) = spec.eval(x)?;
            let rank = linalg::numerical_rank(&fi, RANK_TOL);
            if rank != n {
                return Err(Error::Rank(format!("f^a_i has rank {rank} < {n} at {:?}", x.values())));
            }
        }
        let functions = spec.functions(space);
        let forms = functions
            .iter()
            .map(|fa| ConstraintOneForm::differential(space, fa))
            .collect();
        Ok(Self {
            dim: m,
            forms,
            functions: Some(functions),
            origin: ConstraintOrigin::Linear(spec),
        })
    }

    /// Constraint `q^a_t - B^a - σ^r_t B^a_r = 0` of a composite connection,
    /// with forms
    /// `s^a = -(∂_t B^a + σ^r_t ∂_t B^a_r) dt - (∂_λ B^a + σ^r_t ∂_λ B^a_r) dq^λ
    ///        + dq^a_t - B^a_r dσ^r_t`.
    pub fn from_composite(space: &ConfigurationSpace, spec: CompositeConstraintSpec) -> Result<Self> {
        spec.validate(space)?;
        let m = space.dim();
        // ∂_z B^a + σ^r_t ∂_z B^a_r, negated
        let coefficient = |a: usize, z: usize| -> Ast {
            let mut acc = spec.b[a].derivative(z);
            for (r, &sigma) in spec.base.iter().enumerate() {
                acc = ast_ops::add(
                    acc,
                    ast_ops::mul(Ast::Var(space.v_index(sigma)), spec.br[a][r].derivative(z)),
                );
            }
            ast_ops::neg(acc)
        };
        let mut forms = Vec::with_capacity(spec.fiber.len());
        let mut functions = Vec::with_capacity(spec.fiber.len());
        for (a, &fa) in spec.fiber.iter().enumerate() {
            let mut sdoti = vec![Ast::zero(); m];
            sdoti[fa] = Ast::Const(1.0);
            for (r, &sigma) in spec.base.iter().enumerate() {
                sdoti[sigma] = ast_ops::neg(spec.br[a][r].clone());
            }
            forms.push(ConstraintOneForm {
                s0: coefficient(a, space.t_index()),
                si: (0..m).map(|i| coefficient(a, space.q_index(i))).collect(),
                sdoti,
            });
            let mut f = ast_ops::sub(Ast::Var(space.v_index(fa)), spec.b[a].clone());
            for (r, &sigma) in spec.base.iter().enumerate() {
                f = ast_ops::sub(f, ast_ops::mul(Ast::Var(space.v_index(sigma)), spec.br[a][r].clone()));
            }
            functions.push(f);
        }
        Ok(Self {
            dim: m,
            forms,
            functions: Some(functions),
            origin: ConstraintOrigin::Composite(spec),
        })
    }

    /// The empty codistribution (no constraint).
    pub fn unconstrained(space: &ConfigurationSpace) -> Self {
        Self {
            dim: space.dim(),
            forms: Vec::new(),
            functions: None,
            origin: ConstraintOrigin::Forms,
        }
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn forms(&self) -> &[ConstraintOneForm] {
        &self.forms
    }

    pub fn origin(&self) -> &ConstraintOrigin {
        &self.origin
    }

    /// Linear constraints are admissible wherever their coefficient matrix has
    /// full rank, which was checked at construction.
    pub fn always_admissible(&self) -> bool {
        matches!(
            self.origin,
            ConstraintOrigin::Linear(_) | ConstraintOrigin::Composite(_)
        )
    }

    /// Defining functions, when the codistribution came from one.
    pub fn functions(&self) -> Option<&[Ast]> {
        self.functions.as_deref()
    }

    /// `|f^a(x)|` for each defining function.
    pub fn function_residuals(&self, x: &JetPoint) -> Result<Option<Vec<f64>>> {
        let Some(f) = &self.functions else {
            return Ok(None);
        };
        let values = x.values();
        Ok(Some(
            f.iter()
                .map(|fa| expr::eval(fa, &values).map(f64::abs).map_err(Error::from))
                .collect::<Result<_>>()?,
        ))
    }

    pub fn eval(&self, x: &JetPoint) -> Result<CodistributionValues> {
        let n = self.len();
        let m = self.dim;
        let mut out = CodistributionValues {
            s0: DVector::zeros(n),
            s: DMatrix::zeros(n, m),
            sdot: DMatrix::zeros(n, m),
        };
        for (a, form) in self.forms.iter().enumerate() {
            let v = form.eval(x)?;
            out.s0[a] = v.s0;
            for i in 0..m {
                out.s[(a, i)] = v.s[i];
                out.sdot[(a, i)] = v.sdot[i];
            }
        }
        Ok(out)
    }

    fn require_admissible(&self, probes: &[JetPoint]) -> Result<()> {
        for x in probes {
            let r = admissibility_report(self, x)?;
            if !r.passed() {
                return Err(Error::InadmissibleConstraint {
                    rank: r.rank,
                    expected: r.expected,
                    point: x.values(),
                    detail: None,
                });
            }
        }
        Ok(())
    }
}

/// Numerical rank of `ṡ^a_i(x)`; admissible iff it equals the number of forms.
pub fn admissibility_report(cod: &Codistribution, x: &JetPoint) -> Result<AdmissibilityReport> {
    let values = cod.eval(x)?;
    Ok(AdmissibilityReport {
        rank: linalg::numerical_rank(&values.sdot, RANK_TOL),
        expected: cod.len(),
    })
}

/// `s(ξ) = s_0 + s_i v^i + ṡ_i ξ^i`.
pub fn evaluate_form_on_dynamics(s: &ConstraintOneForm, x: &JetPoint, xi: &[f64]) -> Result<f64> {
    let f = s.eval(x)?;
    Ok(f.s0
        + f.s.iter().zip(&x.v).map(|(a, b)| a * b).sum::<f64>()
        + f.sdot.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>())
}

/// Frame check for a linear constraint: `max |f^a_0 + f^a_i Γ^i|`, plus the
/// pointwise minimum-norm solution of `f_i Γ^i = -f_0` as a diagnostic.
#[derive(Debug, Clone)]
pub struct FrameReport {
    pub check: CheckReport,
    pub min_norm_candidates: Vec<Vec<f64>>,
}

pub const FRAME_TOL: f64 = 1e-9;

pub fn verify_constraint_frame(
    spec: &LinearConstraintSpec,
    frame: &ReferenceFrame,
    points: &[JetPoint],
) -> Result<FrameReport> {
    let mut check = CheckReport::new("constraint_frame", FRAME_TOL);
    let mut min_norm_candidates = Vec::with_capacity(points.len());
    for x in points {
        let (f0, fi) = spec.eval(x)?;
        let gamma = DVector::from_vec(frame.eval(x)?);
        let r = &f0 + &fi * &gamma;
        check.record(r.amax(), || x.values());
        let gram = &fi * fi.transpose();
        let candidate = linalg::lu_solve(&gram, &(-&f0))
            .map(|y| (fi.transpose() * y).iter().copied().collect())
            .unwrap_or_default();
        min_norm_candidates.push(candidate);
    }
    Ok(FrameReport {
        check,
        min_norm_candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs(m: usize) -> ConfigurationSpace {
        ConfigurationSpace::new(m).unwrap()
    }

    fn pt(q: &[f64], v: &[f64]) -> JetPoint {
        JetPoint::new(0.5, q.to_vec(), v.to_vec())
    }

    fn consts(values: &FormValues) -> (f64, Vec<f64>, Vec<f64>) {
        (values.s0, values.s.clone(), values.sdot.clone())
    }

    #[test]
    fn submanifold_of_velocity_coordinate() {
        let s = cs(2);
        let x = pt(&[0.1, 0.2], &[0.3, 0.4]);
        let cod = Codistribution::from_submanifold(&s, s.parse_all(&["v2"]).unwrap(), &[x.clone()]).unwrap();
        assert_eq!(
            consts(&cod.forms()[0].eval(&x).unwrap()),
            (0.0, vec![0.0, 0.0], vec![0.0, 1.0])
        );
    }

    #[test]
    fn constant_speed_differential() {
        let s = cs(2);
        let x = pt(&[0.0, 0.0], &[0.6, 0.8]);
        let cod = Codistribution::from_submanifold(&s, s.parse_all(&["v1^2+v2^2-1"]).unwrap(), &[x.clone()]).unwrap();
        let f = cod.forms()[0].eval(&x).unwrap();
        assert!((f.sdot[0] - 1.2).abs() < 1e-15 && (f.sdot[1] - 1.6).abs() < 1e-15);
    }

    #[test]
    fn holonomic_function_is_inadmissible() {
        let s = cs(1);
        let x = pt(&[0.0], &[1.0]);
        assert!(matches!(
            Codistribution::from_submanifold(&s, s.parse_all(&["q1"]).unwrap(), &[x]),
            Err(Error::InadmissibleConstraint {
                rank: 0,
                expected: 1,
                ..
            })
        ));
    }

    #[test]
    fn knife_edge_linear_constraint() {
        let s = cs(3);
        let spec = LinearConstraintSpec::parse(&s, &["0"], &[vec!["sin(q3)", "-cos(q3)", "0"]]).unwrap();
        let x = pt(&[1.0, 2.0, 0.7], &[0.1, 0.2, 0.3]);
        let cod = Codistribution::from_linear(&s, spec, &[x.clone()]).unwrap();
        assert!(cod.always_admissible());
        let f = cod.forms()[0].eval(&x).unwrap();
        assert_eq!(f.sdot, vec![0.7f64.sin(), -0.7f64.cos(), 0.0]);
        assert_eq!(admissibility_report(&cod, &x).unwrap().rank, 1);
    }

    #[test]
    fn simple_linear_forms() {
        let s = cs(2);
        let spec = LinearConstraintSpec::parse(&s, &["0"], &[vec!["1", "-1"]]).unwrap();
        let x = pt(&[0.0, 0.0], &[1.0, 1.0]);
        let cod = Codistribution::from_linear(&s, spec, &[x.clone()]).unwrap();
        assert_eq!(
            consts(&cod.forms()[0].eval(&x).unwrap()),
            (0.0, vec![0.0, 0.0], vec![1.0, -1.0])
        );

        let square = LinearConstraintSpec::parse(&s, &["0", "0"], &[vec!["1", "0"], vec!["0", "1"]]).unwrap();
        let cod = Codistribution::from_linear(&s, square, &[x.clone()]).unwrap();
        assert!(admissibility_report(&cod, &x).unwrap().passed());

        let singular = LinearConstraintSpec::parse(&s, &["0", "0"], &[vec!["1", "1"], vec!["2", "2"]]).unwrap();
        assert!(matches!(
            Codistribution::from_linear(&s, singular, &[x]),
            Err(Error::Rank(_))
        ));
    }

    #[test]
    fn composite_examples() {
        let s = cs(2);
        let x = pt(&[0.3, -0.4], &[0.7, 1.1]);
        // trivial connection reduces to dq^a_t
        let trivial = CompositeConstraintSpec {
            base: vec![0],
            fiber: vec![1],
            b: vec![Ast::zero()],
            br: vec![vec![Ast::zero()]],
        };
        let cod = Codistribution::from_composite(&s, trivial).unwrap();
        assert_eq!(
            consts(&cod.forms()[0].eval(&x).unwrap()),
            (0.0, vec![0.0, 0.0], vec![0.0, 1.0])
        );

        let unit = CompositeConstraintSpec {
            base: vec![0],
            fiber: vec![1],
            b: vec![Ast::zero()],
            br: vec![vec![Ast::Const(1.0)]],
        };
        let cod = Codistribution::from_composite(&s, unit).unwrap();
        assert_eq!(
            consts(&cod.forms()[0].eval(&x).unwrap()),
            (0.0, vec![0.0, 0.0], vec![-1.0, 1.0])
        );

        let timed = CompositeConstraintSpec {
            base: vec![0],
            fiber: vec![1],
            b: vec![s.parse("t").unwrap()],
            br: vec![vec![Ast::zero()]],
        };
        let cod = Codistribution::from_composite(&s, timed).unwrap();
        let f = cod.forms()[0].eval(&x).unwrap();
        assert_eq!((f.s0, f.sdot[1]), (-1.0, 1.0));
    }

    #[test]
    fn composite_partition_errors() {
        let s = cs(3);
        let spec = |base: Vec<usize>, fiber: Vec<usize>| CompositeConstraintSpec {
            b: vec![Ast::zero(); fiber.len()],
            br: vec![vec![Ast::zero(); base.len()]; fiber.len()],
            base,
            fiber,
        };
        assert!(matches!(
            Codistribution::from_composite(&s, spec(vec![0], vec![1])),
            Err(Error::Partition(_))
        ));
        assert!(matches!(
            Codistribution::from_composite(&s, spec(vec![0, 1], vec![1, 2])),
            Err(Error::Partition(_))
        ));
        assert!(matches!(
            Codistribution::from_composite(&s, spec(vec![0, 1], vec![5])),
            Err(Error::Partition(_))
        ));
        assert!(Codistribution::from_composite(&s, spec(vec![0], vec![1, 2])).is_ok());
    }

    #[test]
    fn admissibility_cases() {
        let s = cs(2);
        let id = vec![
            ConstraintOneForm {
                s0: Ast::zero(),
                si: vec![Ast::zero(); 2],
                sdoti: vec![Ast::Const(1.0), Ast::zero()],
            },
            ConstraintOneForm {
                s0: Ast::zero(),
                si: vec![Ast::zero(); 2],
                sdoti: vec![Ast::zero(), Ast::Const(1.0)],
            },
        ];
        let x = pt(&[0.0, 0.0], &[0.0, 0.0]);
        let cod = Codistribution::from_forms(&s, id.clone()).unwrap();
        assert_eq!(admissibility_report(&cod, &x).unwrap().rank, 2);
        let dup = Codistribution::from_forms(&s, vec![id[0].clone(), id[0].clone()]).unwrap();
        let r = admissibility_report(&dup, &x).unwrap();
        assert_eq!((r.rank, r.passed()), (1, false));

        let speed = Codistribution::from_submanifold(&s, s.parse_all(&["v1^2+v2^2-1"]).unwrap(), &[]).unwrap();
        let r = admissibility_report(&speed, &x).unwrap();
        assert_eq!((r.rank, r.passed()), (0, false));
    }

    #[test]
    fn form_contractions() {
        let s = cs(2);
        let x = pt(&[0.0, 0.0], &[0.3, 0.0]);
        let dv2 = ConstraintOneForm::differential(&s, &s.parse("v2").unwrap());
        assert_eq!(evaluate_form_on_dynamics(&dv2, &x, &[0.0, -9.8]).unwrap(), -9.8);
        let unit = ConstraintOneForm {
            s0: Ast::Const(1.0),
            si: vec![Ast::zero(); 2],
            sdoti: vec![Ast::zero(); 2],
        };
        assert_eq!(evaluate_form_on_dynamics(&unit, &x, &[5.0, 7.0]).unwrap(), 1.0);
    }

    #[test]
    fn constraint_frames() {
        let s = cs(2);
        let pts: Vec<JetPoint> = (0..4)
            .map(|k| JetPoint::new(k as f64, vec![0.1, 0.2], vec![0.0, 0.0]))
            .collect();
        let equal = LinearConstraintSpec::parse(&s, &["0"], &[vec!["1", "-1"]]).unwrap();
        let frame = ReferenceFrame::parse(&s, &["2.5", "2.5"]).unwrap();
        assert!(verify_constraint_frame(&equal, &frame, &pts).unwrap().check.passed());

        let moving = LinearConstraintSpec::parse(&s, &["-t"], &[vec!["0", "1"]]).unwrap();
        let frame = ReferenceFrame::parse(&s, &["0", "t"]).unwrap();
        let rep = verify_constraint_frame(&moving, &frame, &pts).unwrap();
        assert!(rep.check.passed());
        assert_eq!(rep.min_norm_candidates[3], vec![0.0, 3.0]);

        let rest = ReferenceFrame::rest(&s);
        let rep = verify_constraint_frame(&moving, &rest, &pts).unwrap();
        assert!(!rep.check.passed());
        assert_eq!(rep.check.max_residual, 3.0);
    }

    #[test]
    fn linear_matches_submanifold() {
        let s = cs(3);
        let spec = LinearConstraintSpec::parse(&s, &["t*q1"], &[vec!["sin(q3)", "-cos(q3)", "q2"]]).unwrap();
        let f = spec.functions(&s);
        let x = pt(&[0.2, -0.3, 1.1], &[0.5, 0.1, -0.7]);
        let lin = Codistribution::from_linear(&s, spec, &[x.clone()]).unwrap();
        let sub = Codistribution::from_submanifold(&s, f, &[x.clone()]).unwrap();
        assert_eq!(lin.eval(&x).unwrap(), sub.eval(&x).unwrap());
    }
}
