use nalgebra::DMatrix;

use super::ast::{Ast, BinOp, Func};
use super::dual::{Dual, Scalar};
use super::ExprError;

/// Highest derivative order requested from [`eval_with_partials`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value = 0,
    Gradient = 1,
    Hessian = 2,
}

/// Value with optional gradient and Hessian over all variables of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialBundle {
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
    pub hessian: Option<DMatrix<f64>>,
}

impl PartialBundle {
    pub fn grad(&self) -> &[f64] {
        self.gradient.as_deref().expect("gradient not requested")
    }

    pub fn hess(&self) -> &DMatrix<f64> {
        self.hessian.as_ref().expect("hessian not requested")
    }
}

fn domain(msg: impl Into<String>) -> ExprError {
    ExprError::Domain(msg.into())
}

/// Evaluates `ast` over any [`Scalar`], checking domains on real parts.
pub fn eval_generic<S: Scalar>(ast: &Ast, vars: &[S]) -> Result<S, ExprError> {
    Ok(match ast {
        Ast::Const(c) => S::from_f64(*c),
        Ast::Var(i) => vars
            .get(*i)
            .cloned()
            .ok_or_else(|| domain(format!("variable index {i} out of range")))?,
        Ast::Neg(a) => -eval_generic(a, vars)?,
        Ast::Binary(op, a, b) => {
            if *op == BinOp::Pow {
                return pow(a, b, vars);
            }
            let x = eval_generic(a, vars)?;
            let y = eval_generic(b, vars)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y.real() == 0.0 {
                        return Err(domain("division by zero"));
                    }
                    x / y
                }
                BinOp::Pow => unreachable!(),
            }
        }
        Ast::Call(f, a) => {
            let x = eval_generic(a, vars)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => x.tan(),
                Func::Exp => x.exp(),
                Func::Log => {
                    if x.real() <= 0.0 {
                        return Err(domain(format!("log of nonpositive value {}", x.real())));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x.real() < 0.0 {
                        return Err(domain(format!("sqrt of negative value {}", x.real())));
                    }
                    x.sqrt()
                }
                Func::Abs => x.abs(),
            }
        }
    })
}

fn pow<S: Scalar>(base: &Ast, exponent: &Ast, vars: &[S]) -> Result<S, ExprError> {
    let x = eval_generic(base, vars)?;
    let constant = match exponent.max_var_index() {
        None => Some(eval_generic::<f64>(exponent, &[])?),
        Some(_) => None,
    };
    match constant {
        Some(c) => {
            if x.real() == 0.0 && c < 0.0 {
                return Err(domain("zero raised to a negative power"));
            }
            if x.real() < 0.0 && c.fract() != 0.0 {
                return Err(domain("negative base with non-integer exponent"));
            }
            Ok(x.powc(c))
        }
        None => {
            let y = eval_generic(exponent, vars)?;
            if x.real() == 0.0 && y.real() < 0.0 {
                return Err(domain("zero raised to a negative power"));
            }
            if x.real() <= 0.0 {
                return Err(domain("nonpositive base with variable exponent"));
            }
            Ok((y * x.ln()).exp())
        }
    }
}

/// Plain value of `ast`.
pub fn eval(ast: &Ast, values: &[f64]) -> Result<f64, ExprError> {
    let v = eval_generic(ast, values)?;
    finite(v)
}

fn finite(v: f64) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(format!("non-finite result {v}")))
    }
}

/// Value and exact partial derivatives up to `order`.
pub fn eval_with_partials(ast: &Ast, values: &[f64], order: Order) -> Result<PartialBundle, ExprError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(domain("non-finite input"));
    }
    let n = values.len();
    match order {
        Order::Value => Ok(PartialBundle {
            value: eval(ast, values)?,
            gradient: None,
            hessian: None,
        }),
        Order::Gradient => {
            let vars: Vec<Dual<f64>> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| Dual::variable(v, i, n))
                .collect();
            let r = eval_generic(ast, &vars)?;
            Ok(PartialBundle {
                value: finite(r.re)?,
                gradient: Some((0..n).map(|i| r.tangent(i)).collect()),
                hessian: None,
            })
        }
        Order::Hessian => {
            let vars: Vec<Dual<Dual<f64>>> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let mut eps = vec![Dual::constant(0.0); n];
                    eps[i] = Dual::constant(1.0);
                    Dual {
                        re: Dual::variable(v, i, n),
                        eps,
                    }
                })
                .collect();
            let r = eval_generic(ast, &vars)?;
            let gradient: Vec<f64> = (0..n).map(|i| r.re.tangent(i)).collect();
            let mut hessian = DMatrix::zeros(n, n);
            for j in 0..n {
                let row = r.tangent(j);
                for i in j..n {
                    let h = row.tangent(i);
                    hessian[(i, j)] = h;
                    hessian[(j, i)] = h;
                }
            }
            Ok(PartialBundle {
                value: finite(r.re.re)?,
                gradient: Some(gradient),
                hessian: Some(hessian),
            })
        }
    }
}

/// Central-difference first and second partials with absolute step `step`.
pub fn finite_difference_partials(ast: &Ast, values: &[f64], step: f64) -> Result<PartialBundle, ExprError> {
    if !(step > 0.0) {
        return Err(domain("finite-difference step must be positive"));
    }
    let n = values.len();
    let f0 = eval(ast, values)?;
    let at = |shifts: &[(usize, f64)]| -> Result<f64, ExprError> {
        let mut x = values.to_vec();
        for &(i, d) in shifts {
            x[i] += d;
        }
        eval(ast, &x)
    };
    let h = step;
    let mut gradient = vec![0.0; n];
    let mut hessian = DMatrix::zeros(n, n);
    for i in 0..n {
        let fp = at(&[(i, h)])?;
        let fm = at(&[(i, -h)])?;
        gradient[i] = (fp - fm) / (2.0 * h);
        hessian[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let fpp = at(&[(i, h), (j, h)])?;
            let fpm = at(&[(i, h), (j, -h)])?;
            let fmp = at(&[(i, -h), (j, h)])?;
            let fmm = at(&[(i, -h), (j, -h)])?;
            let d = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hessian[(i, j)] = d;
            hessian[(j, i)] = d;
        }
    }
    Ok(PartialBundle {
        value: f0,
        gradient: Some(gradient),
        hessian: Some(hessian),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, VariableSpace};

    fn space() -> VariableSpace {
        VariableSpace::jet(1, &[]).unwrap()
    }

    fn bundle(text: &str, x: [f64; 3], order: Order) -> PartialBundle {
        let s = space();
        eval_with_partials(&parse(text, &s).unwrap(), &x, order).unwrap()
    }

    #[test]
    fn polynomial_gradient() {
        let b = bundle("q1^2", [0.0, 3.0, 0.0], Order::Gradient);
        assert_eq!(b.value, 9.0);
        assert_eq!(b.grad()[1], 6.0);
        assert!(b.hessian.is_none());
    }

    #[test]
    fn bilinear_hessian() {
        let b = bundle("q1*v1", [0.0, 2.0, 3.0], Order::Hessian);
        let h = b.hess();
        assert_eq!(h[(1, 2)], 1.0);
        assert_eq!(h[(2, 1)], 1.0);
        assert_eq!(h[(1, 1)], 0.0);
        assert_eq!(h[(2, 2)], 0.0);
    }

    #[test]
    fn sine_at_origin() {
        let b = bundle("sin(q1)", [0.0; 3], Order::Hessian);
        assert_eq!(b.value, 0.0);
        assert_eq!(b.grad()[1], 1.0);
        assert_eq!(b.hess()[(1, 1)], 0.0);
    }

    #[test]
    fn value_order_omits_partials() {
        let b = bundle("t + 1", [1.0, 0.0, 0.0], Order::Value);
        assert_eq!(b.value, 2.0);
        assert!(b.gradient.is_none() && b.hessian.is_none());
    }

    #[test]
    fn domain_errors() {
        let s = space();
        let z = [0.0; 3];
        for text in ["log(q1)", "1/q1", "q1^-1", "sqrt(q1 - 1)", "(-1)^0.5", "(q1-1)^v1"] {
            let a = parse(text, &s).unwrap();
            assert!(
                matches!(eval_with_partials(&a, &z, Order::Hessian), Err(ExprError::Domain(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn negative_base_integer_power() {
        let b = bundle("q1^3", [0.0, -2.0, 0.0], Order::Hessian);
        assert_eq!(b.value, -8.0);
        assert_eq!(b.grad()[1], 12.0);
        assert_eq!(b.hess()[(1, 1)], -12.0);
    }

    #[test]
    fn finite_difference_quadratic() {
        let s = space();
        let a = parse("q1^2", &s).unwrap();
        let fd = finite_difference_partials(&a, &[0.0, 3.0, 0.0], 1e-5).unwrap();
        assert!((fd.grad()[1] - 6.0).abs() <= 1e-8);
        let c = parse("5", &s).unwrap();
        let fd = finite_difference_partials(&c, &[0.3, 3.0, -1.0], 1e-5).unwrap();
        assert!(fd.grad().iter().all(|&g| g == 0.0));
        assert!(fd.hess().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn variable_exponent() {
        // q1^v1 at (2, 3): d/dq1 = 3*4 = 12, d/dv1 = 8 ln 2
        let b = bundle("q1^v1", [0.0, 2.0, 3.0], Order::Gradient);
        assert!((b.value - 8.0).abs() < 1e-12);
        assert!((b.grad()[1] - 12.0).abs() < 1e-12);
        assert!((b.grad()[2] - 8.0 * 2f64.ln()).abs() < 1e-12);
    }
}
