use std::fmt;

use super::VariableSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Expression tree. Variable references are indices into the
/// [`VariableSpace`] the expression was parsed against.
#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Const(f64),
    Var(usize),
    Neg(Box<Ast>),
    Binary(BinOp, Box<Ast>, Box<Ast>),
    Call(Func, Box<Ast>),
}

impl Ast {
    pub fn zero() -> Ast {
        Ast::Const(0.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Ast::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    /// Number of interior (operator and function) nodes.
    pub fn operator_count(&self) -> usize {
        match self {
            Ast::Const(_) | Ast::Var(_) => 0,
            Ast::Neg(a) | Ast::Call(_, a) => 1 + a.operator_count(),
            Ast::Binary(_, a, b) => 1 + a.operator_count() + b.operator_count(),
        }
    }

    pub fn max_var_index(&self) -> Option<usize> {
        match self {
            Ast::Const(_) => None,
            Ast::Var(i) => Some(*i),
            Ast::Neg(a) | Ast::Call(_, a) => a.max_var_index(),
            Ast::Binary(_, a, b) => a.max_var_index().max(b.max_var_index()),
        }
    }

    pub fn references(&self, var: usize) -> bool {
        match self {
            Ast::Const(_) => false,
            Ast::Var(i) => *i == var,
            Ast::Neg(a) | Ast::Call(_, a) => a.references(var),
            Ast::Binary(_, a, b) => a.references(var) || b.references(var),
        }
    }

    /// Replaces every reference to `var` with the constant `value`.
    pub fn substitute(&self, var: usize, value: f64) -> Ast {
        self.replace_var(var, &Ast::Const(value))
    }

    /// Replaces every reference to `var` with `with`.
    pub fn replace_var(&self, var: usize, with: &Ast) -> Ast {
        match self {
            Ast::Var(i) if *i == var => with.clone(),
            Ast::Const(_) | Ast::Var(_) => self.clone(),
            Ast::Neg(a) => Ast::Neg(Box::new(a.replace_var(var, with))),
            Ast::Call(f, a) => Ast::Call(*f, Box::new(a.replace_var(var, with))),
            Ast::Binary(op, a, b) => Ast::Binary(
                *op,
                Box::new(a.replace_var(var, with)),
                Box::new(b.replace_var(var, with)),
            ),
        }
    }

    /// Renumbers variable references through `map`.
    pub fn remap_vars(&self, map: &impl Fn(usize) -> usize) -> Ast {
        match self {
            Ast::Var(i) => Ast::Var(map(*i)),
            Ast::Const(_) => self.clone(),
            Ast::Neg(a) => Ast::Neg(Box::new(a.remap_vars(map))),
            Ast::Call(f, a) => Ast::Call(*f, Box::new(a.remap_vars(map))),
            Ast::Binary(op, a, b) => Ast::Binary(*op, Box::new(a.remap_vars(map)), Box::new(b.remap_vars(map))),
        }
    }

    /// Symbolic partial derivative with respect to variable `var`.
    ///
    /// Only trivial folding of zeros, ones and constant subtrees is applied.
    pub fn derivative(&self, var: usize) -> Ast {
        match self {
            Ast::Const(_) => Ast::zero(),
            Ast::Var(i) => Ast::Const(if *i == var { 1.0 } else { 0.0 }),
            Ast::Neg(a) => neg(a.derivative(var)),
            Ast::Binary(op, a, b) => {
                let da = a.derivative(var);
                let db = b.derivative(var);
                let (a, b) = (a.as_ref().clone(), b.as_ref().clone());
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, b), mul(a, db)),
                    BinOp::Div => {
                        // (a' b - a b') / b^2
                        div(sub(mul(da, b.clone()), mul(a, db)), pow(b, Ast::Const(2.0)))
                    }
                    BinOp::Pow => match b
                        .max_var_index()
                        .map_or_else(|| super::eval::eval_generic::<f64>(&b, &[]).ok(), |_| None)
                    {
                        Some(c) => mul(mul(Ast::Const(c), pow(a, Ast::Const(c - 1.0))), da),
                        None => {
                            // a^b (b' ln a + b a'/a)
                            let ln_a = call(Func::Log, a.clone());
                            let inner = add(mul(db, ln_a), div(mul(b.clone(), da), a.clone()));
                            mul(pow(a, b), inner)
                        }
                    },
                }
            }
            Ast::Call(f, a) => {
                let da = a.derivative(var);
                if da.is_zero() {
                    return Ast::zero();
                }
                let a = a.as_ref().clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, a),
                    Func::Cos => neg(call(Func::Sin, a)),
                    Func::Tan => add(Ast::Const(1.0), pow(call(Func::Tan, a), Ast::Const(2.0))),
                    Func::Exp => call(Func::Exp, a),
                    Func::Log => div(Ast::Const(1.0), a),
                    Func::Sqrt => div(Ast::Const(0.5), call(Func::Sqrt, a)),
                    Func::Abs => div(a.clone(), call(Func::Abs, a)),
                };
                mul(outer, da)
            }
        }
    }

    pub fn display<'a>(&'a self, space: &'a VariableSpace) -> AstDisplay<'a> {
        AstDisplay { ast: self, space }
    }
}

/// Fully parenthesized rendering that reparses to an identical tree.
pub struct AstDisplay<'a> {
    ast: &'a Ast,
    space: &'a VariableSpace,
}

impl fmt::Display for AstDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |a| AstDisplay {
            ast: a,
            space: self.space,
        };
        match self.ast {
            Ast::Const(c) if *c < 0.0 => write!(f, "(-{:?})", -c),
            Ast::Const(c) => write!(f, "{c:?}"),
            Ast::Var(i) => f.write_str(self.space.name(*i)),
            Ast::Neg(a) => write!(f, "(-{})", sub(a)),
            Ast::Binary(op, a, b) => write!(f, "({} {} {})", sub(a), op.symbol(), sub(b)),
            Ast::Call(func, a) => write!(f, "{}({})", func.name(), sub(a)),
        }
    }
}

pub fn neg(a: Ast) -> Ast {
    match a {
        Ast::Const(c) => Ast::Const(-c),
        Ast::Neg(inner) => *inner,
        a => Ast::Neg(Box::new(a)),
    }
}

pub fn add(a: Ast, b: Ast) -> Ast {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Ast::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Ast::Binary(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Ast, b: Ast) -> Ast {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Ast::Const(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Ast::Binary(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Ast, b: Ast) -> Ast {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Ast::Const(x * y),
        (Some(x), _) if x == 0.0 => Ast::zero(),
        (_, Some(y)) if y == 0.0 => Ast::zero(),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        _ => Ast::Binary(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Ast, b: Ast) -> Ast {
    match (a.as_const(), b.as_const()) {
        (Some(x), _) if x == 0.0 => Ast::zero(),
        (_, Some(y)) if y == 1.0 => a,
        _ => Ast::Binary(BinOp::Div, Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Ast, b: Ast) -> Ast {
    match b.as_const() {
        Some(c) if c == 0.0 => Ast::Const(1.0),
        Some(c) if c == 1.0 => a,
        _ => Ast::Binary(BinOp::Pow, Box::new(a), Box::new(b)),
    }
}

pub fn call(f: Func, a: Ast) -> Ast {
    Ast::Call(f, Box::new(a))
}
