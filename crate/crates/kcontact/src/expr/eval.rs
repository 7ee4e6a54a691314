//! Numeric evaluation of expressions at a point.

use std::collections::BTreeMap;

use crate::chart::BundleChart;

use super::{Expr, Func, Symbol};

/// Total map from symbols to double-precision values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Point(pub BTreeMap<Symbol, f64>);

impl Point {
    pub fn new() -> Point {
        Point(BTreeMap::new())
    }

    pub fn set(&mut self, sym: Symbol, value: f64) -> &mut Self {
        self.0.insert(sym, value);
        self
    }

    pub fn get(&self, sym: &Symbol) -> Option<f64> {
        self.0.get(sym).copied()
    }

    /// Binds every declared parameter of the chart to its default value.
    pub fn with_chart_defaults(chart: &BundleChart) -> Point {
        let mut p = Point::new();
        for decl in chart.params() {
            if let Some(v) = decl.default {
                p.set(Symbol::Param(decl.name.clone()), v);
            }
        }
        p
    }
}

impl FromIterator<(Symbol, f64)> for Point {
    fn from_iter<T: IntoIterator<Item = (Symbol, f64)>>(iter: T) -> Self {
        Point(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("no binding for symbol {0:?}")]
    MissingBinding(Symbol),
    #[error("domain error evaluating {op}({arg})")]
    Domain { op: &'static str, arg: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("no sample implementation for kernel `{0}`")]
    MissingKernel(String),
    #[error("kernel `{name}` has no sample implementation for derivative order {order}")]
    MissingKernelOrder { name: String, order: u32 },
}

impl Expr {
    /// IEEE double evaluation, bottom-up. Kernel samples are looked up in
    /// the chart's declarations.
    pub fn evaluate(&self, point: &Point, chart: &BundleChart) -> Result<f64, EvalError> {
        match self {
            Expr::Num(c) => Ok(*c),
            Expr::Sym(s) => point
                .get(s)
                .ok_or_else(|| EvalError::MissingBinding(s.clone())),
            Expr::Add(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.evaluate(point, chart)?;
                }
                Ok(acc)
            }
            Expr::Mul(factors) => {
                let mut acc = 1.0;
                for f in factors {
                    acc *= f.evaluate(point, chart)?;
                }
                Ok(acc)
            }
            Expr::Pow(base, n) => {
                let b = base.evaluate(point, chart)?;
                if *n < 0 && b == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                Ok(b.powi(*n as i32))
            }
            Expr::Func(f, arg) => {
                let a = arg.evaluate(point, chart)?;
                match f {
                    Func::Sin => Ok(a.sin()),
                    Func::Cos => Ok(a.cos()),
                    Func::Exp => Ok(a.exp()),
                    Func::Log => {
                        if a <= 0.0 {
                            Err(EvalError::Domain { op: "log", arg: a })
                        } else {
                            Ok(a.ln())
                        }
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            Err(EvalError::Domain { op: "sqrt", arg: a })
                        } else {
                            Ok(a.sqrt())
                        }
                    }
                }
            }
            Expr::Kernel(k, arg) => {
                let a = arg.evaluate(point, chart)?;
                let imp = chart
                    .kernel(&k.name)
                    .ok_or_else(|| EvalError::MissingKernel(k.name.clone()))?;
                imp.eval(k.order, a)
            }
        }
    }
}
