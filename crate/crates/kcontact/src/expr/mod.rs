//! Immutable symbolic expression trees.
//!
//! An [`Expr`] is a finite tree of constants, [`Symbol`]s, sums, products,
//! integer powers, a fixed set of unary functions and opaque unary kernels.
//! Expressions normalise to a deterministic canonical form (expanded
//! multivariate Laurent polynomial over "atoms": symbols, function
//! applications and inverted sums), which makes structural equality
//! meaningful and powers the exact zero test.

mod eval;
mod nf;
mod parse;
mod print;
mod zero;

pub use eval::{EvalError, Point};
pub use parse::{parse, ParseError};
pub use print::DisplayExpr;
pub use zero::{ZeroConfig, ZeroVerdict, DEFAULT_SEED};

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::collections::BTreeSet;

/// A coordinate, jet value or parameter symbol. Indices are 0-based
/// internally; the DSL uses 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// Base coordinate `q^i`.
    Coord { i: usize },
    /// Velocity `v^i_a`.
    Velocity { i: usize, alpha: usize },
    /// Action coordinate `s^a`.
    Action { alpha: usize },
    /// Second jet value `w^i_{ab}`; stored with `alpha <= beta`. Declared
    /// before the first jets so that second-order terms lead in the
    /// canonical ordering of residual prints.
    JetSecond { i: usize, alpha: usize, beta: usize },
    /// First jet value `a^i_a` (partial of the field along `t^a`).
    JetFirst { i: usize, alpha: usize },
    /// Jet of the action field `r^b_a` (partial of `s^b` along `t^a`).
    JetAction { beta: usize, alpha: usize },
    /// Named parameter.
    Param(String),
}

impl Symbol {
    /// Canonicalises `w^i_{ab}` to `alpha <= beta`.
    pub fn jet_second(i: usize, alpha: usize, beta: usize) -> Symbol {
        Symbol::JetSecond {
            i,
            alpha: alpha.min(beta),
            beta: alpha.max(beta),
        }
    }

    pub fn param(name: &str) -> Symbol {
        Symbol::Param(name.to_string())
    }
}

/// The supported unary function heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => None?,
        })
    }
}

/// An opaque unary kernel of a given derivative order. Differentiating
/// `C(z)` produces the fresh kernel `C'(z)` (order 1), and so on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Kernel {
    pub name: String,
    pub order: u32,
}

/// A symbolic scalar expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Sym(Symbol),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, i64),
    Func(Func, Box<Expr>),
    Kernel(Kernel, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn sym(s: Symbol) -> Expr {
        Expr::Sym(s)
    }

    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    pub fn one() -> Expr {
        Expr::Num(1.0)
    }

    pub fn add(terms: Vec<Expr>) -> Expr {
        Expr::Add(terms).normalize()
    }

    pub fn mul(factors: Vec<Expr>) -> Expr {
        Expr::Mul(factors).normalize()
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(vec![a, Expr::Mul(vec![Expr::Num(-1.0), b])])
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::mul(vec![Expr::Num(-1.0), a])
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::mul(vec![a, Expr::Pow(Box::new(b), -1)])
    }

    pub fn pow(base: Expr, exp: i64) -> Expr {
        Expr::Pow(Box::new(base), exp).normalize()
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        Expr::Func(f, Box::new(arg)).normalize()
    }

    pub fn kernel(name: &str, order: u32, arg: Expr) -> Expr {
        Expr::Kernel(
            Kernel {
                name: name.to_string(),
                order,
            },
            Box::new(arg),
        )
        .normalize()
    }

    pub fn is_num_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    /// Deterministic canonical form; idempotent.
    pub fn normalize(&self) -> Expr {
        nf::normalize(self)
    }

    /// Exact partial derivative with respect to `x`, normalised. All other
    /// symbols are treated as independent.
    pub fn differentiate(&self, x: &Symbol) -> Expr {
        self.diff_raw(x).normalize()
    }

    fn diff_raw(&self, x: &Symbol) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Sym(s) => Expr::Num(if s == x { 1.0 } else { 0.0 }),
            Expr::Add(terms) => Expr::Add(terms.iter().map(|t| t.diff_raw(x)).collect()),
            Expr::Mul(factors) => {
                let mut terms = Vec::with_capacity(factors.len());
                for (i, f) in factors.iter().enumerate() {
                    let mut prod = vec![f.diff_raw(x)];
                    for (j, g) in factors.iter().enumerate() {
                        if i != j {
                            prod.push(g.clone());
                        }
                    }
                    terms.push(Expr::Mul(prod));
                }
                Expr::Add(terms)
            }
            Expr::Pow(base, n) => {
                if *n == 0 {
                    Expr::Num(0.0)
                } else {
                    Expr::Mul(vec![
                        Expr::Num(*n as f64),
                        Expr::Pow(base.clone(), n - 1),
                        base.diff_raw(x),
                    ])
                }
            }
            Expr::Func(f, arg) => {
                let da = arg.diff_raw(x);
                let outer = match f {
                    Func::Sin => Expr::Func(Func::Cos, arg.clone()),
                    Func::Cos => {
                        Expr::Mul(vec![Expr::Num(-1.0), Expr::Func(Func::Sin, arg.clone())])
                    }
                    Func::Exp => Expr::Func(Func::Exp, arg.clone()),
                    Func::Log => Expr::Pow(arg.clone(), -1),
                    Func::Sqrt => Expr::Mul(vec![
                        Expr::Num(0.5),
                        Expr::Pow(Box::new(Expr::Func(Func::Sqrt, arg.clone())), -1),
                    ]),
                };
                Expr::Mul(vec![outer, da])
            }
            Expr::Kernel(k, arg) => {
                let da = arg.diff_raw(x);
                Expr::Mul(vec![
                    Expr::Kernel(
                        Kernel {
                            name: k.name.clone(),
                            order: k.order + 1,
                        },
                        arg.clone(),
                    ),
                    da,
                ])
            }
        }
    }

    /// Replaces symbols by expressions and renormalises.
    pub fn substitute(&self, map: &BTreeMap<Symbol, Expr>) -> Expr {
        self.subst_raw(map).normalize()
    }

    fn subst_raw(&self, map: &BTreeMap<Symbol, Expr>) -> Expr {
        match self {
            Expr::Num(_) => self.clone(),
            Expr::Sym(s) => map.get(s).cloned().unwrap_or_else(|| self.clone()),
            Expr::Add(ts) => Expr::Add(ts.iter().map(|t| t.subst_raw(map)).collect()),
            Expr::Mul(fs) => Expr::Mul(fs.iter().map(|t| t.subst_raw(map)).collect()),
            Expr::Pow(b, n) => Expr::Pow(Box::new(b.subst_raw(map)), *n),
            Expr::Func(f, a) => Expr::Func(*f, Box::new(a.subst_raw(map))),
            Expr::Kernel(k, a) => Expr::Kernel(k.clone(), Box::new(a.subst_raw(map))),
        }
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            Expr::Num(_) => {}
            Expr::Sym(s) => {
                out.insert(s.clone());
            }
            Expr::Add(ts) | Expr::Mul(ts) => {
                for t in ts {
                    t.collect_symbols(out);
                }
            }
            Expr::Pow(b, _) => b.collect_symbols(out),
            Expr::Func(_, a) | Expr::Kernel(_, a) => a.collect_symbols(out),
        }
    }

    /// True when the tree contains a function or kernel node, which blocks
    /// the exact zero test.
    pub fn has_opaque(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Sym(_) => false,
            Expr::Add(ts) | Expr::Mul(ts) => ts.iter().any(Expr::has_opaque),
            Expr::Pow(b, _) => b.has_opaque(),
            Expr::Func(_, _) | Expr::Kernel(_, _) => true,
        }
    }
}

/// Total order on expressions used for canonical sorting. Numbers compare
/// by `total_cmp`; distinct variants compare by rank.
pub(crate) fn cmp_expr(a: &Expr, b: &Expr) -> Ordering {
    fn rank(e: &Expr) -> u8 {
        match e {
            Expr::Num(_) => 0,
            Expr::Sym(_) => 1,
            Expr::Func(_, _) => 2,
            Expr::Kernel(_, _) => 3,
            Expr::Pow(_, _) => 4,
            Expr::Mul(_) => 5,
            Expr::Add(_) => 6,
        }
    }
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => x.total_cmp(y),
        (Expr::Sym(x), Expr::Sym(y)) => x.cmp(y),
        (Expr::Func(f, x), Expr::Func(g, y)) => f.cmp(g).then_with(|| cmp_expr(x, y)),
        (Expr::Kernel(f, x), Expr::Kernel(g, y)) => f.cmp(g).then_with(|| cmp_expr(x, y)),
        (Expr::Pow(x, n), Expr::Pow(y, m)) => cmp_expr(x, y).then_with(|| n.cmp(m)),
        (Expr::Mul(xs), Expr::Mul(ys)) | (Expr::Add(xs), Expr::Add(ys)) => {
            for (x, y) in xs.iter().zip(ys.iter()) {
                let c = cmp_expr(x, y);
                if c != Ordering::Equal {
                    return c;
                }
            }
            xs.len().cmp(&ys.len())
        }
        _ => rank(a).cmp(&rank(b)),
    }
}
