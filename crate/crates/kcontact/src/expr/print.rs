//! DSL printing. `parse(print(e))` is a fixed point for normalised
//! expressions.

use std::fmt;

use crate::chart::BundleChart;

use super::{Expr, Symbol};

/// Chart-aware display adapter; base coordinates print by name.
pub struct DisplayExpr<'a> {
    expr: &'a Expr,
    chart: &'a BundleChart,
}

impl Expr {
    pub fn display<'a>(&'a self, chart: &'a BundleChart) -> DisplayExpr<'a> {
        DisplayExpr { expr: self, chart }
    }

    pub fn to_dsl(&self, chart: &BundleChart) -> String {
        self.display(chart).to_string()
    }
}

fn fmt_num(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        write!(f, "{}", v as i64)
    } else {
        // 17 significant digits: enough for exact f64 round-trip.
        write!(f, "{v:.16e}")
    }
}

fn fmt_symbol(sym: &Symbol, chart: &BundleChart, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match sym {
        Symbol::Coord { i } => write!(f, "{}", chart.base_name(*i)),
        Symbol::Velocity { i, alpha } => {
            write!(f, "v[{},{}]", chart.base_name(*i), alpha + 1)
        }
        Symbol::Action { alpha } => write!(f, "s[{}]", alpha + 1),
        Symbol::JetFirst { i, alpha } => {
            write!(f, "a[{},{}]", chart.base_name(*i), alpha + 1)
        }
        Symbol::JetSecond { i, alpha, beta } => {
            write!(f, "w[{},{},{}]", chart.base_name(*i), alpha + 1, beta + 1)
        }
        Symbol::JetAction { beta, alpha } => write!(f, "r[{},{}]", beta + 1, alpha + 1),
        Symbol::Param(name) => write!(f, "{name}"),
    }
}

/// Splits a canonical term into (coefficient, non-numeric factors).
fn split_coeff(term: &Expr) -> (f64, Vec<&Expr>) {
    match term {
        Expr::Num(c) => (*c, Vec::new()),
        Expr::Mul(fs) => {
            let mut coeff = 1.0;
            let mut rest = Vec::new();
            for e in fs {
                if let Expr::Num(c) = e {
                    coeff *= c;
                } else {
                    rest.push(e);
                }
            }
            (coeff, rest)
        }
        other => (1.0, vec![other]),
    }
}

struct FactorFmt<'a> {
    expr: &'a Expr,
    chart: &'a BundleChart,
}

impl fmt::Display for FactorFmt<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expr::Num(v) => fmt_num(*v, f),
            Expr::Sym(s) => fmt_symbol(s, self.chart, f),
            Expr::Func(func, arg) => {
                write!(f, "{}(", func.name())?;
                write!(f, "{}", arg.display(self.chart))?;
                write!(f, ")")
            }
            Expr::Kernel(k, arg) => {
                write!(f, "{}", k.name)?;
                for _ in 0..k.order {
                    write!(f, "'")?;
                }
                write!(f, "({})", arg.display(self.chart))
            }
            Expr::Pow(base, n) => {
                match base.as_ref() {
                    Expr::Add(_) | Expr::Mul(_) => {
                        write!(
                            f,
                            "({})",
                            base.display(self.chart)
                        )?;
                    }
                    other => write!(
                        f,
                        "{}",
                        FactorFmt {
                            expr: other,
                            chart: self.chart
                        }
                    )?,
                }
                write!(f, "^{n}")
            }
            Expr::Add(_) | Expr::Mul(_) => {
                write!(f, "({})", self.expr.display(self.chart))
            }
        }
    }
}

fn fmt_term(
    coeff: f64,
    factors: &[&Expr],
    chart: &BundleChart,
    leading: bool,
    f: &mut fmt::Formatter<'_>,
) -> fmt::Result {
    let mag = coeff.abs();
    if !leading {
        f.write_str(if coeff < 0.0 { " - " } else { " + " })?;
    } else if coeff < 0.0 {
        f.write_str("-")?;
    }
    // `-x^2` would reparse as `(-x)^2`; keep an explicit coefficient in
    // front of a leading power so the minus stays on the number.
    let minus_before_pow =
        leading && coeff < 0.0 && matches!(factors.first(), Some(Expr::Pow(_, _)));
    let mut need_star = false;
    if mag != 1.0 || factors.is_empty() || minus_before_pow {
        fmt_num(mag, f)?;
        need_star = true;
    }
    for factor in factors {
        if need_star {
            write!(f, "*")?;
        }
        write!(f, "{}", FactorFmt { expr: factor, chart })?;
        need_star = true;
    }
    Ok(())
}

impl fmt::Display for DisplayExpr<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expr::Add(terms) => {
                for (idx, term) in terms.iter().enumerate() {
                    let (coeff, factors) = split_coeff(term);
                    fmt_term(coeff, &factors, self.chart, idx == 0, f)?;
                }
                Ok(())
            }
            other => {
                let (coeff, factors) = split_coeff(other);
                fmt_term(coeff, &factors, self.chart, true, f)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::chart::BundleChart;
    use crate::expr::parse;

    #[test]
    fn parse_print_parse_is_a_fixed_point() {
        let chart = BundleChart::with_params(
            1,
            2,
            &["q"],
            &[("rho", 1.0), ("tau", 1.0), ("gamma", 0.1)],
        );
        let inputs = [
            "(rho/2)*v[q,1]^2 - (tau/2)*v[q,2]^2 - gamma*s[1]",
            "0",
            "-q^2 + 3*q - 1",
            "sin(q)^2 + cos(q)^2 - 1",
            "1/(q + 1)",
            "w[q,1,1]*rho - w[q,2,2]*tau + a[q,1]*gamma*rho",
            "r[1,1] + r[2,2]",
            "0.125*q - 1e-3",
        ];
        for text in inputs {
            let e = parse(text, &chart).unwrap();
            let printed = e.to_dsl(&chart);
            let reparsed = parse(&printed, &chart)
                .unwrap_or_else(|err| panic!("reparse of `{printed}` failed: {err}"));
            assert_eq!(e, reparsed, "round trip of `{text}` via `{printed}`");
        }
    }

    #[test]
    fn canonical_residual_print_matches_expected_layout() {
        let chart = BundleChart::with_params(
            1,
            2,
            &["q"],
            &[("rho", 1.0), ("tau", 1.0), ("gamma", 0.1)],
        );
        let e = parse(
            "rho*w[q,1,1] - tau*w[q,2,2] + rho*gamma*a[q,1]",
            &chart,
        )
        .unwrap();
        assert_eq!(
            e.to_dsl(&chart),
            "w[q,1,1]*rho - w[q,2,2]*tau + a[q,1]*gamma*rho"
        );
    }
}
