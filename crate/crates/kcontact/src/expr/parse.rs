//! Recursive-descent parser for the expression DSL.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' integer)?
//! base   := number | ident | ident '\''* '(' expr ')'
//!         | 'v[' ident ',' integer ']' | 's[' integer ']'
//!         | 'a[' ident ',' integer ']' | 'w[' ident ',' integer ',' integer ']'
//!         | 'r[' integer ',' integer ']' | '(' expr ')' | '-' base
//! ```
//!
//! Indices are 1-based in the DSL. Identifiers must be declared in the
//! chart (base coordinates, parameters or kernels).

use crate::chart::BundleChart;

use super::{Expr, Func, Symbol};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undeclared identifier `{name}`")]
    Undeclared { line: usize, col: usize, name: String },
    #[error("{line}:{col}: index out of range: {msg}")]
    IndexOutOfRange { line: usize, col: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Prime,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut push = |tok: Tok| {
            out.push(Spanned { tok, line: tl, col: tc });
        };
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            ' ' | '\t' | '\r' => {}
            '+' => push(Tok::Plus),
            '-' => push(Tok::Minus),
            '*' => push(Tok::Star),
            '/' => push(Tok::Slash),
            '^' => push(Tok::Caret),
            '(' => push(Tok::LParen),
            ')' => push(Tok::RParen),
            '[' => push(Tok::LBracket),
            ']' => push(Tok::RBracket),
            ',' => push(Tok::Comma),
            '\'' => push(Tok::Prime),
            _ if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v: f64 = s.parse().map_err(|_| ParseError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("bad number literal `{s}`"),
                })?;
                out.push(Spanned { tok: Tok::Num(v), line: tl, col: tc });
                col += i - start;
                continue;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                out.push(Spanned { tok: Tok::Ident(s), line: tl, col: tc });
                col += i - start;
                continue;
            }
            _ => {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
        i += 1;
        col += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    chart: &'a BundleChart,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1))
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError::Syntax { line, col, msg: msg.into() })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.syntax(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let t = self.term()?;
                    terms.push(Expr::Mul(vec![Expr::Num(-1.0), t]));
                }
                _ => break,
            }
        }
        Ok(Expr::Add(terms))
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.factor()?];
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    factors.push(self.factor()?);
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let f = self.factor()?;
                    factors.push(Expr::Pow(Box::new(f), -1));
                }
                _ => break,
            }
        }
        Ok(Expr::Mul(factors))
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exp = self.integer("exponent")?;
            Ok(Expr::Pow(Box::new(base), exp))
        } else {
            Ok(base)
        }
    }

    fn integer(&mut self, what: &str) -> Result<i64, ParseError> {
        let neg = if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            true
        } else {
            false
        };
        match self.bump() {
            Some(Tok::Num(v)) if v.fract() == 0.0 => {
                let n = v as i64;
                Ok(if neg { -n } else { n })
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                self.syntax(format!("expected integer {what}"))
            }
        }
    }

    /// 1-based DSL index to 0-based, range-checked.
    fn index(&mut self, what: &str, max: usize) -> Result<usize, ParseError> {
        let (line, col) = self.here();
        let n = self.integer(what)?;
        if n < 1 || n as usize > max {
            return Err(ParseError::IndexOutOfRange {
                line,
                col,
                msg: format!("{what} {n} not in 1..={max}"),
            });
        }
        Ok(n as usize - 1)
    }

    fn coord_index(&mut self) -> Result<usize, ParseError> {
        let (line, col) = self.here();
        match self.bump() {
            Some(Tok::Ident(name)) => self.chart.base_index(&name).ok_or(ParseError::Undeclared {
                line,
                col,
                name,
            }),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                self.syntax("expected base coordinate name")
            }
        }
    }

    fn bracketed_symbol(&mut self, head: &str) -> Result<Expr, ParseError> {
        self.expect(Tok::LBracket, "`[`")?;
        let k = self.chart.k();
        let sym = match head {
            "v" | "a" => {
                let i = self.coord_index()?;
                self.expect(Tok::Comma, "`,`")?;
                let alpha = self.index("direction index", k)?;
                if head == "v" {
                    Symbol::Velocity { i, alpha }
                } else {
                    Symbol::JetFirst { i, alpha }
                }
            }
            "w" => {
                let i = self.coord_index()?;
                self.expect(Tok::Comma, "`,`")?;
                let alpha = self.index("direction index", k)?;
                self.expect(Tok::Comma, "`,`")?;
                let beta = self.index("direction index", k)?;
                Symbol::jet_second(i, alpha, beta)
            }
            "s" => {
                let alpha = self.index("action index", k)?;
                Symbol::Action { alpha }
            }
            "r" => {
                let beta = self.index("action index", k)?;
                self.expect(Tok::Comma, "`,`")?;
                let alpha = self.index("direction index", k)?;
                Symbol::JetAction { beta, alpha }
            }
            _ => unreachable!(),
        };
        self.expect(Tok::RBracket, "`]`")?;
        Ok(Expr::Sym(sym))
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let (line, col) = self.here();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::Minus) => {
                let b = self.base()?;
                Ok(Expr::Mul(vec![Expr::Num(-1.0), b]))
            }
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                // jet/velocity/action shorthands only when followed by `[`
                if matches!(name.as_str(), "v" | "s" | "a" | "w" | "r")
                    && self.peek() == Some(&Tok::LBracket)
                {
                    return self.bracketed_symbol(&name);
                }
                let mut order = 0u32;
                while self.peek() == Some(&Tok::Prime) {
                    self.pos += 1;
                    order += 1;
                }
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    if let Some(f) = Func::from_name(&name) {
                        if order > 0 {
                            return Err(ParseError::Syntax {
                                line,
                                col,
                                msg: format!("`{name}` does not take derivative primes"),
                            });
                        }
                        return Ok(Expr::Func(f, Box::new(arg)));
                    }
                    if self.chart.kernel(&name).is_some() {
                        return Ok(Expr::Kernel(
                            super::Kernel { name, order },
                            Box::new(arg),
                        ));
                    }
                    return Err(ParseError::Undeclared { line, col, name });
                }
                if order > 0 {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        msg: "derivative primes require a function application".into(),
                    });
                }
                if let Some(i) = self.chart.base_index(&name) {
                    return Ok(Expr::Sym(Symbol::Coord { i }));
                }
                if self.chart.param(&name).is_some() {
                    return Ok(Expr::Sym(Symbol::Param(name)));
                }
                Err(ParseError::Undeclared { line, col, name })
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                self.syntax("expected expression")
            }
        }
    }
}

/// Parses DSL text against a chart and returns the normalised expression.
pub fn parse(text: &str, chart: &BundleChart) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, chart };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.syntax("trailing input");
    }
    Ok(e.normalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{BundleChart, KernelImpl};
    use std::sync::Arc;

    fn string_chart() -> Arc<BundleChart> {
        BundleChart::with_params(
            1,
            2,
            &["q"],
            &[("rho", 1.0), ("tau", 1.0), ("gamma", 0.1)],
        )
    }

    #[test]
    fn parses_the_damped_string_lagrangian() {
        let chart = string_chart();
        let e = parse(
            "(rho/2)*v[q,1]^2 - (tau/2)*v[q,2]^2 - gamma*s[1]",
            &chart,
        )
        .unwrap();
        let built = Expr::add(vec![
            Expr::mul(vec![
                Expr::Num(0.5),
                Expr::sym(Symbol::param("rho")),
                Expr::pow(Expr::sym(Symbol::Velocity { i: 0, alpha: 0 }), 2),
            ]),
            Expr::mul(vec![
                Expr::Num(-0.5),
                Expr::sym(Symbol::param("tau")),
                Expr::pow(Expr::sym(Symbol::Velocity { i: 0, alpha: 1 }), 2),
            ]),
            Expr::mul(vec![
                Expr::Num(-1.0),
                Expr::sym(Symbol::param("gamma")),
                Expr::sym(Symbol::Action { alpha: 0 }),
            ]),
        ]);
        assert_eq!(e, built);
    }

    #[test]
    fn zero_literal() {
        let chart = string_chart();
        assert_eq!(parse("0", &chart).unwrap(), Expr::Num(0.0));
    }

    #[test]
    fn product_normalises_to_power() {
        let chart = string_chart();
        assert_eq!(
            parse("v[q,1]*v[q,1]", &chart).unwrap(),
            parse("v[q,1]^2", &chart).unwrap()
        );
    }

    #[test]
    fn undeclared_identifier_is_rejected() {
        let chart = string_chart();
        assert!(matches!(
            parse("sigma*q", &chart),
            Err(ParseError::Undeclared { .. })
        ));
    }

    #[test]
    fn index_out_of_range_is_rejected() {
        let chart = string_chart();
        assert!(matches!(
            parse("v[q,3]", &chart),
            Err(ParseError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            parse("s[0]", &chart),
            Err(ParseError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn syntax_error_carries_position() {
        let chart = string_chart();
        match parse("q + ", &chart) {
            Err(ParseError::Syntax { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn kernel_application_and_primes() {
        let mut raw = BundleChart::new(
            2,
            2,
            vec!["q1".into(), "q2".into()],
            vec![],
        )
        .unwrap();
        raw.declare_kernel(KernelImpl {
            name: "C".into(),
            fns: vec![Arc::new(|z| 0.5 * z * z), Arc::new(|z| z)],
            ratio_limit_at_zero: Some(1.0),
        });
        let chart = Arc::new(raw);
        let e = parse("C'(sqrt(q1^2 + q2^2))", &chart).unwrap();
        match e {
            Expr::Kernel(k, _) => {
                assert_eq!(k.name, "C");
                assert_eq!(k.order, 1);
            }
            other => panic!("expected kernel, got {other:?}"),
        }
    }
}
