//! Canonical normal form: expanded sums of terms `coeff * prod(base^exp)`.
//!
//! Bases are atoms (symbols, function or kernel applications with canonical
//! arguments) or canonical sums raised to negative powers. Products of sums
//! distribute fully; positive integer powers of sums expand. The resulting
//! form is deterministic, so structural equality of normal forms is a sound
//! congruence for the rest of the crate.
//!
//! Every term carries the accumulated magnitude of its contributions, so a
//! coefficient that survives only through floating-point non-associativity
//! (say `1e-17` left over from `(a·b)·c − a·(b·c)`) is recognised as a
//! cancellation artefact and pruned relative to that magnitude.

use std::cmp::Ordering;

use super::{cmp_expr, Expr, Func};

/// Relative threshold below which a coefficient produced by cancellation is
/// treated as exactly zero. Pipelines that normalize intermediate results
/// freeze coefficients and lose the magnitude of what cancelled before, so
/// the threshold is deliberately generous compared to machine epsilon.
const CANCEL_EPS: f64 = 1e-10;

/// Sorted list of `(base, exponent)` pairs, exponents nonzero.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Monomial(pub Vec<(Expr, i64)>);

impl Monomial {
    fn one() -> Monomial {
        Monomial(Vec::new())
    }

    fn single(base: Expr, exp: i64) -> Monomial {
        if exp == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(base, exp)])
        }
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out: Vec<(Expr, i64)> = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match cmp_expr(&self.0[i].0, &other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let exp = self.0[i].1 + other.0[j].1;
                    if exp != 0 {
                        out.push((self.0[i].0.clone(), exp));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    fn pow(&self, n: i64) -> Monomial {
        if n == 0 {
            return Monomial::one();
        }
        Monomial(self.0.iter().map(|(b, e)| (b.clone(), e * n)).collect())
    }
}

pub(crate) fn cmp_monomial(a: &Monomial, b: &Monomial) -> Ordering {
    for ((ba, ea), (bb, eb)) in a.0.iter().zip(b.0.iter()) {
        let c = cmp_expr(ba, bb);
        if c != Ordering::Equal {
            return c;
        }
        let c = ea.cmp(eb);
        if c != Ordering::Equal {
            return c;
        }
    }
    a.0.len().cmp(&b.0.len())
}

/// One normal-form term: `coeff · mono`, with the total magnitude of the
/// contributions that were summed into `coeff`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Term {
    pub mono: Monomial,
    pub coeff: f64,
    pub mag: f64,
}

/// A normal form: sorted terms, no exactly-zero coefficients.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Nf(pub Vec<Term>);

impl Nf {
    pub(crate) fn zero() -> Nf {
        Nf(Vec::new())
    }

    pub(crate) fn constant(c: f64) -> Nf {
        if c == 0.0 {
            Nf::zero()
        } else {
            Nf(vec![Term {
                mono: Monomial::one(),
                coeff: c,
                mag: c.abs(),
            }])
        }
    }

    fn single(base: Expr, exp: i64, coeff: f64) -> Nf {
        if coeff == 0.0 {
            Nf::zero()
        } else {
            Nf(vec![Term {
                mono: Monomial::single(base, exp),
                coeff,
                mag: coeff.abs(),
            }])
        }
    }

    pub(crate) fn add_term(&mut self, mono: Monomial, coeff: f64, mag: f64) {
        if coeff == 0.0 && mag == 0.0 {
            return;
        }
        match self.0.binary_search_by(|t| cmp_monomial(&t.mono, &mono)) {
            Ok(idx) => {
                // An exact cancellation keeps a zero-coefficient term so the
                // accumulated magnitude is still there to absorb round-off
                // residue from later contributions; `prune` drops it.
                self.0[idx].coeff += coeff;
                self.0[idx].mag += mag;
            }
            Err(idx) => {
                self.0.insert(idx, Term { mono, coeff, mag });
            }
        }
    }

    /// Drops coefficients that are negligible next to the magnitude that
    /// flowed through them: cancellation residue from float round-off.
    pub(crate) fn prune(mut self) -> Nf {
        self.0
            .retain(|t| t.coeff.abs() > CANCEL_EPS * t.mag);
        self
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn add(&self, other: &Nf) -> Nf {
        let mut out = self.clone();
        for t in &other.0 {
            out.add_term(t.mono.clone(), t.coeff, t.mag);
        }
        out
    }

    pub(crate) fn mul(&self, other: &Nf) -> Nf {
        let mut out = Nf::zero();
        for a in &self.0 {
            for b in &other.0 {
                out.add_term(a.mono.mul(&b.mono), a.coeff * b.coeff, a.mag * b.mag);
            }
        }
        out
    }

    pub(crate) fn pow(&self, n: i64) -> Nf {
        if n == 0 {
            return Nf::constant(1.0);
        }
        let p = self.clone().prune();
        if p.0.len() == 1 {
            let t = &p.0[0];
            return Nf(vec![Term {
                mono: t.mono.pow(n),
                coeff: t.coeff.powi(n as i32),
                mag: t.coeff.abs().powi(n as i32),
            }]);
        }
        if n > 0 {
            let mut out = Nf::constant(1.0);
            for _ in 0..n {
                out = out.mul(&p);
            }
            out
        } else {
            // Inverse of a genuine sum (or of zero): keep the canonical sum
            // as an opaque base with a negative exponent.
            Nf::single(p.to_expr(), n, 1.0)
        }
    }

    pub(crate) fn to_expr(&self) -> Expr {
        let terms: Vec<Expr> = self
            .0
            .iter()
            .filter(|t| t.coeff != 0.0)
            .map(|t| term_expr(&t.mono, t.coeff))
            .collect();
        if terms.is_empty() {
            return Expr::Num(0.0);
        }
        if terms.len() == 1 {
            terms.into_iter().next().unwrap()
        } else {
            Expr::Add(terms)
        }
    }
}

fn term_expr(mono: &Monomial, coeff: f64) -> Expr {
    let mut factors: Vec<Expr> = Vec::new();
    if coeff != 1.0 || mono.0.is_empty() {
        factors.push(Expr::Num(coeff));
    }
    for (base, exp) in &mono.0 {
        if *exp == 1 {
            factors.push(base.clone());
        } else {
            factors.push(Expr::Pow(Box::new(base.clone()), *exp));
        }
    }
    if factors.len() == 1 {
        factors.into_iter().next().unwrap()
    } else {
        Expr::Mul(factors)
    }
}

pub(crate) fn to_nf(e: &Expr) -> Nf {
    match e {
        Expr::Num(c) => Nf::constant(*c),
        Expr::Sym(s) => Nf::single(Expr::Sym(s.clone()), 1, 1.0),
        Expr::Add(terms) => {
            let mut out = Nf::zero();
            for t in terms {
                out = out.add(&to_nf(t));
            }
            out
        }
        Expr::Mul(factors) => {
            let mut out = Nf::constant(1.0);
            for f in factors {
                out = out.mul(&to_nf(f));
            }
            out
        }
        Expr::Pow(base, n) => to_nf(base).pow(*n),
        Expr::Func(f, arg) => {
            let a = normalize(arg);
            if let Expr::Num(v) = a {
                let folded = match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                    Func::Sqrt => v.sqrt(),
                };
                if folded.is_finite() {
                    return Nf::constant(folded);
                }
            }
            Nf::single(Expr::Func(*f, Box::new(a)), 1, 1.0)
        }
        Expr::Kernel(k, arg) => {
            let a = normalize(arg);
            Nf::single(Expr::Kernel(k.clone(), Box::new(a)), 1, 1.0)
        }
    }
}

pub(crate) fn normalize(e: &Expr) -> Expr {
    to_nf(e).prune().to_expr()
}

/// Writes `e` as a ratio of two polynomials whose atoms are plain symbols.
/// Returns `None` when a function or kernel node is encountered, which
/// routes the zero test to randomised evaluation.
pub(crate) fn to_rational(e: &Expr) -> Option<(Nf, Nf)> {
    let (num, den) = to_rational_inner(e)?;
    Some((num.prune(), den.prune()))
}

fn to_rational_inner(e: &Expr) -> Option<(Nf, Nf)> {
    match e {
        Expr::Num(c) => Some((Nf::constant(*c), Nf::constant(1.0))),
        Expr::Sym(s) => Some((Nf::single(Expr::Sym(s.clone()), 1, 1.0), Nf::constant(1.0))),
        Expr::Add(terms) => {
            let mut num = Nf::zero();
            let mut den = Nf::constant(1.0);
            for t in terms {
                let (tn, td) = to_rational_inner(t)?;
                num = num.mul(&td).add(&tn.mul(&den));
                den = den.mul(&td);
            }
            Some((num, den))
        }
        Expr::Mul(factors) => {
            let mut num = Nf::constant(1.0);
            let mut den = Nf::constant(1.0);
            for f in factors {
                let (fn_, fd) = to_rational_inner(f)?;
                num = num.mul(&fn_);
                den = den.mul(&fd);
            }
            Some((num, den))
        }
        Expr::Pow(base, n) => {
            let (bn, bd) = to_rational_inner(base)?;
            if *n >= 0 {
                Some((poly_pow(&bn, *n as u32), poly_pow(&bd, *n as u32)))
            } else {
                let m = (-n) as u32;
                Some((poly_pow(&bd, m), poly_pow(&bn, m)))
            }
        }
        Expr::Func(_, _) | Expr::Kernel(_, _) => None,
    }
}

fn poly_pow(p: &Nf, n: u32) -> Nf {
    let mut out = Nf::constant(1.0);
    for _ in 0..n {
        out = out.mul(p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Symbol;

    fn x() -> Expr {
        Expr::Sym(Symbol::Coord { i: 0 })
    }

    fn y() -> Expr {
        Expr::Sym(Symbol::Coord { i: 1 })
    }

    #[test]
    fn distributes_products_over_sums() {
        // (x + y)^2 - x^2 - 2xy - y^2 == 0
        let e = Expr::Add(vec![
            Expr::Pow(Box::new(Expr::Add(vec![x(), y()])), 2),
            Expr::Mul(vec![Expr::Num(-1.0), x(), x()]),
            Expr::Mul(vec![Expr::Num(-2.0), x(), y()]),
            Expr::Mul(vec![Expr::Num(-1.0), y(), y()]),
        ]);
        assert_eq!(normalize(&e), Expr::Num(0.0));
    }

    #[test]
    fn rational_cancellation_across_denominators() {
        // x/(x+y) + y/(x+y) - 1 == 0 as a rational function
        let inv = Expr::Pow(Box::new(Expr::Add(vec![x(), y()])), -1);
        let e = Expr::Add(vec![
            Expr::Mul(vec![x(), inv.clone()]),
            Expr::Mul(vec![y(), inv]),
            Expr::Num(-1.0),
        ]);
        let (num, _den) = to_rational(&e).unwrap();
        assert!(num.is_empty());
    }

    #[test]
    fn opaque_blocks_rational_form() {
        let e = Expr::Func(Func::Sin, Box::new(x()));
        assert!(to_rational(&e).is_none());
    }

    #[test]
    fn round_off_residue_is_pruned() {
        // c·(x·x) − (c·x)·x leaves an ULP-scale coefficient for awkward c;
        // the magnitude tracking must flush it to zero.
        let c = 0.1_f64;
        let e = Expr::Add(vec![
            Expr::Mul(vec![Expr::Num(c / 3.0), x(), Expr::Num(3.0), x()]),
            Expr::Mul(vec![Expr::Num(-c), x(), x()]),
        ]);
        assert_eq!(normalize(&e), Expr::Num(0.0));
    }
}
