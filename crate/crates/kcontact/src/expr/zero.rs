//! Zero testing: exact for rational trees, randomised otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::BundleChart;

use super::{nf, Expr, Point};

pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// Configuration of the randomised zero test.
#[derive(Debug, Clone)]
pub struct ZeroConfig {
    pub samples: usize,
    pub tol: f64,
    pub retries: usize,
    pub seed: u64,
    pub range: (f64, f64),
}

impl Default for ZeroConfig {
    fn default() -> Self {
        ZeroConfig {
            samples: 64,
            tol: 1e-9,
            retries: 10,
            seed: DEFAULT_SEED,
            range: (-2.0, 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroVerdict {
    ProvenZero,
    ProvenNonzero,
    ProbablyZero,
    ProbablyNonzero,
    /// Every sample point hit a domain error.
    Indeterminate,
}

impl ZeroVerdict {
    /// Zero, either proven or with high probability.
    pub fn is_zeroish(self) -> bool {
        matches!(self, ZeroVerdict::ProvenZero | ZeroVerdict::ProbablyZero)
    }

    pub fn is_proven(self) -> bool {
        matches!(self, ZeroVerdict::ProvenZero | ZeroVerdict::ProvenNonzero)
    }
}

impl std::fmt::Display for ZeroVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ZeroVerdict::ProvenZero => "proven-zero",
            ZeroVerdict::ProvenNonzero => "proven-nonzero",
            ZeroVerdict::ProbablyZero => "probably-zero",
            ZeroVerdict::ProbablyNonzero => "probably-nonzero",
            ZeroVerdict::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

impl Expr {
    pub fn is_zero(&self, chart: &BundleChart) -> ZeroVerdict {
        self.is_zero_with(chart, &ZeroConfig::default())
    }

    pub fn is_zero_with(&self, chart: &BundleChart, cfg: &ZeroConfig) -> ZeroVerdict {
        let n = self.normalize();
        if let Expr::Num(c) = n {
            return if c == 0.0 {
                ZeroVerdict::ProvenZero
            } else {
                ZeroVerdict::ProvenNonzero
            };
        }
        if !n.has_opaque() {
            if let Some((num, _den)) = nf::to_rational(&n) {
                // A polynomial over the reals vanishes identically iff its
                // canonical expansion is empty.
                return if num.is_empty() {
                    ZeroVerdict::ProvenZero
                } else {
                    ZeroVerdict::ProvenNonzero
                };
            }
        }
        self.sampled_zero(&n, chart, cfg)
    }

    fn sampled_zero(&self, n: &Expr, chart: &BundleChart, cfg: &ZeroConfig) -> ZeroVerdict {
        let symbols: Vec<_> = n.free_symbols().into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut decided = 0usize;
        let mut all_zero = true;
        for _ in 0..cfg.samples {
            let mut ok = None;
            for _ in 0..=cfg.retries {
                let mut point = Point::new();
                for sym in &symbols {
                    point.set(sym.clone(), rng.gen_range(cfg.range.0..cfg.range.1));
                }
                if let Some((value, scale)) = eval_scaled(n, &point, chart) {
                    ok = Some((value, scale));
                    break;
                }
            }
            if let Some((value, scale)) = ok {
                decided += 1;
                if value.abs() > cfg.tol * scale.max(1.0) {
                    all_zero = false;
                }
            }
        }
        if decided == 0 {
            ZeroVerdict::Indeterminate
        } else if all_zero {
            ZeroVerdict::ProbablyZero
        } else {
            ZeroVerdict::ProbablyNonzero
        }
    }
}

/// Evaluates a normalised expression returning `(value, magnitude scale)`;
/// the scale is the sum of term magnitudes, so cancellation-heavy sums are
/// judged relative to their ingredients.
fn eval_scaled(n: &Expr, point: &Point, chart: &BundleChart) -> Option<(f64, f64)> {
    match n {
        Expr::Add(terms) => {
            let mut sum = 0.0;
            let mut mag = 0.0;
            for t in terms {
                let v = t.evaluate(point, chart).ok()?;
                if !v.is_finite() {
                    return None;
                }
                sum += v;
                mag += v.abs();
            }
            Some((sum, mag))
        }
        other => {
            let v = other.evaluate(point, chart).ok()?;
            v.is_finite().then_some((v, v.abs()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn chart() -> std::sync::Arc<BundleChart> {
        BundleChart::with_params(1, 2, &["q"], &[("rho", 1.0), ("tau", 1.0)])
    }

    #[test]
    fn exact_polynomial_cancellation() {
        let chart = chart();
        let e = parse("v[q,1]^2 - v[q,1]*v[q,1]", &chart).unwrap();
        assert_eq!(e.is_zero(&chart), ZeroVerdict::ProvenZero);
    }

    #[test]
    fn nonzero_monomial() {
        let chart = chart();
        let e = parse("rho*v[q,1]", &chart).unwrap();
        assert_eq!(e.is_zero(&chart), ZeroVerdict::ProvenNonzero);
    }

    #[test]
    fn pythagorean_identity_is_probably_zero() {
        let chart = chart();
        let e = parse("sin(q)^2 + cos(q)^2 - 1", &chart).unwrap();
        assert_eq!(e.is_zero(&chart), ZeroVerdict::ProbablyZero);
    }

    #[test]
    fn transcendental_nonzero_detected() {
        let chart = chart();
        let e = parse("sin(q)^2 - cos(q)^2", &chart).unwrap();
        assert_eq!(e.is_zero(&chart), ZeroVerdict::ProbablyNonzero);
    }

    #[test]
    fn log_of_strictly_negative_shift_is_indeterminate() {
        let chart = chart();
        // q in [-2,2] makes q - 3 always negative, so log never evaluates.
        let e = parse("log(q - 3)", &chart).unwrap();
        assert_eq!(e.is_zero(&chart), ZeroVerdict::Indeterminate);
    }

    #[test]
    fn rational_function_identity() {
        let chart = chart();
        let e = parse("q/(q + 1) + 1/(q + 1) - 1", &chart).unwrap();
        assert_eq!(e.is_zero(&chart), ZeroVerdict::ProvenZero);
    }
}
