//! Reconstruction of the action fields s^α from the divergence constraint
//! Σ_α ∂s^α/∂t^α = L∘φ^{(1)} under a gauge choice.

use crate::expr::{Expr, Symbol};
use crate::lagrangian::{grid_point, Lagrangian, LagrangianError};

use super::{FieldSolution, SolverError};

/// The divergence constraint underdetermines s^α for k > 1; a gauge picks a
/// representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// s^α ≡ 0 for α ≠ 1; all of L flows into s¹ along the first axis.
    ZeroAllButFirst,
    /// L is split evenly: ∂s^α/∂t^α = L/k per axis, no summation.
    EvenSplit,
}

impl std::str::FromStr for Gauge {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, SolverError> {
        match s {
            "first" | "zero-all-but-first" => Ok(Gauge::ZeroAllButFirst),
            "even-split" => Ok(Gauge::EvenSplit),
            other => Err(SolverError::UnknownGauge(other.to_string())),
        }
    }
}

/// Fills in the s^α fields of `sol` so that the discrete divergence
/// constraint holds to O(h²); integration is by the trapezoidal rule with
/// the s-dependent part of L taken implicitly (L is required to be affine
/// in s^α with parameter-constant slopes, which holds for every example).
pub fn reconstruct_s_fields(
    lag: &Lagrangian,
    sol: &FieldSolution,
    gauge: Gauge,
) -> Result<FieldSolution, LagrangianError> {
    let chart = lag.chart();
    let k = chart.k();
    if sol.s.len() != k || sol.n_fields() != chart.n() {
        return Err(LagrangianError::Solver(SolverError::GridMismatch(format!(
            "solution carries {} fields / {} s-components, chart needs {} / {k}",
            sol.n_fields(),
            sol.s.len(),
            chart.n(),
        ))));
    }
    // slopes c_α = ∂L/∂s^α must be constants over the parameters
    let mut slopes = Vec::with_capacity(k);
    for alpha in 0..k {
        let c = lag.expr().differentiate(&Symbol::Action { alpha }).normalize();
        if c.free_symbols()
            .iter()
            .any(|s| !matches!(s, Symbol::Param(_)))
        {
            return Err(LagrangianError::Solver(SolverError::BadParameter(format!(
                "∂L/∂s^{} is not constant; gauge integration needs an s-affine Lagrangian",
                alpha + 1
            ))));
        }
        slopes.push(c);
    }
    // s-free part A = L with every s^α set to zero
    let zero_s: std::collections::BTreeMap<Symbol, Expr> = (0..k)
        .map(|alpha| (Symbol::Action { alpha }, Expr::zero()))
        .collect();
    let a_expr = lag.expr().substitute(&zero_s).normalize();

    let mut out = sol.clone();
    for s in out.s.iter_mut() {
        s.fill(0.0);
    }
    let [n0, n1] = sol.grid.shape;
    // evaluate A and the slopes nodewise (they only need φ and jets)
    let mut a_vals = ndarray::Array2::zeros((n0, n1));
    let mut c_vals = vec![0.0f64; k];
    for alpha in 0..k {
        let p = crate::expr::Point::with_chart_defaults(chart);
        c_vals[alpha] = slopes[alpha].evaluate(&p, chart)?;
    }
    for i0 in 0..n0 {
        for i1 in 0..n1 {
            let p = grid_point(chart, sol, [i0, i1]);
            a_vals[[i0, i1]] = a_expr.evaluate(&p, chart)?;
        }
    }
    match gauge {
        Gauge::ZeroAllButFirst => {
            // ds¹/dt¹ = A + c₁ s¹ per axis-1 column, trapezoidal/implicit
            let h = sol.grid.spacing[0];
            let c1 = c_vals[0];
            for i1 in 0..n1 {
                for i0 in 1..n0 {
                    let prev = out.s[0][[i0 - 1, i1]];
                    let rhs = prev
                        + 0.5 * h * (a_vals[[i0, i1]] + a_vals[[i0 - 1, i1]] + c1 * prev);
                    out.s[0][[i0, i1]] = rhs / (1.0 - 0.5 * h * c1);
                }
            }
        }
        Gauge::EvenSplit => {
            // each axis carries L/k; the coupling through c_α s^α is
            // resolved by fixed-point iteration with the implicit step on
            // the own component
            let share = 1.0 / k as f64;
            for _sweep in 0..32 {
                let mut change: f64 = 0.0;
                for alpha in 0..k {
                    let h = sol.grid.spacing[alpha];
                    let c_own = c_vals[alpha];
                    let (outer, inner) = if alpha == 0 { (n1, n0) } else { (n0, n1) };
                    for o in 0..outer {
                        for i in 1..inner {
                            let idx = |pos: usize| if alpha == 0 { [pos, o] } else { [o, pos] };
                            let cross = |pos: usize| -> f64 {
                                let mut acc = 0.0;
                                for (b, cb) in c_vals.iter().enumerate() {
                                    if b != alpha {
                                        acc += cb * out.s[b][idx(pos)];
                                    }
                                }
                                acc
                            };
                            let prev = out.s[alpha][idx(i - 1)];
                            let rhs = prev
                                + 0.5
                                    * h
                                    * share
                                    * (a_vals[idx(i)]
                                        + a_vals[idx(i - 1)]
                                        + cross(i)
                                        + cross(i - 1)
                                        + c_own * prev);
                            let new = rhs / (1.0 - 0.5 * h * share * c_own);
                            change = change.max((new - out.s[alpha][idx(i)]).abs());
                            out.s[alpha][idx(i)] = new;
                        }
                    }
                }
                if change < 1e-13 {
                    break;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::BundleChart;
    use crate::expr::parse;
    use crate::solver::{
        difference, manufactured_string_solution, GridSpec, StringParams,
    };

    fn string_lagrangian() -> Lagrangian {
        let chart = BundleChart::with_params(
            1,
            2,
            &["q"],
            &[("rho", 1.0), ("tau", 1.0), ("gamma", 0.4)],
        );
        let l = parse("(rho/2)*v[q,1]^2 - (tau/2)*v[q,2]^2 - gamma*s[1]", &chart).unwrap();
        Lagrangian::new(chart, l).unwrap()
    }

    #[test]
    fn unknown_gauge_name_is_rejected() {
        assert!(matches!(
            "sideways".parse::<Gauge>(),
            Err(SolverError::UnknownGauge(_))
        ));
        assert_eq!("first".parse::<Gauge>().unwrap(), Gauge::ZeroAllButFirst);
        assert_eq!("even-split".parse::<Gauge>().unwrap(), Gauge::EvenSplit);
    }

    #[test]
    fn zero_solution_yields_zero_s() {
        let lag = string_lagrangian();
        let grid = GridSpec::from_extents([1.0, 1.0], [21, 21]).unwrap();
        let sol = FieldSolution::from_phi(
            grid,
            vec![ndarray::Array2::zeros((21, 21))],
            crate::solver::Provenance::Computed,
        );
        let filled = reconstruct_s_fields(&lag, &sol, Gauge::ZeroAllButFirst).unwrap();
        assert!(filled.s[0].iter().all(|&v| v == 0.0));
        assert!(filled.s[1].iter().all(|&v| v == 0.0));
    }

    fn divergence_residual(lag: &Lagrangian, sol: &FieldSolution) -> f64 {
        let chart = lag.chart();
        let mut worst: f64 = 0.0;
        let div: Vec<_> = (0..2)
            .map(|alpha| difference(&sol.s[alpha], &sol.grid, alpha))
            .collect();
        sol.for_interior(|idx| {
            let p = grid_point(chart, sol, idx);
            let l_val = lag.expr().evaluate(&p, chart).unwrap();
            worst = worst.max((div[0][idx] + div[1][idx] - l_val).abs());
        });
        worst
    }

    /// Truncation estimate for the divergence check: the trapezoid step
    /// carries an O(h²·s‴) error and the centered difference used by the
    /// check an O(h²·s‴/6) one; both are bounded through third differences
    /// of the reconstructed s along each axis.
    fn truncation_estimate(sol: &FieldSolution) -> f64 {
        let mut est = 0.0f64;
        for alpha in 0..sol.s.len() {
            let h = sol.grid.spacing[alpha];
            let [n0, n1] = sol.grid.shape;
            let mut third: f64 = 0.0;
            for i0 in 0..n0 {
                for i1 in 0..n1 {
                    let pos = if alpha == 0 { i0 } else { i1 };
                    let len = if alpha == 0 { n0 } else { n1 };
                    if pos < 2 || pos + 1 >= len {
                        continue;
                    }
                    let at = |p: usize| {
                        if alpha == 0 {
                            sol.s[alpha][[p, i1]]
                        } else {
                            sol.s[alpha][[i0, p]]
                        }
                    };
                    let d3 = (at(pos + 1) - 3.0 * at(pos) + 3.0 * at(pos - 1) - at(pos - 2))
                        / (h * h * h);
                    third = third.max(d3.abs());
                }
            }
            est += h * h * third / 3.0;
        }
        est
    }

    #[test]
    fn first_axis_gauge_satisfies_discrete_divergence() {
        let lag = string_lagrangian();
        let params = StringParams {
            rho: 1.0,
            tau: 1.0,
            gamma: 0.4,
        };
        let m = manufactured_string_solution(&params, 1.0).unwrap();
        let grid = GridSpec::from_extents([0.5, 1.0], [41, 41]).unwrap();
        let sol = m.sample(&grid);
        let filled = reconstruct_s_fields(&lag, &sol, Gauge::ZeroAllButFirst).unwrap();
        assert!(filled.s[1].iter().all(|&v| v == 0.0));
        let res = divergence_residual(&lag, &filled);
        // bound the residual by the trapezoid/centered truncation estimate
        let est = truncation_estimate(&filled);
        assert!(res < 4.0 * est, "divergence residual {res} vs estimate {est}");
    }

    #[test]
    fn even_split_gauge_also_satisfies_divergence() {
        let lag = string_lagrangian();
        let params = StringParams {
            rho: 1.0,
            tau: 1.0,
            gamma: 0.4,
        };
        let m = manufactured_string_solution(&params, 1.0).unwrap();
        let grid = GridSpec::from_extents([0.5, 1.0], [41, 41]).unwrap();
        let sol = m.sample(&grid);
        let filled = reconstruct_s_fields(&lag, &sol, Gauge::EvenSplit).unwrap();
        assert!(filled.s[1].iter().any(|&v| v != 0.0));
        let res = divergence_residual(&lag, &filled);
        let est = truncation_estimate(&filled);
        assert!(res < 4.0 * est, "divergence residual {res} vs estimate {est}");
    }
}
