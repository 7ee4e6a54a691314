//! On-grid evaluation of the jet residual system and refinement-order
//! estimation.

use crate::expr::{Expr, Symbol};
use crate::lagrangian::{grid_point, Lagrangian, LagrangianError};

use super::{difference, FieldSolution};

/// L∞ and (mean-square) L2 norms over the interior nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridNorms {
    pub linf: f64,
    pub l2: f64,
}

/// Residual norms of the field equations and the divergence constraint.
#[derive(Debug, Clone)]
pub struct ResidualNorms {
    /// one entry per field equation R_i
    pub fields: Vec<GridNorms>,
    pub divergence: GridNorms,
}

/// Evaluates the Euler–Lagrange jet residuals at every interior node and
/// returns the full residual grids (zero on the boundary ring): one array
/// per field equation plus the divergence constraint.
pub fn el_residual_fields(
    lag: &Lagrangian,
    sol: &FieldSolution,
) -> Result<(Vec<ndarray::Array2<f64>>, ndarray::Array2<f64>), LagrangianError> {
    let chart = lag.chart();
    let n = chart.n();
    let k = chart.k();
    if sol.n_fields() != n || sol.s.len() != k {
        return Err(LagrangianError::Solver(super::SolverError::GridMismatch(
            format!(
                "solution carries {} fields / {} s-components, chart needs {n} / {k}",
                sol.n_fields(),
                sol.s.len()
            ),
        )));
    }
    let sys = lag.euler_lagrange_residuals();
    // discrete jets needed by the residual expressions
    let mut w = Vec::new();
    for i in 0..n {
        for alpha in 0..k {
            for beta in alpha..k {
                w.push((
                    Symbol::jet_second(i, alpha, beta),
                    sol.second_jet(i, alpha, beta),
                ));
            }
        }
    }
    let mut r_jets = Vec::new();
    for beta in 0..k {
        for alpha in 0..k {
            r_jets.push((
                Symbol::JetAction { beta, alpha },
                difference(&sol.s[beta], &sol.grid, alpha),
            ));
        }
    }
    let shape = (sol.grid.shape[0], sol.grid.shape[1]);
    let mut fields: Vec<ndarray::Array2<f64>> =
        (0..n).map(|_| ndarray::Array2::zeros(shape)).collect();
    let mut divergence = ndarray::Array2::zeros(shape);
    let mut failure = None;
    sol.for_interior(|idx| {
        if failure.is_some() {
            return;
        }
        let mut p = grid_point(chart, sol, idx);
        for i in 0..n {
            for alpha in 0..k {
                p.set(Symbol::JetFirst { i, alpha }, sol.jets[i][alpha][idx]);
            }
        }
        for (sym, arr) in w.iter().chain(r_jets.iter()) {
            p.set(sym.clone(), arr[idx]);
        }
        let mut eval = |e: &Expr| -> f64 {
            match e.evaluate(&p, chart) {
                Ok(v) => v,
                Err(err) => {
                    failure = Some(err);
                    f64::NAN
                }
            }
        };
        for (i, r) in sys.residuals.iter().enumerate() {
            fields[i][idx] = eval(r);
        }
        divergence[idx] = eval(&sys.divergence);
    });
    if let Some(err) = failure {
        return Err(LagrangianError::Eval(err));
    }
    Ok((fields, divergence))
}

/// L∞/L2 norms of the Euler–Lagrange residuals over the interior nodes.
pub fn el_residual_on_grid(
    lag: &Lagrangian,
    sol: &FieldSolution,
) -> Result<ResidualNorms, LagrangianError> {
    let (fields, divergence) = el_residual_fields(lag, sol)?;
    let count = (sol.grid.shape[0].saturating_sub(2) * sol.grid.shape[1].saturating_sub(2)).max(1);
    let norms = |arr: &ndarray::Array2<f64>| GridNorms {
        linf: arr.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        l2: (arr.iter().map(|v| v * v).sum::<f64>() / count as f64).sqrt(),
    };
    Ok(ResidualNorms {
        fields: fields.iter().map(&norms).collect(),
        divergence: norms(&divergence),
    })
}

/// Least-squares slope of ln(error) against ln(h): the observed
/// convergence order of a refinement study.
pub fn estimate_order(errors: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}
