//! Verification of dissipation laws.
//!
//! A candidate law F = (F^α) is checked in two independent modes:
//!
//! * **symbolic** — the identity Γ_α(F^α) = (∂L/∂s^α) F^α must hold for
//!   every SOPDE Γ in 𝔛ᵏ_L.  Both the membership equations and the
//!   identity are affine-linear in the SOPDE data (Γⁱ_{αβ}, Γ^β_α), so at
//!   random chart points the identity is tested on the whole affine
//!   solution set of the membership constraints: at a particular solution
//!   and along random null-space directions.
//! * **numeric** — on a solution grid the discrete divergence
//!   Σ_α ∂_α(F^α∘φ⁽¹⁾) is compared against (∂L/∂s^α F^α)∘φ⁽¹⁾ nodewise.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle::{BundleError, Sopde};
use crate::chart::BundleChart;
use crate::expr::{EvalError, Expr, Point, Symbol, DEFAULT_SEED};
use crate::lagrangian::{grid_point, Lagrangian, LagrangianError};
use crate::solver::{difference, FieldSolution, GridNorms};
use crate::symmetry::{DissipationLaw, SymmetryError};

#[derive(Debug, thiserror::Error)]
pub enum DissipationError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Lagrangian(#[from] LagrangianError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error("law and Lagrangian live on different charts")]
    ChartMismatch,
    #[error(
        "SOPDE membership constraints are inconsistent at sample {sample} \
         (residual {residual:.3e}); the Lagrangian is degenerate there"
    )]
    InconsistentConstraints { sample: usize, residual: f64 },
    #[error("no sample point with a regular Hessian found after {0} draws")]
    SamplingExhausted(usize),
    #[error("solution grid does not match the chart: {0}")]
    GridMismatch(String),
}

/// Tuning knobs of the randomised symbolic verifier.
#[derive(Debug, Clone)]
pub struct SymbolicConfig {
    /// number of random chart points
    pub samples: usize,
    /// random unit null-space perturbations tested per point
    pub null_probes: usize,
    /// pass iff every (scaled) residual stays below this
    pub tol: f64,
    pub seed: u64,
    /// sampling range for every chart coordinate
    pub range: (f64, f64),
    /// points with |det Hessian| below this are redrawn
    pub hessian_floor: f64,
    /// redraw budget per sample
    pub retries: usize,
}

impl Default for SymbolicConfig {
    fn default() -> Self {
        SymbolicConfig {
            samples: 32,
            null_probes: 8,
            tol: 1e-8,
            seed: DEFAULT_SEED,
            range: (-2.0, 2.0),
            hessian_floor: 1e-6,
            retries: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Symbolic,
    Numeric,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Symbolic => "symbolic",
            Mode::Numeric => "numeric",
        })
    }
}

/// Outcome of the linear-solvability certificate: does a vector field X
/// with i_X dη^α_L = dF^α exist?  Existence upgrades the pointwise
/// identity to a sufficiency argument; non-existence is informational
/// only and does not affect the verdict.
#[derive(Debug, Clone, Copy)]
pub struct SolvabilityCertificate {
    pub exists: bool,
    /// worst relative least-squares residual over the sample points
    pub residual: f64,
}

/// Result of either verification mode.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub mode: Mode,
    /// per-sample (symbolic) or per-interior-node (numeric) residual
    /// magnitudes, in deterministic order
    pub residuals: Vec<f64>,
    pub norms: GridNorms,
    /// the verdict is `norms.linf < tolerance`
    pub tolerance: f64,
    pub verdict: bool,
    /// only attached by the symbolic mode
    pub certificate: Option<SolvabilityCertificate>,
    /// caveats on what the mode does and does not establish
    pub note: String,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.verdict
    }
}

const CERT_TOL: f64 = 1e-7;

/// Default calibration constant of the numeric tolerance C·(Δt² + Δx²);
/// calibrated on the damped-string manufactured solution, whose laws show
/// a truncation constant of about 24 under refinement.
pub const DEFAULT_NUMERIC_C: f64 = 40.0;

/// Checks Γ_α(F^α) − (∂L/∂s^α)F^α = 0 over the affine family of SOPDE
/// data satisfying the membership equations of 𝔛ᵏ_L.
pub fn verify_symbolic(
    lag: &Lagrangian,
    f: &DissipationLaw,
) -> Result<VerificationReport, DissipationError> {
    verify_symbolic_with(lag, f, &SymbolicConfig::default())
}

pub fn verify_symbolic_with(
    lag: &Lagrangian,
    f: &DissipationLaw,
    cfg: &SymbolicConfig,
) -> Result<VerificationReport, DissipationError> {
    let chart = lag.chart();
    if !Arc::ptr_eq(chart, f.chart()) {
        return Err(DissipationError::ChartMismatch);
    }
    let n = chart.n();
    let k = chart.k();
    // unknown layout: Γⁱ_{αβ} at α·nk + i·k + β, then Γ^β_α at nv + α·k + β
    let nv = k * n * k;
    let nu = nv + k * k;
    let unit_sopde = |active: Option<usize>| -> Result<Sopde, BundleError> {
        let mut gv = vec![vec![vec![Expr::zero(); k]; n]; k];
        let mut gs = vec![vec![Expr::zero(); k]; k];
        if let Some(j) = active {
            if j < nv {
                let alpha = j / (n * k);
                let rest = j % (n * k);
                gv[alpha][rest / k][rest % k] = Expr::one();
            } else {
                let rest = j - nv;
                gs[rest / k][rest % k] = Expr::one();
            }
        }
        Sopde::new(chart.clone(), gv, gs)
    };
    // rows 0..n: family membership equations; row n: trace; row n+1: the
    // dissipation identity R(Γ)
    let rows_of = |s: &Sopde| -> Result<Vec<Expr>, DissipationError> {
        let (family, trace) = lag.sopde_field_residuals(s)?;
        let mut rows = family;
        rows.push(trace);
        let mut r_terms = Vec::new();
        for alpha in 0..k {
            r_terms.push(s.member(alpha).apply(f.component(alpha)));
            r_terms.push(Expr::neg(Expr::mul(vec![
                lag.expr().differentiate(&Symbol::Action { alpha }),
                f.component(alpha).clone(),
            ])));
        }
        rows.push(Expr::add(r_terms).normalize());
        Ok(rows)
    };
    let m = n + 1;
    let base = rows_of(&unit_sopde(None)?)?;
    let mut coeff_exprs = Vec::with_capacity(nu);
    for j in 0..nu {
        let rows = rows_of(&unit_sopde(Some(j))?)?;
        let col: Vec<Expr> = rows
            .into_iter()
            .zip(&base)
            .map(|(r, b)| Expr::add(vec![r, Expr::neg(b.clone())]).normalize())
            .collect();
        coeff_exprs.push(col);
    }
    let hess_det = lag.hessian().determinant();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut residuals = Vec::with_capacity(cfg.samples);
    for sample in 0..cfg.samples {
        let p = sample_regular_point(chart, &hess_det, &mut rng, cfg)?;
        let mut a = DMatrix::zeros(m, nu);
        let mut b = DVector::zeros(m);
        for row in 0..m {
            b[row] = -base[row].evaluate(&p, chart)?;
        }
        for (j, col) in coeff_exprs.iter().enumerate() {
            for row in 0..m {
                a[(row, j)] = col[row].evaluate(&p, chart)?;
            }
        }
        let r0 = base[m].evaluate(&p, chart)?;
        let mut c = DVector::zeros(nu);
        for (j, col) in coeff_exprs.iter().enumerate() {
            c[j] = col[m].evaluate(&p, chart)?;
        }
        let svd = a.clone().svd(true, true);
        let particular = svd
            .solve(&b, 1e-12)
            .map_err(|_| DissipationError::InconsistentConstraints {
                sample,
                residual: f64::INFINITY,
            })?;
        let consistency = (&a * &particular - &b).norm();
        if consistency > 1e-7 * (1.0 + b.norm()) {
            return Err(DissipationError::InconsistentConstraints {
                sample,
                residual: consistency,
            });
        }
        // null space of A from the eigen-decomposition of AᵀA
        let eig = (a.transpose() * &a).symmetric_eigen();
        let max_ev = eig
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        let null: Vec<DVector<f64>> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, ev)| ev.abs() <= 1e-10 * max_ev.max(1.0))
            .map(|(idx, _)| eig.eigenvectors.column(idx).into_owned())
            .collect();
        let scale = (1.0 + c.norm()) * (1.0 + particular.norm());
        let mut worst = (r0 + c.dot(&particular)).abs() / scale;
        if !null.is_empty() {
            for _ in 0..cfg.null_probes {
                let mut w = DVector::zeros(nu);
                for basis in &null {
                    w += basis * rng.gen_range(-1.0..1.0);
                }
                let norm = w.norm();
                if norm < 1e-12 {
                    continue;
                }
                w /= norm;
                worst = worst.max((r0 + c.dot(&(&particular + w))).abs() / scale);
            }
        }
        residuals.push(worst);
    }
    let norms = norms_of(&residuals);
    let certificate = solvability_certificate(lag, f, cfg)?;
    Ok(VerificationReport {
        mode: Mode::Symbolic,
        verdict: norms.linf < cfg.tol,
        norms,
        tolerance: cfg.tol,
        residuals,
        certificate: Some(certificate),
        note: "the identity is enforced over the whole constrained SOPDE family, \
               not only its integrable members, so the check is conservative: a \
               law holding only along integrable SOPDEs may be rejected"
            .to_string(),
    })
}

/// Draws a chart point whose Hessian determinant clears the floor.
fn sample_regular_point(
    chart: &Arc<BundleChart>,
    hess_det: &Expr,
    rng: &mut ChaCha8Rng,
    cfg: &SymbolicConfig,
) -> Result<Point, DissipationError> {
    for _ in 0..cfg.retries {
        let mut p = Point::with_chart_defaults(chart);
        for coord in chart.coords() {
            p.set(coord.symbol(), rng.gen_range(cfg.range.0..cfg.range.1));
        }
        match hess_det.evaluate(&p, chart) {
            Ok(d) if d.is_finite() && d.abs() >= cfg.hessian_floor => return Ok(p),
            _ => continue,
        }
    }
    Err(DissipationError::SamplingExhausted(cfg.retries))
}

/// Attempts to solve the linear system i_X dη^α_L = dF^α for a single
/// vector field X at each sample point.
fn solvability_certificate(
    lag: &Lagrangian,
    f: &DissipationLaw,
    cfg: &SymbolicConfig,
) -> Result<SolvabilityCertificate, DissipationError> {
    let chart = lag.chart();
    let dim = chart.dim();
    let k = chart.k();
    let d_etas: Vec<_> = lag
        .contact_forms()
        .iter()
        .map(|eta| eta.exterior_derivative())
        .collect();
    let d_fs: Vec<_> = f
        .components()
        .iter()
        .map(|fa| crate::bundle::OneForm::differential(chart, fa))
        .collect();
    let hess_det = lag.hessian().determinant();
    // decorrelated stream so the certificate does not disturb the main check
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.samples.min(8) {
        let p = sample_regular_point(chart, &hess_det, &mut rng, cfg)?;
        let mut mat = DMatrix::zeros(k * dim, dim);
        let mut rhs = DVector::zeros(k * dim);
        for alpha in 0..k {
            for (c, coeff) in d_fs[alpha].coeffs().iter().enumerate() {
                rhs[alpha * dim + c] = coeff.evaluate(&p, chart)?;
            }
            for (&(a, b), coeff) in d_etas[alpha].coeffs() {
                // ω_{ab} dx^a∧dx^b contributes X^a ω_{ab} to the dx^b
                // component of i_X ω and −X^b ω_{ab} to the dx^a one
                let v = coeff.evaluate(&p, chart)?;
                mat[(alpha * dim + b, a)] += v;
                mat[(alpha * dim + a, b)] -= v;
            }
        }
        let rhs_norm = rhs.norm();
        let svd = mat.clone().svd(true, true);
        let residual = match svd.solve(&rhs, 1e-12) {
            Ok(x) => (&mat * &x - &rhs).norm() / (1.0 + rhs_norm),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(residual);
    }
    Ok(SolvabilityCertificate {
        exists: worst < CERT_TOL,
        residual: worst,
    })
}

/// Checks the discrete divergence identity on a solution grid with the
/// default calibration constant.
pub fn verify_on_solution(
    lag: &Lagrangian,
    f: &DissipationLaw,
    sol: &FieldSolution,
) -> Result<VerificationReport, DissipationError> {
    verify_on_solution_with(lag, f, sol, DEFAULT_NUMERIC_C)
}

/// As [`verify_on_solution`], with an explicit calibration constant: the
/// report passes iff the L∞ residual stays below C·(Δt² + Δx²).
pub fn verify_on_solution_with(
    lag: &Lagrangian,
    f: &DissipationLaw,
    sol: &FieldSolution,
    c: f64,
) -> Result<VerificationReport, DissipationError> {
    let chart = lag.chart();
    if !Arc::ptr_eq(chart, f.chart()) {
        return Err(DissipationError::ChartMismatch);
    }
    let n = chart.n();
    let k = chart.k();
    if sol.n_fields() != n || sol.s.len() != k {
        return Err(DissipationError::GridMismatch(format!(
            "solution carries {} fields / {} s-components, chart needs {n} / {k}",
            sol.n_fields(),
            sol.s.len()
        )));
    }
    let ds: Vec<Expr> = (0..k)
        .map(|alpha| lag.expr().differentiate(&Symbol::Action { alpha }).normalize())
        .collect();
    let [n0, n1] = sol.grid.shape;
    let mut f_vals: Vec<ndarray::Array2<f64>> =
        (0..k).map(|_| ndarray::Array2::zeros((n0, n1))).collect();
    let mut rhs = ndarray::Array2::zeros((n0, n1));
    for i0 in 0..n0 {
        for i1 in 0..n1 {
            let p = grid_point(chart, sol, [i0, i1]);
            let mut r = 0.0;
            for alpha in 0..k {
                let v = f.component(alpha).evaluate(&p, chart)?;
                f_vals[alpha][[i0, i1]] = v;
                r += ds[alpha].evaluate(&p, chart)? * v;
            }
            rhs[[i0, i1]] = r;
        }
    }
    let divs: Vec<ndarray::Array2<f64>> = (0..k)
        .map(|alpha| difference(&f_vals[alpha], &sol.grid, alpha))
        .collect();
    // score only nodes two layers in: the outer difference and the jets it
    // consumes are then both centered, so computed solutions are judged by
    // pure truncation error instead of boundary-stencil mismatch
    let mut residuals = Vec::with_capacity(n0.saturating_sub(4) * n1.saturating_sub(4));
    for i0 in 2..n0.saturating_sub(2) {
        for i1 in 2..n1.saturating_sub(2) {
            let idx = [i0, i1];
            let div: f64 = divs.iter().map(|d| d[idx]).sum();
            residuals.push((div - rhs[idx]).abs());
        }
    }
    let norms = norms_of(&residuals);
    let tolerance = c * (sol.grid.spacing[0].powi(2) + sol.grid.spacing[1].powi(2));
    Ok(VerificationReport {
        mode: Mode::Numeric,
        verdict: norms.linf < tolerance,
        norms,
        tolerance,
        residuals,
        certificate: None,
        note: "meaningful only when the solution satisfies the field equations \
               to truncation order"
            .to_string(),
    })
}

fn norms_of(residuals: &[f64]) -> GridNorms {
    let count = residuals.len().max(1);
    GridNorms {
        linf: residuals.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        l2: (residuals.iter().map(|v| v * v).sum::<f64>() / count as f64).sqrt(),
    }
}
