//! Symmetry classification for k-contact Lagrangian systems: natural,
//! k-contact, Cartan-like and Newtonoid symmetries, the dissipation laws
//! they induce, and a numeric probe for dynamical symmetries.

use std::sync::Arc;

use thiserror::Error;

use crate::bundle::{BaseVectorField, BundleError, BundleVectorField, OneForm, Sopde};
use crate::chart::{BundleChart, ChartError, Coord};
use crate::expr::{EvalError, Expr, Point, Symbol, ZeroConfig, ZeroVerdict};
use crate::lagrangian::{Lagrangian, LagrangianError};
use crate::solver::{
    el_residual_fields, el_residual_on_grid, FieldSolution, Provenance, ResidualNorms,
};

#[derive(Debug, Error)]
pub enum SymmetryError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Lagrangian(#[from] LagrangianError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("chart rejects symbol: {0}")]
    Chart(#[from] ChartError),
    #[error("expected {expected} components, got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error("jet symbol {0:?} cannot appear in a dissipation law")]
    JetInLaw(Symbol),
    #[error("field-equation residual {linf:.3e} exceeds the probe tolerance {tol:.3e}")]
    BaselineResidual { linf: f64, tol: f64 },
    #[error("flow integration diverged at node ({0}, {1})")]
    UnstableFlow(usize, usize),
}

/// A candidate dissipation law F = (F¹, …, F^k) on the phase bundle.
#[derive(Debug, Clone)]
pub struct DissipationLaw {
    chart: Arc<BundleChart>,
    components: Vec<Expr>,
}

impl DissipationLaw {
    pub fn new(chart: Arc<BundleChart>, components: Vec<Expr>) -> Result<Self, SymmetryError> {
        if components.len() != chart.k() {
            return Err(SymmetryError::ComponentCount {
                expected: chart.k(),
                got: components.len(),
            });
        }
        for c in &components {
            for sym in c.free_symbols() {
                if matches!(
                    sym,
                    Symbol::JetFirst { .. } | Symbol::JetSecond { .. } | Symbol::JetAction { .. }
                ) {
                    return Err(SymmetryError::JetInLaw(sym));
                }
                chart.check_symbol(&sym)?;
            }
        }
        Ok(DissipationLaw { chart, components })
    }

    pub fn chart(&self) -> &Arc<BundleChart> {
        &self.chart
    }

    pub fn component(&self, alpha: usize) -> &Expr {
        &self.components[alpha]
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }
}

/// The symmetry notion a verdict refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryClass {
    Natural,
    KContact,
    CartanLike,
    Newtonoid,
    NewtonoidCorollary,
    DynamicalPrecheck,
}

impl std::fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SymmetryClass::Natural => "natural",
            SymmetryClass::KContact => "k-contact",
            SymmetryClass::CartanLike => "cartan-like",
            SymmetryClass::Newtonoid => "newtonoid",
            SymmetryClass::NewtonoidCorollary => "newtonoid-corollary",
            SymmetryClass::DynamicalPrecheck => "dynamical-precheck",
        };
        f.write_str(s)
    }
}

/// One defining condition together with its zero-test outcome.
#[derive(Debug, Clone)]
pub struct ConditionCheck {
    pub name: String,
    pub verdict: ZeroVerdict,
}

/// The full outcome of a symmetry classification: every defining condition
/// with its individual verdict, and the induced dissipation law when the
/// class yields one and all conditions hold.
#[derive(Debug, Clone)]
pub struct SymmetryVerdict {
    pub class: SymmetryClass,
    pub conditions: Vec<ConditionCheck>,
    pub law: Option<DissipationLaw>,
}

impl SymmetryVerdict {
    pub fn is_symmetry(&self) -> bool {
        self.conditions.iter().all(|c| c.verdict.is_zeroish())
    }
}

fn coord_label(chart: &BundleChart, c: Coord) -> String {
    match c {
        Coord::Q(i) => chart.base_name(i).to_string(),
        Coord::V(i, alpha) => format!("v[{},{}]", chart.base_name(i), alpha + 1),
        Coord::S(alpha) => format!("s[{}]", alpha + 1),
    }
}

/// Conditions `𝓛_X η^α_L − dg^α = 0` (componentwise) and
/// `𝓛_X E_L + g^α ∂L/∂s^α = 0`, shared by the k-contact (g ≡ 0) and
/// Cartan-like checks.
fn contact_conditions(
    lag: &Lagrangian,
    x: &BundleVectorField,
    g: Option<&[Expr]>,
    cfg: &ZeroConfig,
) -> Result<Vec<ConditionCheck>, SymmetryError> {
    let chart = lag.chart();
    let k = chart.k();
    let mut conditions = Vec::new();
    for (alpha, eta) in lag.contact_forms().iter().enumerate() {
        let mut lie = eta.lie_derivative(x)?;
        if let Some(g) = g {
            lie = lie.subv(&OneForm::differential(chart, &g[alpha]))?;
        }
        for (idx, coord) in chart.coords().into_iter().enumerate() {
            conditions.push(ConditionCheck {
                name: format!(
                    "lie_eta[{}] d{}",
                    alpha + 1,
                    coord_label(chart, coord)
                ),
                verdict: lie.coeffs()[idx].is_zero_with(chart, cfg),
            });
        }
    }
    let mut energy_terms = vec![x.apply(&lag.energy())];
    if let Some(g) = g {
        for alpha in 0..k {
            energy_terms.push(Expr::mul(vec![
                g[alpha].clone(),
                lag.expr().differentiate(&Symbol::Action { alpha }),
            ]));
        }
    }
    conditions.push(ConditionCheck {
        name: "lie_energy".to_string(),
        verdict: Expr::add(energy_terms).is_zero_with(chart, cfg),
    });
    Ok(conditions)
}

fn contact_law(
    lag: &Lagrangian,
    x: &BundleVectorField,
    g: Option<&[Expr]>,
) -> Result<DissipationLaw, SymmetryError> {
    let chart = lag.chart().clone();
    let mut components = Vec::with_capacity(chart.k());
    for (alpha, eta) in lag.contact_forms().iter().enumerate() {
        let mut f = Expr::neg(eta.interior_product(x)?);
        if let Some(g) = g {
            f = Expr::add(vec![g[alpha].clone(), f]);
        }
        components.push(f);
    }
    DissipationLaw::new(chart, components)
}

/// Z ∈ 𝔛(Q) is a natural symmetry of L when Z^C(L) = 0; the vertical
/// lifts then give the dissipation law F^α = Z^{V_α}(L).
pub fn is_natural_symmetry(
    lag: &Lagrangian,
    z: &BaseVectorField,
) -> Result<SymmetryVerdict, SymmetryError> {
    is_natural_symmetry_with(lag, z, &ZeroConfig::default())
}

pub fn is_natural_symmetry_with(
    lag: &Lagrangian,
    z: &BaseVectorField,
    cfg: &ZeroConfig,
) -> Result<SymmetryVerdict, SymmetryError> {
    let chart = lag.chart();
    let verdict = z.complete_lift().apply(lag.expr()).is_zero_with(chart, cfg);
    let conditions = vec![ConditionCheck {
        name: "complete_lift(L)".to_string(),
        verdict,
    }];
    let law = if verdict.is_zeroish() {
        let mut components = Vec::with_capacity(chart.k());
        for alpha in 0..chart.k() {
            components.push(z.vertical_lift(alpha)?.apply(lag.expr()));
        }
        Some(DissipationLaw::new(chart.clone(), components)?)
    } else {
        None
    };
    Ok(SymmetryVerdict {
        class: SymmetryClass::Natural,
        conditions,
        law,
    })
}

/// X is an infinitesimal k-contact symmetry when 𝓛_X η^α_L = 0 for every
/// α and 𝓛_X E_L = 0; then F^α = −i_X η^α_L is a dissipation law.
pub fn is_k_contact_symmetry(
    lag: &Lagrangian,
    x: &BundleVectorField,
) -> Result<SymmetryVerdict, SymmetryError> {
    is_k_contact_symmetry_with(lag, x, &ZeroConfig::default())
}

pub fn is_k_contact_symmetry_with(
    lag: &Lagrangian,
    x: &BundleVectorField,
    cfg: &ZeroConfig,
) -> Result<SymmetryVerdict, SymmetryError> {
    let conditions = contact_conditions(lag, x, None, cfg)?;
    let law = if conditions.iter().all(|c| c.verdict.is_zeroish()) {
        Some(contact_law(lag, x, None)?)
    } else {
        None
    };
    Ok(SymmetryVerdict {
        class: SymmetryClass::KContact,
        conditions,
        law,
    })
}

/// Z with auxiliary functions g^α satisfying 𝓛_Z η^α_L = dg^α and
/// 𝓛_Z E_L = −g^α ∂L/∂s^α yields the law F^α = g^α − i_Z η^α_L even when
/// Z is not itself a symmetry.
pub fn cartan_like_check(
    lag: &Lagrangian,
    z: &BundleVectorField,
    g: &[Expr],
) -> Result<SymmetryVerdict, SymmetryError> {
    cartan_like_check_with(lag, z, g, &ZeroConfig::default())
}

pub fn cartan_like_check_with(
    lag: &Lagrangian,
    z: &BundleVectorField,
    g: &[Expr],
    cfg: &ZeroConfig,
) -> Result<SymmetryVerdict, SymmetryError> {
    let k = lag.chart().k();
    if g.len() != k {
        return Err(SymmetryError::ComponentCount {
            expected: k,
            got: g.len(),
        });
    }
    let conditions = contact_conditions(lag, z, Some(g), cfg)?;
    let law = if conditions.iter().all(|c| c.verdict.is_zeroish()) {
        Some(contact_law(lag, z, Some(g))?)
    } else {
        None
    };
    Ok(SymmetryVerdict {
        class: SymmetryClass::CartanLike,
        conditions,
        law,
    })
}

/// X is Newtonoid for the SOPDE Γ when J^α([Γ_α, X]) = 0, locally
/// Γ_α(Xⁱ) = Xⁱ_α for every i, α.
pub fn is_newtonoid(gamma: &Sopde, x: &BundleVectorField) -> Result<SymmetryVerdict, SymmetryError> {
    is_newtonoid_with(gamma, x, &ZeroConfig::default())
}

pub fn is_newtonoid_with(
    gamma: &Sopde,
    x: &BundleVectorField,
    cfg: &ZeroConfig,
) -> Result<SymmetryVerdict, SymmetryError> {
    let chart = gamma.chart();
    if !Arc::ptr_eq(chart, x.chart()) {
        return Err(SymmetryError::Bundle(BundleError::ChartMismatch));
    }
    let mut conditions = Vec::new();
    for i in 0..chart.n() {
        for alpha in 0..chart.k() {
            let residual = Expr::sub(
                gamma.member(alpha).apply(x.component(Coord::Q(i))),
                x.component(Coord::V(i, alpha)).clone(),
            );
            conditions.push(ConditionCheck {
                name: format!(
                    "gamma[{}]({}) - {}",
                    alpha + 1,
                    coord_label(chart, Coord::Q(i)),
                    coord_label(chart, Coord::V(i, alpha))
                ),
                verdict: residual.is_zero_with(chart, cfg),
            });
        }
    }
    Ok(SymmetryVerdict {
        class: SymmetryClass::Newtonoid,
        conditions,
        law: None,
    })
}

/// X = Z^C + K^α ∂/∂s^α with constant K^α and X(L) = 0 is an infinitesimal
/// k-contact symmetry with law F^α = Z^{V_α}(L) − K^α.
pub fn newtonoid_corollary_check(
    lag: &Lagrangian,
    z: &BaseVectorField,
    ks: &[f64],
) -> Result<SymmetryVerdict, SymmetryError> {
    newtonoid_corollary_check_with(lag, z, ks, &ZeroConfig::default())
}

pub fn newtonoid_corollary_check_with(
    lag: &Lagrangian,
    z: &BaseVectorField,
    ks: &[f64],
    cfg: &ZeroConfig,
) -> Result<SymmetryVerdict, SymmetryError> {
    let chart = lag.chart();
    let k = chart.k();
    if ks.len() != k {
        return Err(SymmetryError::ComponentCount {
            expected: k,
            got: ks.len(),
        });
    }
    let mut x = z.complete_lift();
    for (alpha, &ka) in ks.iter().enumerate() {
        x.set(Coord::S(alpha), Expr::num(ka));
    }
    let mut conditions = vec![ConditionCheck {
        name: "X(L)".to_string(),
        verdict: x.apply(lag.expr()).is_zero_with(chart, cfg),
    }];
    conditions.extend(contact_conditions(lag, &x, None, cfg)?);
    let law = if conditions.iter().all(|c| c.verdict.is_zeroish()) {
        let mut components = Vec::with_capacity(k);
        for (alpha, &ka) in ks.iter().enumerate() {
            components.push(Expr::sub(
                z.vertical_lift(alpha)?.apply(lag.expr()),
                Expr::num(ka),
            ));
        }
        Some(DissipationLaw::new(chart.clone(), components)?)
    } else {
        None
    };
    Ok(SymmetryVerdict {
        class: SymmetryClass::NewtonoidCorollary,
        conditions,
        law,
    })
}

/// Necessary symbolic condition for X to be a dynamical symmetry relative
/// to a SOPDE Γ ∈ 𝔛ᵏ_L: Σ_α i_{[Γ_α, X]} η^α_L = 0.
pub fn dynamical_symmetry_precheck(
    lag: &Lagrangian,
    gamma: &Sopde,
    x: &BundleVectorField,
) -> Result<SymmetryVerdict, SymmetryError> {
    dynamical_symmetry_precheck_with(lag, gamma, x, &ZeroConfig::default())
}

pub fn dynamical_symmetry_precheck_with(
    lag: &Lagrangian,
    gamma: &Sopde,
    x: &BundleVectorField,
    cfg: &ZeroConfig,
) -> Result<SymmetryVerdict, SymmetryError> {
    let chart = lag.chart();
    let etas = lag.contact_forms();
    let mut terms = Vec::with_capacity(chart.k());
    for (alpha, eta) in etas.iter().enumerate() {
        let bracket = gamma.member(alpha).lie_bracket(x)?;
        terms.push(eta.interior_product(&bracket)?);
    }
    let conditions = vec![ConditionCheck {
        name: "sum_a i_[gamma_a,X] eta^a".to_string(),
        verdict: Expr::add(terms).is_zero_with(chart, cfg),
    }];
    Ok(SymmetryVerdict {
        class: SymmetryClass::DynamicalPrecheck,
        conditions,
        law: None,
    })
}

/// Outcome of the numeric dynamical-symmetry probe: residual norms of the
/// untransformed and flow-transported grids and the excess per equation.
#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub epsilon: f64,
    pub baseline: ResidualNorms,
    pub transported: ResidualNorms,
    /// L∞ norm of the nodewise residual change, one entry per field equation
    pub excess_fields: Vec<f64>,
    /// L∞ norm of the nodewise change of the divergence-constraint residual
    pub excess_divergence: f64,
}

const PROBE_BASELINE_TOL: f64 = 0.5;
const PROBE_SUBSTEPS: usize = 8;

/// Transports the prolonged grid values of `sol` along the flow of X for
/// parameter ε (node-local RK4) and reports the excess Euler–Lagrange
/// residual over the untransformed baseline. For an infinitesimal
/// dynamical symmetry the excess is O(ε²) plus discretization error.
pub fn dynamical_symmetry_probe(
    lag: &Lagrangian,
    x: &BundleVectorField,
    sol: &FieldSolution,
    epsilon: f64,
) -> Result<ProbeReport, SymmetryError> {
    let chart = lag.chart();
    if !Arc::ptr_eq(chart, x.chart()) {
        return Err(SymmetryError::Bundle(BundleError::ChartMismatch));
    }
    // Both grids are rebuilt through the same finite-difference jets so the
    // comparison isolates the effect of the transport.
    let baseline_sol = rebuild(chart, sol, None, x, 0.0)?;
    let baseline = el_residual_on_grid(lag, &baseline_sol)?;
    let worst = baseline
        .fields
        .iter()
        .map(|n| n.linf)
        .fold(0.0f64, f64::max);
    if worst > PROBE_BASELINE_TOL {
        return Err(SymmetryError::BaselineResidual {
            linf: worst,
            tol: PROBE_BASELINE_TOL,
        });
    }
    let (base_fields, base_div) = el_residual_fields(lag, &baseline_sol)?;
    let transported_sol = rebuild(chart, sol, Some(()), x, epsilon)?;
    let transported = el_residual_on_grid(lag, &transported_sol)?;
    let (trans_fields, trans_div) = el_residual_fields(lag, &transported_sol)?;
    let diff_linf = |a: &ndarray::Array2<f64>, b: &ndarray::Array2<f64>| {
        a.iter()
            .zip(b.iter())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    };
    let excess_fields = trans_fields
        .iter()
        .zip(&base_fields)
        .map(|(t, b)| diff_linf(t, b))
        .collect();
    let excess_divergence = diff_linf(&trans_div, &base_div);
    Ok(ProbeReport {
        epsilon,
        baseline,
        transported,
        excess_fields,
        excess_divergence,
    })
}

/// Applies the node-local RK4 flow of `x` (when `transport` is set) and
/// rebuilds a solution whose jets come from finite differences of the
/// transported φ.
fn rebuild(
    chart: &Arc<BundleChart>,
    sol: &FieldSolution,
    transport: Option<()>,
    x: &BundleVectorField,
    epsilon: f64,
) -> Result<FieldSolution, SymmetryError> {
    let n = chart.n();
    let k = chart.k();
    let [n0, n1] = sol.grid.shape;
    let mut phi: Vec<ndarray::Array2<f64>> = (0..n)
        .map(|_| ndarray::Array2::zeros((n0, n1)))
        .collect();
    let mut s: Vec<ndarray::Array2<f64>> = (0..k)
        .map(|_| ndarray::Array2::zeros((n0, n1)))
        .collect();
    let coords = chart.coords();
    for i0 in 0..n0 {
        for i1 in 0..n1 {
            let mut state: Vec<f64> = coords
                .iter()
                .map(|&c| match c {
                    Coord::Q(i) => sol.phi[i][[i0, i1]],
                    Coord::V(i, alpha) => sol.jets[i][alpha][[i0, i1]],
                    Coord::S(alpha) => sol.s[alpha][[i0, i1]],
                })
                .collect();
            if transport.is_some() && epsilon != 0.0 {
                flow_rk4(chart, x, &mut state, epsilon)
                    .map_err(|_| SymmetryError::UnstableFlow(i0, i1))?;
                if state.iter().any(|v| !v.is_finite()) {
                    return Err(SymmetryError::UnstableFlow(i0, i1));
                }
            }
            for (idx, &c) in coords.iter().enumerate() {
                match c {
                    Coord::Q(i) => phi[i][[i0, i1]] = state[idx],
                    Coord::V(_, _) => {}
                    Coord::S(alpha) => s[alpha][[i0, i1]] = state[idx],
                }
            }
        }
    }
    let mut out = FieldSolution::from_phi(sol.grid.clone(), phi, Provenance::Computed);
    out.s = s;
    Ok(out)
}

fn flow_rk4(
    chart: &Arc<BundleChart>,
    x: &BundleVectorField,
    state: &mut [f64],
    epsilon: f64,
) -> Result<(), EvalError> {
    let h = epsilon / PROBE_SUBSTEPS as f64;
    let coords = chart.coords();
    let deriv = |st: &[f64]| -> Result<Vec<f64>, EvalError> {
        let mut p = Point::with_chart_defaults(chart);
        for (idx, &c) in coords.iter().enumerate() {
            p.set(c.symbol(), st[idx]);
        }
        x.components()
            .iter()
            .map(|comp| comp.evaluate(&p, chart))
            .collect()
    };
    for _ in 0..PROBE_SUBSTEPS {
        let k1 = deriv(state)?;
        let mid1: Vec<f64> = state
            .iter()
            .zip(&k1)
            .map(|(v, d)| v + 0.5 * h * d)
            .collect();
        let k2 = deriv(&mid1)?;
        let mid2: Vec<f64> = state
            .iter()
            .zip(&k2)
            .map(|(v, d)| v + 0.5 * h * d)
            .collect();
        let k3 = deriv(&mid2)?;
        let end: Vec<f64> = state.iter().zip(&k3).map(|(v, d)| v + h * d).collect();
        let k4 = deriv(&end)?;
        for (idx, v) in state.iter_mut().enumerate() {
            *v += h / 6.0 * (k1[idx] + 2.0 * k2[idx] + 2.0 * k3[idx] + k4[idx]);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::KernelImpl;
    use crate::expr::parse;
    use crate::solver::{
        manufactured_string_solution, reconstruct_s_fields, Gauge, GridSpec, StringParams,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn string_chart() -> Arc<BundleChart> {
        static CHART: OnceLock<Arc<BundleChart>> = OnceLock::new();
        CHART
            .get_or_init(|| {
                BundleChart::with_params(
                    1,
                    2,
                    &["q"],
                    &[("rho", 1.3), ("tau", 0.9), ("gamma", 0.4)],
                )
            })
            .clone()
    }

    fn string_lagrangian() -> Lagrangian {
        let chart = string_chart();
        let l = parse("(rho/2)*v[q,1]^2 - (tau/2)*v[q,2]^2 - gamma*s[1]", &chart).unwrap();
        Lagrangian::new(chart, l).unwrap()
    }

    fn string_sopde() -> Sopde {
        let chart = string_chart();
        let p = |t: &str| parse(t, &chart).unwrap();
        Sopde::new(
            chart.clone(),
            vec![
                vec![vec![p("-(rho/2)*v[q,1]^2 + gamma*s[1]"), p("0")]],
                vec![vec![
                    p("0"),
                    p("(gamma*rho/tau)*v[q,1] - (rho^2/(2*tau))*v[q,1]^2 + (gamma*rho/tau)*s[1]"),
                ]],
            ],
            vec![
                vec![p("(rho/2)*v[q,1]^2 - gamma*s[1]"), p("0")],
                vec![p("0"), p("-(tau/2)*v[q,2]^2")],
            ],
        )
        .unwrap()
    }

    fn d_dq(chart: &Arc<BundleChart>) -> BaseVectorField {
        BaseVectorField::new(chart.clone(), vec![Expr::one()]).unwrap()
    }

    #[test]
    fn translation_is_a_natural_symmetry_of_the_string() {
        let lag = string_lagrangian();
        let chart = lag.chart().clone();
        let verdict = is_natural_symmetry(&lag, &d_dq(&chart)).unwrap();
        assert!(verdict.is_symmetry());
        let law = verdict.law.unwrap();
        assert_eq!(law.component(0), &parse("rho*v[q,1]", &chart).unwrap());
        assert_eq!(law.component(1), &parse("-tau*v[q,2]", &chart).unwrap());
    }

    #[test]
    fn scaling_is_not_a_natural_symmetry_of_the_string() {
        let lag = string_lagrangian();
        let chart = lag.chart().clone();
        let z = BaseVectorField::new(chart.clone(), vec![parse("q", &chart).unwrap()]).unwrap();
        let verdict = is_natural_symmetry(&lag, &z).unwrap();
        assert!(!verdict.is_symmetry());
        assert!(verdict.law.is_none());
    }

    fn coupled_chart() -> Arc<BundleChart> {
        static CHART: OnceLock<Arc<BundleChart>> = OnceLock::new();
        CHART
            .get_or_init(|| {
                let mut chart = BundleChart::new(
                    2,
                    2,
                    vec!["q1".to_string(), "q2".to_string()],
                    vec![crate::chart::ParamDecl {
                        name: "gamma".to_string(),
                        default: Some(0.4),
                    }],
                )
                .unwrap();
                chart.declare_kernel(KernelImpl {
                    name: "C".to_string(),
                    fns: vec![
                        Arc::new(|z: f64| z * z + 0.3 * z.powi(4)),
                        Arc::new(|z: f64| 2.0 * z + 1.2 * z.powi(3)),
                    ],
                    ratio_limit_at_zero: Some(2.0),
                });
                Arc::new(chart)
            })
            .clone()
    }

    #[test]
    fn rotation_is_a_natural_symmetry_of_the_coupled_strings() {
        let chart = coupled_chart();
        let l = parse(
            "(1/2)*(v[q1,1]^2 + v[q2,1]^2 - v[q1,2]^2 - v[q2,2]^2) \
             - C(sqrt(q1^2 + q2^2)) - gamma*s[1]",
            &chart,
        )
        .unwrap();
        let lag = Lagrangian::new(chart.clone(), l).unwrap();
        let z = BaseVectorField::new(
            chart.clone(),
            vec![
                parse("-q2", &chart).unwrap(),
                parse("q1", &chart).unwrap(),
            ],
        )
        .unwrap();
        let verdict = is_natural_symmetry(&lag, &z).unwrap();
        assert!(verdict.is_symmetry());
        let law = verdict.law.unwrap();
        let want_t = parse("q1*v[q2,1] - q2*v[q1,1]", &chart).unwrap();
        let want_x = parse("-(q1*v[q2,2] - q2*v[q1,2])", &chart).unwrap();
        assert!(Expr::sub(law.component(0).clone(), want_t)
            .is_zero(&chart)
            .is_zeroish());
        assert!(Expr::sub(law.component(1).clone(), want_x)
            .is_zero(&chart)
            .is_zeroish());
    }

    #[test]
    fn translation_is_a_k_contact_symmetry_of_the_string() {
        let lag = string_lagrangian();
        let chart = lag.chart().clone();
        let mut x = BundleVectorField::zero(chart.clone());
        x.set(Coord::Q(0), Expr::one());
        let verdict = is_k_contact_symmetry(&lag, &x).unwrap();
        assert!(verdict.is_symmetry());
        let law = verdict.law.unwrap();
        assert_eq!(law.component(0), &parse("rho*v[q,1]", &chart).unwrap());
        assert_eq!(law.component(1), &parse("-tau*v[q,2]", &chart).unwrap());
    }

    #[test]
    fn zero_field_is_a_k_contact_symmetry_with_zero_law() {
        let lag = string_lagrangian();
        let chart = lag.chart().clone();
        let verdict =
            is_k_contact_symmetry(&lag, &BundleVectorField::zero(chart.clone())).unwrap();
        assert!(verdict.is_symmetry());
        let law = verdict.law.unwrap();
        assert!(law.components().iter().all(Expr::is_num_zero));
    }

    #[test]
    fn action_translation_fails_the_energy_condition() {
        let lag = string_lagrangian();
        let chart = lag.chart().clone();
        let mut x = BundleVectorField::zero(chart.clone());
        x.set(Coord::S(0), Expr::one());
        let verdict = is_k_contact_symmetry(&lag, &x).unwrap();
        assert!(!verdict.is_symmetry());
        // the failing condition is exactly 𝓛_X E_L = γ
        let energy = verdict
            .conditions
            .iter()
            .find(|c| c.name == "lie_energy")
            .unwrap();
        assert_eq!(energy.verdict, ZeroVerdict::ProvenNonzero);
    }

    #[test]
    fn natural_and_k_contact_laws_coincide_for_the_translation() {
        let lag = string_lagrangian();
        let chart = lag.chart().clone();
        let natural = is_natural_symmetry(&lag, &d_dq(&chart)).unwrap().law.unwrap();
        let mut x = BundleVectorField::zero(chart.clone());
        x.set(Coord::Q(0), Expr::one());
        let contact = is_k_contact_symmetry(&lag, &x).unwrap().law.unwrap();
        assert_eq!(natural.components(), contact.components());
    }

    #[test]
    fn cartan_like_field_reproduces_the_translation_law() {
        let lag = string_lagrangian();
        let chart = lag.chart().clone();
        // Z = ∂q + ∂s^t + g^x ∂s^x with g^t = 1 and g^x arbitrary
        let gx = parse("q^2 + v[q,2]", &chart).unwrap();
        let mut z = BundleVectorField::zero(chart.clone());
        z.set(Coord::Q(0), Expr::one());
        z.set(Coord::S(0), Expr::one());
        z.set(Coord::S(1), gx.clone());
        let g = vec![Expr::one(), gx];
        let verdict = cartan_like_check(&lag, &z, &g).unwrap();
        assert!(verdict.is_symmetry());
        let law = verdict.law.unwrap();
        assert_eq!(law.component(0), &parse("rho*v[q,1]", &chart).unwrap());
        assert_eq!(law.component(1), &parse("-tau*v[q,2]", &chart).unwrap());
    }

    #[test]
    fn cartan_like_energy_condition_pins_the_constant() {
        let lag = string_lagrangian();
        let chart = lag.chart().clone();
        // For Z = ∂q + ∂s^t the energy condition forces g^t = 1: with
        // g^t = 2 the residual is 𝓛_Z E_L + 2∂L/∂s^t = γ − 2γ ≠ 0.
        let mut z = BundleVectorField::zero(chart.clone());
        z.set(Coord::Q(0), Expr::one());
        z.set(Coord::S(0), Expr::one());
        let g = vec![Expr::num(2.0), Expr::zero()];
        let verdict = cartan_like_check(&lag, &z, &g).unwrap();
        assert!(!verdict.is_symmetry());
        let energy = verdict
            .conditions
            .iter()
            .find(|c| c.name == "lie_energy")
            .unwrap();
        assert_eq!(energy.verdict, ZeroVerdict::ProvenNonzero);
    }

    fn random_poly(rng: &mut ChaCha8Rng, chart: &BundleChart, terms: usize) -> Expr {
        let syms: Vec<Symbol> = chart.coords().into_iter().map(Coord::symbol).collect();
        let mut parts = Vec::new();
        for _ in 0..terms {
            let mut factors = vec![Expr::num(rng.gen_range(-2.0..2.0))];
            for _ in 0..rng.gen_range(0..3usize) {
                let s = syms[rng.gen_range(0..syms.len())].clone();
                factors.push(Expr::sym(s));
            }
            parts.push(Expr::Mul(factors));
        }
        Expr::add(parts)
    }

    #[test]
    fn cartan_with_zero_g_matches_k_contact_on_random_pairs() {
        let chart = string_chart();
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        let g = vec![Expr::zero(), Expr::zero()];
        for _ in 0..20 {
            let l = random_poly(&mut rng, &chart, 4);
            let Ok(lag) = Lagrangian::new(chart.clone(), l) else {
                continue;
            };
            let comps: Vec<Expr> = (0..chart.dim())
                .map(|_| random_poly(&mut rng, &chart, 2))
                .collect();
            let x = BundleVectorField::new(chart.clone(), comps).unwrap();
            let contact = is_k_contact_symmetry(&lag, &x).unwrap();
            let cartan = cartan_like_check(&lag, &x, &g).unwrap();
            assert_eq!(contact.conditions.len(), cartan.conditions.len());
            for (a, b) in contact.conditions.iter().zip(&cartan.conditions) {
                assert_eq!(a.verdict, b.verdict, "{} vs {}", a.name, b.name);
            }
        }
    }

    #[test]
    fn complete_lifts_plus_action_terms_are_newtonoid_for_any_sopde() {
        let chart = string_chart();
        let gamma = string_sopde();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let z = BaseVectorField::new(
                chart.clone(),
                vec![{
                    // base components may only involve q
                    let coeff = rng.gen_range(-2.0..2.0);
                    let deg = rng.gen_range(0..3i64);
                    Expr::mul(vec![
                        Expr::num(coeff),
                        Expr::pow(Expr::sym(Symbol::Coord { i: 0 }), deg),
                    ])
                }],
            )
            .unwrap();
            let mut x = z.complete_lift();
            for alpha in 0..chart.k() {
                x.set(Coord::S(alpha), random_poly(&mut rng, &chart, 2));
            }
            let verdict = is_newtonoid(&gamma, &x).unwrap();
            assert!(verdict.is_symmetry(), "{:?}", verdict.conditions);
        }
    }

    #[test]
    fn velocity_direction_is_not_newtonoid() {
        let chart = string_chart();
        let gamma = string_sopde();
        let mut x = BundleVectorField::zero(chart.clone());
        x.set(Coord::V(0, 1), Expr::one());
        let verdict = is_newtonoid(&gamma, &x).unwrap();
        assert!(!verdict.is_symmetry());
    }

    #[test]
    fn zero_field_is_newtonoid() {
        let chart = string_chart();
        let gamma = string_sopde();
        let verdict = is_newtonoid(&gamma, &BundleVectorField::zero(chart)).unwrap();
        assert!(verdict.is_symmetry());
    }

    #[test]
    fn k_contact_symmetry_is_newtonoid_for_the_string_sopde() {
        let lag = string_lagrangian();
        let chart = lag.chart().clone();
        let mut x = BundleVectorField::zero(chart.clone());
        x.set(Coord::Q(0), Expr::one());
        assert!(is_k_contact_symmetry(&lag, &x).unwrap().is_symmetry());
        let verdict = is_newtonoid(&string_sopde(), &x).unwrap();
        assert!(verdict.is_symmetry());
    }

    #[test]
    fn corollary_with_zero_constants_recovers_the_translation_law() {
        let lag = string_lagrangian();
        let chart = lag.chart().clone();
        let verdict = newtonoid_corollary_check(&lag, &d_dq(&chart), &[0.0, 0.0]).unwrap();
        assert!(verdict.is_symmetry());
        let law = verdict.law.unwrap();
        assert_eq!(law.component(0), &parse("rho*v[q,1]", &chart).unwrap());
        assert_eq!(law.component(1), &parse("-tau*v[q,2]", &chart).unwrap());
    }

    #[test]
    fn corollary_allows_constants_only_where_l_ignores_s() {
        let lag = string_lagrangian();
        let chart = lag.chart().clone();
        // K^t shifts X(L) by −γK^t, so K^t must vanish for the damped string
        let bad = newtonoid_corollary_check(&lag, &d_dq(&chart), &[1.0, 1.0]).unwrap();
        assert!(!bad.is_symmetry());
        let good = newtonoid_corollary_check(&lag, &d_dq(&chart), &[0.0, 1.0]).unwrap();
        assert!(good.is_symmetry());
        let law = good.law.unwrap();
        assert_eq!(law.component(0), &parse("rho*v[q,1]", &chart).unwrap());
        assert_eq!(law.component(1), &parse("-tau*v[q,2] - 1", &chart).unwrap());
    }

    #[test]
    fn corollary_rejects_non_natural_base_fields() {
        let lag = string_lagrangian();
        let chart = lag.chart().clone();
        let z = BaseVectorField::new(chart.clone(), vec![parse("q", &chart).unwrap()]).unwrap();
        let verdict = newtonoid_corollary_check(&lag, &z, &[0.0, 0.0]).unwrap();
        assert!(!verdict.is_symmetry());
        assert!(verdict.law.is_none());
    }

    #[test]
    fn precheck_accepts_the_translation_against_the_string_sopde() {
        let lag = string_lagrangian();
        let chart = lag.chart().clone();
        let mut x = BundleVectorField::zero(chart.clone());
        x.set(Coord::Q(0), Expr::one());
        let verdict = dynamical_symmetry_precheck(&lag, &string_sopde(), &x).unwrap();
        assert!(verdict.is_symmetry());
    }

    fn probe_fixture() -> (Lagrangian, FieldSolution) {
        let chart = BundleChart::with_params(
            1,
            2,
            &["q"],
            &[("rho", 1.0), ("tau", 1.0), ("gamma", 0.4)],
        );
        let l = parse("(rho/2)*v[q,1]^2 - (tau/2)*v[q,2]^2 - gamma*s[1]", &chart).unwrap();
        let lag = Lagrangian::new(chart, l).unwrap();
        let params = StringParams {
            rho: 1.0,
            tau: 1.0,
            gamma: 0.4,
        };
        let m = manufactured_string_solution(&params, 1.0).unwrap();
        let grid = GridSpec::from_extents([0.5, 1.0], [33, 33]).unwrap();
        let sol = m.sample(&grid);
        let sol = reconstruct_s_fields(&lag, &sol, Gauge::ZeroAllButFirst).unwrap();
        (lag, sol)
    }

    #[test]
    fn probe_reports_zero_excess_for_the_translation() {
        let (lag, sol) = probe_fixture();
        let chart = lag.chart().clone();
        let mut x = BundleVectorField::zero(chart);
        x.set(Coord::Q(0), Expr::one());
        let report = dynamical_symmetry_probe(&lag, &x, &sol, 1e-2).unwrap();
        assert!(
            report.excess_fields[0].abs() < 1e-10,
            "field excess {}",
            report.excess_fields[0]
        );
        assert!(
            report.excess_divergence.abs() < 1e-10,
            "divergence excess {}",
            report.excess_divergence
        );
    }

    #[test]
    fn probe_reports_zero_excess_for_the_zero_field() {
        let (lag, sol) = probe_fixture();
        let chart = lag.chart().clone();
        let x = BundleVectorField::zero(chart);
        let report = dynamical_symmetry_probe(&lag, &x, &sol, 1e-2).unwrap();
        assert_eq!(report.excess_fields[0], 0.0);
        assert_eq!(report.excess_divergence, 0.0);
    }

    #[test]
    fn probe_sees_linear_growth_for_the_scaling_field() {
        let (lag, sol) = probe_fixture();
        let chart = lag.chart().clone();
        let mut x = BundleVectorField::zero(chart.clone());
        x.set(Coord::Q(0), parse("q", &chart).unwrap());
        let small = dynamical_symmetry_probe(&lag, &x, &sol, 1e-3).unwrap();
        let large = dynamical_symmetry_probe(&lag, &x, &sol, 1e-2).unwrap();
        assert!(small.excess_divergence > 0.0);
        let ratio = large.excess_divergence / small.excess_divergence;
        assert!(
            (5.0..20.0).contains(&ratio),
            "expected ~10x growth, got {ratio} ({} -> {})",
            small.excess_divergence,
            large.excess_divergence
        );
    }

    #[test]
    fn probe_rejects_fields_violating_the_equations() {
        let (lag, sol) = probe_fixture();
        let chart = lag.chart().clone();
        let mut bad = sol.clone();
        for v in bad.phi[0].iter_mut() {
            *v += 10.0 * (v.abs() + 1.0);
        }
        let x = BundleVectorField::zero(chart);
        // the perturbed grid is no longer smooth, so the precheck must fire
        for i0 in 0..33 {
            for i1 in 0..33 {
                bad.phi[0][[i0, i1]] += if (i0 + i1) % 2 == 0 { 5.0 } else { -5.0 };
            }
        }
        let err = dynamical_symmetry_probe(&lag, &x, &bad, 1e-2);
        assert!(matches!(err, Err(SymmetryError::BaselineResidual { .. })));
    }

    #[test]
    fn dissipation_law_rejects_jets_and_bad_arity() {
        let chart = string_chart();
        assert!(matches!(
            DissipationLaw::new(chart.clone(), vec![Expr::one()]),
            Err(SymmetryError::ComponentCount { .. })
        ));
        let jet = Expr::sym(Symbol::JetFirst { i: 0, alpha: 0 });
        assert!(matches!(
            DissipationLaw::new(chart.clone(), vec![jet, Expr::zero()]),
            Err(SymmetryError::JetInLaw(_))
        ));
    }
}
