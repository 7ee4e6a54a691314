//! Derivation engine: energy, contact forms, Hessian/regularity, and the
//! several residual systems attached to a Lagrangian on the phase bundle.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::bundle::{BundleError, KVectorField, OneForm, Sopde};
use crate::chart::{BundleChart, Coord};
use crate::expr::{EvalError, Expr, Point, Symbol, ZeroConfig};
use crate::solver::{FieldSolution, GridNorms, SolverError};

#[derive(Debug, Clone, thiserror::Error)]
pub enum LagrangianError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("Lagrangian may not reference jet symbol {0:?}")]
    JetInLagrangian(Symbol),
    #[error("operands belong to different charts")]
    ChartMismatch,
    #[error("k-vector field is not a solution of the field equations: {0}")]
    NotMember(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A Lagrangian function over (qⁱ, vⁱ_α, s^α) and parameters.
#[derive(Debug, Clone)]
pub struct Lagrangian {
    chart: Arc<BundleChart>,
    l: Expr,
}

/// Point bindings for one grid node of a solution: qⁱ ↦ φⁱ, vⁱ_α ↦ aⁱ_α,
/// s^α ↦ s^α, parameters at their defaults.
pub fn grid_point(chart: &BundleChart, sol: &FieldSolution, idx: [usize; 2]) -> Point {
    let mut p = Point::with_chart_defaults(chart);
    for i in 0..chart.n() {
        p.set(Symbol::Coord { i }, sol.phi[i][idx]);
        for alpha in 0..chart.k() {
            p.set(Symbol::Velocity { i, alpha }, sol.jets[i][alpha][idx]);
        }
    }
    for alpha in 0..chart.k() {
        p.set(Symbol::Action { alpha }, sol.s[alpha][idx]);
    }
    p
}

impl Lagrangian {
    pub fn new(chart: Arc<BundleChart>, l: Expr) -> Result<Self, LagrangianError> {
        for sym in l.free_symbols() {
            chart.check_symbol(&sym).map_err(BundleError::from)?;
            if matches!(
                sym,
                Symbol::JetFirst { .. } | Symbol::JetSecond { .. } | Symbol::JetAction { .. }
            ) {
                return Err(LagrangianError::JetInLagrangian(sym));
            }
        }
        Ok(Lagrangian {
            chart,
            l: l.normalize(),
        })
    }

    pub fn chart(&self) -> &Arc<BundleChart> {
        &self.chart
    }

    pub fn expr(&self) -> &Expr {
        &self.l
    }

    fn dv(&self, i: usize, alpha: usize) -> Expr {
        self.l.differentiate(&Symbol::Velocity { i, alpha })
    }

    fn dq(&self, i: usize) -> Expr {
        self.l.differentiate(&Symbol::Coord { i })
    }

    fn ds(&self, alpha: usize) -> Expr {
        self.l.differentiate(&Symbol::Action { alpha })
    }

    /// E_L = Δ(L) − L = vⁱ_α ∂L/∂vⁱ_α − L.
    pub fn energy(&self) -> Expr {
        let mut terms = Vec::new();
        for i in 0..self.chart.n() {
            for alpha in 0..self.chart.k() {
                terms.push(Expr::mul(vec![
                    Expr::sym(Symbol::Velocity { i, alpha }),
                    self.dv(i, alpha),
                ]));
            }
        }
        terms.push(Expr::neg(self.l.clone()));
        Expr::add(terms).normalize()
    }

    /// η^α_L = ds^α − (∂L/∂vⁱ_α) dqⁱ for α = 1..k.
    pub fn contact_forms(&self) -> Vec<OneForm> {
        (0..self.chart.k())
            .map(|alpha| {
                let mut eta = OneForm::zero(self.chart.clone());
                eta.set(Coord::S(alpha), Expr::one());
                for i in 0..self.chart.n() {
                    eta.set(Coord::Q(i), Expr::neg(self.dv(i, alpha)).normalize());
                }
                eta
            })
            .collect()
    }

    /// g^{αβ}_{ij} = ∂²L/∂vⁱ_α∂v^j_β, as an nk×nk matrix with row index
    /// (i, α) flattened as i·k + α.
    pub fn hessian(&self) -> HessianMatrix {
        let n = self.chart.n();
        let k = self.chart.k();
        let mut entries = vec![vec![Expr::zero(); n * k]; n * k];
        for i in 0..n {
            for alpha in 0..k {
                for j in 0..n {
                    for beta in 0..k {
                        entries[i * k + alpha][j * k + beta] = self
                            .dv(i, alpha)
                            .differentiate(&Symbol::Velocity { i: j, alpha: beta })
                            .normalize();
                    }
                }
            }
        }
        HessianMatrix {
            chart: self.chart.clone(),
            entries,
        }
    }

    pub fn is_regular(&self) -> RegularityVerdict {
        self.is_regular_with(&ZeroConfig::default())
    }

    pub fn is_regular_with(&self, cfg: &ZeroConfig) -> RegularityVerdict {
        let det = self.hessian().determinant();
        let coord_dependent = det
            .free_symbols()
            .iter()
            .any(|s| !matches!(s, Symbol::Param(_)));
        if coord_dependent {
            // no global verdict: sample the determinant over the zero-test
            // point cloud and report what was seen
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            let symbols: Vec<Symbol> = det.free_symbols().into_iter().collect();
            let mut samples = Vec::new();
            for _ in 0..cfg.samples {
                let mut p = Point::new();
                for s in &symbols {
                    p.set(s.clone(), rng.gen_range(cfg.range.0..cfg.range.1));
                }
                if let Ok(v) = det.evaluate(&p, &self.chart) {
                    samples.push(v);
                }
            }
            return RegularityVerdict::Pointwise(PointwiseReport {
                determinant: det,
                samples,
            });
        }
        if det.is_zero_with(&self.chart, cfg).is_zeroish() {
            RegularityVerdict::Singular
        } else {
            RegularityVerdict::Regular
        }
    }

    /// Substitution vⁱ_α ↦ aⁱ_α used when passing from phase-bundle
    /// expressions to jet expressions along a prolongation.
    fn jet_substitution(&self) -> BTreeMap<Symbol, Expr> {
        let mut map = BTreeMap::new();
        for i in 0..self.chart.n() {
            for alpha in 0..self.chart.k() {
                map.insert(
                    Symbol::Velocity { i, alpha },
                    Expr::sym(Symbol::JetFirst { i, alpha }),
                );
            }
        }
        map
    }

    /// The second-order jet residual system
    /// R_i = g^{αβ}_{ij} w^j_{αβ} + (∂²L/∂q^j∂vⁱ_α) a^j_α
    ///       + (∂²L/∂s^β∂vⁱ_α) r^β_α − ∂L/∂qⁱ − (∂L/∂s^α)(∂L/∂vⁱ_α),
    /// with vⁱ_α replaced by aⁱ_α throughout, plus the divergence
    /// constraint D = r^α_α − L.
    pub fn euler_lagrange_residuals(&self) -> JetResidualSystem {
        let n = self.chart.n();
        let k = self.chart.k();
        let sub = self.jet_substitution();
        let mut residuals = Vec::with_capacity(n);
        for i in 0..n {
            let mut terms = Vec::new();
            for alpha in 0..k {
                let dvia = self.dv(i, alpha);
                for j in 0..n {
                    for beta in 0..k {
                        let g = dvia
                            .differentiate(&Symbol::Velocity { i: j, alpha: beta });
                        terms.push(Expr::mul(vec![
                            g,
                            Expr::sym(Symbol::jet_second(j, alpha, beta)),
                        ]));
                    }
                    terms.push(Expr::mul(vec![
                        dvia.differentiate(&Symbol::Coord { i: j }),
                        Expr::sym(Symbol::JetFirst { i: j, alpha }),
                    ]));
                }
                for beta in 0..k {
                    terms.push(Expr::mul(vec![
                        dvia.differentiate(&Symbol::Action { alpha: beta }),
                        Expr::sym(Symbol::JetAction { beta, alpha }),
                    ]));
                }
                terms.push(Expr::neg(Expr::mul(vec![self.ds(alpha), dvia])));
            }
            terms.push(Expr::neg(self.dq(i)));
            residuals.push(Expr::add(terms).substitute(&sub).normalize());
        }
        let mut div_terms: Vec<Expr> = (0..k)
            .map(|alpha| Expr::sym(Symbol::JetAction { beta: alpha, alpha }))
            .collect();
        div_terms.push(Expr::neg(self.l.clone()));
        let divergence = Expr::add(div_terms).substitute(&sub).normalize();
        JetResidualSystem {
            chart: self.chart.clone(),
            residuals,
            divergence,
        }
    }

    /// Membership equations for a SOPDE in 𝔛ᵏ_L: per i,
    /// Γ_α(∂L/∂vⁱ_α) − ∂L/∂qⁱ − (∂L/∂s^α)(∂L/∂vⁱ_α), plus the trace
    /// condition Γ^α_α − L.
    pub fn sopde_field_residuals(
        &self,
        sopde: &Sopde,
    ) -> Result<(Vec<Expr>, Expr), LagrangianError> {
        if !Arc::ptr_eq(&self.chart, sopde.chart()) {
            return Err(LagrangianError::ChartMismatch);
        }
        let n = self.chart.n();
        let k = self.chart.k();
        let mut family = Vec::with_capacity(n);
        for i in 0..n {
            let mut terms = Vec::new();
            for alpha in 0..k {
                let dvia = self.dv(i, alpha);
                terms.push(sopde.member(alpha).apply(&dvia));
                terms.push(Expr::neg(Expr::mul(vec![self.ds(alpha), dvia])));
            }
            terms.push(Expr::neg(self.dq(i)));
            family.push(Expr::add(terms).normalize());
        }
        let mut trace: Vec<Expr> = (0..k).map(|a| sopde.gamma_s(a, a).clone()).collect();
        trace.push(Expr::neg(self.l.clone()));
        Ok((family, Expr::add(trace).normalize()))
    }

    /// The four local residual families of the geometric field equations,
    /// for an arbitrary (not necessarily SOPDE) k-vector field.
    pub fn geometric_equation_residuals(
        &self,
        x: &KVectorField,
    ) -> Result<GeometricResiduals, LagrangianError> {
        if !Arc::ptr_eq(&self.chart, x.chart()) {
            return Err(LagrangianError::ChartMismatch);
        }
        let n = self.chart.n();
        let k = self.chart.k();
        let slip = |alpha: usize, j: usize| -> Expr {
            Expr::sub(
                x.member(alpha).component(Coord::Q(j)).clone(),
                Expr::sym(Symbol::Velocity { i: j, alpha }),
            )
        };
        // (X_α^j − v^j_α) ∂²L/∂s^β∂v^j_α, free β
        let eq1 = (0..k)
            .map(|beta| {
                let mut terms = Vec::new();
                for alpha in 0..k {
                    for j in 0..n {
                        terms.push(Expr::mul(vec![
                            slip(alpha, j),
                            self.dv(j, alpha).differentiate(&Symbol::Action { alpha: beta }),
                        ]));
                    }
                }
                Expr::add(terms).normalize()
            })
            .collect();
        // (X_α^j − v^j_α) ∂²L/∂vⁱ_β∂v^j_α, free (i, β)
        let eq2 = (0..n)
            .map(|i| {
                (0..k)
                    .map(|beta| {
                        let mut terms = Vec::new();
                        for alpha in 0..k {
                            for j in 0..n {
                                terms.push(Expr::mul(vec![
                                    slip(alpha, j),
                                    self.dv(j, alpha)
                                        .differentiate(&Symbol::Velocity { i, alpha: beta }),
                                ]));
                            }
                        }
                        Expr::add(terms).normalize()
                    })
                    .collect()
            })
            .collect();
        // free i
        let eq3 = (0..n)
            .map(|i| {
                let mut terms = vec![self.dq(i)];
                for alpha in 0..k {
                    let dvia = self.dv(i, alpha);
                    for j in 0..n {
                        terms.push(Expr::mul(vec![
                            slip(alpha, j),
                            self.dv(j, alpha).differentiate(&Symbol::Coord { i }),
                        ]));
                        terms.push(Expr::neg(Expr::mul(vec![
                            x.member(alpha).component(Coord::Q(j)).clone(),
                            dvia.differentiate(&Symbol::Coord { i: j }),
                        ])));
                        for beta in 0..k {
                            terms.push(Expr::neg(Expr::mul(vec![
                                x.member(alpha).component(Coord::V(j, beta)).clone(),
                                dvia.differentiate(&Symbol::Velocity { i: j, alpha: beta }),
                            ])));
                        }
                    }
                    for beta in 0..k {
                        terms.push(Expr::neg(Expr::mul(vec![
                            x.member(alpha).component(Coord::S(beta)).clone(),
                            dvia.differentiate(&Symbol::Action { alpha: beta }),
                        ])));
                    }
                    terms.push(Expr::mul(vec![self.ds(alpha), dvia]));
                }
                Expr::add(terms).normalize()
            })
            .collect();
        // scalar: L + (X_α^j − v^j_α) ∂L/∂v^j_α − X_α^α
        let mut terms = vec![self.l.clone()];
        for alpha in 0..k {
            for j in 0..n {
                terms.push(Expr::mul(vec![slip(alpha, j), self.dv(j, alpha)]));
            }
            terms.push(Expr::neg(
                x.member(alpha).component(Coord::S(alpha)).clone(),
            ));
        }
        let eq4 = Expr::add(terms).normalize();
        Ok(GeometricResiduals {
            eq1,
            eq2,
            eq3,
            eq4,
        })
    }

    /// Pointwise compatibility between a solution grid and a SOPDE member
    /// of 𝔛ᵏ_L: the Hessian-weighted mismatch between Γⁱ_{αβ}∘φ and the
    /// discrete second jets (plus the s-jet mismatch weighted by
    /// ∂²L/∂s∂v), and the trace condition.
    pub fn solution_sopde_compatibility(
        &self,
        sopde: &Sopde,
        sol: &FieldSolution,
    ) -> Result<CompatibilityReport, LagrangianError> {
        let (family, trace) = self.sopde_field_residuals(sopde)?;
        for r in family.iter().chain(std::iter::once(&trace)) {
            if !r.is_zero(&self.chart).is_zeroish() {
                return Err(LagrangianError::NotMember(
                    r.to_dsl(&self.chart),
                ));
            }
        }
        let n = self.chart.n();
        let k = self.chart.k();
        if sol.n_fields() != n || sol.s.len() != k {
            return Err(LagrangianError::Solver(SolverError::GridMismatch(format!(
                "solution has {} fields / {} s-components; chart needs {n} / {k}",
                sol.n_fields(),
                sol.s.len()
            ))));
        }
        // discrete second jets and s-jets
        let mut w = Vec::new();
        for i in 0..n {
            let mut per_i = Vec::new();
            for alpha in 0..k {
                for beta in 0..k {
                    per_i.push(sol.second_jet(i, alpha, beta));
                }
            }
            w.push(per_i);
        }
        let mut s_jets = Vec::new();
        for beta in 0..k {
            for alpha in 0..k {
                s_jets.push(crate::solver::difference(&sol.s[beta], &sol.grid, alpha));
            }
        }
        let hess = self.hessian();
        let mut xiel0_sq = 0.0;
        let mut xiel0_max: f64 = 0.0;
        let mut trace_sq = 0.0;
        let mut trace_max: f64 = 0.0;
        let mut count = 0usize;
        let mut failure: Option<EvalError> = None;
        sol.for_interior(|idx| {
            if failure.is_some() {
                return;
            }
            let p = grid_point(&self.chart, sol, idx);
            let mut eval = |e: &Expr| -> f64 {
                match e.evaluate(&p, &self.chart) {
                    Ok(v) => v,
                    Err(err) => {
                        failure = Some(err);
                        f64::NAN
                    }
                }
            };
            for i in 0..n {
                let mut r = 0.0;
                for alpha in 0..k {
                    for beta in 0..k {
                        for j in 0..n {
                            let g = eval(hess.entry(i, alpha, j, beta));
                            let gamma = eval(sopde.gamma_v(alpha, j, beta));
                            r += g * (gamma - w[j][alpha * k + beta][idx]);
                        }
                        let wgt = eval(
                            &self
                                .dv(i, alpha)
                                .differentiate(&Symbol::Action { alpha: beta }),
                        );
                        if wgt != 0.0 {
                            let gamma = eval(sopde.gamma_s(alpha, beta));
                            r += wgt * (gamma - s_jets[beta * k + alpha][idx]);
                        }
                    }
                }
                xiel0_max = xiel0_max.max(r.abs());
                xiel0_sq += r * r;
            }
            let l_val = eval(&self.l);
            let mut tr = 0.0;
            let mut div = 0.0;
            for alpha in 0..k {
                tr += eval(sopde.gamma_s(alpha, alpha));
                div += s_jets[alpha * k + alpha][idx];
            }
            let t = (tr - l_val).abs().max((div - l_val).abs());
            trace_max = trace_max.max(t);
            trace_sq += t * t;
            count += 1;
        });
        if let Some(err) = failure {
            return Err(LagrangianError::Eval(err));
        }
        Ok(CompatibilityReport {
            xiel0: GridNorms {
                linf: xiel0_max,
                l2: (xiel0_sq / (count.max(1) * n) as f64).sqrt(),
            },
            trace: GridNorms {
                linf: trace_max,
                l2: (trace_sq / count.max(1) as f64).sqrt(),
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct CompatibilityReport {
    pub xiel0: GridNorms,
    pub trace: GridNorms,
}

/// Jet-space residuals of the field equations plus divergence constraint.
#[derive(Debug, Clone)]
pub struct JetResidualSystem {
    pub chart: Arc<BundleChart>,
    pub residuals: Vec<Expr>,
    pub divergence: Expr,
}

#[derive(Debug, Clone)]
pub struct HessianMatrix {
    chart: Arc<BundleChart>,
    /// row (i, α) ↦ i·k + α, column likewise
    entries: Vec<Vec<Expr>>,
}

impl HessianMatrix {
    pub fn entry(&self, i: usize, alpha: usize, j: usize, beta: usize) -> &Expr {
        let k = self.chart.k();
        &self.entries[i * k + alpha][j * k + beta]
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    /// Symbolic determinant by Laplace expansion (the examples have
    /// nk ≤ 4).
    pub fn determinant(&self) -> Expr {
        fn det(m: &[Vec<Expr>], cols: &[usize]) -> Expr {
            let row = m.len() - cols.len();
            if cols.is_empty() {
                return Expr::one();
            }
            let mut terms = Vec::new();
            for (pos, &c) in cols.iter().enumerate() {
                if m[row][c].is_num_zero() {
                    continue;
                }
                let rest: Vec<usize> = cols
                    .iter()
                    .copied()
                    .filter(|&x| x != c)
                    .collect();
                let minor = det(m, &rest);
                let term = Expr::mul(vec![m[row][c].clone(), minor]);
                terms.push(if pos % 2 == 0 {
                    term
                } else {
                    Expr::neg(term)
                });
            }
            Expr::add(terms)
        }
        let cols: Vec<usize> = (0..self.entries.len()).collect();
        det(&self.entries, &cols).normalize()
    }
}

#[derive(Debug, Clone)]
pub enum RegularityVerdict {
    Regular,
    Singular,
    /// The determinant depends on coordinates: no global verdict, only
    /// sampled data.
    Pointwise(PointwiseReport),
}

#[derive(Debug, Clone)]
pub struct PointwiseReport {
    pub determinant: Expr,
    pub samples: Vec<f64>,
}

/// Residual families (primeq)–(A-E-L-eqs4) of the geometric equations.
#[derive(Debug, Clone)]
pub struct GeometricResiduals {
    /// free index β (k entries)
    pub eq1: Vec<Expr>,
    /// free indices (i, β)
    pub eq2: Vec<Vec<Expr>>,
    /// free index i
    pub eq3: Vec<Expr>,
    /// scalar
    pub eq4: Expr,
}

impl GeometricResiduals {
    pub fn all(&self) -> Vec<&Expr> {
        let mut out: Vec<&Expr> = self.eq1.iter().collect();
        for row in &self.eq2 {
            out.extend(row.iter());
        }
        out.extend(self.eq3.iter());
        out.push(&self.eq4);
        out
    }

    pub fn all_vanish(&self, chart: &BundleChart, cfg: &ZeroConfig) -> bool {
        self.all()
            .into_iter()
            .all(|e| e.is_zero_with(chart, cfg).is_zeroish())
    }
}
