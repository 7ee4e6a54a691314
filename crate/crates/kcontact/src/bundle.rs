//! Geometric calculus on the phase bundle: vector fields and their lifts,
//! k-vector fields and SOPDEs, differential forms up to degree two, and the
//! Cartan operations connecting them.
//!
//! Every object carries an `Arc` to its chart; operations insist that both
//! operands come from the same chart instance.

use std::sync::Arc;

use crate::chart::{BundleChart, ChartError, Coord};
use crate::expr::{Expr, Symbol, ZeroConfig, ZeroVerdict};

#[derive(Debug, Clone, thiserror::Error)]
pub enum BundleError {
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("operands belong to different charts")]
    ChartMismatch,
    #[error("expected {expected} components, got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error("base vector field component depends on fibre symbol {0:?}")]
    NotBase(Symbol),
    #[error("vector-field component references jet symbol {0:?}")]
    JetInComponent(Symbol),
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
}

fn same_chart(a: &Arc<BundleChart>, b: &Arc<BundleChart>) -> Result<(), BundleError> {
    if Arc::ptr_eq(a, b) {
        Ok(())
    } else {
        Err(BundleError::ChartMismatch)
    }
}

/// Checks that an expression only uses chart coordinates (no jet symbols)
/// and declared parameters.
fn check_chart_closed(chart: &BundleChart, e: &Expr) -> Result<(), BundleError> {
    for sym in e.free_symbols() {
        chart.check_symbol(&sym)?;
        if matches!(
            sym,
            Symbol::JetFirst { .. } | Symbol::JetSecond { .. } | Symbol::JetAction { .. }
        ) {
            return Err(BundleError::JetInComponent(sym));
        }
    }
    Ok(())
}

/// A vector field on the base manifold Q: components depend on the qⁱ only.
#[derive(Debug, Clone)]
pub struct BaseVectorField {
    chart: Arc<BundleChart>,
    components: Vec<Expr>,
}

impl BaseVectorField {
    pub fn new(chart: Arc<BundleChart>, components: Vec<Expr>) -> Result<Self, BundleError> {
        if components.len() != chart.n() {
            return Err(BundleError::ComponentCount {
                expected: chart.n(),
                got: components.len(),
            });
        }
        for c in &components {
            check_chart_closed(&chart, c)?;
            for sym in c.free_symbols() {
                if matches!(sym, Symbol::Velocity { .. } | Symbol::Action { .. }) {
                    return Err(BundleError::NotBase(sym));
                }
            }
        }
        Ok(BaseVectorField { chart, components })
    }

    pub fn zero(chart: Arc<BundleChart>) -> Self {
        let n = chart.n();
        BaseVectorField {
            chart,
            components: vec![Expr::zero(); n],
        }
    }

    pub fn chart(&self) -> &Arc<BundleChart> {
        &self.chart
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.components[i]
    }

    /// Vertical α-lift: Zⁱ ∂/∂vⁱ_α.
    pub fn vertical_lift(&self, alpha: usize) -> Result<BundleVectorField, BundleError> {
        let k = self.chart.k();
        if alpha >= k {
            return Err(BundleError::IndexOutOfRange {
                index: alpha,
                limit: k,
            });
        }
        let mut x = BundleVectorField::zero(self.chart.clone());
        for i in 0..self.chart.n() {
            x.set(Coord::V(i, alpha), self.components[i].clone());
        }
        Ok(x)
    }

    /// Complete lift: Zⁱ ∂/∂qⁱ + v^j_α ∂Zⁱ/∂q^j ∂/∂vⁱ_α.
    pub fn complete_lift(&self) -> BundleVectorField {
        let n = self.chart.n();
        let k = self.chart.k();
        let mut x = BundleVectorField::zero(self.chart.clone());
        for i in 0..n {
            x.set(Coord::Q(i), self.components[i].clone());
            for alpha in 0..k {
                let mut terms = Vec::new();
                for j in 0..n {
                    terms.push(Expr::mul(vec![
                        Expr::sym(Symbol::Velocity { i: j, alpha }),
                        self.components[i].differentiate(&Symbol::Coord { i: j }),
                    ]));
                }
                x.set(Coord::V(i, alpha), Expr::add(terms));
            }
        }
        x
    }
}

/// A vector field on the full phase bundle, stored as one component per
/// chart coordinate in flat-index order.
#[derive(Debug, Clone)]
pub struct BundleVectorField {
    chart: Arc<BundleChart>,
    components: Vec<Expr>,
}

impl BundleVectorField {
    pub fn new(chart: Arc<BundleChart>, components: Vec<Expr>) -> Result<Self, BundleError> {
        if components.len() != chart.dim() {
            return Err(BundleError::ComponentCount {
                expected: chart.dim(),
                got: components.len(),
            });
        }
        for c in &components {
            check_chart_closed(&chart, c)?;
        }
        Ok(BundleVectorField { chart, components })
    }

    pub fn zero(chart: Arc<BundleChart>) -> Self {
        let dim = chart.dim();
        BundleVectorField {
            chart,
            components: vec![Expr::zero(); dim],
        }
    }

    pub fn chart(&self) -> &Arc<BundleChart> {
        &self.chart
    }

    pub fn component(&self, c: Coord) -> &Expr {
        &self.components[self.chart.coord_index(c)]
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn set(&mut self, c: Coord, e: Expr) -> &mut Self {
        self.components[self.chart.coord_index(c)] = e;
        self
    }

    /// Directional derivative X(f) = Σ_c X^c ∂f/∂c.
    pub fn apply(&self, f: &Expr) -> Expr {
        let mut terms = Vec::new();
        for (idx, coord) in self.chart.coords().into_iter().enumerate() {
            if self.components[idx].is_num_zero() {
                continue;
            }
            terms.push(Expr::mul(vec![
                self.components[idx].clone(),
                f.differentiate(&coord.symbol()),
            ]));
        }
        Expr::add(terms).normalize()
    }

    /// J^α X: the qⁱ-components of X become the vⁱ_α-components of the
    /// result; everything else is zero.
    pub fn apply_k_tangent(&self, alpha: usize) -> Result<BundleVectorField, BundleError> {
        let k = self.chart.k();
        if alpha >= k {
            return Err(BundleError::IndexOutOfRange {
                index: alpha,
                limit: k,
            });
        }
        let mut out = BundleVectorField::zero(self.chart.clone());
        for i in 0..self.chart.n() {
            out.set(Coord::V(i, alpha), self.component(Coord::Q(i)).clone());
        }
        Ok(out)
    }

    /// [X, Y]^c = X(Y^c) − Y(X^c).
    pub fn lie_bracket(&self, other: &BundleVectorField) -> Result<BundleVectorField, BundleError> {
        same_chart(&self.chart, &other.chart)?;
        let components = other
            .components
            .iter()
            .zip(&self.components)
            .map(|(yc, xc)| Expr::sub(self.apply(yc), other.apply(xc)).normalize())
            .collect();
        Ok(BundleVectorField {
            chart: self.chart.clone(),
            components,
        })
    }

    pub fn scale(&self, factor: &Expr) -> BundleVectorField {
        BundleVectorField {
            chart: self.chart.clone(),
            components: self
                .components
                .iter()
                .map(|c| Expr::mul(vec![factor.clone(), c.clone()]).normalize())
                .collect(),
        }
    }

    pub fn addv(&self, other: &BundleVectorField) -> Result<BundleVectorField, BundleError> {
        same_chart(&self.chart, &other.chart)?;
        Ok(BundleVectorField {
            chart: self.chart.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| Expr::add(vec![a.clone(), b.clone()]).normalize())
                .collect(),
        })
    }
}

/// Δ = vⁱ_α ∂/∂vⁱ_α.
pub fn liouville(chart: &Arc<BundleChart>) -> BundleVectorField {
    let mut x = BundleVectorField::zero(chart.clone());
    for i in 0..chart.n() {
        for alpha in 0..chart.k() {
            x.set(Coord::V(i, alpha), Expr::sym(Symbol::Velocity { i, alpha }));
        }
    }
    x
}

/// An ordered family (X₁, …, X_k) of bundle vector fields.
#[derive(Debug, Clone)]
pub struct KVectorField {
    chart: Arc<BundleChart>,
    fields: Vec<BundleVectorField>,
}

impl KVectorField {
    pub fn new(chart: Arc<BundleChart>, fields: Vec<BundleVectorField>) -> Result<Self, BundleError> {
        if fields.len() != chart.k() {
            return Err(BundleError::ComponentCount {
                expected: chart.k(),
                got: fields.len(),
            });
        }
        for f in &fields {
            same_chart(&chart, &f.chart)?;
        }
        Ok(KVectorField { chart, fields })
    }

    pub fn chart(&self) -> &Arc<BundleChart> {
        &self.chart
    }

    pub fn member(&self, alpha: usize) -> &BundleVectorField {
        &self.fields[alpha]
    }

    pub fn members(&self) -> &[BundleVectorField] {
        &self.fields
    }

    /// True iff the qⁱ-component of X_α is vⁱ_α for all i, α.
    pub fn is_sopde(&self) -> bool {
        for (alpha, x) in self.fields.iter().enumerate() {
            for i in 0..self.chart.n() {
                let diff = Expr::sub(
                    x.component(Coord::Q(i)).clone(),
                    Expr::sym(Symbol::Velocity { i, alpha }),
                );
                if !diff.is_zero(&self.chart).is_zeroish() {
                    return false;
                }
            }
        }
        true
    }

    pub fn check_integrability(&self, cfg: &ZeroConfig) -> IntegrabilityReport {
        let mut pairs = Vec::new();
        let k = self.chart.k();
        for alpha in 0..k {
            for beta in (alpha + 1)..k {
                let bracket = self.fields[alpha]
                    .lie_bracket(&self.fields[beta])
                    .expect("members share the chart");
                let components = self
                    .chart
                    .coords()
                    .into_iter()
                    .enumerate()
                    .map(|(idx, coord)| {
                        (coord, bracket.components[idx].is_zero_with(&self.chart, cfg))
                    })
                    .collect();
                pairs.push(PairBracket {
                    alpha,
                    beta,
                    components,
                });
            }
        }
        IntegrabilityReport { pairs }
    }
}

/// Bracket verdicts for one pair (α, β), one verdict per coordinate.
#[derive(Debug, Clone)]
pub struct PairBracket {
    pub alpha: usize,
    pub beta: usize,
    pub components: Vec<(Coord, ZeroVerdict)>,
}

impl PairBracket {
    pub fn vanishes(&self) -> bool {
        self.components.iter().all(|(_, v)| v.is_zeroish())
    }
}

#[derive(Debug, Clone)]
pub struct IntegrabilityReport {
    pub pairs: Vec<PairBracket>,
}

impl IntegrabilityReport {
    /// True when every pairwise bracket vanishes (vacuously true for k=1).
    pub fn is_integrable(&self) -> bool {
        self.pairs.iter().all(PairBracket::vanishes)
    }
}

/// A SOPDE: X_α = vⁱ_α ∂/∂qⁱ + Γⁱ_{αβ} ∂/∂vⁱ_β + Γ^β_α ∂/∂s^β.
///
/// The defining condition on the ∂/∂qⁱ-components is enforced structurally:
/// construction only takes the free data Γⁱ_{αβ} and Γ^β_α.
#[derive(Debug, Clone)]
pub struct Sopde {
    kvf: KVectorField,
}

impl Sopde {
    /// `gamma_v[alpha][i][beta]` is Γⁱ_{αβ} (the vⁱ_β-component of member
    /// X_α); `gamma_s[alpha][beta]` is Γ^β_α (the s^β-component of X_α).
    pub fn new(
        chart: Arc<BundleChart>,
        gamma_v: Vec<Vec<Vec<Expr>>>,
        gamma_s: Vec<Vec<Expr>>,
    ) -> Result<Self, BundleError> {
        let n = chart.n();
        let k = chart.k();
        if gamma_v.len() != k || gamma_s.len() != k {
            return Err(BundleError::ComponentCount {
                expected: k,
                got: gamma_v.len().max(gamma_s.len()),
            });
        }
        let mut fields = Vec::with_capacity(k);
        for alpha in 0..k {
            if gamma_v[alpha].len() != n {
                return Err(BundleError::ComponentCount {
                    expected: n,
                    got: gamma_v[alpha].len(),
                });
            }
            if gamma_s[alpha].len() != k {
                return Err(BundleError::ComponentCount {
                    expected: k,
                    got: gamma_s[alpha].len(),
                });
            }
            let mut x = BundleVectorField::zero(chart.clone());
            for i in 0..n {
                if gamma_v[alpha][i].len() != k {
                    return Err(BundleError::ComponentCount {
                        expected: k,
                        got: gamma_v[alpha][i].len(),
                    });
                }
                x.set(Coord::Q(i), Expr::sym(Symbol::Velocity { i, alpha }));
                for beta in 0..k {
                    check_chart_closed(&chart, &gamma_v[alpha][i][beta])?;
                    x.set(Coord::V(i, beta), gamma_v[alpha][i][beta].clone());
                }
            }
            for beta in 0..k {
                check_chart_closed(&chart, &gamma_s[alpha][beta])?;
                x.set(Coord::S(beta), gamma_s[alpha][beta].clone());
            }
            fields.push(x);
        }
        Ok(Sopde {
            kvf: KVectorField::new(chart, fields)?,
        })
    }

    pub fn chart(&self) -> &Arc<BundleChart> {
        self.kvf.chart()
    }

    pub fn k_vector_field(&self) -> &KVectorField {
        &self.kvf
    }

    pub fn member(&self, alpha: usize) -> &BundleVectorField {
        self.kvf.member(alpha)
    }

    /// Γⁱ_{αβ}.
    pub fn gamma_v(&self, alpha: usize, i: usize, beta: usize) -> &Expr {
        self.kvf.member(alpha).component(Coord::V(i, beta))
    }

    /// Γ^β_α.
    pub fn gamma_s(&self, alpha: usize, beta: usize) -> &Expr {
        self.kvf.member(alpha).component(Coord::S(beta))
    }
}

/// ω = ω_c dx^c over the coordinate basis, one coefficient per flat index.
#[derive(Debug, Clone)]
pub struct OneForm {
    chart: Arc<BundleChart>,
    coeffs: Vec<Expr>,
}

impl OneForm {
    pub fn new(chart: Arc<BundleChart>, coeffs: Vec<Expr>) -> Result<Self, BundleError> {
        if coeffs.len() != chart.dim() {
            return Err(BundleError::ComponentCount {
                expected: chart.dim(),
                got: coeffs.len(),
            });
        }
        for c in &coeffs {
            check_chart_closed(&chart, c)?;
        }
        Ok(OneForm { chart, coeffs })
    }

    pub fn zero(chart: Arc<BundleChart>) -> Self {
        let dim = chart.dim();
        OneForm {
            chart,
            coeffs: vec![Expr::zero(); dim],
        }
    }

    /// df = ∂f/∂x^c dx^c.
    pub fn differential(chart: &Arc<BundleChart>, f: &Expr) -> OneForm {
        let coeffs = chart
            .coords()
            .into_iter()
            .map(|c| f.differentiate(&c.symbol()))
            .collect();
        OneForm {
            chart: chart.clone(),
            coeffs,
        }
    }

    pub fn chart(&self) -> &Arc<BundleChart> {
        &self.chart
    }

    pub fn coeff(&self, c: Coord) -> &Expr {
        &self.coeffs[self.chart.coord_index(c)]
    }

    pub fn coeffs(&self) -> &[Expr] {
        &self.coeffs
    }

    pub fn set(&mut self, c: Coord, e: Expr) -> &mut Self {
        self.coeffs[self.chart.coord_index(c)] = e;
        self
    }

    /// i_X ω = ω(X).
    pub fn interior_product(&self, x: &BundleVectorField) -> Result<Expr, BundleError> {
        same_chart(&self.chart, &x.chart)?;
        let terms = self
            .coeffs
            .iter()
            .zip(&x.components)
            .map(|(w, v)| Expr::mul(vec![w.clone(), v.clone()]))
            .collect();
        Ok(Expr::add(terms).normalize())
    }

    /// dω as a two-form: coefficient of dx^a∧dx^b (a<b) is ∂ω_b/∂x^a − ∂ω_a/∂x^b.
    pub fn exterior_derivative(&self) -> TwoForm {
        let coords = self.chart.coords();
        let dim = coords.len();
        let mut out = TwoForm::zero(self.chart.clone());
        for a in 0..dim {
            for b in (a + 1)..dim {
                let c = Expr::sub(
                    self.coeffs[b].differentiate(&coords[a].symbol()),
                    self.coeffs[a].differentiate(&coords[b].symbol()),
                )
                .normalize();
                out.set_by_index(a, b, c);
            }
        }
        out
    }

    /// 𝓛_X ω = i_X dω + d(i_X ω).
    pub fn lie_derivative(&self, x: &BundleVectorField) -> Result<OneForm, BundleError> {
        same_chart(&self.chart, &x.chart)?;
        let first = self.exterior_derivative().interior_product(x)?;
        let second = OneForm::differential(&self.chart, &self.interior_product(x)?);
        let coeffs = first
            .coeffs
            .iter()
            .zip(&second.coeffs)
            .map(|(a, b)| Expr::add(vec![a.clone(), b.clone()]).normalize())
            .collect();
        Ok(OneForm {
            chart: self.chart.clone(),
            coeffs,
        })
    }

    pub fn subv(&self, other: &OneForm) -> Result<OneForm, BundleError> {
        same_chart(&self.chart, &other.chart)?;
        Ok(OneForm {
            chart: self.chart.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| Expr::sub(a.clone(), b.clone()).normalize())
                .collect(),
        })
    }
}

/// An antisymmetric two-form; only coefficients of ordered basis pairs
/// dx^a∧dx^b with a<b are stored.
#[derive(Debug, Clone)]
pub struct TwoForm {
    chart: Arc<BundleChart>,
    coeffs: std::collections::BTreeMap<(usize, usize), Expr>,
}

impl TwoForm {
    pub fn zero(chart: Arc<BundleChart>) -> Self {
        TwoForm {
            chart,
            coeffs: std::collections::BTreeMap::new(),
        }
    }

    pub fn chart(&self) -> &Arc<BundleChart> {
        &self.chart
    }

    fn set_by_index(&mut self, a: usize, b: usize, e: Expr) {
        assert!(a < b, "two-form coefficients are stored with a < b");
        if e.is_num_zero() {
            self.coeffs.remove(&(a, b));
        } else {
            self.coeffs.insert((a, b), e);
        }
    }

    pub fn set(&mut self, a: Coord, b: Coord, e: Expr) -> &mut Self {
        let ia = self.chart.coord_index(a);
        let ib = self.chart.coord_index(b);
        match ia.cmp(&ib) {
            std::cmp::Ordering::Less => self.set_by_index(ia, ib, e),
            std::cmp::Ordering::Greater => self.set_by_index(ib, ia, Expr::neg(e).normalize()),
            std::cmp::Ordering::Equal => {}
        }
        self
    }

    /// Coefficient of dx^a∧dx^b with either index order (sign-adjusted).
    pub fn coeff(&self, a: Coord, b: Coord) -> Expr {
        let ia = self.chart.coord_index(a);
        let ib = self.chart.coord_index(b);
        match ia.cmp(&ib) {
            std::cmp::Ordering::Less => self
                .coeffs
                .get(&(ia, ib))
                .cloned()
                .unwrap_or_else(Expr::zero),
            std::cmp::Ordering::Greater => self
                .coeffs
                .get(&(ib, ia))
                .map(|e| Expr::neg(e.clone()).normalize())
                .unwrap_or_else(Expr::zero),
            std::cmp::Ordering::Equal => Expr::zero(),
        }
    }

    pub fn coeffs(&self) -> &std::collections::BTreeMap<(usize, usize), Expr> {
        &self.coeffs
    }

    /// (i_X Ω)_b = Σ_a X^a Ω_{ab}.
    pub fn interior_product(&self, x: &BundleVectorField) -> Result<OneForm, BundleError> {
        same_chart(&self.chart, &x.chart)?;
        let mut coeffs = vec![Vec::new(); self.chart.dim()];
        for (&(a, b), c) in &self.coeffs {
            // X^a c d x^b − X^b c dx^a
            coeffs[b].push(Expr::mul(vec![x.components[a].clone(), c.clone()]));
            coeffs[a].push(Expr::neg(Expr::mul(vec![
                x.components[b].clone(),
                c.clone(),
            ])));
        }
        Ok(OneForm {
            chart: self.chart.clone(),
            coeffs: coeffs
                .into_iter()
                .map(|ts| Expr::add(ts).normalize())
                .collect(),
        })
    }

    /// 𝓛_X Ω = i_X dΩ + d(i_X Ω); for Ω = dω this reduces to d(i_X Ω)
    /// only when Ω is closed, so the general coefficient formula is used:
    /// (𝓛_X Ω)_{ab} = X(Ω_{ab}) + Ω_{cb} ∂X^c/∂x^a + Ω_{ac} ∂X^c/∂x^b.
    pub fn lie_derivative(&self, x: &BundleVectorField) -> Result<TwoForm, BundleError> {
        same_chart(&self.chart, &x.chart)?;
        let coords = self.chart.coords();
        let dim = coords.len();
        let full = |a: usize, b: usize| -> Expr {
            match a.cmp(&b) {
                std::cmp::Ordering::Less => self
                    .coeffs
                    .get(&(a, b))
                    .cloned()
                    .unwrap_or_else(Expr::zero),
                std::cmp::Ordering::Greater => self
                    .coeffs
                    .get(&(b, a))
                    .map(|e| Expr::neg(e.clone()))
                    .unwrap_or_else(Expr::zero),
                std::cmp::Ordering::Equal => Expr::zero(),
            }
        };
        let mut out = TwoForm::zero(self.chart.clone());
        for a in 0..dim {
            for b in (a + 1)..dim {
                let mut terms = vec![x.apply(&full(a, b))];
                for c in 0..dim {
                    terms.push(Expr::mul(vec![
                        full(c, b),
                        x.components[c].differentiate(&coords[a].symbol()),
                    ]));
                    terms.push(Expr::mul(vec![
                        full(a, c),
                        x.components[c].differentiate(&coords[b].symbol()),
                    ]));
                }
                out.set_by_index(a, b, Expr::add(terms).normalize());
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Point};
    use proptest::prelude::*;

    fn chart2() -> Arc<BundleChart> {
        BundleChart::with_params(2, 1, &["x", "y"], &[])
    }

    fn string_chart() -> Arc<BundleChart> {
        // One shared instance: operands are chart-checked by identity.
        static CHART: std::sync::OnceLock<Arc<BundleChart>> = std::sync::OnceLock::new();
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

    /// The explicit string SOPDE pair from the worked example.
    fn string_pair(chart: &Arc<BundleChart>) -> KVectorField {
        let p = |t: &str| parse(t, chart).unwrap();
        let mut x1 = BundleVectorField::zero(chart.clone());
        x1.set(Coord::Q(0), p("v[q,1]"));
        x1.set(Coord::V(0, 0), p("-(rho/2)*v[q,1]^2 + gamma*s[1]"));
        x1.set(Coord::S(0), p("(rho/2)*v[q,1]^2 - gamma*s[1]"));
        let mut x2 = BundleVectorField::zero(chart.clone());
        x2.set(Coord::Q(0), p("v[q,2]"));
        x2.set(
            Coord::V(0, 1),
            p("(gamma*rho/tau)*v[q,1] - (rho^2/(2*tau))*v[q,1]^2 + (gamma*rho/tau)*s[1]"),
        );
        x2.set(Coord::S(1), p("-(tau/2)*v[q,2]^2"));
        KVectorField::new(chart.clone(), vec![x1, x2]).unwrap()
    }

    #[test]
    fn vertical_lift_of_rotation_field() {
        let chart = chart2();
        let p = |t: &str| parse(t, &chart).unwrap();
        let z = BaseVectorField::new(chart.clone(), vec![p("-y"), p("x")]).unwrap();
        let lift = z.vertical_lift(0).unwrap();
        assert_eq!(lift.component(Coord::V(0, 0)), &p("-y"));
        assert_eq!(lift.component(Coord::V(1, 0)), &p("x"));
        assert!(lift.component(Coord::Q(0)).is_num_zero());
        assert!(lift.component(Coord::Q(1)).is_num_zero());
    }

    #[test]
    fn complete_lift_of_scaling_field() {
        // Z = q ∂/∂q lifts to q∂/∂q + v_α ∂/∂v_α.
        let chart = string_chart();
        let p = |t: &str| parse(t, &chart).unwrap();
        let z = BaseVectorField::new(chart.clone(), vec![p("q")]).unwrap();
        let lift = z.complete_lift();
        assert_eq!(lift.component(Coord::Q(0)), &p("q"));
        assert_eq!(lift.component(Coord::V(0, 0)), &p("v[q,1]"));
        assert_eq!(lift.component(Coord::V(0, 1)), &p("v[q,2]"));
        assert!(lift.component(Coord::S(0)).is_num_zero());
    }

    #[test]
    fn base_field_rejects_fibre_dependence() {
        let chart = string_chart();
        let p = |t: &str| parse(t, &chart).unwrap();
        assert!(matches!(
            BaseVectorField::new(chart.clone(), vec![p("v[q,1]")]),
            Err(BundleError::NotBase(_))
        ));
    }

    #[test]
    fn liouville_contracts_the_string_lagrangian() {
        let chart = string_chart();
        let p = |t: &str| parse(t, &chart).unwrap();
        let l = p("(rho/2)*v[q,1]^2 - (tau/2)*v[q,2]^2 - gamma*s[1]");
        let delta = liouville(&chart);
        let got = delta.apply(&l);
        let want = p("rho*v[q,1]^2 - tau*v[q,2]^2");
        assert_eq!(got, want.normalize());
    }

    #[test]
    fn k_tangent_sends_coordinate_field_to_vertical() {
        let chart = string_chart();
        let mut x = BundleVectorField::zero(chart.clone());
        x.set(Coord::Q(0), Expr::one());
        let jt = x.apply_k_tangent(0).unwrap();
        assert_eq!(jt.component(Coord::V(0, 0)), &Expr::one());
        assert!(jt.component(Coord::V(0, 1)).is_num_zero());
    }

    #[test]
    fn k_tangent_sum_over_sopde_is_liouville() {
        let chart = string_chart();
        let p = |t: &str| parse(t, &chart).unwrap();
        let sopde = Sopde::new(
            chart.clone(),
            vec![
                vec![vec![p("q"), p("s[1]")]],
                vec![vec![p("v[q,2]^2"), p("gamma")]],
            ],
            vec![vec![p("q*s[2]"), p("0")], vec![p("1"), p("v[q,1]")]],
        )
        .unwrap();
        let mut acc = BundleVectorField::zero(chart.clone());
        for alpha in 0..2 {
            acc = acc
                .addv(&sopde.member(alpha).apply_k_tangent(alpha).unwrap())
                .unwrap();
        }
        let delta = liouville(&chart);
        for (a, b) in acc.components().iter().zip(delta.components()) {
            assert_eq!(a.normalize(), b.normalize());
        }
    }

    #[test]
    fn string_contact_form_calculus() {
        // η^t = ds^t − ρ v_t dq for the string: dη^t = ρ dq∧dv_t and
        // i_{∂/∂q} η^t = −ρ v_t.
        let chart = string_chart();
        let p = |t: &str| parse(t, &chart).unwrap();
        let mut eta = OneForm::zero(chart.clone());
        eta.set(Coord::S(0), Expr::one());
        eta.set(Coord::Q(0), p("-rho*v[q,1]"));
        let d_eta = eta.exterior_derivative();
        assert_eq!(d_eta.coeff(Coord::Q(0), Coord::V(0, 0)), p("rho"));
        assert!(d_eta.coeff(Coord::Q(0), Coord::V(0, 1)).is_num_zero());
        let mut dq = BundleVectorField::zero(chart.clone());
        dq.set(Coord::Q(0), Expr::one());
        assert_eq!(eta.interior_product(&dq).unwrap(), p("-rho*v[q,1]"));
    }

    #[test]
    fn string_pair_is_a_sopde_and_liouville_pair_is_not() {
        let chart = string_chart();
        let pair = string_pair(&chart);
        assert!(pair.is_sopde());
        let delta = liouville(&chart);
        let not_sopde = KVectorField::new(chart.clone(), vec![delta.clone(), delta]).unwrap();
        assert!(!not_sopde.is_sopde());
    }

    #[test]
    fn constant_coefficient_sopde_is_integrable() {
        let chart = string_chart();
        let p = |t: &str| parse(t, &chart).unwrap();
        let sopde = Sopde::new(
            chart.clone(),
            vec![
                vec![vec![p("1"), p("2")]],
                vec![vec![p("2"), p("3")]],
            ],
            vec![vec![p("4"), p("5")], vec![p("6"), p("7")]],
        )
        .unwrap();
        let report = sopde
            .k_vector_field()
            .check_integrability(&ZeroConfig::default());
        assert!(report.is_integrable());
    }

    #[test]
    fn k1_is_vacuously_integrable() {
        let chart = BundleChart::with_params(1, 1, &["q"], &[]);
        let x = BundleVectorField::zero(chart.clone());
        let kvf = KVectorField::new(chart, vec![x]).unwrap();
        let report = kvf.check_integrability(&ZeroConfig::default());
        assert!(report.pairs.is_empty());
        assert!(report.is_integrable());
    }

    #[test]
    fn string_pair_bracket_has_one_nonzero_component() {
        // Expanding [X₁,X₂] by hand leaves a single surviving component,
        // along ∂/∂v_x:
        //   ρ²v_t/(2τ) · (ρ v_t² − 2 γ s^t),
        // so the pair is not integrable despite solving the field equations.
        let chart = string_chart();
        let p = |t: &str| parse(t, &chart).unwrap();
        let pair = string_pair(&chart);
        let bracket = pair.member(0).lie_bracket(pair.member(1)).unwrap();
        for coord in [Coord::Q(0), Coord::V(0, 0), Coord::S(0), Coord::S(1)] {
            assert!(
                bracket.component(coord).is_zero(&chart).is_zeroish(),
                "component {coord:?} should vanish"
            );
        }
        let expected = p("(rho^2*v[q,1]/(2*tau))*(rho*v[q,1]^2 - 2*gamma*s[1])");
        let diff = Expr::sub(bracket.component(Coord::V(0, 1)).clone(), expected);
        assert_eq!(diff.is_zero(&chart), ZeroVerdict::ProvenZero);
        let report = pair.check_integrability(&ZeroConfig::default());
        assert!(!report.is_integrable());
    }

    #[test]
    fn lie_derivative_of_closed_form_along_zero_field_vanishes() {
        let chart = string_chart();
        let p = |t: &str| parse(t, &chart).unwrap();
        let omega = OneForm::differential(&chart, &p("q^2*s[1] + v[q,2]"));
        let zero = BundleVectorField::zero(chart.clone());
        let lie = omega.lie_derivative(&zero).unwrap();
        for c in lie.coeffs() {
            assert!(c.is_num_zero());
        }
    }

    // ---- randomized structure for property tests ----

    fn arb_poly(chart: Arc<BundleChart>) -> impl Strategy<Value = Expr> {
        let dim = chart.dim();
        let coords = chart.coords();
        proptest::collection::vec((-2.0f64..2.0, 0usize..dim, 0usize..dim), 1..4).prop_map(
            move |terms| {
                let parts = terms
                    .into_iter()
                    .map(|(c, a, b)| {
                        Expr::mul(vec![
                            Expr::num(c),
                            Expr::sym(coords[a].symbol()),
                            Expr::sym(coords[b].symbol()),
                        ])
                    })
                    .collect();
                Expr::add(parts).normalize()
            },
        )
    }

    fn arb_field(chart: Arc<BundleChart>) -> impl Strategy<Value = BundleVectorField> {
        let dim = chart.dim();
        proptest::collection::vec(arb_poly(chart.clone()), dim)
            .prop_map(move |comps| BundleVectorField::new(chart.clone(), comps).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn k_tangent_squares_to_zero(x in arb_field(string_chart())) {
            let j0 = x.apply_k_tangent(0).unwrap();
            for alpha in 0..2 {
                let jj = j0.apply_k_tangent(alpha).unwrap();
                for c in jj.components() {
                    prop_assert!(c.is_num_zero());
                }
            }
        }

        #[test]
        fn k_tangent_of_complete_lift_is_vertical_lift(
            coeffs in proptest::collection::vec((-2.0f64..2.0, 0usize..2), 1..3)
        ) {
            let chart = chart2();
            let zs: Vec<Expr> = (0..2)
                .map(|i| {
                    let terms = coeffs
                        .iter()
                        .map(|(c, j)| {
                            Expr::mul(vec![
                                Expr::num(c * (i as f64 + 1.0)),
                                Expr::sym(Symbol::Coord { i: *j }),
                            ])
                        })
                        .collect();
                    Expr::add(terms).normalize()
                })
                .collect();
            let z = BaseVectorField::new(chart.clone(), zs).unwrap();
            let via_complete = z.complete_lift().apply_k_tangent(0).unwrap();
            let direct = z.vertical_lift(0).unwrap();
            for (a, b) in via_complete.components().iter().zip(direct.components()) {
                prop_assert_eq!(a.normalize(), b.normalize());
            }
        }

        #[test]
        fn exterior_derivative_of_differential_vanishes(f in arb_poly(string_chart())) {
            let chart = string_chart();
            let ddf = OneForm::differential(&chart, &f).exterior_derivative();
            for c in ddf.coeffs().values() {
                prop_assert_eq!(c.is_zero(&chart), ZeroVerdict::ProvenZero);
            }
        }

        #[test]
        fn jacobi_identity(
            x in arb_field(string_chart()),
            y in arb_field(string_chart()),
            z in arb_field(string_chart()),
        ) {
            let chart = x.chart().clone();
            let a = x.lie_bracket(&y).unwrap().lie_bracket(&z).unwrap();
            let b = y.lie_bracket(&z).unwrap().lie_bracket(&x).unwrap();
            let c = z.lie_bracket(&x).unwrap().lie_bracket(&y).unwrap();
            let total = a.addv(&b).unwrap().addv(&c).unwrap();
            for comp in total.components() {
                let v = comp.is_zero(&chart);
                prop_assert!(v.is_zeroish(), "verdict {v:?} for {comp:?}");
            }
        }

        #[test]
        fn lie_derivative_matches_flow_quotient(
            x in arb_field(string_chart()),
            omega_coeffs in proptest::collection::vec(arb_poly(string_chart()), 5),
            seed in 0u64..1000,
        ) {
            let chart = string_chart();
            let omega = OneForm::new(chart.clone(), omega_coeffs).unwrap();
            let lie = omega.lie_derivative(&x).unwrap();

            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let dim = chart.dim();
            let p0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();

            let point = |vals: &[f64]| -> Point {
                let mut p = Point::with_chart_defaults(&chart);
                for (c, v) in chart.coords().into_iter().zip(vals) {
                    p.set(c.symbol(), *v);
                }
                p
            };
            let field_at = |vals: &[f64]| -> Vec<f64> {
                let p = point(vals);
                x.components()
                    .iter()
                    .map(|e| e.evaluate(&p, &chart).unwrap())
                    .collect()
            };
            // RK4 flow of X for time eps, 8 substeps.
            let eps = 1e-4;
            let flow = |start: &[f64]| -> Vec<f64> {
                let mut y = start.to_vec();
                let h = eps / 8.0;
                for _ in 0..8 {
                    let k1 = field_at(&y);
                    let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
                    let k2 = field_at(&y2);
                    let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
                    let k3 = field_at(&y3);
                    let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
                    let k4 = field_at(&y4);
                    for i in 0..y.len() {
                        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                    }
                }
                y
            };
            let omega_at = |vals: &[f64]| -> Vec<f64> {
                let p = point(vals);
                omega
                    .coeffs()
                    .iter()
                    .map(|e| e.evaluate(&p, &chart).unwrap())
                    .collect()
            };
            // Pullback (φ_ε^* ω)(p)(e_c) = ω(φ_ε(p)) · ∂φ_ε/∂x^c, with the
            // flow Jacobian taken by central differences.
            let h = 1e-5;
            let p_lie = point(&p0);
            for c in 0..dim {
                let mut plus = p0.clone();
                plus[c] += h;
                let mut minus = p0.clone();
                minus[c] -= h;
                let fp = flow(&plus);
                let fm = flow(&minus);
                let mid = flow(&p0);
                let w_mid = omega_at(&mid);
                let mut pulled = 0.0;
                for a in 0..dim {
                    pulled += w_mid[a] * (fp[a] - fm[a]) / (2.0 * h);
                }
                let w0 = omega_at(&p0);
                let quotient = (pulled - w0[c]) / eps;
                let expected = lie.coeffs()[c].evaluate(&p_lie, &chart).unwrap();
                prop_assert!(
                    (quotient - expected).abs() <= 5e-3 * (1.0 + expected.abs()),
                    "coeff {c}: flow quotient {quotient} vs Lie derivative {expected}"
                );
            }
        }
    }
}
