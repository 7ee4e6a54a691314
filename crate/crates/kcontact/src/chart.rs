//! Coordinate charts on the phase bundle.
//!
//! A [`BundleChart`] fixes the base dimension `n`, the field dimension `k`,
//! the names of the base coordinates and the declared parameters and opaque
//! function kernels. Every symbolic object in the crate is relative to one
//! chart; a chart is a single global rectangular coordinate patch.

use std::fmt;
use std::sync::Arc;

use crate::expr::{EvalError, Symbol};

/// A named constant appearing in expressions over the chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub default: Option<f64>,
}

/// Sample implementation of an opaque unary kernel and its derivatives.
///
/// `fns[d]` evaluates the d-th derivative of the kernel. Orders beyond the
/// supplied ones are evaluation errors.
#[derive(Clone)]
pub struct KernelImpl {
    pub name: String,
    pub fns: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    /// Limit of `f'(z)/z` as `z -> 0`, for source terms singular at the
    /// origin. `None` means the limit is not declared.
    pub ratio_limit_at_zero: Option<f64>,
}

impl fmt::Debug for KernelImpl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelImpl")
            .field("name", &self.name)
            .field("orders", &self.fns.len())
            .finish()
    }
}

impl KernelImpl {
    pub fn eval(&self, order: u32, x: f64) -> Result<f64, EvalError> {
        match self.fns.get(order as usize) {
            Some(f) => Ok(f(x)),
            None => Err(EvalError::MissingKernelOrder {
                name: self.name.clone(),
                order,
            }),
        }
    }
}

/// Declares the coordinates of the phase bundle: `n` base coordinates
/// `q^i`, the `n*k` velocities `v^i_a`, and `k` action coordinates `s^a`.
#[derive(Debug, Clone)]
pub struct BundleChart {
    n: usize,
    k: usize,
    base_names: Vec<String>,
    params: Vec<ParamDecl>,
    kernels: Vec<KernelImpl>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ChartError {
    #[error("base dimension and field dimension must be at least 1")]
    EmptyDimension,
    #[error("duplicate identifier `{0}` in chart")]
    DuplicateName(String),
    #[error("index out of range for chart: {0}")]
    IndexOutOfRange(String),
    #[error("unknown coordinate `{0}`")]
    UnknownCoordinate(String),
}

/// A single coordinate direction of the chart, in flat ordering
/// `q^0..q^{n-1}, v^i_a (i outer), s^0..s^{k-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Coord {
    Q(usize),
    V(usize, usize),
    S(usize),
}

impl Coord {
    pub fn symbol(self) -> Symbol {
        match self {
            Coord::Q(i) => Symbol::Coord { i },
            Coord::V(i, alpha) => Symbol::Velocity { i, alpha },
            Coord::S(alpha) => Symbol::Action { alpha },
        }
    }
}

impl BundleChart {
    pub fn new(
        n: usize,
        k: usize,
        base_names: Vec<String>,
        params: Vec<ParamDecl>,
    ) -> Result<Self, ChartError> {
        if n == 0 || k == 0 {
            return Err(ChartError::EmptyDimension);
        }
        assert_eq!(base_names.len(), n, "one name per base coordinate");
        let mut seen: Vec<&str> = Vec::new();
        for name in base_names.iter().chain(params.iter().map(|p| &p.name)) {
            if seen.contains(&name.as_str()) {
                return Err(ChartError::DuplicateName(name.clone()));
            }
            seen.push(name);
        }
        Ok(BundleChart {
            n,
            k,
            base_names,
            params,
            kernels: Vec::new(),
        })
    }

    /// Convenience constructor used pervasively by the paper examples.
    pub fn with_params(n: usize, k: usize, names: &[&str], params: &[(&str, f64)]) -> Arc<Self> {
        Arc::new(
            BundleChart::new(
                n,
                k,
                names.iter().map(|s| s.to_string()).collect(),
                params
                    .iter()
                    .map(|(name, v)| ParamDecl {
                        name: name.to_string(),
                        default: Some(*v),
                    })
                    .collect(),
            )
            .expect("valid chart"),
        )
    }

    pub fn declare_kernel(&mut self, k: KernelImpl) {
        self.kernels.push(k);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn base_name(&self, i: usize) -> &str {
        &self.base_names[i]
    }

    pub fn base_index(&self, name: &str) -> Option<usize> {
        self.base_names.iter().position(|b| b == name)
    }

    pub fn params(&self) -> &[ParamDecl] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<&ParamDecl> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn kernel(&self, name: &str) -> Option<&KernelImpl> {
        self.kernels.iter().find(|k| k.name == name)
    }

    pub fn kernels(&self) -> &[KernelImpl] {
        &self.kernels
    }

    /// Number of coordinates of the phase bundle: `n + n*k + k`.
    pub fn dim(&self) -> usize {
        self.n + self.n * self.k + self.k
    }

    /// Flat ordering of the coordinate directions.
    pub fn coords(&self) -> Vec<Coord> {
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..self.n {
            out.push(Coord::Q(i));
        }
        for i in 0..self.n {
            for alpha in 0..self.k {
                out.push(Coord::V(i, alpha));
            }
        }
        for alpha in 0..self.k {
            out.push(Coord::S(alpha));
        }
        out
    }

    pub fn coord_index(&self, c: Coord) -> usize {
        match c {
            Coord::Q(i) => i,
            Coord::V(i, alpha) => self.n + i * self.k + alpha,
            Coord::S(alpha) => self.n + self.n * self.k + alpha,
        }
    }

    /// Checks that the indices carried by a symbol lie in this chart's
    /// ranges and that named symbols are declared.
    pub fn check_symbol(&self, sym: &Symbol) -> Result<(), ChartError> {
        let ok = match sym {
            Symbol::Coord { i } => *i < self.n,
            Symbol::Velocity { i, alpha } | Symbol::JetFirst { i, alpha } => {
                *i < self.n && *alpha < self.k
            }
            Symbol::Action { alpha } => *alpha < self.k,
            Symbol::JetSecond { i, alpha, beta } => {
                *i < self.n && *alpha <= *beta && *beta < self.k
            }
            Symbol::JetAction { beta, alpha } => *beta < self.k && *alpha < self.k,
            Symbol::Param(name) => {
                return if self.param(name).is_some() {
                    Ok(())
                } else {
                    Err(ChartError::UnknownCoordinate(name.clone()))
                }
            }
        };
        if ok {
            Ok(())
        } else {
            Err(ChartError::IndexOutOfRange(format!("{sym:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_indexing_is_a_bijection() {
        let chart = BundleChart::with_params(2, 2, &["q1", "q2"], &[]);
        let coords = chart.coords();
        assert_eq!(coords.len(), chart.dim());
        for (idx, c) in coords.iter().enumerate() {
            assert_eq!(chart.coord_index(*c), idx);
        }
    }

    #[test]
    fn rejects_duplicate_names() {
        let err = BundleChart::new(
            1,
            2,
            vec!["q".into()],
            vec![ParamDecl {
                name: "q".into(),
                default: None,
            }],
        )
        .unwrap_err();
        assert_eq!(err, ChartError::DuplicateName("q".into()));
    }

    #[test]
    fn symbol_range_checks() {
        let chart = BundleChart::with_params(1, 2, &["q"], &[("rho", 1.0)]);
        assert!(chart.check_symbol(&Symbol::Velocity { i: 0, alpha: 1 }).is_ok());
        assert!(chart.check_symbol(&Symbol::Velocity { i: 1, alpha: 0 }).is_err());
        assert!(chart.check_symbol(&Symbol::Param("rho".into())).is_ok());
        assert!(chart.check_symbol(&Symbol::Param("nu".into())).is_err());
    }
}
