//! Finite-difference solvers for the example field equations, together with
//! the grid containers shared by the verification machinery.
//!
//! Every problem here lives on a uniform two-axis grid (the examples all
//! have two independent variables: (t, x) for the hyperbolic problems,
//! (x₁, x₂) for damped Laplace).

mod elliptic;
mod hyperbolic;
mod residual;
mod sfield;

pub use elliptic::{solve_damped_laplace, DirichletBox, LaplaceParams};
pub use hyperbolic::{
    manufactured_string_solution, solve_coupled_strings, solve_damped_string, solve_telegrapher,
    CoupledParams, StringParams, TelegrapherParams,
};
pub use residual::{
    el_residual_fields, el_residual_on_grid, estimate_order, GridNorms, ResidualNorms,
};
pub use sfield::{reconstruct_s_fields, Gauge};

use std::sync::Arc;

use ndarray::Array2;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SolverError {
    #[error("axis {axis} has {count} nodes; at least 5 are required")]
    TooFewNodes { axis: usize, count: usize },
    #[error("axis {axis} spacing {spacing} must be positive")]
    BadSpacing { axis: usize, spacing: f64 },
    #[error("CFL violation: c·Δt/Δx = {number} exceeds 1")]
    Cfl { number: f64 },
    #[error("boundary data incompatible with initial data at the corners (gap {gap:.3e})")]
    IncompatibleCorners { gap: f64 },
    #[error("expected initial data for {expected} fields, got {got}")]
    FieldCount { expected: usize, got: usize },
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error("kernel evaluation failed: {0}")]
    Kernel(String),
    #[error("iteration did not converge: residual {residual:.3e} after {iterations} sweeps")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("unknown gauge `{0}`")]
    UnknownGauge(String),
    #[error("solution grid does not match: {0}")]
    GridMismatch(String),
    #[error("stencil margin violated: need {need} interior nodes on axis {axis}")]
    Margin { axis: usize, need: usize },
}

/// A uniform rectangular grid over two axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub shape: [usize; 2],
    pub spacing: [f64; 2],
    pub origin: [f64; 2],
}

impl GridSpec {
    pub fn new(shape: [usize; 2], spacing: [f64; 2], origin: [f64; 2]) -> Result<Self, SolverError> {
        for axis in 0..2 {
            if shape[axis] < 5 {
                return Err(SolverError::TooFewNodes {
                    axis,
                    count: shape[axis],
                });
            }
            if !(spacing[axis] > 0.0) {
                return Err(SolverError::BadSpacing {
                    axis,
                    spacing: spacing[axis],
                });
            }
        }
        Ok(GridSpec {
            shape,
            spacing,
            origin,
        })
    }

    /// Grid covering `[0,extent0]×[0,extent1]` with the given node counts.
    pub fn from_extents(extents: [f64; 2], shape: [usize; 2]) -> Result<Self, SolverError> {
        let spacing = [
            extents[0] / (shape[0] as f64 - 1.0),
            extents[1] / (shape[1] as f64 - 1.0),
        ];
        GridSpec::new(shape, spacing, [0.0, 0.0])
    }

    pub fn coord(&self, axis: usize, idx: usize) -> f64 {
        self.origin[axis] + idx as f64 * self.spacing[axis]
    }

    /// The larger of the two spacings; the "h" of convergence statements.
    pub fn h(&self) -> f64 {
        self.spacing[0].max(self.spacing[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Computed,
    Manufactured,
    Loaded,
}

/// Nodewise values of the fields φⁱ, their first jets aⁱ_α, and the action
/// fields s^α on a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub grid: GridSpec,
    /// One array per field component, indexed `[axis-0 node][axis-1 node]`.
    pub phi: Vec<Array2<f64>>,
    /// `jets[i][alpha]` holds aⁱ_α = ∂φⁱ/∂t^α.
    pub jets: Vec<[Array2<f64>; 2]>,
    /// One array per action component s^α.
    pub s: Vec<Array2<f64>>,
    pub provenance: Provenance,
}

impl FieldSolution {
    /// Builds a solution from field values alone: jets by centered
    /// differences (one-sided second-order at the boundary), s-fields zero.
    pub fn from_phi(grid: GridSpec, phi: Vec<Array2<f64>>, provenance: Provenance) -> Self {
        let jets = phi
            .iter()
            .map(|field| [difference(field, &grid, 0), difference(field, &grid, 1)])
            .collect();
        let s = vec![Array2::zeros((grid.shape[0], grid.shape[1])); 2];
        FieldSolution {
            grid,
            phi,
            jets,
            s,
            provenance,
        }
    }

    pub fn n_fields(&self) -> usize {
        self.phi.len()
    }

    /// Second jet wⁱ_{αβ} by centered differences; boundary rows/columns
    /// are filled with one-sided second-order stencils.
    pub fn second_jet(&self, i: usize, alpha: usize, beta: usize) -> Array2<f64> {
        if alpha == beta {
            second_difference(&self.phi[i], &self.grid, alpha)
        } else {
            // mixed derivative: difference the stored first jet.
            difference(&self.jets[i][alpha], &self.grid, beta)
        }
    }

    /// Applies `f` to every interior node (margin 1 on each axis), passing
    /// the node index pair.
    pub fn for_interior<F: FnMut([usize; 2])>(&self, mut f: F) {
        for i0 in 1..self.grid.shape[0] - 1 {
            for i1 in 1..self.grid.shape[1] - 1 {
                f([i0, i1]);
            }
        }
    }
}

/// First difference along `axis`: centered in the interior, one-sided
/// three-point at the two boundary layers. All stencils are second order.
pub(crate) fn difference(field: &Array2<f64>, grid: &GridSpec, axis: usize) -> Array2<f64> {
    let h = grid.spacing[axis];
    let shape = grid.shape;
    let mut out = Array2::zeros((shape[0], shape[1]));
    let len = shape[axis];
    let get = |a: usize, b: usize| field[[a, b]];
    for i0 in 0..shape[0] {
        for i1 in 0..shape[1] {
            let pos = [i0, i1][axis];
            let at = |p: usize| if axis == 0 { get(p, i1) } else { get(i0, p) };
            let d = if pos == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if pos == len - 1 {
                (3.0 * at(len - 1) - 4.0 * at(len - 2) + at(len - 3)) / (2.0 * h)
            } else {
                (at(pos + 1) - at(pos - 1)) / (2.0 * h)
            };
            out[[i0, i1]] = d;
        }
    }
    out
}

/// Second difference along `axis`; second-order centered stencil, one-sided
/// four-point at boundaries.
pub(crate) fn second_difference(field: &Array2<f64>, grid: &GridSpec, axis: usize) -> Array2<f64> {
    let h2 = grid.spacing[axis] * grid.spacing[axis];
    let shape = grid.shape;
    let mut out = Array2::zeros((shape[0], shape[1]));
    let len = shape[axis];
    let get = |a: usize, b: usize| field[[a, b]];
    for i0 in 0..shape[0] {
        for i1 in 0..shape[1] {
            let pos = [i0, i1][axis];
            let at = |p: usize| if axis == 0 { get(p, i1) } else { get(i0, p) };
            let d = if pos == 0 {
                (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2
            } else if pos == len - 1 {
                (2.0 * at(len - 1) - 5.0 * at(len - 2) + 4.0 * at(len - 3) - at(len - 4)) / h2
            } else {
                (at(pos + 1) - 2.0 * at(pos) + at(pos - 1)) / h2
            };
            out[[i0, i1]] = d;
        }
    }
    out
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Boundary prescription along one spatial edge of a hyperbolic problem.
#[derive(Clone)]
pub enum BoundaryKind {
    /// One value function of t per field component.
    Dirichlet(Vec<ScalarFn>),
    Periodic,
}

/// Initial displacement and velocity for one field component (functions of x).
#[derive(Clone)]
pub struct InitialData {
    pub displacement: ScalarFn,
    pub velocity: ScalarFn,
}

/// Initial/boundary data for the hyperbolic solvers; axis 0 is time.
#[derive(Clone)]
pub struct BoundaryConditions {
    pub left: BoundaryKind,
    pub right: BoundaryKind,
    pub initial: Vec<InitialData>,
}

impl BoundaryConditions {
    /// Checks corner compatibility: Dirichlet data at t=0 must agree with
    /// the initial displacement to a loose floating tolerance.
    pub fn check_corners(&self, grid: &GridSpec) -> Result<(), SolverError> {
        let t0 = grid.coord(0, 0);
        let x_left = grid.coord(1, 0);
        let x_right = grid.coord(1, grid.shape[1] - 1);
        let mut gap: f64 = 0.0;
        if let BoundaryKind::Dirichlet(fs) = &self.left {
            for (f, init) in fs.iter().zip(&self.initial) {
                gap = gap.max((f(t0) - (init.displacement)(x_left)).abs());
            }
        }
        if let BoundaryKind::Dirichlet(fs) = &self.right {
            for (f, init) in fs.iter().zip(&self.initial) {
                gap = gap.max((f(t0) - (init.displacement)(x_right)).abs());
            }
        }
        if gap > 1e-9 {
            return Err(SolverError::IncompatibleCorners { gap });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(matches!(
            GridSpec::new([3, 10], [0.1, 0.1], [0.0, 0.0]),
            Err(SolverError::TooFewNodes { axis: 0, count: 3 })
        ));
        assert!(matches!(
            GridSpec::new([10, 10], [0.1, -0.1], [0.0, 0.0]),
            Err(SolverError::BadSpacing { axis: 1, .. })
        ));
        let g = GridSpec::from_extents([1.0, 2.0], [11, 21]).unwrap();
        assert!((g.spacing[0] - 0.1).abs() < 1e-12);
        assert!((g.coord(1, 20) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn centered_differences_are_second_order_on_cubics() {
        // d/dx and d²/dx² of x³ are exact for the interior centered stencils
        // up to the h² truncation term, which vanishes for degree ≤ 3 only
        // for the second difference; check against tight tolerances.
        let grid = GridSpec::from_extents([1.0, 1.0], [21, 21]).unwrap();
        let mut f = Array2::zeros((21, 21));
        for i0 in 0..21 {
            for i1 in 0..21 {
                let x = grid.coord(1, i1);
                f[[i0, i1]] = x * x * x;
            }
        }
        let d1 = difference(&f, &grid, 1);
        let d2 = second_difference(&f, &grid, 1);
        for i1 in 1..20 {
            let x = grid.coord(1, i1);
            assert!((d1[[10, i1]] - 3.0 * x * x).abs() < 1e-2);
            assert!((d2[[10, i1]] - 6.0 * x).abs() < 1e-9);
        }
        // one-sided edges stay second order
        assert!((d1[[10, 0]] - 0.0).abs() < 1e-2);
        assert!((d1[[10, 20]] - 3.0).abs() < 1e-2);
    }

    #[test]
    fn from_phi_jets_match_analytic_derivatives() {
        let grid = GridSpec::from_extents([1.0, 1.0], [41, 41]).unwrap();
        let mut f = Array2::zeros((41, 41));
        for i0 in 0..41 {
            for i1 in 0..41 {
                let t = grid.coord(0, i0);
                let x = grid.coord(1, i1);
                f[[i0, i1]] = (t * 2.0).sin() * (x * 3.0).cos();
            }
        }
        let sol = FieldSolution::from_phi(grid.clone(), vec![f], Provenance::Computed);
        let mut max_err: f64 = 0.0;
        sol.for_interior(|[i0, i1]| {
            let t = grid.coord(0, i0);
            let x = grid.coord(1, i1);
            let exact = 2.0 * (2.0 * t).cos() * (3.0 * x).cos();
            max_err = max_err.max((sol.jets[0][0][[i0, i1]] - exact).abs());
        });
        assert!(max_err < 2e-3, "max interior jet error {max_err}");
    }
}
