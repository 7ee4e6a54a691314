//! Explicit three-level schemes for the damped string, the telegrapher
//! equation and the coupled damped strings, plus the manufactured exact
//! string solution used as a convergence oracle.

use ndarray::Array2;

use crate::chart::KernelImpl;

use super::{
    BoundaryConditions, BoundaryKind, FieldSolution, GridSpec, Provenance, SolverError,
};

#[derive(Debug, Clone, Copy)]
pub struct StringParams {
    pub rho: f64,
    pub tau: f64,
    pub gamma: f64,
}

impl StringParams {
    pub fn speed2(&self) -> f64 {
        self.tau / self.rho
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TelegrapherParams {
    pub inductance: f64,
    pub capacitance: f64,
    pub resistance: f64,
    pub conductance: f64,
}

impl TelegrapherParams {
    /// γ = (LG + RC) / LC.
    pub fn gamma(&self) -> f64 {
        (self.inductance * self.conductance + self.resistance * self.capacitance)
            / (self.inductance * self.capacitance)
    }

    /// m² = RG / LC.
    pub fn m2(&self) -> f64 {
        (self.resistance * self.conductance) / (self.inductance * self.capacitance)
    }

    /// Wave speed squared, 1/LC.
    pub fn speed2(&self) -> f64 {
        1.0 / (self.inductance * self.capacitance)
    }
}

#[derive(Clone)]
pub struct CoupledParams {
    pub gamma: f64,
    /// Coupling C as a kernel: order-1 samples give C′; the declared
    /// ratio limit supplies lim_{z→0} C′(z)/z.
    pub coupling: KernelImpl,
}

/// Shared explicit scheme: φ_tt = speed² φ_xx − γ φ_t + extra(φ), with the
/// damping term centered at (φⁿ⁺¹ − φⁿ⁻¹)/2Δt and solved implicitly.
fn three_level<F>(
    grid: &GridSpec,
    bc: &BoundaryConditions,
    n_fields: usize,
    gamma: f64,
    speed2: f64,
    extra: F,
) -> Result<FieldSolution, SolverError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, SolverError>,
{
    if bc.initial.len() != n_fields {
        return Err(SolverError::FieldCount {
            expected: n_fields,
            got: bc.initial.len(),
        });
    }
    let dt = grid.spacing[0];
    let dx = grid.spacing[1];
    let cfl = speed2.sqrt() * dt / dx;
    if cfl > 1.0 + 1e-12 {
        return Err(SolverError::Cfl { number: cfl });
    }
    bc.check_corners(grid)?;
    let nt = grid.shape[0];
    let nx = grid.shape[1];
    let periodic = matches!(bc.left, BoundaryKind::Periodic);

    let mut phi: Vec<Array2<f64>> = vec![Array2::zeros((nt, nx)); n_fields];
    // level 0 from initial displacement
    for (i, init) in bc.initial.iter().enumerate() {
        for j in 0..nx {
            phi[i][[0, j]] = (init.displacement)(grid.coord(1, j));
        }
    }
    let lap = |phi: &[Array2<f64>], level: usize, i: usize, j: usize| -> f64 {
        let (jm, jp) = if periodic {
            ((j + nx - 2) % (nx - 1), (j + 1) % (nx - 1))
        } else {
            (j - 1, j + 1)
        };
        (phi[i][[level, jp]] - 2.0 * phi[i][[level, j]] + phi[i][[level, jm]]) / (dx * dx)
    };
    let j_range = || {
        if periodic {
            0..nx - 1
        } else {
            1..nx - 1
        }
    };
    // level 1: Taylor seed using the PDE for φ_tt at t=0
    for j in j_range() {
        let values: Vec<f64> = (0..n_fields).map(|i| phi[i][[0, j]]).collect();
        let ex = extra(&values)?;
        for i in 0..n_fields {
            let v0 = (bc.initial[i].velocity)(grid.coord(1, j));
            let acc = speed2 * lap(&phi, 0, i, j) + ex[i] - gamma * v0;
            phi[i][[1, j]] = phi[i][[0, j]] + dt * v0 + 0.5 * dt * dt * acc;
        }
    }
    apply_dirichlet(&mut phi, bc, grid, 1);
    if periodic {
        for p in phi.iter_mut() {
            p[[1, nx - 1]] = p[[1, 0]];
        }
    }
    // remaining levels
    let denom = 1.0 + 0.5 * gamma * dt;
    let prev_w = 1.0 - 0.5 * gamma * dt;
    for level in 1..nt - 1 {
        for j in j_range() {
            let values: Vec<f64> = (0..n_fields).map(|i| phi[i][[level, j]]).collect();
            let ex = extra(&values)?;
            for i in 0..n_fields {
                let num = 2.0 * phi[i][[level, j]] - prev_w * phi[i][[level - 1, j]]
                    + dt * dt * (speed2 * lap(&phi, level, i, j) + ex[i]);
                phi[i][[level + 1, j]] = num / denom;
            }
        }
        apply_dirichlet(&mut phi, bc, grid, level + 1);
        if periodic {
            for p in phi.iter_mut() {
                p[[level + 1, nx - 1]] = p[[level + 1, 0]];
            }
        }
    }
    Ok(FieldSolution::from_phi(
        grid.clone(),
        phi,
        Provenance::Computed,
    ))
}

fn apply_dirichlet(
    phi: &mut [Array2<f64>],
    bc: &BoundaryConditions,
    grid: &GridSpec,
    level: usize,
) {
    let t = grid.coord(0, level);
    let last = grid.shape[1] - 1;
    if let BoundaryKind::Dirichlet(fs) = &bc.left {
        for (i, f) in fs.iter().enumerate() {
            phi[i][[level, 0]] = f(t);
        }
    }
    if let BoundaryKind::Dirichlet(fs) = &bc.right {
        for (i, f) in fs.iter().enumerate() {
            phi[i][[level, last]] = f(t);
        }
    }
}

/// Damped vibrating string: ρφ_tt − τφ_xx + γρφ_t = 0.
pub fn solve_damped_string(
    params: &StringParams,
    grid: &GridSpec,
    bc: &BoundaryConditions,
) -> Result<FieldSolution, SolverError> {
    if params.gamma < 0.0 {
        return Err(SolverError::BadParameter(format!(
            "damping γ = {} must be nonnegative",
            params.gamma
        )));
    }
    three_level(grid, bc, 1, params.gamma, params.speed2(), |_| Ok(vec![0.0]))
}

/// Telegrapher equation: φ_tt − (1/LC)φ_xx + γφ_t + m²φ = 0.
pub fn solve_telegrapher(
    params: &TelegrapherParams,
    grid: &GridSpec,
    bc: &BoundaryConditions,
) -> Result<FieldSolution, SolverError> {
    let m2 = params.m2();
    three_level(grid, bc, 1, params.gamma(), params.speed2(), move |v| {
        Ok(vec![-m2 * v[0]])
    })
}

/// Two coupled damped strings: φⁱ_tt − φⁱ_xx + γφⁱ_t + C′(z)φⁱ/z = 0 with
/// z = √((φ¹)² + (φ²)²). Near z = 0 the factor C′(z)/z is replaced by its
/// declared limit.
pub fn solve_coupled_strings(
    params: &CoupledParams,
    grid: &GridSpec,
    bc: &BoundaryConditions,
) -> Result<FieldSolution, SolverError> {
    let kernel = params.coupling.clone();
    three_level(grid, bc, 2, params.gamma, 1.0, move |v| {
        let z = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let ratio = if z < 1e-12 {
            kernel.ratio_limit_at_zero.ok_or_else(|| {
                SolverError::Kernel(format!(
                    "kernel `{}` declares no C'(z)/z limit at z = 0",
                    kernel.name
                ))
            })?
        } else {
            kernel
                .eval(1, z)
                .map_err(|e| SolverError::Kernel(e.to_string()))?
                / z
        };
        Ok(vec![-ratio * v[0], -ratio * v[1]])
    })
}

/// Closed-form underdamped standing-wave solution of the damped string on
/// a string of length ℓ with fixed ends:
/// φ(t,x) = e^{−γt/2} sin(πx/ℓ) [cos(ωt) + (γ/2ω) sin(ωt)],
/// ω = √(c²π²/ℓ² − γ²/4).
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedString {
    pub params: StringParams,
    pub length: f64,
    pub omega: f64,
}

pub fn manufactured_string_solution(
    params: &StringParams,
    length: f64,
) -> Result<ManufacturedString, SolverError> {
    let c2 = params.speed2();
    let disc = c2 * std::f64::consts::PI.powi(2) / (length * length)
        - params.gamma * params.gamma / 4.0;
    if disc <= 0.0 {
        return Err(SolverError::BadParameter(format!(
            "overdamped regime: c²π²/ℓ² − γ²/4 = {disc} ≤ 0"
        )));
    }
    Ok(ManufacturedString {
        params: *params,
        length,
        omega: disc.sqrt(),
    })
}

impl ManufacturedString {
    fn envelope(&self, t: f64) -> (f64, f64) {
        // (T, T′) with T(t) = cos ωt + (γ/2ω) sin ωt
        let g2 = self.params.gamma / 2.0;
        let t_val = (self.omega * t).cos() + g2 / self.omega * (self.omega * t).sin();
        let t_dot = -self.omega * (self.omega * t).sin() + g2 * (self.omega * t).cos();
        (t_val, t_dot)
    }

    pub fn phi(&self, t: f64, x: f64) -> f64 {
        let (tv, _) = self.envelope(t);
        (-self.params.gamma * t / 2.0).exp() * (std::f64::consts::PI * x / self.length).sin() * tv
    }

    pub fn phi_t(&self, t: f64, x: f64) -> f64 {
        let (tv, td) = self.envelope(t);
        let g2 = self.params.gamma / 2.0;
        (-g2 * t).exp() * (std::f64::consts::PI * x / self.length).sin() * (td - g2 * tv)
    }

    pub fn phi_x(&self, t: f64, x: f64) -> f64 {
        let (tv, _) = self.envelope(t);
        let k = std::f64::consts::PI / self.length;
        (-self.params.gamma * t / 2.0).exp() * k * (k * x).cos() * tv
    }

    /// Samples the exact solution and its analytic jets onto a grid.
    pub fn sample(&self, grid: &GridSpec) -> FieldSolution {
        let (nt, nx) = (grid.shape[0], grid.shape[1]);
        let mut phi = Array2::zeros((nt, nx));
        let mut jt = Array2::zeros((nt, nx));
        let mut jx = Array2::zeros((nt, nx));
        for i0 in 0..nt {
            for i1 in 0..nx {
                let t = grid.coord(0, i0);
                let x = grid.coord(1, i1);
                phi[[i0, i1]] = self.phi(t, x);
                jt[[i0, i1]] = self.phi_t(t, x);
                jx[[i0, i1]] = self.phi_x(t, x);
            }
        }
        FieldSolution {
            grid: grid.clone(),
            phi: vec![phi],
            jets: vec![[jt, jx]],
            s: vec![Array2::zeros((nt, nx)); 2],
            provenance: Provenance::Manufactured,
        }
    }

    /// Boundary/initial data traced from the exact solution.
    pub fn boundary_conditions(&self) -> BoundaryConditions {
        let me = *self;
        let left: super::ScalarFn = std::sync::Arc::new(move |t| me.phi(t, 0.0));
        let me2 = *self;
        let right: super::ScalarFn = std::sync::Arc::new(move |t| me2.phi(t, me2.length));
        let me3 = *self;
        let disp: super::ScalarFn = std::sync::Arc::new(move |x| me3.phi(0.0, x));
        let me4 = *self;
        let vel: super::ScalarFn = std::sync::Arc::new(move |x| me4.phi_t(0.0, x));
        BoundaryConditions {
            left: BoundaryKind::Dirichlet(vec![left]),
            right: BoundaryKind::Dirichlet(vec![right]),
            initial: vec![super::InitialData {
                displacement: disp,
                velocity: vel,
            }],
        }
    }
}
