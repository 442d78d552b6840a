use crate::closure::{equilibrium_eddy_viscosity, log_law_friction_velocity, ClosureConstants};
use crate::counters::WorkCounters;
use crate::tridiag::solve_tridiagonal;

use super::{EqwmError, EqwmMethod, EqwmSolution, WallModelInput};

/// Largest geometric stretching ratio used when sizing the wall-model grid.
pub const MAX_STRETCHING: f64 = 1.2;

/// Wall-normal finite-volume grid on `[0, h_wm]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FvGrid {
    faces: Vec<f64>,
    stretching: f64,
}

impl FvGrid {
    pub fn from_faces(faces: Vec<f64>) -> Result<Self, EqwmError> {
        if faces.len() < 2 {
            return Err(EqwmError::InvalidGrid(format!(
                "{} faces, need at least 2",
                faces.len()
            )));
        }
        if faces[0] != 0.0 {
            return Err(EqwmError::InvalidGrid(format!(
                "first face at {} instead of 0",
                faces[0]
            )));
        }
        if !faces.windows(2).all(|w| w[1] > w[0]) || !faces.iter().all(|f| f.is_finite()) {
            return Err(EqwmError::InvalidGrid(
                "face coordinates must be strictly increasing".into(),
            ));
        }
        let n = faces.len() - 1;
        let stretching = if n >= 2 {
            (faces[2] - faces[1]) / faces[1]
        } else {
            1.0
        };
        Ok(Self { faces, stretching })
    }

    pub fn uniform(n_cells: usize, h_wm: f64) -> Result<Self, EqwmError> {
        Self::geometric(n_cells, h_wm, 1.0)
    }

    /// Geometric grid whose cell heights grow by `ratio`.
    pub fn geometric(n_cells: usize, h_wm: f64, ratio: f64) -> Result<Self, EqwmError> {
        if n_cells == 0 || !(h_wm > 0.0) || !(ratio > 0.0) {
            return Err(EqwmError::InvalidGrid(format!(
                "n = {n_cells}, h = {h_wm}, ratio = {ratio}"
            )));
        }
        let mut widths: Vec<f64> = (0..n_cells).map(|i| ratio.powi(i as i32)).collect();
        let total: f64 = widths.iter().sum();
        widths.iter_mut().for_each(|w| *w *= h_wm / total);
        let mut faces = Vec::with_capacity(n_cells + 1);
        let mut y = 0.0;
        faces.push(0.0);
        for w in &widths[..n_cells - 1] {
            y += w;
            faces.push(y);
        }
        faces.push(h_wm);
        let mut grid = Self::from_faces(faces)?;
        grid.stretching = ratio;
        Ok(grid)
    }

    /// Geometric grid whose first cell has height `first_height`, with the
    /// ratio capped at [`MAX_STRETCHING`]. Uniform if `n * first_height >= h`.
    pub fn stretched(n_cells: usize, h_wm: f64, first_height: f64) -> Result<Self, EqwmError> {
        if n_cells == 0 || !(first_height > 0.0) {
            return Err(EqwmError::InvalidGrid(format!(
                "n = {n_cells}, first height = {first_height}"
            )));
        }
        if first_height * n_cells as f64 >= h_wm {
            return Self::uniform(n_cells, h_wm);
        }
        let span = |r: f64| {
            if r == 1.0 {
                n_cells as f64
            } else {
                (r.powi(n_cells as i32) - 1.0) / (r - 1.0)
            }
        };
        let target = h_wm / first_height;
        let ratio = if span(MAX_STRETCHING) <= target {
            MAX_STRETCHING
        } else {
            let (mut lo, mut hi) = (1.0, MAX_STRETCHING);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if span(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        Self::geometric(n_cells, h_wm, ratio)
    }

    /// Grid sized for `input`: first cell one viscous unit high, using the
    /// log-law estimate of `u_tau`.
    pub fn for_input(
        n_cells: usize,
        input: &WallModelInput,
        constants: &ClosureConstants,
    ) -> Result<Self, EqwmError> {
        let ut = log_law_friction_velocity(input.u_les, input.h_wm, input.nu, constants);
        let first = if ut > 0.0 {
            input.nu / ut
        } else {
            input.h_wm / n_cells.max(1) as f64
        };
        Self::stretched(n_cells, input.h_wm, first)
    }

    pub fn n_cells(&self) -> usize {
        self.faces.len() - 1
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn stretching(&self) -> f64 {
        self.stretching
    }

    pub fn height(&self) -> f64 {
        *self.faces.last().expect("non-empty grid")
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        self.faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EddyViscosityMode {
    MixingLength,
    /// `nu_t = 0`; used to check the discretization against the laminar solution.
    Laminar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FvSettings {
    /// Relative change in τ_w between sweeps that ends the iteration.
    pub tol: f64,
    pub max_iters: usize,
    pub eddy_viscosity: EddyViscosityMode,
}

impl Default for FvSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 200,
            eddy_viscosity: EddyViscosityMode::MixingLength,
        }
    }
}

/// Finite-volume solution with the converged velocity field.
#[derive(Debug, Clone, PartialEq)]
pub struct FvSolution {
    pub solution: EqwmSolution,
    pub cell_centers: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Kinematic total stress `(nu + nu_t) du/dy` on every face, wall first.
    pub face_stress: Vec<f64>,
}

/// Finite-volume equilibrium solve returning only the wall quantities.
pub fn solve_utau_fv(
    input: &WallModelInput,
    grid: &FvGrid,
    constants: &ClosureConstants,
    settings: &FvSettings,
) -> Result<EqwmSolution, EqwmError> {
    solve_fv_detailed(input, grid, constants, settings).map(|s| s.solution)
}

/// Cell-centred finite-volume discretization of `d/dy[(nu + nu_t) du/dy] = 0`
/// with `u(0) = 0` and `u(h) = U_LES`. The eddy viscosity on each face is the
/// equilibrium mixing-length value for the previous sweep's `u_tau` (Picard
/// iteration); `τ_w = μ u_1 / Δy_1` from the first cell.
pub fn solve_fv_detailed(
    input: &WallModelInput,
    grid: &FvGrid,
    constants: &ClosureConstants,
    settings: &FvSettings,
) -> Result<FvSolution, EqwmError> {
    input.validate()?;
    let h = grid.height();
    if ((h - input.h_wm) / input.h_wm).abs() > 1e-12 {
        return Err(EqwmError::InvalidGrid(format!(
            "grid height {h} differs from h_wm {}",
            input.h_wm
        )));
    }
    if !(settings.tol > 0.0) {
        return Err(EqwmError::InvalidInput(format!(
            "tolerance {} must be positive",
            settings.tol
        )));
    }
    let n = grid.n_cells();
    let yc = grid.cell_centers();
    let faces = grid.faces();
    let nu = input.nu;
    let mut work = WorkCounters::default();

    if input.u_les == 0.0 {
        return Ok(FvSolution {
            solution: EqwmSolution::new(0.0, input.rho, 0, 0.0, EqwmMethod::FiniteVolume, n, work),
            cell_centers: yc,
            velocity: vec![0.0; n],
            face_stress: vec![0.0; n + 1],
        });
    }

    // distance between the nodes on either side of face k
    let spacing: Vec<f64> = (0..=n)
        .map(|k| {
            let below = if k == 0 { 0.0 } else { yc[k - 1] };
            let above = if k == n { h } else { yc[k] };
            above - below
        })
        .collect();

    let mut u_tau = log_law_friction_velocity(input.u_les, h, nu, constants);
    let mut tau_prev: Option<f64> = None;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut coeff = vec![0.0; n + 1];

    for sweep in 1..=settings.max_iters {
        for k in 0..=n {
            let nu_t = match settings.eddy_viscosity {
                EddyViscosityMode::Laminar => 0.0,
                EddyViscosityMode::MixingLength if k == 0 => 0.0,
                EddyViscosityMode::MixingLength => {
                    work.kernel_evals += 1;
                    equilibrium_eddy_viscosity(faces[k] * u_tau / nu, nu, constants)
                }
            };
            coeff[k] = (nu + nu_t) / spacing[k];
        }
        for j in 0..n {
            lower[j] = -coeff[j];
            upper[j] = -coeff[j + 1];
            diag[j] = coeff[j] + coeff[j + 1];
            rhs[j] = 0.0;
        }
        rhs[n - 1] = coeff[n] * input.u_les;
        work.assembly_rows += n as u64;
        let velocity = solve_tridiagonal(&lower, &diag, &upper, &rhs)
            .ok_or_else(|| EqwmError::InvalidGrid("singular finite-volume system".into()))?;
        work.tridiag_rows += n as u64;

        let tau_kin = nu * velocity[0] / yc[0];
        u_tau = tau_kin.max(0.0).sqrt();
        let tau_w = input.rho * tau_kin;
        let change = tau_prev.map(|tp| ((tau_w - tp) / tau_w).abs());
        let done = match (settings.eddy_viscosity, change) {
            (EddyViscosityMode::Laminar, _) => true,
            (_, Some(c)) => c <= settings.tol,
            (_, None) => false,
        };
        if done {
            let face_stress = (0..=n)
                .map(|k| {
                    let below = if k == 0 { 0.0 } else { velocity[k - 1] };
                    let above = if k == n { input.u_les } else { velocity[k] };
                    coeff[k] * (above - below)
                })
                .collect();
            return Ok(FvSolution {
                solution: EqwmSolution::new(
                    u_tau,
                    input.rho,
                    sweep,
                    change.unwrap_or(0.0),
                    EqwmMethod::FiniteVolume,
                    n,
                    work,
                ),
                cell_centers: yc,
                velocity,
                face_stress,
            });
        }
        tau_prev = Some(tau_w);
    }
    Err(EqwmError::NotConverged {
        method: EqwmMethod::FiniteVolume,
        iterations: settings.max_iters,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: ClosureConstants = ClosureConstants::EQUILIBRIUM;

    #[test]
    fn laminar_override_gives_linear_profile() {
        let input = WallModelInput::new(2.0, 0.05, 1.5e-5, 1.2).unwrap();
        let grid = FvGrid::geometric(30, 0.05, 1.1).unwrap();
        let settings = FvSettings {
            eddy_viscosity: EddyViscosityMode::Laminar,
            ..FvSettings::default()
        };
        let sol = solve_fv_detailed(&input, &grid, &C, &settings).unwrap();
        let mu = input.rho * input.nu;
        let exact = mu * input.u_les / input.h_wm;
        assert!(((sol.solution.tau_w - exact) / exact).abs() < 1e-12);
        for (y, u) in sol.cell_centers.iter().zip(&sol.velocity) {
            assert!((u - input.u_les * y / input.h_wm).abs() < 1e-12);
        }
    }

    #[test]
    fn stress_is_constant_across_faces() {
        let input = WallModelInput::synthetic_log_law(1000.0, 0.1, &C);
        let grid = FvGrid::for_input(40, &input, &C).unwrap();
        let sol = solve_fv_detailed(&input, &grid, &C, &FvSettings::default()).unwrap();
        let max = sol.face_stress.iter().cloned().fold(f64::MIN, f64::max);
        let min = sol.face_stress.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - min) / max < 5e-3, "spread {}", (max - min) / max);
        assert_eq!(sol.solution.tau_w, input.rho * sol.solution.u_tau.powi(2));
    }

    #[test]
    fn degenerate_grids_rejected() {
        assert!(FvGrid::uniform(0, 1.0).is_err());
        assert!(FvGrid::from_faces(vec![0.0]).is_err());
        assert!(FvGrid::from_faces(vec![0.1, 0.2]).is_err());
        assert!(FvGrid::from_faces(vec![0.0, 0.2, 0.2]).is_err());
        let input = WallModelInput::new(1.0, 0.1, 1e-4, 1.0).unwrap();
        let wrong_height = FvGrid::uniform(10, 0.2).unwrap();
        assert!(matches!(
            solve_utau_fv(&input, &wrong_height, &C, &FvSettings::default()),
            Err(EqwmError::InvalidGrid(_))
        ));
    }

    #[test]
    fn stretched_grid_honours_first_cell_and_cap() {
        let g = FvGrid::stretched(40, 0.1, 1e-4).unwrap();
        assert!((g.faces()[1] - 1e-4).abs() < 1e-10);
        assert!(g.stretching() <= MAX_STRETCHING);
        assert_eq!(g.faces()[40], 0.1);
        let capped = FvGrid::stretched(10, 0.1, 1e-6).unwrap();
        assert_eq!(capped.stretching(), MAX_STRETCHING);
        let uniform = FvGrid::stretched(10, 0.1, 0.05).unwrap();
        assert_eq!(uniform.stretching(), 1.0);
    }

    #[test]
    fn sweep_work_is_linear_in_cells() {
        let input = WallModelInput::synthetic_log_law(1e4, 0.1, &C);
        for n in [20, 80] {
            let grid = FvGrid::for_input(n, &input, &C).unwrap();
            let sol = solve_utau_fv(&input, &grid, &C, &FvSettings::default()).unwrap();
            let sweeps = sol.iterations as u64;
            assert_eq!(sol.work.tridiag_rows, n as u64 * sweeps);
            assert_eq!(sol.work.kernel_evals, n as u64 * sweeps);
        }
    }
}
