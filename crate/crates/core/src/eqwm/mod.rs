//! Equilibrium (constant-stress) wall model.
//!
//! Two discretizations of the same ODE are provided: the grid-free spectral
//! form, which integrates the mixing-length velocity gradient with a GLL rule
//! and shoots on `u_tau`, and the finite-volume reference, which iterates a
//! tridiagonal solve on a stretched wall-normal grid.

mod fv;
mod optimal;
mod profile;
mod spectral;

pub use fv::{
    solve_fv_detailed, solve_utau_fv, EddyViscosityMode, FvGrid, FvSettings, FvSolution,
    MAX_STRETCHING,
};
pub use optimal::{
    optimal_point_count, optimal_point_count_for, OptimalCount, POINT_CAP, REFERENCE_POINTS,
    SYNTHETIC_H_OVER_DELTA,
};
pub use profile::{
    detect_spurious_profile, reconstruct_profile, spectral_profile, ProfileDiagnosis,
    SPURIOUS_THRESHOLD,
};
pub use spectral::{default_tolerance, solve_utau_spectral, DEFAULT_MAX_SECANT_ITERS};

use thiserror::Error;

use crate::closure::ClosureConstants;
use crate::counters::WorkCounters;
use crate::quadrature::{cached_gll_rule, MapKind, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EqwmError {
    #[error("invalid wall-model input: {0}")]
    InvalidInput(String),
    #[error(
        "{method:?} solve did not converge in {iterations} iterations (residual {residual:e})"
    )]
    NotConverged {
        method: EqwmMethod,
        iterations: usize,
        residual: f64,
    },
    #[error("invalid wall-model grid: {0}")]
    InvalidGrid(String),
    #[error("sample y = {y} outside [0, {h_wm}]")]
    OutOfRange { y: f64, h_wm: f64 },
    #[error("{0}")]
    Precondition(String),
    #[error("error target {target} not reached below the cap of {cap} points (error {error:e} at the cap)")]
    Saturated { cap: usize, target: f64, error: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Discretization used to solve the equilibrium model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EqwmMethod {
    SpectralLinear,
    SpectralClustered,
    FiniteVolume,
}

impl EqwmMethod {
    pub fn map_kind(&self) -> Option<MapKind> {
        match self {
            EqwmMethod::SpectralLinear => Some(MapKind::Linear),
            EqwmMethod::SpectralClustered => Some(MapKind::Clustered),
            EqwmMethod::FiniteVolume => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EqwmMethod::SpectralLinear => "gq-linear",
            EqwmMethod::SpectralClustered => "gq-clustered",
            EqwmMethod::FiniteVolume => "fv",
        }
    }
}

impl From<MapKind> for EqwmMethod {
    fn from(kind: MapKind) -> Self {
        match kind {
            MapKind::Linear => EqwmMethod::SpectralLinear,
            MapKind::Clustered => EqwmMethod::SpectralClustered,
        }
    }
}

/// LES data at the matching height of one wall face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallModelInput {
    /// Wall-parallel velocity magnitude at `h_wm`.
    pub u_les: f64,
    pub h_wm: f64,
    /// Kinematic viscosity.
    pub nu: f64,
    pub rho: f64,
}

impl WallModelInput {
    pub fn new(u_les: f64, h_wm: f64, nu: f64, rho: f64) -> Result<Self, EqwmError> {
        let input = Self {
            u_les,
            h_wm,
            nu,
            rho,
        };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<(), EqwmError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(self.u_les.is_finite() && self.u_les >= 0.0) {
            return Err(EqwmError::InvalidInput(format!("u_les = {}", self.u_les)));
        }
        if !ok(self.h_wm) || !ok(self.nu) || !ok(self.rho) {
            return Err(EqwmError::InvalidInput(format!(
                "h_wm = {}, nu = {}, rho = {} must all be positive",
                self.h_wm, self.nu, self.rho
            )));
        }
        Ok(())
    }

    /// Channel at friction Reynolds number `re_tau` in outer units
    /// (`u_tau = delta = rho = 1`) matched at `h_over_delta`, with the LES
    /// velocity taken from the log law of `constants`.
    pub fn synthetic_log_law(re_tau: f64, h_over_delta: f64, constants: &ClosureConstants) -> Self {
        let h_plus = h_over_delta * re_tau;
        Self {
            u_les: constants.log_law(h_plus),
            h_wm: h_over_delta,
            nu: 1.0 / re_tau,
            rho: 1.0,
        }
    }
}

/// Outcome of an equilibrium solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqwmSolution {
    pub u_tau: f64,
    pub tau_w: f64,
    /// Residual evaluations (spectral) or tridiagonal sweeps (finite volume).
    pub iterations: usize,
    /// Final velocity mismatch (spectral) or relative τ_w change (finite volume).
    pub residual: f64,
    pub method: EqwmMethod,
    /// Quadrature points or finite-volume cells.
    pub points: usize,
    pub work: WorkCounters,
}

impl EqwmSolution {
    pub(crate) fn new(
        u_tau: f64,
        rho: f64,
        iterations: usize,
        residual: f64,
        method: EqwmMethod,
        points: usize,
        work: WorkCounters,
    ) -> Self {
        Self {
            u_tau,
            tau_w: rho * u_tau * u_tau,
            iterations,
            residual,
            method,
            points,
            work,
        }
    }

    /// Viscous length scale `nu / u_tau`.
    pub fn viscous_length(&self, nu: f64) -> f64 {
        nu / self.u_tau
    }
}

/// Solves with `method` at resolution `n` (quadrature points or cells) using
/// default tolerances.
pub fn solve_with(
    method: EqwmMethod,
    n: usize,
    input: &WallModelInput,
    constants: &ClosureConstants,
) -> Result<EqwmSolution, EqwmError> {
    match method.map_kind() {
        Some(kind) => {
            let rule = cached_gll_rule(n)?;
            solve_utau_spectral(
                input,
                &rule,
                kind,
                constants,
                default_tolerance(input),
                DEFAULT_MAX_SECANT_ITERS,
            )
        }
        None => {
            let grid = FvGrid::for_input(n, input, constants)?;
            solve_utau_fv(input, &grid, constants, &FvSettings::default())
        }
    }
}
